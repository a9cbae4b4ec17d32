//! Checking strategies: Monte-Carlo estimates, exact analysis of induced
//! chains, and a brute-force decision procedure for small instances.

mod exact;
mod oracle;

pub use exact::{exact_constraint_probability, exact_verify_finite, ExactCheck};
pub use oracle::{brute_force_oracle, grid_memoryless_witness, pure_memoryless_witness, OracleAnswer, OracleVerdict, WitnessKind};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::Result;
use crate::model::{RunPrefix, StateId, WeightedMdp};
use crate::payoff::{discounted_tail_bound, meets, prefix_payoff, PrefixValue};
use crate::query::{PayoffKind, PercentileConstraint};
use crate::rational::Rational;
use crate::strategy::{Dist, Policy};

/// Confidence level of reported intervals.
pub const CONFIDENCE: f64 = 0.99;
/// Most steps of a run used to evaluate a discounted sum.
pub const DS_SIM_STEPS: usize = 128;
/// Evaluation of a discounted sum stops once the tail bound is this small.
pub const DS_SIM_TAIL: (i64, i64) = (1, 1 << 20);

fn pick<T: Clone>(d: &Dist<T>, rng: &mut ChaCha8Rng) -> T {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (x, p) in d {
        acc += p.to_f64();
        if u < acc {
            return x.clone();
        }
    }
    d.iter().rev().find(|(_, p)| p.is_positive()).map(|(x, _)| x.clone()).expect("nonempty distribution")
}

fn episode_rng(seed: u64, episode: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode);
    rng
}

/// One run of `horizon` steps.
pub fn sample_run<P: Policy>(
    mdp: &WeightedMdp,
    policy: &P,
    init: StateId,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> RunPrefix {
    let mut run = RunPrefix::start(init);
    let mut s = init;
    let mut m = pick(&policy.initial(init), rng);
    for _ in 0..horizon {
        let a = pick(&policy.act(s, &m), rng);
        let t = pick(&mdp.action(s, a).successors, rng);
        m = pick(&policy.update(&m, s, a, t), rng);
        run.push(a, t);
        s = t;
    }
    run
}

/// Episodes sampled in parallel; episode `e` uses stream `e` of the seeded
/// generator, so the result does not depend on scheduling.
pub fn simulate_runs<P: Policy + Sync>(
    mdp: &WeightedMdp,
    policy: &P,
    init: StateId,
    horizon: usize,
    episodes: usize,
    seed: u64,
) -> Vec<RunPrefix> {
    (0..episodes as u64)
        .into_par_iter()
        .map(|e| sample_run(mdp, policy, init, horizon, &mut episode_rng(seed, e)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintEstimate {
    pub kind: PayoffKind,
    pub dim: usize,
    pub value: Rational,
    pub prob: Rational,
    /// Episodes meeting the threshold relaxed by `slack`.
    pub successes: usize,
    /// Episodes meeting the threshold exactly as stated.
    pub strict_successes: usize,
    pub frequency: f64,
    /// Clopper–Pearson interval for `frequency`.
    pub lower: f64,
    pub upper: f64,
    /// Allowance on the payoff value for what a finite prefix cannot show.
    pub slack: Rational,
    /// `frequency ≥ prob − half-width`.
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub generator: String,
    pub seed: u64,
    pub episodes: usize,
    pub horizon: usize,
    pub confidence: f64,
    pub constraints: Vec<ConstraintEstimate>,
}

impl SimulationReport {
    pub fn all_pass(&self) -> bool {
        self.constraints.iter().all(|c| c.passes)
    }
}

/// Exact two-sided Clopper–Pearson interval for `k` successes in `n`.
pub fn clopper_pearson(k: usize, n: usize, level: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let tail = (1.0 - level) / 2.0;
    let (kf, nf) = (k as f64, n as f64);
    let lower = if k == 0 { 0.0 } else { Beta::new(kf, nf - kf + 1.0).expect("beta shape").inverse_cdf(tail) };
    let upper = if k == n { 1.0 } else { Beta::new(kf + 1.0, nf - kf).expect("beta shape").inverse_cdf(1.0 - tail) };
    (lower, upper)
}

/// Payoff estimate of one constraint on a simulated prefix, and the slack
/// that goes with it.
fn evaluate(
    mdp: &WeightedMdp,
    run: &RunPrefix,
    c: &PercentileConstraint,
    mp_slack: &Rational,
) -> Result<(PrefixValue, Rational)> {
    match c.kind {
        PayoffKind::DiscountedSum => {
            let lambda = c.discount.clone().unwrap_or_else(|| Rational::new(1, 2));
            let w = mdp.max_abs_weight();
            let small = Rational::new(DS_SIM_TAIL.0, DS_SIM_TAIL.1);
            let mut n = run.len().min(DS_SIM_STEPS);
            while n > 0 && discounted_tail_bound(w, &lambda, n - 1) <= small {
                n -= 1;
            }
            let cut = RunPrefix { states: run.states[..=n].to_vec(), actions: run.actions[..n].to_vec() };
            Ok((prefix_payoff(mdp, &cut, c)?, discounted_tail_bound(w, &lambda, n)))
        }
        PayoffKind::MpSup => {
            // largest running average over the second half of the prefix
            let w: Vec<i64> = run.weights(mdp).map(|v| v[c.dim]).collect();
            let mut sum: i64 = 0;
            let mut best: Option<Rational> = None;
            for (j, x) in w.iter().enumerate() {
                sum += x;
                if j + 1 >= w.len().div_ceil(2) {
                    let avg = Rational::new(sum, j as i64 + 1);
                    best = Some(best.map_or(avg.clone(), |b| b.max(avg)));
                }
            }
            let value = best.map(PrefixValue::Finite).unwrap_or(PrefixValue::MinusInfinity);
            Ok((value, mp_slack.clone()))
        }
        PayoffKind::MpInf => Ok((prefix_payoff(mdp, run, c)?, mp_slack.clone())),
        _ => Ok((prefix_payoff(mdp, run, c)?, Rational::zero())),
    }
}

fn relaxed(c: &PercentileConstraint, slack: &Rational) -> PercentileConstraint {
    let mut r = c.clone();
    r.value = match c.kind {
        PayoffKind::TruncatedSum => &c.value + slack,
        _ => &c.value - slack,
    };
    r
}

/// Per-constraint empirical satisfaction over `episodes` runs of length
/// `horizon`. Mean payoffs are judged up to `mp_slack`, discounted sums up
/// to the tail bound of the evaluated prefix.
#[allow(clippy::too_many_arguments)]
pub fn estimate_percentiles<P: Policy + Sync>(
    mdp: &WeightedMdp,
    policy: &P,
    init: StateId,
    constraints: &[PercentileConstraint],
    horizon: usize,
    episodes: usize,
    seed: u64,
    mp_slack: &Rational,
) -> Result<SimulationReport> {
    let rows: Vec<Result<Vec<(bool, bool, Rational)>>> = (0..episodes as u64)
        .into_par_iter()
        .map(|e| {
            let run = sample_run(mdp, policy, init, horizon, &mut episode_rng(seed, e));
            constraints
                .iter()
                .map(|c| {
                    let (v, slack) = evaluate(mdp, &run, c, mp_slack)?;
                    Ok((meets(&v, &relaxed(c, &slack)), meets(&v, c), slack))
                })
                .collect()
        })
        .collect();
    let mut succ = vec![0usize; constraints.len()];
    let mut strict = vec![0usize; constraints.len()];
    let mut slack = vec![Rational::zero(); constraints.len()];
    for row in rows {
        for (i, (ok, exact, sl)) in row?.into_iter().enumerate() {
            succ[i] += usize::from(ok);
            strict[i] += usize::from(exact);
            if sl > slack[i] {
                slack[i] = sl;
            }
        }
    }
    let estimates = constraints
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let frequency = if episodes == 0 { 0.0 } else { succ[i] as f64 / episodes as f64 };
            let (lower, upper) = clopper_pearson(succ[i], episodes, CONFIDENCE);
            let half = (upper - lower) / 2.0;
            ConstraintEstimate {
                kind: c.kind,
                dim: c.dim,
                value: c.value.clone(),
                prob: c.prob.clone(),
                successes: succ[i],
                strict_successes: strict[i],
                frequency,
                lower,
                upper,
                slack: slack[i].clone(),
                passes: frequency + half + 1e-12 >= c.prob.to_f64(),
            }
        })
        .collect();
    Ok(SimulationReport {
        generator: "ChaCha8".into(),
        seed,
        episodes,
        horizon,
        confidence: CONFIDENCE,
        constraints: estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::MdpBuilder;
    use crate::rational::rat;
    use crate::strategy::{uniform, Memoryless};

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn deterministic_runs_are_identical() {
        let m = fixtures::s_t_mp();
        let runs = simulate_runs(&m, &Memoryless::first_action(2), 0, 10, 20, 7);
        assert!(runs.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn seeded_runs_repeat() {
        let m = fixtures::randomness_lemma();
        let coin = Memoryless { choice: vec![uniform(&[0, 1]), vec![], vec![]] };
        let a = simulate_runs(&m, &coin, 0, 5, 200, 42);
        let b = simulate_runs(&m, &coin, 0, 5, 200, 42);
        assert_eq!(a, b);
        let serial: Vec<RunPrefix> =
            (0..200u64).map(|e| sample_run(&m, &coin, 0, 5, &mut episode_rng(42, e))).collect();
        assert_eq!(a, serial);
    }

    #[test]
    fn fair_branch_frequency() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_states(&["s", "l", "r"]);
        b.add_action(s[0], "go", &[0], &[(s[1], rat(1, 2)), (s[2], rat(1, 2))]);
        b.add_edge(s[1], "x", &[1], s[1]);
        b.add_edge(s[2], "x", &[0], s[2]);
        let m = b.build().unwrap();
        let c = PercentileConstraint::new(PayoffKind::Sup, 0, r(1), rat(1, 2));
        let rep = estimate_percentiles(&m, &Memoryless::first_action(3), 0, &[c], 3, 10_000, 1, &rat(1, 10)).unwrap();
        let e = &rep.constraints[0];
        assert!(e.lower <= 0.5 && 0.5 <= e.upper);
        assert!(e.lower <= e.frequency && e.frequency <= e.upper);
        assert!(e.passes);
    }

    #[test]
    fn discounted_tail_is_reported() {
        let m = fixtures::one_state_ab();
        let b_forever = Memoryless { choice: vec![vec![(1, r(1))]] };
        let c = PercentileConstraint::new(PayoffKind::DiscountedSum, 0, r(1), r(1)).with_discount(rat(1, 2));
        let rep = estimate_percentiles(&m, &b_forever, 0, &[c], 20, 10, 3, &rat(1, 10)).unwrap();
        let e = &rep.constraints[0];
        assert_eq!(e.slack, rat(2, 1 << 20));
        assert_eq!(e.successes, 10);
        assert_eq!(e.strict_successes, 0);
    }

    #[test]
    fn interval_edges() {
        assert_eq!(clopper_pearson(0, 10, 0.99).0, 0.0);
        assert_eq!(clopper_pearson(10, 10, 0.99).1, 1.0);
        let (lo, hi) = clopper_pearson(50, 100, 0.99);
        assert!(lo < 0.5 && hi > 0.5 && hi - lo < 0.3);
    }
}
