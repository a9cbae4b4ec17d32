use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lift::{explore_product, Product, ProductLift};
use crate::model::{StateId, StateSet, WeightedMdp};
use crate::query::{MultiReachQuery, PayoffKind, PercentileConstraint};
use crate::rational::Rational;
use crate::reach::{absorbing_multi_reach, FlowSolution};
use crate::strategy::{MooreStrategy, MAX_CHAIN_STATES};

/// Smallest `h ≥ 1` with `W·λ^h/(1−λ) ≤ ε/2`, by exact power iteration.
pub fn ds_horizon_bound(lambda: &Rational, w: i64, eps: &Rational) -> Result<usize> {
    if !lambda.is_positive() || *lambda >= Rational::one() {
        return Err(Error::InvalidQuery(format!("discount factor {lambda} must lie strictly between 0 and 1")));
    }
    if !eps.is_positive() {
        return Err(Error::PreciseDiscountedSum);
    }
    if w == 0 {
        return Ok(1);
    }
    let half = eps / &Rational::from_integer(2);
    let scale = Rational::from_integer(w.abs()) / (Rational::one() - lambda);
    let mut pow = lambda.clone();
    let mut h = 1;
    while &scale * &pow > half {
        pow = &pow * lambda;
        h += 1;
    }
    Ok(h)
}

/// Nearest multiple of `gamma`, ties rounded up.
pub fn round_to_grid(x: &Rational, gamma: &Rational) -> Rational {
    let k = (x / gamma + Rational::new(1, 2)).floor();
    Rational::from(k) * gamma
}

/// Depth-`h` unfolding with rounded discounted-sum labels, merged per layer
/// on equal (state, labels).
#[derive(Debug, Clone)]
pub struct RoundedUnfolding {
    pub product: Product,
    pub h: usize,
    pub gamma: Rational,
    /// `(depth, labels)` per product tag; the root has depth 1.
    pub layers: Vec<(usize, Vec<Rational>)>,
    /// Leaves with `label_i ≥ v_i + ε`.
    pub sure: Vec<StateSet>,
    /// Leaves with `label_i ≥ v_i − ε`.
    pub maybe: Vec<StateSet>,
}

impl RoundedUnfolding {
    pub fn depth(&self, p: StateId) -> usize {
        self.layers[self.product.tag[p]].0
    }

    pub fn labels(&self, p: StateId) -> &[Rational] {
        &self.layers[self.product.tag[p]].1
    }
}

fn discounts(constraints: &[PercentileConstraint]) -> Result<Vec<Rational>> {
    constraints
        .iter()
        .map(|c| match (&c.kind, &c.discount) {
            (PayoffKind::DiscountedSum, Some(l)) => Ok(l.clone()),
            (PayoffKind::DiscountedSum, None) => {
                Err(Error::InvalidQuery("discounted_sum constraint needs a discount factor".into()))
            }
            (k, _) => Err(Error::InvalidQuery(format!("expected discounted_sum constraints, found {k}"))),
        })
        .collect()
}

/// Unfolds `h` levels from `init`; a child at depth `n+1` adds
/// `λ_i^n·w_{l_i}(a)` to its parent's label and rounds to the `γ` grid.
pub fn ds_build_rounded_unfolding(
    mdp: &WeightedMdp,
    init: StateId,
    constraints: &[PercentileConstraint],
    eps: &Rational,
) -> Result<RoundedUnfolding> {
    let lambdas = discounts(constraints)?;
    if !eps.is_positive() {
        return Err(Error::PreciseDiscountedSum);
    }
    if *eps >= Rational::one() {
        return Err(Error::InvalidQuery(format!("epsilon {eps} must be below 1")));
    }
    let lambda_max = lambdas.iter().max().cloned().unwrap_or_else(|| Rational::new(1, 2));
    let h = ds_horizon_bound(&lambda_max, mdp.max_abs_weight(), eps)?;
    let gamma = if h > 1 { eps / &Rational::from(h - 1) } else { eps.clone() };
    // powers[i][n] = λ_i^n for n < h
    let powers: Vec<Vec<Rational>> = lambdas
        .iter()
        .map(|l| {
            let mut v = vec![Rational::one()];
            for n in 1..h {
                v.push(&v[n - 1] * l);
            }
            v
        })
        .collect();
    let root = (1usize, vec![Rational::zero(); constraints.len()]);
    let (product, layers) = explore_product(
        mdp,
        init,
        root,
        |s, a, (n, labels)| {
            let act = mdp.action(s, a);
            let next = labels
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    let w = Rational::from_integer(act.weight(constraints[i].dim));
                    round_to_grid(&(x + &(&powers[i][*n] * &w)), &gamma)
                })
                .collect();
            (n + 1, next)
        },
        |_, (n, _)| *n >= h,
        |(n, labels)| format!("{n}:{labels:?}"),
        MAX_CHAIN_STATES,
    )?;
    let total = product.num_states();
    let leaf_sets = |shift: &Rational| -> Vec<StateSet> {
        constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let bar = &c.value + shift;
                StateSet::from_states(
                    total,
                    (0..total).filter(|p| {
                        let (n, labels) = &layers[product.tag[*p]];
                        *n == h && labels[i] >= bar
                    }),
                )
            })
            .collect()
    };
    let sure = leaf_sets(eps);
    let maybe = leaf_sets(&-eps);
    Ok(RoundedUnfolding { product, h, gamma, layers, sure, maybe })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapVerdict {
    Yes,
    No,
    Unknown,
}

/// Outcome of the ε-gap procedure with the thresholds it certifies.
#[derive(Debug, Clone)]
pub struct GapReport {
    pub verdict: GapVerdict,
    /// Witness for the query as stated (verdict Yes).
    pub strategy: Option<MooreStrategy>,
    pub flow: Option<FlowSolution>,
    pub eps: Rational,
    pub h: usize,
    pub gamma: Rational,
    pub product_states: usize,
    /// Thresholds `v_i` at which a strategy is known to exist.
    pub satisfiable_at: Option<Vec<Rational>>,
    /// Thresholds `v_i` at which no strategy exists.
    pub unsatisfiable_at: Option<Vec<Rational>>,
    /// Smaller epsilon to retry with after Unknown.
    pub suggested_eps: Option<Rational>,
}

/// ε-gap decision for `P[DS_i ≥ v_i] ≥ α_i`: Yes if the thresholds shifted
/// up by `ε` are met on the unfolding (the witness plays the unfolding
/// strategy for `h − 1` steps, then action 0), No if even the thresholds
/// shifted down fail, Unknown otherwise.
pub fn ds_eps_gap_solve(
    mdp: &WeightedMdp,
    init: StateId,
    constraints: &[PercentileConstraint],
    eps: &Rational,
) -> Result<GapReport> {
    let unf = ds_build_rounded_unfolding(mdp, init, constraints, eps)?;
    let thresholds: Vec<Rational> = constraints.iter().map(|c| c.prob.clone()).collect();
    let values: Vec<Rational> = constraints.iter().map(|c| c.value.clone()).collect();
    let two_eps = eps * &Rational::from_integer(2);
    let pm = &unf.product.mdp;
    let product_states = unf.product.num_states();
    let mut report = GapReport {
        verdict: GapVerdict::No,
        strategy: None,
        flow: None,
        eps: eps.clone(),
        h: unf.h,
        gamma: unf.gamma.clone(),
        product_states,
        satisfiable_at: None,
        unsatisfiable_at: None,
        suggested_eps: None,
    };
    let sure = MultiReachQuery::new(unf.sure.clone(), thresholds.clone());
    if let Some(flow) = absorbing_multi_reach(pm, unf.product.init, &sure)? {
        let lift = ProductLift { product: unf.product.clone(), inner: flow.strategy.clone() };
        report.strategy = Some(MooreStrategy::from_policy(mdp, &lift, init)?);
        report.flow = Some(flow);
        report.verdict = GapVerdict::Yes;
        report.satisfiable_at = Some(values);
        return Ok(report);
    }
    let maybe = MultiReachQuery::new(unf.maybe.clone(), thresholds);
    if let Some(flow) = absorbing_multi_reach(pm, unf.product.init, &maybe)? {
        report.flow = Some(flow);
        report.verdict = GapVerdict::Unknown;
        report.satisfiable_at = Some(values.iter().map(|v| v - &two_eps).collect());
        report.unsatisfiable_at = Some(values.iter().map(|v| v + &two_eps).collect());
        report.suggested_eps = Some(eps / &Rational::from_integer(2));
    } else {
        report.unsatisfiable_at = Some(values);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::MdpBuilder;
    use crate::rational::rat;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    fn ds(dim: usize, v: Rational, p: Rational) -> PercentileConstraint {
        PercentileConstraint::new(PayoffKind::DiscountedSum, dim, v, p).with_discount(rat(1, 2))
    }

    #[test]
    fn horizon_examples() {
        assert_eq!(ds_horizon_bound(&rat(1, 2), 1, &rat(1, 2)).unwrap(), 3);
        assert_eq!(ds_horizon_bound(&rat(1, 2), 1, &r(1)).unwrap(), 2);
        assert_eq!(ds_horizon_bound(&rat(1, 2), 0, &rat(1, 2)).unwrap(), 1);
        assert_eq!(ds_horizon_bound(&rat(1, 2), 1, &r(0)).unwrap_err(), Error::PreciseDiscountedSum);
    }

    #[test]
    fn rounding_ties_go_up() {
        assert_eq!(round_to_grid(&rat(1, 2), &r(1)), r(1));
        assert_eq!(round_to_grid(&rat(-1, 2), &r(1)), r(0));
        assert_eq!(round_to_grid(&rat(5, 16), &rat(1, 8)), rat(3, 8));
        assert_eq!(round_to_grid(&rat(3, 10), &rat(1, 8)), rat(1, 4));
    }

    #[test]
    fn b_branch_label_close_to_prefix_sum() {
        let m = fixtures::one_state_ab();
        let eps = rat(1, 8);
        let unf = ds_build_rounded_unfolding(&m, 0, &[ds(0, r(0), r(1))], &eps).unwrap();
        let h = unf.h;
        // follow action b (index 1) to the leaf
        let mut p = unf.product.init;
        for _ in 1..h {
            p = unf.product.mdp.action(p, 1).successors[0].0;
        }
        assert_eq!(unf.depth(p), h);
        let exact: Rational = (1..h).map(|j| rat(1, 2).pow(j as u32)).sum();
        let err = (&unf.labels(p)[0] - &exact).abs();
        assert!(err <= &unf.gamma * &Rational::from(h - 1) / r(2));
    }

    #[test]
    fn zero_weights_merge_to_one_node_per_layer() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_states(&["a", "b"]);
        b.add_edge(s[0], "x", &[0], s[1]);
        b.add_edge(s[0], "y", &[0], s[0]);
        b.add_edge(s[1], "z", &[0], s[0]);
        let m = b.build().unwrap();
        let unf = ds_build_rounded_unfolding(&m, 0, &[ds(0, r(0), r(1))], &rat(1, 4)).unwrap();
        assert_eq!(unf.h, 1);
        assert_eq!(unf.product.num_states(), 1);
        assert!(unf.labels(0)[0].is_zero());
    }

    #[test]
    fn gap_examples() {
        let m = fixtures::one_state_ab();
        let yes = ds_eps_gap_solve(&m, 0, &[ds(0, rat(1, 2), r(1))], &rat(1, 16)).unwrap();
        assert_eq!(yes.verdict, GapVerdict::Yes);
        assert!(yes.strategy.is_some());
        let no = ds_eps_gap_solve(&m, 0, &[ds(0, r(2), r(1))], &rat(1, 4)).unwrap();
        assert_eq!(no.verdict, GapVerdict::No);
        let unk = ds_eps_gap_solve(&m, 0, &[ds(0, r(1), r(1)), ds(1, r(-1), r(1))], &rat(1, 8)).unwrap();
        assert_eq!(unk.verdict, GapVerdict::Unknown);
        assert_eq!(unk.suggested_eps, Some(rat(1, 16)));
    }

    #[test]
    fn non_positive_epsilon_rejected() {
        let m = fixtures::one_state_ab();
        let e = ds_eps_gap_solve(&m, 0, &[ds(0, r(0), r(1))], &r(0)).unwrap_err();
        assert_eq!(e, Error::PreciseDiscountedSum);
    }
}
