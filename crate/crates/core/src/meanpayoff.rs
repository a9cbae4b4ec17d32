//! Mean-payoff percentile queries.
//!
//! Inside an end component the relevant object is a steady-state flow: a
//! distribution `x` over the component's state-action pairs that is
//! invariant under the transitions. Its weighted sums are the mean payoffs a
//! memoryless strategy proportional to `x` achieves.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::chain::stationary_distribution;
use crate::error::{Error, Result};
use crate::graph::EndComponent;
use crate::lift::{Phase, TwoPhase};
use crate::lp::{solve_lp, Direction, LinearProgram, LpOutcome, Relation, Row};
use crate::model::{ActionIdx, StateId, WeightedMdp};
use crate::query::{PayoffKind, PercentileConstraint};
use crate::rational::{rat, Rational};
use crate::reach::{lambda_decomposition_solve, prefix_independent_solve, LambdaOutcome, PrefixIndependent};
use crate::strategy::{uniform, Dist, Memoryless, Policy};

/// Steady-state flow program over the actions of `mec`: conservation at
/// every member state and total mass 1.
pub fn steady_state_program(mdp: &WeightedMdp, mec: &EndComponent) -> (LinearProgram, Vec<(StateId, ActionIdx)>) {
    let vars: Vec<(StateId, ActionIdx)> = mec.state_actions().collect();
    let mut lp = LinearProgram::new(vars.len());
    let mut rows: HashMap<StateId, HashMap<usize, Rational>> = HashMap::new();
    for (j, (s, a)) in vars.iter().enumerate() {
        *rows.entry(*s).or_default().entry(j).or_insert_with(Rational::zero) += Rational::one();
        for (t, p) in &mdp.action(*s, *a).successors {
            *rows.entry(*t).or_default().entry(j).or_insert_with(Rational::zero) -= p;
        }
    }
    for s in &mec.states {
        let mut row: Row = rows.remove(s).unwrap_or_default().into_iter().filter(|(_, v)| !v.is_zero()).collect();
        row.sort_by_key(|(j, _)| *j);
        lp.add_constraint(row, Relation::Eq, Rational::zero());
    }
    lp.add_constraint((0..vars.len()).map(|j| (j, Rational::one())).collect(), Relation::Eq, Rational::one());
    (lp, vars)
}

fn weight_row(mdp: &WeightedMdp, vars: &[(StateId, ActionIdx)], dim: usize) -> Row {
    vars.iter()
        .enumerate()
        .filter_map(|(j, (s, a))| {
            let w = mdp.action(*s, *a).weight(dim);
            (w != 0).then(|| (j, Rational::from_integer(w)))
        })
        .collect()
}

/// Memoryless strategy proportional to `x` on its support; other member
/// states play uniformly over the component's actions, which reaches the
/// support almost surely.
pub fn flow_strategy(
    mdp: &WeightedMdp,
    mec: &EndComponent,
    vars: &[(StateId, ActionIdx)],
    x: &[Rational],
) -> Memoryless {
    let mut choice: Vec<Dist<ActionIdx>> = vec![Vec::new(); mdp.num_states()];
    for (j, (s, a)) in vars.iter().enumerate() {
        if x[j].is_positive() {
            choice[*s].push((*a, x[j].clone()));
        }
    }
    for (s, acts) in &mec.actions {
        let d = &mut choice[*s];
        if d.is_empty() {
            *d = uniform(acts);
        } else {
            let total: Rational = d.iter().map(|(_, p)| p).sum();
            for e in d.iter_mut() {
                e.1 = &e.1 / &total;
            }
        }
    }
    Memoryless { choice }
}

/// Largest expected mean payoff on `dim` achievable inside `mec`, with an
/// optimal memoryless strategy.
pub fn mec_max_expected_mp(mdp: &WeightedMdp, mec: &EndComponent, dim: usize) -> Result<(Rational, Memoryless)> {
    let (mut lp, vars) = steady_state_program(mdp, mec);
    lp.set_objective(weight_row(mdp, &vars, dim), Direction::Maximize);
    match solve_lp(&lp)? {
        LpOutcome::Optimal { point, value } => Ok((value, flow_strategy(mdp, mec, &vars, &point))),
        other => Err(Error::MalformedLp(format!("steady-state program of an end component gave {other:?}"))),
    }
}

/// A steady-state flow of `mec` meeting `Σ x·w_l ≥ v` for every `(l, v)`.
pub fn mp_inf_joint_flow(
    mdp: &WeightedMdp,
    mec: &EndComponent,
    reqs: &[(usize, Rational)],
) -> Result<Option<(Vec<(StateId, ActionIdx)>, Vec<Rational>)>> {
    let (mut lp, vars) = steady_state_program(mdp, mec);
    for (dim, v) in reqs {
        lp.add_constraint(weight_row(mdp, &vars, *dim), Relation::Ge, v.clone());
    }
    Ok(solve_lp(&lp)?.point().map(|p| (vars.clone(), p.to_vec())))
}

/// Whether some strategy inside `mec` meets every `MP-inf_l ≥ v` of `reqs`
/// almost surely.
pub fn mp_inf_joint_feasible(mdp: &WeightedMdp, mec: &EndComponent, reqs: &[(usize, Rational)]) -> Result<bool> {
    Ok(mp_inf_joint_flow(mdp, mec, reqs)?.is_some())
}

/// Stationary flow of the uniform strategy over the component's actions.
pub fn uniform_flow(mdp: &WeightedMdp, mec: &EndComponent) -> Result<Vec<Rational>> {
    let pos: HashMap<StateId, usize> = mec.states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut rows = vec![Vec::new(); mec.states.len()];
    for (s, acts) in &mec.actions {
        let share = rat(1, acts.len() as i64);
        let mut row: HashMap<usize, Rational> = HashMap::new();
        for a in acts {
            for (t, p) in &mdp.action(*s, *a).successors {
                *row.entry(pos[t]).or_insert_with(Rational::zero) += &share * p;
            }
        }
        rows[pos[s]] = row.into_iter().collect();
    }
    let class: Vec<usize> = (0..mec.states.len()).collect();
    let pi = stationary_distribution(&rows, &class)?;
    Ok(mec
        .state_actions()
        .map(|(s, _)| &pi[pos[&s]] / &Rational::from_integer(mec.actions[&s].len() as i64))
        .collect())
}

/// Mixes `x` with the uniform flow so that every action of the component is
/// used, losing at most `eps` on each dimension.
pub fn perturbed_flow(
    mdp: &WeightedMdp,
    mec: &EndComponent,
    vars: &[(StateId, ActionIdx)],
    x: &[Rational],
    eps: &Rational,
) -> Result<Vec<Rational>> {
    let u = uniform_flow(mdp, mec)?;
    let mut spread = Rational::one();
    for dim in 0..mdp.dims() {
        let row = weight_row(mdp, vars, dim);
        let gx: Rational = row.iter().map(|(j, w)| w * &x[*j]).sum();
        let gu: Rational = row.iter().map(|(j, w)| w * &u[*j]).sum();
        spread = spread.max(gx - gu);
    }
    let delta = (eps / &spread).min(Rational::one());
    let keep = Rational::one() - &delta;
    Ok(x.iter().zip(&u).map(|(a, b)| &keep * a + &delta * b).collect())
}

/// Steps after which the `K`-step average stays within `ε` of the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct K0Bound {
    pub k0: u64,
    /// False when the guarantee did not hold up to the search cap and `k0`
    /// is the cap itself.
    pub certified: bool,
}

/// Largest `K` examined by [`schedule_bound_k0`].
pub const K0_CAP: u64 = 96;

/// Smallest `K_0 ≤ K0_CAP` such that, from every state of `mec`, the optimal
/// memoryless strategy for `dim` has `P[avg_K ≥ v* − ε] ≥ 1 − η` for all
/// `K_0 ≤ K ≤ K0_CAP`. The transient distributions are propagated in `f64`:
/// exact denominators grow with every step and the bound only sizes the
/// schedule.
pub fn schedule_bound_k0(
    mdp: &WeightedMdp,
    mec: &EndComponent,
    dim: usize,
    eps: &Rational,
    eta: &Rational,
) -> Result<K0Bound> {
    if *eta >= Rational::one() {
        return Ok(K0Bound { k0: 1, certified: true });
    }
    let (v_star, strategy) = mec_max_expected_mp(mdp, mec, dim)?;
    let goal = 1.0 - eta.to_f64();
    let bar = &v_star - eps;
    // worst probability over start states, per K
    let mut worst = vec![1.0f64; K0_CAP as usize + 1];
    for &s0 in &mec.states {
        let mut dist: HashMap<(StateId, i64), f64> = HashMap::new();
        dist.insert((s0, 0), 1.0);
        for k in 1..=K0_CAP {
            let mut next: HashMap<(StateId, i64), f64> = HashMap::new();
            for ((s, sum), p) in &dist {
                for (a, pa) in strategy.dist(*s) {
                    let act = mdp.action(*s, a);
                    let w = act.weight(dim);
                    let pa = p * pa.to_f64();
                    for (t, pt) in &act.successors {
                        *next.entry((*t, sum + w)).or_insert(0.0) += pa * pt.to_f64();
                    }
                }
            }
            dist = next;
            let need = &bar * &Rational::from_integer(k as i64);
            let ok: f64 = dist.iter().filter(|((_, sum), _)| Rational::from_integer(*sum) >= need).map(|(_, p)| p).sum();
            let slot = &mut worst[k as usize];
            *slot = slot.min(ok);
        }
    }
    // rounding slack on a quantity that is a sum of a few hundred terms
    let meets = |p: f64| p >= goal - 1e-9;
    let mut k0 = K0_CAP;
    while k0 > 1 && meets(worst[k0 as usize - 1]) {
        k0 -= 1;
    }
    Ok(K0Bound { k0, certified: meets(worst[K0_CAP as usize]) })
}

/// Interval lengths `t_1 = K_0` and `t_i = max(K_0, i²·Σ_{j<i} t_j)`, with
/// interval `i` running rotation slot `(i − 1) mod rotation`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchingSchedule {
    pub k0: u64,
    pub rotation: usize,
}

impl SwitchingSchedule {
    /// First `count` interval lengths (saturating at `u64::MAX`).
    pub fn lengths(&self, count: usize) -> Vec<u64> {
        let mut out = Vec::with_capacity(count);
        let mut sum: u64 = 0;
        for i in 1..=count as u64 {
            let t = if i == 1 { self.k0.max(1) } else { (i * i).saturating_mul(sum).max(self.k0) };
            out.push(t);
            sum = sum.saturating_add(t);
        }
        out
    }

    /// Rotation slot active at (zero-based) step `step`.
    pub fn slot_at(&self, step: u64) -> usize {
        let mut end: u64 = 0;
        let mut sum: u64 = 0;
        let mut i: u64 = 1;
        loop {
            let t = if i == 1 { self.k0.max(1) } else { (i * i).saturating_mul(sum).max(self.k0) };
            sum = sum.saturating_add(t);
            end = end.saturating_add(t);
            if step < end || end == u64::MAX {
                return ((i - 1) as usize) % self.rotation.max(1);
            }
            i += 1;
        }
    }
}

/// Switching behaviour inside one MEC: the optimal strategy per dimension,
/// run in rotation.
#[derive(Debug, Clone)]
pub struct MecSchedule {
    pub dims: Vec<usize>,
    pub values: Vec<Rational>,
    pub rotation: Vec<Memoryless>,
    pub schedule: SwitchingSchedule,
    pub k0: K0Bound,
}

/// Infinite-memory strategy: a reach phase committing to a MEC, then that
/// MEC's switching schedule. The memory counts steps since commitment.
#[derive(Debug, Clone)]
pub struct SwitchingStrategy {
    pub reach: TwoPhase,
    pub mecs: Vec<MecSchedule>,
}

impl Policy for SwitchingStrategy {
    type Mem = (Phase, u64);

    fn initial(&self, s: StateId) -> Dist<(Phase, u64)> {
        self.reach.arrival(s).into_iter().map(|(ph, p)| ((ph, 0), p)).collect()
    }

    fn act(&self, s: StateId, m: &(Phase, u64)) -> Dist<ActionIdx> {
        match m.0 {
            Phase::Reach => self.reach.act(s, &Phase::Reach),
            Phase::Sub(k) => {
                let sched = &self.mecs[k];
                sched.rotation[sched.schedule.slot_at(m.1)].dist(s)
            }
        }
    }

    fn update(&self, m: &(Phase, u64), _s: StateId, _a: ActionIdx, next: StateId) -> Dist<(Phase, u64)> {
        match m.0 {
            Phase::Reach => self.initial(next),
            Phase::Sub(k) => vec![((Phase::Sub(k), m.1.saturating_add(1)), Rational::one())],
        }
    }
}

fn check_kind(constraints: &[PercentileConstraint], kind: PayoffKind) -> Result<()> {
    match constraints.iter().find(|c| c.kind != kind) {
        Some(c) => Err(Error::InvalidQuery(format!("expected only {kind} constraints, found {}", c.kind))),
        None => Ok(()),
    }
}

/// Result of an MP-sup solve.
#[derive(Debug, Clone)]
pub struct MpSupSolution {
    pub reach: PrefixIndependent,
    pub strategy: SwitchingStrategy,
}

/// MP-sup: a MEC is good for `MP-sup_l ≥ v` iff its optimal expected mean
/// payoff on `l` is at least `v`; switching between the per-dimension
/// optima reaches all of them at once. `eps` sizes the schedule's `K_0`.
pub fn mp_sup_solve(
    mdp: &WeightedMdp,
    init: StateId,
    constraints: &[PercentileConstraint],
    eps: &Rational,
) -> Result<Option<MpSupSolution>> {
    check_kind(constraints, PayoffKind::MpSup)?;
    let mecs = crate::graph::max_end_components(mdp).mecs;
    let mut dims: Vec<usize> = constraints.iter().map(|c| c.dim).collect();
    dims.sort_unstable();
    dims.dedup();
    let mut best: Vec<Vec<(Rational, Memoryless)>> = Vec::new();
    for mec in &mecs {
        best.push(dims.iter().map(|d| mec_max_expected_mp(mdp, mec, *d)).collect::<Result<_>>()?);
    }
    let thresholds: Vec<Rational> = constraints.iter().map(|c| c.prob.clone()).collect();
    let slot = |d: usize| dims.binary_search(&d).expect("constraint dim");
    let Some(reach) = prefix_independent_solve(mdp, init, &thresholds, |k, _, i| {
        best[k][slot(constraints[i].dim)].0 >= constraints[i].value
    })?
    else {
        return Ok(None);
    };
    let eta = rat(1, 4);
    let mut schedules = Vec::new();
    for (k, mec) in mecs.iter().enumerate() {
        let mut k0 = K0Bound { k0: 1, certified: true };
        for d in &dims {
            let b = schedule_bound_k0(mdp, mec, *d, eps, &eta)?;
            k0 = K0Bound { k0: k0.k0.max(b.k0), certified: k0.certified && b.certified };
        }
        schedules.push(MecSchedule {
            dims: dims.clone(),
            values: best[k].iter().map(|(v, _)| v.clone()).collect(),
            rotation: best[k].iter().map(|(_, s)| s.clone()).collect(),
            schedule: SwitchingSchedule { k0: k0.k0, rotation: dims.len() },
            k0,
        });
    }
    let placeholder = (0..mecs.len()).map(|_| Memoryless::first_action(mdp.num_states())).collect();
    let strategy = SwitchingStrategy { reach: reach.two_phase(placeholder), mecs: schedules };
    Ok(Some(MpSupSolution { reach, strategy }))
}

/// Result of an MP-inf solve; `strategy` is present when a relaxation
/// `ε > 0` was requested and the exact query is satisfiable.
#[derive(Debug, Clone)]
pub struct MpInfOutcome {
    pub decomposition: LambdaOutcome,
    pub strategy: Option<TwoPhase>,
}

impl MpInfOutcome {
    pub fn satisfiable(&self) -> bool {
        self.decomposition.solution.is_some()
    }
}

/// MP-inf: decomposition over MECs with the joint steady-state check as
/// oracle. With `eps > 0` the witness commits, per MEC and subset, to a
/// memoryless strategy meeting the subset's thresholds minus `eps`.
pub fn mp_inf_solve(
    mdp: &WeightedMdp,
    init: StateId,
    constraints: &[PercentileConstraint],
    eps: &Rational,
) -> Result<MpInfOutcome> {
    check_kind(constraints, PayoffKind::MpInf)?;
    let reqs = |set: u64| -> Vec<(usize, Rational)> {
        constraints
            .iter()
            .enumerate()
            .filter(|(i, _)| set & (1 << i) != 0)
            .map(|(_, c)| (c.dim, c.value.clone()))
            .collect()
    };
    let thresholds: Vec<Rational> = constraints.iter().map(|c| c.prob.clone()).collect();
    // LP failures inside the oracle are not expected on valid MECs; treat
    // them as infeasible
    let decomposition = lambda_decomposition_solve(mdp, init, &thresholds, |_, mec, set| {
        mp_inf_joint_feasible(mdp, mec, &reqs(set)).unwrap_or(false)
    })?;
    let strategy = if eps.is_positive() && decomposition.solution.is_some() {
        let mecs = &decomposition.contraction.decomposition.mecs;
        let mut failure = None;
        let tp = decomposition.two_phase(|k, set| {
            let mec = &mecs[k];
            let built = (|| -> Result<Memoryless> {
                let (vars, x) = mp_inf_joint_flow(mdp, mec, &reqs(set))?
                    .ok_or_else(|| Error::MalformedLp("joint flow vanished".into()))?;
                let x = perturbed_flow(mdp, mec, &vars, &x, eps)?;
                Ok(flow_strategy(mdp, mec, &vars, &x))
            })();
            built.unwrap_or_else(|e| {
                failure = Some(e);
                Memoryless::first_action(mdp.num_states())
            })
        });
        if let Some(e) = failure {
            return Err(e);
        }
        tp
    } else {
        None
    };
    Ok(MpInfOutcome { decomposition, strategy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::max_end_components;
    use crate::model::MdpBuilder;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    fn whole(m: &WeightedMdp) -> EndComponent {
        max_end_components(m).mecs.into_iter().next().unwrap()
    }

    #[test]
    fn expected_mean_payoff_optima() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_state("s");
        b.add_edge(s, "x", &[3], s);
        let m = b.build().unwrap();
        assert_eq!(mec_max_expected_mp(&m, &whole(&m), 0).unwrap().0, r(3));
        let mut b = MdpBuilder::new(1);
        let s = b.add_state("s");
        b.add_edge(s, "x", &[2], s);
        b.add_edge(s, "y", &[5], s);
        let m = b.build().unwrap();
        assert_eq!(mec_max_expected_mp(&m, &whole(&m), 0).unwrap().0, r(5));
        let st = fixtures::s_t_mp();
        assert_eq!(mec_max_expected_mp(&st, &whole(&st), 0).unwrap().0, r(1));
    }

    #[test]
    fn joint_feasibility_on_two_loops() {
        let st = fixtures::s_t_mp();
        let c = whole(&st);
        assert!(mp_inf_joint_feasible(&st, &c, &[(0, rat(1, 2)), (1, rat(1, 2))]).unwrap());
        assert!(!mp_inf_joint_feasible(&st, &c, &[(0, r(1)), (1, r(1))]).unwrap());
        assert!(mp_inf_joint_feasible(&st, &c, &[]).unwrap());
    }

    #[test]
    fn schedule_bounds() {
        // period-2 cycle with weights 1, 0
        let mut b = MdpBuilder::new(1);
        let s = b.add_states(&["a", "b"]);
        b.add_edge(s[0], "x", &[1], s[1]);
        b.add_edge(s[1], "y", &[0], s[0]);
        let m = b.build().unwrap();
        let k = schedule_bound_k0(&m, &whole(&m), 0, &rat(1, 2), &rat(1, 4)).unwrap();
        assert!(k.certified && k.k0 <= 4);
        let mut b = MdpBuilder::new(1);
        let s = b.add_state("s");
        b.add_edge(s, "x", &[1], s);
        let m = b.build().unwrap();
        assert_eq!(schedule_bound_k0(&m, &whole(&m), 0, &rat(1, 2), &rat(1, 4)).unwrap().k0, 1);
        let st = fixtures::s_t_mp();
        assert_eq!(schedule_bound_k0(&st, &whole(&st), 0, &rat(1, 2), &r(1)).unwrap().k0, 1);
    }

    #[test]
    fn schedule_lengths_grow_fast_enough() {
        let s = SwitchingSchedule { k0: 3, rotation: 2 };
        let t = s.lengths(6);
        for i in 1..t.len() {
            let prev: u64 = t[..i].iter().sum();
            assert!(t[i] >= ((i + 1) * (i + 1)) as u64 * prev);
        }
        assert_eq!(s.slot_at(0), 0);
        assert_eq!(s.slot_at(3), 1);
        assert_eq!(s.slot_at(3 + 12), 0);
    }

    #[test]
    fn mp_sup_and_mp_inf_on_two_loops() {
        let st = fixtures::s_t_mp();
        let c = |k, d, v, p| PercentileConstraint::new(k, d, v, p);
        let sup = [c(PayoffKind::MpSup, 0, r(1), r(1)), c(PayoffKind::MpSup, 1, r(1), r(1))];
        assert!(mp_sup_solve(&st, 0, &sup, &rat(1, 10)).unwrap().is_some());
        let sup2 = [c(PayoffKind::MpSup, 0, r(1), r(1)), c(PayoffKind::MpSup, 1, r(2), r(1))];
        assert!(mp_sup_solve(&st, 0, &sup2, &rat(1, 10)).unwrap().is_none());
        let inf = [
            c(PayoffKind::MpInf, 0, rat(1, 2), rat(3, 5)),
            c(PayoffKind::MpInf, 1, rat(1, 2), rat(3, 5)),
        ];
        let out = mp_inf_solve(&st, 0, &inf, &rat(1, 10)).unwrap();
        assert!(out.satisfiable() && out.strategy.is_some());
        let hard = [c(PayoffKind::MpInf, 0, r(1), r(1)), c(PayoffKind::MpInf, 1, r(1), r(1))];
        assert!(!mp_inf_solve(&st, 0, &hard, &Rational::zero()).unwrap().satisfiable());
    }

    #[test]
    fn perturbation_keeps_flow_and_budget() {
        let st = fixtures::s_t_mp();
        let c = whole(&st);
        let (vars, x) = mp_inf_joint_flow(&st, &c, &[(0, r(1))]).unwrap().unwrap();
        let eps = rat(1, 8);
        let y = perturbed_flow(&st, &c, &vars, &x, &eps).unwrap();
        let (lp, _) = steady_state_program(&st, &c);
        assert!(lp.satisfied_by(&y));
        assert!(y.iter().all(|v| v.is_positive()));
        let g: Rational = weight_row(&st, &vars, 0).iter().map(|(j, w)| w * &y[*j]).sum();
        assert!(g >= r(1) - eps);
    }
}
