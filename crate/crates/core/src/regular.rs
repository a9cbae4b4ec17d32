//! Percentile queries for the inf, sup, liminf and limsup payoffs.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{almost_sure_reach, mecs_restricted, sure_safe_region, EndComponent, SafeRegion};
use crate::lift::{explore_product, Product, ProductLift, TwoPhase};
use crate::model::{Action, ActionIdx, StateId, StateSet, WeightedMdp};
use crate::query::{Family, MultiReachQuery, PayoffKind, PercentileConstraint};
use crate::rational::Rational;
use crate::reach::{
    absorbing_multi_reach, lambda_decomposition_solve, nested_multi_reach, prefix_independent_solve, FlowSolution,
};
use crate::strategy::{dirac, uniform, Dist, Memoryless, MooreStrategy, Policy, MAX_CHAIN_STATES};

/// Witness for a satisfiable regular query.
#[derive(Debug, Clone)]
pub struct RegularSolution {
    pub strategy: MooreStrategy,
    /// The reachability LP that decided the query (absent when every
    /// constraint was vacuous).
    pub flow: Option<FlowSolution>,
    /// `(mec, subset, λ)` of a decomposition solve.
    pub lambdas: Vec<(usize, u64, Rational)>,
    pub product_states: usize,
}

/// `mdp` with every action routed through an intermediate state, so that
/// action weights can be read as state labels.
#[derive(Debug, Clone)]
pub struct SplitMdp {
    pub mdp: WeightedMdp,
    /// Intermediate state of each `(s, a)`.
    pub mid: Vec<Vec<StateId>>,
    pub original: usize,
}

impl SplitMdp {
    /// Weight on `dim` carried by an intermediate state.
    pub fn label(&self, p: StateId, dim: usize) -> Option<i64> {
        (p >= self.original).then(|| self.mdp.action(p, 0).weight(dim))
    }
}

/// Splits `s -a-> δ` into `s -a-> m_{s,a} -> δ`. Both halves carry the
/// weight of `a`, so every payoff insensitive to repetition (inf, sup,
/// their limits, mean payoff) is unchanged.
pub fn weights_to_states(mdp: &WeightedMdp) -> SplitMdp {
    let n = mdp.num_states();
    let mut names: Vec<String> = mdp.state_names().to_vec();
    let mut actions: Vec<Vec<Action>> = Vec::with_capacity(n + mdp.total_actions());
    let mut mid = Vec::with_capacity(n);
    let mut tail = Vec::new();
    let mut next = n;
    for s in mdp.states() {
        let mut row = Vec::new();
        let mut acts = Vec::new();
        for act in mdp.actions(s) {
            row.push(next);
            names.push(format!("{}/{}", mdp.state_name(s), act.name));
            acts.push(Action { name: act.name.clone(), weights: act.weights.clone(), successors: vec![(next, Rational::one())] });
            tail.push(vec![Action { name: "split".into(), weights: act.weights.clone(), successors: act.successors.clone() }]);
            next += 1;
        }
        mid.push(row);
        actions.push(acts);
    }
    actions.extend(tail);
    SplitMdp { mdp: WeightedMdp::from_parts(mdp.dims(), names, actions), mid, original: n }
}

/// A policy on the split MDP played on the original one.
#[derive(Debug, Clone)]
pub struct SplitLift<P: Policy> {
    pub mid: Vec<Vec<StateId>>,
    pub inner: P,
}

fn add_mass<T: Eq>(d: &mut Dist<T>, x: T, p: Rational) {
    match d.iter_mut().find(|(y, _)| *y == x) {
        Some(e) => e.1 += p,
        None => d.push((x, p)),
    }
}

impl<P: Policy> Policy for SplitLift<P> {
    type Mem = P::Mem;

    fn initial(&self, s: StateId) -> Dist<P::Mem> {
        self.inner.initial(s)
    }

    fn act(&self, s: StateId, m: &P::Mem) -> Dist<ActionIdx> {
        self.inner.act(s, m)
    }

    fn update(&self, m: &P::Mem, s: StateId, a: ActionIdx, next: StateId) -> Dist<P::Mem> {
        let mid = self.mid[s][a];
        let mut out = Vec::new();
        for (m1, p1) in self.inner.update(m, s, a, mid) {
            for (a2, p2) in self.inner.act(mid, &m1) {
                for (m2, p3) in self.inner.update(&m1, mid, a2, next) {
                    add_mass(&mut out, m2, &p1 * &p2 * p3);
                }
            }
        }
        out
    }
}

fn meets(w: i64, v: &Rational) -> bool {
    Rational::from_integer(w) >= *v
}

/// Solves a conjunction of regular constraints: one kind on one dimension
/// goes to the dedicated algorithm, all-limsup to the prefix-independent
/// solver, anything else to the monitor product.
pub fn solve_regular(
    mdp: &WeightedMdp,
    init: StateId,
    constraints: &[PercentileConstraint],
) -> Result<Option<RegularSolution>> {
    if let Some(c) = constraints.iter().find(|c| c.kind.family() != Family::Regular) {
        return Err(Error::InvalidQuery(format!("{} is not a regular payoff", c.kind)));
    }
    let live: Vec<PercentileConstraint> = constraints.iter().filter(|c| c.prob.is_positive()).cloned().collect();
    let Some(first) = live.first() else {
        let strategy = MooreStrategy::from_policy(mdp, &Memoryless::first_action(mdp.num_states()), init)?;
        return Ok(Some(RegularSolution { strategy, flow: None, lambdas: Vec::new(), product_states: 0 }));
    };
    if live.iter().all(|c| c.kind == first.kind && c.dim == first.dim) {
        let pairs: Vec<(Rational, Rational)> = live.iter().map(|c| (c.value.clone(), c.prob.clone())).collect();
        return solve_single_dim(mdp, init, first.kind, first.dim, &pairs);
    }
    if live.iter().all(|c| c.kind == PayoffKind::LimSup) {
        return solve_limsup(mdp, init, &live);
    }
    solve_multi_dim_regular(mdp, init, &live)
}

/// Constraints `P[f_dim ≥ v_i] ≥ α_i` of one kind on one dimension.
pub fn solve_single_dim(
    mdp: &WeightedMdp,
    init: StateId,
    kind: PayoffKind,
    dim: usize,
    constraints: &[(Rational, Rational)],
) -> Result<Option<RegularSolution>> {
    match kind {
        PayoffKind::Sup => solve_sup(mdp, init, dim, constraints),
        PayoffKind::Inf => solve_inf(mdp, init, dim, constraints),
        PayoffKind::LimInf => solve_liminf(mdp, init, dim, constraints),
        PayoffKind::LimSup => {
            let cs: Vec<PercentileConstraint> = constraints
                .iter()
                .map(|(v, p)| PercentileConstraint::new(PayoffKind::LimSup, dim, v.clone(), p.clone()))
                .collect();
            solve_limsup(mdp, init, &cs)
        }
        other => Err(Error::InvalidQuery(format!("{other} is not a regular payoff"))),
    }
}

/// Sup: after splitting, `sup ≥ v` is reaching an intermediate labelled at
/// least `v`, and these targets are nested.
fn solve_sup(
    mdp: &WeightedMdp,
    init: StateId,
    dim: usize,
    cons: &[(Rational, Rational)],
) -> Result<Option<RegularSolution>> {
    let split = weights_to_states(mdp);
    let total = split.mdp.num_states();
    let mut order: Vec<usize> = (0..cons.len()).collect();
    order.sort_by(|a, b| cons[*b].0.cmp(&cons[*a].0));
    let targets = order
        .iter()
        .map(|i| {
            StateSet::from_states(
                total,
                (split.original..total).filter(|p| meets(split.label(*p, dim).unwrap_or(i64::MIN), &cons[*i].0)),
            )
        })
        .collect();
    let thresholds = order.iter().map(|i| cons[*i].1.clone()).collect();
    let Some((lift, flow)) = nested_multi_reach(&split.mdp, init, &MultiReachQuery::new(targets, thresholds))? else {
        return Ok(None);
    };
    let product_states = lift.product.num_states();
    let policy = SplitLift { mid: split.mid, inner: lift };
    let strategy = MooreStrategy::from_policy(mdp, &policy, init)?;
    Ok(Some(RegularSolution { strategy, flow: Some(flow), lambdas: Vec::new(), product_states }))
}

/// Inf: copy `c` records that constraints `1..c` (thresholds ascending) are
/// still unviolated. From copy `c`, a state of the sure-safe region for
/// `v_c` may stop in `⊤_c`; the play then stays in that region forever.
fn solve_inf(
    mdp: &WeightedMdp,
    init: StateId,
    dim: usize,
    cons: &[(Rational, Rational)],
) -> Result<Option<RegularSolution>> {
    let n = mdp.num_states();
    let q = cons.len();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|a, b| cons[*a].0.cmp(&cons[*b].0));
    let vs: Vec<&Rational> = order.iter().map(|i| &cons[*i].0).collect();
    let alive = |w: i64| vs.iter().filter(|v| meets(w, v)).count();
    let safe: Vec<SafeRegion> =
        vs.iter().map(|v| sure_safe_region(mdp, |s, a| meets(mdp.action(s, a).weight(dim), v))).collect();
    let copy = |s: StateId, c: usize| (c - 1) * n + s;
    let top = |c: usize| q * n + c - 1;
    let dead = q * n + q;
    let total = dead + 1;
    let d = mdp.dims();
    let mut names = Vec::with_capacity(total);
    let mut actions: Vec<Vec<Action>> = Vec::with_capacity(total);
    let mut base_actions = Vec::with_capacity(total);
    let mut switches = BTreeMap::new();
    let mut subs = Vec::with_capacity(q);
    let mut origin = Vec::with_capacity(total);
    let mut tag = Vec::with_capacity(total);
    for c in 1..=q {
        let mut choice = vec![Vec::new(); total];
        for s in mdp.states() {
            names.push(format!("{}#{c}", mdp.state_name(s)));
            let mut acts: Vec<Action> = mdp
                .actions(s)
                .iter()
                .map(|a| {
                    let c2 = c.min(alive(a.weight(dim)));
                    let successors = if c2 == 0 {
                        vec![(dead, Rational::one())]
                    } else {
                        a.successors.iter().map(|(t, p)| (copy(*t, c2), p.clone())).collect()
                    };
                    Action { name: a.name.clone(), weights: a.weights.clone(), successors }
                })
                .collect();
            base_actions.push(acts.len());
            let region = &safe[c - 1];
            if region.states.contains(s) {
                switches.insert((copy(s, c), acts.len()), dirac(c - 1));
                acts.push(Action { name: "stop".into(), weights: vec![0; d], successors: vec![(top(c), Rational::one())] });
                let allowed: Vec<ActionIdx> = (0..mdp.num_actions(s)).filter(|a| region.actions[s][*a]).collect();
                choice[copy(s, c)] = uniform(&allowed);
            }
            actions.push(acts);
            origin.push(Some(s));
            tag.push(c);
        }
        subs.push(Memoryless { choice });
    }
    for c in 1..=q + 1 {
        let me = q * n + c - 1;
        names.push(if c <= q { format!("top{c}") } else { "dead".into() });
        actions.push(vec![Action { name: "stay".into(), weights: vec![0; d], successors: vec![(me, Rational::one())] }]);
        base_actions.push(1);
        origin.push(None);
        tag.push(0);
    }
    let pm = WeightedMdp::from_parts(d, names, actions);
    let targets = (1..=q).map(|i| StateSet::from_states(total, (i..=q).map(top))).collect();
    let thresholds = order.iter().map(|i| cons[*i].1.clone()).collect();
    let start = copy(init, q);
    let Some(flow) = absorbing_multi_reach(&pm, start, &MultiReachQuery::new(targets, thresholds))? else {
        return Ok(None);
    };
    let frozen = (0..total).map(|p| p >= q * n).collect();
    let product = Product::new(pm, origin, tag, start, frozen);
    let policy = TwoPhase { reach: flow.strategy.clone(), base_actions, switches: switches.into_iter().collect(), subs };
    let lift = ProductLift { product, inner: policy };
    let strategy = MooreStrategy::from_policy(mdp, &lift, init)?;
    Ok(Some(RegularSolution { strategy, flow: Some(flow), lambdas: Vec::new(), product_states: total }))
}

/// Largest sub-EC of `mec` using only actions meeting every `liminf`
/// requirement that also has, for every `limsup` requirement, an action
/// meeting it. Requirements are `(dim, v)`.
pub fn regular_sub_ec(
    mdp: &WeightedMdp,
    mec: &EndComponent,
    liminf: &[(usize, Rational)],
    limsup: &[(usize, Rational)],
) -> Option<EndComponent> {
    let mut mask = mec.mask(mdp);
    for (s, a) in mec.state_actions() {
        let act = mdp.action(s, a);
        if liminf.iter().any(|(l, v)| !meets(act.weight(*l), v)) {
            mask[s][a] = false;
        }
    }
    mecs_restricted(mdp, &mask).mecs.into_iter().find(|d| {
        limsup.iter().all(|(l, v)| d.state_actions().any(|(s, a)| meets(mdp.action(s, a).weight(*l), v)))
    })
}

/// Memoryless strategy that, from anywhere in `mec`, reaches `inner` almost
/// surely and then plays uniformly over its actions.
pub fn settle_in(mdp: &WeightedMdp, mec: &EndComponent, inner: &EndComponent, size: usize) -> Memoryless {
    let mut choice = vec![Vec::new(); size];
    let (_, reach) = almost_sure_reach(mdp, &inner.state_set(mdp.num_states()), &mec.mask(mdp));
    for s in &mec.states {
        choice[*s] = match inner.actions.get(s) {
            Some(acts) => uniform(acts),
            None => dirac(reach[*s].expect("an end component reaches its sub-components")),
        };
    }
    Memoryless { choice }
}

fn uniform_on(mec: &EndComponent, size: usize) -> Memoryless {
    let mut choice = vec![Vec::new(); size];
    for (s, acts) in &mec.actions {
        choice[*s] = uniform(acts);
    }
    Memoryless { choice }
}

/// Liminf on one dimension: a MEC is good for `v` if it contains an EC using
/// only actions of weight at least `v`. Committing to a MEC, the play
/// settles in the sub-EC for the largest threshold it is good for.
fn solve_liminf(
    mdp: &WeightedMdp,
    init: StateId,
    dim: usize,
    cons: &[(Rational, Rational)],
) -> Result<Option<RegularSolution>> {
    let thresholds: Vec<Rational> = cons.iter().map(|(_, p)| p.clone()).collect();
    let Some(pi) = prefix_independent_solve(mdp, init, &thresholds, |_, mec, i| {
        regular_sub_ec(mdp, mec, &[(dim, cons[i].0.clone())], &[]).is_some()
    })?
    else {
        return Ok(None);
    };
    let n = mdp.num_states();
    let mecs = &pi.contraction.decomposition.mecs;
    let subs = mecs
        .iter()
        .enumerate()
        .map(|(k, mec)| {
            let best = (0..cons.len()).filter(|i| pi.good[*i].contains(&k)).map(|i| &cons[i].0).max();
            match best.and_then(|v| regular_sub_ec(mdp, mec, &[(dim, v.clone())], &[])) {
                Some(inner) => settle_in(mdp, mec, &inner, n),
                None => uniform_on(mec, n),
            }
        })
        .collect();
    let policy = pi.two_phase(subs);
    let strategy = MooreStrategy::from_policy(mdp, &policy, init)?;
    let product_states = pi.contraction.mdp.num_states();
    Ok(Some(RegularSolution { strategy, flow: Some(pi.flow), lambdas: Vec::new(), product_states }))
}

/// Limsup on any dimensions: a MEC is good for `(l, v)` if one of its
/// actions weighs at least `v` on `l`; uniform play inside the MEC takes
/// every action infinitely often, so all good constraints hold together.
fn solve_limsup(
    mdp: &WeightedMdp,
    init: StateId,
    cons: &[PercentileConstraint],
) -> Result<Option<RegularSolution>> {
    let thresholds: Vec<Rational> = cons.iter().map(|c| c.prob.clone()).collect();
    let Some(pi) = prefix_independent_solve(mdp, init, &thresholds, |_, mec, i| {
        mec.state_actions().any(|(s, a)| meets(mdp.action(s, a).weight(cons[i].dim), &cons[i].value))
    })?
    else {
        return Ok(None);
    };
    let n = mdp.num_states();
    let subs = pi.contraction.decomposition.mecs.iter().map(|mec| uniform_on(mec, n)).collect();
    let policy = pi.two_phase(subs);
    let strategy = MooreStrategy::from_policy(mdp, &policy, init)?;
    let product_states = pi.contraction.mdp.num_states();
    Ok(Some(RegularSolution { strategy, flow: Some(pi.flow), lambdas: Vec::new(), product_states }))
}

/// Product of the MDP with one flag per inf constraint (violated so far) and
/// per sup constraint (threshold seen so far).
#[derive(Debug, Clone)]
pub struct MonitorProduct {
    pub product: Product,
    /// Flag word per product tag.
    pub flag_words: Vec<u64>,
    /// Flag bit of each constraint, for inf and sup constraints.
    pub bit: Vec<Option<u32>>,
}

impl MonitorProduct {
    pub fn flags(&self, p: StateId) -> u64 {
        self.flag_words[self.product.tag[p]]
    }
}

pub fn monitor_product(
    mdp: &WeightedMdp,
    init: StateId,
    constraints: &[PercentileConstraint],
) -> Result<MonitorProduct> {
    let mut bit = Vec::with_capacity(constraints.len());
    let mut next = 0u32;
    for c in constraints {
        if matches!(c.kind, PayoffKind::Inf | PayoffKind::Sup) {
            bit.push(Some(next));
            next += 1;
        } else {
            bit.push(None);
        }
    }
    if next > 32 {
        return Err(Error::TooLarge(format!("{next} inf/sup monitors")));
    }
    let raised = |s: StateId, a: ActionIdx| -> u64 {
        let act = mdp.action(s, a);
        constraints.iter().zip(&bit).fold(0, |acc, (c, b)| {
            let ok = meets(act.weight(c.dim), &c.value);
            match (c.kind, b) {
                (PayoffKind::Inf, Some(b)) if !ok => acc | 1 << b,
                (PayoffKind::Sup, Some(b)) if ok => acc | 1 << b,
                _ => acc,
            }
        })
    };
    let (product, flag_words) = explore_product(
        mdp,
        init,
        0u64,
        |s, a, f| f | raised(s, a),
        |_, _| false,
        |f| format!("{f:b}"),
        MAX_CHAIN_STATES,
    )?;
    Ok(MonitorProduct { product, flag_words, bit })
}

/// Witness sub-EC for the constraints in `set` inside a MEC of the monitor
/// product, if they can hold together almost surely there.
pub fn regular_subset_witness(
    monitor: &MonitorProduct,
    mec: &EndComponent,
    set: u64,
    constraints: &[PercentileConstraint],
) -> Option<EndComponent> {
    let flags = monitor.flags(mec.states[0]);
    let mut liminf = Vec::new();
    let mut limsup = Vec::new();
    for (i, c) in constraints.iter().enumerate() {
        if set & (1 << i) == 0 {
            continue;
        }
        let raised = monitor.bit[i].map(|b| flags & (1 << b) != 0);
        match c.kind {
            PayoffKind::Inf if raised == Some(true) => return None,
            PayoffKind::Sup if raised == Some(false) => return None,
            PayoffKind::LimInf => liminf.push((c.dim, c.value.clone())),
            PayoffKind::LimSup => limsup.push((c.dim, c.value.clone())),
            _ => {}
        }
    }
    regular_sub_ec(&monitor.product.mdp, mec, &liminf, &limsup)
}

pub fn mec_subset_feasible_regular(
    monitor: &MonitorProduct,
    mec: &EndComponent,
    set: u64,
    constraints: &[PercentileConstraint],
) -> bool {
    regular_subset_witness(monitor, mec, set, constraints).is_some()
}

/// Mixed regular constraints: monitor product, then the λ-decomposition
/// over its MECs.
pub fn solve_multi_dim_regular(
    mdp: &WeightedMdp,
    init: StateId,
    constraints: &[PercentileConstraint],
) -> Result<Option<RegularSolution>> {
    let monitor = monitor_product(mdp, init, constraints)?;
    let pm = &monitor.product.mdp;
    let thresholds: Vec<Rational> = constraints.iter().map(|c| c.prob.clone()).collect();
    let outcome = lambda_decomposition_solve(pm, monitor.product.init, &thresholds, |_, mec, set| {
        mec_subset_feasible_regular(&monitor, mec, set, constraints)
    })?;
    let mecs = &outcome.contraction.decomposition.mecs;
    let size = pm.num_states();
    let Some(policy) = outcome.two_phase(|k, set| {
        let inner = regular_subset_witness(&monitor, &mecs[k], set, constraints).expect("maximal subset is feasible");
        settle_in(pm, &mecs[k], &inner, size)
    }) else {
        return Ok(None);
    };
    let sol = outcome.solution.clone().expect("policy implies a solution");
    let product_states = monitor.product.num_states();
    let lift = ProductLift { product: monitor.product, inner: policy };
    let strategy = MooreStrategy::from_policy(mdp, &lift, init)?;
    Ok(Some(RegularSolution { strategy, flow: Some(sol.flow), lambdas: sol.lambdas, product_states }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::MdpBuilder;
    use crate::rational::rat;
    use crate::reach::reach_probability;
    use crate::strategy::policy_chain;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    fn c(kind: PayoffKind, dim: usize, v: Rational, p: Rational) -> PercentileConstraint {
        PercentileConstraint::new(kind, dim, v, p)
    }

    #[test]
    fn split_self_loop() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_state("s");
        b.add_edge(s, "x", &[5], s);
        let m = b.build().unwrap();
        let sp = weights_to_states(&m);
        assert_eq!(sp.mdp.num_states(), 2);
        assert_eq!(sp.label(1, 0), Some(5));
        assert_eq!(sp.label(0, 0), None);
    }

    #[test]
    fn split_keeps_run_measure() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_states(&["s", "t", "u"]);
        b.add_action(s[0], "x", &[0], &[(s[1], rat(1, 2)), (s[2], rat(1, 2))]);
        b.add_edge(s[1], "l", &[0], s[1]);
        b.add_edge(s[2], "l", &[0], s[2]);
        let m = b.build().unwrap();
        let sp = weights_to_states(&m);
        assert_eq!(sp.mdp.num_states(), 6);
        assert_eq!(sp.label(sp.mid[0][0], 0), Some(0));
        let lifted = SplitLift { mid: sp.mid.clone(), inner: Memoryless::first_action(sp.mdp.num_states()) };
        let st = MooreStrategy::from_policy(&m, &lifted, 0).unwrap();
        let t = StateSet::from_states(3, [1]);
        assert_eq!(reach_probability(&m, &st, 0, &t).unwrap(), rat(1, 2));
        let t2 = StateSet::from_states(6, [1]);
        let direct = Memoryless::first_action(6);
        assert_eq!(reach_probability(&sp.mdp, &direct, 0, &t2).unwrap(), rat(1, 2));
    }

    #[test]
    fn liminf_on_a_unit_cycle() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_states(&["a", "b"]);
        b.add_edge(s[0], "x", &[1], s[1]);
        b.add_edge(s[1], "y", &[1], s[0]);
        let m = b.build().unwrap();
        let out = solve_single_dim(&m, 0, PayoffKind::LimInf, 0, &[(r(1), r(1))]).unwrap();
        assert!(out.is_some());
        let out = solve_single_dim(&m, 0, PayoffKind::LimInf, 0, &[(r(2), rat(1, 100))]).unwrap();
        assert!(out.is_none());
    }

    #[test]
    fn sup_needs_the_coin() {
        // first dimension of the randomness-lemma fixture
        let m = fixtures::randomness_lemma();
        let sol = solve_single_dim(&m, 0, PayoffKind::Sup, 0, &[(r(1), rat(1, 2))]).unwrap().unwrap();
        let hit = StateSet::from_states(3, [1]);
        assert!(reach_probability(&m, &sol.strategy, 0, &hit).unwrap() >= rat(1, 2));
        assert!(solve_single_dim(&m, 0, PayoffKind::Sup, 0, &[(r(1), r(1)), (r(2), rat(1, 100))]).unwrap().is_none());
    }

    #[test]
    fn inf_violated_by_first_action() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_states(&["s", "t"]);
        b.add_edge(s[0], "x", &[0], s[1]);
        b.add_edge(s[1], "l", &[2], s[1]);
        let m = b.build().unwrap();
        assert!(solve_single_dim(&m, 0, PayoffKind::Inf, 0, &[(r(1), rat(1, 2))]).unwrap().is_none());
        assert!(solve_single_dim(&m, 0, PayoffKind::Inf, 0, &[(r(0), r(1))]).unwrap().is_some());
    }

    #[test]
    fn inf_thresholds_trade_off() {
        // s: `safe` loops with weight 1; `risky` weighs 3 and reaches a
        // 3-loop or a 0-loop with probability 1/2 each
        let mut b = MdpBuilder::new(1);
        let s = b.add_states(&["s", "hi", "lo"]);
        b.add_edge(s[0], "safe", &[1], s[0]);
        b.add_action(s[0], "risky", &[3], &[(s[1], rat(1, 2)), (s[2], rat(1, 2))]);
        b.add_edge(s[1], "l", &[3], s[1]);
        b.add_edge(s[2], "l", &[0], s[2]);
        let m = b.build().unwrap();
        let ok = |cs: &[(Rational, Rational)]| solve_single_dim(&m, 0, PayoffKind::Inf, 0, cs).unwrap().is_some();
        assert!(ok(&[(r(1), r(1))]));
        assert!(ok(&[(r(3), rat(1, 2))]));
        assert!(!ok(&[(r(3), rat(3, 5))]));
        assert!(ok(&[(r(1), rat(1, 2)), (r(3), rat(1, 4))]));
        assert!(ok(&[(r(1), rat(3, 4)), (r(3), rat(1, 4))]));
        assert!(!ok(&[(r(1), rat(4, 5)), (r(3), rat(1, 4))]));
    }

    #[test]
    fn monitor_examples() {
        let st = fixtures::s_t_mp();
        let plain = monitor_product(&st, 0, &[c(PayoffKind::LimSup, 0, r(1), r(1))]).unwrap();
        assert_eq!(plain.product.num_states(), 2);
        let m = fixtures::randomness_lemma();
        let all = monitor_product(&m, 0, &[c(PayoffKind::Sup, 0, r(0), r(1))]).unwrap();
        for p in all.product.mdp.states() {
            if p != all.product.init {
                assert_eq!(all.flags(p), 1);
            }
        }
        let inf = monitor_product(&st, 0, &[c(PayoffKind::Inf, 0, r(1), r(1))]).unwrap();
        let pm = &inf.product.mdp;
        // the loop at s keeps the flag clear; t's loop violates
        assert_eq!(inf.flags(pm.action(0, 0).successors[0].0), 0);
        assert!(pm.states().any(|p| inf.product.origin[p] == Some(1) && inf.flags(p) == 1));
        for p in pm.states() {
            for a in pm.actions(p) {
                for (t, _) in &a.successors {
                    assert_eq!(inf.flags(p) & !inf.flags(*t), 0);
                }
            }
        }
    }

    #[test]
    fn subset_oracle_examples() {
        let st = fixtures::s_t_mp();
        let cs = [c(PayoffKind::LimSup, 0, r(1), r(1)), c(PayoffKind::LimSup, 1, r(1), r(1))];
        let mon = monitor_product(&st, 0, &cs).unwrap();
        let mec = crate::graph::max_end_components(&mon.product.mdp).mecs.remove(0);
        assert!(mec_subset_feasible_regular(&mon, &mec, 0, &cs));
        assert!(mec_subset_feasible_regular(&mon, &mec, 0b11, &cs));
        let ci = [c(PayoffKind::LimInf, 0, r(1), r(1)), c(PayoffKind::LimInf, 1, r(1), r(1))];
        let mon = monitor_product(&st, 0, &ci).unwrap();
        let mec = crate::graph::max_end_components(&mon.product.mdp).mecs.remove(0);
        assert!(mec_subset_feasible_regular(&mon, &mec, 0b01, &ci));
        assert!(!mec_subset_feasible_regular(&mon, &mec, 0b11, &ci));
    }

    #[test]
    fn multi_dim_examples() {
        let m = fixtures::randomness_lemma();
        let cs = [c(PayoffKind::Sup, 0, rat(1, 2), rat(1, 2)), c(PayoffKind::Sup, 1, rat(1, 2), rat(1, 2))];
        let sol = solve_multi_dim_regular(&m, 0, &cs).unwrap().unwrap();
        let first = sol.strategy.act(0, &sol.strategy.initial[0].0);
        assert_eq!(first.len(), 2);
        let st = fixtures::s_t_mp();
        let ls = [c(PayoffKind::LimSup, 0, r(1), r(1)), c(PayoffKind::LimSup, 1, r(1), r(1))];
        assert!(solve_regular(&st, 0, &ls).unwrap().is_some());
        assert!(solve_multi_dim_regular(&st, 0, &ls).unwrap().is_some());
        let is = [c(PayoffKind::Inf, 0, r(1), rat(1, 10)), c(PayoffKind::Inf, 1, r(1), rat(1, 10))];
        assert!(solve_regular(&st, 0, &is).unwrap().is_none());
    }

    #[test]
    fn single_and_multi_agree_on_one_dimension() {
        let m = fixtures::randomness_lemma();
        for kind in [PayoffKind::Inf, PayoffKind::Sup, PayoffKind::LimInf, PayoffKind::LimSup] {
            for (v, p) in [(r(1), rat(1, 2)), (r(1), r(1)), (r(0), r(1)), (r(2), rat(1, 10))] {
                let single = solve_single_dim(&m, 0, kind, 0, &[(v.clone(), p.clone())]).unwrap().is_some();
                let multi = solve_multi_dim_regular(&m, 0, &[c(kind, 0, v.clone(), p.clone())]).unwrap().is_some();
                assert_eq!(single, multi, "{kind} {v} {p}");
            }
        }
    }

    #[test]
    fn witness_chain_is_finite() {
        let st = fixtures::s_t_mp();
        let cs = [c(PayoffKind::LimInf, 0, r(1), rat(1, 2)), c(PayoffKind::Sup, 1, r(1), rat(1, 2))];
        let sol = solve_regular(&st, 0, &cs).unwrap().unwrap();
        assert!(policy_chain(&st, &sol.strategy, 0).is_ok());
    }
}
