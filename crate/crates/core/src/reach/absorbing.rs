use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpOutcome, Relation, Row};
use crate::model::{Action, ActionIdx, StateId, StateSet, WeightedMdp};
use crate::query::MultiReachQuery;
use crate::rational::Rational;
use crate::strategy::Memoryless;

/// Flow LP solution with the memoryless strategy read off it.
#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub strategy: Memoryless,
    /// Positive flow values `y_{s,a}`.
    pub flow: BTreeMap<(StateId, ActionIdx), Rational>,
    pub lp: LinearProgram,
    pub point: Vec<Rational>,
}

/// Flow variables `y_{s,a}` for the states of `region`.
pub(crate) struct FlowVars {
    pub vars: Vec<(StateId, ActionIdx)>,
}

/// Conservation constraints `1_init(s) + inflow(s) = outflow(s)` over
/// `region`; flow leaving the region is lost.
pub(crate) fn flow_program(mdp: &WeightedMdp, init: StateId, region: &StateSet) -> (LinearProgram, FlowVars) {
    let mut vars = Vec::new();
    let mut first = vec![usize::MAX; mdp.num_states()];
    for s in region.iter() {
        first[s] = vars.len();
        for a in 0..mdp.num_actions(s) {
            vars.push((s, a));
        }
    }
    let mut lp = LinearProgram::new(vars.len());
    let mut rows: BTreeMap<StateId, BTreeMap<usize, Rational>> = BTreeMap::new();
    for (j, (s, a)) in vars.iter().enumerate() {
        *rows.entry(*s).or_default().entry(j).or_insert_with(Rational::zero) += Rational::one();
        for (t, p) in &mdp.action(*s, *a).successors {
            if region.contains(*t) {
                *rows.entry(*t).or_default().entry(j).or_insert_with(Rational::zero) -= p;
            }
        }
    }
    for s in region.iter() {
        let row: Row = rows.remove(&s).unwrap_or_default().into_iter().filter(|(_, v)| !v.is_zero()).collect();
        let rhs = if s == init { Rational::one() } else { Rational::zero() };
        lp.add_constraint(row, Relation::Eq, rhs);
    }
    (lp, FlowVars { vars })
}

impl FlowVars {
    /// Row of `Σ y_{s,a}·δ(s,a,X)`.
    pub fn inflow_row(&self, mdp: &WeightedMdp, into: &StateSet) -> Row {
        self.vars
            .iter()
            .enumerate()
            .filter_map(|(j, (s, a))| {
                let p: Rational = mdp
                    .action(*s, *a)
                    .successors
                    .iter()
                    .filter(|(t, _)| into.contains(*t))
                    .map(|(_, p)| p)
                    .sum();
                (!p.is_zero()).then_some((j, p))
            })
            .collect()
    }

    /// Strategy proportional to the flow; zero-flow states play action 0.
    pub fn extract(&self, mdp: &WeightedMdp, lp: LinearProgram, point: Vec<Rational>) -> FlowSolution {
        let mut choice = vec![Vec::new(); mdp.num_states()];
        let mut flow = BTreeMap::new();
        for (j, (s, a)) in self.vars.iter().enumerate() {
            if point[j].is_positive() {
                flow.insert((*s, *a), point[j].clone());
                choice[*s].push((*a, point[j].clone()));
            }
        }
        for d in choice.iter_mut() {
            let total: Rational = d.iter().map(|(_, p)| p).sum();
            for e in d.iter_mut() {
                e.1 = &e.1 / &total;
            }
        }
        FlowSolution { strategy: Memoryless { choice }, flow, lp, point }
    }
}

/// Copy of `mdp` in which every state of `set` only has a zero-weight
/// self-loop.
pub fn make_absorbing(mdp: &WeightedMdp, set: &StateSet) -> WeightedMdp {
    let actions = mdp
        .states()
        .map(|s| {
            if set.contains(s) {
                vec![Action { name: "stay".into(), weights: vec![0; mdp.dims()], successors: vec![(s, Rational::one())] }]
            } else {
                mdp.actions(s).to_vec()
            }
        })
        .collect();
    WeightedMdp::from_parts(mdp.dims(), mdp.state_names().to_vec(), actions)
}

/// Memoryless strategy reaching each `T_i` with probability at least `α_i`,
/// if one exists. All target states must be absorbing.
pub fn absorbing_multi_reach(
    mdp: &WeightedMdp,
    init: StateId,
    query: &MultiReachQuery,
) -> Result<Option<FlowSolution>> {
    let n = mdp.num_states();
    let mut union = StateSet::empty(n);
    for t in &query.targets {
        for s in t.iter() {
            if !mdp.is_absorbing(s) {
                return Err(Error::TargetsNotAbsorbing(s));
            }
            union.insert(s);
        }
    }
    let region = {
        let mut r = crate::graph::positive_reach_set(mdp, &union);
        for s in union.iter() {
            r.remove(s);
        }
        r
    };
    if !region.contains(init) {
        // the play never moves between target and non-target states
        let ok = query
            .targets
            .iter()
            .zip(&query.thresholds)
            .all(|(t, a)| t.contains(init) || !a.is_positive());
        if !ok {
            return Ok(None);
        }
        let lp = LinearProgram::new(0);
        return Ok(Some(FlowSolution {
            strategy: Memoryless::first_action(n),
            flow: BTreeMap::new(),
            lp,
            point: Vec::new(),
        }));
    }
    let (mut lp, vars) = flow_program(mdp, init, &region);
    for (t, a) in query.targets.iter().zip(&query.thresholds) {
        lp.add_constraint(vars.inflow_row(mdp, t), Relation::Ge, a.clone());
    }
    match solve_lp(&lp)? {
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Feasible(point) | LpOutcome::Optimal { point, .. } => Ok(Some(vars.extract(mdp, lp, point))),
        LpOutcome::Unbounded => unreachable!("feasibility program has no objective"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MdpBuilder;
    use crate::rational::rat;
    use crate::reach::reach_probability;

    fn split() -> WeightedMdp {
        let mut b = MdpBuilder::new(1);
        let s = b.add_states(&["s", "t1", "t2"]);
        b.add_action(s[0], "go", &[0], &[(s[1], rat(1, 2)), (s[2], rat(1, 2))]);
        b.add_edge(s[1], "stay", &[0], s[1]);
        b.add_edge(s[2], "stay", &[0], s[2]);
        b.build().unwrap()
    }

    #[test]
    fn absorbing_initial_target() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_state("s");
        b.add_edge(s, "stay", &[0], s);
        let m = b.build().unwrap();
        let q = MultiReachQuery::new(vec![StateSet::full(1)], vec![Rational::one()]);
        assert!(absorbing_multi_reach(&m, 0, &q).unwrap().is_some());
    }

    #[test]
    fn even_split_meets_both_halves() {
        let m = split();
        let t1 = StateSet::from_states(3, [1]);
        let t2 = StateSet::from_states(3, [2]);
        let q = MultiReachQuery::new(vec![t1.clone(), t2.clone()], vec![rat(1, 2), rat(1, 2)]);
        let sol = absorbing_multi_reach(&m, 0, &q).unwrap().expect("feasible");
        assert!(sol.lp.satisfied_by(&sol.point));
        assert_eq!(reach_probability(&m, &sol.strategy, 0, &t1).unwrap(), rat(1, 2));
        assert_eq!(reach_probability(&m, &sol.strategy, 0, &t2).unwrap(), rat(1, 2));
        let q = MultiReachQuery::new(vec![t1], vec![rat(3, 5)]);
        assert!(absorbing_multi_reach(&m, 0, &q).unwrap().is_none());
    }

    #[test]
    fn non_absorbing_target_is_rejected() {
        let m = crate::fixtures::s_t_mp();
        let q = MultiReachQuery::new(vec![StateSet::from_states(2, [1])], vec![rat(1, 2)]);
        assert_eq!(absorbing_multi_reach(&m, 0, &q).unwrap_err(), Error::TargetsNotAbsorbing(1));
    }

    #[test]
    fn looping_states_still_extract_a_proper_strategy() {
        // s can loop or go to t; the flow may circulate but the extracted
        // strategy must still reach t surely.
        let mut b = MdpBuilder::new(1);
        let s = b.add_states(&["s", "t"]);
        b.add_edge(s[0], "loop", &[0], s[0]);
        b.add_edge(s[0], "go", &[0], s[1]);
        b.add_edge(s[1], "stay", &[0], s[1]);
        let m = b.build().unwrap();
        let t = StateSet::from_states(2, [1]);
        let q = MultiReachQuery::new(vec![t.clone()], vec![Rational::one()]);
        let sol = absorbing_multi_reach(&m, 0, &q).unwrap().unwrap();
        assert_eq!(reach_probability(&m, &sol.strategy, 0, &t).unwrap(), Rational::one());
    }
}
