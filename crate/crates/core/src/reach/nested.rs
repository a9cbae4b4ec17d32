use std::collections::HashMap;

use super::absorbing::{absorbing_multi_reach, FlowSolution};
use crate::error::{Error, Result};
use crate::lift::{Product, ProductLift, TwoPhase};
use crate::model::{Action, StateId, StateSet, WeightedMdp};
use crate::query::MultiReachQuery;
use crate::rational::Rational;
use crate::strategy::{dirac, Memoryless};

/// Nested targets `T_1 ⊆ … ⊆ T_q`. Copy `c` of the MDP means the play has
/// visited `T_c` but not `T_{c-1}` (copy `q+1`: nothing visited yet); from
/// copy `c ≤ q` a switch action stops in a fresh absorbing `⊥_c`, and
/// `T_i` is replaced by `{⊥_1..⊥_i}`.
pub fn nested_multi_reach(
    mdp: &WeightedMdp,
    init: StateId,
    query: &MultiReachQuery,
) -> Result<Option<(ProductLift<TwoPhase>, FlowSolution)>> {
    let q = query.len();
    for i in 1..q {
        if !query.targets[i - 1].is_subset(&query.targets[i]) {
            return Err(Error::NotNested(i - 1, i));
        }
    }
    let n = mdp.num_states();
    let d = mdp.dims();
    // least copy index whose target contains t (q+1 if none), 1-based
    let level: Vec<usize> = mdp
        .states()
        .map(|t| (0..q).find(|i| query.targets[*i].contains(t)).map_or(q + 1, |i| i + 1))
        .collect();
    let id = |s: StateId, c: usize| (c - 1) * n + s;
    let bottom = |c: usize| (q + 1) * n + (c - 1);
    let total = (q + 1) * n + q;
    let mut names = Vec::with_capacity(total);
    let mut actions: Vec<Vec<Action>> = Vec::with_capacity(total);
    let mut origin = Vec::with_capacity(total);
    let mut tag = Vec::with_capacity(total);
    let mut base_actions = Vec::with_capacity(total);
    let mut switches = HashMap::new();
    for c in 1..=q + 1 {
        for s in mdp.states() {
            names.push(format!("{}#{c}", mdp.state_name(s)));
            let mut acts: Vec<Action> = mdp
                .actions(s)
                .iter()
                .map(|a| Action {
                    name: a.name.clone(),
                    weights: a.weights.clone(),
                    successors: a.successors.iter().map(|(t, p)| (id(*t, c.min(level[*t])), p.clone())).collect(),
                })
                .collect();
            base_actions.push(acts.len());
            if c <= q {
                switches.insert((id(s, c), acts.len()), dirac(0));
                acts.push(Action { name: "stop".into(), weights: vec![0; d], successors: vec![(bottom(c), Rational::one())] });
            }
            actions.push(acts);
            origin.push(Some(s));
            tag.push(c);
        }
    }
    for c in 1..=q {
        names.push(format!("bot{c}"));
        actions.push(vec![Action { name: "stay".into(), weights: vec![0; d], successors: vec![(bottom(c), Rational::one())] }]);
        origin.push(None);
        tag.push(0);
        base_actions.push(1);
    }
    let copy = WeightedMdp::from_parts(d, names, actions);
    let start = id(init, level[init]);
    let targets: Vec<StateSet> =
        (1..=q).map(|i| StateSet::from_states(total, (1..=i).map(bottom))).collect();
    let sub_query = MultiReachQuery::new(targets, query.thresholds.clone());
    let Some(flow) = absorbing_multi_reach(&copy, start, &sub_query)? else {
        return Ok(None);
    };
    let policy = TwoPhase {
        reach: flow.strategy.clone(),
        base_actions,
        switches,
        subs: vec![Memoryless::first_action(total)],
    };
    let product = Product::new(copy, origin, tag, start, vec![false; total]);
    Ok(Some((ProductLift { product, inner: policy }, flow)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::nested_linear_memory;
    use crate::rational::rat;
    use crate::reach::reach_probability;
    use crate::strategy::MooreStrategy;

    #[test]
    fn linear_memory_fixture_thresholds_are_tight() {
        for n in [2, 3] {
            let f = nested_linear_memory(n);
            let q = MultiReachQuery::new(f.targets.clone(), f.thresholds.clone());
            let (lift, _) = nested_multi_reach(&f.mdp, 0, &q).unwrap().expect("achievable");
            let st = MooreStrategy::from_policy(&f.mdp, &lift, 0).unwrap();
            for (t, a) in f.targets.iter().zip(&f.thresholds) {
                assert!(reach_probability(&f.mdp, &st, 0, t).unwrap() >= *a);
            }
            for i in 0..n {
                let mut th = f.thresholds.clone();
                th[i] += rat(1, 100);
                let q = MultiReachQuery::new(f.targets.clone(), th);
                assert!(nested_multi_reach(&f.mdp, 0, &q).unwrap().is_none());
            }
        }
    }

    #[test]
    fn rejects_non_nested_targets() {
        let f = nested_linear_memory(2);
        let q = MultiReachQuery::new(vec![f.targets[1].clone(), f.targets[0].clone()], vec![rat(0, 1); 2]);
        assert!(matches!(nested_multi_reach(&f.mdp, 0, &q), Err(Error::NotNested(0, 1))));
    }

    #[test]
    fn sure_absorbing_target() {
        let mut b = crate::model::MdpBuilder::new(1);
        let s = b.add_states(&["s", "t"]);
        b.add_edge(s[0], "go", &[0], s[1]);
        b.add_edge(s[1], "stay", &[0], s[1]);
        let m = b.build().unwrap();
        let t = StateSet::from_states(2, [1]);
        let q = MultiReachQuery::new(vec![t.clone(), t], vec![Rational::one(), Rational::one()]);
        assert!(nested_multi_reach(&m, 0, &q).unwrap().is_some());
    }
}
