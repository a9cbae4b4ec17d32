use std::collections::{HashMap, VecDeque};

use super::absorbing::{absorbing_multi_reach, FlowSolution};
use super::target_bits;
use crate::error::{Error, Result};
use crate::graph::contract_mecs;
use crate::lift::{Product, ProductLift, TwoPhase};
use crate::model::{Action, StateId, StateSet, WeightedMdp};
use crate::query::MultiReachQuery;
use crate::strategy::{dirac, uniform, Memoryless};

/// Product of `mdp` with the set of targets visited so far (the tag of a
/// product state is the visited bitmask), restricted to the part reachable
/// from `init`.
pub fn visit_product(mdp: &WeightedMdp, init: StateId, targets: &[StateSet]) -> Result<Product> {
    if targets.len() > 32 {
        return Err(Error::TooLarge(format!("{} targets", targets.len())));
    }
    let bits: Vec<u64> = mdp.states().map(|s| target_bits(targets, s)).collect();
    let mut index: HashMap<(StateId, u64), usize> = HashMap::new();
    let mut keys = Vec::new();
    let mut queue = VecDeque::new();
    let start = (init, bits[init]);
    index.insert(start, 0);
    keys.push(start);
    queue.push_back(0);
    let mut actions: Vec<Vec<Action>> = Vec::new();
    while let Some(p) = queue.pop_front() {
        let (s, b) = keys[p];
        let mut acts = Vec::new();
        for a in mdp.actions(s) {
            let mut succ = Vec::new();
            for (t, pr) in &a.successors {
                let key = (*t, b | bits[*t]);
                let j = *index.entry(key).or_insert_with(|| {
                    keys.push(key);
                    queue.push_back(keys.len() - 1);
                    keys.len() - 1
                });
                succ.push((j, pr.clone()));
            }
            acts.push(Action { name: a.name.clone(), weights: a.weights.clone(), successors: succ });
        }
        if actions.len() <= p {
            actions.resize_with(p + 1, Vec::new);
        }
        actions[p] = acts;
    }
    let names = keys.iter().map(|(s, b)| format!("{}#{b:b}", mdp.state_name(*s))).collect();
    let origin = keys.iter().map(|(s, _)| Some(*s)).collect();
    let tag = keys.iter().map(|(_, b)| *b as usize).collect();
    let n = keys.len();
    Ok(Product::new(WeightedMdp::from_parts(mdp.dims(), names, actions), origin, tag, 0, vec![false; n]))
}

/// Arbitrary targets: runs settle in an end component of the visited-set
/// product, whose bits are then final, so each `T_i` becomes "reach a MEC
/// whose bit `i` is set" after contraction.
pub fn general_multi_reach(
    mdp: &WeightedMdp,
    init: StateId,
    query: &MultiReachQuery,
) -> Result<Option<(ProductLift<TwoPhase>, FlowSolution)>> {
    let product = visit_product(mdp, init, &query.targets)?;
    let pm = &product.mdp;
    let con = contract_mecs(pm);
    let total = con.mdp.num_states();
    let targets: Vec<StateSet> = (0..query.len())
        .map(|i| {
            StateSet::from_states(
                total,
                con.decomposition
                    .mecs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| product.tag[c.states[0]] & (1 << i) != 0)
                    .map(|(k, _)| con.mec_state[k]),
            )
        })
        .collect();
    let sub_query = MultiReachQuery::new(targets, query.thresholds.clone());
    let Some(flow) = absorbing_multi_reach(&con.mdp, product.init, &sub_query)? else {
        return Ok(None);
    };
    let mut base_actions: Vec<usize> = pm.states().map(|p| pm.num_actions(p)).collect();
    base_actions.resize(total, 1);
    let mut switches = HashMap::new();
    let mut subs = Vec::new();
    for (k, c) in con.decomposition.mecs.iter().enumerate() {
        let mut choice = vec![Vec::new(); total];
        for (s, acts) in &c.actions {
            choice[*s] = uniform(acts);
            switches.insert((*s, con.star_action[*s].expect("MEC state has a*")), dirac(k));
        }
        subs.push(Memoryless { choice });
    }
    let policy = TwoPhase { reach: flow.strategy.clone(), base_actions, switches, subs };
    Ok(Some((ProductLift { product, inner: policy }, flow)))
}
