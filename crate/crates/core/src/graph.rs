//! Structural algorithms: SCCs, end components, MEC contraction, qualitative
//! reachability and safety.

use std::collections::BTreeMap;

use crate::model::{Action, ActionIdx, StateId, StateSet, WeightedMdp};
use crate::rational::Rational;

/// Per-state action restriction: `mask[s][a]` keeps action `a` of `s`.
pub type ActionMask = Vec<Vec<bool>>;

pub fn full_mask(mdp: &WeightedMdp) -> ActionMask {
    mdp.states().map(|s| vec![true; mdp.num_actions(s)]).collect()
}

/// Strongly connected components of a directed graph, in reverse topological
/// order (a component comes before every component that can reach it).
pub fn scc_decompose(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    scc_decompose_subset(adj, &vec![true; adj.len()])
}

/// Same as [`scc_decompose`] restricted to nodes with `alive[v]`.
pub fn scc_decompose_subset(adj: &[Vec<usize>], alive: &[bool]) -> Vec<Vec<usize>> {
    let n = adj.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    // explicit DFS stack of (node, next edge position)
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if !alive[root] || index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if !alive[w] {
                    continue;
                }
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndComponent {
    /// Sorted state list.
    pub states: Vec<StateId>,
    /// Allowed actions per member state.
    pub actions: BTreeMap<StateId, Vec<ActionIdx>>,
}

impl EndComponent {
    pub fn contains(&self, s: StateId) -> bool {
        self.states.binary_search(&s).is_ok()
    }

    pub fn state_actions(&self) -> impl Iterator<Item = (StateId, ActionIdx)> + '_ {
        self.actions.iter().flat_map(|(s, v)| v.iter().map(move |a| (*s, *a)))
    }

    pub fn num_actions(&self) -> usize {
        self.actions.values().map(Vec::len).sum()
    }

    pub fn state_set(&self, n: usize) -> StateSet {
        StateSet::from_states(n, self.states.iter().copied())
    }

    /// Mask allowing exactly this component's actions.
    pub fn mask(&self, mdp: &WeightedMdp) -> ActionMask {
        let mut m: ActionMask = mdp.states().map(|s| vec![false; mdp.num_actions(s)]).collect();
        for (s, a) in self.state_actions() {
            m[s][a] = true;
        }
        m
    }
}

/// Direct check of the end-component conditions.
pub fn is_end_component(mdp: &WeightedMdp, ec: &EndComponent) -> bool {
    if ec.states.is_empty() {
        return false;
    }
    for s in &ec.states {
        match ec.actions.get(s) {
            Some(v) if !v.is_empty() => {
                for a in v {
                    if *a >= mdp.num_actions(*s) {
                        return false;
                    }
                    if mdp.action(*s, *a).support().any(|t| !ec.contains(t)) {
                        return false;
                    }
                }
            }
            _ => return false,
        }
    }
    if ec.actions.keys().any(|s| !ec.contains(*s)) {
        return false;
    }
    let mut adj = vec![Vec::new(); mdp.num_states()];
    let mut alive = vec![false; mdp.num_states()];
    for s in &ec.states {
        alive[*s] = true;
    }
    for (s, a) in ec.state_actions() {
        adj[s].extend(mdp.action(s, a).support());
    }
    scc_decompose_subset(&adj, &alive).len() == 1
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MecDecomposition {
    pub mecs: Vec<EndComponent>,
    /// MEC index of each state, if any.
    pub membership: Vec<Option<usize>>,
}

impl MecDecomposition {
    pub fn len(&self) -> usize {
        self.mecs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mecs.is_empty()
    }
}

pub fn max_end_components(mdp: &WeightedMdp) -> MecDecomposition {
    mecs_restricted(mdp, &full_mask(mdp))
}

/// Maximal end components of the sub-MDP that only uses actions in `mask`.
pub fn mecs_restricted(mdp: &WeightedMdp, mask: &ActionMask) -> MecDecomposition {
    let n = mdp.num_states();
    let mut allowed = mask.clone();
    let mut alive: Vec<bool> = (0..n).map(|s| allowed[s].iter().any(|b| *b)).collect();
    loop {
        let mut adj = vec![Vec::new(); n];
        for s in 0..n {
            if !alive[s] {
                continue;
            }
            for (a, act) in mdp.actions(s).iter().enumerate() {
                if allowed[s][a] {
                    adj[s].extend(act.support());
                }
            }
        }
        let sccs = scc_decompose_subset(&adj, &alive);
        let mut comp = vec![usize::MAX; n];
        for (i, c) in sccs.iter().enumerate() {
            for s in c {
                comp[*s] = i;
            }
        }
        let mut changed = false;
        for s in 0..n {
            if !alive[s] {
                continue;
            }
            for (a, act) in mdp.actions(s).iter().enumerate() {
                if allowed[s][a] && act.support().any(|t| !alive[t] || comp[t] != comp[s]) {
                    allowed[s][a] = false;
                    changed = true;
                }
            }
            if !allowed[s].iter().any(|b| *b) {
                alive[s] = false;
                changed = true;
            }
        }
        if !changed {
            let mut mecs: Vec<EndComponent> = sccs
                .into_iter()
                .map(|states| {
                    let actions = states
                        .iter()
                        .map(|s| {
                            let v: Vec<ActionIdx> =
                                (0..mdp.num_actions(*s)).filter(|a| allowed[*s][*a]).collect();
                            (*s, v)
                        })
                        .collect();
                    EndComponent { states, actions }
                })
                .collect();
            mecs.sort_by_key(|m| m.states[0]);
            let mut membership = vec![None; n];
            for (i, m) in mecs.iter().enumerate() {
                for s in &m.states {
                    membership[*s] = Some(i);
                }
            }
            return MecDecomposition { mecs, membership };
        }
    }
}

/// MDP extended with one absorbing proxy state per MEC.
#[derive(Debug, Clone)]
pub struct Contraction {
    pub mdp: WeightedMdp,
    pub decomposition: MecDecomposition,
    /// Proxy state `s_C` per MEC.
    pub mec_state: Vec<StateId>,
    /// Index of the `a*` action per original state in a MEC.
    pub star_action: Vec<Option<ActionIdx>>,
    pub original_states: usize,
}

impl Contraction {
    pub fn is_star(&self, s: StateId, a: ActionIdx) -> bool {
        s < self.original_states && self.star_action[s] == Some(a)
    }
}

pub fn contract_mecs(mdp: &WeightedMdp) -> Contraction {
    contract_with(mdp, max_end_components(mdp))
}

/// Contraction against a precomputed decomposition.
pub fn contract_with(mdp: &WeightedMdp, decomposition: MecDecomposition) -> Contraction {
    let n = mdp.num_states();
    let d = mdp.dims();
    let mut names: Vec<String> = mdp.state_names().to_vec();
    let mut actions: Vec<Vec<Action>> = mdp.states().map(|s| mdp.actions(s).to_vec()).collect();
    let mut mec_state = Vec::new();
    let mut star_action = vec![None; n];
    for (i, mec) in decomposition.mecs.iter().enumerate() {
        let sc = names.len();
        names.push(format!("mec{i}"));
        actions.push(vec![Action {
            name: "a*".into(),
            weights: vec![0; d],
            successors: vec![(sc, Rational::one())],
        }]);
        mec_state.push(sc);
        for s in &mec.states {
            star_action[*s] = Some(actions[*s].len());
            actions[*s].push(Action {
                name: "a*".into(),
                weights: vec![0; d],
                successors: vec![(sc, Rational::one())],
            });
        }
    }
    Contraction {
        mdp: WeightedMdp::from_parts(d, names, actions),
        decomposition,
        mec_state,
        star_action,
        original_states: n,
    }
}

/// States with a positive-probability path to `target` (any actions).
pub fn positive_reach_set(mdp: &WeightedMdp, target: &StateSet) -> StateSet {
    positive_reach_masked(mdp, target, &full_mask(mdp))
}

pub fn positive_reach_masked(mdp: &WeightedMdp, target: &StateSet, mask: &ActionMask) -> StateSet {
    let n = mdp.num_states();
    let mut pred = vec![Vec::new(); n];
    for s in mdp.states() {
        for (a, act) in mdp.actions(s).iter().enumerate() {
            if mask[s][a] {
                for t in act.support() {
                    pred[t].push(s);
                }
            }
        }
    }
    let mut out = target.clone();
    let mut queue: Vec<StateId> = target.iter().collect();
    while let Some(t) = queue.pop() {
        for &s in &pred[t] {
            if out.insert(s) {
                queue.push(s);
            }
        }
    }
    out
}

/// Almost-sure winning region for reaching `target`.
pub fn almost_sure_reach_set(mdp: &WeightedMdp, target: &StateSet) -> StateSet {
    almost_sure_reach(mdp, target, &full_mask(mdp)).0
}

/// Almost-sure reachability restricted to `mask`, with a memoryless witness:
/// for each winning non-target state, an action that keeps the play inside
/// the winning region and makes progress toward `target`.
pub fn almost_sure_reach(
    mdp: &WeightedMdp,
    target: &StateSet,
    mask: &ActionMask,
) -> (StateSet, Vec<Option<ActionIdx>>) {
    let n = mdp.num_states();
    let mut region = StateSet::full(n);
    loop {
        let mut choice = vec![None; n];
        let mut reach = target.clone();
        let mut frontier: Vec<StateId> = target.iter().collect();
        // Layered backward search: a state joins when some allowed action
        // stays inside `region` and hits the current set.
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for s in mdp.states() {
                if reach.contains(s) || !region.contains(s) {
                    continue;
                }
                for (a, act) in mdp.actions(s).iter().enumerate() {
                    if mask[s][a]
                        && act.support().all(|t| region.contains(t))
                        && act.support().any(|t| reach.contains(t))
                    {
                        choice[s] = Some(a);
                        next.push(s);
                        break;
                    }
                }
            }
            for s in &next {
                reach.insert(*s);
            }
            frontier = next;
        }
        if reach == region {
            return (region, choice);
        }
        region = reach;
    }
}

/// Largest sub-MDP from which the controller can use only allowed actions
/// forever.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafeRegion {
    pub states: StateSet,
    pub actions: ActionMask,
}

pub fn sure_safe_region(
    mdp: &WeightedMdp,
    allowed: impl Fn(StateId, ActionIdx) -> bool,
) -> SafeRegion {
    let n = mdp.num_states();
    let mut keep: ActionMask =
        mdp.states().map(|s| (0..mdp.num_actions(s)).map(|a| allowed(s, a)).collect()).collect();
    let mut states = StateSet::from_bits((0..n).map(|s| keep[s].iter().any(|b| *b)).collect());
    loop {
        let mut changed = false;
        for s in 0..n {
            if !states.contains(s) {
                continue;
            }
            for (a, act) in mdp.actions(s).iter().enumerate() {
                if keep[s][a] && act.support().any(|t| !states.contains(t)) {
                    keep[s][a] = false;
                    changed = true;
                }
            }
            if !keep[s].iter().any(|b| *b) {
                states.remove(s);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for s in 0..n {
        if !states.contains(s) {
            keep[s].iter_mut().for_each(|b| *b = false);
        }
    }
    SafeRegion { states, actions: keep }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::MdpBuilder;
    use crate::rational::rat;

    #[test]
    fn scc_examples() {
        assert_eq!(scc_decompose(&[vec![1], vec![0]]), vec![vec![0, 1]]);
        assert_eq!(scc_decompose(&[vec![1], vec![2], vec![]]), vec![vec![2], vec![1], vec![0]]);
        let st = fixtures::s_t_mp();
        assert_eq!(scc_decompose(&st.support_graph()), vec![vec![0, 1]]);
    }

    #[test]
    fn s_t_has_one_mec_with_four_actions() {
        let st = fixtures::s_t_mp();
        let d = max_end_components(&st);
        assert_eq!(d.len(), 1);
        assert_eq!(d.mecs[0].states, vec![0, 1]);
        assert_eq!(d.mecs[0].num_actions(), 4);
        assert!(is_end_component(&st, &d.mecs[0]));
    }

    #[test]
    fn transient_state_then_absorbing() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_state("s");
        let t = b.add_state("t");
        b.add_edge(s, "go", &[0], t);
        b.add_edge(t, "loop", &[0], t);
        let m = b.build().unwrap();
        let d = max_end_components(&m);
        assert_eq!(d.mecs.len(), 1);
        assert_eq!(d.mecs[0].states, vec![t]);
        assert_eq!(d.membership, vec![None, Some(0)]);
        let c = contract_mecs(&m);
        assert_eq!(c.mdp.num_states(), 3);
        assert_eq!(c.star_action, vec![None, Some(1)]);
        assert!(c.mdp.is_absorbing(c.mec_state[0]));
    }

    #[test]
    fn two_disjoint_loops_and_non_closed_singleton() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_state("s");
        let t = b.add_state("t");
        let u = b.add_state("u");
        b.add_action(s, "split", &[0], &[(t, rat(1, 2)), (u, rat(1, 2))]);
        b.add_edge(t, "l", &[0], t);
        b.add_edge(u, "l", &[0], u);
        let m = b.build().unwrap();
        let d = max_end_components(&m);
        assert_eq!(d.mecs.iter().map(|c| c.states.clone()).collect::<Vec<_>>(), vec![vec![t], vec![u]]);
        let c = contract_mecs(&m);
        assert_eq!(c.mec_state.len(), 2);
        assert_eq!(c.mdp.num_states(), 5);
    }

    #[test]
    fn almost_sure_examples() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_state("s");
        let t = b.add_state("t");
        let sink = b.add_state("sink");
        let u = b.add_state("u");
        b.add_action(s, "split", &[0], &[(t, rat(1, 2)), (sink, rat(1, 2))]);
        b.add_edge(t, "l", &[0], t);
        b.add_edge(sink, "l", &[0], sink);
        b.add_edge(u, "go", &[0], t);
        let m = b.build().unwrap();
        let tt = StateSet::from_states(4, [t]);
        let win = almost_sure_reach_set(&m, &tt);
        assert!(!win.contains(s));
        assert!(win.contains(u));
        assert!(win.contains(t));
        assert_eq!(almost_sure_reach_set(&m, &StateSet::full(4)), StateSet::full(4));
        let pos = positive_reach_set(&m, &tt);
        assert!(pos.contains(s) && !pos.contains(sink));
        let init = positive_reach_set(&m, &StateSet::from_states(4, [s]));
        assert_eq!(init.iter().collect::<Vec<_>>(), vec![s]);
    }

    #[test]
    fn safe_region_examples() {
        let st = fixtures::s_t_mp();
        let all = sure_safe_region(&st, |_, _| true);
        assert_eq!(all.states, StateSet::full(2));
        let none = sure_safe_region(&st, |_, _| false);
        assert!(none.states.is_empty());
        let r = sure_safe_region(&st, |s, a| st.action(s, a).weights[0] >= 1);
        assert_eq!(r.states.iter().collect::<Vec<_>>(), vec![0]);
        assert_eq!(r.actions[0], vec![true, false]);
    }
}
