//! Weighted MDPs with exact transition probabilities and integer action weights.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::rational::Rational;

pub type StateId = usize;
/// Index of an action inside `A(s)`; only meaningful together with its state.
pub type ActionIdx = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub name: String,
    pub weights: Vec<i64>,
    /// Support of δ(s,a) with probabilities, sorted by state, no duplicates.
    pub successors: Vec<(StateId, Rational)>,
}

impl Action {
    pub fn weight(&self, dim: usize) -> i64 {
        self.weights[dim]
    }

    pub fn support(&self) -> impl Iterator<Item = StateId> + '_ {
        self.successors.iter().map(|(t, _)| *t)
    }

    pub fn prob_to(&self, t: StateId) -> Rational {
        self.successors
            .iter()
            .find(|(u, _)| *u == t)
            .map(|(_, p)| p.clone())
            .unwrap_or_else(Rational::zero)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedMdp {
    dims: usize,
    names: Vec<String>,
    actions: Vec<Vec<Action>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error("deadlock state {state}")]
    Deadlock { state: StateId },
    #[error("distribution sum {sum} != 1 at ({state},{action})")]
    DistributionSum { state: StateId, action: ActionIdx, sum: Rational },
    #[error("non-positive probability {prob} at ({state},{action})")]
    NonPositiveProbability { state: StateId, action: ActionIdx, prob: Rational },
    #[error("successor {target} out of range at ({state},{action})")]
    SuccessorOutOfRange { state: StateId, action: ActionIdx, target: StateId },
    #[error("weight vector has {got} entries, expected {expected} at ({state},{action})")]
    WeightDimension { state: StateId, action: ActionIdx, got: usize, expected: usize },
    #[error("duplicate state name `{0}`")]
    DuplicateState(String),
}

impl WeightedMdp {
    /// Assembles an MDP without checking it; see [`validate_mdp`].
    pub fn from_parts(dims: usize, names: Vec<String>, actions: Vec<Vec<Action>>) -> Self {
        WeightedMdp { dims, names, actions }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn states(&self) -> std::ops::Range<StateId> {
        0..self.names.len()
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.names[s]
    }

    pub fn state_names(&self) -> &[String] {
        &self.names
    }

    pub fn state_by_name(&self, name: &str) -> Option<StateId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn actions(&self, s: StateId) -> &[Action] {
        &self.actions[s]
    }

    pub fn action(&self, s: StateId, a: ActionIdx) -> &Action {
        &self.actions[s][a]
    }

    pub fn num_actions(&self, s: StateId) -> usize {
        self.actions[s].len()
    }

    pub fn total_actions(&self) -> usize {
        self.actions.iter().map(Vec::len).sum()
    }

    pub fn action_by_name(&self, s: StateId, name: &str) -> Option<ActionIdx> {
        self.actions[s].iter().position(|a| a.name == name)
    }

    /// Largest absolute weight over all actions and dimensions.
    pub fn max_abs_weight(&self) -> i64 {
        self.actions
            .iter()
            .flatten()
            .flat_map(|a| a.weights.iter())
            .map(|w| w.abs())
            .max()
            .unwrap_or(0)
    }

    /// Every action of `s` loops back to `s` with probability one.
    pub fn is_absorbing(&self, s: StateId) -> bool {
        self.actions[s]
            .iter()
            .all(|a| a.successors.len() == 1 && a.successors[0].0 == s)
    }

    pub fn has_negative_weight(&self) -> Option<(StateId, ActionIdx)> {
        for s in self.states() {
            for (i, a) in self.actions[s].iter().enumerate() {
                if a.weights.iter().any(|w| *w < 0) {
                    return Some((s, i));
                }
            }
        }
        None
    }

    /// Adjacency over the support graph.
    pub fn support_graph(&self) -> Vec<Vec<StateId>> {
        self.states()
            .map(|s| {
                let mut v: Vec<StateId> =
                    self.actions[s].iter().flat_map(|a| a.support()).collect();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let v = validate_mdp(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(v))
        }
    }
}

/// Checks every model invariant and returns all violations found.
pub fn validate_mdp(mdp: &WeightedMdp) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for n in &mdp.names {
        if !seen.insert(n) {
            out.push(Violation::DuplicateState(n.clone()));
        }
    }
    for s in mdp.states() {
        if mdp.actions[s].is_empty() {
            out.push(Violation::Deadlock { state: s });
        }
        for (i, a) in mdp.actions[s].iter().enumerate() {
            if a.weights.len() != mdp.dims {
                out.push(Violation::WeightDimension {
                    state: s,
                    action: i,
                    got: a.weights.len(),
                    expected: mdp.dims,
                });
            }
            let mut sum = Rational::zero();
            for (t, p) in &a.successors {
                if *t >= mdp.num_states() {
                    out.push(Violation::SuccessorOutOfRange { state: s, action: i, target: *t });
                }
                if !p.is_positive() {
                    out.push(Violation::NonPositiveProbability {
                        state: s,
                        action: i,
                        prob: p.clone(),
                    });
                }
                sum += p;
            }
            if !sum.is_one() {
                out.push(Violation::DistributionSum { state: s, action: i, sum });
            }
        }
    }
    out
}

/// Turns every deadlock state into an absorbing state with a single
/// zero-weight self-loop named `stay`.
pub fn repair_deadlocks(mdp: &WeightedMdp) -> WeightedMdp {
    let mut out = mdp.clone();
    for s in out.states() {
        if out.actions[s].is_empty() {
            out.actions[s].push(Action {
                name: "stay".into(),
                weights: vec![0; out.dims],
                successors: vec![(s, Rational::one())],
            });
        }
    }
    out
}

/// Incremental construction of MDPs; duplicate successors are merged.
#[derive(Debug, Clone)]
pub struct MdpBuilder {
    dims: usize,
    names: Vec<String>,
    actions: Vec<Vec<Action>>,
}

impl MdpBuilder {
    pub fn new(dims: usize) -> Self {
        MdpBuilder { dims, names: Vec::new(), actions: Vec::new() }
    }

    pub fn add_state(&mut self, name: impl Into<String>) -> StateId {
        self.names.push(name.into());
        self.actions.push(Vec::new());
        self.names.len() - 1
    }

    pub fn add_states(&mut self, names: &[&str]) -> Vec<StateId> {
        names.iter().map(|n| self.add_state(*n)).collect()
    }

    pub fn add_action(
        &mut self,
        s: StateId,
        name: impl Into<String>,
        weights: &[i64],
        successors: &[(StateId, Rational)],
    ) -> ActionIdx {
        let mut merged: BTreeMap<StateId, Rational> = BTreeMap::new();
        for (t, p) in successors {
            *merged.entry(*t).or_insert_with(Rational::zero) += p;
        }
        self.actions[s].push(Action {
            name: name.into(),
            weights: weights.to_vec(),
            successors: merged.into_iter().collect(),
        });
        self.actions[s].len() - 1
    }

    /// Deterministic action to `t`.
    pub fn add_edge(&mut self, s: StateId, name: impl Into<String>, weights: &[i64], t: StateId) -> ActionIdx {
        self.add_action(s, name, weights, &[(t, Rational::one())])
    }

    pub fn build(self) -> Result<WeightedMdp> {
        let mdp = self.build_unchecked();
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn build_unchecked(self) -> WeightedMdp {
        WeightedMdp { dims: self.dims, names: self.names, actions: self.actions }
    }
}

/// Finite run prefix `s_1 a_1 s_2 … a_{n-1} s_n`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunPrefix {
    pub states: Vec<StateId>,
    pub actions: Vec<ActionIdx>,
}

impl RunPrefix {
    pub fn start(s: StateId) -> Self {
        RunPrefix { states: vec![s], actions: Vec::new() }
    }

    pub fn push(&mut self, a: ActionIdx, next: StateId) {
        self.actions.push(a);
        self.states.push(next);
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Weight vectors of the actions taken, in order.
    pub fn weights<'a>(&'a self, mdp: &'a WeightedMdp) -> impl Iterator<Item = &'a [i64]> + 'a {
        self.actions
            .iter()
            .enumerate()
            .map(move |(j, a)| mdp.action(self.states[j], *a).weights.as_slice())
    }

    /// True iff every step follows a positive-probability transition.
    pub fn is_consistent(&self, mdp: &WeightedMdp) -> bool {
        self.states.len() == self.actions.len() + 1
            && self.actions.iter().enumerate().all(|(j, a)| {
                *a < mdp.num_actions(self.states[j])
                    && mdp.action(self.states[j], *a).prob_to(self.states[j + 1]).is_positive()
            })
    }
}

/// Plain set of states over a fixed universe.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct StateSet {
    bits: Vec<bool>,
}

impl StateSet {
    pub fn empty(n: usize) -> Self {
        StateSet { bits: vec![false; n] }
    }

    pub fn full(n: usize) -> Self {
        StateSet { bits: vec![true; n] }
    }

    pub fn from_states(n: usize, states: impl IntoIterator<Item = StateId>) -> Self {
        let mut s = Self::empty(n);
        for x in states {
            s.insert(x);
        }
        s
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        StateSet { bits }
    }

    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn contains(&self, s: StateId) -> bool {
        self.bits.get(s).copied().unwrap_or(false)
    }

    pub fn insert(&mut self, s: StateId) -> bool {
        let was = self.bits[s];
        self.bits[s] = true;
        !was
    }

    pub fn remove(&mut self, s: StateId) {
        self.bits[s] = false;
    }

    pub fn len(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn iter(&self) -> impl Iterator<Item = StateId> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.iter().all(|s| other.contains(s))
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        StateSet { bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect() }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

impl fmt::Debug for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn one_state_self_loop_is_valid() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_state("s");
        b.add_edge(s, "a", &[0], s);
        assert!(validate_mdp(&b.build_unchecked()).is_empty());
    }

    #[test]
    fn half_distribution_is_reported() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_state("s");
        let t = b.add_state("t");
        b.add_action(s, "a", &[0], &[(t, rat(1, 2))]);
        b.add_edge(t, "b", &[0], t);
        let v = validate_mdp(&b.build_unchecked());
        assert_eq!(v, vec![Violation::DistributionSum { state: 0, action: 0, sum: rat(1, 2) }]);
        assert_eq!(v[0].to_string(), "distribution sum 1/2 != 1 at (0,0)");
    }

    #[test]
    fn deadlock_is_reported_and_repaired() {
        let mut b = MdpBuilder::new(2);
        let s = b.add_state("s");
        let t = b.add_state("t");
        b.add_edge(s, "a", &[1, 1], t);
        let mdp = b.build_unchecked();
        assert_eq!(validate_mdp(&mdp), vec![Violation::Deadlock { state: t }]);
        let fixed = repair_deadlocks(&mdp);
        assert!(validate_mdp(&fixed).is_empty());
        assert!(fixed.is_absorbing(t));
        assert_eq!(fixed.action(t, 0).weights, vec![0, 0]);
    }

    #[test]
    fn builder_merges_duplicate_successors() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_state("s");
        b.add_action(s, "a", &[0], &[(s, rat(1, 3)), (s, rat(2, 3))]);
        let mdp = b.build().unwrap();
        assert_eq!(mdp.action(s, 0).successors, vec![(s, rat(1, 1))]);
    }

    #[test]
    fn run_prefix_consistency() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_state("s");
        let t = b.add_state("t");
        b.add_edge(s, "a", &[3], t);
        b.add_edge(t, "b", &[1], t);
        let mdp = b.build().unwrap();
        let mut r = RunPrefix::start(s);
        r.push(0, t);
        r.push(0, t);
        assert!(r.is_consistent(&mdp));
        let w: Vec<i64> = r.weights(&mdp).map(|w| w[0]).collect();
        assert_eq!(w, vec![3, 1]);
        r.push(0, s);
        assert!(!r.is_consistent(&mdp));
    }
}
