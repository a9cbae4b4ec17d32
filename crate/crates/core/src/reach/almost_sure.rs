use std::collections::HashMap;

use super::absorbing::make_absorbing;
use super::target_bits;
use crate::error::{Error, Result};
use crate::graph::{almost_sure_reach, full_mask};
use crate::model::{ActionIdx, StateId, StateSet, WeightedMdp};
use crate::strategy::{dirac, Dist, Policy};

/// Strategy for visiting every target almost surely. Its memory is the set
/// of targets still missing.
#[derive(Debug, Clone)]
pub struct AlmostSureWitness {
    bits: Vec<u64>,
    all: u64,
    /// Winning region and attractor choice per residual set.
    solved: HashMap<u64, (StateSet, Vec<Option<ActionIdx>>)>,
}

impl AlmostSureWitness {
    /// States from which the residual set `mask` can still be completed.
    pub fn winning(&self, mask: u64) -> Option<&StateSet> {
        self.solved.get(&mask).map(|(w, _)| w)
    }

    /// Number of residual sets solved (the memoized subproblems).
    pub fn subproblems(&self) -> usize {
        self.solved.len()
    }
}

struct Solver<'a> {
    mdp: &'a WeightedMdp,
    targets: &'a [StateSet],
    bits: Vec<u64>,
    solved: HashMap<u64, (StateSet, Vec<Option<ActionIdx>>)>,
}

impl Solver<'_> {
    fn win(&mut self, mask: u64) -> StateSet {
        if let Some((w, _)) = self.solved.get(&mask) {
            return w.clone();
        }
        let n = self.mdp.num_states();
        if mask == 0 {
            self.solved.insert(0, (StateSet::full(n), vec![None; n]));
            return StateSet::full(n);
        }
        let mut union = StateSet::empty(n);
        for (i, t) in self.targets.iter().enumerate() {
            if mask & (1 << i) != 0 {
                for s in t.iter() {
                    union.insert(s);
                }
            }
        }
        // first visit to the union must land where the rest can be finished
        let mut good = StateSet::empty(n);
        for x in union.iter().collect::<Vec<_>>() {
            if self.win(mask & !self.bits[x]).contains(x) {
                good.insert(x);
            }
        }
        let stopped = make_absorbing(self.mdp, &union);
        let (region, choice) = almost_sure_reach(&stopped, &good, &full_mask(&stopped));
        self.solved.insert(mask, (region.clone(), choice));
        region
    }
}

/// Decides whether some strategy visits every `T_i` with probability 1 from
/// `init`, recursing on the set of targets still missing.
pub fn almost_sure_multi_reach(
    mdp: &WeightedMdp,
    init: StateId,
    targets: &[StateSet],
) -> Result<Option<AlmostSureWitness>> {
    if targets.len() > 32 {
        return Err(Error::TooLarge(format!("{} targets", targets.len())));
    }
    let bits: Vec<u64> = mdp.states().map(|s| target_bits(targets, s)).collect();
    let all = if targets.is_empty() { 0 } else { (1u64 << targets.len()) - 1 };
    let mut solver = Solver { mdp, targets, bits: bits.clone(), solved: HashMap::new() };
    let start = all & !bits[init];
    if !solver.win(start).contains(init) {
        return Ok(None);
    }
    Ok(Some(AlmostSureWitness { bits, all, solved: solver.solved }))
}

impl Policy for AlmostSureWitness {
    type Mem = u64;

    fn initial(&self, s: StateId) -> Dist<u64> {
        dirac(self.all & !self.bits[s])
    }

    fn act(&self, s: StateId, m: &u64) -> Dist<ActionIdx> {
        let a = self.solved.get(m).and_then(|(_, c)| c[s]).unwrap_or(0);
        dirac(a)
    }

    fn update(&self, m: &u64, _s: StateId, _a: ActionIdx, next: StateId) -> Dist<u64> {
        dirac(m & !self.bits[next])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::MdpBuilder;
    use crate::rational::{rat, Rational};
    use crate::reach::reach_probability;
    use crate::strategy::MooreStrategy;

    #[test]
    fn exp_memory_witness_needs_two_to_the_k_memory() {
        for k in 1..=3 {
            let f = fixtures::exp_memory(k);
            let w = almost_sure_multi_reach(&f.mdp, 0, &f.targets).unwrap().expect("winning");
            let st = MooreStrategy::from_policy(&f.mdp, &w, 0).unwrap();
            for t in &f.targets {
                assert_eq!(reach_probability(&f.mdp, &st, 0, t).unwrap(), Rational::one());
            }
            assert!(st.minimized_memory_size() >= 1 << k);
        }
    }

    #[test]
    fn whole_state_space_target() {
        let m = fixtures::s_t_mp();
        assert!(almost_sure_multi_reach(&m, 0, &[StateSet::full(2)]).unwrap().is_some());
    }

    #[test]
    fn disjoint_traps_behind_a_coin() {
        let mut b = MdpBuilder::new(1);
        let s = b.add_states(&["s", "l", "r"]);
        b.add_action(s[0], "flip", &[0], &[(s[1], rat(1, 2)), (s[2], rat(1, 2))]);
        b.add_edge(s[1], "stay", &[0], s[1]);
        b.add_edge(s[2], "stay", &[0], s[2]);
        let m = b.build().unwrap();
        let ts = [StateSet::from_states(3, [1]), StateSet::from_states(3, [2])];
        assert!(almost_sure_multi_reach(&m, 0, &ts).unwrap().is_none());
    }
}
