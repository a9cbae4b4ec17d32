//! Multiple reachability: the absorbing-target flow LP, nested and general
//! targets, the almost-sure recursion, and the two end-component
//! decompositions that payoff solvers plug their per-MEC checks into.

mod absorbing;
mod almost_sure;
mod decompose;
mod general;
mod nested;

pub use absorbing::{absorbing_multi_reach, make_absorbing, FlowSolution};
pub use almost_sure::{almost_sure_multi_reach, AlmostSureWitness};
pub use decompose::{
    lambda_decomposition_solve, maximal_subsets, prefix_independent_solve, LambdaOutcome,
    LambdaSolution, PrefixIndependent,
};
pub use general::{general_multi_reach, visit_product};
pub use nested::nested_multi_reach;

use crate::error::Result;
use crate::model::{StateId, StateSet, WeightedMdp};
use crate::rational::Rational;
use crate::strategy::{policy_chain, Policy};

/// Exact probability that `policy` from `init` visits `target`.
pub fn reach_probability<P: Policy>(
    mdp: &WeightedMdp,
    policy: &P,
    init: StateId,
    target: &StateSet,
) -> Result<Rational> {
    let chain = policy_chain(mdp, policy, init)?;
    chain.hit_probability(|v| target.contains(chain.nodes[v].0), |_, _| false)
}

/// Bit `i` set iff `s ∈ targets[i]`.
pub(crate) fn target_bits(targets: &[StateSet], s: StateId) -> u64 {
    targets.iter().enumerate().filter(|(_, t)| t.contains(s)).fold(0, |acc, (i, _)| acc | (1 << i))
}
