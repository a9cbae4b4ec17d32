use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::chain::{hit_probabilities, stationary_distribution, FlaggedEdge};
use crate::error::{Error, Result};
use crate::model::{StateId, StateSet, WeightedMdp};
use crate::payoff::discounted_tail_bound;
use crate::query::{PayoffKind, PercentileConstraint};
use crate::rational::Rational;
use crate::strategy::{induced_chain, InducedChain, MooreStrategy};

/// Exact probability of reaching `target` under a finite strategy.
pub fn exact_verify_finite(
    mdp: &WeightedMdp,
    strategy: &MooreStrategy,
    init: StateId,
    target: &StateSet,
) -> Result<Rational> {
    let chain = induced_chain(mdp, strategy, init)?;
    chain.hit_probability(|v| target.contains(chain.nodes[v].0), |_, _| false)
}

/// Bounds on `P[f ≥ v]`; equal unless the payoff is a discounted sum whose
/// unfolding was cut off.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactCheck {
    pub lower: Rational,
    pub upper: Rational,
}

impl ExactCheck {
    fn exact(p: Rational) -> Self {
        ExactCheck { lower: p.clone(), upper: p }
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }

    pub fn certifies(&self, alpha: &Rational) -> bool {
        self.lower >= *alpha
    }

    pub fn refutes(&self, alpha: &Rational) -> bool {
        self.upper < *alpha
    }
}

/// Budget of (node, prefix sum) pairs explored for discounted sums.
const DS_FRONTIER_LIMIT: usize = 200_000;
const DS_DEPTH_LIMIT: usize = 400;

/// Probability that a run of `chain` meets `c`.
pub fn exact_constraint_probability(
    mdp: &WeightedMdp,
    chain: &InducedChain,
    c: &PercentileConstraint,
) -> Result<ExactCheck> {
    let w = |v: usize, a: usize| Rational::from_integer(mdp.action(chain.nodes[v].0, a).weight(c.dim));
    match c.kind {
        PayoffKind::Sup => Ok(ExactCheck::exact(chain.hit_probability(|_| false, |v, e| w(v, e.action) >= c.value)?)),
        PayoffKind::Inf => {
            let bad = chain.hit_probability(|_| false, |v, e| w(v, e.action) < c.value)?;
            Ok(ExactCheck::exact(Rational::one() - bad))
        }
        PayoffKind::LimInf | PayoffKind::LimSup | PayoffKind::MpInf | PayoffKind::MpSup => {
            let mut total = Rational::zero();
            for (class, mass) in chain.bscc_masses()? {
                if mass.is_zero() {
                    continue;
                }
                let weights = class.iter().flat_map(|v| chain.edges[*v].iter().map(move |e| w(*v, e.action)));
                let good = match c.kind {
                    PayoffKind::LimInf => weights.min().is_some_and(|m| m >= c.value),
                    PayoffKind::LimSup => weights.max().is_some_and(|m| m >= c.value),
                    _ => class_average(chain, &class, &w)? >= c.value,
                };
                if good {
                    total += mass;
                }
            }
            Ok(ExactCheck::exact(total))
        }
        PayoffKind::TruncatedSum => truncated_sum_probability(mdp, chain, c).map(ExactCheck::exact),
        PayoffKind::DiscountedSum => discounted_sum_bounds(mdp, chain, c),
    }
}

fn class_average(chain: &InducedChain, class: &[usize], w: &impl Fn(usize, usize) -> Rational) -> Result<Rational> {
    let rows = chain.rows();
    let pi = stationary_distribution(&rows, class)?;
    let mut avg = Rational::zero();
    for (k, v) in class.iter().enumerate() {
        for e in &chain.edges[*v] {
            avg += &pi[k] * &e.prob * w(*v, e.action);
        }
    }
    Ok(avg)
}

/// Chain product with the accumulated sum, saturated above `floor(v)`;
/// arriving in the target decides the run.
fn truncated_sum_probability(mdp: &WeightedMdp, chain: &InducedChain, c: &PercentileConstraint) -> Result<Rational> {
    if let Some((s, a)) = mdp.has_negative_weight() {
        return Err(Error::NegativeWeight { state: s, action: mdp.action(s, a).name.clone() });
    }
    let target = c.target_set(mdp.num_states());
    let bound = c.value.floor_i64().ok_or_else(|| Error::TooLarge("threshold".into()))?;
    if bound < 0 {
        return Ok(Rational::zero());
    }
    let cap = bound + 1;
    let mut index: HashMap<(usize, i64), usize> = HashMap::new();
    let mut keys: Vec<(usize, i64)> = Vec::new();
    let mut intern = |k: (usize, i64), keys: &mut Vec<(usize, i64)>| -> usize {
        *index.entry(k).or_insert_with(|| {
            keys.push(k);
            keys.len() - 1
        })
    };
    let starts: Vec<(usize, Rational)> =
        chain.initial.iter().map(|(v, p)| (intern((*v, 0), &mut keys), p.clone())).collect();
    let mut edges: Vec<Vec<FlaggedEdge>> = Vec::new();
    let mut hit = Vec::new();
    let mut i = 0;
    while i < keys.len() {
        let (v, sum) = keys[i];
        let s = chain.nodes[v].0;
        let decided = target.contains(s) || sum >= cap;
        hit.push(target.contains(s) && sum <= bound);
        let mut out = Vec::new();
        if decided {
            out.push((i, Rational::one(), false));
        } else {
            for e in &chain.edges[v] {
                let next = (sum + mdp.action(s, e.action).weight(c.dim)).min(cap);
                out.push((intern((e.target, next), &mut keys), e.prob.clone(), false));
            }
        }
        edges.push(out);
        i += 1;
    }
    let x = hit_probabilities(&edges, &hit)?;
    Ok(starts.iter().map(|(k, p)| p * &x[*k]).sum())
}

/// Explores runs breadth-first with their exact prefix sums. A branch is
/// decided once the tail bound puts it clearly above or below `v`; mass
/// still undecided at the cut-off widens the bounds.
fn discounted_sum_bounds(mdp: &WeightedMdp, chain: &InducedChain, c: &PercentileConstraint) -> Result<ExactCheck> {
    let lambda = c.discount.clone().ok_or_else(|| Error::InvalidQuery("missing discount factor".into()))?;
    let w_max = mdp.max_abs_weight();
    let mut frontier: HashMap<(usize, Rational), Rational> = HashMap::new();
    for (v, p) in &chain.initial {
        *frontier.entry((*v, Rational::zero())).or_insert_with(Rational::zero) += p;
    }
    let mut yes = Rational::zero();
    let mut pending = Rational::one();
    let mut pow = lambda.clone();
    for depth in 0..=DS_DEPTH_LIMIT {
        let tail = discounted_tail_bound(w_max, &lambda, depth);
        let mut open: HashMap<(usize, Rational), Rational> = HashMap::new();
        pending = Rational::zero();
        for ((v, sum), p) in frontier {
            if &sum - &tail >= c.value {
                yes += p;
            } else if &sum + &tail < c.value {
                continue;
            } else {
                pending += &p;
                open.insert((v, sum), p);
            }
        }
        if open.is_empty() || depth == DS_DEPTH_LIMIT || open.len() > DS_FRONTIER_LIMIT {
            frontier = open;
            break;
        }
        let mut next: HashMap<(usize, Rational), Rational> = HashMap::new();
        for ((v, sum), p) in open {
            let s = chain.nodes[v].0;
            for e in &chain.edges[v] {
                let add = &pow * Rational::from_integer(mdp.action(s, e.action).weight(c.dim));
                *next.entry((e.target, &sum + &add)).or_insert_with(Rational::zero) += &p * &e.prob;
            }
        }
        frontier = next;
        pow = &pow * &lambda;
    }
    let _ = frontier;
    Ok(ExactCheck { upper: &yes + &pending, lower: yes })
}
