//! Brute-force decision procedure for small conjunctive queries.
//!
//! The query is moved to a product that makes every constraint a property of
//! the end component a run settles in. Inside each maximal end component the
//! jointly achievable constraint sets are found by enumeration; components
//! are then collapsed into nodes with "stop" choices, and the 2-dimensional
//! achievable set of the resulting stopping game is traced exactly with
//! policy iteration. Nothing here uses linear programming.

use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::chain::{bottom_sccs, hit_probabilities, stationary_distribution, FlaggedEdge};
use crate::error::{Error, Result};
use crate::graph::{is_end_component, max_end_components, EndComponent, MecDecomposition};
use crate::model::{Action, ActionIdx, StateId, WeightedMdp};
use crate::query::{check_family, Family, PayoffKind, PercentileConstraint};
use crate::rational::Rational;
use crate::strategy::{induced_chain, Memoryless, MooreStrategy};

use super::exact::exact_constraint_probability;

const PRODUCT_LIMIT: usize = 4096;
const ENUMERATION_LIMIT: u64 = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleVerdict {
    Yes,
    No,
    Inconclusive,
}

/// How a Yes is realised on the collapsed model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// One deterministic choice per collapsed node is enough.
    Pure,
    /// Needs a mixture of deterministic choices.
    Randomized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleAnswer {
    pub verdict: OracleVerdict,
    pub witness: Option<WitnessKind>,
    /// Vertices of the Pareto frontier of satisfaction probabilities, in
    /// constraint order (constraints with α = 0 removed).
    pub frontier: Vec<Vec<Rational>>,
    pub product_states: usize,
    pub reason: Option<String>,
}

impl OracleAnswer {
    fn inconclusive(reason: impl Into<String>) -> Self {
        OracleAnswer {
            verdict: OracleVerdict::Inconclusive,
            witness: None,
            frontier: Vec::new(),
            product_states: 0,
            reason: Some(reason.into()),
        }
    }
}

type Product = (WeightedMdp, Vec<(StateId, usize)>, usize);

/// Plain BFS product; the tag update sees the successor.
fn build_product<T: Clone + Eq + Hash + Debug>(
    mdp: &WeightedMdp,
    init: StateId,
    init_tag: T,
    step: impl Fn(&T, StateId, ActionIdx, StateId) -> T,
) -> Option<(Product, Vec<T>)> {
    let mut index: HashMap<(StateId, T), usize> = HashMap::new();
    let mut keys: Vec<(StateId, T)> = vec![(init, init_tag.clone())];
    index.insert((init, init_tag), 0);
    let mut actions: Vec<Vec<Action>> = Vec::new();
    let mut i = 0;
    while i < keys.len() {
        if keys.len() > PRODUCT_LIMIT {
            return None;
        }
        let (s, tag) = keys[i].clone();
        let mut acts = Vec::new();
        for (a, act) in mdp.actions(s).iter().enumerate() {
            let mut succ: Vec<(StateId, Rational)> = act
                .successors
                .iter()
                .map(|(t, p)| {
                    let key = (*t, step(&tag, s, a, *t));
                    let next = keys.len();
                    let id = *index.entry(key.clone()).or_insert_with(|| {
                        keys.push(key);
                        next
                    });
                    (id, p.clone())
                })
                .collect();
            succ.sort_by_key(|(t, _)| *t);
            acts.push(Action { name: act.name.clone(), weights: act.weights.clone(), successors: succ });
        }
        actions.push(acts);
        i += 1;
    }
    let mut tags: Vec<T> = Vec::new();
    let mut tag_index: HashMap<T, usize> = HashMap::new();
    let mut origin = Vec::with_capacity(keys.len());
    for (s, t) in &keys {
        let next = tags.len();
        let k = *tag_index.entry(t.clone()).or_insert_with(|| {
            tags.push(t.clone());
            next
        });
        origin.push((*s, k));
    }
    let names = keys.iter().enumerate().map(|(i, (s, _))| format!("{}#{i}", mdp.state_name(*s))).collect();
    Some(((WeightedMdp::from_parts(mdp.dims(), names, actions), origin, 0), tags))
}

fn r(n: i64) -> Rational {
    Rational::from_integer(n)
}

/// Every end component inside `mec`, by enumerating action subsets.
fn sub_end_components(mdp: &WeightedMdp, mec: &EndComponent) -> Option<Vec<EndComponent>> {
    let sizes: Vec<usize> = mec.states.iter().map(|s| mec.actions[s].len()).collect();
    let total: u64 = sizes.iter().try_fold(1u64, |acc, k| acc.checked_mul(1u64 << k))?;
    if total > ENUMERATION_LIMIT {
        return None;
    }
    let mut out = Vec::new();
    for code in 1..total {
        let mut c = code;
        let mut actions = std::collections::BTreeMap::new();
        let mut states = Vec::new();
        for (j, s) in mec.states.iter().enumerate() {
            let m = c % (1u64 << sizes[j]);
            c /= 1u64 << sizes[j];
            if m != 0 {
                let acts: Vec<ActionIdx> =
                    mec.actions[s].iter().enumerate().filter(|(b, _)| m >> b & 1 == 1).map(|(_, a)| *a).collect();
                states.push(*s);
                actions.insert(*s, acts);
            }
        }
        let ec = EndComponent { states, actions };
        if is_end_component(mdp, &ec) {
            out.push(ec);
        }
    }
    Some(out)
}

/// Mean-payoff vectors of the recurrent classes of all pure memoryless
/// strategies that stay in `mec`.
fn recurrent_averages(mdp: &WeightedMdp, mec: &EndComponent) -> Result<Option<Vec<Vec<Rational>>>> {
    let k = mec.states.len();
    let sizes: Vec<u64> = mec.states.iter().map(|s| mec.actions[s].len() as u64).collect();
    let Some(total) = sizes.iter().try_fold(1u64, |acc, x| acc.checked_mul(*x)) else {
        return Ok(None);
    };
    if total > ENUMERATION_LIMIT {
        return Ok(None);
    }
    let pos = |t: StateId| mec.states.binary_search(&t).expect("closed component");
    let mut out: Vec<Vec<Rational>> = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut chosen = Vec::with_capacity(k);
        for (j, s) in mec.states.iter().enumerate() {
            chosen.push(mec.actions[s][(c % sizes[j]) as usize]);
            c /= sizes[j];
        }
        let rows: Vec<Vec<(usize, Rational)>> = mec
            .states
            .iter()
            .zip(&chosen)
            .map(|(s, a)| mdp.action(*s, *a).successors.iter().map(|(t, p)| (pos(*t), p.clone())).collect())
            .collect();
        for class in bottom_sccs(&rows) {
            let pi = stationary_distribution(&rows, &class)?;
            let avg: Vec<Rational> = (0..mdp.dims())
                .map(|d| {
                    class
                        .iter()
                        .zip(&pi)
                        .map(|(j, p)| p * r(mdp.action(mec.states[*j], chosen[*j]).weight(d)))
                        .sum()
                })
                .collect();
            if !out.contains(&avg) {
                out.push(avg);
            }
        }
    }
    Ok(Some(out))
}

/// Is `target` dominated by a convex combination of at most two points?
/// Exact for targets of dimension at most two.
fn dominated_by_hull(points: &[Vec<Rational>], target: &[Rational]) -> bool {
    let dominates = |p: &[Rational]| p.iter().zip(target).all(|(x, v)| x >= v);
    if points.iter().any(|p| dominates(p)) {
        return true;
    }
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            // t·p + (1−t)·q ≥ target  ⇔  t·(p_k − q_k) ≥ target_k − q_k
            let mut lo = r(0);
            let mut hi = r(1);
            for k in 0..target.len() {
                let a = &p[k] - &q[k];
                let b = &target[k] - &q[k];
                if a.is_zero() {
                    if b.is_positive() {
                        lo = r(2);
                    }
                } else if a.is_positive() {
                    lo = lo.max(&b / &a);
                } else {
                    hi = hi.min(&b / &a);
                }
            }
            if lo <= hi {
                return true;
            }
        }
    }
    false
}

fn project(points: &[Vec<Rational>], dims: &[usize]) -> Vec<Vec<Rational>> {
    points.iter().map(|p| dims.iter().map(|d| p[*d].clone()).collect()).collect()
}

/// Constraint subsets (bitmasks) that can be met almost surely by staying
/// in `mec`, given what the product tags already decide.
struct MecAnalysis<'a> {
    product: &'a WeightedMdp,
    constraints: &'a [PercentileConstraint],
}

impl MecAnalysis<'_> {
    fn subsets(&self) -> impl Iterator<Item = u32> {
        0..(1u32 << self.constraints.len())
    }

    fn members(&self, set: u32) -> impl Iterator<Item = usize> + '_ {
        (0..self.constraints.len()).filter(move |i| set >> i & 1 == 1)
    }

    /// `decided(i)` is `Some(ok)` for constraints fixed by the tag.
    fn regular(&self, mec: &EndComponent, decided: impl Fn(usize) -> Option<bool>) -> Option<Vec<u32>> {
        let subs = sub_end_components(self.product, mec)?;
        let lim_ok: Vec<u32> = subs
            .iter()
            .map(|ec| {
                let mut bits = 0u32;
                for (i, c) in self.constraints.iter().enumerate() {
                    let mut ws = ec.state_actions().map(|(s, a)| r(self.product.action(s, a).weight(c.dim)));
                    let ok = match c.kind {
                        PayoffKind::LimInf => ws.all(|w| w >= c.value),
                        PayoffKind::LimSup => ws.any(|w| w >= c.value),
                        _ => false,
                    };
                    if ok {
                        bits |= 1 << i;
                    }
                }
                bits
            })
            .collect();
        let good = self
            .subsets()
            .filter(|set| {
                let mut need = 0u32;
                for i in self.members(*set) {
                    match decided(i) {
                        Some(false) => return false,
                        Some(true) => {}
                        None => need |= 1 << i,
                    }
                }
                need == 0 || lim_ok.iter().any(|b| b & need == need)
            })
            .collect();
        Some(good)
    }

    fn mean_payoff(&self, mec: &EndComponent, inf: bool) -> Result<Option<Vec<u32>>> {
        let Some(points) = recurrent_averages(self.product, mec)? else {
            return Ok(None);
        };
        let good = self
            .subsets()
            .filter(|set| {
                let idx: Vec<usize> = self.members(*set).collect();
                if inf {
                    let dims: Vec<usize> = idx.iter().map(|i| self.constraints[*i].dim).collect();
                    let target: Vec<Rational> = idx.iter().map(|i| self.constraints[*i].value.clone()).collect();
                    dominated_by_hull(&project(&points, &dims), &target)
                } else {
                    // separate sup conditions can be served in turn
                    idx.iter().all(|i| {
                        let c = &self.constraints[*i];
                        points.iter().any(|p| p[c.dim] >= c.value)
                    })
                }
            })
            .collect();
        Ok(Some(good))
    }
}

#[derive(Debug, Clone)]
enum Choice {
    Move(Vec<(usize, Rational)>),
    Stop(u32),
}

/// Product MDP with maximal end components collapsed to single nodes that
/// may stop and claim a jointly achievable constraint set. It has no end
/// components, so every policy stops with probability one.
struct Quotient {
    choices: Vec<Vec<Choice>>,
    init: usize,
    q: usize,
}

impl Quotient {
    fn build(product: &WeightedMdp, init: StateId, dec: &MecDecomposition, good: &[Vec<u32>], q: usize) -> Self {
        let n = product.num_states();
        let mut node = vec![0usize; n];
        let mut count = 0;
        let mut mec_node = vec![usize::MAX; dec.len()];
        for s in 0..n {
            node[s] = match dec.membership[s] {
                Some(k) => {
                    if mec_node[k] == usize::MAX {
                        mec_node[k] = count;
                        count += 1;
                    }
                    mec_node[k]
                }
                None => {
                    count += 1;
                    count - 1
                }
            };
        }
        let collect = |act: &Action, skip: Option<usize>| -> Vec<(usize, Rational)> {
            let mut m: Vec<(usize, Rational)> = Vec::new();
            for (t, p) in &act.successors {
                let v = node[*t];
                if Some(v) == skip {
                    continue;
                }
                match m.iter_mut().find(|(u, _)| *u == v) {
                    Some(e) => e.1 += p,
                    None => m.push((v, p.clone())),
                }
            }
            if skip.is_some() {
                let mass: Rational = m.iter().map(|(_, p)| p).sum();
                for e in &mut m {
                    e.1 = &e.1 / &mass;
                }
            }
            m
        };
        let mut choices: Vec<Vec<Choice>> = vec![Vec::new(); count];
        for s in 0..n {
            match dec.membership[s] {
                None => {
                    choices[node[s]] = product.actions(s).iter().map(|a| Choice::Move(collect(a, None))).collect();
                }
                Some(k) => {
                    let mec = &dec.mecs[k];
                    for (a, act) in product.actions(s).iter().enumerate() {
                        if !mec.actions[&s].contains(&a) {
                            choices[node[s]].push(Choice::Move(collect(act, Some(node[s]))));
                        }
                    }
                }
            }
        }
        for (k, v) in mec_node.iter().enumerate() {
            for set in &good[k] {
                choices[*v].push(Choice::Stop(*set));
            }
        }
        Quotient { choices, init: node[init], q }
    }

    fn len(&self) -> usize {
        self.choices.len()
    }

    /// Per constraint, the probability of stopping with it claimed.
    fn evaluate(&self, policy: &[usize]) -> Result<Vec<Vec<Rational>>> {
        let end = self.len();
        (0..self.q)
            .map(|i| {
                let mut edges: Vec<Vec<FlaggedEdge>> = policy
                    .iter()
                    .enumerate()
                    .map(|(v, c)| match &self.choices[v][*c] {
                        Choice::Move(d) => d.iter().map(|(u, p)| (*u, p.clone(), false)).collect(),
                        Choice::Stop(set) => vec![(end, r(1), set >> i & 1 == 1)],
                    })
                    .collect();
                edges.push(vec![(end, r(1), false)]);
                hit_probabilities(&edges, &vec![false; end + 1])
            })
            .collect()
    }

    fn q_value(&self, w: &[Rational], value: &[Rational], c: &Choice) -> Rational {
        match c {
            Choice::Move(d) => d.iter().map(|(u, p)| p * &value[*u]).sum(),
            Choice::Stop(set) => (0..self.q).filter(|i| set >> i & 1 == 1).map(|i| w[i].clone()).sum(),
        }
    }

    fn weighted(&self, w: &[Rational], x: &[Vec<Rational>]) -> Vec<Rational> {
        (0..self.len()).map(|v| (0..self.q).map(|i| &w[i] * &x[i][v]).sum()).collect()
    }

    /// Policy iteration for `max w·x`, switching only on strict gains.
    fn optimize(&self, w: &[Rational], allowed: &[Vec<bool>], policy: &mut [usize]) -> Result<Vec<Vec<Rational>>> {
        loop {
            let x = self.evaluate(policy)?;
            let value = self.weighted(w, &x);
            let mut changed = false;
            for v in 0..self.len() {
                let mut best = self.q_value(w, &value, &self.choices[v][policy[v]]);
                for (c, ch) in self.choices[v].iter().enumerate() {
                    if !allowed[v][c] {
                        continue;
                    }
                    let qv = self.q_value(w, &value, ch);
                    if qv > best {
                        best = qv;
                        policy[v] = c;
                        changed = true;
                    }
                }
            }
            if !changed {
                return Ok(x);
            }
        }
    }

    fn start_policy(&self) -> Vec<usize> {
        vec![0; self.len()]
    }

    fn all_allowed(&self) -> Vec<Vec<bool>> {
        self.choices.iter().map(|c| vec![true; c.len()]).collect()
    }

    fn point(&self, x: &[Vec<Rational>]) -> Vec<Rational> {
        x.iter().map(|xi| xi[self.init].clone()).collect()
    }

    /// Lexicographic maximum: axis `first`, then the remaining axis.
    fn extreme(&self, first: usize) -> Result<Vec<Rational>> {
        let mut policy = self.start_policy();
        let mut w = vec![r(0); self.q];
        w[first] = r(1);
        let x = self.optimize(&w, &self.all_allowed(), &mut policy)?;
        if self.q == 1 {
            return Ok(self.point(&x));
        }
        let value = x[first].clone();
        let allowed: Vec<Vec<bool>> = self
            .choices
            .iter()
            .enumerate()
            .map(|(v, cs)| cs.iter().map(|c| self.q_value(&w, &value, c) == value[v]).collect())
            .collect();
        let mut w2 = vec![r(0); self.q];
        w2[1 - first] = r(1);
        let x = self.optimize(&w2, &allowed, &mut policy)?;
        Ok(self.point(&x))
    }

    fn max_weighted(&self, w: &[Rational]) -> Result<Vec<Rational>> {
        let mut policy = self.start_policy();
        let x = self.optimize(w, &self.all_allowed(), &mut policy)?;
        Ok(self.point(&x))
    }

    /// Vertices of the upper-right frontier, ordered by decreasing first
    /// coordinate.
    fn frontier(&self) -> Result<Vec<Vec<Rational>>> {
        let a = self.extreme(0)?;
        if self.q == 1 {
            return Ok(vec![a]);
        }
        let b = self.extreme(1)?;
        let mut out = vec![a.clone()];
        if a != b {
            self.refine(&a, &b, &mut out)?;
            out.push(b);
        }
        Ok(out)
    }

    fn refine(&self, a: &[Rational], b: &[Rational], out: &mut Vec<Vec<Rational>>) -> Result<()> {
        let w = vec![&b[1] - &a[1], &a[0] - &b[0]];
        let c = self.max_weighted(&w)?;
        let dot = |p: &[Rational]| &w[0] * &p[0] + &w[1] * &p[1];
        if dot(&c) > dot(a) {
            self.refine(a, &c, out)?;
            out.push(c.clone());
            self.refine(&c, b, out)?;
        }
        Ok(())
    }
}

fn monitor_tag(cs: &[PercentileConstraint], tag: &[bool], w: &[i64]) -> Vec<bool> {
    cs.iter()
        .zip(tag)
        .map(|(c, f)| {
            *f || match c.kind {
                PayoffKind::Sup => r(w[c.dim]) >= c.value,
                PayoffKind::Inf => r(w[c.dim]) < c.value,
                _ => false,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Status {
    Pending(i64),
    Met,
    Missed,
}

/// Exhaustive answer for conjunctive queries of one payoff family with at
/// most two constraints of positive probability. Discounted sums, negative
/// truncated-sum weights and instances past the enumeration caps come back
/// inconclusive.
pub fn brute_force_oracle(
    mdp: &WeightedMdp,
    init: StateId,
    constraints: &[PercentileConstraint],
) -> Result<OracleAnswer> {
    for c in constraints {
        c.validate(mdp)?;
    }
    let cs: Vec<PercentileConstraint> = constraints.iter().filter(|c| !c.prob.is_zero()).cloned().collect();
    let q = cs.len();
    let done = |verdict, witness| OracleAnswer { verdict, witness, frontier: Vec::new(), product_states: 0, reason: None };
    if q == 0 {
        return Ok(done(OracleVerdict::Yes, Some(WitnessKind::Pure)));
    }
    if q > 2 {
        return Ok(OracleAnswer::inconclusive("more than two constraints"));
    }
    let family = match check_family(&cs) {
        Ok(f) => f.expect("nonempty"),
        Err(_) => return Ok(OracleAnswer::inconclusive("mixed payoff families")),
    };
    let (product, goods) = match family {
        Family::DiscountedSum => return Ok(OracleAnswer::inconclusive("discounted sum")),
        Family::Regular => {
            let Some(((pm, origin, p0), tags)) =
                build_product(mdp, init, vec![false; q], |tag, s, a, _| monitor_tag(&cs, tag, &mdp.action(s, a).weights))
            else {
                return Ok(OracleAnswer::inconclusive("product too large"));
            };
            let dec = max_end_components(&pm);
            let an = MecAnalysis { product: &pm, constraints: &cs };
            let mut goods = Vec::new();
            for mec in &dec.mecs {
                let flags = &tags[origin[mec.states[0]].1];
                let decided = |i: usize| match cs[i].kind {
                    PayoffKind::Sup => Some(flags[i]),
                    PayoffKind::Inf => Some(!flags[i]),
                    _ => None,
                };
                match an.regular(mec, decided) {
                    Some(g) => goods.push(g),
                    None => return Ok(OracleAnswer::inconclusive("end component too large")),
                }
            }
            ((pm, p0, dec), goods)
        }
        Family::MpSup | Family::MpInf => {
            let Some(((pm, _, p0), _)) = build_product(mdp, init, (), |_, _, _, _| ()) else {
                return Ok(OracleAnswer::inconclusive("model too large"));
            };
            let dec = max_end_components(&pm);
            let an = MecAnalysis { product: &pm, constraints: &cs };
            let mut goods = Vec::new();
            for mec in &dec.mecs {
                match an.mean_payoff(mec, family == Family::MpInf)? {
                    Some(g) => goods.push(g),
                    None => return Ok(OracleAnswer::inconclusive("end component too large")),
                }
            }
            ((pm, p0, dec), goods)
        }
        Family::TruncatedSum => {
            if mdp.has_negative_weight().is_some() {
                return Ok(OracleAnswer::inconclusive("negative weights"));
            }
            let n = mdp.num_states();
            let targets: Vec<_> = cs.iter().map(|c| c.target_set(n)).collect();
            let mut bounds = Vec::new();
            for c in &cs {
                let Some(b) = c.value.floor_i64() else {
                    return Ok(OracleAnswer::inconclusive("threshold too large"));
                };
                bounds.push(b);
            }
            let arrive = |i: usize, sum: i64, t: StateId| {
                if !targets[i].contains(t) {
                    Status::Pending(sum.min(bounds[i].max(-1) + 1))
                } else if sum <= bounds[i] {
                    Status::Met
                } else {
                    Status::Missed
                }
            };
            let start: Vec<Status> = (0..q).map(|i| arrive(i, 0, init)).collect();
            let Some(((pm, origin, p0), tags)) = build_product(mdp, init, start, |tag, s, a, t| {
                tag.iter()
                    .enumerate()
                    .map(|(i, st)| match st {
                        Status::Pending(sum) => arrive(i, sum + mdp.action(s, a).weight(cs[i].dim), t),
                        x => *x,
                    })
                    .collect()
            }) else {
                return Ok(OracleAnswer::inconclusive("product too large"));
            };
            let dec = max_end_components(&pm);
            let goods = dec
                .mecs
                .iter()
                .map(|mec| {
                    let st = &tags[origin[mec.states[0]].1];
                    let met: u32 = (0..q).filter(|i| st[*i] == Status::Met).map(|i| 1u32 << i).sum();
                    (0..1u32 << q).filter(|set| set & met == *set).collect()
                })
                .collect();
            ((pm, p0, dec), goods)
        }
    };
    let (pm, p0, dec) = product;
    let quotient = Quotient::build(&pm, p0, &dec, &goods, q);
    let frontier = quotient.frontier()?;
    let alpha: Vec<Rational> = cs.iter().map(|c| c.prob.clone()).collect();
    let pure = frontier.iter().any(|p| p.iter().zip(&alpha).all(|(x, a)| x >= a));
    let (verdict, witness) = if pure {
        (OracleVerdict::Yes, Some(WitnessKind::Pure))
    } else if dominated_by_hull(&frontier, &alpha) {
        (OracleVerdict::Yes, Some(WitnessKind::Randomized))
    } else {
        (OracleVerdict::No, None)
    };
    Ok(OracleAnswer { verdict, witness, frontier, product_states: pm.num_states(), reason: None })
}

fn meets_all(mdp: &WeightedMdp, init: StateId, policy: &Memoryless, cs: &[PercentileConstraint]) -> Result<bool> {
    let st = MooreStrategy::from_policy(mdp, policy, init)?;
    let chain = induced_chain(mdp, &st, init)?;
    for c in cs {
        if !exact_constraint_probability(mdp, &chain, c)?.certifies(&c.prob) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// First pure memoryless strategy meeting every constraint, checked exactly
/// on its induced chain.
pub fn pure_memoryless_witness(
    mdp: &WeightedMdp,
    init: StateId,
    constraints: &[PercentileConstraint],
) -> Result<Option<Memoryless>> {
    grid_memoryless_witness(mdp, init, constraints, 1)
}

/// First memoryless strategy whose action probabilities are multiples of
/// `1/resolution` and which meets every constraint exactly.
pub fn grid_memoryless_witness(
    mdp: &WeightedMdp,
    init: StateId,
    constraints: &[PercentileConstraint],
    resolution: u32,
) -> Result<Option<Memoryless>> {
    if resolution == 0 {
        return Err(Error::InvalidQuery("grid resolution must be positive".into()));
    }
    let per_state: Vec<Vec<Vec<(ActionIdx, Rational)>>> =
        mdp.states().map(|s| grid_distributions(mdp.num_actions(s), resolution)).collect();
    let mut total: u64 = 1;
    for d in &per_state {
        total = total.saturating_mul(d.len() as u64);
    }
    if total > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(format!("{total} memoryless strategies on the grid")));
    }
    for code in 0..total {
        let mut c = code;
        let choice = per_state
            .iter()
            .map(|ds| {
                let d = ds[(c % ds.len() as u64) as usize].clone();
                c /= ds.len() as u64;
                d
            })
            .collect();
        let policy = Memoryless { choice };
        if meets_all(mdp, init, &policy, constraints)? {
            return Ok(Some(policy));
        }
    }
    Ok(None)
}

/// Distributions over `k` actions with weights in multiples of `1/res`.
fn grid_distributions(k: usize, res: u32) -> Vec<Vec<(ActionIdx, Rational)>> {
    fn go(k: usize, left: u32, res: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<(ActionIdx, Rational)>>) {
        if cur.len() + 1 == k {
            cur.push(left);
            out.push(
                cur.iter()
                    .enumerate()
                    .filter(|(_, n)| **n > 0)
                    .map(|(a, n)| (a, Rational::new(*n as i64, res as i64)))
                    .collect(),
            );
            cur.pop();
            return;
        }
        for n in 0..=left {
            cur.push(n);
            go(k, left - n, res, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(k, res, res, &mut Vec::new(), &mut out);
    out
}
