//! Product MDPs and the policies that transfer strategies from a product back
//! to the underlying MDP.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::model::{Action, ActionIdx, StateId, WeightedMdp};
use crate::rational::Rational;
use crate::strategy::{dirac, Dist, Memoryless, Policy};

/// MDP whose states track an original state plus a memory tag.
///
/// Actions `0..k` of a product state mirror the `k` actions of its origin in
/// the same order; any further actions are construction-specific (switch
/// actions) and never played in the original MDP. Auxiliary states such as
/// proxies or sinks carry `origin = None`.
#[derive(Debug, Clone)]
pub struct Product {
    pub mdp: WeightedMdp,
    pub origin: Vec<Option<StateId>>,
    pub tag: Vec<usize>,
    pub init: StateId,
    /// Product states where the construction stops tracking (made
    /// absorbing); from there on any behaviour is acceptable.
    pub frozen: Vec<bool>,
    index: HashMap<(StateId, usize), StateId>,
}

impl Product {
    pub fn new(
        mdp: WeightedMdp,
        origin: Vec<Option<StateId>>,
        tag: Vec<usize>,
        init: StateId,
        frozen: Vec<bool>,
    ) -> Self {
        let mut index = HashMap::new();
        for (p, o) in origin.iter().enumerate() {
            if let Some(s) = o {
                index.insert((*s, tag[p]), p);
            }
        }
        Product { mdp, origin, tag, init, frozen, index }
    }

    /// Identity product (tag 0 everywhere) over `mdp`, possibly extended by
    /// auxiliary states beyond `original_states`.
    pub fn identity(mdp: WeightedMdp, original_states: usize, init: StateId) -> Self {
        let n = mdp.num_states();
        let origin = (0..n).map(|p| if p < original_states { Some(p) } else { None }).collect();
        Product::new(mdp, origin, vec![0; n], init, vec![false; n])
    }

    pub fn lookup(&self, s: StateId, tag: usize) -> Option<StateId> {
        self.index.get(&(s, tag)).copied()
    }

    /// Product successor of `p` under mirrored action `a` when the original
    /// MDP moves to `next`.
    pub fn step(&self, p: StateId, a: ActionIdx, next: StateId) -> Option<StateId> {
        self.mdp
            .action(p, a)
            .successors
            .iter()
            .map(|(q, _)| *q)
            .find(|q| self.origin[*q] == Some(next))
    }

    pub fn num_states(&self) -> usize {
        self.mdp.num_states()
    }
}

/// Breadth-first product of `mdp` with a tag that evolves along actions:
/// taking `a` in `s` under tag `x` moves every successor to tag
/// `step(s, a, x)`. States with `freeze(s, x)` get a single zero-weight
/// self-loop and are marked frozen. Returns the product and the tag values
/// (the product tag of a state indexes this list).
pub fn explore_product<T: Clone + Eq + Hash>(
    mdp: &WeightedMdp,
    init: StateId,
    init_tag: T,
    step: impl Fn(StateId, ActionIdx, &T) -> T,
    freeze: impl Fn(StateId, &T) -> bool,
    label: impl Fn(&T) -> String,
    limit: usize,
) -> Result<(Product, Vec<T>)> {
    let mut tags: Vec<T> = Vec::new();
    let mut tag_id: HashMap<T, usize> = HashMap::new();
    let mut intern = |x: T, tags: &mut Vec<T>| -> usize {
        *tag_id.entry(x.clone()).or_insert_with(|| {
            tags.push(x);
            tags.len() - 1
        })
    };
    let mut index: HashMap<(StateId, usize), StateId> = HashMap::new();
    let mut keys: Vec<(StateId, usize)> = Vec::new();
    let t0 = intern(init_tag, &mut tags);
    index.insert((init, t0), 0);
    keys.push((init, t0));
    let mut actions: Vec<Vec<Action>> = Vec::new();
    let mut frozen = Vec::new();
    let mut p = 0;
    while p < keys.len() {
        let (s, x) = keys[p];
        if keys.len() > limit {
            return Err(Error::TooLarge(format!("product exceeds {limit} states")));
        }
        if freeze(s, &tags[x]) {
            actions.push(vec![Action {
                name: "stay".into(),
                weights: vec![0; mdp.dims()],
                successors: vec![(p, Rational::one())],
            }]);
            frozen.push(true);
            p += 1;
            continue;
        }
        let mut acts = Vec::with_capacity(mdp.num_actions(s));
        for (a, act) in mdp.actions(s).iter().enumerate() {
            let y = step(s, a, &tags[x]);
            let y = intern(y, &mut tags);
            let mut succ: Vec<(StateId, Rational)> = act
                .successors
                .iter()
                .map(|(t, pr)| {
                    let j = *index.entry((*t, y)).or_insert_with(|| {
                        keys.push((*t, y));
                        keys.len() - 1
                    });
                    (j, pr.clone())
                })
                .collect();
            succ.sort_by_key(|(j, _)| *j);
            acts.push(Action { name: act.name.clone(), weights: act.weights.clone(), successors: succ });
        }
        actions.push(acts);
        frozen.push(false);
        p += 1;
    }
    let names = keys.iter().map(|(s, x)| format!("{}#{}", mdp.state_name(*s), label(&tags[*x]))).collect();
    let origin = keys.iter().map(|(s, _)| Some(*s)).collect();
    let tag = keys.iter().map(|(_, x)| *x).collect();
    let product = Product::new(WeightedMdp::from_parts(mdp.dims(), names, actions), origin, tag, 0, frozen);
    Ok((product, tags))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LiftMem<M> {
    In(usize, M),
    /// Tracking stopped at a frozen product state; play the first action.
    Tail,
}

/// A policy on a product, read as a policy on the original MDP.
#[derive(Debug, Clone)]
pub struct ProductLift<P: Policy> {
    pub product: Product,
    pub inner: P,
}

impl<P: Policy> ProductLift<P> {
    fn enter(&self, p: StateId, d: Dist<P::Mem>) -> Dist<LiftMem<P::Mem>> {
        if self.product.frozen[p] {
            return dirac(LiftMem::Tail);
        }
        d.into_iter().map(|(m, x)| (LiftMem::In(self.product.tag[p], m), x)).collect()
    }
}

impl<P: Policy> Policy for ProductLift<P> {
    type Mem = LiftMem<P::Mem>;

    fn initial(&self, _s: StateId) -> Dist<Self::Mem> {
        let p = self.product.init;
        self.enter(p, self.inner.initial(p))
    }

    fn act(&self, s: StateId, m: &Self::Mem) -> Dist<ActionIdx> {
        match m {
            LiftMem::Tail => dirac(0),
            LiftMem::In(tag, im) => {
                let p = self.product.lookup(s, *tag).expect("product state for lifted memory");
                self.inner.act(p, im)
            }
        }
    }

    fn update(&self, m: &Self::Mem, s: StateId, a: ActionIdx, next: StateId) -> Dist<Self::Mem> {
        match m {
            LiftMem::Tail => dirac(LiftMem::Tail),
            LiftMem::In(tag, im) => {
                let p = self.product.lookup(s, *tag).expect("product state for lifted memory");
                match self.product.step(p, a, next) {
                    Some(q) => {
                        let d = self.inner.update(im, p, a, q);
                        if self.product.frozen[q] {
                            dirac(LiftMem::Tail)
                        } else {
                            d.into_iter()
                                .map(|(m2, x)| (LiftMem::In(self.product.tag[q], m2), x))
                                .collect()
                        }
                    }
                    None => dirac(LiftMem::Tail),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Reach,
    Sub(usize),
}

/// Reach phase from a memoryless strategy on an MDP extended with switch
/// actions, followed by a committed sub-strategy once a switch action fires.
///
/// The switch is decided on arrival in a state: with the probability the
/// reach strategy puts on switch actions there, the play commits to a
/// sub-strategy (chosen by the switch action's distribution); otherwise it
/// plays the reach strategy conditioned on not switching. The resulting
/// distribution over runs is the same as playing the switch action.
#[derive(Debug, Clone)]
pub struct TwoPhase {
    pub reach: Memoryless,
    /// Number of ordinary (mirrored) actions per state; higher indices are
    /// switch actions.
    pub base_actions: Vec<usize>,
    /// Sub-strategy distribution for each switch action `(s, a)`.
    pub switches: HashMap<(StateId, ActionIdx), Dist<usize>>,
    pub subs: Vec<Memoryless>,
}

impl TwoPhase {
    /// Phase distribution on arrival in `s` during the reach phase.
    pub fn arrival(&self, s: StateId) -> Dist<Phase> {
        let mut out: Vec<(Phase, Rational)> = Vec::new();
        let mut stay = Rational::one();
        for (a, p) in self.reach.dist(s) {
            if a < self.base_actions[s] || p.is_zero() {
                continue;
            }
            stay -= &p;
            let subs = self.switches.get(&(s, a)).expect("switch action without sub-strategy");
            for (k, q) in subs {
                let w = &p * q;
                if w.is_zero() {
                    continue;
                }
                match out.iter_mut().find(|(ph, _)| *ph == Phase::Sub(*k)) {
                    Some(e) => e.1 += w,
                    None => out.push((Phase::Sub(*k), w)),
                }
            }
        }
        if stay.is_positive() {
            out.insert(0, (Phase::Reach, stay));
        }
        out
    }
}

impl Policy for TwoPhase {
    type Mem = Phase;

    fn initial(&self, s: StateId) -> Dist<Phase> {
        self.arrival(s)
    }

    fn act(&self, s: StateId, m: &Phase) -> Dist<ActionIdx> {
        match m {
            Phase::Sub(k) => self.subs[*k].dist(s),
            Phase::Reach => {
                let base: Vec<(ActionIdx, Rational)> = self
                    .reach
                    .dist(s)
                    .into_iter()
                    .filter(|(a, p)| *a < self.base_actions[s] && !p.is_zero())
                    .collect();
                let total: Rational = base.iter().map(|(_, p)| p).sum();
                if total.is_zero() {
                    dirac(0)
                } else {
                    base.into_iter().map(|(a, p)| (a, p / &total)).collect()
                }
            }
        }
    }

    fn update(&self, m: &Phase, _s: StateId, _a: ActionIdx, next: StateId) -> Dist<Phase> {
        match m {
            Phase::Sub(k) => dirac(Phase::Sub(*k)),
            Phase::Reach => self.arrival(next),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::contract_mecs;
    use crate::rational::rat;
    use crate::strategy::{policy_chain, uniform};

    #[test]
    fn two_phase_switch_on_arrival_matches_switch_action() {
        // s↔t: reach strategy takes a* at s with probability 1/2, else goes to t,
        // where it always takes a*.
        let st = fixtures::s_t_mp();
        let c = contract_mecs(&st);
        let mut choice = vec![Vec::new(); c.mdp.num_states()];
        choice[0] = vec![(2, rat(1, 2)), (1, rat(1, 2))];
        choice[1] = dirac(2);
        let mut switches = HashMap::new();
        switches.insert((0, 2), dirac(0));
        switches.insert((1, 2), dirac(1));
        let tp = TwoPhase {
            reach: Memoryless { choice },
            base_actions: vec![2, 2, 1],
            switches,
            subs: vec![Memoryless { choice: vec![dirac(0), dirac(0)] }, Memoryless { choice: vec![dirac(1), dirac(1)] }],
        };
        let chain = policy_chain(&st, &tp, 0).unwrap();
        // initial commitment: Reach w.p. 1/2, Sub(0) w.p. 1/2
        let total: Rational = chain.initial.iter().map(|(_, p)| p).sum();
        assert_eq!(total, Rational::one());
        assert_eq!(chain.initial.len(), 2);
        for row in chain.rows() {
            assert_eq!(row.iter().map(|(_, p)| p).sum::<Rational>(), Rational::one());
        }
        let _ = uniform(&[0]);
    }

    #[test]
    fn identity_product_lift_is_transparent() {
        let m = fixtures::randomness_lemma();
        let prod = Product::identity(m.clone(), m.num_states(), 0);
        let inner = Memoryless { choice: vec![dirac(1), dirac(0), dirac(0)] };
        let lift = ProductLift { product: prod, inner };
        let chain = policy_chain(&m, &lift, 0).unwrap();
        assert_eq!(chain.len(), 2);
        assert_eq!(chain.nodes[1].0, 2);
    }
}
