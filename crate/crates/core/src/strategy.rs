//! Finite-memory randomized strategies and the Markov chains they induce.
//!
//! Solvers describe strategies through the [`Policy`] trait with whatever
//! memory type is natural for them; [`MooreStrategy::from_policy`] explores
//! the reachable part and produces an indexed Moore machine.
//!
//! Memory updates see the current state, the action taken and the successor
//! state, and may be randomized. Deterministic updates that ignore the
//! successor are the special case used in textbook presentations.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Debug;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::meanpayoff::SwitchingStrategy;
use crate::lift::Phase;
use crate::model::{ActionIdx, StateId, WeightedMdp};
use crate::rational::Rational;

pub type MemId = usize;
pub type Dist<T> = Vec<(T, Rational)>;

/// Upper bound on explored (state, memory) pairs.
pub const MAX_CHAIN_STATES: usize = 2_000_000;

pub trait Policy {
    type Mem: Clone + Eq + Hash + Debug;

    /// Memory distribution when the play starts in `s`.
    fn initial(&self, s: StateId) -> Dist<Self::Mem>;
    /// Action distribution at `(s, m)`.
    fn act(&self, s: StateId, m: &Self::Mem) -> Dist<ActionIdx>;
    /// Memory distribution after taking `a` in `s` and landing in `next`.
    fn update(&self, m: &Self::Mem, s: StateId, a: ActionIdx, next: StateId) -> Dist<Self::Mem>;
}

/// Point distribution.
pub fn dirac<T>(x: T) -> Dist<T> {
    vec![(x, Rational::one())]
}

/// Uniform distribution over `items` (must be nonempty).
pub fn uniform<T: Clone>(items: &[T]) -> Dist<T> {
    let p = Rational::new(1, items.len() as i64);
    items.iter().map(|x| (x.clone(), p.clone())).collect()
}

/// Memoryless randomized strategy; states with an empty distribution play
/// their first action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Memoryless {
    pub choice: Vec<Dist<ActionIdx>>,
}

impl Memoryless {
    pub fn first_action(n: usize) -> Self {
        Memoryless { choice: vec![Vec::new(); n] }
    }

    pub fn dist(&self, s: StateId) -> Dist<ActionIdx> {
        if self.choice[s].is_empty() {
            dirac(0)
        } else {
            self.choice[s].clone()
        }
    }
}

impl Policy for Memoryless {
    type Mem = ();

    fn initial(&self, _s: StateId) -> Dist<()> {
        dirac(())
    }

    fn act(&self, s: StateId, _m: &()) -> Dist<ActionIdx> {
        self.dist(s)
    }

    fn update(&self, _m: &(), _s: StateId, _a: ActionIdx, _n: StateId) -> Dist<()> {
        dirac(())
    }
}

/// Indexed Moore machine restricted to the pairs reachable from `init`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MooreStrategy {
    pub init: StateId,
    /// Human-readable label per memory element.
    pub memory: Vec<String>,
    pub initial: Dist<MemId>,
    pub next: BTreeMap<(StateId, MemId), Dist<ActionIdx>>,
    pub update: BTreeMap<(MemId, StateId, ActionIdx, StateId), Dist<MemId>>,
}

impl Policy for MooreStrategy {
    type Mem = MemId;

    fn initial(&self, _s: StateId) -> Dist<MemId> {
        self.initial.clone()
    }

    fn act(&self, s: StateId, m: &MemId) -> Dist<ActionIdx> {
        self.next.get(&(s, *m)).cloned().unwrap_or_default()
    }

    fn update(&self, m: &MemId, s: StateId, a: ActionIdx, n: StateId) -> Dist<MemId> {
        self.update.get(&(*m, s, a, n)).cloned().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainEdge {
    pub action: ActionIdx,
    pub target: usize,
    pub prob: Rational,
}

/// Markov chain over reachable (state, memory) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InducedChain {
    pub nodes: Vec<(StateId, MemId)>,
    pub initial: Dist<usize>,
    pub edges: Vec<Vec<ChainEdge>>,
}

impl InducedChain {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Transition rows with parallel edges merged.
    pub fn rows(&self) -> Vec<Vec<(usize, Rational)>> {
        self.edges
            .iter()
            .map(|es| {
                let mut m: BTreeMap<usize, Rational> = BTreeMap::new();
                for e in es {
                    *m.entry(e.target).or_insert_with(Rational::zero) += &e.prob;
                }
                m.into_iter().collect()
            })
            .collect()
    }
}

struct Explored<M> {
    mems: Vec<M>,
    nodes: Vec<(StateId, usize)>,
    initial: Dist<usize>,
    edges: Vec<Vec<ChainEdge>>,
    next: BTreeMap<(StateId, MemId), Dist<ActionIdx>>,
    update: BTreeMap<(MemId, StateId, ActionIdx, StateId), Dist<MemId>>,
}

fn check_dist<T>(d: &Dist<T>, what: &str) -> Result<()> {
    let total: Rational = d.iter().map(|(_, p)| p).sum();
    if d.is_empty() || !total.is_one() || d.iter().any(|(_, p)| p.is_negative()) {
        return Err(Error::InvalidStrategy(format!("{what} is not a distribution (sum {total})")));
    }
    Ok(())
}

fn explore<P: Policy>(mdp: &WeightedMdp, policy: &P, init: StateId) -> Result<Explored<P::Mem>> {
    let mut mem_index: HashMap<P::Mem, MemId> = HashMap::new();
    let mut mems: Vec<P::Mem> = Vec::new();
    let mut node_index: HashMap<(StateId, MemId), usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut queue = VecDeque::new();
    let mut intern_mem = |m: P::Mem, mems: &mut Vec<P::Mem>| -> MemId {
        *mem_index.entry(m.clone()).or_insert_with(|| {
            mems.push(m);
            mems.len() - 1
        })
    };
    let mut intern_node = |key: (StateId, MemId),
                           nodes: &mut Vec<(StateId, MemId)>,
                           queue: &mut VecDeque<usize>|
     -> Result<usize> {
        if let Some(i) = node_index.get(&key) {
            return Ok(*i);
        }
        if nodes.len() >= MAX_CHAIN_STATES {
            return Err(Error::TooLarge(format!("more than {MAX_CHAIN_STATES} chain states")));
        }
        nodes.push(key);
        node_index.insert(key, nodes.len() - 1);
        queue.push_back(nodes.len() - 1);
        Ok(nodes.len() - 1)
    };

    let init_dist = policy.initial(init);
    check_dist(&init_dist, "initial memory")?;
    let mut initial = Vec::new();
    for (m, p) in init_dist {
        if p.is_zero() {
            continue;
        }
        let mid = intern_mem(m, &mut mems);
        let nid = intern_node((init, mid), &mut nodes, &mut queue)?;
        initial.push((nid, p));
    }
    let mut edges: Vec<Vec<ChainEdge>> = Vec::new();
    let mut next = BTreeMap::new();
    let mut update = BTreeMap::new();
    while let Some(i) = queue.pop_front() {
        let (s, mid) = nodes[i];
        let m = mems[mid].clone();
        let dist = policy.act(s, &m);
        check_dist(&dist, &format!("action choice at ({}, {:?})", mdp.state_name(s), m))?;
        let mut out = Vec::new();
        let mut kept = Vec::new();
        for (a, pa) in dist {
            if pa.is_zero() {
                continue;
            }
            if a >= mdp.num_actions(s) {
                return Err(Error::InvalidStrategy(format!(
                    "action {a} not available in state {}",
                    mdp.state_name(s)
                )));
            }
            kept.push((a, pa.clone()));
            for (t, pt) in &mdp.action(s, a).successors {
                let key = (mid, s, a, *t);
                let upd = if let Some(u) = update.get(&key) {
                    u
                } else {
                    let raw = policy.update(&m, s, a, *t);
                    check_dist(&raw, &format!("memory update at ({}, {:?})", mdp.state_name(s), m))?;
                    let mut u = Vec::new();
                    for (m2, pm) in raw {
                        if !pm.is_zero() {
                            u.push((intern_mem(m2, &mut mems), pm));
                        }
                    }
                    update.insert(key, u);
                    update.get(&key).expect("just inserted")
                };
                for (m2, pm) in upd.clone() {
                    let j = intern_node((*t, m2), &mut nodes, &mut queue)?;
                    out.push(ChainEdge { action: a, target: j, prob: &pa * pt * &pm });
                }
            }
        }
        next.insert((s, mid), kept);
        if edges.len() <= i {
            edges.resize_with(i + 1, Vec::new);
        }
        edges[i] = out;
    }
    edges.resize_with(nodes.len(), Vec::new);
    Ok(Explored { mems, nodes, initial, edges, next, update })
}

impl MooreStrategy {
    /// Materializes the reachable part of `policy` from `init`.
    pub fn from_policy<P: Policy>(mdp: &WeightedMdp, policy: &P, init: StateId) -> Result<Self> {
        let ex = explore(mdp, policy, init)?;
        let initial = ex
            .initial
            .iter()
            .map(|(nid, p)| (ex.nodes[*nid].1, p.clone()))
            .collect();
        Ok(MooreStrategy {
            init,
            memory: ex.mems.iter().map(|m| format!("{m:?}")).collect(),
            initial,
            next: ex.next,
            update: ex.update,
        })
    }

    pub fn memory_size(&self) -> usize {
        self.memory.len()
    }

    pub fn is_memoryless(&self) -> bool {
        self.memory.len() == 1
    }

    /// Checks action supports, distribution sums and totality of the update
    /// on every reachable triple.
    pub fn validate(&self, mdp: &WeightedMdp) -> Result<()> {
        induced_chain(mdp, self, self.init).map(|_| ())
    }

    /// Coarsest partition of memory elements that agree on every defined
    /// action choice and whose updates agree up to the partition.
    pub fn memory_classes(&self) -> Vec<usize> {
        let n = self.memory.len();
        let mut class = vec![0usize; n];
        let mut count = 0;
        let mut by_mem_next: Vec<Vec<(StateId, &Dist<ActionIdx>)>> = vec![Vec::new(); n];
        for ((s, m), d) in &self.next {
            by_mem_next[*m].push((*s, d));
        }
        let mut by_mem_upd: Vec<Vec<((StateId, ActionIdx, StateId), &Dist<MemId>)>> = vec![Vec::new(); n];
        for ((m, s, a, t), d) in &self.update {
            by_mem_upd[*m].push(((*s, *a, *t), d));
        }
        loop {
            let mut sigs: HashMap<(usize, String), usize> = HashMap::new();
            let mut new_class = vec![0usize; n];
            for m in 0..n {
                let mut sig = format!("{:?}", by_mem_next[m]);
                for (key, d) in &by_mem_upd[m] {
                    let mut agg: BTreeMap<usize, Rational> = BTreeMap::new();
                    for (m2, p) in d.iter() {
                        *agg.entry(class[*m2]).or_insert_with(Rational::zero) += p;
                    }
                    sig.push_str(&format!("|{key:?}{agg:?}"));
                }
                let next_id = sigs.len();
                new_class[m] = *sigs.entry((class[m], sig)).or_insert(next_id);
            }
            let new_count = sigs.len();
            class = new_class;
            if new_count == count {
                return class;
            }
            count = new_count;
        }
    }

    /// Number of memory elements after merging behaviourally equal ones.
    pub fn minimized_memory_size(&self) -> usize {
        let c = self.memory_classes();
        let mut v = c.clone();
        v.sort_unstable();
        v.dedup();
        v.len()
    }

    /// Number of distinct memory classes that can accompany state `s`.
    pub fn classes_at(&self, s: StateId) -> usize {
        let c = self.memory_classes();
        let mut v: Vec<usize> = self.next.keys().filter(|(t, _)| *t == s).map(|(_, m)| c[*m]).collect();
        v.sort_unstable();
        v.dedup();
        v.len()
    }

    /// The memoryless strategy this Moore machine reduces to, if any.
    pub fn as_memoryless(&self, n: usize) -> Option<Memoryless> {
        if !self.is_memoryless() {
            return None;
        }
        let mut choice = vec![Vec::new(); n];
        for ((s, _), d) in &self.next {
            choice[*s] = d.clone();
        }
        Some(Memoryless { choice })
    }
}

/// Markov chain induced by a finite strategy from `init`.
pub fn induced_chain(mdp: &WeightedMdp, strategy: &MooreStrategy, init: StateId) -> Result<InducedChain> {
    let ex = explore(mdp, strategy, init)?;
    let nodes = ex.nodes.iter().map(|(s, m)| (*s, ex.mems[*m])).collect();
    Ok(InducedChain { nodes, initial: ex.initial, edges: ex.edges })
}

/// Chain of an arbitrary policy, without building the Moore machine first.
pub fn policy_chain<P: Policy>(mdp: &WeightedMdp, policy: &P, init: StateId) -> Result<InducedChain> {
    let ex = explore(mdp, policy, init)?;
    Ok(InducedChain { nodes: ex.nodes, initial: ex.initial, edges: ex.edges })
}

/// Strategy object returned by solvers.
#[derive(Debug, Clone)]
pub enum Strategy {
    Finite(MooreStrategy),
    /// Infinite-memory strategy: a finite reach phase handing over to
    /// switching schedules inside end components.
    Switching(SwitchingStrategy),
}

impl Strategy {
    pub fn as_finite(&self) -> Option<&MooreStrategy> {
        match self {
            Strategy::Finite(m) => Some(m),
            Strategy::Switching(_) => None,
        }
    }

    pub fn induced_chain(&self, mdp: &WeightedMdp, init: StateId) -> Result<InducedChain> {
        match self {
            Strategy::Finite(m) => induced_chain(mdp, m, init),
            Strategy::Switching(_) => Err(Error::NotChainRepresentable(
                "infinite-memory switching schedule".into(),
            )),
        }
    }
}

/// Memory of a [`Strategy`] used as a policy.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StrategyMem {
    Finite(MemId),
    Switching(Phase, u64),
}

impl Policy for Strategy {
    type Mem = StrategyMem;

    fn initial(&self, s: StateId) -> Dist<StrategyMem> {
        match self {
            Strategy::Finite(m) => m.initial(s).into_iter().map(|(x, p)| (StrategyMem::Finite(x), p)).collect(),
            Strategy::Switching(w) => {
                w.initial(s).into_iter().map(|((ph, k), p)| (StrategyMem::Switching(ph, k), p)).collect()
            }
        }
    }

    fn act(&self, s: StateId, m: &StrategyMem) -> Dist<ActionIdx> {
        match (self, m) {
            (Strategy::Finite(f), StrategyMem::Finite(x)) => f.act(s, x),
            (Strategy::Switching(w), StrategyMem::Switching(ph, k)) => w.act(s, &(*ph, *k)),
            _ => Vec::new(),
        }
    }

    fn update(&self, m: &StrategyMem, s: StateId, a: ActionIdx, next: StateId) -> Dist<StrategyMem> {
        match (self, m) {
            (Strategy::Finite(f), StrategyMem::Finite(x)) => {
                f.update(x, s, a, next).into_iter().map(|(y, p)| (StrategyMem::Finite(y), p)).collect()
            }
            (Strategy::Switching(w), StrategyMem::Switching(ph, k)) => w
                .update(&(*ph, *k), s, a, next)
                .into_iter()
                .map(|((ph2, k2), p)| (StrategyMem::Switching(ph2, k2), p))
                .collect(),
            _ => Vec::new(),
        }
    }
}
