//! Small MDP families used in tests, examples and the acceptance suite.

use crate::model::{MdpBuilder, StateId, StateSet, WeightedMdp};
use crate::rational::{rat, Rational};

/// `s0 -a-> s1`, `s0 -b-> s2`, absorbing loops. Action `a` and the `s1`
/// loop weigh (1,0); `b` and the `s2` loop weigh (0,1). Every payoff gives
/// (1,0) on the `a` run and (0,1) on the `b` run, so satisfying both
/// coordinates with probability 1/2 needs a randomized first move.
pub fn randomness_lemma() -> WeightedMdp {
    let mut b = MdpBuilder::new(2);
    let s = b.add_states(&["s0", "s1", "s2"]);
    b.add_edge(s[0], "a", &[1, 0], s[1]);
    b.add_edge(s[0], "b", &[0, 1], s[2]);
    b.add_edge(s[1], "a", &[1, 0], s[1]);
    b.add_edge(s[2], "b", &[0, 1], s[2]);
    b.build().expect("valid fixture")
}

/// Two states with self-loops of weight (1,0) on `s` and (0,1) on `t`, and
/// zero-weight moves between them. State 0 is `s`, state 1 is `t`; action 0
/// is the loop and action 1 the move.
pub fn s_t_mp() -> WeightedMdp {
    let mut b = MdpBuilder::new(2);
    let s = b.add_state("s");
    let t = b.add_state("t");
    b.add_edge(s, "loop", &[1, 0], s);
    b.add_edge(s, "go", &[0, 0], t);
    b.add_edge(t, "loop", &[0, 1], t);
    b.add_edge(t, "go", &[0, 0], s);
    b.build().expect("valid fixture")
}

/// One state with loops `a` of weight (0,0) and `b` of weight (1,−1).
pub fn one_state_ab() -> WeightedMdp {
    let mut b = MdpBuilder::new(2);
    let s = b.add_state("s");
    b.add_edge(s, "a", &[0, 0], s);
    b.add_edge(s, "b", &[1, -1], s);
    b.build().expect("valid fixture")
}

/// Nested targets needing linear memory. State 0 is `s`, states `1..=n`
/// are `t_1..t_n`, state `n+1` is the sink. Action `a_i` (index `i-1`) moves
/// from `s` to `t_i` with probability `i/(i+1)` and to the sink otherwise;
/// `t_i` returns to `s` for `i > 1` and `t_1` goes to the sink.
pub struct NestedFixture {
    pub mdp: WeightedMdp,
    /// `T_i = {t_1..t_i}`.
    pub targets: Vec<StateSet>,
    /// Largest thresholds achievable together.
    pub thresholds: Vec<Rational>,
}

pub fn nested_linear_memory(n: usize) -> NestedFixture {
    assert!(n >= 1);
    let mut b = MdpBuilder::new(1);
    let s = b.add_state("s");
    let ts: Vec<StateId> = (1..=n).map(|i| b.add_state(format!("t{i}"))).collect();
    let sink = b.add_state("sink");
    for i in 1..=n {
        let i64_ = i as i64;
        b.add_action(
            s,
            format!("a{i}"),
            &[0],
            &[(ts[i - 1], rat(i64_, i64_ + 1)), (sink, rat(1, i64_ + 1))],
        );
    }
    for i in 1..=n {
        let to = if i == 1 { sink } else { s };
        b.add_edge(ts[i - 1], "back", &[0], to);
    }
    b.add_edge(sink, "loop", &[0], sink);
    let mdp = b.build().expect("valid fixture");
    let total = mdp.num_states();
    let targets = (1..=n).map(|i| StateSet::from_states(total, ts[..i].iter().copied())).collect();
    let mut thresholds = vec![Rational::zero(); n];
    thresholds[n - 1] = Rational::one() - rat(1, n as i64 + 1);
    for i in (1..n).rev() {
        thresholds[i - 1] = &thresholds[i] * (Rational::one() - rat(1, i as i64 + 1));
    }
    NestedFixture { mdp, targets, thresholds }
}

/// `k` fair coin gadgets followed by `k` controlled gadgets; target pairs
/// `{s_i,L, s'_i,L}` and `{s_i,R, s'_i,R}`. Visiting all `2k` targets almost
/// surely requires remembering every coin outcome.
pub struct ExpMemoryFixture {
    pub mdp: WeightedMdp,
    pub targets: Vec<StateSet>,
    /// States `s'_1..s'_k` where the choices are made.
    pub choice_states: Vec<StateId>,
}

pub fn exp_memory(k: usize) -> ExpMemoryFixture {
    assert!(k >= 1);
    let mut b = MdpBuilder::new(1);
    let coin: Vec<StateId> = (1..=k).map(|i| b.add_state(format!("s{i}"))).collect();
    let coin_l: Vec<StateId> = (1..=k).map(|i| b.add_state(format!("s{i}L"))).collect();
    let coin_r: Vec<StateId> = (1..=k).map(|i| b.add_state(format!("s{i}R"))).collect();
    let pick: Vec<StateId> = (1..=k).map(|i| b.add_state(format!("p{i}"))).collect();
    let pick_l: Vec<StateId> = (1..=k).map(|i| b.add_state(format!("p{i}L"))).collect();
    let pick_r: Vec<StateId> = (1..=k).map(|i| b.add_state(format!("p{i}R"))).collect();
    for i in 0..k {
        b.add_action(coin[i], "flip", &[0], &[(coin_l[i], rat(1, 2)), (coin_r[i], rat(1, 2))]);
        let after = if i + 1 < k { coin[i + 1] } else { pick[0] };
        b.add_edge(coin_l[i], "next", &[0], after);
        b.add_edge(coin_r[i], "next", &[0], after);
        b.add_edge(pick[i], "L", &[0], pick_l[i]);
        b.add_edge(pick[i], "R", &[0], pick_r[i]);
        if i + 1 < k {
            b.add_edge(pick_l[i], "next", &[0], pick[i + 1]);
            b.add_edge(pick_r[i], "next", &[0], pick[i + 1]);
        } else {
            b.add_edge(pick_l[i], "loop", &[0], pick_l[i]);
            b.add_edge(pick_r[i], "loop", &[0], pick_r[i]);
        }
    }
    let mdp = b.build().expect("valid fixture");
    let n = mdp.num_states();
    let mut targets = Vec::new();
    for i in 0..k {
        targets.push(StateSet::from_states(n, [coin_l[i], pick_l[i]]));
        targets.push(StateSet::from_states(n, [coin_r[i], pick_r[i]]));
    }
    ExpMemoryFixture { mdp, targets, choice_states: pick }
}

/// `s` with one action splitting 50/50 into a weight-1 and a weight-3 path
/// to the target `t`. States: s, m1, m3, t.
pub fn sp_two_branch() -> WeightedMdp {
    let mut b = MdpBuilder::new(1);
    let s = b.add_states(&["s", "m1", "m3", "t"]);
    b.add_action(s[0], "go", &[0], &[(s[1], rat(1, 2)), (s[2], rat(1, 2))]);
    b.add_edge(s[1], "cheap", &[1], s[3]);
    b.add_edge(s[2], "costly", &[3], s[3]);
    b.add_edge(s[3], "done", &[0], s[3]);
    b.build().expect("valid fixture")
}

/// Shortest-path trade-off: from `s`, the `fast` route reaches `t` with
/// cost 1 w.p. 1/2 and cost 6 otherwise; the `safe` route always costs 4.
pub fn sp_tradeoff() -> WeightedMdp {
    let mut b = MdpBuilder::new(1);
    let s = b.add_states(&["s", "lucky", "unlucky", "t"]);
    b.add_action(s[0], "fast", &[0], &[(s[1], rat(1, 2)), (s[2], rat(1, 2))]);
    b.add_edge(s[0], "safe", &[4], s[3]);
    b.add_edge(s[1], "go", &[1], s[3]);
    b.add_edge(s[2], "go", &[6], s[3]);
    b.add_edge(s[3], "done", &[0], s[3]);
    b.build().expect("valid fixture")
}
