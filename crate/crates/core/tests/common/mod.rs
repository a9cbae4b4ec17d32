//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use percentile_core::model::{MdpBuilder, StateId};
use percentile_core::{rat, PayoffKind, PercentileConstraint, Rational, WeightedMdp};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn r(n: i64) -> Rational {
    Rational::from_integer(n)
}

pub const DISTS: [&[(i64, i64)]; 4] = [&[(1, 1)], &[(1, 2), (1, 2)], &[(1, 3), (2, 3)], &[(1, 4), (3, 4)]];

/// Random MDP with `2..=max_states` states, `1..=max_actions` actions per
/// state, weights drawn from `weights`.
pub fn random_mdp(rng: &mut ChaCha8Rng, max_states: usize, max_actions: usize, dims: usize, weights: &[i64]) -> WeightedMdp {
    let n = rng.gen_range(2..=max_states);
    let mut b = MdpBuilder::new(dims);
    let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    for name in &names {
        b.add_state(name.clone());
    }
    for s in 0..n {
        let k = rng.gen_range(1..=max_actions);
        for a in 0..k {
            let d = DISTS.choose(rng).unwrap();
            let succ: Vec<(StateId, Rational)> =
                d.iter().map(|(p, q)| (rng.gen_range(0..n), rat(*p, *q))).collect();
            let w: Vec<i64> = (0..dims).map(|_| *weights.choose(rng).unwrap()).collect();
            b.add_action(s, format!("a{a}"), &w, &succ);
        }
    }
    b.build().expect("generated model is valid")
}

pub const ALPHAS: [(i64, i64); 7] = [(1, 4), (1, 3), (1, 2), (2, 3), (3, 4), (9, 10), (1, 1)];

pub fn random_alpha(rng: &mut ChaCha8Rng) -> Rational {
    let (p, q) = *ALPHAS.choose(rng).unwrap();
    rat(p, q)
}

/// Random constraint of `kind` on a model with `n` states and `dims`
/// dimensions.
pub fn random_constraint(rng: &mut ChaCha8Rng, kind: PayoffKind, n: usize, dims: usize) -> PercentileConstraint {
    let dim = rng.gen_range(0..dims);
    let alpha = random_alpha(rng);
    match kind {
        PayoffKind::TruncatedSum => {
            let mut target: Vec<StateId> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
            if target.is_empty() {
                target.push(rng.gen_range(0..n));
            }
            PercentileConstraint::new(kind, dim, r(rng.gen_range(0..=4)), alpha).with_target(target)
        }
        PayoffKind::DiscountedSum => {
            let v = rat(rng.gen_range(-4..=8), 4);
            PercentileConstraint::new(kind, dim, v, alpha).with_discount(rat(1, 2))
        }
        PayoffKind::MpInf | PayoffKind::MpSup => {
            let v = rat(rng.gen_range(0..=4), 2);
            PercentileConstraint::new(kind, dim, v, alpha)
        }
        _ => PercentileConstraint::new(kind, dim, r(rng.gen_range(0..=2)), alpha),
    }
}

/// Same constraint, strictly harder: larger α, or a stricter value.
pub fn tighten(c: &PercentileConstraint, raise_alpha: bool) -> Option<PercentileConstraint> {
    let mut t = c.clone();
    if raise_alpha {
        if c.prob >= r(1) {
            return None;
        }
        t.prob = (&c.prob + &rat(1, 10)).min(r(1));
    } else if c.kind == PayoffKind::TruncatedSum {
        t.value = &c.value - &r(1);
    } else {
        t.value = &c.value + &rat(1, 2);
    }
    Some(t)
}
