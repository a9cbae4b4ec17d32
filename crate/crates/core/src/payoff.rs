//! Payoff values of finite run prefixes.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::{RunPrefix, WeightedMdp};
use crate::query::{PayoffKind, PercentileConstraint};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrefixValue {
    Finite(Rational),
    PlusInfinity,
    MinusInfinity,
}

impl PrefixValue {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            PrefixValue::Finite(r) => Some(r),
            _ => None,
        }
    }

    pub fn cmp_rational(&self, v: &Rational) -> Ordering {
        match self {
            PrefixValue::Finite(r) => r.cmp(v),
            PrefixValue::PlusInfinity => Ordering::Greater,
            PrefixValue::MinusInfinity => Ordering::Less,
        }
    }
}

/// Value of the constraint's payoff on `prefix`.
///
/// Limit payoffs have no prefix semantics; for them the minimum (liminf) or
/// maximum (limsup) over the second half of the prefix is returned as an
/// estimate of the tail behaviour.
pub fn prefix_payoff(
    mdp: &WeightedMdp,
    prefix: &RunPrefix,
    constraint: &PercentileConstraint,
) -> Result<PrefixValue> {
    let l = constraint.dim;
    let w: Vec<i64> = prefix.weights(mdp).map(|v| v[l]).collect();
    let n = w.len();
    Ok(match constraint.kind {
        PayoffKind::Inf => w.iter().min().map_or(PrefixValue::PlusInfinity, |m| fin(*m)),
        PayoffKind::Sup => w.iter().max().map_or(PrefixValue::MinusInfinity, |m| fin(*m)),
        PayoffKind::LimInf => {
            w[n / 2..].iter().min().map_or(PrefixValue::PlusInfinity, |m| fin(*m))
        }
        PayoffKind::LimSup => {
            w[n / 2..].iter().max().map_or(PrefixValue::MinusInfinity, |m| fin(*m))
        }
        PayoffKind::MpSup | PayoffKind::MpInf => {
            if n == 0 {
                return Err(Error::UndefinedAverage);
            }
            let total: i64 = w.iter().sum();
            PrefixValue::Finite(Rational::new(total, n as i64))
        }
        PayoffKind::TruncatedSum => {
            let target = constraint.target_set(mdp.num_states());
            match prefix.states.iter().position(|s| target.contains(*s)) {
                Some(k) => fin(w[..k].iter().sum()),
                None => PrefixValue::PlusInfinity,
            }
        }
        PayoffKind::DiscountedSum => {
            let lambda = constraint
                .discount
                .clone()
                .ok_or_else(|| Error::InvalidQuery("missing discount factor".into()))?;
            let mut acc = Rational::zero();
            let mut pow = lambda.clone();
            for x in &w {
                acc += &pow * Rational::from_integer(*x);
                pow = &pow * &lambda;
            }
            PrefixValue::Finite(acc)
        }
    })
}

fn fin(x: i64) -> PrefixValue {
    PrefixValue::Finite(Rational::from_integer(x))
}

/// Whether a payoff value meets the constraint's inner inequality
/// (`≤ v` for truncated sums, `≥ v` otherwise).
pub fn meets(value: &PrefixValue, constraint: &PercentileConstraint) -> bool {
    let ord = value.cmp_rational(&constraint.value);
    match constraint.kind {
        PayoffKind::TruncatedSum => ord != Ordering::Greater,
        _ => ord != Ordering::Less,
    }
}

/// `W·λ^n/(1−λ)`: how far any extension of an `n`-step prefix can move a
/// discounted sum.
pub fn discounted_tail_bound(w_max: i64, lambda: &Rational, n: usize) -> Rational {
    Rational::from_integer(w_max) * lambda.pow(n as u32) / (Rational::one() - lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MdpBuilder;
    use crate::rational::rat;
    use proptest::prelude::*;

    fn line(weights: &[i64]) -> (WeightedMdp, RunPrefix) {
        let mut b = MdpBuilder::new(1);
        let states: Vec<_> = (0..=weights.len()).map(|i| b.add_state(format!("s{i}"))).collect();
        for (i, w) in weights.iter().enumerate() {
            b.add_edge(states[i], "a", &[*w], states[i + 1]);
        }
        let last = *states.last().unwrap();
        b.add_edge(last, "loop", &[0], last);
        let mdp = b.build().unwrap();
        let mut r = RunPrefix::start(0);
        for i in 0..weights.len() {
            r.push(0, i + 1);
        }
        (mdp, r)
    }

    fn c(kind: PayoffKind) -> PercentileConstraint {
        PercentileConstraint::new(kind, 0, rat(0, 1), rat(1, 1))
    }

    #[test]
    fn sup_of_prefix() {
        let (m, r) = line(&[3, 1, 5]);
        assert_eq!(prefix_payoff(&m, &r, &c(PayoffKind::Sup)).unwrap(), fin(5));
        assert_eq!(prefix_payoff(&m, &r, &c(PayoffKind::Inf)).unwrap(), fin(1));
        assert_eq!(
            prefix_payoff(&m, &r, &c(PayoffKind::MpInf)).unwrap(),
            PrefixValue::Finite(rat(3, 1))
        );
    }

    #[test]
    fn truncated_sum_stops_at_first_visit() {
        let (m, r) = line(&[2, 4, 7]);
        let ts = c(PayoffKind::TruncatedSum).with_target(vec![2]);
        assert_eq!(prefix_payoff(&m, &r, &ts).unwrap(), fin(6));
        let never = c(PayoffKind::TruncatedSum).with_target(vec![3]);
        let mut short = r.clone();
        short.states.truncate(3);
        short.actions.truncate(2);
        assert_eq!(prefix_payoff(&m, &short, &never).unwrap(), PrefixValue::PlusInfinity);
    }

    #[test]
    fn discounted_sum_weights_first_action_by_lambda() {
        let (m, r) = line(&[1, 1, 1]);
        let ds = c(PayoffKind::DiscountedSum).with_discount(rat(1, 2));
        assert_eq!(prefix_payoff(&m, &r, &ds).unwrap(), PrefixValue::Finite(rat(7, 8)));
    }

    #[test]
    fn empty_average_is_an_error() {
        let (m, _) = line(&[1]);
        let r = RunPrefix::start(0);
        assert_eq!(prefix_payoff(&m, &r, &c(PayoffKind::MpSup)), Err(Error::UndefinedAverage));
    }

    proptest! {
        #[test]
        fn discounted_extension_stays_within_tail(ws in prop::collection::vec(-4i64..=4, 1..12), cut in 0usize..12, num in 1i64..4) {
            let lambda = rat(num, 4);
            let (m, r) = line(&ws);
            let cut = cut.min(ws.len());
            let mut pre = r.clone();
            pre.states.truncate(cut + 1);
            pre.actions.truncate(cut);
            let ds = c(PayoffKind::DiscountedSum).with_discount(lambda.clone());
            let full = prefix_payoff(&m, &r, &ds).unwrap().finite().unwrap().clone();
            let part = prefix_payoff(&m, &pre, &ds).unwrap().finite().unwrap().clone();
            let bound = discounted_tail_bound(m.max_abs_weight(), &lambda, cut);
            prop_assert!((full - part).abs() <= bound);
        }

        #[test]
        fn truncated_sum_monotone_then_constant(ws in prop::collection::vec(0i64..=3, 1..10), hit in 0usize..10) {
            let (m, r) = line(&ws);
            let hit = hit.min(ws.len());
            let ts = c(PayoffKind::TruncatedSum).with_target(vec![hit]);
            let mut last: Option<PrefixValue> = None;
            for k in 0..=ws.len() {
                let mut p = r.clone();
                p.states.truncate(k + 1);
                p.actions.truncate(k);
                let v = prefix_payoff(&m, &p, &ts).unwrap();
                if k >= hit {
                    let expect: i64 = ws[..hit].iter().sum();
                    prop_assert_eq!(&v, &fin(expect));
                } else {
                    prop_assert_eq!(&v, &PrefixValue::PlusInfinity);
                }
                if let (Some(PrefixValue::Finite(a)), PrefixValue::Finite(b)) = (&last, &v) {
                    prop_assert!(a <= b);
                }
                last = Some(v);
            }
        }
    }
}
