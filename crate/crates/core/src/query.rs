//! Percentile constraints and queries.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{StateId, StateSet, WeightedMdp};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffKind {
    Inf,
    Sup,
    #[serde(rename = "liminf")]
    LimInf,
    #[serde(rename = "limsup")]
    LimSup,
    MpSup,
    MpInf,
    TruncatedSum,
    DiscountedSum,
}

impl PayoffKind {
    pub const ALL: [PayoffKind; 8] = [
        PayoffKind::Inf,
        PayoffKind::Sup,
        PayoffKind::LimInf,
        PayoffKind::LimSup,
        PayoffKind::MpSup,
        PayoffKind::MpInf,
        PayoffKind::TruncatedSum,
        PayoffKind::DiscountedSum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PayoffKind::Inf => "inf",
            PayoffKind::Sup => "sup",
            PayoffKind::LimInf => "liminf",
            PayoffKind::LimSup => "limsup",
            PayoffKind::MpSup => "mp_sup",
            PayoffKind::MpInf => "mp_inf",
            PayoffKind::TruncatedSum => "truncated_sum",
            PayoffKind::DiscountedSum => "discounted_sum",
        }
    }

    pub fn family(self) -> Family {
        match self {
            PayoffKind::Inf | PayoffKind::Sup | PayoffKind::LimInf | PayoffKind::LimSup => {
                Family::Regular
            }
            PayoffKind::MpSup => Family::MpSup,
            PayoffKind::MpInf => Family::MpInf,
            PayoffKind::TruncatedSum => Family::TruncatedSum,
            PayoffKind::DiscountedSum => Family::DiscountedSum,
        }
    }

    pub fn is_prefix_independent(self) -> bool {
        matches!(
            self,
            PayoffKind::LimInf | PayoffKind::LimSup | PayoffKind::MpSup | PayoffKind::MpInf
        )
    }
}

impl fmt::Display for PayoffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PayoffKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PayoffKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidQuery(format!("unknown payoff kind `{s}`")))
    }
}

/// Groups of payoff kinds handled by one solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Regular,
    MpSup,
    MpInf,
    TruncatedSum,
    DiscountedSum,
}

/// `P[f_dim ≥ value] ≥ prob`, except for truncated sums where the inner
/// inequality is `TS ≤ value`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PercentileConstraint {
    pub kind: PayoffKind,
    /// Zero-based dimension.
    pub dim: usize,
    pub value: Rational,
    pub prob: Rational,
    pub target: Option<Vec<StateId>>,
    pub discount: Option<Rational>,
}

impl PercentileConstraint {
    pub fn new(kind: PayoffKind, dim: usize, value: Rational, prob: Rational) -> Self {
        PercentileConstraint { kind, dim, value, prob, target: None, discount: None }
    }

    pub fn with_target(mut self, target: Vec<StateId>) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_discount(mut self, lambda: Rational) -> Self {
        self.discount = Some(lambda);
        self
    }

    pub fn target_set(&self, n: usize) -> StateSet {
        StateSet::from_states(n, self.target.iter().flatten().copied())
    }

    pub fn validate(&self, mdp: &WeightedMdp) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidQuery(m));
        if self.dim >= mdp.dims() {
            return bad(format!("dimension {} out of range (model has {})", self.dim + 1, mdp.dims()));
        }
        if self.prob.is_negative() || self.prob > Rational::one() {
            return bad(format!("probability threshold {} outside [0,1]", self.prob));
        }
        match self.kind {
            PayoffKind::TruncatedSum => match &self.target {
                None => return bad("truncated_sum constraint needs a target set".into()),
                Some(t) if t.is_empty() => return bad("target set must be nonempty".into()),
                Some(t) if t.iter().any(|s| *s >= mdp.num_states()) => {
                    return bad("target state out of range".into())
                }
                _ => {}
            },
            _ if self.target.is_some() => {
                return bad(format!("target set only applies to truncated_sum, not {}", self.kind))
            }
            _ => {}
        }
        match (self.kind, &self.discount) {
            (PayoffKind::DiscountedSum, None) => {
                return bad("discounted_sum constraint needs a discount factor".into())
            }
            (PayoffKind::DiscountedSum, Some(l)) => {
                if !l.is_positive() || *l >= Rational::one() {
                    return bad(format!("discount factor {l} must lie strictly between 0 and 1"));
                }
            }
            (_, Some(_)) => {
                return bad(format!("discount factor only applies to discounted_sum, not {}", self.kind))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Disjunction of conjunctions of percentile constraints from one initial state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PercentileQuery {
    pub init: StateId,
    pub disjuncts: Vec<Vec<PercentileConstraint>>,
}

impl PercentileQuery {
    pub fn conjunction(init: StateId, constraints: Vec<PercentileConstraint>) -> Self {
        PercentileQuery { init, disjuncts: vec![constraints] }
    }

    pub fn validate(&self, mdp: &WeightedMdp) -> Result<()> {
        if self.init >= mdp.num_states() {
            return Err(Error::InvalidQuery("initial state out of range".into()));
        }
        for block in &self.disjuncts {
            for c in block {
                c.validate(mdp)?;
            }
            check_family(block)?;
        }
        Ok(())
    }
}

/// All constraints of one conjunction must go to the same solver.
pub fn check_family(block: &[PercentileConstraint]) -> Result<Option<Family>> {
    let mut fam = None;
    for c in block {
        let f = c.kind.family();
        match fam {
            None => fam = Some(f),
            Some(g) if g == f => {}
            Some(g) => {
                return Err(Error::InvalidQuery(format!(
                    "cannot mix payoff families {g:?} and {f:?} in one conjunction"
                )))
            }
        }
    }
    Ok(fam)
}

/// Targets and thresholds of a multiple reachability problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiReachQuery {
    pub targets: Vec<StateSet>,
    pub thresholds: Vec<Rational>,
}

impl MultiReachQuery {
    pub fn new(targets: Vec<StateSet>, thresholds: Vec<Rational>) -> Self {
        assert_eq!(targets.len(), thresholds.len());
        MultiReachQuery { targets, thresholds }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}
