//! Query dispatch: each disjunct goes to the solver of its payoff family;
//! the first satisfiable disjunct answers the query.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::horizon::{ds_eps_gap_solve, sp_solve, GapVerdict};
use crate::lp::LinearProgram;
use crate::meanpayoff::{mp_inf_solve, mp_sup_solve};
use crate::model::{StateId, WeightedMdp};
use crate::query::{check_family, Family, PercentileConstraint, PercentileQuery};
use crate::rational::{rat, Rational};
use crate::reach::FlowSolution;
use crate::regular::solve_regular;
use crate::strategy::{Memoryless, MooreStrategy, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Yes,
    No,
    Unknown,
}

/// Schedule precision for MP-sup when the query gives no epsilon.
pub const DEFAULT_MP_SUP_EPS: (i64, i64) = (1, 10);

pub fn family_name(f: Family) -> &'static str {
    match f {
        Family::Regular => "regular",
        Family::MpSup => "mp_sup",
        Family::MpInf => "mp_inf",
        Family::TruncatedSum => "truncated_sum",
        Family::DiscountedSum => "discounted_sum",
    }
}

/// Positive flow value `y_{s,a}`; indices refer to the MDP the LP was built
/// on (a product or contraction of the input model).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowEntry {
    pub state: StateId,
    pub action: usize,
    pub value: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LambdaEntry {
    pub mec: usize,
    /// Zero-based constraint indices of the subset.
    pub subset: Vec<usize>,
    pub lambda: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapSummary {
    pub eps: Rational,
    pub horizon: usize,
    pub gamma: Rational,
    pub satisfiable_at: Option<Vec<Rational>>,
    pub unsatisfiable_at: Option<Vec<Rational>>,
    pub suggested_eps: Option<Rational>,
}

/// Machine-checkable evidence for a verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp: Option<LinearProgram>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<Rational>>,
    pub flow: Vec<FlowEntry>,
    pub lambdas: Vec<LambdaEntry>,
    pub product_states: usize,
    /// Per MEC, the switching schedule's first interval length.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub k0: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapSummary>,
}

impl Certificate {
    fn new(family: Family) -> Self {
        Certificate {
            family: family_name(family).into(),
            lp: None,
            point: None,
            flow: Vec::new(),
            lambdas: Vec::new(),
            product_states: 0,
            k0: Vec::new(),
            gap: None,
        }
    }

    fn with_flow(mut self, flow: &FlowSolution) -> Self {
        self.flow = flow
            .flow
            .iter()
            .map(|((s, a), v)| FlowEntry { state: *s, action: *a, value: v.clone() })
            .collect();
        self.lp = Some(flow.lp.clone());
        self.point = Some(flow.point.clone());
        self
    }

    fn with_lambdas(mut self, lambdas: &[(usize, u64, Rational)]) -> Self {
        self.lambdas = lambdas
            .iter()
            .map(|(k, set, l)| LambdaEntry {
                mec: *k,
                subset: (0..64).filter(|i| set >> i & 1 == 1).collect(),
                lambda: l.clone(),
            })
            .collect();
        self
    }

    /// Checks the recorded point against the recorded program exactly.
    pub fn revalidate(&self) -> bool {
        match (&self.lp, &self.point) {
            (Some(lp), Some(x)) => lp.satisfied_by(x),
            (None, None) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DisjunctOutcome {
    pub verdict: Verdict,
    pub family: Option<Family>,
    pub strategy: Option<Strategy>,
    pub certificate: Option<Certificate>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub verdict: Verdict,
    /// Index of the disjunct that answered Yes.
    pub witness: Option<usize>,
    pub disjuncts: Vec<DisjunctOutcome>,
}

impl SolveOutcome {
    pub fn strategy(&self) -> Option<&Strategy> {
        self.witness.and_then(|i| self.disjuncts[i].strategy.as_ref())
    }
}

fn finite(mdp: &WeightedMdp, policy: &impl crate::strategy::Policy, init: StateId) -> Result<Strategy> {
    Ok(Strategy::Finite(MooreStrategy::from_policy(mdp, policy, init)?))
}

/// Decides one conjunction. Constraints with `α = 0` hold trivially and
/// are dropped first.
pub fn solve_conjunction(
    mdp: &WeightedMdp,
    init: StateId,
    constraints: &[PercentileConstraint],
    eps: Option<&Rational>,
) -> Result<DisjunctOutcome> {
    for c in constraints {
        c.validate(mdp)?;
    }
    let family = check_family(constraints)?;
    let live: Vec<PercentileConstraint> = constraints.iter().filter(|c| c.prob.is_positive()).cloned().collect();
    let mut out = DisjunctOutcome { verdict: Verdict::No, family, strategy: None, certificate: None, diagnostics: Vec::new() };
    let Some(fam) = check_family(&live)? else {
        out.verdict = Verdict::Yes;
        out.strategy = Some(finite(mdp, &Memoryless::first_action(mdp.num_states()), init)?);
        out.diagnostics.push("every constraint has probability 0".into());
        return Ok(out);
    };
    let cert = Certificate::new(fam);
    match fam {
        Family::Regular => {
            if let Some(sol) = solve_regular(mdp, init, &live)? {
                let mut c = cert.with_lambdas(&sol.lambdas);
                if let Some(f) = &sol.flow {
                    c = c.with_flow(f);
                }
                c.product_states = sol.product_states;
                out.verdict = Verdict::Yes;
                out.strategy = Some(Strategy::Finite(sol.strategy));
                out.certificate = Some(c);
            }
        }
        Family::MpSup => {
            let default = rat(DEFAULT_MP_SUP_EPS.0, DEFAULT_MP_SUP_EPS.1);
            let eps = eps.filter(|e| e.is_positive()).unwrap_or(&default);
            if let Some(sol) = mp_sup_solve(mdp, init, &live, eps)? {
                let mut c = cert.with_flow(&sol.reach.flow);
                c.product_states = sol.reach.contraction.mdp.num_states();
                c.k0 = sol.strategy.mecs.iter().map(|m| m.k0.k0).collect();
                out.verdict = Verdict::Yes;
                let single = sol.strategy.mecs.iter().all(|m| m.rotation.windows(2).all(|w| w[0] == w[1]));
                out.strategy = Some(if single {
                    // one optimal strategy per MEC serves every dimension
                    let subs = sol
                        .strategy
                        .mecs
                        .iter()
                        .map(|m| m.rotation.first().cloned().unwrap_or_else(|| Memoryless::first_action(mdp.num_states())))
                        .collect();
                    finite(mdp, &sol.reach.two_phase(subs), init)?
                } else {
                    out.diagnostics.push(format!("switching schedule sized for epsilon {eps}"));
                    Strategy::Switching(sol.strategy)
                });
                out.certificate = Some(c);
            }
        }
        Family::MpInf => {
            let zero = Rational::zero();
            let eps = eps.unwrap_or(&zero);
            let res = mp_inf_solve(mdp, init, &live, eps)?;
            let mut c = cert;
            c.product_states = res.decomposition.contraction.mdp.num_states();
            if let Some(sol) = &res.decomposition.solution {
                c = c.with_flow(&sol.flow).with_lambdas(&sol.lambdas);
                out.verdict = Verdict::Yes;
                match &res.strategy {
                    Some(tp) => {
                        out.strategy = Some(finite(mdp, tp, init)?);
                        out.diagnostics.push(format!("witness meets every threshold minus epsilon {eps}"));
                    }
                    None => out
                        .diagnostics
                        .push("exact thresholds need infinite memory; give a positive epsilon for a finite witness".into()),
                }
            }
            out.certificate = Some(c);
        }
        Family::TruncatedSum => {
            if let Some(sol) = sp_solve(mdp, init, &live)? {
                let mut c = cert.with_flow(&sol.flow);
                c.product_states = sol.product_states;
                out.verdict = Verdict::Yes;
                out.strategy = Some(Strategy::Finite(sol.strategy));
                out.certificate = Some(c);
            }
        }
        Family::DiscountedSum => {
            let eps = eps.filter(|e| e.is_positive()).ok_or(Error::PreciseDiscountedSum)?;
            let rep = ds_eps_gap_solve(mdp, init, &live, eps)?;
            let mut c = cert;
            if let Some(f) = &rep.flow {
                c = c.with_flow(f);
            }
            c.product_states = rep.product_states;
            c.gap = Some(GapSummary {
                eps: rep.eps.clone(),
                horizon: rep.h,
                gamma: rep.gamma.clone(),
                satisfiable_at: rep.satisfiable_at.clone(),
                unsatisfiable_at: rep.unsatisfiable_at.clone(),
                suggested_eps: rep.suggested_eps.clone(),
            });
            out.verdict = match rep.verdict {
                GapVerdict::Yes => Verdict::Yes,
                GapVerdict::No => Verdict::No,
                GapVerdict::Unknown => Verdict::Unknown,
            };
            if let Some(e) = &rep.suggested_eps {
                out.diagnostics.push(format!("inside the gap; retry with epsilon {e}"));
            }
            out.strategy = rep.strategy.map(Strategy::Finite);
            out.certificate = Some(c);
        }
    }
    Ok(out)
}

/// Solves the disjuncts in order and stops at the first Yes. Otherwise the
/// answer is Unknown if some disjunct was Unknown, else No.
pub fn solve_query(mdp: &WeightedMdp, query: &PercentileQuery, eps: Option<&Rational>) -> Result<SolveOutcome> {
    query.validate(mdp)?;
    let mut disjuncts = Vec::new();
    for (i, block) in query.disjuncts.iter().enumerate() {
        let d = solve_conjunction(mdp, query.init, block, eps)?;
        let yes = d.verdict == Verdict::Yes;
        disjuncts.push(d);
        if yes {
            return Ok(SolveOutcome { verdict: Verdict::Yes, witness: Some(i), disjuncts });
        }
    }
    let verdict = if disjuncts.iter().any(|d| d.verdict == Verdict::Unknown) { Verdict::Unknown } else { Verdict::No };
    Ok(SolveOutcome { verdict, witness: None, disjuncts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::query::PayoffKind;
    use crate::sim::{exact_constraint_probability, exact_verify_finite};
    use crate::strategy::induced_chain;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    fn c(kind: PayoffKind, dim: usize, v: Rational, p: Rational) -> PercentileConstraint {
        PercentileConstraint::new(kind, dim, v, p)
    }

    #[test]
    fn limsup_on_two_states_is_memoryless() {
        let m = fixtures::s_t_mp();
        let q = vec![c(PayoffKind::LimSup, 0, r(1), r(1)), c(PayoffKind::LimSup, 1, r(1), r(1))];
        let out = solve_conjunction(&m, 0, &q, None).unwrap();
        assert_eq!(out.verdict, Verdict::Yes);
        let st = out.strategy.as_ref().unwrap().as_finite().unwrap();
        assert_eq!(st.minimized_memory_size(), 1);
        assert!(out.certificate.unwrap().revalidate());
    }

    #[test]
    fn boundary_discounted_query_is_unknown() {
        let m = fixtures::one_state_ab();
        let q = vec![c(PayoffKind::DiscountedSum, 0, r(1), r(1)).with_discount(rat(1, 2))];
        let out = solve_query(&m, &PercentileQuery::conjunction(0, q.clone()), Some(&rat(1, 8))).unwrap();
        assert_eq!(out.verdict, Verdict::Unknown);
        let gap = out.disjuncts[0].certificate.as_ref().unwrap().gap.clone().unwrap();
        assert_eq!(gap.suggested_eps, Some(rat(1, 16)));
        assert_eq!(solve_query(&m, &PercentileQuery::conjunction(0, q), None).unwrap_err(), Error::PreciseDiscountedSum);
    }

    #[test]
    fn second_disjunct_answers() {
        let m = fixtures::randomness_lemma();
        let impossible = vec![c(PayoffKind::Sup, 0, r(1), r(1)), c(PayoffKind::Sup, 1, r(1), r(1))];
        let trivial = vec![c(PayoffKind::Sup, 0, r(5), r(0))];
        let q = PercentileQuery { init: 0, disjuncts: vec![impossible, trivial] };
        let out = solve_query(&m, &q, None).unwrap();
        assert_eq!(out.verdict, Verdict::Yes);
        assert_eq!(out.witness, Some(1));
        assert_eq!(out.disjuncts[0].verdict, Verdict::No);
    }

    #[test]
    fn every_family_solves_the_lemma() {
        let m = fixtures::randomness_lemma();
        for kind in [PayoffKind::Inf, PayoffKind::Sup, PayoffKind::LimInf, PayoffKind::LimSup, PayoffKind::MpSup, PayoffKind::MpInf] {
            let q = vec![c(kind, 0, r(1), rat(1, 2)), c(kind, 1, r(1), rat(1, 2))];
            let out = solve_conjunction(&m, 0, &q, Some(&rat(1, 10))).unwrap();
            assert_eq!(out.verdict, Verdict::Yes, "{kind}");
            let st = out.strategy.unwrap();
            let chain = st.induced_chain(&m, 0).unwrap();
            for con in &q {
                let relaxed = if kind == PayoffKind::MpInf {
                    c(kind, con.dim, &con.value - &rat(1, 10), con.prob.clone())
                } else {
                    con.clone()
                };
                assert!(exact_constraint_probability(&m, &chain, &relaxed).unwrap().certifies(&con.prob), "{kind}");
            }
        }
    }

    #[test]
    fn truncated_sum_witness_verifies() {
        let m = fixtures::sp_two_branch();
        let t = m.state_by_name("t").unwrap();
        let q = vec![c(PayoffKind::TruncatedSum, 0, r(1), rat(1, 2)).with_target(vec![t])];
        let out = solve_conjunction(&m, 0, &q, None).unwrap();
        let st = out.strategy.unwrap();
        let chain = induced_chain(&m, st.as_finite().unwrap(), 0).unwrap();
        assert_eq!(exact_constraint_probability(&m, &chain, &q[0]).unwrap().lower, rat(1, 2));
        let reach = exact_verify_finite(&m, st.as_finite().unwrap(), 0, &crate::model::StateSet::from_states(m.num_states(), [t]));
        assert_eq!(reach.unwrap(), r(1));
    }
}
