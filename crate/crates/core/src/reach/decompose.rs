use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::absorbing::{absorbing_multi_reach, flow_program, FlowSolution};
use crate::error::{Error, Result};
use crate::graph::{contract_mecs, Contraction, EndComponent};
use crate::lift::TwoPhase;
use crate::lp::{solve_lp, LpOutcome, Relation, Row};
use crate::model::{StateId, StateSet, WeightedMdp};
use crate::query::MultiReachQuery;
use crate::rational::Rational;
use crate::strategy::{dirac, Memoryless};

/// Reach phase of a prefix-independent solve: which MECs are good for which
/// constraint and the flow into their proxies.
#[derive(Debug, Clone)]
pub struct PrefixIndependent {
    pub contraction: Contraction,
    /// Per constraint, the MECs whose oracle answered yes.
    pub good: Vec<Vec<usize>>,
    pub flow: FlowSolution,
}

impl PrefixIndependent {
    /// Reach-then-commit policy on the original MDP; `subs[k]` is played
    /// after committing to MEC `k`.
    pub fn two_phase(&self, subs: Vec<Memoryless>) -> TwoPhase {
        two_phase_for(&self.contraction, self.flow.strategy.clone(), dirac, subs)
    }
}

fn two_phase_for(
    con: &Contraction,
    reach: Memoryless,
    switch: impl Fn(usize) -> Vec<(usize, Rational)>,
    subs: Vec<Memoryless>,
) -> TwoPhase {
    let n = con.original_states;
    let total = con.mdp.num_states();
    let base_actions = (0..total)
        .map(|s| if s < n { con.mdp.num_actions(s) - usize::from(con.star_action[s].is_some()) } else { 1 })
        .collect();
    let mut switches = HashMap::new();
    for (k, mec) in con.decomposition.mecs.iter().enumerate() {
        let d = switch(k);
        for s in &mec.states {
            switches.insert((*s, con.star_action[*s].expect("MEC member")), d.clone());
        }
    }
    TwoPhase { reach, base_actions, switches, subs }
}

/// Solves a conjunction of prefix-independent constraints when satisfying
/// each one almost surely inside a MEC is jointly achievable: constraint `i`
/// targets the proxies of MECs `C` with `oracle(k, C, i)`.
pub fn prefix_independent_solve(
    mdp: &WeightedMdp,
    init: StateId,
    thresholds: &[Rational],
    oracle: impl Fn(usize, &EndComponent, usize) -> bool,
) -> Result<Option<PrefixIndependent>> {
    let con = contract_mecs(mdp);
    let total = con.mdp.num_states();
    let mut good = vec![Vec::new(); thresholds.len()];
    for (k, mec) in con.decomposition.mecs.iter().enumerate() {
        for (i, g) in good.iter_mut().enumerate() {
            if oracle(k, mec, i) {
                g.push(k);
            }
        }
    }
    let targets = good
        .iter()
        .map(|g| StateSet::from_states(total, g.iter().map(|k| con.mec_state[*k])))
        .collect();
    let query = MultiReachQuery::new(targets, thresholds.to_vec());
    Ok(absorbing_multi_reach(&con.mdp, init, &query)?
        .map(|flow| PrefixIndependent { contraction: con, good, flow }))
}

/// Maximal subsets (bitmasks over `q` constraints) accepted by `oracle`,
/// searched from the full set downward. Fails if the oracle is not
/// downward closed on the immediate subsets of an accepted set.
pub fn maximal_subsets(q: usize, mec: usize, oracle: impl Fn(u64) -> bool) -> Result<Vec<u64>> {
    if q > 20 {
        return Err(Error::TooLarge(format!("{q} constraints in one subset lattice")));
    }
    let mut memo: HashMap<u64, bool> = HashMap::new();
    let mut ask = |s: u64| *memo.entry(s).or_insert_with(|| oracle(s));
    let full: u64 = (1u64 << q) - 1;
    let mut maximal: Vec<u64> = Vec::new();
    for size in (0..=q as u32).rev() {
        for s in 0..=full {
            if s.count_ones() != size || maximal.iter().any(|m| s & !m == 0) {
                continue;
            }
            if ask(s) {
                maximal.push(s);
            }
        }
    }
    for m in maximal.clone() {
        for i in 0..q {
            if m & (1 << i) != 0 && !ask(m & !(1 << i)) {
                return Err(Error::NotDownwardClosed { mec });
            }
        }
    }
    Ok(maximal)
}

/// Feasible solution of the decomposition LP.
#[derive(Debug, Clone)]
pub struct LambdaSolution {
    pub flow: FlowSolution,
    /// `(mec, subset, λ)` for every maximal subset, zero weights included.
    pub lambdas: Vec<(usize, u64, Rational)>,
}

#[derive(Debug, Clone)]
pub struct LambdaOutcome {
    pub contraction: Contraction,
    /// Maximal jointly satisfiable subsets per MEC.
    pub maximal: Vec<Vec<u64>>,
    pub solution: Option<LambdaSolution>,
}

impl LambdaOutcome {
    /// Reach-then-commit policy. `sub(k, I)` must satisfy the constraints in
    /// `I` almost surely from every state of MEC `k`.
    pub fn two_phase(&self, mut sub: impl FnMut(usize, u64) -> Memoryless) -> Option<TwoPhase> {
        let sol = self.solution.as_ref()?;
        let con = &self.contraction;
        let mut subs = Vec::new();
        let mut per_mec: BTreeMap<usize, Vec<(usize, Rational)>> = BTreeMap::new();
        for (k, set, lambda) in &sol.lambdas {
            if lambda.is_positive() {
                per_mec.entry(*k).or_default().push((subs.len(), lambda.clone()));
                subs.push(sub(*k, *set));
            }
        }
        let per_mec: Vec<Vec<(usize, Rational)>> = (0..con.decomposition.len())
            .map(|k| {
                let mut d = per_mec.remove(&k).unwrap_or_default();
                let total: Rational = d.iter().map(|(_, p)| p).sum();
                for e in d.iter_mut() {
                    e.1 = &e.1 / &total;
                }
                d
            })
            .collect();
        Some(two_phase_for(con, sol.flow.strategy.clone(), |k| per_mec[k].clone(), subs))
    }
}

/// Decomposition of each MEC's behaviour into a mixture of strategies that
/// each satisfy a maximal subset of the constraints almost surely.
///
/// Variables: flows `y_{s,a}` over the contraction (including `a*`) and a
/// weight `λ_I^C` per MEC and maximal subset. Constraints: conservation,
/// all flow ends in MECs, each MEC's exit flow equals its λ mass, and every
/// constraint `i` collects at least `α_i` from the subsets containing it.
pub fn lambda_decomposition_solve(
    mdp: &WeightedMdp,
    init: StateId,
    thresholds: &[Rational],
    oracle: impl Fn(usize, &EndComponent, u64) -> bool + Sync,
) -> Result<LambdaOutcome> {
    let q = thresholds.len();
    let con = contract_mecs(mdp);
    let maximal: Vec<Vec<u64>> = con
        .decomposition
        .mecs
        .par_iter()
        .enumerate()
        .map(|(k, mec)| maximal_subsets(q, k, |s| oracle(k, mec, s)))
        .collect::<Result<_>>()?;
    let n = con.original_states;
    // original states reachable from init
    let mut region = StateSet::empty(n);
    let mut stack = vec![init];
    region.insert(init);
    while let Some(s) = stack.pop() {
        for a in mdp.actions(s) {
            for t in a.support() {
                if region.insert(t) {
                    stack.push(t);
                }
            }
        }
    }
    let region_c = StateSet::from_states(con.mdp.num_states(), region.iter());
    let (mut lp, vars) = flow_program(&con.mdp, init, &region_c);
    let star_var = |k: usize| -> Row {
        vars.vars
            .iter()
            .enumerate()
            .filter(|(_, (s, a))| con.decomposition.membership[*s] == Some(k) && con.is_star(*s, *a))
            .map(|(j, _)| (j, Rational::one()))
            .collect()
    };
    let all_star: Row = (0..con.decomposition.len()).flat_map(star_var).collect();
    lp.add_constraint(all_star, Relation::Eq, Rational::one());
    let mut lambda_vars = Vec::new();
    for (k, sets) in maximal.iter().enumerate() {
        let mut row = star_var(k);
        for set in sets {
            let v = lp.add_var(true);
            lambda_vars.push((k, *set, v));
            row.push((v, -Rational::one()));
        }
        lp.add_constraint(row, Relation::Eq, Rational::zero());
    }
    for (i, alpha) in thresholds.iter().enumerate() {
        let row: Row = lambda_vars
            .iter()
            .filter(|(_, set, _)| set & (1 << i) != 0)
            .map(|(_, _, v)| (*v, Rational::one()))
            .collect();
        lp.add_constraint(row, Relation::Ge, alpha.clone());
    }
    let solution = match solve_lp(&lp)? {
        LpOutcome::Infeasible => None,
        LpOutcome::Feasible(point) | LpOutcome::Optimal { point, .. } => {
            let lambdas = lambda_vars.iter().map(|(k, set, v)| (*k, *set, point[*v].clone())).collect();
            Some(LambdaSolution { flow: vars.extract(&con.mdp, lp, point), lambdas })
        }
        LpOutcome::Unbounded => unreachable!("feasibility program has no objective"),
    };
    Ok(LambdaOutcome { contraction: con, maximal, solution })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::rat;

    fn sets(m: &[u64]) -> impl Fn(usize, &EndComponent, u64) -> bool + Sync + '_ {
        move |_, _, s| m.iter().any(|x| s & !x == 0)
    }

    #[test]
    fn two_singleton_subsets_share_the_mass() {
        let m = fixtures::s_t_mp();
        let out = lambda_decomposition_solve(&m, 0, &[rat(1, 2), rat(1, 2)], sets(&[0b01, 0b10])).unwrap();
        assert_eq!(out.maximal, vec![vec![0b01, 0b10]]);
        let sol = out.solution.expect("feasible");
        let total: Rational = sol.lambdas.iter().map(|(_, _, l)| l).sum();
        assert_eq!(total, Rational::one());
        for (_, _, l) in &sol.lambdas {
            assert_eq!(*l, rat(1, 2));
        }
        assert!(sol.flow.lp.satisfied_by(&sol.flow.point));
        let out = lambda_decomposition_solve(&m, 0, &[rat(3, 5), rat(3, 5)], sets(&[0b01, 0b10])).unwrap();
        assert!(out.solution.is_none());
    }

    #[test]
    fn joint_subset_gets_all_mass() {
        let m = fixtures::s_t_mp();
        let out = lambda_decomposition_solve(&m, 0, &[rat(9, 10), rat(9, 10)], sets(&[0b11])).unwrap();
        let sol = out.solution.expect("feasible");
        assert_eq!(sol.lambdas, vec![(0, 0b11, Rational::one())]);
    }

    #[test]
    fn non_downward_closed_oracle_is_reported() {
        let m = fixtures::s_t_mp();
        let bad = |_: usize, _: &EndComponent, s: u64| s == 0b11 || s == 0;
        assert_eq!(
            lambda_decomposition_solve(&m, 0, &[rat(1, 2), rat(1, 2)], bad).unwrap_err(),
            Error::NotDownwardClosed { mec: 0 }
        );
    }

    #[test]
    fn prefix_independent_with_one_sided_oracle() {
        let m = fixtures::s_t_mp();
        let ok = prefix_independent_solve(&m, 0, &[Rational::one(), rat(1, 2)], |_, _, i| i == 0).unwrap();
        assert!(ok.is_none());
        let none = prefix_independent_solve(&m, 0, &[rat(1, 10)], |_, _, _| false).unwrap();
        assert!(none.is_none());
        let all = prefix_independent_solve(&m, 0, &[Rational::one(), Rational::one()], |_, _, _| true).unwrap();
        assert!(all.is_some());
    }
}
