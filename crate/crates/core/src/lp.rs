//! Exact rational linear programming and linear systems.
//!
//! Two-phase simplex on a sparse-row tableau with Bland's least-index rule,
//! which guarantees termination without perturbation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Maximize,
    Minimize,
}

/// Sparse row `Σ coeff·x_var`.
pub type Row = Vec<(usize, Rational)>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub coeffs: Row,
    pub relation: Relation,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub nonneg: Vec<bool>,
    pub constraints: Vec<LinearConstraint>,
    pub objective: Option<(Row, Direction)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { point: Vec<Rational>, value: Rational },
    Feasible(Vec<Rational>),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn point(&self) -> Option<&[Rational]> {
        match self {
            LpOutcome::Optimal { point, .. } | LpOutcome::Feasible(point) => Some(point),
            _ => None,
        }
    }
}

impl LinearProgram {
    /// Program with `n` non-negative variables and no constraints.
    pub fn new(n: usize) -> Self {
        LinearProgram { nonneg: vec![true; n], constraints: Vec::new(), objective: None }
    }

    pub fn num_vars(&self) -> usize {
        self.nonneg.len()
    }

    pub fn add_var(&mut self, nonneg: bool) -> usize {
        self.nonneg.push(nonneg);
        self.nonneg.len() - 1
    }

    pub fn add_constraint(&mut self, coeffs: Row, relation: Relation, rhs: Rational) {
        self.constraints.push(LinearConstraint { coeffs, relation, rhs });
    }

    pub fn set_objective(&mut self, coeffs: Row, direction: Direction) {
        self.objective = Some((coeffs, direction));
    }

    /// Exact check that `point` satisfies every constraint and sign flag.
    pub fn satisfied_by(&self, point: &[Rational]) -> bool {
        if point.len() != self.num_vars() {
            return false;
        }
        if self.nonneg.iter().zip(point).any(|(nn, x)| *nn && x.is_negative()) {
            return false;
        }
        self.constraints.iter().all(|c| {
            let lhs: Rational = c.coeffs.iter().map(|(j, a)| a * &point[*j]).sum();
            match c.relation {
                Relation::Le => lhs <= c.rhs,
                Relation::Eq => lhs == c.rhs,
                Relation::Ge => lhs >= c.rhs,
            }
        })
    }

    pub fn evaluate(&self, coeffs: &Row, point: &[Rational]) -> Rational {
        coeffs.iter().map(|(j, a)| a * &point[*j]).sum()
    }

    fn check(&self) -> Result<()> {
        let n = self.num_vars();
        let bad = |r: &Row| r.iter().any(|(j, _)| *j >= n);
        if self.constraints.iter().any(|c| bad(&c.coeffs)) {
            return Err(Error::MalformedLp("constraint references unknown variable".into()));
        }
        if let Some((o, _)) = &self.objective {
            if bad(o) {
                return Err(Error::MalformedLp("objective references unknown variable".into()));
            }
        }
        Ok(())
    }
}

type SparseRow = Vec<(usize, Rational)>;

fn get(row: &SparseRow, c: usize) -> Option<&Rational> {
    row.binary_search_by_key(&c, |(j, _)| *j).ok().map(|i| &row[i].1)
}

/// `a - f·b` for sorted sparse rows.
fn axpy(a: &SparseRow, f: &Rational, b: &SparseRow) -> SparseRow {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut k) = (0, 0);
    while i < a.len() || k < b.len() {
        if k == b.len() || (i < a.len() && a[i].0 < b[k].0) {
            out.push(a[i].clone());
            i += 1;
        } else if i == a.len() || b[k].0 < a[i].0 {
            out.push((b[k].0, -(f * &b[k].1)));
            k += 1;
        } else {
            let v = &a[i].1 - &(f * &b[k].1);
            if !v.is_zero() {
                out.push((a[i].0, v));
            }
            i += 1;
            k += 1;
        }
    }
    out
}

struct Tableau {
    rows: Vec<SparseRow>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    ncols: usize,
    obj: Vec<Rational>,
    obj_rhs: Rational,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = get(&self.rows[r], c).expect("pivot on zero").clone();
        if !p.is_one() {
            for e in self.rows[r].iter_mut() {
                e.1 = &e.1 / &p;
            }
            self.rhs[r] = &self.rhs[r] / &p;
        }
        let prow = std::mem::take(&mut self.rows[r]);
        let prhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            if let Some(f) = get(&self.rows[i], c).cloned() {
                self.rows[i] = axpy(&self.rows[i], &f, &prow);
                self.rhs[i] = &self.rhs[i] - &(&f * &prhs);
            }
        }
        let f = self.obj[c].clone();
        if !f.is_zero() {
            for (j, v) in &prow {
                self.obj[*j] = &self.obj[*j] - &(&f * v);
            }
            self.obj_rhs = &self.obj_rhs - &(&f * &prhs);
        }
        self.rows[r] = prow;
        self.basis[r] = c;
    }

    /// Sets reduced costs for maximizing `cost·x` under the current basis.
    fn load_objective(&mut self, cost: &[Rational]) {
        self.obj = cost.to_vec();
        self.obj_rhs = Rational::zero();
        for i in 0..self.rows.len() {
            let cb = cost[self.basis[i]].clone();
            if cb.is_zero() {
                continue;
            }
            for (j, v) in &self.rows[i] {
                self.obj[*j] = &self.obj[*j] - &(&cb * v);
            }
            self.obj_rhs = &self.obj_rhs - &(&cb * &self.rhs[i]);
        }
    }

    /// Runs simplex iterations; returns false if unbounded.
    fn optimize(&mut self, allowed: &[bool]) -> bool {
        loop {
            let entering = (0..self.ncols).find(|j| allowed[*j] && self.obj[*j].is_positive());
            let Some(c) = entering else { return true };
            let mut best: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                if let Some(a) = get(&self.rows[i], c) {
                    if a.is_positive() {
                        let ratio = &self.rhs[i] / a;
                        let better = match &best {
                            None => true,
                            Some((bi, br)) => {
                                ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi])
                            }
                        };
                        if better {
                            best = Some((i, ratio));
                        }
                    }
                }
            }
            match best {
                None => return false,
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }

    fn value_of(&self, col: usize) -> Rational {
        self.basis
            .iter()
            .position(|b| *b == col)
            .map(|i| self.rhs[i].clone())
            .unwrap_or_else(Rational::zero)
    }
}

/// Solves `lp` exactly.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome> {
    lp.check()?;
    let nv = lp.num_vars();
    // Column map: each variable gets a positive column, free variables also a
    // negative one.
    let mut pos_col = vec![0; nv];
    let mut neg_col = vec![None; nv];
    let mut ncols = 0;
    for v in 0..nv {
        pos_col[v] = ncols;
        ncols += 1;
        if !lp.nonneg[v] {
            neg_col[v] = Some(ncols);
            ncols += 1;
        }
    }
    let mut rows: Vec<SparseRow> = Vec::new();
    let mut rhs = Vec::new();
    let mut rels = Vec::new();
    for c in &lp.constraints {
        let mut acc: std::collections::BTreeMap<usize, Rational> = Default::default();
        for (v, a) in &c.coeffs {
            if a.is_zero() {
                continue;
            }
            *acc.entry(pos_col[*v]).or_insert_with(Rational::zero) += a;
            if let Some(nc) = neg_col[*v] {
                *acc.entry(nc).or_insert_with(Rational::zero) -= a;
            }
        }
        let mut row: SparseRow = acc.into_iter().filter(|(_, a)| !a.is_zero()).collect();
        let mut b = c.rhs.clone();
        let mut rel = c.relation;
        if b.is_negative() {
            for e in row.iter_mut() {
                e.1 = -&e.1;
            }
            b = -b;
            rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        if row.is_empty() {
            let ok = match rel {
                Relation::Le => true,
                Relation::Eq | Relation::Ge => b.is_zero(),
            };
            if !ok {
                return Ok(LpOutcome::Infeasible);
            }
            continue;
        }
        rows.push(row);
        rhs.push(b);
        rels.push(rel);
    }
    let m = rows.len();
    let mut basis = vec![0; m];
    let mut artificial = Vec::new();
    for i in 0..m {
        match rels[i] {
            Relation::Le => {
                rows[i].push((ncols, Rational::one()));
                basis[i] = ncols;
                ncols += 1;
            }
            Relation::Ge => {
                rows[i].push((ncols, -Rational::one()));
                ncols += 1;
                rows[i].push((ncols, Rational::one()));
                basis[i] = ncols;
                artificial.push(ncols);
                ncols += 1;
            }
            Relation::Eq => {
                rows[i].push((ncols, Rational::one()));
                basis[i] = ncols;
                artificial.push(ncols);
                ncols += 1;
            }
        }
    }
    let mut is_art = vec![false; ncols];
    for a in &artificial {
        is_art[*a] = true;
    }
    let mut t = Tableau {
        rows,
        rhs,
        basis,
        ncols,
        obj: vec![Rational::zero(); ncols],
        obj_rhs: Rational::zero(),
    };
    if !artificial.is_empty() {
        let mut cost = vec![Rational::zero(); ncols];
        for a in &artificial {
            cost[*a] = -Rational::one();
        }
        t.load_objective(&cost);
        let all = vec![true; ncols];
        t.optimize(&all);
        // obj_rhs = -(phase-one value) = sum of artificials
        if !t.obj_rhs.is_zero() {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < t.rows.len() {
            if is_art[t.basis[i]] {
                let col = t.rows[i].iter().map(|(j, _)| *j).find(|j| !is_art[*j]);
                match col {
                    Some(c) => {
                        t.pivot(i, c);
                        i += 1;
                    }
                    None => {
                        t.rows.remove(i);
                        t.rhs.remove(i);
                        t.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }
    let allowed: Vec<bool> = (0..ncols).map(|j| !is_art[j]).collect();
    let extract = |t: &Tableau| -> Vec<Rational> {
        (0..nv)
            .map(|v| {
                let mut x = t.value_of(pos_col[v]);
                if let Some(nc) = neg_col[v] {
                    x -= t.value_of(nc);
                }
                x
            })
            .collect()
    };
    let Some((obj_row, dir)) = &lp.objective else {
        return Ok(LpOutcome::Feasible(extract(&t)));
    };
    let mut cost = vec![Rational::zero(); ncols];
    for (v, a) in obj_row {
        let a = match dir {
            Direction::Maximize => a.clone(),
            Direction::Minimize => -a,
        };
        cost[pos_col[*v]] += &a;
        if let Some(nc) = neg_col[*v] {
            cost[nc] -= &a;
        }
    }
    t.load_objective(&cost);
    if !t.optimize(&allowed) {
        return Ok(LpOutcome::Unbounded);
    }
    let point = extract(&t);
    let value = lp.evaluate(obj_row, &point);
    Ok(LpOutcome::Optimal { point, value })
}

/// Solves the square system `a·x = b` exactly by Gaussian elimination.
pub fn solve_linear_system(a: &[Vec<Rational>], b: &[Rational]) -> Result<Vec<Rational>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::MalformedLp("linear system is not square".into()));
    }
    let mut m: Vec<Vec<Rational>> = a.to_vec();
    let mut rhs: Vec<Rational> = b.to_vec();
    for col in 0..n {
        let piv = (col..n).find(|r| !m[*r][col].is_zero()).ok_or(Error::Singular)?;
        m.swap(col, piv);
        rhs.swap(col, piv);
        let p = m[col][col].clone();
        if !p.is_one() {
            for j in col..n {
                m[col][j] = &m[col][j] / &p;
            }
            rhs[col] = &rhs[col] / &p;
        }
        let nz: Vec<usize> = (col + 1..n).filter(|j| !m[col][*j].is_zero()).collect();
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].clone();
            for &j in &nz {
                let d = &f * &m[col][j];
                m[r][j] -= d;
            }
            m[r][col] = Rational::zero();
            let d = &f * &rhs[col];
            rhs[r] -= d;
        }
    }
    Ok(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use proptest::prelude::*;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn small_max() {
        let mut lp = LinearProgram::new(2);
        lp.add_constraint(vec![(0, r(1))], Relation::Le, r(1));
        lp.add_constraint(vec![(1, r(1))], Relation::Le, r(2));
        lp.set_objective(vec![(0, r(1)), (1, r(1))], Direction::Maximize);
        assert_eq!(
            solve_lp(&lp).unwrap(),
            LpOutcome::Optimal { point: vec![r(1), r(2)], value: r(3) }
        );
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.add_constraint(vec![(0, r(1))], Relation::Ge, r(1));
        lp.add_constraint(vec![(0, r(1))], Relation::Le, r(0));
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Infeasible);
        let mut lp = LinearProgram::new(1);
        lp.set_objective(vec![(0, r(1))], Direction::Maximize);
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn free_variables_and_minimize() {
        let mut lp = LinearProgram::new(0);
        let x = lp.add_var(false);
        lp.add_constraint(vec![(x, r(1))], Relation::Ge, r(-3));
        lp.set_objective(vec![(x, r(1))], Direction::Minimize);
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Optimal { point: vec![r(-3)], value: r(-3) });
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(2);
        lp.add_constraint(vec![(0, r(1)), (1, r(1))], Relation::Eq, r(1));
        lp.add_constraint(vec![(0, r(2)), (1, r(2))], Relation::Eq, r(2));
        lp.set_objective(vec![(0, r(1))], Direction::Maximize);
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Optimal { point: vec![r(1), r(0)], value: r(1) });
    }

    #[test]
    fn bad_index_is_an_error() {
        let mut lp = LinearProgram::new(1);
        lp.add_constraint(vec![(3, r(1))], Relation::Le, r(1));
        assert!(solve_lp(&lp).is_err());
    }

    #[test]
    fn linear_systems() {
        let id = vec![vec![r(1), r(0)], vec![r(0), r(1)]];
        assert_eq!(solve_linear_system(&id, &[r(3), r(4)]).unwrap(), vec![r(3), r(4)]);
        assert_eq!(solve_linear_system(&[vec![r(2)]], &[r(1)]).unwrap(), vec![rat(1, 2)]);
        let sing = vec![vec![r(1), r(1)], vec![r(2), r(2)]];
        assert_eq!(solve_linear_system(&sing, &[r(1), r(2)]), Err(Error::Singular));
        // x_s = p·x_t + (1-p)·x_sink with x_t = 1, x_sink = 0
        let p = rat(2, 7);
        let a = vec![
            vec![r(1), -p.clone(), -(r(1) - &p)],
            vec![r(0), r(1), r(0)],
            vec![r(0), r(0), r(1)],
        ];
        assert_eq!(solve_linear_system(&a, &[r(0), r(1), r(0)]).unwrap()[0], p);
    }

    /// Vertex enumeration oracle for `max c·x, A x ≤ b, x ≥ 0` with two or
    /// three variables: every vertex is the solution of some square
    /// subsystem of tight constraints.
    fn brute_force_max(a: &[Vec<Rational>], b: &[Rational], c: &[Rational]) -> Option<Rational> {
        let n = c.len();
        let mut all: Vec<(Vec<Rational>, Rational)> = a.iter().cloned().zip(b.iter().cloned()).collect();
        for j in 0..n {
            let mut e = vec![r(0); n];
            e[j] = r(-1);
            all.push((e, r(0)));
        }
        let k = all.len();
        let mut best: Option<Rational> = None;
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            let m: Vec<Vec<Rational>> = idx.iter().map(|i| all[*i].0.clone()).collect();
            let rhs: Vec<Rational> = idx.iter().map(|i| all[*i].1.clone()).collect();
            if let Ok(x) = solve_linear_system(&m, &rhs) {
                let feas = all.iter().all(|(row, bb)| {
                    row.iter().zip(&x).map(|(u, v)| u * v).sum::<Rational>() <= *bb
                });
                if feas {
                    let val: Rational = c.iter().zip(&x).map(|(u, v)| u * v).sum();
                    best = Some(match best {
                        None => val,
                        Some(bv) => bv.max(val),
                    });
                }
            }
            // next combination
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] < k - n + i {
                    idx[i] += 1;
                    for j in i + 1..n {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    proptest! {
        #[test]
        fn agrees_with_vertex_enumeration(
            n in 2usize..=3,
            rows in prop::collection::vec(prop::collection::vec(-3i64..=3, 3), 1..4),
            bs in prop::collection::vec(0i64..=4, 4),
            cs in prop::collection::vec(-2i64..=3, 3),
        ) {
            let a: Vec<Vec<Rational>> = rows.iter().map(|row| row[..n].iter().map(|x| r(*x)).collect()).collect();
            let b: Vec<Rational> = bs[..a.len()].iter().map(|x| r(*x)).collect();
            let c: Vec<Rational> = cs[..n].iter().map(|x| r(*x)).collect();
            // bound the box so the optimum exists
            let mut a2 = a.clone();
            let mut b2 = b.clone();
            for j in 0..n {
                let mut e = vec![r(0); n];
                e[j] = r(1);
                a2.push(e);
                b2.push(r(5));
            }
            let mut lp = LinearProgram::new(n);
            for (row, bb) in a2.iter().zip(&b2) {
                lp.add_constraint(row.iter().cloned().enumerate().collect(), Relation::Le, bb.clone());
            }
            lp.set_objective(c.iter().cloned().enumerate().collect(), Direction::Maximize);
            let out = solve_lp(&lp).unwrap();
            let expect = brute_force_max(&a2, &b2, &c).expect("origin is feasible");
            match out {
                LpOutcome::Optimal { point, value } => {
                    prop_assert!(lp.satisfied_by(&point));
                    prop_assert_eq!(value, expect);
                }
                other => prop_assert!(false, "unexpected {:?}", other),
            }
        }

        #[test]
        fn equality_systems_feasibility(xs in prop::collection::vec(0i64..=3, 3), rows in prop::collection::vec(prop::collection::vec(-2i64..=2, 3), 1..4)) {
            // Constraints built around a known non-negative point must be feasible.
            let mut lp = LinearProgram::new(3);
            for row in &rows {
                let rhs: i64 = row.iter().zip(&xs).map(|(a, x)| a * x).sum();
                lp.add_constraint(row.iter().map(|a| r(*a)).enumerate().collect(), Relation::Eq, r(rhs));
            }
            let out = solve_lp(&lp).unwrap();
            let p = out.point().expect("feasible").to_vec();
            prop_assert!(lp.satisfied_by(&p));
        }
    }
}
