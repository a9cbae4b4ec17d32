//! Exact analysis of finite Markov chains: hitting probabilities, bottom
//! SCCs and stationary distributions.

use crate::error::Result;
use crate::graph::scc_decompose;
use crate::lp::solve_linear_system;
use crate::rational::Rational;
use crate::strategy::{ChainEdge, InducedChain};

/// Transition with a flag marking edges that count as a hit by themselves.
pub type FlaggedEdge = (usize, Rational, bool);

/// Probability, from every node, of eventually reaching a node in `target`
/// or taking a flagged edge.
pub fn hit_probabilities(edges: &[Vec<FlaggedEdge>], target: &[bool]) -> Result<Vec<Rational>> {
    let n = edges.len();
    // nodes that can hit at all
    let mut pred = vec![Vec::new(); n];
    let mut can = target.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|v| target[*v]).collect();
    for (v, es) in edges.iter().enumerate() {
        for (u, p, hit) in es {
            if p.is_zero() {
                continue;
            }
            pred[*u].push(v);
            if *hit && !can[v] {
                can[v] = true;
                stack.push(v);
            }
        }
    }
    while let Some(u) = stack.pop() {
        for &v in &pred[u] {
            if !can[v] {
                can[v] = true;
                stack.push(v);
            }
        }
    }
    let mut x = vec![Rational::zero(); n];
    for v in 0..n {
        if target[v] {
            x[v] = Rational::one();
        }
    }
    let live: Vec<bool> = (0..n).map(|v| can[v] && !target[v]).collect();
    let adj: Vec<Vec<usize>> = edges
        .iter()
        .enumerate()
        .map(|(v, es)| {
            if !live[v] {
                return Vec::new();
            }
            es.iter().filter(|(u, p, hit)| live[*u] && !*hit && !p.is_zero()).map(|(u, _, _)| *u).collect()
        })
        .collect();
    let mut done = vec![false; n];
    for comp in scc_decompose(&adj) {
        if !live[comp[0]] {
            continue;
        }
        let k = comp.len();
        let pos = |v: usize| comp.binary_search(&v).ok();
        // known part of each equation
        let mut b = vec![Rational::zero(); k];
        let mut a = vec![vec![Rational::zero(); k]; k];
        for (i, &v) in comp.iter().enumerate() {
            a[i][i] = Rational::one();
            for (u, p, hit) in &edges[v] {
                if *hit {
                    b[i] += p;
                } else if let Some(j) = pos(*u) {
                    a[i][j] -= p;
                } else if done[*u] || target[*u] {
                    b[i] += &(p * &x[*u]);
                }
            }
        }
        let sol = if k == 1 {
            vec![&b[0] / &a[0][0]]
        } else {
            solve_linear_system(&a, &b)?
        };
        for (i, &v) in comp.iter().enumerate() {
            x[v] = sol[i].clone();
            done[v] = true;
        }
    }
    Ok(x)
}

/// Bottom strongly connected components (closed classes).
pub fn bottom_sccs(rows: &[Vec<(usize, Rational)>]) -> Vec<Vec<usize>> {
    let adj: Vec<Vec<usize>> =
        rows.iter().map(|r| r.iter().filter(|(_, p)| !p.is_zero()).map(|(u, _)| *u).collect()).collect();
    let comps = scc_decompose(&adj);
    let mut comp_of = vec![0; rows.len()];
    for (i, c) in comps.iter().enumerate() {
        for v in c {
            comp_of[*v] = i;
        }
    }
    comps
        .iter()
        .enumerate()
        .filter(|(i, c)| c.iter().all(|v| adj[*v].iter().all(|u| comp_of[*u] == *i)))
        .map(|(_, c)| c.clone())
        .collect()
}

/// Stationary distribution of a closed class, indexed like `class`.
pub fn stationary_distribution(rows: &[Vec<(usize, Rational)>], class: &[usize]) -> Result<Vec<Rational>> {
    let k = class.len();
    if k == 1 {
        return Ok(vec![Rational::one()]);
    }
    let pos = |v: usize| class.iter().position(|c| *c == v).expect("closed class");
    // π_u − Σ_v π_v P(v,u) = 0 for all but the last u; Σ π = 1
    let mut a = vec![vec![Rational::zero(); k]; k];
    for i in 0..k - 1 {
        a[i][i] = Rational::one();
    }
    for (j, &v) in class.iter().enumerate() {
        for (u, p) in &rows[v] {
            let i = pos(*u);
            if i < k - 1 {
                a[i][j] -= p;
            }
        }
    }
    a[k - 1] = vec![Rational::one(); k];
    let mut b = vec![Rational::zero(); k];
    b[k - 1] = Rational::one();
    solve_linear_system(&a, &b)
}

impl InducedChain {
    /// Flagged edge lists for [`hit_probabilities`].
    pub fn flagged(&self, hit: impl Fn(usize, &ChainEdge) -> bool) -> Vec<Vec<FlaggedEdge>> {
        self.edges
            .iter()
            .enumerate()
            .map(|(v, es)| es.iter().map(|e| (e.target, e.prob.clone(), hit(v, e))).collect())
            .collect()
    }

    /// Probability from the initial distribution of reaching a node with
    /// `node(v)` or taking an edge with `edge(v, e)`.
    pub fn hit_probability(
        &self,
        node: impl Fn(usize) -> bool,
        edge: impl Fn(usize, &ChainEdge) -> bool,
    ) -> Result<Rational> {
        let target: Vec<bool> = (0..self.len()).map(node).collect();
        let x = hit_probabilities(&self.flagged(edge), &target)?;
        Ok(self.initial.iter().map(|(v, p)| p * &x[*v]).sum())
    }

    /// Closed classes with the probability of ending up in each.
    pub fn bscc_masses(&self) -> Result<Vec<(Vec<usize>, Rational)>> {
        let rows = self.rows();
        let mut out = Vec::new();
        for class in bottom_sccs(&rows) {
            let mut mark = vec![false; self.len()];
            for v in &class {
                mark[*v] = true;
            }
            let p = self.hit_probability(|v| mark[v], |_, _| false)?;
            out.push((class, p));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn gamblers_ruin() {
        // 0 and 3 absorbing, fair steps in between
        let h = rat(1, 2);
        let edges = vec![
            vec![(0, r(1), false)],
            vec![(0, h.clone(), false), (2, h.clone(), false)],
            vec![(1, h.clone(), false), (3, h.clone(), false)],
            vec![(3, r(1), false)],
        ];
        let x = hit_probabilities(&edges, &[false, false, false, true]).unwrap();
        assert_eq!(x, vec![r(0), rat(1, 3), rat(2, 3), r(1)]);
    }

    #[test]
    fn flagged_edges_count_as_hits() {
        let edges = vec![vec![(0, rat(1, 4), true), (1, rat(3, 4), false)], vec![(1, r(1), false)]];
        let x = hit_probabilities(&edges, &[false, false]).unwrap();
        assert_eq!(x[0], rat(1, 4));
    }

    #[test]
    fn two_state_stationary() {
        let rows = vec![vec![(0, rat(1, 2)), (1, rat(1, 2))], vec![(0, r(1))]];
        assert_eq!(bottom_sccs(&rows), vec![vec![0, 1]]);
        assert_eq!(stationary_distribution(&rows, &[0, 1]).unwrap(), vec![rat(2, 3), rat(1, 3)]);
    }

    #[test]
    fn bottom_classes_exclude_transient() {
        let rows = vec![vec![(1, rat(1, 2)), (2, rat(1, 2))], vec![(1, r(1))], vec![(2, r(1))]];
        assert_eq!(bottom_sccs(&rows), vec![vec![1], vec![2]]);
    }
}
