//! Finite Markov chain numerics: stationary vectors by GTH elimination,
//! absorption probabilities by state reduction, recurrent-class detection
//! and an iterative limit used as a cross-check.
//!
//! Both eliminations are subtraction-free, so every intermediate quantity is
//! a non-negative sum of products and there is no cancellation even when the
//! stationary mass spans many orders of magnitude.

use crate::error::{ModelError, Result};

/// Row-stochastic matrix in compressed sparse row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseStochastic {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseStochastic {
    /// Builds from rows of `(column, probability)`; zero entries are dropped.
    pub fn from_rows<I, R>(rows: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = (usize, f64)>,
    {
        let mut offsets = vec![0];
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        for row in rows {
            for (c, v) in row {
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            offsets.push(cols.len());
        }
        SparseStochastic { offsets, cols, vals }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn nnz(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v).sum()
    }

    /// `v P`.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                for (j, p) in self.row(i) {
                    out[j] += vi * p;
                }
            }
        }
        out
    }

    /// `|| v P - v ||_1`.
    pub fn residual(&self, v: &[f64]) -> f64 {
        self.left_mul(v)
            .iter()
            .zip(v)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// States reachable from `start` (including `start`).
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(s) = stack.pop() {
            for (t, _) in self.row(s) {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen
    }

    /// Closed communicating classes among the states flagged in `within`,
    /// each sorted ascending, ordered by smallest member.
    ///
    /// `within` must be closed under transitions, e.g. a reachable set.
    pub fn closed_classes(&self, within: &[bool]) -> Vec<Vec<usize>> {
        let comp = self.strongly_connected(within);
        let ncomp = comp.iter().flatten().max().map_or(0, |&c| c + 1);
        let mut leaves = vec![true; ncomp];
        for s in (0..self.len()).filter(|&s| within[s]) {
            for (t, _) in self.row(s) {
                if comp[t] != comp[s] {
                    leaves[comp[s].unwrap()] = false;
                }
            }
        }
        let mut classes: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
        for s in 0..self.len() {
            if let Some(c) = comp[s] {
                if leaves[c] {
                    classes[c].push(s);
                }
            }
        }
        classes.retain(|c| !c.is_empty());
        classes.sort_by_key(|c| c[0]);
        classes
    }

    /// Iterative Tarjan; returns a component id for each state in `within`.
    fn strongly_connected(&self, within: &[bool]) -> Vec<Option<usize>> {
        let n = self.len();
        let mut index = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut on_stack = vec![false; n];
        let mut comp = vec![None; n];
        let mut stack = Vec::new();
        let mut next_index = 0;
        let mut next_comp = 0;

        for root in (0..n).filter(|&s| within[s]) {
            if index[root] != usize::MAX {
                continue;
            }
            // (node, position in its CSR row)
            let mut call = vec![(root, self.offsets[root])];
            index[root] = next_index;
            low[root] = next_index;
            next_index += 1;
            stack.push(root);
            on_stack[root] = true;

            while let Some(&mut (v, ref mut pos)) = call.last_mut() {
                if *pos < self.offsets[v + 1] {
                    let w = self.cols[*pos];
                    *pos += 1;
                    if index[w] == usize::MAX {
                        index[w] = next_index;
                        low[w] = next_index;
                        next_index += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, self.offsets[w]));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    call.pop();
                    if let Some(&(parent, _)) = call.last() {
                        low[parent] = low[parent].min(low[v]);
                    }
                    if low[v] == index[v] {
                        while let Some(w) = stack.pop() {
                            on_stack[w] = false;
                            comp[w] = Some(next_comp);
                            if w == v {
                                break;
                            }
                        }
                        next_comp += 1;
                    }
                }
            }
        }
        comp
    }
}

/// Dense square band of half-width `b` over `n` states.
struct Band {
    n: usize,
    b: usize,
    data: Vec<f64>,
}

impl Band {
    fn new(n: usize, b: usize) -> Self {
        Band {
            n,
            b,
            data: vec![0.0; n * (2 * b + 1)],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.b && i < self.n && j < self.n);
        i * (2 * self.b + 1) + j + self.b - i
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.at(i, j)]
    }

    #[inline]
    fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.at(i, j);
        self.data[k] += v;
    }

    #[inline]
    fn scale(&mut self, i: usize, j: usize, f: f64) {
        let k = self.at(i, j);
        self.data[k] *= f;
    }
}

/// Maps original states to positions in `order`; `usize::MAX` if absent.
fn positions(n: usize, order: &[usize]) -> Vec<usize> {
    let mut pos = vec![usize::MAX; n];
    for (k, &s) in order.iter().enumerate() {
        pos[s] = k;
    }
    pos
}

fn bandwidth(p: &SparseStochastic, order: &[usize], pos: &[usize]) -> usize {
    order
        .iter()
        .enumerate()
        .flat_map(|(k, &s)| {
            p.row(s)
                .filter(|&(t, _)| pos[t] != usize::MAX)
                .map(move |(t, _)| k.abs_diff(pos[t]))
        })
        .max()
        .unwrap_or(0)
}

/// Stationary distribution of `p` restricted to the closed, irreducible set
/// `class`, returned in the order of `class`.
///
/// GTH elimination on the band of the restricted matrix: cost is
/// `O(n b^2)` for `n` states of half-bandwidth `b`.
pub fn gth_stationary(p: &SparseStochastic, class: &[usize]) -> Result<Vec<f64>> {
    let n = class.len();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let pos = positions(p.len(), class);
    let b = bandwidth(p, class, &pos);
    let mut a = Band::new(n, b);
    for (k, &s) in class.iter().enumerate() {
        for (t, v) in p.row(s) {
            if pos[t] != usize::MAX && pos[t] != k {
                a.add(k, pos[t], v);
            }
        }
    }

    for k in (1..n).rev() {
        let lo = k.saturating_sub(b);
        let s: f64 = (lo..k).map(|j| a.get(k, j)).sum();
        if !(s > 0.0) {
            return Err(ModelError::Numerical(format!(
                "GTH pivot {k} of {n} has no outflow; the class is not irreducible"
            )));
        }
        for i in lo..k {
            a.scale(i, k, 1.0 / s);
        }
        for i in lo..k {
            let aik = a.get(i, k);
            if aik == 0.0 {
                continue;
            }
            for j in lo..k {
                let akj = a.get(k, j);
                if akj != 0.0 && j != i {
                    a.add(i, j, aik * akj);
                }
            }
        }
    }

    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        let lo = k.saturating_sub(b);
        pi[k] = (lo..k).map(|i| pi[i] * a.get(i, k)).sum();
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    Ok(pi)
}

/// Stationary distribution of a small dense irreducible stochastic matrix.
pub fn gth_dense(m: &[Vec<f64>]) -> Result<Vec<f64>> {
    let rows = m.iter().map(|row| row.iter().copied().enumerate());
    let p = SparseStochastic::from_rows(rows);
    let all: Vec<usize> = (0..m.len()).collect();
    gth_stationary(&p, &all)
}

/// Probabilities of absorption into each of `classes` starting from `start`,
/// where `start` is transient and `transient` lists every transient state
/// reachable from it.
///
/// State reduction: transient states are eliminated one at a time and their
/// flow is redistributed over the remaining states, leaving the row of
/// `start` proportional to its absorption probabilities.
pub fn absorption_probabilities(
    p: &SparseStochastic,
    transient: &[usize],
    classes: &[Vec<usize>],
    start: usize,
) -> Result<Vec<f64>> {
    let mut order = Vec::with_capacity(transient.len());
    order.push(start);
    order.extend(transient.iter().copied().filter(|&s| s != start));
    let n = order.len();
    let k = classes.len();
    let pos = positions(p.len(), &order);
    let mut class_of = vec![usize::MAX; p.len()];
    for (c, members) in classes.iter().enumerate() {
        for &s in members {
            class_of[s] = c;
        }
    }

    let b = bandwidth(p, &order, &pos);
    let mut a = Band::new(n, b);
    let mut absorb = vec![0.0; n * k];
    for (r, &s) in order.iter().enumerate() {
        for (t, v) in p.row(s) {
            if pos[t] != usize::MAX {
                if pos[t] != r {
                    a.add(r, pos[t], v);
                }
            } else if class_of[t] != usize::MAX {
                absorb[r * k + class_of[t]] += v;
            } else {
                return Err(ModelError::Numerical(format!(
                    "state {s} leads to {t}, which is neither transient nor recurrent"
                )));
            }
        }
    }

    for r in (1..n).rev() {
        let lo = r.saturating_sub(b);
        let out: f64 = (lo..r).map(|j| a.get(r, j)).sum::<f64>()
            + absorb[r * k..(r + 1) * k].iter().sum::<f64>();
        if !(out > 0.0) {
            return Err(ModelError::Numerical(format!(
                "transient state {} has no outflow during state reduction",
                order[r]
            )));
        }
        for i in lo..r {
            let air = a.get(i, r) / out;
            if air == 0.0 {
                continue;
            }
            for j in lo..r {
                let arj = a.get(r, j);
                if arj != 0.0 && j != i {
                    a.add(i, j, air * arj);
                }
            }
            for c in 0..k {
                absorb[i * k + c] += air * absorb[r * k + c];
            }
        }
    }

    let row = &absorb[0..k];
    let total: f64 = row.iter().sum();
    if !(total > 0.0) {
        return Err(ModelError::Numerical(
            "start state never reaches a recurrent class".into(),
        ));
    }
    Ok(row.iter().map(|x| x / total).collect())
}

/// How a limiting distribution was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// A single recurrent class is reachable; its stationary vector by GTH.
    ExactSolve,
    /// Several recurrent classes are reachable; their stationary vectors
    /// weighted by absorption probabilities from the start state.
    AbsorptionMixture,
    /// Lazy power iteration from the start state.
    Iterated,
}

/// Long-run occupancy of the chain started at `start`, i.e. the Cesaro
/// limit of `e_start P^t`, computed exactly.
pub fn limiting_distribution(p: &SparseStochastic, start: usize) -> Result<(Vec<f64>, Provenance)> {
    let reach = p.reachable_from(start);
    let classes = p.closed_classes(&reach);
    let mut v = vec![0.0; p.len()];

    if classes.len() == 1 {
        let class = &classes[0];
        for (&s, x) in class.iter().zip(gth_stationary(p, class)?) {
            v[s] = x;
        }
        return Ok((v, Provenance::ExactSolve));
    }

    let mut recurrent = vec![false; p.len()];
    classes.iter().flatten().for_each(|&s| recurrent[s] = true);
    let transient: Vec<usize> = (0..p.len()).filter(|&s| reach[s] && !recurrent[s]).collect();
    let weights = absorption_probabilities(p, &transient, &classes, start)?;
    for (class, w) in classes.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (&s, x) in class.iter().zip(gth_stationary(p, class)?) {
            v[s] += w * x;
        }
    }
    Ok((v, Provenance::AbsorptionMixture))
}

/// Limit of the lazy chain `(I + P) / 2` from `start`.
///
/// The lazy chain is aperiodic, has the same recurrent classes, stationary
/// vectors and absorption probabilities as `P`, so its limit equals the
/// Cesaro limit of `P`. Stops once successive iterates differ by less than
/// `tol` in L1; otherwise fails with the last residual.
pub fn iterate_limit(p: &SparseStochastic, start: usize, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let mut v = vec![0.0; p.len()];
    v[start] = 1.0;
    let mut delta = f64::INFINITY;
    for _ in 0..max_iter {
        let vp = p.left_mul(&v);
        let next: Vec<f64> = v.iter().zip(&vp).map(|(a, b)| 0.5 * (a + b)).collect();
        delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if delta < tol {
            let total: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= total);
            return Ok(v);
        }
    }
    Err(ModelError::NoConvergence {
        iterations: max_iter,
        residual: delta.max(p.residual(&v)),
    })
}
