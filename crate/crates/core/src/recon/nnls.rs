//! Lawson–Hanson active-set NNLS.
//!
//! Works on the normal equations: `AᵀA` is formed once per coding matrix and
//! the passive-set system is solved through a Cholesky factor that is
//! updated in place when a variable enters (row append) or leaves (Givens
//! downdate). One outer iteration costs `O(p²)` plus an `O(n²)` dual update.
//!
//! Two shortcuts keep thousands of 127-variable solves per trial cheap: the
//! passive set is seeded from the unconstrained solution, and S-matrix Gram
//! matrices (`dI + cJ`) are solved in closed form instead of factored.

use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnlsOptions {
    /// Dual feasibility tolerance, relative to `‖A‖_F ‖b‖₂`.
    pub rel_tol: f64,
    /// Cap on outer iterations (variables entering the passive set).
    /// `None` means `3n`.
    pub max_iter: Option<usize>,
    /// Seed the passive set from the unconstrained solution instead of
    /// starting from `x = 0`. The optimum is the same; the iteration count
    /// usually drops from about `n` to a handful.
    pub warm_start: bool,
}

impl Default for NnlsOptions {
    fn default() -> Self {
        NnlsOptions {
            rel_tol: 1e-10,
            max_iter: None,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    /// Dual vector `Aᵀ(b − Ax)` at the returned point.
    pub dual: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    /// True when the iteration cap stopped the solve.
    pub capped: bool,
    /// Absolute tolerance the dual was tested against.
    pub tolerance: f64,
}

/// Cholesky factor of `G[P, P]` for an ordered passive set `P`.
struct Factor {
    stride: usize,
    size: usize,
    l: Vec<f64>,
}

// Triangular loops read clearer with explicit indices.
#[allow(clippy::needless_range_loop)]
impl Factor {
    fn new(n: usize) -> Self {
        Factor {
            stride: n,
            size: 0,
            l: vec![0.0; n * n],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.stride + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.l[i * self.stride + j] = v;
    }

    /// Append variable `j`. Fails when its column is numerically dependent on
    /// the current passive columns.
    fn push(&mut self, gram: &Matrix, passive: &[usize], j: usize) -> bool {
        let p = self.size;
        let mut row = vec![0.0; p];
        for k in 0..p {
            let mut v = gram[(passive[k], j)];
            for t in 0..k {
                v -= self.at(k, t) * row[t];
            }
            row[k] = v / self.at(k, k);
        }
        let diag = gram[(j, j)];
        let d2 = diag - row.iter().map(|v| v * v).sum::<f64>();
        if !(d2 > 1e-12 * diag) {
            return false;
        }
        for (t, v) in row.into_iter().enumerate() {
            self.set(p, t, v);
        }
        self.set(p, p, d2.sqrt());
        self.size += 1;
        true
    }

    /// Drop the variable at position `q`.
    fn remove(&mut self, q: usize) {
        let p = self.size;
        for r in q..p - 1 {
            for t in 0..=r + 1 {
                let v = self.at(r + 1, t);
                self.set(r, t, v);
            }
        }
        // Rows q..p-1 now carry one superdiagonal entry; rotate it away.
        for r in q..p - 1 {
            let a = self.at(r, r);
            let b = self.at(r, r + 1);
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            for i in r..p - 1 {
                let x = self.at(i, r);
                let y = self.at(i, r + 1);
                self.set(i, r, c * x + s * y);
                self.set(i, r + 1, -s * x + c * y);
            }
            self.set(r, r + 1, 0.0);
        }
        for t in 0..p {
            self.set(p - 1, t, 0.0);
        }
        self.size -= 1;
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let p = self.size;
        let mut y = rhs.to_vec();
        for i in 0..p {
            let mut v = y[i];
            for t in 0..i {
                v -= self.at(i, t) * y[t];
            }
            y[i] = v / self.at(i, i);
        }
        for i in (0..p).rev() {
            let mut v = y[i];
            for t in i + 1..p {
                v -= self.at(t, i) * y[t];
            }
            y[i] = v / self.at(i, i);
        }
        y
    }
}

/// Gram matrices of the form `dI + cJ` (any S-matrix: `SᵀS = ((n+1)/4)(I + J)`)
/// restrict to `dI + cJ` on every passive set, which Sherman–Morrison solves
/// in `O(p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Compound {
    d: f64,
    c: f64,
}

impl Compound {
    fn detect(gram: &Matrix) -> Option<Self> {
        let n = gram.nrows();
        if n < 2 {
            return None;
        }
        let d = gram[(0, 0)] - gram[(0, 1)];
        let c = gram[(0, 1)];
        let tol = 1e-13 * gram.amax();
        if !(d > tol) || c < 0.0 {
            return None;
        }
        for j in 0..n {
            for i in 0..n {
                let want = if i == j { c + d } else { c };
                if (gram[(i, j)] - want).abs() > tol {
                    return None;
                }
            }
        }
        Some(Compound { d, c })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let p = rhs.len() as f64;
        let shift = self.c * rhs.iter().sum::<f64>() / (self.d + self.c * p);
        rhs.iter().map(|r| (r - shift) / self.d).collect()
    }
}

/// Passive-set linear system `G[P, P] z = r`.
enum System {
    Dense(Factor),
    Compound(Compound),
}

impl System {
    fn fresh(&mut self, n: usize) {
        if let System::Dense(f) = self {
            *f = Factor::new(n);
        }
    }

    fn push(&mut self, gram: &Matrix, passive: &[usize], j: usize) -> bool {
        match self {
            System::Dense(f) => f.push(gram, passive, j),
            System::Compound(_) => true,
        }
    }

    fn remove(&mut self, q: usize) {
        if let System::Dense(f) = self {
            f.remove(q);
        }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match self {
            System::Dense(f) => f.solve(rhs),
            System::Compound(c) => c.solve(rhs),
        }
    }
}

/// Reusable solver for many right-hand sides against one matrix `A`.
pub struct NnlsSolver<'a> {
    a: &'a Matrix,
    gram: Matrix,
    a_norm: f64,
    compound: Option<Compound>,
}

impl<'a> NnlsSolver<'a> {
    pub fn new(a: &'a Matrix) -> Self {
        let gram = a.transpose() * a;
        NnlsSolver {
            a,
            compound: Compound::detect(&gram),
            gram,
            a_norm: a.norm(),
        }
    }

    /// Ignore any Gram structure and always use the Cholesky path.
    pub fn dense(a: &'a Matrix) -> Self {
        NnlsSolver {
            compound: None,
            ..Self::new(a)
        }
    }

    /// `w = Aᵀb − Gx` with `x` supported on `passive`.
    fn dual(&self, atb: &[f64], x: &[f64], passive: &[usize], w: &mut [f64]) {
        match self.compound {
            Some(Compound { d, c }) => {
                let total: f64 = passive.iter().map(|&i| x[i]).sum();
                for (j, wj) in w.iter_mut().enumerate() {
                    *wj = atb[j] - d * x[j] - c * total;
                }
            }
            None => {
                for (j, wj) in w.iter_mut().enumerate() {
                    let gx: f64 = passive.iter().map(|&i| self.gram[(j, i)] * x[i]).sum();
                    *wj = atb[j] - gx;
                }
            }
        }
    }
    pub fn solve(&self, b: &[f64], opts: &NnlsOptions) -> NnlsSolution {
        let atb: Vec<f64> = (0..self.a.ncols())
            .map(|j| self.a.column(j).iter().zip(b).map(|(x, y)| x * y).sum())
            .collect();
        self.solve_with_atb(b, &atb, opts)
    }

    /// Solve given a precomputed `Aᵀb`.
    pub fn solve_with_atb(&self, b: &[f64], atb: &[f64], opts: &NnlsOptions) -> NnlsSolution {
        let n = self.a.ncols();
        let max_iter = opts.max_iter.unwrap_or(3 * n);
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tol = opts.rel_tol * self.a_norm * b_norm;

        let mut x = vec![0.0; n];
        let mut w = atb.to_vec();
        let mut passive: Vec<usize> = Vec::with_capacity(n);
        let mut in_p = vec![false; n];
        let mut skip = vec![false; n];
        let mut factor = match self.compound {
            Some(c) => System::Compound(c),
            None => System::Dense(Factor::new(n)),
        };
        let mut iterations = 0;
        let mut capped = false;

        if opts.warm_start {
            self.warm_start(atb, &mut x, &mut passive, &mut in_p, &mut factor);
            self.dual(atb, &x, &passive, &mut w);
        }

        'outer: while passive.len() < n {
            let Some(j) = (0..n)
                .filter(|&j| !in_p[j] && !skip[j])
                .max_by(|&a, &b| w[a].total_cmp(&w[b]).then(b.cmp(&a)))
            else {
                break;
            };
            if !(w[j] > tol) {
                break;
            }
            if iterations >= max_iter {
                capped = true;
                break;
            }
            if !factor.push(&self.gram, &passive, j) {
                skip[j] = true;
                continue;
            }
            passive.push(j);
            in_p[j] = true;
            iterations += 1;

            let mut first = true;
            loop {
                let rhs: Vec<f64> = passive.iter().map(|&i| atb[i]).collect();
                let z = factor.solve(&rhs);
                if first && *z.last().unwrap() <= 0.0 {
                    // Entering variable cannot move off zero: reject it until
                    // the point changes.
                    factor.remove(passive.len() - 1);
                    passive.pop();
                    in_p[j] = false;
                    skip[j] = true;
                    continue 'outer;
                }
                first = false;
                if z.iter().all(|&v| v > 0.0) {
                    for (k, &i) in passive.iter().enumerate() {
                        x[i] = z[k];
                    }
                    break;
                }
                // Step toward z until the first passive coordinate hits zero.
                let mut alpha = f64::INFINITY;
                let mut hit = 0;
                for (k, &i) in passive.iter().enumerate() {
                    if z[k] <= 0.0 {
                        let t = x[i] / (x[i] - z[k]);
                        if t < alpha {
                            alpha = t;
                            hit = k;
                        }
                    }
                }
                for (k, &i) in passive.iter().enumerate() {
                    x[i] += alpha * (z[k] - x[i]);
                }
                for k in (0..passive.len()).rev() {
                    let i = passive[k];
                    if k == hit || x[i] <= 0.0 {
                        x[i] = 0.0;
                        in_p[i] = false;
                        factor.remove(k);
                        passive.remove(k);
                    }
                }
                if passive.is_empty() {
                    break;
                }
            }

            self.dual(atb, &x, &passive, &mut w);
            skip.iter_mut().for_each(|s| *s = false);
        }

        let mut residual = b.to_vec();
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (r, v) in residual.iter_mut().enumerate() {
                    *v -= self.a[(r, i)] * xi;
                }
            }
        }
        let dual = (0..n)
            .map(|j| {
                self.a
                    .column(j)
                    .iter()
                    .zip(&residual)
                    .map(|(a, r)| a * r)
                    .sum()
            })
            .collect();
        NnlsSolution {
            x,
            dual,
            iterations,
            residual_norm: residual.iter().map(|v| v * v).sum::<f64>().sqrt(),
            capped,
            tolerance: tol,
        }
    }
}

impl NnlsSolver<'_> {
    /// Start from the least-squares solution on `P = {all}` and shrink `P`
    /// to the coordinates that stay positive until the restricted solution
    /// is strictly positive. Leaves `x` feasible and optimal on `P`, which
    /// is all the outer loop needs.
    fn warm_start(
        &self,
        atb: &[f64],
        x: &mut [f64],
        passive: &mut Vec<usize>,
        in_p: &mut [bool],
        factor: &mut System,
    ) {
        let n = x.len();
        let mut candidates: Vec<usize> = (0..n).collect();
        loop {
            factor.fresh(n);
            passive.clear();
            for &j in &candidates {
                if factor.push(&self.gram, passive, j) {
                    passive.push(j);
                }
            }
            if passive.is_empty() {
                break;
            }
            let rhs: Vec<f64> = passive.iter().map(|&i| atb[i]).collect();
            let z = factor.solve(&rhs);
            if z.iter().all(|&v| v > 0.0) {
                for (k, &i) in passive.iter().enumerate() {
                    x[i] = z[k];
                    in_p[i] = true;
                }
                return;
            }
            candidates = passive
                .iter()
                .zip(&z)
                .filter(|(_, &v)| v > 0.0)
                .map(|(&i, _)| i)
                .collect();
        }
        factor.fresh(n);
        passive.clear();
    }
}

/// `argmin ‖Ax − b‖₂` subject to `x ≥ 0`.
pub fn nnls(a: &Matrix, b: &[f64], opts: &NnlsOptions) -> NnlsSolution {
    NnlsSolver::new(a).solve(b, opts)
}
