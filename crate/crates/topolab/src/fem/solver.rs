//! Linear solvers for the constrained symmetric positive definite systems.

use serde::{Deserialize, Serialize};

use super::sparse::CsrMatrix;
use crate::{Error, Result};

/// Vertex count below which `Auto` uses the direct factorization.
pub const DIRECT_LIMIT: usize = 20_000;

/// Relative residual target of the conjugate gradient solver.
pub const CG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    #[default]
    Auto,
    Direct,
    Cg,
}

/// Jacobi-preconditioned conjugate gradients.
///
/// Stops when ‖r‖ ≤ tol·‖b‖; fails after `max(20√N, 100)` iterations.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = a.n();
    let mut x = vec![0.0; n];
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok(x);
    }
    let dinv: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let max_iter = ((20.0 * (n as f64).sqrt()) as usize).max(100);
    for _ in 0..max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::NoConvergence("matrix is not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= tol * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence(format!("conjugate gradients exceeded {max_iter} iterations")))
}

/// Reverse Cuthill-McKee ordering; `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n();
    let adj: Vec<Vec<usize>> = (0..n).map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect()).collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    // Eccentricity of `start` and a minimum-degree node on its last level.
    let bfs = |start: usize| {
        let mut level = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::from([start]);
        level[start] = 0;
        let mut seen = vec![start];
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                    seen.push(w);
                }
            }
        }
        let ecc = seen.iter().map(|&v| level[v]).max().unwrap_or(0);
        let far = seen.iter().copied().filter(|&v| level[v] == ecc).min_by_key(|&v| (degree[v], v)).unwrap_or(start);
        (ecc, far, seen)
    };
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        let (_, _, component) = bfs(seed);
        let mut start = component.iter().copied().min_by_key(|&v| (degree[v], v)).unwrap_or(seed);
        let (mut ecc, mut far, _) = bfs(start);
        for _ in 0..5 {
            let (e, f, _) = bfs(far);
            if e <= ecc {
                break;
            }
            start = far;
            ecc = e;
            far = f;
        }
        let mut queue = std::collections::VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| (degree[w], w));
            for w in nb {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope (skyline) Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (old, &i) in inv.iter().enumerate() {
            for (j_old, _) in a.row(old) {
                let j = inv[j_old];
                if j < first[i] {
                    first[i] = j;
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + i - first[i] + 1);
        }
        let mut data = vec![0.0; start[n]];
        for (old, &i) in inv.iter().enumerate() {
            for (j_old, v) in a.row(old) {
                let j = inv[j_old];
                if j <= i {
                    data[start[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let (ri, rj) = (start[i], start[j]);
                let s: f64 = data[ri + k0 - fi..ri + j - fi]
                    .iter()
                    .zip(&data[rj + k0 - fj..rj + j - fj])
                    .map(|(a, b)| a * b)
                    .sum();
                let ljj = data[rj + j - fj];
                data[ri + j - fi] = (data[ri + j - fi] - s) / ljj;
            }
            let row = &data[start[i]..start[i] + i - fi];
            let d = data[start[i] + i - fi] - row.iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0) {
                return Err(Error::NoConvergence("matrix is not positive definite".into()));
            }
            data[start[i] + i - fi] = d.sqrt();
        }
        Ok(Self { perm, first, start, data })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i] + i - fi];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - s) / self.data[self.start[i] + i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            y[i] /= self.data[self.start[i] + i - fi];
            let xi = y[i];
            let row = &self.data[self.start[i]..self.start[i] + i - fi];
            for (yk, l) in y[fi..i].iter_mut().zip(row) {
                *yk -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }
}

enum Backend {
    Direct(EnvelopeCholesky),
    Cg(CsrMatrix, f64),
}

/// A system matrix with Dirichlet rows eliminated, ready for repeated solves.
pub struct PreparedSolver {
    full: CsrMatrix,
    free_map: Vec<Option<usize>>,
    free: Vec<usize>,
    backend: Backend,
}

impl PreparedSolver {
    /// `fixed[i]` marks Dirichlet vertices.
    pub fn new(matrix: CsrMatrix, fixed: &[bool], choice: SolverChoice) -> Result<Self> {
        let mut free_map = vec![None; matrix.n()];
        let mut free = Vec::new();
        for i in 0..matrix.n() {
            if !fixed[i] {
                free_map[i] = Some(free.len());
                free.push(i);
            }
        }
        let reduced = matrix.submatrix(&free_map, free.len());
        let direct = match choice {
            SolverChoice::Auto => matrix.n() < DIRECT_LIMIT,
            SolverChoice::Direct => true,
            SolverChoice::Cg => false,
        };
        let backend = if direct {
            Backend::Direct(EnvelopeCholesky::factor(&reduced)?)
        } else {
            Backend::Cg(reduced, CG_TOL)
        };
        Ok(Self { full: matrix, free_map, free, backend })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.full
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        self.free_map[i].is_none()
    }

    /// Solves `A u = rhs` on free vertices with `u = boundary` on fixed ones.
    /// `boundary` may be `None` for homogeneous data.
    pub fn solve(&self, rhs: &[f64], boundary: Option<&[f64]>) -> Result<Vec<f64>> {
        let n = self.full.n();
        let mut g = vec![0.0; n];
        if let Some(bd) = boundary {
            for i in 0..n {
                if self.free_map[i].is_none() {
                    g[i] = bd[i];
                }
            }
        }
        let ag = if boundary.is_some() { self.full.mul_vec(&g) } else { vec![0.0; n] };
        let b: Vec<f64> = self.free.iter().map(|&i| rhs[i] - ag[i]).collect();
        let x = match &self.backend {
            Backend::Direct(c) => c.solve(&b),
            Backend::Cg(a, tol) => conjugate_gradient(a, &b, *tol)?,
        };
        let mut u = g;
        for (k, &i) in self.free.iter().enumerate() {
            u[i] = x[k];
        }
        Ok(u)
    }
}
