//! Compressed-row storage for symmetric finite-element matrices.

use crate::mesh::Mesh;

/// Square sparse matrix in compressed row form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the vertex-adjacency pattern of `mesh`.
    pub fn from_mesh(mesh: &Mesh) -> Self {
        let n = mesh.n_vertices();
        let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for tri in mesh.triangles() {
            for &a in tri {
                for &b in tri {
                    if a != b {
                        rows[a].push(b);
                    }
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        row_ptr.push(0);
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
            col.extend_from_slice(r);
            row_ptr.push(col.len());
        }
        let val = vec![0.0; col.len()];
        Self { n, row_ptr, col, val }
    }

    /// Matrix from rows of `(column, value)` pairs with sorted, unique columns.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for r in rows {
            for (c, v) in r {
                col.push(c);
                val.push(v);
            }
            row_ptr.push(col.len());
        }
        Self { n, row_ptr, col, val }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col[r.clone()].iter().copied().zip(self.val[r].iter().copied())
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let r = &self.col[self.row_ptr[i]..self.row_ptr[i + 1]];
        r.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.val[k])
    }

    /// Adds `v` to entry (i, j); the entry must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.position(i, j).expect("entry outside sparsity pattern");
        self.val[k] += v;
    }

    /// Scatters a 3×3 element matrix.
    pub fn add_element(&mut self, tri: &[usize; 3], local: &[[f64; 3]; 3]) {
        for a in 0..3 {
            for b in 0..3 {
                if local[a][b] != 0.0 {
                    self.add(tri[a], tri[b], local[a][b]);
                }
            }
        }
    }

    /// `self += s · other` for matrices with identical patterns.
    pub fn add_scaled(&mut self, s: f64, other: &CsrMatrix) {
        assert_eq!(self.col, other.col, "patterns differ");
        for (a, b) in self.val.iter_mut().zip(&other.val) {
            *a += s * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.val.iter_mut().for_each(|v| *v *= s);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            *yi = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest |a_ij − a_ji|.
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m = m.max((v - self.get(j, i)).abs());
            }
        }
        m
    }

    /// Sum of all entries.
    pub fn total(&self) -> f64 {
        self.val.iter().sum()
    }

    /// Quadratic form xᵀ A y.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.mul_vec(y)).map(|(a, b)| a * b).sum()
    }

    /// Principal submatrix on `keep` (given as old index → new index map).
    pub fn submatrix(&self, map: &[Option<usize>], n_new: usize) -> CsrMatrix {
        let mut rows = vec![Vec::new(); n_new];
        for i in 0..self.n {
            if let Some(ni) = map[i] {
                rows[ni] = self.row(i).filter_map(|(j, v)| map[j].map(|nj| (nj, v))).collect();
            }
        }
        CsrMatrix::from_rows(rows)
    }
}
