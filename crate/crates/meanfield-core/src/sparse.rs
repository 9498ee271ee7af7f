//! Compressed sparse row matrices over `C64`.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{CMat, C64, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Csr {
    /// Builds a square matrix from its columns, given as `(row, value)`
    /// lists. Duplicate rows within a column are summed.
    pub fn from_columns(dim: usize, columns: &[Vec<(usize, C64)>]) -> Self {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for (j, col) in columns.iter().enumerate() {
            for &(i, v) in col {
                rows[i].push((j, v));
            }
        }
        Self::from_rows(dim, rows)
    }

    pub fn from_rows(dim: usize, mut rows: Vec<Vec<(usize, C64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows.iter_mut() {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(cols.len());
        }
        Csr { dim, row_ptr, cols, vals }
    }

    pub fn zeros(dim: usize) -> Self {
        Csr { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim];
        self.mul_vec_into(v, &mut out);
        out
    }

    pub fn mul_vec_into(&self, v: &[C64], out: &mut [C64]) {
        for i in 0..self.dim {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            out[i] = acc;
        }
    }

    /// `out += s * self * v`
    pub fn mul_vec_acc(&self, s: C64, v: &[C64], out: &mut [C64]) {
        for i in 0..self.dim {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            out[i] += s * acc;
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.cols[k], self.vals[k]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(p) => self.vals[range.start + p],
            Err(_) => ZERO,
        }
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for (i, j, v) in self.entries() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn adjoint(&self) -> Csr {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); self.dim];
        for (i, j, v) in self.entries() {
            rows[j].push((i, v.conj()));
        }
        Csr::from_rows(self.dim, rows)
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: C64, other: &Csr, b: C64) -> Csr {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); self.dim];
        for (i, j, v) in self.entries() {
            rows[i].push((j, a * v));
        }
        for (i, j, v) in other.entries() {
            rows[i].push((j, b * v));
        }
        Csr::from_rows(self.dim, rows)
    }

    /// `diag(d) * self`
    pub fn scale_rows(&self, d: &[f64]) -> Csr {
        let mut out = self.clone();
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.vals[k] *= d[i];
            }
        }
        out
    }

    /// `self * diag(d)`
    pub fn scale_cols(&self, d: &[f64]) -> Csr {
        let mut out = self.clone();
        for (k, c) in self.cols.iter().enumerate() {
            out.vals[k] *= d[*c];
        }
        out
    }

    pub fn scale(&self, s: C64) -> Csr {
        let mut out = self.clone();
        for v in out.vals.iter_mut() {
            *v *= s;
        }
        out
    }

    /// Sum of `s_i * m_i` over all terms.
    pub fn linear_combination(dim: usize, terms: &[(C64, &Csr)]) -> Csr {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for (s, m) in terms {
            for (i, j, v) in m.entries() {
                rows[i].push((j, *s * v));
            }
        }
        Csr::from_rows(dim, rows)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry of `self - self†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, j, v) in self.entries() {
            worst = worst.max((v - self.get(j, i).conj()).norm());
        }
        worst
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| self.vals[k].norm()).sum())
            .fold(0.0, f64::max)
    }
}

/// `exp(-i t H) v` by a truncated Taylor series applied in substeps small
/// enough that each series converges quickly.
pub fn expm_multiply(h: &Csr, t: f64, v: &[C64]) -> Vec<C64> {
    let norm = h.norm_inf() * t.abs();
    let steps = (libm::ceil(norm / 2.0) as usize).max(1);
    let tau = t / steps as f64;
    let mut x = v.to_vec();
    let coeff = C64::new(0.0, -tau);
    for _ in 0..steps {
        let mut term = x.clone();
        let mut sum = x.clone();
        for k in 1..60 {
            let next = h.mul_vec(&term);
            let c = coeff / k as f64;
            term = next.into_iter().map(|z| z * c).collect();
            let tn = crate::linalg::vnorm(&term);
            for (s, t) in sum.iter_mut().zip(&term) {
                *s += t;
            }
            if tn <= 1e-17 * crate::linalg::vnorm(&sum) {
                break;
            }
        }
        x = sum;
    }
    x
}
