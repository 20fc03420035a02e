//! Minimal compressed-sparse-row complex matrices with Kronecker assembly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{re, CMat, CVec, C64};

/// Entries with modulus at or below this are treated as structural zeros.
pub const DROP_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<C64>,
}

impl Csr {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: vec![],
            data: vec![],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![re(1.0); n])
    }

    pub fn diagonal(d: &[C64]) -> Self {
        let n = d.len();
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: d.to_vec(),
        }
    }

    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, C64)>) -> Self {
        trip.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut data: Vec<C64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *data.last_mut().expect("nonempty") += v;
                continue;
            }
            indices.push(c);
            data.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn from_dense(m: &CMat) -> Self {
        let mut trip = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v.norm() > DROP_TOL {
                    trip.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), trip)
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.data[k])))
    }

    pub fn kron(&self, other: &Csr) -> Csr {
        let (n, m) = (other.nrows, other.ncols);
        let mut trip = Vec::with_capacity(self.nnz() * other.nnz());
        for (r1, c1, v1) in self.iter() {
            for (r2, c2, v2) in other.iter() {
                trip.push((r1 * n + r2, c1 * m + c2, v1 * v2));
            }
        }
        Csr::from_triplets(self.nrows * n, self.ncols * m, trip)
    }

    pub fn add(&self, other: &Csr) -> Result<Csr> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} + {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let trip = self.iter().chain(other.iter()).collect();
        Ok(Csr::from_triplets(self.nrows, self.ncols, trip))
    }

    pub fn scale(&self, s: C64) -> Csr {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn adjoint(&self) -> Csr {
        let trip = self.iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        Csr::from_triplets(self.ncols, self.nrows, trip)
    }

    /// Drop explicit entries below the structural-zero tolerance.
    pub fn pruned(&self) -> Csr {
        let trip = self.iter().filter(|t| t.2.norm() > DROP_TOL).collect();
        Csr::from_triplets(self.nrows, self.ncols, trip)
    }

    pub fn matvec(&self, x: &CVec) -> CVec {
        let row = |r: usize| -> C64 {
            (self.indptr[r]..self.indptr[r + 1])
                .map(|k| self.data[k] * x[self.indices[k]])
                .sum()
        };
        let vals: Vec<C64> = if self.nrows >= 4096 {
            (0..self.nrows).into_par_iter().map(row).collect()
        } else {
            (0..self.nrows).map(row).collect()
        };
        CVec::from_vec(vals)
    }

    /// Maximum number of entries above the drop tolerance in any row.
    pub fn max_row_nnz(&self) -> usize {
        (0..self.nrows)
            .map(|r| {
                (self.indptr[r]..self.indptr[r + 1])
                    .filter(|&k| self.data[k].norm() > DROP_TOL)
                    .count()
            })
            .max()
            .unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    fn get(&self, r: usize, c: usize) -> Option<C64> {
        let (lo, hi) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[lo..hi].binary_search(&c).ok().map(|k| self.data[lo + k])
    }

    /// ‖M − M†‖_F / ‖M‖_F, without forming M†.
    pub fn hermitian_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let scale = self.fro_norm();
        if scale == 0.0 {
            return 0.0;
        }
        let sum: f64 = (0..self.nrows)
            .into_par_iter()
            .map(|r| {
                (self.indptr[r]..self.indptr[r + 1])
                    .map(|k| {
                        let (c, v) = (self.indices[k], self.data[k]);
                        match self.get(c, r) {
                            Some(w) => (v - w.conj()).norm_sqr(),
                            // the mirrored entry is never visited
                            None => 2.0 * v.norm_sqr(),
                        }
                    })
                    .sum::<f64>()
            })
            .sum();
        sum.sqrt() / scale
    }

    /// Upper bound on the spectral radius (max absolute row sum).
    pub fn inf_norm(&self) -> f64 {
        (0..self.nrows)
            .map(|r| (self.indptr[r]..self.indptr[r + 1]).map(|k| self.data[k].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// One product c·F₀⊗F₁⊗… of a [`kron_sum`].
#[derive(Debug, Clone)]
pub struct KronTerm<'a> {
    pub coeff: C64,
    pub factors: Vec<&'a Csr>,
}

impl<'a> KronTerm<'a> {
    pub fn new(coeff: C64, factors: Vec<&'a Csr>) -> Self {
        Self { coeff, factors }
    }

    fn shape(&self) -> (usize, usize) {
        self.factors.iter().fold((1, 1), |(r, c), f| (r * f.nrows, c * f.ncols))
    }

    fn push_row(&self, row: usize, out: &mut Vec<(usize, C64)>) {
        let mut digits = vec![0; self.factors.len()];
        let mut rem = row;
        for (d, f) in digits.iter_mut().zip(&self.factors).rev() {
            *d = rem % f.nrows;
            rem /= f.nrows;
        }
        let mut cur = vec![(0usize, self.coeff)];
        for (f, &r) in self.factors.iter().zip(&digits) {
            let span = f.indptr[r]..f.indptr[r + 1];
            cur = cur
                .iter()
                .flat_map(|&(col, v)| span.clone().map(move |k| (col * f.ncols + f.indices[k], v * f.data[k])))
                .collect();
        }
        out.extend(cur);
    }
}

const ASSEMBLY_CHUNK: usize = 1 << 14;

/// Σ_k c_k F_{k,0}⊗F_{k,1}⊗…, assembled row by row so that no intermediate
/// product is stored; entries at or below [`DROP_TOL`] are dropped.
pub fn kron_sum(terms: &[KronTerm]) -> Result<Csr> {
    let (nrows, ncols) = terms
        .first()
        .map(KronTerm::shape)
        .ok_or_else(|| Error::invalid("empty Kronecker sum"))?;
    if let Some(t) = terms.iter().find(|t| t.shape() != (nrows, ncols)) {
        let (r, c) = t.shape();
        return Err(Error::DimensionMismatch(format!("Kronecker term {r}x{c} in a {nrows}x{ncols} sum")));
    }
    let row = |r: usize| -> Vec<(usize, C64)> {
        let mut out = Vec::new();
        for t in terms {
            t.push_row(r, &mut out);
        }
        out.sort_unstable_by_key(|e| e.0);
        let mut merged: Vec<(usize, C64)> = Vec::with_capacity(out.len());
        for (c, v) in out {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|e| e.1.norm() > DROP_TOL);
        merged
    };
    // counting pass first so the value arrays are allocated exactly once
    let counts: Vec<usize> = (0..nrows).into_par_iter().map(|r| row(r).len()).collect();
    let mut indptr = Vec::with_capacity(nrows + 1);
    indptr.push(0);
    for n in &counts {
        indptr.push(indptr.last().expect("nonempty") + n);
    }
    let nnz = *indptr.last().expect("nonempty");
    let mut indices = Vec::with_capacity(nnz);
    let mut data = Vec::with_capacity(nnz);
    for start in (0..nrows).step_by(ASSEMBLY_CHUNK) {
        let rows: Vec<Vec<(usize, C64)>> = (start..(start + ASSEMBLY_CHUNK).min(nrows)).into_par_iter().map(row).collect();
        for (c, v) in rows.into_iter().flatten() {
            indices.push(c);
            data.push(v);
        }
    }
    Ok(Csr {
        nrows,
        ncols,
        indptr,
        indices,
        data,
    })
}
