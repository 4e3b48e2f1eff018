//! Dense and sparse real linear algebra used by the solvers.
//!
//! Dense matrices are row-major. The symmetric eigensolver is a Householder
//! tridiagonalisation followed by implicit QL; it works on the transposed
//! accumulator so that every inner loop walks contiguous memory.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::fmath::{abs, hypot, sqrt};

#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Mat { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ · x`.
    pub fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(xi, self.row(i), &mut y);
            }
        }
        y
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        self.matmul_t(&other.transpose())
    }

    /// `self · otherᵀ`, the cache-friendly product (rows against rows).
    pub fn matmul_t(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols);
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            let out_row = &mut out.data[i * other.rows..(i + 1) * other.rows];
            for (j, o) in out_row.iter_mut().enumerate() {
                *o = dot(a, other.row(j));
            }
        }
        out
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| if abs(v) > m { abs(v) } else { m })
    }

    /// `max |A - Aᵀ|`.
    pub fn symmetry_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                r = r.max(abs(self[(i, j)] - self[(j, i)]));
            }
        }
        r
    }

    /// Restrict to the index subset `idx` on both sides.
    pub fn submatrix(&self, idx: &[usize]) -> Mat {
        Mat::from_fn(idx.len(), idx.len(), |a, b| self[(idx[a], idx[b])])
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_assign(&mut self, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four accumulators let the compiler vectorise
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// `y += alpha * x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm(x: &[f64]) -> f64 {
    sqrt(dot(x, x))
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMat {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMat {
    /// Build from unsorted triplets; duplicates are summed and exact zeros dropped.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_counts = vec![0usize; n_rows];
        for (r, c, v) in trip {
            assert!(r < n_rows && c < n_cols, "triplet out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                row_counts[r] += 1;
                last = Some((r, c));
            }
        }
        // drop cancelled entries
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_val = Vec::with_capacity(values.len());
        let mut pos = 0;
        for (r, &cnt) in row_counts.iter().enumerate() {
            let mut kept = 0;
            for k in pos..pos + cnt {
                if values[k] != 0.0 {
                    keep_idx.push(indices[k]);
                    keep_val.push(values[k]);
                    kept += 1;
                }
            }
            pos += cnt;
            indptr[r + 1] = indptr[r] + kept;
        }
        CsrMat { n_rows, n_cols, indptr, indices: keep_idx, values: keep_val }
    }

    /// Sparse copy of a dense matrix, dropping exact zeros.
    pub fn from_dense(m: &Mat) -> Self {
        let mut trip = Vec::new();
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        CsrMat::from_triplets(m.rows(), m.cols(), trip)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *yi = s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, v) in self.row_entries(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn transpose(&self) -> CsrMat {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            for (j, v) in self.row_entries(i) {
                trip.push((j, i, v));
            }
        }
        CsrMat::from_triplets(self.n_cols, self.n_rows, trip)
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &CsrMat) -> CsrMat {
        assert_eq!(self.n_cols, other.n_rows);
        let mut trip = Vec::new();
        let mut acc = vec![0.0; other.n_cols];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..self.n_rows {
            for (k, a) in self.row_entries(i) {
                for (j, b) in other.row_entries(k) {
                    if acc[j] == 0.0 {
                        touched.push(j);
                    }
                    acc[j] += a * b;
                    if acc[j] == 0.0 {
                        // exact cancellation; keep tracking via a tiny sentinel
                        acc[j] = f64::MIN_POSITIVE;
                    }
                }
            }
            for &j in &touched {
                let v = acc[j];
                if v != f64::MIN_POSITIVE {
                    trip.push((i, j, v));
                }
                acc[j] = 0.0;
            }
            touched.clear();
        }
        CsrMat::from_triplets(self.n_rows, other.n_cols, trip)
    }

    /// `V · self · Vᵀ` where the rows of `v` are basis vectors.
    pub fn similarity_rows(&self, v: &Mat) -> Mat {
        assert_eq!(v.cols(), self.n_rows);
        // (self · vᵀ)ᵀ = v · selfᵀ ; rows of tmp are self applied to each row of v
        let d = v.rows();
        let mut tmp = Mat::zeros(d, self.n_rows);
        for a in 0..d {
            let y = self.matvec(v.row(a));
            tmp.row_mut(a).copy_from_slice(&y);
        }
        v.matmul_t(&tmp)
    }
}

/// Result of a symmetric eigendecomposition: ascending values, row `j` of
/// `vectors` is the eigenvector belonging to `values[j]`.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

const MAX_QL_SWEEPS: usize = 60;

/// Full eigendecomposition of a real symmetric matrix.
pub fn sym_eigen(a: &Mat) -> Result<SymEigen> {
    assert_eq!(a.rows(), a.cols(), "matrix must be square");
    let n = a.rows();
    if n == 0 {
        return Ok(SymEigen { values: Vec::new(), vectors: Mat::zeros(0, 0) });
    }
    let mut w = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut w, &mut d, &mut e);
    tql2(&mut d, &mut e, Some(&mut w))?;
    Ok(SymEigen { values: d, vectors: w })
}

/// Eigenvalues only of a real symmetric matrix.
pub fn sym_eigenvalues(a: &Mat) -> Result<Vec<f64>> {
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut w = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut w, &mut d, &mut e);
    tql2(&mut d, &mut e, None)?;
    Ok(d)
}

/// Eigen-decomposition of a symmetric tridiagonal matrix given its diagonal
/// and sub-diagonal (`offdiag[i]` couples `i` and `i+1`).
pub fn tridiag_eigen(diag: &[f64], offdiag: &[f64], want_vectors: bool) -> Result<SymEigen> {
    let n = diag.len();
    assert!(offdiag.len() + 1 == n || (n == 0 && offdiag.is_empty()));
    let mut d = diag.to_vec();
    // tql2 expects e[i] to couple i-1 and i
    let mut e = vec![0.0; n];
    for i in 1..n {
        e[i] = offdiag[i - 1];
    }
    if want_vectors {
        let mut z = Mat::identity(n);
        tql2(&mut d, &mut e, Some(&mut z))?;
        Ok(SymEigen { values: d, vectors: z })
    } else {
        tql2(&mut d, &mut e, None)?;
        Ok(SymEigen { values: d, vectors: Mat::zeros(0, 0) })
    }
}

// Householder reduction. `w` holds the transpose of the accumulated
// orthogonal transform; on exit row j of `w` is the j-th column of Q.
fn tred2(w: &mut Mat, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    let c = n;
    let wd = w.as_mut_slice();
    for j in 0..n {
        d[j] = wd[j * c + (n - 1)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += abs(*dk);
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = wd[j * c + (i - 1)];
                wd[j * c + i] = 0.0;
                wd[i * c + j] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                let f = d[j];
                wd[i * c + j] = f;
                let row_j = j * c;
                let mut g = e[j] + wd[row_j + j] * f;
                for k in (j + 1)..i {
                    let wjk = wd[row_j + k];
                    g += wjk * d[k];
                    e[k] += wjk * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                let row_j = j * c;
                for k in j..i {
                    wd[row_j + k] -= f * e[k] + g * d[k];
                }
                d[j] = wd[row_j + (i - 1)];
                wd[row_j + i] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        wd[i * c + (n - 1)] = wd[i * c + i];
        wd[i * c + i] = 1.0;
        let h = d[i + 1];
        let next = (i + 1) * c;
        if h != 0.0 {
            for k in 0..=i {
                d[k] = wd[next + k] / h;
            }
            for j in 0..=i {
                let row_j = j * c;
                let mut g = 0.0;
                for k in 0..=i {
                    g += wd[next + k] * wd[row_j + k];
                }
                for k in 0..=i {
                    wd[row_j + k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            wd[next + k] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = wd[j * c + (n - 1)];
        wd[j * c + (n - 1)] = 0.0;
    }
    wd[(n - 1) * c + (n - 1)] = 1.0;
    e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e); rotations are applied to rows of `z`.
fn tql2(d: &mut [f64], e: &mut [f64], mut z: Option<&mut Mat>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(abs(d[l]) + abs(e[l]));
        let mut m = l;
        while m < n {
            if abs(e[m]) <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_SWEEPS {
                    return Err(Error::NoConvergence { what: "tridiagonal QL", residual: abs(e[l]) });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = z.as_deref_mut() {
                        let cols = z.cols();
                        let (lo, hi) = z.as_mut_slice().split_at_mut((i + 1) * cols);
                        let zi = &mut lo[i * cols..];
                        let zi1 = &mut hi[..cols];
                        for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                            let hb = *b;
                            *b = s * *a + c * hb;
                            *a = c * *a - s * hb;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if abs(e[l]) <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    // selection sort keeps row swaps to at most n
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            if let Some(z) = z.as_deref_mut() {
                let cols = z.cols();
                let data = z.as_mut_slice();
                for col in 0..cols {
                    data.swap(i * cols + col, k * cols + col);
                }
            }
        }
    }
    Ok(())
}

/// `S^{-1/2}` of a symmetric positive-definite matrix, refusing when the
/// smallest eigenvalue falls below `min_eig`.
pub fn inverse_sqrt_spd(s: &Mat, min_eig: f64) -> Result<Mat> {
    let eig = sym_eigen(s)?;
    let n = s.rows();
    let lo = eig.values.first().copied().unwrap_or(1.0);
    if lo < min_eig {
        return Err(Error::RankDeficient { min_eigenvalue: lo });
    }
    let mut scaled = eig.vectors.clone();
    for j in 0..n {
        let f = 1.0 / sqrt(sqrt(eig.values[j]));
        for v in scaled.row_mut(j) {
            *v *= f;
        }
    }
    // Σ_j v_j v_jᵀ λ_j^{-1/2} = (scaled)ᵀ (scaled)
    Ok(scaled.transpose().matmul_t(&scaled.transpose()))
}

/// Lowest `k` eigenpairs of a symmetric operator given only through
/// matrix-vector products. Lanczos with full reorthogonalisation, explicit
/// restarts and locking of converged vectors.
pub fn lanczos_lowest(
    n: usize,
    k: usize,
    apply: &dyn Fn(&[f64], &mut [f64]),
    tol: f64,
    max_restarts: usize,
) -> Result<SymEigen> {
    assert!(k >= 1 && k <= n);
    let krylov = (2 * k + 40).min(n);
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut locked_vals: Vec<f64> = Vec::new();
    // deterministic start: smooth vector with all components nonzero
    let mut start: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * crate::fmath::sin(1.3 * i as f64 + 0.7)).collect();
    let mut worst = f64::INFINITY;
    let mut y = vec![0.0; n];
    for _ in 0..=max_restarts {
        let want = k - locked.len();
        if want == 0 {
            break;
        }
        let m = krylov.min(n - locked.len());
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        let mut q = start.clone();
        orthogonalise(&mut q, &locked);
        let nq = norm(&q);
        if nq < 1e-300 {
            break;
        }
        q.iter_mut().for_each(|v| *v /= nq);
        for j in 0..m {
            apply(&q, &mut y);
            let a = dot(&q, &y);
            alpha.push(a);
            basis.push(q.clone());
            if j + 1 == m {
                break;
            }
            let mut r = y.clone();
            // full reorthogonalisation (twice is enough)
            for _ in 0..2 {
                orthogonalise(&mut r, &locked);
                orthogonalise(&mut r, &basis);
            }
            let b = norm(&r);
            if b < 1e-12 {
                break;
            }
            beta.push(b);
            q = r.into_iter().map(|v| v / b).collect();
        }
        let t = tridiag_eigen(&alpha, &beta[..alpha.len() - 1], true)?;
        // Ritz vectors for the lowest `want`
        let mut new_locked = 0;
        let mut restart = vec![0.0; n];
        worst = 0.0;
        for idx in 0..want.min(alpha.len()) {
            let coeffs = t.vectors.row(idx);
            let mut v = vec![0.0; n];
            for (c, b) in coeffs.iter().zip(&basis) {
                axpy(*c, b, &mut v);
            }
            let nv = norm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            apply(&v, &mut y);
            let theta = t.values[idx];
            let res = y.iter().zip(&v).map(|(a, b)| (a - theta * b) * (a - theta * b)).sum::<f64>();
            let res = sqrt(res);
            let scale = abs(theta).max(1.0);
            if res <= tol * scale && idx == new_locked {
                locked.push(v);
                locked_vals.push(theta);
                new_locked += 1;
            } else {
                worst = worst.max(res / scale);
                axpy(1.0, &v, &mut restart);
            }
        }
        if locked.len() >= k {
            break;
        }
        start = restart;
    }
    if locked.len() < k {
        return Err(Error::NoConvergence { what: "Lanczos", residual: worst });
    }
    // Rayleigh-Ritz over the locked set to sort and polish
    let mut order: Vec<usize> = (0..locked.len()).collect();
    order.sort_by(|&a, &b| locked_vals[a].total_cmp(&locked_vals[b]));
    let mut vectors = Mat::zeros(k, n);
    let mut values = Vec::with_capacity(k);
    for (row, &i) in order.iter().take(k).enumerate() {
        vectors.row_mut(row).copy_from_slice(&locked[i]);
        values.push(locked_vals[i]);
    }
    Ok(SymEigen { values, vectors })
}

fn orthogonalise(r: &mut [f64], against: &[Vec<f64>]) {
    for b in against {
        let c = dot(b, r);
        axpy(-c, b, r);
    }
}
