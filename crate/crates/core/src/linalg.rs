//! Dense small-matrix numerics.
//!
//! Everything in this crate works on matrices of dimension well below 100, so
//! the kernels here favour accuracy and determinism over speed: symmetric
//! eigenproblems use cyclic Jacobi rotations, and the pseudoinverse and
//! generalized eigenvalues are built on top of that single solver.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Dense real matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                write!(f, "{:>14.6e}", self[(r, c)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting shape mismatches and
    /// non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::InvalidInput(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        Ok(Mat { rows, cols, data })
    }

    /// Convenience constructor for literals; panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Mat::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn column_vector(v: &[f64]) -> Self {
        Mat { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn set_col(&mut self, c: usize, v: &[f64]) {
        assert_eq!(v.len(), self.rows);
        for (r, x) in v.iter().enumerate() {
            self[(r, c)] = *x;
        }
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch {:?}x{:?}", self.shape(), rhs.shape());
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows).map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// `self * rhs^T` without materializing the transpose.
    pub fn mul_t(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.cols);
        let mut out = Mat::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            for j in 0..rhs.rows {
                out[(i, j)] = self.row(i).iter().zip(rhs.row(j)).map(|(a, b)| a * b).sum();
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Spectral norm (largest singular value).
    pub fn norm2(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let g = if self.rows <= self.cols { self.mul_t(self) } else { self.transpose().matmul(self) };
        let g = SymMat::from_mat(&g);
        match sym_eig(&g) {
            Ok(e) => e.values.last().copied().unwrap_or(0.0).max(0.0).sqrt(),
            Err(_) => f64::NAN,
        }
    }

    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Mat {
        let mut out = Mat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                out[(r, c)] = self[(r0 + r, c0 + c)];
            }
        }
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Mat) {
        for r in 0..block.rows {
            for c in 0..block.cols {
                self[(r0 + r, c0 + c)] = block[(r, c)];
            }
        }
    }

    pub fn vstack(top: &Mat, bottom: &Mat) -> Mat {
        assert_eq!(top.cols, bottom.cols, "vstack column mismatch");
        let mut data = top.data.clone();
        data.extend_from_slice(&bottom.data);
        Mat { rows: top.rows + bottom.rows, cols: top.cols, data }
    }

    pub fn hstack(left: &Mat, right: &Mat) -> Mat {
        assert_eq!(left.rows, right.rows, "hstack row mismatch");
        let mut out = Mat::zeros(left.rows, left.cols + right.cols);
        out.set_block(0, 0, left);
        out.set_block(0, left.cols, right);
        out
    }

    /// Assembles `[[a, b], [c, d]]`.
    pub fn block2x2(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
        Mat::vstack(&Mat::hstack(a, b), &Mat::hstack(c, d))
    }

    /// Solves `self * X = rhs` for square `self` by partial-pivot LU.
    pub fn solve(&self, rhs: &Mat) -> Result<Mat> {
        if !self.is_square() || self.rows != rhs.rows {
            return Err(Error::InvalidInput("solve: shape mismatch".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.clone();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, pv) = (k..n).map(|r| (r, a[(r, k)].abs())).fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pv <= 1e-14 * scale {
                return Err(Error::InvalidInput("solve: singular matrix".into()));
            }
            if p != k {
                for c in 0..n {
                    a.data.swap(k * n + c, p * n + c);
                }
                for c in 0..b.cols {
                    b.data.swap(k * b.cols + c, p * b.cols + c);
                }
            }
            for r in k + 1..n {
                let f = a[(r, k)] / a[(k, k)];
                if f == 0.0 {
                    continue;
                }
                for c in k..n {
                    a[(r, c)] -= f * a[(k, c)];
                }
                for c in 0..b.cols {
                    b[(r, c)] -= f * b[(k, c)];
                }
            }
        }
        for k in (0..n).rev() {
            for c in 0..b.cols {
                let mut s = b[(k, c)];
                for j in k + 1..n {
                    s -= a[(k, j)] * b[(j, c)];
                }
                b[(k, c)] = s / a[(k, k)];
            }
        }
        Ok(b)
    }

    pub fn inverse(&self) -> Result<Mat> {
        self.solve(&Mat::identity(self.rows))
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        assert_eq!(self.shape(), rhs.shape(), "sub shape mismatch");
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        self.matmul(rhs)
    }
}

impl Neg for &Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

/// Real symmetric matrix. Symmetry holds exactly: every constructor mirrors
/// the averaged off-diagonal pair into both triangles.
#[derive(Clone, PartialEq)]
pub struct SymMat(Mat);

impl fmt::Debug for SymMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sym{:?}", self.0)
    }
}

impl SymMat {
    /// Symmetrizes `m` as `(m + m^T)/2`; panics on non-square input.
    pub fn from_mat(m: &Mat) -> Self {
        assert!(m.is_square(), "SymMat needs a square matrix");
        let n = m.rows();
        let mut s = Mat::zeros(n, n);
        for i in 0..n {
            s[(i, i)] = m[(i, i)];
            for j in i + 1..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        SymMat(s)
    }

    pub fn try_from_mat(m: &Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput(format!("expected square matrix, got {:?}", m.shape())));
        }
        if !m.is_finite() {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        Ok(Self::from_mat(m))
    }

    pub fn zeros(n: usize) -> Self {
        SymMat(Mat::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMat(Mat::identity(n))
    }

    pub fn from_diag(d: &[f64]) -> Self {
        SymMat(Mat::from_diag(d))
    }

    /// Gram matrix `m * m^T`.
    pub fn gram(m: &Mat) -> Self {
        SymMat::from_mat(&m.mul_t(m))
    }

    /// Congruence `t^T * self * t`.
    pub fn congruence(&self, t: &Mat) -> Self {
        SymMat::from_mat(&t.transpose().matmul(&self.0).matmul(t))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn scale(&self, s: f64) -> Self {
        SymMat(self.0.scale(s))
    }

    pub fn add(&self, other: &SymMat) -> Self {
        SymMat(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMat) -> Self {
        SymMat(&self.0 - &other.0)
    }

    /// Quadratic form `x^T S x`.
    pub fn quad(&self, x: &[f64]) -> f64 {
        let sx = self.0.mul_vec(x);
        sx.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn eig(&self) -> Result<SymEig> {
        sym_eig(self)
    }

    pub fn lambda_min(&self) -> Result<f64> {
        Ok(sym_eig(self)?.values.first().copied().unwrap_or(0.0))
    }

    pub fn lambda_max(&self) -> Result<f64> {
        Ok(sym_eig(self)?.values.last().copied().unwrap_or(0.0))
    }

    /// Inverse through the eigendecomposition; fails unless positive definite.
    pub fn inverse_pd(&self) -> Result<SymMat> {
        let e = sym_eig(self)?;
        let lmax = e.values.last().copied().unwrap_or(0.0);
        if e.values.first().map_or(true, |&l| l <= 1e-14 * lmax.abs().max(f64::MIN_POSITIVE)) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(e.map_values(|l| 1.0 / l))
    }

    /// Symmetric square root of a PSD matrix (negative eigenvalues clipped).
    pub fn sqrt_psd(&self) -> Result<SymMat> {
        Ok(sym_eig(self)?.map_values(|l| l.max(0.0).sqrt()))
    }
}

/// Eigendecomposition `S = V diag(values) V^T` with ascending eigenvalues and
/// orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl SymEig {
    /// Rebuilds `V diag(f(values)) V^T`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> SymMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (c, &l) in self.values.iter().enumerate() {
            let s = f(l);
            for r in 0..n {
                scaled[(r, c)] *= s;
            }
        }
        SymMat::from_mat(&scaled.mul_t(&self.vectors))
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.col(i)
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(s: &SymMat) -> Result<SymEig> {
    let n = s.dim();
    if !s.as_mat().is_finite() {
        return Err(Error::InvalidInput("sym_eig: non-finite entry".into()));
    }
    let mut a = s.as_mat().clone();
    let mut v = Mat::identity(n);
    let scale = a.norm_fro();
    if n <= 1 || scale == 0.0 {
        return Ok(SymEig { values: (0..n).map(|i| a[(i, i)]).collect(), vectors: v });
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)] * a[(i, j)]).sum();
        if off.sqrt() <= f64::EPSILON * 1e-2 * scale {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_col(dst, &v.col(src));
    }
    Ok(SymEig { values, vectors })
}

/// Moore-Penrose pseudoinverse.
///
/// Symmetric inputs are inverted on their own spectrum; general inputs go
/// through the spectrum of `M^T M`. Singular values at or below `tol` are
/// treated as zero; `None` selects `max(rows, cols) * eps * sigma_max`.
pub fn pinv(m: &Mat, tol: Option<f64>) -> Mat {
    let (r, c) = m.shape();
    if m.is_empty() || m.max_abs() == 0.0 {
        return Mat::zeros(c, r);
    }
    let symmetric = m.is_square() && (0..r).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]));
    if symmetric {
        let e = sym_eig(&SymMat::from_mat(m)).expect("finite input");
        let smax = e.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let cut = tol.unwrap_or(r as f64 * f64::EPSILON * smax);
        return e.map_values(|l| if l.abs() > cut { 1.0 / l } else { 0.0 }).into_mat();
    }
    let d = svd(m);
    let cut = tol.unwrap_or_else(|| d.default_cut());
    let mut out = Mat::zeros(c, r);
    for (k, &sv) in d.s.iter().enumerate() {
        if sv > cut {
            for i in 0..c {
                for j in 0..r {
                    out[(i, j)] += d.v[(i, k)] * d.u[(j, k)] / sv;
                }
            }
        }
    }
    out
}

/// Thin singular value decomposition `A = U diag(s) V^T`, `s` descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

impl Svd {
    /// Rounding-level threshold `10 max(r, c) eps s_max`.
    pub fn default_cut(&self) -> f64 {
        let smax = self.s.first().copied().unwrap_or(0.0);
        10.0 * self.u.rows().max(self.v.rows()) as f64 * f64::EPSILON * smax
    }

    pub fn rank(&self) -> usize {
        let cut = self.default_cut();
        self.s.iter().filter(|&&v| v > cut && v > 0.0).count()
    }
}

/// One-sided Jacobi SVD; small singular values come out with high relative
/// accuracy, unlike eigenvalues of the Gram matrix.
pub fn svd(a: &Mat) -> Svd {
    let (r, c) = a.shape();
    if r < c {
        let t = svd(&a.transpose());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    let mut w = a.clone();
    let mut v = Mat::identity(c);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..c {
            for q in p + 1..c {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..r {
                    alpha += w[(i, p)] * w[(i, p)];
                    beta += w[(i, q)] * w[(i, q)];
                    gamma += w[(i, p)] * w[(i, q)];
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for i in 0..r {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = cs * x - sn * y;
                    w[(i, q)] = sn * x + cs * y;
                }
                for i in 0..c {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = cs * x - sn * y;
                    v[(i, q)] = sn * x + cs * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..c).map(|k| (0..r).map(|i| w[(i, k)] * w[(i, k)]).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let mut u = Mat::zeros(r, c);
    let mut vs = Mat::zeros(c, c);
    let mut s = Vec::with_capacity(c);
    for (k, &j) in order.iter().enumerate() {
        s.push(norms[j]);
        for i in 0..r {
            u[(i, k)] = if norms[j] > 0.0 { w[(i, j)] / norms[j] } else { 0.0 };
        }
        for i in 0..c {
            vs[(i, k)] = v[(i, j)];
        }
    }
    Svd { u, s, v: vs }
}

fn check_pd_pair(a: &SymMat, b: &SymMat) -> Result<SymEig> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidInput("generalized eigenproblem: dimension mismatch".into()));
    }
    let eb = sym_eig(b)?;
    let bmax = eb.values.last().copied().unwrap_or(0.0);
    let bmin = eb.values.first().copied().unwrap_or(0.0);
    if bmax <= 0.0 || bmin <= 1e-12 * bmax {
        return Err(Error::NotPositiveDefinite);
    }
    let b_inv_sqrt = eb.map_values(|l| 1.0 / l.sqrt());
    let c = a.congruence(b_inv_sqrt.as_mat());
    sym_eig(&c)
}

/// Largest generalized eigenvalue: `lambda_max(B^{-1/2} A B^{-1/2})`, the
/// smallest `t` with `A <= t B`.
pub fn gen_eig_max(a: &SymMat, b: &SymMat) -> Result<f64> {
    let e = check_pd_pair(a, b)?;
    Ok(e.values.last().copied().unwrap_or(0.0))
}

/// Smallest generalized eigenvalue: the largest `t` with `t B <= A`.
pub fn gen_eig_min(a: &SymMat, b: &SymMat) -> Result<f64> {
    let e = check_pd_pair(a, b)?;
    Ok(e.values.first().copied().unwrap_or(0.0))
}

/// Default PSD tolerance for a matrix with largest eigenvalue `lmax`.
pub fn psd_tol(lmax: f64) -> f64 {
    1e-9 * (1.0 + lmax.abs())
}

/// `lambda_min(S) >= -tol` with the default relative tolerance.
pub fn is_psd(s: &SymMat) -> Result<bool> {
    let e = sym_eig(s)?;
    let lmin = e.values.first().copied().unwrap_or(0.0);
    let lmax = e.values.last().copied().unwrap_or(0.0);
    Ok(lmin >= -psd_tol(lmax))
}

/// `lambda_min(S) >= +tol` with the default relative tolerance.
pub fn is_pd(s: &SymMat) -> Result<bool> {
    let e = sym_eig(s)?;
    let lmin = e.values.first().copied().unwrap_or(0.0);
    let lmax = e.values.last().copied().unwrap_or(0.0);
    Ok(lmin >= psd_tol(lmax))
}

/// Lower Cholesky factor, or `None` when `s` is not numerically PD.
pub fn cholesky(s: &SymMat) -> Option<Mat> {
    let n = s.dim();
    let a = s.as_mat();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Inverse of a lower-triangular matrix.
pub fn lower_tri_inverse(l: &Mat) -> Mat {
    let n = l.rows();
    let mut inv = Mat::zeros(n, n);
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                s -= l[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = s / l[(i, i)];
        }
    }
    inv
}

/// Block-diagonal column stacking: maps an `n x T` matrix to the `nT x T`
/// matrix whose column `t` carries `z_t` in block `t` and zeros elsewhere.
pub fn n_map(z: &Mat) -> Result<Mat> {
    if z.is_empty() {
        return Err(Error::InvalidInput("n_map: empty matrix".into()));
    }
    let (n, t) = z.shape();
    let mut out = Mat::zeros(n * t, t);
    for c in 0..t {
        for r in 0..n {
            out[(c * n + r, c)] = z[(r, c)];
        }
    }
    Ok(out)
}

/// Drops the first column of `m` and appends `col` as the last one.
pub fn shift_append(m: &Mat, col: &[f64]) -> Result<Mat> {
    if col.len() != m.rows() {
        return Err(Error::InvalidInput(format!(
            "shift_append: column of length {} for {} rows",
            col.len(),
            m.rows()
        )));
    }
    let (r, t) = m.shape();
    if t == 0 {
        return Err(Error::InvalidInput("shift_append: zero-width window".into()));
    }
    let mut out = Mat::zeros(r, t);
    for c in 0..t - 1 {
        for i in 0..r {
            out[(i, c)] = m[(i, c + 1)];
        }
    }
    out.set_col(t - 1, col);
    Ok(out)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}
