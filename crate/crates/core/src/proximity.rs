//! Matrix proximity sets: which `(M_A, M_B)` explain the window data up to a
//! mismatch bound `F`, in both the mismatch form and the ellipsoidal form.

use rand::Rng;

use crate::data::DataWindow;
use crate::error::{Error, Result};
use crate::linalg::{gen_eig_max, svd, Mat, SymMat};

/// Center `Zc`, shape `M` and radius `Delta` of the data-based ellipsoid.
#[derive(Clone, Debug)]
pub struct EllipsoidParams {
    pub m: SymMat,
    pub zc: Mat,
    pub delta: SymMat,
    /// Scale used for every PSD test involving this set.
    pub tol: f64,
    z: Mat,
    /// Left singular vectors and values of `Z` above the rounding level.
    u_r: Mat,
    s_r: Vec<f64>,
}

/// `M = Z Z^T`, `Zc = M^+ Z X^T`, `Delta = X Z^T M^+ Z X^T - X X^T + F`.
///
/// Everything is formed from the SVD `Z = U S V^T` rather than from `M`:
/// `Zc = U S^-1 V^T X^T` and `Delta = F - X (I - V V^T) X^T`, which keeps
/// weakly excited directions of `Z` instead of losing them to the squared
/// conditioning of `M`.
pub fn ellipsoid_params(w: &DataWindow, f: &SymMat) -> Result<EllipsoidParams> {
    if f.dim() != w.nx() {
        return Err(Error::InvalidInput("F must be nx-by-nx".into()));
    }
    let z = w.z();
    let (p, t) = z.shape();
    let d = svd(&z);
    let r = d.rank();
    let u_r = d.u.submatrix(0, 0, p, r);
    let v_r = d.v.submatrix(0, 0, t, r);
    let s_r = d.s[..r].to_vec();
    let xv = w.x().matmul(&v_r);
    let mut scaled = xv.clone();
    for k in 0..r {
        for i in 0..scaled.rows() {
            scaled[(i, k)] /= s_r[k];
        }
    }
    let zc = u_r.mul_t(&scaled);
    let resid = w.x() - &xv.mul_t(&v_r);
    let delta = f.sub(&SymMat::gram(&resid));
    Ok(EllipsoidParams { m: SymMat::gram(&z), tol: membership_tol(w, f)?, zc, delta, z, u_r, s_r })
}

/// PSD tolerance for set membership, relative to the data scale so that
/// windows of tiny or huge magnitude are judged alike.
pub fn membership_tol(w: &DataWindow, f: &SymMat) -> Result<f64> {
    Ok(MEMBERSHIP_RTOL * (f.lambda_max()?.max(0.0) + w.x().norm2().powi(2)))
}

pub const MEMBERSHIP_RTOL: f64 = 1e-9;

impl EllipsoidParams {
    pub fn is_nonempty(&self) -> bool {
        self.delta.lambda_min().is_ok_and(|l| l >= -self.tol)
    }

    pub fn is_bounded(&self) -> bool {
        self.s_r.len() == self.m.dim()
    }

    /// Quadratic-form membership `(Zh - Zc)^T M (Zh - Zc) <= Delta` for
    /// `Zh = [M_A M_B]^T`; the form is evaluated as a Gram of `(Zh - Zc)^T Z`.
    pub fn contains_hat(&self, ma: &Mat, mb: &Mat) -> Result<bool> {
        let zh = stacked_transpose(ma, mb, self.zc.rows(), self.zc.cols())?;
        let e = &zh - &self.zc;
        let q = SymMat::gram(&e.transpose().matmul(&self.z));
        Ok(self.delta.sub(&q).lambda_min()? >= -self.tol)
    }

    /// Candidate `Zc + M^{+1/2} R Delta^{1/2}` at normalized radius `rho`:
    /// `R` is a random direction in the range of `M` with `||R||_2 = rho`.
    /// Radii up to one stay inside the set. `kernel_noise` adds a random
    /// component along the null space of `M`, which membership ignores.
    pub fn sample<R: Rng + ?Sized>(&self, rho: f64, kernel_noise: f64, rng: &mut R) -> Result<(Mat, Mat)> {
        Ok(self.sampler()?.sample(rho, kernel_noise, rng))
    }

    /// Precomputes the factors used by [`EllipsoidParams::sample`].
    pub fn sampler(&self) -> Result<Sampler> {
        let p = self.zc.rows();
        let mut u_scaled = self.u_r.clone();
        for k in 0..self.s_r.len() {
            for i in 0..p {
                u_scaled[(i, k)] /= self.s_r[k];
            }
        }
        let range = self.u_r.mul_t(&self.u_r);
        Ok(Sampler {
            zc: self.zc.clone(),
            inv_sqrt: u_scaled.mul_t(&self.u_r),
            kernel: &Mat::identity(p) - &range,
            range,
            d_sqrt: self.delta.sqrt_psd()?.into_mat(),
        })
    }
}

/// Reusable sampler over one ellipsoid.
#[derive(Clone, Debug)]
pub struct Sampler {
    zc: Mat,
    inv_sqrt: Mat,
    range: Mat,
    kernel: Mat,
    d_sqrt: Mat,
}

impl Sampler {
    pub fn sample<R: Rng + ?Sized>(&self, rho: f64, kernel_noise: f64, rng: &mut R) -> (Mat, Mat) {
        let (p, nx) = self.zc.shape();
        let mut random = |scale: f64| {
            let mut m = Mat::zeros(p, nx);
            for i in 0..p {
                for j in 0..nx {
                    m[(i, j)] = scale * rng.gen_range(-1.0..1.0);
                }
            }
            m
        };
        let r0 = self.range.matmul(&random(1.0));
        let nrm = r0.norm2();
        let r = if nrm > 0.0 { r0.scale(rho / nrm) } else { r0 };
        let mut zh = &self.zc + &self.inv_sqrt.matmul(&r).matmul(&self.d_sqrt);
        if kernel_noise > 0.0 {
            zh = &zh + &self.kernel.matmul(&random(kernel_noise));
        }
        let full = zh.transpose();
        (full.submatrix(0, 0, nx, nx), full.submatrix(0, nx, nx, p - nx))
    }
}

fn stacked_transpose(ma: &Mat, mb: &Mat, p: usize, nx: usize) -> Result<Mat> {
    if ma.shape() != (nx, nx) || mb.rows() != nx || nx + mb.cols() != p {
        return Err(Error::InvalidInput(format!("candidate shapes {:?}/{:?} do not match the window", ma.shape(), mb.shape())));
    }
    Ok(Mat::hstack(ma, mb).transpose())
}

/// Data mismatch `[M_A M_B] Z - X`.
pub fn mismatch(w: &DataWindow, ma: &Mat, mb: &Mat) -> Result<Mat> {
    let p = w.nx() + w.nu();
    let zh = stacked_transpose(ma, mb, p, w.nx())?;
    Ok(&zh.transpose().matmul(&w.z()) - w.x())
}

/// `D D^T <= F` with `D = [M_A M_B] Z - X`.
pub fn contains(w: &DataWindow, f: &SymMat, ma: &Mat, mb: &Mat) -> Result<bool> {
    if f.dim() != w.nx() {
        return Err(Error::InvalidInput("F must be nx-by-nx".into()));
    }
    let d = mismatch(w, ma, mb)?;
    let gap = f.sub(&SymMat::gram(&d));
    Ok(gap.lambda_min()? >= -membership_tol(w, f)?)
}

/// Smallest `eps >= 0` with `D D^T <= F + eps S^{-1}` for the true plant pair.
pub fn min_inflation(w: &DataWindow, f: &SymMat, s: &SymMat, a_true: &Mat, b_true: &Mat) -> Result<f64> {
    let d = mismatch(w, a_true, b_true)?;
    let s_inv = s.inverse_pd()?;
    let g = SymMat::gram(&d).sub(f);
    Ok(gen_eig_max(&g, &s_inv)?.max(0.0))
}
