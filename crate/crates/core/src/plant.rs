//! Discrete-time linear time-varying plants `x(k+1) = A(k) x(k) + B(k) u(k)`.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Nominal drift matrix of the benchmark plant.
pub fn a0() -> Mat {
    Mat::from_rows(&[&[1.1, 0.1], &[0.1, 0.2]])
}

/// Nominal input matrix of the benchmark plant.
pub fn b0() -> Mat {
    Mat::from_rows(&[&[0.5, 1.0], &[0.1, 0.2]])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolation {
    Hold,
    Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Knot {
    pub k: u64,
    pub a: Mat,
    pub b: Mat,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PlantKind {
    ConstantLti { a: Mat, b: Mat },
    /// `A = A0`; `B` alternates between `B0` and `[[0.5, -l], [0.1, -0.2 l]]`
    /// on blocks of `period` steps, the first block being `[1, period]`.
    Switching { period: u64, ell: f64 },
    /// `A = A0 (I + delta_a diag(c, -c))` with `c = cos(2 pi k / period)`.
    Sinusoidal { period: f64, delta_a: f64 },
    /// As `Sinusoidal` with amplitude `1 - k / t_delta`, zero after `t_delta`.
    Vanishing { period: f64, t_delta: f64 },
    Piecewise { knots: Vec<Knot>, mode: Interpolation },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LtvPlant {
    kind: PlantKind,
    nx: usize,
    nu: usize,
}

/// Block rows `[A(kappa-T) ... A(kappa-1)]` and `[B(kappa-T) ... B(kappa-1)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedMats {
    pub cal_a: Mat,
    pub cal_b: Mat,
}

impl LtvPlant {
    pub fn new(kind: PlantKind) -> Result<Self> {
        let (nx, nu) = match &kind {
            PlantKind::ConstantLti { a, b } => {
                if !a.is_square() || a.rows() != b.rows() || a.is_empty() || b.cols() == 0 {
                    return Err(Error::InvalidInput(format!("incompatible plant shapes A {:?}, B {:?}", a.shape(), b.shape())));
                }
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidInput("plant matrices must be finite".into()));
                }
                (a.rows(), b.cols())
            }
            PlantKind::Switching { period, ell } => {
                if *period == 0 || !ell.is_finite() {
                    return Err(Error::InvalidInput("switching plant needs period >= 1 and finite ell".into()));
                }
                (2, 2)
            }
            PlantKind::Sinusoidal { period, delta_a } => {
                if !(*period > 0.0) || !delta_a.is_finite() {
                    return Err(Error::InvalidInput("sinusoidal plant needs period > 0 and finite delta_a".into()));
                }
                (2, 2)
            }
            PlantKind::Vanishing { period, t_delta } => {
                if !(*period > 0.0) || !(*t_delta > 0.0) {
                    return Err(Error::InvalidInput("vanishing plant needs period > 0 and t_delta > 0".into()));
                }
                (2, 2)
            }
            PlantKind::Piecewise { knots, .. } => {
                let first = knots.first().ok_or_else(|| Error::InvalidInput("piecewise plant needs at least one knot".into()))?;
                let (nx, nu) = (first.a.rows(), first.b.cols());
                for w in knots.windows(2) {
                    if w[1].k <= w[0].k {
                        return Err(Error::InvalidInput("knot times must be strictly increasing".into()));
                    }
                }
                for kn in knots {
                    if kn.a.shape() != (nx, nx) || kn.b.shape() != (nx, nu) || !kn.a.is_finite() || !kn.b.is_finite() {
                        return Err(Error::InvalidInput(format!("knot at k={} has inconsistent or non-finite matrices", kn.k)));
                    }
                }
                (nx, nu)
            }
        };
        Ok(LtvPlant { kind, nx, nu })
    }

    pub fn constant(a: Mat, b: Mat) -> Result<Self> {
        Self::new(PlantKind::ConstantLti { a, b })
    }

    pub fn switching(period: u64, ell: f64) -> Result<Self> {
        Self::new(PlantKind::Switching { period, ell })
    }

    pub fn sinusoidal(period: f64, delta_a: f64) -> Result<Self> {
        Self::new(PlantKind::Sinusoidal { period, delta_a })
    }

    pub fn vanishing(period: f64, t_delta: f64) -> Result<Self> {
        Self::new(PlantKind::Vanishing { period, t_delta })
    }

    /// Reads the piecewise format: a header `nx nu num_knots mode`, then for
    /// every knot its time followed by `A` and `B` in row-major order.
    pub fn from_piecewise_text(text: &str) -> Result<Self> {
        let mut tok = text.split_whitespace();
        let mut next = |what: &str| tok.next().ok_or_else(|| Error::InvalidInput(format!("piecewise file: missing {what}")));
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| Error::InvalidInput(format!("piecewise file: bad integer {s:?}")));
        let nx = parse_usize(next("nx")?)?;
        let nu = parse_usize(next("nu")?)?;
        let nk = parse_usize(next("num_knots")?)?;
        let mode = match next("mode")? {
            "hold" => Interpolation::Hold,
            "linear" => Interpolation::Linear,
            other => return Err(Error::InvalidInput(format!("piecewise file: unknown mode {other:?}"))),
        };
        if nx == 0 || nu == 0 {
            return Err(Error::InvalidInput("piecewise file: nx and nu must be positive".into()));
        }
        let mut knots = Vec::with_capacity(nk);
        for _ in 0..nk {
            let k = next("knot time")?
                .parse::<u64>()
                .map_err(|_| Error::InvalidInput("piecewise file: bad knot time".into()))?;
            let mut read = |n: usize| -> Result<Vec<f64>> {
                (0..n)
                    .map(|_| {
                        let s = next("matrix entry")?;
                        s.parse::<f64>().map_err(|_| Error::InvalidInput(format!("piecewise file: bad number {s:?}")))
                    })
                    .collect()
            };
            let a = Mat::from_vec(nx, nx, read(nx * nx)?)?;
            let b = Mat::from_vec(nx, nu, read(nx * nu)?)?;
            knots.push(Knot { k, a, b });
        }
        if next("end").is_ok() {
            return Err(Error::InvalidInput("piecewise file: trailing data".into()));
        }
        Self::new(PlantKind::Piecewise { knots, mode })
    }

    pub fn from_piecewise_file(path: &Path) -> Result<Self> {
        Self::from_piecewise_text(&std::fs::read_to_string(path)?)
    }

    pub fn kind(&self) -> &PlantKind {
        &self.kind
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn eval(&self, k: u64) -> (Mat, Mat) {
        match &self.kind {
            PlantKind::ConstantLti { a, b } => (a.clone(), b.clone()),
            PlantKind::Switching { period, ell } => {
                // Block z covers [1 + p(z-1), p z]; k = 0 joins the first block.
                let z = if k == 0 { 1 } else { (k - 1) / period + 1 };
                let b = if z % 2 == 1 { b0() } else { Mat::from_rows(&[&[0.5, -ell], &[0.1, -0.2 * ell]]) };
                (a0(), b)
            }
            PlantKind::Sinusoidal { period, delta_a } => (perturbed_a0(*delta_a, k as f64, *period), b0()),
            PlantKind::Vanishing { period, t_delta } => {
                let kf = k as f64;
                let amp = if kf <= *t_delta { 1.0 - kf / t_delta } else { 0.0 };
                (perturbed_a0(amp, kf, *period), b0())
            }
            PlantKind::Piecewise { knots, mode } => piecewise_eval(knots, *mode, k),
        }
    }

    pub fn step(&self, k: u64, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.nx || u.len() != self.nu {
            return Err(Error::InvalidInput(format!(
                "step expects x of length {} and u of length {}, got {} and {}",
                self.nx,
                self.nu,
                x.len(),
                u.len()
            )));
        }
        let (a, b) = self.eval(k);
        let ax = a.mul_vec(x);
        let bu = b.mul_vec(u);
        Ok(ax.iter().zip(&bu).map(|(p, q)| p + q).collect())
    }

    pub fn stacked(&self, kappa: u64, t: usize) -> Result<StackedMats> {
        if t == 0 || kappa < t as u64 {
            return Err(Error::InvalidInput(format!("stacked needs 1 <= T <= kappa (kappa = {kappa}, T = {t})")));
        }
        let mut cal_a = Mat::zeros(self.nx, self.nx * t);
        let mut cal_b = Mat::zeros(self.nx, self.nu * t);
        for i in 0..t {
            let (a, b) = self.eval(kappa - t as u64 + i as u64);
            cal_a.set_block(0, i * self.nx, &a);
            cal_b.set_block(0, i * self.nu, &b);
        }
        Ok(StackedMats { cal_a, cal_b })
    }
}

fn perturbed_a0(amp: f64, k: f64, period: f64) -> Mat {
    let c = (2.0 * PI * k / period).cos();
    a0().matmul(&Mat::from_diag(&[1.0 + amp * c, 1.0 - amp * c]))
}

fn piecewise_eval(knots: &[Knot], mode: Interpolation, k: u64) -> (Mat, Mat) {
    let idx = knots.partition_point(|kn| kn.k <= k);
    if idx == 0 {
        return (knots[0].a.clone(), knots[0].b.clone());
    }
    let lo = &knots[idx - 1];
    match (mode, knots.get(idx)) {
        (Interpolation::Linear, Some(hi)) => {
            let s = (k - lo.k) as f64 / (hi.k - lo.k) as f64;
            let mix = |p: &Mat, q: &Mat| &p.scale(1.0 - s) + &q.scale(s);
            (mix(&lo.a, &hi.a), mix(&lo.b, &hi.b))
        }
        _ => (lo.a.clone(), lo.b.clone()),
    }
}
