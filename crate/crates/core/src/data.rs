//! Sliding input-state data window `d = (kappa, Xhat, X, U)`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{n_map, shift_append, svd, Mat};
use crate::plant::StackedMats;

#[derive(Clone, Debug, PartialEq)]
pub struct DataWindow {
    kappa: u64,
    xhat: Mat,
    x: Mat,
    u: Mat,
}

impl DataWindow {
    /// Zero-initialized window of width `t`.
    pub fn zeros(nx: usize, nu: usize, t: usize) -> Result<Self> {
        if nx == 0 || nu == 0 || t == 0 {
            return Err(Error::InvalidInput("window dimensions must be positive".into()));
        }
        Ok(DataWindow { kappa: 0, xhat: Mat::zeros(nx, t), x: Mat::zeros(nx, t), u: Mat::zeros(nu, t) })
    }

    pub fn from_parts(kappa: u64, xhat: Mat, x: Mat, u: Mat) -> Result<Self> {
        let t = xhat.cols();
        if t == 0 || x.cols() != t || u.cols() != t || x.rows() != xhat.rows() || xhat.rows() == 0 || u.rows() == 0 {
            return Err(Error::InvalidInput(format!(
                "window shapes disagree: Xhat {:?}, X {:?}, U {:?}",
                xhat.shape(),
                x.shape(),
                u.shape()
            )));
        }
        Ok(DataWindow { kappa, xhat, x, u })
    }

    pub fn with_kappa(mut self, kappa: u64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn kappa(&self) -> u64 {
        self.kappa
    }

    pub fn width(&self) -> usize {
        self.xhat.cols()
    }

    pub fn nx(&self) -> usize {
        self.xhat.rows()
    }

    pub fn nu(&self) -> usize {
        self.u.rows()
    }

    pub fn xhat(&self) -> &Mat {
        &self.xhat
    }

    pub fn x(&self) -> &Mat {
        &self.x
    }

    pub fn u(&self) -> &Mat {
        &self.u
    }

    pub fn push(&self, x: &[f64], x_plus: &[f64], u: &[f64]) -> Result<Self> {
        if x.len() != self.nx() || x_plus.len() != self.nx() || u.len() != self.nu() {
            return Err(Error::InvalidInput("push: sample dimensions do not match the window".into()));
        }
        Ok(DataWindow {
            kappa: self.kappa + 1,
            xhat: shift_append(&self.xhat, x)?,
            x: shift_append(&self.x, x_plus)?,
            u: shift_append(&self.u, u)?,
        })
    }

    /// `Z = [Xhat; U]`.
    pub fn z(&self) -> Mat {
        Mat::vstack(&self.xhat, &self.u)
    }

    /// `Z` together with its numerical rank, read off the spectrum of `Z Z^T`.
    pub fn z_matrix(&self) -> (Mat, usize) {
        let z = self.z();
        let rank = svd(&z).rank();
        (z, rank)
    }

    /// `|| X - calA N(Xhat) - calB N(U) ||_2`.
    pub fn consistency_residual(&self, s: &StackedMats) -> Result<f64> {
        let na = n_map(&self.xhat)?;
        let nb = n_map(&self.u)?;
        if s.cal_a.cols() != na.rows() || s.cal_b.cols() != nb.rows() || s.cal_a.rows() != self.nx() {
            return Err(Error::InvalidInput("stacked matrices do not match the window".into()));
        }
        let r = &(&self.x - &s.cal_a.matmul(&na)) - &s.cal_b.matmul(&nb);
        Ok(r.norm2())
    }

    /// One CSV row per matrix row; the matrices are laid side by side.
    pub fn to_csv(&self) -> String {
        let t = self.width();
        let mut out = String::new();
        let mut header: Vec<String> = Vec::new();
        for name in ["Xhat", "X"] {
            header.extend((1..=t).map(|i| format!("{name}_{i}")));
        }
        header.extend((1..=t).map(|i| format!("U_{i}")));
        header.push("kappa".into());
        out.push_str(&header.join(","));
        out.push('\n');
        let rows = self.nx().max(self.nu());
        for r in 0..rows {
            let mut cells: Vec<String> = Vec::new();
            for m in [&self.xhat, &self.x, &self.u] {
                for c in 0..t {
                    cells.push(if r < m.rows() { format!("{:e}", m[(r, c)]) } else { String::new() });
                }
            }
            cells.push(if r == 0 { self.kappa.to_string() } else { String::new() });
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::LtvPlant;

    #[test]
    fn push_shifts_columns() {
        let w = DataWindow::from_parts(0, Mat::from_rows(&[&[1.0, 2.0]]), Mat::zeros(1, 2), Mat::zeros(1, 2)).unwrap();
        let w2 = w.push(&[3.0], &[4.0], &[5.0]).unwrap();
        assert_eq!(w2.xhat(), &Mat::from_rows(&[&[2.0, 3.0]]));
        assert_eq!(w2.x(), &Mat::from_rows(&[&[0.0, 4.0]]));
        assert_eq!(w2.u(), &Mat::from_rows(&[&[0.0, 5.0]]));
        assert_eq!(w2.kappa(), 1);
        assert!(w.push(&[1.0, 2.0], &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn z_matrix_rank() {
        assert_eq!(DataWindow::zeros(2, 2, 4).unwrap().z_matrix().1, 0);
        let w = DataWindow::from_parts(0, Mat::from_rows(&[&[1.0, 0.5]]), Mat::from_rows(&[&[0.5, 0.25]]), Mat::zeros(1, 2)).unwrap();
        let (z, r) = w.z_matrix();
        assert_eq!(z, Mat::from_rows(&[&[1.0, 0.5], &[0.0, 0.0]]));
        assert_eq!(r, 1);
    }

    #[test]
    fn scalar_residual_zero() {
        let p = LtvPlant::constant(Mat::from_rows(&[&[0.5]]), Mat::from_rows(&[&[1.0]])).unwrap();
        let w = DataWindow::zeros(1, 1, 2)
            .unwrap()
            .push(&[1.0], &[0.5], &[0.0])
            .unwrap()
            .push(&[0.5], &[0.25], &[0.0])
            .unwrap();
        assert_eq!(w.consistency_residual(&p.stacked(w.kappa(), 2).unwrap()).unwrap(), 0.0);
        let bad = DataWindow::from_parts(2, w.xhat().clone(), Mat::from_rows(&[&[0.5, 0.3]]), w.u().clone()).unwrap();
        assert!(bad.consistency_residual(&p.stacked(2, 2).unwrap()).unwrap() > 0.0);
    }

    #[test]
    fn csv_snapshot_has_header() {
        let w = DataWindow::zeros(2, 1, 2).unwrap().with_kappa(7);
        let csv = w.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "Xhat_1,Xhat_2,X_1,X_2,U_1,U_2,kappa");
        assert!(lines.next().unwrap().ends_with(",7"));
        assert_eq!(lines.count(), 1);
    }
}
