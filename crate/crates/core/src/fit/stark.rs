//! Quadratic Stark shift E(F) = E₀ − αF − βF², with F = (V_b − V) / D.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FitError;
use crate::measured::Measured;

/// Built-in voltage of the diode, V.
pub const DEFAULT_VB: f64 = 1.7;
/// Intrinsic region thickness, nm.
pub const DEFAULT_D_NM: f64 = 305.0;

/// Electric field in V/nm for an applied voltage.
pub fn field_from_voltage(v: f64, vb: f64, d_nm: f64) -> f64 {
    (vb - v) / d_nm
}

/// E₀ in eV, α in eV·nm/V, β in eV·nm²/V²; `q` in units of e.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarkParams {
    pub e0: Measured,
    pub alpha: Measured,
    pub beta: Measured,
    pub q: u8,
    /// Covariance of (E₀, α, β).
    pub covariance: [[f64; 3]; 3],
}

impl StarkParams {
    /// Parameters without uncertainties.
    pub fn exact(e0: f64, alpha: f64, beta: f64, q: u8) -> Self {
        StarkParams {
            e0: Measured::exact(e0),
            alpha: Measured::exact(alpha),
            beta: Measured::exact(beta),
            q,
            covariance: [[0.0; 3]; 3],
        }
    }

    pub fn energy(&self, field: f64) -> f64 {
        stark_energy(self.e0.value, self.alpha.value, self.beta.value, field)
    }

    /// β / q in nm²/V.
    pub fn beta_per_charge(&self) -> Measured {
        let q = self.q.max(1) as f64;
        Measured::new(self.beta.value / q, self.beta.error / q)
    }
}

pub fn stark_energy(e0: f64, alpha: f64, beta: f64, field: f64) -> f64 {
    e0 - alpha * field - beta * field * field
}

/// Energy measurement at one voltage (or field), with its error in eV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarkPoint {
    pub x: f64,
    pub energy: f64,
    pub sigma: f64,
}

/// Weighted quadratic fit in the field directly (points carry F in V/nm).
pub fn fit_stark_field(points: &[StarkPoint]) -> Result<StarkParams, FitError> {
    if points.len() < 4 {
        return Err(FitError::Input(format!("{} points, need at least 4", points.len())));
    }
    if points.iter().any(|p| !(p.sigma > 0.0)) {
        return Err(FitError::Input("energy errors must be positive".into()));
    }
    let n = points.len();
    // design columns scaled to unit norm before QR
    let mut a = DMatrix::zeros(n, 3);
    let mut b = DVector::zeros(n);
    for (i, p) in points.iter().enumerate() {
        let w = 1.0 / p.sigma;
        a[(i, 0)] = w;
        a[(i, 1)] = -p.x * w;
        a[(i, 2)] = -p.x * p.x * w;
        b[i] = p.energy * w;
    }
    let scale: Vec<f64> = (0..3).map(|j| a.column(j).norm()).collect();
    if scale.iter().any(|s| !(*s > 0.0)) {
        return Err(FitError::Singular("design matrix has a zero column (all fields zero?)".into()));
    }
    for (j, s) in scale.iter().enumerate() {
        a.column_mut(j).unscale_mut(*s);
    }
    let qr = a.qr();
    let r = qr.r();
    let rmax = (0..3).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if (0..3).any(|j| r[(j, j)].abs() <= 1e-10 * rmax) {
        return Err(FitError::Singular("rank-deficient design matrix: need at least three distinct fields".into()));
    }
    let qtb = qr.q().tr_mul(&b);
    let rinv = r.clone().try_inverse().ok_or_else(|| FitError::Singular("singular R".into()))?;
    let coef_scaled = &rinv * qtb;
    let cov_scaled = &rinv * rinv.transpose();
    let mut coef = [0.0; 3];
    let mut cov = [[0.0; 3]; 3];
    for i in 0..3 {
        coef[i] = coef_scaled[i] / scale[i];
        for j in 0..3 {
            cov[i][j] = cov_scaled[(i, j)] / (scale[i] * scale[j]);
        }
    }
    let m = |i: usize| Measured::new(coef[i], cov[i][i].max(0.0).sqrt());
    Ok(StarkParams { e0: m(0), alpha: m(1), beta: m(2), q: 1, covariance: cov })
}

/// Fit of (voltage, energy) points via F = (V_b − V) / D.
pub fn fit_stark(points: &[StarkPoint], vb: f64, d_nm: f64) -> Result<StarkParams, FitError> {
    if !(d_nm > 0.0) {
        return Err(FitError::Input("D must be positive".into()));
    }
    let fpts: Vec<StarkPoint> = points.iter().map(|p| StarkPoint { x: field_from_voltage(p.x, vb, d_nm), ..*p }).collect();
    fit_stark_field(&fpts)
}

/// Parameters of the |XX⟩ state: sums of the XX and X photon lines, q = 2.
pub fn state_params(xx_line: &StarkParams, x_line: &StarkParams) -> StarkParams {
    let cov: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| xx_line.covariance[i][j] + x_line.covariance[i][j]));
    StarkParams {
        e0: xx_line.e0.sum(x_line.e0),
        alpha: xx_line.alpha.sum(x_line.alpha),
        beta: xx_line.beta.sum(x_line.beta),
        q: 2,
        covariance: cov,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(p: &StarkParams, sigma: f64) -> Vec<StarkPoint> {
        (0..25)
            .map(|i| {
                let v = -2.0 + 0.1 * i as f64;
                StarkPoint { x: v, energy: p.energy(field_from_voltage(v, DEFAULT_VB, DEFAULT_D_NM)), sigma }
            })
            .collect()
    }

    #[test]
    fn constant_energy() {
        let p = StarkParams::exact(1.59, 0.0, 0.0, 1);
        let fit = fit_stark(&points(&p, 5e-6), DEFAULT_VB, DEFAULT_D_NM).unwrap();
        assert!((fit.e0.value - 1.59).abs() < 1e-12);
        assert!(fit.alpha.value.abs() < 1e-10 && fit.beta.value.abs() < 1e-8);
    }

    #[test]
    fn field_and_voltage_forms_agree() {
        let p = StarkParams::exact(1.592911, -0.193, 67.0, 1);
        let pts = points(&p, 5e-6);
        let a = fit_stark(&pts, DEFAULT_VB, DEFAULT_D_NM).unwrap();
        let f: Vec<StarkPoint> =
            pts.iter().map(|q| StarkPoint { x: (DEFAULT_VB - q.x) / DEFAULT_D_NM, ..*q }).collect();
        let b = fit_stark_field(&f).unwrap();
        for (x, y) in [(a.e0, b.e0), (a.alpha, b.alpha), (a.beta, b.beta)] {
            assert!((x.value - y.value).abs() <= 1e-12 * x.value.abs().max(1e-300));
        }
    }

    #[test]
    fn rank_deficient() {
        let pts: Vec<StarkPoint> = (0..6).map(|i| StarkPoint { x: if i % 2 == 0 { 0.01 } else { 0.02 }, energy: 1.5, sigma: 1e-6 }).collect();
        assert!(matches!(fit_stark_field(&pts), Err(FitError::Singular(_))));
        assert!(fit_stark_field(&pts[..3]).is_err());
    }

    #[test]
    fn zero_state_sum() {
        let z = StarkParams::exact(0.0, 0.0, 0.0, 1);
        let s = state_params(&z, &z);
        assert_eq!((s.e0.value, s.alpha.value, s.beta.value, s.q), (0.0, 0.0, 0.0, 2));
    }

    #[test]
    fn covariance_positive_semidefinite() {
        let p = StarkParams::exact(1.589018, -0.142, 58.2, 1);
        let fit = fit_stark(&points(&p, 5e-6), DEFAULT_VB, DEFAULT_D_NM).unwrap();
        let m = nalgebra::Matrix3::from_fn(|i, j| fit.covariance[i][j]);
        assert!(m.symmetric_eigenvalues().iter().all(|&e| e >= -1e-30));
    }
}
