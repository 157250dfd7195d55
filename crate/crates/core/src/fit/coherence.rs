//! Fringe visibilities and Voigt coherence envelopes from Michelson scans.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lm::{invert_normal, levenberg_marquardt, LmOptions, Model};
use super::FitError;
use crate::measured::Measured;
use crate::units::{uev_to_per_ps, HBAR_MEV_PS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub visibility: Measured,
    pub phase: f64,
    pub i0: Measured,
}

/// Cosine fit I(x) = I₀(1 + v·cos(4πx/λ + φ)) of a piezo scan.
///
/// The fringe period in `x` is λ/2, so consecutive samples must be closer
/// than λ/4.
pub fn fit_fringe(samples: &[(f64, f64)], wavelength_nm: f64) -> Result<FringeFit, FitError> {
    if !(wavelength_nm > 0.0) {
        return Err(FitError::Input("wavelength must be positive".into()));
    }
    if samples.len() < 4 {
        return Err(FitError::Input(format!("{} fringe samples, need at least 4", samples.len())));
    }
    let mut xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    xs.sort_by(f64::total_cmp);
    let max_step = xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if max_step >= wavelength_nm / 4.0 {
        return Err(FitError::Aliasing { step_nm: max_step, limit_nm: wavelength_nm / 4.0 });
    }
    let k = 4.0 * PI / wavelength_nm;
    let n = samples.len();
    let a = DMatrix::from_fn(n, 3, |i, j| {
        let x = samples[i].0;
        match j {
            0 => 1.0,
            1 => (k * x).cos(),
            _ => (k * x).sin(),
        }
    });
    let b = DVector::from_iterator(n, samples.iter().map(|s| s.1));
    let cov_unit = invert_normal(&a)?;
    let c = &cov_unit * a.tr_mul(&b);
    let resid = &b - &a * &c;
    let s2 = resid.norm_squared() / (n - 3) as f64;
    let cov = cov_unit * s2;
    let (c0, c1, c2) = (c[0], c[1], c[2]);
    if !(c0 > 0.0) {
        return Err(FitError::Input("mean intensity is not positive".into()));
    }
    let amp = c1.hypot(c2);
    let v = amp / c0;
    let grad = if amp > 0.0 { [-amp / (c0 * c0), c1 / (amp * c0), c2 / (amp * c0)] } else { [0.0, 1.0 / c0, 0.0] };
    let mut var = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            var += grad[i] * grad[j] * cov[(i, j)];
        }
    }
    // I₀(1 + v cos(kx + φ)) = c0 + c1 cos kx + c2 sin kx  →  φ = atan2(−c2, c1)
    Ok(FringeFit {
        visibility: Measured::new(v, var.max(0.0).sqrt()),
        phase: (-c2).atan2(c1),
        i0: Measured::new(c0, cov[(0, 0)].max(0.0).sqrt()),
    })
}

/// Visibility at one relative delay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherencePoint {
    pub delay_ps: f64,
    pub visibility: f64,
    /// One-sigma error; zero when unknown.
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceFit {
    /// Lorentzian FWHM, µeV.
    pub f_l: Measured,
    /// Gaussian FWHM, µeV.
    pub f_g: Measured,
    /// Voigt FWHM, µeV.
    pub gamma: Measured,
    pub gamma0: Option<f64>,
    pub ratio: Option<Measured>,
    pub chi2_red: f64,
}

/// Approximate Voigt FWHM from its Lorentzian and Gaussian FWHM.
pub fn olivero_fwhm(f_l: f64, f_g: f64) -> f64 {
    0.5346 * f_l + (0.2166 * f_l * f_l + f_g * f_g).sqrt()
}

/// Transform-limited linewidths in µeV: (Γ₀,X = ħ/τ_X, Γ₀,XX = ħ(1/τ_X + 1/τ_XX)).
pub fn transform_limit(tau_x: f64, tau_xx: Option<f64>) -> Result<(f64, Option<f64>), FitError> {
    if !(tau_x > 0.0) || tau_xx.is_some_and(|t| !(t > 0.0)) {
        return Err(FitError::Input("lifetimes must be positive".into()));
    }
    let hbar = HBAR_MEV_PS * 1e3;
    let gx = hbar / tau_x;
    Ok((gx, tau_xx.map(|t| gx + hbar / t)))
}

/// v(τ) = exp(−a|τ| − bτ²) with a = π·f_L/h, b = (π·f_G/h)² / (4 ln 2).
struct Envelope;

impl Model for Envelope {
    fn n_params(&self) -> usize {
        2
    }
    fn eval(&self, p: &[f64], x: f64, g: &mut [f64]) -> f64 {
        let v = (-p[0] * x.abs() - p[1] * x * x).exp();
        g[0] = -x.abs() * v;
        g[1] = -x * x * v;
        v
    }
    fn valid(&self, p: &[f64]) -> bool {
        p[0] >= 0.0 && p[1] >= 0.0
    }
    fn project(&self, p: &mut [f64]) {
        p[0] = p[0].max(0.0);
        p[1] = p[1].max(0.0);
    }
}

/// Fits the Voigt coherence envelope; `gamma0` (µeV) adds Γ/Γ₀ to the report.
pub fn fit_coherence(points: &[CoherencePoint], gamma0: Option<f64>) -> Result<CoherenceFit, FitError> {
    if points.len() < 6 {
        return Err(FitError::Input(format!("{} delay points, need at least 6", points.len())));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.delay_ps.abs().total_cmp(&b.delay_ps.abs()));
    let third = pts.len() / 3;
    let head: f64 = pts[..third].iter().map(|p| p.visibility).sum::<f64>() / third as f64;
    let tail: f64 = pts[pts.len() - third..].iter().map(|p| p.visibility).sum::<f64>() / third as f64;
    if !(tail < head) {
        return Err(FitError::NoDecay);
    }
    let known = pts.iter().all(|p| p.sigma > 0.0);
    let x: Vec<f64> = pts.iter().map(|p| p.delay_ps).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.visibility).collect();
    let s: Vec<f64> = pts.iter().map(|p| if known { p.sigma } else { 1.0 }).collect();

    // start values: −ln v = a|τ| + bτ² on points with usable contrast
    let usable: Vec<(f64, f64)> = pts
        .iter()
        .filter(|p| p.visibility > 0.05 && p.visibility < 1.0 && p.delay_ps != 0.0)
        .map(|p| (p.delay_ps.abs(), -p.visibility.ln()))
        .collect();
    let (mut a0, mut b0) = (0.0, 0.0);
    if usable.len() >= 2 {
        let m = DMatrix::from_fn(usable.len(), 2, |i, j| if j == 0 { usable[i].0 } else { usable[i].0.powi(2) });
        let r = DVector::from_iterator(usable.len(), usable.iter().map(|u| u.1));
        if let Ok(sol) = m.clone().svd(true, true).solve(&r, 1e-14) {
            a0 = sol[0];
            b0 = sol[1];
        }
    }
    let span = x.iter().map(|t| t.abs()).fold(0.0, f64::max);
    if !(a0 > 0.0) {
        a0 = 0.5 / span;
    }
    if !(b0 > 0.0) {
        b0 = 0.5 / (span * span);
    }
    let mut res = levenberg_marquardt(&Envelope, &x, &y, &s, &[a0, b0], &LmOptions::default())?;
    if !known {
        res.scale_covariance();
    }
    let (a, b) = (res.params[0], res.params[1]);
    if a <= 0.0 && b <= 0.0 {
        return Err(FitError::NoDecay);
    }
    // a = π f_L c, b = (π f_G c)² / (4 ln 2), with c the µeV → ps⁻¹ factor
    let c = uev_to_per_ps(1.0);
    let f_l = a / (PI * c);
    let f_g = (4.0 * LN_2 * b).sqrt() / (PI * c);
    let dfl_da = 1.0 / (PI * c);
    let dfg_db = if b > 0.0 { (4.0 * LN_2).sqrt() / (PI * c) / (2.0 * b.sqrt()) } else { f64::INFINITY };
    let cov = &res.covariance;
    let root = (0.2166 * f_l * f_l + f_g * f_g).sqrt();
    let gamma = olivero_fwhm(f_l, f_g);
    // dΓ/db stays finite at b = 0
    let dg_da = (0.5346 + 0.2166 * f_l / root) * dfl_da;
    let dg_db = 4.0 * LN_2 / (PI * c).powi(2) / (2.0 * root);
    let var_g = dg_da * dg_da * cov[(0, 0)] + 2.0 * dg_da * dg_db * cov[(0, 1)] + dg_db * dg_db * cov[(1, 1)];
    let gamma = Measured::new(gamma, var_g.max(0.0).sqrt());
    let ratio = gamma0.map(|g0| Measured::new(gamma.value / g0, gamma.error / g0));
    Ok(CoherenceFit {
        f_l: Measured::new(f_l, dfl_da * res.error(0)),
        f_g: Measured::new(f_g, dfg_db * res.error(1)),
        gamma,
        gamma0,
        ratio,
        chi2_red: res.chi2_red(),
    })
}
