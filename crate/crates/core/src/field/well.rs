//! Hole ground state in a triangular well V(z) = eF·z, z ≥ 0, with an
//! infinite wall at z = 0.

use serde::Serialize;

use super::FieldError;
use crate::units::{AIRY_A1, HBAR2_OVER_2M0_EV_NM2};

/// Ground state of the well.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WellState {
    /// Ground-state energy, meV.
    pub e1_mev: f64,
    /// ⟨z⟩, nm.
    pub delta_nm: f64,
}

/// Numerical ground state with the virial cross-check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NumericWell {
    pub state: WellState,
    /// ⟨V⟩ = eF⟨z⟩, meV.
    pub potential_mev: f64,
    /// ⟨V⟩ / (2E₁/3) − 1.
    pub virial_error: f64,
    pub grid_points: usize,
}

fn check_field(f_v: f64, m_hh: f64) -> Result<(), FieldError> {
    if !(f_v > 0.0) {
        return Err(FieldError::Parameter(format!("triangular well needs F_v > 0 (got {f_v} V/nm)")));
    }
    if !(m_hh > 0.0) {
        return Err(FieldError::Parameter("effective mass must be positive".into()));
    }
    Ok(())
}

/// Length scale l = (ħ²/(2m·eF))^(1/3) in nm.
fn length_scale(f_v: f64, m_hh: f64) -> f64 {
    (HBAR2_OVER_2M0_EV_NM2 / m_hh / f_v).cbrt()
}

/// Airy-function solution: E₁ = −a₁·(ħ²(eF)²/2m)^(1/3), δ = 2E₁/(3eF).
pub fn triangular_well(f_v: f64, m_hh: f64) -> Result<WellState, FieldError> {
    check_field(f_v, m_hh)?;
    let e1 = -AIRY_A1 * (HBAR2_OVER_2M0_EV_NM2 / m_hh * f_v * f_v).cbrt();
    Ok(WellState { e1_mev: e1 * 1e3, delta_nm: 2.0 * e1 / (3.0 * f_v) })
}

/// Number of eigenvalues of the symmetric tridiagonal matrix below `x`
/// (Sturm sequence count).
fn count_below(diag: &[f64], off: f64, x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for (i, &d) in diag.iter().enumerate() {
        let prev = if i == 0 { 0.0 } else { off * off / q };
        q = d - x - prev;
        if q == 0.0 {
            q = -f64::EPSILON * (d.abs() + off.abs());
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solves (T − μ)y = b for symmetric tridiagonal T (Thomas algorithm).
fn tridiagonal_solve(diag: &[f64], off: f64, mu: f64, b: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0] - mu;
    c[0] = off / denom;
    d[0] = b[0] / denom;
    for i in 1..n {
        denom = diag[i] - mu - off * c[i - 1];
        c[i] = off / denom;
        d[i] = (b[i] - off * d[i - 1]) / denom;
    }
    let mut y = vec![0.0; n];
    y[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        y[i] = d[i] - c[i] * y[i + 1];
    }
    y
}

/// Finite-difference ground state on `n` interior points over
/// [0, `extent` length scales], wall at both ends.
///
/// The lowest eigenvalue is bracketed by Sturm bisection, the eigenvector
/// follows from inverse iteration.
pub fn triangular_well_numeric(f_v: f64, m_hh: f64, n: usize, extent: f64) -> Result<NumericWell, FieldError> {
    check_field(f_v, m_hh)?;
    if n < 100 || !(extent > 5.0) {
        return Err(FieldError::Parameter("need n >= 100 points over more than 5 length scales".into()));
    }
    let l = length_scale(f_v, m_hh);
    let zmax = extent * l;
    let h = zmax / (n + 1) as f64;
    let kinetic = HBAR2_OVER_2M0_EV_NM2 / m_hh / (h * h);
    let z: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
    // energies in eV
    let diag: Vec<f64> = z.iter().map(|&zi| 2.0 * kinetic + f_v * zi).collect();
    let off = -kinetic;

    let (mut lo, mut hi) = (0.0, f_v * zmax + 4.0 * kinetic);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(&diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let e1 = 0.5 * (lo + hi);

    // shift slightly below the eigenvalue so the solve stays well posed
    let mu = e1 - 1e-9 * e1;
    let mut psi = vec![1.0; n];
    for _ in 0..8 {
        psi = tridiagonal_solve(&diag, off, mu, &psi);
        let norm = psi.iter().map(|v| v * v).sum::<f64>().sqrt();
        psi.iter_mut().for_each(|v| *v /= norm);
    }
    let z_mean: f64 = psi.iter().zip(&z).map(|(p, zi)| p * p * zi).sum();
    let potential = f_v * z_mean;
    Ok(NumericWell {
        state: WellState { e1_mev: e1 * 1e3, delta_nm: z_mean },
        potential_mev: potential * 1e3,
        virial_error: potential / (2.0 * e1 / 3.0) - 1.0,
        grid_points: n,
    })
}
