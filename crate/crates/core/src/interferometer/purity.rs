//! Brute-force purity of one cascade photon.
//!
//! The two-photon amplitude ψ(t₁, t₂) ∝ e^{-t₁/2τ_XX} · e^{-(t₂-t₁)/2τ_X} for
//! t₂ ≥ t₁ is sampled on an n×n midpoint grid. Tracing out the second photon
//! gives ρ = Ψ Ψᵀ, and the purity is Tr(ρ²). No closed form is used.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::InterferometerError;

#[derive(Clone, Debug, Serialize)]
pub struct PurityReport {
    pub purity: f64,
    /// Tr ρ after normalization.
    pub trace: f64,
    /// max |ρᵢⱼ − ρⱼᵢ|.
    pub max_asymmetry: f64,
    /// Smallest eigenvalue of ρ, when requested.
    pub min_eigenvalue: Option<f64>,
    pub grid_n: usize,
    pub t_max: f64,
}

/// Reduced-state purity of the XX photon for lifetimes `tau_xx`, `tau_x`.
///
/// Requires `grid_n >= 256` and `t_max >= 10 (tau_xx + tau_x)`. Set
/// `eigenvalues` to also diagonalize ρ (O(n³), slow for large grids).
pub fn purity_oracle(
    tau_xx: f64,
    tau_x: f64,
    grid_n: usize,
    t_max: f64,
    eigenvalues: bool,
) -> Result<PurityReport, InterferometerError> {
    if !(tau_xx > 0.0 && tau_x > 0.0) {
        return Err(InterferometerError::Parameter(format!(
            "lifetimes must be positive (tau_xx = {tau_xx}, tau_x = {tau_x})"
        )));
    }
    if grid_n < 256 {
        return Err(InterferometerError::Parameter(format!("grid_n = {grid_n} < 256")));
    }
    if !(t_max >= 10.0 * (tau_xx + tau_x)) {
        return Err(InterferometerError::Parameter(format!(
            "t_max = {t_max} ps shorter than 10 (tau_xx + tau_x)"
        )));
    }
    let n = grid_n;
    let dt = t_max / n as f64;
    let t = |i: usize| (i as f64 + 0.5) * dt;

    // rows: first photon (t1), columns: second photon (t2); t2 >= t1 incl. diagonal
    let mut psi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let t1 = t(i);
        for j in i..n {
            let t2 = t(j);
            psi[(i, j)] = (-t1 / (2.0 * tau_xx) - (t2 - t1) / (2.0 * tau_x)).exp();
        }
    }
    let norm = psi.norm();
    psi /= norm;

    let rho = &psi * psi.transpose();
    let trace = rho.trace();
    let mut max_asymmetry = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asymmetry = max_asymmetry.max((rho[(i, j)] - rho[(j, i)]).abs());
        }
    }
    // Tr(ρ²) = Σ ρᵢⱼ ρⱼᵢ
    let purity = rho.component_mul(&rho.transpose()).sum();
    let min_eigenvalue = eigenvalues.then(|| SymmetricEigen::new(rho).eigenvalues.min());
    Ok(PurityReport { purity, trace, max_asymmetry, min_eigenvalue, grid_n, t_max })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_matrix_is_physical() {
        let r = purity_oracle(100.0, 250.0, 256, 3500.0, true).unwrap();
        assert!((r.trace - 1.0).abs() < 1e-12);
        assert!(r.max_asymmetry < 1e-15);
        assert!(r.min_eigenvalue.unwrap() > -1e-10);
        assert!(r.purity > 0.0 && r.purity <= 1.0);
    }

    #[test]
    fn fast_biexciton_limit_is_pure() {
        // r -> 0: state becomes separable
        let r = purity_oracle(1.0, 1000.0, 512, 10_010.0, false).unwrap();
        assert!(r.purity > 0.99, "{}", r.purity);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(purity_oracle(0.0, 1.0, 256, 100.0, false).is_err());
        assert!(purity_oracle(1.0, 1.0, 128, 100.0, false).is_err());
        assert!(purity_oracle(1.0, 1.0, 256, 5.0, false).is_err());
    }
}
