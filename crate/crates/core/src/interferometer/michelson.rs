//! Michelson interferometer with a coarse linear stage and a piezo stage.
//!
//! The coarse stage sets the delay τ_d = 2·x/c (retroreflector: the optical
//! path changes by twice the stage displacement). At each coarse position the
//! piezo scans `x` and the detected intensity is
//! I(x) = I₀·(1 + v(τ_d)·cos(4πx/λ + φ₀)).

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::InterferometerError;
use crate::rng::{Domain, StreamFactory};
use crate::units::{uev_to_per_ps, wavelength_nm, SPEED_OF_LIGHT_MM_PER_PS};

/// Voigt line: Lorentzian and Gaussian FWHM in µeV, centre in eV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineShape {
    pub f_l: f64,
    pub f_g: f64,
    pub center: f64,
}

impl LineShape {
    pub fn validate(&self) -> Result<(), InterferometerError> {
        if !(self.f_l >= 0.0 && self.f_g >= 0.0) || (self.f_l == 0.0 && self.f_g == 0.0) {
            return Err(InterferometerError::Parameter("linewidths must be >= 0 and not both zero".into()));
        }
        if !(self.center > 0.0) {
            return Err(InterferometerError::Parameter("zero wavelength: line centre must be positive".into()));
        }
        Ok(())
    }

    pub fn wavelength_nm(&self) -> f64 {
        wavelength_nm(self.center)
    }
}

/// First-order coherence envelope |g¹(τ)| of a Voigt line (Fourier transform
/// of the line shape), `tau` in ps, widths in µeV.
pub fn coherence_envelope(f_l: f64, f_g: f64, tau: f64) -> f64 {
    let nu_l = uev_to_per_ps(f_l);
    let nu_g = uev_to_per_ps(f_g);
    let lorentz = (-std::f64::consts::PI * nu_l * tau.abs()).exp();
    let gauss = (-(std::f64::consts::PI * nu_g * tau).powi(2) / (4.0 * std::f64::consts::LN_2)).exp();
    lorentz * gauss
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MichelsonScan {
    /// Coarse stage positions, mm.
    pub coarse_positions_mm: Vec<f64>,
    /// Piezo step, nm.
    pub piezo_step_nm: f64,
    /// Piezo steps per coarse position.
    pub steps: usize,
    /// Mean intensity I₀.
    pub i0: f64,
    /// Gaussian intensity noise, as a fraction of I₀.
    pub noise: f64,
    pub seed: u64,
}

impl Default for MichelsonScan {
    fn default() -> Self {
        MichelsonScan {
            // 0..60 mm, i.e. 0..400 ps of delay
            coarse_positions_mm: (0..=20).map(|i| 3.0 * i as f64).collect(),
            piezo_step_nm: 20.0,
            steps: 100,
            i0: 1.0,
            noise: 0.0,
            seed: 0,
        }
    }
}

/// Fringe scan at one coarse position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeDataset {
    pub coarse_mm: f64,
    /// Relative delay τ_d in ps.
    pub delay_ps: f64,
    /// Envelope value used to generate the data.
    pub true_visibility: f64,
    pub wavelength_nm: f64,
    /// (piezo position nm, intensity).
    pub samples: Vec<(f64, f64)>,
}

impl FringeDataset {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "position_nm,intensity")?;
        for (x, i) in &self.samples {
            writeln!(w, "{x},{i}")?;
        }
        Ok(())
    }
}

/// Delay τ_d (ps) for a coarse stage displacement in mm.
pub fn stage_delay_ps(coarse_mm: f64) -> f64 {
    2.0 * coarse_mm / SPEED_OF_LIGHT_MM_PER_PS
}

pub fn michelson_scan(line: &LineShape, scan: &MichelsonScan) -> Result<Vec<FringeDataset>, InterferometerError> {
    line.validate()?;
    if !(scan.piezo_step_nm > 0.0) {
        return Err(InterferometerError::Parameter("piezo step must be positive".into()));
    }
    let lambda = line.wavelength_nm();
    let streams = StreamFactory::new(scan.seed, Domain::Noise);
    let k = 4.0 * std::f64::consts::PI / lambda;
    Ok(scan
        .coarse_positions_mm
        .iter()
        .enumerate()
        .map(|(idx, &mm)| {
            let mut rng = streams.stream(idx as u64);
            let delay = stage_delay_ps(mm);
            let v = coherence_envelope(line.f_l, line.f_g, delay);
            let phi0 = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
            let samples = (0..scan.steps)
                .map(|s| {
                    let x = s as f64 * scan.piezo_step_nm;
                    let mut i = scan.i0 * (1.0 + v * (k * x + phi0).cos());
                    if scan.noise > 0.0 {
                        let z: f64 = rng.sample(StandardNormal);
                        i += z * scan.noise * scan.i0;
                    }
                    (x, i)
                })
                .collect();
            FringeDataset { coarse_mm: mm, delay_ps: delay, true_visibility: v, wavelength_nm: lambda, samples }
        })
        .collect())
}
