//! Event-based interferometers (HBT, unbalanced Mach-Zehnder HOM, Michelson)
//! and the two-photon purity oracle.

mod hbt;
mod hom;
mod michelson;
mod purity;

pub use hbt::hbt_route;
pub use hom::{hom_peak_oracle, hom_route, simulate_hom, HomBench, HomOutput, HomPorts, Polarization};
pub use michelson::{coherence_envelope, michelson_scan, FringeDataset, LineShape, MichelsonScan};
pub use purity::{purity_oracle, PurityReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InterferometerError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Sim(#[from] crate::emitter::SimError),
}

/// Single-photon temporal mode: a one-sided exponential wave packet.
///
/// Amplitude ∝ exp(-(t - start)/(2 tau)) · exp(i·detuning·t) for t ≥ start.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavePacket {
    /// ps, relative to the nominal time of the photon's pulse.
    pub start: f64,
    /// Intensity decay constant, ps.
    pub tau: f64,
    /// Angular frequency offset, rad/ps.
    pub detuning: f64,
}

impl WavePacket {
    pub fn new(start: f64, tau: f64) -> Self {
        WavePacket { start, tau, detuning: 0.0 }
    }

    /// |⟨φ₁|φ₂⟩|² for packets whose starts are shifted by `shift1`, `shift2`.
    ///
    /// For equal lifetimes and detunings this is exp(-|Δstart|/τ).
    pub fn overlap_sq(&self, shift1: f64, other: &WavePacket, shift2: f64) -> f64 {
        let s1 = self.start + shift1;
        let s2 = other.start + shift2;
        // `early` starts first; the overlap integral runs from the later start
        let (early, late, gap) = if s1 <= s2 { (self, other, s2 - s1) } else { (other, self, s1 - s2) };
        let g1 = 0.5 / early.tau;
        let g2 = 0.5 / late.tau;
        let dw = self.detuning - other.detuning;
        let num = (-gap / early.tau).exp() / (early.tau * late.tau);
        num / ((g1 + g2).powi(2) + dw * dw)
    }
}
