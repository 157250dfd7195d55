//! Nonlinear and linear fits: lifetimes, HOM visibilities, Stark shifts and
//! coherence envelopes.

pub mod coherence;
pub mod hom;
pub mod lifetime;
pub mod lm;
pub mod special;
pub mod stark;

pub use coherence::{fit_coherence, fit_fringe, olivero_fwhm, transform_limit, CoherenceFit, CoherencePoint, FringeFit};
pub use hom::{hom_corrected, hom_visibility, VisibilityRecord};
pub use lifetime::{bi_curve, fit_lifetime_bi, fit_lifetime_mono, mono_curve, Irf, IrfMode, LifetimeFit, LifetimeOptions, Weighting};
pub use stark::{fit_stark, fit_stark_field, state_params, StarkParams, StarkPoint};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid fit input: {0}")]
    Input(String),
    #[error("no convergence after {iterations} iterations (chi2 = {chi2:.4e}, params = {params:?})")]
    NonConvergence { iterations: usize, chi2: f64, params: Vec<f64> },
    #[error("singular fit: {0}")]
    Singular(String),
    #[error("fringe undersampled: step {step_nm:.1} nm >= {limit_nm:.1} nm (quarter wavelength)")]
    Aliasing { step_nm: f64, limit_nm: f64 },
    #[error("visibility envelope does not decay over the scanned delays")]
    NoDecay,
}
