//! End-to-end runs: simulate, route, correlate, integrate, normalize.

use serde::Serialize;
use thiserror::Error;

use crate::correlator::{self, default_half_width, g2_from_peaks, integrate_peaks, normalize_center, CorrelationRequest};
use crate::emitter::{CascadeSource, DetectorModel, EmitterModel, LaserClock, Line, SimError};
use crate::fit::{hom_visibility, FitError};
use crate::interferometer::{hbt_route, simulate_hom, HomBench, InterferometerError, Polarization};
use crate::measured::Measured;
use crate::timetag::{CoincidenceHistogram, PeakAreas, TagError, TimeTag};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Interferometer(#[from] InterferometerError),
    #[error(transparent)]
    Correlator(#[from] correlator::CorrelatorError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Tag(#[from] TagError),
}

/// Histogram settings for pulsed data: `periods` peaks on either side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeakBinning {
    pub bin_width: u64,
    pub periods: u64,
}

impl Default for PeakBinning {
    fn default() -> Self {
        PeakBinning { bin_width: 25, periods: 6 }
    }
}

impl PeakBinning {
    pub fn request(&self, period: u64) -> Result<CorrelationRequest, PipelineError> {
        let w = self.periods * period;
        // round the window up to whole bins
        let w = w.div_ceil(self.bin_width) * self.bin_width;
        Ok(CorrelationRequest::new(self.bin_width, w)?)
    }

    pub fn histogram(&self, a: &[TimeTag], b: &[TimeTag], period: u64) -> Result<CoincidenceHistogram, PipelineError> {
        Ok(correlator::correlate(a, b, &self.request(period)?)?)
    }

    pub fn peaks(&self, a: &[TimeTag], b: &[TimeTag], period: u64) -> Result<(CoincidenceHistogram, PeakAreas), PipelineError> {
        let h = self.histogram(a, b, period)?;
        let p = integrate_peaks(&h, period, default_half_width(period))?;
        Ok((h, p))
    }
}

/// One HOM measurement of a cascade line in co and cross polarization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomExperiment {
    pub emitter: EmitterModel,
    pub clock: LaserClock,
    pub detector: DetectorModel,
    /// Polarization is overridden per run.
    pub bench: HomBench,
    pub line: Line,
    pub n_pulses: u64,
    pub binning: PeakBinning,
    pub seed: u64,
}

impl HomExperiment {
    /// Lossless, jitter-free setup at 80 MHz.
    pub fn ideal(tau_xx: f64, tau_x: f64, n_pulses: u64, seed: u64) -> Self {
        let clock = LaserClock::default();
        HomExperiment {
            emitter: EmitterModel::ideal(tau_xx, tau_x),
            clock,
            detector: DetectorModel::ideal(),
            bench: HomBench { delay_ps: clock.period_ps, ..HomBench::co() },
            line: Line::X,
            n_pulses,
            binning: PeakBinning::default(),
            seed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HomRun {
    pub co: PeakAreas,
    pub cross: PeakAreas,
    /// Normalized centre areas.
    pub co_center: Measured,
    pub cross_center: Measured,
    pub v_raw: Measured,
}

impl HomRun {
    /// Cross-polarized areas of peaks −n..=n over the |k| ≥ 2 mean.
    pub fn cross_pattern(&self, n: i64) -> Vec<(i64, Measured)> {
        normalized_pattern(&self.cross, n)
    }
}

/// Peak areas −n..=n with errors, divided by the mean of |k| ≥ 2 peaks.
pub fn normalized_pattern(peaks: &PeakAreas, n: i64) -> Vec<(i64, Measured)> {
    let side: Vec<f64> = peaks.areas.iter().filter(|(k, _)| k.abs() >= 2).map(|(_, a)| a.area).collect();
    let mean = side.iter().sum::<f64>() / side.len().max(1) as f64;
    let mean = Measured::new(mean, mean.sqrt() / (side.len().max(1) as f64).sqrt());
    (-n..=n)
        .filter_map(|k| peaks.get(k).map(|a| (k, Measured::new(a.area, a.area.max(1.0).sqrt()).ratio(mean))))
        .collect()
}

/// Coincidence peaks between the two outputs of one polarization setting.
pub fn hom_peaks(exp: &HomExperiment, polarization: Polarization) -> Result<PeakAreas, PipelineError> {
    let source = CascadeSource::new(exp.emitter, exp.clock, exp.seed)?;
    let bench = HomBench { polarization, ..exp.bench };
    // distinct routing streams for the two settings
    let salt = match polarization {
        Polarization::Co => 0,
        Polarization::Cross => 1,
    };
    let ports = simulate_hom(&source, exp.line, &bench, [exp.detector; 2], [1, 2], exp.n_pulses, exp.seed ^ (salt << 32))?;
    Ok(exp.binning.peaks(&ports.out1, &ports.out2, exp.clock.period_ps)?.1)
}

/// simulate → HOM → correlate → integrate → normalize → V_raw.
pub fn run_hom(exp: &HomExperiment) -> Result<HomRun, PipelineError> {
    let co = hom_peaks(exp, Polarization::Co)?;
    let cross = hom_peaks(exp, Polarization::Cross)?;
    let co_center = normalize_center(&co, 2)?;
    let cross_center = normalize_center(&cross, 2)?;
    let v_raw = hom_visibility(co_center, cross_center)?;
    Ok(HomRun { co, cross, co_center, cross_center, v_raw })
}

/// HBT g²(0) of one detected stream.
pub fn hbt_g2(tags: &[TimeTag], period: u64, binning: &PeakBinning, seed: u64) -> Result<Measured, PipelineError> {
    let (a, b) = hbt_route(tags, seed);
    let (_, peaks) = binning.peaks(&a, &b, period)?;
    Ok(g2_from_peaks(&peaks)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binning_window_whole_bins() {
        let r = PeakBinning { bin_width: 24, periods: 6 }.request(12_500).unwrap();
        assert_eq!(r.window % 24, 0);
        assert!(r.window >= 75_000);
    }

    #[test]
    fn small_hom_run() {
        let exp = HomExperiment::ideal(161.0, 619.0, 200_000, 4);
        let run = run_hom(&exp).unwrap();
        assert!((run.v_raw.value - 0.794).abs() < 5.0 * run.v_raw.error.max(0.01));
        assert!((run.cross_center.value - 0.5).abs() < 0.03);
    }
}
