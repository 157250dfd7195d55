//! Monte Carlo XX–X cascade source driven by a pulsed laser.
//!
//! Every pulse draws from its own random substream, so the photon record of
//! pulse `k` is a pure function of `(model, seed, k)`. Streams are produced
//! in parallel over pulse chunks and merged in pulse order.

use arrayvec::ArrayVec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlator::{self, CorrelationRequest};
use crate::interferometer::WavePacket;
use crate::rng::{Domain, StreamFactory};
use crate::timetag::{flags, CoincidenceHistogram, TimeTag};
use crate::units::fwhm_to_sigma;

/// Pulses handled by one parallel work item.
pub const CHUNK_PULSES: u64 = 1 << 15;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid model: {0}")]
    Model(String),
    #[error("acquisition of {n_pulses} pulses at {period_ps} ps overflows the 64-bit picosecond range")]
    Capacity { n_pulses: u64, period_ps: u64 },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Correlation(#[from] crate::correlator::CorrelatorError),
}

/// Cascade parameters. Times in ps, background in Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitterModel {
    pub tau_xx: f64,
    pub tau_x: f64,
    /// Probability per pulse of preparing |XX⟩.
    pub p_exc: f64,
    /// Probability per pulse and line of one extra uncorrelated photon.
    pub p_multi: f64,
    /// Dark/stray count rate per signal channel.
    pub background_rate: f64,
}

impl EmitterModel {
    /// Ideal deterministic cascade: p_exc = 1, no multi-photon events, no background.
    pub fn ideal(tau_xx: f64, tau_x: f64) -> Self {
        EmitterModel { tau_xx, tau_x, p_exc: 1.0, p_multi: 0.0, background_rate: 0.0 }
    }

    /// Lifetime ratio r = τ_XX / τ_X.
    pub fn ratio(&self) -> f64 {
        self.tau_xx / self.tau_x
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.tau_xx > 0.0 && self.tau_x > 0.0) {
            return Err(SimError::Model(format!(
                "lifetimes must be positive (tau_xx = {}, tau_x = {})",
                self.tau_xx, self.tau_x
            )));
        }
        for (name, p) in [("p_exc", self.p_exc), ("p_multi", self.p_multi)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Model(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if !(self.background_rate >= 0.0) {
            return Err(SimError::Model("background_rate must be non-negative".into()));
        }
        Ok(())
    }

    /// g²(0) of one line under this model: 2·p_exc·p_multi / (p_exc + p_multi)².
    pub fn expected_g2(&self) -> f64 {
        let n = self.p_exc + self.p_multi;
        if n == 0.0 {
            return 0.0;
        }
        2.0 * self.p_exc * self.p_multi / (n * n)
    }
}

/// Multi-photon probability that yields `target` g²(0) at excitation `p_exc`.
///
/// Inverts g² = 2·p·m/(p + m)², taking the small root.
pub fn p_multi_for_g2(target: f64, p_exc: f64) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    // g (p+m)^2 = 2 p m  =>  g m^2 + (2 g p - 2 p) m + g p^2 = 0
    let a = target;
    let b = 2.0 * p_exc * (target - 1.0);
    let c = target * p_exc * p_exc;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    (-b - disc.sqrt()) / (2.0 * a)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserClock {
    pub rep_rate_hz: f64,
    pub period_ps: u64,
    /// Gaussian FWHM of the pulse arrival time.
    pub pulse_jitter_fwhm: f64,
}

impl Default for LaserClock {
    fn default() -> Self {
        LaserClock::from_rep_rate(80.0e6)
    }
}

impl LaserClock {
    pub fn from_rep_rate(rep_rate_hz: f64) -> Self {
        LaserClock { rep_rate_hz, period_ps: (1.0e12 / rep_rate_hz).round() as u64, pulse_jitter_fwhm: 0.0 }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.rep_rate_hz > 0.0) || self.period_ps == 0 {
            return Err(SimError::Model("laser repetition rate must be positive".into()));
        }
        if ((1.0e12 / self.rep_rate_hz) - self.period_ps as f64).abs() > 1.0 {
            return Err(SimError::Model(format!(
                "period {} ps inconsistent with {} Hz",
                self.period_ps, self.rep_rate_hz
            )));
        }
        if !(self.pulse_jitter_fwhm >= 0.0) {
            return Err(SimError::Model("pulse jitter must be non-negative".into()));
        }
        Ok(())
    }

    /// Nominal time of pulse `k`. Acquisition starts one period before pulse 0
    /// so jittered tags never go negative.
    #[inline]
    pub fn pulse_time(&self, k: u64) -> u64 {
        (k + 1) * self.period_ps
    }

    fn check_capacity(&self, n_pulses: u64) -> Result<(), SimError> {
        let cap = Err(SimError::Capacity { n_pulses, period_ps: self.period_ps });
        match n_pulses.checked_add(4).and_then(|n| n.checked_mul(self.period_ps)) {
            Some(end) if end < u64::MAX / 2 => Ok(()),
            _ => cap,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Gaussian timing jitter, FWHM in ps.
    pub jitter_fwhm: f64,
    pub efficiency: f64,
    pub dead_time: f64,
}

impl Default for DetectorModel {
    /// 15 ps jitter; efficiency is a placeholder, not a measured value.
    fn default() -> Self {
        DetectorModel { jitter_fwhm: 15.0, efficiency: 0.85, dead_time: 0.0 }
    }
}

impl DetectorModel {
    /// Lossless, jitter-free detector.
    pub fn ideal() -> Self {
        DetectorModel { jitter_fwhm: 0.0, efficiency: 1.0, dead_time: 0.0 }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.jitter_fwhm >= 0.0) || !(self.dead_time >= 0.0) {
            return Err(SimError::Model("detector jitter and dead time must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(SimError::Model(format!("efficiency {} outside [0, 1]", self.efficiency)));
        }
        Ok(())
    }

    /// Detection of a photon at absolute time `base + offset`, or `None` if lost.
    #[inline]
    pub fn detect(&self, base: u64, offset: f64, rng: &mut ChaCha8Rng) -> Option<u64> {
        if self.efficiency < 1.0 && rng.random::<f64>() >= self.efficiency {
            return None;
        }
        let mut t = offset;
        if self.jitter_fwhm > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            t += z * fwhm_to_sigma(self.jitter_fwhm);
        }
        let abs = base as i64 + t.round() as i64;
        (abs >= 0).then_some(abs as u64)
    }
}

/// Channel numbers written into the tags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelMap {
    pub sync: u16,
    pub xx: u16,
    pub x: u16,
}

impl Default for ChannelMap {
    fn default() -> Self {
        ChannelMap { sync: 0, xx: 1, x: 2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorSet {
    pub sync: DetectorModel,
    pub xx: DetectorModel,
    pub x: DetectorModel,
}

impl DetectorSet {
    pub fn uniform(det: DetectorModel) -> Self {
        DetectorSet { sync: det, xx: det, x: det }
    }

    fn validate(&self) -> Result<(), SimError> {
        self.sync.validate()?;
        self.xx.validate()?;
        self.x.validate()
    }
}

/// Which cascade photon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Line {
    Xx,
    X,
}

/// An emitted photon with its simulation metadata.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Photon {
    pub pulse: u64,
    /// Position in the pulse's emission list; `(pulse, seq)` identifies a photon.
    pub seq: u8,
    /// Emission time relative to the nominal time of `pulse`, in ps.
    pub offset: f64,
    /// Temporal mode, with `start` relative to the nominal pulse time.
    pub packet: WavePacket,
    pub flags: u16,
}

/// Photons emitted after one laser pulse.
#[derive(Clone, Debug, Default)]
pub struct PulseEmission {
    /// Laser pulse arrival relative to its nominal time.
    pub laser_offset: f64,
    pub xx: ArrayVec<Photon, 2>,
    pub x: ArrayVec<Photon, 2>,
}

impl PulseEmission {
    pub fn line(&self, line: Line) -> &[Photon] {
        match line {
            Line::Xx => &self.xx,
            Line::X => &self.x,
        }
    }
}

#[inline]
fn exp_sample(rng: &mut ChaCha8Rng, tau: f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e * tau
}

/// Lorentzian (Cauchy) sample with half-width `gamma`.
#[inline]
fn cauchy_sample(rng: &mut ChaCha8Rng, gamma: f64) -> f64 {
    let u: f64 = rng.random();
    gamma * (std::f64::consts::PI * (u - 0.5)).tan()
}

/// Deterministic per-pulse photon generator.
#[derive(Clone)]
pub struct CascadeSource {
    pub model: EmitterModel,
    pub clock: LaserClock,
    streams: StreamFactory,
}

impl CascadeSource {
    pub fn new(model: EmitterModel, clock: LaserClock, seed: u64) -> Result<Self, SimError> {
        model.validate()?;
        clock.validate()?;
        Ok(CascadeSource { model, clock, streams: StreamFactory::new(seed, Domain::Emission) })
    }

    /// Photons of pulse `k`.
    ///
    /// The X photon's temporal mode starts when the XX photon is emitted and
    /// decays with τ_X. The XX photon's mode starts with the pulse and decays
    /// with τ_XX; its spectral correlation with the X photon shows up in the
    /// single-photon state as a Lorentzian-distributed detuning of half-width
    /// 1/(2τ_X), which reproduces the reduced density matrix exactly.
    pub fn pulse(&self, k: u64) -> PulseEmission {
        let m = &self.model;
        let mut rng = self.streams.stream(k);
        let mut out = PulseEmission::default();
        if self.clock.pulse_jitter_fwhm > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            out.laser_offset = z * fwhm_to_sigma(self.clock.pulse_jitter_fwhm);
        }
        let t0 = out.laser_offset;
        if m.p_exc > 0.0 && rng.random::<f64>() < m.p_exc {
            let t_xx = t0 + exp_sample(&mut rng, m.tau_xx);
            let t_x = t_xx + exp_sample(&mut rng, m.tau_x);
            let detuning = cauchy_sample(&mut rng, 0.5 / m.tau_x);
            out.xx.push(Photon {
                pulse: k,
                seq: 0,
                offset: t_xx,
                packet: WavePacket { start: t0, tau: m.tau_xx, detuning },
                flags: flags::CASCADE,
            });
            out.x.push(Photon {
                pulse: k,
                seq: 0,
                offset: t_x,
                packet: WavePacket { start: t_xx, tau: m.tau_x, detuning: 0.0 },
                flags: flags::CASCADE,
            });
        }
        if m.p_multi > 0.0 {
            if rng.random::<f64>() < m.p_multi {
                let t = t0 + exp_sample(&mut rng, m.tau_xx);
                out.xx.push(Photon {
                    pulse: k,
                    seq: out.xx.len() as u8,
                    offset: t,
                    packet: WavePacket { start: t0, tau: m.tau_xx, detuning: 0.0 },
                    flags: flags::MULTI_PHOTON,
                });
            }
            if rng.random::<f64>() < m.p_multi {
                let t = t0 + exp_sample(&mut rng, m.tau_x);
                out.x.push(Photon {
                    pulse: k,
                    seq: out.x.len() as u8,
                    offset: t,
                    packet: WavePacket { start: t0, tau: m.tau_x, detuning: 0.0 },
                    flags: flags::MULTI_PHOTON,
                });
            }
        }
        out
    }

    /// All photons of one line for pulses `range`, in pulse order.
    pub fn photons(&self, line: Line, range: std::ops::Range<u64>) -> Vec<Photon> {
        range.flat_map(|k| self.pulse(k).line(line).to_vec()).collect()
    }
}

/// Detected streams of one cascade simulation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CascadeStreams {
    pub sync: Vec<TimeTag>,
    pub xx: Vec<TimeTag>,
    pub x: Vec<TimeTag>,
}

/// Poissonian background tags for pulse slot `k` on one channel.
fn background_slot(
    rate_hz: f64,
    dist: Option<&Poisson<f64>>,
    streams: &StreamFactory,
    clock: &LaserClock,
    k: u64,
    channel: u16,
    out: &mut Vec<TimeTag>,
) {
    let Some(dist) = dist else { return };
    if rate_hz <= 0.0 {
        return;
    }
    let mut rng = streams.stream(k);
    let n = dist.sample(&mut rng) as u64;
    let base = clock.pulse_time(k);
    for _ in 0..n {
        let dt = (rng.random::<f64>() * clock.period_ps as f64) as u64;
        out.push(TimeTag::new(channel, base + dt).with_flags(flags::BACKGROUND));
    }
}

/// Removes tags that fall within `dead_time` of the previous accepted tag of
/// the same channel. Input must be sorted.
pub fn apply_dead_time(tags: &mut Vec<TimeTag>, dead_time: f64) {
    if dead_time <= 0.0 {
        return;
    }
    let dead = dead_time.ceil() as u64;
    let mut last: std::collections::HashMap<u16, u64> = Default::default();
    tags.retain(|t| match last.get(&t.channel) {
        Some(&prev) if t.time < prev + dead => false,
        _ => {
            last.insert(t.channel, t.time);
            true
        }
    });
}

pub(crate) fn finish_stream(mut tags: Vec<TimeTag>, dead_time: f64) -> Vec<TimeTag> {
    if crate::timetag::first_unsorted(&tags).is_some() {
        tags.sort_unstable();
    }
    apply_dead_time(&mut tags, dead_time);
    tags
}

/// Simulates `n_pulses` of the pulsed cascade and returns the detected
/// sync, XX and X streams, each sorted by time.
pub fn simulate_cascade(
    emitter: &EmitterModel,
    clock: &LaserClock,
    detectors: &DetectorSet,
    channels: ChannelMap,
    n_pulses: u64,
    seed: u64,
) -> Result<CascadeStreams, SimError> {
    if n_pulses == 0 {
        return Err(SimError::Model("n_pulses must be at least 1".into()));
    }
    detectors.validate()?;
    clock.check_capacity(n_pulses)?;
    let source = CascadeSource::new(*emitter, *clock, seed)?;
    let det_sync = StreamFactory::with_salt(seed, Domain::Detection, 0);
    let det_xx = StreamFactory::with_salt(seed, Domain::Detection, 1);
    let det_x = StreamFactory::with_salt(seed, Domain::Detection, 2);
    let bg_xx = StreamFactory::with_salt(seed, Domain::Background, 1);
    let bg_x = StreamFactory::with_salt(seed, Domain::Background, 2);
    let bg_mean = emitter.background_rate * clock.period_ps as f64 * 1.0e-12;
    let bg_dist = (bg_mean > 0.0).then(|| Poisson::new(bg_mean).expect("positive mean"));

    let n_chunks = n_pulses.div_ceil(CHUNK_PULSES);
    let parts: Vec<CascadeStreams> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK_PULSES;
            let hi = (lo + CHUNK_PULSES).min(n_pulses);
            let mut part = CascadeStreams::default();
            for k in lo..hi {
                let em = source.pulse(k);
                let base = clock.pulse_time(k);
                let mut rng = det_sync.stream(k);
                if let Some(t) = detectors.sync.detect(base, em.laser_offset, &mut rng) {
                    part.sync.push(TimeTag::new(channels.sync, t));
                }
                let mut rng = det_xx.stream(k);
                for p in &em.xx {
                    if let Some(t) = detectors.xx.detect(base, p.offset, &mut rng) {
                        part.xx.push(TimeTag::new(channels.xx, t).with_flags(p.flags));
                    }
                }
                let mut rng = det_x.stream(k);
                for p in &em.x {
                    if let Some(t) = detectors.x.detect(base, p.offset, &mut rng) {
                        part.x.push(TimeTag::new(channels.x, t).with_flags(p.flags));
                    }
                }
                background_slot(emitter.background_rate, bg_dist.as_ref(), &bg_xx, clock, k, channels.xx, &mut part.xx);
                background_slot(emitter.background_rate, bg_dist.as_ref(), &bg_x, clock, k, channels.x, &mut part.x);
            }
            part
        })
        .collect();

    let mut out = CascadeStreams::default();
    for p in parts {
        out.sync.extend(p.sync);
        out.xx.extend(p.xx);
        out.x.extend(p.x);
    }
    Ok(CascadeStreams {
        sync: finish_stream(out.sync, detectors.sync.dead_time),
        xx: finish_stream(out.xx, detectors.xx.dead_time),
        x: finish_stream(out.x, detectors.x.dead_time),
    })
}

/// Detects a photon list (e.g. an interferometer output) on one channel.
///
/// Each photon draws from the substream of its `(pulse, seq)` identity, so
/// the result does not depend on how the list was split or ordered.
pub fn detect_photons(
    photons: &[Photon],
    clock: &LaserClock,
    detector: &DetectorModel,
    channel: u16,
    seed: u64,
) -> Result<Vec<TimeTag>, SimError> {
    detector.validate()?;
    let streams = photon_detection_streams(seed, channel);
    let tags: Vec<TimeTag> = photons
        .par_iter()
        .with_min_len(4096)
        .filter_map(|p| detect_one(p, clock, detector, channel, &streams))
        .collect();
    Ok(finish_stream(tags, detector.dead_time))
}

pub(crate) fn photon_detection_streams(seed: u64, channel: u16) -> StreamFactory {
    StreamFactory::with_salt(seed, Domain::Detection, 0x100 + channel as u64)
}

#[inline]
pub(crate) fn detect_one(
    p: &Photon,
    clock: &LaserClock,
    detector: &DetectorModel,
    channel: u16,
    streams: &StreamFactory,
) -> Option<TimeTag> {
    let mut rng = streams.stream(p.pulse << 4 | p.seq as u64);
    detector
        .detect(clock.pulse_time(p.pulse), p.offset, &mut rng)
        .map(|t| TimeTag::new(channel, t).with_flags(p.flags))
}

/// Pulsed source with Poissonian photon number per pulse (attenuated laser
/// reference, g²(0) = 1). Photons decay from the pulse with lifetime `tau`.
pub fn simulate_coherent(
    mean_photons: f64,
    tau: f64,
    clock: &LaserClock,
    detector: &DetectorModel,
    channel: u16,
    n_pulses: u64,
    seed: u64,
) -> Result<Vec<TimeTag>, SimError> {
    if !(mean_photons > 0.0) || !(tau > 0.0) {
        return Err(SimError::Model("mean photon number and tau must be positive".into()));
    }
    detector.validate()?;
    clock.check_capacity(n_pulses)?;
    let emission = StreamFactory::with_salt(seed, Domain::Emission, 0xC0);
    let detection = StreamFactory::with_salt(seed, Domain::Detection, 0xC0);
    let dist = Poisson::new(mean_photons).map_err(|e| SimError::Model(e.to_string()))?;
    let n_chunks = n_pulses.div_ceil(CHUNK_PULSES);
    let parts: Vec<Vec<TimeTag>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK_PULSES;
            let hi = (lo + CHUNK_PULSES).min(n_pulses);
            let mut v = Vec::new();
            for k in lo..hi {
                let mut rng = emission.stream(k);
                let mut drng = detection.stream(k);
                let n = dist.sample(&mut rng) as u64;
                let base = clock.pulse_time(k);
                for _ in 0..n {
                    let off = exp_sample(&mut rng, tau);
                    if let Some(t) = detector.detect(base, off, &mut drng) {
                        v.push(TimeTag::new(channel, t));
                    }
                }
            }
            v
        })
        .collect();
    Ok(finish_stream(parts.concat(), detector.dead_time))
}

/// Sync and signal streams of a zero-lifetime (delta) emitter, for IRF measurement.
pub fn simulate_delta_emitter(
    clock: &LaserClock,
    sync_detector: &DetectorModel,
    signal_detector: &DetectorModel,
    channels: ChannelMap,
    n_pulses: u64,
    seed: u64,
) -> Result<(Vec<TimeTag>, Vec<TimeTag>), SimError> {
    sync_detector.validate()?;
    signal_detector.validate()?;
    clock.check_capacity(n_pulses)?;
    let laser = StreamFactory::with_salt(seed, Domain::Emission, 0xD0);
    let ds = StreamFactory::with_salt(seed, Domain::Detection, 0xD0);
    let dx = StreamFactory::with_salt(seed, Domain::Detection, 0xD1);
    let mut sync = Vec::with_capacity(n_pulses as usize);
    let mut sig = Vec::with_capacity(n_pulses as usize);
    for k in 0..n_pulses {
        let base = clock.pulse_time(k);
        let off = if clock.pulse_jitter_fwhm > 0.0 {
            let z: f64 = laser.stream(k).sample(StandardNormal);
            z * fwhm_to_sigma(clock.pulse_jitter_fwhm)
        } else {
            0.0
        };
        if let Some(t) = sync_detector.detect(base, off, &mut ds.stream(k)) {
            sync.push(TimeTag::new(channels.sync, t));
        }
        if let Some(t) = signal_detector.detect(base, off, &mut dx.stream(k)) {
            sig.push(TimeTag::new(channels.x, t));
        }
    }
    Ok((finish_stream(sync, sync_detector.dead_time), finish_stream(sig, signal_detector.dead_time)))
}

/// Instrument response: histogram of signal − sync delays of a delta emitter.
pub fn irf_from_sync(
    sync: &[TimeTag],
    signal: &[TimeTag],
    bin_width: u64,
    half_window: u64,
) -> Result<CoincidenceHistogram, SimError> {
    if sync.is_empty() || signal.is_empty() {
        return Err(SimError::EmptyInput("IRF needs non-empty sync and signal streams"));
    }
    let req = CorrelationRequest::new(bin_width, half_window)?;
    Ok(correlator::correlate(sync, signal, &req)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clock() -> LaserClock {
        LaserClock::default()
    }

    #[test]
    fn default_clock_is_80_mhz() {
        let c = clock();
        assert_eq!(c.period_ps, 12_500);
        c.validate().unwrap();
        let bad = LaserClock { period_ps: 12_000, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn no_excitation_gives_only_sync() {
        let m = EmitterModel { p_exc: 0.0, ..EmitterModel::ideal(161.0, 619.0) };
        let s = simulate_cascade(&m, &clock(), &DetectorSet::uniform(DetectorModel::ideal()), ChannelMap::default(), 1000, 1).unwrap();
        assert_eq!(s.sync.len(), 1000);
        assert!(s.xx.is_empty() && s.x.is_empty());
    }

    #[test]
    fn lossless_detection_keeps_every_photon() {
        let m = EmitterModel::ideal(161.0, 619.0);
        let s = simulate_cascade(&m, &clock(), &DetectorSet::uniform(DetectorModel::ideal()), ChannelMap::default(), 5000, 3).unwrap();
        assert_eq!(s.xx.len(), 5000);
        assert_eq!(s.x.len(), 5000);
    }

    #[test]
    fn lossy_detection_never_adds_counts() {
        let m = EmitterModel::ideal(161.0, 619.0);
        let det = DetectorModel { efficiency: 0.5, ..DetectorModel::default() };
        let s = simulate_cascade(&m, &clock(), &DetectorSet::uniform(det), ChannelMap::default(), 5000, 3).unwrap();
        assert!(s.xx.len() <= 5000 && s.x.len() <= 5000);
        assert!((s.x.len() as f64 - 2500.0).abs() < 200.0);
    }

    #[test]
    fn capacity_overflow() {
        let m = EmitterModel::ideal(161.0, 619.0);
        let r = simulate_cascade(&m, &clock(), &DetectorSet::uniform(DetectorModel::ideal()), ChannelMap::default(), u64::MAX / 1000, 1);
        assert!(matches!(r, Err(SimError::Capacity { .. })));
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(EmitterModel::ideal(0.0, 1.0).validate().is_err());
        assert!(EmitterModel { p_exc: 1.5, ..EmitterModel::ideal(1.0, 1.0) }.validate().is_err());
        assert!(DetectorModel { efficiency: -0.1, ..DetectorModel::ideal() }.validate().is_err());
    }

    #[test]
    fn pulses_are_independent_of_evaluation_order() {
        let src = CascadeSource::new(EmitterModel::ideal(100.0, 200.0), clock(), 9).unwrap();
        let a = src.pulse(1234);
        let _ = src.pulse(5);
        let b = src.pulse(1234);
        assert_eq!(a.x[0].offset, b.x[0].offset);
    }

    #[test]
    fn same_seed_same_streams() {
        let m = EmitterModel { p_multi: 0.01, background_rate: 1e5, ..EmitterModel::ideal(161.0, 619.0) };
        let d = DetectorSet::uniform(DetectorModel::default());
        let a = simulate_cascade(&m, &clock(), &d, ChannelMap::default(), 70_000, 11).unwrap();
        let b = simulate_cascade(&m, &clock(), &d, ChannelMap::default(), 70_000, 11).unwrap();
        assert_eq!(a, b);
        let c = simulate_cascade(&m, &clock(), &d, ChannelMap::default(), 70_000, 12).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn multi_photon_inversion() {
        for &g in &[0.0069, 0.02, 0.1] {
            let p = p_multi_for_g2(g, 1.0);
            let m = EmitterModel { p_multi: p, ..EmitterModel::ideal(1.0, 1.0) };
            assert!((m.expected_g2() - g).abs() < 1e-12);
        }
        assert_eq!(p_multi_for_g2(0.0, 1.0), 0.0);
    }

    #[test]
    fn dead_time_filters_per_channel() {
        let mut tags = vec![TimeTag::new(0, 0), TimeTag::new(1, 5), TimeTag::new(0, 10), TimeTag::new(0, 30)];
        apply_dead_time(&mut tags, 20.0);
        assert_eq!(tags, vec![TimeTag::new(0, 0), TimeTag::new(1, 5), TimeTag::new(0, 30)]);
    }

    #[test]
    fn irf_of_jitter_free_detectors_is_one_bin() {
        let (s, x) = simulate_delta_emitter(&clock(), &DetectorModel::ideal(), &DetectorModel::ideal(), ChannelMap::default(), 1000, 1).unwrap();
        let h = irf_from_sync(&s, &x, 1, 200).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.counts[200], 1000);
        assert_eq!(h.total_pairs, 1000);
    }

    #[test]
    fn irf_rejects_empty() {
        assert!(matches!(irf_from_sync(&[], &[TimeTag::new(0, 1)], 1, 10), Err(SimError::EmptyInput(_))));
    }
}
