//! Coincidence histograms from two time-tag streams, peak integration and
//! side-peak normalization.
//!
//! Delays are Δt = t_b − t_a, where `a` and `b` are the first and second
//! stream of the request.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measured::Measured;
use crate::timetag::{first_unsorted, CoincidenceHistogram, PeakArea, PeakAreas, TagError, TimeTag};

/// Tags of stream `a` handled per parallel task.
pub const DEFAULT_CHUNK: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum CorrelatorError {
    #[error("invalid request: {0}")]
    Request(String),
    #[error("stream {stream} not sorted by time at index {index}")]
    Unsorted { stream: char, index: usize },
    #[error("peak windows overlap: 2 x half_width {half_width} ps >= period {period} ps")]
    Overlap { period: u64, half_width: u64 },
    #[error("insufficient side peaks: {0}")]
    InsufficientPeaks(String),
    #[error(transparent)]
    Histogram(#[from] TagError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationRequest {
    pub bin_width: u64,
    /// Largest |Δt| counted, ps.
    pub window: u64,
    /// Channels selected from a merged stream as (a, b).
    pub channels: (u16, u16),
}

impl CorrelationRequest {
    pub fn new(bin_width: u64, window: u64) -> Result<Self, CorrelatorError> {
        if bin_width == 0 {
            return Err(CorrelatorError::Request("bin_width must be >= 1 ps".into()));
        }
        if !window.is_multiple_of(bin_width) {
            return Err(CorrelatorError::Request(format!(
                "window {window} ps is not a multiple of bin_width {bin_width} ps"
            )));
        }
        Ok(CorrelationRequest { bin_width, window, channels: (0, 1) })
    }

    pub fn with_channels(mut self, a: u16, b: u16) -> Self {
        self.channels = (a, b);
        self
    }
}

fn check_sorted(tags: &[TimeTag], stream: char) -> Result<(), CorrelatorError> {
    match first_unsorted(tags) {
        Some(index) => Err(CorrelatorError::Unsorted { stream, index }),
        None => Ok(()),
    }
}

/// Histogram of all pairs with |t_b − t_a| ≤ window.
pub fn correlate(
    a: &[TimeTag],
    b: &[TimeTag],
    req: &CorrelationRequest,
) -> Result<CoincidenceHistogram, CorrelatorError> {
    correlate_chunked(a, b, req, DEFAULT_CHUNK)
}

/// [`correlate`] with an explicit chunk length for stream `a`.
pub fn correlate_chunked(
    a: &[TimeTag],
    b: &[TimeTag],
    req: &CorrelationRequest,
    chunk: usize,
) -> Result<CoincidenceHistogram, CorrelatorError> {
    let empty = CoincidenceHistogram::symmetric(req.bin_width, req.window)?;
    check_sorted(a, 'a')?;
    check_sorted(b, 'b')?;
    if chunk == 0 {
        return Err(CorrelatorError::Request("chunk length must be positive".into()));
    }
    let hist = a
        .par_chunks(chunk)
        .map(|part| {
            let mut h = empty.clone();
            correlate_into(part, b, req.window, &mut h);
            h
        })
        .reduce(
            || empty.clone(),
            |mut x, y| {
                x.accumulate(&y).expect("same binning");
                x
            },
        );
    Ok(hist)
}

/// Two-pointer sweep: `lo` tracks the first b-tag not too early for the
/// current a-tag; it only moves forward.
fn correlate_into(a: &[TimeTag], b: &[TimeTag], window: u64, h: &mut CoincidenceHistogram) {
    let Some(first) = a.first() else { return };
    let mut lo = b.partition_point(|t| t.time.saturating_add(window) < first.time);
    let mut pairs = 0u64;
    for ta in a {
        while lo < b.len() && b[lo].time.saturating_add(window) < ta.time {
            lo += 1;
        }
        let hi_time = ta.time.saturating_add(window);
        for tb in &b[lo..] {
            if tb.time > hi_time {
                break;
            }
            let dt = tb.time as i64 - ta.time as i64;
            if let Some(i) = h.bin_index(dt) {
                h.counts[i] += 1;
                pairs += 1;
            }
        }
    }
    h.total_pairs += pairs;
}

/// O(N·M) reference implementation.
pub fn correlate_brute_force(
    a: &[TimeTag],
    b: &[TimeTag],
    req: &CorrelationRequest,
) -> Result<CoincidenceHistogram, CorrelatorError> {
    let mut h = CoincidenceHistogram::symmetric(req.bin_width, req.window)?;
    let w = req.window as i64;
    for ta in a {
        for tb in b {
            let dt = tb.time as i64 - ta.time as i64;
            if dt.abs() <= w {
                let i = h.bin_index(dt).expect("in range");
                h.counts[i] += 1;
                h.total_pairs += 1;
            }
        }
    }
    Ok(h)
}

/// Sums counts with bin centres within ±`half_width` of each `k·period`.
///
/// Only peaks whose whole window lies inside the histogram are reported.
pub fn integrate_peaks(
    hist: &CoincidenceHistogram,
    period: u64,
    half_width: u64,
) -> Result<PeakAreas, CorrelatorError> {
    if period == 0 {
        return Err(CorrelatorError::Request("period must be positive".into()));
    }
    if 2 * half_width >= period {
        return Err(CorrelatorError::Overlap { period, half_width });
    }
    let (min, max) = (hist.range_min(), hist.range_max());
    let p = period as i64;
    let hw = half_width as i64;
    let kmax = max.abs().max(min.abs()) / p + 1;
    let mut areas = BTreeMap::new();
    for k in -kmax..=kmax {
        let (lo, hi) = (k * p - hw, k * p + hw + 1);
        if lo >= min && hi <= max {
            areas.insert(k, PeakArea::from_counts(hist.sum_centers_in(lo, hi)));
        }
    }
    Ok(PeakAreas { period, half_width, areas })
}

/// Default peak half-width: a quarter period.
pub fn default_half_width(period: u64) -> u64 {
    period / 4
}

/// A₀ / mean(side), with Poisson errors on both. An empty centre is given a
/// one-count error.
fn ratio_to_side_mean(center: f64, side: &[f64]) -> Result<Measured, CorrelatorError> {
    let n = side.len() as f64;
    let sum: f64 = side.iter().sum();
    if sum <= 0.0 {
        return Err(CorrelatorError::InsufficientPeaks("side peaks are empty".into()));
    }
    let mean = sum / n;
    let sigma_mean = sum.sqrt() / n;
    let sigma_c = center.max(1.0).sqrt();
    let value = center / mean;
    let error = ((sigma_c / mean).powi(2) + (center * sigma_mean / (mean * mean)).powi(2)).sqrt();
    Ok(Measured { value, error })
}

/// Centre area normalized to the mean of side peaks with |k| ≥ `exclusion_min`.
pub fn normalize_center(peaks: &PeakAreas, exclusion_min: i64) -> Result<Measured, CorrelatorError> {
    let center = peaks
        .get(0)
        .ok_or_else(|| CorrelatorError::InsufficientPeaks("no centre peak".into()))?
        .area;
    let side: Vec<f64> = peaks.areas.iter().filter(|(k, _)| k.abs() >= exclusion_min).map(|(_, a)| a.area).collect();
    if side.len() < 4 {
        return Err(CorrelatorError::InsufficientPeaks(format!(
            "{} side peaks with |k| >= {exclusion_min}, need 4",
            side.len()
        )));
    }
    ratio_to_side_mean(center, &side)
}

/// g²(0): centre area over the mean of the peaks k = ±1..±5.
pub fn g2_from_peaks(peaks: &PeakAreas) -> Result<Measured, CorrelatorError> {
    let center = peaks
        .get(0)
        .ok_or_else(|| CorrelatorError::InsufficientPeaks("no centre peak".into()))?
        .area;
    let mut side = Vec::with_capacity(10);
    for k in (-5..=5).filter(|&k| k != 0) {
        match peaks.get(k) {
            Some(a) => side.push(a.area),
            None => {
                return Err(CorrelatorError::InsufficientPeaks(format!("peak k = {k} outside histogram")));
            }
        }
    }
    ratio_to_side_mean(center, &side)
}

/// JSON peak-area report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeakReport {
    pub period_ps: u64,
    pub half_width_ps: u64,
    pub peaks: Vec<PeakEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalized_center: Option<Measured>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2: Option<Measured>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeakEntry {
    pub k: i64,
    pub delay_ps: i64,
    pub area: f64,
    pub error: f64,
}

impl PeakReport {
    pub fn new(peaks: &PeakAreas) -> Self {
        PeakReport {
            period_ps: peaks.period,
            half_width_ps: peaks.half_width,
            peaks: peaks
                .areas
                .iter()
                .map(|(&k, a)| PeakEntry { k, delay_ps: k * peaks.period as i64, area: a.area, error: a.error })
                .collect(),
            normalized_center: normalize_center(peaks, 2).ok(),
            g2: g2_from_peaks(peaks).ok(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tags(ch: u16, times: &[u64]) -> Vec<TimeTag> {
        times.iter().map(|&t| TimeTag::new(ch, t)).collect()
    }

    fn sorted_stream(ch: u16) -> impl Strategy<Value = Vec<TimeTag>> {
        proptest::collection::vec(0u64..200_000, 0..300).prop_map(move |mut v| {
            v.sort_unstable();
            tags(ch, &v)
        })
    }

    #[test]
    fn equal_times_hit_zero_bin() {
        let req = CorrelationRequest::new(4, 100).unwrap();
        let h = correlate(&tags(0, &[500]), &tags(1, &[500]), &req).unwrap();
        assert_eq!(h.total_pairs, 1);
        assert_eq!(h.counts[h.bin_index(0).unwrap()], 1);
        assert_eq!(h.bin_center(h.bin_index(0).unwrap()), 0);
    }

    #[test]
    fn one_period_delay() {
        let req = CorrelationRequest::new(10, 20_000).unwrap();
        let h = correlate(&tags(0, &[0]), &tags(1, &[12_500]), &req).unwrap();
        assert_eq!(h.total_pairs, 1);
        let i = h.counts.iter().position(|&c| c == 1).unwrap();
        assert_eq!(h.bin_center(i), 12_500);
    }

    #[test]
    fn window_is_inclusive() {
        let req = CorrelationRequest::new(10, 100).unwrap();
        let h = correlate(&tags(0, &[1000]), &tags(1, &[900, 1100, 899, 1101]), &req);
        assert!(h.is_err(), "b is unsorted");
        let h = correlate(&tags(0, &[1000]), &tags(1, &[899, 900, 1100, 1101]), &req).unwrap();
        assert_eq!(h.total_pairs, 2);
    }

    #[test]
    fn unsorted_input_names_index() {
        let req = CorrelationRequest::new(1, 10).unwrap();
        let err = correlate(&tags(0, &[1, 5, 3, 7]), &tags(1, &[1]), &req).unwrap_err();
        assert!(matches!(err, CorrelatorError::Unsorted { stream: 'a', index: 2 }));
        assert!(err.to_string().contains("index 2"));
    }

    #[test]
    fn bad_requests() {
        assert!(CorrelationRequest::new(0, 10).is_err());
        assert!(CorrelationRequest::new(3, 10).is_err());
    }

    #[test]
    fn delta_comb_areas_exact() {
        let mut h = CoincidenceHistogram::symmetric(10, 80_000).unwrap();
        let weights: Vec<(i64, u64)> = (-6..=6).map(|k| (k, (k * k + 3) as u64)).collect();
        for &(k, w) in &weights {
            let i = h.bin_index(k * 12_500).unwrap();
            h.counts[i] += w;
            h.total_pairs += w;
        }
        let peaks = integrate_peaks(&h, 12_500, 3125).unwrap();
        for &(k, w) in &weights {
            assert_eq!(peaks.get(k).unwrap().area, w as f64);
        }
    }

    #[test]
    fn zero_histogram_zero_areas() {
        let h = CoincidenceHistogram::symmetric(10, 80_000).unwrap();
        let peaks = integrate_peaks(&h, 12_500, 3125).unwrap();
        assert_eq!(peaks.areas.len(), 13);
        assert!(peaks.areas.values().all(|a| a.area == 0.0));
        assert!(normalize_center(&peaks, 2).is_err());
    }

    #[test]
    fn overlapping_windows_rejected() {
        let h = CoincidenceHistogram::symmetric(10, 80_000).unwrap();
        assert!(matches!(integrate_peaks(&h, 12_500, 6250), Err(CorrelatorError::Overlap { .. })));
    }

    fn flat_peaks(center: f64, side: f64) -> PeakAreas {
        let areas = (-6..=6)
            .map(|k| (k, PeakArea::from_counts(if k == 0 { center } else { side } as u64)))
            .collect();
        PeakAreas { period: 12_500, half_width: 3125, areas }
    }

    #[test]
    fn normalization_limits() {
        let a = normalize_center(&flat_peaks(1000.0, 1000.0), 2).unwrap();
        assert!((a.value - 1.0).abs() < 1e-12);
        let a = normalize_center(&flat_peaks(0.0, 1000.0), 2).unwrap();
        assert_eq!(a.value, 0.0);
        assert!(a.error > 0.0);
        let g = g2_from_peaks(&flat_peaks(500.0, 1000.0)).unwrap();
        assert!((g.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn too_few_side_peaks() {
        let mut p = flat_peaks(10.0, 10.0);
        p.areas.retain(|k, _| k.abs() <= 2);
        assert!(normalize_center(&p, 2).is_err());
        assert!(g2_from_peaks(&p).is_err());
    }

    #[test]
    fn reflection_for_odd_bin_width() {
        let a = tags(0, &[0, 17, 400, 1_000, 1_003]);
        let b = tags(1, &[5, 6, 390, 998, 2_000]);
        let req = CorrelationRequest::new(7, 1_400).unwrap();
        let ab = correlate(&a, &b, &req).unwrap();
        let ba = correlate(&b, &a, &req).unwrap();
        assert_eq!(ab.mirrored(), ba);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn matches_brute_force(a in sorted_stream(0), b in sorted_stream(1), bw in 1u64..50, mult in 1u64..200) {
            let req = CorrelationRequest::new(bw, bw * mult).unwrap();
            prop_assert_eq!(correlate(&a, &b, &req).unwrap(), correlate_brute_force(&a, &b, &req).unwrap());
        }

        #[test]
        fn translation_invariant(a in sorted_stream(0), b in sorted_stream(1), shift in 0u64..1_000_000_000) {
            let req = CorrelationRequest::new(5, 5000).unwrap();
            let sa: Vec<TimeTag> = a.iter().map(|t| TimeTag::new(0, t.time + shift)).collect();
            let sb: Vec<TimeTag> = b.iter().map(|t| TimeTag::new(1, t.time + shift)).collect();
            prop_assert_eq!(correlate(&a, &b, &req).unwrap(), correlate(&sa, &sb, &req).unwrap());
        }

        #[test]
        fn reflection(a in sorted_stream(0), b in sorted_stream(1), half in 0u64..20, mult in 1u64..100) {
            // exact mirror symmetry of half-open bins needs an odd width
            let bw = 2 * half + 1;
            let req = CorrelationRequest::new(bw, bw * mult).unwrap();
            prop_assert_eq!(correlate(&a, &b, &req).unwrap().mirrored(), correlate(&b, &a, &req).unwrap());
        }

        #[test]
        fn chunking_independent(a in sorted_stream(0), b in sorted_stream(1), chunk in 1usize..64) {
            let req = CorrelationRequest::new(8, 4000).unwrap();
            prop_assert_eq!(correlate_chunked(&a, &b, &req, chunk).unwrap(), correlate(&a, &b, &req).unwrap());
        }
    }
}
