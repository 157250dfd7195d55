use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::TagError;

/// Binned coincidence counts as a function of delay.
///
/// Bin `i` is centred at `center_offset + i * bin_width` and covers the
/// half-open interval `[center - bin_width / 2, center - bin_width / 2 + bin_width)`
/// (integer division). Histograms built by the correlator are symmetric:
/// `center_offset = -half_window` with an odd bin count, so Δt = 0 sits at a
/// bin centre.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub bin_width: u64,
    pub center_offset: i64,
    pub counts: Vec<u64>,
    pub total_pairs: u64,
}

impl CoincidenceHistogram {
    /// Empty symmetric histogram covering ±`half_window` (bin centres).
    pub fn symmetric(bin_width: u64, half_window: u64) -> Result<Self, TagError> {
        if bin_width == 0 {
            return Err(TagError::Invalid("bin_width must be positive".into()));
        }
        if !half_window.is_multiple_of(bin_width) {
            return Err(TagError::Invalid(format!(
                "half window {half_window} ps is not a multiple of bin width {bin_width} ps"
            )));
        }
        let n = (2 * half_window / bin_width + 1) as usize;
        Ok(CoincidenceHistogram {
            bin_width,
            center_offset: -(half_window as i64),
            counts: vec![0; n],
            total_pairs: 0,
        })
    }

    /// Histogram from explicit counts; `total_pairs` is their sum.
    pub fn from_counts(bin_width: u64, center_offset: i64, counts: Vec<u64>) -> Result<Self, TagError> {
        if bin_width == 0 {
            return Err(TagError::Invalid("bin_width must be positive".into()));
        }
        let total_pairs = counts.iter().sum();
        Ok(CoincidenceHistogram { bin_width, center_offset, counts, total_pairs })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    fn half_lo(&self) -> i64 {
        (self.bin_width / 2) as i64
    }

    pub fn bin_center(&self, i: usize) -> i64 {
        self.center_offset + i as i64 * self.bin_width as i64
    }

    /// Lower edge of the first bin.
    pub fn range_min(&self) -> i64 {
        self.center_offset - self.half_lo()
    }

    /// Upper (exclusive) edge of the last bin.
    pub fn range_max(&self) -> i64 {
        self.range_min() + self.counts.len() as i64 * self.bin_width as i64
    }

    /// Bin holding delay `dt`, if inside the range.
    #[inline]
    pub fn bin_index(&self, dt: i64) -> Option<usize> {
        let rel = dt - self.range_min();
        if rel < 0 {
            return None;
        }
        let i = (rel as u64 / self.bin_width) as usize;
        (i < self.counts.len()).then_some(i)
    }

    /// Sum of counts whose bin centres fall in `[lo, hi)`.
    pub fn histogram_counts(&self, lo: i64, hi: i64) -> Result<u64, TagError> {
        let (min, max) = (self.range_min(), self.range_max());
        if lo > hi || lo < min || hi > max {
            return Err(TagError::Range { lo, hi, min, max });
        }
        Ok(self.sum_centers_in(lo, hi))
    }

    /// Like [`histogram_counts`](Self::histogram_counts) but clips instead of failing.
    pub(crate) fn sum_centers_in(&self, lo: i64, hi: i64) -> u64 {
        if hi <= lo {
            return 0;
        }
        let bw = self.bin_width as i64;
        // first i with center >= lo, first i with center >= hi
        let first = ceil_div(lo - self.center_offset, bw).max(0) as usize;
        let last = ceil_div(hi - self.center_offset, bw).clamp(0, self.counts.len() as i64) as usize;
        if first >= last {
            return 0;
        }
        self.counts[first..last].iter().sum()
    }

    /// Adds another histogram with identical binning.
    pub fn accumulate(&mut self, other: &CoincidenceHistogram) -> Result<(), TagError> {
        if other.bin_width != self.bin_width
            || other.center_offset != self.center_offset
            || other.counts.len() != self.counts.len()
        {
            return Err(TagError::Invalid("histogram binning mismatch".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_pairs += other.total_pairs;
        Ok(())
    }

    /// Histogram mirrored about Δt = 0 (assumes a symmetric layout).
    pub fn mirrored(&self) -> CoincidenceHistogram {
        let mut counts = self.counts.clone();
        counts.reverse();
        CoincidenceHistogram {
            bin_width: self.bin_width,
            center_offset: -self.bin_center(self.counts.len().saturating_sub(1)),
            counts,
            total_pairs: self.total_pairs,
        }
    }

    /// `delay_ps,counts` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "delay_ps,counts")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{}", self.bin_center(i), c)?;
        }
        Ok(())
    }

    /// Parses the CSV produced by [`write_csv`](Self::write_csv).
    pub fn read_csv(text: &str) -> Result<Self, TagError> {
        let mut centers = Vec::new();
        let mut counts = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("delay") {
                continue;
            }
            let mut it = line.split(',');
            let parse_err = || TagError::Invalid(format!("line {}: cannot parse {line:?}", lineno + 1));
            let d: i64 = it.next().and_then(|s| s.trim().parse().ok()).ok_or_else(parse_err)?;
            let c: u64 = it.next().and_then(|s| s.trim().parse().ok()).ok_or_else(parse_err)?;
            centers.push(d);
            counts.push(c);
        }
        if centers.len() < 2 {
            return Err(TagError::Invalid("need at least two bins".into()));
        }
        let bw = centers[1] - centers[0];
        if bw <= 0 || centers.windows(2).any(|w| w[1] - w[0] != bw) {
            return Err(TagError::Invalid("bin centres are not evenly spaced".into()));
        }
        CoincidenceHistogram::from_counts(bw as u64, centers[0], counts)
    }
}

fn ceil_div(a: i64, b: i64) -> i64 {
    -((-a).div_euclid(b))
}

/// Integrated area of one coincidence peak.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakArea {
    pub area: f64,
    /// Poisson error, √area.
    pub error: f64,
}

impl PeakArea {
    pub fn from_counts(counts: u64) -> Self {
        let area = counts as f64;
        PeakArea { area, error: area.sqrt() }
    }
}

/// Peak areas indexed by `k`, the peak at delay `k * period`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakAreas {
    pub period: u64,
    pub half_width: u64,
    pub areas: BTreeMap<i64, PeakArea>,
}

impl PeakAreas {
    pub fn get(&self, k: i64) -> Option<&PeakArea> {
        self.areas.get(&k)
    }

    /// Areas of peaks `-n..=n` divided by the mean of side peaks with `|k| >= 2`.
    pub fn normalized_pattern(&self, n: i64) -> Vec<(i64, f64)> {
        let side: Vec<f64> = self.areas.iter().filter(|(k, _)| k.abs() >= 2).map(|(_, a)| a.area).collect();
        let mean = side.iter().sum::<f64>() / side.len().max(1) as f64;
        (-n..=n).filter_map(|k| self.areas.get(&k).map(|a| (k, a.area / mean))).collect()
    }
}
