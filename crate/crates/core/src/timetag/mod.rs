//! Time tags, coincidence histograms and peak areas.
//!
//! A [`TimeTag`] is one detector click: the channel it came from and an
//! integer picosecond timestamp. Everything downstream (correlation, peak
//! integration, fits) consumes sorted slices of tags.

mod codec;
mod histogram;

pub use codec::{read_tags, write_tags, TagReader, WriteMode, HEADER_LEN, MAGIC, RECORD_LEN, VERSION};
pub use histogram::{CoincidenceHistogram, PeakArea, PeakAreas};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Origin flags carried in the `flags` field of simulated tags.
pub mod flags {
    /// Photon from the cascade itself.
    pub const CASCADE: u16 = 0;
    /// Extra uncorrelated photon (multi-photon event).
    pub const MULTI_PHOTON: u16 = 1 << 0;
    /// Dark count or stray light.
    pub const BACKGROUND: u16 = 1 << 1;
}

/// One detector click.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeTag {
    /// Picoseconds since acquisition start.
    pub time: u64,
    pub channel: u16,
    /// Free-form per-tag flags; see [`flags`].
    pub flags: u16,
}

impl TimeTag {
    pub fn new(channel: u16, time: u64) -> Self {
        TimeTag { time, channel, flags: 0 }
    }

    pub fn with_flags(mut self, flags: u16) -> Self {
        self.flags = flags;
        self
    }
}

#[derive(Debug, Error)]
pub enum TagError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad header: {0}")]
    Format(String),
    #[error("file truncated at byte offset {offset}: expected {expected} records, got {found}")]
    Truncated { offset: u64, expected: u64, found: u64 },
    #[error("tags not sorted by time at index {index}")]
    Unsorted { index: usize },
    #[error("window [{lo}, {hi}) ps outside histogram range [{min}, {max})")]
    Range { lo: i64, hi: i64, min: i64, max: i64 },
    #[error("invalid histogram: {0}")]
    Invalid(String),
}

/// Index of the first tag whose time is smaller than its predecessor's.
pub fn first_unsorted(tags: &[TimeTag]) -> Option<usize> {
    tags.windows(2).position(|w| w[1].time < w[0].time).map(|i| i + 1)
}

/// Sorts tags by time, breaking ties by channel then flags.
pub fn sort_tags(tags: &mut [TimeTag]) {
    tags.sort_unstable();
}

/// Merges two sorted streams into one sorted stream.
pub fn merge_sorted(a: &[TimeTag], b: &[TimeTag]) -> Vec<TimeTag> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if b[j] < a[i] {
            out.push(b[j]);
            j += 1;
        } else {
            out.push(a[i]);
            i += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Tags of a single channel, in stream order.
pub fn select_channel(tags: &[TimeTag], channel: u16) -> Vec<TimeTag> {
    tags.iter().filter(|t| t.channel == channel).copied().collect()
}
