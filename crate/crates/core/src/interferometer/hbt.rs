use rand::Rng;

use crate::rng::{Domain, StreamFactory};
use crate::timetag::TimeTag;

/// 50:50 fiber beam splitter in front of two detectors.
///
/// Each tag independently goes to output 1 or 2 with probability ½. Tags keep
/// their channel and flags; both outputs stay sorted.
pub fn hbt_route(tags: &[TimeTag], seed: u64) -> (Vec<TimeTag>, Vec<TimeTag>) {
    let mut rng = StreamFactory::new(seed, Domain::Hbt).stream(0);
    let mut out1 = Vec::with_capacity(tags.len() / 2 + 16);
    let mut out2 = Vec::with_capacity(tags.len() / 2 + 16);
    // 64 decisions per draw
    let mut bits = 0u64;
    for (i, t) in tags.iter().enumerate() {
        if i % 64 == 0 {
            bits = rng.random();
        }
        if bits & 1 == 0 {
            out1.push(*t);
        } else {
            out2.push(*t);
        }
        bits >>= 1;
    }
    (out1, out2)
}
