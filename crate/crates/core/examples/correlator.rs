//! Two-pointer correlation against the O(n·m) reference on random streams,
//! then a rough throughput figure.

use std::time::Instant;

use qdcascade::correlator::{correlate, correlate_brute_force, CorrelationRequest};
use qdcascade::timetag::TimeTag;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn stream(rng: &mut ChaCha8Rng, n: usize, mean_gap: u64) -> Vec<TimeTag> {
    let mut t = 0;
    (0..n)
        .map(|_| {
            t += rng.random_range(1..2 * mean_gap);
            TimeTag::new(0, t)
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let req = CorrelationRequest::new(25, 50_000)?;

    let a = stream(&mut rng, 5_000, 3_000);
    let b = stream(&mut rng, 5_000, 3_000);
    let fast = correlate(&a, &b, &req)?;
    let slow = correlate_brute_force(&a, &b, &req)?;
    println!("bins: {}, pairs: {}, identical: {}", fast.counts.len(), fast.total_pairs, fast == slow);

    // 16 periods of 12.5 ns
    let req = CorrelationRequest::new(25, 100_000)?;
    let a = stream(&mut rng, 1_000_000, 100_000);
    let b = stream(&mut rng, 1_000_000, 100_000);
    let t0 = Instant::now();
    let h = correlate(&a, &b, &req)?;
    let s = t0.elapsed().as_secs_f64();
    println!("{} tags in {:.3} s: {:.2e} tags/s, {} pairs", a.len() + b.len(), s, (a.len() + b.len()) as f64 / s, h.total_pairs);
    Ok(())
}
