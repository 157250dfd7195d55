//! g²(0) through the HBT beam splitter for a laser, an ideal cascade line
//! and a line with extra uncorrelated photons.

use qdcascade::emitter::{p_multi_for_g2, simulate_cascade, simulate_coherent, ChannelMap, DetectorModel, DetectorSet, EmitterModel, LaserClock};
use qdcascade::pipeline::{hbt_g2, PeakBinning};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clock = LaserClock::default();
    let det = DetectorModel::default();
    let bins = PeakBinning::default();
    let n = 2_000_000;

    let laser = simulate_coherent(0.2, 619.0, &clock, &det, 1, n, 1)?;
    println!("coherent:     g2 = {}", hbt_g2(&laser, clock.period_ps, &bins, 1)?);

    let dets = DetectorSet::uniform(det);
    let ideal = simulate_cascade(&EmitterModel::ideal(161.0, 619.0), &clock, &dets, ChannelMap::default(), n, 2)?;
    println!("ideal X line: g2 = {}", hbt_g2(&ideal.x, clock.period_ps, &bins, 2)?);

    let target = 0.0069;
    let noisy = EmitterModel { p_multi: p_multi_for_g2(target, 1.0), ..EmitterModel::ideal(161.0, 619.0) };
    let s = simulate_cascade(&noisy, &clock, &dets, ChannelMap::default(), n, 3)?;
    println!("p_multi = {:.5}: g2 = {} (target {target})", noisy.p_multi, hbt_g2(&s.x, clock.period_ps, &bins, 3)?);
    Ok(())
}
