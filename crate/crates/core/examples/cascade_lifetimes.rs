//! Simulates a cascade with detector jitter, histograms both lines against
//! the laser sync and fits them with a Gaussian IRF.

use qdcascade::correlator::{correlate, CorrelationRequest};
use qdcascade::emitter::{simulate_cascade, ChannelMap, DetectorModel, DetectorSet, EmitterModel, LaserClock};
use qdcascade::fit::{fit_lifetime_bi, fit_lifetime_mono, Irf, LifetimeOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let emitter = EmitterModel::ideal(133.0, 227.0);
    let det = DetectorModel { jitter_fwhm: 21.0, efficiency: 0.85, dead_time: 0.0 };
    let s = simulate_cascade(&emitter, &LaserClock::default(), &DetectorSet::uniform(det), ChannelMap::default(), 1_000_000, 5)?;
    println!("sync {} / xx {} / x {} tags", s.sync.len(), s.xx.len(), s.x.len());

    let req = CorrelationRequest::new(4, 4_000)?;
    let h_xx = correlate(&s.sync, &s.xx, &req)?;
    let h_x = correlate(&s.sync, &s.x, &req)?;

    // sync and signal jitter add in quadrature
    let irf = Irf::Gaussian { fwhm: 21.0 * 2f64.sqrt() };
    let mut opts = LifetimeOptions::new(irf);
    opts.range = Some((-300, 3_500));

    let xx = fit_lifetime_mono(&h_xx, &opts)?;
    println!("XX mono: tau = {} ps, chi2_red {:.3}", xx.tau_xx, xx.chi2_red);
    let bi = fit_lifetime_bi(&h_x, &opts)?;
    println!("X bi:    tau_xx = {} ps, tau_x = {} ps", bi.tau_xx, bi.tau_x.unwrap());
    println!("r = {}", bi.ratio().unwrap());
    Ok(())
}
