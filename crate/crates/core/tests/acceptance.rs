//! The twelve acceptance criteria, run in order. Prints one PASS/FAIL line
//! per criterion and exits non-zero if a criterion fails that is not listed
//! in `KNOWN_FAILURES`.
//!
//!     cargo test -p qdcascade --test acceptance

use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use qdcascade::correlator::{correlate, correlate_brute_force, CorrelationRequest};
use qdcascade::emitter::{
    p_multi_for_g2, simulate_cascade, simulate_coherent, ChannelMap, DetectorModel, DetectorSet, EmitterModel, LaserClock,
};
use qdcascade::field::{capacitor_field, franz_keldysh_onset, triangular_well, triangular_well_numeric, DiodeGeometry, TrapFieldModel};
use qdcascade::fit::{
    fit_coherence, fit_fringe, fit_lifetime_bi, fit_lifetime_mono, olivero_fwhm, transform_limit, CoherencePoint, Irf,
    LifetimeOptions,
};
use qdcascade::interferometer::{michelson_scan, purity_oracle, LineShape, MichelsonScan};
use qdcascade::pipeline::{hbt_g2, run_hom, HomExperiment, PeakBinning};
use qdcascade::reproduce::{self, Check, ReproduceOptions};
use qdcascade::timetag::TimeTag;

/// Criteria that fail for reasons recorded in the README.
const KNOWN_FAILURES: &[u32] = &[8];

type Outcome = Result<Vec<Check>, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let mut checks = Vec::new();
    for r in [0.1, 0.26, 0.5, 0.64, 1.0] {
        let (txx, tx) = (r * 619.0, 619.0);
        let rep = purity_oracle(txx, tx, 2048, 20.0 * (txx + tx), false).map_err(|e| e.to_string())?;
        checks.push(Check::within(format!("purity r={r}"), rep.purity, 1.0 / (1.0 + r), 1e-3));
    }
    checks.push(Check::below("runtime (s)", t0.elapsed().as_secs_f64(), 30.0));
    Ok(checks)
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let mut checks = Vec::new();
    for (txx, tx, want) in [(161.0, 619.0, 0.794), (112.0, 175.0, 0.610)] {
        let run = run_hom(&HomExperiment::ideal(txx, tx, 10_000_000, 21)).map_err(|e| e.to_string())?;
        checks.push(Check::within(format!("V_raw ({txx}, {tx})"), run.v_raw.value, want, 0.02));
    }
    checks.push(Check::below("runtime (s)", t0.elapsed().as_secs_f64(), 300.0));
    Ok(checks)
}

fn criterion_3() -> Outcome {
    let rep = reproduce::hom_pattern(&ReproduceOptions { pulses: 10_000_000, seed: 3 }).map_err(|e| e.to_string())?;
    Ok(rep.checks)
}

fn criterion_4() -> Outcome {
    let clock = LaserClock::default();
    let det = DetectorModel::default();
    let bins = PeakBinning::default();
    let dets = DetectorSet::uniform(det);
    let mut checks = Vec::new();

    let laser = simulate_coherent(0.2, 619.0, &clock, &det, 1, 4_000_000, 41).map_err(|e| e.to_string())?;
    let g = hbt_g2(&laser, clock.period_ps, &bins, 41).map_err(|e| e.to_string())?;
    checks.push(Check::within("Poissonian g2", g.value, 1.0, 0.02));

    let s = simulate_cascade(&EmitterModel::ideal(161.0, 619.0), &clock, &dets, ChannelMap::default(), 4_000_000, 42)
        .map_err(|e| e.to_string())?;
    let g = hbt_g2(&s.x, clock.period_ps, &bins, 42).map_err(|e| e.to_string())?;
    checks.push(Check::below("ideal cascade g2", g.value, 0.002));

    let target = 0.0069;
    let m = EmitterModel { p_multi: p_multi_for_g2(target, 1.0), ..EmitterModel::ideal(161.0, 619.0) };
    let s = simulate_cascade(&m, &clock, &dets, ChannelMap::default(), 4_000_000, 43).map_err(|e| e.to_string())?;
    let g = hbt_g2(&s.x, clock.period_ps, &bins, 43).map_err(|e| e.to_string())?;
    checks.push(Check::within("multi-photon g2", g.value, target, 0.002));
    Ok(checks)
}

fn criterion_5() -> Outcome {
    let (txx, tx) = (133.0, 227.0);
    // sync and signal jitter combine to 21 ps FWHM
    let det = DetectorModel { jitter_fwhm: 21.0 / 2f64.sqrt(), efficiency: 1.0, dead_time: 0.0 };
    let s = simulate_cascade(&EmitterModel::ideal(txx, tx), &LaserClock::default(), &DetectorSet::uniform(det), ChannelMap::default(), 1_000_000, 51)
        .map_err(|e| e.to_string())?;
    let req = CorrelationRequest::new(4, 4_000).map_err(|e| e.to_string())?;
    let h_xx = correlate(&s.sync, &s.xx, &req).map_err(|e| e.to_string())?;
    let h_x = correlate(&s.sync, &s.x, &req).map_err(|e| e.to_string())?;
    let mut opts = LifetimeOptions::new(Irf::Gaussian { fwhm: 21.0 });
    opts.range = Some((-300, 3_500));
    let mono = fit_lifetime_mono(&h_xx, &opts).map_err(|e| e.to_string())?;
    let bi = fit_lifetime_bi(&h_x, &opts).map_err(|e| e.to_string())?;
    let r = bi.ratio().ok_or("bi fit without tau_x")?;
    Ok(vec![
        Check::at_least("counts in X histogram", h_x.total_pairs as f64, 0.99e6),
        Check::within("tau_XX mono (rel)", mono.tau_xx.value / txx, 1.0, 0.03),
        Check::within("tau_XX bi (rel)", bi.tau_xx.value / txx, 1.0, 0.03),
        Check::within("tau_X bi (rel)", bi.tau_x.unwrap().value / tx, 1.0, 0.03),
        Check::within("r", r.value, 0.586, 0.017),
        Check::within("r vs 0.59(2)", r.value, 0.59, 0.02 + r.error),
    ])
}

fn criterion_6() -> Outcome {
    Ok(reproduce::stark_table(61).map_err(|e| e.to_string())?.checks)
}

fn criterion_7() -> Outcome {
    let m = TrapFieldModel::default().m_hh;
    let mut checks = Vec::new();
    for i in 0..8 {
        // log-spaced over [1e-3, 2e-2] V/nm
        let f = 1e-3 * 20f64.powf(i as f64 / 7.0);
        let a = triangular_well(f, m).map_err(|e| e.to_string())?;
        let n = triangular_well_numeric(f, m, 10_000, 20.0).map_err(|e| e.to_string())?;
        checks.push(Check::below(format!("E1 rel error at F={f:.2e}"), (n.state.e1_mev / a.e1_mev - 1.0).abs(), 1e-3));
        checks.push(Check::below(format!("virial at F={f:.2e}"), n.virial_error.abs(), 5e-3));
    }
    Ok(checks)
}

fn criterion_8() -> Outcome {
    Ok(reproduce::replica_collapse().map_err(|e| e.to_string())?.checks)
}

fn criterion_9() -> Outcome {
    let mut checks = vec![Check::within("Olivero at f_G = 0", olivero_fwhm(2.7, 0.0) / 2.7, 1.0, 1e-4)];
    let line = LineShape { f_l: 3.0, f_g: 4.0, center: 1.59 };
    let scan = MichelsonScan { noise: 0.02, seed: 91, ..MichelsonScan::default() };
    let sets = michelson_scan(&line, &scan).map_err(|e| e.to_string())?;
    let mut pts = Vec::new();
    for s in &sets {
        let f = fit_fringe(&s.samples, s.wavelength_nm).map_err(|e| e.to_string())?;
        pts.push(CoherencePoint { delay_ps: s.delay_ps, visibility: f.visibility.value, sigma: f.visibility.error });
    }
    let fit = fit_coherence(&pts, None).map_err(|e| e.to_string())?;
    checks.push(Check::within("f_L (rel)", fit.f_l.value / line.f_l, 1.0, 0.05));
    checks.push(Check::within("f_G (rel)", fit.f_g.value / line.f_g, 1.0, 0.05));
    let (g0, _) = transform_limit(175.0, None).map_err(|e| e.to_string())?;
    checks.push(Check::within("transform limit 175 ps (ueV)", g0, 3.76, 0.005));
    checks.push(Check::within("vs 3.78(4)", g0, 3.78, 0.04));
    Ok(checks)
}

fn criterion_10() -> Outcome {
    Ok(reproduce::trion_correction().map_err(|e| e.to_string())?.checks)
}

fn random_stream(n: usize, gap: u64, seed: u64) -> Vec<TimeTag> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0;
    (0..n)
        .map(|_| {
            t += rng.random_range(0..2 * gap);
            TimeTag::new(0, t)
        })
        .collect()
}

fn criterion_11() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 100, failure_persistence: None, ..Config::default() });
    let strategy = (0usize..=10_000, 0usize..=10_000, 1u64..=64, 1u64..=200, any::<u64>());
    let result = runner.run(&strategy, |(na, nb, bw, wbins, seed)| {
        let a = random_stream(na, 400, seed);
        let b = random_stream(nb, 400, seed ^ 0x5eed);
        let req = CorrelationRequest::new(bw, bw * wbins).unwrap();
        prop_assert_eq!(correlate(&a, &b, &req).unwrap(), correlate_brute_force(&a, &b, &req).unwrap());
        Ok(())
    });
    let checks = vec![Check::within("two-pointer == brute force, 100 cases", result.is_ok() as u8 as f64, 1.0, 0.0)];

    // 16 periods of 12.5 ns; soft, reported only
    let a = random_stream(2_000_000, 50_000, 1);
    let b = random_stream(2_000_000, 50_000, 2);
    let req = CorrelationRequest::new(25, 200_000).unwrap();
    let t0 = Instant::now();
    let h = correlate(&a, &b, &req).map_err(|e| e.to_string())?;
    let rate = (a.len() + b.len()) as f64 / t0.elapsed().as_secs_f64();
    println!("    throughput {rate:.2e} tags/s, {:.2e} pairs/s (soft target 1e7)", h.total_pairs as f64 / t0.elapsed().as_secs_f64());
    Ok(checks)
}

fn criterion_12() -> Outcome {
    let g = DiodeGeometry::default();
    let trap = TrapFieldModel::default();
    let v = franz_keldysh_onset(1.73, 1.59, &g, &trap).map_err(|e| e.to_string())?;
    Ok(vec![
        Check::within("onset (V)", v, -1.13, 0.005),
        Check::within("vs -1.16 V", v, -1.16, 0.05),
        Check::within("F(V_onset) * D (eV)", capacitor_field(v, &g) * trap.d, 1.73 - 1.59, 1e-12),
    ])
}

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "purity oracle vs 1/(1+r)", criterion_1),
        (2, "end-to-end HOM visibility", criterion_2),
        (3, "cross-polarized peak pattern", criterion_3),
        (4, "g2 pipeline", criterion_4),
        (5, "lifetime fits", criterion_5),
        (6, "Stark suite", criterion_6),
        (7, "triangular well", criterion_7),
        (8, "replica collapse", criterion_8),
        (9, "coherence", criterion_9),
        (10, "correction formula", criterion_10),
        (11, "correlator", criterion_11),
        (12, "Franz-Keldysh onset", criterion_12),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let t0 = Instant::now();
        let outcome = run();
        let secs = t0.elapsed().as_secs_f64();
        let passed = matches!(&outcome, Ok(c) if c.iter().all(|c| c.passed));
        let known = KNOWN_FAILURES.contains(&id);
        let tag = if passed { "PASS" } else { "FAIL" };
        let note = if !passed && known { "  (known, see README)" } else { "" };
        println!("criterion {id:>2} {tag}  {name} [{secs:.1} s]{note}");
        match outcome {
            Ok(checks) => {
                for c in checks.iter().filter(|c| !passed || !c.passed) {
                    println!(
                        "    {} {}: measured {:.6}, expected {:.6}, tolerance {:.2e}",
                        if c.passed { "ok  " } else { "FAIL" },
                        c.name,
                        c.measured,
                        c.expected,
                        c.tolerance
                    );
                }
            }
            Err(e) => println!("    error: {e}"),
        }
        if !passed && !known {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
