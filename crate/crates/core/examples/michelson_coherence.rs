//! Michelson scan of a Voigt line, fringe fits at each stage position and
//! the coherence-envelope fit back to (f_L, f_G).

use qdcascade::fit::{fit_coherence, fit_fringe, olivero_fwhm, transform_limit, CoherencePoint};
use qdcascade::interferometer::{michelson_scan, LineShape, MichelsonScan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let line = LineShape { f_l: 3.0, f_g: 4.0, center: 1.59 };
    let scan = MichelsonScan { noise: 0.02, seed: 2, ..MichelsonScan::default() };
    let sets = michelson_scan(&line, &scan)?;

    let mut points = Vec::new();
    for s in &sets {
        let f = fit_fringe(&s.samples, s.wavelength_nm)?;
        points.push(CoherencePoint { delay_ps: s.delay_ps, visibility: f.visibility.value, sigma: f.visibility.error });
    }
    let (gamma0, _) = transform_limit(175.0, None)?;
    let fit = fit_coherence(&points, Some(gamma0))?;
    println!("truth: f_L {} f_G {} Γ {:.3} µeV", line.f_l, line.f_g, olivero_fwhm(line.f_l, line.f_g));
    println!("fit:   f_L {} f_G {} Γ {} µeV", fit.f_l, fit.f_g, fit.gamma);
    println!("Γ0(175 ps) = {gamma0:.3} µeV, Γ/Γ0 = {}", fit.ratio.unwrap());
    Ok(())
}
