//! Full HOM pipeline for two lifetime pairs, the cross-polarized peak
//! pattern against path enumeration, and the g²/ν correction.

use qdcascade::fit::hom_corrected;
use qdcascade::interferometer::hom_peak_oracle;
use qdcascade::measured::Measured;
use qdcascade::pipeline::{run_hom, HomExperiment};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (tau_xx, tau_x) in [(161.0, 619.0), (112.0, 175.0)] {
        let run = run_hom(&HomExperiment::ideal(tau_xx, tau_x, 2_000_000, 9))?;
        println!("tau_xx {tau_xx} / tau_x {tau_x}: V_raw = {}  (1/(1+r) = {:.3})", run.v_raw, tau_x / (tau_x + tau_xx));
        if tau_xx == 161.0 {
            let oracle = hom_peak_oracle(0.5, 0.0, 3);
            for ((k, m), (_, o)) in run.cross_pattern(3).iter().zip(&oracle) {
                println!("  peak {k:+}: {m}  enumeration {o:.3}");
            }
        }
    }
    let v = hom_corrected(Measured::new(0.944, 0.004), Measured::new(0.009, 0.002), 0.985)?;
    println!("corrected visibility: {v}");
    Ok(())
}
