//! Quadratic Stark fit of noisy XX and X lines and the |XX⟩ state they sum to.

use qdcascade::fit::{fit_stark, state_params, StarkParams};
use qdcascade::reproduce::{stark_points, stark_voltages, STARK_TABLE};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn show(name: &str, p: &StarkParams) {
    println!("{name:>5}: E0 = {} eV, alpha = {}, beta = {}", p.e0, p.alpha, p.beta);
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (vb, d) = (1.7, 305.0);
    let row = &STARK_TABLE[0];
    let (xx, x) = (row.xx.params(1), row.x.params(1));
    let v = stark_voltages();
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    let fxx = fit_stark(&stark_points(&xx, &v, 5e-6, Some(&mut rng)), vb, d)?;
    let fx = fit_stark(&stark_points(&x, &v, 5e-6, Some(&mut rng)), vb, d)?;
    show("XX", &fxx);
    show("X", &fx);
    show("state", &state_params(&fxx, &fx));
    show("table", &row.state.params(2));
    Ok(())
}
