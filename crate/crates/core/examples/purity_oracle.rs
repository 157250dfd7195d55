//! Numerical purity of the XX photon on a time grid, next to 1/(1+r).

use qdcascade::interferometer::purity_oracle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tau_x = 619.0;
    println!("{:>6} {:>10} {:>10} {:>10}", "r", "oracle", "1/(1+r)", "diff");
    for r in [0.1, 0.26, 0.5, 0.64, 1.0] {
        let tau_xx = r * tau_x;
        let rep = purity_oracle(tau_xx, tau_x, 1024, 20.0 * (tau_xx + tau_x), false)?;
        let closed = 1.0 / (1.0 + r);
        println!("{r:>6.2} {:>10.6} {closed:>10.6} {:>10.2e}", rep.purity, rep.purity - closed);
    }
    Ok(())
}
