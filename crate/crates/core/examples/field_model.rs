//! Field at the dot with trapped holes, hole confinement in the triangular
//! well, the Franz-Keldysh onset and the replica collapse.

use qdcascade::field::{
    capacitor_field, collapse_replicas, franz_keldysh_onset, replica_field, synthesize_replicas, triangular_well,
    triangular_well_numeric, DiodeGeometry, TrapFieldModel,
};
use qdcascade::reproduce::STARK_TABLE;
use qdcascade::units::v_per_nm_to_kv_per_cm;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let geom = DiodeGeometry::default();
    let trap = TrapFieldModel::default();

    for v in [-2.0, -1.0, 0.0] {
        let f_v = capacitor_field(v, &geom);
        let w = triangular_well(f_v, trap.m_hh)?;
        print!("V = {v:+.1}: F_v = {:.1} kV/cm, E1 = {:.2} meV, delta = {:.2} nm; F(n) =", v_per_nm_to_kv_per_cm(f_v), w.e1_mev, w.delta_nm);
        for n in 0..=3 {
            print!(" {:.1}", v_per_nm_to_kv_per_cm(replica_field(v, n, &geom, &trap)?.total()));
        }
        println!(" kV/cm");
    }

    let f = 0.01;
    let (a, num) = (triangular_well(f, trap.m_hh)?, triangular_well_numeric(f, trap.m_hh, 10_000, 20.0)?);
    println!("E1 at 100 kV/cm: Airy {:.4} meV, grid {:.4} meV, virial error {:.1e}", a.e1_mev, num.state.e1_mev, num.virial_error);

    println!("Franz-Keldysh onset: {:.3} V", franz_keldysh_onset(1.73, 1.59, &geom, &trap)?);

    let master = STARK_TABLE[0].x.params(1);
    let v: Vec<f64> = (0..32).map(|i| -2.04 + i as f64 * 0.04).collect();
    let data = synthesize_replicas(&master, &v, &[1, 2, 3], 1e-6, &geom, &trap)?;
    for eps in [1.0, 0.9, 1.1] {
        let assumed = TrapFieldModel { epsilon_r: trap.epsilon_r * eps, ..trap };
        let c = collapse_replicas(&data, &geom, &assumed)?;
        println!("collapse with eps_r x{eps}: max residual {:.3} µeV", c.max_residual_uev);
    }
    Ok(())
}
