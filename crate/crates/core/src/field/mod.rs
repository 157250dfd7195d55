//! Electrostatics of the diode and the trapped-hole replica model.
//!
//! Fields are in V/nm, energies in eV unless a name says otherwise.

mod well;

pub use well::{triangular_well, triangular_well_numeric, NumericWell, WellState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{fit_stark_field, FitError, StarkParams, StarkPoint};
use crate::units::COULOMB_V_NM;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiodeGeometry {
    /// Built-in voltage, V.
    pub vb: f64,
    /// Intrinsic layer thickness, nm.
    pub d_nm: f64,
}

impl Default for DiodeGeometry {
    fn default() -> Self {
        DiodeGeometry { vb: 1.7, d_nm: 305.0 }
    }
}

impl DiodeGeometry {
    pub fn validate(&self) -> Result<(), FieldError> {
        if !(self.d_nm > 0.0) || !self.vb.is_finite() {
            return Err(FieldError::Parameter(format!("D must be positive (got {} nm)", self.d_nm)));
        }
        Ok(())
    }

    /// Voltage giving field `f`.
    pub fn voltage_for_field(&self, f: f64) -> f64 {
        self.vb - f * self.d_nm
    }
}

/// How the n-doped back contact acts on a trapped hole.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageCharge {
    None,
    /// Grounded conducting plane at d − δ below the hole.
    #[default]
    GroundedPlane,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrapFieldModel {
    /// QD centre to the barrier interface, nm.
    pub delta0: f64,
    /// Barrier layer thickness, nm.
    pub d: f64,
    pub epsilon_r: f64,
    /// Heavy-hole mass in units of m₀.
    pub m_hh: f64,
    pub image: ImageCharge,
}

impl Default for TrapFieldModel {
    fn default() -> Self {
        TrapFieldModel { delta0: 11.5, d: 15.1, epsilon_r: 11.4, m_hh: 0.51, image: ImageCharge::GroundedPlane }
    }
}

impl TrapFieldModel {
    pub fn validate(&self) -> Result<(), FieldError> {
        for (name, v) in [("delta0", self.delta0), ("d", self.d), ("epsilon_r", self.epsilon_r), ("m_hh", self.m_hh)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(FieldError::Parameter(format!("trap.{name} must be positive (got {v})")));
            }
        }
        Ok(())
    }

    /// Field of one elementary charge at distance `r` nm, V/nm.
    pub fn point_charge_field(&self, r: f64) -> f64 {
        COULOMB_V_NM / (self.epsilon_r * r * r)
    }
}

pub fn capacitor_field(v: f64, geom: &DiodeGeometry) -> f64 {
    (geom.vb - v) / geom.d_nm
}

/// Field at the QD with its parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReplicaField {
    pub n: u32,
    /// Capacitor field F_v.
    pub f_v: f64,
    /// Trapped holes, F_c.
    pub f_c: f64,
    /// Their images, F_m (≤ 0).
    pub f_m: f64,
    /// Hole distance from the interface, nm (0 when n = 0).
    pub delta: f64,
}

impl ReplicaField {
    pub fn total(&self) -> f64 {
        self.f_v + self.f_c + self.f_m
    }
}

/// Total field at the QD with `n` holes trapped at the barrier interface.
pub fn replica_field(v: f64, n: u32, geom: &DiodeGeometry, trap: &TrapFieldModel) -> Result<ReplicaField, FieldError> {
    geom.validate()?;
    trap.validate()?;
    let f_v = capacitor_field(v, geom);
    if n == 0 {
        return Ok(ReplicaField { n, f_v, f_c: 0.0, f_m: 0.0, delta: 0.0 });
    }
    let delta = triangular_well(f_v, trap.m_hh)?.delta_nm;
    let q = n as f64;
    let f_c = q * trap.point_charge_field(delta + trap.delta0);
    let f_m = match trap.image {
        ImageCharge::None => 0.0,
        ImageCharge::GroundedPlane => {
            if delta >= trap.d {
                return Err(FieldError::Parameter(format!(
                    "hole at {delta:.2} nm lies beyond the barrier (d = {} nm)",
                    trap.d
                )));
            }
            -q * trap.point_charge_field(trap.delta0 + 2.0 * trap.d - delta)
        }
    };
    Ok(ReplicaField { n, f_v, f_c, f_m, delta })
}

/// Voltage at which e·F·d across the barrier layer reaches Eg − Eph.
pub fn franz_keldysh_onset(eg: f64, eph: f64, geom: &DiodeGeometry, trap: &TrapFieldModel) -> Result<f64, FieldError> {
    geom.validate()?;
    trap.validate()?;
    if !(eg > eph) {
        return Err(FieldError::Parameter(format!("need Eg > Eph (got {eg} <= {eph})")));
    }
    Ok(geom.vb - (eg - eph) * geom.d_nm / trap.d)
}

/// Single-photon purity limit 1/(1 + r).
pub fn purity_limit(r: f64) -> Result<f64, FieldError> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(FieldError::Parameter(format!("r must be non-negative (got {r})")));
    }
    Ok(1.0 / (1.0 + r))
}

/// Line energy of replica `n` at voltage `v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaPoint {
    pub voltage: f64,
    pub n: u32,
    pub energy: f64,
    pub sigma: f64,
}

/// Noise-free replica lines generated from one master curve E(F).
pub fn synthesize_replicas(
    master: &StarkParams,
    voltages: &[f64],
    ns: &[u32],
    sigma: f64,
    geom: &DiodeGeometry,
    trap: &TrapFieldModel,
) -> Result<Vec<ReplicaPoint>, FieldError> {
    let mut out = Vec::with_capacity(voltages.len() * ns.len());
    for &n in ns {
        for &v in voltages {
            let f = replica_field(v, n, geom, trap)?.total();
            out.push(ReplicaPoint { voltage: v, n, energy: master.energy(f), sigma });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct CollapseReport {
    /// Joint quadratic fit against the total field.
    pub master: StarkParams,
    pub max_residual_uev: f64,
    pub rms_residual_uev: f64,
    /// (n, max |residual|) per replica.
    pub per_replica: Vec<(u32, f64)>,
    /// (F_total, n, residual µeV) per point.
    pub points: Vec<(f64, u32, f64)>,
}

/// Maps every replica onto the total field and fits one quadratic to all
/// of them. Small residuals mean the replicas share one E(F).
pub fn collapse_replicas(
    data: &[ReplicaPoint],
    geom: &DiodeGeometry,
    trap: &TrapFieldModel,
) -> Result<CollapseReport, FieldError> {
    let mut pts = Vec::with_capacity(data.len());
    for p in data {
        let f = replica_field(p.voltage, p.n, geom, trap)?.total();
        pts.push(StarkPoint { x: f, energy: p.energy, sigma: p.sigma });
    }
    let master = fit_stark_field(&pts)?;
    let mut points = Vec::with_capacity(pts.len());
    let mut per: Vec<(u32, f64)> = Vec::new();
    let (mut max, mut ss) = (0.0f64, 0.0);
    for (p, d) in pts.iter().zip(data) {
        let r = (p.energy - master.energy(p.x)) * 1e6;
        max = max.max(r.abs());
        ss += r * r;
        match per.iter_mut().find(|(n, _)| *n == d.n) {
            Some(e) => e.1 = e.1.max(r.abs()),
            None => per.push((d.n, r.abs())),
        }
        points.push((p.x, d.n, r));
    }
    per.sort_by_key(|e| e.0);
    Ok(CollapseReport {
        master,
        max_residual_uev: max,
        rms_residual_uev: (ss / pts.len() as f64).sqrt(),
        per_replica: per,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> DiodeGeometry {
        DiodeGeometry::default()
    }

    #[test]
    fn capacitor_examples() {
        assert_eq!(capacitor_field(1.7, &geom()), 0.0);
        assert!((capacitor_field(0.9, &geom()) - 0.8 / 305.0).abs() < 1e-15);
        assert!((capacitor_field(-2.04, &geom()) - 1.226e-2).abs() < 1e-5);
    }

    #[test]
    fn point_charge_at_13nm() {
        let t = TrapFieldModel::default();
        // e / (4π ε₀ ε_r r²) with SI constants
        let e = 1.602_176_634e-19;
        let eps0 = 8.854_187_812_8e-12;
        let r = 13e-9;
        let si = e / (4.0 * std::f64::consts::PI * eps0 * 11.4 * r * r) * 1e-9;
        assert!((t.point_charge_field(13.0) - si).abs() < 1e-9 * si);
        assert!((si - 7.47e-4).abs() < 1e-6);
    }

    #[test]
    fn zero_holes_is_capacitor_field() {
        let r = replica_field(-0.5, 0, &geom(), &TrapFieldModel::default()).unwrap();
        assert_eq!(r.total(), capacitor_field(-0.5, &geom()));
    }

    #[test]
    fn image_term_reduces_field() {
        let mut t = TrapFieldModel::default();
        let a = replica_field(-1.0, 2, &geom(), &t).unwrap();
        t.image = ImageCharge::None;
        let b = replica_field(-1.0, 2, &geom(), &t).unwrap();
        assert!(a.f_m < 0.0 && b.f_m == 0.0);
        assert_eq!(a.f_c, b.f_c);
        assert!(a.total() < b.total());
    }

    #[test]
    fn holes_need_positive_capacitor_field() {
        assert!(replica_field(2.0, 1, &geom(), &TrapFieldModel::default()).is_err());
    }

    #[test]
    fn onset_examples() {
        let t = TrapFieldModel::default();
        let v = franz_keldysh_onset(1.73, 1.59, &geom(), &t).unwrap();
        assert!((v - (1.7 - 0.14 * 305.0 / 15.1)).abs() < 1e-12);
        assert!((v + 1.13).abs() < 0.005);
        let near = franz_keldysh_onset(1.59 + 1e-12, 1.59, &geom(), &t).unwrap();
        assert!((near - 1.7).abs() < 1e-9);
        let thick = TrapFieldModel { d: 30.2, ..t };
        let v2 = franz_keldysh_onset(1.73, 1.59, &geom(), &thick).unwrap();
        assert!(((1.7 - v2) * 2.0 - (1.7 - v)).abs() < 1e-12);
        assert!(franz_keldysh_onset(1.5, 1.59, &geom(), &t).is_err());
    }

    #[test]
    fn purity_examples() {
        assert_eq!(purity_limit(0.0).unwrap(), 1.0);
        assert!((purity_limit(0.26).unwrap() - 0.7937).abs() < 1e-4);
        assert!((purity_limit(0.64).unwrap() - 0.6098).abs() < 1e-4);
        assert!(purity_limit(-0.1).is_err());
    }

    #[test]
    fn stark_plug_in() {
        let x = StarkParams::exact(1.592911, -0.193, 67.0, 1);
        let f = capacitor_field(0.9, &geom());
        assert!((x.energy(f) - 1.592956).abs() < 5e-7);
        assert_eq!(x.energy(0.0), 1.592911);
    }

    #[test]
    fn replicas_collapse_with_matching_model() {
        let master = StarkParams::exact(1.592911, -0.193, 67.0, 1);
        let t = TrapFieldModel::default();
        let v: Vec<f64> = (0..30).map(|i| -2.0 + 0.1 * i as f64).collect();
        let data = synthesize_replicas(&master, &v, &[0, 1, 2, 3], 1e-6, &geom(), &t).unwrap();
        let c = collapse_replicas(&data, &geom(), &t).unwrap();
        assert!(c.max_residual_uev < 1e-3);
        assert!((c.master.beta.value - 67.0).abs() < 1e-6);
        assert_eq!(c.per_replica.len(), 4);
    }
}
