use serde::{Deserialize, Serialize};

use super::FitError;
use crate::measured::Measured;

/// V_raw = 1 − a_co / a_cross.
pub fn hom_visibility(a_co: Measured, a_cross: Measured) -> Result<Measured, FitError> {
    if !(a_cross.value > 0.0) {
        return Err(FitError::Input("a_cross must be positive".into()));
    }
    let q = a_co.ratio(a_cross);
    Ok(Measured::new(1.0 - q.value, q.error))
}

/// V_corr = V_raw·(1 + 2g²(0)) / ν².
pub fn hom_corrected(v_raw: Measured, g2: Measured, nu: f64) -> Result<Measured, FitError> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(FitError::Input(format!("classical visibility {nu} outside (0, 1]")));
    }
    if !(g2.value >= 0.0) {
        return Err(FitError::Input("g2 must be non-negative".into()));
    }
    let f = (1.0 + 2.0 * g2.value) / (nu * nu);
    let value = v_raw.value * f;
    let error = (f * v_raw.error).hypot(2.0 * v_raw.value * g2.error / (nu * nu));
    Ok(Measured::new(value, error))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityRecord {
    pub a_co: Measured,
    pub a_cross: Measured,
    pub g2: Measured,
    pub nu: f64,
    pub v_raw: Measured,
    pub v_corr: Measured,
}

impl VisibilityRecord {
    pub fn new(a_co: Measured, a_cross: Measured, g2: Measured, nu: f64) -> Result<Self, FitError> {
        let v_raw = hom_visibility(a_co, a_cross)?;
        let v_corr = hom_corrected(v_raw, g2, nu)?;
        Ok(VisibilityRecord { a_co, a_cross, g2, nu, v_raw, v_corr })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn limits() {
        let a = Measured::new(0.4, 0.01);
        assert_eq!(hom_visibility(a, a).unwrap().value, 0.0);
        assert_eq!(hom_visibility(Measured::exact(0.0), a).unwrap().value, 1.0);
        assert!(hom_visibility(a, Measured::exact(0.0)).is_err());
        let v = Measured::new(0.8, 0.01);
        assert_eq!(hom_corrected(v, Measured::exact(0.0), 1.0).unwrap(), v);
    }

    #[test]
    fn trion_benchmark() {
        let v = hom_corrected(Measured::new(0.944, 0.004), Measured::new(0.009, 0.001), 0.985).unwrap();
        assert!((v.value - 0.991).abs() < 1e-3, "{}", v.value);
    }

    #[test]
    fn formula_applied_verbatim_at_replica_three() {
        let v = hom_corrected(Measured::exact(0.735), Measured::exact(0.0187), 0.985).unwrap();
        assert!((v.value - 0.786).abs() < 5e-4, "{}", v.value);
    }

    #[test]
    fn rejects_bad_nu() {
        let v = Measured::exact(0.5);
        assert!(hom_corrected(v, Measured::exact(0.0), 0.0).is_err());
        assert!(hom_corrected(v, Measured::exact(0.0), 1.1).is_err());
        assert!(hom_corrected(v, Measured::exact(-0.1), 0.9).is_err());
    }

    proptest! {
        #[test]
        fn correction_monotone(v in 0.0f64..1.0, g in 0.0f64..0.5, dg in 1e-6f64..0.1, nu in 0.05f64..1.0, dnu in 1e-6f64..0.04) {
            let at = |g: f64, nu: f64| hom_corrected(Measured::exact(v), Measured::exact(g), nu).unwrap().value;
            prop_assert!(at(g + dg, nu) >= at(g, nu));
            prop_assert!(at(g, nu) >= at(g, (nu + dnu).min(1.0)));
            prop_assert!(at(g, nu) >= v);
        }
    }
}
