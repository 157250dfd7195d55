use serde::{Deserialize, Serialize};

/// Value with a one-sigma error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub error: f64,
}

impl Measured {
    pub fn new(value: f64, error: f64) -> Self {
        Measured { value, error }
    }

    pub fn exact(value: f64) -> Self {
        Measured { value, error: 0.0 }
    }

    /// x / y for uncorrelated x, y (first-order propagation).
    pub fn ratio(self, y: Measured) -> Measured {
        let value = self.value / y.value;
        let error = value.abs() * ((self.error / self.value).powi(2) + (y.error / y.value).powi(2)).sqrt();
        let error = if error.is_finite() { error } else { (self.error / y.value).abs() };
        Measured { value, error }
    }

    /// x + y for uncorrelated x, y.
    pub fn sum(self, y: Measured) -> Measured {
        Measured { value: self.value + y.value, error: self.error.hypot(y.error) }
    }

    /// Whether `truth` lies within `k` standard errors.
    pub fn covers(&self, truth: f64, k: f64) -> bool {
        (self.value - truth).abs() <= k * self.error
    }
}

impl std::fmt::Display for Measured {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.value, self.error)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lifetime_ratio_propagation() {
        let r = Measured::new(133.0, 3.0).ratio(Measured::new(227.0, 4.0));
        assert!((r.value - 0.586).abs() < 5e-4);
        assert!((r.error - 0.017).abs() < 5e-4);
    }

    #[test]
    fn zero_numerator() {
        let r = Measured::new(0.0, 1.0).ratio(Measured::new(10.0, 1.0));
        assert_eq!(r.value, 0.0);
        assert!((r.error - 0.1).abs() < 1e-12);
    }
}
