//! Exponential decay convolved with a Gaussian instrument response.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::erfc;

/// Scaled complementary error function exp(z²)·erfc(z) for z ≥ 0.
pub fn erfcx(z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z < 26.0 {
        (z * z).exp() * erfc(z)
    } else {
        // asymptotic series, relative error < 1e-10 here
        let iz2 = 1.0 / (z * z);
        (1.0 - 0.5 * iz2 * (1.0 - 1.5 * iz2 * (1.0 - 2.5 * iz2))) / (z * PI.sqrt())
    }
}

/// Value and partial derivatives of the convolved decay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpGauss {
    pub value: f64,
    pub d_t: f64,
    pub d_lambda: f64,
    pub d_sigma: f64,
    /// Normalized Gaussian G_σ(t); zero for σ = 0.
    pub gauss: f64,
}

/// E(t; λ, σ) = ∫₀^∞ e^{-λs} G_σ(t − s) ds = ½·exp(λ²σ²/2 − λt)·erfc((λσ² − t)/(σ√2)).
///
/// Integrates to 1/λ. For σ = 0 this is θ(t)·e^{-λt}.
pub fn expgauss(t: f64, lambda: f64, sigma: f64) -> ExpGauss {
    if sigma <= 0.0 {
        let value = if t > 0.0 {
            (-lambda * t).exp()
        } else if t == 0.0 {
            0.5
        } else {
            0.0
        };
        return ExpGauss { value, d_t: -lambda * value, d_lambda: -t * value, d_sigma: 0.0, gauss: 0.0 };
    }
    let z = (lambda * sigma * sigma - t) / (sigma * SQRT_2);
    let gauss = (-t * t / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
    let value = if z >= 0.0 {
        0.5 * (-t * t / (2.0 * sigma * sigma)).exp() * erfcx(z)
    } else {
        0.5 * (0.5 * lambda * lambda * sigma * sigma - lambda * t).exp() * erfc(z)
    };
    ExpGauss {
        value,
        d_t: -lambda * value + gauss,
        d_lambda: (lambda * sigma * sigma - t) * value - sigma * sigma * gauss,
        d_sigma: lambda * lambda * sigma * value - gauss * (lambda * sigma + t / sigma),
        gauss,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfcx_continuous_at_switch() {
        let z = 26.0 - 1e-9f64;
        let a = (z * z).exp() * erfc(z);
        let b = erfcx(26.0);
        assert!((a - b).abs() / b < 1e-8, "{a} {b}");
        assert!((erfcx(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn integrates_to_inverse_rate() {
        let (lambda, sigma) = (1.0 / 133.0, 9.0);
        let dt = 0.05;
        let sum: f64 = (-2000..60_000).map(|i| expgauss(i as f64 * dt, lambda, sigma).value).sum::<f64>() * dt;
        assert!((sum * lambda - 1.0).abs() < 1e-4, "{}", sum * lambda);
    }

    #[test]
    fn reduces_to_exponential_far_from_edge() {
        let e = expgauss(1000.0, 1.0 / 200.0, 5.0);
        let plain = (-1000.0f64 / 200.0).exp() * (0.5f64 * (5.0 / 200.0f64).powi(2)).exp();
        assert!((e.value - plain).abs() / plain < 1e-12);
    }

    #[test]
    fn small_sigma_no_overflow() {
        // λσ²/σ large: the naive form overflows in exp()
        let e = expgauss(-50.0, 10.0, 1.0);
        assert!(e.value.is_finite() && e.value >= 0.0);
        let e = expgauss(3.0, 1.0 / 100.0, 1e-3);
        assert!((e.value - (-0.03f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn partials_match_finite_differences() {
        for &(t, lambda, sigma) in &[(-30.0, 1.0 / 133.0, 9.0), (0.0, 1.0 / 50.0, 20.0), (40.0, 1.0 / 227.0, 9.0), (300.0, 0.02, 3.0)] {
            let e = expgauss(t, lambda, sigma);
            let h = |x: f64| 1e-6 * x.abs().max(1e-3);
            let fd = |f: &dyn Fn(f64) -> f64, x: f64| (f(x + h(x)) - f(x - h(x))) / (2.0 * h(x));
            let dt = fd(&|x| expgauss(x, lambda, sigma).value, t);
            let dl = fd(&|x| expgauss(t, x, sigma).value, lambda);
            let ds = fd(&|x| expgauss(t, lambda, x).value, sigma);
            let tol = |a: f64, b: f64| (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1e-9);
            assert!(tol(e.d_t, dt), "d_t {} vs {}", e.d_t, dt);
            assert!(tol(e.d_lambda, dl), "d_lambda {} vs {}", e.d_lambda, dl);
            assert!(tol(e.d_sigma, ds), "d_sigma {} vs {}", e.d_sigma, ds);
        }
    }
}
