//! Damped Gauss-Newton (Levenberg-Marquardt) for weighted least squares with
//! analytic Jacobians.

use nalgebra::{DMatrix, DVector};

use super::FitError;

#[derive(Clone, Copy, Debug)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when the relative χ² decrease of an accepted step falls below this.
    pub ftol: f64,
    /// Stop when every relative parameter step falls below this.
    pub xtol: f64,
    /// Stop when the residual vector is this close to orthogonal to every
    /// Jacobian column.
    pub gtol: f64,
    pub lambda0: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions { max_iter: 500, ftol: 1e-12, xtol: 1e-10, gtol: 1e-10, lambda0: 1e-3 }
    }
}

#[derive(Clone, Debug)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// (JᵀWJ)⁻¹ at the solution, not rescaled by χ²_red.
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
}

impl LmResult {
    pub fn chi2_red(&self) -> f64 {
        self.chi2 / self.dof.max(1) as f64
    }

    pub fn error(&self, i: usize) -> f64 {
        self.covariance[(i, i)].max(0.0).sqrt()
    }

    /// Multiplies the covariance by χ²_red (for data without known errors).
    pub fn scale_covariance(&mut self) {
        let s = self.chi2_red();
        self.covariance *= s;
    }
}

/// A model y(x; p) with gradient ∂y/∂p written into `grad`.
pub trait Model {
    fn n_params(&self) -> usize;
    fn eval(&self, p: &[f64], x: f64, grad: &mut [f64]) -> f64;
    /// Rejects parameter vectors outside the physical domain.
    fn valid(&self, _p: &[f64]) -> bool {
        true
    }
    /// Maps a trial step back onto simple bounds (e.g. clamps at zero).
    fn project(&self, _p: &mut [f64]) {}
}

fn residuals<M: Model>(
    model: &M,
    p: &[f64],
    x: &[f64],
    y: &[f64],
    sigma: &[f64],
    jac: &mut DMatrix<f64>,
    r: &mut DVector<f64>,
) -> f64 {
    let mut grad = vec![0.0; p.len()];
    let mut chi2 = 0.0;
    for i in 0..x.len() {
        let m = model.eval(p, x[i], &mut grad);
        let w = 1.0 / sigma[i];
        r[i] = (y[i] - m) * w;
        chi2 += r[i] * r[i];
        for j in 0..p.len() {
            jac[(i, j)] = grad[j] * w;
        }
    }
    chi2
}

/// Minimizes Σ((yᵢ − m(xᵢ; p)) / σᵢ)² starting from `p0`.
pub fn levenberg_marquardt<M: Model>(
    model: &M,
    x: &[f64],
    y: &[f64],
    sigma: &[f64],
    p0: &[f64],
    opts: &LmOptions,
) -> Result<LmResult, FitError> {
    let n = x.len();
    let np = model.n_params();
    if p0.len() != np || y.len() != n || sigma.len() != n {
        return Err(FitError::Input("length mismatch between data, errors and parameters".into()));
    }
    if n <= np {
        return Err(FitError::Input(format!("{n} points for {np} parameters")));
    }
    if sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(FitError::Input("all errors must be positive".into()));
    }
    if !model.valid(p0) {
        return Err(FitError::Input("initial parameters outside the model domain".into()));
    }
    let mut p = p0.to_vec();
    let mut jac = DMatrix::zeros(n, np);
    let mut r = DVector::zeros(n);
    let mut chi2 = residuals(model, &p, x, y, sigma, &mut jac, &mut r);
    let mut lambda = opts.lambda0;
    let mut trial_jac = DMatrix::zeros(n, np);
    let mut trial_r = DVector::zeros(n);
    let mut stalled = 0;

    for iter in 1..=opts.max_iter {
        let jtj = jac.tr_mul(&jac);
        let jtr = jac.tr_mul(&r);
        let cosine = (0..np).map(|j| jtr[j].abs() / (jtj[(j, j)] * chi2).sqrt().max(1e-300)).fold(0.0, f64::max);
        if cosine <= opts.gtol {
            return finish(p, jac, chi2, n - np, iter - 1);
        }
        // inner loop: raise damping until a step lowers χ²
        let mut accepted = None;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for j in 0..np {
                a[(j, j)] += lambda * jtj[(j, j)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            model.project(&mut trial);
            let step = DVector::from_iterator(np, trial.iter().zip(&p).map(|(t, v)| t - v));
            if trial.iter().all(|v| v.is_finite()) && model.valid(&trial) {
                let c = residuals(model, &trial, x, y, sigma, &mut trial_jac, &mut trial_r);
                if c.is_finite() && c <= chi2 {
                    accepted = Some((trial, step, c));
                    break;
                }
            }
            lambda *= 10.0;
        }
        let Some((trial, step, c)) = accepted else {
            // no downhill step at any damping: a minimum to working precision
            return finish(p, jac, chi2, n - np, iter);
        };
        // step-size tests only mean something for near Gauss-Newton steps
        let near_gn = lambda <= 1.0;
        let small_step = near_gn && step.iter().zip(&p).all(|(d, v)| d.abs() <= opts.xtol * (v.abs() + opts.xtol));
        let no_drop = chi2 - c <= opts.ftol * chi2;
        let small_drop = near_gn && no_drop;
        // χ² flat at working precision for several heavily damped steps
        stalled = if no_drop { stalled + 1 } else { 0 };
        p = trial;
        chi2 = c;
        std::mem::swap(&mut jac, &mut trial_jac);
        std::mem::swap(&mut r, &mut trial_r);
        lambda = (lambda / 10.0).max(1e-12);
        if small_step || small_drop || stalled >= 5 {
            return finish(p, jac, chi2, n - np, iter);
        }
    }
    Err(FitError::NonConvergence { iterations: opts.max_iter, chi2, params: p })
}

fn finish(p: Vec<f64>, jac: DMatrix<f64>, chi2: f64, dof: usize, iterations: usize) -> Result<LmResult, FitError> {
    let covariance = invert_normal(&jac)?;
    Ok(LmResult { params: p, covariance, chi2, dof, iterations })
}

/// (JᵀJ)⁻¹ with column scaling for conditioning.
pub(crate) fn invert_normal(jac: &DMatrix<f64>) -> Result<DMatrix<f64>, FitError> {
    let np = jac.ncols();
    let scale: Vec<f64> = (0..np).map(|j| jac.column(j).norm()).collect();
    if scale.iter().any(|s| !(*s > 0.0)) {
        return Err(FitError::Singular("a parameter has no influence on the model".into()));
    }
    let mut js = jac.clone();
    for (j, s) in scale.iter().enumerate() {
        js.column_mut(j).unscale_mut(*s);
    }
    let svd = js.svd(false, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(FitError::Singular(format!("condition number {:.3e}", smax / smin)));
    }
    let vt = svd.v_t.expect("requested V");
    let mut cov = DMatrix::zeros(np, np);
    for i in 0..np {
        for j in 0..np {
            let mut acc = 0.0;
            for k in 0..np {
                acc += vt[(k, i)] * vt[(k, j)] / (svd.singular_values[k] * svd.singular_values[k]);
            }
            cov[(i, j)] = acc / (scale[i] * scale[j]);
        }
    }
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Exp;
    impl Model for Exp {
        fn n_params(&self) -> usize {
            2
        }
        fn eval(&self, p: &[f64], x: f64, g: &mut [f64]) -> f64 {
            let e = (-x / p[1]).exp();
            g[0] = e;
            g[1] = p[0] * e * x / (p[1] * p[1]);
            p[0] * e
        }
        fn valid(&self, p: &[f64]) -> bool {
            p[1] > 0.0
        }
    }

    #[test]
    fn recovers_noiseless_exponential() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 10.0).collect();
        let y: Vec<f64> = x.iter().map(|x| 3.0 * (-x / 120.0).exp()).collect();
        let s = vec![0.01; x.len()];
        let r = levenberg_marquardt(&Exp, &x, &y, &s, &[1.0, 50.0], &LmOptions::default()).unwrap();
        assert!((r.params[0] - 3.0).abs() < 1e-8);
        assert!((r.params[1] - 120.0).abs() < 1e-6);
        assert!(r.chi2 < 1e-12);
    }

    #[test]
    fn linear_model_covariance_matches_closed_form() {
        struct Line;
        impl Model for Line {
            fn n_params(&self) -> usize {
                2
            }
            fn eval(&self, p: &[f64], x: f64, g: &mut [f64]) -> f64 {
                g[0] = 1.0;
                g[1] = x;
                p[0] + p[1] * x
            }
        }
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.1, 4.9, 7.2, 8.8];
        let s = [0.5; 5];
        let r = levenberg_marquardt(&Line, &x, &y, &s, &[0.0, 0.0], &LmOptions::default()).unwrap();
        // var(slope) = σ² / Σ(x − x̄)²
        assert!((r.covariance[(1, 1)] - 0.25 / 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_underdetermined() {
        let r = levenberg_marquardt(&Exp, &[1.0, 2.0], &[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0], &LmOptions::default());
        assert!(matches!(r, Err(FitError::Input(_))));
    }

    #[test]
    fn reports_non_convergence() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 10.0).collect();
        let y: Vec<f64> = x.iter().map(|x| 3.0 * (-x / 120.0).exp()).collect();
        let s = vec![0.01; x.len()];
        let opts = LmOptions { max_iter: 1, ..Default::default() };
        let r = levenberg_marquardt(&Exp, &x, &y, &s, &[1.0, 50.0], &opts);
        assert!(matches!(r, Err(FitError::NonConvergence { iterations: 1, .. })));
    }
}
