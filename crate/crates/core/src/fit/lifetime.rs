//! Lifetime fits of time-correlated histograms (signal vs. laser sync).
//!
//! Models, with s = t − t₀ and E the exponential ⊗ Gaussian of
//! [`expgauss`](super::special::expgauss):
//!
//! * mono: A·E(s; 1/τ) + c
//! * bi:   A·(E(s; 1/τ_X) − E(s; 1/τ_XX)) / (τ_X − τ_XX) + c
//! * degenerate bi (τ_X = τ_XX = τ): A·(s/τ²)·e^{-s/τ} ⊗ G + c

use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOptions, LmResult, Model};
use super::special::expgauss;
use super::FitError;
use crate::measured::Measured;
use crate::timetag::CoincidenceHistogram;
use crate::units::{fwhm_to_sigma, sigma_to_fwhm};

/// Instrument response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Irf {
    /// Gaussian with the given FWHM in ps; zero means a delta response.
    Gaussian { fwhm: f64 },
    /// Measured response, reduced to a Gaussian by its moments.
    Histogram(CoincidenceHistogram),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum IrfMode {
    /// IRF width held at its measured value.
    #[default]
    Fixed,
    /// IRF width is a free parameter, started at the measured value.
    Floating,
}

/// Per-bin errors of the histogram fit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    /// σ² = max(counts, 1).
    Neyman,
    /// σ² = model, iterated to the Poisson maximum-likelihood estimate.
    #[default]
    Poisson,
}

#[derive(Clone, Debug)]
pub struct LifetimeOptions {
    pub irf: Irf,
    pub irf_mode: IrfMode,
    /// Delay range [lo, hi) in ps. Defaults to 2 ns before the maximum up to 10 ns after it.
    pub range: Option<(i64, i64)>,
    /// Bins with fewer counts are left out of the fit.
    pub count_floor: u64,
    pub weighting: Weighting,
    /// Bi fit only: hold τ_XX at this value (e.g. from a mono fit of the XX channel).
    pub tau_xx: Option<Measured>,
    pub lm: LmOptions,
}

impl LifetimeOptions {
    pub fn new(irf: Irf) -> Self {
        LifetimeOptions { irf, irf_mode: IrfMode::Fixed, range: None, count_floor: 0, weighting: Weighting::Poisson, tau_xx: None, lm: LmOptions::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LifetimeFit {
    /// τ of a mono fit, or τ_XX of a bi fit.
    pub tau_xx: Measured,
    pub tau_x: Option<Measured>,
    pub amplitude: Measured,
    pub offset: Measured,
    pub t0: Measured,
    pub irf_fwhm: Measured,
    pub chi2_red: f64,
    pub iterations: usize,
    /// Bi fit collapsed onto the τ_XX = τ_X limit form.
    pub degenerate: bool,
    pub param_names: Vec<String>,
    pub covariance: Vec<Vec<f64>>,
}

impl LifetimeFit {
    /// r = τ_XX / τ_X with covariance, for bi fits.
    pub fn ratio(&self) -> Option<Measured> {
        let tx = self.tau_x?;
        let txx = self.tau_xx;
        let r = txx.value / tx.value;
        let idx = |n: &str| self.param_names.iter().position(|p| p == n);
        let cov = match (idx("tau_xx"), idx("tau_x")) {
            (Some(i), Some(j)) => self.covariance[i][j],
            _ => 0.0,
        };
        let var = r * r * ((txx.error / txx.value).powi(2) + (tx.error / tx.value).powi(2) - 2.0 * cov / (txx.value * tx.value));
        Some(Measured::new(r, var.max(0.0).sqrt()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Shape {
    Mono,
    Bi,
    Degenerate,
}

const A: usize = 0;
const OFF: usize = 1;
const T0: usize = 2;
const TXX: usize = 3;
const TX: usize = 4;
const SIG: usize = 5;
const NAMES: [&str; 6] = ["amplitude", "offset", "t0", "tau_xx", "tau_x", "irf_sigma"];

struct DecayModel {
    shape: Shape,
    base: [f64; 6],
    free: Vec<usize>,
}

/// M = −λ²·∂E/∂λ and its partials in (s, λ, σ).
fn degenerate_parts(s: f64, lambda: f64, sigma: f64) -> [f64; 4] {
    let e = expgauss(s, lambda, sigma);
    let g = e.gauss;
    let (g_s, g_sig) = if sigma > 0.0 {
        (-s / (sigma * sigma) * g, g * (s * s / sigma.powi(3) - 1.0 / sigma))
    } else {
        (0.0, 0.0)
    };
    let k = lambda * sigma * sigma - s;
    let e_lt = -e.value + k * e.d_t - sigma * sigma * g_s;
    let e_ll = sigma * sigma * e.value + k * e.d_lambda;
    let e_ls = 2.0 * lambda * sigma * e.value + k * e.d_sigma - 2.0 * sigma * g - sigma * sigma * g_sig;
    let l2 = lambda * lambda;
    [-l2 * e.d_lambda, -l2 * e_lt, -2.0 * lambda * e.d_lambda - l2 * e_ll, -l2 * e_ls]
}

impl DecayModel {
    fn full(&self, p: &[f64]) -> [f64; 6] {
        let mut f = self.base;
        for (i, &j) in self.free.iter().enumerate() {
            f[j] = p[i];
        }
        f
    }

    fn eval_full(&self, f: &[f64; 6], t: f64, g: &mut [f64; 6]) -> f64 {
        let s = t - f[T0];
        let sigma = f[SIG];
        g[OFF] = 1.0;
        let shape_val = match self.shape {
            Shape::Mono => {
                let tau = f[TXX];
                let e = expgauss(s, 1.0 / tau, sigma);
                g[T0] = -f[A] * e.d_t;
                g[TXX] = -f[A] * e.d_lambda / (tau * tau);
                g[TX] = 0.0;
                g[SIG] = f[A] * e.d_sigma;
                e.value
            }
            Shape::Bi => {
                let (txx, tx) = (f[TXX], f[TX]);
                let d = tx - txx;
                let ex = expgauss(s, 1.0 / tx, sigma);
                let exx = expgauss(s, 1.0 / txx, sigma);
                let m = (ex.value - exx.value) / d;
                g[T0] = -f[A] * (ex.d_t - exx.d_t) / d;
                g[TX] = f[A] * (-ex.d_lambda / (tx * tx) - m) / d;
                g[TXX] = f[A] * (exx.d_lambda / (txx * txx) + m) / d;
                g[SIG] = f[A] * (ex.d_sigma - exx.d_sigma) / d;
                m
            }
            Shape::Degenerate => {
                let tau = f[TX];
                let [m, m_s, m_l, m_sig] = degenerate_parts(s, 1.0 / tau, sigma);
                g[T0] = -f[A] * m_s;
                g[TX] = -f[A] * m_l / (tau * tau);
                g[TXX] = 0.0;
                g[SIG] = f[A] * m_sig;
                m
            }
        };
        g[A] = shape_val;
        f[A] * shape_val + f[OFF]
    }
}

impl Model for DecayModel {
    fn n_params(&self) -> usize {
        self.free.len()
    }

    fn eval(&self, p: &[f64], x: f64, grad: &mut [f64]) -> f64 {
        let f = self.full(p);
        let mut g = [0.0; 6];
        let v = self.eval_full(&f, x, &mut g);
        for (i, &j) in self.free.iter().enumerate() {
            grad[i] = g[j];
        }
        v
    }

    fn valid(&self, p: &[f64]) -> bool {
        let f = self.full(p);
        let taus_ok = match self.shape {
            Shape::Mono => f[TXX] > 0.0,
            Shape::Degenerate => f[TX] > 0.0,
            Shape::Bi => f[TXX] > 0.0 && f[TX] > 0.0 && (f[TX] - f[TXX]).abs() > 1e-9 * f[TX],
        };
        taus_ok && f[SIG] >= 0.0 && f[A] > 0.0
    }
}

/// Centre and Gaussian σ of an IRF.
pub fn irf_moments(irf: &Irf) -> Result<(Option<f64>, f64), FitError> {
    match irf {
        Irf::Gaussian { fwhm } => {
            if !(*fwhm >= 0.0) {
                return Err(FitError::Input("IRF FWHM must be non-negative".into()));
            }
            Ok((None, fwhm_to_sigma(*fwhm)))
        }
        Irf::Histogram(h) => {
            let (imax, &cmax) = h
                .counts
                .iter()
                .enumerate()
                .max_by_key(|(_, c)| **c)
                .ok_or_else(|| FitError::Input("empty IRF histogram".into()))?;
            if cmax == 0 {
                return Err(FitError::Input("IRF histogram has no counts".into()));
            }
            let mut sorted = h.counts.clone();
            sorted.sort_unstable();
            let base = sorted[sorted.len() / 2] as f64;
            // rough half width from the half-maximum crossings
            let half = (cmax as f64 + base) / 2.0;
            let lo = (0..imax).rev().find(|&i| (h.counts[i] as f64) < half).unwrap_or(0);
            let hi = (imax..h.len()).find(|&i| (h.counts[i] as f64) < half).unwrap_or(h.len() - 1);
            let fwhm_bins = (hi - lo).max(2);
            let a = imax.saturating_sub(4 * fwhm_bins);
            let b = (imax + 4 * fwhm_bins + 1).min(h.len());
            let (mut w, mut m1, mut m2) = (0.0, 0.0, 0.0);
            for i in a..b {
                let c = (h.counts[i] as f64 - base).max(0.0);
                let x = h.bin_center(i) as f64;
                w += c;
                m1 += c * x;
                m2 += c * x * x;
            }
            let mean = m1 / w;
            let bw = h.bin_width as f64;
            // Sheppard's correction for binning
            let var = m2 / w - mean * mean - bw * bw / 12.0;
            Ok((Some(mean), var.max(0.0).sqrt()))
        }
    }
}

struct Data {
    x: Vec<f64>,
    y: Vec<f64>,
    sigma: Vec<f64>,
    bin_width: f64,
}

fn extract(hist: &CoincidenceHistogram, opts: &LifetimeOptions) -> Result<Data, FitError> {
    let imax = hist
        .counts
        .iter()
        .enumerate()
        .max_by_key(|(_, c)| **c)
        .map(|(i, _)| i)
        .ok_or_else(|| FitError::Input("empty histogram".into()))?;
    let peak = hist.bin_center(imax);
    let (lo, hi) = opts.range.unwrap_or((peak - 2_000, peak + 10_000));
    let mut d = Data { x: vec![], y: vec![], sigma: vec![], bin_width: hist.bin_width as f64 };
    for (i, &c) in hist.counts.iter().enumerate() {
        let t = hist.bin_center(i);
        if t >= lo && t < hi && c >= opts.count_floor {
            d.x.push(t as f64);
            d.y.push(c as f64);
            d.sigma.push((c.max(1) as f64).sqrt());
        }
    }
    if d.x.len() < 10 {
        return Err(FitError::Input(format!("only {} bins in the fit range", d.x.len())));
    }
    if d.y.iter().sum::<f64>() <= 0.0 {
        return Err(FitError::Input("no counts in the fit range".into()));
    }
    Ok(d)
}

/// Rough start values: (offset, t0, tail mean, area above offset).
fn initial_guess(d: &Data, irf_center: Option<f64>) -> (f64, f64, f64, f64) {
    let n = d.x.len();
    let mut early: Vec<f64> = d.y[..(n / 10).max(1)].to_vec();
    early.sort_by(f64::total_cmp);
    let mut late: Vec<f64> = d.y[n - (n / 10).max(1)..].to_vec();
    late.sort_by(f64::total_cmp);
    let offset = early[early.len() / 2].min(late[late.len() / 2]);
    let imax = (0..n).max_by(|&a, &b| d.y[a].total_cmp(&d.y[b])).unwrap();
    let half = offset + (d.y[imax] - offset) / 2.0;
    let rise = (0..=imax).find(|&i| d.y[i] >= half).unwrap_or(imax);
    // half a bin early so that the rise bin counts as after the onset
    let t0 = irf_center.unwrap_or(d.x[rise] - d.bin_width / 2.0);
    let (mut w, mut m) = (0.0, 0.0);
    for i in imax..n {
        let c = (d.y[i] - offset).max(0.0);
        w += c;
        m += c * (d.x[i] - d.x[imax]);
    }
    let tail = if w > 0.0 { (m / w).max(d.bin_width) } else { 100.0 };
    let area = d.y.iter().map(|y| (y - offset).max(0.0)).sum::<f64>();
    (offset, t0, tail, area)
}

/// Model variance floor for Poisson weights, counts.
const POISSON_FLOOR: f64 = 1e-2;

fn run(
    shape: Shape,
    base: [f64; 6],
    free: Vec<usize>,
    d: &Data,
    weighting: Weighting,
    lm: &LmOptions,
) -> Result<(DecayModel, LmResult), FitError> {
    let model = DecayModel { shape, base, free };
    let p0: Vec<f64> = model.free.iter().map(|&j| base[j]).collect();
    let mut res = levenberg_marquardt(&model, &d.x, &d.y, &d.sigma, &p0, lm)?;
    if weighting == Weighting::Poisson {
        // σᵢ² = mᵢ(p) from the previous pass; the fixed point is the Poisson
        // maximum-likelihood estimate
        let mut grad = vec![0.0; model.free.len()];
        for _ in 0..20 {
            let sigma: Vec<f64> =
                d.x.iter().map(|&x| model.eval(&res.params, x, &mut grad).max(POISSON_FLOOR).sqrt()).collect();
            let next = levenberg_marquardt(&model, &d.x, &d.y, &sigma, &res.params, lm)?;
            let moved = next.params.iter().zip(&res.params).any(|(a, b)| (a - b).abs() > 1e-9 * b.abs().max(1e-9));
            res = next;
            if !moved {
                break;
            }
        }
    }
    Ok((model, res))
}

fn report(model: &DecayModel, res: &LmResult, sigma_fixed: bool, tau_xx_fixed: Option<Measured>) -> LifetimeFit {
    let f = model.full(&res.params);
    let get = |j: usize| match model.free.iter().position(|&k| k == j) {
        Some(i) => Measured::new(res.params[i], res.error(i)),
        None => Measured::exact(f[j]),
    };
    let sig = get(SIG);
    let irf_fwhm = if sigma_fixed {
        Measured::exact(sigma_to_fwhm(f[SIG]))
    } else {
        Measured::new(sigma_to_fwhm(sig.value), sigma_to_fwhm(sig.error))
    };
    let (tau_xx, tau_x) = match model.shape {
        Shape::Mono => (get(TXX), None),
        Shape::Bi => (tau_xx_fixed.unwrap_or_else(|| get(TXX)), Some(get(TX))),
        Shape::Degenerate => (get(TX), Some(get(TX))),
    };
    let names = model.free.iter().map(|&j| NAMES[j].to_string()).collect();
    let cov = (0..model.free.len())
        .map(|i| (0..model.free.len()).map(|j| res.covariance[(i, j)]).collect())
        .collect();
    LifetimeFit {
        tau_xx,
        tau_x,
        amplitude: get(A),
        offset: get(OFF),
        t0: get(T0),
        irf_fwhm,
        chi2_red: res.chi2_red(),
        iterations: res.iterations,
        degenerate: model.shape == Shape::Degenerate,
        param_names: names,
        covariance: cov,
    }
}

/// With a delta IRF the onset t₀ trades off exactly against the amplitude,
/// so it is held at its start value.
fn free_params(shape: Shape, mode: IrfMode, fix_txx: bool, delta_irf: bool) -> Vec<usize> {
    let mut free = vec![A, OFF];
    if !delta_irf {
        free.push(T0);
    }
    match shape {
        Shape::Mono => free.push(TXX),
        Shape::Bi => {
            if !fix_txx {
                free.push(TXX);
            }
            free.push(TX);
        }
        Shape::Degenerate => free.push(TX),
    }
    if mode == IrfMode::Floating {
        free.push(SIG);
    }
    free
}

/// Mono-exponential decay convolved with the IRF, plus a constant offset.
pub fn fit_lifetime_mono(hist: &CoincidenceHistogram, opts: &LifetimeOptions) -> Result<LifetimeFit, FitError> {
    let (center, sigma) = irf_moments(&opts.irf)?;
    let d = extract(hist, opts)?;
    let (offset, t0, tail, area) = initial_guess(&d, center);
    let base = [area * d.bin_width / tail, offset, t0, tail, tail, sigma];
    let floating = opts.irf_mode == IrfMode::Floating && sigma > 0.0;
    let mode = if floating { IrfMode::Floating } else { IrfMode::Fixed };
    let (model, res) = run(Shape::Mono, base, free_params(Shape::Mono, mode, false, sigma == 0.0), &d, opts.weighting, &opts.lm)?;
    Ok(report(&model, &res, !floating, None))
}

/// Relative lifetime separation below which the bi fit is replaced by the
/// degenerate limit form.
pub const DEGENERATE_REL: f64 = 1e-3;

/// Cascade decay of the second photon: rise with τ_XX, decay with τ_X.
///
/// The model is symmetric in (τ_XX, τ_X); the labels follow the start values
/// (τ_XX below τ_X), or pin τ_XX through [`LifetimeOptions::tau_xx`].
pub fn fit_lifetime_bi(hist: &CoincidenceHistogram, opts: &LifetimeOptions) -> Result<LifetimeFit, FitError> {
    let (center, sigma) = irf_moments(&opts.irf)?;
    let d = extract(hist, opts)?;
    let (offset, t0, tail, area) = initial_guess(&d, center);
    let floating = opts.irf_mode == IrfMode::Floating && sigma > 0.0;
    let mode = if floating { IrfMode::Floating } else { IrfMode::Fixed };
    let fixed = opts.tau_xx;
    if let Some(t) = fixed {
        if !(t.value > 0.0) {
            return Err(FitError::Input("fixed tau_xx must be positive".into()));
        }
    }
    // the tail mean of the X histogram is ≈ τ_X + τ_XX
    let txx0 = fixed.map(|t| t.value).unwrap_or(0.35 * tail);
    let tx0 = (tail - txx0).max(1.2 * txx0);
    let base = [area * d.bin_width, offset, t0, txx0, tx0, sigma];

    let free = free_params(Shape::Bi, mode, fixed.is_some(), sigma == 0.0);
    let probe = DecayModel { shape: Shape::Bi, base, free: free.clone() };
    let near_degenerate = |p: &[f64], slack: f64| {
        let f = probe.full(p);
        (f[TX] - f[TXX]).abs() < slack * DEGENERATE_REL * f[TX]
    };
    let degenerate = || {
        let base = [area * d.bin_width, offset, t0, tail / 2.0, tail / 2.0, sigma];
        let free = free_params(Shape::Degenerate, mode, false, sigma == 0.0);
        let (m, r) = run(Shape::Degenerate, base, free, &d, opts.weighting, &opts.lm)?;
        Ok(report(&m, &r, !floating, None))
    };
    match run(Shape::Bi, base, free, &d, opts.weighting, &opts.lm) {
        Ok((m, r)) if fixed.is_some() || !near_degenerate(&r.params, 1.0) => Ok(report(&m, &r, !floating, fixed)),
        Ok(_) | Err(FitError::Singular(_)) if fixed.is_none() => degenerate(),
        Err(FitError::NonConvergence { params, .. }) if fixed.is_none() && near_degenerate(&params, 10.0) => degenerate(),
        Ok((m, r)) => Ok(report(&m, &r, !floating, fixed)),
        Err(e) => Err(e),
    }
}

/// Expected counts per bin of the mono model (for synthetic data and plots).
pub fn mono_curve(t: f64, amplitude: f64, tau: f64, t0: f64, irf_sigma: f64, offset: f64) -> f64 {
    amplitude * expgauss(t - t0, 1.0 / tau, irf_sigma).value + offset
}

/// Expected counts per bin of the bi model (or the degenerate limit if τ_XX = τ_X).
pub fn bi_curve(t: f64, amplitude: f64, tau_xx: f64, tau_x: f64, t0: f64, irf_sigma: f64, offset: f64) -> f64 {
    let shape = if (tau_x - tau_xx).abs() < 1e-9 * tau_x {
        degenerate_parts(t - t0, 1.0 / tau_x, irf_sigma)[0]
    } else {
        (expgauss(t - t0, 1.0 / tau_x, irf_sigma).value - expgauss(t - t0, 1.0 / tau_xx, irf_sigma).value) / (tau_x - tau_xx)
    };
    amplitude * shape + offset
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    fn histogram(f: impl Fn(f64) -> f64, bw: u64, hw: u64, seed: Option<u64>) -> CoincidenceHistogram {
        let mut h = CoincidenceHistogram::symmetric(bw, hw).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
        for i in 0..h.len() {
            let mu = f(h.bin_center(i) as f64);
            h.counts[i] = match seed {
                Some(_) if mu > 0.0 => Poisson::new(mu).unwrap().sample(&mut rng) as u64,
                _ => mu.round() as u64,
            };
        }
        h.total_pairs = h.counts.iter().sum();
        h
    }

    #[test]
    fn degenerate_partials_match_finite_differences() {
        for &(s, l, sg) in &[(20.0, 1.0 / 150.0, 9.0), (-5.0, 0.01, 12.0), (400.0, 1.0 / 300.0, 4.0)] {
            let [_, ds, dl, dsg] = degenerate_parts(s, l, sg);
            let f = |s: f64, l: f64, sg: f64| degenerate_parts(s, l, sg)[0];
            let fd_s = (f(s + 1e-4, l, sg) - f(s - 1e-4, l, sg)) / 2e-4;
            let fd_l = (f(s, l * (1.0 + 1e-6), sg) - f(s, l * (1.0 - 1e-6), sg)) / (2e-6 * l);
            let fd_g = (f(s, l, sg + 1e-5) - f(s, l, sg - 1e-5)) / 2e-5;
            for (a, b) in [(ds, fd_s), (dl, fd_l), (dsg, fd_g)] {
                assert!((a - b).abs() <= 1e-5 * a.abs().max(b.abs()).max(1e-12), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn degenerate_is_limit_of_bi() {
        for &t in &[-10.0, 30.0, 200.0, 900.0] {
            let a = bi_curve(t, 1.0, 200.0, 200.0, 0.0, 8.0, 0.0);
            let b = bi_curve(t, 1.0, 199.99, 200.01, 0.0, 8.0, 0.0);
            assert!((a - b).abs() < 1e-6 * a.abs().max(1e-12), "{a} {b}");
        }
    }

    #[test]
    fn bi_model_gradients_match_finite_differences() {
        let model = DecayModel { shape: Shape::Bi, base: [0.0; 6], free: vec![A, OFF, T0, TXX, TX, SIG] };
        let p = [5e4, 3.0, 12.0, 133.0, 227.0, 9.0];
        for &t in &[-20.0, 15.0, 150.0, 700.0] {
            let mut g = [0.0; 6];
            model.eval(&p, t, &mut g);
            for j in 0..6 {
                let h = 1e-6 * p[j].abs();
                let (mut a, mut b) = (p, p);
                a[j] += h;
                b[j] -= h;
                let mut dummy = [0.0; 6];
                let fd = (model.eval(&a, t, &mut dummy) - model.eval(&b, t, &mut dummy)) / (2.0 * h);
                assert!((g[j] - fd).abs() <= 1e-5 * g[j].abs().max(fd.abs()).max(1e-9), "param {j} at {t}: {} vs {}", g[j], fd);
            }
        }
    }

    #[test]
    fn delta_irf_matches_plain_exponential() {
        let h = histogram(|t| mono_curve(t, 1e8, 161.0, 0.0, 0.0, 0.0), 4, 4000, None);
        let mut opts = LifetimeOptions::new(Irf::Gaussian { fwhm: 0.0 });
        opts.range = Some((4, 3000));
        let fit = fit_lifetime_mono(&h, &opts).unwrap();
        // log-linear regression of the same noiseless points
        let pts: Vec<(f64, f64)> = (0..h.len())
            .filter(|&i| h.bin_center(i) >= 4 && h.bin_center(i) < 3000 && h.counts[i] > 0)
            .map(|i| (h.bin_center(i) as f64, (h.counts[i] as f64).ln()))
            .collect();
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mx, my) = (sx / n, sy / n);
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((fit.tau_xx.value - 161.0).abs() < 0.5, "{:?}", fit);
        assert!((fit.tau_xx.value + 1.0 / slope).abs() < 1.0);
    }

    #[test]
    fn noiseless_mono_recovery_fixed_and_floating() {
        let sigma = fwhm_to_sigma(21.0);
        let h = histogram(|t| mono_curve(t, 2e4, 133.0, 37.0, sigma, 5.0), 4, 6000, None);
        for mode in [IrfMode::Fixed, IrfMode::Floating] {
            let mut opts = LifetimeOptions::new(Irf::Gaussian { fwhm: 21.0 });
            opts.irf_mode = mode;
            let fit = fit_lifetime_mono(&h, &opts).unwrap();
            assert!((fit.tau_xx.value - 133.0).abs() < 0.2, "{mode:?} {}", fit.tau_xx.value);
            assert!((fit.t0.value - 37.0).abs() < 0.5);
        }
    }

    #[test]
    fn noisy_bi_recovery() {
        let sigma = fwhm_to_sigma(21.0);
        // ≈ 10⁶ counts
        let h = histogram(|t| bi_curve(t, 4e6, 133.0, 227.0, 0.0, sigma, 0.5), 4, 6000, Some(11));
        let fit = fit_lifetime_bi(&h, &LifetimeOptions::new(Irf::Gaussian { fwhm: 21.0 })).unwrap();
        let tx = fit.tau_x.unwrap();
        assert!(!fit.degenerate);
        assert!((fit.tau_xx.value / 133.0 - 1.0).abs() < 0.03, "{}", fit.tau_xx);
        assert!((tx.value / 227.0 - 1.0).abs() < 0.03, "{tx}");
        assert!(fit.chi2_red < 1.3, "{}", fit.chi2_red);
        let r = fit.ratio().unwrap();
        assert!((r.value - 133.0 / 227.0).abs() < 3.0 * r.error + 1e-3);
    }

    #[test]
    fn equal_lifetimes_reported_degenerate() {
        let sigma = fwhm_to_sigma(21.0);
        let h = histogram(|t| bi_curve(t, 4e6, 200.0, 200.0, 0.0, sigma, 0.0), 4, 6000, None);
        let fit = fit_lifetime_bi(&h, &LifetimeOptions::new(Irf::Gaussian { fwhm: 21.0 })).unwrap();
        assert!(fit.degenerate);
        assert!((fit.tau_x.unwrap().value - 200.0).abs() < 0.5);
    }

    #[test]
    fn fast_rise_reduces_to_mono() {
        let sigma = fwhm_to_sigma(21.0);
        let h = histogram(|t| bi_curve(t, 4e6, 1.0, 300.0, 0.0, sigma, 0.0), 4, 6000, None);
        let bi = fit_lifetime_bi(&h, &LifetimeOptions::new(Irf::Gaussian { fwhm: 21.0 })).unwrap();
        let mono = fit_lifetime_mono(&h, &LifetimeOptions::new(Irf::Gaussian { fwhm: 21.0 })).unwrap();
        assert!((bi.tau_x.unwrap().value - mono.tau_xx.value).abs() < 1.5, "{:?} {}", bi.tau_x, mono.tau_xx);
    }

    #[test]
    fn fixed_tau_xx_constraint() {
        let sigma = fwhm_to_sigma(21.0);
        let h = histogram(|t| bi_curve(t, 4e6, 133.0, 227.0, 0.0, sigma, 0.0), 4, 6000, None);
        let mut opts = LifetimeOptions::new(Irf::Gaussian { fwhm: 21.0 });
        opts.tau_xx = Some(Measured::new(133.0, 3.0));
        let fit = fit_lifetime_bi(&h, &opts).unwrap();
        assert_eq!(fit.tau_xx, Measured::new(133.0, 3.0));
        assert!((fit.tau_x.unwrap().value - 227.0).abs() < 0.3);
        assert!(!fit.param_names.contains(&"tau_xx".to_string()));
    }

    #[test]
    fn irf_histogram_moments() {
        let sigma = fwhm_to_sigma(21.0);
        let h = histogram(|t| 1e5 * (-(t - 40.0).powi(2) / (2.0 * sigma * sigma)).exp(), 2, 1000, None);
        let (c, s) = irf_moments(&Irf::Histogram(h)).unwrap();
        assert!((c.unwrap() - 40.0).abs() < 0.05);
        assert!((sigma_to_fwhm(s) - 21.0).abs() < 0.1, "{}", sigma_to_fwhm(s));
    }

    #[test]
    fn empty_histogram_is_error() {
        let h = CoincidenceHistogram::symmetric(4, 4000).unwrap();
        assert!(fit_lifetime_mono(&h, &LifetimeOptions::new(Irf::Gaussian { fwhm: 21.0 })).is_err());
    }
}
