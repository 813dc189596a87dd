//! Weighted least-squares fit of damped Rabi oscillations,
//! `f(t) = C + A·sin(ωt + φ)·exp(−t/τ)`.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of free parameters of the damped sinusoid.
pub const N_PARAMS: usize = 5;

type Vec5 = SVector<f64, N_PARAMS>;
type Mat5 = SMatrix<f64, N_PARAMS, N_PARAMS>;

/// Standard errors `sqrt(p(1−p)/N)`, floored at a tenth of the `p = ½`
/// value so no point gets infinite weight.
pub fn binomial_errors(probabilities: &[f64], shots: u64) -> Result<Vec<f64>> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let n = shots as f64;
    let floor = (0.25 / n).sqrt() / 10.0;
    probabilities
        .iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameters(format!("probability {p} outside [0, 1]")));
            }
            Ok((p * (1.0 - p) / n).sqrt().max(floor))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquared {
    pub chi2: f64,
    pub dof: usize,
    /// `chi2 / dof`; infinite when `dof = 0`.
    pub ratio: f64,
}

/// `χ² = Σ ((y − f)/σ)²` with `dof = N − n_params`.
pub fn chi_squared(values: &[f64], model: &[f64], errors: &[f64], n_params: usize) -> Result<ChiSquared> {
    if values.len() != model.len() || values.len() != errors.len() {
        return Err(Error::LengthMismatch(format!(
            "{} values, {} model values, {} errors",
            values.len(),
            model.len(),
            errors.len()
        )));
    }
    if let Some(i) = errors.iter().position(|&e| !(e > 0.0)) {
        return Err(Error::ZeroErrorBar(i));
    }
    let chi2 = values
        .iter()
        .zip(model)
        .zip(errors)
        .map(|((y, f), s)| ((y - f) / s).powi(2))
        .sum();
    let dof = values.len().saturating_sub(n_params);
    let ratio = if dof == 0 { f64::INFINITY } else { chi2 / dof as f64 };
    Ok(ChiSquared { chi2, dof, ratio })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampedSinusoid {
    pub c: f64,
    pub a: f64,
    /// rad/μs.
    pub omega: f64,
    pub phi: f64,
    /// μs; infinite for an undamped oscillation.
    pub tau: f64,
}

impl DampedSinusoid {
    pub fn eval(&self, t: f64) -> f64 {
        self.c + self.a * (self.omega * t + self.phi).sin() * (-t / self.tau).exp()
    }

    /// Equivalent parameters with `A ≥ 0`, `ω ≥ 0` and `φ ∈ [0, 2π)`.
    pub fn canonical(self) -> Self {
        let mut s = self;
        if s.omega < 0.0 {
            s.omega = -s.omega;
            s.phi = PI - s.phi;
        }
        if s.a < 0.0 {
            s.a = -s.a;
            s.phi += PI;
        }
        s.phi = s.phi.rem_euclid(TAU);
        if s.phi >= TAU {
            s.phi = 0.0;
        }
        s
    }

    #[cfg(test)]
    fn to_vec(self) -> Vec5 {
        Vec5::new(self.c, self.a, self.omega, self.phi, 1.0 / self.tau)
    }

    fn from_vec(p: &Vec5) -> Self {
        Self {
            c: p[0],
            a: p[1],
            omega: p[2],
            phi: p[3],
            tau: 1.0 / p[4],
        }
    }
}

/// Fitted parameters with one-sigma standard errors and goodness of fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: DampedSinusoid,
    pub errors: DampedSinusoid,
    pub chi2: f64,
    pub dof: usize,
    pub chi2_per_dof: f64,
    pub iterations: usize,
}

/// Model value and gradient in `(C, A, ω, φ, γ = 1/τ)`.
fn model_and_gradient(p: &Vec5, t: f64) -> (f64, Vec5) {
    let (s, c) = (p[2] * t + p[3]).sin_cos();
    let e = (-p[4] * t).exp();
    let a = p[1];
    let value = p[0] + a * s * e;
    let grad = Vec5::new(1.0, s * e, a * t * c * e, a * c * e, -t * a * s * e);
    (value, grad)
}

struct Data<'a> {
    t: &'a [f64],
    y: &'a [f64],
    w: Vec<f64>,
}

impl Data<'_> {
    fn chi2(&self, p: &Vec5) -> f64 {
        self.t
            .iter()
            .zip(self.y)
            .zip(&self.w)
            .map(|((&t, &y), &w)| w * (y - model_and_gradient(p, t).0).powi(2))
            .sum()
    }

    /// `(JᵀWJ, JᵀW r, χ²)` with `r = y − f`.
    fn normal_equations(&self, p: &Vec5) -> (Mat5, Vec5, f64) {
        let mut jtj = Mat5::zeros();
        let mut jtr = Vec5::zeros();
        let mut chi2 = 0.0;
        for ((&t, &y), &w) in self.t.iter().zip(self.y).zip(&self.w) {
            let (f, g) = model_and_gradient(p, t);
            let r = y - f;
            chi2 += w * r * r;
            jtj += w * g * g.transpose();
            jtr += w * r * g;
        }
        (jtj, jtr, chi2)
    }
}

const MAX_LM_ITERATIONS: usize = 500;

/// Levenberg–Marquardt from `start`, keeping `γ ≥ 0`.
fn levenberg_marquardt(data: &Data, start: Vec5) -> Option<(Vec5, f64, usize)> {
    let mut p = start;
    p[4] = p[4].max(0.0);
    let (mut jtj, mut jtr, mut chi2) = data.normal_equations(&p);
    let mut lambda = 1e-3;
    for it in 1..=MAX_LM_ITERATIONS {
        let mut accepted = false;
        while lambda < 1e16 {
            let mut lhs = jtj;
            for i in 0..N_PARAMS {
                lhs[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = lhs.cholesky().map(|ch| ch.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p + step;
            trial[4] = trial[4].max(0.0);
            let trial_chi2 = data.chi2(&trial);
            if trial_chi2.is_finite() && trial_chi2 <= chi2 {
                let moved = (trial - p).abs().max();
                let scale = p.abs().max().max(1e-12);
                let gain = chi2 - trial_chi2;
                p = trial;
                (jtj, jtr, chi2) = data.normal_equations(&p);
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                if moved <= 1e-13 * scale || gain <= 1e-16 * chi2.max(1e-300) && moved <= 1e-9 * scale {
                    return Some((p, chi2, it));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction left at machine precision: a minimum.
            return Some((p, chi2, it));
        }
    }
    chi2.is_finite().then_some((p, chi2, MAX_LM_ITERATIONS))
}

/// Power `|Σ (y − ȳ) e^{−iωt}|²` of the data at each frequency.
pub fn periodogram(times: &[f64], values: &[f64], omegas: &[f64]) -> Vec<f64> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    omegas
        .iter()
        .map(|&w| {
            let (mut re, mut im) = (0.0, 0.0);
            for (&t, &y) in times.iter().zip(values) {
                let (s, c) = (w * t).sin_cos();
                re += (y - mean) * c;
                im -= (y - mean) * s;
            }
            re * re + im * im
        })
        .collect()
}

/// Local maxima of the periodogram over `(0, ω_max]`, strongest first.
fn frequency_candidates(times: &[f64], values: &[f64], count: usize) -> Vec<f64> {
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let span = sorted[sorted.len() - 1] - sorted[0];
    let min_gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    // Nyquist of the densest sampling, resolved 20× finer than 2π/span.
    let omega_max = PI / min_gap;
    let d_omega = TAU / span / 20.0;
    let grid: Vec<f64> = (1..=((omega_max / d_omega).ceil() as usize))
        .map(|k| k as f64 * d_omega)
        .collect();
    let power = periodogram(times, values, &grid);
    let mut peaks: Vec<(f64, f64)> = (1..grid.len().saturating_sub(1))
        .filter(|&k| power[k] >= power[k - 1] && power[k] > power[k + 1])
        .map(|k| (power[k], grid[k]))
        .collect();
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0));
    peaks.into_iter().take(count).map(|p| p.1).collect()
}

/// Linear least squares for `(C, a, b)` in `C + (a sin ωt + b cos ωt) e^{−γt}`.
fn linear_start(data: &Data, omega: f64, gamma: f64) -> Option<Vec5> {
    let mut m = Matrix3::zeros();
    let mut v = Vector3::zeros();
    for ((&t, &y), &w) in data.t.iter().zip(data.y).zip(&data.w) {
        let (s, c) = (omega * t).sin_cos();
        let e = (-gamma * t).exp();
        let row = Vector3::new(1.0, s * e, c * e);
        m += w * row * row.transpose();
        v += w * y * row;
    }
    let sol = m.lu().solve(&v)?;
    let (a, b) = (sol[1], sol[2]);
    Some(Vec5::new(sol[0], a.hypot(b), omega, b.atan2(a), gamma))
}

/// Fits `C + A·sin(ωt + φ)·exp(−t/τ)` by weighted least squares.
///
/// Starting frequencies are the strongest periodogram peaks, plus half and
/// double the strongest one; each start is refined by Levenberg–Marquardt
/// and the lowest χ² wins. Standard errors come from the unscaled inverse of
/// `JᵀWJ`, i.e. the error bars are taken as absolute.
pub fn fit_damped_sinusoid(times: &[f64], values: &[f64], errors: &[f64]) -> Result<FitResult> {
    let n = times.len();
    if values.len() != n || errors.len() != n {
        return Err(Error::LengthMismatch(format!(
            "{n} times, {} values, {} errors",
            values.len(),
            errors.len()
        )));
    }
    if n < N_PARAMS + 1 {
        return Err(Error::DegenerateDesign(format!("{n} points for {N_PARAMS} parameters")));
    }
    if let Some(i) = errors.iter().position(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::ZeroErrorBar(i));
    }
    if times.iter().chain(values).any(|x| !x.is_finite()) {
        return Err(Error::DegenerateDesign("non-finite data".into()));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::DegenerateDesign("repeated sample times".into()));
    }
    let data = Data {
        t: times,
        y: values,
        w: errors.iter().map(|e| 1.0 / (e * e)).collect(),
    };

    let mut omegas = frequency_candidates(times, values, 5);
    if let Some(&best) = omegas.first() {
        omegas.extend([0.5 * best, 2.0 * best]);
    }
    let span = sorted[n - 1] - sorted[0];
    let gammas = [0.0, 1.0 / span];

    let mut best: Option<(Vec5, f64, usize)> = None;
    for &w in &omegas {
        for &g in &gammas {
            let Some(start) = linear_start(&data, w, g) else { continue };
            if let Some(found) = levenberg_marquardt(&data, start) {
                if best.as_ref().is_none_or(|b| found.1 < b.1) {
                    best = Some(found);
                }
            }
        }
    }
    // Data with no oscillation at all: the mean is the answer.
    if best.is_none() {
        let wsum: f64 = data.w.iter().sum();
        let mean = data.w.iter().zip(values).map(|(w, y)| w * y).sum::<f64>() / wsum;
        let start = Vec5::new(mean, 0.0, omegas.first().copied().unwrap_or(1.0), 0.0, 0.0);
        best = levenberg_marquardt(&data, start);
    }
    let (p, chi2, iterations) = best.ok_or(Error::FitDidNotConverge)?;

    let (jtj, _, _) = data.normal_equations(&p);
    let cov = jtj.try_inverse();
    let sigma = |i: usize| cov.map_or(f64::NAN, |c| c[(i, i)].max(0.0).sqrt());
    let gamma = p[4];
    let params = DampedSinusoid::from_vec(&p).canonical();
    let errors = DampedSinusoid {
        c: sigma(0),
        a: sigma(1),
        omega: sigma(2),
        phi: sigma(3),
        tau: sigma(4) / (gamma * gamma),
    };
    let dof = n - N_PARAMS;
    Ok(FitResult {
        params,
        errors,
        chi2,
        dof,
        chi2_per_dof: chi2 / dof as f64,
        iterations,
    })
}

/// Fit of measured frequencies, each estimated from `shots` Bernoulli trials.
///
/// Error bars from the observed frequencies correlate with the noise itself
/// and bias the decay time upward, so the fit is repeated a few times with
/// error bars recomputed from the current model prediction
/// (iteratively reweighted least squares).
pub fn fit_binomial(times: &[f64], frequencies: &[f64], shots: u64) -> Result<FitResult> {
    const REWEIGHTS: usize = 3;
    let mut fit = fit_damped_sinusoid(times, frequencies, &binomial_errors(frequencies, shots)?)?;
    for _ in 0..REWEIGHTS {
        let predicted: Vec<f64> = times.iter().map(|&t| fit.params.eval(t).clamp(0.0, 1.0)).collect();
        fit = fit_damped_sinusoid(times, frequencies, &binomial_errors(&predicted, shots)?)?;
    }
    Ok(fit)
}

/// Two sinusoids `C + Σₖ (aₖ cos ωₖt + bₖ sin ωₖt)` fitted by least squares.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoTone {
    /// rad/μs, `omega_low < omega_high`.
    pub omega_low: f64,
    pub omega_high: f64,
    /// Sum of squared residuals.
    pub rss: f64,
}

impl TwoTone {
    /// Beat frequency `ω_high − ω_low`, rad/μs.
    pub fn beat(&self) -> f64 {
        self.omega_high - self.omega_low
    }
}

/// Residual sum of squares of the best linear combination at fixed tones.
fn two_tone_rss(times: &[f64], values: &[f64], w1: f64, w2: f64) -> f64 {
    let mut ata = Mat5::zeros();
    let mut aty = Vec5::zeros();
    let mut yy = 0.0;
    for (&t, &y) in times.iter().zip(values) {
        let (s1, c1) = (w1 * t).sin_cos();
        let (s2, c2) = (w2 * t).sin_cos();
        let row = Vec5::new(1.0, c1, s1, c2, s2);
        ata += row * row.transpose();
        aty += row * y;
        yy += y * y;
    }
    match ata.cholesky() {
        // rss = yᵀy − (Aᵀy)ᵀ x for the normal-equation solution x
        Some(ch) => (yy - aty.dot(&ch.solve(&aty))).max(0.0),
        None => f64::INFINITY,
    }
}

/// Locates the two tones inside `[lo, hi]` by an exhaustive grid over tone
/// pairs, then refines the best pair by a shrinking pattern search.
pub fn fit_two_tone(times: &[f64], values: &[f64], lo: f64, hi: f64) -> Result<TwoTone> {
    if times.len() != values.len() {
        return Err(Error::LengthMismatch(format!("{} times, {} values", times.len(), values.len())));
    }
    if times.len() < 2 * N_PARAMS {
        return Err(Error::DegenerateDesign(format!("{} points for a two-tone fit", times.len())));
    }
    if !(0.0 <= lo && lo < hi && hi.is_finite()) {
        return Err(Error::InvalidParameters(format!("tone range [{lo}, {hi}]")));
    }
    let span = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - times.iter().cloned().fold(f64::INFINITY, f64::min);
    // a quarter of the Fourier resolution
    let step = TAU / span / 4.0;
    let grid: Vec<f64> = (0..=((hi - lo) / step).ceil() as usize)
        .map(|k| (lo + k as f64 * step).min(hi))
        .collect();
    let mut best = (f64::INFINITY, lo, hi);
    for (i, &w1) in grid.iter().enumerate() {
        for &w2 in &grid[i + 1..] {
            let rss = two_tone_rss(times, values, w1, w2);
            if rss < best.0 {
                best = (rss, w1, w2);
            }
        }
    }
    if !best.0.is_finite() {
        return Err(Error::DegenerateDesign("no tone pair gives a regular design".into()));
    }
    let mut h = step;
    while h > 1e-9 * hi.max(1.0) {
        let (rss, w1, w2) = best;
        let mut moved = false;
        for (d1, d2) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
            let r = two_tone_rss(times, values, w1 + d1, w2 + d2);
            if r < rss && r < best.0 {
                best = (r, w1 + d1, w2 + d2);
                moved = true;
            }
        }
        if !moved {
            h /= 2.0;
        }
    }
    let (rss, a, b) = best;
    Ok(TwoTone {
        omega_low: a.min(b),
        omega_high: a.max(b),
        rss,
    })
}
