//! Least-squares fit of `err(t; ε) ≈ C₁ ε e^{-b t} + C₂ e^{-a t/ε²}`.
//!
//! For fixed rates the model is linear in `(C₁, C₂)`, so those are solved
//! exactly and only the rates are searched (variable projection). Residuals
//! are relative, so early layer samples and late bulk samples count alike.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observation `(ε, t, err)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub eps: f64,
    pub t: f64,
    pub err: f64,
}

/// How the bulk rate `b` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum BulkRate {
    Fixed(f64),
    Free,
}

impl Default for BulkRate {
    fn default() -> Self {
        Self::Fixed(0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub c1: f64,
    pub c2: f64,
    pub a: f64,
    pub b: f64,
    /// Root-mean-square relative misfit.
    pub residual: f64,
    pub c1_stderr: f64,
    pub c2_stderr: f64,
    /// The `a` search ended at its bracket, so `a` is not identified.
    pub a_at_bound: bool,
}

impl RateFit {
    pub fn model(&self, eps: f64, t: f64) -> f64 {
        model(self.c1, self.c2, self.a, self.b, eps, t)
    }

    /// `C₂` within two standard errors of zero.
    pub fn c2_negligible(&self) -> bool {
        self.c2.abs() <= 2.0 * self.c2_stderr || self.c2.abs() <= 1e-3 * self.c1.abs()
    }
}

fn model(c1: f64, c2: f64, a: f64, b: f64, eps: f64, t: f64) -> f64 {
    c1 * eps * (-b * t).exp() + c2 * (-a * t / (eps * eps)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub bulk_rate: BulkRate,
    /// Samples below `floor × max err` are weighted as if they sat at the floor.
    pub floor: f64,
    /// Half-width of the `ln a` search around its initial guess.
    pub log_a_halfwidth: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { bulk_rate: BulkRate::default(), floor: 1e-3, log_a_halfwidth: 4.0 }
    }
}

struct Inner {
    c1: f64,
    c2: f64,
    cost: f64,
    cov: [[f64; 2]; 2],
}

fn solve_amplitudes(samples: &[Sample], weights: &[f64], a: f64, b: f64) -> Option<Inner> {
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, w) in samples.iter().zip(weights) {
        let g1 = p.eps * (-b * p.t).exp();
        let g2 = (-a * p.t / (p.eps * p.eps)).exp();
        s11 += w * g1 * g1;
        s12 += w * g1 * g2;
        s22 += w * g2 * g2;
        r1 += w * g1 * p.err;
        r2 += w * g2 * p.err;
    }
    let det = s11 * s22 - s12 * s12;
    if !(det.abs() > 1e-300) {
        return None;
    }
    let c1 = (s22 * r1 - s12 * r2) / det;
    let c2 = (s11 * r2 - s12 * r1) / det;
    let cost = samples
        .iter()
        .zip(weights)
        .map(|(p, w)| w * (model(c1, c2, a, b, p.eps, p.t) - p.err).powi(2))
        .sum::<f64>();
    let cov = [[s22 / det, -s12 / det], [-s12 / det, s11 / det]];
    Some(Inner { c1, c2, cost, cov })
}

/// Minimize `f` on `[lo, hi]`; returns the argmin.
fn golden(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Initial `a` from the slope of `ln err` against `t/ε²` over the first
/// layer samples at the largest `ε`.
pub fn initial_layer_rate(samples: &[Sample]) -> Option<f64> {
    let eps = samples.iter().map(|p| p.eps).fold(f64::NAN, f64::max);
    let mut early: Vec<&Sample> = samples
        .iter()
        .filter(|p| p.eps == eps && p.err > 0.0 && p.t > 0.0 && p.t <= 2.0 * eps * eps)
        .collect();
    early.sort_by(|x, y| x.t.total_cmp(&y.t));
    if early.len() < 2 {
        return None;
    }
    let x: Vec<f64> = early.iter().map(|p| p.t / (eps * eps)).collect();
    let y: Vec<f64> = early.iter().map(|p| p.err.ln()).collect();
    let slope = crate::linalg::linear_fit(&x, &y).0;
    (slope < 0.0).then_some(-slope)
}

pub fn rate_fit(samples: &[Sample], options: &FitOptions) -> Result<RateFit> {
    let mut eps_values: Vec<f64> = samples.iter().map(|p| p.eps).collect();
    eps_values.sort_by(f64::total_cmp);
    eps_values.dedup();
    if eps_values.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 eps values, got {}", eps_values.len())));
    }
    if samples.iter().any(|p| !(p.err >= 0.0 && p.eps > 0.0 && p.t >= 0.0)) {
        return Err(Error::Fit("samples must have eps > 0, t >= 0 and finite err >= 0".into()));
    }
    let peak = samples.iter().map(|p| p.err).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Fit("all errors vanish".into()));
    }
    let floor = options.floor * peak;
    let weights: Vec<f64> = samples.iter().map(|p| 1.0 / p.err.max(floor).powi(2)).collect();
    let a0 = initial_layer_rate(samples).unwrap_or(1.0);
    let (lo, hi) = (a0.ln() - options.log_a_halfwidth, a0.ln() + options.log_a_halfwidth);

    let cost_at = |a: f64, b: f64| solve_amplitudes(samples, &weights, a, b).map_or(f64::INFINITY, |s| s.cost);
    let best_a = |b: f64| golden(lo, hi, |la| cost_at(la.exp(), b)).exp();
    let b = match options.bulk_rate {
        BulkRate::Fixed(b) => b,
        BulkRate::Free => golden((0.02f64).ln(), (50f64).ln(), |lb| {
            let b = lb.exp();
            cost_at(best_a(b), b)
        })
        .exp(),
    };
    let a = best_a(b);
    let inner = solve_amplitudes(samples, &weights, a, b)
        .ok_or_else(|| Error::Fit(format!("normal equations singular at a = {a:.3e}, b = {b:.3e}")))?;
    if !(inner.c1.is_finite() && inner.c2.is_finite()) {
        return Err(Error::Fit(format!(
            "non-finite amplitudes at a = {a:.3e}, b = {b:.3e}"
        )));
    }
    let n = samples.len() as f64;
    let dof = (n - 4.0).max(1.0);
    let sigma_sq = inner.cost / dof;
    let a_at_bound = (a.ln() - lo).abs() < 1e-6 || (a.ln() - hi).abs() < 1e-6;
    Ok(RateFit {
        c1: inner.c1,
        c2: inner.c2,
        a,
        b,
        residual: (inner.cost / n).sqrt(),
        c1_stderr: (sigma_sq * inner.cov[0][0]).sqrt(),
        c2_stderr: (sigma_sq * inner.cov[1][1]).sqrt(),
        a_at_bound,
    })
}

/// Layer-free profile `err ≈ C₁ ε e^{-b t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkFit {
    pub c1: f64,
    pub b: f64,
    pub residual: f64,
}

/// Fit of the layer-free profile, same weighting as [`rate_fit`].
pub fn bulk_fit(samples: &[Sample], bulk_rate: BulkRate, floor: f64) -> Result<BulkFit> {
    let peak = samples.iter().map(|p| p.err).fold(0.0, f64::max);
    if samples.len() < 2 || !(peak > 0.0) {
        return Err(Error::Fit("bulk fit needs at least two nonzero samples".into()));
    }
    let weights: Vec<f64> = samples.iter().map(|p| 1.0 / p.err.max(floor * peak).powi(2)).collect();
    let solve = |b: f64| {
        let (mut sgg, mut sgd) = (0.0, 0.0);
        for (p, w) in samples.iter().zip(&weights) {
            let g = p.eps * (-b * p.t).exp();
            sgg += w * g * g;
            sgd += w * g * p.err;
        }
        let c1 = sgd / sgg;
        let cost: f64 = samples
            .iter()
            .zip(&weights)
            .map(|(p, w)| w * (c1 * p.eps * (-b * p.t).exp() - p.err).powi(2))
            .sum();
        (c1, cost)
    };
    let b = match bulk_rate {
        BulkRate::Fixed(b) => b,
        BulkRate::Free => golden((0.02f64).ln(), (50f64).ln(), |lb| solve(lb.exp()).1).exp(),
    };
    let (c1, cost) = solve(b);
    if !c1.is_finite() {
        return Err(Error::Fit(format!("non-finite bulk amplitude at b = {b:.3e}")));
    }
    Ok(BulkFit { c1, b, residual: (cost / samples.len() as f64).sqrt() })
}
