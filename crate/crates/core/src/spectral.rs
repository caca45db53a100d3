//! The fluid eigenvalue of `B_ε(s)` and the rank-one fluid part of its semigroup.
//!
//! Write an eigenvector as `e = C₀φ₀ + e_⊥`. The microscopic equation gives
//! `e_⊥ = iε(s + 1/s) C₀ R(λ, εs) φ₁` with the restricted resolvent
//! `R(λ, s') = (L - λP₁ - is'P₁vP₁)⁻¹`, and the density equation then says
//! `λ = ε²(1+s²) R₁₁(λ, εs)`. Putting `λ = ε²z` turns this into the fixed point
//!
//! ```text
//! z = (1+s²) R₁₁(ε²z, εs),     R₁₁ = (R φ₁, φ₁),
//! ```
//!
//! which contracts for small `ε(1+s)` and starts from `z(s,0) = -(1+s²)`.
//! The same construction is exact on the truncated chain, so the eigenpair
//! it produces is an eigenpair of the truncated matrix to round-off.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{HermiteBasis, VelocityCoeffs};
use crate::linalg;
use crate::linear::semigroup_matrix;
use crate::symbol::{assemble_b, assemble_resolve, WeightedInner, DEFAULT_FLUID_THRESHOLD};
use crate::Complex;

/// Iteration control for the dispersion fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    pub max_iters: usize,
    pub tol: f64,
    /// Starting value; `None` means `-(1+s²)`.
    pub initial_z: Option<Complex>,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-14,
            initial_z: None,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::Config(format!(
                "fixed point needs tol > 0 and max_iters >= 1, got tol={} max_iters={}",
                self.tol, self.max_iters
            )));
        }
        Ok(())
    }
}

/// Everything the fluid computations need besides `(s, ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidSettings {
    pub basis: HermiteBasis,
    /// Fluid branch exists for `ε(1+s) ≤ fluid_threshold`.
    pub fluid_threshold: f64,
    pub fixed_point: FixedPointConfig,
}

impl FluidSettings {
    pub fn new(basis: HermiteBasis) -> Self {
        Self {
            basis,
            fluid_threshold: DEFAULT_FLUID_THRESHOLD,
            fixed_point: FixedPointConfig::default(),
        }
    }

    pub fn has_fluid_branch(&self, s: f64, eps: f64) -> bool {
        eps * (1.0 + s) <= self.fluid_threshold
    }
}

/// `R(λ, s') φ₁` as a vector over modes `1..N` (entry `k` is mode `k+1`).
pub fn resolvent_apply(lambda: Complex, s_prime: f64, basis: HermiteBasis) -> Result<DVector<Complex>> {
    if !(lambda.re > -1.0) {
        return Err(Error::OutsideResolventRegion(lambda.re));
    }
    let a = assemble_resolve(lambda, s_prime, basis);
    let mut rhs = DVector::zeros(a.dim());
    rhs[0] = Complex::new(1.0, 0.0);
    linalg::solve(&a.entries, &rhs).ok_or(Error::SingularResolvent {
        re: lambda.re,
        im: lambda.im,
    })
}

/// `R₁₁(λ, s') = (R(λ,s') φ₁, φ₁)`. Note `R₁₁(0, 0) = -1` because `Lφ₁ = -φ₁`.
pub fn resolvent_r11(lambda: Complex, s_prime: f64, basis: HermiteBasis) -> Result<Complex> {
    Ok(resolvent_apply(lambda, s_prime, basis)?[0])
}

/// Result of the dispersion fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionSolution {
    pub z: Complex,
    pub iterations: usize,
    /// `|D₀(z, s, ε)|`.
    pub residual: f64,
}

fn check_point(s: f64, eps: f64, settings: &FluidSettings) -> Result<()> {
    if !(s > 0.0) {
        return Err(Error::NonPositiveWavenumber(s));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::EpsilonOutOfRange(eps));
    }
    if !settings.has_fluid_branch(s, eps) {
        return Err(Error::NoFluidBranch {
            value: eps * (1.0 + s),
            threshold: settings.fluid_threshold,
        });
    }
    Ok(())
}

/// Picard iteration `z ← (1+s²) R₁₁(ε²z, εs)`.
pub fn solve_dispersion(s: f64, eps: f64, settings: &FluidSettings) -> Result<DispersionSolution> {
    check_point(s, eps, settings)?;
    let cfg = settings.fixed_point;
    cfg.validate()?;
    let weight = 1.0 + s * s;
    let map = |z: Complex| -> Result<Complex> {
        Ok(resolvent_r11(z * (eps * eps), eps * s, settings.basis)? * weight)
    };
    let mut z = cfg.initial_z.unwrap_or(Complex::new(-weight, 0.0));
    let mut step = f64::INFINITY;
    for iter in 1..=cfg.max_iters {
        let next = map(z)?;
        step = (next - z).norm();
        z = next;
        if step < cfg.tol * weight {
            let residual = (z - map(z)?).norm();
            return Ok(DispersionSolution {
                z,
                iterations: iter,
                residual,
            });
        }
    }
    Err(Error::FixedPointDiverged {
        iters: cfg.max_iters,
        last_step: step,
    })
}

/// Fluid eigenvalue, its normalized eigenvector and normalization coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidEigenpair {
    pub s: f64,
    pub eps: f64,
    pub z: Complex,
    /// `λ₀ = ε² z`.
    pub lambda0: Complex,
    pub psi0: VelocityCoeffs,
    pub a0: Complex,
    /// `‖Bψ₀ - λ₀ψ₀‖_s`.
    pub residual: f64,
}

impl FluidEigenpair {
    /// Rank-one spectral projection `(f, ψ̄₀)_s ψ₀`.
    pub fn project(&self, f: &VelocityCoeffs) -> VelocityCoeffs {
        let w = WeightedInner { s: self.s };
        self.psi0.scale(w.pair(f, &self.psi0))
    }
}

/// Builds the eigenvector from the fixed point and normalizes it so that
/// `(ψ₀, ψ̄₀)_s = 1`.
pub fn leading_eigenpair(s: f64, eps: f64, settings: &FluidSettings) -> Result<FluidEigenpair> {
    let disp = solve_dispersion(s, eps, settings)?;
    let basis = settings.basis;
    let lambda0 = disp.z * (eps * eps);
    let x = resolvent_apply(lambda0, eps * s, basis)?;
    let weight = 1.0 + s * s;

    // With a₀ = s b₀ the coefficient a₀(s + 1/s) becomes b₀(1+s²), which
    // stays well conditioned as s → 0.
    let sum_sq: Complex = x.iter().map(|c| c * c).sum();
    let denom = (Complex::new(1.0, 0.0) - sum_sq * (eps * eps * weight)) * weight;
    let pairing_scale = denom.norm() / weight;
    if !(pairing_scale > 1e-12) || !denom.re.is_finite() {
        return Err(Error::DegeneratePairing(pairing_scale));
    }
    let mut b0 = Complex::new(1.0, 0.0) / denom.sqrt();
    if b0.re < 0.0 {
        b0 = -b0;
    }
    let a0 = b0 * s;

    let n = basis.n_modes();
    let mut coeffs = vec![Complex::new(0.0, 0.0); n];
    coeffs[0] = a0;
    let micro = Complex::new(0.0, eps) * b0 * weight;
    for k in 1..n {
        coeffs[k] = micro * x[k - 1];
    }
    let psi0 = VelocityCoeffs::from_vec(basis, coeffs)?;

    let b = assemble_b(s, eps, basis)?;
    let w = WeightedInner::new(s)?;
    let residual = w.norm(&b.apply(&psi0).sub(&psi0.scale(lambda0)));
    Ok(FluidEigenpair {
        s,
        eps,
        z: disp.z,
        lambda0,
        psi0,
        a0,
        residual,
    })
}

/// Full spectrum of the truncated `B_ε(s)`, sorted by real part, descending.
pub fn direct_spectrum(s: f64, eps: f64, basis: HermiteBasis) -> Result<Vec<Complex>> {
    linalg::eigenvalues(&assemble_b(s, eps, basis)?.entries)
}

/// Number of eigenvalues with `Re λ > cut`.
pub fn count_above(spectrum: &[Complex], cut: f64) -> usize {
    spectrum.iter().filter(|z| z.re > cut).count()
}

/// `(S₁(t)f, S₂(t)f)` with `S₁(t)f = e^{λ₀t/ε²} (f, ψ̄₀)_s ψ₀` and `S₂ = S - S₁`.
///
/// Outside the fluid regime `S₁ = 0`. The remainder is evaluated as
/// `S(t)(f - P f)`, which equals `S(t)f - S₁(t)f` because the projector
/// commutes with the semigroup.
pub fn semigroup_split(
    f: &VelocityCoeffs,
    s: f64,
    eps: f64,
    t: f64,
    settings: &FluidSettings,
) -> Result<(VelocityCoeffs, VelocityCoeffs)> {
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("time must be nonnegative, got {t}")));
    }
    if !(eps > 0.0) {
        return Err(Error::Precondition("the semigroup needs eps > 0".into()));
    }
    let propagator = semigroup_matrix(s, eps, t, settings.basis)?;
    let evolve = |g: &VelocityCoeffs| VelocityCoeffs::from_dvector(&propagator * g.as_dvector());
    if !settings.has_fluid_branch(s, eps) {
        return Ok((VelocityCoeffs::zeros(f.basis()), evolve(f)));
    }
    let pair = leading_eigenpair(s, eps, settings)?;
    let projected = pair.project(f);
    let growth = (pair.lambda0 * (t / (eps * eps))).exp();
    Ok((projected.scale(growth), evolve(&f.sub(&projected))))
}

/// Decay rate `a` of the remainder, fitted as the slope of `log‖S₂f‖_s`
/// against `τ = t/ε²` over `taus`.
pub fn remainder_decay_rate(
    f: &VelocityCoeffs,
    s: f64,
    eps: f64,
    taus: &[f64],
    settings: &FluidSettings,
) -> Result<RemainderDecay> {
    let w = WeightedInner::new(s)?;
    let mut log_norms = Vec::with_capacity(taus.len());
    for &tau in taus {
        let (_, s2) = semigroup_split(f, s, eps, tau * eps * eps, settings)?;
        log_norms.push(w.norm(&s2).ln());
    }
    let (slope, intercept) = linalg::linear_fit(taus, &log_norms);
    let max_deviation = taus
        .iter()
        .zip(&log_norms)
        .map(|(t, y)| (y - (intercept + slope * t)).abs())
        .fold(0.0, f64::max);
    Ok(RemainderDecay {
        a_measured: -slope,
        log_intercept: intercept,
        max_log_deviation: max_deviation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderDecay {
    pub a_measured: f64,
    pub log_intercept: f64,
    /// Largest departure of `log‖S₂f‖` from the fitted line.
    pub max_log_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct N0BoundReport {
    pub s: f64,
    pub eps: f64,
    pub a_used: f64,
    /// `(t, ‖S₂(t)f₀‖_s / (ε(1+s) e^{-at/ε²} ‖f₀‖_s))`.
    pub ratios: Vec<(f64, f64)>,
    pub max_ratio: f64,
}

/// Measures the extra `ε(1+s)` gain of the remainder on macroscopic data.
pub fn s2_n0_bound_check(
    f0: &VelocityCoeffs,
    s: f64,
    eps: f64,
    t_grid: &[f64],
    a: f64,
    settings: &FluidSettings,
) -> Result<N0BoundReport> {
    if f0.as_slice()[1..].iter().any(|c| c.norm() > 0.0) {
        return Err(Error::Precondition("initial data must lie in the null space of L".into()));
    }
    let w = WeightedInner::new(s)?;
    let f_norm = w.norm(f0);
    let mut ratios = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let ratio = if f_norm == 0.0 {
            0.0
        } else {
            let (_, s2) = semigroup_split(f0, s, eps, t, settings)?;
            let envelope = eps * (1.0 + s) * (-a * t / (eps * eps)).exp() * f_norm;
            w.norm(&s2) / envelope
        };
        ratios.push((t, ratio));
    }
    let max_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(N0BoundReport {
        s,
        eps,
        a_used: a,
        ratios,
        max_ratio,
    })
}
