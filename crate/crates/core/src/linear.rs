//! Single-mode evolution under `e^{(t/ε²) B_ε(s)}` and `e^{tD}`, and the
//! fluid-approximation errors built from them.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{KineticField, NEUTRALITY_TOL};
use crate::hermite::{HermiteBasis, VelocityCoeffs};
use crate::linalg::expm_scaled;
use crate::symbol::{assemble_b, WeightedInner};
use crate::Complex;

/// `e^{(t/ε²) B_ε(s)}` as a dense matrix.
pub fn semigroup_matrix(s: f64, eps: f64, t: f64, basis: HermiteBasis) -> Result<DMatrix<Complex>> {
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("time must be nonnegative, got {t}")));
    }
    if !(eps > 0.0) {
        return Err(Error::Precondition("the semigroup needs eps > 0".into()));
    }
    let b = assemble_b(s, eps, basis)?;
    Ok(expm_scaled(&b.entries, t / (eps * eps)))
}

/// Propagators keyed on `(s, ε, t)`. Reads take a shared lock; a miss
/// computes outside the lock and inserts.
#[derive(Debug, Default)]
pub struct SemigroupCache {
    entries: RwLock<HashMap<(u64, u64, u64, usize), Arc<DMatrix<Complex>>>>,
}

impl SemigroupCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, s: f64, eps: f64, t: f64, basis: HermiteBasis) -> Result<Arc<DMatrix<Complex>>> {
        let key = (s.to_bits(), eps.to_bits(), t.to_bits(), basis.n_modes());
        if let Some(hit) = self.entries.read().expect("cache lock poisoned").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let m = Arc::new(semigroup_matrix(s, eps, t, basis)?);
        self.entries
            .write()
            .expect("cache lock poisoned")
            .insert(key, Arc::clone(&m));
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One Fourier mode of the linearized kinetic problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    pub f: VelocityCoeffs,
    pub s: f64,
    pub eps: f64,
    pub t: f64,
}

impl ModeState {
    pub fn new(f: VelocityCoeffs, s: f64, eps: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::NonPositiveWavenumber(s));
        }
        Ok(Self { f, s, eps, t: 0.0 })
    }

    pub fn advanced(&self, dt: f64, cache: &SemigroupCache) -> Result<Self> {
        Ok(Self {
            f: evolve_mode_cached(self, dt, cache)?,
            s: self.s,
            eps: self.eps,
            t: self.t + dt,
        })
    }
}

/// `e^{(t/ε²) B} f` for the state's profile.
pub fn evolve_mode(state: &ModeState, t: f64) -> Result<VelocityCoeffs> {
    let m = semigroup_matrix(state.s, state.eps, t, state.f.basis())?;
    Ok(VelocityCoeffs::from_dvector(&m * state.f.as_dvector()))
}

pub fn evolve_mode_cached(state: &ModeState, t: f64, cache: &SemigroupCache) -> Result<VelocityCoeffs> {
    let m = cache.get(state.s, state.eps, t, state.f.basis())?;
    Ok(VelocityCoeffs::from_dvector(m.as_ref() * state.f.as_dvector()))
}

/// `e^{-(1+s²)t} n̂₀`: the linearized drift-diffusion symbol is `-(1+s²)`.
pub fn evolve_ddp_mode(n0_hat: Complex, s: f64, t: f64) -> Complex {
    n0_hat * (-(1.0 + s * s) * t).exp()
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Precondition("time grid must be nonnegative".into()));
    }
    Ok(())
}

/// `‖e^{(t/ε²)B} f₀ - e^{tD} n₀ φ₀‖_s` on `t_grid`, with `n₀ = f₀[0]`.
pub fn first_order_error(f0: &VelocityCoeffs, s: f64, eps: f64, t_grid: &[f64]) -> Result<Vec<f64>> {
    check_grid(t_grid)?;
    let state = ModeState::new(f0.clone(), s, eps)?;
    let w = WeightedInner::new(s)?;
    let basis = f0.basis();
    t_grid
        .iter()
        .map(|&t| {
            let kinetic = evolve_mode(&state, t)?;
            let fluid = VelocityCoeffs::unit(basis, 0).scale(evolve_ddp_mode(f0.density(), s, t));
            Ok(w.norm(&kinetic.sub(&fluid)))
        })
        .collect()
}

/// [`first_order_error`] for macroscopic data `n̂₀ φ₀`.
pub fn first_order_error_well_prepared(
    n0_hat: Complex,
    s: f64,
    eps: f64,
    t_grid: &[f64],
    basis: HermiteBasis,
) -> Result<Vec<f64>> {
    first_order_error(&VelocityCoeffs::unit(basis, 0).scale(n0_hat), s, eps, t_grid)
}

/// `‖ε⁻¹ e^{(t/ε²)B} f₀ + e^{tD}(i s m₀) φ₀‖_s` for `P₀f₀ = 0`, with `m₀ = f₀[1]`.
pub fn second_order_error(f0: &VelocityCoeffs, s: f64, eps: f64, t_grid: &[f64]) -> Result<Vec<f64>> {
    if f0.density().norm() != 0.0 {
        return Err(Error::Precondition(
            "second order comparison needs P0 f0 = 0".into(),
        ));
    }
    check_grid(t_grid)?;
    let state = ModeState::new(f0.clone(), s, eps)?;
    let w = WeightedInner::new(s)?;
    let basis = f0.basis();
    let div_m0 = Complex::new(0.0, s) * f0.momentum();
    t_grid
        .iter()
        .map(|&t| {
            let kinetic = evolve_mode(&state, t)?.scale(Complex::new(1.0 / eps, 0.0));
            let fluid = VelocityCoeffs::unit(basis, 0).scale(evolve_ddp_mode(div_m0, s, t));
            Ok(w.norm(&kinetic.add(&fluid)))
        })
        .collect()
}

/// Sobolev index of the `H^k_P` norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HkPWeight {
    pub k: u32,
}

impl HkPWeight {
    pub fn at(&self, xi: f64) -> f64 {
        (1.0 + xi * xi).powi(self.k as i32)
    }
}

/// `Σ_j (1+ξ_j²)^k (‖f̂_j‖² + ξ_j⁻²|f̂_j[0]|²)`, the zero mode contributing
/// `‖f̂_0‖²` and required to carry no net charge.
pub fn hkp_norm_sq(field: &KineticField, k: u32) -> Result<f64> {
    let charge = field.net_charge();
    if charge > NEUTRALITY_TOL {
        return Err(Error::NonNeutral(charge));
    }
    let weight = HkPWeight { k };
    let grid = field.grid();
    Ok(field
        .modes()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let xi = grid.wavenumber(i);
            let poisson = if xi == 0.0 {
                0.0
            } else {
                m.density().norm_sqr() / (xi * xi)
            };
            weight.at(xi) * (m.norm_sq() + poisson)
        })
        .sum())
}

pub fn hkp_norm(field: &KineticField, k: u32) -> Result<f64> {
    Ok(hkp_norm_sq(field, k)?.sqrt())
}
