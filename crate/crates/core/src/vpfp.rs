//! Nonlinear kinetic solver on the periodic interval.
//!
//! Each Fourier mode evolves under `ε²∂_t f̂ = B_ε(ξ) f̂ + ε Ĝ(f)`. The linear
//! part, including transport and the Poisson coupling, is integrated with the
//! exact per-mode exponential; the quadratic term is explicit (two-stage
//! Lawson scheme, second order in `dt`).

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid1d, KineticField, Pseudospectral, NEUTRALITY_TOL};
use crate::hermite::{apply_dv, apply_v, project_p1, sigma_norm_sq, HermiteBasis, VelocityCoeffs};
use crate::linalg::expm_scaled;
use crate::linear::{hkp_norm_sq, HkPWeight};
use crate::symbol::assemble_b_signed;
use crate::timeline::Stepper;
use crate::Complex;

/// `c` in the documented step bound `dt ≤ c ε / (s_max √N)`.
pub const STABILITY_CONSTANT: f64 = 4.0;

/// `∂_xΦ̂` per Fourier mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonField {
    pub grid: Grid1d,
    pub grad_phi_hat: Vec<Complex>,
}

impl PoissonField {
    pub fn l2_norm_sq(&self) -> f64 {
        self.grad_phi_hat.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Solve `∂²_xΦ = n` for `n̂_j = f̂_j[0]`: `∂_xΦ̂ = -iξ n̂ / ξ²`, zero at `ξ = 0`.
pub fn poisson_solve(field: &KineticField) -> Result<PoissonField> {
    poisson_from_density(field.grid(), &field.densities())
}

pub(crate) fn poisson_from_density(grid: Grid1d, n_hat: &[Complex]) -> Result<PoissonField> {
    let charge = n_hat[grid.index(0)].norm();
    if charge > NEUTRALITY_TOL {
        return Err(Error::NonNeutral(charge));
    }
    let grad_phi_hat = n_hat
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let xi = grid.wavenumber(i);
            if xi == 0.0 {
                Complex::new(0.0, 0.0)
            } else {
                Complex::new(0.0, -1.0 / xi) * n
            }
        })
        .collect();
    Ok(PoissonField { grid, grad_phi_hat })
}

/// `G(f) = ½ (v ∂_xΦ) f - ∂_xΦ ∂_v f`, products taken pseudospectrally.
pub fn nonlinear_g(field: &KineticField, poisson: &PoissonField, ps: &Pseudospectral) -> Result<KineticField> {
    if poisson.grid != field.grid() || ps.grid() != field.grid() {
        return Err(Error::GridMismatch("field, potential and transform grids differ".into()));
    }
    // The velocity action commutes with multiplication in x, so apply it first.
    let half = Complex::new(0.5, 0.0);
    let lifted = field.map_modes(|_, m| apply_v(m).scale(half).sub(&apply_dv(m)));
    let e_phys = ps.to_physical(&poisson.grad_phi_hat);
    let mut out = KineticField::zeros(field.grid(), field.basis());
    let slices: Vec<Vec<Complex>> = (0..field.basis().n_modes())
        .into_par_iter()
        .map(|n| ps.product_with_physical(&e_phys, &lifted.slice(n)))
        .collect();
    for (n, s) in slices.iter().enumerate() {
        out.set_slice(n, s);
    }
    Ok(out)
}

/// Kinetic energy and dissipation functionals at Sobolev index `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub energy: f64,
    pub dissipation: f64,
}

/// `E = ‖f‖²_{H^k} + ‖∂_xΦ‖²_{H^k}` and
/// `D = ε⁻²‖P₁f‖²_{H^k(σ)} + ‖P₀f‖²_{H^k} + ‖∂_xΦ‖²_{H^k}`.
pub fn energy_monitor(field: &KineticField, eps: f64, k: u32) -> Result<EnergyReport> {
    let energy = hkp_norm_sq(field, k)?;
    let w = HkPWeight { k };
    let grid = field.grid();
    let dissipation = field
        .modes()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let xi = grid.wavenumber(i);
            let n = m.density().norm_sqr();
            let field_part = if xi == 0.0 { 0.0 } else { n / (xi * xi) };
            w.at(xi) * (sigma_norm_sq(&project_p1(m)) / (eps * eps) + n + field_part)
        })
        .sum();
    Ok(EnergyReport { energy, dissipation })
}

/// Largest step allowed by the documented bound.
pub fn stability_bound(eps: f64, grid: Grid1d, basis: HermiteBasis) -> f64 {
    STABILITY_CONSTANT * eps / (grid.s_max() * (basis.n_modes() as f64).sqrt())
}

/// `min(ε²/4, ε/(4 s_max √N), 10⁻³)`.
pub fn default_dt(eps: f64, grid: Grid1d, basis: HermiteBasis) -> f64 {
    let transport = eps / (4.0 * grid.s_max() * (basis.n_modes() as f64).sqrt());
    (eps * eps / 4.0).min(transport).min(1e-3)
}

/// Steps the kinetic system at fixed `ε`.
pub struct VpfpStepper {
    eps: f64,
    grid: Grid1d,
    basis: HermiteBasis,
    ps: Pseudospectral,
    nonlinear: bool,
    generators: Vec<DMatrix<Complex>>,
    factors: Vec<(u64, Arc<Vec<DMatrix<Complex>>>)>,
}

impl std::fmt::Debug for VpfpStepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VpfpStepper")
            .field("eps", &self.eps)
            .field("grid", &self.grid)
            .field("n_hermite", &self.basis.n_modes())
            .field("nonlinear", &self.nonlinear)
            .finish_non_exhaustive()
    }
}

const FACTOR_CACHE: usize = 6;

impl VpfpStepper {
    pub fn new(grid: Grid1d, basis: HermiteBasis, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::EpsilonOutOfRange(eps));
        }
        let inv = Complex::new(1.0 / (eps * eps), 0.0);
        let generators = (0..grid.n_modes())
            .map(|i| {
                let xi = grid.wavenumber(i);
                if xi == 0.0 {
                    // No transport and no field at the mean mode.
                    Ok(basis.l_matrix().map(|x| Complex::new(x, 0.0)) * inv)
                } else {
                    Ok(assemble_b_signed(xi, eps, basis)?.entries * inv)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            eps,
            grid,
            basis,
            ps: Pseudospectral::new(grid),
            nonlinear: true,
            generators,
            factors: Vec::new(),
        })
    }

    /// Drop the quadratic term; the step is then the exact linear flow.
    pub fn linear_only(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn grid(&self) -> Grid1d {
        self.grid
    }

    pub fn basis(&self) -> HermiteBasis {
        self.basis
    }

    pub fn pseudospectral(&self) -> &Pseudospectral {
        &self.ps
    }

    fn factors(&mut self, dt: f64) -> Arc<Vec<DMatrix<Complex>>> {
        let key = dt.to_bits();
        if let Some((_, hit)) = self.factors.iter().find(|(k, _)| *k == key) {
            return Arc::clone(hit);
        }
        let mats: Vec<DMatrix<Complex>> = self.generators.par_iter().map(|a| expm_scaled(a, dt)).collect();
        let mats = Arc::new(mats);
        if self.factors.len() >= FACTOR_CACHE {
            self.factors.remove(0);
        }
        self.factors.push((key, Arc::clone(&mats)));
        mats
    }

    /// `ε⁻¹ G(f)`, or zero when the quadratic term is off.
    fn forcing(&self, field: &KineticField) -> Result<KineticField> {
        if !self.nonlinear {
            return Ok(KineticField::zeros(self.grid, self.basis));
        }
        let poisson = poisson_solve(field)?;
        Ok(nonlinear_g(field, &poisson, &self.ps)?.scale(1.0 / self.eps))
    }

    fn propagate(factors: &[DMatrix<Complex>], field: &KineticField) -> KineticField {
        let modes: Vec<VelocityCoeffs> = factors
            .par_iter()
            .zip(field.modes().par_iter())
            .map(|(e, m)| VelocityCoeffs::from_dvector(e * m.as_dvector()))
            .collect();
        KineticField::from_modes(field.grid(), field.basis(), modes).expect("shape preserved")
    }

    /// One step of size `dt` from time `t` (used only in diagnostics).
    pub fn advance(&mut self, field: &KineticField, dt: f64, t: f64) -> Result<KineticField> {
        if field.grid() != self.grid || field.basis() != self.basis {
            return Err(Error::GridMismatch("field does not match the stepper".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Precondition(format!("time step must be positive, got {dt}")));
        }
        let bound = stability_bound(self.eps, self.grid, self.basis);
        if dt > bound * (1.0 + 1e-12) {
            return Err(Error::StabilityBound { dt, bound });
        }
        let e = self.factors(dt);
        let (half, full) = (0.5 * dt, dt);
        let n0 = self.forcing(field)?;
        let stage = Self::propagate(&e, &field.add(&n0.scale(full)));
        if !stage.is_finite() {
            return Err(Error::NonFinite { t, what: "kinetic stage".into() });
        }
        let n1 = self.forcing(&stage)?;
        let out = Self::propagate(&e, &field.add(&n0.scale(half))).add(&n1.scale(half));
        if !out.is_finite() {
            return Err(Error::NonFinite { t: t + dt, what: "kinetic field".into() });
        }
        Ok(out)
    }
}

impl Stepper for VpfpStepper {
    type State = KineticField;

    fn step(&mut self, state: &KineticField, dt: f64, t: f64) -> Result<KineticField> {
        self.advance(state, dt, t)
    }
}

/// One step from scratch. Long runs should keep a [`VpfpStepper`].
pub fn step(field: &KineticField, dt: f64, eps: f64) -> Result<KineticField> {
    VpfpStepper::new(field.grid(), field.basis(), eps)?.advance(field, dt, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prepared {
    Well,
    Ill,
}

impl std::str::FromStr for Prepared {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "well" => Ok(Self::Well),
            "ill" => Ok(Self::Ill),
            other => Err(Error::Config(format!("prepared must be well or ill, got {other}"))),
        }
    }
}

impl std::fmt::Display for Prepared {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Well => "well",
            Self::Ill => "ill",
        })
    }
}

/// Mean-zero initial data built on the lowest Fourier mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub prepared: Prepared,
    pub delta0: f64,
    /// Relative size of a random microscopic perturbation on `|j| ≤ 2`; zero disables it.
    pub micro_noise: f64,
    pub seed: u64,
}

impl InitialData {
    pub fn new(prepared: Prepared, delta0: f64) -> Self {
        Self { prepared, delta0, micro_noise: 0.0, seed: 0 }
    }

    /// `n₀ = δ₀ cos(2πx/L)`, plus `δ₀ cos(2πx/L) φ₂` when ill-prepared.
    pub fn build(&self, grid: Grid1d, basis: HermiteBasis) -> KineticField {
        let mut f = KineticField::zeros(grid, basis);
        let half = Complex::new(0.5 * self.delta0, 0.0);
        for j in [-1, 1] {
            f.mode_mut(j).as_mut_slice()[0] = half;
            if self.prepared == Prepared::Ill {
                f.mode_mut(j).as_mut_slice()[2] = half;
            }
        }
        if self.micro_noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let amp = self.micro_noise * self.delta0;
            for j in 1..=2.min(grid.j_max as i64) {
                for n in 1..basis.n_modes() {
                    let c = Complex::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp));
                    f.mode_mut(j).as_mut_slice()[n] += c;
                    f.mode_mut(-j).as_mut_slice()[n] += c.conj();
                }
            }
        }
        f
    }
}
