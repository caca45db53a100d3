//! Drift-diffusion-Poisson solver: `∂_t n - ∂²_x n + n = -∂_x(n ∂_xΦ)`, `∂²_xΦ = n`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{DensityField, Grid1d, KineticField, Pseudospectral};
use crate::hermite::{HermiteBasis, VelocityCoeffs};
use crate::linear::HkPWeight;
use crate::timeline::Stepper;
use crate::vpfp::poisson_from_density;
use crate::Complex;

/// Same two-stage Lawson scheme as the kinetic stepper, with the scalar
/// factor `e^{-(1+ξ²)dt}` per mode.
#[derive(Debug, Clone)]
pub struct DdpStepper {
    grid: Grid1d,
    ps: Pseudospectral,
    nonlinear: bool,
}

impl DdpStepper {
    pub fn new(grid: Grid1d) -> Self {
        Self { grid, ps: Pseudospectral::new(grid), nonlinear: true }
    }

    pub fn linear_only(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    fn factor(&self, i: usize, dt: f64) -> f64 {
        let xi = self.grid.wavenumber(i);
        (-(1.0 + xi * xi) * dt).exp()
    }

    /// `-∂_x(n ∂_xΦ)` in coefficients.
    fn forcing(&self, n_hat: &[Complex]) -> Result<Vec<Complex>> {
        if !self.nonlinear {
            return Ok(vec![Complex::new(0.0, 0.0); n_hat.len()]);
        }
        let e = poisson_from_density(self.grid, n_hat)?;
        let flux = self.ps.product(n_hat, &e.grad_phi_hat);
        Ok(flux
            .iter()
            .enumerate()
            .map(|(i, q)| Complex::new(0.0, -self.grid.wavenumber(i)) * q)
            .collect())
    }

    pub fn advance(&self, n: &DensityField, dt: f64, t: f64) -> Result<DensityField> {
        if n.grid != self.grid {
            return Err(Error::GridMismatch("density does not match the stepper".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Precondition(format!("time step must be positive, got {dt}")));
        }
        let u = &n.n_hat;
        let f0 = self.forcing(u)?;
        let stage: Vec<Complex> = (0..u.len())
            .into_par_iter()
            .map(|i| (u[i] + f0[i] * dt) * self.factor(i, dt))
            .collect();
        if stage.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::NonFinite { t, what: "density stage".into() });
        }
        let f1 = self.forcing(&stage)?;
        let n_hat = (0..u.len())
            .map(|i| (u[i] + f0[i] * (0.5 * dt)) * self.factor(i, dt) + f1[i] * (0.5 * dt))
            .collect();
        let out = DensityField { grid: self.grid, n_hat };
        if !out.is_finite() {
            return Err(Error::NonFinite { t: t + dt, what: "density".into() });
        }
        Ok(out)
    }
}

impl Stepper for DdpStepper {
    type State = DensityField;

    fn step(&mut self, state: &DensityField, dt: f64, t: f64) -> Result<DensityField> {
        self.advance(state, dt, t)
    }
}

pub fn step_ddp(n: &DensityField, dt: f64) -> Result<DensityField> {
    DdpStepper::new(n.grid).advance(n, dt, 0.0)
}

/// `n √M` as a kinetic field.
pub fn lift_to_kinetic(n: &DensityField, basis: HermiteBasis) -> KineticField {
    let modes = n
        .n_hat
        .iter()
        .map(|c| VelocityCoeffs::unit(basis, 0).scale(*c))
        .collect();
    KineticField::from_modes(n.grid, basis, modes).expect("one coefficient per mode")
}

/// `‖f - n√M‖_{H^k} + ‖∂_xΦ_f - ∂_xΦ_n‖_{H^k}` as discrete mode sums.
pub fn limit_error(f: &KineticField, n: &DensityField, k: u32) -> Result<f64> {
    if f.grid() != n.grid {
        return Err(Error::GridMismatch("kinetic and fluid grids differ".into()));
    }
    let w = HkPWeight { k };
    let grid = f.grid();
    let (mut kinetic, mut field) = (0.0, 0.0);
    for (i, (m, nh)) in f.modes().iter().zip(&n.n_hat).enumerate() {
        let xi = grid.wavenumber(i);
        let mut g = m.clone();
        g.as_mut_slice()[0] -= nh;
        kinetic += w.at(xi) * g.norm_sq();
        if xi != 0.0 {
            field += w.at(xi) * g.density().norm_sqr() / (xi * xi);
        }
    }
    Ok(kinetic.sqrt() + field.sqrt())
}
