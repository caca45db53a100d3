//! Fourier-Hermite fields on the periodic interval `[0, L)`.
//!
//! Convention: `f(x) = Σ_{|j|≤J} f̂_j e^{iξ_j x}` with `ξ_j = 2πj/L`, so
//! Parseval reads `(1/L)∫|f|² dx = Σ|f̂_j|²`. All discrete norms in this crate
//! are mode sums in that normalization.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{HermiteBasis, VelocityCoeffs};
use crate::Complex;

/// Tolerance on the zero-mode density below which a field counts as neutral.
pub const NEUTRALITY_TOL: f64 = 1e-12;

/// Fourier modes `j ∈ [-J, J]` on a box of length `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1d {
    pub j_max: usize,
    pub box_length: f64,
}

impl Grid1d {
    pub fn new(j_max: usize, box_length: f64) -> Result<Self> {
        if j_max == 0 || !(box_length > 0.0) {
            return Err(Error::Config(format!(
                "grid needs j_max >= 1 and a positive box length, got {j_max}, {box_length}"
            )));
        }
        Ok(Self { j_max, box_length })
    }

    pub fn n_modes(&self) -> usize {
        2 * self.j_max + 1
    }

    pub fn index(&self, j: i64) -> usize {
        (j + self.j_max as i64) as usize
    }

    pub fn mode_number(&self, index: usize) -> i64 {
        index as i64 - self.j_max as i64
    }

    pub fn wavenumber_of(&self, j: i64) -> f64 {
        2.0 * PI * j as f64 / self.box_length
    }

    /// `ξ` at storage index `index`.
    pub fn wavenumber(&self, index: usize) -> f64 {
        self.wavenumber_of(self.mode_number(index))
    }

    pub fn wavenumbers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_modes()).map(|i| self.wavenumber(i))
    }

    pub fn s_max(&self) -> f64 {
        self.wavenumber_of(self.j_max as i64)
    }
}

/// Hermite coefficients at every Fourier mode.
#[derive(Clone, PartialEq)]
pub struct KineticField {
    grid: Grid1d,
    basis: HermiteBasis,
    modes: Vec<VelocityCoeffs>,
}

impl fmt::Debug for KineticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KineticField")
            .field("grid", &self.grid)
            .field("n_hermite", &self.basis.n_modes())
            .finish_non_exhaustive()
    }
}

impl KineticField {
    pub fn zeros(grid: Grid1d, basis: HermiteBasis) -> Self {
        Self {
            grid,
            basis,
            modes: vec![VelocityCoeffs::zeros(basis); grid.n_modes()],
        }
    }

    pub fn from_modes(grid: Grid1d, basis: HermiteBasis, modes: Vec<VelocityCoeffs>) -> Result<Self> {
        if modes.len() != grid.n_modes() {
            return Err(Error::GridMismatch(format!(
                "expected {} Fourier modes, got {}",
                grid.n_modes(),
                modes.len()
            )));
        }
        if let Some(bad) = modes.iter().find(|m| m.len() != basis.n_modes()) {
            return Err(Error::BasisMismatch {
                expected: basis.n_modes(),
                got: bad.len(),
            });
        }
        Ok(Self { grid, basis, modes })
    }

    pub fn grid(&self) -> Grid1d {
        self.grid
    }

    pub fn basis(&self) -> HermiteBasis {
        self.basis
    }

    pub fn modes(&self) -> &[VelocityCoeffs] {
        &self.modes
    }

    pub fn modes_mut(&mut self) -> &mut [VelocityCoeffs] {
        &mut self.modes
    }

    pub fn mode(&self, j: i64) -> &VelocityCoeffs {
        &self.modes[self.grid.index(j)]
    }

    pub fn mode_mut(&mut self, j: i64) -> &mut VelocityCoeffs {
        let i = self.grid.index(j);
        &mut self.modes[i]
    }

    /// Density trace `n̂_j = f̂_j[0]` at every mode.
    pub fn densities(&self) -> Vec<Complex> {
        self.modes.iter().map(|m| m.density()).collect()
    }

    /// Hermite slice `n` as a Fourier coefficient array.
    pub fn slice(&self, n: usize) -> Vec<Complex> {
        self.modes.iter().map(|m| m.as_slice()[n]).collect()
    }

    pub fn set_slice(&mut self, n: usize, values: &[Complex]) {
        for (m, v) in self.modes.iter_mut().zip(values) {
            m.as_mut_slice()[n] = *v;
        }
    }

    /// `|n̂_0|`, the net charge.
    pub fn net_charge(&self) -> f64 {
        self.mode(0).density().norm()
    }

    /// Largest `|f̂(-ξ) - conj f̂(ξ)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let j_max = self.grid.j_max as i64;
        let mut worst: f64 = 0.0;
        for j in 0..=j_max {
            let (a, b) = (self.mode(j), self.mode(-j));
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                worst = worst.max((x.conj() - y).norm());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.modes
            .iter()
            .all(|m| m.as_slice().iter().all(|c| c.re.is_finite() && c.im.is_finite()))
    }

    pub fn map_modes(&self, mut op: impl FnMut(usize, &VelocityCoeffs) -> VelocityCoeffs) -> Self {
        Self {
            grid: self.grid,
            basis: self.basis,
            modes: self.modes.iter().enumerate().map(|(i, m)| op(i, m)).collect(),
        }
    }

    pub fn zip_modes(
        &self,
        other: &Self,
        mut op: impl FnMut(&VelocityCoeffs, &VelocityCoeffs) -> VelocityCoeffs,
    ) -> Self {
        Self {
            grid: self.grid,
            basis: self.basis,
            modes: self.modes.iter().zip(&other.modes).map(|(a, b)| op(a, b)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_modes(other, |a, b| a.sub(b))
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_modes(other, |a, b| a.add(b))
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map_modes(|_, m| m.scale(Complex::new(factor, 0.0)))
    }

    /// `Σ_j ‖f̂_j‖²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.modes.iter().map(|m| m.norm_sq()).sum()
    }

    /// `Σ_j n · |f̂_j[n]|²`, a discrete stand-in for `‖vf‖² + ‖∂_v f‖²`.
    pub fn hermite_weighted_sq(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                m.as_slice()
                    .iter()
                    .enumerate()
                    .map(|(n, c)| n as f64 * c.norm_sqr())
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Density perturbation on the same Fourier grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub grid: Grid1d,
    pub n_hat: Vec<Complex>,
}

impl DensityField {
    pub fn zeros(grid: Grid1d) -> Self {
        Self {
            grid,
            n_hat: vec![Complex::new(0.0, 0.0); grid.n_modes()],
        }
    }

    pub fn from_kinetic(field: &KineticField) -> Self {
        Self {
            grid: field.grid(),
            n_hat: field.densities(),
        }
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.n_hat.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.n_hat.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Transforms between mode coefficients and a uniform physical grid.
///
/// The physical grid has `M ≥ 3J+1` points, so the retained band is at most
/// two thirds of the grid's Nyquist band and quadratic products are free of
/// aliasing on the retained modes (the 2/3 rule).
#[derive(Clone)]
pub struct Pseudospectral {
    grid: Grid1d,
    n_phys: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Pseudospectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pseudospectral")
            .field("grid", &self.grid)
            .field("n_phys", &self.n_phys)
            .finish()
    }
}

impl Pseudospectral {
    pub fn new(grid: Grid1d) -> Self {
        let n_phys = (3 * grid.j_max + 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self {
            grid,
            n_phys,
            forward: planner.plan_fft_forward(n_phys),
            inverse: planner.plan_fft_inverse(n_phys),
        }
    }

    pub fn grid(&self) -> Grid1d {
        self.grid
    }

    pub fn n_phys(&self) -> usize {
        self.n_phys
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.grid.box_length / self.n_phys as f64;
        (0..self.n_phys).map(|m| m as f64 * h).collect()
    }

    /// Values `f(x_m)` at `x_m = mL/M`.
    pub fn to_physical(&self, coeffs: &[Complex]) -> Vec<Complex> {
        let m = self.n_phys as i64;
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_phys];
        for (i, c) in coeffs.iter().enumerate() {
            let j = self.grid.mode_number(i);
            buf[j.rem_euclid(m) as usize] = *c;
        }
        self.inverse.process(&mut buf);
        buf
    }

    /// Retained mode coefficients of physical values.
    pub fn from_physical(&self, values: &[Complex]) -> Vec<Complex> {
        let m = self.n_phys as i64;
        let mut buf = values.to_vec();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.n_phys as f64;
        (0..self.grid.n_modes())
            .map(|i| buf[self.grid.mode_number(i).rem_euclid(m) as usize] * scale)
            .collect()
    }

    /// Coefficients of the product `a(x) b(x)`, truncated to `|j| ≤ J`.
    pub fn product(&self, a: &[Complex], b: &[Complex]) -> Vec<Complex> {
        let pa = self.to_physical(a);
        let pb = self.to_physical(b);
        let prod: Vec<Complex> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        self.from_physical(&prod)
    }

    /// Product of a given physical profile with coefficient array `b`.
    pub fn product_with_physical(&self, a_phys: &[Complex], b: &[Complex]) -> Vec<Complex> {
        let pb = self.to_physical(b);
        let prod: Vec<Complex> = a_phys.iter().zip(&pb).map(|(x, y)| x * y).collect();
        self.from_physical(&prod)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn truncated_convolution(grid: Grid1d, a: &[Complex], b: &[Complex]) -> Vec<Complex> {
        let j = grid.j_max as i64;
        (-j..=j)
            .map(|k| {
                let mut acc = Complex::new(0.0, 0.0);
                for p in -j..=j {
                    let q = k - p;
                    if q.abs() <= j {
                        acc += a[grid.index(p)] * b[grid.index(q)];
                    }
                }
                acc
            })
            .collect()
    }

    #[test]
    fn grid_indexing() {
        let g = Grid1d::new(4, 2.0 * PI).unwrap();
        assert_eq!(g.n_modes(), 9);
        assert_eq!(g.index(-4), 0);
        assert_eq!(g.mode_number(8), 4);
        assert!((g.wavenumber(5) - 1.0).abs() < 1e-15);
        assert!((g.s_max() - 4.0).abs() < 1e-15);
        assert!(Grid1d::new(0, 1.0).is_err());
    }

    #[test]
    fn physical_roundtrip_and_values() {
        let g = Grid1d::new(5, 3.0).unwrap();
        let ps = Pseudospectral::new(g);
        assert!(ps.n_phys() >= 16);
        let mut c = vec![Complex::new(0.0, 0.0); g.n_modes()];
        c[g.index(1)] = Complex::new(0.5, 0.0);
        c[g.index(-1)] = Complex::new(0.5, 0.0);
        let vals = ps.to_physical(&c);
        for (x, v) in ps.nodes().iter().zip(&vals) {
            assert!((v.re - (2.0 * PI * x / 3.0).cos()).abs() < 1e-14);
        }
        let back = ps.from_physical(&vals);
        for (x, y) in back.iter().zip(&c) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    fn coeffs(n: usize) -> impl Strategy<Value = Vec<Complex>> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
            .prop_map(|v| v.into_iter().map(|(a, b)| Complex::new(a, b)).collect())
    }

    proptest! {
        #[test]
        fn dealiased_product_is_truncated_convolution(a in coeffs(17), b in coeffs(17)) {
            let g = Grid1d::new(8, 2.0 * PI).unwrap();
            let ps = Pseudospectral::new(g);
            let fast = ps.product(&a, &b);
            let slow = truncated_convolution(g, &a, &b);
            for (x, y) in fast.iter().zip(&slow) {
                prop_assert!((x - y).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn hermitian_defect_detects_asymmetry() {
        let g = Grid1d::new(2, 1.0).unwrap();
        let b = HermiteBasis::new(8).unwrap();
        let mut f = KineticField::zeros(g, b);
        f.mode_mut(1).as_mut_slice()[2] = Complex::new(1.0, 2.0);
        f.mode_mut(-1).as_mut_slice()[2] = Complex::new(1.0, -2.0);
        assert_eq!(f.hermitian_defect(), 0.0);
        f.mode_mut(-1).as_mut_slice()[2] = Complex::new(1.0, 2.0);
        assert!((f.hermitian_defect() - 4.0).abs() < 1e-15);
    }
}
