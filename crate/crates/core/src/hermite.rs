//! Velocity space in the Gaussian-weighted Hermite basis.
//!
//! A perturbation `f(v)` is expanded as `f = Σ f_n φ_n` with `φ_n = h_n √M`,
//! where `h_n` are the polynomials orthonormal with respect to the Maxwellian
//! `M(v) = (2π)^{-1/2} exp(-v²/2)`. In this basis:
//!
//! * the linearized Fokker-Planck operator `L = ∂_v² - v²/4 + 1/2` is diagonal,
//!   `L φ_n = -n φ_n`;
//! * multiplication by `v` is the symmetric ladder `v φ_n = √(n+1) φ_{n+1} + √n φ_{n-1}`;
//! * `∂_v φ_n = (√n φ_{n-1} - √(n+1) φ_{n+1}) / 2`.
//!
//! The chain is truncated to modes `0..N`; the ladder actions drop whatever
//! they would push into mode `N`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Complex;

/// Smallest truncation that still resolves the resolvent chain.
pub const MIN_MODES: usize = 8;

/// The velocity variable is one dimensional: the fluid eigenproblem of the
/// three dimensional symbol reduces, after rotating the wavevector onto the
/// first axis, to the `v₁` chain with all transverse indices zero.
pub const VELOCITY_DIM: usize = 1;

/// Truncation of the Hermite chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HermiteBasis {
    n_modes: usize,
}

impl HermiteBasis {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes < MIN_MODES {
            return Err(Error::TruncationTooSmall {
                min: MIN_MODES,
                got: n_modes,
            });
        }
        Ok(Self { n_modes })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn velocity_dim(&self) -> usize {
        VELOCITY_DIM
    }

    /// The same chain with one more mode on top.
    pub fn extended(&self) -> Self {
        Self {
            n_modes: self.n_modes + 1,
        }
    }

    /// Diagonal matrix of `L`: `diag(0, -1, ..., -(N-1))`.
    pub fn l_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_modes, self.n_modes, |i, j| {
            if i == j {
                -(i as f64)
            } else {
                0.0
            }
        })
    }

    /// Symmetric tridiagonal matrix of multiplication by `v`.
    pub fn v_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_modes, self.n_modes, |i, j| {
            if j == i + 1 {
                (j as f64).sqrt()
            } else if i == j + 1 {
                (i as f64).sqrt()
            } else {
                0.0
            }
        })
    }

    /// Matrix of `∂_v`: `+√(n+1)/2` above the diagonal, `-√n/2` below.
    pub fn dv_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_modes, self.n_modes, |i, j| {
            if j == i + 1 {
                0.5 * (j as f64).sqrt()
            } else if i == j + 1 {
                -0.5 * (i as f64).sqrt()
            } else {
                0.0
            }
        })
    }
}

/// Hermite coefficients of one velocity profile (at one Fourier mode).
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityCoeffs {
    coeffs: DVector<Complex>,
}

impl VelocityCoeffs {
    pub fn zeros(basis: HermiteBasis) -> Self {
        Self {
            coeffs: DVector::zeros(basis.n_modes()),
        }
    }

    /// Unit vector `e_k`, i.e. the profile `φ_k`.
    pub fn unit(basis: HermiteBasis, k: usize) -> Self {
        let mut out = Self::zeros(basis);
        out.coeffs[k] = Complex::new(1.0, 0.0);
        out
    }

    pub fn from_vec(basis: HermiteBasis, coeffs: Vec<Complex>) -> Result<Self> {
        if coeffs.len() != basis.n_modes() {
            return Err(Error::BasisMismatch {
                expected: basis.n_modes(),
                got: coeffs.len(),
            });
        }
        Ok(Self {
            coeffs: DVector::from_vec(coeffs),
        })
    }

    pub fn from_real(basis: HermiteBasis, coeffs: &[f64]) -> Result<Self> {
        Self::from_vec(basis, coeffs.iter().map(|&c| Complex::new(c, 0.0)).collect())
    }

    pub(crate) fn from_dvector(coeffs: DVector<Complex>) -> Self {
        Self { coeffs }
    }

    pub fn basis(&self) -> HermiteBasis {
        HermiteBasis {
            n_modes: self.coeffs.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex] {
        self.coeffs.as_slice()
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex] {
        self.coeffs.as_mut_slice()
    }

    pub fn as_dvector(&self) -> &DVector<Complex> {
        &self.coeffs
    }

    /// Density trace `(f, √M)`.
    pub fn density(&self) -> Complex {
        self.coeffs[0]
    }

    /// Momentum trace `(f, v√M)`.
    pub fn momentum(&self) -> Complex {
        self.coeffs[1]
    }

    /// Plain `L²_v` inner product, conjugating `other`.
    pub fn inner(&self, other: &Self) -> Complex {
        self.coeffs.dotc(&other.coeffs).conj()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    pub fn conj(&self) -> Self {
        Self {
            coeffs: self.coeffs.map(|c| c.conj()),
        }
    }

    pub fn scale(&self, factor: Complex) -> Self {
        Self {
            coeffs: &self.coeffs * factor,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            coeffs: &self.coeffs + &other.coeffs,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            coeffs: &self.coeffs - &other.coeffs,
        }
    }

    /// Copy into a chain of `basis.n_modes()` modes, padding with zeros or
    /// dropping the top modes.
    pub fn resized(&self, basis: HermiteBasis) -> Self {
        let mut out = Self::zeros(basis);
        let n = self.len().min(basis.n_modes());
        out.coeffs.rows_mut(0, n).copy_from(&self.coeffs.rows(0, n));
        out
    }
}

/// `(L f)_n = -n f_n`.
pub fn apply_l(f: &VelocityCoeffs) -> VelocityCoeffs {
    let mut out = f.clone();
    for (n, c) in out.coeffs.iter_mut().enumerate() {
        *c *= -(n as f64);
    }
    out
}

/// `(v f)_n = √n f_{n-1} + √(n+1) f_{n+1}`, dropping the overflow into mode `N`.
pub fn apply_v(f: &VelocityCoeffs) -> VelocityCoeffs {
    let c = &f.coeffs;
    let n_modes = c.len();
    let out = DVector::from_fn(n_modes, |n, _| {
        let mut acc = Complex::new(0.0, 0.0);
        if n > 0 {
            acc += c[n - 1] * (n as f64).sqrt();
        }
        if n + 1 < n_modes {
            acc += c[n + 1] * ((n + 1) as f64).sqrt();
        }
        acc
    });
    VelocityCoeffs { coeffs: out }
}

/// `(∂_v f)_n = (√(n+1) f_{n+1} - √n f_{n-1}) / 2`, truncated like [`apply_v`].
pub fn apply_dv(f: &VelocityCoeffs) -> VelocityCoeffs {
    let c = &f.coeffs;
    let n_modes = c.len();
    let out = DVector::from_fn(n_modes, |n, _| {
        let mut acc = Complex::new(0.0, 0.0);
        if n + 1 < n_modes {
            acc += c[n + 1] * (0.5 * ((n + 1) as f64).sqrt());
        }
        if n > 0 {
            acc -= c[n - 1] * (0.5 * (n as f64).sqrt());
        }
        acc
    });
    VelocityCoeffs { coeffs: out }
}

/// `P₀ f = (f, √M) √M`.
pub fn project_p0(f: &VelocityCoeffs) -> VelocityCoeffs {
    let mut out = VelocityCoeffs::zeros(f.basis());
    out.coeffs[0] = f.coeffs[0];
    out
}

/// `P₁ f = f - P₀ f`.
pub fn project_p1(f: &VelocityCoeffs) -> VelocityCoeffs {
    let mut out = f.clone();
    out.coeffs[0] = Complex::new(0.0, 0.0);
    out
}

/// Dissipation norm `‖∂_v f‖² + ‖v f‖²`.
///
/// Evaluated on the chain extended by one mode so the ladder actions lose
/// nothing at the top.
pub fn sigma_norm_sq(f: &VelocityCoeffs) -> f64 {
    let wide = f.resized(f.basis().extended());
    apply_dv(&wide).norm_sq() + apply_v(&wide).norm_sq()
}

/// Largest `μ` with `(Lf, f) ≤ -μ ‖P₁f‖²_σ` over the given samples.
///
/// Samples with a vanishing microscopic part carry no information and are
/// skipped; `None` when every sample is skipped.
pub fn measured_coercivity(samples: &[VelocityCoeffs]) -> Option<f64> {
    samples
        .iter()
        .filter_map(|f| {
            let micro = sigma_norm_sq(&project_p1(f));
            if micro <= f64::EPSILON {
                return None;
            }
            let dissipation = -apply_l(f).inner(f).re;
            Some(dissipation / micro)
        })
        .reduce(f64::min)
}

/// Trapezoidal quadrature on the Hermite functions themselves.
///
/// This evaluates `φ_n(v)` pointwise and assembles operator matrices from
/// their differential definitions, independently of the ladder formulas
/// above. It is the reference the ladder actions are checked against.
pub mod quadrature {
    use nalgebra::DMatrix;

    pub struct HermiteGrid {
        nodes: Vec<f64>,
        step: f64,
        /// `phi[n][i] = φ_n(nodes[i])`.
        phi: Vec<Vec<f64>>,
    }

    impl HermiteGrid {
        /// Grid wide enough for `n_modes` functions with spacing `step`.
        pub fn new(n_modes: usize, step: f64) -> Self {
            // The last function turns over near √(4N+2) and then decays like e^{-v²/4}.
            let half_width = (4.0 * n_modes as f64 + 2.0).sqrt() + 16.0;
            let count = (2.0 * half_width / step).ceil() as usize + 1;
            let nodes: Vec<f64> = (0..count).map(|i| -half_width + i as f64 * step).collect();
            let mut phi = vec![vec![0.0; count]; n_modes + 2];
            let norm0 = (2.0 * std::f64::consts::PI).powf(-0.25);
            for (i, &v) in nodes.iter().enumerate() {
                phi[0][i] = norm0 * (-v * v / 4.0).exp();
                phi[1][i] = v * phi[0][i];
                for n in 1..n_modes + 1 {
                    let nf = n as f64;
                    phi[n + 1][i] =
                        (v * phi[n][i] - nf.sqrt() * phi[n - 1][i]) / (nf + 1.0).sqrt();
                }
            }
            Self { nodes, step, phi }
        }

        pub fn nodes(&self) -> &[f64] {
            &self.nodes
        }

        pub fn phi(&self, n: usize) -> &[f64] {
            &self.phi[n]
        }

        fn integrate(&self, values: impl Iterator<Item = f64>) -> f64 {
            // Endpoints are ~e^{-60}; plain sum times step is the trapezoid rule.
            values.sum::<f64>() * self.step
        }

        /// `∫ a(v) b(v) dv`.
        pub fn pair(&self, a: &[f64], b: &[f64]) -> f64 {
            self.integrate(a.iter().zip(b).map(|(x, y)| x * y))
        }

        /// `φ_n'(v) = √n φ_{n-1} - (v/2) φ_n`.
        pub fn dphi(&self, n: usize) -> Vec<f64> {
            let nf = n as f64;
            self.nodes
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let lower = if n > 0 { nf.sqrt() * self.phi[n - 1][i] } else { 0.0 };
                    lower - 0.5 * v * self.phi[n][i]
                })
                .collect()
        }

        /// `φ_n''(v)`, from differentiating `h_n √M` twice.
        pub fn d2phi(&self, n: usize) -> Vec<f64> {
            let nf = n as f64;
            self.nodes
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let two_down = if n > 1 {
                        (nf * (nf - 1.0)).sqrt() * self.phi[n - 2][i]
                    } else {
                        0.0
                    };
                    let one_down = if n > 0 { nf.sqrt() * self.phi[n - 1][i] } else { 0.0 };
                    two_down - v * one_down + (v * v / 4.0 - 0.5) * self.phi[n][i]
                })
                .collect()
        }

        /// Gram matrix `(φ_m, φ_n)`.
        pub fn gram(&self, n_modes: usize) -> DMatrix<f64> {
            DMatrix::from_fn(n_modes, n_modes, |m, n| self.pair(&self.phi[m], &self.phi[n]))
        }

        /// `(L φ_n, φ_m)` with `L = ∂_v² - v²/4 + 1/2`.
        pub fn assemble_l(&self, n_modes: usize) -> DMatrix<f64> {
            let l_phi: Vec<Vec<f64>> = (0..n_modes)
                .map(|n| {
                    self.d2phi(n)
                        .iter()
                        .zip(&self.nodes)
                        .zip(&self.phi[n])
                        .map(|((d2, &v), p)| d2 - v * v / 4.0 * p + 0.5 * p)
                        .collect()
                })
                .collect();
            DMatrix::from_fn(n_modes, n_modes, |m, n| self.pair(&self.phi[m], &l_phi[n]))
        }

        /// `(v φ_n, φ_m)`.
        pub fn assemble_v(&self, n_modes: usize) -> DMatrix<f64> {
            DMatrix::from_fn(n_modes, n_modes, |m, n| {
                self.integrate(
                    self.nodes
                        .iter()
                        .enumerate()
                        .map(|(i, &v)| v * self.phi[n][i] * self.phi[m][i]),
                )
            })
        }

        /// `(∂_v φ_n, φ_m)`.
        pub fn assemble_dv(&self, n_modes: usize) -> DMatrix<f64> {
            let d: Vec<Vec<f64>> = (0..n_modes).map(|n| self.dphi(n)).collect();
            DMatrix::from_fn(n_modes, n_modes, |m, n| self.pair(&self.phi[m], &d[n]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::quadrature::HermiteGrid;
    use super::*;
    use proptest::prelude::*;

    fn basis(n: usize) -> HermiteBasis {
        HermiteBasis::new(n).unwrap()
    }

    fn c(re: f64) -> Complex {
        Complex::new(re, 0.0)
    }

    #[test]
    fn rejects_short_chains() {
        assert!(matches!(
            HermiteBasis::new(4),
            Err(Error::TruncationTooSmall { min: 8, got: 4 })
        ));
        assert_eq!(basis(8).velocity_dim(), 1);
    }

    #[test]
    fn l_on_low_modes() {
        let b = basis(12);
        assert_eq!(apply_l(&VelocityCoeffs::unit(b, 0)).norm(), 0.0);
        assert_eq!(apply_l(&VelocityCoeffs::unit(b, 1)), VelocityCoeffs::unit(b, 1).scale(c(-1.0)));
        assert_eq!(apply_l(&VelocityCoeffs::unit(b, 2)), VelocityCoeffs::unit(b, 2).scale(c(-2.0)));
    }

    #[test]
    fn ladder_matches_quadrature() {
        let b = basis(10);
        let grid = HermiteGrid::new(10, 0.05);
        let v_quad = grid.assemble_v(10);
        let dv_quad = grid.assemble_dv(10);
        // Column k of the quadrature matrices is the image of e_k.
        for k in 0..4 {
            let vk = apply_v(&VelocityCoeffs::unit(b, k));
            let dk = apply_dv(&VelocityCoeffs::unit(b, k));
            for m in 0..10 {
                assert!((vk.as_slice()[m].re - v_quad[(m, k)]).abs() < 1e-12, "v {m} {k}");
                assert!((dk.as_slice()[m].re - dv_quad[(m, k)]).abs() < 1e-12, "dv {m} {k}");
            }
        }
        assert_eq!(apply_v(&VelocityCoeffs::unit(b, 0)), VelocityCoeffs::unit(b, 1));
        let e1 = apply_v(&VelocityCoeffs::unit(b, 1));
        assert!((e1.as_slice()[0] - c(1.0)).norm() < 1e-15);
        assert!((e1.as_slice()[2] - c(2f64.sqrt())).norm() < 1e-15);
        let d0 = apply_dv(&VelocityCoeffs::unit(b, 0));
        assert!((d0.as_slice()[1] - c(-0.5)).norm() < 1e-15);
        assert_eq!(apply_v(&VelocityCoeffs::zeros(b)).norm(), 0.0);
        assert_eq!(apply_dv(&VelocityCoeffs::zeros(b)).norm(), 0.0);
    }

    #[test]
    fn quadrature_basis_is_orthonormal() {
        let grid = HermiteGrid::new(48, 0.05);
        let gram = grid.gram(48);
        let err = (gram - DMatrix::<f64>::identity(48, 48)).amax();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn canonical_commutator_on_interior_mode() {
        let b = basis(12);
        let e3 = VelocityCoeffs::unit(b, 3);
        let lhs = apply_dv(&apply_v(&e3)).sub(&apply_v(&apply_dv(&e3)));
        assert!(lhs.sub(&e3).norm() < 1e-14);
    }

    #[test]
    fn matrices_agree_with_actions() {
        let b = basis(9);
        let f = VelocityCoeffs::from_real(b, &[0.3, -1.0, 0.2, 0.0, 0.7, 0.1, -0.4, 0.9, 0.5]).unwrap();
        let as_mat = |m: DMatrix<f64>| {
            VelocityCoeffs::from_dvector(m.map(|x| c(x)) * f.as_dvector())
        };
        assert!(as_mat(b.v_matrix()).sub(&apply_v(&f)).norm() < 1e-14);
        assert!(as_mat(b.dv_matrix()).sub(&apply_dv(&f)).norm() < 1e-14);
        assert!(as_mat(b.l_matrix()).sub(&apply_l(&f)).norm() < 1e-14);
    }

    #[test]
    fn projections() {
        let b = basis(8);
        let e0 = VelocityCoeffs::unit(b, 0);
        assert_eq!(project_p0(&e0), e0);
        assert_eq!(project_p0(&VelocityCoeffs::unit(b, 1)).norm(), 0.0);
        let f = VelocityCoeffs::from_real(b, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        assert_eq!(project_p0(&f).add(&project_p1(&f)), f);
    }

    #[test]
    fn sigma_norm_values() {
        let b = basis(8);
        assert!((sigma_norm_sq(&VelocityCoeffs::unit(b, 0)) - 1.25).abs() < 1e-15);
        assert_eq!(sigma_norm_sq(&VelocityCoeffs::zeros(b)), 0.0);
        // Top mode: the extension keeps the √N overflow that a plain ladder would drop.
        let top = VelocityCoeffs::unit(b, 7);
        assert!((sigma_norm_sq(&top) - 1.25 * 15.0).abs() < 1e-12);
    }

    fn coeffs_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0f64..1.0, n)
    }

    proptest! {
        #[test]
        fn sigma_norm_dominates_l2(v in coeffs_strategy(16)) {
            let b = basis(16);
            let f = VelocityCoeffs::from_real(b, &v).unwrap();
            prop_assume!(f.norm() > 1e-3);
            // One dimensional lower bound: ‖∂f‖² + ‖vf‖² ≥ -2(∂f, vf) = ‖f‖².
            prop_assert!(sigma_norm_sq(&f) >= f.norm_sq() * (1.0 - 1e-12));
        }

        #[test]
        fn l_is_coercive_on_microscopic_part(v in coeffs_strategy(16), w in coeffs_strategy(16)) {
            let b = basis(16);
            let f = VelocityCoeffs::from_vec(
                b,
                v.iter().zip(&w).map(|(&x, &y)| Complex::new(x, y)).collect(),
            ).unwrap();
            let lff = apply_l(&f).inner(&f);
            prop_assert!(lff.im.abs() < 1e-12);
            prop_assert!(lff.re <= -project_p1(&f).norm_sq() + 1e-12);
        }

        #[test]
        fn l_and_v_are_symmetric(v in coeffs_strategy(12), w in coeffs_strategy(12)) {
            let b = basis(12);
            let f = VelocityCoeffs::from_real(b, &v).unwrap();
            let g = VelocityCoeffs::from_real(b, &w).unwrap();
            prop_assert!((apply_l(&f).inner(&g) - f.inner(&apply_l(&g))).norm() < 1e-12);
            // The truncated ladder is exactly symmetric; truncation only loses
            // the overflow into mode N.
            prop_assert!((apply_v(&f).inner(&g) - f.inner(&apply_v(&g))).norm() < 1e-12);
        }
    }

    #[test]
    fn measured_mu_lies_in_unit_interval() {
        use rand::{Rng, SeedableRng};
        let b = basis(16);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<_> = (0..200)
            .map(|_| {
                let v: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
                VelocityCoeffs::from_real(b, &v).unwrap()
            })
            .collect();
        let mu = measured_coercivity(&samples).unwrap();
        assert!(mu > 0.0 && mu < 1.0, "{mu}");
        assert_eq!(measured_coercivity(&[VelocityCoeffs::unit(b, 0)]), None);
    }
}
