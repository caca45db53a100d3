//! Truncated matrices of the Fourier symbols and the `ξ`-weighted pairing.
//!
//! For a wavenumber `s` along the first axis the linearized operator is
//!
//! ```text
//! B_ε(s) = L - iεs v - iε (v/s) P₀
//! ```
//!
//! On the chain the last term is rank one: it sends the density coefficient
//! `f₀` to `-(iε/s) f₀` in mode 1, since `v√M = φ₁`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{HermiteBasis, VelocityCoeffs};
use crate::Complex;

/// Default validity threshold on `ε(1+s)` below which a fluid eigenpair is sought.
pub const DEFAULT_FLUID_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymbolKind {
    /// `B_ε(s)` including the Poisson coupling.
    FullB,
    /// `Q_ε(s) = L - iε P₁ v P₁`, acting on the microscopic subspace.
    QOnP1Complement,
    /// `L - λ - is' v` restricted to modes `1..N`, the matrix the resolvent inverts.
    Resolve,
}

/// Dense truncated symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolMatrix {
    pub entries: DMatrix<Complex>,
    pub s: f64,
    pub eps: f64,
    pub kind: SymbolKind,
}

impl SymbolMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn apply(&self, f: &VelocityCoeffs) -> VelocityCoeffs {
        VelocityCoeffs::from_dvector(&self.entries * f.as_dvector())
    }

    /// The symbol at `-s`. Every `s`-dependent term is `i` times a real
    /// matrix odd in `s`, so reflecting is entrywise conjugation.
    pub fn reflected(&self) -> Self {
        Self {
            entries: self.entries.map(|c| c.conj()),
            s: -self.s,
            eps: self.eps,
            kind: self.kind,
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::EpsilonOutOfRange(eps));
    }
    Ok(())
}

/// `B_ε` at a signed nonzero wavenumber.
pub fn assemble_b_signed(xi: f64, eps: f64, basis: HermiteBasis) -> Result<SymbolMatrix> {
    if xi == 0.0 || !xi.is_finite() {
        return Err(Error::NonPositiveWavenumber(xi));
    }
    check_eps(eps)?;
    let n = basis.n_modes();
    let mut m = DMatrix::<Complex>::zeros(n, n);
    for k in 0..n {
        m[(k, k)] = Complex::new(-(k as f64), 0.0);
    }
    for k in 0..n - 1 {
        let ladder = Complex::new(0.0, -eps * xi * ((k + 1) as f64).sqrt());
        m[(k, k + 1)] += ladder;
        m[(k + 1, k)] += ladder;
    }
    m[(1, 0)] += Complex::new(0.0, -eps / xi);
    Ok(SymbolMatrix {
        entries: m,
        s: xi,
        eps,
        kind: SymbolKind::FullB,
    })
}

/// `B_ε(s)` for `s > 0`.
pub fn assemble_b(s: f64, eps: f64, basis: HermiteBasis) -> Result<SymbolMatrix> {
    if !(s > 0.0) {
        return Err(Error::NonPositiveWavenumber(s));
    }
    assemble_b_signed(s, eps, basis)
}

/// `Q_ε(s) = L - iε P₁ (s v) P₁`; row and column 0 vanish. `s = 0` is allowed.
pub fn assemble_q(s: f64, eps: f64, basis: HermiteBasis) -> Result<SymbolMatrix> {
    check_eps(eps)?;
    let n = basis.n_modes();
    let mut m = DMatrix::<Complex>::zeros(n, n);
    for k in 1..n {
        m[(k, k)] = Complex::new(-(k as f64), 0.0);
    }
    for k in 1..n - 1 {
        let ladder = Complex::new(0.0, -eps * s * ((k + 1) as f64).sqrt());
        m[(k, k + 1)] += ladder;
        m[(k + 1, k)] += ladder;
    }
    Ok(SymbolMatrix {
        entries: m,
        s,
        eps,
        kind: SymbolKind::QOnP1Complement,
    })
}

/// `L - λ - i s' v` on modes `1..N` (dimension `N-1`). Row/column `k`
/// corresponds to Hermite mode `k+1`.
pub fn assemble_resolve(lambda: Complex, s_prime: f64, basis: HermiteBasis) -> SymbolMatrix {
    let m = basis.n_modes() - 1;
    let mut a = DMatrix::<Complex>::zeros(m, m);
    for k in 0..m {
        a[(k, k)] = Complex::new(-((k + 1) as f64), 0.0) - lambda;
    }
    for k in 0..m - 1 {
        let ladder = Complex::new(0.0, -s_prime * ((k + 2) as f64).sqrt());
        a[(k, k + 1)] += ladder;
        a[(k + 1, k)] += ladder;
    }
    SymbolMatrix {
        entries: a,
        s: s_prime,
        eps: 0.0,
        kind: SymbolKind::Resolve,
    }
}

/// The `ξ`-weighted inner product `(f,g)_s = (f,g) + s⁻² (P₀f, P₀g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedInner {
    pub s: f64,
}

impl WeightedInner {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::NonPositiveWavenumber(s));
        }
        Ok(Self { s })
    }

    fn density_weight(&self) -> f64 {
        1.0 / (self.s * self.s)
    }

    /// Sesquilinear: conjugates `g`.
    pub fn inner(&self, f: &VelocityCoeffs, g: &VelocityCoeffs) -> Complex {
        f.inner(g) + f.density() * g.density().conj() * self.density_weight()
    }

    /// Bilinear: no conjugation. `pair(f, g) = inner(f, conj g)`.
    pub fn pair(&self, f: &VelocityCoeffs, g: &VelocityCoeffs) -> Complex {
        let plain: Complex = f
            .as_slice()
            .iter()
            .zip(g.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        plain + f.density() * g.density() * self.density_weight()
    }

    pub fn norm_sq(&self, f: &VelocityCoeffs) -> f64 {
        f.norm_sq() + f.density().norm_sqr() * self.density_weight()
    }

    pub fn norm(&self, f: &VelocityCoeffs) -> f64 {
        self.norm_sq(f).sqrt()
    }
}

pub fn weighted_inner(f: &VelocityCoeffs, g: &VelocityCoeffs, s: f64) -> Result<Complex> {
    Ok(WeightedInner::new(s)?.inner(f, g))
}

pub fn bilinear_pair(f: &VelocityCoeffs, g: &VelocityCoeffs, s: f64) -> Result<Complex> {
    Ok(WeightedInner::new(s)?.pair(f, g))
}

pub fn weighted_norm(f: &VelocityCoeffs, s: f64) -> Result<f64> {
    Ok(WeightedInner::new(s)?.norm(f))
}
