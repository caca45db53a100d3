//! Kinetic Vlasov-Poisson-Fokker-Planck dynamics in the parabolic scaling and
//! their drift-diffusion-Poisson limit.
//!
//! Velocity profiles are expanded in Hermite functions, space is periodic and
//! Fourier-truncated. The crate covers the linear symbol and its fluid
//! eigenvalue, single-mode evolution, the nonlinear kinetic and fluid solvers,
//! and a harness that measures how fast the kinetic solution approaches the
//! fluid one as `ε → 0`.

pub mod ddp;
pub mod error;
pub mod field;
pub mod harness;
pub mod hermite;
pub mod linalg;
pub mod linear;
pub mod spectral;
pub mod symbol;
pub mod timeline;
pub mod vpfp;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type Complex = num_complex::Complex64;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/hermite.md")]
    mod hermite {}
    #[doc = include_str!("../../../book/src/symbol.md")]
    mod symbol {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/linear.md")]
    mod linear {}
    #[doc = include_str!("../../../book/src/nonlinear.md")]
    mod nonlinear {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
}
