//! Dense complex kernels shared by the spectral and evolution modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::Complex;

/// Matrix exponential `e^{A}` (Padé scaling and squaring).
pub fn expm(a: &DMatrix<Complex>) -> DMatrix<Complex> {
    a.exp()
}

/// `e^{τ A}`.
pub fn expm_scaled(a: &DMatrix<Complex>, tau: f64) -> DMatrix<Complex> {
    if tau == 0.0 {
        return DMatrix::identity(a.nrows(), a.ncols());
    }
    expm(&(a * Complex::new(tau, 0.0)))
}

/// All eigenvalues of a square complex matrix, sorted by real part, descending.
pub fn eigenvalues(a: &DMatrix<Complex>) -> Result<Vec<Complex>> {
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigensolver("complex Schur iteration did not converge".into()))?;
    let diag = schur
        .eigenvalues()
        .ok_or_else(|| Error::Eigensolver("Schur form is not triangular".into()))?;
    let mut out: Vec<Complex> = diag.iter().copied().collect();
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    out.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(out)
}

/// Solve `A x = b`, returning `None` when `A` is numerically singular.
pub fn solve(a: &DMatrix<Complex>, b: &DVector<Complex>) -> Option<DVector<Complex>> {
    let lu = a.clone().lu();
    let x = lu.solve(b)?;
    if x.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        // Reject near-singular systems whose solution no longer satisfies the equations.
        let residual = (a * &x - b).norm();
        if residual <= 1e-8 * (1.0 + b.norm()) {
            return Some(x);
        }
    }
    None
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex::new(0.0, 0.0),
            Complex::new(-1.0, 0.0),
            Complex::new(-2.0, 1.0),
        ]));
        let e = expm_scaled(&a, 0.5);
        assert!((e[(1, 1)] - Complex::new((-0.5f64).exp(), 0.0)).norm() < 1e-15);
        assert!((e[(2, 2)] - Complex::new(-1.0, 0.5).exp()).norm() < 1e-15);
        assert_eq!(expm_scaled(&a, 0.0), DMatrix::identity(3, 3));
    }

    #[test]
    fn exp_matches_eigendecomposition_route() {
        // Non-normal 2x2 with distinct eigenvalues: e^{A} = V e^{Λ} V⁻¹.
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex::new(-1.0, 0.0),
                Complex::new(3.0, 1.0),
                Complex::new(0.0, 0.0),
                Complex::new(-4.0, 0.5),
            ],
        );
        let (l1, l2) = (a[(0, 0)], a[(1, 1)]);
        let v = DMatrix::from_row_slice(
            2,
            2,
            &[Complex::new(1.0, 0.0), a[(0, 1)] / (l2 - l1), Complex::new(0.0, 0.0), Complex::new(1.0, 0.0)],
        );
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![l1.exp(), l2.exp()]));
        let reference = &v * d * v.clone().try_inverse().unwrap();
        assert!((expm(&a) - reference).norm() < 1e-14);
    }

    #[test]
    fn fits() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y) - 1.5).abs() < 1e-12);
        let (m, c) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((m - 2.0).abs() < 1e-15 && (c - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_solve_is_rejected() {
        let a = DMatrix::<Complex>::zeros(3, 3);
        let b = DVector::from_element(3, Complex::new(1.0, 0.0));
        assert!(solve(&a, &b).is_none());
    }
}
