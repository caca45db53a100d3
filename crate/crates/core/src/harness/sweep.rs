//! ε-sweeps of a single linear mode against its fluid approximation.

use serde::{Deserialize, Serialize};

use super::fit::{rate_fit, BulkRate, FitOptions, RateFit, Sample};
use crate::error::{Error, Result};
use crate::hermite::{HermiteBasis, VelocityCoeffs};
use crate::linear::{first_order_error, second_order_error};
use crate::vpfp::Prepared;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSweepConfig {
    pub s: f64,
    pub eps_list: Vec<f64>,
    pub t_max: f64,
    /// Uniform samples on `[0, t_max]`; layer samples are added on top.
    pub t_samples: usize,
    pub prepared: Prepared,
    /// 1 compares with `e^{tD} n₀`, 2 with `-e^{tD} (i s m₀)` after scaling by `1/ε`.
    pub order: u8,
    pub n_modes: usize,
    pub bulk_rate: BulkRate,
}

impl Default for LinearSweepConfig {
    fn default() -> Self {
        Self {
            s: 1.0,
            eps_list: vec![0.2, 0.1, 0.05, 0.025],
            t_max: 3.0,
            t_samples: 31,
            prepared: Prepared::Ill,
            order: 1,
            n_modes: 48,
            bulk_rate: BulkRate::Free,
        }
    }
}

impl LinearSweepConfig {
    /// Initial profile: `e₀` (well), `e₀ + e₂` (ill) or `e₁` for the
    /// second-order comparison, which needs `P₀f₀ = 0`.
    pub fn initial(&self) -> Result<VelocityCoeffs> {
        let basis = HermiteBasis::new(self.n_modes)?;
        Ok(match (self.order, self.prepared) {
            (2, _) => VelocityCoeffs::unit(basis, 1),
            (1, Prepared::Well) => VelocityCoeffs::unit(basis, 0),
            (1, Prepared::Ill) => VelocityCoeffs::unit(basis, 0).add(&VelocityCoeffs::unit(basis, 2)),
            (o, _) => return Err(Error::Config(format!("order must be 1 or 2, got {o}"))),
        })
    }

    /// Uniform `[0, t_max]` plus 12 geometric layer points in `[ε²/4, 20ε²]` per ε.
    pub fn t_grid(&self) -> Vec<f64> {
        let n = self.t_samples.max(2);
        let mut t: Vec<f64> = (0..n).map(|i| self.t_max * i as f64 / (n - 1) as f64).collect();
        for &eps in &self.eps_list {
            let (lo, hi) = (eps * eps / 4.0, 20.0 * eps * eps);
            let r = (hi / lo).powf(1.0 / 11.0);
            t.extend((0..12).map(|i| lo * r.powi(i)).filter(|x| *x <= self.t_max));
        }
        t.sort_by(f64::total_cmp);
        t.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSweep {
    pub t_grid: Vec<f64>,
    /// `errors[i][j]` at `eps_list[i]`, `t_grid[j]`.
    pub errors: Vec<Vec<f64>>,
    pub fit: Option<RateFit>,
    pub fit_failure: Option<String>,
}

pub fn linear_sweep(cfg: &LinearSweepConfig) -> Result<LinearSweep> {
    let f0 = cfg.initial()?;
    let t_grid = cfg.t_grid();
    let errors = cfg
        .eps_list
        .iter()
        .map(|&eps| match cfg.order {
            2 => second_order_error(&f0, cfg.s, eps, &t_grid),
            _ => first_order_error(&f0, cfg.s, eps, &t_grid),
        })
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<Sample> = cfg
        .eps_list
        .iter()
        .zip(&errors)
        .flat_map(|(&eps, e)| t_grid.iter().zip(e).map(move |(&t, &err)| Sample { eps, t, err }))
        .collect();
    let (fit, fit_failure) = match rate_fit(&samples, &FitOptions { bulk_rate: cfg.bulk_rate, ..Default::default() }) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(LinearSweep { t_grid, errors, fit, fit_failure })
}
