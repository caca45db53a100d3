//! ε-sweeps of the nonlinear kinetic solver against the drift-diffusion limit.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{bulk_fit, rate_fit, BulkFit, BulkRate, FitOptions, RateFit, Sample};
use crate::ddp::{limit_error, DdpStepper};
use crate::error::{Error, Result};
use crate::field::{DensityField, Grid1d, KineticField};
use crate::hermite::HermiteBasis;
use crate::linalg::{linear_fit, loglog_slope};
use crate::timeline::march;
use crate::vpfp::{default_dt, energy_monitor, stability_bound, InitialData, Prepared, VpfpStepper};

/// Grid, step and data for one kinetic/fluid pair of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub eps: f64,
    pub initial: InitialData,
    pub j_modes: usize,
    pub n_hermite: usize,
    pub box_length: f64,
    /// `None` selects [`default_dt`].
    pub dt: Option<f64>,
    pub k: u32,
    pub compare_ddp: bool,
    /// Coarse steps of at most `10⁻³`, recording only from `t ≥ 10ε²`.
    pub skip_layer: bool,
}

impl RunSpec {
    pub fn new(eps: f64, initial: InitialData) -> Self {
        Self {
            eps,
            initial,
            j_modes: 32,
            n_hermite: 16,
            box_length: 2.0 * PI,
            dt: None,
            k: 2,
            compare_ddp: true,
            skip_layer: false,
        }
    }

    pub fn grid(&self) -> Result<Grid1d> {
        Grid1d::new(self.j_modes, self.box_length)
    }

    pub fn basis(&self) -> Result<HermiteBasis> {
        HermiteBasis::new(self.n_hermite)
    }

    pub fn step_size(&self) -> Result<f64> {
        let (grid, basis) = (self.grid()?, self.basis()?);
        Ok(match (self.dt, self.skip_layer) {
            (Some(dt), _) => dt,
            (None, true) => 1e-3f64.min(stability_bound(self.eps, grid, basis)),
            (None, false) => default_dt(self.eps, grid, basis),
        })
    }

    /// The record times this run actually samples.
    pub fn effective_times(&self, times: &[f64]) -> Vec<f64> {
        let start = if self.skip_layer { 10.0 * self.eps * self.eps } else { 0.0 };
        times.iter().copied().filter(|t| *t >= start).collect()
    }
}

/// Time series of one run pair, one entry per record time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub t: Vec<f64>,
    pub energy: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub mass_drift: Vec<f64>,
    pub hermite_weighted: Vec<f64>,
    /// Kinetic-to-fluid error, when the fluid run was requested.
    pub error: Option<Vec<f64>>,
    pub ddp_l2: Option<Vec<f64>>,
}

/// Run the kinetic solver and, if requested, the fluid solver from the
/// matching density, sampling both at `times`.
pub fn run_pair(spec: &RunSpec, times: &[f64]) -> Result<Series> {
    run_pair_with(spec, times, |_, _| Ok(()))
}

/// [`run_pair`] that also hands every recorded kinetic state to `hook`.
pub fn run_pair_with(
    spec: &RunSpec,
    times: &[f64],
    mut hook: impl FnMut(f64, &KineticField) -> Result<()>,
) -> Result<Series> {
    let (grid, basis) = (spec.grid()?, spec.basis()?);
    let dt = spec.step_size()?;
    let times = spec.effective_times(times);
    let f0 = spec.initial.build(grid, basis);
    let mass0 = f0.mode(0).density();

    let mut kinetic = Vec::with_capacity(times.len());
    let mut stepper = VpfpStepper::new(grid, basis, spec.eps)?;
    march(&mut stepper, f0.clone(), dt, &times, |t, f| {
        hook(t, f)?;
        kinetic.push(f.clone());
        Ok(())
    })?;

    let mut fluid = Vec::new();
    if spec.compare_ddp {
        march(&mut DdpStepper::new(grid), DensityField::from_kinetic(&f0), dt, &times, |_, n| {
            fluid.push(n.clone());
            Ok(())
        })?;
    }

    let mut out = Series { t: times.clone(), ..Default::default() };
    for f in &kinetic {
        let e = energy_monitor(f, spec.eps, spec.k)?;
        out.energy.push(e.energy);
        out.dissipation.push(e.dissipation);
        out.mass_drift.push((f.mode(0).density() - mass0).norm());
        out.hermite_weighted.push(f.hermite_weighted_sq());
    }
    if spec.compare_ddp {
        out.error = Some(
            kinetic
                .iter()
                .zip(&fluid)
                .map(|(f, n)| limit_error(f, n, spec.k))
                .collect::<Result<_>>()?,
        );
        out.ddp_l2 = Some(fluid.iter().map(|n| n.l2_norm_sq().sqrt()).collect());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub eps_list: Vec<f64>,
    pub delta0: f64,
    pub prepared: Prepared,
    pub t_max: f64,
    pub dt: Option<f64>,
    pub j_modes: usize,
    pub n_hermite: usize,
    pub box_length: f64,
    pub k: u32,
    pub seed: u64,
    pub micro_noise: f64,
    pub layer_samples: usize,
    pub bulk_samples: usize,
    pub reference_times: Vec<f64>,
    pub bulk_rate: BulkRate,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            eps_list: vec![0.4, 0.2, 0.1, 0.05],
            delta0: 1e-2,
            prepared: Prepared::Well,
            t_max: 3.0,
            dt: None,
            j_modes: 32,
            n_hermite: 16,
            box_length: 2.0 * PI,
            k: 2,
            seed: 0,
            micro_noise: 0.0,
            layer_samples: 16,
            bulk_samples: 30,
            reference_times: vec![0.5, 1.0, 2.0],
            bulk_rate: BulkRate::Free,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("eps_list must be strictly decreasing".into()));
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(Error::Config("every eps must lie in (0, 1)".into()));
        }
        if !(self.delta0 > 0.0 && self.delta0 <= 0.05) {
            return Err(Error::Config(format!("delta0 must lie in (0, 0.05], got {}", self.delta0)));
        }
        if !(self.t_max > 0.1) {
            return Err(Error::Config("t_max must exceed 0.1".into()));
        }
        if self.bulk_samples < 2 || self.layer_samples < 2 {
            return Err(Error::Config("need at least 2 layer and 2 bulk samples".into()));
        }
        if self.reference_times.iter().any(|t| !(*t > 0.0 && *t <= self.t_max)) {
            return Err(Error::Config("reference times must lie in (0, t_max]".into()));
        }
        Ok(())
    }

    pub fn initial_data(&self) -> InitialData {
        InitialData {
            prepared: self.prepared,
            delta0: self.delta0,
            micro_noise: self.micro_noise,
            seed: self.seed,
        }
    }

    pub fn run_spec(&self, eps: f64) -> RunSpec {
        RunSpec {
            dt: self.dt,
            j_modes: self.j_modes,
            n_hermite: self.n_hermite,
            box_length: self.box_length,
            k: self.k,
            ..RunSpec::new(eps, self.initial_data())
        }
    }

    /// `{0}` ∪ geometric `[ε²/4, 20ε²]` for every ε ∪ uniform `[0.1, t_max]`
    /// ∪ the reference times, sorted and deduplicated.
    pub fn t_grid(&self) -> Vec<f64> {
        let mut t = vec![0.0];
        for &eps in &self.eps_list {
            let (lo, hi) = (eps * eps / 4.0, 20.0 * eps * eps);
            let ratio = (hi / lo).powf(1.0 / (self.layer_samples - 1) as f64);
            t.extend((0..self.layer_samples).map(|i| lo * ratio.powi(i as i32)).filter(|x| *x <= self.t_max));
        }
        let h = (self.t_max - 0.1) / (self.bulk_samples - 1) as f64;
        t.extend((0..self.bulk_samples).map(|i| 0.1 + i as f64 * h));
        t.extend(&self.reference_times);
        t.sort_by(f64::total_cmp);
        t.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
        // Snap grid points that merged with a reference time onto it.
        for r in &self.reference_times {
            if let Some(x) = t.iter_mut().find(|x| (**x - r).abs() <= 1e-9 * r.max(1.0)) {
                *x = *r;
            }
        }
        t
    }
}

/// Outcome for one ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsResult {
    pub eps: f64,
    pub dt: Option<f64>,
    pub series: Option<Series>,
    pub failure: Option<String>,
    pub max_mass_drift: Option<f64>,
    pub energy_rate: Option<f64>,
    pub ddp_rate: Option<f64>,
    /// Half-life of the layer excess `err - err_well` (ill-prepared studies).
    pub layer_half_time: Option<f64>,
    /// First time `err` itself falls to half of `err(0)`.
    pub raw_half_time: Option<f64>,
    /// Error of the matching well-prepared run (ill-prepared studies).
    pub reference_error: Option<Vec<f64>>,
    /// `sup_t err / (ε e^{-t/2} + e^{-a t/ε²})` with the fitted `a`.
    pub q_sup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeAt {
    pub t: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub version: String,
    pub config: StudyConfig,
    pub t_grid: Vec<f64>,
    pub runs: Vec<EpsResult>,
    pub fit: Option<RateFit>,
    pub fit_failure: Option<String>,
    /// Layer-free fit on the bulk samples `t > 0.1`.
    pub bulk: Option<BulkFit>,
    pub slopes: Vec<SlopeAt>,
    pub layer_slope: Option<f64>,
    pub raw_layer_slope: Option<f64>,
    pub flags: Vec<Flag>,
}

impl LimitReport {
    pub fn empty(config: StudyConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            t_grid: Vec::new(),
            runs: Vec::new(),
            fit: None,
            fit_failure: None,
            bulk: None,
            slopes: Vec::new(),
            layer_slope: None,
            raw_layer_slope: None,
            flags: Vec::new(),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.flags.iter().all(|f| f.passed)
    }

    pub fn flag(&self, name: &str) -> Option<&Flag> {
        self.flags.iter().find(|f| f.name == name)
    }

    /// `(ε, t, err, model_err)` rows in ε-major order.
    pub fn long_rows(&self) -> Vec<[f64; 4]> {
        let mut rows = Vec::new();
        for run in &self.runs {
            let err = run.series.as_ref().and_then(|s| s.error.as_ref());
            for (i, &t) in self.t_grid.iter().enumerate() {
                let e = err.and_then(|v| v.get(i)).copied().unwrap_or(f64::NAN);
                let m = self.fit.as_ref().map_or(f64::NAN, |f| f.model(run.eps, t));
                rows.push([run.eps, t, e, m]);
            }
        }
        rows
    }
}

/// Slope of `ln y` against `t` over samples with `t ∈ [t0, t1]`, negated.
pub fn decay_rate(t: &[f64], y: &[f64], t0: f64, t1: f64) -> Option<f64> {
    let (x, ly): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(y)
        .filter(|(t, y)| **t >= t0 && **t <= t1 && **y > 0.0)
        .map(|(t, y)| (*t, y.ln()))
        .unzip();
    (x.len() >= 3).then(|| -linear_fit(&x, &ly).0)
}

/// First time `y` falls to `fraction × y(0)`, log-interpolated between samples.
pub fn crossing_time(t: &[f64], y: &[f64], fraction: f64) -> Option<f64> {
    let target = fraction * *y.first()?;
    if !(target > 0.0) {
        return None;
    }
    for i in 1..y.len() {
        if y[i] <= target {
            let (ya, yb) = (y[i - 1].ln(), y[i].ln());
            let w = if ya == yb { 1.0 } else { (ya - target.ln()) / (ya - yb) };
            return Some(t[i - 1] + w * (t[i] - t[i - 1]));
        }
    }
    None
}

fn run_one(cfg: &StudyConfig, eps: f64, t_grid: &[f64]) -> EpsResult {
    let spec = cfg.run_spec(eps);
    let dt = spec.step_size().ok();
    let mut result = EpsResult {
        eps,
        dt,
        series: None,
        failure: None,
        max_mass_drift: None,
        energy_rate: None,
        ddp_rate: None,
        layer_half_time: None,
        raw_half_time: None,
        reference_error: None,
        q_sup: None,
    };
    match run_pair(&spec, t_grid) {
        Ok(series) => {
            result.max_mass_drift = series.mass_drift.iter().copied().reduce(f64::max);
            let after_layer = (10.0 * eps * eps).max(0.5);
            result.energy_rate = decay_rate(&series.t, &series.energy, after_layer, cfg.t_max);
            if let Some(n) = &series.ddp_l2 {
                result.ddp_rate = decay_rate(&series.t, n, 1.0, cfg.t_max.min(5.0));
            }
            if let Some(err) = &series.error {
                result.raw_half_time = crossing_time(&series.t, err, 0.5);
                if cfg.prepared == Prepared::Ill {
                    // The well-prepared run from the same density carries the O(ε)
                    // bulk error; what the ill-prepared run adds on top is the layer.
                    let well = RunSpec {
                        initial: InitialData { prepared: Prepared::Well, ..spec.initial },
                        ..spec.clone()
                    };
                    match run_pair(&well, t_grid) {
                        Ok(w) => {
                            let reference = w.error.unwrap_or_default();
                            let excess: Vec<f64> = err.iter().zip(&reference).map(|(a, b)| a - b).collect();
                            result.layer_half_time = crossing_time(&series.t, &excess, 0.5);
                            result.reference_error = Some(reference);
                        }
                        Err(e) => result.failure = Some(format!("well-prepared reference: {e}")),
                    }
                }
            }
            result.series = Some(series);
        }
        Err(e) => result.failure = Some(e.to_string()),
    }
    result
}

fn error_at(run: &EpsResult, t_grid: &[f64], t: f64) -> Option<f64> {
    let i = t_grid.iter().position(|x| *x == t)?;
    run.series.as_ref()?.error.as_ref()?.get(i).copied()
}

/// Run every ε (in parallel), fit the rate profile and evaluate the pass flags.
pub fn run_limit_study(cfg: &StudyConfig) -> Result<LimitReport> {
    cfg.validate()?;
    let t_grid = cfg.t_grid();
    let runs: Vec<EpsResult> = cfg.eps_list.par_iter().map(|&eps| run_one(cfg, eps, &t_grid)).collect();
    let mut report = LimitReport { t_grid: t_grid.clone(), runs, ..LimitReport::empty(cfg.clone()) };

    let samples: Vec<Sample> = report
        .runs
        .iter()
        .filter_map(|r| Some((r.eps, r.series.as_ref()?.error.as_ref()?)))
        .flat_map(|(eps, err)| t_grid.iter().zip(err).map(move |(&t, &err)| Sample { eps, t, err }))
        .collect();
    match rate_fit(&samples, &FitOptions { bulk_rate: cfg.bulk_rate, ..Default::default() }) {
        Ok(fit) => report.fit = Some(fit),
        Err(e) => report.fit_failure = Some(e.to_string()),
    }
    let bulk: Vec<Sample> = samples.iter().copied().filter(|p| p.t > 0.1).collect();
    report.bulk = bulk_fit(&bulk, cfg.bulk_rate, 1e-3).ok();
    if let Some(fit) = report.fit {
        for run in &mut report.runs {
            if let Some(err) = run.series.as_ref().and_then(|s| s.error.as_ref()) {
                let eps = run.eps;
                run.q_sup = t_grid
                    .iter()
                    .zip(err)
                    .map(|(&t, &e)| e / (eps * (-0.5 * t).exp() + (-fit.a * t / (eps * eps)).exp()))
                    .reduce(f64::max);
            }
        }
    }

    let ok: Vec<&EpsResult> = report.runs.iter().filter(|r| r.failure.is_none()).collect();
    for &t in &cfg.reference_times {
        let pts: Vec<(f64, f64)> = ok.iter().filter_map(|r| Some((r.eps, error_at(r, &t_grid, t)?))).collect();
        if pts.len() >= 2 {
            let (e, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            report.slopes.push(SlopeAt { t, slope: loglog_slope(&e, &y) });
        }
    }
    let halves: Vec<(f64, f64)> = ok.iter().filter_map(|r| Some((r.eps, r.layer_half_time?))).collect();
    if halves.len() >= 2 {
        let (e, h): (Vec<f64>, Vec<f64>) = halves.into_iter().unzip();
        report.layer_slope = Some(loglog_slope(&e, &h));
    }
    let raw: Vec<(f64, f64)> = ok.iter().filter_map(|r| Some((r.eps, r.raw_half_time?))).collect();
    if raw.len() >= 2 {
        let (e, h): (Vec<f64>, Vec<f64>) = raw.into_iter().unzip();
        report.raw_layer_slope = Some(loglog_slope(&e, &h));
    }
    report.flags = evaluate_flags(&report);
    Ok(report)
}

fn flag(name: &str, passed: bool, detail: String) -> Flag {
    Flag { name: name.into(), passed, detail }
}

fn evaluate_flags(r: &LimitReport) -> Vec<Flag> {
    let cfg = &r.config;
    let mut flags = Vec::new();
    let failed: Vec<String> = r.runs.iter().filter_map(|x| Some(format!("eps={}: {}", x.eps, x.failure.as_ref()?))).collect();
    flags.push(flag("all_runs_completed", failed.is_empty(), failed.join("; ")));

    let slope_1 = r.slopes.iter().find(|s| s.t == 1.0).map(|s| s.slope);
    flags.push(flag(
        "eps_slope_t1",
        slope_1.is_some_and(|s| (s - 1.0).abs() <= 0.2),
        format!("slope at t=1: {slope_1:?}"),
    ));
    if cfg.prepared == Prepared::Well {
        let all = !r.slopes.is_empty() && r.slopes.iter().all(|s| (s.slope - 1.0).abs() <= 0.2);
        let listing: Vec<String> = r.slopes.iter().map(|s| format!("t={}: {:.4}", s.t, s.slope)).collect();
        flags.push(flag("eps_slope_reference_times", all, listing.join(", ")));

        // No initial layer: sup_{t ≤ 0.1} err ≤ C₁ ε, C₁ from the bulk fit on t > 0.1.
        let c1 = r.bulk.map(|f| f.c1);
        let worst = r
            .runs
            .iter()
            .filter_map(|run| {
                let err = run.series.as_ref()?.error.as_ref()?;
                let sup = r.t_grid.iter().zip(err).filter(|(t, _)| **t <= 0.1).map(|(_, e)| *e).fold(0.0, f64::max);
                Some(sup / (c1? * run.eps))
            })
            .fold(f64::NAN, f64::max);
        flags.push(flag(
            "no_initial_layer",
            worst <= 1.0,
            format!("max over eps of sup_(t<=0.1) err / (C1 eps) = {worst:.4}, C1 = {c1:?}"),
        ));

        let ratios: Vec<f64> = r
            .runs
            .iter()
            .filter_map(|run| {
                let err = run.series.as_ref()?.error.as_ref()?;
                Some(r.t_grid.iter().zip(err).map(|(t, e)| e / (run.eps * (-0.5 * t).exp())).fold(0.0, f64::max))
            })
            .collect();
        let spread = ratios.iter().copied().fold(f64::NAN, f64::max) / ratios.iter().copied().fold(f64::NAN, f64::min);
        flags.push(flag(
            "profile_bounded",
            spread <= 2.0,
            format!("sup_t err/(eps e^(-t/2)) per eps: {ratios:?}; max/min = {spread:.4}"),
        ));
    } else {
        let initial: Vec<f64> = r.runs.iter().filter_map(|run| Some(run.series.as_ref()?.error.as_ref()?[0])).collect();
        let spread = initial.iter().copied().fold(f64::NAN, f64::max) / initial.iter().copied().fold(f64::NAN, f64::min);
        flags.push(flag(
            "initial_error_eps_independent",
            (spread - 1.0).abs() <= 1e-12,
            format!("err(0) per eps: {initial:?}"),
        ));
        flags.push(flag(
            "layer_half_time_slope",
            r.layer_slope.is_some_and(|s| (s - 2.0).abs() <= 0.3),
            format!(
                "excess slope {:?}, half-times {:?}; raw slope {:?}, half-times {:?}",
                r.layer_slope,
                r.runs.iter().map(|x| x.layer_half_time).collect::<Vec<_>>(),
                r.raw_layer_slope,
                r.runs.iter().map(|x| x.raw_half_time).collect::<Vec<_>>()
            ),
        ));
    }

    let drift = r.runs.iter().filter_map(|x| x.max_mass_drift).fold(0.0, f64::max);
    flags.push(flag("mass_drift", drift <= 1e-10, format!("max drift {drift:.3e}")));
    let e_rate = r.runs.iter().filter_map(|x| x.energy_rate).fold(f64::NAN, f64::min);
    flags.push(flag("energy_decay_rate", e_rate >= 0.5, format!("min fitted rate {e_rate:.4}")));
    let n_rate = r.runs.iter().filter_map(|x| x.ddp_rate).fold(f64::NAN, f64::min);
    flags.push(flag("ddp_decay_rate", n_rate >= 0.5, format!("min fitted rate {n_rate:.4}")));
    flags.push(flag(
        "rate_fit",
        r.fit.is_some_and(|f| f.a > 0.0 && f.c1.is_finite()),
        match (&r.fit, &r.fit_failure) {
            (Some(f), _) => format!("C1={:.4e} C2={:.4e} a={:.4} b={:.4} residual={:.4}", f.c1, f.c2, f.a, f.b, f.residual),
            (None, Some(e)) => e.clone(),
            (None, None) => "no data".into(),
        },
    ));
    flags
}
