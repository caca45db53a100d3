//! `kinetic-limit <subcommand>`.

use std::f64::consts::PI;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::config::ConfigFile;
use super::fit::BulkRate;
use super::report::{emit_report, read_report, write_atomic, write_csv, ReportPaths};
use super::study::{run_limit_study, run_pair_with, LimitReport, RunSpec, StudyConfig};
use super::sweep::{linear_sweep, LinearSweepConfig};
use crate::ddp::DdpStepper;
use crate::error::{Error, Result};
use crate::field::{DensityField, Grid1d, KineticField};
use crate::hermite::HermiteBasis;
use crate::linear::HkPWeight;
use crate::spectral::{direct_spectrum, solve_dispersion, FluidSettings};
use crate::timeline::march;
use crate::vpfp::{poisson_from_density, InitialData, Prepared};

/// Exit code of `limit-study --assert` when a flag fails.
pub const EXIT_ASSERT_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "kinetic-limit", version, about = "Kinetic-to-fluid limit laboratory")]
pub struct Cli {
    /// key = value file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dense spectrum of the symbol at one (s, eps).
    Spectrum(SpectrumArgs),
    /// Fluid eigenvalue from the dispersion fixed point, against the dense solve.
    Dispersion(DispersionArgs),
    /// Single-mode fluid-approximation errors over an eps sweep.
    EvolveLinear(EvolveLinearArgs),
    /// One nonlinear kinetic run.
    EvolveNonlinear(EvolveNonlinearArgs),
    /// One drift-diffusion run.
    EvolveDdp(EvolveDdpArgs),
    /// Kinetic against drift-diffusion over an eps sweep.
    LimitStudy(LimitStudyArgs),
    /// Re-emit CSV and plot data from a saved JSON report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub n_modes: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DispersionArgs {
    #[arg(long, value_delimiter = ',')]
    pub s_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    #[arg(long)]
    pub n_modes: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvolveLinearArgs {
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub t_samples: Option<usize>,
    #[arg(long)]
    pub prepared: Option<Prepared>,
    #[arg(long)]
    pub order: Option<u8>,
    #[arg(long)]
    pub n_modes: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvolveNonlinearArgs {
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long)]
    pub prepared: Option<Prepared>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub t_samples: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub n_modes: Option<usize>,
    #[arg(long)]
    pub j_modes: Option<usize>,
    #[arg(long)]
    pub box_length: Option<f64>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub micro_noise: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write the field every this many records.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    #[arg(long)]
    pub compare_ddp: bool,
    #[arg(long)]
    pub skip_layer: bool,
}

#[derive(Debug, Args)]
pub struct EvolveDdpArgs {
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub t_samples: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub j_modes: Option<usize>,
    #[arg(long)]
    pub box_length: Option<f64>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LimitStudyArgs {
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long)]
    pub prepared: Option<Prepared>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub n_modes: Option<usize>,
    #[arg(long)]
    pub j_modes: Option<usize>,
    #[arg(long)]
    pub box_length: Option<f64>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub micro_noise: Option<f64>,
    /// Times at which the eps-slope is reported.
    #[arg(long, value_delimiter = ',')]
    pub reference_times: Option<Vec<f64>>,
    #[arg(long)]
    pub layer_samples: Option<usize>,
    #[arg(long)]
    pub bulk_samples: Option<usize>,
    /// Bulk decay rate in the fit; omit to fit it.
    #[arg(long)]
    pub bulk_rate: Option<f64>,
    /// Base name of the report files.
    #[arg(long)]
    pub stem: Option<String>,
    /// Exit with code 2 if any pass flag fails.
    #[arg(long = "assert")]
    pub assert_flags: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub stem: Option<String>,
}

struct Context {
    file: ConfigFile,
    seed: u64,
    out_dir: PathBuf,
}

impl Context {
    fn output(&self, cli: Option<PathBuf>, default_name: &str) -> Result<PathBuf> {
        let p = match cli {
            Some(p) => p,
            None => PathBuf::from(self.file.get::<String>("output")?.unwrap_or_else(|| default_name.into())),
        };
        Ok(if p.is_absolute() { p } else { self.out_dir.join(p) })
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(cli: Cli) -> Result<i32> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let seed = file.pick(cli.seed, "seed", 0u64)?;
    let threads = file.pick(cli.threads, "threads", 0usize)?;
    let out_dir = match cli.output_dir {
        Some(p) => p,
        None => PathBuf::from(file.get::<String>("output_dir")?.unwrap_or_else(|| ".".into())),
    };
    let ctx = Context { file, seed, out_dir };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Spectrum(a) => spectrum(&ctx, a),
        Command::Dispersion(a) => dispersion(&ctx, a),
        Command::EvolveLinear(a) => evolve_linear(&ctx, a),
        Command::EvolveNonlinear(a) => evolve_nonlinear(&ctx, a),
        Command::EvolveDdp(a) => evolve_ddp(&ctx, a),
        Command::LimitStudy(a) => limit_study(&ctx, a),
        Command::Report(a) => report(&ctx, a),
    })
}

fn spectrum(ctx: &Context, a: SpectrumArgs) -> Result<i32> {
    let f = &ctx.file;
    let s = f.pick(a.s, "s", 1.0)?;
    let eps = f.pick(a.eps, "eps", 0.05)?;
    let basis = HermiteBasis::new(f.pick(a.n_modes, "n_modes", 48)?)?;
    let eig = direct_spectrum(s, eps, basis)?;
    let rows: Vec<Vec<f64>> = eig.iter().enumerate().map(|(i, z)| vec![i as f64, z.re, z.im]).collect();
    let path = ctx.output(a.output, "spectrum.csv")?;
    write_csv(&path, &["index", "re", "im"], &rows)?;
    println!("top eigenvalue {:.12e} {:+.3e}i, wrote {}", eig[0].re, eig[0].im, path.display());
    Ok(0)
}

fn dispersion(ctx: &Context, a: DispersionArgs) -> Result<i32> {
    let f = &ctx.file;
    let s_list = f.pick_list(a.s_list, "s_list", vec![0.5, 1.0, 2.0])?;
    let eps_list = f.pick_list(a.eps_list, "eps_list", vec![0.1, 0.05, 0.01, 1e-3])?;
    let basis = HermiteBasis::new(f.pick(a.n_modes, "n_modes", 48)?)?;
    let settings = FluidSettings::new(basis);
    let mut rows = Vec::new();
    for &s in &s_list {
        for &eps in &eps_list {
            match solve_dispersion(s, eps, &settings) {
                Ok(sol) => {
                    let top = direct_spectrum(s, eps, basis)?[0] / (eps * eps);
                    rows.push(vec![s, eps, sol.z.re, sol.z.im, sol.residual, sol.iterations as f64, top.re, top.im]);
                }
                Err(e) => eprintln!("skipping s={s} eps={eps}: {e}"),
            }
        }
    }
    let path = ctx.output(a.output, "dispersion.csv")?;
    write_csv(
        &path,
        &["s", "eps", "re_z", "im_z", "residual", "iterations", "top_direct_eig_re", "top_direct_eig_im"],
        &rows,
    )?;
    println!("{} rows, wrote {}", rows.len(), path.display());
    Ok(0)
}

fn evolve_linear(ctx: &Context, a: EvolveLinearArgs) -> Result<i32> {
    let f = &ctx.file;
    let d = LinearSweepConfig::default();
    let cfg = LinearSweepConfig {
        s: f.pick(a.s, "s", d.s)?,
        eps_list: f.pick_list(a.eps_list, "eps_list", d.eps_list.clone())?,
        t_max: f.pick(a.t_max, "t_max", d.t_max)?,
        t_samples: f.pick(a.t_samples, "t_samples", d.t_samples)?,
        prepared: f.pick(a.prepared, "prepared", d.prepared)?,
        order: f.pick(a.order, "order", d.order)?,
        n_modes: f.pick(a.n_modes, "n_modes", d.n_modes)?,
        bulk_rate: d.bulk_rate,
    };
    let sweep = linear_sweep(&cfg)?;
    let (fa, c1, c2) = sweep.fit.map_or((f64::NAN, f64::NAN, f64::NAN), |x| (x.a, x.c1, x.c2));
    let mut rows = Vec::new();
    for (i, &eps) in cfg.eps_list.iter().enumerate() {
        for (j, &t) in sweep.t_grid.iter().enumerate() {
            let model = sweep.fit.map_or(f64::NAN, |x| x.model(eps, t));
            rows.push(vec![t, eps, sweep.errors[i][j], model, fa, c1, c2]);
        }
    }
    let path = ctx.output(a.output, "evolve_linear.csv")?;
    write_csv(&path, &["t", "eps", "error", "model_error", "fitted_a", "fitted_C1", "fitted_C2"], &rows)?;
    match (&sweep.fit, &sweep.fit_failure) {
        (Some(x), _) => println!(
            "fit C1={:.4e} C2={:.4e} a={:.4} b={:.4} residual={:.3}",
            x.c1, x.c2, x.a, x.b, x.residual
        ),
        (None, Some(e)) => eprintln!("fit failed: {e}"),
        _ => {}
    }
    println!("wrote {}", path.display());
    Ok(0)
}

#[derive(Serialize)]
struct Checkpoint {
    t: f64,
    eps: Option<f64>,
    j_modes: usize,
    n_hermite: usize,
    box_length: f64,
    /// `[re, im]` per Fourier mode (`j = -J..=J`) and Hermite index.
    modes: Vec<Vec<[f64; 2]>>,
}

fn write_checkpoint(dir: &Path, name: &str, cp: &Checkpoint) -> Result<()> {
    write_atomic(&dir.join(name), &serde_json::to_vec(cp)?)
}

fn kinetic_checkpoint(t: f64, eps: f64, f: &KineticField) -> Checkpoint {
    let g = f.grid();
    Checkpoint {
        t,
        eps: Some(eps),
        j_modes: g.j_max,
        n_hermite: f.basis().n_modes(),
        box_length: g.box_length,
        modes: f.modes().iter().map(|m| m.as_slice().iter().map(|c| [c.re, c.im]).collect()).collect(),
    }
}

fn uniform_times(t_max: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect()
}

fn evolve_nonlinear(ctx: &Context, a: EvolveNonlinearArgs) -> Result<i32> {
    let f = &ctx.file;
    let eps = f.pick(a.eps, "eps", 0.1)?;
    let initial = InitialData {
        prepared: f.pick(a.prepared, "prepared", Prepared::Well)?,
        delta0: f.pick(a.delta0, "delta0", 1e-2)?,
        micro_noise: f.pick(a.micro_noise, "micro_noise", 0.0)?,
        seed: ctx.seed,
    };
    let spec = RunSpec {
        j_modes: f.pick(a.j_modes, "j_modes", 32)?,
        n_hermite: f.pick(a.n_modes, "n_modes", 16)?,
        box_length: f.pick(a.box_length, "box_length", 2.0 * PI)?,
        dt: match a.dt {
            Some(dt) => Some(dt),
            None => f.get("dt")?,
        },
        k: f.pick(a.k, "k", 2)?,
        compare_ddp: f.pick_flag(a.compare_ddp, "compare_ddp")?,
        skip_layer: f.pick_flag(a.skip_layer, "skip_layer")?,
        ..RunSpec::new(eps, initial)
    };
    let times = uniform_times(f.pick(a.t_max, "t_max", 1.0)?, f.pick(a.t_samples, "t_samples", 101)?);
    let every = f.pick(a.checkpoint_every, "checkpoint_every", 0usize)?;
    let mut count = 0usize;
    let series = run_pair_with(&spec, &times, |t, field| {
        if every > 0 && count % every == 0 {
            write_checkpoint(&ctx.out_dir, &format!("checkpoint_{count:06}.json"), &kinetic_checkpoint(t, eps, field))?;
        }
        count += 1;
        Ok(())
    })?;
    let mut header = vec!["t", "E", "D", "mass_drift"];
    if spec.compare_ddp {
        header.push("hkp_error_vs_ddp");
    }
    let rows: Vec<Vec<f64>> = (0..series.t.len())
        .map(|i| {
            let mut r = vec![series.t[i], series.energy[i], series.dissipation[i], series.mass_drift[i]];
            if let Some(e) = &series.error {
                r.push(e[i]);
            }
            r
        })
        .collect();
    let path = ctx.output(a.output, "evolve_nonlinear.csv")?;
    write_csv(&path, &header, &rows)?;
    println!("dt {:.4e}, {} records, wrote {}", spec.step_size()?, rows.len(), path.display());
    Ok(0)
}

fn evolve_ddp(ctx: &Context, a: EvolveDdpArgs) -> Result<i32> {
    let f = &ctx.file;
    let grid = Grid1d::new(f.pick(a.j_modes, "j_modes", 32)?, f.pick(a.box_length, "box_length", 2.0 * PI)?)?;
    let delta0 = f.pick(a.delta0, "delta0", 1e-2)?;
    let dt = f.pick(a.dt, "dt", 1e-3)?;
    let k = f.pick(a.k, "k", 2)?;
    let times = uniform_times(f.pick(a.t_max, "t_max", 5.0)?, f.pick(a.t_samples, "t_samples", 101)?);
    let every = f.pick(a.checkpoint_every, "checkpoint_every", 0usize)?;
    let n0 = DensityField::from_kinetic(&InitialData::new(Prepared::Well, delta0).build(grid, HermiteBasis::new(8)?));
    let w = HkPWeight { k };
    let mut rows = Vec::new();
    let mut err = None;
    march(&mut DdpStepper::new(grid), n0, dt, &times, |t, n| {
        let e = poisson_from_density(grid, &n.n_hat)?;
        let hk: f64 = n
            .n_hat
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let xi = grid.wavenumber(i);
                let field = if xi == 0.0 { 0.0 } else { c.norm_sqr() / (xi * xi) };
                w.at(xi) * (c.norm_sqr() + field)
            })
            .sum();
        if every > 0 && rows.len() % every == 0 {
            let cp = Checkpoint {
                t,
                eps: None,
                j_modes: grid.j_max,
                n_hermite: 1,
                box_length: grid.box_length,
                modes: n.n_hat.iter().map(|c| vec![[c.re, c.im]]).collect(),
                    };
            if let Err(e) = write_checkpoint(&ctx.out_dir, &format!("ddp_checkpoint_{:06}.json", rows.len()), &cp) {
                err = Some(e);
            }
        }
        rows.push(vec![t, n.l2_norm_sq().sqrt(), e.l2_norm_sq().sqrt(), hk]);
        Ok(())
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let path = ctx.output(a.output, "evolve_ddp.csv")?;
    write_csv(&path, &["t", "n_l2", "grad_phi_l2", "hkp_norm_sq"], &rows)?;
    println!("{} records, wrote {}", rows.len(), path.display());
    Ok(0)
}

pub fn study_config(file: &ConfigFile, a: &LimitStudyArgs, seed: u64) -> Result<StudyConfig> {
    let d = StudyConfig::default();
    Ok(StudyConfig {
        eps_list: file.pick_list(a.eps_list.clone(), "eps_list", d.eps_list.clone())?,
        delta0: file.pick(a.delta0, "delta0", d.delta0)?,
        prepared: file.pick(a.prepared, "prepared", d.prepared)?,
        t_max: file.pick(a.t_max, "t_max", d.t_max)?,
        dt: match a.dt {
            Some(dt) => Some(dt),
            None => file.get("dt")?,
        },
        j_modes: file.pick(a.j_modes, "j_modes", d.j_modes)?,
        n_hermite: file.pick(a.n_modes, "n_modes", d.n_hermite)?,
        box_length: file.pick(a.box_length, "box_length", d.box_length)?,
        k: file.pick(a.k, "k", d.k)?,
        seed,
        micro_noise: file.pick(a.micro_noise, "micro_noise", d.micro_noise)?,
        reference_times: file.pick_list(a.reference_times.clone(), "reference_times", d.reference_times.clone())?,
        layer_samples: file.pick(a.layer_samples, "layer_samples", d.layer_samples)?,
        bulk_samples: file.pick(a.bulk_samples, "bulk_samples", d.bulk_samples)?,
        bulk_rate: match a.bulk_rate {
            Some(b) => BulkRate::Fixed(b),
            None => file.get::<f64>("bulk_rate")?.map_or(d.bulk_rate, BulkRate::Fixed),
        },
        ..d
    })
}

fn print_flags(report: &LimitReport) {
    for f in &report.flags {
        println!("[{}] {}: {}", if f.passed { "PASS" } else { "FAIL" }, f.name, f.detail);
    }
}

fn limit_study(ctx: &Context, a: LimitStudyArgs) -> Result<i32> {
    let cfg = study_config(&ctx.file, &a, ctx.seed)?;
    let assert_flags = ctx.file.pick_flag(a.assert_flags, "assert")?;
    let stem = ctx.file.pick(a.stem.clone(), "stem", format!("limit_{}", cfg.prepared))?;
    let report = run_limit_study(&cfg)?;
    let written = emit_report(&report, &ReportPaths::new(&ctx.out_dir, stem))?;
    print_flags(&report);
    println!("wrote {} files to {}", written.len(), ctx.out_dir.display());
    Ok(if assert_flags && !report.all_passed() { EXIT_ASSERT_FAILED } else { 0 })
}

fn report(ctx: &Context, a: ReportArgs) -> Result<i32> {
    let report = read_report(&a.input)?;
    let stem = match a.stem {
        Some(s) => s,
        None => a
            .input
            .file_stem()
            .and_then(|s| s.to_str())
            .map(String::from)
            .ok_or_else(|| Error::Config("cannot derive a stem from the input path".into()))?,
    };
    let written = emit_report(&report, &ReportPaths::new(&ctx.out_dir, stem))?;
    print_flags(&report);
    println!("wrote {} files to {}", written.len(), ctx.out_dir.display());
    Ok(0)
}
