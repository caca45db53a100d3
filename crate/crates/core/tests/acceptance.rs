//! Acceptance suite. Runs every criterion, prints one line each and exits
//! nonzero if any of them fails.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use kinetic_limit::harness::study::{run_limit_study, LimitReport, StudyConfig};
use kinetic_limit::hermite::{project_p1, HermiteBasis, VelocityCoeffs};
use kinetic_limit::linalg::{self, loglog_slope};
use kinetic_limit::linear::{first_order_error, second_order_error, semigroup_matrix};
use kinetic_limit::spectral::{
    count_above, direct_spectrum, leading_eigenpair, remainder_decay_rate, semigroup_split, solve_dispersion,
    FluidSettings,
};
use kinetic_limit::symbol::{assemble_b, WeightedInner};
use kinetic_limit::vpfp::Prepared;
use kinetic_limit::{Complex, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

const S_VALUES: [f64; 3] = [0.5, 1.0, 2.0];

struct Outcome {
    passed: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Self { passed, detail, notes: Vec::new() }
    }

    fn note(mut self, text: String) -> Self {
        self.notes.push(text);
        self
    }
}

fn settings(n: usize) -> FluidSettings {
    FluidSettings::new(HermiteBasis::new(n).expect("basis"))
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let r = (hi / lo).powf(1.0 / (n - 1) as f64);
    (0..n).map(|i| lo * r.powi(i as i32)).collect()
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ")
}

// Gauss quadrature for the standard Gaussian weight (Golub-Welsch).
fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    // Christoffel weights keep full relative accuracy in the tails, unlike
    // squared eigenvector components.
    let weights = nodes
        .iter()
        .map(|&v| {
            let (mut prev, mut cur, mut sum) = (0.0, 1.0, 1.0);
            for k in 1..m {
                let next = (v * cur - ((k - 1) as f64).sqrt() * prev) / (k as f64).sqrt();
                prev = cur;
                cur = next;
                sum += cur * cur;
            }
            1.0 / sum
        })
        .collect();
    (nodes, weights)
}

// Matrix of the Fokker-Planck operator by quadrature of its weak form
// `-(M ∂h_m, ∂h_n)` with orthonormal Hermite polynomials `h_n`.
fn quadrature_l(n: usize) -> DMatrix<f64> {
    let (nodes, weights) = gauss_hermite(n + 16);
    let mut out = DMatrix::<f64>::zeros(n, n);
    for (&v, &w) in nodes.iter().zip(&weights) {
        let mut h = vec![0.0; n];
        let mut dh = vec![0.0; n];
        h[0] = 1.0;
        if n > 1 {
            h[1] = v;
            dh[1] = 1.0;
        }
        for k in 1..n - 1 {
            let norm = ((k + 1) as f64).sqrt();
            let back = (k as f64).sqrt();
            h[k + 1] = (v * h[k] - back * h[k - 1]) / norm;
            dh[k + 1] = (h[k] + v * dh[k] - back * dh[k - 1]) / norm;
        }
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] -= w * dh[i] * dh[j];
            }
        }
    }
    out
}

fn criterion_1() -> Result<Outcome> {
    let n = 48;
    let l = HermiteBasis::new(n)?.l_matrix();
    let mut off = 0.0f64;
    let mut diag = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                diag = diag.max((l[(i, i)] + i as f64).abs());
            } else {
                off = off.max(l[(i, j)].abs());
            }
        }
    }
    let oracle = (quadrature_l(n) - &l).abs().max();
    Ok(Outcome::new(
        off < 1e-12 && diag == 0.0 && oracle < 1e-8,
        format!("max off-diagonal {off:.1e}, diagonal defect {diag:.1e}, quadrature oracle gap {oracle:.1e}"),
    ))
}

fn criterion_2(n: usize) -> Result<(Outcome, Vec<f64>)> {
    let cfg = settings(n);
    let mut gaps = Vec::new();
    for &s in &S_VALUES {
        let z = solve_dispersion(s, 1e-8, &cfg)?.z;
        gaps.push((z + Complex::new(1.0 + s * s, 0.0)).norm());
    }
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    Ok((Outcome::new(worst <= 1e-8, format!("max |z + (1+s^2)| = {worst:.2e} at eps = 1e-8")), gaps))
}

fn criterion_3(n: usize) -> Result<(Outcome, Vec<f64>)> {
    let cfg = settings(n);
    let eps = geometric(1e-3, 10f64.powf(-1.5), 7);
    let mut slopes = Vec::new();
    for &s in &S_VALUES {
        let gaps = eps
            .iter()
            .map(|&e| Ok((solve_dispersion(s, e, &cfg)?.z + Complex::new(1.0 + s * s, 0.0)).norm()))
            .collect::<Result<Vec<_>>>()?;
        slopes.push(loglog_slope(&eps, &gaps));
    }
    let passed = slopes.iter().all(|&k| within(k, 2.0, 0.15));
    Ok((Outcome::new(passed, format!("slopes [{}] for s = 0.5, 1, 2 (target 2 +- 0.15)", fmt_list(&slopes))), slopes))
}

fn criterion_4(n: usize) -> Result<(Outcome, Vec<f64>)> {
    let (s, eps) = (1.0, 0.05);
    let cfg = settings(n);
    let lambda_fp = solve_dispersion(s, eps, &cfg)?.z * (eps * eps);
    let spectrum = direct_spectrum(s, eps, cfg.basis)?;
    let gap = (lambda_fp - spectrum[0]).norm();
    let above = count_above(&spectrum, -0.5);
    let second = spectrum.get(1).map_or(f64::NAN, |z| z.re);
    Ok((
        Outcome::new(
            gap <= 1e-8 && above == 1,
            format!(
                "|lambda_fp - lambda_dense| = {gap:.2e}, eigenvalues above -1/2: {above}, next Re = {second:.4}"
            ),
        ),
        vec![lambda_fp.re, lambda_fp.im],
    ))
}

// Eigenvector of the top eigenvalue by inverse iteration, normalized with the
// bilinear weighted pairing and a nonnegative density coefficient.
fn dense_eigenvector(s: f64, eps: f64, basis: HermiteBasis) -> Result<VelocityCoeffs> {
    let b = assemble_b(s, eps, basis)?;
    let lambda = direct_spectrum(s, eps, basis)?[0];
    let n = basis.n_modes();
    let shift = lambda + Complex::new(1e-7, 0.0);
    let a = &b.entries - DMatrix::<Complex>::identity(n, n) * shift;
    let mut x = DVector::<Complex>::from_element(n, Complex::new(1.0, 0.0));
    for _ in 0..6 {
        x = linalg::solve(&a, &x)
            .ok_or_else(|| kinetic_limit::Error::Precondition("shifted symbol is singular".into()))?;
        let scale = x.norm();
        x /= Complex::new(scale, 0.0);
    }
    let v = VelocityCoeffs::from_vec(basis, x.iter().copied().collect())?;
    let pairing = WeightedInner::new(s)?.pair(&v, &v);
    let mut v = v.scale(Complex::new(1.0, 0.0) / pairing.sqrt());
    if v.density().re < 0.0 {
        v = v.scale(Complex::new(-1.0, 0.0));
    }
    Ok(v)
}

fn eigenfunction_defect(s: f64, eps: f64, cfg: &FluidSettings) -> Result<f64> {
    let psi = leading_eigenpair(s, eps, cfg)?.psi0;
    let lead = VelocityCoeffs::unit(cfg.basis, 1).scale(Complex::new(0.0, eps * (1.0 + s * s).sqrt()));
    Ok(project_p1(&psi).add(&lead).norm())
}

fn criterion_5(n: usize) -> Result<(Outcome, Vec<f64>)> {
    let cfg = settings(n);
    let eps = geometric(1e-3, 10f64.powf(-1.5), 7);
    let mut slopes = Vec::new();
    for &s in &S_VALUES {
        let defects = eps.iter().map(|&e| eigenfunction_defect(s, e, &cfg)).collect::<Result<Vec<_>>>()?;
        slopes.push(loglog_slope(&eps, &defects));
    }
    let mut oracle = 0.0f64;
    for &s in &S_VALUES {
        let eps = 0.05;
        let psi = leading_eigenpair(s, eps, &cfg)?.psi0;
        let dense = dense_eigenvector(s, eps, cfg.basis)?;
        oracle = oracle.max(psi.sub(&dense).norm());
    }
    let passed = slopes.iter().all(|&k| within(k, 2.0, 0.2)) && oracle < 1e-8;
    Ok((
        Outcome::new(
            passed,
            format!(
                "slopes [{}] for s = 0.5, 1, 2 (target 2 +- 0.2), dense eigenvector gap {oracle:.1e}",
                fmt_list(&slopes)
            ),
        ),
        slopes,
    ))
}

fn sample_profile(basis: HermiteBasis) -> VelocityCoeffs {
    let coeffs: Vec<Complex> = (0..basis.n_modes())
        .map(|k| {
            let k = k as f64;
            Complex::new((0.7 * k + 0.3).cos(), (1.3 * k).sin()) * (-0.15 * k).exp()
        })
        .collect();
    VelocityCoeffs::from_vec(basis, coeffs).expect("profile")
}

fn criterion_6() -> Result<Outcome> {
    let cfg = settings(48);
    let f = sample_profile(cfg.basis);
    let times: Vec<f64> = (0..=40).map(|i| 0.05 * i as f64).collect();
    let mut worst_rise = f64::NEG_INFINITY;
    let mut worst_idem = 0.0f64;
    for &s in &S_VALUES {
        let w = WeightedInner::new(s)?;
        for eps in [0.1, 0.05] {
            let step = semigroup_matrix(s, eps, times[1], cfg.basis)?;
            let mut state = f.as_dvector().clone();
            let mut prev = w.norm(&f);
            for _ in 1..times.len() {
                state = &step * state;
                let now = w.norm(&VelocityCoeffs::from_vec(cfg.basis, state.iter().copied().collect())?);
                worst_rise = worst_rise.max(now - prev);
                prev = now;
            }
            let (p1, _) = semigroup_split(&f, s, eps, 0.0, &cfg)?;
            let (pp1, _) = semigroup_split(&p1, s, eps, 0.0, &cfg)?;
            worst_idem = worst_idem.max(w.norm(&pp1.sub(&p1)));
        }
    }
    Ok(Outcome::new(
        worst_rise <= 1e-10 && worst_idem <= 1e-10,
        format!("largest norm increase {worst_rise:.1e}, projector defect {worst_idem:.1e}"),
    ))
}

fn criterion_7() -> Result<Outcome> {
    let cfg = settings(48);
    let f = sample_profile(cfg.basis);
    let taus: Vec<f64> = (0..=16).map(|i| 4.0 + 1.0 * i as f64).collect();
    let mut rates = Vec::new();
    let mut deviations = Vec::new();
    for eps in [0.1, 0.05] {
        let r = remainder_decay_rate(&f, 1.0, eps, &taus, &cfg)?;
        rates.push(r.a_measured);
        deviations.push(r.max_log_deviation);
    }
    let spread = (rates[0] - rates[1]).abs() / rates[0].min(rates[1]);
    let span = rates[0] * (taus[taus.len() - 1] - taus[0]);
    let linear = deviations.iter().all(|&d| d <= 0.05 * span);

    let eps_n0 = [0.1, 0.05, 0.025, 0.0125];
    let e0 = VelocityCoeffs::unit(cfg.basis, 0);
    let remainders = eps_n0
        .iter()
        .map(|&eps| {
            let (_, s2) = semigroup_split(&e0, 1.0, eps, 0.0, &cfg)?;
            Ok(WeightedInner::new(1.0)?.norm(&s2))
        })
        .collect::<Result<Vec<_>>>()?;
    let n0_slope = loglog_slope(&eps_n0, &remainders);

    let passed = rates.iter().all(|&a| a > 0.1) && spread <= 0.3 && linear && within(n0_slope, 1.0, 0.2);
    Ok(Outcome::new(
        passed,
        format!(
            "a = [{}] at eps = 0.1, 0.05 (spread {:.1}%), max log deviation [{}], N0 remainder slope {n0_slope:.3}",
            fmt_list(&rates),
            100.0 * spread,
            fmt_list(&deviations)
        ),
    ))
}

const SWEEP_EPS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

fn criterion_8() -> Result<Outcome> {
    let basis = HermiteBasis::new(48)?;
    let s = 1.0;
    let ill = VelocityCoeffs::unit(basis, 0).add(&VelocityCoeffs::unit(basis, 2));
    let mut at_one = Vec::new();
    let mut at_zero = Vec::new();
    for &eps in &SWEEP_EPS {
        let e = first_order_error(&ill, s, eps, &[0.0, 1.0])?;
        at_zero.push(e[0]);
        at_one.push(e[1]);
    }
    let slope = loglog_slope(&SWEEP_EPS, &at_one);
    let zero_spread = at_zero.iter().copied().fold(0.0, f64::max) / at_zero.iter().copied().fold(f64::INFINITY, f64::min);
    let zero_min = at_zero.iter().copied().fold(f64::INFINITY, f64::min);

    let well = VelocityCoeffs::unit(basis, 0);
    let mut t_grid: Vec<f64> = (0..=60).map(|i| 0.05 * i as f64).collect();
    for &eps in &SWEEP_EPS {
        t_grid.extend(geometric(eps * eps / 4.0, 20.0 * eps * eps, 12));
    }
    t_grid.sort_by(f64::total_cmp);
    let mut sups = Vec::new();
    for &eps in &SWEEP_EPS {
        let e = first_order_error(&well, s, eps, &t_grid)?;
        let sup = t_grid.iter().zip(&e).map(|(&t, &err)| err / (eps * (-t / 2.0).exp())).fold(0.0, f64::max);
        sups.push(sup);
    }
    let sup_ratio = sups.iter().copied().fold(0.0, f64::max) / sups.iter().copied().fold(f64::INFINITY, f64::min);

    let passed = within(slope, 1.0, 0.15) && zero_spread <= 1.0 + 1e-6 && zero_min >= 0.5 && sup_ratio <= 2.0;
    Ok(Outcome::new(
        passed,
        format!(
            "ill slope at t=1 {slope:.3}, err(0) in [{zero_min:.4}, {:.4}], well sup err/(eps e^-t/2) = [{}] (max/min {sup_ratio:.3})",
            zero_min * zero_spread,
            fmt_list(&sups)
        ),
    ))
}

fn criterion_9() -> Result<Outcome> {
    let basis = HermiteBasis::new(48)?;
    let f0 = VelocityCoeffs::unit(basis, 1);
    let errs = SWEEP_EPS
        .iter()
        .map(|&eps| Ok(second_order_error(&f0, 1.0, eps, &[1.0])?[0]))
        .collect::<Result<Vec<_>>>()?;
    let slope = loglog_slope(&SWEEP_EPS, &errs);
    Ok(Outcome::new(
        within(slope, 1.0, 0.2),
        format!("slope at t=1 {slope:.3} (target 1 +- 0.2), errors [{}]", errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", ")),
    ))
}

fn study(prepared: Prepared) -> &'static LimitReport {
    static WELL: OnceLock<LimitReport> = OnceLock::new();
    static ILL: OnceLock<LimitReport> = OnceLock::new();
    let cell = match prepared {
        Prepared::Well => &WELL,
        Prepared::Ill => &ILL,
    };
    cell.get_or_init(|| {
        let cfg = StudyConfig { prepared, ..StudyConfig::default() };
        run_limit_study(&cfg).expect("limit study")
    })
}

fn slope_at(report: &LimitReport, t: f64) -> f64 {
    report.slopes.iter().find(|s| (s.t - t).abs() < 1e-12).map_or(f64::NAN, |s| s.slope)
}

fn flag_passed(report: &LimitReport, name: &str) -> bool {
    report.flag(name).is_some_and(|f| f.passed)
}

fn criterion_10() -> Result<Outcome> {
    let well = study(Prepared::Well);
    let ill = study(Prepared::Ill);
    let (sw, si) = (slope_at(well, 1.0), slope_at(ill, 1.0));
    let no_layer = flag_passed(well, "no_initial_layer");
    let layer = flag_passed(ill, "layer_half_time_slope");
    let completed = flag_passed(well, "all_runs_completed") && flag_passed(ill, "all_runs_completed");
    let passed = completed && within(sw, 1.0, 0.2) && within(si, 1.0, 0.2) && no_layer && layer;
    let mut out = Outcome::new(
        passed,
        format!(
            "slope at t=1 well {sw:.3} ill {si:.3}; no initial layer {no_layer}; layer half-time slope {:.3}",
            ill.layer_slope.unwrap_or(f64::NAN)
        ),
    );
    for (label, report) in [("well", well), ("ill", ill)] {
        for f in &report.flags {
            out = out.note(format!("{label} {} [{}] {}", f.name, if f.passed { "pass" } else { "fail" }, f.detail));
        }
    }
    Ok(out)
}

fn criterion_11() -> Result<Outcome> {
    let runs: Vec<_> = [study(Prepared::Well), study(Prepared::Ill)].into_iter().flat_map(|r| r.runs.iter()).collect();
    let drift = runs.iter().map(|r| r.max_mass_drift.unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    let energy = runs.iter().map(|r| r.energy_rate.unwrap_or(f64::NAN)).fold(f64::INFINITY, f64::min);
    let ddp = runs.iter().map(|r| r.ddp_rate.unwrap_or(f64::NAN)).fold(f64::INFINITY, f64::min);
    Ok(Outcome::new(
        drift <= 1e-10 && energy >= 0.5 && ddp >= 0.5,
        format!(
            "over {} runs: max mass drift {drift:.1e}, min energy decay rate {energy:.3}, min DDP decay rate {ddp:.3}",
            runs.len()
        ),
    ))
}

fn criterion_12() -> Result<Outcome> {
    let (c2a, g48) = criterion_2(48)?;
    let (c2b, g96) = criterion_2(96)?;
    let (c3a, k48) = criterion_3(48)?;
    let (c3b, k96) = criterion_3(96)?;
    let (c4a, z48) = criterion_4(48)?;
    let (c4b, z96) = criterion_4(96)?;
    let (c5a, e48) = criterion_5(48)?;
    let (c5b, e96) = criterion_5(96)?;
    let max_gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let (d2, d3, d4, d5) = (max_gap(&g48, &g96), max_gap(&k48, &k96), max_gap(&z48, &z96), max_gap(&e48, &e96));
    let all = [&c2a, &c2b, &c3a, &c3b, &c4a, &c4b, &c5a, &c5b].iter().all(|o| o.passed);
    let passed = all && d2 <= 1e-8 && d3 <= 0.15 && d4 <= 1e-8 && d5 <= 0.2;
    Ok(Outcome::new(
        passed,
        format!(
            "criteria 2-5 at N=96 pass: {}; N=48 vs 96 changes: dispersion {d2:.1e}, z slopes {d3:.1e}, eigenvalue {d4:.1e}, eigenfunction slopes {d5:.1e}",
            c2b.passed && c3b.passed && c4b.passed && c5b.passed
        ),
    ))
}

fn main() {
    let criteria: Vec<(u32, &str, Duration, Box<dyn Fn() -> Result<Outcome>>)> = vec![
        (1, "operator exactness", Duration::from_secs(1), Box::new(criterion_1)),
        (2, "dispersion baseline", Duration::from_secs(1), Box::new(|| criterion_2(48).map(|o| o.0))),
        (3, "eigenvalue expansion order", Duration::from_secs(10), Box::new(|| criterion_3(48).map(|o| o.0))),
        (4, "oracle agreement", Duration::from_secs(5), Box::new(|| criterion_4(48).map(|o| o.0))),
        (5, "eigenfunction expansion order", Duration::from_secs(10), Box::new(|| criterion_5(48).map(|o| o.0))),
        (6, "contraction and projector", Duration::from_secs(5), Box::new(criterion_6)),
        (7, "remainder decay", Duration::from_secs(30), Box::new(criterion_7)),
        (8, "linear first-order limit", Duration::from_secs(60), Box::new(criterion_8)),
        (9, "linear second-order limit", Duration::from_secs(60), Box::new(criterion_9)),
        (10, "nonlinear diffusion limit", Duration::from_secs(900), Box::new(criterion_10)),
        (11, "conservation and decay monitors", Duration::from_secs(120), Box::new(criterion_11)),
        (12, "truncation robustness", Duration::from_secs(60), Box::new(criterion_12)),
    ];
    let mut failures = 0;
    for (id, name, budget, run) in &criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err(kinetic_limit::Error::Precondition("criterion panicked".into())));
        let elapsed = start.elapsed();
        let (passed, detail, notes) = match outcome {
            Ok(o) => (o.passed && elapsed <= *budget, o.detail, o.notes),
            Err(e) => (false, format!("error: {e}"), Vec::new()),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "[{}] criterion {id:>2} {name}: {detail} ({:.2} s, budget {} s)",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        for n in notes {
            println!("       {n}");
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
