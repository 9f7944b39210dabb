//! Experiment recipes behind the command-line tool. Each `cmd_*` function
//! runs a recipe, writes its CSV tables and a `manifest.txt` into the output
//! directory, and returns a short report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use crate::demand::{expected_distinct_contents, CrpState};
use crate::error::{Error, Result};
use crate::geometry::{active_probability, sample_ppp, sampled_rate};
use crate::policy::{BaselinePolicy, CachingPolicy, MfPolicy, RandomPolicy};
use crate::rng::{substream, Purpose};
use crate::scenario::ScenarioConfig;
use crate::sim::{ipi_experiment, mean_lra, mean_of, run_replications, Information, MetricsLog};
use crate::solver::export::{num, write_residuals_csv, write_solution_csv};
use crate::solver::{solve_mfe, MfeSolution};

/// SBS densities of the density sweeps (SBSs/km²).
pub const LAMBDA_B_SWEEP: [f64; 4] = [0.005, 0.02, 0.035, 0.05];
/// User densities of the user-density sweep (users/km²).
pub const LAMBDA_U_SWEEP: [f64; 2] = [1e-4, 2.5e-4];
/// Initial popularities of the static-popularity control recipe.
pub const STATIC_POPULARITIES: [f64; 2] = [0.4, 0.7];

/// Initial popularities of the overlap sweep, `0.1, 0.2, …, 0.9`.
pub fn x0_sweep() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

/// Equilibrium of a content with long-term mean `mu` under `cfg`.
pub fn solve_content(cfg: &ScenarioConfig, mu: f64) -> Result<MfeSolution> {
    let problem = cfg.content_problem(mu)?;
    let grid = cfg.grid(&problem)?;
    solve_mfe(&problem, &grid, &cfg.solver)
}

/// Initial long-term mean popularity of every content.
pub fn initial_means(cfg: &ScenarioConfig) -> Result<Vec<f64>> {
    Ok(CrpState::new(cfg.demand.catalog_size, cfg.demand.theta, cfg.demand.nu)?.mean_popularity())
}

/// One equilibrium per content; contents with equal means share a solve.
pub fn solve_catalog(cfg: &ScenarioConfig) -> Result<Vec<Arc<MfeSolution>>> {
    let mut cache: BTreeMap<u64, Arc<MfeSolution>> = BTreeMap::new();
    let mut out = Vec::new();
    for mu in initial_means(cfg)? {
        let sol = match cache.get(&mu.to_bits()) {
            Some(s) => s.clone(),
            None => {
                let s = Arc::new(solve_content(cfg, mu)?);
                cache.insert(mu.to_bits(), s.clone());
                s
            }
        };
        out.push(sol);
    }
    Ok(out)
}

pub fn mf_policy(cfg: &ScenarioConfig) -> Result<MfPolicy> {
    MfPolicy::new(solve_catalog(cfg)?)
}

/// Static-popularity variant of `cfg`: no reversion, no volatility, all
/// SBSs start at popularity `x0`.
pub fn static_scenario(cfg: &ScenarioConfig, x0: f64) -> ScenarioConfig {
    let mut s = cfg.clone();
    s.demand.reversion_rate = 0.0;
    s.demand.volatility = 0.0;
    s.initial.popularity = x0;
    s
}

/// Control along a static-popularity equilibrium: the density-weighted mean
/// and the largest value over all storage levels at the `x0` node.
#[derive(Debug, Clone)]
pub struct ControlTrajectory {
    pub popularity: f64,
    pub t: Vec<f64>,
    pub mean_control: Vec<f64>,
    pub max_control: Vec<f64>,
    pub converged: bool,
}

pub fn static_control(cfg: &ScenarioConfig, x0: f64) -> Result<ControlTrajectory> {
    let s = static_scenario(cfg, x0);
    let mu = initial_means(&s)?[0];
    let sol = solve_content(&s, mu)?;
    let g = &sol.grid;
    let i = g
        .x
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x0).abs().total_cmp(&(b.1 - x0).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut mean = Vec::new();
    let mut max = Vec::new();
    for n in 0..g.nt() {
        let m = sol.m_star.slice(n);
        let p = sol.p_star.slice(n);
        let weighted: Vec<f64> = m.iter().zip(p).map(|(a, b)| a * b).collect();
        mean.push(g.integrate(&weighted));
        max.push((0..g.nq()).map(|j| sol.p_star.get(n, i, j)).fold(0.0, f64::max));
    }
    Ok(ControlTrajectory {
        popularity: x0,
        t: g.t.clone(),
        mean_control: mean,
        max_control: max,
        converged: sol.converged,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct IterationRow {
    pub lambda_b: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

pub fn iterations_sweep(cfg: &ScenarioConfig, lambdas: &[f64]) -> Result<Vec<IterationRow>> {
    let mut rows = Vec::new();
    for &lb in lambdas {
        let mut s = cfg.clone();
        s.geometry.lambda_b = lb;
        let mu = initial_means(&s)?[0];
        let sol = solve_content(&s, mu)?;
        rows.push(IterationRow {
            lambda_b: lb,
            iterations: sol.iterations,
            residual: sol.final_residual(),
            converged: sol.converged,
        });
    }
    Ok(rows)
}

/// Replications of the three policies under common random numbers.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub mf: Vec<MetricsLog>,
    pub baseline: Vec<MetricsLog>,
    pub random: Vec<MetricsLog>,
}

impl Comparison {
    pub fn policies(&self) -> [(&'static str, &[MetricsLog]); 3] {
        [
            ("mf", &self.mf),
            ("baseline", &self.baseline),
            ("random", &self.random),
        ]
    }

    /// `1 − LRA(mf) / LRA(baseline)`.
    pub fn reduction(&self) -> f64 {
        1.0 - mean_lra(&self.mf).mean / mean_lra(&self.baseline).mean
    }
}

pub fn compare_policies(cfg: &ScenarioConfig, info: Information) -> Result<Comparison> {
    let reps = cfg.simulation.replications;
    let mf = mf_policy(cfg)?;
    Ok(Comparison {
        mf: run_replications(cfg, &mf, reps, info)?,
        baseline: run_replications(cfg, &BaselinePolicy, reps, info)?,
        random: run_replications(cfg, &RandomPolicy, reps, info)?,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct OverlapRow {
    pub x0: f64,
    pub mf: f64,
    pub baseline: f64,
    pub random: f64,
}

/// Mean overlap per storage usage for each initial popularity.
pub fn overlap_sweep(cfg: &ScenarioConfig, x0s: &[f64]) -> Result<Vec<OverlapRow>> {
    let mut rows = Vec::new();
    for &x0 in x0s {
        let mut s = cfg.clone();
        s.initial.popularity = x0;
        let c = compare_policies(&s, Information::Perfect)?;
        let f = |logs: &[MetricsLog]| mean_of(logs, |l| l.overlap_per_storage);
        rows.push(OverlapRow {
            x0,
            mf: f(&c.mf),
            baseline: f(&c.baseline),
            random: f(&c.random),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy)]
pub struct LraRow {
    pub lambda_u: f64,
    pub mf: f64,
    pub baseline: f64,
    pub random: f64,
}

impl LraRow {
    pub fn gap(&self) -> f64 {
        self.baseline - self.mf
    }

    pub fn reduction(&self) -> f64 {
        1.0 - self.mf / self.baseline
    }
}

pub fn lambda_u_sweep(cfg: &ScenarioConfig, lambdas: &[f64]) -> Result<Vec<LraRow>> {
    let mut rows = Vec::new();
    for &lu in lambdas {
        let mut s = cfg.clone();
        s.geometry.lambda_u = lu;
        let c = compare_policies(&s, Information::Perfect)?;
        rows.push(LraRow {
            lambda_u: lu,
            mf: mean_lra(&c.mf).mean,
            baseline: mean_lra(&c.baseline).mean,
            random: mean_lra(&c.random).mean,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy)]
pub struct IpiRow {
    pub lambda_b: f64,
    pub mf: f64,
    pub baseline: f64,
    pub random: f64,
}

/// LRA increment caused by observation error, per policy and SBS density.
pub fn ipi_sweep(cfg: &ScenarioConfig, lambdas: &[f64]) -> Result<Vec<IpiRow>> {
    let reps = cfg.simulation.replications;
    let mut rows = Vec::new();
    for &lb in lambdas {
        let mut s = cfg.clone();
        s.geometry.lambda_b = lb;
        let mf = mf_policy(&s)?;
        let inc = |p: &dyn CachingPolicy| -> Result<f64> { Ok(ipi_experiment(&s, p, reps)?.increment()) };
        rows.push(IpiRow {
            lambda_b: lb,
            mf: inc(&mf)?,
            baseline: inc(&BaselinePolicy)?,
            random: inc(&RandomPolicy)?,
        });
    }
    Ok(rows)
}

fn write_table(dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join(format!("{name}.csv")))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_manifest(dir: &Path, cfg: &ScenarioConfig, command: &str, lines: &[String], started: Instant) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "command = {command}");
    let _ = writeln!(text, "config_sha256 = {}", cfg.hash()?);
    let _ = writeln!(text, "seed = {}", cfg.simulation.seed);
    let _ = writeln!(text, "replications = {}", cfg.simulation.replications);
    let _ = writeln!(text, "mfcache_version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(
        text,
        "grid = nt {} nx {} nq {}",
        cfg.solver.nt, cfg.solver.nx, cfg.solver.nq
    );
    let _ = writeln!(text, "tolerance = {:e}", cfg.solver.tolerance);
    for l in lines {
        let _ = writeln!(text, "{l}");
    }
    let _ = writeln!(text, "wall_time_s = {:.3}", started.elapsed().as_secs_f64());
    std::fs::write(dir.join("manifest.txt"), text)?;
    std::fs::write(dir.join("scenario.toml"), cfg.to_toml()?)?;
    Ok(())
}

/// Outcome of a command, for the caller's exit status.
#[derive(Debug, Clone)]
pub struct Report {
    pub converged: bool,
    pub lines: Vec<String>,
}

pub fn cmd_solve(cfg: &ScenarioConfig, out: &Path) -> Result<Report> {
    let started = Instant::now();
    std::fs::create_dir_all(out)?;
    let mut lines = Vec::new();
    let mut converged = true;

    let solutions = solve_catalog(cfg)?;
    let main = &solutions[0];
    converged &= solutions.iter().all(|s| s.converged);
    lines.push(format!(
        "solve: iterations {} residual {:.3e} converged {}",
        main.iterations,
        main.final_residual(),
        main.converged
    ));
    if cfg.output.wants("solution") {
        write_solution_csv(main, &out.join("solution.csv"))?;
    }
    if cfg.output.wants("residuals") {
        write_residuals_csv(main, &out.join("residuals.csv"))?;
    }
    if cfg.output.wants("density_heatmap") {
        let g = &main.grid;
        let mut rows = Vec::new();
        for n in 0..g.nt() {
            let marginal = main.m_star.q_marginal(g, n);
            for (j, m) in marginal.iter().enumerate() {
                rows.push(vec![num(g.t[n]), num(g.q[j]), num(*m)]);
            }
        }
        write_table(out, "density_heatmap", &["t", "Q", "density"], &rows)?;
    }
    if cfg.output.wants("control_trajectory") {
        let mut rows = Vec::new();
        for x0 in STATIC_POPULARITIES {
            let tr = static_control(cfg, x0)?;
            converged &= tr.converged;
            lines.push(format!("static control x0={x0}: converged {}", tr.converged));
            for n in 0..tr.t.len() {
                rows.push(vec![
                    num(x0),
                    num(tr.t[n]),
                    num(tr.mean_control[n]),
                    num(tr.max_control[n]),
                ]);
            }
        }
        write_table(
            out,
            "control_trajectory",
            &["popularity", "t", "mean_control", "max_control"],
            &rows,
        )?;
    }
    if cfg.output.wants("iterations_vs_lambda_b") {
        let sweep = iterations_sweep(cfg, &LAMBDA_B_SWEEP)?;
        let rows: Vec<Vec<String>> = sweep
            .iter()
            .map(|r| {
                vec![
                    num(r.lambda_b),
                    r.iterations.to_string(),
                    num(r.residual),
                    r.converged.to_string(),
                ]
            })
            .collect();
        for r in &sweep {
            converged &= r.converged;
            lines.push(format!("lambda_b {}: iterations {}", r.lambda_b, r.iterations));
        }
        write_table(
            out,
            "iterations_vs_lambda_b",
            &["lambda_b", "iterations", "final_residual", "converged"],
            &rows,
        )?;
    }
    write_manifest(out, cfg, "solve", &lines, started)?;
    Ok(Report { converged, lines })
}

pub fn cmd_compare(cfg: &ScenarioConfig, out: &Path) -> Result<Report> {
    let started = Instant::now();
    std::fs::create_dir_all(out)?;
    let mut lines = Vec::new();

    let c = compare_policies(cfg, Information::Perfect)?;
    if cfg.output.wants("lra_trajectory") {
        let base = &c.mf[0];
        let rows: Vec<Vec<String>> = (0..base.times.len())
            .map(|n| {
                let mut r = vec![num(base.times[n])];
                for (_, logs) in c.policies() {
                    r.push(num(mean_of(logs, |l| l.cumulative_lra[n])));
                }
                r
            })
            .collect();
        write_table(out, "lra_trajectory", &["t", "mf", "baseline", "random"], &rows)?;
    }
    if cfg.output.wants("summary") {
        let base = mean_lra(&c.baseline).mean;
        let mut rows = Vec::new();
        for (name, logs) in c.policies() {
            let lra = mean_lra(logs);
            let reduction = 100.0 * (1.0 - lra.mean / base);
            lines.push(format!(
                "{name}: LRA {:.6} ({} used, {} excluded), reduction vs baseline {:.2}%",
                lra.mean, lra.used, lra.excluded, reduction
            ));
            rows.push(vec![
                name.to_string(),
                num(lra.mean),
                lra.used.to_string(),
                lra.excluded.to_string(),
                num(mean_of(logs, |l| l.overlap_per_storage)),
                num(mean_of(logs, |l| l.cache_hit_ratio)),
                num(reduction),
            ]);
        }
        write_table(
            out,
            "summary",
            &[
                "policy",
                "lra",
                "replications_used",
                "replications_excluded",
                "overlap_per_storage",
                "cache_hit_ratio",
                "lra_reduction_vs_baseline_percent",
            ],
            &rows,
        )?;
    }
    if cfg.output.wants("overlap_per_storage") {
        let rows: Vec<Vec<String>> = overlap_sweep(cfg, &x0_sweep())?
            .iter()
            .map(|r| vec![num(r.x0), num(r.mf), num(r.baseline), num(r.random)])
            .collect();
        write_table(out, "overlap_per_storage", &["x0", "mf", "baseline", "random"], &rows)?;
    }
    if cfg.output.wants("lra_lambda_u") {
        let rows: Vec<Vec<String>> = lambda_u_sweep(cfg, &LAMBDA_U_SWEEP)?
            .iter()
            .map(|r| {
                vec![
                    num(r.lambda_u),
                    num(r.mf),
                    num(r.baseline),
                    num(r.random),
                    num(r.gap()),
                    num(r.reduction()),
                ]
            })
            .collect();
        write_table(
            out,
            "lra_lambda_u",
            &["lambda_u", "mf", "baseline", "random", "gap", "reduction"],
            &rows,
        )?;
    }
    write_manifest(out, cfg, "compare", &lines, started)?;
    Ok(Report {
        converged: true,
        lines,
    })
}

pub fn cmd_ipi(cfg: &ScenarioConfig, out: &Path) -> Result<Report> {
    let started = Instant::now();
    std::fs::create_dir_all(out)?;
    let mut lines = Vec::new();
    let sweep = ipi_sweep(cfg, &LAMBDA_B_SWEEP)?;
    let rows: Vec<Vec<String>> = sweep
        .iter()
        .map(|r| {
            let ratio = if r.baseline != 0.0 { r.mf / r.baseline } else { f64::NAN };
            lines.push(format!(
                "lambda_b {}: increment mf {:.6} baseline {:.6} random {:.6}",
                r.lambda_b, r.mf, r.baseline, r.random
            ));
            vec![num(r.lambda_b), num(r.mf), num(r.baseline), num(r.random), num(ratio)]
        })
        .collect();
    if cfg.output.wants("ipi_increment") {
        write_table(
            out,
            "ipi_increment",
            &["lambda_b", "mf", "baseline", "random", "mf_over_baseline"],
            &rows,
        )?;
    }
    write_manifest(out, cfg, "ipi", &lines, started)?;
    Ok(Report {
        converged: true,
        lines,
    })
}

/// Derived quantities of a validated scenario, including a sampled
/// spectral efficiency next to the analytic average rate.
pub fn validate_report(cfg: &ScenarioConfig) -> Result<Report> {
    cfg.validate()?;
    let geo = &cfg.geometry;
    let rate = cfg.rate()?;
    let pa = active_probability(geo.lambda_u, geo.lambda_b)?;
    let mut rng = substream(cfg.simulation.seed, 0, Purpose::Validation);
    let mut sampled = Vec::new();
    for _ in 0..2000 {
        let pattern = sample_ppp(geo.lambda_b, geo.region(), &mut rng)?;
        if let Some(v) = sampled_rate(&pattern, geo.region().center(), geo, pa, &mut rng) {
            sampled.push(v);
        }
    }
    if sampled.is_empty() {
        return Err(Error::Domain("no SBS in any sampled layout".into()));
    }
    let sampled_mean = sampled.iter().sum::<f64>() / sampled.len() as f64;
    let problem = cfg.content_problem(initial_means(cfg)?[0])?;
    let grid = cfg.grid(&problem)?;
    let (a, b) = problem.max_speeds();
    let requests = (geo.lambda_u
        * std::f64::consts::PI
        * geo.search_radius.powi(2)
        * cfg.demand.requests_per_user)
        .round()
        .max(1.0) as u64;
    let lines = vec![
        format!("scenario ok (sha256 {})", cfg.hash()?),
        format!("active probability p_a = {pa:.6e}"),
        format!("average rate (analytic) = {rate:.6e} nats/s/Hz"),
        format!("sampled rate (nearest SBS) = {sampled_mean:.6e} nats/s/Hz"),
        format!("SBSs in request region = {}", cfg.request_region_count()),
        format!(
            "expected distinct contents per period = {:.3}",
            expected_distinct_contents(requests, cfg.demand.theta.max(f64::MIN_POSITIVE), cfg.demand.nu)?
        ),
        format!("courant number = {:.3}", grid.courant(a, b)),
    ];
    Ok(Report {
        converged: true,
        lines,
    })
}
