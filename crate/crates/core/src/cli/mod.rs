//! Command-line experiment runner: single solves, sweeps, oracle checks and
//! the canned narrow-band comparison.
//!
//! Exit codes: 0 success, 1 certification failure, 2 config error.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{generate_rayleigh, read_channel, sample_compound_channel, CsitModel, MmWaveLink};
use crate::csit::{solve_with_csit_opts, CsitBound, CsitOptions};
use crate::eesolver::{dinkelbach_gains, EeOptions};
use crate::error::Error;
use crate::linkmodel::{evaluate_gains, Allocation, LinkGains, SystemParams};
use crate::oracle::{grid_search_ee_gains, grid_search_sumrate_gains, OracleResult};
use crate::sumrate::{solve_gains, ActiveCase, SnrRegime, SnrThresholds, SolveReport};

pub use config::{ChannelSource, ConfigError, ExperimentConfig, MmWaveSource, Problem, SweepConfig, SweepVariable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CERTIFICATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Fixed CSV header. Numbers carry 12 significant digits; fields that do not
/// apply are left empty.
pub const CSV_HEADER: &str =
    "sweep_value,w_sub6,w_m,p_sub6,p_m,rate_total_nats,rate_total_mbps,ee,active_case,kkt_residual,oracle_gap,ee_full";

#[derive(Debug, Parser)]
#[command(name = "bandalloc", version, about = "Joint power and bandwidth allocation across sub-6 GHz and mmWave")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance.
    Solve(CommonArgs),
    /// Solve every point of the sweep block.
    Sweep(CommonArgs),
    /// Solve one instance for energy efficiency.
    Ee(CommonArgs),
    /// Compare the solver against the grid oracle.
    Check(CommonArgs),
    /// Full-bandwidth versus optimal allocation at a = 1e-7, P = 2.5 W.
    Table2(CommonArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `channel.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output.csv_path`.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Attach the grid oracle and fail on a certification gap.
    #[arg(long)]
    pub check: bool,
    /// Report bits instead of nats.
    #[arg(long)]
    pub bits: bool,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Lib(#[from] Error),
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

impl RunError {
    fn io(path: &Path, e: impl ToString) -> Self {
        RunError::Io { path: path.to_path_buf(), msg: e.to_string() }
    }
}

/// Channel realisation shared by every point of a run.
#[derive(Debug, Clone)]
pub struct Instance {
    pub gains: LinkGains,
    pub link: MmWaveLink,
    pub model: Option<CsitModel>,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub oracle: OracleResult,
    pub solver_objective: f64,
    /// Oracle objective minus solver objective.
    pub gap: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub sweep_value: Option<f64>,
    pub params: SystemParams,
    pub report: SolveReport,
    pub check: Option<CheckOutcome>,
    /// EE with both bandwidths at their caps and `p_max / 2` on each.
    pub ee_full: f64,
}

fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

pub fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, RunError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
            let base = path.parent().unwrap_or(Path::new("."));
            ExperimentConfig::parse(&text, base)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(p) = &args.csv {
        cfg.csv_path = Some(p.clone());
    }
    Ok(cfg)
}

pub fn build_instance(cfg: &ExperimentConfig) -> Result<Instance, RunError> {
    let (n_t, n_r) = (cfg.system.n_t, cfg.system.n_r);
    let link = match &cfg.mmwave {
        MmWaveSource::Gain(g) => MmWaveLink::new(*g)?,
        MmWaveSource::Rician { gain_db, k_factor, seed } => {
            MmWaveLink::rician(n_t, n_r, db(*gain_db), *k_factor, seed.unwrap_or(cfg.seed.wrapping_add(1000)))?
        }
    };
    let (ch, model) = match &cfg.channel {
        ChannelSource::Rayleigh { gain_db } => (generate_rayleigh(n_t, n_r, cfg.seed)?.scaled(db(*gain_db)), None),
        ChannelSource::Compound { lambda, epsilon, sigma_e2 } => {
            let m = CsitModel::with_random_directions(n_t, n_r, *lambda, *epsilon, *sigma_e2, cfg.seed)?;
            (sample_compound_channel(&m, cfg.seed)?, Some(m))
        }
        ChannelSource::File { path } => {
            let f = fs::File::open(path).map_err(|e| RunError::io(path, e))?;
            let ch = read_channel(BufReader::new(f))?;
            if ch.n_t() != n_t || ch.n_r() != n_r {
                return Err(ConfigError {
                    line: None,
                    key: "channel.path".into(),
                    msg: format!("file holds a {}x{} channel but system says n_r = {n_r}, n_t = {n_t}", ch.n_r(), ch.n_t()),
                }
                .into());
            }
            (ch, None)
        }
    };
    Ok(Instance { gains: LinkGains::new(&ch, &link), link, model })
}

fn ee_full(gains: &LinkGains, params: &SystemParams) -> f64 {
    let full = Allocation {
        w_sub6: params.w_sub6_max,
        w_m: params.w_m_max,
        p_sub6: 0.5 * params.p_max,
        p_m: 0.5 * params.p_max,
    };
    evaluate_gains(&full, gains, params).ee
}

/// Solves one point, attaching the oracle when `check` is set.
pub fn solve_point(cfg: &ExperimentConfig, inst: &Instance, params: &SystemParams, check: bool) -> Result<PointResult, RunError> {
    let sv = &cfg.solver;
    let th = SnrThresholds::default();
    // gains the solver actually optimises over, for the oracle
    let mut gains = inst.gains.clone();
    let report = match (sv.problem, sv.csit_bound) {
        (Problem::SumRate, None) => solve_gains(&inst.gains, params, sv.mode, &th),
        (Problem::SumRate, Some(bound)) => {
            let model = inst.model.as_ref().expect("compound channel checked at parse time");
            if bound == CsitBound::Lower {
                let s = model.worst_case_amplitude();
                gains = LinkGains { sub6: vec![s * s], mmwave: inst.link.gain() };
            } else if check {
                return Err(ConfigError {
                    line: None,
                    key: "solver.csit_bound".into(),
                    msg: "the oracle cannot check the upper bound".into(),
                }
                .into());
            }
            let opts = CsitOptions { seed: cfg.seed, mode: sv.mode, ..CsitOptions::default() };
            solve_with_csit_opts(model, &inst.link, params, bound, &opts)?
        }
        (Problem::Ee, _) => dinkelbach_gains(&inst.gains, params, &EeOptions { p_cap: sv.p_cap, delta: sv.delta })?,
    };
    let check = if check {
        let (oracle, solver_objective) = match sv.problem {
            Problem::SumRate => (grid_search_sumrate_gains(&gains, params, &cfg.oracle)?, report.eval.rate_total),
            Problem::Ee => (grid_search_ee_gains(&gains, params, &cfg.oracle, sv.p_cap)?, report.eval.ee),
        };
        let gap = oracle.objective - solver_objective;
        let passed = report.eval.feasible && gap <= oracle.resolution_bound + 1e-9;
        Some(CheckOutcome { oracle, solver_objective, gap, passed })
    } else {
        None
    };
    Ok(PointResult { sweep_value: None, params: *params, report, check, ee_full: ee_full(&inst.gains, params) })
}

fn num(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn mbps(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2 / 1e6
}

pub fn csv_row(p: &PointResult, problem: Problem) -> String {
    let a = &p.report.allocation;
    let e = &p.report.eval;
    let kkt = match problem {
        Problem::SumRate => num(p.report.kkt.max_residual()),
        Problem::Ee => String::new(),
    };
    [
        p.sweep_value.map(num).unwrap_or_default(),
        num(a.w_sub6),
        num(a.w_m),
        num(a.p_sub6),
        num(a.p_m),
        num(e.rate_total),
        num(mbps(e.rate_total)),
        num(e.ee),
        p.report.kkt.active_case.as_str().to_string(),
        kkt,
        p.check.as_ref().map(|c| num(c.gap)).unwrap_or_default(),
        num(p.ee_full),
    ]
    .join(",")
}

fn write_csv(path: &Path, rows: &[String]) -> Result<(), RunError> {
    let mut text = String::from(CSV_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| RunError::io(path, e))
}

/// Path of the plot script written next to `csv`.
pub fn plot_script_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    csv.with_file_name(format!("{stem}_plot.py"))
}

fn plot_script(csv: &Path, sweep: &SweepConfig) -> String {
    let name = csv.file_name().and_then(|s| s.to_str()).unwrap_or("sweep.csv");
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    let xscale = if sweep.log_scale { "log" } else { "linear" };
    format!(
        r#"import csv
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "{name}")) as f:
    rows = list(csv.DictReader(f))


def col(key):
    return [float(r[key]) for r in rows]


x = col("sweep_value")
fig, ax = plt.subplots(1, 3, figsize=(13, 3.8))
ax[0].plot(x, [w / 1e6 for w in col("w_m")], "o-", label="mmWave")
ax[0].plot(x, [w / 1e6 for w in col("w_sub6")], "s-", label="sub-6")
ax[0].set_ylabel("bandwidth (MHz)")
ax[0].legend()
ax[1].plot(x, col("rate_total_mbps"), "o-")
ax[1].set_ylabel("sum rate (Mbps)")
ax[2].plot(x, col("ee"), "o-", label="optimal")
ax[2].plot(x, col("ee_full"), "--", label="full bandwidth")
ax[2].set_ylabel("energy efficiency (nats/J)")
ax[2].legend()
for a in ax:
    a.set_xscale("{xscale}")
    a.set_xlabel("{var}")
fig.tight_layout()
fig.savefig(os.path.join(here, "{stem}.png"), dpi=150)
"#,
        var = sweep.variable.as_str(),
    )
}

fn regime(r: SnrRegime) -> &'static str {
    match r {
        SnrRegime::High => "high",
        SnrRegime::Low => "low",
        SnrRegime::Mixed => "mixed",
    }
}

fn print_allocation(out: &mut dyn Write, label: &str, a: &Allocation) -> std::io::Result<()> {
    writeln!(
        out,
        "{label:<13}w_sub6 = {:.6e} Hz, p_sub6 = {:.6e} W, w_m = {:.6e} Hz, p_m = {:.6e} W",
        a.w_sub6, a.p_sub6, a.w_m, a.p_m
    )
}

fn print_summary(out: &mut dyn Write, p: &PointResult, problem: Problem, bits: bool) -> std::io::Result<()> {
    let r = &p.report;
    let e = &r.eval;
    let (unit, scale) = if bits { ("bits", 1.0 / std::f64::consts::LN_2) } else { ("nats", 1.0) };
    writeln!(out, "problem      {}", if problem == Problem::SumRate { "sumrate" } else { "ee" })?;
    writeln!(out, "source       {:?}", r.source)?;
    print_allocation(out, "allocation", &r.allocation)?;
    writeln!(out, "rate         {:.6} Mbps ({:.6e} {unit}/s)", mbps(e.rate_total), e.rate_total * scale)?;
    writeln!(out, "ee           {:.6e} {unit}/J", e.ee * scale)?;
    writeln!(out, "consumed     {:.6e} W of {:.6e} W", e.consumed_power, p.params.p_max)?;
    writeln!(out, "active case  {}", r.kkt.active_case.as_str())?;
    writeln!(out, "snr regime   {}", regime(r.snr_regime))?;
    if problem == Problem::SumRate {
        writeln!(out, "kkt residual {:.3e}", r.kkt.max_residual())?;
    }
    if let Some(d) = &r.dinkelbach {
        writeln!(out, "dinkelbach   beta = {:.6e}, F = {:.3e}, {} iterations", d.beta * scale, d.big_f, d.iteration)?;
    }
    if let Some(c) = &p.check {
        writeln!(
            out,
            "oracle       objective = {:.9e}, solver = {:.9e}, gap = {:.3e}, bound = {:.3e}: {}",
            c.oracle.objective,
            c.solver_objective,
            c.gap,
            c.oracle.resolution_bound,
            if c.passed { "PASS" } else { "FAIL" }
        )?;
        if !c.passed {
            print_allocation(out, "solver", &r.allocation)?;
            print_allocation(out, "oracle", &c.oracle.allocation)?;
        }
    }
    for w in &r.warnings {
        writeln!(out, "warning: {w}")?;
    }
    Ok(())
}

fn run_single(args: &CommonArgs, problem: Option<Problem>, check: bool, out: &mut dyn Write) -> Result<i32, RunError> {
    let mut cfg = load_config(args)?;
    if let Some(p) = problem {
        cfg.solver.problem = p;
    }
    let inst = build_instance(&cfg)?;
    let point = solve_point(&cfg, &inst, &cfg.system, check)?;
    print_summary(out, &point, cfg.solver.problem, args.bits).map_err(|e| RunError::io(Path::new("stdout"), e))?;
    if let Some(path) = &cfg.csv_path {
        write_csv(path, &[csv_row(&point, cfg.solver.problem)])?;
    }
    let failed = point.check.as_ref().is_some_and(|c| !c.passed);
    Ok(if failed { EXIT_CERTIFICATION } else { EXIT_OK })
}

/// Every sweep point, in sweep order.
pub fn sweep_points(cfg: &ExperimentConfig, check: bool) -> Result<Vec<PointResult>, RunError> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| ConfigError {
        line: None,
        key: "sweep".into(),
        msg: "no sweep.* block in the config".into(),
    })?;
    let inst = build_instance(cfg)?;
    let values = sweep.values();
    for &v in &values {
        sweep.variable.apply(&cfg.system, v).validate().map_err(|e| ConfigError {
            line: None,
            key: format!("sweep.{}", sweep.variable.as_str()),
            msg: format!("value {v:e}: {e}"),
        })?;
    }
    values
        .par_iter()
        .map(|&v| {
            let params = sweep.variable.apply(&cfg.system, v);
            let mut p = solve_point(cfg, &inst, &params, check)?;
            p.sweep_value = Some(v);
            Ok(p)
        })
        .collect()
}

fn run_sweep(args: &CommonArgs, out: &mut dyn Write) -> Result<i32, RunError> {
    let cfg = load_config(args)?;
    let points = sweep_points(&cfg, args.check)?;
    let rows: Vec<String> = points.iter().map(|p| csv_row(p, cfg.solver.problem)).collect();
    let io = |e| RunError::io(Path::new("stdout"), e);
    match &cfg.csv_path {
        Some(path) => {
            write_csv(path, &rows)?;
            writeln!(out, "wrote {} rows to {}", rows.len(), path.display()).map_err(io)?;
            if cfg.plot_script {
                let script = plot_script_path(path);
                let sweep = cfg.sweep.as_ref().expect("sweep_points checked it");
                fs::write(&script, plot_script(path, sweep)).map_err(|e| RunError::io(&script, e))?;
                writeln!(out, "wrote plot script {}", script.display()).map_err(io)?;
            }
        }
        None => {
            writeln!(out, "{CSV_HEADER}").map_err(io)?;
            for r in &rows {
                writeln!(out, "{r}").map_err(io)?;
            }
        }
    }
    let mut failed = false;
    for p in &points {
        let v = p.sweep_value.unwrap_or(f64::NAN);
        for w in &p.report.warnings {
            writeln!(out, "warning at {v:e}: {w}").map_err(io)?;
        }
        if let Some(c) = p.check.as_ref().filter(|c| !c.passed) {
            failed = true;
            writeln!(out, "FAIL at {v:e}: oracle {:.9e} vs solver {:.9e}", c.oracle.objective, c.solver_objective).map_err(io)?;
            print_allocation(out, "solver", &p.report.allocation).map_err(io)?;
            print_allocation(out, "oracle", &c.oracle.allocation).map_err(io)?;
        }
    }
    Ok(if failed { EXIT_CERTIFICATION } else { EXIT_OK })
}

/// System parameters of the narrow-band comparison.
pub fn table2_params() -> SystemParams {
    SystemParams { p_max: 2.5, adc_a: 1e-7, n_t: 64, n_r: 16, w_sub6_max: 1e6, w_m_max: 1e9 }
}

fn run_table2(args: &CommonArgs, out: &mut dyn Write) -> Result<i32, RunError> {
    let mut cfg = load_config(args)?;
    cfg.system = table2_params();
    cfg.solver.problem = Problem::SumRate;
    cfg.solver.csit_bound = None;
    let params = cfg.system;
    let inst = build_instance(&cfg)?;

    let full = Allocation { w_sub6: params.w_sub6_max, w_m: params.w_m_max, p_sub6: 0.0, p_m: 0.0 };
    let fe = evaluate_gains(&full, &inst.gains, &params);
    // an infeasible allocation carries no rate
    let full_rate = if fe.feasible { fe.rate_total } else { 0.0 };
    let opt = solve_point(&cfg, &inst, &params, args.check)?;
    let oe = &opt.report.eval;

    let io = |e| RunError::io(Path::new("stdout"), e);
    writeln!(out, "P_max = {} W, a = {:e} W/Hz, n_t = {}, n_r = {}", params.p_max, params.adc_a, params.n_t, params.n_r).map_err(io)?;
    writeln!(out, "{:<16}{:>14}{:>14}{:>16}{:>16}", "allocation", "w_sub6 (MHz)", "w_m (MHz)", "consumed (W)", "rate (Mbps)").map_err(io)?;
    for (label, a, consumed, rate) in [
        ("full bandwidth", &full, fe.consumed_power, full_rate),
        ("optimal", &opt.report.allocation, oe.consumed_power, oe.rate_total),
    ] {
        writeln!(out, "{label:<16}{:>14.4}{:>14.4}{:>16.4}{:>16.4}", a.w_sub6 / 1e6, a.w_m / 1e6, consumed, mbps(rate)).map_err(io)?;
    }
    if !fe.feasible {
        writeln!(out, "full bandwidth needs {:.4} W of component power alone; it is infeasible", fe.consumed_power).map_err(io)?;
    }
    if let Some(c) = &opt.check {
        writeln!(out, "oracle gap {:.3e} (bound {:.3e}): {}", c.gap, c.oracle.resolution_bound, if c.passed { "PASS" } else { "FAIL" })
            .map_err(io)?;
    }
    if let Some(path) = &cfg.csv_path {
        let full_row = [
            String::new(),
            num(full.w_sub6),
            num(full.w_m),
            num(0.0),
            num(0.0),
            num(full_rate),
            num(mbps(full_rate)),
            num(if fe.feasible { fe.ee } else { 0.0 }),
            ActiveCase::of(&full, &params).as_str().to_string(),
            String::new(),
            String::new(),
            num(opt.ee_full),
        ]
        .join(",");
        write_csv(path, &[full_row, csv_row(&opt, Problem::SumRate)])?;
    }
    let failed = opt.check.as_ref().is_some_and(|c| !c.passed);
    Ok(if failed { EXIT_CERTIFICATION } else { EXIT_OK })
}

/// Parses `argv` and runs the chosen subcommand; returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_CONFIG;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => run_single(a, None, a.check, out),
        Command::Ee(a) => run_single(a, Some(Problem::Ee), a.check, out),
        Command::Check(a) => run_single(a, None, true, out),
        Command::Sweep(a) => run_sweep(a, out),
        Command::Table2(a) => run_table2(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_CONFIG
        }
    }
}
