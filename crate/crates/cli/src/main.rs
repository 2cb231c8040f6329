#![allow(clippy::neg_cmp_op_on_partial_ord)]
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use segwave::frontsim::{self, FrontSimOptions, PdeState, Tracked};
use segwave::halfline::{gamma, GammaOptions};
use segwave::limit::{LimitParams, LimitSolver};
use segwave::numerics::Grid1D;
use segwave::sweep::{self, RawEcologicalParams, SweepSpec};
use segwave::wave::{self, Normalization, Seed, SystemParams, WaveOptions};
use segwave::{Error, Result};

mod config;

use config::Config;

#[derive(Parser)]
#[command(name = "segwave", version, about = "Invasion speeds of strongly competitive travelling waves")]
struct Cli {
    /// JSON file with default values for any flag (same field names)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the main output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sweeps
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Initial slope of the half-line KPP profile
    Gamma(GammaArgs),
    /// Limit speed and invader verdict
    LimitSpeed(LimitArgs),
    /// Finite-k travelling wave, or a continuation in k
    Wave(WaveArgs),
    /// Direct simulation of the parabolic system
    Pde(PdeArgs),
    /// Sweep the limit speed over d
    Sweep(SweepArgs),
    /// Map the eight ecological coefficients to (k, alpha, d, r)
    Rescale(RescaleArgs),
}

#[derive(Args)]
struct GammaArgs {
    #[arg(long, allow_hyphen_values = true)]
    c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    length: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<f64>,
    #[arg(long)]
    table: bool,
    #[arg(long, allow_hyphen_values = true)]
    from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    to: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct Triple {
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    d: Option<f64>,
}

impl Triple {
    fn resolve(&self, cfg: &Config) -> Result<LimitParams> {
        LimitParams::new(
            cfg.require("alpha", self.alpha)?,
            cfg.require("r", self.r)?,
            cfg.require("d", self.d)?,
        )
    }
}

#[derive(Args)]
struct LimitArgs {
    #[command(flatten)]
    params: Triple,
    /// Also write the limit profiles as `xi,u,v`
    #[arg(long)]
    profiles: Option<PathBuf>,
}

#[derive(Args)]
struct WaveArgs {
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
    #[command(flatten)]
    params: Triple,
    #[arg(long, default_value = "cross")]
    norm: Normalization,
    /// Continue in k along `--ks`
    #[arg(long = "continue")]
    continuation: bool,
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<f64>>,
}

#[derive(Args)]
struct PdeArgs {
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
    #[command(flatten)]
    params: Triple,
    #[arg(long, allow_hyphen_values = true)]
    tend: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    dx: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    dt: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    level: Option<f64>,
    /// Window length
    #[arg(long, allow_hyphen_values = true)]
    length: Option<f64>,
    /// Simulate a single species
    #[arg(long, value_parser = ["u", "v"])]
    only: Option<String>,
    /// Snapshot interval and CSV path (`t,xi,u,v`)
    #[arg(long, num_args = 2, value_names = ["S", "PATH"])]
    snapshot_every: Option<Vec<String>>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    d_grid: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    d_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    d_max: Option<f64>,
    #[arg(long)]
    d_points: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<f64>>,
}

#[derive(Args)]
struct RescaleArgs {
    #[arg(long, allow_hyphen_values = true)]
    d1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    d2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    k1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    k2: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    }
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let out = cli.out.clone().or_else(|| cfg.string("output_path").map(PathBuf::from));
    let text = match &cli.command {
        Command::Gamma(a) => run_gamma(a, &cfg)?,
        Command::LimitSpeed(a) => run_limit(a, &cfg)?,
        Command::Wave(a) => run_wave(a, &cfg)?,
        Command::Pde(a) => run_pde(a, &cfg)?,
        Command::Sweep(a) => return run_sweep(a, &cfg, out.as_deref()),
        Command::Rescale(a) => run_rescale(a, &cfg)?,
    };
    emit(out.as_deref(), &text)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io { path: p.to_path_buf(), source }),
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io { path: "<stdout>".into(), source: e }),
            _ => Ok(()),
        },
    }
}

fn run_gamma(a: &GammaArgs, cfg: &Config) -> Result<String> {
    let mut opts = GammaOptions::default();
    if let Some(l) = cfg.pick("length", a.length)? {
        opts.length = l;
    }
    if let Some(t) = cfg.pick("tol", a.tol)? {
        opts.slope_tol = t;
    }
    if !(a.table || cfg.flag("table")) {
        let c = cfg.require("c", a.c)?;
        return Ok(format!("{}\n", gamma(c, &opts)?));
    }
    let from = cfg.require("from", a.from)?;
    let to = cfg.require("to", a.to)?;
    let steps = cfg.require("steps", a.steps.map(|s| s as f64))? as usize;
    if steps < 2 || !(to > from) {
        return Err(Error::InvalidInput("table needs from < to and at least 2 steps".into()));
    }
    let mut text = String::from("c,gamma\n");
    for i in 0..steps {
        let c = from + (to - from) * i as f64 / (steps - 1) as f64;
        writeln!(text, "{c},{}", gamma(c, &opts)?).expect("string write");
    }
    Ok(text)
}

fn run_limit(a: &LimitArgs, cfg: &Config) -> Result<String> {
    let params = a.params.resolve(cfg)?;
    let solver = LimitSolver::new();
    let verdict = solver.classify_invader(&params)?;
    if let Some(path) = &a.profiles {
        let wave = solver.build_limit_profiles(&params, verdict.c)?;
        let mut csv = String::from("xi,u,v\n");
        for (x, u, v) in wave.rows() {
            writeln!(csv, "{x},{u},{v}").expect("string write");
        }
        emit(Some(path), &csv)?;
    }
    Ok(format!("c_inf={} verdict={} threshold={}\n", verdict.c, verdict.tag, verdict.threshold))
}

fn run_wave(a: &WaveArgs, cfg: &Config) -> Result<String> {
    let base = a.params.resolve(cfg)?;
    let opts = WaveOptions::with_normalization(a.norm);
    if a.continuation || cfg.flag("continue") {
        let ks = cfg.list("ks", a.ks.clone())?.ok_or_else(|| Error::InvalidInput("--continue needs --ks".into()))?;
        let report = wave::continue_in_k_with(&base, &ks, &opts, &LimitSolver::new())?;
        let mut text = String::from("k,c_k,segregation,abs(c_k-c_inf)\n");
        for (i, gap) in report.gaps().iter().enumerate() {
            writeln!(text, "{},{},{},{}", report.k_values[i], report.c_values[i], report.segregation_values[i], gap)
                .expect("string write");
        }
        return Ok(text);
    }
    let params = SystemParams::new(cfg.require("k", a.k)?, base.alpha, base.r, base.d)?;
    let wave = if params.k <= 20.0 {
        wave::solve_wave(&params, Seed::Logistic, &opts)?
    } else {
        let schedule = sweep::continuation_schedule(&[params.k]);
        let report = wave::continue_in_k_with(&base, &schedule, &opts, &LimitSolver::new())?;
        report.waves.into_iter().last().expect("non-empty schedule")
    };
    let mut text = format!("# c={} residual={}\nxi,u,v\n", wave.c, wave.residual_norm);
    for (x, u, v) in wave.rows() {
        writeln!(text, "{x},{u},{v}").expect("string write");
    }
    Ok(text)
}

fn run_pde(a: &PdeArgs, cfg: &Config) -> Result<String> {
    let base = a.params.resolve(cfg)?;
    let params = SystemParams::new(cfg.require("k", a.k)?, base.alpha, base.r, base.d)?;
    let t_end = cfg.require("tend", a.tend)?;
    let dx = cfg.pick("dx", a.dx)?.unwrap_or(0.1);
    let dt = cfg.pick("dt", a.dt)?.unwrap_or(0.01);
    let level = cfg.pick("level", a.level)?.unwrap_or(0.5);
    let length = cfg.pick("length", a.length)?.unwrap_or(400.0);
    let only = a.only.clone().or_else(|| cfg.string("only"));
    let (with_u, with_v) = match only.as_deref() {
        Some("u") => (true, false),
        Some("v") => (false, true),
        None => (true, true),
        Some(other) => return Err(Error::InvalidInput(format!("--only must be u or v, got {other}"))),
    };
    let grid = Grid1D::with_max_spacing(-length / 2.0, length / 2.0, dx)?;
    let initial = PdeState::step_fronts(grid, with_u, with_v)?;
    let snapshot = match &a.snapshot_every {
        Some(v) => {
            let every: f64 = v[0].parse().map_err(|_| Error::InvalidInput(format!("bad snapshot interval {}", v[0])))?;
            if !(every > 0.0) {
                return Err(Error::InvalidInput("snapshot interval must be positive".into()));
            }
            Some((every, PathBuf::from(&v[1])))
        }
        None => None,
    };
    let mut opts = FrontSimOptions {
        dt,
        tracked: Some(if with_u { Tracked::U } else { Tracked::V }),
        ..FrontSimOptions::default()
    };
    if let Some((every, _)) = &snapshot {
        opts.sample_interval = opts.sample_interval.min(*every).max(dt);
    }
    let mut snap_csv = String::from("t,xi,u,v\n");
    let mut next_snap = 0.0;
    let estimate = frontsim::measure_front_speed_observed(initial, &params, t_end, level, &opts, |s| {
        if let Some((every, _)) = &snapshot {
            if s.time >= next_snap - 1e-9 {
                for (i, x) in s.grid.points().enumerate() {
                    writeln!(snap_csv, "{},{x},{},{}", s.time, s.u[i], s.v[i]).expect("string write");
                }
                next_snap += every;
            }
        }
    })?;
    if let Some((_, path)) = &snapshot {
        emit(Some(path), &snap_csv)?;
    }
    Ok(format!("speed={} residual={}\n", estimate.fitted_speed, estimate.fit_residual))
}

fn run_sweep(a: &SweepArgs, cfg: &Config, out: Option<&Path>) -> Result<()> {
    let d_grid = match cfg.list("d_grid", a.d_grid.clone())? {
        Some(g) => g,
        None => sweep::log_grid(
            cfg.pick("d_min", a.d_min)?.unwrap_or(0.1),
            cfg.pick("d_max", a.d_max)?.unwrap_or(10.0),
            cfg.pick("d_points", a.d_points.map(|n| n as f64))?.unwrap_or(41.0) as usize,
        )?,
    };
    let spec = SweepSpec {
        alpha: cfg.require("alpha", a.alpha)?,
        r: cfg.require("r", a.r)?,
        d_grid,
        k_list: cfg.list("k_list", a.ks.clone())?,
        output_path: out.map(|p| p.display().to_string()),
    };
    let path = out.ok_or_else(|| Error::InvalidInput("sweep needs --out".into()))?;
    let curve = sweep::run_sweep(&spec)?;
    sweep::emit_report(&curve, path)?;
    let sign = curve.sign_change_d.map_or_else(String::new, |d| d.to_string());
    println!("sign_change_d={sign} threshold={}", curve.predicted_threshold);
    Ok(())
}

fn run_rescale(a: &RescaleArgs, cfg: &Config) -> Result<String> {
    let raw = RawEcologicalParams {
        d1: cfg.require("d1", a.d1)?,
        d2: cfg.require("d2", a.d2)?,
        r1: cfg.require("r1", a.r1)?,
        r2: cfg.require("r2", a.r2)?,
        a1: cfg.require("a1", a.a1)?,
        a2: cfg.require("a2", a.a2)?,
        k1: cfg.require("k1", a.k1)?,
        k2: cfg.require("k2", a.k2)?,
    };
    let p = sweep::rescale_parameters(&raw)?;
    Ok(format!("k={} alpha={} d={} r={}\n", p.k, p.alpha, p.d, p.r))
}
