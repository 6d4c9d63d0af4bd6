//! Command-line front end.
//!
//! Exit codes: 0 when a command succeeds or its check passes, 1 when a check
//! or run fails on its merits, 2 for unreadable input and bad configuration.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::flow::{run as run_flow, SchemeConfig, Termination};
use crate::geometry::EnergyParams;
use crate::io::{frame_svg, read_snapshot, trace_csv, trace_json, Bounds, Snapshot};
use crate::linear::ls_verify;
use crate::network::{
    build_reparametrization, geometric_admissibility, parametric_admissibility, Flavor, NetworkState, GRID_TOLERANCE,
};
use crate::scenario::{self, theta_warped, ScenarioName, ScenarioSpec};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Largest warp drawn for a seeded theta scenario.
const SEEDED_WARP: f64 = 0.2;

#[derive(Debug, Parser)]
#[command(name = "elastinet", version, about = "Elastic flow of three-curve networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a built-in initial network and write it as a snapshot.
    Scenario(Common),
    /// Run the geometric and parametric admissibility checks.
    Check {
        #[command(flatten)]
        common: Common,
        /// Judge every residual at this tolerance. Defaults to 1e-8 for built-in
        /// scenarios and 1e-6 for snapshot files.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Verify the complementing condition at the junctions and write the report.
    Ls(Common),
    /// Reparametrize a geometrically admissible network.
    Reparam(Common),
    /// Run the flow and write the trace and SVG frames to a directory.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// End time of the run.
        #[arg(long)]
        t_final: Option<f64>,
        /// Initial time step.
        #[arg(long)]
        dt: Option<f64>,
        /// Write an SVG frame every this many accepted steps (0 for none).
        #[arg(long)]
        frames_every: Option<usize>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Built-in scenario name or path of a snapshot file.
    pub input: String,
    /// Junction conditions to use; defaults to the one matching the topology.
    #[arg(long, value_enum)]
    pub flavor: Option<Flavor>,
    /// Weight of the length term in the energy (default 1).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Grid intervals for built-in scenarios.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Bump height of a built-in scenario.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Draw random parameter warps for theta-symmetric.
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file with defaults; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file, or output directory for `simulate`. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub mu: Option<f64>,
    pub flavor: Option<Flavor>,
    pub amplitude: Option<f64>,
    pub seed: Option<u64>,
    pub scheme: SchemeConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// Everything a command needs after files and flags have been merged.
struct Resolved {
    net: NetworkState,
    params: EnergyParams,
    flavor: Flavor,
    scheme: SchemeConfig,
    out: Option<PathBuf>,
}

fn resolve(c: &Common, scheme_flags: impl FnOnce(&mut SchemeConfig)) -> Result<Resolved> {
    let file = match &c.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut scheme = file.scheme.clone();
    if let Some(n) = c.grid {
        scheme.n = n;
    }
    scheme_flags(&mut scheme);
    let mu = c.mu.or(file.mu);
    let (net, params) = match c.input.parse::<ScenarioName>() {
        Ok(name) => {
            let spec = ScenarioSpec {
                name,
                n: scheme.n,
                mu: mu.unwrap_or(1.0),
                amplitude: c.amplitude.or(file.amplitude),
            };
            let seed = c.seed.or(file.seed);
            match (name, seed) {
                (ScenarioName::ThetaSymmetric, Some(seed)) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let eps = [0; 3].map(|_| rng.random_range(-SEEDED_WARP..SEEDED_WARP));
                    let params = EnergyParams::new(spec.mu)?;
                    (theta_warped(spec.n, eps)?, params)
                }
                _ => {
                    let s = scenario::build(&spec)?;
                    (s.net, s.params)
                }
            }
        }
        Err(_) => {
            let path = Path::new(&c.input);
            if !path.exists() {
                return Err(Error::UnknownScenario(c.input.clone()));
            }
            let (net, params) = read_snapshot(path)?;
            let params = match mu {
                Some(m) => EnergyParams::new(m)?,
                None => params,
            };
            (net, params)
        }
    };
    let flavor = c
        .flavor
        .or(file.flavor)
        .unwrap_or_else(|| Flavor::for_topology(net.topology()));
    Ok(Resolved {
        net,
        params,
        flavor,
        scheme,
        out: c.out.clone(),
    })
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Io(_)
        | Error::Parse(_)
        | Error::UnknownScenario(_)
        | Error::InvalidArgument(_)
        | Error::GridTooSmall { .. }
        | Error::WrongTopology { .. } => EXIT_ERROR,
        _ => EXIT_FAIL,
    }
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn verdict(pass: bool) -> i32 {
    if pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn cmd_scenario(c: &Common, stdout: &mut dyn Write) -> Result<i32> {
    if c.input.parse::<ScenarioName>().is_err() {
        return Err(Error::UnknownScenario(c.input.clone()));
    }
    let r = resolve(c, |_| {})?;
    emit(&r.out, &Snapshot::from_network(&r.net, &r.params).to_json(), stdout)?;
    Ok(EXIT_PASS)
}

fn cmd_check(c: &Common, tolerance: Option<f64>, stdout: &mut dyn Write) -> Result<i32> {
    let r = resolve(c, |_| {})?;
    let mut geometric = geometric_admissibility(&r.net, &r.params, r.flavor)?;
    let mut parametric = parametric_admissibility(&r.net, &r.params, r.flavor);
    // snapshot files hold grid-derived data and get the looser default
    let from_file = c.input.parse::<ScenarioName>().is_err();
    if let Some(t) = tolerance.or(from_file.then_some(GRID_TOLERANCE)) {
        geometric = geometric.with_tolerance(t);
        parametric = parametric.with_tolerance(t);
    }
    let flavor = match r.flavor {
        Flavor::C0 => "c0",
        Flavor::C1 => "c1",
    };
    let text = format!("[geometric {flavor}]\n{geometric}\n\n[parametric {flavor}]\n{parametric}\n");
    emit(&r.out, &text, stdout)?;
    Ok(verdict(geometric.pass() && parametric.pass()))
}

fn cmd_ls(c: &Common, stdout: &mut dyn Write) -> Result<i32> {
    let r = resolve(c, |_| {})?;
    let report = ls_verify(&r.net, &r.params, r.flavor)?;
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    emit(&r.out, &text, stdout)?;
    Ok(verdict(report.pass))
}

fn cmd_reparam(c: &Common, stdout: &mut dyn Write) -> Result<i32> {
    let r = resolve(c, |_| {})?;
    let map = build_reparametrization(&r.net, &r.params)?;
    let net = map.apply(&r.net)?;
    emit(&r.out, &Snapshot::from_network(&net, &r.params).to_json(), stdout)?;
    let flavor = Flavor::for_topology(net.topology());
    let report = parametric_admissibility(&net, &r.params, flavor).with_tolerance(GRID_TOLERANCE);
    Ok(verdict(report.pass()))
}

fn cmd_simulate(
    c: &Common,
    t_final: Option<f64>,
    dt: Option<f64>,
    frames_every: Option<usize>,
    stdout: &mut dyn Write,
) -> Result<i32> {
    let r = resolve(c, |s| {
        if let Some(t) = t_final {
            s.t_final = t;
        }
        if let Some(dt) = dt {
            s.dt_init = dt;
        }
        if let Some(k) = frames_every {
            s.snapshot_every = k;
        }
    })?;
    let dir = r
        .out
        .clone()
        .ok_or_else(|| Error::InvalidArgument("simulate needs --out DIR".into()))?;
    let trace = run_flow(&r.net, &r.scheme, &r.params, r.flavor)?;
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("trace.csv"), trace_csv(&trace))?;
    std::fs::write(
        dir.join("trace.json"),
        trace_json(&trace, &r.scheme, &r.params, r.flavor)?,
    )?;
    std::fs::write(
        dir.join("final.json"),
        Snapshot::from_network(&trace.final_state, &r.params).to_json(),
    )?;
    if !trace.snapshots.is_empty() {
        let frames = dir.join("frames");
        std::fs::create_dir_all(&frames)?;
        let bounds = Bounds::of(&trace.snapshots);
        for e in &trace.entries {
            if let Some(k) = e.snapshot {
                let svg = frame_svg(&trace.snapshots[k], &bounds, e.t);
                std::fs::write(frames.join(format!("frame_{k:05}.svg")), svg)?;
            }
        }
    }
    writeln!(
        stdout,
        "termination: {}; steps: {}; rejected: {}; energy: {:.10e} -> {:.10e}",
        trace.termination.label(),
        trace.entries.len() - 1,
        trace.rejected_steps,
        trace.initial_energy(),
        trace.final_energy()
    )?;
    Ok(verdict(trace.termination == Termination::TFinal))
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Reports go to `stdout`, diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 {
                write!(stdout, "{e}")
            } else {
                write!(stderr, "{e}")
            };
            return if code == 0 { EXIT_PASS } else { EXIT_ERROR };
        }
    };
    let result = match &cli.command {
        Command::Scenario(c) => cmd_scenario(c, stdout),
        Command::Check { common, tolerance } => cmd_check(common, *tolerance, stdout),
        Command::Ls(c) => cmd_ls(c, stdout),
        Command::Reparam(c) => cmd_reparam(c, stdout),
        Command::Simulate {
            common,
            t_final,
            dt,
            frames_every,
        } => cmd_simulate(common, *t_final, *dt, *frames_every, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code_for(&e)
        }
    }
}
