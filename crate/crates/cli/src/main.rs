use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use stefan_spde::config::RunConfig;
use stefan_spde::experiment::run_convergence;
use stefan_spde::limit::melting_enhancement_report;
use stefan_spde::manifest::{ArtifactWriter, RunManifest, RunStatus};
use stefan_spde::solver::{simulate_path, solve_limit, PathDiagnostics, Trajectory};
use stefan_spde::spectral::snapshot;
use stefan_spde::validate::{run_suite, SuiteOptions};
use stefan_spde::Error;

/// Stochastic Stefan problem with transport noise: simulation, deterministic limit and
/// convergence experiments.
#[derive(Parser)]
#[command(name = "stefan", version)]
struct Cli {
    /// Print a machine-readable summary on stdout.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one stochastic path.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Overrides `noise.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve the deterministic limit equation.
    Limit {
        #[command(flatten)]
        run: RunArgs,
        /// Also compare liquid fractions with and without the turbulence term.
        #[arg(long)]
        with_enhancement: bool,
    },
    /// Run the Monte Carlo convergence experiment.
    Converge {
        #[command(flatten)]
        run: RunArgs,
        /// Overrides `experiment.base_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the fast property suite.
    Validate {
        /// Use a noise family with broken radial symmetry (negative control).
        #[arg(long)]
        break_symmetry: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print a configuration file.
    Config {
        /// Commented example holding every default.
        #[arg(long)]
        example: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "STEFAN_OUT_DIR", default_value = "stefan-out")]
    out: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::InvalidParameter { .. } | Error::InvalidGrid(_) | Error::ZeroMode => 2,
            Error::BlowUp { .. } | Error::NonFinite(_) => 3,
            Error::TooManyAborted { .. } => 4,
            _ => 1,
        };
        let mut message = e.to_string();
        if let Error::TooManyAborted { failures, .. } = &e {
            for f in failures {
                message.push_str(&format!(
                    "\n  N = {} replica {} blew up at step {} (t = {})",
                    f.radius, f.replica, f.step, f.time
                ));
            }
        }
        Failure { code, message }
    }
}

type CmdResult = Result<(), Failure>;

fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        return t;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn load(path: Option<&Path>) -> Result<RunConfig, Error> {
    match path {
        Some(p) => RunConfig::from_path(p).map_err(|e| match e {
            Error::Config(m) if !m.contains(&p.display().to_string()) => {
                Error::Config(format!("{}: {m}", p.display()))
            }
            e => e,
        }),
        None => Ok(RunConfig::default()),
    }
}

fn write_trajectory(w: &mut ArtifactWriter, traj: &Trajectory, diag: &PathDiagnostics) -> Result<(), Error> {
    for (i, state) in traj.states.iter().enumerate() {
        w.write(&format!("snapshots/state_{i:05}.bin"), &snapshot::encode(state))?;
    }
    let mut csv = Vec::new();
    diag.write_csv(&mut csv)?;
    w.write("diagnostics.csv", &csv)
}

fn finish(w: ArtifactWriter, json_out: bool, extra: serde_json::Value) -> CmdResult {
    let dir = w.dir().to_path_buf();
    let m = w.finish()?;
    if json_out {
        let mut v = json!({
            "command": m.command,
            "out": dir.display().to_string(),
            "artifacts": m.artifacts.len(),
        });
        if let (Some(obj), serde_json::Value::Object(e)) = (v.as_object_mut(), extra) {
            obj.extend(e);
        }
        println!("{v}");
    } else {
        eprintln!("wrote {} files to {}", m.artifacts.len() + 1, dir.display());
    }
    Ok(())
}

fn simulate(run: &RunArgs, seed: Option<u64>, json_out: bool) -> CmdResult {
    let mut cfg = load(run.config.as_deref())?;
    if let Some(s) = seed {
        cfg.noise.seed = s;
    }
    let solver = cfg.solver_config()?;
    let x0 = cfg.initial_field(&solver.base.grid)?;
    let mut manifest = RunManifest::new("simulate", cfg.clone(), timestamp());
    manifest.noise = Some(solver.noise.manifest());
    let (traj, diag) = simulate_path(&x0, &solver, cfg.noise.replica)?;
    let mut w = ArtifactWriter::create(&run.out, manifest)?;
    write_trajectory(&mut w, &traj, &diag)?;
    w.manifest.record_run("path", RunStatus::Completed, None);
    let e = diag.l2_energy.last().copied().unwrap_or(0.0);
    finish(w, json_out, json!({ "final_l2_energy": e }))
}

fn limit(run: &RunArgs, enhancement: bool, json_out: bool) -> CmdResult {
    let cfg = load(run.config.as_deref())?;
    let lim = cfg.limit_config()?;
    let x0 = cfg.initial_field(&lim.grid)?;
    let (traj, diag) = solve_limit(&x0, &lim)?;
    let mut w = ArtifactWriter::create(&run.out, RunManifest::new("limit", cfg, timestamp()))?;
    write_trajectory(&mut w, &traj, &diag)?;
    w.manifest.record_run("limit", RunStatus::Completed, None);
    if enhancement {
        let rep = melting_enhancement_report(&x0, &lim)?;
        let mut csv = Vec::new();
        rep.write_csv(&mut csv)?;
        w.write("enhancement.csv", &csv)?;
        w.manifest.record_run("enhancement", RunStatus::Completed, None);
    }
    finish(w, json_out, json!({}))
}

fn converge(run: &RunArgs, seed: Option<u64>, threads: Option<usize>, json_out: bool) -> CmdResult {
    let mut cfg = load(run.config.as_deref())?;
    if let Some(s) = seed {
        cfg.experiment.base_seed = s;
    }
    let mut plan = cfg.plan()?;
    plan.threads = threads;
    let mut w = ArtifactWriter::create(&run.out, RunManifest::new("converge", cfg, timestamp()))?;
    let report = match run_convergence(&plan) {
        Ok(r) => r,
        Err(e) => {
            let detail = e.to_string();
            let fail = Failure::from(e);
            if fail.code == 4 {
                w.manifest.record_run("converge", RunStatus::Failed, Some(detail));
                w.finish()?;
            }
            return Err(fail);
        }
    };
    w.write("report.json", report.to_json()?.as_bytes())?;
    let mut rows = Vec::new();
    report.write_rows_csv(&mut rows)?;
    w.write("report.csv", &rows)?;
    let mut plot = Vec::new();
    report.write_plot_csv(&mut plot)?;
    w.write("plot.csv", &plot)?;
    for row in &report.rows {
        w.manifest.record_run(&format!("N={}", row.radius), RunStatus::Completed, None);
    }
    let d: Vec<f64> = report.rows.iter().map(|r| r.mean_distance).collect();
    finish(w, json_out, json!({ "mean_distance": d }))
}

fn validate(break_symmetry: bool, threads: Option<usize>, json_out: bool) -> CmdResult {
    let results = run_suite(SuiteOptions { break_symmetry, threads })?;
    if json_out {
        println!("{}", serde_json::to_string_pretty(&results).map_err(Error::from)?);
    } else {
        for r in &results {
            println!(
                "{} {:<28} measured {:.3e}  threshold {:.3e}  ({})",
                if r.passed { "PASS" } else { "FAIL" },
                r.name,
                r.measured,
                r.threshold,
                r.detail
            );
        }
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: 4,
            message: format!("failed properties: {}", failed.join(", ")),
        })
    }
}

fn config(example: bool, path: Option<&Path>) -> CmdResult {
    if example {
        print!("{}", RunConfig::example());
        return Ok(());
    }
    let cfg = load(path)?;
    cfg.validate()?;
    print!("{}", cfg.to_toml_string()?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Simulate { run, seed } => simulate(run, *seed, cli.json),
        Command::Limit { run, with_enhancement } => limit(run, *with_enhancement, cli.json),
        Command::Converge { run, seed, threads } => converge(run, *seed, *threads, cli.json),
        Command::Validate { break_symmetry, threads } => validate(*break_symmetry, *threads, cli.json),
        Command::Config { example, config: path } => config(*example, path.as_deref()),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
