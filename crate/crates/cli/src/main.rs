//! Batch front end. Every subcommand reads one TOML configuration and writes
//! its artifacts plus `manifest.txt` into the output directory.
//!
//! Exit status: 0 success, 2 usage error, 3 invalid configuration,
//! 4 numerical failure, 1 failure to write output.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use cyclofield::config::{parse_config, Overrides, RunConfig};
use cyclofield::fieldsim::{estimate_covariance, write_sample, FieldRealization, FrequencySampler};
use cyclofield::functionals::{functional_path, NormalizationConstants};
use cyclofield::harness::{convergence_study, run_experiment};
use cyclofield::io::{self, write_atomic};
use cyclofield::limits::{simulate_limit, LimitProcess};
use cyclofield::Error;

const DEFAULT_LADDER: [f64; 4] = [10.0, 100.0, 1000.0, 10000.0];

#[derive(Parser)]
#[command(name = "cyclofield", version, about = "Weighted functionals of Gaussian random fields with singular spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration and print a summary.
    Validate(Common),
    /// Spectral density on the `[field] lambdas` grid.
    Density(Common),
    /// Covariance function at the `[field] lags`.
    Covariance(Common),
    /// One field realization: frequency dump and values at `[field] points`.
    Simulate(Common),
    /// `X_{r,j}(t)` of one realization next to its oracle and limit variances.
    Functional(Common),
    /// Limit covariance kernel and simulated limit paths.
    Limit(Common),
    /// `R_r(t)` and `S_r(t)` over the r ladder.
    Convergence(Common),
    /// Full Monte Carlo experiment.
    Experiment(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; defaults to `[output] dir`, then the current directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of replications M.
    #[arg(long)]
    replications: Option<usize>,
    /// Scale r.
    #[arg(long)]
    r: Option<f64>,
    /// Frequencies per field N.
    #[arg(long)]
    frequencies: Option<usize>,
}

enum Failure {
    Usage(String),
    Run(Error),
    Write(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Write(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            if e.is_numerical() {
                eprintln!("numerical failure: {e}");
                ExitCode::from(4)
            } else {
                eprintln!("invalid configuration: {e}");
                ExitCode::from(3)
            }
        }
    }
}

struct Output {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Output {
    fn add(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), contents.into()));
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (name, common) = match &cli.command {
        Command::Validate(c) => ("validate", c),
        Command::Density(c) => ("density", c),
        Command::Covariance(c) => ("covariance", c),
        Command::Simulate(c) => ("simulate", c),
        Command::Functional(c) => ("functional", c),
        Command::Limit(c) => ("limit", c),
        Command::Convergence(c) => ("convergence", c),
        Command::Experiment(c) => ("experiment", c),
    };
    let text = fs::read_to_string(&common.config)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", common.config.display())))?;
    let overrides = Overrides {
        seed: common.seed,
        replications: common.replications,
        r: common.r,
        frequencies: common.frequencies,
    };
    let cfg = parse_config(&text, overrides)?;
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let mut out = Output { dir, files: Vec::new() };
    let start = Instant::now();
    match cli.command {
        Command::Validate(_) => {
            validate(&cfg)?;
            return Ok(());
        }
        Command::Density(_) => density(&cfg, &mut out)?,
        Command::Covariance(_) => covariance(&cfg, &mut out)?,
        Command::Simulate(_) => simulate(&cfg, &mut out)?,
        Command::Functional(_) => functional(&cfg, &mut out)?,
        Command::Limit(_) => limit(&cfg, &mut out)?,
        Command::Convergence(_) => convergence(&cfg, &mut out)?,
        Command::Experiment(_) => experiment(&cfg, &mut out)?,
    }
    let elapsed = start.elapsed().as_secs_f64();
    write_outputs(&out, name, &text, &cfg, elapsed)
}

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_outputs(out: &Output, name: &str, config: &str, cfg: &RunConfig, elapsed: f64) -> Result<(), Failure> {
    let werr = |p: &Path, e: std::io::Error| Failure::Write(format!("cannot write {}: {e}", p.display()));
    fs::create_dir_all(&out.dir).map_err(|e| werr(&out.dir, e))?;
    let mut manifest = format!(
        "command={name}\nconfig_sha256={}\nseed={}\nversion={}\nelapsed_seconds={}\n",
        hex(config.as_bytes()),
        cfg.experiment.seed,
        env!("CARGO_PKG_VERSION"),
        io::num(elapsed),
    );
    for (file, contents) in &out.files {
        let path = out.dir.join(file);
        write_atomic(&path, contents).map_err(|e| werr(&path, e))?;
        manifest.push_str(&format!("file.{file}={}\n", hex(contents)));
    }
    let path = out.dir.join("manifest.txt");
    write_atomic(&path, manifest.as_bytes()).map_err(|e| werr(&path, e))?;
    for (file, _) in &out.files {
        println!("{}", out.dir.join(file).display());
    }
    Ok(())
}

fn validate(cfg: &RunConfig) -> Result<(), Failure> {
    let e = &cfg.experiment;
    let consts = NormalizationConstants::for_weight(&e.model, &e.weight)?;
    println!(
        "ok: n={} components={} j={} a_j={} alpha_j={} total_mass={}",
        e.model.dimension(),
        e.model.components().len(),
        e.weight.j,
        io::num(e.weight.a_j),
        io::num(consts.alpha),
        io::num(e.model.total_mass()?),
    );
    Ok(())
}

fn density(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let m = &cfg.experiment.model;
    let rows = cfg
        .field
        .lambdas
        .iter()
        .map(|&l| match m.density(l) {
            Ok(v) => Ok(vec![Some(l), Some(v)]),
            Err(Error::SingularPoint { .. }) => Ok(vec![Some(l), None]),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>, Error>>()?;
    out.add("density.csv", io::table_csv(&["lambda", "density"], &rows));
    Ok(())
}

fn covariance(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let e = &cfg.experiment;
    let lags = &cfg.field.lags;
    let empirical = if cfg.field.covariance_replications > 0 {
        Some(estimate_covariance(&e.model, lags, e.frequencies, cfg.field.covariance_replications, e.seed)?)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(lags.len());
    for (k, &lag) in lags.iter().enumerate() {
        let c = e.model.covariance(lag, e.tolerance).map_err(|err| err.context(format!("covariance at lag {lag}")))?;
        let (emp, se) = match &empirical {
            Some(v) => (Some(v[k].estimate), v[k].stderr),
            None => (None, None),
        };
        rows.push(vec![Some(lag), Some(c.value), Some(c.error), emp, se]);
    }
    out.add("covariance.csv", io::table_csv(&["lag", "value", "error", "empirical", "stderr"], &rows));
    Ok(())
}

fn simulate(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let e = &cfg.experiment;
    let sample = FrequencySampler::new(&e.model)?.sample(e.frequencies, e.seed, 0)?;
    let mut dump = Vec::new();
    write_sample(&sample, &mut dump).map_err(|err| Failure::Write(err.to_string()))?;
    out.add("frequencies.bin", dump);
    let field = FieldRealization::new(&sample);
    let n = e.model.dimension();
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.push("value".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<Option<f64>>> = cfg
        .field
        .points
        .iter()
        .map(|p| p.iter().copied().chain([field.evaluate_at(p)]).map(Some).collect())
        .collect();
    out.add("field.csv", io::table_csv(&header, &rows));
    Ok(())
}

fn functional(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let e = &cfg.experiment;
    let consts = NormalizationConstants::for_weight(&e.model, &e.weight)?;
    let sample = FrequencySampler::new(&e.model)?.sample(e.frequencies, e.seed, 0)?;
    let path = functional_path(&FieldRealization::new(&sample), &e.weight, &consts, e.r, &e.t_grid, &e.quadrature)?;
    let limit = LimitProcess::new(&e.weight, consts.alpha)?;
    let mut rows = Vec::new();
    for (k, &t) in e.t_grid.iter().enumerate() {
        let v = cyclofield::functionals::normalized_variance(&e.model, &e.weight, &consts, e.r, t, e.tolerance)?;
        rows.push(vec![Some(t), Some(path.values[k]), Some(v.value), Some(v.error), Some(limit.variance(t))]);
    }
    out.add(
        "functional.csv",
        io::table_csv(&["t", "value", "oracle_variance", "oracle_error", "limit_variance"], &rows),
    );
    Ok(())
}

fn limit(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let e = &cfg.experiment;
    let consts = NormalizationConstants::for_weight(&e.model, &e.weight)?;
    let process = LimitProcess::new(&e.weight, consts.alpha)?;
    let l = &cfg.limit;
    let kernel = process.covariance_matrix(&l.t_grid)?;
    let paths = simulate_limit(&process, &l.t_grid, l.replications, l.method, e.seed)?;
    out.add("limit_covariance.csv", io::grid_csv(&l.t_grid, &kernel));
    out.add("limit_paths.csv", io::grid_csv(&l.t_grid, &paths));
    Ok(())
}

fn convergence(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let e = &cfg.experiment;
    let consts = NormalizationConstants::for_weight(&e.model, &e.weight)?;
    let ladder = if e.ladder.is_empty() { DEFAULT_LADDER.to_vec() } else { e.ladder.clone() };
    let t = *e.t_grid.last().expect("validated non-empty");
    let table = convergence_study(&e.model, &e.weight, &consts, &ladder, t, e.tolerance)?;
    out.add("convergence.csv", io::convergence_csv(&table));
    if table.decreasing() == Some(false) {
        eprintln!("warning: R_r (or S_r) did not decrease along the ladder");
    }
    Ok(())
}

fn experiment(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let rep = run_experiment(&cfg.experiment)?;
    out.add("report.txt", io::report_text(&rep));
    out.add("qq.csv", io::qq_csv(&rep.qq));
    out.add("samples.csv", io::samples_csv(&rep));
    if let Some(c) = &rep.convergence {
        out.add("convergence.csv", io::convergence_csv(c));
    }
    Ok(())
}
