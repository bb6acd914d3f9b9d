//! Argument parsing and dispatch for the `phk` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use phk_core::bundlealg::IntMat;

use crate::acceptance;
use crate::commands::{self, parse_direction, MapSettings, Report};
use crate::config::{pick, FileConfig, MapConfig, MatrixSpec};
use crate::error::RunError;
use crate::formats::BundleFile;

#[derive(Debug, Parser)]
#[command(name = "phk", version, about = "Experiments on perturbed Kummer-surface automorphisms and their torus-bundle extensions")]
pub struct Cli {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory for CSV and JSON outputs.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct MapArgs {
    /// Perturbation size.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Bump frequency d (the bump lives on scale 1/d).
    #[arg(long)]
    pub d: Option<u32>,
    /// Perturbation direction `a,b`.
    #[arg(long)]
    pub direction: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// A-map existence and simple connectivity for a torus bundle over a
    /// wedge of 2-spheres: checks A H = H F over the integers and
    /// surjectivity of H by Smith normal form. F is the action of
    /// diag(B, B) on the second homology of the Kummer surface.
    Bundle(BundleArgs),
    /// Iterates the perturbed torus map and records the orbit, the
    /// Kummer chart and the metric region of every point.
    Simulate(SimulateArgs),
    /// Lyapunov spectrum of the torus map or of the skew-product
    /// extension by QR re-orthonormalisation.
    Lyapunov(LyapunovArgs),
    /// Identities of the blow-up metric on the exceptional curves: the Q
    /// inversion law, the CP1 ratio bounds and chart consistency of the
    /// k-norm.
    VerifyMetric(VerifyMetricArgs),
    /// Partial hyperbolicity: searches (d, N) for an adapted metric in
    /// which every sampled one-step ratio lies in (lambda^-2, lambda^2),
    /// then checks the fibre rates of diag(B^2, I) dominate the base.
    VerifyPh(VerifyPhArgs),
    /// Ergodicity diagnostics for the skew product: running Birkhoff
    /// averages of characters of the translation fibre.
    Ergodicity(ErgodicityArgs),
    /// Runs the full acceptance suite and prints one line per criterion.
    ReportAll,
}

#[derive(Debug, Args)]
pub struct BundleArgs {
    /// Fibre automorphism: `B2`, `I`, or JSON rows such as `[[1,0],[0,1]]`.
    #[arg(long = "A", alias = "a")]
    pub a: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Bundle JSON file with the clutching matrix (default `[I_k | 0]`).
    #[arg(long)]
    pub clutching: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long)]
    pub iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LyapunovArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Number of independent orbits.
    #[arg(long)]
    pub orbits: Option<usize>,
    /// Fibre rank of the skew product; the base map alone when absent.
    #[arg(long)]
    pub skew_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyMetricArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// Multiplier mu; repeat for several. Default: 1.5, mu_eps and lambda.
    #[arg(long)]
    pub mu: Vec<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyPhArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long)]
    pub d_max: Option<u32>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Fibre rank for the domination check.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ErgodicityArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long)]
    pub k: Option<usize>,
    /// Translation vector, comma separated.
    #[arg(long)]
    pub omega: Option<String>,
    /// Character, comma separated; repeat for several.
    #[arg(long = "character")]
    pub characters: Vec<String>,
    #[arg(long)]
    pub iters: Option<usize>,
}

fn map_settings(flags: &MapArgs, file: &MapConfig, default: MapSettings) -> Result<MapSettings, RunError> {
    let direction = match &flags.direction {
        Some(s) => parse_direction(s)?,
        None => file.direction.map(|d| (d[0], d[1])).unwrap_or(default.direction),
    };
    Ok(MapSettings {
        epsilon: pick(flags.epsilon, &file.epsilon, default.epsilon),
        d: pick(flags.d, &file.d, default.d),
        direction,
    })
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, RunError> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| RunError::Config(format!("{what}: cannot parse `{t}`"))))
        .collect()
}

fn matrix_from_spec(spec: &MatrixSpec, k: usize) -> Result<IntMat, RunError> {
    match spec {
        MatrixSpec::Named(n) => commands::named_matrix(n, k),
        MatrixSpec::Rows(rows) => IntMat::from_rows(rows).map_err(|e| RunError::Config(format!("bundle.a: {e}"))),
    }
}

fn parse_matrix_flag(s: &str, k: usize) -> Result<IntMat, RunError> {
    if s.trim_start().starts_with('[') {
        let rows: Vec<Vec<i64>> =
            serde_json::from_str(s).map_err(|e| RunError::Config(format!("--A: {e}")))?;
        return matrix_from_spec(&MatrixSpec::Rows(rows), k);
    }
    commands::named_matrix(s, k)
}

/// Runs the parsed command. Output lines go to `stdout`; files are written
/// into the output directory when one is configured.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<bool, RunError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let seed = pick(cli.seed, &file.seed, 0);
    let jobs = pick(cli.jobs, &file.jobs, 0);
    let out = cli.out.clone().or_else(|| file.out.clone());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| RunError::Config(format!("jobs: {e}")))?;
    if let Command::ReportAll = cli.command {
        let results = pool.install(acceptance::run_all);
        for c in &results {
            writeln!(stdout, "{}", c.line())?;
        }
        let pass = results.iter().all(|c| c.pass);
        writeln!(stdout, "{}/{} criteria passed", results.iter().filter(|c| c.pass).count(), results.len())?;
        return Ok(pass);
    }
    let report = pool.install(|| dispatch(&cli.command, &file, seed))?;
    for l in &report.lines {
        writeln!(stdout, "{l}")?;
    }
    if let Some(dir) = out {
        write_files(&dir, &report)?;
    }
    Ok(report.pass)
}

fn write_files(dir: &Path, report: &Report) -> Result<(), RunError> {
    fs::create_dir_all(dir)?;
    for (name, data) in &report.files {
        fs::write(dir.join(name), data)?;
    }
    Ok(())
}

fn dispatch(cmd: &Command, file: &FileConfig, seed: u64) -> Result<Report, RunError> {
    match cmd {
        Command::Bundle(a) => {
            let k = pick(a.k, &file.bundle.k, 2);
            let m = pick(a.m, &file.bundle.m, 22);
            let matrix = match (&a.a, &file.bundle.a) {
                (Some(s), _) => parse_matrix_flag(s, k)?,
                (None, Some(spec)) => matrix_from_spec(spec, k)?,
                (None, None) => commands::named_matrix("B2", k)?,
            };
            let clutching = match a.clutching.as_ref().or(file.bundle.clutching.as_ref()) {
                Some(p) => {
                    let f = fs::File::open(p).map_err(|e| RunError::Config(format!("{}: {e}", p.display())))?;
                    let b = BundleFile::read(f)?;
                    if b.k != k || b.m != m {
                        return Err(RunError::Config(format!("{}: expected k = {k}, m = {m}", p.display())));
                    }
                    Some(b.to_mat()?)
                }
                None => None,
            };
            commands::bundle(&commands::BundleSettings { a: matrix, k, m, clutching })
        }
        Command::Simulate(a) => {
            let map = map_settings(&a.map, &file.map, MapSettings { epsilon: 0.05, d: 4, direction: (1, 1) })?;
            commands::simulate(&map, pick(a.iters, &file.simulate.iters, 1000), seed)
        }
        Command::Lyapunov(a) => {
            let map = map_settings(&a.map, &file.map, MapSettings { epsilon: 0.0, d: 1, direction: (1, 1) })?;
            commands::lyapunov(&commands::LyapunovSettings {
                map,
                iters: pick(a.iters, &file.lyapunov.iters, 100_000),
                orbits: pick(a.orbits, &file.lyapunov.orbits, 1),
                skew_k: a.skew_k.or(file.lyapunov.skew_k),
                seed,
            })
        }
        Command::VerifyMetric(a) => {
            let map = map_settings(&a.map, &file.map, MapSettings { epsilon: 0.05, d: 1, direction: (1, 1) })?;
            let mu = if a.mu.is_empty() { file.metric.mu.clone() } else { Some(a.mu.clone()) };
            commands::verify_metric(&commands::MetricSettings {
                map,
                mu,
                samples: pick(a.samples, &file.metric.samples, 10_000),
                seed,
            })
        }
        Command::VerifyPh(a) => {
            let map = map_settings(&a.map, &file.map, MapSettings { epsilon: 0.05, d: 1, direction: (8, 5) })?;
            commands::verify_ph(&commands::PhSettings {
                epsilon: map.epsilon,
                direction: map.direction,
                d_max: pick(a.d_max, &file.ph.d_max, 64),
                n_max: pick(a.n_max, &file.ph.n_max, 32),
                samples: pick(a.samples, &file.ph.samples, 10_000),
                k: pick(a.k, &file.ph.k, 4),
                seed,
            })
        }
        Command::Ergodicity(a) => {
            let map = map_settings(&a.map, &file.map, MapSettings { epsilon: 0.05, d: 4, direction: (1, 1) })?;
            let omega = match &a.omega {
                Some(s) => Some(parse_list::<f64>(s, "--omega")?),
                None => file.ergodicity.omega.clone(),
            };
            let characters = if a.characters.is_empty() {
                file.ergodicity.characters.clone()
            } else {
                Some(a.characters.iter().map(|c| parse_list::<i64>(c, "--character")).collect::<Result<_, _>>()?)
            };
            commands::ergodicity(&commands::ErgodicitySettings {
                map,
                k: pick(a.k, &file.ergodicity.k, 4),
                omega,
                characters,
                iters: pick(a.iters, &file.ergodicity.iters, 1_000_000),
                seed,
            })
        }
        Command::ReportAll => unreachable!("handled before dispatch"),
    }
}
