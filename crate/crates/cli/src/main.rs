//! `bie2d` command-line runner.

mod report;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bie2d::linsolve::Method;
use bie2d::problems::evaluate_field_grid;
use bie2d::scenarios::{GridSpec, ScenarioConfig, ScenarioKind};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Parser)]
#[command(name = "bie2d", version, about = "Boundary integral solvers for multi-body electrostatics and Stokes flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a built-in scenario or a scenario configuration file.
    Solve(SolveArgs),
    /// List the built-in scenarios.
    List {
        /// Print the list as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Print the configuration file of a built-in scenario.
    Config { scenario: String },
}

#[derive(Args)]
struct SolveArgs {
    /// Built-in scenario name or path to a configuration file.
    target: String,
    /// Gap between the two discs.
    #[arg(long = "d")]
    gap: Option<f64>,
    /// Lattice rows of the nanocomposite.
    #[arg(long = "m")]
    rows: Option<usize>,
    /// Ellipse aspect ratio of the nanocomposite.
    #[arg(long = "A")]
    aspect: Option<f64>,
    /// GMRES relative residual target.
    #[arg(long)]
    tol: Option<f64>,
    /// Solve with dense LU instead of GMRES.
    #[arg(long)]
    dense: bool,
    /// Worker thread cap.
    #[arg(long)]
    threads: Option<usize>,
    /// Directory for the report, grid and residual files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Field grid as x0,y0,x1,y1,nx,ny.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    grid: Option<GridSpec>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Invalid(bie2d::Error),
    #[error("{source}; residual history written to {}", history.display())]
    Stalled { source: bie2d::Error, history: PathBuf },
    #[error("solve failed: {0}")]
    Solver(bie2d::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Invalid(_) => 2,
            CliError::Stalled { .. } | CliError::Solver(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

fn parse_grid(text: &str) -> Result<GridSpec, String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return Err("expected x0,y0,x1,y1,nx,ny".into());
    }
    let mut bbox = [0.0; 4];
    for (b, p) in bbox.iter_mut().zip(&parts) {
        *b = p.parse().map_err(|e| format!("bad coordinate {p:?}: {e}"))?;
    }
    let count = |p: &str| p.parse::<usize>().map_err(|e| format!("bad grid size {p:?}: {e}"));
    Ok(GridSpec {
        bbox,
        nx: count(parts[4])?,
        ny: count(parts[5])?,
    })
}

/// Preset name or configuration file, and the stem used for output files.
fn load_config(target: &str) -> Result<(ScenarioConfig, String), CliError> {
    if let Some(kind) = ScenarioKind::parse(target) {
        if kind == ScenarioKind::Custom {
            return Err(CliError::Usage("the custom scenario needs a configuration file".into()));
        }
        return Ok((ScenarioConfig::preset(kind), target.to_string()));
    }
    let path = Path::new(target);
    if !path.is_file() {
        let names: Vec<&str> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
        return Err(CliError::Usage(format!(
            "{target:?} is neither a scenario ({}) nor a file",
            names.join(", ")
        )));
    }
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let cfg = ScenarioConfig::from_toml(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    Ok((cfg, stem))
}

fn ensure_writable(dir: &Path) -> Result<(), CliError> {
    let probe = dir.join(".bie2d-write-probe");
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&probe, b""))
        .and_then(|_| fs::remove_file(&probe))
        .map_err(|e| CliError::Usage(format!("output directory {} is not writable: {e}", dir.display())))
}

fn solve(args: SolveArgs) -> Result<(), CliError> {
    let (mut cfg, stem) = load_config(&args.target)?;
    if args.gap.is_some() {
        cfg.gap = args.gap;
    }
    if args.rows.is_some() {
        cfg.rows = args.rows;
    }
    if args.aspect.is_some() {
        cfg.aspect = args.aspect;
    }
    if let Some(tol) = args.tol {
        cfg.solver.tol = tol;
    }
    if args.dense {
        cfg.solver.method = Method::Dense;
    }
    if args.grid.is_some() {
        cfg.grid = args.grid;
    }
    cfg.validate().map_err(CliError::Invalid)?;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    ensure_writable(&args.out)?;

    let config_text = cfg.to_toml();
    let checksum = format!("{:x}", Sha256::digest(config_text.as_bytes()));
    let scenario = cfg.build().map_err(CliError::Invalid)?;
    let outcome = match scenario.run(&cfg.solver) {
        Ok(o) => o,
        Err(bie2d::Error::NoConvergence(stalled)) => {
            let history = args.out.join(format!("{stem}.residuals.txt"));
            let text: String = stalled.history.iter().enumerate().map(|(i, r)| format!("{i}\t{r:e}\n")).collect();
            fs::write(&history, text).map_err(CliError::io(&history))?;
            return Err(CliError::Stalled {
                source: bie2d::Error::NoConvergence(stalled),
                history,
            });
        }
        Err(e @ (bie2d::Error::Singular | bie2d::Error::CenterTooClose)) => return Err(CliError::Solver(e)),
        Err(e) => return Err(CliError::Invalid(e)),
    };

    let meta = report::Meta {
        version: bie2d::VERSION,
        checksum: &checksum,
        stem: &stem,
    };
    let text = report::render(&meta, &cfg, &scenario, &outcome).map_err(CliError::Solver)?;
    let report_path = args.out.join(format!("{stem}.report"));
    fs::write(&report_path, &text).map_err(CliError::io(&report_path))?;
    print!("{text}");
    println!("# report written to {}", report_path.display());

    if let Some(g) = &cfg.grid {
        let grid = evaluate_field_grid(&scenario.disc, outcome.primary(), g.bbox, g.nx, g.ny)
            .map_err(CliError::Solver)?;
        let grid_path = args.out.join(format!("{stem}.grid.tsv"));
        fs::write(&grid_path, report::render_grid(&grid)).map_err(CliError::io(&grid_path))?;
        println!("# grid written to {}", grid_path.display());
    }
    Ok(())
}

fn list(json: bool) {
    if json {
        let entries: Vec<serde_json::Value> = ScenarioKind::ALL
            .iter()
            .map(|k| {
                serde_json::json!({
                    "name": k.name(),
                    "description": k.description(),
                    "reference": k.reference(),
                })
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&entries).expect("list serializes"));
    } else {
        for k in ScenarioKind::ALL {
            println!("{}\n    {}\n    reference: {}", k.name(), k.description(), k.reference());
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(args) => solve(args),
        Command::List { json } => {
            list(json);
            Ok(())
        }
        Command::Config { scenario } => match ScenarioKind::parse(&scenario) {
            Some(kind) if kind != ScenarioKind::Custom => {
                print!("{}", ScenarioConfig::preset(kind).to_toml());
                Ok(())
            }
            _ => Err(CliError::Usage(format!("no built-in configuration named {scenario:?}"))),
        },
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
