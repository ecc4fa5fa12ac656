use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lattice_echo::config::{parse_config, ConfigError, RunConfig};
use lattice_echo::core::{
    exp_sum_grid, radius_sweep, recover_lattice, threshold_set, FrequencySet, Realization, RegularGrid,
};
use lattice_echo::diagnostics::verify_lemmas;
use lattice_echo::io::{write_field, write_realization, write_sweep, IoError};
use lattice_echo::{Pool, ReportJson};

const AFTER_HELP: &str = "\
Configs are `key = value` lines; values are JSON literals or bare words.
Every key is optional; `lattice-echo defaults` prints the full default config.

Exit status: 0 on success, 2 for invalid input, 3 when recovery fails
numerically (no usable peaks, inconsistent lattice), 1 for I/O errors.";

#[derive(Parser)]
#[command(name = "lattice-echo", version, about = "Simulate perturbed lattices and recover them from one realization")]
#[command(after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Config file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent and the config has no `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, env = "LATTICE_ECHO_WORKERS", default_value_t = 0)]
    workers: usize,
    /// Overrides `radius` (window radius for simulate and scan).
    #[arg(long, global = true)]
    radius: Option<f64>,
    /// Overrides `box`, as `lo,hi`.
    #[arg(long = "box", global = true, value_parser = parse_box, allow_hyphen_values = true)]
    box_: Option<(f64, f64)>,
    /// Overrides `spacing`.
    #[arg(long, global = true)]
    spacing: Option<f64>,
    /// Overrides `beta`.
    #[arg(long, global = true)]
    beta: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the points of W within `radius` as CSV.
    Simulate,
    /// Evaluate M_R on the box grid and write it as CSV.
    Scan,
    /// Recover the lattice, offset and dispersion; writes a JSON report.
    Recover,
    /// Run the diagnostic suites; writes a JSON report.
    VerifyLemmas,
    /// M_R at each of `lambdas` for each of `radii`, as CSV.
    Sweep,
    /// Print the default config.
    Defaults,
}

fn parse_box(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let hi = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((lo, hi))
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] lattice_echo::core::Error),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    File(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) | CliError::File(_) => 1,
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    // Overrides go through the text form so they are validated like the file.
    let mut extra = String::new();
    if let Some(s) = common.seed {
        extra += &format!("seed = {s}\n");
    }
    if let Some(r) = common.radius {
        extra += &format!("radius = {r:?}\n");
    }
    if let Some((lo, hi)) = common.box_ {
        extra += &format!("box = [{lo:?}, {hi:?}]\n");
    }
    if let Some(s) = common.spacing {
        extra += &format!("spacing = {s:?}\n");
    }
    if let Some(b) = common.beta {
        extra += &format!("beta = {b:?}\n");
    }
    if !extra.is_empty() {
        let base: String = cfg
            .to_text()
            .lines()
            .filter(|l| !extra.lines().any(|e| l.split('=').next() == e.split('=').next()))
            .map(|l| format!("{l}\n"))
            .collect();
        cfg = parse_config(&(base + &extra))?;
    }
    Ok(cfg)
}

fn output(common: &Common, cfg: &RunConfig) -> Result<Box<dyn Write>, CliError> {
    let path = common.out.clone().or_else(|| cfg.out.as_ref().map(PathBuf::from));
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Defaults = cli.command {
        print!("{}", RunConfig::default().to_text());
        return Ok(());
    }
    let cfg = load(&cli.common)?;
    let pool = Pool::new(cli.common.workers).map_err(|e| std::io::Error::other(e.to_string()))?;
    let lat = cfg.lattice_spec();
    let realize = |needed: f64| {
        Realization::generate(&lat, &cfg.noise, &cfg.offset, cfg.seed, cfg.gen_radius.unwrap_or(needed), &pool)
    };
    let mut out = output(&cli.common, &cfg)?;
    match cli.command {
        Command::Simulate => {
            let real = realize(cfg.radius)?;
            write_realization(&mut out, &real, cfg.radius)?;
        }
        Command::Scan => {
            let real = realize(cfg.radius)?;
            let spacing = cfg.spacing.unwrap_or(1.0 / (3.0 * cfg.radius));
            let grid = RegularGrid::integer_box(cfg.dim(), cfg.box_lo, cfg.box_hi, spacing)?;
            let field = exp_sum_grid(&real, cfg.radius, &FrequencySet::Regular(grid), &pool)?;
            write_field(&mut out, &field)?;
            eprintln!("{} clusters with Re M_R > {}", threshold_set(&field, cfg.beta).len(), cfg.beta);
        }
        Command::Recover => {
            let params = cfg.recovery_params();
            let real = realize(params.r_verify)?;
            let report = recover_lattice(&real, &params, &pool)?;
            out.write_all(ReportJson::from_report(&report).to_json().as_bytes())?;
        }
        Command::VerifyLemmas => {
            out.write_all(verify_lemmas(&cfg, &pool)?.to_json().as_bytes())?;
        }
        Command::Sweep => {
            let max = cfg.radii.iter().copied().fold(0.0, f64::max);
            let real = realize(max)?;
            let mut rows = Vec::new();
            for lambda in &cfg.lambdas {
                for (r, z) in radius_sweep(&real, &cfg.radii, lambda)? {
                    rows.push((lambda.clone(), r, z));
                }
            }
            write_sweep(&mut out, &rows)?;
        }
        Command::Defaults => unreachable!(),
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
