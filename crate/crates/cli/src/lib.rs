//! Command-line driver: configuration, experiment subcommands and CSV output.

pub mod commands;
pub mod config;
pub mod csv;
pub mod error;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use skgs_core::grid::SchemeKind;

use crate::commands::Report;
use crate::config::Command;
use crate::csv::CsvDoc;
use crate::error::CliError;

/// Environment variable read when `--threads` is absent.
pub const THREADS_ENV: &str = "SKGS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "skgs", version, about = "Stochastic Klein-Gordon-Schrodinger experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// One path: charge and energy per step, optional field snapshots.
    Simulate(RunArgs),
    /// Ensemble mean of the charge against its evolution law.
    ChargeLaw(RunArgs),
    /// Ensemble mean of the energy against its evolution law.
    EnergyLaw(RunArgs),
    /// Mean-square error against a fine reference path, per dt.
    Converge(RunArgs),
    /// Symplectic wedge drift of FD-SRK along random tangent pairs.
    Symplectic(RunArgs),
    /// Multi-symplectic wedge drift of MSFD along random tangent pairs.
    Multisymplectic(RunArgs),
    /// Re-run the experiment recorded in a CSV's metadata.
    Rerun {
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the resolved configuration of a command as TOML.
    Config {
        command: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (same as `--set ensemble.seed=N`).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output file; a directory when several schemes are requested.
    /// Standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Comma-separated scheme names, `all`, or `laws` for the six
    /// linearly implicit schemes. Overrides `scheme.name`.
    #[arg(long)]
    schemes: Option<String>,
}

fn parse_schemes(s: &str) -> Result<Vec<SchemeKind>, CliError> {
    match s {
        "all" => Ok(SchemeKind::ALL.to_vec()),
        "laws" => Ok(SchemeKind::EVOLUTION_LAW_FAMILY.to_vec()),
        _ => s
            .split(',')
            .map(|n| n.trim().parse::<SchemeKind>().map_err(CliError::from))
            .collect(),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// `--threads`, else the environment variable, else rayon's default.
fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn check_out(out: &Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(p) if p.as_os_str().is_empty() => Err(CliError::Usage("--out must not be empty".into())),
        _ => Ok(()),
    }
}

fn stem(r: &Report) -> String {
    let base = format!("{}-{}", r.command.name(), r.scheme);
    if r.part == "main" {
        base
    } else {
        format!("{base}-{}", r.part)
    }
}

/// `a/b.csv` becomes `a/b.fields.csv` for secondary parts.
fn part_path(out: &Path, part: &str) -> PathBuf {
    if part == "main" {
        return out.to_path_buf();
    }
    let s = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    out.with_file_name(format!("{s}.{part}{ext}"))
}

fn emit(reports: &[Report], out: &Option<PathBuf>, many: bool, stdout: &mut dyn std::io::Write, log: &mut dyn std::io::Write) -> Result<(), CliError> {
    let mut targets = Vec::new();
    match out {
        None if many || reports.len() > 1 && reports.iter().any(|r| r.scheme != reports[0].scheme) => {
            return Err(CliError::Usage("several schemes need --out DIR".into()))
        }
        None => {
            for r in reports.iter().filter(|r| r.part == "main") {
                stdout
                    .write_all(r.render().as_bytes())
                    .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
            }
            if reports.iter().any(|r| r.part != "main") {
                return Err(CliError::Usage("field snapshots need --out".into()));
            }
        }
        Some(dir) if many => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            for r in reports {
                targets.push((dir.join(format!("{}.csv", stem(r))), r));
            }
        }
        Some(path) => {
            for r in reports {
                targets.push((part_path(path, r.part), r));
            }
        }
    }
    for (path, r) in targets {
        write(&path, &r.render())?;
        let verdict = match r.passed {
            Some(true) => " [check passed]",
            Some(false) => " [check FAILED]",
            None => "",
        };
        let _ = writeln!(log, "wrote {}{verdict}", path.display());
    }
    Ok(())
}

fn dispatch(cli: Cli, stdout: &mut dyn std::io::Write, log: &mut dyn std::io::Write) -> Result<(), CliError> {
    let (cmd, args) = match cli.cmd {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::ChargeLaw(a) => (Command::ChargeLaw, a),
        Sub::EnergyLaw(a) => (Command::EnergyLaw, a),
        Sub::Converge(a) => (Command::Converge, a),
        Sub::Symplectic(a) => (Command::Symplectic, a),
        Sub::Multisymplectic(a) => (Command::Multisymplectic, a),
        Sub::Rerun { csv, out, threads: t } => {
            check_out(&out)?;
            let text = read(&csv)?;
            let doc = CsvDoc::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", csv.display())))?;
            let mut report = commands::rerun(&doc, threads(t)?)?;
            // The rerun goes exactly where asked, whatever part it is.
            report.part = "main";
            return emit(&[report], &out, false, stdout, log);
        }
        Sub::Config { command, config, set } => {
            let cmd = Command::from_name(&command).ok_or_else(|| CliError::Usage(format!("unknown command `{command}`")))?;
            let file = config.as_deref().map(read).transpose()?;
            let cfg = config::resolve(cmd, file.as_deref(), &set)?;
            return stdout
                .write_all(cfg.to_toml().as_bytes())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e));
        }
    };
    check_out(&args.out)?;
    let file = args.config.as_deref().map(read).transpose()?;
    let mut overrides = args.set.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("ensemble.seed={seed}"));
    }
    let schemes = args.schemes.as_deref().map(parse_schemes).transpose()?.unwrap_or_default();
    let cfg = config::resolve(cmd, file.as_deref(), &overrides)?;
    let reports = commands::run(cmd, &cfg, &schemes, threads(args.threads)?)?;
    emit(&reports, &args.out, schemes.len() > 1, stdout, log)
}

/// Parses `argv`, runs, and returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
