//! `ltlab`: run experiment suites from flags or a config file.
//!
//! Flags are turned into the same `key = value` pairs a config file holds, so
//! both paths share one parser and one set of error messages.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ltlab_core::experiments::config::ExperimentConfig;
use ltlab_core::experiments::harness::{run_and_write, run_config_file};

#[derive(Parser)]
#[command(name = "ltlab", version = ltlab_core::VERSION, about = "Local times of random walk on the 2D torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Thick or thin point counts at the inverse local time.
    Census(Flags),
    /// Late points: sites first visited after the scaled cover-time threshold.
    Late(Flags),
    /// Normalized maximum and minimum of the local-time field.
    Extremes(Flags),
    /// Successful centers of the multiscale excursion construction.
    Excursions(Flags),
    /// Isomorphism and domination checks against the free field.
    GffCheck(Flags),
    /// Logarithmic asymptotics of the killed Green's function.
    GreenCheck(Flags),
    /// Census sweep with a log-log exponent fit.
    Exponents(Flags),
    /// Run a `key = value` config file.
    Run {
        config: PathBuf,
    },
}

#[derive(Args)]
struct Flags {
    /// Torus sides, comma separated.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    /// Thickness levels, comma separated.
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    replicas: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Data file; the summary goes next to it as `<stem>.summary.json`.
    #[arg(long)]
    out: Option<String>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Worker threads; 0 means one per core.
    #[arg(long)]
    workers: Option<String>,
    /// thick or thin.
    #[arg(long)]
    sign: Option<String>,
    /// Local-time level for gff-check.
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    r0: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    depth: Option<String>,
    /// Radii for green-check, comma separated.
    #[arg(long)]
    radius: Option<String>,
    /// thick, thin or late, for exponents.
    #[arg(long)]
    kind: Option<String>,
}

impl Flags {
    fn pairs(self, suite: &str) -> Vec<(String, String)> {
        let fields = [
            ("n", self.n),
            ("theta", self.theta),
            ("eta", self.eta),
            ("replicas", self.replicas),
            ("seed", self.seed),
            ("out", self.out),
            ("format", self.format),
            ("workers", self.workers),
            ("sign", self.sign),
            ("t", self.t),
            ("r0", self.r0),
            ("rho", self.rho),
            ("depth", self.depth),
            ("radius", self.radius),
            ("kind", self.kind),
        ];
        let mut pairs = vec![("suite".to_string(), suite.to_string())];
        pairs.extend(fields.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
        pairs
    }
}

fn run_flags(suite: &str, flags: Flags) -> i32 {
    match ExperimentConfig::from_pairs(&flags.pairs(suite)).and_then(|cfg| run_and_write(&cfg)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Census(f) => run_flags("census", f),
        Command::Late(f) => run_flags("late", f),
        Command::Extremes(f) => run_flags("extremes", f),
        Command::Excursions(f) => run_flags("excursions", f),
        Command::GffCheck(f) => run_flags("gff-check", f),
        Command::GreenCheck(f) => run_flags("green-check", f),
        Command::Exponents(f) => run_flags("exponents", f),
        Command::Run { config } => run_config_file(&config),
    };
    ExitCode::from(code as u8)
}
