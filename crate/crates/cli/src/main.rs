use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use critreg_cli::{run, ExperimentConfig, Kind, Report};

#[derive(Parser)]
#[command(
    name = "critreg",
    version,
    about = "Seeded verification runs with JSON/CSV reports"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sphere-equidistributing walk: certificates and batch statistics.
    Lemma1(RunArgs),
    /// Box sequences: multiplicity, roundness, side constants.
    Boxes(RunArgs),
    /// Good-segment chains through the B box sequences.
    ChainB(RunArgs),
    /// Orbit chains through the FF boxes, with the distortion budget.
    ChainFf(RunArgs),
    /// Exact distortion identity on the interval models.
    Identity(RunArgs),
    /// Derivative growth of 1-D maps.
    Dynamics(RunArgs),
    /// Print the checks of an existing report and exit with its status.
    Report {
        /// Directory holding report.json, or the file itself.
        path: PathBuf,
    },
}

#[derive(Args, Default)]
struct RunArgs {
    /// JSON configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    /// Comma-separated rationals, e.g. 1/2,1/2.
    #[arg(long)]
    alpha: Option<String>,
    /// geometric, symmetric-geometric or custom-file.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    family_file: Option<PathBuf>,
    /// Path lengths for lemma1, comma-separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    k_max: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<u32>,
    /// Output directory for report.json, CSV tables and .dat curves.
    #[arg(long)]
    out: Option<PathBuf>,
    /// b-d2, b-general or ff.
    #[arg(long)]
    sequence: Option<String>,
    /// b-d2, b-d3, b-general, ff-d3 or ff-general.
    #[arg(long)]
    chain: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// translation or ff.
    #[arg(long)]
    model: Option<String>,
    /// identity, parabolic, quadratic, logistic, mobius or affine.
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    param: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
}

impl RunArgs {
    fn into_config(self, kind: Kind) -> Result<ExperimentConfig, String> {
        let base = match &self.config {
            Some(p) => ExperimentConfig::load(p).map_err(|e| e.to_string())?,
            None => ExperimentConfig::default(),
        };
        if base.kind.is_some_and(|k| k != kind) {
            return Err(format!(
                "config file is for another experiment kind, not {}",
                kind.label()
            ));
        }
        let flags = ExperimentConfig {
            kind: Some(kind),
            d: self.d,
            alpha: self.alpha,
            family: self.family,
            family_file: self.family_file,
            n: self.n,
            n_max: self.n_max,
            k_max: self.k_max,
            seed: self.seed,
            samples: self.samples,
            out: self.out,
            sequence: self.sequence,
            chain: self.chain,
            lambda: self.lambda,
            model: self.model,
            map: self.map,
            param: self.param,
            x0: self.x0,
            grid: self.grid,
        };
        Ok(base.overridden_by(flags))
    }
}

fn threads() {
    if let Some(n) = std::env::var("CRITREG_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn status(report: &Report) -> ExitCode {
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    threads();
    let (kind, args) = match cli.cmd {
        Cmd::Lemma1(a) => (Kind::Lemma1, a),
        Cmd::Boxes(a) => (Kind::Boxes, a),
        Cmd::ChainB(a) => (Kind::ChainB, a),
        Cmd::ChainFf(a) => (Kind::ChainFf, a),
        Cmd::Identity(a) => (Kind::Identity, a),
        Cmd::Dynamics(a) => (Kind::Dynamics, a),
        Cmd::Report { path } => {
            let file = if path.is_dir() {
                path.join("report.json")
            } else {
                path
            };
            let parsed = std::fs::read_to_string(&file)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str::<Report>(&t).map_err(|e| e.to_string()));
            return match parsed {
                Ok(r) => {
                    print!("{}", r.summary());
                    status(&r)
                }
                Err(e) => {
                    eprintln!("error: {}: {e}", file.display());
                    ExitCode::from(1)
                }
            };
        }
    };
    let config = match args.into_config(kind) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let report = match run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(dir) = &config.out {
        if let Err(e) = report.write(dir) {
            eprintln!("error: writing {}: {e}", dir.display());
            return ExitCode::from(1);
        }
    } else {
        print!("{}", report.to_json());
    }
    eprint!("{}", report.summary());
    status(&report)
}
