//! `pmoments`: verification suites and scans over prime power moduli.
//!
//! Exit status 0 when every check passes, 1 on a failed check or a numerical
//! error, 2 on invalid configuration.

mod config;
mod report;
mod scan;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{check_modulus, ConfigError, RawConfig, RunConfig};
use verify::Failure;

#[derive(Parser)]
#[command(name = "pmoments", version, about = "p-adic stationary phase, K_χ sums and L-value moments mod p^n")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an invariant suite and emit a JSON-lines report.
    Verify {
        suite: Suite,
        #[command(flatten)]
        common: Common,
    },
    /// Compute a table and emit CSV.
    Scan {
        kind: ScanKind,
        #[command(flatten)]
        common: Common,
        /// First exponent for `moments`; the last is `--nmax` (or `--n`).
        #[arg(long, default_value_t = 2)]
        nmin: u32,
        #[arg(long)]
        nmax: Option<u32>,
        /// Moment exponent: 2, 4 or 12.
        #[arg(long, default_value_t = 12)]
        k: u32,
        /// Points of the `V` grid for `large-values`.
        #[arg(long, default_value_t = 24)]
        points: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Padic,
    Stationary,
    Kchi,
    Products,
    Poisson,
    Postnikov,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScanKind {
    Moments,
    LargeValues,
    ProductConstants,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 3)]
    p: u64,
    #[arg(long, default_value_t = 5)]
    n: u32,
    #[arg(long)]
    q1: Option<u64>,
    #[arg(long)]
    q2: Option<u64>,
    #[arg(long)]
    qtilde: Option<u64>,
    /// Character index (`χ_a(g^j) = e(aj/φ)`) for single-character suites.
    #[arg(long, default_value_t = 1)]
    chi: u64,
    /// Override the suite tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for reports and tables; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "PPMOMENTS_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    /// Lift the `q ≤ 5·10⁵` cap.
    #[arg(long)]
    allow_large: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn config(&self, n: u32) -> Result<RunConfig, ConfigError> {
        if let Some(w) = self.workers {
            rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build_global()
                .map_err(|e| ConfigError(e.to_string()))?;
        }
        RawConfig {
            p: self.p,
            n,
            q1: self.q1,
            q2: self.q2,
            qtilde: self.qtilde,
            chi: self.chi,
            tol: self.tol,
            seed: self.seed,
            out: self.out.clone(),
            cache_dir: self.cache_dir.clone(),
            allow_large: self.allow_large,
        }
        .validate()
    }
}

fn suite_name(s: Suite) -> &'static str {
    match s {
        Suite::Padic => "padic",
        Suite::Stationary => "stationary",
        Suite::Kchi => "kchi",
        Suite::Products => "products",
        Suite::Poisson => "poisson",
        Suite::Postnikov => "postnikov",
    }
}

fn run_verify(suite: Suite, common: &Common) -> Result<bool, Failure> {
    let cfg = common.config(common.n)?;
    let cases = match suite {
        Suite::Padic => verify::padic(&cfg),
        Suite::Stationary => verify::stationary(&cfg),
        Suite::Kchi => verify::kchi(&cfg),
        Suite::Products => verify::products(&cfg),
        Suite::Poisson => verify::poisson(&cfg),
        Suite::Postnikov => verify::postnikov(&cfg),
    }?;
    let name = suite_name(suite);
    let text = report::render(name, &cases);
    report::emit(cfg.out.as_deref(), &format!("verify_{name}.jsonl"), &text)
        .map_err(|e| ConfigError(format!("cannot write report: {e}")))?;
    Ok(cases.iter().all(|c| c.pass()))
}

fn run_scan(kind: ScanKind, common: &Common, nmin: u32, nmax: Option<u32>, k: u32, points: usize) -> Result<bool, Failure> {
    let n = nmax.unwrap_or(common.n);
    let cfg = common.config(n)?;
    let (text, name) = match kind {
        ScanKind::Moments => {
            if ![2, 4, 12].contains(&k) {
                return Err(ConfigError(format!("--k {k} must be 2, 4 or 12")).into());
            }
            if nmin == 0 || nmin > n {
                return Err(ConfigError(format!("need 1 ≤ nmin ≤ nmax, got {nmin} and {n}")).into());
            }
            check_modulus(cfg.p, nmin, common.allow_large)?;
            (scan::moments(&cfg, nmin, k)?, format!("moments_p{}_k{k}.csv", cfg.p))
        }
        ScanKind::LargeValues => (
            scan::large_value_counts(&cfg, points)?,
            format!("large_values_p{}_n{}.csv", cfg.p, cfg.n),
        ),
        ScanKind::ProductConstants => (
            scan::product_constants(&cfg)?,
            format!("product_constants_p{}_n{}.csv", cfg.p, cfg.n),
        ),
    };
    report::emit(cfg.out.as_deref(), &name, &text).map_err(|e| ConfigError(format!("cannot write output: {e}")))?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify { suite, common } => run_verify(*suite, common),
        Command::Scan { kind, common, nmin, nmax, k, points } => run_scan(*kind, common, *nmin, *nmax, *k, *points),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
    }
}
