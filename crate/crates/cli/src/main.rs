use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plap_cli::config::parse_config_text;
use plap_cli::{run, CliError, ExperimentConfig, Kind};

/// p-Laplace frequency-function experiments.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<String>,
    /// Mesh jitter seed (0 = no jitter); also seeds sample points
    #[arg(long, global = true)]
    seed: Option<String>,
    #[command(flatten)]
    keys: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the regularized problem and write the field
    Solve,
    /// Profile I, D, F_p and I' on the radius window
    Frequency,
    /// Energy identity, I' bound and gradient estimate on a solved field
    Verify,
    /// Weak doubling scan on the solved profile
    Doubling,
    /// Ellipticity and linearization residuals for a catalog field
    Linearize,
    /// Condition, Poincare, Caccioppoli and convexity probes
    Probes,
    /// List the closed-form solution catalog
    Catalog,
}

/// Per-key overrides of the configuration file.
#[derive(Debug, Args)]
struct Overrides {
    #[arg(long, global = true)]
    domain: Option<String>,
    #[arg(long, global = true)]
    center: Option<String>,
    #[arg(long, global = true)]
    r_outer: Option<String>,
    #[arg(long, global = true)]
    r_inner: Option<String>,
    #[arg(long, global = true)]
    h: Option<String>,
    #[arg(long, global = true)]
    p: Option<String>,
    #[arg(long, global = true)]
    boundary: Option<String>,
    #[arg(long, global = true)]
    ball_center: Option<String>,
    /// `r_b,R_b`
    #[arg(long, global = true)]
    window: Option<String>,
    #[arg(long, global = true)]
    grid: Option<String>,
    #[arg(long, global = true)]
    n_theta: Option<String>,
    #[arg(long, global = true)]
    eps0: Option<String>,
    #[arg(long, global = true)]
    eps_factor: Option<String>,
    #[arg(long, global = true)]
    eps_min: Option<String>,
    #[arg(long, global = true)]
    picard_tol: Option<String>,
    #[arg(long, global = true)]
    residual_tol: Option<String>,
    #[arg(long, global = true)]
    max_outer: Option<String>,
    #[arg(long, global = true)]
    max_inner: Option<String>,
    #[arg(long, global = true)]
    linear_tol: Option<String>,
    /// Comma-separated subset of I,D,F, or `none`
    #[arg(long, global = true)]
    plot: Option<String>,
    /// `a1,a2`
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, global = true)]
    field: Option<String>,
    #[arg(long, global = true)]
    samples: Option<String>,
}

impl Overrides {
    fn into_map(self, out: Option<String>, seed: Option<String>) -> BTreeMap<String, String> {
        let pairs = [
            ("domain", self.domain),
            ("center", self.center),
            ("r_outer", self.r_outer),
            ("r_inner", self.r_inner),
            ("h", self.h),
            ("p", self.p),
            ("boundary", self.boundary),
            ("ball_center", self.ball_center),
            ("window", self.window),
            ("grid", self.grid),
            ("n_theta", self.n_theta),
            ("eps0", self.eps0),
            ("eps_factor", self.eps_factor),
            ("eps_min", self.eps_min),
            ("picard_tol", self.picard_tol),
            ("residual_tol", self.residual_tol),
            ("max_outer", self.max_outer),
            ("max_inner", self.max_inner),
            ("linear_tol", self.linear_tol),
            ("plot", self.plot),
            ("alpha", self.alpha),
            ("field", self.field),
            ("samples", self.samples),
            ("out", out),
            ("seed", seed),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))).collect()
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let kind = match cli.command {
        Command::Catalog => {
            emit(&run::catalog());
            return Ok(());
        }
        Command::Solve => Kind::Solve,
        Command::Frequency => Kind::Frequency,
        Command::Verify => Kind::Verify,
        Command::Doubling => Kind::Doubling,
        Command::Linearize => Kind::Linearize,
        Command::Probes => Kind::Probes,
    };
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    let cfg = ExperimentConfig::resolve(kind, file, cli.keys.into_map(cli.out, cli.seed))?;
    let report = run::run(&cfg)?;
    emit(&report);
    Ok(())
}

/// Prints to stdout; a closed pipe is not an error.
fn emit(v: &serde_json::Value) {
    let text = serde_json::to_string_pretty(v).expect("json values serialize");
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
