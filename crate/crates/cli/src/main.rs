//! `nilgroup` command-line interface.
//!
//! Every subcommand accepts `--config FILE`, a JSON object whose keys are the
//! subcommand's long flag names in camelCase; flags given on the command line
//! win. Failures print a JSON object on stderr and exit with 2 (configuration),
//! 3 (numerical failure), or 4 (I/O).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use commands::{
    DistArgs, FastMarchArgs, GroupArgs, KeyPointsArgs, ProjectArgs, SynthArgs, ValidateArgs,
};

/// Directory used for outputs when no explicit path is given.
pub const OUTPUT_DIR_ENV: &str = "NILGROUP_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "nilgroup",
    version,
    about = "Sub-Riemannian distances, fast marching, and perceptual grouping"
)]
struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON file with defaults for the subcommand's flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Approximate distance between two poses from the gauge norm of the logarithm.
    Dist(DistArgs),
    /// Solve the eikonal equation and write the distance and arc-length fields.
    Fastmarch(FastMarchArgs),
    /// Detect key points on a binary mask.
    Keypoints(KeyPointsArgs),
    /// Key points, pairwise distances, and greedy grouping into a graph.
    Group(GroupArgs),
    /// Generate synthetic random-walk volumes.
    Synth(SynthArgs),
    /// Compare reference distances with the gauge norm over ranges and ζ.
    ValidateZeta(ValidateArgs),
    /// Minimum projection of a field onto a 2D image (PGM or CSV).
    Project(ProjectArgs),
}

/// Failure with an exit code class.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl From<nilgroup::Error> for CliError {
    fn from(e: nilgroup::Error) -> Self {
        use nilgroup::Error as E;
        let msg = e.to_string();
        match e {
            E::Io { .. } => CliError::Io(msg),
            E::Numerical(_) | E::Singularity => CliError::Numerical(msg),
            E::InvalidParameter { .. }
            | E::DimensionMismatch { .. }
            | E::NotARotation { .. }
            | E::MissingData(_)
            | E::Format(_) => CliError::Config(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Overlays the flags given on the command line onto the config file.
fn merge<T: Serialize + DeserializeOwned>(flags: T, config: Option<&Value>) -> CliResult<T> {
    let Some(file) = config else { return Ok(flags) };
    let Value::Object(mut base) = file.clone() else {
        return Err(CliError::Config(
            "config file must hold a JSON object".into(),
        ));
    };
    let given = serde_json::to_value(&flags).map_err(|e| CliError::Config(e.to_string()))?;
    if let Value::Object(over) = given {
        for (k, v) in over {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base))
        .map_err(|e| CliError::Config(format!("config: {e}")))
}

fn read_config(path: &PathBuf) -> CliResult<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Run metadata written next to every output.
pub fn metadata(command: &str, parameters: &impl Serialize, extra: Map<String, Value>) -> Value {
    let mut m = Map::new();
    m.insert("tool".into(), json!("nilgroup"));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("command".into(), json!(command));
    m.insert(
        "parameters".into(),
        serde_json::to_value(parameters).unwrap_or(Value::Null),
    );
    m.insert("threads".into(), json!(rayon::current_num_threads()));
    m.extend(extra);
    Value::Object(m)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let config = cli.config.as_ref().map(read_config).transpose()?;
    let cfg = config.as_ref();
    match cli.command {
        Command::Dist(a) => commands::dist(merge(a, cfg)?),
        Command::Fastmarch(a) => commands::fastmarch(merge(a, cfg)?),
        Command::Keypoints(a) => commands::keypoints(merge(a, cfg)?),
        Command::Group(a) => commands::group(merge(a, cfg)?),
        Command::Synth(a) => commands::synth(merge(a, cfg)?),
        Command::ValidateZeta(a) => commands::validate_zeta(merge(a, cfg)?),
        Command::Project(a) => commands::project(merge(a, cfg)?),
    }
}

fn report(err: &CliError) -> ExitCode {
    eprintln!(
        "{}",
        json!({ "error": err.kind(), "message": err.message(), "exitCode": err.code() })
    );
    ExitCode::from(err.code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return report(&CliError::Config(e.to_string().trim().to_string()));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
