use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cstar_bimod::document::{self, Loaded};
use cstar_bimod::report::{self, Options};
use cstar_bimod::Error;
use serde_json::json;

#[derive(Parser)]
#[command(name = "bimod", version, about = "Simplicity analysis for Cuntz-Pimsner algebras of finite-dimensional correspondences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Numerical tolerance; overrides the document's options.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Word-length cap for the cylinder-projection search.
    #[arg(long, global = true)]
    depth_cap: Option<usize>,
    /// Truncation level N of the Fock space.
    #[arg(long, global = true)]
    fock_level: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a document and check its structural invariants.
    Validate { file: PathBuf },
    /// Ideal lattice, witness routes and the simplicity verdict.
    Analyze { file: PathBuf },
    /// Compare the Gram-matrix norm of Σθ_{x,y} with the flattened operator norm.
    Norm {
        file: PathBuf,
        /// Number of random instances (sum lengths 1..=count).
        #[arg(long, default_value_t = 3)]
        count: usize,
    },
    /// Dimensions of a tensor power and the inner-product identity.
    Tensor {
        file: PathBuf,
        #[arg(long, default_value_t = 2)]
        level: usize,
    },
    /// Run the witness routes and optionally amplify the result.
    Witness {
        file: PathBuf,
        /// Witness level k.
        #[arg(long)]
        level: Option<usize>,
        /// Amplify until ‖T′*σ(T′)‖ < epsilon.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Toeplitz relations, gauge action and degree averaging on the truncated Fock space.
    FockCheck { file: PathBuf },
    /// Index of the inclusion, Jones projection and finite-type index.
    Index { file: PathBuf },
}

impl Command {
    fn file(&self) -> &PathBuf {
        match self {
            Command::Validate { file }
            | Command::Analyze { file }
            | Command::Norm { file, .. }
            | Command::Tensor { file, .. }
            | Command::Witness { file, .. }
            | Command::FockCheck { file }
            | Command::Index { file } => file,
        }
    }
}

/// A finished run: what to print and whether it certified.
struct Outcome {
    text: String,
    structured: serde_json::Value,
    success: bool,
}

fn outcome<R: std::fmt::Display + serde::Serialize>(r: &R, success: bool) -> Outcome {
    Outcome { text: r.to_string(), structured: serde_json::to_value(r).expect("reports serialize"), success }
}

fn options(cli: &Cli, loaded: &Loaded) -> Options {
    let mut o = Options::from_document(loaded);
    o.tol = cli.tol.unwrap_or(o.tol);
    o.depth_cap = cli.depth_cap.unwrap_or(o.depth_cap);
    o.fock_level = cli.fock_level.unwrap_or(o.fock_level);
    o.seed = cli.seed.unwrap_or(o.seed);
    o
}

fn run(cli: &Cli) -> Result<Outcome, Error> {
    let loaded = document::validate(cli.command.file())?;
    let mut opts = options(cli, &loaded);
    Ok(match &cli.command {
        Command::Validate { .. } => {
            let b = &loaded.bimodule;
            let text = format!(
                "valid {} document{}\nalgebra {:?}, {} coordinates, complex dimension {}\n",
                document::FORMAT_VERSION,
                loaded.doc.name.as_deref().map(|n| format!(" \"{n}\"")).unwrap_or_default(),
                b.shape().block_sizes(),
                b.k(),
                b.module().dim()
            );
            let structured = json!({
                "valid": true,
                "version": document::FORMAT_VERSION,
                "name": loaded.doc.name,
                "algebra": b.shape().block_sizes(),
                "coordinates": b.k(),
                "dim": b.module().dim(),
                "inclusion": loaded.inclusion.is_some(),
                "conjugate": loaded.conjugate.is_some(),
            });
            Outcome { text, structured, success: true }
        }
        Command::Analyze { .. } => {
            let r = report::analyze(&loaded, &opts)?;
            outcome(&r, r.certified())
        }
        Command::Norm { count, .. } => {
            let r = report::norm_check(&loaded, &opts, (*count).max(1)).map_err(Error::in_stage("norm"))?;
            outcome(&r, r.agree)
        }
        Command::Tensor { level, .. } => {
            let r = report::tensor_check(&loaded, &opts, *level).map_err(Error::in_stage("tensor"))?;
            outcome(&r, r.ok)
        }
        Command::Witness { level, epsilon, .. } => {
            if let Some(k) = level {
                opts.witness_level = *k;
            }
            let r = report::witness_check(&loaded, &opts, *epsilon).map_err(Error::in_stage("witness"))?;
            outcome(&r, r.certified())
        }
        Command::FockCheck { .. } => {
            let r = report::fock_check(&loaded, &opts).map_err(Error::in_stage("fock"))?;
            outcome(&r, r.ok)
        }
        Command::Index { .. } => {
            let r = report::index_report(&loaded, &opts).map_err(Error::in_stage("index"))?;
            let ok = r.consistent;
            outcome(&r, ok)
        }
    })
}

/// A closed pipe (`bimod analyze x.json | head`) is not an error worth a panic.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(o) => {
            match cli.format {
                Format::Text => emit(&o.text),
                Format::Structured => emit(&format!("{}\n", serde_json::to_string_pretty(&o.structured).expect("json"))),
            }
            ExitCode::from(if o.success { 0 } else { 1 })
        }
        Err(e) => {
            let code = if e.is_input_error() { 2 } else { 1 };
            match cli.format {
                Format::Text => eprintln!("error: {e}"),
                Format::Structured => emit(&format!("{}\n", json!({ "error": e.to_string(), "input_error": e.is_input_error() }))),
            }
            ExitCode::from(code)
        }
    }
}
