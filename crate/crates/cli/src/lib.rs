//! Manifest-driven front end for `wagner-core`.
//!
//! Every command reads a JSON manifest, evaluates in parallel over manifest
//! points, and assembles its report in input order, so reports are
//! byte-identical across runs and thread counts. Floats are written with 17
//! significant digits.
//!
//! Exit codes: 0 pass, 1 computed with failures, 2 unusable input.

pub mod commands;
pub mod manifest;

use std::io;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

pub use manifest::Manifest;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAILURES: i32 = 1;
pub const EXIT_UNUSABLE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Manifest(String),
}

#[derive(Debug, Parser)]
#[command(name = "wagner", version, about = "Truncated metric connections and Wagner curvature on contact sub-Finsler charts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Validate,
    Eval,
    Brackets,
    Scan,
    Transport,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Manifest JSON file.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Run even when validation fails.
    #[arg(long)]
    pub force: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accept m = 1 charts.
    #[arg(long)]
    pub allow_m1: bool,
    /// Directory for transport CSV traces; defaults to the report's directory.
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the contact condition and the metric axioms.
    Validate(CommonArgs),
    /// Connection and curvature at every manifest point.
    Eval(CommonArgs),
    /// Compare curvature formulas with finite-difference frame brackets.
    Brackets(CommonArgs),
    /// Classify the structure as flat or not over the sample box.
    Scan(CommonArgs),
    /// Transport the manifest's vectors along its curves.
    Transport(CommonArgs),
}

impl Command {
    pub fn split(&self) -> (CommandKind, &CommonArgs) {
        match self {
            Command::Validate(a) => (CommandKind::Validate, a),
            Command::Eval(a) => (CommandKind::Eval, a),
            Command::Brackets(a) => (CommandKind::Brackets, a),
            Command::Scan(a) => (CommandKind::Scan, a),
            Command::Transport(a) => (CommandKind::Transport, a),
        }
    }
}

/// Finished report and the exit code it implies.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: String,
}

/// Serializes with two-space indentation and `{:.16e}` floats; non-finite
/// floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("report types always serialize");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

struct SciFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for SciFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    engine: commands::Engine,
    command: &'a str,
    error: ErrorBody,
}

#[derive(Serialize)]
struct ErrorBody {
    kind: &'static str,
    message: String,
}

fn command_name(kind: CommandKind) -> &'static str {
    match kind {
        CommandKind::Validate => "validate",
        CommandKind::Eval => "eval",
        CommandKind::Brackets => "brackets",
        CommandKind::Scan => "scan",
        CommandKind::Transport => "transport",
    }
}

/// Runs one command. Never panics on bad input; unusable manifests give
/// exit code 2 and a JSON error object.
pub fn run(kind: CommandKind, args: &CommonArgs) -> Outcome {
    let unusable = |e: CliError| {
        let kind_name = match e {
            CliError::Io(_) => "io",
            CliError::Manifest(_) => "manifest",
        };
        Outcome {
            exit_code: EXIT_UNUSABLE,
            report: to_json(&ErrorReport { engine: commands::Engine::current(), command: command_name(kind), error: ErrorBody { kind: kind_name, message: e.to_string() } }),
        }
    };
    let setup = match Manifest::load(&args.manifest).and_then(|m| m.setup(args.allow_m1)) {
        Ok(s) => s,
        Err(e) => return unusable(e),
    };
    let trace_dir = args
        .trace_dir
        .clone()
        .or_else(|| args.out.as_ref().and_then(|p| p.parent()).map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    let result = match kind {
        CommandKind::Validate => Ok(commands::validate(&setup)),
        CommandKind::Eval => Ok(commands::eval(&setup, args.force)),
        CommandKind::Brackets => Ok(commands::brackets(&setup, args.force)),
        CommandKind::Scan => Ok(commands::scan(&setup, args.force)),
        CommandKind::Transport => commands::transport(&setup, args.force, &trace_dir),
    };
    match result {
        Ok((passed, report)) => Outcome { exit_code: if passed { EXIT_PASS } else { EXIT_FAILURES }, report },
        Err(e) => unusable(e),
    }
}
