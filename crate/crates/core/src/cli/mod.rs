//! The `tscond` command line: `gen`, `condense`, `eval`, `diagnose`, `compare`.
//!
//! Every command resolves its settings from defaults, an optional
//! `key = value` file (`--config`) and flags, in increasing precedence, and
//! writes the resolved set as `run.cfg` next to its outputs. Failures print
//! one line `error[<category>]: <message>` and exit with the category's code.

mod commands;
mod config;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command};

pub use commands::{ArchComparison, CompareRow, CompareTable, DiagnoseSummary, EvalOutput, REPORT_FILE, RUN_CONFIG_FILE};
pub use config::{flag_name, parse_config_text, Key, Settings};

use crate::condense::CondenseError;
use crate::data::DataError;
use crate::eval::EvalError;
use crate::nets::NetError;
use crate::privacy::PrivacyError;
use crate::tensor::TensorError;

/// Error class, each with its own exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Usage,
    Config,
    Io,
    Shape,
    Format,
    Numeric,
    Other,
}

impl Category {
    pub fn tag(self) -> &'static str {
        match self {
            Category::Usage => "usage",
            Category::Config => "config",
            Category::Io => "io",
            Category::Shape => "shape",
            Category::Format => "format",
            Category::Numeric => "numeric",
            Category::Other => "other",
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Category::Usage | Category::Config => 2,
            Category::Io => 3,
            Category::Shape | Category::Format => 4,
            Category::Numeric => 5,
            Category::Other => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    pub fn new(category: Category, message: impl Into<String>) -> Self {
        CliError { category, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // one line, whatever the message contained
        let msg = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "error[{}]: {msg}", self.category.tag())
    }
}

impl std::error::Error for CliError {}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        CliError::new(Category::Shape, e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        let category = match &e {
            DataError::Io { .. } => Category::Io,
            DataError::Json { .. } | DataError::Format { .. } | DataError::Label { .. } | DataError::Stats(_) => {
                Category::Format
            }
            DataError::Shape(_) | DataError::Tensor(_) => Category::Shape,
            DataError::Split(_) | DataError::EmptyClass(_) => Category::Config,
        };
        CliError::new(category, e.to_string())
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        let category = match &e {
            NetError::UnknownArch(_) | NetError::UnknownFamily(_) | NetError::BadSpec(_) => Category::Config,
            NetError::InputShape { .. } | NetError::Tensor(_) => Category::Shape,
        };
        CliError::new(category, e.to_string())
    }
}

impl From<CondenseError> for CliError {
    fn from(e: CondenseError) -> Self {
        match e {
            CondenseError::Data(e) => e.into(),
            CondenseError::Net(e) => e.into(),
            CondenseError::Tensor(e) => e.into(),
            CondenseError::NonFinite { .. } => CliError::new(Category::Numeric, e.to_string()),
            CondenseError::Config(_) | CondenseError::ClassMismatch(_) | CondenseError::EmptyClass(_) => {
                CliError::new(Category::Config, e.to_string())
            }
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Data(e) => e.into(),
            EvalError::Net(e) => e.into(),
            EvalError::Tensor(e) => e.into(),
            EvalError::Trial { arch, repeat, source } => {
                let inner = CliError::from(*source);
                CliError::new(inner.category, format!("{arch} repeat {repeat}: {}", inner.message))
            }
            EvalError::NonFinite { .. } => CliError::new(Category::Numeric, e.to_string()),
            EvalError::SingleClass => CliError::new(Category::Format, e.to_string()),
            EvalError::Config(_) => CliError::new(Category::Config, e.to_string()),
        }
    }
}

impl From<PrivacyError> for CliError {
    fn from(e: PrivacyError) -> Self {
        let category = match &e {
            PrivacyError::Rank(_) | PrivacyError::ShapeMismatch { .. } | PrivacyError::TooFew { .. } | PrivacyError::Empty => {
                Category::Shape
            }
            PrivacyError::NoBins | PrivacyError::Feature { .. } => Category::Config,
            PrivacyError::NonFinite => Category::Numeric,
        };
        CliError::new(category, e.to_string())
    }
}

const COMMANDS: [(&str, &[Key], &str); 5] = [
    ("gen", config::GEN, "Generate a synthetic two-class dataset and split it into train/validation/test"),
    ("condense", config::CONDENSE, "Learn a condensed set from a train split"),
    ("eval", config::EVAL, "Train a cohort of classifiers on original or condensed data"),
    ("diagnose", config::DIAGNOSE, "Nearest-neighbour distances and variable trends of a condensed set"),
    ("compare", config::COMPARE, "Side-by-side summary of two eval reports"),
];

fn command() -> Command {
    let mut cmd = Command::new("tscond")
        .about("Distribution-matching condensation of labeled time-series data")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, keys, about) in COMMANDS {
        let mut sub = Command::new(name).about(about);
        for k in keys.iter().chain(config::COMMON.iter()) {
            let help = match k.default {
                Some(d) if !d.is_empty() => format!("{} [default: {d}]", k.help),
                _ => k.help.to_string(),
            };
            sub = sub.arg(Arg::new(k.name).long(flag_name(k.name)).value_name("VALUE").help(help));
        }
        sub = sub
            .arg(Arg::new("config").long("config").value_name("FILE").value_parser(clap::value_parser!(PathBuf)).help(
                "key = value settings file; flags take precedence",
            ))
            .arg(Arg::new("out").long("out").value_name("DIR").value_parser(clap::value_parser!(PathBuf)).help(
                "output directory",
            ));
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn settings_of(name: &'static str, keys: &[Key], m: &ArgMatches) -> Result<(Settings, Option<PathBuf>), CliError> {
    let flags: Vec<(&'static str, String)> = keys
        .iter()
        .chain(config::COMMON.iter())
        .filter_map(|k| m.get_one::<String>(k.name).map(|v| (k.name, v.clone())))
        .collect();
    let settings = Settings::resolve(name, keys, m.get_one::<PathBuf>("config").map(PathBuf::as_path), &flags)?;
    Ok((settings, m.get_one::<PathBuf>("out").cloned()))
}

/// Runs one command line, writing human-readable results to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            write!(stdout, "{}", e.render()).map_err(|e| CliError::new(Category::Io, e.to_string()))?;
            return Ok(());
        }
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return Err(CliError::new(Category::Usage, first));
        }
    };
    let (name, sub) = matches.subcommand().expect("a subcommand is required");
    let (name, keys, _) = COMMANDS.iter().find(|(n, ..)| *n == name).expect("registered subcommand");
    let (settings, out) = settings_of(name, keys, sub)?;
    let need_out = || out.clone().ok_or_else(|| CliError::new(Category::Usage, format!("`{name}` needs --out DIR")));
    match *name {
        "gen" => commands::gen(&settings, &need_out()?, stdout),
        "condense" => commands::condense(&settings, &need_out()?, stdout),
        "eval" => commands::eval(&settings, &need_out()?, stdout),
        "diagnose" => commands::diagnose(&settings, &need_out()?, stdout),
        "compare" => commands::compare(&settings, out.as_deref(), stdout),
        _ => unreachable!("registered subcommand"),
    }
}

/// Process entry point: runs `args` and maps failures to exit codes.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut stdout = std::io::stdout().lock();
    match run(args, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = stdout.flush();
            eprintln!("{e}");
            ExitCode::from(e.category.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (Result<(), CliError>, String) {
        let mut out = Vec::new();
        let r = run(std::iter::once("tscond").chain(args.iter().copied()), &mut out);
        (r, String::from_utf8(out).unwrap())
    }

    #[test]
    fn usage_errors_are_single_line() {
        let (r, _) = run_args(&["frobnicate"]);
        let e = r.unwrap_err();
        assert_eq!(e.category, Category::Usage);
        assert_eq!(e.category.exit_code(), 2);
        assert!(!e.to_string().contains('\n'));
        assert!(e.to_string().starts_with("error[usage]: "));
        let (r, _) = run_args(&["gen"]);
        assert!(r.unwrap_err().message.contains("--out"));
    }

    #[test]
    fn help_goes_to_stdout() {
        let (r, text) = run_args(&["condense", "--help"]);
        r.unwrap();
        assert!(text.contains("--batch-size"));
        assert!(text.contains("--workers"));
    }

    #[test]
    fn exit_codes_are_distinct_per_failure_kind() {
        let codes = [Category::Config, Category::Io, Category::Shape, Category::Numeric, Category::Other].map(Category::exit_code);
        let mut sorted = codes.to_vec();
        sorted.dedup();
        assert_eq!(sorted.len(), codes.len());
    }
}
