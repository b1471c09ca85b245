use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{Category, CliError};

/// One configurable setting of a subcommand.
#[derive(Clone, Copy, Debug)]
pub struct Key {
    pub name: &'static str,
    /// `None` marks a required setting.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default: Some(default), help }
}

const fn required(name: &'static str, help: &'static str) -> Key {
    Key { name, default: None, help }
}

pub const COMMON: [Key; 2] = [
    key("seed", "0", "master seed"),
    key("workers", "1", "maximum number of worker threads"),
];

pub const GEN: &[Key] = &[
    key("n", "1000", "number of samples"),
    key("t", "24", "time steps per sample"),
    key("f", "8", "features per time step"),
    key("delta", "2", "class separation"),
    key("sigma", "1", "noise standard deviation"),
    key("train_fraction", "0.64", "share of samples in the train split"),
    key("validation_fraction", "0.16", "share of samples in the validation split"),
    key("test_fraction", "0.2", "share of samples in the test split"),
    key("format", "binary", "storage format: binary or csv"),
];

pub const CONDENSE: &[Key] = &[
    required("data", "directory written by `gen` (its train split is condensed)"),
    key("size", "20", "number of condensed samples, even"),
    key("t_star", "same", "time steps of condensed samples, or `same`"),
    key("iterations", "24000", "condensation iterations"),
    key("batch_size", "256", "original samples per class per iteration"),
    key("optimizer", "adam", "adam or sgd"),
    key("lr", "0.001", "learning rate on the condensed samples"),
    key("networks", "TCN-α,ViT-α,LSTM-α", "embedding architectures, comma separated"),
];

pub const EVAL: &[Key] = &[
    required("data", "directory written by `gen`"),
    key("train", "original", "training set: original or condensed"),
    key("condensed", "", "directory written by `condense`, needed for --train condensed"),
    key("archs", "all", "architectures to train, comma separated, or `all`"),
    key("repeats", "5", "trainings per architecture"),
    key("steps", "300", "optimizer steps per training"),
    key("batch_size", "64", "minibatch size"),
    key("lr", "0.001", "Adam learning rate"),
    key("eval_interval", "5", "steps between validation evaluations"),
    key("window", "5", "moving-average window of the convergence rule"),
    key("tolerance", "0.005", "AUC tolerance of the convergence rule"),
];

pub const DIAGNOSE: &[Key] = &[
    required("data", "directory written by `gen` (its train split is the reference)"),
    required("condensed", "directory written by `condense`"),
    key("bins", "20", "histogram bins"),
    key("features", "all", "feature indices for trend curves, comma separated, or `all`"),
];

pub const COMPARE: &[Key] = &[
    required("original", "`eval` output (directory or report.json) trained on originals"),
    required("condensed", "`eval` output (directory or report.json) trained on condensed data"),
];

/// Fully resolved settings of one command: defaults, then the config file,
/// then command-line flags.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    command: &'static str,
    order: Vec<&'static str>,
    values: BTreeMap<&'static str, String>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::new(Category::Config, msg)
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_config_text(text: &str, origin: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(config_err(format!("{origin}:{}: expected `key = value`, got `{line}`", i + 1)));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl Settings {
    pub fn resolve(
        command: &'static str,
        keys: &[Key],
        file: Option<&Path>,
        flags: &[(&'static str, String)],
    ) -> Result<Self, CliError> {
        let all: Vec<Key> = keys.iter().chain(COMMON.iter()).copied().collect();
        let mut values = BTreeMap::new();
        for k in &all {
            if let Some(d) = k.default {
                values.insert(k.name, d.to_string());
            }
        }
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::new(Category::Io, format!("{}: {e}", path.display())))?;
            for (k, v) in parse_config_text(&text, &path.display().to_string())? {
                let Some(spec) = all.iter().find(|s| s.name == k) else {
                    return Err(config_err(format!("{}: unknown setting `{k}` for `{command}`", path.display())));
                };
                values.insert(spec.name, v);
            }
        }
        for (k, v) in flags {
            values.insert(k, v.clone());
        }
        if let Some(missing) = all.iter().find(|k| !values.contains_key(k.name)) {
            return Err(config_err(format!(
                "missing required setting `{}` (pass --{} or set it in the config file)",
                missing.name,
                flag_name(missing.name)
            )));
        }
        Ok(Settings { command, order: all.iter().map(|k| k.name).collect(), values })
    }

    pub fn str(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("`{key}` is not a setting of `{}`", self.command))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.str(key);
        raw.parse().map_err(|e| config_err(format!("invalid value `{raw}` for `{key}`: {e}")))
    }

    /// Comma-separated list, with `all` (or empty) mapping to `None`.
    pub fn list(&self, key: &str) -> Option<Vec<String>> {
        let raw = self.str(key);
        if raw.is_empty() || raw == "all" {
            return None;
        }
        Some(raw.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
    }

    pub fn map(&self) -> BTreeMap<String, String> {
        self.values.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    /// The `run.cfg` text; feeding it back through `--config` reproduces the run.
    pub fn render(&self) -> String {
        let mut s = format!("# resolved settings of `tscond {}`\n", self.command);
        for k in &self.order {
            s.push_str(&format!("{k} = {}\n", self.values[k]));
        }
        s
    }
}

pub fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_is_flag_then_file_then_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.cfg");
        fs::write(&path, "# comment\nn = 50\n\nsigma=0.5\nseed = 9\n").unwrap();
        let s = Settings::resolve("gen", GEN, Some(&path), &[("n", "70".into())]).unwrap();
        assert_eq!(s.get::<usize>("n").unwrap(), 70);
        assert_eq!(s.get::<f64>("sigma").unwrap(), 0.5);
        assert_eq!(s.get::<u64>("seed").unwrap(), 9);
        assert_eq!(s.get::<usize>("t").unwrap(), 24);

        let again = dir.path().join("run.cfg");
        fs::write(&again, s.render()).unwrap();
        assert_eq!(Settings::resolve("gen", GEN, Some(&again), &[]).unwrap(), s);
    }

    #[test]
    fn rejects_unknown_missing_and_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.cfg");
        fs::write(&path, "nn = 50\n").unwrap();
        let err = Settings::resolve("gen", GEN, Some(&path), &[]).unwrap_err();
        assert_eq!(err.category, Category::Config);
        assert!(err.message.contains("unknown setting `nn`"));
        let err = Settings::resolve("condense", CONDENSE, None, &[]).unwrap_err();
        assert!(err.message.contains("`data`"), "{}", err.message);
        assert!(parse_config_text("just words", "x").is_err());
        let s = Settings::resolve("gen", GEN, None, &[("n", "many".into())]).unwrap();
        assert_eq!(s.get::<usize>("n").unwrap_err().category, Category::Config);
        let missing = Settings::resolve("gen", GEN, Some(&dir.path().join("nope.cfg")), &[]).unwrap_err();
        assert_eq!(missing.category, Category::Io);
    }

    #[test]
    fn lists() {
        let s = Settings::resolve("eval", EVAL, None, &[("data", "d".into()), ("archs", "TCN-α, RNN-β".into())]).unwrap();
        assert_eq!(s.list("archs").unwrap(), vec!["TCN-α", "RNN-β"]);
        assert_eq!(s.list("condensed"), None);
    }
}
