use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::NetError;

/// Network family and its hyperparameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// Multi-scale temporal convolution: `layers` TC layers, each with one
    /// causal-conv branch per kernel size, `hidden` channels per branch.
    MsTcn { kernels: Vec<usize>, hidden: usize, layers: usize },
    /// Transformer encoder with temporal mean pooling.
    Trsf { layers: usize, heads: usize, head_dim: usize, mlp_hidden: usize },
    /// Transformer encoder read out at a prepended learnable class token.
    Vit { layers: usize, heads: usize, head_dim: usize, mlp_hidden: usize },
    Lstm { hidden: usize },
    Rnn { hidden: usize },
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::MsTcn { .. } => "MS-TCN",
            Family::Trsf { .. } => "TRSF",
            Family::Vit { .. } => "ViT",
            Family::Lstm { .. } => "LSTM",
            Family::Rnn { .. } => "RNN",
        }
    }
}

/// One architecture: family hyperparameters plus input feature width.
/// The output is always a single logit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub name: String,
    pub family: Family,
    pub input_dim: usize,
}

/// Catalog names, in reporting order.
pub const CATALOG_NAMES: [&str; 11] =
    ["TCN-α", "TCN-β", "TCN-γ", "ViT-α", "ViT-β", "TRSF-α", "TRSF-β", "LSTM-α", "LSTM-β", "RNN-α", "RNN-β"];

/// Architectures sampled during condensation by default.
pub const DEFAULT_COLLECTION: [&str; 3] = ["TCN-α", "ViT-α", "LSTM-α"];

fn normalize(name: &str) -> String {
    name.trim()
        .to_lowercase()
        .replace('α', "alpha")
        .replace('β', "beta")
        .replace('γ', "gamma")
        .replace(['_', ' '], "-")
}

impl ArchSpec {
    /// Looks up a catalog entry. Accepts `TCN-α`, `tcn-alpha`, `TCN_ALPHA`, ...
    pub fn catalog(name: &str, input_dim: usize) -> Result<ArchSpec, NetError> {
        let key = normalize(name);
        let (canonical, family) = match key.as_str() {
            "tcn-alpha" => ("TCN-α", Family::MsTcn { kernels: vec![3, 5, 7], hidden: 64, layers: 2 }),
            "tcn-beta" => ("TCN-β", Family::MsTcn { kernels: vec![3], hidden: 64, layers: 2 }),
            "tcn-gamma" => ("TCN-γ", Family::MsTcn { kernels: vec![3, 5], hidden: 64, layers: 2 }),
            "trsf-alpha" => ("TRSF-α", Family::Trsf { layers: 2, heads: 16, head_dim: 64, mlp_hidden: 64 }),
            "trsf-beta" => ("TRSF-β", Family::Trsf { layers: 2, heads: 4, head_dim: 256, mlp_hidden: 128 }),
            "vit-alpha" => ("ViT-α", Family::Vit { layers: 4, heads: 16, head_dim: 64, mlp_hidden: 64 }),
            "vit-beta" => ("ViT-β", Family::Vit { layers: 4, heads: 4, head_dim: 128, mlp_hidden: 128 }),
            "lstm-alpha" => ("LSTM-α", Family::Lstm { hidden: 256 }),
            "lstm-beta" => ("LSTM-β", Family::Lstm { hidden: 128 }),
            "rnn-alpha" => ("RNN-α", Family::Rnn { hidden: 256 }),
            "rnn-beta" => ("RNN-β", Family::Rnn { hidden: 128 }),
            _ => return Err(NetError::UnknownArch(name.to_string())),
        };
        let spec = ArchSpec { name: canonical.to_string(), family, input_dim };
        spec.validate()?;
        Ok(spec)
    }

    /// All 11 catalog entries for a given input width.
    pub fn full_catalog(input_dim: usize) -> Vec<ArchSpec> {
        CATALOG_NAMES.iter().map(|n| ArchSpec::catalog(n, input_dim).expect("catalog entry")).collect()
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |msg: &str| Err(NetError::BadSpec(format!("{}: {msg}", self.name)));
        if self.input_dim == 0 {
            return bad("input_dim must be >= 1");
        }
        match &self.family {
            Family::MsTcn { kernels, hidden, layers } => {
                if kernels.is_empty() || kernels.contains(&0) || *hidden == 0 || *layers == 0 {
                    return bad("MS-TCN needs >= 1 positive kernel, hidden >= 1, layers >= 1");
                }
            }
            Family::Trsf { layers, heads, head_dim, mlp_hidden } | Family::Vit { layers, heads, head_dim, mlp_hidden } => {
                if *layers == 0 || *heads == 0 || *head_dim == 0 || *mlp_hidden == 0 {
                    return bad("attention sizes must be >= 1");
                }
            }
            Family::Lstm { hidden } | Family::Rnn { hidden } => {
                if *hidden == 0 {
                    return bad("hidden must be >= 1");
                }
            }
        }
        Ok(())
    }

    /// Width of the embedding returned by `embed`.
    pub fn embedding_dim(&self) -> usize {
        match &self.family {
            Family::MsTcn { kernels, hidden, .. } => kernels.len() * hidden,
            Family::Trsf { .. } | Family::Vit { .. } => self.input_dim,
            Family::Lstm { hidden } | Family::Rnn { hidden } => *hidden,
        }
    }

    /// Largest convolution kernel (1 for non-convolutional families).
    pub fn max_kernel(&self) -> usize {
        match &self.family {
            Family::MsTcn { kernels, .. } => kernels.iter().copied().max().unwrap_or(1),
            _ => 1,
        }
    }

    /// Plain-text `key=value` block.
    pub fn to_config_block(&self) -> String {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let mut out = format!("name={}\nfamily={}\ninput_dim={}\n", self.name, self.family.tag(), self.input_dim);
        match &self.family {
            Family::MsTcn { kernels, hidden, layers } => {
                out += &format!("kernels={}\nhidden={hidden}\nlayers={layers}\n", join(kernels));
            }
            Family::Trsf { layers, heads, head_dim, mlp_hidden } | Family::Vit { layers, heads, head_dim, mlp_hidden } => {
                out += &format!("layers={layers}\nheads={heads}\nhead_dim={head_dim}\nmlp_hidden={mlp_hidden}\n");
            }
            Family::Lstm { hidden } | Family::Rnn { hidden } => out += &format!("hidden={hidden}\n"),
        }
        out
    }

    /// Parses a block written by [`ArchSpec::to_config_block`]. Blank lines
    /// and `#` comments are ignored.
    pub fn from_config_block(text: &str) -> Result<ArchSpec, NetError> {
        let mut kv = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line.split_once('=').ok_or_else(|| NetError::BadSpec(format!("expected key=value, got `{line}`")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| NetError::BadSpec(format!("missing key `{k}`")));
        let num = |k: &str| -> Result<usize, NetError> {
            get(k)?.parse().map_err(|_| NetError::BadSpec(format!("`{k}` must be a non-negative integer")))
        };
        let family = match normalize(get("family")?).as_str() {
            "ms-tcn" | "mstcn" | "tcn" => Family::MsTcn {
                kernels: get("kernels")?
                    .split(',')
                    .map(|s| s.trim().parse().map_err(|_| NetError::BadSpec("bad kernel list".into())))
                    .collect::<Result<_, _>>()?,
                hidden: num("hidden")?,
                layers: num("layers")?,
            },
            "trsf" | "transformer" => Family::Trsf {
                layers: num("layers")?,
                heads: num("heads")?,
                head_dim: num("head_dim")?,
                mlp_hidden: num("mlp_hidden")?,
            },
            "vit" => Family::Vit {
                layers: num("layers")?,
                heads: num("heads")?,
                head_dim: num("head_dim")?,
                mlp_hidden: num("mlp_hidden")?,
            },
            "lstm" => Family::Lstm { hidden: num("hidden")? },
            "rnn" => Family::Rnn { hidden: num("hidden")? },
            other => return Err(NetError::UnknownFamily(other.to_string())),
        };
        let spec = ArchSpec { name: get("name")?.clone(), family, input_dim: num("input_dim")? };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Ordered set of architectures sampled uniformly during condensation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkCollection {
    specs: Vec<ArchSpec>,
}

impl NetworkCollection {
    pub fn new(specs: Vec<ArchSpec>) -> Result<Self, NetError> {
        if specs.is_empty() {
            return Err(NetError::BadSpec("network collection must not be empty".into()));
        }
        Ok(NetworkCollection { specs })
    }

    /// TCN-α, ViT-α and LSTM-α.
    pub fn default_for(input_dim: usize) -> Self {
        NetworkCollection { specs: DEFAULT_COLLECTION.iter().map(|n| ArchSpec::catalog(n, input_dim).expect("catalog")).collect() }
    }

    pub fn from_names<S: AsRef<str>>(names: &[S], input_dim: usize) -> Result<Self, NetError> {
        Self::new(names.iter().map(|n| ArchSpec::catalog(n.as_ref(), input_dim)).collect::<Result<_, _>>()?)
    }

    pub fn specs(&self) -> &[ArchSpec] {
        &self.specs
    }

    pub fn names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name.clone()).collect()
    }

    pub fn max_kernel(&self) -> usize {
        self.specs.iter().map(ArchSpec::max_kernel).max().unwrap_or(1)
    }
}
