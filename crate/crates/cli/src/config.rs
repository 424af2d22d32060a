//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;
use shaping_filter::operators::Composition;
use shaping_filter::presets::DEFAULT_HORIZON;
use shaping_filter::{Preset, RationalTransferFunction};

use crate::CliError;

pub const DEFAULT_ORDER: usize = 256;
pub const DEFAULT_GRID: usize = 1000;
pub const DEFAULT_TABLE_ORDERS: [usize; 7] = [4, 8, 16, 32, 64, 128, 256];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SimMethod {
    Spectral,
    Sde,
    Ito,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    /// Error tables only.
    Markdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
pub enum OperatorKind {
    #[serde(rename = "exact")]
    #[value(name = "exact")]
    Exact,
    #[serde(rename = "rational")]
    #[value(name = "rational")]
    Rational,
    #[serde(rename = "P")]
    #[value(name = "P")]
    Derivative,
    #[serde(rename = "Pinv")]
    #[value(name = "Pinv")]
    Integral,
    #[serde(rename = "whiten")]
    #[value(name = "whiten")]
    Whiten,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CompositionArg {
    Auto,
    Factored,
    Polynomial,
}

impl From<CompositionArg> for Composition {
    fn from(c: CompositionArg) -> Self {
        match c {
            CompositionArg::Auto => Composition::Auto,
            CompositionArg::Factored => Composition::Factored,
            CompositionArg::Polynomial => Composition::Polynomial,
        }
    }
}

/// `L` is a single order for most commands and a list for error tables.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum Orders {
    One(usize),
    Many(Vec<usize>),
}

/// Flags shared by every command. Anything left unset falls back to the
/// config file, then to the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON config file; explicit flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Inline transfer function `{"num": [...], "den": [...]}` or a path to one
    #[arg(long, global = true, conflicts_with = "preset")]
    pub tf: Option<String>,
    /// dryden1, dryden2, dryden3 or osc
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Horizon in seconds
    #[arg(long = "T", global = true)]
    pub horizon: Option<f64>,
    /// Truncation order; a comma-separated list for error-table
    #[arg(long = "L", global = true, value_delimiter = ',')]
    pub orders: Option<Vec<usize>>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<SimMethod>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of trajectories
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Grid points on [0, T]
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Time steps for sde/ito; a multiple of grid - 1 (default grid - 1)
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Matrix to dump with `operator`
    #[arg(long, global = true, value_enum)]
    pub operator: Option<OperatorKind>,
    /// How the rational operator is assembled
    #[arg(long, global = true, value_enum)]
    pub composition: Option<CompositionArg>,
    /// Write ensemble statistics instead of trajectories
    #[arg(long, global = true)]
    pub stats: bool,
    /// Dense matrix CSV instead of `i,j,value`
    #[arg(long, global = true)]
    pub dense: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    tf: Option<RationalTransferFunction>,
    preset: Option<String>,
    #[serde(rename = "T")]
    horizon: Option<f64>,
    #[serde(rename = "L")]
    orders: Option<Orders>,
    method: Option<SimMethod>,
    seed: Option<u64>,
    n: Option<usize>,
    grid: Option<usize>,
    steps: Option<usize>,
    out: Option<PathBuf>,
    format: Option<Format>,
    operator: Option<OperatorKind>,
    composition: Option<CompositionArg>,
    #[serde(default)]
    stats: bool,
    #[serde(default)]
    dense: bool,
}

#[derive(Debug, Clone)]
pub enum Source {
    Preset(Preset),
    Inline(RationalTransferFunction),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: Option<Source>,
    pub horizon: f64,
    pub orders: Option<Vec<usize>>,
    pub method: SimMethod,
    pub seed: u64,
    pub count: usize,
    pub grid: usize,
    pub steps: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub operator: Option<OperatorKind>,
    pub composition: Composition,
    pub stats: bool,
    pub dense: bool,
}

fn parse_tf_arg(arg: &str) -> Result<RationalTransferFunction, CliError> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| CliError::Config(format!("cannot read transfer function '{arg}': {e}")))?
    };
    shaping_filter::io::parse_transfer_function(&text).map_err(CliError::from)
}

fn read_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config '{}': {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config '{}': {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(flags: Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => read_config(p)?,
            None => ConfigFile::default(),
        };

        let source = if let Some(t) = &flags.tf {
            Some(Source::Inline(parse_tf_arg(t)?))
        } else if let Some(p) = &flags.preset {
            Some(Source::Preset(p.parse()?))
        } else if let Some(tf) = file.tf {
            if file.preset.is_some() {
                return Err(CliError::Config("config sets both tf and preset".into()));
            }
            Some(Source::Inline(tf))
        } else if let Some(p) = &file.preset {
            Some(Source::Preset(p.parse()?))
        } else {
            None
        };

        let orders = flags.orders.or(match file.orders {
            Some(Orders::One(l)) => Some(vec![l]),
            Some(Orders::Many(v)) => Some(v),
            None => None,
        });

        let cfg = RunConfig {
            source,
            horizon: flags.horizon.or(file.horizon).unwrap_or(DEFAULT_HORIZON),
            orders,
            method: flags.method.or(file.method).unwrap_or(SimMethod::Spectral),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            count: flags.n.or(file.n).unwrap_or(1),
            grid: flags.grid.or(file.grid).unwrap_or(DEFAULT_GRID),
            steps: flags.steps.or(file.steps),
            out: flags.out.or(file.out),
            format: flags.format.or(file.format).unwrap_or(Format::Csv),
            operator: flags.operator.or(file.operator),
            composition: flags.composition.or(file.composition).unwrap_or(CompositionArg::Auto).into(),
            stats: flags.stats || file.stats,
            dense: flags.dense || file.dense,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(CliError::Config(format!("T must be positive, got {}", self.horizon)));
        }
        if let Some(orders) = &self.orders {
            if orders.is_empty() || orders.contains(&0) {
                return Err(CliError::Config("L must be at least 1".into()));
            }
        }
        if self.grid < 2 {
            return Err(CliError::Config(format!("grid must be at least 2, got {}", self.grid)));
        }
        if self.count == 0 {
            return Err(CliError::Config("n must be at least 1".into()));
        }
        Ok(())
    }

    pub fn transfer_function(&self) -> Result<RationalTransferFunction, CliError> {
        match &self.source {
            Some(Source::Preset(p)) => Ok(p.transfer_function()),
            Some(Source::Inline(tf)) => Ok(tf.clone()),
            None => Err(CliError::Config("no transfer function: pass --tf or --preset".into())),
        }
    }

    pub fn source_label(&self) -> String {
        match &self.source {
            Some(Source::Preset(p)) => p.name().to_string(),
            Some(Source::Inline(tf)) => format!("num={:?} den={:?}", tf.num(), tf.den()),
            None => "none".into(),
        }
    }

    /// The single truncation order for commands that take one.
    pub fn order(&self) -> Result<usize, CliError> {
        match self.orders.as_deref() {
            None => Ok(DEFAULT_ORDER),
            Some([l]) => Ok(*l),
            Some(_) => Err(CliError::Config("this command takes a single L".into())),
        }
    }

    pub fn table_orders(&self) -> Result<Vec<usize>, CliError> {
        let orders = self.orders.clone().unwrap_or_else(|| DEFAULT_TABLE_ORDERS.to_vec());
        if orders.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config("L list must be strictly ascending".into()));
        }
        Ok(orders)
    }
}
