use std::path::{Path, PathBuf};

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use survcorn::data::{preset, SimSpec, PRESETS};
use survcorn::model::TrainConfig;

use crate::UsageError;

pub const OUT_DIR_ENV: &str = "SURVCORN_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "survcorn-out";
pub const DEFAULT_FOLDS: usize = 5;

/// Contents of a `--config` file; every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    pub train: TrainConfig,
    pub simulate: SimOverrides,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coef: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_shape: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub censoring_rate_target: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())).into())
    }

    /// Flag, then config file, then the seed inside the file's train section.
    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(self.train.seed)
    }

    /// Flag, then config file, then `$SURVCORN_OUT_DIR`, then `survcorn-out`.
    pub fn out_dir(&self, flag: Option<PathBuf>) -> PathBuf {
        flag.or_else(|| self.out_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn data(&self, flag: Option<PathBuf>) -> anyhow::Result<PathBuf> {
        flag.or_else(|| self.data.clone()).ok_or_else(|| {
            UsageError("no dataset given; pass --data or set `data` in the config".into()).into()
        })
    }

    pub fn checkpoint(&self, flag: Option<PathBuf>) -> anyhow::Result<PathBuf> {
        flag.or_else(|| self.checkpoint.clone()).ok_or_else(|| {
            UsageError(
                "no checkpoint given; pass --checkpoint or set `checkpoint` in the config".into(),
            )
            .into()
        })
    }

    pub fn folds(&self, flag: Option<usize>) -> anyhow::Result<usize> {
        let folds = flag.or(self.folds).unwrap_or(DEFAULT_FOLDS);
        if folds == 0 {
            return Err(UsageError("--folds must be at least 1".into()).into());
        }
        Ok(folds)
    }
}

/// Parses one of `names` through the serde representation of `T`.
pub fn choice<T>(names: &'static [&'static str]) -> impl TypedValueParser<Value = T>
where
    T: DeserializeOwned + Clone + Send + Sync + 'static,
{
    PossibleValuesParser::new(names).map(|s| {
        serde_json::from_value(serde_json::Value::String(s))
            .expect("possible values match the serde names")
    })
}

/// Flags that override fields of `TrainConfig`.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, visible_alias = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Comma-separated hidden layer widths, e.g. `64,32`.
    #[arg(long, value_delimiter = ',')]
    pub hidden_dims: Option<Vec<usize>>,
    #[arg(long, value_parser = choice::<survcorn::model::Activation>(&["relu", "tanh"]))]
    pub activation: Option<survcorn::model::Activation>,
    /// Ranking temperature.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_parser = choice::<survcorn::losses::RankReduction>(&["sum", "mean"]))]
    pub rank_reduction: Option<survcorn::losses::RankReduction>,
    #[arg(long, value_parser = choice::<survcorn::losses::RankEval>(&["own_time", "same_time"]))]
    pub rank_eval: Option<survcorn::losses::RankEval>,
    /// Weight of the ranking term; 0 trains on the likelihood alone.
    #[arg(long)]
    pub rank_weight: Option<f64>,
    #[arg(long, value_parser = choice::<survcorn::encoding::ExpansionWeight>(&["unit", "per_sample"]))]
    pub expansion_weight: Option<survcorn::encoding::ExpansionWeight>,
    /// Number of time bins; defaults to round(sqrt(N)) of the training part.
    #[arg(long)]
    pub num_bins: Option<usize>,
}

impl TrainFlags {
    /// Applies the flags on top of `base` and validates the result.
    pub fn resolve(&self, base: &TrainConfig, seed: u64) -> anyhow::Result<TrainConfig> {
        let mut cfg = base.clone();
        cfg.seed = seed;
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$($field).+ = v; })*
            };
        }
        set! {
            epochs => epochs,
            batch_size => batch_size,
            learning_rate => learning_rate,
            weight_decay => weight_decay,
            hidden_dims => hidden_dims,
            activation => activation,
            alpha => loss.alpha,
            rank_reduction => loss.rank_reduction,
            rank_eval => loss.rank_eval,
            rank_weight => loss.rank_weight,
            expansion_weight => loss.expansion_weight,
        }
        if self.num_bins.is_some() {
            cfg.num_bins = self.num_bins;
        }
        cfg.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(cfg)
    }
}

/// Simulator flags layered over a preset.
#[derive(Debug, Clone, Default, Args)]
pub struct SimFlags {
    #[arg(long, value_parser = PossibleValuesParser::new(PRESETS))]
    pub preset: Option<String>,
    /// Number of patients.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of features; preset coefficients are truncated or zero-padded.
    #[arg(long)]
    pub d: Option<usize>,
    /// Comma-separated log-hazard coefficients.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub coef: Option<Vec<f64>>,
    /// Weibull baseline scale.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Weibull baseline shape.
    #[arg(long)]
    pub shape: Option<f64>,
    /// Target censored fraction.
    #[arg(long)]
    pub censoring: Option<f64>,
}

impl SimFlags {
    pub fn resolve(&self, file: &SimOverrides, seed: u64) -> anyhow::Result<SimSpec> {
        let name = self
            .preset
            .clone()
            .or_else(|| file.preset.clone())
            .unwrap_or_else(|| PRESETS[0].to_string());
        let mut spec =
            preset(&name, seed).ok_or_else(|| UsageError(format!("unknown preset `{name}`")))?;
        if let Some(n) = self.n.or(file.n) {
            spec.n = n;
        }
        if let Some(coef) = self.coef.clone().or_else(|| file.coef.clone()) {
            spec.d = coef.len();
            spec.coef = coef;
        }
        if let Some(d) = self.d.or(file.d) {
            spec.d = d;
            spec.coef.resize(d, 0.0);
        }
        if let Some(v) = self.scale.or(file.baseline_scale) {
            spec.baseline_scale = v;
        }
        if let Some(v) = self.shape.or(file.baseline_shape) {
            spec.baseline_shape = v;
        }
        if let Some(v) = self.censoring.or(file.censoring_rate_target) {
            spec.censoring_rate_target = v;
        }
        spec.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(spec)
    }
}
