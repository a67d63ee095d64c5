use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{flatten_layers, Activation, Adam, AdamConfig, ModelParams};
use crate::curves::{sigmoid, survival_curve, CondProbs, SurvivalCurve};
use crate::data::Dataset;
use crate::encoding::{Batch, Sample};
use crate::losses::{loss_discrete_hazard_baseline, loss_survcorn, LossConfig};
use crate::timegrid::TimeGrid;
use crate::{Error, Result};

/// How the `K - 1` outputs are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Outputs are logits of conditional survival `P(T > t_k | T > t_{k-1})`.
    #[default]
    Survcorn,
    /// Outputs are logits of the per-bin hazard; survival is `1 - h_k`.
    Hazard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    pub head: Head,
    pub loss: LossConfig,
    pub adam: AdamConfig,
    /// Bin count when the grid is fit from training times; `None` uses sqrt(N).
    pub num_bins: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 16,
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            seed: 0,
            hidden_dims: vec![64, 32],
            activation: Activation::Relu,
            head: Head::Survcorn,
            loss: LossConfig::default(),
            adam: AdamConfig::default(),
            num_bins: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid("batch_size must be >= 2"));
        }
        // zero is allowed: it freezes the parameters
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::invalid(
                "learning_rate must be finite and nonnegative",
            ));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::invalid(
                "weight_decay must be finite and nonnegative",
            ));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        if matches!(self.num_bins, Some(k) if k < 2) {
            return Err(Error::invalid("num_bins must be >= 2"));
        }
        self.loss.validate()
    }
}

/// Per-column z-scoring fit on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Constant columns get unit scale.
    pub fn fit(samples: &[Sample]) -> Self {
        let d = samples.first().map_or(0, |s| s.features.len());
        let n = samples.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for s in samples {
            for (m, x) in mean.iter_mut().zip(&s.features) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for s in samples {
            for ((v, x), m) in var.iter_mut().zip(&s.features).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn identity(d: usize) -> Self {
        Standardizer {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn matrix(&self, samples: &[Sample]) -> Result<Array2<f64>> {
        let d = self.dim();
        let mut flat = Vec::with_capacity(samples.len() * d);
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != d {
                return Err(Error::shape(format!(
                    "sample {i} has {} features, model expects {d}",
                    s.features.len()
                )));
            }
            flat.extend(self.apply(&s.features));
        }
        Array2::from_shape_vec((samples.len(), d), flat).map_err(|e| Error::shape(e.to_string()))
    }
}

/// A trained network together with everything needed to score new patients.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvModel {
    pub params: ModelParams,
    pub grid: TimeGrid,
    pub standardizer: Standardizer,
    pub head: Head,
    pub config: TrainConfig,
}

impl SurvModel {
    pub fn logits(&self, samples: &[Sample]) -> Result<Array2<f64>> {
        let x = self.standardizer.matrix(samples)?;
        self.params.forward(x.view())
    }

    /// Conditional survival probabilities for each sample.
    pub fn cond_probs(&self, samples: &[Sample]) -> Result<Vec<CondProbs>> {
        let logits = self.logits(samples)?;
        logits
            .rows()
            .into_iter()
            .map(|z| {
                let probs = match self.head {
                    Head::Survcorn => z.iter().map(|&v| sigmoid(v)).collect(),
                    Head::Hazard => z.iter().map(|&v| sigmoid(-v)).collect(),
                };
                CondProbs::new(probs)
            })
            .collect()
    }

    pub fn curves(&self, samples: &[Sample]) -> Result<Vec<SurvivalCurve<'_>>> {
        self.cond_probs(samples)?
            .iter()
            .map(|p| survival_curve(p, &self.grid))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub ll_part: f64,
    pub rank_part: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    /// One JSON object per epoch, newline-terminated.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Fits a network on `dataset` over `grid` with mini-batch Adam.
///
/// Features are z-scored with statistics of `dataset`. Parameter
/// initialization and the per-epoch shuffles all draw from one ChaCha stream
/// seeded by `cfg.seed`, so a run is reproducible bit for bit.
pub fn train(
    dataset: &Dataset,
    grid: &TimeGrid,
    cfg: &TrainConfig,
) -> Result<(SurvModel, TrainLog)> {
    cfg.validate()?;
    let samples = &dataset.samples;
    if samples.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    if !samples.iter().any(|s| s.event) {
        log::warn!(
            "no uncensored samples: the ranking term has no pairs, training on likelihood only"
        );
    }
    let standardizer = Standardizer::fit(samples);
    let scaled: Vec<Sample> = samples
        .iter()
        .map(|s| Sample {
            features: standardizer.apply(&s.features),
            ..s.clone()
        })
        .collect();

    let outputs = grid.num_bins() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(
        standardizer.dim(),
        &cfg.hidden_dims,
        outputs,
        cfg.activation,
        &mut rng,
    );
    let mut flat = params.to_flat();
    let mut opt = Adam::new(flat.len(), cfg.learning_rate, cfg.weight_decay, cfg.adam);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = TrainLog::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut ll_sum, mut rank_sum, mut total_sum, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = Batch::from_indices(&scaled, chunk, grid, cfg.loss.expansion_weight)?;
            let logits = params.forward(batch.features.view())?;
            let (ll, rank, total, grad) = match cfg.head {
                Head::Survcorn => {
                    let v = loss_survcorn(logits.view(), &batch, &cfg.loss)?;
                    (v.ll_part, v.rank_part, v.total, v.grad_logits)
                }
                Head::Hazard => {
                    let v = loss_discrete_hazard_baseline(logits.view(), &batch.targets)?;
                    (v.value, 0.0, v.value, v.grad)
                }
            };
            if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite loss {total} at epoch {epoch}"
                )));
            }
            let grads = params.backward(batch.features.view(), grad.view())?;
            opt.step(&mut flat, &flatten_layers(&grads));
            params.set_flat(&flat)?;
            ll_sum += ll;
            rank_sum += rank;
            total_sum += total;
            batches += 1;
        }
        let b = batches as f64;
        let entry = EpochLog {
            epoch,
            ll_part: ll_sum / b,
            rank_part: rank_sum / b,
            total: total_sum / b,
        };
        log::debug!(
            "epoch {epoch}: ll {:.5} rank {:.5} total {:.5}",
            entry.ll_part,
            entry.rank_part,
            entry.total
        );
        log.epochs.push(entry);
    }

    let model = SurvModel {
        params,
        grid: grid.clone(),
        standardizer,
        head: cfg.head,
        config: cfg.clone(),
    };
    Ok((model, log))
}
