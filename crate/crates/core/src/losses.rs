//! Training objectives with analytic gradients with respect to logits.
//!
//! The SurvCORN objective is the masked binary log-likelihood over the
//! conditional subsets plus a pairwise exponential ranking penalty on the
//! survival curves. The discrete-hazard baseline treats each output as the
//! logit of a per-bin hazard instead.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::curves::{sigmoid, softplus};
use crate::encoding::{Batch, EncodedRow, ExpansionWeight, PatientTarget, SubsetMask};
use crate::{Error, Result};

/// Upper bound on the ranking exponent.
pub const RANK_EXP_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankReduction {
    #[default]
    Sum,
    Mean,
}

/// Where the two curves of a ranked pair are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankEval {
    /// Each patient's curve at that patient's own recorded bin.
    #[default]
    OwnTime,
    /// Both curves at the earlier patient's bin.
    SameTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub alpha: f64,
    pub rank_reduction: RankReduction,
    pub rank_weight: f64,
    pub rank_eval: RankEval,
    pub expansion_weight: ExpansionWeight,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha: 0.1,
            rank_reduction: RankReduction::Sum,
            rank_weight: 1.0,
            rank_eval: RankEval::OwnTime,
            expansion_weight: ExpansionWeight::Unit,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.rank_weight.is_finite() && self.rank_weight >= 0.0) {
            return Err(Error::invalid(format!(
                "rank_weight must be nonnegative, got {}",
                self.rank_weight
            )));
        }
        Ok(())
    }
}

/// A scalar loss with its gradient.
#[derive(Debug, Clone)]
pub struct LossPart {
    pub value: f64,
    pub grad: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct LikelihoodLoss {
    pub value: f64,
    pub grad: Array2<f64>,
    /// Set when every conditional subset is empty; value and gradient are 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct RankLoss {
    pub value: f64,
    pub grad: Array2<f64>,
    pub pairs: usize,
    /// Number of pair terms whose exponent hit [`RANK_EXP_CLAMP`].
    pub clamped: usize,
}

/// Combined objective; `grad_logits` is per patient.
#[derive(Debug, Clone)]
pub struct LossValue {
    pub total: f64,
    pub ll_part: f64,
    pub rank_part: f64,
    pub grad_logits: Array2<f64>,
    pub degenerate: bool,
}

/// Masked binary log-likelihood over the conditional subsets.
///
/// `logits` has one row per encoded row. The value is the weighted negative
/// log-likelihood of all in-subset `(row, k)` terms divided by their total
/// weight, which is `sum_k |A_k|` for unit weights.
pub fn loss_log_likelihood(
    logits: ArrayView2<'_, f64>,
    rows: &[EncodedRow],
    mask: &SubsetMask,
) -> Result<LikelihoodLoss> {
    let outputs = mask.outputs();
    if logits.nrows() != rows.len() || mask.rows() != rows.len() || logits.ncols() != outputs {
        return Err(Error::shape(format!(
            "logits {:?}, {} rows, mask {}x{}",
            logits.dim(),
            rows.len(),
            mask.rows(),
            outputs
        )));
    }
    let mut grad = Array2::zeros(logits.dim());
    let mut weight_sum = 0.0;
    let mut nll = 0.0;
    for (i, row) in rows.iter().enumerate() {
        for k in 0..outputs {
            if !mask.contains(i, k) {
                continue;
            }
            let z = logits[[i, k]];
            let (term, g) = if row.labels[k] {
                (softplus(-z), sigmoid(z) - 1.0)
            } else {
                (softplus(z), sigmoid(z))
            };
            nll += row.weight * term;
            grad[[i, k]] = row.weight * g;
            weight_sum += row.weight;
        }
    }
    if weight_sum == 0.0 {
        return Ok(LikelihoodLoss {
            value: 0.0,
            grad: Array2::zeros(logits.dim()),
            degenerate: true,
        });
    }
    grad.mapv_inplace(|g| g / weight_sum);
    Ok(LikelihoodLoss {
        value: nll / weight_sum,
        grad,
        degenerate: false,
    })
}

fn check_targets(logits: &ArrayView2<'_, f64>, targets: &[PatientTarget]) -> Result<usize> {
    let outputs = logits.ncols();
    if logits.nrows() != targets.len() {
        return Err(Error::shape(format!(
            "{} logit rows for {} patients",
            logits.nrows(),
            targets.len()
        )));
    }
    if outputs == 0 {
        return Err(Error::shape("logits need at least one column"));
    }
    if let Some(t) = targets.iter().find(|t| t.bin == 0 || t.bin > outputs + 1) {
        return Err(Error::invalid(format!(
            "bin {} outside 1..={}",
            t.bin,
            outputs + 1
        )));
    }
    Ok(outputs)
}

/// Pairwise ranking penalty over comparable pairs.
///
/// Sums `exp((S_i - S_j) / alpha)` over ordered pairs with `i` uncensored and
/// `T_i < T_j`. Curves are indexed at `min(T, K - 1)`; see [`RankEval`] for
/// which bin each curve is read at.
pub fn loss_rank(
    logits: ArrayView2<'_, f64>,
    targets: &[PatientTarget],
    cfg: &LossConfig,
) -> Result<RankLoss> {
    cfg.validate()?;
    let outputs = check_targets(&logits, targets)?;
    let n = targets.len();
    let alpha = cfg.alpha;

    let mut surv = Array2::<f64>::zeros((n, outputs));
    for p in 0..n {
        let mut acc = 1.0;
        for k in 0..outputs {
            acc *= sigmoid(logits[[p, k]]);
            surv[[p, k]] = acc;
        }
    }
    let eval_index = |bin: usize| bin.min(outputs) - 1;

    // d(loss)/d(S[p, k])
    let mut coef = Array2::<f64>::zeros((n, outputs));
    let mut value = 0.0;
    let mut pairs = 0usize;
    let mut clamped = 0usize;
    for i in 0..n {
        if !targets[i].event {
            continue;
        }
        let ei = eval_index(targets[i].bin);
        for j in 0..n {
            if targets[i].bin >= targets[j].bin {
                continue;
            }
            let ej = match cfg.rank_eval {
                RankEval::OwnTime => eval_index(targets[j].bin),
                RankEval::SameTime => ei,
            };
            let arg = (surv[[i, ei]] - surv[[j, ej]]) / alpha;
            let term = if arg > RANK_EXP_CLAMP {
                clamped += 1;
                RANK_EXP_CLAMP.exp()
            } else {
                arg.exp()
            };
            value += term;
            coef[[i, ei]] += term / alpha;
            coef[[j, ej]] -= term / alpha;
            pairs += 1;
        }
    }
    if clamped > 0 {
        log::warn!("ranking exponent clamped at {RANK_EXP_CLAMP} for {clamped} of {pairs} pairs");
    }

    let scale = match cfg.rank_reduction {
        RankReduction::Sum => 1.0,
        RankReduction::Mean if pairs == 0 => 0.0,
        RankReduction::Mean => 1.0 / pairs as f64,
    };

    // dS[p, k]/dz[p, m] = S[p, k] * (1 - f[p, m]) for m <= k
    let mut grad = Array2::<f64>::zeros((n, outputs));
    for p in 0..n {
        let mut tail = 0.0;
        for m in (0..outputs).rev() {
            tail += coef[[p, m]] * surv[[p, m]];
            grad[[p, m]] = scale * tail * sigmoid(-logits[[p, m]]);
        }
    }
    Ok(RankLoss {
        value: scale * value,
        grad,
        pairs,
        clamped,
    })
}

/// Likelihood on the expansion rows plus weighted ranking on the patients.
///
/// `patient_logits` has one row per patient of `batch`; expansion rows reuse
/// their patient's logits and their gradients are summed back per patient.
pub fn loss_survcorn(
    patient_logits: ArrayView2<'_, f64>,
    batch: &Batch,
    cfg: &LossConfig,
) -> Result<LossValue> {
    cfg.validate()?;
    let n = batch.num_patients();
    let outputs = batch.num_bins() - 1;
    if patient_logits.dim() != (n, outputs) {
        return Err(Error::shape(format!(
            "logits {:?} for {n} patients and {outputs} outputs",
            patient_logits.dim()
        )));
    }
    let mut row_logits = Array2::zeros((batch.rows.len(), outputs));
    for (r, row) in batch.rows.iter().enumerate() {
        row_logits
            .row_mut(r)
            .assign(&patient_logits.row(row.source_index));
    }
    let ll = loss_log_likelihood(row_logits.view(), &batch.rows, &batch.mask)?;
    let mut grad = Array2::<f64>::zeros((n, outputs));
    for (r, row) in batch.rows.iter().enumerate() {
        let mut dst = grad.row_mut(row.source_index);
        dst += &ll.grad.row(r);
    }

    let mut rank_part = 0.0;
    if n >= 2 && cfg.rank_weight != 0.0 {
        let rank = loss_rank(patient_logits, &batch.targets, cfg)?;
        rank_part = rank.value;
        grad.scaled_add(cfg.rank_weight, &rank.grad);
    }
    Ok(LossValue {
        total: ll.value + cfg.rank_weight * rank_part,
        ll_part: ll.value,
        rank_part,
        grad_logits: grad,
        degenerate: ll.degenerate,
    })
}

/// Discrete-time hazard likelihood, averaged over patients.
///
/// Output `k` is the logit of `h_k = P(event in bin k | alive at t_{k-1})`.
/// An event in bin `b < K` contributes `-log h_b - sum_{k<b} log(1 - h_k)`; an
/// event past the last edge contributes `-sum_{k<K} log(1 - h_k)`. A patient
/// censored in bin `c` contributes `-sum_{k<c} log(1 - h_k)`, so nothing is
/// charged beyond the recorded time.
pub fn loss_discrete_hazard_baseline(
    logits: ArrayView2<'_, f64>,
    targets: &[PatientTarget],
) -> Result<LossPart> {
    let outputs = check_targets(&logits, targets)?;
    let n = targets.len();
    if n == 0 {
        return Err(Error::invalid("hazard loss needs at least one patient"));
    }
    let inv_n = 1.0 / n as f64;
    let mut value = 0.0;
    let mut grad = Array2::zeros((n, outputs));
    for (p, t) in targets.iter().enumerate() {
        let survived = (t.bin - 1).min(outputs);
        for k in 0..survived {
            let z = logits[[p, k]];
            value += softplus(z);
            grad[[p, k]] = inv_n * sigmoid(z);
        }
        if t.event && t.bin <= outputs {
            let k = t.bin - 1;
            let z = logits[[p, k]];
            value += softplus(-z);
            grad[[p, k]] = inv_n * (sigmoid(z) - 1.0);
        }
    }
    Ok(LossPart {
        value: value * inv_n,
        grad,
    })
}
