//! Ordinal target encodings and conditional training subsets.
//!
//! An event in bin `b` is encoded as the `K - 1` indicators `1{b > k}`. A
//! patient censored in bin `c < K` is expanded into one row per bin it could
//! still fall into, `c, c + 1, ..., K`, all sharing the source patient's
//! features. Output neuron `k` is trained on the subset `A_k` of rows known to
//! survive past `t_{k-1}`; `A_1` holds every row.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::timegrid::TimeGrid;
use crate::{Error, Result};

/// One patient record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub time: f64,
    /// `true` when the event was observed, `false` when censored.
    pub event: bool,
}

impl Sample {
    pub fn new(features: Vec<f64>, time: f64, event: bool) -> Result<Self> {
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("features must be finite"));
        }
        if !time.is_finite() || time < 0.0 {
            return Err(Error::invalid(format!(
                "time must be finite and nonnegative, got {time}"
            )));
        }
        Ok(Sample {
            features,
            time,
            event,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedRow {
    /// `labels[k - 1] = 1{T > t_k}` for `k = 1..K-1`; monotone nonincreasing.
    pub labels: Vec<bool>,
    pub weight: f64,
    /// Index of the originating patient within its batch.
    pub source_index: usize,
}

/// How the rows of one censored expansion are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionWeight {
    /// Every expansion row counts as a full batch member.
    #[default]
    Unit,
    /// Rows of an expansion of size `m` carry weight `1 / m`.
    PerSample,
}

fn check_bin(bin: usize, num_bins: usize, upper: usize, what: &str) -> Result<()> {
    if num_bins < 2 {
        return Err(Error::invalid(format!(
            "num_bins must be >= 2, got {num_bins}"
        )));
    }
    if bin == 0 || bin > upper {
        return Err(Error::invalid(format!(
            "{what} {bin} outside 1..={upper} (K = {num_bins})"
        )));
    }
    Ok(())
}

/// Target row of a patient whose event falls in `bin`.
pub fn encode_uncensored(bin: usize, num_bins: usize) -> Result<EncodedRow> {
    check_bin(bin, num_bins, num_bins, "event bin")?;
    Ok(EncodedRow {
        labels: (1..num_bins).map(|k| bin > k).collect(),
        weight: 1.0,
        source_index: 0,
    })
}

/// All hypothetical event rows of a patient censored in `censor_bin`.
///
/// Returns `K - censor_bin + 1` rows with event bins `censor_bin..=K`.
pub fn expand_censored(censor_bin: usize, num_bins: usize) -> Result<Vec<EncodedRow>> {
    check_bin(censor_bin, num_bins, num_bins - 1, "censoring bin")?;
    (censor_bin..=num_bins)
        .map(|e| encode_uncensored(e, num_bins))
        .collect()
}

/// Row membership in the conditional training subsets `A_1..A_{K-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetMask {
    outputs: usize,
    member: Vec<bool>,
    sizes: Vec<usize>,
}

impl SubsetMask {
    /// Row `i` belongs to `A_1` always and to `A_k` (`k >= 2`) iff its label
    /// for `t_{k-1}` is 1.
    pub fn from_rows(rows: &[EncodedRow], num_bins: usize) -> Result<Self> {
        let outputs = num_bins - 1;
        let mut member = Vec::with_capacity(rows.len() * outputs);
        let mut sizes = vec![0usize; outputs];
        for row in rows {
            if row.labels.len() != outputs {
                return Err(Error::shape(format!(
                    "row has {} labels, expected {outputs}",
                    row.labels.len()
                )));
            }
            for (k, size) in sizes.iter_mut().enumerate() {
                let m = k == 0 || row.labels[k - 1];
                member.push(m);
                *size += m as usize;
            }
        }
        Ok(SubsetMask {
            outputs,
            member,
            sizes,
        })
    }

    pub fn rows(&self) -> usize {
        self.member.len().checked_div(self.outputs).unwrap_or(0)
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    /// Whether row `row` is in `A_{k+1}` (0-based output index `k`).
    pub fn contains(&self, row: usize, k: usize) -> bool {
        self.member[row * self.outputs + k]
    }

    /// `|A_1|, ..., |A_{K-1}|`.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }
}

/// Per-output `(survivors, |A_k|)`: how many rows of `A_k` have label 1.
pub fn conditional_survival_counts(rows: &[EncodedRow], mask: &SubsetMask) -> Vec<(usize, usize)> {
    (0..mask.outputs())
        .map(|k| {
            let survivors = rows
                .iter()
                .enumerate()
                .filter(|(i, r)| mask.contains(*i, k) && r.labels[k])
                .count();
            (survivors, mask.sizes()[k])
        })
        .collect()
}

/// Patient-level target used by the ranking term and the metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatientTarget {
    pub bin: usize,
    pub event: bool,
}

/// An encoded mini-batch.
///
/// `features` holds one row per patient. Expansion rows reference their patient
/// through [`EncodedRow::source_index`], so the network is evaluated once per
/// patient and row logits are gathered from patient logits.
#[derive(Debug, Clone)]
pub struct Batch {
    pub features: Array2<f64>,
    pub targets: Vec<PatientTarget>,
    pub rows: Vec<EncodedRow>,
    pub mask: SubsetMask,
    num_bins: usize,
}

impl Batch {
    pub fn build(samples: &[Sample], grid: &TimeGrid, weighting: ExpansionWeight) -> Result<Self> {
        Self::from_iter(samples.iter(), grid, weighting)
    }

    /// Batch over `samples[indices[..]]`, in the order given.
    pub fn from_indices(
        samples: &[Sample],
        indices: &[usize],
        grid: &TimeGrid,
        weighting: ExpansionWeight,
    ) -> Result<Self> {
        Self::from_iter(indices.iter().map(|&i| &samples[i]), grid, weighting)
    }

    fn from_iter<'a>(
        samples: impl ExactSizeIterator<Item = &'a Sample>,
        grid: &TimeGrid,
        weighting: ExpansionWeight,
    ) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::invalid("cannot build an empty batch"));
        }
        let num_bins = grid.num_bins();
        let mut width = None;
        let mut flat = Vec::new();
        let mut targets = Vec::with_capacity(n);
        let mut rows = Vec::with_capacity(n);
        for (index, sample) in samples.enumerate() {
            let d = *width.get_or_insert(sample.features.len());
            if sample.features.len() != d {
                return Err(Error::shape(format!(
                    "sample {index} has {} features, expected {d}",
                    sample.features.len()
                )));
            }
            flat.extend_from_slice(&sample.features);
            let bin = grid.discretize(sample.time)?;
            targets.push(PatientTarget {
                bin,
                event: sample.event,
            });
            // a record censored beyond the last edge is event-free through all edges
            let mut encoded = if sample.event || bin == num_bins {
                vec![encode_uncensored(bin, num_bins)?]
            } else {
                expand_censored(bin, num_bins)?
            };
            let weight = match weighting {
                ExpansionWeight::Unit => 1.0,
                ExpansionWeight::PerSample => 1.0 / encoded.len() as f64,
            };
            for row in &mut encoded {
                row.source_index = index;
                row.weight = weight;
            }
            rows.extend(encoded);
        }
        let features = Array2::from_shape_vec((n, width.unwrap_or(0)), flat)
            .map_err(|e| Error::shape(e.to_string()))?;
        let mask = SubsetMask::from_rows(&rows, num_bins)?;
        Ok(Batch {
            features,
            targets,
            rows,
            mask,
            num_bins,
        })
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_patients(&self) -> usize {
        self.targets.len()
    }

    /// Feature matrix with one row per encoded row (censored patients replicated).
    pub fn expanded_features(&self) -> Array2<f64> {
        let d = self.features.ncols();
        let mut out = Array2::zeros((self.rows.len(), d));
        for (r, row) in self.rows.iter().enumerate() {
            out.row_mut(r).assign(&self.features.row(row.source_index));
        }
        out
    }
}
