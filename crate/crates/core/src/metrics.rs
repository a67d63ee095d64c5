//! Censoring-aware evaluation.
//!
//! A pair `(i, j)` is comparable when `i` had an observed event and
//! `T_i < T_j` (bin indices). The time-dependent C-index compares both
//! patients' survival curves at `min(T_i, K - 1)`. SurvMAE adds the mean
//! absolute error over uncensored patients to the mean error over censored
//! patients whose prediction falls at or before their censoring time.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::curves::{median_crossing_time, predict_bin, SurvivalCurve};
use crate::data::Dataset;
use crate::model::SurvModel;
use crate::{Error, Result};

/// Concordance together with the number of comparable pairs it rests on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Concordance {
    /// `None` when there are no comparable pairs.
    pub value: Option<f64>,
    pub pairs: usize,
}

fn check_lengths(a: usize, b: usize, c: usize) -> Result<()> {
    if a != b || b != c {
        return Err(Error::shape(format!("length mismatch: {a}, {b}, {c}")));
    }
    Ok(())
}

/// Shared pair loop; `order(i, j)` is +1 when `i` is predicted to fare worse
/// than `j` at `i`'s time, 0 on a tie and -1 otherwise.
fn concordance_by(
    bins: &[usize],
    events: &[bool],
    order: impl Fn(usize, usize) -> std::cmp::Ordering,
) -> Concordance {
    let n = bins.len();
    let mut pairs = 0usize;
    // twice the concordance score, so ties stay integral
    let mut score2 = 0usize;
    for i in 0..n {
        if !events[i] {
            continue;
        }
        for j in 0..n {
            if bins[i] >= bins[j] {
                continue;
            }
            pairs += 1;
            score2 += match order(i, j) {
                std::cmp::Ordering::Less => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Greater => 0,
            };
        }
    }
    Concordance {
        value: (pairs > 0).then(|| score2 as f64 / (2 * pairs) as f64),
        pairs,
    }
}

/// Time-dependent concordance: a comparable pair is concordant when
/// `S_i(T_i) < S_j(T_i)`; tied survival values earn half credit.
pub fn concordance_td(
    curves: &[SurvivalCurve<'_>],
    bins: &[usize],
    events: &[bool],
) -> Result<Concordance> {
    check_lengths(curves.len(), bins.len(), events.len())?;
    Ok(concordance_by(bins, events, |i, j| {
        let (si, sj) = (curves[i].at_bin(bins[i]), curves[j].at_bin(bins[i]));
        si.partial_cmp(&sj).unwrap_or(std::cmp::Ordering::Equal)
    }))
}

/// Concordance of time-invariant risk scores (higher means earlier event).
pub fn concordance_risk(scores: &[f64], bins: &[usize], events: &[bool]) -> Result<Concordance> {
    check_lengths(scores.len(), bins.len(), events.len())?;
    Ok(concordance_by(bins, events, |i, j| {
        scores[j]
            .partial_cmp(&scores[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    }))
}

/// SurvMAE on any common unit (bins or time).
pub fn survmae(predicted: &[f64], actual: &[f64], events: &[bool]) -> Result<f64> {
    check_lengths(predicted.len(), actual.len(), events.len())?;
    if predicted.is_empty() {
        return Err(Error::invalid("SurvMAE of an empty cohort"));
    }
    let (mut sum_u, mut n_u, mut sum_c, mut n_c) = (0.0, 0usize, 0.0, 0usize);
    for ((&p, &t), &e) in predicted.iter().zip(actual).zip(events) {
        if e {
            sum_u += (p - t).abs();
            n_u += 1;
        } else {
            if p <= t {
                sum_c += t - p;
            }
            n_c += 1;
        }
    }
    let term = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    Ok(term(sum_u, n_u) + term(sum_c, n_c))
}

/// SurvMAE in bins.
pub fn survmae_bins(predicted: &[usize], actual: &[usize], events: &[bool]) -> Result<f64> {
    let p: Vec<f64> = predicted.iter().map(|&b| b as f64).collect();
    let a: Vec<f64> = actual.iter().map(|&b| b as f64).collect();
    survmae(&p, &a, events)
}

/// SurvMAE in time units, predicting each patient's 0.5 crossing time.
pub fn survmae_time(curves: &[SurvivalCurve<'_>], times: &[f64], events: &[bool]) -> Result<f64> {
    let predicted: Vec<f64> = curves.iter().map(median_crossing_time).collect();
    survmae(&predicted, times, events)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub n_uncensored: usize,
    pub n_censored: usize,
    pub n_comparable_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// `null` when the cohort has no comparable pair.
    pub cindex: Option<f64>,
    pub survmae_bin: f64,
    pub survmae_time: f64,
    pub counts: Counts,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Per-patient outputs of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientPrediction {
    pub index: usize,
    pub time: f64,
    pub event: bool,
    pub true_bin: usize,
    pub pred_bin: usize,
    pub crossing_time: f64,
}

/// Everything in a report, computed from curves and targets alone.
pub fn report_from_curves(
    curves: &[SurvivalCurve<'_>],
    pred_bins: &[usize],
    times: &[f64],
    events: &[bool],
) -> Result<MetricsReport> {
    check_lengths(curves.len(), times.len(), events.len())?;
    let grid = match curves.first() {
        Some(c) => c.grid(),
        None => return Err(Error::invalid("cannot evaluate an empty cohort")),
    };
    let true_bins = times
        .iter()
        .map(|&t| grid.discretize(t))
        .collect::<Result<Vec<_>>>()?;
    let c = concordance_td(curves, &true_bins, events)?;
    let n_uncensored = events.iter().filter(|&&e| e).count();
    Ok(MetricsReport {
        cindex: c.value,
        survmae_bin: survmae_bins(pred_bins, &true_bins, events)?,
        survmae_time: survmae_time(curves, times, events)?,
        counts: Counts {
            n_uncensored,
            n_censored: events.len() - n_uncensored,
            n_comparable_pairs: c.pairs,
        },
    })
}

pub fn predict_patients(model: &SurvModel, dataset: &Dataset) -> Result<Vec<PatientPrediction>> {
    let probs = model.cond_probs(&dataset.samples)?;
    let curves = model.curves(&dataset.samples)?;
    dataset
        .samples
        .iter()
        .zip(probs.iter().zip(&curves))
        .enumerate()
        .map(|(index, (s, (p, c)))| {
            Ok(PatientPrediction {
                index,
                time: s.time,
                event: s.event,
                true_bin: model.grid.discretize(s.time)?,
                pred_bin: predict_bin(p),
                crossing_time: median_crossing_time(c),
            })
        })
        .collect()
}

/// Full report of `model` on `dataset`.
pub fn evaluate(model: &SurvModel, dataset: &Dataset) -> Result<MetricsReport> {
    evaluate_with_predictions(model, dataset).map(|(r, _)| r)
}

pub fn evaluate_with_predictions(
    model: &SurvModel,
    dataset: &Dataset,
) -> Result<(MetricsReport, Vec<PatientPrediction>)> {
    if dataset.samples.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty dataset"));
    }
    let curves = model.curves(&dataset.samples)?;
    let preds = predict_patients(model, dataset)?;
    let pred_bins: Vec<usize> = preds.iter().map(|p| p.pred_bin).collect();
    let report = report_from_curves(&curves, &pred_bins, &dataset.times(), &dataset.events())?;
    Ok((report, preds))
}

/// Mean and sample standard deviation of a metric across folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    /// Folds contributing a value.
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(MeanStd { mean, std, n })
    }
}

/// One method's cross-fold summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub cindex: Option<MeanStd>,
    pub survmae_bin: Option<MeanStd>,
    pub survmae_time: Option<MeanStd>,
}

impl SummaryRow {
    pub fn from_reports(method: impl Into<String>, reports: &[MetricsReport]) -> Self {
        let cindex: Vec<f64> = reports.iter().filter_map(|r| r.cindex).collect();
        let bin: Vec<f64> = reports.iter().map(|r| r.survmae_bin).collect();
        let time: Vec<f64> = reports.iter().map(|r| r.survmae_time).collect();
        SummaryRow {
            method: method.into(),
            cindex: MeanStd::of(&cindex),
            survmae_bin: MeanStd::of(&bin),
            survmae_time: MeanStd::of(&time),
        }
    }
}

pub const TABLE_COLUMNS: [&str; 3] = ["C-index ↑", "SurvMAE (bin) ↓", "SurvMAE (time) ↓"];

fn cell(v: &Option<MeanStd>, precision: usize) -> String {
    match v {
        Some(m) => format!("{:.p$} ± {:.p$}", m.mean, m.std, p = precision),
        None => "n/a".to_string(),
    }
}

/// Aligned text table, one row per method.
pub fn render_table(rows: &[SummaryRow]) -> String {
    let mut cells: Vec<[String; 4]> = vec![[
        "Method".to_string(),
        TABLE_COLUMNS[0].to_string(),
        TABLE_COLUMNS[1].to_string(),
        TABLE_COLUMNS[2].to_string(),
    ]];
    for r in rows {
        cells.push([
            r.method.clone(),
            cell(&r.cindex, 3),
            cell(&r.survmae_bin, 2),
            cell(&r.survmae_time, 1),
        ]);
    }
    let mut widths = [0usize; 4];
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        let _ = writeln!(out, "{}", line.join(" | ").trim_end());
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(out, "{}", rule.join("-+-"));
        }
    }
    out
}

/// One parsed table row: method name and `(mean, std)` per metric column,
/// `None` for `n/a` cells.
pub type TableRow = (String, [Option<(f64, f64)>; 3]);

/// Parses a table produced by [`render_table`] back into its rows.
pub fn parse_table(text: &str) -> Result<Vec<TableRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema("empty table".into()))?;
    let cols: Vec<&str> = header.split(" | ").map(str::trim).collect();
    if cols.len() != 4 || cols[1..] != TABLE_COLUMNS {
        return Err(Error::Schema(format!("unexpected header: {header}")));
    }
    lines.next();
    let mut out = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let parts: Vec<&str> = line.split(" | ").map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::Schema(format!("bad row: {line}")));
        }
        let mut vals = [None; 3];
        for (v, p) in vals.iter_mut().zip(&parts[1..]) {
            if *p == "n/a" {
                continue;
            }
            let (m, s) = p
                .split_once(" ± ")
                .ok_or_else(|| Error::Schema(format!("bad cell: {p}")))?;
            let parse = |x: &str| {
                x.parse::<f64>()
                    .map_err(|_| Error::Schema(format!("bad number: {x}")))
            };
            *v = Some((parse(m)?, parse(s)?));
        }
        out.push((parts[0].to_string(), vals));
    }
    Ok(out)
}
