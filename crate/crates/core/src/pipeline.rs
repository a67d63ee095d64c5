//! Cross-validated training and method comparison.

use serde::{Deserialize, Serialize};

use crate::data::{holdout_split, stratified_kfold, Dataset, Fold};
use crate::metrics::{evaluate, MetricsReport, SummaryRow};
use crate::model::{train, Head, SurvModel, TrainConfig, TrainLog};
use crate::timegrid::TimeGrid;
use crate::Result;

/// `folds == 1` means a single stratified 80/20 split.
pub fn make_folds(dataset: &Dataset, folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds == 1 {
        Ok(vec![holdout_split(dataset, seed)?])
    } else {
        stratified_kfold(dataset, folds, seed)
    }
}

#[derive(Debug, Clone)]
pub struct FoldRun {
    pub fold: usize,
    pub model: SurvModel,
    pub log: TrainLog,
    pub report: MetricsReport,
}

/// Fits the grid on the training part, trains, and scores the validation part.
pub fn run_fold(
    dataset: &Dataset,
    fold: &Fold,
    cfg: &TrainConfig,
) -> Result<(SurvModel, TrainLog, MetricsReport)> {
    let train_set = dataset.subset(&fold.train);
    let val_set = dataset.subset(&fold.validation);
    let grid = TimeGrid::fit(&train_set.times(), cfg.num_bins)?;
    let (model, log) = train(&train_set, &grid, cfg)?;
    let report = evaluate(&model, &val_set)?;
    Ok((model, log, report))
}

/// Per-fold training seed, so folds start from different initializations.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_add(fold as u64)
}

pub fn cross_validate(
    dataset: &Dataset,
    folds: &[Fold],
    cfg: &TrainConfig,
) -> Result<Vec<FoldRun>> {
    folds
        .iter()
        .enumerate()
        .map(|(i, fold)| {
            let fold_cfg = TrainConfig {
                seed: fold_seed(cfg.seed, i),
                ..cfg.clone()
            };
            let (model, log, report) = run_fold(dataset, fold, &fold_cfg)?;
            log::info!(
                "fold {i}: C-index {:?}, SurvMAE(bin) {:.3}, SurvMAE(time) {:.3}",
                report.cindex,
                report.survmae_bin,
                report.survmae_time
            );
            Ok(FoldRun {
                fold: i,
                model,
                log,
                report,
            })
        })
        .collect()
}

pub fn method_name(head: Head) -> &'static str {
    match head {
        Head::Survcorn => "SurvCORN",
        Head::Hazard => "Discrete hazard",
    }
}

/// Cross-fold summary written by `train` and `benchmark`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub folds: Vec<MetricsReport>,
    pub summary: SummaryRow,
}

impl MethodSummary {
    pub fn from_runs(head: Head, runs: &[FoldRun]) -> Self {
        let reports: Vec<MetricsReport> = runs.iter().map(|r| r.report.clone()).collect();
        MethodSummary {
            method: method_name(head).to_string(),
            summary: SummaryRow::from_reports(method_name(head), &reports),
            folds: reports,
        }
    }
}

/// Runs the SurvCORN and hazard heads on identical folds.
pub fn benchmark(
    dataset: &Dataset,
    folds: &[Fold],
    cfg: &TrainConfig,
) -> Result<Vec<MethodSummary>> {
    [Head::Survcorn, Head::Hazard]
        .into_iter()
        .map(|head| {
            let method_cfg = TrainConfig {
                head,
                ..cfg.clone()
            };
            let runs = cross_validate(dataset, folds, &method_cfg)?;
            Ok(MethodSummary::from_runs(head, &runs))
        })
        .collect()
}
