use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::Serialize;
use survcorn::curves::{median_crossing_time, predict_bin, survival_curve};
use survcorn::data::{simulate as draw_cohort, Dataset};
use survcorn::metrics::{evaluate_with_predictions, render_table, SummaryRow};
use survcorn::model::{load_checkpoint, save_checkpoint, Head, SurvModel};
use survcorn::pipeline::{
    benchmark as run_benchmark, cross_validate, make_folds, method_name, MethodSummary,
};

use crate::config::{choice, RunConfig, SimFlags, SimOverrides, TrainFlags};
use crate::UsageError;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    sim: SimFlags,
    /// Output CSV; `<stem>.truth.csv` and `<stem>.spec.json` are written beside it.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// CSV with `time`, `event` and numeric feature columns.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Number of stratified folds; 1 means a single 80/20 split.
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, value_parser = choice::<Head>(&["survcorn", "hazard"]))]
    loss: Option<Head>,
    #[command(flatten)]
    train: TrainFlags,
    /// Output directory [default: $SURVCORN_OUT_DIR or survcorn-out].
    #[arg(short, long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(short, long)]
    out_dir: Option<PathBuf>,
}

pub type PredictArgs = EvaluateArgs;

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// CSV dataset; without it a cohort is simulated from the preset flags.
    #[arg(long, conflicts_with = "preset")]
    data: Option<PathBuf>,
    #[command(flatten)]
    sim: SimFlags,
    #[arg(long)]
    folds: Option<usize>,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(short, long)]
    out_dir: Option<PathBuf>,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text)
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// `dir/stem.suffix` for a file at `dir/stem.ext`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "cohort".into(), |s| s.to_string_lossy());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn load_dataset(path: &Path) -> anyhow::Result<Dataset> {
    Dataset::load_csv(path).with_context(|| format!("reading {}", path.display()))
}

fn load_model(path: &Path) -> anyhow::Result<SurvModel> {
    load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn require_events(ds: &Dataset) -> anyhow::Result<()> {
    if ds.samples.iter().all(|s| !s.event) {
        return Err(survcorn::Error::InvalidInput(
            "every patient is censored; there are no events to learn from or rank".into(),
        )
        .into());
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs, file: &RunConfig, seed: Option<u64>) -> anyhow::Result<()> {
    let seed = file.seed(seed);
    let spec = args.sim.resolve(&file.simulate, seed)?;
    let path = args
        .output
        .clone()
        .unwrap_or_else(|| file.out_dir(None).join("cohort.csv"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let (ds, truth) = draw_cohort(&spec)?;
    ds.save_csv(&path)
        .with_context(|| format!("writing {}", path.display()))?;
    let mut buf = Vec::new();
    truth.write_csv(&mut buf)?;
    write_file(&sibling(&path, "truth.csv"), buf)?;
    write_json(&sibling(&path, "spec.json"), &spec)?;
    let censored = ds.samples.iter().filter(|s| !s.event).count();
    println!(
        "wrote {}: {} patients, {} features, {:.1}% censored",
        path.display(),
        ds.len(),
        ds.num_features(),
        100.0 * censored as f64 / ds.len().max(1) as f64
    );
    Ok(())
}

pub fn train(args: &TrainArgs, file: &RunConfig, seed: Option<u64>) -> anyhow::Result<()> {
    let seed = file.seed(seed);
    let mut cfg = args.train.resolve(&file.train, seed)?;
    if let Some(head) = args.loss {
        cfg.head = head;
    }
    let folds = file.folds(args.folds)?;
    let data = file.data(args.data.clone())?;
    let out = file.out_dir(args.out_dir.clone());

    let ds = load_dataset(&data)?;
    require_events(&ds)?;
    let splits = make_folds(&ds, folds, seed)?;
    create_dir(&out)?;
    let resolved = RunConfig {
        seed: Some(seed),
        data: Some(data),
        folds: Some(folds),
        train: cfg.clone(),
        ..RunConfig::default()
    };
    write_json(&out.join("resolved_config.json"), &resolved)?;

    let runs = cross_validate(&ds, &splits, &cfg)?;
    for run in &runs {
        let dir = out.join(format!("fold{}", run.fold));
        create_dir(&dir)?;
        save_checkpoint(&run.model, &dir.join("model.ckpt"))?;
        write_file(&dir.join("log.jsonl"), run.log.to_json_lines()?)?;
        write_file(&dir.join("report.json"), run.report.to_json()?)?;
    }
    let summary = MethodSummary::from_runs(cfg.head, &runs);
    let table = render_table(std::slice::from_ref(&summary.summary));
    write_json(&out.join("summary.json"), &summary)?;
    write_file(&out.join("summary.txt"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs, file: &RunConfig) -> anyhow::Result<()> {
    let ckpt = file.checkpoint(args.checkpoint.clone())?;
    let data = file.data(args.data.clone())?;
    let out = file.out_dir(args.out_dir.clone());
    let model = load_model(&ckpt)?;
    let ds = load_dataset(&data)?;
    let (report, preds) = evaluate_with_predictions(&model, &ds)?;

    create_dir(&out)?;
    let resolved = RunConfig {
        data: Some(data),
        checkpoint: Some(ckpt),
        train: model.config.clone(),
        ..RunConfig::default()
    };
    write_json(&out.join("resolved_config.json"), &resolved)?;
    write_file(&out.join("report.json"), report.to_json()?)?;
    let row = SummaryRow::from_reports(method_name(model.head), std::slice::from_ref(&report));
    let table = render_table(&[row]);
    write_file(&out.join("report.txt"), &table)?;
    let mut csv = String::from("patient_id,time,event,true_bin,pred_bin,crossing_time\n");
    for p in &preds {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            p.index, p.time, p.event as u8, p.true_bin, p.pred_bin, p.crossing_time
        );
    }
    write_file(&out.join("predictions.csv"), csv)?;
    print!("{table}");
    Ok(())
}

#[derive(Serialize)]
struct PatientCurve {
    patient_id: usize,
    pred_bin: usize,
    crossing_time: f64,
    cond_probs: Vec<f64>,
    survival: Vec<f64>,
}

#[derive(Serialize)]
struct CurveFile {
    head: Head,
    edges: Vec<f64>,
    patients: Vec<PatientCurve>,
}

pub fn predict(args: &PredictArgs, file: &RunConfig) -> anyhow::Result<()> {
    let ckpt = file.checkpoint(args.checkpoint.clone())?;
    let data = file.data(args.data.clone())?;
    let out = file.out_dir(args.out_dir.clone());
    let model = load_model(&ckpt)?;
    let ds = load_dataset(&data)?;
    if ds.is_empty() {
        return Err(
            survcorn::Error::InvalidInput(format!("{} has no rows", data.display())).into(),
        );
    }
    let probs = model.cond_probs(&ds.samples)?;
    let patients = probs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let curve = survival_curve(p, &model.grid)?;
            Ok(PatientCurve {
                patient_id: i,
                pred_bin: predict_bin(p),
                crossing_time: median_crossing_time(&curve),
                cond_probs: p.values().to_vec(),
                survival: curve.values().to_vec(),
            })
        })
        .collect::<survcorn::Result<Vec<_>>>()?;

    let edges = model.grid.edges().to_vec();
    let mut csv = String::from("patient_id,pred_bin,crossing_time");
    for e in &edges {
        let _ = write!(csv, ",{e}");
    }
    csv.push('\n');
    for p in &patients {
        let _ = write!(csv, "{},{},{}", p.patient_id, p.pred_bin, p.crossing_time);
        for s in &p.survival {
            let _ = write!(csv, ",{s}");
        }
        csv.push('\n');
    }

    create_dir(&out)?;
    let resolved = RunConfig {
        data: Some(data),
        checkpoint: Some(ckpt),
        train: model.config.clone(),
        ..RunConfig::default()
    };
    write_json(&out.join("resolved_config.json"), &resolved)?;
    write_file(&out.join("curves.csv"), csv)?;
    write_json(
        &out.join("curves.json"),
        &CurveFile {
            head: model.head,
            edges,
            patients,
        },
    )?;
    println!(
        "wrote curves for {} patients to {}",
        ds.len(),
        out.display()
    );
    Ok(())
}

pub fn benchmark(args: &BenchmarkArgs, file: &RunConfig, seed: Option<u64>) -> anyhow::Result<()> {
    let seed = file.seed(seed);
    let cfg = args.train.resolve(&file.train, seed)?;
    let folds = file.folds(args.folds)?;
    let out = file.out_dir(args.out_dir.clone());

    let mut resolved = RunConfig {
        seed: Some(seed),
        folds: Some(folds),
        train: cfg.clone(),
        ..RunConfig::default()
    };
    // --data, then preset flags, then the config's data, then its preset
    let simulated = args.data.is_none()
        && (args.sim.preset.is_some() || file.data.is_none())
        && (args.sim.preset.is_some() || file.simulate.preset.is_some());
    let ds = if simulated {
        let spec = args.sim.resolve(&file.simulate, seed)?;
        let (ds, _) = draw_cohort(&spec)?;
        create_dir(&out)?;
        ds.save_csv(&out.join("cohort.csv"))?;
        resolved.simulate = SimOverrides {
            preset: args
                .sim
                .preset
                .clone()
                .or_else(|| file.simulate.preset.clone()),
            n: Some(spec.n),
            d: Some(spec.d),
            coef: Some(spec.coef),
            baseline_scale: Some(spec.baseline_scale),
            baseline_shape: Some(spec.baseline_shape),
            censoring_rate_target: Some(spec.censoring_rate_target),
        };
        ds
    } else {
        let data = file
            .data(args.data.clone())
            .map_err(|_| UsageError("benchmark needs --data or --preset".into()))?;
        let ds = load_dataset(&data)?;
        resolved.data = Some(data);
        ds
    };
    require_events(&ds)?;
    let splits = make_folds(&ds, folds, seed)?;
    create_dir(&out)?;
    write_json(&out.join("resolved_config.json"), &resolved)?;

    let summaries = run_benchmark(&ds, &splits, &cfg)?;
    let rows: Vec<SummaryRow> = summaries.iter().map(|s| s.summary.clone()).collect();
    let table = render_table(&rows);
    write_json(&out.join("benchmark.json"), &summaries)?;
    write_file(&out.join("benchmark.txt"), &table)?;
    print!("{table}");
    Ok(())
}
