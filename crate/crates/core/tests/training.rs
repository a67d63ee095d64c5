mod common;

use common::{central_diff, dataset, rel_err};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use survcorn::data::{preset, simulate, SimSpec};
use survcorn::encoding::{Batch, ExpansionWeight, Sample};
use survcorn::losses::{loss_discrete_hazard_baseline, loss_survcorn, LossConfig, RankEval};
use survcorn::metrics::{evaluate, predict_patients};
use survcorn::model::{
    flatten_layers, load_checkpoint, save_checkpoint, train, Activation, Head, ModelParams,
    TrainConfig,
};
use survcorn::timegrid::TimeGrid;
use survcorn::Error;

fn small_cohort(seed: u64, n: usize) -> survcorn::data::Dataset {
    let spec = SimSpec {
        n,
        d: 3,
        coef: vec![1.0, -0.5, 0.0],
        baseline_scale: 20.0,
        baseline_shape: 1.3,
        censoring_rate_target: 0.3,
        seed,
    };
    simulate(&spec).unwrap().0
}

fn quick_config() -> TrainConfig {
    TrainConfig {
        epochs: 3,
        hidden_dims: vec![8, 4],
        ..TrainConfig::default()
    }
}

#[test]
fn zero_learning_rate_freezes_parameters() {
    let ds = small_cohort(1, 60);
    let grid = TimeGrid::fit(&ds.times(), None).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        seed: 17,
        ..quick_config()
    };
    let (model, log) = train(&ds, &grid, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let initial = ModelParams::init(3, &[8, 4], grid.num_bins() - 1, Activation::Relu, &mut rng);
    assert_eq!(model.params, initial);
    assert_eq!(log.epochs.len(), 3);
}

#[test]
fn same_seed_same_model_and_log() {
    let ds = small_cohort(2, 80);
    let grid = TimeGrid::fit(&ds.times(), None).unwrap();
    let cfg = TrainConfig {
        seed: 5,
        ..quick_config()
    };
    let (a, la) = train(&ds, &grid, &cfg).unwrap();
    let (b, lb) = train(&ds, &grid, &cfg).unwrap();
    let bits = |m: &survcorn::model::SurvModel| -> Vec<u64> {
        m.params.to_flat().iter().map(|v| v.to_bits()).collect()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(la.to_json_lines().unwrap(), lb.to_json_lines().unwrap());
    let (c, _) = train(&ds, &grid, &TrainConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn training_reduces_the_loss() {
    let ds = small_cohort(3, 300);
    let grid = TimeGrid::fit(&ds.times(), None).unwrap();
    let cfg = TrainConfig {
        epochs: 15,
        loss: LossConfig {
            rank_weight: 0.0,
            ..LossConfig::default()
        },
        ..quick_config()
    };
    let (_, log) = train(&ds, &grid, &cfg).unwrap();
    let first = log.epochs.first().unwrap().total;
    let last = log.epochs.last().unwrap().total;
    assert!(last < first, "{first} -> {last}");
    let line = log.to_json_lines().unwrap();
    let v: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    for key in ["epoch", "ll_part", "rank_part", "total"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn all_censored_cohort_trains_on_likelihood() {
    let samples: Vec<Sample> = (0..20)
        .map(|i| Sample::new(vec![i as f64], 1.0 + i as f64, false).unwrap())
        .collect();
    let ds = dataset(samples);
    let grid = TimeGrid::fit(&ds.times(), None).unwrap();
    let (_, log) = train(&ds, &grid, &quick_config()).unwrap();
    assert!(log
        .epochs
        .iter()
        .all(|e| e.rank_part == 0.0 && e.total.is_finite()));
}

#[test]
fn rejects_bad_configs_and_inputs() {
    let ds = small_cohort(4, 30);
    let grid = TimeGrid::fit(&ds.times(), None).unwrap();
    for cfg in [
        TrainConfig {
            epochs: 0,
            ..quick_config()
        },
        TrainConfig {
            batch_size: 1,
            ..quick_config()
        },
        TrainConfig {
            learning_rate: -1.0,
            ..quick_config()
        },
        TrainConfig {
            hidden_dims: vec![0],
            ..quick_config()
        },
    ] {
        assert!(train(&ds, &grid, &cfg).is_err());
    }
    let empty = dataset(vec![]);
    assert!(train(&empty, &grid, &quick_config()).is_err());
}

#[test]
fn divergence_is_a_numerical_error() {
    let ds = small_cohort(5, 40);
    let grid = TimeGrid::fit(&ds.times(), None).unwrap();
    let cfg = TrainConfig {
        learning_rate: 1e300,
        epochs: 5,
        ..quick_config()
    };
    assert!(matches!(train(&ds, &grid, &cfg), Err(Error::Numerical(_))));
}

fn end_to_end_check(seed: u64, head: Head, activation: Activation) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=16);
    let k = rng.random_range(3..=8);
    let grid = TimeGrid::from_edges((1..k).map(|e| e as f64).collect()).unwrap();
    let samples: Vec<Sample> = (0..n)
        .map(|_| {
            Sample::new(
                (0..3).map(|_| rng.random_range(-1.5..1.5)).collect(),
                rng.random_range(0.0..k as f64),
                rng.random_bool(0.6),
            )
            .unwrap()
        })
        .collect();
    let batch = Batch::build(&samples, &grid, ExpansionWeight::Unit).unwrap();
    let mut params = ModelParams::init(3, &[6, 5], k - 1, activation, &mut rng);
    // zero-initialized biases put ReLU units with all-zero inputs exactly on the kink
    for layer in &mut params.layers {
        layer.biases.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    let cfg = LossConfig {
        rank_eval: if seed.is_multiple_of(2) {
            RankEval::OwnTime
        } else {
            RankEval::SameTime
        },
        ..LossConfig::default()
    };
    let loss = |p: &ModelParams| -> (f64, Array2<f64>) {
        let z = p.forward(batch.features.view()).unwrap();
        match head {
            Head::Survcorn => {
                let v = loss_survcorn(z.view(), &batch, &cfg).unwrap();
                (v.total, v.grad_logits)
            }
            Head::Hazard => {
                let v = loss_discrete_hazard_baseline(z.view(), &batch.targets).unwrap();
                (v.value, v.grad)
            }
        }
    };
    let (_, upstream) = loss(&params);
    let analytic = flatten_layers(
        &params
            .backward(batch.features.view(), upstream.view())
            .unwrap(),
    );
    let base = params.to_flat();
    let numeric = central_diff(&base, |v| {
        params.set_flat(v).unwrap();
        loss(&params).0
    });
    rel_err(&analytic, &numeric)
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    for seed in 0..20 {
        for head in [Head::Survcorn, Head::Hazard] {
            let err = end_to_end_check(seed, head, Activation::Tanh);
            assert!(err <= 1e-4, "seed {seed} {head:?}: {err}");
        }
    }
    for seed in 100..110 {
        let err = end_to_end_check(seed, Head::Survcorn, Activation::Relu);
        assert!(err <= 1e-4, "relu seed {seed}: {err}");
    }
}

#[test]
fn learns_a_strong_linear_signal() {
    let spec = SimSpec {
        coef: vec![2.0, -2.0],
        ..preset("separable", 11).unwrap()
    };
    let (ds, _) = simulate(&spec).unwrap();
    let grid = TimeGrid::fit(&ds.times(), None).unwrap();
    let (model, _) = train(&ds, &grid, &TrainConfig::default()).unwrap();
    let report = evaluate(&model, &ds).unwrap();
    assert!(report.cindex.unwrap() >= 0.80, "{:?}", report.cindex);
}

#[test]
fn checkpoint_reproduces_predictions_without_training_data() {
    let ds = small_cohort(6, 120);
    let grid = TimeGrid::fit(&ds.times(), None).unwrap();
    let (model, _) = train(&ds, &grid, &quick_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&model, &path).unwrap();
    drop(grid);
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded, model);
    let fresh = small_cohort(99, 40);
    let a = predict_patients(&model, &fresh).unwrap();
    let b = predict_patients(&loaded, &fresh).unwrap();
    assert_eq!(a, b);
    let za = model.logits(&fresh.samples).unwrap();
    let zb = loaded.logits(&fresh.samples).unwrap();
    assert!(za
        .iter()
        .zip(zb.iter())
        .all(|(x, y)| x.to_bits() == y.to_bits()));
    assert!(b.iter().all(|p| p.crossing_time <= loaded.grid.t_max()));
}
