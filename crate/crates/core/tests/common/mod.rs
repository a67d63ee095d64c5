#![allow(dead_code)]

use ndarray::Array2;
use survcorn::data::Dataset;
use survcorn::encoding::Sample;

pub const FD_STEP: f64 = 1e-5;

/// `||a - b|| / max(||a||, ||b||)`, absolute when both are ~0.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

/// Central differences of `f` over every coordinate of `x`.
pub fn central_diff(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + FD_STEP;
            let up = f(&probe);
            probe[i] = orig - FD_STEP;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn flat(a: &Array2<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

pub fn unflat(v: &[f64], rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_vec((rows, cols), v.to_vec()).unwrap()
}

pub fn dataset(samples: Vec<Sample>) -> Dataset {
    let d = samples.first().map_or(0, |s| s.features.len());
    Dataset::new(samples, (1..=d).map(|j| format!("x{j}")).collect()).unwrap()
}
