#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use loadcomb::io::{DataSource, ExperimentConfig, SynthSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Random symmetric p.d. matrix with uneven scales.
pub fn random_pd(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| normal(rng));
    let scale: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..20.0)).collect();
    let mut w = &a * a.transpose() / m as f64 + DMatrix::identity(m, m) * 0.05;
    for r in 0..m {
        for c in 0..m {
            w[(r, c)] *= scale[r] * scale[c];
        }
    }
    (&w + w.transpose()) * 0.5
}

/// Solves `A X = B` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let k = b[0].len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().chain(rb).copied().collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        for r in col + 1..n {
            let f = aug[r][col] / aug[col][col];
            for c in col..n + k {
                aug[r][c] -= f * aug[col][c];
            }
        }
    }
    let mut x = vec![vec![0.0; k]; n];
    for r in (0..n).rev() {
        for j in 0..k {
            let s: f64 = (r + 1..n).map(|c| aug[r][c] * x[c][j]).sum();
            x[r][j] = (aug[r][n + j] - s) / aug[r][r];
        }
    }
    x
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

/// Default synthetic scenario with a short window and the given length.
pub fn synth_config(days: usize, window_days: usize) -> ExperimentConfig {
    let spec = SynthSpec {
        days,
        ..SynthSpec::default()
    };
    let mut cfg = ExperimentConfig::new(DataSource::Synth(spec));
    cfg.window_days = window_days;
    cfg.min_window_days = window_days.min(7);
    cfg
}
