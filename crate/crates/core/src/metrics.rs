//! Embedding quality: minimum reconstruction error, global score and
//! nearest-neighbor label accuracy.
//!
//! The minimum reconstruction error (MRE) of an embedding `Y` of data `X` is
//! the squared Frobenius residual of the best linear map from `Y` back to
//! `X`, both centered. PCA attains the smallest possible MRE for a given
//! dimension, and the global score `exp(-(E - E_pca) / E_pca)` measures how
//! far an embedding falls short of it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{sqdist, DataMatrix, Labels};
use crate::error::{Result, TrimapError};
use crate::linalg::{center, center_embedding, fit_pca, reconstruction_residual, solve_inverse_map, Embedding};

/// Beyond this many points, NN accuracy is computed on a seeded subsample.
pub const NN_ACCURACY_MAX_POINTS: usize = 20_000;

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub mre: f64,
    pub mre_pca: f64,
    pub global_score: f64,
    pub nn_accuracy: Option<f64>,
    /// Size of the subsample used for `nn_accuracy`, when one was drawn.
    pub nn_sample: Option<usize>,
}

pub fn mre(x: &DataMatrix, y: &Embedding) -> Result<f64> {
    if x.n() != y.n() {
        return Err(TrimapError::DimensionMismatch(format!(
            "data has {} points, embedding has {}",
            x.n(),
            y.n()
        )));
    }
    let (xc, _) = center(x);
    let yc = center_embedding(y);
    let a = solve_inverse_map(&xc, &yc)?;
    Ok(reconstruction_residual(&xc, &yc, &a))
}

/// MRE of the `d`-dimensional PCA embedding of `x`.
pub fn pca_mre(x: &DataMatrix, d: usize) -> Result<f64> {
    let d = d.min(x.m()).min(x.n().saturating_sub(1));
    if d == 0 {
        return mre(x, &Embedding::zeros(x.n(), 1));
    }
    let (_, y) = fit_pca(x, d)?;
    mre(x, &y)
}

/// `exp(-(e - e_pca) / e_pca)` clamped to `[0, 1]`.
///
/// When `e_pca` is zero the data has rank at most `d`: the score is 1 if the
/// embedding also reconstructs it exactly and 0 otherwise.
pub fn score_from_errors(e: f64, e_pca: f64) -> f64 {
    if e_pca <= 0.0 {
        if e <= 1e-12 {
            return 1.0;
        }
        log::warn!("PCA reconstructs the data exactly; global score of a lossy embedding is 0");
        return 0.0;
    }
    (-(e - e_pca) / e_pca).exp().clamp(0.0, 1.0)
}

pub fn global_score(x: &DataMatrix, y: &Embedding) -> Result<f64> {
    let e = mre(x, y)?;
    let e_pca = pca_mre(x, y.d())?;
    Ok(score_from_errors(e, e_pca))
}

/// Fraction of points whose nearest embedded neighbor (self excluded, ties
/// to the smaller index) carries the same label.
pub fn nn_accuracy(y: &Embedding, labels: &Labels) -> Result<f64> {
    labels.check_len(y.n())?;
    if y.n() < 2 {
        return Err(TrimapError::TooFewPoints { n: y.n(), required: 1 });
    }
    let points: Vec<usize> = (0..y.n()).collect();
    Ok(nn_accuracy_on(y, labels.as_slice(), &points))
}

fn nn_accuracy_on(y: &Embedding, labels: &[i64], points: &[usize]) -> f64 {
    let hits: usize = points
        .par_iter()
        .map(|&i| {
            let yi = y.row(i);
            let mut best = (f64::INFINITY, usize::MAX);
            for &j in points {
                if j == i {
                    continue;
                }
                let d = sqdist(yi, y.row(j));
                if d < best.0 {
                    best = (d, j);
                }
            }
            usize::from(labels[best.1] == labels[i])
        })
        .sum();
    hits as f64 / points.len() as f64
}

/// Like [`nn_accuracy`] but restricted to a seeded subsample of
/// [`NN_ACCURACY_MAX_POINTS`] points on large inputs. Returns the sample
/// size when one was used.
pub fn nn_accuracy_sampled(y: &Embedding, labels: &Labels, seed: u64) -> Result<(f64, Option<usize>)> {
    if y.n() <= NN_ACCURACY_MAX_POINTS {
        return Ok((nn_accuracy(y, labels)?, None));
    }
    labels.check_len(y.n())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = rand::seq::index::sample(&mut rng, y.n(), NN_ACCURACY_MAX_POINTS).into_vec();
    points.sort_unstable();
    Ok((nn_accuracy_on(y, labels.as_slice(), &points), Some(points.len())))
}

pub fn evaluate(x: &DataMatrix, y: &Embedding, labels: Option<&Labels>, seed: u64) -> Result<MetricsReport> {
    let e = mre(x, y)?;
    let e_pca = pca_mre(x, y.d())?;
    let (nn_accuracy, nn_sample) = match labels {
        Some(labels) => {
            let (acc, sample) = nn_accuracy_sampled(y, labels, seed)?;
            (Some(acc), sample)
        }
        None => (None, None),
    };
    Ok(MetricsReport {
        mre: e,
        mre_pca: e_pca,
        global_score: score_from_errors(e, e_pca),
        nn_accuracy,
        nn_sample,
    })
}
