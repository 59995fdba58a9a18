//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use trimap::optimizer::{gradient, total_loss};
use trimap::triplets::Triplet;
use trimap::{DataMatrix, Embedding, TripletSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize, scale: f64) -> Vec<f64> {
    (0..n * m)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Random weighted triplets over `n` points with distinct `i`, `j`, `k`.
pub fn random_triplets(rng: &mut ChaCha8Rng, n: usize, count: usize) -> TripletSet {
    let mut triplets = Vec::with_capacity(count);
    while triplets.len() < count {
        let (i, j, k) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
        if i != j && j != k && i != k {
            triplets.push(Triplet::new(i, j, k));
        }
    }
    let weights = (0..count).map(|_| rng.random_range(0.1..2.0)).collect();
    TripletSet::with_weights(triplets, weights).unwrap()
}

/// One gradient-check instance: `n <= 50` points in `d` in {1, 2, 3}.
pub fn gradient_instance(seed: u64) -> (TripletSet, Embedding) {
    let mut rng = rng(seed);
    let n = rng.random_range(3..=50);
    let d = rng.random_range(1..=3);
    let count = rng.random_range(1..=4 * n);
    let set = random_triplets(&mut rng, n, count);
    let y = Embedding::new(n, d, gaussian_matrix(&mut rng, n, d, 1.5)).unwrap();
    (set, y)
}

/// Relative error `|g - g_fd| / max(|g|, |g_fd|)` of the analytic gradient
/// against central differences of the total loss.
pub fn finite_difference_error(set: &TripletSet, y: &Embedding) -> f64 {
    let analytic = gradient(set, y).unwrap();
    let h = 1e-5;
    let mut values = y.values().to_vec();
    let mut numeric = vec![0.0; values.len()];
    for c in 0..values.len() {
        let orig = values[c];
        values[c] = orig + h;
        let up = total_loss(set, &Embedding::new(y.n(), y.d(), values.clone()).unwrap()).unwrap();
        values[c] = orig - h;
        let down = total_loss(set, &Embedding::new(y.n(), y.d(), values.clone()).unwrap()).unwrap();
        values[c] = orig;
        numeric[c] = (up - down) / (2.0 * h);
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
    let scale = norm(&analytic).max(norm(&numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q] * a[p][q])
            .sum();
        let diag: f64 = (0..n).map(|p| a[p][p] * a[p][p]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|p| a[p][p]).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    eig
}

/// Sample covariance (denominator `n - 1`) as nested rows.
pub fn covariance(x: &DataMatrix) -> Vec<Vec<f64>> {
    let (n, m) = (x.n(), x.m());
    let mean: Vec<f64> = (0..m).map(|c| x.rows().map(|r| r[c]).sum::<f64>() / n as f64).collect();
    let mut cov = vec![vec![0.0; m]; m];
    for r in x.rows() {
        for a in 0..m {
            for b in 0..m {
                cov[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]);
            }
        }
    }
    cov.iter_mut().flatten().for_each(|v| *v /= (n - 1) as f64);
    cov
}

/// Least-squares residual of regressing each column of `x` on `y` (no
/// intercept), by solving the `d x d` normal equations with Gaussian
/// elimination.
pub fn normal_equation_residual(x: &DataMatrix, y: &Embedding) -> f64 {
    let d = y.d();
    let mut gram = vec![vec![0.0; d]; d];
    for r in y.rows() {
        for a in 0..d {
            for b in 0..d {
                gram[a][b] += r[a] * r[b];
            }
        }
    }
    let mut total = 0.0;
    for c in 0..x.m() {
        let rhs: Vec<f64> = (0..d)
            .map(|a| x.rows().zip(y.rows()).map(|(xr, yr)| yr[a] * xr[c]).sum())
            .collect();
        let coef = solve(gram.clone(), rhs);
        total += x
            .rows()
            .zip(y.rows())
            .map(|(xr, yr)| {
                let pred: f64 = (0..d).map(|a| coef[a] * yr[a]).sum();
                (xr[c] - pred).powi(2)
            })
            .sum::<f64>();
    }
    total
}

/// Dense solve with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Exact 1-NN label accuracy by double loop (ties to the smaller index).
pub fn nn_accuracy_oracle(y: &Embedding, labels: &[i64]) -> f64 {
    let n = y.n();
    let mut hits = 0;
    for i in 0..n {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in 0..n {
            if j == i {
                continue;
            }
            let d: f64 = y.row(i).iter().zip(y.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, j);
            }
        }
        if labels[best.1] == labels[i] {
            hits += 1;
        }
    }
    hits as f64 / n as f64
}

/// A random `d x d` matrix with determinant bounded away from zero.
pub fn invertible(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let r: Vec<f64> = (0..d * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let rows: Vec<Vec<f64>> = (0..d).map(|i| r[i * d..(i + 1) * d].to_vec()).collect();
        if determinant(rows).abs() > 0.1 {
            return r;
        }
    }
}

fn determinant(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(col, pivot);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    det
}

/// Random linear projection of `x` to `d` dimensions.
pub fn random_projection(rng: &mut ChaCha8Rng, x: &DataMatrix, d: usize) -> Embedding {
    let p = gaussian_matrix(rng, x.m(), d, 1.0);
    let mut values = Vec::with_capacity(x.n() * d);
    for r in x.rows() {
        for c in 0..d {
            values.push((0..x.m()).map(|t| r[t] * p[t * d + c]).sum::<f64>());
        }
    }
    Embedding::new(x.n(), d, values).unwrap()
}
