//! Centering, PCA and the least-squares inverse map.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::DataMatrix;
use crate::error::{Result, TrimapError};

/// Above this input width PCA switches from the dense covariance
/// eigendecomposition to randomized subspace iteration.
pub const DENSE_PCA_MAX_DIMS: usize = 1000;
const RANDOMIZED_OVERSAMPLING: usize = 10;
const RANDOMIZED_POWER_ITERS: usize = 7;
const PCA_SEED: u64 = 0x5ca1ab1e;

/// `n` points in `d` dimensions, one point per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl Embedding {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(TrimapError::InvalidConfig(
                "embedding dimension must be at least 1".into(),
            ));
        }
        if values.len() != n * d {
            return Err(TrimapError::DimensionMismatch(format!(
                "{} values cannot fill a {n}x{d} embedding",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TrimapError::DimensionMismatch(
                "embedding contains non-finite values".into(),
            ));
        }
        Ok(Embedding { n, d, values })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Embedding {
            n,
            d,
            values: vec![0.0; n * d],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.d)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Multiplies every coordinate by `c`.
    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    /// Applies `y -> y R + t` to every row; `r` is `d x d` row-major.
    pub fn transformed(&self, r: &[f64], t: &[f64]) -> Embedding {
        assert_eq!(r.len(), self.d * self.d);
        assert_eq!(t.len(), self.d);
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.rows() {
            for c in 0..self.d {
                let v: f64 = (0..self.d).map(|k| row[k] * r[k * self.d + c]).sum();
                values.push(v + t[c]);
            }
        }
        Embedding {
            n: self.n,
            d: self.d,
            values,
        }
    }

    pub fn as_data_matrix(&self) -> Result<DataMatrix> {
        DataMatrix::new(self.n, self.d, self.values.clone())
    }
}

impl From<DataMatrix> for Embedding {
    fn from(x: DataMatrix) -> Self {
        Embedding {
            n: x.n(),
            d: x.m(),
            values: x.into_values(),
        }
    }
}

/// Column means of row-major `values` with `cols` columns.
fn column_means(values: &[f64], cols: usize) -> Vec<f64> {
    let mut mean = vec![0.0; cols];
    let mut rows = 0usize;
    for row in values.chunks_exact(cols) {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
        rows += 1;
    }
    mean.iter_mut().for_each(|v| *v /= rows.max(1) as f64);
    mean
}

fn subtract_mean(values: &mut [f64], mean: &[f64]) {
    for row in values.chunks_exact_mut(mean.len()) {
        for (v, mu) in row.iter_mut().zip(mean) {
            *v -= mu;
        }
    }
}

/// Subtracts the column means. Returns the centered copy and the means.
pub fn center(x: &DataMatrix) -> (DataMatrix, Vec<f64>) {
    let mean = column_means(x.values(), x.m());
    let mut values = x.values().to_vec();
    subtract_mean(&mut values, &mean);
    let centered = DataMatrix::new(x.n(), x.m(), values).expect("centering keeps values finite");
    (centered, mean)
}

pub fn center_embedding(y: &Embedding) -> Embedding {
    let mean = column_means(y.values(), y.d());
    let mut out = y.clone();
    subtract_mean(&mut out.values, &mean);
    out
}

/// Top principal directions of a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `d x m`, row-major; row `j` is the `j`-th direction.
    pub components: Vec<f64>,
    /// Sample variance (denominator `n - 1`) along each direction.
    pub explained_variance: Vec<f64>,
    pub d: usize,
    pub m: usize,
}

impl PcaModel {
    pub fn component(&self, j: usize) -> &[f64] {
        &self.components[j * self.m..(j + 1) * self.m]
    }

    /// Projects rows of `x` (already in the input space) onto the components.
    pub fn transform(&self, x: &DataMatrix) -> Embedding {
        let mut values = Vec::with_capacity(x.n() * self.d);
        let mut centered = vec![0.0; self.m];
        for row in x.rows() {
            for ((c, v), mu) in centered.iter_mut().zip(row).zip(&self.mean) {
                *c = v - mu;
            }
            for j in 0..self.d {
                values.push(dot(&centered, self.component(j)));
            }
        }
        Embedding {
            n: x.n(),
            d: self.d,
            values,
        }
    }

    /// Maps an embedding back to the input space: `mean + y C`.
    pub fn inverse_transform(&self, y: &Embedding) -> Vec<f64> {
        let mut out = Vec::with_capacity(y.n() * self.m);
        for row in y.rows() {
            for c in 0..self.m {
                let v: f64 = (0..self.d).map(|j| row[j] * self.components[j * self.m + c]).sum();
                out.push(self.mean[c] + v);
            }
        }
        out
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn to_dmatrix(values: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, values)
}

/// Fits a `d`-component PCA and returns the model with the projected data.
///
/// Directions with no variance (rank-deficient input) get all-zero
/// components and zero explained variance, and are ordered last. Each
/// component's largest-magnitude entry is positive.
pub fn fit_pca(x: &DataMatrix, d: usize) -> Result<(PcaModel, Embedding)> {
    if x.m() > DENSE_PCA_MAX_DIMS {
        fit_pca_randomized(x, d, PCA_SEED)
    } else {
        fit_pca_dense(x, d)
    }
}

fn check_pca_dims(x: &DataMatrix, d: usize) -> Result<()> {
    if x.n() < 2 {
        return Err(TrimapError::TooFewPoints { n: x.n(), required: 1 });
    }
    if d == 0 || d > x.m().min(x.n() - 1) {
        return Err(TrimapError::InvalidConfig(format!(
            "PCA dimension {d} outside 1..={} for {}x{} data",
            x.m().min(x.n() - 1),
            x.n(),
            x.m()
        )));
    }
    Ok(())
}

/// Exact PCA through the eigendecomposition of the `m x m` covariance.
pub fn fit_pca_dense(x: &DataMatrix, d: usize) -> Result<(PcaModel, Embedding)> {
    check_pca_dims(x, d)?;
    let (xc, mean) = center(x);
    let xm = to_dmatrix(xc.values(), x.n(), x.m());
    let cov = xm.tr_mul(&xm) / (x.n() - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..x.m()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let directions = order[..d]
        .iter()
        .map(|&j| (eig.eigenvalues[j], eig.eigenvectors.column(j).iter().copied().collect()))
        .collect();
    Ok(assemble_model(&xc, mean, directions))
}

/// Randomized subspace iteration on the centered data.
pub fn fit_pca_randomized(x: &DataMatrix, d: usize, seed: u64) -> Result<(PcaModel, Embedding)> {
    check_pca_dims(x, d)?;
    let (xc, mean) = center(x);
    let a = to_dmatrix(xc.values(), x.n(), x.m());
    let width = (d + RANDOMIZED_OVERSAMPLING).min(x.m()).min(x.n());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(x.m(), width, |_, _| StandardNormal.sample(&mut rng));
    let mut q = (&a * omega).qr().q();
    for _ in 0..RANDOMIZED_POWER_ITERS {
        let z = a.tr_mul(&q).qr().q();
        q = (&a * z).qr().q();
    }
    let b = q.tr_mul(&a);
    let svd = b.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .total_cmp(&svd.singular_values[i])
            .then(i.cmp(&j))
    });
    let directions = order[..d]
        .iter()
        .map(|&j| {
            let s = svd.singular_values[j];
            (s * s / (x.n() - 1) as f64, v_t.row(j).iter().copied().collect())
        })
        .collect();
    Ok(assemble_model(&xc, mean, directions))
}

/// Normalizes signs, zero-fills null directions and projects.
fn assemble_model(xc: &DataMatrix, mean: Vec<f64>, directions: Vec<(f64, Vec<f64>)>) -> (PcaModel, Embedding) {
    let m = xc.m();
    let d = directions.len();
    let top = directions.first().map_or(0.0, |(l, _)| l.max(0.0));
    let cutoff = 1e-12 * top;
    let mut kept: Vec<(f64, Vec<f64>)> = Vec::with_capacity(d);
    let mut null = 0;
    for (lambda, mut v) in directions {
        if top == 0.0 || lambda <= cutoff {
            null += 1;
            continue;
        }
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        kept.push((lambda, v));
    }
    kept.extend((0..null).map(|_| (0.0, vec![0.0; m])));
    let explained_variance = kept.iter().map(|(l, _)| *l).collect();
    let components: Vec<f64> = kept.into_iter().flat_map(|(_, v)| v).collect();
    let model = PcaModel {
        mean: mean.clone(),
        components,
        explained_variance,
        d,
        m,
    };
    let mut values = Vec::with_capacity(xc.n() * d);
    for row in xc.rows() {
        for j in 0..d {
            values.push(dot(row, model.component(j)));
        }
    }
    let embedding = Embedding { n: xc.n(), d, values };
    (model, embedding)
}

/// Projects `x` onto its top `target_dims` principal directions when it is
/// wider than that; otherwise returns it unchanged.
pub fn pre_reduce(x: &DataMatrix, target_dims: usize) -> Result<DataMatrix> {
    if x.m() <= target_dims {
        return Ok(x.clone());
    }
    let d = target_dims.min(x.n().saturating_sub(1)).max(1);
    let (_, y) = fit_pca(x, d)?;
    y.as_data_matrix()
}

/// Least-squares linear map from an embedding back to the data.
///
/// With both inputs centered, returns the `m x d` matrix `A` minimizing
/// `sum_i |x_i - A y_i|^2`, i.e. `A = X^T Y (Y^T Y)^+`. Eigenvalues of `Y^T Y`
/// below `1e-12` times the largest are treated as zero, which gives the
/// minimum-norm solution for collapsed embeddings.
pub fn solve_inverse_map(x: &DataMatrix, y: &Embedding) -> Result<DMatrix<f64>> {
    if x.n() != y.n() {
        return Err(TrimapError::DimensionMismatch(format!(
            "data has {} points, embedding has {}",
            x.n(),
            y.n()
        )));
    }
    let xm = to_dmatrix(x.values(), x.n(), x.m());
    let ym = to_dmatrix(y.values(), y.n(), y.d());
    let gram = ym.tr_mul(&ym);
    let cross = xm.tr_mul(&ym);
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let cutoff = 1e-12 * top;
    let inv = eig
        .eigenvalues
        .map(|l| if top > 0.0 && l > cutoff { 1.0 / l } else { 0.0 });
    let pinv = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
    Ok(cross * pinv)
}

/// `sum_i |x_i - A y_i|^2` for an `m x d` map `A`.
pub fn reconstruction_residual(x: &DataMatrix, y: &Embedding, a: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for (xr, yr) in x.rows().zip(y.rows()) {
        for c in 0..x.m() {
            let pred: f64 = (0..y.d()).map(|k| a[(c, k)] * yr[k]).sum();
            let r = xr[c] - pred;
            total += r * r;
        }
    }
    total
}
