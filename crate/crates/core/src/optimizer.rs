//! Triplet loss and full-batch delta-bar-delta descent.
//!
//! For a weighted triplet `(i, j, k)` with weight `w`,
//!
//! ```text
//! loss = w * s(y_i, y_k) / (s(y_i, y_j) + s(y_i, y_k)),   s(a, b) = 1 / (1 + |a - b|^2)
//! ```
//!
//! which simplifies to `w * a / (a + b)` with `a = 1 + |y_i - y_j|^2` and
//! `b = 1 + |y_i - y_k|^2`. The gradient follows from
//! `d/da = w b / (a + b)^2` and `d/db = -w a / (a + b)^2`.

use rayon::prelude::*;

use crate::config::{OptimizerParams, RunConfig};
use crate::error::{Result, TrimapError};
use crate::linalg::Embedding;
use crate::triplets::{Triplet, TripletSet};

/// Triplets are split into at most this many contiguous shards, each with its
/// own gradient buffer. Shards are merged in order, so sums do not depend on
/// how many threads ran them.
const GRADIENT_SHARDS: usize = 16;
const MIN_SHARD_LEN: usize = 4096;
/// A loss jump larger than this factor halves the step and drops momentum.
const DIVERGENCE_FACTOR: f64 = 10.0;
/// Coordinates plus gradient of one `k` bucket should stay cache resident.
const K_BLOCK_BYTES: usize = 64 * 1024;
/// How many triplets ahead the rows for `j` and `k` are requested.
const PREFETCH_DISTANCE: usize = 16;

/// Hint that `v[at]` is about to be touched. `j` and `k` are scattered, so
/// on large inputs the loop is otherwise bound by cache misses.
#[inline(always)]
fn prefetch(v: &[f64], at: usize) {
    #[cfg(target_arch = "x86_64")]
    if at < v.len() {
        use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
        // SAFETY: prefetching is a hint and never faults; the address is in bounds anyway.
        #[allow(unused_unsafe)]
        unsafe {
            _mm_prefetch::<_MM_HINT_T0>(v.as_ptr().add(at) as *const i8)
        };
    }
    #[cfg(not(target_arch = "x86_64"))]
    let _ = (v, at);
}

/// Heavy-tailed similarity `1 / (1 + |a - b|^2)`.
#[inline]
pub fn similarity(a: &[f64], b: &[f64]) -> f64 {
    1.0 / (1.0 + crate::data::sqdist(a, b))
}

pub fn triplet_loss(triplet: Triplet, weight: f64, y: &Embedding) -> f64 {
    let (i, j, k) = triplet.indices();
    let s_ij = similarity(y.row(i), y.row(j));
    let s_ik = similarity(y.row(i), y.row(k));
    weight * s_ik / (s_ij + s_ik)
}

fn check_set(set: &TripletSet, n: usize) -> Result<()> {
    if set.weights.len() != set.triplets.len() {
        return Err(TrimapError::DimensionMismatch(format!(
            "{} triplets but {} weights",
            set.triplets.len(),
            set.weights.len()
        )));
    }
    let needed = set.min_points();
    if needed > n {
        return Err(TrimapError::IndexOutOfRange { index: needed - 1, n });
    }
    Ok(())
}

/// Sum of triplet losses, accumulated in triplet order.
pub fn total_loss(set: &TripletSet, y: &Embedding) -> Result<f64> {
    check_set(set, y.n())?;
    Ok(set
        .triplets
        .iter()
        .zip(&set.weights)
        .map(|(t, w)| triplet_loss(*t, *w, y))
        .sum())
}

/// Gradient of [`total_loss`], `n x d` row-major.
pub fn gradient(set: &TripletSet, y: &Embedding) -> Result<Vec<f64>> {
    check_set(set, y.n())?;
    let mut ws = GradientWorkspace::new(set.len(), y.n(), y.d());
    ws.evaluate(set, y);
    Ok(ws.grad)
}

/// Loss and gradient for one contiguous run of triplets, added into `grad`.
fn accumulate(triplets: &[Triplet], weights: &[f64], y: &[f64], d: usize, grad: &mut [f64]) -> f64 {
    let mut loss = 0.0;
    let mut diff_ij = [0.0f64; 8];
    let mut diff_ik = [0.0f64; 8];
    let heap = d > 8;
    let mut big_ij = if heap { vec![0.0; d] } else { Vec::new() };
    let mut big_ik = if heap { vec![0.0; d] } else { Vec::new() };
    let (dij, dik): (&mut [f64], &mut [f64]) = if heap {
        (&mut big_ij, &mut big_ik)
    } else {
        (&mut diff_ij[..d], &mut diff_ik[..d])
    };
    for (n, (t, &w)) in triplets.iter().zip(weights).enumerate() {
        if let Some(ahead) = triplets.get(n + PREFETCH_DISTANCE) {
            let (_, j, k) = ahead.indices();
            prefetch(y, j * d);
            prefetch(y, k * d);
            prefetch(grad, j * d);
            prefetch(grad, k * d);
        }
        let (i, j, k) = t.indices();
        let yi = &y[i * d..(i + 1) * d];
        let yj = &y[j * d..(j + 1) * d];
        let yk = &y[k * d..(k + 1) * d];
        let mut a = 1.0;
        let mut b = 1.0;
        for c in 0..d {
            dij[c] = yi[c] - yj[c];
            dik[c] = yi[c] - yk[c];
            a += dij[c] * dij[c];
            b += dik[c] * dik[c];
        }
        let s = a + b;
        loss += w * a / s;
        let scale = 2.0 * w / (s * s);
        let g_a = scale * b;
        let g_b = -scale * a;
        for c in 0..d {
            let gij = g_a * dij[c];
            let gik = g_b * dik[c];
            grad[i * d + c] += gij + gik;
            grad[j * d + c] -= gij;
            grad[k * d + c] -= gik;
        }
    }
    loss
}

/// Reusable shard buffers for repeated gradient evaluations. Each shard sums
/// into its own buffer and the buffers are added in shard order, so the
/// result does not depend on the number of threads.
struct GradientWorkspace {
    shards: Vec<std::ops::Range<usize>>,
    buffers: Vec<Vec<f64>>,
    grad: Vec<f64>,
    d: usize,
}

impl GradientWorkspace {
    fn new(len: usize, n: usize, d: usize) -> Self {
        let count = len.div_ceil(MIN_SHARD_LEN).clamp(1, GRADIENT_SHARDS);
        let shards: Vec<_> = (0..count).map(|s| s * len / count..(s + 1) * len / count).collect();
        GradientWorkspace {
            buffers: vec![vec![0.0; n * d]; shards.len()],
            shards,
            grad: vec![0.0; n * d],
            d,
        }
    }

    /// Fills `self.grad` and returns the loss.
    fn evaluate(&mut self, set: &TripletSet, y: &Embedding) -> f64 {
        let d = self.d;
        let yv = y.values();
        let losses: Vec<f64> = self
            .buffers
            .par_iter_mut()
            .zip(self.shards.par_iter())
            .map(|(buf, range)| {
                buf.fill(0.0);
                accumulate(&set.triplets[range.clone()], &set.weights[range.clone()], yv, d, buf)
            })
            .collect();
        let buffers = &self.buffers;
        self.grad.par_chunks_mut(1024).enumerate().for_each(|(c, out)| {
            let base = c * 1024;
            for (o, v) in out.iter_mut().enumerate() {
                *v = buffers.iter().map(|b| b[base + o]).sum();
            }
        });
        losses.iter().sum()
    }
}

/// Loss values seen during optimization.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossReport {
    /// Loss of the returned embedding.
    pub total: f64,
    /// Loss before each step, one entry per iteration.
    pub history: Vec<f64>,
}

/// Iterate plus momentum and per-coordinate gain state.
pub struct OptimizerState {
    pub y: Embedding,
    pub velocity: Vec<f64>,
    pub gains: Vec<f64>,
    pub smoothed_grad: Vec<f64>,
    pub iter: usize,
    /// Current base step, before gains.
    pub step: f64,
    last_loss: Option<f64>,
    workspace: GradientWorkspace,
}

impl OptimizerState {
    /// Starts from `y0` with unit gains and zero velocity. The base step is
    /// `learning_rate * n / |T|`.
    pub fn new(set: &TripletSet, y0: Embedding, params: &OptimizerParams) -> Result<Self> {
        check_set(set, y0.n())?;
        let len = y0.values().len();
        let step = params.learning_rate * y0.n() as f64 / set.len().max(1) as f64;
        Ok(OptimizerState {
            workspace: GradientWorkspace::new(set.len(), y0.n(), y0.d()),
            velocity: vec![0.0; len],
            gains: vec![1.0; len],
            smoothed_grad: vec![0.0; len],
            iter: 0,
            step,
            last_loss: None,
            y: y0,
        })
    }

    /// One descent step with momentum `momentum`. Returns the loss at the
    /// iterate the step started from.
    pub fn step(&mut self, set: &TripletSet, params: &OptimizerParams, momentum: f64) -> Result<f64> {
        let loss = self.workspace.evaluate(set, &self.y);
        if !loss.is_finite() {
            return Err(TrimapError::Diverged {
                what: "loss",
                iter: self.iter,
            });
        }
        if self.workspace.grad.iter().any(|g| !g.is_finite()) {
            return Err(TrimapError::Diverged {
                what: "gradient",
                iter: self.iter,
            });
        }
        if let Some(prev) = self.last_loss {
            if loss > DIVERGENCE_FACTOR * prev {
                log::warn!(
                    "loss jumped from {prev} to {loss} at iteration {}; halving step",
                    self.iter
                );
                self.step *= 0.5;
                self.velocity.fill(0.0);
            }
        }
        self.last_loss = Some(loss);

        let rho = params.grad_smoothing;
        let step = self.step;
        let y = self.y.values_mut();
        for c in 0..y.len() {
            let g = self.workspace.grad[c];
            let s = rho * self.smoothed_grad[c] + (1.0 - rho) * g;
            self.smoothed_grad[c] = s;
            let gain = if g * s > 0.0 {
                self.gains[c] + params.gain_increment
            } else {
                self.gains[c] * params.gain_decay
            };
            self.gains[c] = gain.clamp(params.gain_min, params.gain_max);
            self.velocity[c] = momentum * self.velocity[c] - step * self.gains[c] * g;
            y[c] += self.velocity[c];
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(TrimapError::Diverged {
                what: "embedding",
                iter: self.iter,
            });
        }
        self.iter += 1;
        Ok(loss)
    }

    /// Loss at the current iterate.
    pub fn loss(&mut self, set: &TripletSet) -> f64 {
        self.workspace.evaluate(set, &self.y)
    }
}

/// Point order in which each point's `j` partners follow it closely:
/// breadth-first over the `i -> j` graph, restarting at the lowest unvisited
/// index. Returns `order[new] = old` and the triplet ids grouped by `i`.
fn locality_order(set: &TripletSet, n: usize) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut start = vec![0usize; n + 1];
    for t in &set.triplets {
        start[t.i as usize + 1] += 1;
    }
    for p in 0..n {
        start[p + 1] += start[p];
    }
    let mut fill = start.clone();
    let mut by_i = vec![0usize; set.len()];
    for (id, t) in set.triplets.iter().enumerate() {
        by_i[fill[t.i as usize]] = id;
        fill[t.i as usize] += 1;
    }
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut head = order.len();
        order.push(root);
        while head < order.len() {
            let p = order[head];
            head += 1;
            for &id in &by_i[start[p]..start[p + 1]] {
                let j = set.triplets[id].j as usize;
                if !seen[j] {
                    seen[j] = true;
                    order.push(j);
                }
            }
        }
    }
    (order, start, by_i)
}

/// Renumbers points by [`locality_order`] and reorders triplets for cache
/// reuse. Only memory layout and summation order change.
fn relabel(set: &TripletSet, n: usize, d: usize) -> (TripletSet, Vec<usize>) {
    let (order, start, by_i) = locality_order(set, n);
    let mut rank = vec![0usize; n];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    // Bucket by block of k (stable, so each bucket stays ordered by i): the
    // scattered k rows of one bucket then stay in cache.
    let block = (K_BLOCK_BYTES / (16 * d.max(1))).max(1);
    let buckets = n.div_ceil(block).max(1);
    let mut count = vec![0usize; buckets + 1];
    for t in &set.triplets {
        count[rank[t.k as usize] / block + 1] += 1;
    }
    for b in 0..buckets {
        count[b + 1] += count[b];
    }
    let mut triplets = vec![Triplet::new(0, 0, 0); set.len()];
    let mut weights = vec![0.0; set.len()];
    for &old in &order {
        for &id in &by_i[start[old]..start[old + 1]] {
            let t = set.triplets[id];
            let k = rank[t.k as usize];
            let slot = &mut count[k / block];
            triplets[*slot] = Triplet::new(rank[t.i as usize], rank[t.j as usize], k);
            weights[*slot] = set.weights[id];
            *slot += 1;
        }
    }
    let set = TripletSet {
        triplets,
        log_raw_weights: Vec::new(),
        weights,
    };
    (set, order)
}

/// Runs `config.iters` full-batch steps from `y0`. Momentum is
/// `initial_momentum` before `momentum_switch_iter` and `final_momentum`
/// from then on.
pub fn optimize(set: &TripletSet, y0: Embedding, config: &RunConfig) -> Result<(Embedding, LossReport)> {
    let params = &config.optimizer;
    check_set(set, y0.n())?;
    let (n, d) = (y0.n(), y0.d());
    let (local, order) = relabel(set, n, d);
    let mut permuted = Vec::with_capacity(n * d);
    for &old in &order {
        permuted.extend_from_slice(y0.row(old));
    }
    let mut state = OptimizerState::new(&local, Embedding::new(n, d, permuted)?, params)?;
    let mut history = Vec::with_capacity(config.iters);
    for t in 0..config.iters {
        let momentum = if t < config.momentum_switch_iter {
            params.initial_momentum
        } else {
            params.final_momentum
        };
        history.push(state.step(&local, params, momentum)?);
    }
    let total = state.loss(&local);
    if !total.is_finite() {
        return Err(TrimapError::Diverged {
            what: "loss",
            iter: config.iters,
        });
    }
    let mut out = vec![0.0; n * d];
    for (new, &old) in order.iter().enumerate() {
        out[old * d..(old + 1) * d].copy_from_slice(state.y.row(new));
    }
    Ok((Embedding::new(n, d, out)?, LossReport { total, history }))
}
