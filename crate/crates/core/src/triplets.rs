//! Triplet sampling and weighting.
//!
//! A triplet `(i, j, k)` asserts that `i` is closer to `j` than to `k`.
//! Distances are normalized per pair by `sigma_i * sigma_j`, where `sigma_i`
//! is the mean distance from `i` to its 4th, 5th and 6th nearest neighbors.
//! Each triplet's raw weight is `exp(d2_ik - d2_ij)` on those scaled squared
//! distances; we keep it as a log and only exponentiate after subtracting the
//! global maximum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::data::DataMatrix;
use crate::error::{Result, TrimapError};
use crate::knn::NeighborTable;

pub const SIGMA_FLOOR: f64 = 1e-10;
/// Rejection attempts for the farther point before settling for the
/// farthest candidate seen.
pub const MAX_REJECTION_ATTEMPTS: usize = 200;

/// Per-point distance scale.
pub fn compute_sigmas(neighbors: &NeighborTable) -> Result<Vec<f64>> {
    if neighbors.k() < 6 {
        return Err(TrimapError::TooFewNeighbors {
            required: 6,
            found: neighbors.k(),
        });
    }
    Ok((0..neighbors.n())
        .map(|i| {
            let d = &neighbors.distances(i)[3..6];
            ((d[0] + d[1] + d[2]) / 3.0).max(SIGMA_FLOOR)
        })
        .collect())
}

/// `|x_i - x_j|^2 / (sigma_i sigma_j)`.
#[inline]
pub fn scaled_sqdist(x: &DataMatrix, sigmas: &[f64], i: usize, j: usize) -> f64 {
    x.sqdist(i, j) / (sigmas[i] * sigmas[j])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub i: u32,
    pub j: u32,
    pub k: u32,
}

impl Triplet {
    pub fn new(i: usize, j: usize, k: usize) -> Self {
        Triplet {
            i: i as u32,
            j: j as u32,
            k: k as u32,
        }
    }

    #[inline]
    pub fn indices(&self) -> (usize, usize, usize) {
        (self.i as usize, self.j as usize, self.k as usize)
    }
}

/// Sampled triplets with their log raw weights and, once
/// [`weight_triplets`] has run, their transformed weights.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TripletSet {
    pub triplets: Vec<Triplet>,
    /// `d2_ik - d2_ij` on scaled distances.
    pub log_raw_weights: Vec<f64>,
    /// Empty until weighted.
    pub weights: Vec<f64>,
}

impl TripletSet {
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// Builds a weighted set directly, e.g. for experiments with fixed triplets.
    pub fn with_weights(triplets: Vec<Triplet>, weights: Vec<f64>) -> Result<Self> {
        if triplets.len() != weights.len() {
            return Err(TrimapError::DimensionMismatch(format!(
                "{} triplets but {} weights",
                triplets.len(),
                weights.len()
            )));
        }
        Ok(TripletSet {
            log_raw_weights: vec![0.0; triplets.len()],
            triplets,
            weights,
        })
    }

    /// Largest index referenced plus one, or 0 when empty.
    pub fn min_points(&self) -> usize {
        self.triplets
            .iter()
            .map(|t| t.i.max(t.j).max(t.k) as usize + 1)
            .max()
            .unwrap_or(0)
    }
}

/// How many triplets of each kind to draw per point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplingPlan {
    pub n_neighbors: usize,
    pub per_neighbor: usize,
    pub random: usize,
}

impl SamplingPlan {
    pub fn per_point(&self) -> usize {
        self.n_neighbors * self.per_neighbor + self.random
    }
}

impl From<&RunConfig> for SamplingPlan {
    fn from(c: &RunConfig) -> Self {
        SamplingPlan {
            n_neighbors: c.m_neighbors,
            per_neighbor: c.m_prime,
            random: c.r_random,
        }
    }
}

/// Uniform index in `0..n` avoiding `a` and `b` (`a != b`).
#[inline]
fn draw_excluding(rng: &mut ChaCha8Rng, n: usize, a: usize, b: usize) -> usize {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let mut v = rng.random_range(0..n - 2);
    if v >= lo {
        v += 1;
    }
    if v >= hi {
        v += 1;
    }
    v
}

#[inline]
fn draw_excluding_one(rng: &mut ChaCha8Rng, n: usize, a: usize) -> usize {
    let v = rng.random_range(0..n - 1);
    if v >= a {
        v + 1
    } else {
        v
    }
}

/// Samples nearest-neighbor and random triplets for every point.
///
/// For each of the first `n_neighbors` neighbors `j` of `i`, draws
/// `per_neighbor` points `k` uniformly among those with a larger scaled
/// distance to `i` (rejection sampling). Then adds `random` triplets with
/// both `j` and `k` uniform, ordered so that `j` is the closer one. Point `i`
/// uses stream `i` of the seeded generator, so the output is independent of
/// the thread count.
pub fn sample_triplets(
    x: &DataMatrix,
    neighbors: &NeighborTable,
    sigmas: &[f64],
    plan: SamplingPlan,
    seed: u64,
) -> Result<TripletSet> {
    let n = x.n();
    if n <= plan.n_neighbors + 1 || n < 3 {
        return Err(TrimapError::TooFewPoints {
            n,
            required: (plan.n_neighbors + 1).max(2),
        });
    }
    if n > u32::MAX as usize {
        return Err(TrimapError::InvalidConfig(format!(
            "{n} points exceed the u32 index range"
        )));
    }
    if neighbors.n() != n || sigmas.len() != n {
        return Err(TrimapError::DimensionMismatch(format!(
            "{n} points, {} neighbor rows, {} scales",
            neighbors.n(),
            sigmas.len()
        )));
    }
    if neighbors.k() < plan.n_neighbors {
        return Err(TrimapError::TooFewNeighbors {
            required: plan.n_neighbors,
            found: neighbors.k(),
        });
    }

    let per_point: Vec<(Vec<Triplet>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut triplets = Vec::with_capacity(plan.per_point());
            let mut logs = Vec::with_capacity(plan.per_point());
            let mut push = |j: usize, k: usize, d_ij: f64, d_ik: f64| {
                let (j, k, d_ij, d_ik) = if d_ij <= d_ik {
                    (j, k, d_ij, d_ik)
                } else {
                    (k, j, d_ik, d_ij)
                };
                triplets.push(Triplet::new(i, j, k));
                logs.push(d_ik - d_ij);
            };

            for &j in &neighbors.indices(i)[..plan.n_neighbors] {
                let d_ij = scaled_sqdist(x, sigmas, i, j);
                for _ in 0..plan.per_neighbor {
                    let mut farthest = (f64::NEG_INFINITY, usize::MAX);
                    let mut chosen = None;
                    for _ in 0..MAX_REJECTION_ATTEMPTS {
                        let k = draw_excluding(&mut rng, n, i, j);
                        let d_ik = scaled_sqdist(x, sigmas, i, k);
                        if d_ik > d_ij {
                            chosen = Some((k, d_ik));
                            break;
                        }
                        if d_ik > farthest.0 {
                            farthest = (d_ik, k);
                        }
                    }
                    let (k, d_ik) = chosen.unwrap_or((farthest.1, farthest.0));
                    push(j, k, d_ij, d_ik);
                }
            }
            for _ in 0..plan.random {
                let j = draw_excluding_one(&mut rng, n, i);
                let k = draw_excluding(&mut rng, n, i, j);
                let d_ij = scaled_sqdist(x, sigmas, i, j);
                let d_ik = scaled_sqdist(x, sigmas, i, k);
                push(j, k, d_ij, d_ik);
            }
            (triplets, logs)
        })
        .collect();

    let total = n * plan.per_point();
    let mut set = TripletSet {
        triplets: Vec::with_capacity(total),
        log_raw_weights: Vec::with_capacity(total),
        weights: Vec::new(),
    };
    for (t, l) in per_point {
        set.triplets.extend(t);
        set.log_raw_weights.extend(l);
    }
    Ok(set)
}

/// `log(1 + gamma * u)`.
#[inline]
pub fn log_transform(u: f64, gamma: f64) -> f64 {
    (gamma * u).ln_1p()
}

/// Fills `weights` with `log(1 + gamma (w / W + delta))`, where `W` is the
/// largest raw weight in the set. Evaluated as `exp(log w - log W)` so large
/// exponents never overflow.
pub fn weight_triplets(mut set: TripletSet, gamma: f64, delta: f64) -> Result<TripletSet> {
    if set.is_empty() {
        return Err(TrimapError::EmptyTriplets);
    }
    if let Some(bad) = set.log_raw_weights.iter().position(|w| !w.is_finite()) {
        return Err(TrimapError::InvalidConfig(format!(
            "log raw weight of triplet {bad} is not finite"
        )));
    }
    if set.log_raw_weights.len() != set.triplets.len() {
        return Err(TrimapError::DimensionMismatch(
            "one log raw weight per triplet required".into(),
        ));
    }
    let max = set.log_raw_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    set.weights = set
        .log_raw_weights
        .iter()
        .map(|lw| log_transform((lw - max).exp() + delta, gamma))
        .collect();
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_blobs;
    use crate::knn::exact_knn;

    fn line(n: usize) -> DataMatrix {
        DataMatrix::new(n, 1, (0..n).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn sigma_on_integer_line() {
        let x = line(10);
        let t = exact_knn(&x, 7).unwrap();
        let s = compute_sigmas(&t).unwrap();
        assert_eq!(s[0], 5.0);
    }

    #[test]
    fn sigma_uses_fourth_to_sixth_neighbor() {
        let row: Vec<(usize, f64)> = [1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 3.0]
            .iter()
            .enumerate()
            .map(|(j, d)| (j + 1, *d))
            .collect();
        let t = NeighborTable::from_rows(vec![row]).unwrap();
        assert_eq!(compute_sigmas(&t).unwrap(), vec![2.0]);
    }

    #[test]
    fn sigma_floor_on_identical_points() {
        let x = DataMatrix::new(8, 2, vec![1.0; 16]).unwrap();
        let t = exact_knn(&x, 6).unwrap();
        assert!(compute_sigmas(&t).unwrap().iter().all(|s| *s == SIGMA_FLOOR));
    }

    #[test]
    fn sigma_needs_six_neighbors() {
        let t = exact_knn(&line(6), 5).unwrap();
        assert!(matches!(
            compute_sigmas(&t),
            Err(TrimapError::TooFewNeighbors { required: 6, found: 5 })
        ));
    }

    #[test]
    fn scaled_distance_examples() {
        let x = DataMatrix::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        assert_eq!(scaled_sqdist(&x, &[1.0, 1.0], 0, 0), 0.0);
        assert_eq!(scaled_sqdist(&x, &[1.0, 1.0], 0, 1), 4.0);
        assert_eq!(scaled_sqdist(&x, &[4.0, 1.0], 0, 1), 1.0);
        assert_eq!(scaled_sqdist(&x, &[4.0, 1.0], 1, 0), 1.0);
    }

    fn sampled(n: usize, plan: SamplingPlan, seed: u64) -> (DataMatrix, Vec<f64>, TripletSet) {
        let (x, _) = make_blobs(n, 4, 3, 3.0, 1.0, 17);
        let t = exact_knn(&x, plan.n_neighbors.max(6) + 1).unwrap();
        let s = compute_sigmas(&t).unwrap();
        let set = sample_triplets(&x, &t, &s, plan, seed).unwrap();
        (x, s, set)
    }

    const DEFAULT_PLAN: SamplingPlan = SamplingPlan {
        n_neighbors: 10,
        per_neighbor: 5,
        random: 5,
    };

    #[test]
    fn default_plan_gives_55_per_point() {
        let (x, s, set) = sampled(100, DEFAULT_PLAN, 1);
        assert_eq!(set.len(), 5500);
        assert_eq!(set.log_raw_weights.len(), 5500);
        for (t, lw) in set.triplets.iter().zip(&set.log_raw_weights) {
            let (i, j, k) = t.indices();
            assert!(i != j && j != k && i != k);
            let d_ij = scaled_sqdist(&x, &s, i, j);
            let d_ik = scaled_sqdist(&x, &s, i, k);
            assert!(d_ij <= d_ik);
            assert_eq!(*lw, d_ik - d_ij);
        }
        // anchor order is the point order
        assert!(set.triplets.windows(2).all(|w| w[0].i <= w[1].i));
    }

    #[test]
    fn every_farther_point_is_outside_the_neighbor_radius() {
        let plan = SamplingPlan {
            n_neighbors: 10,
            per_neighbor: 1,
            random: 0,
        };
        let (x, s, set) = sampled(12, plan, 5);
        assert_eq!(set.len(), 120);
        for t in &set.triplets {
            let (i, j, k) = t.indices();
            // brute force: recompute both distances from coordinates
            let dist = |a: usize, b: usize| {
                let d: f64 = x.row(a).iter().zip(x.row(b)).map(|(p, q)| (p - q).powi(2)).sum();
                d / (s[a] * s[b])
            };
            let d_ij = dist(i, j);
            let any_farther = (0..x.n()).any(|h| h != i && h != j && dist(i, h) > d_ij);
            // the fallback only fires when nothing is farther than j
            assert!(dist(i, k) > d_ij || !any_farther);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let (_, _, a) = sampled(200, DEFAULT_PLAN, 3);
        let (_, _, b) = sampled(200, DEFAULT_PLAN, 3);
        let (_, _, c) = sampled(200, DEFAULT_PLAN, 4);
        assert_eq!(a, b);
        assert_ne!(a.triplets, c.triplets);
    }

    #[test]
    fn sampling_rejects_small_n() {
        let x = line(11);
        let t = exact_knn(&x, 10).unwrap();
        let s = vec![1.0; 11];
        assert!(matches!(
            sample_triplets(&x, &t, &s, DEFAULT_PLAN, 0),
            Err(TrimapError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn degenerate_data_falls_back_without_livelock() {
        let x = DataMatrix::new(20, 2, vec![0.5; 40]).unwrap();
        let t = exact_knn(&x, 11).unwrap();
        let s = compute_sigmas(&t).unwrap();
        let set = sample_triplets(&x, &t, &s, DEFAULT_PLAN, 0).unwrap();
        assert_eq!(set.len(), 20 * 55);
        assert!(set.log_raw_weights.iter().all(|w| *w == 0.0));
        let set = weight_triplets(set, 500.0, 1e-4).unwrap();
        let top = (500.0f64 * 1.0001).ln_1p();
        assert!(set.weights.iter().all(|w| *w == top));
    }

    #[test]
    fn weight_examples() {
        let set = TripletSet {
            triplets: vec![Triplet::new(0, 1, 2), Triplet::new(1, 0, 2)],
            log_raw_weights: vec![3.0, 3.0 - 800.0],
            weights: vec![],
        };
        let w = weight_triplets(set, 500.0, 1e-4).unwrap().weights;
        assert!((w[0] - 6.21671).abs() < 1e-5, "{}", w[0]);
        assert!((w[1] - 0.04879).abs() < 1e-5, "{}", w[1]);
        assert!((w[1] - 1.05f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn weights_vanish_as_gamma_goes_to_zero() {
        let set = TripletSet {
            triplets: vec![Triplet::new(0, 1, 2); 3],
            log_raw_weights: vec![0.0, 1.0, 2.0],
            weights: vec![],
        };
        let w = weight_triplets(set, 1e-12, 1e-4).unwrap().weights;
        assert!(w.iter().all(|v| *v > 0.0 && *v < 1e-11));
    }

    #[test]
    fn huge_log_weights_do_not_overflow() {
        let set = TripletSet {
            triplets: vec![Triplet::new(0, 1, 2); 2],
            log_raw_weights: vec![5000.0, 4999.0],
            weights: vec![],
        };
        let w = weight_triplets(set, 500.0, 1e-4).unwrap().weights;
        assert!(w.iter().all(|v| v.is_finite()));
        assert!(w[0] > w[1]);
    }

    #[test]
    fn empty_set_is_an_error() {
        assert!(matches!(
            weight_triplets(TripletSet::default(), 500.0, 1e-4),
            Err(TrimapError::EmptyTriplets)
        ));
    }
}
