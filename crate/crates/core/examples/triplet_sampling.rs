// Samples and weights triplets for a small blob dataset, then re-checks
// every triplet's orientation by brute force.
//
// ```text
// cargo run --release --example triplet_sampling -- [n]
// ```

use trimap::triplets::{self, SamplingPlan};
use trimap::{data, knn, RunConfig, TripletSet};

pub fn run_example(n: usize) -> trimap::Result<TripletSet> {
    let (x, _) = data::make_blobs(n, 8, 4, 3.0, 1.0, 0);
    let config = RunConfig::default();
    let neighbors = knn::exact_knn(&x, config.knn_k().min(n - 1))?;
    let sigmas = triplets::compute_sigmas(&neighbors)?;
    let sampled = triplets::sample_triplets(&x, &neighbors, &sigmas, SamplingPlan::from(&config), 0)?;
    let set = triplets::weight_triplets(sampled, config.gamma, config.delta)?;

    let misoriented = set
        .triplets
        .iter()
        .filter(|t| {
            let (i, j, k) = t.indices();
            triplets::scaled_sqdist(&x, &sigmas, i, j) > triplets::scaled_sqdist(&x, &sigmas, i, k)
        })
        .count();
    let (lo, hi) = set
        .weights
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), w| {
            (lo.min(*w), hi.max(*w))
        });
    println!(
        "{} triplets ({} per point), {misoriented} misoriented, weights in [{lo:.4}, {hi:.4}]",
        set.len(),
        config.triplets_per_point()
    );
    Ok(set)
}

#[allow(dead_code)]
fn main() -> trimap::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    run_example(n)?;
    Ok(())
}
