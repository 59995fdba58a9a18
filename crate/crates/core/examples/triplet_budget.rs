// Scales the triplet budget `(m, m', r) = c (2, 1, 1)` on ten overlapping
// Gaussian clusters. Accuracy climbs quickly and then levels off.
//
// ```text
// cargo run --release --example triplet_budget -- [n]
// ```

use trimap::{data, pipeline, RunConfig};

/// Returns `(c, triplets, nn_accuracy)` per budget multiplier.
pub fn run_example(n: usize, multipliers: &[usize]) -> trimap::Result<Vec<(usize, usize, f64)>> {
    let (x, labels) = data::make_blobs(n, 50, 10, 0.7, 1.0, 7);
    let mut out = Vec::new();
    for &c in multipliers {
        let config = RunConfig {
            m_neighbors: 2 * c,
            m_prime: c,
            r_random: c,
            ..RunConfig::default()
        };
        let r = pipeline::run_pipeline(&config, x.clone(), Some(labels.clone()))?;
        let nn = r.metrics.nn_accuracy.unwrap_or(f64::NAN);
        println!(
            "c = {c:>2}: {:>8} triplets  NN {nn:.4}  GS {:.4}  {:.2?}",
            r.n_triplets, r.metrics.global_score, r.timings.total
        );
        out.push((c, r.n_triplets, nn));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> trimap::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    run_example(n, &[1, 5, 20])?;
    Ok(())
}
