// Sweeps the weight-sharpening constant gamma on ten overlapping Gaussian
// clusters in 50 dimensions. Larger gamma flattens the weights, which
// should trade a little global structure for local structure.
//
// ```text
// cargo run --release --example gamma_sweep -- [n]
// ```

use trimap::{data, pipeline, RunConfig};

/// Returns `(gamma, nn_accuracy, global_score)` per setting.
pub fn run_example(n: usize, gammas: &[f64]) -> trimap::Result<Vec<(f64, f64, f64)>> {
    let (x, labels) = data::make_blobs(n, 50, 10, 0.7, 1.0, 7);
    let mut out = Vec::new();
    for &gamma in gammas {
        let config = RunConfig {
            gamma,
            ..RunConfig::default()
        };
        let r = pipeline::run_pipeline(&config, x.clone(), Some(labels.clone()))?;
        let nn = r.metrics.nn_accuracy.unwrap_or(f64::NAN);
        println!("gamma {gamma:>6}: NN {nn:.4}  GS {:.4}", r.metrics.global_score);
        out.push((gamma, nn, r.metrics.global_score));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> trimap::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    run_example(n, &[50.0, 500.0, 5000.0])?;
    Ok(())
}
