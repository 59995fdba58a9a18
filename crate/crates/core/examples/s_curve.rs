// Embeds a 5000-point S-curve with default settings and reports the
// (NN accuracy, global score) pair next to the PCA baseline.
//
// ```text
// cargo run --release --example s_curve -- [n] [out.svg]
// ```

use trimap::{data, linalg, metrics, pipeline, plot, RunConfig};

pub fn run_example(n: usize, svg: Option<&str>) -> trimap::Result<pipeline::PipelineResult> {
    let (x, labels) = data::make_s_curve(n, 0);

    let (_, y_pca) = linalg::fit_pca(&x, 2)?;
    let pca_nn = metrics::nn_accuracy(&y_pca, &labels)?;
    let pca_gs = metrics::global_score(&x, &y_pca)?;
    println!("PCA     (NN, GS) = ({pca_nn:.3}, {pca_gs:.3})");

    let result = pipeline::run_pipeline(&RunConfig::default(), x, Some(labels))?;
    let m = &result.metrics;
    println!(
        "triplet (NN, GS) = ({:.3}, {:.3})  [{} triplets, {:.2?}]",
        m.nn_accuracy.unwrap_or(f64::NAN),
        m.global_score,
        result.n_triplets,
        result.timings.total
    );
    if let Some(path) = svg {
        plot::render_scatter(&result.embedding, result.labels.as_ref(), path, 600, 600)?;
        println!("wrote {path}");
    }
    Ok(result)
}

#[allow(dead_code)]
fn main() -> trimap::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5000);
    run_example(n, args.get(2).map(String::as_str))?;
    Ok(())
}
