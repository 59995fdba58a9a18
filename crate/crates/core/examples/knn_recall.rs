// Compares the random-projection forest against brute force.
//
// ```text
// cargo run --release --example knn_recall -- [n]
// ```

use std::time::Instant;

use trimap::{data, knn};

/// Returns `(name, recall@10)` for an S-curve and a blob dataset of `n` points.
pub fn run_example(n: usize) -> trimap::Result<Vec<(&'static str, f64)>> {
    let sets = [
        ("s-curve", data::make_s_curve(n, 0).0),
        ("blobs", data::make_blobs(n, 10, 8, 3.0, 1.0, 0).0),
    ];
    let mut out = Vec::new();
    for (name, x) in sets {
        let start = Instant::now();
        let forest = knn::build_forest(&x, knn::DEFAULT_TREES, knn::DEFAULT_LEAF_SIZE, 0)?;
        let approx = knn::query_all_knn(&forest, &x, 10, knn::DEFAULT_SEARCH_FACTOR)?;
        let forest_time = start.elapsed();

        let start = Instant::now();
        let exact = knn::exact_knn(&x, 10)?;
        let exact_time = start.elapsed();

        let recall = approx.recall_against(&exact, 10);
        println!("{name:8} recall@10 = {recall:.4}  forest {forest_time:.2?}  brute force {exact_time:.2?}");
        out.push((name, recall));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> trimap::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    run_example(n)?;
    Ok(())
}
