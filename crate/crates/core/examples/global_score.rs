// Global Score of a few embeddings of the same data.
//
// PCA scores 1 by construction; a random projection scores lower, and the
// score ignores any invertible linear map applied to an embedding.
//
// ```text
// cargo run --release --example global_score -- [n]
// ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trimap::{data, linalg, metrics, Embedding};

pub fn run_example(n: usize) -> trimap::Result<Vec<(&'static str, f64)>> {
    let (x, _) = data::make_blobs(n, 20, 5, 2.0, 1.0, 3);
    let (_, pca) = linalg::fit_pca(&x, 2)?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let proj: Vec<f64> = (0..x.m() * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut random = Vec::with_capacity(n * 2);
    for r in x.rows() {
        for c in 0..2 {
            random.push((0..r.len()).map(|t| r[t] * proj[t * 2 + c]).sum::<f64>());
        }
    }
    let random = Embedding::new(n, 2, random)?;
    let stretched = pca.transformed(&[3.0, 1.0, -0.5, 2.0], &[10.0, -4.0]);

    let mut out = Vec::new();
    for (name, y) in [
        ("pca", &pca),
        ("random projection", &random),
        ("pca, linearly mapped", &stretched),
    ] {
        let gs = metrics::global_score(&x, y)?;
        println!("{name:22} MRE {:>10.3}  GS {gs:.6}", metrics::mre(&x, y)?);
        out.push((name, gs));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> trimap::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    run_example(n)?;
    Ok(())
}
