// Drives the optimizer by hand on a fixed set of triplets.
//
// Four points, three constraints: 0 should sit closer to 1 than to 2, and so
// on. The loss trace shows the momentum and gain schedule at work.
//
// ```text
// cargo run --release --example custom_triplets
// ```

use trimap::optimizer::{self, OptimizerState};
use trimap::triplets::Triplet;
use trimap::{config::OptimizerParams, Embedding, TripletSet};

/// Returns the loss before and after `steps` descent steps.
pub fn run_example(steps: usize) -> trimap::Result<(f64, f64)> {
    let set = TripletSet::with_weights(
        vec![Triplet::new(0, 1, 2), Triplet::new(2, 3, 0), Triplet::new(1, 0, 3)],
        vec![1.0, 1.0, 0.5],
    )?;
    let y0 = Embedding::new(4, 2, vec![0.0, 0.0, 1.0, 0.0, 0.2, 0.1, 1.0, 1.0])?;
    let params = OptimizerParams {
        learning_rate: 1.0,
        ..OptimizerParams::default()
    };
    let mut state = OptimizerState::new(&set, y0, &params)?;
    let before = state.loss(&set);
    for t in 0..steps {
        let loss = state.step(&set, &params, params.initial_momentum)?;
        if t % (steps / 5).max(1) == 0 {
            println!("step {t:>4}: loss {loss:.6}");
        }
    }
    let after = optimizer::total_loss(&set, &state.y)?;
    println!("loss {before:.6} -> {after:.6}");
    for (i, row) in state.y.rows().enumerate() {
        println!("  y{i} = ({:.3}, {:.3})", row[0], row[1]);
    }
    Ok((before, after))
}

#[allow(dead_code)]
fn main() -> trimap::Result<()> {
    run_example(200)?;
    Ok(())
}
