// File-based workflow: write a CSV and label file, load them back, embed,
// and save the embedding, metrics and an SVG plot next to the inputs.
//
// ```text
// cargo run --release --example csv_workflow -- [dir]
// ```

use std::fs;
use std::path::{Path, PathBuf};

use trimap::data::{self, MatrixFormat};
use trimap::{pipeline, plot, RunConfig, TrimapError};

/// Returns the paths written: embedding, metrics and plot.
pub fn run_example(dir: &Path) -> trimap::Result<[PathBuf; 3]> {
    let write = |path: &Path, text: String| {
        fs::write(path, text).map_err(|source| TrimapError::Write {
            path: path.to_path_buf(),
            source,
        })
    };
    let (x, labels) = data::make_blobs(600, 12, 3, 4.0, 1.0, 5);
    let csv: String = x
        .rows()
        .map(|r| r.iter().map(f64::to_string).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    let input = dir.join("points.csv");
    let label_file = dir.join("labels.txt");
    write(&input, csv)?;
    write(
        &label_file,
        labels.as_slice().iter().map(|l| format!("{l}\n")).collect(),
    )?;

    let x = data::load_matrix(&input, MatrixFormat::Csv)?;
    let labels = data::load_labels(&label_file)?;
    let result = pipeline::run_pipeline(&RunConfig::default(), x, Some(labels))?;

    let out = [dir.join("embedding.csv"), dir.join("metrics.txt"), dir.join("plot.svg")];
    data::write_embedding(&result.embedding, result.labels.as_ref(), &out[0])?;
    pipeline::write_metrics(&result, &out[1])?;
    plot::render_scatter(&result.embedding, result.labels.as_ref(), &out[2], 500, 500)?;
    print!("{}", pipeline::format_metrics(&result));
    Ok(out)
}

#[allow(dead_code)]
fn main() -> trimap::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    for path in run_example(&dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
