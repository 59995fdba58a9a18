//! SVG scatter plots of 2-D embeddings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::Labels;
use crate::error::{Result, TrimapError};
use crate::linalg::Embedding;

/// Categorical cycle; the i-th distinct label (in sorted order) gets entry
/// `i % 20`.
pub const PALETTE: [&str; 20] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
];
pub const UNLABELED: &str = "#808080";
pub const POINT_RADIUS: f64 = 1.5;
const PADDING: f64 = 0.05;

/// Renders the embedding as a standalone SVG document.
///
/// The data bounding box is fit to the canvas with a 5% margin on each side
/// (aspect ratio is not preserved); the vertical axis points up.
pub fn svg_scatter(y: &Embedding, labels: Option<&Labels>, width: u32, height: u32) -> Result<String> {
    if y.d() != 2 {
        return Err(TrimapError::DimensionMismatch(format!(
            "scatter plots need a 2-D embedding, got {} dimensions",
            y.d()
        )));
    }
    if let Some(labels) = labels {
        labels.check_len(y.n())?;
    }
    let (w, h) = (width.max(1) as f64, height.max(1) as f64);
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for row in y.rows() {
        for c in 0..2 {
            lo[c] = lo[c].min(row[c]);
            hi[c] = hi[c].max(row[c]);
        }
    }
    let project = |v: f64, c: usize, extent: f64| {
        let span = hi[c] - lo[c];
        if span > 0.0 {
            extent * (PADDING + (1.0 - 2.0 * PADDING) * (v - lo[c]) / span)
        } else {
            extent / 2.0
        }
    };
    let colors: BTreeMap<i64, &str> = labels
        .map(|l| {
            let mut distinct: Vec<i64> = l.as_slice().to_vec();
            distinct.sort_unstable();
            distinct.dedup();
            distinct
                .into_iter()
                .enumerate()
                .map(|(rank, label)| (label, PALETTE[rank % PALETTE.len()]))
                .collect()
        })
        .unwrap_or_default();

    let mut out = String::with_capacity(128 + y.n() * 56);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    )
    .unwrap();
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (i, row) in y.rows().enumerate() {
        let cx = project(row[0], 0, w);
        let cy = h - project(row[1], 1, h);
        let fill = labels.map_or(UNLABELED, |l| colors[&l.0[i]]);
        writeln!(
            out,
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{POINT_RADIUS}\" fill=\"{fill}\"/>"
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_scatter(
    y: &Embedding,
    labels: Option<&Labels>,
    path: impl AsRef<Path>,
    width: u32,
    height: u32,
) -> Result<()> {
    let path = path.as_ref();
    let svg = svg_scatter(y, labels, width, height)?;
    fs::write(path, svg).map_err(|source| TrimapError::Write {
        path: path.to_path_buf(),
        source,
    })
}
