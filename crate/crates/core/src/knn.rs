//! Approximate k-nearest neighbors with a random-projection forest.
//!
//! Each tree recursively splits its points at the median of their
//! projections onto a random unit direction until buckets hold at most
//! `leaf_size` points. A point's candidate pool is the union of the buckets it
//! landed in across all trees; when that pool is small, neighbors of its
//! provisional neighbors are added as well. Exact distances then decide the
//! final top `k`.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::data::{sqdist, DataMatrix};
use crate::error::{Result, TrimapError};

pub const DEFAULT_TREES: usize = 20;
pub const DEFAULT_LEAF_SIZE: usize = 64;
pub const DEFAULT_SEARCH_FACTOR: usize = 3;

/// Per-point neighbor lists, sorted by ascending distance (ties by index).
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborTable {
    n: usize,
    k: usize,
    indices: Vec<usize>,
    distances: Vec<f64>,
}

impl NeighborTable {
    /// Builds a table from per-point `(index, distance)` rows.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        let mut indices = Vec::with_capacity(n * k);
        let mut distances = Vec::with_capacity(n * k);
        for row in rows {
            if row.len() != k {
                return Err(TrimapError::DimensionMismatch(format!(
                    "neighbor rows must all have {k} entries"
                )));
            }
            for (j, d) in row {
                indices.push(j);
                distances.push(d);
            }
        }
        Ok(NeighborTable {
            n,
            k,
            indices,
            distances,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn indices(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }

    /// Mean fraction of `reference`'s neighbors found in `self`, comparing the
    /// first `k` entries of each row.
    pub fn recall_against(&self, reference: &NeighborTable, k: usize) -> f64 {
        assert_eq!(self.n, reference.n);
        let k = k.min(self.k).min(reference.k);
        if self.n == 0 || k == 0 {
            return 1.0;
        }
        let hits: usize = (0..self.n)
            .map(|i| {
                let ours = &self.indices(i)[..k];
                reference.indices(i)[..k].iter().filter(|j| ours.contains(j)).count()
            })
            .sum();
        hits as f64 / (self.n * k) as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Split {
        direction: Vec<f64>,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(usize),
}

/// One random-projection tree.
#[derive(Clone, Debug, PartialEq)]
pub struct RpTree {
    nodes: Vec<Node>,
    leaves: Vec<Vec<usize>>,
    leaf_of: Vec<usize>,
}

impl RpTree {
    pub fn leaves(&self) -> &[Vec<usize>] {
        &self.leaves
    }

    /// Bucket that training point `i` was assigned to.
    pub fn leaf_of(&self, i: usize) -> &[usize] {
        &self.leaves[self.leaf_of[i]]
    }

    /// Descends to the bucket for an arbitrary query vector.
    pub fn search(&self, query: &[f64]) -> &[usize] {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Leaf(leaf) => return &self.leaves[*leaf],
                Node::Split {
                    direction,
                    threshold,
                    left,
                    right,
                } => {
                    let p: f64 = direction.iter().zip(query).map(|(a, b)| a * b).sum();
                    node = if p < *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf(_) => 1,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RpForest {
    trees: Vec<RpTree>,
    leaf_size: usize,
    n: usize,
}

impl RpForest {
    pub fn trees(&self) -> &[RpTree] {
        &self.trees
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }
}

/// Builds `n_trees` trees; tree `t` draws from stream `t` of the seeded
/// generator, so the result does not depend on the thread count.
pub fn build_forest(x: &DataMatrix, n_trees: usize, leaf_size: usize, seed: u64) -> Result<RpForest> {
    if x.n() < 2 {
        return Err(TrimapError::TooFewPoints { n: x.n(), required: 1 });
    }
    if n_trees == 0 || leaf_size == 0 {
        return Err(TrimapError::InvalidConfig(
            "forest needs at least one tree and leaf_size >= 1".into(),
        ));
    }
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            build_tree(x, leaf_size, &mut rng)
        })
        .collect();
    Ok(RpForest {
        trees,
        leaf_size,
        n: x.n(),
    })
}

fn build_tree(x: &DataMatrix, leaf_size: usize, rng: &mut ChaCha8Rng) -> RpTree {
    let mut tree = RpTree {
        nodes: vec![Node::Leaf(0)],
        leaves: Vec::new(),
        leaf_of: vec![0; x.n()],
    };
    let mut stack = vec![(0usize, (0..x.n()).collect::<Vec<_>>())];
    let mut projected: Vec<(f64, usize)> = Vec::with_capacity(x.n());
    while let Some((node, points)) = stack.pop() {
        if points.len() <= leaf_size.max(1) {
            let leaf = tree.leaves.len();
            for &p in &points {
                tree.leaf_of[p] = leaf;
            }
            tree.leaves.push(points);
            tree.nodes[node] = Node::Leaf(leaf);
            continue;
        }
        let direction = random_unit(x.m(), rng);
        projected.clear();
        projected.extend(
            points
                .iter()
                .map(|&p| (direction.iter().zip(x.row(p)).map(|(a, b)| a * b).sum::<f64>(), p)),
        );
        let mid = projected.len() / 2;
        projected.select_nth_unstable_by(mid, cmp_pair);
        let threshold = projected[mid].0;
        let left_points: Vec<usize> = projected[..mid].iter().map(|&(_, p)| p).collect();
        let right_points: Vec<usize> = projected[mid..].iter().map(|&(_, p)| p).collect();
        let left = tree.nodes.len();
        let right = left + 1;
        tree.nodes.push(Node::Leaf(0));
        tree.nodes.push(Node::Leaf(0));
        tree.nodes[node] = Node::Split {
            direction,
            threshold,
            left,
            right,
        };
        // right first so the left subtree is expanded first
        stack.push((right, right_points));
        stack.push((left, left_points));
    }
    tree
}

fn random_unit(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

#[inline]
fn cmp_pair(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Keeps the `k` smallest `(sqdist, index)` pairs, sorted.
fn top_k(candidates: &mut Vec<(f64, usize)>, k: usize) -> Vec<(f64, usize)> {
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, cmp_pair);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(cmp_pair);
    candidates.clone()
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(TrimapError::KTooLarge { k, n });
    }
    Ok(())
}

/// Scratch buffer marking visited candidates with a per-query stamp.
struct Visited {
    stamp: Vec<u32>,
    current: u32,
}

impl Visited {
    fn new(n: usize) -> Self {
        Visited {
            stamp: vec![0; n],
            current: 0,
        }
    }

    fn next(&mut self) {
        self.current = self.current.wrapping_add(1);
        if self.current == 0 {
            self.stamp.fill(0);
            self.current = 1;
        }
    }

    /// Returns true the first time `j` is seen in the current query.
    fn insert(&mut self, j: usize) -> bool {
        let seen = self.stamp[j] == self.current;
        self.stamp[j] = self.current;
        !seen
    }
}

/// Top `k` of every member of `leaf` among the other members, as sorted
/// `(sqdist, index)` runs of `min(k, leaf.len() - 1)` entries each.
///
/// Rows are copied into a contiguous block first so the pairwise pass stays
/// in cache regardless of where the members live in `x`.
fn leaf_top_k(x: &DataMatrix, leaf: &[usize], k: usize, scratch: &mut LeafScratch) -> Vec<(f64, usize)> {
    let (m, l) = (x.m(), leaf.len());
    let kk = k.min(l.saturating_sub(1));
    let LeafScratch { rows, dist, cand } = scratch;
    rows.clear();
    for &p in leaf {
        rows.extend_from_slice(x.row(p));
    }
    dist.clear();
    dist.resize(l * l, 0.0);
    for a in 0..l {
        let ra = &rows[a * m..(a + 1) * m];
        for b in a + 1..l {
            let d = sqdist(ra, &rows[b * m..(b + 1) * m]);
            dist[a * l + b] = d;
            dist[b * l + a] = d;
        }
    }
    let mut out = Vec::with_capacity(l * kk);
    if kk == 0 {
        return out;
    }
    for a in 0..l {
        cand.clear();
        cand.extend((0..l).filter(|&b| b != a).map(|b| (dist[a * l + b], leaf[b])));
        if cand.len() > kk {
            cand.select_nth_unstable_by(kk - 1, cmp_pair);
            cand.truncate(kk);
        }
        cand.sort_unstable_by(cmp_pair);
        out.extend_from_slice(cand);
    }
    out
}

#[derive(Default)]
struct LeafScratch {
    rows: Vec<f64>,
    dist: Vec<f64>,
    cand: Vec<(f64, usize)>,
}

/// Merges the sorted run `incoming` into the sorted run `best`, keeping the
/// `k` smallest distinct entries. A pair seen in two buckets carries the same
/// bits both times, so duplicates compare equal and collapse here.
fn merge_top_k(best: &mut Vec<(f64, usize)>, incoming: &[(f64, usize)], k: usize, out: &mut Vec<(f64, usize)>) {
    out.clear();
    let (mut a, mut b) = (0, 0);
    while out.len() < k && (a < best.len() || b < incoming.len()) {
        let next = match (best.get(a), incoming.get(b)) {
            (Some(x), Some(y)) => match cmp_pair(x, y) {
                Ordering::Less => {
                    a += 1;
                    *x
                }
                Ordering::Greater => {
                    b += 1;
                    *y
                }
                Ordering::Equal => {
                    a += 1;
                    b += 1;
                    *x
                }
            },
            (Some(x), None) => {
                a += 1;
                *x
            }
            (None, Some(y)) => {
                b += 1;
                *y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    std::mem::swap(best, out);
}

/// Approximate `k` nearest neighbors of every training point.
///
/// Points whose bucket union has fewer than `search_factor * k` candidates get
/// a second pass over the neighbors of their provisional neighbors. Every
/// point then gets one refinement round (see [`refine`]).
pub fn query_all_knn(forest: &RpForest, x: &DataMatrix, k: usize, search_factor: usize) -> Result<NeighborTable> {
    check_k(x.n(), k)?;
    if forest.n != x.n() {
        return Err(TrimapError::DimensionMismatch(format!(
            "forest was built on {} points, data has {}",
            forest.n,
            x.n()
        )));
    }
    let rows = forest_pass(forest, x, k, search_factor);
    into_table(refine(x, &rows, k))
}

/// Sorted `(sqdist, index)` rows from the bucket unions, expanded where small.
fn forest_pass(forest: &RpForest, x: &DataMatrix, k: usize, search_factor: usize) -> Vec<Vec<(f64, usize)>> {
    let n = x.n();
    let small_pool = search_factor.saturating_mul(k).max(k);

    // Bucket by bucket: the top k over a union equals the top k over the
    // merged per-bucket top-k runs.
    let mut best: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n];
    let mut slot = vec![(0usize, 0usize); n];
    for tree in &forest.trees {
        let runs: Vec<Vec<(f64, usize)>> = tree
            .leaves
            .par_iter()
            .map_init(LeafScratch::default, |scratch, leaf| leaf_top_k(x, leaf, k, scratch))
            .collect();
        for (li, leaf) in tree.leaves.iter().enumerate() {
            for (pos, &p) in leaf.iter().enumerate() {
                slot[p] = (li, pos);
            }
        }
        best.par_iter_mut()
            .enumerate()
            .for_each_init(Vec::new, |scratch, (i, row)| {
                let (li, pos) = slot[i];
                let len = runs[li].len() / tree.leaves[li].len();
                merge_top_k(row, &runs[li][pos * len..(pos + 1) * len], k, scratch);
            });
    }

    let first: Vec<(Vec<(f64, usize)>, bool)> = best
        .into_par_iter()
        .enumerate()
        .map_init(
            || Visited::new(n),
            |visited, (i, row)| {
                visited.next();
                visited.insert(i);
                let mut pool = 0;
                'count: for tree in &forest.trees {
                    for &j in tree.leaf_of(i) {
                        if visited.insert(j) {
                            pool += 1;
                            if pool >= small_pool {
                                break 'count;
                            }
                        }
                    }
                }
                (row, pool < small_pool)
            },
        )
        .collect();

    if first.iter().all(|(_, expand)| !expand) {
        first.into_iter().map(|(row, _)| row).collect()
    } else {
        (0..n)
            .into_par_iter()
            .map_init(
                || (Visited::new(n), Vec::new()),
                |(visited, candidates), i| {
                    let (row, expand) = &first[i];
                    if !*expand {
                        return row.clone();
                    }
                    visited.next();
                    visited.insert(i);
                    candidates.clear();
                    for tree in &forest.trees {
                        for &j in tree.leaf_of(i) {
                            if visited.insert(j) {
                                candidates.push((x.sqdist(i, j), j));
                            }
                        }
                    }
                    for &(_, j) in row {
                        for &(_, h) in &first[j].0 {
                            if visited.insert(h) {
                                candidates.push((x.sqdist(i, h), h));
                            }
                        }
                    }
                    // the union can still hold fewer than k points on tiny inputs
                    if candidates.len() < k {
                        for h in 0..n {
                            if visited.insert(h) {
                                candidates.push((x.sqdist(i, h), h));
                            }
                        }
                    }
                    top_k(candidates, k)
                },
            )
            .collect()
    }
}

/// One neighbor-of-neighbor round over forward and reverse links. Cheap
/// relative to the forest, and it lifts recall on data whose intrinsic
/// dimension defeats random projections.
fn refine(x: &DataMatrix, rows: &[Vec<(f64, usize)>], k: usize) -> Vec<Vec<(f64, usize)>> {
    let n = rows.len();
    let mut start = vec![0usize; n + 1];
    for &(_, j) in rows.iter().flatten() {
        start[j + 1] += 1;
    }
    for i in 0..n {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut reverse = vec![0usize; start[n]];
    for (i, row) in rows.iter().enumerate() {
        for &(_, j) in row {
            reverse[fill[j]] = i;
            fill[j] += 1;
        }
    }
    (0..n)
        .into_par_iter()
        .map_init(
            || (Visited::new(n), Vec::new()),
            |(visited, candidates), i| {
                visited.next();
                visited.insert(i);
                candidates.clear();
                for &(d2, j) in &rows[i] {
                    visited.insert(j);
                    candidates.push((d2, j));
                }
                let links = rows[i]
                    .iter()
                    .map(|&(_, j)| j)
                    .chain(reverse[start[i]..start[i + 1]].iter().copied());
                for j in links {
                    if visited.insert(j) {
                        candidates.push((x.sqdist(i, j), j));
                    }
                    for &(_, h) in &rows[j] {
                        if visited.insert(h) {
                            candidates.push((x.sqdist(i, h), h));
                        }
                    }
                }
                top_k(candidates, k)
            },
        )
        .collect()
}

fn into_table(rows: Vec<Vec<(f64, usize)>>) -> Result<NeighborTable> {
    NeighborTable::from_rows(
        rows.into_iter()
            .map(|row| row.into_iter().map(|(d2, j)| (j, d2.sqrt())).collect())
            .collect(),
    )
}

/// Exact `k` nearest neighbors by full scan.
pub fn exact_knn(x: &DataMatrix, k: usize) -> Result<NeighborTable> {
    check_k(x.n(), k)?;
    let n = x.n();
    let rows = (0..n)
        .into_par_iter()
        .map_init(Vec::new, |candidates, i| {
            candidates.clear();
            let xi = x.row(i);
            candidates.extend((0..n).filter(|&j| j != i).map(|j| (sqdist(xi, x.row(j)), j)));
            top_k(candidates, k)
        })
        .collect();
    into_table(rows)
}
