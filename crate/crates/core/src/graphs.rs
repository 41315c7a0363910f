//! Weighted undirected graphs over signal components and their
//! combinatorial Laplacians.
//!
//! Three constructions are provided:
//!
//! * [`build_grid_graph`]: 4-neighbour pixel lattice with unit weights.
//! * [`build_semi_geometric_graph`]: the same lattice support, weighted by
//!   the absolute sample covariance of neighbouring pixels across frames.
//! * [`build_correlation_graph`]: keeps the top fraction of node pairs by
//!   absolute Pearson correlation.
//!
//! Node `(r, c)` of an `h x w` lattice has index `r * w + c`.

use crate::error::{Error, Result};
use crate::linalg::{LinalgError, Matrix};

/// Undirected graph with nonnegative weights, no self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Matrix,
}

impl Graph {
    /// Validates `w`: square, symmetric (exactly), zero diagonal, weights >= 0.
    pub fn from_adjacency(w: Matrix) -> Result<Self> {
        if !w.is_square() {
            return Err(LinalgError::NotSquare {
                rows: w.rows(),
                cols: w.cols(),
            }
            .into());
        }
        let n = w.rows();
        for i in 0..n {
            if w[(i, i)] != 0.0 {
                return Err(Error::Config(format!("self-loop at node {i}")));
            }
            for j in 0..n {
                let v = w[(i, j)];
                if v < 0.0 {
                    return Err(Error::Config(format!("negative weight {v} on ({i}, {j})")));
                }
                if v != w[(j, i)] {
                    return Err(LinalgError::NotSymmetric {
                        max_asymmetry: (v - w[(j, i)]).abs(),
                    }
                    .into());
                }
            }
        }
        Ok(Self { adjacency: w })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[(i, j)]
    }

    /// `d_i = Σ_j W_ij`.
    pub fn degrees(&self) -> Vec<f64> {
        (0..self.node_count())
            .map(|i| self.adjacency.row(i).iter().sum())
            .collect()
    }

    /// Pairs `i < j` with nonzero weight, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.node_count();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.adjacency[(i, j)];
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }
}

/// Index pairs `(i, j)`, `i < j`, of the 4-neighbour lattice: each node
/// links right and down.
pub fn grid_edges(h: usize, w: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(2 * h * w);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if c + 1 < w {
                edges.push((i, i + 1));
            }
            if r + 1 < h {
                edges.push((i, i + w));
            }
        }
    }
    edges
}

fn check_grid_dims(h: usize, w: usize) -> Result<()> {
    if h == 0 {
        return Err(Error::ZeroDimension { what: "grid height" });
    }
    if w == 0 {
        return Err(Error::ZeroDimension { what: "grid width" });
    }
    Ok(())
}

pub fn build_grid_graph(h: usize, w: usize) -> Result<Graph> {
    check_grid_dims(h, w)?;
    let n = h * w;
    let mut adj = Matrix::zeros(n, n);
    for (i, j) in grid_edges(h, w) {
        adj[(i, j)] = 1.0;
        adj[(j, i)] = 1.0;
    }
    Ok(Graph { adjacency: adj })
}

/// Grid-support graph weighted by `|cov(x_i, x_j)|` over the supplied
/// frames (unbiased, divisor `N - 1`).
///
/// Frames are consumed in a single streaming pass, so a pooled training set
/// never has to be materialized as one matrix.
pub fn build_semi_geometric_graph<'a, I>(frames: I, h: usize, w: usize) -> Result<Graph>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    check_grid_dims(h, w)?;
    let n = h * w;
    let edges = grid_edges(h, w);

    // Online co-moments (Welford): after k frames, comoment[e] / (k - 1) is
    // the sample covariance of the edge's endpoints.
    let mut mean = vec![0.0; n];
    let mut delta = vec![0.0; n];
    let mut comoment = vec![0.0; edges.len()];
    let mut count = 0usize;
    for frame in frames {
        if frame.len() != n {
            return Err(Error::LengthMismatch {
                what: "frame",
                expected: n,
                got: frame.len(),
            });
        }
        count += 1;
        let k = count as f64;
        for ((mu, d), &x) in mean.iter_mut().zip(delta.iter_mut()).zip(frame) {
            *d = x - *mu;
            *mu += *d / k;
        }
        for (cm, &(i, j)) in comoment.iter_mut().zip(&edges) {
            *cm += delta[i] * (frame[j] - mean[j]);
        }
    }
    if count < 2 {
        return Err(Error::TooFewFrames { need: 2, got: count });
    }

    let denom = (count - 1) as f64;
    let mut adj = Matrix::zeros(n, n);
    for (&(i, j), cm) in edges.iter().zip(&comoment) {
        let weight = (cm / denom).abs();
        adj[(i, j)] = weight;
        adj[(j, i)] = weight;
    }
    Ok(Graph { adjacency: adj })
}

/// Number of pairs kept out of `pairs` for a given fraction. A slack of
/// 1e-9 keeps products like `0.05 * 100` from rounding up to 6.
pub fn kept_pair_count(keep_fraction: f64, pairs: usize) -> usize {
    ((keep_fraction * pairs as f64 - 1e-9).ceil().max(0.0) as usize).min(pairs)
}

/// Pearson correlation of every column pair of a `T x n` series matrix,
/// returned as a symmetric `n x n` matrix with unit diagonal.
pub fn correlation_matrix(series: &Matrix) -> Result<Matrix> {
    let (t, n) = series.shape();
    if t < 2 {
        return Err(Error::TooFewFrames { need: 2, got: t });
    }
    let mut centered = series.transpose();
    let mut norms = vec![0.0; n];
    for (node, norm) in norms.iter_mut().enumerate() {
        let row = centered.row_mut(node);
        let mean = row.iter().sum::<f64>() / t as f64;
        row.iter_mut().for_each(|v| *v -= mean);
        *norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if *norm == 0.0 {
            return Err(Error::ZeroVariance { node });
        }
    }
    let mut corr = Matrix::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = crate::linalg::dot(centered.row(i), centered.row(j)) / (norms[i] * norms[j]);
            let r = r.clamp(-1.0, 1.0);
            corr[(i, j)] = r;
            corr[(j, i)] = r;
        }
    }
    Ok(corr)
}

/// Keeps the `⌈keep_fraction · n(n-1)/2⌉` node pairs with the largest
/// `|corr|` as edges weighted by `|corr|`. Ties go to the lexicographically
/// smaller pair.
pub fn build_correlation_graph(series: &Matrix, keep_fraction: f64) -> Result<Graph> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::OutOfRange {
            name: "keep_fraction",
            range: "(0, 1]",
            value: keep_fraction,
        });
    }
    let corr = correlation_matrix(series)?;
    let n = corr.rows();
    let mut pairs: Vec<(usize, usize, f64)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j, corr[(i, j)].abs()));
        }
    }
    // Stable sort keeps lexicographic order among equal magnitudes.
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2));
    let keep = kept_pair_count(keep_fraction, pairs.len());

    let mut adj = Matrix::zeros(n, n);
    for &(i, j, w) in &pairs[..keep] {
        adj[(i, j)] = w;
        adj[(j, i)] = w;
    }
    Ok(Graph { adjacency: adj })
}

/// Combinatorial Laplacian `L = D - W`.
pub fn laplacian(g: &Graph) -> Matrix {
    let n = g.node_count();
    let degrees = g.degrees();
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            degrees[i]
        } else {
            -g.adjacency[(i, j)]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig;
    use crate::rng::Rng;

    #[test]
    fn grid_single_node() {
        let g = build_grid_graph(1, 1).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn grid_two_by_two() {
        let g = build_grid_graph(2, 2).unwrap();
        assert_eq!(g.edge_count(), 4);
        assert!(g.edges().iter().all(|e| e.2 == 1.0));
        assert_eq!(g.degrees(), vec![2.0; 4]);
    }

    #[test]
    fn grid_three_by_three() {
        let g = build_grid_graph(3, 3).unwrap();
        assert_eq!(g.edge_count(), 12);
        let d = g.degrees();
        assert_eq!(d[4], 4.0);
        assert_eq!(d[0], 2.0);
        assert_eq!(d[8], 2.0);
        assert_eq!(d[1], 3.0);
    }

    #[test]
    fn grid_edge_count_formula_and_indexing() {
        for (h, w) in [(1, 5), (4, 1), (3, 7), (6, 6)] {
            let g = build_grid_graph(h, w).unwrap();
            assert_eq!(g.edge_count(), 2 * h * w - h - w);
        }
        let g = build_grid_graph(3, 4).unwrap();
        // (1,2) -> 6 neighbours (0,2)=2, (2,2)=10, (1,1)=5, (1,3)=7
        for j in [2, 10, 5, 7] {
            assert_eq!(g.weight(6, j), 1.0);
        }
        assert_eq!(g.weight(6, 11), 0.0);
    }

    #[test]
    fn grid_rejects_zero_dims() {
        assert!(matches!(build_grid_graph(0, 3), Err(Error::ZeroDimension { .. })));
        assert!(matches!(build_grid_graph(3, 0), Err(Error::ZeroDimension { .. })));
    }

    #[test]
    fn semi_geometric_constant_frames_give_zero_weights() {
        let frames = [vec![0.5; 6], vec![0.5; 6], vec![0.5; 6]];
        let g = build_semi_geometric_graph(frames.iter().map(|f| f.as_slice()), 2, 3).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn semi_geometric_equal_series() {
        // x = [1, 3, 2, 6] has sample variance 14/3
        let xs = [1.0, 3.0, 2.0, 6.0];
        let frames: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x, x]).collect();
        let g = build_semi_geometric_graph(frames.iter().map(|f| f.as_slice()), 2, 1).unwrap();
        assert!((g.weight(0, 1) - 14.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn semi_geometric_negated_series_uses_absolute_value() {
        let xs = [1.0, 3.0, 2.0, 6.0];
        let frames: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x, -x]).collect();
        let g = build_semi_geometric_graph(frames.iter().map(|f| f.as_slice()), 2, 1).unwrap();
        assert!((g.weight(0, 1) - 14.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn semi_geometric_matches_two_pass_covariance() {
        let mut rng = Rng::new(1);
        let (h, w, t) = (3, 4, 25);
        let frames: Vec<Vec<f64>> = (0..t)
            .map(|_| (0..h * w).map(|_| rng.uniform(-1.0, 1.0) + 3.0).collect())
            .collect();
        let g = build_semi_geometric_graph(frames.iter().map(|f| f.as_slice()), h, w).unwrap();
        let mean: Vec<f64> = (0..h * w)
            .map(|i| frames.iter().map(|f| f[i]).sum::<f64>() / t as f64)
            .collect();
        for (i, j) in grid_edges(h, w) {
            let cov = frames
                .iter()
                .map(|f| (f[i] - mean[i]) * (f[j] - mean[j]))
                .sum::<f64>()
                / (t - 1) as f64;
            assert!((g.weight(i, j) - cov.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn semi_geometric_errors() {
        let one = [vec![0.0; 4]];
        assert!(matches!(
            build_semi_geometric_graph(one.iter().map(|f| f.as_slice()), 2, 2),
            Err(Error::TooFewFrames { .. })
        ));
        let bad = [vec![0.0; 4], vec![0.0; 3]];
        assert!(matches!(
            build_semi_geometric_graph(bad.iter().map(|f| f.as_slice()), 2, 2),
            Err(Error::LengthMismatch { .. })
        ));
    }

    fn random_series(rng: &mut Rng, t: usize, n: usize) -> Matrix {
        Matrix::from_fn(t, n, |_, _| rng.normal())
    }

    #[test]
    fn correlation_full_fraction_is_complete() {
        let mut rng = Rng::new(2);
        let g = build_correlation_graph(&random_series(&mut rng, 30, 6), 1.0).unwrap();
        assert_eq!(g.edge_count(), 15);
    }

    #[test]
    fn correlation_identical_pair_always_kept() {
        let mut rng = Rng::new(3);
        let mut s = random_series(&mut rng, 40, 8);
        for t in 0..40 {
            s[(t, 1)] = s[(t, 0)];
        }
        let g = build_correlation_graph(&s, 0.01).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!((g.weight(0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_third_keeps_brute_force_best_pair() {
        let mut rng = Rng::new(4);
        let s = random_series(&mut rng, 12, 3);
        // brute force: Pearson from scratch for all three pairs
        let col = |k: usize| -> Vec<f64> { (0..12).map(|t| s[(t, k)]).collect() };
        let pearson = |a: &[f64], b: &[f64]| {
            let ma = a.iter().sum::<f64>() / a.len() as f64;
            let mb = b.iter().sum::<f64>() / b.len() as f64;
            let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
            let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
            let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
            cov / (va * vb).sqrt()
        };
        let pairs = [(0, 1), (0, 2), (1, 2)];
        let best = pairs
            .iter()
            .copied()
            .max_by(|&(a, b), &(c, d)| {
                pearson(&col(a), &col(b)).abs().total_cmp(&pearson(&col(c), &col(d)).abs())
            })
            .unwrap();
        let g = build_correlation_graph(&s, 1.0 / 3.0).unwrap();
        let edges = g.edges();
        assert_eq!(edges.len(), 1);
        assert_eq!((edges[0].0, edges[0].1), best);
        assert!((edges[0].2 - pearson(&col(best.0), &col(best.1)).abs()).abs() < 1e-12);
    }

    #[test]
    fn correlation_ties_break_lexicographically() {
        // every pair perfectly (anti)correlated
        let s = Matrix::from_fn(5, 4, |t, k| if k % 2 == 0 { t as f64 } else { -(t as f64) });
        let g = build_correlation_graph(&s, 0.5).unwrap();
        let kept: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.0, e.1)).collect();
        assert_eq!(kept, vec![(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn correlation_errors() {
        let mut s = Matrix::from_fn(5, 3, |t, k| (t * (k + 1)) as f64);
        for t in 0..5 {
            s[(t, 2)] = 1.0;
        }
        assert!(matches!(build_correlation_graph(&s, 0.5), Err(Error::ZeroVariance { node: 2 })));
        let ok = Matrix::from_fn(5, 3, |t, k| ((t + 1) * (k + 2) % 7) as f64);
        assert!(build_correlation_graph(&ok, 0.0).is_err());
        assert!(build_correlation_graph(&ok, 1.5).is_err());
        assert!(matches!(
            build_correlation_graph(&Matrix::zeros(1, 3), 0.5),
            Err(Error::TooFewFrames { .. })
        ));
    }

    #[test]
    fn kept_pair_count_rounding() {
        assert_eq!(kept_pair_count(0.05, 100), 5);
        assert_eq!(kept_pair_count(0.05, 101), 6);
        assert_eq!(kept_pair_count(1.0 / 3.0, 3), 1);
        assert_eq!(kept_pair_count(1.0, 0), 0);
    }

    #[test]
    fn laplacian_examples() {
        let p2 = build_grid_graph(1, 2).unwrap();
        assert_eq!(laplacian(&p2), Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]));
        let w = 2.5;
        let g = Graph::from_adjacency(Matrix::from_rows(&[[0.0, w], [w, 0.0]])).unwrap();
        assert_eq!(laplacian(&g), Matrix::from_rows(&[[w, -w], [-w, w]]));
    }

    #[test]
    fn from_adjacency_validates() {
        assert!(Graph::from_adjacency(Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]])).is_err());
        assert!(Graph::from_adjacency(Matrix::from_rows(&[[0.0, -1.0], [-1.0, 0.0]])).is_err());
        assert!(Graph::from_adjacency(Matrix::from_rows(&[[0.0, 1.0], [2.0, 0.0]])).is_err());
        assert!(Graph::from_adjacency(Matrix::zeros(2, 3)).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use crate::rng::Rng;

        fn random_graph(seed: u64, n: usize) -> Graph {
            let mut rng = Rng::new(seed);
            let mut adj = Matrix::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.next_f64() < 0.5 {
                        let w = rng.uniform(0.0, 3.0);
                        adj[(i, j)] = w;
                        adj[(j, i)] = w;
                    }
                }
            }
            Graph::from_adjacency(adj).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn laplacian_rows_sum_to_zero_and_psd(seed in any::<u64>(), n in 1usize..14) {
                let l = laplacian(&random_graph(seed, n));
                let ones = vec![1.0; n];
                let l1 = l.matvec(&ones).unwrap();
                prop_assert!(l1.iter().all(|v| v.abs() < 1e-10));
                prop_assert_eq!(l.max_asymmetry(), Some(0.0));
                let e = sym_eig(&l).unwrap();
                prop_assert!(e.values[0] >= -1e-10);
            }

            #[test]
            fn semi_geometric_support_within_grid(seed in any::<u64>(), h in 1usize..5, w in 1usize..5) {
                let mut rng = Rng::new(seed);
                let frames: Vec<Vec<f64>> =
                    (0..6).map(|_| (0..h * w).map(|_| rng.normal()).collect()).collect();
                let g = build_semi_geometric_graph(frames.iter().map(|f| f.as_slice()), h, w).unwrap();
                let grid = build_grid_graph(h, w).unwrap();
                for (i, j, _) in g.edges() {
                    prop_assert_eq!(grid.weight(i, j), 1.0);
                }
            }

            #[test]
            fn correlation_edge_count_exact(seed in any::<u64>(), n in 2usize..10, frac in 0.01f64..=1.0) {
                let mut rng = Rng::new(seed);
                let s = random_series(&mut rng, 15, n);
                let g = build_correlation_graph(&s, frac).unwrap();
                let pairs = n * (n - 1) / 2;
                prop_assert_eq!(g.edge_count(), kept_pair_count(frac, pairs));
                prop_assert!(g.edge_count() >= 1);
            }
        }
    }
}
