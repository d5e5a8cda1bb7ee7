//! Isomap embedding: k-NN graph construction, all-pairs geodesic distances
//! and classical multidimensional scaling of the geodesic distance matrix.
//!
//! The embedding preserves index correspondence with the source cloud:
//! `coords[i]` always belongs to `cloud.points[i]`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use thiserror::Error;

use crate::pointcloud::{Point2, PointCloud2, PointCloud3};

/// Weight assigned to an edge between exactly coincident points so shortest
/// paths never see a zero-weight edge.
const COINCIDENT_EDGE_WEIGHT: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("k must satisfy 1 <= k < n (k={k}, n={n})")]
    BadNeighborCount { k: usize, n: usize },
    #[error(
        "neighbor graph is disconnected ({components} components){}",
        .suggested_k.map(|k| format!("; smallest connecting k is {k}")).unwrap_or_default()
    )]
    Disconnected {
        components: usize,
        suggested_k: Option<usize>,
    },
    #[error("geometry is degenerate: only {found} positive eigenvalues, need {needed}")]
    Degenerate { found: usize, needed: usize },
    #[error("distance matrix is invalid: {0}")]
    BadMatrix(String),
}

/// Weighted undirected k-NN graph. Each undirected edge is stored once with
/// `i < j`; symmetry is structural.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl NeighborGraph {
    /// Adjacency lists with both directions materialized.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, w) in &self.edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        adj
    }

    /// Number of connected components.
    pub fn component_count(&self) -> usize {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &(to, _) in &adj[v] {
                    if !seen[to] {
                        seen[to] = true;
                        stack.push(to);
                    }
                }
            }
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.component_count() == 1
    }
}

/// Symmetric matrix of pairwise distances (Euclidean or geodesic) with a
/// zero diagonal, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j);
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Self { n, values }
    }

    /// Validates symmetry, zero diagonal and finite non-negative entries.
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        for i in 0..self.n {
            if self.get(i, i) != 0.0 {
                return Err(EmbeddingError::BadMatrix(format!("nonzero diagonal at {i}")));
            }
            for j in 0..self.n {
                let d = self.get(i, j);
                if !d.is_finite() || d < 0.0 {
                    return Err(EmbeddingError::BadMatrix(format!(
                        "entry ({i},{j}) = {d} is not finite and non-negative"
                    )));
                }
                if d != self.get(j, i) {
                    return Err(EmbeddingError::BadMatrix(format!("asymmetry at ({i},{j})")));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn euclidean(cloud: &PointCloud2) -> Self {
        Self::from_fn(cloud.len(), |i, j| cloud.points[i].distance(&cloud.points[j]))
    }
}

/// Coordinates of a classical MDS solution together with the residual stress
/// `|| tau(D_in) - tau(D_embedded) ||_F`.
#[derive(Debug, Clone)]
pub struct MdsSolution {
    /// One row per input point, `dim` columns, ordered by decreasing
    /// eigenvalue.
    pub coords: Vec<Vec<f64>>,
    pub stress: f64,
}

/// A 2D embedding of a 3D cloud, index-aligned with its source.
#[derive(Debug, Clone)]
pub struct Embedding2D {
    pub coords: Vec<Point2>,
    pub stress: f64,
}

impl Embedding2D {
    pub fn cloud(&self) -> PointCloud2 {
        PointCloud2::new(self.coords.clone())
    }

    /// CSV dump, one `u,v` line per point in index order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,v\n");
        for p in &self.coords {
            out.push_str(&format!("{},{}\n", p.u, p.v));
        }
        out
    }

    /// Parses the CSV produced by [`Embedding2D::to_csv`]. The stress of the
    /// originating run is not stored in the CSV and comes back as zero.
    pub fn from_csv(text: &str) -> Result<Self, EmbeddingError> {
        let mut coords = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if idx == 0 && line.trim() == "u,v" {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |field: Option<&str>| -> Result<f64, EmbeddingError> {
                field
                    .ok_or_else(|| {
                        EmbeddingError::BadMatrix(format!("line {}: missing field", idx + 1))
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| EmbeddingError::BadMatrix(format!("line {}: {e}", idx + 1)))
            };
            let u = parse(parts.next())?;
            let v = parse(parts.next())?;
            coords.push(Point2::new(u, v));
        }
        Ok(Self { coords, stress: 0.0 })
    }
}

/// Builds the symmetrized k-nearest-neighbor graph. Each vertex contributes
/// edges to its `k` nearest Euclidean neighbors (ties broken by lower index)
/// and the edge set is the union over both directions. Exactly coincident
/// points get a tiny positive edge weight instead of zero.
pub fn knn_graph(cloud: &PointCloud3, k: usize) -> Result<NeighborGraph, EmbeddingError> {
    let n = cloud.len();
    if k == 0 || k >= n {
        return Err(EmbeddingError::BadNeighborCount { k, n });
    }

    let mut edge_set = std::collections::BTreeSet::new();
    for i in 0..n {
        let mut dists: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (cloud.points[i].distance(&cloud.points[j]), j))
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        for &(_, j) in dists.iter().take(k) {
            edge_set.insert((i.min(j), i.max(j)));
        }
    }

    let edges = edge_set
        .into_iter()
        .map(|(i, j)| {
            let d = cloud.points[i].distance(&cloud.points[j]);
            (i, j, if d > 0.0 { d } else { COINCIDENT_EDGE_WEIGHT })
        })
        .collect();
    Ok(NeighborGraph { n, edges })
}

/// All-pairs geodesic distances via a heap Dijkstra from every source.
/// Sources run in parallel; the result is deterministic regardless of
/// schedule. Errors on disconnected graphs, naming the component count.
pub fn shortest_paths(g: &NeighborGraph) -> Result<DistanceMatrix, EmbeddingError> {
    let components = g.component_count();
    if components > 1 {
        return Err(EmbeddingError::Disconnected { components, suggested_k: None });
    }
    let adj = g.adjacency();
    let rows: Vec<Vec<f64>> = (0..g.n)
        .into_par_iter()
        .map(|source| dijkstra(&adj, source))
        .collect();

    let mut values = vec![0.0; g.n * g.n];
    for (i, row) in rows.iter().enumerate() {
        values[i * g.n..(i + 1) * g.n].copy_from_slice(row);
    }
    // Dijkstra is exact, but enforce bitwise symmetry for downstream
    // consumers that assume it.
    for i in 0..g.n {
        for j in (i + 1)..g.n {
            let d = values[i * g.n + j].min(values[j * g.n + i]);
            values[i * g.n + j] = d;
            values[j * g.n + i] = d;
        }
    }
    Ok(DistanceMatrix { n: g.n, values })
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse((ordered(0.0), source)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        let d = f64::from_bits(d);
        for &(to, w) in &adj[v] {
            let cand = d + w;
            if cand < dist[to] {
                dist[to] = cand;
                heap.push(Reverse((ordered(cand), to)));
            }
        }
    }
    dist
}

/// Monotone mapping of a non-negative f64 onto u64 so the heap can order
/// distances. The IEEE 754 bit pattern of non-negative floats sorts like
/// the floats themselves.
#[inline]
fn ordered(d: f64) -> u64 {
    debug_assert!(d >= 0.0);
    d.to_bits()
}

/// Floyd-Warshall all-pairs shortest paths. Cubic in `n`; intended for
/// cross-checks and small graphs (n <= 512).
pub fn floyd_warshall(g: &NeighborGraph) -> Result<DistanceMatrix, EmbeddingError> {
    let components = g.component_count();
    if components > 1 {
        return Err(EmbeddingError::Disconnected { components, suggested_k: None });
    }
    let n = g.n;
    let mut d = vec![f64::INFINITY; n * n];
    for i in 0..n {
        d[i * n + i] = 0.0;
    }
    for &(i, j, w) in &g.edges {
        d[i * n + j] = w;
        d[j * n + i] = w;
    }
    for k in 0..n {
        for i in 0..n {
            let dik = d[i * n + k];
            if !dik.is_finite() {
                continue;
            }
            for j in 0..n {
                let cand = dik + d[k * n + j];
                if cand < d[i * n + j] {
                    d[i * n + j] = cand;
                }
            }
        }
    }
    Ok(DistanceMatrix { n, values: d })
}

/// Classical MDS: double-centers the squared distances
/// (`tau(D) = -1/2 J D^2 J`), eigendecomposes, and places points along the
/// top `dim` eigenpairs scaled by the square roots of their eigenvalues.
///
/// Eigenvector signs follow a fixed convention (first component of
/// meaningful magnitude is positive) so embeddings are reproducible.
pub fn classical_mds(d: &DistanceMatrix, dim: usize) -> Result<MdsSolution, EmbeddingError> {
    d.validate()?;
    let n = d.n;
    if n < dim + 1 {
        return Err(EmbeddingError::Degenerate { found: 0, needed: dim });
    }

    let tau_in = double_center(d);
    let eigen = SymmetricEigen::new(tau_in.clone());

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .expect("finite eigenvalues")
    });

    let scale = eigen.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale.max(1.0);
    let positive = order.iter().filter(|&&i| eigen.eigenvalues[i] > tol).count();
    if positive < dim {
        return Err(EmbeddingError::Degenerate { found: positive, needed: dim });
    }

    let mut coords = vec![vec![0.0; dim]; n];
    for (c, &ei) in order.iter().take(dim).enumerate() {
        let lambda = eigen.eigenvalues[ei];
        let column = eigen.eigenvectors.column(ei);
        let flip = column
            .iter()
            .find(|v| v.abs() > tol.max(1e-12))
            .map_or(1.0, |v| if *v < 0.0 { -1.0 } else { 1.0 });
        let factor = lambda.sqrt() * flip;
        for i in 0..n {
            coords[i][c] = column[i] * factor;
        }
    }

    // Stress per the Isomap cost: L2 discrepancy between the inner-product
    // matrices of the input and embedded distances.
    let d_embedded = DistanceMatrix::from_fn(n, |i, j| {
        coords[i]
            .iter()
            .zip(&coords[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    });
    let tau_out = double_center(&d_embedded);
    let stress = (tau_in - tau_out).norm();

    Ok(MdsSolution { coords, stress })
}

fn double_center(d: &DistanceMatrix) -> DMatrix<f64> {
    let n = d.n;
    let mut sq = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = d.get(i, j);
            sq[(i, j)] = v * v;
        }
    }
    let grand = sq.sum() / (n * n) as f64;
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand);
        }
    }
    b
}

/// Full Isomap: k-NN graph, geodesic distances, classical MDS to 2D.
///
/// On a disconnected graph the error reports the smallest k that would
/// connect the cloud (found by binary search) so the caller can retry.
pub fn isomap(cloud: &PointCloud3, k: usize) -> Result<Embedding2D, EmbeddingError> {
    let graph = knn_graph(cloud, k)?;
    if !graph.is_connected() {
        let components = graph.component_count();
        let suggested_k = smallest_connecting_k(cloud, k);
        return Err(EmbeddingError::Disconnected { components, suggested_k });
    }
    let geodesic = shortest_paths(&graph)?;
    let solution = classical_mds(&geodesic, 2)?;
    let coords = solution
        .coords
        .iter()
        .map(|row| Point2::new(row[0], row[1]))
        .collect();
    Ok(Embedding2D { coords, stress: solution.stress })
}

/// Binary search for the smallest k whose symmetrized k-NN graph is
/// connected. Connectivity is monotone in k, which makes the search valid.
pub fn smallest_connecting_k(cloud: &PointCloud3, from_k: usize) -> Option<usize> {
    let n = cloud.len();
    let (mut lo, mut hi) = (from_k + 1, n.saturating_sub(1));
    if lo > hi {
        return None;
    }
    let connected = |k: usize| knn_graph(cloud, k).map(|g| g.is_connected()).unwrap_or(false);
    if !connected(hi) {
        return None;
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if connected(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::Point3;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn line_cloud() -> PointCloud3 {
        PointCloud3::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
        ])
    }

    /// Exhaustive minimum over all simple paths; exponential, for n <= 8.
    fn brute_force_geodesics(g: &NeighborGraph) -> Vec<Vec<f64>> {
        let adj = g.adjacency();
        let n = g.n;
        let mut best = vec![vec![f64::INFINITY; n]; n];
        for s in 0..n {
            best[s][s] = 0.0;
            let mut visited = vec![false; n];
            visited[s] = true;
            dfs(&adj, s, s, 0.0, &mut visited, &mut best);
        }
        return best;

        fn dfs(
            adj: &[Vec<(usize, f64)>],
            source: usize,
            at: usize,
            cost: f64,
            visited: &mut [bool],
            best: &mut [Vec<f64>],
        ) {
            for &(to, w) in &adj[at] {
                if visited[to] {
                    continue;
                }
                let c = cost + w;
                if c < best[source][to] {
                    best[source][to] = c;
                }
                visited[to] = true;
                dfs(adj, source, to, c, visited, best);
                visited[to] = false;
            }
        }
    }

    #[test]
    fn knn_collinear_points_link_neighbors() {
        let g = knn_graph(&line_cloud(), 1).unwrap();
        let mut pairs: Vec<(usize, usize)> = g.edges.iter().map(|&(i, j, _)| (i, j)).collect();
        pairs.sort();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn knn_complete_graph_when_k_is_n_minus_1() {
        let (cloud, _) = crate::pointcloud::gen_torus(2.0, 1.0, (0.0, 1.0), (0.0, 1.0), 3, 3).unwrap();
        let g = knn_graph(&cloud, cloud.len() - 1).unwrap();
        assert_eq!(g.edges.len(), cloud.len() * (cloud.len() - 1) / 2);
    }

    #[test]
    fn knn_rejects_out_of_range_k() {
        assert!(knn_graph(&line_cloud(), 0).is_err());
        assert!(knn_graph(&line_cloud(), 3).is_err());
    }

    #[test]
    fn knn_coincident_points_get_positive_weight() {
        let cloud = PointCloud3::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
        ]);
        let g = knn_graph(&cloud, 1).unwrap();
        assert!(g.edges.iter().all(|&(_, _, w)| w > 0.0));
    }

    #[test]
    fn path_graph_distance_accumulates() {
        let g = knn_graph(&line_cloud(), 1).unwrap();
        let d = shortest_paths(&g).unwrap();
        assert_abs_diff_eq!(d.get(0, 2), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn complete_graph_geodesics_are_euclidean() {
        let (cloud, _) = crate::pointcloud::gen_torus(2.0, 1.0, (0.0, 1.2), (0.0, 0.9), 3, 3).unwrap();
        let g = knn_graph(&cloud, cloud.len() - 1).unwrap();
        let d = shortest_paths(&g).unwrap();
        for i in 0..cloud.len() {
            for j in 0..cloud.len() {
                assert_abs_diff_eq!(
                    d.get(i, j),
                    cloud.points[i].distance(&cloud.points[j]),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn disconnected_graph_reports_components() {
        let g = NeighborGraph { n: 4, edges: vec![(0, 1, 1.0), (2, 3, 1.0)] };
        match shortest_paths(&g) {
            Err(EmbeddingError::Disconnected { components, .. }) => assert_eq!(components, 2),
            other => panic!("expected disconnect error, got {other:?}"),
        }
    }

    #[test]
    fn dijkstra_matches_brute_force_and_floyd_warshall() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.random_range(2..=6usize);
            // Random connected graph: a random spanning path plus extras.
            let mut edges = Vec::new();
            for i in 1..n {
                edges.push((i - 1, i, rng.random_range(0.1..2.0)));
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random_bool(0.4) && !edges.iter().any(|&(a, b, _)| (a, b) == (i, j)) {
                        edges.push((i, j, rng.random_range(0.1..2.0)));
                    }
                }
            }
            let g = NeighborGraph { n, edges };
            let d = shortest_paths(&g).unwrap();
            let fw = floyd_warshall(&g).unwrap();
            let brute = brute_force_geodesics(&g);
            for i in 0..n {
                for j in 0..n {
                    assert_abs_diff_eq!(d.get(i, j), brute[i][j], epsilon = 1e-12);
                    assert_abs_diff_eq!(fw.get(i, j), brute[i][j], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn geodesics_satisfy_triangle_inequality() {
        let (cloud, _) = crate::pointcloud::gen_torus(2.0, 1.0, (0.0, PI), (0.0, PI), 6, 6).unwrap();
        let g = knn_graph(&cloud, 5).unwrap();
        let d = shortest_paths(&g).unwrap();
        for i in 0..d.n {
            for j in 0..d.n {
                for k in 0..d.n {
                    assert!(d.get(i, j) <= d.get(i, k) + d.get(k, j) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn monotone_k_never_increases_geodesics() {
        let (cloud, _) = crate::pointcloud::gen_torus(2.0, 1.0, (0.0, PI), (0.0, PI), 5, 5).unwrap();
        let d4 = shortest_paths(&knn_graph(&cloud, 4).unwrap()).unwrap();
        let d8 = shortest_paths(&knn_graph(&cloud, 8).unwrap()).unwrap();
        for i in 0..d4.n {
            for j in 0..d4.n {
                assert!(d8.get(i, j) <= d4.get(i, j) + 1e-12);
            }
        }
    }

    #[test]
    fn mds_recovers_planar_configuration() {
        // Points in a tilted plane: exact Euclidean D embeds at ~zero stress.
        let pts2: Vec<(f64, f64)> = vec![
            (0.0, 0.0),
            (1.0, 0.2),
            (2.0, -0.4),
            (0.3, 1.7),
            (-1.2, 0.8),
            (0.9, -1.1),
        ];
        let d = DistanceMatrix::from_fn(pts2.len(), |i, j| {
            let (du, dv) = (pts2[i].0 - pts2[j].0, pts2[i].1 - pts2[j].1);
            (du * du + dv * dv).sqrt()
        });
        let sol = classical_mds(&d, 2).unwrap();
        assert!(sol.stress < 1e-8, "stress {}", sol.stress);
        for i in 0..pts2.len() {
            for j in 0..pts2.len() {
                let emb = dist2(&sol.coords[i], &sol.coords[j]);
                assert_abs_diff_eq!(emb, d.get(i, j), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn mds_equilateral_triangle_preserves_side_lengths() {
        let d = DistanceMatrix::from_fn(3, |_, _| 1.0);
        let sol = classical_mds(&d, 2).unwrap();
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert_abs_diff_eq!(dist2(&sol.coords[i], &sol.coords[j]), 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn mds_rejects_degenerate_geometry() {
        // Collinear points have a rank-1 Gram matrix.
        let d = DistanceMatrix::from_fn(3, |i, j| (i as f64 - j as f64).abs());
        match classical_mds(&d, 2) {
            Err(EmbeddingError::Degenerate { found, needed }) => {
                assert_eq!((found, needed), (1, 2));
            }
            other => panic!("expected degenerate error, got {other:?}"),
        }
    }

    #[test]
    fn mds_is_deterministic() {
        let pts2: Vec<(f64, f64)> = (0..12)
            .map(|i| ((i as f64 * 0.7).sin() * 2.0, (i as f64 * 1.3).cos()))
            .collect();
        let d = DistanceMatrix::from_fn(pts2.len(), |i, j| {
            let (du, dv) = (pts2[i].0 - pts2[j].0, pts2[i].1 - pts2[j].1);
            (du * du + dv * dv).sqrt()
        });
        let a = classical_mds(&d, 2).unwrap();
        let b = classical_mds(&d, 2).unwrap();
        assert_eq!(a.coords, b.coords);
    }

    #[test]
    fn isomap_flat_grid_has_near_zero_stress() {
        // With every direct edge present the geodesics equal the Euclidean
        // distances, so planar data is its own 2D embedding.
        let mut pts = Vec::new();
        for i in 0..4 {
            for j in 0..3 {
                pts.push(Point3::new(i as f64, j as f64, 0.0));
            }
        }
        let n = pts.len();
        let emb = isomap(&PointCloud3::new(pts), n - 1).unwrap();
        assert!(emb.stress < 1e-8, "stress {}", emb.stress);
        assert_eq!(emb.coords.len(), n);
    }

    #[test]
    fn isomap_sparse_flat_grid_stays_near_planar() {
        // A 4-connected grid has Manhattan geodesics, so the stress is not
        // zero, but the embedding must still be close to the plane layout.
        let mut pts = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                pts.push(Point3::new(i as f64, j as f64, 0.0));
            }
        }
        let emb = isomap(&PointCloud3::new(pts), 4).unwrap();
        assert_eq!(emb.coords.len(), 36);
        // Manhattan geodesics inflate the grid diagonal from sqrt(50)~7.07
        // toward 10, so distortion up to ~3 units is inherent; beyond that
        // would mean the embedding lost the layout.
        let d_emb = DistanceMatrix::euclidean(&emb.cloud());
        let mut worst = 0.0_f64;
        for i in 0..36 {
            for j in 0..36 {
                let (xi, yi) = ((i / 6) as f64, (i % 6) as f64);
                let (xj, yj) = ((j / 6) as f64, (j % 6) as f64);
                let true_d = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
                worst = worst.max((d_emb.get(i, j) - true_d).abs());
            }
        }
        assert!(worst < 3.0, "worst pairwise distortion {worst}");
    }

    #[test]
    fn isomap_unrolls_curled_strip_to_arc_length() {
        // Half-cylinder strip: chord between the rims is 2, arc length is pi.
        // The embedding's long axis must recover the arc, not the chord.
        let mut pts = Vec::new();
        let (nt, nz) = (40, 5);
        for i in 0..nt {
            let t = PI * i as f64 / (nt - 1) as f64;
            for j in 0..nz {
                let z = 0.5 * j as f64 / (nz - 1) as f64;
                pts.push(Point3::new(t.cos(), t.sin(), z));
            }
        }
        let emb = isomap(&PointCloud3::new(pts), 6).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &emb.coords {
            lo = lo.min(p.u);
            hi = hi.max(p.u);
        }
        let extent = hi - lo;
        assert!(
            (extent - PI).abs() < 0.05 * PI,
            "u-extent {extent} should match arc length {PI}"
        );
    }

    #[test]
    fn isomap_disconnect_suggests_connecting_k() {
        // Two clusters far apart: k=1 cannot connect them.
        let mut pts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.1, 0.0, 0.0),
            Point3::new(0.0, 0.1, 0.0),
        ];
        pts.extend([
            Point3::new(10.0, 0.0, 0.0),
            Point3::new(10.1, 0.0, 0.0),
            Point3::new(10.0, 0.1, 0.0),
        ]);
        match isomap(&PointCloud3::new(pts), 1) {
            Err(EmbeddingError::Disconnected { components, suggested_k }) => {
                assert_eq!(components, 2);
                let k = suggested_k.expect("a connecting k exists");
                assert!((3..=5).contains(&k), "suggested k {k}");
            }
            other => panic!("expected disconnect, got {other:?}"),
        }
    }

    fn dist2(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        /// MDS self-consistency: a distance matrix generated from any 2D
        /// configuration is reproduced entrywise by its own embedding.
        #[test]
        fn mds_self_consistency(
            pts in proptest::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 4..30)
        ) {
            let d = DistanceMatrix::from_fn(pts.len(), |i, j| {
                let (du, dv) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
                (du * du + dv * dv).sqrt()
            });
            if let Ok(sol) = classical_mds(&d, 2) {
                let scale = 1.0 + d.values.iter().fold(0.0_f64, |m, v| m.max(*v));
                for i in 0..pts.len() {
                    for j in 0..pts.len() {
                        let emb = dist2(&sol.coords[i], &sol.coords[j]);
                        prop_assert!((emb - d.get(i, j)).abs() < 1e-8 * scale);
                    }
                }
            }
            // Degenerate (collinear) random draws may legitimately error.
        }
    }
}
