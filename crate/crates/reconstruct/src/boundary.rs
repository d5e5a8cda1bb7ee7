//! Boundary interpolant selection on the 2D embedding: corners are picked
//! per angular sector by furthest distance from the centroid, consecutive
//! corners are joined by weighted shortest paths, and the resulting ring is
//! stripped from the cloud so deeper rings can be sampled inward.
//!
//! The path weight `w = c1 * d_s + c2 * d_c` trades straight-line hops
//! (`d_s`, distance to the next point) against staying far from the cloud
//! centroid (`d_c`, the candidate point's distance to the centroid).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::pointcloud::{Point2, PointCloud2};

/// Bounding rectangles between adjacent corners are expanded by this
/// fraction of their diagonal so axis-aligned corner pairs still span a
/// usable region.
const REGION_MARGIN: f64 = 0.1;

#[derive(Debug, Error)]
pub enum BoundaryError {
    #[error("cloud is empty")]
    EmptyCloud,
    #[error("path weights must satisfy c1 + c2 > 0 with c1, c2 >= 0")]
    BadWeights,
    #[error("need at least 3 non-empty sectors, found {0}")]
    TooFewSectors(usize),
    #[error("corners {a} and {b} are not connected within their region; try a larger k or margin")]
    RegionDisconnected { a: usize, b: usize },
    #[error("degenerate region between corners {a} and {b} (coincident points)")]
    DegenerateRegion { a: usize, b: usize },
    #[error("invalid corner request: {0}")]
    BadRequest(String),
}

/// Importance weights of the path criterion `w = c1 * d_s + c2 * d_c`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PathWeights {
    pub c1: f64,
    pub c2: f64,
}

impl Default for PathWeights {
    /// Path straightness dominates; the small centroid term discourages
    /// inward shortcuts.
    fn default() -> Self {
        Self { c1: 1.0, c2: 0.05 }
    }
}

impl PathWeights {
    pub fn validate(&self) -> Result<(), BoundaryError> {
        if self.c1 < 0.0 || self.c2 < 0.0 || self.c1 + self.c2 <= 0.0 {
            return Err(BoundaryError::BadWeights);
        }
        Ok(())
    }
}

/// Sector-winning point indices, ordered counterclockwise by angle around
/// the centroid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CornerSet {
    pub indices: Vec<usize>,
}

/// One closed boundary loop of point indices at a given depth (1 = outermost).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryRing {
    pub depth: usize,
    pub indices: Vec<usize>,
}

/// Result of multi-depth sampling. `exhausted` flags that the cloud ran out
/// of usable points before the requested depth was reached; the rings
/// gathered so far are still returned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingSample {
    pub rings: Vec<BoundaryRing>,
    pub exhausted: bool,
}

impl RingSample {
    /// All sampled indices across depths, in ring order.
    pub fn all_indices(&self) -> Vec<usize> {
        self.rings.iter().flat_map(|r| r.indices.iter().copied()).collect()
    }

    /// CSV dump: `depth,index` per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("depth,index\n");
        for ring in &self.rings {
            for idx in &ring.indices {
                out.push_str(&format!("{},{}\n", ring.depth, idx));
            }
        }
        out
    }

    /// Parses the CSV produced by [`RingSample::to_csv`]. The exhausted flag
    /// is not stored in the CSV and comes back as false.
    pub fn from_csv(text: &str) -> Result<Self, BoundaryError> {
        let mut rings: Vec<BoundaryRing> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (ln == 0 && line == "depth,index") {
                continue;
            }
            let mut parts = line.split(',');
            let mut field = |name: &str| -> Result<usize, BoundaryError> {
                parts
                    .next()
                    .ok_or_else(|| {
                        BoundaryError::BadRequest(format!("line {}: missing {name}", ln + 1))
                    })?
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| BoundaryError::BadRequest(format!("line {}: {e}", ln + 1)))
            };
            let depth = field("depth")?;
            let index = field("index")?;
            match rings.last_mut() {
                Some(r) if r.depth == depth => r.indices.push(index),
                _ => rings.push(BoundaryRing { depth, indices: vec![index] }),
            }
        }
        Ok(Self { rings, exhausted: false })
    }
}

/// Arithmetic mean of the cloud.
pub fn centroid(cloud: &PointCloud2) -> Point2 {
    assert!(!cloud.is_empty(), "centroid of an empty cloud");
    let n = cloud.len() as f64;
    let (su, sv) = cloud
        .points
        .iter()
        .fold((0.0, 0.0), |(su, sv), p| (su + p.u, sv + p.v));
    Point2::new(su / n, sv / n)
}

/// Splits the plane around the centroid into `m` equal angular sectors
/// starting at angle 0 and picks the furthest point from the centroid in
/// each non-empty sector. Empty sectors are skipped; duplicate winners
/// (possible with coincident points) keep the first by angle.
pub fn select_corners(cloud: &PointCloud2, m: usize) -> Result<CornerSet, BoundaryError> {
    if cloud.is_empty() {
        return Err(BoundaryError::EmptyCloud);
    }
    if m < 3 {
        return Err(BoundaryError::BadRequest(format!("need at least 3 sectors, got {m}")));
    }
    let center = centroid(cloud);
    let sector_width = std::f64::consts::TAU / m as f64;

    // (radius, index) winner per sector.
    let mut winners: Vec<Option<(f64, usize)>> = vec![None; m];
    for (idx, p) in cloud.points.iter().enumerate() {
        let (du, dv) = (p.u - center.u, p.v - center.v);
        if du == 0.0 && dv == 0.0 {
            continue; // coincident with the centroid: no angle
        }
        let radius = (du * du + dv * dv).sqrt();
        let mut angle = dv.atan2(du);
        if angle < 0.0 {
            angle += std::f64::consts::TAU;
        }
        let sector = ((angle / sector_width) as usize).min(m - 1);
        let better = match winners[sector] {
            None => true,
            Some((r, i)) => radius > r || (radius == r && idx < i),
        };
        if better {
            winners[sector] = Some((radius, idx));
        }
    }

    let mut indices = Vec::new();
    for winner in winners.iter().flatten() {
        if !indices.contains(&winner.1) {
            indices.push(winner.1);
        }
    }
    if indices.len() < 3 {
        return Err(BoundaryError::TooFewSectors(indices.len()));
    }
    Ok(CornerSet { indices })
}

/// Minimum-cost path between two corners through the points inside their
/// expanded bounding rectangle. Edges follow a k-NN graph over the region;
/// stepping onto point `q` from `p` costs `c1 * |p - q| + c2 * |q - centroid|`
/// where the centroid is the whole cloud's.
pub fn corner_path(
    cloud: &PointCloud2,
    a: usize,
    b: usize,
    weights: &PathWeights,
    k: usize,
) -> Result<Vec<usize>, BoundaryError> {
    weights.validate()?;
    if a == b || a >= cloud.len() || b >= cloud.len() {
        return Err(BoundaryError::BadRequest(format!(
            "corner pair ({a}, {b}) invalid for cloud of {} points",
            cloud.len()
        )));
    }
    let center = centroid(cloud);
    let pa = cloud.points[a];
    let pb = cloud.points[b];

    // Region: bounding rectangle of the two corners, expanded by a margin
    // proportional to its diagonal.
    let (mut lo_u, mut hi_u) = (pa.u.min(pb.u), pa.u.max(pb.u));
    let (mut lo_v, mut hi_v) = (pa.v.min(pb.v), pa.v.max(pb.v));
    let diag = ((hi_u - lo_u).powi(2) + (hi_v - lo_v).powi(2)).sqrt();
    if diag == 0.0 {
        return Err(BoundaryError::DegenerateRegion { a, b });
    }
    let margin = REGION_MARGIN * diag;
    lo_u -= margin;
    hi_u += margin;
    lo_v -= margin;
    hi_v += margin;

    let region: Vec<usize> = (0..cloud.len())
        .filter(|&i| {
            let p = cloud.points[i];
            p.u >= lo_u && p.u <= hi_u && p.v >= lo_v && p.v <= hi_v
        })
        .collect();
    // Corners are inside their own rectangle by construction.
    let local_a = region.iter().position(|&i| i == a).expect("corner a in region");
    let local_b = region.iter().position(|&i| i == b).expect("corner b in region");

    // Symmetrized k-NN adjacency over region points (local indices).
    let n = region.len();
    let k_eff = k.min(n - 1).max(1);
    let mut neighbor_sets: Vec<std::collections::BTreeSet<usize>> = vec![Default::default(); n];
    for i in 0..n {
        let mut dists: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (cloud.points[region[i]].distance(&cloud.points[region[j]]), j))
            .collect();
        dists.sort_by(|x, y| x.partial_cmp(y).expect("finite distances"));
        for &(_, j) in dists.iter().take(k_eff) {
            neighbor_sets[i].insert(j);
            neighbor_sets[j].insert(i);
        }
    }

    // Dijkstra with direction-dependent edge costs.
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[local_a] = 0.0;
    heap.push(Reverse((0_u64, local_a)));
    while let Some(Reverse((dbits, at))) = heap.pop() {
        if done[at] {
            continue;
        }
        done[at] = true;
        if at == local_b {
            break;
        }
        let d = f64::from_bits(dbits);
        for &to in &neighbor_sets[at] {
            let p = cloud.points[region[at]];
            let q = cloud.points[region[to]];
            let step = weights.c1 * p.distance(&q) + weights.c2 * q.distance(&center);
            let cand = d + step;
            if cand < dist[to] {
                dist[to] = cand;
                prev[to] = at;
                heap.push(Reverse((cand.to_bits(), to)));
            }
        }
    }

    if !dist[local_b].is_finite() {
        return Err(BoundaryError::RegionDisconnected { a, b });
    }
    let mut path = vec![local_b];
    while *path.last().unwrap() != local_a {
        path.push(prev[*path.last().unwrap()]);
    }
    path.reverse();
    Ok(path.into_iter().map(|i| region[i]).collect())
}

/// Multi-depth boundary sampling. For each depth the corners of the
/// remaining cloud are selected, consecutive corners (wrapping) are joined
/// with [`corner_path`], the paths are concatenated into a closed ring
/// (shared endpoints kept once), and the ring's points are stripped before
/// the next depth. Indices refer to the original cloud.
///
/// If a deeper pass cannot be completed (the cloud ran out of points, lost
/// its sector coverage, or a corner region became disconnected) the rings
/// gathered so far are returned with `exhausted` set. Failing to build even
/// the first ring is an error.
pub fn sample_rings(
    cloud: &PointCloud2,
    depth: usize,
    m: usize,
    weights: &PathWeights,
    k: usize,
) -> Result<RingSample, BoundaryError> {
    weights.validate()?;
    if depth == 0 {
        return Err(BoundaryError::BadRequest("depth must be >= 1".into()));
    }
    let mut remaining: Vec<usize> = (0..cloud.len()).collect();
    let mut rings: Vec<BoundaryRing> = Vec::new();
    let mut exhausted = false;

    'depths: for d in 1..=depth {
        if remaining.len() < 3 {
            exhausted = true;
            break;
        }
        let sub = PointCloud2::new(remaining.iter().map(|&i| cloud.points[i]).collect());
        let corners = match select_corners(&sub, m) {
            Ok(c) => c,
            Err(BoundaryError::TooFewSectors(_)) => {
                exhausted = true;
                break;
            }
            Err(e) => return Err(e),
        };

        let mut ring_local: Vec<usize> = Vec::new();
        let n_corners = corners.indices.len();
        for ci in 0..n_corners {
            let a = corners.indices[ci];
            let b = corners.indices[(ci + 1) % n_corners];
            let segment = match corner_path(&sub, a, b, weights, k) {
                Ok(s) => s,
                Err(
                    BoundaryError::RegionDisconnected { .. } | BoundaryError::DegenerateRegion { .. },
                ) if !rings.is_empty() => {
                    exhausted = true;
                    break 'depths;
                }
                Err(e) => return Err(e),
            };
            // Shared endpoints appear once; drop the leading corner of every
            // segment after the first, and the closing corner of the last.
            let start = if ci == 0 { 0 } else { 1 };
            let end = if ci == n_corners - 1 { segment.len() - 1 } else { segment.len() };
            for &idx in &segment[start..end.max(start)] {
                if !ring_local.contains(&idx) {
                    ring_local.push(idx);
                }
            }
        }

        if ring_local.len() < 3 {
            exhausted = true;
            break;
        }

        let ring_original: Vec<usize> = ring_local.iter().map(|&i| remaining[i]).collect();
        let strip: std::collections::BTreeSet<usize> = ring_local.iter().copied().collect();
        remaining = remaining
            .iter()
            .enumerate()
            .filter(|(local, _)| !strip.contains(local))
            .map(|(_, &orig)| orig)
            .collect();
        rings.push(BoundaryRing { depth: d, indices: ring_original });
    }

    if rings.is_empty() {
        return Err(BoundaryError::TooFewSectors(0));
    }
    Ok(RingSample { rings, exhausted })
}

/// Comparison baseline reproducing prior work: four corners picked at the
/// principal-axis extremes and joined by single-depth pure-distance paths.
/// Kept only for benchmarking against [`sample_rings`]; it chases the
/// one-point-deep outline and is noticeably noise-sensitive.
pub fn baseline_polyline_ring(
    cloud: &PointCloud2,
    k: usize,
) -> Result<Vec<usize>, BoundaryError> {
    if cloud.len() < 4 {
        return Err(BoundaryError::BadRequest("need at least 4 points".into()));
    }
    let center = centroid(cloud);

    // Principal axes of the covariance matrix.
    let (mut cuu, mut cuv, mut cvv) = (0.0, 0.0, 0.0);
    for p in &cloud.points {
        let (du, dv) = (p.u - center.u, p.v - center.v);
        cuu += du * du;
        cuv += du * dv;
        cvv += dv * dv;
    }
    let theta = 0.5 * (2.0 * cuv).atan2(cuu - cvv);
    let axes = [(theta.cos(), theta.sin()), (-theta.sin(), theta.cos())];

    // Extremes along +/- each principal axis.
    let mut corners = Vec::with_capacity(4);
    for (au, av) in axes {
        for sign in [1.0, -1.0] {
            let best = (0..cloud.len())
                .max_by(|&a, &b| {
                    let pa = (cloud.points[a].u - center.u) * au * sign
                        + (cloud.points[a].v - center.v) * av * sign;
                    let pb = (cloud.points[b].u - center.u) * au * sign
                        + (cloud.points[b].v - center.v) * av * sign;
                    pa.partial_cmp(&pb).expect("finite projections")
                })
                .expect("non-empty cloud");
            if !corners.contains(&best) {
                corners.push(best);
            }
        }
    }
    if corners.len() < 3 {
        return Err(BoundaryError::TooFewSectors(corners.len()));
    }
    // Order corners by angle so consecutive paths wrap the hull.
    corners.sort_by(|&a, &b| {
        let aa = (cloud.points[a].v - center.v).atan2(cloud.points[a].u - center.u);
        let ab = (cloud.points[b].v - center.v).atan2(cloud.points[b].u - center.u);
        aa.partial_cmp(&ab).expect("finite angles")
    });

    let weights = PathWeights { c1: 1.0, c2: 0.0 };
    let mut ring = Vec::new();
    for ci in 0..corners.len() {
        let a = corners[ci];
        let b = corners[(ci + 1) % corners.len()];
        let segment = corner_path(cloud, a, b, &weights, k)?;
        let start = if ci == 0 { 0 } else { 1 };
        let end = if ci == corners.len() - 1 { segment.len() - 1 } else { segment.len() };
        for &idx in &segment[start..end.max(start)] {
            if !ring.contains(&idx) {
                ring.push(idx);
            }
        }
    }
    Ok(ring)
}
