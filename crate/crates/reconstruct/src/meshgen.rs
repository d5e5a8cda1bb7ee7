//! Mesh generation: polygon discretization of the boundary spline, interior
//! grid resampling, Bowyer-Watson Delaunay triangulation, concave trimming
//! against the boundary polygon, lifting to 3D through the trained network,
//! and OBJ/PLY export.
//!
//! Robustness model: the circumcircle predicate uses a determinant with an
//! epsilon relative to the coordinate scale (no exact arithmetic); inputs
//! are expected at desk scale. Exactly coincident points are deduplicated
//! before triangulation.

use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::neuralnet::Network;
use crate::pointcloud::{Point2, Point3, PointCloud2};
use crate::splinefit::{BSplineCurve, SplineError};

/// Relative epsilon of the in-circumcircle determinant.
const CIRCUMCIRCLE_EPS: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("curve must be closed to sample a polygon loop")]
    OpenCurve,
    #[error("polygon is degenerate (near-zero area)")]
    DegeneratePolygon,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("grid spacing {spacing} exceeds the polygon bounding box {width} x {height}")]
    SpacingTooLarge { spacing: f64, width: f64, height: f64 },
    #[error("spacing must be positive")]
    BadSpacing,
    #[error("all points are collinear; triangulation undefined")]
    Collinear,
    #[error("need at least 3 points to triangulate, got {0}")]
    TooFewPoints(usize),
    #[error("no triangle centroid lies inside the boundary polygon")]
    NothingRetained,
    #[error("spline error: {0}")]
    Spline(#[from] SplineError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Closed polyline sampled from a boundary spline. `self_intersecting` is a
/// best-effort warning flag; downstream containment still works on mildly
/// invalid loops but trimming quality degrades.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<Point2>,
    pub self_intersecting: bool,
}

impl Polygon {
    /// Builds a polygon from explicit vertices (closure implicit).
    pub fn new(vertices: Vec<Point2>) -> Result<Self, MeshError> {
        if vertices.len() < 3 {
            return Err(MeshError::TooFewSamples { needed: 3, got: vertices.len() });
        }
        if polygon_area(&vertices).abs() < 1e-12 * span_scale(&vertices).powi(2) {
            return Err(MeshError::DegeneratePolygon);
        }
        let self_intersecting = has_self_intersection(&vertices);
        Ok(Self { vertices, self_intersecting })
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            lo.u = lo.u.min(p.u);
            lo.v = lo.v.min(p.v);
            hi.u = hi.u.max(p.u);
            hi.v = hi.v.max(p.v);
        }
        (lo, hi)
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.vertices.len();
        (0..n).map(|i| self.vertices[i].distance(&self.vertices[(i + 1) % n])).sum()
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices).abs()
    }
}

fn polygon_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        acc += a.u * b.v - b.u * a.v;
    }
    0.5 * acc
}

fn span_scale(vertices: &[Point2]) -> f64 {
    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in vertices {
        lo = (lo.0.min(p.u), lo.1.min(p.v));
        hi = (hi.0.max(p.u), hi.1.max(p.v));
    }
    (hi.0 - lo.0).max(hi.1 - lo.1).max(f64::MIN_POSITIVE)
}

fn segments_properly_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let orient = |p: Point2, q: Point2, r: Point2| -> f64 {
        (q.u - p.u) * (r.v - p.v) - (q.v - p.v) * (r.u - p.u)
    };
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    (o1 * o2 < 0.0) && (o3 * o4 < 0.0)
}

fn has_self_intersection(vertices: &[Point2]) -> bool {
    let n = vertices.len();
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        for j in (i + 1)..n {
            // Skip adjacent edges (shared endpoint).
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_properly_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

/// Samples a closed spline at `n_samples` uniform parameters into a polygon
/// loop.
pub fn sample_polygon(curve: &BSplineCurve, n_samples: usize) -> Result<Polygon, MeshError> {
    if !curve.closed {
        return Err(MeshError::OpenCurve);
    }
    if n_samples < 16 {
        return Err(MeshError::TooFewSamples { needed: 16, got: n_samples });
    }
    let vertices: Result<Vec<Point2>, SplineError> =
        (0..n_samples).map(|i| curve.eval(i as f64 / n_samples as f64)).collect();
    Polygon::new(vertices?)
}

/// Even-odd containment with boundary points counting as inside
/// (tolerance 1e-12 relative to the polygon scale).
pub fn point_in_polygon(p: Point2, poly: &Polygon) -> bool {
    let verts = &poly.vertices;
    let n = verts.len();
    let tol = 1e-12 * span_scale(verts).max(1.0);

    // Boundary band counts as inside.
    for i in 0..n {
        if point_segment_distance(p, verts[i], verts[(i + 1) % n]) <= tol {
            return true;
        }
    }

    // Even-odd ray cast toward +u.
    let mut inside = false;
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        let crosses = (a.v > p.v) != (b.v > p.v);
        if crosses {
            let t = (p.v - a.v) / (b.v - a.v);
            let x = a.u + t * (b.u - a.u);
            if x > p.u {
                inside = !inside;
            }
        }
    }
    inside
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (abu, abv) = (b.u - a.u, b.v - a.v);
    let len2 = abu * abu + abv * abv;
    if len2 == 0.0 {
        return p.distance(&a);
    }
    let t = (((p.u - a.u) * abu + (p.v - a.v) * abv) / len2).clamp(0.0, 1.0);
    p.distance(&Point2::new(a.u + t * abu, a.v + t * abv))
}

/// Superimposes a square grid of pitch `spacing` over the polygon's bounding
/// box and keeps the nodes inside the loop; the polygon vertices themselves
/// are appended so the mesh reaches the boundary.
///
/// The interior is filled blindly: intentional holes in the original point
/// set are resampled over like any other region.
pub fn resample_interior(poly: &Polygon, spacing: f64) -> Result<PointCloud2, MeshError> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(MeshError::BadSpacing);
    }
    let (lo, hi) = poly.bounding_box();
    let (width, height) = (hi.u - lo.u, hi.v - lo.v);
    if spacing > width || spacing > height {
        return Err(MeshError::SpacingTooLarge { spacing, width, height });
    }

    let mut points = Vec::new();
    let nu = (width / spacing).floor() as usize + 1;
    let nv = (height / spacing).floor() as usize + 1;
    for iu in 0..=nu {
        let u = lo.u + iu as f64 * spacing;
        if u > hi.u + 1e-12 * spacing {
            break;
        }
        for iv in 0..=nv {
            let v = lo.v + iv as f64 * spacing;
            if v > hi.v + 1e-12 * spacing {
                break;
            }
            let p = Point2::new(u, v);
            if point_in_polygon(p, poly) {
                points.push(p);
            }
        }
    }
    points.extend_from_slice(&poly.vertices);
    Ok(PointCloud2::new(points))
}

/// 2D triangle mesh with counterclockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh2 {
    pub vertices: Vec<Point2>,
    pub triangles: Vec<[usize; 3]>,
}

/// 3D triangle mesh; the triangle list is inherited verbatim from the 2D
/// mesh it was lifted from.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh3 {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh2 {
    /// Distinct undirected edge count (for Euler checks).
    pub fn edge_count(&self) -> usize {
        let mut edges = std::collections::BTreeSet::new();
        for t in &self.triangles {
            for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                edges.insert((e.0.min(e.1), e.0.max(e.1)));
            }
        }
        edges.len()
    }
}

fn orient2d(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.u - a.u) * (c.v - a.v) - (b.v - a.v) * (c.u - a.u)
}

/// In-circumcircle predicate for the CCW triangle (a, b, c): positive
/// determinant beyond the relative epsilon means `d` lies strictly inside.
fn in_circumcircle(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let (adx, ady) = (a.u - d.u, a.v - d.v);
    let (bdx, bdy) = (b.u - d.u, b.v - d.v);
    let (cdx, cdy) = (c.u - d.u, c.v - d.v);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    let det = adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx)
        + ad * (bdx * cdy - bdy * cdx);
    let scale = ad.max(bd).max(cd);
    det > CIRCUMCIRCLE_EPS * scale * scale
}

/// Bowyer-Watson incremental Delaunay triangulation. Exact duplicates are
/// dropped; within the floating-point predicate every returned triangle's
/// open circumcircle contains no input point.
pub fn delaunay(points: &PointCloud2) -> Result<TriMesh2, MeshError> {
    // Deduplicate exactly coincident points while keeping first occurrences.
    let mut vertices: Vec<Point2> = Vec::with_capacity(points.len());
    let mut seen = std::collections::BTreeSet::new();
    for p in &points.points {
        if seen.insert((p.u.to_bits(), p.v.to_bits())) {
            vertices.push(*p);
        }
    }
    let n = vertices.len();
    if n < 3 {
        return Err(MeshError::TooFewPoints(n));
    }
    let collinear = {
        let a = vertices[0];
        let scale = span_scale(&vertices);
        !vertices
            .iter()
            .skip(1)
            .any(|&b| vertices.iter().any(|&c| orient2d(a, b, c).abs() > 1e-12 * scale * scale))
    };
    if collinear {
        return Err(MeshError::Collinear);
    }

    // Super-triangle comfortably containing every point.
    let (lo, hi) = {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &vertices {
            lo.u = lo.u.min(p.u);
            lo.v = lo.v.min(p.v);
            hi.u = hi.u.max(p.u);
            hi.v = hi.v.max(p.v);
        }
        (lo, hi)
    };
    let span = (hi.u - lo.u).max(hi.v - lo.v).max(1e-9);
    let mid = Point2::new(0.5 * (lo.u + hi.u), 0.5 * (lo.v + hi.v));
    let s = 20.0 * span;
    let mut all = vertices.clone();
    all.push(Point2::new(mid.u - s, mid.v - s)); // n
    all.push(Point2::new(mid.u + s, mid.v - s)); // n + 1
    all.push(Point2::new(mid.u, mid.v + s)); // n + 2

    let mut triangles: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];

    for pi in 0..n {
        let p = all[pi];
        // Cavity: triangles whose circumcircle contains p.
        let mut bad: Vec<usize> = Vec::new();
        for (ti, t) in triangles.iter().enumerate() {
            if in_circumcircle_lenient(all[t[0]], all[t[1]], all[t[2]], p) {
                bad.push(ti);
            }
        }
        if bad.is_empty() {
            // Sliver circumcircles can reject a contained point within the
            // epsilon band; retry with the exact-zero threshold so no vertex
            // is silently dropped.
            for (ti, t) in triangles.iter().enumerate() {
                if in_circumcircle_strict_zero(all[t[0]], all[t[1]], all[t[2]], p) {
                    bad.push(ti);
                }
            }
        }
        // Boundary of the cavity: edges appearing exactly once.
        let mut edge_count: std::collections::BTreeMap<(usize, usize), (usize, usize, i32)> =
            Default::default();
        for &ti in &bad {
            let t = triangles[ti];
            for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let key = (e.0.min(e.1), e.0.max(e.1));
                edge_count
                    .entry(key)
                    .and_modify(|v| v.2 += 1)
                    .or_insert((e.0, e.1, 1));
            }
        }
        for &ti in bad.iter().rev() {
            triangles.swap_remove(ti);
        }
        for (_, (a, b, count)) in edge_count {
            if count == 1 {
                triangles.push([a, b, pi]);
            }
        }
    }

    // Strip triangles touching the super-triangle, fix orientation, drop
    // degenerates.
    let scale = span.max(1e-9);
    let mut out: Vec<[usize; 3]> = Vec::new();
    for t in triangles {
        if t.iter().any(|&v| v >= n) {
            continue;
        }
        let area2 = orient2d(all[t[0]], all[t[1]], all[t[2]]);
        if area2.abs() <= 1e-12 * scale * scale {
            continue;
        }
        out.push(if area2 > 0.0 { t } else { [t[0], t[2], t[1]] });
    }
    out.sort();
    Ok(TriMesh2 { vertices, triangles: out })
}

/// Cavity test used during insertion: slightly lenient so cocircular points
/// still produce a valid (if arbitrary diagonal) triangulation.
fn in_circumcircle_lenient(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    // Insertion needs the predicate oriented the same way as validation.
    if orient2d(a, b, c) >= 0.0 {
        in_circumcircle(a, b, c, d)
    } else {
        in_circumcircle(a, c, b, d)
    }
}

/// Same orientation handling with an exact-zero threshold, used as the
/// fallback cavity test.
fn in_circumcircle_strict_zero(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let (a, b, c) = if orient2d(a, b, c) >= 0.0 { (a, b, c) } else { (a, c, b) };
    let (adx, ady) = (a.u - d.u, a.v - d.v);
    let (bdx, bdy) = (b.u - d.u, b.v - d.v);
    let (cdx, cdy) = (c.u - d.u, c.v - d.v);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    let det = adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx)
        + ad * (bdx * cdy - bdy * cdx);
    det > 0.0
}

/// Brute-force Delaunay check: no input point strictly inside any triangle's
/// circumcircle. Intended for tests and small meshes.
pub fn delaunay_property_holds(mesh: &TriMesh2) -> bool {
    for t in &mesh.triangles {
        let (a, b, c) = (mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
        for (i, &p) in mesh.vertices.iter().enumerate() {
            if t.contains(&i) {
                continue;
            }
            if in_circumcircle(a, b, c, p) {
                return false;
            }
        }
    }
    true
}

/// Keeps exactly the triangles whose centroid lies inside the polygon and
/// re-indexes the vertices compactly. Orientation is preserved.
pub fn trim(mesh: &TriMesh2, poly: &Polygon) -> Result<TriMesh2, MeshError> {
    let retained: Vec<[usize; 3]> = mesh
        .triangles
        .iter()
        .filter(|t| {
            let c = Point2::new(
                (mesh.vertices[t[0]].u + mesh.vertices[t[1]].u + mesh.vertices[t[2]].u) / 3.0,
                (mesh.vertices[t[0]].v + mesh.vertices[t[1]].v + mesh.vertices[t[2]].v) / 3.0,
            );
            point_in_polygon(c, poly)
        })
        .copied()
        .collect();
    if retained.is_empty() {
        return Err(MeshError::NothingRetained);
    }

    let mut remap = vec![usize::MAX; mesh.vertices.len()];
    let mut vertices = Vec::new();
    let mut triangles = Vec::with_capacity(retained.len());
    for t in retained {
        let mut nt = [0usize; 3];
        for (slot, &v) in nt.iter_mut().zip(&t) {
            if remap[v] == usize::MAX {
                remap[v] = vertices.len();
                vertices.push(mesh.vertices[v]);
            }
            *slot = remap[v];
        }
        triangles.push(nt);
    }
    Ok(TriMesh2 { vertices, triangles })
}

/// Maps every 2D vertex through the trained network, copying the triangle
/// list verbatim.
pub fn lift(mesh: &TriMesh2, net: &Network) -> TriMesh3 {
    TriMesh3 {
        vertices: mesh.vertices.iter().map(|&p| net.forward(p)).collect(),
        triangles: mesh.triangles.clone(),
    }
}

/// Wavefront OBJ: `v x y z` lines followed by 1-based `f i j k` faces.
pub fn format_obj(mesh: &TriMesh3) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for t in &mesh.triangles {
        out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    out
}

pub fn export_obj(mesh: &TriMesh3, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(format_obj(mesh).as_bytes())?;
    Ok(())
}

/// ASCII PLY with vertex and face elements.
pub fn format_ply(mesh: &TriMesh3) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", mesh.vertices.len()));
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    out.push_str(&format!("element face {}\n", mesh.triangles.len()));
    out.push_str("property list uchar int vertex_indices\n");
    out.push_str("end_header\n");
    for v in &mesh.vertices {
        out.push_str(&format!("{} {} {}\n", v.x, v.y, v.z));
    }
    for t in &mesh.triangles {
        out.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
    }
    out
}

pub fn export_ply(mesh: &TriMesh3, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(format_ply(mesh).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::{ActivationKind, Network, Topology};
    use crate::splinefit::fit_closed_boundary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn unit_square() -> Polygon {
        Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    fn circle_curve(radius: f64) -> BSplineCurve {
        let ring: Vec<Point2> = (0..32)
            .map(|i| {
                let a = TAU * i as f64 / 32.0;
                Point2::new(radius * a.cos(), radius * a.sin())
            })
            .collect();
        fit_closed_boundary(&ring, 1.0).unwrap().0
    }

    #[test]
    fn sampled_circle_perimeter_matches_circumference() {
        let curve = circle_curve(1.5);
        let poly = sample_polygon(&curve, 64).unwrap();
        assert_eq!(poly.vertices.len(), 64);
        let expected = TAU * 1.5;
        assert!(
            (poly.perimeter() - expected).abs() < 0.01 * expected,
            "perimeter {} vs {expected}",
            poly.perimeter()
        );
        assert!(!poly.self_intersecting);
    }

    #[test]
    fn degenerate_and_open_curves_are_rejected() {
        let constant = BSplineCurve {
            degree: 3,
            knots: vec![0.0, 0.25, 0.5, 0.75],
            control: vec![Point2::new(1.0, 1.0); 4],
            closed: true,
        };
        match sample_polygon(&constant, 32) {
            Err(MeshError::DegeneratePolygon) => {}
            other => panic!("expected degenerate polygon, got {other:?}"),
        }

        let open = BSplineCurve {
            degree: 3,
            knots: vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0],
            control: vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ],
            closed: false,
        };
        match sample_polygon(&open, 32) {
            Err(MeshError::OpenCurve) => {}
            other => panic!("expected open-curve rejection, got {other:?}"),
        }
    }

    #[test]
    fn area_accuracy_improves_with_samples() {
        let curve = circle_curve(1.0);
        let truth = std::f64::consts::PI;
        let coarse = sample_polygon(&curve, 24).unwrap().area();
        let fine = sample_polygon(&curve, 48).unwrap().area();
        let finest = sample_polygon(&curve, 96).unwrap().area();
        assert!((fine - truth).abs() <= (coarse - truth).abs() + 1e-9);
        assert!((finest - truth).abs() <= (fine - truth).abs() + 1e-9);
    }

    #[test]
    fn containment_basics() {
        let poly = unit_square();
        assert!(point_in_polygon(Point2::new(0.5, 0.5), &poly));
        assert!(!point_in_polygon(Point2::new(2.0, 2.0), &poly));
        // Boundary points count as inside.
        assert!(point_in_polygon(Point2::new(0.0, 0.5), &poly));
        assert!(point_in_polygon(Point2::new(1.0, 1.0), &poly));
    }

    /// Winding-number oracle for containment.
    fn winding_number_inside(p: Point2, poly: &Polygon) -> bool {
        let n = poly.vertices.len();
        let mut angle = 0.0;
        for i in 0..n {
            let a = poly.vertices[i];
            let b = poly.vertices[(i + 1) % n];
            let v1 = (a.u - p.u, a.v - p.v);
            let v2 = (b.u - p.u, b.v - p.v);
            let cross = v1.0 * v2.1 - v1.1 * v2.0;
            let dot = v1.0 * v2.0 + v1.1 * v2.1;
            angle += cross.atan2(dot);
        }
        angle.abs() > std::f64::consts::PI
    }

    #[test]
    fn containment_matches_winding_number_oracle() {
        let curve = circle_curve(1.0);
        let poly = sample_polygon(&curve, 48).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut checked = 0;
        for _ in 0..10_000 {
            let p = Point2::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            // Stay away from the boundary band where the conventions differ.
            let near_boundary = poly
                .vertices
                .iter()
                .zip(poly.vertices.iter().cycle().skip(1))
                .any(|(a, b)| point_segment_distance(p, *a, *b) < 1e-9);
            if near_boundary {
                continue;
            }
            assert_eq!(point_in_polygon(p, &poly), winding_number_inside(p, &poly));
            checked += 1;
        }
        assert!(checked > 9000);
    }

    #[test]
    fn unit_square_grid_counts() {
        let poly = unit_square();
        let cloud = resample_interior(&poly, 0.5).unwrap();
        // Grid {0, 0.5, 1}^2 = 9 nodes, all inside, plus the 4 vertices.
        assert_eq!(cloud.len(), 9 + 4);
        assert!(resample_interior(&poly, 1.5).is_err());
        assert!(resample_interior(&poly, 0.0).is_err());
    }

    #[test]
    fn halving_spacing_roughly_quadruples_interior_nodes() {
        let curve = circle_curve(1.0);
        let poly = sample_polygon(&curve, 64).unwrap();
        let coarse = resample_interior(&poly, 0.1).unwrap().len() - poly.vertices.len();
        let fine = resample_interior(&poly, 0.05).unwrap().len() - poly.vertices.len();
        let ratio = fine as f64 / coarse as f64;
        assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
    }

    #[test]
    fn square_triangulates_into_two_triangles() {
        let cloud = PointCloud2::new(unit_square().vertices);
        let mesh = delaunay(&cloud).unwrap();
        assert_eq!(mesh.triangles.len(), 2);
        assert!(delaunay_property_holds(&mesh));
    }

    #[test]
    fn square_plus_center_gives_fan_of_four() {
        let mut pts = unit_square().vertices;
        pts.push(Point2::new(0.5, 0.5));
        let mesh = delaunay(&PointCloud2::new(pts)).unwrap();
        assert_eq!(mesh.triangles.len(), 4);
        assert!(delaunay_property_holds(&mesh));
    }

    #[test]
    fn edge_midpoints_subdivide_without_dropping_vertices() {
        // Points lying exactly on existing triangle edges must still be
        // inserted: the medial subdivision of a triangle has 4 faces and
        // uses every vertex.
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(4.0, 0.0),
            Point2::new(0.0, 4.0),
            Point2::new(2.0, 0.0),
            Point2::new(0.0, 2.0),
            Point2::new(2.0, 2.0),
        ];
        let mesh = delaunay(&PointCloud2::new(pts)).unwrap();
        assert_eq!(mesh.triangles.len(), 4);
        let mut used = vec![false; mesh.vertices.len()];
        for t in &mesh.triangles {
            for &v in t {
                used[v] = true;
            }
        }
        assert!(used.iter().all(|&u| u), "every vertex appears in a triangle");
        assert!(delaunay_property_holds(&mesh));
    }

    #[test]
    fn duplicates_are_dropped_and_collinear_rejected() {
        let mut pts = unit_square().vertices;
        pts.push(Point2::new(0.0, 0.0));
        let mesh = delaunay(&PointCloud2::new(pts)).unwrap();
        assert_eq!(mesh.vertices.len(), 4);

        let line: Vec<Point2> = (0..5).map(|i| Point2::new(i as f64, 2.0 * i as f64)).collect();
        match delaunay(&PointCloud2::new(line)) {
            Err(MeshError::Collinear) => {}
            other => panic!("expected collinear error, got {other:?}"),
        }
    }

    #[test]
    fn random_triangulations_satisfy_empty_circumcircle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..30 {
            let pts: Vec<Point2> = (0..25)
                .map(|_| Point2::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
                .collect();
            let mesh = delaunay(&PointCloud2::new(pts)).unwrap();
            assert!(delaunay_property_holds(&mesh), "trial {trial}");
            // All triangles CCW.
            for t in &mesh.triangles {
                assert!(
                    orient2d(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]) > 0.0
                );
            }
        }
    }

    #[test]
    fn trim_keeps_convex_cover_and_cuts_concave_notch() {
        // Convex polygon covering everything: mesh unchanged up to indexing.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point2> = (0..20)
            .map(|_| Point2::new(rng.random_range(0.2..0.8), rng.random_range(0.2..0.8)))
            .collect();
        let mesh = delaunay(&PointCloud2::new(pts)).unwrap();
        let cover = unit_square();
        let trimmed = trim(&mesh, &cover).unwrap();
        assert_eq!(trimmed.triangles.len(), mesh.triangles.len());

        // L-shaped polygon: triangles spanning the notch get removed.
        let l_shape = Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 2.0),
            Point2::new(0.0, 2.0),
        ])
        .unwrap();
        let corners = PointCloud2::new(l_shape.vertices.clone());
        let lmesh = delaunay(&corners).unwrap();
        let ltrimmed = trim(&lmesh, &l_shape).unwrap();
        assert!(ltrimmed.triangles.len() < lmesh.triangles.len(), "notch triangles removed");
        for t in &ltrimmed.triangles {
            let c = Point2::new(
                (ltrimmed.vertices[t[0]].u + ltrimmed.vertices[t[1]].u + ltrimmed.vertices[t[2]].u)
                    / 3.0,
                (ltrimmed.vertices[t[0]].v + ltrimmed.vertices[t[1]].v + ltrimmed.vertices[t[2]].v)
                    / 3.0,
            );
            assert!(point_in_polygon(c, &l_shape));
        }
    }

    #[test]
    fn trim_rejects_disjoint_boundary() {
        let mesh = delaunay(&PointCloud2::new(unit_square().vertices)).unwrap();
        let far = Polygon::new(vec![
            Point2::new(10.0, 10.0),
            Point2::new(11.0, 10.0),
            Point2::new(10.5, 11.0),
        ])
        .unwrap();
        match trim(&mesh, &far) {
            Err(MeshError::NothingRetained) => {}
            other => panic!("expected nothing retained, got {other:?}"),
        }
    }

    #[test]
    fn euler_characteristic_of_disc_meshes() {
        // V - E + F = 1 for a triangulated disc.
        let curve = circle_curve(1.0);
        let poly = sample_polygon(&curve, 40).unwrap();
        let cloud = resample_interior(&poly, 0.15).unwrap();
        let mesh = delaunay(&cloud).unwrap();
        let trimmed = trim(&mesh, &poly).unwrap();
        let v = trimmed.vertices.len() as i64;
        let e = trimmed.edge_count() as i64;
        let f = trimmed.triangles.len() as i64;
        assert_eq!(v - e + f, 1, "V={v} E={e} F={f}");
    }

    #[test]
    fn lift_preserves_topology_and_is_deterministic() {
        let net = Network::new(
            Topology::new(vec![4], ActivationKind::Sigmoid, ActivationKind::Linear),
            11,
        )
        .unwrap();
        let cloud = PointCloud2::new(
            (0..12)
                .map(|i| Point2::new((i as f64 * 0.71).sin(), (i as f64 * 0.37).cos()))
                .collect(),
        );
        let mesh = delaunay(&cloud).unwrap();
        let lifted = lift(&mesh, &net);
        assert_eq!(lifted.triangles, mesh.triangles);
        assert_eq!(lifted.vertices.len(), mesh.vertices.len());
        let again = lift(&mesh, &net);
        assert_eq!(again, lifted);
        for (p2, p3) in mesh.vertices.iter().zip(&lifted.vertices) {
            let direct = net.forward(*p2);
            assert_eq!(direct, *p3);
        }
    }

    #[test]
    fn obj_format_and_round_trip() {
        let mesh = TriMesh3 {
            vertices: vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.25, 0.0),
                Point3::new(0.0, 1.0, 0.125),
            ],
            triangles: vec![[0, 1, 2]],
        };
        let text = format_obj(&mesh);
        let v_lines = text.lines().filter(|l| l.starts_with("v ")).count();
        let f_lines: Vec<&str> = text.lines().filter(|l| l.starts_with("f ")).collect();
        assert_eq!(v_lines, 3);
        assert_eq!(f_lines, vec!["f 1 2 3"]);

        // Re-parse the OBJ text.
        let mut verts = Vec::new();
        for line in text.lines().filter(|l| l.starts_with("v ")) {
            let nums: Vec<f64> =
                line[2..].split_whitespace().map(|t| t.parse().unwrap()).collect();
            verts.push(Point3::new(nums[0], nums[1], nums[2]));
        }
        for (a, b) in verts.iter().zip(&mesh.vertices) {
            assert!(a.distance(b) < 1e-6);
        }
    }

    #[test]
    fn ply_header_counts_match_body() {
        let curve = circle_curve(1.0);
        let poly = sample_polygon(&curve, 32).unwrap();
        let cloud = resample_interior(&poly, 0.3).unwrap();
        let mesh2 = delaunay(&cloud).unwrap();
        let net = Network::new(
            Topology::new(vec![2], ActivationKind::Sigmoid, ActivationKind::Linear),
            5,
        )
        .unwrap();
        let mesh = lift(&mesh2, &net);
        let text = format_ply(&mesh);
        let header_vertices: usize = text
            .lines()
            .find(|l| l.starts_with("element vertex"))
            .and_then(|l| l.split_whitespace().last())
            .and_then(|t| t.parse().ok())
            .unwrap();
        let header_faces: usize = text
            .lines()
            .find(|l| l.starts_with("element face"))
            .and_then(|l| l.split_whitespace().last())
            .and_then(|t| t.parse().ok())
            .unwrap();
        let body: Vec<&str> =
            text.lines().skip_while(|l| *l != "end_header").skip(1).collect();
        assert_eq!(body.len(), header_vertices + header_faces);
        assert_eq!(header_vertices, mesh.vertices.len());
        assert_eq!(header_faces, mesh.triangles.len());
    }

    #[test]
    fn obj_export_writes_file() {
        let mesh = TriMesh3 {
            vertices: vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            triangles: vec![[0, 1, 2]],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tri.obj");
        export_obj(&mesh, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format_obj(&mesh));
        let ply_path = dir.path().join("tri.ply");
        export_ply(&mesh, &ply_path).unwrap();
        assert!(std::fs::read_to_string(&ply_path).unwrap().starts_with("ply\n"));
    }

    #[test]
    fn trim_before_and_after_lift_commute() {
        // Lifting preserves the triangle list, so trimming in 2D then
        // lifting produces the same 3D triangles as lifting first and then
        // dropping triangles by the same centroid criterion.
        let curve = circle_curve(1.0);
        let poly = sample_polygon(&curve, 32).unwrap();
        let cloud = resample_interior(&poly, 0.25).unwrap();
        let mesh2 = delaunay(&cloud).unwrap();
        let net = Network::new(
            Topology::new(vec![3], ActivationKind::Tanh, ActivationKind::Linear),
            2,
        )
        .unwrap();

        let key = |m: &TriMesh3, t: &[usize; 3]| -> Vec<(u64, u64, u64)> {
            let mut k: Vec<(u64, u64, u64)> = t
                .iter()
                .map(|&v| {
                    let p = m.vertices[v];
                    (p.x.to_bits(), p.y.to_bits(), p.z.to_bits())
                })
                .collect();
            k.sort();
            k
        };

        let trimmed_then_lifted = lift(&trim(&mesh2, &poly).unwrap(), &net);
        let mut a: Vec<_> =
            trimmed_then_lifted.triangles.iter().map(|t| key(&trimmed_then_lifted, t)).collect();

        let lifted_full = lift(&mesh2, &net);
        let mut b: Vec<_> = lifted_full
            .triangles
            .iter()
            .enumerate()
            .filter(|(ti, _)| {
                let t = mesh2.triangles[*ti];
                let c = Point2::new(
                    (mesh2.vertices[t[0]].u + mesh2.vertices[t[1]].u + mesh2.vertices[t[2]].u)
                        / 3.0,
                    (mesh2.vertices[t[0]].v + mesh2.vertices[t[1]].v + mesh2.vertices[t[2]].v)
                        / 3.0,
                );
                point_in_polygon(c, &poly)
            })
            .map(|(_, t)| key(&lifted_full, t))
            .collect();

        a.sort();
        b.sort();
        assert_eq!(a, b);
    }
}
