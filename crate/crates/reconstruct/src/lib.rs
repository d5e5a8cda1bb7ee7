//! Surface reconstruction from noisy, unstructured 3D point clouds.
//!
//! The pipeline embeds a 3D cloud into the plane with Isomap, learns the
//! inverse 2D -> 3D map with an adaptive-topology neural network, extracts a
//! boundary of the 2D embedding by multi-depth path sampling, fits a
//! regularized closed cubic B-spline to the boundary interpolants, resamples
//! the interior on a regular grid, triangulates, trims against the spline
//! loop and lifts the trimmed mesh back to 3D through the trained network.
//!
//! Each stage is usable on its own:
//!
//! - [`pointcloud`]: cloud types, synthetic generators with parametric ground
//!   truth, seeded Gaussian noise, XYZ file I/O
//! - [`embedding`]: k-NN graph, all-pairs geodesic distances, classical MDS
//! - [`neuralnet`]: small MLP with backpropagation, early stopping and the
//!   grow-neurons/grow-layers topology search
//! - [`boundary`]: sector corner picking and multi-depth weighted
//!   shortest-path boundary sampling
//! - [`splinefit`]: Cox-de Boor basis, banded least squares, variance-bounded
//!   smoothing fits with adaptive knot insertion, closed boundary fitting
//! - [`meshgen`]: interior resampling, Bowyer-Watson Delaunay triangulation,
//!   concave trimming, lifting, OBJ/PLY export
//! - [`pipeline`]: end-to-end orchestration, TOML configuration, metrics and
//!   the benchmark harness

pub mod boundary;
pub mod embedding;
pub mod meshgen;
pub mod neuralnet;
pub mod pipeline;
pub mod pointcloud;
pub mod splinefit;

/// Derives a sub-seed from a base seed and a stage label.
///
/// One user-facing seed fans out to every seeded stage (noise injection,
/// data splits, weight initialization) through this function, so a single
/// `(config, seed)` pair pins the whole run.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    // FNV-1a over the label, mixed with the base through splitmix64.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = base.wrapping_add(h).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
