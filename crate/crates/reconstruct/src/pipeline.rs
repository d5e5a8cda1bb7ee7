//! End-to-end orchestration: configuration, the eight pipeline stages,
//! metrics against parametric ground truth, artifact output, and the
//! benchmark harness.
//!
//! A single seed in the config fans out deterministically to every seeded
//! stage, so identical `(config, seed)` pairs produce byte-identical
//! artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::{self, BoundaryRing, PathWeights, RingSample};
use crate::derive_seed;
use crate::embedding::{self, Embedding2D};
use crate::meshgen::{self, Polygon, TriMesh2, TriMesh3};
use crate::neuralnet::{
    self, ActivationKind, Network, Sample, TrainConfig, TrainReport,
};
use crate::pointcloud::{
    self, GroundTruthSample, NoiseSpec, Point2, PointCloud2, PointCloud3,
};
use crate::splinefit::{self, BSplineCurve, FitReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage {stage} failed: {message}{}", if .hint.is_empty() { String::new() } else { format!(" ({hint})") })]
    Stage { stage: &'static str, message: String, hint: &'static str },
}

impl PipelineError {
    fn stage(stage: &'static str, err: impl std::fmt::Display, hint: &'static str) -> Self {
        Self::Stage { stage, message: err.to_string(), hint }
    }
}

/// Which surface to generate, or an XYZ file to load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    Torus {
        #[serde(default = "default_big_radius")]
        big_radius: f64,
        #[serde(default = "default_small_radius")]
        small_radius: f64,
        #[serde(default = "default_quarter_range")]
        theta_range: (f64, f64),
        #[serde(default = "default_quarter_range")]
        gamma_range: (f64, f64),
        #[serde(default = "default_grid_side")]
        n_theta: usize,
        #[serde(default = "default_grid_side")]
        n_gamma: usize,
        #[serde(default)]
        noise_sigma: f64,
    },
    Scurve {
        #[serde(default = "default_scurve_n")]
        n: usize,
        #[serde(default)]
        noise_sigma: f64,
    },
    Cone {
        #[serde(default = "default_cone_side")]
        n_side: usize,
        #[serde(default)]
        noise_sigma: f64,
    },
    Xyz {
        path: PathBuf,
        #[serde(default)]
        noise_sigma: f64,
    },
}

fn default_big_radius() -> f64 {
    2.0
}
fn default_small_radius() -> f64 {
    1.0
}
fn default_quarter_range() -> (f64, f64) {
    (0.0, std::f64::consts::FRAC_PI_2)
}
fn default_grid_side() -> usize {
    10
}
fn default_scurve_n() -> usize {
    400
}
fn default_cone_side() -> usize {
    6
}

impl DatasetSpec {
    pub fn name(&self) -> String {
        match self {
            DatasetSpec::Torus { .. } => "torus".into(),
            DatasetSpec::Scurve { .. } => "scurve".into(),
            DatasetSpec::Cone { .. } => "cone".into(),
            DatasetSpec::Xyz { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "xyz".into()),
        }
    }

    fn noise_sigma(&self) -> f64 {
        match self {
            DatasetSpec::Torus { noise_sigma, .. }
            | DatasetSpec::Scurve { noise_sigma, .. }
            | DatasetSpec::Cone { noise_sigma, .. }
            | DatasetSpec::Xyz { noise_sigma, .. } => *noise_sigma,
        }
    }
}

/// Training section of the config: the comparison-protocol values
/// are the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub max_layers: usize,
    pub max_neurons: usize,
    pub epochs: usize,
    pub patience: usize,
    pub learning_rate: Option<f64>,
    pub hidden_activation: ActivationKind,
    pub output_activation: ActivationKind,
    /// `true` retrains the winning topology on all data; `false` keeps an
    /// exact copy of the best network found during the search.
    pub retrain: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            max_layers: 3,
            max_neurons: 6,
            epochs: 20,
            patience: 3,
            learning_rate: None,
            hidden_activation: ActivationKind::Sigmoid,
            output_activation: ActivationKind::Linear,
            retrain: false,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            max_layers: self.max_layers,
            max_neurons: self.max_neurons,
            epochs: self.epochs,
            early_stop_patience: self.patience,
            learning_rate: self.learning_rate,
            split: (0.85, 0.10, 0.05),
            hidden_activation: self.hidden_activation,
            output_activation: self.output_activation,
            seed: derive_seed(seed, "train"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingSection {
    /// Neighborhood size of the Isomap graph.
    pub k: usize,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        Self { k: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundarySection {
    pub corners: usize,
    pub depth: usize,
    pub c1: f64,
    pub c2: f64,
}

impl Default for BoundarySection {
    fn default() -> Self {
        let w = PathWeights::default();
        Self { corners: 8, depth: 2, c1: w.c1, c2: w.c2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplineSection {
    /// Smoothing factor of the variance bound. Not automatically tuned.
    pub lambda: f64,
}

impl Default for SplineSection {
    fn default() -> Self {
        Self { lambda: splinefit::DEFAULT_LAMBDA }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeshSection {
    /// Grid pitch; `None` uses the median nearest-neighbor distance of the
    /// 2D embedding.
    pub grid_spacing: Option<f64>,
    /// Polygon sampling resolution: samples = this factor x control points.
    pub samples_per_control: usize,
}

impl Default for MeshSection {
    fn default() -> Self {
        Self { grid_spacing: None, samples_per_control: 8 }
    }
}

/// Full pipeline configuration (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub embedding: EmbeddingSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub boundary: BoundarySection,
    #[serde(default)]
    pub spline: SplineSection,
    #[serde(default)]
    pub mesh: MeshSection,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml(&text)
    }
}

/// One row of the benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub dataset: String,
    pub method: String,
    pub points: usize,
    /// MSE against parametric ground truth when available, otherwise
    /// against the (possibly noisy) input data.
    pub mse: f64,
    pub layers: usize,
    /// Hyphen-joined hidden layer sizes, e.g. `10-6`.
    pub neurons: String,
    pub epochs: usize,
    pub seconds: f64,
    /// Populated when the row failed; `mse` is NaN in that case.
    #[serde(default)]
    pub error: Option<String>,
}

/// Everything a pipeline run produces.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub cloud: PointCloud3,
    pub truth: Option<Vec<GroundTruthSample>>,
    pub embedding: Embedding2D,
    pub report: TrainReport,
    pub network: Network,
    pub rings: RingSample,
    pub curve: BSplineCurve,
    pub curve_reports: [FitReport; 2],
    pub polygon: Polygon,
    pub mesh2: TriMesh2,
    pub mesh3: TriMesh3,
    pub metrics: MetricsRow,
}

fn generate_dataset(
    spec: &DatasetSpec,
    seed: u64,
) -> Result<(PointCloud3, Option<Vec<GroundTruthSample>>), PipelineError> {
    let hint = "check the dataset section of the config";
    let (clean, truth) = match spec {
        DatasetSpec::Torus {
            big_radius,
            small_radius,
            theta_range,
            gamma_range,
            n_theta,
            n_gamma,
            ..
        } => {
            let (c, t) = pointcloud::gen_torus(
                *big_radius,
                *small_radius,
                *theta_range,
                *gamma_range,
                *n_theta,
                *n_gamma,
            )
            .map_err(|e| PipelineError::stage("dataset", e, hint))?;
            (c, Some(t))
        }
        DatasetSpec::Scurve { n, .. } => {
            let (c, t) = pointcloud::gen_scurve(*n, derive_seed(seed, "scurve"))
                .map_err(|e| PipelineError::stage("dataset", e, hint))?;
            (c, Some(t))
        }
        DatasetSpec::Cone { n_side, .. } => {
            let (c, t) = pointcloud::gen_cone(*n_side)
                .map_err(|e| PipelineError::stage("dataset", e, hint))?;
            (c, Some(t))
        }
        DatasetSpec::Xyz { path, .. } => {
            let c = pointcloud::load_xyz(path)
                .map_err(|e| PipelineError::stage("dataset", e, hint))?;
            (c, None)
        }
    };
    let sigma = spec.noise_sigma();
    let cloud = if sigma > 0.0 {
        pointcloud::add_noise(&clean, &NoiseSpec { sigma, seed: derive_seed(seed, "noise") })
    } else {
        clean
    };
    Ok((cloud, truth))
}

/// Per-scalar MSE between the network's lift of the embedding and the exact
/// parametric ground truth (index correspondence required).
pub fn evaluate_vs_truth(
    net: &Network,
    embedding: &Embedding2D,
    truth: &[GroundTruthSample],
) -> Result<f64, PipelineError> {
    if embedding.coords.len() != truth.len() {
        return Err(PipelineError::stage(
            "metrics",
            format!("embedding has {} points, truth has {}", embedding.coords.len(), truth.len()),
            "index correspondence was broken upstream",
        ));
    }
    let pairs: Vec<Sample> =
        embedding.coords.iter().zip(truth).map(|(p, gt)| (*p, gt.point)).collect();
    Ok(neuralnet::mse(net, &pairs))
}

/// Median nearest-neighbor distance of the embedding; the default mesh grid
/// pitch.
pub fn median_nn_distance(cloud: &PointCloud2) -> f64 {
    let n = cloud.len();
    let mut nn: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| cloud.points[i].distance(&cloud.points[j]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nn.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    nn[n / 2]
}

/// Union of all ring points ordered by angle around the 2D centroid: the
/// interpolants handed to the closed-boundary fit. Multi-depth sampling
/// means the fitted loop averages the boundary band instead of chasing the
/// single outermost (noisy) layer.
pub fn boundary_interpolants(embedding: &PointCloud2, rings: &[BoundaryRing]) -> Vec<Point2> {
    let center = boundary::centroid(embedding);
    let mut pts: Vec<Point2> = rings
        .iter()
        .flat_map(|r| r.indices.iter().map(|&i| embedding.points[i]))
        .collect();
    pts.sort_by(|a, b| {
        let aa = (a.v - center.v).atan2(a.u - center.u);
        let ab = (b.v - center.v).atan2(b.u - center.u);
        aa.partial_cmp(&ab)
            .expect("finite angles")
            .then_with(|| a.distance(&center).partial_cmp(&b.distance(&center)).unwrap())
    });
    pts
}

/// Runs the eight pipeline stages in order: embed, train, sample the
/// boundary, fit the loop, resample the interior, triangulate, trim (in 2D,
/// so the 3D mesh inherits the trimmed topology), and lift. Artifacts are
/// written to `config.output_dir` when set.
pub fn run(config: &PipelineConfig) -> Result<RunArtifacts, PipelineError> {
    let started = Instant::now();
    let seed = config.seed;

    let (cloud, truth) = generate_dataset(&config.dataset, seed)?;
    log::info!("dataset {}: {} points", config.dataset.name(), cloud.len());

    let embedding = embedding::isomap(&cloud, config.embedding.k)
        .map_err(|e| PipelineError::stage("isomap", e, "a larger k may connect the graph"))?;
    log::info!("isomap stress {:.6}", embedding.stress);

    let pairs: Vec<Sample> =
        embedding.coords.iter().zip(&cloud.points).map(|(p, y)| (*p, *y)).collect();
    let train_cfg = config.train.to_train_config(seed);
    let (best, report) = neuralnet::adaptive_search(&pairs, &train_cfg)
        .map_err(|e| PipelineError::stage("train", e, "try more epochs or a smaller learning rate"))?;
    let network = neuralnet::finalize(&best, &report, &pairs, config.train.retrain, &train_cfg)
        .map_err(|e| PipelineError::stage("train", e, "retraining diverged; lower the learning rate"))?;
    log::info!(
        "best topology {:?}, final mse {:.6}",
        report.best_topology.hidden,
        report.final_mse
    );

    let cloud2 = embedding.cloud();
    let weights = PathWeights { c1: config.boundary.c1, c2: config.boundary.c2 };
    let rings = boundary::sample_rings(
        &cloud2,
        config.boundary.depth,
        config.boundary.corners,
        &weights,
        config.embedding.k,
    )
    .map_err(|e| PipelineError::stage("boundary", e, "fewer corners or a larger k may help"))?;
    if rings.exhausted {
        log::warn!("boundary sampling exhausted the cloud at depth {}", rings.rings.len());
    }

    let interpolants = boundary_interpolants(&cloud2, &rings.rings);
    let (curve, curve_reports) = splinefit::fit_closed_boundary(&interpolants, config.spline.lambda)
        .map_err(|e| PipelineError::stage("spline", e, "a larger lambda smooths harder"))?;
    if curve_reports.iter().any(|r| r.budget_exhausted) {
        log::warn!("spline knot budget exhausted before reaching the smoothing bound");
    }

    let n_samples = (config.mesh.samples_per_control * curve.control.len()).max(16);
    let polygon = meshgen::sample_polygon(&curve, n_samples)
        .map_err(|e| PipelineError::stage("polygon", e, "boundary loop is degenerate"))?;
    if polygon.self_intersecting {
        log::warn!("boundary polygon self-intersects; trimming quality may degrade");
    }

    let spacing = config.mesh.grid_spacing.unwrap_or_else(|| median_nn_distance(&cloud2));
    let interior = meshgen::resample_interior(&polygon, spacing)
        .map_err(|e| PipelineError::stage("resample", e, "grid spacing may exceed the region"))?;
    let mesh_full = meshgen::delaunay(&interior)
        .map_err(|e| PipelineError::stage("delaunay", e, "degenerate interior sampling"))?;
    let mesh2 = meshgen::trim(&mesh_full, &polygon)
        .map_err(|e| PipelineError::stage("trim", e, "boundary and interior are inconsistent"))?;
    let mesh3 = meshgen::lift(&mesh2, &network);

    let mse = match &truth {
        Some(t) => evaluate_vs_truth(&network, &embedding, t)?,
        None => report.final_mse,
    };
    let metrics = MetricsRow {
        dataset: config.dataset.name(),
        method: "isomap".into(),
        points: cloud.len(),
        mse,
        layers: report.best_topology.hidden.len(),
        neurons: report
            .best_topology
            .hidden
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("-"),
        epochs: config.train.epochs,
        seconds: started.elapsed().as_secs_f64(),
        error: None,
    };

    let artifacts = RunArtifacts {
        cloud,
        truth,
        embedding,
        report,
        network,
        rings,
        curve,
        curve_reports,
        polygon,
        mesh2,
        mesh3,
        metrics,
    };
    if let Some(dir) = &config.output_dir {
        write_artifacts(&artifacts, config, dir)?;
    }
    Ok(artifacts)
}

fn write_artifacts(
    artifacts: &RunArtifacts,
    config: &PipelineConfig,
    dir: &Path,
) -> Result<(), PipelineError> {
    let io_err = |e: std::io::Error| PipelineError::stage("output", e, "check the output directory");
    std::fs::create_dir_all(dir).map_err(io_err)?;

    pointcloud::save_xyz(&artifacts.cloud, dir.join("cloud.xyz"))
        .map_err(|e| PipelineError::stage("output", e, ""))?;
    std::fs::write(dir.join("embedding.csv"), artifacts.embedding.to_csv()).map_err(io_err)?;
    std::fs::write(dir.join("rings.csv"), artifacts.rings.to_csv()).map_err(io_err)?;
    std::fs::write(dir.join("network.json"), artifacts.network.to_json()).map_err(io_err)?;
    std::fs::write(dir.join("boundary_curve.json"), artifacts.curve.to_json()).map_err(io_err)?;
    std::fs::write(
        dir.join("train_report.json"),
        serde_json::to_string_pretty(&artifacts.report).expect("report serializes"),
    )
    .map_err(io_err)?;
    std::fs::write(
        dir.join("metrics.json"),
        serde_json::to_string_pretty(&artifacts.metrics).expect("metrics serialize"),
    )
    .map_err(io_err)?;
    std::fs::write(dir.join("config.toml"), config.to_toml()).map_err(io_err)?;
    meshgen::export_obj(&artifacts.mesh3, dir.join("mesh.obj"))
        .map_err(|e| PipelineError::stage("output", e, ""))?;
    meshgen::export_ply(&artifacts.mesh3, dir.join("mesh.ply"))
        .map_err(|e| PipelineError::stage("output", e, ""))?;
    Ok(())
}

/// Benchmark result: the NN-output error against parametric ground truth
/// (the boundary/mesh stages are skipped unless `full_pipeline` is set).
pub fn benchmark_row(config: &PipelineConfig, full_pipeline: bool) -> MetricsRow {
    let started = Instant::now();
    let fail = |message: String| MetricsRow {
        dataset: config.dataset.name(),
        method: "isomap".into(),
        points: 0,
        mse: f64::NAN,
        layers: 0,
        neurons: String::new(),
        epochs: config.train.epochs,
        seconds: started.elapsed().as_secs_f64(),
        error: Some(message),
    };

    if full_pipeline {
        return match run(config) {
            Ok(artifacts) => artifacts.metrics,
            Err(e) => fail(e.to_string()),
        };
    }

    let (cloud, truth) = match generate_dataset(&config.dataset, config.seed) {
        Ok(v) => v,
        Err(e) => return fail(e.to_string()),
    };
    let embedding = match embedding::isomap(&cloud, config.embedding.k) {
        Ok(v) => v,
        Err(e) => return fail(e.to_string()),
    };
    let pairs: Vec<Sample> =
        embedding.coords.iter().zip(&cloud.points).map(|(p, y)| (*p, *y)).collect();
    let train_cfg = config.train.to_train_config(config.seed);
    let (best, report) = match neuralnet::adaptive_search(&pairs, &train_cfg) {
        Ok(v) => v,
        Err(e) => return fail(e.to_string()),
    };
    let network =
        match neuralnet::finalize(&best, &report, &pairs, config.train.retrain, &train_cfg) {
            Ok(v) => v,
            Err(e) => return fail(e.to_string()),
        };
    let mse = match &truth {
        Some(t) => match evaluate_vs_truth(&network, &embedding, t) {
            Ok(v) => v,
            Err(e) => return fail(e.to_string()),
        },
        None => report.final_mse,
    };
    MetricsRow {
        dataset: config.dataset.name(),
        method: "isomap".into(),
        points: cloud.len(),
        mse,
        layers: report.best_topology.hidden.len(),
        neurons: report
            .best_topology
            .hidden
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("-"),
        epochs: config.train.epochs,
        seconds: started.elapsed().as_secs_f64(),
        error: None,
    }
}

/// Runs every config (rows in parallel, output ordered by config index),
/// recording failures as failed rows instead of aborting the harness.
pub fn benchmark(configs: &[PipelineConfig], full_pipeline: bool) -> Vec<MetricsRow> {
    configs
        .par_iter()
        .map(|cfg| benchmark_row(cfg, full_pipeline))
        .collect()
}

/// CSV with the fixed column set.
pub fn benchmark_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("dataset,method,points,mse,layers,neurons,epochs,seconds\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.dataset, r.method, r.points, r.mse, r.layers, r.neurons, r.epochs, r.seconds
        ));
    }
    out
}

/// Aligned text table, with failures listed beneath.
pub fn benchmark_table(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:<8} {:>7} {:>12} {:>7} {:>9} {:>7} {:>9}\n",
        "dataset", "method", "points", "mse", "layers", "neurons", "epochs", "seconds"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<12} {:<8} {:>7} {:>12.6} {:>7} {:>9} {:>7} {:>9.2}\n",
            r.dataset, r.method, r.points, r.mse, r.layers, r.neurons, r.epochs, r.seconds
        ));
    }
    let failures: Vec<&MetricsRow> = rows.iter().filter(|r| r.error.is_some()).collect();
    if !failures.is_empty() {
        out.push('\n');
        for r in failures {
            out.push_str(&format!(
                "FAILED {}: {}\n",
                r.dataset,
                r.error.as_deref().unwrap_or("unknown")
            ));
        }
    }
    out
}

/// Benchmark suite file: a list of `[[run]]` tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSuite {
    pub run: Vec<PipelineConfig>,
}

impl BenchSuite {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.as_ref().display())))?;
        toml::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planar_config(seed: u64) -> PipelineConfig {
        // A flat torus-free dataset is not available as a generator, so use
        // a shallow torus patch: nearly planar, fast to run.
        PipelineConfig {
            seed,
            output_dir: None,
            dataset: DatasetSpec::Torus {
                big_radius: 2.0,
                small_radius: 1.0,
                theta_range: (0.0, std::f64::consts::FRAC_PI_2),
                gamma_range: (0.0, std::f64::consts::FRAC_PI_2),
                n_theta: 10,
                n_gamma: 10,
                noise_sigma: 0.0,
            },
            embedding: EmbeddingSection { k: 12 },
            train: TrainSection { epochs: 20, ..TrainSection::default() },
            boundary: BoundarySection::default(),
            spline: SplineSection::default(),
            mesh: MeshSection::default(),
        }
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let text = r#"
            seed = 7
            [dataset]
            kind = "scurve"
            n = 120
        "#;
        let cfg = PipelineConfig::from_toml(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.embedding.k, 12);
        assert_eq!(cfg.train.max_layers, 3);
        assert_eq!(cfg.train.max_neurons, 6);
        assert_eq!(cfg.train.epochs, 20);
        assert_eq!(cfg.train.patience, 3);
        assert_eq!(cfg.boundary.corners, 8);
        assert_eq!(cfg.spline.lambda, splinefit::DEFAULT_LAMBDA);
        match cfg.dataset {
            DatasetSpec::Scurve { n, .. } => assert_eq!(n, 120),
            other => panic!("wrong dataset {other:?}"),
        }

        let echoed = cfg.to_toml();
        let back = PipelineConfig::from_toml(&echoed).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_config_is_a_config_error() {
        match PipelineConfig::from_toml("[dataset]\nkind = \"nonexistent\"") {
            Err(PipelineError::Config(_)) => {}
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn torus_run_completes_and_reports_metrics() {
        let config = planar_config(42);
        let artifacts = run(&config).unwrap();
        assert_eq!(artifacts.cloud.len(), 100);
        assert_eq!(artifacts.embedding.coords.len(), 100);
        assert!(artifacts.metrics.mse.is_finite());
        assert!(!artifacts.mesh3.triangles.is_empty());
        assert_eq!(artifacts.mesh2.triangles, artifacts.mesh3.triangles);
        assert!(artifacts.metrics.layers >= 1 && artifacts.metrics.layers <= 3);
    }

    #[test]
    fn evaluate_vs_truth_matches_mse_on_truth_targets() {
        let config = planar_config(3);
        let artifacts = run(&config).unwrap();
        let truth = artifacts.truth.as_ref().unwrap();
        let direct = evaluate_vs_truth(&artifacts.network, &artifacts.embedding, truth).unwrap();
        let pairs: Vec<Sample> = artifacts
            .embedding
            .coords
            .iter()
            .zip(truth)
            .map(|(p, gt)| (*p, gt.point))
            .collect();
        assert_eq!(direct, neuralnet::mse(&artifacts.network, &pairs));
    }

    #[test]
    fn constant_output_network_mse_approximates_variance() {
        // A zero-weight linear network outputs the constant output-map
        // center; against centered unit-variance-ish truth the MSE is the
        // per-scalar variance around that constant.
        let config = planar_config(9);
        let artifacts = run(&config).unwrap();
        let truth = artifacts.truth.as_ref().unwrap();
        let mut net = artifacts.network.clone();
        for layer in &mut net.layers {
            for row in &mut layer.weights {
                row.iter_mut().for_each(|w| *w = 0.0);
            }
            layer.biases.iter_mut().for_each(|b| *b = 0.0);
        }
        let constant = net.forward(Point2::new(0.0, 0.0));
        let expect: f64 = truth
            .iter()
            .map(|gt| {
                (gt.point.x - constant.x).powi(2)
                    + (gt.point.y - constant.y).powi(2)
                    + (gt.point.z - constant.z).powi(2)
            })
            .sum::<f64>()
            / (3.0 * truth.len() as f64);
        let got = evaluate_vs_truth(&net, &artifacts.embedding, truth).unwrap();
        approx::assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
    }

    #[test]
    fn benchmark_records_failures_without_aborting() {
        let good = planar_config(5);
        let mut bad = planar_config(5);
        bad.dataset = DatasetSpec::Xyz { path: "/nonexistent/cloud.xyz".into(), noise_sigma: 0.0 };
        let rows = benchmark(&[bad, good], false);
        assert_eq!(rows.len(), 2);
        assert!(rows[0].error.is_some());
        assert!(rows[0].mse.is_nan());
        assert!(rows[1].error.is_none());
        assert!(rows[1].mse.is_finite());

        let csv = benchmark_csv(&rows);
        assert!(csv.starts_with("dataset,method,points,mse,layers,neurons,epochs,seconds\n"));
        assert_eq!(csv.lines().count(), 3);
        let table = benchmark_table(&rows);
        assert!(table.contains("FAILED"));
    }

    #[test]
    fn full_pipeline_benchmark_row_includes_mesh_stages() {
        let config = planar_config(8);
        let row = benchmark_row(&config, true);
        assert!(row.error.is_none(), "{:?}", row.error);
        assert!(row.mse.is_finite());
        assert_eq!(row.points, 100);
    }

    #[test]
    fn median_nn_distance_of_grid_is_pitch() {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                pts.push(Point2::new(i as f64 * 0.3, j as f64 * 0.3));
            }
        }
        let d = median_nn_distance(&PointCloud2::new(pts));
        approx::assert_abs_diff_eq!(d, 0.3, epsilon = 1e-12);
    }
}
