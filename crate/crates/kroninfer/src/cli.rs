//! Command implementations behind the `kroninfer` binary: graph generation,
//! inference, and the three figure datasets as CSV artifacts.
//!
//! Every command is deterministic given its configuration: seeds are
//! explicit, sweep rows are sorted by (d, seed) before writing, and numbers
//! are printed with 17 significant digits so reruns overwrite identical
//! bytes. Wall-clock timing never reaches an output file.

use crate::denoise;
use crate::error::{KronError, Result};
use crate::graph::{self, io as gio, InitiatorParams};
use crate::linalg;
use crate::pipeline::{self, RunParams};
use crate::rmt::{self, NoiseScale};
use crate::solve::SparseVec;
use crate::tensor::{io as tio, EvenTensor};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Full CLI run configuration: the pipeline run parameters plus output and
/// sweep controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub base: RunParams,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
    /// Sweep sizes; each must be a power of q = m * l.
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            base: RunParams::default(),
            output_dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
            sizes: vec![256, 512, 1024, 2048, 4096],
            seeds: vec![1, 2, 3, 4, 5],
            jobs: 1,
        }
    }
}

/// Flag-level overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub sizes: Option<Vec<usize>>,
    pub jobs: Option<usize>,
    pub replication: Option<u32>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> CliResult<RunConfig> {
        let mut cfg = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(KronError::Io)?;
                serde_json::from_str(&text)
                    .map_err(|e| KronError::Malformed(format!("config {}: {e}", p.display())))?
            }
        };
        if let Some(out) = &overrides.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = overrides.seed {
            cfg.base.seed = seed;
            cfg.seeds = vec![seed];
        }
        if let Some(sizes) = &overrides.sizes {
            cfg.sizes = sizes.clone();
        }
        if let Some(jobs) = overrides.jobs {
            cfg.jobs = jobs.max(1);
        }
        if let Some(k) = overrides.replication {
            cfg.base.k = Some(k);
        }
        if cfg.sizes.is_empty() || cfg.seeds.is_empty() {
            return Err(CliError::Usage("sizes and seeds must be non-empty".into()));
        }
        let mut sizes = cfg.sizes.clone();
        sizes.sort_unstable();
        sizes.dedup();
        cfg.sizes = sizes;
        Ok(cfg)
    }

    fn require_k(&self) -> CliResult<u32> {
        self.base.k.ok_or_else(|| {
            CliError::Usage(
                "replication depth K is required: set \"k\" in the config or pass -K/--replication"
                    .into(),
            )
        })
    }
}

// ---------------------------------------------------------------------------
// CLI error with exit-code mapping
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Kron(KronError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Kron(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<KronError> for CliError {
    fn from(e: KronError) -> Self {
        CliError::Kron(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Exit codes: 0 ok, 2 I/O, 3 solver divergence, 4 malformed input, 64 usage.
pub fn exit_code(err: &CliError) -> i32 {
    match err {
        CliError::Usage(_) => 64,
        CliError::Kron(KronError::Io(_)) => 2,
        CliError::Kron(KronError::Divergence { .. }) => 3,
        CliError::Kron(_) => 4,
    }
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct GenSummary {
    pub d: usize,
    pub edges: u64,
    pub density: f64,
    pub edge_file: PathBuf,
    pub meta_file: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dense_file: Option<PathBuf>,
}

/// Generates a sample and writes the edge list plus JSON sidecar (and a dense
/// KTEN1 adjacency with `dense = true`). Uses the streaming sampler, so the
/// dense probability tensor is only materialized in dense mode.
pub fn cmd_gen(cfg: &RunConfig, flat: bool, dense: bool) -> CliResult<GenSummary> {
    let k = cfg.require_k()?;
    let params = cfg.base.initiator(k)?;
    let d = params.d();
    let seed = cfg.base.seed;
    let perm = graph::random_sparse_permutation(
        d,
        cfg.base.permutation_s,
        crate::rng::derive_seed(seed, graph::PERM_SEED_TAG),
    )?;
    fs::create_dir_all(&cfg.output_dir).map_err(KronError::Io)?;
    let edge_file = cfg.output_dir.join("graph_edges.txt");
    let meta_file = sidecar_path(&edge_file);
    let header = gio::EdgeListHeader {
        d,
        m: params.m(),
        l: params.l(),
        k,
        seed,
    };
    let mut w = std::io::BufWriter::new(fs::File::create(&edge_file).map_err(KronError::Io)?);
    writeln!(w, "{}", gio::format_header(&header)).map_err(KronError::Io)?;
    let edges = graph::sample_adjacency_streaming(&params, seed, &perm, |u, v| {
        gio::write_edge_line(&mut w, &header, u, v, flat)
    })?;
    w.flush().map_err(KronError::Io)?;

    let sample_for_meta = graph::GraphSample {
        adjacency: EvenTensor::zeros(vec![1, 1], vec![1, 1]), // adjacency not needed for metadata
        permutation: perm.clone(),
        seed,
        truth: Some(params.clone()),
    };
    let meta = gio::SampleMeta::for_sample(&sample_for_meta, params.m(), params.l(), k);
    let meta = gio::SampleMeta { d, ..meta };
    write_json_file(&meta_file, &meta)?;

    let dense_file = if dense {
        let pk = graph::probability_tensor(&params)?;
        let sample = graph::sample_adjacency(&pk, seed, &perm)?;
        let path = cfg.output_dir.join("graph_adjacency.kten1");
        tio::write_kten1_file(&path, &sample.adjacency)?;
        Some(path)
    } else {
        None
    };

    Ok(GenSummary {
        d,
        edges,
        density: edges as f64 / (d as f64 * d as f64),
        edge_file,
        meta_file,
        dense_file,
    })
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct InferenceJson<'a> {
    m: usize,
    l: usize,
    k: u32,
    p_hat: f64,
    pk_hat: f64,
    rank_cap: usize,
    kept: usize,
    /// Row-major entries of mat(X_hat).
    x_hat_row_major: Vec<f64>,
    d_hat: &'a SparseVec,
    iterations: usize,
    residual_history: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate_kten1: Option<String>,
}

fn canonical_to_row_major(q: usize, canonical: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; q * q];
    for b in 0..q {
        for a in 0..q {
            out[a * q + b] = canonical[a + b * q];
        }
    }
    out
}

/// Runs inference either on a generated sample (no input path) or on an edge
/// list read from disk, with the truth sidecar `<input>.meta.json` picked up
/// when present. Writes `inference.json` and returns its path.
pub fn cmd_infer(cfg: &RunConfig, input: Option<&Path>, dense: bool) -> CliResult<PathBuf> {
    let (sample, k) = match input {
        None => {
            let k = cfg.require_k()?;
            let params = cfg.base.initiator(k)?;
            (
                graph::generate_sample(&params, cfg.base.seed, cfg.base.permutation_s)?,
                k,
            )
        }
        Some(path) => {
            let file = fs::File::open(path).map_err(KronError::Io)?;
            let (header, adjacency) = gio::read_edge_list(std::io::BufReader::new(file))?;
            let k = cfg.base.k.unwrap_or(header.k);
            let sidecar = sidecar_path(path);
            let sample = if sidecar.is_file() {
                let text = fs::read_to_string(&sidecar).map_err(KronError::Io)?;
                let meta: gio::SampleMeta = serde_json::from_str(&text).map_err(|e| {
                    KronError::Malformed(format!("sidecar {}: {e}", sidecar.display()))
                })?;
                graph::GraphSample {
                    adjacency,
                    permutation: meta.permutation()?,
                    seed: meta.seed,
                    truth: meta.truth_params()?,
                }
            } else {
                let d = header.d;
                graph::GraphSample {
                    adjacency,
                    permutation: graph::Permutation::identity(d),
                    seed: header.seed,
                    truth: None,
                }
            };
            (sample, k)
        }
    };

    let result = pipeline::infer(&sample, k, &cfg.base.solver, cfg.base.rank_cap)?;
    fs::create_dir_all(&cfg.output_dir).map_err(KronError::Io)?;

    let estimate_kten1 = if dense {
        let path = cfg.output_dir.join("inference_estimate.kten1");
        tio::write_kten1_file(&path, &result.denoise.estimate)?;
        Some("inference_estimate.kten1".to_string())
    } else {
        None
    };

    // timing is reported on stderr, never serialized: output bytes must be
    // identical across reruns
    let mut metrics = result.metrics.clone();
    if let Some(map) = metrics.as_mut() {
        if let Some(wall) = map.remove("wall_time_seconds") {
            eprintln!("inference wall time: {wall:.3}s");
        }
    }
    let json = InferenceJson {
        m: result.m,
        l: result.l,
        k: result.k,
        p_hat: result.p_hat,
        pk_hat: result.denoise.pk_hat,
        rank_cap: result.denoise.rank_cap,
        kept: result.denoise.kept,
        x_hat_row_major: canonical_to_row_major(result.m * result.l, &result.x_hat),
        d_hat: &result.solve.d_hat,
        iterations: result.solve.iterations,
        residual_history: &result.solve.residual_history,
        metrics,
        estimate_kten1,
    };
    let out = cfg.output_dir.join("inference.json");
    write_json_file(&out, &json)?;
    Ok(out)
}

fn sidecar_path(input: &Path) -> PathBuf {
    let mut name = input.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    input.with_file_name(name)
}

// ---------------------------------------------------------------------------
// figure sweeps
// ---------------------------------------------------------------------------

/// One grid point of the shrinkage figure.
#[derive(Debug, Clone, Copy)]
pub struct ShrinkageRow {
    pub d: usize,
    pub seed: u64,
    pub empirical: f64,
    pub theory: f64,
}

/// Sum of the asymptotic per-component errors over the exact signal
/// spectrum; the deterministic theory curve of the shrinkage figure.
pub fn shrinkage_theory(params: &InitiatorParams) -> Result<f64> {
    let pk = params.p().powi(params.k() as i32);
    let scale = NoiseScale::new(pk)?;
    Ok(graph::signal_singular_values(params)?
        .iter()
        .map(|&s| rmt::asymptotic_error(s, &scale))
        .sum())
}

/// Generates one sample and compares the shrinkage estimate against the
/// permuted signal in squared Frobenius norm.
pub fn shrinkage_point(base: &RunParams, d: usize, seed: u64) -> Result<ShrinkageRow> {
    let k = base.depth_for_size(d)?;
    let params = base.initiator(k)?;
    let sample = graph::generate_sample(&params, seed, base.permutation_s)?;
    let pk_hat = denoise::estimate_pk(&sample.adjacency);
    let abar = denoise::center_adjacency(&sample.adjacency, pk_hat);
    let rank_cap = base
        .rank_cap
        .unwrap_or_else(|| denoise::default_rank_cap(params.q(), k));
    let report = denoise::shrinkage_estimate(&abar, pk_hat, k, rank_cap)?;
    let signal_pi = sample
        .permutation
        .conjugate(&graph::signal_tensor(&params)?)?;
    let empirical: f64 = report
        .estimate
        .data()
        .iter()
        .zip(signal_pi.data())
        .map(|(a, b)| {
            let r = a - b;
            r * r
        })
        .sum();
    Ok(ShrinkageRow {
        d,
        seed,
        empirical,
        theory: shrinkage_theory(&params)?,
    })
}

/// Columns: d, seed, empirical_error, theory_error.
pub fn cmd_fig_shrinkage(cfg: &RunConfig) -> CliResult<PathBuf> {
    let points = grid(cfg);
    let rows = run_grid(cfg.jobs, &points, |&(d, seed)| {
        shrinkage_point(&cfg.base, d, seed)
    })?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.d.to_string(),
                r.seed.to_string(),
                fmt_f64(r.empirical),
                fmt_f64(r.theory),
            ]
        })
        .collect();
    write_table(
        cfg,
        "fig_shrinkage",
        &["d", "seed", "empirical_error", "theory_error"],
        &table,
    )
}

/// Operator-norm residual of the signal-plus-noise decomposition at one
/// grid point.
pub fn opnorm_point(base: &RunParams, d: usize, seed: u64) -> Result<f64> {
    let k = base.depth_for_size(d)?;
    let params = base.initiator(k)?;
    let sample = graph::generate_sample(&params, seed, base.permutation_s)?;
    let pk_hat = denoise::estimate_pk(&sample.adjacency);
    pipeline::decomposition_residual(&sample, &params, pk_hat)
}

/// Columns: d, seed, opnorm_residual.
pub fn cmd_fig_opnorm(cfg: &RunConfig) -> CliResult<PathBuf> {
    let points = grid(cfg);
    let rows = run_grid(cfg.jobs, &points, |&(d, seed)| {
        opnorm_point(&cfg.base, d, seed).map(|r| (d, seed, r))
    })?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|(d, seed, r)| vec![d.to_string(), seed.to_string(), fmt_f64(*r)])
        .collect();
    write_table(
        cfg,
        "fig_opnorm",
        &["d", "seed", "opnorm_residual"],
        &table,
    )
}

/// Spectrum data at one size: normalized singular values of the centered
/// adjacency, the limiting law sampled on a grid, and the predicted spike
/// locations of the planted signal (all in units of sqrt(p(1-p))).
#[derive(Debug, Clone)]
pub struct SpectrumData {
    pub normalized: Vec<f64>,
    pub law: Vec<(f64, f64)>,
    pub spikes: Vec<(f64, f64)>,
}

pub const SPECTRUM_LAW_POINTS: usize = 200;

pub fn spectrum_point(base: &RunParams, d: usize, seed: u64) -> Result<SpectrumData> {
    let k = base.depth_for_size(d)?;
    let params = base.initiator(k)?;
    let sample = graph::generate_sample(&params, seed, base.permutation_s)?;
    let pk_hat = denoise::estimate_pk(&sample.adjacency);
    let abar = denoise::center_adjacency(&sample.adjacency, pk_hat);
    let scale = NoiseScale::new(pk_hat)?;
    let sv = linalg::singular_values(abar.as_faer())?;
    let normalized: Vec<f64> = sv.iter().map(|s| s / scale.sigma()).collect();
    // the law in normalized coordinates is supported on [0, 2]
    let law: Vec<(f64, f64)> = (0..SPECTRUM_LAW_POINTS)
        .map(|j| {
            let x = 2.0 * j as f64 / (SPECTRUM_LAW_POINTS - 1) as f64;
            let pdf = scale.sigma() * rmt::quarter_circle_pdf(scale.sigma() * x, &scale);
            (x, pdf)
        })
        .collect();
    let spikes: Vec<(f64, f64)> = graph::signal_spike_strengths(&params)?
        .into_iter()
        .filter(|&ell| ell > 1e-10)
        .map(|ell| {
            let loc = if ell > 1.0 { ell + 1.0 / ell } else { 2.0 };
            (ell, loc)
        })
        .collect();
    Ok(SpectrumData {
        normalized,
        law,
        spikes,
    })
}

/// Emits the singular-value table plus the law and spike side tables. Uses
/// the largest configured size and the first seed.
pub fn cmd_fig_spectrum(cfg: &RunConfig) -> CliResult<PathBuf> {
    let d = *cfg.sizes.last().expect("validated non-empty");
    let seed = cfg.seeds[0];
    let data = spectrum_point(&cfg.base, d, seed)?;
    let values: Vec<Vec<String>> = data
        .normalized
        .iter()
        .map(|v| vec![fmt_f64(*v)])
        .collect();
    let main = write_table(cfg, "fig_spectrum", &["singular_value_normalized"], &values)?;
    let law: Vec<Vec<String>> = data
        .law
        .iter()
        .map(|(x, p)| vec![fmt_f64(*x), fmt_f64(*p)])
        .collect();
    write_table(cfg, "fig_spectrum_law", &["x", "pdf"], &law)?;
    let spikes: Vec<Vec<String>> = data
        .spikes
        .iter()
        .map(|(ell, loc)| vec![fmt_f64(*ell), fmt_f64(*loc)])
        .collect();
    write_table(cfg, "fig_spectrum_spikes", &["ell", "predicted_location"], &spikes)?;
    Ok(main)
}

// ---------------------------------------------------------------------------
// sweep plumbing
// ---------------------------------------------------------------------------

fn grid(cfg: &RunConfig) -> Vec<(usize, u64)> {
    let mut points = Vec::new();
    for &d in &cfg.sizes {
        for &seed in &cfg.seeds {
            points.push((d, seed));
        }
    }
    // rows are emitted in this order; keep it sorted by (d, seed)
    points.sort_unstable();
    points
}

/// Runs grid points, optionally across a bounded thread pool. The output
/// order is the input order, so concurrency never changes bytes.
fn run_grid<P: Sync, T: Send>(
    jobs: usize,
    points: &[P],
    f: impl Fn(&P) -> Result<T> + Send + Sync,
) -> CliResult<Vec<T>> {
    if jobs <= 1 {
        return points.iter().map(|p| f(p).map_err(CliError::from)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| KronError::Numerical(format!("thread pool: {e}")))?;
    let results: Result<Vec<T>> = pool.install(|| points.par_iter().map(&f).collect());
    results.map_err(CliError::from)
}

/// 17 significant digits: round-trip safe for f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_table(
    cfg: &RunConfig,
    stem: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> CliResult<PathBuf> {
    fs::create_dir_all(&cfg.output_dir).map_err(KronError::Io)?;
    match cfg.format {
        OutputFormat::Csv => {
            let path = cfg.output_dir.join(format!("{stem}.csv"));
            let mut text = String::new();
            text.push_str(&header.join(","));
            text.push('\n');
            for row in rows {
                text.push_str(&row.join(","));
                text.push('\n');
            }
            fs::write(&path, text).map_err(KronError::Io)?;
            Ok(path)
        }
        OutputFormat::Json => {
            let path = cfg.output_dir.join(format!("{stem}.json"));
            let objects: Vec<BTreeMap<&str, &str>> = rows
                .iter()
                .map(|row| header.iter().copied().zip(row.iter().map(|s| s.as_str())).collect())
                .collect();
            write_json_file(&path, &objects)?;
            Ok(path)
        }
    }
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| KronError::Malformed(format!("serialize: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn small_config(out: &Path) -> RunConfig {
        RunConfig {
            base: RunParams {
                k: Some(4),
                ..RunParams::default()
            },
            output_dir: out.to_path_buf(),
            sizes: vec![16, 64],
            seeds: vec![1, 2],
            jobs: 1,
            format: OutputFormat::Csv,
        }
    }

    #[test]
    fn gen_round_trips_through_reader() {
        let dir = tempdir().unwrap();
        let cfg = small_config(dir.path());
        let summary = cmd_gen(&cfg, false, true).unwrap();
        assert_eq!(summary.d, 16);
        assert!(summary.edges > 0);
        let file = fs::File::open(&summary.edge_file).unwrap();
        let (header, adj) = gio::read_edge_list(std::io::BufReader::new(file)).unwrap();
        assert_eq!(header.d, 16);
        // dense KTEN1 written from the same seed matches the edge list
        let dense = tio::read_kten1_file(summary.dense_file.as_ref().unwrap()).unwrap();
        assert_eq!(dense.data(), adj.data());
        // flat format reads back identically
        let cfg_flat = RunConfig {
            output_dir: dir.path().join("flat"),
            ..cfg
        };
        let s2 = cmd_gen(&cfg_flat, true, false).unwrap();
        let file = fs::File::open(&s2.edge_file).unwrap();
        let (_, adj_flat) = gio::read_edge_list(std::io::BufReader::new(file)).unwrap();
        assert_eq!(adj_flat.data(), adj.data());
    }

    #[test]
    fn gen_density_is_plausible() {
        // d = 16, p = 0.5, X = 0 (single-level initiator): density in [0.3, 0.7]
        let dir = tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.base.m = 16;
        cfg.base.p = 0.5;
        cfg.base.x = vec![0.0; 256];
        cfg.base.k = Some(1);
        let summary = cmd_gen(&cfg, false, false).unwrap();
        assert_eq!(summary.d, 16);
        assert!(
            (0.3..=0.7).contains(&summary.density),
            "density {}",
            summary.density
        );

        // replicated initiator: density concentrates near p^K
        let mut cfg = small_config(dir.path());
        cfg.base.p = 0.5;
        cfg.base.x = vec![0.0; 4];
        cfg.base.k = Some(4);
        let summary = cmd_gen(&cfg, false, false).unwrap();
        let pk = 0.5f64.powi(4);
        assert!(
            (summary.density - pk).abs() < 0.05,
            "density {} vs p^K {pk}",
            summary.density
        );
    }

    #[test]
    fn gen_requires_k() {
        let dir = tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.base.k = None;
        match cmd_gen(&cfg, false, false) {
            Err(CliError::Usage(_)) => {}
            other => panic!("expected usage error, got {other:?}"),
        }
    }

    #[test]
    fn infer_writes_deterministic_json() {
        let dir = tempdir().unwrap();
        let cfg = small_config(dir.path());
        let path = cmd_infer(&cfg, None, false).unwrap();
        let first = fs::read(&path).unwrap();
        let path2 = cmd_infer(&cfg, None, false).unwrap();
        let second = fs::read(&path2).unwrap();
        assert_eq!(first, second, "inference.json must be byte-identical");
        let value: serde_json::Value = serde_json::from_slice(&first).unwrap();
        assert!(value["p_hat"].as_f64().unwrap() > 0.0);
        assert!(value["metrics"]["x_rel_error"].as_f64().is_some());
        assert!(value["metrics"]["wall_time_seconds"].is_null());
    }

    #[test]
    fn infer_from_file_without_sidecar_has_no_metrics() {
        let dir = tempdir().unwrap();
        let cfg = small_config(dir.path());
        let summary = cmd_gen(&cfg, false, false).unwrap();
        fs::remove_file(&summary.meta_file).unwrap();
        let out = cmd_infer(&cfg, Some(&summary.edge_file), false).unwrap();
        let value: serde_json::Value =
            serde_json::from_slice(&fs::read(out).unwrap()).unwrap();
        assert!(value["metrics"].is_null());
        // with the sidecar present, metrics come back
        cmd_gen(&cfg, false, false).unwrap();
        let out = cmd_infer(&cfg, Some(&summary.edge_file), false).unwrap();
        let value: serde_json::Value =
            serde_json::from_slice(&fs::read(out).unwrap()).unwrap();
        assert!(value["metrics"]["x_rel_error"].as_f64().is_some());
    }

    #[test]
    fn fig_tables_have_exact_headers_and_shape() {
        let dir = tempdir().unwrap();
        let cfg = small_config(dir.path());
        let path = cmd_fig_shrinkage(&cfg).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("d,seed,empirical_error,theory_error"));
        assert_eq!(lines.count(), 4); // 2 sizes x 2 seeds

        let path = cmd_fig_opnorm(&cfg).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("d,seed,opnorm_residual\n"));

        let path = cmd_fig_spectrum(&cfg).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("singular_value_normalized\n"));
        assert_eq!(text.lines().count(), 1 + 64); // header + d values
        let law = fs::read_to_string(dir.path().join("fig_spectrum_law.csv")).unwrap();
        assert!(law.starts_with("x,pdf\n"));
        assert_eq!(law.lines().count(), 1 + SPECTRUM_LAW_POINTS);
    }

    #[test]
    fn theory_column_is_seed_independent() {
        let dir = tempdir().unwrap();
        let cfg = small_config(dir.path());
        let r1 = shrinkage_point(&cfg.base, 64, 1).unwrap();
        let r2 = shrinkage_point(&cfg.base, 64, 99).unwrap();
        assert_eq!(r1.theory, r2.theory);
        assert_ne!(r1.empirical, r2.empirical);
    }

    #[test]
    fn jobs_do_not_change_bytes() {
        let dir = tempdir().unwrap();
        let cfg1 = small_config(&dir.path().join("a"));
        let cfg4 = RunConfig {
            jobs: 4,
            output_dir: dir.path().join("b"),
            ..cfg1.clone()
        };
        let p1 = cmd_fig_opnorm(&cfg1).unwrap();
        let p4 = cmd_fig_opnorm(&cfg4).unwrap();
        assert_eq!(fs::read(p1).unwrap(), fs::read(p4).unwrap());
    }

    #[test]
    fn json_format_emits_objects() {
        let dir = tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.format = OutputFormat::Json;
        let path = cmd_fig_opnorm(&cfg).unwrap();
        assert!(path.extension().unwrap() == "json");
        let value: serde_json::Value =
            serde_json::from_slice(&fs::read(path).unwrap()).unwrap();
        assert_eq!(value.as_array().unwrap().len(), 4);
        assert!(value[0]["opnorm_residual"].is_string());
    }

    #[test]
    fn config_overrides_apply() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("config.json");
        fs::write(&path, r#"{"p": 0.6, "sizes": [16], "seeds": [7]}"#).unwrap();
        let overrides = Overrides {
            seed: Some(9),
            sizes: Some(vec![64, 16]),
            jobs: Some(3),
            ..Overrides::default()
        };
        let cfg = RunConfig::load(Some(&path), &overrides).unwrap();
        assert_eq!(cfg.base.p, 0.6);
        assert_eq!(cfg.base.seed, 9);
        assert_eq!(cfg.seeds, vec![9]);
        assert_eq!(cfg.sizes, vec![16, 64]); // sorted, deduped
        assert_eq!(cfg.jobs, 3);
        // malformed config maps to exit code 4
        fs::write(&path, "{not json").unwrap();
        let err = RunConfig::load(Some(&path), &Overrides::default()).unwrap_err();
        assert_eq!(exit_code(&err), 4);
    }

    #[test]
    fn exit_codes_map() {
        assert_eq!(exit_code(&CliError::Usage("x".into())), 64);
        assert_eq!(
            exit_code(&CliError::Kron(KronError::Io(std::io::Error::other("x")))),
            2
        );
        assert_eq!(
            exit_code(&CliError::Kron(KronError::Divergence {
                eta: 0.5,
                iteration: 1
            })),
            3
        );
        assert_eq!(
            exit_code(&CliError::Kron(KronError::Malformed("x".into()))),
            4
        );
    }
}
