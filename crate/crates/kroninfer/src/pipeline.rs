//! Meta-algorithm: estimate the density, denoise the adjacency, and solve the
//! permuted linear regression, plus evaluation metrics against synthetic
//! ground truth.

use crate::denoise::{self, DenoiseReport};
use crate::error::{KronError, Result};
use crate::graph::{self, GraphSample, InitiatorParams, ThetaOperator};
use crate::linalg;
use crate::solve::{self, SolveConfig, SolveResult};
use crate::tensor::EvenTensor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;

/// Full inference output. `metrics` is present only when the sample carries
/// ground truth.
#[derive(Debug, Clone)]
pub struct InferenceResult {
    pub p_hat: f64,
    /// Canonical vec(mat(X_hat)).
    pub x_hat: Vec<f64>,
    pub denoise: DenoiseReport,
    pub solve: SolveResult,
    pub metrics: Option<BTreeMap<String, f64>>,
    pub m: usize,
    pub l: usize,
    pub k: u32,
}

/// Base JSON run configuration shared by the pipeline and the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunParams {
    pub m: usize,
    pub l: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    pub p: f64,
    /// Row-major entries of mat(X), q^2 values.
    pub x: Vec<f64>,
    pub seed: u64,
    pub permutation_s: usize,
    pub solver: SolveConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_cap: Option<usize>,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            m: 2,
            l: 1,
            k: None,
            p: 0.8,
            x: vec![-5.5, 5.5, -1.5, 1.5],
            seed: 42,
            permutation_s: 0,
            solver: SolveConfig::default(),
            rank_cap: None,
        }
    }
}

impl RunParams {
    pub fn q(&self) -> usize {
        self.m * self.l
    }

    /// Initiator parameters at the given replication depth.
    pub fn initiator(&self, k: u32) -> Result<InitiatorParams> {
        let x = graph::x_from_row_major(self.m, self.l, &self.x)?;
        InitiatorParams::new(self.p, x, k)
    }

    /// Replication depth such that q^K = d, if one exists.
    pub fn depth_for_size(&self, d: usize) -> Result<u32> {
        let q = self.q();
        let mut acc = 1usize;
        for k in 1..=64u32 {
            acc = acc.checked_mul(q).ok_or_else(|| {
                KronError::InvalidParameter(format!("size {d} is not a power of q = {q}"))
            })?;
            if acc == d {
                return Ok(k);
            }
            if acc > d {
                break;
            }
        }
        Err(KronError::InvalidParameter(format!(
            "size {d} is not a power of q = {q}"
        )))
    }
}

/// Integer k-th root: m with m^k = n, if it exists.
fn integer_root(n: usize, k: u32) -> Option<usize> {
    if n == 0 {
        return None;
    }
    let guess = (n as f64).powf(1.0 / k as f64).round() as usize;
    (guess.saturating_sub(1)..=guess + 1).find(|&m| m > 0 && m.checked_pow(k) == Some(n))
}

/// Runs the full inference on a sample: estimate p, center, shrink, solve.
/// The theta operator is built from the *estimated* density.
pub fn infer(
    sample: &GraphSample,
    k: u32,
    solve_config: &SolveConfig,
    rank_cap_override: Option<usize>,
) -> Result<InferenceResult> {
    let start = Instant::now();
    let a = &sample.adjacency;
    let d = a.nrows();
    if a.ncols() != d {
        return Err(KronError::ShapeMismatch {
            context: "infer",
            expected: "square flattening".into(),
            got: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    let dims = a.row_dims();
    if dims.len() != 2 || a.col_dims() != dims {
        return Err(KronError::ShapeMismatch {
            context: "infer",
            expected: "adjacency of shape n x L x n x L".into(),
            got: format!("{:?} x {:?}", a.row_dims(), a.col_dims()),
        });
    }
    let m = integer_root(dims[0], k).ok_or_else(|| KronError::ShapeMismatch {
        context: "infer",
        expected: format!("node count that is a K-th power (K = {k})"),
        got: format!("{}", dims[0]),
    })?;
    let l = integer_root(dims[1], k).ok_or_else(|| KronError::ShapeMismatch {
        context: "infer",
        expected: format!("layer count that is a K-th power (K = {k})"),
        got: format!("{}", dims[1]),
    })?;
    let q = m * l;

    let pk_hat = denoise::estimate_pk(a);
    let abar = denoise::center_adjacency(a, pk_hat);
    let rank_cap = rank_cap_override.unwrap_or_else(|| denoise::default_rank_cap(q, k));
    let report = denoise::shrinkage_estimate(&abar, pk_hat, k, rank_cap)?;
    let theta = ThetaOperator::new(report.p_hat, m, l, k)?;
    let solve_result = solve::solve(report.estimate.data(), &theta, solve_config)?;

    let metrics = match &sample.truth {
        None => None,
        Some(truth) => Some(evaluate_with(
            &solve_result.x_hat,
            &report.estimate,
            &abar,
            truth,
            sample,
        )?),
    };
    let mut result = InferenceResult {
        p_hat: report.p_hat,
        x_hat: solve_result.x_hat.clone(),
        denoise: report,
        solve: solve_result,
        metrics,
        m,
        l,
        k,
    };
    if let Some(metrics) = result.metrics.as_mut() {
        metrics.insert("wall_time_seconds".into(), start.elapsed().as_secs_f64());
    }
    Ok(result)
}

/// Evaluation metrics against ground truth:
/// - `x_rel_error`: ||x_hat - vec(mat(X))|| / ||vec(mat(X))||
/// - `signal_frobenius_error`: ||mat(S_hat) - mat(S_K^pi)||_F^2
/// - `opnorm_residual`: ||Abar - (S_K^pi + Z / sqrt(d))||_2 with
///   Z = A - pi P_K pi^{-1} reconstructed from the truth.
pub fn evaluate(
    result: &InferenceResult,
    truth: &InitiatorParams,
    sample: &GraphSample,
) -> Result<BTreeMap<String, f64>> {
    let pk_hat = result.denoise.pk_hat;
    let abar = denoise::center_adjacency(&sample.adjacency, pk_hat);
    evaluate_with(&result.x_hat, &result.denoise.estimate, &abar, truth, sample)
}

fn evaluate_with(
    x_hat: &[f64],
    estimate: &EvenTensor,
    abar: &EvenTensor,
    truth: &InitiatorParams,
    sample: &GraphSample,
) -> Result<BTreeMap<String, f64>> {
    let d = sample.adjacency.nrows();
    if truth.d() != d {
        return Err(KronError::ShapeMismatch {
            context: "evaluate",
            expected: format!("truth with d = {d}"),
            got: format!("{}", truth.d()),
        });
    }
    let mut metrics = BTreeMap::new();

    // x relative error in the canonical vec
    let x_true = truth.x().data();
    let num: f64 = x_hat
        .iter()
        .zip(x_true)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let den: f64 = x_true.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den > 0.0 {
        metrics.insert("x_rel_error".into(), num / den);
    }

    // signal Frobenius error against the permuted truth
    let signal = graph::signal_tensor(truth)?;
    let signal_pi = sample.permutation.conjugate(&signal)?;
    let frob2: f64 = estimate
        .data()
        .iter()
        .zip(signal_pi.data())
        .map(|(a, b)| {
            let r = a - b;
            r * r
        })
        .sum();
    metrics.insert("signal_frobenius_error".into(), frob2);

    metrics.insert(
        "opnorm_residual".into(),
        residual_opnorm(sample, &signal_pi, abar)?,
    );
    Ok(metrics)
}

/// Operator norm of `Abar - (S_K^pi + Z / sqrt(d))`, with the noise
/// `Z = A - pi P_K pi^{-1}` reconstructed from the ground truth.
pub fn decomposition_residual(
    sample: &GraphSample,
    truth: &InitiatorParams,
    pk_hat: f64,
) -> Result<f64> {
    let abar = denoise::center_adjacency(&sample.adjacency, pk_hat);
    let signal = graph::signal_tensor(truth)?;
    let signal_pi = sample.permutation.conjugate(&signal)?;
    residual_opnorm(sample, &signal_pi, &abar)
}

fn residual_opnorm(
    sample: &GraphSample,
    signal_pi: &EvenTensor,
    abar: &EvenTensor,
) -> Result<f64> {
    let truth = sample.truth.as_ref().ok_or_else(|| {
        KronError::InvalidParameter("decomposition residual needs ground truth".into())
    })?;
    let d = sample.adjacency.nrows();
    let pk = graph::probability_tensor(truth)?;
    let pk_pi = sample.permutation.conjugate(&pk)?;
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let a_data = sample.adjacency.data();
    let residual_data: Vec<f64> = abar
        .data()
        .iter()
        .zip(signal_pi.data().iter().zip(pk_pi.data().iter().zip(a_data)))
        .map(|(&ab, (&s, (&p, &a)))| ab - s - (a - p) * inv_sqrt_d)
        .collect();
    let residual = EvenTensor::new(
        sample.adjacency.row_dims().to_vec(),
        sample.adjacency.col_dims().to_vec(),
        residual_data,
    )?;
    Ok(linalg::operator_norm(residual.as_faer()))
}
