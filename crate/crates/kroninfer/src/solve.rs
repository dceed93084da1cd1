//! Permuted linear regression: recover vec(mat(X)) and the sparse mismatch
//! surrogate D from the denoised signal, by iterative hard thresholding or
//! l1 relaxation.

use crate::error::{KronError, Result};
use crate::graph::{Permutation, ThetaOperator};
use crate::linalg::PinvFactor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Iht,
    Lasso,
}

/// Solver configuration (also the `solver` block of the run config JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub method: SolveMethod,
    /// IHT step length, in (0, 1].
    pub eta: f64,
    /// IHT sparsity budget: max nonzeros of vec(D).
    pub sparsity: usize,
    /// l1 penalty for the convex relaxation.
    pub gamma: f64,
    pub max_iter: usize,
    /// Convergence tolerance on the sup-norm change of x between iterations.
    pub tol: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            method: SolveMethod::Iht,
            eta: 0.5,
            sparsity: 0,
            gamma: 1e-3,
            max_iter: 500,
            tol: 1e-8,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(KronError::InvalidParameter(format!(
                "step length eta must lie in (0,1], got {}",
                self.eta
            )));
        }
        if self.sparsity > d * d {
            return Err(KronError::InvalidParameter(format!(
                "sparsity budget {} exceeds d^2 = {}",
                self.sparsity,
                d * d
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(KronError::InvalidParameter(format!(
                "l1 penalty gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.tol > 0.0) {
            return Err(KronError::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(KronError::InvalidParameter("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Relaxed l0 budget for a permutation displacing `s` of `d` labels: the
/// mismatch support of `(pi (x) pi - I)` has at most `2 s d` rows.
pub fn sparsity_budget(s: usize, d: usize) -> usize {
    2 * s * d
}

/// Sparse view of vec(D): parallel 0-based canonical indices and values.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SparseVec {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn from_dense(v: &[f64]) -> Self {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, &x) in v.iter().enumerate() {
            if x != 0.0 {
                indices.push(i);
                values.push(x);
            }
        }
        SparseVec { indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    /// Canonical vec(mat(X_hat)), length q^2.
    pub x_hat: Vec<f64>,
    /// Sparse vec(D_hat), canonical 0-based indices into the d^2 vector.
    pub d_hat: SparseVec,
    pub iterations: usize,
    /// l2 residual ||s - theta x - D|| after each iteration.
    pub residual_history: Vec<f64>,
    /// Objective value after each iteration (residual^2, plus gamma ||D||_1
    /// for the convex relaxation).
    pub objective_history: Vec<f64>,
}

/// Keeps the `s` largest-magnitude entries, zeroing the rest. Ties keep the
/// lower index.
pub fn hard_threshold_op(v: &[f64], s: usize) -> Vec<f64> {
    if s >= v.len() {
        return v.to_vec();
    }
    let mut out = vec![0.0; v.len()];
    if s == 0 {
        return out;
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| {
        v[b].abs()
            .partial_cmp(&v[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for &i in order.iter().take(s) {
        out[i] = v[i];
    }
    out
}

/// Entrywise sign(v) max(|v| - tau, 0).
pub fn soft_threshold_op(v: &[f64], tau: f64) -> Vec<f64> {
    debug_assert!(tau >= 0.0);
    v.iter()
        .map(|&x| {
            if x > tau {
                x - tau
            } else if x < -tau {
                x + tau
            } else {
                0.0
            }
        })
        .collect()
}

/// Least-squares x from the normal equations: Gram x = theta^T (s - d),
/// solved through the pseudoinverse of theta^T theta.
pub fn ls_solve_x(theta: &ThetaOperator, s_vec: &[f64], d_vec: Option<&[f64]>) -> Result<Vec<f64>> {
    let gram = theta.gram()?;
    let factor = PinvFactor::new(gram.as_ref())?;
    ls_solve_with(theta, &factor, s_vec, d_vec)
}

fn ls_solve_with(
    theta: &ThetaOperator,
    factor: &PinvFactor,
    s_vec: &[f64],
    d_vec: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let rhs = match d_vec {
        None => theta.adjoint(s_vec)?,
        Some(d) => {
            let diff: Vec<f64> = s_vec.iter().zip(d).map(|(a, b)| a - b).collect();
            theta.adjoint(&diff)?
        }
    };
    Ok(factor.solve(&rhs))
}

/// Dispatches on the configured method.
pub fn solve(s_vec: &[f64], theta: &ThetaOperator, config: &SolveConfig) -> Result<SolveResult> {
    match config.method {
        SolveMethod::Iht => iht_solve(s_vec, theta, config),
        SolveMethod::Lasso => lasso_solve(s_vec, theta, config),
    }
}

/// Option (I): iterative hard thresholding on the l0-constrained relaxation.
/// Per iteration: Q <- (1-eta) D + eta (s - theta x); D <- H_s(Q); then the
/// least-squares x update. Starts from (x, D) = 0.
pub fn iht_solve(s_vec: &[f64], theta: &ThetaOperator, config: &SolveConfig) -> Result<SolveResult> {
    let d = theta.d();
    expect_len(s_vec, d * d)?;
    config.validate(d)?;
    let gram = theta.gram()?;
    let factor = PinvFactor::new(gram.as_ref())?;
    let q2 = theta.q() * theta.q();
    let mut x = vec![0.0; q2];
    let mut d_vec = vec![0.0; d * d];
    let mut residuals = Vec::new();
    let mut objectives = Vec::new();
    let mut iterations = 0;
    for iter in 1..=config.max_iter {
        iterations = iter;
        if config.sparsity > 0 {
            let theta_x = theta.apply(&x)?;
            let q_vec: Vec<f64> = d_vec
                .iter()
                .zip(s_vec.iter().zip(&theta_x))
                .map(|(&dv, (&sv, &tx))| (1.0 - config.eta) * dv + config.eta * (sv - tx))
                .collect();
            d_vec = hard_threshold_op(&q_vec, config.sparsity);
        }
        let x_new = ls_solve_with(theta, &factor, s_vec, Some(&d_vec))?;
        if x_new.iter().any(|v| !v.is_finite()) {
            return Err(KronError::Divergence {
                eta: config.eta,
                iteration: iter,
            });
        }
        let delta = x
            .iter()
            .zip(&x_new)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = x_new;
        let residual = residual_norm(theta, s_vec, &x, &d_vec)?;
        residuals.push(residual);
        objectives.push(residual * residual);
        if delta < config.tol {
            break;
        }
    }
    Ok(SolveResult {
        x_hat: x,
        d_hat: SparseVec::from_dense(&d_vec),
        iterations,
        residual_history: residuals,
        objective_history: objectives,
    })
}

/// Option (II): l1 relaxation by alternating the prox step
/// D <- soft(s - theta x, gamma / 2) with the least-squares x update.
/// The objective ||s - theta x - D||^2 + gamma ||D||_1 is non-increasing.
pub fn lasso_solve(
    s_vec: &[f64],
    theta: &ThetaOperator,
    config: &SolveConfig,
) -> Result<SolveResult> {
    let d = theta.d();
    expect_len(s_vec, d * d)?;
    config.validate(d)?;
    let gram = theta.gram()?;
    let factor = PinvFactor::new(gram.as_ref())?;
    let q2 = theta.q() * theta.q();
    let mut x = vec![0.0; q2];
    let mut d_vec;
    let mut residuals = Vec::new();
    let mut objectives = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let theta_x = theta.apply(&x)?;
        let r: Vec<f64> = s_vec.iter().zip(&theta_x).map(|(a, b)| a - b).collect();
        d_vec = soft_threshold_op(&r, config.gamma / 2.0);
        let x_new = ls_solve_with(theta, &factor, s_vec, Some(&d_vec))?;
        if x_new.iter().any(|v| !v.is_finite()) {
            return Err(KronError::Divergence {
                eta: config.eta,
                iteration: iterations,
            });
        }
        let delta = x
            .iter()
            .zip(&x_new)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = x_new;
        let residual = residual_norm(theta, s_vec, &x, &d_vec)?;
        let l1: f64 = d_vec.iter().map(|v| v.abs()).sum();
        residuals.push(residual);
        objectives.push(residual * residual + config.gamma * l1);
        if delta < config.tol || iterations >= config.max_iter {
            break;
        }
    }
    Ok(SolveResult {
        x_hat: x,
        d_hat: SparseVec::from_dense(&d_vec),
        iterations,
        residual_history: residuals,
        objective_history: objectives,
    })
}

fn residual_norm(
    theta: &ThetaOperator,
    s_vec: &[f64],
    x: &[f64],
    d_vec: &[f64],
) -> Result<f64> {
    let theta_x = theta.apply(x)?;
    Ok(s_vec
        .iter()
        .zip(theta_x.iter().zip(d_vec))
        .map(|(&s, (&tx, &dv))| {
            let r = s - tx - dv;
            r * r
        })
        .sum::<f64>()
        .sqrt())
}

fn expect_len(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(KronError::ShapeMismatch {
            context: "solve",
            expected: format!("{n} values"),
            got: format!("{}", v.len()),
        });
    }
    Ok(())
}

/// Exhaustive test oracle for the permuted least-squares problem: searches
/// every permutation within the Hamming ball `d_H <= s_max` and solves the
/// least squares in x for each. Guarded to d <= 8.
pub fn brute_force_permuted_ls(
    s_vec: &[f64],
    theta: &ThetaOperator,
    s_max: usize,
) -> Result<(Permutation, Vec<f64>, f64)> {
    let d = theta.d();
    if d > 8 {
        return Err(KronError::InvalidParameter(format!(
            "brute-force search is factorial; d = {d} exceeds the guard of 8"
        )));
    }
    if s_max > d {
        return Err(KronError::InvalidParameter(format!(
            "Hamming bound {s_max} exceeds d = {d}"
        )));
    }
    expect_len(s_vec, d * d)?;
    let q2 = theta.q() * theta.q();
    // materialize theta densely (tiny instance)
    let mut columns = Vec::with_capacity(q2);
    let mut basis = vec![0.0; q2];
    for j in 0..q2 {
        basis[j] = 1.0;
        columns.push(theta.apply(&basis)?);
        basis[j] = 0.0;
    }
    let gram = theta.gram()?;
    let factor = PinvFactor::new(gram.as_ref())?;
    let mut best: Option<(Permutation, Vec<f64>, f64)> = None;
    let mut labels: Vec<usize> = (0..d).collect();
    permute_all(&mut labels, 0, &mut |perm_map| {
        let displaced = perm_map.iter().enumerate().filter(|(i, &v)| *i != v).count();
        if displaced > s_max {
            return Ok(());
        }
        let perm = Permutation::from_map(perm_map.to_vec())?;
        // t = P^T s, i.e. t[(r, c)] = s[(sigma r, sigma c)]
        let mut t = vec![0.0; d * d];
        for c in 0..d {
            let sc = perm.apply(c);
            for r in 0..d {
                t[r + c * d] = s_vec[perm.apply(r) + sc * d];
            }
        }
        // least squares against theta
        let rhs: Vec<f64> = columns
            .iter()
            .map(|col| col.iter().zip(&t).map(|(a, b)| a * b).sum())
            .collect();
        let x = factor.solve(&rhs);
        let mut obj = 0.0;
        for i in 0..d * d {
            let mut fit = 0.0;
            for (j, col) in columns.iter().enumerate() {
                fit += col[i] * x[j];
            }
            let r = t[i] - fit;
            obj += r * r;
        }
        let better = match &best {
            None => true,
            Some((cur, _, cur_obj)) => {
                let tol = 1e-12 * (1.0 + cur_obj.abs());
                obj < cur_obj - tol
                    || ((obj - cur_obj).abs() <= tol && displaced < cur.hamming_distance())
            }
        };
        if better {
            best = Some((perm, x, obj));
        }
        Ok(())
    })?;
    Ok(best.expect("at least the identity permutation is searched"))
}

fn permute_all(
    labels: &mut Vec<usize>,
    k: usize,
    visit: &mut impl FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    if k == labels.len() {
        return visit(labels);
    }
    for i in k..labels.len() {
        labels.swap(k, i);
        permute_all(labels, k + 1, visit)?;
        labels.swap(k, i);
    }
    Ok(())
}
