//! Matrix factorization helpers on the flattened (column-major) domain.

use crate::error::{KronError, Result};
use crate::rng::Stream;
use faer::{Mat, MatRef};
use std::sync::Once;

static PIN_PARALLELISM: Once = Once::new();

/// Pins the factorization backend to a fixed parallelism degree.
///
/// The backend otherwise picks its degree from the ambient thread pool, and
/// the work partition (hence floating-point reduction order) follows the
/// degree; a fixed degree keeps every factorization bit-identical no matter
/// which pool - or how many sweep jobs - it runs under.
pub fn pin_parallelism() {
    PIN_PARALLELISM.call_once(|| {
        faer::set_global_parallelism(faer::Par::rayon(8));
    });
}

/// All singular values, descending.
pub fn singular_values(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    pin_parallelism();
    a.singular_values()
        .map_err(|e| KronError::Numerical(format!("singular values failed: {e:?}")))
}

/// Thin SVD `a = U diag(s) V^T` with descending `s` and sign-fixed vectors.
pub fn svd_thin(a: MatRef<'_, f64>) -> Result<(Mat<f64>, Vec<f64>, Mat<f64>)> {
    pin_parallelism();
    let svd = a
        .svd()
        .map_err(|e| KronError::Numerical(format!("svd failed: {e:?}")))?;
    let k = a.nrows().min(a.ncols());
    let s = svd.S();
    let sigma: Vec<f64> = (0..k).map(|i| s[i]).collect();
    let mut u = svd.U().to_owned();
    let mut v = svd.V().to_owned();
    fix_signs(&mut u, &mut v);
    Ok((u, sigma, v))
}

/// Deterministic sign convention: the largest-magnitude entry of each left
/// vector (first such index on ties) is made positive.
pub fn fix_signs(u: &mut Mat<f64>, v: &mut Mat<f64>) {
    let k = u.ncols().min(v.ncols());
    for j in 0..k {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for i in 0..u.nrows() {
            let a = u[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if u[(best, j)] < 0.0 {
            for i in 0..u.nrows() {
                u[(i, j)] = -u[(i, j)];
            }
            for i in 0..v.nrows() {
                v[(i, j)] = -v[(i, j)];
            }
        }
    }
}

/// Top-`r` singular triples.
///
/// Small problems (or large requested ranks) take the dense SVD route; large
/// matrices with small `r` use randomized subspace iteration, seeded
/// deterministically so results are reproducible.
pub fn svd_top(a: MatRef<'_, f64>, r: usize) -> Result<(Vec<f64>, Mat<f64>, Mat<f64>)> {
    let d = a.nrows().min(a.ncols());
    if r > d {
        return Err(KronError::InvalidParameter(format!(
            "requested {r} singular triples from a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if r == 0 {
        return Ok((Vec::new(), Mat::zeros(a.nrows(), 0), Mat::zeros(a.ncols(), 0)));
    }
    if d <= 1024 || r * 24 >= d {
        let (u, s, v) = svd_thin(a)?;
        let su = u.subcols(0, r).to_owned();
        let sv = v.subcols(0, r).to_owned();
        return Ok((s[..r].to_vec(), su, sv));
    }
    subspace_top(a, r)
}

/// Randomized subspace iteration for the leading singular triples.
fn subspace_top(a: MatRef<'_, f64>, r: usize) -> Result<(Vec<f64>, Mat<f64>, Mat<f64>)> {
    pin_parallelism();
    const OVERSAMPLE: usize = 10;
    const ITERATIONS: usize = 48;
    let (m, n) = (a.nrows(), a.ncols());
    let block = (r + OVERSAMPLE).min(n).min(m);
    // fixed seed: results must not depend on anything but the input
    let mut stream = Stream::new(0x5bd1_e995 ^ (m as u64) ^ ((r as u64) << 32));
    let omega = Mat::from_fn(n, block, |_, _| stream.next_normal());
    let y = a * &omega;
    let mut q = thin_q(y.as_ref());
    for _ in 0..ITERATIONS {
        let z = a.transpose() * &q;
        let qz = thin_q(z.as_ref());
        let y = a * &qz;
        q = thin_q(y.as_ref());
    }
    // Rayleigh-Ritz: B = Q^T A (block x n), then a small dense SVD
    let b = q.transpose() * a;
    let (ub, s, v) = svd_thin(b.as_ref())?;
    let u_full = &q * &ub;
    let mut u = u_full.subcols(0, r).to_owned();
    let mut v = v.subcols(0, r).to_owned();
    fix_signs(&mut u, &mut v);
    Ok((s[..r].to_vec(), u, v))
}

fn thin_q(y: MatRef<'_, f64>) -> Mat<f64> {
    y.qr().compute_thin_Q()
}

/// Largest singular value via block power iteration with Rayleigh-Ritz
/// extraction. Deterministic start block; converges from below.
pub fn operator_norm(a: MatRef<'_, f64>) -> f64 {
    pin_parallelism();
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 || n == 0 {
        return 0.0;
    }
    let block = 4.min(n).min(m);
    let mut stream = Stream::new(0x6f70_6e6f ^ ((m as u64) << 20) ^ n as u64);
    let q0 = Mat::from_fn(n, block, |_, _| stream.next_normal());
    let mut q = thin_q(q0.as_ref());
    let mut prev = -1.0f64;
    let mut sigma = 0.0f64;
    for iter in 0..200 {
        let y = a * &q;
        if frob(y.as_ref()) == 0.0 {
            return 0.0;
        }
        let qy = thin_q(y.as_ref());
        let z = a.transpose() * &qy;
        sigma = z
            .singular_values()
            .ok()
            .and_then(|sv| sv.first().copied())
            .unwrap_or(0.0);
        if sigma == 0.0 {
            return 0.0;
        }
        q = thin_q(z.as_ref());
        if iter >= 4 && (sigma - prev).abs() <= 1e-12 * sigma {
            break;
        }
        prev = sigma;
    }
    sigma
}

fn frob(a: MatRef<'_, f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * a[(i, j)];
        }
    }
    acc.sqrt()
}

/// Strict inverse through the SVD; rejects condition estimates above 1e12.
pub fn inverse_via_svd(a: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(KronError::ShapeMismatch {
            context: "inverse_via_svd",
            expected: "square matrix".into(),
            got: format!("{}x{}", n, a.ncols()),
        });
    }
    let (u, s, v) = svd_thin(a)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let smin = s.last().copied().unwrap_or(0.0);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= 1e12) {
        return Err(KronError::SingularTensor { cond });
    }
    // V diag(1/s) U^T
    let mut vs = v;
    for j in 0..n {
        let inv = 1.0 / s[j];
        for i in 0..n {
            vs[(i, j)] *= inv;
        }
    }
    Ok(&vs * u.transpose())
}

/// Pseudoinverse application factored from a symmetric PSD matrix: singular
/// values below `1e-12 * sigma_max` are treated as zero.
pub struct PinvFactor {
    u: Mat<f64>,
    v: Mat<f64>,
    inv_s: Vec<f64>,
}

impl PinvFactor {
    pub fn new(a: MatRef<'_, f64>) -> Result<Self> {
        let (u, s, v) = svd_thin(a)?;
        let smax = s.first().copied().unwrap_or(0.0);
        let cutoff = 1e-12 * smax;
        let inv_s = s
            .iter()
            .map(|&x| if x > cutoff { 1.0 / x } else { 0.0 })
            .collect();
        Ok(PinvFactor { u, v, inv_s })
    }

    /// x = V diag(1/s) U^T b
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let k = self.inv_s.len();
        let n = self.u.nrows();
        debug_assert_eq!(b.len(), n);
        let mut t = vec![0.0; k];
        for j in 0..k {
            let mut acc = 0.0;
            for i in 0..n {
                acc += self.u[(i, j)] * b[i];
            }
            t[j] = acc * self.inv_s[j];
        }
        let m = self.v.nrows();
        let mut x = vec![0.0; m];
        for j in 0..k {
            let tj = t[j];
            if tj == 0.0 {
                continue;
            }
            for i in 0..m {
                x[i] += self.v[(i, j)] * tj;
            }
        }
        x
    }
}

/// Count of singular values above `tol * sigma_max`.
pub fn numerical_rank(sigma: &[f64], tol: f64) -> usize {
    let smax = sigma.first().copied().unwrap_or(0.0);
    if smax <= 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > tol * smax).count()
}
