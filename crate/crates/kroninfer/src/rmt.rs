//! Closed-form random-matrix predictions for the centered adjacency spectrum:
//! the rescaled quarter-circle bulk, spiked outlier locations, singular-vector
//! alignments, the optimal shrinker `f`, and the asymptotic per-component
//! error `g`.

use crate::error::{KronError, Result};

/// Noise scale derived from the effective density `p^K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseScale {
    pk: f64,
    s: f64,
    edge: f64,
}

impl NoiseScale {
    pub fn new(pk: f64) -> Result<Self> {
        if !(pk > 0.0 && pk < 1.0) {
            return Err(KronError::InvalidParameter(format!(
                "effective density must lie in (0,1), got {pk}"
            )));
        }
        let s = (pk * (1.0 - pk)).sqrt();
        Ok(NoiseScale { pk, s, edge: 2.0 * s })
    }

    /// Effective density p^K.
    pub fn pk(&self) -> f64 {
        self.pk
    }

    /// Noise standard deviation sqrt(p^K (1 - p^K)).
    pub fn sigma(&self) -> f64 {
        self.s
    }

    /// Bulk edge 2 sqrt(p^K (1 - p^K)).
    pub fn edge(&self) -> f64 {
        self.edge
    }
}

/// Normalized signal strength of one spike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeParam {
    pub ell: f64,
}

impl SpikeParam {
    pub fn new(ell: f64) -> Result<Self> {
        if !(ell >= 0.0) {
            return Err(KronError::InvalidParameter(format!(
                "spike strength must be nonnegative, got {ell}"
            )));
        }
        Ok(SpikeParam { ell })
    }

    pub fn location(&self, scale: &NoiseScale) -> f64 {
        spike_location(self.ell, scale)
    }

    pub fn alignment(&self) -> f64 {
        alignment(self.ell)
    }
}

/// Density of the rescaled quarter-circle law on `[0, 2s]`.
pub fn quarter_circle_pdf(x: f64, scale: &NoiseScale) -> f64 {
    if x < 0.0 || x > scale.edge {
        return 0.0;
    }
    let s2 = scale.s * scale.s;
    (4.0 * s2 - x * x).sqrt() / (s2 * std::f64::consts::PI)
}

/// Closed-form antiderivative of the quarter-circle density, clamped to `[0,1]`.
pub fn quarter_circle_cdf(x: f64, scale: &NoiseScale) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= scale.edge {
        return 1.0;
    }
    let s = scale.s;
    let s2 = s * s;
    let raw = x * (4.0 * s2 - x * x).sqrt() / 2.0 + 2.0 * s2 * (x / (2.0 * s)).asin();
    (raw / (s2 * std::f64::consts::PI)).clamp(0.0, 1.0)
}

/// Inverse CDF by bisection (the CDF is strictly increasing on the support).
pub fn quarter_circle_quantile(u: f64, scale: &NoiseScale) -> f64 {
    let u = u.clamp(0.0, 1.0);
    let (mut lo, mut hi) = (0.0, scale.edge);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if quarter_circle_cdf(mid, scale) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Limiting location of the outlier produced by a spike of strength `ell`:
/// `s (ell + 1/ell)` above the phase transition, the bulk edge below it.
pub fn spike_location(ell: f64, scale: &NoiseScale) -> f64 {
    let ell = ell.max(0.0);
    if ell > 1.0 {
        scale.s * (ell + 1.0 / ell)
    } else {
        scale.edge
    }
}

/// Limiting squared cosine between a planted singular vector and its
/// empirical counterpart.
pub fn alignment(ell: f64) -> f64 {
    if ell >= 1.0 {
        (1.0 - ell.powi(-2)).max(0.0)
    } else {
        0.0
    }
}

/// Optimal shrinker `f(t) = sqrt(t^2 - 4 p(1-p)) 1_{t > 2 sqrt(p(1-p))}`.
pub fn shrinker(t: f64, scale: &NoiseScale) -> f64 {
    if t > scale.edge {
        (t * t - scale.edge * scale.edge).sqrt()
    } else {
        0.0
    }
}

/// Asymptotic squared Frobenius error contributed by one signal singular
/// value `t` under the optimal shrinker.
pub fn asymptotic_error(t: f64, scale: &NoiseScale) -> f64 {
    let v = scale.s * scale.s; // p(1-p)
    if t > scale.s {
        v * (2.0 - v / (t * t))
    } else {
        t * t
    }
}

/// Kolmogorov-Smirnov distance between an ascending sample and the law.
pub fn ks_distance(sorted: &[f64], scale: &NoiseScale) -> Result<f64> {
    if sorted.is_empty() {
        return Err(KronError::InvalidParameter(
            "KS distance of an empty sample".into(),
        ));
    }
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let n = sorted.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = quarter_circle_cdf(x, scale);
        let hi = (i as f64 + 1.0) / n - f;
        let lo = f - i as f64 / n;
        sup = sup.max(hi).max(lo);
    }
    Ok(sup)
}
