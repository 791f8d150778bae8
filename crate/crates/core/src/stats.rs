//! Numerical kernels: weighted mean, weighted OLS and LOESS.
//!
//! Every kernel sorts a private copy of its input before accumulating, so
//! results depend only on the multiset of samples, not on their order.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("all weights are zero")]
    AllZeroWeights,
    #[error("need at least {needed} samples with positive weight, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("regressor has zero weighted variance")]
    DegenerateX,
    #[error("need at least {needed} distinct x values, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("local fit at x = {x} is singular and has no positive weight to fall back on")]
    SingularLocalFit { x: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// One observation for a weighted regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub x: f64,
    pub y: f64,
    pub w: f64,
}

impl WeightedSample {
    pub fn new(x: f64, y: f64, w: f64) -> Self {
        Self { x, y, w }
    }
}

fn check_weight(w: f64) -> Result<(), StatsError> {
    if w.is_finite() && w >= 0.0 {
        Ok(())
    } else {
        Err(StatsError::InvalidInput(format!("weight {w}")))
    }
}

fn check_finite(v: f64) -> Result<(), StatsError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(StatsError::InvalidInput(format!("value {v}")))
    }
}

/// `Σ wᵢvᵢ / Σ wᵢ` over `(value, weight)` pairs.
pub fn weighted_mean(values: &[(f64, f64)]) -> Result<f64, StatsError> {
    let mut sorted = Vec::with_capacity(values.len());
    for &(v, w) in values {
        check_finite(v)?;
        check_weight(w)?;
        sorted.push((v, w));
    }
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let total: f64 = sorted.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        return Err(StatsError::AllZeroWeights);
    }
    Ok(sorted.iter().map(|(v, w)| v * w).sum::<f64>() / total)
}

/// Weighted least-squares fit of `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    /// Classical standard error of the slope; `None` when `n < 3`.
    pub slope_se: Option<f64>,
    pub r2: f64,
    /// Samples with positive weight.
    pub n: usize,
    /// `(slope - 1) / slope_se`. `None` when `n < 3`; reported as `0` with
    /// `perfect_fit` set when residuals vanish.
    pub t_vs_one: Option<f64>,
    pub perfect_fit: bool,
}

fn cmp_sample(a: &WeightedSample, b: &WeightedSample) -> Ordering {
    a.x.total_cmp(&b.x)
        .then(a.y.total_cmp(&b.y))
        .then(a.w.total_cmp(&b.w))
}

/// Weighted OLS with analytic weights.
///
/// The residual variance uses `n - 2` degrees of freedom, and the slope
/// variance is `σ² / Σw(x - x̄)²`, which makes every reported statistic
/// invariant to rescaling all weights by a constant.
pub fn weighted_ols(samples: &[WeightedSample]) -> Result<RegressionResult, StatsError> {
    let mut sorted = Vec::with_capacity(samples.len());
    for s in samples {
        check_finite(s.x)?;
        check_finite(s.y)?;
        check_weight(s.w)?;
        if s.w > 0.0 {
            sorted.push(*s);
        }
    }
    let n = sorted.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: n });
    }
    sorted.sort_by(cmp_sample);

    let sw: f64 = sorted.iter().map(|s| s.w).sum();
    let x_bar = sorted.iter().map(|s| s.w * s.x).sum::<f64>() / sw;
    let y_bar = sorted.iter().map(|s| s.w * s.y).sum::<f64>() / sw;
    let (mut sxx, mut sxy, mut sst) = (0.0, 0.0, 0.0);
    for s in &sorted {
        let dx = s.x - x_bar;
        let dy = s.y - y_bar;
        sxx += s.w * dx * dx;
        sxy += s.w * dx * dy;
        sst += s.w * dy * dy;
    }
    if !(sxx > 0.0) {
        return Err(StatsError::DegenerateX);
    }
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let ssr: f64 = sorted
        .iter()
        .map(|s| {
            let e = s.y - intercept - slope * s.x;
            s.w * e * e
        })
        .sum();

    let perfect_fit = ssr == 0.0 || ssr <= f64::EPSILON * f64::EPSILON * sst;
    let r2 = if sst > 0.0 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else {
        // y is constant and reproduced exactly by the zero-slope line.
        1.0
    };
    let (slope_se, t_vs_one) = if n < 3 {
        (None, None)
    } else if perfect_fit {
        (Some(0.0), Some(0.0))
    } else {
        let se = (ssr / (n as f64 - 2.0) / sxx).sqrt();
        (Some(se), Some((slope - 1.0) / se))
    };
    Ok(RegressionResult {
        slope,
        intercept,
        slope_se,
        r2,
        n,
        t_vs_one,
        perfect_fit,
    })
}

/// Distance kernel used inside each LOESS neighbourhood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `(1 - (d/h)³)³`.
    #[default]
    Tricube,
    /// Weight 1 throughout the neighbourhood.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoessOptions {
    pub span: f64,
    pub degree: usize,
    pub kernel: Kernel,
}

impl Default for LoessOptions {
    fn default() -> Self {
        Self {
            span: 0.75,
            degree: 2,
            kernel: Kernel::Tricube,
        }
    }
}

/// Radius of the kernel relative to the farthest selected neighbour. Greater
/// than one so that every selected neighbour carries positive weight.
pub const BANDWIDTH_PAD: f64 = 1.1;

/// Distances within this fraction of the x range of the neighbourhood radius
/// count as ties and join the neighbourhood.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoessFit {
    /// `(x, fitted)` in input order.
    pub points: Vec<(f64, f64)>,
    /// Input indices whose local polynomial was singular and fell back to a
    /// local weighted mean.
    pub fallbacks: Vec<usize>,
}

/// LOESS with tricube weights and no robustness iterations.
pub fn loess(points: &[(f64, f64, f64)], span: f64, degree: usize) -> Result<LoessFit, StatsError> {
    loess_with(
        points,
        &LoessOptions {
            span,
            degree,
            kernel: Kernel::Tricube,
        },
    )
}

/// LOESS evaluated at every input `x`.
///
/// Each local fit uses the `⌈span·n⌉` nearest neighbours (plus any tied at the
/// same distance), weighted by the distance kernel times the observation
/// weight.
pub fn loess_with(points: &[(f64, f64, f64)], opts: &LoessOptions) -> Result<LoessFit, StatsError> {
    if !(opts.span > 0.0 && opts.span <= 1.0) {
        return Err(StatsError::InvalidInput(format!("span {} outside (0, 1]", opts.span)));
    }
    if !(1..=2).contains(&opts.degree) {
        return Err(StatsError::InvalidInput(format!("degree {} not 1 or 2", opts.degree)));
    }
    for &(x, y, w) in points {
        check_finite(x)?;
        check_finite(y)?;
        check_weight(w)?;
    }

    let mut sorted: Vec<(f64, f64, f64)> = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    let distinct = {
        let mut xs: Vec<f64> = sorted.iter().filter(|p| p.2 > 0.0).map(|p| p.0).collect();
        xs.dedup();
        xs.len()
    };
    let n = sorted.len();
    let needed = opts.degree + 1;
    if distinct < needed {
        return Err(StatsError::TooFewPoints { needed, got: distinct });
    }
    let q = ((opts.span * n as f64).ceil() as usize).clamp(1, n);
    if q < needed {
        return Err(StatsError::TooFewPoints { needed, got: q });
    }

    let mut fit = LoessFit {
        points: Vec::with_capacity(n),
        fallbacks: Vec::new(),
    };
    let x_range = sorted[n - 1].0 - sorted[0].0;
    let mut distances = vec![0.0; n];
    for (index, &(x0, _, _)) in points.iter().enumerate() {
        for (d, p) in distances.iter_mut().zip(&sorted) {
            *d = (p.0 - x0).abs();
        }
        let mut ordered = distances.clone();
        ordered.sort_by(f64::total_cmp);
        let radius = ordered[q - 1];
        let h = radius * BANDWIDTH_PAD;
        let cutoff = radius + TIE_TOLERANCE * x_range;

        let local: Vec<(f64, f64, f64)> = sorted
            .iter()
            .zip(&distances)
            .filter(|(_, &d)| d <= cutoff)
            .map(|(&(x, y, w), &d)| {
                let k = match opts.kernel {
                    Kernel::Uniform => 1.0,
                    Kernel::Tricube if h > 0.0 => {
                        let r = d / h;
                        let t = 1.0 - r * r * r;
                        t * t * t
                    }
                    Kernel::Tricube => 1.0,
                };
                let scale = if h > 0.0 { h } else { 1.0 };
                ((x - x0) / scale, y, k * w)
            })
            .filter(|p| p.2 > 0.0)
            .collect();

        let value = match local_polynomial_at_zero(&local, opts.degree) {
            Some(v) => v,
            None => {
                let total: f64 = local.iter().map(|p| p.2).sum();
                if total <= 0.0 {
                    return Err(StatsError::SingularLocalFit { x: x0 });
                }
                fit.fallbacks.push(index);
                local.iter().map(|p| p.1 * p.2).sum::<f64>() / total
            }
        };
        fit.points.push((x0, value));
    }
    Ok(fit)
}

/// Intercept of the weighted polynomial fit in already-centred coordinates,
/// or `None` when the normal equations are singular.
fn local_polynomial_at_zero(local: &[(f64, f64, f64)], degree: usize) -> Option<f64> {
    let m = degree + 1;
    let mut a = [[0.0f64; 4]; 3];
    for &(u, y, w) in local {
        let mut powers = [1.0; 5];
        for p in 1..5 {
            powers[p] = powers[p - 1] * u;
        }
        for i in 0..m {
            for j in 0..m {
                a[i][j] += w * powers[i + j];
            }
            a[i][m] += w * powers[i] * y;
        }
    }
    let scale = (0..m).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..m {
        let pivot = (col..m).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            for k in col..=m {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut beta = [0.0; 3];
    for row in (0..m).rev() {
        let tail: f64 = (row + 1..m).map(|k| a[row][k] * beta[k]).sum();
        beta[row] = (a[row][m] - tail) / a[row][row];
    }
    Some(beta[0])
}
