//! Independent oracles shared by the integration tests.
//!
//! None of these call into the library's numerical kernels.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Weighted least squares through the normal equations `(XᵀWX)β = XᵀWy`,
/// solved with LU. Returns `(intercept, slope)`.
pub fn normal_equations(samples: &[(f64, f64, f64)]) -> (f64, f64) {
    let mut xtwx = DMatrix::<f64>::zeros(2, 2);
    let mut xtwy = DVector::<f64>::zeros(2);
    for &(x, y, w) in samples {
        let row = [1.0, x];
        for i in 0..2 {
            for j in 0..2 {
                xtwx[(i, j)] += w * row[i] * row[j];
            }
            xtwy[i] += w * row[i] * y;
        }
    }
    let beta = xtwx.lu().solve(&xtwy).expect("nonsingular normal equations");
    (beta[0], beta[1])
}

/// Double-double number, about 32 significant digits.
#[derive(Clone, Copy, Debug)]
struct Dd(f64, f64);

impl Dd {
    fn from(v: f64) -> Self {
        Dd(v, 0.0)
    }

    fn add(self, o: Dd) -> Dd {
        let s = self.0 + o.0;
        let bb = s - self.0;
        let err = (self.0 - (s - bb)) + (o.0 - bb);
        Dd::quick(s, err + self.1 + o.1)
    }

    fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let err = self.0.mul_add(o.0, -p);
        Dd::quick(p, err + self.0 * o.1 + self.1 * o.0)
    }

    fn quick(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd(s, b - (s - a))
    }

    fn lt(self, o: Dd) -> bool {
        self.0 < o.0 || (self.0 == o.0 && self.1 < o.1)
    }
}

/// Weighted SSE of `y ≈ a + b (x - c)` in double-double precision.
fn sse(samples: &[(f64, f64, f64)], c: f64, a: f64, b: f64) -> Dd {
    samples.iter().fold(Dd::from(0.0), |acc, &(x, y, w)| {
        let u = Dd::from(x).add(Dd::from(c).neg());
        let fit = Dd::from(a).add(Dd::from(b).mul(u));
        let e = Dd::from(y).add(fit.neg());
        acc.add(Dd::from(w).mul(e).mul(e))
    })
}

/// Minimize weighted SSE over a zooming 2-D grid. Returns `(intercept, slope)`.
///
/// The line is parametrized around a rough centre `c` of the x values so the
/// two coordinates are nearly uncoupled; SSE is evaluated in double-double so
/// grid comparisons stay meaningful down to steps far below 1e-10.
pub fn grid_minimize(samples: &[(f64, f64, f64)]) -> (f64, f64) {
    let tw: f64 = samples.iter().map(|s| s.2).sum();
    let c = samples.iter().map(|s| s.0 * s.2).sum::<f64>() / tw;
    let (mut a, mut b) = (0.0f64, 0.0f64);
    let mut half = 64.0f64;
    const STEPS: i32 = 6;
    while half > 1e-15 {
        let mut best = (sse(samples, c, a, b), a, b);
        for i in -STEPS..=STEPS {
            for j in -STEPS..=STEPS {
                let ca = a + half * i as f64 / STEPS as f64;
                let cb = b + half * j as f64 / STEPS as f64;
                let v = sse(samples, c, ca, cb);
                if v.lt(best.0) {
                    best = (v, ca, cb);
                }
            }
        }
        a = best.1;
        b = best.2;
        half /= 3.0;
    }
    (a - b * c, b)
}

/// Tricube LOESS fit at every input x by a direct least-squares solve of the
/// local weighted polynomial in raw x coordinates (SVD), using the same
/// neighbourhood definition as the library: the ⌈span·n⌉ nearest points plus
/// ties within 1e-9 of the x range, with kernel radius 1.1 times the farthest selected distance.
pub fn direct_loess(points: &[(f64, f64, f64)], span: f64, degree: usize, uniform: bool) -> Vec<f64> {
    let n = points.len();
    let q = ((span * n as f64).ceil() as usize).clamp(1, n);
    points
        .iter()
        .map(|&(x0, _, _)| {
            let mut d: Vec<f64> = points.iter().map(|p| (p.0 - x0).abs()).collect();
            let radius = {
                d.sort_by(|a, b| a.partial_cmp(b).unwrap());
                d[q - 1]
            };
            let h = radius * 1.1;
            let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            let local: Vec<(f64, f64, f64)> = points
                .iter()
                .filter(|p| (p.0 - x0).abs() <= radius + 1e-9 * (hi - lo))
                .map(|&(x, y, w)| {
                    let k = if uniform || h == 0.0 {
                        1.0
                    } else {
                        (1.0 - ((x - x0).abs() / h).powi(3)).powi(3)
                    };
                    (x, y, k * w)
                })
                .filter(|p| p.2 > 0.0)
                .collect();
            let m = degree + 1;
            let a = DMatrix::from_fn(local.len(), m, |r, c| local[r].2.sqrt() * local[r].0.powi(c as i32));
            let b = DVector::from_fn(local.len(), |r, _| local[r].2.sqrt() * local[r].1);
            let beta = a.svd(true, true).solve(&b, 1e-300).expect("svd solve");
            (0..m).map(|c| beta[c] * x0.powi(c as i32)).sum()
        })
        .collect()
}
