//! Per country-year thrift, capital growth and thrift index.

use serde::{Deserialize, Serialize};

use crate::ingest::Observation;

/// Thresholds of the screening ladder, unscreened first.
pub const SCREEN_LADDER: [f64; 8] = [0.0, 0.01, 0.025, 0.05, 0.075, 0.10, 0.125, 0.15];

/// Which capital stock divides net saving and the capital increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `s*_t = S_t / K_{t-1}`, `g_t = (K_t - K_{t-1}) / K_{t-1}`.
    #[default]
    BeginOfPeriod,
    /// `s*_t = S_t / K_t`, `g_t = (K_t - K_{t-1}) / K_t`.
    EndOfPeriod,
}

/// Derived quantities for one country-year. Fields that cannot be computed
/// are `None`, never filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedPoint {
    pub country: String,
    pub year: i32,
    /// Thrift `s*`.
    pub s_star: Option<f64>,
    /// Capital growth rate `g(K)`.
    pub g: Option<f64>,
    /// Thrift change `Δs*`.
    pub d_s_star: Option<f64>,
    /// Capital acceleration `Δg(K)`.
    pub d_g: Option<f64>,
    /// `s* / g(K)`.
    pub ratio: Option<f64>,
    /// Thrift index `θ = Δs* / Δg(K)`.
    pub theta: Option<f64>,
    /// GDP of the same year.
    pub weight: Option<f64>,
}

/// Compute derived points for one country's year-sorted panel.
///
/// Levels need the previous calendar year, differences need two. A missing
/// year breaks the chain: nothing is differenced across a gap.
pub fn derive_series(panel: &[Observation], convention: Convention) -> Vec<DerivedPoint> {
    let mut out: Vec<DerivedPoint> = Vec::with_capacity(panel.len());
    for (i, obs) in panel.iter().enumerate() {
        let prev = i
            .checked_sub(1)
            .map(|j| &panel[j])
            .filter(|p| p.year + 1 == obs.year);

        let (s_star, g) = match prev {
            Some(p) => {
                let base = match convention {
                    Convention::BeginOfPeriod => p.k,
                    Convention::EndOfPeriod => obs.k,
                };
                (Some(obs.s_net / base), Some((obs.k - p.k) / base))
            }
            None => (None, None),
        };

        let prev_point = out.last().filter(|p| prev.is_some() && p.year + 1 == obs.year);
        let (d_s_star, d_g) = match (prev_point, s_star, g) {
            (Some(pp), Some(s), Some(g)) => match (pp.s_star, pp.g) {
                (Some(ps), Some(pg)) => (Some(s - ps), Some(g - pg)),
                _ => (None, None),
            },
            _ => (None, None),
        };

        out.push(DerivedPoint {
            country: obs.country.clone(),
            year: obs.year,
            s_star,
            g,
            d_s_star,
            d_g,
            ratio: quotient(s_star, g),
            theta: quotient(d_s_star, d_g),
            weight: obs.gdp,
        });
    }
    out
}

fn quotient(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    match (num, den) {
        (Some(n), Some(d)) if d != 0.0 => Some(n / d),
        _ => None,
    }
}

/// Denominator a screen tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScreenTarget {
    /// `|g(K)|`, for level statistics.
    Growth,
    /// `|Δg(K)|`, for difference statistics.
    Acceleration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenSpec {
    pub threshold: f64,
    pub target: ScreenTarget,
}

impl ScreenSpec {
    pub fn growth(threshold: f64) -> Self {
        Self {
            threshold,
            target: ScreenTarget::Growth,
        }
    }

    pub fn acceleration(threshold: f64) -> Self {
        Self {
            threshold,
            target: ScreenTarget::Acceleration,
        }
    }

    /// Inclusive at the boundary: `|denominator| >= threshold`.
    pub fn admits(&self, point: &DerivedPoint) -> bool {
        let denominator = match self.target {
            ScreenTarget::Growth => point.g,
            ScreenTarget::Acceleration => point.d_g,
        };
        denominator.is_some_and(|d| d.abs() >= self.threshold)
    }
}

pub fn apply_screen(points: &[DerivedPoint], spec: ScreenSpec) -> Vec<DerivedPoint> {
    points.iter().filter(|p| spec.admits(p)).cloned().collect()
}

const POINTS_HEADER: &str = "country,year,s_star,g,d_s_star,d_g,ratio,theta,weight";

/// CSV dump of derived points; absent fields are empty cells.
pub fn points_to_csv<'a, I: IntoIterator<Item = &'a DerivedPoint>>(points: I) -> String {
    fn cell(v: Option<f64>) -> String {
        v.map(|x| x.to_string()).unwrap_or_default()
    }
    let mut out = String::from(POINTS_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            p.country,
            p.year,
            cell(p.s_star),
            cell(p.g),
            cell(p.d_s_star),
            cell(p.d_g),
            cell(p.ratio),
            cell(p.theta),
            cell(p.weight),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn panel(years: std::ops::RangeInclusive<i32>, k: &[f64], s: &[f64]) -> Vec<Observation> {
        years
            .zip(k.iter().zip(s))
            .map(|(year, (&k, &s_net))| Observation {
                country: "XX".into(),
                year,
                s_net,
                k,
                gdp: Some(1.0),
            })
            .collect()
    }

    #[test]
    fn thrift_world_hand_example() {
        let pts = derive_series(&panel(2000..=2002, &[100.0, 110.0, 132.0], &[0.0, 10.0, 22.0]), Convention::BeginOfPeriod);
        assert_eq!(pts.len(), 3);
        assert!(pts[0].s_star.is_none() && pts[0].g.is_none());
        assert_relative_eq!(pts[1].g.unwrap(), 0.10, epsilon = 1e-15);
        assert_relative_eq!(pts[1].s_star.unwrap(), 0.10, epsilon = 1e-15);
        assert!(pts[1].d_g.is_none());
        assert_relative_eq!(pts[2].g.unwrap(), 0.20, epsilon = 1e-15);
        assert_relative_eq!(pts[2].s_star.unwrap(), 0.20, epsilon = 1e-15);
        assert_relative_eq!(pts[2].d_g.unwrap(), 0.10, epsilon = 1e-15);
        assert_relative_eq!(pts[2].d_s_star.unwrap(), 0.10, epsilon = 1e-15);
        assert_relative_eq!(pts[2].theta.unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(pts[2].ratio.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn free_growth_hand_example() {
        let pts = derive_series(&panel(2000..=2002, &[100.0, 105.0, 115.5], &[0.0, 0.0, 0.0]), Convention::BeginOfPeriod);
        assert_eq!(pts[1].s_star, Some(0.0));
        assert_eq!(pts[2].s_star, Some(0.0));
        assert_relative_eq!(pts[1].g.unwrap(), 0.05, epsilon = 1e-15);
        assert_relative_eq!(pts[2].g.unwrap(), 0.10, epsilon = 1e-15);
        assert_relative_eq!(pts[2].d_g.unwrap(), 0.05, epsilon = 1e-15);
        assert_eq!(pts[2].d_s_star, Some(0.0));
        assert_eq!(pts[2].theta, Some(0.0));
    }

    #[test]
    fn zero_denominators_leave_ratio_and_theta_absent() {
        let pts = derive_series(&panel(2000..=2002, &[100.0; 3], &[0.0; 3]), Convention::BeginOfPeriod);
        assert_eq!(pts[2].g, Some(0.0));
        assert_eq!(pts[2].d_g, Some(0.0));
        assert!(pts[2].ratio.is_none());
        assert!(pts[2].theta.is_none());
    }

    #[test]
    fn end_of_period_divides_by_current_capital() {
        let pts = derive_series(&panel(2000..=2001, &[100.0, 125.0], &[0.0, 25.0]), Convention::EndOfPeriod);
        assert_relative_eq!(pts[1].g.unwrap(), 0.2);
        assert_relative_eq!(pts[1].s_star.unwrap(), 0.2);
    }

    #[test]
    fn gaps_break_the_chain() {
        let mut p = panel(2000..=2004, &[100.0, 110.0, 121.0, 140.0, 150.0], &[1.0; 5]);
        p.remove(2);
        let pts = derive_series(&p, Convention::BeginOfPeriod);
        let y2003 = pts.iter().find(|p| p.year == 2003).unwrap();
        assert!(y2003.g.is_none() && y2003.s_star.is_none());
        let y2004 = pts.iter().find(|p| p.year == 2004).unwrap();
        assert!(y2004.g.is_some());
        assert!(y2004.d_g.is_none());
    }

    fn point(g: Option<f64>, d_g: Option<f64>) -> DerivedPoint {
        DerivedPoint {
            country: "XX".into(),
            year: 2000,
            s_star: g,
            g,
            d_s_star: d_g,
            d_g,
            ratio: None,
            theta: None,
            weight: None,
        }
    }

    #[test]
    fn screen_excludes_small_acceleration() {
        let pts = vec![point(Some(0.1), Some(0.005))];
        assert!(apply_screen(&pts, ScreenSpec::acceleration(0.01)).is_empty());
    }

    #[test]
    fn screen_boundary_is_inclusive() {
        let pts = vec![point(Some(0.15), None)];
        assert_eq!(apply_screen(&pts, ScreenSpec::growth(0.15)).len(), 1);
    }

    #[test]
    fn zero_threshold_keeps_defined_targets() {
        let pts = vec![point(Some(0.0), None), point(None, None), point(Some(-0.3), Some(0.0))];
        assert_eq!(apply_screen(&pts, ScreenSpec::growth(0.0)).len(), 2);
        assert_eq!(apply_screen(&pts, ScreenSpec::acceleration(0.0)).len(), 1);
    }

    #[test]
    fn csv_dump_leaves_absent_cells_empty() {
        let text = points_to_csv(&[point(None, None)]);
        assert_eq!(text.lines().nth(1), Some("XX,2000,,,,,,,"));
    }
}
