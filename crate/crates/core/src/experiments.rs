//! Post-processing of simulation series: growth-exponent fits and the
//! pathwise differential bounds from the growth proofs.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ClaimReport, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::inequalities::Rational;
use crate::kernels::Dimension;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesName {
    R,
    #[serde(rename = "omega_max")]
    OmegaMax,
}

impl SeriesName {
    pub fn extract(self, records: &[DiagnosticsRecord]) -> Vec<(f64, f64)> {
        records
            .iter()
            .map(|r| {
                (r.t, match self {
                    SeriesName::R => r.R,
                    SeriesName::OmegaMax => r.omega_max,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub beta: f64,
    pub window: (f64, f64),
    pub residual: f64,
    pub series_name: SeriesName,
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 8;

/// Last half of the time span of `series`.
pub fn default_window(series: &[(f64, f64)]) -> Option<(f64, f64)> {
    let (first, last) = (series.first()?.0, series.last()?.0);
    Some((first + 0.5 * (last - first), last))
}

/// Least-squares slope of `ln(value)` against `ln(1 + t)` over the window
/// (inclusive; `None` selects the last half).
pub fn fit_growth_exponent(
    series: &[(f64, f64)],
    window: Option<(f64, f64)>,
    series_name: SeriesName,
) -> Result<GrowthFit> {
    let window = match window {
        Some(w) => w,
        None => default_window(series).ok_or_else(|| Error::InsufficientData("empty series".into()))?,
    };
    if !(window.0 < window.1) {
        return Err(Error::Domain(format!("fit window {window:?} is empty")));
    }
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|&(t, _)| t >= window.0 && t <= window.1).collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples in window {window:?}, need {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    if let Some(&(t, v)) = pts.iter().find(|&&(t, v)| !(v > 0.0) || !(t > -1.0)) {
        return Err(Error::Domain(format!("growth fit needs positive values and t > -1, got {v} at t = {t}")));
    }
    let xy: Vec<(f64, f64)> = pts.iter().map(|&(t, v)| (t.ln_1p(), v.ln())).collect();
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("fit window contains a single time".into()));
    }
    let beta = sxy / sxx;
    let residual = (xy.iter().map(|p| (p.1 - my - beta * (p.0 - mx)).powi(2)).sum::<f64>() / n).sqrt();
    Ok(GrowthFit { beta, window, residual, series_name, samples: pts.len() })
}

/// Outcome of one pathwise bound check: the worst ratio of the discrete
/// left-hand side to the bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub constant: f64,
    pub max_ratio: f64,
    pub tolerance: f64,
    pub checked: usize,
    pub pass: bool,
}

impl BoundCheck {
    /// Passes iff every ratio is at most `1 + tolerance`.
    pub fn new(name: &str, constant: f64, ratios: &[f64], tolerance: f64) -> Self {
        let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
        Self {
            name: name.to_owned(),
            constant,
            max_ratio,
            tolerance,
            checked: ratios.len(),
            pass: max_ratio <= 1.0 + tolerance,
        }
    }

    pub fn from_claims(report: &ClaimReport) -> Vec<BoundCheck> {
        vec![
            BoundCheck::new("claim_r_omega_L1", 1.0, &[report.max_ratio_r_omega_l1], report.tol),
            BoundCheck::new("claim_omega_Linf", 1.0, &[report.max_ratio_omega_linf], report.tol),
        ]
    }

    /// `value ≤ limit` expressed as a ratio check.
    pub fn threshold(name: &str, value: f64, limit: f64) -> Self {
        Self::new(name, limit, &[value / limit], 0.0)
    }
}

/// Largest `|f(t)/f(0) - 1|` over the series.
pub fn max_relative_drift<F: Fn(&DiagnosticsRecord) -> f64>(series: &[DiagnosticsRecord], f: F) -> f64 {
    let Some(first) = series.first() else { return 0.0 };
    let f0 = f(first);
    series
        .iter()
        .map(|r| if f0 == 0.0 { f(r).abs() } else { (f(r) / f0 - 1.0).abs() })
        .fold(0.0, f64::max)
}

/// Largest drop `f(t_k) - f(t_{k+1})` between consecutive records (zero for
/// a nondecreasing series).
pub fn max_decrease<F: Fn(&DiagnosticsRecord) -> f64>(series: &[DiagnosticsRecord], f: F) -> f64 {
    series.windows(2).map(|w| f(&w[0]) - f(&w[1])).fold(0.0, f64::max)
}

/// Slack absorbing the finite-difference error of `dR/dt`.
pub const DIFFERENCE_SLACK: f64 = 0.05;

/// Centered differences at interior samples, one-sided at the ends.
pub fn time_derivative(t: &[f64], v: &[f64]) -> Vec<f64> {
    let n = t.len();
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                _ if i == n - 1 => (n - 2, n - 1),
                _ => (i - 1, i + 1),
            };
            (v[b] - v[a]) / (t[b] - t[a])
        })
        .collect()
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

/// `|dR/dt| ≤ C (c₁ + c₂ R^{d/4 - 1/2})` with `c₁, c₂` from the first record
/// and `C` the corpus constant of the key estimate.
pub fn trajectory_bound_check(series: &[DiagnosticsRecord], c: f64, d: Dimension) -> Result<BoundCheck> {
    if series.len() < 3 {
        return Err(Error::InsufficientData(format!("{} records, need at least 3", series.len())));
    }
    let df = d.as_f64();
    let r0 = &series[0];
    let c1 = r0.relvort_Linf.powf(1.0 / df) * r0.relvort_L1.powf(1.0 - 1.0 / df);
    let c2 = r0.energy.sqrt() * r0.relvort_Linf.sqrt();
    let t: Vec<f64> = series.iter().map(|r| r.t).collect();
    let radius: Vec<f64> = series.iter().map(|r| r.R).collect();
    let ratios: Vec<f64> = time_derivative(&t, &radius)
        .iter()
        .zip(&radius)
        .map(|(&dr, &rr)| ratio(dr.abs(), c * (c1 + c2 * rr.powf(df / 4.0 - 0.5))))
        .collect();
    Ok(BoundCheck::new("trajectory_dR_dt", c, &ratios, DIFFERENCE_SLACK))
}

/// `C_A = C ‖u₀‖^{1/3} ‖ω₀/r‖_∞^{1/2} (‖ω₀/r‖₁ + ‖rω₀‖₁)^{1/6}` for the
/// global-estimate constant `C`.
pub fn theorem13_constant(first: &DiagnosticsRecord, c_global: f64) -> f64 {
    c_global
        * first.energy.cbrt()
        * first.relvort_Linf.sqrt()
        * (first.relvort_L1 + first.r_omega_L1).powf(1.0 / 6.0)
}

/// `dL/dt ≤ C_A L^{1/3}` at every record, where `dL/dt` is the sampled
/// `sup |u^r|` (the integrand of `L`).
pub fn theorem13_monitor(series: &[DiagnosticsRecord], c_global: f64) -> Result<BoundCheck> {
    let first = series.first().ok_or_else(|| Error::InsufficientData("empty series".into()))?;
    let ca = theorem13_constant(first, c_global);
    let ratios: Vec<f64> = series.iter().map(|r| ratio(r.max_ur, ca * r.L.cbrt())).collect();
    Ok(BoundCheck::new("theorem13_dL_dt", ca, &ratios, DIFFERENCE_SLACK))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictedGrowth {
    Power { exponent: Rational },
    Exponential,
}

impl PredictedGrowth {
    pub fn for_dimension(d: Dimension) -> Self {
        match d.get() {
            6 => PredictedGrowth::Exponential,
            d => PredictedGrowth::Power { exponent: Ratio::new(4, 6 - d as i64) },
        }
    }
}

impl std::fmt::Display for PredictedGrowth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PredictedGrowth::Power { exponent } => write!(f, "{exponent}"),
            PredictedGrowth::Exponential => f.write_str("exp"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub d: Dimension,
    pub predicted: PredictedGrowth,
    pub fitted: Option<f64>,
}

/// Upper growth exponents of `R(t)` per dimension, next to any fits supplied.
pub fn high_d_growth_table(dims: &[Dimension], fits: &[(Dimension, f64)]) -> Vec<GrowthRow> {
    dims.iter()
        .map(|&d| GrowthRow {
            d,
            predicted: PredictedGrowth::for_dimension(d),
            fitted: fits.iter().find(|f| f.0 == d).map(|f| f.1),
        })
        .collect()
}

/// JSON verdict of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub experiment: String,
    pub fits: Vec<GrowthFit>,
    pub bound_checks: Vec<BoundCheck>,
    pub pass: bool,
}

impl Verdict {
    pub fn new(experiment: &str, fits: Vec<GrowthFit>, bound_checks: Vec<BoundCheck>) -> Self {
        let pass = bound_checks.iter().all(|b| b.pass);
        Self { experiment: experiment.to_owned(), fits, bound_checks, pass }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: f64, radius: f64, length: f64, max_ur: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            R: radius,
            omega_max: 1.0,
            relvort_L1: 1.0,
            relvort_Linf: 1.0,
            r_omega_L1: 1.0,
            energy: 1.0,
            I_r2: 1.0,
            I_z: 1.0,
            L: length,
            max_ur,
        }
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let s: Vec<(f64, f64)> = (0..40).map(|i| i as f64 * 0.25).map(|t| (t, (1.0 + t).powf(4.0 / 3.0))).collect();
        let fit = fit_growth_exponent(&s, None, SeriesName::R).unwrap();
        assert!((fit.beta - 4.0 / 3.0).abs() < 1e-10);
        assert!(fit.residual < 1e-10);
        let scaled: Vec<_> = s.iter().map(|&(t, v)| (t, 7.5 * v)).collect();
        let fit2 = fit_growth_exponent(&scaled, None, SeriesName::R).unwrap();
        assert!((fit2.beta - fit.beta).abs() < 1e-10);
    }

    #[test]
    fn constant_series_has_zero_exponent() {
        let s: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 3.0)).collect();
        let fit = fit_growth_exponent(&s, Some((0.0, 19.0)), SeriesName::OmegaMax).unwrap();
        assert!(fit.beta.abs() < 1e-14);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let s: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 1.0 - i as f64)).collect();
        assert!(matches!(fit_growth_exponent(&s, Some((0.0, 19.0)), SeriesName::R), Err(Error::Domain(_))));
        let short: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 1.0)).collect();
        assert!(matches!(fit_growth_exponent(&short, None, SeriesName::R), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn static_run_passes_bound_checks() {
        let recs: Vec<_> = (0..5).map(|i| record(i as f64, 0.0, 1.0, 0.0)).collect();
        let b = trajectory_bound_check(&recs, 1.0, Dimension::D3).unwrap();
        assert!(b.pass && b.max_ratio == 0.0);
        let m = theorem13_monitor(&recs, 1.0).unwrap();
        assert!(m.pass && m.max_ratio == 0.0);
        assert!(trajectory_bound_check(&recs[..2], 1.0, Dimension::D3).is_err());
    }

    #[test]
    fn trajectory_check_detects_fast_growth() {
        let recs: Vec<_> = (0..5).map(|i| record(i as f64, 1.0 + 10.0 * i as f64, 1.0, 0.0)).collect();
        assert!(!trajectory_bound_check(&recs, 1.0, Dimension::D3).unwrap().pass);
    }

    #[test]
    fn growth_table_matches_theorem() {
        let dims: Vec<Dimension> = (3..=6).map(|d| Dimension::new(d).unwrap()).collect();
        let t = high_d_growth_table(&dims, &[(Dimension::D3, 0.4)]);
        let shown: Vec<String> = t.iter().map(|r| r.predicted.to_string()).collect();
        assert_eq!(shown, ["4/3", "2", "4", "exp"]);
        assert_eq!(t[0].fitted, Some(0.4));
        assert_eq!(t[1].fitted, None);
    }

    #[test]
    fn drift_and_decrease() {
        let recs: Vec<_> = [2.0, 2.2, 1.9, 2.0].iter().enumerate().map(|(i, &v)| record(i as f64, v, 1.0, 0.0)).collect();
        assert!((max_relative_drift(&recs, |r| r.R) - 0.1).abs() < 1e-12);
        assert!((max_decrease(&recs, |r| r.R) - 0.3).abs() < 1e-12);
        assert!(BoundCheck::threshold("x", 0.5, 1.0).pass);
        assert!(!BoundCheck::threshold("x", 1.5, 1.0).pass);
    }

    #[test]
    fn derivative_is_exact_on_lines() {
        let t = [0.0, 0.5, 1.5, 2.0];
        let v: Vec<f64> = t.iter().map(|x| 3.0 * x + 1.0).collect();
        for dv in time_derivative(&t, &v) {
            assert!((dv - 3.0).abs() < 1e-14);
        }
    }
}
