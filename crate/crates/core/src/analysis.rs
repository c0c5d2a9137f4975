//! Rate prediction, log-log fitting of decay series and experiment reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boundary::AssumptionReport;
use crate::error::{Error, Result};
use crate::resolvent::{BoundReport, ScanSeries};
use crate::scenario::{GridParams, Scenario, WallLaw};
use crate::series::TimeSeries;
use crate::spectral::{EquilibriumProfile, IntegrabilityReport};

/// Allowed shortfall of a fitted decay exponent below the predicted one.
pub const RATE_MARGIN: f64 = 0.05;
pub const MIN_FIT_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (0 for two points).
    pub slope_stderr: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len().min(y.len());
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = (0..n)
        .map(|i| (y[i] - intercept - slope * x[i]).powi(2))
        .sum();
    let slope_stderr = if n > 2 && sxx > 0.0 {
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    LineFit {
        slope,
        intercept,
        slope_stderr,
        r_squared,
    }
}

/// Decay exponent `k / (alpha (k+1) + 1)` delivered by the quantified Ingham
/// argument from `C^k` resolvent bounds blowing up like `|s|^-alpha`.
pub fn predicted_exponent(k: u32, alpha: f64) -> f64 {
    let k = k as f64;
    k / (alpha * (k + 1.0) + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub column: String,
    pub fitted_exponent: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub n_points: usize,
    pub predicted_exponent: f64,
    pub k: u32,
    pub verdict: Verdict,
}

/// Fit `value ~ C t^-p` on the window and compare `p` with the transport-case
/// prediction for `k` (resolvent blow-up order 2).
pub fn fit_rate(
    series: &TimeSeries,
    column: &str,
    window: (f64, f64),
    k: u32,
) -> Result<RateReport> {
    let (t_lo, t_hi) = window;
    if !(t_lo < t_hi) {
        return Err(Error::Parameter(format!(
            "empty fit window [{t_lo}, {t_hi}]"
        )));
    }
    let values = series
        .column(column)
        .ok_or_else(|| Error::Parameter(format!("time series has no column '{column}'")))?;
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for (&t, &v) in series.times.iter().zip(values) {
        if t < t_lo || t > t_hi {
            continue;
        }
        if !(v > 0.0) {
            return Err(Error::Data(format!(
                "{column} = {v:e} at t = {t}; the series reached the quadrature floor, shrink the window"
            )));
        }
        lx.push(t.ln());
        ly.push(v.ln());
    }
    if lx.len() < MIN_FIT_POINTS {
        return Err(Error::Parameter(format!(
            "{} points in the fit window, need at least {MIN_FIT_POINTS}",
            lx.len()
        )));
    }
    let fit = least_squares(&lx, &ly);
    let fitted = -fit.slope;
    let predicted = predicted_exponent(k, 2.0);
    Ok(RateReport {
        column: column.to_string(),
        fitted_exponent: fitted,
        stderr: fit.slope_stderr,
        r_squared: fit.r_squared,
        window,
        n_points: lx.len(),
        predicted_exponent: predicted,
        k,
        verdict: if fitted >= predicted - RATE_MARGIN {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    })
}

/// `n` log-spaced points covering `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Hex SHA-256 of the canonical configuration text.
pub fn config_hash(canonical: &str) -> String {
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub a: f64,
    pub left: WallLaw,
    pub right: WallLaw,
    pub grid: GridParams,
}

impl Provenance {
    pub fn new(sc: &Scenario, config_hash: impl Into<String>, seeds: Vec<u64>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.into(),
            seeds,
            a: sc.a,
            left: sc.left(),
            right: sc.right(),
            grid: sc.grid,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumSummary {
    pub r_sigma: f64,
    pub degenerate: bool,
    pub integrability: IntegrabilityReport,
    /// Present iff an invariant density exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi0: Option<Psi0Summary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Psi0Summary {
    pub integral: f64,
    pub min_value: f64,
    pub n_x: usize,
    pub n_v: usize,
}

impl From<&EquilibriumProfile> for EquilibriumSummary {
    fn from(eq: &EquilibriumProfile) -> Self {
        Self {
            r_sigma: eq.r_sigma,
            degenerate: eq.degenerate,
            integrability: eq.integrability.clone(),
            psi0: eq.psi0.as_ref().map(|p| Psi0Summary {
                integral: p.integral(),
                min_value: p.min_value(),
                n_x: p.n_x(),
                n_v: p.n_v(),
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanEntry {
    pub series: ScanSeries,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedSeries {
    pub name: String,
    pub series: TimeSeries,
}

/// Everything one run produced, in a fixed field order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub scans: Vec<ScanEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub series: Vec<NamedSeries>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub fits: Vec<RateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assumptions: Option<AssumptionReport>,
    /// Named scalars specific to one run (resample counts, residuals, empirical exponents).
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub diagnostics: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InternalConsistency(format!("report serialization: {e}")))
    }
}

pub fn build_report(
    provenance: Provenance,
    equilibrium: Option<&EquilibriumProfile>,
    scans: Vec<ScanEntry>,
    series: Vec<NamedSeries>,
    fits: Vec<RateReport>,
) -> ExperimentReport {
    ExperimentReport {
        provenance,
        equilibrium: equilibrium.map(Into::into),
        scans,
        series,
        fits,
        assumptions: None,
        diagnostics: BTreeMap::new(),
    }
}
