use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::BdgError;

/// `h ∈ {2⁻³, 2⁻⁴, 2⁻⁵, 2⁻⁶}`.
pub const DEFAULT_H_LIST: [f64; 4] = [0.125, 0.0625, 0.03125, 0.015625];

/// Observables below this are treated as roundoff and left out of fits.
pub const FIT_FLOOR: f64 = 100.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub h: f64,
    /// Quantity whose decay in `h` is fitted.
    pub observable: f64,
    /// Reference value the point is compared against.
    pub target: f64,
    pub residual: f64,
    #[serde(default)]
    pub details: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub name: String,
    pub h_values: Vec<f64>,
    pub observed: Vec<f64>,
    pub fitted_order: f64,
    pub valid_points: usize,
    pub reference: BTreeMap<String, f64>,
    pub points: Vec<SweepPoint>,
    pub failures: Vec<String>,
}

/// Least-squares slope of `ln|y|` against `ln h` over points with
/// `|y| > 100 ε`; returns the slope and the number of points used.
pub fn fit_order(h: &[f64], y: &[f64]) -> Result<(f64, usize), BdgError> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(y)
        .filter(|(_, v)| v.abs() > FIT_FLOOR && v.is_finite())
        .map(|(a, b)| (a.ln(), b.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(BdgError::TooFewPoints {
            valid: pts.len(),
            failures: Vec::new(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok((sxy / sxx, pts.len()))
}

/// Evaluates `point` at each `h` (which must decrease), collects failures,
/// and fits the observable's order.
pub fn h_sweep(
    name: &str,
    h_list: &[f64],
    reference: BTreeMap<String, f64>,
    mut point: impl FnMut(f64) -> Result<SweepPoint, BdgError>,
) -> Result<SweepReport, BdgError> {
    if h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(BdgError::InvalidInput(
            "h list must be strictly decreasing".into(),
        ));
    }
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for &h in h_list {
        match point(h) {
            Ok(p) => points.push(p),
            Err(e) => {
                log::warn!("sweep {name}: h = {h} failed: {e}");
                failures.push(format!("h = {h}: {e}"));
            }
        }
    }
    let h_values: Vec<f64> = points.iter().map(|p| p.h).collect();
    let observed: Vec<f64> = points.iter().map(|p| p.observable).collect();
    let (fitted_order, valid_points) = match fit_order(&h_values, &observed) {
        Ok(r) => r,
        Err(BdgError::TooFewPoints { valid, .. }) => {
            return Err(BdgError::TooFewPoints { valid, failures })
        }
        Err(e) => return Err(e),
    };
    Ok(SweepReport {
        name: name.to_string(),
        h_values,
        observed,
        fitted_order,
        valid_points,
        reference,
        points,
        failures,
    })
}

impl SweepReport {
    /// `h,observable,target,residual` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep,h,observable,target,residual\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e}\n",
                self.name, p.h, p.observable, p.target, p.residual
            ));
        }
        out
    }
}
