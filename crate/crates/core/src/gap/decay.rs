use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::GapSolution;

/// Real-space profile of `α₀` and its exponential decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// Least-squares slope of `-ln|α₀|` over the local maxima inside the
    /// fit window, `None` when the window holds fewer than two maxima.
    pub fitted_decay_rate: Option<f64>,
    pub kappa_c: f64,
    /// Number of local maxima used in the fit.
    pub fit_points: usize,
    /// `∫ |α₀|²`, `∫ x²|α₀|²`, `∫ |α₀'|²`, `∫ x²|α₀'|²`.
    pub moments: [f64; 4],
    /// `∫ (1 + x²)(|α₀|² + |α₀'|²) dx`.
    pub weighted_moment: f64,
    /// `max_x |α₀(x) - α₀(-x)| / max|α₀|`.
    pub asymmetry: f64,
    pub warnings: Vec<String>,
}

/// Lower and upper edge of the fit window relative to `max|α₀|`.
pub const FIT_WINDOW: (f64, f64) = (1e-10, 1e-3);

/// Inverse transform of `α̂₀` to real space and an exponential fit of its
/// envelope. One dimension only.
///
/// `α̂₀` is evaluated from the Nyström extension on a momentum grid of
/// spacing at most 0.01 covering `[-Q, Q]`. The real-space grid extends
/// until the envelope has dropped well below the fit window.
pub fn decay_report(sol: &GapSolution) -> DecayReport {
    assert_eq!(sol.dim(), 1, "decay report is implemented in one dimension");
    let cutoff = sol.grid.cutoff;
    let steps = ((cutoff / 0.01).ceil() as usize).max(sol.grid.n_points);
    let dp = cutoff / steps as f64;
    // quadrature over [-Q, Q] with α̂ sampled separately at ±p
    let mut ps = Vec::with_capacity(2 * steps + 1);
    let mut wa = Vec::with_capacity(2 * steps + 1);
    for j in 0..=2 * steps {
        let p = -cutoff + j as f64 * dp;
        let w = if j == 0 || j == 2 * steps {
            0.5 * dp
        } else {
            dp
        };
        ps.push(p);
        wa.push(w * sol.alpha_hat_at(p) / (2.0 * PI).sqrt());
    }

    let x_max = 40.0 / sol.kappa_c.max(0.05);
    let dx = (0.05f64)
        .min(0.25 / sol.kappa_c.max(1e-3))
        .min(PI / (4.0 * cutoff));
    let nx = (x_max / dx).ceil() as usize;
    let mut alpha = Vec::with_capacity(nx + 1);
    let mut dalpha = Vec::with_capacity(nx + 1);
    let mut asym = 0.0f64;
    for i in 0..=nx {
        let x = i as f64 * dx;
        let (mut re, mut im, mut dre) = (0.0, 0.0, 0.0);
        for (p, w) in ps.iter().zip(&wa) {
            let (s, c) = (p * x).sin_cos();
            re += w * c;
            im += w * s;
            dre -= w * p * s;
        }
        alpha.push(re);
        dalpha.push(dre);
        // α₀(x) - α₀(-x) = 2i Σ w sin(px)
        asym = asym.max(2.0 * im.abs());
    }
    let amax = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));

    let mut moments = [0.0; 4];
    for i in 0..=nx {
        let x = i as f64 * dx;
        // even integrands over the full line
        let w = if i == 0 || i == nx { dx } else { 2.0 * dx };
        let a2 = alpha[i] * alpha[i];
        let d2 = dalpha[i] * dalpha[i];
        moments[0] += w * a2;
        moments[1] += w * x * x * a2;
        moments[2] += w * d2;
        moments[3] += w * x * x * d2;
    }
    let weighted_moment = moments.iter().sum();

    let (lo, hi) = (FIT_WINDOW.0 * amax, FIT_WINDOW.1 * amax);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 1..nx {
        let a = alpha[i].abs();
        if a >= alpha[i - 1].abs() && a >= alpha[i + 1].abs() && a >= lo && a <= hi {
            xs.push(i as f64 * dx);
            ys.push(a.ln());
        }
    }
    let mut warnings = Vec::new();
    let fitted_decay_rate = if xs.len() >= 2 {
        Some(-least_squares_slope(&xs, &ys))
    } else {
        warnings.push(format!(
            "decay fit window holds {} local maxima; refine the momentum grid",
            xs.len()
        ));
        None
    };
    if alpha[nx].abs() > lo {
        warnings.push("real-space grid ends before |α₀| leaves the fit window".to_string());
    }
    DecayReport {
        fitted_decay_rate,
        kappa_c: sol.kappa_c,
        fit_points: xs.len(),
        moments,
        weighted_moment,
        asymmetry: asym / amax,
        warnings,
    }
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}
