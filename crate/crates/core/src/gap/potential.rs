use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::GapError;

/// Shape of the pair interaction `V(x)`. All families are radial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PotentialFamily {
    /// `V(x) = -depth · exp(-|x|²/width²)`.
    GaussianWell { depth: f64, width: f64 },
    /// `V(x) = -depth` for `|x| < width`, zero outside. One dimension only.
    SquareWell { depth: f64, width: f64 },
    /// `V(j · spacing) = values[j]` for `j >= 0`, linear in between and zero
    /// past the last sample. One dimension only.
    CustomSampled { spacing: f64, values: Vec<f64> },
}

/// Interaction, chemical potential and dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(flatten)]
    pub family: PotentialFamily,
    pub mu: f64,
    pub dim: usize,
}

/// Surface area of the unit sphere in `R^d`, counting the two points of
/// `S^0` in one dimension.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => f64::NAN,
    }
}

fn invalid(key: &str, msg: impl Into<String>) -> GapError {
    GapError::InvalidSpec {
        key: key.to_string(),
        msg: msg.into(),
    }
}

impl PotentialSpec {
    pub fn gaussian_well(depth: f64, width: f64, mu: f64, dim: usize) -> Self {
        PotentialSpec {
            family: PotentialFamily::GaussianWell { depth, width },
            mu,
            dim,
        }
    }

    /// The spec with no interaction at all (a Gaussian well of zero depth).
    pub fn free(mu: f64, dim: usize) -> Self {
        Self::gaussian_well(0.0, 1.0, mu, dim)
    }

    pub fn validate(&self) -> Result<(), GapError> {
        if !(1..=3).contains(&self.dim) {
            return Err(invalid(
                "dim",
                format!("must be 1, 2 or 3, got {}", self.dim),
            ));
        }
        if !self.mu.is_finite() {
            return Err(invalid("mu", "must be finite"));
        }
        match &self.family {
            PotentialFamily::GaussianWell { depth, width }
            | PotentialFamily::SquareWell { depth, width } => {
                if !(depth.is_finite() && *depth >= 0.0) {
                    return Err(invalid(
                        "depth",
                        format!("must be finite and nonnegative, got {depth}"),
                    ));
                }
                if !(width.is_finite() && *width > 0.0) {
                    return Err(invalid(
                        "width",
                        format!("must be finite and positive, got {width}"),
                    ));
                }
            }
            PotentialFamily::CustomSampled { spacing, values } => {
                if !(spacing.is_finite() && *spacing > 0.0) {
                    return Err(invalid("spacing", "must be finite and positive"));
                }
                if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("values", "need at least two finite samples"));
                }
            }
        }
        if self.dim != 1 && !matches!(self.family, PotentialFamily::GaussianWell { .. }) {
            return Err(GapError::Unsupported(format!(
                "only the gaussian_well family is implemented for dim = {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// Typical interaction range, used for grid sizing.
    pub fn length_scale(&self) -> f64 {
        match &self.family {
            PotentialFamily::GaussianWell { width, .. }
            | PotentialFamily::SquareWell { width, .. } => *width,
            PotentialFamily::CustomSampled { spacing, values } => {
                let (mut m0, mut m2) = (0.0, 0.0);
                for (j, v) in values.iter().enumerate() {
                    let x = j as f64 * spacing;
                    m0 += v.abs();
                    m2 += x * x * v.abs();
                }
                if m0 > 0.0 {
                    (m2 / m0).sqrt().max(*spacing)
                } else {
                    *spacing
                }
            }
        }
    }

    /// True when `V` vanishes identically.
    pub fn is_free(&self) -> bool {
        match &self.family {
            PotentialFamily::GaussianWell { depth, .. }
            | PotentialFamily::SquareWell { depth, .. } => *depth == 0.0,
            PotentialFamily::CustomSampled { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// `V` at distance `r` from the origin.
    pub fn potential(&self, r: f64) -> f64 {
        let r = r.abs();
        match &self.family {
            PotentialFamily::GaussianWell { depth, width } => {
                -depth * (-(r * r) / (width * width)).exp()
            }
            PotentialFamily::SquareWell { depth, width } => {
                if r < *width {
                    -depth
                } else {
                    0.0
                }
            }
            PotentialFamily::CustomSampled { spacing, values } => {
                let s = r / spacing;
                let j = s.floor() as usize;
                if j + 1 >= values.len() {
                    if j + 1 == values.len() && s == j as f64 {
                        values[j]
                    } else {
                        0.0
                    }
                } else {
                    let frac = s - j as f64;
                    values[j] * (1.0 - frac) + values[j + 1] * frac
                }
            }
        }
    }

    /// Radius beyond which `|V| < rel_tol · max|V|`.
    pub fn support_radius(&self, rel_tol: f64) -> f64 {
        match &self.family {
            PotentialFamily::GaussianWell { width, .. } => {
                width * (1.0 / rel_tol).ln().max(0.0).sqrt()
            }
            PotentialFamily::SquareWell { width, .. } => *width,
            PotentialFamily::CustomSampled { spacing, values } => {
                let vmax = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let last = values
                    .iter()
                    .rposition(|v| v.abs() >= rel_tol * vmax)
                    .unwrap_or(0);
                (last + 1) as f64 * spacing
            }
        }
    }

    /// Unitary Fourier transform `V̂(k) = (2π)^{-d/2} ∫ V(x) e^{-ik·x} dx` as a
    /// function of `|k|`.
    pub fn v_hat(&self, k: f64) -> f64 {
        self.v_hat_derivative(k, 0)
    }

    /// `d^n V̂ / dk^n` for `n <= 2`. Derivatives are only available in one
    /// dimension, where `V̂` is an even function of the signed `k`.
    pub fn v_hat_derivative(&self, k: f64, order: usize) -> f64 {
        assert!(order <= 2, "only derivatives up to order 2 are implemented");
        match &self.family {
            PotentialFamily::GaussianWell { depth, width } => {
                let d = self.dim as i32;
                let w2 = width * width;
                let v = -depth
                    * width.powi(d)
                    * 2f64.powf(-0.5 * d as f64)
                    * (-0.25 * k * k * w2).exp();
                match order {
                    0 => v,
                    1 => -0.5 * k * w2 * v,
                    _ => (0.25 * k * k * w2 * w2 - 0.5 * w2) * v,
                }
            }
            PotentialFamily::SquareWell { depth, width } => {
                -depth * (2.0 / PI).sqrt() * sinc_derivative(k, *width, order)
            }
            PotentialFamily::CustomSampled { spacing, values } => {
                // trapezoid over the samples on the half line
                let mut acc = 0.0;
                let n = values.len();
                for (j, v) in values.iter().enumerate() {
                    let x = j as f64 * spacing;
                    let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                    let term = match order {
                        0 => (k * x).cos(),
                        1 => -x * (k * x).sin(),
                        _ => -x * x * (k * x).cos(),
                    };
                    acc += w * v * term;
                }
                (2.0 / PI).sqrt() * spacing * acc
            }
        }
    }

    /// Angular average of `V̂(|p - k ω|)` over unit vectors `ω`.
    ///
    /// In one dimension this is `(V̂(p-k) + V̂(p+k))/2`, the kernel of `V` on
    /// even functions.
    pub fn shell_average(&self, p: f64, k: f64) -> f64 {
        match self.dim {
            1 => 0.5 * (self.v_hat(p - k) + self.v_hat(p + k)),
            dim => {
                let PotentialFamily::GaussianWell { depth, width } = &self.family else {
                    unreachable!("validated: only gaussian wells in dim > 1")
                };
                let w2 = width * width;
                let prefactor = -depth * width.powi(dim as i32) * 2f64.powf(-0.5 * dim as f64);
                let base = (-0.25 * (p - k) * (p - k) * w2).exp();
                let x = p * k * w2;
                let angular = if dim == 3 {
                    // (1 - e^{-x})/x
                    if x < 1e-8 {
                        1.0 - 0.5 * x
                    } else {
                        -(-x).exp_m1() / x
                    }
                } else {
                    scaled_bessel_i0(0.5 * x)
                };
                prefactor * base * angular
            }
        }
    }

    /// `∂^n/∂p^n` of [`Self::shell_average`] in one dimension.
    pub fn shell_average_derivative(&self, p: f64, k: f64, order: usize) -> f64 {
        debug_assert_eq!(self.dim, 1);
        0.5 * (self.v_hat_derivative(p - k, order) + self.v_hat_derivative(p + k, order))
    }
}

/// `e^{-x} I_0(x)` for `x >= 0`, by the trapezoid rule on
/// `(1/π) ∫_0^π e^{x (cos θ - 1)} dθ`, which converges geometrically for a
/// periodic analytic integrand.
fn scaled_bessel_i0(x: f64) -> f64 {
    const N: usize = 128;
    let mut acc = 0.5 * (1.0 + (-2.0 * x).exp());
    for j in 1..N {
        let theta = PI * j as f64 / N as f64;
        acc += (x * (theta.cos() - 1.0)).exp();
    }
    acc / N as f64
}

/// `d^n/dk^n [sin(k w)/k]`.
fn sinc_derivative(k: f64, w: f64, order: usize) -> f64 {
    let y = k * w;
    if y.abs() < 1.0 {
        // sin(kw)/k = Σ (-1)^m w^{2m+1} k^{2m} / (2m+1)!
        let mut sum = 0.0;
        let mut coef = w; // w^{2m+1}/(2m+1)! with sign
        for m in 0..20usize {
            let e = 2 * m;
            let term = match order {
                0 => coef * k.powi(e as i32),
                1 if e >= 1 => coef * e as f64 * k.powi(e as i32 - 1),
                2 if e >= 2 => coef * (e * (e - 1)) as f64 * k.powi(e as i32 - 2),
                _ => 0.0,
            };
            sum += term;
            coef *= -w * w / (((e + 2) * (e + 3)) as f64);
        }
        sum
    } else {
        let (s, c) = y.sin_cos();
        match order {
            0 => s / k,
            1 => (y * c - s) / (k * k),
            _ => (-y * y * s - 2.0 * y * c + 2.0 * s) / (k * k * k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = 0.5 * (f(a) + f(b));
        for j in 1..n {
            acc += f(a + j as f64 * h);
        }
        acc * h
    }

    #[test]
    fn gaussian_transform_matches_quadrature() {
        let spec = PotentialSpec::gaussian_well(2.0, 1.0, 1.0, 1);
        for &k in &[0.0, 0.7, 2.5] {
            let q = trapezoid(|x| spec.potential(x) * (k * x).cos(), -12.0, 12.0, 4000)
                / (2.0 * PI).sqrt();
            assert!((spec.v_hat(k) - q).abs() < 1e-12, "k = {k}");
            assert!(spec.v_hat(k) <= 0.0);
        }
    }

    #[test]
    fn square_well_transform_and_derivatives() {
        let spec = PotentialSpec {
            family: PotentialFamily::SquareWell {
                depth: 1.5,
                width: 0.8,
            },
            mu: 1.0,
            dim: 1,
        };
        for &k in &[0.0f64, 0.3, 1.249, 1.251, 4.0] {
            let direct =
                -1.5 * (2.0 / PI).sqrt() * if k == 0.0 { 0.8 } else { (k * 0.8).sin() / k };
            assert!((spec.v_hat(k) - direct).abs() < 1e-14);
            let h = 1e-4;
            let d1 = (spec.v_hat(k + h) - spec.v_hat(k - h)) / (2.0 * h);
            let d2 = (spec.v_hat(k + h) - 2.0 * spec.v_hat(k) + spec.v_hat(k - h)) / (h * h);
            assert!((spec.v_hat_derivative(k, 1) - d1).abs() < 1e-7);
            assert!((spec.v_hat_derivative(k, 2) - d2).abs() < 1e-5);
        }
    }

    #[test]
    fn gaussian_derivatives_match_finite_differences() {
        let spec = PotentialSpec::gaussian_well(2.0, 1.3, 1.0, 1);
        let h = 1e-4;
        for &k in &[-1.0, 0.0, 0.9, 3.1] {
            let d1 = (spec.v_hat(k + h) - spec.v_hat(k - h)) / (2.0 * h);
            let d2 = (spec.v_hat(k + h) - 2.0 * spec.v_hat(k) + spec.v_hat(k - h)) / (h * h);
            assert!((spec.v_hat_derivative(k, 1) - d1).abs() < 1e-8);
            assert!((spec.v_hat_derivative(k, 2) - d2).abs() < 1e-6);
        }
    }

    #[test]
    fn custom_samples_reproduce_gaussian() {
        let g = PotentialSpec::gaussian_well(2.0, 1.0, 1.0, 1);
        let dx = 0.01;
        let values: Vec<f64> = (0..1200).map(|j| g.potential(j as f64 * dx)).collect();
        let c = PotentialSpec {
            family: PotentialFamily::CustomSampled {
                spacing: dx,
                values,
            },
            mu: 1.0,
            dim: 1,
        };
        for &k in &[0.0, 1.0, 3.0] {
            // trapezoid on the half line misses only the O(dx^2) endpoint correction at x = 0
            assert!((c.v_hat(k) - g.v_hat(k)).abs() < 1e-5, "k = {k}");
        }
        assert!((c.potential(0.005) - 0.5 * (g.potential(0.0) + g.potential(0.01))).abs() < 1e-12);
        assert_eq!(c.potential(100.0), 0.0);
    }

    #[test]
    fn shell_average_in_three_dimensions() {
        let spec = PotentialSpec::gaussian_well(1.0, 0.9, 1.0, 3);
        let (p, k) = (1.3, 0.8);
        // average over cos θ in [-1, 1] with weight 1/2
        let avg = trapezoid(
            |u| spec.v_hat((p * p + k * k - 2.0 * p * k * u).sqrt()),
            -1.0,
            1.0,
            20000,
        ) / 2.0;
        assert!((spec.shell_average(p, k) - avg).abs() < 1e-9);
    }

    #[test]
    fn shell_average_in_two_dimensions() {
        let spec = PotentialSpec::gaussian_well(1.0, 0.9, 1.0, 2);
        let (p, k) = (2.1, 1.7);
        let avg = trapezoid(
            |th| spec.v_hat((p * p + k * k - 2.0 * p * k * th.cos()).sqrt()),
            0.0,
            PI,
            4000,
        ) / PI;
        assert!((spec.shell_average(p, k) - avg).abs() < 1e-12);
    }

    #[test]
    fn validation_names_keys() {
        let bad = PotentialSpec::gaussian_well(-1.0, 1.0, 1.0, 1);
        assert!(
            matches!(bad.validate(), Err(GapError::InvalidSpec { ref key, .. }) if key == "depth")
        );
        let bad = PotentialSpec::gaussian_well(1.0, 0.0, 1.0, 1);
        assert!(
            matches!(bad.validate(), Err(GapError::InvalidSpec { ref key, .. }) if key == "width")
        );
        let bad = PotentialSpec::gaussian_well(1.0, 1.0, 1.0, 4);
        assert!(bad.validate().is_err());
        let sq = PotentialSpec {
            family: PotentialFamily::SquareWell {
                depth: 1.0,
                width: 1.0,
            },
            mu: 1.0,
            dim: 2,
        };
        assert!(matches!(sq.validate(), Err(GapError::Unsupported(_))));
    }

    #[test]
    fn serde_round_trip() {
        let spec = PotentialSpec::gaussian_well(2.0, 1.0, 1.0, 1);
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains("\"family\":\"gaussian_well\""));
        let back: PotentialSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
    }
}
