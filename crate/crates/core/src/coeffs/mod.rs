//! Ginzburg-Landau coefficients and semiclassical expansion constants.
//!
//! Every integral runs over `R^d` with measure `dq/(2π)^d` and is evaluated
//! with the radial quadrature of the profile. Wherever an integrand carries
//! `g1(β x)/x` with `x = q² - μ` it is written as `β · g1_over_z(β x)`, so
//! nothing is divided by `x`.

mod profile;
mod smallp;

pub use profile::{
    fd_derivative, momentum_measure, GaussianProfile, RadialQuadrature, TProfile, FD_STEP,
};
pub use smallp::{semiclassical_smallp_constants, SmallPConstants};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gap::{sech2, GapSolution};
use crate::specfun::{g0, g1, g1_over_z, g2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoeffError {
    #[error("gap solution is not normalized; run normalize first")]
    NotNormalized,
    #[error("beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("{0}")]
    Unsupported(String),
}

/// `B1` (a `d×d` matrix), `B2`, `B3` and the parameters they were computed at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GLCoefficients {
    pub b1: Vec<Vec<f64>>,
    pub b2: f64,
    pub b3: f64,
    pub d_param: f64,
    pub beta_c: f64,
}

impl GLCoefficients {
    pub fn dim(&self) -> usize {
        self.b1.len()
    }

    /// Coefficients for a one-dimensional problem given directly.
    pub fn scalar(b1: f64, b2: f64, b3: f64) -> Self {
        GLCoefficients {
            b1: vec![vec![b1]],
            b2,
            b3,
            d_param: f64::NAN,
            beta_c: f64::NAN,
        }
    }

    /// Smallest eigenvalue of `B1`, by Jacobi rotations (`d <= 3`).
    pub fn b1_min_eigenvalue(&self) -> f64 {
        symmetric_eigenvalues(&self.b1)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi sweeps.
pub fn symmetric_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    for _ in 0..50 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[i][j] * a[i][j];
                }
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

fn scaled_identity(dim: usize, value: f64) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { value } else { 0.0 }).collect())
        .collect()
}

/// `∫ t² (g1(βx) + 2β q² g2(βx)/d)` over `R^d`, the radial reduction of
/// `∫ t² (δ_ij g1 + 2β q_i q_j g2)` divided by `δ_ij`.
fn gradient_integral(quad: &RadialQuadrature, mu: f64, beta: f64, dim: usize) -> f64 {
    quad.integrate(|q, t| {
        let z = beta * (q * q - mu);
        t * t * (g1(z) + 2.0 * beta * q * q * g2(z) / dim as f64)
    })
}

/// `B1`, `B2` and `B3` at `β_c` for a profile and temperature parameter `D`.
pub fn coefficients_for(
    profile: &dyn TProfile,
    beta_c: f64,
    d_param: f64,
) -> Result<GLCoefficients, CoeffError> {
    if !(beta_c > 0.0) {
        return Err(CoeffError::NonPositiveBeta(beta_c));
    }
    let dim = profile.dim();
    let mu = profile.mu();
    let quad = profile.quadrature();
    let m = momentum_measure(dim);
    let b = beta_c;
    let b1 = b * b / 16.0 * gradient_integral(&quad, mu, b, dim) * m;
    let b2 = b * b / 4.0 * quad.integrate(|q, t| t * t * g1(b * (q * q - mu))) * m;
    let b3 = b * b / 16.0 * quad.integrate(|q, t| t.powi(4) * b * g1_over_z(b * (q * q - mu))) * m;
    Ok(GLCoefficients {
        b1: scaled_identity(dim, b1),
        b2,
        b3,
        d_param,
        beta_c,
    })
}

/// GL coefficients of a normalized gap solution.
pub fn compute_coefficients(sol: &GapSolution) -> Result<GLCoefficients, CoeffError> {
    let d = sol.d_param.ok_or(CoeffError::NotNormalized)?;
    coefficients_for(sol, sol.beta_c, d)
}

/// `B3` through the normalization condition:
/// `(β_c D / 16) ∫ t² sech²(β_c x/2) dq/(2π)^d`.
pub fn b3_sech_form(sol: &GapSolution) -> Result<f64, CoeffError> {
    let d = sol.d_param.ok_or(CoeffError::NotNormalized)?;
    let b = sol.beta_c;
    let mu = sol.spec.mu;
    let m = momentum_measure(sol.spec.dim);
    Ok(b * d / 16.0 * sol.integrate(|q, t| t * t * sech2(0.5 * b * (q * q - mu))) * m)
}

/// Coefficient of `‖ψ‖₂²` in `E1`: `-(β/2) ∫ t² g0(β x) dq/(2π)^d`.
pub fn e1_constant(profile: &dyn TProfile, beta: f64) -> Result<f64, CoeffError> {
    if !(beta > 0.0) {
        return Err(CoeffError::NonPositiveBeta(beta));
    }
    let mu = profile.mu();
    let m = momentum_measure(profile.dim());
    Ok(-0.5
        * beta
        * profile
            .quadrature()
            .integrate(|q, t| t * t * g0(beta * (q * q - mu)))
        * m)
}

/// Relative disagreement above which the two `t''` routes trigger a warning.
pub const DERIVATIVE_MISMATCH_TOL: f64 = 1e-5;

/// The four coefficient blocks of `E2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2Constants {
    /// Multiplies `⟨∂_j ψ|∂_k ψ⟩`.
    pub c_grad_t: Vec<Vec<f64>>,
    /// Multiplies `⟨(∂_j + 2iA_j)ψ|(∂_k + 2iA_k)ψ⟩`.
    pub c_grad_psi: Vec<Vec<f64>>,
    /// Multiplies `⟨ψ|W|ψ⟩`.
    pub c_w: f64,
    /// Multiplies `‖ψ‖₄⁴`.
    pub c_quartic: f64,
    /// `c_grad_t` with `t''` from fourth-order finite differences.
    pub c_grad_t_fd: Vec<Vec<f64>>,
    /// Relative difference between the two `c_grad_t` routes.
    pub derivative_mismatch: f64,
    pub warnings: Vec<String>,
}

/// Quadratic and quartic moments of the fields that `E2` pairs with its
/// constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMoments {
    pub norm2: f64,
    pub grad: Vec<Vec<f64>>,
    pub covariant: Vec<Vec<f64>>,
    pub potential: f64,
    pub quartic: f64,
}

impl E2Constants {
    /// `E2` for fields with the given moments.
    pub fn assemble(&self, m: &FieldMoments) -> f64 {
        let mut e = self.c_w * m.potential + self.c_quartic * m.quartic;
        for j in 0..self.c_grad_t.len() {
            for k in 0..self.c_grad_t.len() {
                e += self.c_grad_t[j][k] * m.grad[j][k] + self.c_grad_psi[j][k] * m.covariant[j][k];
            }
        }
        e
    }
}

/// `∫ t [∂_j ∂_k t] g0(βx)` reduced to `δ_jk/d ∫ t (t'' + (d-1) t'/q) g0`.
fn hessian_integral(profile: &dyn TProfile, quad: &RadialQuadrature, beta: f64, fd: bool) -> f64 {
    let mu = profile.mu();
    let dim = profile.dim();
    let deriv = |p: f64, order: usize| {
        if fd {
            fd_derivative(|x| profile.t(x.abs()), p, order)
        } else {
            profile.t_derivative(p, order)
        }
    };
    quad.integrate(|q, t| {
        let mut lap = deriv(q, 2);
        if dim > 1 {
            lap += (dim as f64 - 1.0) * deriv(q, 1) / q;
        }
        t * lap / dim as f64 * g0(beta * (q * q - mu))
    })
}

/// Constants of `E2` at inverse temperature `β`.
pub fn e2_constants(profile: &dyn TProfile, beta: f64) -> Result<E2Constants, CoeffError> {
    if !(beta > 0.0) {
        return Err(CoeffError::NonPositiveBeta(beta));
    }
    let dim = profile.dim();
    let mu = profile.mu();
    let quad = profile.quadrature();
    let m = momentum_measure(dim);
    let cgt = -beta / 8.0 * hessian_integral(profile, &quad, beta, false) * m;
    let cgt_fd = -beta / 8.0 * hessian_integral(profile, &quad, beta, true) * m;
    let mismatch = ((cgt - cgt_fd) / cgt).abs();
    let mut warnings = Vec::new();
    if mismatch > DERIVATIVE_MISMATCH_TOL {
        let msg =
            format!("t'' routes disagree: relative difference {mismatch:.3e} in the t·t'' block");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let cgp = beta * beta / 8.0 * gradient_integral(&quad, mu, beta, dim) * m;
    let c_w = beta * beta / 2.0 * quad.integrate(|q, t| t * t * g1(beta * (q * q - mu))) * m;
    let c_quartic = beta * beta / 8.0
        * quad.integrate(|q, t| t.powi(4) * beta * g1_over_z(beta * (q * q - mu)))
        * m;
    Ok(E2Constants {
        c_grad_t: scaled_identity(dim, cgt),
        c_grad_psi: scaled_identity(dim, cgp),
        c_w,
        c_quartic,
        c_grad_t_fd: scaled_identity(dim, cgt_fd),
        derivative_mismatch: mismatch,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap::{find_tc, normalize, MomentumGrid, PotentialSpec};
    use std::f64::consts::PI;
    use std::sync::OnceLock;

    fn reference() -> &'static GapSolution {
        static SOL: OnceLock<GapSolution> = OnceLock::new();
        SOL.get_or_init(|| {
            let spec = PotentialSpec::gaussian_well(2.0, 1.0, 1.0, 1);
            normalize(
                &find_tc(&spec, &MomentumGrid::default_for(&spec)).unwrap(),
                1.0,
            )
            .unwrap()
        })
    }

    #[test]
    fn reference_coefficients() {
        let sol = reference();
        let c = compute_coefficients(sol).unwrap();
        assert!(c.b1[0][0] > 0.0 && c.b3 > 0.0);
        assert!((c.b1[0][0] - 0.135_144).abs() < 1e-5, "{}", c.b1[0][0]);
        assert!((c.b2 + 0.024_562_9).abs() < 1e-6, "{}", c.b2);
        assert!((c.b3 - 0.184_442).abs() < 1e-5, "{}", c.b3);
        let alt = b3_sech_form(sol).unwrap();
        assert!(((alt - c.b3) / c.b3).abs() < 1e-12);
    }

    #[test]
    fn unnormalized_solution_rejected() {
        let spec = PotentialSpec::gaussian_well(2.0, 1.0, 1.0, 1);
        let sol = find_tc(
            &spec,
            &MomentumGrid {
                cutoff: 12.0,
                n_points: 128,
            },
        )
        .unwrap();
        assert_eq!(compute_coefficients(&sol), Err(CoeffError::NotNormalized));
    }

    #[test]
    fn e2_consistency_with_b_coefficients() {
        let sol = reference();
        let c = compute_coefficients(sol).unwrap();
        let e = e2_constants(sol, sol.beta_c).unwrap();
        assert!((e.c_w - 2.0 * c.b2).abs() < 1e-14);
        assert!((e.c_quartic - 2.0 * c.b3).abs() < 1e-14);
        assert!((e.c_grad_psi[0][0] - 2.0 * c.b1[0][0]).abs() < 1e-14);
        assert!(
            e.derivative_mismatch < DERIVATIVE_MISMATCH_TOL,
            "{}",
            e.derivative_mismatch
        );
        assert!(e.warnings.is_empty());
    }

    #[test]
    fn e1_homogeneity_and_zero() {
        let zero = GaussianProfile::new(0.0, 1.0, 1.0, 1);
        assert_eq!(e1_constant(&zero, 2.0).unwrap(), 0.0);
        let one = GaussianProfile::new(1.0, 1.0, 1.0, 1);
        let two = GaussianProfile::new(2.0, 1.0, 1.0, 1);
        let (a, b) = (
            e1_constant(&one, 2.0).unwrap(),
            e1_constant(&two, 2.0).unwrap(),
        );
        assert!((b - 4.0 * a).abs() < 1e-14);
        assert!(e1_constant(&one, 0.0).is_err());
    }

    #[test]
    fn e1_against_adaptive_quadrature() {
        // adaptive Simpson on the full line as an independent oracle
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (fa, fm, fb) = (f(a), f(m), f(b));
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let left = (m - a) / 6.0 * (fa + 4.0 * f(lm) + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * f(rm) + fb);
            if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                simpson(f, a, m, 0.5 * tol, depth - 1) + simpson(f, m, b, 0.5 * tol, depth - 1)
            }
        }
        let beta = 2.0;
        let f = |q: f64| (-2.0 * q * q).exp() * g0(beta * (q * q - 1.0));
        let oracle = -0.5 * beta * simpson(&f, -8.0, 8.0, 1e-13, 40) / (2.0 * PI);
        let value = e1_constant(&GaussianProfile::new(1.0, 1.0, 1.0, 1), beta).unwrap();
        assert!(((value - oracle) / oracle).abs() < 1e-6);
    }

    #[test]
    fn gaussian_profile_derivative_routes_agree() {
        let prof = GaussianProfile::new(1.0, 1.0, 1.0, 1);
        let e = e2_constants(&prof, 2.0).unwrap();
        assert!(e.derivative_mismatch < 1e-6);
        let prof3 = GaussianProfile::new(1.0, 1.0, 1.0, 3);
        let e3 = e2_constants(&prof3, 2.0).unwrap();
        assert_eq!(e3.c_grad_t.len(), 3);
        assert!(e3.derivative_mismatch < 1e-6);
    }

    #[test]
    fn d_scaling_of_ratio() {
        let sol = reference();
        let c1 = compute_coefficients(sol).unwrap();
        let c2 = compute_coefficients(&normalize(sol, 2.0).unwrap()).unwrap();
        let r = (c2.b3 / c2.b2.abs()) / (c1.b3 / c1.b2.abs());
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_eigenvalues() {
        let m = vec![
            vec![2.0, 1.0, 0.0],
            vec![1.0, 2.0, 0.0],
            vec![0.0, 0.0, 5.0],
        ];
        let mut ev = symmetric_eigenvalues(&m);
        ev.sort_by(|a, b| a.total_cmp(b));
        assert!(
            (ev[0] - 1.0).abs() < 1e-14
                && (ev[1] - 3.0).abs() < 1e-14
                && (ev[2] - 5.0).abs() < 1e-14
        );
    }
}
