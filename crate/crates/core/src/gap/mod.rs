//! Linear gap equation on the reflection-symmetric sector.
//!
//! For a radial interaction the operator `K_T + V` maps radial functions to
//! radial functions, so it is discretized on `|p| ∈ [0, Q]` with trapezoid
//! weights times the shell measure `S_d p^{d-1}`. The symmetrized Nyström
//! matrix is
//!
//! ```text
//! M_jk = K_T(q_j² - μ) δ_jk + sqrt(c_j c_k) Ṽ(q_j, q_k) / (2π)^{d/2}
//! ```
//!
//! where `Ṽ` is the angular average of `V̂` and `c_j` the radial quadrature
//! weights. An eigenvector `u` gives `α̂_j = u_j / sqrt(c_j)`, which has unit
//! `L²(R^d)` norm.

mod decay;
mod potential;

pub use decay::{decay_report, DecayReport};
pub use potential::{sphere_area, PotentialFamily, PotentialSpec};

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::specfun::{g1_over_z, kt_symbol};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GapError {
    #[error("invalid potential parameter `{key}`: {msg}")]
    InvalidSpec { key: String, msg: String },
    #[error("{0}")]
    Unsupported(String),
    #[error("momentum cutoff {cutoff} is below the required {required}")]
    GridTooSmall { cutoff: f64, required: f64 },
    #[error("grid needs at least 8 points, got {0}")]
    GridTooCoarse(usize),
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("no pairing: lowest eigenvalue {lambda} >= 0 already at T = {t_lo}")]
    NoPairing { t_lo: f64, lambda: f64 },
    #[error("bracket failure: K_T + V still has a negative eigenvalue at T = {t_hi}")]
    BracketFailure { t_hi: f64 },
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("D must be positive, got {0}")]
    NonPositiveD(f64),
}

/// Uniform radial momentum grid `q_j = j · Q / n` on `[0, Q]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumGrid {
    pub cutoff: f64,
    pub n_points: usize,
}

impl MomentumGrid {
    /// `Q = max(6 sqrt(1 + max(μ, 0)), 12/w)` and 512 intervals.
    pub fn default_for(spec: &PotentialSpec) -> Self {
        let cutoff = (6.0 * (1.0 + spec.mu.max(0.0)).sqrt()).max(12.0 / spec.length_scale());
        MomentumGrid {
            cutoff,
            n_points: 512,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.cutoff / self.n_points as f64
    }

    /// Same spacing, twice the cutoff.
    pub fn doubled(&self) -> Self {
        MomentumGrid {
            cutoff: 2.0 * self.cutoff,
            n_points: 2 * self.n_points,
        }
    }

    /// Same cutoff, half the spacing.
    pub fn refined(&self) -> Self {
        MomentumGrid {
            cutoff: self.cutoff,
            n_points: 2 * self.n_points,
        }
    }

    /// Smallest admissible cutoff: the Fermi momentum plus five inverse
    /// interaction ranges.
    pub fn required_cutoff(spec: &PotentialSpec) -> f64 {
        (2.0 * spec.mu.max(0.0)).sqrt() + 5.0 / spec.length_scale()
    }

    pub fn check(&self, spec: &PotentialSpec) -> Result<(), GapError> {
        if self.n_points < 8 {
            return Err(GapError::GridTooCoarse(self.n_points));
        }
        let required = Self::required_cutoff(spec);
        if !(self.cutoff >= required) {
            return Err(GapError::GridTooSmall {
                cutoff: self.cutoff,
                required,
            });
        }
        Ok(())
    }

    /// Radial nodes. The origin carries no weight for `d >= 2` and is
    /// dropped there.
    pub fn nodes(&self, dim: usize) -> Vec<f64> {
        let dq = self.spacing();
        let first = if dim == 1 { 0 } else { 1 };
        (first..=self.n_points).map(|j| j as f64 * dq).collect()
    }

    /// Weights `c_j` with `Σ c_j f(q_j) ≈ ∫_{R^d} f(|p|) dp`.
    pub fn measure_weights(&self, dim: usize) -> Vec<f64> {
        let dq = self.spacing();
        let area = sphere_area(dim);
        self.nodes(dim)
            .iter()
            .map(|&q| {
                let end = q == 0.0 || (q - self.cutoff).abs() < 0.5 * dq;
                let w = if end { 0.5 * dq } else { dq };
                w * area * q.powi(dim as i32 - 1)
            })
            .collect()
    }
}

/// `T`-independent parts of the gap matrix.
#[derive(Debug, Clone)]
pub struct GapOperator {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    mu: f64,
    interaction: Mat<f64>,
}

impl GapOperator {
    pub fn new(spec: &PotentialSpec, grid: &MomentumGrid) -> Result<Self, GapError> {
        spec.validate()?;
        grid.check(spec)?;
        let nodes = grid.nodes(spec.dim);
        let weights = grid.measure_weights(spec.dim);
        let norm = (2.0 * PI).powf(-0.5 * spec.dim as f64);
        let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let n = nodes.len();
        let mut interaction = Mat::<f64>::zeros(n, n);
        for j in 0..n {
            for k in 0..=j {
                let v = norm * sw[j] * sw[k] * spec.shell_average(nodes[j], nodes[k]);
                interaction[(j, k)] = v;
                interaction[(k, j)] = v;
            }
        }
        Ok(GapOperator {
            nodes,
            weights,
            mu: spec.mu,
            interaction,
        })
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn matrix(&self, temperature: f64) -> Result<Mat<f64>, GapError> {
        if !(temperature > 0.0) {
            return Err(GapError::NonPositiveTemperature(temperature));
        }
        let mut m = self.interaction.clone();
        for (j, q) in self.nodes.iter().enumerate() {
            m[(j, j)] += kt_symbol(q * q - self.mu, temperature).expect("temperature checked");
        }
        Ok(m)
    }

    /// Whether `K_T + V` is positive definite, decided by a Cholesky attempt.
    fn positive_definite(&self, temperature: f64) -> Result<bool, GapError> {
        Ok(self.matrix(temperature)?.llt(Side::Lower).is_ok())
    }
}

/// Matrix of `K_T + V` on the even sector.
pub fn build_gap_matrix(
    spec: &PotentialSpec,
    grid: &MomentumGrid,
    temperature: f64,
) -> Result<Mat<f64>, GapError> {
    GapOperator::new(spec, grid)?.matrix(temperature)
}

/// Lowest eigenpair of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    /// Unit vector, sign fixed so that the first entry is nonnegative.
    pub vector: Vec<f64>,
    /// Distance to the second eigenvalue.
    pub gap: f64,
}

pub fn lowest_eigenpair(matrix: &Mat<f64>) -> Result<Eigenpair, GapError> {
    let n = matrix.nrows();
    let eig = matrix
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| GapError::Eigen(format!("{e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut vector: Vec<f64> = (0..n).map(|i| u[(i, 0)]).collect();
    let pivot = vector
        .iter()
        .copied()
        .find(|v| v.abs() > 1e-300)
        .unwrap_or(0.0);
    if pivot < 0.0 {
        vector.iter_mut().for_each(|v| *v = -*v);
    }
    let gap = if n > 1 { s[1] - s[0] } else { f64::INFINITY };
    Ok(Eigenpair {
        value: s[0],
        vector,
        gap,
    })
}

/// Output of the gap solver: `T_c`, the pair wave function and `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSolution {
    pub spec: PotentialSpec,
    pub grid: MomentumGrid,
    pub t_c: f64,
    pub beta_c: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `α̂₀(q_j)`.
    pub alpha0_hat: Vec<f64>,
    /// `t(q_j) = 2 K_{T_c}(q_j² - μ) α̂₀(q_j)`.
    pub t_samples: Vec<f64>,
    /// Product of all normalization rescalings applied so far.
    pub norm_scale: f64,
    /// The temperature parameter `D` once [`normalize`] has run.
    pub d_param: Option<f64>,
    pub kappa_c: f64,
    /// `‖(K_{T_c} + V) α̂₀‖ / ‖α̂₀‖` on the grid.
    pub eigen_residual: f64,
    /// Gap between the two lowest eigenvalues at `T_c`.
    pub spectral_gap: f64,
}

/// `Im sqrt(μ + iπT)`, the decay rate bound for `α₀`.
pub fn kappa(mu: f64, temperature: f64) -> f64 {
    let z = num_complex::Complex64::new(mu, PI * temperature).sqrt();
    z.im
}

/// Relative bracket width at which bisection stops.
pub const TC_REL_TOL: f64 = 1e-12;

/// Required decay of `t` at the cutoff, relative to its maximum.
pub const TAIL_TOL: f64 = 1e-10;

/// Bisection for the temperature at which `K_T + V` acquires a zero mode,
/// on exactly the grid given.
///
/// The sign of the lowest eigenvalue is read off from a Cholesky attempt, so
/// each step costs one factorization. The eigenvector is computed once at
/// the end. A `guess` narrows the initial bracket; it is widened until the
/// sign change is enclosed.
pub fn find_tc_on_grid(
    spec: &PotentialSpec,
    grid: &MomentumGrid,
    guess: Option<f64>,
) -> Result<GapSolution, GapError> {
    let op = GapOperator::new(spec, grid)?;
    let scale = spec.mu.abs().max(1.0);
    let t_lo = 1e-3 * scale;
    let t_hi = 10.0 * scale;
    if spec.is_free() || op.positive_definite(t_lo)? {
        let lambda = lowest_eigenpair(&op.matrix(t_lo)?)?.value;
        return Err(GapError::NoPairing { t_lo, lambda });
    }
    if !op.positive_definite(t_hi)? {
        return Err(GapError::BracketFailure { t_hi });
    }
    let (mut lo, mut hi) = (t_lo, t_hi);
    if let Some(g) = guess.filter(|g| *g > t_lo && *g < t_hi) {
        let mut width = 1e-6;
        while width < 1.0 {
            let (a, b) = ((g * (1.0 - width)).max(t_lo), (g * (1.0 + width)).min(t_hi));
            if !op.positive_definite(a)? && op.positive_definite(b)? {
                lo = a;
                hi = b;
                break;
            }
            width *= 10.0;
        }
    }
    while (hi - lo) > TC_REL_TOL * hi {
        let mid = if hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if op.positive_definite(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t_c = 0.5 * (lo + hi);
    solution_at(spec, grid, &op, t_c)
}

/// [`find_tc_on_grid`], extending the cutoff at fixed spacing (by factors
/// of 5/4) until `|t(Q)| < TAIL_TOL · max|t|`.
///
/// At most six extensions are tried; the last solution is returned either
/// way and its [`GapSolution::cutoff_tail`] tells whether the check passed.
pub fn find_tc(spec: &PotentialSpec, grid: &MomentumGrid) -> Result<GapSolution, GapError> {
    let mut sol = find_tc_on_grid(spec, grid, None)?;
    for _ in 0..6 {
        if sol.cutoff_tail() < TAIL_TOL {
            break;
        }
        let n = (sol.grid.n_points as f64 * 1.25).round() as usize;
        let next = MomentumGrid {
            cutoff: sol.grid.spacing() * n as f64,
            n_points: n,
        };
        sol = find_tc_on_grid(spec, &next, Some(sol.t_c))?;
    }
    Ok(sol)
}

fn solution_at(
    spec: &PotentialSpec,
    grid: &MomentumGrid,
    op: &GapOperator,
    t_c: f64,
) -> Result<GapSolution, GapError> {
    let m = op.matrix(t_c)?;
    let pair = lowest_eigenpair(&m)?;
    let n = op.dim();
    let mut residual = 0.0;
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += m[(i, j)] * pair.vector[j];
        }
        residual += acc * acc;
    }
    let alpha0_hat: Vec<f64> = pair
        .vector
        .iter()
        .zip(&op.weights)
        .map(|(u, c)| u / c.sqrt())
        .collect();
    let t_samples = op
        .nodes
        .iter()
        .zip(&alpha0_hat)
        .map(|(q, a)| 2.0 * kt_symbol(q * q - spec.mu, t_c).expect("positive") * a)
        .collect();
    Ok(GapSolution {
        spec: spec.clone(),
        grid: *grid,
        t_c,
        beta_c: 1.0 / t_c,
        nodes: op.nodes.clone(),
        weights: op.weights.clone(),
        alpha0_hat,
        t_samples,
        norm_scale: 1.0,
        d_param: None,
        kappa_c: kappa(spec.mu, t_c),
        eigen_residual: residual.sqrt(),
        spectral_gap: pair.gap,
    })
}

/// `sech²(y)` without overflow.
pub fn sech2(y: f64) -> f64 {
    let e = (-2.0 * y.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

impl GapSolution {
    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    /// `Σ_j c_j f(q_j, t(q_j))`, the grid quadrature of a radial integrand
    /// over `R^d`.
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.t_samples)
            .zip(&self.weights)
            .map(|((&q, &t), &c)| c * f(q, t))
            .sum()
    }

    /// `t` at any radius, from the Nyström extension
    /// `t(p) = -2 (2π)^{-d/2} Σ_k c_k Ṽ(p, q_k) α̂₀(q_k)`.
    ///
    /// At the grid nodes it coincides with `t_samples` up to the eigenvalue
    /// residual.
    pub fn t_at(&self, p: f64) -> f64 {
        let norm = (2.0 * PI).powf(-0.5 * self.dim() as f64);
        let mut acc = 0.0;
        for ((q, a), c) in self.nodes.iter().zip(&self.alpha0_hat).zip(&self.weights) {
            acc += c * self.spec.shell_average(p, *q) * a;
        }
        -2.0 * norm * acc
    }

    /// `d^n t / dp^n` for `n <= 2` by differentiating the Nyström kernel.
    /// One dimension only.
    pub fn t_derivative_at(&self, p: f64, order: usize) -> f64 {
        assert_eq!(
            self.dim(),
            1,
            "t derivatives are implemented in one dimension"
        );
        if order == 0 {
            return self.t_at(p);
        }
        let mut acc = 0.0;
        for ((q, a), c) in self.nodes.iter().zip(&self.alpha0_hat).zip(&self.weights) {
            acc += c * self.spec.shell_average_derivative(p, *q, order) * a;
        }
        -2.0 * acc / (2.0 * PI).sqrt()
    }

    /// `α̂₀(p) = t(p) / (2 K_{T_c}(p² - μ))`.
    pub fn alpha_hat_at(&self, p: f64) -> f64 {
        self.t_at(p) / (2.0 * kt_symbol(p * p - self.spec.mu, self.t_c).expect("T_c > 0"))
    }

    /// Largest `|t|` on the grid.
    pub fn t_max(&self) -> f64 {
        self.t_samples.iter().fold(0.0f64, |m, t| m.max(t.abs()))
    }

    /// Smallest momentum beyond which `|t| < rel_tol · max|t|`, scanning the
    /// interpolant outward in steps of the grid spacing.
    pub fn t_support(&self, rel_tol: f64) -> f64 {
        let tmax = self.t_max();
        let dq = self.grid.spacing();
        let mut last = 0.0;
        let mut p = 0.0;
        while p <= 2.0 * self.grid.cutoff {
            if self.t_at(p).abs() >= rel_tol * tmax {
                last = p;
            }
            p += dq;
        }
        last + dq
    }

    /// `|t(Q)| / max|t|`, which should be tiny on an adequate grid.
    pub fn cutoff_tail(&self) -> f64 {
        self.t_samples.last().map(|t| t.abs()).unwrap_or(0.0) / self.t_max()
    }

    /// Both sides of the normalization condition
    /// `∫ t⁴ g1(β(q²-μ))/(q²-μ) = (D/β) ∫ t² sech²(β(q²-μ)/2)`.
    pub fn normalization_sides(&self, d_param: f64) -> (f64, f64) {
        let beta = self.beta_c;
        let mu = self.spec.mu;
        let lhs = self.integrate(|q, t| t.powi(4) * beta * g1_over_z(beta * (q * q - mu)));
        let rhs = d_param / beta * self.integrate(|q, t| t * t * sech2(0.5 * beta * (q * q - mu)));
        (lhs, rhs)
    }

    /// Relative violation of the normalization condition for the stored `D`.
    pub fn normalization_residual(&self) -> Option<f64> {
        let d = self.d_param?;
        let (lhs, rhs) = self.normalization_sides(d);
        Some(((lhs - rhs) / rhs).abs())
    }
}

/// Rescale `α₀` and `t` so that the normalization condition holds for `D`.
pub fn normalize(sol: &GapSolution, d_param: f64) -> Result<GapSolution, GapError> {
    if !(d_param > 0.0 && d_param.is_finite()) {
        return Err(GapError::NonPositiveD(d_param));
    }
    let (lhs, rhs) = sol.normalization_sides(d_param);
    // lhs is quartic and rhs quadratic in the scale
    let s = (rhs / lhs).sqrt();
    let mut out = sol.clone();
    out.alpha0_hat.iter_mut().for_each(|a| *a *= s);
    out.t_samples.iter_mut().for_each(|t| *t *= s);
    out.norm_scale *= s;
    out.d_param = Some(d_param);
    Ok(out)
}

/// [`find_tc`] followed by [`normalize`].
pub fn solve_normalized(
    spec: &PotentialSpec,
    grid: &MomentumGrid,
    d_param: f64,
) -> Result<GapSolution, GapError> {
    normalize(&find_tc(spec, grid)?, d_param)
}
