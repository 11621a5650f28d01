//! Ginzburg-Landau functional on the unit torus, evaluated pseudospectrally.

mod torus;

pub use torus::{fft_size, Mode, TorusField, TorusGrid, TorusVectorField};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffs::{FieldMoments, GLCoefficients};

/// Tolerance for conjugate symmetry of real input fields.
pub const REALITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GLError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(
        "collocation grid of {m} points per axis is below the {required} needed for exact products"
    )]
    GridTooSmall { m: usize, required: usize },
    #[error("field {0} must be real-valued (conjugate-symmetric coefficients)")]
    NonRealField(&'static str),
    #[error("no start reached gradient norm {tol:e} in {max_iter} iterations; best {:e}", best.gradient_norm)]
    NotConverged {
        tol: f64,
        max_iter: usize,
        best: Box<GLState>,
    },
}

/// Smallest grid for which every product in the energy and gradient is
/// alias-free: `|ψ|⁴` needs `m > 4 n_ψ`.
pub fn required_grid(psi: &TorusField, a: &TorusVectorField, w: &TorusField) -> usize {
    let n = psi.n_max();
    let na = a.components.iter().map(|c| c.n_max()).max().unwrap_or(0);
    (4 * n).max(2 * n + 2 * na).max(2 * n + w.n_max()) + 1
}

fn check_inputs(
    psi: &TorusField,
    a: &TorusVectorField,
    w: &TorusField,
    coef: &GLCoefficients,
) -> Result<(), GLError> {
    let d = psi.dim();
    if a.dim() != d || w.dim() != d || coef.dim() != d || a.components.iter().any(|c| c.dim() != d)
    {
        return Err(GLError::DimensionMismatch(format!(
            "psi has dimension {d}, A {} components, W dimension {}, B1 is {}x{}",
            a.dim(),
            w.dim(),
            coef.dim(),
            coef.dim()
        )));
    }
    if !w.is_real(REALITY_TOL) {
        return Err(GLError::NonRealField("W"));
    }
    if !a.is_real(REALITY_TOL) {
        return Err(GLError::NonRealField("A"));
    }
    Ok(())
}

/// The three parts of the functional and their Wirtinger gradients.
#[derive(Debug, Clone)]
pub struct GLTerms {
    /// `∫ conj(v)·B1 v` with `v = (-i∇ + 2A)ψ`.
    pub kinetic: f64,
    /// `∫ B2 W |ψ|²`.
    pub potential: f64,
    /// `∫ B3 (1 - |ψ|²)²`.
    pub condensation: f64,
    pub grad_kinetic: TorusField,
    pub grad_potential: TorusField,
    pub grad_condensation: TorusField,
}

impl GLTerms {
    pub fn energy(&self) -> f64 {
        self.kinetic + self.potential + self.condensation
    }

    pub fn gradient(&self) -> TorusField {
        let one = Complex64::new(1.0, 0.0);
        self.grad_kinetic
            .axpy(one, &self.grad_potential)
            .axpy(one, &self.grad_condensation)
    }
}

/// Evaluator with fixed fields and a fixed collocation grid.
#[derive(Debug, Clone)]
pub struct GLProblem {
    w: TorusField,
    coef: GLCoefficients,
    grid: TorusGrid,
    n_max: usize,
    a_grid: Vec<Vec<f64>>,
    w_grid: Vec<f64>,
}

impl GLProblem {
    /// Problem for order parameters with `|n_j| <= n_max`, on the smallest
    /// alias-free grid unless `m` is given.
    pub fn new(
        a: &TorusVectorField,
        w: &TorusField,
        coef: &GLCoefficients,
        n_max: usize,
        m: Option<usize>,
    ) -> Result<Self, GLError> {
        let probe = TorusField::zeros(w.dim(), n_max);
        check_inputs(&probe, a, w, coef)?;
        let required = required_grid(&probe, a, w);
        let m = match m {
            Some(m) if m < required => return Err(GLError::GridTooSmall { m, required }),
            Some(m) => m,
            None => fft_size(required),
        };
        let grid = TorusGrid::new(w.dim(), m);
        let a_grid = a
            .components
            .iter()
            .map(|c| grid.to_grid(c).iter().map(|z| z.re).collect())
            .collect();
        let w_grid = grid.to_grid(w).iter().map(|z| z.re).collect();
        Ok(GLProblem {
            w: w.clone(),
            coef: coef.clone(),
            grid,
            n_max,
            a_grid,
            w_grid,
        })
    }

    pub fn dim(&self) -> usize {
        self.w.dim()
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn grid_points(&self) -> usize {
        self.grid.m
    }

    fn check_psi(&self, psi: &TorusField) -> Result<(), GLError> {
        if psi.dim() != self.dim() || psi.n_max() != self.n_max {
            return Err(GLError::DimensionMismatch(format!(
                "psi has dimension {} and n_max {}, problem expects {} and {}",
                psi.dim(),
                psi.n_max(),
                self.dim(),
                self.n_max
            )));
        }
        Ok(())
    }

    /// Grid values of `ψ` and of `v_j = (-i∂_j + 2A_j)ψ`.
    fn covariant(&self, psi: &TorusField) -> (Vec<Complex64>, Vec<Vec<Complex64>>) {
        let g = &self.grid;
        let psi_x = g.to_grid(psi);
        let v = (0..self.dim())
            .map(|j| {
                let mut dpsi = psi.clone();
                for (i, c) in dpsi.coeffs_mut().iter_mut().enumerate() {
                    *c *= 2.0 * std::f64::consts::PI * psi.mode_at(i)[j] as f64;
                }
                let mut vj = g.to_grid(&dpsi);
                for (x, (v, p)) in vj.iter_mut().zip(&psi_x).enumerate() {
                    *v += 2.0 * self.a_grid[j][x] * p;
                }
                vj
            })
            .collect();
        (psi_x, v)
    }

    pub fn energy(&self, psi: &TorusField) -> Result<f64, GLError> {
        self.check_psi(psi)?;
        let (psi_x, v) = self.covariant(psi);
        let d = self.dim();
        let b1 = &self.coef.b1;
        let g = &self.grid;
        let kinetic = g.mean((0..g.len()).map(|x| {
            let mut kin = 0.0;
            for j in 0..d {
                for k in 0..d {
                    kin += b1[j][k] * (v[j][x].conj() * v[k][x]).re;
                }
            }
            kin
        }));
        // coefficients outside the means keep ψ ≡ 0 at exactly B3
        let potential = self.coef.b2
            * g.mean(
                psi_x
                    .iter()
                    .zip(&self.w_grid)
                    .map(|(p, w)| w * p.norm_sqr()),
            );
        let condensation =
            self.coef.b3 * g.mean(psi_x.iter().map(|p| (1.0 - p.norm_sqr()).powi(2)));
        Ok(kinetic + potential + condensation)
    }

    pub fn terms(&self, psi: &TorusField) -> Result<GLTerms, GLError> {
        self.check_psi(psi)?;
        let g = &self.grid;
        let len = g.len();
        let d = self.dim();
        let b1 = &self.coef.b1;
        let (psi_x, v) = self.covariant(psi);

        let u: Vec<Vec<Complex64>> = (0..d)
            .map(|j| {
                (0..len)
                    .map(|x| (0..d).map(|k| b1[j][k] * v[k][x]).sum())
                    .collect()
            })
            .collect();
        let kinetic =
            g.mean((0..len).map(|x| (0..d).map(|j| (v[j][x].conj() * u[j][x]).re).sum::<f64>()));
        let mut gk = vec![Complex64::default(); len];
        for j in 0..d {
            let du = g.minus_i_derivative(&u[j], j);
            for x in 0..len {
                gk[x] += du[x] + 2.0 * self.a_grid[j][x] * u[j][x];
            }
        }

        let rho: Vec<f64> = psi_x.iter().map(|p| p.norm_sqr()).collect();
        let potential = self.coef.b2 * g.mean((0..len).map(|x| self.w_grid[x] * rho[x]));
        let gp: Vec<Complex64> = (0..len)
            .map(|x| self.coef.b2 * self.w_grid[x] * psi_x[x])
            .collect();
        let condensation = self.coef.b3 * g.mean(rho.iter().map(|r| (1.0 - r) * (1.0 - r)));
        let gc: Vec<Complex64> = (0..len)
            .map(|x| 2.0 * self.coef.b3 * (rho[x] - 1.0) * psi_x[x])
            .collect();

        Ok(GLTerms {
            kinetic,
            potential,
            condensation,
            grad_kinetic: g.from_grid(&gk, self.n_max),
            grad_potential: g.from_grid(&gp, self.n_max),
            grad_condensation: g.from_grid(&gc, self.n_max),
        })
    }

    pub fn gradient(&self, psi: &TorusField) -> Result<TorusField, GLError> {
        Ok(self.terms(psi)?.gradient())
    }

    /// Spectral inner products entering the fourth-order expansion constant.
    pub fn moments(&self, psi: &TorusField) -> Result<FieldMoments, GLError> {
        self.check_psi(psi)?;
        let d = self.dim();
        let (psi_x, v) = self.covariant(psi);
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut grad = vec![vec![0.0; d]; d];
        for (n, c) in psi.modes() {
            for j in 0..d {
                for k in 0..d {
                    grad[j][k] += two_pi * two_pi * (n[j] * n[k]) as f64 * c.norm_sqr();
                }
            }
        }
        let g = &self.grid;
        let covariant = (0..d)
            .map(|j| {
                (0..d)
                    .map(|k| g.mean(v[j].iter().zip(&v[k]).map(|(a, b)| (a.conj() * b).re)))
                    .collect()
            })
            .collect();
        Ok(FieldMoments {
            norm2: psi.norm2(),
            grad,
            covariant,
            potential: g.mean(
                psi_x
                    .iter()
                    .zip(&self.w_grid)
                    .map(|(p, w)| w * p.norm_sqr()),
            ),
            quartic: g.mean(psi_x.iter().map(|p| p.norm_sqr().powi(2))),
        })
    }

    /// Diagonal preconditioner `1/(n·B1 n (2π)² + s)`.
    fn preconditioner(&self) -> Vec<f64> {
        let d = self.dim();
        let b1 = &self.coef.b1;
        let s = 2.0 * self.coef.b3.abs()
            + self.coef.b2.abs() * self.w_grid.iter().fold(0.0f64, |m, w| m.max(w.abs()))
            + 1e-6;
        let probe = TorusField::zeros(d, self.n_max);
        (0..probe.coeffs().len())
            .map(|i| {
                let n = probe.mode_at(i);
                let mut q = 0.0;
                for j in 0..d {
                    for k in 0..d {
                        q += b1[j][k] * (n[j] * n[k]) as f64;
                    }
                }
                1.0 / (4.0 * std::f64::consts::PI.powi(2) * q + s)
            })
            .collect()
    }
}

fn field_norm(f: &TorusField) -> f64 {
    f.norm2().sqrt()
}

/// Pseudospectral `∫_C [conj((-i∇+2A)ψ)·B1(-i∇+2A)ψ + B2 W|ψ|² + B3(1-|ψ|²)²]`.
pub fn gl_energy(
    psi: &TorusField,
    a: &TorusVectorField,
    w: &TorusField,
    coef: &GLCoefficients,
) -> Result<f64, GLError> {
    GLProblem::new(a, w, coef, psi.n_max(), None)?.energy(psi)
}

/// Fourier coefficients of `δE/δψ̄`, so that `dE(ψ+εη)/dε = 2 Re ⟨η, grad⟩`.
pub fn gl_gradient(
    psi: &TorusField,
    a: &TorusVectorField,
    w: &TorusField,
    coef: &GLCoefficients,
) -> Result<TorusField, GLError> {
    GLProblem::new(a, w, coef, psi.n_max(), None)?.gradient(psi)
}

/// Moments of `ψ` against the fields: `‖ψ‖²`, `⟨∂ψ|∂ψ⟩`, `⟨(∂+2iA)ψ|(∂+2iA)ψ⟩`,
/// `⟨ψ|W|ψ⟩` and `‖ψ‖₄⁴`.
pub fn field_moments(
    psi: &TorusField,
    a: &TorusVectorField,
    w: &TorusField,
) -> Result<FieldMoments, GLError> {
    let d = psi.dim();
    let eye = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let coef = GLCoefficients {
        b1: eye,
        b2: 0.0,
        b3: 0.0,
        d_param: 0.0,
        beta_c: 0.0,
    };
    GLProblem::new(a, w, &coef, psi.n_max(), None)?.moments(psi)
}

/// `ψ' = ψ e^{-2iχ}`, `A' = A + ∇χ` for real periodic `χ`. The product is
/// resolved on a fine grid and `ψ'` keeps every mode above `1e-16` relative.
pub fn gauge_transform(
    psi: &TorusField,
    a: &TorusVectorField,
    chi: &TorusField,
) -> Result<(TorusField, TorusVectorField), GLError> {
    let d = psi.dim();
    if chi.dim() != d || a.dim() != d {
        return Err(GLError::DimensionMismatch(
            "chi and A must match psi".into(),
        ));
    }
    if !chi.is_real(REALITY_TOL) {
        return Err(GLError::NonRealField("chi"));
    }
    let band = chi.bandwidth();
    let total = psi.norm2();
    let mut n_try = psi.n_max() + 8 * band.max(1);
    let psi_new = loop {
        let m = fft_size(4 * n_try + 2);
        let grid = TorusGrid::new(d, m);
        let chi_x = grid.to_grid(&chi.resized(chi.n_max().min(n_try)));
        let prod: Vec<Complex64> = grid
            .to_grid(&psi.resized(psi.n_max()))
            .iter()
            .zip(&chi_x)
            .map(|(p, c)| p * Complex64::from_polar(1.0, -2.0 * c.re))
            .collect();
        let full = grid.from_grid(&prod, n_try);
        // keep the smallest box holding all but 1e-32 of the norm
        let mut keep = psi.n_max();
        let kept = |k: usize| full.resized(k).norm2();
        while keep < n_try && total - kept(keep) > 1e-32 * total.max(1e-300) {
            keep += 1;
        }
        if keep < n_try || d > 1 && n_try >= 64 || n_try >= 4096 {
            break full.resized(keep);
        }
        n_try *= 2;
    };

    let n_a = a
        .components
        .iter()
        .map(|c| c.n_max())
        .max()
        .unwrap_or(0)
        .max(chi.n_max());
    let two_pi = 2.0 * std::f64::consts::PI;
    let components = (0..d)
        .map(|j| {
            let mut out = a.components[j].resized(n_a);
            for (n, c) in chi.modes() {
                let idx = &n[..d];
                let old = out.get(idx);
                out.set(idx, old + Complex64::new(0.0, two_pi * n[j] as f64) * c);
            }
            out
        })
        .collect();
    Ok((psi_new, TorusVectorField { components }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub gradient_norm: f64,
}

/// Result of a minimization: the best iterate and its history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GLState {
    pub psi: TorusField,
    pub energy: f64,
    /// `‖δE/δψ̄‖_{L²}` at `psi`.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub start: String,
    pub log: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GLOptions {
    pub n_max: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub random_starts: usize,
}

impl Default for GLOptions {
    fn default() -> Self {
        GLOptions {
            n_max: 32,
            tol: 1e-8,
            max_iter: 5000,
            seed: 0,
            random_starts: 2,
        }
    }
}

fn random_start(dim: usize, n_max: usize, seed: u64) -> TorusField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = TorusField::zeros(dim, n_max);
    for i in 0..f.coeffs().len() {
        let n = f.mode_at(i);
        let r = n.iter().map(|v| v.abs()).sum::<i64>() as f64;
        let amp = 0.5 * (-r).exp();
        f.coeffs_mut()[i] = Complex64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp));
    }
    let c0 = f.get(&vec![0; dim]);
    f.set(&vec![0; dim], c0 + 0.5);
    f
}

/// First positive root of the cubic through `(0,y0), (s,y1), (2s,y2), (3s,y3)`
/// with a negative-to-positive sign change.
fn cubic_line_minimum(s: f64, y: [f64; 4]) -> Option<f64> {
    // Newton form on equally spaced nodes
    let d1 = [y[1] - y[0], y[2] - y[1], y[3] - y[2]];
    let d2 = [d1[1] - d1[0], d1[2] - d1[1]];
    let d3 = d2[1] - d2[0];
    let p = |a: f64| {
        let u = a / s;
        y[0] + u * d1[0] + u * (u - 1.0) / 2.0 * d2[0] + u * (u - 1.0) * (u - 2.0) / 6.0 * d3
    };
    if !(d3 > 0.0) {
        return None;
    }
    let mut hi = s;
    while p(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e6 * s {
            return None;
        }
    }
    // locate the first sign change, then bisect
    let pieces = 64;
    let mut lo = 0.0;
    for i in 1..=pieces {
        let a = hi * i as f64 / pieces as f64;
        if p(a) > 0.0 {
            hi = a;
            break;
        }
        lo = a;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if p(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Preconditioned Polak-Ribière+ conjugate gradient from one start.
fn descend(
    problem: &GLProblem,
    start: TorusField,
    label: &str,
    opts: &GLOptions,
) -> Result<GLState, GLError> {
    let prec = problem.preconditioner();
    let apply = |g: &TorusField| {
        let mut z = g.clone();
        z.coeffs_mut()
            .iter_mut()
            .zip(&prec)
            .for_each(|(c, p)| *c *= p);
        z
    };
    let re_inner = |a: &TorusField, b: &TorusField| a.inner(b).re;
    let one = Complex64::new(1.0, 0.0);

    let mut x = start;
    let mut energy = problem.energy(&x)?;
    let mut grad = problem.gradient(&x)?;
    let mut gnorm = field_norm(&grad);
    let mut z = apply(&grad);
    let mut dir = z.scale(-one);
    let mut step = 1.0;
    let mut log = vec![IterationRecord {
        iteration: 0,
        energy,
        gradient_norm: gnorm,
    }];
    let mut stalls = 0;
    let mut iter = 0;

    while gnorm >= opts.tol && iter < opts.max_iter {
        iter += 1;
        let mut slope = 2.0 * re_inner(&dir, &grad);
        if slope >= 0.0 {
            dir = z.scale(-one);
            slope = 2.0 * re_inner(&dir, &grad);
        }
        // E along the line is a quartic, so its derivative is an exact cubic
        let mut ys = [slope, 0.0, 0.0, 0.0];
        for (k, y) in ys.iter_mut().enumerate().skip(1) {
            let g = problem.gradient(&x.axpy(Complex64::new(k as f64 * step, 0.0), &dir))?;
            *y = 2.0 * re_inner(&dir, &g);
        }
        let mut alpha = cubic_line_minimum(step, ys).unwrap_or(step);
        // backtrack until the energy does not rise beyond roundoff
        let slack = 64.0 * f64::EPSILON * (energy.abs() + problem.coef.b3.abs());
        let mut accepted = None;
        for _ in 0..60 {
            let trial = x.axpy(Complex64::new(alpha, 0.0), &dir);
            let e = problem.energy(&trial)?;
            if e <= energy + 1e-4 * alpha * slope + slack {
                accepted = Some((trial, e));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, e_new)) = accepted else {
            stalls += 1;
            dir = z.scale(-one);
            if stalls > 5 {
                break;
            }
            continue;
        };
        stalls = 0;
        step = alpha;
        let g_new = problem.gradient(&x_new)?;
        let z_new = apply(&g_new);
        let denom = re_inner(&z, &grad);
        let beta = if denom > 0.0 {
            (re_inner(&z_new, &g_new) - re_inner(&z_new, &grad)) / denom
        } else {
            0.0
        };
        dir = z_new
            .scale(-one)
            .axpy(Complex64::new(beta.max(0.0), 0.0), &dir);
        x = x_new;
        energy = e_new;
        grad = g_new;
        z = z_new;
        gnorm = field_norm(&grad);
        log.push(IterationRecord {
            iteration: iter,
            energy,
            gradient_norm: gnorm,
        });
    }

    Ok(GLState {
        psi: x,
        energy,
        gradient_norm: gnorm,
        iterations: iter,
        converged: gnorm < opts.tol,
        start: label.to_string(),
        log,
    })
}

/// Multistart minimization from `ψ ≡ 1`, `ψ ≡ 0.5` and random starts, run
/// concurrently. The trivial critical point `ψ ≡ 0` also competes, so the
/// result never exceeds `min(B3, E(1))`.
pub fn minimize(
    a: &TorusVectorField,
    w: &TorusField,
    coef: &GLCoefficients,
    opts: &GLOptions,
) -> Result<GLState, GLError> {
    let d = w.dim();
    let problem = GLProblem::new(a, w, coef, opts.n_max, None)?;
    let mut starts = vec![
        (
            "one".to_string(),
            TorusField::constant(d, opts.n_max, Complex64::new(1.0, 0.0)),
        ),
        (
            "half".to_string(),
            TorusField::constant(d, opts.n_max, Complex64::new(0.5, 0.0)),
        ),
    ];
    for k in 0..opts.random_starts {
        let seed = opts.seed.wrapping_add(k as u64);
        starts.push((format!("random:{seed}"), random_start(d, opts.n_max, seed)));
    }
    let results: Vec<Result<GLState, GLError>> = starts
        .into_par_iter()
        .map(|(label, s)| descend(&problem, s, &label, opts))
        .collect();
    let mut states = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let zero = TorusField::zeros(d, opts.n_max);
    states.push(GLState {
        gradient_norm: field_norm(&problem.gradient(&zero)?),
        energy: problem.energy(&zero)?,
        psi: zero,
        iterations: 0,
        converged: true,
        start: "zero".into(),
        log: Vec::new(),
    });

    let best_converged = states
        .iter()
        .filter(|s| s.converged)
        .min_by(|x, y| x.energy.total_cmp(&y.energy))
        .cloned();
    match best_converged {
        Some(s) => {
            let worse_unconverged = states
                .iter()
                .any(|t| !t.converged && t.energy < s.energy - 1e-12 * s.energy.abs());
            if worse_unconverged {
                log::warn!("an unconverged start reached lower energy than the best converged one");
            }
            Ok(s)
        }
        None => {
            let best = states
                .into_iter()
                .min_by(|x, y| x.energy.total_cmp(&y.energy))
                .expect("at least one start");
            Err(GLError::NotConverged {
                tol: opts.tol,
                max_iter: opts.max_iter,
                best: Box::new(best),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn coef() -> GLCoefficients {
        GLCoefficients::scalar(0.135144, -0.0245629, 0.184442)
    }

    fn random_field(dim: usize, n_max: usize, seed: u64) -> TorusField {
        random_start(dim, n_max, seed)
    }

    fn fields_1d() -> (TorusVectorField, TorusField) {
        let a = TorusVectorField {
            components: vec![TorusField::cosine(1, 0.3)],
        };
        let w = TorusField::from_modes(
            1,
            &[
                (vec![1], c(0.25, 0.1)),
                (vec![-1], c(0.25, -0.1)),
                (vec![2], c(0.05, 0.0)),
                (vec![-2], c(0.05, 0.0)),
            ],
        );
        (a, w)
    }

    #[test]
    fn trivial_energies() {
        let d = 1;
        let a = TorusVectorField::zeros(d);
        let w = TorusField::zeros(d, 0);
        let k = coef();
        let e1 = gl_energy(&TorusField::constant(d, 4, c(1.0, 0.0)), &a, &w, &k).unwrap();
        assert!(e1.abs() < 1e-16);
        let (a1, w1) = fields_1d();
        let e0 = gl_energy(&TorusField::zeros(d, 4), &a1, &w1, &k).unwrap();
        assert_eq!(e0, k.b3);
        let e = gl_energy(&TorusField::constant(d, 4, c(0.7, 0.0)), &a, &w, &k).unwrap();
        assert!((e - k.b3 * (1.0 - 0.49f64).powi(2)).abs() < 1e-15);
        let g = gl_gradient(&TorusField::constant(d, 4, c(1.0, 0.0)), &a, &w, &k).unwrap();
        assert!(g.norm2().sqrt() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences_per_term() {
        let (a, w) = fields_1d();
        let k = coef();
        let p = GLProblem::new(&a, &w, &k, 6, None).unwrap();
        let psi = random_field(1, 6, 3);
        let eta = random_field(1, 6, 11);
        let t = p.terms(&psi).unwrap();
        let eps = 1e-5;
        let tp = p.terms(&psi.axpy(c(eps, 0.0), &eta)).unwrap();
        let tm = p.terms(&psi.axpy(c(-eps, 0.0), &eta)).unwrap();
        let pairs = [
            (tp.kinetic - tm.kinetic, &t.grad_kinetic),
            (tp.potential - tm.potential, &t.grad_potential),
            (tp.condensation - tm.condensation, &t.grad_condensation),
        ];
        for (diff, g) in pairs {
            let fd = diff / (2.0 * eps);
            let exact = 2.0 * eta.inner(g).re;
            assert!(((fd - exact) / exact).abs() < 1e-6, "{fd} vs {exact}");
        }
    }

    #[test]
    fn gradient_in_two_dimensions() {
        let b1 = vec![vec![0.2, 0.03], vec![0.03, 0.15]];
        let k = GLCoefficients {
            b1,
            b2: -0.05,
            b3: 0.2,
            d_param: 1.0,
            beta_c: 1.0,
        };
        let a = TorusVectorField {
            components: vec![
                TorusField::from_modes(2, &[(vec![0, 1], c(0.1, 0.0)), (vec![0, -1], c(0.1, 0.0))]),
                TorusField::from_modes(
                    2,
                    &[(vec![1, 0], c(0.0, 0.2)), (vec![-1, 0], c(0.0, -0.2))],
                ),
            ],
        };
        let w =
            TorusField::from_modes(2, &[(vec![1, 1], c(0.3, 0.0)), (vec![-1, -1], c(0.3, 0.0))]);
        let p = GLProblem::new(&a, &w, &k, 3, None).unwrap();
        let psi = random_field(2, 3, 5);
        let eta = random_field(2, 3, 6);
        let eps = 1e-5;
        let fd = (p.energy(&psi.axpy(c(eps, 0.0), &eta)).unwrap()
            - p.energy(&psi.axpy(c(-eps, 0.0), &eta)).unwrap())
            / (2.0 * eps);
        let exact = 2.0 * eta.inner(&p.gradient(&psi).unwrap()).re;
        assert!(((fd - exact) / exact).abs() < 1e-6);
    }

    #[test]
    fn rejects_small_grid_and_complex_potential() {
        let (a, w) = fields_1d();
        let err = GLProblem::new(&a, &w, &coef(), 8, Some(20)).unwrap_err();
        assert!(matches!(err, GLError::GridTooSmall { required: 33, .. }));
        let bad = TorusField::from_modes(1, &[(vec![1], c(1.0, 0.0))]);
        assert!(matches!(
            GLProblem::new(&a, &bad, &coef(), 8, None),
            Err(GLError::NonRealField("W"))
        ));
    }

    #[test]
    fn gauge_and_phase_invariance() {
        let (a, w) = fields_1d();
        let k = coef();
        let psi = random_field(1, 5, 9);
        let e = gl_energy(&psi, &a, &w, &k).unwrap();
        let chi = TorusField::from_modes(1, &[(vec![1], c(0.0, -0.15)), (vec![-1], c(0.0, 0.15))]);
        let (psi2, a2) = gauge_transform(&psi, &a, &chi).unwrap();
        let e2 = gl_energy(&psi2, &a2, &w, &k).unwrap();
        assert!(((e2 - e) / e).abs() < 1e-10, "{e} vs {e2}");
        assert!(a2.components[0].get(&[0]).norm() < 1e-15);

        let rotated = psi.scale(Complex64::from_polar(1.0, 0.7));
        let er = gl_energy(&rotated, &a, &w, &k).unwrap();
        assert!(((er - e) / e).abs() < 1e-12);
    }

    #[test]
    fn free_minimum_is_unit_modulus() {
        let a = TorusVectorField::zeros(1);
        let w = TorusField::zeros(1, 0);
        let s = minimize(
            &a,
            &w,
            &coef(),
            &GLOptions {
                n_max: 8,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(s.energy < 1e-10);
        let grid = TorusGrid::new(1, 64);
        let dev = grid
            .to_grid(&s.psi)
            .iter()
            .map(|p| (p.norm() - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-5);
    }

    #[test]
    fn reference_configuration_regression() {
        let a = TorusVectorField::zeros(1);
        let w = TorusField::cosine(1, 0.5);
        let k = coef();
        let s = minimize(&a, &w, &k, &GLOptions::default()).unwrap();
        assert!(s.converged && s.gradient_norm < 1e-8);
        let one = gl_energy(&TorusField::constant(1, 32, c(1.0, 0.0)), &a, &w, &k).unwrap();
        assert!(s.energy <= one.min(k.b3));
        assert!((s.energy - -1.2418e-5).abs() < 2e-8, "{}", s.energy);
        for pair in s.log.windows(2) {
            assert!(pair[1].energy <= pair[0].energy + 1e-15);
        }
        let finer = minimize(
            &a,
            &w,
            &k,
            &GLOptions {
                n_max: 64,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(((finer.energy - s.energy) / s.energy).abs() < 1e-6);
    }

    #[test]
    fn state_serializes() {
        let a = TorusVectorField::zeros(1);
        let w = TorusField::cosine(1, 0.5);
        let s = minimize(
            &a,
            &w,
            &coef(),
            &GLOptions {
                n_max: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: GLState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
