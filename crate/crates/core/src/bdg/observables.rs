use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{
    coverage_radius, hermitian_eigen, hermitian_eigenvalues, paired_difference, BdgError,
    BdgFields, FiberBasis, FiberOperator, FiberSystem,
};
use crate::coeffs::{e1_constant, e2_constants, TProfile};
use crate::gap::GapSolution;
use crate::gl::field_moments;
use crate::specfun::{fermi_f, fermi_rho, g0};

/// Trace expansion at one `h`: `lhs = h²E1 + h⁴E2 + residual`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceExpansion {
    pub h: f64,
    pub beta: f64,
    pub lhs: f64,
    pub e1_term: f64,
    pub e2_term: f64,
    pub residual: f64,
}

/// `Σ_i [f(βλ_i) - f(βμ_i)]` for one fiber, or exactly zero when `Δ = 0`.
fn fiber_free_energy_difference(op: &FiberOperator, beta: f64) -> Result<f64, BdgError> {
    if op
        .delta_block
        .col_iter()
        .all(|c| c.iter().all(|z| *z == Complex64::default()))
    {
        return Ok(0.0);
    }
    let full = hermitian_eigenvalues(&op.assemble(), op.xi)?;
    let free = op.free_eigenvalues()?;
    Ok(paired_difference(&full, &free, |l| fermi_f(beta * l)))
}

/// `(h/β)(1/M) Σ_ξ Tr[f(βH_Δ^ξ) - f(βH_0^ξ)]`.
pub fn fiber_lhs(system: &FiberSystem, beta: f64) -> Result<f64, BdgError> {
    let parts = system.map_fibers(|op| fiber_free_energy_difference(op, beta))?;
    Ok(system.h() / beta * parts.iter().sum::<f64>() / parts.len() as f64)
}

/// Compares the fiber trace with `h²E1 + h⁴E2`, the constants taken at `β`.
pub fn semiclassical_trace(system: &FiberSystem, beta: f64) -> Result<TraceExpansion, BdgError> {
    let h = system.h();
    let fields = &system.fields;
    let lhs = fiber_lhs(system, beta)?;
    let moments = field_moments(&fields.psi, &fields.a, &fields.w)?;
    let e1 = e1_constant(system.profile, beta)? * moments.norm2;
    let e2 = e2_constants(system.profile, beta)?.assemble(&moments);
    let e1_term = h * h * e1;
    let e2_term = h.powi(4) * e2;
    Ok(TraceExpansion {
        h,
        beta,
        lhs,
        e1_term,
        e2_term,
        residual: lhs - e1_term - e2_term,
    })
}

/// Translation-invariant value of the fiber trace for `ψ ≡ c`, `A = W = 0`:
/// `(1/β) ∫ [f(βE) + f(-βE) - f(βk) - f(-βk)] dp/2π` with
/// `E = sqrt(k² + h²|c|² t²)`, by the trapezoid rule on `[-L, L]`.
pub fn lhs_translation_invariant(
    profile: &dyn TProfile,
    h: f64,
    beta: f64,
    c: Complex64,
    steps: usize,
) -> f64 {
    let mu = profile.mu();
    let l = coverage_radius(profile) + 2.0;
    let dp = 2.0 * l / steps as f64;
    // f(z) + f(-z) = -|z| - 2 ln(1 + e^{-|z|})
    let pair = |z: f64| -z.abs() - 2.0 * (-z.abs()).exp().ln_1p();
    let integrand = |p: f64| {
        let k = p * p - mu;
        let d2 = (h * c.norm() * profile.t(p)).powi(2);
        let e = (k * k + d2).sqrt();
        // E - |k| without cancellation
        let gap = d2 / (e + k.abs());
        -beta * gap + (pair(beta * e) + beta * e) - (pair(beta * k) + beta * k.abs())
    };
    let total: f64 = (0..=steps)
        .map(|i| {
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            w * integrand(-l + i as f64 * dp)
        })
        .sum();
    total * dp / (2.0 * PI * beta)
}

/// `-(Δ/2E) tanh(βE/2)` with `Δ = -h c t(p)`, the pair amplitude of the
/// translation-invariant problem at momentum `p`.
pub fn alpha_translation_invariant(
    profile: &dyn TProfile,
    h: f64,
    beta: f64,
    c: Complex64,
    p: f64,
) -> Complex64 {
    let k = p * p - profile.mu();
    let delta = -h * c * profile.t(p);
    let e = (k * k + delta.norm_sqr()).sqrt();
    -delta / (2.0 * e) * (0.5 * beta * e).tanh()
}

/// Upper-right block of `ρ(βH^ξ) = (1 + e^{βH^ξ})^{-1}`, together with the
/// spectrum of `H^ξ`.
pub fn fiber_alpha(op: &FiberOperator, beta: f64) -> Result<(Mat<Complex64>, Vec<f64>), BdgError> {
    let n = op.n();
    let (vals, u) = hermitian_eigen(&op.assemble(), op.xi)?;
    let r: Vec<f64> = vals.iter().map(|&l| fermi_rho(beta * l)).collect();
    let top = Mat::from_fn(n, 2 * n, |i, k| u[(i, k)] * r[k]);
    let bottom = u.as_ref().subrows(n, n);
    Ok((&top * bottom.adjoint(), vals))
}

/// Entropy `-Σ γ ln γ - Σ (1-γ) ln(1-γ)` of `γ = ρ(βλ)` computed directly,
/// and through the form `ln(1 + e^{-z}) + z ρ(z)` that is symmetric under
/// `z → -z`.
pub fn fiber_entropy(eigenvalues: &[f64], beta: f64) -> (f64, f64) {
    let direct = eigenvalues
        .iter()
        .map(|&l| {
            let g = fermi_rho(beta * l);
            let a = if g > 0.0 { -g * g.ln() } else { 0.0 };
            let b = if g < 1.0 {
                -(1.0 - g) * (-g).ln_1p()
            } else {
                0.0
            };
            a + b
        })
        .sum();
    let symmetric = eigenvalues
        .iter()
        .map(|&l| {
            let z = (beta * l).abs();
            -fermi_f(z) + z * fermi_rho(z)
        })
        .sum();
    (direct, symmetric)
}

/// H¹ distance between `α_Δ` and its leading term, and the L² size of that term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaDistance {
    pub h: f64,
    pub beta: f64,
    pub h1_distance: f64,
    pub l2_leading: f64,
}

/// `φ(p) = (β/2) g0(β(p² - μ)) t(p)`.
pub fn phi(profile: &dyn TProfile, beta: f64, p: f64) -> f64 {
    0.5 * beta * g0(beta * (p * p - profile.mu())) * profile.t(p)
}

/// `(h/2) ψ̂_{m-n} (a(P_m) + a(P_n))`, the symmetrized product `ψ a + a ψ`.
fn leading_term(system: &FiberSystem, op: &FiberOperator, a: &[f64]) -> Mat<Complex64> {
    let h = system.h();
    Mat::from_fn(op.n(), op.n(), |i, j| {
        0.5 * h * system.psi_entry(i, j) * (a[i] + a[j])
    })
}

pub fn alpha_delta_distance(system: &FiberSystem, beta: f64) -> Result<AlphaDistance, BdgError> {
    let parts = system.map_fibers(|op| {
        let (alpha, _) = fiber_alpha(op, beta)?;
        let ph: Vec<f64> = op
            .momenta
            .iter()
            .map(|&p| phi(system.profile, beta, p))
            .collect();
        let lead = leading_term(system, op, &ph);
        let mut d2 = 0.0;
        let mut l2 = 0.0;
        for i in 0..op.n() {
            let w = 1.0 + op.momenta[i] * op.momenta[i];
            for j in 0..op.n() {
                d2 += w * (alpha[(i, j)] - lead[(i, j)]).norm_sqr();
                l2 += lead[(i, j)].norm_sqr();
            }
        }
        Ok((d2, l2))
    })?;
    let m = parts.len() as f64;
    let d2: f64 = parts.iter().map(|p| p.0).sum();
    let l2: f64 = parts.iter().map(|p| p.1).sum();
    Ok(AlphaDistance {
        h: system.h(),
        beta,
        h1_distance: (d2 / m).sqrt(),
        l2_leading: (l2 / m).sqrt(),
    })
}

/// `α₀(r)` and `V(r)` on `[0, r_V]`, where `|V| < 1e-12 max|V|` beyond `r_V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealSpacePair {
    pub dr: f64,
    pub r: Vec<f64>,
    pub alpha0: Vec<f64>,
    pub v: Vec<f64>,
    pub support: f64,
}

/// `α₀(r) = (2π)^{-1/2} ∫ e^{iqr} α̂₀(q) dq` by the trapezoid rule in `q`.
pub fn real_space_alpha0(sol: &GapSolution, dr: f64, dq: f64) -> Result<RealSpacePair, BdgError> {
    if sol.dim() != 1 {
        return Err(BdgError::Unsupported(
            "real-space pair functions are implemented in one dimension".into(),
        ));
    }
    let support = sol.spec.support_radius(1e-12);
    let nq = (sol.grid.cutoff / dq).ceil() as usize;
    let dq = sol.grid.cutoff / nq as f64;
    let qs: Vec<f64> = (0..=nq).map(|i| i as f64 * dq).collect();
    let ah: Vec<f64> = qs
        .par_iter()
        .enumerate()
        .map(|(i, &q)| {
            let w = if i == 0 || i == nq { 0.5 } else { 1.0 };
            w * dq * sol.alpha_hat_at(q)
        })
        .collect();
    let nr = (support / dr).ceil() as usize;
    let r: Vec<f64> = (0..=nr).map(|i| i as f64 * dr).collect();
    let alpha0 = r
        .par_iter()
        .map(|&x| {
            2.0 / (2.0 * PI).sqrt()
                * qs.iter()
                    .zip(&ah)
                    .map(|(q, a)| (q * x).cos() * a)
                    .sum::<f64>()
        })
        .collect();
    let v = r.iter().map(|&x| sol.spec.potential(x)).collect();
    Ok(RealSpacePair {
        dr,
        r,
        alpha0,
        v,
        support,
    })
}

impl RealSpacePair {
    /// `∫_R g(r) dr` for even `g`, sampled on the half-line grid.
    pub fn integrate_even(&self, g: impl Fn(usize) -> f64) -> f64 {
        let n = self.r.len();
        (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    g(i)
                } else {
                    2.0 * g(i)
                }
            })
            .sum::<f64>()
            * self.dr
    }
}

/// Trial-state free energy difference and its three parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEnergy {
    pub h: f64,
    pub beta: f64,
    /// `(1/2β)(1/M) Σ_ξ Tr[f(βH_Δ) - f(βH_0)]` per unit volume.
    pub trace_term: f64,
    /// `-∫ V |(h/2)(ψ α₀ + α₀ ψ)|²`.
    pub interaction_term: f64,
    /// `∫ V |α_Δ - (h/2)(ψ α₀ + α₀ ψ)|²`.
    pub pair_term: f64,
    pub f_bcs_diff: f64,
    /// `f_bcs_diff / h³`.
    pub scaled: f64,
}

/// Free energy of the trial state built from `Δ = -(h/2)(ψ t + t ψ)` at
/// `T = T_c(1 - h²D)`, relative to the normal state.
pub fn trial_state_energy(
    sol: &GapSolution,
    fields: &BdgFields,
    h: f64,
    d_param: f64,
    n_xi: usize,
    pair: &RealSpacePair,
) -> Result<TrialEnergy, BdgError> {
    if !(h * h * d_param < 1.0) {
        return Err(BdgError::InvalidInput(format!(
            "T_c(1 - h²D) must be positive; h = {h}, D = {d_param}"
        )));
    }
    let beta = sol.beta_c / (1.0 - h * h * d_param);
    let basis = FiberBasis::covering(h, coverage_radius(sol), n_xi)?;
    let system = FiberSystem::new(basis, sol, fields.clone())?;
    let n = system.basis.len();
    let nm = system.basis.n_max as i64;

    // r-grid for the pair term: aliasing of the trapezoid rule is e^{-36}
    let p_max = 2.0 * PI * (nm + 1) as f64;
    let dr = PI / (2.0 * p_max + 12.0 / h);
    let n_r = (h * pair.support / dr).floor() as i64;
    let rs: Vec<f64> = (-n_r..=n_r).map(|k| k as f64 * dr).collect();
    let v_r: Vec<f64> = rs.iter().map(|&r| sol.spec.potential(r / h)).collect();

    let parts = system.map_fibers(|op| {
        let (alpha, _) = fiber_alpha(op, beta)?;
        let trace = fiber_free_energy_difference(op, beta)?;
        let a0: Vec<f64> = op.momenta.iter().map(|&p| sol.alpha_hat_at(p)).collect();
        let lead = leading_term(&system, op, &a0);
        let phases: Vec<Vec<Complex64>> = (0..n)
            .map(|i| {
                let k = 2.0 * PI * (i as i64 - nm) as f64 + op.xi;
                rs.iter()
                    .map(|&r| Complex64::from_polar(1.0, k * r))
                    .collect()
            })
            .collect();
        // o_j(r) = Σ_n O_{n+j,n} e^{i(2πn+ξ)r}, j = -(N-1)..=N-1
        let mut o = vec![vec![Complex64::default(); rs.len()]; 2 * n - 1];
        for (jj, row) in o.iter_mut().enumerate() {
            let j = jj as i64 - (n as i64 - 1);
            for col in 0..n {
                let r_idx = col as i64 + j;
                if r_idx < 0 || r_idx >= n as i64 {
                    continue;
                }
                let oc = alpha[(r_idx as usize, col)] - lead[(r_idx as usize, col)];
                for (acc, ph) in row.iter_mut().zip(&phases[col]) {
                    *acc += oc * ph;
                }
            }
        }
        Ok((trace, o))
    })?;

    let m = parts.len() as f64;
    let trace_sum: f64 = parts.iter().map(|p| p.0).sum();
    let trace_term = trace_sum / m / (2.0 * beta);
    let mut o_total = vec![vec![Complex64::default(); rs.len()]; 2 * n - 1];
    for (_, o) in &parts {
        for (acc_row, row) in o_total.iter_mut().zip(o) {
            for (a, b) in acc_row.iter_mut().zip(row) {
                *a += b;
            }
        }
    }
    let pair_term: f64 = o_total
        .iter()
        .map(|row| {
            row.iter()
                .zip(&v_r)
                .map(|(z, v)| v * (z / m).norm_sqr())
                .sum::<f64>()
        })
        .sum::<f64>()
        * dr;

    let psi = &fields.psi;
    let interaction_term = -h / (2.0 * PI)
        * psi
            .modes()
            .map(|(nv, cf)| {
                let k = nv[0] as f64;
                let integral = pair.integrate_even(|i| {
                    let c = (PI * k * h * pair.r[i]).cos();
                    pair.v[i] * pair.alpha0[i] * pair.alpha0[i] * c * c
                });
                cf.norm_sqr() * integral
            })
            .sum::<f64>();

    let f_bcs_diff = trace_term + interaction_term + pair_term;
    Ok(TrialEnergy {
        h,
        beta,
        trace_term,
        interaction_term,
        pair_term,
        f_bcs_diff,
        scaled: f_bcs_diff / h.powi(3),
    })
}
