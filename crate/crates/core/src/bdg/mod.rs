//! Bogoliubov operator on Bloch fibers of the unit cell, in one dimension.
//!
//! A fiber at Bloch momentum `ξ` uses the plane waves `e^{i(2πn+ξ)x}`,
//! `|n| <= n_max`, with scaled momenta `P_n = h(2πn + ξ)`. In this basis
//!
//! ```text
//! k_mn  = P_m² δ_mn + h(P_m + P_n) Â_{m-n} + h² (A²)^_{m-n} + h² Ŵ_{m-n} - μ δ_mn
//! k̄_mn  = same with the sign of the A term flipped
//! Δ_mn  = -(h/2) ψ̂_{m-n} (t(P_m) + t(P_n))
//! H^ξ   = [[k, Δ], [Δ†, -k̄]]
//! ```

mod observables;
mod sweep;

pub use observables::{
    alpha_delta_distance, alpha_translation_invariant, fiber_alpha, fiber_entropy, fiber_lhs,
    lhs_translation_invariant, phi, real_space_alpha0, semiclassical_trace, trial_state_energy,
    AlphaDistance, RealSpacePair, TraceExpansion, TrialEnergy,
};
pub use sweep::{fit_order, h_sweep, SweepPoint, SweepReport, DEFAULT_H_LIST};

use faer::{Mat, Side};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::coeffs::{CoeffError, TProfile};
use crate::gl::{GLError, TorusField, TorusVectorField, REALITY_TOL};

#[derive(Debug, Error)]
pub enum BdgError {
    #[error("fiber covers momenta up to {covered:.4} but t needs {required:.4} (n_max = {n_max})")]
    Coverage {
        n_max: usize,
        covered: f64,
        required: f64,
    },
    #[error("{0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("eigensolver failed at xi = {xi}: {msg}")]
    Eigen { xi: f64, msg: String },
    #[error("sweep has {valid} usable points, at least 3 needed; failures: {failures:?}")]
    TooFewPoints { valid: usize, failures: Vec<String> },
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Gl(#[from] GLError),
}

/// `|t(Q_t)| < COVERAGE_TOL · max|t|` defines the momentum a fiber must reach.
pub const COVERAGE_TOL: f64 = 1e-8;
/// Extra modes beyond the coverage radius.
pub const GUARD_MODES: usize = 8;
/// Default number of Bloch momenta.
pub const DEFAULT_XI_NODES: usize = 16;

/// Radius `Q_t` with `|t| < 1e-8 max|t|` beyond it.
pub fn coverage_radius(profile: &dyn TProfile) -> f64 {
    let quad = profile.quadrature();
    let limit = 2.0 * quad.nodes.last().copied().unwrap_or(1.0);
    profile.support(COVERAGE_TOL, 0.01, limit)
}

/// Order parameter and external fields on the unit cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdgFields {
    pub psi: TorusField,
    pub a: TorusVectorField,
    pub w: TorusField,
}

impl BdgFields {
    pub fn new(psi: TorusField, a: TorusVectorField, w: TorusField) -> Result<Self, BdgError> {
        if psi.dim() != 1 || a.dim() != 1 || w.dim() != 1 || a.components[0].dim() != 1 {
            return Err(BdgError::Unsupported(
                "Bogoliubov fibers are implemented in one dimension".into(),
            ));
        }
        if !w.is_real(REALITY_TOL) || !a.is_real(REALITY_TOL) {
            return Err(BdgError::InvalidInput("A and W must be real-valued".into()));
        }
        Ok(BdgFields { psi, a, w })
    }

    /// Constant `ψ ≡ c` without external fields.
    pub fn constant(c: Complex64) -> Self {
        BdgFields {
            psi: TorusField::constant(1, 0, c),
            a: TorusVectorField::zeros(1),
            w: TorusField::zeros(1, 0),
        }
    }

    pub fn is_translation_invariant(&self) -> bool {
        self.psi.bandwidth() == 0 && self.a.bandwidth() == 0 && self.w.bandwidth() == 0
    }
}

/// Bloch momenta and plane-wave truncation shared by all fibers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberBasis {
    pub xi_nodes: Vec<f64>,
    pub n_max: usize,
    pub h: f64,
}

impl FiberBasis {
    /// `n_xi` midpoint Bloch momenta `(i + 1/2) 2π/n_xi`.
    pub fn new(h: f64, n_max: usize, n_xi: usize) -> Result<Self, BdgError> {
        if !(h > 0.0 && h < 1.0) {
            return Err(BdgError::InvalidInput(format!(
                "h must lie in (0,1), got {h}"
            )));
        }
        if n_xi == 0 {
            return Err(BdgError::InvalidInput(
                "need at least one Bloch momentum".into(),
            ));
        }
        let xi_nodes = (0..n_xi)
            .map(|i| (i as f64 + 0.5) * 2.0 * PI / n_xi as f64)
            .collect();
        Ok(FiberBasis { xi_nodes, n_max, h })
    }

    /// `n_max = ceil(Q_t / (2πh)) + 8`.
    pub fn covering(h: f64, q_t: f64, n_xi: usize) -> Result<Self, BdgError> {
        let n_max = (q_t / (2.0 * PI * h)).ceil() as usize + GUARD_MODES;
        Self::new(h, n_max, n_xi)
    }

    pub fn len(&self) -> usize {
        2 * self.n_max + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn covered_momentum(&self) -> f64 {
        self.h * 2.0 * PI * self.n_max as f64
    }

    pub fn check_coverage(&self, q_t: f64) -> Result<(), BdgError> {
        if self.covered_momentum() < q_t {
            return Err(BdgError::Coverage {
                n_max: self.n_max,
                covered: self.covered_momentum(),
                required: q_t,
            });
        }
        Ok(())
    }

    /// `P_m = h(2πm + ξ)` for `m = -n_max..=n_max`.
    pub fn momenta(&self, xi: f64) -> Vec<f64> {
        let n = self.n_max as i64;
        (-n..=n)
            .map(|m| self.h * (2.0 * PI * m as f64 + xi))
            .collect()
    }
}

/// Blocks of the Bogoliubov operator on one fiber.
#[derive(Debug, Clone)]
pub struct FiberOperator {
    pub xi: f64,
    pub momenta: Vec<f64>,
    pub k_block: Mat<Complex64>,
    pub kbar_block: Mat<Complex64>,
    pub delta_block: Mat<Complex64>,
}

impl FiberOperator {
    pub fn n(&self) -> usize {
        self.momenta.len()
    }

    /// `[[k, Δ], [Δ†, -k̄]]`.
    pub fn assemble(&self) -> Mat<Complex64> {
        let n = self.n();
        Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => self.k_block[(i, j)],
            (true, false) => self.delta_block[(i, j - n)],
            (false, true) => self.delta_block[(j, i - n)].conj(),
            (false, false) => -self.kbar_block[(i - n, j - n)],
        })
    }

    /// The same operator with `Δ = 0`.
    pub fn assemble_free(&self) -> Mat<Complex64> {
        let n = self.n();
        Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => self.k_block[(i, j)],
            (false, false) => -self.kbar_block[(i - n, j - n)],
            _ => Complex64::default(),
        })
    }

    /// Spectrum of `H_0^ξ`, from the two diagonal blocks separately.
    pub fn free_eigenvalues(&self) -> Result<Vec<f64>, BdgError> {
        let mut e = hermitian_eigenvalues(&self.k_block, self.xi)?;
        e.extend(
            hermitian_eigenvalues(&self.kbar_block, self.xi)?
                .into_iter()
                .map(|v| -v),
        );
        e.sort_by(f64::total_cmp);
        Ok(e)
    }
}

/// Largest `|M - M†|` entry.
pub fn hermiticity_defect(m: &Mat<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..=i {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &Mat<Complex64>, xi: f64) -> Result<Vec<f64>, BdgError> {
    let mut e = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| BdgError::Eigen {
            xi,
            msg: format!("{e:?}"),
        })?;
    e.sort_by(f64::total_cmp);
    Ok(e)
}

/// Eigenvalues and eigenvectors (columns) of a Hermitian matrix.
pub fn hermitian_eigen(
    m: &Mat<Complex64>,
    xi: f64,
) -> Result<(Vec<f64>, Mat<Complex64>), BdgError> {
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| BdgError::Eigen {
            xi,
            msg: format!("{e:?}"),
        })?;
    let s = eig.S().column_vector();
    let values = (0..m.nrows()).map(|i| s[i].re).collect();
    Ok((values, eig.U().to_owned()))
}

/// Coefficients `c_d` for `d = -2n..=2n`, stored at `d + 2n`.
fn toeplitz(f: &TorusField, n_max: usize) -> Vec<Complex64> {
    let span = 2 * n_max as i64;
    (-span..=span).map(|d| f.get(&[d])).collect()
}

/// Fourier coefficients of the square of a one-dimensional field.
pub fn square_field(a: &TorusField) -> TorusField {
    let n = a.n_max() as i64;
    let mut out = TorusField::zeros(1, 2 * a.n_max());
    for p in -n..=n {
        for q in -n..=n {
            let old = out.get(&[p + q]);
            out.set(&[p + q], old + a.get(&[p]) * a.get(&[q]));
        }
    }
    out
}

/// Everything needed to build fibers at one `h`.
pub struct FiberSystem<'a> {
    pub basis: FiberBasis,
    pub profile: &'a dyn TProfile,
    pub fields: BdgFields,
    psi: Vec<Complex64>,
    a: Vec<Complex64>,
    a2: Vec<Complex64>,
    w: Vec<Complex64>,
}

impl<'a> FiberSystem<'a> {
    /// Checks dimension and the coverage invariant against `profile`.
    pub fn new(
        basis: FiberBasis,
        profile: &'a dyn TProfile,
        fields: BdgFields,
    ) -> Result<Self, BdgError> {
        if profile.dim() != 1 {
            return Err(BdgError::Unsupported(
                "Bogoliubov fibers are implemented in one dimension".into(),
            ));
        }
        basis.check_coverage(coverage_radius(profile))?;
        Ok(Self::unchecked(basis, profile, fields))
    }

    /// Skips the coverage check; for deliberately truncated test instances.
    pub fn unchecked(basis: FiberBasis, profile: &'a dyn TProfile, fields: BdgFields) -> Self {
        // parallelism comes from the fibers, not from inside each factorization
        faer::set_global_parallelism(faer::Par::Seq);
        let n = basis.n_max;
        let a = &fields.a.components[0];
        FiberSystem {
            psi: toeplitz(&fields.psi, n),
            a: toeplitz(a, n),
            a2: toeplitz(&square_field(a), n),
            w: toeplitz(&fields.w, n),
            basis,
            profile,
            fields,
        }
    }

    pub fn h(&self) -> f64 {
        self.basis.h
    }

    pub fn mu(&self) -> f64 {
        self.profile.mu()
    }

    /// `ψ̂_{m-n}` for basis indices `m, n`.
    pub fn psi_entry(&self, m: usize, n: usize) -> Complex64 {
        self.psi[m + 2 * self.basis.n_max - n]
    }

    pub fn build_fiber(&self, xi: f64) -> FiberOperator {
        let h = self.basis.h;
        let mu = self.mu();
        let p = self.basis.momenta(xi);
        let t: Vec<f64> = p.iter().map(|&q| self.profile.t(q)).collect();
        let n = p.len();
        let off = 2 * self.basis.n_max;
        let kin = |sign: f64| {
            Mat::from_fn(n, n, |i, j| {
                let d = i + off - j;
                let mut v = sign * h * (p[i] + p[j]) * self.a[d] + h * h * (self.a2[d] + self.w[d]);
                if i == j {
                    v += p[i] * p[i] - mu;
                }
                v
            })
        };
        FiberOperator {
            xi,
            k_block: kin(1.0),
            kbar_block: kin(-1.0),
            delta_block: Mat::from_fn(n, n, |i, j| {
                -0.5 * h * self.psi[i + off - j] * (t[i] + t[j])
            }),
            momenta: p,
        }
    }

    /// Runs `f` on every fiber in parallel and returns results in `ξ` order.
    pub fn map_fibers<T: Send>(
        &self,
        f: impl Fn(&FiberOperator) -> Result<T, BdgError> + Sync,
    ) -> Result<Vec<T>, BdgError> {
        self.basis
            .xi_nodes
            .par_iter()
            .map(|&xi| f(&self.build_fiber(xi)))
            .collect()
    }
}

/// [`FiberSystem::build_fiber`] with the coverage check.
pub fn build_fiber(
    xi: f64,
    basis: &FiberBasis,
    fields: &BdgFields,
    profile: &dyn TProfile,
) -> Result<FiberOperator, BdgError> {
    Ok(FiberSystem::new(basis.clone(), profile, fields.clone())?.build_fiber(xi))
}

/// `(1/M) Σ_ξ Tr g(H^ξ)`.
pub fn trace_per_unit_volume(
    xi_nodes: &[f64],
    op: impl Fn(f64) -> Result<Mat<Complex64>, BdgError> + Sync,
    g: impl Fn(f64) -> f64 + Sync,
) -> Result<f64, BdgError> {
    let parts: Vec<f64> = xi_nodes
        .par_iter()
        .map(|&xi| {
            Ok(hermitian_eigenvalues(&op(xi)?, xi)?
                .iter()
                .map(|&l| g(l))
                .sum())
        })
        .collect::<Result<_, BdgError>>()?;
    Ok(parts.iter().sum::<f64>() / xi_nodes.len() as f64)
}

/// `(1/M) Σ_ξ Tr[g(H₁^ξ) - g(H₂^ξ)]`, subtracting eigenvalue by eigenvalue in
/// ascending order before any summation.
pub fn trace_difference_per_unit_volume(
    xi_nodes: &[f64],
    ops: impl Fn(f64) -> Result<(Mat<Complex64>, Mat<Complex64>), BdgError> + Sync,
    g: impl Fn(f64) -> f64 + Sync,
) -> Result<f64, BdgError> {
    let parts: Vec<f64> = xi_nodes
        .par_iter()
        .map(|&xi| {
            let (a, b) = ops(xi)?;
            let ea = hermitian_eigenvalues(&a, xi)?;
            let eb = hermitian_eigenvalues(&b, xi)?;
            Ok(paired_difference(&ea, &eb, &g))
        })
        .collect::<Result<_, BdgError>>()?;
    Ok(parts.iter().sum::<f64>() / xi_nodes.len() as f64)
}

/// `Σ_i [g(a_i) - g(b_i)]` over sorted spectra of equal length.
pub fn paired_difference(a: &[f64], b: &[f64], g: impl Fn(f64) -> f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| g(x) - g(y)).sum()
}

/// Dense operator on a supercell of `cells` unit cells with twisted
/// boundary condition `e^{iπ}`, in its own plane-wave basis
/// `κ_k = 2π(k + 1/2)/cells`. Its modes are exactly those of the
/// `cells` midpoint fibers combined.
pub fn supercell_operator(system: &FiberSystem, cells: usize, with_delta: bool) -> Mat<Complex64> {
    let h = system.h();
    let mu = system.mu();
    let nm = system.basis.n_max as i64;
    let c = cells as i64;
    let ks: Vec<i64> = (-nm * c..(nm + 1) * c).collect();
    let kappa: Vec<f64> = ks
        .iter()
        .map(|&k| h * 2.0 * PI * (k as f64 + 0.5) / cells as f64)
        .collect();
    let t: Vec<f64> = kappa.iter().map(|&p| system.profile.t(p)).collect();
    let fields = &system.fields;
    let a = &fields.a.components[0];
    let a2 = square_field(a);
    let len = ks.len();
    let coupling = |i: usize, j: usize| {
        let d = ks[i] - ks[j];
        (d % c == 0).then_some(d / c)
    };
    let kin = |i: usize, j: usize, sign: f64| -> Complex64 {
        let Some(n) = coupling(i, j) else {
            return Complex64::default();
        };
        let mut v = sign * h * (kappa[i] + kappa[j]) * a.get(&[n])
            + h * h * (a2.get(&[n]) + fields.w.get(&[n]));
        if i == j {
            v += kappa[i] * kappa[i] - mu;
        }
        v
    };
    let delta = |i: usize, j: usize| -> Complex64 {
        match coupling(i, j) {
            Some(n) if with_delta => -0.5 * h * fields.psi.get(&[n]) * (t[i] + t[j]),
            _ => Complex64::default(),
        }
    };
    Mat::from_fn(2 * len, 2 * len, |i, j| match (i < len, j < len) {
        (true, true) => kin(i, j, 1.0),
        (true, false) => delta(i, j - len),
        (false, true) => delta(j, i - len).conj(),
        (false, false) => -kin(i - len, j - len, -1.0),
    })
}
