use serde::{Deserialize, Serialize};

use super::{momentum_measure, CoeffError, RadialQuadrature, TProfile};
use crate::specfun::{divided_difference, g0, g1, g1_over_z, g2, FermiFn, NodeList};

/// Small-momentum limits of the trace-expansion kernels, each by
/// divided-difference quadrature and by its closed `g`-function form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallPConstants {
    pub f000_dd: f64,
    pub f000_closed: f64,
    pub g0_dd: f64,
    pub g0_closed: f64,
    /// `(p·∇)² G(0)` as a matrix in `p`; `None` for the divided-difference
    /// route outside one dimension.
    pub hess_g0_dd: Option<Vec<Vec<f64>>>,
    pub hess_g0_closed: Vec<Vec<f64>>,
    pub l00_dd: f64,
    pub l00_closed: f64,
}

fn dd(nodes: &[f64]) -> f64 {
    divided_difference(
        FermiFn::F,
        &NodeList::new(nodes).expect("at most five finite nodes"),
    )
}

/// `G(p) = β² ∫ (t(q+p) + t(q))²/4 · [a1, a1, -a0]_f dq/2π` in one
/// dimension, on the full-line extension of the radial quadrature.
fn g_of_p(profile: &dyn TProfile, quad: &RadialQuadrature, beta: f64, p: f64) -> f64 {
    let mu = profile.mu();
    let mut acc = 0.0;
    for ((&q, &t0), &w) in quad.nodes.iter().zip(&quad.t).zip(&quad.weights) {
        let signs: &[f64] = if q == 0.0 { &[1.0] } else { &[1.0, -1.0] };
        let weight = if q == 0.0 { w } else { 0.5 * w };
        for &s in signs {
            let qs = s * q;
            let a0 = beta * (qs * qs - mu);
            let a1 = beta * ((qs + p) * (qs + p) - mu);
            let tt = profile.t(qs + p) + t0;
            acc += weight * 0.25 * tt * tt * dd(&[a1, a1, -a0]);
        }
    }
    beta * beta * acc * momentum_measure(1)
}

/// Second derivative of the even function `G` at zero by three-level
/// Richardson extrapolation of `2(G(δ) - G(0))/δ²`.
fn g_second_derivative(
    profile: &dyn TProfile,
    quad: &RadialQuadrature,
    beta: f64,
    g_zero: f64,
) -> f64 {
    let delta = 0.04;
    let d = |h: f64| 2.0 * (g_of_p(profile, quad, beta, h) - g_zero) / (h * h);
    let (d1, d2, d3) = (d(delta), d(0.5 * delta), d(0.25 * delta));
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d3 - d2) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

/// `F(0,0,0)`, `G(0)`, `(p·∇)²G(0)` and `L(0,0)` at inverse temperature `β`.
pub fn semiclassical_smallp_constants(
    profile: &dyn TProfile,
    beta: f64,
) -> Result<SmallPConstants, CoeffError> {
    if !(beta > 0.0) {
        return Err(CoeffError::NonPositiveBeta(beta));
    }
    let dim = profile.dim();
    let mu = profile.mu();
    let quad = profile.quadrature();
    let m = momentum_measure(dim);
    let a = |q: f64| beta * (q * q - mu);

    let f000_dd =
        beta.powi(4) * quad.integrate(|q, t| t.powi(4) * dd(&[a(q), a(q), a(q), -a(q), -a(q)])) * m;
    let f000_closed =
        beta.powi(3) / 16.0 * quad.integrate(|q, t| t.powi(4) * beta * g1_over_z(a(q))) * m;

    let g0_dd = beta * beta * quad.integrate(|q, t| t * t * dd(&[a(q), a(q), -a(q)])) * m;
    let g0_closed = -beta * beta / 4.0 * quad.integrate(|q, t| t * t * g0(a(q))) * m;

    let l00_dd = beta.powi(3)
        * quad.integrate(|q, t| {
            let x = a(q);
            t * t * (2.0 * dd(&[x, x, x, -x]) + dd(&[x, x, -x, -x]))
        })
        * m;
    let l00_closed = beta.powi(3) / 4.0 * quad.integrate(|q, t| t * t * g1(a(q))) * m;

    // radial reduction of the three terms, each proportional to δ_jk
    let lap = quad.integrate(|q, t| {
        let mut l = profile.t_derivative(q, 2);
        if dim > 1 {
            l += (dim as f64 - 1.0) * profile.t_derivative(q, 1) / q;
        }
        t * l / dim as f64 * g0(a(q))
    });
    let second = quad.integrate(|q, t| q * q / dim as f64 * t * t * g2(a(q)));
    let third = quad.integrate(|q, t| t * t * g1(a(q)));
    let hess =
        (-beta * beta / 8.0 * lap + beta.powi(4) / 4.0 * second + beta.powi(3) / 8.0 * third) * m;
    let hess_g0_closed = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { hess } else { 0.0 }).collect())
        .collect();

    let hess_g0_dd =
        (dim == 1).then(|| vec![vec![g_second_derivative(profile, &quad, beta, g0_dd)]]);

    Ok(SmallPConstants {
        f000_dd,
        f000_closed,
        g0_dd,
        g0_closed,
        hess_g0_dd,
        hess_g0_closed,
        l00_dd,
        l00_closed,
    })
}
