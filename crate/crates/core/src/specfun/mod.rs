//! Fermi-type special functions and their divided differences.
//!
//! Everything here is a pure function of its arguments. The functions are
//!
//! | name | definition |
//! |------|------------|
//! | [`fermi_f`] | `f(z) = -ln(1 + e^{-z})` |
//! | [`fermi_rho`] | `ρ(z) = 1/(1 + e^z) = f'(z)` |
//! | [`g0`] | `tanh(z/2)/z` |
//! | [`g1`] | `-g0'(z)` |
//! | [`g2`] | `g1'(z) + 2 g1(z)/z` |
//! | [`g1_over_z`] | `g1(z)/z`, strictly positive |
//! | [`kt_symbol`] | `x / tanh(x/(2T))` |
//!
//! The `g` functions have removable singularities at the origin. Below
//! [`SERIES_THRESHOLD`] they are evaluated from their Taylor polynomials.

mod divided;

pub use divided::{divided_difference, taylor_coefficients, FermiFn, NodeList, MAX_NODES};

use thiserror::Error;

/// Below this `|z|` the `g` functions switch to their Taylor polynomials.
pub const SERIES_THRESHOLD: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("argument {name} = {value} outside the open interval (0, 1)")]
    OutsideUnitInterval { name: &'static str, value: f64 },
    #[error("divided differences take between 1 and {max} nodes, got {got}")]
    NodeCount { got: usize, max: usize },
    #[error("node {index} is not finite")]
    NonFiniteNode { index: usize },
}

/// `f(z) = -ln(1 + e^{-z})`.
///
/// For negative `z` the equivalent form `z - ln(1 + e^z)` is used so that
/// nothing overflows.
pub fn fermi_f(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// `ρ(z) = 1/(1 + e^z)`.
pub fn fermi_rho(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Monomials `c · ρ^a · (1-ρ)^b` whose sum is the `order`-th derivative of ρ.
///
/// Uses `ρ' = -ρ(1-ρ)` and `(1-ρ)' = ρ(1-ρ)`. Every coefficient is an
/// integer, so the table is exact.
fn rho_derivative_monomials(order: usize) -> Vec<(f64, i32, i32)> {
    let mut terms: Vec<(f64, i32, i32)> = vec![(1.0, 1, 0)];
    for _ in 0..order {
        let mut next: Vec<(f64, i32, i32)> = Vec::with_capacity(terms.len() + 1);
        let mut push = |c: f64, a: i32, b: i32| {
            if c == 0.0 {
                return;
            }
            match next.iter_mut().find(|t| t.1 == a && t.2 == b) {
                Some(t) => t.0 += c,
                None => next.push((c, a, b)),
            }
        };
        for &(c, a, b) in &terms {
            push(-(a as f64) * c, a, b + 1);
            push(b as f64 * c, a + 1, b);
        }
        next.retain(|t| t.0 != 0.0);
        terms = next;
    }
    terms
}

/// `d^n ρ / dz^n`, evaluated from the exact `(ρ, 1-ρ)` polynomial.
pub fn fermi_rho_derivative(order: usize, z: f64) -> f64 {
    if order == 0 {
        return fermi_rho(z);
    }
    let rho = fermi_rho(z);
    let rho_bar = fermi_rho(-z);
    rho_derivative_monomials(order)
        .iter()
        .map(|&(c, a, b)| c * rho.powi(a) * rho_bar.powi(b))
        .sum()
}

/// `d^n f / dz^n`; `f' = ρ`, so higher orders reduce to derivatives of ρ.
pub fn fermi_f_derivative(order: usize, z: f64) -> f64 {
    match order {
        0 => fermi_f(z),
        n => fermi_rho_derivative(n - 1, z),
    }
}

/// `g0(z) = tanh(z/2)/z`, with `g0(0) = 1/2`.
pub fn g0(z: f64) -> f64 {
    if z.abs() < SERIES_THRESHOLD {
        let z2 = z * z;
        0.5 - z2 / 24.0 + z2 * z2 / 240.0 - 17.0 * z2 * z2 * z2 / 40320.0
    } else {
        (0.5 * z).tanh() / z
    }
}

/// `g1(z)/z`, even and strictly positive, `1/12` at the origin.
pub fn g1_over_z(z: f64) -> f64 {
    let a = z.abs();
    if a < SERIES_THRESHOLD {
        let z2 = z * z;
        1.0 / 12.0 - z2 / 60.0 + 17.0 * z2 * z2 / 6720.0 - 31.0 * z2 * z2 * z2 / 90720.0
    } else if a < 1.0 {
        // (sinh a - a) / (a^3 (1 + cosh a)) with the numerator summed as a series
        let a2 = a * a;
        let mut term = a * a2 / 6.0;
        let mut sum = term;
        let mut k = 3.0;
        while term > 1e-18 * sum {
            term *= a2 / ((k + 1.0) * (k + 2.0));
            sum += term;
            k += 2.0;
        }
        sum / (a * a2 * (1.0 + a.cosh()))
    } else {
        let e = (-a).exp();
        let tanh_half = (1.0 - e) / (1.0 + e);
        let sech2_half = 4.0 * e / ((1.0 + e) * (1.0 + e));
        (tanh_half - 0.5 * a * sech2_half) / (a * a * a)
    }
}

/// `g1(z) = -g0'(z)`, odd, vanishing at the origin.
pub fn g1(z: f64) -> f64 {
    if z.abs() < SERIES_THRESHOLD {
        let z2 = z * z;
        z * (1.0 / 12.0 - z2 / 60.0 + 17.0 * z2 * z2 / 6720.0)
    } else {
        z * g1_over_z(z)
    }
}

/// `g2(z) = 2 e^z (e^z - 1) / (z (e^z + 1)^3)`, even, `1/4` at the origin.
pub fn g2(z: f64) -> f64 {
    let a = z.abs();
    if a < SERIES_THRESHOLD {
        let z2 = z * z;
        0.25 - z2 / 12.0 + 17.0 * z2 * z2 / 960.0 - 31.0 * z2 * z2 * z2 / 10080.0
    } else {
        let e = (-a).exp();
        let d = 1.0 + e;
        2.0 * e * (-(-a).exp_m1()) / (a * d * d * d)
    }
}

/// Symbol of the pairing operator, `x / tanh(x/(2T))` with `x = p² - μ`.
///
/// Equals `2T` at `x = 0` and is bounded below by `2T`.
pub fn kt_symbol(x: f64, temperature: f64) -> Result<f64, SpecFunError> {
    if !(temperature > 0.0) {
        return Err(SpecFunError::NonPositiveTemperature(temperature));
    }
    Ok(2.0 * temperature * x_over_tanh(x / (2.0 * temperature)))
}

/// `y / tanh(y)`, even, 1 at the origin.
fn x_over_tanh(y: f64) -> f64 {
    let a = y.abs();
    if a < 1e-4 {
        1.0 + a * a / 3.0
    } else if a > 20.0 {
        a
    } else {
        a / a.tanh()
    }
}

/// `LHS - RHS` of the scalar entropy inequality
///
/// `x ln(x/y) + (1-x) ln((1-x)/(1-y)) >= L(y) (x-y)^2 + 4/3 (x(1-x) - y(1-y))^2`
///
/// where `L(y) = ln((1-y)/y) / (1-2y)`, which tends to 2 at `y = 1/2`.
pub fn entropy_inequality_margin(x: f64, y: f64) -> Result<f64, SpecFunError> {
    for (name, value) in [("x", x), ("y", y)] {
        if !(value > 0.0 && value < 1.0) {
            return Err(SpecFunError::OutsideUnitInterval { name, value });
        }
    }
    let lhs = x * (x / y).ln() + (1.0 - x) * ((1.0 - x) / (1.0 - y)).ln();
    // ln((1-y)/y) = 2 atanh(u) with u = 1 - 2y
    let u = 1.0 - 2.0 * y;
    let weight = if u.abs() < 1e-4 {
        let u2 = u * u;
        2.0 * (1.0 + u2 / 3.0 + u2 * u2 / 5.0)
    } else {
        2.0 * u.atanh() / u
    };
    let d = x * (1.0 - x) - y * (1.0 - y);
    let rhs = weight * (x - y) * (x - y) + 4.0 / 3.0 * d * d;
    Ok(lhs - rhs)
}
