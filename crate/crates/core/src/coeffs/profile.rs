use std::f64::consts::PI;

use crate::gap::{sphere_area, GapSolution};

/// Radial quadrature with the profile sampled at the nodes:
/// `Σ_j weights[j] f(nodes[j], t[j]) ≈ ∫_{R^d} f(|q|, t(q)) dq`.
#[derive(Debug, Clone)]
pub struct RadialQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub t: Vec<f64>,
}

impl RadialQuadrature {
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.t)
            .zip(&self.weights)
            .map(|((&q, &t), &w)| w * f(q, t))
            .sum()
    }
}

/// Step used for finite-difference derivatives of `t`.
pub const FD_STEP: f64 = 1e-2;

/// A radial, real pair function `t` together with a quadrature for it.
pub trait TProfile: Sync {
    fn dim(&self) -> usize;
    fn mu(&self) -> f64;
    /// `t` at radius `|p|`.
    fn t(&self, p: f64) -> f64;
    fn quadrature(&self) -> RadialQuadrature;

    /// `d^n t/dp^n` along a line through the origin, `n <= 2`. The default
    /// is the fourth-order central difference [`fd_derivative`].
    fn t_derivative(&self, p: f64, order: usize) -> f64 {
        fd_derivative(|x| self.t(x.abs()), p, order)
    }

    /// Smallest radius beyond which `|t| < rel_tol · max|t|`, scanning
    /// outward in steps of `step` up to `limit`.
    fn support(&self, rel_tol: f64, step: f64, limit: f64) -> f64 {
        let tmax = self
            .quadrature()
            .t
            .iter()
            .fold(0.0f64, |m, t| m.max(t.abs()));
        let mut last = 0.0;
        let mut p = 0.0;
        while p <= limit {
            if self.t(p).abs() >= rel_tol * tmax {
                last = p;
            }
            p += step;
        }
        last + step
    }
}

/// Fourth-order central differences of `f` at `x`.
pub fn fd_derivative(f: impl Fn(f64) -> f64, x: f64, order: usize) -> f64 {
    let h = FD_STEP;
    match order {
        0 => f(x),
        1 => (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h),
        2 => {
            (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h) - f(x + 2.0 * h))
                / (12.0 * h * h)
        }
        _ => panic!("derivative order {order} not supported"),
    }
}

impl TProfile for GapSolution {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn mu(&self) -> f64 {
        self.spec.mu
    }

    fn t(&self, p: f64) -> f64 {
        self.t_at(p.abs())
    }

    fn quadrature(&self) -> RadialQuadrature {
        RadialQuadrature {
            nodes: self.nodes.clone(),
            weights: self.weights.clone(),
            t: self.t_samples.clone(),
        }
    }

    /// Differentiates the Nyström kernel in one dimension; other dimensions
    /// fall back to finite differences.
    fn t_derivative(&self, p: f64, order: usize) -> f64 {
        if self.spec.dim == 1 {
            self.t_derivative_at(p, order)
        } else {
            fd_derivative(|x| self.t_at(x.abs()), p, order)
        }
    }
}

/// `t(p) = amplitude · exp(-p²/scale²)`, a stand-in for the gap solution
/// that has exact derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianProfile {
    pub amplitude: f64,
    pub scale: f64,
    pub mu: f64,
    pub dim: usize,
    /// Number of quadrature intervals on `[0, 9 · scale]`.
    pub n_points: usize,
}

impl GaussianProfile {
    pub fn new(amplitude: f64, scale: f64, mu: f64, dim: usize) -> Self {
        GaussianProfile {
            amplitude,
            scale,
            mu,
            dim,
            n_points: 4096,
        }
    }
}

impl TProfile for GaussianProfile {
    fn dim(&self) -> usize {
        self.dim
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn t(&self, p: f64) -> f64 {
        self.amplitude * (-(p * p) / (self.scale * self.scale)).exp()
    }

    fn t_derivative(&self, p: f64, order: usize) -> f64 {
        let s2 = self.scale * self.scale;
        let t = self.t(p);
        match order {
            0 => t,
            1 => -2.0 * p / s2 * t,
            2 => (4.0 * p * p / (s2 * s2) - 2.0 / s2) * t,
            _ => panic!("derivative order {order} not supported"),
        }
    }

    fn quadrature(&self) -> RadialQuadrature {
        let cutoff = 9.0 * self.scale;
        let n = self.n_points;
        let dq = cutoff / n as f64;
        let first = if self.dim == 1 { 0 } else { 1 };
        let area = sphere_area(self.dim);
        let nodes: Vec<f64> = (first..=n).map(|j| j as f64 * dq).collect();
        let weights = nodes
            .iter()
            .map(|&q| {
                let w = if q == 0.0 || (q - cutoff).abs() < 0.5 * dq {
                    0.5 * dq
                } else {
                    dq
                };
                w * area * q.powi(self.dim as i32 - 1)
            })
            .collect();
        let t = nodes.iter().map(|&q| self.t(q)).collect();
        RadialQuadrature { nodes, weights, t }
    }
}

/// `(2π)^{-d}`.
pub fn momentum_measure(dim: usize) -> f64 {
    (2.0 * PI).powi(-(dim as i32))
}
