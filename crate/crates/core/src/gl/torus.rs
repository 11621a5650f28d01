use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Periodic field on the unit torus `[0,1)^d` as a truncated Fourier series
/// `ψ(x) = Σ_{|n_j| <= n_max} c_n e^{2πi n·x}`.
///
/// Coefficients are stored densely in row-major order over the frequency box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SparseField", try_from = "SparseField")]
pub struct TorusField {
    dim: usize,
    n_max: usize,
    coeffs: Vec<Complex64>,
}

/// One nonzero Fourier mode in serialized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub n: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SparseField {
    dim: usize,
    n_max: usize,
    modes: Vec<Mode>,
}

impl From<TorusField> for SparseField {
    fn from(f: TorusField) -> Self {
        let modes = f
            .modes()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(n, c)| Mode {
                n: n[..f.dim].to_vec(),
                re: c.re,
                im: c.im,
            })
            .collect();
        SparseField {
            dim: f.dim,
            n_max: f.n_max,
            modes,
        }
    }
}

impl TryFrom<SparseField> for TorusField {
    type Error = String;

    fn try_from(s: SparseField) -> Result<Self, String> {
        if !(1..=3).contains(&s.dim) {
            return Err(format!("dim must be 1, 2 or 3, got {}", s.dim));
        }
        let mut f = TorusField::zeros(s.dim, s.n_max);
        for m in s.modes {
            if m.n.len() != s.dim {
                return Err(format!("mode {:?} has the wrong dimension", m.n));
            }
            if !f.set(&m.n, Complex64::new(m.re, m.im)) {
                return Err(format!("mode {:?} exceeds n_max = {}", m.n, s.n_max));
            }
        }
        Ok(f)
    }
}

impl TorusField {
    pub fn zeros(dim: usize, n_max: usize) -> Self {
        assert!((1..=3).contains(&dim), "dimension must be 1, 2 or 3");
        let side = 2 * n_max + 1;
        TorusField {
            dim,
            n_max,
            coeffs: vec![Complex64::new(0.0, 0.0); side.pow(dim as u32)],
        }
    }

    pub fn constant(dim: usize, n_max: usize, value: Complex64) -> Self {
        let mut f = Self::zeros(dim, n_max);
        f.set(&vec![0; dim], value);
        f
    }

    /// Build from `(frequency, amplitude)` pairs; `n_max` grows to fit.
    pub fn from_modes(dim: usize, modes: &[(Vec<i64>, Complex64)]) -> Self {
        let n_max = modes
            .iter()
            .flat_map(|(n, _)| n.iter().map(|v| v.unsigned_abs() as usize))
            .max()
            .unwrap_or(0);
        let mut f = Self::zeros(dim, n_max);
        for (n, c) in modes {
            let old = f.get(n);
            f.set(n, old + c);
        }
        f
    }

    /// Real field `amplitude · cos(2π n·x)` in one dimension.
    pub fn cosine(n: i64, amplitude: f64) -> Self {
        let half = Complex64::new(0.5 * amplitude, 0.0);
        if n == 0 {
            return Self::from_modes(1, &[(vec![0], half * 2.0)]);
        }
        Self::from_modes(1, &[(vec![n], half), (vec![-n], half)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    fn side(&self) -> usize {
        2 * self.n_max + 1
    }

    fn index(&self, n: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for &v in n.iter().take(self.dim) {
            if v.unsigned_abs() as usize > self.n_max {
                return None;
            }
            idx = idx * self.side() + (v + self.n_max as i64) as usize;
        }
        Some(idx)
    }

    /// Frequency vector of a flat index, padded with zeros to length 3.
    pub fn mode_at(&self, mut idx: usize) -> [i64; 3] {
        let mut out = [0i64; 3];
        let side = self.side();
        for a in (0..self.dim).rev() {
            out[a] = (idx % side) as i64 - self.n_max as i64;
            idx /= side;
        }
        out
    }

    pub fn get(&self, n: &[i64]) -> Complex64 {
        self.index(n).map(|i| self.coeffs[i]).unwrap_or_default()
    }

    /// Set a coefficient; returns false if `n` lies outside the box.
    pub fn set(&mut self, n: &[i64], value: Complex64) -> bool {
        match self.index(n) {
            Some(i) => {
                self.coeffs[i] = value;
                true
            }
            None => false,
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = ([i64; 3], Complex64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| (self.mode_at(i), *c))
    }

    /// Largest `|n_j|` with a nonzero coefficient.
    pub fn bandwidth(&self) -> usize {
        self.modes()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(n, _)| {
                n.iter()
                    .map(|v| v.unsigned_abs() as usize)
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    /// Same field in a box of a different size, truncating if smaller.
    pub fn resized(&self, n_max: usize) -> Self {
        let mut out = Self::zeros(self.dim, n_max);
        for (n, c) in self.modes() {
            out.set(&n[..self.dim], c);
        }
        out
    }

    /// `∫_C |ψ|² = Σ |c_n|²`.
    pub fn norm2(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `∫_C conj(self) · other`.
    pub fn inner(&self, other: &TorusField) -> Complex64 {
        assert_eq!((self.dim, self.n_max), (other.dim, other.n_max));
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Largest `|c_n - conj(c_{-n})|`; zero for real-valued fields.
    pub fn reality_defect(&self) -> f64 {
        self.modes()
            .map(|(n, c)| {
                let m: Vec<i64> = n[..self.dim].iter().map(|v| -v).collect();
                (c - self.get(&m).conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.reality_defect() <= tol
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// `self + s · other`.
    pub fn axpy(&self, s: Complex64, other: &TorusField) -> Self {
        assert_eq!((self.dim, self.n_max), (other.dim, other.n_max));
        let mut out = self.clone();
        out.coeffs
            .iter_mut()
            .zip(&other.coeffs)
            .for_each(|(a, b)| *a += s * b);
        out
    }

    /// `Σ |c_n|` and `Σ |c_n| (1 + |n|)`, finite for any truncated series.
    pub fn summability(&self) -> (f64, f64) {
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for (n, c) in self.modes() {
            let r = (n.iter().map(|v| (v * v) as f64).sum::<f64>()).sqrt();
            s0 += c.norm();
            s1 += c.norm() * (1.0 + r);
        }
        (s0, s1)
    }

    /// Values at a point.
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.modes()
            .map(|(n, c)| {
                let phase: f64 = (0..self.dim).map(|a| n[a] as f64 * x[a]).sum();
                c * Complex64::from_polar(1.0, 2.0 * PI * phase)
            })
            .sum()
    }
}

/// Vector field `A = (A_1, ..., A_d)` with one torus field per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusVectorField {
    pub components: Vec<TorusField>,
}

impl TorusVectorField {
    pub fn zeros(dim: usize) -> Self {
        TorusVectorField {
            components: (0..dim).map(|_| TorusField::zeros(dim, 0)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn bandwidth(&self) -> usize {
        self.components
            .iter()
            .map(|c| c.bandwidth())
            .max()
            .unwrap_or(0)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.components.iter().all(|c| c.is_real(tol))
    }
}

/// Smallest `2^a 3^b 5^c` that is at least `n`.
pub fn fft_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for p in [2, 3, 5] {
            while k % p == 0 {
                k /= p;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

/// Collocation grid with `m` points per axis and cached FFT plans.
#[derive(Clone)]
pub struct TorusGrid {
    pub dim: usize,
    pub m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TorusGrid {{ dim: {}, m: {} }}", self.dim, self.m)
    }
}

impl TorusGrid {
    pub fn new(dim: usize, m: usize) -> Self {
        let mut planner = FftPlanner::new();
        TorusGrid {
            dim,
            m,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        }
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid coordinate of a flat index along an axis.
    pub fn coordinate(&self, idx: usize, axis: usize) -> f64 {
        let stride = self.m.pow((self.dim - 1 - axis) as u32);
        ((idx / stride) % self.m) as f64 / self.m as f64
    }

    /// Unnormalized multidimensional DFT in place; `forward` uses `e^{-2πi}`.
    pub fn fft_in_place(&self, data: &mut [Complex64], forward: bool) {
        let plan = if forward { &self.fwd } else { &self.inv };
        let m = self.m;
        let mut line = vec![Complex64::default(); m];
        for axis in 0..self.dim {
            let stride = m.pow((self.dim - 1 - axis) as u32);
            let block = stride * m;
            for start in 0..data.len() / m {
                // enumerate line starts: outer index and inner offset
                let outer = start / stride;
                let inner = start % stride;
                let base = outer * block + inner;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[base + k * stride];
                }
                plan.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }

    /// Grid values `ψ(x_j)` of a field.
    pub fn to_grid(&self, f: &TorusField) -> Vec<Complex64> {
        assert_eq!(f.dim(), self.dim);
        assert!(
            2 * f.n_max() < self.m,
            "grid too small for the field bandwidth"
        );
        let mut data = vec![Complex64::default(); self.len()];
        for (n, c) in f.modes() {
            let mut idx = 0;
            for &v in n.iter().take(self.dim) {
                idx = idx * self.m + v.rem_euclid(self.m as i64) as usize;
            }
            data[idx] = c;
        }
        self.fft_in_place(&mut data, false);
        data
    }

    /// Fourier coefficients with `|n_j| <= n_max` of grid values.
    pub fn from_grid(&self, values: &[Complex64], n_max: usize) -> TorusField {
        let mut data = values.to_vec();
        self.fft_in_place(&mut data, true);
        let norm = 1.0 / self.len() as f64;
        let mut out = TorusField::zeros(self.dim, n_max);
        for i in 0..out.coeffs.len() {
            let n = out.mode_at(i);
            let mut idx = 0;
            for &v in n.iter().take(self.dim) {
                idx = idx * self.m + v.rem_euclid(self.m as i64) as usize;
            }
            out.coeffs[i] = data[idx] * norm;
        }
        out
    }

    /// `-i ∂_axis` of grid values whose bandwidth is below `m/2`.
    pub fn minus_i_derivative(&self, values: &[Complex64], axis: usize) -> Vec<Complex64> {
        let mut data = values.to_vec();
        self.fft_in_place(&mut data, true);
        let norm = 1.0 / self.len() as f64;
        let m = self.m as i64;
        let stride = self.m.pow((self.dim - 1 - axis) as u32);
        for (i, v) in data.iter_mut().enumerate() {
            let k = ((i / stride) % self.m) as i64;
            let k = if 2 * k == m {
                0
            } else if 2 * k > m {
                k - m
            } else {
                k
            };
            *v *= 2.0 * PI * k as f64 * norm;
        }
        self.fft_in_place(&mut data, false);
        data
    }

    /// Mean of grid values, which equals the integral over the unit cell for
    /// resolved integrands.
    pub fn mean(&self, values: impl Iterator<Item = f64>) -> f64 {
        values.sum::<f64>() / self.len() as f64
    }
}
