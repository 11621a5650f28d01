//! Divided differences of `f` and `ρ` with exact confluent limits.
//!
//! Nodes are sorted and clustered first. Any sub-range whose spread is at
//! most [`TAYLOR_SPREAD`] is evaluated from a Taylor expansion about its
//! midpoint: the divided difference of `y^k` over nodes `y_1..y_N` is the
//! complete homogeneous symmetric polynomial `h_{k-N+1}(y)`, so no
//! difference quotient with a small denominator is ever formed. Wider
//! sub-ranges use the ordinary recursion, whose denominators then exceed
//! the spread threshold.

use super::{fermi_f, fermi_rho, SpecFunError};

/// Upper bound on the number of nodes.
pub const MAX_NODES: usize = 8;

/// Nodes closer than this are treated as coincident.
pub const CLUSTER_TOL: f64 = 1e-9;

/// Sub-ranges with at most this spread are expanded about their midpoint.
const TAYLOR_SPREAD: f64 = 1.0;

/// Number of Taylor coefficients kept. The poles of ρ sit at distance π
/// from the real axis and the expansion points are within 1/2 of the
/// center, so terms decay like `(1/(2π))^k`.
const TAYLOR_TERMS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FermiFn {
    F,
    Rho,
}

impl FermiFn {
    pub fn eval(self, z: f64) -> f64 {
        match self {
            FermiFn::F => fermi_f(z),
            FermiFn::Rho => fermi_rho(z),
        }
    }
}

/// Arguments of a divided difference. Between 1 and [`MAX_NODES`] finite
/// reals.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeList(Vec<f64>);

impl NodeList {
    pub fn new(nodes: &[f64]) -> Result<Self, SpecFunError> {
        if nodes.is_empty() || nodes.len() > MAX_NODES {
            return Err(SpecFunError::NodeCount {
                got: nodes.len(),
                max: MAX_NODES,
            });
        }
        if let Some(index) = nodes.iter().position(|a| !a.is_finite()) {
            return Err(SpecFunError::NonFiniteNode { index });
        }
        Ok(NodeList(nodes.to_vec()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// First `n` Taylor coefficients of `func` about `center`.
///
/// The coefficients of ρ come from `ρ' = -ρ ρ̄` with `ρ̄ = 1 - ρ`, whose
/// coefficients are `ρ(-c)` followed by the negated ρ coefficients. Both
/// constant terms are computed without cancellation.
pub fn taylor_coefficients(func: FermiFn, center: f64, n: usize) -> Vec<f64> {
    let rho_terms = match func {
        FermiFn::Rho => n,
        FermiFn::F => n.saturating_sub(1),
    };
    let mut s = vec![0.0; rho_terms];
    if rho_terms > 0 {
        s[0] = fermi_rho(center);
        let u0 = fermi_rho(-center);
        for k in 0..rho_terms - 1 {
            // u_0 = ρ̄(c), u_j = -s_j for j >= 1
            let mut acc = s[k] * u0;
            for i in 0..k {
                acc -= s[i] * s[k - i];
            }
            s[k + 1] = -acc / (k as f64 + 1.0);
        }
    }
    match func {
        FermiFn::Rho => s,
        FermiFn::F => {
            let mut a = Vec::with_capacity(n);
            if n > 0 {
                a.push(fermi_f(center));
            }
            for (k, sk) in s.into_iter().enumerate() {
                a.push(sk / (k as f64 + 1.0));
            }
            a
        }
    }
}

/// Divided difference over nodes that all lie within [`TAYLOR_SPREAD`].
fn taylor_divided_difference(func: FermiFn, nodes: &[f64]) -> f64 {
    let n = nodes.len();
    let lo = nodes.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = nodes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let center = 0.5 * (lo + hi);
    let terms = TAYLOR_TERMS + n;
    let a = taylor_coefficients(func, center, terms);
    // h[m] = complete homogeneous symmetric polynomial of degree m in y
    let degrees = terms - n + 1;
    let mut h = vec![0.0; degrees];
    h[0] = 1.0;
    for &x in nodes {
        let y = x - center;
        for m in 1..degrees {
            h[m] += y * h[m - 1];
        }
    }
    let mut sum = 0.0;
    for m in (0..degrees).rev() {
        sum += a[m + n - 1] * h[m];
    }
    sum
}

/// Sort nodes and snap each cluster of near-coincident nodes to its mean.
fn clustered(nodes: &[f64]) -> Vec<f64> {
    let mut sorted = nodes.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] - sorted[i] <= CLUSTER_TOL {
            j += 1;
        }
        if j - i > 1 {
            let mean = sorted[i..j].iter().sum::<f64>() / (j - i) as f64;
            sorted[i..j].iter_mut().for_each(|x| *x = mean);
        }
        i = j;
    }
    sorted
}

/// `[a_1, ..., a_N]_func`, symmetric in the nodes.
pub fn divided_difference(func: FermiFn, nodes: &NodeList) -> f64 {
    let a = clustered(nodes.as_slice());
    let n = a.len();
    if n == 1 {
        return func.eval(a[0]);
    }
    // table[i][len-1] holds the divided difference over a[i..i+len]
    let mut table = [[0.0f64; MAX_NODES]; MAX_NODES];
    for len in 1..=n {
        for i in 0..=n - len {
            let j = i + len - 1;
            table[i][len - 1] = if len == 1 {
                func.eval(a[i])
            } else if a[j] - a[i] <= TAYLOR_SPREAD {
                taylor_divided_difference(func, &a[i..=j])
            } else {
                (table[i + 1][len - 2] - table[i][len - 2]) / (a[j] - a[i])
            };
        }
    }
    table[0][n - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{fermi_f_derivative, g0, g1};

    fn dd(func: FermiFn, nodes: &[f64]) -> f64 {
        divided_difference(func, &NodeList::new(nodes).unwrap())
    }

    #[test]
    fn node_list_validation() {
        assert!(NodeList::new(&[]).is_err());
        assert!(NodeList::new(&[0.0; 9]).is_err());
        assert!(NodeList::new(&[0.0, f64::NAN]).is_err());
        assert_eq!(NodeList::new(&[1.0, 2.0]).unwrap().len(), 2);
    }

    #[test]
    fn base_cases() {
        assert_eq!(dd(FermiFn::F, &[1.5]), fermi_f(1.5));
        assert!((dd(FermiFn::F, &[0.0, 0.0]) - 0.5).abs() < 1e-15);
        let (a, b) = (-3.0, 2.0);
        let direct = (fermi_f(b) - fermi_f(a)) / (b - a);
        assert!((dd(FermiFn::F, &[a, b]) - direct).abs() < 1e-15);
    }

    #[test]
    fn five_point_confluent_reference() {
        let v = dd(FermiFn::F, &[2.0, 2.0, 2.0, -2.0, -2.0]);
        assert!((v - 0.002_668_904_799_544_833_7).abs() < 1e-15, "{v}");
        assert!((v - g1(2.0) / 32.0).abs() < 1e-15);
    }

    #[test]
    fn taylor_coefficients_match_derivatives() {
        let c = 0.8;
        let a = taylor_coefficients(FermiFn::F, c, 6);
        let mut fact = 1.0;
        for (k, ak) in a.iter().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            let exact = fermi_f_derivative(k, c) / fact;
            assert!((ak - exact).abs() < 1e-15, "k = {k}");
        }
    }

    #[test]
    fn fully_confluent_is_scaled_derivative() {
        for &c in &[-5.0, -0.3, 0.0, 1.7, 30.0] {
            let v = dd(FermiFn::F, &[c, c, c, c]);
            assert!((v - fermi_f_derivative(3, c) / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn small_arguments_keep_full_accuracy() {
        // the naive Hermite recursion loses about eps/(2a)^4 here
        let a = 1e-3;
        assert!((dd(FermiFn::F, &[a, a, a, -a, -a]) - g1(a) / (16.0 * a)).abs() < 1e-15);
        assert!((dd(FermiFn::F, &[a, a, a, -a]) - g1(a) / 8.0).abs() < 1e-16);
        assert!(dd(FermiFn::F, &[a, a, -a, -a]).abs() < 1e-17);
        assert!((dd(FermiFn::F, &[a, a, -a]) + g0(a) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn near_coincident_nodes_snap() {
        let v = dd(FermiFn::Rho, &[0.4, 0.4 + 1e-12, 2.0]);
        let w = dd(FermiFn::Rho, &[0.4, 0.4, 2.0]);
        assert!((v - w).abs() < 1e-11);
    }

    #[test]
    fn large_arguments_are_finite() {
        let v = dd(FermiFn::F, &[-600.0, -600.0, 0.0, 500.0, 500.0]);
        assert!(v.is_finite());
        let v = dd(FermiFn::Rho, &[-40.0, -39.5, -39.0]);
        assert!(v.is_finite());
    }

    #[test]
    fn exact_permutation_symmetry() {
        let base = [0.3, -1.2, 4.0, 0.3, 2.2];
        let v = dd(FermiFn::F, &base);
        let perm = [4.0, 0.3, 2.2, -1.2, 0.3];
        assert_eq!(v, dd(FermiFn::F, &perm));
    }
}
