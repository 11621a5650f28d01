//! Property suite run by `bcsgl prop-tests`, with fixed seeds.

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use bcsgl::bdg::{
    fiber_entropy, hermitian_eigen, hermitian_eigenvalues, hermiticity_defect, supercell_operator,
    trace_difference_per_unit_volume, BdgFields, FiberBasis, FiberSystem,
};
use bcsgl::coeffs::{b3_sech_form, compute_coefficients, GLCoefficients, GaussianProfile};
use bcsgl::gap::{find_tc, lowest_eigenpair, normalize, GapOperator, MomentumGrid, PotentialSpec};
use bcsgl::gl::{gauge_transform, gl_energy, GLProblem, TorusField, TorusVectorField};
use bcsgl::specfun::{
    divided_difference, entropy_inequality_margin, fermi_f_derivative, fermi_rho, g0, g1, g2,
    FermiFn, NodeList,
};

/// Deliberate defects used to check that the suite notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Fault {
    #[default]
    None,
    /// Replace `g1` by `-g1` wherever the suite consults it.
    G1SignFlip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropResult {
    pub module: String,
    pub property: String,
    pub cases: usize,
    pub passed: bool,
    /// Largest error, or smallest margin, over all cases.
    pub worst: f64,
    pub tolerance: f64,
    /// Inputs of the worst case.
    pub witness: String,
}

struct Check {
    module: &'static str,
    property: &'static str,
    cases: usize,
    worst: f64,
    witness: String,
    tolerance: f64,
    /// Failure when the worst value is above the tolerance, or below it for
    /// margins.
    margin: bool,
    error: Option<String>,
}

impl Check {
    fn new(module: &'static str, property: &'static str, tolerance: f64) -> Self {
        Check {
            module,
            property,
            cases: 0,
            worst: 0.0,
            witness: String::new(),
            tolerance,
            margin: false,
            error: None,
        }
    }

    fn margin(module: &'static str, property: &'static str, tolerance: f64) -> Self {
        Check {
            worst: f64::INFINITY,
            margin: true,
            ..Self::new(module, property, tolerance)
        }
    }

    fn record(&mut self, value: f64, witness: impl FnOnce() -> String) {
        self.cases += 1;
        let worse = if self.margin {
            !(value >= self.worst)
        } else {
            !(value <= self.worst)
        };
        if worse || self.cases == 1 {
            self.worst = value;
            self.witness = witness();
        }
    }

    fn fail(&mut self, msg: impl ToString) {
        self.error = Some(msg.to_string());
    }

    fn finish(self) -> PropResult {
        let ok = if self.margin {
            self.worst >= self.tolerance
        } else {
            self.worst <= self.tolerance
        };
        let witness = match &self.error {
            Some(e) => format!("error: {e}"),
            None => self.witness,
        };
        PropResult {
            module: self.module.into(),
            property: self.property.into(),
            cases: self.cases,
            passed: ok && self.error.is_none() && self.cases > 0,
            worst: self.worst,
            tolerance: self.tolerance,
            witness,
        }
    }
}

fn dd(f: FermiFn, nodes: &[f64]) -> f64 {
    divided_difference(f, &NodeList::new(nodes).expect("valid nodes"))
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// `[a₁, a₂, a₃]_f` as the integral of `f''` over the simplex.
fn feynman_oracle(a: [f64; 3], n: usize) -> f64 {
    let simpson = |g: &dyn Fn(f64) -> f64| {
        let h = 1.0 / n as f64;
        let mut s = g(0.0) + g(1.0);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        s * h / 3.0
    };
    simpson(&|u| {
        simpson(&|s| {
            let z = a[0] + u * (a[1] - a[0]) + (1.0 - u) * s * (a[2] - a[0]);
            (1.0 - u) * fermi_f_derivative(2, z)
        })
    })
}

fn specfun_props(seed: u64, fault: Fault, out: &mut Vec<PropResult>) {
    let g1 = |z: f64| match fault {
        Fault::None => g1(z),
        Fault::G1SignFlip => -g1(z),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut five = Check::new("specfun", "[a,a,a,-a,-a]_f = g1(a)/(16a)", 1e-9);
    let mut four = Check::new("specfun", "[a,a,a,-a]_f = g1(a)/8", 1e-9);
    let mut anti = Check::new("specfun", "[a,a,-a]_rho = -[a,-a,-a]_rho", 1e-9);
    for _ in 0..100 {
        let mut a: f64 = rng.gen_range(-8.0..8.0);
        while a.abs() < 1e-3 {
            a = rng.gen_range(-8.0..8.0);
        }
        let w = || format!("a = {a:.17e}");
        five.record(
            (dd(FermiFn::F, &[a, a, a, -a, -a]) - g1(a) / (16.0 * a)).abs(),
            w,
        );
        four.record((dd(FermiFn::F, &[a, a, a, -a]) - g1(a) / 8.0).abs(), w);
        anti.record(
            (dd(FermiFn::Rho, &[a, a, -a]) + dd(FermiFn::Rho, &[a, -a, -a])).abs(),
            w,
        );
    }
    out.extend([five.finish(), four.finish(), anti.finish()]);

    let mut d0 = Check::new("specfun", "g1 = -g0'", 1e-6);
    let mut d1 = Check::new("specfun", "g2 = g1' + 2 g1/z", 1e-6);
    let h = 1e-4;
    for i in 0..=2000 {
        let z = -10.0 + 0.01 * i as f64;
        if z.abs() < 0.05 {
            continue;
        }
        let dg0 = (g0(z + h) - g0(z - h)) / (2.0 * h);
        let dg1 = (g1(z + h) - g1(z - h)) / (2.0 * h);
        d0.record(rel(g1(z), -dg0), || format!("z = {z}"));
        d1.record(rel(g2(z), dg1 + 2.0 * g1(z) / z), || format!("z = {z}"));
    }
    out.extend([d0.finish(), d1.finish()]);

    let mut feyn = Check::new("specfun", "recursive [a1,a2,a3]_f = simplex integral", 1e-6);
    let mut perm = Check::new("specfun", "permutation symmetry", 1e-12);
    for _ in 0..20 {
        let a: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-8.0..8.0));
        if (a[0] - a[1]).abs() < 1e-2 || (a[0] - a[2]).abs() < 1e-2 || (a[1] - a[2]).abs() < 1e-2 {
            continue;
        }
        let exact = dd(FermiFn::F, &a);
        let oracle = feynman_oracle(a, 400);
        feyn.record((exact - oracle).abs() / oracle.abs().max(1e-2), || {
            format!("nodes {a:?}: {exact:e} vs {oracle:e}")
        });
        let nodes = [a[0], a[1], a[1], a[2], a[0]];
        let base = dd(FermiFn::F, &nodes);
        let other = dd(FermiFn::F, &[a[2], a[0], a[1], a[0], a[1]]);
        perm.record((base - other).abs() / base.abs().max(1.0), || {
            format!("nodes {nodes:?}")
        });
    }
    out.extend([feyn.finish(), perm.finish()]);

    // |[a, a, M]_f| (1 + M) stays within 1.5 times its value at M = 10
    let mut decay = Check::new("specfun", "|[a,a,M]_f|(1+M) bounded", 1.5);
    for a in [-2.0, 0.5, 3.0] {
        let scaled = |m: f64| dd(FermiFn::F, &[a, a, m]).abs() * (1.0 + m);
        let base = scaled(10.0);
        for m in [1e2, 1e3, 1e4] {
            decay.record(scaled(m) / base, || format!("a = {a}, M = {m}"));
        }
    }
    out.push(decay.finish());

    let mut klein = Check::margin(
        "specfun",
        "entropy inequality margin on 200x200 grid",
        -1e-12,
    );
    for i in 0..200 {
        for j in 0..200 {
            let x = 0.005 + 0.99 * i as f64 / 199.0;
            let y = 0.005 + 0.99 * j as f64 / 199.0;
            match entropy_inequality_margin(x, y) {
                Ok(m) => klein.record(m, || format!("x = {x}, y = {y}")),
                Err(e) => klein.fail(e),
            }
        }
    }
    out.push(klein.finish());
}

fn gap_props(out: &mut Vec<PropResult>) {
    let spec = PotentialSpec::gaussian_well(2.0, 1.0, 1.0, 1);
    let grid = MomentumGrid::default_for(&spec);

    let mut mono = Check::margin("gap_solver", "lambda_min(T) strictly increasing", 0.0);
    match GapOperator::new(&spec, &grid) {
        Ok(op) => {
            let mut prev: Option<(f64, f64)> = None;
            for i in 0..14 {
                let t = 0.2 + 0.1 * i as f64;
                match op.matrix(t).and_then(|m| lowest_eigenpair(&m)) {
                    Ok(e) => {
                        if let Some((tp, lp)) = prev {
                            mono.record(e.value - lp, || format!("T = {tp} -> {t}"));
                        }
                        prev = Some((t, e.value));
                    }
                    Err(e) => mono.fail(e),
                }
            }
        }
        Err(e) => mono.fail(e),
    }
    out.push(mono.finish());

    let mut even = Check::new("gap_solver", "t and alpha_hat even", 0.0);
    let mut norm_res = Check::new("gap_solver", "normalization residual", 1e-8);
    let mut coeff = Check::margin("gl_coeffs", "B1 > 0 and B3 > 0", f64::MIN_POSITIVE);
    let mut b3 = Check::new("gl_coeffs", "B3 forms agree", 1e-8);
    match find_tc(&spec, &grid) {
        Ok(sol) => {
            for p in [0.0, 0.3, 1.0, 1.7, 4.2] {
                let dev = (sol.t_at(p) - sol.t_at(-p))
                    .abs()
                    .max((sol.alpha_hat_at(p) - sol.alpha_hat_at(-p)).abs());
                even.record(dev, || format!("p = {p}"));
            }
            match normalize(&sol, 1.0) {
                Ok(norm) => {
                    norm_res.record(norm.normalization_residual().unwrap_or(f64::NAN), || {
                        "reference well, D = 1".into()
                    });
                    match compute_coefficients(&norm) {
                        Ok(k) => {
                            coeff.record(k.b1[0][0].min(k.b3), || {
                                format!("B1 = {}, B3 = {}", k.b1[0][0], k.b3)
                            });
                            match b3_sech_form(&norm) {
                                Ok(v) => b3.record(rel(v, k.b3), || format!("{v} vs {}", k.b3)),
                                Err(e) => b3.fail(e),
                            }
                        }
                        Err(e) => coeff.fail(e),
                    }
                }
                Err(e) => norm_res.fail(e),
            }
        }
        Err(e) => even.fail(e),
    }
    out.extend([
        even.finish(),
        norm_res.finish(),
        coeff.finish(),
        b3.finish(),
    ]);
}

fn random_complex(rng: &mut ChaCha8Rng, n_max: i64, amp: f64) -> TorusField {
    let modes: Vec<(Vec<i64>, Complex64)> = (-n_max..=n_max)
        .map(|n| {
            let a = amp * (-0.5 * n.abs() as f64).exp();
            (
                vec![n],
                Complex64::new(rng.gen_range(-a..a), rng.gen_range(-a..a)),
            )
        })
        .collect();
    TorusField::from_modes(1, &modes)
}

fn random_real(rng: &mut ChaCha8Rng, n_max: i64, amp: f64) -> TorusField {
    let mut modes = Vec::new();
    for n in 1..=n_max {
        let c = Complex64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp));
        modes.push((vec![n], c));
        modes.push((vec![-n], c.conj()));
    }
    TorusField::from_modes(1, &modes)
}

fn gl_props(seed: u64, out: &mut Vec<PropResult>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut grad = Check::new(
        "gl_minimizer",
        "gradient vs finite differences per term",
        1e-6,
    );
    let mut phase = Check::new("gl_minimizer", "global phase invariance", 1e-12);
    let mut gauge = Check::new("gl_minimizer", "gauge invariance", 1e-10);
    for case in 0..16 {
        let coef = GLCoefficients::scalar(
            rng.gen_range(0.05..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(0.05..1.0),
        );
        let a = TorusVectorField {
            components: vec![random_real(&mut rng, 1, 0.3)],
        };
        let w = random_real(&mut rng, 2, 0.5);
        let psi = random_complex(&mut rng, 3, 0.6).resized(4);
        let eta = random_complex(&mut rng, 3, 0.6).resized(4);
        let chi = random_real(&mut rng, 2, 0.2);
        let p = match GLProblem::new(&a, &w, &coef, 4, None) {
            Ok(p) => p,
            Err(e) => {
                grad.fail(e);
                continue;
            }
        };
        let eps = 1e-5;
        let terms = (
            p.terms(&psi),
            p.terms(&psi.axpy(Complex64::new(eps, 0.0), &eta)),
            p.terms(&psi.axpy(Complex64::new(-eps, 0.0), &eta)),
        );
        let (t, tp, tm) = match terms {
            (Ok(t), Ok(tp), Ok(tm)) => (t, tp, tm),
            _ => {
                grad.fail("energy evaluation failed");
                continue;
            }
        };
        for (name, diff, g) in [
            ("kinetic", tp.kinetic - tm.kinetic, &t.grad_kinetic),
            ("potential", tp.potential - tm.potential, &t.grad_potential),
            (
                "condensation",
                tp.condensation - tm.condensation,
                &t.grad_condensation,
            ),
        ] {
            let fd = diff / (2.0 * eps);
            let exact = 2.0 * eta.inner(g).re;
            grad.record((fd - exact).abs() / exact.abs().max(1e-2), || {
                format!("case {case}, {name}: {fd:e} vs {exact:e}")
            });
        }
        let e = t.energy();
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        match p.energy(&psi.scale(Complex64::from_polar(1.0, theta))) {
            Ok(r) => phase.record((r - e).abs() / e.abs().max(1.0), || {
                format!("case {case}, theta = {theta}")
            }),
            Err(err) => phase.fail(err),
        }
        match gauge_transform(&psi, &a, &chi).and_then(|(p2, a2)| gl_energy(&p2, &a2, &w, &coef)) {
            Ok(g) => gauge.record((g - e).abs() / e.abs().max(1.0), || {
                format!("case {case}: {g:e} vs {e:e}")
            }),
            Err(err) => gauge.fail(err),
        }
    }
    out.extend([grad.finish(), phase.finish(), gauge.finish()]);
}

fn bdg_props(seed: u64, out: &mut Vec<PropResult>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let profile = GaussianProfile::new(0.8, 1.3, 1.0, 1);
    let mut herm = Check::new("bdg_verifier", "fiber matrices Hermitian", 1e-13);
    let mut bounds = Check::new("bdg_verifier", "Gamma spectrum within [0, 1]", 1e-12);
    let mut entropy = Check::new("bdg_verifier", "entropy direct vs symmetric form", 1e-10);
    let mut shift = Check::new(
        "bdg_verifier",
        "trace difference invariant under shared diagonal shift",
        1e-10,
    );
    let mut supercell = Check::new("bdg_verifier", "fiber vs supercell spectra", 1e-8);
    for case in 0..6 {
        let fields = BdgFields::new(
            random_complex(&mut rng, 1, 0.8),
            TorusVectorField {
                components: vec![random_real(&mut rng, 1, 0.3)],
            },
            random_real(&mut rng, 1, 0.5),
        );
        let fields = match fields {
            Ok(f) => f,
            Err(e) => {
                herm.fail(e);
                continue;
            }
        };
        let h = rng.gen_range(0.2..0.6);
        let beta = rng.gen_range(0.5..4.0);
        let cells = 4;
        let basis = match FiberBasis::new(h, 5, cells) {
            Ok(b) => b,
            Err(e) => {
                herm.fail(e);
                continue;
            }
        };
        let sys = FiberSystem::unchecked(basis, &profile, fields);
        let mut fiber_spec = Vec::new();
        for &xi in &sys.basis.xi_nodes {
            let op = sys.build_fiber(xi);
            let m = op.assemble();
            herm.record(hermiticity_defect(&m), || format!("case {case}, xi = {xi}"));
            let Ok((vals, u)) = hermitian_eigen(&m, xi) else {
                herm.fail("eigensolver failed");
                continue;
            };
            let n = m.nrows();
            let scaled = Mat::from_fn(n, n, |i, k| u[(i, k)] * fermi_rho(beta * vals[k]));
            let gamma = &scaled * u.adjoint();
            if let Ok(g) = hermitian_eigenvalues(&gamma, xi) {
                let excess = g
                    .iter()
                    .map(|&v| (-v).max(v - 1.0).max(0.0))
                    .fold(0.0, f64::max);
                bounds.record(excess, || format!("case {case}, xi = {xi}, beta = {beta}"));
            }
            let (direct, symmetric) = fiber_entropy(&vals, beta);
            entropy.record((direct - symmetric).abs() / direct.abs().max(1.0), || {
                format!("case {case}, xi = {xi}")
            });
            fiber_spec.extend(vals);
        }
        fiber_spec.sort_by(f64::total_cmp);
        match hermitian_eigenvalues(&supercell_operator(&sys, cells, true), 0.0) {
            Ok(sup) => {
                let dev = sup
                    .iter()
                    .zip(&fiber_spec)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                supercell.record(dev, || format!("case {case}, h = {h}, {cells} cells"));
            }
            Err(e) => supercell.fail(e),
        }

        let diag: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let diff = |d: &[f64]| {
            trace_difference_per_unit_volume(
                &sys.basis.xi_nodes,
                |xi| {
                    let op = sys.build_fiber(xi);
                    let n = 2 * op.n();
                    let shift = Mat::from_fn(n, n, |i, j| {
                        Complex64::new(if i == j { d[i % d.len()] } else { 0.0 }, 0.0)
                    });
                    Ok((op.assemble() + &shift, op.assemble_free() + &shift))
                },
                |l| l,
            )
        };
        match (diff(&[0.0]), diff(&diag)) {
            (Ok(a), Ok(b)) => shift.record((a - b).abs() / a.abs().max(1.0), || {
                format!("case {case}, shift {diag:?}")
            }),
            (Err(e), _) | (_, Err(e)) => shift.fail(e),
        }
    }
    out.extend([
        herm.finish(),
        bounds.finish(),
        entropy.finish(),
        shift.finish(),
        supercell.finish(),
    ]);
}

/// Runs every property with seeds derived from `seed`.
pub fn prop_test_suite(seed: u64, fault: Fault) -> Vec<PropResult> {
    let mut out = Vec::new();
    specfun_props(seed, fault, &mut out);
    gap_props(&mut out);
    gl_props(seed, &mut out);
    bdg_props(seed, &mut out);
    out
}
