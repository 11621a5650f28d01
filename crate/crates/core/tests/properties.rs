use std::sync::OnceLock;

use faer::Mat;
use num_complex::Complex64;
use proptest::prelude::*;

use bcsgl::bdg::{
    fiber_alpha, fiber_entropy, hermitian_eigenvalues, hermiticity_defect,
    trace_difference_per_unit_volume, BdgFields, FiberBasis, FiberSystem,
};
use bcsgl::coeffs::{compute_coefficients, GLCoefficients, GaussianProfile};
use bcsgl::gap::{
    find_tc, lowest_eigenpair, normalize, GapOperator, GapSolution, MomentumGrid, PotentialSpec,
};
use bcsgl::gl::{gauge_transform, GLProblem, TorusField, TorusVectorField};
use bcsgl::specfun::{
    divided_difference, entropy_inequality_margin, fermi_f, fermi_f_derivative, g0, g1, g2,
    FermiFn, NodeList,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn dd(f: FermiFn, nodes: &[f64]) -> f64 {
    divided_difference(f, &NodeList::new(nodes).unwrap())
}

fn reference() -> &'static GapSolution {
    static SOL: OnceLock<GapSolution> = OnceLock::new();
    SOL.get_or_init(|| {
        let spec = PotentialSpec::gaussian_well(2.0, 1.0, 1.0, 1);
        find_tc(&spec, &MomentumGrid::default_for(&spec)).unwrap()
    })
}

/// `[a₁, a₂, a₃]_f = ∫_{simplex} f''`, by nested Simpson rules on the
/// triangle mapped to the unit square.
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

fn node() -> impl Strategy<Value = f64> {
    (-8.0..8.0f64).prop_filter("away from zero", |a| a.abs() >= 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn confluent_identities(a in node()) {
        prop_assert!((dd(FermiFn::F, &[a, a, a, -a, -a]) - g1(a) / (16.0 * a)).abs() < 1e-9);
        prop_assert!((dd(FermiFn::F, &[a, a, a, -a]) - g1(a) / 8.0).abs() < 1e-9);
        prop_assert!((dd(FermiFn::Rho, &[a, a, -a]) + dd(FermiFn::Rho, &[a, -a, -a])).abs() < 1e-9);
    }

    #[test]
    fn permutation_symmetry(
        mut nodes in prop::collection::vec(-10.0..10.0f64, 1..=6),
        repeat in 0usize..3,
        rot in 0usize..6,
    ) {
        for i in 0..repeat.min(nodes.len() - 1) {
            nodes[i + 1] = nodes[0];
        }
        for f in [FermiFn::F, FermiFn::Rho] {
            let base = dd(f, &nodes);
            let mut perm = nodes.clone();
            perm.rotate_left(rot % nodes.len());
            perm.reverse();
            let other = dd(f, &perm);
            prop_assert!((base - other).abs() <= 1e-12 * base.abs().max(1.0), "{base} vs {other}");
        }
    }

    #[test]
    fn g_functions_match_central_differences(
        z in (-10.0..10.0f64).prop_filter("away from zero", |z| z.abs() >= 0.05)
    ) {
        let h = 1e-4;
        let dg0 = (g0(z + h) - g0(z - h)) / (2.0 * h);
        let dg1 = (g1(z + h) - g1(z - h)) / (2.0 * h);
        prop_assert!(((g1(z) + dg0) / g1(z)).abs() < 1e-6);
        let rhs = dg1 + 2.0 * g1(z) / z;
        prop_assert!(((g2(z) - rhs) / g2(z)).abs() < 1e-6);
    }

    #[test]
    fn klein_margin_is_nonnegative(x in 0.005..0.995f64, y in 0.005..0.995f64) {
        prop_assert!(entropy_inequality_margin(x, y).unwrap() >= -1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn recursive_matches_feynman_formula(
        a in -8.0..8.0f64,
        b in -8.0..8.0f64,
        d in -8.0..8.0f64,
    ) {
        prop_assume!((a - b).abs() > 1e-2 && (a - d).abs() > 1e-2 && (b - d).abs() > 1e-2);
        let exact = dd(FermiFn::F, &[a, b, d]);
        let oracle = feynman_oracle([a, b, d], 400);
        prop_assert!((exact - oracle).abs() <= 1e-6 * oracle.abs().max(1e-2), "{exact} vs {oracle}");
    }
}

#[test]
fn three_point_difference_decays_like_inverse_m() {
    for a in [-2.0, 0.5, 3.0] {
        let scaled = |m: f64| dd(FermiFn::F, &[a, a, m]).abs() * (1.0 + m);
        let bound = 1.5 * scaled(10.0);
        for m in [1e2, 1e3, 1e4] {
            assert!(scaled(m) <= bound, "a = {a}, M = {m}");
        }
    }
}

#[test]
fn fermi_f_limits() {
    assert!(fermi_f(40.0).abs() < 1e-17);
    assert!((fermi_f(-40.0) + 40.0).abs() < 1e-15);
}

#[test]
fn lowest_gap_eigenvalue_increases_with_temperature() {
    let spec = PotentialSpec::gaussian_well(2.0, 1.0, 1.0, 1);
    let op = GapOperator::new(&spec, &MomentumGrid::default_for(&spec)).unwrap();
    let lambdas: Vec<f64> = (0..14)
        .map(|i| {
            let t = 0.2 + 0.1 * i as f64;
            lowest_eigenpair(&op.matrix(t).unwrap()).unwrap().value
        })
        .collect();
    assert!(lambdas.windows(2).all(|w| w[1] > w[0]), "{lambdas:?}");
    assert!(lambdas[0] < 0.0 && *lambdas.last().unwrap() > 0.0);
}

#[test]
fn t_and_alpha_hat_are_even() {
    let sol = reference();
    for p in [0.0, 0.3, 1.0, 1.7, 4.2] {
        assert_eq!(sol.t_at(p), sol.t_at(-p));
        assert_eq!(sol.alpha_hat_at(p), sol.alpha_hat_at(-p));
        assert!(sol.t_at(p).is_finite());
    }
}

#[test]
fn coefficients_stable_under_grid_doubling() {
    let sol = reference();
    let fine = find_tc(&sol.spec, &sol.grid.doubled()).unwrap();
    assert!(((fine.t_c - sol.t_c) / sol.t_c).abs() < 1e-4);
    let k0 = compute_coefficients(&normalize(sol, 1.0).unwrap()).unwrap();
    let k1 = compute_coefficients(&normalize(&fine, 1.0).unwrap()).unwrap();
    for (a, b) in [(k0.b1[0][0], k1.b1[0][0]), (k0.b2, k1.b2), (k0.b3, k1.b3)] {
        assert!(((a - b) / a).abs() < 1e-5, "{a} vs {b}");
    }
}

fn real_field(coeffs: &[(f64, f64)]) -> TorusField {
    let mut modes = Vec::new();
    for (k, &(re, im)) in coeffs.iter().enumerate() {
        let n = k as i64 + 1;
        modes.push((vec![n], c(re, im)));
        modes.push((vec![-n], c(re, -im)));
    }
    TorusField::from_modes(1, &modes)
}

fn complex_field(coeffs: &[(f64, f64)]) -> TorusField {
    let half = coeffs.len() as i64 / 2;
    let modes: Vec<(Vec<i64>, Complex64)> = coeffs
        .iter()
        .enumerate()
        .map(|(k, &(re, im))| (vec![k as i64 - half], c(re, im)))
        .collect();
    TorusField::from_modes(1, &modes)
}

fn pairs(n: usize, amp: f64) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-amp..amp, -amp..amp), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gl_gradient_and_invariances(
        psi in pairs(5, 0.6),
        eta in pairs(5, 0.6),
        a in pairs(1, 0.4),
        w in pairs(2, 0.6),
        chi in pairs(2, 0.3),
        b in (0.05..1.0f64, -1.0..1.0f64, 0.05..1.0f64),
        theta in 0.0..std::f64::consts::TAU,
    ) {
        let coef = GLCoefficients::scalar(b.0, b.1, b.2);
        let a = TorusVectorField { components: vec![real_field(&a)] };
        let w = real_field(&w);
        let psi = complex_field(&psi).resized(4);
        let eta = complex_field(&eta).resized(4);
        let p = GLProblem::new(&a, &w, &coef, 4, None).unwrap();

        let eps = 1e-5;
        let t = p.terms(&psi).unwrap();
        let tp = p.terms(&psi.axpy(c(eps, 0.0), &eta)).unwrap();
        let tm = p.terms(&psi.axpy(c(-eps, 0.0), &eta)).unwrap();
        for (diff, g) in [
            (tp.kinetic - tm.kinetic, &t.grad_kinetic),
            (tp.potential - tm.potential, &t.grad_potential),
            (tp.condensation - tm.condensation, &t.grad_condensation),
        ] {
            let fd = diff / (2.0 * eps);
            let exact = 2.0 * eta.inner(g).re;
            prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-2), "{fd} vs {exact}");
        }

        let e = t.energy();
        prop_assert!(e.is_finite());
        let rotated = p.energy(&psi.scale(Complex64::from_polar(1.0, theta))).unwrap();
        prop_assert!((rotated - e).abs() <= 1e-12 * e.abs().max(1.0));

        let (psi2, a2) = gauge_transform(&psi, &a, &real_field(&chi)).unwrap();
        let e2 = bcsgl::gl::gl_energy(&psi2, &a2, &w, &coef).unwrap();
        prop_assert!((e2 - e).abs() <= 1e-10 * e.abs().max(1.0), "{e2} vs {e}");
    }
}

fn bdg_profile() -> GaussianProfile {
    GaussianProfile::new(0.8, 1.3, 1.0, 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fibers_are_hermitian_and_gamma_is_a_projection_bound(
        psi in pairs(3, 0.8),
        a in pairs(1, 0.4),
        w in pairs(1, 0.6),
        h in 0.2..0.6f64,
        xi in 0.0..std::f64::consts::TAU,
        beta in 0.5..4.0f64,
    ) {
        let profile = bdg_profile();
        let fields = BdgFields::new(
            complex_field(&psi),
            TorusVectorField { components: vec![real_field(&a)] },
            real_field(&w),
        ).unwrap();
        let basis = FiberBasis::new(h, 6, 4).unwrap();
        let sys = FiberSystem::unchecked(basis, &profile, fields);
        let op = sys.build_fiber(xi);
        let hm = op.assemble();
        prop_assert!(hermiticity_defect(&hm) < 1e-13);

        // Γ = ρ(βH) has spectrum in [0, 1]
        let (_, vals) = fiber_alpha(&op, beta).unwrap();
        let (_, u) = bcsgl::bdg::hermitian_eigen(&hm, xi).unwrap();
        let n = hm.nrows();
        let rho: Vec<f64> = vals.iter().map(|&l| bcsgl::specfun::fermi_rho(beta * l)).collect();
        let scaled = Mat::from_fn(n, n, |i, k| u[(i, k)] * rho[k]);
        let gamma = &scaled * u.adjoint();
        let gvals = hermitian_eigenvalues(&gamma, xi).unwrap();
        prop_assert!(gvals.iter().all(|&g| (-1e-12..=1.0 + 1e-12).contains(&g)));

        let (direct, symmetric) = fiber_entropy(&vals, beta);
        prop_assert!((direct - symmetric).abs() <= 1e-10 * direct.abs().max(1.0));
    }

    #[test]
    fn trace_difference_ignores_shared_diagonal_shift(
        psi in pairs(3, 0.8),
        shift in prop::collection::vec(-1.0..1.0f64, 1..4),
    ) {
        let profile = bdg_profile();
        let fields = BdgFields::new(
            complex_field(&psi),
            TorusVectorField::zeros(1),
            TorusField::zeros(1, 0),
        ).unwrap();
        let basis = FiberBasis::new(0.4, 5, 3).unwrap();
        let sys = FiberSystem::unchecked(basis, &profile, fields);
        let nodes = sys.basis.xi_nodes.clone();
        let pair = |d: &[f64]| {
            trace_difference_per_unit_volume(
                &nodes,
                |xi| {
                    let op = sys.build_fiber(xi);
                    let n = 2 * op.n();
                    let diag = Mat::from_fn(n, n, |i, j| {
                        if i == j { c(d[i % d.len()], 0.0) } else { c(0.0, 0.0) }
                    });
                    Ok((op.assemble() + &diag, op.assemble_free() + &diag))
                },
                |l| l,
            )
            .unwrap()
        };
        let base = pair(&[0.0]);
        let shifted = pair(&shift);
        prop_assert!((base - shifted).abs() <= 1e-10 * base.abs().max(1.0), "{base} vs {shifted}");

        let same = trace_difference_per_unit_volume(
            &nodes,
            |xi| {
                let m = sys.build_fiber(xi).assemble();
                Ok((m.clone(), m))
            },
            fermi_f,
        )
        .unwrap();
        prop_assert_eq!(same, 0.0);
    }
}
