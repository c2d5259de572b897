//! The one-shot identity suite behind `steklov check`.
//!
//! Every check generates its own seeded fixtures, evaluates one identity or
//! cross-oracle, and reports a pass/fail line with the observed residual.

use num_complex::Complex64;
use steklov::dtn::{
    d_matrix, f0_matrix, h_matrix, lambda_a, lambda_matrix, mult_operator, p0_matrix,
    smoothing_difference, spectrum,
};
use steklov::fixtures::{random_direction, random_factor, trivial_factor};
use steklov::flow::quadratic_form_b;
use steklov::zeta::{
    gamma_factor, kogan_zeta_minus1, power_via_eigendecomposition, power_via_resolvent,
    riemann_zeta, trace_functional_from_parts, zeta_diff, zeta_invariant_algebraic,
};
use steklov::TrigPoly;

pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub struct CheckContext {
    pub seed: u64,
    /// Test hook: perturb the Λ matrix to demonstrate the failure path.
    pub corrupt_lambda: bool,
}

type Check = fn(&CheckContext) -> CheckOutcome;

pub const CHECK_NAMES: [&str; 12] = [
    "hilbert_involution",
    "lambda_factors_hd",
    "product_formula",
    "commutator_averaging_form",
    "commutator_weighted_form",
    "lambda_a_kernel_projector",
    "kogan_vs_spectral",
    "algebraic_vs_spectral",
    "trace_sign_pattern",
    "quadratic_form_pinned",
    "riemann_zeta_anchors",
    "resolvent_vs_eigendecomposition",
];

pub fn all_checks() -> Vec<(&'static str, Check)> {
    vec![
        ("hilbert_involution", check_hilbert_involution),
        ("lambda_factors_hd", check_lambda_factors_hd),
        ("product_formula", check_product_formula),
        ("commutator_averaging_form", check_commutator_averaging),
        ("commutator_weighted_form", check_commutator_weighted),
        ("lambda_a_kernel_projector", check_lambda_a_kernel),
        ("kogan_vs_spectral", check_kogan_vs_spectral),
        ("algebraic_vs_spectral", check_algebraic_vs_spectral),
        ("trace_sign_pattern", check_trace_signs),
        ("quadratic_form_pinned", check_quadratic_form_pinned),
        ("riemann_zeta_anchors", check_riemann_anchors),
        ("resolvent_vs_eigendecomposition", check_resolvent),
    ]
}

fn outcome(name: &'static str, residual: f64, tol: f64) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: residual < tol,
        detail: format!("residual {residual:.3e}, tolerance {tol:.1e}"),
    }
}

fn test_function(seed: u64) -> TrigPoly {
    random_direction(seed, 6).add(&TrigPoly::constant(0.8))
}

fn check_hilbert_involution(ctx: &CheckContext) -> CheckOutcome {
    let f = test_function(ctx.seed);
    let hh = f.hilbert().hilbert();
    let expect = f.sub(&TrigPoly::constant(f.coeff(0).re));
    let residual = hh.sub(&expect).sup_norm(64).max(f.hilbert().coeff(0).norm());
    outcome("hilbert_involution", residual, 1e-12)
}

fn check_lambda_factors_hd(ctx: &CheckContext) -> CheckOutcome {
    let n = 16;
    let mut lam = lambda_matrix(n);
    if ctx.corrupt_lambda {
        let mut entries = lam.entries().clone();
        entries[(3, 3)] += Complex64::new(1e-3, 0.0);
        lam = steklov::dtn::TruncatedOperator::from_entries(n, entries, true);
    }
    let residual = lam
        .sub(&h_matrix(n).matmul(&d_matrix(n)))
        .max_entry()
        .max(lam.sub(&d_matrix(n).matmul(&h_matrix(n))).max_entry());
    outcome("lambda_factors_hd", residual, 1e-12)
}

fn check_product_formula(ctx: &CheckContext) -> CheckOutcome {
    let mut worst = 0.0f64;
    for offset in 0..4 {
        let u = test_function(ctx.seed + offset);
        let v = test_function(ctx.seed + 50 + offset);
        let lhs = u.multiply(&v).add(&u.hilbert().multiply(&v.hilbert())).hilbert();
        let rhs = u.multiply(&v.hilbert()).add(&v.multiply(&u.hilbert()));
        worst = worst.max(lhs.sub(&rhs).sup_norm(128));
    }
    outcome("product_formula", worst, 1e-10)
}

fn check_commutator_averaging(ctx: &CheckContext) -> CheckOutcome {
    let n = 24;
    let f = test_function(ctx.seed + 100);
    let margin = n - f.degree() - 2;
    let h = h_matrix(n);
    let mf = mult_operator(&f, n);
    let mhf = mult_operator(&f.hilbert(), n);
    let f0 = f0_matrix(n);
    let lhs = h.matmul(&mhf).sub(&mhf.matmul(&h));
    let rhs = h
        .matmul(&h.matmul(&mf).sub(&mf.matmul(&h)))
        .add(&f0.matmul(&mf))
        .sub(&f0.scale(f.coeff(0)));
    outcome("commutator_averaging_form", lhs.sub(&rhs).interior_max(margin), 1e-9)
}

fn check_commutator_weighted(ctx: &CheckContext) -> CheckOutcome {
    let n = 24;
    let f = test_function(ctx.seed + 200);
    let margin = n - f.degree() - 2;
    let h = h_matrix(n);
    let lam = lambda_matrix(n);
    let d = d_matrix(n);
    let mf = mult_operator(&f, n);
    let mhf = mult_operator(&f.hilbert(), n);
    let lhs = lam.matmul(&h.matmul(&mhf).sub(&mhf.matmul(&h))).matmul(&lam);
    let rhs = lam.matmul(&mf).matmul(&lam).sub(&d.matmul(&mf).matmul(&d));
    outcome("commutator_weighted_form", lhs.sub(&rhs).interior_max(margin), 1e-9)
}

fn check_lambda_a_kernel(ctx: &CheckContext) -> CheckOutcome {
    let n = 32;
    let a = random_factor(ctx.seed, 5);
    let la = lambda_a(&a, n).expect("factor is positive");
    let p0 = p0_matrix(&a, n).expect("factor is positive");
    let margin = n - a.series().degree() - 2;
    let idempotency = p0.matmul(&p0).sub(&p0).max_entry();
    let annihilation = la.matmul(&p0).interior_max(margin);
    outcome("lambda_a_kernel_projector", idempotency.max(annihilation), 1e-8)
}

fn check_kogan_vs_spectral(ctx: &CheckContext) -> CheckOutcome {
    let a = random_factor(ctx.seed + 1, 6);
    let spectral = zeta_diff(&a, -1.0, 64).expect("spectrum").zeta_a.unwrap();
    let closed = kogan_zeta_minus1(&a).expect("positive factor");
    outcome("kogan_vs_spectral", (spectral - closed).abs(), 1e-5)
}

fn check_algebraic_vs_spectral(ctx: &CheckContext) -> CheckOutcome {
    let a = random_factor(ctx.seed + 2, 4);
    let mut worst = 0.0f64;
    for m in 1..=2usize {
        let spectral = zeta_diff(&a, -2.0 * m as f64, 64).expect("spectrum").zeta_a.unwrap();
        let algebraic = zeta_invariant_algebraic(&a, m).expect("within budget");
        worst = worst.max((spectral - algebraic).abs());
    }
    outcome("algebraic_vs_spectral", worst, 1e-5)
}

fn check_trace_signs(ctx: &CheckContext) -> CheckOutcome {
    let n = 48;
    let a = random_factor(ctx.seed + 3, 6);
    let spec = spectrum(&a, n).expect("spectrum");
    let delta = smoothing_difference(&a, n).expect("positive factor");
    let mut violation = 0.0f64;
    for s in [0.5, 1.0, 2.0, 3.0] {
        violation = violation.max(-trace_functional_from_parts(&spec, &delta, s).value);
    }
    for s in [-3.0, -2.0, -1.0, -0.5] {
        violation = violation.max(trace_functional_from_parts(&spec, &delta, s).value);
    }
    let trivial = trivial_factor(ctx.seed + 4);
    let spec = spectrum(&trivial, n).expect("spectrum");
    let delta = smoothing_difference(&trivial, n).expect("positive factor");
    for s in [-2.0, 0.5, 2.0] {
        violation = violation.max(trace_functional_from_parts(&spec, &delta, s).value.abs() / 10.0);
    }
    outcome("trace_sign_pattern", violation, 1e-8)
}

fn check_quadratic_form_pinned(_ctx: &CheckContext) -> CheckOutcome {
    let b = TrigPoly::constant(1.0).add(&TrigPoly::cosine(1, 1.0));
    let expect = TrigPoly::constant(-1.0).add(&TrigPoly::cosine(1, -1.0));
    let residual = quadratic_form_b(&b).sub(&expect).sup_norm(32);
    outcome("quadratic_form_pinned", residual, 1e-12)
}

fn check_riemann_anchors(_ctx: &CheckContext) -> CheckOutcome {
    let mut worst = (riemann_zeta(0.0).unwrap() + 0.5).abs();
    worst = worst.max((riemann_zeta(-1.0).unwrap() + 1.0 / 12.0).abs());
    worst = worst.max(riemann_zeta(-2.0).unwrap().abs());
    worst = worst.max((riemann_zeta(2.0).unwrap() - std::f64::consts::PI.powi(2) / 6.0).abs());
    outcome("riemann_zeta_anchors", worst, 1e-12)
}

fn check_resolvent(ctx: &CheckContext) -> CheckOutcome {
    let a = random_factor(ctx.seed + 5, 4);
    let n = 12;
    let mut worst = (gamma_factor(0.5) - 1.0 / std::f64::consts::PI).abs() * 1e6;
    for z in [0.3, 0.5] {
        let quad = power_via_resolvent(&a, z, n, 160, None).expect("quadrature");
        let eig = power_via_eigendecomposition(&a, z, n).expect("spectrum");
        worst = worst.max(quad.sub(&eig).max_entry());
    }
    outcome("resolvent_vs_eigendecomposition", worst, 1e-6)
}

/// Runs the full suite; returns `true` iff everything passed.
pub fn run_all(ctx: &CheckContext, quiet: bool) -> bool {
    let mut all_passed = true;
    for (_, check) in all_checks() {
        let result = check(ctx);
        if !quiet || !result.passed {
            println!(
                "{} {} ({})",
                if result.passed { "PASS" } else { "FAIL" },
                result.name,
                result.detail
            );
        }
        all_passed &= result.passed;
    }
    all_passed
}
