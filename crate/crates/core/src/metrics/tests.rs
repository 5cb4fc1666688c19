use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::quadrature::integrate;

fn reference_model() -> DynamicsModel {
    DynamicsModel::new(
        1,
        2.0,
        Drift::linear(1.0, 1.0),
        Interaction::new(KernelKind::Sine, 1e-3),
    )
    .unwrap()
}

fn reference_levy() -> LevyModel {
    LevyModel::bounded_stable_like(0.5, 1.0, 0.5, 1e-3).unwrap()
}

fn reference() -> &'static ConstantsReport {
    static REPORT: OnceLock<ConstantsReport> = OnceLock::new();
    REPORT.get_or_init(|| derive_constants(&reference_model(), &reference_levy(), 8.0).unwrap())
}

// Values from a sweep over 10^6 directions (v, w) = (cos t, sin t).
const ORACLE_EPS_SMALL: f64 = 0.343_000_442_081_250_9;
const ORACLE_EPS_BAR: f64 = 0.316_227_766_017_351_2;
const ORACLE_D_GAMMA: f64 = 4.883_131_382_339_458;
const ORACLE_R1: f64 = 9.766_262_764_678_917;

#[test]
fn distance_examples() {
    assert_eq!(r_s(&[0.0], &[0.0], 0.5, 2.0), 0.0);
    assert!((r_s(&[1.0], &[-2.0], 0.5, 2.0) - 0.5).abs() < 1e-15);
    assert!((r_s(&[0.0], &[1.0], 0.5, 2.0) - 0.5).abs() < 1e-15);
    let c = reference();
    assert_eq!(c.r_l(&[0.0], &[0.0]), 0.0);
    assert!((c.r_l(&[1.0], &[0.0]) - 0.28125f64.sqrt()).abs() < 1e-15);
    assert!((c.r_l(&[0.0], &[1.0]) - 0.5).abs() < 1e-15);
}

#[test]
fn closed_form_constants() {
    let c = reference();
    assert!((c.tau - 0.125).abs() < 1e-12);
    assert!((c.alpha - 0.5).abs() < 1e-12);
    assert!((c.script_r - 3.0).abs() < 1e-12);
    assert!((c.a - 0.28125).abs() < 1e-12);
    assert!((c.b - 0.375).abs() < 1e-12);
    assert!((c.c - 0.25).abs() < 1e-12);
    assert!((c.c2_local - 0.125).abs() < 1e-12);
}

#[test]
fn searched_constants_match_direction_oracle() {
    let c = reference();
    assert!((c.eps_small - ORACLE_EPS_SMALL).abs() < 1e-4);
    assert!((c.eps_bar - ORACLE_EPS_BAR).abs() < 1e-4);
    assert!((c.d_gamma - ORACLE_D_GAMMA).abs() < 1e-4);
    assert!((c.r1 - ORACLE_R1).abs() < 1e-4);
    assert!(c.d_gamma <= c.r1 && c.r1 <= 2.0 * c.d_gamma * (1.0 + 1e-9));
    // the aligned direction (1, -2) realises the infimum; refinement stops at 1e-6 in angle
    let aligned = 0.5 / (0.28125f64 - 0.75 + 1.0).sqrt();
    assert!((c.inf_rs_over_rl - aligned).abs() < 1e-6);
}

#[test]
fn comparison_constants_hold_on_random_directions() {
    let c = reference();
    let c0 = c.sup_rs_over_rl.max(1.0 / c.eps_bar);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100_000 {
        let v = [rng.gen_range(-1.0..1.0)];
        let w = [rng.gen_range(-1.0..1.0)];
        let (rs, rl) = (c.r_s(&v, &w), c.r_l(&v, &w));
        assert!(2.0 * c.eps_small * rl <= rs * (1.0 + 1e-12));
        assert!(c.eps_bar * rs <= rl * (1.0 + 1e-12));
        assert!(rl / c0 <= rs * (1.0 + 1e-12) && rs <= c0 * rl * (1.0 + 1e-12));
        let t = rng.gen_range(0.01..100.0);
        let (tv, tw) = ([t * v[0]], [t * w[0]]);
        assert!((c.r_s(&tv, &tw) - t * rs).abs() <= 1e-12 * t * rs.max(1e-300) + 1e-300);
        assert!((c.r_l(&tv, &tw) - t * rl).abs() <= 1e-12 * t * rl.max(1e-300) + 1e-300);
    }
}

#[test]
fn prefactor_identity_is_exact() {
    let c = reference();
    assert_eq!(c.c1.exponent, -c.m1.exponent);
    let ratio = c.m2 / c.m1.mantissa;
    assert!((c.c1.mantissa / ratio - 1.0).abs() < 1e-12);
    assert!((c.c1.ln() - (c.m2.ln() - c.m1.ln())).abs() < 1e-9);
}

#[test]
fn tail_constants_are_consistent() {
    let c = reference();
    assert!((c.cap_lambda_1 - c.g_eval(c.r1)).abs() < 1e-9 * c.cap_lambda_1);
    assert!((c.cap_lambda_2 - c.g_eval(2.0 * c.r1)).abs() < 1e-9 * c.cap_lambda_2);
    assert!((c.cap_lambda_2 / c.cap_lambda_1 - 2f64.sqrt()).abs() < 1e-12);
    assert!(c.lambda.mantissa > 0.0);
    assert!(c.lambda.ln() <= c.c1_local.ln() + 1e-9 || c.lambda.exponent == -c.cap_lambda_2);
    assert!(!c.interaction_within_threshold);
    assert_eq!(c.lambda_sensitivity.len(), 5);
    let mid = c.lambda_sensitivity.iter().find(|p| p.k0 == 8.0).unwrap();
    assert_eq!(mid.ln_lambda, c.lambda.ln());
}

#[test]
fn g_matches_quadrature_of_reciprocal_envelope() {
    let c = reference();
    let m = 1.0 + c.k0 * c.alpha;
    let beta = c.sigma_beta;
    let sigma = |s: f64| c.sigma_c1 * s.powf(1.0 - beta);
    // s = u^4 keeps the integrand smooth at 0
    let q = integrate(
        |u: f64| {
            if u == 0.0 {
                0.0
            } else {
                4.0 * u.powi(3) / sigma(u.powi(4) / m)
            }
        },
        0.0,
        c.r1.powf(0.25),
        &[],
        1e-10,
    )
    .unwrap();
    let g = 2.0 * c.alpha * c.gamma * m * q;
    assert!((g - c.g_eval(c.r1)).abs() <= 1e-8 * g);
    assert_eq!(c.g_eval(0.0), 0.0);
    let (a, b, d) = (c.g_eval(1.0), c.g_eval(2.0), c.g_eval(3.0));
    assert!(a < b && b < d && b - a > d - b);
}

#[test]
fn friction_violation_is_reported() {
    let weak = DynamicsModel::new(
        1,
        2.0,
        Drift::ClippedDoubleWell {
            clip: 1.0,
            l_b: 1.0,
            theta: 0.3,
            r0: 1.0,
        },
        Interaction::zero(),
    )
    .unwrap();
    assert!(matches!(
        derive_constants(&weak, &reference_levy(), 8.0),
        Err(Error::FrictionCondition { .. })
    ));
    assert!(derive_constants(&reference_model(), &reference_levy(), 4.0).is_err());
}

#[test]
fn unit_clip_radius_has_no_envelope() {
    let levy = LevyModel::bounded_stable_like(0.5, 1.0, 1.0, 1e-3).unwrap();
    assert!(matches!(
        derive_constants(&reference_model(), &levy, 8.0),
        Err(Error::EnvelopeInfeasible { .. })
    ));
}

#[test]
fn pipeline_is_deterministic_and_round_trips() {
    let a = reference().clone();
    let b = derive_constants(&reference_model(), &reference_levy(), 8.0).unwrap();
    assert_eq!(a, b);
    let json = serde_json::to_string(&a).unwrap();
    let back: ConstantsReport = serde_json::from_str(&json).unwrap();
    assert_eq!(a, back);
}

#[test]
fn moment_bound_reference_and_monotonicity() {
    let model = reference_model();
    let levy = reference_levy();
    let mb = moment_bound(&model, &levy, 0.125, 0.0);
    // 0.75/2 * 2 * 1 + (4/3)/4, then / (τγ) and * 8 / (1 - 2τ)^2
    let c_tilde = 0.75 + 1.0 / 3.0;
    assert!((mb.c_tilde - c_tilde).abs() < 1e-12);
    assert!((mb.c3 - 8.0 * c_tilde / 0.25 / 0.5625).abs() < 1e-10);

    let declared = |theta: f64| {
        DynamicsModel::new(
            1,
            2.0,
            Drift::ClippedDoubleWell {
                clip: 1.0,
                l_b: 1.0,
                theta,
                r0: 1.0,
            },
            Interaction::zero(),
        )
        .unwrap()
    };
    let m1 = declared(1.0);
    let m2 = declared(1.2);
    let (t1, t2) = (tau(&m1), tau(&m2));
    assert_eq!(t1, t2); // τ saturates at 1/8 for both
    assert!(moment_bound(&m2, &levy, t2, 1.0).c3 > moment_bound(&m1, &levy, t1, 1.0).c3);
    let (lo1, lo2) = (declared(0.5), declared(0.6));
    assert!(tau(&lo2) > tau(&lo1));
    assert!(
        moment_bound(&lo2, &levy, tau(&lo2), 1.0).c3 < moment_bound(&lo1, &levy, tau(&lo1), 1.0).c3
    );
}

#[test]
fn rho_metric_basics() {
    let c = reference();
    assert_eq!(c.rho_metric(&[0.3, -0.2], &[0.3, -0.2]), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let p: Vec<f64> = (0..2).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let q: Vec<f64> = (0..2).map(|_| rng.gen_range(-5.0..5.0)).collect();
        assert_eq!(c.rho_metric(&p, &q), c.rho_metric(&q, &p));
    }
    // refined region: ρ = ψ(r_s)
    let (v, w) = ([0.2], [0.1]);
    assert_eq!(c.rho_deviation(&v, &w, 0.0), c.psi_eval(c.r_s(&v, &w)));
    // outside: ψ(D_Γ + ϵ r_l)
    let (v, w) = ([40.0], [0.0]);
    assert!(!c.in_refined_region(&v, &w, 0.0));
    let expect = c.psi_eval(c.d_gamma + c.eps_small * c.r_l(&v, &w));
    assert_eq!(c.rho_deviation(&v, &w, 0.0), expect);
}

#[test]
fn metric_equivalence_over_many_scales() {
    let c = reference();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..10_000 {
        let scale = 10f64.powf(rng.gen_range(-10.0..2.0));
        let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let q = [
            p[0] + scale * rng.gen_range(-1.0..1.0),
            p[1] + scale * rng.gen_range(-1.0..1.0),
        ];
        let e = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        let rho = c.rho_metric(&p, &q);
        assert!(rho <= c.m2 * e * (1.0 + 1e-12));
        assert!(c.m1.ln() + e.ln() <= rho.ln());
    }
}

#[test]
fn particle_averages() {
    let c = reference();
    let s1 = [0.1, 0.2, -0.3, 0.5];
    let s2 = [0.0, 0.1, 0.4, 0.5];
    assert_eq!(
        c.rho_n(&s1[..2], &s2[..2]).unwrap(),
        c.rho_metric(&s1[..2], &s2[..2])
    );
    let l1 = l1_n(&s1, &s2, 2).unwrap();
    let rho = c.rho_n(&s1, &s2).unwrap();
    assert!(rho <= c.m2 * l1 && c.m1.ln() + l1.ln() <= rho.ln());
    let p1 = [-0.3, 0.5, 0.1, 0.2];
    let p2 = [0.4, 0.5, 0.0, 0.1];
    assert_eq!(l1_n(&p1, &p2, 2).unwrap(), l1);
    assert!((c.rho_n(&p1, &p2).unwrap() - rho).abs() < 1e-24);
    assert!(matches!(
        l1_n(&s1, &s2[..2], 2),
        Err(Error::LengthMismatch { .. })
    ));
}

#[test]
fn scaled_deviation_matches_absolute_form() {
    let c = reference();
    let (v, w) = ([0.8], [-0.3]);
    for ln_s in [-2.0, -0.5, 0.0, 1.0] {
        let s = f64::exp(ln_s);
        let abs = c.rho_deviation(&[s * v[0]], &[s * w[0]], 0.0);
        let scaled = c.rho_deviation(&v, &w, ln_s) * s;
        assert!((abs - scaled).abs() <= 1e-12 * abs);
    }
    // deep tangent limit: ρ/s → r_s
    assert!((c.rho_deviation(&v, &w, -4.0e4) - c.r_s(&v, &w)).abs() < 1e-12);
}

fn psi_sample() -> impl Strategy<Value = f64> {
    prop_oneof![(-14.0f64..1.3).prop_map(|e| 10f64.powf(e)), 0.0f64..25.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn psi_sandwich(r in psi_sample()) {
        let c = reference();
        let v = c.psi_eval(r);
        prop_assert!(v <= r * (1.0 + 1e-12));
        prop_assert!(c.psi_prime(2.0 * c.r1) * r <= v * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn psi_concave(r in psi_sample(), frac in 0.0f64..1.0) {
        let c = reference();
        let d = frac * r;
        let lhs = c.psi_eval(r + d) + c.psi_eval(r - d) - 2.0 * c.psi_eval(r);
        prop_assert!(lhs <= 1e-9 * c.psi_eval(r + d));
    }

    #[test]
    fn psi_second_difference(r in psi_sample(), frac in 0.0f64..1.0) {
        let c = reference();
        prop_assume!(r > 0.0 && r <= c.r1);
        let d = frac * r;
        let lhs = c.psi_eval(r + d) + c.psi_eval(r - d) - 2.0 * c.psi_eval(r);
        let rhs = c.psi.second(r) * d * d;
        prop_assert!(lhs - rhs <= 1e-9 * c.psi_eval(r + d), "r={} d={} lhs={} rhs={}", r, d, lhs, rhs);
    }
}
