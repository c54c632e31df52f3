//! End-to-end certificates on the reference instance, dual-implementation
//! checks of the interval formulas, and cross-consistency between the
//! product-form certificate and the Lebesgue certificate at ε = 1.

mod common;

use fracp::certify::{
    case2_constants, certify_example31, corollary31, interval_case2, CaseIIInputs,
};
use fracp::model::{rho_lower_bound, Example31Spec};
use fracp::space::{estimate_cq, AscentConfig};

// frozen after the first verified run at n = 32, seed 11
const REG_RHO_MIN: f64 = 2.197368226936;
const REG_INTERVAL: (f64, f64) = (0.2849399214593064, 0.41421356237302825);
const REG_ALT_LOWER: f64 = 0.20105857372930322;

struct Pipeline {
    r: common::Reference,
    c1: f64,
    c4: f64,
    rho: f64,
}

fn pipeline() -> Pipeline {
    let r = common::reference(32, 3.0, 6, 8);
    let cfg = AscentConfig::with_seed(11);
    let (c1, _) = estimate_cq(&r.mesh, &r.coeff, &r.table, &r.params, 1.0, &cfg).unwrap();
    let (c4, _) = estimate_cq(&r.mesh, &r.coeff, &r.table, &r.params, 4.0, &cfg).unwrap();
    let (kappa, l1, l2) = case2_constants(2.0, 4.0, r.coeff.l1_norm(), c1, c4);
    let rho = rho_lower_bound(kappa, 4.0, 2.0, l1, l2, r.mesh.omega_measure()) + 0.1;
    Pipeline { r, c1, c4, rho }
}

#[test]
fn reference_instance_certificate_is_nonempty_and_frozen() {
    let p = pipeline();
    assert!(((p.rho - 0.1 - REG_RHO_MIN) / REG_RHO_MIN).abs() < 1e-6);
    let spec = Example31Spec { q: 4.0, rho: p.rho };
    let cert = certify_example31(&spec, p.c1, p.c4, &p.r.coeff, &p.r.mesh, &p.r.params).unwrap();
    assert!(cert.all_pass());
    let (lo, hi) = cert.interval.expect("interval must be certified");
    assert!(lo < hi);
    assert!(((lo - REG_INTERVAL.0) / REG_INTERVAL.0).abs() < 1e-6);
    assert!(((hi - REG_INTERVAL.1) / REG_INTERVAL.1).abs() < 1e-6);
    let (alt_lo, alt_hi) = cert.alt_interval.expect("as-stated variant");
    assert!(((alt_lo - REG_ALT_LOWER) / REG_ALT_LOWER).abs() < 1e-6);
    assert_eq!(hi, alt_hi);
    // the as-stated lower endpoint sits below the corollary-derived one here
    assert!(alt_lo < lo);
    // the chain inequality holds at the chosen rho
    let chain = cert
        .hypotheses
        .iter()
        .find(|h| h.name == "rho_chain")
        .unwrap();
    assert!(chain.pass);
}

#[test]
fn certificate_rejects_rho_below_threshold() {
    let p = pipeline();
    let spec = Example31Spec {
        q: 4.0,
        rho: p.rho - 0.2,
    };
    assert!(matches!(
        certify_example31(&spec, p.c1, p.c4, &p.r.coeff, &p.r.mesh, &p.r.params),
        Err(fracp::Error::Hypothesis(_))
    ));
}

#[test]
fn interval_endpoints_match_a_dual_implementation() {
    let p = pipeline();
    let spec = Example31Spec { q: 4.0, rho: p.rho };
    let cert = certify_example31(&spec, p.c1, p.c4, &p.r.coeff, &p.r.mesh, &p.r.params).unwrap();
    let (lo, hi) = cert.interval.unwrap();
    let (alt_lo, _) = cert.alt_interval.unwrap();

    // recompute every endpoint from scratch with permuted arithmetic
    let a_l1 = p.r.coeff.l1_norm();
    let omega = p.r.mesh.omega_measure();
    let (_, l1, l2) = case2_constants(2.0, 4.0, a_l1, p.c1, p.c4);
    let nl = spec.nonlinearity().unwrap();
    let psi_rho = nl.psi(p.rho);
    let psi_int = nl.primitive(p.rho).unwrap();

    let lo2 = (p.rho * p.rho / 2.0) * (a_l1 / omega) / psi_int;
    let hi2 = (a_l1 / 2.0) * (1.0 / (l1 + l2));
    let alt2 = (p.rho * p.rho / 2.0) * (a_l1 / omega) / psi_rho;
    assert!(((lo - lo2) / lo).abs() < 1e-14);
    assert!(((hi - hi2) / hi).abs() < 1e-14);
    assert!(((alt_lo - alt2) / alt_lo).abs() < 1e-14);
}

#[test]
fn corollary_reduces_to_the_lebesgue_certificate_at_unit_epsilon() {
    let p = pipeline();
    let spec = Example31Spec { q: 4.0, rho: p.rho };
    let nl = spec.nonlinearity().unwrap();

    let corollary = corollary31(
        &nl, p.rho, 0.5, p.c1, p.c4, &p.r.coeff, &p.r.mesh, &p.r.params,
    )
    .unwrap();
    let (clo, chi) = corollary.interval.expect("corollary certifies");

    // with φ ≡ 1 the growth constants are unscaled and ε = 1 gives the same
    // endpoints through the Lebesgue route; a bounded primitive satisfies
    // the linear-growth envelope with a scanned constant
    let b = {
        let mut worst = 0.0f64;
        for k in 0..20_000 {
            let xi = -40.0 + 80.0 * k as f64 / 19_999.0;
            let h = nl.primitive(xi).unwrap();
            worst = worst.max(h / (1.0 + xi.abs()));
        }
        worst * (1.0 + 1e-9)
    };
    let inputs = CaseIIInputs {
        epsilon: 1.0,
        delta: p.rho,
        b,
        t_exp: 1.0,
    };
    let case2 = interval_case2(
        &inputs, p.c1, p.c4, &p.r.coeff, &nl, &p.r.mesh, &p.r.params, 40.0,
    )
    .unwrap();
    assert!(case2.all_pass(), "{:?}", case2.hypotheses);
    let (lo, hi) = case2.interval.expect("interval");
    assert!(((lo - clo) / lo).abs() < 1e-12, "{lo} vs {clo}");
    assert!(((hi - chi) / hi).abs() < 1e-12, "{hi} vs {chi}");
}

#[test]
fn case2_interval_scales_with_epsilon_as_the_formula_says() {
    let p = pipeline();
    let nl = common::capped_power(p.rho);
    for &eps in &[0.8, 1.0, 1.2] {
        let inputs = CaseIIInputs {
            epsilon: eps,
            delta: p.rho,
            b: 25.0,
            t_exp: 1.0,
        };
        let cert = interval_case2(
            &inputs, p.c1, p.c4, &p.r.coeff, &nl, &p.r.mesh, &p.r.params, 40.0,
        )
        .unwrap();
        if let Some((lo, hi)) = cert.interval {
            assert!(lo < hi);
            // dual implementation of the two closed forms
            let a_l1 = p.r.coeff.l1_norm();
            let (_, l1, l2) = case2_constants(2.0, 4.0, a_l1, p.c1, p.c4);
            let h_delta = cert.constant("h_integral_delta").unwrap();
            let lo2 = (p.rho * p.rho) / 2.0 * (a_l1 / h_delta);
            let hi2 = a_l1 / 2.0 / (l1 / eps + l2 * eps * eps);
            assert!(((lo - lo2) / lo).abs() < 1e-14);
            assert!(((hi - hi2) / hi).abs() < 1e-14);
        }
    }
}
