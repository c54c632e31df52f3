//! Embedding-constant estimates against an independent dense route, frozen
//! regression values, and the discrete embedding inequalities.

mod common;

use fracp::space::{
    estimate_c, estimate_cq, lq_norm, norm_w, sup_norm, AscentConfig, DiscreteFunction,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// frozen after the first verified run (ascent vs dense agreement 3e-12)
const REG_C_N16: f64 = 1.081619821193;
const REG_C_N32: f64 = 1.082836492501;
const REG_C1_N32: f64 = 1.0;
const REG_C4_N32: f64 = 1.0;

#[test]
fn sup_constant_matches_dense_route_and_regression() {
    let r = common::reference_params(0.8, 2.0, 32, 3.0, 6, 8);
    let cfg = AscentConfig::with_seed(7);
    let (c, converged) = estimate_c(&r.mesh, &r.coeff, &r.table, &r.params, &cfg).unwrap();
    assert!(converged);
    // lower bound from the constant-one candidate
    assert!(c * c * r.coeff.l1_norm() >= 1.0 - 1e-9);
    // independent algebraic route at p = 2
    let dense = common::dense_embedding_c(&r);
    assert!(
        ((c - dense) / dense).abs() < 1e-6,
        "ascent {c} vs dense {dense}"
    );
    assert!(((c - REG_C_N32) / REG_C_N32).abs() < 1e-4);
}

#[test]
fn sup_constant_never_decreases_under_refinement() {
    let cfg = AscentConfig::with_seed(7);
    let r16 = common::reference_params(0.8, 2.0, 16, 3.0, 6, 8);
    let r32 = common::reference_params(0.8, 2.0, 32, 3.0, 6, 8);
    let (c16, _) = estimate_c(&r16.mesh, &r16.coeff, &r16.table, &r16.params, &cfg).unwrap();
    let (c32, _) = estimate_c(&r32.mesh, &r32.coeff, &r32.table, &r32.params, &cfg).unwrap();
    assert!(((c16 - REG_C_N16) / REG_C_N16).abs() < 1e-4);
    assert!(c32 >= c16 - 1e-9, "c16 = {c16}, c32 = {c32}");
}

#[test]
fn sup_embedding_dominates_random_functions() {
    let r = common::reference_params(0.8, 2.0, 16, 3.0, 6, 8);
    let cfg = AscentConfig::with_seed(7);
    let (c, _) = estimate_c(&r.mesh, &r.coeff, &r.table, &r.params, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..100 {
        let u = DiscreteFunction::new(
            r.mesh.clone(),
            (0..r.mesh.node_count())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap();
        let lhs = sup_norm(&u);
        let rhs = c * norm_w(&u, &r.coeff, &r.table, &r.params).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-7), "{lhs} vs {rhs}");
    }
}

#[test]
fn lq_constants_regression_and_bounds() {
    let r = common::reference(32, 3.0, 6, 8);
    let cfg = AscentConfig::with_seed(11);
    let (c1, _) = estimate_cq(&r.mesh, &r.coeff, &r.table, &r.params, 1.0, &cfg).unwrap();
    let (c4, _) = estimate_cq(&r.mesh, &r.coeff, &r.table, &r.params, 4.0, &cfg).unwrap();
    // candidate bound at u ≡ 1: c1 ≥ |Ω| ‖a‖^{-1/p}
    let lower = r.mesh.omega_measure() / r.coeff.l1_norm().sqrt();
    assert!(c1 >= lower - 1e-9);
    // Hölder on the unit-measure domain
    assert!(c1 <= c4 + 1e-9);
    assert!(((c1 - REG_C1_N32) / REG_C1_N32).abs() < 1e-4);
    assert!(((c4 - REG_C4_N32) / REG_C4_N32).abs() < 1e-4);
    // stability across a different seed
    let cfg2 = AscentConfig::with_seed(12);
    let (c4b, _) = estimate_cq(&r.mesh, &r.coeff, &r.table, &r.params, 4.0, &cfg2).unwrap();
    assert!((c4 - c4b).abs() < 1e-4);
}

#[test]
fn lq_embedding_dominates_random_functions() {
    let r = common::reference(16, 3.0, 4, 4);
    let cfg = AscentConfig {
        starts: 12,
        max_iters: 2000,
        grad_tol: 1e-9,
        seed: 11,
    };
    let (c4, _) = estimate_cq(&r.mesh, &r.coeff, &r.table, &r.params, 4.0, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for _ in 0..100 {
        let u = DiscreteFunction::new(
            r.mesh.clone(),
            (0..r.mesh.node_count())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap();
        let lhs = lq_norm(&u, 4.0);
        let rhs = c4 * norm_w(&u, &r.coeff, &r.table, &r.params).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-6), "{lhs} vs {rhs}");
    }
}

#[test]
fn lq_constants_never_decrease_under_refinement() {
    let cfg = AscentConfig {
        starts: 12,
        max_iters: 3000,
        grad_tol: 1e-9,
        seed: 11,
    };
    let r16 = common::reference(16, 3.0, 4, 4);
    let r32 = common::reference(32, 3.0, 4, 4);
    let (a, _) = estimate_cq(&r16.mesh, &r16.coeff, &r16.table, &r16.params, 4.0, &cfg).unwrap();
    let (b, _) = estimate_cq(&r32.mesh, &r32.coeff, &r32.table, &r32.params, 4.0, &cfg).unwrap();
    assert!(b >= a - 1e-9, "c4(16) = {a}, c4(32) = {b}");
}
