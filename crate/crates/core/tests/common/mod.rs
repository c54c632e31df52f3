//! Shared oracles for the integration suites. Everything here recomputes
//! quantities through routes independent of the library's assembly path:
//! plain Riemann summation, dense linear algebra, and closed forms.

#![allow(dead_code)]

use std::sync::Arc;

use fracp::kernel::{assemble_table, QuadratureTable};
use fracp::mesh::{build_mesh, Domain, FracParams, Mesh};
use fracp::model::{Coefficient, Example31Spec, Nonlinearity};
use fracp::solve::Instance;

/// Evaluates a piecewise-linear interpolant through (ticks, values) at `x`,
/// clamped to the end values; written independently of the library's own
/// interpolation.
pub fn interp1(ticks: &[f64], values: &[f64], x: f64) -> f64 {
    if x <= ticks[0] {
        return values[0];
    }
    if x >= *ticks.last().unwrap() {
        return *values.last().unwrap();
    }
    let mut lo = 0;
    let mut hi = ticks.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ticks[mid] <= x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = (x - ticks[lo]) / (ticks[hi] - ticks[lo]);
    values[lo] * (1.0 - t) + values[hi] * t
}

/// Direct double Riemann sum of `½ ∬ |u(x)−u(y)|^p |x−y|^{−1−sp}` over the
/// admissible pairs of the computational box (both-exterior pairs excluded),
/// with the diagonal strip `|x−y| < strip` excluded from the sum and added
/// back from the local slope. Exact-slope strips make this sharp for
/// globally smooth `u`; for kinked interpolants it is first-order at the
/// kinks.
pub struct RiemannSpec {
    pub box_lo: f64,
    pub box_hi: f64,
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub s: f64,
    pub p: f64,
}

pub fn riemann_seminorm(spec: &RiemannSpec, u: &dyn Fn(f64) -> f64, cells_per_unit: usize) -> f64 {
    let sp = spec.s * spec.p;
    let wx = 1.0 / cells_per_unit as f64;
    // grid aligned with ∂Ω: cells never straddle the domain boundary
    let seg = |lo: f64, hi: f64| ((hi - lo) / wx).round().max(1.0) as usize;
    let mut mids: Vec<(f64, bool)> = Vec::new();
    for (lo, hi, inside) in [
        (spec.box_lo, spec.omega_lo, false),
        (spec.omega_lo, spec.omega_hi, true),
        (spec.omega_hi, spec.box_hi, false),
    ] {
        let m = seg(lo, hi);
        let w = (hi - lo) / m as f64;
        for k in 0..m {
            mids.push((lo + (k as f64 + 0.5) * w, inside));
        }
    }
    let kernel = |z: f64| z.abs().powf(-(1.0 + sp));

    // own-cell z-extent: excluded from the sum, added back analytically
    let strip = wx / 2.0;
    let mut total = 0.0f64;
    for (i, &(x, x_in)) in mids.iter().enumerate() {
        let mut row = 0.0f64;
        for (j, &(y, y_in)) in mids.iter().enumerate() {
            if i == j || (!x_in && !y_in) {
                continue;
            }
            row += (u(x) - u(y)).abs().powf(spec.p) * kernel(y - x) * wx;
        }
        total += row * wx;
        // diagonal strip from the local slope
        if x_in {
            let d = wx / 4.0;
            let slope = (u(x + d) - u(x - d)) / (2.0 * d);
            total += wx * slope.abs().powf(spec.p) * 2.0 * strip.powf(spec.p - sp) / (spec.p - sp);
        }
    }
    0.5 * total
}

/// Refines the Riemann seminorm until two successive doublings agree to
/// `rtol`, returning the finest value.
pub fn riemann_seminorm_refined(
    spec: &RiemannSpec,
    u: &dyn Fn(f64) -> f64,
    start_cells: usize,
    rtol: f64,
) -> f64 {
    let mut cells = start_cells;
    let mut prev = riemann_seminorm(spec, u, cells);
    for _ in 0..4 {
        cells *= 2;
        let next = riemann_seminorm(spec, u, cells);
        if ((next - prev) / next).abs() < rtol {
            return next;
        }
        prev = next;
    }
    prev
}

/// Symmetric principal-value Riemann sum for the pointwise operator at `x`:
/// mirrored midpoint samples in the radial coordinate from `cutoff` outward,
/// clipped to the box.
pub fn riemann_pv_at(
    ticks: &[f64],
    values: &[f64],
    x: f64,
    s: f64,
    p: f64,
    cutoff: f64,
    cells: usize,
) -> f64 {
    let sp = s * p;
    let lo = ticks[0];
    let hi = *ticks.last().unwrap();
    let r_max = (x - lo).max(hi - x);
    let wt = (r_max - cutoff) / cells as f64;
    let ux = interp1(ticks, values, x);
    let flux = |d: f64| {
        if d == 0.0 {
            0.0
        } else {
            d.abs().powf(p - 1.0) * d.signum()
        }
    };
    let mut acc = 0.0;
    for k in 0..cells {
        let t = cutoff + (k as f64 + 0.5) * wt;
        let kern = t.powf(-(1.0 + sp));
        let mut v = 0.0;
        if x + t <= hi {
            v += flux(ux - interp1(ticks, values, x + t));
        }
        if x - t >= lo {
            v += flux(ux - interp1(ticks, values, x - t));
        }
        acc += wt * kern * v;
    }
    acc
}

/// Reference instance (unit interval, unit weight, capped-power profile) at a
/// given resolution, truncation radius and quadrature order/depth.
pub struct Reference {
    pub mesh: Arc<Mesh<f64>>,
    pub params: FracParams<f64>,
    pub table: QuadratureTable<f64>,
    pub coeff: Coefficient<f64>,
}

pub fn reference(n: usize, r_ext: f64, order: usize, depth: usize) -> Reference {
    let params = FracParams::new(1, 0.5, 2.0).unwrap();
    let mesh = Arc::new(build_mesh(Domain::Interval { a: 0.0, b: 1.0 }, n, r_ext).unwrap());
    let table = assemble_table(&mesh, &params, order, depth).unwrap();
    let coeff = Coefficient::constant(&mesh, 1.0).unwrap();
    Reference {
        mesh,
        params,
        table,
        coeff,
    }
}

pub fn reference_params(s: f64, p: f64, n: usize, r_ext: f64, order: usize, depth: usize) -> Reference {
    let params = FracParams::new(1, s, p).unwrap();
    let mesh = Arc::new(build_mesh(Domain::Interval { a: 0.0, b: 1.0 }, n, r_ext).unwrap());
    let table = assemble_table(&mesh, &params, order, depth).unwrap();
    let coeff = Coefficient::constant(&mesh, 1.0).unwrap();
    Reference {
        mesh,
        params,
        table,
        coeff,
    }
}

pub fn reference_instance(n: usize, r_ext: f64, order: usize, depth: usize, rho: f64) -> Instance<f64> {
    let r = reference(n, r_ext, order, depth);
    let nl = Example31Spec { q: 4.0, rho }.nonlinearity().unwrap();
    Instance::build(r.mesh, r.params, r.table, r.coeff, nl).unwrap()
}

/// Dense sup-norm embedding constant at p = 2 through an independent
/// algebraic route: `c² = max_i (A^{-1})_{ii}` over the interior nodes,
/// where `A` is the norm's quadratic form.
pub fn dense_embedding_c(reference: &Reference) -> f64 {
    let assembly = fracp::space::NormAssembly::build(
        &reference.mesh,
        &reference.table,
        &reference.coeff,
        &reference.params,
    )
    .unwrap();
    let mat = assembly
        .quadratic_matrix()
        .expect("dense route requires p = 2");
    let n = mat.dim();
    let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = mat.get(i, j);
        }
    }
    let lu = a.lu();
    let mut best: f64 = 0.0;
    for i in reference.mesh.interior_nodes() {
        let mut e = nalgebra::DVector::<f64>::zeros(n);
        e[i] = 1.0;
        let col = lu.solve(&e).expect("norm matrix is positive definite");
        best = best.max(col[i]);
    }
    best.sqrt()
}

/// Nonlinearity for the reference instance.
pub fn capped_power(rho: f64) -> Nonlinearity<f64> {
    Example31Spec { q: 4.0, rho }.nonlinearity().unwrap()
}
