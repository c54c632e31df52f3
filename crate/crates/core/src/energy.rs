//! The energy functionals, their first variations, the weak-solution
//! residual, and the pointwise nonlocal operators used as diagnostics.

use crate::error::{Error, Result};
use crate::kernel::{gauss_legendre, QuadratureTable};
use crate::mesh::{nodes_per_element, shape_values, FracParams, Mesh};
use crate::model::{Coefficient, Nonlinearity};
use crate::real::{real, CompensatedSum, Real};
use crate::space::{
    p_flux, potential_p, potential_p_gradient, seminorm_p, seminorm_p_gradient, DiscreteFunction,
};

/// Slice of the energy at one point: `J = T − λ·S` with
/// `T = (seminorm part + potential part)/p`.
#[derive(Clone, Copy, Debug)]
pub struct EnergyBreakdown<T> {
    pub seminorm_part: T,
    pub potential_part: T,
    pub t_value: T,
    pub s_value: T,
    pub lambda: T,
    pub j_value: T,
}

/// `T(u) = ‖u‖^p / p`.
pub fn t_energy<T: Real>(
    u: &DiscreteFunction<T>,
    a: &Coefficient<T>,
    table: &QuadratureTable<T>,
    params: &FracParams<T>,
) -> Result<T> {
    let p = params.p();
    Ok((seminorm_p(u, table, params)? + potential_p(u, a, p)) / p)
}

/// `S(u) = ∫_Ω H(x, u(x)) dx`, by per-element Gauss quadrature on the
/// interpolated `u`.
pub fn s_energy<T: Real>(u: &DiscreteFunction<T>, nl: &Nonlinearity<T>) -> Result<T> {
    let mesh = u.mesh();
    let dim = mesh.dim();
    let npe = nodes_per_element(dim);
    let rule = gauss_legendre::<T>(6);
    let mut acc = CompensatedSum::new();
    for elem in mesh.interior_elements() {
        let mut pts = Vec::new();
        if dim == 1 {
            let h = elem.size(0);
            for (&t, &w) in rule.nodes.iter().zip(rule.weights.iter()) {
                pts.push(([(t + T::one()) * real(0.5), T::zero()], w * real(0.5) * h));
            }
        } else {
            let (hx, hy) = (elem.size(0), elem.size(1));
            for (&tx, &wx) in rule.nodes.iter().zip(rule.weights.iter()) {
                for (&ty, &wy) in rule.nodes.iter().zip(rule.weights.iter()) {
                    pts.push((
                        [(tx + T::one()) * real(0.5), (ty + T::one()) * real(0.5)],
                        wx * wy * real::<T>(0.25) * hx * hy,
                    ));
                }
            }
        }
        for (local, jw) in pts {
            let shape = shape_values(dim, local);
            let mut uv = T::zero();
            let mut phi = T::zero();
            for k in 0..npe {
                uv += shape[k] * u.values()[elem.nodes[k]];
                phi += shape[k] * nl.spatial_at(elem.nodes[k]);
            }
            acc.add(jw * phi * nl.primitive(uv)?);
        }
    }
    Ok(acc.value())
}

/// Entries of the first variation of `T` against the nodal test functions.
pub fn gradient_t<T: Real>(
    u: &DiscreteFunction<T>,
    a: &Coefficient<T>,
    table: &QuadratureTable<T>,
    params: &FracParams<T>,
) -> Result<Vec<T>> {
    let p = params.p();
    if p < real(1.1) {
        return Err(Error::InvalidInput(
            "gradient assembly requires p >= 1.1".into(),
        ));
    }
    let mut g = seminorm_p_gradient(u, table, params)?;
    let pot = potential_p_gradient(u, a, p);
    for (gi, pi) in g.iter_mut().zip(pot.iter()) {
        *gi = (*gi + *pi) / p;
    }
    Ok(g)
}

/// Entries of the first variation of `S`: `∫_Ω h(x, u) φ_i`.
pub fn gradient_s<T: Real>(u: &DiscreteFunction<T>, nl: &Nonlinearity<T>) -> Result<Vec<T>> {
    let mesh = u.mesh();
    let dim = mesh.dim();
    let npe = nodes_per_element(dim);
    let rule = gauss_legendre::<T>(6);
    let mut grad = vec![T::zero(); u.values().len()];
    for elem in mesh.interior_elements() {
        let mut pts = Vec::new();
        if dim == 1 {
            let h = elem.size(0);
            for (&t, &w) in rule.nodes.iter().zip(rule.weights.iter()) {
                pts.push(([(t + T::one()) * real(0.5), T::zero()], w * real(0.5) * h));
            }
        } else {
            let (hx, hy) = (elem.size(0), elem.size(1));
            for (&tx, &wx) in rule.nodes.iter().zip(rule.weights.iter()) {
                for (&ty, &wy) in rule.nodes.iter().zip(rule.weights.iter()) {
                    pts.push((
                        [(tx + T::one()) * real(0.5), (ty + T::one()) * real(0.5)],
                        wx * wy * real::<T>(0.25) * hx * hy,
                    ));
                }
            }
        }
        for (local, jw) in pts {
            let shape = shape_values(dim, local);
            let mut uv = T::zero();
            let mut phi = T::zero();
            for k in 0..npe {
                uv += shape[k] * u.values()[elem.nodes[k]];
                phi += shape[k] * nl.spatial_at(elem.nodes[k]);
            }
            let hv = phi * nl.psi(uv);
            for k in 0..npe {
                grad[elem.nodes[k]] += jw * hv * shape[k];
            }
        }
    }
    Ok(grad)
}

pub fn energy_breakdown<T: Real>(
    u: &DiscreteFunction<T>,
    a: &Coefficient<T>,
    nl: &Nonlinearity<T>,
    lambda: T,
    table: &QuadratureTable<T>,
    params: &FracParams<T>,
) -> Result<EnergyBreakdown<T>> {
    let p = params.p();
    let semi = seminorm_p(u, table, params)?;
    let pot = potential_p(u, a, p);
    let t = (semi + pot) / p;
    let s = s_energy(u, nl)?;
    Ok(EnergyBreakdown {
        seminorm_part: semi,
        potential_part: pot,
        t_value: t,
        s_value: s,
        lambda,
        j_value: t - lambda * s,
    })
}

/// Dual norm of `T'(u) − λ S'(u)` over the nodal test functions:
/// `max_i |r_i| / ‖φ_i‖`. Values at or below a solver tolerance identify a
/// discrete weak solution.
pub fn weak_residual<T: Real>(
    u: &DiscreteFunction<T>,
    a: &Coefficient<T>,
    nl: &Nonlinearity<T>,
    lambda: T,
    table: &QuadratureTable<T>,
    params: &FracParams<T>,
    phi_norms: &[T],
) -> Result<T> {
    let gt = gradient_t(u, a, table, params)?;
    let gs = gradient_s(u, nl)?;
    let mut m = T::zero();
    for i in 0..gt.len() {
        let r = gt[i] - lambda * gs[i];
        if phi_norms[i] > T::zero() {
            m = m.max(r.abs() / phi_norms[i]);
        }
    }
    Ok(m)
}

/// `(T'(u) − T'(v))(u − v)`; nonnegative by monotonicity of the p-flux.
pub fn monotonicity_gap<T: Real>(
    u: &DiscreteFunction<T>,
    v: &DiscreteFunction<T>,
    a: &Coefficient<T>,
    table: &QuadratureTable<T>,
    params: &FracParams<T>,
) -> Result<T> {
    let gu = gradient_t(u, a, table, params)?;
    let gv = gradient_t(v, a, table, params)?;
    let mut acc = CompensatedSum::new();
    for i in 0..gu.len() {
        acc.add((gu[i] - gv[i]) * (u.values()[i] - v.values()[i]));
    }
    Ok(acc.value())
}

/// Inner-cutoff and extent controls for the principal-value shell quadrature.
/// Pointwise values at kinks of the interpolant depend on the cutoff, which
/// is why it is an explicit argument rather than a hidden default.
#[derive(Clone, Copy, Debug)]
pub struct ShellConfig<T> {
    pub cutoff: T,
    pub order: usize,
}

impl<T: Real> ShellConfig<T> {
    pub fn with_cutoff(cutoff: T) -> Self {
        Self { cutoff, order: 6 }
    }
}

/// Pointwise fractional p-Laplacian at an interior node by symmetric-shell
/// principal-value quadrature over the computational box (1D meshes).
/// Diagnostic only; the solver never calls this.
pub fn frac_p_laplacian_at<T: Real>(
    u: &DiscreteFunction<T>,
    node: usize,
    params: &FracParams<T>,
    shells: &ShellConfig<T>,
) -> Result<T> {
    let mesh = u.mesh();
    if mesh.dim() != 1 {
        return Err(Error::InvalidInput(
            "pointwise evaluation is implemented for 1D meshes".into(),
        ));
    }
    if !mesh.is_interior_node(node) {
        return Err(Error::InvalidInput("evaluation point must be interior".into()));
    }
    let x = mesh.nodes()[node][0];
    let ticks = &mesh.axes()[0].ticks;
    let lo = ticks[0];
    let hi = *ticks.last().unwrap();
    let r_left = x - lo;
    let r_right = hi - x;
    let r_max = r_left.max(r_right);
    if !(shells.cutoff > T::zero() && shells.cutoff < r_max) {
        return Err(Error::InvalidInput("shell cutoff out of range".into()));
    }

    // radial breakpoints: dyadic ladder plus every |tick − x|, so each Gauss
    // panel sees a smooth integrand and mirrored samples stay paired
    let mut breaks: Vec<T> = Vec::new();
    let mut r = shells.cutoff;
    while r < r_max {
        breaks.push(r);
        r = r * real(2.0);
    }
    for &t in ticks.iter() {
        let d = (t - x).abs();
        if d > shells.cutoff && d < r_max {
            breaks.push(d);
        }
    }
    breaks.push(r_max);
    breaks.sort_by(|p, q| p.partial_cmp(q).unwrap());
    breaks.dedup_by(|p, q| ((*p - *q).abs() / r_max) < real(1e-14));

    let ke = params.kernel_exponent();
    let p = params.p();
    let ux = eval_1d(mesh, u.values(), x);
    let rule = gauss_legendre::<T>(shells.order);
    let mut acc = CompensatedSum::new();
    for win in breaks.windows(2) {
        let (t0, t1) = (win[0], win[1]);
        for (t, w) in rule.mapped(t0, t1) {
            let kern = t.powf(-ke);
            let mut val = T::zero();
            if t <= r_right {
                val += p_flux(ux - eval_1d(mesh, u.values(), x + t), p);
            }
            if t <= r_left {
                val += p_flux(ux - eval_1d(mesh, u.values(), x - t), p);
            }
            acc.add(w * kern * val);
        }
    }
    Ok(acc.value())
}

fn eval_1d<T: Real>(mesh: &Mesh<T>, values: &[T], x: T) -> T {
    let ticks = &mesh.axes()[0].ticks;
    // clamp to the box, then locate by binary search
    if x <= ticks[0] {
        return values[0];
    }
    if x >= *ticks.last().unwrap() {
        return values[values.len() - 1];
    }
    let mut lo = 0usize;
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
    values[lo] * (T::one() - t) + values[hi] * t
}

/// Nonlocal Neumann derivative at an exterior node: the kernel-weighted
/// p-difference integrated over the interior elements only.
pub fn neumann_derivative_at<T: Real>(
    u: &DiscreteFunction<T>,
    node: usize,
    params: &FracParams<T>,
    order: usize,
) -> Result<T> {
    let mesh = u.mesh();
    if mesh.is_interior_node(node) {
        return Err(Error::InvalidInput(
            "the nonlocal Neumann derivative is evaluated at exterior points".into(),
        ));
    }
    let dim = mesh.dim();
    let npe = nodes_per_element(dim);
    let x = mesh.nodes()[node];
    let ux = u.values()[node];
    let ke = params.kernel_exponent();
    let p = params.p();
    let rule = gauss_legendre::<T>(order);
    let mut acc = CompensatedSum::new();
    for elem in mesh.interior_elements() {
        let mut pts = Vec::new();
        if dim == 1 {
            let h = elem.size(0);
            for (&t, &w) in rule.nodes.iter().zip(rule.weights.iter()) {
                pts.push(([(t + T::one()) * real(0.5), T::zero()], w * real(0.5) * h));
            }
        } else {
            let (hx, hy) = (elem.size(0), elem.size(1));
            for (&tx, &wx) in rule.nodes.iter().zip(rule.weights.iter()) {
                for (&ty, &wy) in rule.nodes.iter().zip(rule.weights.iter()) {
                    pts.push((
                        [(tx + T::one()) * real(0.5), (ty + T::one()) * real(0.5)],
                        wx * wy * real::<T>(0.25) * hx * hy,
                    ));
                }
            }
        }
        for (local, jw) in pts {
            let shape = shape_values(dim, local);
            let mut uv = T::zero();
            let mut dist2 = T::zero();
            for k in 0..npe {
                uv += shape[k] * u.values()[elem.nodes[k]];
            }
            for axis in 0..dim {
                let y = elem.lo[axis] + local[axis] * elem.size(axis);
                dist2 += (x[axis] - y) * (x[axis] - y);
            }
            acc.add(jw * dist2.sqrt().powf(-ke) * p_flux(ux - uv, p));
        }
    }
    Ok(acc.value())
}

/// Max of `|N u|` over all exterior nodes.
pub fn neumann_max<T: Real>(
    u: &DiscreteFunction<T>,
    params: &FracParams<T>,
    order: usize,
) -> Result<T> {
    let mesh = u.mesh().clone();
    let mut m = T::zero();
    for node in mesh.exterior_nodes() {
        m = m.max(neumann_derivative_at(u, node, params, order)?.abs());
    }
    Ok(m)
}
