//! Discrete functions, the nonlocal norm and its gradient, and numerical
//! lower estimates of the embedding constants.
//!
//! Every estimate produced here is a mesh-dependent lower bound of the
//! continuum constant; consumers are expected to carry that tag along.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::{gauss_legendre, QuadratureTable};
use crate::linalg::{dot, norm2, SymMatrix};
use crate::mesh::{nodes_per_element, shape_values, CaseTag, FracParams, Mesh};
use crate::model::Coefficient;
use crate::real::{real, CompensatedSum, Real};

/// Nodal values on every mesh node (interior and exterior); piecewise
/// multilinear interpolation in between.
#[derive(Clone, Debug)]
pub struct DiscreteFunction<T> {
    mesh: Arc<Mesh<T>>,
    values: Vec<T>,
}

impl<T: Real> DiscreteFunction<T> {
    pub fn new(mesh: Arc<Mesh<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::MeshMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                mesh.node_count()
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn constant(mesh: Arc<Mesh<T>>, v: T) -> Self {
        let n = mesh.node_count();
        Self {
            mesh,
            values: vec![v; n],
        }
    }

    pub fn zeros(mesh: Arc<Mesh<T>>) -> Self {
        Self::constant(mesh, T::zero())
    }

    pub fn from_fn(mesh: Arc<Mesh<T>>, f: impl Fn(&[T; 2]) -> T) -> Self {
        let values = mesh.nodes().iter().map(&f).collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        &self.mesh
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// `|d|^{p−2} d`, with the removable singularity at `d = 0` set to zero.
#[inline]
pub fn p_flux<T: Real>(d: T, p: T) -> T {
    if d == T::zero() {
        T::zero()
    } else {
        d.abs().powf(p - T::one()) * d.signum()
    }
}

#[inline]
fn sample_difference<T: Real>(
    dim: usize,
    rec: &crate::kernel::PairRecord<T>,
    xi: [T; 2],
    eta: [T; 2],
    values: &[T],
) -> (T, [T; 4], [T; 4]) {
    let sha = shape_values(dim, xi);
    let shb = shape_values(dim, eta);
    let npe = nodes_per_element(dim);
    let mut ua = T::zero();
    let mut ub = T::zero();
    for k in 0..npe {
        ua += sha[k] * values[rec.a_nodes[k]];
        ub += shb[k] * values[rec.b_nodes[k]];
    }
    (ua - ub, sha, shb)
}

/// The halved discrete double integral `½ ∬ |u(x)−u(y)|^p K(x,y)`.
pub fn seminorm_p<T: Real>(
    u: &DiscreteFunction<T>,
    table: &QuadratureTable<T>,
    params: &FracParams<T>,
) -> Result<T> {
    if !table.matches_mesh(u.mesh()) {
        return Err(Error::MeshMismatch("function mesh differs from table mesh".into()));
    }
    let p = params.p();
    let dim = table.dim();
    let mut acc = CompensatedSum::new();
    for rec in table.pairs() {
        for s in table.samples(rec) {
            let (du, _, _) = sample_difference(dim, rec, s.xi, s.eta, u.values());
            if du != T::zero() {
                acc.add(s.weight * s.kernel * du.abs().powf(p));
            }
        }
    }
    Ok(acc.value() * real(0.5))
}

/// Gradient of `seminorm_p` with respect to the nodal values.
pub fn seminorm_p_gradient<T: Real>(
    u: &DiscreteFunction<T>,
    table: &QuadratureTable<T>,
    params: &FracParams<T>,
) -> Result<Vec<T>> {
    if !table.matches_mesh(u.mesh()) {
        return Err(Error::MeshMismatch("function mesh differs from table mesh".into()));
    }
    let p = params.p();
    let dim = table.dim();
    let npe = nodes_per_element(dim);
    let mut grad = vec![T::zero(); u.values().len()];
    let half_p = real::<T>(0.5) * p;
    for rec in table.pairs() {
        for s in table.samples(rec) {
            let (du, sha, shb) = sample_difference(dim, rec, s.xi, s.eta, u.values());
            if du == T::zero() {
                continue;
            }
            let g = half_p * s.weight * s.kernel * p_flux(du, p);
            for k in 0..npe {
                grad[rec.a_nodes[k]] += g * sha[k];
                grad[rec.b_nodes[k]] -= g * shb[k];
            }
        }
    }
    Ok(grad)
}

/// `∫_Ω a |u|^p`.
pub fn potential_p<T: Real>(u: &DiscreteFunction<T>, a: &Coefficient<T>, p: T) -> T {
    let mesh = u.mesh();
    crate::model::interior_integral(mesh, |elem, local| {
        let shape = shape_values(mesh.dim(), local);
        let npe = nodes_per_element(mesh.dim());
        let mut uv = T::zero();
        let mut av = T::zero();
        for k in 0..npe {
            uv += shape[k] * u.values()[elem.nodes[k]];
            av += shape[k] * a.values()[elem.nodes[k]];
        }
        av * uv.abs().powf(p)
    })
}

/// Gradient of `potential_p`: entries `p ∫ a |u|^{p−2} u φ_i`.
pub fn potential_p_gradient<T: Real>(
    u: &DiscreteFunction<T>,
    a: &Coefficient<T>,
    p: T,
) -> Vec<T> {
    let mesh = u.mesh();
    let dim = mesh.dim();
    let npe = nodes_per_element(dim);
    let rule = gauss_legendre::<T>(6);
    let mut grad = vec![T::zero(); u.values().len()];
    for elem in mesh.interior_elements() {
        let mut quad_points = Vec::new();
        if dim == 1 {
            let h = elem.size(0);
            for (&t, &w) in rule.nodes.iter().zip(rule.weights.iter()) {
                quad_points.push(([(t + T::one()) * real(0.5), T::zero()], w * real(0.5) * h));
            }
        } else {
            let (hx, hy) = (elem.size(0), elem.size(1));
            for (&tx, &wx) in rule.nodes.iter().zip(rule.weights.iter()) {
                for (&ty, &wy) in rule.nodes.iter().zip(rule.weights.iter()) {
                    quad_points.push((
                        [(tx + T::one()) * real(0.5), (ty + T::one()) * real(0.5)],
                        wx * wy * real::<T>(0.25) * hx * hy,
                    ));
                }
            }
        }
        for (local, jw) in quad_points {
            let shape = shape_values(dim, local);
            let mut uv = T::zero();
            let mut av = T::zero();
            for k in 0..npe {
                uv += shape[k] * u.values()[elem.nodes[k]];
                av += shape[k] * a.values()[elem.nodes[k]];
            }
            let g = p * jw * av * p_flux(uv, p);
            for k in 0..npe {
                grad[elem.nodes[k]] += g * shape[k];
            }
        }
    }
    grad
}

/// The full norm `(∫_Ω a|u|^p + ½ ∬ |u(x)−u(y)|^p K)^{1/p}`.
pub fn norm_w<T: Real>(
    u: &DiscreteFunction<T>,
    a: &Coefficient<T>,
    table: &QuadratureTable<T>,
    params: &FracParams<T>,
) -> Result<T> {
    let p = params.p();
    let semi = seminorm_p(u, table, params)?;
    let pot = potential_p(u, a, p);
    Ok((semi + pot).powf(T::one() / p))
}

/// Interior `L^q` norm of the interpolant. Exact per-element closed forms for
/// `q ∈ {1, 2}` in one dimension; Gauss quadrature (split at sign changes in
/// 1D) otherwise.
pub fn lq_norm<T: Real>(u: &DiscreteFunction<T>, q: T) -> T {
    let mesh = u.mesh();
    let dim = mesh.dim();
    if dim == 1 {
        let mut acc = CompensatedSum::new();
        for elem in mesh.interior_elements() {
            let h = elem.size(0);
            let v0 = u.values()[elem.nodes[0]];
            let v1 = u.values()[elem.nodes[1]];
            acc.add(segment_abs_power_integral(v0, v1, h, q));
        }
        acc.value().powf(T::one() / q)
    } else {
        let v = crate::model::interior_integral(mesh, |elem, local| {
            let shape = shape_values(dim, local);
            let mut uv = T::zero();
            for k in 0..nodes_per_element(dim) {
                uv += shape[k] * u.values()[elem.nodes[k]];
            }
            uv.abs().powf(q)
        });
        v.powf(T::one() / q)
    }
}

/// `∫_0^h |v0 + (v1−v0) t/h|^q dt`.
fn segment_abs_power_integral<T: Real>(v0: T, v1: T, h: T, q: T) -> T {
    let two = real::<T>(2.0);
    if q == T::one() {
        if v0 * v1 >= T::zero() {
            return h * (v0.abs() + v1.abs()) / two;
        }
        let t = v0 / (v0 - v1);
        return h * (t * v0.abs() + (T::one() - t) * v1.abs()) / two;
    }
    if q == two {
        return h * (v0 * v0 + v0 * v1 + v1 * v1) / real(3.0);
    }
    // general q: Gauss on each monotone-sign piece
    let rule = gauss_legendre::<T>(8);
    let mut pieces = vec![(T::zero(), T::one())];
    if v0 * v1 < T::zero() {
        let t = v0 / (v0 - v1);
        pieces = vec![(T::zero(), t), (t, T::one())];
    }
    let mut acc = T::zero();
    for (lo, hi) in pieces {
        for (t, w) in rule.mapped(lo, hi) {
            let v = v0 + (v1 - v0) * t;
            acc += w * v.abs().powf(q);
        }
    }
    acc * h
}

/// Max of `|u|` over the interior nodes (attained at nodes for multilinear
/// interpolants).
pub fn sup_norm<T: Real>(u: &DiscreteFunction<T>) -> T {
    let mesh = u.mesh();
    let mut m = T::zero();
    for i in mesh.interior_nodes() {
        m = m.max(u.values()[i].abs());
    }
    m
}

fn lq_norm_gradient<T: Real>(u: &DiscreteFunction<T>, q: T) -> Vec<T> {
    let mesh = u.mesh();
    let dim = mesh.dim();
    let npe = nodes_per_element(dim);
    let rule = gauss_legendre::<T>(8);
    let mut grad_pow = vec![T::zero(); u.values().len()]; // gradient of ∫|u|^q
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
            for k in 0..npe {
                uv += shape[k] * u.values()[elem.nodes[k]];
            }
            let g = q * jw * p_flux(uv, q);
            for k in 0..npe {
                grad_pow[elem.nodes[k]] += g * shape[k];
            }
        }
    }
    // d/du ( (∫|u|^q)^{1/q} ) = (1/q) (∫|u|^q)^{1/q − 1} · grad_pow
    let val = lq_norm(u, q);
    let scale = if val > T::zero() {
        val.powf(T::one() - q) / q
    } else {
        T::zero()
    };
    grad_pow.iter().map(|&g| g * scale).collect()
}

/// Precomputed norm machinery for one (mesh, table, coefficient, params)
/// instance: the quadratic fast path at `p = 2`, the diagonal of the
/// quadratic seminorm matrix (used as a descent preconditioner), and the
/// norms of the nodal test functions.
pub struct NormAssembly<T> {
    p: T,
    quadratic: Option<SymMatrix<T>>,
    precond_diag: Vec<T>,
    phi_norms: Vec<T>,
}

impl<T: Real> NormAssembly<T> {
    pub fn build(
        mesh: &Mesh<T>,
        table: &QuadratureTable<T>,
        a: &Coefficient<T>,
        params: &FracParams<T>,
    ) -> Result<Self> {
        if !table.matches_mesh(mesh) {
            return Err(Error::MeshMismatch("table assembled on a different mesh".into()));
        }
        let p = params.p();
        let dim = mesh.dim();
        let npe = nodes_per_element(dim);
        let n = mesh.node_count();
        let is_quadratic = p == real(2.0);

        let mut quad = if is_quadratic {
            Some(SymMatrix::zeros(n))
        } else {
            None
        };
        let mut precond = vec![T::zero(); n];
        let mut phi_semi = vec![T::zero(); n];

        let half = real::<T>(0.5);
        let mut entries: Vec<(usize, T)> = Vec::with_capacity(2 * npe);
        for rec in table.pairs() {
            for s in table.samples(rec) {
                let sha = shape_values(dim, s.xi);
                let shb = shape_values(dim, s.eta);
                entries.clear();
                for k in 0..npe {
                    push_entry(&mut entries, rec.a_nodes[k], sha[k]);
                }
                for k in 0..npe {
                    push_entry(&mut entries, rec.b_nodes[k], -shb[k]);
                }
                let wk = half * s.weight * s.kernel;
                for &(i, ci) in &entries {
                    precond[i] += wk * ci * ci;
                    phi_semi[i] += wk * ci.abs().powf(p);
                }
                if let Some(mat) = quad.as_mut() {
                    for &(i, ci) in &entries {
                        for &(j, cj) in &entries {
                            mat.add_raw(i, j, wk * ci * cj);
                        }
                    }
                }
            }
        }

        // potential parts: ∫ a |φ_i|^p, and the a-weighted mass matrix at p=2
        let rule = gauss_legendre::<T>(6);
        let mut phi_pot = vec![T::zero(); n];
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
                let mut av = T::zero();
                for k in 0..npe {
                    av += shape[k] * a.values()[elem.nodes[k]];
                }
                for k in 0..npe {
                    phi_pot[elem.nodes[k]] += jw * av * shape[k].abs().powf(p);
                }
                if let Some(mat) = quad.as_mut() {
                    for k in 0..npe {
                        for l in 0..npe {
                            mat.add_raw(elem.nodes[k], elem.nodes[l], jw * av * shape[k] * shape[l]);
                        }
                    }
                }
            }
        }

        let phi_norms = phi_semi
            .iter()
            .zip(phi_pot.iter())
            .map(|(&s, &m)| (s + m).powf(T::one() / p))
            .collect();

        Ok(Self {
            p,
            quadratic: quad,
            precond_diag: precond,
            phi_norms,
        })
    }

    pub fn is_quadratic(&self) -> bool {
        self.quadratic.is_some()
    }

    pub fn quadratic_matrix(&self) -> Option<&SymMatrix<T>> {
        self.quadratic.as_ref()
    }

    /// Diagonal of the quadratic seminorm matrix, floored away from zero.
    pub fn precond_diag(&self) -> Vec<T> {
        let max = self
            .precond_diag
            .iter()
            .cloned()
            .fold(T::zero(), |a, b| a.max(b));
        let floor = max * real(1e-12);
        self.precond_diag
            .iter()
            .map(|&d| if d > floor { d } else { floor })
            .collect()
    }

    /// Norms of the nodal hat functions.
    pub fn phi_norms(&self) -> &[T] {
        &self.phi_norms
    }

    /// `‖u‖^p`, using the cached quadratic form when `p = 2`.
    pub fn norm_p(
        &self,
        u: &DiscreteFunction<T>,
        table: &QuadratureTable<T>,
        a: &Coefficient<T>,
        params: &FracParams<T>,
    ) -> Result<T> {
        if let Some(mat) = &self.quadratic {
            return Ok(mat.quad_form(u.values()));
        }
        Ok(seminorm_p(u, table, params)? + potential_p(u, a, self.p))
    }

    /// Gradient of `‖u‖^p`.
    pub fn norm_p_gradient(
        &self,
        u: &DiscreteFunction<T>,
        table: &QuadratureTable<T>,
        a: &Coefficient<T>,
        params: &FracParams<T>,
    ) -> Result<Vec<T>> {
        if let Some(mat) = &self.quadratic {
            let mut g = mat.matvec(u.values());
            for v in &mut g {
                *v = *v * real(2.0);
            }
            return Ok(g);
        }
        let mut g = seminorm_p_gradient(u, table, params)?;
        let pot = potential_p_gradient(u, a, self.p);
        for (gi, pi) in g.iter_mut().zip(pot.iter()) {
            *gi += *pi;
        }
        Ok(g)
    }
}

fn push_entry<T: Real>(entries: &mut Vec<(usize, T)>, node: usize, coeff: T) {
    for e in entries.iter_mut() {
        if e.0 == node {
            e.1 += coeff;
            return;
        }
    }
    entries.push((node, coeff));
}

/// Multistart projected-ascent configuration. Randomized starts are drawn
/// from the explicit seed; absence of a seed is the caller's error to handle.
#[derive(Clone, Copy, Debug)]
pub struct AscentConfig<T> {
    pub starts: usize,
    pub max_iters: usize,
    pub grad_tol: T,
    pub seed: u64,
}

impl<T: Real> AscentConfig<T> {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            starts: 50,
            max_iters: 5000,
            grad_tol: real(1e-9),
            seed,
        }
    }
}

/// Numerical lower estimates of embedding constants, tagged with the mesh
/// they were computed on.
#[derive(Clone, Debug)]
pub struct EmbeddingConstants<T> {
    pub c: Option<T>,
    pub cq: Vec<(T, T)>,
    pub mesh_n: usize,
    pub r_ext: T,
    pub c_converged: bool,
    pub cq_converged: bool,
}

struct RatioProblem<'a, T: Real> {
    assembly: &'a NormAssembly<T>,
    table: &'a QuadratureTable<T>,
    a: &'a Coefficient<T>,
    params: &'a FracParams<T>,
    mesh: Arc<Mesh<T>>,
}

impl<'a, T: Real> RatioProblem<'a, T> {
    fn norm(&self, values: &[T]) -> T {
        let u = DiscreteFunction {
            mesh: self.mesh.clone(),
            values: values.to_vec(),
        };
        self.assembly
            .norm_p(&u, self.table, self.a, self.params)
            .unwrap()
            .powf(T::one() / self.params.p())
    }

    fn norm_gradient(&self, values: &[T]) -> Vec<T> {
        // ∇‖u‖ = ∇(‖u‖^p) / (p ‖u‖^{p−1})
        let u = DiscreteFunction {
            mesh: self.mesh.clone(),
            values: values.to_vec(),
        };
        let gp = self
            .assembly
            .norm_p_gradient(&u, self.table, self.a, self.params)
            .unwrap();
        let nv = self.norm(values);
        let scale = T::one() / (self.params.p() * nv.powf(self.params.p() - T::one()));
        gp.iter().map(|&g| g * scale).collect()
    }

    /// Maximizes `num(u)/‖u‖` from one start by projected gradient ascent on
    /// the unit sphere of the norm, with Armijo backtracking.
    fn ascend(
        &self,
        num: &dyn Fn(&[T]) -> T,
        num_grad: &dyn Fn(&[T]) -> Vec<T>,
        start: Vec<T>,
        max_iters: usize,
        grad_tol: T,
    ) -> (T, Vec<T>, bool) {
        let mut u = start;
        let n0 = self.norm(&u);
        if !(n0 > T::zero()) {
            return (T::zero(), u, false);
        }
        for v in &mut u {
            *v = *v / n0;
        }
        let mut ratio = num(&u);
        let mut step = T::one();
        let c1 = real::<T>(1e-4);
        let mut converged = false;
        let mut prev: Option<(Vec<T>, Vec<T>)> = None;
        for _ in 0..max_iters {
            let gn = num_grad(&u);
            let gd = self.norm_gradient(&u);
            let g: Vec<T> = gn
                .iter()
                .zip(gd.iter())
                .map(|(&a, &b)| a - ratio * b)
                .collect();
            let gnorm = norm2(&g);
            if gnorm <= grad_tol {
                converged = true;
                break;
            }
            // Barzilai–Borwein seed, safeguarded by the Armijo test below
            let mut alpha = step;
            if let Some((pu, pg)) = &prev {
                let mut sy = T::zero();
                let mut yy = T::zero();
                for i in 0..g.len() {
                    let s = u[i] - pu[i];
                    let y = g[i] - pg[i];
                    sy += s * y;
                    yy += y * y;
                }
                let bb = -sy / yy; // ascent: curvature along the path is negative
                if bb.is_finite() && bb > T::zero() {
                    alpha = bb.max(real(1e-12)).min(real(1e3));
                }
            }
            prev = Some((u.clone(), g.clone()));
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<T> = u
                    .iter()
                    .zip(g.iter())
                    .map(|(&ui, &gi)| ui + alpha * gi)
                    .collect();
                let tn = self.norm(&trial);
                if tn > T::zero() {
                    let scaled: Vec<T> = trial.iter().map(|&v| v / tn).collect();
                    let r = num(&scaled);
                    if r >= ratio + c1 * alpha * gnorm * gnorm {
                        u = scaled;
                        ratio = r;
                        accepted = true;
                        break;
                    }
                }
                alpha = alpha * real(0.5);
            }
            if !accepted {
                converged = gnorm <= grad_tol * real(1e3);
                break;
            }
            step = (alpha * real(2.0)).min(real(1e3));
        }
        (ratio, u, converged)
    }
}

/// Sup-norm embedding constant (the `N < s·p` regime): for each interior node
/// the linear functional `u ↦ u(x_i)` is maximized over the unit ball, which
/// is a convex problem, so a single indicator start per node suffices; the
/// constant-one candidate is always included.
pub fn estimate_c<T: Real>(
    mesh: &Arc<Mesh<T>>,
    a: &Coefficient<T>,
    table: &QuadratureTable<T>,
    params: &FracParams<T>,
    cfg: &AscentConfig<T>,
) -> Result<(T, bool)> {
    if params.case_tag() != CaseTag::CaseI {
        return Err(Error::InvalidInput(
            "sup-norm embedding constant requires N < s*p with p >= 2".into(),
        ));
    }
    let assembly = NormAssembly::build(mesh, table, a, params)?;
    let problem = RatioProblem {
        assembly: &assembly,
        table,
        a,
        params,
        mesh: mesh.clone(),
    };
    let nn = mesh.node_count();
    let ones = vec![T::one(); nn];
    let mut best = sup_of(mesh, &ones) / problem.norm(&ones);
    let mut all_converged = true;
    for i in mesh.interior_nodes() {
        let num = move |v: &[T]| v[i];
        let num_grad = move |v: &[T]| {
            let mut g = vec![T::zero(); v.len()];
            g[i] = T::one();
            g
        };
        let mut start = vec![T::zero(); nn];
        start[i] = T::one();
        let (ratio, _, conv) =
            problem.ascend(&num, &num_grad, start, cfg.max_iters, cfg.grad_tol);
        all_converged &= conv;
        if ratio > best {
            best = ratio;
        }
    }
    Ok((best, all_converged))
}

fn sup_of<T: Real>(mesh: &Mesh<T>, values: &[T]) -> T {
    let mut m = T::zero();
    for i in mesh.interior_nodes() {
        m = m.max(values[i].abs());
    }
    m
}

/// `L^q` embedding constant by seeded multistart ascent; deterministic for a
/// fixed seed (best by value, ties by lowest start index).
pub fn estimate_cq<T: Real>(
    mesh: &Arc<Mesh<T>>,
    a: &Coefficient<T>,
    table: &QuadratureTable<T>,
    params: &FracParams<T>,
    q: T,
    cfg: &AscentConfig<T>,
) -> Result<(T, bool)> {
    if q < T::one() {
        return Err(Error::InvalidInput(format!("q must be at least 1, got {q}")));
    }
    let n_dim = real::<T>(params.dim() as f64);
    if n_dim > params.sp() && !(q < params.critical_exponent()) {
        return Err(Error::InvalidInput(format!(
            "q = {q} is supercritical for these parameters"
        )));
    }
    if n_dim == params.sp() && !q.is_finite() {
        return Err(Error::InvalidInput("q must be finite".into()));
    }
    let assembly = NormAssembly::build(mesh, table, a, params)?;
    let problem = RatioProblem {
        assembly: &assembly,
        table,
        a,
        params,
        mesh: mesh.clone(),
    };
    let nn = mesh.node_count();
    let num = |v: &[T]| {
        let u = DiscreteFunction {
            mesh: mesh.clone(),
            values: v.to_vec(),
        };
        lq_norm(&u, q)
    };
    let num_grad = |v: &[T]| {
        let u = DiscreteFunction {
            mesh: mesh.clone(),
            values: v.to_vec(),
        };
        lq_norm_gradient(&u, q)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best = T::zero();
    let mut all_converged = true;
    for start_idx in 0..cfg.starts.max(1) {
        let start: Vec<T> = if start_idx == 0 {
            vec![T::one(); nn]
        } else {
            (0..nn)
                .map(|_| real::<T>(rng.random_range(-1.0..1.0)))
                .collect()
        };
        let (ratio, _, conv) = problem.ascend(&num, &num_grad, start, cfg.max_iters, cfg.grad_tol);
        all_converged &= conv;
        if ratio > best {
            best = ratio;
        }
    }
    Ok((best, all_converged))
}

/// Dual-norm of a residual vector against the nodal test functions:
/// `max_i |r_i| / ‖φ_i‖`.
pub fn dual_norm<T: Real>(residual: &[T], phi_norms: &[T]) -> T {
    let mut m = T::zero();
    for (r, n) in residual.iter().zip(phi_norms.iter()) {
        if *n > T::zero() {
            m = m.max(r.abs() / *n);
        }
    }
    m
}

/// Euclidean inner product of a dual vector with a primal one.
pub fn pair_duality<T: Real>(dual: &[T], primal: &[T]) -> T {
    dot(dual, primal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::assemble_table;
    use crate::mesh::{build_mesh, Domain};
    use std::sync::OnceLock;

    struct Fixture {
        mesh: Arc<Mesh<f64>>,
        params: FracParams<f64>,
        table: QuadratureTable<f64>,
        a: Coefficient<f64>,
    }

    fn fixture() -> &'static Fixture {
        static FIX: OnceLock<Fixture> = OnceLock::new();
        FIX.get_or_init(|| {
            let params = FracParams::new(1, 0.5, 2.0).unwrap();
            let mesh = Arc::new(build_mesh(Domain::Interval { a: 0.0, b: 1.0 }, 8, 3.0).unwrap());
            let table = assemble_table(&mesh, &params, 6, 6).unwrap();
            let a = Coefficient::constant(&mesh, 1.0).unwrap();
            Fixture {
                mesh,
                params,
                table,
                a,
            }
        })
    }

    #[test]
    fn seminorm_of_constants_vanishes() {
        let f = fixture();
        let u = DiscreteFunction::constant(f.mesh.clone(), 7.0);
        let v = seminorm_p(&u, &f.table, &f.params).unwrap();
        assert!(v.abs() <= 1e-12);
    }

    #[test]
    fn seminorm_is_p_homogeneous() {
        let f = fixture();
        let u = DiscreteFunction::from_fn(f.mesh.clone(), |x| (3.0 * x[0]).sin());
        let scaled = DiscreteFunction::new(
            f.mesh.clone(),
            u.values().iter().map(|v| 2.0 * v).collect(),
        )
        .unwrap();
        let s1 = seminorm_p(&u, &f.table, &f.params).unwrap();
        let s2 = seminorm_p(&scaled, &f.table, &f.params).unwrap();
        assert!(((s2 - 4.0 * s1) / s2).abs() < 1e-12);
    }

    #[test]
    fn norm_of_constant_matches_weighted_mass() {
        let f = fixture();
        // u ≡ 2, a ≡ 1 on (0,1), p = 2: seminorm 0, ∫ a u² = 4, norm 2
        let u = DiscreteFunction::constant(f.mesh.clone(), 2.0);
        let n = norm_w(&u, &f.a, &f.table, &f.params).unwrap();
        assert!((n - 2.0).abs() < 1e-12);
        // general δ: ‖u_δ‖^p = δ^p ‖a‖_L1
        for &delta in &[0.5, 2.0, 7.0] {
            let u = DiscreteFunction::constant(f.mesh.clone(), delta);
            let n = norm_w(&u, &f.a, &f.table, &f.params).unwrap();
            let expect = (delta * delta * f.a.l1_norm()).sqrt();
            assert!(((n - expect) / expect).abs() < 1e-12);
        }
    }

    #[test]
    fn lq_and_sup_norms_closed_forms() {
        let f = fixture();
        let three = DiscreteFunction::constant(f.mesh.clone(), 3.0);
        assert!((lq_norm(&three, 1.0) - 3.0).abs() < 1e-12);
        let linear = DiscreteFunction::from_fn(f.mesh.clone(), |x| x[0]);
        assert!((lq_norm(&linear, 2.0) - 1.0 / 3.0f64.sqrt()).abs() < 1e-12);
        assert!((sup_norm(&linear) - 1.0).abs() < 1e-15);
        // sign change: ∫_0^1 |x − 1/2| dx = 1/4
        let shifted = DiscreteFunction::from_fn(f.mesh.clone(), |x| x[0] - 0.5);
        assert!((lq_norm(&shifted, 1.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn norm_triangle_inequality_on_random_pairs() {
        let f = fixture();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let u = DiscreteFunction::new(
                f.mesh.clone(),
                (0..f.mesh.node_count())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            )
            .unwrap();
            let v = DiscreteFunction::new(
                f.mesh.clone(),
                (0..f.mesh.node_count())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            )
            .unwrap();
            let sum = DiscreteFunction::new(
                f.mesh.clone(),
                u.values()
                    .iter()
                    .zip(v.values().iter())
                    .map(|(a, b)| a + b)
                    .collect(),
            )
            .unwrap();
            let nu = norm_w(&u, &f.a, &f.table, &f.params).unwrap();
            let nv = norm_w(&v, &f.a, &f.table, &f.params).unwrap();
            let ns = norm_w(&sum, &f.a, &f.table, &f.params).unwrap();
            assert!(ns <= nu + nv + 1e-10);
        }
    }

    #[test]
    fn quadratic_fast_path_matches_direct_evaluation() {
        let f = fixture();
        let assembly = NormAssembly::build(&f.mesh, &f.table, &f.a, &f.params).unwrap();
        assert!(assembly.is_quadratic());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let u = DiscreteFunction::new(
                f.mesh.clone(),
                (0..f.mesh.node_count())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            )
            .unwrap();
            let fast = assembly.norm_p(&u, &f.table, &f.a, &f.params).unwrap();
            let slow = seminorm_p(&u, &f.table, &f.params).unwrap()
                + potential_p(&u, &f.a, f.params.p());
            assert!(((fast - slow) / slow.max(1e-30)).abs() < 1e-10);
            let gf = assembly
                .norm_p_gradient(&u, &f.table, &f.a, &f.params)
                .unwrap();
            let mut gs = seminorm_p_gradient(&u, &f.table, &f.params).unwrap();
            let gp = potential_p_gradient(&u, &f.a, f.params.p());
            for (a, b) in gs.iter_mut().zip(gp.iter()) {
                *a += *b;
            }
            for (x, y) in gf.iter().zip(gs.iter()) {
                assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn mesh_mismatch_is_detected() {
        let f = fixture();
        let other = Arc::new(build_mesh(Domain::Interval { a: 0.0, b: 1.0 }, 4, 3.0).unwrap());
        let u = DiscreteFunction::constant(other, 1.0);
        assert!(matches!(
            seminorm_p(&u, &f.table, &f.params),
            Err(Error::MeshMismatch(_))
        ));
    }

    #[test]
    fn constant_candidate_bounds_cq_estimate() {
        let f = fixture();
        let cfg = AscentConfig {
            starts: 4,
            max_iters: 400,
            grad_tol: 1e-7,
            seed: 11,
        };
        let (c1, _) = estimate_cq(&f.mesh, &f.a, &f.table, &f.params, 1.0, &cfg).unwrap();
        // evaluating the ratio at u ≡ 1 gives |Ω| ‖a‖^{-1/p} = 1
        assert!(c1 >= 1.0 - 1e-9);
        let (c4, _) = estimate_cq(&f.mesh, &f.a, &f.table, &f.params, 4.0, &cfg).unwrap();
        // Hölder on the unit-measure domain forces c1 ≤ c4
        assert!(c1 <= c4 + 1e-9);
    }

    #[test]
    fn cq_estimate_is_deterministic_for_a_seed() {
        let f = fixture();
        let cfg = AscentConfig {
            starts: 3,
            max_iters: 200,
            grad_tol: 1e-7,
            seed: 5,
        };
        let (a1, _) = estimate_cq(&f.mesh, &f.a, &f.table, &f.params, 4.0, &cfg).unwrap();
        let (a2, _) = estimate_cq(&f.mesh, &f.a, &f.table, &f.params, 4.0, &cfg).unwrap();
        assert_eq!(a1, a2);
    }

    #[test]
    fn supercritical_q_is_rejected() {
        // N = 2 > sp = 1: critical exponent 4
        let params = FracParams::new(2, 0.5, 2.0).unwrap();
        let mesh = Arc::new(
            build_mesh(
                Domain::Rect {
                    a: [0.0, 0.0],
                    b: [1.0, 1.0],
                },
                2,
                2.5,
            )
            .unwrap(),
        );
        let table = assemble_table(&mesh, &params, 2, 2).unwrap();
        let a = Coefficient::constant(&mesh, 1.0).unwrap();
        let cfg = AscentConfig::with_seed(1);
        assert!(estimate_cq(&mesh, &a, &table, &params, 5.0, &cfg).is_err());
    }
}
