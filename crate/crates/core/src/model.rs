//! Problem data: the weight `a(x)`, nonlinearities `h(x,t) = φ(x)·ψ(t)` with
//! growth metadata, their primitives, and the built-in reference instance
//! with a capped-power nonlinearity.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::gauss_legendre;
use crate::mesh::Mesh;
use crate::real::{real, Real};

/// Nodal weight on the interior nodes, with `ess inf > 0` enforced at
/// construction. Piecewise-linear interpolation between nodes.
#[derive(Clone, Debug)]
pub struct Coefficient<T> {
    values: Vec<T>,
    ess_inf: T,
    l1_norm: T,
    linf_norm: T,
}

impl<T: Real> Coefficient<T> {
    pub fn from_nodal(mesh: &Mesh<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::MeshMismatch(format!(
                "coefficient has {} values for {} nodes",
                values.len(),
                mesh.node_count()
            )));
        }
        let mut ess_inf = T::infinity();
        let mut linf = T::zero();
        for i in mesh.interior_nodes() {
            ess_inf = ess_inf.min(values[i]);
            linf = linf.max(values[i].abs());
        }
        if !(ess_inf > T::zero()) {
            return Err(Error::InvalidInput(format!(
                "coefficient must have positive essential infimum, got {ess_inf}"
            )));
        }
        let l1_norm = interior_integral(mesh, |elem, local| {
            let shape = crate::mesh::shape_values(mesh.dim(), local);
            let mut v = T::zero();
            for (k, &node) in elem.nodes[..crate::mesh::nodes_per_element(mesh.dim())]
                .iter()
                .enumerate()
            {
                v += shape[k] * values[node];
            }
            v
        });
        Ok(Self {
            values,
            ess_inf,
            l1_norm,
            linf_norm: linf,
        })
    }

    pub fn constant(mesh: &Mesh<T>, value: T) -> Result<Self> {
        Self::from_nodal(mesh, vec![value; mesh.node_count()])
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn ess_inf(&self) -> T {
        self.ess_inf
    }

    pub fn l1_norm(&self) -> T {
        self.l1_norm
    }

    pub fn linf_norm(&self) -> T {
        self.linf_norm
    }
}

/// Fixed-order Gauss quadrature of a local integrand over the interior
/// elements. The closure receives the element and a local coordinate.
pub fn interior_integral<T: Real, F>(mesh: &Mesh<T>, f: F) -> T
where
    F: Fn(&crate::mesh::Element<T>, [T; 2]) -> T,
{
    let rule = gauss_legendre::<T>(6);
    let dim = mesh.dim();
    let mut acc = crate::real::CompensatedSum::new();
    for elem in mesh.interior_elements() {
        if dim == 1 {
            let h = elem.size(0);
            for (&t, &w) in rule.nodes.iter().zip(rule.weights.iter()) {
                let local = [(t + T::one()) * real(0.5), T::zero()];
                acc.add(w * real::<T>(0.5) * h * f(elem, local));
            }
        } else {
            let (hx, hy) = (elem.size(0), elem.size(1));
            for (&tx, &wx) in rule.nodes.iter().zip(rule.weights.iter()) {
                for (&ty, &wy) in rule.nodes.iter().zip(rule.weights.iter()) {
                    let local = [(tx + T::one()) * real(0.5), (ty + T::one()) * real(0.5)];
                    let jac = wx * wy * real::<T>(0.25) * hx * hy;
                    acc.add(jac * f(elem, local));
                }
            }
        }
    }
    acc.value()
}

/// Growth data for membership in the subcritical class:
/// `|h(x,t)| ≤ a1 + a2 |t|^{q−1}`.
#[derive(Clone, Copy, Debug)]
pub struct Growth<T> {
    pub a1: T,
    pub a2: T,
    pub q: T,
}

type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// The `t`-profile of the nonlinearity.
#[derive(Clone)]
pub enum Profile<T> {
    /// ψ(t) = c
    Constant(T),
    /// ψ(t) = k·t
    Linear(T),
    /// ψ(t) = Σ c_j t^j
    Polynomial(Vec<T>),
    /// Capped power: `1 + |t|^{q−1}` up to `rho`, then a bounded
    /// `(1+rho²)(1+rho^{q−1})/(1+t²)` tail.
    CappedPower { rho: T, q: T },
    /// Arbitrary evaluator, optionally with a closed-form primitive.
    Custom {
        eval: ScalarFn<T>,
        primitive: Option<ScalarFn<T>>,
    },
}

impl<T> std::fmt::Debug for Profile<T>
where
    T: std::fmt::Debug,
{
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Profile::Constant(c) => write!(f, "Constant({c:?})"),
            Profile::Linear(k) => write!(f, "Linear({k:?})"),
            Profile::Polynomial(c) => write!(f, "Polynomial({c:?})"),
            Profile::CappedPower { rho, q } => write!(f, "CappedPower(rho={rho:?}, q={q:?})"),
            Profile::Custom { .. } => write!(f, "Custom"),
        }
    }
}

/// Carathéodory nonlinearity in separated form `h(x,t) = φ(x)·ψ(t)`; the
/// spatial factor is piecewise linear on the mesh and defaults to one.
#[derive(Clone, Debug)]
pub struct Nonlinearity<T> {
    profile: Profile<T>,
    spatial: Option<Vec<T>>,
    growth: Growth<T>,
}

impl<T: Real> Nonlinearity<T> {
    pub fn new(profile: Profile<T>, growth: Growth<T>) -> Result<Self> {
        if !(growth.q > T::one()) {
            return Err(Error::InvalidInput(format!(
                "growth exponent must exceed 1, got {}",
                growth.q
            )));
        }
        if growth.a1 < T::zero() || growth.a2 < T::zero() {
            return Err(Error::InvalidInput("growth constants must be nonnegative".into()));
        }
        Ok(Self {
            profile,
            spatial: None,
            growth,
        })
    }

    pub fn with_spatial(mut self, mesh: &Mesh<T>, phi: Vec<T>) -> Result<Self> {
        if phi.len() != mesh.node_count() {
            return Err(Error::MeshMismatch("spatial factor node count".into()));
        }
        let mut any_positive = false;
        for i in mesh.interior_nodes() {
            if phi[i] < T::zero() {
                return Err(Error::InvalidInput(
                    "spatial factor must be nonnegative".into(),
                ));
            }
            if phi[i] > T::zero() {
                any_positive = true;
            }
        }
        if !any_positive {
            return Err(Error::InvalidInput("spatial factor must not vanish".into()));
        }
        self.spatial = Some(phi);
        Ok(self)
    }

    pub fn growth(&self) -> Growth<T> {
        self.growth
    }

    pub fn profile(&self) -> &Profile<T> {
        &self.profile
    }

    pub fn is_autonomous(&self) -> bool {
        self.spatial.is_none()
    }

    pub fn spatial(&self) -> Option<&[T]> {
        self.spatial.as_deref()
    }

    /// φ at a node (one when no spatial factor is set).
    pub fn spatial_at(&self, node: usize) -> T {
        match &self.spatial {
            Some(phi) => phi[node],
            None => T::one(),
        }
    }

    /// ψ(t)
    pub fn psi(&self, t: T) -> T {
        match &self.profile {
            Profile::Constant(c) => *c,
            Profile::Linear(k) => *k * t,
            Profile::Polynomial(coeffs) => {
                let mut acc = T::zero();
                for &c in coeffs.iter().rev() {
                    acc = acc * t + c;
                }
                acc
            }
            Profile::CappedPower { rho, q } => capped_power_psi(t, *rho, *q),
            Profile::Custom { eval, .. } => eval(t),
        }
    }

    /// Closed-form Ψ(ξ) = ∫_0^ξ ψ when available.
    pub fn closed_primitive(&self, xi: T) -> Option<T> {
        match &self.profile {
            Profile::Constant(c) => Some(*c * xi),
            Profile::Linear(k) => Some(*k * xi * xi * real(0.5)),
            Profile::Polynomial(coeffs) => {
                let mut acc = T::zero();
                for (j, &c) in coeffs.iter().enumerate().rev() {
                    let jp1 = real::<T>((j + 1) as f64);
                    acc = acc + c * xi.powi(j as i32 + 1) / jp1;
                }
                Some(acc)
            }
            Profile::CappedPower { rho, q } => Some(capped_power_primitive(xi, *rho, *q)),
            Profile::Custom { primitive, .. } => primitive.as_ref().map(|p| p(xi)),
        }
    }

    /// Ψ(ξ): closed form when available, adaptive Simpson otherwise.
    pub fn primitive(&self, xi: T) -> Result<T> {
        if let Some(v) = self.closed_primitive(xi) {
            return Ok(v);
        }
        if xi == T::zero() {
            return Ok(T::zero());
        }
        let (lo, hi, sign) = if xi >= T::zero() {
            (T::zero(), xi, T::one())
        } else {
            (xi, T::zero(), -T::one())
        };
        let tol = real::<T>(1e-10);
        let v = adaptive_simpson(&|t| self.psi(t), lo, hi, tol, 48)?;
        Ok(sign * v)
    }
}

/// `1 + |t|^{q−1}` for `t ≤ rho`, `(1+rho²)(1+rho^{q−1})/(1+t²)` beyond.
/// The two branches do not meet at `t = rho`; the formulas are applied as
/// stated.
pub fn capped_power_psi<T: Real>(t: T, rho: T, q: T) -> T {
    if t <= rho {
        T::one() + t.abs().powf(q - T::one())
    } else {
        (T::one() + rho * rho) * (T::one() + rho.powf(q - T::one())) / (T::one() + t * t)
    }
}

fn capped_power_primitive<T: Real>(xi: T, rho: T, q: T) -> T {
    if xi <= rho {
        // ∫_0^ξ (1 + |t|^{q−1}) dt, valid for either sign of ξ
        xi + xi.abs().powf(q - T::one()) * xi / q
    } else {
        let at_rho = rho + rho.powf(q) / q;
        let c = (T::one() + rho * rho) * (T::one() + rho.powf(q - T::one()));
        at_rho + c * (xi.atan() - rho.atan())
    }
}

fn adaptive_simpson<T: Real>(
    f: &dyn Fn(T) -> T,
    lo: T,
    hi: T,
    tol: T,
    max_depth: usize,
) -> Result<T> {
    fn simpson<T: Real>(f: &dyn Fn(T) -> T, a: T, b: T) -> T {
        let mid = (a + b) * real(0.5);
        (b - a) / real(6.0) * (f(a) + real::<T>(4.0) * f(mid) + f(b))
    }
    fn recurse<T: Real>(
        f: &dyn Fn(T) -> T,
        a: T,
        b: T,
        whole: T,
        tol: T,
        depth: usize,
    ) -> Result<T> {
        let mid = (a + b) * real(0.5);
        let left = simpson(f, a, mid);
        let right = simpson(f, mid, b);
        let delta = left + right - whole;
        if delta.abs() <= real::<T>(15.0) * tol {
            return Ok(left + right + delta / real(15.0));
        }
        if depth == 0 {
            return Err(Error::NoConvergence(
                "adaptive quadrature depth exhausted".into(),
            ));
        }
        let half_tol = tol * real(0.5);
        Ok(recurse(f, a, mid, left, half_tol, depth - 1)?
            + recurse(f, mid, b, right, half_tol, depth - 1)?)
    }
    if !(hi > lo) {
        return Ok(T::zero());
    }
    recurse(f, lo, hi, simpson(f, lo, hi), tol, max_depth)
}

/// Worst-case report of the growth inequality `|h| ≤ a1 + a2 |t|^{q−1}` on a
/// sample grid over Ω × [−t_max, t_max].
#[derive(Clone, Debug)]
pub struct GrowthReport<T> {
    pub worst_ratio: T,
    pub worst_t: T,
    pub pass: bool,
}

pub fn growth_check<T: Real>(
    nl: &Nonlinearity<T>,
    mesh: &Mesh<T>,
    t_max: T,
    t_samples: usize,
) -> GrowthReport<T> {
    let g = nl.growth();
    let mut worst = T::zero();
    let mut worst_t = T::zero();
    let phi_max = match nl.spatial() {
        Some(phi) => {
            let mut m = T::zero();
            for i in mesh.interior_nodes() {
                m = m.max(phi[i]);
            }
            m
        }
        None => T::one(),
    };
    let n = t_samples.max(3);
    for k in 0..n {
        let t = -t_max + (t_max + t_max) * real::<T>(k as f64) / real((n - 1) as f64);
        let lhs = (phi_max * nl.psi(t)).abs();
        let rhs = g.a1 + g.a2 * t.abs().powf(g.q - T::one());
        if rhs > T::zero() {
            let ratio = lhs / rhs;
            if ratio > worst {
                worst = ratio;
                worst_t = t;
            }
        } else if lhs > T::zero() {
            worst = T::infinity();
            worst_t = t;
        }
    }
    GrowthReport {
        worst_ratio: worst,
        worst_t,
        pass: worst <= T::one() + real(1e-12),
    }
}

/// `∫_Ω φ` for the nonlinearity's spatial factor (the domain measure when the
/// factor is absent).
pub fn spatial_mass<T: Real>(nl: &Nonlinearity<T>, mesh: &Mesh<T>) -> T {
    match nl.spatial() {
        None => mesh.omega_measure(),
        Some(phi) => interior_integral(mesh, |elem, local| {
            let shape = crate::mesh::shape_values(mesh.dim(), local);
            let mut v = T::zero();
            for k in 0..crate::mesh::nodes_per_element(mesh.dim()) {
                v += shape[k] * phi[elem.nodes[k]];
            }
            v
        }),
    }
}

/// `max{κ, (q (L1+L2)/|Ω|)^{1/(q−p)}}`: the admissible-`rho` threshold of the
/// built-in reference instance.
pub fn rho_lower_bound<T: Real>(kappa: T, q: T, p: T, l1: T, l2: T, omega: T) -> T {
    let second = (q * (l1 + l2) / omega).powf(T::one() / (q - p));
    kappa.max(second)
}

/// Reference instance: capped-power ψ with φ ≡ 1 and `a1 = a2 = 1`.
#[derive(Clone, Debug)]
pub struct Example31Spec<T> {
    pub q: T,
    pub rho: T,
}

impl<T: Real> Example31Spec<T> {
    pub fn nonlinearity(&self) -> Result<Nonlinearity<T>> {
        Nonlinearity::new(
            Profile::CappedPower {
                rho: self.rho,
                q: self.q,
            },
            Growth {
                a1: T::one(),
                a2: T::one(),
                q: self.q,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Domain};

    fn unit_mesh() -> Mesh<f64> {
        build_mesh(Domain::Interval { a: 0.0, b: 1.0 }, 8, 3.0).unwrap()
    }

    #[test]
    fn coefficient_norms_for_constant_weight() {
        let mesh = unit_mesh();
        let a = Coefficient::constant(&mesh, 2.0).unwrap();
        assert_eq!(a.ess_inf(), 2.0);
        assert!((a.l1_norm() - 2.0).abs() < 1e-13);
        assert_eq!(a.linf_norm(), 2.0);
    }

    #[test]
    fn coefficient_rejects_nonpositive_weight() {
        let mesh = unit_mesh();
        assert!(Coefficient::constant(&mesh, 0.0).is_err());
        let mut vals = vec![1.0; mesh.node_count()];
        let some_interior = mesh.interior_nodes().nth(2).unwrap();
        vals[some_interior] = -0.5;
        assert!(Coefficient::from_nodal(&mesh, vals).is_err());
    }

    #[test]
    fn polynomial_primitive_is_exact() {
        // h(t) = 2t  =>  H(ξ) = ξ²
        let nl = Nonlinearity::new(
            Profile::Linear(2.0),
            Growth {
                a1: 0.0,
                a2: 2.0,
                q: 2.0,
            },
        )
        .unwrap();
        assert_eq!(nl.primitive(3.0).unwrap(), 9.0);
        assert_eq!(nl.primitive(-3.0).unwrap(), 9.0);
    }

    #[test]
    fn capped_power_primitive_below_cap() {
        // for 0 ≤ ξ ≤ rho: Ψ(ξ) = ξ + ξ^q/q
        let q: f64 = 4.0;
        let rho: f64 = 2.5;
        let nl = Nonlinearity::new(
            Profile::CappedPower { rho, q },
            Growth {
                a1: 1.0,
                a2: 1.0,
                q,
            },
        )
        .unwrap();
        for &xi in &[0.0, 0.5, 1.0, 2.0, rho] {
            let expect = xi + xi.powi(4) / q;
            assert!((nl.primitive(xi).unwrap() - expect).abs() < 1e-14);
        }
        // ∫_0^rho ψ / rho^p  =  rho^{q−p}/q + 1/rho^{p−1} for p = 2
        let p = 2.0;
        let lhs = nl.primitive(rho).unwrap() / rho.powf(p);
        let rhs = rho.powf(q - p) / q + 1.0 / rho.powf(p - 1.0);
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn numeric_primitive_matches_series_for_cosine() {
        let nl = Nonlinearity::new(
            Profile::Custom {
                eval: Arc::new(|t: f64| t.cos()),
                primitive: None,
            },
            Growth {
                a1: 1.0,
                a2: 0.0,
                q: 2.0,
            },
        )
        .unwrap();
        // independent series for sin(1)
        let mut sin1 = 0.0f64;
        let mut term = 1.0f64;
        for k in 0..20 {
            let n = (2 * k + 1) as f64;
            if k > 0 {
                term *= -1.0 / ((n - 1.0) * n);
            }
            sin1 += term;
        }
        let v = nl.primitive(1.0).unwrap();
        assert!((v - sin1).abs() <= 1e-10);
        assert_eq!(nl.primitive(0.0).unwrap(), 0.0);
    }

    #[test]
    fn primitive_is_odd_for_even_profile() {
        let nl = Nonlinearity::new(
            Profile::Custom {
                eval: Arc::new(|t: f64| t * t),
                primitive: None,
            },
            Growth {
                a1: 0.0,
                a2: 1.0,
                q: 3.0,
            },
        )
        .unwrap();
        let plus = nl.primitive(1.3).unwrap();
        let minus = nl.primitive(-1.3).unwrap();
        assert!((plus + minus).abs() < 1e-12);
    }

    #[test]
    fn growth_check_boundary_cases() {
        let mesh = unit_mesh();
        // h(t) = 1 + |t|³ with a1 = a2 = 1, q = 4: equality, passes
        let ok = Nonlinearity::new(
            Profile::Custom {
                eval: Arc::new(|t: f64| 1.0 + t.abs().powi(3)),
                primitive: None,
            },
            Growth {
                a1: 1.0,
                a2: 1.0,
                q: 4.0,
            },
        )
        .unwrap();
        let rep = growth_check(&ok, &mesh, 10.0, 501);
        assert!(rep.pass);
        assert!((rep.worst_ratio - 1.0).abs() < 1e-12);

        // h(t) = 2 + |t|³ fails at t = 0 with ratio 2
        let bad = Nonlinearity::new(
            Profile::Custom {
                eval: Arc::new(|t: f64| 2.0 + t.abs().powi(3)),
                primitive: None,
            },
            Growth {
                a1: 1.0,
                a2: 1.0,
                q: 4.0,
            },
        )
        .unwrap();
        let rep = growth_check(&bad, &mesh, 10.0, 501);
        assert!(!rep.pass);
        assert!((rep.worst_ratio - 2.0).abs() < 1e-12);
        assert_eq!(rep.worst_t, 0.0);
    }

    #[test]
    fn capped_power_growth_passes_with_unit_constants() {
        let mesh = unit_mesh();
        let spec = Example31Spec { q: 4.0, rho: 2.0 };
        let nl = spec.nonlinearity().unwrap();
        let rep = growth_check(&nl, &mesh, 50.0, 2001);
        assert!(rep.pass, "worst ratio {}", rep.worst_ratio);
    }

    #[test]
    fn capped_power_profile_values() {
        assert_eq!(capped_power_psi(0.0f64, 2.0, 4.0), 1.0);
        // left branch applies at t = rho
        assert_eq!(capped_power_psi(2.0f64, 2.0, 4.0), 1.0 + 8.0);
        // (1+4)(1+8)/(1+9) = 4.5
        assert!((capped_power_psi(3.0f64, 2.0, 4.0) - 4.5).abs() < 1e-15);
        // far tail decays like t^{-2}
        let far = capped_power_psi(1e4f64, 2.0, 4.0);
        assert!(far < 1e-6);
    }

    #[test]
    fn rho_threshold_examples() {
        assert_eq!(rho_lower_bound(1.0f64, 4.0, 2.0, 0.5, 0.5, 1.0), 2.0);
        for &(k, l1, l2, om) in &[(0.3f64, 0.2, 0.1, 1.0), (2.0, 1.0, 3.0, 0.5)] {
            let r = rho_lower_bound(k, 4.0, 2.0, l1, l2, om);
            assert!(r >= k);
        }
    }
}
