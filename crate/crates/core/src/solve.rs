//! Multistart descent with deflation: finds distinct discrete critical
//! points of `J_λ` and re-verifies each candidate against the original
//! residual (never the deflated one) plus a fresh higher-order quadrature.

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::energy::{energy_breakdown, gradient_s, neumann_max, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::kernel::{assemble_table, QuadratureTable};
use crate::mesh::{FracParams, Mesh};
use crate::model::{spatial_mass, Coefficient, Nonlinearity};
use crate::real::{real, Real};
use crate::space::{dual_norm, p_flux, DiscreteFunction, NormAssembly};

/// A fully assembled problem: mesh, quadrature, weight, nonlinearity and the
/// cached norm machinery.
pub struct Instance<T> {
    pub mesh: Arc<Mesh<T>>,
    pub params: FracParams<T>,
    pub table: QuadratureTable<T>,
    pub coeff: Coefficient<T>,
    pub nl: Nonlinearity<T>,
    assembly: NormAssembly<T>,
    precond: Vec<T>,
}

impl<T: Real> Instance<T> {
    pub fn build(
        mesh: Arc<Mesh<T>>,
        params: FracParams<T>,
        table: QuadratureTable<T>,
        coeff: Coefficient<T>,
        nl: Nonlinearity<T>,
    ) -> Result<Self> {
        let assembly = NormAssembly::build(&mesh, &table, &coeff, &params)?;
        let precond = assembly.precond_diag();
        Ok(Self {
            mesh,
            params,
            table,
            coeff,
            nl,
            assembly,
            precond,
        })
    }

    pub fn assembly(&self) -> &NormAssembly<T> {
        &self.assembly
    }

    pub fn function(&self, values: Vec<T>) -> Result<DiscreteFunction<T>> {
        DiscreteFunction::new(self.mesh.clone(), values)
    }

    pub fn t_energy(&self, u: &DiscreteFunction<T>) -> Result<T> {
        Ok(self
            .assembly
            .norm_p(u, &self.table, &self.coeff, &self.params)?
            / self.params.p())
    }

    pub fn s_energy(&self, u: &DiscreteFunction<T>) -> Result<T> {
        crate::energy::s_energy(u, &self.nl)
    }

    pub fn j_value(&self, u: &DiscreteFunction<T>, lambda: T) -> Result<T> {
        Ok(self.t_energy(u)? - lambda * self.s_energy(u)?)
    }

    /// Gradient of `J_λ` with respect to the nodal values.
    pub fn grad_j(&self, u: &DiscreteFunction<T>, lambda: T) -> Result<Vec<T>> {
        let mut g = self
            .assembly
            .norm_p_gradient(u, &self.table, &self.coeff, &self.params)?;
        let p = self.params.p();
        let gs = gradient_s(u, &self.nl)?;
        for (gi, si) in g.iter_mut().zip(gs.iter()) {
            *gi = *gi / p - lambda * *si;
        }
        Ok(g)
    }

    pub fn residual_of(&self, grad: &[T]) -> T {
        dual_norm(grad, self.assembly.phi_norms())
    }

    pub fn weak_residual(&self, u: &DiscreteFunction<T>, lambda: T) -> Result<T> {
        Ok(self.residual_of(&self.grad_j(u, lambda)?))
    }

    /// `‖u − w‖` in the instance norm.
    fn distance(&self, u: &[T], w: &[T]) -> Result<T> {
        let diff: Vec<T> = u.iter().zip(w.iter()).map(|(a, b)| *a - *b).collect();
        let d = self.function(diff)?;
        Ok(self
            .assembly
            .norm_p(&d, &self.table, &self.coeff, &self.params)?
            .powf(T::one() / self.params.p()))
    }

    fn sup_distance_interior(&self, u: &[T], w: &[T]) -> T {
        let mut m = T::zero();
        for i in self.mesh.interior_nodes() {
            m = m.max((u[i] - w[i]).abs());
        }
        m
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveConfig<T> {
    pub lambda: T,
    pub tol: T,
    pub max_iters: usize,
    pub starts: usize,
    pub deflation_shift: T,
    pub deflation_power: T,
    pub distinct_tol: T,
    pub seed: u64,
    pub k_target: usize,
    /// Constant level of the plateau start (from a certificate's δ when one
    /// is available).
    pub delta_hint: Option<T>,
    /// Norm scale separating the small-energy region (a certificate's ε).
    pub epsilon_hint: Option<T>,
}

impl<T: Real> SolveConfig<T> {
    pub fn new(lambda: T, p: T, seed: u64) -> Self {
        Self {
            lambda,
            tol: real(1e-6),
            max_iters: 20_000,
            starts: 12,
            deflation_shift: T::one(),
            deflation_power: p,
            distinct_tol: real(1e-3),
            seed,
            k_target: 3,
            delta_hint: None,
            epsilon_hint: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= T::zero() && self.lambda.is_finite()) {
            return Err(Error::InvalidInput("lambda must be finite and nonnegative".into()));
        }
        if !(self.tol > T::zero()) || !(self.distinct_tol > T::zero()) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DescendOutcome<T> {
    pub values: Vec<T>,
    pub j_value: T,
    pub residual: T,
    pub iterations: usize,
    pub converged: bool,
    /// Armijo guarantees monotone objective decrease; recorded per run.
    pub monotone: bool,
}

/// Multiplicative deflation factor `Π_w (1 + shift/‖u−w‖^power)` and the
/// gradient of the deflated objective `J·M`.
fn deflated_objective<T: Real>(
    inst: &Instance<T>,
    u: &DiscreteFunction<T>,
    lambda: T,
    deflation: &[Vec<T>],
    shift: T,
    power: T,
) -> Result<T> {
    let j = inst.j_value(u, lambda)?;
    if deflation.is_empty() {
        return Ok(j);
    }
    let mut m = T::one();
    for w in deflation {
        let d = inst.distance(u.values(), w)?;
        if !(d > T::zero()) {
            return Ok(T::infinity() * j.signum().max(T::one()));
        }
        m = m * (T::one() + shift / d.powf(power));
    }
    Ok(j * m)
}

fn deflated_gradient<T: Real>(
    inst: &Instance<T>,
    u: &DiscreteFunction<T>,
    lambda: T,
    grad_j: &[T],
    deflation: &[Vec<T>],
    shift: T,
    power: T,
) -> Result<Vec<T>> {
    if deflation.is_empty() {
        return Ok(grad_j.to_vec());
    }
    let j = inst.j_value(u, lambda)?;
    let p = inst.params.p();
    let mut m = T::one();
    let mut factors = Vec::with_capacity(deflation.len());
    for w in deflation {
        let d = inst.distance(u.values(), w)?;
        let d = d.max(real(1e-14));
        let f = T::one() + shift / d.powf(power);
        factors.push((d, f));
        m = m * f;
    }
    // ∇(J·M) = M ∇J + J Σ_w (M/f_w) ∇f_w
    let mut out: Vec<T> = grad_j.iter().map(|&g| g * m).collect();
    for (w, (d, f)) in deflation.iter().zip(factors.iter()) {
        let diff: Vec<T> = u
            .values()
            .iter()
            .zip(w.iter())
            .map(|(a, b)| *a - *b)
            .collect();
        let dfun = inst.function(diff)?;
        let gnp = inst
            .assembly
            .norm_p_gradient(&dfun, &inst.table, &inst.coeff, &inst.params)?;
        // ∇d = ∇(‖u−w‖^p)/(p d^{p−1}); ∇f = −shift·power·d^{−power−1}·∇d
        let scale = -shift * power * d.powf(-power - T::one()) / (p * d.powf(p - T::one()));
        let coeff = j * m / *f * scale;
        for (o, g) in out.iter_mut().zip(gnp.iter()) {
            *o += coeff * *g;
        }
    }
    Ok(out)
}

/// Preconditioned gradient descent with Armijo backtracking on the (possibly
/// deflated) objective. Stops as soon as the dual residual of the original
/// gradient, checked every iteration, drops to the tolerance.
pub fn descend<T: Real>(
    inst: &Instance<T>,
    u0: Vec<T>,
    cfg: &SolveConfig<T>,
    deflation: &[Vec<T>],
) -> Result<DescendOutcome<T>> {
    cfg.validate()?;
    let lambda = cfg.lambda;
    let shift = cfg.deflation_shift;
    let power = cfg.deflation_power;
    let mut u = inst.function(u0)?;
    let mut grad = inst.grad_j(&u, lambda)?;
    let mut residual = inst.residual_of(&grad);
    let mut obj = deflated_objective(inst, &u, lambda, deflation, shift, power)?;
    let mut step = T::one();
    let mut iterations = 0usize;
    let mut monotone = true;
    let c1 = real::<T>(1e-4);
    let mut prev: Option<(Vec<T>, Vec<T>)> = None; // (values, deflated gradient)

    while residual > cfg.tol && iterations < cfg.max_iters {
        let gd = deflated_gradient(inst, &u, lambda, &grad, deflation, shift, power)?;
        let dir: Vec<T> = gd
            .iter()
            .zip(inst.precond.iter())
            .map(|(&g, &d)| -g / d)
            .collect();
        let slope: T = gd.iter().zip(dir.iter()).map(|(&g, &d)| g * d).sum();
        if !(slope < T::zero()) {
            break; // no descent direction left
        }
        // Barzilai–Borwein step seed in the preconditioned metric, with the
        // Armijo backtracking below as the safeguard
        let mut alpha = step;
        if let Some((pu, pg)) = &prev {
            let mut sy = T::zero();
            let mut ypy = T::zero();
            for i in 0..gd.len() {
                let s = u.values()[i] - pu[i];
                let y = gd[i] - pg[i];
                sy += s * y;
                ypy += y * y / inst.precond[i];
            }
            if sy > T::zero() && ypy > T::zero() {
                let bb = sy / ypy;
                if bb.is_finite() {
                    alpha = bb.max(real(1e-12)).min(real(1e6));
                }
            }
        }
        prev = Some((u.values().to_vec(), gd));
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<T> = u
                .values()
                .iter()
                .zip(dir.iter())
                .map(|(&a, &d)| a + alpha * d)
                .collect();
            let tf = inst.function(trial)?;
            let tobj = deflated_objective(inst, &tf, lambda, deflation, shift, power)?;
            if tobj.is_finite() && tobj <= obj + c1 * alpha * slope {
                if tobj > obj {
                    monotone = false;
                }
                u = tf;
                obj = tobj;
                accepted = true;
                break;
            }
            alpha = alpha * real(0.5);
        }
        if !accepted {
            break;
        }
        step = (alpha * real(2.0)).min(real(1e6));
        grad = inst.grad_j(&u, lambda)?;
        residual = inst.residual_of(&grad);
        iterations += 1;
    }

    let j = inst.j_value(&u, lambda)?;
    Ok(DescendOutcome {
        values: u.into_values(),
        j_value: j,
        residual,
        iterations,
        converged: residual <= cfg.tol,
        monotone,
    })
}

/// Roots of the scalar section `c ↦ J_λ(c·1)` located by sign scan plus
/// bisection; cheap starts that hit constant-shaped critical points exactly
/// when the weight and the nonlinearity are spatially uniform.
pub fn constant_section_roots<T: Real>(
    inst: &Instance<T>,
    lambda: T,
    c_max: T,
    grid: usize,
) -> Vec<T> {
    let p = inst.params.p();
    let a_l1 = inst.coeff.l1_norm();
    let phi_mass = spatial_mass(&inst.nl, &inst.mesh);
    let dj = |c: T| p_flux(c, p) * a_l1 - lambda * inst.nl.psi(c) * phi_mass;
    let n = grid.max(16);
    let mut roots: Vec<T> = Vec::new();
    let mut prev_c = -c_max;
    let mut prev_v = dj(prev_c);
    for k in 1..=n {
        let c = -c_max + (c_max + c_max) * real::<T>(k as f64) / real(n as f64);
        let v = dj(c);
        if v == T::zero() {
            roots.push(c);
        } else if prev_v != T::zero() && v.signum() != prev_v.signum() {
            let (mut lo, mut hi) = (prev_c, c);
            let (mut flo, _) = (prev_v, v);
            for _ in 0..200 {
                let mid = (lo + hi) * real(0.5);
                let fm = dj(mid);
                if fm == T::zero() {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push((lo + hi) * real(0.5));
        }
        prev_c = c;
        prev_v = v;
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < real::<T>(1e-12) * c_max);
    roots
}

#[derive(Clone, Debug)]
pub struct SolvedPoint<T> {
    pub values: Vec<T>,
    pub j_value: T,
    pub residual: T,
    pub fresh_residual: T,
    pub neumann_max: T,
    pub iterations: usize,
    pub start_index: usize,
}

#[derive(Clone, Debug)]
pub struct FailureRecord<T> {
    pub start_index: usize,
    pub residual: T,
    pub iterations: usize,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct SolveReport<T> {
    pub lambda: T,
    pub seed: u64,
    pub tol: T,
    pub distinct_tol: T,
    pub k_target: usize,
    pub points: Vec<SolvedPoint<T>>,
    pub failures: Vec<FailureRecord<T>>,
    pub pairwise_sup_distances: Vec<(usize, usize, T)>,
    pub shortfall: bool,
    /// Wall-clock time; intentionally left out of serialized reports so that
    /// identical runs produce identical bytes.
    pub wall_ms: u128,
}

/// Independent verification of a candidate: the weak residual recomputed on
/// a fresh table at doubled Gauss order, the energy breakdown, and the
/// largest exterior Neumann value.
pub struct Verification<T> {
    pub fresh_residual: T,
    pub energy: EnergyBreakdown<T>,
    pub neumann_max: T,
}

pub fn verify_point<T: Real>(
    inst: &Instance<T>,
    lambda: T,
    u: &DiscreteFunction<T>,
) -> Result<Verification<T>> {
    let fresh = fresh_table(inst)?;
    verify_point_with(inst, lambda, u, &fresh.0, &fresh.1)
}

fn fresh_table<T: Real>(inst: &Instance<T>) -> Result<(QuadratureTable<T>, NormAssembly<T>)> {
    let table = assemble_table(
        &inst.mesh,
        &inst.params,
        inst.table.order() * 2,
        inst.table.depth(),
    )?;
    let assembly = NormAssembly::build(&inst.mesh, &table, &inst.coeff, &inst.params)?;
    Ok((table, assembly))
}

fn verify_point_with<T: Real>(
    inst: &Instance<T>,
    lambda: T,
    u: &DiscreteFunction<T>,
    fresh: &QuadratureTable<T>,
    fresh_assembly: &NormAssembly<T>,
) -> Result<Verification<T>> {
    let fresh_residual = crate::energy::weak_residual(
        u,
        &inst.coeff,
        &inst.nl,
        lambda,
        fresh,
        &inst.params,
        fresh_assembly.phi_norms(),
    )?;
    let energy = energy_breakdown(u, &inst.coeff, &inst.nl, lambda, &inst.table, &inst.params)?;
    let nmax = neumann_max(u, &inst.params, inst.table.order())?;
    Ok(Verification {
        fresh_residual,
        energy,
        neumann_max: nmax,
    })
}

/// Builds the start list: the origin, the ±δ plateaus, the roots of the
/// constant section, then seeded random perturbations scaled to the three
/// energy regions.
fn build_starts<T: Real>(inst: &Instance<T>, cfg: &SolveConfig<T>) -> Result<Vec<Vec<T>>> {
    let n = inst.mesh.node_count();
    let delta = cfg.delta_hint.unwrap_or_else(T::one);
    let t_delta = {
        let ud = DiscreteFunction::constant(inst.mesh.clone(), delta);
        inst.t_energy(&ud)?
    };
    let epsilon = cfg.epsilon_hint.unwrap_or_else(|| {
        t_delta.powf(T::one() / inst.params.p()) * real(0.25)
    });

    let mut starts: Vec<Vec<T>> = Vec::new();
    starts.push(vec![T::zero(); n]);
    starts.push(vec![delta; n]);
    starts.push(vec![-delta; n]);
    for root in constant_section_roots(inst, cfg.lambda, delta.abs().max(T::one()) * real(4.0), 4001)
    {
        starts.push(vec![root; n]);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let norm_targets = [
        epsilon,
        (epsilon + t_delta) * real(0.5),
        t_delta * real(2.0),
    ];
    let mut k = 0usize;
    while starts.len() < cfg.starts.max(1) {
        let raw: Vec<T> = (0..n)
            .map(|_| real::<T>(rng.random_range(-1.0..1.0)))
            .collect();
        let f = inst.function(raw.clone())?;
        let nr = inst
            .assembly
            .norm_p(&f, &inst.table, &inst.coeff, &inst.params)?
            .powf(T::one() / inst.params.p());
        let target = norm_targets[k % norm_targets.len()];
        k += 1;
        if !(nr > T::zero()) {
            continue;
        }
        starts.push(raw.into_iter().map(|v| v * target / nr).collect());
    }
    Ok(starts)
}

/// Deflated multistart search for `k_target` distinct verified critical
/// points. Candidates are accepted on the original residual only, and every
/// accepted point is re-verified on a fresh doubled-order table.
pub fn deflate_and_search<T: Real>(inst: &Instance<T>, cfg: &SolveConfig<T>) -> Result<SolveReport<T>> {
    cfg.validate()?;
    if cfg.k_target == 0 {
        return Err(Error::InvalidInput("k_target must be at least 1".into()));
    }
    let clock = Instant::now();
    let starts = build_starts(inst, cfg)?;
    let mut accepted: Vec<Vec<T>> = Vec::new();
    let mut points: Vec<SolvedPoint<T>> = Vec::new();
    let mut failures: Vec<FailureRecord<T>> = Vec::new();
    let mut fresh: Option<(QuadratureTable<T>, NormAssembly<T>)> = None;

    for (start_index, start) in starts.into_iter().enumerate() {
        if points.len() >= cfg.k_target {
            break;
        }
        let outcome = descend(inst, start, cfg, &accepted)?;
        if !outcome.converged {
            failures.push(FailureRecord {
                start_index,
                residual: outcome.residual,
                iterations: outcome.iterations,
                reason: "did not reach the residual tolerance".into(),
            });
            continue;
        }
        // acceptance uses the original residual; the descent already reports
        // it, but recompute defensively on the candidate values
        let candidate = inst.function(outcome.values.clone())?;
        let residual = inst.weak_residual(&candidate, cfg.lambda)?;
        if residual > cfg.tol {
            failures.push(FailureRecord {
                start_index,
                residual,
                iterations: outcome.iterations,
                reason: "re-check of the original residual failed".into(),
            });
            continue;
        }
        let duplicate = accepted
            .iter()
            .any(|w| inst.sup_distance_interior(&outcome.values, w) < cfg.distinct_tol);
        if duplicate {
            failures.push(FailureRecord {
                start_index,
                residual,
                iterations: outcome.iterations,
                reason: "within the distinctness threshold of an accepted point".into(),
            });
            continue;
        }
        if fresh.is_none() {
            fresh = Some(fresh_table(inst)?);
        }
        let (ft, fa) = fresh.as_ref().unwrap();
        let verification = verify_point_with(inst, cfg.lambda, &candidate, ft, fa)?;
        accepted.push(outcome.values.clone());
        points.push(SolvedPoint {
            values: outcome.values,
            j_value: outcome.j_value,
            residual,
            fresh_residual: verification.fresh_residual,
            neumann_max: verification.neumann_max,
            iterations: outcome.iterations,
            start_index,
        });
    }

    let mut pairwise = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            pairwise.push((
                i,
                j,
                inst.sup_distance_interior(&points[i].values, &points[j].values),
            ));
        }
    }

    Ok(SolveReport {
        lambda: cfg.lambda,
        seed: cfg.seed,
        tol: cfg.tol,
        distinct_tol: cfg.distinct_tol,
        k_target: cfg.k_target,
        shortfall: points.len() < cfg.k_target,
        points,
        failures,
        pairwise_sup_distances: pairwise,
        wall_ms: clock.elapsed().as_millis(),
    })
}
