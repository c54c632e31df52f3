//! Command implementations: config → core calls → report files.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use fracp::certify::{
    certify_example31, corollary31, interval_case1, interval_case2, CaseIInputs, CaseIIInputs,
    Certificate, MuEnvelope,
};
use fracp::kernel::{assemble_table, tail_radius};
use fracp::mesh::{build_mesh, CaseTag, Domain, FracParams, Mesh};
use fracp::model::{rho_lower_bound, Coefficient, Example31Spec, Growth, Nonlinearity, Profile};
use fracp::report::{to_json_string, AssembleReport};
use fracp::solve::{deflate_and_search, Instance, SolveConfig};
use fracp::space::{estimate_c, estimate_cq, AscentConfig, EmbeddingConstants};

use crate::config::Config;

pub struct Failure {
    pub message: String,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            message: e.to_string(),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn fail(msg: impl Into<String>) -> Failure {
    Failure {
        message: msg.into(),
    }
}

pub struct Base {
    pub mesh: Arc<Mesh<f64>>,
    pub params: FracParams<f64>,
    pub table: fracp::kernel::QuadratureTable<f64>,
    pub coeff: Coefficient<f64>,
    pub order: usize,
    pub depth: usize,
}

pub fn build_base(cfg: &Config) -> Result<Base> {
    let dim = cfg.usize("params.dim", 1)?;
    let s = cfg.required_f64("params.s")?;
    let p = cfg.required_f64("params.p")?;
    let params = FracParams::new(dim, s, p)?;

    let domain_spec = cfg.string("mesh.domain", "0,1");
    let nums: Vec<f64> = domain_spec
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| fail(format!("mesh.domain: cannot parse `{domain_spec}`")))?;
    let domain = match (dim, nums.len()) {
        (1, 2) => Domain::Interval {
            a: nums[0],
            b: nums[1],
        },
        (2, 4) => Domain::Rect {
            a: [nums[0], nums[1]],
            b: [nums[2], nums[3]],
        },
        _ => {
            return Err(fail(format!(
                "mesh.domain needs {} numbers for dimension {dim}",
                2 * dim
            )))
        }
    };

    let n = cfg.usize("mesh.n", 64)?;
    let r_ext = match cfg.raw("mesh.r_ext") {
        Some(_) => cfg.required_f64("mesh.r_ext")?,
        None => {
            let tol = cfg.f64("mesh.tail_tol", 1e-8)?;
            let (a, b) = domain.bounds(0);
            let h_min = (b - a) / n as f64;
            let r = tail_radius(&params, tol, h_min)?;
            // the scan starts at the spacing; the mesh needs room beyond Ω
            let r = r.max(domain.diameter() * 2.0);
            cfg.resolve("mesh.r_ext", r);
            r
        }
    };

    let order = cfg.usize("quad.order", 6)?;
    let depth = cfg.usize("quad.depth", 8)?;
    let mesh = Arc::new(build_mesh(domain, n, r_ext)?);
    let table = assemble_table(&mesh, &params, order, depth)?;
    let coeff_value = cfg.f64("coeff.value", 1.0)?;
    let coeff = Coefficient::constant(&mesh, coeff_value)?;
    Ok(Base {
        mesh,
        params,
        table,
        coeff,
        order,
        depth,
    })
}

/// Builds the nonlinearity; `auto` for the capped-power threshold resolves
/// against the derived constants, so callers pass those in when available.
pub fn build_nonlinearity(cfg: &Config, base: &Base, constants: Option<&EmbeddingConstants<f64>>) -> Result<Nonlinearity<f64>> {
    let kind = cfg.string("nonlinearity.kind", "capped_power");
    match kind.as_str() {
        "capped_power" => {
            let q = cfg.f64("nonlinearity.q", 4.0)?;
            let rho_raw = cfg.string("nonlinearity.rho", "auto");
            let rho = if rho_raw == "auto" {
                let consts = constants.ok_or_else(|| {
                    fail("nonlinearity.rho = auto requires embedding constants (run through a command that estimates them)")
                })?;
                let c1 = lookup_cq(consts, 1.0)?;
                let cq = lookup_cq(consts, q)?;
                let (kappa, l1, l2) =
                    fracp::certify::case2_constants(base.params.p(), q, base.coeff.l1_norm(), c1, cq);
                let rho = rho_lower_bound(kappa, q, base.params.p(), l1, l2, base.mesh.omega_measure())
                    + 0.1;
                cfg.resolve("nonlinearity.rho", rho);
                rho
            } else {
                rho_raw
                    .parse::<f64>()
                    .map_err(|_| fail(format!("nonlinearity.rho: `{rho_raw}` is not a number")))?
            };
            Ok(Example31Spec { q, rho }.nonlinearity()?)
        }
        "constant" => {
            let v = cfg.f64("nonlinearity.value", 1.0)?;
            let growth = growth_from(cfg, v.abs(), 0.0, 2.0)?;
            Ok(Nonlinearity::new(Profile::Constant(v), growth)?)
        }
        "linear" => {
            let v = cfg.f64("nonlinearity.value", 1.0)?;
            let growth = growth_from(cfg, 0.0, v.abs(), 2.0)?;
            Ok(Nonlinearity::new(Profile::Linear(v), growth)?)
        }
        "polynomial" => {
            let coeffs = cfg.f64_list("nonlinearity.coeffs", &[0.0, 1.0])?;
            let default_q = coeffs.len() as f64;
            let growth = growth_from(cfg, 1.0, 1.0, default_q.max(2.0))?;
            Ok(Nonlinearity::new(Profile::Polynomial(coeffs), growth)?)
        }
        other => Err(fail(format!("nonlinearity.kind: unknown kind `{other}`"))),
    }
}

fn growth_from(cfg: &Config, a1: f64, a2: f64, q: f64) -> Result<Growth<f64>> {
    Ok(Growth {
        a1: cfg.f64("nonlinearity.growth_a1", a1)?,
        a2: cfg.f64("nonlinearity.growth_a2", a2)?,
        q: cfg.f64("nonlinearity.growth_q", q)?,
    })
}

fn lookup_cq(consts: &EmbeddingConstants<f64>, q: f64) -> Result<f64> {
    consts
        .cq
        .iter()
        .find(|(qq, _)| (*qq - q).abs() < 1e-12)
        .map(|(_, v)| *v)
        .ok_or_else(|| fail(format!("embedding constant for q = {q} was not estimated; add it to embed.q_list")))
}

fn ascent_config(cfg: &Config) -> Result<AscentConfig<f64>> {
    Ok(AscentConfig {
        starts: cfg.usize("embed.starts", 50)?,
        max_iters: cfg.usize("embed.max_iters", 5000)?,
        grad_tol: cfg.f64("embed.grad_tol", 1e-9)?,
        seed: cfg.seed()?,
    })
}

/// Estimates the constants the active case needs plus everything in
/// `embed.q_list`.
pub fn compute_constants(cfg: &Config, base: &Base, extra_q: &[f64]) -> Result<EmbeddingConstants<f64>> {
    let case = base.params.case_tag();
    let mut c = None;
    let mut c_converged = true;
    if case == CaseTag::CaseI {
        let acfg = AscentConfig {
            starts: cfg.usize("embed.starts", 50)?,
            max_iters: cfg.usize("embed.max_iters", 5000)?,
            grad_tol: cfg.f64("embed.grad_tol", 1e-9)?,
            seed: 0, // the sup-norm route is deterministic
        };
        let (value, conv) = estimate_c(&base.mesh, &base.coeff, &base.table, &base.params, &acfg)?;
        c = Some(value);
        c_converged = conv;
    }
    let mut q_list = cfg.f64_list("embed.q_list", &[1.0])?;
    for q in extra_q {
        if !q_list.iter().any(|x| (x - q).abs() < 1e-12) {
            q_list.push(*q);
        }
    }
    let mut cq = Vec::new();
    let mut cq_converged = true;
    if !q_list.is_empty() && case != CaseTag::Neither {
        let acfg = ascent_config(cfg)?;
        for q in q_list {
            let (value, conv) =
                estimate_cq(&base.mesh, &base.coeff, &base.table, &base.params, q, &acfg)?;
            cq.push((q, value));
            cq_converged &= conv;
        }
    }
    Ok(EmbeddingConstants {
        c,
        cq,
        mesh_n: base.mesh.resolution(),
        r_ext: base.mesh.r_ext(),
        c_converged,
        cq_converged,
    })
}

fn write_report(path: &Path, bytes: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| fail(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    Ok(())
}

pub fn cmd_assemble(cfg: &Config, out: &Path) -> Result<i32> {
    let base = build_base(cfg)?;
    let mut csv = Vec::new();
    base.mesh.write_csv(&mut csv)?;
    write_report(
        &out.join("mesh.csv"),
        std::str::from_utf8(&csv).expect("csv is utf-8"),
    )?;
    let mut pairs_csv = Vec::new();
    base.table.write_pairs_csv(&mut pairs_csv)?;
    write_report(
        &out.join("pairs.csv"),
        std::str::from_utf8(&pairs_csv).expect("csv is utf-8"),
    )?;
    let report = AssembleReport {
        dim: base.mesh.dim(),
        mesh_n: base.mesh.resolution(),
        r_ext: base.mesh.r_ext(),
        nodes: base.mesh.node_count(),
        elements: base.mesh.elements().len(),
        interior_elements: base.mesh.interior_elements().count(),
        pair_records: base.table.pairs().len(),
        samples: base.table.sample_count(),
        order: base.order,
        depth: base.depth,
        min_sample_dist: base.table.min_sample_dist(),
        tail_rel: base.table.tail_rel(),
        tail_mass_bound: base.table.tail_mass_bound(),
        config: cfg.effective(),
    };
    write_report(&out.join("assemble.json"), &to_json_string(&report))?;
    println!(
        "assemble: wrote mesh.csv, pairs.csv and assemble.json to {}",
        out.display()
    );
    Ok(0)
}

pub fn cmd_constants(cfg: &Config, out: &Path) -> Result<i32> {
    let base = build_base(cfg)?;
    let consts = compute_constants(cfg, &base, &[])?;
    let mut report = consts.to_report(base.params.case_tag().to_string());
    report.config = cfg.effective();
    write_report(&out.join("constants.json"), &to_json_string(&report))?;
    println!("constants: wrote constants.json to {}", out.display());
    Ok(0)
}

/// Builds the certificate for `certify.case`. Returns the certificate plus
/// the constants it consumed.
pub fn build_certificate(
    cfg: &Config,
    base: &Base,
) -> Result<(Certificate<f64>, EmbeddingConstants<f64>, Nonlinearity<f64>)> {
    let case = cfg.string("certify.case", "example31");
    match case.as_str() {
        "case1" => {
            let consts = compute_constants(cfg, base, &[])?;
            let c = consts
                .c
                .ok_or_else(|| fail("certify.case = case1 requires the sup-norm regime (N < s*p, p >= 2)"))?;
            let nl = build_nonlinearity(cfg, base, Some(&consts))?;
            let gamma = cfg.required_f64("certify.gamma")?;
            let eta = cfg.required_f64("certify.eta")?;
            let t_exp = cfg.required_f64("certify.t")?;
            let mu = MuEnvelope::Constant(cfg.f64("certify.mu", 1.0)?);
            let t_max = cfg.f64("certify.t_max", 10.0 * gamma.max(eta))?;
            let cert = interval_case1(
                &CaseIInputs { gamma, eta, t_exp },
                c,
                &mu,
                &base.coeff,
                &nl,
                &base.mesh,
                &base.params,
                t_max,
            )?;
            Ok((cert, consts, nl))
        }
        "case2" => {
            let q = cfg.f64("nonlinearity.growth_q", cfg.f64("nonlinearity.q", 4.0)?)?;
            let consts = compute_constants(cfg, base, &[1.0, q])?;
            let nl = build_nonlinearity(cfg, base, Some(&consts))?;
            let c1 = lookup_cq(&consts, 1.0)?;
            let cq = lookup_cq(&consts, nl.growth().q)?;
            let epsilon = cfg.required_f64("certify.epsilon")?;
            let delta = cfg.required_f64("certify.delta")?;
            let b = cfg.required_f64("certify.b")?;
            let t_exp = cfg.required_f64("certify.t")?;
            let t_max = cfg.f64("certify.t_max", 10.0 * delta.max(1.0))?;
            let cert = interval_case2(
                &CaseIIInputs {
                    epsilon,
                    delta,
                    b,
                    t_exp,
                },
                c1,
                cq,
                &base.coeff,
                &nl,
                &base.mesh,
                &base.params,
                t_max,
            )?;
            Ok((cert, consts, nl))
        }
        "corollary" => {
            let q = cfg.f64("nonlinearity.growth_q", cfg.f64("nonlinearity.q", 4.0)?)?;
            let consts = compute_constants(cfg, base, &[1.0, q])?;
            let nl = build_nonlinearity(cfg, base, Some(&consts))?;
            let c1 = lookup_cq(&consts, 1.0)?;
            let cq = lookup_cq(&consts, nl.growth().q)?;
            let delta = cfg.required_f64("certify.delta")?;
            let beta = cfg.f64("certify.beta", (base.params.p() - 1.0) / 2.0)?;
            let cert = corollary31(
                &nl,
                delta,
                beta,
                c1,
                cq,
                &base.coeff,
                &base.mesh,
                &base.params,
            )?;
            Ok((cert, consts, nl))
        }
        "example31" => {
            let q = cfg.f64("nonlinearity.q", 4.0)?;
            let consts = compute_constants(cfg, base, &[1.0, q])?;
            let nl = build_nonlinearity(cfg, base, Some(&consts))?;
            let rho = match nl.profile() {
                Profile::CappedPower { rho, .. } => *rho,
                _ => return Err(fail("certify.case = example31 requires nonlinearity.kind = capped_power")),
            };
            let c1 = lookup_cq(&consts, 1.0)?;
            let cq = lookup_cq(&consts, q)?;
            let cert = certify_example31(
                &Example31Spec { q, rho },
                c1,
                cq,
                &base.coeff,
                &base.mesh,
                &base.params,
            )?;
            Ok((cert, consts, nl))
        }
        other => Err(fail(format!("certify.case: unknown case `{other}`"))),
    }
}

pub fn cmd_certify(cfg: &Config, out: &Path) -> Result<i32> {
    let base = build_base(cfg)?;
    let (cert, _, _) = build_certificate(cfg, &base)?;
    let mut report = cert.to_report();
    report.config = cfg.effective();
    write_report(&out.join("certificate.json"), &to_json_string(&report))?;
    if cert.all_pass() {
        println!("certify: all hypotheses hold; wrote certificate.json to {}", out.display());
        Ok(0)
    } else {
        println!(
            "certify: hypothesis check failed; certificate with fail flags written to {}",
            out.display()
        );
        Ok(2)
    }
}

fn solve_config(cfg: &Config, base: &Base, lambda: f64) -> Result<SolveConfig<f64>> {
    let p = base.params.p();
    let mut sc = SolveConfig::new(lambda, p, cfg.seed()?);
    sc.tol = cfg.f64("solve.tol", 1e-6)?;
    sc.max_iters = cfg.usize("solve.max_iters", 20_000)?;
    sc.starts = cfg.usize("solve.starts", 12)?;
    sc.k_target = cfg.usize("solve.k_target", 3)?;
    sc.deflation_shift = cfg.f64("solve.deflation_shift", 1.0)?;
    let power = cfg.string("solve.deflation_power", "auto");
    sc.deflation_power = if power == "auto" {
        cfg.resolve("solve.deflation_power", p);
        p
    } else {
        power
            .parse()
            .map_err(|_| fail(format!("solve.deflation_power: `{power}` is not a number")))?
    };
    sc.distinct_tol = cfg.f64("solve.distinct_tol", 1e-3)?;
    Ok(sc)
}

/// δ-plateau hint for the start list, derived from the config alone so that
/// a rerun with an explicit λ reproduces the same report.
fn delta_hint(cfg: &Config, nl: &Nonlinearity<f64>) -> Result<f64> {
    match nl.profile() {
        Profile::CappedPower { rho, .. } => Ok(*rho),
        _ => Ok(cfg.f64("certify.delta", 1.0)?),
    }
}

fn resolve_lambda(cfg: &Config, base: &Base) -> Result<(f64, Option<(Certificate<f64>, EmbeddingConstants<f64>)>)> {
    let raw = cfg.string("solve.lambda", "auto");
    if raw == "auto" {
        // certificate keys feed only the resolved λ, not the solve report
        let snap = cfg.snapshot();
        let (cert, consts, _) = build_certificate(cfg, base)?;
        let rho_resolved = cfg.effective().get("nonlinearity.rho").cloned();
        cfg.restore(snap);
        if let Some(r) = rho_resolved {
            cfg.resolve("nonlinearity.rho", r);
        }
        match cert.lambda_geometric_mean() {
            Some(l) => {
                cfg.resolve("solve.lambda", l);
                Ok((l, Some((cert, consts))))
            }
            None => Err(fail(
                "solve.lambda = auto requires a certified interval, but a hypothesis check failed",
            )),
        }
    } else {
        let l: f64 = raw
            .parse()
            .map_err(|_| fail(format!("solve.lambda: `{raw}` is not a number")))?;
        Ok((l, None))
    }
}

fn write_solution_csvs(
    out: &Path,
    mesh: &Mesh<f64>,
    points: &[fracp::solve::SolvedPoint<f64>],
) -> Result<()> {
    for (k, point) in points.iter().enumerate() {
        let mut file = Vec::new();
        if mesh.dim() == 1 {
            writeln!(file, "node,x,u,interior").unwrap();
            for (i, p) in mesh.nodes().iter().enumerate() {
                writeln!(
                    file,
                    "{},{},{},{}",
                    i,
                    p[0],
                    point.values[i],
                    mesh.is_interior_node(i) as u8
                )
                .unwrap();
            }
        } else {
            writeln!(file, "node,x,y,u,interior").unwrap();
            for (i, p) in mesh.nodes().iter().enumerate() {
                writeln!(
                    file,
                    "{},{},{},{},{}",
                    i,
                    p[0],
                    p[1],
                    point.values[i],
                    mesh.is_interior_node(i) as u8
                )
                .unwrap();
            }
        }
        write_report(
            &out.join(format!("solution_{k:03}.csv")),
            std::str::from_utf8(&file).expect("csv is utf-8"),
        )?;
    }
    Ok(())
}

pub fn cmd_solve(cfg: &Config, out: &Path) -> Result<i32> {
    let base = build_base(cfg)?;
    let (lambda, _) = resolve_lambda(cfg, &base)?;
    let nl = build_nonlinearity(cfg, &base, None).or_else(|_| {
        // rho = auto without a certificate pass: estimate constants directly
        let consts = compute_constants(cfg, &base, &[1.0, cfg.f64("nonlinearity.q", 4.0)?])?;
        build_nonlinearity(cfg, &base, Some(&consts))
    })?;
    let mut sc = solve_config(cfg, &base, lambda)?;
    sc.delta_hint = Some(delta_hint(cfg, &nl)?);
    let instance = Instance::build(
        base.mesh.clone(),
        base.params,
        base.table,
        base.coeff,
        nl,
    )?;
    let solve_report = deflate_and_search(&instance, &sc)?;
    let mut json = solve_report.to_report();
    json.config = cfg.effective();
    write_report(&out.join("solve.json"), &to_json_string(&json))?;
    write_solution_csvs(out, &base.mesh, &solve_report.points)?;
    println!(
        "solve: {} point(s){}; wrote solve.json to {}",
        solve_report.points.len(),
        if solve_report.shortfall {
            " (shortfall)"
        } else {
            ""
        },
        out.display()
    );
    Ok(0)
}

pub fn cmd_example31(cfg: &Config, out: &Path) -> Result<i32> {
    let base = build_base(cfg)?;
    // constants
    let q = cfg.f64("nonlinearity.q", 4.0)?;
    let consts = compute_constants(cfg, &base, &[1.0, q])?;
    let mut creport = consts.to_report(base.params.case_tag().to_string());
    creport.config = cfg.effective();
    write_report(&out.join("constants.json"), &to_json_string(&creport))?;

    // certificate
    let nl = build_nonlinearity(cfg, &base, Some(&consts))?;
    let rho = match nl.profile() {
        Profile::CappedPower { rho, .. } => *rho,
        _ => return Err(fail("example31 requires nonlinearity.kind = capped_power")),
    };
    let c1 = lookup_cq(&consts, 1.0)?;
    let cq = lookup_cq(&consts, q)?;
    let cert = certify_example31(
        &Example31Spec { q, rho },
        c1,
        cq,
        &base.coeff,
        &base.mesh,
        &base.params,
    )?;
    let mut certreport = cert.to_report();
    certreport.config = cfg.effective();
    write_report(&out.join("certificate.json"), &to_json_string(&certreport))?;
    if !cert.all_pass() {
        println!("example31: hypothesis check failed; certificate written to {}", out.display());
        return Ok(2);
    }

    // solve at the canonical interior point of the certified interval
    let lambda = cert.lambda_geometric_mean().expect("interval certified");
    cfg.resolve("solve.lambda", lambda);
    let mut sc = solve_config(cfg, &base, lambda)?;
    sc.delta_hint = Some(rho);
    let instance = Instance::build(
        base.mesh.clone(),
        base.params,
        base.table,
        base.coeff,
        nl,
    )?;
    let solve_report = deflate_and_search(&instance, &sc)?;
    let mut json = solve_report.to_report();
    json.config = cfg.effective();
    write_report(&out.join("solve.json"), &to_json_string(&json))?;
    write_solution_csvs(out, &base.mesh, &solve_report.points)?;
    println!(
        "example31: {} point(s){}; wrote constants.json, certificate.json, solve.json to {}",
        solve_report.points.len(),
        if solve_report.shortfall {
            " (shortfall)"
        } else {
            ""
        },
        out.display()
    );
    Ok(0)
}
