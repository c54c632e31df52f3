//! Serializable report types. Everything is widened to `f64` and laid out
//! with stable field order; wall-clock timing never enters these structs, so
//! a rerun with the same inputs and seed emits identical bytes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::certify::Certificate;
use crate::real::Real;
use crate::solve::SolveReport;
use crate::space::EmbeddingConstants;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub case: String,
    pub c: Option<f64>,
    pub cq: BTreeMap<String, f64>,
    pub mesh_n: usize,
    pub r_ext: f64,
    pub c_converged: bool,
    pub cq_converged: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub config: BTreeMap<String, String>,
}

impl<T: Real> EmbeddingConstants<T> {
    pub fn to_report(&self, case: impl Into<String>) -> ConstantsReport {
        let mut cq = BTreeMap::new();
        for (q, v) in &self.cq {
            cq.insert(format!("{}", q.as_f64()), v.as_f64());
        }
        ConstantsReport {
            case: case.into(),
            c: self.c.map(|v| v.as_f64()),
            cq,
            mesh_n: self.mesh_n,
            r_ext: self.r_ext.as_f64(),
            c_converged: self.c_converged,
            cq_converged: self.cq_converged,
            config: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
    pub diagnostic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateReport {
    pub case: String,
    pub constants: BTreeMap<String, f64>,
    pub mesh_n: usize,
    pub r_ext: f64,
    pub hypotheses: Vec<HypothesisReport>,
    pub interval: Option<[f64; 2]>,
    pub alt_interval: Option<[f64; 2]>,
    pub disclaimers: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub config: BTreeMap<String, String>,
}

impl<T: Real> Certificate<T> {
    pub fn to_report(&self) -> CertificateReport {
        CertificateReport {
            case: self.case.to_string(),
            constants: self
                .constants
                .iter()
                .map(|(k, v)| (k.clone(), v.as_f64()))
                .collect(),
            mesh_n: self.mesh_n,
            r_ext: self.r_ext.as_f64(),
            hypotheses: self
                .hypotheses
                .iter()
                .map(|h| HypothesisReport {
                    name: h.name.clone(),
                    pass: h.pass,
                    margin: h.margin.as_f64(),
                    diagnostic: h.diagnostic,
                    note: h.note.clone(),
                })
                .collect(),
            interval: self.interval.map(|(a, b)| [a.as_f64(), b.as_f64()]),
            alt_interval: self.alt_interval.map(|(a, b)| [a.as_f64(), b.as_f64()]),
            disclaimers: self.disclaimers.clone(),
            config: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointReport {
    pub start_index: usize,
    pub iterations: usize,
    pub j_value: f64,
    pub residual: f64,
    pub fresh_residual: f64,
    pub neumann_max: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FailureReport {
    pub start_index: usize,
    pub iterations: usize,
    pub residual: f64,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReportJson {
    pub lambda: f64,
    pub seed: u64,
    pub tol: f64,
    pub distinct_tol: f64,
    pub k_target: usize,
    pub shortfall: bool,
    pub points: Vec<PointReport>,
    pub failures: Vec<FailureReport>,
    pub pairwise_sup_distances: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub config: BTreeMap<String, String>,
}

impl<T: Real> SolveReport<T> {
    pub fn to_report(&self) -> SolveReportJson {
        SolveReportJson {
            lambda: self.lambda.as_f64(),
            seed: self.seed,
            tol: self.tol.as_f64(),
            distinct_tol: self.distinct_tol.as_f64(),
            k_target: self.k_target,
            shortfall: self.shortfall,
            points: self
                .points
                .iter()
                .map(|p| PointReport {
                    start_index: p.start_index,
                    iterations: p.iterations,
                    j_value: p.j_value.as_f64(),
                    residual: p.residual.as_f64(),
                    fresh_residual: p.fresh_residual.as_f64(),
                    neumann_max: p.neumann_max.as_f64(),
                    values: p.values.iter().map(|v| v.as_f64()).collect(),
                })
                .collect(),
            failures: self
                .failures
                .iter()
                .map(|f| FailureReport {
                    start_index: f.start_index,
                    iterations: f.iterations,
                    residual: f.residual.as_f64(),
                    reason: f.reason.clone(),
                })
                .collect(),
            pairwise_sup_distances: self
                .pairwise_sup_distances
                .iter()
                .map(|(i, j, d)| (*i, *j, d.as_f64()))
                .collect(),
            config: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssembleReport {
    pub dim: usize,
    pub mesh_n: usize,
    pub r_ext: f64,
    pub nodes: usize,
    pub elements: usize,
    pub interior_elements: usize,
    pub pair_records: usize,
    pub samples: usize,
    pub order: usize,
    pub depth: usize,
    pub min_sample_dist: f64,
    pub tail_rel: f64,
    pub tail_mass_bound: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub config: BTreeMap<String, String>,
}

/// Pretty JSON with a trailing newline; the byte layout tests rely on it.
pub fn to_json_string<S: Serialize>(value: &S) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    s.push('\n');
    s
}
