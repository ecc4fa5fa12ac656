//! JSON form of a recovery report.

use lattice_echo_core::{Matrix, RecoveryReport};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakJson {
    pub lambda: Vec<f64>,
    pub re: f64,
    pub im: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub dim: usize,
    /// Rows of the matrix whose columns are the dual generators.
    pub dual_basis: Option<Vec<Vec<f64>>>,
    pub primal_basis: Option<Vec<Vec<f64>>>,
    pub offset: Option<Vec<f64>>,
    pub dispersion: Option<f64>,
    pub beta: f64,
    #[serde(rename = "R_detect")]
    pub r_detect: f64,
    #[serde(rename = "R_verify")]
    pub r_verify: f64,
    pub peaks: Vec<PeakJson>,
    pub verified_count: usize,
    pub cloaked: bool,
    pub seed: u64,
}

impl ReportJson {
    pub fn from_report(r: &RecoveryReport) -> Self {
        Self {
            dim: r.dim,
            dual_basis: r.dual_basis.as_ref().map(Matrix::rows),
            primal_basis: r.primal_basis.as_ref().map(Matrix::rows),
            offset: r.offset.clone(),
            dispersion: r.dispersion.as_ref().map(|f| f.a),
            beta: r.params.beta,
            r_detect: r.params.r_detect,
            r_verify: r.params.r_verify,
            peaks: r
                .verified
                .iter()
                .map(|p| PeakJson { lambda: p.lambda.clone(), re: p.value.re, im: p.value.im, radius: p.radius })
                .collect(),
            verified_count: r.verified_count(),
            cloaked: r.cloaked,
            seed: r.seed,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }
}
