//! CSV renderings of sweep results.
//!
//! Floats use Rust's shortest round-trip formatting, so identical inputs give
//! identical bytes.

use serde::Serialize;

use crate::balancing::BalancingCertificate;
use crate::explorer::ExplorationReport;
use crate::verify::CheckResult;

fn to_csv<R: Serialize>(rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

#[derive(Serialize)]
struct CertificateRow {
    area: u64,
    l: u32,
    m: u32,
    l_balanced: u32,
    m_balanced: u32,
    t: String,
    tau: String,
    tau_balanced: String,
    linear: f64,
    residual: f64,
    log_diff_spectral: f64,
    log_diff_exact: Option<f64>,
    discrepancy: f64,
    budget: f64,
    pass: bool,
}

/// One row per certificate.
pub fn certificates_csv(certs: &[BalancingCertificate]) -> String {
    let opt = |v: &Option<crate::exact::TreeCount>| v.as_ref().map(ToString::to_string).unwrap_or_default();
    to_csv(certs.iter().map(|c| CertificateRow {
        area: c.area(),
        l: c.original.rows(),
        m: c.original.cols(),
        l_balanced: c.balanced.rows(),
        m_balanced: c.balanced.cols(),
        t: c.t.to_string(),
        tau: opt(&c.tau_original),
        tau_balanced: opt(&c.tau_balanced),
        linear: c.linear_term,
        residual: c.residual_term,
        log_diff_spectral: c.log_diff_spectral,
        log_diff_exact: c.log_diff_exact,
        discrepancy: c.discrepancy,
        budget: c.max_abscrepancy,
        pass: c.passes(),
    }))
}

#[derive(Serialize)]
struct ExplorationRow<'a> {
    n: u32,
    mode: String,
    shapes_examined: u64,
    tau_max_decimal: String,
    shape_serialized: String,
    role: &'a str,
}

/// One row per maximizer, then one per counterexample (whose `tau_max_decimal` is its own count).
pub fn exploration_csv(report: &ExplorationReport) -> String {
    let maximizers = report.argmax_shapes.iter().map(|s| ExplorationRow {
        n: report.n,
        mode: report.mode.to_string(),
        shapes_examined: report.shapes_examined,
        tau_max_decimal: report.max_tau.to_string(),
        shape_serialized: s.to_string(),
        role: "maximizer",
    });
    let counter = report.counterexamples.iter().map(|c| ExplorationRow {
        n: report.n,
        mode: report.mode.to_string(),
        shapes_examined: report.shapes_examined,
        tau_max_decimal: c.tau.to_string(),
        shape_serialized: c.shape.to_string(),
        role: "counterexample",
    });
    to_csv(maximizers.chain(counter))
}

pub fn checks_csv(checks: &[CheckResult]) -> String {
    to_csv(checks)
}
