//! Verdict documents: a flat list of named checks with values and bounds,
//! serialized once per run. Non-finite values serialize as null, so records
//! keep them as options.

use crate::error::Result;
use crate::spectral::{IdentityReport, InequalityReport};
use crate::theorems::{AuditReport, BlowUpBoundReport, ConvergenceReport, DecayReport, RateFit};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One verified claim: `statement` identifies the mathematical fact being
/// checked, `name` the concrete instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub statement: String,
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub pass: bool,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, statement: &str, value: f64, bound: f64, pass: bool) -> Self {
        CheckRecord {
            name: name.into(),
            statement: statement.to_string(),
            value: value.is_finite().then_some(value),
            bound: bound.is_finite().then_some(bound),
            pass,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VerdictDoc {
    pub checks: Vec<CheckRecord>,
    pub summary: String,
}

impl VerdictDoc {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn push(&mut self, record: CheckRecord) {
        self.checks.push(record);
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = CheckRecord>) {
        self.checks.extend(records);
    }

    /// Fills the summary line from the current check list.
    pub fn finalize(&mut self) {
        let passed = self.checks.iter().filter(|c| c.pass).count();
        let verdict = if passed == self.checks.len() { "PASS" } else { "FAIL" };
        self.summary = format!("{verdict}: {passed}/{} checks passed", self.checks.len());
    }

    pub fn write_json(&self, out: &mut impl Write) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| crate::error::Error::Format(e.to_string()))?;
        out.write_all(text.as_bytes())?;
        out.write_all(b"\n")?;
        Ok(())
    }

    /// Human-readable table, one line per check.
    pub fn write_summary(&self, out: &mut impl Write) -> Result<()> {
        for c in &self.checks {
            let value = c.value.map_or("-".to_string(), |v| format!("{v:.6e}"));
            let bound = c.bound.map_or("-".to_string(), |v| format!("{v:.6e}"));
            writeln!(
                out,
                "{} {:<40} value {:>14} bound {:>14}  [{}]",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                value,
                bound,
                c.statement
            )?;
        }
        writeln!(out, "{}", self.summary)?;
        Ok(())
    }
}

/// Worst-case identity residuals, one record per identity name.
pub fn identity_records(reports: &[IdentityReport], tol: f64) -> Vec<CheckRecord> {
    let mut records = Vec::new();
    if reports.is_empty() {
        return records;
    }
    for check in &reports[0].checks {
        let worst = reports
            .iter()
            .filter_map(|r| r.residual(check.name))
            .fold(0.0f64, f64::max);
        records.push(CheckRecord::new(
            check.name,
            "spectral identity, worst relative residual over the ensemble",
            worst,
            tol,
            worst <= tol,
        ));
    }
    records
}

/// Worst slack per inequality plus the empirical maxima of the
/// interpolation ratios.
pub fn inequality_records(reports: &[InequalityReport], slack: f64) -> Vec<CheckRecord> {
    let mut records = Vec::new();
    if reports.is_empty() {
        return records;
    }
    for check in &reports[0].checks {
        if check.name.starts_with("interpolation_ratio") {
            let worst = reports
                .iter()
                .filter_map(|r| r.value(&check.name))
                .filter(|v| v.is_finite())
                .fold(0.0f64, f64::max);
            let all_pass = reports.iter().all(|r| {
                r.checks
                    .iter()
                    .find(|c| c.name == check.name)
                    .map_or(false, |c| c.pass)
            });
            records.push(CheckRecord::new(
                &check.name,
                "interpolation ratio finite and positive; empirical max recorded",
                worst,
                f64::NAN,
                all_pass,
            ));
        } else {
            let worst = reports
                .iter()
                .filter_map(|r| r.value(&check.name))
                .fold(f64::MAX, f64::min);
            records.push(CheckRecord::new(
                &check.name,
                "inequality slack stays above the rounding floor",
                worst,
                -slack,
                worst >= -slack,
            ));
        }
    }
    records
}

pub fn audit_records(report: &AuditReport) -> Vec<CheckRecord> {
    report
        .checks
        .iter()
        .map(|c| {
            CheckRecord::new(
                format!("audit_{}", c.name),
                "evolution identity or monotonicity audit along the trajectory",
                c.value,
                c.bound,
                c.pass,
            )
        })
        .collect()
}

pub fn blow_up_records(report: &BlowUpBoundReport) -> Vec<CheckRecord> {
    let mut records = vec![CheckRecord::new(
        format!("{}_blow_up_bound", report.flow.name()),
        "declared breakdown time stays below the finite-time bound",
        report.t_num.unwrap_or(f64::NAN),
        report.bound * (1.0 + crate::theorems::BLOW_UP_SLACK),
        report.pass.unwrap_or(false),
    )];
    records.push(CheckRecord::new(
        format!("{}_initial_gap_negative", report.flow.name()),
        "blow-up preset starts from a negative gap",
        report.i_m1_initial,
        0.0,
        report.i_m1_initial < 0.0,
    ));
    records
}

pub fn rate_records(fits: &[RateFit]) -> Vec<CheckRecord> {
    fits.iter()
        .map(|f| {
            let (value, bound) = match f.name.as_str() {
                "w" => (f.exponent, -0.35),
                "type_two_ratio" => (f.prefactor, f64::NAN),
                _ => (f.bound_fraction, 0.95),
            };
            CheckRecord::new(
                format!("rate_{}", f.name),
                "blow-up rate: fitted exponent or hard-bound sample fraction",
                value,
                bound,
                f.pass,
            )
        })
        .collect()
}

pub fn decay_records(report: &DecayReport) -> Vec<CheckRecord> {
    report
        .checks
        .iter()
        .map(|c| {
            CheckRecord::new(
                format!("decay_{}", c.name),
                "exponential decay of the gap energies toward the n-fold circle",
                c.value,
                c.bound,
                c.pass,
            )
        })
        .collect()
}

pub fn convergence_records(report: &ConvergenceReport) -> Vec<CheckRecord> {
    report
        .checks
        .iter()
        .map(|c| {
            CheckRecord::new(
                format!("convergence_{}", c.name),
                "circle-decomposition remainder decay and parameter stabilization",
                c.value,
                c.bound,
                c.pass,
            )
        })
        .collect()
}
