//! Check reports and their JSON / CSV serialization.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_name: String,
    pub family: String,
    pub params: BTreeMap<String, f64>,
    /// Non-finite residuals are written as `null`.
    #[serde(serialize_with = "ser_nullable", deserialize_with = "de_nullable")]
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Which identity the check exercises.
    pub anchor: String,
    pub elapsed_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn ser_nullable<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn de_nullable<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl CheckReport {
    pub fn from_residual(
        check_name: &str,
        family: &str,
        params: BTreeMap<String, f64>,
        residual: f64,
        tolerance: f64,
        anchor: &str,
        elapsed: Duration,
    ) -> Self {
        Self {
            check_name: check_name.to_string(),
            family: family.to_string(),
            params,
            residual,
            tolerance,
            passed: residual.is_finite() && residual <= tolerance,
            anchor: anchor.to_string(),
            elapsed_ms: elapsed.as_secs_f64() * 1e3,
            error: None,
        }
    }

    /// A failed report for a check that raised an error.
    pub fn from_error(
        check_name: &str,
        family: &str,
        params: BTreeMap<String, f64>,
        tolerance: f64,
        err: &Error,
        elapsed: Duration,
    ) -> Self {
        Self {
            check_name: check_name.to_string(),
            family: family.to_string(),
            params,
            residual: f64::NAN,
            tolerance,
            passed: false,
            anchor: String::new(),
            elapsed_ms: elapsed.as_secs_f64() * 1e3,
            error: Some(err.to_string()),
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{status} {:<24} {:<4} residual={:.3e} tol={:.1e}",
            self.check_name, self.family, self.residual, self.tolerance
        )?;
        if let Some(e) = &self.error {
            write!(f, " error: {e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::BadParam(format!("unknown report format `{other}`"))),
        }
    }
}

fn sig17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

pub fn render_json(reports: &[CheckReport]) -> Result<String> {
    serde_json::to_string_pretty(reports).map_err(|e| Error::Io(e.to_string()))
}

pub fn render_csv(reports: &[CheckReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["check_name", "family", "params", "residual", "tolerance", "passed", "anchor", "elapsed_ms", "error"])
        .map_err(io)?;
    for r in reports {
        let params = r.params.iter().map(|(k, v)| format!("{k}={}", sig17(*v))).collect::<Vec<_>>().join(";");
        w.write_record([
            r.check_name.as_str(),
            r.family.as_str(),
            &params,
            &sig17(r.residual),
            &sig17(r.tolerance),
            if r.passed { "true" } else { "false" },
            r.anchor.as_str(),
            &format!("{:.3}", r.elapsed_ms),
            r.error.as_deref().unwrap_or(""),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

pub fn write_report(reports: &[CheckReport], path: &Path, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Json => render_json(reports)?,
        ReportFormat::Csv => render_csv(reports)?,
    };
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}
