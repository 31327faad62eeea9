//! Benchmark records: one row per solved instance, serializable to JSON
//! and to the fixed CSV column set
//! `problem,n,m,it0,it1,it2,cpu,eta_p,eta_d,eta_c,obj`.
//!
//! Floats print in Rust's shortest round-trip form, so emitted values parse
//! back bit-for-bit. The CSV view carries the primal objective only; the
//! JSON view is the full record including status and the dual objective.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::KktResiduals;
use crate::solver::{SolveReport, SolveStatus};

/// The CSV header written by the bench command.
pub const CSV_HEADER: &str = "problem,n,m,it0,it1,it2,cpu,eta_p,eta_d,eta_c,obj";

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("csv row has {got} fields, expected 11")]
    FieldCount { got: usize },
    #[error("csv field `{field}` failed to parse: {value}")]
    Field { field: &'static str, value: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One solved instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub n: usize,
    pub m: usize,
    pub it0: usize,
    pub it1: usize,
    pub it2: usize,
    pub cpu_seconds: f64,
    pub eta_p: f64,
    pub eta_d: f64,
    pub eta_c: f64,
    pub obj_primal: f64,
    pub obj_dual: f64,
    pub status: SolveStatus,
}

impl RunRecord {
    pub fn from_report(problem: impl Into<String>, n: usize, m: usize, rep: &SolveReport) -> Self {
        let KktResiduals {
            eta_p,
            eta_d,
            eta_c,
            obj_primal,
            obj_dual,
            ..
        } = rep.residuals;
        RunRecord {
            problem: problem.into(),
            n,
            m,
            it0: rep.it0,
            it1: rep.it1,
            it2: rep.it2,
            cpu_seconds: rep.cpu_seconds,
            eta_p,
            eta_d,
            eta_c,
            obj_primal,
            obj_dual,
            status: rep.status,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record is serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, RecordError> {
        Ok(serde_json::from_str(s)?)
    }

    /// The fixed 11-column CSV row (no trailing newline). Floats use
    /// exponential notation with the fewest digits that round-trip.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:e},{:e},{:e},{:e},{:e}",
            self.problem,
            self.n,
            self.m,
            self.it0,
            self.it1,
            self.it2,
            self.cpu_seconds,
            self.eta_p,
            self.eta_d,
            self.eta_c,
            self.obj_primal
        )
    }

    /// Parses a CSV row back into the fields the row carries; the dual
    /// objective and status are not part of the CSV view.
    pub fn from_csv_row(row: &str) -> Result<CsvRecord, RecordError> {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 11 {
            return Err(RecordError::FieldCount { got: fields.len() });
        }
        fn num<T: std::str::FromStr>(
            field: &'static str,
            value: &str,
        ) -> Result<T, RecordError> {
            value.parse().map_err(|_| RecordError::Field {
                field,
                value: value.to_string(),
            })
        }
        Ok(CsvRecord {
            problem: fields[0].to_string(),
            n: num("n", fields[1])?,
            m: num("m", fields[2])?,
            it0: num("it0", fields[3])?,
            it1: num("it1", fields[4])?,
            it2: num("it2", fields[5])?,
            cpu_seconds: num("cpu", fields[6])?,
            eta_p: num("eta_p", fields[7])?,
            eta_d: num("eta_d", fields[8])?,
            eta_c: num("eta_c", fields[9])?,
            obj: num("obj", fields[10])?,
        })
    }

    /// Projection onto the CSV column set, for round-trip comparisons.
    pub fn csv_view(&self) -> CsvRecord {
        CsvRecord {
            problem: self.problem.clone(),
            n: self.n,
            m: self.m,
            it0: self.it0,
            it1: self.it1,
            it2: self.it2,
            cpu_seconds: self.cpu_seconds,
            eta_p: self.eta_p,
            eta_d: self.eta_d,
            eta_c: self.eta_c,
            obj: self.obj_primal,
        }
    }
}

/// The 11 fields of one CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRecord {
    pub problem: String,
    pub n: usize,
    pub m: usize,
    pub it0: usize,
    pub it1: usize,
    pub it2: usize,
    pub cpu_seconds: f64,
    pub eta_p: f64,
    pub eta_d: f64,
    pub eta_c: f64,
    pub obj: f64,
}
