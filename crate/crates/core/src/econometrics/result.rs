use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::panel_store::fmt_opt;

/// Two-sided normal critical values for 10%, 5% and 1%.
pub const Z_10: f64 = 1.6449;
pub const Z_05: f64 = 1.96;
pub const Z_01: f64 = 2.5758;

pub fn stars(t: f64) -> &'static str {
    let t = t.abs();
    if t >= Z_01 {
        "***"
    } else if t >= Z_05 {
        "**"
    } else if t >= Z_10 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FeOls,
    ArellanoBond,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub name: String,
    /// Absent when the regressor was dropped as collinear.
    pub estimate: Option<f64>,
    pub se: Option<f64>,
}

impl Coefficient {
    pub fn t_stat(&self) -> Option<f64> {
        let (b, se) = (self.estimate?, self.se?);
        Some(if se > 0.0 { b / se } else { f64::INFINITY * b.signum() })
    }

    pub fn stars(&self) -> &'static str {
        self.t_stat().map_or("", stars)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub id: String,
    pub method: Method,
    pub dependent: String,
    /// One entry per requested regressor, in specification order.
    pub coefficients: Vec<Coefficient>,
    pub dropped_regressors: Vec<String>,
    /// Covariance of the estimated (kept) coefficients, after scaling.
    pub vcov: DMatrix<f64>,
    pub within_r2: Option<f64>,
    pub n_obs: usize,
    /// Number of clusters.
    pub n_groups: usize,
    /// Number of panel units (firms or industries) in the estimation sample.
    pub n_units: usize,
    pub dropped_singletons: usize,
    pub n_instruments: Option<usize>,
    pub scale: f64,
    pub warnings: Vec<String>,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.coefficient(name).and_then(|c| c.estimate)
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        self.coefficient(name).and_then(|c| c.se)
    }
}

pub const RESULT_HEADER: [&str; 7] = [
    "regressor",
    "coefficient",
    "se",
    "stars",
    "n_obs",
    "n_groups",
    "within_r2",
];

pub fn write_result<W: Write>(writer: W, r: &RegressionResult) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(RESULT_HEADER)?;
    for c in &r.coefficients {
        csv.write_record([
            c.name.clone(),
            fmt_opt(c.estimate),
            fmt_opt(c.se),
            c.stars().to_string(),
            r.n_obs.to_string(),
            r.n_groups.to_string(),
            fmt_opt(r.within_r2),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<result writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(1.0), "");
        assert_eq!(stars(-1.7), "*");
        assert_eq!(stars(1.96), "**");
        assert_eq!(stars(3.0), "***");
    }
}
