use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::frames::{firm_frame, industry_frame, Bundle};
use super::{Catalog, CatalogEntry, Executable, Level, Maturity};
use crate::econometrics::{fit_arellano_bond, fit_fe_ols, write_result, Frame, RegressionResult};
use crate::error::{Error, Result};
use crate::panel_store::fmt_opt;

pub const MANIFEST_FILE: &str = "spec_manifest.csv";

pub const TABLE_HEADER: [&str; 11] = [
    "spec_id",
    "maturity",
    "dependent",
    "regressor",
    "coefficient",
    "se",
    "stars",
    "n_obs",
    "n_groups",
    "n_units",
    "within_r2",
];

const MANIFEST_HEADER: [&str; 13] = [
    "spec_id",
    "table",
    "method",
    "maturity",
    "dependent",
    "filters",
    "status",
    "n_obs",
    "n_groups",
    "n_units",
    "dropped_singletons",
    "n_instruments",
    "warnings",
];

#[derive(Debug)]
pub struct Outcome {
    pub entry: CatalogEntry,
    /// Estimation failures are kept as messages so one entry cannot sink the run.
    pub result: std::result::Result<RegressionResult, String>,
}

#[derive(Debug)]
pub struct CatalogRun {
    pub outcomes: Vec<Outcome>,
}

impl CatalogRun {
    pub fn get(&self, id: &str) -> Option<&RegressionResult> {
        self.outcomes
            .iter()
            .find(|o| o.entry.id == id)
            .and_then(|o| o.result.as_ref().ok())
    }
}

struct Frames {
    firm: [Frame; 2],
    industry: [Frame; 2],
}

impl Frames {
    fn get(&self, level: Level, m: Maturity) -> &Frame {
        let i = (m == Maturity::Long) as usize;
        match level {
            Level::Firm => &self.firm[i],
            Level::Industry => &self.industry[i],
        }
    }
}

pub fn run_entry(entry: &CatalogEntry, frame: &Frame) -> Result<RegressionResult> {
    match &entry.spec {
        Executable::FeOls(s) => fit_fe_ols(s, frame),
        Executable::ArellanoBond(s) => fit_arellano_bond(s, frame),
    }
}

/// Estimates every catalog entry in parallel on frames built from `bundle`.
pub fn run_catalog(bundle: &Bundle, catalog: &Catalog) -> Result<CatalogRun> {
    bundle.check_complete()?;
    let frames = Frames {
        firm: [
            firm_frame(bundle, Maturity::Short.split())?,
            firm_frame(bundle, Maturity::Long.split())?,
        ],
        industry: [
            industry_frame(bundle, Maturity::Short.split())?,
            industry_frame(bundle, Maturity::Long.split())?,
        ],
    };
    let outcomes = catalog
        .entries()
        .par_iter()
        .map(|e| Outcome {
            entry: e.clone(),
            result: run_entry(e, frames.get(e.level, e.maturity)).map_err(|err| err.to_string()),
        })
        .collect();
    Ok(CatalogRun { outcomes })
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes one CSV per table, the manifest, and `results/<id>.csv` per entry.
pub fn write_tables(dir: &Path, catalog: &Catalog, run: &CatalogRun) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let results_dir = dir.join("results");
    fs::create_dir_all(&results_dir).map_err(|e| Error::io(&results_dir, e))?;
    let mut written = Vec::new();

    for table in catalog.tables() {
        let path = dir.join(format!("{table}.csv"));
        let mut w = create(&path)?;
        w.write_record(TABLE_HEADER)?;
        for o in run.outcomes.iter().filter(|o| o.entry.table == table) {
            let Ok(r) = &o.result else { continue };
            for c in &r.coefficients {
                w.write_record([
                    o.entry.id.clone(),
                    o.entry.maturity.to_string(),
                    r.dependent.clone(),
                    c.name.clone(),
                    fmt_opt(c.estimate),
                    fmt_opt(c.se),
                    c.stars().to_string(),
                    r.n_obs.to_string(),
                    r.n_groups.to_string(),
                    r.n_units.to_string(),
                    fmt_opt(r.within_r2),
                ])?;
            }
        }
        finish(w, &path)?;
        written.push(path);
    }

    for o in &run.outcomes {
        if let Ok(r) = &o.result {
            let path = results_dir.join(format!("{}.csv", o.entry.id));
            let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_result(BufWriter::new(f), r)?;
        }
    }

    let path = dir.join(MANIFEST_FILE);
    let mut w = create(&path)?;
    w.write_record(MANIFEST_HEADER)?;
    for o in &run.outcomes {
        let e = &o.entry;
        let method = match e.spec {
            Executable::FeOls(_) => "fe_ols",
            Executable::ArellanoBond(_) => "arellano_bond",
        };
        let filters: Vec<String> = e.spec.filters().iter().map(|f| f.to_string()).collect();
        let mut rec = vec![
            e.id.clone(),
            e.table.clone(),
            method.to_string(),
            e.maturity.to_string(),
            e.spec.dependent(),
            filters.join("; "),
        ];
        match &o.result {
            Ok(r) => rec.extend([
                "ok".to_string(),
                r.n_obs.to_string(),
                r.n_groups.to_string(),
                r.n_units.to_string(),
                r.dropped_singletons.to_string(),
                r.n_instruments.map_or(String::new(), |n| n.to_string()),
                r.warnings.join("; "),
            ]),
            Err(msg) => {
                rec.push(format!("error: {msg}"));
                rec.extend(std::iter::repeat_n(String::new(), 6));
            }
        }
        w.write_record(rec)?;
    }
    finish(w, &path)?;
    written.push(path);
    Ok(written)
}
