use std::collections::HashMap;

use crate::aggregator::IndustryYearAggregate;
use crate::classifier::{ClassifiedFirmYear, ZombieDefinition};
use crate::econometrics::Frame;
use crate::error::{Error, Result};
use crate::metrics::DerivedFirmYear;
use crate::panel_store::{CreditBucket, MaturitySplit};
use crate::tfp::TfpResult;

/// Upstream artifacts consumed by the regression catalog.
#[derive(Debug, Clone, Default)]
pub struct Bundle {
    pub classified: Option<Vec<ClassifiedFirmYear>>,
    pub derived: Option<Vec<DerivedFirmYear>>,
    pub tfp: Option<TfpResult>,
    pub aggregates: Option<Vec<IndustryYearAggregate>>,
    pub definition: ZombieDefinition,
}

fn need<'a, T: ?Sized>(v: Option<&'a T>, stage: &str, artifact: &str) -> Result<&'a T> {
    v.ok_or_else(|| Error::MissingStage {
        stage: stage.to_string(),
        artifact: artifact.to_string(),
    })
}

impl Bundle {
    pub fn classified(&self) -> Result<&[ClassifiedFirmYear]> {
        need(self.classified.as_deref(), "classify", "classified.csv")
    }

    pub fn derived(&self) -> Result<&[DerivedFirmYear]> {
        need(self.derived.as_deref(), "derive", "derived.csv")
    }

    pub fn tfp(&self) -> Result<&TfpResult> {
        need(self.tfp.as_ref(), "tfp", "tfp.csv")
    }

    pub fn aggregates(&self) -> Result<&[IndustryYearAggregate]> {
        need(self.aggregates.as_deref(), "aggregate", "industry_year.csv")
    }

    /// Fails with the first missing producer stage, in pipeline order.
    pub fn check_complete(&self) -> Result<()> {
        self.derived()?;
        self.tfp()?;
        self.classified()?;
        self.aggregates()?;
        Ok(())
    }
}

fn aggregates_for(bundle: &Bundle, split: MaturitySplit) -> Result<HashMap<(u16, i32), &IndustryYearAggregate>> {
    let bucket = CreditBucket::Split(split);
    Ok(bundle
        .aggregates()?
        .iter()
        .filter(|a| a.bucket == bucket)
        .map(|a| ((a.naics2, a.year), a))
        .collect())
}

fn flag(b: bool) -> Option<f64> {
    Some(b as u8 as f64)
}

/// Firm-year regression frame for one maturity split.
pub fn firm_frame(bundle: &Bundle, split: MaturitySplit) -> Result<Frame> {
    let classified = bundle.classified()?;
    let tfp = bundle.tfp()?;
    let derived: HashMap<(&str, i32), &DerivedFirmYear> = bundle
        .derived()?
        .iter()
        .map(|d| ((d.firm_id.as_str(), d.year), d))
        .collect();
    let agg = aggregates_for(bundle, split)?;
    let bucket = CreditBucket::Split(split);
    let mut frame = Frame::new(classified.iter().map(|c| (c.firm_id.clone(), c.naics2, c.year)))?;

    let mut cols: Vec<(&str, Vec<Option<f64>>)> = [
        "nz",
        "sm",
        "nb",
        "has_instrument",
        "bank_dep",
        "capm_dep",
        "no_bond",
        "tfp",
        "log_at",
        "rd_intensity",
        "tangibility",
        "cash_ratio",
        "roa",
        "dlog_k",
        "emp_growth_sym",
        "dlog_emp",
        "dlog_sale",
        "bc_z",
        "bn_z",
        "dlog_bc_z",
        "dlog_bn_z",
    ]
    .into_iter()
    .map(|n| (n, Vec::with_capacity(classified.len())))
    .collect();
    for c in classified {
        let d = derived.get(&(c.firm_id.as_str(), c.year)).copied();
        let a = agg.get(&(c.naics2, c.year)).copied();
        let values = [
            c.zombie(bundle.definition).map(|z| (!z) as u8 as f64),
            c.sm.map(|s| s as u8 as f64),
            flag(c.nb),
            flag(c.flags.has_instrument),
            flag(c.flags.bank_dep),
            flag(c.flags.capm_dep),
            flag(c.flags.no_bond(bucket)),
            tfp.get(&c.firm_id, c.year).map(|r| r.tfp),
            d.and_then(|d| d.log_at),
            d.and_then(|d| d.rd_intensity),
            d.and_then(|d| d.asset_tangibility),
            d.and_then(|d| d.cash_ratio),
            d.and_then(|d| d.roa),
            d.and_then(|d| d.dlog_k),
            d.and_then(|d| d.emp_growth_sym),
            d.and_then(|d| d.dlog_emp),
            d.and_then(|d| d.dlog_sale),
            a.and_then(|a| a.bc_z_share),
            a.and_then(|a| a.bn_z_share),
            a.and_then(|a| a.dlog_bc_z),
            a.and_then(|a| a.dlog_bn_z),
        ];
        for ((_, col), v) in cols.iter_mut().zip(values) {
            col.push(v);
        }
    }
    for (name, col) in cols {
        frame.insert(name, col)?;
    }
    Ok(frame)
}

/// Industry-year frame for one maturity split; the unit is the industry.
pub fn industry_frame(bundle: &Bundle, split: MaturitySplit) -> Result<Frame> {
    let mut rows: Vec<&IndustryYearAggregate> = aggregates_for(bundle, split)?.into_values().collect();
    rows.sort_by_key(|a| (a.naics2, a.year));
    let mut frame = Frame::new(rows.iter().map(|a| (a.naics2.to_string(), a.naics2, a.year)))?;
    frame.insert("nb_share", rows.iter().map(|a| a.nb_share).collect())?;
    frame.insert(
        "nb_share_borrowers",
        rows.iter().map(|a| a.nb_share_borrowers).collect(),
    )?;
    frame.insert("bc_z", rows.iter().map(|a| a.bc_z_share).collect())?;
    frame.insert("bn_z", rows.iter().map(|a| a.bn_z_share).collect())?;
    frame.insert("dlog_bc_z", rows.iter().map(|a| a.dlog_bc_z).collect())?;
    frame.insert("dlog_bn_z", rows.iter().map(|a| a.dlog_bn_z).collect())?;
    frame.insert("bank_dep_sy", rows.iter().map(|a| flag(a.bank_dep_sy)).collect())?;
    frame.insert("capm_dep_sy", rows.iter().map(|a| flag(a.capm_dep_sy)).collect())?;
    Ok(frame)
}
