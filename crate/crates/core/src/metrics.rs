//! Row-level financial ratios, growth rates and effect-size arithmetic.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::panel_store::{check_header, fmt_opt, FirmYear, Panel};

pub const LABOR_COST_HEADER: [&str; 2] = ["year", "cost_per_capita"];

/// Annual labor cost per employee, keyed by year.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LaborCostTable {
    cost: BTreeMap<i32, f64>,
}

impl LaborCostTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, year: i32, cost_per_capita: f64) -> Result<()> {
        if !(cost_per_capita.is_finite() && cost_per_capita > 0.0) {
            return Err(Error::Config(format!(
                "labor cost for {year} must be positive, got {cost_per_capita}"
            )));
        }
        self.cost.insert(year, cost_per_capita);
        Ok(())
    }

    pub fn get(&self, year: i32) -> Option<f64> {
        self.cost.get(&year).copied()
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader<R: Read>(reader: R, file: &str) -> Result<Self> {
        let mut csv = csv::Reader::from_reader(reader);
        check_header(csv.headers()?, &LABOR_COST_HEADER, file)?;
        let mut table = LaborCostTable::new();
        for record in csv.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let parsed = record[0]
                .trim()
                .parse::<i32>()
                .ok()
                .zip(record[1].trim().parse::<f64>().ok());
            let (year, cost) = parsed.ok_or_else(|| Error::Malformed {
                file: file.to_string(),
                line,
                message: "expected year,cost_per_capita".into(),
            })?;
            table.insert(year, cost)?;
        }
        Ok(table)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(LABOR_COST_HEADER)?;
        for (y, c) in &self.cost {
            csv.write_record([y.to_string(), c.to_string()])?;
        }
        csv.flush().map_err(|e| Error::io("<labor cost writer>", e))?;
        Ok(())
    }
}

/// True when earnings do not cover interest: `ebitda < xint` with `xint > 0`.
pub fn interest_coverage_flag(xint: Option<f64>, ebitda: Option<f64>) -> Option<bool> {
    let (xint, ebitda) = (xint?, ebitda?);
    (xint > 0.0).then_some(ebitda < xint)
}

/// `(curr - prev) / mean(curr, prev)`, bounded in [-2, 2].
pub fn symmetric_growth(curr: f64, prev: f64) -> Option<f64> {
    let mean = 0.5 * (curr + prev);
    if curr < 0.0 || prev < 0.0 || mean == 0.0 {
        return None;
    }
    Some(((curr - prev) / mean).clamp(-2.0, 2.0))
}

/// Labor cost: staff expense when reported, else employees (thousands) times
/// 1000 times the per-capita cost of the year.
pub fn labor_costs(row: &FirmYear, labor: &LaborCostTable) -> Result<Option<f64>> {
    if let Some(xlr) = row.xlr {
        return Ok(Some(xlr));
    }
    match row.emp {
        None => Ok(None),
        Some(emp) => {
            let cost = labor.get(row.year).ok_or(Error::MissingLaborCost(row.year))?;
            Ok(Some(emp * 1e3 * cost))
        }
    }
}

/// Sales minus materials, where materials are total expenses
/// (`sale - ebitda`) net of labor costs.
pub fn value_added(row: &FirmYear, labor: &LaborCostTable) -> Result<Option<f64>> {
    let (Some(sale), Some(ebitda)) = (row.sale, row.ebitda) else {
        return Ok(None);
    };
    let Some(lc) = labor_costs(row, labor)? else {
        return Ok(None);
    };
    let total_expenses = sale - ebitda;
    let materials = total_expenses - lc;
    Ok(Some(sale - materials))
}

/// Market-to-book proxy `(at + market_equity - book_equity) / at`.
pub fn tobins_q_proxy(at: Option<f64>, market_equity: Option<f64>, book_equity: Option<f64>) -> Option<f64> {
    let at = at.filter(|&a| a > 0.0)?;
    Some((at + market_equity? - book_equity?) / at)
}

pub fn economic_impact(sd: f64, beta: f64, scale: f64) -> f64 {
    sd * beta * scale
}

fn ratio(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    let den = den.filter(|&d| d > 0.0)?;
    Some(num? / den)
}

fn ln(x: Option<f64>) -> Option<f64> {
    x.filter(|&v| v > 0.0).map(f64::ln)
}

fn diff(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? - b?)
}

/// Derived quantities for one firm-year, aligned with the panel row.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedFirmYear {
    pub firm_id: String,
    pub year: i32,
    pub naics2: u16,
    pub icr_low_coverage: Option<bool>,
    pub leverage: Option<f64>,
    pub asset_tangibility: Option<f64>,
    pub capx_over_assets: Option<f64>,
    pub roa: Option<f64>,
    pub rd_intensity: Option<f64>,
    pub cash_ratio: Option<f64>,
    pub age: i32,
    pub value_added: Option<f64>,
    pub tobins_q_filled: Option<f64>,
    /// Set when `tobins_q_filled` comes from the proxy rather than the input column.
    pub q_from_proxy: bool,
    pub log_at: Option<f64>,
    pub log_ppent: Option<f64>,
    pub log_sale: Option<f64>,
    pub log_cogs: Option<f64>,
    pub log_capx: Option<f64>,
    pub emp_growth_sym: Option<f64>,
    pub dlog_k: Option<f64>,
    pub dlog_emp: Option<f64>,
    pub dlog_sale: Option<f64>,
}

pub const DERIVED_HEADER: [&str; 24] = [
    "firm_id",
    "year",
    "naics2",
    "icr_low_coverage",
    "leverage",
    "asset_tangibility",
    "capx_over_assets",
    "roa",
    "rd_intensity",
    "cash_ratio",
    "age",
    "value_added",
    "tobins_q_filled",
    "q_from_proxy",
    "log_at",
    "log_ppent",
    "log_sale",
    "log_cogs",
    "log_capx",
    "emp_growth_sym",
    "dlog_k",
    "dlog_emp",
    "dlog_sale",
    "emp",
];

/// Derives one row given the firm's previous calendar year, if observed.
pub fn derive_row(row: &FirmYear, prev: Option<&FirmYear>, labor: &LaborCostTable) -> Result<DerivedFirmYear> {
    let age = row.year - row.first_listed_year;
    if age < 0 {
        return Err(Error::Malformed {
            file: "panel".into(),
            line: 0,
            message: format!(
                "firm {} year {} precedes first_listed_year {}",
                row.firm_id, row.year, row.first_listed_year
            ),
        });
    }
    let prev = prev.filter(|p| p.year == row.year - 1);
    let (q, q_from_proxy) = match row.tobins_q {
        Some(q) => (Some(q), false),
        None => {
            let book = diff(row.at, row.lt);
            let q = tobins_q_proxy(row.at, row.market_equity, book);
            (q, q.is_some())
        }
    };
    let lag = |f: fn(&FirmYear) -> Option<f64>| prev.and_then(f);
    Ok(DerivedFirmYear {
        firm_id: row.firm_id.clone(),
        year: row.year,
        naics2: row.naics2,
        icr_low_coverage: interest_coverage_flag(row.xint, row.ebitda),
        leverage: ratio(row.total_debt(), row.at),
        asset_tangibility: ratio(row.ppent, row.at),
        capx_over_assets: ratio(row.capx, row.at),
        roa: ratio(row.ib, row.at),
        rd_intensity: ratio(row.xrd, row.at),
        cash_ratio: ratio(row.che, row.lt),
        age,
        value_added: value_added(row, labor)?,
        tobins_q_filled: q,
        q_from_proxy,
        log_at: ln(row.at),
        log_ppent: ln(row.ppent),
        log_sale: ln(row.sale),
        log_cogs: ln(row.cogs),
        log_capx: ln(row.capx),
        emp_growth_sym: row.emp.zip(lag(|p| p.emp)).and_then(|(c, p)| symmetric_growth(c, p)),
        dlog_k: diff(ln(row.ppent), ln(lag(|p| p.ppent))),
        dlog_emp: diff(ln(row.emp), ln(lag(|p| p.emp))),
        dlog_sale: diff(ln(row.sale), ln(lag(|p| p.sale))),
    })
}

/// Derives every panel row, in panel order.
pub fn derive(panel: &Panel, labor: &LaborCostTable) -> Result<Vec<DerivedFirmYear>> {
    let rows = panel.rows();
    (0..rows.len())
        .into_par_iter()
        .map(|i| {
            let prev = (i > 0 && rows[i - 1].firm_id == rows[i].firm_id).then(|| &rows[i - 1]);
            derive_row(&rows[i], prev, labor)
        })
        .collect()
}

fn fmt_bool(b: Option<bool>) -> String {
    match b {
        Some(true) => "1".into(),
        Some(false) => "0".into(),
        None => String::new(),
    }
}

/// Writes derived rows; `emp` is carried through from the panel for reference.
pub fn write_derived<W: Write>(writer: W, panel: &Panel, derived: &[DerivedFirmYear]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(DERIVED_HEADER)?;
    for (r, d) in panel.rows().iter().zip(derived) {
        let mut rec = vec![d.firm_id.clone(), d.year.to_string(), d.naics2.to_string()];
        rec.push(fmt_bool(d.icr_low_coverage));
        for v in [
            d.leverage,
            d.asset_tangibility,
            d.capx_over_assets,
            d.roa,
            d.rd_intensity,
            d.cash_ratio,
        ] {
            rec.push(fmt_opt(v));
        }
        rec.push(d.age.to_string());
        rec.push(fmt_opt(d.value_added));
        rec.push(fmt_opt(d.tobins_q_filled));
        rec.push(fmt_bool(Some(d.q_from_proxy)));
        for v in [
            d.log_at,
            d.log_ppent,
            d.log_sale,
            d.log_cogs,
            d.log_capx,
            d.emp_growth_sym,
            d.dlog_k,
            d.dlog_emp,
            d.dlog_sale,
            r.emp,
        ] {
            rec.push(fmt_opt(v));
        }
        csv.write_record(&rec)?;
    }
    csv.flush().map_err(|e| Error::io("<derived writer>", e))?;
    Ok(())
}

pub fn read_derived<R: Read>(reader: R, file: &str) -> Result<Vec<DerivedFirmYear>> {
    let mut csv = csv::Reader::from_reader(reader);
    check_header(csv.headers()?, &DERIVED_HEADER, file)?;
    let mut out = Vec::new();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |i: usize| Error::Malformed {
            file: file.to_string(),
            line,
            message: format!("bad {}", DERIVED_HEADER[i]),
        };
        let num = |i: usize| -> Result<Option<f64>> {
            match &record[i] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(i)),
            }
        };
        let flag = |i: usize| -> Result<Option<bool>> {
            match &record[i] {
                "" => Ok(None),
                "1" => Ok(Some(true)),
                "0" => Ok(Some(false)),
                _ => Err(bad(i)),
            }
        };
        out.push(DerivedFirmYear {
            firm_id: record[0].to_string(),
            year: record[1].parse().map_err(|_| bad(1))?,
            naics2: record[2].parse().map_err(|_| bad(2))?,
            icr_low_coverage: flag(3)?,
            leverage: num(4)?,
            asset_tangibility: num(5)?,
            capx_over_assets: num(6)?,
            roa: num(7)?,
            rd_intensity: num(8)?,
            cash_ratio: num(9)?,
            age: record[10].parse().map_err(|_| bad(10))?,
            value_added: num(11)?,
            tobins_q_filled: num(12)?,
            q_from_proxy: flag(13)?.ok_or_else(|| bad(13))?,
            log_at: num(14)?,
            log_ppent: num(15)?,
            log_sale: num(16)?,
            log_cogs: num(17)?,
            log_capx: num(18)?,
            emp_growth_sym: num(19)?,
            dlog_k: num(20)?,
            dlog_emp: num(21)?,
            dlog_sale: num(22)?,
        });
    }
    Ok(out)
}
