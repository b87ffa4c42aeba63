use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::debt::DebtInstrument;
use super::firm::{check_header, FirmField, Panel};
use crate::error::{Error, Result};

pub const DEFLATOR_HEADER: [&str; 3] = ["naics2", "year", "index"];

/// Industry producer-price indices keyed by `(naics2, year)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeflatorTable {
    index: BTreeMap<(u16, i32), f64>,
}

impl DeflatorTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, naics2: u16, year: i32, index: f64) -> Result<()> {
        if !(index.is_finite() && index > 0.0) {
            return Err(Error::Config(format!(
                "deflator for naics2={naics2}, year={year} must be positive, got {index}"
            )));
        }
        self.index.insert((naics2, year), index);
        Ok(())
    }

    pub fn get(&self, naics2: u16, year: i32) -> Option<f64> {
        self.index.get(&(naics2, year)).copied()
    }

    pub fn require(&self, naics2: u16, year: i32) -> Result<f64> {
        self.get(naics2, year).ok_or(Error::MissingDeflator { naics2, year })
    }

    pub fn iter(&self) -> impl Iterator<Item = (u16, i32, f64)> + '_ {
        self.index.iter().map(|(&(n, y), &v)| (n, y, v))
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader<R: Read>(reader: R, file: &str) -> Result<Self> {
        let mut csv = csv::Reader::from_reader(reader);
        check_header(csv.headers()?, &DEFLATOR_HEADER, file)?;
        let mut table = DeflatorTable::new();
        for record in csv.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let malformed = |message: String| Error::Malformed {
                file: file.to_string(),
                line,
                message,
            };
            let naics2 = record[0]
                .trim()
                .parse::<u16>()
                .map_err(|_| malformed("naics2".into()))?;
            let year = record[1].trim().parse::<i32>().map_err(|_| malformed("year".into()))?;
            let index = record[2].trim().parse::<f64>().map_err(|_| malformed("index".into()))?;
            if !(index.is_finite() && index > 0.0) {
                return Err(malformed(format!("index must be positive, got {index}")));
            }
            table.index.insert((naics2, year), index);
        }
        Ok(table)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(DEFLATOR_HEADER)?;
        for (n, y, v) in self.iter() {
            csv.write_record([n.to_string(), y.to_string(), v.to_string()])?;
        }
        csv.flush().map_err(|e| Error::io("<deflator writer>", e))?;
        Ok(())
    }
}

/// Divides each listed currency field by its industry-year index.
pub fn deflate(panel: &Panel, deflators: &DeflatorTable, fields: &[FirmField]) -> Result<Panel> {
    if let Some(f) = fields.iter().find(|f| !f.is_currency()) {
        return Err(Error::Config(format!("`{f}` is not a currency field")));
    }
    let mut rows = Vec::with_capacity(panel.len());
    for row in panel.rows() {
        let index = deflators.require(row.naics2, row.year)?;
        let mut out = row.clone();
        for &f in fields {
            out.set_field(f, row.field(f).map(|v| v / index));
        }
        rows.push(out);
    }
    Panel::new(rows)
}

/// Deflates instrument face values with the borrower's industry index for
/// the report year, so acceptance compares real against real. Instruments
/// without a matching firm-year are left nominal; acceptance drops them.
pub fn deflate_instruments(
    instruments: &[DebtInstrument],
    panel: &Panel,
    deflators: &DeflatorTable,
) -> Result<Vec<DebtInstrument>> {
    instruments
        .iter()
        .map(|inst| {
            let mut out = inst.clone();
            if let Some(row) = panel.get(&inst.firm_id, inst.report_year) {
                out.face_value /= deflators.require(row.naics2, inst.report_year)?;
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel_store::FirmYear;
    use proptest::prelude::*;

    fn row(firm: &str, year: i32, naics: u16, sale: f64) -> FirmYear {
        let mut r = FirmYear::empty(firm, year, naics, 1990);
        r.sale = Some(sale);
        r.emp = Some(3.0);
        r
    }

    #[test]
    fn nominal_over_index() {
        let panel = Panel::new(vec![row("a", 2005, 33, 100.0)]).unwrap();
        let mut t = DeflatorTable::new();
        t.insert(33, 2005, 1.25).unwrap();
        let out = deflate(&panel, &t, &[FirmField::Sale]).unwrap();
        assert_eq!(out.rows()[0].sale, Some(80.0));
        assert_eq!(out.rows()[0].emp, Some(3.0));
    }

    #[test]
    fn base_year_is_identity() {
        let panel = Panel::new(vec![row("a", 2002, 33, 123.5)]).unwrap();
        let mut t = DeflatorTable::new();
        t.insert(33, 2002, 1.0).unwrap();
        let out = deflate(&panel, &t, &FirmField::currency_fields()).unwrap();
        assert_eq!(out.rows(), panel.rows());
    }

    #[test]
    fn missing_deflator_names_key() {
        let panel = Panel::new(vec![row("a", 2005, 33, 100.0)]).unwrap();
        let err = deflate(&panel, &DeflatorTable::new(), &[FirmField::Sale]).unwrap_err();
        assert!(matches!(err, Error::MissingDeflator { naics2: 33, year: 2005 }));
    }

    #[test]
    fn mixed_industries_match_rowwise_division() {
        let rows = vec![
            row("a", 2004, 33, 10.0),
            row("a", 2005, 33, 20.0),
            row("b", 2004, 42, 30.0),
            row("c", 2005, 51, 40.0),
        ];
        let idx = [
            ((33, 2004), 1.1),
            ((33, 2005), 1.3),
            ((42, 2004), 0.9),
            ((51, 2005), 2.0),
        ];
        let mut t = DeflatorTable::new();
        for ((n, y), v) in idx {
            t.insert(n, y, v).unwrap();
        }
        let panel = Panel::new(rows.clone()).unwrap();
        let out = deflate(&panel, &t, &[FirmField::Sale]).unwrap();
        for r in out.rows() {
            let orig = rows
                .iter()
                .find(|o| o.firm_id == r.firm_id && o.year == r.year)
                .unwrap();
            let i = idx.iter().find(|(k, _)| *k == (r.naics2, r.year)).unwrap().1;
            assert_eq!(r.sale, Some(orig.sale.unwrap() / i));
        }
    }

    #[test]
    fn rejects_non_currency_field() {
        let panel = Panel::new(vec![row("a", 2005, 33, 100.0)]).unwrap();
        assert!(deflate(&panel, &DeflatorTable::new(), &[FirmField::Emp]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let data = "naics2,year,index\n33,2002,1\n33,2003,1.05\n";
        let t = DeflatorTable::from_reader(data.as_bytes(), "d.csv").unwrap();
        assert_eq!(t.get(33, 2003), Some(1.05));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(DeflatorTable::from_reader(buf.as_slice(), "d.csv").unwrap(), t);
    }

    proptest! {
        #[test]
        fn deflation_is_linear(x in 0.01f64..1e6, a in 0.01f64..100.0, idx in 0.1f64..5.0) {
            let mut t = DeflatorTable::new();
            t.insert(33, 2005, idx).unwrap();
            let p1 = Panel::new(vec![row("a", 2005, 33, a * x)]).unwrap();
            let p2 = Panel::new(vec![row("a", 2005, 33, x)]).unwrap();
            let lhs = deflate(&p1, &t, &[FirmField::Sale]).unwrap().rows()[0].sale.unwrap();
            let rhs = a * deflate(&p2, &t, &[FirmField::Sale]).unwrap().rows()[0].sale.unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }
}
