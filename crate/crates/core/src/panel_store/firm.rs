use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Two-digit NAICS sectors removed from every sample.
pub const EXCLUDED_SECTORS: [u16; 6] = [11, 22, 52, 55, 81, 92];

/// Column order of `firm_years.csv`. The reader rejects any other header.
pub const FIRM_YEAR_HEADER: [&str; 22] = [
    "firm_id",
    "year",
    "naics2",
    "at",
    "sale",
    "cogs",
    "ppent",
    "capx",
    "xint",
    "ebitda",
    "dltt",
    "dlc",
    "ib",
    "che",
    "lt",
    "xrd",
    "emp",
    "xlr",
    "tobins_q",
    "first_listed_year",
    "exit_flag",
    "market_equity",
];

/// One firm-year of financial statement data. Every financial field may be
/// absent; absence is kept as `None` and never replaced by zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FirmYear {
    pub firm_id: String,
    pub year: i32,
    pub naics2: u16,
    pub at: Option<f64>,
    pub sale: Option<f64>,
    pub cogs: Option<f64>,
    pub ppent: Option<f64>,
    pub capx: Option<f64>,
    pub xint: Option<f64>,
    pub ebitda: Option<f64>,
    pub dltt: Option<f64>,
    pub dlc: Option<f64>,
    pub ib: Option<f64>,
    pub che: Option<f64>,
    pub lt: Option<f64>,
    pub xrd: Option<f64>,
    /// Employees in thousands.
    pub emp: Option<f64>,
    pub xlr: Option<f64>,
    pub tobins_q: Option<f64>,
    pub first_listed_year: i32,
    /// Set on the firm's final observed year when it was liquidated afterwards.
    pub exit_flag: bool,
    pub market_equity: Option<f64>,
}

impl FirmYear {
    /// A row with identifiers only; all financial fields absent.
    pub fn empty(firm_id: impl Into<String>, year: i32, naics2: u16, first_listed_year: i32) -> Self {
        FirmYear {
            firm_id: firm_id.into(),
            year,
            naics2,
            at: None,
            sale: None,
            cogs: None,
            ppent: None,
            capx: None,
            xint: None,
            ebitda: None,
            dltt: None,
            dlc: None,
            ib: None,
            che: None,
            lt: None,
            xrd: None,
            emp: None,
            xlr: None,
            tobins_q: None,
            first_listed_year,
            exit_flag: false,
            market_equity: None,
        }
    }

    pub fn field(&self, field: FirmField) -> Option<f64> {
        *self.slot(field)
    }

    pub fn set_field(&mut self, field: FirmField, value: Option<f64>) {
        *self.slot_mut(field) = value;
    }

    /// Book total debt, DLTT + DLC. Absent unless both components are reported.
    pub fn total_debt(&self) -> Option<f64> {
        Some(self.dltt? + self.dlc?)
    }

    fn slot(&self, field: FirmField) -> &Option<f64> {
        use FirmField::*;
        match field {
            At => &self.at,
            Sale => &self.sale,
            Cogs => &self.cogs,
            Ppent => &self.ppent,
            Capx => &self.capx,
            Xint => &self.xint,
            Ebitda => &self.ebitda,
            Dltt => &self.dltt,
            Dlc => &self.dlc,
            Ib => &self.ib,
            Che => &self.che,
            Lt => &self.lt,
            Xrd => &self.xrd,
            Emp => &self.emp,
            Xlr => &self.xlr,
            TobinsQ => &self.tobins_q,
            MarketEquity => &self.market_equity,
        }
    }

    fn slot_mut(&mut self, field: FirmField) -> &mut Option<f64> {
        use FirmField::*;
        match field {
            At => &mut self.at,
            Sale => &mut self.sale,
            Cogs => &mut self.cogs,
            Ppent => &mut self.ppent,
            Capx => &mut self.capx,
            Xint => &mut self.xint,
            Ebitda => &mut self.ebitda,
            Dltt => &mut self.dltt,
            Dlc => &mut self.dlc,
            Ib => &mut self.ib,
            Che => &mut self.che,
            Lt => &mut self.lt,
            Xrd => &mut self.xrd,
            Emp => &mut self.emp,
            Xlr => &mut self.xlr,
            TobinsQ => &mut self.tobins_q,
            MarketEquity => &mut self.market_equity,
        }
    }
}

/// The optional numeric columns of a [`FirmYear`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FirmField {
    At,
    Sale,
    Cogs,
    Ppent,
    Capx,
    Xint,
    Ebitda,
    Dltt,
    Dlc,
    Ib,
    Che,
    Lt,
    Xrd,
    Emp,
    Xlr,
    TobinsQ,
    MarketEquity,
}

impl FirmField {
    pub const ALL: [FirmField; 17] = [
        FirmField::At,
        FirmField::Sale,
        FirmField::Cogs,
        FirmField::Ppent,
        FirmField::Capx,
        FirmField::Xint,
        FirmField::Ebitda,
        FirmField::Dltt,
        FirmField::Dlc,
        FirmField::Ib,
        FirmField::Che,
        FirmField::Lt,
        FirmField::Xrd,
        FirmField::Emp,
        FirmField::Xlr,
        FirmField::TobinsQ,
        FirmField::MarketEquity,
    ];

    /// Fields measured in currency units, i.e. the ones that get deflated.
    pub fn currency_fields() -> Vec<FirmField> {
        Self::ALL.into_iter().filter(|f| f.is_currency()).collect()
    }

    pub fn is_currency(self) -> bool {
        !matches!(self, FirmField::Emp | FirmField::TobinsQ)
    }

    pub fn name(self) -> &'static str {
        use FirmField::*;
        match self {
            At => "at",
            Sale => "sale",
            Cogs => "cogs",
            Ppent => "ppent",
            Capx => "capx",
            Xint => "xint",
            Ebitda => "ebitda",
            Dltt => "dltt",
            Dlc => "dlc",
            Ib => "ib",
            Che => "che",
            Lt => "lt",
            Xrd => "xrd",
            Emp => "emp",
            Xlr => "xlr",
            TobinsQ => "tobins_q",
            MarketEquity => "market_equity",
        }
    }
}

impl fmt::Display for FirmField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FirmField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FirmField::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownColumn(s.to_string()))
    }
}

/// Inclusive range of calendar years kept at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct YearWindow {
    pub start: i32,
    pub end: i32,
}

impl YearWindow {
    pub fn new(start: i32, end: i32) -> Result<Self> {
        if start > end {
            return Err(Error::Config(format!("empty year window {start}..{end}")));
        }
        Ok(YearWindow { start, end })
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }
}

impl Default for YearWindow {
    fn default() -> Self {
        YearWindow { start: 2002, end: 2019 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    OutsideWindow,
    ExcludedSector,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::OutsideWindow => f.write_str("outside window"),
            DropReason::ExcludedSector => f.write_str("excluded sector"),
        }
    }
}

/// Row accounting for one ingestion: `kept + Σ dropped == input_rows`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub input_rows: usize,
    pub kept: usize,
    pub dropped: BTreeMap<DropReason, usize>,
}

impl IngestReport {
    pub fn dropped_for(&self, reason: DropReason) -> usize {
        self.dropped.get(&reason).copied().unwrap_or(0)
    }
}

/// Immutable firm-year panel sorted by `(firm_id, year)` with unique keys.
#[derive(Debug, Clone, Default)]
pub struct Panel {
    rows: Vec<FirmYear>,
    firms: HashMap<String, Range<usize>>,
}

impl Panel {
    pub fn new(mut rows: Vec<FirmYear>) -> Result<Self> {
        rows.sort_by(|a, b| a.firm_id.cmp(&b.firm_id).then(a.year.cmp(&b.year)));
        let mut firms = HashMap::new();
        let mut start = 0;
        for i in 0..rows.len() {
            if i > 0 && rows[i].firm_id == rows[i - 1].firm_id && rows[i].year == rows[i - 1].year {
                return Err(Error::DuplicateKey {
                    firm_id: rows[i].firm_id.clone(),
                    year: rows[i].year,
                });
            }
            let last = i + 1 == rows.len() || rows[i + 1].firm_id != rows[i].firm_id;
            if last {
                firms.insert(rows[i].firm_id.clone(), start..i + 1);
                start = i + 1;
            }
        }
        Ok(Panel { rows, firms })
    }

    pub fn rows(&self) -> &[FirmYear] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, firm_id: &str, year: i32) -> Option<&FirmYear> {
        self.position(firm_id, year).map(|i| &self.rows[i])
    }

    /// Row index of a firm-year within [`Panel::rows`].
    pub fn position(&self, firm_id: &str, year: i32) -> Option<usize> {
        let range = self.firms.get(firm_id)?;
        let slice = &self.rows[range.clone()];
        slice
            .binary_search_by(|r| r.year.cmp(&year))
            .ok()
            .map(|i| range.start + i)
    }

    /// The history of one firm, sorted by year.
    pub fn firm(&self, firm_id: &str) -> Option<&[FirmYear]> {
        self.firms.get(firm_id).map(|r| &self.rows[r.clone()])
    }

    /// Firm histories in firm-id order.
    pub fn firms(&self) -> impl Iterator<Item = &[FirmYear]> {
        self.rows.chunk_by(|a, b| a.firm_id == b.firm_id)
    }

    pub fn n_firms(&self) -> usize {
        self.firms.len()
    }

    pub fn into_rows(self) -> Vec<FirmYear> {
        self.rows
    }
}

/// Reads `firm_years.csv`, keeps rows inside `window` and outside the
/// excluded sectors.
pub fn ingest_firm_years(path: impl AsRef<Path>, window: YearWindow) -> Result<(Panel, IngestReport)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_firm_years(file, &path.display().to_string(), window)
}

pub fn read_firm_years<R: Read>(reader: R, file: &str, window: YearWindow) -> Result<(Panel, IngestReport)> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(csv.headers()?, &FIRM_YEAR_HEADER, file)?;

    let mut report = IngestReport::default();
    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        report.input_rows += 1;
        let row = parse_firm_year(&record, file, line)?;
        if !window.contains(row.year) {
            *report.dropped.entry(DropReason::OutsideWindow).or_default() += 1;
            continue;
        }
        if EXCLUDED_SECTORS.contains(&row.naics2) {
            *report.dropped.entry(DropReason::ExcludedSector).or_default() += 1;
            continue;
        }
        rows.push(row);
    }
    report.kept = rows.len();
    Ok((Panel::new(rows)?, report))
}

fn parse_firm_year(record: &csv::StringRecord, file: &str, line: u64) -> Result<FirmYear> {
    let malformed = |message: String| Error::Malformed {
        file: file.to_string(),
        line,
        message,
    };
    if record.len() != FIRM_YEAR_HEADER.len() {
        return Err(malformed(format!(
            "expected {} fields, found {}",
            FIRM_YEAR_HEADER.len(),
            record.len()
        )));
    }
    let cell = |i: usize| record.get(i).unwrap_or("").trim();
    let opt = |i: usize| -> Result<Option<f64>> {
        let s = cell(i);
        if s.is_empty() {
            return Ok(None);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ => Err(malformed(format!(
                "{}: not a finite number: `{s}`",
                FIRM_YEAR_HEADER[i]
            ))),
        }
    };
    let int = |i: usize| -> Result<i32> {
        cell(i)
            .parse::<i32>()
            .map_err(|_| malformed(format!("{}: not an integer: `{}`", FIRM_YEAR_HEADER[i], cell(i))))
    };

    let firm_id = cell(0).to_string();
    if firm_id.is_empty() {
        return Err(malformed("firm_id is empty".into()));
    }
    let naics2 = cell(2)
        .parse::<u16>()
        .map_err(|_| malformed(format!("naics2: not a sector code: `{}`", cell(2))))?;
    let exit_flag = parse_flag(cell(20)).ok_or_else(|| malformed(format!("exit_flag: `{}`", cell(20))))?;

    let row = FirmYear {
        firm_id,
        year: int(1)?,
        naics2,
        at: opt(3)?,
        sale: opt(4)?,
        cogs: opt(5)?,
        ppent: opt(6)?,
        capx: opt(7)?,
        xint: opt(8)?,
        ebitda: opt(9)?,
        dltt: opt(10)?,
        dlc: opt(11)?,
        ib: opt(12)?,
        che: opt(13)?,
        lt: opt(14)?,
        xrd: opt(15)?,
        emp: opt(16)?,
        xlr: opt(17)?,
        tobins_q: opt(18)?,
        first_listed_year: int(19)?,
        exit_flag,
        market_equity: opt(21)?,
    };
    if row.at.is_some_and(|v| v < 0.0) {
        return Err(malformed("at must be non-negative".into()));
    }
    if row.emp.is_some_and(|v| v < 0.0) {
        return Err(malformed("emp must be non-negative".into()));
    }
    Ok(row)
}

/// Accepts `0/1`, `true/false`; an empty cell reads as false.
pub(crate) fn parse_flag(s: &str) -> Option<bool> {
    match s.trim() {
        "" | "0" | "false" | "FALSE" | "False" => Some(false),
        "1" | "true" | "TRUE" | "True" => Some(true),
        _ => None,
    }
}

pub(crate) fn check_header(found: &csv::StringRecord, expected: &[&str], file: &str) -> Result<()> {
    let found: Vec<&str> = found.iter().map(str::trim).collect();
    if found == expected {
        return Ok(());
    }
    let missing = expected
        .iter()
        .filter(|c| !found.contains(c))
        .map(|c| c.to_string())
        .collect::<Vec<_>>();
    let mut unexpected = found
        .iter()
        .filter(|c| !expected.contains(c))
        .map(|c| c.to_string())
        .collect::<Vec<_>>();
    if missing.is_empty() && unexpected.is_empty() {
        unexpected.push(format!("column order: {}", found.join(",")));
    }
    Err(Error::Schema {
        file: file.to_string(),
        missing,
        unexpected,
    })
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes rows in the `firm_years.csv` schema.
pub fn write_firm_years<W: Write>(writer: W, rows: &[FirmYear]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(FIRM_YEAR_HEADER)?;
    for r in rows {
        let mut rec = vec![r.firm_id.clone(), r.year.to_string(), r.naics2.to_string()];
        for f in [
            r.at, r.sale, r.cogs, r.ppent, r.capx, r.xint, r.ebitda, r.dltt, r.dlc, r.ib, r.che, r.lt, r.xrd, r.emp,
            r.xlr, r.tobins_q,
        ] {
            rec.push(fmt_opt(f));
        }
        rec.push(r.first_listed_year.to_string());
        rec.push(if r.exit_flag { "1".into() } else { "0".into() });
        rec.push(fmt_opt(r.market_equity));
        csv.write_record(&rec)?;
    }
    csv.flush().map_err(|e| Error::io("<firm_years writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        FIRM_YEAR_HEADER.join(",")
    }

    fn line(firm: &str, year: i32, naics: u16) -> String {
        format!("{firm},{year},{naics},100,50,30,20,5,2,10,10,5,3,4,40,1,0.5,,1.2,1990,0,80")
    }

    #[test]
    fn excluded_sector_is_dropped_with_reason() {
        let data = format!("{}\n{}\n{}\n", header(), line("a", 2005, 52), line("b", 2005, 33));
        let (panel, report) = read_firm_years(data.as_bytes(), "t.csv", YearWindow::default()).unwrap();
        assert_eq!(panel.len(), 1);
        assert_eq!(report.dropped_for(DropReason::ExcludedSector), 1);
        assert_eq!(DropReason::ExcludedSector.to_string(), "excluded sector");
    }

    #[test]
    fn empty_file_gives_empty_panel() {
        let data = format!("{}\n", header());
        let (panel, report) = read_firm_years(data.as_bytes(), "t.csv", YearWindow::default()).unwrap();
        assert!(panel.is_empty());
        assert_eq!(report, IngestReport::default());
    }

    #[test]
    fn window_filter_keeps_eight_of_ten() {
        let mut data = header();
        for (i, year) in [2001, 2002, 2003, 2004, 2005, 2006, 2007, 2008, 2009, 2020]
            .iter()
            .enumerate()
        {
            data.push('\n');
            data.push_str(&line(&format!("f{i}"), *year, 33));
        }
        let (panel, report) = read_firm_years(data.as_bytes(), "t.csv", YearWindow::default()).unwrap();
        assert_eq!(panel.len(), 8);
        assert_eq!(report.kept + report.dropped.values().sum::<usize>(), report.input_rows);
        assert_eq!(report.dropped_for(DropReason::OutsideWindow), 2);
    }

    #[test]
    fn duplicate_key_is_a_hard_error_naming_the_key() {
        let data = format!("{}\n{}\n{}\n", header(), line("a", 2005, 33), line("a", 2005, 33));
        let err = read_firm_years(data.as_bytes(), "t.csv", YearWindow::default()).unwrap_err();
        match err {
            Error::DuplicateKey { firm_id, year } => assert_eq!((firm_id.as_str(), year), ("a", 2005)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let bad = line("a", 2005, 33).replace(",100,", ",abc,");
        let data = format!("{}\n{}\n{}\n", header(), line("b", 2005, 33), bad);
        let err = read_firm_years(data.as_bytes(), "t.csv", YearWindow::default()).unwrap_err();
        match err {
            Error::Malformed { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn header_mismatch_lists_column_diff() {
        let data = "firm_id,year\n";
        let err = read_firm_years(data.as_bytes(), "t.csv", YearWindow::default()).unwrap_err();
        match err {
            Error::Schema { missing, .. } => assert!(missing.contains(&"naics2".to_string())),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn negative_assets_rejected() {
        let bad = line("a", 2005, 33).replace(",100,", ",-1,");
        let data = format!("{}\n{}\n", header(), bad);
        assert!(matches!(
            read_firm_years(data.as_bytes(), "t.csv", YearWindow::default()),
            Err(Error::Malformed { .. })
        ));
    }

    #[test]
    fn absent_cells_stay_absent() {
        let data = format!("{}\n{}\n", header(), line("a", 2005, 33));
        let (panel, _) = read_firm_years(data.as_bytes(), "t.csv", YearWindow::default()).unwrap();
        assert_eq!(panel.rows()[0].xlr, None);
        assert_eq!(panel.rows()[0].emp, Some(0.5));
    }

    #[test]
    fn write_then_read_preserves_rows() {
        let data = format!("{}\n{}\n{}\n", header(), line("a", 2005, 33), line("a", 2006, 33));
        let (panel, _) = read_firm_years(data.as_bytes(), "t.csv", YearWindow::default()).unwrap();
        let mut buf = Vec::new();
        write_firm_years(&mut buf, panel.rows()).unwrap();
        let (again, _) = read_firm_years(buf.as_slice(), "t.csv", YearWindow::default()).unwrap();
        assert_eq!(panel.rows(), again.rows());
    }

    #[test]
    fn panel_lookup_by_firm_and_year() {
        let rows = vec![
            FirmYear::empty("b", 2004, 33, 1990),
            FirmYear::empty("a", 2005, 33, 1990),
            FirmYear::empty("a", 2003, 33, 1990),
        ];
        let panel = Panel::new(rows).unwrap();
        assert_eq!(panel.n_firms(), 2);
        assert_eq!(panel.firm("a").unwrap().len(), 2);
        assert!(panel.get("a", 2005).is_some());
        assert!(panel.get("a", 2004).is_none());
        assert_eq!(panel.firms().count(), 2);
    }
}
