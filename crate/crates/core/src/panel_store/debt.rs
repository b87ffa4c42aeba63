use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::firm::{check_header, Panel};
use crate::error::{Error, Result};

pub const INSTRUMENT_HEADER: [&str; 6] = [
    "firm_id",
    "component_id",
    "report_year",
    "debt_type",
    "face_value",
    "maturity_quarters",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DebtType {
    /// Bank and term loans.
    BL,
    /// Revolving credit facilities.
    RC,
    /// Bonds and notes.
    BN,
}

impl DebtType {
    pub const ALL: [DebtType; 3] = [DebtType::BL, DebtType::RC, DebtType::BN];

    pub fn is_bank_credit(self) -> bool {
        matches!(self, DebtType::BL | DebtType::RC)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DebtType::BL => "BL",
            DebtType::RC => "RC",
            DebtType::BN => "BN",
        }
    }
}

impl fmt::Display for DebtType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DebtType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "BL" => Ok(DebtType::BL),
            "RC" => Ok(DebtType::RC),
            "BN" => Ok(DebtType::BN),
            other => Err(format!("unknown debt type `{other}`")),
        }
    }
}

/// Maturity bins in quarters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MaturityBucket {
    Q1To4,
    Q5To8,
    Q9To20,
    Q21To40,
    Q41To100,
    Q101To120,
    Q121To200,
    OutOfRange,
}

impl MaturityBucket {
    pub const IN_RANGE: [MaturityBucket; 7] = [
        MaturityBucket::Q1To4,
        MaturityBucket::Q5To8,
        MaturityBucket::Q9To20,
        MaturityBucket::Q21To40,
        MaturityBucket::Q41To100,
        MaturityBucket::Q101To120,
        MaturityBucket::Q121To200,
    ];

    pub fn from_quarters(q: u32) -> Self {
        match q {
            1..=4 => MaturityBucket::Q1To4,
            5..=8 => MaturityBucket::Q5To8,
            9..=20 => MaturityBucket::Q9To20,
            21..=40 => MaturityBucket::Q21To40,
            41..=100 => MaturityBucket::Q41To100,
            101..=120 => MaturityBucket::Q101To120,
            121..=200 => MaturityBucket::Q121To200,
            _ => MaturityBucket::OutOfRange,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MaturityBucket::Q1To4 => "1-4Q",
            MaturityBucket::Q5To8 => "5-8Q",
            MaturityBucket::Q9To20 => "9-20Q",
            MaturityBucket::Q21To40 => "21-40Q",
            MaturityBucket::Q41To100 => "41-100Q",
            MaturityBucket::Q101To120 => "101-120Q",
            MaturityBucket::Q121To200 => "121-200Q",
            MaturityBucket::OutOfRange => "out-of-range",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::IN_RANGE
            .into_iter()
            .chain([MaturityBucket::OutOfRange])
            .find(|b| b.label() == s)
    }

    /// Coarse split membership; buckets beyond 40 quarters belong to neither side.
    pub fn split(self) -> Option<MaturitySplit> {
        match self {
            MaturityBucket::Q1To4 => Some(MaturitySplit::Short),
            MaturityBucket::Q5To8 | MaturityBucket::Q9To20 | MaturityBucket::Q21To40 => Some(MaturitySplit::Long),
            _ => None,
        }
    }
}

impl fmt::Display for MaturityBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// `maturity_quarters` to its bin label.
pub fn maturity_bucket(maturity_quarters: u32) -> MaturityBucket {
    MaturityBucket::from_quarters(maturity_quarters)
}

/// Short = 1-4Q, long = 5-40Q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MaturitySplit {
    Short,
    Long,
}

impl MaturitySplit {
    pub const ALL: [MaturitySplit; 2] = [MaturitySplit::Short, MaturitySplit::Long];

    pub fn label(self) -> &'static str {
        match self {
            MaturitySplit::Short => "short",
            MaturitySplit::Long => "long",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "short" => Some(MaturitySplit::Short),
            "long" => Some(MaturitySplit::Long),
            _ => None,
        }
    }

    pub fn contains(self, q: u32) -> bool {
        MaturityBucket::from_quarters(q).split() == Some(self)
    }
}

impl fmt::Display for MaturitySplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Aggregation key on the maturity axis: a fine bin or a coarse split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CreditBucket {
    Bin(MaturityBucket),
    Split(MaturitySplit),
}

impl CreditBucket {
    /// The seven in-range bins followed by the two coarse splits.
    pub fn all() -> Vec<CreditBucket> {
        MaturityBucket::IN_RANGE
            .into_iter()
            .map(CreditBucket::Bin)
            .chain(MaturitySplit::ALL.into_iter().map(CreditBucket::Split))
            .collect()
    }

    pub fn contains(self, q: u32) -> bool {
        match self {
            CreditBucket::Bin(MaturityBucket::OutOfRange) => false,
            CreditBucket::Bin(b) => MaturityBucket::from_quarters(q) == b,
            CreditBucket::Split(s) => s.contains(q),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CreditBucket::Bin(b) => b.label(),
            CreditBucket::Split(s) => s.label(),
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        MaturitySplit::from_label(s)
            .map(CreditBucket::Split)
            .or_else(|| MaturityBucket::from_label(s).map(CreditBucket::Bin))
    }
}

impl fmt::Display for CreditBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DebtInstrument {
    pub firm_id: String,
    pub component_id: String,
    pub report_year: i32,
    pub debt_type: DebtType,
    pub face_value: f64,
    pub maturity_quarters: u32,
}

impl DebtInstrument {
    pub fn bucket(&self) -> MaturityBucket {
        MaturityBucket::from_quarters(self.maturity_quarters)
    }
}

pub fn read_instruments(path: impl AsRef<Path>) -> Result<Vec<DebtInstrument>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_instruments_from(file, &path.display().to_string())
}

pub fn read_instruments_from<R: Read>(reader: R, file: &str) -> Result<Vec<DebtInstrument>> {
    let mut csv = csv::Reader::from_reader(reader);
    check_header(csv.headers()?, &INSTRUMENT_HEADER, file)?;
    let mut out = Vec::new();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |message: String| Error::Malformed {
            file: file.to_string(),
            line,
            message,
        };
        if record.len() != INSTRUMENT_HEADER.len() {
            return Err(malformed(format!("expected 6 fields, found {}", record.len())));
        }
        let cell = |i: usize| record[i].trim();
        let face_value = cell(4)
            .parse::<f64>()
            .map_err(|_| malformed(format!("face_value: `{}`", cell(4))))?;
        if !(face_value.is_finite() && face_value > 0.0) {
            return Err(malformed(format!("face_value must be positive, got {face_value}")));
        }
        let maturity_quarters = cell(5)
            .parse::<u32>()
            .ok()
            .filter(|&q| q >= 1)
            .ok_or_else(|| malformed(format!("maturity_quarters must be an integer >= 1, got `{}`", cell(5))))?;
        out.push(DebtInstrument {
            firm_id: cell(0).to_string(),
            component_id: cell(1).to_string(),
            report_year: cell(2)
                .parse()
                .map_err(|_| malformed(format!("report_year: `{}`", cell(2))))?,
            debt_type: cell(3).parse().map_err(malformed)?,
            face_value,
            maturity_quarters,
        });
    }
    Ok(out)
}

pub fn write_instruments<W: Write>(writer: W, instruments: &[DebtInstrument]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(INSTRUMENT_HEADER)?;
    for i in instruments {
        csv.write_record([
            i.firm_id.clone(),
            i.component_id.clone(),
            i.report_year.to_string(),
            i.debt_type.to_string(),
            i.face_value.to_string(),
            i.maturity_quarters.to_string(),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<instrument writer>", e))?;
    Ok(())
}

/// Preference between two reports of one component: earlier year, then
/// larger face value, then the remaining fields in lexicographic order.
fn preferred(a: &DebtInstrument, b: &DebtInstrument) -> Ordering {
    a.report_year
        .cmp(&b.report_year)
        .then(b.face_value.total_cmp(&a.face_value))
        .then_with(|| a.firm_id.cmp(&b.firm_id))
        .then(a.debt_type.cmp(&b.debt_type))
        .then(a.maturity_quarters.cmp(&b.maturity_quarters))
}

/// Keeps one record per `component_id`: its first appearance. Output keeps
/// input order.
pub fn dedup_new_contracts(instruments: &[DebtInstrument]) -> Vec<DebtInstrument> {
    let mut best: HashMap<&str, usize> = HashMap::new();
    for (i, inst) in instruments.iter().enumerate() {
        best.entry(inst.component_id.as_str())
            .and_modify(|j| {
                if preferred(inst, &instruments[*j]) == Ordering::Less {
                    *j = i;
                }
            })
            .or_insert(i);
    }
    let mut keep = vec![false; instruments.len()];
    for &i in best.values() {
        keep[i] = true;
    }
    instruments
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(i, _)| i.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RejectReason {
    FaceValueExceedsDebt,
    NoMatchingFinancials,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::FaceValueExceedsDebt => f.write_str("face value exceeds total debt"),
            RejectReason::NoMatchingFinancials => f.write_str("no matching financials"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AcceptanceCell {
    pub total: usize,
    pub accepted: usize,
}

impl AcceptanceCell {
    /// Accepted share in percent; absent for an empty cell.
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.accepted as f64 / self.total as f64)
    }
}

/// Acceptance accounting by debt type and maturity bin.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AcceptanceReport {
    pub input: usize,
    pub cells: BTreeMap<(DebtType, MaturityBucket), AcceptanceCell>,
    pub rejected: BTreeMap<RejectReason, usize>,
}

impl AcceptanceReport {
    pub fn cell(&self, debt_type: DebtType, bucket: MaturityBucket) -> AcceptanceCell {
        self.cells.get(&(debt_type, bucket)).copied().unwrap_or_default()
    }

    pub fn rate(&self, debt_type: DebtType, bucket: MaturityBucket) -> Option<f64> {
        self.cell(debt_type, bucket).rate()
    }

    pub fn accepted(&self) -> usize {
        self.cells.values().map(|c| c.accepted).sum()
    }

    pub fn rejected_for(&self, reason: RejectReason) -> usize {
        self.rejected.get(&reason).copied().unwrap_or(0)
    }

    /// Long format: `debt_type,maturity_bucket,total,accepted,rate_pct`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["debt_type", "maturity_bucket", "total", "accepted", "rate_pct"])?;
        for t in DebtType::ALL {
            for b in MaturityBucket::IN_RANGE.into_iter().chain([MaturityBucket::OutOfRange]) {
                let c = self.cell(t, b);
                if c.total == 0 && b == MaturityBucket::OutOfRange {
                    continue;
                }
                csv.write_record([
                    t.to_string(),
                    b.to_string(),
                    c.total.to_string(),
                    c.accepted.to_string(),
                    c.rate().map(|r| format!("{r:.2}")).unwrap_or_default(),
                ])?;
            }
        }
        csv.flush().map_err(|e| Error::io("<acceptance writer>", e))?;
        Ok(())
    }
}

/// Keeps instruments whose face value does not exceed the borrower's total
/// debt (DLTT + DLC) in the report year.
pub fn accept_by_face_value(instruments: &[DebtInstrument], panel: &Panel) -> (Vec<DebtInstrument>, AcceptanceReport) {
    let mut report = AcceptanceReport {
        input: instruments.len(),
        ..Default::default()
    };
    let mut accepted = Vec::new();
    for inst in instruments {
        let cell = report.cells.entry((inst.debt_type, inst.bucket())).or_default();
        cell.total += 1;
        let debt = panel.get(&inst.firm_id, inst.report_year).and_then(|r| r.total_debt());
        match debt {
            None => *report.rejected.entry(RejectReason::NoMatchingFinancials).or_default() += 1,
            Some(d) if inst.face_value <= d => {
                cell.accepted += 1;
                accepted.push(inst.clone());
            }
            Some(_) => *report.rejected.entry(RejectReason::FaceValueExceedsDebt).or_default() += 1,
        }
    }
    (accepted, report)
}
