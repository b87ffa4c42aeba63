//! Industry-year aggregates: zombie-credit shares and growth, industry bank
//! dependence and newbie shares.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::classifier::{canonical_sum, ClassifiedFirmYear, ZombieDefinition};
use crate::error::{Error, Result};
use crate::panel_store::{check_header, fmt_opt, CreditBucket, DebtInstrument, DebtType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Weight {
    #[default]
    FaceValue,
    Count,
}

impl FromStr for Weight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "face" | "face_value" => Ok(Weight::FaceValue),
            "count" => Ok(Weight::Count),
            other => Err(Error::Config(format!("unknown weight `{other}` (face|count)"))),
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weight::FaceValue => "face",
            Weight::Count => "count",
        })
    }
}

/// Which borrower year supplies the zombie status of an instrument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum StatusTiming {
    /// Status in the instrument's report year.
    #[default]
    ReportYear,
    /// Status in the year before the report year.
    PriorYear,
}

impl FromStr for StatusTiming {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "report_year" => Ok(StatusTiming::ReportYear),
            "prior_year" => Ok(StatusTiming::PriorYear),
            other => Err(Error::Config(format!(
                "unknown status timing `{other}` (report_year|prior_year)"
            ))),
        }
    }
}

/// Debt types plus the bank-credit union BC = BL + RC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CreditClass {
    BL,
    RC,
    BN,
    BC,
}

impl CreditClass {
    pub const ALL: [CreditClass; 4] = [CreditClass::BL, CreditClass::RC, CreditClass::BN, CreditClass::BC];

    pub fn of(t: DebtType) -> &'static [CreditClass] {
        match t {
            DebtType::BL => &[CreditClass::BL, CreditClass::BC],
            DebtType::RC => &[CreditClass::RC, CreditClass::BC],
            DebtType::BN => &[CreditClass::BN],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CreditClass::BL => "BL",
            CreditClass::RC => "RC",
            CreditClass::BN => "BN",
            CreditClass::BC => "BC",
        }
    }
}

impl fmt::Display for CreditClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub naics2: u16,
    pub year: i32,
    pub bucket: CreditBucket,
    pub class: CreditClass,
}

/// Weighted credit to zombie borrowers and to all determinable borrowers.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShareCell {
    pub zombie: f64,
    pub total: f64,
    /// Face-value volume to zombie borrowers, independent of the weight.
    pub zombie_volume: f64,
}

impl ShareCell {
    pub fn share(&self) -> Option<f64> {
        (self.total > 0.0).then(|| self.zombie / self.total)
    }
}

pub type CreditCells = BTreeMap<CellKey, ShareCell>;

struct StatusIndex<'a> {
    rows: HashMap<(&'a str, i32), &'a ClassifiedFirmYear>,
}

impl<'a> StatusIndex<'a> {
    fn new(classified: &'a [ClassifiedFirmYear]) -> Self {
        StatusIndex {
            rows: classified.iter().map(|c| ((c.firm_id.as_str(), c.year), c)).collect(),
        }
    }

    fn row(&self, firm: &str, year: i32) -> Option<&'a ClassifiedFirmYear> {
        self.rows.get(&(firm, year)).copied()
    }

    /// Borrower industry (report year) and zombie status (per timing).
    fn borrower(
        &self,
        inst: &DebtInstrument,
        def: ZombieDefinition,
        timing: StatusTiming,
    ) -> Option<(u16, Option<bool>)> {
        let report = self.row(&inst.firm_id, inst.report_year)?;
        let status = match timing {
            StatusTiming::ReportYear => report.zombie(def),
            StatusTiming::PriorYear => self
                .row(&inst.firm_id, inst.report_year - 1)
                .and_then(|r| r.zombie(def)),
        };
        Some((report.naics2, status))
    }
}

#[derive(Default)]
struct Acc {
    zombie: Vec<f64>,
    total: Vec<f64>,
    volume: Vec<f64>,
}

/// Zombie and total credit per `(naics2, year, bucket, class)`. Borrowers
/// with undetermined status are left out of both sums.
pub fn zombie_credit_cells(
    instruments: &[DebtInstrument],
    classified: &[ClassifiedFirmYear],
    def: ZombieDefinition,
    weight: Weight,
    timing: StatusTiming,
) -> CreditCells {
    let index = StatusIndex::new(classified);
    let mut acc: BTreeMap<CellKey, Acc> = BTreeMap::new();
    for inst in instruments {
        let Some((naics2, Some(zombie))) = index.borrower(inst, def, timing) else {
            continue;
        };
        let w = match weight {
            Weight::FaceValue => inst.face_value,
            Weight::Count => 1.0,
        };
        for bucket in CreditBucket::all() {
            if !bucket.contains(inst.maturity_quarters) {
                continue;
            }
            for &class in CreditClass::of(inst.debt_type) {
                let a = acc
                    .entry(CellKey {
                        naics2,
                        year: inst.report_year,
                        bucket,
                        class,
                    })
                    .or_default();
                a.total.push(w);
                if zombie {
                    a.zombie.push(w);
                    a.volume.push(inst.face_value);
                }
            }
        }
    }
    acc.into_iter()
        .map(|(k, mut a)| {
            (
                k,
                ShareCell {
                    zombie: canonical_sum(&mut a.zombie),
                    total: canonical_sum(&mut a.total),
                    zombie_volume: canonical_sum(&mut a.volume),
                },
            )
        })
        .collect()
}

/// `(bc_z_share, bn_z_share)` per `(naics2, year)` for one bucket.
pub fn zombie_credit_share(
    instruments: &[DebtInstrument],
    classified: &[ClassifiedFirmYear],
    def: ZombieDefinition,
    weight: Weight,
    bucket: CreditBucket,
) -> BTreeMap<(u16, i32), (Option<f64>, Option<f64>)> {
    let cells = zombie_credit_cells(instruments, classified, def, weight, StatusTiming::ReportYear);
    let mut out: BTreeMap<(u16, i32), (Option<f64>, Option<f64>)> = BTreeMap::new();
    for (k, c) in cells.iter().filter(|(k, _)| k.bucket == bucket) {
        let e = out.entry((k.naics2, k.year)).or_default();
        match k.class {
            CreditClass::BC => e.0 = c.share(),
            CreditClass::BN => e.1 = c.share(),
            _ => {}
        }
    }
    out
}

/// Sums cells over industries and years, per `(bucket, class)`.
pub fn sample_totals(cells: &CreditCells) -> BTreeMap<(CreditBucket, CreditClass), ShareCell> {
    let mut acc: BTreeMap<(CreditBucket, CreditClass), Acc> = BTreeMap::new();
    for (k, c) in cells {
        let a = acc.entry((k.bucket, k.class)).or_default();
        a.zombie.push(c.zombie);
        a.total.push(c.total);
        a.volume.push(c.zombie_volume);
    }
    acc.into_iter()
        .map(|(k, mut a)| {
            (
                k,
                ShareCell {
                    zombie: canonical_sum(&mut a.zombie),
                    total: canonical_sum(&mut a.total),
                    zombie_volume: canonical_sum(&mut a.volume),
                },
            )
        })
        .collect()
}

/// Log difference of a volume series between consecutive years; absent
/// unless both volumes are positive.
pub fn zombie_credit_growth(volumes: &BTreeMap<(u16, i32), f64>) -> BTreeMap<(u16, i32), Option<f64>> {
    volumes
        .iter()
        .map(|(&(s, t), &v)| {
            let prev = volumes.get(&(s, t - 1)).copied();
            let g = prev.filter(|&p| p > 0.0 && v > 0.0).map(|p| v.ln() - p.ln());
            ((s, t), g)
        })
        .collect()
}

/// Industry-year bank dependence for one bucket: summed BC face values
/// strictly above summed BN face values.
pub fn industry_dependence(
    instruments: &[DebtInstrument],
    classified: &[ClassifiedFirmYear],
    bucket: CreditBucket,
) -> BTreeMap<(u16, i32), bool> {
    let index = StatusIndex::new(classified);
    let mut acc: BTreeMap<(u16, i32), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for inst in instruments.iter().filter(|i| bucket.contains(i.maturity_quarters)) {
        let Some(row) = index.row(&inst.firm_id, inst.report_year) else {
            continue;
        };
        let e = acc.entry((row.naics2, inst.report_year)).or_default();
        if inst.debt_type.is_bank_credit() {
            e.0.push(inst.face_value);
        } else {
            e.1.push(inst.face_value);
        }
    }
    acc.into_iter()
        .map(|(k, (mut bc, mut bn))| (k, canonical_sum(&mut bc) > canonical_sum(&mut bn)))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NewbieCell {
    pub nb_count: usize,
    pub n_firms: usize,
    /// Counts restricted to firms with at least one accepted instrument.
    pub nb_borrowers: usize,
    pub n_borrowers: usize,
}

impl NewbieCell {
    pub fn nb_share(&self) -> Option<f64> {
        (self.n_firms > 0).then(|| self.nb_count as f64 / self.n_firms as f64)
    }

    pub fn nb_share_borrowers(&self) -> Option<f64> {
        (self.n_borrowers > 0).then(|| self.nb_borrowers as f64 / self.n_borrowers as f64)
    }
}

pub fn newbie_share(classified: &[ClassifiedFirmYear]) -> BTreeMap<(u16, i32), NewbieCell> {
    let mut out: BTreeMap<(u16, i32), NewbieCell> = BTreeMap::new();
    for c in classified {
        let e = out.entry((c.naics2, c.year)).or_default();
        e.n_firms += 1;
        e.nb_count += c.nb as usize;
        if c.flags.has_instrument {
            e.n_borrowers += 1;
            e.nb_borrowers += c.nb as usize;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AggregatorConfig {
    pub definition: ZombieDefinition,
    pub weight: Weight,
    pub timing: StatusTiming,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndustryYearAggregate {
    pub naics2: u16,
    pub year: i32,
    pub bucket: CreditBucket,
    pub bc_z_share: Option<f64>,
    pub bn_z_share: Option<f64>,
    pub bc_z_volume: f64,
    pub bn_z_volume: f64,
    pub dlog_bc_z: Option<f64>,
    pub dlog_bn_z: Option<f64>,
    pub bank_dep_sy: bool,
    pub capm_dep_sy: bool,
    pub nb_count: usize,
    pub n_firms: usize,
    pub nb_share: Option<f64>,
    pub nb_share_borrowers: Option<f64>,
}

/// One row per industry-year present in `classified` and per bucket.
pub fn aggregate(
    classified: &[ClassifiedFirmYear],
    instruments: &[DebtInstrument],
    config: &AggregatorConfig,
) -> Vec<IndustryYearAggregate> {
    let cells = zombie_credit_cells(instruments, classified, config.definition, config.weight, config.timing);
    let newbies = newbie_share(classified);
    let mut out = Vec::new();
    for bucket in CreditBucket::all() {
        let dependence = industry_dependence(instruments, classified, bucket);
        let cell_of = |s: u16, t: i32, class: CreditClass| {
            cells
                .get(&CellKey {
                    naics2: s,
                    year: t,
                    bucket,
                    class,
                })
                .copied()
        };
        let volumes = |class: CreditClass| -> BTreeMap<(u16, i32), f64> {
            newbies
                .keys()
                .map(|&(s, t)| ((s, t), cell_of(s, t, class).map_or(0.0, |c| c.zombie_volume)))
                .collect()
        };
        let g_bc = zombie_credit_growth(&volumes(CreditClass::BC));
        let g_bn = zombie_credit_growth(&volumes(CreditClass::BN));
        for (&(s, t), nb) in &newbies {
            let bc = cell_of(s, t, CreditClass::BC).unwrap_or_default();
            let bn = cell_of(s, t, CreditClass::BN).unwrap_or_default();
            let bank_dep = dependence.get(&(s, t)).copied().unwrap_or(false);
            out.push(IndustryYearAggregate {
                naics2: s,
                year: t,
                bucket,
                bc_z_share: bc.share(),
                bn_z_share: bn.share(),
                bc_z_volume: bc.zombie_volume,
                bn_z_volume: bn.zombie_volume,
                dlog_bc_z: g_bc[&(s, t)],
                dlog_bn_z: g_bn[&(s, t)],
                bank_dep_sy: bank_dep,
                capm_dep_sy: !bank_dep,
                nb_count: nb.nb_count,
                n_firms: nb.n_firms,
                nb_share: nb.nb_share(),
                nb_share_borrowers: nb.nb_share_borrowers(),
            });
        }
    }
    out.sort_by(|a, b| (a.naics2, a.year, a.bucket).cmp(&(b.naics2, b.year, b.bucket)));
    out
}

pub const INDUSTRY_YEAR_HEADER: [&str; 15] = [
    "naics2",
    "year",
    "bucket",
    "bc_z_share",
    "bn_z_share",
    "bc_z_volume",
    "bn_z_volume",
    "dlog_bc_z",
    "dlog_bn_z",
    "bank_dep_sy",
    "capm_dep_sy",
    "nb_count",
    "n_firms",
    "nb_share",
    "nb_share_borrowers",
];

pub fn write_industry_year<W: Write>(writer: W, rows: &[IndustryYearAggregate]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(INDUSTRY_YEAR_HEADER)?;
    let bit = |b: bool| if b { "1".to_string() } else { "0".to_string() };
    for r in rows {
        csv.write_record([
            r.naics2.to_string(),
            r.year.to_string(),
            r.bucket.to_string(),
            fmt_opt(r.bc_z_share),
            fmt_opt(r.bn_z_share),
            r.bc_z_volume.to_string(),
            r.bn_z_volume.to_string(),
            fmt_opt(r.dlog_bc_z),
            fmt_opt(r.dlog_bn_z),
            bit(r.bank_dep_sy),
            bit(r.capm_dep_sy),
            r.nb_count.to_string(),
            r.n_firms.to_string(),
            fmt_opt(r.nb_share),
            fmt_opt(r.nb_share_borrowers),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<industry-year writer>", e))?;
    Ok(())
}

pub fn read_industry_year<R: Read>(reader: R, file: &str) -> Result<Vec<IndustryYearAggregate>> {
    let mut csv = csv::Reader::from_reader(reader);
    check_header(csv.headers()?, &INDUSTRY_YEAR_HEADER, file)?;
    let mut out = Vec::new();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |what: &str| Error::Malformed {
            file: file.to_string(),
            line,
            message: format!("bad {what}"),
        };
        let opt = |i: usize| -> Result<Option<f64>> {
            let s = &record[i];
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(INDUSTRY_YEAR_HEADER[i]))
            }
        };
        let num = |i: usize| -> Result<f64> { opt(i)?.ok_or_else(|| bad(INDUSTRY_YEAR_HEADER[i])) };
        let int = |i: usize| -> Result<usize> { record[i].parse().map_err(|_| bad(INDUSTRY_YEAR_HEADER[i])) };
        out.push(IndustryYearAggregate {
            naics2: record[0].parse().map_err(|_| bad("naics2"))?,
            year: record[1].parse().map_err(|_| bad("year"))?,
            bucket: CreditBucket::from_label(&record[2]).ok_or_else(|| bad("bucket"))?,
            bc_z_share: opt(3)?,
            bn_z_share: opt(4)?,
            bc_z_volume: num(5)?,
            bn_z_volume: num(6)?,
            dlog_bc_z: opt(7)?,
            dlog_bn_z: opt(8)?,
            bank_dep_sy: &record[9] == "1",
            capm_dep_sy: &record[10] == "1",
            nb_count: int(11)?,
            n_firms: int(12)?,
            nb_share: opt(13)?,
            nb_share_borrowers: opt(14)?,
        });
    }
    Ok(out)
}

/// Sample-wide counts in the layout of a debt-by-maturity table: all,
/// zombie and non-zombie borrowers per class and bucket.
pub fn write_debt_counts<W: Write>(
    writer: W,
    totals: &BTreeMap<(CreditBucket, CreditClass), ShareCell>,
    def: ZombieDefinition,
    weight: Weight,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record([
        "definition",
        "weight",
        "class",
        "bucket",
        "all",
        "zombie",
        "non_zombie",
        "zombie_share",
    ])?;
    for class in CreditClass::ALL {
        for bucket in CreditBucket::all() {
            let c = totals.get(&(bucket, class)).copied().unwrap_or_default();
            csv.write_record([
                def.to_string(),
                weight.to_string(),
                class.to_string(),
                bucket.to_string(),
                c.total.to_string(),
                c.zombie.to_string(),
                (c.total - c.zombie).to_string(),
                fmt_opt(c.share()),
            ])?;
        }
    }
    csv.flush().map_err(|e| Error::io("<debt count writer>", e))?;
    Ok(())
}
