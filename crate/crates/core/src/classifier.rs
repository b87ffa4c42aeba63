//! Zombie status under three nested definitions, plus SME, newbie, exit,
//! dependence and bond-access flags.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::DerivedFirmYear;
use crate::panel_store::{fmt_opt, CreditBucket, DebtInstrument, DebtType, FirmField, Panel};

/// Minimum age in years for a zombie.
pub const MIN_ZOMBIE_AGE: i32 = 10;
/// SME threshold on `emp`, which is in thousands.
pub const SME_EMP_THOUSANDS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum ZombieDefinition {
    Broad,
    NarrowX,
    #[default]
    Nar,
}

impl ZombieDefinition {
    pub const ALL: [ZombieDefinition; 3] = [
        ZombieDefinition::Broad,
        ZombieDefinition::NarrowX,
        ZombieDefinition::Nar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ZombieDefinition::Broad => "broad",
            ZombieDefinition::NarrowX => "narrow_x",
            ZombieDefinition::Nar => "nar",
        }
    }
}

impl fmt::Display for ZombieDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ZombieDefinition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ZombieDefinition::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown zombie definition `{s}` (broad|narrow_x|nar)")))
    }
}

/// Three-valued conjunction: any false gives false, else any unknown gives unknown.
pub fn kleene_and(values: impl IntoIterator<Item = Option<bool>>) -> Option<bool> {
    let mut unknown = false;
    for v in values {
        match v {
            Some(false) => return Some(false),
            None => unknown = true,
            Some(true) => {}
        }
    }
    if unknown {
        None
    } else {
        Some(true)
    }
}

/// Per-year inputs to zombie classification for one firm, sorted by year.
#[derive(Debug, Clone, PartialEq)]
pub struct StatusInput {
    pub year: i32,
    pub naics2: u16,
    pub age: i32,
    pub icr_low_coverage: Option<bool>,
    pub tobins_q: Option<f64>,
}

impl From<&DerivedFirmYear> for StatusInput {
    fn from(d: &DerivedFirmYear) -> Self {
        StatusInput {
            year: d.year,
            naics2: d.naics2,
            age: d.age,
            icr_low_coverage: d.icr_low_coverage,
            tobins_q: d.tobins_q_filled,
        }
    }
}

fn flag_at(history: &[StatusInput], year: i32) -> Option<bool> {
    history
        .binary_search_by(|h| h.year.cmp(&year))
        .ok()
        .and_then(|i| history[i].icr_low_coverage)
}

/// Low coverage in t-2, t-1 and t and age at least ten. A missing year counts
/// as an absent flag.
pub fn classify_broad(history: &[StatusInput]) -> Vec<Option<bool>> {
    history
        .iter()
        .map(|h| {
            kleene_and([
                Some(h.age >= MIN_ZOMBIE_AGE),
                flag_at(history, h.year - 2),
                flag_at(history, h.year - 1),
                h.icr_low_coverage,
            ])
        })
        .collect()
}

/// `(z_narrow_x, z_nar)` per year. Both require the broad conditions; the
/// narrow-x variant needs Q below the industry median, the other also accepts
/// an unavailable comparison.
pub fn classify_narrow(
    history: &[StatusInput],
    industry_median_q: &BTreeMap<(u16, i32), f64>,
) -> Vec<(Option<bool>, Option<bool>)> {
    classify_broad(history)
        .into_iter()
        .zip(history)
        .map(|(broad, h)| {
            let below = h
                .tobins_q
                .zip(industry_median_q.get(&(h.naics2, h.year)))
                .map(|(q, m)| q < *m);
            let nx = kleene_and([broad, below]);
            let nar = kleene_and([broad, Some(below.unwrap_or(true))]);
            (nx, nar)
        })
        .collect()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median Tobin's Q over reporting firms per `(naics2, year)`.
pub fn industry_median_q(derived: &[DerivedFirmYear]) -> BTreeMap<(u16, i32), f64> {
    let mut groups: BTreeMap<(u16, i32), Vec<f64>> = BTreeMap::new();
    for d in derived {
        if let Some(q) = d.tobins_q_filled {
            groups.entry((d.naics2, d.year)).or_default().push(q);
        }
    }
    groups.into_iter().map(|(k, mut v)| (k, median(&mut v))).collect()
}

/// Time-invariant firm flags from its accepted instruments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FirmFlags {
    pub bank_dep: bool,
    pub capm_dep: bool,
    pub has_instrument: bool,
    /// Buckets in which the firm issued at least one bond.
    pub bond: BTreeSet<CreditBucket>,
}

impl FirmFlags {
    pub fn bond(&self, bucket: CreditBucket) -> bool {
        self.bond.contains(&bucket)
    }

    pub fn no_bond(&self, bucket: CreditBucket) -> bool {
        !self.bond(bucket)
    }
}

/// Bank dependence compares summed bank credit (BL + RC) with summed bonds
/// over the whole sample, strictly.
pub fn firm_flags<'a>(instruments: impl IntoIterator<Item = &'a DebtInstrument>) -> FirmFlags {
    let mut bc = Vec::new();
    let mut bn = Vec::new();
    let mut flags = FirmFlags::default();
    for inst in instruments {
        flags.has_instrument = true;
        if inst.debt_type.is_bank_credit() {
            bc.push(inst.face_value);
        } else {
            bn.push(inst.face_value);
            for b in CreditBucket::all() {
                if b.contains(inst.maturity_quarters) {
                    flags.bond.insert(b);
                }
            }
        }
    }
    flags.bank_dep = canonical_sum(&mut bc) > canonical_sum(&mut bn);
    flags.capm_dep = !flags.bank_dep;
    flags
}

/// Order-independent floating-point sum.
pub(crate) fn canonical_sum(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().fold(0.0, |a, x| a + x)
}

/// SME when fewer than 1000 employees; absent without an employee count.
pub fn is_sme(emp: Option<f64>) -> Option<bool> {
    emp.map(|e| e < SME_EMP_THOUSANDS)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedFirmYear {
    pub firm_id: String,
    pub year: i32,
    pub naics2: u16,
    pub age: i32,
    pub z_broad: Option<bool>,
    pub z_narrow_x: Option<bool>,
    pub z_nar: Option<bool>,
    pub sm: Option<bool>,
    pub nb: bool,
    pub e_exit: bool,
    pub flags: FirmFlags,
}

impl ClassifiedFirmYear {
    pub fn zombie(&self, def: ZombieDefinition) -> Option<bool> {
        match def {
            ZombieDefinition::Broad => self.z_broad,
            ZombieDefinition::NarrowX => self.z_narrow_x,
            ZombieDefinition::Nar => self.z_nar,
        }
    }
}

/// Classifies every panel row. `derived` must be aligned with `panel.rows()`;
/// `instruments` should be the accepted, deduplicated set.
pub fn classify(
    panel: &Panel,
    derived: &[DerivedFirmYear],
    instruments: &[DebtInstrument],
) -> Result<Vec<ClassifiedFirmYear>> {
    if derived.len() != panel.len() {
        return Err(Error::Config(format!(
            "derived rows ({}) not aligned with panel rows ({})",
            derived.len(),
            panel.len()
        )));
    }
    let medians = industry_median_q(derived);
    let mut by_firm: HashMap<&str, Vec<&DebtInstrument>> = HashMap::new();
    for inst in instruments {
        by_firm.entry(inst.firm_id.as_str()).or_default().push(inst);
    }
    let mut offsets = Vec::new();
    let mut start = 0;
    for firm in panel.firms() {
        offsets.push((start, firm));
        start += firm.len();
    }
    let per_firm: Vec<Vec<ClassifiedFirmYear>> = offsets
        .par_iter()
        .map(|&(start, rows)| {
            let d = &derived[start..start + rows.len()];
            let history: Vec<StatusInput> = d.iter().map(StatusInput::from).collect();
            let broad = classify_broad(&history);
            let narrow = classify_narrow(&history, &medians);
            let flags = firm_flags(by_firm.get(rows[0].firm_id.as_str()).into_iter().flatten().copied());
            let first_year = rows[0].year;
            rows.iter()
                .enumerate()
                .map(|(i, r)| ClassifiedFirmYear {
                    firm_id: r.firm_id.clone(),
                    year: r.year,
                    naics2: r.naics2,
                    age: d[i].age,
                    z_broad: broad[i],
                    z_narrow_x: narrow[i].0,
                    z_nar: narrow[i].1,
                    sm: is_sme(r.emp),
                    nb: r.year == first_year,
                    e_exit: r.exit_flag,
                    flags: flags.clone(),
                })
                .collect()
        })
        .collect();
    Ok(per_firm.into_iter().flatten().collect())
}

/// Pearson correlation between two binary series; absent if either is constant.
pub fn phi(a: &[bool], b: &[bool]) -> Option<f64> {
    let n = a.len() as f64;
    let (mut n11, mut n1x, mut nx1) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        if x {
            n1x += 1.0;
        }
        if y {
            nx1 += 1.0;
        }
        if x && y {
            n11 += 1.0;
        }
    }
    let num = n * n11 - n1x * nx1;
    let den = (n1x * (n - n1x) * nx1 * (n - nx1)).sqrt();
    (den > 0.0).then(|| num / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissingnessDiagnostic {
    pub variable: String,
    pub correlation: Option<f64>,
    pub n: usize,
    pub n_exit: usize,
    pub n_missing_exit: usize,
    pub note: Option<String>,
}

/// `E` marks a firm's final pre-liquidation year; `V` marks exit years in
/// which `field` was absent in t, t-1 or t-2 (among observed rows).
pub fn exit_and_missingness(panel: &Panel, field: FirmField) -> MissingnessDiagnostic {
    let mut e = Vec::with_capacity(panel.len());
    let mut v = Vec::with_capacity(panel.len());
    for firm in panel.firms() {
        for (i, r) in firm.iter().enumerate() {
            let exit = r.exit_flag;
            let absent = firm[..=i]
                .iter()
                .rev()
                .take_while(|p| p.year >= r.year - 2)
                .any(|p| p.field(field).is_none());
            e.push(exit);
            v.push(exit && absent);
        }
    }
    let correlation = phi(&e, &v);
    let note = correlation.is_none().then(|| {
        if e.iter().all(|x| !x) || e.iter().all(|x| *x) {
            "exit indicator has zero variance".to_string()
        } else {
            "missingness indicator has zero variance".to_string()
        }
    });
    MissingnessDiagnostic {
        variable: field.to_string(),
        correlation,
        n: e.len(),
        n_exit: e.iter().filter(|x| **x).count(),
        n_missing_exit: v.iter().filter(|x| **x).count(),
        note,
    }
}

pub fn write_missingness<W: Write>(writer: W, diags: &[MissingnessDiagnostic]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["variable", "correlation", "n", "n_exit", "n_missing_exit", "note"])?;
    for d in diags {
        csv.write_record([
            d.variable.clone(),
            fmt_opt(d.correlation),
            d.n.to_string(),
            d.n_exit.to_string(),
            d.n_missing_exit.to_string(),
            d.note.clone().unwrap_or_default(),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<missingness writer>", e))?;
    Ok(())
}

fn tri(v: Option<bool>) -> String {
    match v {
        Some(true) => "1".into(),
        Some(false) => "0".into(),
        None => String::new(),
    }
}

fn bit(v: bool) -> String {
    tri(Some(v))
}

pub fn classified_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "firm_id",
        "year",
        "naics2",
        "age",
        "z_broad",
        "z_narrow_x",
        "z_nar",
        "sm",
        "nb",
        "e_exit",
        "bank_dep",
        "capm_dep",
        "has_instrument",
    ]
    .map(String::from)
    .to_vec();
    for b in CreditBucket::all() {
        h.push(format!("bond_{b}"));
    }
    for b in CreditBucket::all() {
        h.push(format!("no_bond_{b}"));
    }
    h
}

pub fn write_classified<W: Write>(writer: W, rows: &[ClassifiedFirmYear]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(classified_header())?;
    for r in rows {
        let mut rec = vec![
            r.firm_id.clone(),
            r.year.to_string(),
            r.naics2.to_string(),
            r.age.to_string(),
            tri(r.z_broad),
            tri(r.z_narrow_x),
            tri(r.z_nar),
            tri(r.sm),
            bit(r.nb),
            bit(r.e_exit),
            bit(r.flags.bank_dep),
            bit(r.flags.capm_dep),
            bit(r.flags.has_instrument),
        ];
        rec.extend(CreditBucket::all().into_iter().map(|b| bit(r.flags.bond(b))));
        rec.extend(CreditBucket::all().into_iter().map(|b| bit(r.flags.no_bond(b))));
        csv.write_record(&rec)?;
    }
    csv.flush().map_err(|e| Error::io("<classified writer>", e))?;
    Ok(())
}

/// Parses a flag cell written by [`write_classified`].
pub(crate) fn parse_tri(s: &str) -> Option<bool> {
    match s {
        "1" => Some(true),
        "0" => Some(false),
        _ => None,
    }
}

pub fn read_classified<R: std::io::Read>(reader: R, file: &str) -> Result<Vec<ClassifiedFirmYear>> {
    let mut csv = csv::Reader::from_reader(reader);
    let header = classified_header();
    let expected: Vec<&str> = header.iter().map(String::as_str).collect();
    crate::panel_store::check_header(csv.headers()?, &expected, file)?;
    let buckets = CreditBucket::all();
    let mut out = Vec::new();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |what: &str| Error::Malformed {
            file: file.to_string(),
            line,
            message: format!("bad {what}"),
        };
        let flag = |i: usize| parse_tri(&record[i]).ok_or_else(|| bad(header[i].as_str()));
        let mut flags = FirmFlags {
            bank_dep: flag(10)?,
            capm_dep: flag(11)?,
            has_instrument: flag(12)?,
            bond: BTreeSet::new(),
        };
        for (j, b) in buckets.iter().enumerate() {
            if flag(13 + j)? {
                flags.bond.insert(*b);
            }
        }
        out.push(ClassifiedFirmYear {
            firm_id: record[0].to_string(),
            year: record[1].parse().map_err(|_| bad("year"))?,
            naics2: record[2].parse().map_err(|_| bad("naics2"))?,
            age: record[3].parse().map_err(|_| bad("age"))?,
            z_broad: parse_tri(&record[4]),
            z_narrow_x: parse_tri(&record[5]),
            z_nar: parse_tri(&record[6]),
            sm: parse_tri(&record[7]),
            nb: flag(8)?,
            e_exit: flag(9)?,
            flags,
        });
    }
    Ok(out)
}

/// Summed bank-credit and bond face values.
pub fn bank_and_bond_totals<'a>(instruments: impl IntoIterator<Item = &'a DebtInstrument>) -> (f64, f64) {
    let mut bc = Vec::new();
    let mut bn = Vec::new();
    for i in instruments {
        match i.debt_type {
            DebtType::BL | DebtType::RC => bc.push(i.face_value),
            DebtType::BN => bn.push(i.face_value),
        }
    }
    (canonical_sum(&mut bc), canonical_sum(&mut bn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel_store::{FirmYear, MaturityBucket, MaturitySplit};
    use proptest::prelude::*;

    fn si(year: i32, age: i32, icr: Option<bool>, q: Option<f64>) -> StatusInput {
        StatusInput {
            year,
            naics2: 33,
            age,
            icr_low_coverage: icr,
            tobins_q: q,
        }
    }

    fn streak(flags: [Option<bool>; 3], age_at_t: i32, q: Option<f64>) -> Vec<StatusInput> {
        (0..3)
            .map(|i| si(2000 + i, age_at_t - 2 + i, flags[i as usize], q))
            .collect()
    }

    #[test]
    fn broad_examples() {
        let t = Some(true);
        assert_eq!(classify_broad(&streak([t, t, t], 12, None))[2], Some(true));
        assert_eq!(classify_broad(&streak([t, t, t], 8, None))[2], Some(false));
        assert_eq!(classify_broad(&streak([t, None, t], 12, None))[2], None);
        assert_eq!(
            classify_broad(&streak([Some(false), None, t], 12, None))[2],
            Some(false)
        );
    }

    #[test]
    fn gap_year_counts_as_absent() {
        let t = Some(true);
        let h = vec![si(2000, 10, t, None), si(2002, 12, t, None), si(2003, 13, t, None)];
        assert_eq!(classify_broad(&h)[2], None);
    }

    #[test]
    fn narrow_examples() {
        let t = Some(true);
        let med = BTreeMap::from([((33, 2002), 1.1)]);
        assert_eq!(classify_narrow(&streak([t, t, t], 12, Some(0.8)), &med)[2], (t, t));
        assert_eq!(classify_narrow(&streak([t, t, t], 12, None), &med)[2], (None, t));
        assert_eq!(
            classify_narrow(&streak([t, t, t], 12, Some(1.5)), &med)[2],
            (Some(false), Some(false))
        );
        assert_eq!(
            classify_narrow(&streak([t, t, t], 12, Some(0.5)), &BTreeMap::new())[2],
            (None, t)
        );
        assert_eq!(
            classify_narrow(&streak([t, t, t], 8, None), &med)[2],
            (Some(false), Some(false))
        );
    }

    #[test]
    fn even_count_median() {
        let mut v = vec![3.0, 1.0, 2.0, 4.0];
        assert_eq!(median(&mut v), 2.5);
    }

    fn di(t: DebtType, face: f64, q: u32) -> DebtInstrument {
        DebtInstrument {
            firm_id: "f".into(),
            component_id: "c".into(),
            report_year: 2005,
            debt_type: t,
            face_value: face,
            maturity_quarters: q,
        }
    }

    #[test]
    fn dependence_and_bond_flags() {
        let xs = [
            di(DebtType::BL, 6.0, 4),
            di(DebtType::RC, 4.0, 8),
            di(DebtType::BN, 5.0, 12),
        ];
        let f = firm_flags(&xs);
        assert!(f.bank_dep && !f.capm_dep && f.has_instrument);
        assert!(f.no_bond(CreditBucket::Split(MaturitySplit::Short)));
        assert!(f.bond(CreditBucket::Split(MaturitySplit::Long)));
        assert!(f.bond(CreditBucket::Bin(MaturityBucket::Q9To20)));
        let none = firm_flags(&[]);
        assert!(!none.bank_dep && none.capm_dep && !none.has_instrument);
    }

    #[test]
    fn sme_boundary() {
        assert_eq!(is_sme(Some(0.25)), Some(true));
        assert_eq!(is_sme(Some(0.999)), Some(true));
        assert_eq!(is_sme(Some(1.0)), Some(false));
        assert_eq!(is_sme(None), None);
    }

    #[test]
    fn phi_matches_pearson() {
        let a = [true, true, false, false, true, false];
        let b = [true, false, false, false, true, true];
        let fa: Vec<f64> = a.iter().map(|&x| x as u8 as f64).collect();
        let fb: Vec<f64> = b.iter().map(|&x| x as u8 as f64).collect();
        let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ma, mb) = (m(&fa), m(&fb));
        let cov: f64 = fa.iter().zip(&fb).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = fa.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = fb.iter().map(|y| (y - mb).powi(2)).sum();
        assert!((phi(&a, &b).unwrap() - cov / (va * vb).sqrt()).abs() < 1e-12);
        assert_eq!(phi(&a, &[false; 6]), None);
    }

    fn fy(firm: &str, year: i32, q: Option<f64>, exit: bool) -> FirmYear {
        let mut r = FirmYear::empty(firm, year, 33, 1990);
        r.tobins_q = q;
        r.exit_flag = exit;
        r
    }

    #[test]
    fn missingness_fixture() {
        let rows = vec![
            fy("a", 2005, Some(1.0), false),
            fy("a", 2006, None, true),
            fy("b", 2005, None, false),
            fy("b", 2006, Some(1.0), false),
            fy("b", 2007, Some(1.0), false),
            fy("b", 2008, Some(1.0), true),
            fy("c", 2005, Some(1.0), false),
        ];
        let p = Panel::new(rows).unwrap();
        let d = exit_and_missingness(&p, FirmField::TobinsQ);
        assert_eq!((d.n, d.n_exit, d.n_missing_exit), (7, 2, 1));
        let e = [false, true, false, false, false, true, false];
        let v = [false, true, false, false, false, false, false];
        assert_eq!(d.correlation, phi(&e, &v));

        let never = Panel::new(vec![fy("a", 2005, Some(1.0), true), fy("b", 2005, Some(1.0), false)]).unwrap();
        let d = exit_and_missingness(&never, FirmField::TobinsQ);
        assert_eq!(d.correlation, None);
        assert!(d.note.is_some());
    }

    #[test]
    fn classified_csv_round_trip() {
        let c = ClassifiedFirmYear {
            firm_id: "a".into(),
            year: 2005,
            naics2: 33,
            age: 12,
            z_broad: Some(true),
            z_narrow_x: None,
            z_nar: Some(true),
            sm: None,
            nb: false,
            e_exit: true,
            flags: firm_flags(&[di(DebtType::BN, 1.0, 3)]),
        };
        let mut buf = Vec::new();
        write_classified(&mut buf, std::slice::from_ref(&c)).unwrap();
        assert_eq!(read_classified(buf.as_slice(), "c.csv").unwrap(), vec![c]);
    }

    fn arb_history() -> impl Strategy<Value = (Vec<StatusInput>, f64)> {
        let row = (
            prop::option::of(any::<bool>()),
            prop::option::of(0.0f64..3.0),
            any::<bool>(),
        );
        (prop::collection::vec(row, 1..10), 5i32..20, 0.5f64..2.0).prop_map(|(rows, age0, med)| {
            let h = rows
                .into_iter()
                .enumerate()
                .filter(|(_, r)| r.2)
                .map(|(i, r)| si(2000 + i as i32, age0 + i as i32, r.0, r.1))
                .collect();
            (h, med)
        })
    }

    proptest! {
        #[test]
        fn nesting(case in arb_history()) {
            let (h, med) = case;
            let medians: BTreeMap<_, _> = (2000..2010).map(|y| ((33u16, y), med)).collect();
            let broad = classify_broad(&h);
            for (b, (nx, nar)) in broad.iter().zip(classify_narrow(&h, &medians)) {
                if nx == Some(true) { prop_assert_eq!(nar, Some(true)); }
                if nar == Some(true) { prop_assert_eq!(*b, Some(true)); }
                if *b == Some(true) { prop_assert!(h.iter().any(|s| s.age >= MIN_ZOMBIE_AGE)); }
            }
        }

        #[test]
        fn lowering_q_keeps_nar(case in arb_history(), cut in 0.0f64..1.0) {
            let (h, med) = case;
            let medians: BTreeMap<_, _> = (2000..2010).map(|y| ((33u16, y), med)).collect();
            let lowered: Vec<StatusInput> = h.iter().cloned().map(|mut s| { s.tobins_q = s.tobins_q.map(|q| q * cut); s }).collect();
            for ((_, a), (_, b)) in classify_narrow(&h, &medians).into_iter().zip(classify_narrow(&lowered, &medians)) {
                if a == Some(true) { prop_assert_eq!(b, Some(true)); }
            }
        }
    }
}
