use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use crate::aggregator::{zombie_credit_cells, CreditClass, StatusTiming, Weight};
use crate::classifier::{ClassifiedFirmYear, ZombieDefinition};
use crate::error::{Error, Result};
use crate::panel_store::{fmt_opt, DebtInstrument};

pub const FIG1_FILE: &str = "fig1_prevalence.csv";
pub const FIG2_FILE: &str = "fig2_zombie_lending.csv";
pub const FIG3_FILE: &str = "fig3_zombies_newbies.csv";

pub const FIG1_HEADER: [&str; 7] = ["year", "broad", "narrow_x", "nar", "n_broad", "n_narrow_x", "n_nar"];
pub const FIG2_HEADER: [&str; 7] = ["sample", "class", "bucket", "year", "zombie", "total", "share"];
pub const FIG3_HEADER: [&str; 5] = ["year", "n_firms", "n_determined", "zombie_share", "newbie_share"];

#[derive(Default, Clone, Copy)]
struct Count {
    yes: usize,
    det: usize,
}

impl Count {
    fn add(&mut self, v: Option<bool>) {
        if let Some(b) = v {
            self.det += 1;
            self.yes += b as usize;
        }
    }

    fn share(&self) -> Option<f64> {
        (self.det > 0).then(|| self.yes as f64 / self.det as f64)
    }
}

/// Per-year zombie prevalence under each definition, over firms whose status
/// is determined.
pub fn prevalence_by_year(classified: &[ClassifiedFirmYear]) -> BTreeMap<i32, [(Option<f64>, usize); 3]> {
    let mut acc: BTreeMap<i32, [Count; 3]> = BTreeMap::new();
    for c in classified {
        let e = acc.entry(c.year).or_default();
        for (i, d) in ZombieDefinition::ALL.iter().enumerate() {
            e[i].add(c.zombie(*d));
        }
    }
    acc.into_iter()
        .map(|(y, c)| (y, [0, 1, 2].map(|i| (c[i].share(), c[i].det))))
        .collect()
}

pub fn write_fig1<W: Write>(writer: W, classified: &[ClassifiedFirmYear]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(FIG1_HEADER)?;
    for (year, v) in prevalence_by_year(classified) {
        let mut rec = vec![year.to_string()];
        rec.extend(v.iter().map(|(s, _)| fmt_opt(*s)));
        rec.extend(v.iter().map(|(_, n)| n.to_string()));
        csv.write_record(rec)?;
    }
    csv.flush().map_err(|e| Error::io("<figure writer>", e))
}

/// Zombie-lending shares per class, bucket and year for the full sample and
/// for SME borrowers. Only cells with credit to determinable borrowers appear.
pub fn write_fig2<W: Write>(
    writer: W,
    classified: &[ClassifiedFirmYear],
    instruments: &[DebtInstrument],
    def: ZombieDefinition,
    weight: Weight,
    timing: StatusTiming,
) -> Result<()> {
    let sme: HashMap<(&str, i32), bool> = classified
        .iter()
        .map(|c| ((c.firm_id.as_str(), c.year), c.sm == Some(true)))
        .collect();
    let sme_instruments: Vec<DebtInstrument> = instruments
        .iter()
        .filter(|i| sme.get(&(i.firm_id.as_str(), i.report_year)).copied().unwrap_or(false))
        .cloned()
        .collect();
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(FIG2_HEADER)?;
    for (sample, insts) in [("all", instruments), ("sme", sme_instruments.as_slice())] {
        let cells = zombie_credit_cells(insts, classified, def, weight, timing);
        let mut by_year: BTreeMap<(CreditClass, String, i32), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for (k, c) in &cells {
            let e = by_year
                .entry((k.class, k.bucket.label().to_string(), k.year))
                .or_default();
            e.0.push(c.zombie);
            e.1.push(c.total);
        }
        for ((class, bucket, year), (mut z, mut t)) in by_year {
            let z = crate::classifier::canonical_sum(&mut z);
            let t = crate::classifier::canonical_sum(&mut t);
            if t <= 0.0 {
                continue;
            }
            csv.write_record([
                sample.to_string(),
                class.to_string(),
                bucket,
                year.to_string(),
                z.to_string(),
                t.to_string(),
                (z / t).to_string(),
            ])?;
        }
    }
    csv.flush().map_err(|e| Error::io("<figure writer>", e))
}

/// Per-year zombie share (determinable firms) and newbie share (all firms).
pub fn write_fig3<W: Write>(writer: W, classified: &[ClassifiedFirmYear], def: ZombieDefinition) -> Result<()> {
    let mut acc: BTreeMap<i32, (usize, usize, Count)> = BTreeMap::new();
    for c in classified {
        let e = acc.entry(c.year).or_default();
        e.0 += 1;
        e.1 += c.nb as usize;
        e.2.add(c.zombie(def));
    }
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(FIG3_HEADER)?;
    for (year, (n, nb, z)) in acc {
        csv.write_record([
            year.to_string(),
            n.to_string(),
            z.det.to_string(),
            fmt_opt(z.share()),
            (nb as f64 / n as f64).to_string(),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<figure writer>", e))
}
