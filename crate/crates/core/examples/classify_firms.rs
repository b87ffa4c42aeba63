//! Classifies a hand-built panel under the three zombie definitions.

use zombie_lending::classifier::classify;
use zombie_lending::metrics::{derive, LaborCostTable};
use zombie_lending::panel_store::{FirmYear, Panel};

fn row(id: &str, year: i32, ebitda: f64, q: f64) -> FirmYear {
    let mut r = FirmYear::empty(id, year, 33, 1990);
    r.xint = Some(10.0);
    r.ebitda = Some(ebitda);
    r.tobins_q = Some(q);
    r
}

fn main() -> zombie_lending::Result<()> {
    let mut rows = Vec::new();
    for year in 2005..=2010 {
        // Persistently low coverage with low Q.
        rows.push(row("low_q", year, 5.0, 0.5));
        // Low coverage, but the market expects recovery.
        rows.push(row("high_q", year, 5.0, 3.0));
        rows.push(row("healthy", year, 50.0, 1.5));
    }
    let panel = Panel::new(rows)?;
    let mut labor = LaborCostTable::new();
    for year in 2005..=2010 {
        labor.insert(year, 40_000.0)?;
    }
    let derived = derive(&panel, &labor)?;
    let show = |v: Option<bool>| match v {
        Some(true) => "Z",
        Some(false) => ".",
        None => "?",
    };
    println!("{:<8} {:>4}  broad narrow_x nar", "firm", "year");
    for c in classify(&panel, &derived, &[])? {
        println!(
            "{:<8} {:>4}  {:>5} {:>8} {:>3}",
            c.firm_id,
            c.year,
            show(c.z_broad),
            show(c.z_narrow_x),
            show(c.z_nar)
        );
    }
    Ok(())
}
