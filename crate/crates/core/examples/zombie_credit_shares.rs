//! Zombie shares of bank loans, credit lines and bonds by maturity bucket on
//! synthetic data.

use zombie_lending::aggregator::{sample_totals, zombie_credit_cells, CreditClass, StatusTiming, Weight};
use zombie_lending::classifier::{classify, ZombieDefinition};
use zombie_lending::metrics::derive;
use zombie_lending::panel_store::{Panel, YearWindow};
use zombie_lending::synth::{generate, DgpConfig};

fn main() -> zombie_lending::Result<()> {
    let data = generate(&DgpConfig {
        n_firms: 2000,
        ..DgpConfig::default()
    })?;
    let window = YearWindow::default();
    let panel = Panel::new(
        data.firm_years
            .iter()
            .filter(|r| window.contains(r.year))
            .cloned()
            .collect(),
    )?;
    let derived = derive(&panel, &data.labor_costs)?;
    let classified = classify(&panel, &derived, &data.instruments)?;
    for weight in [Weight::FaceValue, Weight::Count] {
        let cells = zombie_credit_cells(
            &data.instruments,
            &classified,
            ZombieDefinition::Nar,
            weight,
            StatusTiming::ReportYear,
        );
        println!("weight: {weight}");
        for ((bucket, class), cell) in sample_totals(&cells) {
            if class == CreditClass::BL || class == CreditClass::BN {
                let share = if cell.total > 0.0 {
                    100.0 * cell.zombie / cell.total
                } else {
                    0.0
                };
                println!("  {class:?} {:<10} {share:6.2}%", bucket.to_string());
            }
        }
    }
    Ok(())
}
