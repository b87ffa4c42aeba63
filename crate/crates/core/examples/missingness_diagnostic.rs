//! Correlation between firm exit and a missing Tobin's Q, against the value
//! the generator planted.

use zombie_lending::classifier::exit_and_missingness;
use zombie_lending::panel_store::{FirmField, Panel};
use zombie_lending::synth::{generate, DgpConfig};

fn main() -> zombie_lending::Result<()> {
    for target in [0.1, 0.3, 0.5] {
        let data = generate(&DgpConfig {
            n_firms: 2000,
            missing_phi: Some(target),
            extra_rows: false,
            ..DgpConfig::default()
        })?;
        let d = exit_and_missingness(&Panel::new(data.firm_years.clone())?, FirmField::TobinsQ);
        println!(
            "target {target:.2}: realized {:.4}, diagnostic {:.4} ({} exits, {} with Q missing)",
            data.truth("phi.exit_missing.tobins_q").unwrap_or(f64::NAN),
            d.correlation.unwrap_or(f64::NAN),
            d.n_exit,
            d.n_missing_exit
        );
    }
    Ok(())
}
