//! Generates a synthetic firm panel with planted effects and prints the truth
//! manifest.

use zombie_lending::synth::{generate, write_synth, DgpConfig};

fn main() -> zombie_lending::Result<()> {
    let dgp = DgpConfig {
        n_firms: 500,
        seed: 1,
        ..DgpConfig::default()
    };
    let data = generate(&dgp)?;
    println!(
        "{} firm-years, {} debt instruments",
        data.firm_years.len(),
        data.instruments.len()
    );
    for (parameter, value) in &data.truth {
        println!("{parameter:<48} {value:>10.4}");
    }
    let dir = std::env::temp_dir().join("zombie_synth_example");
    for p in write_synth(&dir, &data)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
