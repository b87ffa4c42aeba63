//! Two-way fixed-effects OLS with firm-clustered standard errors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zombie_lending::econometrics::{fit_fe_ols, FixedEffect, Frame, RegressionSpec};

fn main() -> zombie_lending::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut keys = Vec::new();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for f in 0..300 {
        let firm_effect: f64 = rng.random_range(-2.0..2.0);
        let naics = 31 + (f % 5) as u16;
        for year in 2005..2015 {
            let shock = 0.1 * (year - 2005) as f64 * naics as f64 / 31.0;
            let xi: f64 = rng.random_range(-1.0..1.0) + 0.5 * firm_effect;
            keys.push((format!("f{f}"), naics, year));
            x.push(Some(xi));
            y.push(Some(0.7 * xi + firm_effect + shock + rng.random_range(-1.0..1.0)));
        }
    }
    let mut frame = Frame::new(keys)?;
    frame.insert("x", x)?;
    frame.insert("y", y)?;

    for fes in [
        vec![FixedEffect::Year],
        vec![FixedEffect::Firm, FixedEffect::IndustryYear],
    ] {
        let mut spec = RegressionSpec::new("demo", "y".parse()?, vec!["x".parse()?]);
        spec.fixed_effects = fes.clone();
        let r = fit_fe_ols(&spec, &frame)?;
        println!(
            "{fes:?}: x = {:.4} (se {:.4}), n {}, clusters {}",
            r.estimate("x").unwrap(),
            r.se("x").unwrap(),
            r.n_obs,
            r.n_groups
        );
    }
    println!("truth: x = 0.7000");
    Ok(())
}
