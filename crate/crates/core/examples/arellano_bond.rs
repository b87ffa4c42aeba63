//! Difference GMM against within-group OLS on AR(1) panels with firm effects.

use zombie_lending::econometrics::{fit_arellano_bond, fit_fe_ols, AbSpec, FixedEffect, RegressionSpec};
use zombie_lending::synth::generate_dynamic_panel;

fn main() -> zombie_lending::Result<()> {
    let reps = 50;
    for rho in [0.0, 0.5, 0.8] {
        let (mut gmm, mut within) = (0.0, 0.0);
        for rep in 0..reps {
            let frame = generate_dynamic_panel(rho, 0.0, 200, 8, rep);
            gmm += fit_arellano_bond(&AbSpec::new("ab", "y", vec![]), &frame)?
                .estimate("L1.y")
                .unwrap();
            let mut spec = RegressionSpec::new("within", "y".parse()?, vec!["L1.y".parse()?]);
            spec.fixed_effects = vec![FixedEffect::Firm];
            within += fit_fe_ols(&spec, &frame)?.estimate("L1.y").unwrap();
        }
        println!(
            "rho {rho:.1}: gmm mean {:.4}, within mean {:.4}",
            gmm / reps as f64,
            within / reps as f64
        );
    }
    Ok(())
}
