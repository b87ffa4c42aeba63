use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::econometrics::Frame;
use crate::tfp::TfpObs;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Cobb-Douglas panel with investment as a deterministic proxy for
/// productivity: `y = βf l + βk k + ω + ε`, `ω' = 0.7 ω + ξ`,
/// `i = 0.8 ω + 0.6 k - 1`, `K' = 0.85 K + I`.
pub fn generate_production_panel(
    beta_free: f64,
    beta_k: f64,
    n_firms: usize,
    n_years: usize,
    seed: u64,
) -> Vec<TfpObs> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_firms * n_years);
    for f in 0..n_firms {
        let naics2 = 31 + (f % 3) as u16;
        let mut w = 0.3 * normal(&mut rng);
        let mut k = 1.0 + 0.5 * normal(&mut rng);
        for t in 0..n_years {
            let i = 0.8 * w + 0.6 * k - 1.0;
            let l = (w + 0.4 * k) / 0.4 + 0.2 * normal(&mut rng) + rng.random_range(-0.1..0.1);
            let y = beta_free * l + beta_k * k + w + 0.05 * normal(&mut rng);
            out.push(TfpObs {
                firm_id: format!("p{f:05}"),
                year: 2000 + t as i32,
                naics2,
                y,
                l,
                k,
                i,
            });
            k = (0.85 * k.exp() + i.exp()).ln();
            w = 0.7 * w + 0.2 * normal(&mut rng);
        }
    }
    out
}

/// Frame of `y_it = ρ y_{i,t-1} + β x_it + α_i + e_it` after a 50-period burn-in,
/// with columns `y` and `x`.
pub fn generate_dynamic_panel(rho: f64, beta: f64, n: usize, t: usize, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let burn = 50;
    let mut keys = Vec::with_capacity(n * t);
    let mut ys = Vec::with_capacity(n * t);
    let mut xs = Vec::with_capacity(n * t);
    for i in 0..n {
        let alpha = normal(&mut rng);
        let mut y = 0.0;
        for s in 0..burn + t {
            let x = normal(&mut rng);
            let e = normal(&mut rng);
            y = rho * y + beta * x + alpha + e;
            if s >= burn {
                keys.push((format!("g{i}"), (i % 18) as u16, 2000 + (s - burn) as i32));
                ys.push(Some(y));
                xs.push(Some(x));
            }
        }
    }
    let mut frame = Frame::new(keys).expect("unique keys");
    frame.insert("y", ys).expect("length");
    frame.insert("x", xs).expect("length");
    frame
}
