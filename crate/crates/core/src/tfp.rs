//! Olley-Pakes production-function estimation.
//!
//! Stage 1 regresses log sales on log COGS and a polynomial in log capital and
//! log investment. Stage 2 finds the capital elasticity that makes the implied
//! productivity best predicted by a polynomial in its own lag.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{independent_columns, lstsq, ols_ssr, select_columns, COLLINEAR_TOL};
use crate::metrics::DerivedFirmYear;

pub const POOLED: &str = "pooled";

#[derive(Debug, Clone, PartialEq)]
pub struct TfpConfig {
    pub poly_degree: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub min_obs_per_industry: usize,
    /// Estimate each two-digit industry separately; otherwise one pooled fit.
    pub per_industry: bool,
}

impl Default for TfpConfig {
    fn default() -> Self {
        TfpConfig {
            poly_degree: 3,
            max_iter: 200,
            tol: 1e-6,
            min_obs_per_industry: 200,
            per_industry: true,
        }
    }
}

impl TfpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.poly_degree) {
            return Err(Error::Config(format!(
                "poly_degree must be in 2..=4, got {}",
                self.poly_degree
            )));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config("tfp tol must be positive and max_iter at least 1".into()));
        }
        Ok(())
    }
}

/// One usable estimation row: all four logs present.
#[derive(Debug, Clone, PartialEq)]
pub struct TfpObs {
    pub firm_id: String,
    pub year: i32,
    pub naics2: u16,
    /// log sales
    pub y: f64,
    /// log COGS
    pub l: f64,
    /// log PPENT
    pub k: f64,
    /// log CAPX
    pub i: f64,
}

impl TfpObs {
    pub fn from_derived(d: &DerivedFirmYear) -> Option<Self> {
        Some(TfpObs {
            firm_id: d.firm_id.clone(),
            year: d.year,
            naics2: d.naics2,
            y: d.log_sale?,
            l: d.log_cogs?,
            k: d.log_ppent?,
            i: d.log_capx?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupEstimate {
    pub industry: String,
    pub beta_free: f64,
    pub beta_k: f64,
    pub n_obs: usize,
    /// Observations with a usable previous year, i.e. the stage-2 sample.
    pub n_pairs: usize,
    pub iterations: usize,
    pub converged: bool,
    pub ssr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfpRow {
    pub firm_id: String,
    pub year: i32,
    pub tfp: f64,
    pub beta_free: f64,
    pub beta_k: f64,
    pub industry: String,
    pub converged: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TfpResult {
    /// Sorted by `(firm_id, year)`.
    pub rows: Vec<TfpRow>,
    pub estimates: BTreeMap<String, GroupEstimate>,
    pub warnings: Vec<String>,
}

impl TfpResult {
    pub fn get(&self, firm_id: &str, year: i32) -> Option<&TfpRow> {
        self.rows
            .binary_search_by(|r| (r.firm_id.as_str(), r.year).cmp(&(firm_id, year)))
            .ok()
            .map(|i| &self.rows[i])
    }
}

fn standardize(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if sd > 0.0 { sd } else { 1.0 };
    v.iter().map(|x| (x - mean) / scale).collect()
}

/// All monomials `a^p b^q` with `p + q <= degree`, constant first.
fn poly2(a: &[f64], b: &[f64], degree: usize) -> DMatrix<f64> {
    let powers: Vec<(i32, i32)> = (0..=degree as i32)
        .flat_map(|d| (0..=d).map(move |q| (d - q, q)))
        .collect();
    DMatrix::from_fn(a.len(), powers.len(), |r, c| {
        let (p, q) = powers[c];
        a[r].powi(p) * b[r].powi(q)
    })
}

fn poly1(a: &[f64], degree: usize) -> DMatrix<f64> {
    let s = standardize(a);
    DMatrix::from_fn(a.len(), degree + 1, |r, c| s[r].powi(c as i32))
}

struct StageTwo<'a> {
    phi_t: Vec<f64>,
    k_t: Vec<f64>,
    phi_lag: Vec<f64>,
    k_lag: Vec<f64>,
    degree: usize,
    label: &'a str,
}

impl StageTwo<'_> {
    fn ssr(&self, bk: f64) -> Result<f64> {
        let w: Vec<f64> = self.phi_lag.iter().zip(&self.k_lag).map(|(p, k)| p - bk * k).collect();
        let target = DVector::from_iterator(
            self.phi_t.len(),
            self.phi_t.iter().zip(&self.k_t).map(|(p, k)| p - bk * k),
        );
        ols_ssr(&poly1(&w, self.degree), &target)
            .map_err(|e| Error::RankDeficient(format!("industry {}: stage 2: {e}", self.label)))
    }
}

const BK_LO: f64 = 0.0;
const BK_HI: f64 = 1.5;
const GRID: usize = 31;

/// Fits one estimation group.
pub fn estimate_group(obs: &[TfpObs], label: &str, config: &TfpConfig) -> Result<GroupEstimate> {
    config.validate()?;
    let n = obs.len();
    let d = config.poly_degree;
    let n_poly = (d + 1) * (d + 2) / 2;
    if n < n_poly + 2 {
        return Err(Error::NoObservations(format!("industry {label}: {n} usable rows")));
    }

    let ks = standardize(&obs.iter().map(|o| o.k).collect::<Vec<_>>());
    let is = standardize(&obs.iter().map(|o| o.i).collect::<Vec<_>>());
    let poly = poly2(&ks, &is, d);
    let mut design = poly.clone().insert_column(n_poly, 0.0);
    for r in 0..n {
        design[(r, n_poly)] = obs[r].l;
    }
    let keep = independent_columns(&design, COLLINEAR_TOL);
    if keep.last() != Some(&n_poly) {
        return Err(Error::RankDeficient(format!(
            "industry {label}: log COGS is collinear with the capital-investment polynomial"
        )));
    }
    let x = select_columns(&design, &keep);
    let y = DVector::from_iterator(n, obs.iter().map(|o| o.y));
    let b = lstsq(&x, &y).map_err(|e| Error::RankDeficient(format!("industry {label}: stage 1: {e}")))?;
    let beta_free = b[b.len() - 1];
    let fitted = &x * &b;
    let phi: Vec<f64> = (0..n).map(|r| fitted[r] - beta_free * obs[r].l).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| (obs[a].firm_id.as_str(), obs[a].year).cmp(&(obs[b].firm_id.as_str(), obs[b].year)));
    let mut st = StageTwo {
        phi_t: vec![],
        k_t: vec![],
        phi_lag: vec![],
        k_lag: vec![],
        degree: d,
        label,
    };
    for w in order.windows(2) {
        let (p, c) = (w[0], w[1]);
        if obs[p].firm_id == obs[c].firm_id && obs[p].year + 1 == obs[c].year {
            st.phi_t.push(phi[c]);
            st.k_t.push(obs[c].k);
            st.phi_lag.push(phi[p]);
            st.k_lag.push(obs[p].k);
        }
    }
    let n_pairs = st.phi_t.len();
    if n_pairs < d + 3 {
        return Err(Error::NoObservations(format!(
            "industry {label}: {n_pairs} consecutive-year pairs for stage 2"
        )));
    }

    let step = (BK_HI - BK_LO) / (GRID - 1) as f64;
    let mut best = (0, f64::INFINITY);
    for g in 0..GRID {
        let s = st.ssr(BK_LO + step * g as f64)?;
        if s < best.1 {
            best = (g, s);
        }
    }
    let mut a = BK_LO + step * best.0.saturating_sub(1) as f64;
    let mut bb = (BK_LO + step * (best.0 + 1) as f64).min(BK_HI);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = bb - inv_phi * (bb - a);
    let mut e = a + inv_phi * (bb - a);
    let (mut fc, mut fe) = (st.ssr(c)?, st.ssr(e)?);
    let mut iterations = 0;
    while bb - a > config.tol && iterations < config.max_iter {
        iterations += 1;
        if fc <= fe {
            bb = e;
            e = c;
            fe = fc;
            c = bb - inv_phi * (bb - a);
            fc = st.ssr(c)?;
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (bb - a);
            fe = st.ssr(e)?;
        }
    }
    let converged = bb - a <= config.tol;
    let beta_k = 0.5 * (a + bb);
    Ok(GroupEstimate {
        industry: label.to_string(),
        beta_free,
        beta_k,
        n_obs: n,
        n_pairs,
        iterations,
        converged,
        ssr: st.ssr(beta_k)?,
    })
}

/// Estimates elasticities per industry, falling back to a pooled fit for
/// industries below `min_obs_per_industry`, and computes firm-year TFP.
pub fn estimate_tfp(derived: &[DerivedFirmYear], config: &TfpConfig) -> Result<TfpResult> {
    config.validate()?;
    let obs: Vec<TfpObs> = derived.iter().filter_map(TfpObs::from_derived).collect();
    estimate_tfp_obs(&obs, config)
}

pub fn estimate_tfp_obs(obs: &[TfpObs], config: &TfpConfig) -> Result<TfpResult> {
    let mut by_industry: BTreeMap<u16, Vec<TfpObs>> = BTreeMap::new();
    for o in obs {
        by_industry.entry(o.naics2).or_default().push(o.clone());
    }
    let mut groups: Vec<(String, &[TfpObs])> = Vec::new();
    let mut assignment: HashMap<u16, String> = HashMap::new();
    let mut need_pooled = !config.per_industry;
    if config.per_industry {
        for (naics, rows) in &by_industry {
            if rows.len() >= config.min_obs_per_industry {
                groups.push((naics.to_string(), rows));
                assignment.insert(*naics, naics.to_string());
            } else {
                need_pooled = true;
                assignment.insert(*naics, POOLED.to_string());
            }
        }
    } else {
        for naics in by_industry.keys() {
            assignment.insert(*naics, POOLED.to_string());
        }
    }
    if need_pooled && !obs.is_empty() {
        groups.push((POOLED.to_string(), obs));
    }

    let fitted: Vec<Result<GroupEstimate>> = groups
        .par_iter()
        .map(|(label, rows)| estimate_group(rows, label, config))
        .collect();
    let mut result = TfpResult::default();
    for f in fitted {
        let est = f?;
        if !est.converged {
            result.warnings.push(format!(
                "industry {}: capital elasticity search did not converge after {} iterations",
                est.industry, est.iterations
            ));
        }
        result.estimates.insert(est.industry.clone(), est);
    }

    for o in obs {
        let label = &assignment[&o.naics2];
        let est = &result.estimates[label];
        result.rows.push(TfpRow {
            firm_id: o.firm_id.clone(),
            year: o.year,
            tfp: o.y - est.beta_free * o.l - est.beta_k * o.k,
            beta_free: est.beta_free,
            beta_k: est.beta_k,
            industry: label.clone(),
            converged: est.converged,
        });
    }
    result
        .rows
        .sort_by(|a, b| (a.firm_id.as_str(), a.year).cmp(&(b.firm_id.as_str(), b.year)));
    Ok(result)
}

pub const TFP_HEADER: [&str; 7] = ["firm_id", "year", "tfp", "beta_free", "beta_k", "industry", "converged"];

pub fn write_tfp<W: Write>(writer: W, result: &TfpResult) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(TFP_HEADER)?;
    for r in &result.rows {
        csv.write_record([
            r.firm_id.clone(),
            r.year.to_string(),
            r.tfp.to_string(),
            r.beta_free.to_string(),
            r.beta_k.to_string(),
            r.industry.clone(),
            if r.converged { "1".into() } else { "0".into() },
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<tfp writer>", e))?;
    Ok(())
}

/// Reads `tfp.csv`; group estimates are not persisted.
pub fn read_tfp<R: Read>(reader: R, file: &str) -> Result<TfpResult> {
    let mut csv = csv::Reader::from_reader(reader);
    crate::panel_store::check_header(csv.headers()?, &TFP_HEADER, file)?;
    let mut result = TfpResult::default();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |i: usize| Error::Malformed {
            file: file.to_string(),
            line,
            message: format!("bad {}", TFP_HEADER[i]),
        };
        let num = |i: usize| record[i].parse::<f64>().map_err(|_| bad(i));
        result.rows.push(TfpRow {
            firm_id: record[0].to_string(),
            year: record[1].parse().map_err(|_| bad(1))?,
            tfp: num(2)?,
            beta_free: num(3)?,
            beta_k: num(4)?,
            industry: record[5].to_string(),
            converged: match &record[6] {
                "1" => true,
                "0" => false,
                _ => return Err(bad(6)),
            },
        });
    }
    result
        .rows
        .sort_by(|a, b| (a.firm_id.as_str(), a.year).cmp(&(b.firm_id.as_str(), b.year)));
    Ok(result)
}

pub const TFP_ESTIMATES_HEADER: [&str; 8] = [
    "industry",
    "beta_free",
    "beta_k",
    "n_obs",
    "n_pairs",
    "iterations",
    "converged",
    "ssr",
];

pub fn write_tfp_estimates<W: Write>(writer: W, result: &TfpResult) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(TFP_ESTIMATES_HEADER)?;
    for e in result.estimates.values() {
        csv.write_record([
            e.industry.clone(),
            e.beta_free.to_string(),
            e.beta_k.to_string(),
            e.n_obs.to_string(),
            e.n_pairs.to_string(),
            e.iterations.to_string(),
            (e.converged as u8).to_string(),
            e.ssr.to_string(),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<tfp writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn obs(firm: usize, year: i32, y: f64, l: f64, k: f64, i: f64) -> TfpObs {
        TfpObs {
            firm_id: format!("f{firm:04}"),
            year,
            naics2: 33,
            y,
            l,
            k,
            i,
        }
    }

    #[test]
    fn noiseless_degenerate_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut xs = Vec::new();
        for f in 0..40 {
            for t in 0..5 {
                let l: f64 = rng.random_range(0.0..3.0);
                xs.push(obs(f, 2000 + t, 0.5 * l, l, 2.0, rng.random_range(0.0..1.0)));
            }
        }
        let est = estimate_group(&xs, "33", &TfpConfig::default()).unwrap();
        assert!((est.beta_free - 0.5).abs() < 1e-10);
        let r = estimate_tfp_obs(&xs, &TfpConfig::default()).unwrap();
        let t0 = r.rows[0].tfp;
        assert!(r.rows.iter().all(|row| (row.tfp - t0).abs() < 1e-9));
    }

    #[test]
    fn tfp_csv_round_trips() {
        let xs = crate::synth::generate_production_panel(0.6, 0.4, 60, 6, 2);
        let r = estimate_tfp_obs(&xs, &TfpConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_tfp(&mut buf, &r).unwrap();
        let back = read_tfp(std::io::Cursor::new(buf), "tfp.csv").unwrap();
        assert_eq!(back.rows, r.rows);
    }

    #[test]
    fn collinear_free_variable_is_an_error() {
        let xs: Vec<TfpObs> = (0..60)
            .map(|n| {
                let k = (n % 7) as f64;
                obs(n / 5, 2000 + (n % 5) as i32, k, 2.0 * k + 1.0, k, (n % 3) as f64)
            })
            .collect();
        let err = estimate_group(&xs, "42", &TfpConfig::default()).unwrap_err();
        assert!(err.to_string().contains("industry 42"));
    }

    #[test]
    fn rows_missing_capx_are_excluded() {
        let mut d = crate::metrics::derive_row(
            &crate::panel_store::FirmYear::empty("a", 2005, 33, 2000),
            None,
            &crate::metrics::LaborCostTable::new(),
        )
        .unwrap();
        d.log_sale = Some(1.0);
        d.log_cogs = Some(1.0);
        d.log_ppent = Some(1.0);
        assert!(TfpObs::from_derived(&d).is_none());
    }

    fn simulated(n_firms: usize, t: i32, seed: u64) -> Vec<TfpObs> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = |rng: &mut ChaCha8Rng| -> f64 {
            let u1: f64 = rng.random_range(1e-12..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };
        let mut xs = Vec::new();
        for f in 0..n_firms {
            let mut w = 0.3 * normal(&mut rng);
            let mut k = 1.0 + 0.5 * normal(&mut rng);
            for yr in 0..t {
                let inv = 0.8 * w + 0.6 * k - 1.0;
                let l = (w + 0.4 * k) / 0.4 + 0.2 * normal(&mut rng);
                let y = 0.6 * l + 0.4 * k + w + 0.05 * normal(&mut rng);
                xs.push(obs(f, 2000 + yr, y, l, k, inv));
                k = (0.85 * k.exp() + inv.exp()).ln();
                w = 0.7 * w + 0.2 * normal(&mut rng);
            }
        }
        xs
    }

    #[test]
    fn recovers_planted_elasticities() {
        let xs = simulated(500, 8, 7);
        let est = estimate_group(&xs, "33", &TfpConfig::default()).unwrap();
        assert!((est.beta_free - 0.6).abs() < 0.05, "{est:?}");
        assert!((est.beta_k - 0.4).abs() < 0.05, "{est:?}");
        assert!(est.converged);
    }

    #[test]
    fn sales_scale_shifts_tfp_only() {
        let xs = simulated(200, 6, 3);
        let shifted: Vec<TfpObs> = xs
            .iter()
            .cloned()
            .map(|mut o| {
                o.y += 2f64.ln();
                o
            })
            .collect();
        let a = estimate_tfp_obs(&xs, &TfpConfig::default()).unwrap();
        let b = estimate_tfp_obs(&shifted, &TfpConfig::default()).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert!((ra.beta_free - rb.beta_free).abs() < 1e-8);
            assert!((ra.beta_k - rb.beta_k).abs() < 1e-5);
            assert!((rb.tfp - ra.tfp - 2f64.ln()).abs() < 1e-4);
        }
    }

    #[test]
    fn stage_one_normal_equations_hold() {
        let xs = simulated(100, 5, 11);
        let ks = standardize(&xs.iter().map(|o| o.k).collect::<Vec<_>>());
        let is = standardize(&xs.iter().map(|o| o.i).collect::<Vec<_>>());
        let mut design = poly2(&ks, &is, 3);
        let n_poly = design.ncols();
        design = design.insert_column(n_poly, 0.0);
        for (r, o) in xs.iter().enumerate() {
            design[(r, n_poly)] = o.l;
        }
        let y = DVector::from_iterator(xs.len(), xs.iter().map(|o| o.y));
        let b = lstsq(&design, &y).unwrap();
        let resid = &y - &design * b;
        let g = design.transpose() * resid;
        let scale = (design.transpose() * &y).norm();
        assert!(g.norm() <= 1e-8 * scale);
    }

    #[test]
    fn small_industries_use_pooled_fit() {
        let mut xs = simulated(100, 6, 5);
        for o in xs.iter_mut().take(30) {
            o.naics2 = 51;
        }
        let cfg = TfpConfig {
            min_obs_per_industry: 200,
            ..Default::default()
        };
        let r = estimate_tfp_obs(&xs, &cfg).unwrap();
        assert!(r.estimates.contains_key(POOLED));
        assert!(r.estimates.contains_key("33"));
        assert!(r.rows.iter().filter(|row| row.industry == POOLED).count() >= 30);
    }

    #[test]
    fn deterministic() {
        let xs = simulated(150, 6, 9);
        let a = estimate_tfp_obs(&xs, &TfpConfig::default()).unwrap();
        let b = estimate_tfp_obs(&xs, &TfpConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let cfg = TfpConfig {
            poly_degree: 5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
