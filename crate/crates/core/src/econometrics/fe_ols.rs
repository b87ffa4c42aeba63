use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cluster::{clustered_covariance, dense_ids};
use super::frame::Frame;
use super::result::{Coefficient, Method, RegressionResult};
use super::terms::{Filter, Term};
use crate::error::{Error, Result};
use crate::linalg::{independent_columns, lstsq, select_columns, COLLINEAR_TOL};

pub const DEMEAN_TOL: f64 = 1e-10;
pub const DEMEAN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedEffect {
    /// The frame's panel unit.
    Firm,
    Industry,
    Year,
    IndustryYear,
}

impl FromStr for FixedEffect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "firm" => Ok(FixedEffect::Firm),
            "industry" => Ok(FixedEffect::Industry),
            "year" => Ok(FixedEffect::Year),
            "industry_year" => Ok(FixedEffect::IndustryYear),
            other => Err(Error::Config(format!("unknown fixed effect `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClusterLevel {
    #[default]
    Firm,
    Industry,
}

impl fmt::Display for ClusterLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClusterLevel::Firm => "firm",
            ClusterLevel::Industry => "industry",
        })
    }
}

/// Group id per row for a fixed-effect dimension.
pub fn fe_ids(frame: &Frame, fe: FixedEffect) -> Vec<u32> {
    match fe {
        FixedEffect::Firm => frame.unit().to_vec(),
        FixedEffect::Industry => dense_ids(frame.industry()).0,
        FixedEffect::Year => dense_ids(frame.year()).0,
        FixedEffect::IndustryYear => {
            let keys: Vec<(u16, i32)> = frame
                .industry()
                .iter()
                .copied()
                .zip(frame.year().iter().copied())
                .collect();
            dense_ids(&keys).0
        }
    }
}

pub fn cluster_ids(frame: &Frame, level: ClusterLevel) -> Vec<u32> {
    match level {
        ClusterLevel::Firm => frame.unit().to_vec(),
        ClusterLevel::Industry => dense_ids(frame.industry()).0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSpec {
    pub id: String,
    pub dependent: Term,
    pub regressors: Vec<Term>,
    pub fixed_effects: Vec<FixedEffect>,
    pub cluster: ClusterLevel,
    pub filters: Vec<Filter>,
    /// Multiplies coefficients and standard errors.
    pub scale: f64,
}

impl RegressionSpec {
    pub fn new(id: impl Into<String>, dependent: Term, regressors: Vec<Term>) -> Self {
        RegressionSpec {
            id: id.into(),
            dependent,
            regressors,
            fixed_effects: vec![FixedEffect::Firm, FixedEffect::IndustryYear],
            cluster: ClusterLevel::Firm,
            filters: vec![],
            scale: 1.0,
        }
    }
}

/// Rows kept after filters and missing-value removal, and the materialized
/// dependent and regressor columns on those rows.
pub(crate) struct Sample {
    pub rows: Vec<usize>,
    pub y: Vec<f64>,
    pub x: Vec<Vec<f64>>,
}

pub(crate) fn materialize(frame: &Frame, dependent: &Term, regressors: &[Term], filters: &[Filter]) -> Result<Sample> {
    let y = dependent.values(frame)?;
    let xs: Vec<Vec<Option<f64>>> = regressors.iter().map(|t| t.values(frame)).collect::<Result<_>>()?;
    let mut keep = vec![true; frame.len()];
    for f in filters {
        for (k, m) in keep.iter_mut().zip(f.mask(frame)?) {
            *k &= m;
        }
    }
    let rows: Vec<usize> = (0..frame.len())
        .filter(|&r| keep[r] && y[r].is_some() && xs.iter().all(|c| c[r].is_some()))
        .collect();
    Ok(Sample {
        y: rows.iter().map(|&r| y[r].unwrap()).collect(),
        x: xs
            .iter()
            .map(|c| rows.iter().map(|&r| c[r].unwrap()).collect())
            .collect(),
        rows,
    })
}

/// Iteratively removes rows that are alone in some fixed-effect group.
/// Returns the surviving positions into `groups[d]`.
pub fn drop_singletons(groups: &[Vec<u32>]) -> Vec<usize> {
    let n = groups.first().map_or(0, Vec::len);
    let mut alive: Vec<usize> = (0..n).collect();
    loop {
        let mut bad = vec![false; alive.len()];
        for g in groups {
            let mut count: BTreeMap<u32, usize> = BTreeMap::new();
            for &r in &alive {
                *count.entry(g[r]).or_default() += 1;
            }
            for (i, &r) in alive.iter().enumerate() {
                if count[&g[r]] == 1 {
                    bad[i] = true;
                }
            }
        }
        if !bad.iter().any(|b| *b) {
            return alive;
        }
        alive = alive.into_iter().zip(bad).filter(|(_, b)| !b).map(|(r, _)| r).collect();
    }
}

/// Alternating projections onto the complement of the fixed-effect spaces.
pub struct Absorber {
    groups: Vec<Vec<u32>>,
    counts: Vec<Vec<f64>>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Absorber {
    /// `groups[d][r]` is a dense group id of row `r` in dimension `d`.
    pub fn new(groups: Vec<Vec<u32>>) -> Self {
        let counts = groups
            .iter()
            .map(|g| {
                let m = g.iter().max().map_or(0, |&v| v as usize + 1);
                let mut c = vec![0.0; m];
                for &id in g {
                    c[id as usize] += 1.0;
                }
                c
            })
            .collect();
        Absorber {
            groups,
            counts,
            tol: DEMEAN_TOL,
            max_iter: DEMEAN_MAX_ITER,
        }
    }

    /// Demeans in place; returns `(sweeps, converged)`.
    pub fn demean(&self, v: &mut [f64]) -> (usize, bool) {
        if self.groups.is_empty() {
            return (0, true);
        }
        let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let mut sums: Vec<Vec<f64>> = self.counts.iter().map(|c| vec![0.0; c.len()]).collect();
        for sweep in 1..=self.max_iter {
            let mut max_shift = 0.0f64;
            for (d, g) in self.groups.iter().enumerate() {
                let s = &mut sums[d];
                s.iter_mut().for_each(|x| *x = 0.0);
                for (r, &id) in g.iter().enumerate() {
                    s[id as usize] += v[r];
                }
                for (sum, &c) in s.iter_mut().zip(&self.counts[d]) {
                    if c > 0.0 {
                        *sum /= c;
                    }
                    max_shift = max_shift.max(sum.abs());
                }
                for (r, &id) in g.iter().enumerate() {
                    v[r] -= s[id as usize];
                }
            }
            if self.groups.len() == 1 || max_shift <= self.tol * scale {
                return (sweep, true);
            }
        }
        (self.max_iter, false)
    }
}

pub(crate) fn column_matrix(cols: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r])
}

/// Fixed-effects OLS with cluster-robust standard errors.
pub fn fit_fe_ols(spec: &RegressionSpec, frame: &Frame) -> Result<RegressionResult> {
    let sample = materialize(frame, &spec.dependent, &spec.regressors, &spec.filters)?;
    let mut warnings = Vec::new();

    let mut fe_dims: Vec<FixedEffect> = spec.fixed_effects.clone();
    fe_dims.sort();
    fe_dims.dedup();
    let all_groups: Vec<Vec<u32>> = fe_dims
        .iter()
        .map(|&fe| {
            let ids = fe_ids(frame, fe);
            sample.rows.iter().map(|&r| ids[r]).collect()
        })
        .collect();
    let survivors = if fe_dims.is_empty() {
        (0..sample.rows.len()).collect()
    } else {
        drop_singletons(&all_groups)
    };
    let dropped_singletons = sample.rows.len() - survivors.len();
    let n = survivors.len();
    if n == 0 {
        return Err(Error::NoObservations(format!("{}: empty estimation sample", spec.id)));
    }
    let groups: Vec<Vec<u32>> = all_groups
        .iter()
        .map(|g| dense_ids(&survivors.iter().map(|&i| g[i]).collect::<Vec<_>>()).0)
        .collect();
    let rows: Vec<usize> = survivors.iter().map(|&i| sample.rows[i]).collect();

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(spec.regressors.len() + 1);
    columns.push(survivors.iter().map(|&i| sample.y[i]).collect());
    for c in &sample.x {
        columns.push(survivors.iter().map(|&i| c[i]).collect());
    }
    let absorber = Absorber::new(groups);
    let converged: Vec<bool> = columns.par_iter_mut().map(|c| absorber.demean(c).1).collect();
    if converged.iter().any(|c| !c) {
        warnings.push(format!("{}: fixed-effect absorption hit the iteration cap", spec.id));
    }

    let y = DVector::from_vec(columns.remove(0));
    let x_all = column_matrix(&columns, n);
    let keep = independent_columns(&x_all, COLLINEAR_TOL);
    let dropped_regressors: Vec<String> = (0..spec.regressors.len())
        .filter(|j| !keep.contains(j))
        .map(|j| spec.regressors[j].to_string())
        .collect();
    for d in &dropped_regressors {
        warnings.push(format!("{}: dropped collinear regressor {d}", spec.id));
    }
    if keep.is_empty() {
        return Err(Error::RankDeficient(format!(
            "{}: every regressor is collinear with the fixed effects",
            spec.id
        )));
    }
    let x = select_columns(&x_all, &keep);
    let beta = lstsq(&x, &y)?;
    let resid = &y - &x * &beta;
    let rss = resid.norm_squared();
    let tss = y.norm_squared();
    let within_r2 = Some(if tss > 0.0 {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    } else {
        0.0
    });

    let cl_all = cluster_ids(frame, spec.cluster);
    let clusters: Vec<u32> = rows.iter().map(|&r| cl_all[r]).collect();
    let (_, n_groups) = dense_ids(&clusters);
    let vcov = clustered_covariance(&x, &resid, &clusters)? * (spec.scale * spec.scale);
    let (_, n_units) = dense_ids(&rows.iter().map(|&r| frame.unit()[r]).collect::<Vec<_>>());

    let mut coefficients = Vec::with_capacity(spec.regressors.len());
    for (j, term) in spec.regressors.iter().enumerate() {
        let pos = keep.iter().position(|&k| k == j);
        coefficients.push(Coefficient {
            name: term.to_string(),
            estimate: pos.map(|p| beta[p] * spec.scale),
            se: pos.map(|p| vcov[(p, p)].max(0.0).sqrt()),
        });
    }
    Ok(RegressionResult {
        id: spec.id.clone(),
        method: Method::FeOls,
        dependent: spec.dependent.to_string(),
        coefficients,
        dropped_regressors,
        vcov,
        within_r2,
        n_obs: n,
        n_groups,
        n_units,
        dropped_singletons,
        n_instruments: None,
        scale: spec.scale,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(n_firms: usize, n_years: i32, seed: u64) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keys: Vec<(String, u16, i32)> = (0..n_firms)
            .flat_map(|f| (0..n_years).map(move |t| (format!("f{f}"), 33 + (f % 2) as u16, 2000 + t)))
            .collect();
        let n = keys.len();
        let mut frame = Frame::new(keys).unwrap();
        let x1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n)
            .map(|r| {
                let f = frame.unit()[r] as f64;
                let t = frame.year()[r] as f64;
                1.5 * x1[r] - 0.7 * x2[r] + 0.3 * f + 0.1 * t + rng.random_range(-0.5..0.5)
            })
            .collect();
        frame.insert("y", y.into_iter().map(Some).collect()).unwrap();
        frame.insert("x1", x1.into_iter().map(Some).collect()).unwrap();
        frame.insert("x2", x2.into_iter().map(Some).collect()).unwrap();
        frame
    }

    fn dense_oracle(frame: &Frame, fes: &[FixedEffect]) -> DVector<f64> {
        let n = frame.len();
        let mut cols: Vec<Vec<f64>> = vec![
            frame.column("x1").unwrap().iter().map(|v| v.unwrap()).collect(),
            frame.column("x2").unwrap().iter().map(|v| v.unwrap()).collect(),
        ];
        for &fe in fes {
            let ids = fe_ids(frame, fe);
            let m = *ids.iter().max().unwrap() as usize + 1;
            for g in 0..m {
                cols.push(ids.iter().map(|&i| (i as usize == g) as u8 as f64).collect());
            }
        }
        let y = DVector::from_iterator(n, frame.column("y").unwrap().iter().map(|v| v.unwrap()));
        // Gram-Schmidt selection drops the redundant dummies; QR solves the rest.
        let mut basis: Vec<DVector<f64>> = Vec::new();
        let mut kept = Vec::new();
        for c in cols {
            let mut v = DVector::from_vec(c.clone());
            for _ in 0..2 {
                for q in &basis {
                    v -= q * q.dot(&v);
                }
            }
            if v.norm() > 1e-9 * DVector::from_vec(c.clone()).norm().max(1.0) {
                basis.push(v.normalize());
                kept.push(c);
            }
        }
        let x = column_matrix(&kept, n);
        let qr = x.qr();
        let b = qr.r().solve_upper_triangular(&(qr.q().transpose() * y)).unwrap();
        b.rows(0, 2).into_owned()
    }

    fn spec(fes: Vec<FixedEffect>) -> RegressionSpec {
        let mut s = RegressionSpec::new(
            "t",
            "y".parse().unwrap(),
            vec!["x1".parse().unwrap(), "x2".parse().unwrap()],
        );
        s.fixed_effects = fes;
        s
    }

    #[test]
    fn matches_dense_dummies_on_toy_panel() {
        let frame = toy(6, 3, 1);
        let fes = vec![FixedEffect::Firm, FixedEffect::Year];
        let r = fit_fe_ols(&spec(fes.clone()), &frame).unwrap();
        let oracle = dense_oracle(&frame, &fes);
        for j in 0..2 {
            let b = r.coefficients[j].estimate.unwrap();
            assert!(
                (b - oracle[j]).abs() <= 1e-8 * oracle[j].abs().max(1.0),
                "{b} vs {}",
                oracle[j]
            );
        }
    }

    #[test]
    fn identity_regression() {
        let mut frame = toy(10, 4, 2);
        let y = frame.column("y").unwrap().to_vec();
        frame.insert("y_copy", y).unwrap();
        let mut s = spec(vec![FixedEffect::Firm]);
        s.regressors = vec!["y_copy".parse().unwrap()];
        let r = fit_fe_ols(&s, &frame).unwrap();
        assert!((r.coefficients[0].estimate.unwrap() - 1.0).abs() < 1e-12);
        assert!((r.within_r2.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn firm_constant_is_absorbed() {
        let mut frame = toy(12, 5, 3);
        let shifted: Vec<Option<f64>> = (0..frame.len())
            .map(|r| frame.column("x1").unwrap()[r].map(|v| v + frame.unit()[r] as f64 * 3.0))
            .collect();
        let base = fit_fe_ols(&spec(vec![FixedEffect::Firm, FixedEffect::Year]), &frame).unwrap();
        frame.insert("x1", shifted).unwrap();
        let moved = fit_fe_ols(&spec(vec![FixedEffect::Firm, FixedEffect::Year]), &frame).unwrap();
        for j in 0..2 {
            let (a, b) = (
                base.coefficients[j].estimate.unwrap(),
                moved.coefficients[j].estimate.unwrap(),
            );
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn scaling_dependent_scales_coefficients_and_se() {
        let frame = toy(15, 4, 4);
        let a = fit_fe_ols(&spec(vec![FixedEffect::Firm]), &frame).unwrap();
        let mut s = spec(vec![FixedEffect::Firm]);
        s.scale = 100.0;
        let b = fit_fe_ols(&s, &frame).unwrap();
        for (ca, cb) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((cb.estimate.unwrap() - 100.0 * ca.estimate.unwrap()).abs() < 1e-9);
            assert!((cb.se.unwrap() - 100.0 * ca.se.unwrap()).abs() < 1e-9);
            assert_eq!(ca.stars(), cb.stars());
        }
    }

    #[test]
    fn collinear_regressor_dropped_and_reported() {
        let mut frame = toy(8, 4, 5);
        let firm_const: Vec<Option<f64>> = frame.unit().iter().map(|&u| Some(u as f64)).collect();
        frame.insert("fc", firm_const).unwrap();
        let mut s = spec(vec![FixedEffect::Firm]);
        s.regressors.push("fc".parse().unwrap());
        let r = fit_fe_ols(&s, &frame).unwrap();
        assert_eq!(r.dropped_regressors, vec!["fc".to_string()]);
        assert_eq!(r.coefficients[2].estimate, None);
    }

    #[test]
    fn singletons_dropped_and_counted() {
        let mut keys: Vec<(String, u16, i32)> = (0..5)
            .flat_map(|f| (0..3).map(move |t| (format!("f{f}"), 33, 2000 + t)))
            .collect();
        keys.push(("lonely".into(), 33, 2001));
        let n = keys.len();
        let mut frame = Frame::new(keys).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for name in ["y", "x1", "x2"] {
            frame
                .insert(name, (0..n).map(|_| Some(rng.random_range(-1.0..1.0))).collect())
                .unwrap();
        }
        let r = fit_fe_ols(&spec(vec![FixedEffect::Firm]), &frame).unwrap();
        assert_eq!(r.dropped_singletons, 1);
        assert_eq!(r.n_obs, 15);
    }

    #[test]
    fn one_cluster_is_an_error() {
        let frame = toy(6, 4, 7);
        let mut s = spec(vec![FixedEffect::Year]);
        s.cluster = ClusterLevel::Industry;
        let keys: Vec<(String, u16, i32)> = (0..frame.len())
            .map(|r| (format!("u{r}"), 33, 2000 + (r % 4) as i32))
            .collect();
        let mut single = Frame::new(keys).unwrap();
        for name in ["y", "x1", "x2"] {
            single.insert(name, frame.column(name).unwrap().to_vec()).unwrap();
        }
        assert!(matches!(fit_fe_ols(&s, &single), Err(Error::TooFewClusters(1))));
    }

    #[test]
    fn rerun_on_surviving_rows_is_identical() {
        let frame = toy(10, 4, 8);
        let a = fit_fe_ols(&spec(vec![FixedEffect::Firm, FixedEffect::IndustryYear]), &frame).unwrap();
        let b = fit_fe_ols(&spec(vec![FixedEffect::Firm, FixedEffect::IndustryYear]), &frame).unwrap();
        assert_eq!(a, b);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn absorption_equals_dense_dummies(firms in 4usize..25, years in 3i32..7, seed in 0u64..1000, drop in 0usize..5) {
            let full = toy(firms, years, seed);
            let keep: Vec<usize> = (0..full.len()).filter(|r| (r * 7 + seed as usize) % 11 >= drop).collect();
            let keys: Vec<(String, u16, i32)> = keep
                .iter()
                .map(|&r| (full.unit_name(full.unit()[r]).to_string(), full.industry()[r], full.year()[r]))
                .collect();
            let mut frame = Frame::new(keys).unwrap();
            for name in ["y", "x1", "x2"] {
                let c = full.column(name).unwrap();
                frame.insert(name, keep.iter().map(|&r| c[r]).collect()).unwrap();
            }
            let fes = vec![FixedEffect::Firm, FixedEffect::IndustryYear];
            let groups: Vec<Vec<u32>> = fes.iter().map(|&fe| fe_ids(&frame, fe)).collect();
            let alive = drop_singletons(&groups);
            let keys: Vec<(String, u16, i32)> = alive
                .iter()
                .map(|&r| (frame.unit_name(frame.unit()[r]).to_string(), frame.industry()[r], frame.year()[r]))
                .collect();
            proptest::prop_assume!(keys.len() > 12);
            let mut trimmed = Frame::new(keys).unwrap();
            for name in ["y", "x1", "x2"] {
                let c = frame.column(name).unwrap();
                trimmed.insert(name, alive.iter().map(|&r| c[r]).collect()).unwrap();
            }
            let r = fit_fe_ols(&spec(fes.clone()), &frame).unwrap();
            let oracle = dense_oracle(&trimmed, &fes);
            for j in 0..2 {
                let b = r.coefficients[j].estimate.unwrap();
                proptest::prop_assert!((b - oracle[j]).abs() <= 1e-8 * oracle[j].abs().max(1.0), "{} vs {}", b, oracle[j]);
            }
        }
    }
}
