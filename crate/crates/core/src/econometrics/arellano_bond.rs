use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cluster::dense_ids;
use super::fe_ols::{cluster_ids, ClusterLevel};
use super::frame::Frame;
use super::result::{Coefficient, Method, RegressionResult};
use super::terms::{Factor, Term};
use crate::error::{Error, Result};
use crate::linalg::{independent_columns, inv_spd, pinv_sym, select_columns, COLLINEAR_TOL};

/// One-step difference GMM for `y_t = ρ y_{t-1} + x_t'β + δ_t + α_i + e_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbSpec {
    pub id: String,
    pub dependent: String,
    pub exogenous: Vec<Term>,
    /// Deepest level lag used as instrument counted from `t-2`; `None` uses all.
    #[serde(default)]
    pub lag_depth: Option<usize>,
    #[serde(default = "yes")]
    pub year_dummies: bool,
    #[serde(default)]
    pub cluster: ClusterLevel,
    #[serde(default = "one")]
    pub scale: f64,
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

impl AbSpec {
    pub fn new(id: impl Into<String>, dependent: impl Into<String>, exogenous: Vec<Term>) -> Self {
        AbSpec {
            id: id.into(),
            dependent: dependent.into(),
            exogenous,
            lag_depth: None,
            year_dummies: true,
            cluster: ClusterLevel::Firm,
            scale: 1.0,
        }
    }

    pub fn lagged_dependent_name(&self) -> String {
        Factor::new(self.dependent.clone(), 1).to_string()
    }
}

fn shift(frame: &Frame, v: &[Option<f64>], lag: i32) -> Vec<Option<f64>> {
    (0..frame.len())
        .map(|r| frame.row_of(frame.unit()[r], frame.year()[r] - lag).and_then(|p| v[p]))
        .collect()
}

struct Equation {
    row: usize,
    dy: f64,
    dy_lag: f64,
    dx: Vec<f64>,
}

pub fn fit_arellano_bond(spec: &AbSpec, frame: &Frame) -> Result<RegressionResult> {
    let y = frame.column(&spec.dependent)?.to_vec();
    let y1 = shift(frame, &y, 1);
    let y2 = shift(frame, &y, 2);
    let xs: Vec<Vec<Option<f64>>> = spec.exogenous.iter().map(|t| t.values(frame)).collect::<Result<_>>()?;
    let xs1: Vec<Vec<Option<f64>>> = xs.iter().map(|x| shift(frame, x, 1)).collect();

    let mut equations = Vec::new();
    for r in 0..frame.len() {
        let (Some(a), Some(b), Some(c)) = (y[r], y1[r], y2[r]) else {
            continue;
        };
        let dx: Option<Vec<f64>> = xs.iter().zip(&xs1).map(|(x, x1)| Some(x[r]? - x1[r]?)).collect();
        let Some(dx) = dx else { continue };
        equations.push(Equation {
            row: r,
            dy: a - b,
            dy_lag: b - c,
            dx,
        });
    }
    if equations.is_empty() {
        return Err(Error::NoObservations(format!(
            "{}: no usable differenced equations",
            spec.id
        )));
    }
    equations.sort_by_key(|e| (frame.unit()[e.row], frame.year()[e.row]));

    let first_year = *frame.year().iter().min().unwrap();
    let eq_years: Vec<i32> = {
        let mut v: Vec<i32> = equations.iter().map(|e| frame.year()[e.row]).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let max_depth = spec.lag_depth.unwrap_or(usize::MAX).max(1);
    let mut inst_cols: BTreeMap<(i32, i32), usize> = BTreeMap::new();
    for &t in &eq_years {
        let mut s = 2;
        while t - s >= first_year && (s - 1) as usize <= max_depth {
            let next = inst_cols.len();
            inst_cols.insert((t, s), next);
            s += 1;
        }
    }
    let n_level = inst_cols.len();
    let k_x = spec.exogenous.len();
    let n_dummies = if spec.year_dummies { eq_years.len() } else { 0 };
    let n = equations.len();

    let mut x = DMatrix::<f64>::zeros(n, 1 + k_x + n_dummies);
    let mut z = DMatrix::<f64>::zeros(n, n_level + k_x + n_dummies);
    let mut dy = DVector::<f64>::zeros(n);
    for (i, e) in equations.iter().enumerate() {
        let t = frame.year()[e.row];
        let unit = frame.unit()[e.row];
        dy[i] = e.dy;
        x[(i, 0)] = e.dy_lag;
        for (j, v) in e.dx.iter().enumerate() {
            x[(i, 1 + j)] = *v;
            z[(i, n_level + j)] = *v;
        }
        if spec.year_dummies {
            let d = eq_years.binary_search(&t).unwrap();
            x[(i, 1 + k_x + d)] = 1.0;
            z[(i, n_level + k_x + d)] = 1.0;
        }
        for (&(tt, s), &c) in inst_cols.range((t, 2)..=(t, i32::MAX)) {
            debug_assert_eq!(tt, t);
            if let Some(v) = frame.row_of(unit, t - s).and_then(|p| y[p]) {
                z[(i, c)] = v;
            }
        }
    }

    let keep = independent_columns(&x, COLLINEAR_TOL);
    let names: Vec<String> = std::iter::once(spec.lagged_dependent_name())
        .chain(spec.exogenous.iter().map(|t| t.to_string()))
        .collect();
    let mut warnings = Vec::new();
    let dropped_regressors: Vec<String> = (0..names.len())
        .filter(|j| !keep.contains(j))
        .map(|j| names[j].clone())
        .collect();
    for d in &dropped_regressors {
        warnings.push(format!("{}: dropped collinear regressor {d}", spec.id));
    }
    if !keep.contains(&0) {
        return Err(Error::RankDeficient(format!(
            "{}: lagged dependent has no variation",
            spec.id
        )));
    }
    let x = select_columns(&x, &keep);

    let units: Vec<u32> = equations.iter().map(|e| frame.unit()[e.row]).collect();
    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || units[i] != units[start] {
            spans.push((start, i));
            start = i;
        }
    }
    let n_units = spans.len();

    let q = z.ncols();
    let mut zhz = DMatrix::<f64>::zeros(q, q);
    for &(a, b) in &spans {
        let zi = z.rows(a, b - a);
        let m = b - a;
        let years: Vec<i32> = (a..b).map(|i| frame.year()[equations[i].row]).collect();
        let h = DMatrix::from_fn(m, m, |p, r| {
            if p == r {
                2.0
            } else if (years[p] - years[r]).abs() == 1 {
                -1.0
            } else {
                0.0
            }
        });
        zhz += zi.transpose() * h * zi;
    }
    let w = pinv_sym(&zhz);
    let szx = z.transpose() * &x;
    let szy = z.transpose() * &dy;
    let m = szx.transpose() * &w * &szx;
    let m_inv = inv_spd(&m, "GMM normal matrix")?;
    let beta = &m_inv * (szx.transpose() * &w * szy);
    let resid = &dy - &x * &beta;

    let cl_all = cluster_ids(frame, spec.cluster);
    let (clusters, n_groups) = dense_ids(&equations.iter().map(|e| cl_all[e.row]).collect::<Vec<_>>());
    if n_groups < 2 {
        return Err(Error::TooFewClusters(n_groups));
    }
    let mut scores = DMatrix::<f64>::zeros(n_groups, q);
    for i in 0..n {
        let g = clusters[i] as usize;
        for c in 0..q {
            scores[(g, c)] += z[(i, c)] * resid[i];
        }
    }
    let s = scores.transpose() * scores;
    let bread = szx.transpose() * &w;
    let v = &m_inv * (&bread * s * bread.transpose()) * &m_inv * (spec.scale * spec.scale);
    let vcov = 0.5 * (&v + v.transpose());

    let n_instruments = (0..q).filter(|&c| z.column(c).iter().any(|v| *v != 0.0)).count();
    if n_instruments >= n_units {
        warnings.push(format!(
            "{}: {n_instruments} instruments for {n_units} groups, estimates may overfit",
            spec.id
        ));
    }

    let coefficients = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let pos = keep.iter().position(|&k| k == j);
            Coefficient {
                name: name.clone(),
                estimate: pos.map(|p| beta[p] * spec.scale),
                se: pos.map(|p| vcov[(p, p)].max(0.0).sqrt()),
            }
        })
        .collect();
    Ok(RegressionResult {
        id: spec.id.clone(),
        method: Method::ArellanoBond,
        dependent: spec.dependent.clone(),
        coefficients,
        dropped_regressors,
        vcov,
        within_r2: None,
        n_obs: n,
        n_groups,
        n_units,
        dropped_singletons: 0,
        n_instruments: Some(n_instruments),
        scale: spec.scale,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econometrics::fe_ols::{fit_fe_ols, FixedEffect, RegressionSpec};
    use crate::synth::generate_dynamic_panel as simulate_ar1_frame;

    fn ab(frame: &Frame) -> RegressionResult {
        fit_arellano_bond(&AbSpec::new("ab", "y", vec![]), frame).unwrap()
    }

    #[test]
    fn recovers_rho_half_and_beats_within_ols() {
        let reps = 20;
        let (mut gmm, mut ols) = (0.0, 0.0);
        for rep in 0..reps {
            let frame = simulate_ar1_frame(0.5, 0.0, 200, 8, 100 + rep);
            gmm += ab(&frame).estimate("L1.y").unwrap();
            let mut s = RegressionSpec::new("w", "y".parse().unwrap(), vec!["L1.y".parse().unwrap()]);
            s.fixed_effects = vec![FixedEffect::Firm];
            ols += fit_fe_ols(&s, &frame).unwrap().estimate("L1.y").unwrap();
        }
        let (gmm, ols) = (gmm / reps as f64, ols / reps as f64);
        assert!((gmm - 0.5).abs() < 0.05, "gmm {gmm}");
        assert!(
            ols < 0.5 && (ols - 0.5).abs() > (gmm - 0.5).abs(),
            "ols {ols} gmm {gmm}"
        );
    }

    #[test]
    fn exogenous_regressor_recovered() {
        let frame = simulate_ar1_frame(0.3, 1.0, 300, 6, 7);
        let r = fit_arellano_bond(&AbSpec::new("ab", "y", vec!["x".parse().unwrap()]), &frame).unwrap();
        assert!((r.estimate("x").unwrap() - 1.0).abs() < 0.1);
        assert!((r.estimate("L1.y").unwrap() - 0.3).abs() < 0.1);
        assert!(r.se("x").unwrap() > 0.0);
        assert_eq!(r.within_r2, None);
    }

    #[test]
    fn lag_depth_limits_instruments() {
        let frame = simulate_ar1_frame(0.5, 0.0, 50, 8, 3);
        let mut full = AbSpec::new("ab", "y", vec![]);
        full.year_dummies = false;
        let mut one = full.clone();
        one.lag_depth = Some(1);
        let a = fit_arellano_bond(&full, &frame).unwrap();
        let b = fit_arellano_bond(&one, &frame).unwrap();
        assert_eq!(a.n_instruments, Some(21));
        assert_eq!(b.n_instruments, Some(6));
        assert_eq!(a.n_obs, 50 * 6);
    }

    #[test]
    fn overfitting_warning_for_few_groups() {
        let frame = simulate_ar1_frame(0.5, 0.0, 10, 8, 4);
        assert!(ab(&frame).warnings.iter().any(|w| w.contains("overfit")));
    }

    #[test]
    fn too_short_panel_errors() {
        let frame = simulate_ar1_frame(0.5, 0.0, 10, 2, 5);
        assert!(matches!(
            fit_arellano_bond(&AbSpec::new("ab", "y", vec![]), &frame),
            Err(Error::NoObservations(_))
        ));
    }
}
