//! Synthetic firm panels with planted effects.
//!
//! [`generate`] builds firm-years, debt instruments, deflators and labor costs
//! in the ingest formats. Zombie spells, zombie-credit shares and lagged
//! regressors are tallied inside the generator, and three outcomes follow
//! the regression equations of the catalog with known coefficients:
//! productivity (`EQ4.m1`), capital growth (`EQ5.m1`) and employment growth
//! (`EQ6.m1`).
//!
//! Log assets in `t - 1` equal log capital in `t` plus one. The capital
//! elasticity of the production-function stage is then spanned by the lagged
//! size control, so noise-free data identify the productivity coefficients
//! exactly whatever that elasticity estimate is, provided a single (pooled)
//! production function is estimated.

mod panels;

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classifier::{kleene_and, MIN_ZOMBIE_AGE, SME_EMP_THOUSANDS};
use crate::error::{Error, Result};
use crate::metrics::LaborCostTable;
use crate::panel_store::{
    write_firm_years, write_instruments, DebtInstrument, DebtType, DeflatorTable, FirmYear, MaturitySplit,
};
use crate::specs::{materialize, Executable};

pub use panels::{generate_dynamic_panel, generate_production_panel};

/// Two-digit NAICS sectors kept by the default sample filter.
pub const INDUSTRIES: [u16; 18] = [21, 23, 31, 32, 33, 42, 44, 45, 48, 49, 51, 53, 54, 56, 61, 62, 71, 72];

pub const FIRM_YEARS_FILE: &str = "firm_years.csv";
pub const INSTRUMENTS_FILE: &str = "instruments.csv";
pub const DEFLATORS_FILE: &str = "deflators.csv";
pub const LABOR_COSTS_FILE: &str = "labor_costs.csv";
pub const TRUTH_FILE: &str = "truth_manifest.csv";

/// Coefficients on the four leading regressors of a catalog model:
/// `NZ`, `NZ×SM`, `NZ×SM×BC` and `NZ×SM×BN`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Planted {
    pub nz: f64,
    pub nz_sm: f64,
    pub nz_sm_bc: f64,
    pub nz_sm_bn: f64,
}

impl Planted {
    fn as_array(&self) -> [f64; 4] {
        [self.nz, self.nz_sm, self.nz_sm_bc, self.nz_sm_bn]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub n_firms: usize,
    pub n_years: usize,
    pub start_year: i32,
    pub n_industries: usize,
    /// Target share of firm-years that are zombies under the default definition.
    pub zombie_rate: f64,
    /// Share of zombie spells with high Q, which count only under the broad definition.
    pub broad_only_share: f64,
    pub entry_share: f64,
    pub exit_share: f64,
    /// Share of firms that report debt instruments.
    pub borrower_share: f64,
    /// Multiplies every noise scale; zero gives noiseless outcomes.
    pub noise: f64,
    /// Target phi between exit and missing Tobin's Q; `None` leaves Q complete.
    pub missing_phi: Option<f64>,
    /// Adds pre-window rows and an excluded-sector firm that ingestion must drop.
    pub extra_rows: bool,
    pub tfp: Planted,
    pub capital: Planted,
    pub employment: Planted,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            n_firms: 1000,
            n_years: 18,
            start_year: 2002,
            n_industries: 18,
            zombie_rate: 0.08,
            broad_only_share: 0.3,
            entry_share: 0.25,
            exit_share: 0.15,
            borrower_share: 0.8,
            noise: 1.0,
            missing_phi: Some(0.5),
            extra_rows: true,
            tfp: Planted {
                nz: 0.05,
                nz_sm: 0.02,
                nz_sm_bc: -0.3,
                nz_sm_bn: -0.5,
            },
            capital: Planted {
                nz: 0.01,
                nz_sm: 0.005,
                nz_sm_bc: -0.05,
                nz_sm_bn: -0.08,
            },
            employment: Planted {
                nz: 0.01,
                nz_sm: 0.005,
                nz_sm_bc: -0.002,
                nz_sm_bn: -0.001,
            },
            seed: 1,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        let rate = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        rate("zombie_rate", self.zombie_rate)?;
        rate("broad_only_share", self.broad_only_share)?;
        rate("entry_share", self.entry_share)?;
        rate("exit_share", self.exit_share)?;
        rate("borrower_share", self.borrower_share)?;
        if let Some(p) = self.missing_phi {
            rate("missing_phi", p)?;
        }
        if self.n_firms == 0 || self.n_years < 4 {
            return Err(Error::Config("need at least one firm and four years".into()));
        }
        if self.n_industries == 0 || self.n_industries > INDUSTRIES.len() {
            return Err(Error::Config(format!("n_industries must be 1..={}", INDUSTRIES.len())));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::Config("noise must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub firm_years: Vec<FirmYear>,
    pub instruments: Vec<DebtInstrument>,
    pub deflators: DeflatorTable,
    pub labor_costs: LaborCostTable,
    /// `(parameter, value)` rows of the truth manifest.
    pub truth: Vec<(String, f64)>,
}

impl SynthData {
    pub fn truth(&self, parameter: &str) -> Option<f64> {
        self.truth.iter().find(|(p, _)| p == parameter).map(|(_, v)| *v)
    }
}

struct Firm {
    id: String,
    naics2: u16,
    first_listed: i32,
    start: i32,
    len: usize,
    exits: bool,
    borrower: bool,
    bank_lean: f64,
}

impl Firm {
    fn year(&self, j: usize) -> i32 {
        self.start + j as i32
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Spell {
    None,
    Zombie,
    BroadOnly,
    Blip,
}

/// One new contract in real terms, before any duplicate reporting.
struct Contract {
    firm: usize,
    row: usize,
    debt_type: DebtType,
    face: f64,
    maturity: u32,
    accepted: bool,
}

fn n01(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Zero-one Pearson correlation computed from centred moments.
fn pearson(a: &[bool], b: &[bool]) -> Option<f64> {
    let n = a.len() as f64;
    let x: Vec<f64> = a.iter().map(|&v| v as u8 as f64).collect();
    let y: Vec<f64> = b.iter().map(|&v| v as u8 as f64).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(&y).map(|(p, q)| (p - mx) * (q - my)).sum();
    let vx: f64 = x.iter().map(|p| (p - mx) * (p - mx)).sum();
    let vy: f64 = y.iter().map(|q| (q - my) * (q - my)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn split_of(maturity: u32) -> Option<MaturitySplit> {
    match maturity {
        1..=4 => Some(MaturitySplit::Short),
        5..=40 => Some(MaturitySplit::Long),
        _ => None,
    }
}

/// Industry-year credit tallies for one maturity split and credit class.
#[derive(Default, Clone, Copy)]
struct Tally {
    zombie: f64,
    total: f64,
}

pub fn generate(cfg: &DgpConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = cfg.noise;
    let end = cfg.start_year + cfg.n_years as i32 - 1;
    let industries = &INDUSTRIES[..cfg.n_industries];

    let mut firms = Vec::with_capacity(cfg.n_firms);
    for f in 0..cfg.n_firms {
        let naics2 = industries[f % industries.len()];
        let enters = rng.random::<f64>() < cfg.entry_share;
        let start = if enters {
            rng.random_range(cfg.start_year + 1..=end - 2)
        } else {
            cfg.start_year
        };
        let first_listed = if enters {
            start - rng.random_range(0..3)
        } else {
            start - rng.random_range(0..30)
        };
        let exits = rng.random::<f64>() < cfg.exit_share && end - start >= 3;
        let last = if exits { rng.random_range(start + 2..end) } else { end };
        firms.push(Firm {
            id: format!("F{f:05}"),
            naics2,
            first_listed,
            start,
            len: (last - start + 1) as usize,
            exits,
            borrower: rng.random::<f64>() < cfg.borrower_share,
            bank_lean: rng.random_range(0.2..0.9),
        });
    }
    let n_rows: usize = firms.iter().map(|f| f.len).sum();

    // Low-coverage spells. Each spell starts after a covered year, so
    // statuses are never undetermined. Zombie years get low Q, and a cell
    // never holds half its firms at low Q so the median stays above them.
    let mut cell_size: HashMap<(u16, i32), usize> = HashMap::new();
    for firm in &firms {
        for j in 0..firm.len {
            *cell_size.entry((firm.naics2, firm.year(j))).or_default() += 1;
        }
    }
    let mut cell_low: HashMap<(u16, i32), usize> = HashMap::new();
    let mut spells: Vec<Vec<Spell>> = firms.iter().map(|f| vec![Spell::None; f.len]).collect();
    let mut low_q: Vec<Vec<bool>> = firms.iter().map(|f| vec![false; f.len]).collect();
    let target = (cfg.zombie_rate * n_rows as f64).round() as usize;
    let mut placed = 0usize;
    let mut order: Vec<usize> = (0..firms.len()).collect();
    let mut stalled = 0;
    while placed < target && stalled < 20 {
        order.shuffle(&mut rng);
        let before = placed;
        for &f in &order {
            if placed >= target {
                break;
            }
            let firm = &firms[f];
            if firm.len < 5 {
                continue;
            }
            let len = rng.random_range(3..=7usize).min(firm.len - 2);
            let p = rng.random_range(1..=firm.len - len);
            let hi = (p + len).min(firm.len - 1);
            if (p - 1..=hi).any(|j| spells[f][j] != Spell::None) {
                continue;
            }
            let broad_only = rng.random::<f64>() < cfg.broad_only_share;
            let years: Vec<usize> = (p + 2..p + len)
                .filter(|&j| firm.year(j) - firm.first_listed >= MIN_ZOMBIE_AGE)
                .collect();
            if years.is_empty() {
                continue;
            }
            let key = |j: usize| (firm.naics2, firm.year(j));
            if !broad_only
                && years
                    .iter()
                    .any(|&j| 2 * (cell_low.get(&key(j)).copied().unwrap_or(0) + 1) >= cell_size[&key(j)])
            {
                continue;
            }
            for s in &mut spells[f][p..p + len] {
                *s = if broad_only { Spell::BroadOnly } else { Spell::Zombie };
            }
            if !broad_only {
                for &j in &years {
                    low_q[f][j] = true;
                    *cell_low.entry(key(j)).or_default() += 1;
                }
                placed += years.len();
            }
        }
        stalled = if placed == before { stalled + 1 } else { 0 };
    }
    if placed < target {
        return Err(Error::Infeasible(format!(
            "zombie_rate {} needs {target} zombie firm-years but age, panel length and industry sizes allow {placed}",
            cfg.zombie_rate
        )));
    }
    for f in 0..firms.len() {
        let n = firms[f].len;
        if n >= 4 && rng.random::<f64>() < 0.1 {
            let p = rng.random_range(1..n - 1);
            if spells[f][p - 1..=p + 1].iter().all(|s| *s == Spell::None) {
                spells[f][p] = Spell::Blip;
            }
        }
    }

    // Tobin's Q: low in zombie years, above every healthy value in
    // broad-only spells.
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(firms.len());
    for (sp, lq) in spells.iter().zip(&low_q) {
        q.push(
            sp.iter()
                .zip(lq)
                .map(|(s, &l)| match s {
                    _ if l => rng.random_range(0.35..0.9),
                    Spell::BroadOnly => rng.random_range(3.2..4.0),
                    _ => rng.random_range(1.2..3.0),
                })
                .collect(),
        );
    }
    let mut by_cell: BTreeMap<(u16, i32), Vec<f64>> = BTreeMap::new();
    for (f, firm) in firms.iter().enumerate() {
        for j in 0..firm.len {
            by_cell.entry((firm.naics2, firm.year(j))).or_default().push(q[f][j]);
        }
    }
    let med: BTreeMap<(u16, i32), f64> = by_cell.into_iter().map(|(k, v)| (k, median(v))).collect();

    // Statuses under the three definitions, mirrored from their rules.
    let low = |f: usize, j: usize| spells[f][j] != Spell::None;
    let mut z: Vec<Vec<[Option<bool>; 3]>> = Vec::with_capacity(firms.len());
    for (f, firm) in firms.iter().enumerate() {
        let mut v = Vec::with_capacity(firm.len);
        for j in 0..firm.len {
            let flag = |d: usize| (j >= d).then(|| low(f, j - d));
            let broad = kleene_and([
                Some(firm.year(j) - firm.first_listed >= MIN_ZOMBIE_AGE),
                flag(2),
                flag(1),
                flag(0),
            ]);
            let below = q[f][j] < med[&(firm.naics2, firm.year(j))];
            let nx = kleene_and([broad, Some(below)]);
            v.push([broad, nx, nx]);
        }
        z.push(v);
    }
    let zombie = |f: usize, j: usize| z[f][j][2];

    // Capital growth depends on the credit tallies, so debt is sized on the
    // expected log-asset path rather than the realised one.
    let size: Vec<f64> = firms.iter().map(|_| (4.0 + n01(&mut rng)).max(1.5)).collect();
    let mu_k: Vec<f64> = firms.iter().map(|_| 0.02 + 0.01 * noise * n01(&mut rng)).collect();

    // Contracts.
    let mut contracts: Vec<Contract> = Vec::new();
    let mut debt: Vec<Vec<f64>> = Vec::with_capacity(firms.len());
    for (f, firm) in firms.iter().enumerate() {
        let mut d = Vec::with_capacity(firm.len);
        for j in 0..firm.len {
            let scale = (size[f] + 1.0 + mu_k[f] * (j + 1) as f64).exp();
            let total = scale * rng.random_range(0.15..0.25);
            d.push(total);
            if !firm.borrower {
                continue;
            }
            let p_issue = if zombie(f, j) == Some(true) { 0.85 } else { 0.6 };
            if rng.random::<f64>() >= p_issue {
                continue;
            }
            let count = 1 + (rng.random::<f64>() < 0.4) as usize + (rng.random::<f64>() < 0.15) as usize;
            for _ in 0..count {
                let debt_type = if rng.random::<f64>() < firm.bank_lean {
                    if rng.random::<bool>() {
                        DebtType::BL
                    } else {
                        DebtType::RC
                    }
                } else {
                    DebtType::BN
                };
                let u: f64 = rng.random();
                let maturity = if u < 0.45 {
                    rng.random_range(1..=4)
                } else if u < 0.9 {
                    rng.random_range(5..=40)
                } else {
                    rng.random_range(41..=200)
                };
                let rejected = rng.random::<f64>() < 0.02;
                let face = if rejected {
                    total * 1.2
                } else {
                    total * rng.random_range(0.02..0.4)
                };
                contracts.push(Contract {
                    firm: f,
                    row: j,
                    debt_type,
                    face,
                    maturity,
                    accepted: !rejected,
                });
            }
        }
        debt.push(d);
    }

    // Credit tallies per (industry, year, split, is_bank_credit).
    let mut tallies: BTreeMap<(u16, i32, MaturitySplit, bool), Tally> = BTreeMap::new();
    for c in contracts.iter().filter(|c| c.accepted) {
        let Some(split) = split_of(c.maturity) else { continue };
        let firm = &firms[c.firm];
        let Some(zb) = zombie(c.firm, c.row) else { continue };
        let cell = tallies
            .entry((firm.naics2, firm.year(c.row), split, c.debt_type.is_bank_credit()))
            .or_default();
        cell.total += c.face;
        if zb {
            cell.zombie += c.face;
        }
    }
    let share = |s: u16, t: i32, bank: bool| -> Option<f64> {
        tallies
            .get(&(s, t, MaturitySplit::Short, bank))
            .filter(|c| c.total > 0.0)
            .map(|c| c.zombie / c.total)
    };
    let volume = |s: u16, t: i32, bank: bool| -> f64 {
        tallies
            .get(&(s, t, MaturitySplit::Short, bank))
            .map_or(0.0, |c| c.zombie)
    };
    let dlog = |s: u16, t: i32, bank: bool| -> Option<f64> {
        let (a, b) = (volume(s, t, bank), volume(s, t - 1, bank));
        (a > 0.0 && b > 0.0 && t > cfg.start_year).then(|| a.ln() - b.ln())
    };

    // Fixed effects of the three outcome equations.
    let mut cell_fe: HashMap<(u16, i32), [f64; 3]> = HashMap::new();
    for &s in industries {
        for t in cfg.start_year..=end + 1 {
            cell_fe.insert(
                (s, t),
                [0.1 * n01(&mut rng), 0.02 * n01(&mut rng), 0.02 * n01(&mut rng)],
            );
        }
    }
    let sigma_tfp = 0.1 * noise;
    let sigma_y = 0.05 * noise;
    let sigma_k = 0.05 * noise;
    let sigma_e = 0.05 * noise;

    let deflators = {
        let mut table = DeflatorTable::new();
        for &s in industries.iter().chain([52u16].iter()) {
            let mut idx = 1.0;
            table.insert(s, cfg.start_year, 1.0)?;
            for t in cfg.start_year + 1..=end {
                idx *= 1.0 + rng.random_range(0.0..0.04);
                table.insert(s, t, idx)?;
            }
            let mut back = 1.0;
            for t in (cfg.start_year - 3..cfg.start_year).rev() {
                back /= 1.0 + rng.random_range(0.0..0.04);
                table.insert(s, t, back)?;
            }
        }
        table
    };
    let mut labor = LaborCostTable::new();
    for t in cfg.start_year - 3..=end {
        labor.insert(t, 40_000.0 * 1.03f64.powi(t - cfg.start_year))?;
    }

    let tfp_b = cfg.tfp.as_array();
    let cap_b = cfg.capital.as_array();
    let emp_b = cfg.employment.as_array();

    // Missingness of Q before exit.
    let n_exit_rows = firms.iter().filter(|f| f.exits).count() as f64;
    let p_exit = n_exit_rows / n_rows as f64;
    let pi = cfg.missing_phi.map(|phi| {
        let p2 = phi * phi;
        (p2 / (1.0 - p_exit + p2 * p_exit)).min(1.0)
    });

    let mut rows: Vec<FirmYear> = Vec::with_capacity(n_rows);
    let mut exit_vec = Vec::with_capacity(n_rows);
    let mut miss_vec = Vec::with_capacity(n_rows);
    for (f, firm) in firms.iter().enumerate() {
        let n = firm.len;
        let s = firm.naics2;
        let alpha = 0.3 * n01(&mut rng);
        let mu_k = mu_k[f];
        let psi = 0.01 + 0.02 * n01(&mut rng);
        let c_l = 3.0 + 0.5 * n01(&mut rng);

        let mut emp = vec![0.0; n];
        // SME status is kept persistent by starting firms well away from the threshold.
        let centre = if rng.random::<f64>() < 0.5 { -1.2 } else { 1.2 };
        emp[0] = SME_EMP_THOUSANDS * (centre + 0.3 * n01(&mut rng)).exp();
        let mut k = vec![0.0; n];
        k[0] = size[f];
        let mut omega = vec![0.0; n];
        let lagged = |j: usize, emp: &[f64]| -> Option<(f64, f64)> {
            if j == 0 {
                return None;
            }
            let nz = zombie(f, j - 1)?;
            let sm = emp[j - 1] < SME_EMP_THOUSANDS;
            Some(((!nz) as u8 as f64, sm as u8 as f64))
        };
        let terms = |b: &[f64; 4], nz: f64, sm: f64, bc: Option<f64>, bn: Option<f64>| -> f64 {
            match (bc, bn) {
                (Some(bc), Some(bn)) => b[0] * nz + b[1] * nz * sm + b[2] * nz * sm * bc + b[3] * nz * sm * bn,
                _ => 0.0,
            }
        };
        for j in 0..n {
            let t = firm.year(j);
            let fe = cell_fe[&(s, t)];
            let lag = lagged(j, &emp);
            if j > 0 {
                let (nz, sm) = lag.unwrap_or((0.0, 0.0));
                let x = lag.map_or(0.0, |_| terms(&emp_b, nz, sm, dlog(s, t, true), dlog(s, t, false)));
                let g = (psi + fe[2] + x + sigma_e * n01(&mut rng)).clamp(-1.5, 1.5);
                emp[j] = emp[j - 1] * (2.0 + g) / (2.0 - g);
                let xk = lag.map_or(0.0, |_| {
                    terms(&cap_b, nz, sm, share(s, t - 1, true), share(s, t - 1, false))
                });
                k[j] = k[j - 1] + mu_k + fe[1] + xk + sigma_k * n01(&mut rng);
            }
            let (nz, sm) = lag.unwrap_or((0.0, 0.0));
            let xt = lag.map_or(0.0, |_| {
                terms(&tfp_b, nz, sm, share(s, t - 1, true), share(s, t - 1, false))
            });
            omega[j] = alpha + fe[0] + xt + sigma_tfp * n01(&mut rng);
        }

        let missing_tail = pi.is_some_and(|p| firm.exits && rng.random::<f64>() < p);
        for j in 0..n {
            let t = firm.year(j);
            let idx = deflators.get(s, t).expect("deflator present");
            let nominal = |v: f64| Some(v * idx);
            let at = (k[j] + 1.0 + 0.2 * n01(&mut rng)).exp();
            let ppent = k[j].exp();
            let l = c_l + 0.3 * n01(&mut rng);
            let y = 0.6 * l + 0.4 * k[j] + omega[j] + sigma_y * n01(&mut rng);
            let inv = 0.8 * omega[j] + 0.6 * k[j] - 1.0;
            let d = debt[f][j];
            let xint = d * rng.random_range(0.03..0.07);
            let ebitda = if low(f, j) {
                xint * rng.random_range(0.2..0.9)
            } else {
                xint * rng.random_range(2.0..6.0)
            };
            let lt = d * rng.random_range(1.0..1.1);
            let qv = q[f][j];
            let me = qv * at - lt;
            let in_tail = missing_tail && j + 2 >= n;
            let random_gap = cfg.missing_phi.is_some() && !firm.exits && rng.random::<f64>() < 0.02;
            let q_missing = in_tail || random_gap;
            let xlr_present = rng.random::<f64>() < 0.8;
            let labor_cost = emp[j] * 1e3 * labor.get(t).expect("labor cost present") * rng.random_range(0.8..1.2);
            rows.push(FirmYear {
                firm_id: firm.id.clone(),
                year: t,
                naics2: s,
                at: nominal(at),
                sale: nominal(y.exp()),
                cogs: nominal(l.exp()),
                ppent: nominal(ppent),
                capx: nominal(inv.exp()),
                xint: nominal(xint),
                ebitda: nominal(ebitda),
                dltt: nominal(0.7 * d),
                dlc: nominal(0.3 * d),
                ib: nominal(at * (0.03 + 0.05 * n01(&mut rng))),
                che: nominal(lt * rng.random_range(0.1..0.5)),
                lt: nominal(lt),
                xrd: nominal(at * rng.random_range(0.0..0.05)),
                emp: Some(emp[j]),
                xlr: if xlr_present { nominal(labor_cost) } else { None },
                tobins_q: (!q_missing).then_some(qv),
                first_listed_year: firm.first_listed,
                exit_flag: firm.exits && j + 1 == n,
                market_equity: nominal(me),
            });
            let exit = firm.exits && j + 1 == n;
            exit_vec.push(exit);
            miss_vec.push(exit && q_missing);
        }
    }
    // Instruments in nominal terms, with repeated reports in later years.
    let mut instruments = Vec::with_capacity(contracts.len());
    let mut counter: Vec<usize> = vec![0; firms.len()];
    for c in &contracts {
        let firm = &firms[c.firm];
        let t = firm.year(c.row);
        let idx = deflators.get(firm.naics2, t).unwrap();
        counter[c.firm] += 1;
        let inst = DebtInstrument {
            firm_id: firm.id.clone(),
            component_id: format!("{}-C{:04}", firm.id, counter[c.firm]),
            report_year: t,
            debt_type: c.debt_type,
            face_value: c.face * idx,
            maturity_quarters: c.maturity,
        };
        if c.accepted && rng.random::<f64>() < 0.25 && c.row + 1 < firm.len {
            let mut again = inst.clone();
            again.report_year = t + 1;
            instruments.push(again);
        }
        instruments.push(inst);
    }
    let mut orphans = 0;
    for firm in firms.iter().filter(|f| f.start > cfg.start_year && f.borrower).take(5) {
        orphans += 1;
        instruments.push(DebtInstrument {
            firm_id: firm.id.clone(),
            component_id: format!("{}-C9999", firm.id),
            report_year: firm.start - 1,
            debt_type: DebtType::BL,
            face_value: 1.0,
            maturity_quarters: 4,
        });
    }

    if cfg.extra_rows {
        for firm in firms.iter().filter(|f| f.start == cfg.start_year).take(20) {
            let mut r = FirmYear::empty(firm.id.clone(), cfg.start_year - 1, firm.naics2, firm.first_listed);
            r.at = Some(100.0);
            r.emp = Some(1.0);
            rows.push(r);
        }
        for j in 0..3 {
            let mut r = FirmYear::empty("X00000", cfg.start_year + j, 52, cfg.start_year - 20);
            r.at = Some(100.0);
            r.sale = Some(50.0);
            rows.push(r);
        }
    }

    let realized_phi = pearson(&exit_vec, &miss_vec);
    let mut truth: Vec<(String, f64)> = vec![
        ("seed".into(), cfg.seed as f64),
        ("n_firms".into(), cfg.n_firms as f64),
        ("n_years".into(), cfg.n_years as f64),
        ("noise".into(), cfg.noise),
        ("zombie_rate.target".into(), cfg.zombie_rate),
    ];
    for (e, b) in [("EQ4.m1", tfp_b), ("EQ5.m1", cap_b), ("EQ6.m1", emp_b)] {
        let entry = materialize(e)?;
        let Executable::FeOls(spec) = &entry.spec else {
            unreachable!("generating entries are fixed-effects models")
        };
        for (term, v) in spec.regressors.iter().zip(b) {
            truth.push((format!("{e}:{term}"), v * spec.scale));
        }
    }
    let names = ["broad", "narrow_x", "nar"];
    for (d, name) in names.iter().enumerate() {
        let (mut yes, mut det) = (0usize, 0usize);
        for v in &z {
            for s in v {
                if let Some(b) = s[d] {
                    det += 1;
                    yes += b as usize;
                }
            }
        }
        truth.push((format!("prevalence.{name}"), yes as f64 / det.max(1) as f64));
    }
    if let Some(p) = realized_phi {
        truth.push(("phi.exit_missing.tobins_q".into(), p));
    }
    truth.push(("instruments.contracts".into(), contracts.len() as f64));
    truth.push((
        "instruments.rejected_face_value".into(),
        contracts.iter().filter(|c| !c.accepted).count() as f64,
    ));
    truth.push(("instruments.no_matching_financials".into(), orphans as f64));

    Ok(SynthData {
        firm_years: rows,
        instruments,
        deflators,
        labor_costs: labor,
        truth,
    })
}

fn open(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn write_truth<W: Write>(writer: W, truth: &[(String, f64)]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["parameter", "value"])?;
    for (p, v) in truth {
        csv.write_record([p.clone(), v.to_string()])?;
    }
    csv.flush().map_err(|e| Error::io("<truth writer>", e))
}

/// Writes the five generator files into `dir`.
pub fn write_synth(dir: &Path, data: &SynthData) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths: Vec<PathBuf> = [
        FIRM_YEARS_FILE,
        INSTRUMENTS_FILE,
        DEFLATORS_FILE,
        LABOR_COSTS_FILE,
        TRUTH_FILE,
    ]
    .iter()
    .map(|f| dir.join(f))
    .collect();
    write_firm_years(open(&paths[0])?, &data.firm_years)?;
    write_instruments(open(&paths[1])?, &data.instruments)?;
    data.deflators.write_csv(open(&paths[2])?)?;
    data.labor_costs.write_csv(open(&paths[3])?)?;
    write_truth(open(&paths[4])?, &data.truth)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> DgpConfig {
        DgpConfig {
            n_firms: 300,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let a = generate(&small(3)).unwrap();
        let b = generate(&small(3)).unwrap();
        let pa = write_synth(&dir.path().join("a"), &a).unwrap();
        let pb = write_synth(&dir.path().join("b"), &b).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
        let c = generate(&small(4)).unwrap();
        assert_ne!(a.firm_years, c.firm_years);
    }

    #[test]
    fn prevalence_near_target_and_nested() {
        for rate in [0.0, 0.05, 0.12] {
            let cfg = DgpConfig {
                zombie_rate: rate,
                ..small(5)
            };
            let d = generate(&cfg).unwrap();
            let nar = d.truth("prevalence.nar").unwrap();
            assert!((nar - rate).abs() <= 0.02, "{rate} -> {nar}");
            assert!(d.truth("prevalence.narrow_x").unwrap() <= nar);
            assert!(nar <= d.truth("prevalence.broad").unwrap());
        }
    }

    #[test]
    fn impossible_rate_is_infeasible() {
        let cfg = DgpConfig {
            zombie_rate: 1.0,
            ..small(6)
        };
        assert!(matches!(generate(&cfg), Err(Error::Infeasible(_))));
    }

    #[test]
    fn bad_rate_rejected() {
        let cfg = DgpConfig {
            zombie_rate: 1.5,
            ..small(6)
        };
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn truth_lists_planted_terms() {
        let d = generate(&small(7)).unwrap();
        assert_eq!(d.truth("EQ4.m1:L1.nz*L1.sm*L1.bn_z"), Some(-0.5));
        assert_eq!(d.truth("EQ6.m1:L1.nz*L1.sm*dlog_bc_z"), Some(-0.2));
    }

    #[test]
    fn base_year_deflator_is_one() {
        let d = generate(&small(8)).unwrap();
        for &s in &INDUSTRIES {
            assert_eq!(d.deflators.get(s, 2002), Some(1.0));
        }
    }
}
