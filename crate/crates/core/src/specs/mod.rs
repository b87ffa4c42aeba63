//! Declarative regression catalog and its execution against pipeline artifacts.
//!
//! The catalog is a TOML document; the built-in one is embedded at compile
//! time and can be replaced with [`Catalog::from_toml`].

mod frames;
mod run;

use std::collections::BTreeMap;
use std::fmt;

use serde::Deserialize;

use crate::econometrics::{AbSpec, ClusterLevel, Filter, FixedEffect, RegressionSpec, Term};
use crate::error::{Error, Result};
use crate::panel_store::MaturitySplit;

pub use frames::{firm_frame, industry_frame, Bundle};
pub use run::{run_catalog, run_entry, write_tables, CatalogRun, Outcome, MANIFEST_FILE, TABLE_HEADER};

pub const EMBEDDED_CATALOG: &str = include_str!("catalog.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    #[default]
    Firm,
    Industry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    #[default]
    FeOls,
    ArellanoBond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Maturity {
    Short,
    Long,
}

impl Maturity {
    pub fn split(self) -> MaturitySplit {
        match self {
            Maturity::Short => MaturitySplit::Short,
            Maturity::Long => MaturitySplit::Long,
        }
    }
}

impl fmt::Display for Maturity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.split().label())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariantDoc {
    id: String,
    maturity: Maturity,
    shape: Option<String>,
    dependent: Option<String>,
    filters: Option<Vec<Filter>>,
}

fn default_fe() -> Vec<FixedEffect> {
    vec![FixedEffect::Firm, FixedEffect::IndustryYear]
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupDoc {
    id: String,
    table: String,
    #[serde(default)]
    method: MethodKind,
    #[serde(default)]
    level: Level,
    dependent: Option<String>,
    shape: Option<String>,
    #[serde(default)]
    placeholders: BTreeMap<String, String>,
    #[serde(default)]
    controls: Vec<Term>,
    #[serde(default = "default_fe")]
    fixed_effects: Vec<FixedEffect>,
    #[serde(default)]
    cluster: ClusterLevel,
    #[serde(default)]
    filters: Vec<Filter>,
    #[serde(default = "one")]
    scale: f64,
    variants: Vec<VariantDoc>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogDoc {
    shapes: BTreeMap<String, Vec<String>>,
    group: Vec<GroupDoc>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Executable {
    FeOls(RegressionSpec),
    ArellanoBond(AbSpec),
}

impl Executable {
    pub fn dependent(&self) -> String {
        match self {
            Executable::FeOls(s) => s.dependent.to_string(),
            Executable::ArellanoBond(s) => s.dependent.clone(),
        }
    }

    pub fn filters(&self) -> &[Filter] {
        match self {
            Executable::FeOls(s) => &s.filters,
            Executable::ArellanoBond(_) => &[],
        }
    }
}

/// A fully bound specification.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub id: String,
    pub group: String,
    pub table: String,
    pub maturity: Maturity,
    pub level: Level,
    pub spec: Executable,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    entries: Vec<CatalogEntry>,
}

fn fill(template: &str, placeholders: &BTreeMap<String, String>) -> String {
    placeholders
        .iter()
        .fold(template.to_string(), |s, (k, v)| s.replace(&format!("{{{k}}}"), v))
}

impl Catalog {
    pub fn embedded() -> Self {
        Catalog::from_toml(EMBEDDED_CATALOG).expect("embedded catalog is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: CatalogDoc = toml::from_str(text).map_err(|e| Error::Config(format!("catalog: {e}")))?;
        let mut entries = Vec::new();
        for g in &doc.group {
            for v in &g.variants {
                let id = format!("{}.{}", g.id, v.id);
                let shape_name = v
                    .shape
                    .as_ref()
                    .or(g.shape.as_ref())
                    .ok_or_else(|| Error::Config(format!("{id}: no shape")))?;
                let shape = doc
                    .shapes
                    .get(shape_name)
                    .ok_or_else(|| Error::Config(format!("{id}: unknown shape `{shape_name}`")))?;
                let terms: Vec<Term> = shape
                    .iter()
                    .map(|t| {
                        let filled = fill(t, &g.placeholders);
                        if filled.contains('{') {
                            return Err(Error::Config(format!("{id}: unfilled placeholder in `{filled}`")));
                        }
                        filled.parse()
                    })
                    .collect::<Result<_>>()?;
                let dependent = v
                    .dependent
                    .as_ref()
                    .or(g.dependent.as_ref())
                    .ok_or_else(|| Error::Config(format!("{id}: no dependent")))?;
                let filters = v.filters.clone().unwrap_or_else(|| g.filters.clone());
                let spec = match g.method {
                    MethodKind::FeOls => {
                        let mut regressors = terms;
                        regressors.extend(g.controls.iter().cloned());
                        Executable::FeOls(RegressionSpec {
                            id: id.clone(),
                            dependent: dependent.parse()?,
                            regressors,
                            fixed_effects: g.fixed_effects.clone(),
                            cluster: g.cluster,
                            filters,
                            scale: g.scale,
                        })
                    }
                    MethodKind::ArellanoBond => {
                        if !filters.is_empty() || !g.controls.is_empty() {
                            return Err(Error::Config(format!("{id}: GMM entries take no filters or controls")));
                        }
                        let mut s = AbSpec::new(id.clone(), dependent.clone(), terms);
                        s.cluster = g.cluster;
                        s.scale = g.scale;
                        Executable::ArellanoBond(s)
                    }
                };
                entries.push(CatalogEntry {
                    id,
                    group: g.id.clone(),
                    table: g.table.clone(),
                    maturity: v.maturity,
                    level: g.level,
                    spec,
                });
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Config(format!("duplicate catalog id {}", e.id)));
            }
        }
        Ok(Catalog { entries })
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn retain(&mut self, keep: impl FnMut(&CatalogEntry) -> bool) {
        self.entries.retain(keep);
    }

    pub fn materialize(&self, id: &str) -> Result<CatalogEntry> {
        self.entries
            .iter()
            .find(|e| e.id == id)
            .cloned()
            .ok_or_else(|| Error::UnknownSpec(id.to_string()))
    }

    /// Table names in first-appearance order.
    pub fn tables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.table) {
                out.push(e.table.clone());
            }
        }
        out
    }
}

/// Looks up an entry of the embedded catalog.
pub fn materialize(id: &str) -> Result<CatalogEntry> {
    Catalog::embedded().materialize(id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(e: &CatalogEntry) -> Vec<String> {
        match &e.spec {
            Executable::FeOls(s) => s.regressors.iter().map(|t| t.to_string()).collect(),
            Executable::ArellanoBond(s) => s.exogenous.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn eq1_short_binding() {
        let e = materialize("EQ1.short").unwrap();
        let Executable::FeOls(s) = &e.spec else { panic!() };
        assert_eq!(s.dependent.to_string(), "tfp");
        assert_eq!(
            names(&e),
            [
                "L1.nz",
                "L1.nz*L1.bc_z",
                "L1.nz*L1.bn_z",
                "L1.log_at",
                "L1.rd_intensity"
            ]
        );
        assert_eq!(s.cluster, ClusterLevel::Firm);
        assert_eq!(s.fixed_effects, vec![FixedEffect::Firm, FixedEffect::IndustryYear]);
        assert_eq!(e.maturity, Maturity::Short);
    }

    #[test]
    fn eq8_is_gmm_with_dependence_interactions() {
        let e = materialize("EQ8.long").unwrap();
        let Executable::ArellanoBond(s) = &e.spec else { panic!() };
        assert_eq!(s.dependent, "nb_share_borrowers");
        assert!(names(&e).contains(&"L1.bank_dep_sy*L1.bc_z".to_string()));
        assert!(s.year_dummies);
        assert_eq!(s.cluster, ClusterLevel::Industry);
        assert_eq!(e.level, Level::Industry);
    }

    #[test]
    fn eq3_uses_growth_regressors_and_scale() {
        let e = materialize("EQ3.short").unwrap();
        let Executable::FeOls(s) = &e.spec else { panic!() };
        assert_eq!(s.scale, 100.0);
        assert!(names(&e).contains(&"L1.nz*dlog_bc_z".to_string()));
        assert_eq!(s.dependent.to_string(), "emp_growth_sym");
    }

    #[test]
    fn unknown_id() {
        assert!(matches!(materialize("EQ7"), Err(Error::UnknownSpec(_))));
    }

    #[test]
    fn entry_counts() {
        let c = Catalog::embedded();
        let count = |g: &str| c.entries().iter().filter(|e| e.group == g).count();
        assert_eq!(
            [
                count("EQ1"),
                count("EQ2"),
                count("EQ3"),
                count("EQ4"),
                count("EQ5"),
                count("EQ6"),
                count("EQ8"),
                count("EQ9")
            ],
            [2, 2, 2, 6, 6, 3, 2, 4]
        );
        assert_eq!(c.tables().len(), 6);
    }

    /// Coefficient rows of every published results table, by table.
    #[test]
    fn every_table_row_has_a_generating_entry() {
        let rows: [(&str, &[&str]); 6] = [
            (
                "table_performance",
                &[
                    "L1.nz",
                    "L1.nz*L1.bc_z",
                    "L1.nz*L1.bn_z",
                    "L1.nz*dlog_bc_z",
                    "L1.nz*dlog_bn_z",
                ],
            ),
            (
                "table_tfp",
                &[
                    "L1.nz",
                    "L1.nz*L1.sm",
                    "L1.nz*L1.sm*L1.bc_z",
                    "L1.nz*L1.sm*L1.bn_z",
                    "L1.nz*L1.sm*bank_dep",
                    "L1.nz*L1.sm*capm_dep",
                    "L1.nz*L1.sm*bank_dep*L1.bc_z",
                    "L1.nz*L1.sm*capm_dep*L1.bn_z",
                    "L1.nz*L1.sm*bank_dep*no_bond",
                    "L1.nz*L1.sm*bank_dep*no_bond*L1.bc_z",
                ],
            ),
            (
                "table_capital",
                &[
                    "L1.nz*L1.sm*L1.bc_z",
                    "L1.nz*L1.sm*capm_dep*L1.bn_z",
                    "L1.nz*L1.sm*bank_dep*no_bond*L1.bc_z",
                ],
            ),
            (
                "table_employment",
                &[
                    "L1.nz*L1.sm*dlog_bc_z",
                    "L1.nz*L1.sm*dlog_bn_z",
                    "L1.nz*L1.sm*bank_dep*dlog_bc_z",
                    "L1.nz*L1.sm*capm_dep*dlog_bn_z",
                    "L1.nz*L1.sm*bank_dep*no_bond*dlog_bc_z",
                ],
            ),
            (
                "table_newbie_share",
                &[
                    "L1.bc_z",
                    "L1.bn_z",
                    "L1.bank_dep_sy*L1.bc_z",
                    "L1.capm_dep_sy*L1.bn_z",
                    "L1.nb_share_borrowers",
                ],
            ),
            (
                "table_newbie_employment",
                &["L1.nb", "L1.nb*dlog_bc_z", "L1.nb*dlog_bn_z"],
            ),
        ];
        let c = Catalog::embedded();
        for (table, wanted) in rows {
            let have: Vec<String> = c
                .entries()
                .iter()
                .filter(|e| e.table == table)
                .flat_map(|e| {
                    let mut n = names(e);
                    if let Executable::ArellanoBond(s) = &e.spec {
                        n.push(s.lagged_dependent_name());
                    }
                    n
                })
                .collect();
            for w in wanted {
                assert!(have.iter().any(|h| h == w), "{table} lacks {w}");
            }
        }
    }

    #[test]
    fn custom_catalog_parses_and_rejects_bad_shape() {
        let good = r#"
            [shapes]
            s = ["x", "x*{Z}"]
            [[group]]
            id = "A"
            table = "t"
            dependent = "y"
            shape = "s"
            placeholders = { Z = "L1.z" }
            variants = [{ id = "one", maturity = "short" }]
        "#;
        let c = Catalog::from_toml(good).unwrap();
        assert_eq!(c.materialize("A.one").unwrap().id, "A.one");
        let bad = good.replace("{ Z = \"L1.z\" }", "{}");
        assert!(Catalog::from_toml(&bad).is_err());
    }
}
