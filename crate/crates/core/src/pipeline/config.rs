//! Run configuration in a line-oriented `key = value` format.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! ```
//!
//! Blank lines and lines starting with `#` or `;` are ignored. Values run to
//! the end of the line; surrounding double quotes are stripped. Every key
//! belongs to a section, may appear once, and must be known. Relative paths
//! resolve against the directory of the config file.
//!
//! | section | keys |
//! |---|---|
//! | `input` | `dir`, `firm_years`, `instruments`, `deflators`, `labor_costs` |
//! | `sample` | `start_year`, `end_year` |
//! | `output` | `dir` |
//! | `run` | `stages` |
//! | `classify` | `definition` (`broad`, `narrow_x`, `nar`) |
//! | `aggregate` | `weight` (`face`, `count`), `timing` (`report_year`, `prior_year`) |
//! | `tfp` | `poly_degree`, `max_iter`, `tol`, `min_obs_per_industry`, `per_industry` |
//! | `estimate` | `maturity` (`short`, `long`, `both`), `catalog` |
//! | `synth` | every scalar generator field; `missing_phi` accepts `none` |
//! | `synth.tfp`, `synth.capital`, `synth.employment` | `nz`, `nz_sm`, `nz_sm_bc`, `nz_sm_bn` |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::Stage;
use crate::aggregator::{StatusTiming, Weight};
use crate::classifier::ZombieDefinition;
use crate::error::{Error, Result};
use crate::panel_store::YearWindow;
use crate::specs::Maturity;
use crate::synth::{DgpConfig, Planted, DEFLATORS_FILE, FIRM_YEARS_FILE, INSTRUMENTS_FILE, LABOR_COSTS_FILE};
use crate::tfp::TfpConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Value {
    text: String,
    line: usize,
}

/// Parsed sections of a config file, before interpretation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ini {
    sections: BTreeMap<String, BTreeMap<String, Value>>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self> {
        let mut ini = Ini::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .map(str::trim)
                    .filter(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.'))
                    .ok_or_else(|| Error::Config(format!("line {line}: bad section header `{s}`")))?;
                ini.sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line}: expected `key = value`, got `{s}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {line}: empty key")));
            }
            let section = current
                .as_ref()
                .ok_or_else(|| Error::Config(format!("line {line}: `{key}` outside any section")))?;
            let value = value.trim();
            let value = value
                .strip_prefix('"')
                .and_then(|v| v.strip_suffix('"'))
                .unwrap_or(value);
            let slot = ini.sections.get_mut(section).expect("section exists");
            if slot.contains_key(key) {
                return Err(Error::Config(format!("line {line}: duplicate key {section}.{key}")));
            }
            slot.insert(
                key.to_string(),
                Value {
                    text: value.to_string(),
                    line,
                },
            );
        }
        Ok(ini)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|v| v.text.as_str())
    }

    fn take<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>> {
        let Some(v) = self.sections.get_mut(section).and_then(|s| s.remove(key)) else {
            return Ok(None);
        };
        v.text.parse().map(Some).map_err(|_| {
            Error::Config(format!(
                "line {}: invalid value `{}` for {section}.{key}",
                v.line, v.text
            ))
        })
    }

    fn finish(self) -> Result<()> {
        for (section, keys) in &self.sections {
            if let Some((key, v)) = keys.iter().next() {
                return Err(Error::Config(format!("line {}: unknown key {section}.{key}", v.line)));
            }
        }
        Ok(())
    }
}

struct Bool01(bool);

impl FromStr for Bool01 {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "true" | "1" | "yes" => Ok(Bool01(true)),
            "false" | "0" | "no" => Ok(Bool01(false)),
            _ => Err(()),
        }
    }
}

struct OptF64(Option<f64>);

impl FromStr for OptF64 {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        if s == "none" {
            return Ok(OptF64(None));
        }
        s.parse().map(|v| OptF64(Some(v))).map_err(|_| ())
    }
}

struct MaturityChoice(Option<Maturity>);

impl FromStr for MaturityChoice {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "both" => Ok(MaturityChoice(None)),
            "short" => Ok(MaturityChoice(Some(Maturity::Short))),
            "long" => Ok(MaturityChoice(Some(Maturity::Long))),
            _ => Err(()),
        }
    }
}

struct StageList(Vec<Stage>);

impl FromStr for StageList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::parse_list(s).map(StageList)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputPaths {
    pub firm_years: PathBuf,
    pub instruments: PathBuf,
    pub deflators: PathBuf,
    pub labor_costs: PathBuf,
}

impl InputPaths {
    /// The generator's file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        InputPaths {
            firm_years: dir.join(FIRM_YEARS_FILE),
            instruments: dir.join(INSTRUMENTS_FILE),
            deflators: dir.join(DEFLATORS_FILE),
            labor_costs: dir.join(LABOR_COSTS_FILE),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Directory the generator writes into and the default home of the inputs.
    pub input_dir: PathBuf,
    pub inputs: InputPaths,
    pub window: YearWindow,
    pub output_dir: PathBuf,
    pub stages: Vec<Stage>,
    pub definition: ZombieDefinition,
    pub weight: Weight,
    pub timing: StatusTiming,
    pub tfp: TfpConfig,
    /// Restricts estimation to one maturity; `None` runs both.
    pub maturity: Option<Maturity>,
    /// Replacement regression catalog in TOML.
    pub catalog: Option<PathBuf>,
    pub synth: DgpConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let input_dir = PathBuf::from("data");
        RunConfig {
            inputs: InputPaths::in_dir(&input_dir),
            input_dir,
            window: YearWindow::default(),
            output_dir: PathBuf::from("out"),
            stages: Stage::CHAIN.to_vec(),
            definition: ZombieDefinition::default(),
            weight: Weight::default(),
            timing: StatusTiming::default(),
            tfp: TfpConfig::default(),
            maturity: None,
            catalog: None,
            synth: DgpConfig::default(),
        }
    }
}

fn planted(ini: &mut Ini, section: &str, base: Planted) -> Result<Planted> {
    Ok(Planted {
        nz: ini.take(section, "nz")?.unwrap_or(base.nz),
        nz_sm: ini.take(section, "nz_sm")?.unwrap_or(base.nz_sm),
        nz_sm_bc: ini.take(section, "nz_sm_bc")?.unwrap_or(base.nz_sm_bc),
        nz_sm_bn: ini.take(section, "nz_sm_bn")?.unwrap_or(base.nz_sm_bn),
    })
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        RunConfig::parse(&text, base)
    }

    /// Interprets `text`, resolving relative paths against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut ini = Ini::parse(text)?;
        let d = RunConfig::default();
        let path = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };

        let input_dir = path(ini.take("input", "dir")?.unwrap_or(d.input_dir));
        let defaults = InputPaths::in_dir(&input_dir);
        let inputs = InputPaths {
            firm_years: ini
                .take("input", "firm_years")?
                .map(path)
                .unwrap_or(defaults.firm_years),
            instruments: ini
                .take("input", "instruments")?
                .map(path)
                .unwrap_or(defaults.instruments),
            deflators: ini.take("input", "deflators")?.map(path).unwrap_or(defaults.deflators),
            labor_costs: ini
                .take("input", "labor_costs")?
                .map(path)
                .unwrap_or(defaults.labor_costs),
        };
        let window = YearWindow::new(
            ini.take("sample", "start_year")?.unwrap_or(d.window.start),
            ini.take("sample", "end_year")?.unwrap_or(d.window.end),
        )?;
        let output_dir = path(ini.take("output", "dir")?.unwrap_or(d.output_dir));
        let stages = ini.take::<StageList>("run", "stages")?.map_or(d.stages, |s| s.0);
        let definition = ini.take("classify", "definition")?.unwrap_or(d.definition);
        let weight = ini.take("aggregate", "weight")?.unwrap_or(d.weight);
        let timing = ini.take("aggregate", "timing")?.unwrap_or(d.timing);
        let tfp = TfpConfig {
            poly_degree: ini.take("tfp", "poly_degree")?.unwrap_or(d.tfp.poly_degree),
            max_iter: ini.take("tfp", "max_iter")?.unwrap_or(d.tfp.max_iter),
            tol: ini.take("tfp", "tol")?.unwrap_or(d.tfp.tol),
            min_obs_per_industry: ini
                .take("tfp", "min_obs_per_industry")?
                .unwrap_or(d.tfp.min_obs_per_industry),
            per_industry: ini
                .take::<Bool01>("tfp", "per_industry")?
                .map_or(d.tfp.per_industry, |b| b.0),
        };
        tfp.validate()?;
        let maturity = ini
            .take::<MaturityChoice>("estimate", "maturity")?
            .map_or(d.maturity, |m| m.0);
        let catalog = ini.take::<PathBuf>("estimate", "catalog")?.map(path);

        let s = DgpConfig::default();
        let synth = DgpConfig {
            n_firms: ini.take("synth", "n_firms")?.unwrap_or(s.n_firms),
            n_years: ini.take("synth", "n_years")?.unwrap_or(s.n_years),
            start_year: ini.take("synth", "start_year")?.unwrap_or(s.start_year),
            n_industries: ini.take("synth", "n_industries")?.unwrap_or(s.n_industries),
            zombie_rate: ini.take("synth", "zombie_rate")?.unwrap_or(s.zombie_rate),
            broad_only_share: ini.take("synth", "broad_only_share")?.unwrap_or(s.broad_only_share),
            entry_share: ini.take("synth", "entry_share")?.unwrap_or(s.entry_share),
            exit_share: ini.take("synth", "exit_share")?.unwrap_or(s.exit_share),
            borrower_share: ini.take("synth", "borrower_share")?.unwrap_or(s.borrower_share),
            noise: ini.take("synth", "noise")?.unwrap_or(s.noise),
            missing_phi: ini
                .take::<OptF64>("synth", "missing_phi")?
                .map_or(s.missing_phi, |v| v.0),
            extra_rows: ini.take::<Bool01>("synth", "extra_rows")?.map_or(s.extra_rows, |b| b.0),
            tfp: planted(&mut ini, "synth.tfp", s.tfp)?,
            capital: planted(&mut ini, "synth.capital", s.capital)?,
            employment: planted(&mut ini, "synth.employment", s.employment)?,
            seed: ini.take("synth", "seed")?.unwrap_or(s.seed),
        };
        synth.validate()?;
        ini.finish()?;
        Ok(RunConfig {
            input_dir,
            inputs,
            window,
            output_dir,
            stages,
            definition,
            weight,
            timing,
            tfp,
            maturity,
            catalog,
            synth,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_defaults() {
        let text = "# run\n[input]\ndir = data\n\n[sample]\nstart_year = 2005\n[classify]\ndefinition = broad\n[tfp]\nper_industry = false\n[synth]\nmissing_phi = none\n[synth.tfp]\nnz_sm_bn = -0.25\n";
        let c = RunConfig::parse(text, Path::new("/base")).unwrap();
        assert_eq!(c.inputs.firm_years, PathBuf::from("/base/data/firm_years.csv"));
        assert_eq!(c.window, YearWindow { start: 2005, end: 2019 });
        assert_eq!(c.definition, ZombieDefinition::Broad);
        assert!(!c.tfp.per_industry);
        assert_eq!(c.synth.missing_phi, None);
        assert_eq!(c.synth.tfp.nz_sm_bn, -0.25);
        assert_eq!(c.output_dir, PathBuf::from("/base/out"));
        assert_eq!(c.stages, Stage::CHAIN.to_vec());
    }

    #[test]
    fn quoted_values_and_absolute_paths() {
        let c = RunConfig::parse("[output]\ndir = \"/tmp/x y\"\n", Path::new("/base")).unwrap();
        assert_eq!(c.output_dir, PathBuf::from("/tmp/x y"));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        for bad in [
            "[sample]\nstart = 2000\n",
            "key = 1\n",
            "[sample\n",
            "[sample]\nstart_year 2000\n",
            "[sample]\nstart_year = x\n",
            "[sample]\nstart_year = 1\nstart_year = 2\n",
            "[run]\nstages = derive,ingest\n",
            "[aggregate]\nweight = mass\n",
            "[synth]\nzombie_rate = 2\n",
        ] {
            assert!(
                matches!(RunConfig::parse(bad, Path::new("")), Err(Error::Config(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn unknown_key_names_line() {
        let err = RunConfig::parse("[output]\n\ndirr = x\n", Path::new("")).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
