//! Stage driver: ingest → derive → tfp → classify → aggregate → estimate →
//! report, each persisting flat CSV artifacts in the output directory.
//!
//! A stage reads only its inputs and upstream artifacts, so any contiguous
//! run of stages can be repeated once its upstream artifacts exist.

mod config;
mod figures;

use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::aggregator::{
    aggregate, read_industry_year, sample_totals, write_debt_counts, write_industry_year, zombie_credit_cells,
    AggregatorConfig,
};
use crate::classifier::{classify, exit_and_missingness, read_classified, write_classified, write_missingness};
use crate::error::{Error, Result};
use crate::metrics::{derive, read_derived, write_derived, LaborCostTable};
use crate::panel_store::{
    accept_by_face_value, dedup_new_contracts, deflate, deflate_instruments, ingest_firm_years, read_instruments,
    write_firm_years, write_instruments, DeflatorTable, FirmField, Panel, RejectReason,
};
use crate::specs::{run_catalog, write_tables, Bundle, Catalog, MANIFEST_FILE};
use crate::synth::{generate, write_synth};
use crate::tfp::{estimate_tfp, read_tfp, write_tfp, write_tfp_estimates};

pub use config::{Ini, InputPaths, RunConfig};
pub use figures::{
    prevalence_by_year, write_fig1, write_fig2, write_fig3, FIG1_FILE, FIG1_HEADER, FIG2_FILE, FIG2_HEADER, FIG3_FILE,
    FIG3_HEADER,
};

pub const PANEL_FILE: &str = "panel.csv";
pub const ACCEPTED_FILE: &str = "instruments_accepted.csv";
pub const ACCEPTANCE_FILE: &str = "acceptance.csv";
pub const DERIVED_FILE: &str = "derived.csv";
pub const TFP_FILE: &str = "tfp.csv";
pub const TFP_ESTIMATES_FILE: &str = "tfp_estimates.csv";
pub const CLASSIFIED_FILE: &str = "classified.csv";
pub const MISSINGNESS_FILE: &str = "missingness.csv";
pub const INDUSTRY_YEAR_FILE: &str = "industry_year.csv";
pub const DEBT_COUNTS_FILE: &str = "debt_counts.csv";
pub const TABLES_DIR: &str = "tables";
pub const FIGURES_DIR: &str = "figures";
pub const REPORT_FILE: &str = "report.txt";
pub const RUN_LOG_FILE: &str = "run_log.txt";

/// Fields checked by the exit-missingness diagnostic.
pub const MISSINGNESS_FIELDS: [FirmField; 4] = [FirmField::TobinsQ, FirmField::Ebitda, FirmField::Xint, FirmField::Emp];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Derive,
    Tfp,
    Classify,
    Aggregate,
    Estimate,
    Report,
}

impl Stage {
    pub const CHAIN: [Stage; 7] = [
        Stage::Ingest,
        Stage::Derive,
        Stage::Tfp,
        Stage::Classify,
        Stage::Aggregate,
        Stage::Estimate,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Derive => "derive",
            Stage::Tfp => "tfp",
            Stage::Classify => "classify",
            Stage::Aggregate => "aggregate",
            Stage::Estimate => "estimate",
            Stage::Report => "report",
        }
    }

    /// Comma-separated stages that must be contiguous and in chain order.
    pub fn parse_list(s: &str) -> Result<Vec<Stage>> {
        let stages: Vec<Stage> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if stages.is_empty() {
            return Err(Error::Config("empty stage list".into()));
        }
        if stages.windows(2).any(|w| w[1] as usize != w[0] as usize + 1) {
            return Err(Error::Config(format!(
                "stages `{s}` are not a contiguous run of {}",
                Stage::CHAIN.map(Stage::as_str).join(" -> ")
            )));
        }
        Ok(stages)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::CHAIN
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// Process exit status for an error: 1 usage, 2 missing dependency, 3 data.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::UnknownSpec(_) => 1,
        Error::MissingStage { .. } | Error::MissingInput(_) => 2,
        _ => 3,
    }
}

/// Row counts and notes for one executed stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageLog {
    pub stage: String,
    pub entries: Vec<(String, String)>,
    pub artifacts: Vec<PathBuf>,
    pub elapsed_ms: u128,
}

impl StageLog {
    fn new(stage: &str) -> Self {
        StageLog {
            stage: stage.to_string(),
            ..Default::default()
        }
    }

    fn note(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    fn line(&self) -> String {
        let mut s = format!("[{}]", self.stage);
        for (k, v) in &self.entries {
            s.push_str(&format!(" {k}={v}"));
        }
        s.push_str(&format!(" elapsed_ms={}", self.elapsed_ms));
        s
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

fn input(path: &Path) -> Result<&Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::MissingInput(path.to_path_buf()))
    }
}

/// Path of an upstream artifact, or the error naming the stage producing it.
fn artifact(dir: &Path, file: &str, producer: Stage) -> Result<PathBuf> {
    let p = dir.join(file);
    if p.is_file() {
        Ok(p)
    } else {
        Err(Error::MissingStage {
            stage: producer.to_string(),
            artifact: file.to_string(),
        })
    }
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn load_panel(cfg: &RunConfig) -> Result<Panel> {
    let p = artifact(&cfg.output_dir, PANEL_FILE, Stage::Ingest)?;
    Ok(ingest_firm_years(&p, cfg.window)?.0)
}

fn load_accepted(cfg: &RunConfig) -> Result<Vec<crate::panel_store::DebtInstrument>> {
    read_instruments(artifact(&cfg.output_dir, ACCEPTED_FILE, Stage::Ingest)?)
}

fn load_derived(cfg: &RunConfig) -> Result<Vec<crate::metrics::DerivedFirmYear>> {
    let p = artifact(&cfg.output_dir, DERIVED_FILE, Stage::Derive)?;
    read_derived(open(&p)?, DERIVED_FILE)
}

fn load_classified(cfg: &RunConfig) -> Result<Vec<crate::classifier::ClassifiedFirmYear>> {
    let p = artifact(&cfg.output_dir, CLASSIFIED_FILE, Stage::Classify)?;
    read_classified(open(&p)?, CLASSIFIED_FILE)
}

fn load_aggregates(cfg: &RunConfig) -> Result<Vec<crate::aggregator::IndustryYearAggregate>> {
    let p = artifact(&cfg.output_dir, INDUSTRY_YEAR_FILE, Stage::Aggregate)?;
    read_industry_year(open(&p)?, INDUSTRY_YEAR_FILE)
}

fn run_ingest(cfg: &RunConfig, log: &mut StageLog) -> Result<()> {
    let (panel, report) = ingest_firm_years(input(&cfg.inputs.firm_years)?, cfg.window)?;
    log.note("rows_in", report.input_rows);
    log.note("rows_kept", report.kept);
    for (reason, n) in &report.dropped {
        log.note(format!("dropped[{reason}]"), n);
    }
    let deflators = DeflatorTable::read_csv(input(&cfg.inputs.deflators)?)?;
    let panel = deflate(&panel, &deflators, &FirmField::currency_fields())?;
    let raw = read_instruments(input(&cfg.inputs.instruments)?)?;
    let real = deflate_instruments(&raw, &panel, &deflators)?;
    let fresh = dedup_new_contracts(&real);
    let (accepted, acceptance) = accept_by_face_value(&fresh, &panel);
    log.note("instruments_in", raw.len());
    log.note("new_contracts", fresh.len());
    log.note("accepted", accepted.len());
    for reason in [RejectReason::FaceValueExceedsDebt, RejectReason::NoMatchingFinancials] {
        log.note(format!("rejected[{reason}]"), acceptance.rejected_for(reason));
    }

    let out = &cfg.output_dir;
    let p = out.join(PANEL_FILE);
    write_firm_years(create(&p)?, panel.rows())?;
    log.artifacts.push(p);
    let p = out.join(ACCEPTED_FILE);
    write_instruments(create(&p)?, &accepted)?;
    log.artifacts.push(p);
    let p = out.join(ACCEPTANCE_FILE);
    acceptance.write_csv(create(&p)?)?;
    log.artifacts.push(p);
    Ok(())
}

fn run_derive(cfg: &RunConfig, log: &mut StageLog) -> Result<()> {
    let panel = load_panel(cfg)?;
    let labor = LaborCostTable::read_csv(input(&cfg.inputs.labor_costs)?)?;
    let derived = derive(&panel, &labor)?;
    log.note("rows", derived.len());
    log.note("q_from_proxy", derived.iter().filter(|d| d.q_from_proxy).count());
    let p = cfg.output_dir.join(DERIVED_FILE);
    write_derived(create(&p)?, &panel, &derived)?;
    log.artifacts.push(p);
    Ok(())
}

fn run_tfp(cfg: &RunConfig, log: &mut StageLog) -> Result<()> {
    let derived = load_derived(cfg)?;
    let result = estimate_tfp(&derived, &cfg.tfp)?;
    log.note("rows", result.rows.len());
    log.note("groups", result.estimates.len());
    for w in &result.warnings {
        log.note("warning", w.replace(' ', "_"));
    }
    let p = cfg.output_dir.join(TFP_FILE);
    write_tfp(create(&p)?, &result)?;
    log.artifacts.push(p);
    let p = cfg.output_dir.join(TFP_ESTIMATES_FILE);
    write_tfp_estimates(create(&p)?, &result)?;
    log.artifacts.push(p);
    Ok(())
}

fn run_classify(cfg: &RunConfig, log: &mut StageLog) -> Result<()> {
    let panel = load_panel(cfg)?;
    let derived = load_derived(cfg)?;
    let accepted = load_accepted(cfg)?;
    let classified = classify(&panel, &derived, &accepted)?;
    log.note("rows", classified.len());
    for d in crate::classifier::ZombieDefinition::ALL {
        let det = classified.iter().filter_map(|c| c.zombie(d)).count();
        let yes = classified.iter().filter(|c| c.zombie(d) == Some(true)).count();
        log.note(format!("{d}_zombies"), format!("{yes}/{det}"));
    }
    let p = cfg.output_dir.join(CLASSIFIED_FILE);
    write_classified(create(&p)?, &classified)?;
    log.artifacts.push(p);
    let diags: Vec<_> = MISSINGNESS_FIELDS
        .iter()
        .map(|f| exit_and_missingness(&panel, *f))
        .collect();
    let p = cfg.output_dir.join(MISSINGNESS_FILE);
    write_missingness(create(&p)?, &diags)?;
    log.artifacts.push(p);
    Ok(())
}

fn aggregator_config(cfg: &RunConfig) -> AggregatorConfig {
    AggregatorConfig {
        definition: cfg.definition,
        weight: cfg.weight,
        timing: cfg.timing,
    }
}

fn run_aggregate(cfg: &RunConfig, log: &mut StageLog) -> Result<()> {
    let classified = load_classified(cfg)?;
    let accepted = load_accepted(cfg)?;
    let rows = aggregate(&classified, &accepted, &aggregator_config(cfg));
    log.note("rows", rows.len());
    log.note("definition", cfg.definition);
    log.note("weight", cfg.weight);
    let p = cfg.output_dir.join(INDUSTRY_YEAR_FILE);
    write_industry_year(create(&p)?, &rows)?;
    log.artifacts.push(p);
    let cells = zombie_credit_cells(&accepted, &classified, cfg.definition, cfg.weight, cfg.timing);
    let p = cfg.output_dir.join(DEBT_COUNTS_FILE);
    write_debt_counts(create(&p)?, &sample_totals(&cells), cfg.definition, cfg.weight)?;
    log.artifacts.push(p);
    Ok(())
}

/// The embedded catalog or the configured replacement, limited to the
/// configured maturity.
pub fn catalog_for(cfg: &RunConfig) -> Result<Catalog> {
    let mut catalog = match &cfg.catalog {
        Some(p) => Catalog::from_toml(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => Catalog::embedded(),
    };
    if let Some(m) = cfg.maturity {
        catalog.retain(|e| e.maturity == m);
    }
    Ok(catalog)
}

/// Loads every artifact the catalog needs; a missing one names its stage.
/// The nearest upstream stage is checked first.
pub fn load_bundle(cfg: &RunConfig) -> Result<Bundle> {
    let aggregates = load_aggregates(cfg)?;
    let classified = load_classified(cfg)?;
    let tfp_path = artifact(&cfg.output_dir, TFP_FILE, Stage::Tfp)?;
    let tfp = read_tfp(open(&tfp_path)?, TFP_FILE)?;
    let derived = load_derived(cfg)?;
    Ok(Bundle {
        classified: Some(classified),
        derived: Some(derived),
        tfp: Some(tfp),
        aggregates: Some(aggregates),
        definition: cfg.definition,
    })
}

fn run_estimate(cfg: &RunConfig, log: &mut StageLog) -> Result<()> {
    let bundle = load_bundle(cfg)?;
    let catalog = catalog_for(cfg)?;
    let run = run_catalog(&bundle, &catalog)?;
    let failed: Vec<&str> = run
        .outcomes
        .iter()
        .filter(|o| o.result.is_err())
        .map(|o| o.entry.id.as_str())
        .collect();
    log.note("entries", run.outcomes.len());
    log.note("failed", failed.len());
    if !failed.is_empty() {
        log.note("failed_ids", failed.join(","));
    }
    let written = write_tables(&cfg.output_dir.join(TABLES_DIR), &catalog, &run)?;
    log.artifacts.extend(written);
    Ok(())
}

/// Writes the three figure-data files into `<output>/figures`.
pub fn emit_figures(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let classified = load_classified(cfg)?;
    artifact(&cfg.output_dir, INDUSTRY_YEAR_FILE, Stage::Aggregate)?;
    let accepted = load_accepted(cfg)?;
    let dir = cfg.output_dir.join(FIGURES_DIR);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let paths = [FIG1_FILE, FIG2_FILE, FIG3_FILE].map(|f| dir.join(f));
    write_fig1(create(&paths[0])?, &classified)?;
    write_fig2(
        create(&paths[1])?,
        &classified,
        &accepted,
        cfg.definition,
        cfg.weight,
        cfg.timing,
    )?;
    write_fig3(create(&paths[2])?, &classified, cfg.definition)?;
    Ok(paths.to_vec())
}

fn run_report(cfg: &RunConfig, log: &mut StageLog) -> Result<()> {
    let manifest = artifact(&cfg.output_dir.join(TABLES_DIR), MANIFEST_FILE, Stage::Estimate)?;
    let classified = load_classified(cfg)?;
    let figures = emit_figures(cfg)?;

    let mut out = String::new();
    out.push_str(&format!("firm-years: {}\n", classified.len()));
    out.push_str(&format!("definition: {}\nweight: {}\n\n", cfg.definition, cfg.weight));
    out.push_str("prevalence (zombie firm-years / determined firm-years)\n");
    for d in crate::classifier::ZombieDefinition::ALL {
        let det = classified.iter().filter_map(|c| c.zombie(d)).count();
        let yes = classified.iter().filter(|c| c.zombie(d) == Some(true)).count();
        let share = if det > 0 { yes as f64 / det as f64 } else { f64::NAN };
        out.push_str(&format!("  {:<9} {yes:>7} / {det:<7} {share:.4}\n", d.to_string()));
    }
    let mut rdr = csv::Reader::from_reader(open(&manifest)?);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id), Some(status), Some(n_obs)) = (col("spec_id"), col("status"), col("n_obs")) else {
        return Err(Error::Schema {
            file: MANIFEST_FILE.into(),
            missing: vec!["spec_id".into(), "status".into(), "n_obs".into()],
            unexpected: vec![],
        });
    };
    out.push_str("\nspecifications\n");
    let mut ok = 0;
    let mut total = 0;
    for rec in rdr.records() {
        let rec = rec?;
        total += 1;
        ok += (&rec[status] == "ok") as usize;
        if &rec[status] == "ok" {
            out.push_str(&format!("  {:<10} ok     n_obs={}\n", &rec[id], &rec[n_obs]));
        } else {
            out.push_str(&format!("  {:<10} {}\n", &rec[id], &rec[status]));
        }
    }
    out.push_str(&format!("\n{ok} of {total} specifications estimated\n"));
    let miss = cfg.output_dir.join(MISSINGNESS_FILE);
    if miss.is_file() {
        out.push_str("\nexit-missingness phi\n");
        let mut rdr = csv::Reader::from_reader(open(&miss)?);
        for rec in rdr.records() {
            let rec = rec?;
            out.push_str(&format!("  {:<12} {}\n", &rec[0], &rec[1]));
        }
    }
    let p = cfg.output_dir.join(REPORT_FILE);
    let mut w = create(&p)?;
    w.write_all(out.as_bytes()).map_err(|e| Error::io(&p, e))?;
    w.flush().map_err(|e| Error::io(&p, e))?;
    log.note("specifications_ok", format!("{ok}/{total}"));
    log.artifacts.push(p);
    log.artifacts.extend(figures);
    Ok(())
}

fn append_log(cfg: &RunConfig, lines: &[String]) -> Result<()> {
    let p = cfg.output_dir.join(RUN_LOG_FILE);
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&p)
        .map_err(|e| Error::io(&p, e))?;
    for l in lines {
        writeln!(f, "{l}").map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

/// Runs `stages` in order. Each finished stage is logged to `run_log.txt`
/// even when a later one fails.
pub fn run_stages(cfg: &RunConfig, stages: &[Stage]) -> Result<Vec<StageLog>> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let mut logs = Vec::new();
    append_log(
        cfg,
        &[format!(
            "run stages={}",
            stages.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(",")
        )],
    )?;
    for &stage in stages {
        let mut log = StageLog::new(stage.as_str());
        let t0 = Instant::now();
        let res = match stage {
            Stage::Ingest => run_ingest(cfg, &mut log),
            Stage::Derive => run_derive(cfg, &mut log),
            Stage::Tfp => run_tfp(cfg, &mut log),
            Stage::Classify => run_classify(cfg, &mut log),
            Stage::Aggregate => run_aggregate(cfg, &mut log),
            Stage::Estimate => run_estimate(cfg, &mut log),
            Stage::Report => run_report(cfg, &mut log),
        };
        log.elapsed_ms = t0.elapsed().as_millis();
        if let Err(e) = res {
            append_log(cfg, &[format!("[{stage}] error: {e}")])?;
            return Err(e);
        }
        let names: Vec<String> = log.artifacts.iter().map(|p| file_name(p)).collect();
        log.note("artifacts", names.len());
        append_log(cfg, &[log.line()])?;
        logs.push(log);
    }
    Ok(logs)
}

pub fn run(cfg: &RunConfig) -> Result<Vec<StageLog>> {
    run_stages(cfg, &cfg.stages)
}

/// Generates synthetic inputs into the configured input directory.
pub fn run_synth(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = generate(&cfg.synth)?;
    write_synth(&cfg.input_dir, &data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_lists() {
        assert_eq!(
            Stage::parse_list("ingest,derive").unwrap(),
            vec![Stage::Ingest, Stage::Derive]
        );
        assert_eq!(Stage::parse_list(" estimate ").unwrap(), vec![Stage::Estimate]);
        assert!(Stage::parse_list("ingest,tfp").is_err());
        assert!(Stage::parse_list("derive,ingest").is_err());
        assert!(Stage::parse_list("ingest,ingest").is_err());
        assert!(Stage::parse_list("").is_err());
        assert!(Stage::parse_list("plot").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
        assert_eq!(
            exit_code(&Error::MissingStage {
                stage: "aggregate".into(),
                artifact: "industry_year.csv".into()
            }),
            2
        );
        assert_eq!(exit_code(&Error::NoObservations("x".into())), 3);
    }
}
