#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use zombie_lending::pipeline::{run, InputPaths, RunConfig, TABLES_DIR};
use zombie_lending::synth::{generate, write_synth, DgpConfig, SynthData};

pub fn run_config(root: &Path, dgp: &DgpConfig) -> RunConfig {
    let input_dir = root.join("data");
    RunConfig {
        inputs: InputPaths::in_dir(&input_dir),
        input_dir,
        output_dir: root.join("out"),
        synth: dgp.clone(),
        ..RunConfig::default()
    }
}

/// Generates `dgp` under `root/data` and runs the full pipeline into `root/out`.
pub fn synth_and_run(root: &Path, dgp: &DgpConfig) -> (SynthData, RunConfig) {
    let cfg = run_config(root, dgp);
    let data = generate(dgp).unwrap();
    write_synth(&cfg.input_dir, &data).unwrap();
    run(&cfg).unwrap();
    (data, cfg)
}

pub fn result_path(cfg: &RunConfig, id: &str) -> PathBuf {
    cfg.output_dir
        .join(TABLES_DIR)
        .join("results")
        .join(format!("{id}.csv"))
}

/// Coefficient and standard error per regressor of one persisted result.
pub fn coefficients(cfg: &RunConfig, id: &str) -> BTreeMap<String, (f64, f64)> {
    let mut rdr = csv::Reader::from_path(result_path(cfg, id)).unwrap();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            (
                r[0].to_string(),
                (r[1].parse().unwrap(), r[2].parse().unwrap_or(f64::NAN)),
            )
        })
        .collect()
}

/// Planted values for one specification, keyed by regressor.
pub fn planted(data: &SynthData, id: &str) -> BTreeMap<String, f64> {
    let prefix = format!("{id}:");
    data.truth
        .iter()
        .filter_map(|(k, v)| k.strip_prefix(&prefix).map(|t| (t.to_string(), *v)))
        .collect()
}

pub fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}
