//! Runs every stage on synthetic inputs and lists the artifacts.

use zombie_lending::pipeline::{run, run_synth, InputPaths, RunConfig};
use zombie_lending::synth::DgpConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::temp_dir().join("zombie_pipeline_example");
    let input_dir = root.join("data");
    let cfg = RunConfig {
        inputs: InputPaths::in_dir(&input_dir),
        input_dir,
        output_dir: root.join("out"),
        synth: DgpConfig {
            n_firms: 1500,
            ..DgpConfig::default()
        },
        ..RunConfig::default()
    };
    run_synth(&cfg)?;
    for log in run(&cfg)? {
        let entries: Vec<String> = log.entries.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("[{}] {} ({} ms)", log.stage, entries.join(" "), log.elapsed_ms);
        for p in &log.artifacts {
            println!("    {}", p.display());
        }
    }
    println!("{}", std::fs::read_to_string(cfg.output_dir.join("report.txt"))?);
    Ok(())
}
