mod common;

use std::collections::BTreeSet;

use zombie_lending::panel_store::MaturitySplit;
use zombie_lending::pipeline::{load_bundle, TABLES_DIR};
use zombie_lending::specs::{
    firm_frame, materialize, run_catalog, run_entry, write_tables, Bundle, Catalog, MANIFEST_FILE,
};
use zombie_lending::synth::DgpConfig;

fn bundle(n_firms: usize, seed: u64) -> (tempfile::TempDir, Bundle) {
    let tmp = tempfile::tempdir().unwrap();
    let dgp = DgpConfig {
        n_firms,
        seed,
        ..DgpConfig::default()
    };
    let (_, cfg) = common::synth_and_run(tmp.path(), &dgp);
    let b = load_bundle(&cfg).unwrap();
    (tmp, b)
}

#[test]
fn synthetic_bundle_gives_six_tables_and_manifest() {
    let (tmp, b) = bundle(1000, 11);
    let catalog = Catalog::embedded();
    let run = run_catalog(&b, &catalog).unwrap();
    let dir = tmp.path().join("fresh_tables");
    let written = write_tables(&dir, &catalog, &run).unwrap();
    let names: BTreeSet<String> = written
        .iter()
        .filter(|p| p.parent() == Some(dir.as_path()))
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 7, "{names:?}");
    assert!(names.contains(MANIFEST_FILE));
    assert_eq!(names.iter().filter(|n| n.starts_with("table_")).count(), 6);
    assert!(run.outcomes.iter().all(|o| o.result.is_ok()));
    assert!(tmp.path().join("out").join(TABLES_DIR).join(MANIFEST_FILE).is_file());
}

#[test]
fn bundle_without_tfp_names_the_stage() {
    let (_tmp, mut b) = bundle(300, 12);
    b.tfp = None;
    let err = run_catalog(&b, &Catalog::embedded()).unwrap_err();
    assert!(err.to_string().contains("tfp stage required"), "{err}");
}

#[test]
fn planted_bank_channel_sign_survives_dependence_split() {
    let (_tmp, b) = bundle(3000, 13);
    let entry = materialize("EQ4.m3").unwrap();
    let frame = firm_frame(&b, MaturitySplit::Short).unwrap();
    let r = run_entry(&entry, &frame).unwrap();
    let bc = r.estimate("L1.nz*L1.sm*bank_dep*no_bond*L1.bc_z").unwrap();
    let se = r.se("L1.nz*L1.sm*bank_dep*no_bond*L1.bc_z").unwrap();
    assert!(bc < 0.0 && bc / se < -2.0, "bank-channel estimate {bc} (se {se})");
}

/// Replacing every dummy set by one reduces the dummied models to the plain ones.
#[test]
fn dummy_models_collapse_to_plain_models() {
    let (_tmp, b) = bundle(1000, 14);
    let pairs = [
        ("EQ4.m1", "EQ1.short"),
        ("EQ4.m2", "EQ1.short"),
        ("EQ4.m3", "EQ1.short"),
        ("EQ4.m4", "EQ1.long"),
        ("EQ5.m1", "EQ2.short"),
        ("EQ5.m3", "EQ2.short"),
        ("EQ5.m4", "EQ2.long"),
        ("EQ6.m1", "EQ3.short"),
        ("EQ6.m2", "EQ3.short"),
    ];
    for (dummied, plain) in pairs {
        let d = materialize(dummied).unwrap();
        let p = materialize(plain).unwrap();
        assert_eq!(d.maturity, p.maturity);
        let mut frame = firm_frame(&b, d.maturity.split()).unwrap();
        for col in ["sm", "bank_dep", "capm_dep", "no_bond", "has_instrument"] {
            frame.insert(col, vec![Some(1.0); frame.len()]).unwrap();
        }
        let rd = run_entry(&d, &frame).unwrap();
        let rp = run_entry(&p, &frame).unwrap();
        assert_eq!(rd.n_obs, rp.n_obs, "{dummied}");
        let kept = |r: &zombie_lending::econometrics::RegressionResult| -> Vec<f64> {
            r.coefficients.iter().filter_map(|c| c.estimate).collect()
        };
        let (a, b) = (kept(&rd), kept(&rp));
        assert_eq!(a.len(), b.len(), "{dummied} vs {plain}: {:?}", rd.dropped_regressors);
        for (x, y) in a.iter().zip(&b) {
            assert!(
                (x - y).abs() <= 1e-8 * (1.0 + y.abs()),
                "{dummied} vs {plain}: {x} vs {y}"
            );
        }
    }
}
