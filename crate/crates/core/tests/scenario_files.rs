use std::path::Path;

use mfcache_core::scenario::{load_scenario, ScenarioConfig};

fn scenarios_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn every_shipped_scenario_loads() {
    let mut seen = 0;
    for entry in std::fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}

#[test]
fn default_file_spells_out_the_defaults() {
    let mut cfg = load_scenario(&scenarios_dir().join("default.toml")).unwrap();
    cfg.output.directory = ScenarioConfig::default().output.directory;
    assert_eq!(cfg, ScenarioConfig::default());
}
