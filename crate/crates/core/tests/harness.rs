use std::path::Path;

use secto_core::scenario::{load_scenario, run, Kind};

#[test]
fn reports_carry_every_effective_tolerance() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = std::collections::BTreeSet::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let sc = load_scenario(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let report = run(&sc).unwrap();
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        for (name, _, _) in sc.kind.tolerance_defaults() {
            assert!(json["tolerances"].get(*name).is_some(), "{path:?} lacks {name}");
        }
        assert!(report.pass, "{path:?}");
        seen.insert(sc.kind.as_str());
    }
    assert_eq!(seen.len(), Kind::ALL.len());
}
