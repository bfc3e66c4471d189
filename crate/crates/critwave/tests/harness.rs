//! Driver-level checks against the bundled configurations.

use std::path::Path;

use critwave::config::RunConfig;
use critwave::report::perform_run;
use critwave::suites::run_suite;

fn bundled(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    let text = std::fs::read_to_string(&path).unwrap();
    RunConfig::parse(&text).unwrap()
}

#[test]
fn bundled_configs_parse_and_round_trip() {
    for name in ["standard.cfg", "small-data.cfg", "scatter.cfg"] {
        let cfg = bundled(name);
        let back = RunConfig::parse(&cfg.to_string()).unwrap();
        assert_eq!(cfg, back, "{name} round trip");
    }
}

#[test]
fn small_data_config_run_is_finite_and_its_suite_passes() {
    let cfg = bundled("small-data.cfg");
    let out = perform_run(&cfg).unwrap();
    // data norm sits at the advertised scale
    let eps = (2.0 * out.summary.initial_energy.gradient
        + out.summary.initial_energy.kinetic)
        .sqrt();
    assert!((eps - 1e-2).abs() < 2e-3, "epsilon = {eps}");
    assert!(out.summary.monitor_final.is_finite());
    assert!(out.summary.ledger_total.is_finite());
    // relative drift is O(dt^2); at cfl 0.5 and dr 1/128 it sits near 5e-4
    assert!(out.summary.energy_drift < 2e-3);

    assert_eq!(cfg.verify, ["small-data"]);
    let suite = run_suite(&cfg.verify[0]).unwrap();
    assert!(suite.pass, "{:?}", suite.checks);
}
