//! Acceptance gate: each headline criterion runs its verification suite and
//! prints one pass/fail line with every measured value next to its pinned
//! tolerance. A failing check fails the test; nothing is rounded off or
//! hidden behind a boolean.

use critwave::suites::run_suite;

fn criterion(number: usize, suite: &str) {
    let result = run_suite(suite).expect("suite execution failed");
    println!(
        "criterion {number} ({suite}): {}",
        if result.pass { "PASS" } else { "FAIL" }
    );
    for c in &result.checks {
        println!(
            "  [{}] {}: {:.6e} {} {:.6e}",
            if c.pass { "ok" } else { "FAIL" },
            c.label,
            c.measured,
            c.op,
            c.threshold
        );
    }
    assert!(result.pass, "criterion {number} ({suite}) failed");
}

#[test]
fn criterion_1_linear_oracle() {
    criterion(1, "linear-oracle");
}

#[test]
fn criterion_2_energy() {
    criterion(2, "energy");
}

#[test]
fn criterion_3_nonlin_inequalities() {
    criterion(3, "nonlin-inequalities");
}

#[test]
fn criterion_4_conformal_identities() {
    criterion(4, "conformal-identities");
}

#[test]
fn criterion_5_cone_ledger() {
    criterion(5, "cone-ledger");
}

#[test]
fn criterion_6_decay_exponents() {
    criterion(6, "decay-exponents");
}

#[test]
fn criterion_7_scattering() {
    criterion(7, "scattering");
}

#[test]
fn criterion_8_small_data() {
    criterion(8, "small-data");
}

#[test]
fn criterion_9_sign_obstruction() {
    criterion(9, "sign-obstruction");
}
