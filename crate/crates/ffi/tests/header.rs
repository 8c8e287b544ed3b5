use std::path::PathBuf;
use std::process::Command;

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/fakeprior.h")
}

#[test]
fn header_declares_the_abi() {
    let text = std::fs::read_to_string(header()).unwrap();
    for sym in [
        "typedef struct FpDistribution FpDistribution;",
        "FP_STATUS_NON_MONOTONE = 3",
        "fp_last_error(",
        "fp_distribution_closed_form(",
        "fp_profile_new(",
        "fp_mechanism_new(",
        "fp_mechanism_outcome(",
        "fp_revenue_welfare(",
        "fp_scenario_run(",
    ] {
        assert!(text.contains(sym), "missing {sym}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(header())
        .output()
    else {
        eprintln!("no C compiler, skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
