//! Acceptance suite: every check at full trial count and its stated tolerance.
//! Each test prints one PASS/FAIL line followed by its measurements.

use dndm::verify::{run_check, VerifyConfig};

fn criterion(id: usize) {
    let result = run_check(id, &VerifyConfig::default()).expect("known check id");
    println!(
        "criterion {id:>2} {}: {} ({} ms)",
        if result.passed { "PASS" } else { "FAIL" },
        result.name,
        result.elapsed_ms
    );
    for m in &result.measurements {
        println!(
            "    {:<56} {:>14.6e}  limit {:>12.6e}  {}",
            m.name,
            m.value,
            m.limit,
            if m.passed { "ok" } else { "FAIL" }
        );
    }
    if let Some(e) = &result.error {
        println!("    error: {e}");
    }
    assert!(result.passed, "criterion {id} failed");
}

#[test]
fn criterion_01_forward_marginals() {
    criterion(1);
}

#[test]
fn criterion_02_transition_time_histograms() {
    criterion(2);
}

#[test]
fn criterion_03_expected_nfe_formula() {
    criterion(3);
}

#[test]
fn criterion_04_transition_set_bounds() {
    criterion(4);
}

#[test]
fn criterion_05_copy_steps_are_free() {
    criterion(5);
}

#[test]
fn criterion_06_continuous_sampler_exactness() {
    criterion(6);
}

#[test]
fn criterion_07_single_token_samplers() {
    criterion(7);
}

#[test]
fn criterion_08_posterior_brute_force() {
    criterion(8);
}

#[test]
fn criterion_09_multinomial_kernel() {
    criterion(9);
}

#[test]
fn criterion_10_nfe_reduction() {
    criterion(10);
}

#[test]
fn criterion_11_sample_determinism() {
    criterion(11);
}
