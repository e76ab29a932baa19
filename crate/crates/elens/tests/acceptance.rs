//! Acceptance battery: one test per criterion, each printing its
//! pass/fail line. Run with `cargo test -p elens --test acceptance`
//! (add `-- --nocapture` to see the lines for passing checks too).

use elens::verify::{self, CheckReport, DEFAULT_SEED};

fn assert_criterion(report: CheckReport) {
    println!("{}", report.summary_line());
    assert!(
        report.passed,
        "criterion failed: {}",
        report.summary_line()
    );
}

#[test]
fn criterion_01_exact_sampler_tv() {
    assert_criterion(verify::exact_sampler_tv(DEFAULT_SEED));
}

#[test]
fn criterion_02_cauchy_binet() {
    assert_criterion(verify::cauchy_binet(DEFAULT_SEED));
}

#[test]
fn criterion_03_normalization() {
    assert_criterion(verify::normalization(DEFAULT_SEED));
}

#[test]
fn criterion_04_marginal_kernel() {
    assert_criterion(verify::marginal_kernel_inclusions(DEFAULT_SEED));
}

#[test]
fn criterion_05_kernel_roundtrip() {
    assert_criterion(verify::kernel_roundtrip(DEFAULT_SEED));
}

#[test]
fn criterion_06_complement() {
    assert_criterion(verify::complement(DEFAULT_SEED));
}

#[test]
fn criterion_07_size_law() {
    assert_criterion(verify::size_law(DEFAULT_SEED));
}

#[test]
fn criterion_08_gibbs_stationarity() {
    assert_criterion(verify::gibbs_stationarity(DEFAULT_SEED));
}

#[test]
fn criterion_09_low_rank_path() {
    assert_criterion(verify::low_rank_path(DEFAULT_SEED));
}

#[test]
fn criterion_10_perturbative_limits() {
    assert_criterion(verify::perturbative_limits(DEFAULT_SEED));
}

#[test]
fn criterion_11_forest_roots() {
    assert_criterion(verify::forest_roots(DEFAULT_SEED));
}

#[test]
fn criterion_12_cpd_experiment() {
    assert_criterion(verify::cpd_experiment(DEFAULT_SEED));
}

#[test]
fn criterion_13_invariance() {
    assert_criterion(verify::invariance(DEFAULT_SEED));
}

#[test]
fn criterion_14_interpolation() {
    assert_criterion(verify::interpolation(DEFAULT_SEED));
}
