use mixtrade_core::selftest;

fn assert_passes(c: selftest::Check) {
    println!("{c}");
    assert!(c.passed, "{c}");
}

#[test]
fn metric_formulas() {
    assert_passes(selftest::metric_formulas(11, 100));
}

#[test]
fn alpha_equivalence() {
    assert_passes(selftest::alpha_equivalence(11, 300));
}

#[test]
fn ranking_suite() {
    assert_passes(selftest::ranking_suite(11, 200));
}

#[test]
fn reprogram_invariants() {
    assert_passes(selftest::reprogram_invariants(11, 20));
}

#[test]
fn prompt_goldens() {
    assert_passes(selftest::prompt_goldens());
}
