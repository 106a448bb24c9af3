//! Every acceptance criterion at its pinned tolerance. One line per criterion.
//!
//! Criteria 4 and 5 are recorded deviations (see notes/decisions.md): they are
//! measured and reported but not required to pass.

use std::collections::BTreeMap;

use petlab_cli::verify::{criteria, evaluate, Bound, ExpectedFile, EMBEDDED_EXPECTED};

const DOCUMENTED_DEVIATIONS: [u32; 2] = [4, 5];

fn pinned() -> BTreeMap<String, Bound> {
    let table: &[(&str, Bound)] = &[
        ("1.kdv_residual", Bound::at_most(1e-9)),
        ("1.bo_residual", Bound::at_most(1e-9)),
        ("2.converged", Bound::at_least(1.0)),
        ("2.error", Bound::at_most(1e-9)),
        ("3.two_cycle", Bound::at_least(1.0)),
        ("3.m_limit", Bound::near(-4.3737, 0.01)),
        ("3.residual", Bound::at_least(0.01)),
        ("4.converged", Bound::at_least(1.0)),
        ("4.iteration_ratio", Bound::at_least(5.0)),
        ("5.two_cycle", Bound::at_least(1.0)),
        ("5.m_limit", Bound::near(-5.1447, 0.01)),
        ("6.not_converged", Bound::at_least(1.0)),
        ("6.drift_with_positive_eps", Bound::at_least(1.0)),
        ("6.drift_with_negative_eps", Bound::at_least(1.0)),
        ("7.converged_fraction", Bound::at_least(1.0)),
        ("7.max_residual", Bound::at_most(1e-10)),
        ("7.kdv_c3_error", Bound::at_most(1e-8)),
        ("7.bo_c16_error", Bound::at_most(1e-8)),
        ("8.max_deviation", Bound::at_most(0.02)),
        ("8.lambda2_excess", Bound::at_most(1.0)),
        ("9.c_star", Bound::near(1.2, 0.05)),
        ("9.c_2star", Bound::near(2.3, 0.05)),
        ("9.c_3star", Bound::near(2.7, 0.05)),
        ("9.max_complex_margin", Bound::at_most(0.999999)),
        ("10.min_multiplicity", Bound::at_least(2.0)),
        ("11.mismatches", Bound::at_most(0.0)),
        ("12.homogeneity", Bound::at_most(1e-12)),
        ("12.fixed_point", Bound::at_most(1e-10)),
        ("12.round_trip", Bound::at_most(1e-12)),
        ("12.h_derivative", Bound::at_most(1e-8)),
        ("12.h_hermitian", Bound::at_most(1e-12)),
        ("12.h_count_mismatches", Bound::at_most(0.0)),
        ("12.shifted_outside_unit_interval", Bound::at_most(0.0)),
        ("12.psi_min", Bound::at_least(1e-12)),
        ("12.green_min", Bound::at_least(1e-12)),
        ("12.green_bound_excess", Bound::at_most(0.0)),
        ("12.stokes_slope_deviation", Bound::at_most(0.3)),
        ("12.c2_sign_change", Bound::at_least(1.0)),
        ("12.lambda2_negative_fraction", Bound::at_least(1.0)),
        ("12.bo_integral_error", Bound::at_most(1e-8)),
    ];
    table.iter().map(|(k, b)| (k.to_string(), *b)).collect()
}

fn main() {
    let shipped = ExpectedFile::parse(EMBEDDED_EXPECTED).expect("embedded expected.json parses");
    assert_eq!(shipped.checks, pinned(), "expected.json drifted from the pinned tolerances");

    let bounds = pinned();
    let mut unexpected = Vec::new();
    for criterion in criteria() {
        let outcome = evaluate(&criterion, &bounds);
        let deviation = DOCUMENTED_DEVIATIONS.contains(&criterion.id);
        let status = match (outcome.passed(), deviation) {
            (true, _) => "PASS",
            (false, true) => "FAIL (documented deviation, see ledger)",
            (false, false) => "FAIL",
        };
        println!("criterion {:>2} {status}: {}", criterion.id, outcome.summary());
        if !outcome.passed() && !deviation {
            unexpected.push(criterion.id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("criteria failed: {unexpected:?}");
        std::process::exit(1);
    }
}
