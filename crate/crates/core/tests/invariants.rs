//! Cross-module invariants checked over random inputs.

mod support;

use support::invariants::{self, Outcome};

fn check(what: &str, o: Outcome) {
    match o {
        Ok(d) => println!("{what}: {d}"),
        Err(e) => panic!("{what}: {e}"),
    }
}

#[test]
fn records_have_unit_energy() {
    check("unit energy", invariants::unit_energy());
}

#[test]
fn softmax_rows_are_distributions() {
    check("softmax", invariants::softmax_normalization());
}

#[test]
fn splits_are_disjoint_and_stratified() {
    check("splits", invariants::split_disjointness());
}

#[test]
fn confusion_rows_sum_to_class_counts() {
    check("confusion", invariants::confusion_row_sums());
}

#[test]
fn offsets_stay_clamped() {
    check("clamps", invariants::cfo_sro_clamps());
}

#[test]
fn rician_k_is_reproduced() {
    check("rician", invariants::rician_k_within_ten_percent());
}
