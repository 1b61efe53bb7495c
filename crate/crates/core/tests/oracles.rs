mod common;

use common::*;

#[test]
fn min_l2_matches_dual_system() {
    let (res, diff) = min_l2_oracle_errors(100, 4, 8, 101);
    assert!(res <= 1e-9, "residual {res}");
    assert!(diff <= 1e-9, "deviation {diff}");
}

#[test]
fn basis_pursuit_matches_vertex_enumeration() {
    let gap = basis_pursuit_gap(100, 3, 6, 202);
    assert!(gap <= 1e-6, "gap {gap}");
}

#[test]
fn vertex_enumeration_small_example() {
    use interp_lab::Dataset;
    use nalgebra::{DMatrix, DVector};
    let ds = Dataset {
        x: DMatrix::from_row_slice(1, 2, &[1.0, 2.0]),
        xi: DVector::zeros(1),
        y: DVector::from_vec(vec![2.0]),
        seed: 0,
    };
    assert!((vertex_enumeration_l1(&ds) - 1.0).abs() < 1e-15);
}

#[test]
fn worst_case_beats_random_search() {
    let c = worst_case_random_search(100, 3, 6, 100_000, 303);
    assert_eq!(c.passed, c.count, "margin {} kkt {}", c.min_margin, c.max_kkt);
}

#[test]
fn chi_mean_width() {
    for (i, d) in [2, 10, 100].into_iter().enumerate() {
        let z = chi_mean_z(d, 20_000, 400 + i as u64);
        assert!(z <= 4.0, "d={d}: {z} standard errors");
    }
}

#[test]
fn chi_mean_closed_form() {
    assert!((chi_mean(2) - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-12);
    assert!((chi_mean(1) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
}

#[test]
fn spiked_effective_ranks() {
    let (er, e_big) = spiked_rank_errors();
    assert!(er.abs() <= 1e-10, "{er}");
    assert!(e_big.abs() <= 1e-10, "{e_big}");
}

#[test]
fn l2_rank_sandwich() {
    for (name, lo, hi, se) in sandwich_gaps(20_000, 505) {
        assert!(lo <= 3.0 * se && hi <= 3.0 * se, "{name}: {lo} {hi} se {se}");
    }
}

#[test]
fn tau_split_displays() {
    assert_eq!(tau_split_checks(20, 606), (20, 20));
}
