//! Torus level tables against lattice-point counts tabulated by brute force.

use std::f64::consts::PI;

use srweyl_core::models::{sum_of_two_squares_counts, torus2_levels, torus4_levels};

fn table(text: &str) -> Vec<u64> {
    text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
}

#[test]
fn two_squares_match_lattice_count() {
    let expected = table(include_str!("data/r2.csv"));
    assert_eq!(sum_of_two_squares_counts(200), expected);
    let levels = torus2_levels(2.0 * PI * 200.5);
    let nonzero: Vec<(usize, u64)> = expected.iter().copied().enumerate().filter(|&(_, c)| c > 0).collect();
    assert_eq!(levels.len(), nonzero.len());
    for (&(v, m), &(n, c)) in levels.iter().zip(&nonzero) {
        assert!((v - 2.0 * PI * n as f64).abs() < 1e-9 * (1.0 + v));
        assert_eq!(m, c);
    }
}

#[test]
fn four_torus_matches_lattice_count() {
    let expected = table(include_str!("data/r4.csv"));
    let levels = torus4_levels(1.0, 1.0, 2.0 * PI * 40.5);
    let nonzero: Vec<(usize, u64)> = expected.iter().copied().enumerate().filter(|&(_, c)| c > 0).collect();
    assert_eq!(levels.len(), nonzero.len());
    for (&(v, m), &(n, c)) in levels.iter().zip(&nonzero) {
        assert!((v - 2.0 * PI * n as f64).abs() < 1e-9 * (1.0 + v), "{v} vs level {n}");
        assert_eq!(m, c, "multiplicity at {n}");
    }
}
