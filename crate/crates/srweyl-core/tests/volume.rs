use srweyl_core::polyfield::{int, Frame, Rational};
use srweyl_core::volume::{build_catalog, default_times, fit_exponents, lattice_q_max, volume_integral, VolumeOptions};

fn unit_square() -> Vec<(Rational, Rational)> {
    vec![(int(-1), int(1)), (int(-1), int(1))]
}

fn fitted(second: &str) -> (f64, u32) {
    let f = Frame::parse(&[&["1", "0"], &["0", second]]).unwrap();
    let bx = unit_square();
    let catalog = build_catalog(&f, lattice_q_max(&f, &bx).unwrap()).unwrap();
    let samples: Vec<(f64, f64)> = default_times()
        .into_iter()
        .map(|t| (t, volume_integral(&catalog, &bx, t, &VolumeOptions::default()).unwrap()))
        .collect();
    let fit = fit_exponents(&samples).unwrap();
    (fit.gamma, fit.log_power)
}

#[test]
fn riemannian_volume_is_constant_integrand() {
    let f = Frame::parse(&[&["1", "0"], &["0", "1"]]).unwrap();
    let bx = unit_square();
    let catalog = build_catalog(&f, 2).unwrap();
    let v = volume_integral(&catalog, &bx, 1e-4, &VolumeOptions::default()).unwrap();
    assert!((v / 4e4 - 1.0).abs() < 1e-12, "{v}");
}

// X2 = (x1^{2p} + x1 x2^k) d2 should scale as t^{-(p + 1/2 - (2p-1)/(2k))}.
#[test]
fn tangency_family_exponents() {
    for (p, k, second) in [(1, 2, "x1^2+x1*x2^2"), (2, 3, "x1^4+x1*x2^3")] {
        let expected = p as f64 + 0.5 - (2 * p - 1) as f64 / (2 * k) as f64;
        let (gamma, _) = fitted(second);
        assert!((gamma / expected - 1.0).abs() < 0.05, "p={p} k={k}: {gamma} vs {expected}");
    }
}
