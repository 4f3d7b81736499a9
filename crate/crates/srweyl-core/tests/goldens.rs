use srweyl_core::flag::{compute_flag, restricted_q, DEFAULT_R_MAX};
use srweyl_core::nilpotent::{dilate_frame, multi_dilate, nilpotentize, Scale, Stage};
use srweyl_core::polyfield::{int, rat, Frame, MultiPoly, Rational};
use srweyl_core::strata::{weyl_predict, Stratification, Stratum, WeylPrediction};

fn zeros(n: usize) -> Vec<Rational> {
    vec![int(0); n]
}

fn point(v: &[i64]) -> Vec<Rational> {
    v.iter().map(|&x| int(x)).collect()
}

fn frame(rows: &[&[&str]]) -> Frame {
    Frame::parse(rows).unwrap()
}

fn q_eq(f: &Frame, generic: &[i64]) -> u32 {
    compute_flag(f, &point(generic), DEFAULT_R_MAX).unwrap().hausdorff
}

fn check(p: &WeylPrediction, gamma: (i64, i64), log_power: u32, support: &[&str]) {
    assert_eq!(p.gamma, rat(gamma.0, gamma.1), "{p:?}");
    assert_eq!(p.log_power, log_power, "{p:?}");
    assert_eq!(p.support, support, "{p:?}");
}

/// One singular stratum through the origin spanned by `subset`, plus the regular region.
fn one_stratum(f: &Frame, subset: &[usize], generic: &[i64]) -> Stratification {
    let n = f.dim();
    let s = Stratum::measured("S", f, &zeros(n), subset).unwrap();
    Stratification::new(vec![s, Stratum::regular("M", n, q_eq(f, generic))], vec![]).unwrap()
}

#[test]
fn flag_table() {
    let heis = frame(&[&["1", "0", "0"], &["0", "1", "x1"]]);
    let fd = compute_flag(&heis, &zeros(3), DEFAULT_R_MAX).unwrap();
    assert_eq!((fd.growth, fd.hausdorff), (vec![2, 3], 4));

    let grushin = frame(&[&["1", "0"], &["0", "x1"]]);
    let on = compute_flag(&grushin, &zeros(2), DEFAULT_R_MAX).unwrap();
    assert_eq!((on.growth, on.hausdorff), (vec![1, 2], 3));
    let off = compute_flag(&grushin, &point(&[1, 0]), DEFAULT_R_MAX).unwrap();
    assert_eq!(off.hausdorff, 2);

    let martinet = frame(&[&["1", "0", "0"], &["0", "1", "x1^2"]]);
    let fd = compute_flag(&martinet, &zeros(3), DEFAULT_R_MAX).unwrap();
    assert_eq!(fd.weights, [1, 1, 3]);
    assert_eq!(restricted_q(&martinet, &zeros(3), &[2, 3]).unwrap().hausdorff, 4);
    assert_eq!(q_eq(&martinet, &[1, 0, 0]), 4);

    for p in 1..=3u32 {
        let g = Frame::parse(&[&["1", "0"], &["0", &format!("x1^{p}")]]).unwrap();
        assert_eq!(restricted_q(&g, &zeros(2), &[2]).unwrap().hausdorff, p + 1);
    }
}

#[test]
fn grushin_and_martinet() {
    let grushin = frame(&[&["1", "0"], &["0", "x1"]]);
    check(&weyl_predict(&one_stratum(&grushin, &[2], &[1, 0]), true).unwrap(), (1, 1), 1, &["S"]);
    let martinet = frame(&[&["1", "0", "0"], &["0", "1", "x1^2"]]);
    check(&weyl_predict(&one_stratum(&martinet, &[2, 3], &[1, 0, 0]), true).unwrap(), (2, 1), 1, &["S"]);
}

#[test]
fn p_grushin_family() {
    for p in 1..=4i64 {
        let g = Frame::parse(&[&["1", "0"], &["0", &format!("x1^{p}")]]).unwrap();
        let w = weyl_predict(&one_stratum(&g, &[2], &[1, 0]), true).unwrap();
        if p == 1 {
            check(&w, (1, 1), 1, &["S"]);
        } else {
            check(&w, (p + 1, 2), 0, &["S"]);
        }
    }
}

#[test]
fn contact_family() {
    for p in 1..=4i64 {
        let f = Frame::parse(&[&["1", "0", "0"], &["0", "1", &format!("x1^{p}")]]).unwrap();
        let w = weyl_predict(&one_stratum(&f, &[2, 3], &[1, 0, 0]), true).unwrap();
        match p {
            1 => check(&w, (2, 1), 0, &["M"]),
            2 => check(&w, (2, 1), 1, &["S"]),
            _ => check(&w, (p + 2, 2), 0, &["S"]),
        }
    }
}

#[test]
fn tangential_elliptic_and_ar_three() {
    let te = frame(&[&["1", "0", "0"], &["0", "1", "1/3*x1^3 + x1*x2^2"]]);
    check(&weyl_predict(&one_stratum(&te, &[3], &[1, 0, 0]), true).unwrap(), (2, 1), 1, &["S"]);
    let ar = frame(&[&["1", "0", "0"], &["0", "1", "0"], &["0", "0", "x1^2 + x2^2"]]);
    check(&weyl_predict(&one_stratum(&ar, &[3], &[1, 0, 0]), true).unwrap(), (3, 2), 1, &["S"]);
}

#[test]
fn rank_two_in_four_dimensions() {
    let frames = [
        frame(&[&["1", "0", "0", "0"], &["0", "1", "x1^2", "x1*x2"]]),
        frame(&[&["1", "0", "0", "0"], &["0", "1", "x1", "1/3*x1^3 + x1*x2^2"]]),
        frame(&[&["1", "0", "0", "0"], &["0", "1", "x1", "x1^2*x2"]]),
    ];
    for f in &frames {
        let s = one_stratum(f, &[3, 4], &[1, 1, 0, 0]);
        assert_eq!((s.strata[0].hausdorff, s.strata[1].hausdorff), (6, 7));
        check(&weyl_predict(&s, true).unwrap(), (7, 2), 0, &["M"]);
    }
}

#[test]
fn almost_riemannian_line() {
    for n in 2..=4usize {
        for l in 1..=2i64 {
            let mut rows: Vec<Vec<String>> = Vec::new();
            for i in 0..n - 1 {
                rows.push((0..n).map(|c| if c == i { "1".into() } else { "0".into() }).collect());
            }
            let coef = (1..n).map(|i| format!("x{i}^{}", 2 * l)).collect::<Vec<_>>().join(" + ");
            rows.push((0..n).map(|c| if c == n - 1 { coef.clone() } else { "0".into() }).collect());
            let refs: Vec<Vec<&str>> = rows.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
            let slices: Vec<&[&str]> = refs.iter().map(Vec::as_slice).collect();
            let f = Frame::parse(&slices).unwrap();
            let mut generic = vec![0i64; n];
            generic[0] = 1;
            let w = weyl_predict(&one_stratum(&f, &[n], &generic), true).unwrap();
            let qs = 2 * l + 1;
            let n = n as i64;
            if n < qs {
                check(&w, (qs, 2), 0, &["S"]);
            } else if n == qs {
                check(&w, (n, 2), 1, &["S"]);
            } else {
                check(&w, (n, 2), 0, &["M"]);
            }
        }
    }
}

fn tangential_hyperbolic(k: u32) -> Stratification {
    let f = Frame::parse(&[&["1", "0", "0"], &["0", "1", &format!("x1^{k}*x2")]]).unwrap();
    let s1 = Stratum::measured("S1", &f, &zeros(3), &[3]).unwrap();
    let s2 = Stratum::measured("S2", &f, &point(&[0, 1, 0]), &[2, 3]).unwrap();
    let s2p = Stratum::measured("S2'", &f, &point(&[1, 0, 0]), &[1, 3]).unwrap();
    assert_eq!((s1.hausdorff, s2.hausdorff, s2p.hausdorff), (k + 2, k + 2, 4));
    let m = Stratum::regular("M", 3, q_eq(&f, &[1, 1, 0]));
    Stratification::new(vec![s1, s2, s2p, m], vec![(0, 1), (0, 2)]).unwrap()
}

#[test]
fn tangential_hyperbolic_family() {
    let s = tangential_hyperbolic(1);
    assert_eq!(s.chains(), [vec![0, 1, 3], vec![0, 2, 3]]);
    check(&weyl_predict(&s, true).unwrap(), (2, 1), 1, &["S2'"]);
    check(&weyl_predict(&tangential_hyperbolic(2), true).unwrap(), (2, 1), 2, &["S1"]);
    for k in 3..=5i64 {
        check(&weyl_predict(&tangential_hyperbolic(k as u32), true).unwrap(), (k + 2, 2), 1, &["S1"]);
    }
}

#[test]
fn almost_riemannian_five() {
    let f = frame(&[
        &["1", "0", "0", "0", "0"],
        &["0", "1", "0", "0", "0"],
        &["0", "0", "1", "0", "0"],
        &["0", "0", "0", "1", "0"],
        &["0", "0", "0", "0", "(x1^2 + x2^2)*(x3^2 + x4^2)"],
    ]);
    let s1 = Stratum::measured("S1", &f, &zeros(5), &[5]).unwrap();
    let s2 = Stratum::measured("S2", &f, &point(&[0, 0, 1, 0, 0]), &[3, 4, 5]).unwrap();
    let s2p = Stratum::measured("S2'", &f, &point(&[1, 0, 0, 0, 0]), &[1, 2, 5]).unwrap();
    let m = Stratum::regular("M", 5, q_eq(&f, &[1, 0, 1, 0, 0]));
    let s = Stratification::new(vec![s1, s2, s2p, m], vec![(0, 1), (0, 2)]).unwrap();
    check(&weyl_predict(&s, true).unwrap(), (5, 2), 2, &["S1"]);
}

#[test]
fn products() {
    let grushin = frame(&[&["1", "0"], &["0", "x1"]]);
    let g = one_stratum(&grushin, &[2], &[1, 0]);
    let mut acc = g.clone();
    for n in 1..=3i64 {
        check(&weyl_predict(&acc, true).unwrap(), (n, 1), n as u32, &[&"SxSxS"[..(n as usize * 2 - 1)]]);
        acc = acc.product(&g).unwrap();
    }
    let martinet = frame(&[&["1", "0", "0"], &["0", "1", "x1^2"]]);
    let m = one_stratum(&martinet, &[2, 3], &[1, 0, 0]);
    let gm = g.product(&m).unwrap();
    assert_eq!(gm.strata.iter().map(|s| s.dim).max(), Some(5));
    check(&weyl_predict(&gm, true).unwrap(), (3, 1), 2, &["SxS"]);
}

#[test]
fn nilpotent_goldens() {
    let v = ["x1", "x2", "tau1"];
    let sos = frame(&[&["1", "0"], &["0", "x1^2+x2^2"]]);
    let d = dilate_frame(&sos, &zeros(2), None).unwrap();
    assert_eq!(d.fields()[1][1], MultiPoly::parse("x1^2 + tau1^4*x2^2", &v).unwrap());
    assert_eq!(nilpotentize(&sos, &zeros(2)).unwrap().frame, frame(&[&["1", "0"], &["0", "x1^2"]]));

    let tangency = frame(&[&["1", "0"], &["0", "x1^2-x2"]]);
    let d = dilate_frame(&tangency, &zeros(2), Some(&[1, 3])).unwrap();
    assert_eq!(d.fields()[1][1], MultiPoly::parse("x1^2 - tau1*x2", &v).unwrap());
    assert_eq!(nilpotentize(&tangency, &zeros(2)).unwrap().frame, frame(&[&["1", "0"], &["0", "x1^2"]]));

    let heis = frame(&[&["1", "0", "0"], &["0", "1", "x1"]]);
    assert_eq!(nilpotentize(&heis, &zeros(3)).unwrap().frame, heis);

    let chain = [
        Stage { point: zeros(2), weights: Some(vec![1, 3]), scale: Scale::Symbolic },
        Stage { point: point(&[0, 1]), weights: Some(vec![1, 1]), scale: Scale::Symbolic },
    ];
    let d = multi_dilate(&sos, &chain).unwrap();
    let want = "tau2^2*x1^2 + tau1^4 + 2*tau1^4*tau2*x2 + tau1^4*tau2^2*x2^2";
    assert_eq!(d.fields()[1][1], MultiPoly::parse(want, &["x1", "x2", "tau1", "tau2"]).unwrap());

    // both scales zero: the homogeneous part at each stage, weights recomputed at the second
    let zero_chain = [
        Stage { point: zeros(2), weights: None, scale: Scale::Value(int(0)) },
        Stage { point: point(&[0, 1]), weights: None, scale: Scale::Value(int(0)) },
    ];
    let z = multi_dilate(&sos, &zero_chain).unwrap().to_frame().unwrap();
    assert_eq!(z, frame(&[&["1", "0"], &["0", "x1^2"]]));
}
