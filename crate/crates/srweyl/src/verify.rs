//! The acceptance table: one function per criterion, each returning named
//! checks with the measured values. Tolerances are fixed here and nowhere else.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use srweyl_core::expand::{
    expand_nested_exact, expand_nested_leading, expand_single, expand_single_exact, nested_constant_iterated,
    nested_structure, single_layer_oracle, BlackBox, Coefficient, GFunction, NestedSpec,
};
use srweyl_core::flag::{compute_flag, restricted_q, DEFAULT_R_MAX};
use srweyl_core::models::{
    biheis_density, biheis_popp_volume, biheis_series, cutoff_for, flat_term_weyl, grushin_sphere_expected,
    heisenberg_diag_integral, heisenberg_kernel_diag, sample_profile, two_term_fit, ModelKind, SpectrumModel,
    SPHERE_SHIFT,
};
use srweyl_core::nilpotent::{dilate_frame, multi_dilate, nilpotentize, Scale, Stage};
use srweyl_core::polyfield::{int, rat};
use srweyl_core::strata::{weyl_predict, Stratification, Stratum, WeylPrediction};
use srweyl_core::volume::{build_catalog, default_times, fit_exponents, lattice_q_max, VolumeOptions};
use srweyl_core::{Frame, MultiPoly, Rational};

use crate::parallel;

/// One named comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    /// Short label, stable across runs.
    pub label: String,
    /// Outcome.
    pub passed: bool,
    /// Measured and expected values.
    pub detail: String,
}

/// Outcome of one criterion.
#[derive(Clone, Debug, PartialEq)]
pub struct CriterionReport {
    /// Criterion number, 1 to 11.
    pub id: u32,
    /// What is checked.
    pub title: &'static str,
    /// Individual comparisons, ending with the runtime budget.
    pub checks: Vec<Check>,
    /// Wall time.
    pub elapsed: Duration,
}

impl CriterionReport {
    /// True when every check passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Labels of the failing checks.
    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.label.as_str()).collect()
    }

    /// One report line.
    pub fn line(&self) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let failing = self.failures();
        let extra = if failing.is_empty() { String::new() } else { format!(" [failing: {}]", failing.join(", ")) };
        format!("criterion {:>2} {status}: {} ({:.2} s){extra}", self.id, self.title, self.elapsed.as_secs_f64())
    }
}

/// All criterion numbers.
pub const ALL: [u32; 11] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

/// Criteria selected by a suite name: `all`, `expansion`, or a comma list of numbers.
pub fn suite(name: &str) -> Option<Vec<u32>> {
    match name {
        "all" => Some(ALL.to_vec()),
        // the second name is the fixed command-line alias of the expansion suite
        "expansion" | "appendix-d" => Some(vec![9]),
        _ => name
            .split(',')
            .map(|s| s.trim().parse::<u32>().ok().filter(|id| ALL.contains(id)))
            .collect::<Option<Vec<_>>>(),
    }
}

/// Runs one criterion.
pub fn run(id: u32) -> CriterionReport {
    let (title, budget, f): (&'static str, u64, fn(&mut Vec<Check>)) = match id {
        1 => ("Heisenberg diagonal constant", 1, heisenberg_diagonal),
        2 => ("Grushin-sphere two-term heat-trace law", 60, sphere_two_term),
        3 => ("Grushin-sphere counting function", 30, sphere_counting),
        4 => ("Heisenberg counting function", 30, heisenberg_counting),
        5 => ("bi-Heisenberg counting and density", 60, biheisenberg),
        6 => ("flag golden table", 1, flag_table),
        7 => ("exponent fits from volume integrals", 300, volume_fits),
        8 => ("Weyl-prediction golden table", 1, prediction_table),
        9 => ("expansion engine oracle suite", 120, expansion_suite),
        10 => ("nilpotentization goldens", 1, nilpotent_goldens),
        11 => ("flat-term scaling laws", 60, flat_terms),
        _ => ("unknown criterion", 0, |c: &mut Vec<Check>| push(c, "exists", false, "no such criterion".into())),
    };
    let start = Instant::now();
    let mut checks = Vec::new();
    f(&mut checks);
    let elapsed = start.elapsed();
    let within = elapsed <= Duration::from_secs(budget);
    push(&mut checks, "runtime", within, format!("{:.3} s, budget {budget} s", elapsed.as_secs_f64()));
    CriterionReport { id, title, checks, elapsed }
}

fn push(checks: &mut Vec<Check>, label: &str, passed: bool, detail: String) {
    checks.push(Check { label: label.into(), passed, detail });
}

/// Records a check from a fallible measurement; errors fail the check.
fn measure<T>(checks: &mut Vec<Check>, label: &str, value: srweyl_core::Result<T>, judge: impl FnOnce(&T) -> (bool, String)) {
    match value {
        Ok(v) => {
            let (ok, detail) = judge(&v);
            push(checks, label, ok, detail);
        }
        Err(e) => push(checks, label, false, format!("error: {e}")),
    }
}

fn relative(got: f64, want: f64) -> f64 {
    (got / want - 1.0).abs()
}

fn within(got: f64, want: f64, tol: f64) -> (bool, String) {
    let r = relative(got, want);
    (r <= tol, format!("{got:.6e} vs {want:.6e}, relative {r:.2e} (tolerance {tol:.0e})"))
}

fn geometric(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64)).collect()
}

fn zeros(n: usize) -> Vec<Rational> {
    vec![int(0); n]
}

fn point(v: &[i64]) -> Vec<Rational> {
    v.iter().map(|&x| int(x)).collect()
}

fn frame(rows: &[&[&str]]) -> Frame {
    Frame::parse(rows).expect("built-in frame")
}

fn heisenberg_diagonal(c: &mut Vec<Check>) {
    measure(c, "kernel diagonal", heisenberg_kernel_diag(), |&v| {
        let err = (v - 1.0 / 16.0).abs();
        (err <= 1e-8, format!("{v:.12} vs 1/16, error {err:.1e}"))
    });
    measure(c, "sinh integral", heisenberg_diag_integral(), |&v| {
        let err = (v - PI * PI / 4.0).abs();
        (err <= 1e-8, format!("{v:.12} vs pi^2/4, error {err:.1e}"))
    });
}

fn sphere_two_term(c: &mut Vec<Check>) {
    let times = geometric(1e-4, 1e-2, 12);
    let cutoff = cutoff_for(ModelKind::GrushinSphere, times[0], SPHERE_SHIFT, 1e-8);
    let fit = SpectrumModel::grushin_sphere(cutoff).and_then(|m| {
        let samples = times
            .iter()
            .map(|&t| parallel::heat_trace(&m, t, SPHERE_SHIFT).map(|s| (s.t, s.z)))
            .collect::<srweyl_core::Result<Vec<_>>>()?;
        two_term_fit(&samples)
    });
    let (a_want, b_want) = grushin_sphere_expected();
    measure(c, "log coefficient", fit.clone(), |&(a, _)| within(a, a_want, 0.02));
    measure(c, "constant coefficient", fit, |&(_, b)| within(b, b_want, 0.05));
}

fn sphere_counting(c: &mut Vec<Check>) {
    let lambda: f64 = 1e6;
    let n = SpectrumModel::grushin_sphere(lambda).and_then(|m| m.counting(lambda));
    measure(c, "counting ratio", n, |&n| {
        let r = n as f64 / (0.5 * lambda * lambda.ln());
        ((0.93..=1.07).contains(&r), format!("N/(lambda ln lambda / 2) = {r:.5}, required [0.93, 1.07]"))
    });
}

fn heisenberg_counting(c: &mut Vec<Check>) {
    let lambda: f64 = 2e3;
    let n = SpectrumModel::heisenberg(lambda).and_then(|m| m.counting(lambda));
    measure(c, "counting ratio", n, |&n| within(n as f64 / (lambda * lambda), PI * PI / 8.0, 0.05));
}

fn biheisenberg(c: &mut Vec<Check>) {
    let lambda: f64 = 200.0;
    let n = SpectrumModel::biheisenberg(1.0, 1.0, lambda).and_then(|m| m.counting(lambda));
    let n = match n {
        Ok(n) => n as f64,
        Err(e) => return push(c, "spectrum", false, format!("error: {e}")),
    };
    measure(c, "counting vs series", biheis_series(1.0, 1.0, 1e-12), |&s| {
        within(n * 3.0 / (2.0 * lambda.powi(3)), s, 0.03)
    });
    // N(lambda) ~ Popp volume * density * lambda^3 / Gamma(4)
    measure(c, "density vs spectrum", biheis_density(1.0, 1.0, 1e-12), |&d| {
        within(n * 6.0 / (biheis_popp_volume(1.0, 1.0) * lambda.powi(3)), d, 0.05)
    });
}

fn flag_table(c: &mut Vec<Check>) {
    let exact = |c: &mut Vec<Check>, label: &str, got: Result<String, String>, want: &str| match got {
        Ok(g) => push(c, label, g == want, format!("{g} vs {want}")),
        Err(e) => push(c, label, false, format!("error: {e}")),
    };
    let flag = |f: &Frame, q: &[Rational]| compute_flag(f, q, DEFAULT_R_MAX).map_err(|e| e.to_string());
    let heis = frame(&[&["1", "0", "0"], &["0", "1", "x1"]]);
    exact(c, "Heisenberg", flag(&heis, &zeros(3)).map(|f| format!("{:?} Q={}", f.growth, f.hausdorff)), "[2, 3] Q=4");
    let grushin = frame(&[&["1", "0"], &["0", "x1"]]);
    exact(c, "Grushin on S", flag(&grushin, &zeros(2)).map(|f| format!("{:?} Q={}", f.growth, f.hausdorff)), "[1, 2] Q=3");
    exact(c, "Grushin off S", flag(&grushin, &point(&[1, 0])).map(|f| format!("Q={}", f.hausdorff)), "Q=2");
    let martinet = frame(&[&["1", "0", "0"], &["0", "1", "x1^2"]]);
    exact(c, "Martinet weights", flag(&martinet, &zeros(3)).map(|f| format!("{:?}", f.weights)), "[1, 1, 3]");
    exact(
        c,
        "Martinet stratum",
        restricted_q(&martinet, &zeros(3), &[2, 3]).map(|r| format!("QS={}", r.hausdorff)).map_err(|e| e.to_string()),
        "QS=4",
    );
    exact(c, "Martinet regular", flag(&martinet, &point(&[1, 0, 0])).map(|f| format!("Q={}", f.hausdorff)), "Q=4");
    for p in 1..=3u32 {
        let g = frame(&[&["1", "0"], &["0", &format!("x1^{p}")]]);
        let got = restricted_q(&g, &zeros(2), &[2]).map(|r| format!("QS={}", r.hausdorff)).map_err(|e| e.to_string());
        exact(c, &format!("{p}-Grushin stratum"), got, &format!("QS={}", p + 1));
    }
}

fn volume_fits(c: &mut Vec<Check>) {
    let cases: [(&str, &str, f64, Option<u32>); 4] = [
        ("case 1 (k=2)", "x1^2-x2", 1.0, Some(1)),
        ("case 3 (k=1)", "x1^2+x2^2", 1.0, Some(1)),
        ("case 3 (k=2)", "(x1^2+x2^2)^2", 2.0, Some(0)),
        ("case 2 (p=1,k=2)", "x1^2+x1*x2^2", 1.25, Some(0)),
    ];
    let bx = [(int(-1), int(1)), (int(-1), int(1))];
    for (label, second, gamma, log_power) in cases {
        let fit = Frame::parse(&[&["1", "0"], &["0", second]]).and_then(|f| {
            let catalog = build_catalog(&f, lattice_q_max(&f, &bx)?)?;
            let samples = default_times()
                .into_iter()
                .map(|t| parallel::volume_integral(&catalog, &bx, t, &VolumeOptions::default()).map(|v| (t, v)))
                .collect::<srweyl_core::Result<Vec<_>>>()?;
            fit_exponents(&samples)
        });
        measure(c, &format!("{label} exponent"), fit.clone(), |f| within(f.gamma, gamma, 0.05));
        if let Some(k) = log_power {
            measure(c, &format!("{label} log power"), fit, |f| {
                (f.log_power == k, format!("fitted {} vs {k} (gamma {:.4})", f.log_power, f.gamma))
            });
        }
    }
}

fn q_eq(f: &Frame, generic: &[i64]) -> srweyl_core::Result<u32> {
    Ok(compute_flag(f, &point(generic), DEFAULT_R_MAX)?.hausdorff)
}

fn one_stratum(f: &Frame, subset: &[usize], generic: &[i64]) -> srweyl_core::Result<Stratification> {
    let n = f.dim();
    let s = Stratum::measured("S", f, &zeros(n), subset)?;
    Stratification::new(vec![s, Stratum::regular("M", n, q_eq(f, generic)?)], vec![])
}

fn expect_prediction(c: &mut Vec<Check>, label: &str, s: srweyl_core::Result<Stratification>, want: (i64, i64, u32, &str)) {
    let p = s.and_then(|s| weyl_predict(&s, true));
    measure(c, label, p, |p: &WeylPrediction| {
        let ok = p.gamma == rat(want.0, want.1) && p.log_power == want.2 && p.support == [want.3];
        (ok, format!("gamma {} log {} support {:?}; want {}/{} log {} support [{}]", p.gamma, p.log_power, p.support, want.0, want.1, want.2, want.3))
    });
}

fn tangential_hyperbolic(k: u32) -> srweyl_core::Result<Stratification> {
    let f = frame(&[&["1", "0", "0"], &["0", "1", &format!("x1^{k}*x2")]]);
    let s1 = Stratum::measured("S1", &f, &zeros(3), &[3])?;
    let s2 = Stratum::measured("S2", &f, &point(&[0, 1, 0]), &[2, 3])?;
    let s2p = Stratum::measured("S2'", &f, &point(&[1, 0, 0]), &[1, 3])?;
    let m = Stratum::regular("M", 3, q_eq(&f, &[1, 1, 0])?);
    Stratification::new(vec![s1, s2, s2p, m], vec![(0, 1), (0, 2)])
}

fn prediction_table(c: &mut Vec<Check>) {
    let grushin = frame(&[&["1", "0"], &["0", "x1"]]);
    expect_prediction(c, "Grushin", one_stratum(&grushin, &[2], &[1, 0]), (1, 1, 1, "S"));
    let martinet = frame(&[&["1", "0", "0"], &["0", "1", "x1^2"]]);
    expect_prediction(c, "Martinet", one_stratum(&martinet, &[2, 3], &[1, 0, 0]), (2, 1, 1, "S"));
    for p in 2..=4i64 {
        let g = frame(&[&["1", "0"], &["0", &format!("x1^{p}")]]);
        expect_prediction(c, &format!("{p}-Grushin"), one_stratum(&g, &[2], &[1, 0]), (p + 1, 2, 0, "S"));
    }
    for p in 1..=4i64 {
        let f = frame(&[&["1", "0", "0"], &["0", "1", &format!("x1^{p}")]]);
        let want = match p {
            1 => (2, 1, 0, "M"),
            2 => (2, 1, 1, "S"),
            _ => (p + 2, 2, 0, "S"),
        };
        expect_prediction(c, &format!("contact family p={p}"), one_stratum(&f, &[2, 3], &[1, 0, 0]), want);
    }
    let te = frame(&[&["1", "0", "0"], &["0", "1", "1/3*x1^3 + x1*x2^2"]]);
    expect_prediction(c, "tangential elliptic", one_stratum(&te, &[3], &[1, 0, 0]), (2, 1, 1, "S"));
    let ar3 = frame(&[&["1", "0", "0"], &["0", "1", "0"], &["0", "0", "x1^2 + x2^2"]]);
    expect_prediction(c, "almost-Riemannian R^3", one_stratum(&ar3, &[3], &[1, 0, 0]), (3, 2, 1, "S"));
    let rank_two = [
        ["0", "1", "x1^2", "x1*x2"],
        ["0", "1", "x1", "1/3*x1^3 + x1*x2^2"],
        ["0", "1", "x1", "x1^2*x2"],
    ];
    for (i, second) in rank_two.iter().enumerate() {
        let f = frame(&[&["1", "0", "0", "0"], second]);
        expect_prediction(c, &format!("rank two in R^4 #{}", i + 1), one_stratum(&f, &[3, 4], &[1, 1, 0, 0]), (7, 2, 0, "M"));
    }
    expect_prediction(c, "tangential hyperbolic k=1", tangential_hyperbolic(1), (2, 1, 1, "S2'"));
    expect_prediction(c, "tangential hyperbolic k=2", tangential_hyperbolic(2), (2, 1, 2, "S1"));
    for k in 3..=5i64 {
        expect_prediction(c, &format!("tangential hyperbolic k={k}"), tangential_hyperbolic(k as u32), (k + 2, 2, 1, "S1"));
    }
    let ar5 = frame(&[
        &["1", "0", "0", "0", "0"],
        &["0", "1", "0", "0", "0"],
        &["0", "0", "1", "0", "0"],
        &["0", "0", "0", "1", "0"],
        &["0", "0", "0", "0", "(x1^2 + x2^2)*(x3^2 + x4^2)"],
    ]);
    let ar5_strata = (|| {
        let s1 = Stratum::measured("S1", &ar5, &zeros(5), &[5])?;
        let s2 = Stratum::measured("S2", &ar5, &point(&[0, 0, 1, 0, 0]), &[3, 4, 5])?;
        let s2p = Stratum::measured("S2'", &ar5, &point(&[1, 0, 0, 0, 0]), &[1, 2, 5])?;
        let m = Stratum::regular("M", 5, q_eq(&ar5, &[1, 0, 1, 0, 0])?);
        Stratification::new(vec![s1, s2, s2p, m], vec![(0, 1), (0, 2)])
    })();
    expect_prediction(c, "almost-Riemannian R^5", ar5_strata, (5, 2, 2, "S1"));
    let g = one_stratum(&grushin, &[2], &[1, 0]);
    let products = g.clone().and_then(|g| {
        let g2 = g.product(&g)?;
        let g3 = g2.product(&g)?;
        Ok((g2, g3))
    });
    expect_prediction(c, "two Grushins", products.clone().map(|p| p.0), (2, 1, 2, "SxS"));
    expect_prediction(c, "three Grushins", products.map(|p| p.1), (3, 1, 3, "SxSxS"));
    let gm = g.and_then(|g| g.product(&one_stratum(&martinet, &[2, 3], &[1, 0, 0])?));
    expect_prediction(c, "Grushin x Martinet", gm, (3, 1, 2, "SxS"));
}

fn random_poly(rng: &mut StdRng, vars: usize, max_deg: u32, max_terms: usize) -> MultiPoly {
    let mut terms = vec![(vec![0; vars], int(1))];
    for _ in 0..rng.gen_range(1..=max_terms) {
        let mut e = vec![0u32; vars];
        let mut left = rng.gen_range(0..=max_deg);
        for slot in e.iter_mut() {
            let a = rng.gen_range(0..=left);
            *slot = a;
            left -= a;
        }
        terms.push((e, rat(rng.gen_range(-5..=5), rng.gen_range(1..=4))));
    }
    MultiPoly::from_terms(vars, terms).expect("consistent dimensions")
}

fn exact_map(r: &srweyl_core::expand::ExpansionResult) -> BTreeMap<(i64, u32), Rational> {
    r.terms
        .iter()
        .filter_map(|t| match &t.coefficient {
            Coefficient::Exact(v) if !num_is_zero(v) => Some(((t.power, t.log_power), v.clone())),
            _ => None,
        })
        .collect()
}

fn num_is_zero(r: &Rational) -> bool {
    *r == int(0)
}

fn expansion_suite(c: &mut Vec<Check>) {
    // Random polynomials against the quadrature oracle, cycling k through [-4, 3].
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let (mut accepted, mut worst) = (0, f64::INFINITY);
    let mut failures = Vec::new();
    let mut attempt = 0;
    while accepted < 50 && attempt < 500 {
        let k = -4 + (accepted % 8) as i64;
        let j = (accepted / 8 % 3) as u32;
        attempt += 1;
        let g = random_poly(&mut rng, 2, 4, 5);
        let outcome = (|| -> srweyl_core::Result<Option<(f64, i64)>> {
            let full = expand_single_exact(&g, k, j)?;
            let Some(lead) = full.terms.first().map(|t| t.power) else { return Ok(None) };
            let trunc = expand_single(GFunction::Poly(&g), k, j, lead)?;
            if trunc.terms.len() == full.terms.len() {
                return Ok(None);
            }
            let xs = [1e-2, 1e-3, 1e-4];
            let mut pts = Vec::new();
            for &x in &xs {
                let o = single_layer_oracle(GFunction::Poly(&g), k, j, x, 1e-13)?;
                let r = (o - trunc.eval(x)).abs() / (1.0 / x).ln().powi(j as i32 + 1);
                pts.push((x.ln(), r.ln()));
            }
            Ok(Some(((pts[2].1 - pts[0].1) / (pts[2].0 - pts[0].0), trunc.order)))
        })();
        match outcome {
            Ok(Some((slope, order))) => {
                accepted += 1;
                worst = worst.min(slope - order as f64);
                if slope < order as f64 {
                    failures.push(format!("k={k} j={j} slope {slope:.3} < {order}"));
                }
            }
            Ok(None) => {}
            Err(e) => {
                accepted += 1;
                failures.push(format!("k={k} j={j}: {e}"));
            }
        }
    }
    push(
        c,
        "random polynomial slopes",
        accepted == 50 && failures.is_empty(),
        format!("{accepted} cases, smallest slope margin {worst:.3}; failures: {failures:?}"),
    );

    // Black-box coefficients against exact ones.
    let g = MultiPoly::parse("1 + 2*tau - eps + tau*eps + 3*eps^2 - tau^2*eps + eps^3", &["tau", "eps"]).expect("literal");
    let f = |p: &[f64]| g.eval_f64(p);
    let mut max_err: f64 = 0.0;
    let mut errors = Vec::new();
    for k in [-3i64, -1, 0, 2] {
        let b = GFunction::BlackBox(BlackBox { eval: &f, smoothness: 6, scale: 1.0 });
        for j in 0..=2 {
            match (expand_single_exact(&g, k, j), expand_single(b, k, j, 10)) {
                (Ok(exact), Ok(approx)) => {
                    for t in &approx.terms {
                        max_err = max_err.max((t.coefficient.to_f64() - exact.coefficient(t.power, t.log_power)).abs());
                    }
                }
                (Err(e), _) | (_, Err(e)) => errors.push(format!("k={k} j={j}: {e}")),
            }
        }
    }
    push(c, "black-box coefficients", errors.is_empty() && max_err <= 1e-6, format!("max error {max_err:.2e} (tolerance 1e-6); {errors:?}"));

    two_layer_cells(c);

    // Residue formula against direct iterated integration.
    let lists: [&[i64]; 10] = [
        &[0, -2],
        &[-1, -1],
        &[-2, -2, 1],
        &[3, -1, -4],
        &[-1, 0, -1],
        &[2, 2, -3, -3],
        &[-3],
        &[1, -2, 0],
        &[-4, -1, 2],
        &[0, 0, -2, -1],
    ];
    let mut mismatched = Vec::new();
    for ks in lists {
        let one = MultiPoly::one(ks.len() + 1);
        let mut want = nested_constant_iterated(ks);
        want.retain(|_, v| !num_is_zero(v));
        match expand_nested_exact(ks, &one) {
            Ok(r) if exact_map(&r) == want => {}
            Ok(_) => mismatched.push(format!("{ks:?}")),
            Err(e) => mismatched.push(format!("{ks:?}: {e}")),
        }
    }
    push(c, "residue vs iterated", mismatched.is_empty(), format!("10 k-lists; mismatches {mismatched:?}"));
}

/// The nine sign cells of the two-layer table: exponents, concentration flags,
/// a perturbation test of each flag, and black-box coefficients.
fn two_layer_cells(c: &mut Vec<Check>) {
    // (k1, k2), power, log power, eps-concentration, tau indices
    let cells: [((i64, i64), i64, u32, bool, &[usize]); 9] = [
        ((1, 2), 0, 0, true, &[]),
        ((-1, 1), 0, 1, true, &[1]),
        ((-3, 0), -2, 0, false, &[1]),
        ((2, -1), 0, 1, true, &[2]),
        ((-1, -1), 0, 2, true, &[1, 2]),
        ((-3, -1), -2, 0, false, &[1]),
        ((0, -3), -2, 0, false, &[2]),
        ((-2, -2), -1, 1, false, &[1, 2]),
        ((-4, -2), -3, 0, false, &[1]),
    ];
    let vars = ["t1", "t2", "e"];
    let base = MultiPoly::parse("2 + t1 + 3*t2*e - e^2 + t1*t2 + e^3", &vars).expect("literal");
    let bump = MultiPoly::parse("1 + t1 + t2 + e", &vars).expect("literal");
    let f = |p: &[f64]| base.eval_f64(p);
    let bb = GFunction::BlackBox(BlackBox { eval: &f, smoothness: 8, scale: 1.0 });
    let mut problems = Vec::new();
    for ((k1, k2), power, log_power, eps, taus) in cells {
        let ks = [k1, k2];
        let (p, lp, conc) = nested_structure(&ks);
        if (p, lp) != (power, log_power) {
            problems.push(format!("{ks:?}: exponent ({p}, {lp})"));
        }
        let tau_expected = !taus.is_empty();
        if conc.epsilon != eps || conc.tau != tau_expected || conc.tau_indices != taus {
            problems.push(format!("{ks:?}: flags {conc:?}"));
        }
        let coef = |g: &MultiPoly| expand_nested_leading(NestedSpec { klist: &ks, g: GFunction::Poly(g) }).map(|l| l.coefficient);
        let Ok(c0) = coef(&base) else {
            problems.push(format!("{ks:?}: exact coefficient failed"));
            continue;
        };
        // concentrated on a variable <=> perturbing along it leaves C unchanged
        for (v, name) in vars.iter().enumerate() {
            let concentrated = if v == 2 { eps } else { taus.contains(&(v + 1)) };
            let moved = &base + &(&MultiPoly::var(3, v) * &bump);
            match coef(&moved) {
                Ok(c1) if (c1 == c0) == concentrated => {}
                Ok(_) => problems.push(format!("{ks:?}: perturbation along {name} disagrees with the flag")),
                Err(e) => problems.push(format!("{ks:?}: {e}")),
            }
        }
        match expand_nested_leading(NestedSpec { klist: &ks, g: bb }) {
            Ok(l) => {
                let (a, b) = (l.coefficient.to_f64(), c0.to_f64());
                if (a - b).abs() > 1e-6 * b.abs().max(1.0) {
                    problems.push(format!("{ks:?}: black box {a} vs exact {b}"));
                }
            }
            Err(e) => problems.push(format!("{ks:?}: black box {e}")),
        }
    }
    push(c, "two-layer cells", problems.is_empty(), format!("9 cells; problems {problems:?}"));
}

fn nilpotent_goldens(c: &mut Vec<Check>) {
    let exact = |c: &mut Vec<Check>, label: &str, ok: srweyl_core::Result<bool>| match ok {
        Ok(ok) => push(c, label, ok, if ok { "exact match".into() } else { "differs".into() }),
        Err(e) => push(c, label, false, format!("error: {e}")),
    };
    let v = ["x1", "x2", "tau1"];
    let poly = |s: &str, vars: &[&str]| MultiPoly::parse(s, vars).expect("literal");
    let sos = frame(&[&["1", "0"], &["0", "x1^2+x2^2"]]);
    exact(c, "sum of squares dilation", dilate_frame(&sos, &zeros(2), None).map(|d| d.fields()[1][1] == poly("x1^2 + tau1^4*x2^2", &v)));
    let hat = frame(&[&["1", "0"], &["0", "x1^2"]]);
    exact(c, "sum of squares nilpotentization", nilpotentize(&sos, &zeros(2)).map(|n| n.frame == hat));
    let tangency = frame(&[&["1", "0"], &["0", "x1^2-x2"]]);
    exact(
        c,
        "tangency dilation",
        dilate_frame(&tangency, &zeros(2), Some(&[1, 3])).map(|d| d.fields()[1][1] == poly("x1^2 - tau1*x2", &v)),
    );
    exact(c, "tangency nilpotentization", nilpotentize(&tangency, &zeros(2)).map(|n| n.frame == hat));
    let heis = frame(&[&["1", "0", "0"], &["0", "1", "x1"]]);
    exact(c, "Heisenberg fixed point", nilpotentize(&heis, &zeros(3)).map(|n| n.frame == heis));
    let vars4 = ["x1", "x2", "tau1", "tau2"];
    let formula = poly("tau2^2*x1^2 + tau1^4 + 2*tau1^4*tau2*x2 + tau1^4*tau2^2*x2^2", &vars4);
    let stage = |p: &[i64], w: &[u32], s: Scale| Stage { point: point(p), weights: Some(w.to_vec()), scale: s };
    let symbolic = [stage(&[0, 0], &[1, 3], Scale::Symbolic), stage(&[0, 1], &[1, 1], Scale::Symbolic)];
    exact(c, "double dilation formula", multi_dilate(&sos, &symbolic).map(|d| d.fields()[1][1] == formula));
    let (t1, t2) = (rat(1, 2), rat(1, 3));
    let numeric = [stage(&[0, 0], &[1, 3], Scale::Value(t1.clone())), stage(&[0, 1], &[1, 1], Scale::Value(t2.clone()))];
    let want = formula.substitute(3, &t2).substitute(2, &t1);
    exact(
        c,
        "double dilation at (1/2, 1/3)",
        multi_dilate(&sos, &numeric).and_then(|d| d.to_frame()).map(|f| f.fields()[1].components()[1] == want),
    );
    let zero = [
        Stage { point: zeros(2), weights: None, scale: Scale::Value(int(0)) },
        Stage { point: point(&[0, 1]), weights: None, scale: Scale::Value(int(0)) },
    ];
    exact(c, "double dilation at (0, 0)", multi_dilate(&sos, &zero).and_then(|d| d.to_frame()).map(|f| f == hat));
}

fn flat_terms(c: &mut Vec<Check>) {
    let times = geometric(1e-10, 1e-4, 12);
    for k in [1, 2] {
        let profile = sample_profile(|s: f64| s.powi(2 * k), 200_000, 40_000, 1e-12);
        let fit = times
            .iter()
            .map(|&t| flat_term_weyl(&profile, t).map(|w| (t, w)))
            .collect::<srweyl_core::Result<Vec<_>>>()
            .and_then(|s| fit_exponents(&s));
        let want = 1.5 - 1.0 / (2 * k) as f64;
        measure(c, &format!("s^{} exponent", 2 * k), fit, |f| within(f.gamma, want, 0.05));
    }
    let profile = sample_profile(|s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 }, 200_000, 40_000, 1e-12);
    let ratios = [1e-8, 1e-6]
        .iter()
        .map(|&t| flat_term_weyl(&profile, t).map(|w| w * t.powf(1.5) * (-t.ln())))
        .collect::<srweyl_core::Result<Vec<_>>>();
    measure(c, "exp(-1/s) ratio drift", ratios, |r| {
        let drift = (r[1] / r[0] - 1.0).abs();
        (drift < 0.10, format!("t^(3/2)|ln t| W = {:.4} at 1e-8, {:.4} at 1e-6; drift {drift:.3} (limit 0.10)", r[0], r[1]))
    });
}
