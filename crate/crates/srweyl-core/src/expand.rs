//! Small-`x` expansions of the single-layer integrals
//! `I_k^j[G](x) = int_x^1 tau^k G(tau, x/tau) ln^j(tau/x) d tau`
//! and of the nested integrals `I_{k_1..k_p}[G](x)`, with quadrature oracles.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::numeric::{integrate, least_squares, QuadOptions};
use crate::polyfield::{int, to_f64, MultiPoly, Rational};

/// A function of `(tau_1, .., tau_p, eps)`, polynomial or a black box.
#[derive(Clone, Copy)]
pub enum GFunction<'a> {
    /// Exact polynomial; partial derivatives at the origin are exact.
    Poly(&'a MultiPoly),
    /// Black-box evaluator with finite-difference derivative access.
    BlackBox(BlackBox<'a>),
}

/// A black-box smooth function and the number of derivatives it admits.
#[derive(Clone, Copy)]
pub struct BlackBox<'a> {
    /// Evaluator on `(tau_1, .., tau_p, eps)`.
    pub eval: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    /// Declared smoothness order.
    pub smoothness: u32,
    /// Length scale for finite-difference steps.
    pub scale: f64,
}

impl GFunction<'_> {
    /// Point evaluation.
    pub fn eval(&self, p: &[f64]) -> f64 {
        match self {
            GFunction::Poly(g) => g.eval_f64(p),
            GFunction::BlackBox(b) => (b.eval)(p),
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            GFunction::Poly(g) => Some(g.dim()),
            GFunction::BlackBox(_) => None,
        }
    }
}

/// A coefficient, exact when it comes from polynomial data.
#[derive(Clone, Debug, PartialEq)]
pub enum Coefficient {
    /// Exact rational value.
    Exact(Rational),
    /// Floating value from quadrature or finite differences.
    Approx(f64),
}

impl Coefficient {
    /// Floating value.
    pub fn to_f64(&self) -> f64 {
        match self {
            Coefficient::Exact(r) => to_f64(r),
            Coefficient::Approx(v) => *v,
        }
    }
}

/// One term `coefficient * x^power * ln^log_power(1/x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionTerm {
    /// Power of `x`.
    pub power: i64,
    /// Power of `ln(1/x)`.
    pub log_power: u32,
    /// Coefficient.
    pub coefficient: Coefficient,
}

/// Truncated expansion; the remainder is `O(x^order ln^{j+1}(1/x))`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionResult {
    /// Terms sorted by `(power, -log_power)`, one per pair.
    pub terms: Vec<ExpansionTerm>,
    /// Remainder exponent.
    pub order: i64,
}

impl ExpansionResult {
    /// Sum of the terms at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let l = libm::log(1.0 / x);
        self.terms
            .iter()
            .map(|t| t.coefficient.to_f64() * libm::pow(x, t.power as f64) * libm::pow(l, t.log_power as f64))
            .sum()
    }

    /// Coefficient of `x^power ln^log_power(1/x)`, zero when absent.
    pub fn coefficient(&self, power: i64, log_power: u32) -> f64 {
        self.terms
            .iter()
            .find(|t| t.power == power && t.log_power == log_power)
            .map_or(0.0, |t| t.coefficient.to_f64())
    }

    fn from_exact(map: BTreeMap<(i64, u32), Rational>, order: i64) -> Self {
        let mut terms: Vec<ExpansionTerm> = map
            .into_iter()
            .filter(|(k, c)| !c.is_zero() && k.0 <= order)
            .map(|((power, log_power), c)| ExpansionTerm { power, log_power, coefficient: Coefficient::Exact(c) })
            .collect();
        sort_terms(&mut terms);
        ExpansionResult { terms, order }
    }
}

fn sort_terms(terms: &mut [ExpansionTerm]) {
    terms.sort_by(|a, b| a.power.cmp(&b.power).then(b.log_power.cmp(&a.log_power)));
}

fn factorial(n: u32) -> Rational {
    (1..=n).fold(Rational::one(), |acc, i| acc * int(i as i64))
}

fn binomial(n: u32, r: u32) -> Rational {
    factorial(n) / (factorial(r) * factorial(n - r))
}

fn rpow(b: &Rational, e: u32) -> Rational {
    (0..e).fold(Rational::one(), |acc, _| acc * b)
}

fn add_into(map: &mut BTreeMap<(i64, u32), Rational>, key: (i64, u32), c: Rational) {
    let e = map.entry(key).or_insert_with(Rational::zero);
    *e += c;
}

/// `c x^q int_x^1 tau^{k+p-q} ln^j(tau/x) d tau`, the exact single-layer
/// integral of the monomial `c tau^p eps^q`.
fn single_monomial(k: i64, j: u32, p: i64, q: i64, c: &Rational, map: &mut BTreeMap<(i64, u32), Rational>) {
    let b = k + p - q + 1;
    if b == 0 {
        add_into(map, (q, j + 1), c / int(j as i64 + 1));
        return;
    }
    let br = int(b);
    let jf = factorial(j);
    for r in 0..=j {
        let sign = if r % 2 == 0 { int(1) } else { int(-1) };
        let v = c * sign * &jf / factorial(j - r) / rpow(&br, r + 1);
        add_into(map, (q, j - r), v);
    }
    let sign = if j % 2 == 0 { int(1) } else { int(-1) };
    add_into(map, (k + p + 1, 0), -(c * sign * jf / rpow(&br, j + 1)));
}

fn check_dim(g: &MultiPoly, want: usize) -> Result<()> {
    if g.dim() != want {
        return Err(Error::DimensionMismatch { expected: want, found: g.dim() });
    }
    Ok(())
}

/// Exact full expansion of `I_k^j[G]` for polynomial `G(tau, eps)`.
pub fn expand_single_exact(g: &MultiPoly, k: i64, j: u32) -> Result<ExpansionResult> {
    check_dim(g, 2)?;
    let mut map = BTreeMap::new();
    for (e, c) in g.terms() {
        single_monomial(k, j, e[0] as i64, e[1] as i64, c, &mut map);
    }
    Ok(ExpansionResult::from_exact(map, i64::MAX))
}

/// Expansion of `I_k^j[G]` up to `x^order`. Exact and complete for polynomial
/// `G`; for a black box, the terms given by the closed formulas of the three
/// regimes `k >= 0`, `k = -1`, `k <= -2`, with quadrature for the integrals.
pub fn expand_single(g: GFunction<'_>, k: i64, j: u32, order: i64) -> Result<ExpansionResult> {
    match g {
        GFunction::Poly(p) => {
            let full = expand_single_exact(p, k, j)?;
            let terms = full.terms.into_iter().filter(|t| t.power <= order).collect();
            Ok(ExpansionResult { terms, order })
        }
        GFunction::BlackBox(b) => expand_single_black_box(&b, k, j, order),
    }
}

/// `i`-th derivative at `x0` by central differences with two Richardson levels.
pub fn fd_derivative<F: Fn(f64) -> f64>(f: F, x0: f64, n: u32, scale: f64) -> f64 {
    if n == 0 {
        return f(x0);
    }
    let h0 = scale * libm::pow(10.0, -5.0 / n as f64);
    let stencil = |h: f64| {
        let mut acc = 0.0;
        let mut c = 1.0;
        for m in 0..=n {
            let off = (n as f64 / 2.0 - m as f64) * h;
            acc += c * f(x0 + off);
            c = -c * (n - m) as f64 / (m + 1) as f64;
        }
        acc / libm::pow(h, n as f64)
    };
    let d0 = stencil(h0);
    let d1 = stencil(h0 / 2.0);
    let d2 = stencil(h0 / 4.0);
    let r1 = (4.0 * d1 - d0) / 3.0;
    let r2 = (4.0 * d2 - d1) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

const COEF_OPTS: QuadOptions = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-10, max_panels: 4000 };

fn expand_single_black_box(b: &BlackBox<'_>, k: i64, j: u32, order: i64) -> Result<ExpansionResult> {
    let g = |t: f64, e: f64| (b.eval)(&[t, e]);
    let needed = if k >= 0 { k as u32 + 1 } else if k == -1 { 1 } else { (-k - 1) as u32 };
    if b.smoothness < needed {
        return Err(Error::InsufficientSmoothness { needed, declared: b.smoothness });
    }
    let mut terms = Vec::new();
    let mut push = |power: i64, log_power: u32, v: f64| {
        if power <= order {
            terms.push(ExpansionTerm { power, log_power, coefficient: Coefficient::Approx(v) });
        }
    };
    let jf = j as i32;
    let binom = |n: i32, r: i32| to_f64(&binomial(n as u32, r as u32));
    let lnpow = |v: f64, e: i32| libm::pow(libm::log(v), e as f64);
    let reach;
    if k >= 0 {
        // sum_i x^i / i! int tau^{k-i} d2^i G(tau, 0) ln^j(tau/x), expanded in ln(1/x)
        for i in 0..=k {
            let ifac = to_f64(&factorial(i as u32));
            for r in 0..=jf {
                let v = integrate(
                    |t| {
                        libm::pow(t, (k - i) as f64) * fd_derivative(|e| g(t, e), 0.0, i as u32, b.scale) * lnpow(t, jf - r)
                    },
                    0.0,
                    1.0,
                    COEF_OPTS,
                )?;
                push(i, r as u32, binom(jf, r) * v / ifac);
            }
        }
        let top = fd_derivative(|e| g(0.0, e), 0.0, k as u32 + 1, b.scale);
        push(k + 1, j + 1, top / ((j + 1) as f64 * to_f64(&factorial(k as u32 + 1))));
        reach = k + 1;
    } else if k == -1 {
        let g00 = g(0.0, 0.0);
        push(0, j + 1, g00 / (j + 1) as f64);
        let eps_part =
            integrate(|e| (g(0.0, e) - g00) / e * lnpow(1.0 / e, jf), 0.0, 1.0, COEF_OPTS)?;
        for r in 0..=jf {
            let tau_part = integrate(|t| (g(t, 0.0) - g00) / t * lnpow(t, jf - r), 0.0, 1.0, COEF_OPTS)?;
            let v = binom(jf, r) * tau_part + if r == 0 { eps_part } else { 0.0 };
            push(0, r as u32, v);
        }
        reach = 1;
    } else {
        let top_order = (-k - 2) as u32;
        for i in 0..=top_order {
            let ifac = to_f64(&factorial(i));
            let v = integrate(
                |e| {
                    libm::pow(e, (top_order - i) as f64) * fd_derivative(|t| g(t, e), 0.0, i, b.scale) * lnpow(1.0 / e, jf)
                },
                0.0,
                1.0,
                COEF_OPTS,
            )?;
            push(k + 1 + i as i64, 0, v / ifac);
        }
        let n = (-k - 1) as u32;
        let top = fd_derivative(|t| g(t, 0.0), 0.0, n, b.scale);
        push(0, j + 1, top / ((j + 1) as f64 * to_f64(&factorial(n))));
        reach = 0;
    }
    sort_terms(&mut terms);
    Ok(ExpansionResult { terms, order: order.min(reach) })
}

/// `F_{j+1}^{(i)}(0)` from the closed formula in terms of the Taylor
/// coefficients of a polynomial `G` at the origin.
pub fn top_log_derivative(g: &MultiPoly, k: i64, j: u32, i: u32) -> Result<Rational> {
    check_dim(g, 2)?;
    let (n1, n2, m) = if k >= 0 {
        (i, k as u32 + 1 + i, k as u32 + 1 + 2 * i)
    } else {
        ((-k - 1) as u32 + i, i, (-k - 1) as u32 + 2 * i)
    };
    // d1^a d2^b G(0,0) = a! b! [tau^a eps^b] G
    let deriv = g.coefficient(&[n1, n2]) * factorial(n1) * factorial(n2);
    Ok(deriv * binomial(m, i) / (factorial(m) * int(j as i64 + 1)))
}

/// Quadrature of `I_k^j[G](x)` in the variable `u = ln(tau/x)`.
pub fn single_layer_oracle(g: GFunction<'_>, k: i64, j: u32, x: f64, rel_tol: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Invalid("x must lie in (0, 1)".into()));
    }
    let l = libm::log(1.0 / x);
    let opts = QuadOptions { abs_tol: 1e-300, rel_tol, max_panels: 20_000 };
    integrate(
        |u| {
            let tau = x * libm::exp(u);
            libm::pow(tau, (k + 1) as f64) * g.eval(&[tau, libm::exp(-u)]) * libm::pow(u, j as f64)
        },
        0.0,
        l,
        opts,
    )
}

/// A nested integral `I_{k_1..k_p}[G]`.
#[derive(Clone, Copy)]
pub struct NestedSpec<'a> {
    /// The exponents `k_1..k_p`.
    pub klist: &'a [i64],
    /// The function of `(tau_1, .., tau_p, eps)`.
    pub g: GFunction<'a>,
}

impl NestedSpec<'_> {
    fn validate(&self) -> Result<()> {
        if self.klist.is_empty() {
            return Err(Error::Invalid("nested integrals need at least one layer".into()));
        }
        if let Some(d) = self.g.dim() {
            if d != self.klist.len() + 1 {
                return Err(Error::DimensionMismatch { expected: self.klist.len() + 1, found: d });
            }
        }
        Ok(())
    }
}

/// Which variables the leading coefficient concentrates on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Concentration {
    /// The coefficient depends only on `G` at `eps = 0`.
    pub epsilon: bool,
    /// The coefficient concentrates on some `tau_i = 0`.
    pub tau: bool,
    /// Indices `i` (1-based) with concentration on `tau_i = 0`.
    pub tau_indices: Vec<usize>,
    /// Smallest such index.
    pub minimal_tau_index: Option<usize>,
}

/// How a leading coefficient was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientSource {
    /// Exact rational arithmetic on polynomial data.
    Exact,
    /// Closed-form integral evaluated by quadrature.
    Quadrature,
    /// Fitted from the oracle.
    Numeric,
}

/// Leading term `C(G) x^power |ln x|^log_power` of a nested integral.
#[derive(Clone, Debug, PartialEq)]
pub struct NestedLeading {
    /// `j_1 + 1`, with `j_1 = min(k_1, .., k_p, -1)`.
    pub power: i64,
    /// `m_1 - 1`, where `m_1` counts the `k`'s (with `k_{p+1} = -1`) attaining `j_1`.
    pub log_power: u32,
    /// `C(G)`.
    pub coefficient: Coefficient,
    /// Provenance of the coefficient.
    pub source: CoefficientSource,
    /// Concentration report.
    pub concentration: Concentration,
}

/// Leading exponent, log power and concentration flags of a k-list.
pub fn nested_structure(klist: &[i64]) -> (i64, u32, Concentration) {
    let j1 = klist.iter().copied().chain(core::iter::once(-1)).min().unwrap_or(-1);
    let m1 = klist.iter().filter(|&&k| k == j1).count() as u32 + u32::from(j1 == -1);
    let epsilon = klist.iter().all(|&k| k >= -1);
    let tau = klist.iter().any(|&k| k < 0);
    let tau_indices: Vec<usize> =
        if tau { klist.iter().enumerate().filter(|(_, &k)| k == j1).map(|(i, _)| i + 1).collect() } else { Vec::new() };
    let minimal_tau_index = tau_indices.first().copied();
    (j1 + 1, m1 - 1, Concentration { epsilon, tau, tau_indices, minimal_tau_index })
}

/// Taylor coefficients up to degree `deg` of `prod (d + h)^{-m}` over `(d, m)`.
fn inverse_power_series(factors: &[(Rational, u32)], deg: usize) -> Vec<Rational> {
    let mut acc = vec![Rational::zero(); deg + 1];
    acc[0] = Rational::one();
    for (d, m) in factors {
        // (d + h)^{-m} = sum_n (-1)^n C(m+n-1, n) d^{-m-n} h^n
        let inv = Rational::one() / d;
        let series: Vec<Rational> = (0..=deg)
            .map(|n| {
                let sign = if n % 2 == 0 { int(1) } else { int(-1) };
                let c = binomial(*m + n as u32 - 1, n as u32);
                sign * c * rpow(&inv, *m + n as u32)
            })
            .collect();
        let mut next = vec![Rational::zero(); deg + 1];
        for (i, a) in acc.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (n, s) in series.iter().enumerate().take(deg + 1 - i) {
                next[i + n] += a * s;
            }
        }
        acc = next;
    }
    acc
}

/// Exact expansion of `I_{k_1..k_p}[1](x)`, as a map `(power, log power) -> coefficient`,
/// from the residues of `e^{zL} prod 1/(z + k_i + 1)` (with `k_{p+1} = -1`).
fn nested_constant_map(klist: &[i64]) -> BTreeMap<(i64, u32), Rational> {
    let mut mult: BTreeMap<i64, u32> = BTreeMap::new();
    for &k in klist {
        *mult.entry(k + 1).or_insert(0) += 1;
    }
    *mult.entry(0).or_insert(0) += 1;
    let mut out = BTreeMap::new();
    for (&c, &m) in &mult {
        let others: Vec<(Rational, u32)> =
            mult.iter().filter(|(&d, _)| d != c).map(|(&d, &md)| (int(d - c), md)).collect();
        let series = inverse_power_series(&others, m as usize - 1);
        for r in 0..m {
            let coef = &series[(m - 1 - r) as usize] / factorial(r);
            if !coef.is_zero() {
                add_into(&mut out, (c, r), coef);
            }
        }
    }
    out
}

/// Exact full expansion of `I_{k_1..k_p}[G]` for polynomial `G`: each monomial
/// `tau^beta eps^q` becomes `x^q I_{k + beta - q}[1]`.
pub fn expand_nested_exact(klist: &[i64], g: &MultiPoly) -> Result<ExpansionResult> {
    NestedSpec { klist, g: GFunction::Poly(g) }.validate()?;
    let p = klist.len();
    let mut map = BTreeMap::new();
    for (e, c) in g.terms() {
        let q = e[p] as i64;
        let shifted: Vec<i64> = klist.iter().zip(e).map(|(&k, &b)| k + b as i64 - q).collect();
        for ((power, lp), v) in nested_constant_map(&shifted) {
            add_into(&mut map, (power + q, lp), v * c);
        }
    }
    Ok(ExpansionResult::from_exact(map, i64::MAX))
}

/// Iterated single-layer integration of `I_{k_1..k_p}[1]`, innermost layer first,
/// kept as an independent check of the residue bookkeeping.
pub fn nested_constant_iterated(klist: &[i64]) -> BTreeMap<(i64, u32), Rational> {
    // E(y) = sum c y^a ln^r(1/y); one layer maps it to int_y^1 tau^k E(y/tau) d tau,
    // and y^a int_y^1 tau^{k-a} ln^r(tau/y) d tau is a single-layer monomial integral.
    let mut cur: BTreeMap<(i64, u32), Rational> = BTreeMap::new();
    cur.insert((0, 0), Rational::one());
    for &k in klist.iter().rev() {
        let mut next = BTreeMap::new();
        for (&(a, r), c) in &cur {
            let mut layer = BTreeMap::new();
            single_monomial(k - a, r, 0, 0, c, &mut layer);
            for ((pw, lp), v) in layer {
                add_into(&mut next, (pw + a, lp), v);
            }
        }
        next.retain(|_, v: &mut Rational| !v.is_zero());
        cur = next;
    }
    cur
}

fn integrate_unit(f: impl Fn(f64) -> f64) -> Result<f64> {
    integrate(f, 0.0, 1.0, COEF_OPTS)
}

fn integrate_unit_square(f: impl Fn(f64, f64) -> f64) -> Result<f64> {
    let inner_opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-12, max_panels: 4000 };
    let mut failure = None;
    let v = integrate(
        |a| match integrate(|b| f(a, b), 0.0, 1.0, inner_opts) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        },
        0.0,
        1.0,
        COEF_OPTS,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Leading term of `I_{k_1..k_p}[G]`. Exact for polynomial `G` at every depth;
/// for black-box `G`, from the closed formulas for `p <= 2` and for equal negative
/// exponents, and `UnsupportedShape` otherwise (see [`fit_nested_coefficient`]).
pub fn expand_nested_leading(spec: NestedSpec<'_>) -> Result<NestedLeading> {
    spec.validate()?;
    let (power, log_power, concentration) = nested_structure(spec.klist);
    if let GFunction::Poly(g) = spec.g {
        let full = expand_nested_exact(spec.klist, g)?;
        let c = full
            .terms
            .iter()
            .find(|t| t.power == power && t.log_power == log_power)
            .map_or(Rational::zero(), |t| match &t.coefficient {
                Coefficient::Exact(r) => r.clone(),
                Coefficient::Approx(_) => unreachable!("exact expansion"),
            });
        return Ok(NestedLeading {
            power,
            log_power,
            coefficient: Coefficient::Exact(c),
            source: CoefficientSource::Exact,
            concentration,
        });
    }
    let g = spec.g;
    let ks = spec.klist;
    let p = ks.len();
    let zeros = |last: f64| {
        let mut v = vec![0.0; p + 1];
        v[p] = last;
        v
    };
    let value = if ks.iter().all(|&k| k == ks[0]) && ks[0] < 0 {
        let pf = to_f64(&factorial(p as u32 - 1));
        if ks[0] == -1 {
            g.eval(&zeros(0.0)) / (pf * p as f64)
        } else {
            let e = (-ks[0] - 2) as f64;
            integrate_unit(|eps| libm::pow(eps, e) * g.eval(&zeros(eps)))? / pf
        }
    } else if p == 1 {
        let k = ks[0];
        if k >= 0 {
            integrate_unit(|t| libm::pow(t, k as f64) * g.eval(&[t, 0.0]))?
        } else {
            integrate_unit(|e| libm::pow(e, (-k - 2) as f64) * g.eval(&[0.0, e]))?
        }
    } else if p == 2 {
        let (k1, k2) = (ks[0], ks[1]);
        let pw = |v: f64, e: i64| libm::pow(v, e as f64);
        if k2 >= 0 && k1 >= 0 {
            integrate_unit_square(|a, b| pw(a, k1) * pw(b, k2) * g.eval(&[a, b, 0.0]))?
        } else if k1 == -1 && k2 >= 0 {
            integrate_unit(|b| pw(b, k2) * g.eval(&[0.0, b, 0.0]))?
        } else if k1 >= 0 && k2 == -1 {
            integrate_unit(|a| pw(a, k1) * g.eval(&[a, 0.0, 0.0]))?
        } else if k1 <= -2 && k1 < k2 {
            // tau_1 ~ x: substitute tau_1 = x/u, then eps = u/tau_2
            integrate_unit_square(|e, b| pw(e, -k1 - 2) * pw(b, k2 - k1 - 1) * g.eval(&[0.0, b, e]))?
        } else if k2 <= -2 && k1 > k2 {
            integrate_unit_square(|a, e| pw(a, k1 - k2 - 1) * pw(e, -k2 - 2) * g.eval(&[a, 0.0, e]))?
        } else {
            return Err(Error::UnsupportedShape(format!("no closed form for k = ({k1}, {k2})")));
        }
    } else {
        return Err(Error::UnsupportedShape(format!(
            "no closed-form coefficient for a black-box function with k = {ks:?}"
        )));
    };
    Ok(NestedLeading {
        power,
        log_power,
        coefficient: Coefficient::Approx(value),
        source: CoefficientSource::Quadrature,
        concentration,
    })
}

/// Leading coefficient fitted from oracle values: least squares of
/// `I(x) / x^power` on `1, L, .., L^log_power` over `xs`.
pub fn fit_nested_coefficient(spec: NestedSpec<'_>, xs: &[f64]) -> Result<NestedLeading> {
    spec.validate()?;
    let (power, log_power, concentration) = nested_structure(spec.klist);
    if xs.len() <= log_power as usize + 1 {
        return Err(Error::DegenerateFit("need more sample points than unknowns".into()));
    }
    let mut rows = Vec::with_capacity(xs.len());
    let mut y = Vec::with_capacity(xs.len());
    for &x in xs {
        let l = libm::log(1.0 / x);
        rows.push((0..=log_power).map(|r| libm::pow(l, r as f64)).collect());
        y.push(quadrature_oracle(spec, x)? / libm::pow(x, power as f64));
    }
    let fit = least_squares(&rows, &y, None)?;
    Ok(NestedLeading {
        power,
        log_power,
        coefficient: Coefficient::Approx(fit.coef[log_power as usize]),
        source: CoefficientSource::Numeric,
        concentration,
    })
}

/// Nested adaptive quadrature of the literal iterated integral at relative tolerance `1e-9`.
pub fn quadrature_oracle(spec: NestedSpec<'_>, x: f64) -> Result<f64> {
    quadrature_oracle_with(spec, x, 1e-9)
}

/// [`quadrature_oracle`] at a chosen relative tolerance. Each layer is integrated in
/// `s = ln(1/tau)`, where the region becomes `s_i >= 0`, `sum s_i <= ln(1/x)`.
pub fn quadrature_oracle_with(spec: NestedSpec<'_>, x: f64, rel_tol: f64) -> Result<f64> {
    spec.validate()?;
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Invalid("x must lie in (0, 1)".into()));
    }
    let mut point = vec![0.0; spec.klist.len() + 1];
    nested_level(&spec, 0, libm::log(1.0 / x), &mut point, rel_tol)
}

fn nested_level(spec: &NestedSpec<'_>, depth: usize, budget: f64, point: &mut Vec<f64>, rel_tol: f64) -> Result<f64> {
    let p = spec.klist.len();
    if depth == p {
        point[p] = libm::exp(-budget);
        return Ok(spec.g.eval(point));
    }
    // inner layers are integrated more tightly so the outer error estimate stays clean
    let tol = rel_tol * libm::pow(0.1, (p - 1 - depth).min(3) as f64);
    let opts = QuadOptions { abs_tol: 1e-300, rel_tol: tol.max(1e-14), max_panels: 5000 };
    let k = spec.klist[depth];
    let mut failure = None;
    let mut scratch = point.clone();
    let v = integrate(
        |s| {
            scratch[depth] = libm::exp(-s);
            match nested_level(spec, depth + 1, budget - s, &mut scratch, rel_tol) {
                Ok(inner) => libm::exp(-((k + 1) as f64) * s) * inner,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        0.0,
        budget,
        opts,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyfield::rat;

    fn poly(src: &str, vars: &[&str]) -> MultiPoly {
        MultiPoly::parse(src, vars).unwrap()
    }

    const TE: [&str; 2] = ["tau", "eps"];

    #[test]
    fn constant_at_minus_one() {
        let g = MultiPoly::one(2);
        let r = expand_single(GFunction::Poly(&g), -1, 0, 5).unwrap();
        assert_eq!(r.terms, vec![ExpansionTerm { power: 0, log_power: 1, coefficient: Coefficient::Exact(int(1)) }]);
    }

    #[test]
    fn eps_at_zero() {
        let g = poly("eps", &TE);
        let r = expand_single(GFunction::Poly(&g), 0, 0, 5).unwrap();
        assert_eq!(r.coefficient(1, 1), 1.0);
        assert_eq!(top_log_derivative(&g, 0, 0, 0).unwrap(), int(1));
    }

    #[test]
    fn monomial_closed_form() {
        // x^3 int_x^1 tau^{-3} = (x - x^3) / 2
        let g = poly("tau^2*eps^3", &TE);
        let r = expand_single_exact(&g, -2, 0).unwrap();
        assert_eq!(
            r.terms,
            vec![
                ExpansionTerm { power: 1, log_power: 0, coefficient: Coefficient::Exact(rat(1, 2)) },
                ExpansionTerm { power: 3, log_power: 0, coefficient: Coefficient::Exact(rat(-1, 2)) },
            ]
        );
    }

    #[test]
    fn top_log_parity_for_even_functions() {
        let g = poly("eps^2 + tau*eps^2 + 3*tau^3*eps^4 - tau^2", &TE);
        for j in 0..3 {
            let r = expand_single_exact(&g, 0, j).unwrap();
            for i in 0..6u32 {
                let c = r.coefficient(1 + i as i64, j + 1);
                let f = to_f64(&top_log_derivative(&g, 0, j, i).unwrap());
                assert_eq!(c, f, "i = {i}");
                if i % 2 == 0 {
                    assert_eq!(c, 0.0);
                }
            }
        }
    }

    #[test]
    fn black_box_matches_polynomial() {
        let src = "1 + 2*tau - eps + tau*eps + 3*eps^2 - tau^2*eps + eps^3";
        let g = poly(src, &TE);
        let f = |p: &[f64]| g.eval_f64(p);
        for k in [-3i64, -1, 0, 2] {
            let b = GFunction::BlackBox(BlackBox { eval: &f, smoothness: 6, scale: 1.0 });
            for j in 0..=2 {
                let exact = expand_single_exact(&g, k, j).unwrap();
                let approx = expand_single(b, k, j, 10).unwrap();
                for t in &approx.terms {
                    let e = exact.coefficient(t.power, t.log_power);
                    assert!((t.coefficient.to_f64() - e).abs() < 1e-6, "k={k} j={j} {t:?} vs {e}");
                }
            }
        }
        let b = GFunction::BlackBox(BlackBox { eval: &f, smoothness: 1, scale: 1.0 });
        assert_eq!(expand_single(b, 2, 0, 5), Err(Error::InsufficientSmoothness { needed: 3, declared: 1 }));
    }

    #[test]
    fn single_oracle_agrees() {
        let g = poly("1 + tau*eps - 2*eps^2 + tau^3", &TE);
        for k in [-3i64, -1, 1] {
            for j in 0..=2 {
                let x = 1e-3;
                let e = expand_single_exact(&g, k, j).unwrap().eval(x);
                let o = single_layer_oracle(GFunction::Poly(&g), k, j, x, 1e-12).unwrap();
                assert!((e - o).abs() <= 1e-10 * e.abs().max(1.0), "{k} {j} {e} {o}");
            }
        }
    }

    #[test]
    fn nested_goldens() {
        let one3 = MultiPoly::one(3);
        let l = expand_nested_leading(NestedSpec { klist: &[-1, -1], g: GFunction::Poly(&one3) }).unwrap();
        assert_eq!((l.power, l.log_power, l.coefficient), (0, 2, Coefficient::Exact(rat(1, 2))));
        let one2 = MultiPoly::one(2);
        let l = expand_nested_leading(NestedSpec { klist: &[-2], g: GFunction::Poly(&one2) }).unwrap();
        assert_eq!((l.power, l.log_power, l.coefficient), (-1, 0, Coefficient::Exact(int(1))));
        for p in 1..=4usize {
            for j1 in [-2i64, -3] {
                let one = MultiPoly::one(p + 1);
                let ks = vec![j1; p];
                let l = expand_nested_leading(NestedSpec { klist: &ks, g: GFunction::Poly(&one) }).unwrap();
                let want = Rational::one() / (factorial(p as u32 - 1) * int(-j1 - 1));
                assert_eq!((l.power, l.log_power), (j1 + 1, p as u32 - 1));
                assert_eq!(l.coefficient, Coefficient::Exact(want));
            }
        }
    }

    #[test]
    fn residues_match_iterated_integration() {
        let lists: [&[i64]; 6] = [&[0, -2], &[-1, -1], &[-2, -2, 1], &[3, -1, -4], &[-1, 0, -1], &[2, 2, -3, -3]];
        for ks in lists {
            let mut want = nested_constant_iterated(ks);
            want.retain(|_, v| !v.is_zero());
            let mut got = nested_constant_map(ks);
            got.retain(|_, v| !v.is_zero());
            assert_eq!(got, want, "{ks:?}");
        }
    }

    #[test]
    fn nested_oracle_agrees() {
        let g = poly("1 + t1*e - t2^2 + 2*t1*t2", &["t1", "t2", "e"]);
        for ks in [[-1i64, -1], [0, -2], [-3, 1]] {
            let spec = NestedSpec { klist: &ks, g: GFunction::Poly(&g) };
            let x = 1e-3;
            let e = expand_nested_exact(&ks, &g).unwrap().eval(x);
            let o = quadrature_oracle(spec, x).unwrap();
            assert!((e - o).abs() <= 1e-8 * e.abs(), "{ks:?} {e} {o}");
        }
    }

    #[test]
    fn black_box_cells_match_exact() {
        let g = poly("2 + t1 + 3*t2*e - e^2 + t1*t2 + e^3", &["t1", "t2", "e"]);
        let f = |p: &[f64]| g.eval_f64(p);
        let bb = GFunction::BlackBox(BlackBox { eval: &f, smoothness: 8, scale: 1.0 });
        for ks in [[1i64, 2], [-1, 1], [-3, 0], [2, -1], [-1, -1], [-3, -1], [0, -3], [-2, -2], [-4, -2]] {
            let exact = expand_nested_leading(NestedSpec { klist: &ks, g: GFunction::Poly(&g) }).unwrap();
            let approx = expand_nested_leading(NestedSpec { klist: &ks, g: bb }).unwrap();
            assert_eq!((exact.power, exact.log_power), (approx.power, approx.log_power));
            let (a, b) = (approx.coefficient.to_f64(), exact.coefficient.to_f64());
            assert!((a - b).abs() < 1e-8 * b.abs().max(1.0), "{ks:?}: {a} vs {b}");
        }
        assert!(matches!(
            expand_nested_leading(NestedSpec { klist: &[0, -1, 2], g: bb }),
            Err(Error::UnsupportedShape(_))
        ));
    }

    #[test]
    fn concentration_flags() {
        let (_, _, c) = nested_structure(&[0, 3]);
        assert!(c.epsilon && !c.tau);
        let (_, _, c) = nested_structure(&[-1, 2]);
        assert!(c.epsilon && c.tau && c.tau_indices == vec![1]);
        let (_, _, c) = nested_structure(&[1, -3]);
        assert!(!c.epsilon && c.tau && c.minimal_tau_index == Some(2));
    }

    #[test]
    fn fd_is_accurate() {
        for n in 0..=5 {
            let d = fd_derivative(libm::exp, 0.3, n, 1.0);
            assert!((d - libm::exp(0.3)).abs() < 1e-6, "{n} {d}");
        }
    }
}
