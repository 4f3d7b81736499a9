//! Exact multivariate polynomials over the rationals, polynomial vector fields,
//! Lie brackets and left-nested bracket words.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational scalar.
pub type Rational = BigRational;

/// Builds the rational `num/den`.
///
/// # Panics
/// Panics if `den` is zero.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Builds the integer `v` as a rational.
pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Parses `"p/q"`, `"p"` or a plain decimal such as `"-0.25"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Invalid(format!("not a rational: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((ip, fp)) = s.split_once('.') {
        let neg = ip.trim_start().starts_with('-');
        let ip = ip.trim_start_matches(['-', '+']);
        if fp.is_empty() || !fp.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let whole: BigInt = if ip.is_empty() { BigInt::zero() } else { ip.parse().map_err(|_| bad())? };
        let frac: BigInt = fp.parse().map_err(|_| bad())?;
        let den = num_traits::pow(BigInt::from(10u32), fp.len());
        let v = Rational::new(whole * &den + frac, den);
        return Ok(if neg { -v } else { v });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

/// Nearest `f64` to an exact rational.
pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Huge numerator and denominator: scale both down before dividing.
        let n = r.numer().bits() as i64;
        let d = r.denom().bits() as i64;
        let shift = (n.max(d) - 1000).max(0) as usize;
        let nn = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let dd = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        nn / dd
    })
}

pub(crate) fn powi(x: f64, e: u32) -> f64 {
    let mut acc = 1.0;
    let mut base = x;
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

fn binomial(n: u32, k: u32) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// A polynomial in `dim` variables with exact rational coefficients.
///
/// The term map never stores a zero coefficient, so structural equality is
/// polynomial equality.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiPoly {
    dim: usize,
    terms: BTreeMap<Vec<u32>, Rational>,
}

impl MultiPoly {
    /// The zero polynomial in `dim` variables.
    pub fn zero(dim: usize) -> Self {
        MultiPoly { dim, terms: BTreeMap::new() }
    }

    /// The constant polynomial `c`.
    pub fn constant(dim: usize, c: Rational) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    /// The constant polynomial 1.
    pub fn one(dim: usize) -> Self {
        Self::constant(dim, Rational::one())
    }

    /// The coordinate function `x_i` (0-based index).
    ///
    /// # Panics
    /// Panics if `i >= dim`.
    pub fn var(dim: usize, i: usize) -> Self {
        assert!(i < dim, "variable index {i} out of range for dimension {dim}");
        let mut e = vec![0; dim];
        e[i] = 1;
        let mut p = Self::zero(dim);
        p.add_term(e, Rational::one());
        p
    }

    /// Single monomial `c * x^exps`.
    pub fn monomial(dim: usize, exps: Vec<u32>, c: Rational) -> Result<Self> {
        Self::from_terms(dim, [(exps, c)])
    }

    /// Builds a polynomial from (exponent vector, coefficient) pairs, summing repeats.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, Rational)>,
    {
        let mut p = Self::zero(dim);
        for (e, c) in terms {
            if e.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: e.len() });
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    pub(crate) fn add_term(&mut self, exps: Vec<u32>, c: Rational) {
        debug_assert_eq!(exps.len(), self.dim);
        if c.is_zero() {
            return;
        }
        match self.terms.entry(exps) {
            alloc::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            alloc::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    /// Number of variables.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Terms in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &Rational)> + '_ {
        self.terms.iter().map(|(e, c)| (e.as_slice(), c))
    }

    /// Number of nonzero terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// True for the zero polynomial.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True if the polynomial has no nonconstant term.
    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&a| a == 0))
    }

    /// Coefficient of `x^exps` (zero if absent).
    pub fn coefficient(&self, exps: &[u32]) -> Rational {
        self.terms.get(exps).cloned().unwrap_or_else(Rational::zero)
    }

    /// Total degree, `None` for the zero polynomial.
    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    /// Partial derivative with respect to `x_i` (0-based).
    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(self.dim);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut ne = e.clone();
            ne[i] -= 1;
            out.add_term(ne, c * Rational::from_integer(BigInt::from(e[i])));
        }
        out
    }

    /// Exact value at a rational point.
    pub fn eval(&self, q: &[Rational]) -> Result<Rational> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: q.len() });
        }
        let mut acc = Rational::zero();
        for (e, c) in &self.terms {
            let mut m = c.clone();
            for (x, &a) in q.iter().zip(e) {
                if a > 0 {
                    m *= num_traits::pow(x.clone(), a as usize);
                }
            }
            acc += m;
        }
        Ok(acc)
    }

    /// Floating-point value at a point (coefficients rounded to `f64`).
    ///
    /// # Panics
    /// Panics if the point has the wrong dimension.
    pub fn eval_f64(&self, q: &[f64]) -> f64 {
        assert_eq!(q.len(), self.dim, "point dimension");
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut m = to_f64(c);
            for (x, &a) in q.iter().zip(e) {
                m *= powi(*x, a);
            }
            acc += m;
        }
        acc
    }

    /// The polynomial `x -> p(q + x)`.
    pub fn shift(&self, q: &[Rational]) -> Result<Self> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: q.len() });
        }
        if q.iter().all(|v| v.is_zero()) {
            return Ok(self.clone());
        }
        let mut out = Self::zero(self.dim);
        for (e, c) in &self.terms {
            // Expand prod_i (q_i + x_i)^{e_i} one variable at a time.
            let mut partial: Vec<(Vec<u32>, Rational)> = vec![(vec![0; self.dim], c.clone())];
            for i in 0..self.dim {
                let a = e[i];
                if a == 0 {
                    continue;
                }
                let mut next = Vec::new();
                for (pe, pc) in &partial {
                    for b in 0..=a {
                        let coeff = if q[i].is_zero() {
                            if b == a { Rational::one() } else { continue }
                        } else {
                            Rational::from_integer(binomial(a, b)) * num_traits::pow(q[i].clone(), (a - b) as usize)
                        };
                        let mut ne = pe.clone();
                        ne[i] = b;
                        next.push((ne, pc * coeff));
                    }
                }
                partial = next;
            }
            for (ne, nc) in partial {
                out.add_term(ne, nc);
            }
        }
        Ok(out)
    }

    /// The polynomial `x -> p(c_1 x_1, ..., c_n x_n)`.
    pub fn scale_vars(&self, c: &[Rational]) -> Result<Self> {
        if c.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: c.len() });
        }
        let mut out = Self::zero(self.dim);
        for (e, k) in &self.terms {
            let mut m = k.clone();
            for (ci, &a) in c.iter().zip(e) {
                if a > 0 {
                    m *= num_traits::pow(ci.clone(), a as usize);
                }
            }
            out.add_term(e.clone(), m);
        }
        Ok(out)
    }

    /// Same polynomial seen in `dim + extra` variables (new variables appended).
    pub fn extend(&self, extra: usize) -> Self {
        let mut out = Self::zero(self.dim + extra);
        for (e, c) in &self.terms {
            let mut ne = e.clone();
            ne.resize(self.dim + extra, 0);
            out.add_term(ne, c.clone());
        }
        out
    }

    /// Substitutes `x_i = value` and removes that variable.
    pub fn substitute(&self, i: usize, value: &Rational) -> Self {
        let mut out = Self::zero(self.dim - 1);
        for (e, c) in &self.terms {
            let mut ne = e.clone();
            let a = ne.remove(i);
            let f = if a == 0 {
                Rational::one()
            } else if value.is_zero() {
                continue;
            } else {
                num_traits::pow(value.clone(), a as usize)
            };
            out.add_term(ne, c * f);
        }
        out
    }

    /// Keeps only the terms selected by `keep`.
    pub fn filter_terms<F: FnMut(&[u32], &Rational) -> bool>(&self, mut keep: F) -> Self {
        let mut out = Self::zero(self.dim);
        for (e, c) in &self.terms {
            if keep(e, c) {
                out.add_term(e.clone(), c.clone());
            }
        }
        out
    }

    /// Multiplies every coefficient by `c`.
    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero(self.dim);
        }
        MultiPoly { dim: self.dim, terms: self.terms.iter().map(|(e, k)| (e.clone(), k * c)).collect() }
    }

    /// `self^k`.
    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.dim);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Parses an expression such as `"x1^2 - 1/2*x2 + (x1+1)^3"` using the given variable names.
    ///
    /// Supported syntax: integers, decimals, `+ - * /` (division by constants only),
    /// `^` with nonnegative integer exponents and parentheses.
    pub fn parse(src: &str, vars: &[&str]) -> Result<Self> {
        let mut p = Parser { src: src.as_bytes(), pos: 0, vars, dim: vars.len() };
        let out = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(out)
    }

    /// Formats with explicit variable names.
    pub fn display_with(&self, vars: &[&str]) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut s = String::new();
        for (idx, (e, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            if idx == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            let mut factors: Vec<String> = Vec::new();
            let is_const = e.iter().all(|&x| x == 0);
            if !a.is_one() || is_const {
                factors.push(a.to_string());
            }
            for (i, &ex) in e.iter().enumerate() {
                match ex {
                    0 => {}
                    1 => factors.push(vars[i].to_string()),
                    _ => factors.push(format!("{}^{}", vars[i], ex)),
                }
            }
            s.push_str(&factors.join("*"));
        }
        s
    }

    fn default_names(&self) -> Vec<String> {
        (1..=self.dim).map(|i| format!("x{i}")).collect()
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.default_names();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        f.write_str(&self.display_with(&refs))
    }
}

impl Add<&MultiPoly> for &MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: &MultiPoly) -> MultiPoly {
        assert_eq!(self.dim, rhs.dim, "polynomial dimensions differ");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl Sub<&MultiPoly> for &MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: &MultiPoly) -> MultiPoly {
        assert_eq!(self.dim, rhs.dim, "polynomial dimensions differ");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), -c.clone());
        }
        out
    }
}

impl Mul<&MultiPoly> for &MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: &MultiPoly) -> MultiPoly {
        assert_eq!(self.dim, rhs.dim, "polynomial dimensions differ");
        let mut out = MultiPoly::zero(self.dim);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }
}

impl Neg for &MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        MultiPoly { dim: self.dim, terms: self.terms.iter().map(|(e, c)| (e.clone(), -c.clone())).collect() }
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl $tr<MultiPoly> for MultiPoly {
            type Output = MultiPoly;
            fn $m(self, rhs: MultiPoly) -> MultiPoly {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&MultiPoly> for MultiPoly {
            type Output = MultiPoly;
            fn $m(self, rhs: &MultiPoly) -> MultiPoly {
                (&self).$m(rhs)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

impl Neg for MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        -&self
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
    dim: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Invalid(format!("polynomial syntax at byte {}: {msg}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<MultiPoly> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc + self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<MultiPoly> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = acc * self.unary()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    let d = self.unary()?;
                    if !d.is_constant() || d.is_zero() {
                        return Err(self.err("division by a nonconstant or zero expression"));
                    }
                    let c = d.coefficient(&vec![0; self.dim]);
                    acc = acc.scale(&c.recip());
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<MultiPoly> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<MultiPoly> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let digits = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
            let k: u32 = digits.parse().map_err(|_| self.err("expected a nonnegative integer exponent"))?;
            return Ok(base.pow(k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<MultiPoly> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
                    self.pos += 1;
                }
                let text = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                Ok(MultiPoly::constant(self.dim, parse_rational(text)?))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                    self.pos += 1;
                }
                let name = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(MultiPoly::var(self.dim, i)),
                    None => Err(self.err(&format!("unknown variable {name:?}"))),
                }
            }
            _ => Err(self.err("unexpected token")),
        }
    }
}

/// A polynomial vector field `sum_i f_i d/dx_i` on `R^n`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PolyVectorField {
    comps: Vec<MultiPoly>,
}

impl PolyVectorField {
    /// Builds a field from its `n` components, all in `n` variables.
    pub fn new(comps: Vec<MultiPoly>) -> Result<Self> {
        let n = comps.len();
        if n == 0 {
            return Err(Error::Invalid("vector field needs at least one component".into()));
        }
        for c in &comps {
            if c.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: c.dim() });
            }
        }
        Ok(PolyVectorField { comps })
    }

    /// The coordinate field `d/dx_i` (0-based).
    pub fn coordinate(n: usize, i: usize) -> Self {
        let mut comps = vec![MultiPoly::zero(n); n];
        comps[i] = MultiPoly::one(n);
        PolyVectorField { comps }
    }

    /// The zero field.
    pub fn zero(n: usize) -> Self {
        PolyVectorField { comps: vec![MultiPoly::zero(n); n] }
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    /// Components (coefficient of `d/dx_i` at index `i`).
    pub fn components(&self) -> &[MultiPoly] {
        &self.comps
    }

    /// True if every component vanishes identically.
    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.is_zero())
    }

    /// The derivation `f -> X f`.
    pub fn apply(&self, f: &MultiPoly) -> Result<MultiPoly> {
        if f.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: f.dim() });
        }
        let mut acc = MultiPoly::zero(self.dim());
        for (i, c) in self.comps.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let d = f.derivative(i);
            if !d.is_zero() {
                acc = acc + c * &d;
            }
        }
        Ok(acc)
    }

    /// Exact value of the field at a point.
    pub fn eval(&self, q: &[Rational]) -> Result<Vec<Rational>> {
        self.comps.iter().map(|c| c.eval(q)).collect()
    }

    /// Multiplies the field by a scalar.
    pub fn scale(&self, c: &Rational) -> Self {
        PolyVectorField { comps: self.comps.iter().map(|p| p.scale(c)).collect() }
    }

    /// Returns `(±self, flipped)` with the sign chosen so the first nonzero
    /// coefficient is positive. Two fields agree up to sign iff their
    /// normalized forms are equal.
    pub fn sign_normalized(&self) -> (Self, bool) {
        let first = self.comps.iter().flat_map(|c| c.terms()).next();
        match first {
            Some((_, c)) if c.is_negative() => (-self, true),
            _ => (self.clone(), false),
        }
    }
}

impl Neg for &PolyVectorField {
    type Output = PolyVectorField;
    fn neg(self) -> PolyVectorField {
        PolyVectorField { comps: self.comps.iter().map(|c| -c).collect() }
    }
}

impl fmt::Display for PolyVectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.comps.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "({c})d{}", i + 1)?;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// Lie bracket `[X, Y] = X(Y) - Y(X)`, computed componentwise.
pub fn lie_bracket(x: &PolyVectorField, y: &PolyVectorField) -> Result<PolyVectorField> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: y.dim() });
    }
    let comps = x
        .comps
        .iter()
        .zip(&y.comps)
        .map(|(xi, yi)| Ok(x.apply(yi)? - y.apply(xi)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(PolyVectorField { comps })
}

/// A nonempty word `(i_1, ..., i_p)` over the frame indices `1..=m`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BracketWord(Vec<usize>);

impl BracketWord {
    /// Builds a word; indices are 1-based.
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Invalid("bracket word must be nonempty".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i == 0) {
            return Err(Error::IndexOutOfRange { index: bad, max: usize::MAX });
        }
        Ok(BracketWord(indices))
    }

    /// The 1-based indices.
    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// Word length `|I|`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false: words are nonempty by construction.
    pub fn is_empty(&self) -> bool {
        false
    }

    fn extended(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v.push(i);
        BracketWord(v)
    }
}

impl fmt::Display for BracketWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str(")")
    }
}

/// An ordered family `(X_1, ..., X_m)` of polynomial vector fields on `R^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Frame {
    fields: Vec<PolyVectorField>,
}

impl Frame {
    /// Builds a frame; all fields must share the same dimension.
    pub fn new(fields: Vec<PolyVectorField>) -> Result<Self> {
        let Some(first) = fields.first() else {
            return Err(Error::Invalid("frame needs at least one field".into()));
        };
        let n = first.dim();
        for f in &fields {
            if f.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: f.dim() });
            }
        }
        Ok(Frame { fields })
    }

    /// Builds a frame from component expressions in the variables `x1..xn`.
    ///
    /// `fields[k][i]` is the coefficient of `d/dx_{i+1}` in `X_{k+1}`.
    pub fn parse(fields: &[&[&str]]) -> Result<Self> {
        let n = fields.first().map(|f| f.len()).unwrap_or(0);
        let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let mut out = Vec::new();
        for f in fields {
            let comps = f.iter().map(|s| MultiPoly::parse(s, &refs)).collect::<Result<Vec<_>>>()?;
            out.push(PolyVectorField::new(comps)?);
        }
        Frame::new(out)
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.fields[0].dim()
    }

    /// Number of fields `m`.
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    /// Always false: frames are nonempty by construction.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// The fields in order.
    pub fn fields(&self) -> &[PolyVectorField] {
        &self.fields
    }

    /// Left-nested bracket `[..[[X_{i1}, X_{i2}], X_{i3}].., X_{ip}]`.
    pub fn bracket_field(&self, word: &BracketWord) -> Result<PolyVectorField> {
        let m = self.len();
        for &i in word.indices() {
            if i == 0 || i > m {
                return Err(Error::IndexOutOfRange { index: i, max: m });
            }
        }
        let idx = word.indices();
        let mut acc = self.fields[idx[0] - 1].clone();
        for &i in &idx[1..] {
            acc = lie_bracket(&acc, &self.fields[i - 1])?;
        }
        Ok(acc)
    }

    /// Bracket words of length `<= max_len` in (length, lexicographic) order,
    /// keeping only the first word for each field up to sign and dropping
    /// identically zero fields.
    ///
    /// Pruning is exact: a dropped word has the same field (up to sign) as an
    /// earlier word, so its extensions repeat extensions of that earlier word.
    pub fn distinct_brackets(&self, max_len: usize) -> Vec<(BracketWord, PolyVectorField)> {
        let mut seen: BTreeSet<PolyVectorField> = BTreeSet::new();
        let mut out = Vec::new();
        let mut level: Vec<(BracketWord, PolyVectorField)> = Vec::new();
        for (k, f) in self.fields.iter().enumerate() {
            if f.is_zero() {
                continue;
            }
            let (norm, _) = f.sign_normalized();
            if seen.insert(norm) {
                level.push((BracketWord(vec![k + 1]), f.clone()));
            }
        }
        let mut len = 1;
        while !level.is_empty() && len <= max_len {
            out.extend(level.iter().cloned());
            if len == max_len {
                break;
            }
            let mut next = Vec::new();
            for (w, f) in &level {
                for (k, x) in self.fields.iter().enumerate() {
                    let Ok(g) = lie_bracket(f, x) else { continue };
                    if g.is_zero() {
                        continue;
                    }
                    let (norm, _) = g.sign_normalized();
                    if seen.insert(norm) {
                        next.push((w.extended(k + 1), g));
                    }
                }
            }
            level = next;
            len += 1;
        }
        out
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, x) in self.fields.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "X{} = {x}", k + 1)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str, n: usize) -> MultiPoly {
        let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        MultiPoly::parse(s, &refs).unwrap()
    }

    #[test]
    fn eval_examples() {
        let f = p("x1^2 + x2", 2);
        assert_eq!(f.eval(&[int(0), int(0)]).unwrap(), int(0));
        assert_eq!(f.eval(&[int(2), int(3)]).unwrap(), int(7));
        assert_eq!(MultiPoly::one(2).eval(&[rat(5, 7), int(-3)]).unwrap(), int(1));
        assert!(matches!(f.eval(&[int(1)]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn canonical_form_drops_zeros() {
        let f = p("x1 - x1 + 0*x2", 2);
        assert!(f.is_zero());
        assert_eq!(p("(x1+x2)^2", 2), p("x1^2 + 2*x1*x2 + x2^2", 2));
    }

    #[test]
    fn brackets_of_model_frames() {
        let g = Frame::parse(&[&["1", "0"], &["0", "x1"]]).unwrap();
        let b = g.bracket_field(&BracketWord::new(vec![1, 2]).unwrap()).unwrap();
        assert_eq!(b, PolyVectorField::coordinate(2, 1));
        let h = Frame::parse(&[&["1", "0", "0"], &["0", "1", "x1"]]).unwrap();
        let b = h.bracket_field(&BracketWord::new(vec![1, 2]).unwrap()).unwrap();
        assert_eq!(b, PolyVectorField::coordinate(3, 2));
        let m = Frame::parse(&[&["1", "0", "0"], &["0", "1", "x1^2/2"]]).unwrap();
        let b = m.bracket_field(&BracketWord::new(vec![1, 1, 2]).unwrap()).unwrap();
        assert!(b.is_zero());
        let b = m.bracket_field(&BracketWord::new(vec![2, 1, 1]).unwrap()).unwrap();
        assert_eq!(b, PolyVectorField::coordinate(3, 2));
        assert!(matches!(
            m.bracket_field(&BracketWord::new(vec![3]).unwrap()),
            Err(Error::IndexOutOfRange { index: 3, max: 2 })
        ));
    }

    #[test]
    fn shift_and_scale() {
        let f = p("x1^2*x2", 2);
        let s = f.shift(&[int(1), int(-2)]).unwrap();
        assert_eq!(s, p("(x1+1)^2*(x2-2)", 2));
        let c = f.scale_vars(&[int(2), rat(1, 2)]).unwrap();
        assert_eq!(c, p("2*x1^2*x2", 2));
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("-3/6").unwrap(), rat(-1, 2));
        assert_eq!(parse_rational("0.25").unwrap(), rat(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), rat(-3, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn distinct_brackets_prunes_duplicates() {
        let g = Frame::parse(&[&["1", "0"], &["0", "x1"]]).unwrap();
        let words: Vec<String> = g.distinct_brackets(4).iter().map(|(w, _)| w.to_string()).collect();
        assert_eq!(words, ["(1)", "(2)", "(1,2)"]);
    }
}
