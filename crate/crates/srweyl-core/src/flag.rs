//! The sub-Riemannian flag at a point: growth vector, weights, Hausdorff
//! dimension, degree of nonholonomy, nonholonomic orders and privileged
//! coordinate checks. Every rank is computed with exact rational elimination.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::linalg::Echelon;
use crate::polyfield::{BracketWord, Frame, MultiPoly, Rational};

/// Default cap on bracket length.
pub const DEFAULT_R_MAX: usize = 10;

/// Flag data of a frame at a point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlagData {
    /// The point.
    pub point: Vec<Rational>,
    /// `n_1 <= ... <= n_r = n`.
    pub growth: Vec<usize>,
    /// Sorted weights `w_1 <= ... <= w_n`.
    pub weights: Vec<u32>,
    /// `Q = sum_i w_i`.
    pub hausdorff: u32,
    /// Degree of nonholonomy `r`.
    pub degree: u32,
    /// Words whose fields at the point form a basis adapted to the flag,
    /// listed by increasing length.
    pub adapted_words: Vec<BracketWord>,
    /// Values of the adapted fields at the point, in the same order.
    pub adapted_vectors: Vec<Vec<Rational>>,
}

fn check_point(frame: &Frame, q: &[Rational]) -> Result<()> {
    if q.len() != frame.dim() {
        return Err(Error::DimensionMismatch { expected: frame.dim(), found: q.len() });
    }
    Ok(())
}

/// Computes the flag of `frame` at `q`, using brackets of length at most `r_max`.
///
/// Adapted words are chosen greedily: shorter words first, lexicographic order
/// among words of equal length, keeping a word when its value enlarges the span.
pub fn compute_flag(frame: &Frame, q: &[Rational], r_max: usize) -> Result<FlagData> {
    check_point(frame, q)?;
    if r_max == 0 {
        return Err(Error::Invalid("r_max must be at least 1".into()));
    }
    let n = frame.dim();
    let words = frame.distinct_brackets(r_max);
    let mut ech = Echelon::new();
    let mut growth = Vec::new();
    let mut adapted_words = Vec::new();
    let mut adapted_vectors = Vec::new();
    let mut idx = 0;
    for len in 1..=r_max {
        while idx < words.len() && words[idx].0.len() == len {
            let (w, f) = &words[idx];
            idx += 1;
            if ech.rank() == n {
                continue;
            }
            let v = f.eval(q)?;
            if ech.insert(&v) {
                adapted_words.push(w.clone());
                adapted_vectors.push(v);
            }
        }
        growth.push(ech.rank());
        if ech.rank() == n {
            break;
        }
    }
    if ech.rank() < n {
        return Err(Error::HormanderFailure { rank: ech.rank(), dim: n, r_max });
    }
    let weights = weights_from_growth(&growth);
    let hausdorff = weights.iter().sum();
    Ok(FlagData {
        point: q.to_vec(),
        degree: growth.len() as u32,
        growth,
        weights,
        hausdorff,
        adapted_words,
        adapted_vectors,
    })
}

/// Weights induced by a growth vector: `w_i = j` for `n_{j-1} < i <= n_j`.
pub fn weights_from_growth(growth: &[usize]) -> Vec<u32> {
    let mut w = Vec::new();
    let mut prev = 0;
    for (j, &nj) in growth.iter().enumerate() {
        for _ in prev..nj {
            w.push(j as u32 + 1);
        }
        prev = nj;
    }
    w
}

/// Hausdorff-type sum `sum_i i (n_i - n_{i-1})` of a (possibly restricted) growth vector.
pub fn growth_sum(growth: &[usize]) -> u32 {
    let mut prev = 0;
    let mut q = 0;
    for (i, &ni) in growth.iter().enumerate() {
        q += (i as u32 + 1) * (ni - prev) as u32;
        prev = ni;
    }
    q
}

/// A nonholonomic order, or a lower bound when the search cap was reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    /// The order is exactly this value.
    Exact(u32),
    /// No nonzero derivative was found up to this length.
    AtLeast(u32),
}

impl Order {
    /// The exact value if known.
    pub fn exact(self) -> Option<u32> {
        match self {
            Order::Exact(k) => Some(k),
            Order::AtLeast(_) => None,
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Exact(k) => write!(f, "{k}"),
            Order::AtLeast(k) => write!(f, ">={k}"),
        }
    }
}

fn scalar_normalized(p: &MultiPoly) -> MultiPoly {
    match p.terms().next() {
        Some((_, c)) => {
            let c = c.clone();
            p.scale(&c.recip())
        }
        None => p.clone(),
    }
}

/// Smallest `k` such that some `X_{j1} ... X_{jk} p` is nonzero at `q`;
/// saturates at `AtLeast(k_max)`.
pub fn nonholonomic_order(frame: &Frame, q: &[Rational], p: &MultiPoly, k_max: u32) -> Result<Order> {
    check_point(frame, q)?;
    if p.dim() != frame.dim() {
        return Err(Error::DimensionMismatch { expected: frame.dim(), found: p.dim() });
    }
    let mut level: Vec<MultiPoly> = if p.is_zero() { Vec::new() } else { vec![p.clone()] };
    for k in 0..=k_max {
        for f in &level {
            if !f.eval(q)?.is_zero() {
                return Ok(Order::Exact(k));
            }
        }
        if k == k_max || level.is_empty() {
            break;
        }
        // Derivatives are linear and vanishing at q is scale invariant, so
        // polynomials equal up to a scalar are deduplicated.
        let mut next: BTreeSet<MultiPoly> = BTreeSet::new();
        for f in &level {
            for x in frame.fields() {
                let g = x.apply(f)?;
                if !g.is_zero() {
                    next.insert(scalar_normalized(&g));
                }
            }
        }
        level = next.into_iter().collect();
    }
    Ok(Order::AtLeast(k_max))
}

/// Outcome of the privileged-coordinate test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Privilege {
    /// True iff the orders of `x_i - q_i` form the weight multiset.
    pub privileged: bool,
    /// `ord_q(x_i - q_i)` for each coordinate.
    pub orders: Vec<Order>,
}

impl Privilege {
    /// Per-coordinate weights when the coordinates are privileged.
    pub fn coordinate_weights(&self) -> Option<Vec<u32>> {
        if !self.privileged {
            return None;
        }
        self.orders.iter().map(|o| o.exact()).collect()
    }
}

/// Checks whether the canonical coordinates shifted to `q` are privileged.
pub fn is_privileged(frame: &Frame, q: &[Rational]) -> Result<Privilege> {
    check_point(frame, q)?;
    let n = frame.dim();
    let flag = compute_flag(frame, q, DEFAULT_R_MAX).ok();
    // Orders of privileged coordinates never exceed the degree of nonholonomy.
    let k_max = flag.as_ref().map(|f| f.degree + 1).unwrap_or(DEFAULT_R_MAX as u32);
    let mut orders = Vec::with_capacity(n);
    for i in 0..n {
        let xi = &MultiPoly::var(n, i) - &MultiPoly::constant(n, q[i].clone());
        orders.push(nonholonomic_order(frame, q, &xi, k_max)?);
    }
    let privileged = match &flag {
        Some(f) => {
            let mut got: Vec<u32> = orders.iter().filter_map(|o| o.exact()).collect();
            got.sort_unstable();
            got.len() == n && got == f.weights
        }
        None => false,
    };
    Ok(Privilege { privileged, orders })
}

/// Flag restricted to a coordinate subspace through the point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RestrictedFlagData {
    /// Coordinates (1-based) spanning the subspace; the others vanish on it.
    pub subset: Vec<usize>,
    /// `n_i^N = dim(D^i(q) ∩ T_q N)` for `i = 1..r`.
    pub growth: Vec<usize>,
    /// `sum_i i (n_i^N - n_{i-1}^N)`.
    pub hausdorff: u32,
}

/// Restricted flag for `N = {x_j = 0 for j not in subset}` at a point of `N`.
pub fn restricted_q(frame: &Frame, q: &[Rational], subset: &[usize]) -> Result<RestrictedFlagData> {
    check_point(frame, q)?;
    let n = frame.dim();
    let mut sub: Vec<usize> = subset.to_vec();
    sub.sort_unstable();
    sub.dedup();
    for &j in &sub {
        if j == 0 || j > n {
            return Err(Error::IndexOutOfRange { index: j, max: n });
        }
    }
    for (j, v) in q.iter().enumerate() {
        if !sub.contains(&(j + 1)) && !v.is_zero() {
            return Err(Error::PointNotInSubspace(j + 1));
        }
    }
    let flag = compute_flag(frame, q, DEFAULT_R_MAX)?;
    let tangent: Vec<Vec<Rational>> = sub
        .iter()
        .map(|&j| {
            let mut e = vec![Rational::zero(); n];
            e[j - 1] = Rational::from_integer(1.into());
            e
        })
        .collect();
    let mut growth = Vec::with_capacity(flag.growth.len());
    for &ni in &flag.growth {
        let mut ech = Echelon::new();
        for v in flag.adapted_vectors.iter().take(ni) {
            ech.insert(v);
        }
        for e in &tangent {
            ech.insert(e);
        }
        // dim(A ∩ B) = dim A + dim B - dim(A + B)
        growth.push(ni + tangent.len() - ech.rank());
    }
    let hausdorff = growth_sum(&growth);
    Ok(RestrictedFlagData { subset: sub, growth, hausdorff })
}

/// True iff the sub-Laplacian on the punctured manifold is essentially
/// self-adjoint, which happens exactly when `Q(q0) >= 4`.
pub fn essential_selfadjoint_puncture(q: u32) -> bool {
    q >= 4
}

/// Degree of nonholonomy and fiber dimension `n - n_{r-1}` of the annihilator
/// of `D^{r-1}`, which carries the microlocal support of the Weyl measure.
pub fn microlocal_support_info(fd: &FlagData) -> (u32, usize) {
    let n = *fd.growth.last().unwrap_or(&0);
    let r = fd.degree as usize;
    let prev = if r >= 2 { fd.growth[r - 2] } else { 0 };
    (fd.degree, n - prev)
}

/// Largest coordinate magnitude, handy for sanity checks on sample points.
pub fn max_abs(q: &[Rational]) -> Rational {
    q.iter().map(|x| x.abs()).max().unwrap_or_else(Rational::zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyfield::int;

    fn zero(n: usize) -> Vec<Rational> {
        vec![Rational::zero(); n]
    }

    #[test]
    fn heisenberg_flag() {
        let f = Frame::parse(&[&["1", "0", "0"], &["0", "1", "x1"]]).unwrap();
        let fd = compute_flag(&f, &zero(3), DEFAULT_R_MAX).unwrap();
        assert_eq!(fd.growth, [2, 3]);
        assert_eq!(fd.weights, [1, 1, 2]);
        assert_eq!(fd.hausdorff, 4);
        assert_eq!(fd.degree, 2);
        assert_eq!(microlocal_support_info(&fd), (2, 1));
    }

    #[test]
    fn riemannian_flag() {
        let f = Frame::parse(&[&["1", "0"], &["0", "1"]]).unwrap();
        let fd = compute_flag(&f, &[int(3), int(-1)], DEFAULT_R_MAX).unwrap();
        assert_eq!((fd.growth.clone(), fd.hausdorff, fd.degree), (vec![2], 2, 1));
        assert_eq!(microlocal_support_info(&fd), (1, 2));
    }

    #[test]
    fn hormander_failure() {
        let f = Frame::parse(&[&["1", "0"]]).unwrap();
        assert!(matches!(compute_flag(&f, &zero(2), 3), Err(Error::HormanderFailure { rank: 1, .. })));
    }

    #[test]
    fn orders_and_privilege() {
        let g = Frame::parse(&[&["1", "0"], &["0", "x1"]]).unwrap();
        let x2 = MultiPoly::var(2, 1);
        assert_eq!(nonholonomic_order(&g, &zero(2), &x2, 5).unwrap(), Order::Exact(2));
        assert_eq!(nonholonomic_order(&g, &zero(2), &MultiPoly::one(2), 5).unwrap(), Order::Exact(0));
        let p = is_privileged(&g, &zero(2)).unwrap();
        assert!(p.privileged);
        assert_eq!(p.orders, [Order::Exact(1), Order::Exact(2)]);
        let p = is_privileged(&g, &[int(1), int(0)]).unwrap();
        assert!(p.privileged);
        assert_eq!(p.orders, [Order::Exact(1), Order::Exact(1)]);
    }

    #[test]
    fn restricted_examples() {
        let m = Frame::parse(&[&["1", "0", "0"], &["0", "1", "x1^2"]]).unwrap();
        let r = restricted_q(&m, &zero(3), &[2, 3]).unwrap();
        assert_eq!(r.hausdorff, 4);
        assert!(matches!(restricted_q(&m, &[int(1), int(0), int(0)], &[2, 3]), Err(Error::PointNotInSubspace(1))));
        let full = restricted_q(&m, &zero(3), &[1, 2, 3]).unwrap();
        assert_eq!(full.hausdorff, 5);
    }

    #[test]
    fn puncture_predicate() {
        assert!(!essential_selfadjoint_puncture(1));
        assert!(!essential_selfadjoint_puncture(3));
        assert!(essential_selfadjoint_puncture(4));
    }
}
