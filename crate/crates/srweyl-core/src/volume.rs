//! Ball-box volume function, volume integrals `int dq / v(q, sqrt t)` and the
//! fit of `V(t) ~ C |ln t|^k / t^gamma`.
//!
//! The catalog stores, for each admissible tuple of bracket words, the exact
//! determinant polynomial of the tuple; evaluation converts it to `f64` once.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Signed;

use crate::error::{Error, Result};
use crate::flag::compute_flag;
use crate::linalg::poly_det;
use crate::numeric::{least_squares, pairwise_sum};
use crate::polyfield::{powi, to_f64, BracketWord, Frame, MultiPoly, Rational};

/// One admissible tuple: `n` bracket words and their determinant.
#[derive(Clone, Debug, PartialEq)]
pub struct TupleEntry {
    /// The words, in catalog order.
    pub words: Vec<BracketWord>,
    /// Total length `sum |I_i|`.
    pub total_len: u32,
    /// `det(X_{I_1}, ..., X_{I_n})` as an exact polynomial.
    pub det: MultiPoly,
    compiled: Vec<(Vec<u32>, f64)>,
}

impl TupleEntry {
    /// Determinant at a floating-point point.
    pub fn det_f64(&self, q: &[f64]) -> f64 {
        self.compiled
            .iter()
            .map(|(e, c)| e.iter().zip(q).fold(*c, |acc, (&a, &x)| acc * powi(x, a)))
            .sum()
    }
}

/// All tuples of distinct bracket fields with total length at most `q_max`
/// and a determinant that is not identically zero.
#[derive(Clone, Debug, PartialEq)]
pub struct TupleCatalog {
    /// Ambient dimension.
    pub dim: usize,
    /// Length bound.
    pub q_max: u32,
    /// Tuples in lexicographic order of their word indices.
    pub entries: Vec<TupleEntry>,
}

/// Enumerates the catalog. Fields equal up to sign keep only their first word.
pub fn build_catalog(frame: &Frame, q_max: u32) -> Result<TupleCatalog> {
    let n = frame.dim();
    if (q_max as usize) < n || q_max as usize > MAX_LEN {
        return Err(Error::Invalid(alloc::format!("q_max = {q_max} must lie in [{n}, {MAX_LEN}]")));
    }
    let max_word = q_max as usize - (n - 1);
    let words = frame.distinct_brackets(max_word);
    let mut entries = Vec::new();
    let mut pick = Vec::with_capacity(n);
    collect_tuples(&words, n, q_max, 0, 0, &mut pick, &mut entries);
    Ok(TupleCatalog { dim: n, q_max, entries })
}

fn collect_tuples(
    words: &[(BracketWord, crate::polyfield::PolyVectorField)],
    n: usize,
    q_max: u32,
    start: usize,
    len: u32,
    pick: &mut Vec<usize>,
    out: &mut Vec<TupleEntry>,
) {
    if pick.len() == n {
        let m: Vec<Vec<MultiPoly>> =
            (0..n).map(|row| pick.iter().map(|&k| words[k].1.components()[row].clone()).collect()).collect();
        let det = poly_det(&m);
        if !det.is_zero() {
            let compiled = det.terms().map(|(e, c)| (e.to_vec(), to_f64(c))).collect();
            out.push(TupleEntry { words: pick.iter().map(|&k| words[k].0.clone()).collect(), total_len: len, det, compiled });
        }
        return;
    }
    let remaining = (n - pick.len() - 1) as u32;
    for k in start..words.len() {
        let l = words[k].0.len() as u32;
        // Words come sorted by length, so later words are no shorter.
        if len + l + remaining > q_max {
            break;
        }
        pick.push(k);
        collect_tuples(words, n, q_max, k + 1, len + l, pick, out);
        pick.pop();
    }
}

impl TupleCatalog {
    /// Coefficients of `v(q, rho)` as a polynomial in `rho`, indexed by power.
    pub fn rho_coefficients(&self, q: &[Rational]) -> Result<Vec<Rational>> {
        let mut c = vec![Rational::from_integer(0.into()); self.q_max as usize + 1];
        for e in &self.entries {
            c[e.total_len as usize] += e.det.eval(q)?.abs();
        }
        Ok(c)
    }

    /// `v(q, rho) = sum rho^{|I|} |det(X_I(q))|`, exact determinants converted once.
    pub fn v_value(&self, q: &[Rational], rho: f64) -> Result<f64> {
        let c = self.rho_coefficients(q)?;
        Ok(c.iter().enumerate().rev().fold(0.0, |acc, (_, v)| acc * rho + to_f64(v)))
    }

    /// Same as [`Self::v_value`] with the measure density `h(q)` applied.
    pub fn v_value_with_density(&self, q: &[Rational], rho: f64, density: f64) -> Result<f64> {
        Ok(self.v_value(q, rho)? * density)
    }

    /// Floating-point `v(q, rho)` used inside integrals.
    pub fn v_f64(&self, q: &[f64], rho: f64) -> f64 {
        let mut by_len = [0.0f64; MAX_LEN + 1];
        let top = (self.q_max as usize).min(MAX_LEN);
        for e in &self.entries {
            by_len[(e.total_len as usize).min(MAX_LEN)] += e.det_f64(q).abs();
        }
        by_len[..=top].iter().rev().fold(0.0, |acc, v| acc * rho + v)
    }
}

/// Longest total word length supported by the floating-point evaluator.
pub const MAX_LEN: usize = 63;

/// Largest dimension supported by the cubature.
pub const MAX_DIM: usize = 8;

/// Largest pointwise Hausdorff dimension over a `5^n` lattice of the box
/// (center included), plus one.
pub fn lattice_q_max(frame: &Frame, bx: &[(Rational, Rational)]) -> Result<u32> {
    let n = frame.dim();
    if bx.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: bx.len() });
    }
    let mut best = 0;
    let mut idx = vec![0usize; n];
    loop {
        let q: Vec<Rational> = idx
            .iter()
            .zip(bx)
            .map(|(&i, (lo, hi))| lo + (hi - lo) * Rational::new((i as i64).into(), 4.into()))
            .collect();
        best = best.max(compute_flag(frame, &q, crate::flag::DEFAULT_R_MAX)?.hausdorff);
        let mut d = 0;
        loop {
            if d == n {
                return Ok(best + 1);
            }
            idx[d] += 1;
            if idx[d] < 5 {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Controls the adaptive cubature of volume integrals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeOptions {
    /// Base cells per axis (at least 16).
    pub base_grid: usize,
    /// Target relative accuracy of the integral.
    pub rel_tol: f64,
    /// Maximum number of bisections of a base cell.
    pub max_depth: u32,
}

impl Default for VolumeOptions {
    fn default() -> Self {
        VolumeOptions { base_grid: 16, rel_tol: 1e-4, max_depth: 40 }
    }
}

/// An axis-aligned cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// Lower corner.
    pub lo: Vec<f64>,
    /// Upper corner.
    pub hi: Vec<f64>,
}

impl Cell {
    fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }
}

/// Uniform base grid of the box, in a fixed (last axis fastest) order.
pub fn base_cells(bx: &[(f64, f64)], grid: usize) -> Vec<Cell> {
    let n = bx.len();
    let total = grid.pow(n as u32);
    let mut out = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for d in (0..n).rev() {
            let i = rem % grid;
            rem /= grid;
            let (a, b) = bx[d];
            let h = (b - a) / grid as f64;
            lo[d] = a + h * i as f64;
            hi[d] = if i + 1 == grid { b } else { a + h * (i + 1) as f64 };
        }
        out.push(Cell { lo, hi });
    }
    out
}

const GL3_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL3_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Tensor three-point Gauss–Legendre estimate on a cell.
pub fn gauss3<F: Fn(&[f64]) -> f64>(f: &F, lo: &[f64], hi: &[f64]) -> f64 {
    let n = lo.len();
    let mut idx = [0usize; MAX_DIM];
    let mut q = [0.0f64; MAX_DIM];
    let mut c = [0.0f64; MAX_DIM];
    let mut h = [0.0f64; MAX_DIM];
    for d in 0..n {
        c[d] = 0.5 * (lo[d] + hi[d]);
        h[d] = 0.5 * (hi[d] - lo[d]);
    }
    let scale: f64 = h[..n].iter().product();
    let mut acc = 0.0;
    loop {
        let mut w = 1.0;
        for d in 0..n {
            q[d] = c[d] + h[d] * GL3_NODES[idx[d]];
            w *= GL3_WEIGHTS[idx[d]];
        }
        acc += w * f(&q[..n]);
        let mut d = 0;
        loop {
            if d == n {
                return acc * scale;
            }
            idx[d] += 1;
            if idx[d] < 3 {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Per-cell acceptance budget: a share of `abs_tol` proportional to
/// `(cell volume / box volume)^((n-1)/n)`, so that refinement along a
/// codimension-one singular set costs about `abs_tol` in total.
#[derive(Clone, Copy, Debug)]
pub struct CellBudget {
    /// Absolute error target of the whole integral.
    pub abs_tol: f64,
    /// Volume of the whole box.
    pub box_volume: f64,
    /// Maximum bisection depth.
    pub max_depth: u32,
}

impl CellBudget {
    fn allowed(&self, cell_volume: f64, n: usize) -> f64 {
        let frac = cell_volume / self.box_volume;
        let e = (n as f64 - 1.0) / n as f64;
        self.abs_tol * libm::pow(frac, e)
    }
}

/// Adaptive cubature over one cell: the Gauss estimate is compared with the
/// sum over the `2^n` children, and accepted children sums get a Richardson
/// correction `(children - parent) / 63`.
pub fn integrate_cell<F: Fn(&[f64]) -> f64>(f: &F, cell: &Cell, budget: &CellBudget) -> f64 {
    let parent = gauss3(f, &cell.lo, &cell.hi);
    refine(f, &cell.lo, &cell.hi, parent, 0, budget)
}

fn child(lo: &[f64], hi: &[f64], k: usize) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
    let mut clo = [0.0; MAX_DIM];
    let mut chi = [0.0; MAX_DIM];
    for d in 0..lo.len() {
        let mid = 0.5 * (lo[d] + hi[d]);
        if k >> d & 1 == 0 {
            clo[d] = lo[d];
            chi[d] = mid;
        } else {
            clo[d] = mid;
            chi[d] = hi[d];
        }
    }
    (clo, chi)
}

fn refine<F: Fn(&[f64]) -> f64>(f: &F, lo: &[f64], hi: &[f64], parent: f64, depth: u32, budget: &CellBudget) -> f64 {
    let n = lo.len();
    let kids = 1usize << n;
    let mut parts = [0.0f64; 1 << MAX_DIM];
    for (k, p) in parts.iter_mut().enumerate().take(kids) {
        let (clo, chi) = child(lo, hi, k);
        *p = gauss3(f, &clo[..n], &chi[..n]);
    }
    let sum: f64 = parts[..kids].iter().sum();
    let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    if (sum - parent).abs() <= budget.allowed(vol, n) || depth + 1 >= budget.max_depth {
        return sum + (sum - parent) / 63.0;
    }
    let mut acc = 0.0;
    for (k, &p) in parts.iter().enumerate().take(kids) {
        let (clo, chi) = child(lo, hi, k);
        acc += refine(f, &clo[..n], &chi[..n], p, depth + 1, budget);
    }
    acc
}

/// The integrand `1 / v(q, sqrt t)`.
pub fn inverse_v<'a>(catalog: &'a TupleCatalog, t: f64) -> impl Fn(&[f64]) -> f64 + 'a {
    let rho = libm::sqrt(t);
    move |q: &[f64]| 1.0 / catalog.v_f64(q, rho)
}

fn box_f64(bx: &[(Rational, Rational)]) -> Vec<(f64, f64)> {
    bx.iter().map(|(a, b)| (to_f64(a), to_f64(b))).collect()
}

/// Integrates `f` over the cells with `map` evaluating cells (sequentially or
/// in parallel); per-cell results are combined by pairwise summation in cell
/// order, so the result does not depend on how `map` schedules work.
///
/// A first pass at a hundred times the tolerance calibrates the absolute error
/// target of the second pass.
pub fn integrate_box_with<F, M>(f: &F, bx: &[(f64, f64)], opts: &VolumeOptions, map: M) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
    M: Fn(&[Cell], &CellBudget) -> Vec<f64>,
{
    if bx.is_empty() || bx.len() > MAX_DIM {
        return Err(Error::Invalid(alloc::format!("cubature supports 1 to {MAX_DIM} dimensions")));
    }
    if opts.base_grid < 16 {
        return Err(Error::Invalid("base grid must have at least 16 cells per axis".into()));
    }
    let cells = base_cells(bx, opts.base_grid);
    let box_volume: f64 = cells.iter().map(Cell::volume).sum();
    let coarse: Vec<f64> = cells.iter().map(|c| gauss3(f, &c.lo, &c.hi)).collect();
    let mut estimate = pairwise_sum(&coarse).abs();
    for tol in [opts.rel_tol * 100.0, opts.rel_tol] {
        let budget = CellBudget { abs_tol: tol * estimate, box_volume, max_depth: opts.max_depth };
        let parts = map(&cells, &budget);
        estimate = pairwise_sum(&parts);
        if !estimate.is_finite() {
            return Err(Error::Nonconvergence("volume integrand is not finite".into()));
        }
    }
    Ok(estimate)
}

/// Sequential `int_box dq / v(q, sqrt t)`.
pub fn volume_integral(catalog: &TupleCatalog, bx: &[(Rational, Rational)], t: f64, opts: &VolumeOptions) -> Result<f64> {
    if bx.len() != catalog.dim {
        return Err(Error::DimensionMismatch { expected: catalog.dim, found: bx.len() });
    }
    if t <= 0.0 {
        return Err(Error::Invalid("t must be positive".into()));
    }
    let f = inverse_v(catalog, t);
    integrate_box_with(&f, &box_f64(bx), opts, |cells, budget| {
        cells.iter().map(|c| integrate_cell(&f, c, budget)).collect()
    })
}

/// Default sample times: 12 points geometric in `[1e-9, 1e-3]`.
pub fn default_times() -> Vec<f64> {
    (0..12).map(|i| libm::pow(10.0, -9.0 + 6.0 * i as f64 / 11.0)).collect()
}

/// Result of [`fit_exponents`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceFitResult {
    /// Power of `1/t`.
    pub gamma: f64,
    /// Power of `|ln t|`.
    pub log_power: u32,
    /// Leading constant.
    pub constant: f64,
    /// Residual sum of squares of the log-space fit.
    pub residual: f64,
}

/// Fits `ln V = gamma ln(1/t) + k ln ln(1/t) + ln C` for each `k` in `0..=3` and
/// keeps the `k` with the smallest residual (ties go to the smaller `k`).
pub fn fit_exponents(samples: &[(f64, f64)]) -> Result<TraceFitResult> {
    if samples.len() < 6 {
        return Err(Error::DegenerateFit(alloc::format!("{} samples, need at least 6", samples.len())));
    }
    if samples.iter().any(|&(t, v)| !(t > 0.0 && t < 1.0 && v > 0.0)) {
        return Err(Error::DegenerateFit("samples need 0 < t < 1 and V > 0".into()));
    }
    let (tmin, tmax) = samples.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &(t, _)| (a.min(t), b.max(t)));
    if libm::log10(tmax / tmin) < 3.0 - 1e-9 {
        return Err(Error::DegenerateFit("samples span less than three decades".into()));
    }
    let rows: Vec<Vec<f64>> = samples.iter().map(|&(t, _)| vec![libm::log(1.0 / t), 1.0]).collect();
    let mut best: Option<TraceFitResult> = None;
    for k in 0..=3u32 {
        let y: Vec<f64> =
            samples.iter().map(|&(t, v)| libm::log(v) - k as f64 * libm::log(libm::log(1.0 / t))).collect();
        let fit = least_squares(&rows, &y, None)?;
        let cand = TraceFitResult {
            gamma: fit.coef[0],
            log_power: k,
            constant: libm::exp(fit.coef[1]),
            residual: fit.residual,
        };
        if best.map_or(true, |b| cand.residual < b.residual) {
            best = Some(cand);
        }
    }
    best.ok_or_else(|| Error::DegenerateFit("no candidate".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyfield::{int, rat};

    fn grushin() -> Frame {
        Frame::parse(&[&["1", "0"], &["0", "x1"]]).unwrap()
    }

    #[test]
    fn catalogs() {
        let r = Frame::parse(&[&["1", "0"], &["0", "1"]]).unwrap();
        let c = build_catalog(&r, 2).unwrap();
        assert_eq!(c.entries.len(), 1);
        assert_eq!(c.entries[0].total_len, 2);
        let c = build_catalog(&grushin(), 3).unwrap();
        let names: Vec<(alloc::string::String, u32)> = c
            .entries
            .iter()
            .map(|e| (alloc::format!("{}{}", e.words[0], e.words[1]), e.total_len))
            .collect();
        assert_eq!(names, [("(1)(2)".into(), 2), ("(1)(1,2)".into(), 3)]);
    }

    #[test]
    fn grushin_v_function() {
        let c = build_catalog(&grushin(), 3).unwrap();
        let v = c.v_value(&[rat(1, 3), int(0)], 0.5).unwrap();
        assert!((v - (0.25 / 3.0 + 0.125)).abs() < 1e-15);
        assert!((c.v_value(&[int(0), int(0)], 0.1).unwrap() - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn riemannian_integral() {
        let r = Frame::parse(&[&["1", "0"], &["0", "1"]]).unwrap();
        let c = build_catalog(&r, 2).unwrap();
        let bx = [(int(0), int(1)), (int(0), int(1))];
        let v = volume_integral(&c, &bx, 1e-2, &VolumeOptions::default()).unwrap();
        assert!((v - 100.0).abs() < 1e-9);
    }

    #[test]
    fn lattice_bound() {
        let bx = [(int(-1), int(1)), (int(-1), int(1))];
        assert_eq!(lattice_q_max(&grushin(), &bx).unwrap(), 4);
    }

    #[test]
    fn fits() {
        let ts = default_times();
        let s: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 1.0 / t)).collect();
        let f = fit_exponents(&s).unwrap();
        assert_eq!(f.log_power, 0);
        assert!((f.gamma - 1.0).abs() < 1e-6 && (f.constant - 1.0).abs() < 1e-6);
        let s: Vec<(f64, f64)> = ts.iter().map(|&t| (t, -libm::log(t) / t)).collect();
        let f = fit_exponents(&s).unwrap();
        assert_eq!(f.log_power, 1);
        assert!((f.gamma - 1.0).abs() < 1e-6);
        assert!(matches!(fit_exponents(&s[..5]), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_exponents(&s[..6]), Err(Error::DegenerateFit(_))));
    }
}
