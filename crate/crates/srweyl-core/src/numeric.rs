//! Floating-point utilities: adaptive Gauss–Kronrod quadrature, Hurwitz zeta,
//! deterministic summation and small least-squares solves.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (the 7-point rule).
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7K15 panel: returns (Kronrod estimate, |Kronrod - Gauss|).
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = K15_WEIGHTS[7] * fc;
    let mut g = G7_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        k += K15_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G7_WEIGHTS[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Tolerances for [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    /// Absolute error target.
    pub abs_tol: f64,
    /// Relative error target.
    pub rel_tol: f64,
    /// Maximum number of panels.
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-14, rel_tol: 1e-11, max_panels: 20_000 }
    }
}

impl QuadOptions {
    /// Options with the given relative tolerance and a tiny absolute floor.
    pub fn rel(rel_tol: f64) -> Self {
        QuadOptions { rel_tol, abs_tol: 1e-300, ..Default::default() }
    }
}

/// Adaptive G7K15 quadrature of `f` over `[a, b]`, bisecting the panel with the
/// largest error estimate until the total error meets the tolerance.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut panels = vec![(a, b, v, e)];
    loop {
        let total: f64 = pairwise_sum(&panels.iter().map(|p| p.2).collect::<Vec<_>>());
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Nonconvergence("non-finite integrand".into()));
        }
        if err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            return Ok(total);
        }
        if panels.len() >= opts.max_panels {
            return Err(Error::Nonconvergence(alloc::format!(
                "{} panels, error estimate {err:e} for value {total:e}",
                panels.len()
            )));
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (pa, pb, _, _) = panels[worst];
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            return Err(Error::Nonconvergence("panel width underflow".into()));
        }
        let (v1, e1) = gk15(&mut f, pa, mid);
        let (v2, e2) = gk15(&mut f, mid, pb);
        panels[worst] = (pa, mid, v1, e1);
        panels.push((mid, pb, v2, e2));
    }
}

/// Integral over `[a, inf)` for integrands decaying at least exponentially.
///
/// The range is cut at the first `T = a + 2^k` where `|f(T)| < 1e-18` (checked at a
/// few points beyond), then integrated on `[a, T]`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, opts: QuadOptions) -> Result<f64> {
    let mut width = 1.0;
    loop {
        let t = a + width;
        let tail = (0..4).map(|i| f(t * (1.0 + 0.25 * i as f64)).abs()).fold(0.0, f64::max);
        if tail < 1e-18 {
            break;
        }
        width *= 2.0;
        if width > 1e12 {
            return Err(Error::Nonconvergence("integrand does not decay".into()));
        }
    }
    integrate(f, a, a + width, opts)
}

/// Sum in a fixed binary-tree order; bit-stable for a given input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (l, r) = xs.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

// B_{2k} for k = 1..=12.
const BERNOULLI: [f64; 12] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
];

/// Hurwitz zeta `sum_{k>=0} (k + a)^{-s}` for real `s > 1`, `a > 0`, by Euler–Maclaurin.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0 && a > 0.0, "hurwitz_zeta needs s > 1 and a > 0");
    const N: usize = 16;
    let mut head = 0.0;
    for k in 0..N {
        head += libm::pow(k as f64 + a, -s);
    }
    let x = N as f64 + a;
    let mut tail = libm::pow(x, 1.0 - s) / (s - 1.0) + 0.5 * libm::pow(x, -s);
    // term_k = B_{2k}/(2k)! * s(s+1)...(s+2k-2) * x^{-s-2k+1}
    let mut rising = s;
    let mut fact = 2.0;
    let mut xpow = libm::pow(x, -s - 1.0);
    for (k, b) in BERNOULLI.iter().enumerate() {
        let term = b / fact * rising * xpow;
        tail += term;
        let kk = (k + 1) as f64;
        rising *= (s + 2.0 * kk - 1.0) * (s + 2.0 * kk);
        fact *= (2.0 * kk + 1.0) * (2.0 * kk + 2.0);
        xpow /= x * x;
    }
    head + tail
}

/// Riemann zeta for real `s > 1`.
pub fn riemann_zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1.0)
}

/// Dirichlet beta `sum_k (-1)^k (2k+1)^{-s}` for real `s > 1`.
pub fn dirichlet_beta(s: f64) -> f64 {
    libm::pow(4.0, -s) * (hurwitz_zeta(s, 0.25) - hurwitz_zeta(s, 0.75))
}

/// Gamma function.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Solution of a linear least-squares problem.
#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquares {
    /// Fitted coefficients, one per design column.
    pub coef: Vec<f64>,
    /// Sum of squared residuals.
    pub residual: f64,
}

/// Minimizes `sum_i w_i (y_i - rows_i . c)^2` by Householder QR.
///
/// Fails with `DegenerateFit` when the weighted design matrix is rank deficient.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64], weights: Option<&[f64]>) -> Result<LeastSquares> {
    let m = rows.len();
    let n = rows.first().map(|r| r.len()).unwrap_or(0);
    if m < n || n == 0 || y.len() != m {
        return Err(Error::DegenerateFit(alloc::format!("{m} samples for {n} unknowns")));
    }
    let sw: Vec<f64> = (0..m).map(|i| weights.map(|w| w[i].sqrt()).unwrap_or(1.0)).collect();
    let mut a: Vec<Vec<f64>> = rows.iter().zip(&sw).map(|(r, s)| r.iter().map(|v| v * s).collect()).collect();
    let mut b: Vec<f64> = y.iter().zip(&sw).map(|(v, s)| v * s).collect();
    let scale: f64 = a.iter().flatten().fold(0.0, |acc, v| acc.max(v.abs()));
    for j in 0..n {
        let norm = libm::sqrt((j..m).map(|i| a[i][j] * a[i][j]).sum::<f64>());
        if norm <= 1e-12 * scale * libm::sqrt(m as f64) {
            return Err(Error::DegenerateFit("design matrix is rank deficient".into()));
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..m).map(|i| a[i][j]).collect();
        v[0] -= alpha;
        let vn: f64 = v.iter().map(|x| x * x).sum();
        if vn > 0.0 {
            for c in j..n {
                let d: f64 = (j..m).map(|i| v[i - j] * a[i][c]).sum::<f64>() * 2.0 / vn;
                for i in j..m {
                    a[i][c] -= d * v[i - j];
                }
            }
            let d: f64 = (j..m).map(|i| v[i - j] * b[i]).sum::<f64>() * 2.0 / vn;
            for i in j..m {
                b[i] -= d * v[i - j];
            }
        }
    }
    let mut coef = vec![0.0; n];
    for j in (0..n).rev() {
        let s: f64 = (j + 1..n).map(|c| a[j][c] * coef[c]).sum();
        coef[j] = (b[j] - s) / a[j][j];
    }
    let residual = b[n..].iter().map(|v| v * v).sum();
    Ok(LeastSquares { coef, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn quadrature_basics() {
        let v = integrate(|x| x * x, 0.0, 3.0, QuadOptions::default()).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        let v = integrate(libm::sqrt, 0.0, 1.0, QuadOptions::default()).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
        let v = integrate_to_infinity(|x| libm::exp(-x), 0.0, QuadOptions::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zeta_values() {
        assert!((riemann_zeta(2.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((riemann_zeta(4.0) - PI.powi(4) / 90.0).abs() < 1e-14);
        // Catalan's constant
        assert!((dirichlet_beta(2.0) - 0.915_965_594_177_219).abs() < 1e-13);
        assert!((dirichlet_beta(3.0) - PI.powi(3) / 32.0).abs() < 1e-14);
        let direct: f64 = (0..200_000).map(|k| (k as f64 + 0.3).powf(-3.0)).sum();
        assert!((hurwitz_zeta(3.0, 0.3) - direct).abs() < 1e-9);
    }

    #[test]
    fn fit_line() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 1.0]).collect();
        let y: Vec<f64> = (0..5).map(|i| 3.0 * i as f64 - 2.0).collect();
        let r = least_squares(&rows, &y, None).unwrap();
        assert!((r.coef[0] - 3.0).abs() < 1e-12 && (r.coef[1] + 2.0).abs() < 1e-12);
        assert!(r.residual < 1e-20);
        let bad: Vec<Vec<f64>> = (0..5).map(|_| vec![1.0, 1.0]).collect();
        assert!(matches!(least_squares(&bad, &y, None), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn pairwise_is_order_fixed() {
        let xs: Vec<f64> = (0..1000).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        assert_eq!(pairwise_sum(&xs), pairwise_sum(&xs.clone()));
        assert!((pairwise_sum(&xs) - xs.iter().sum::<f64>()).abs() < 1e-12);
    }
}
