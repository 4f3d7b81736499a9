//! Exactly enumerable model spectra, heat traces with certified truncation
//! bounds, closed-form heat kernels and the flat-term Weyl integrals.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numeric::{integrate, integrate_to_infinity, least_squares, pairwise_sum, QuadOptions};

/// Which closed-form model a spectrum comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelKind {
    /// Heisenberg nilmanifold: `m(2l+1)` with multiplicity `2m`, plus the flat 2-torus.
    HeisenbergQuotient,
    /// Grushin structure on the sphere: `l(l+1) - m^2`, `|m| <= l`.
    GrushinSphere,
    /// bi-Heisenberg nilmanifold with frequencies `omega1, omega2`.
    BiHeisenberg {
        /// First frequency.
        omega1: f64,
        /// Second frequency.
        omega2: f64,
    },
    /// `lambda_j = j^(1/gamma)` for `j >= 1`, so that `N(lambda) = floor(lambda^gamma)`.
    Synthetic {
        /// Growth exponent.
        gamma: f64,
    },
}

/// Levels `(eigenvalue, multiplicity)` in increasing order, up to a cutoff.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumModel {
    kind: ModelKind,
    cutoff: f64,
    levels: Vec<(f64, u64)>,
}

/// Heat trace at one time with its truncation bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatTraceSample {
    /// Time.
    pub t: f64,
    /// `sum mult * exp(-t (lambda + shift))` over the enumerated levels.
    pub z: f64,
    /// Bound on the contribution of eigenvalues beyond the cutoff.
    pub tail_bound: f64,
}

/// Levels per block of the heat-trace summation.
pub const BLOCK: usize = 4096;

fn sorted_levels(mut raw: Vec<(f64, u64)>) -> Vec<(f64, u64)> {
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, u64)> = Vec::with_capacity(raw.len());
    for (v, m) in raw {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += m,
            _ => out.push((v, m)),
        }
    }
    out
}

fn integer_levels(counts: &[u64]) -> Vec<(f64, u64)> {
    counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(v, &c)| (v as f64, c)).collect()
}

/// `r_2(k)` for `k <= n_max`: representations as a sum of two squares.
pub fn sum_of_two_squares_counts(n_max: u64) -> Vec<u64> {
    let mut r = vec![0u64; n_max as usize + 1];
    let k = isqrt(n_max) as i64;
    for a in -k..=k {
        let rest = n_max - (a * a) as u64;
        let b_max = isqrt(rest) as i64;
        for b in -b_max..=b_max {
            r[(a * a + b * b) as usize] += 1;
        }
    }
    r
}

fn isqrt(n: u64) -> u64 {
    let mut r = libm::sqrt(n as f64) as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

fn check_cutoff(cutoff: f64) -> Result<()> {
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(Error::Invalid("cutoff must be positive and finite".into()));
    }
    Ok(())
}

impl SpectrumModel {
    /// Grushin sphere: every `l(l+1) - m^2 <= cutoff`, aggregated by value.
    pub fn grushin_sphere(cutoff: f64) -> Result<Self> {
        check_cutoff(cutoff)?;
        let lam = cutoff.floor() as u64;
        let mut counts = vec![0u64; lam as usize + 1];
        // l(l+1) - m^2 >= l, so l <= cutoff.
        for l in 0..=lam {
            let top = l * (l + 1);
            let m_min = if top > lam { isqrt(top - lam - 1) + 1 } else { 0 };
            for m in m_min..=l {
                counts[(top - m * m) as usize] += if m == 0 { 1 } else { 2 };
            }
        }
        Ok(SpectrumModel { kind: ModelKind::GrushinSphere, cutoff, levels: integer_levels(&counts) })
    }

    /// Heisenberg quotient: `m(2l+1)` with multiplicity `2m`, merged with the torus
    /// levels `2 pi n` of multiplicity `r_2(n)`.
    pub fn heisenberg(cutoff: f64) -> Result<Self> {
        check_cutoff(cutoff)?;
        let lam = cutoff.floor() as u64;
        let mut counts = vec![0u64; lam as usize + 1];
        let mut odd = 1;
        while odd <= lam {
            for m in 1..=lam / odd {
                counts[(m * odd) as usize] += 2 * m;
            }
            odd += 2;
        }
        let mut raw = integer_levels(&counts);
        raw.extend(torus2_levels(cutoff));
        Ok(SpectrumModel { kind: ModelKind::HeisenbergQuotient, cutoff, levels: sorted_levels(raw) })
    }

    /// bi-Heisenberg quotient: `m((2l+1) omega1 + (2l'+1) omega2)` with multiplicity
    /// `2m^2`, merged with the 4-torus levels `2 pi (omega1 a + omega2 b)`.
    pub fn biheisenberg(omega1: f64, omega2: f64, cutoff: f64) -> Result<Self> {
        check_cutoff(cutoff)?;
        if !(omega1 > 0.0 && omega2 > 0.0) {
            return Err(Error::Invalid("frequencies must be positive".into()));
        }
        let mut raw = Vec::new();
        let mut m = 1u64;
        while m as f64 * (omega1 + omega2) <= cutoff {
            let mut a = 1u64;
            while m as f64 * (a as f64 * omega1 + omega2) <= cutoff {
                let mut b = 1u64;
                loop {
                    let v = m as f64 * (a as f64 * omega1 + b as f64 * omega2);
                    if v > cutoff {
                        break;
                    }
                    raw.push((v, 2 * m * m));
                    b += 2;
                }
                a += 2;
            }
            m += 1;
        }
        raw.extend(torus4_levels(omega1, omega2, cutoff));
        Ok(SpectrumModel { kind: ModelKind::BiHeisenberg { omega1, omega2 }, cutoff, levels: sorted_levels(raw) })
    }

    /// Synthetic spectrum `j^(1/gamma)`, `j >= 1`.
    pub fn synthetic(gamma: f64, cutoff: f64) -> Result<Self> {
        check_cutoff(cutoff)?;
        if !(gamma > 0.0) {
            return Err(Error::Invalid("gamma must be positive".into()));
        }
        let jmax = libm::floor(libm::pow(cutoff, gamma)) as u64;
        let levels = (1..=jmax)
            .map(|j| (libm::pow(j as f64, 1.0 / gamma), 1))
            .filter(|&(v, _)| v <= cutoff)
            .collect();
        Ok(SpectrumModel { kind: ModelKind::Synthetic { gamma }, cutoff, levels })
    }

    /// Model kind.
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Enumeration cutoff.
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Levels in increasing order.
    pub fn levels(&self) -> &[(f64, u64)] {
        &self.levels
    }

    /// `N(lambda)`, the number of eigenvalues `<= lambda` with multiplicity.
    pub fn counting(&self, lambda: f64) -> Result<u64> {
        if lambda > self.cutoff {
            return Err(Error::CutoffTooSmall(alloc::format!("lambda = {lambda} exceeds the cutoff {}", self.cutoff)));
        }
        let end = self.levels.partition_point(|l| l.0 <= lambda);
        Ok(self.levels[..end].iter().map(|l| l.1).sum())
    }

    /// An explicit upper bound `U(lambda) >= N(lambda)` valid for every `lambda >= 0`.
    pub fn counting_upper_bound(&self, lambda: f64) -> f64 {
        let lambda = lambda.max(0.0);
        match self.kind {
            ModelKind::GrushinSphere => {
                // (l + 1/2)^2 - m^2 factors as (2i+1)(2j+1)/4 with i = l - m, j = l + m.
                let x = 4.0 * lambda + 1.0;
                x * (1.0 + libm::log(x))
            }
            ModelKind::HeisenbergQuotient => {
                let r = libm::sqrt(lambda / (2.0 * PI));
                1.5 * lambda * lambda + lambda + PI * (r + 1.0) * (r + 1.0)
            }
            ModelKind::BiHeisenberg { omega1, omega2 } => {
                let a = lambda / (2.0 * omega1);
                let b = lambda / (2.0 * omega2);
                let mm = libm::floor(lambda / (omega1 + omega2));
                // sum_{m <= M} 2m^2 (a/m + 1)(b/m + 1) in closed form
                let main = 2.0 * (a * b * mm + (a + b) * mm * (mm + 1.0) / 2.0 + mm * (mm + 1.0) * (2.0 * mm + 1.0) / 6.0);
                let r1 = libm::sqrt(lambda / (2.0 * PI * omega1));
                let r2 = libm::sqrt(lambda / (2.0 * PI * omega2));
                main + libm::pow((2.0 * r1 + 1.0) * (2.0 * r2 + 1.0), 2.0)
            }
            ModelKind::Synthetic { gamma } => libm::pow(lambda, gamma),
        }
    }

    /// Bound on `sum_{lambda_j > cutoff} exp(-t (lambda_j + shift))`, from
    /// `int_cutoff^inf t e^{-t lambda} U(lambda) d lambda`.
    pub fn tail_bound(&self, t: f64, shift: f64) -> f64 {
        let c = self.cutoff;
        let f = |u: f64| libm::exp(-u) * self.counting_upper_bound(c + u / t);
        let v = integrate_to_infinity(f, 0.0, QuadOptions::rel(1e-6)).unwrap_or(f64::INFINITY);
        libm::exp(-t * (c + shift)) * v
    }

    /// Per-block partial sums of the heat trace, blocks of [`BLOCK`] levels.
    pub fn block_sums(&self, t: f64, shift: f64) -> Vec<f64> {
        self.levels.chunks(BLOCK).map(|b| block_sum(b, t, shift)).collect()
    }

    /// `Z(t) = sum mult exp(-t (lambda + shift))` with its truncation bound.
    pub fn heat_trace(&self, t: f64, shift: f64) -> Result<HeatTraceSample> {
        self.heat_trace_from_blocks(t, shift, &self.block_sums(t, shift))
    }

    /// Finishes a heat trace from block sums (in block order).
    pub fn heat_trace_from_blocks(&self, t: f64, shift: f64, blocks: &[f64]) -> Result<HeatTraceSample> {
        if !(t > 0.0) {
            return Err(Error::Invalid("t must be positive".into()));
        }
        let z = pairwise_sum(blocks);
        let tail = self.tail_bound(t, shift);
        if !(tail <= 1e-6 * z) {
            return Err(Error::CutoffTooSmall(alloc::format!(
                "tail bound {tail:e} exceeds 1e-6 of Z = {z:e} at t = {t:e}"
            )));
        }
        Ok(HeatTraceSample { t, z, tail_bound: tail })
    }

    /// Partial Dirichlet series `sum mult (lambda + shift)^{-s}` over positive shifted levels.
    pub fn partial_zeta(&self, s: f64, shift: f64) -> f64 {
        let terms: Vec<f64> = self
            .levels
            .iter()
            .filter(|l| l.0 + shift > 0.0)
            .map(|&(v, m)| m as f64 * libm::pow(v + shift, -s))
            .collect();
        pairwise_sum(&terms)
    }

    /// Bound on the Dirichlet-series tail beyond the cutoff:
    /// `int_cutoff^inf s (lambda + shift)^{-s-1} U(lambda) d lambda`.
    pub fn zeta_tail_bound(&self, s: f64, shift: f64) -> f64 {
        let c = self.cutoff;
        // lambda = c e^u
        let f = |u: f64| {
            let lam = c * libm::exp(u);
            s * libm::pow(lam + shift, -s - 1.0) * self.counting_upper_bound(lam) * lam
        };
        let mut total = 0.0;
        let mut a = 0.0;
        for _ in 0..200 {
            let piece = integrate(f, a, a + 1.0, QuadOptions::rel(1e-8)).unwrap_or(f64::INFINITY);
            total += piece;
            if piece < 1e-16 * total {
                break;
            }
            a += 1.0;
        }
        total
    }

    /// Shifted heat trace at many times; the helper used by the two-term fits.
    pub fn heat_traces(&self, times: &[f64], shift: f64) -> Result<Vec<HeatTraceSample>> {
        times.iter().map(|&t| self.heat_trace(t, shift)).collect()
    }
}

/// `sum_{j >= 1} exp(-t j^{1/gamma})` for the synthetic spectrum without a cutoff:
/// direct summation below `j = 10^5`, Euler-Maclaurin beyond.
pub fn synthetic_heat_trace(gamma: f64, t: f64) -> Result<f64> {
    if !(gamma > 0.0 && t > 0.0) {
        return Err(Error::Invalid("need gamma > 0 and t > 0".into()));
    }
    const J0: u64 = 100_000;
    let f = |u: f64| libm::exp(-t * libm::pow(u, 1.0 / gamma));
    let head: Vec<f64> = (1..J0).map(|j| f(j as f64)).collect();
    let a = J0 as f64;
    let v0 = libm::pow(a, 1.0 / gamma);
    // u = v^gamma
    let tail = integrate_to_infinity(
        |w| {
            let v = v0 + w;
            gamma * libm::pow(v, gamma - 1.0) * libm::exp(-t * v)
        },
        0.0,
        QuadOptions { abs_tol: 1e-300, rel_tol: 1e-13, max_panels: 20_000 },
    )?;
    let d1 = crate::expand::fd_derivative(f, a, 1, 0.1 * a);
    let d3 = crate::expand::fd_derivative(f, a, 3, 0.1 * a);
    Ok(pairwise_sum(&head) + tail + f(a) / 2.0 - d1 / 12.0 + d3 / 720.0)
}

/// `sum mult exp(-t (lambda + shift))` over one block, in level order.
pub fn block_sum(levels: &[(f64, u64)], t: f64, shift: f64) -> f64 {
    levels.iter().map(|&(v, m)| m as f64 * libm::exp(-t * (v + shift))).sum()
}

/// Levels `2 pi n` with multiplicity `r_2(n)` of the torus `R^2 / sqrt(2 pi) Z^2`.
pub fn torus2_levels(cutoff: f64) -> Vec<(f64, u64)> {
    let n_max = libm::floor(cutoff / (2.0 * PI)) as u64;
    let r = sum_of_two_squares_counts(n_max);
    r.iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(n, &c)| (2.0 * PI * n as f64, c))
        .filter(|&(v, _)| v <= cutoff)
        .collect()
}

/// Levels `2 pi (omega1 a + omega2 b)` with multiplicity `r_2(a) r_2(b)` of
/// `R^4 / sqrt(2 pi) Z^4` for the metric weighted by the two frequencies.
pub fn torus4_levels(omega1: f64, omega2: f64, cutoff: f64) -> Vec<(f64, u64)> {
    let amax = libm::floor(cutoff / (2.0 * PI * omega1)) as u64;
    let bmax = libm::floor(cutoff / (2.0 * PI * omega2)) as u64;
    let ra = sum_of_two_squares_counts(amax);
    let rb = sum_of_two_squares_counts(bmax);
    let mut raw = Vec::new();
    for (a, &ca) in ra.iter().enumerate().filter(|(_, &c)| c > 0) {
        for (b, &cb) in rb.iter().enumerate().filter(|(_, &c)| c > 0) {
            let v = 2.0 * PI * (omega1 * a as f64 + omega2 * b as f64);
            if v <= cutoff {
                raw.push((v, ca * cb));
            }
        }
    }
    sorted_levels(raw)
}

/// Smallest cutoff (on a geometric ladder) whose tail bound at `t_min` is below `abs_tol`.
pub fn cutoff_for(kind: ModelKind, t_min: f64, shift: f64, abs_tol: f64) -> f64 {
    let mut cutoff = 10.0 / t_min;
    loop {
        let probe = SpectrumModel { kind, cutoff, levels: Vec::new() };
        if probe.tail_bound(t_min, shift) <= abs_tol {
            return cutoff;
        }
        cutoff *= 1.25;
    }
}

/// Default spectral shift for the sphere model.
pub const SPHERE_SHIFT: f64 = 0.25;

/// Fits `Z(t) ~ A |ln t| / t + B / t` by least squares weighted by `t^2`.
pub fn two_term_fit(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    if samples.len() < 3 {
        return Err(Error::IllConditioned("need at least three samples".into()));
    }
    let (tmin, tmax) = samples.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &(t, _)| (a.min(t), b.max(t)));
    if !(tmin > 0.0) || tmax / tmin < 10.0 * (1.0 - 1e-12) {
        return Err(Error::IllConditioned("time range shorter than one decade".into()));
    }
    let rows: Vec<Vec<f64>> = samples.iter().map(|&(t, _)| vec![-libm::log(t) / t, 1.0 / t]).collect();
    let y: Vec<f64> = samples.iter().map(|&(_, z)| z).collect();
    let w: Vec<f64> = samples.iter().map(|&(t, _)| t * t).collect();
    let fit = least_squares(&rows, &y, Some(&w)).map_err(|e| Error::IllConditioned(alloc::format!("{e}")))?;
    Ok((fit.coef[0], fit.coef[1]))
}

/// Two-term constants of the sphere model from heat traces at `times`, with the
/// cutoff chosen so that truncation stays below `1e-8` at the smallest time.
pub fn grushin_sphere_two_term_fit(times: &[f64]) -> Result<(f64, f64)> {
    let t_min = times.iter().copied().fold(f64::INFINITY, f64::min);
    if !(t_min > 0.0) {
        return Err(Error::IllConditioned("times must be positive".into()));
    }
    let cutoff = cutoff_for(ModelKind::GrushinSphere, t_min, SPHERE_SHIFT, 1e-8);
    let model = SpectrumModel::grushin_sphere(cutoff)?;
    let samples: Vec<(f64, f64)> =
        model.heat_traces(times, SPHERE_SHIFT)?.iter().map(|s| (s.t, s.z)).collect();
    two_term_fit(&samples)
}

/// Expected sphere constants `A = 1/2`, `B = (euler_gamma + 4 ln 2) / 2`.
pub fn grushin_sphere_expected() -> (f64, f64) {
    (0.5, (crate::numeric::EULER_GAMMA + 4.0 * core::f64::consts::LN_2) / 2.0)
}

/// `4^{-s} (zeta(s, 1/4)^2 + zeta(s, 3/4)^2)`, the Dirichlet series of the
/// shifted sphere spectrum.
pub fn grushin_sphere_zeta(s: f64) -> f64 {
    use crate::numeric::hurwitz_zeta;
    libm::pow(4.0, -s) * (libm::pow(hurwitz_zeta(s, 0.25), 2.0) + libm::pow(hurwitz_zeta(s, 0.75), 2.0))
}

/// `2 zeta(s-1) (1 - 2^{-s}) zeta(s)`, the non-torus part of the Heisenberg series.
pub fn heisenberg_zeta_main(s: f64) -> f64 {
    use crate::numeric::riemann_zeta;
    2.0 * riemann_zeta(s - 1.0) * (1.0 - libm::pow(2.0, -s)) * riemann_zeta(s)
}

/// `(2 pi)^{-s} 4 zeta(s) beta(s)`, the zeta function of the 2-torus without the zero mode.
pub fn torus2_zeta(s: f64) -> f64 {
    use crate::numeric::{dirichlet_beta, riemann_zeta};
    libm::pow(2.0 * PI, -s) * 4.0 * riemann_zeta(s) * dirichlet_beta(s)
}

fn x_over_sinh(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x / libm::sinh(x)
    }
}

fn x_coth(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 3.0
    } else {
        x / libm::tanh(x)
    }
}

/// `int_R 2 tau / sinh(2 tau) d tau` (equal to `pi^2 / 4`), doubled from the half line.
pub fn heisenberg_diag_integral() -> Result<f64> {
    let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_panels: 10_000 };
    Ok(2.0 * integrate_to_infinity(|t| x_over_sinh(2.0 * t), 0.0, opts)?)
}

/// The diagonal value `(2 pi)^{-2} int 2 tau / sinh(2 tau) d tau` of the
/// Heisenberg heat kernel at time one (equal to `1/16`).
pub fn heisenberg_kernel_diag() -> Result<f64> {
    Ok(heisenberg_diag_integral()? / (4.0 * PI * PI))
}

/// Even oscillatory integral `2 int_0^T f(tau) cos(freq tau) d tau`, with `T` where
/// the envelope falls below `1e-18` of its start and panels of one half period.
fn even_cos_integral<F: Fn(f64) -> f64>(envelope: F, freq: f64) -> Result<f64> {
    let e0 = envelope(0.0).abs().max(f64::MIN_POSITIVE);
    let mut t_end = 1.0;
    while envelope(t_end).abs() > 1e-18 * e0 {
        t_end *= 2.0;
        if t_end > 1e6 {
            return Err(Error::Nonconvergence("kernel integrand does not decay".into()));
        }
    }
    let width = if freq.abs() > 0.0 { (PI / freq.abs()).min(1.0) } else { 1.0 };
    let panels = libm::ceil(t_end / width) as usize;
    if panels > 2_000_000 {
        return Err(Error::Nonconvergence("oscillation too fast for the requested point".into()));
    }
    let opts = QuadOptions { abs_tol: 1e-300, rel_tol: 1e-12, max_panels: 2000 };
    let mut parts = Vec::with_capacity(panels);
    for k in 0..panels {
        let a = k as f64 * width;
        let b = ((k + 1) as f64 * width).min(t_end);
        parts.push(integrate(|x| envelope(x) * libm::cos(freq * x), a, b, opts)?);
    }
    Ok(2.0 * pairwise_sum(&parts))
}

/// Heisenberg heat kernel
/// `(2 pi t)^{-2} int 2tau/sinh(2tau) exp((i y tau - |x|^2 tau coth(2 tau)) / t) d tau`
/// at horizontal offset `x` and vertical offset `y`.
pub fn heisenberg_kernel(t: f64, x: [f64; 2], y: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Invalid("t must be positive".into()));
    }
    let r2 = x[0] * x[0] + x[1] * x[1];
    // tau coth(2 tau) = x_coth(2 tau) / 2
    let env = |tau: f64| x_over_sinh(2.0 * tau) * libm::exp(-r2 * 0.5 * x_coth(2.0 * tau) / t);
    let v = even_cos_integral(env, y / t)?;
    Ok(v / libm::pow(2.0 * PI * t, 2.0))
}

/// Flat Baouendi–Grushin heat kernel
/// `(2 pi t)^{-3/2} int sqrt(tau/sinh tau) exp((i tau (x2'-x2) - (x1^2+x1'^2) tau coth(tau)/2 - 2 x1 x1') / t) d tau`,
/// real part.
pub fn grushin_flat_kernel(t: f64, x: [f64; 2], xp: [f64; 2]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Invalid("t must be positive".into()));
    }
    let a = 0.5 * (x[0] * x[0] + xp[0] * xp[0]);
    let env = |tau: f64| libm::sqrt(x_over_sinh(tau)) * libm::exp(-a * x_coth(tau) / t);
    let v = even_cos_integral(env, (xp[1] - x[1]) / t)?;
    Ok(v * libm::exp(-2.0 * x[0] * xp[0] / t) / libm::pow(2.0 * PI * t, 1.5))
}

/// `(2 pi)^3 / (omega1 omega2 sqrt(omega1^2 + omega2^2))`, the Popp volume of the
/// bi-Heisenberg quotient.
pub fn biheis_popp_volume(omega1: f64, omega2: f64) -> f64 {
    libm::pow(2.0 * PI, 3.0) / (omega1 * omega2 * libm::sqrt(omega1 * omega1 + omega2 * omega2))
}

/// `sum_{l,l'} ((2l+1) omega1 + (2l'+1) omega2)^{-3}`, through
/// `a^{-3} = (1/2) int u^2 e^{-au} du` and `sum_l e^{-(2l+1) w u} = 1 / (2 sinh(w u))`.
pub fn biheis_series(omega1: f64, omega2: f64, tolerance: f64) -> Result<f64> {
    if !(omega1 > 0.0 && omega2 > 0.0) {
        return Err(Error::Invalid("frequencies must be positive".into()));
    }
    let f = |u: f64| {
        let a = x_over_sinh(omega1 * u) / omega1;
        let b = x_over_sinh(omega2 * u) / omega2;
        a * b
    };
    let opts = QuadOptions { abs_tol: 1e-300, rel_tol: tolerance, max_panels: 20_000 };
    Ok(integrate_to_infinity(f, 0.0, opts)? / 8.0)
}

/// Density of the Weyl measure with respect to Popp for the bi-Heisenberg model:
/// `omega1 omega2 sqrt(omega1^2+omega2^2) / (2 pi^3)` times [`biheis_series`].
pub fn biheis_density(omega1: f64, omega2: f64, tolerance: f64) -> Result<f64> {
    let s = biheis_series(omega1, omega2, tolerance)?;
    Ok(omega1 * omega2 * libm::sqrt(omega1 * omega1 + omega2 * omega2) / (2.0 * PI * PI * PI) * s)
}

/// Samples `(s, g(s))` on `[0, 1]`: a uniform grid merged with a geometric grid
/// from `s_min` up to one.
pub fn sample_profile<G: Fn(f64) -> f64>(g: G, uniform: usize, geometric: usize, s_min: f64) -> Vec<(f64, f64)> {
    let mut s: Vec<f64> = (0..=uniform).map(|i| i as f64 / uniform as f64).collect();
    let ratio = libm::log(1.0 / s_min);
    s.extend((0..geometric).map(|i| s_min * libm::exp(ratio * i as f64 / geometric as f64)));
    s.sort_by(f64::total_cmp);
    s.dedup();
    s.into_iter().map(|x| (x, g(x))).collect()
}

/// `|{g < t}| / t^{3/2} + (1/t) int_{t < g < 1} g^{-1/2}` for a profile given by
/// samples on `[0, 1]`, with `g` interpolated linearly between samples and both
/// terms integrated exactly on each segment.
pub fn flat_term_weyl(samples: &[(f64, f64)], t: f64) -> Result<f64> {
    if samples.len() < 2 || !(t > 0.0 && t < 1.0) {
        return Err(Error::Invalid("need at least two samples and 0 < t < 1".into()));
    }
    if samples.iter().any(|&(_, g)| g < 0.0 || !g.is_finite()) {
        return Err(Error::Invalid("profile must be finite and nonnegative".into()));
    }
    let mut sub = Vec::with_capacity(samples.len());
    let mut inv = Vec::with_capacity(samples.len());
    for w in samples.windows(2) {
        let ((s0, g0), (s1, g1)) = (w[0], w[1]);
        let ds = s1 - s0;
        if ds <= 0.0 {
            return Err(Error::Invalid("sample abscissae must increase".into()));
        }
        sub.push(ds * fraction_below(g0, g1, t));
        inv.push(ds * mean_inv_sqrt(g0, g1, t, 1.0));
    }
    Ok(pairwise_sum(&sub) / libm::pow(t, 1.5) + pairwise_sum(&inv) / t)
}

// Fraction of a segment on which the linear interpolant from g0 to g1 is below t.
fn fraction_below(g0: f64, g1: f64, t: f64) -> f64 {
    let (lo, hi) = if g0 <= g1 { (g0, g1) } else { (g1, g0) };
    if hi < t {
        1.0
    } else if lo >= t {
        0.0
    } else {
        (t - lo) / (hi - lo)
    }
}

// Average over a segment of g^{-1/2} restricted to a < g < b, g linear from g0 to g1.
fn mean_inv_sqrt(g0: f64, g1: f64, a: f64, b: f64) -> f64 {
    let (lo, hi) = if g0 <= g1 { (g0, g1) } else { (g1, g0) };
    if hi - lo <= 1e-300 {
        return if lo > a && lo < b { 1.0 / libm::sqrt(lo) } else { 0.0 };
    }
    let l = lo.max(a);
    let h = hi.min(b);
    if h <= l {
        return 0.0;
    }
    2.0 * (libm::sqrt(h) - libm::sqrt(l)) / (hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_low_levels() {
        let m = SpectrumModel::grushin_sphere(6.0).unwrap();
        // l(l+1) - l^2 = l contributes at every integer
        assert_eq!(m.levels(), &[(0.0, 1), (1.0, 2), (2.0, 3), (3.0, 2), (4.0, 2), (5.0, 4), (6.0, 3)]);
        assert_eq!(m.counting(2.0).unwrap(), 6);
        assert!(m.counting(7.0).is_err());
    }

    #[test]
    fn heisenberg_low_levels() {
        let m = SpectrumModel::heisenberg(7.0).unwrap();
        assert_eq!(m.levels()[0], (0.0, 1));
        assert_eq!(m.levels()[1], (1.0, 2));
        // 3 = 1*3 (mult 2) and 3 = 3*1 (mult 6)
        assert!(m.levels().contains(&(3.0, 8)));
        assert!(m.levels().contains(&(2.0 * PI, 4)));
    }

    #[test]
    fn biheisenberg_low_levels() {
        let m = SpectrumModel::biheisenberg(1.0, 1.5, 3.0).unwrap();
        assert_eq!(m.levels()[1], (2.5, 2));
        let sym = SpectrumModel::biheisenberg(1.0, 1.0, 10.0).unwrap();
        assert!(sym.levels().contains(&(2.0, 2)));
        // (2l+1) + (2l'+1) = 4 from (1,3) and (3,1), plus m = 2 from (1,1): 2 + 2 + 8
        assert!(sym.levels().contains(&(4.0, 12)));
    }

    #[test]
    fn counting_bounds_hold() {
        let cases = [
            SpectrumModel::grushin_sphere(2000.0).unwrap(),
            SpectrumModel::heisenberg(2000.0).unwrap(),
            SpectrumModel::biheisenberg(1.0, 2.0, 200.0).unwrap(),
            SpectrumModel::synthetic(1.5, 500.0).unwrap(),
        ];
        for m in &cases {
            for k in 0..50 {
                let lam = m.cutoff() * k as f64 / 50.0;
                assert!(m.counting(lam).unwrap() as f64 <= m.counting_upper_bound(lam), "{:?} {lam}", m.kind());
            }
        }
    }

    #[test]
    fn trace_limits() {
        let m = SpectrumModel::synthetic(1.0, 2e5).unwrap();
        let z = m.heat_trace(1e-3, 0.0).unwrap();
        assert!((z.z * 1e-3 - 1.0).abs() < 1e-3);
        let g = SpectrumModel::grushin_sphere(50.0).unwrap();
        assert!((g.heat_trace(40.0, 0.0).unwrap().z - 1.0).abs() < 1e-12);
        assert!(matches!(g.heat_trace(1e-3, 0.0), Err(Error::CutoffTooSmall(_))));
    }

    #[test]
    fn synthetic_trace_matches_direct_sum() {
        for gamma in [0.5, 1.0, 2.0] {
            let t = 1e-4;
            let direct: f64 = (1..3_000_000u64).map(|j| libm::exp(-t * libm::pow(j as f64, 1.0 / gamma))).sum();
            let tail_free = libm::exp(-t * libm::pow(3e6, 1.0 / gamma)) < 1e-30;
            let em = synthetic_heat_trace(gamma, t).unwrap();
            if tail_free {
                assert!((em / direct - 1.0).abs() < 1e-11, "{gamma} {em} {direct}");
            }
        }
        // gamma = 1 is geometric
        let t: f64 = 1e-3;
        let exact = libm::exp(-t) / (1.0 - libm::exp(-t));
        assert!((synthetic_heat_trace(1.0, t).unwrap() / exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_identity() {
        let (a, b) = (0.7, -1.3);
        let s: Vec<(f64, f64)> = (0..10)
            .map(|i| {
                let t = libm::pow(10.0, -4.0 + 2.0 * i as f64 / 9.0);
                (t, a * -libm::log(t) / t + b / t)
            })
            .collect();
        let (fa, fb) = two_term_fit(&s).unwrap();
        assert!((fa - a).abs() < 1e-10 && (fb - b).abs() < 1e-10);
        assert!(matches!(two_term_fit(&s[..4]), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn diagonal_constant() {
        assert!((heisenberg_diag_integral().unwrap() - PI * PI / 4.0).abs() < 1e-12);
        assert!((heisenberg_kernel_diag().unwrap() - 1.0 / 16.0).abs() < 1e-12);
        assert!((heisenberg_kernel(1.0, [0.0, 0.0], 0.0).unwrap() - 1.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn biheis_series_value() {
        let s = biheis_series(1.0, 1.0, 1e-12).unwrap();
        assert!((s - PI * PI / 48.0).abs() < 1e-11);
        // inner sum over l' in closed form, outer sum truncated with a tail far below 1e-6
        let direct: f64 = (0..200_000)
            .map(|l| {
                let c = (2 * l + 1) as f64;
                crate::numeric::hurwitz_zeta(3.0, (c + 2.0) / 4.0) / 64.0
            })
            .sum();
        assert!((biheis_series(1.0, 2.0, 1e-12).unwrap() - direct).abs() < 1e-6);
    }

    #[test]
    fn flat_term_square() {
        let s = sample_profile(|x| x * x, 20_000, 40_000, 1e-12);
        for t in [1e-6, 1e-4] {
            let w = flat_term_weyl(&s, t).unwrap();
            let exact = (1.0 - 0.5 * libm::log(t)) / t;
            assert!((w / exact - 1.0).abs() < 1e-6, "{w} {exact}");
        }
    }
}
