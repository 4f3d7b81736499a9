//! Weighted dilations of frames, nilpotentization, iterated dilations and a
//! sampled nilpotentizability probe.
//!
//! After recentering at a point `q`, the monomial `x^a d/dx_i` of a field picks
//! up the factor `eps^(<w,a> - w_i + 1)` under `eps * (dilation)^* X`. Scales can
//! stay symbolic: each symbolic scale is an extra polynomial variable appended
//! after the `n` spatial ones.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::flag::{compute_flag, is_privileged, DEFAULT_R_MAX};
use crate::polyfield::{Frame, MultiPoly, PolyVectorField, Rational};

/// Value of a dilation parameter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Scale {
    /// Kept as a polynomial variable.
    Symbolic,
    /// Substituted; zero keeps only the homogeneous part of that stage.
    Value(Rational),
}

/// One stage of an iterated dilation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stage {
    /// Recentering point, in the coordinates produced by the previous stage.
    pub point: Vec<Rational>,
    /// Per-coordinate weights; computed from nonholonomic orders when absent.
    pub weights: Option<Vec<u32>>,
    /// The dilation parameter.
    pub scale: Scale,
}

/// A frame whose coefficients may depend on symbolic dilation parameters.
///
/// Component polynomials live in `n + params.len()` variables; the spatial
/// variables come first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaledFrame {
    n: usize,
    params: Vec<String>,
    fields: Vec<Vec<MultiPoly>>,
    weights: Vec<Vec<u32>>,
}

impl ScaledFrame {
    /// Wraps a plain frame with no parameters.
    pub fn from_frame(frame: &Frame) -> Self {
        ScaledFrame {
            n: frame.dim(),
            params: Vec::new(),
            fields: frame.fields().iter().map(|f| f.components().to_vec()).collect(),
            weights: Vec::new(),
        }
    }

    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Names of the symbolic parameters, in variable order.
    pub fn params(&self) -> &[String] {
        &self.params
    }

    /// Components of every field (polynomials in spatial + parameter variables).
    pub fn fields(&self) -> &[Vec<MultiPoly>] {
        &self.fields
    }

    /// Weights used at each stage.
    pub fn stage_weights(&self) -> &[Vec<u32>] {
        &self.weights
    }

    /// Substitutes every parameter and returns the plain frame.
    pub fn evaluate(&self, values: &[Rational]) -> Result<Frame> {
        if values.len() != self.params.len() {
            return Err(Error::DimensionMismatch { expected: self.params.len(), found: values.len() });
        }
        let fields = self
            .fields
            .iter()
            .map(|comps| {
                let comps = comps
                    .iter()
                    .map(|c| {
                        let mut p = c.clone();
                        for v in values.iter().rev() {
                            p = p.substitute(p.dim() - 1, v);
                        }
                        p
                    })
                    .collect();
                PolyVectorField::new(comps)
            })
            .collect::<Result<Vec<_>>>()?;
        Frame::new(fields)
    }

    /// The frame itself when no parameter is symbolic.
    pub fn to_frame(&self) -> Result<Frame> {
        if !self.params.is_empty() {
            return Err(Error::Invalid(format!("{} symbolic parameters remain", self.params.len())));
        }
        self.evaluate(&[])
    }

    /// Part of the frame of degree zero in the last parameter.
    pub fn leading(&self) -> Result<ScaledFrame> {
        if self.params.is_empty() {
            return Err(Error::Invalid("no symbolic parameter".into()));
        }
        let d = self.n + self.params.len() - 1;
        let fields = self
            .fields
            .iter()
            .map(|comps| {
                comps.iter().map(|c| c.filter_terms(|e, _| e[d] == 0).substitute(d, &Rational::zero())).collect()
            })
            .collect();
        let mut params = self.params.clone();
        params.pop();
        Ok(ScaledFrame { n: self.n, params, fields, weights: self.weights.clone() })
    }

    /// Applies one dilation stage.
    pub fn dilate(&self, stage: &Stage) -> Result<ScaledFrame> {
        let n = self.n;
        if stage.point.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: stage.point.len() });
        }
        let weights = match &stage.weights {
            Some(w) => {
                if w.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: w.len() });
                }
                w.clone()
            }
            None => {
                // Privilege is decided with symbolic parameters set to 1.
                let ones = alloc::vec![Rational::one(); self.params.len()];
                let plain = self.evaluate(&ones)?;
                is_privileged(&plain, &stage.point)?.coordinate_weights().ok_or(Error::NotPrivileged)?
            }
        };
        let np = self.params.len();
        let mut shift = stage.point.clone();
        shift.resize(n + np, Rational::zero());
        let symbolic = stage.scale == Scale::Symbolic;
        let mut fields = Vec::with_capacity(self.fields.len());
        for (j, comps) in self.fields.iter().enumerate() {
            let mut out = Vec::with_capacity(n);
            for (i, c) in comps.iter().enumerate() {
                let c = c.shift(&shift)?;
                let mut terms = Vec::new();
                for (e, k) in c.terms() {
                    let wa: i64 = e[..n].iter().zip(&weights).map(|(&a, &w)| a as i64 * w as i64).sum();
                    let exp = wa - weights[i] as i64 + 1;
                    if exp < 0 {
                        return Err(Error::NegativeHomogeneity { field: j + 1, component: i + 1, exponent: exp });
                    }
                    let mut ne = e.to_vec();
                    match &stage.scale {
                        Scale::Symbolic => {
                            ne.push(exp as u32);
                            terms.push((ne, k.clone()));
                        }
                        Scale::Value(v) => {
                            if v.is_zero() && exp > 0 {
                                continue;
                            }
                            terms.push((ne, k * num_traits::pow(v.clone(), exp as usize)));
                        }
                    }
                }
                out.push(MultiPoly::from_terms(n + np + symbolic as usize, terms)?);
            }
            fields.push(out);
        }
        let mut params = self.params.clone();
        if symbolic {
            params.push(format!("tau{}", self.weights.len() + 1));
        }
        let mut all_weights = self.weights.clone();
        all_weights.push(weights);
        Ok(ScaledFrame { n, params, fields, weights: all_weights })
    }

    /// The exponent of the last parameter in each term, for annotated output.
    pub fn last_param_exponent(&self, exps: &[u32]) -> Option<u32> {
        if self.params.is_empty() {
            None
        } else {
            exps.get(self.n + self.params.len() - 1).copied()
        }
    }

    /// Variable names: `x1..xn` followed by the parameter names.
    pub fn var_names(&self) -> Vec<String> {
        let mut v: Vec<String> = (1..=self.n).map(|i| format!("x{i}")).collect();
        v.extend(self.params.iter().cloned());
        v
    }
}

impl fmt::Display for ScaledFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.var_names();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        for (k, comps) in self.fields.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "X{} =", k + 1)?;
            let mut any = false;
            for (i, c) in comps.iter().enumerate() {
                if !c.is_zero() {
                    write!(f, " {}({})d{}", if any { "+ " } else { "" }, c.display_with(&refs), i + 1)?;
                    any = true;
                }
            }
            if !any {
                f.write_str(" 0")?;
            }
        }
        Ok(())
    }
}

/// `eps * (dilation at q)^* X` with `eps` kept symbolic.
pub fn dilate_frame(frame: &Frame, q: &[Rational], weights: Option<&[u32]>) -> Result<ScaledFrame> {
    ScaledFrame::from_frame(frame).dilate(&Stage {
        point: q.to_vec(),
        weights: weights.map(|w| w.to_vec()),
        scale: Scale::Symbolic,
    })
}

/// Nilpotent approximation at a point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NilpotentFrame {
    /// The homogeneous frame, in coordinates centered at the point.
    pub frame: Frame,
    /// Per-coordinate weights used.
    pub weights: Vec<u32>,
}

/// Nilpotentization: the part of the dilated frame of degree zero in `eps`.
pub fn nilpotentize(frame: &Frame, q: &[Rational]) -> Result<NilpotentFrame> {
    let d = dilate_frame(frame, q, None)?;
    let weights = d.stage_weights()[0].clone();
    Ok(NilpotentFrame { frame: d.leading()?.to_frame()?, weights })
}

/// Applies the stages in order, starting from `frame`.
pub fn multi_dilate(frame: &Frame, chain: &[Stage]) -> Result<ScaledFrame> {
    let mut cur = ScaledFrame::from_frame(frame);
    for st in chain {
        cur = cur.dilate(st)?;
    }
    Ok(cur)
}

/// One comparison made by [`nilpotentizability_probe`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbeSample {
    /// Dilation parameter.
    pub tau: Rational,
    /// Test point (coordinates centered at the base point).
    pub point: Vec<Rational>,
    /// Growth vector of the dilated frame, `None` if not bracket generating.
    pub dilated_growth: Option<Vec<usize>>,
    /// Growth vector of the nilpotent frame.
    pub nilpotent_growth: Option<Vec<usize>>,
}

impl ProbeSample {
    /// True when the two growth vectors differ.
    pub fn mismatch(&self) -> bool {
        self.dilated_growth != self.nilpotent_growth
    }
}

/// Result of the sampled probe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbeReport {
    /// Every comparison made.
    pub samples: Vec<ProbeSample>,
}

impl ProbeReport {
    /// True when some sample shows different singular behaviour, which rules
    /// out nilpotentizability. False only means no evidence was found.
    pub fn not_nilpotentizable(&self) -> bool {
        self.samples.iter().any(|s| s.mismatch())
    }

    /// `"not nilpotentizable"` or `"consistent"`.
    pub fn verdict(&self) -> &'static str {
        if self.not_nilpotentizable() {
            "not nilpotentizable"
        } else {
            "consistent"
        }
    }
}

/// Compares growth vectors of the dilated frames and of the nilpotent frame at
/// sample points.
pub fn nilpotentizability_probe(
    frame: &Frame,
    q: &[Rational],
    taus: &[Rational],
    points: &[Vec<Rational>],
) -> Result<ProbeReport> {
    let dilated = dilate_frame(frame, q, None)?;
    let nil = dilated.leading()?.to_frame()?;
    let growth = |f: &Frame, p: &[Rational]| compute_flag(f, p, DEFAULT_R_MAX).ok().map(|d| d.growth);
    let mut samples = Vec::new();
    for tau in taus {
        let f = dilated.evaluate(core::slice::from_ref(tau))?;
        for p in points {
            samples.push(ProbeSample {
                tau: tau.clone(),
                point: p.clone(),
                dilated_growth: growth(&f, p),
                nilpotent_growth: growth(&nil, p),
            });
        }
    }
    Ok(ProbeReport { samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyfield::{int, rat};
    use alloc::vec;

    fn zero2() -> Vec<Rational> {
        vec![int(0), int(0)]
    }

    fn poly(s: &str, vars: &[&str]) -> MultiPoly {
        MultiPoly::parse(s, vars).unwrap()
    }

    #[test]
    fn sum_of_squares_frame() {
        let f = Frame::parse(&[&["1", "0"], &["0", "x1^2+x2^2"]]).unwrap();
        let d = dilate_frame(&f, &zero2(), None).unwrap();
        assert_eq!(d.stage_weights()[0], [1, 3]);
        assert_eq!(d.fields()[1][1], poly("x1^2 + tau1^4*x2^2", &["x1", "x2", "tau1"]));
        let nil = nilpotentize(&f, &zero2()).unwrap();
        assert_eq!(nil.frame, Frame::parse(&[&["1", "0"], &["0", "x1^2"]]).unwrap());
    }

    #[test]
    fn tangency_frame() {
        let f = Frame::parse(&[&["1", "0"], &["0", "x1^2-x2"]]).unwrap();
        let d = dilate_frame(&f, &zero2(), Some(&[1, 3])).unwrap();
        assert_eq!(d.fields()[1][1], poly("x1^2 - tau1*x2", &["x1", "x2", "tau1"]));
        assert_eq!(nilpotentize(&f, &zero2()).unwrap().frame, Frame::parse(&[&["1", "0"], &["0", "x1^2"]]).unwrap());
    }

    #[test]
    fn double_dilation() {
        let f = Frame::parse(&[&["1", "0"], &["0", "x1^2+x2^2"]]).unwrap();
        let chain = [
            Stage { point: zero2(), weights: Some(vec![1, 3]), scale: Scale::Symbolic },
            Stage { point: vec![int(0), int(1)], weights: Some(vec![1, 1]), scale: Scale::Symbolic },
        ];
        let d = multi_dilate(&f, &chain).unwrap();
        let v = ["x1", "x2", "tau1", "tau2"];
        assert_eq!(d.fields()[1][1], poly("tau2^2*x1^2 + tau1^4 + 2*tau1^4*tau2*x2 + tau1^4*tau2^2*x2^2", &v));
        let e = d.evaluate(&[rat(1, 2), rat(1, 3)]).unwrap();
        let direct = poly("1/9*x1^2 + 1/16 + 2/48*x2 + 1/144*x2^2", &["x1", "x2"]);
        assert_eq!(e.fields()[1].components()[1], direct);
    }

    #[test]
    fn negative_homogeneity() {
        let f = Frame::parse(&[&["1", "0"], &["0", "x1"]]).unwrap();
        let r = dilate_frame(&f, &zero2(), Some(&[2, 1]));
        assert!(matches!(r, Err(Error::NegativeHomogeneity { field: 1, component: 1, exponent: -1 })));
    }

    #[test]
    fn probe_verdicts() {
        let f = Frame::parse(&[&["1", "0"], &["0", "x1^2+x2^2"]]).unwrap();
        let r = nilpotentizability_probe(&f, &zero2(), &[rat(1, 2), int(1)], &[vec![int(0), int(1)]]).unwrap();
        assert!(r.not_nilpotentizable());
        let g = Frame::parse(&[&["1", "0"], &["0", "x1"]]).unwrap();
        let pts = [vec![int(0), int(1)], vec![int(1), int(1)]];
        let r = nilpotentizability_probe(&g, &zero2(), &[rat(1, 2), int(2)], &pts).unwrap();
        assert_eq!(r.verdict(), "consistent");
    }
}
