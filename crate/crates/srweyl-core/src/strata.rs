//! Declared stratifications, chains of strata and the predicted leading term
//! `|ln t|^k / t^gamma` of the local Weyl law.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flag::{compute_flag, restricted_q, DEFAULT_R_MAX};
use crate::numeric::gamma as gamma_fn;
use crate::polyfield::{Frame, Rational};

/// One equisingular stratum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stratum {
    /// Display name.
    pub name: String,
    /// Topological dimension.
    pub dim: usize,
    /// Hausdorff dimension of the stratum itself.
    pub hausdorff: u32,
    /// Ambient Hausdorff dimension at points of the stratum.
    pub ambient: u32,
    /// True for the regular region `M \ S`.
    pub regular: bool,
}

impl Stratum {
    /// A singular stratum.
    pub fn singular(name: &str, dim: usize, hausdorff: u32, ambient: u32) -> Self {
        Stratum { name: name.into(), dim, hausdorff, ambient, regular: false }
    }

    /// The regular region of an `n`-manifold whose equiregular dimension is `q_eq`.
    pub fn regular(name: &str, dim: usize, q_eq: u32) -> Self {
        Stratum { name: name.into(), dim, hausdorff: q_eq, ambient: q_eq, regular: true }
    }

    /// Measures a coordinate-subspace stratum through `q` with the flag
    /// routines: `subset` (1-based) spans the stratum.
    pub fn measured(name: &str, frame: &Frame, q: &[Rational], subset: &[usize]) -> Result<Self> {
        let ambient = compute_flag(frame, q, DEFAULT_R_MAX)?.hausdorff;
        let restricted = restricted_q(frame, q, subset)?;
        Ok(Stratum::singular(name, restricted.subset.len(), restricted.hausdorff, ambient))
    }
}

/// Strata with adjacency `(i, j)` meaning `S_i` lies in the closure of `S_j`.
///
/// Every singular stratum lies in the closure of the regular region; those
/// adjacencies are implicit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stratification {
    /// The strata; exactly one is the regular region.
    pub strata: Vec<Stratum>,
    /// Adjacency pairs (0-based indices).
    pub adjacency: Vec<(usize, usize)>,
}

impl Stratification {
    /// Validates and builds.
    pub fn new(strata: Vec<Stratum>, adjacency: Vec<(usize, usize)>) -> Result<Self> {
        let s = Stratification { strata, adjacency };
        s.validate()?;
        Ok(s)
    }

    /// Index of the regular region.
    pub fn regular_index(&self) -> usize {
        self.strata.iter().position(|s| s.regular).unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidStratification(m));
        let regular = self.strata.iter().filter(|s| s.regular).count();
        if regular != 1 {
            return bad(alloc::format!("{regular} regular regions, expected exactly one"));
        }
        let reg = self.regular_index();
        for s in &self.strata {
            if !s.regular && s.ambient <= s.hausdorff {
                return bad(alloc::format!("stratum {} has ambient dimension {} <= {}", s.name, s.ambient, s.hausdorff));
            }
            if s.regular && s.ambient != s.hausdorff {
                return bad(alloc::format!("regular region {} has two different dimensions", s.name));
            }
        }
        for &(i, j) in &self.adjacency {
            if i >= self.strata.len() || j >= self.strata.len() {
                return bad(alloc::format!("adjacency ({i},{j}) out of range"));
            }
            if i == reg {
                return bad("the regular region must be maximal".into());
            }
            // Strict dimension drop along adjacency also rules out cycles.
            if self.strata[i].dim >= self.strata[j].dim {
                return bad(alloc::format!("adjacency ({i},{j}) does not increase the dimension"));
            }
        }
        if self.strata[reg].dim < self.strata.iter().map(|s| s.dim).max().unwrap_or(0) {
            return bad("the regular region must have top dimension".into());
        }
        Ok(())
    }

    fn successors(&self, i: usize) -> Vec<usize> {
        let reg = self.regular_index();
        let mut v: Vec<usize> = self.adjacency.iter().filter(|&&(a, b)| a == i && b != reg).map(|&(_, b)| b).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Maximal ascending chains, each ending at the regular region, listed by
    /// starting stratum and then in successor order.
    pub fn chains(&self) -> Vec<Vec<usize>> {
        let reg = self.regular_index();
        let has_pred: BTreeSet<usize> =
            self.adjacency.iter().filter(|&&(a, b)| a != reg && b != reg).map(|&(_, b)| b).collect();
        let mut out = Vec::new();
        for i in 0..self.strata.len() {
            if i != reg && !has_pred.contains(&i) {
                let mut path = alloc::vec![i];
                self.extend_chains(&mut path, &mut out);
            }
        }
        if out.is_empty() {
            out.push(alloc::vec![reg]);
        }
        out
    }

    fn extend_chains(&self, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let last = *path.last().unwrap_or(&0);
        let next = self.successors(last);
        if next.is_empty() {
            let mut c = path.clone();
            c.push(self.regular_index());
            out.push(c);
            return;
        }
        for j in next {
            path.push(j);
            self.extend_chains(path, out);
            path.pop();
        }
    }

    /// Product of two stratifications: strata are pairs, dimensions add, and a
    /// pair moves up when either factor does.
    pub fn product(&self, other: &Stratification) -> Result<Stratification> {
        let (ra, rb) = (self.regular_index(), other.regular_index());
        let nb = other.strata.len();
        let mut strata = Vec::new();
        for a in &self.strata {
            for b in &other.strata {
                strata.push(Stratum {
                    name: alloc::format!("{}x{}", a.name, b.name),
                    dim: a.dim + b.dim,
                    hausdorff: a.hausdorff + b.hausdorff,
                    ambient: a.ambient + b.ambient,
                    regular: a.regular && b.regular,
                });
            }
        }
        let up = |s: &Stratification, i: usize, r: usize| -> Vec<usize> {
            let mut v = s.successors(i);
            if i != r {
                v.push(r);
            }
            v
        };
        let mut adjacency = Vec::new();
        for i in 0..self.strata.len() {
            for j in 0..nb {
                for i2 in up(self, i, ra) {
                    adjacency.push((i * nb + j, i2 * nb + j));
                }
                for j2 in up(other, j, rb) {
                    adjacency.push((i * nb + j, i * nb + j2));
                }
            }
        }
        let reg = ra * nb + rb;
        adjacency.retain(|&(_, b)| b != reg);
        Stratification::new(strata, adjacency)
    }
}

/// Predicted leading term of the local Weyl law.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeylPrediction {
    /// Power of `1/t` (`Q^s / 2`).
    pub gamma: Rational,
    /// Power of `|ln t|` (`m_s - 1`).
    pub log_power: u32,
    /// Names of the strata whose closure carries the Weyl measure.
    pub support: Vec<String>,
    /// Largest Hausdorff dimension `Q^s`.
    pub max_hausdorff: u32,
    /// Largest multiplicity `m_s` of `Q^s` along a chain.
    pub multiplicity: u32,
    /// Set when the caller does not assert nilpotentizability: then only
    /// `gamma >= Q^s/2` is guaranteed.
    pub lower_bound_only: bool,
}

/// Exponents and support from chains and multiplicities.
pub fn weyl_predict(s: &Stratification, nilpotentizable: bool) -> Result<WeylPrediction> {
    s.validate()?;
    let q_top = s.strata.iter().map(|x| x.hausdorff).max().unwrap_or(0);
    let chains = s.chains();
    let count = |c: &Vec<usize>| c.iter().filter(|&&i| s.strata[i].hausdorff == q_top).count() as u32;
    let m = chains.iter().map(count).max().unwrap_or(1);
    let mut support: BTreeSet<usize> = BTreeSet::new();
    for c in chains.iter().filter(|c| count(c) == m) {
        let pick = c
            .iter()
            .copied()
            .filter(|&i| s.strata[i].hausdorff == q_top)
            .min_by_key(|&i| (s.strata[i].dim, i));
        if let Some(i) = pick {
            support.insert(i);
        }
    }
    Ok(WeylPrediction {
        gamma: Rational::new(q_top.into(), 2.into()),
        log_power: m - 1,
        support: support.into_iter().map(|i| s.strata[i].name.clone()).collect(),
        max_hausdorff: q_top,
        multiplicity: m,
        lower_bound_only: !nilpotentizable,
    })
}

/// The three regimes of a single singular stratum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SingleStratumCase {
    /// `Q^S > Qeq`: `t^{-Q^S/2}`, supported on the stratum.
    StratumDominates,
    /// `Q^S = Qeq`: `|ln t| t^{-Qeq/2}`, supported on the stratum.
    LogResonance,
    /// `Q^S < Qeq`: `t^{-Qeq/2}`, not concentrated.
    EquiregularDominates,
}

/// Leading term descriptor for one singular stratum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SingleStratumTerm {
    /// Regime.
    pub case: SingleStratumCase,
    /// Power of `1/t`.
    pub gamma: Rational,
    /// Power of `|ln t|`.
    pub log_power: u32,
    /// True when the Weyl measure lives on the stratum.
    pub on_stratum: bool,
}

/// Classifies the one-stratum case.
pub fn single_stratum_case(q_stratum: u32, q_eq: u32) -> SingleStratumTerm {
    let half = |q: u32| Rational::new(q.into(), 2.into());
    use core::cmp::Ordering::*;
    match q_stratum.cmp(&q_eq) {
        Greater => SingleStratumTerm {
            case: SingleStratumCase::StratumDominates,
            gamma: half(q_stratum),
            log_power: 0,
            on_stratum: true,
        },
        Equal => SingleStratumTerm { case: SingleStratumCase::LogResonance, gamma: half(q_eq), log_power: 1, on_stratum: true },
        Less => SingleStratumTerm {
            case: SingleStratumCase::EquiregularDominates,
            gamma: half(q_eq),
            log_power: 0,
            on_stratum: false,
        },
    }
}

/// Counting law `N(lambda) ~ C lambda^gamma ln^k lambda`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountingLaw {
    /// `C = A / Gamma(gamma + 1)`.
    pub constant: f64,
    /// Power of `lambda`.
    pub gamma: f64,
    /// Power of `ln lambda`.
    pub log_power: u32,
}

/// Tauberian transfer of a trace term `A |ln t|^k / t^gamma`.
pub fn karamata_transfer(gamma: f64, log_power: u32, a: f64) -> Result<CountingLaw> {
    if !(gamma >= 0.0 && a > 0.0) {
        return Err(Error::Invalid("need gamma >= 0 and A > 0".into()));
    }
    Ok(CountingLaw { constant: a / gamma_fn(gamma + 1.0), gamma, log_power })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn one_stratum(qs: u32, qeq: u32) -> Stratification {
        Stratification::new(
            vec![Stratum::singular("S", 1, qs, qs.max(qeq) + 1), Stratum::regular("M", 2, qeq)],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn chain_shapes() {
        assert_eq!(one_stratum(2, 2).chains(), [vec![0, 1]]);
        let empty = Stratification::new(vec![Stratum::regular("M", 2, 2)], vec![]).unwrap();
        assert_eq!(empty.chains(), [vec![0]]);
        let s = Stratification::new(
            vec![
                Stratum::singular("S1", 1, 4, 5),
                Stratum::singular("S2", 2, 4, 5),
                Stratum::singular("S2'", 2, 4, 5),
                Stratum::regular("M", 3, 4),
            ],
            vec![(0, 1), (0, 2)],
        )
        .unwrap();
        assert_eq!(s.chains(), [vec![0, 1, 3], vec![0, 2, 3]]);
        let p = weyl_predict(&s, true).unwrap();
        assert_eq!((p.log_power, p.support.clone()), (2, vec![String::from("S1")]));
    }

    #[test]
    fn invalid_inputs() {
        let two_regular = Stratification::new(vec![Stratum::regular("M", 2, 2), Stratum::regular("N", 2, 2)], vec![]);
        assert!(matches!(two_regular, Err(Error::InvalidStratification(_))));
        let bad_dims = Stratification::new(
            vec![Stratum::singular("A", 1, 2, 3), Stratum::singular("B", 1, 2, 3), Stratum::regular("M", 2, 2)],
            vec![(0, 1)],
        );
        assert!(bad_dims.is_err());
        let bad_q = Stratification::new(vec![Stratum::singular("A", 1, 3, 3), Stratum::regular("M", 2, 2)], vec![]);
        assert!(bad_q.is_err());
    }

    #[test]
    fn karamata_constants() {
        let c = karamata_transfer(2.0, 1, 1.0 / 16.0).unwrap();
        assert!((c.constant - 1.0 / 32.0).abs() < 1e-15);
        let c = karamata_transfer(2.0, 0, core::f64::consts::PI.powi(2) / 4.0).unwrap();
        assert!((c.constant - core::f64::consts::PI.powi(2) / 8.0).abs() < 1e-14);
    }

    #[test]
    fn lower_bound_stamp() {
        assert!(weyl_predict(&one_stratum(3, 2), false).unwrap().lower_bound_only);
        assert!(!weyl_predict(&one_stratum(3, 2), true).unwrap().lower_bound_only);
    }
}
