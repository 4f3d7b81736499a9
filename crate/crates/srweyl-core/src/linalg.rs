//! Exact linear algebra over the rationals and over polynomial rings.

use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::polyfield::{MultiPoly, Rational};

/// Incremental row echelon form over the rationals.
///
/// Vectors are inserted one at a time; `insert` reports whether the vector
/// enlarged the span. All arithmetic is exact.
#[derive(Clone, Debug, Default)]
pub struct Echelon {
    rows: Vec<(usize, Vec<Rational>)>,
}

impl Echelon {
    /// Empty span.
    pub fn new() -> Self {
        Echelon { rows: Vec::new() }
    }

    /// Current rank.
    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the stored rows and returns the remainder.
    pub fn reduce(&self, v: &[Rational]) -> Vec<Rational> {
        let mut v = v.to_vec();
        for (pivot, row) in &self.rows {
            if v[*pivot].is_zero() {
                continue;
            }
            let f = v[*pivot].clone();
            for (a, b) in v.iter_mut().zip(row) {
                if !b.is_zero() {
                    *a -= &f * b;
                }
            }
        }
        v
    }

    /// Inserts `v`; returns true if the rank increased.
    pub fn insert(&mut self, v: &[Rational]) -> bool {
        let mut r = self.reduce(v);
        let Some(pivot) = r.iter().position(|x| !x.is_zero()) else {
            return false;
        };
        let inv = r[pivot].recip();
        for x in r.iter_mut() {
            *x *= &inv;
        }
        // Keep rows fully reduced so `reduce` is a single pass.
        for (_, row) in self.rows.iter_mut() {
            if row[pivot].is_zero() {
                continue;
            }
            let f = row[pivot].clone();
            for (a, b) in row.iter_mut().zip(&r) {
                if !b.is_zero() {
                    *a -= &f * b;
                }
            }
        }
        self.rows.push((pivot, r));
        true
    }

    /// True if `v` lies in the span.
    pub fn contains(&self, v: &[Rational]) -> bool {
        self.reduce(v).iter().all(|x| x.is_zero())
    }
}

/// Rank of a list of rational vectors.
pub fn rank(vectors: &[Vec<Rational>]) -> usize {
    let mut e = Echelon::new();
    for v in vectors {
        e.insert(v);
    }
    e.rank()
}

/// Determinant of a square matrix of polynomials by cofactor expansion.
///
/// Intended for the small sizes arising from frames (`n <= 6`).
///
/// # Panics
/// Panics if the matrix is empty or not square.
pub fn poly_det(m: &[Vec<MultiPoly>]) -> MultiPoly {
    let n = m.len();
    assert!(n > 0 && m.iter().all(|r| r.len() == n), "square matrix required");
    let dim = m[0][0].dim();
    let cols: Vec<usize> = (0..n).collect();
    det_rec(m, 0, &cols, dim)
}

fn det_rec(m: &[Vec<MultiPoly>], row: usize, cols: &[usize], dim: usize) -> MultiPoly {
    if cols.len() == 1 {
        return m[row][cols[0]].clone();
    }
    let mut acc = MultiPoly::zero(dim);
    for (k, &c) in cols.iter().enumerate() {
        let a = &m[row][c];
        if a.is_zero() {
            continue;
        }
        let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let minor = det_rec(m, row + 1, &rest, dim);
        if minor.is_zero() {
            continue;
        }
        let term = a * &minor;
        acc = if k % 2 == 0 { acc + term } else { acc - term };
    }
    acc
}

/// Determinant of a square rational matrix by Gaussian elimination.
///
/// # Panics
/// Panics if the matrix is not square.
pub fn rational_det(m: &[Vec<Rational>]) -> Rational {
    let n = m.len();
    assert!(m.iter().all(|r| r.len() == n), "square matrix required");
    let mut a: Vec<Vec<Rational>> = m.to_vec();
    let mut det = Rational::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return Rational::zero();
        };
        if p != col {
            a.swap(p, col);
            det = -det;
        }
        let piv = a[col][col].clone();
        det *= &piv;
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] / &piv;
            for c in col..n {
                let delta = &f * &a[col][c];
                a[r][c] -= delta;
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyfield::{int, rat};
    use alloc::vec;

    #[test]
    fn echelon_rank() {
        let v = vec![vec![int(1), int(2), int(3)], vec![int(2), int(4), int(6)], vec![int(0), int(1), rat(1, 2)]];
        assert_eq!(rank(&v), 2);
        let mut e = Echelon::new();
        e.insert(&v[0]);
        assert!(e.contains(&v[1]));
        assert!(!e.contains(&v[2]));
    }

    #[test]
    fn determinants_agree() {
        let m = vec![vec![int(2), int(1), int(0)], vec![int(1), int(3), int(1)], vec![int(0), int(1), int(4)]];
        assert_eq!(rational_det(&m), int(18));
        let pm: Vec<Vec<MultiPoly>> = m.iter().map(|r| r.iter().map(|c| MultiPoly::constant(1, c.clone())).collect()).collect();
        assert_eq!(poly_det(&pm), MultiPoly::constant(1, int(18)));
    }
}
