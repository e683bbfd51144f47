//! Smith normal form over arbitrary-precision integers and homology of
//! ℤ/2-graded chain complexes.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

pub type Matrix = Vec<Vec<BigInt>>;

/// `u · m · v = d` with `u`, `v` unimodular and `d` diagonal, each factor
/// dividing the next.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmithForm {
    pub u: Matrix,
    pub v: Matrix,
    pub d: Matrix,
    /// Nonzero diagonal entries, positive.
    pub factors: Vec<BigInt>,
}

impl SmithForm {
    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    /// Re-check the certificate: the product identity, diagonal shape,
    /// divisibility and unimodularity of both transforms.
    pub fn verify(&self, m: &Matrix) -> bool {
        let rows = m.len();
        let cols = self.v.len();
        if mat_mul(&mat_mul(&self.u, m, cols), &self.v, cols) != self.d {
            return false;
        }
        for (i, row) in self.d.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                let expected = if i == j && i < self.factors.len() { self.factors[i].clone() } else { BigInt::zero() };
                if *x != expected {
                    return false;
                }
            }
        }
        if self.factors.windows(2).any(|w| !(&w[1] % &w[0]).is_zero()) {
            return false;
        }
        determinant(&self.u, rows).abs().is_one() && determinant(&self.v, cols).abs().is_one()
    }
}

fn identity(n: usize) -> Matrix {
    (0..n).map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect()).collect()
}

fn mat_mul(a: &Matrix, b: &Matrix, b_cols: usize) -> Matrix {
    let cols = b.first().map_or(b_cols, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| row.iter().zip(b).fold(BigInt::zero(), |acc, (x, brow)| acc + x * &brow[j]))
                .collect()
        })
        .collect()
}

/// Fraction-free (Bareiss) determinant.
fn determinant(m: &Matrix, n: usize) -> BigInt {
    if n == 0 {
        return BigInt::one();
    }
    let mut a = m.clone();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(i, k);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

/// Smith normal form of a `rows × cols` matrix. The pivot is always the
/// nonzero entry of least absolute value in the remaining block, leftmost
/// first.
pub fn smith_normal_form(rows: usize, cols: usize, m: &Matrix) -> SmithForm {
    let mut a = m.clone();
    let mut u = identity(rows);
    let mut v = identity(cols);
    let mut t = 0;
    while t < rows.min(cols) {
        let Some((pi, pj)) = smallest(&a, t, rows, cols) else { break };
        a.swap(t, pi);
        u.swap(t, pi);
        swap_cols(&mut a, t, pj);
        swap_cols(&mut v, t, pj);
        loop {
            let mut clean = true;
            for i in t + 1..rows {
                if !a[i][t].is_zero() {
                    let q = a[i][t].div_floor(&a[t][t]);
                    row_sub(&mut a, i, t, &q);
                    row_sub(&mut u, i, t, &q);
                    clean &= a[i][t].is_zero();
                }
            }
            for j in t + 1..cols {
                if !a[t][j].is_zero() {
                    let q = a[t][j].div_floor(&a[t][t]);
                    col_sub(&mut a, j, t, &q);
                    col_sub(&mut v, j, t, &q);
                    clean &= a[t][j].is_zero();
                }
            }
            if !clean {
                // A remainder smaller than the pivot survived; make it the pivot.
                let (pi, pj) = smallest_in_cross(&a, t, rows, cols);
                a.swap(t, pi);
                u.swap(t, pi);
                swap_cols(&mut a, t, pj);
                swap_cols(&mut v, t, pj);
                continue;
            }
            let bad = (t + 1..rows).find(|&i| (t + 1..cols).any(|j| !(&a[i][j] % &a[t][t]).is_zero()));
            match bad {
                Some(i) => {
                    row_sub(&mut a, t, i, &BigInt::from(-1));
                    row_sub(&mut u, t, i, &BigInt::from(-1));
                }
                None => break,
            }
        }
        if a[t][t].is_negative() {
            for x in a[t].iter_mut().chain(u[t].iter_mut()) {
                *x = -&*x;
            }
        }
        t += 1;
    }
    let factors = (0..t).map(|i| a[i][i].clone()).filter(|x| !x.is_zero()).collect();
    SmithForm { u, v, d: a, factors }
}

fn smallest(a: &Matrix, t: usize, rows: usize, cols: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for j in t..cols {
        for i in t..rows {
            if !a[i][j].is_zero() && best.map_or(true, |(bi, bj)| a[i][j].abs() < a[bi][bj].abs()) {
                best = Some((i, j));
            }
        }
    }
    best
}

fn smallest_in_cross(a: &Matrix, t: usize, rows: usize, cols: usize) -> (usize, usize) {
    let cells = std::iter::once((t, t)).chain((t + 1..cols).map(|j| (t, j))).chain((t + 1..rows).map(|i| (i, t)));
    cells
        .filter(|&(i, j)| !a[i][j].is_zero())
        .min_by(|&(i, j), &(k, l)| a[i][j].abs().cmp(&a[k][l].abs()))
        .expect("cross has a nonzero entry")
}

fn swap_cols(a: &mut Matrix, i: usize, j: usize) {
    if i != j {
        for row in a.iter_mut() {
            row.swap(i, j);
        }
    }
}

/// `row[i] -= q · row[k]`.
fn row_sub(a: &mut Matrix, i: usize, k: usize, q: &BigInt) {
    let src = a[k].clone();
    for (x, y) in a[i].iter_mut().zip(&src) {
        *x -= q * y;
    }
}

/// `col[j] -= q · col[k]`.
fn col_sub(a: &mut Matrix, j: usize, k: usize, q: &BigInt) {
    for row in a.iter_mut() {
        let y = row[k].clone();
        row[j] -= q * y;
    }
}

/// Homology in one grading: a free part and torsion invariant factors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GradedHomology {
    pub grading: u8,
    pub free_rank: usize,
    #[serde(serialize_with = "as_strings")]
    pub torsion: Vec<BigInt>,
}

fn as_strings<S: serde::Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(ToString::to_string))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HomologyResult {
    pub groups: Vec<GradedHomology>,
}

impl HomologyResult {
    pub fn total_rank(&self) -> usize {
        self.groups.iter().map(|g| g.free_rank).sum()
    }
}

impl fmt::Display for GradedHomology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "grading {}: ", self.grading)?;
        let mut parts = Vec::new();
        if self.free_rank > 0 {
            parts.push(format!("Z^{}", self.free_rank));
        }
        parts.extend(self.torsion.iter().map(|d| format!("Z/{d}")));
        if parts.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&parts.join(" ⊕ "))
        }
    }
}

impl fmt::Display for HomologyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.groups {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn big(m: &[Vec<i64>]) -> Matrix {
        m.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
    }

    #[test]
    fn diagonal_example() {
        let m = big(&[vec![2, 0], vec![0, 3]]);
        let s = smith_normal_form(2, 2, &m);
        assert_eq!(s.factors, vec![BigInt::from(1), BigInt::from(6)]);
        assert!(s.verify(&m));
    }

    #[test]
    fn zero_and_empty() {
        let m = big(&[vec![0, 0, 0], vec![0, 0, 0]]);
        let s = smith_normal_form(2, 3, &m);
        assert!(s.factors.is_empty());
        assert!(s.verify(&m));
        let e: Matrix = Vec::new();
        assert!(smith_normal_form(0, 4, &e).factors.is_empty());
    }

    /// Invariant factors from determinantal divisors: the product of the
    /// first k factors is the gcd of all k × k minors.
    fn minors_gcd(m: &[Vec<i64>], k: usize) -> BigInt {
        use itertools::Itertools;
        let (r, c) = (m.len(), m[0].len());
        let mut g = BigInt::zero();
        for rows in (0..r).combinations(k) {
            for cols in (0..c).combinations(k) {
                let sub: Matrix = rows.iter().map(|&i| cols.iter().map(|&j| BigInt::from(m[i][j])).collect()).collect();
                g = g.gcd(&determinant(&sub, k));
            }
        }
        g
    }

    proptest! {
        #[test]
        fn certificate_and_divisors(m in proptest::collection::vec(proptest::collection::vec(-6i64..=6, 3), 1..=4)) {
            let b = big(&m);
            let s = smith_normal_form(m.len(), 3, &b);
            prop_assert!(s.verify(&b));
            let mut prefix = BigInt::one();
            for k in 1..=m.len().min(3) {
                let g = minors_gcd(&m, k);
                if k <= s.factors.len() {
                    prefix *= &s.factors[k - 1];
                    prop_assert_eq!(&prefix, &g);
                } else {
                    prop_assert!(g.is_zero());
                }
            }
        }
    }
}
