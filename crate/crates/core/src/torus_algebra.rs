//! The integral torus algebra attached to a signed pointed matched circle.
//!
//! Basis order is fixed as ι1, ι2, ρ1, ρ2, ρ3, ρ12, ρ23, ρ123. The boundary
//! points are a1..a4 in order from the basepoint; arc 1 is {a1, a3} and arc 2
//! is {a2, a4}.

use std::fmt;
use std::ops::{Add, Mul, Neg};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("{0} is an idempotent, expected a rho element")]
    NotRho(Basis),
    #[error("cannot parse algebra element: {0}")]
    Parse(String),
    #[error("cannot parse sign sequence {0:?}")]
    SignSequence(String),
}

/// One sign per matched pair of the torus pointed matched circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignSequence(pub [i8; 2]);

impl SignSequence {
    pub const ALL: [SignSequence; 4] = [
        SignSequence([1, 1]),
        SignSequence([1, -1]),
        SignSequence([-1, 1]),
        SignSequence([-1, -1]),
    ];

    pub fn plus_plus() -> Self {
        SignSequence([1, 1])
    }

    pub fn entry(self, pair: u8) -> i8 {
        self.0[pair as usize - 1]
    }

    pub fn negated(self) -> Self {
        SignSequence([-self.0[0], -self.0[1]])
    }

    /// The sequence seen from the other side of the boundary circle.
    pub fn swapped(self) -> Self {
        SignSequence([self.0[1], self.0[0]])
    }

    /// Label of the boundary point `a_k`, k in 1..=4.
    pub fn point_label(self, k: u8) -> i8 {
        match k {
            1 => self.0[0],
            2 => self.0[1],
            3 => -self.0[0],
            4 => -self.0[1],
            _ => panic!("boundary point index {k} out of range"),
        }
    }
}

impl fmt::Display for SignSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.0 {
            f.write_str(if s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for SignSequence {
    type Err = AlgebraError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t: Vec<char> = s.trim().chars().filter(|c| *c != ',').collect();
        let sign = |c: char| match c {
            '+' | 'p' | 'P' => Some(1),
            '-' | 'm' | 'M' => Some(-1),
            _ => None,
        };
        match t.as_slice() {
            [a, b] => match (sign(*a), sign(*b)) {
                (Some(a), Some(b)) => Ok(SignSequence([a, b])),
                _ => Err(AlgebraError::SignSequence(s.to_string())),
            },
            _ => Err(AlgebraError::SignSequence(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basis {
    Iota1,
    Iota2,
    Rho1,
    Rho2,
    Rho3,
    Rho12,
    Rho23,
    Rho123,
}

impl Basis {
    pub const ALL: [Basis; 8] = [
        Basis::Iota1,
        Basis::Iota2,
        Basis::Rho1,
        Basis::Rho2,
        Basis::Rho3,
        Basis::Rho12,
        Basis::Rho23,
        Basis::Rho123,
    ];

    pub const RHOS: [Basis; 6] = [
        Basis::Rho1,
        Basis::Rho2,
        Basis::Rho3,
        Basis::Rho12,
        Basis::Rho23,
        Basis::Rho123,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_idempotent(self) -> bool {
        matches!(self, Basis::Iota1 | Basis::Iota2)
    }

    pub fn idempotent(i: u8) -> Basis {
        match i {
            1 => Basis::Iota1,
            2 => Basis::Iota2,
            _ => panic!("idempotent index {i} out of range"),
        }
    }

    /// Index of the left idempotent.
    pub fn left(self) -> u8 {
        match self {
            Basis::Iota1 | Basis::Rho1 | Basis::Rho3 | Basis::Rho12 | Basis::Rho123 => 1,
            Basis::Iota2 | Basis::Rho2 | Basis::Rho23 => 2,
        }
    }

    /// Index of the right idempotent.
    pub fn right(self) -> u8 {
        match self {
            Basis::Iota1 | Basis::Rho2 | Basis::Rho12 => 1,
            Basis::Iota2 | Basis::Rho1 | Basis::Rho3 | Basis::Rho23 | Basis::Rho123 => 2,
        }
    }

    /// Boundary points (start, end) of the chord of a rho element.
    pub fn chord(self) -> Option<(u8, u8)> {
        match self {
            Basis::Rho1 => Some((1, 2)),
            Basis::Rho2 => Some((2, 3)),
            Basis::Rho3 => Some((3, 4)),
            Basis::Rho12 => Some((1, 3)),
            Basis::Rho23 => Some((2, 4)),
            Basis::Rho123 => Some((1, 4)),
            _ => None,
        }
    }

    pub fn from_chord(start: u8, end: u8) -> Option<Basis> {
        Basis::RHOS.into_iter().find(|r| r.chord() == Some((start, end)))
    }

    /// The same chord read from the other side of the boundary circle.
    pub fn reversed(self) -> Basis {
        match self {
            Basis::Rho1 => Basis::Rho3,
            Basis::Rho3 => Basis::Rho1,
            Basis::Rho12 => Basis::Rho23,
            Basis::Rho23 => Basis::Rho12,
            Basis::Iota1 => Basis::Iota2,
            Basis::Iota2 => Basis::Iota1,
            b => b,
        }
    }

    /// Product of two basis elements, `None` when it vanishes.
    pub fn mul(self, other: Basis) -> Option<Basis> {
        use Basis::*;
        if self.is_idempotent() || other.is_idempotent() {
            if self.right() != other.left() {
                return None;
            }
            return Some(if self.is_idempotent() { other } else { self });
        }
        match (self, other) {
            (Rho1, Rho2) => Some(Rho12),
            (Rho2, Rho3) => Some(Rho23),
            (Rho1, Rho23) => Some(Rho123),
            (Rho12, Rho3) => Some(Rho123),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Basis::Iota1 => "iota1",
            Basis::Iota2 => "iota2",
            Basis::Rho1 => "rho1",
            Basis::Rho2 => "rho2",
            Basis::Rho3 => "rho3",
            Basis::Rho12 => "rho12",
            Basis::Rho23 => "rho23",
            Basis::Rho123 => "rho123",
        }
    }

    /// Short tag used in diagram files: `1`, `2`, `3`, `12`, `23`, `123`.
    pub fn tag(self) -> &'static str {
        &self.name()[3..]
    }

    pub fn from_tag(tag: &str) -> Option<Basis> {
        Basis::RHOS.into_iter().find(|r| r.tag() == tag)
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Basis {
    type Err = AlgebraError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        Basis::ALL
            .into_iter()
            .find(|b| b.name() == t)
            .ok_or_else(|| AlgebraError::Parse(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Grading {
    Gr1,
    Gr2,
}

impl Grading {
    pub fn of(self, b: Basis) -> u8 {
        use Basis::*;
        match (self, b) {
            (_, Iota1 | Iota2) => 0,
            (_, Rho12 | Rho23) => 1,
            (Grading::Gr1, Rho1 | Rho3) => 0,
            (Grading::Gr1, Rho2 | Rho123) => 1,
            (Grading::Gr2, Rho1 | Rho3) => 1,
            (Grading::Gr2, Rho2 | Rho123) => 0,
        }
    }

    /// `(-1)^{|b|}`.
    pub fn sign(self, b: Basis) -> i64 {
        if self.of(b) == 0 {
            1
        } else {
            -1
        }
    }
}

pub fn grading_for_sequence(p: SignSequence) -> Grading {
    if p.0[0] == p.0[1] {
        Grading::Gr1
    } else {
        Grading::Gr2
    }
}

pub fn grading(b: Basis, g: Grading) -> u8 {
    g.of(b)
}

/// Product of the labels that the sign sequence puts on the chord's endpoints.
pub fn endpoint_sign_product(rho: Basis, p: SignSequence) -> Result<i8, AlgebraError> {
    let (a, b) = rho.chord().ok_or(AlgebraError::NotRho(rho))?;
    Ok(p.point_label(a) * p.point_label(b))
}

/// An integer combination of basis elements.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct AlgebraElement {
    coefficients: [i64; 8],
}

impl AlgebraElement {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn unit() -> Self {
        Self::basis(Basis::Iota1) + Self::basis(Basis::Iota2)
    }

    pub fn basis(b: Basis) -> Self {
        Self::term(1, b)
    }

    pub fn term(c: i64, b: Basis) -> Self {
        let mut e = Self::zero();
        e.coefficients[b.index()] = c;
        e
    }

    pub fn coefficient(&self, b: Basis) -> i64 {
        self.coefficients[b.index()]
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|&c| c == 0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (Basis, i64)> + '_ {
        Basis::ALL
            .into_iter()
            .map(|b| (b, self.coefficient(b)))
            .filter(|&(_, c)| c != 0)
    }
}

impl Add for AlgebraElement {
    type Output = AlgebraElement;

    fn add(mut self, rhs: AlgebraElement) -> AlgebraElement {
        for (a, b) in self.coefficients.iter_mut().zip(rhs.coefficients) {
            *a += b;
        }
        self
    }
}

impl Neg for AlgebraElement {
    type Output = AlgebraElement;

    fn neg(mut self) -> AlgebraElement {
        for a in self.coefficients.iter_mut() {
            *a = -*a;
        }
        self
    }
}

impl Mul for &AlgebraElement {
    type Output = AlgebraElement;

    fn mul(self, rhs: &AlgebraElement) -> AlgebraElement {
        let mut out = AlgebraElement::zero();
        for (a, ca) in self.terms() {
            for (b, cb) in rhs.terms() {
                if let Some(p) = a.mul(b) {
                    out.coefficients[p.index()] += ca * cb;
                }
            }
        }
        out
    }
}

pub fn mul(a: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
    a * b
}

impl fmt::Display for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (b, c) in self.terms() {
            let (sign, mag) = if c < 0 { ("-", -c) } else { ("+", c) };
            if first {
                if c < 0 {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if mag != 1 {
                write!(f, "{mag}*")?;
            }
            f.write_str(b.name())?;
            first = false;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

impl FromStr for AlgebraElement {
    type Err = AlgebraError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || AlgebraError::Parse(s.to_string());
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t == "0" {
            return Ok(Self::zero());
        }
        if t.is_empty() {
            return Err(err());
        }
        let mut out = Self::zero();
        let mut rest = t.as_str();
        while !rest.is_empty() {
            let (neg, body) = match rest.as_bytes()[0] {
                b'-' => (true, &rest[1..]),
                b'+' => (false, &rest[1..]),
                _ if rest.len() == t.len() => (false, rest),
                _ => return Err(err()),
            };
            if body.is_empty() {
                return Err(err());
            }
            let end = body[1..]
                .find(['+', '-'])
                .map(|i| i + 1)
                .unwrap_or(body.len());
            let term = &body[..end];
            rest = &body[end..];
            let (coef, name) = match term.split_once('*') {
                Some((c, n)) => (c.parse::<i64>().map_err(|_| err())?, n),
                None => (1, term),
            };
            let b: Basis = name.parse().map_err(|_| err())?;
            out.coefficients[b.index()] += if neg { -coef } else { coef };
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listed_products() {
        assert_eq!(Basis::Rho1.mul(Basis::Rho2), Some(Basis::Rho12));
        assert_eq!(Basis::Iota1.mul(Basis::Rho1), Some(Basis::Rho1));
        assert_eq!(Basis::Rho1.mul(Basis::Iota1), None);
        assert_eq!(Basis::Rho2.mul(Basis::Rho2), None);
    }

    #[test]
    fn gradings_for_sequences() {
        assert_eq!(grading_for_sequence(SignSequence([1, 1])), Grading::Gr1);
        assert_eq!(grading_for_sequence(SignSequence([-1, -1])), Grading::Gr1);
        assert_eq!(grading_for_sequence(SignSequence([1, -1])), Grading::Gr2);
        assert_eq!(grading(Basis::Rho2, Grading::Gr1), 1);
        assert_eq!(grading(Basis::Rho123, Grading::Gr2), 0);
        assert_eq!(grading(Basis::Iota2, Grading::Gr1), 0);
    }

    #[test]
    fn endpoint_products() {
        for p in SignSequence::ALL {
            assert_eq!(endpoint_sign_product(Basis::Rho12, p), Ok(-1));
        }
        assert_eq!(endpoint_sign_product(Basis::Rho2, SignSequence([1, 1])), Ok(-1));
        // Z_{+-} labels a1..a4 as +, -, -, +.
        assert_eq!(endpoint_sign_product(Basis::Rho1, SignSequence([1, -1])), Ok(-1));
        assert!(endpoint_sign_product(Basis::Iota1, SignSequence([1, 1])).is_err());
    }

    #[test]
    fn render_and_parse() {
        let e = AlgebraElement::term(-2, Basis::Rho12) + AlgebraElement::basis(Basis::Rho3);
        let s = e.to_string();
        assert_eq!(s, "rho3 - 2*rho12");
        assert_eq!(s.parse::<AlgebraElement>().unwrap(), e);
        assert_eq!("-2*rho12 + rho3".parse::<AlgebraElement>().unwrap(), e);
        assert_eq!("0".parse::<AlgebraElement>().unwrap(), AlgebraElement::zero());
        assert!("rho4".parse::<AlgebraElement>().is_err());
    }

    #[test]
    fn sign_sequence_parse() {
        assert_eq!("+-".parse::<SignSequence>().unwrap(), SignSequence([1, -1]));
        assert_eq!("-,+".parse::<SignSequence>().unwrap(), SignSequence([-1, 1]));
        assert!("+".parse::<SignSequence>().is_err());
    }
}
