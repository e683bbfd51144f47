//! Sparse linear systems over GF(2).
//!
//! Two-term equations are merged first with a parity union-find; the rest go
//! through incremental row reduction over the surviving representatives.

use fixedbitset::FixedBitSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("system is inconsistent at equation {0}")]
pub struct Inconsistent(pub usize);

/// `XOR of vars = rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equation {
    pub vars: Vec<u32>,
    pub rhs: bool,
}

impl Equation {
    pub fn new(vars: Vec<u32>, rhs: bool) -> Self {
        Equation { vars, rhs }
    }

    pub fn holds(&self, values: &[bool]) -> bool {
        self.vars.iter().fold(false, |acc, &v| acc ^ values[v as usize]) == self.rhs
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub values: Vec<bool>,
    /// Dimension of the solution space.
    pub free: usize,
}

struct ParityUnionFind {
    parent: Vec<u32>,
    parity: Vec<bool>,
    rank: Vec<u8>,
}

impl ParityUnionFind {
    fn new(n: usize) -> Self {
        ParityUnionFind {
            parent: (0..n as u32).collect(),
            parity: vec![false; n],
            rank: vec![0; n],
        }
    }

    /// Root of `v` and the parity of `v` relative to it.
    fn find(&mut self, v: u32) -> (u32, bool) {
        let mut path = Vec::new();
        let mut cur = v;
        while self.parent[cur as usize] != cur {
            path.push(cur);
            cur = self.parent[cur as usize];
        }
        let root = cur;
        // Compress from the top so each parity is relative to the root.
        let mut acc = false;
        for &node in path.iter().rev() {
            acc ^= self.parity[node as usize];
            self.parity[node as usize] = acc;
            self.parent[node as usize] = root;
        }
        (root, if path.is_empty() { false } else { self.parity[v as usize] })
    }

    /// Impose `a XOR b = rhs`; false on contradiction.
    fn union(&mut self, a: u32, b: u32, rhs: bool) -> bool {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            return pa ^ pb == rhs;
        }
        let link = pa ^ pb ^ rhs;
        let (child, root) = if self.rank[ra as usize] < self.rank[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[child as usize] = root;
        self.parity[child as usize] = link;
        if self.rank[ra as usize] == self.rank[rb as usize] {
            self.rank[root as usize] += 1;
        }
        true
    }
}

struct Row {
    bits: FixedBitSet,
    rhs: bool,
    pivot: usize,
}

/// Solve the system. Free variables are 0 unless a seed is given, in which
/// case they are drawn from a ChaCha stream.
pub fn solve(n_vars: usize, equations: &[Equation], seed: Option<u64>) -> Result<Solution, Inconsistent> {
    let constant = n_vars as u32;
    let mut uf = ParityUnionFind::new(n_vars + 1);
    let mut long = Vec::new();
    for (i, eq) in equations.iter().enumerate() {
        let ok = match eq.vars.as_slice() {
            [] => !eq.rhs,
            [a] => uf.union(*a, constant, eq.rhs),
            [a, b] => uf.union(*a, *b, eq.rhs),
            _ => {
                long.push(i);
                true
            }
        };
        if !ok {
            return Err(Inconsistent(i));
        }
    }

    // Compact the representatives other than the constant's class.
    let (const_root, const_parity) = uf.find(constant);
    let mut col_of = vec![usize::MAX; n_vars + 1];
    let mut roots = Vec::new();
    for v in 0..n_vars as u32 {
        let (r, _) = uf.find(v);
        if r != const_root && col_of[r as usize] == usize::MAX {
            col_of[r as usize] = roots.len();
            roots.push(r);
        }
    }
    let ncols = roots.len();

    let mut rows: Vec<Row> = Vec::new();
    let mut pivot_row = vec![usize::MAX; ncols];
    for &i in &long {
        let eq = &equations[i];
        let mut bits = FixedBitSet::with_capacity(ncols);
        let mut rhs = eq.rhs;
        for &v in &eq.vars {
            let (r, p) = uf.find(v);
            rhs ^= p;
            if r == const_root {
                rhs ^= const_parity;
            } else {
                bits.toggle(col_of[r as usize]);
            }
        }
        let hits: Vec<usize> = bits.ones().filter(|&c| pivot_row[c] != usize::MAX).collect();
        for c in hits {
            let row = &rows[pivot_row[c]];
            bits.symmetric_difference_with(&row.bits);
            rhs ^= row.rhs;
        }
        let Some(pivot) = bits.ones().next() else {
            if rhs {
                return Err(Inconsistent(i));
            }
            continue;
        };
        for row in rows.iter_mut() {
            if row.bits.contains(pivot) {
                row.bits.symmetric_difference_with(&bits);
                row.rhs ^= rhs;
            }
        }
        pivot_row[pivot] = rows.len();
        rows.push(Row { bits, rhs, pivot });
    }

    let mut col_value = vec![false; ncols];
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    for c in 0..ncols {
        if pivot_row[c] == usize::MAX {
            if let Some(rng) = rng.as_mut() {
                col_value[c] = rng.gen();
            }
        }
    }
    for row in &rows {
        let mut v = row.rhs;
        for c in row.bits.ones() {
            if c != row.pivot {
                v ^= col_value[c];
            }
        }
        col_value[row.pivot] = v;
    }

    let values = (0..n_vars as u32)
        .map(|v| {
            let (r, p) = uf.find(v);
            if r == const_root {
                p ^ const_parity
            } else {
                p ^ col_value[col_of[r as usize]]
            }
        })
        .collect();
    Ok(Solution { values, free: ncols - rows.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_system() {
        let eqs = vec![
            Equation::new(vec![0, 1], true),
            Equation::new(vec![1, 2, 3], false),
            Equation::new(vec![3], true),
        ];
        let s = solve(4, &eqs, None).unwrap();
        assert!(eqs.iter().all(|e| e.holds(&s.values)));
        assert_eq!(s.free, 1);
    }

    #[test]
    fn contradiction() {
        let eqs = vec![Equation::new(vec![0, 1], true), Equation::new(vec![0, 1], false)];
        assert_eq!(solve(2, &eqs, None).unwrap_err(), Inconsistent(1));
        let eqs = vec![
            Equation::new(vec![0, 1, 2], true),
            Equation::new(vec![0, 1, 2], false),
        ];
        assert!(solve(3, &eqs, None).is_err());
    }

    proptest! {
        #[test]
        fn planted_solutions_are_recovered(
            planted in proptest::collection::vec(any::<bool>(), 1..30),
            shapes in proptest::collection::vec(proptest::collection::vec(0usize..1000, 1..5), 0..40),
            seed in any::<u64>(),
        ) {
            let n = planted.len();
            let eqs: Vec<Equation> = shapes
                .iter()
                .map(|vs| {
                    let vars: Vec<u32> = vs.iter().map(|v| (v % n) as u32).collect();
                    let rhs = vars.iter().fold(false, |a, &v| a ^ planted[v as usize]);
                    Equation::new(vars, rhs)
                })
                .collect();
            let s = solve(n, &eqs, Some(seed)).unwrap();
            prop_assert!(eqs.iter().all(|e| e.holds(&s.values)));
        }
    }
}
