//! Type A and type D structures over the torus algebra with integer
//! coefficients, their box tensor product, the closed chain complex of a
//! glued diagram, homology, type D morphisms and homotopy reduction.

mod snf;
mod triangle;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use thiserror::Error;

use crate::diagram::{BorderedDiagram, ClosedDiagram, DiagramError, DiagramFlow, Reading};
use crate::formal_flows::{self, Generator, Universe};
use crate::gf2::{self, Equation};
use crate::sign_assign::{excluded_from_type_d, SignAssignment, SignError};
use crate::torus_algebra::{grading_for_sequence, Basis, SignSequence};

pub use snf::{smith_normal_form, GradedHomology, HomologyResult, Matrix, SmithForm};
pub use triangle::{triangle_obstruction, TriangleReport};

#[derive(Debug, Error)]
pub enum StructureError {
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Sign(#[from] SignError),
    #[error("{0}")]
    Mismatch(String),
    #[error("relation fails: {0}")]
    Relation(String),
    #[error("idempotents disagree: {0}")]
    Idempotent(String),
}

/// Generator of a structure: the intersection points, the idempotent the
/// algebra sees and the ℤ/2 grading.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructGen {
    pub label: String,
    pub idempotent: u8,
    pub grading: u8,
    pub formal: Generator,
}

/// Sparse table keyed by (source, algebra element, target).
pub type ArrowTable = BTreeMap<(usize, Basis, usize), i64>;

fn add(table: &mut ArrowTable, key: (usize, Basis, usize), c: i64) {
    let e = table.entry(key).or_insert(0);
    *e += c;
    if *e == 0 {
        table.remove(&key);
    }
}

fn koszul(g: u8) -> i64 {
    if g % 2 == 0 {
        1
    } else {
        -1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeAStructure {
    pub name: String,
    pub p: SignSequence,
    pub generators: Vec<StructGen>,
    pub m1: BTreeMap<(usize, usize), i64>,
    /// m₂ on ρ elements; `m₂(x, ι_{o(x)}) = x` is implicit.
    pub m2: ArrowTable,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeDStructure {
    pub name: String,
    pub p: SignSequence,
    pub generators: Vec<StructGen>,
    /// δ¹; internal arrows carry the idempotent of their source.
    pub delta: ArrowTable,
}

impl TypeAStructure {
    /// `m₂(x, a)` as a list of (target, coefficient).
    pub fn m2_apply(&self, x: usize, a: Basis) -> Vec<(usize, i64)> {
        if a.is_idempotent() {
            return if Basis::idempotent(self.generators[x].idempotent) == a { vec![(x, 1)] } else { vec![] };
        }
        self.m2.range((x, a, 0)..=(x, a, usize::MAX)).map(|(&(_, _, y), &c)| (y, c)).collect()
    }

    /// The grading shift: every grading moves by one and m₁ changes sign,
    /// which keeps the relations and the box tensor differential up to sign.
    pub fn shifted(&self) -> TypeAStructure {
        let mut out = self.clone();
        for g in &mut out.generators {
            g.grading ^= 1;
        }
        for c in out.m1.values_mut() {
            *c = -*c;
        }
        out
    }

    pub fn m1_apply(&self, x: usize) -> Vec<(usize, i64)> {
        self.m1.range((x, 0)..=(x, usize::MAX)).map(|(&(_, y), &c)| (y, c)).collect()
    }

    /// Idempotent action, m₁² = 0, m₁∘m₂ = m₂∘(m₁ ⊗ id) and associativity of m₂.
    pub fn validate(&self) -> Result<(), StructureError> {
        let n = self.generators.len();
        let o = |x: usize| self.generators[x].idempotent;
        for &(x, y) in self.m1.keys() {
            if o(x) != o(y) {
                return Err(StructureError::Idempotent(format!("m1 {} -> {}", self.label(x), self.label(y))));
            }
            if self.generators[x].grading == self.generators[y].grading {
                return Err(StructureError::Relation(format!("m1 {} -> {} preserves the grading", self.label(x), self.label(y))));
            }
        }
        for &(x, a, y) in self.m2.keys() {
            if a.is_idempotent() || o(x) != a.left() || o(y) != a.right() {
                return Err(StructureError::Idempotent(format!("m2({}, {a}) -> {}", self.label(x), self.label(y))));
            }
        }
        let apply = |v: &BTreeMap<usize, i64>, f: &dyn Fn(usize) -> Vec<(usize, i64)>| {
            let mut out = BTreeMap::new();
            for (&x, &c) in v {
                for (y, d) in f(x) {
                    *out.entry(y).or_insert(0) += c * d;
                }
            }
            out.retain(|_, c| *c != 0);
            out
        };
        for x in 0..n {
            let unit = BTreeMap::from([(x, 1i64)]);
            let m1x = apply(&unit, &|z| self.m1_apply(z));
            if !apply(&m1x, &|z| self.m1_apply(z)).is_empty() {
                return Err(StructureError::Relation(format!("m1^2({}) != 0", self.label(x))));
            }
            for a in Basis::ALL {
                let lhs = apply(&apply(&unit, &|z| self.m2_apply(z, a)), &|z| self.m1_apply(z));
                let rhs = apply(&m1x, &|z| self.m2_apply(z, a));
                if lhs != rhs {
                    return Err(StructureError::Relation(format!("m1(m2({}, {a})) != m2(m1({}), {a})", self.label(x), self.label(x))));
                }
                for b in Basis::ALL {
                    let lhs = match a.mul(b) {
                        Some(ab) => apply(&unit, &|z| self.m2_apply(z, ab)),
                        None => BTreeMap::new(),
                    };
                    let rhs = apply(&apply(&unit, &|z| self.m2_apply(z, a)), &|z| self.m2_apply(z, b));
                    if lhs != rhs {
                        return Err(StructureError::Relation(format!("m2({}, {a}{b}) != m2(m2({}, {a}), {b})", self.label(x), self.label(x))));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn label(&self, x: usize) -> &str {
        &self.generators[x].label
    }
}

impl TypeDStructure {
    pub fn delta_from(&self, x: usize) -> impl Iterator<Item = (Basis, usize, i64)> + '_ {
        self.delta.iter().filter(move |((s, _, _), _)| *s == x).map(|(&(_, a, y), &c)| (a, y, c))
    }

    pub fn label(&self, x: usize) -> &str {
        &self.generators[x].label
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.label == label)
    }

    /// Idempotent compatibility and `(μ₂ ⊗ id)(id ⊗ δ¹)δ¹ = 0`, where passing
    /// δ¹ across `a` contributes `(-1)^{|a|}`.
    pub fn validate(&self) -> Result<(), StructureError> {
        check_idempotents(&self.delta, &self.generators, &self.generators, "delta")?;
        let gr = grading_for_sequence(self.p);
        let mut dd = ArrowTable::new();
        for (&(x, a, y), &c) in &self.delta {
            for (b, z, d) in self.delta_from(y) {
                if let Some(ab) = a.mul(b) {
                    add(&mut dd, (x, ab, z), gr.sign(a) * c * d);
                }
            }
        }
        if let Some((&(x, a, z), _)) = dd.iter().next() {
            return Err(StructureError::Relation(format!("delta^2({}) has {a} ⊗ {}", self.label(x), self.label(z))));
        }
        Ok(())
    }

    /// Cancel internal unit arrows until none remain, in table order. For a
    /// cancelled arrow `x --ε ι--> y`, every zig-zag `w --a--> y`, `x --b--> v`
    /// adds `-ε · coef · (a·b)` from `w` to `v`.
    pub fn reduce(&self) -> TypeDStructure {
        let mut cur = self.clone();
        loop {
            let found = cur
                .delta
                .iter()
                .find(|(&(x, a, y), &c)| a.is_idempotent() && x != y && c.abs() == 1)
                .map(|(&(x, _, y), &c)| (x, y, c));
            let Some((x, y, eps)) = found else { return cur };
            let mut next = ArrowTable::new();
            for (&(w, a, v), &c) in &cur.delta {
                if ![x, y].contains(&w) && ![x, y].contains(&v) {
                    add(&mut next, (w, a, v), c);
                }
            }
            for (&(w, a, t), &c) in &cur.delta {
                if t != y || w == x || w == y {
                    continue;
                }
                for (b, v, d) in cur.delta_from(x) {
                    if v == x || v == y {
                        continue;
                    }
                    if let Some(ab) = a.mul(b) {
                        add(&mut next, (w, ab, v), -c * eps * d);
                    }
                }
            }
            let keep: Vec<usize> = (0..cur.generators.len()).filter(|&i| i != x && i != y).collect();
            let renumber: HashMap<usize, usize> = keep.iter().enumerate().map(|(new, &old)| (old, new)).collect();
            cur = TypeDStructure {
                name: cur.name.clone(),
                p: cur.p,
                generators: keep.iter().map(|&i| cur.generators[i].clone()).collect(),
                delta: next.into_iter().map(|((w, a, v), c)| ((renumber[&w], a, renumber[&v]), c)).collect(),
            };
        }
    }
}

fn check_idempotents(table: &ArrowTable, src: &[StructGen], dst: &[StructGen], what: &str) -> Result<(), StructureError> {
    for &(x, a, y) in table.keys() {
        if a.left() != src[x].idempotent || a.right() != dst[y].idempotent {
            return Err(StructureError::Idempotent(format!("{what}: {} --{a}--> {}", src[x].label, dst[y].label)));
        }
    }
    Ok(())
}

impl fmt::Display for TypeDStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CFD({}) over P = {}", self.name, self.p)?;
        for x in 0..self.generators.len() {
            let terms: Vec<String> = self
                .delta_from(x)
                .map(|(a, y, c)| {
                    let alg = if a.is_idempotent() { String::new() } else { format!("{a} ⊗ ") };
                    format!("{c:+} {alg}{}", self.label(y))
                })
                .collect();
            let rhs = if terms.is_empty() { "0".to_string() } else { terms.join(" ") };
            writeln!(f, "  delta({}) = {rhs}", self.label(x))?;
        }
        Ok(())
    }
}

impl fmt::Display for TypeAStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CFA({}) over P = {}", self.name, self.p)?;
        for (&(x, y), &c) in &self.m1 {
            writeln!(f, "  m1({}) ∋ {c:+} {}", self.label(x), self.label(y))?;
        }
        for (&(x, a, y), &c) in &self.m2 {
            writeln!(f, "  m2({}, {a}) ∋ {c:+} {}", self.label(x), self.label(y))?;
        }
        Ok(())
    }
}

/// Formal flow of every diagram flow.
fn formal_flow_ids(
    gens: &[StructGen],
    flows: &[DiagramFlow],
    domains: &[formal_flows::Domain],
    u: &Universe,
) -> Result<Vec<u32>, StructureError> {
    flows
        .iter()
        .zip(domains)
        .map(|(f, dom)| {
            let x = u
                .generator_index(&gens[f.source].formal)
                .ok_or_else(|| StructureError::Mismatch(format!("generator {} is not in the universe", gens[f.source].label)))?;
            let k = u
                .lookup(x, *dom)
                .ok_or_else(|| StructureError::Mismatch(format!("flow {dom} from {} is not in the universe", gens[f.source].label)))?;
            debug_assert_eq!(Some(u.flow(k).end), u.generator_index(&gens[f.target].formal));
            Ok(k)
        })
        .collect()
}

/// Sign of every diagram flow, read from the assignment through its formal flow.
fn signed_flows(
    gens: &[StructGen],
    flows: &[DiagramFlow],
    domains: &[formal_flows::Domain],
    u: &Universe,
    s: &SignAssignment,
) -> Result<Vec<i64>, StructureError> {
    if s.flavor != u.flavor || s.power != u.power || s.values.len() != u.flows.len() {
        return Err(StructureError::Mismatch(format!("assignment for {} power {} used on {} power {}", s.flavor, s.power, u.flavor, u.power)));
    }
    Ok(formal_flow_ids(gens, flows, domains, u)?.into_iter().map(|k| i64::from(s.get(k))).collect())
}

/// The formal flow behind each type D arrow of a left-reading diagram, as
/// (source label, algebra element, target label, formal flow).
pub fn type_d_formal_flows(h: &BorderedDiagram, u: &Universe) -> Result<Vec<(String, Basis, String, u32)>, StructureError> {
    let dg = h.generators();
    let generators: Vec<StructGen> = dg
        .iter()
        .map(|g| StructGen { label: h.label(g), idempotent: 0, grading: 0, formal: h.formal_generator(g) })
        .collect();
    let flows: Vec<DiagramFlow> = h.flows().into_iter().filter(|f| h.rho(f).map_or(true, |r| !excluded_from_type_d(r))).collect();
    let domains = h.formal_domains(&dg, &flows)?;
    let ids = formal_flow_ids(&generators, &flows, &domains, u)?;
    Ok(flows
        .iter()
        .zip(ids)
        .map(|(f, k)| {
            let a = h.rho(f).unwrap_or_else(|| Basis::idempotent(3 - generators[f.source].formal.s));
            (generators[f.source].label.clone(), a, generators[f.target].label.clone(), k)
        })
        .collect())
}

/// CFA of a diagram in the right reading: m₁ counts internal domains and
/// m₂ the half-strips, each with the sign of its formal flow.
pub fn build_cfa(h: &BorderedDiagram, u: &Universe, s: &SignAssignment) -> Result<TypeAStructure, StructureError> {
    if h.reading != Reading::Right || u.flavor != h.flavor() || u.power != h.power() {
        return Err(StructureError::Mismatch(format!("CFA needs a right-reading diagram matching {} power {}", u.flavor, u.power)));
    }
    let dg = h.generators();
    let generators: Vec<StructGen> = dg
        .iter()
        .map(|g| {
            let formal = h.formal_generator(g);
            StructGen { label: h.label(g), idempotent: formal.s, grading: formal_flows::grading_right(&formal), formal }
        })
        .collect();
    let flows = h.flows();
    let domains = h.formal_domains(&dg, &flows)?;
    let signs = signed_flows(&generators, &flows, &domains, u, s)?;
    let mut a = TypeAStructure { name: h.name.clone(), p: h.p, generators, m1: BTreeMap::new(), m2: ArrowTable::new() };
    for (f, c) in flows.iter().zip(signs) {
        match h.rho(f) {
            None => {
                let e = a.m1.entry((f.source, f.target)).or_insert(0);
                *e += c;
            }
            Some(rho) => add(&mut a.m2, (f.source, rho, f.target), c),
        }
    }
    a.m1.retain(|_, c| *c != 0);
    a.validate()?;
    Ok(a)
}

/// CFD of a diagram in the left reading; ρ₁₂ and ρ₂₃ half-strips are skipped.
pub fn build_cfd(h: &BorderedDiagram, u: &Universe, s: &SignAssignment) -> Result<TypeDStructure, StructureError> {
    if h.reading != Reading::Left || u.flavor != h.flavor() || u.power != h.power() {
        return Err(StructureError::Mismatch(format!("CFD needs a left-reading diagram matching {} power {}", u.flavor, u.power)));
    }
    let dg = h.generators();
    let generators: Vec<StructGen> = dg
        .iter()
        .map(|g| {
            let formal = h.formal_generator(g);
            StructGen { label: h.label(g), idempotent: 3 - formal.s, grading: formal_flows::grading_left(&formal), formal }
        })
        .collect();
    let flows: Vec<DiagramFlow> = h.flows().into_iter().filter(|f| h.rho(f).map_or(true, |r| !excluded_from_type_d(r))).collect();
    let domains = h.formal_domains(&dg, &flows)?;
    let signs = signed_flows(&generators, &flows, &domains, u, s)?;
    let mut d = TypeDStructure { name: h.name.clone(), p: h.p, generators, delta: ArrowTable::new() };
    for (f, c) in flows.iter().zip(signs) {
        let a = h.rho(f).unwrap_or_else(|| Basis::idempotent(d.generators[f.source].idempotent));
        add(&mut d.delta, (f.source, a, f.target), c);
    }
    d.validate()?;
    Ok(d)
}

/// A ℤ/2-graded free chain complex with an odd differential.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegerChainComplex {
    pub labels: Vec<String>,
    pub gradings: Vec<u8>,
    /// `d(source)` has coefficient `c` on `target`, keyed (source, target).
    pub d: BTreeMap<(usize, usize), i64>,
}

impl IntegerChainComplex {
    pub fn new(labels: Vec<String>, gradings: Vec<u8>, entries: impl IntoIterator<Item = ((usize, usize), i64)>) -> Result<Self, StructureError> {
        let mut d = BTreeMap::new();
        for (k, c) in entries {
            *d.entry(k).or_insert(0) += c;
        }
        d.retain(|_, c| *c != 0);
        let cx = IntegerChainComplex { labels, gradings, d };
        cx.validate()?;
        Ok(cx)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Dense matrix with `m[target][source]`.
    pub fn matrix(&self) -> Vec<Vec<i64>> {
        let mut m = vec![vec![0; self.len()]; self.len()];
        for (&(s, t), &c) in &self.d {
            m[t][s] = c;
        }
        m
    }

    pub fn validate(&self) -> Result<(), StructureError> {
        for &(s, t) in self.d.keys() {
            if self.gradings[s] == self.gradings[t] {
                return Err(StructureError::Relation(format!("d({}) -> {} is not odd", self.labels[s], self.labels[t])));
            }
        }
        let mut dd: BTreeMap<(usize, usize), i64> = BTreeMap::new();
        for (&(s, t), &c) in &self.d {
            for (&(_, u), &e) in self.d.range((t, 0)..=(t, usize::MAX)) {
                *dd.entry((s, u)).or_insert(0) += c * e;
            }
        }
        if let Some((&(s, u), _)) = dd.iter().find(|(_, c)| **c != 0) {
            return Err(StructureError::Relation(format!("d^2({}) has {}", self.labels[s], self.labels[u])));
        }
        Ok(())
    }

    /// Differences against another complex on the same labels, as text;
    /// empty when the two are identical entry by entry.
    pub fn differences(&self, other: &IntegerChainComplex) -> Vec<String> {
        let a: BTreeSet<&String> = self.labels.iter().collect();
        let b: BTreeSet<&String> = other.labels.iter().collect();
        if a != b || a.len() != self.len() {
            return vec![format!("bases differ: {:?} vs {:?}", self.labels, other.labels)];
        }
        let idx: HashMap<&str, usize> = other.labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let map = |i: usize| idx[self.labels[i].as_str()];
        let mut out = Vec::new();
        for i in 0..self.len() {
            if self.gradings[i] != other.gradings[map(i)] {
                out.push(format!("grading of {}", self.labels[i]));
            }
        }
        for s in 0..self.len() {
            for t in 0..self.len() {
                let x = self.d.get(&(s, t)).copied().unwrap_or(0);
                let y = other.d.get(&(map(s), map(t))).copied().unwrap_or(0);
                if x != y {
                    out.push(format!("d({}) on {}: {x} vs {y}", self.labels[s], self.labels[t]));
                }
            }
        }
        out
    }

    /// Homology in gradings 0 and 1 via Smith normal form.
    pub fn homology(&self) -> HomologyResult {
        let part = |g: u8| -> Vec<usize> { (0..self.len()).filter(|&i| self.gradings[i] == g).collect() };
        let parts = [part(0), part(1)];
        // Map from grading g to grading 1-g, rows indexed by the target part.
        let out_of = |g: usize| -> SmithForm {
            let (src, dst) = (&parts[g], &parts[1 - g]);
            let m: Matrix = dst
                .iter()
                .map(|&t| src.iter().map(|&s| BigInt::from(self.d.get(&(s, t)).copied().unwrap_or(0))).collect())
                .collect();
            smith_normal_form(dst.len(), src.len(), &m)
        };
        let forms = [out_of(0), out_of(1)];
        let groups = (0..2)
            .map(|g| GradedHomology {
                grading: g as u8,
                free_rank: parts[g].len() - forms[g].rank() - forms[1 - g].rank(),
                torsion: forms[1 - g].factors.iter().filter(|d| **d != BigInt::from(1)).cloned().collect(),
            })
            .collect();
        HomologyResult { groups }
    }
}

/// `∂(x ⊗ y) = m₁(x) ⊗ y + (-1)^{|x|} Σ m₂(x, a_j) ⊗ y_j` over pairs with
/// matching idempotents. Generators are labelled `A.…+D.…`.
pub fn box_tensor(a: &TypeAStructure, d: &TypeDStructure) -> Result<IntegerChainComplex, StructureError> {
    if a.p != d.p {
        return Err(StructureError::Mismatch(format!("sign sequences {} and {} differ", a.p, d.p)));
    }
    let prefix = |side: &str, l: &str| l.split('+').map(|p| format!("{side}.{p}")).collect::<Vec<_>>().join("+");
    let mut pairs = Vec::new();
    for (i, x) in a.generators.iter().enumerate() {
        for (j, y) in d.generators.iter().enumerate() {
            if x.idempotent == y.idempotent {
                pairs.push((i, j));
            }
        }
    }
    let index: HashMap<(usize, usize), usize> = pairs.iter().enumerate().map(|(k, &p)| (p, k)).collect();
    let labels = pairs.iter().map(|&(i, j)| format!("{}+{}", prefix("A", a.label(i)), prefix("D", d.label(j)))).collect();
    let gradings = pairs.iter().map(|&(i, j)| (a.generators[i].grading + d.generators[j].grading) % 2).collect();
    let mut entries = Vec::new();
    for (k, &(i, j)) in pairs.iter().enumerate() {
        for (x2, c) in a.m1_apply(i) {
            entries.push(((k, index[&(x2, j)]), c));
        }
        let sign = koszul(a.generators[i].grading);
        for (alg, y2, c) in d.delta_from(j) {
            for (x2, e) in a.m2_apply(i, alg) {
                let t = index
                    .get(&(x2, y2))
                    .ok_or_else(|| StructureError::Idempotent(format!("{} ⊗ {} leaves the basis", a.label(x2), d.label(y2))))?;
                entries.push(((k, *t), sign * c * e));
            }
        }
    }
    IntegerChainComplex::new(labels, gradings, entries)
}

/// The closed complex counting a closed diagram's flows with their signs.
pub fn tilde_cf(h: &ClosedDiagram, u: &Universe, s: &SignAssignment) -> Result<IntegerChainComplex, StructureError> {
    if u.power != h.power() {
        return Err(StructureError::Mismatch(format!("closed universe power {} for a diagram of power {}", u.power, h.power())));
    }
    let dg = h.generators();
    let generators: Vec<StructGen> = dg
        .iter()
        .map(|g| {
            let formal = h.formal_generator(g);
            StructGen { label: h.label(g), idempotent: 0, grading: formal_flows::grading_closed(&formal), formal }
        })
        .collect();
    let flows = h.flows();
    let domains = h.formal_domains(&dg, &flows)?;
    let signs = signed_flows(&generators, &flows, &domains, u, s)?;
    IntegerChainComplex::new(
        generators.iter().map(|g| g.label.clone()).collect(),
        generators.iter().map(|g| g.grading).collect(),
        flows.iter().zip(signs).map(|(f, c)| ((f.source, f.target), c)),
    )
}

/// A morphism `M → A ⊗ N` of type D structures.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DMorphism {
    pub table: ArrowTable,
}

impl DMorphism {
    pub fn new(entries: impl IntoIterator<Item = ((usize, Basis, usize), i64)>) -> Self {
        let mut table = ArrowTable::new();
        for (k, c) in entries {
            add(&mut table, k, c);
        }
        DMorphism { table }
    }

    pub fn is_zero(&self) -> bool {
        self.table.is_empty()
    }

    fn check(&self, m: &TypeDStructure, n: &TypeDStructure) -> Result<(), StructureError> {
        check_idempotents(&self.table, &m.generators, &n.generators, "morphism")
    }

    /// `df = δ_N ∘ f − f ∘ δ_M`; pushing δ_N past the coefficient `a` of `f`
    /// contributes `(-1)^{|a|}`.
    pub fn differential(&self, m: &TypeDStructure, n: &TypeDStructure) -> Result<DMorphism, StructureError> {
        self.check(m, n)?;
        let gr = grading_for_sequence(n.p);
        let mut out = ArrowTable::new();
        for (&(x, a, y), &c) in &self.table {
            for (b, z, d) in n.delta_from(y) {
                if let Some(ab) = a.mul(b) {
                    add(&mut out, (x, ab, z), gr.sign(a) * c * d);
                }
            }
        }
        for (&(x, a, y), &c) in &m.delta {
            for (&(_, b, z), &d) in self.table.range((y, Basis::Iota1, 0)..=(y, Basis::Rho123, usize::MAX)) {
                if let Some(ab) = a.mul(b) {
                    add(&mut out, (x, ab, z), -c * d);
                }
            }
        }
        Ok(DMorphism { table: out })
    }

    pub fn is_homomorphism(&self, m: &TypeDStructure, n: &TypeDStructure) -> Result<bool, StructureError> {
        Ok(self.differential(m, n)?.is_zero())
    }

    /// `g ∘ f = (μ₂ ⊗ id)(id ⊗ g) f`.
    pub fn then(&self, g: &DMorphism) -> DMorphism {
        let mut out = ArrowTable::new();
        for (&(x, a, y), &c) in &self.table {
            for (&(_, b, z), &d) in g.table.range((y, Basis::Iota1, 0)..=(y, Basis::Rho123, usize::MAX)) {
                if let Some(ab) = a.mul(b) {
                    add(&mut out, (x, ab, z), c * d);
                }
            }
        }
        DMorphism { table: out }
    }
}

/// A generator label with its points sorted, so that labels from different
/// curve orders compare equal.
pub fn point_set(label: &str) -> String {
    let mut parts: Vec<&str> = label.split('+').collect();
    parts.sort_unstable();
    parts.join("+")
}

/// Signs `u` with `b(x --k--> y) = u(x) u(y) a(x --k--> y)` after matching
/// generators by their point sets, if the two sparse tables are related that way.
pub fn signed_isomorphism<K: Ord + Copy>(
    a_labels: &[String],
    a: &BTreeMap<(usize, K, usize), i64>,
    b_labels: &[String],
    b: &BTreeMap<(usize, K, usize), i64>,
) -> Option<Vec<i8>> {
    if a_labels.len() != b_labels.len() || a.len() != b.len() {
        return None;
    }
    let idx: HashMap<String, usize> = b_labels.iter().enumerate().map(|(i, l)| (point_set(l), i)).collect();
    let map: Vec<usize> = a_labels.iter().map(|l| idx.get(&point_set(l)).copied()).collect::<Option<_>>()?;
    let mut eqs = Vec::new();
    for (&(x, k, y), &c) in a {
        let d = *b.get(&(map[x], k, map[y]))?;
        if d.abs() != c.abs() {
            return None;
        }
        let flip = (c < 0) != (d < 0);
        eqs.push(if x == y {
            Equation::new(vec![], flip)
        } else {
            Equation::new(vec![x as u32, y as u32], flip)
        });
    }
    let sol = gf2::solve(a_labels.len(), &eqs, None).ok()?;
    Some(sol.values.iter().map(|&v| if v { -1 } else { 1 }).collect())
}

impl TypeDStructure {
    pub fn signed_isomorphism(&self, other: &TypeDStructure) -> Option<Vec<i8>> {
        let labels = |d: &TypeDStructure| d.generators.iter().map(|g| g.label.clone()).collect::<Vec<_>>();
        signed_isomorphism(&labels(self), &self.delta, &labels(other), &other.delta)
    }
}

impl TypeAStructure {
    /// m₁ is folded in under the idempotent key of its source.
    fn arrows(&self) -> ArrowTable {
        let mut t = self.m2.clone();
        for (&(x, y), &c) in &self.m1 {
            t.insert((x, Basis::idempotent(self.generators[x].idempotent), y), c);
        }
        t
    }

    pub fn signed_isomorphism(&self, other: &TypeAStructure) -> Option<Vec<i8>> {
        let labels = |d: &TypeAStructure| d.generators.iter().map(|g| g.label.clone()).collect::<Vec<_>>();
        signed_isomorphism(&labels(self), &self.arrows(), &labels(other), &other.arrows())
    }
}

impl IntegerChainComplex {
    pub fn signed_isomorphism(&self, other: &IntegerChainComplex) -> Option<Vec<i8>> {
        let keyed = |c: &IntegerChainComplex| c.d.iter().map(|(&(s, t), &v)| ((s, (), t), v)).collect::<BTreeMap<_, _>>();
        signed_isomorphism(&self.labels, &keyed(self), &other.labels, &keyed(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{builtin, glue, Builtin};
    use crate::formal_flows::{enumerate, Flavor};
    use crate::sign_assign::{
        apply_gauge, compatible_partner_class, extend_pairing, solve_closed, BorderedSetup, ClassLabel,
    };

    fn pp() -> SignSequence {
        SignSequence::plus_plus()
    }

    #[test]
    fn cfd_tables_have_the_listed_arrows() {
        let setup = BorderedSetup::type_d(pp(), 1).unwrap();
        let sd = setup.in_class(ClassLabel(1, 1)).unwrap();
        let shapes: [(Builtin, &[(&str, Basis, &str)]); 3] = [
            (Builtin::Hinf, &[("r", Basis::Rho2, "t"), ("s", Basis::Rho3, "r"), ("s", Basis::Iota1, "t")]),
            (Builtin::Hm1, &[("a", Basis::Rho3, "b"), ("a", Basis::Rho1, "b")]),
            (Builtin::H0, &[("n", Basis::Rho1, "q"), ("p", Basis::Rho2, "n"), ("p", Basis::Iota2, "q")]),
        ];
        for (which, shape) in shapes {
            let h = builtin(which, pp(), Reading::Left);
            let d = build_cfd(&h, &setup.universe, &sd).unwrap();
            let mut got: Vec<(String, Basis, String)> =
                d.delta.keys().map(|&(x, a, y)| (d.label(x).to_string(), a, d.label(y).to_string())).collect();
            let mut want: Vec<(String, Basis, String)> = shape.iter().map(|&(x, a, y)| (x.into(), a, y.into())).collect();
            got.sort();
            want.sort();
            assert_eq!(got, want, "{which}");
            assert!(d.delta.values().all(|c| c.abs() == 1));
        }
    }

    #[test]
    fn cfa_has_units_and_validates() {
        for p in SignSequence::ALL {
            let setup = BorderedSetup::type_a(p, 1).unwrap();
            for class in ClassLabel::ALL {
                let sa = setup.in_class(class).unwrap();
                for which in Builtin::ALL {
                    let h = builtin(which, p, Reading::Right);
                    let a = build_cfa(&h, &setup.universe, &sa).unwrap();
                    a.shifted().validate().unwrap();
                    for x in 0..a.generators.len() {
                        let o = a.generators[x].idempotent;
                        assert_eq!(a.m2_apply(x, Basis::idempotent(o)), vec![(x, 1)]);
                        assert!(a.m2_apply(x, Basis::idempotent(3 - o)).is_empty());
                    }
                }
            }
        }
    }

    #[test]
    fn reduction_of_the_slope_infinity_structure() {
        let setup = BorderedSetup::type_d(pp(), 1).unwrap();
        let sd = setup.in_class(ClassLabel(1, -1)).unwrap();
        let d = build_cfd(&builtin(Builtin::Hinf, pp(), Reading::Left), &setup.universe, &sd).unwrap();
        let coef = |x: &str, a: Basis, y: &str| d.delta[&(d.index_of(x).unwrap(), a, d.index_of(y).unwrap())];
        let expected = -coef("s", Basis::Iota1, "t") * coef("r", Basis::Rho2, "t") * coef("s", Basis::Rho3, "r");
        let r = d.reduce();
        assert_eq!(r.generators.len(), 1);
        assert_eq!(r.label(0), "r");
        assert_eq!(r.delta, ArrowTable::from([((0, Basis::Rho23, 0), expected)]));
        r.validate().unwrap();
    }

    #[test]
    fn morphism_basics() {
        let setup = BorderedSetup::type_d(pp(), 1).unwrap();
        let sd = setup.in_class(ClassLabel(1, 1)).unwrap();
        let m = build_cfd(&builtin(Builtin::Hm1, pp(), Reading::Left), &setup.universe, &sd).unwrap();
        let zero = DMorphism::default();
        assert!(zero.is_homomorphism(&m, &m).unwrap());
        let id = DMorphism::new((0..m.generators.len()).map(|x| ((x, Basis::idempotent(m.generators[x].idempotent), x), 1)));
        assert!(id.is_homomorphism(&m, &m).unwrap());
        assert_eq!(id.then(&id), id);
        let bad = DMorphism::new([((0, Basis::Rho2, 0), 1)]);
        assert!(bad.differential(&m, &m).is_err());
    }

    #[test]
    fn gauge_change_intertwines_structures() {
        let p = SignSequence([1, -1]);
        let setup = BorderedSetup::type_d(p, 1).unwrap();
        let sd = setup.in_class(ClassLabel(-1, 1)).unwrap();
        let w: Vec<i8> = (0..setup.universe.generators.len()).map(|i| if i % 3 == 1 { -1 } else { 1 }).collect();
        let sd2 = apply_gauge(&setup.universe, &sd, &w);
        for which in Builtin::ALL {
            let h = builtin(which, p, Reading::Left);
            let d1 = build_cfd(&h, &setup.universe, &sd).unwrap();
            let d2 = build_cfd(&h, &setup.universe, &sd2).unwrap();
            let u = |x: usize| i64::from(w[setup.universe.generator_index(&d1.generators[x].formal).unwrap() as usize]);
            for (&(x, a, y), &c) in &d1.delta {
                assert_eq!(d2.delta[&(x, a, y)], u(x) * c * u(y));
            }
            assert!(d1.signed_isomorphism(&d2).is_some());
        }
    }

    #[test]
    fn pairing_matches_the_glued_complex() {
        let p = pp();
        let (ua_setup, ud_setup) = (BorderedSetup::type_a(p, 1).unwrap(), BorderedSetup::type_d(p, 1).unwrap());
        let closed = enumerate(2, Flavor::Closed).unwrap();
        let (class, partner) = ClassLabel::ALL
            .into_iter()
            .find_map(|c| {
                let sa = ua_setup.in_class(c).ok()?;
                compatible_partner_class(&ua_setup.universe, &sa, &ud_setup, &closed).ok().map(|d| (c, d))
            })
            .unwrap();
        let sa = ua_setup.in_class(class).unwrap();
        let sd = ud_setup.in_class(partner).unwrap();
        let sc = extend_pairing(&ua_setup.universe, &sa, &ud_setup.universe, &sd, &closed).unwrap();
        for a in Builtin::ALL {
            for d in Builtin::ALL {
                let (h1, h2) = (builtin(a, p, Reading::Right), builtin(d, p, Reading::Left));
                let cfa = build_cfa(&h1, &ua_setup.universe, &sa).unwrap();
                let cfd = build_cfd(&h2, &ud_setup.universe, &sd).unwrap();
                let boxed = box_tensor(&cfa, &cfd).unwrap();
                let glued = tilde_cf(&glue(&h1, &h2).unwrap(), &closed, &sc).unwrap();
                assert_eq!(boxed.differences(&glued), Vec::<String>::new(), "{a} ⊠ {d}");
                assert_eq!(boxed.homology(), glued.homology());
            }
        }
    }

    #[test]
    fn closed_complex_is_independent_of_curve_order() {
        let p = SignSequence([-1, 1]);
        let glued = glue(&builtin(Builtin::H0, p, Reading::Right), &builtin(Builtin::Hinf, p, Reading::Left)).unwrap();
        let closed = enumerate(2, Flavor::Closed).unwrap();
        let base = tilde_cf(&glued, &closed, &solve_closed(&closed).unwrap()).unwrap();
        let reordered = glued.with_order(&["g2", "g1"], &["D.b1", "A.b1"]).unwrap();
        let other = tilde_cf(&reordered, &closed, &solve_closed(&closed).unwrap()).unwrap();
        assert!(base.signed_isomorphism(&other).is_some());
        assert_eq!(base.homology().total_rank(), other.homology().total_rank());
    }

    #[test]
    fn homology_of_trivial_complexes() {
        let cx = IntegerChainComplex::new(vec!["x".into(), "y".into(), "z".into()], vec![0, 1, 0], []).unwrap();
        let h = cx.homology();
        assert_eq!(h.groups[0].free_rank, 2);
        assert_eq!(h.groups[1].free_rank, 1);
        let cx = IntegerChainComplex::new(vec!["x".into(), "y".into()], vec![1, 0], [((0, 1), 2)]).unwrap();
        let h = cx.homology();
        assert_eq!(h.total_rank(), 0);
        assert_eq!(h.groups[0].torsion, vec![BigInt::from(2)]);
        assert_eq!(h.to_string(), "grading 0: Z/2\ngrading 1: 0\n");
        assert!(IntegerChainComplex::new(vec!["x".into(), "y".into()], vec![0, 0], [((0, 1), 1)]).is_err());
    }
}
