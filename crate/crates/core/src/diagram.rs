//! Nice Heegaard diagrams as combinatorial data: curves, signed intersection
//! points and elementary domains, plus the text format, the three built-in
//! torus diagrams and gluing.
//!
//! A bordered diagram is stored in one of two readings. The left reading
//! labels half-strips with the chords seen by a type D structure, the right
//! reading with those seen by a type A structure. Rereading swaps the two
//! α-arcs, reverses every chord (ρ1 ↔ ρ3, ρ12 ↔ ρ23) and swaps the sign
//! sequence, leaving points and edge bits alone.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::formal_flows::{self, Domain, Flavor, Frame, Generator};
use crate::torus_algebra::{Basis, SignSequence};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiagramError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{rule}: {detail}")]
    Invariant { rule: &'static str, detail: String },
    #[error("boundary mismatch: {0}")]
    Mismatch(String),
    #[error("unknown built-in diagram {0:?} (expected Hinf, Hm1 or H0)")]
    UnknownBuiltin(String),
}

fn invariant(rule: &'static str, detail: impl Into<String>) -> DiagramError {
    DiagramError::Invariant { rule, detail: detail.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Reading {
    Left,
    Right,
}

impl Reading {
    fn other(self) -> Reading {
        match self {
            Reading::Left => Reading::Right,
            Reading::Right => Reading::Left,
        }
    }
}

impl fmt::Display for Reading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reading::Left => "left",
            Reading::Right => "right",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Point {
    pub name: String,
    pub alpha: String,
    pub beta: String,
    pub sign: i8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Bigon,
    /// Corners are listed bottom-left, top-right (start) then bottom-right,
    /// top-left (end); flags are the bottom, right, top and left edge bits.
    Rect,
    /// A half-strip with one edge on the boundary; the flag is its β-edge bit.
    Half(Basis),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainRecord {
    pub kind: DomainKind,
    pub start: Vec<String>,
    pub end: Vec<String>,
    pub blocked: Vec<String>,
    pub flags: Vec<i8>,
}

impl DomainRecord {
    fn expected_corners(&self) -> (usize, usize) {
        match self.kind {
            DomainKind::Rect => (2, 2),
            _ => (1, 1),
        }
    }
}

/// One point per β-circle, indexed like the β list.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DiagramGenerator {
    pub points: Vec<usize>,
    /// Occupied α-arc (1 or 2) for bordered diagrams.
    pub arc: Option<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiagramFlow {
    pub domain: usize,
    pub source: usize,
    pub target: usize,
}

/// Curves, points and domains shared by bordered and closed diagrams.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Surface {
    pub alpha: Vec<String>,
    pub beta: Vec<String>,
    pub points: Vec<Point>,
    pub domains: Vec<DomainRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BorderedDiagram {
    pub name: String,
    pub p: SignSequence,
    pub reading: Reading,
    /// α-circles only; the arcs are always `a1` and `a2`.
    pub surface: Surface,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosedDiagram {
    pub name: String,
    pub surface: Surface,
}

pub const ARCS: [&str; 2] = ["a1", "a2"];

fn arc_index(alpha: &str) -> Option<u8> {
    ARCS.iter().position(|a| *a == alpha).map(|i| i as u8 + 1)
}

/// Where each curve sits in the formal coordinates.
struct Layout {
    coord: HashMap<String, u8>,
    beta: HashMap<String, u8>,
    flavor: Flavor,
    power: usize,
}

impl Layout {
    fn new(surface: &Surface, flavor: Flavor) -> Layout {
        let g = surface.beta.len();
        let mut coord = HashMap::new();
        let offset = match flavor {
            Flavor::Left(_) => {
                for a in ARCS {
                    coord.insert(a.to_string(), 0);
                }
                1
            }
            Flavor::Right(_) => {
                for a in ARCS {
                    coord.insert(a.to_string(), (g - 1) as u8);
                }
                0
            }
            Flavor::Closed => 0,
        };
        for (i, c) in surface.alpha.iter().enumerate() {
            coord.insert(c.clone(), (i + offset) as u8);
        }
        let beta = surface.beta.iter().enumerate().map(|(i, b)| (b.clone(), i as u8)).collect();
        Layout { coord, beta, flavor, power: g }
    }
}

impl Surface {
    fn point_index(&self) -> HashMap<&str, usize> {
        self.points.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect()
    }

    fn corner(&self, names: &HashMap<&str, usize>, name: &str) -> Result<usize, DiagramError> {
        names
            .get(name)
            .copied()
            .ok_or_else(|| invariant("unknown point", name.to_string()))
    }

    fn check(&self, bordered: bool) -> Result<(), DiagramError> {
        let mut seen = HashSet::new();
        for c in self.alpha.iter().chain(&self.beta) {
            if !seen.insert(c.as_str()) || (bordered && arc_index(c).is_some()) {
                return Err(invariant("curve names are distinct", c.clone()));
            }
        }
        let g = self.beta.len();
        if g == 0 {
            return Err(invariant("at least one β-circle", ""));
        }
        let circles = if bordered { g - 1 } else { g };
        if self.alpha.len() != circles {
            return Err(invariant(
                "α-circle count",
                format!("{} α-circles for {} β-circles", self.alpha.len(), g),
            ));
        }
        let mut names = HashSet::new();
        for pt in &self.points {
            if !names.insert(pt.name.as_str()) {
                return Err(invariant("point names are distinct", pt.name.clone()));
            }
            let on_alpha = self.alpha.contains(&pt.alpha) || (bordered && arc_index(&pt.alpha).is_some());
            if !on_alpha || !self.beta.contains(&pt.beta) {
                return Err(invariant("points lie on declared curves", pt.name.clone()));
            }
            if pt.sign != 1 && pt.sign != -1 {
                return Err(invariant("point signs are ±1", pt.name.clone()));
            }
        }
        for c in self.alpha.iter().chain(&self.beta) {
            if !self.points.iter().any(|p| &p.alpha == c || &p.beta == c) {
                return Err(invariant("every circle hosts a point", c.clone()));
            }
        }
        let names = self.point_index();
        for (i, d) in self.domains.iter().enumerate() {
            let (ns, ne) = d.expected_corners();
            if d.start.len() != ns || d.end.len() != ne {
                return Err(invariant("domain corner count", format!("domain {}", i + 1)));
            }
            let want_flags = match d.kind {
                DomainKind::Bigon => 2,
                DomainKind::Rect => 4,
                DomainKind::Half(_) => 1,
            };
            if d.flags.len() != want_flags || d.flags.iter().any(|&f| f != 1 && f != -1) {
                return Err(invariant("domain flags", format!("domain {}", i + 1)));
            }
            for n in d.start.iter().chain(&d.end).chain(&d.blocked) {
                self.corner(&names, n)?;
            }
            let pt = |n: &String| &self.points[names[n.as_str()]];
            match d.kind {
                DomainKind::Bigon => {
                    let (a, b) = (pt(&d.start[0]), pt(&d.end[0]));
                    if a.alpha != b.alpha || a.beta != b.beta {
                        return Err(invariant("bigon corners share both curves", format!("domain {}", i + 1)));
                    }
                    if a.sign == b.sign {
                        return Err(invariant("bigon corners have opposite signs", format!("domain {}", i + 1)));
                    }
                }
                DomainKind::Rect => {
                    let (c1, c2, c3, c4) = (pt(&d.start[0]), pt(&d.start[1]), pt(&d.end[0]), pt(&d.end[1]));
                    let ok = c1.alpha == c3.alpha
                        && c2.alpha == c4.alpha
                        && c1.beta == c4.beta
                        && c2.beta == c3.beta
                        && c1.alpha != c2.alpha
                        && c1.beta != c2.beta;
                    if !ok {
                        return Err(invariant("rectangle corners form a frame", format!("domain {}", i + 1)));
                    }
                }
                DomainKind::Half(_) => {
                    if !bordered {
                        return Err(invariant("closed diagrams have no half-strips", format!("domain {}", i + 1)));
                    }
                    let (a, b) = (pt(&d.start[0]), pt(&d.end[0]));
                    if a.beta != b.beta {
                        return Err(invariant("half-strip corners share a β-circle", format!("domain {}", i + 1)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Every choice of one point per β-circle covering each α-curve once,
    /// counting the two arcs of a bordered diagram as one slot.
    fn generators(&self, bordered: bool) -> Vec<DiagramGenerator> {
        let slot = |alpha: &str| -> usize {
            match (bordered, arc_index(alpha)) {
                (true, Some(_)) => self.alpha.len(),
                _ => self.alpha.iter().position(|a| a == alpha).expect("validated curve"),
            }
        };
        let by_beta: Vec<Vec<usize>> = self
            .beta
            .iter()
            .map(|b| (0..self.points.len()).filter(|&i| &self.points[i].beta == b).collect())
            .collect();
        let mut out = Vec::new();
        let mut chosen = Vec::with_capacity(self.beta.len());
        let mut used = vec![false; self.beta.len()];
        fn rec(
            k: usize,
            by_beta: &[Vec<usize>],
            slot: &dyn Fn(&str) -> usize,
            points: &[Point],
            chosen: &mut Vec<usize>,
            used: &mut [bool],
            out: &mut Vec<Vec<usize>>,
        ) {
            if k == by_beta.len() {
                out.push(chosen.clone());
                return;
            }
            for &i in &by_beta[k] {
                let s = slot(&points[i].alpha);
                if !used[s] {
                    used[s] = true;
                    chosen.push(i);
                    rec(k + 1, by_beta, slot, points, chosen, used, out);
                    chosen.pop();
                    used[s] = false;
                }
            }
        }
        rec(0, &by_beta, &slot, &self.points, &mut chosen, &mut used, &mut out);
        out.into_iter()
            .map(|points| {
                let arc = if bordered {
                    points.iter().find_map(|&i| arc_index(&self.points[i].alpha))
                } else {
                    None
                };
                DiagramGenerator { points, arc }
            })
            .collect()
    }

    fn flows(&self, gens: &[DiagramGenerator]) -> Vec<DiagramFlow> {
        let names = self.point_index();
        let index: HashMap<&[usize], usize> =
            gens.iter().enumerate().map(|(i, g)| (g.points.as_slice(), i)).collect();
        let mut out = Vec::new();
        for (di, d) in self.domains.iter().enumerate() {
            let start: Vec<usize> = d.start.iter().map(|n| names[n.as_str()]).collect();
            let end: Vec<usize> = match d.kind {
                // Rectangle ends: the bottom-right corner replaces the
                // bottom-left start, the top-left the top-right.
                DomainKind::Rect => vec![names[d.end[1].as_str()], names[d.end[0].as_str()]],
                _ => d.end.iter().map(|n| names[n.as_str()]).collect(),
            };
            let blocked: HashSet<usize> = d.blocked.iter().map(|n| names[n.as_str()]).collect();
            for (gi, g) in gens.iter().enumerate() {
                if !start.iter().all(|s| g.points.contains(s)) || g.points.iter().any(|p| blocked.contains(p)) {
                    continue;
                }
                // Each start corner is replaced by the end corner on its β-circle.
                let mut target = g.points.clone();
                for (&s, &e) in start.iter().zip(&end) {
                    let k = target.iter().position(|&p| p == s).unwrap();
                    target[k] = e;
                }
                let target = target
                    .iter()
                    .map(|&p| {
                        let b = &self.points[p].beta;
                        let k = self.beta.iter().position(|x| x == b).unwrap();
                        (k, p)
                    })
                    .fold(vec![usize::MAX; self.beta.len()], |mut acc, (k, p)| {
                        acc[k] = p;
                        acc
                    });
                if let Some(&t) = index.get(target.as_slice()) {
                    out.push(DiagramFlow { domain: di, source: gi, target: t });
                }
            }
        }
        out
    }

    fn formal_generator(&self, layout: &Layout, g: &DiagramGenerator) -> Generator {
        let n = layout.power;
        let mut sigma = vec![0u8; n];
        let mut eps = vec![0i8; n];
        for &i in &g.points {
            let pt = &self.points[i];
            let c = layout.coord[&pt.alpha] as usize;
            sigma[c] = layout.beta[&pt.beta];
            eps[c] = pt.sign;
        }
        Generator::new(sigma, eps, g.arc.unwrap_or(0))
    }

    fn formal_domain(&self, layout: &Layout, d: &DomainRecord, x: &Generator) -> Option<Domain> {
        let names = self.point_index();
        let pt = |n: &String| &self.points[names[n.as_str()]];
        match d.kind {
            DomainKind::Bigon => Some(Domain::Bigon {
                coord: layout.coord[&pt(&d.start[0]).alpha],
                a: d.flags[0],
                b: d.flags[1],
            }),
            DomainKind::Rect => {
                let (c1, c2) = (pt(&d.start[0]), pt(&d.start[1]));
                Frame {
                    bottom: (layout.coord[&c1.alpha], d.flags[0]),
                    right: (layout.beta[&c2.beta], d.flags[1]),
                    top: (layout.coord[&c2.alpha], d.flags[2]),
                    left: (layout.beta[&c1.beta], d.flags[3]),
                }
                .domain_from(x)
            }
            DomainKind::Half(rho) => Some(Domain::Bordered { rho, b: d.flags[0] }),
        }
    }

    /// Formal domains of all flows, checked against the formal end generators.
    fn formalize(&self, layout: &Layout, gens: &[DiagramGenerator], flows: &[DiagramFlow]) -> Result<Vec<Domain>, DiagramError> {
        flows
            .iter()
            .map(|f| {
                let x = self.formal_generator(layout, &gens[f.source]);
                let y = self.formal_generator(layout, &gens[f.target]);
                let d = &self.domains[f.domain];
                let dom = self
                    .formal_domain(layout, d, &x)
                    .ok_or_else(|| invariant("domain matches its corner signs", format!("domain {}", f.domain + 1)))?;
                match formal_flows::end_generator(layout.flavor, &x, &dom) {
                    Some(e) if e == y => Ok(dom),
                    _ => Err(invariant(
                        "domain flags agree with the point signs",
                        format!("domain {} from {}", f.domain + 1, self.label(&gens[f.source])),
                    )),
                }
            })
            .collect()
    }

    pub fn label(&self, g: &DiagramGenerator) -> String {
        g.points.iter().map(|&i| self.points[i].name.as_str()).collect::<Vec<_>>().join("+")
    }

    fn flip_beta(&mut self, beta: &str) {
        let on: HashSet<String> = self.points.iter().filter(|p| p.beta == beta).map(|p| p.name.clone()).collect();
        for p in &mut self.points {
            if p.beta == beta {
                p.sign = -p.sign;
            }
        }
        for d in &mut self.domains {
            match d.kind {
                DomainKind::Bigon => {
                    if on.contains(&d.start[0]) {
                        d.flags[1] = -d.flags[1];
                    }
                }
                DomainKind::Half(_) => {
                    if on.contains(&d.start[0]) {
                        d.flags[0] = -d.flags[0];
                    }
                }
                DomainKind::Rect => {
                    if on.contains(&d.start[1]) {
                        d.flags[1] = -d.flags[1];
                    }
                    if on.contains(&d.start[0]) {
                        d.flags[3] = -d.flags[3];
                    }
                }
            }
        }
    }
}

fn sign_char(s: i8) -> char {
    if s > 0 {
        '+'
    } else {
        '-'
    }
}

impl BorderedDiagram {
    pub fn power(&self) -> usize {
        self.surface.beta.len()
    }

    pub fn flavor(&self) -> Flavor {
        match self.reading {
            Reading::Left => Flavor::Left(self.p),
            Reading::Right => Flavor::Right(self.p),
        }
    }

    pub fn validate(&self) -> Result<(), DiagramError> {
        self.surface.check(true)?;
        let names = self.surface.point_index();
        for (i, d) in self.surface.domains.iter().enumerate() {
            if let DomainKind::Half(rho) = d.kind {
                let arc = |n: &String| arc_index(&self.surface.points[names[n.as_str()]].alpha);
                let (from, to) = match self.reading {
                    Reading::Left => (rho.right(), rho.left()),
                    Reading::Right => (rho.left(), rho.right()),
                };
                if arc(&d.start[0]) != Some(from) || arc(&d.end[0]) != Some(to) {
                    return Err(invariant(
                        "half-strip tag matches its arcs",
                        format!("domain {} tagged {} in the {} reading", i + 1, rho.tag(), self.reading),
                    ));
                }
            }
        }
        let gens = self.generators();
        if gens.is_empty() {
            return Err(invariant("some generator exists", self.name.clone()));
        }
        let flows = self.surface.flows(&gens);
        self.surface.formalize(&Layout::new(&self.surface, self.flavor()), &gens, &flows)?;
        Ok(())
    }

    pub fn generators(&self) -> Vec<DiagramGenerator> {
        self.surface.generators(true)
    }

    /// All flows; half-strips tagged ρ12 or ρ23 are included and can be
    /// filtered with [`BorderedDiagram::is_type_d_usable`].
    pub fn flows(&self) -> Vec<DiagramFlow> {
        self.surface.flows(&self.generators())
    }

    pub fn label(&self, g: &DiagramGenerator) -> String {
        self.surface.label(g)
    }

    pub fn rho(&self, f: &DiagramFlow) -> Option<Basis> {
        match self.surface.domains[f.domain].kind {
            DomainKind::Half(r) => Some(r),
            _ => None,
        }
    }

    /// Whether the flow may appear in a type D structure.
    pub fn is_type_d_usable(&self, f: &DiagramFlow) -> bool {
        !matches!(self.rho(f), Some(Basis::Rho12 | Basis::Rho23))
    }

    pub fn formal_generator(&self, g: &DiagramGenerator) -> Generator {
        self.surface.formal_generator(&Layout::new(&self.surface, self.flavor()), g)
    }

    /// Formal domain of each flow, in the diagram's own reading.
    pub fn formal_domains(&self, gens: &[DiagramGenerator], flows: &[DiagramFlow]) -> Result<Vec<Domain>, DiagramError> {
        self.surface.formalize(&Layout::new(&self.surface, self.flavor()), gens, flows)
    }

    /// The same diagram seen from the other side of its boundary.
    pub fn reread(&self) -> BorderedDiagram {
        let mut surface = self.surface.clone();
        for p in &mut surface.points {
            if let Some(i) = arc_index(&p.alpha) {
                p.alpha = ARCS[2 - i as usize].to_string();
            }
        }
        for d in &mut surface.domains {
            if let DomainKind::Half(r) = d.kind {
                d.kind = DomainKind::Half(r.reversed());
            }
        }
        BorderedDiagram { name: self.name.clone(), p: self.p.swapped(), reading: self.reading.other(), surface }
    }

    pub fn in_reading(&self, reading: Reading) -> BorderedDiagram {
        if reading == self.reading {
            self.clone()
        } else {
            self.reread()
        }
    }

    /// Reverse the orientation of a β-circle.
    pub fn with_flipped_beta(&self, beta: &str) -> Result<BorderedDiagram, DiagramError> {
        if !self.surface.beta.iter().any(|b| b == beta) {
            return Err(invariant("unknown β-circle", beta.to_string()));
        }
        let mut out = self.clone();
        out.surface.flip_beta(beta);
        Ok(out)
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        writeln!(s, "[diagram]").unwrap();
        writeln!(s, "name = {}", self.name).unwrap();
        writeln!(s, "sign-sequence = {}", self.p).unwrap();
        writeln!(s, "reading = {}", self.reading).unwrap();
        write_surface(&mut s, &self.surface);
        s
    }

    pub fn parse(text: &str) -> Result<BorderedDiagram, DiagramError> {
        let raw = parse_sections(text)?;
        let header = |key: &str| -> Result<(usize, &str), DiagramError> {
            raw.header
                .iter()
                .find(|(_, k, _)| k == key)
                .map(|(l, _, v)| (*l, v.as_str()))
                .ok_or(DiagramError::Syntax { line: 0, msg: format!("missing header key {key:?}") })
        };
        let (_, name) = header("name")?;
        let (pl, p) = header("sign-sequence")?;
        let p = SignSequence::from_str(p).map_err(|e| DiagramError::Syntax { line: pl, msg: e.to_string() })?;
        let (rl, reading) = header("reading")?;
        let reading = match reading {
            "left" => Reading::Left,
            "right" => Reading::Right,
            other => return Err(DiagramError::Syntax { line: rl, msg: format!("reading must be left or right, not {other:?}") }),
        };
        let d = BorderedDiagram { name: name.to_string(), p, reading, surface: raw.surface(true)? };
        d.validate()?;
        Ok(d)
    }
}

impl ClosedDiagram {
    pub fn power(&self) -> usize {
        self.surface.beta.len()
    }

    pub fn validate(&self) -> Result<(), DiagramError> {
        self.surface.check(false)?;
        let gens = self.generators();
        let flows = self.surface.flows(&gens);
        self.surface.formalize(&Layout::new(&self.surface, Flavor::Closed), &gens, &flows)?;
        Ok(())
    }

    pub fn generators(&self) -> Vec<DiagramGenerator> {
        self.surface.generators(false)
    }

    pub fn flows(&self) -> Vec<DiagramFlow> {
        self.surface.flows(&self.generators())
    }

    pub fn label(&self, g: &DiagramGenerator) -> String {
        self.surface.label(g)
    }

    pub fn formal_generator(&self, g: &DiagramGenerator) -> Generator {
        self.surface.formal_generator(&Layout::new(&self.surface, Flavor::Closed), g)
    }

    pub fn formal_domains(&self, gens: &[DiagramGenerator], flows: &[DiagramFlow]) -> Result<Vec<Domain>, DiagramError> {
        self.surface.formalize(&Layout::new(&self.surface, Flavor::Closed), gens, flows)
    }

    pub fn parse(text: &str) -> Result<ClosedDiagram, DiagramError> {
        let raw = parse_sections(text)?;
        if let Some((l, k, _)) = raw.header.iter().find(|(_, k, _)| k == "sign-sequence" || k == "reading") {
            return Err(DiagramError::Syntax { line: *l, msg: format!("closed diagrams have no {k}") });
        }
        let name = raw
            .header
            .iter()
            .find(|(_, k, _)| k == "name")
            .map(|(_, _, v)| v.clone())
            .ok_or(DiagramError::Syntax { line: 0, msg: "missing header key \"name\"".into() })?;
        let d = ClosedDiagram { name, surface: raw.surface(false)? };
        d.validate()?;
        Ok(d)
    }

    /// Reorder the curves; both lists must be permutations of the current ones.
    pub fn with_order(&self, alpha: &[&str], beta: &[&str]) -> Result<ClosedDiagram, DiagramError> {
        let same = |new: &[&str], old: &[String]| {
            let mut a: Vec<&str> = new.to_vec();
            let mut b: Vec<&str> = old.iter().map(String::as_str).collect();
            a.sort_unstable();
            b.sort_unstable();
            a == b
        };
        if !same(alpha, &self.surface.alpha) || !same(beta, &self.surface.beta) {
            return Err(invariant("reordering is a permutation of the curves", self.name.clone()));
        }
        let mut out = self.clone();
        out.surface.alpha = alpha.iter().map(|s| s.to_string()).collect();
        out.surface.beta = beta.iter().map(|s| s.to_string()).collect();
        Ok(out)
    }

    pub fn with_flipped_beta(&self, beta: &str) -> Result<ClosedDiagram, DiagramError> {
        if !self.surface.beta.iter().any(|b| b == beta) {
            return Err(invariant("unknown β-circle", beta.to_string()));
        }
        let mut out = self.clone();
        out.surface.flip_beta(beta);
        Ok(out)
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        writeln!(s, "[diagram]").unwrap();
        writeln!(s, "name = {}", self.name).unwrap();
        write_surface(&mut s, &self.surface);
        s
    }
}

fn write_surface(s: &mut String, surface: &Surface) {
    writeln!(s, "alpha = {}", surface.alpha.join(" ")).unwrap();
    writeln!(s, "beta = {}", surface.beta.join(" ")).unwrap();
    writeln!(s, "[points]").unwrap();
    for p in &surface.points {
        writeln!(s, "{} {} {} {}", p.name, p.alpha, p.beta, sign_char(p.sign)).unwrap();
    }
    writeln!(s, "[domains]").unwrap();
    for d in &surface.domains {
        let flags: Vec<String> = d.flags.iter().map(|&f| sign_char(f).to_string()).collect();
        let head = match d.kind {
            DomainKind::Bigon => format!("bigon {}>{}", d.start[0], d.end[0]),
            DomainKind::Rect => format!("rect {}>{}", d.start.join(","), d.end.join(",")),
            DomainKind::Half(r) => format!("half {}>{} rho={}", d.start[0], d.end[0], r.tag()),
        };
        writeln!(s, "{head} blocked={} flags={}", d.blocked.join(","), flags.join(",")).unwrap();
    }
}

struct RawSections {
    header: Vec<(usize, String, String)>,
    points: Vec<(usize, String)>,
    domains: Vec<(usize, String)>,
}

fn parse_sections(text: &str) -> Result<RawSections, DiagramError> {
    let mut raw = RawSections { header: Vec::new(), points: Vec::new(), domains: Vec::new() };
    let mut section = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            section = Some(match line {
                "[diagram]" => 0,
                "[points]" => 1,
                "[domains]" => 2,
                other => return Err(DiagramError::Syntax { line: lineno, msg: format!("unknown section {other}") }),
            });
            continue;
        }
        match section {
            Some(0) => {
                let (k, v) = line
                    .split_once('=')
                    .ok_or(DiagramError::Syntax { line: lineno, msg: "expected key = value".into() })?;
                raw.header.push((lineno, k.trim().to_string(), v.trim().to_string()));
            }
            Some(1) => raw.points.push((lineno, line.to_string())),
            Some(2) => raw.domains.push((lineno, line.to_string())),
            _ => return Err(DiagramError::Syntax { line: lineno, msg: "content before [diagram]".into() }),
        }
    }
    Ok(raw)
}

fn parse_sign(tok: &str, line: usize) -> Result<i8, DiagramError> {
    match tok {
        "+" | "+1" => Ok(1),
        "-" | "-1" => Ok(-1),
        other => Err(DiagramError::Syntax { line, msg: format!("expected a sign, found {other:?}") }),
    }
}

fn names(list: &str) -> Vec<String> {
    list.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect()
}

impl RawSections {
    fn surface(&self, bordered: bool) -> Result<Surface, DiagramError> {
        let list = |key: &str| -> Vec<String> {
            self.header
                .iter()
                .find(|(_, k, _)| k == key)
                .map(|(_, _, v)| v.split_whitespace().map(str::to_string).collect())
                .unwrap_or_default()
        };
        let alpha = list("alpha");
        let beta = list("beta");
        let known = ["name", "sign-sequence", "reading", "alpha", "beta"];
        if let Some((l, k, _)) = self.header.iter().find(|(_, k, _)| !known.contains(&k.as_str())) {
            return Err(DiagramError::Syntax { line: *l, msg: format!("unknown header key {k:?}") });
        }
        let mut points = Vec::new();
        for (line, text) in &self.points {
            let toks: Vec<&str> = text.split_whitespace().collect();
            let [name, a, b, sign] = toks[..] else {
                return Err(DiagramError::Syntax { line: *line, msg: "point lines are `name alpha beta sign`".into() });
            };
            points.push(Point { name: name.into(), alpha: a.into(), beta: b.into(), sign: parse_sign(sign, *line)? });
        }
        let mut domains = Vec::new();
        for (line, text) in &self.domains {
            domains.push(parse_domain(text, *line, bordered)?);
        }
        Ok(Surface { alpha, beta, points, domains })
    }
}

fn parse_domain(text: &str, line: usize, bordered: bool) -> Result<DomainRecord, DiagramError> {
    let err = |msg: String| DiagramError::Syntax { line, msg };
    let mut toks = text.split_whitespace();
    let kind = toks.next().ok_or_else(|| err("empty domain line".into()))?;
    let corners = toks.next().ok_or_else(|| err("missing corners".into()))?;
    let (start, end) = corners.split_once('>').ok_or_else(|| err("corners are `start>end`".into()))?;
    let mut rho = None;
    let mut blocked = Vec::new();
    let mut flags = None;
    for t in toks {
        let (k, v) = t.split_once('=').ok_or_else(|| err(format!("expected key=value, found {t:?}")))?;
        match k {
            "rho" => rho = Some(Basis::from_tag(v).ok_or_else(|| err(format!("unknown rho tag {v:?}")))?),
            "blocked" => blocked = names(v),
            "flags" => {
                flags = Some(v.split(',').map(|f| parse_sign(f, line)).collect::<Result<Vec<_>, _>>()?);
            }
            other => return Err(err(format!("unknown domain field {other:?}"))),
        }
    }
    let kind = match (kind, rho) {
        ("bigon", None) => DomainKind::Bigon,
        ("rect", None) => DomainKind::Rect,
        ("half", Some(r)) if bordered => DomainKind::Half(r),
        ("half", None) => return Err(err("half-strips need rho=".into())),
        ("half", Some(_)) => return Err(err("half-strips only occur in bordered diagrams".into())),
        (k, _) => return Err(err(format!("unknown domain kind {k:?}"))),
    };
    Ok(DomainRecord {
        kind,
        start: names(start),
        end: names(end),
        blocked,
        flags: flags.ok_or_else(|| err("missing flags=".into()))?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    Hinf,
    Hm1,
    H0,
}

impl Builtin {
    pub const ALL: [Builtin; 3] = [Builtin::Hinf, Builtin::Hm1, Builtin::H0];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Hinf => "Hinf",
            Builtin::Hm1 => "Hm1",
            Builtin::H0 => "H0",
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = DiagramError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| DiagramError::UnknownBuiltin(s.to_string()))
    }
}

/// Source text of a built-in in the left reading. The single β-circle is
/// oriented so that every half-strip except the ρ1 strip of Hm1 has β-edge
/// bit +1, and bigons take the orientation of their α-arc as α-edge bit.
/// The ρ23 strip of Hinf and the ρ12 strip of H0 are the unions φ3 ∪ φ2 and
/// φ6 ∪ φ7; type D structures skip them, type A structures need them.
pub fn builtin_source(which: Builtin, p: SignSequence) -> String {
    let [p1, p2] = p.0;
    let c = sign_char;
    let (points, domains) = match which {
        Builtin::Hinf => (
            format!("r a1 b1 {}\ns a2 b1 {}\nt a2 b1 {}\n", c(-p1), c(-p2), c(p2)),
            format!(
                "bigon s>t blocked= flags={},+\nhalf r>t rho=2 blocked= flags=+\nhalf s>r rho=3 blocked= flags=+\nhalf s>t rho=23 blocked= flags=+\n",
                c(p2)
            ),
        ),
        Builtin::Hm1 => (
            format!("a a2 b1 {}\nb a1 b1 {}\n", c(-p2), c(-p1)),
            "half a>b rho=3 blocked= flags=+\nhalf a>b rho=1 blocked= flags=-\n".to_string(),
        ),
        Builtin::H0 => (
            format!("n a2 b1 {}\np a1 b1 {}\nq a1 b1 {}\n", c(p2), c(-p1), c(p1)),
            format!(
                "half p>n rho=2 blocked= flags=+\nhalf n>q rho=1 blocked= flags=+\nbigon p>q blocked= flags={},+\nhalf p>q rho=12 blocked= flags=+\n",
                c(p1)
            ),
        ),
    };
    format!(
        "[diagram]\nname = {}\nsign-sequence = {}\nreading = left\nalpha = \nbeta = b1\n[points]\n{points}[domains]\n{domains}",
        which.name(),
        p
    )
}

/// A built-in diagram whose boundary carries `p` in the requested reading.
pub fn builtin(which: Builtin, p: SignSequence, reading: Reading) -> BorderedDiagram {
    let left_p = match reading {
        Reading::Left => p,
        Reading::Right => p.swapped(),
    };
    let d = BorderedDiagram::parse(&builtin_source(which, left_p)).expect("built-in diagrams are valid");
    d.in_reading(reading)
}

/// Glue a right-reading diagram to a left-reading one along their boundary.
///
/// Curves of the first diagram come first; the arcs close up into `g1`, `g2`
/// (the ι1 circle first) between the two sides' α-circles. Points are renamed
/// `A.x` and `D.x`.
pub fn glue(h1: &BorderedDiagram, h2: &BorderedDiagram) -> Result<ClosedDiagram, DiagramError> {
    if h1.reading != Reading::Right || h2.reading != Reading::Left {
        return Err(DiagramError::Mismatch("glue needs a right-reading and a left-reading diagram".into()));
    }
    if h1.p != h2.p {
        return Err(DiagramError::Mismatch(format!("sign sequences {} and {} differ", h1.p, h2.p)));
    }
    let p = h1.p;
    let rename_alpha = |side: &str, a: &str| match arc_index(a) {
        Some(i) => format!("g{i}"),
        None => format!("{side}.{a}"),
    };
    let mut alpha: Vec<String> = h1.surface.alpha.iter().map(|a| format!("A.{a}")).collect();
    alpha.extend(["g1".to_string(), "g2".to_string()]);
    alpha.extend(h2.surface.alpha.iter().map(|a| format!("D.{a}")));
    let beta: Vec<String> = h1
        .surface
        .beta
        .iter()
        .map(|b| format!("A.{b}"))
        .chain(h2.surface.beta.iter().map(|b| format!("D.{b}")))
        .collect();
    let mut points = Vec::new();
    for (side, h) in [("A", h1), ("D", h2)] {
        for pt in &h.surface.points {
            points.push(Point {
                name: format!("{side}.{}", pt.name),
                alpha: rename_alpha(side, &pt.alpha),
                beta: format!("{side}.{}", pt.beta),
                sign: pt.sign,
            });
        }
    }
    let prefixed = |side: &str, v: &[String]| v.iter().map(|n| format!("{side}.{n}")).collect::<Vec<_>>();
    let mut domains = Vec::new();
    for (side, h) in [("A", h1), ("D", h2)] {
        for d in &h.surface.domains {
            if matches!(d.kind, DomainKind::Half(_)) {
                continue;
            }
            domains.push(DomainRecord {
                kind: d.kind,
                start: prefixed(side, &d.start),
                end: prefixed(side, &d.end),
                blocked: prefixed(side, &d.blocked),
                flags: d.flags.clone(),
            });
        }
    }
    for da in &h1.surface.domains {
        let DomainKind::Half(ra) = da.kind else { continue };
        for dd in &h2.surface.domains {
            if dd.kind != DomainKind::Half(ra) || matches!(ra, Basis::Rho12 | Basis::Rho23) {
                continue;
            }
            let (u, v) = ra.chord().expect("half-strips carry chords");
            let (lb, lt) = (p.point_label(u), p.point_label(v));
            let mut blocked = prefixed("A", &da.blocked);
            blocked.extend(prefixed("D", &dd.blocked));
            domains.push(DomainRecord {
                kind: DomainKind::Rect,
                start: vec![format!("A.{}", da.start[0]), format!("D.{}", dd.start[0])],
                end: vec![format!("D.{}", dd.end[0]), format!("A.{}", da.end[0])],
                blocked,
                flags: vec![lb, dd.flags[0], -lt, da.flags[0]],
            });
        }
    }
    let closed = ClosedDiagram {
        name: format!("{}+{}", h1.name, h2.name),
        surface: Surface { alpha, beta, points, domains },
    };
    closed.validate()?;
    Ok(closed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formal_flows::{enumerate, union_flows, union_generators, PairFlow};

    #[test]
    fn builtins_have_the_expected_shape() {
        for p in SignSequence::ALL {
            for (which, gens, flows) in [(Builtin::Hinf, 3, 4), (Builtin::Hm1, 2, 2), (Builtin::H0, 3, 4)] {
                for reading in [Reading::Left, Reading::Right] {
                    let d = builtin(which, p, reading);
                    assert_eq!(d.p, p);
                    d.validate().unwrap();
                    assert_eq!(d.generators().len(), gens);
                    assert_eq!(d.flows().len(), flows);
                }
            }
        }
        let h = builtin(Builtin::Hinf, SignSequence::plus_plus(), Reading::Left);
        let gens = h.generators();
        let labels: Vec<String> = gens.iter().map(|g| h.label(g)).collect();
        assert_eq!(labels, ["r", "s", "t"]);
        let usable: Vec<(String, Option<Basis>, String)> = h
            .flows()
            .iter()
            .filter(|f| h.is_type_d_usable(f))
            .map(|f| (h.label(&gens[f.source]), h.rho(f), h.label(&gens[f.target])))
            .collect();
        assert_eq!(
            usable,
            [
                ("s".to_string(), None, "t".to_string()),
                ("r".to_string(), Some(Basis::Rho2), "t".to_string()),
                ("s".to_string(), Some(Basis::Rho3), "r".to_string()),
            ]
        );
    }

    #[test]
    fn round_trip() {
        for which in Builtin::ALL {
            for p in SignSequence::ALL {
                for reading in [Reading::Left, Reading::Right] {
                    let d = builtin(which, p, reading);
                    let text = d.serialize();
                    let back = BorderedDiagram::parse(&text).unwrap();
                    assert_eq!(back, d);
                    assert_eq!(back.serialize(), text);
                }
            }
        }
    }

    #[test]
    fn inconsistent_tag_is_rejected() {
        let text = builtin_source(Builtin::Hm1, SignSequence::plus_plus()).replace("rho=3", "rho=2");
        let err = BorderedDiagram::parse(&text).unwrap_err();
        assert!(matches!(err, DiagramError::Invariant { rule: "half-strip tag matches its arcs", .. }), "{err}");
        let text = builtin_source(Builtin::Hm1, SignSequence::plus_plus()).replace("flags=-", "flags=+");
        assert!(BorderedDiagram::parse(&text).is_err());
        let text = builtin_source(Builtin::Hm1, SignSequence::plus_plus()).replace("half a>b", "half a-b");
        assert!(matches!(BorderedDiagram::parse(&text), Err(DiagramError::Syntax { line: 11, .. })));
    }

    #[test]
    fn blocked_points_remove_flows() {
        let text = "[diagram]\nname = blocked\nalpha = c1 c2 c3\nbeta = b1 b2 b3\n[points]\n\
                    x c1 b1 +\nv c2 b1 -\nz c2 b1 +\ny c2 b2 +\nu c1 b2 -\nw c2 b2 -\n\
                    o c3 b3 +\no2 c3 b3 -\n[domains]\n\
                    rect x,y>u,v blocked= flags=+,-,+,-\nrect x,w>u,z blocked=o flags=+,-,-,-\n";
        let raw = parse_sections(text).unwrap();
        let closed = ClosedDiagram { name: "blocked".into(), surface: raw.surface(false).unwrap() };
        closed.validate().unwrap();
        let gens = closed.generators();
        let flows = closed.flows();
        let from: Vec<String> = flows.iter().map(|f| closed.label(&gens[f.source])).collect();
        assert_eq!(from, ["x+y+o", "x+y+o2", "x+w+o2"]);
    }

    #[test]
    fn gluing_commutes_with_formal_union() {
        for p in SignSequence::ALL {
            for a in Builtin::ALL {
                for d in Builtin::ALL {
                    let h1 = builtin(a, p, Reading::Right);
                    let h2 = builtin(d, p, Reading::Left);
                    let closed = glue(&h1, &h2).unwrap();
                    let (ru, lu, cu) = (
                        enumerate(1, h1.flavor()).unwrap(),
                        enumerate(1, h2.flavor()).unwrap(),
                        enumerate(2, Flavor::Closed).unwrap(),
                    );
                    let (g1, g2, gc) = (h1.generators(), h2.generators(), closed.generators());
                    let expected = g1.iter().flat_map(|x| g2.iter().map(move |y| (x, y))).filter(|(x, y)| x.arc != y.arc).count();
                    assert_eq!(gc.len(), expected);
                    let formal_c: Vec<Generator> = gc.iter().map(|g| closed.formal_generator(g)).collect();
                    for x in &g1 {
                        for y in &g2 {
                            if x.arc == y.arc {
                                continue;
                            }
                            let u = union_generators(&h1.formal_generator(x), &h2.formal_generator(y)).unwrap();
                            assert_eq!(formal_c.iter().filter(|c| **c == u).count(), 1);
                        }
                    }
                    let fc = closed.flows();
                    let dc = closed.formal_domains(&gc, &fc).unwrap();
                    let mut glued_rects = 0;
                    let (f1, f2) = (h1.flows(), h2.flows());
                    let (d1, d2) = (h1.formal_domains(&g1, &f1).unwrap(), h2.formal_domains(&g2, &f2).unwrap());
                    for (i, fa) in f1.iter().enumerate() {
                        for (j, fd) in f2.iter().enumerate() {
                            let (Some(ra), Some(rd)) = (h1.rho(fa), h2.rho(fd)) else { continue };
                            if ra != rd || !h2.is_type_d_usable(fd) {
                                continue;
                            }
                            let ia = ru.lookup(ru.generator_index(&h1.formal_generator(&g1[fa.source])).unwrap(), d1[i]).unwrap();
                            let id = lu.lookup(lu.generator_index(&h2.formal_generator(&g2[fd.source])).unwrap(), d2[j]).unwrap();
                            let union = union_flows(&ru, PairFlow::Flow(ia), &lu, PairFlow::Flow(id), &cu).unwrap();
                            let start = union_generators(&h1.formal_generator(&g1[fa.source]), &h2.formal_generator(&g2[fd.source])).unwrap();
                            fc.iter()
                                .zip(&dc)
                                .position(|(f, dom)| formal_c[f.source] == start && cu.lookup(cu.generator_index(&start).unwrap(), *dom) == Some(union))
                                .expect("glued flow present");
                            glued_rects += 1;
                        }
                    }
                    let rect_flows = fc.iter().zip(&dc).filter(|(_, d)| matches!(d, Domain::Rect { .. })).count();
                    assert_eq!(rect_flows, glued_rects, "{a} {d} {p}");
                }
            }
        }
    }

    #[test]
    fn closed_round_trip() {
        let p = SignSequence([1, -1]);
        let closed = glue(&builtin(Builtin::Hinf, p, Reading::Right), &builtin(Builtin::H0, p, Reading::Left)).unwrap();
        let text = closed.serialize();
        assert_eq!(ClosedDiagram::parse(&text).unwrap(), closed);
        assert!(ClosedDiagram::parse(&builtin_source(Builtin::Hm1, p)).is_err());
    }

    #[test]
    fn flipping_beta_twice_is_identity() {
        let d = builtin(Builtin::H0, SignSequence([1, -1]), Reading::Left);
        let f = d.with_flipped_beta("b1").unwrap();
        f.validate().unwrap();
        assert_ne!(f, d);
        assert_eq!(f.with_flipped_beta("b1").unwrap(), d);
        assert_eq!(d.reread().reread(), d);
    }
}
