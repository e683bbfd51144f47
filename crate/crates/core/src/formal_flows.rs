//! Formal generators and formal flows, closed and bordered, together with the
//! relation detectors the sign-assignment axioms quantify over.
//!
//! Coordinates and β labels are stored zero-based. A right bordered generator
//! keeps its occupied arc in the last coordinate, a left one in the first.
//!
//! Rectangles are pinned by a frame: bottom α edge, right β edge, top α edge,
//! left β edge, each with a bit that is +1 when the arc's orientation agrees
//! with the counterclockwise boundary orientation of the region. Start corners
//! are bottom-left and top-right, end corners bottom-right and top-left.

use std::collections::HashMap;
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use crate::torus_algebra::{Basis, SignSequence};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlowError {
    #[error("power must be at least 1")]
    ZeroPower,
    #[error("flow {0} is not a rectangle")]
    NotRectangle(u32),
    #[error("coordinate {0} is a moving coordinate")]
    MovingCoordinate(usize),
    #[error("incompatible pair: {0}")]
    Incompatible(String),
    #[error("generator is not in this universe")]
    UnknownGenerator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flavor {
    Closed,
    Right(SignSequence),
    Left(SignSequence),
}

impl Flavor {
    pub fn sign_sequence(self) -> Option<SignSequence> {
        match self {
            Flavor::Closed => None,
            Flavor::Right(p) | Flavor::Left(p) => Some(p),
        }
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flavor::Closed => f.write_str("closed"),
            Flavor::Right(p) => write!(f, "right {p}"),
            Flavor::Left(p) => write!(f, "left {p}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Generator {
    /// β label occupied at each α coordinate.
    pub sigma: Vec<u8>,
    pub eps: Vec<i8>,
    /// Occupied arc for bordered generators, 0 for closed ones.
    pub s: u8,
}

impl Generator {
    pub fn new(sigma: Vec<u8>, eps: Vec<i8>, s: u8) -> Self {
        debug_assert_eq!(sigma.len(), eps.len());
        Generator { sigma, eps, s }
    }

    pub fn identity(n: usize, s: u8) -> Self {
        Generator::new((0..n as u8).collect(), vec![1; n], s)
    }

    pub fn power(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma_sign(&self) -> i8 {
        let n = self.sigma.len();
        let mut seen = vec![false; n];
        let mut sign = 1;
        for i in 0..n {
            if seen[i] {
                continue;
            }
            let mut j = i;
            let mut len = 0;
            while !seen[j] {
                seen[j] = true;
                j = self.sigma[j] as usize;
                len += 1;
            }
            if len % 2 == 0 {
                sign = -sign;
            }
        }
        sign
    }

    pub fn eps_product(&self) -> i8 {
        self.eps.iter().product()
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.sigma {
            write!(f, "{}", b + 1)?;
        }
        f.write_str("|")?;
        for e in &self.eps {
            f.write_str(if *e > 0 { "+" } else { "-" })?;
        }
        if self.s != 0 {
            write!(f, "|{}", self.s)?;
        }
        Ok(())
    }
}

/// `(-1)^{gr(x)} = sign(σ) ∏ ε` for right generators.
pub fn grading_right(x: &Generator) -> u8 {
    u8::from(x.sigma_sign() * x.eps_product() < 0)
}

/// Closed generators: `sign(σ) ∏ ε`.
pub fn grading_closed(x: &Generator) -> u8 {
    u8::from(x.sigma_sign() * x.eps_product() < 0)
}

/// Left generators carry the extra factor `(-1)^{s(x)}`.
pub fn grading_left(x: &Generator) -> u8 {
    let s = if x.s == 1 { -1 } else { 1 };
    u8::from(x.sigma_sign() * x.eps_product() * s < 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    Bigon { coord: u8, a: i8, b: i8 },
    /// Canonical frame with bottom α_p, top α_q and p < q.
    Rect { p: u8, q: u8, a1: i8, b1: i8, a2: i8, b2: i8 },
    Bordered { rho: Basis, b: i8 },
}

impl Domain {
    pub fn moving(&self, flavor: Flavor, n: usize) -> Vec<usize> {
        match *self {
            Domain::Bigon { coord, .. } => vec![coord as usize],
            Domain::Rect { p, q, .. } => vec![p as usize, q as usize],
            Domain::Bordered { .. } => match flavor {
                Flavor::Left(_) => vec![0],
                _ => vec![n - 1],
            },
        }
    }

    pub fn is_bordered(&self) -> bool {
        matches!(self, Domain::Bordered { .. })
    }

    pub fn rho(&self) -> Option<Basis> {
        match *self {
            Domain::Bordered { rho, .. } => Some(rho),
            _ => None,
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

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Domain::Bigon { coord, a, b } => {
                write!(f, "bigon[{}]({}{})", coord + 1, sign_char(a), sign_char(b))
            }
            Domain::Rect { p, q, a1, b1, a2, b2 } => write!(
                f,
                "rect[{},{}]({}{}{}{})",
                p + 1,
                q + 1,
                sign_char(a1),
                sign_char(b1),
                sign_char(a2),
                sign_char(b2)
            ),
            Domain::Bordered { rho, b } => write!(f, "{}({})", rho, sign_char(b)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Flow {
    pub start: u32,
    pub end: u32,
    pub domain: Domain,
}

/// A rectangle drawn with explicit edges. α entries hold coordinates, β
/// entries hold β labels, each paired with its edge bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Frame {
    pub bottom: (u8, i8),
    pub right: (u8, i8),
    pub top: (u8, i8),
    pub left: (u8, i8),
}

impl Frame {
    pub fn rotated(self) -> Frame {
        Frame {
            bottom: self.top,
            right: self.left,
            top: self.bottom,
            left: self.right,
        }
    }

    /// The frame of a canonical rectangle leaving `x`.
    pub fn of(domain: &Domain, x: &Generator) -> Option<Frame> {
        match *domain {
            Domain::Rect { p, q, a1, b1, a2, b2 } => Some(Frame {
                bottom: (p, a1),
                right: (x.sigma[q as usize], b1),
                top: (q, a2),
                left: (x.sigma[p as usize], b2),
            }),
            _ => None,
        }
    }

    /// Rotate if needed so that the bottom edge lies on coordinate `c`.
    pub fn with_bottom(self, c: u8) -> Frame {
        if self.bottom.0 == c {
            self
        } else {
            debug_assert_eq!(self.top.0, c);
            self.rotated()
        }
    }

    /// Canonical rectangle for this frame, if its start corners and their
    /// signs are those of `x`.
    pub fn domain_from(self, x: &Generator) -> Option<Domain> {
        let (bc, fb) = self.bottom;
        let (tc, ft) = self.top;
        let (rb, fr) = self.right;
        let (lb, fl) = self.left;
        if bc == tc || rb == lb {
            return None;
        }
        if x.sigma[bc as usize] != lb || x.sigma[tc as usize] != rb {
            return None;
        }
        if x.eps[bc as usize] != -fb * fl || x.eps[tc as usize] != -ft * fr {
            return None;
        }
        let f = if bc < tc { self } else { self.rotated() };
        Some(Domain::Rect {
            p: f.bottom.0,
            q: f.top.0,
            a1: f.bottom.1,
            b1: f.right.1,
            a2: f.top.1,
            b2: f.left.1,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DegenerationKind {
    Alpha,
    Beta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Degeneration {
    pub first: u32,
    pub second: u32,
    pub kind: DegenerationKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SquareKind {
    /// Moving coordinates of the two flows are disjoint.
    Disjoint,
    /// Two rectangles sharing one coordinate.
    LShape,
    /// Rectangle and bigon, the bigon running past the rectangle's far corner.
    RectBigon,
    /// Rectangle and bigon, an arc of the bigon cutting across the rectangle.
    RectBigonCut,
    /// Bordered flow commuting with an internal flow on other coordinates.
    BorderedDisjoint,
    /// Bordered flow and internal flow sharing the occupied arc.
    BorderedShared,
}

impl SquareKind {
    pub fn is_bordered(self) -> bool {
        matches!(self, SquareKind::BorderedDisjoint | SquareKind::BorderedShared)
    }

    /// Squares whose sign rule is checked after solving rather than imposed.
    pub fn is_further(self) -> bool {
        self == SquareKind::RectBigonCut
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Square {
    pub first: (u32, u32),
    pub second: (u32, u32),
    pub kind: SquareKind,
}

impl Square {
    pub fn flows(&self) -> [u32; 4] {
        [self.first.0, self.first.1, self.second.0, self.second.1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triangle {
    pub first: u32,
    pub second: u32,
    pub composite: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SquareClass {
    NotSquare,
    InternalSquare,
    BorderedSquare,
    FurtherSquare,
}

/// Every formal generator and flow of one flavor at one power.
pub struct Universe {
    pub flavor: Flavor,
    pub power: usize,
    pub generators: Vec<Generator>,
    pub flows: Vec<Flow>,
    gen_index: HashMap<Generator, u32>,
    flow_index: HashMap<(u32, Domain), u32>,
    outgoing: Vec<Vec<u32>>,
}

/// Boundary point labels (bottom, top) of a bordered flow of type `rho`.
fn chord_labels(rho: Basis, p: SignSequence) -> (i8, i8) {
    let (u, v) = rho.chord().expect("bordered flows carry rho elements");
    (p.point_label(u), p.point_label(v))
}

/// End generator of the flow with this domain leaving `g`, if the domain's
/// start corners and signs match `g`.
pub fn end_generator(flavor: Flavor, g: &Generator, domain: &Domain) -> Option<Generator> {
    let n = g.power();
    let mut y = g.clone();
    match *domain {
        Domain::Bigon { coord, a, b } => {
            let i = coord as usize;
            if i >= n || g.eps[i] != -a * b {
                return None;
            }
            y.eps[i] = a * b;
        }
        Domain::Rect { p, q, a1, b1, a2, b2 } => {
            let (p, q) = (p as usize, q as usize);
            if p >= q || q >= n || g.eps[p] != -a1 * b2 || g.eps[q] != -a2 * b1 {
                return None;
            }
            y.sigma.swap(p, q);
            y.eps[p] = a1 * b1;
            y.eps[q] = a2 * b2;
        }
        Domain::Bordered { rho, b } => {
            let (lb, lt) = chord_labels(rho, flavor.sign_sequence()?);
            match flavor {
                Flavor::Right(_) => {
                    if rho.left() != g.s || g.eps[n - 1] != -lb * b {
                        return None;
                    }
                    y.s = rho.right();
                    y.eps[n - 1] = -lt * b;
                }
                Flavor::Left(_) => {
                    if rho.right() != g.s || g.eps[0] != lt * b {
                        return None;
                    }
                    y.s = rho.left();
                    y.eps[0] = lb * b;
                }
                Flavor::Closed => return None,
            }
        }
    }
    Some(y)
}

pub fn enumerate(n: usize, flavor: Flavor) -> Result<Universe, FlowError> {
    if n == 0 {
        return Err(FlowError::ZeroPower);
    }
    let arcs: &[u8] = match flavor {
        Flavor::Closed => &[0],
        _ => &[1, 2],
    };
    let mut generators = Vec::new();
    for &s in arcs {
        for sigma in (0..n as u8).permutations(n) {
            for signs in 0..(1u32 << n) {
                let eps = (0..n)
                    .map(|i| if signs >> (n - 1 - i) & 1 == 0 { 1 } else { -1 })
                    .collect();
                generators.push(Generator::new(sigma.clone(), eps, s));
            }
        }
    }
    let gen_index: HashMap<Generator, u32> = generators
        .iter()
        .enumerate()
        .map(|(i, g)| (g.clone(), i as u32))
        .collect();
    let mut u = Universe {
        flavor,
        power: n,
        outgoing: vec![Vec::new(); generators.len()],
        generators,
        flows: Vec::new(),
        gen_index,
        flow_index: HashMap::new(),
    };
    for x in 0..u.generators.len() as u32 {
        for d in u.domains_from(x) {
            let end = u.end_of(x, &d).expect("enumerated domains apply");
            let idx = u.flows.len() as u32;
            u.flows.push(Flow { start: x, end, domain: d });
            u.flow_index.insert((x, d), idx);
            u.outgoing[x as usize].push(idx);
        }
    }
    Ok(u)
}

impl Universe {
    pub fn generator_index(&self, g: &Generator) -> Option<u32> {
        self.gen_index.get(g).copied()
    }

    pub fn generator(&self, i: u32) -> &Generator {
        &self.generators[i as usize]
    }

    pub fn flow(&self, i: u32) -> &Flow {
        &self.flows[i as usize]
    }

    pub fn outgoing(&self, x: u32) -> &[u32] {
        &self.outgoing[x as usize]
    }

    pub fn lookup(&self, start: u32, domain: Domain) -> Option<u32> {
        self.flow_index.get(&(start, domain)).copied()
    }

    pub fn moving(&self, f: u32) -> Vec<usize> {
        self.flow(f).domain.moving(self.flavor, self.power)
    }

    pub fn is_internal(&self, f: u32) -> bool {
        !self.flow(f).domain.is_bordered()
    }

    /// Coordinate holding the occupied arc, if bordered.
    pub fn arc_coordinate(&self) -> Option<usize> {
        match self.flavor {
            Flavor::Closed => None,
            Flavor::Right(_) => Some(self.power - 1),
            Flavor::Left(_) => Some(0),
        }
    }

    fn domains_from(&self, x: u32) -> Vec<Domain> {
        let g = &self.generators[x as usize];
        let n = self.power;
        let mut out = Vec::new();
        for i in 0..n {
            for a in [1i8, -1] {
                out.push(Domain::Bigon { coord: i as u8, a, b: -g.eps[i] * a });
            }
        }
        for p in 0..n {
            for q in p + 1..n {
                for a1 in [1i8, -1] {
                    for a2 in [1i8, -1] {
                        out.push(Domain::Rect {
                            p: p as u8,
                            q: q as u8,
                            a1,
                            b1: -g.eps[q] * a2,
                            a2,
                            b2: -g.eps[p] * a1,
                        });
                    }
                }
            }
        }
        match self.flavor {
            Flavor::Closed => {}
            Flavor::Right(pp) => {
                for rho in Basis::RHOS {
                    if rho.left() == g.s {
                        let (lb, _) = chord_labels(rho, pp);
                        out.push(Domain::Bordered { rho, b: -lb * g.eps[n - 1] });
                    }
                }
            }
            Flavor::Left(pp) => {
                for rho in Basis::RHOS {
                    if rho.right() == g.s {
                        let (_, lt) = chord_labels(rho, pp);
                        out.push(Domain::Bordered { rho, b: lt * g.eps[0] });
                    }
                }
            }
        }
        out
    }

    /// End generator of `domain` applied at `x`, if the domain leaves `x`.
    pub fn end_of(&self, x: u32, domain: &Domain) -> Option<u32> {
        let y = end_generator(self.flavor, &self.generators[x as usize], domain)?;
        self.generator_index(&y)
    }

    fn lookup_frame(&self, frame: Frame, start: u32) -> Option<u32> {
        let d = frame.domain_from(self.generator(start))?;
        self.lookup(start, d)
    }

    fn bigon(&self, start: u32, coord: u8, a: i8, b: i8) -> Option<u32> {
        self.lookup(start, Domain::Bigon { coord, a, b })
    }

    /// The flow glued to `f` along its β edges (`Alpha`) or α edges (`Beta`).
    pub fn degeneration_partner(&self, f: u32, kind: DegenerationKind) -> Option<u32> {
        let fl = self.flow(f);
        let d = match (fl.domain, kind) {
            (Domain::Bigon { coord, a, b }, DegenerationKind::Alpha) => {
                Domain::Bigon { coord, a, b: -b }
            }
            (Domain::Bigon { coord, a, b }, DegenerationKind::Beta) => {
                Domain::Bigon { coord, a: -a, b }
            }
            (Domain::Rect { p, q, a1, b1, a2, b2 }, DegenerationKind::Alpha) => Domain::Rect {
                p,
                q,
                a1,
                b1: -b2,
                a2,
                b2: -b1,
            },
            (Domain::Rect { p, q, a1, b1, a2, b2 }, DegenerationKind::Beta) => Domain::Rect {
                p,
                q,
                a1: -a1,
                b1: b2,
                a2: -a2,
                b2: b1,
            },
            (Domain::Bordered { .. }, _) => return None,
        };
        let g = self.lookup(fl.end, d)?;
        debug_assert_eq!(self.flow(g).end, fl.start);
        Some(g)
    }

    pub fn is_alpha_degeneration(&self, f1: u32, f2: u32) -> bool {
        self.degeneration_partner(f1, DegenerationKind::Alpha) == Some(f2)
    }

    pub fn is_beta_degeneration(&self, f1: u32, f2: u32) -> bool {
        self.degeneration_partner(f1, DegenerationKind::Beta) == Some(f2)
    }

    /// All degenerate pairs of internal flows, each listed once.
    pub fn degenerations(&self) -> Vec<Degeneration> {
        let mut out = Vec::new();
        for f in 0..self.flows.len() as u32 {
            for kind in [DegenerationKind::Alpha, DegenerationKind::Beta] {
                if let Some(g) = self.degeneration_partner(f, kind) {
                    if f < g {
                        out.push(Degeneration { first: f, second: g, kind });
                    }
                }
            }
        }
        out
    }

    /// Partner pairs of an internal composite `(f1, f2)`.
    pub fn internal_partners(&self, f1: u32, f2: u32) -> Vec<((u32, u32), SquareKind)> {
        let a = *self.flow(f1);
        let b = *self.flow(f2);
        assert_eq!(a.end, b.start, "flows are not composable");
        let x = a.start;
        let m1 = a.domain.moving(self.flavor, self.power);
        let m2 = b.domain.moving(self.flavor, self.power);
        let shared: Vec<usize> = m1.iter().copied().filter(|c| m2.contains(c)).collect();
        let mut out = Vec::new();
        let check = |first: u32, second: u32| {
            assert_eq!(self.flow(first).end, self.flow(second).start);
            assert_eq!(
                self.flow(second).end,
                b.end,
                "square partner of {} then {} ends elsewhere",
                self.describe(f1),
                self.describe(f2)
            );
            (first, second)
        };
        if shared.is_empty() {
            let f3 = self.lookup(x, b.domain).expect("disjoint domain applies at start");
            let f4 = self
                .lookup(self.flow(f3).end, a.domain)
                .expect("disjoint domain applies after");
            out.push((check(f3, f4), SquareKind::Disjoint));
            return out;
        }
        if shared.len() != 1 {
            return out;
        }
        let c = shared[0] as u8;
        let (Domain::Rect { .. }, xg) = (a.domain, self.generator(x)) else {
            return out;
        };
        let f = Frame::of(&a.domain, xg).unwrap().with_bottom(c);
        let (j, ft) = f.top;
        let (t, fr) = f.right;
        let (s, fl) = f.left;
        let fb = f.bottom.1;
        let frame = |bottom, right, top, left| Frame { bottom, right, top, left };
        let pair = |first: Option<u32>, second: &dyn Fn(u32) -> Option<u32>| {
            let first = first.expect("partner first flow exists");
            let second = second(self.flow(first).end).expect("partner second flow exists");
            check(first, second)
        };
        match b.domain {
            Domain::Bigon { a: ba, b: bb, .. } => {
                if bb == -fr {
                    assert_eq!(ba, fb);
                    let long = pair(self.bigon(x, j, -ft, -fr), &|y| {
                        self.lookup_frame(frame((c, fb), (t, -fr), (j, ft), (s, fl)), y)
                    });
                    let cut = pair(self.bigon(x, c, fb, fl), &|y| {
                        self.lookup_frame(frame((c, -fb), (t, fr), (j, ft), (s, fl)), y)
                    });
                    out.push((long, SquareKind::RectBigon));
                    out.push((cut, SquareKind::RectBigonCut));
                } else {
                    assert_eq!((ba, bb), (-fb, fr));
                    let long = pair(self.bigon(x, c, -fb, -fl), &|y| {
                        self.lookup_frame(frame((c, -fb), (t, fr), (j, ft), (s, fl)), y)
                    });
                    let cut = pair(self.bigon(x, j, ft, fr), &|y| {
                        self.lookup_frame(frame((c, fb), (t, -fr), (j, ft), (s, fl)), y)
                    });
                    out.push((long, SquareKind::RectBigon));
                    out.push((cut, SquareKind::RectBigonCut));
                }
            }
            Domain::Rect { .. } => {
                let g0 = Frame::of(&b.domain, self.generator(b.start)).unwrap().with_bottom(c);
                assert_eq!(g0.left.0, t);
                if g0.left.1 == -fr {
                    assert_eq!(g0.bottom.1, fb);
                    let (u, gr) = g0.right;
                    let (k, gt) = g0.top;
                    let gl = g0.left.1;
                    let long = pair(
                        self.lookup_frame(frame((j, -ft), (u, gr), (k, gt), (t, gl)), x),
                        &|y| self.lookup_frame(frame((c, fb), (u, gr), (j, ft), (s, fl)), y),
                    );
                    let short = pair(
                        self.lookup_frame(frame((c, fb), (u, gr), (k, gt), (s, fl)), x),
                        &|y| self.lookup_frame(frame((k, -gt), (t, fr), (j, ft), (s, fl)), y),
                    );
                    out.push((long, SquareKind::LShape));
                    out.push((short, SquareKind::LShape));
                } else {
                    let g = g0.rotated();
                    assert_eq!((g.right.1, g.top.1), (fr, -fb));
                    let (k, gb) = g.bottom;
                    let (u, gl) = g.left;
                    let long = pair(
                        self.lookup_frame(frame((k, gb), (s, -fl), (c, -fb), (u, gl)), x),
                        &|y| self.lookup_frame(frame((k, gb), (t, fr), (j, ft), (s, fl)), y),
                    );
                    let short = pair(
                        self.lookup_frame(frame((k, gb), (t, fr), (j, ft), (u, gl)), x),
                        &|y| self.lookup_frame(frame((c, fb), (u, -gl), (j, ft), (s, fl)), y),
                    );
                    out.push((long, SquareKind::LShape));
                    out.push((short, SquareKind::LShape));
                }
            }
            Domain::Bordered { .. } => {}
        }
        out
    }

    /// Squares made of internal flows only, each listed once.
    pub fn internal_squares(&self) -> Vec<Square> {
        let mut seen: HashMap<((u32, u32), (u32, u32)), SquareKind> = HashMap::new();
        let mut out = Vec::new();
        for f1 in 0..self.flows.len() as u32 {
            if !self.is_internal(f1) {
                continue;
            }
            for &f2 in self.outgoing(self.flow(f1).end) {
                if !self.is_internal(f2) {
                    continue;
                }
                for (other, kind) in self.internal_partners(f1, f2) {
                    push_square(&mut seen, &mut out, (f1, f2), other, kind);
                }
            }
        }
        out
    }

    /// Bordered squares of a right universe.
    pub fn right_bordered_squares(&self) -> Vec<Square> {
        let Flavor::Right(_) = self.flavor else {
            panic!("right bordered squares need a right universe");
        };
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for psi in 0..self.flows.len() as u32 {
            if self.is_internal(psi) {
                continue;
            }
            let y = self.flow(psi).start;
            for &phi in self.outgoing(self.flow(psi).end) {
                if let Some((other, kind)) = self.bordered_partner_after(psi, phi) {
                    push_square(&mut seen, &mut out, (psi, phi), other, kind);
                }
            }
            for phi in self.incoming_internal(y) {
                if let Some((other, kind)) = self.bordered_partner_before(phi, psi) {
                    push_square(&mut seen, &mut out, (phi, psi), other, kind);
                }
            }
        }
        out
    }

    fn incoming_internal(&self, y: u32) -> Vec<u32> {
        // Internal flows into y are the degeneration partners of flows out of y.
        let mut v: Vec<u32> = self
            .outgoing(y)
            .iter()
            .filter(|&&f| self.is_internal(f))
            .filter_map(|&f| self.degeneration_partner(f, DegenerationKind::Alpha))
            .collect();
        v.sort_unstable();
        v
    }

    fn right_bits(&self, psi: u32) -> (Basis, i8, i8, i8) {
        let Domain::Bordered { rho, b } = self.flow(psi).domain else {
            panic!("expected a bordered flow");
        };
        let (lb, lt) = chord_labels(rho, self.flavor.sign_sequence().unwrap());
        (rho, lb, -lt, b)
    }

    /// Partner of `(psi, phi)` with `psi` bordered and `phi` internal.
    pub fn bordered_partner_after(&self, psi: u32, phi: u32) -> Option<((u32, u32), SquareKind)> {
        if self.is_internal(psi) || !self.is_internal(phi) {
            return None;
        }
        let n = self.power - 1;
        let x = self.flow(psi).start;
        let z = self.flow(phi).end;
        let (rho, a_b, a_t, b) = self.right_bits(psi);
        let bordered = |start: u32, bit: i8| self.lookup(start, Domain::Bordered { rho, b: bit });
        let dphi = self.flow(phi).domain;
        let finish = |first: Option<u32>, second: &dyn Fn(u32) -> Option<u32>, kind| {
            let first = first.expect("partner first flow exists");
            let second = second(self.flow(first).end).expect("partner second flow exists");
            assert_eq!(self.flow(second).end, z, "bordered square ends elsewhere");
            Some(((first, second), kind))
        };
        if !self.moving(phi).contains(&n) {
            return finish(self.lookup(x, dphi), &|y| bordered(y, b), SquareKind::BorderedDisjoint);
        }
        let nc = n as u8;
        let frame = |bottom, right, top, left| Frame { bottom, right, top, left };
        match dphi {
            Domain::Bigon { a: pa, b: pb, .. } => {
                if pa == -a_t {
                    assert_eq!(pb, b);
                    finish(self.bigon(x, nc, a_b, b), &|y| bordered(y, -b), SquareKind::BorderedShared)
                } else {
                    assert_eq!((pa, pb), (a_t, -b));
                    finish(self.bigon(x, nc, -a_b, -b), &|y| bordered(y, -b), SquareKind::BorderedShared)
                }
            }
            Domain::Rect { .. } => {
                let y = self.flow(phi).start;
                let f = Frame::of(&dphi, self.generator(y)).unwrap().with_bottom(nc);
                let t = f.left.0;
                if f.bottom.1 == -a_t {
                    assert_eq!(f.left.1, b);
                    let (u, fr) = f.right;
                    let (k, ft) = f.top;
                    finish(
                        self.lookup_frame(frame((nc, a_b), (u, fr), (k, ft), (t, b)), x),
                        &|y| bordered(y, -fr),
                        SquareKind::BorderedShared,
                    )
                } else {
                    let g = f.rotated();
                    assert_eq!((g.right.1, g.top.1), (-b, a_t));
                    let (k, gb) = g.bottom;
                    let (u, gl) = g.left;
                    finish(
                        self.lookup_frame(frame((k, gb), (t, -b), (nc, -a_b), (u, gl)), x),
                        &|y| bordered(y, gl),
                        SquareKind::BorderedShared,
                    )
                }
            }
            Domain::Bordered { .. } => None,
        }
    }

    /// Partner of `(phi, psi)` with `phi` internal and `psi` bordered.
    pub fn bordered_partner_before(&self, phi: u32, psi: u32) -> Option<((u32, u32), SquareKind)> {
        if !self.is_internal(phi) || self.is_internal(psi) {
            return None;
        }
        let n = self.power - 1;
        let x = self.flow(phi).start;
        let z = self.flow(psi).end;
        let (rho, a_b, a_t, b) = self.right_bits(psi);
        let dphi = self.flow(phi).domain;
        let finish = |first: Option<u32>, second: &dyn Fn(u32) -> Option<u32>, kind| {
            let first = first.expect("partner first flow exists");
            let second = second(self.flow(first).end).expect("partner second flow exists");
            assert_eq!(self.flow(second).end, z, "bordered square ends elsewhere");
            Some(((first, second), kind))
        };
        let bordered = |bit: i8| self.lookup(x, Domain::Bordered { rho, b: bit });
        if !self.moving(phi).contains(&n) {
            return finish(bordered(b), &|y| self.lookup(y, dphi), SquareKind::BorderedDisjoint);
        }
        let nc = n as u8;
        let frame = |bottom, right, top, left| Frame { bottom, right, top, left };
        match dphi {
            Domain::Bigon { a: pa, b: pb, .. } => {
                if pb == -b {
                    assert_eq!(pa, a_b);
                    finish(bordered(-b), &|y| self.bigon(y, nc, -a_t, -b), SquareKind::BorderedShared)
                } else {
                    assert_eq!((pa, pb), (-a_b, b));
                    finish(bordered(-b), &|y| self.bigon(y, nc, a_t, b), SquareKind::BorderedShared)
                }
            }
            Domain::Rect { .. } => {
                let f = Frame::of(&dphi, self.generator(x)).unwrap().with_bottom(nc);
                let (t, fr) = f.right;
                if fr == -b {
                    assert_eq!(f.bottom.1, a_b);
                    let (u, fl) = f.left;
                    let (k, ft) = f.top;
                    finish(
                        bordered(fl),
                        &|y| self.lookup_frame(frame((nc, -a_t), (t, -b), (k, ft), (u, fl)), y),
                        SquareKind::BorderedShared,
                    )
                } else {
                    let g = f.rotated();
                    assert_eq!((g.top.1, g.left.1), (-a_b, b));
                    let (k, gb) = g.bottom;
                    let (u, gr) = g.right;
                    finish(
                        bordered(-gr),
                        &|y| self.lookup_frame(frame((k, gb), (u, gr), (nc, a_t), (t, b)), y),
                        SquareKind::BorderedShared,
                    )
                }
            }
            Domain::Bordered { .. } => None,
        }
    }

    /// Bordered squares of a left universe, obtained by reflecting the right
    /// universe over the negated sign sequence.
    pub fn left_bordered_squares(&self) -> Vec<Square> {
        let Flavor::Left(p) = self.flavor else {
            panic!("left bordered squares need a left universe");
        };
        let right = enumerate(self.power, Flavor::Right(p.negated())).unwrap();
        let map = mirror_map(&right, self);
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for sq in right.right_bordered_squares() {
            let m = |f: u32| map[f as usize];
            push_square(
                &mut seen,
                &mut out,
                (m(sq.first.1), m(sq.first.0)),
                (m(sq.second.1), m(sq.second.0)),
                sq.kind,
            );
        }
        out
    }

    pub fn bordered_squares(&self) -> Vec<Square> {
        match self.flavor {
            Flavor::Closed => Vec::new(),
            Flavor::Right(_) => self.right_bordered_squares(),
            Flavor::Left(_) => self.left_bordered_squares(),
        }
    }

    /// Triangles of right bordered flows.
    pub fn triangles(&self) -> Vec<Triangle> {
        let mut out = Vec::new();
        for f1 in 0..self.flows.len() as u32 {
            let Domain::Bordered { rho: r1, b: b1 } = self.flow(f1).domain else {
                continue;
            };
            for &f2 in self.outgoing(self.flow(f1).end) {
                let Domain::Bordered { rho: r2, b: b2 } = self.flow(f2).domain else {
                    continue;
                };
                let Some(r3) = r1.mul(r2) else { continue };
                if b1 != b2 {
                    continue;
                }
                if let Some(f3) = self.lookup(self.flow(f1).start, Domain::Bordered { rho: r3, b: b1 }) {
                    if self.flow(f3).end == self.flow(f2).end {
                        out.push(Triangle { first: f1, second: f2, composite: f3 });
                    }
                }
            }
        }
        out
    }

    pub fn is_bordered_triangle(&self, pair: (u32, u32), f3: u32) -> bool {
        let (f1, f2) = pair;
        let (a, b, c) = (self.flow(f1), self.flow(f2), self.flow(f3));
        let (Domain::Bordered { rho: r1, b: b1 }, Domain::Bordered { rho: r2, b: b2 }, Domain::Bordered { rho: r3, b: b3 }) =
            (a.domain, b.domain, c.domain)
        else {
            return false;
        };
        a.end == b.start
            && c.start == a.start
            && c.end == b.end
            && b1 == b2
            && b2 == b3
            && r1.mul(r2) == Some(r3)
    }

    /// Classify four flows as a square, if they form one.
    pub fn is_square(&self, p1: (u32, u32), p2: (u32, u32)) -> SquareClass {
        let composable = |(a, b): (u32, u32)| self.flow(a).end == self.flow(b).start;
        if p1 == p2
            || !composable(p1)
            || !composable(p2)
            || self.flow(p1.0).start != self.flow(p2.0).start
            || self.flow(p1.1).end != self.flow(p2.1).end
        {
            return SquareClass::NotSquare;
        }
        let internal = self.is_internal(p1.0) && self.is_internal(p1.1);
        let partners: Vec<((u32, u32), SquareKind)> = if internal {
            if !(self.is_internal(p2.0) && self.is_internal(p2.1)) {
                return SquareClass::NotSquare;
            }
            let mut v = self.internal_partners(p1.0, p1.1);
            v.extend(
                self.internal_partners(p2.0, p2.1)
                    .into_iter()
                    .filter(|(other, _)| *other == p1)
                    .map(|(_, k)| (p2, k)),
            );
            v
        } else if let Flavor::Right(_) = self.flavor {
            self.bordered_partner_after(p1.0, p1.1)
                .or_else(|| self.bordered_partner_before(p1.0, p1.1))
                .into_iter()
                .collect()
        } else if let Flavor::Left(_) = self.flavor {
            return self
                .left_bordered_squares()
                .iter()
                .find(|s| (s.first == p1 && s.second == p2) || (s.first == p2 && s.second == p1))
                .map(|_| SquareClass::BorderedSquare)
                .unwrap_or(SquareClass::NotSquare);
        } else {
            Vec::new()
        };
        match partners.iter().find(|(other, _)| *other == p2) {
            None => SquareClass::NotSquare,
            Some((_, kind)) if kind.is_bordered() => SquareClass::BorderedSquare,
            Some((_, kind)) if kind.is_further() => SquareClass::FurtherSquare,
            Some(_) => SquareClass::InternalSquare,
        }
    }

    /// The rectangle with the same domain whose sign profile is flipped at a
    /// non-moving coordinate `i`.
    pub fn simple_flip(&self, f: u32, i: usize) -> Result<u32, FlowError> {
        let fl = self.flow(f);
        if !matches!(fl.domain, Domain::Rect { .. }) {
            return Err(FlowError::NotRectangle(f));
        }
        if self.moving(f).contains(&i) {
            return Err(FlowError::MovingCoordinate(i));
        }
        let mut g = self.generator(fl.start).clone();
        g.eps[i] = -g.eps[i];
        let x = self.generator_index(&g).ok_or(FlowError::UnknownGenerator)?;
        self.lookup(x, fl.domain).ok_or(FlowError::UnknownGenerator)
    }

    pub fn describe(&self, f: u32) -> String {
        let fl = self.flow(f);
        format!(
            "{} {} -> {}",
            fl.domain,
            self.generator(fl.start),
            self.generator(fl.end)
        )
    }

    /// One flow per line in canonical form.
    pub fn dump(&self) -> String {
        let mut s = format!(
            "universe {} power {}: {} generators, {} flows\n",
            self.flavor,
            self.power,
            self.generators.len(),
            self.flows.len()
        );
        for f in 0..self.flows.len() as u32 {
            s.push_str(&self.describe(f));
            s.push('\n');
        }
        s
    }
}

fn push_square(
    seen: &mut HashMap<((u32, u32), (u32, u32)), SquareKind>,
    out: &mut Vec<Square>,
    p1: (u32, u32),
    p2: (u32, u32),
    kind: SquareKind,
) {
    assert_ne!(p1, p2, "a square needs two distinct pairs");
    let key = if p1 < p2 { (p1, p2) } else { (p2, p1) };
    match seen.get(&key) {
        Some(k) => assert_eq!(*k, kind, "square found with two different kinds"),
        None => {
            seen.insert(key, kind);
            out.push(Square { first: key.0, second: key.1, kind });
        }
    }
}

/// Reflect a right generator over `-P` to the corresponding left generator
/// over `P`: the arc coordinate moves to the front and signs flip.
pub fn mirror_generator(g: &Generator) -> Generator {
    let n = g.power();
    let mut sigma = Vec::with_capacity(n);
    let mut eps = Vec::with_capacity(n);
    sigma.push(g.sigma[n - 1]);
    eps.push(-g.eps[n - 1]);
    for k in 0..n - 1 {
        sigma.push(g.sigma[k]);
        eps.push(-g.eps[k]);
    }
    Generator::new(sigma, eps, g.s)
}

/// For each flow of a right universe over `-P`, the reflected flow of the left
/// universe over `P`. Reflection reverses flows and negates every edge bit.
pub fn mirror_map(right: &Universe, left: &Universe) -> Vec<u32> {
    let n = right.power;
    let coord = |c: u8| if c as usize == n - 1 { 0 } else { c + 1 };
    right
        .flows
        .iter()
        .map(|fl| {
            let start = left
                .generator_index(&mirror_generator(right.generator(fl.end)))
                .expect("mirror generator exists");
            let d = match fl.domain {
                Domain::Bigon { coord: c, a, b } => Domain::Bigon { coord: coord(c), a: -a, b: -b },
                Domain::Rect { .. } => {
                    let f = Frame::of(&fl.domain, right.generator(fl.start)).unwrap();
                    Frame {
                        bottom: (coord(f.bottom.0), -f.bottom.1),
                        right: (f.left.0, -f.left.1),
                        top: (coord(f.top.0), -f.top.1),
                        left: (f.right.0, -f.right.1),
                    }
                    .domain_from(left.generator(start))
                    .expect("mirrored rectangle starts at the mirrored end")
                }
                Domain::Bordered { rho, b } => Domain::Bordered { rho, b: -b },
            };
            let g = left.lookup(start, d).expect("mirrored flow exists");
            debug_assert_eq!(
                left.flow(g).end,
                left.generator_index(&mirror_generator(right.generator(fl.start))).unwrap()
            );
            g
        })
        .collect()
}

/// A side of a left-right pair: a flow, or the identity flow at a generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairFlow {
    Identity(u32),
    Flow(u32),
}

/// Closed coordinate of the arc `s` when gluing at right power `m`.
fn arc_slot(m: usize, s: u8) -> u8 {
    (m - 1) as u8 + (s - 1)
}

/// Union of a right generator of power m and a left generator of power n.
pub fn union_generators(right: &Generator, left: &Generator) -> Result<Generator, FlowError> {
    let (m, n) = (right.power(), left.power());
    if right.s == 0 || left.s == 0 || right.s == left.s {
        return Err(FlowError::Incompatible(format!(
            "occupied arcs {} and {} must differ",
            right.s, left.s
        )));
    }
    let mut sigma = vec![0u8; m + n];
    let mut eps = vec![0i8; m + n];
    for k in 0..m - 1 {
        sigma[k] = right.sigma[k];
        eps[k] = right.eps[k];
    }
    let rs = arc_slot(m, right.s) as usize;
    sigma[rs] = right.sigma[m - 1];
    eps[rs] = right.eps[m - 1];
    let ls = arc_slot(m, left.s) as usize;
    sigma[ls] = m as u8 + left.sigma[0];
    eps[ls] = left.eps[0];
    for k in 1..n {
        sigma[m + k] = m as u8 + left.sigma[k];
        eps[m + k] = left.eps[k];
    }
    Ok(Generator::new(sigma, eps, 0))
}

fn shift_domain(d: Domain, map: impl Fn(u8) -> u8) -> Domain {
    match d {
        Domain::Bigon { coord, a, b } => Domain::Bigon { coord: map(coord), a, b },
        Domain::Rect { p, q, a1, b1, a2, b2 } => {
            let (p2, q2) = (map(p), map(q));
            debug_assert!(p2 < q2);
            Domain::Rect { p: p2, q: q2, a1, b1, a2, b2 }
        }
        Domain::Bordered { .. } => unreachable!("bordered domains do not shift"),
    }
}

/// The closed flow obtained by gluing a right and a left flow (or identity).
pub fn union_flows(
    ru: &Universe,
    rf: PairFlow,
    lu: &Universe,
    lf: PairFlow,
    closed: &Universe,
) -> Result<u32, FlowError> {
    let m = ru.power;
    let rstart = match rf {
        PairFlow::Identity(x) => x,
        PairFlow::Flow(f) => ru.flow(f).start,
    };
    let lstart = match lf {
        PairFlow::Identity(x) => x,
        PairFlow::Flow(f) => lu.flow(f).start,
    };
    let rg = ru.generator(rstart);
    let lg = lu.generator(lstart);
    let start_gen = union_generators(rg, lg)?;
    let start = closed
        .generator_index(&start_gen)
        .ok_or(FlowError::UnknownGenerator)?;
    let rmap = |c: u8| if c as usize == m - 1 { arc_slot(m, rg.s) } else { c };
    let lmap = |c: u8| if c == 0 { arc_slot(m, lg.s) } else { m as u8 + c };
    let domain = match (rf, lf) {
        (PairFlow::Flow(f), PairFlow::Identity(_)) if ru.is_internal(f) => {
            shift_domain(ru.flow(f).domain, rmap)
        }
        (PairFlow::Identity(_), PairFlow::Flow(g)) if lu.is_internal(g) => {
            shift_domain(lu.flow(g).domain, lmap)
        }
        (PairFlow::Flow(f), PairFlow::Flow(g)) => {
            let (Domain::Bordered { rho: r1, b: b1 }, Domain::Bordered { rho: r2, b: b2 }) =
                (ru.flow(f).domain, lu.flow(g).domain)
            else {
                return Err(FlowError::Incompatible("one internal flow needs an identity partner".into()));
            };
            if r1 != r2 {
                return Err(FlowError::Incompatible(format!("types {r1} and {r2} differ")));
            }
            let p = ru.flavor.sign_sequence().unwrap();
            if lu.flavor.sign_sequence() != Some(p) {
                return Err(FlowError::Incompatible("sign sequences differ".into()));
            }
            let (lb, lt) = chord_labels(r1, p);
            let frame = Frame {
                bottom: (arc_slot(m, r1.left()), lb),
                right: (m as u8 + lg.sigma[0], b2),
                top: (arc_slot(m, r1.right()), -lt),
                left: (rg.sigma[m - 1], b1),
            };
            frame
                .domain_from(&start_gen)
                .ok_or_else(|| FlowError::Incompatible("glued rectangle is inconsistent".into()))?
        }
        _ => return Err(FlowError::Incompatible("pair has no union".into())),
    };
    closed
        .lookup(start, domain)
        .ok_or_else(|| FlowError::Incompatible("union flow is not in the closed universe".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_counts() {
        assert_eq!(enumerate(1, Flavor::Closed).unwrap().generators.len(), 2);
        let r = enumerate(1, Flavor::Right(SignSequence::plus_plus())).unwrap();
        assert_eq!(r.generators.len(), 4);
        assert_eq!(enumerate(0, Flavor::Closed).err(), Some(FlowError::ZeroPower));
    }

    #[test]
    fn gradings() {
        let id = Generator::identity(2, 1);
        assert_eq!(grading_right(&id), 0);
        assert_eq!(grading_right(&Generator::new(vec![1, 0], vec![1, 1], 1)), 1);
        assert_eq!(grading_left(&Generator::identity(1, 1)), 1);
        assert_eq!(grading_left(&Generator::identity(1, 2)), 0);
    }

    #[test]
    fn rect_is_not_its_own_degeneration() {
        let u = enumerate(2, Flavor::Closed).unwrap();
        for f in 0..u.flows.len() as u32 {
            assert!(!u.is_beta_degeneration(f, f));
            assert!(!u.is_alpha_degeneration(f, f));
        }
    }
}
