//! Sign assignments on formal flows: solving the closed system, the bordered
//! constructions of type A and D, gauge equivalence and classification.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::formal_flows::{
    self, enumerate, union_flows, DegenerationKind, Domain, Flavor, FlowError,
    Generator, PairFlow, Square, Universe,
};
use crate::gf2::{self, Equation};
use crate::torus_algebra::{grading_for_sequence, Basis, SignSequence};

#[derive(Debug, Error)]
pub enum SignError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("sign system has no solution (equation {0})")]
    Unsolvable(usize),
    #[error("assignment violates {0}")]
    Violation(Violation),
    #[error("assignment is for {found}, expected {expected}")]
    WrongFlavor { expected: String, found: String },
    #[error("internal part is not gauge equivalent to the reference")]
    InternalMismatch,
    #[error("no type D class is compatible; the annulus rule asks for second coordinate {0:+}")]
    NoCompatiblePartner(i8),
}

/// A ±1 value for every flow of a universe, indexed like `Universe::flows`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignAssignment {
    pub flavor: Flavor,
    pub power: usize,
    pub values: Vec<i8>,
}

impl SignAssignment {
    pub fn get(&self, f: u32) -> i8 {
        self.values[f as usize]
    }

    fn check_universe(&self, u: &Universe) -> Result<(), SignError> {
        if self.flavor != u.flavor || self.power != u.power || self.values.len() != u.flows.len() {
            return Err(SignError::WrongFlavor {
                expected: format!("{} power {}", u.flavor, u.power),
                found: format!("{} power {}", self.flavor, self.power),
            });
        }
        Ok(())
    }
}

/// A ±1 value per generator.
pub type GaugeMap = Vec<i8>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Degeneration { kind: DegenerationKind, flows: (u32, u32) },
    Square { square: Square },
    Triangle { flows: [u32; 3] },
    Pinned { flow: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Degeneration { kind, flows } => {
                write!(f, "{kind:?} degeneration on flows {} and {}", flows.0, flows.1)
            }
            Violation::Square { square } => {
                write!(f, "{:?} square on flows {:?}", square.kind, square.flows())
            }
            Violation::Triangle { flows } => write!(f, "triangle on flows {flows:?}"),
            Violation::Pinned { flow } => write!(f, "pinned value of flow {flow}"),
        }
    }
}

fn bit(s: i8) -> bool {
    s < 0
}

fn sign(b: bool) -> i8 {
    if b {
        -1
    } else {
        1
    }
}

/// Which of the sign rules a check covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rules {
    /// Degenerations and squares other than the further ones.
    Basic,
    All,
}

fn degeneration_target(kind: DegenerationKind) -> i8 {
    match kind {
        DegenerationKind::Alpha => 1,
        DegenerationKind::Beta => -1,
    }
}

/// One GF(2) equation per degeneration and internal square.
pub fn closed_equations(u: &Universe, rules: Rules) -> Vec<Equation> {
    let mut eqs: Vec<Equation> = u
        .degenerations()
        .into_iter()
        .map(|d| Equation::new(vec![d.first, d.second], bit(degeneration_target(d.kind))))
        .collect();
    for sq in u.internal_squares() {
        if rules == Rules::Basic && sq.kind.is_further() {
            continue;
        }
        eqs.push(Equation::new(sq.flows().to_vec(), true));
    }
    eqs
}

fn from_solution(u: &Universe, values: &[bool]) -> SignAssignment {
    SignAssignment {
        flavor: u.flavor,
        power: u.power,
        values: values.iter().map(|&b| sign(b)).collect(),
    }
}

/// A closed sign assignment with every free choice set to +1.
pub fn solve_closed(u: &Universe) -> Result<SignAssignment, SignError> {
    solve_closed_seeded(u, None)
}

/// A closed sign assignment with free choices drawn from `seed`.
pub fn solve_closed_seeded(u: &Universe, seed: Option<u64>) -> Result<SignAssignment, SignError> {
    let eqs = closed_equations(u, Rules::Basic);
    let sol = gf2::solve(u.flows.len(), &eqs, seed).map_err(|e| SignError::Unsolvable(e.0))?;
    Ok(from_solution(u, &sol.values))
}

/// Dimension over GF(2) of the closed solution space.
pub fn closed_solution_dimension(u: &Universe, rules: Rules) -> Result<usize, SignError> {
    let eqs = closed_equations(u, rules);
    let sol = gf2::solve(u.flows.len(), &eqs, None).map_err(|e| SignError::Unsolvable(e.0))?;
    Ok(sol.free)
}

/// Dimension of the gauge action: generators minus connected components of
/// the flow graph.
pub fn gauge_dimension(u: &Universe) -> usize {
    let n = u.generators.len();
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    for root in 0..n {
        if comp[root] != usize::MAX {
            continue;
        }
        count += 1;
        comp[root] = root;
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            for &f in u.outgoing(x as u32) {
                let y = u.flow(f).end as usize;
                if comp[y] == usize::MAX {
                    comp[y] = root;
                    queue.push_back(y);
                }
            }
        }
    }
    n - count
}

fn check_internal(u: &Universe, s: &SignAssignment, rules: Rules, out: &mut Vec<Violation>) {
    for d in u.degenerations() {
        if s.get(d.first) * s.get(d.second) != degeneration_target(d.kind) {
            out.push(Violation::Degeneration { kind: d.kind, flows: (d.first, d.second) });
        }
    }
    for sq in u.internal_squares() {
        if rules == Rules::Basic && sq.kind.is_further() {
            continue;
        }
        let p: i8 = sq.flows().iter().map(|&f| s.get(f)).product();
        if p != -1 {
            out.push(Violation::Square { square: sq });
        }
    }
}

/// Every violated closed sign rule.
pub fn verify_closed(u: &Universe, s: &SignAssignment) -> Result<Vec<Violation>, SignError> {
    s.check_universe(u)?;
    let mut out = Vec::new();
    check_internal(u, s, Rules::All, &mut out);
    Ok(out)
}


/// Instance counts per rule and the violations found.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub instances: Vec<(&'static str, usize)>,
    pub violations: Vec<Violation>,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn count(&mut self, rule: &'static str) {
        match self.instances.iter_mut().find(|(r, _)| *r == rule) {
            Some((_, c)) => *c += 1,
            None => self.instances.push((rule, 1)),
        }
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (rule, c) in &self.instances {
            writeln!(f, "{rule}: {c} instances")?;
        }
        if self.violations.is_empty() {
            writeln!(f, "no violations")
        } else {
            for v in &self.violations {
                writeln!(f, "violation: {v}")?;
            }
            Ok(())
        }
    }
}

/// Types that never occur in a type D structure.
pub fn excluded_from_type_d(rho: Basis) -> bool {
    matches!(rho, Basis::Rho12 | Basis::Rho23)
}

fn check_internal_report(u: &Universe, s: &SignAssignment, report: &mut Report) {
    for d in u.degenerations() {
        report.count(match d.kind {
            DegenerationKind::Alpha => "alpha degeneration",
            DegenerationKind::Beta => "beta degeneration",
        });
        if s.get(d.first) * s.get(d.second) != degeneration_target(d.kind) {
            report
                .violations
                .push(Violation::Degeneration { kind: d.kind, flows: (d.first, d.second) });
        }
    }
    for sq in u.internal_squares() {
        report.count(if sq.kind.is_further() { "further square" } else { "internal square" });
        let p: i8 = sq.flows().iter().map(|&f| s.get(f)).product();
        if p != -1 {
            report.violations.push(Violation::Square { square: sq });
        }
    }
}

/// Check every rule of the assignment's flavor.
pub fn verify(u: &Universe, s: &SignAssignment) -> Result<Report, SignError> {
    s.check_universe(u)?;
    let mut report = Report::default();
    check_internal_report(u, s, &mut report);
    match u.flavor {
        Flavor::Closed => {}
        Flavor::Right(_) => {
            for sq in u.right_bordered_squares() {
                report.count("bordered square");
                let p: i8 = sq.flows().iter().map(|&f| s.get(f)).product();
                if p != 1 {
                    report.violations.push(Violation::Square { square: sq });
                }
            }
            for t in u.triangles() {
                report.count("triangle");
                if s.get(t.first) * s.get(t.second) != s.get(t.composite) {
                    report
                        .violations
                        .push(Violation::Triangle { flows: [t.first, t.second, t.composite] });
                }
            }
        }
        Flavor::Left(p) => {
            let gr = grading_for_sequence(p);
            for sq in u.left_bordered_squares() {
                let rho = sq
                    .flows()
                    .iter()
                    .find_map(|&f| u.flow(f).domain.rho())
                    .expect("bordered squares contain a bordered flow");
                if !square_in_use(u, &sq) {
                    continue;
                }
                report.count("bordered square");
                let prod: i8 = sq.flows().iter().map(|&f| s.get(f)).product();
                if gr.sign(rho) as i8 * prod != -1 {
                    report.violations.push(Violation::Square { square: sq });
                }
            }
        }
    }
    Ok(report)
}

/// Right generator over `(+,+)` that `x` corresponds to after reorienting
/// the arcs whose sign is negative.
fn reorient_right(x: &Generator, p: SignSequence) -> Generator {
    let mut y = x.clone();
    let n = y.power();
    y.eps[n - 1] *= p.entry(x.s);
    y
}

fn reorient_domain(d: Domain, n: usize, p: SignSequence, s: u8) -> Domain {
    let k = p.entry(s);
    let arc = (n - 1) as u8;
    match d {
        Domain::Bigon { coord, a, b } if coord == arc => Domain::Bigon { coord, a: a * k, b },
        Domain::Rect { p: c1, q, a1, b1, a2, b2 } if q == arc => {
            Domain::Rect { p: c1, q, a1, b1, a2: a2 * k, b2 }
        }
        other => other,
    }
}

/// Closed generator obtained by adding one fixed crossing after the others.
fn embed_right(x: &Generator) -> Generator {
    let mut g = x.clone();
    g.sigma.push(x.power() as u8);
    g.eps.push(1);
    g.s = 0;
    g
}

/// Closed generator obtained by adding one fixed crossing before the others.
fn embed_left(x: &Generator) -> Generator {
    let mut sigma = vec![0u8];
    sigma.extend(x.sigma.iter().map(|b| b + 1));
    let mut eps = vec![1i8];
    eps.extend_from_slice(&x.eps);
    Generator::new(sigma, eps, 0)
}

fn shift_up(d: Domain) -> Domain {
    match d {
        Domain::Bigon { coord, a, b } => Domain::Bigon { coord: coord + 1, a, b },
        Domain::Rect { p, q, a1, b1, a2, b2 } => Domain::Rect { p: p + 1, q: q + 1, a1, b1, a2, b2 },
        other => other,
    }
}

fn closed_value(closed: &Universe, sc: &SignAssignment, g: &Generator, d: Domain) -> i8 {
    let x = closed.generator_index(g).expect("embedded generator exists");
    let f = closed.lookup(x, d).expect("embedded flow exists");
    sc.get(f)
}

/// Target of `∏ S` over a bordered square.
fn bordered_square_target(u: &Universe, sq: &Square) -> i8 {
    match u.flavor {
        Flavor::Right(_) => 1,
        Flavor::Left(p) => {
            let rho = sq.flows().iter().find_map(|&f| u.flow(f).domain.rho()).unwrap();
            -(grading_for_sequence(p).sign(rho) as i8)
        }
        Flavor::Closed => -1,
    }
}

fn square_in_use(u: &Universe, sq: &Square) -> bool {
    sq.flows().iter().all(|&f| in_type_d_use(u, f))
}

/// The bordered formulas hold for one representative of the closed gauge
/// class. Rescale the internal part by a generator gauge so that every
/// bordered square holds, then validate everything.
fn fix_internal_gauge(u: &Universe, raw: SignAssignment) -> Result<SignAssignment, SignError> {
    let mut eqs = Vec::new();
    for sq in u.bordered_squares() {
        if !square_in_use(u, &sq) {
            continue;
        }
        let mut vars = Vec::new();
        let mut prod = bordered_square_target(u, &sq);
        for f in sq.flows() {
            prod *= raw.get(f);
            if u.is_internal(f) {
                vars.push(u.flow(f).start);
                vars.push(u.flow(f).end);
            }
        }
        eqs.push(Equation::new(vars, bit(prod)));
    }
    let sol = gf2::solve(u.generators.len(), &eqs, None).map_err(|e| SignError::Unsolvable(e.0))?;
    let w: GaugeMap = sol.values.iter().map(|&b| sign(b)).collect();
    let values = u
        .flows
        .iter()
        .zip(&raw.values)
        .map(|(fl, &v)| {
            if fl.domain.is_bordered() {
                v
            } else {
                w[fl.start as usize] * v * w[fl.end as usize]
            }
        })
        .collect();
    let s = SignAssignment { values, ..raw };
    match verify(u, &s)?.violations.into_iter().next() {
        Some(v) => Err(SignError::Violation(v)),
        None => Ok(s),
    }
}

/// Type A assignment of a right universe from a closed assignment of one
/// higher power.
pub fn construct_type_a(
    u: &Universe,
    closed: &Universe,
    sc: &SignAssignment,
) -> Result<SignAssignment, SignError> {
    let Flavor::Right(p) = u.flavor else {
        return Err(SignError::WrongFlavor { expected: "right".into(), found: u.flavor.to_string() });
    };
    sc.check_universe(closed)?;
    let n = u.power;
    let values = u
        .flows
        .iter()
        .map(|fl| {
            let x = u.generator(fl.start);
            let y = u.generator(fl.end);
            let x0 = reorient_right(x, p);
            match fl.domain {
                Domain::Bordered { .. } => {
                    let y0 = reorient_right(y, p);
                    if x0.eps[n - 1] == y0.eps[n - 1] {
                        1
                    } else {
                        x0.sigma_sign() * x0.eps[n - 1]
                    }
                }
                d => closed_value(closed, sc, &embed_right(&x0), reorient_domain(d, n, p, x.s)),
            }
        })
        .collect();
    fix_internal_gauge(u, SignAssignment { flavor: u.flavor, power: u.power, values })
}

/// Type D assignment of a left universe from a closed assignment of one
/// higher power.
pub fn construct_type_d(
    u: &Universe,
    closed: &Universe,
    sc: &SignAssignment,
) -> Result<SignAssignment, SignError> {
    let Flavor::Left(_) = u.flavor else {
        return Err(SignError::WrongFlavor { expected: "left".into(), found: u.flavor.to_string() });
    };
    sc.check_universe(closed)?;
    let values = u
        .flows
        .iter()
        .map(|fl| {
            let x = u.generator(fl.start);
            match fl.domain {
                Domain::Bordered { .. } => x.sigma_sign() * x.eps_product(),
                d => closed_value(closed, sc, &embed_left(x), shift_up(d)),
            }
        })
        .collect();
    fix_internal_gauge(u, SignAssignment { flavor: u.flavor, power: u.power, values })
}

/// A bordered universe with its deterministic closed reference assignment
/// and the constructed bordered assignment built from it.
pub struct BorderedSetup {
    pub universe: Universe,
    pub closed: Universe,
    pub closed_signs: SignAssignment,
    pub constructed: SignAssignment,
}

impl BorderedSetup {
    pub fn type_a(p: SignSequence, n: usize) -> Result<Self, SignError> {
        Self::build(Flavor::Right(p), n)
    }

    pub fn type_d(p: SignSequence, n: usize) -> Result<Self, SignError> {
        Self::build(Flavor::Left(p), n)
    }

    fn build(flavor: Flavor, n: usize) -> Result<Self, SignError> {
        let universe = enumerate(n, flavor)?;
        let closed = enumerate(n + 1, Flavor::Closed)?;
        let closed_signs = solve_closed(&closed)?;
        let constructed = match flavor {
            Flavor::Right(_) => construct_type_a(&universe, &closed, &closed_signs)?,
            _ => construct_type_d(&universe, &closed, &closed_signs)?,
        };
        Ok(BorderedSetup { universe, closed, closed_signs, constructed })
    }

    pub fn classify(&self, s: &SignAssignment) -> Result<ClassLabel, SignError> {
        classify(&self.universe, s, &self.constructed)
    }

    /// The constructed assignment moved to the requested class.
    pub fn in_class(&self, target: ClassLabel) -> Result<SignAssignment, SignError> {
        retune(&self.universe, &self.constructed, &self.constructed, target)
    }
}

/// Class label: `(c1c2, c2c3)` for type A, `(c1c3, c2c123)` for type D.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ClassLabel(pub i8, pub i8);

impl ClassLabel {
    pub const ALL: [ClassLabel; 4] =
        [ClassLabel(1, 1), ClassLabel(1, -1), ClassLabel(-1, 1), ClassLabel(-1, -1)];
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = |v: i8| if v > 0 { '+' } else { '-' };
        write!(f, "({},{})", c(self.0), c(self.1))
    }
}

impl std::str::FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let p: SignSequence = s
            .trim_start_matches('(')
            .trim_end_matches(')')
            .parse()
            .map_err(|e| format!("bad class label {s:?}: {e}"))?;
        Ok(ClassLabel(p.0[0], p.0[1]))
    }
}

/// Gauge map bringing the internal part of `s` onto that of `reference`.
fn internal_normalizer(u: &Universe, s: &SignAssignment, reference: &SignAssignment) -> Result<GaugeMap, SignError> {
    let include = |f: u32| u.is_internal(f);
    gauge_solve(u, s, reference, &include).ok_or(SignError::InternalMismatch)
}

/// Find `w` with `a(φ) = w(x) b(φ) w(y)` on the included flows.
fn gauge_solve(
    u: &Universe,
    a: &SignAssignment,
    b: &SignAssignment,
    include: &dyn Fn(u32) -> bool,
) -> Option<GaugeMap> {
    let n = u.generators.len();
    let mut adj: Vec<Vec<(u32, i8)>> = vec![Vec::new(); n];
    for (f, fl) in u.flows.iter().enumerate() {
        if !include(f as u32) {
            continue;
        }
        let t = a.values[f] * b.values[f];
        adj[fl.start as usize].push((fl.end, t));
        adj[fl.end as usize].push((fl.start, t));
    }
    let mut w = vec![0i8; n];
    for root in 0..n {
        if w[root] != 0 {
            continue;
        }
        w[root] = 1;
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            for &(y, t) in &adj[x] {
                let want = w[x] * t;
                match w[y as usize] {
                    0 => {
                        w[y as usize] = want;
                        queue.push_back(y as usize);
                    }
                    v if v != want => return None,
                    _ => {}
                }
            }
        }
    }
    Some(w)
}

fn in_type_d_use(u: &Universe, f: u32) -> bool {
    !matches!(u.flavor, Flavor::Left(_))
        || u.flow(f).domain.rho().map_or(true, |r| !excluded_from_type_d(r))
}

/// A gauge map relating two assignments on the same universe, if any.
/// Flows of types absent from type D structures are ignored for left universes.
pub fn gauge_equivalent(
    u: &Universe,
    s1: &SignAssignment,
    s2: &SignAssignment,
) -> Result<Option<GaugeMap>, SignError> {
    s1.check_universe(u)?;
    s2.check_universe(u)?;
    Ok(gauge_solve(u, s1, s2, &|f| in_type_d_use(u, f)))
}

pub fn apply_gauge(u: &Universe, s: &SignAssignment, w: &GaugeMap) -> SignAssignment {
    let values = u
        .flows
        .iter()
        .zip(&s.values)
        .map(|(fl, v)| w[fl.start as usize] * v * w[fl.end as usize])
        .collect();
    SignAssignment { values, ..s.clone() }
}

/// Bordered flow of type `rho` leaving `(id, 1, s)`.
pub fn reference_flow(u: &Universe, rho: Basis, s: u8) -> Option<u32> {
    let x = u.generator_index(&Generator::identity(u.power, s))?;
    u.outgoing(x).iter().copied().find(|&f| u.flow(f).domain.rho() == Some(rho))
}

/// The reference signs `c_ρ` after normalizing the internal part.
pub fn reference_signs(
    u: &Universe,
    s: &SignAssignment,
    reference: &SignAssignment,
) -> Result<Vec<(Basis, i8)>, SignError> {
    s.check_universe(u)?;
    let w = internal_normalizer(u, s, reference)?;
    let norm = apply_gauge(u, s, &w);
    let refs: &[Basis] = match u.flavor {
        Flavor::Right(_) => &[Basis::Rho1, Basis::Rho2, Basis::Rho3],
        Flavor::Left(_) => &[Basis::Rho1, Basis::Rho2, Basis::Rho3, Basis::Rho123],
        Flavor::Closed => &[],
    };
    Ok(refs
        .iter()
        .map(|&rho| {
            let start = match u.flavor {
                Flavor::Right(_) => rho.left(),
                _ => rho.right(),
            };
            let f = reference_flow(u, rho, start).expect("reference flow exists");
            (rho, norm.get(f))
        })
        .collect())
}

/// Class label of a bordered assignment relative to the internal part of
/// `reference`.
pub fn classify(u: &Universe, s: &SignAssignment, reference: &SignAssignment) -> Result<ClassLabel, SignError> {
    let c = reference_signs(u, s, reference)?;
    let v = |rho: Basis| c.iter().find(|(r, _)| *r == rho).unwrap().1;
    match u.flavor {
        Flavor::Right(_) => Ok(ClassLabel(v(Basis::Rho1) * v(Basis::Rho2), v(Basis::Rho2) * v(Basis::Rho3))),
        Flavor::Left(_) => Ok(ClassLabel(v(Basis::Rho1) * v(Basis::Rho3), v(Basis::Rho2) * v(Basis::Rho123))),
        Flavor::Closed => Err(SignError::WrongFlavor { expected: "bordered".into(), found: "closed".into() }),
    }
}

/// Multiply every bordered flow by a factor depending only on its type.
pub fn scale_by_type(u: &Universe, s: &SignAssignment, factor: impl Fn(Basis) -> i8) -> SignAssignment {
    let values = u
        .flows
        .iter()
        .zip(&s.values)
        .map(|(fl, v)| v * fl.domain.rho().map_or(1, &factor))
        .collect();
    SignAssignment { values, ..s.clone() }
}

fn factors_from(chi1: i8, chi2: i8, chi3: i8) -> impl Fn(Basis) -> i8 {
    move |rho| match rho {
        Basis::Rho1 => chi1,
        Basis::Rho2 => chi2,
        Basis::Rho3 => chi3,
        Basis::Rho12 => chi1 * chi2,
        Basis::Rho23 => chi2 * chi3,
        Basis::Rho123 => chi1 * chi2 * chi3,
        _ => 1,
    }
}

/// Move `s` to the class `target`, keeping its internal part.
pub fn retune(
    u: &Universe,
    s: &SignAssignment,
    reference: &SignAssignment,
    target: ClassLabel,
) -> Result<SignAssignment, SignError> {
    let current = classify(u, s, reference)?;
    let (t1, t2) = (current.0 * target.0, current.1 * target.1);
    let out = match u.flavor {
        Flavor::Right(_) => scale_by_type(u, s, factors_from(t1, 1, t2)),
        _ => {
            // ρ123 gets its own factor in type D; ρ12 and ρ23 are unused there.
            let base = factors_from(t1, 1, 1);
            scale_by_type(u, s, move |rho| if rho == Basis::Rho123 { t2 } else { base(rho) })
        }
    };
    let report = verify(u, &out)?;
    if let Some(v) = report.violations.into_iter().next() {
        return Err(SignError::Violation(v));
    }
    Ok(out)
}

/// `S(ρ123 from x) S(ρ2 back to x)` around the bordered cycle based at
/// `(id, 1, s)` with `s` the start arc of ρ123.
pub fn cycle_product(u: &Universe, s: &SignAssignment) -> i8 {
    let start = match u.flavor {
        Flavor::Right(_) => Basis::Rho123.left(),
        _ => Basis::Rho123.right(),
    };
    let f = reference_flow(u, Basis::Rho123, start).expect("ρ123 reference flow exists");
    let y = u.flow(f).end;
    let g = u
        .outgoing(y)
        .iter()
        .copied()
        .find(|&g| u.flow(g).domain.rho() == Some(Basis::Rho2))
        .expect("ρ2 flow after ρ123");
    debug_assert_eq!(u.flow(g).end, u.flow(f).start);
    s.get(f) * s.get(g)
}

/// Type D class compatible with `sa`.
///
/// The cycle ρ123 then ρ2 on each side glues to an annular α-degeneration,
/// forcing `κ_D = (-1)^{|ρ2|} κ_A` for the two cycle products; that fixes the
/// second coordinate. The first coordinate is then settled by checking both
/// candidates against the closed rules, since squares mixing glued ρ3 and ρ123
/// strips also constrain it. Those squares can rule out both candidates.
pub fn compatible_partner_class(
    ua: &Universe,
    sa: &SignAssignment,
    d_setup: &BorderedSetup,
    closed: &Universe,
) -> Result<ClassLabel, SignError> {
    let second = annulus_second_coordinate(ua, sa, d_setup)?;
    for first in [1, -1] {
        let label = ClassLabel(first, second);
        let sd = d_setup.in_class(label)?;
        if compatible(ua, sa, &d_setup.universe, &sd, closed)? {
            return Ok(label);
        }
    }
    Err(SignError::NoCompatiblePartner(second))
}

/// Second type D coordinate demanded by the annular α-degeneration alone.
pub fn annulus_second_coordinate(
    ua: &Universe,
    sa: &SignAssignment,
    d_setup: &BorderedSetup,
) -> Result<i8, SignError> {
    let Flavor::Right(p) = ua.flavor else {
        return Err(SignError::WrongFlavor { expected: "right".into(), found: ua.flavor.to_string() });
    };
    let kappa_a = cycle_product(ua, sa);
    let want = grading_for_sequence(p).sign(Basis::Rho2) as i8 * kappa_a;
    for second in [1, -1] {
        let sd = d_setup.in_class(ClassLabel(1, second))?;
        if cycle_product(&d_setup.universe, &sd) == want {
            return Ok(second);
        }
    }
    unreachable!("flipping the second coordinate flips the type D cycle product")
}

/// Values of the paired function on the flows of the closed universe of
/// power `m + n` it covers.
pub fn paired_function(
    ua: &Universe,
    sa: &SignAssignment,
    ud: &Universe,
    sd: &SignAssignment,
    closed: &Universe,
) -> Result<Vec<(u32, i8)>, SignError> {
    sa.check_universe(ua)?;
    sd.check_universe(ud)?;
    let (Flavor::Right(p), Flavor::Left(q)) = (ua.flavor, ud.flavor) else {
        return Err(SignError::WrongFlavor { expected: "right and left".into(), found: format!("{} and {}", ua.flavor, ud.flavor) });
    };
    if p != q {
        return Err(FlowError::Incompatible(format!("sign sequences {p} and {q} differ")).into());
    }
    let mut out = Vec::new();
    for x1 in 0..ua.generators.len() as u32 {
        let gr = formal_flows::grading_right(ua.generator(x1));
        let koszul = if gr == 1 { -1 } else { 1 };
        for x2 in 0..ud.generators.len() as u32 {
            if ua.generator(x1).s == ud.generator(x2).s {
                continue;
            }
            for &f1 in ua.outgoing(x1) {
                if ua.is_internal(f1) {
                    let c = union_flows(ua, PairFlow::Flow(f1), ud, PairFlow::Identity(x2), closed)?;
                    out.push((c, sa.get(f1)));
                }
            }
            for &f2 in ud.outgoing(x2) {
                if ud.is_internal(f2) {
                    let c = union_flows(ua, PairFlow::Identity(x1), ud, PairFlow::Flow(f2), closed)?;
                    out.push((c, koszul * sd.get(f2)));
                } else {
                    let rho = ud.flow(f2).domain.rho().unwrap();
                    if excluded_from_type_d(rho) {
                        continue;
                    }
                    for &f1 in ua.outgoing(x1) {
                        if ua.flow(f1).domain.rho() == Some(rho) {
                            let c = union_flows(ua, PairFlow::Flow(f1), ud, PairFlow::Flow(f2), closed)?;
                            out.push((c, koszul * sa.get(f1) * sd.get(f2)));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Closed rules restricted to the domain of the paired function.
pub fn compatibility_report(
    ua: &Universe,
    sa: &SignAssignment,
    ud: &Universe,
    sd: &SignAssignment,
    closed: &Universe,
) -> Result<Report, SignError> {
    let paired = paired_function(ua, sa, ud, sd, closed)?;
    let mut value = vec![0i8; closed.flows.len()];
    for &(f, v) in &paired {
        assert_eq!(value[f as usize], 0, "union map is injective");
        value[f as usize] = v;
    }
    let mut report = Report::default();
    for d in closed.degenerations() {
        let (a, b) = (value[d.first as usize], value[d.second as usize]);
        if a == 0 || b == 0 {
            continue;
        }
        report.count("degeneration");
        if a * b != degeneration_target(d.kind) {
            report
                .violations
                .push(Violation::Degeneration { kind: d.kind, flows: (d.first, d.second) });
        }
    }
    for sq in closed.internal_squares() {
        let vals: Vec<i8> = sq.flows().iter().map(|&f| value[f as usize]).collect();
        if vals.contains(&0) {
            continue;
        }
        report.count("square");
        if vals.iter().product::<i8>() != -1 {
            report.violations.push(Violation::Square { square: sq });
        }
    }
    Ok(report)
}

pub fn compatible(
    ua: &Universe,
    sa: &SignAssignment,
    ud: &Universe,
    sd: &SignAssignment,
    closed: &Universe,
) -> Result<bool, SignError> {
    Ok(compatibility_report(ua, sa, ud, sd, closed)?.ok())
}

/// Closed assignment of power `m + n` agreeing with the paired function.
pub fn extend_pairing(
    ua: &Universe,
    sa: &SignAssignment,
    ud: &Universe,
    sd: &SignAssignment,
    closed: &Universe,
) -> Result<SignAssignment, SignError> {
    let paired = paired_function(ua, sa, ud, sd, closed)?;
    let mut eqs = closed_equations(closed, Rules::Basic);
    let first_pin = eqs.len();
    eqs.extend(paired.iter().map(|&(f, v)| Equation::new(vec![f], bit(v))));
    let sol = gf2::solve(closed.flows.len(), &eqs, None).map_err(|e| {
        if e.0 >= first_pin {
            SignError::Violation(Violation::Pinned { flow: paired[e.0 - first_pin].0 })
        } else {
            SignError::Unsolvable(e.0)
        }
    })?;
    let s = from_solution(closed, &sol.values);
    if let Some(v) = verify_closed(closed, &s)?.into_iter().next() {
        return Err(SignError::Violation(v));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_solutions_exist_and_satisfy_all_rules() {
        for n in 1..=3 {
            let u = enumerate(n, Flavor::Closed).unwrap();
            let s = solve_closed(&u).unwrap();
            assert!(verify_closed(&u, &s).unwrap().is_empty(), "power {n}");
        }
    }

    #[test]
    fn closed_solutions_are_unique_up_to_gauge() {
        for n in 1..=3 {
            let u = enumerate(n, Flavor::Closed).unwrap();
            assert_eq!(
                closed_solution_dimension(&u, Rules::Basic).unwrap(),
                gauge_dimension(&u),
                "power {n}"
            );
        }
    }

    #[test]
    fn constructions_pass_their_rules() {
        for p in SignSequence::ALL {
            for n in 1..=2 {
                let a = BorderedSetup::type_a(p, n).unwrap();
                if p == SignSequence::plus_plus() {
                    assert_eq!(a.classify(&a.constructed).unwrap(), ClassLabel(1, 1));
                }
                let d = BorderedSetup::type_d(p, n).unwrap();
                assert_eq!(d.classify(&d.constructed).unwrap(), ClassLabel(1, 1));
            }
        }
    }

    #[test]
    fn four_classes_each_side() {
        let p = SignSequence::plus_plus();
        for setup in [BorderedSetup::type_a(p, 2).unwrap(), BorderedSetup::type_d(p, 2).unwrap()] {
            let all: Vec<_> = ClassLabel::ALL.iter().map(|&c| setup.in_class(c).unwrap()).collect();
            for (i, si) in all.iter().enumerate() {
                assert_eq!(setup.classify(si).unwrap(), ClassLabel::ALL[i]);
                for (j, sj) in all.iter().enumerate() {
                    let eq = gauge_equivalent(&setup.universe, si, sj).unwrap().is_some();
                    assert_eq!(eq, i == j);
                }
            }
        }
    }

    #[test]
    fn partner_class_is_the_unique_compatible_class() {
        for p in SignSequence::ALL {
            for (m, n) in [(1, 1), (1, 2), (2, 1)] {
                let a = BorderedSetup::type_a(p, m).unwrap();
                let d = BorderedSetup::type_d(p, n).unwrap();
                let closed = enumerate(m + n, Flavor::Closed).unwrap();
                let mut with_partner = Vec::new();
                for label in ClassLabel::ALL {
                    let sa = a.in_class(label).unwrap();
                    let found: Vec<ClassLabel> = ClassLabel::ALL
                        .into_iter()
                        .filter(|&l| {
                            let sd = d.in_class(l).unwrap();
                            compatible(&a.universe, &sa, &d.universe, &sd, &closed).unwrap()
                        })
                        .collect();
                    assert!(found.len() <= 1, "{p} {m} {n} {label}: {found:?}");
                    match compatible_partner_class(&a.universe, &sa, &d, &closed) {
                        Ok(partner) => {
                            assert_eq!(found, vec![partner]);
                            let second = annulus_second_coordinate(&a.universe, &sa, &d).unwrap();
                            assert_eq!(partner.1, second);
                            let sd = d.in_class(partner).unwrap();
                            extend_pairing(&a.universe, &sa, &d.universe, &sd, &closed).unwrap();
                            with_partner.push(label);
                        }
                        Err(SignError::NoCompatiblePartner(_)) => assert!(found.is_empty()),
                        Err(e) => panic!("{e}"),
                    }
                }
                assert_eq!(with_partner.len(), 2, "{p} {m} {n}");
                assert_eq!(with_partner[0].1, with_partner[1].1);
            }
        }
    }
}
