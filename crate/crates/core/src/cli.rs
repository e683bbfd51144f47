//! Command-line surface: argument types, command dispatch and report output.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use bordered_signs::diagram::{builtin, glue, BorderedDiagram, Builtin, ClosedDiagram, Reading};
use bordered_signs::formal_flows::{enumerate, Flavor};
use bordered_signs::sign_assign::{
    classify, closed_solution_dimension, compatible_partner_class, extend_pairing, gauge_dimension, gauge_equivalent,
    solve_closed, solve_closed_seeded, verify, BorderedSetup, ClassLabel, Report, Rules, SignAssignment, SignError,
};
use bordered_signs::structures::{
    box_tensor, build_cfa, build_cfd, tilde_cf, triangle_obstruction, IntegerChainComplex, StructureError,
};
use bordered_signs::torus_algebra::SignSequence;

#[derive(Parser, Debug)]
#[command(name = "bordered-signs", version, about = "Integral sign assignments and bordered structures for torus boundary")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct Global {
    /// Sign sequence of the boundary, e.g. `++` or `+-`.
    #[arg(long, global = true, default_value = "++", allow_hyphen_values = true)]
    pub sign_sequence: SignSequence,
    /// Class label of the bordered assignment, e.g. `+,-`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub class: Option<ClassLabel>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Machine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FlavorArg {
    Closed,
    #[value(name = "typeA")]
    TypeA,
    #[value(name = "typeD")]
    TypeD,
}

#[derive(Args, Debug)]
pub struct FlavorPower {
    #[arg(long, value_enum, default_value_t = FlavorArg::Closed)]
    pub flavor: FlavorArg,
    #[arg(long, default_value_t = 1)]
    pub power: usize,
}

#[derive(Args, Debug)]
pub struct DiagramSource {
    /// One of Hinf, Hm1, H0.
    #[arg(long, conflicts_with = "diagram")]
    pub builtin: Option<Builtin>,
    /// A diagram file in the text format.
    #[arg(long)]
    pub diagram: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PairSource {
    #[arg(long, conflicts_with = "diagram_a")]
    pub builtin_a: Option<Builtin>,
    #[arg(long)]
    pub diagram_a: Option<PathBuf>,
    #[arg(long, conflicts_with = "diagram_d")]
    pub builtin_d: Option<Builtin>,
    #[arg(long)]
    pub diagram_d: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve for a sign assignment and check every rule.
    Solve {
        #[command(flatten)]
        fp: FlavorPower,
        /// Draw the free variables from this seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build each bordered class, classify it and check the classes are distinct.
    Classify {
        #[command(flatten)]
        fp: FlavorPower,
    },
    /// Check the assignment of the requested class against every rule.
    Verify {
        #[command(flatten)]
        fp: FlavorPower,
    },
    /// Type A structure of a diagram.
    Cfa {
        #[command(flatten)]
        source: DiagramSource,
    },
    /// Type D structure of a diagram.
    Cfd {
        #[command(flatten)]
        source: DiagramSource,
    },
    /// Box tensor product against the closed complex of the glued diagram.
    Pair {
        #[command(flatten)]
        source: PairSource,
        /// Print both differentials.
        #[arg(long)]
        emit_matrices: bool,
    },
    /// Homology of a closed diagram, or of two glued diagrams.
    Homology {
        /// A closed diagram file.
        #[arg(long)]
        diagram: Option<PathBuf>,
        #[command(flatten)]
        source: PairSource,
    },
    /// The signed surgery triangle computation for the three solid tori.
    Triangle {
        /// Also list the tuples that make both maps homomorphisms.
        #[arg(long)]
        list_homs: bool,
    },
}

/// Failure categories, mapped to exit codes by `main`.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Violation(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Violation(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

/// Sort an error into its category.
pub fn categorize(err: &anyhow::Error) -> Failure {
    if let Some(f) = err.downcast_ref::<Failure>() {
        return match f {
            Failure::Violation(m) => Failure::Violation(m.clone()),
            Failure::Usage(m) => Failure::Usage(m.clone()),
            Failure::Io(m) => Failure::Io(m.clone()),
        };
    }
    let msg = format!("{err:#}");
    for cause in err.chain() {
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return Failure::Io(msg);
        }
        if let Some(e) = cause.downcast_ref::<SignError>() {
            return match e {
                SignError::Violation(_) | SignError::NoCompatiblePartner(_) | SignError::InternalMismatch => Failure::Violation(msg),
                SignError::Unsolvable(_) => Failure::Violation(msg),
                _ => Failure::Usage(msg),
            };
        }
        if let Some(e) = cause.downcast_ref::<StructureError>() {
            return match e {
                StructureError::Relation(_) | StructureError::Idempotent(_) => Failure::Violation(msg),
                StructureError::Sign(SignError::Violation(_)) => Failure::Violation(msg),
                _ => Failure::Usage(msg),
            };
        }
    }
    Failure::Usage(msg)
}

struct Out {
    text: String,
    machine: Value,
}

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    let out = match &cli.command {
        Command::Solve { fp, seed } => cmd_solve(g, fp, *seed)?,
        Command::Classify { fp } => cmd_classify(g, fp)?,
        Command::Verify { fp } => cmd_verify(g, fp)?,
        Command::Cfa { source } => cmd_structure(g, source, Reading::Right)?,
        Command::Cfd { source } => cmd_structure(g, source, Reading::Left)?,
        Command::Pair { source, emit_matrices } => cmd_pair(g, source, *emit_matrices)?,
        Command::Homology { diagram, source } => cmd_homology(g, diagram.as_ref(), source)?,
        Command::Triangle { list_homs } => cmd_triangle(g, *list_homs)?,
    };
    let rendered = match g.format {
        Format::Text => out.text,
        Format::Machine => format!("{}\n", serde_json::to_string_pretty(&out.machine)?),
    };
    match &g.output {
        Some(path) => fs::write(path, rendered).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{rendered}"),
    }
    Ok(())
}

fn flavor_of(fp: &FlavorPower, p: SignSequence) -> Result<Flavor> {
    if fp.power == 0 {
        return Err(Failure::Usage("--power must be at least 1".into()).into());
    }
    Ok(match fp.flavor {
        FlavorArg::Closed => Flavor::Closed,
        FlavorArg::TypeA => Flavor::Right(p),
        FlavorArg::TypeD => Flavor::Left(p),
    })
}

fn setup_for(fp: &FlavorPower, p: SignSequence) -> Result<BorderedSetup> {
    Ok(match fp.flavor {
        FlavorArg::TypeA => BorderedSetup::type_a(p, fp.power)?,
        FlavorArg::TypeD => BorderedSetup::type_d(p, fp.power)?,
        FlavorArg::Closed => bail!(Failure::Usage("this command needs --flavor typeA or typeD".into())),
    })
}

fn report_out(report: &Report) -> (String, Value) {
    let mut text = report.to_string();
    for v in &report.violations {
        let _ = writeln!(text, "  {v}");
    }
    let counts: serde_json::Map<String, Value> = report.instances.iter().map(|(r, c)| (r.to_string(), json!(c))).collect();
    let violations: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
    (text, json!({ "instances": counts, "violations": violations }))
}

fn fail_on(report: &Report, what: &str) -> Result<()> {
    if report.ok() {
        Ok(())
    } else {
        Err(Failure::Violation(format!("{what}: {} violation(s), first: {}", report.violations.len(), report.violations[0])).into())
    }
}

fn cmd_solve(g: &Global, fp: &FlavorPower, seed: Option<u64>) -> Result<Out> {
    let flavor = flavor_of(fp, g.sign_sequence)?;
    if flavor == Flavor::Closed {
        let u = enumerate(fp.power, flavor)?;
        let s = solve_closed_seeded(&u, seed)?;
        let report = verify(&u, &s)?;
        let dim = closed_solution_dimension(&u, Rules::All)?;
        let (rtext, rjson) = report_out(&report);
        fail_on(&report, "closed assignment")?;
        return Ok(Out {
            text: format!(
                "OK, closed power {}: {} generators, {} flows, solution space dimension {}, gauge dimension {}\n{rtext}",
                fp.power,
                u.generators.len(),
                u.flows.len(),
                dim,
                gauge_dimension(&u)
            ),
            machine: json!({ "status": "ok", "flavor": "closed", "power": fp.power, "generators": u.generators.len(),
                "flows": u.flows.len(), "solution_dimension": dim, "gauge_dimension": gauge_dimension(&u), "report": rjson }),
        });
    }
    let setup = setup_for(fp, g.sign_sequence)?;
    let s = match g.class {
        Some(c) => setup.in_class(c)?,
        None => setup.constructed.clone(),
    };
    let report = verify(&setup.universe, &s)?;
    let (rtext, rjson) = report_out(&report);
    fail_on(&report, "bordered assignment")?;
    let label = setup.classify(&s)?;
    Ok(Out {
        text: format!("OK, class {label}\n{rtext}"),
        machine: json!({ "status": "ok", "flavor": flavor.to_string(), "power": fp.power, "class": label.to_string(), "report": rjson }),
    })
}

fn cmd_classify(g: &Global, fp: &FlavorPower) -> Result<Out> {
    let setup = setup_for(fp, g.sign_sequence)?;
    let u = &setup.universe;
    let mut text = format!("constructed assignment: class {}\n", setup.classify(&setup.constructed)?);
    let mut rows = Vec::new();
    let reps: Vec<(ClassLabel, SignAssignment)> =
        ClassLabel::ALL.into_iter().map(|c| Ok((c, setup.in_class(c)?))).collect::<Result<_>>()?;
    for (c, s) in &reps {
        let back = classify(u, s, &setup.constructed)?;
        let ok = verify(u, s)?.ok();
        let _ = writeln!(text, "class {c}: valid {ok}, classified as {back}");
        rows.push(json!({ "class": c.to_string(), "valid": ok, "classified_as": back.to_string() }));
        if !ok || back != *c {
            return Err(Failure::Violation(format!("class {c} representative is invalid or misclassified")).into());
        }
    }
    let mut distinct = true;
    for i in 0..reps.len() {
        for j in i + 1..reps.len() {
            distinct &= gauge_equivalent(u, &reps[i].1, &reps[j].1)?.is_none();
        }
    }
    let _ = writeln!(text, "classes pairwise gauge-inequivalent: {distinct}");
    if !distinct {
        return Err(Failure::Violation("two classes are gauge equivalent".into()).into());
    }
    Ok(Out { text, machine: json!({ "classes": rows, "pairwise_inequivalent": distinct }) })
}

fn cmd_verify(g: &Global, fp: &FlavorPower) -> Result<Out> {
    let flavor = flavor_of(fp, g.sign_sequence)?;
    let (u, s) = if flavor == Flavor::Closed {
        let u = enumerate(fp.power, flavor)?;
        let s = solve_closed(&u)?;
        (u, s)
    } else {
        let setup = setup_for(fp, g.sign_sequence)?;
        let s = setup.in_class(g.class.unwrap_or(ClassLabel(1, 1)))?;
        (setup.universe, s)
    };
    let report = verify(&u, &s)?;
    let (text, machine) = report_out(&report);
    fail_on(&report, "assignment")?;
    Ok(Out { text, machine })
}

fn read_file(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("reading {}: {e}", path.display())).into())
}

fn load_bordered(builtin_name: Option<Builtin>, path: Option<&PathBuf>, p: SignSequence, reading: Reading) -> Result<BorderedDiagram> {
    match (builtin_name, path) {
        (Some(b), None) => Ok(builtin(b, p, reading)),
        (None, Some(path)) => {
            let d = BorderedDiagram::parse(&read_file(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let d = d.in_reading(reading);
            if d.p != p {
                bail!(Failure::Usage(format!("{} has sign sequence {} in this reading, not {p}", path.display(), d.p)));
            }
            Ok(d)
        }
        _ => bail!(Failure::Usage("give exactly one of a built-in or a diagram file".into())),
    }
}

fn cmd_structure(g: &Global, source: &DiagramSource, reading: Reading) -> Result<Out> {
    let p = g.sign_sequence;
    let h = load_bordered(source.builtin, source.diagram.as_ref(), p, reading)?;
    let class = g.class.unwrap_or(ClassLabel(1, 1));
    let entries = |t: &bordered_signs::structures::ArrowTable, labels: &dyn Fn(usize) -> String| -> Vec<Value> {
        t.iter().map(|(&(x, a, y), &c)| json!({ "source": labels(x), "element": a.to_string(), "target": labels(y), "coefficient": c })).collect()
    };
    match reading {
        Reading::Right => {
            let setup = BorderedSetup::type_a(p, h.power())?;
            let a = build_cfa(&h, &setup.universe, &setup.in_class(class)?)?;
            let lab = |x: usize| a.generators[x].label.clone();
            let m1: Vec<Value> =
                a.m1.iter().map(|(&(x, y), &c)| json!({ "source": lab(x), "target": lab(y), "coefficient": c })).collect();
            Ok(Out {
                text: format!("class {class}\n{a}"),
                machine: json!({ "diagram": h.name, "class": class.to_string(), "generators": gens_json(&a.generators), "m1": m1, "m2": entries(&a.m2, &lab) }),
            })
        }
        Reading::Left => {
            let setup = BorderedSetup::type_d(p, h.power())?;
            let d = build_cfd(&h, &setup.universe, &setup.in_class(class)?)?;
            let lab = |x: usize| d.generators[x].label.clone();
            Ok(Out {
                text: format!("class {class}\n{d}"),
                machine: json!({ "diagram": h.name, "class": class.to_string(), "generators": gens_json(&d.generators), "delta": entries(&d.delta, &lab) }),
            })
        }
    }
}

fn gens_json(gens: &[bordered_signs::structures::StructGen]) -> Vec<Value> {
    gens.iter().map(|g| json!({ "label": g.label, "idempotent": g.idempotent, "grading": g.grading })).collect()
}

/// Box tensor complex and glued closed complex for a pair, with the class
/// labels used.
struct Paired {
    boxed: IntegerChainComplex,
    glued: IntegerChainComplex,
    class_a: ClassLabel,
    class_d: ClassLabel,
}

fn paired(g: &Global, source: &PairSource) -> Result<Paired> {
    let p = g.sign_sequence;
    let h1 = load_bordered(source.builtin_a, source.diagram_a.as_ref(), p, Reading::Right)?;
    let h2 = load_bordered(source.builtin_d, source.diagram_d.as_ref(), p, Reading::Left)?;
    let (sa_setup, sd_setup) = (BorderedSetup::type_a(p, h1.power())?, BorderedSetup::type_d(p, h2.power())?);
    let closed = enumerate(h1.power() + h2.power(), Flavor::Closed)?;
    let class_a = match g.class {
        Some(c) => c,
        None => ClassLabel::ALL
            .into_iter()
            .find(|&c| {
                sa_setup
                    .in_class(c)
                    .ok()
                    .and_then(|sa| compatible_partner_class(&sa_setup.universe, &sa, &sd_setup, &closed).ok())
                    .is_some()
            })
            .ok_or_else(|| Failure::Violation("no type A class has a compatible type D class".into()))?,
    };
    let sa = sa_setup.in_class(class_a)?;
    let class_d = compatible_partner_class(&sa_setup.universe, &sa, &sd_setup, &closed)?;
    let sd = sd_setup.in_class(class_d)?;
    let sc = extend_pairing(&sa_setup.universe, &sa, &sd_setup.universe, &sd, &closed)?;
    let boxed = box_tensor(&build_cfa(&h1, &sa_setup.universe, &sa)?, &build_cfd(&h2, &sd_setup.universe, &sd)?)?;
    let glued = tilde_cf(&glue(&h1, &h2)?, &closed, &sc)?;
    Ok(Paired { boxed, glued, class_a, class_d })
}

fn matrix_text(c: &IntegerChainComplex) -> String {
    let mut s = format!("basis: {}\n", c.labels.join(" "));
    for row in c.matrix() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>3}")).collect();
        let _ = writeln!(s, "  [{}]", cells.join(""));
    }
    s
}

fn cmd_pair(g: &Global, source: &PairSource, emit: bool) -> Result<Out> {
    let pr = paired(g, source)?;
    let diffs = pr.boxed.differences(&pr.glued);
    let h = pr.boxed.homology();
    let hg = pr.glued.homology();
    let identical = diffs.is_empty();
    let mut text = format!(
        "classes: type A {}, type D {}\nbox = glued: {}\nH_* =\n{h}",
        pr.class_a,
        pr.class_d,
        if identical { "identical".to_string() } else { format!("{} difference(s)", diffs.len()) }
    );
    for d in &diffs {
        let _ = writeln!(text, "  {d}");
    }
    if emit {
        let _ = write!(text, "box tensor differential (rows are targets)\n{}", matrix_text(&pr.boxed));
        let _ = write!(text, "glued differential (rows are targets)\n{}", matrix_text(&pr.glued));
    }
    let mut machine = json!({ "class_a": pr.class_a.to_string(), "class_d": pr.class_d.to_string(), "identical": identical,
        "differences": diffs, "homology": h, "glued_homology": hg });
    if emit {
        machine["box_matrix"] = json!({ "basis": pr.boxed.labels, "matrix": pr.boxed.matrix() });
        machine["glued_matrix"] = json!({ "basis": pr.glued.labels, "matrix": pr.glued.matrix() });
    }
    if !identical || h != hg {
        return Err(Failure::Violation(text).into());
    }
    Ok(Out { text, machine })
}

fn cmd_homology(g: &Global, diagram: Option<&PathBuf>, source: &PairSource) -> Result<Out> {
    let cx = match diagram {
        Some(path) => {
            let d = ClosedDiagram::parse(&read_file(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let u = enumerate(d.power(), Flavor::Closed)?;
            tilde_cf(&d, &u, &solve_closed(&u)?)?
        }
        None => paired(g, source)?.glued,
    };
    let h = cx.homology();
    Ok(Out { text: h.to_string(), machine: json!({ "basis": cx.labels, "homology": h }) })
}

fn cmd_triangle(g: &Global, list_homs: bool) -> Result<Out> {
    let classes: Vec<ClassLabel> = match g.class {
        Some(c) => vec![c],
        None => ClassLabel::ALL.to_vec(),
    };
    let mut text = String::new();
    let mut rows = Vec::new();
    for c in classes {
        let r = triangle_obstruction(g.sign_sequence, c)?;
        if list_homs {
            let _ = write!(text, "{r:#}");
        } else {
            let _ = write!(text, "{r}");
        }
        if !r.consistent() {
            return Err(Failure::Violation(format!("inconsistent computation\n{text}")).into());
        }
        rows.push(serde_json::to_value(&r)?);
    }
    let _ = writeln!(text, "satisfying set: {}", if rows.iter().all(|r| r["satisfying"].as_array().is_some_and(Vec::is_empty)) { "empty" } else { "nonempty" });
    Ok(Out { text, machine: json!({ "reports": rows }) })
}
