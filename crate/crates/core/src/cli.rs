//! Command-line front end. `dispatch` parses arguments, runs one
//! subcommand and returns the process exit code.
//!
//! Exit codes: 0 success, 1 a reported check failed, 2 malformed input,
//! 3 metric violation or failed precondition, 64 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adapted::{glue_compose, glue_full, info_pseudometric, lift};
use crate::diagnostics::{balls, equicontinuity_sweep, paired_sweep, sandwich_check, tail_report, BranchingExample};
use crate::error::{Error, Result};
use crate::io::{self, Document, SpaceTable};
use crate::measures::{DiscreteMeasure, MassKind, PairedMeasure};
use crate::modulus::{modulus, modulus_curve};
use crate::spaces::validate_metric;
use crate::transport::wasserstein;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Aggregate {
    Max,
    Sum,
}

#[derive(Debug, Parser)]
#[command(name = "adapted-ot", version, about = "Wasserstein distances, moduli of continuity and adapted lifts of finite processes")]
struct Cli {
    /// Wasserstein exponent
    #[arg(long, global = true, default_value_t = 1.0)]
    p: f64,
    /// Output format; each subcommand has its own default
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Seed for randomized checks
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Sidecar file of named spaces for `space_ref` lookups
    #[arg(long, global = true)]
    spaces: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a space, measure, process law or family
    Validate { file: PathBuf },
    /// W_p between two probability measures
    Wasserstein {
        a: PathBuf,
        b: PathBuf,
        /// Also print an optimal coupling
        #[arg(long)]
        coupling: bool,
    },
    /// Modulus of continuity at one delta
    Moc {
        file: PathBuf,
        #[arg(long)]
        delta: f64,
        /// Lift time, when the input is a process law
        #[arg(long)]
        t: Option<usize>,
    },
    /// Modulus of continuity over a grid, as CSV
    MocCurve {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        #[arg(long)]
        t: Option<usize>,
    },
    /// Adapted lift of a process law at time t
    Lift {
        file: PathBuf,
        #[arg(long, default_value_t = 1)]
        t: usize,
    },
    /// Lifted distances between two process laws
    InfoDist {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = Aggregate::Max)]
        aggregate: Aggregate,
    },
    /// Conditionally independent product of two paired measures
    Glue {
        a: PathBuf,
        b: PathBuf,
        /// Emit the composition on the outer factors instead
        #[arg(long)]
        compose: bool,
    },
    /// Equicontinuity sweep over a family
    Sweep {
        #[arg(long)]
        family: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 1e-3)]
        threshold: f64,
    },
    /// The late- versus early-branching example
    Fig1 {
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.25,0.125")]
        gaps: Vec<f64>,
        #[arg(long, default_value_t = 2.0)]
        separation: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Also run the family sweep at `delta` with this threshold
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Two-sided modulus bound between nearby measures. Without a second
    /// file, a random perturbation of the first is used.
    Sandwich {
        a: PathBuf,
        b: Option<PathBuf>,
        #[arg(long)]
        delta: f64,
    },
    /// Tail integrals of 1 + rho(x0, x)^p outside balls around the base point
    Tails {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
    },
}

struct Ctx {
    p: f64,
    format: Option<Format>,
    seed: u64,
    table: SpaceTable,
}

impl Ctx {
    fn read(&self, path: &Path) -> Result<Document> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::malformed(format!("cannot read {}: {e}", path.display())))?;
        io::parse_document(&text, &self.table)
    }

    fn measure(&self, path: &Path) -> Result<(DiscreteMeasure, Option<usize>)> {
        match self.read(path)? {
            Document::Measure(m, s) => Ok((m, s)),
            Document::Process(m) => Ok((m.measure().clone(), None)),
            other => Err(Error::malformed(format!("{}: expected a measure, got a {}", path.display(), other.kind_name()))),
        }
    }

    /// A paired measure, or the lift of a process law at `t`.
    fn paired(&self, path: &Path, t: Option<usize>) -> Result<PairedMeasure> {
        match self.read(path)? {
            Document::Measure(m, s) => io::as_paired(m, s),
            Document::Process(m) => lift(&m, t.unwrap_or(1), self.p)?.as_paired(),
            Document::Lifted(l) => l.as_paired(),
            other => Err(Error::malformed(format!("{}: expected a paired measure, got a {}", path.display(), other.kind_name()))),
        }
    }

    fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn json(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

/// Parses `args` (including the program name), runs the subcommand, and
/// writes results to `out` and diagnostics to `err`.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = out.write_all(text.as_bytes());
                0
            } else {
                let _ = err.write_all(text.as_bytes());
                64
            };
        }
    };
    match run(cli) {
        Ok((text, code)) => {
            let _ = out.write_all(text.as_bytes());
            code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 2,
        e if e.is_malformed() => 2,
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<(String, i32)> {
    crate::spaces::check_exponent(cli.p)?;
    let table = match &cli.spaces {
        Some(path) => SpaceTable::from_json(
            &std::fs::read_to_string(path).map_err(|e| Error::malformed(format!("cannot read {}: {e}", path.display())))?,
        )?,
        None => SpaceTable::default(),
    };
    let ctx = Ctx { p: cli.p, format: cli.format, seed: cli.seed, table };
    let p = ctx.p;
    match cli.command {
        Command::Validate { file } => validate(&ctx, &file),
        Command::Wasserstein { a, b, coupling } => {
            let (mu, _) = ctx.measure(&a)?;
            let (nu, _) = ctx.measure(&b)?;
            let t = wasserstein(&mu, &nu, p)?;
            let text = match ctx.format(Format::Human) {
                Format::Json => {
                    let mut v = serde_json::json!({ "distance": t.distance });
                    if coupling {
                        v["coupling"] = serde_json::from_str(&io::measure_to_json(&t.coupling, Some(mu.space().arity())))?;
                    }
                    json(&v) + "\n"
                }
                _ if coupling => format!("{}\n{}\n", num(t.distance), io::measure_to_json(&t.coupling, Some(mu.space().arity()))),
                _ => format!("{}\n", num(t.distance)),
            };
            Ok((text, 0))
        }
        Command::Moc { file, delta, t } => {
            let mu = ctx.paired(&file, t)?;
            let v = modulus(&mu, delta, p)?;
            let text = match ctx.format(Format::Human) {
                Format::Json => json(&serde_json::json!({ "delta": delta, "omega": v.omega, "lp_value": v.lp_value })) + "\n",
                _ => format!("{}\n", num(v.omega)),
            };
            Ok((text, 0))
        }
        Command::MocCurve { file, grid, t } => {
            let mu = ctx.paired(&file, t)?;
            let c = modulus_curve(&mu, &grid, p)?;
            let text = match ctx.format(Format::Csv) {
                Format::Json => json(&serde_json::json!({ "p": p, "delta": c.deltas, "omega": c.values })) + "\n",
                _ => {
                    let mut s = String::from("delta,omega\n");
                    for (d, w) in c.deltas.iter().zip(&c.values) {
                        s.push_str(&format!("{},{}\n", num(*d), num(*w)));
                    }
                    s
                }
            };
            Ok((text, 0))
        }
        Command::Lift { file, t } => match ctx.read(&file)? {
            Document::Process(mu) => Ok((io::lifted_to_json(&lift(&mu, t, p)?) + "\n", 0)),
            other => Err(Error::malformed(format!("lift needs a process law, got a {}", other.kind_name()))),
        },
        Command::InfoDist { a, b, aggregate } => {
            let (mu, nu) = match (ctx.read(&a)?, ctx.read(&b)?) {
                (Document::Process(mu), Document::Process(nu)) => (mu, nu),
                _ => return Err(Error::malformed("info-dist needs two process laws")),
            };
            let d = info_pseudometric(&mu, &nu, p)?;
            let agg = match aggregate {
                Aggregate::Max => d.max(),
                Aggregate::Sum => d.sum(),
            };
            let text = match ctx.format(Format::Human) {
                Format::Json => json(&serde_json::json!({
                    "per_t": d.per_t,
                    "aggregate": agg,
                    "plain": d.plain,
                })) + "\n",
                Format::Csv => {
                    let mut s = String::from("t,lifted\n");
                    for (i, v) in d.per_t.iter().enumerate() {
                        s.push_str(&format!("{},{}\n", i + 1, num(*v)));
                    }
                    s
                }
                Format::Human => {
                    let mut s = String::new();
                    for (i, v) in d.per_t.iter().enumerate() {
                        s.push_str(&format!("t={} {}\n", i + 1, num(*v)));
                    }
                    s.push_str(&format!("aggregate {}\nplain {}\n", num(agg), num(d.plain)));
                    s
                }
            };
            Ok((text, 0))
        }
        Command::Glue { a, b, compose } => {
            let (ma, sa) = ctx.measure(&a)?;
            let (mb, sb) = ctx.measure(&b)?;
            let (g, l) = (io::as_paired(ma, sa)?, io::as_paired(mb, sb)?);
            let text = if compose {
                io::paired_to_json(&glue_compose(&g, &l)?)
            } else {
                io::measure_to_json(&glue_full(&g, &l)?, None)
            };
            Ok((text + "\n", 0))
        }
        Command::Sweep { family, grid, threshold } => {
            let members = match ctx.read(&family)? {
                Document::Family(m) => m,
                other => return Err(Error::malformed(format!("sweep needs a family, got a {}", other.kind_name()))),
            };
            let sweep = if members.iter().all(|m| matches!(m, Document::Process(_))) {
                let laws: Vec<_> = members
                    .into_iter()
                    .map(|m| match m {
                        Document::Process(l) => l,
                        _ => unreachable!(),
                    })
                    .collect();
                equicontinuity_sweep(&laws, &grid, p, threshold)?
            } else {
                let paired = members
                    .into_iter()
                    .map(|m| match m {
                        Document::Measure(m, s) => io::as_paired(m, s),
                        Document::Lifted(l) => l.as_paired(),
                        other => Err(Error::malformed(format!("family members must share a kind, found a {}", other.kind_name()))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                paired_sweep(&paired, &grid, p, threshold)?
            };
            let text = match ctx.format(Format::Csv) {
                Format::Json => json(&serde_json::json!({
                    "delta": sweep.deltas,
                    "t": sweep.times,
                    "values": sweep.values,
                    "sup": sweep.sup,
                    "verdict": sweep.verdict().to_string(),
                })) + "\n",
                _ => format!("{}# {}\n", sweep.to_csv(), sweep.verdict_line()),
            };
            Ok((text, 0))
        }
        Command::Fig1 { gaps, separation, delta, threshold } => {
            let fig = BranchingExample::new(&gaps, separation)?;
            let rows = fig.table(delta, p)?;
            let verdict = match threshold {
                Some(th) => Some(equicontinuity_sweep(&fig.family(), &[delta], p, th)?.verdict_line()),
                None => None,
            };
            let text = match ctx.format(Format::Csv) {
                Format::Json => json(&serde_json::json!({
                    "delta": delta,
                    "rows": rows.iter().map(|r| serde_json::json!({
                        "gap": r.gap,
                        "plain": r.plain,
                        "lifted": r.lifted,
                        "omega": r.omega,
                        "closed_form": r.closed_form,
                    })).collect::<Vec<_>>(),
                    "verdict": verdict,
                })) + "\n",
                _ => {
                    let mut s = String::from("gap,plain,lifted,omega,closed_form\n");
                    for r in &rows {
                        s.push_str(&format!(
                            "{},{},{},{},{}\n",
                            num(r.gap),
                            num(r.plain),
                            num(r.lifted),
                            num(r.omega),
                            num(r.closed_form)
                        ));
                    }
                    if let Some(v) = verdict {
                        s.push_str(&format!("# {v}\n"));
                    }
                    s
                }
            };
            Ok((text, 0))
        }
        Command::Sandwich { a, b, delta } => {
            let mu = ctx.paired(&a, None)?;
            let nu = match b {
                Some(b) => ctx.paired(&b, None)?,
                None => perturb(&mu, ctx.seed)?,
            };
            let r = sandwich_check(&mu, &nu, delta, p)?;
            let text = match ctx.format(Format::Human) {
                Format::Json => json(&serde_json::json!({
                    "delta": r.delta,
                    "wasserstein": r.wasserstein,
                    "eps": r.eps,
                    "omega_mu": r.omega_mu,
                    "omega_nu": r.omega_nu,
                    "lower": r.lower,
                    "upper": r.upper,
                    "holds": r.holds(),
                })) + "\n",
                _ => format!(
                    "W_p {}\neps {}\n{} < {} < {}\n{}\n",
                    num(r.wasserstein),
                    num(r.eps),
                    num(r.lower),
                    num(r.omega_nu),
                    num(r.upper),
                    if r.holds() { "holds" } else { "VIOLATED" }
                ),
            };
            Ok((text, if r.holds() { 0 } else { 1 }))
        }
        Command::Tails { file, radii } => {
            let family: Vec<DiscreteMeasure> = match ctx.read(&file)? {
                Document::Family(m) => m
                    .into_iter()
                    .map(|d| match d {
                        Document::Measure(m, _) => Ok(m),
                        Document::Process(l) => Ok(l.measure().clone()),
                        other => Err(Error::malformed(format!("tails needs measures, found a {}", other.kind_name()))),
                    })
                    .collect::<Result<_>>()?,
                Document::Measure(m, _) => vec![m],
                Document::Process(l) => vec![l.measure().clone()],
                other => return Err(Error::malformed(format!("tails needs measures, got a {}", other.kind_name()))),
            };
            let sets = balls(family[0].space(), &radii, p);
            let rep = tail_report(&family, &sets, p)?;
            let text = match ctx.format(Format::Csv) {
                Format::Json => json(&serde_json::json!({
                    "radii": radii,
                    "phi_integrals": rep.phi_integrals,
                    "sup_tails": rep.sup_tails,
                })) + "\n",
                _ => {
                    let mut s = String::from("radius,sup_tail\n");
                    for (r, v) in radii.iter().zip(&rep.sup_tails) {
                        s.push_str(&format!("{},{}\n", num(*r), num(*v)));
                    }
                    s
                }
            };
            Ok((text, 0))
        }
    }
}

fn validate(ctx: &Ctx, path: &Path) -> Result<(String, i32)> {
    let doc = ctx.read(path)?;
    let summary = describe(&doc);
    if let Document::Space(s) = &doc {
        validate_metric(s.matrix())?;
    }
    Ok((format!("ok: {summary}\n"), 0))
}

fn describe(doc: &Document) -> String {
    match doc {
        Document::Space(s) => format!("space with {} points", s.len()),
        Document::Measure(m, _) => format!("{} measure with {} atoms on {} factors", kind_word(m.kind()), m.len(), m.space().arity()),
        Document::Process(l) => format!("process law with {} paths over {} times", l.paths().len(), l.horizon()),
        Document::Lifted(l) => format!("lifted measure with {} atoms and {} laws", l.atoms().len(), l.laws().len()),
        Document::Family(m) => format!("family of {} members", m.len()),
    }
}

fn kind_word(k: MassKind) -> &'static str {
    match k {
        MassKind::Probability => "probability",
        MassKind::Subprobability => "subprobability",
    }
}

/// Mixes 1% of a random measure on the same space into `μ`.
fn perturb(mu: &PairedMeasure, seed: u64) -> Result<PairedMeasure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = mu.measure().space().clone();
    let points: Vec<_> = space.points().collect();
    let atoms: Vec<_> = (0..3)
        .map(|_| (points[rng.gen_range(0..points.len())].clone(), rng.gen_range(0.1..1.0)))
        .collect();
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    let eta = DiscreteMeasure::probability(space, atoms.into_iter().map(|(p, w)| (p, w / total)))?;
    let nu = mu.measure().scale(0.99)?.add(&eta.scale(0.01)?, MassKind::Probability)?;
    PairedMeasure::new(nu, mu.split())
}
