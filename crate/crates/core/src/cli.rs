//! Command-line front end.
//!
//! Every invocation writes one JSON document (`schema: 1`) to standard output,
//! or a plain-text rendering with `--pretty`; `sweep` writes CSV instead.
//! Exit codes: 0 Yes/PASS/success, 1 No/FAIL, 2 out of theorem scope,
//! 3 usage or input error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{nu_id1_series, nu_id2_series, witness_report, SeriesReport, WitnessMode, WitnessReport};
use crate::classifier::{classify, ClassificationDoc, EmbeddingQuery, Mode, Setting};
use crate::exponents::{parse_rat, rat, tong_exponent, ExtRat, Kind, Rat, SpaceParams};
use crate::nucdiag::{
    decomposition_upper_bound, numeric_cross_check, tong_nuclear_norm, trace_dual_lower_bound, Bracket, DiagonalSpec,
    OptimizerConfig,
};
use crate::seqmodel::LatticeConfig;
use crate::verdict::Verdict;
use crate::weights::{
    ap_constant_estimate, ap_membership, box_oscillation, cube_mass, cube_mass_asymptotic, cube_region, find_regularity_cube,
    singular_set, ApEstimate, ApPlan, Cube, CubeRegion, DyadicBox, SingularKind, WeightSpec,
};

pub const SCHEMA: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "nucemb", version, about = "Compactness and nuclearity of function-space embeddings")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Human-readable output instead of JSON.
    #[arg(long, global = true)]
    pub pretty: bool,
    /// Seed for every stochastic component.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// File of `key=value` lines, read as `--key value` flags of the subcommand.
    #[arg(long, global = true)]
    pub config: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide compactness and/or nuclearity of one embedding.
    Classify(ClassifyArgs),
    /// Classify over a grid of target parameters (1/p₂, s₂) and print CSV.
    Sweep(SweepArgs),
    /// Check the diagonal nuclear-norm formula against independent bounds.
    VerifyTong(VerifyArgs),
    /// Level series bounds or divergence witnesses for a weighted query.
    Bound(BoundArgs),
    /// Weight diagnostics.
    Weight(WeightArgs),
}

#[derive(Args, Debug, Clone)]
pub struct QueryArgs {
    #[arg(long)]
    pub dim: u32,
    #[arg(long, default_value = "B")]
    pub kind: String,
    /// Source space, `s=..,p=..,q=..`.
    #[arg(long)]
    pub src: String,
    /// Target space, `s=..,p=..,q=..`.
    #[arg(long)]
    pub tgt: String,
    /// `weight:<spec>`, `domain` or `radial`.
    #[arg(long)]
    pub setting: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Compact,
    Nuclear,
    Both,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub query: QueryArgs,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ModeArg,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub dim: u32,
    #[arg(long, default_value = "B")]
    pub kind: String,
    #[arg(long)]
    pub src: String,
    #[arg(long)]
    pub setting: String,
    /// Target `q₂` (defaults to the source `q`).
    #[arg(long)]
    pub tgt_q: Option<String>,
    /// Grid of `1/p₂`: `lo:hi:count` or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    pub inv_p2: String,
    /// Grid of `s₂`: `lo:hi:count` or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    pub s2: String,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub r1: String,
    #[arg(long)]
    pub r2: String,
    /// `v1,v2,...` or `const:c`.
    #[arg(long)]
    pub tau: String,
    #[arg(long, default_value_t = 64)]
    pub restarts: usize,
    #[arg(long, default_value_t = 400)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub eps_op: f64,
    /// Largest dimension handed to the optimizer.
    #[arg(long, default_value_t = 4)]
    pub cap: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WitnessArg {
    Global,
    Local,
}

#[derive(Args, Debug)]
pub struct BoundArgs {
    #[command(flatten)]
    pub query: QueryArgs,
    /// Number of levels.
    #[arg(long = "J", default_value_t = 12)]
    pub big_j: u32,
    /// Outer lattice cutoff (default `2^J`).
    #[arg(long = "M")]
    pub big_m: Option<u64>,
    #[arg(long, value_enum)]
    pub witness: Option<WitnessArg>,
    #[arg(long, default_value_t = 20)]
    pub k: u32,
}

#[derive(Args, Debug)]
pub struct WeightArgs {
    /// Weight, e.g. `poly:a=1,b=1`, `polylog:a1=..,a2=..,b1=..,b2=..`, `purelog:g1=..,g2=..`, `adm:b=..`, `const`.
    #[arg(long)]
    pub spec: String,
    #[command(subcommand)]
    pub action: WeightAction,
}

#[derive(Subcommand, Debug)]
pub enum WeightAction {
    /// Mass of the cube `Q_{j,m}` by quadrature and by the closed-form asymptotics.
    Mass {
        #[arg(long)]
        j: u32,
        /// Lattice point, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        m: String,
        #[arg(long, default_value_t = 1)]
        dim: u32,
        #[arg(long, default_value_t = 12)]
        level: u32,
    },
    /// Sampled Muckenhoupt constant and exact class membership.
    Apconst {
        #[arg(long)]
        p: String,
        #[arg(long, default_value_t = 1)]
        dim: u32,
        #[arg(long, default_value_t = 8)]
        k: u32,
    },
    /// Type of the singular set.
    Singular {
        #[arg(long, default_value_t = 1)]
        dim: u32,
    },
    /// Dyadic subcube of `Q_{j,m}` on which the weight oscillates at most `ratio`.
    Regcube {
        #[arg(long)]
        j: u32,
        #[arg(long, allow_hyphen_values = true)]
        m: String,
        #[arg(long, default_value_t = 1)]
        dim: u32,
        #[arg(long, default_value_t = 2.0)]
        ratio: f64,
        #[arg(long, default_value_t = 30)]
        depth: u32,
    },
}

/// Top-level machine document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema: u32,
    pub command: String,
    pub result: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyRecord {
    pub n: usize,
    pub r1: ExtRat,
    pub r2: ExtRat,
    pub tau: Vec<f64>,
    pub t: ExtRat,
    pub formula: f64,
    pub dual_lower: f64,
    pub dual_witness: Vec<f64>,
    pub decomposition_upper: f64,
    pub decomposition: String,
    pub bracket: Bracket,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPair {
    pub id1: SeriesReport,
    pub id2: SeriesReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassRecord {
    pub cube: Cube,
    pub region: CubeRegion,
    pub quadrature: f64,
    pub asymptotic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApRecord {
    pub p: String,
    pub estimate: ApEstimate,
    pub membership: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularRecord {
    pub singular: Option<SingularKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegCubeRecord {
    pub cube: DyadicBox,
    pub side: f64,
    pub oscillation: f64,
}

#[derive(Debug)]
struct CliError(String);

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

type CliResult = Result<(i32, String), CliError>;

/// Parses `s=..,p=..,q=..`.
pub fn parse_space(text: &str, kind: Kind, d: u32) -> Result<SpaceParams, String> {
    let mut s = None;
    let mut p = None;
    let mut q = None;
    for part in text.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("expected key=value in {part:?}"))?;
        let v = v.trim();
        match k.trim() {
            "s" => s = Some(parse_rat(v).map_err(|e| e.to_string())?),
            "p" => p = Some(v.parse::<ExtRat>().map_err(|e| e.to_string())?),
            "q" => q = Some(v.parse::<ExtRat>().map_err(|e| e.to_string())?),
            other => return Err(format!("unknown space key {other:?}")),
        }
    }
    let missing = |n: &str| format!("space {text:?} lacks {n}");
    SpaceParams::new(kind, s.ok_or_else(|| missing("s"))?, p.ok_or_else(|| missing("p"))?, q.ok_or_else(|| missing("q"))?, d)
        .map_err(|e| e.to_string())
}

fn build_query(a: &QueryArgs) -> Result<EmbeddingQuery, CliError> {
    let kind: Kind = a.kind.parse()?;
    let src = parse_space(&a.src, kind, a.dim).map_err(CliError)?;
    let tgt = parse_space(&a.tgt, kind, a.dim).map_err(CliError)?;
    let setting: Setting = a.setting.parse()?;
    Ok(EmbeddingQuery::new(src, tgt, setting)?)
}

/// Grid values: `lo:hi:count` (count points, both ends included) or `a,b,c`.
pub fn parse_grid(text: &str) -> Result<Vec<Rat>, String> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [lo, hi, n] => {
            let lo = parse_rat(lo).map_err(|e| e.to_string())?;
            let hi = parse_rat(hi).map_err(|e| e.to_string())?;
            let n: i64 = n.trim().parse().map_err(|_| format!("bad count {n:?}"))?;
            Ok(match n {
                n if n <= 0 => Vec::new(),
                1 => vec![lo],
                n => (0..n).map(|i| &lo + (&hi - &lo) * rat(i) / rat(n - 1)).collect(),
            })
        }
        [list] => list.split(',').map(|v| parse_rat(v).map_err(|e| e.to_string())).collect(),
        _ => Err(format!("bad grid {text:?}")),
    }
}

fn parse_tau(text: &str, n: usize) -> Result<Vec<f64>, String> {
    if let Some(c) = text.strip_prefix("const:") {
        let c: f64 = c.trim().parse().map_err(|_| format!("bad constant {c:?}"))?;
        return Ok(vec![c; n]);
    }
    let v: Vec<f64> = text
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad entry {x:?}")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("--tau has {} entries, --n is {n}", v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err("--tau entries must be finite".into());
    }
    Ok(v)
}

fn parse_point(text: &str, d: u32) -> Result<Vec<i64>, String> {
    let m: Vec<i64> = text
        .split(',')
        .map(|x| x.trim().parse::<i64>().map_err(|_| format!("bad coordinate {x:?}")))
        .collect::<Result<_, _>>()?;
    if m.len() != d as usize {
        return Err(format!("point has {} coordinates, --dim is {d}", m.len()));
    }
    Ok(m)
}

fn to_json<T: Serialize>(command: &str, result: T) -> Result<String, CliError> {
    let env = Envelope { schema: SCHEMA, command: command.to_string(), result };
    Ok(serde_json::to_string(&env)? + "\n")
}

fn verdict_exit(v: &Verdict) -> i32 {
    match v {
        Verdict::Yes => 0,
        Verdict::No => 1,
        Verdict::OutOfTheoremScope(_) => 2,
    }
}

/// Renders a classification as plain text.
pub fn render_classification(doc: &ClassificationDoc) -> String {
    let q = &doc.query;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} d={} {}: s={} p={} q={} -> s={} p={} q={} on {}",
        doc.mode, q.dim, q.kind, q.src.s, q.src.p, q.src.q, q.tgt.s, q.tgt.p, q.tgt.q, q.setting
    );
    let _ = match &doc.scope {
        Some(r) => writeln!(out, "  verdict: {} ({r})", doc.verdict),
        None => writeln!(out, "  verdict: {}", doc.verdict),
    };
    if let crate::classifier::Decision::Fixed { reason, .. } = &doc.logic {
        let _ = writeln!(out, "  reason: {reason}");
    }
    let w = doc.conditions.iter().map(|c| c.label.chars().count()).max().unwrap_or(0);
    for c in &doc.conditions {
        let pad = w - c.label.chars().count();
        let _ = writeln!(
            out,
            "  [{}] {}{}  {} {} {}  ({})",
            if c.ok { "ok" } else { "--" },
            c.label,
            " ".repeat(pad),
            c.lhs,
            c.rel.symbol(),
            c.rhs,
            c.anchor
        );
    }
    out
}

fn cmd_classify(a: &ClassifyArgs, pretty: bool) -> CliResult {
    let q = build_query(&a.query)?;
    let modes: Vec<Mode> = match a.mode {
        ModeArg::Compact => vec![Mode::Compact],
        ModeArg::Nuclear => vec![Mode::Nuclear],
        ModeArg::Both => vec![Mode::Compact, Mode::Nuclear],
    };
    let results: Vec<_> = modes.iter().map(|m| classify(&q, *m)).collect();
    let code = if results.iter().any(|c| c.verdict.scope_reason().is_some()) {
        2
    } else if results.iter().all(|c| c.verdict.is_yes()) {
        0
    } else {
        1
    };
    debug_assert!(results.len() > 1 || code == verdict_exit(&results[0].verdict));
    let docs: Vec<ClassificationDoc> = results.iter().map(ClassificationDoc::from).collect();
    let out = if pretty { docs.iter().map(render_classification).collect() } else { to_json("classify", docs)? };
    Ok((code, out))
}

/// One CSV row of a sweep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepRow {
    pub inv_p2: Rat,
    pub s2: Rat,
    pub compact: String,
    pub nuclear: String,
    pub binding: String,
}

pub const SWEEP_HEADER: &str = "inv_p2,s2,compact,nuclear,binding";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.inv_p2,
            self.s2,
            self.compact,
            self.nuclear,
            csv_field(&self.binding)
        )
    }
}

/// Classifies every `(1/p₂, s₂)` grid point, in grid order.
pub fn sweep_rows(
    dim: u32,
    kind: Kind,
    src: &SpaceParams,
    tgt_q: &ExtRat,
    setting: &Setting,
    inv_p2: &[Rat],
    s2: &[Rat],
) -> Result<Vec<SweepRow>, String> {
    let points: Vec<(Rat, Rat)> = inv_p2.iter().flat_map(|a| s2.iter().map(move |b| (a.clone(), b.clone()))).collect();
    points
        .par_iter()
        .map(|(ip, s)| {
            if *ip < rat(0) {
                return Err(format!("1/p₂ = {ip} is negative"));
            }
            let p2 = ExtRat::from_recip(ip.clone());
            let tgt = SpaceParams::new(kind, s.clone(), p2, tgt_q.clone(), dim).map_err(|e| e.to_string())?;
            let q = EmbeddingQuery::new(src.clone(), tgt, setting.clone()).map_err(|e| e.to_string())?;
            let c = classify(&q, Mode::Compact);
            let n = classify(&q, Mode::Nuclear);
            let binding = if !c.verdict.is_yes() { c.trace.binding() } else { n.trace.binding() };
            Ok(SweepRow {
                inv_p2: ip.clone(),
                s2: s.clone(),
                compact: c.verdict.tag().to_string(),
                nuclear: n.verdict.tag().to_string(),
                binding,
            })
        })
        .collect()
}

fn cmd_sweep(a: &SweepArgs) -> CliResult {
    let kind: Kind = a.kind.parse()?;
    let src = parse_space(&a.src, kind, a.dim).map_err(CliError)?;
    let setting: Setting = a.setting.parse()?;
    let tgt_q = match &a.tgt_q {
        Some(q) => q.parse::<ExtRat>()?,
        None => src.q.clone(),
    };
    let ip = parse_grid(&a.inv_p2).map_err(CliError)?;
    let s2 = parse_grid(&a.s2).map_err(CliError)?;
    let rows = sweep_rows(a.dim, kind, &src, &tgt_q, &setting, &ip, &s2).map_err(CliError)?;
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    Ok((0, out))
}

fn cmd_verify(a: &VerifyArgs, seed: u64, pretty: bool) -> CliResult {
    let r1: ExtRat = a.r1.parse()?;
    let r2: ExtRat = a.r2.parse()?;
    let tau = parse_tau(&a.tau, a.n).map_err(CliError)?;
    let spec = DiagonalSpec::finite(tau, r1.clone(), r2.clone())?;
    let cfg = OptimizerConfig { restarts: a.restarts, steps: a.steps, seed, eps_op: a.eps_op, cap: a.cap };
    let bracket = numeric_cross_check(&spec, &cfg)?;
    let formula = tong_nuclear_norm(&spec)?.value().expect("finite diagonal");
    let dual = trace_dual_lower_bound(&spec)?;
    let dec = decomposition_upper_bound(&spec)?;
    let slack = 1.0 + a.tol;
    let pass = bracket.lower <= formula * slack
        && formula <= bracket.upper * slack
        && formula <= dec.cost * slack
        && (dual.value - formula).abs() <= a.tol * formula;
    let rec = VerifyRecord {
        n: a.n,
        t: tong_exponent(&r1, &r2),
        r1,
        r2,
        tau: spec.entries().unwrap_or_default().to_vec(),
        formula,
        dual_lower: dual.value,
        dual_witness: dual.s,
        decomposition_upper: dec.cost,
        decomposition: format!("{:?}, {} rank-one terms", dec.kind, dec.terms),
        bracket,
        pass,
    };
    let out = if pretty {
        format!(
            "n={} r1={} r2={} t={}\n  formula             {}\n  dual lower bound    {}\n  decomposition upper {} ({})\n  optimizer bracket   [{}, {}]{}\n  {}\n",
            rec.n,
            rec.r1,
            rec.r2,
            rec.t,
            rec.formula,
            rec.dual_lower,
            rec.decomposition_upper,
            rec.decomposition,
            rec.bracket.lower,
            rec.bracket.upper,
            if rec.bracket.converged { "" } else { " (not converged)" },
            if pass { "PASS" } else { "FAIL" }
        )
    } else {
        to_json("verify-tong", &rec)?
    };
    Ok((if pass { 0 } else { 1 }, out))
}

fn render_series(name: &str, r: &SeriesReport) -> String {
    let mut out = format!("{name}: {} [{}] {:?}\n", r.regime, r.anchor, r.certificate);
    for (j, (t, s)) in r.terms.iter().zip(&r.partial_sums).enumerate() {
        let _ = writeln!(out, "  j={j:<3} term={t:<24e} partial={s:e}");
    }
    out
}

fn cmd_bound(a: &BoundArgs, pretty: bool) -> CliResult {
    let q = build_query(&a.query)?;
    let cfg = LatticeConfig::default();
    if let Some(w) = a.witness {
        let mode = match w {
            WitnessArg::Global => WitnessMode::Global,
            WitnessArg::Local => WitnessMode::Local,
        };
        let rep: WitnessReport = witness_report(&q, mode, a.k, &cfg)?;
        let out = if pretty {
            let mut s = format!(
                "{:?} witness: {:?}, slope {:.4}, strictly increasing: {}\n",
                rep.mode, rep.status, rep.slope, rep.strictly_increasing
            );
            for (k, v) in rep.values.iter().enumerate() {
                let _ = writeln!(s, "  k={:<3} {v:e}", k + 1);
            }
            s
        } else {
            to_json("bound", &rep)?
        };
        return Ok((0, out));
    }
    let m = a.big_m.unwrap_or(1u64 << a.big_j.min(40));
    let pair = SeriesPair { id1: nu_id1_series(&q, a.big_j, &cfg)?, id2: nu_id2_series(&q, a.big_j, m, &cfg)? };
    let out = if pretty {
        render_series("inner", &pair.id1) + &render_series("outer", &pair.id2)
    } else {
        to_json("bound", &pair)?
    };
    Ok((0, out))
}

fn cmd_weight(a: &WeightArgs, pretty: bool) -> CliResult {
    let w: WeightSpec = a.spec.parse()?;
    let (json, text) = match &a.action {
        WeightAction::Mass { j, m, dim, level } => {
            w.validate(*dim)?;
            let cube = Cube::new(*j, parse_point(m, *dim).map_err(CliError)?);
            let rec = MassRecord {
                region: cube_region(&cube),
                quadrature: cube_mass(&w, &cube, *level),
                asymptotic: cube_mass_asymptotic(&w, &cube),
                cube,
            };
            let text = format!("quadrature {}\nasymptotic {}\n", rec.quadrature, rec.asymptotic);
            (to_json("weight mass", &rec)?, text)
        }
        WeightAction::Apconst { p, dim, k } => {
            let p = parse_rat(p)?;
            let est = ap_constant_estimate(&w, &p, &ApPlan::default_for(*dim, *k), *dim)?;
            let member = ap_membership(&w, &ExtRat::Finite(p.clone()), *dim)?;
            let text = format!(
                "sampled A_p constant {} at center {:?}, radius {}{}\nmembership {}\n",
                est.value,
                est.center,
                est.radius,
                if est.truncated { " (truncated dual integral)" } else { "" },
                member.scope_reason().unwrap_or(member.tag())
            );
            let rec = ApRecord { p: p.to_string(), estimate: est, membership: member.tag().to_string() };
            (to_json("weight apconst", &rec)?, text)
        }
        WeightAction::Singular { dim } => {
            w.validate(*dim)?;
            let rec = SingularRecord { singular: singular_set(&w) };
            let text = format!("{}\n", rec.singular.map_or("none".to_string(), |k| format!("{{0}}, {k:?}")));
            (to_json("weight singular", &rec)?, text)
        }
        WeightAction::Regcube { j, m, dim, ratio, depth } => {
            w.validate(*dim)?;
            let cube = Cube::new(*j, parse_point(m, *dim).map_err(CliError)?);
            let b = find_regularity_cube(&w, &cube, *ratio, *depth)?;
            let rec = RegCubeRecord { side: b.side(), oscillation: box_oscillation(&w, &b), cube: b };
            let text = format!("box lo={:?} / 2^{}, side {}, oscillation {}\n", rec.cube.lo, rec.cube.e, rec.side, rec.oscillation);
            (to_json("weight regcube", &rec)?, text)
        }
    };
    let out = if pretty { text } else { json };
    Ok((0, out))
}

/// Splices `--config` file entries in right after the subcommand path, so
/// that flags given on the command line (which come later) win.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let pos = args.iter().position(|a| a == "--config");
    let inline = args.iter().position(|a| a.to_string_lossy().starts_with("--config="));
    let (path, remove): (String, Vec<usize>) = match (pos, inline) {
        (Some(i), _) => {
            let p = args.get(i + 1).ok_or("--config needs a file")?.to_string_lossy().into_owned();
            (p, vec![i, i + 1])
        }
        (None, Some(i)) => (args[i].to_string_lossy()["--config=".len()..].to_string(), vec![i]),
        (None, None) => return Ok(args),
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
    let mut extra = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("{path}:{}: expected key=value", n + 1))?;
        let k = k.trim();
        let v = v.trim();
        if matches!(v, "true" | "") && matches!(k, "pretty") {
            extra.push(OsString::from(format!("--{k}")));
        } else {
            extra.push(OsString::from(format!("--{k}")));
            extra.push(OsString::from(v));
        }
    }
    let rest: Vec<OsString> = args.into_iter().enumerate().filter(|(i, _)| !remove.contains(i)).map(|(_, a)| a).collect();
    const SUBS: [&str; 5] = ["classify", "sweep", "verify-tong", "bound", "weight"];
    const ACTIONS: [&str; 4] = ["mass", "apconst", "singular", "regcube"];
    let mut at = rest.iter().position(|a| SUBS.iter().any(|s| a == *s)).map_or(rest.len(), |i| i + 1);
    if rest.get(at - 1).is_some_and(|a| a == "weight") {
        if let Some(i) = rest[at..].iter().position(|a| ACTIONS.iter().any(|s| a == *s)) {
            at += i + 1;
        }
    }
    let mut out = rest[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&rest[at..]);
    Ok(out)
}

/// Runs one invocation, writing to the given streams; returns the exit code.
pub fn run<W: Write, E: Write>(args: Vec<OsString>, out: &mut W, err: &mut E) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 3;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    return 0;
                }
                _ => 3,
            };
            let _ = write!(err, "{e}");
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 3;
        }
    };
    let res = pool.install(|| match &cli.command {
        Command::Classify(a) => cmd_classify(a, cli.pretty),
        Command::Sweep(a) => cmd_sweep(a),
        Command::VerifyTong(a) => cmd_verify(a, cli.seed, cli.pretty),
        Command::Bound(a) => cmd_bound(a, cli.pretty),
        Command::Weight(a) => cmd_weight(a, cli.pretty),
    });
    match res {
        Ok((code, text)) => {
            let _ = out.write_all(text.as_bytes());
            code
        }
        Err(CliError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            3
        }
    }
}

/// Re-serializes a machine document; identical bytes confirm a lossless round trip.
pub fn rerender(doc: &str) -> Result<String, serde_json::Error> {
    let v: Envelope<serde_json::Value> = serde_json::from_str(doc)?;
    let out = match v.command.as_str() {
        "classify" => serde_json::to_string(&serde_json::from_str::<Envelope<Vec<ClassificationDoc>>>(doc)?)?,
        "verify-tong" => serde_json::to_string(&serde_json::from_str::<Envelope<VerifyRecord>>(doc)?)?,
        "weight mass" => serde_json::to_string(&serde_json::from_str::<Envelope<MassRecord>>(doc)?)?,
        "weight apconst" => serde_json::to_string(&serde_json::from_str::<Envelope<ApRecord>>(doc)?)?,
        "weight singular" => serde_json::to_string(&serde_json::from_str::<Envelope<SingularRecord>>(doc)?)?,
        "weight regcube" => serde_json::to_string(&serde_json::from_str::<Envelope<RegCubeRecord>>(doc)?)?,
        "bound" => match serde_json::from_str::<Envelope<SeriesPair>>(doc) {
            Ok(e) => serde_json::to_string(&e)?,
            Err(_) => serde_json::to_string(&serde_json::from_str::<Envelope<WitnessReport>>(doc)?)?,
        },
        _ => serde_json::to_string(&v)?,
    };
    Ok(out + "\n")
}
