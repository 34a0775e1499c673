//! Compactness and nuclearity decisions for embeddings
//! `A^{s₁}_{p₁,q₁} ↪ A^{s₂}_{p₂,q₂}` on weighted `ℝᵈ`, on bounded domains and
//! on radial subspaces.
//!
//! Every decision is made by exact rational comparisons and returned
//! together with a [`ConditionTrace`]: the leaf inequalities plus the
//! all/any tree over them, from which the verdict can be re-derived.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{delta, pos_part, rat, tong_recip, ExtRat, Kind, Rat, SpaceParams};
use crate::verdict::Verdict;
use crate::weights::WeightSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("source dimension {0} differs from target dimension {1}")]
    DimensionMismatch(u32, u32),
    #[error("source and target must both be B-spaces or both F-spaces")]
    KindMismatch,
    #[error("invalid weight: {0}")]
    Weight(String),
    #[error("{0} does not apply to this setting")]
    WrongSetting(&'static str),
    #[error("cannot parse setting {0:?}")]
    Parse(String),
}

/// Where the embedding lives.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Setting {
    WeightedRn(WeightSpec),
    BoundedDomain,
    Radial,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::WeightedRn(w) => write!(f, "weight:{w}"),
            Setting::BoundedDomain => f.write_str("domain"),
            Setting::Radial => f.write_str("radial"),
        }
    }
}

impl FromStr for Setting {
    type Err = ClassifyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "domain" => Ok(Setting::BoundedDomain),
            "radial" => Ok(Setting::Radial),
            _ => {
                let spec = s.strip_prefix("weight:").ok_or_else(|| ClassifyError::Parse(s.to_string()))?;
                spec.parse().map(Setting::WeightedRn).map_err(|e| ClassifyError::Parse(format!("{spec}: {e}")))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Compact,
    Nuclear,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Compact => "compact",
            Mode::Nuclear => "nuclear",
        })
    }
}

impl FromStr for Mode {
    type Err = ClassifyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "compact" => Ok(Mode::Compact),
            "nuclear" => Ok(Mode::Nuclear),
            _ => Err(ClassifyError::Parse(s.to_string())),
        }
    }
}

/// A source space, a target space and the setting they live in.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EmbeddingQuery {
    pub src: SpaceParams,
    pub tgt: SpaceParams,
    pub setting: Setting,
}

impl EmbeddingQuery {
    pub fn new(src: SpaceParams, tgt: SpaceParams, setting: Setting) -> Result<Self, ClassifyError> {
        if src.d != tgt.d {
            return Err(ClassifyError::DimensionMismatch(src.d, tgt.d));
        }
        if src.kind != tgt.kind {
            return Err(ClassifyError::KindMismatch);
        }
        if let Setting::WeightedRn(w) = &setting {
            w.validate(src.d).map_err(|e| ClassifyError::Weight(e.to_string()))?;
        }
        Ok(EmbeddingQuery { src, tgt, setting })
    }

    pub fn dim(&self) -> u32 {
        self.src.d
    }

    pub fn kind(&self) -> Kind {
        self.src.kind
    }

    pub fn delta(&self) -> Rat {
        delta(&self.src, &self.tgt).expect("dimensions checked on construction")
    }

    pub fn weight(&self) -> Option<&WeightSpec> {
        match &self.setting {
            Setting::WeightedRn(w) => Some(w),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rel {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "≤")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "≥")]
    Ge,
}

impl Rel {
    pub fn holds(self, lhs: &ExtRat, rhs: &ExtRat) -> bool {
        match self {
            Rel::Lt => lhs < rhs,
            Rel::Le => lhs <= rhs,
            Rel::Eq => lhs == rhs,
            Rel::Gt => lhs > rhs,
            Rel::Ge => lhs >= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "≤",
            Rel::Eq => "=",
            Rel::Gt => ">",
            Rel::Ge => "≥",
        }
    }
}

/// One evaluated leaf inequality.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub label: String,
    pub lhs: ExtRat,
    pub rel: Rel,
    pub rhs: ExtRat,
    pub ok: bool,
    /// Name of the criterion the inequality belongs to.
    pub anchor: String,
}

/// Conjunction/disjunction tree over condition indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Logic {
    All(Vec<Logic>),
    Any(Vec<Logic>),
    Cond(usize),
}

impl Logic {
    pub fn eval(&self, conds: &[Condition]) -> bool {
        match self {
            Logic::All(v) => v.iter().all(|l| l.eval(conds)),
            Logic::Any(v) => v.iter().any(|l| l.eval(conds)),
            Logic::Cond(i) => conds[*i].ok,
        }
    }

    /// First leaf that makes the tree false, in reading order.
    fn first_failure(&self, conds: &[Condition]) -> Option<usize> {
        if self.eval(conds) {
            return None;
        }
        match self {
            Logic::Cond(i) => Some(*i),
            Logic::All(v) => v.iter().find_map(|l| l.first_failure(conds)),
            Logic::Any(v) => v.first().and_then(|l| l.first_failure(conds)),
        }
    }
}

/// How the leaves determine the verdict.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    /// Yes exactly when the tree holds.
    Iff(Logic),
    /// Yes when `sufficient` holds, No when `necessary` fails, otherwise out
    /// of scope with reason `gap`.
    Partial { sufficient: Logic, necessary: Logic, gap: String },
    /// Verdict fixed by a structural fact, independent of the leaves.
    Fixed { verdict: Verdict, reason: String },
    /// Outside every applicable criterion.
    Scope(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionTrace {
    pub conditions: Vec<Condition>,
    pub decision: Decision,
}

impl ConditionTrace {
    /// Recomputes the verdict from the recorded leaves and tree.
    pub fn reevaluate(&self) -> Verdict {
        let c = &self.conditions;
        match &self.decision {
            Decision::Iff(l) => Verdict::from_bool(l.eval(c)),
            Decision::Partial { sufficient, necessary, gap } => {
                if sufficient.eval(c) {
                    Verdict::Yes
                } else if !necessary.eval(c) {
                    Verdict::No
                } else {
                    Verdict::OutOfTheoremScope(gap.clone())
                }
            }
            Decision::Fixed { verdict, .. } => verdict.clone(),
            Decision::Scope(r) => Verdict::OutOfTheoremScope(r.clone()),
        }
    }

    /// Label of the condition that decides a No, the scope reason for an
    /// out-of-scope answer, `-` for Yes.
    pub fn binding(&self) -> String {
        let c = &self.conditions;
        let failing = |l: &Logic| l.first_failure(c).map(|i| c[i].label.clone());
        match &self.decision {
            Decision::Iff(l) => failing(l).unwrap_or_else(|| "-".into()),
            Decision::Partial { sufficient, necessary, gap } => {
                if sufficient.eval(c) {
                    "-".into()
                } else {
                    failing(necessary).unwrap_or_else(|| gap.clone())
                }
            }
            Decision::Fixed { verdict, reason } => {
                if verdict.is_yes() {
                    "-".into()
                } else {
                    reason.clone()
                }
            }
            Decision::Scope(r) => r.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub query: EmbeddingQuery,
    pub mode: Mode,
    pub verdict: Verdict,
    pub trace: ConditionTrace,
}

/// Accumulates leaves while a criterion is assembled.
struct Builder {
    conds: Vec<Condition>,
}

impl Builder {
    fn new() -> Self {
        Builder { conds: Vec::new() }
    }

    fn leaf(&mut self, label: &str, lhs: Rat, rel: Rel, rhs: Rat, anchor: &str) -> Logic {
        self.leaf_ext(label, ExtRat::Finite(lhs), rel, ExtRat::Finite(rhs), anchor)
    }

    fn leaf_ext(&mut self, label: &str, lhs: ExtRat, rel: Rel, rhs: ExtRat, anchor: &str) -> Logic {
        let ok = rel.holds(&lhs, &rhs);
        self.conds.push(Condition { label: label.to_string(), lhs, rel, rhs, ok, anchor: anchor.to_string() });
        Logic::Cond(self.conds.len() - 1)
    }

    fn finish(self, decision: Decision) -> ConditionTrace {
        ConditionTrace { conditions: self.conds, decision }
    }
}

fn fixed(verdict: Verdict, reason: &str) -> ConditionTrace {
    ConditionTrace { conditions: Vec::new(), decision: Decision::Fixed { verdict, reason: reason.to_string() } }
}

fn scope(reason: &str) -> ConditionTrace {
    ConditionTrace { conditions: Vec::new(), decision: Decision::Scope(reason.to_string()) }
}

const A_POWER_COMPACT: &str = "power-weight compactness";
const A_POWER_NUCLEAR: &str = "power-weight nuclearity";
const A_ADM_COMPACT: &str = "admissible-weight compactness";
const A_ADM_NUCLEAR: &str = "admissible-weight nuclearity";
const A_LOG_COMPACT: &str = "power-log-weight compactness";
const A_LOG_NUCLEAR: &str = "power-log-weight nuclearity";
const A_LOG_SUFFICIENT: &str = "power-log-weight nuclearity, non-limiting sufficient condition";
const A_PURELOG: &str = "pure-log-weight compactness and nuclearity";
const A_DOMAIN_COMPACT: &str = "bounded-domain compactness";
const A_DOMAIN_NUCLEAR: &str = "bounded-domain nuclearity";
const A_RADIAL_COMPACT: &str = "radial-subspace compactness";
const A_RADIAL_NUCLEAR: &str = "radial-subspace nuclearity";
const A_NECESSARY: &str = "weighted nuclearity necessary condition";

const R_UNWEIGHTED: &str =
    "L∞(ℝᵈ,w) = L∞(ℝᵈ) for every weight, and unweighted embeddings on ℝᵈ are never compact";
const R_CONSTANT: &str = "unweighted embeddings on ℝᵈ are never compact";
const S_F_FINITE_P: &str = "F-spaces require p<∞";
const S_B_ONLY: &str = "requires B-kind; only an almost complete characterisation is known for F-spaces";
const S_S_ORDER: &str = "requires s₂≤s₁";
const S_LOG_GAP: &str =
    "limiting case of power-log weights: only the non-limiting sufficient condition is known for F-kind or q₁=∞";

/// Exact scalars shared by all criteria.
struct Ctx {
    d: Rat,
    delta: Rat,
    inv_p1: Rat,
    inv_p2: Rat,
    /// `d/p*`.
    d_pstar: Rat,
    /// `1/p*`.
    inv_pstar: Rat,
    /// `1/q*`.
    inv_qstar: Rat,
}

impl Ctx {
    fn new(q: &EmbeddingQuery) -> Self {
        let inv_p1 = q.src.p.recip();
        let inv_p2 = q.tgt.p.recip();
        let d = rat(q.dim() as i64);
        let inv_pstar = pos_part(&(&inv_p2 - &inv_p1));
        let inv_qstar = pos_part(&(q.tgt.q.recip() - q.src.q.recip()));
        Ctx {
            d_pstar: &d * &inv_pstar,
            delta: q.delta(),
            d,
            inv_p1,
            inv_p2,
            inv_pstar,
            inv_qstar,
        }
    }

    /// `1/t(p₁,p₂)`; only meaningful for `p_i ≥ 1`.
    fn inv_t(&self, q: &EmbeddingQuery) -> Rat {
        tong_recip(&q.src.p, &q.tgt.p)
    }

    fn inv_tq(&self, q: &EmbeddingQuery) -> Rat {
        tong_recip(&q.src.q, &q.tgt.q)
    }
}

fn f_infinite_p(q: &EmbeddingQuery) -> bool {
    q.kind() == Kind::F && (q.src.p.is_inf() || q.tgt.p.is_inf())
}

/// First violated constraint of `1 ≤ p_i, q_i` (and `p_i < ∞` for F).
fn banach_scope(q: &EmbeddingQuery) -> Option<&'static str> {
    if f_infinite_p(q) {
        return Some(S_F_FINITE_P);
    }
    let checks = [
        (&q.src.p, "requires p₁≥1"),
        (&q.tgt.p, "requires p₂≥1"),
        (&q.src.q, "requires q₁≥1"),
        (&q.tgt.q, "requires q₂≥1"),
    ];
    checks.into_iter().find(|(v, _)| !v.at_least_one()).map(|(_, r)| r)
}

fn power_pair(q: &EmbeddingQuery, who: &'static str) -> Result<(Rat, Rat), ClassifyError> {
    match q.weight() {
        Some(WeightSpec::PolyPoly { alpha, beta }) => Ok((alpha.clone(), beta.clone())),
        _ => Err(ClassifyError::WrongSetting(who)),
    }
}

/// Compactness with `w_{α,β}`: `β/p₁ > d/p*` and `δ > max(d/p*, α/p₁)`.
pub fn classify_wab_compact(q: &EmbeddingQuery) -> Result<(Verdict, ConditionTrace), ClassifyError> {
    let (alpha, beta) = power_pair(q, "classify_wab_compact")?;
    let trace = if f_infinite_p(q) {
        scope(S_F_FINITE_P)
    } else if q.src.p.is_inf() {
        fixed(Verdict::No, R_UNWEIGHTED)
    } else if q.tgt.s > q.src.s {
        scope(S_S_ORDER)
    } else {
        let c = Ctx::new(q);
        let mut b = Builder::new();
        let l = Logic::All(vec![
            b.leaf("β/p₁ > d/p*", &beta * &c.inv_p1, Rel::Gt, c.d_pstar.clone(), A_POWER_COMPACT),
            b.leaf("δ > d/p*", c.delta.clone(), Rel::Gt, c.d_pstar.clone(), A_POWER_COMPACT),
            b.leaf("δ > α/p₁", c.delta.clone(), Rel::Gt, &alpha * &c.inv_p1, A_POWER_COMPACT),
        ]);
        b.finish(Decision::Iff(l))
    };
    Ok((trace.reevaluate(), trace))
}

/// Nuclearity with `w_{α,β}`: `β/p₁ > d/t` and `δ > max(d/t, α/p₁)`.
pub fn classify_wab_nuclear(q: &EmbeddingQuery) -> Result<(Verdict, ConditionTrace), ClassifyError> {
    let (alpha, beta) = power_pair(q, "classify_wab_nuclear")?;
    let trace = if let Some(r) = banach_scope(q) {
        scope(r)
    } else if q.src.p.is_inf() {
        fixed(Verdict::No, R_UNWEIGHTED)
    } else {
        let c = Ctx::new(q);
        let d_t = &c.d * c.inv_t(q);
        let mut b = Builder::new();
        let l = Logic::All(vec![
            b.leaf("β/p₁ > d/t(p₁,p₂)", &beta * &c.inv_p1, Rel::Gt, d_t.clone(), A_POWER_NUCLEAR),
            b.leaf("δ > d/t(p₁,p₂)", c.delta.clone(), Rel::Gt, d_t, A_POWER_NUCLEAR),
            b.leaf("δ > α/p₁", c.delta.clone(), Rel::Gt, &alpha * &c.inv_p1, A_POWER_NUCLEAR),
        ]);
        b.finish(Decision::Iff(l))
    };
    Ok((trace.reevaluate(), trace))
}

/// `⟨x⟩^β` weights, both modes.
pub fn classify_admissible(q: &EmbeddingQuery, mode: Mode) -> Result<(Verdict, ConditionTrace), ClassifyError> {
    let beta = match q.weight() {
        Some(WeightSpec::Admissible { beta }) => beta.clone(),
        _ => return Err(ClassifyError::WrongSetting("classify_admissible")),
    };
    let c = Ctx::new(q);
    let trace = match mode {
        Mode::Compact => {
            if f_infinite_p(q) {
                scope(S_F_FINITE_P)
            } else if q.src.p.is_inf() {
                fixed(Verdict::No, R_UNWEIGHTED)
            } else {
                let mut b = Builder::new();
                let l = Logic::All(vec![
                    b.leaf("β/p₁ > d/p*", &beta * &c.inv_p1, Rel::Gt, c.d_pstar.clone(), A_ADM_COMPACT),
                    b.leaf("δ > d/p*", c.delta.clone(), Rel::Gt, c.d_pstar.clone(), A_ADM_COMPACT),
                ]);
                b.finish(Decision::Iff(l))
            }
        }
        Mode::Nuclear => {
            if let Some(r) = banach_scope(q) {
                scope(r)
            } else if q.src.p.is_inf() {
                fixed(Verdict::No, R_UNWEIGHTED)
            } else {
                let d_t = &c.d * c.inv_t(q);
                let mut b = Builder::new();
                let l = Logic::All(vec![
                    b.leaf("β/p₁ > d/t(p₁,p₂)", &beta * &c.inv_p1, Rel::Gt, d_t.clone(), A_ADM_NUCLEAR),
                    b.leaf("δ > d/t(p₁,p₂)", c.delta.clone(), Rel::Gt, d_t, A_ADM_NUCLEAR),
                ]);
                b.finish(Decision::Iff(l))
            }
        }
    };
    Ok((trace.reevaluate(), trace))
}

fn log_quad(q: &EmbeddingQuery, who: &'static str) -> Result<[Rat; 4], ClassifyError> {
    match q.weight() {
        Some(WeightSpec::PolyLog { a1, a2, b1, b2 }) => Ok([a1.clone(), a2.clone(), b1.clone(), b2.clone()]),
        _ => Err(ClassifyError::WrongSetting(who)),
    }
}

/// Limiting-aware pair of disjunctions shared by the power-log criteria.
///
/// `thr` is the dimensional threshold (`d/p*` or `d/t`), `inv_thr_b` the
/// secondary threshold for `β₂/p₁`, `inv_thr_a` the one for `α₂/p₁`.
#[allow(clippy::too_many_arguments)]
fn log_tree(
    b: &mut Builder,
    c: &Ctx,
    w: &[Rat; 4],
    thr: &Rat,
    thr_name: &str,
    inv_thr_b: &Rat,
    inv_b_name: &str,
    inv_thr_a: &Rat,
    inv_a_name: &str,
    anchor: &str,
) -> (Logic, Logic) {
    let [a1, a2, b1, b2] = w;
    let a1p = a1 * &c.inv_p1;
    let b1p = b1 * &c.inv_p1;
    let beta_part = Logic::Any(vec![
        b.leaf(&format!("β₁/p₁ > {thr_name}"), b1p.clone(), Rel::Gt, thr.clone(), anchor),
        Logic::All(vec![
            b.leaf(&format!("β₁/p₁ = {thr_name}"), b1p, Rel::Eq, thr.clone(), anchor),
            b.leaf(&format!("β₂/p₁ > {inv_b_name}"), b2 * &c.inv_p1, Rel::Gt, inv_thr_b.clone(), anchor),
        ]),
    ]);
    let delta_part = Logic::Any(vec![
        Logic::All(vec![
            b.leaf("δ > α₁/p₁", c.delta.clone(), Rel::Gt, a1p.clone(), anchor),
            b.leaf(&format!("δ > {thr_name}"), c.delta.clone(), Rel::Gt, thr.clone(), anchor),
        ]),
        Logic::All(vec![
            b.leaf("δ = α₁/p₁", c.delta.clone(), Rel::Eq, a1p.clone(), anchor),
            b.leaf(&format!("α₁/p₁ > {thr_name}"), a1p, Rel::Gt, thr.clone(), anchor),
            b.leaf(&format!("α₂/p₁ > {inv_a_name}"), a2 * &c.inv_p1, Rel::Gt, inv_thr_a.clone(), anchor),
        ]),
    ]);
    (beta_part, delta_part)
}

/// Compactness with power-log weights (B-kind).
pub fn classify_wlog_compact(q: &EmbeddingQuery) -> Result<(Verdict, ConditionTrace), ClassifyError> {
    let w = log_quad(q, "classify_wlog_compact")?;
    let trace = if q.kind() == Kind::F {
        scope(S_B_ONLY)
    } else if q.src.p.is_inf() {
        fixed(Verdict::No, R_UNWEIGHTED)
    } else {
        let c = Ctx::new(q);
        let mut b = Builder::new();
        let (bp, dp) =
            log_tree(&mut b, &c, &w, &c.d_pstar, "d/p*", &c.inv_pstar, "1/p*", &c.inv_qstar, "1/q*", A_LOG_COMPACT);
        b.finish(Decision::Iff(Logic::All(vec![bp, dp])))
    };
    Ok((trace.reevaluate(), trace))
}

/// Nuclearity with power-log weights.
///
/// Full characterisation for B-kind with `q₁ < ∞`. Otherwise Yes comes only
/// from the non-limiting sufficient condition and No only from `δ ≤ d/t` or,
/// for B-kind, from failed compactness; the band in between is out of scope.
pub fn classify_wlog_nuclear(q: &EmbeddingQuery) -> Result<(Verdict, ConditionTrace), ClassifyError> {
    let w = log_quad(q, "classify_wlog_nuclear")?;
    if let Some(r) = banach_scope(q) {
        return Ok((Verdict::OutOfTheoremScope(r.into()), scope(r)));
    }
    if q.src.p.is_inf() {
        let t = fixed(Verdict::No, R_UNWEIGHTED);
        return Ok((t.reevaluate(), t));
    }
    let c = Ctx::new(q);
    let inv_t = c.inv_t(q);
    let d_t = &c.d * &inv_t;
    let inv_tq = c.inv_tq(q);
    let mut b = Builder::new();
    let trace = if q.kind() == Kind::B && !q.src.q.is_inf() {
        let (bp, dp) = log_tree(&mut b, &c, &w, &d_t, "d/t(p₁,p₂)", &inv_t, "1/t(p₁,p₂)", &inv_tq, "1/t(q₁,q₂)", A_LOG_NUCLEAR);
        b.finish(Decision::Iff(Logic::All(vec![bp, dp])))
    } else {
        let [a1, _, b1, b2] = &w;
        let b1p = b1 * &c.inv_p1;
        let sufficient = Logic::All(vec![
            Logic::Any(vec![
                b.leaf("β₁/p₁ > d/t(p₁,p₂)", b1p.clone(), Rel::Gt, d_t.clone(), A_LOG_SUFFICIENT),
                Logic::All(vec![
                    b.leaf("β₁/p₁ = d/t(p₁,p₂)", b1p, Rel::Eq, d_t.clone(), A_LOG_SUFFICIENT),
                    b.leaf("β₂/p₁ > 1/t(p₁,p₂)", b2 * &c.inv_p1, Rel::Gt, inv_t.clone(), A_LOG_SUFFICIENT),
                ]),
            ]),
            b.leaf("δ > α₁/p₁", c.delta.clone(), Rel::Gt, a1 * &c.inv_p1, A_LOG_SUFFICIENT),
            b.leaf("δ > d/t(p₁,p₂)", c.delta.clone(), Rel::Gt, d_t.clone(), A_LOG_SUFFICIENT),
        ]);
        let mut nec = vec![b.leaf("δ > d/t(p₁,p₂)", c.delta.clone(), Rel::Gt, d_t.clone(), A_NECESSARY)];
        if q.kind() == Kind::B {
            let (bp, dp) =
                log_tree(&mut b, &c, &w, &c.d_pstar, "d/p*", &c.inv_pstar, "1/p*", &c.inv_qstar, "1/q*", A_LOG_COMPACT);
            nec.push(bp);
            nec.push(dp);
        }
        b.finish(Decision::Partial { sufficient, necessary: Logic::All(nec), gap: S_LOG_GAP.to_string() })
    };
    Ok((trace.reevaluate(), trace))
}

/// Purely logarithmic weights: compact iff `δ > 0`, `p₁ ≤ p₂`, `γ₂ > 0`;
/// nuclear iff `δ > 0`, `γ₂ > 0`, `p₁ = 1`, `p₂ = ∞`.
pub fn classify_purelog(q: &EmbeddingQuery, mode: Mode) -> Result<(Verdict, ConditionTrace), ClassifyError> {
    let g2 = match q.weight() {
        Some(WeightSpec::PureLog { g2, .. }) => g2.clone(),
        _ => return Err(ClassifyError::WrongSetting("classify_purelog")),
    };
    let trace = if let Some(r) = banach_scope(q) {
        scope(r)
    } else if q.src.p.is_inf() {
        fixed(Verdict::No, R_UNWEIGHTED)
    } else {
        let c = Ctx::new(q);
        let mut b = Builder::new();
        let mut leaves = vec![
            b.leaf("δ > 0", c.delta.clone(), Rel::Gt, Rat::zero(), A_PURELOG),
            b.leaf("γ₂ > 0", g2, Rel::Gt, Rat::zero(), A_PURELOG),
        ];
        match mode {
            Mode::Compact => {
                leaves.push(b.leaf_ext("p₁ ≤ p₂", q.src.p.clone(), Rel::Le, q.tgt.p.clone(), A_PURELOG));
            }
            Mode::Nuclear => {
                leaves.push(b.leaf_ext("p₁ = 1", q.src.p.clone(), Rel::Eq, ExtRat::int(1), A_PURELOG));
                leaves.push(b.leaf_ext("p₂ = ∞", q.tgt.p.clone(), Rel::Eq, ExtRat::Inf, A_PURELOG));
            }
        }
        b.finish(Decision::Iff(Logic::All(leaves)))
    };
    Ok((trace.reevaluate(), trace))
}

/// Bounded domains: compact iff `δ > d/p*`, nuclear iff `δ > d/t`.
pub fn classify_domain(q: &EmbeddingQuery, mode: Mode) -> Result<(Verdict, ConditionTrace), ClassifyError> {
    if q.setting != Setting::BoundedDomain {
        return Err(ClassifyError::WrongSetting("classify_domain"));
    }
    let c = Ctx::new(q);
    let trace = match mode {
        Mode::Compact => {
            if f_infinite_p(q) {
                scope(S_F_FINITE_P)
            } else {
                let mut b = Builder::new();
                let l = b.leaf(
                    "s₁−s₂ > d(1/p₁−1/p₂)₊",
                    &q.src.s - &q.tgt.s,
                    Rel::Gt,
                    &c.d * pos_part(&(&c.inv_p1 - &c.inv_p2)),
                    A_DOMAIN_COMPACT,
                );
                b.finish(Decision::Iff(l))
            }
        }
        Mode::Nuclear => {
            if let Some(r) = banach_scope(q) {
                scope(r)
            } else {
                let mut b = Builder::new();
                let l = b.leaf("δ > d/t(p₁,p₂)", c.delta.clone(), Rel::Gt, &c.d * c.inv_t(q), A_DOMAIN_NUCLEAR);
                b.finish(Decision::Iff(l))
            }
        }
    };
    Ok((trace.reevaluate(), trace))
}

/// Radial subspaces: compact iff `s₁−s₂ > d(1/p₁−1/p₂) > 0` and `d > 1`;
/// nuclear iff `s₁−s₂ > d(1/p₁−1/p₂) > 1`.
pub fn classify_radial(q: &EmbeddingQuery, mode: Mode) -> Result<(Verdict, ConditionTrace), ClassifyError> {
    if q.setting != Setting::Radial {
        return Err(ClassifyError::WrongSetting("classify_radial"));
    }
    let trace = if let Some(r) = banach_scope(q) {
        scope(r)
    } else {
        let c = Ctx::new(q);
        let gap = &c.d * (&c.inv_p1 - &c.inv_p2);
        let ds = &q.src.s - &q.tgt.s;
        let mut b = Builder::new();
        let l = match mode {
            Mode::Compact => Logic::All(vec![
                b.leaf("s₁−s₂ > d(1/p₁−1/p₂)", ds, Rel::Gt, gap.clone(), A_RADIAL_COMPACT),
                b.leaf("d(1/p₁−1/p₂) > 0", gap, Rel::Gt, Rat::zero(), A_RADIAL_COMPACT),
                b.leaf("d > 1", c.d.clone(), Rel::Gt, Rat::one(), A_RADIAL_COMPACT),
            ]),
            Mode::Nuclear => Logic::All(vec![
                b.leaf("s₁−s₂ > d(1/p₁−1/p₂)", ds, Rel::Gt, gap.clone(), A_RADIAL_NUCLEAR),
                b.leaf("d(1/p₁−1/p₂) > 1", gap, Rel::Gt, Rat::one(), A_RADIAL_NUCLEAR),
            ]),
        };
        b.finish(Decision::Iff(l))
    };
    Ok((trace.reevaluate(), trace))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NecessityVerdict {
    CannotBeNuclear,
    Inconclusive,
}

/// The weight-independent necessary condition `δ > d/t(p₁,p₂)`.
pub fn necessary_nuclear_generic(q: &EmbeddingQuery) -> Result<(NecessityVerdict, ConditionTrace), ClassifyError> {
    if q.weight().is_none() {
        return Err(ClassifyError::WrongSetting("necessary_nuclear_generic"));
    }
    if let Some(r) = banach_scope(q).or(q.src.p.is_inf().then_some("requires p₁<∞")) {
        return Ok((NecessityVerdict::Inconclusive, scope(r)));
    }
    let c = Ctx::new(q);
    let mut b = Builder::new();
    let l = b.leaf("δ > d/t(p₁,p₂)", c.delta.clone(), Rel::Gt, &c.d * c.inv_t(q), A_NECESSARY);
    let ok = l.eval(&b.conds);
    // Recorded as "Yes iff the necessary condition holds"; Yes here only means
    // "not excluded".
    let trace = b.finish(Decision::Iff(l));
    Ok((if ok { NecessityVerdict::Inconclusive } else { NecessityVerdict::CannotBeNuclear }, trace))
}

/// Dispatches to the criterion matching the setting and weight.
pub fn classify(q: &EmbeddingQuery, mode: Mode) -> Classification {
    let res = match (&q.setting, mode) {
        (Setting::BoundedDomain, m) => classify_domain(q, m),
        (Setting::Radial, m) => classify_radial(q, m),
        (Setting::WeightedRn(w), m) => match (w, m) {
            (WeightSpec::PolyPoly { .. }, Mode::Compact) => classify_wab_compact(q),
            (WeightSpec::PolyPoly { .. }, Mode::Nuclear) => classify_wab_nuclear(q),
            (WeightSpec::PolyLog { .. }, Mode::Compact) => classify_wlog_compact(q),
            (WeightSpec::PolyLog { .. }, Mode::Nuclear) => classify_wlog_nuclear(q),
            (WeightSpec::PureLog { .. }, m) => classify_purelog(q, m),
            (WeightSpec::Admissible { .. }, m) => classify_admissible(q, m),
            (WeightSpec::Constant, m) => Ok(constant_weight(q, m)),
        },
    };
    let (verdict, trace) = res.expect("dispatch matches setting");
    Classification { query: q.clone(), mode, verdict, trace }
}

fn constant_weight(q: &EmbeddingQuery, mode: Mode) -> (Verdict, ConditionTrace) {
    let out_of = match mode {
        Mode::Compact => f_infinite_p(q).then_some(S_F_FINITE_P),
        Mode::Nuclear => banach_scope(q),
    };
    let t = match out_of {
        Some(r) => scope(r),
        None => fixed(Verdict::No, R_CONSTANT),
    };
    (t.reevaluate(), t)
}

/// Serialized form of one space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceDoc {
    pub s: String,
    pub p: ExtRat,
    pub q: ExtRat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryDoc {
    pub dim: u32,
    pub kind: String,
    pub src: SpaceDoc,
    pub tgt: SpaceDoc,
    pub setting: String,
}

impl From<&EmbeddingQuery> for QueryDoc {
    fn from(q: &EmbeddingQuery) -> Self {
        let sp = |p: &SpaceParams| SpaceDoc { s: p.s.to_string(), p: p.p.clone(), q: p.q.clone() };
        QueryDoc {
            dim: q.dim(),
            kind: q.kind().to_string(),
            src: sp(&q.src),
            tgt: sp(&q.tgt),
            setting: q.setting.to_string(),
        }
    }
}

/// Machine-readable record of one classification.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationDoc {
    pub query: QueryDoc,
    pub mode: Mode,
    pub verdict: String,
    /// Violated scope constraint for out-of-scope answers.
    pub scope: Option<String>,
    pub conditions: Vec<Condition>,
    pub logic: Decision,
}

impl From<&Classification> for ClassificationDoc {
    fn from(c: &Classification) -> Self {
        ClassificationDoc {
            query: (&c.query).into(),
            mode: c.mode,
            verdict: c.verdict.tag().to_string(),
            scope: c.verdict.scope_reason().map(str::to_string),
            conditions: c.trace.conditions.clone(),
            logic: c.trace.decision.clone(),
        }
    }
}

impl ClassificationDoc {
    /// Re-derives the verdict tag from the recorded leaves.
    pub fn reevaluate(&self) -> Verdict {
        ConditionTrace { conditions: self.conditions.clone(), decision: self.logic.clone() }.reevaluate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::frac;

    fn sp(kind: Kind, s: Rat, p: &str, q: &str, d: u32) -> SpaceParams {
        SpaceParams::new(kind, s, p.parse().unwrap(), q.parse().unwrap(), d).unwrap()
    }

    fn query(d: u32, s1: Rat, p1: &str, q1: &str, s2: Rat, p2: &str, q2: &str, setting: &str) -> EmbeddingQuery {
        EmbeddingQuery::new(
            sp(Kind::B, s1, p1, q1, d),
            sp(Kind::B, s2, p2, q2, d),
            setting.parse().unwrap(),
        )
        .unwrap()
    }

    fn both(q: &EmbeddingQuery) -> (Verdict, Verdict) {
        (classify(q, Mode::Compact).verdict, classify(q, Mode::Nuclear).verdict)
    }

    #[test]
    fn wab_compact_examples() {
        let q = query(1, frac(4, 5), "2", "2", rat(0), "2", "2", "weight:poly:a=0,b=4");
        assert_eq!(classify_wab_compact(&q).unwrap().0, Verdict::Yes);
        let q = query(1, frac(4, 5), "2", "2", rat(0), "2", "2", "weight:poly:a=0,b=0");
        assert_eq!(classify_wab_compact(&q).unwrap().0, Verdict::No);
        let q = query(1, rat(2), "2", "2", rat(0), "1", "2", "weight:poly:a=0,b=4");
        assert_eq!(classify_wab_compact(&q).unwrap().0, Verdict::Yes);
    }

    #[test]
    fn wab_nuclear_examples() {
        let q = query(1, rat(2), "2", "2", rat(0), "2", "2", "weight:poly:a=0,b=3");
        assert_eq!(classify_wab_nuclear(&q).unwrap().0, Verdict::Yes);
        let q = query(1, frac(4, 5), "2", "2", rat(0), "2", "2", "weight:poly:a=0,b=4");
        assert_eq!(both(&q), (Verdict::Yes, Verdict::No));
        let q = query(1, rat(3), "1", "1", rat(0), "inf", "1", "weight:poly:a=1/2,b=2");
        assert_eq!(both(&q), (Verdict::Yes, Verdict::Yes));
    }

    #[test]
    fn sub_one_q_is_out_of_nuclear_scope_only() {
        let q = query(1, rat(2), "2", "1/2", rat(0), "2", "2", "weight:poly:a=0,b=3");
        let (c, n) = both(&q);
        assert_eq!(c, Verdict::Yes);
        assert_eq!(n.scope_reason(), Some("requires q₁≥1"));
    }

    #[test]
    fn infinite_p1_is_never_compact() {
        let q = query(1, rat(5), "inf", "2", rat(0), "inf", "2", "weight:poly:a=0,b=3");
        assert_eq!(both(&q), (Verdict::No, Verdict::No));
        assert!(matches!(classify(&q, Mode::Compact).trace.decision, Decision::Fixed { .. }));
    }

    #[test]
    fn admissible_examples() {
        let q = query(2, rat(3), "2", "2", rat(0), "2", "2", "weight:adm:b=5");
        assert_eq!(classify_admissible(&q, Mode::Nuclear).unwrap().0, Verdict::Yes);
        let q = query(2, rat(3), "2", "2", rat(0), "2", "2", "weight:adm:b=0");
        assert_eq!(both(&q), (Verdict::No, Verdict::No));
        let q = query(1, rat(2), "1", "2", rat(0), "inf", "2", "weight:adm:b=1");
        assert_eq!(classify_admissible(&q, Mode::Nuclear).unwrap().0, Verdict::Yes);
    }

    #[test]
    fn wlog_compact_examples() {
        // δ = 1 with p₁ = 1, p₂ = 2: s₁ − 1 − s₂ + 1/2 = 1.
        let q = query(1, frac(3, 2), "1", "2", rat(0), "2", "2", "weight:polylog:a1=0,a2=0,b1=1,b2=0");
        assert_eq!(classify_wlog_compact(&q).unwrap().0, Verdict::Yes);
        // p₁ = p₂ = 2, β₁ = 0, β₂ = 1 passes through the limiting β-branch.
        let q = query(1, rat(1), "2", "2", rat(0), "2", "2", "weight:polylog:a1=0,a2=0,b1=0,b2=1");
        assert_eq!(classify_wlog_compact(&q).unwrap().0, Verdict::Yes);
        let q = query(1, rat(1), "2", "2", rat(0), "2", "2", "weight:polylog:a1=0,a2=0,b1=0,b2=0");
        assert_eq!(classify_wlog_compact(&q).unwrap().0, Verdict::No);
        // δ = α₁/p₁ = 1 with q₁ ≤ q₂ needs α₂/p₁ > 0.
        let q = query(1, rat(1), "2", "1", rat(0), "2", "2", "weight:polylog:a1=2,a2=1,b1=2,b2=0");
        assert_eq!(classify_wlog_compact(&q).unwrap().0, Verdict::Yes);
        let q = query(1, rat(1), "2", "1", rat(0), "2", "2", "weight:polylog:a1=2,a2=0,b1=2,b2=0");
        assert_eq!(classify_wlog_compact(&q).unwrap().0, Verdict::No);
    }

    #[test]
    fn wlog_nuclear_examples() {
        let q = query(1, rat(2), "1", "1", rat(0), "2", "2", "weight:polylog:a1=0,a2=0,b1=1/2,b2=1");
        assert_eq!(classify_wlog_nuclear(&q).unwrap().0, Verdict::Yes);
        let q = query(1, rat(2), "1", "1", rat(0), "2", "2", "weight:polylog:a1=0,a2=0,b1=1/2,b2=1/2");
        assert_eq!(classify_wlog_nuclear(&q).unwrap().0, Verdict::No);
        // δ = α₁/p₁ = 1 > 1/2 with t(q) = ∞: any α₂ > 0.
        let q = query(1, frac(3, 2), "1", "1", rat(0), "2", "inf", "weight:polylog:a1=1,a2=1/10,b1=3,b2=0");
        assert_eq!(classify_wlog_nuclear(&q).unwrap().0, Verdict::Yes);
    }

    #[test]
    fn wlog_outside_full_scope() {
        let f = |s1: Rat, b: &str| {
            EmbeddingQuery::new(
                sp(Kind::F, s1, "1", "2", 1),
                sp(Kind::F, rat(0), "2", "2", 1),
                format!("weight:{b}").parse().unwrap(),
            )
            .unwrap()
        };
        // Non-limiting: sufficient condition holds.
        assert_eq!(classify_wlog_nuclear(&f(rat(2), "polylog:a1=0,a2=0,b1=1,b2=0")).unwrap().0, Verdict::Yes);
        // δ = 1/2 = d/t: necessary condition fails.
        assert_eq!(classify_wlog_nuclear(&f(rat(1), "polylog:a1=0,a2=0,b1=1,b2=0")).unwrap().0, Verdict::No);
        // δ = α₁/p₁ limiting band: refused.
        let v = classify_wlog_nuclear(&f(rat(2), "polylog:a1=3/2,a2=5,b1=1,b2=0")).unwrap().0;
        assert_eq!(v.scope_reason(), Some(S_LOG_GAP));
        let q = EmbeddingQuery::new(
            sp(Kind::F, rat(1), "2", "2", 1),
            sp(Kind::F, rat(0), "2", "2", 1),
            "weight:polylog:a1=0,a2=0,b1=1,b2=0".parse().unwrap(),
        )
        .unwrap();
        assert_eq!(classify_wlog_compact(&q).unwrap().0.scope_reason(), Some(S_B_ONLY));
    }

    #[test]
    fn purelog_examples() {
        let q = query(1, rat(2), "1", "1", rat(0), "inf", "1", "weight:purelog:g1=0,g2=1");
        assert_eq!(classify_purelog(&q, Mode::Nuclear).unwrap().0, Verdict::Yes);
        let q = query(1, rat(1), "2", "2", rat(0), "2", "2", "weight:purelog:g1=0,g2=1");
        assert_eq!(both(&q), (Verdict::Yes, Verdict::No));
        let q = query(1, rat(1), "2", "2", rat(0), "2", "2", "weight:purelog:g1=0,g2=0");
        assert_eq!(both(&q), (Verdict::No, Verdict::No));
    }

    #[test]
    fn domain_examples() {
        let q = query(1, frac(1, 2), "2", "2", rat(0), "2", "2", "domain");
        assert_eq!(both(&q), (Verdict::Yes, Verdict::No));
        for (s1, want) in [(rat(1), false), (frac(11, 10), true)] {
            let q = query(1, s1, "1", "2", rat(0), "inf", "2", "domain");
            assert_eq!(classify(&q, Mode::Nuclear).verdict, Verdict::from_bool(want));
        }
        for (s1, want) in [(rat(0), false), (frac(1, 100), true)] {
            let q = query(3, s1, "inf", "2", rat(0), "1", "2", "domain");
            assert_eq!(classify(&q, Mode::Nuclear).verdict, Verdict::from_bool(want));
        }
    }

    #[test]
    fn radial_examples() {
        let q = query(2, frac(5, 2), "1", "2", rat(0), "inf", "2", "radial");
        assert_eq!(classify(&q, Mode::Nuclear).verdict, Verdict::Yes);
        let q = query(1, rat(10), "1", "2", rat(0), "inf", "2", "radial");
        assert_eq!(classify(&q, Mode::Nuclear).verdict, Verdict::No);
        let q = query(2, rat(10), "2", "2", rat(0), "2", "2", "radial");
        assert_eq!(classify(&q, Mode::Compact).verdict, Verdict::No);
    }

    #[test]
    fn generic_necessity() {
        // δ = d/t = 1 exactly.
        let q = query(1, rat(1), "2", "2", rat(0), "2", "2", "weight:poly:a=0,b=3");
        assert_eq!(necessary_nuclear_generic(&q).unwrap().0, NecessityVerdict::CannotBeNuclear);
        let q = query(1, rat(50), "2", "2", rat(0), "2", "2", "weight:const");
        assert_eq!(necessary_nuclear_generic(&q).unwrap().0, NecessityVerdict::Inconclusive);
        assert_eq!(classify(&q, Mode::Compact).verdict, Verdict::No);
        let q = query(1, rat(3), "2", "2", rat(0), "2", "2", "weight:poly:a=0,b=3");
        assert_eq!(necessary_nuclear_generic(&q).unwrap().0, NecessityVerdict::Inconclusive);
    }

    #[test]
    fn trace_reevaluates_and_round_trips() {
        let q = query(1, rat(2), "1", "1", rat(0), "2", "2", "weight:polylog:a1=0,a2=0,b1=1/2,b2=1");
        let c = classify(&q, Mode::Nuclear);
        let doc = ClassificationDoc::from(&c);
        let text = serde_json::to_string(&doc).unwrap();
        let back: ClassificationDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
        assert_eq!(back.reevaluate(), c.verdict);
    }

    #[test]
    fn binding_names_failed_leaf() {
        let q = query(1, frac(4, 5), "2", "2", rat(0), "2", "2", "weight:poly:a=0,b=4");
        assert_eq!(classify(&q, Mode::Nuclear).trace.binding(), "δ > d/t(p₁,p₂)");
        assert_eq!(classify(&q, Mode::Compact).trace.binding(), "-");
    }

    #[test]
    fn mismatched_spaces_are_rejected() {
        let a = sp(Kind::B, rat(1), "2", "2", 1);
        let b = sp(Kind::F, rat(0), "2", "2", 1);
        assert_eq!(EmbeddingQuery::new(a.clone(), b, Setting::BoundedDomain), Err(ClassifyError::KindMismatch));
        let c = sp(Kind::B, rat(0), "2", "2", 2);
        assert_eq!(EmbeddingQuery::new(a, c, Setting::BoundedDomain), Err(ClassifyError::DimensionMismatch(1, 2)));
    }
}
