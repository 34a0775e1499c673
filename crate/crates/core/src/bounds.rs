//! Quantitative side of the nuclearity criteria: the dyadic sum asymptotics
//! `Σ_{k≤j} 2^{kγ} k^κ`, the two level-by-level series bounding the nuclear
//! norm of a weighted embedding (inner cubes `|m| < 2^j` and outer cubes
//! `|m| ≥ 2^j`), and finite-section witnesses that grow without bound when a
//! necessary condition fails.

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::EmbeddingQuery;
use crate::exponents::{rat, rat_to_f64, tong_exponent, tong_recip, ExtRat, Rat};
use crate::nucdiag::identity_nuclear_norm_log2;
use crate::quad::compensated_sum;
use crate::seqmodel::{layer_power_sum, lt_norm_of_layer, outer_tail, LatticeConfig, LayerSpec, SeqError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("outside the nuclearity scope: {0}")]
    Scope(String),
    #[error("series bounds need a weighted query with a power, power-log, pure-log or admissible weight")]
    WrongSetting,
    #[error("outer cutoff {m} must be at least 2^(J-1) = {min}")]
    Cutoff { m: u64, min: u64 },
    #[error(transparent)]
    Seq(#[from] SeqError),
}

/// Case of the growth table for `Σ_{k=1}^j 2^{kγ} k^κ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LemmaBranch {
    /// `γ > 0`: `2^{jγ} j^κ`.
    Exponential,
    /// `γ < 0`, or `γ = 0` with `κ < −1`: bounded.
    Bounded,
    /// `γ = 0`, `κ > −1`: `j^{1+κ}`.
    Polynomial,
    /// `γ = 0`, `κ = −1`: `log(1 + j)`.
    Logarithmic,
}

pub fn lemma_branch(gamma: &Rat, kappa: &Rat) -> LemmaBranch {
    if gamma.is_positive() {
        LemmaBranch::Exponential
    } else if gamma.is_negative() {
        LemmaBranch::Bounded
    } else {
        let m1 = -Rat::one();
        if *kappa < m1 {
            LemmaBranch::Bounded
        } else if *kappa > m1 {
            LemmaBranch::Polynomial
        } else {
            LemmaBranch::Logarithmic
        }
    }
}

/// Growth surrogate for `Σ_{k=1}^j 2^{kγ} k^κ`.
pub fn lemma_surrogate(gamma: &Rat, kappa: &Rat, j: u32) -> f64 {
    let jf = j.max(1) as f64;
    let g = rat_to_f64(gamma);
    let k = rat_to_f64(kappa);
    match lemma_branch(gamma, kappa) {
        LemmaBranch::Exponential => 2f64.powf(jf * g) * jf.powf(k),
        LemmaBranch::Bounded => 1.0,
        LemmaBranch::Polynomial => jf.powf(1.0 + k),
        LemmaBranch::Logarithmic => (1.0 + jf).ln(),
    }
}

/// `(Σ_{k=1}^j 2^{kγ} k^κ, surrogate)`.
pub fn lemma_sum(gamma: &Rat, kappa: &Rat, j: u32) -> (f64, f64) {
    let g = rat_to_f64(gamma);
    let k = rat_to_f64(kappa);
    let exact = compensated_sum((1..=j).map(|i| 2f64.powf(i as f64 * g) * (i as f64).powf(k)));
    (exact, lemma_surrogate(gamma, kappa, j))
}

/// `exact / surrogate`, evaluated without forming `2^{jγ}` so large `j` stay finite.
pub fn lemma_ratio(gamma: &Rat, kappa: &Rat, j: u32) -> f64 {
    if lemma_branch(gamma, kappa) != LemmaBranch::Exponential {
        let (e, s) = lemma_sum(gamma, kappa, j);
        return e / s;
    }
    let g = rat_to_f64(gamma);
    let k = rat_to_f64(kappa);
    let jf = j as f64;
    compensated_sum((1..=j).map(|i| 2f64.powf((i as f64 - jf) * g) * (i as f64 / jf).powf(k)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailCertificate {
    /// Terms decay like `2^{-j·rate}` up to polynomial factors; `rate > 0` exactly.
    Geometric { rate: ExtRat },
    Divergent { mode: String },
    Inconclusive { reason: String },
}

/// Partial sums of one of the level series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub regime: String,
    /// Criterion whose branch supplied the certificate.
    pub anchor: String,
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub certificate: TailCertificate,
}

impl SeriesReport {
    fn from_terms(regime: &str, anchor: &str, terms: Vec<f64>, certificate: TailCertificate) -> Self {
        let mut acc = 0.0;
        let partial_sums = terms
            .iter()
            .map(|t| {
                acc += t;
                acc
            })
            .collect();
        SeriesReport { regime: regime.into(), anchor: anchor.into(), terms, partial_sums, certificate }
    }

    pub fn is_geometric(&self) -> bool {
        matches!(self.certificate, TailCertificate::Geometric { .. })
    }

    /// Bound on `Σ_{i ≥ j} term_i` for a geometrically certified report:
    /// `term_j / (1 − ρ)`, with `ρ` the larger of `2^{-rate}` and the worst
    /// ratio of consecutive computed terms from `j` on.
    pub fn tail_bound(&self, j: usize) -> Option<f64> {
        let TailCertificate::Geometric { rate } = &self.certificate else {
            return None;
        };
        let first = *self.terms.get(j)?;
        let mut rho = 2f64.powf(-rate.to_f64());
        for w in self.terms[j..].windows(2) {
            if w[0] > 0.0 {
                rho = rho.max(w[1] / w[0]);
            }
        }
        (rho < 1.0).then(|| first / (1.0 - rho))
    }
}

/// Exponents shared by both series.
struct SeriesCtx {
    d: u32,
    delta: Rat,
    /// `α₁/p₁, α₂/p₁`.
    inner: (Rat, Rat),
    /// `β₁/p₁, β₂/p₁`.
    outer: (Rat, Rat),
    t: ExtRat,
    inv_t: Rat,
    inv_tq: Rat,
    tq: ExtRat,
}

impl SeriesCtx {
    fn new(q: &EmbeddingQuery) -> Result<Self, BoundsError> {
        let w = q.weight().ok_or(BoundsError::WrongSetting)?;
        if matches!(w, crate::weights::WeightSpec::Constant) {
            return Err(BoundsError::WrongSetting);
        }
        let checks = [
            (&q.src.p, "requires p₁≥1"),
            (&q.tgt.p, "requires p₂≥1"),
            (&q.src.q, "requires q₁≥1"),
            (&q.tgt.q, "requires q₂≥1"),
        ];
        if let Some((_, r)) = checks.iter().find(|(v, _)| !v.at_least_one()) {
            return Err(BoundsError::Scope(r.to_string()));
        }
        if q.src.p.is_inf() {
            return Err(BoundsError::Scope("requires p₁<∞".into()));
        }
        let ip1 = q.src.p.recip();
        let ((a1, a2), (b1, b2)) = w.power_log_exponents();
        Ok(SeriesCtx {
            d: q.dim(),
            delta: q.delta(),
            inner: (a1 * &ip1, a2 * &ip1),
            outer: (b1 * &ip1, b2 * &ip1),
            t: tong_exponent(&q.src.p, &q.tgt.p),
            inv_t: tong_recip(&q.src.p, &q.tgt.p),
            inv_tq: tong_recip(&q.src.q, &q.tgt.q),
            tq: tong_exponent(&q.src.q, &q.tgt.q),
        })
    }

    fn d_t(&self) -> Rat {
        rat(self.d as i64) * &self.inv_t
    }
}

const ANCHOR_INNER: &str = "inner-cube level series";
const ANCHOR_INNER_LIMIT: &str = "inner-cube series, limiting power with log tail in ℓ_t(q₁,q₂)";
const ANCHOR_OUTER: &str = "outer-cube level series";

/// `ℓ_t` norm of the inner layer at level `j` together with its `m = 0` entry.
fn inner_level_norm(ctx: &SeriesCtx, j: u32, cfg: &LatticeConfig) -> Result<f64, SeqError> {
    let spec = LayerSpec::inner(j, ctx.d, ctx.inner.0.clone(), ctx.inner.1.clone());
    let origin = spec.origin_term();
    if j == 0 {
        return Ok(origin);
    }
    match &ctx.t {
        ExtRat::Inf => Ok(lt_norm_of_layer(&spec, &ctx.t, cfg)?.max(origin)),
        ExtRat::Finite(t) => {
            let tf = rat_to_f64(t);
            Ok((layer_power_sum(&spec, tf, cfg)? + origin.powf(tf)).powf(1.0 / tf))
        }
    }
}

/// `‖{|m|^{-a}}_{2^{j-1} ≤ |m| < 2^j}‖_t`, with `j = 0` the origin alone.
fn annulus_norm(ctx: &SeriesCtx, j: u32, a: &Rat, cfg: &LatticeConfig) -> Result<f64, SeqError> {
    if j == 0 {
        return Ok(1.0);
    }
    match &ctx.t {
        ExtRat::Inf => Ok(2f64.powf(-((j - 1) as f64) * rat_to_f64(a))),
        ExtRat::Finite(t) => {
            let tf = rat_to_f64(t);
            let hi = layer_power_sum(&LayerSpec::inner(j, ctx.d, a.clone(), Rat::zero()), tf, cfg)?;
            let lo = if j == 1 {
                0.0
            } else {
                layer_power_sum(&LayerSpec::inner(j - 1, ctx.d, a.clone(), Rat::zero()), tf, cfg)?
            };
            Ok((hi - lo).max(0.0).powf(1.0 / tf))
        }
    }
}

/// `‖{k^{-b}}_{k ≥ max(j,1)}‖_r`; `None` if infinite.
fn power_tail_norm(j: u32, b: &Rat, r: &ExtRat) -> Option<f64> {
    let k0 = j.max(1) as f64;
    let bf = rat_to_f64(b);
    match r {
        ExtRat::Inf => (!b.is_negative()).then(|| k0.powf(-bf)),
        ExtRat::Finite(rr) => {
            let s = b * rr;
            if s <= Rat::one() {
                return None;
            }
            let sf = rat_to_f64(&s);
            let n = 64.0;
            let head = compensated_sum((0..64).map(|i| (k0 + i as f64).powf(-sf)));
            // Euler-Maclaurin for Σ_{k ≥ K} k^{-s}.
            let kk = k0 + n;
            let tail = kk.powf(1.0 - sf) / (sf - 1.0) + 0.5 * kk.powf(-sf) + sf / 12.0 * kk.powf(-sf - 1.0)
                - sf * (sf + 1.0) * (sf + 2.0) / 720.0 * kk.powf(-sf - 3.0);
            Some((head + tail).powf(1.0 / rat_to_f64(rr)))
        }
    }
}

/// Partial sums `Σ_{j<J} 2^{-j(δ − α₁/p₁)} ν(id^j)` of the inner-cube series.
pub fn nu_id1_series(q: &EmbeddingQuery, big_j: u32, cfg: &LatticeConfig) -> Result<SeriesReport, BoundsError> {
    let ctx = SeriesCtx::new(q)?;
    let (a, b) = ctx.inner.clone();
    let d_t = ctx.d_t();
    let delta = ctx.delta.clone();
    let top = if a > d_t { a.clone() } else { d_t.clone() };
    if delta > top {
        let lead = rat_to_f64(&(&delta - &a));
        let terms = (0..big_j)
            .into_par_iter()
            .map(|j| Ok(2f64.powf(-(j as f64) * lead) * inner_level_norm(&ctx, j, cfg)?))
            .collect::<Result<Vec<_>, SeqError>>()?;
        let regime = if a > d_t { "δ > α₁/p₁ > d/t" } else { "δ > d/t ≥ α₁/p₁" };
        return Ok(SeriesReport::from_terms(
            regime,
            ANCHOR_INNER,
            terms,
            TailCertificate::Geometric { rate: ExtRat::Finite(&delta - top) },
        ));
    }
    if delta == a && a > d_t {
        if b <= ctx.inv_tq {
            return Ok(SeriesReport::from_terms(
                "δ = α₁/p₁ > d/t",
                ANCHOR_INNER_LIMIT,
                Vec::new(),
                TailCertificate::Divergent { mode: "α₂/p₁ ≤ 1/t(q₁,q₂): log tail not summable".into() },
            ));
        }
        let terms = (0..big_j)
            .into_par_iter()
            .map(|j| {
                let tail = power_tail_norm(j, &b, &ctx.tq).expect("summable by the branch condition");
                Ok(annulus_norm(&ctx, j, &a, cfg)? * tail)
            })
            .collect::<Result<Vec<_>, SeqError>>()?;
        return Ok(SeriesReport::from_terms(
            "δ = α₁/p₁ > d/t",
            ANCHOR_INNER_LIMIT,
            terms,
            TailCertificate::Geometric { rate: ExtRat::Finite(&a - &d_t) },
        ));
    }
    let lead = rat_to_f64(&(&delta - &a));
    let terms = (0..big_j)
        .into_par_iter()
        .map(|j| Ok(2f64.powf(-(j as f64) * lead) * inner_level_norm(&ctx, j, cfg)?))
        .collect::<Result<Vec<_>, SeqError>>()?;
    Ok(SeriesReport::from_terms(
        "δ ≤ max(α₁/p₁, d/t)",
        ANCHOR_INNER,
        terms,
        TailCertificate::Divergent { mode: "δ-condition fails".into() },
    ))
}

/// Partial sums `Σ_{j<J} 2^{-j(δ − β₁/p₁)} ν(ĩd^j)` of the outer-cube series,
/// with lattice sums up to `|m| ≤ M` and an integral bound beyond.
pub fn nu_id2_series(
    q: &EmbeddingQuery,
    big_j: u32,
    m: u64,
    cfg: &LatticeConfig,
) -> Result<SeriesReport, BoundsError> {
    let ctx = SeriesCtx::new(q)?;
    let min = 1u64 << big_j.saturating_sub(1);
    if m < min {
        return Err(BoundsError::Cutoff { m, min });
    }
    let (a, b) = ctx.outer.clone();
    let d_t = ctx.d_t();
    let level_ok = match &ctx.t {
        ExtRat::Finite(_) => a > d_t || (a == d_t && b > ctx.inv_t),
        ExtRat::Inf => a.is_positive() || (a.is_zero() && !b.is_negative()),
    };
    if !level_ok {
        return Ok(SeriesReport::from_terms(
            "per-level norm infinite",
            ANCHOR_OUTER,
            Vec::new(),
            TailCertificate::Divergent { mode: "per-level".into() },
        ));
    }
    let lead = rat_to_f64(&(&ctx.delta - &a));
    let terms = (0..big_j)
        .into_par_iter()
        .map(|j| {
            let spec = LayerSpec::outer(j, ctx.d, m, a.clone(), b.clone());
            let norm = match &ctx.t {
                ExtRat::Inf => lt_norm_of_layer(&spec, &ctx.t, cfg)?,
                ExtRat::Finite(t) => {
                    let tf = rat_to_f64(t);
                    let tail = outer_tail(&spec, &ctx.t).expect("finite by the per-level condition");
                    (layer_power_sum(&spec, tf, cfg)? + tail).powf(1.0 / tf)
                }
            };
            Ok(2f64.powf(-(j as f64) * lead) * norm)
        })
        .collect::<Result<Vec<_>, SeqError>>()?;
    let cert = if ctx.delta > d_t {
        TailCertificate::Geometric { rate: ExtRat::Finite(&ctx.delta - &d_t) }
    } else {
        TailCertificate::Divergent { mode: "δ ≤ d/t".into() }
    };
    Ok(SeriesReport::from_terms("β-condition holds", ANCHOR_OUTER, terms, cert))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WitnessMode {
    /// Truncated far-field weight sequence; grows when the β-condition fails.
    Global,
    /// Finite-dimensional identity at one level; grows when `δ < d/t`.
    Local,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessStatus {
    Unbounded,
    /// The parameters sit on the boundary where this witness stays bounded
    /// although the necessary condition fails.
    NonConclusiveWitness,
    Bounded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub mode: WitnessMode,
    /// Values for `k = 1..=K`.
    pub values: Vec<f64>,
    /// Least-squares slope of `log value` against `log k` over the last half.
    pub slope: f64,
    pub strictly_increasing: bool,
    pub status: WitnessStatus,
}

/// The finite-section quantity at size `k`.
pub fn divergence_witness(q: &EmbeddingQuery, mode: WitnessMode, k: u32, cfg: &LatticeConfig) -> Result<f64, BoundsError> {
    let ctx = SeriesCtx::new(q)?;
    witness_value(&ctx, q, mode, k, cfg)
}

fn witness_value(
    ctx: &SeriesCtx,
    q: &EmbeddingQuery,
    mode: WitnessMode,
    k: u32,
    cfg: &LatticeConfig,
) -> Result<f64, BoundsError> {
    match mode {
        WitnessMode::Global => {
            let spec = LayerSpec::inner(k, ctx.d, ctx.outer.0.clone(), ctx.outer.1.clone());
            Ok(lt_norm_of_layer(&spec, &ctx.t, cfg)?)
        }
        WitnessMode::Local => {
            let log2_n = (k * ctx.d) as f64;
            let nu = identity_nuclear_norm_log2(log2_n, &q.src.p, &q.tgt.p);
            Ok(nu * 2f64.powf(-(k as f64) * rat_to_f64(&ctx.delta)))
        }
    }
}

fn witness_status(ctx: &SeriesCtx, mode: WitnessMode) -> WitnessStatus {
    let d_t = ctx.d_t();
    match mode {
        WitnessMode::Global => {
            let (a, b) = &ctx.outer;
            if a < &d_t || (a == &d_t && ctx.t.is_inf() && b.is_negative()) {
                WitnessStatus::Unbounded
            } else if a == &d_t && !ctx.t.is_inf() && b <= &ctx.inv_t {
                WitnessStatus::Unbounded
            } else if a == &d_t && ctx.t.is_inf() && b.is_zero() {
                WitnessStatus::NonConclusiveWitness
            } else {
                WitnessStatus::Bounded
            }
        }
        WitnessMode::Local => {
            if ctx.delta < d_t {
                WitnessStatus::Unbounded
            } else if ctx.delta == d_t {
                WitnessStatus::NonConclusiveWitness
            } else {
                WitnessStatus::Bounded
            }
        }
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Witness values for `k = 1..=K` with growth diagnostics.
pub fn witness_report(
    q: &EmbeddingQuery,
    mode: WitnessMode,
    big_k: u32,
    cfg: &LatticeConfig,
) -> Result<WitnessReport, BoundsError> {
    let ctx = SeriesCtx::new(q)?;
    let values = (1..=big_k)
        .into_par_iter()
        .map(|k| witness_value(&ctx, q, mode, k, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let half = (big_k as usize) / 2;
    let ks: Vec<f64> = (half + 1..=big_k as usize).map(|k| k as f64).collect();
    let slope = if ks.len() >= 2 { loglog_slope(&ks, &values[half..]) } else { f64::NAN };
    let strictly_increasing = values[half..].windows(2).all(|w| w[1] > w[0]);
    Ok(WitnessReport {
        mode,
        values,
        slope: if slope.is_finite() { slope } else { 0.0 },
        strictly_increasing,
        status: witness_status(&ctx, mode),
    })
}
