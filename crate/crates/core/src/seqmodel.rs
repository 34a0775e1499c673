//! Finitely supported weighted sequence spaces `b^σ_{p,q}(w)` and mixed
//! `ℓ_q(ℓ_p)`, the inner/outer splitting `|m| < 2^j` versus `|m| ≥ 2^j`,
//! and the per-level diagonal weight vectors with their `ℓ_t` norms.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::lemma_surrogate;
use crate::exponents::{rat, rat_to_f64, ExtRat, Rat};
use crate::quad;
use crate::weights::{cube_mass_asymptotic, Cube, WeightSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeqError {
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("lattice point has dimension {got}, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("outer region cutoff {cutoff} is below 2^j = {min}")]
    Cutoff { cutoff: u64, min: u64 },
}

/// Coefficients `λ_{j,m}` with finite support; zeros are never stored.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SeqCoeffs {
    pub d: usize,
    entries: BTreeMap<(u32, Vec<i64>), f64>,
}

impl SeqCoeffs {
    pub fn new(d: usize) -> Self {
        SeqCoeffs { d, entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, j: u32, m: Vec<i64>, v: f64) -> Result<(), SeqError> {
        if m.len() != self.d {
            return Err(SeqError::Dimension { got: m.len(), expected: self.d });
        }
        if v == 0.0 {
            self.entries.remove(&(j, m));
        } else {
            self.entries.insert((j, m), v);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[i64], f64)> {
        self.entries.iter().map(|((j, m), v)| (*j, m.as_slice(), *v))
    }

    /// Parses lines `j m1 .. md value`; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, d: usize) -> Result<Self, SeqError> {
        let mut out = SeqCoeffs::new(d);
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != d + 2 {
                return Err(SeqError::Parse(no + 1, format!("expected {} fields", d + 2)));
            }
            let bad = |what: &str| SeqError::Parse(no + 1, format!("bad {what}"));
            let j: u32 = toks[0].parse().map_err(|_| bad("level"))?;
            let m = toks[1..=d]
                .iter()
                .map(|t| t.parse::<i64>().map_err(|_| bad("lattice coordinate")))
                .collect::<Result<Vec<_>, _>>()?;
            let v: f64 = toks[d + 1].parse().map_err(|_| bad("value"))?;
            out.insert(j, m, v)?;
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (j, m, v) in self.iter() {
            let _ = write!(s, "{j}");
            for k in m {
                let _ = write!(s, " {k}");
            }
            let _ = writeln!(s, " {v}");
        }
        s
    }

    /// Per-level entries, ordered by level.
    fn levels(&self) -> BTreeMap<u32, Vec<(&[i64], f64)>> {
        let mut out: BTreeMap<u32, Vec<(&[i64], f64)>> = BTreeMap::new();
        for (j, m, v) in self.iter() {
            out.entry(j).or_default().push((m, v));
        }
        out
    }
}

/// `ℓ_r` norm of the absolute values; `r = ∞` is the maximum.
pub fn lr_norm<I: IntoIterator<Item = f64>>(vals: I, r: &ExtRat) -> f64 {
    match r {
        ExtRat::Inf => vals.into_iter().fold(0.0, |a, v| a.max(v.abs())),
        ExtRat::Finite(r) => {
            let r = rat_to_f64(r);
            quad::compensated_sum(vals.into_iter().map(|v| v.abs().powf(r))).powf(1.0 / r)
        }
    }
}

/// `‖{2^{jσ}(Σ_m |λ_{j,m}|^p 2^{jd} w(Q_{j,m}))^{1/p}}_j | ℓ_q‖` with the
/// closed-form cube masses.
pub fn besov_seq_norm(lam: &SeqCoeffs, sigma: &Rat, p: &ExtRat, q: &ExtRat, w: &WeightSpec) -> f64 {
    let sg = rat_to_f64(sigma);
    let d = lam.d as i32;
    let per_level: Vec<f64> = lam
        .levels()
        .into_iter()
        .map(|(j, row)| {
            let scale = 2f64.powi(j as i32 * d);
            let inner = match p {
                ExtRat::Inf => row.iter().fold(0.0f64, |a, (_, v)| a.max(v.abs())),
                ExtRat::Finite(pr) => {
                    let pf = rat_to_f64(pr);
                    let terms = row.iter().map(|(m, v)| {
                        let wq = cube_mass_asymptotic(w, &Cube::new(j, m.to_vec())) * scale;
                        v.abs().powf(pf) * wq
                    });
                    quad::compensated_sum(terms).powf(1.0 / pf)
                }
            };
            2f64.powf(j as f64 * sg) * inner
        })
        .collect();
    lr_norm(per_level, q)
}

/// `ℓ_q` over levels of `ℓ_p` over lattice points.
pub fn mixed_norm(lam: &SeqCoeffs, p: &ExtRat, q: &ExtRat) -> f64 {
    let per_level: Vec<f64> = lam.levels().into_values().map(|row| lr_norm(row.into_iter().map(|(_, v)| v), p)).collect();
    lr_norm(per_level, q)
}

/// `|m| < 2^j` exactly, via integer arithmetic.
pub fn is_inner(j: u32, m: &[i64]) -> bool {
    let n2: u128 = m.iter().map(|&k| (k as i128 * k as i128) as u128).sum();
    n2 < 1u128 << (2 * j)
}

/// Splits `λ` into the part supported on `|m| < 2^j` and the rest.
pub fn split_inner_outer(lam: &SeqCoeffs) -> (SeqCoeffs, SeqCoeffs) {
    let mut inner = SeqCoeffs::new(lam.d);
    let mut outer = SeqCoeffs::new(lam.d);
    for ((j, m), v) in &lam.entries {
        let dst = if is_inner(*j, m) { &mut inner } else { &mut outer };
        dst.entries.insert((*j, m.clone()), *v);
    }
    (inner, outer)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// `1 ≤ |m| < 2^j`.
    Inner,
    /// `2^j ≤ |m| ≤ cutoff`.
    Outer { cutoff: u64 },
}

/// Per-level diagonal weights `|m|^{-a}(1 ∓ log|2^{-j}m|)^{-b}` over a lattice region
/// (`−` on the inner region, `+` on the outer one).
#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub j: u32,
    pub d: u32,
    pub region: Region,
    /// `a`, e.g. `α/p₁` or `β/p₁`.
    pub power: Rat,
    /// `b`, e.g. `α₂/p₁` or `β₂/p₁`.
    pub log: Rat,
}

impl LayerSpec {
    pub fn inner(j: u32, d: u32, power: Rat, log: Rat) -> Self {
        LayerSpec { j, d, region: Region::Inner, power, log }
    }

    pub fn outer(j: u32, d: u32, cutoff: u64, power: Rat, log: Rat) -> Self {
        LayerSpec { j, d, region: Region::Outer { cutoff }, power, log }
    }

    fn check(&self) -> Result<(), SeqError> {
        if let Region::Outer { cutoff } = self.region {
            let min = 1u64 << self.j;
            if cutoff < min {
                return Err(SeqError::Cutoff { cutoff, min });
            }
        }
        Ok(())
    }

    /// Value at radius `ρ = |m|`.
    pub fn value_at(&self, rho: f64) -> f64 {
        self.evaluator().at(rho)
    }

    /// Float form of the profile for hot loops.
    pub fn evaluator(&self) -> LayerFn {
        LayerFn {
            a: rat_to_f64(&self.power),
            b: rat_to_f64(&self.log),
            inv_scale: 0.5f64.powi(self.j as i32),
            inner: self.region == Region::Inner,
        }
    }

    /// Stand-in for the `m = 0` entry: `(1 + j)^{-b}`.
    pub fn origin_term(&self) -> f64 {
        (1.0 + self.j as f64).powf(-rat_to_f64(&self.log))
    }

    /// Radial interval `[lo, hi]` of the region in units of `|m|²`: `(lo², hi²)` inclusive.
    fn norm_sq_range(&self) -> (u128, u128) {
        match self.region {
            Region::Inner => (1, (1u128 << (2 * self.j)) - 1),
            Region::Outer { cutoff } => (1u128 << (2 * self.j), cutoff as u128 * cutoff as u128),
        }
    }

    fn max_coord(&self) -> i64 {
        match self.region {
            Region::Inner => (1i64 << self.j) - 1,
            Region::Outer { cutoff } => cutoff as i64,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LayerFn {
    a: f64,
    b: f64,
    inv_scale: f64,
    inner: bool,
}

impl LayerFn {
    pub fn at(&self, rho: f64) -> f64 {
        let x = (rho * self.inv_scale).ln();
        let l = if self.inner { 1.0 - x } else { 1.0 + x };
        let v = rho.powf(-self.a);
        if self.b == 0.0 {
            v
        } else {
            v * l.powf(-self.b)
        }
    }
}

/// Lattice points of `[-r, r]^d` in order of `(|m|_∞, m)`.
fn shell_ordered_points(d: usize, r: i64) -> Vec<Vec<i64>> {
    let mut pts = Vec::new();
    let mut cur = vec![-r; d];
    loop {
        pts.push(cur.clone());
        let mut k = d;
        loop {
            if k == 0 {
                pts.sort_by_key(|m| (m.iter().map(|v| v.abs()).max().unwrap_or(0), m.clone()));
                return pts;
            }
            k -= 1;
            cur[k] += 1;
            if cur[k] <= r {
                break;
            }
            cur[k] = -r;
        }
    }
}

/// The enumerated layer vector. An empty inner region (`j = 0`) yields the
/// single `m = 0` stand-in.
pub fn layer_weight_vector(spec: &LayerSpec) -> Result<Vec<f64>, SeqError> {
    spec.check()?;
    let (lo, hi) = spec.norm_sq_range();
    let f = spec.evaluator();
    let vals: Vec<f64> = shell_ordered_points(spec.d as usize, spec.max_coord())
        .into_iter()
        .filter_map(|m| {
            let n2: u128 = m.iter().map(|&k| (k as i128 * k as i128) as u128).sum();
            (lo <= n2 && n2 <= hi).then(|| f.at((n2 as f64).sqrt()))
        })
        .collect();
    if vals.is_empty() && spec.region == Region::Inner {
        return Ok(vec![spec.origin_term()]);
    }
    Ok(vals)
}

/// Above which dyadic shell `2^{k-1} ≤ |m| < 2^k` lattice sums are replaced by
/// radial integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub exact_shells_d1: u32,
    pub exact_shells_d2: u32,
    pub exact_shells_higher: u32,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig { exact_shells_d1: 10, exact_shells_d2: 7, exact_shells_higher: 4 }
    }
}

impl LatticeConfig {
    pub fn exact_radius(&self, d: u32) -> u64 {
        let k = match d {
            1 => self.exact_shells_d1,
            2 => self.exact_shells_d2,
            _ => self.exact_shells_higher,
        };
        1u64 << k
    }
}

/// Surface measure of the unit sphere in `ℝᵈ`.
pub fn sphere_area(d: u32) -> f64 {
    // Γ(d/2) by the recursion from Γ(1/2) = √π or Γ(1) = 1.
    let mut g = if d % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut x = if d % 2 == 0 { 1.0 } else { 0.5 };
    while x < d as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / g
}

/// Calls `f(|m|²)` for all lattice points with `lo ≤ |m|² ≤ hi`.
fn for_each_norm_sq<F: FnMut(u128)>(d: usize, lo: u128, hi: u128, f: &mut F) {
    fn rec<F: FnMut(u128)>(d: usize, acc: u128, lo: u128, hi: u128, f: &mut F) {
        if d == 0 {
            if acc >= lo {
                f(acc);
            }
            return;
        }
        let rem = hi - acc;
        let r = (rem as f64).sqrt() as i64 + 1;
        for k in -r..=r {
            let k2 = (k as i128 * k as i128) as u128;
            if acc + k2 <= hi {
                rec(d - 1, acc + k2, lo, hi, f);
            }
        }
    }
    if lo <= hi {
        rec(d, 0, lo, hi, f);
    }
}

/// `∫` over `ρ ∈ [lo, hi]` of `g(ρ) σ_{d-1} ρ^{d-1}`, split at powers of two.
fn radial_integral<G: Fn(f64) -> f64>(g: &G, lo: f64, hi: f64, d: u32) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let h = |r: f64| g(r) * r.powi(d as i32 - 1);
    let mut cuts = vec![lo];
    let mut c = 2f64.powi(lo.log2().floor() as i32 + 1);
    while c < hi {
        cuts.push(c);
        c *= 2.0;
    }
    cuts.push(hi);
    let s: f64 = cuts
        .windows(2)
        .map(|w| quad::adaptive(&h, w[0], w[1], 1e-12).unwrap_or_else(|e| e.estimate))
        .sum();
    s * sphere_area(d)
}

/// `Σ g(|m|)^t` over the region for finite `t` (the `t`-th power of the `ℓ_t` norm).
pub fn layer_power_sum(spec: &LayerSpec, t: f64, cfg: &LatticeConfig) -> Result<f64, SeqError> {
    spec.check()?;
    let (lo, hi) = spec.norm_sq_range();
    let rex = cfg.exact_radius(spec.d) as u128;
    let f = spec.evaluator();
    let mut terms = Vec::new();
    let ex_hi = hi.min(rex * rex - 1);
    for_each_norm_sq(spec.d as usize, lo, ex_hi, &mut |n2| terms.push(f.at((n2 as f64).sqrt()).powf(t)));
    let mut total = quad::compensated_sum(terms);
    if hi > ex_hi {
        // Lattice points with |m| ≥ rex. In d = 1 the count of integers in
        // [a, b] matches the length of [a − 1/2, b + 1/2]; for d ≥ 2 the
        // count inside a ball already matches its volume.
        let shift = if spec.d == 1 { 0.5 } else { 0.0 };
        let r0 = ((lo.max(rex * rex)) as f64).sqrt() - shift;
        let r1 = (hi as f64).sqrt() + shift;
        total += radial_integral(&|r| f.at(r).powf(t), r0, r1, spec.d);
    }
    Ok(total)
}

/// `sup g(|m|)` over the region.
fn layer_sup(spec: &LayerSpec, cfg: &LatticeConfig) -> Result<f64, SeqError> {
    spec.check()?;
    let (lo, hi) = spec.norm_sq_range();
    let rex = cfg.exact_radius(spec.d) as u128;
    let ex_hi = hi.min(rex * rex - 1);
    let f = spec.evaluator();
    let mut best: f64 = 0.0;
    for_each_norm_sq(spec.d as usize, lo, ex_hi, &mut |n2| best = best.max(f.at((n2 as f64).sqrt())));
    if hi > ex_hi {
        let r0 = ((lo.max(rex * rex)) as f64).sqrt();
        let r1 = (hi as f64).sqrt();
        let a = rat_to_f64(&spec.power);
        let b = rat_to_f64(&spec.log);
        let mut cands = vec![r0, r1];
        if a != 0.0 {
            let scale = 2f64.powi(spec.j as i32);
            let crit = match spec.region {
                Region::Inner => scale * (1.0 - b / a).exp(),
                Region::Outer { .. } => scale * (-1.0 - b / a).exp(),
            };
            if r0 < crit && crit < r1 {
                cands.push(crit);
            }
        }
        for r in cands {
            best = best.max(spec.value_at(r));
        }
    }
    Ok(best)
}

/// `ℓ_t` norm of the layer vector (the `m = 0` stand-in only for an empty inner region).
pub fn lt_norm_of_layer(spec: &LayerSpec, t: &ExtRat, cfg: &LatticeConfig) -> Result<f64, SeqError> {
    spec.check()?;
    if spec.region == Region::Inner && spec.j == 0 {
        return Ok(spec.origin_term());
    }
    match t {
        ExtRat::Inf => layer_sup(spec, cfg),
        ExtRat::Finite(tr) => {
            let tf = rat_to_f64(tr);
            Ok(layer_power_sum(spec, tf, cfg)?.powf(1.0 / tf))
        }
    }
}

/// Upper estimate of `Σ_{|m| > cutoff} g(|m|)^t` beyond an outer cutoff, by
/// comparison with the radial integral; `None` when the full sum diverges.
pub fn outer_tail(spec: &LayerSpec, t: &ExtRat) -> Option<f64> {
    let Region::Outer { cutoff } = spec.region else {
        return Some(0.0);
    };
    let ExtRat::Finite(tr) = t else {
        return Some(0.0);
    };
    let s = &spec.power * tr;
    let bt = &spec.log * tr;
    let dd = rat(spec.d as i64);
    if s < dd || (s == dd && bt <= rat(1)) {
        return None;
    }
    let tf = rat_to_f64(tr);
    // The unit cube around a lattice point m with |m| > M lies in
    // |x| ≥ |m| − √d/2, so for a decreasing profile
    // Σ_{|m|>M} g(|m|)^t ≤ σ ∫_{M−√d}^∞ g(u)^t (u + √d/2)^{d−1} du.
    let half = (spec.d as f64).sqrt() / 2.0;
    let u0 = (cutoff as f64 - 2.0 * half).max(1.0);
    let dm1 = spec.d as i32 - 1;
    let f = spec.evaluator();
    let tail = if s > dd {
        let h = |v: f64| {
            if v <= 0.0 {
                return 0.0;
            }
            let u = u0 / v;
            f.at(u).powf(tf) * (u + half).powi(dm1) * u0 / (v * v)
        };
        quad::shells_toward_left(&h, 0.0, 1.0, 1e-10, None).ok()?.value
    } else {
        // s = d: ∫ u^{-d}(1 + log(u/2^j))^{-bt} u^{d-1} du in closed form.
        let l0 = 1.0 + (u0 * 0.5f64.powi(spec.j as i32)).ln();
        if l0 <= 0.0 {
            return None;
        }
        let btf = rat_to_f64(&bt);
        (1.0 + half / u0).powi(dm1) * l0.powf(1.0 - btf) / (btf - 1.0)
    };
    Some(tail * sphere_area(spec.d))
}

/// Closed-form growth of `Σ g(|m|)^t` over the region (of `sup g` when
/// `t = ∞`), per three-regime dyadic counting; `None` when the sum diverges.
pub fn layer_surrogate(spec: &LayerSpec, t: &ExtRat) -> Option<f64> {
    let j = spec.j as f64;
    let a = &spec.power;
    let b = &spec.log;
    let dd = rat(spec.d as i64);
    match t {
        ExtRat::Inf => {
            let af = rat_to_f64(a);
            let bf = rat_to_f64(b);
            match spec.region {
                Region::Inner => Some(if a.is_positive() || (a.is_zero() && b.is_negative()) {
                    (1.0 + j).powf(-bf)
                } else if a.is_negative() {
                    2f64.powf(-j * af)
                } else {
                    1.0
                }),
                Region::Outer { .. } => {
                    if a.is_positive() {
                        Some(2f64.powf(-j * af))
                    } else if a.is_zero() && !b.is_negative() {
                        Some(1.0)
                    } else {
                        None
                    }
                }
            }
        }
        ExtRat::Finite(tr) => {
            let s = a * tr;
            let gap = rat_to_f64(&(&dd - &s));
            match spec.region {
                Region::Inner => {
                    let gamma = &s - &dd;
                    let kappa = -(b * tr);
                    Some(2f64.powf(j * gap) * lemma_surrogate(&gamma, &kappa, spec.j))
                }
                Region::Outer { .. } => {
                    let bt = b * tr;
                    if s > dd || (s == dd && bt > rat(1)) {
                        Some(2f64.powf(j * gap))
                    } else {
                        None
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::frac;
    use approx::assert_relative_eq;

    fn e(s: &str) -> ExtRat {
        s.parse().unwrap()
    }

    #[test]
    fn besov_examples() {
        let mut l = SeqCoeffs::new(1);
        l.insert(3, vec![5], 1.0).unwrap();
        assert_relative_eq!(besov_seq_norm(&l, &frac(1, 2), &e("2"), &e("2"), &WeightSpec::Constant), 2f64.powf(1.5));
        let mut l2 = SeqCoeffs::new(1);
        l2.insert(0, vec![0], 3.0).unwrap();
        l2.insert(0, vec![1], 4.0).unwrap();
        assert_relative_eq!(besov_seq_norm(&l2, &rat(0), &e("2"), &e("1"), &WeightSpec::Constant), 5.0);
        let mut l3 = SeqCoeffs::new(2);
        l3.insert(4, vec![0, 0], 1.0).unwrap();
        let w = WeightSpec::poly(frac(3, 2), rat(1));
        let v = besov_seq_norm(&l3, &rat(1), &e("3"), &e("inf"), &w);
        assert_relative_eq!(v, 2f64.powf(4.0) * 2f64.powf(-4.0 * 1.5 / 3.0), max_relative = 1e-14);
    }

    #[test]
    fn mixed_examples() {
        let mut l = SeqCoeffs::new(1);
        l.insert(2, vec![7], -2.5).unwrap();
        assert_eq!(mixed_norm(&l, &e("3"), &e("inf")), 2.5);
        let mut l2 = SeqCoeffs::new(1);
        l2.insert(0, vec![0], 1.0).unwrap();
        l2.insert(1, vec![0], 1.0).unwrap();
        assert_eq!(mixed_norm(&l2, &e("1"), &e("1")), 2.0);
        let mut l3 = SeqCoeffs::new(1);
        l3.insert(0, vec![0], 3.0).unwrap();
        l3.insert(0, vec![1], 4.0).unwrap();
        l3.insert(1, vec![0], 12.0).unwrap();
        assert_relative_eq!(mixed_norm(&l3, &e("2"), &e("2")), 13.0);
    }

    #[test]
    fn zeros_are_not_stored() {
        let mut l = SeqCoeffs::new(1);
        l.insert(0, vec![0], 1.0).unwrap();
        l.insert(0, vec![0], 0.0).unwrap();
        assert!(l.is_empty());
        assert!(l.insert(0, vec![0, 1], 1.0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let l = SeqCoeffs::parse("# c\n0 0 1 2.5\n3 -4 5 -1\n\n", 2).unwrap();
        assert_eq!(l.len(), 2);
        assert_eq!(SeqCoeffs::parse(&l.to_text(), 2).unwrap(), l);
        assert!(SeqCoeffs::parse("0 1 x", 1).is_err());
    }

    #[test]
    fn split_examples() {
        let mut l = SeqCoeffs::new(1);
        l.insert(2, vec![1], 1.0).unwrap();
        l.insert(2, vec![4], 2.0).unwrap();
        l.insert(0, vec![0], 3.0).unwrap();
        let (i, o) = split_inner_outer(&l);
        assert_eq!(i.len(), 2);
        assert_eq!(o.iter().collect::<Vec<_>>(), vec![(2, &[4i64][..], 2.0)]);
    }

    #[test]
    fn layer_vector_examples() {
        let v = layer_weight_vector(&LayerSpec::inner(1, 1, rat(1), rat(0))).unwrap();
        assert_eq!(v, vec![1.0, 1.0]);
        let v = layer_weight_vector(&LayerSpec::inner(3, 2, rat(0), rat(0))).unwrap();
        assert!(v.iter().all(|&x| x == 1.0));
        // 1 ≤ |m| < 8 in ℤ²: lattice points strictly inside radius 8 minus the origin.
        let count = (-7i64..=7).flat_map(|a| (-7i64..=7).map(move |b| a * a + b * b)).filter(|&n| n >= 1 && n < 64).count();
        assert_eq!(v.len(), count);
        let v = layer_weight_vector(&LayerSpec::outer(1, 1, 4, rat(1), rat(0))).unwrap();
        let want = [0.5, 0.5, 1.0 / 3.0, 1.0 / 3.0, 0.25, 0.25];
        assert_eq!(v.len(), want.len());
        for (a, b) in v.iter().zip(want) {
            assert_relative_eq!(*a, b);
        }
        assert_eq!(layer_weight_vector(&LayerSpec::inner(0, 2, rat(1), rat(1))).unwrap(), vec![1.0]);
        assert!(layer_weight_vector(&LayerSpec::outer(3, 1, 7, rat(1), rat(0))).is_err());
    }

    #[test]
    fn lt_norm_examples() {
        let cfg = LatticeConfig::default();
        for j in 1..6 {
            let v = lt_norm_of_layer(&LayerSpec::inner(j, 1, rat(0), rat(0)), &e("1"), &cfg).unwrap();
            assert_relative_eq!(v, 2.0 * (2f64.powi(j as i32) - 1.0));
        }
        let v = lt_norm_of_layer(&LayerSpec::inner(5, 2, rat(1), rat(0)), &e("inf"), &cfg).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn exact_and_integral_sums_agree_across_the_switchover() {
        let spec = LayerSpec::inner(12, 1, frac(1, 2), rat(0));
        let exact = LatticeConfig { exact_shells_d1: 13, ..Default::default() };
        let a = layer_power_sum(&spec, 2.0, &exact).unwrap();
        let b = layer_power_sum(&spec, 2.0, &LatticeConfig::default()).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-4);
        let spec2 = LayerSpec::inner(9, 2, frac(1, 3), frac(1, 2));
        let exact2 = LatticeConfig { exact_shells_d2: 10, ..Default::default() };
        let a = layer_power_sum(&spec2, 1.5, &exact2).unwrap();
        let b = layer_power_sum(&spec2, 1.5, &LatticeConfig::default()).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-3);
    }

    #[test]
    fn outer_tail_bounds_the_remainder() {
        let cfg = LatticeConfig { exact_shells_d1: 20, ..Default::default() };
        let t = e("1");
        let near = LayerSpec::outer(2, 1, 64, rat(2), rat(0));
        let far = LayerSpec::outer(2, 1, 1 << 18, rat(2), rat(0));
        let diff = lt_norm_of_layer(&far, &t, &cfg).unwrap() - lt_norm_of_layer(&near, &t, &cfg).unwrap();
        let tail = outer_tail(&near, &t).unwrap();
        assert!(tail >= diff);
        assert!(tail <= 3.0 * diff);
        assert!(outer_tail(&LayerSpec::outer(2, 1, 64, rat(1), rat(0)), &t).is_none());
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(1), 2.0);
        assert_relative_eq!(sphere_area(2), 2.0 * std::f64::consts::PI);
        assert_relative_eq!(sphere_area(3), 4.0 * std::f64::consts::PI);
        assert_relative_eq!(sphere_area(4), 2.0 * std::f64::consts::PI.powi(2));
    }
}
