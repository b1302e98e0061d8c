//! Certified brackets for covering numbers `N(K, ρT)`, restricted covering
//! numbers `N′` (centers in `K`) and entropy numbers
//! `e_k(K,T) = inf{ε > 0 : N(K, εT) ≤ 2^k}`.
//!
//! Lower bounds come from the volume ratio, from packings at separation
//! `2ρ` (no translate of `ρT` holds two such points) and from the
//! circumradius. Upper bounds always carry explicit centers.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{ConvexBody, View};
use crate::bracket::{Bracket, Witness};
use crate::effort::Effort;
use crate::error::{Error, Result};
use crate::linalg::{enumerate_vertices, scale, Point};
use crate::nets::{
    exact_polytope_cover, grid_cover, packing_lower, refine_cover, sample_directions, CoverCertificate, CoverMethod,
    REFINE_MAX_CENTERS,
};

/// `R(K,T) = max_{x∈K} gauge(T, x)`, the smallest `ρ` with `K ⊆ ρT`.
///
/// Exact when either body is a polytope, both are ellipsoids, both are ℓp
/// balls with the same `p`, or both are images under the same map; otherwise
/// bracketed between sampled boundary points of `K` and the vertices of a
/// circumscribed polytope built from support values.
pub fn circumradius(k: &ConvexBody, t: &ConvexBody) -> Result<Bracket<f64>> {
    if k.dim() != t.dim() {
        return Err(Error::Precondition("K and T have different dimensions".into()));
    }
    if let Some(tp) = t.polytope() {
        return Ok(Bracket::exact(tp.facets.iter().map(|a| k.support(a)).fold(0.0, f64::max)));
    }
    if let Some(kp) = k.polytope() {
        return Ok(Bracket::exact(kp.vertices.iter().map(|v| t.gauge(v)).fold(0.0, f64::max)));
    }
    match (k.view(), t.view()) {
        // coordinate vectors are extreme in both balls
        (View::Lp { p: pk, r: rk }, View::Lp { p: pt, r: rt }) if pk == pt => {
            return Ok(Bracket::exact(rk.iter().zip(rt).map(|(a, b)| a / b).fold(0.0, f64::max)));
        }
        (View::Image { m: mk, inner: ik, .. }, View::Image { m: mt, inner: it, .. }) if mk == mt => {
            return circumradius(ik, it);
        }
        _ => {}
    }
    if let (Some(qk), Some(qt)) = (k.quadratic_form(), t.quadratic_form()) {
        // max xᵀQ_T x over xᵀQ_K x ≤ 1 is the top eigenvalue of L⁻¹Q_T L⁻ᵀ
        let l = qk.cholesky().ok_or(Error::Singular(0.0))?.l();
        let l_inv = l.try_inverse().ok_or(Error::Singular(0.0))?;
        let c = &l_inv * qt * l_inv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let top = c.symmetric_eigenvalues().iter().fold(0.0f64, |m, x| m.max(*x));
        return Ok(Bracket::exact(top.sqrt()));
    }
    let dirs = sample_directions(k.dim());
    let lo = dirs.iter().map(|u| t.gauge(&scale(u, 1.0 / k.gauge(u)))).fold(0.0, f64::max);
    let rows: Vec<Point> = dirs
        .iter()
        .flat_map(|u| {
            let a = scale(u, 1.0 / k.support(u));
            [scale(&a, -1.0), a]
        })
        .collect();
    let hi = enumerate_vertices(&rows, k.dim()).iter().map(|v| t.gauge(v)).fold(lo, f64::max);
    Ok(Bracket::new(lo, hi))
}

/// `⌈vol K / (ρⁿ vol T)⌉` when both volumes are available.
fn volume_count(k: &ConvexBody, t: &ConvexBody, rho: f64) -> Option<u64> {
    let ratio = volume_ratio(k, t)? / rho.powi(k.dim() as i32);
    Some((ratio * (1.0 - 1e-9)).ceil().max(1.0) as u64)
}

fn volume_ratio(k: &ConvexBody, t: &ConvexBody) -> Option<f64> {
    match (k.volume(), t.volume()) {
        (Ok(a), Ok(b)) => Some(a / b),
        _ => None,
    }
}

fn origin_cover(n: usize, rho: f64, restricted: bool) -> CoverCertificate {
    CoverCertificate {
        centers: vec![vec![0.0; n]],
        radius_factor: rho,
        net_resolution: 0.0,
        method: CoverMethod::Circumradius,
        restricted,
    }
}

/// Lower bound on `N(K, ρT)` with its witness.
fn lower_count(
    k: &ConvexBody,
    t: &ConvexBody,
    rho: f64,
    radius: &Bracket<f64>,
    effort: &Effort,
    flags: &mut Vec<String>,
) -> Result<(u64, Option<Witness>)> {
    let mut best: (u64, Option<Witness>) = (1, None);
    // circumradii within abs_tol of ρ count as K ⊆ ρT
    if rho * (1.0 + effort.abs_tol) < radius.lo {
        best = (2, Some(Witness::Circumradius));
    }
    if let Some(v) = volume_count(k, t, rho) {
        if v > best.0 {
            best = (v, Some(Witness::Volume));
        }
    }
    match packing_lower(k, t, 2.0 * rho, effort) {
        Ok(points) => {
            if points.len() as u64 > best.0 {
                let separation = 2.0 * rho * (1.0 + effort.eta);
                best = (points.len() as u64, Some(Witness::Packing { separation, points }));
            }
        }
        Err(e @ Error::Budget { .. }) => flags.push(format!("packing skipped: {e}")),
        Err(e) => return Err(e),
    }
    Ok(best)
}

/// Largest goal count handed straight to refinement.
const REFINE_GOAL_MAX: u64 = REFINE_MAX_CENTERS as u64;

/// Best certified cover found. Refinement aims at `lower` one count at a
/// time, or straight at `goal` when one is given.
fn upper_cover(
    k: &ConvexBody,
    t: &ConvexBody,
    rho: f64,
    restricted: bool,
    lower: u64,
    goal: Option<u64>,
    effort: &Effort,
    flags: &mut Vec<String>,
) -> Result<Option<CoverCertificate>> {
    let mut best: Option<CoverCertificate> = None;
    if k.is_polytope() && t.is_polytope() && lower <= effort.exact_polytope_max_count {
        match exact_polytope_cover(k, t, rho, restricted, lower as usize, effort) {
            Ok(c) => best = c,
            Err(e @ Error::Budget { .. }) => flags.push(format!("exact cover skipped: {e}")),
            Err(e) => return Err(e),
        }
    }
    // a goal within refinement range skips the greedy grid cover, which
    // runs only when refinement is over budget
    if let Some(g) = goal.filter(|g| (1..=REFINE_GOAL_MAX).contains(g)) {
        if best.as_ref().is_some_and(|b| b.count() <= g) {
            return Ok(best);
        }
        match refine_cover(k, t, rho, restricted, g as usize + 1, g as usize, effort) {
            Ok(Some(c)) => return Ok(Some(c)),
            Ok(None) => return Ok(best),
            Err(e @ Error::Budget { .. }) => flags.push(format!("refinement skipped: {e}")),
            Err(e) => return Err(e),
        }
    }
    if best.as_ref().is_none_or(|b| b.count() > lower) {
        match grid_cover(k, t, rho, restricted, effort) {
            Ok(c) => {
                if best.as_ref().is_none_or(|b| c.count() < b.count()) {
                    best = Some(c);
                }
            }
            Err(e @ (Error::Budget { .. } | Error::Insufficient(_))) => {
                flags.push(format!("grid cover skipped: {e}"))
            }
            Err(e) => return Err(e),
        }
    }
    let start = best.as_ref().map_or(0, |b| b.count());
    if goal.is_none() && start > lower.max(1) && start as usize <= REFINE_MAX_CENTERS {
        match refine_cover(k, t, rho, restricted, start as usize, lower as usize, effort) {
            Ok(Some(c)) => best = Some(c),
            Ok(None) => {}
            Err(e @ Error::Budget { .. }) => flags.push(format!("refinement skipped: {e}")),
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

/// Bracket on `N(K, ρT)`, or on `N′(K, ρT)` when `restricted`.
///
/// A missing upper bound (every cover search over budget) is reported as
/// `hi = u64::MAX` with a `no-cover` flag.
pub fn cover_bracket(
    k: &ConvexBody,
    t: &ConvexBody,
    rho: f64,
    restricted: bool,
    effort: &Effort,
) -> Result<Bracket<u64>> {
    effort.validate()?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Precondition(format!("radius factor must be positive, got {rho}")));
    }
    let radius = circumradius(k, t)?;
    if rho * (1.0 + effort.abs_tol) >= radius.hi {
        let mut b = Bracket::exact(1);
        b.lo_witness = Some(Witness::Circumradius);
        b.hi_witness = Some(Witness::Cover(origin_cover(k.dim(), rho, restricted)));
        return Ok(b);
    }
    let mut flags = Vec::new();
    let (lo, lo_witness) = lower_count(k, t, rho, &radius, effort, &mut flags)?;
    let cover = upper_cover(k, t, rho, restricted, lo, None, effort, &mut flags)?;
    let hi = cover.as_ref().map_or(u64::MAX, |c| c.count());
    if hi < lo {
        return Err(Error::Insufficient(format!("inconsistent covering bracket [{lo}, {hi}] at ρ = {rho}")));
    }
    let mut b = Bracket::new(lo, hi);
    b.lo_witness = lo_witness;
    b.hi_witness = cover.map(Witness::Cover);
    if b.hi == u64::MAX {
        flags.push("no-cover".into());
    }
    for f in flags {
        warn!("covering bracket at ρ = {rho}: {f}");
        b.flag(f);
    }
    Ok(b)
}

/// Bracket on `N(K, T)`.
pub fn covering_bracket(k: &ConvexBody, t: &ConvexBody, effort: &Effort) -> Result<Bracket<u64>> {
    cover_bracket(k, t, 1.0, false, effort)
}

/// Bracket on `N′(K, T)`, the covering number with centers in `K`.
pub fn covering_restricted_bracket(k: &ConvexBody, t: &ConvexBody, effort: &Effort) -> Result<Bracket<u64>> {
    cover_bracket(k, t, 1.0, true, effort)
}

// ---------------------------------------------------------------------------
// Entropy numbers

#[derive(Clone)]
struct LowerAt {
    count: u64,
    witness: Option<Witness>,
}

/// Shared state for entropy bisections on one body pair: certified counts
/// at each tested scale, keyed by the scale's bit pattern.
pub struct EntropySolver<'a> {
    k: &'a ConvexBody,
    t: &'a ConvexBody,
    effort: &'a Effort,
    radius: Bracket<f64>,
    volume_ratio: Option<f64>,
    upper: Mutex<HashMap<(u64, u64), Arc<Option<CoverCertificate>>>>,
    lower: Mutex<HashMap<u64, Arc<LowerAt>>>,
}

impl<'a> EntropySolver<'a> {
    pub fn new(k: &'a ConvexBody, t: &'a ConvexBody, effort: &'a Effort) -> Result<Self> {
        effort.validate()?;
        Ok(EntropySolver {
            k,
            t,
            effort,
            radius: circumradius(k, t)?,
            volume_ratio: volume_ratio(k, t),
            upper: Mutex::new(HashMap::new()),
            lower: Mutex::new(HashMap::new()),
        })
    }

    pub fn circumradius(&self) -> &Bracket<f64> {
        &self.radius
    }

    fn upper_at(&self, eps: f64, target: u64) -> Result<Arc<Option<CoverCertificate>>> {
        let key = (eps.to_bits(), target);
        if let Some(hit) = self.upper.lock().expect("cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let hint = volume_count(self.k, self.t, eps).unwrap_or(1);
        let mut flags = Vec::new();
        let cert = upper_cover(self.k, self.t, eps, false, hint, Some(target), self.effort, &mut flags)?;
        for f in flags {
            debug!("entropy upper at ε = {eps}: {f}");
        }
        let out = Arc::new(cert);
        self.upper.lock().expect("cache poisoned").insert(key, out.clone());
        Ok(out)
    }

    fn lower_at(&self, eps: f64) -> Result<Arc<LowerAt>> {
        if let Some(hit) = self.lower.lock().expect("cache poisoned").get(&eps.to_bits()) {
            return Ok(hit.clone());
        }
        let mut flags = Vec::new();
        let (count, witness) = lower_count(self.k, self.t, eps, &self.radius, self.effort, &mut flags)?;
        for f in flags {
            debug!("entropy lower at ε = {eps}: {f}");
        }
        let out = Arc::new(LowerAt { count, witness });
        self.lower.lock().expect("cache poisoned").insert(eps.to_bits(), out.clone());
        Ok(out)
    }

    /// Bracket on `e_k(K, T)`, refined by geometric bisection until
    /// `hi/lo ≤ 1 + bisect_tol` or the step budget runs out (then flagged
    /// `loose`).
    pub fn bracket(&self, k_index: u32) -> Result<EntropyEstimate> {
        let n = self.k.dim();
        if k_index == 0 {
            let mut b = self.radius.clone();
            b.lo_witness = Some(Witness::Circumradius);
            b.hi_witness = Some(Witness::Cover(origin_cover(n, self.radius.hi, false)));
            return Ok(EntropyEstimate { k: 0, bracket: b, cover_lo: 1, cover_hi: 1 });
        }
        if k_index > 62 {
            return Err(Error::Precondition(format!("k = {k_index} exceeds 62")));
        }
        let target = 1u64 << k_index;
        let tol = 1.0 + self.effort.bisect_tol;
        let max_steps = self.effort.bisect_max_steps;

        let mut hi = self.radius.hi;
        let mut hi_cert = origin_cover(n, hi, false);
        let (mut lo, mut lo_witness, mut cover_lo) = match self.volume_ratio {
            Some(v) => ((v / target as f64).powf(1.0 / n as f64) * (1.0 - 1e-9), Some(Witness::Volume), target),
            None => (0.0, None, 0),
        };
        let mut a = if lo > 0.0 { lo } else { hi / (2.0 * (target as f64).powf(1.0 / n as f64)) };
        let mut b = hi;
        let mut steps = 0;
        let accept_hi = |eps: f64| -> Result<Option<CoverCertificate>> {
            Ok(self.upper_at(eps, target)?.as_ref().as_ref().filter(|c| c.count() <= target).cloned())
        };
        // joint phase: one midpoint decides a side or splits the search
        let mut split = None;
        while b / a > tol && steps < max_steps {
            steps += 1;
            let mid = (a * b).sqrt();
            if let Some(c) = accept_hi(mid)? {
                hi = mid;
                hi_cert = c;
                b = mid;
                continue;
            }
            let low = self.lower_at(mid)?;
            if low.count > target {
                lo = mid;
                lo_witness = low.witness.clone();
                cover_lo = low.count;
                a = mid;
                continue;
            }
            split = Some(mid);
            break;
        }
        if let Some(mid) = split {
            let (mut ha, mut hb) = (mid, b);
            let mut s = steps;
            while hb / ha > tol && s < max_steps {
                s += 1;
                let m = (ha * hb).sqrt();
                match accept_hi(m)? {
                    Some(c) => {
                        hi = m;
                        hi_cert = c;
                        hb = m;
                    }
                    None => ha = m,
                }
            }
            let (mut la, mut lb) = (a, mid);
            let mut s = steps;
            while lb / la > tol && s < max_steps {
                s += 1;
                let m = (la * lb).sqrt();
                let low = self.lower_at(m)?;
                if low.count > target {
                    lo = m;
                    lo_witness = low.witness.clone();
                    cover_lo = low.count;
                    la = m;
                } else {
                    lb = m;
                }
            }
        }
        let cover_hi = hi_cert.count();
        let mut bracket = Bracket::new(lo.min(hi), hi);
        bracket.lo_witness = lo_witness;
        bracket.hi_witness = Some(Witness::Cover(hi_cert));
        if lo <= 0.0 || hi / lo > tol {
            bracket.flag("loose");
        }
        Ok(EntropyEstimate { k: k_index, bracket, cover_lo, cover_hi })
    }
}

/// Smallest radius factor `ρ` (within `1 + bisect_tol`) at which a cover of
/// `K` by at most `max_count` translates of `ρT` with centers in `K` was
/// found, together with that cover.
pub fn restricted_net(
    k: &ConvexBody,
    t: &ConvexBody,
    max_count: u64,
    effort: &Effort,
) -> Result<(f64, CoverCertificate)> {
    effort.validate()?;
    if max_count == 0 {
        return Err(Error::Precondition("a net needs at least one point".into()));
    }
    let n = k.dim();
    let radius = circumradius(k, t)?.hi;
    let mut best = (radius, origin_cover(n, radius, true));
    if max_count == 1 {
        return Ok(best);
    }
    let vol = volume_ratio(k, t);
    let mut lo = match vol {
        Some(v) => (v / max_count as f64).powf(1.0 / n as f64) * (1.0 - 1e-9),
        None => radius / (4.0 * (max_count as f64).powf(1.0 / n as f64)),
    };
    let tol = 1.0 + effort.bisect_tol;
    let mut steps = 0;
    while best.0 / lo > tol && steps < effort.bisect_max_steps {
        steps += 1;
        let mid = (lo * best.0).sqrt();
        let hint = volume_count(k, t, mid).unwrap_or(1);
        let mut flags = Vec::new();
        match upper_cover(k, t, mid, true, hint, Some(max_count), effort, &mut flags)? {
            Some(c) if c.count() <= max_count => best = (mid, c),
            _ => lo = mid,
        }
    }
    Ok(best)
}

/// One entropy number with the covering counts at its endpoints:
/// `N(K, lo·T) ≥ cover_lo` and `N(K, hi·T) ≤ cover_hi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub k: u32,
    pub bracket: Bracket<f64>,
    pub cover_lo: u64,
    pub cover_hi: u64,
}

/// Bracket on `e_k(K, T)`.
pub fn entropy_bracket(k: &ConvexBody, t: &ConvexBody, k_index: u32, effort: &Effort) -> Result<Bracket<f64>> {
    Ok(EntropySolver::new(k, t, effort)?.bracket(k_index)?.bracket)
}

/// Brackets on `e_0, …, e_{k_max}` for one pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropySequence {
    pub pair_id: String,
    pub rows: Vec<EntropyEstimate>,
}

impl EntropySequence {
    /// Sequence with exact values, for feeding known entropy numbers to the
    /// downstream checks.
    pub fn from_values(pair_id: impl Into<String>, values: &[f64]) -> Self {
        EntropySequence {
            pair_id: pair_id.into(),
            rows: values
                .iter()
                .enumerate()
                .map(|(k, &v)| EntropyEstimate { k: k as u32, bracket: Bracket::exact(v), cover_lo: 0, cover_hi: 0 })
                .collect(),
        }
    }

    pub fn get(&self, k: u32) -> Option<&Bracket<f64>> {
        self.rows.iter().find(|r| r.k == k).map(|r| &r.bracket)
    }

    pub fn k_max(&self) -> u32 {
        self.rows.iter().map(|r| r.k).max().unwrap_or(0)
    }

    /// CSV with columns `pair_id,k,e_lo,e_hi,cover_lo,cover_hi,flags`.
    pub fn to_csv(&self, header: bool) -> String {
        let mut out = String::new();
        if header {
            out.push_str("pair_id,k,e_lo,e_hi,cover_lo,cover_hi,flags\n");
        }
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.pair_id,
                r.k,
                r.bracket.lo,
                r.bracket.hi,
                r.cover_lo,
                r.cover_hi,
                r.bracket.flags.join(";")
            );
        }
        out
    }
}

/// Brackets for `k = 0..=k_max`; distinct `k` run in parallel over a shared
/// cache. Upper ends are made non-increasing by carrying smaller `hi` values
/// forward, lower ends by carrying larger `lo` values backward.
pub fn entropy_sequence(
    k: &ConvexBody,
    t: &ConvexBody,
    k_max: u32,
    effort: &Effort,
    pair_id: &str,
) -> Result<EntropySequence> {
    if k_max < 1 {
        return Err(Error::Precondition("k_max must be at least 1".into()));
    }
    let solver = EntropySolver::new(k, t, effort)?;
    let mut rows = (0..=k_max).into_par_iter().map(|i| solver.bracket(i)).collect::<Result<Vec<_>>>()?;
    for i in 1..rows.len() {
        if rows[i - 1].bracket.hi < rows[i].bracket.hi {
            let prev = rows[i - 1].clone();
            let r = &mut rows[i];
            r.bracket.hi = prev.bracket.hi;
            r.bracket.hi_witness = prev.bracket.hi_witness;
            r.cover_hi = prev.cover_hi;
        }
    }
    for i in (0..rows.len() - 1).rev() {
        if rows[i + 1].bracket.lo > rows[i].bracket.lo {
            let next = rows[i + 1].clone();
            let r = &mut rows[i];
            r.bracket.lo = next.bracket.lo;
            r.bracket.lo_witness = next.bracket.lo_witness;
            r.cover_lo = next.cover_lo;
        }
    }
    Ok(EntropySequence { pair_id: pair_id.to_string(), rows })
}

/// Outcome of one row of [`tail_check`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailStatus {
    /// `e_k.hi ≤ (1+η)·2·e_n.lo/(2^{(k−n)/n} − 1)`: holds for the true values.
    CertifiedPass,
    /// Holds with `e_n.hi` in place of `e_n.lo` only.
    Pass,
    /// `e_k.lo` exceeds the bound even with `e_n.hi`: fails for the true values.
    CertifiedFail,
    /// Neither side decided by the brackets.
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub k: u32,
    pub e_k: Bracket<f64>,
    /// `2·e_n.hi/(2^{(k−n)/n} − 1)`.
    pub bound: f64,
    pub status: TailStatus,
    /// `(n/k)·ln(2·e_n.lo/e_k.hi)`, the largest `c` with
    /// `e_k ≤ 2e_n·exp(−ck/n)` certified by the brackets.
    pub implied_c: f64,
}

/// Checks `e_k ≤ 2e_n/(2^{(k−n)/n} − 1)` for every `k ≥ 3n` in the sequence.
pub fn tail_check(seq: &EntropySequence, n: u32, eta: f64) -> Result<Vec<TailRow>> {
    if n == 0 {
        return Err(Error::Precondition("dimension must be positive".into()));
    }
    let e_n = seq
        .get(n)
        .ok_or_else(|| Error::Insufficient(format!("sequence lacks e_{n}")))?;
    if seq.k_max() < 3 * n {
        return Err(Error::Insufficient(format!("sequence ends at k = {} < 3n = {}", seq.k_max(), 3 * n)));
    }
    let mut rows = Vec::new();
    for r in seq.rows.iter().filter(|r| r.k >= 3 * n) {
        let denom = 2f64.powf((r.k - n) as f64 / n as f64) - 1.0;
        let slack = 1.0 + eta;
        let bound = 2.0 * e_n.hi / denom;
        let certified = slack * 2.0 * e_n.lo / denom;
        let status = if r.bracket.hi <= certified {
            TailStatus::CertifiedPass
        } else if r.bracket.hi <= slack * bound {
            TailStatus::Pass
        } else if r.bracket.lo > slack * bound {
            TailStatus::CertifiedFail
        } else {
            TailStatus::Fail
        };
        let implied_c = n as f64 / r.k as f64 * (2.0 * e_n.lo / r.bracket.hi).ln();
        rows.push(TailRow { k: r.k, e_k: r.bracket.clone(), bound, status, implied_c });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(a: f64) -> ConvexBody {
        ConvexBody::cube(1, a).unwrap()
    }

    #[test]
    fn circumradius_routes() {
        let sq = ConvexBody::cube(2, 1.0).unwrap();
        let disk = ConvexBody::euclidean_ball(2, 1.0).unwrap();
        assert!((circumradius(&sq, &disk).unwrap().hi - 2f64.sqrt()).abs() < 1e-12);
        assert!((circumradius(&disk, &sq).unwrap().hi - 1.0).abs() < 1e-12);
        let e = ConvexBody::ellipsoid(nalgebra::DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, 1.0])).unwrap();
        assert!((circumradius(&e, &disk).unwrap().hi - 2.0).abs() < 1e-12);
        let p3 = ConvexBody::lp_ball(3.0, vec![1.0, 1.0]).unwrap();
        let r = circumradius(&p3, &disk).unwrap();
        let truth = 2f64.powf(0.5 - 1.0 / 3.0);
        assert!(r.lo <= truth + 1e-12 && truth <= r.hi + 1e-12 && r.hi - r.lo < 1e-3, "{r:?}");
    }

    #[test]
    fn covering_examples() {
        let e = Effort::default();
        let disk = ConvexBody::euclidean_ball(2, 1.0).unwrap();
        let b = covering_bracket(&disk, &disk, &e).unwrap();
        assert_eq!((b.lo, b.hi), (1, 1));
        let b = covering_bracket(&interval(3.0), &interval(1.0), &e).unwrap();
        assert_eq!((b.lo, b.hi), (3, 3));
        let b = covering_restricted_bracket(&interval(3.0), &interval(1.0), &e).unwrap();
        assert_eq!((b.lo, b.hi), (3, 3));
        let b = covering_bracket(&ConvexBody::cube(2, 2.0).unwrap(), &ConvexBody::cube(2, 1.0).unwrap(), &e).unwrap();
        assert_eq!((b.lo, b.hi), (4, 4));
    }

    #[test]
    fn entropy_examples() {
        let e = Effort::default();
        let disk = ConvexBody::euclidean_ball(2, 1.0).unwrap();
        assert!(entropy_bracket(&disk, &disk, 0, &e).unwrap().contains(1.0));
        let b = entropy_bracket(&interval(4.0), &interval(1.0), 2, &e).unwrap();
        assert!(b.lo <= 1.0 + 1e-12 && 1.0 <= b.hi + 1e-12, "{b:?}");
        assert!(b.hi / b.lo <= 1.05 + 1e-12);
    }

    #[test]
    fn tail_check_examples() {
        let analytic: Vec<f64> = (0..=12).map(|k| 4.0 * 2f64.powi(-k)).collect();
        let rows = tail_check(&EntropySequence::from_values("interval", &analytic), 1, 1e-6).unwrap();
        assert!(rows.iter().all(|r| r.status == TailStatus::CertifiedPass));
        let flat = EntropySequence::from_values("flat", &[1.0; 13]);
        let rows = tail_check(&flat, 1, 1e-6).unwrap();
        assert!(rows.iter().any(|r| r.status == TailStatus::CertifiedFail));
        assert!(tail_check(&EntropySequence::from_values("short", &[1.0, 0.5]), 1, 1e-6).is_err());
    }
}
