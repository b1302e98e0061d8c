//! Convex separation: ordered point sets `x₁, …, x_N ⊂ K` with
//! `(x_j + int T) ∩ conv{x_i : i < j} = ∅` for every `j`, so `N ≤ M̂(K,T)`,
//! and the covering-based upper bound `M̂(K,T) ≤ N(K, T/2)`.
//!
//! Step `j` is witnessed by a functional `f` with `h_T(f) ≤ 1` and
//! `f(x_j) − max_{i<j} f(x_i) ≥ 1`: for `y` in the hull and `z ∈ int T`,
//! `f(x_j + z) > f(x_j) − 1 ≥ f(y)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use log::debug;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::ConvexBody;
use crate::covering::cover_bracket;
use crate::effort::Effort;
use crate::error::{Error, Result};
use crate::linalg::{dot, mat_vec, norm2, sub, Point};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::nets::CandidateGrid;

/// Acceptance threshold for a greedy step. Far below any slack `η`, so a
/// step at distance `1/(1+η)` is rejected.
const STEP_TOL: f64 = 1e-12;
/// Target duality gap of the iterative hull-distance solvers.
const GAP_TOL: f64 = 1e-7;
/// Candidate cap for the greedy search grid.
const MAX_CANDIDATES: usize = 1500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationCertificate {
    pub points: Vec<Point>,
    /// `functionals[j − 1]` separates `points[j]` from the earlier hull.
    pub functionals: Vec<Point>,
    pub seed: u64,
}

impl SeparationCertificate {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Certified bounds on `min_{y ∈ conv P} gauge(T, x − y)`: `lower` is
/// `min_i f(x − p_i)` for the returned `functional` with `h_T(f) ≤ 1`.
#[derive(Clone, Debug)]
pub struct HullDistance {
    pub lower: f64,
    pub upper: f64,
    pub functional: Point,
}

/// Gauge of `T` prepared for repeated hull-distance queries.
pub struct HullMetric<'a> {
    t: &'a ConvexBody,
    route: Route,
}

enum Route {
    /// Facet rows `a` with `T = {a·x ≤ 1}`.
    Facets(Vec<Point>),
    /// `Lᵀ` and `L` for `Q = LLᵀ`, so `gauge(T, z) = |Lᵀz|`.
    Whiten { lt: DMatrix<f64>, l: DMatrix<f64> },
    Subgradient,
}

impl<'a> HullMetric<'a> {
    pub fn new(t: &'a ConvexBody) -> Self {
        let route = if let Some(p) = t.polytope() {
            Route::Facets(p.facets)
        } else if let Some(chol) = t.quadratic_form().and_then(|q| q.cholesky()) {
            let l = chol.l();
            Route::Whiten { lt: l.transpose(), l }
        } else {
            Route::Subgradient
        };
        HullMetric { t, route }
    }

    /// Distance from `x` to `conv(hull)` in the gauge of `T`.
    pub fn distance(&self, x: &[f64], hull: &[Point]) -> HullDistance {
        assert!(!hull.is_empty(), "hull distance to an empty set");
        let diffs: Vec<Point> = hull.iter().map(|p| sub(x, p)).collect();
        if diffs.len() == 1 {
            let f = self.t.subgradient(&diffs[0]);
            let g = self.t.gauge(&diffs[0]);
            return HullDistance { lower: dot(&f, &diffs[0]).min(g), upper: g, functional: f };
        }
        let out = match &self.route {
            Route::Facets(rows) => facet_distance(rows, &diffs),
            Route::Whiten { lt, l } => whitened_distance(lt, l, &diffs),
            Route::Subgradient => subgradient_distance(self.t, &diffs),
        };
        // recompute the certified end from the functional itself
        let scale = self.t.support(&out.functional).max(1.0);
        let functional: Point = out.functional.iter().map(|v| v / scale).collect();
        let lower = diffs.iter().map(|d| dot(&functional, d)).fold(f64::INFINITY, f64::min);
        HullDistance { lower, upper: out.upper.max(lower), functional }
    }
}

/// Dual LP: maximize `s` over `f = Σ μ_l a_l`, `μ ≥ 0`, `Σ μ_l = 1`, with
/// `f(x − p_i) ≥ s` for all `i`. Its optimum is the hull distance.
fn facet_distance(rows: &[Point], diffs: &[Point]) -> HullDistance {
    let nf = rows.len();
    let mut obj = vec![0.0; nf + 1];
    obj[nf] = 1.0;
    let mut lp = LinearProgram::maximize(obj);
    lp.set_free(nf);
    for d in diffs {
        let mut row: Vec<f64> = rows.iter().map(|a| dot(a, d)).collect();
        row.push(-1.0);
        lp.add(row, Relation::Ge, 0.0);
    }
    let mut sum = vec![1.0; nf + 1];
    sum[nf] = 0.0;
    lp.add(sum, Relation::Eq, 1.0);
    match lp.solve_max() {
        LpOutcome::Optimal { x, value } => {
            let n = diffs[0].len();
            let mut f = vec![0.0; n];
            for (mu, a) in x.iter().zip(rows) {
                for (fi, ai) in f.iter_mut().zip(a) {
                    *fi += mu * ai;
                }
            }
            HullDistance { lower: value, upper: value + 1e-9 * (1.0 + value.abs()), functional: f }
        }
        _ => HullDistance { lower: 0.0, upper: f64::INFINITY, functional: vec![0.0; diffs[0].len()] },
    }
}

/// Euclidean projection of the origin onto `conv{Lᵀ(x − p_i)}` by
/// accelerated projected gradient on the simplex weights.
fn whitened_distance(lt: &DMatrix<f64>, l: &DMatrix<f64>, diffs: &[Point]) -> HullDistance {
    let q: Vec<Point> = diffs.iter().map(|d| mat_vec(lt, d)).collect();
    let m = q.len();
    let lipschitz = 2.0 * q.iter().map(|v| dot(v, v)).sum::<f64>().max(1e-300);
    let combine = |w: &[f64]| -> Point {
        let mut z = vec![0.0; q[0].len()];
        for (wi, v) in w.iter().zip(&q) {
            for (zi, vi) in z.iter_mut().zip(v) {
                *zi += wi * vi;
            }
        }
        z
    };
    let bounds = |z: &Point| -> (f64, f64, Point) {
        let r = norm2(z);
        if r == 0.0 {
            return (0.0, 0.0, vec![0.0; z.len()]);
        }
        let u: Point = z.iter().map(|v| v / r).collect();
        (q.iter().map(|v| dot(&u, v)).fold(f64::INFINITY, f64::min), r, u)
    };
    let mut w = vec![1.0 / m as f64; m];
    let mut y = w.clone();
    let mut momentum = 1.0f64;
    let mut best = bounds(&combine(&w));
    for it in 0..20_000 {
        let z = combine(&y);
        let grad: Vec<f64> = q.iter().map(|v| 2.0 * dot(v, &z)).collect();
        let step: Vec<f64> = y.iter().zip(&grad).map(|(yi, gi)| yi - gi / lipschitz).collect();
        let next = project_simplex(&step);
        let next_momentum = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        y = next.iter().zip(&w).map(|(a, b)| a + (momentum - 1.0) / next_momentum * (a - b)).collect();
        w = next;
        momentum = next_momentum;
        if it % 8 == 0 {
            let cand = bounds(&combine(&w));
            if cand.0 > best.0 {
                best.0 = cand.0;
                best.2 = cand.2;
            }
            best.1 = best.1.min(cand.1);
            if best.1 - best.0 <= GAP_TOL * best.1.max(1.0) {
                break;
            }
        }
    }
    // f(z) = ⟨u, Lᵀz⟩ = ⟨Lu, z⟩ and h_T(Lu) = |u| = 1
    HullDistance { lower: best.0, upper: best.1, functional: mat_vec(l, &best.2) }
}

/// Projected subgradient on the simplex weights for a general gauge; each
/// subgradient lies in `T°` and yields a lower bound.
fn subgradient_distance(t: &ConvexBody, diffs: &[Point]) -> HullDistance {
    let m = diffs.len();
    let n = diffs[0].len();
    let combine = |w: &[f64]| -> Point {
        let mut z = vec![0.0; n];
        for (wi, d) in w.iter().zip(diffs) {
            for (zi, di) in z.iter_mut().zip(d) {
                *zi += wi * di;
            }
        }
        z
    };
    let scale = diffs.iter().map(|d| t.gauge(d)).fold(0.0, f64::max).max(1e-300);
    let mut w = vec![1.0 / m as f64; m];
    let mut best = HullDistance { lower: f64::NEG_INFINITY, upper: f64::INFINITY, functional: vec![0.0; n] };
    for it in 0..4000 {
        let z = combine(&w);
        let g = t.subgradient(&z);
        best.upper = best.upper.min(t.gauge(&z));
        let lower = diffs.iter().map(|d| dot(&g, d)).fold(f64::INFINITY, f64::min);
        if lower > best.lower {
            best.lower = lower;
            best.functional = g.clone();
        }
        if best.upper - best.lower <= GAP_TOL * best.upper.max(1.0) {
            break;
        }
        let grad: Vec<f64> = diffs.iter().map(|d| dot(&g, d)).collect();
        let gn = norm2(&grad).max(1e-300);
        let step = scale / (gn * ((it + 1) as f64).sqrt());
        w = project_simplex(&w.iter().zip(&grad).map(|(wi, gi)| wi - step * gi).collect::<Vec<_>>());
    }
    best.lower = best.lower.max(0.0);
    best
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cumulative += ui;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Points of `K` for the greedy search: a lattice clipped to `K` (at most
/// [`MAX_CANDIDATES`] points) plus the vertices of `K` when it has them.
pub fn separation_candidates(k: &ConvexBody, t: &ConvexBody, effort: &Effort) -> Result<Vec<Point>> {
    let radius = crate::covering::circumradius(k, &ConvexBody::euclidean_ball(k.dim(), 1.0)?)?.hi;
    let mut spacing = crate::nets::dyadic_floor(radius / 8.0);
    let points = loop {
        let grid = CandidateGrid::with_spacing(k, t, spacing, effort.grid_budget)?;
        let inside: Vec<Point> = grid.points.into_iter().filter(|p| k.gauge(p) <= 1.0).collect();
        if inside.len() <= MAX_CANDIDATES {
            break inside;
        }
        spacing *= 2.0;
    };
    let mut out = points;
    if let Some(p) = k.polytope() {
        out.extend(p.vertices);
    }
    Ok(out)
}

#[derive(PartialEq)]
struct Keyed(f64, usize);

impl Eq for Keyed {}

impl PartialOrd for Keyed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Keyed {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(other.1.cmp(&self.1))
    }
}

/// Order in which a greedy run adds admissible candidates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pick {
    /// Candidate farthest from the current hull. Distances only shrink as
    /// the hull grows, so stale heap keys are valid upper bounds.
    Farthest,
    /// Admissible candidate closest to the hull, which packs tighter chains
    /// such as `−1, 0, 1` in the interval.
    Nearest,
}

/// One greedy run from `start`, adding points while some candidate is at
/// hull distance at least 1.
fn greedy_run(metric: &HullMetric, candidates: &[Point], start: usize, pick: Pick, seed: u64) -> SeparationCertificate {
    let mut points = vec![candidates[start].clone()];
    let mut functionals = Vec::new();
    match pick {
        Pick::Farthest => {
            let mut heap: BinaryHeap<Keyed> =
                (0..candidates.len()).filter(|&i| i != start).map(|i| Keyed(f64::INFINITY, i)).collect();
            while let Some(Keyed(_, i)) = heap.pop() {
                let d = metric.distance(&candidates[i], &points);
                if d.upper < 1.0 - STEP_TOL {
                    continue;
                }
                let next_best = heap.peek().map_or(f64::NEG_INFINITY, |k| k.0);
                if d.upper < next_best {
                    heap.push(Keyed(d.upper, i));
                    continue;
                }
                if d.lower >= 1.0 - STEP_TOL {
                    points.push(candidates[i].clone());
                    functionals.push(d.functional);
                }
            }
        }
        Pick::Nearest => {
            let mut alive: Vec<usize> = (0..candidates.len()).filter(|&i| i != start).collect();
            loop {
                let dists: Vec<HullDistance> = alive.iter().map(|&i| metric.distance(&candidates[i], &points)).collect();
                let mut best: Option<(usize, f64)> = None;
                for (slot, d) in dists.iter().enumerate() {
                    if d.lower >= 1.0 - STEP_TOL && best.is_none_or(|(_, b)| d.lower < b) {
                        best = Some((slot, d.lower));
                    }
                }
                let Some((slot, _)) = best else { break };
                let chosen = alive[slot];
                points.push(candidates[chosen].clone());
                functionals.push(dists[slot].functional.clone());
                alive = alive
                    .iter()
                    .zip(&dists)
                    .filter(|(&i, d)| i != chosen && d.upper >= 1.0 - STEP_TOL)
                    .map(|(&i, _)| i)
                    .collect();
            }
        }
    }
    SeparationCertificate { points, functionals, seed }
}

fn lex_cmp(a: &SeparationCertificate, b: &SeparationCertificate) -> Ordering {
    for (p, q) in a.points.iter().zip(&b.points) {
        for (x, y) in p.iter().zip(q) {
            match x.total_cmp(y) {
                Ordering::Equal => {}
                o => return o,
            }
        }
    }
    a.points.len().cmp(&b.points.len())
}

/// Greedy lower bound on `M̂(K,T)` with `restarts` seeded starts: starts 0
/// and 1 use the candidate of largest `T`-gauge, the rest are drawn at
/// random.
/// Even restarts add the farthest candidate, odd ones the nearest
/// admissible one. Keeps the longest certificate, ties broken
/// lexicographically.
pub fn separation_greedy_lower(
    k: &ConvexBody,
    t: &ConvexBody,
    restarts: usize,
    candidates: &[Point],
    seed: u64,
) -> Result<SeparationCertificate> {
    if restarts < 1 {
        return Err(Error::Precondition("restarts must be at least 1".into()));
    }
    if k.dim() != t.dim() {
        return Err(Error::Precondition("K and T have different dimensions".into()));
    }
    let inside: Vec<Point> = candidates.iter().filter(|p| k.gauge(p) <= 1.0 + 1e-12).cloned().collect();
    if inside.is_empty() {
        return Ok(SeparationCertificate { points: vec![vec![0.0; k.dim()]], functionals: Vec::new(), seed });
    }
    let metric = HullMetric::new(t);
    let widest = (0..inside.len()).fold(0, |b, i| if t.gauge(&inside[i]) > t.gauge(&inside[b]) { i } else { b });
    let starts: Vec<usize> = (0..restarts as u64)
        .map(|r| {
            if r < 2 {
                widest
            } else {
                ChaCha8Rng::seed_from_u64(seed ^ r.wrapping_mul(0xA076_1D64_78BD_642F)).random_range(0..inside.len())
            }
        })
        .collect();
    let runs: Vec<SeparationCertificate> = starts
        .par_iter()
        .enumerate()
        .map(|(r, &s)| greedy_run(&metric, &inside, s, if r % 2 == 0 { Pick::Farthest } else { Pick::Nearest }, seed))
        .collect();
    let best = runs
        .into_iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then_with(|| lex_cmp(b, a)))
        .expect("at least one restart");
    debug!("separation greedy: {} points over {} candidates", best.len(), inside.len());
    Ok(best)
}

/// Re-checks a certificate from scratch: membership in `K`, each step's
/// functional, and an independent hull-distance computation. Steps must
/// clear `1 − η`.
pub fn verify_separation(k: &ConvexBody, t: &ConvexBody, cert: &SeparationCertificate, eta: f64) -> Result<(), String> {
    if cert.points.is_empty() {
        return Err("certificate has no points".into());
    }
    if cert.functionals.len() + 1 != cert.points.len() {
        return Err(format!("{} points need {} functionals, found {}", cert.points.len(), cert.points.len() - 1, cert.functionals.len()));
    }
    let n = k.dim();
    for (j, p) in cert.points.iter().enumerate() {
        if p.len() != n || p.iter().any(|v| !v.is_finite()) {
            return Err(format!("point {j} is malformed"));
        }
        let g = k.gauge(p);
        if g > 1.0 + 1e-9 {
            return Err(format!("point {j} lies outside K (gauge {g})"));
        }
    }
    let metric = HullMetric::new(t);
    for j in 1..cert.points.len() {
        let f = &cert.functionals[j - 1];
        if f.len() != n || f.iter().any(|v| !v.is_finite()) {
            return Err(format!("functional {j} is malformed"));
        }
        let h = t.support(f);
        if !(h > 0.0) {
            return Err(format!("functional {j} is zero"));
        }
        let x = &cert.points[j];
        let margin = cert.points[..j].iter().map(|p| dot(f, &sub(x, p))).fold(f64::INFINITY, f64::min) / h;
        if margin < 1.0 - eta {
            return Err(format!("step {j}: functional separates by {margin}, below 1 − η"));
        }
        let d = metric.distance(x, &cert.points[..j]);
        if d.upper < 1.0 - eta {
            return Err(format!("step {j}: hull distance is at most {}, below 1 − η", d.upper));
        }
    }
    Ok(())
}

/// `N(K, (1+η)T/2).hi`, an upper bound on `M̂(K, (1+η)T)`.
pub fn separation_upper(k: &ConvexBody, t: &ConvexBody, effort: &Effort) -> Result<u64> {
    Ok(cover_bracket(k, t, (1.0 + effort.eta) / 2.0, false, effort)?.hi)
}

/// Both sides of `M̂(K,T) ≤ M̂(T°, K°/2)²` under the slack convention: the
/// greedy lower bound on `M̂(K, (1+η)T)` against the square of
/// `N(T°, (1+η)K°/4).hi`, which bounds `M̂(T°, (1+η)K°/2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationDualityRow {
    pub lower: u64,
    pub dual_cover_hi: u64,
    pub rhs: u128,
    pub holds: bool,
    pub certificate: SeparationCertificate,
}

pub fn separation_duality_check(k: &ConvexBody, t: &ConvexBody, effort: &Effort) -> Result<SeparationDualityRow> {
    effort.validate()?;
    let inflated = t.scaled(1.0 + effort.eta);
    let candidates = separation_candidates(k, &inflated, effort)?;
    let certificate = separation_greedy_lower(k, &inflated, effort.restarts, &candidates, effort.seed)?;
    let dual_cover_hi = cover_bracket(&t.polar(), &k.polar(), (1.0 + effort.eta) / 4.0, false, effort)?.hi;
    let rhs = (dual_cover_hi as u128).saturating_mul(dual_cover_hi as u128);
    let lower = certificate.len() as u64;
    Ok(SeparationDualityRow { lower, dual_cover_hi, rhs, holds: (lower as u128) <= rhs, certificate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(a: f64) -> ConvexBody {
        ConvexBody::cube(1, a).unwrap()
    }

    #[test]
    fn interval_separates_three_points() {
        let k = seg(1.0);
        let cands: Vec<Point> = (-8..=8).map(|i| vec![i as f64 / 8.0]).collect();
        let cert = separation_greedy_lower(&k, &k, 4, &cands, 0).unwrap();
        assert_eq!(cert.len(), 3);
        verify_separation(&k, &k, &cert, 1e-6).unwrap();
        let mut order: Vec<f64> = cert.points.iter().map(|p| p[0]).collect();
        order.sort_by(f64::total_cmp);
        assert_eq!(order, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn slack_drops_the_boundary_case() {
        let k = seg(1.0);
        let cands: Vec<Point> = (-8..=8).map(|i| vec![i as f64 / 8.0]).collect();
        let cert = separation_greedy_lower(&k, &k.scaled(1.0 + 1e-6), 4, &cands, 0).unwrap();
        assert_eq!(cert.len(), 2);
        assert_eq!(separation_upper(&k, &k, &Effort::default()).unwrap(), 2);
    }

    #[test]
    fn three_k_admits_one_point() {
        let k = ConvexBody::euclidean_ball(2, 1.0).unwrap();
        let cands = separation_candidates(&k, &k, &Effort::default()).unwrap();
        let cert = separation_greedy_lower(&k, &k.scaled(3.0), 2, &cands, 0).unwrap();
        assert_eq!(cert.len(), 1);
    }

    #[test]
    fn routes_agree_on_hull_distance() {
        // the unit disk through its facet-free, whitened and subgradient routes
        let hull = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-0.5, 0.2]];
        let x = [2.0, 2.0];
        let disk = ConvexBody::euclidean_ball(2, 1.0).unwrap();
        let lp2 = ConvexBody::lp_ball(2.0001, vec![1.0, 1.0]).unwrap();
        let a = HullMetric::new(&disk).distance(&x, &hull);
        let b = HullMetric::new(&lp2).distance(&x, &hull);
        // nearest hull point is on the segment (1,0)-(0,1): distance √2·1.5
        let exact = 1.5 * 2f64.sqrt();
        assert!(a.lower <= exact + 1e-12 && exact - a.lower < 1e-6, "{a:?}");
        assert!((b.upper - exact).abs() < 1e-3, "{b:?}");
        assert!(b.lower <= b.upper);
        let square = ConvexBody::cube(2, 1.0).unwrap();
        let c = HullMetric::new(&square).distance(&x, &hull);
        assert!((c.lower - 1.5).abs() < 1e-9, "{c:?}");
    }

    #[test]
    fn tampered_certificate_is_refuted() {
        let k = ConvexBody::cube(2, 1.0).unwrap();
        let t = ConvexBody::euclidean_ball(2, 0.7).unwrap();
        let cands = separation_candidates(&k, &t, &Effort::default()).unwrap();
        let cert = separation_greedy_lower(&k, &t, 4, &cands, 1).unwrap();
        assert!(cert.len() >= 3);
        verify_separation(&k, &t, &cert, 1e-6).unwrap();
        let mut moved = cert.clone();
        moved.points[2] = moved.points[1].iter().map(|v| v * 0.99).collect();
        assert!(verify_separation(&k, &t, &moved, 1e-6).is_err());
        let mut outside = cert.clone();
        outside.points[0] = vec![1.5, 0.0];
        assert!(verify_separation(&k, &t, &outside, 1e-6).is_err());
        let mut short = cert;
        short.functionals.pop();
        assert!(verify_separation(&k, &t, &short, 1e-6).is_err());
    }

    #[test]
    fn duality_check_on_disk_and_l1_linf() {
        let effort = Effort::default();
        let disk = ConvexBody::euclidean_ball(2, 1.0).unwrap();
        let row = separation_duality_check(&disk, &disk, &effort).unwrap();
        assert!(row.holds && row.lower >= 1);
        let l1 = ConvexBody::cross_polytope(2, 1.0).unwrap();
        let linf = ConvexBody::cube(2, 1.0).unwrap();
        let row = separation_duality_check(&l1, &linf, &effort).unwrap();
        assert!(row.holds, "{} > {}", row.lower, row.rhs);
        verify_separation(&l1, &linf.scaled(1.0 + effort.eta), &row.certificate, effort.eta).unwrap();
    }
}
