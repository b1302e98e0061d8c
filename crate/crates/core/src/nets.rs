//! Candidate grids, nets, packings and cover certificates.
//!
//! Grids are lattices `h·ℤⁿ` clipped to a slightly inflated copy of `K`. If
//! every grid point is within `ρ − r_T` of a center, where `r_T` is the
//! `T`-gauge radius of a grid cell, then all of `K` is within `ρ`: that is
//! the inflation certificate. For polytope pairs an exact test is also
//! available: subtract the translates `c + ρT` from `K` piece by piece and
//! check that nothing with interior survives.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use log::debug;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{ConvexBody, Polytope};
use crate::effort::Effort;
use crate::error::{Error, Result};
use crate::linalg::{dot, mat_vec, min_enclosing_ball, norm2, sort_points, sub, Point};
use crate::lp::{LinearProgram, LpOutcome, Relation};

const NONE: u32 = u32::MAX;
/// Element cap for one level of the exact polytope cover search.
const MAX_EXACT_ELEMENTS: usize = 6000;
/// Piece cap for the polytope subtraction.
const MAX_PIECES: usize = 20_000;

/// Largest power of two not exceeding `x`.
pub fn dyadic_floor(x: f64) -> f64 {
    assert!(x > 0.0 && x.is_finite());
    2f64.powi(x.log2().floor() as i32)
}

/// `max_{s ∈ {±1}ⁿ} gauge(body, s·h/2)`: every point is within this gauge
/// distance of its nearest lattice point.
pub fn cell_radius(body: &ConvexBody, spacing: f64) -> f64 {
    let n = body.dim();
    (0..1usize << n)
        .map(|mask| {
            let x: Point = (0..n).map(|i| if mask >> i & 1 == 1 { -0.5 } else { 0.5 } * spacing).collect();
            body.gauge(&x)
        })
        .fold(0.0, f64::max)
}

/// Lattice points of `h·ℤⁿ` with `gauge(K, g) ≤ 1 + r_K`, in row-major order
/// (axis 0 most significant).
#[derive(Clone, Debug)]
pub struct CandidateGrid {
    pub spacing: f64,
    pub cell_radius_t: f64,
    pub cell_radius_k: f64,
    pub points: Vec<Point>,
    coords: Vec<Vec<i64>>,
    half_counts: Vec<i64>,
    dense: Vec<u32>,
}

fn box_count(half: &[i64]) -> u64 {
    half.iter().fold(1u64, |acc, m| acc.saturating_mul(2 * *m as u64 + 1))
}

fn coords_of(mut linear: u64, half: &[i64]) -> Vec<i64> {
    let mut c = vec![0i64; half.len()];
    for i in (0..half.len()).rev() {
        let side = 2 * half[i] as u64 + 1;
        c[i] = (linear % side) as i64 - half[i];
        linear /= side;
    }
    c
}

impl CandidateGrid {
    /// Grid of spacing `h` around `K`, measured against `T`.
    pub fn with_spacing(k: &ConvexBody, t: &ConvexBody, spacing: f64, budget: u64) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Precondition(format!("grid spacing must be positive, got {spacing}")));
        }
        let cell_radius_k = cell_radius(k, spacing);
        let cell_radius_t = cell_radius(t, spacing);
        let half_counts: Vec<i64> = k
            .half_widths()
            .iter()
            .map(|w| (w * (1.0 + cell_radius_k) / spacing + 1e-9).floor() as i64)
            .collect();
        let total = box_count(&half_counts);
        if total > budget {
            return Err(Error::Budget { what: "grid points", needed: total, budget });
        }
        let limit = 1.0 + cell_radius_k + 1e-12;
        let kept: Vec<(u64, Vec<i64>, Point)> = (0..total)
            .into_par_iter()
            .filter_map(|l| {
                let c = coords_of(l, &half_counts);
                let p: Point = c.iter().map(|&i| i as f64 * spacing).collect();
                (k.gauge(&p) <= limit).then_some((l, c, p))
            })
            .collect();
        let mut dense = vec![NONE; total as usize];
        let mut coords = Vec::with_capacity(kept.len());
        let mut points = Vec::with_capacity(kept.len());
        for (idx, (l, c, p)) in kept.into_iter().enumerate() {
            dense[l as usize] = idx as u32;
            coords.push(c);
            points.push(p);
        }
        Ok(CandidateGrid { spacing, cell_radius_t, cell_radius_k, points, coords, half_counts, dense })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.half_counts.len()
    }

    fn lookup(&self, coord: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for (c, &m) in coord.iter().zip(&self.half_counts) {
            if c.abs() > m {
                return None;
            }
            idx = idx * (2 * m + 1) as usize + (c + m) as usize;
        }
        match self.dense[idx] {
            NONE => None,
            i => Some(i as usize),
        }
    }

    fn point_at(&self, coord: &[i64]) -> Point {
        coord.iter().map(|&i| i as f64 * self.spacing).collect()
    }
}

/// Dyadic grid whose `T`-cell radius is at most `target_cell_radius`.
pub fn grid_candidates(
    k: &ConvexBody,
    t: &ConvexBody,
    target_cell_radius: f64,
    effort: &Effort,
) -> Result<CandidateGrid> {
    if !(target_cell_radius > 0.0) {
        return Err(Error::Precondition("target cell radius must be positive".into()));
    }
    let spacing = dyadic_floor(target_cell_radius / cell_radius(t, 1.0));
    CandidateGrid::with_spacing(k, t, spacing, effort.grid_budget)
}

/// Grid for certifying covers at scale `ρ`: cell radius near `cell_frac·ρ`,
/// coarsened (never past `ρ/2`) until the bounding box holds at most
/// `grid_soft_points` lattice points.
pub fn grid_for_scale(k: &ConvexBody, t: &ConvexBody, rho: f64, effort: &Effort) -> Result<CandidateGrid> {
    let unit = cell_radius(t, 1.0);
    let mut spacing = dyadic_floor(effort.cell_frac * rho / unit);
    let widths = k.half_widths();
    loop {
        let half: Vec<i64> = widths.iter().map(|w| (w * 1.5 / spacing).floor() as i64).collect();
        if box_count(&half) <= effort.grid_soft_points || 2.0 * spacing * unit >= 0.5 * rho {
            break;
        }
        spacing *= 2.0;
    }
    if spacing * unit >= 0.5 * rho {
        return Err(Error::Budget {
            what: "grid points at the requested scale",
            needed: box_count(&widths.iter().map(|w| (w / spacing).floor() as i64).collect::<Vec<_>>()),
            budget: effort.grid_soft_points,
        });
    }
    CandidateGrid::with_spacing(k, t, spacing, effort.grid_budget)
}

/// Integer offsets `o` with `gauge(T, h·o) ≤ radius`.
fn stencil(t: &ConvexBody, spacing: f64, radius: f64) -> Vec<Vec<i64>> {
    let half: Vec<i64> =
        t.half_widths().iter().map(|w| (w * radius / spacing + 1e-9).floor() as i64).collect();
    let limit = radius * (1.0 + 1e-12);
    (0..box_count(&half))
        .map(|l| coords_of(l, &half))
        .filter(|o| {
            let x: Point = o.iter().map(|&i| i as f64 * spacing).collect();
            t.gauge(&x) <= limit
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Greedy set cover

/// Lazy greedy max-coverage. `cover(c, f)` calls `f(e)` for every element
/// covered by candidate `c`. Ties go to the larger `tie` key, then the lowest
/// candidate index. Returns `None` when some element has no candidate.
fn lazy_greedy<K: Ord + Copy + Send>(
    n_cands: usize,
    n_elems: usize,
    cover: &(dyn Fn(usize, &mut dyn FnMut(usize)) + Sync),
    tie: &(dyn Fn(usize) -> K + Sync),
) -> Option<Vec<usize>> {
    let init: Vec<u32> = (0..n_cands)
        .into_par_iter()
        .map(|c| {
            let mut g = 0u32;
            cover(c, &mut |_| g += 1);
            g
        })
        .collect();
    let mut heap: BinaryHeap<(u32, K, Reverse<usize>)> = init
        .iter()
        .enumerate()
        .filter(|(_, g)| **g > 0)
        .map(|(c, &g)| (g, tie(c), Reverse(c)))
        .collect();
    let mut covered = vec![false; n_elems];
    let mut remaining = n_elems;
    let mut chosen = Vec::new();
    while remaining > 0 {
        let (stored, key, Reverse(c)) = heap.pop()?;
        let mut now = 0u32;
        cover(c, &mut |e| now += u32::from(!covered[e]));
        if now == 0 {
            continue;
        }
        if now < stored {
            heap.push((now, key, Reverse(c)));
            continue;
        }
        chosen.push(c);
        cover(c, &mut |e| {
            if !covered[e] {
                covered[e] = true;
                remaining -= 1;
            }
        });
    }
    Some(chosen)
}

/// Drops chosen candidates whose elements are all covered twice, scanning
/// in reverse selection order.
fn prune_redundant(
    chosen: Vec<usize>,
    n_elems: usize,
    cover: &(dyn Fn(usize, &mut dyn FnMut(usize)) + Sync),
) -> Vec<usize> {
    let mut count = vec![0u32; n_elems];
    for &c in &chosen {
        cover(c, &mut |e| count[e] += 1);
    }
    let mut keep = vec![true; chosen.len()];
    for i in (0..chosen.len()).rev() {
        let mut needed = false;
        cover(chosen[i], &mut |e| needed |= count[e] < 2);
        if !needed {
            keep[i] = false;
            cover(chosen[i], &mut |e| count[e] -= 1);
        }
    }
    chosen.into_iter().zip(keep).filter_map(|(c, k)| k.then_some(c)).collect()
}

/// Explicit set-cover instance: `cand_elems[c]` lists the elements candidate
/// `c` covers, sorted.
#[derive(Clone, Debug)]
pub struct SetCover {
    pub n_elems: usize,
    pub cand_elems: Vec<Vec<u32>>,
}

/// Solution of [`SetCover::solve`].
#[derive(Clone, Debug)]
pub struct CoverSolution {
    pub chosen: Vec<usize>,
    /// True when branch and bound finished, or met the lower-bound hint.
    pub optimal: bool,
}

impl SetCover {
    fn elem_cands(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.n_elems];
        for (c, es) in self.cand_elems.iter().enumerate() {
            for &e in es {
                out[e as usize].push(c as u32);
            }
        }
        out
    }

    pub fn greedy(&self) -> Option<Vec<usize>> {
        let cover = |c: usize, f: &mut dyn FnMut(usize)| {
            for &e in &self.cand_elems[c] {
                f(e as usize)
            }
        };
        let chosen = lazy_greedy(self.cand_elems.len(), self.n_elems, &cover, &|_| ())?;
        Some(prune_redundant(chosen, self.n_elems, &cover))
    }

    /// Sweep heuristic: take the first uncovered element in index order and
    /// cover it with the candidate of largest gain (lowest index on ties).
    /// Optimal for intervals and products of intervals on aligned lattices.
    fn first_uncovered(&self, elem_cands: &[Vec<u32>]) -> Option<Vec<usize>> {
        let mut covered = vec![false; self.n_elems];
        let mut chosen = Vec::new();
        for e in 0..self.n_elems {
            if covered[e] {
                continue;
            }
            let gain = |c: u32| self.cand_elems[c as usize].iter().filter(|&&x| !covered[x as usize]).count();
            let &c = elem_cands[e].iter().max_by_key(|&&c| (gain(c), Reverse(c)))?;
            for &x in &self.cand_elems[c as usize] {
                covered[x as usize] = true;
            }
            chosen.push(c as usize);
        }
        let cover = |c: usize, f: &mut dyn FnMut(usize)| {
            for &e in &self.cand_elems[c] {
                f(e as usize)
            }
        };
        Some(prune_redundant(chosen, self.n_elems, &cover))
    }

    /// Greedy incumbent, then branch and bound on the dominance-reduced
    /// instance. Stops early once a solution of size `lower_hint` is found.
    pub fn solve(&self, lower_hint: usize, node_limit: u64) -> Option<CoverSolution> {
        let elem_cands = self.elem_cands();
        let greedy = self.greedy()?;
        let sweep = self.first_uncovered(&elem_cands)?;
        let incumbent = if sweep.len() < greedy.len() { sweep } else { greedy };
        if incumbent.len() <= lower_hint.max(1) {
            return Some(CoverSolution { chosen: incumbent, optimal: true });
        }
        let (kept, reduced) = self.reduce(&elem_cands);
        let mut red_elem = vec![Vec::new(); self.n_elems];
        for (rc, es) in reduced.iter().enumerate() {
            for &e in es {
                red_elem[e as usize].push(rc as u32);
            }
        }
        let mut search = CoverSearch {
            cand_elems: &reduced,
            elem_cands: &red_elem,
            cover_count: vec![0; self.n_elems],
            banned: vec![false; reduced.len()],
            stamp: vec![0; reduced.len()],
            stamp_now: 0,
            chosen: Vec::new(),
            best: None,
            bound: incumbent.len(),
            target: lower_hint,
            work: 0,
            work_limit: node_limit.saturating_mul(100),
            aborted: false,
        };
        search.run();
        let aborted = search.aborted;
        match search.best {
            Some(best) => {
                let optimal = !aborted || best.len() <= lower_hint;
                Some(CoverSolution { chosen: best.iter().map(|&c| kept[c as usize]).collect(), optimal })
            }
            None => Some(CoverSolution { chosen: incumbent, optimal: !aborted }),
        }
    }

    /// Removes candidates whose element set is contained in another's (the
    /// lower index survives among equals).
    fn reduce(&self, elem_cands: &[Vec<u32>]) -> (Vec<usize>, Vec<Vec<u32>>) {
        let subset = |a: &[u32], b: &[u32]| {
            let mut j = 0;
            for &x in a {
                while j < b.len() && b[j] < x {
                    j += 1;
                }
                if j == b.len() || b[j] != x {
                    return false;
                }
            }
            true
        };
        let dominated: Vec<bool> = (0..self.cand_elems.len())
            .into_par_iter()
            .map(|a| {
                let es = &self.cand_elems[a];
                let Some(&rare) = es.iter().min_by_key(|&&e| elem_cands[e as usize].len()) else {
                    return true;
                };
                elem_cands[rare as usize].iter().any(|&b| {
                    let b = b as usize;
                    let other = &self.cand_elems[b];
                    b != a && (other.len() > es.len() || (other.len() == es.len() && b < a)) && subset(es, other)
                })
            })
            .collect();
        let kept: Vec<usize> = (0..self.cand_elems.len()).filter(|&c| !dominated[c]).collect();
        let reduced = kept.iter().map(|&c| self.cand_elems[c].clone()).collect();
        (kept, reduced)
    }
}

struct CoverSearch<'a> {
    cand_elems: &'a [Vec<u32>],
    elem_cands: &'a [Vec<u32>],
    cover_count: Vec<u32>,
    banned: Vec<bool>,
    stamp: Vec<u32>,
    stamp_now: u32,
    chosen: Vec<u32>,
    best: Option<Vec<u32>>,
    /// Size of the best known solution.
    bound: usize,
    target: usize,
    work: u64,
    work_limit: u64,
    aborted: bool,
}

impl CoverSearch<'_> {
    fn run(&mut self) {
        self.search();
    }

    fn search(&mut self) {
        if self.aborted || self.bound <= self.target {
            return;
        }
        self.work += self.cover_count.len() as u64 + 1;
        if self.work > self.work_limit {
            self.aborted = true;
            return;
        }
        let mut uncovered: Vec<(usize, usize)> = Vec::new();
        for (e, &cnt) in self.cover_count.iter().enumerate() {
            if cnt == 0 {
                let avail = self.elem_cands[e].iter().filter(|&&c| !self.banned[c as usize]).count();
                if avail == 0 {
                    return;
                }
                uncovered.push((avail, e));
            }
        }
        if uncovered.is_empty() {
            if self.chosen.len() < self.bound {
                self.bound = self.chosen.len();
                self.best = Some(self.chosen.clone());
            }
            return;
        }
        if self.chosen.len() + 1 >= self.bound {
            return;
        }
        uncovered.sort_unstable();
        // elements with pairwise disjoint candidate sets need distinct centers
        self.stamp_now += 1;
        let mut lb = 0;
        for &(_, e) in &uncovered {
            let cands = &self.elem_cands[e];
            if cands.iter().all(|&c| self.banned[c as usize] || self.stamp[c as usize] != self.stamp_now) {
                lb += 1;
                for &c in cands {
                    self.stamp[c as usize] = self.stamp_now;
                }
            }
        }
        if self.chosen.len() + lb >= self.bound {
            return;
        }
        let e = uncovered[0].1;
        let mut options: Vec<(Reverse<usize>, u32)> = self.elem_cands[e]
            .iter()
            .filter(|&&c| !self.banned[c as usize])
            .map(|&c| {
                let gain = self.cand_elems[c as usize].iter().filter(|&&x| self.cover_count[x as usize] == 0).count();
                (Reverse(gain), c)
            })
            .collect();
        options.sort_unstable();
        let mut banned_here = Vec::new();
        for (_, c) in options {
            for &x in &self.cand_elems[c as usize] {
                self.cover_count[x as usize] += 1;
            }
            self.chosen.push(c);
            self.search();
            self.chosen.pop();
            for &x in &self.cand_elems[c as usize] {
                self.cover_count[x as usize] -= 1;
            }
            self.banned[c as usize] = true;
            banned_here.push(c);
            if self.aborted || self.bound <= self.target {
                break;
            }
        }
        for c in banned_here {
            self.banned[c as usize] = false;
        }
    }
}

// ---------------------------------------------------------------------------
// Spatial bucketing

/// Axis-aligned buckets of a point set; `query` visits every point whose
/// coordinates each differ from `x` by at most the bucket width.
struct BoxIndex {
    width: Vec<f64>,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl BoxIndex {
    fn new(points: &[Point], width: Vec<f64>) -> Self {
        let mut idx = BoxIndex { width, buckets: HashMap::new() };
        for (i, p) in points.iter().enumerate() {
            idx.insert(i, p);
        }
        idx
    }

    fn key(&self, x: &[f64]) -> Vec<i64> {
        x.iter().zip(&self.width).map(|(v, w)| (v / w).floor() as i64).collect()
    }

    fn insert(&mut self, i: usize, p: &[f64]) {
        let k = self.key(p);
        self.buckets.entry(k).or_default().push(i);
    }

    fn query(&self, x: &[f64], mut f: impl FnMut(usize)) {
        let base = self.key(x);
        let n = base.len();
        let mut key = base.clone();
        for m in 0..3usize.pow(n as u32) {
            let mut r = m;
            for i in 0..n {
                key[i] = base[i] + (r % 3) as i64 - 1;
                r /= 3;
            }
            if let Some(v) = self.buckets.get(&key) {
                v.iter().for_each(|&i| f(i));
            }
        }
    }
}

fn bucket_widths(t: &ConvexBody, radius: f64) -> Vec<f64> {
    t.half_widths().iter().map(|w| w * radius * (1.0 + 1e-9)).collect()
}

// ---------------------------------------------------------------------------
// Nets and packings

/// Greedy `δ`-net of `K` in the gauge of `T`, centers drawn from grid points
/// in `K`. Each round takes the candidate covering the most uncovered grid
/// points within `δ − r_T`, preferring smaller `gauge(K, ·)` and then the
/// lower grid index.
pub fn build_net(k: &ConvexBody, t: &ConvexBody, delta: f64, grid: &CandidateGrid) -> Result<Vec<Point>> {
    if !(grid.cell_radius_t <= delta / 2.0) {
        return Err(Error::Precondition(format!(
            "grid cell radius {} exceeds δ/2 = {}; use a finer grid",
            grid.cell_radius_t,
            delta / 2.0
        )));
    }
    let inside: Vec<usize> = (0..grid.len()).filter(|&i| k.gauge(&grid.points[i]) <= 1.0 + 1e-12).collect();
    let mut elem_of = vec![NONE; grid.len()];
    for (e, &i) in inside.iter().enumerate() {
        elem_of[i] = e as u32;
    }
    let offsets = stencil(t, grid.spacing, delta - grid.cell_radius_t);
    let gauges: Vec<u64> = inside.iter().map(|&i| k.gauge(&grid.points[i]).to_bits()).collect();
    let cover = |c: usize, f: &mut dyn FnMut(usize)| {
        let base = &grid.coords[inside[c]];
        let mut at = base.clone();
        for o in &offsets {
            for d in 0..at.len() {
                at[d] = base[d] + o[d];
            }
            if let Some(g) = grid.lookup(&at) {
                if elem_of[g] != NONE {
                    f(elem_of[g] as usize);
                }
            }
        }
    };
    let chosen = lazy_greedy(inside.len(), inside.len(), &cover, &|c| Reverse(gauges[c]))
        .ok_or_else(|| Error::Precondition("grid has no points inside K".into()))?;
    let chosen = prune_redundant(chosen, inside.len(), &cover);
    Ok(chosen.into_iter().map(|c| grid.points[inside[c]].clone()).collect())
}

/// Points of `K` pairwise farther apart than `ε(1+η)` in the gauge of `T`.
/// Candidates are the vertices of `K` (for polytopes) followed by the grid
/// points inside `K`. Takes a row-major greedy packing and, when at most
/// `exact_cutoff` candidates exist, the exact maximum independent set of the
/// conflict graph; returns the larger.
pub fn max_packing(
    k: &ConvexBody,
    t: &ConvexBody,
    eps: f64,
    grid: &CandidateGrid,
    exact_cutoff: usize,
    eta: f64,
    node_limit: u64,
) -> Vec<Point> {
    let mut cands: Vec<Point> = k.polytope().map(|p| sorted(p.vertices)).unwrap_or_default();
    cands.extend(grid.points.iter().filter(|p| k.gauge(p) <= 1.0 + 1e-12).cloned());
    packing_over(t, eps, &cands, exact_cutoff, eta, node_limit).0
}

fn sorted(mut pts: Vec<Point>) -> Vec<Point> {
    sort_points(&mut pts);
    pts
}

/// Packing over an explicit candidate list; the flag is true when the exact
/// search ran to completion.
fn packing_over(
    t: &ConvexBody,
    eps: f64,
    cands: &[Point],
    exact_cutoff: usize,
    eta: f64,
    node_limit: u64,
) -> (Vec<Point>, bool) {
    let sep = eps * (1.0 + eta);
    let far = |a: &[f64], b: &[f64]| t.gauge(&sub(a, b)) > sep;
    let mut chosen: Vec<usize> = Vec::new();
    let mut index = BoxIndex { width: bucket_widths(t, sep), buckets: HashMap::new() };
    for (i, p) in cands.iter().enumerate() {
        let mut ok = true;
        index.query(p, |j| ok &= far(p, &cands[j]));
        if ok {
            chosen.push(i);
            index.insert(i, p);
        }
    }
    let mut best: Vec<Point> = chosen.iter().map(|&i| cands[i].clone()).collect();
    let mut exact = false;
    if cands.len() <= exact_cutoff {
        let (mis, done) = max_independent_set(cands.len(), &|i, j| !far(&cands[i], &cands[j]), node_limit);
        exact = done;
        if mis.len() > best.len() {
            best = mis.into_iter().map(|i| cands[i].clone()).collect();
        }
    } else if exact_cutoff > 0 {
        debug!("packing: {} candidates exceed exact cutoff {exact_cutoff}; greedy only", cands.len());
    }
    (best, exact)
}

/// Maximum independent set by branch and bound (maximum clique in the
/// compatibility graph with greedy-coloring bounds).
fn max_independent_set(n: usize, conflict: &(dyn Fn(usize, usize) -> bool + Sync), node_limit: u64) -> (Vec<usize>, bool) {
    let words = n.div_ceil(64);
    let compat: Vec<Vec<u64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0u64; words];
            for j in 0..n {
                if j != i && !conflict(i, j) {
                    row[j / 64] |= 1 << (j % 64);
                }
            }
            row
        })
        .collect();
    struct Mis<'a> {
        compat: &'a [Vec<u64>],
        best: Vec<usize>,
        current: Vec<usize>,
        nodes: u64,
        limit: u64,
        aborted: bool,
    }
    fn members(set: &[u64]) -> Vec<usize> {
        let mut out = Vec::new();
        for (w, &bits) in set.iter().enumerate() {
            let mut b = bits;
            while b != 0 {
                out.push(w * 64 + b.trailing_zeros() as usize);
                b &= b - 1;
            }
        }
        out
    }
    impl Mis<'_> {
        fn expand(&mut self, mut pool: Vec<u64>) {
            self.nodes += 1;
            if self.nodes > self.limit {
                self.aborted = true;
                return;
            }
            // color classes are pairwise-incompatible sets
            let mut classes: Vec<Vec<u64>> = Vec::new();
            let mut order: Vec<(usize, usize)> = Vec::new();
            for v in members(&pool) {
                let row = &self.compat[v];
                let slot = classes.iter().position(|cls| cls.iter().zip(row).all(|(a, b)| a & b == 0));
                let k = match slot {
                    Some(k) => k,
                    None => {
                        classes.push(vec![0; pool.len()]);
                        classes.len() - 1
                    }
                };
                classes[k][v / 64] |= 1 << (v % 64);
                order.push((k + 1, v));
            }
            order.sort_unstable();
            for &(color, v) in order.iter().rev() {
                if self.current.len() + color <= self.best.len() || self.aborted {
                    return;
                }
                self.current.push(v);
                let next: Vec<u64> = pool.iter().zip(&self.compat[v]).map(|(a, b)| a & b).collect();
                if next.iter().all(|&w| w == 0) {
                    if self.current.len() > self.best.len() {
                        self.best = self.current.clone();
                    }
                } else {
                    self.expand(next);
                }
                self.current.pop();
                pool[v / 64] &= !(1 << (v % 64));
            }
        }
    }
    if n == 0 {
        return (Vec::new(), true);
    }
    let mut all = vec![u64::MAX; words];
    if !n.is_multiple_of(64) {
        all[words - 1] = (1u64 << (n % 64)) - 1;
    }
    let mut m = Mis { compat: &compat, best: Vec::new(), current: Vec::new(), nodes: 0, limit: node_limit, aborted: false };
    m.expand(all);
    let mut best = m.best;
    best.sort_unstable();
    (best, !m.aborted)
}

/// Packing lower bound used by the covering brackets: a fine-grid greedy
/// packing and an exact search on a coarse grid of at most `exact_cutoff`
/// candidates.
pub fn packing_lower(k: &ConvexBody, t: &ConvexBody, eps: f64, effort: &Effort) -> Result<Vec<Point>> {
    let verts: Vec<Point> = k.polytope().map(|p| sorted(p.vertices)).unwrap_or_default();
    let fine = match grid_for_scale(k, t, eps, effort) {
        Ok(g) => {
            let mut c = verts.clone();
            c.extend(g.points.iter().filter(|p| k.gauge(p) <= 1.0 + 1e-12).cloned());
            packing_over(t, eps, &c, 0, effort.eta, effort.node_limit).0
        }
        Err(Error::Budget { .. }) => Vec::new(),
        Err(e) => return Err(e),
    };
    let unit = cell_radius(t, 1.0);
    let mut spacing = dyadic_floor(eps / (4.0 * unit));
    let coarse = loop {
        let g = CandidateGrid::with_spacing(k, t, spacing, effort.grid_budget);
        if let Ok(g) = g {
            let mut c = verts.clone();
            c.extend(g.points.iter().filter(|p| k.gauge(p) <= 1.0 + 1e-12).cloned());
            if c.len() <= effort.exact_cutoff {
                break packing_over(t, eps, &c, effort.exact_cutoff, effort.eta, effort.node_limit).0;
            }
        }
        spacing *= 2.0;
    };
    Ok(if coarse.len() > fine.len() { coarse } else { fine })
}

// ---------------------------------------------------------------------------
// Cover certificates

/// How a cover was certified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CoverMethod {
    /// Polytope subtraction left no piece with interior.
    Exact,
    /// Every point of the lattice `spacing·ℤⁿ` near `K` lies within
    /// `ρ − r_T` of a center.
    Grid { spacing: f64 },
    /// A single center at the origin with `K ⊆ ρT`.
    Circumradius,
}

/// Explicit centers proving `N(K, ρT) ≤ centers.len()`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverCertificate {
    pub centers: Vec<Point>,
    pub radius_factor: f64,
    /// `r_T/ρ` for grid certificates, 0 otherwise.
    pub net_resolution: f64,
    #[serde(flatten)]
    pub method: CoverMethod,
    /// Centers are required to lie in `K`.
    pub restricted: bool,
}

impl CoverCertificate {
    pub fn count(&self) -> u64 {
        self.centers.len() as u64
    }
}

fn chebyshev(rows: &[(Point, f64)], n: usize) -> Result<Option<(Point, f64)>> {
    let mut obj = vec![0.0; n + 1];
    obj[n] = 1.0;
    let mut lp = LinearProgram::maximize(obj);
    for j in 0..n {
        lp.set_free(j);
    }
    for (a, b) in rows {
        let mut row = a.clone();
        row.push(norm2(a));
        lp.add(row, Relation::Le, *b);
    }
    match lp.solve_max() {
        LpOutcome::Optimal { x, value } => Ok(Some((x[..n].to_vec(), value))),
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(Error::Lp("unbounded Chebyshev problem on a bounded piece".into())),
    }
}

/// Interior points of `K \ ∪(c + ρT)` for polytopes, one per surviving piece
/// (at most `cap`). Pieces whose inscribed ball has radius ≤ `tol` count as
/// covered.
pub fn uncovered_witnesses(
    k: &Polytope,
    t: &Polytope,
    centers: &[Point],
    rho: f64,
    tol: f64,
    cap: usize,
) -> Result<Vec<Point>> {
    let n = k.facets.first().map_or(0, |a| a.len());
    let mut pieces: Vec<Vec<(Point, f64)>> = vec![k.facets.iter().map(|a| (a.clone(), 1.0)).collect()];
    for c in centers {
        let cut: Vec<(Point, f64)> = t.facets.iter().map(|g| (g.clone(), rho + dot(g, c))).collect();
        let mut next = Vec::new();
        for piece in pieces {
            let mut both = piece.clone();
            both.extend(cut.iter().cloned());
            if !matches!(chebyshev(&both, n)?, Some((_, r)) if r > tol) {
                next.push(piece);
                continue;
            }
            let mut acc = piece;
            for (g, beta) in &cut {
                let mut out = acc.clone();
                out.push((g.iter().map(|x| -x).collect(), -beta));
                if matches!(chebyshev(&out, n)?, Some((_, r)) if r > tol) {
                    next.push(out);
                }
                acc.push((g.clone(), *beta));
            }
        }
        if next.len() > MAX_PIECES {
            return Err(Error::Budget { what: "uncovered pieces", needed: next.len() as u64, budget: MAX_PIECES as u64 });
        }
        pieces = next;
        if pieces.is_empty() {
            return Ok(Vec::new());
        }
    }
    let mut out = Vec::new();
    for p in pieces.iter().take(cap) {
        if let Some((x, _)) = chebyshev(p, n)? {
            out.push(x);
        }
    }
    Ok(out)
}

fn exact_tolerance(k: &ConvexBody) -> f64 {
    1e-9 * k.half_widths().iter().fold(0.0f64, |m, w| m.max(*w))
}

/// True when `K ⊆ ∪(centers + ρT)`.
///
/// Polytope pairs are decided by exact subtraction (up to slivers thinner
/// than `1e−9·diam K`). Otherwise every grid point must lie within `ρ(1−δ)`
/// of a center, which requires `grid.cell_radius_t ≤ δρ`.
pub fn certify_cover(
    k: &ConvexBody,
    t: &ConvexBody,
    centers: &[Point],
    rho: f64,
    delta: f64,
    grid: &CandidateGrid,
) -> Result<bool> {
    if !(delta < 1.0) {
        return Err(Error::Precondition(format!("net resolution δ = {delta} must be < 1")));
    }
    if centers.is_empty() {
        return Ok(false);
    }
    if let (Some(kp), Some(tp)) = (k.polytope(), t.polytope()) {
        return Ok(uncovered_witnesses(&kp, &tp, centers, rho, exact_tolerance(k), 1)?.is_empty());
    }
    if grid.cell_radius_t > delta * rho * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "grid cell radius {} exceeds δρ = {}; use a finer grid",
            grid.cell_radius_t,
            delta * rho
        )));
    }
    Ok(grid_points_covered(t, &grid.points, centers, rho * (1.0 - delta)))
}

fn grid_points_covered(t: &ConvexBody, points: &[Point], centers: &[Point], radius: f64) -> bool {
    let index = BoxIndex::new(centers, bucket_widths(t, radius));
    let limit = radius * (1.0 + 1e-12);
    points.par_iter().all(|p| {
        let mut hit = false;
        index.query(p, |j| hit = hit || t.gauge(&sub(p, &centers[j])) <= limit);
        hit
    })
}

/// Re-checks a cover certificate from scratch; `Err` carries the refutation.
pub fn check_cover(k: &ConvexBody, t: &ConvexBody, cert: &CoverCertificate, effort: &Effort) -> std::result::Result<(), String> {
    let n = k.dim();
    let rho = cert.radius_factor;
    if t.dim() != n {
        return Err("K and T have different dimensions".into());
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(format!("radius factor {rho} is not positive"));
    }
    if cert.centers.is_empty() {
        return Err("no centers".into());
    }
    if let Some(c) = cert.centers.iter().find(|c| c.len() != n || !c.iter().all(|x| x.is_finite())) {
        return Err(format!("malformed center {c:?}"));
    }
    if cert.restricted {
        if let Some(c) = cert.centers.iter().find(|c| k.gauge(c) > 1.0 + effort.abs_tol) {
            return Err(format!("restricted certificate has center {c:?} outside K"));
        }
    }
    match &cert.method {
        CoverMethod::Circumradius => {
            if cert.centers.len() != 1 || cert.centers[0].iter().any(|x| *x != 0.0) {
                return Err("circumradius certificate must have the single center 0".into());
            }
            let r = crate::covering::circumradius(k, t).map_err(|e| e.to_string())?;
            if r.hi > rho * (1.0 + effort.abs_tol) {
                return Err(format!("K ⊄ ρT: circumradius up to {} exceeds ρ = {rho}", r.hi));
            }
        }
        CoverMethod::Exact => {
            let (Some(kp), Some(tp)) = (k.polytope(), t.polytope()) else {
                return Err("exact certificate requires polytope bodies".into());
            };
            let w = uncovered_witnesses(&kp, &tp, &cert.centers, rho, exact_tolerance(k), 1).map_err(|e| e.to_string())?;
            if let Some(x) = w.first() {
                return Err(format!("point {x:?} of K is not covered"));
            }
        }
        CoverMethod::Grid { spacing } => {
            let grid = CandidateGrid::with_spacing(k, t, *spacing, effort.grid_budget).map_err(|e| e.to_string())?;
            if grid.cell_radius_t >= rho {
                return Err(format!("grid cell radius {} is not below ρ = {rho}", grid.cell_radius_t));
            }
            let radius = rho - grid.cell_radius_t;
            let index = BoxIndex::new(&cert.centers, bucket_widths(t, radius));
            let limit = radius * (1.0 + 1e-12);
            let miss = grid.points.par_iter().find_any(|p| {
                let mut hit = false;
                index.query(p, |j| hit = hit || t.gauge(&sub(p, &cert.centers[j])) <= limit);
                !hit
            });
            if let Some(p) = miss {
                return Err(format!("grid point {p:?} is farther than ρ − r_T = {radius} from every center"));
            }
        }
    }
    Ok(())
}

/// Greedy cover certified on a grid at scale `ρ`.
pub fn grid_cover(k: &ConvexBody, t: &ConvexBody, rho: f64, restricted: bool, effort: &Effort) -> Result<CoverCertificate> {
    let grid = grid_for_scale(k, t, rho, effort)?;
    let radius = rho - grid.cell_radius_t;
    let offsets = stencil(t, grid.spacing, radius);
    let cand_coords: Vec<Vec<i64>> = if restricted {
        (0..grid.len()).filter(|&i| k.gauge(&grid.points[i]) <= 1.0).map(|i| grid.coords[i].clone()).collect()
    } else {
        let reach: Vec<i64> =
            t.half_widths().iter().map(|w| (w * radius / grid.spacing + 1e-9).floor() as i64).collect();
        let half: Vec<i64> = grid.half_counts.iter().zip(&reach).map(|(m, r)| m + r).collect();
        let total = box_count(&half);
        if total > effort.grid_budget {
            return Err(Error::Budget { what: "candidate centers", needed: total, budget: effort.grid_budget });
        }
        (0..total).map(|l| coords_of(l, &half)).collect()
    };
    let cover = |c: usize, f: &mut dyn FnMut(usize)| {
        let base = &cand_coords[c];
        let mut at = base.clone();
        for o in &offsets {
            for d in 0..at.len() {
                at[d] = base[d] + o[d];
            }
            if let Some(g) = grid.lookup(&at) {
                f(g);
            }
        }
    };
    let chosen = lazy_greedy(cand_coords.len(), grid.len(), &cover, &|_| ())
        .ok_or_else(|| Error::Insufficient("grid points without any candidate center".into()))?;
    let chosen = prune_redundant(chosen, grid.len(), &cover);
    Ok(CoverCertificate {
        centers: chosen.into_iter().map(|c| grid.point_at(&cand_coords[c])).collect(),
        radius_factor: rho,
        net_resolution: grid.cell_radius_t / rho,
        method: CoverMethod::Grid { spacing: grid.spacing },
        restricted,
    })
}

/// Cover of a polytope by polytope translates, certified by exact
/// subtraction. Solves set cover over successively finer dyadic lattices,
/// adding uncovered witnesses as elements between rounds. Returns the best
/// certified cover, or `None` if none was found within budget.
pub fn exact_polytope_cover(
    k: &ConvexBody,
    t: &ConvexBody,
    rho: f64,
    restricted: bool,
    lower_hint: usize,
    effort: &Effort,
) -> Result<Option<CoverCertificate>> {
    let (Some(kp), Some(tp)) = (k.polytope(), t.polytope()) else {
        return Ok(None);
    };
    let n = k.dim();
    let widths_t = t.half_widths();
    let widths_k = k.half_widths();
    let tol = exact_tolerance(k);
    let reach = rho * (1.0 + 1e-12);
    let base = dyadic_floor(rho * widths_t.iter().fold(f64::INFINITY, |m, w| m.min(*w)));
    let mut extra: Vec<Point> = sorted(kp.vertices.clone());
    let mut best: Option<Vec<Point>> = None;
    for level in 0..8 {
        let spacing = base / 2f64.powi(level);
        // elements on the half-spacing lattice: a gap between translates
        // whose faces sit on the candidate lattice then contains an element
        let lattice = |step: f64| -> Option<Vec<Point>> {
            let half: Vec<i64> = widths_k.iter().map(|w| (w / step + 1e-9).floor() as i64).collect();
            if box_count(&half) > 4 * MAX_EXACT_ELEMENTS as u64 {
                return None;
            }
            Some(
                (0..box_count(&half))
                    .map(|l| coords_of(l, &half).iter().map(|&i| i as f64 * step).collect::<Point>())
                    .filter(|p| k.gauge(p) <= 1.0 + 1e-12)
                    .collect(),
            )
        };
        let Some(elem_lattice) = lattice(spacing / 2.0) else { break };
        if elem_lattice.len() + extra.len() > MAX_EXACT_ELEMENTS {
            break;
        }
        let candidates: Vec<Point> = if restricted {
            lattice(spacing).unwrap_or_default()
        } else {
            let half_c: Vec<i64> = widths_k
                .iter()
                .zip(&widths_t)
                .map(|(wk, wt)| ((wk + rho * wt) / spacing + 1e-9).floor() as i64)
                .collect();
            (0..box_count(&half_c))
                .map(|l| coords_of(l, &half_c).iter().map(|&i| i as f64 * spacing).collect())
                .collect()
        };
        let mut elems: Vec<Point> = elem_lattice;
        elems.extend(extra.iter().cloned());
        let cand_index = BoxIndex::new(&candidates, bucket_widths(t, rho));
        let mut elem_cands: Vec<Vec<u32>> = elems.iter().map(|e| covering_candidates(t, &cand_index, &candidates, e, reach)).collect();
        for round in 0..effort.exact_polytope_rounds {
            if elem_cands.iter().any(|c| c.is_empty()) {
                debug!("exact cover level {level}: an element has no candidate");
                break;
            }
            let mut cand_elems = vec![Vec::new(); candidates.len()];
            for (e, cs) in elem_cands.iter().enumerate() {
                for &c in cs {
                    cand_elems[c as usize].push(e as u32);
                }
            }
            let used: Vec<usize> = (0..candidates.len()).filter(|&c| !cand_elems[c].is_empty()).collect();
            let inst = SetCover { n_elems: elems.len(), cand_elems: used.iter().map(|&c| cand_elems[c].clone()).collect() };
            let Some(sol) = inst.solve(lower_hint, effort.node_limit) else { break };
            if best.as_ref().is_some_and(|b| sol.chosen.len() >= b.len()) {
                break;
            }
            let centers: Vec<Point> = sol.chosen.iter().map(|&c| candidates[used[c]].clone()).collect();
            let witnesses = uncovered_witnesses(&kp, &tp, &centers, rho, tol, 4 * n + 4)?;
            if witnesses.is_empty() {
                debug!("exact cover level {level} round {round}: {} centers", centers.len());
                best = Some(centers);
                break;
            }
            for w in witnesses {
                elem_cands.push(covering_candidates(t, &cand_index, &candidates, &w, reach));
                elems.push(w.clone());
                extra.push(w);
            }
        }
        if best.as_ref().is_some_and(|b| b.len() <= lower_hint.max(1)) {
            break;
        }
    }
    Ok(best.map(|centers| CoverCertificate {
        centers,
        radius_factor: rho,
        net_resolution: 0.0,
        method: CoverMethod::Exact,
        restricted,
    }))
}

/// Unit directions covering the sphere: 180 in the plane, small integer
/// directions in higher dimension. One of each `±` pair.
pub fn sample_directions(n: usize) -> Vec<Point> {
    match n {
        1 => vec![vec![1.0]],
        2 => (0..180)
            .map(|i| {
                let a = std::f64::consts::PI * i as f64 / 180.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let span: i64 = if n == 3 { 2 } else { 1 };
            let side = (2 * span + 1) as usize;
            (0..side.pow(n as u32))
                .map(|mut l| {
                    (0..n)
                        .map(|_| {
                            let c = (l % side) as i64 - span;
                            l /= side;
                            c as f64
                        })
                        .collect::<Point>()
                })
                .filter(|v| v.iter().find(|x| **x != 0.0).is_some_and(|x| *x > 0.0))
                .map(|v| {
                    let r = norm2(&v);
                    v.iter().map(|x| x / r).collect()
                })
                .collect()
        }
    }
}

/// Linear functionals `u` with `⟨x, u⟩ ≤ gauge(T, x)` whose maximum equals
/// the gauge (polytopes) or approximates it from below.
fn gauge_functionals(t: &ConvexBody) -> Vec<Point> {
    if let Some(p) = t.polytope() {
        return p.facets;
    }
    sample_directions(t.dim())
        .into_iter()
        .flat_map(|u| {
            let a: Point = u.iter().map(|x| x / t.support(&u)).collect();
            [a.iter().map(|x| -x).collect(), a]
        })
        .collect()
}

/// Center minimizing `max_j (s_j − ⟨c, u_j⟩)` over the functionals, where
/// `s_j` is the largest value of `u_j` on the cluster.
fn one_center(funcs: &[Point], tops: &[f64], n: usize) -> Option<Point> {
    // radius shifted by max_j s_j so that c = 0 with zero shift is feasible
    // and every row has a nonnegative right-hand side
    let top = tops.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut obj = vec![0.0; n + 1];
    obj[n] = 1.0;
    let mut lp = LinearProgram::minimize(obj);
    for j in 0..=n {
        lp.set_free(j);
    }
    for (u, &s) in funcs.iter().zip(tops) {
        let mut row: Point = u.iter().map(|x| -x).collect();
        row.push(-1.0);
        lp.add(row, Relation::Le, top - s);
    }
    match lp.solve() {
        LpOutcome::Optimal { x, .. } => Some(x[..n].to_vec()),
        _ => None,
    }
}

/// One-center solver for a cluster under the gauge of `T`.
enum Recenter {
    /// `T` is an ellipsoid `xᵀQx ≤ 1`, `Q = LLᵀ`: whiten by `Lᵀ` and take
    /// the Euclidean minimum enclosing ball.
    Whiten { lt: DMatrix<f64>, lt_inv: DMatrix<f64> },
    Functionals(Vec<Point>),
}

impl Recenter {
    fn new(t: &ConvexBody) -> Self {
        if let Some(chol) = t.quadratic_form().and_then(|q| q.cholesky()) {
            let lt = chol.l().transpose();
            if let Some(lt_inv) = lt.clone().try_inverse() {
                return Recenter::Whiten { lt, lt_inv };
            }
        }
        Recenter::Functionals(gauge_functionals(t))
    }

    fn center(&self, members: &[&Point], n: usize) -> Option<Point> {
        match self {
            Recenter::Whiten { lt, lt_inv } => {
                let ys: Vec<Point> = members.iter().map(|p| mat_vec(lt, p)).collect();
                Some(mat_vec(lt_inv, &min_enclosing_ball(&ys).0))
            }
            Recenter::Functionals(funcs) => {
                let tops: Vec<f64> = funcs
                    .iter()
                    .map(|u| members.iter().map(|p| dot(u, p)).fold(f64::NEG_INFINITY, f64::max))
                    .collect();
                one_center(funcs, &tops, n)
            }
        }
    }
}

/// Largest number of centers handed to [`refine_cover`].
pub const REFINE_MAX_CENTERS: usize = 24;

/// Tries to beat `start` with fewer centers by minimax relocation: assign
/// points to the nearest center, move each center to the one-center of its
/// cluster, repeat. Runs from several seeded starts per count and keeps
/// lowering the count while it succeeds. Every returned cover is certified
/// on the same grid as [`grid_cover`].
pub fn refine_cover(
    k: &ConvexBody,
    t: &ConvexBody,
    rho: f64,
    restricted: bool,
    start: usize,
    lower: usize,
    effort: &Effort,
) -> Result<Option<CoverCertificate>> {
    use rand::{Rng, SeedableRng};
    let n = k.dim();
    let mut fine = grid_for_scale(k, t, rho, effort)?;
    for _ in 0..3 {
        let finer = CandidateGrid::with_spacing(k, t, fine.spacing / 2.0, effort.grid_budget)?;
        if finer.len() as u64 > effort.grid_soft_points {
            break;
        }
        fine = finer;
    }
    let radius = rho - fine.cell_radius_t;
    let mut elems: Vec<Point> = {
        let mut step = fine.spacing;
        loop {
            let g = CandidateGrid::with_spacing(k, t, step, effort.grid_budget)?;
            if g.len() <= 1500 || step >= rho {
                break g.points;
            }
            step *= 2.0;
        }
    };
    if let Some(p) = k.polytope() {
        elems.extend(p.vertices);
    }
    let recenter = Recenter::new(t);
    let mut best: Option<Vec<Point>> = None;
    let mut m = start.saturating_sub(1);
    while m >= lower.max(1) {
        let mut found = None;
        'starts: for attempt in 0..effort.restarts as u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(effort.seed ^ (m as u64) << 8 ^ attempt);
            let mut centers = vec![elems[rng.random_range(0..elems.len())].clone()];
            // first start is farthest-first, the rest sample by squared distance
            while centers.len() < m {
                let d: Vec<f64> = elems.par_iter().map(|e| nearest(t, e, &centers).1).collect();
                let pick = if attempt == 0 {
                    (0..d.len()).fold(0, |a, i| if d[i] > d[a] { i } else { a })
                } else {
                    let total: f64 = d.iter().map(|x| x * x).sum();
                    let mut target = rng.random::<f64>() * total;
                    d.iter().position(|x| {
                        target -= x * x;
                        target <= 0.0
                    })
                    .unwrap_or(d.len() - 1)
                };
                centers.push(elems[pick].clone());
            }
            let mut stale = 0;
            let mut last = f64::INFINITY;
            for _ in 0..60 {
                let mut clusters: Vec<Vec<&Point>> = vec![Vec::new(); m];
                for e in &elems {
                    clusters[nearest(t, e, &centers).0].push(e);
                }
                for (c, members) in clusters.iter().enumerate() {
                    if !members.is_empty() {
                        if let Some(mut x) = recenter.center(members, n) {
                            if restricted {
                                let g = k.gauge(&x);
                                if g > 1.0 {
                                    x.iter_mut().for_each(|v| *v /= g);
                                }
                            }
                            centers[c] = x;
                        }
                    }
                }
                let (far, r) = farthest(t, &elems, &centers);
                if r <= radius {
                    let missed: Vec<Point> = fine
                        .points
                        .par_iter()
                        .filter(|p| nearest(t, p, &centers).1 > radius * (1.0 + 1e-12))
                        .cloned()
                        .collect();
                    if missed.is_empty() {
                        found = Some(centers);
                        break 'starts;
                    }
                    elems.extend(missed.into_iter().take(200));
                } else if r < last * (1.0 - 1e-6) {
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= 6 {
                        break;
                    }
                    // reseed the worst-served point's nearest center
                    let c = nearest(t, &elems[far], &centers).0;
                    centers[c] = elems[far].clone();
                }
                last = last.min(r);
            }
        }
        match found {
            Some(c) => {
                debug!("refined cover at ρ = {rho}: {m} centers");
                best = Some(c);
                m -= 1;
            }
            None => break,
        }
    }
    Ok(best.map(|centers| CoverCertificate {
        centers,
        radius_factor: rho,
        net_resolution: fine.cell_radius_t / rho,
        method: CoverMethod::Grid { spacing: fine.spacing },
        restricted,
    }))
}

fn nearest(t: &ConvexBody, x: &[f64], centers: &[Point]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| (i, t.gauge(&sub(x, c))))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

fn farthest(t: &ConvexBody, elems: &[Point], centers: &[Point]) -> (usize, f64) {
    elems
        .par_iter()
        .enumerate()
        .map(|(i, e)| (i, nearest(t, e, centers).1))
        .reduce(|| (0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
}

fn covering_candidates(t: &ConvexBody, index: &BoxIndex, candidates: &[Point], x: &[f64], reach: f64) -> Vec<u32> {
    let mut out = Vec::new();
    index.query(x, |c| {
        if t.gauge(&sub(x, &candidates[c])) <= reach {
            out.push(c as u32);
        }
    });
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(a: f64) -> ConvexBody {
        ConvexBody::cube(1, a).unwrap()
    }

    #[test]
    fn grid_examples() {
        let e = Effort::default();
        let sq = ConvexBody::cube(2, 1.0).unwrap();
        let g = grid_candidates(&sq, &sq, 0.5, &e).unwrap();
        assert!(g.spacing <= 1.0);
        assert!(g.points.iter().any(|p| p.iter().all(|x| *x == 0.0)));
        let g = grid_candidates(&interval(3.0), &interval(1.0), 0.1, &e).unwrap();
        assert!(g.spacing <= 0.2 && g.len() >= 31);
        let finer = grid_candidates(&interval(3.0), &interval(1.0), 0.05, &e).unwrap();
        assert!(finer.cell_radius_t <= g.cell_radius_t / 2.0);
        let huge = grid_candidates(&ConvexBody::cube(3, 1.0).unwrap(), &sq.scaled(1.0).polar(), 1e-4, &e);
        assert!(huge.is_err());
    }

    #[test]
    fn net_examples() {
        let e = Effort::default();
        let k = interval(1.0);
        let grid = grid_candidates(&k, &k, 0.01, &e).unwrap();
        assert_eq!(build_net(&k, &k, 2.5, &grid).unwrap(), vec![vec![0.0]]);
        let net = build_net(&k, &k, 0.5, &grid).unwrap();
        assert!((2..=3).contains(&net.len()), "{net:?}");
        let coarse = grid_candidates(&k, &k, 0.6, &e).unwrap();
        assert!(build_net(&k, &k, 0.5, &coarse).is_err());
    }

    #[test]
    fn packing_examples() {
        let e = Effort::default();
        let k = interval(1.0);
        let grid = grid_candidates(&k, &k, 0.01, &e).unwrap();
        let p = max_packing(&k, &k, 1.0, &grid, 400, 1e-6, 100_000);
        assert_eq!(p.len(), 2);
        assert_eq!(max_packing(&k, &k, 3.0, &grid, 400, 1e-6, 100_000).len(), 1);
    }

    #[test]
    fn certify_examples() {
        let e = Effort::default();
        let (k, t) = (interval(3.0), interval(1.0));
        let grid = grid_candidates(&k, &t, 0.05, &e).unwrap();
        let centers = vec![vec![-2.0], vec![0.0], vec![2.0]];
        assert!(certify_cover(&k, &t, &centers, 1.0, 0.05, &grid).unwrap());
        assert!(!certify_cover(&k, &t, &centers[..2], 1.0, 0.05, &grid).unwrap());
        assert!(!certify_cover(&k, &t, &[], 1.0, 0.05, &grid).unwrap());
        assert!(certify_cover(&k, &t, &[vec![0.0]], 3.0, 0.05, &grid).unwrap());
        assert!(certify_cover(&k, &t, &centers, 1.0, 1.0, &grid).is_err());
        // smooth pair goes through the grid test
        let disk = ConvexBody::euclidean_ball(2, 1.0).unwrap();
        let g = grid_candidates(&disk, &disk, 0.02, &e).unwrap();
        assert!(certify_cover(&disk, &disk, &[vec![0.0, 0.0]], 1.1, 0.05, &g).unwrap());
        assert!(!certify_cover(&disk, &disk, &[vec![0.5, 0.0]], 1.1, 0.05, &g).unwrap());
    }

    #[test]
    fn set_cover_solver_is_optimal_on_small_instance() {
        // elements 0..6 on a path, candidates cover consecutive pairs and one triple
        let inst = SetCover {
            n_elems: 6,
            cand_elems: vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 4], vec![4, 5], vec![1, 2, 3], vec![0], vec![5]],
        };
        let sol = inst.solve(0, 10_000).unwrap();
        assert_eq!(sol.chosen.len(), 3);
        assert!(sol.optimal);
    }

    #[test]
    fn mis_matches_brute_force() {
        // 5-cycle conflict graph: maximum independent set 2
        let conflict = |i: usize, j: usize| (i + 1) % 5 == j || (j + 1) % 5 == i;
        let (s, exact) = max_independent_set(5, &conflict, 1000);
        assert!(exact);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn exact_cover_of_interval() {
        let e = Effort::default();
        let cert = exact_polytope_cover(&interval(3.0), &interval(1.0), 1.0, false, 3, &e).unwrap().unwrap();
        assert_eq!(cert.centers.len(), 3);
        assert!(check_cover(&interval(3.0), &interval(1.0), &cert, &e).is_ok());
    }

    #[test]
    fn grid_cover_verifies() {
        let e = Effort::default();
        let disk = ConvexBody::euclidean_ball(2, 2.0).unwrap();
        let unit = ConvexBody::euclidean_ball(2, 1.0).unwrap();
        let cert = grid_cover(&disk, &unit, 1.0, false, &e).unwrap();
        assert!(cert.centers.len() >= 4);
        assert!(check_cover(&disk, &unit, &cert, &e).is_ok());
        let mut bad = cert.clone();
        bad.centers.pop();
        assert!(check_cover(&disk, &unit, &bad, &e).is_err());
    }
}
