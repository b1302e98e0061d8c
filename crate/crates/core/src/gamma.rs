//! Talagrand's `γ_p` functionals: Dudley's entropy upper bound, an explicit
//! chaining construction, the Sudakov-type lower bound, an exhaustive
//! oracle on small finite metric spaces and a Gaussian Monte Carlo check.
//!
//! Two conventions for admissible sequences are supported. `Standard` has
//! `|M₀| = 1` and `|M_j| ≤ 2^{2^j}`; `PaperLiteral` has
//! `|M_j| = min(2^{2^j}, |M|)`, which makes `γ_p` vanish on spaces with at
//! most two points.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::ConvexBody;
use crate::covering::{circumradius, entropy_sequence, restricted_net, EntropySequence};
use crate::duality_lab::BodyPair;
use crate::effort::Effort;
use crate::error::{Error, Result};
use crate::linalg::{for_each_combination, mat_vec, sub, Point};

/// Largest finite space handled by [`gamma_exact_finite`] and
/// [`FiniteMetricSpace::entropy_numbers`].
pub const MAX_EXACT_POINTS: usize = 12;
/// Largest net materialized by [`chaining_upper`]; deeper levels enter
/// through the tail bound.
pub const MAX_NET_POINTS: u64 = 256;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    #[default]
    Standard,
    PaperLiteral,
}

impl Convention {
    pub fn id(self) -> &'static str {
        match self {
            Convention::Standard => "standard",
            Convention::PaperLiteral => "paper-literal",
        }
    }
}

impl FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Convention::Standard),
            "paper-literal" => Ok(Convention::PaperLiteral),
            _ => Err(Error::Parse(format!("unknown convention `{s}` (valid: standard, paper-literal)"))),
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Dudley's constant: `(p(1 − 2^{−1/p}))⁻¹` for `p ≥ 1`. For `0 < p < 1`
/// the summands `k^{1/p−1}` increase, so the dyadic block is at least
/// `2^{j−1}·2^{(j−1)(1/p−1)} = 2^{(j−1)/p}` and `2^{1/p}` suffices.
pub fn dudley_constant(p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Precondition(format!("p must be positive, got {p}")));
    }
    Ok(if p >= 1.0 { 1.0 / (p * (1.0 - 2f64.powf(-1.0 / p))) } else { 2f64.powf(1.0 / p) })
}

/// One instance of `2^{j/p} ≤ C_p·Σ_{k=2^{j−1}}^{2^j−1} k^{1/p−1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicStep {
    pub p: f64,
    pub j: u32,
    pub lhs: f64,
    pub rhs: f64,
    /// Decided in integer arithmetic (`1/p` a positive integer).
    pub exact: bool,
    pub holds: bool,
}

pub fn dyadic_step(p: f64, j: u32) -> Result<DyadicStep> {
    let c = dudley_constant(p)?;
    if j == 0 || j > 40 {
        return Err(Error::Precondition(format!("dyadic step needs 1 ≤ j ≤ 40, got {j}")));
    }
    let (start, end) = (1u64 << (j - 1), (1u64 << j) - 1);
    let inv = 1.0 / p;
    let lhs = 2f64.powf(j as f64 / p);
    let rhs = c * (start..=end).map(|k| (k as f64).powf(inv - 1.0)).sum::<f64>();
    let m = inv.round();
    if (inv - m).abs() < 1e-12 && m >= 1.0 && m * j as f64 <= 120.0 {
        // p = 1/m: lhs = 2^{jm}; C_p is 2 for m = 1 and 2^m otherwise
        let m = m as u32;
        let c_int: u128 = if m == 1 { 2 } else { 1u128 << m };
        let sum: u128 = (start..=end).map(|k| (k as u128).pow(m - 1)).sum();
        let holds = (1u128 << (j * m)) <= c_int * sum;
        return Ok(DyadicStep { p, j, lhs, rhs, exact: true, holds });
    }
    Ok(DyadicStep { p, j, lhs, rhs, exact: false, holds: lhs <= rhs })
}

/// Both forms of Dudley's bound for one sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DudleyBound {
    /// `Σ_{j≥0} 2^{j/p} e_{2^j}.hi`, summed until `e.hi` drops below the
    /// truncation floor, plus the tail bound.
    pub dyadic: f64,
    /// `(1 + C_p)·Σ_{k≥1} k^{1/p−1} e_k.hi` over the available `k`, plus the
    /// tail bound.
    pub integral: f64,
    /// Part of `dyadic` contributed by the tail bound.
    pub dyadic_tail: f64,
    pub integral_tail: f64,
}

/// Upper bound on `e_k` for `k` beyond the sequence:
/// `min(e_last.hi, 2·e_n.hi / (2^{(k−n)/n} − 1))`. Covering `K` by
/// `2^n` translates of `e_n T` and each of those by `(1 + 2e_n/ε)ⁿ`
/// translates of `εT` shows the second term for every `k > n`.
fn tail_entropy(k: f64, n: f64, e_n: f64, e_last: f64) -> f64 {
    let denom = 2f64.powf((k - n) / n) - 1.0;
    if denom > 0.0 {
        e_last.min(2.0 * e_n / denom)
    } else {
        e_last
    }
}

fn entropy_hi_at(seq: &EntropySequence, k: u32) -> Option<f64> {
    seq.get(k).map(|b| b.hi)
}

/// Dudley's upper bound on `γ_p` from an entropy sequence of a body pair in
/// dimension `n`. `e_n` must be present; terms past the end of the sequence
/// or below `floor_rel·e₀.hi` are replaced by the tail bound.
pub fn dudley_upper(p: f64, seq: &EntropySequence, n: u32, floor_rel: f64) -> Result<DudleyBound> {
    let c = dudley_constant(p)?;
    if n == 0 {
        return Err(Error::Precondition("dimension must be positive".into()));
    }
    let k_max = seq.k_max();
    let e_n = entropy_hi_at(seq, n.min(k_max))
        .filter(|_| k_max >= n)
        .ok_or_else(|| Error::Insufficient(format!("sequence stops at k = {k_max}, needs e_{n}")))?;
    let floor = floor_rel * entropy_hi_at(seq, 0).unwrap_or(e_n);
    let nf = n as f64;
    let weight = |j: u32| 2f64.powf(j as f64 / p);

    let mut dyadic = 0.0;
    let mut last = f64::INFINITY;
    let mut j = 0u32;
    while (1u64 << j) <= k_max as u64 {
        let e = entropy_hi_at(seq, 1 << j).ok_or_else(|| Error::Insufficient(format!("missing e_{}", 1u64 << j)))?;
        dyadic += weight(j) * e;
        last = e;
        j += 1;
        if e < floor {
            break;
        }
    }
    let mut dyadic_tail = 0.0;
    for jj in j..63 {
        let term = weight(jj) * tail_entropy((1u64 << jj) as f64, nf, e_n, last);
        dyadic_tail += term;
        if term < 1e-300 || (jj > j + 8 && term < 1e-18 * (dyadic + dyadic_tail)) {
            break;
        }
    }

    let mut integral = 0.0;
    let mut last = f64::INFINITY;
    for k in 1..=k_max {
        let e = entropy_hi_at(seq, k).ok_or_else(|| Error::Insufficient(format!("missing e_{k}")))?;
        integral += (k as f64).powf(1.0 / p - 1.0) * e;
        last = e;
    }
    let mut integral_tail = 0.0;
    let mut k = k_max as u64 + 1;
    loop {
        let term = (k as f64).powf(1.0 / p - 1.0) * tail_entropy(k as f64, nf, e_n, last);
        integral_tail += term;
        if term <= 1e-18 * (integral + integral_tail).max(1e-300) || k > 1_000_000 {
            break;
        }
        k += 1;
    }
    let f = 1.0 + c;
    Ok(DudleyBound {
        dyadic: dyadic + dyadic_tail,
        integral: f * (integral + integral_tail),
        dyadic_tail,
        integral_tail: f * integral_tail,
    })
}

/// `2^{−1/p}·max_{k≥1} k^{1/p}·e_k.lo`.
pub fn sudakov_lower(p: f64, seq: &EntropySequence) -> Result<f64> {
    dudley_constant(p)?;
    let rows: Vec<_> = seq.rows.iter().filter(|r| r.k >= 1).collect();
    if rows.is_empty() {
        return Err(Error::Insufficient("no entropy numbers with k ≥ 1".into()));
    }
    Ok(2f64.powf(-1.0 / p) * rows.iter().map(|r| (r.k as f64).powf(1.0 / p) * r.bracket.lo).fold(0.0, f64::max))
}

/// Levels `M₀, …, M_J` of an admissible sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSequence<P> {
    pub levels: Vec<Vec<P>>,
    pub convention: Convention,
}

impl<P> AdmissibleSequence<P> {
    /// Checks the level sizes against the convention; `total` is `|M|`
    /// when the space is finite.
    pub fn check_cardinalities(&self, total: Option<usize>) -> Result<(), String> {
        for (j, level) in self.levels.iter().enumerate() {
            let cap = if j >= 6 { u64::MAX } else { 1u64 << (1u64 << j) };
            let cap = total.map_or(cap, |t| cap.min(t as u64));
            let len = level.len() as u64;
            let ok = match (self.convention, j) {
                (Convention::Standard, 0) => len == 1,
                (Convention::Standard, _) => (1..=cap).contains(&len),
                (Convention::PaperLiteral, _) => match total {
                    Some(_) => len == cap,
                    None => (1..=cap).contains(&len),
                },
            };
            if !ok {
                return Err(format!("level {j} has {len} points, not allowed under {} (cap {cap})", self.convention));
            }
        }
        Ok(())
    }
}

/// Certified chaining bound on `γ_p(K,T)` with its admissible sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainingBound {
    pub value: f64,
    /// `ε_j`: every point of `K` is within `ε_j` of `M_j` in the gauge of `T`.
    pub radii: Vec<f64>,
    pub tail: f64,
    pub p: f64,
    pub sequence: AdmissibleSequence<Point>,
}

impl ChainingBound {
    /// `Σ_j 2^{j/p}·gauge(T, x − M_j)` over the materialized levels.
    pub fn evaluate(&self, t: &ConvexBody, x: &[f64]) -> f64 {
        self.sequence
            .levels
            .iter()
            .enumerate()
            .map(|(j, level)| {
                let d = level.iter().map(|c| t.gauge(&sub(x, c))).fold(f64::INFINITY, f64::min);
                2f64.powf(j as f64 / self.p) * d
            })
            .sum()
    }
}

/// Chaining upper bound: level `j` is a net in `K` of at most `2^{2^j}`
/// points (one point, the origin at radius `R(K,T)`, for level 0 under
/// the standard convention). Levels past `J`, or whose net would exceed
/// [`MAX_NET_POINTS`], enter through the entropy tail bound applied to
/// `2·e_k`, which dominates the centers-in-`K` entropy numbers.
pub fn chaining_upper(
    k: &ConvexBody,
    t: &ConvexBody,
    p: f64,
    levels: u32,
    convention: Convention,
    effort: &Effort,
) -> Result<ChainingBound> {
    dudley_constant(p)?;
    if levels < 1 {
        return Err(Error::Precondition("chaining needs J ≥ 1".into()));
    }
    let n = k.dim();
    let mut radii = Vec::new();
    let mut nets: Vec<Vec<Point>> = Vec::new();
    for j in 0..=levels {
        let count = if j >= 6 { u64::MAX } else { 1u64 << (1u64 << j) };
        if count > MAX_NET_POINTS {
            break;
        }
        let (radius, net) = if j == 0 && convention == Convention::Standard {
            (circumradius(k, t)?.hi, vec![vec![0.0; n]])
        } else {
            let (rho, cert) = restricted_net(k, t, count, effort)
                .map_err(|e| Error::Insufficient(format!("net of {count} points at level {j}: {e}")))?;
            (rho, cert.centers)
        };
        radii.push(radius);
        nets.push(net);
    }
    let weight = |j: usize| 2f64.powf(j as f64 / p);
    let head: f64 = radii.iter().enumerate().map(|(j, r)| weight(j) * r).sum();
    // e_n ≤ e_{2^i} for the largest materialized 2^i ≤ n, and e'_k ≤ 2e_k
    let last = *radii.last().expect("level 0 always materialized");
    let e_n_hi = radii
        .iter()
        .enumerate()
        .skip(if convention == Convention::Standard { 1 } else { 0 })
        .filter(|(j, _)| (1usize << j) <= n)
        .map(|(_, r)| *r)
        .next_back()
        .unwrap_or(radii[0]);
    let mut tail = 0.0;
    for j in radii.len()..63 {
        let e = tail_entropy((1u64 << j) as f64, n as f64, e_n_hi, f64::INFINITY);
        let term = weight(j) * last.min(2.0 * e);
        tail += term;
        if term < 1e-300 || term < 1e-18 * (head + tail) && j > radii.len() + 8 {
            break;
        }
    }
    Ok(ChainingBound {
        value: head + tail,
        radii,
        tail,
        p,
        sequence: AdmissibleSequence { levels: nets, convention },
    })
}

/// A finite metric space given by its distance matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteMetricSpace {
    pub labels: Vec<String>,
    pub distances: Vec<Vec<f64>>,
}

impl FiniteMetricSpace {
    /// Validates symmetry, zero diagonal, nonnegativity and the triangle
    /// inequality (to 1e−9).
    pub fn new(labels: Vec<String>, distances: Vec<Vec<f64>>) -> Result<Self> {
        let m = distances.len();
        if m == 0 {
            return Err(Error::Precondition("metric space is empty".into()));
        }
        if labels.len() != m || distances.iter().any(|r| r.len() != m) {
            return Err(Error::Precondition("distance matrix must be square and match the labels".into()));
        }
        for i in 0..m {
            if distances[i][i] != 0.0 {
                return Err(Error::Precondition(format!("nonzero diagonal at {i}")));
            }
            for j in 0..m {
                let d = distances[i][j];
                if !(d >= 0.0 && d.is_finite()) || (d - distances[j][i]).abs() > 1e-9 {
                    return Err(Error::Precondition(format!("entry ({i}, {j}) is negative or asymmetric")));
                }
                for l in 0..m {
                    if distances[i][l] > d + distances[j][l] + 1e-9 {
                        return Err(Error::Precondition(format!("triangle inequality fails at ({i}, {j}, {l})")));
                    }
                }
            }
        }
        Ok(FiniteMetricSpace { labels, distances })
    }

    /// `size` uniform points of the unit square with the Euclidean metric.
    pub fn random_euclidean(size: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Uniform::new(0.0, 1.0).map_err(|e| Error::Precondition(e.to_string()))?;
        let pts: Vec<[f64; 2]> = (0..size).map(|_| [unit.sample(&mut rng), unit.sample(&mut rng)]).collect();
        let d = pts
            .iter()
            .map(|a| pts.iter().map(|b| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()).collect())
            .collect();
        FiniteMetricSpace::new((0..size).map(|i| format!("m{i}")).collect(), d)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        FiniteMetricSpace {
            labels: self.labels.clone(),
            distances: self.distances.iter().map(|r| r.iter().map(|d| d * factor).collect()).collect(),
        }
    }

    fn radius_to(&self, centers: &[usize]) -> Vec<f64> {
        (0..self.len()).map(|x| centers.iter().map(|&c| self.distances[x][c]).fold(f64::INFINITY, f64::min)).collect()
    }

    /// Exact `e_k` for `k = 0, 1, …` until `2^k ≥ |M|` (where it is 0):
    /// the least radius of `2^k` balls centered in `M` covering `M`.
    pub fn entropy_numbers(&self) -> Result<EntropySequence> {
        let m = self.len();
        if m > MAX_EXACT_POINTS {
            return Err(Error::Budget { what: "exact entropy numbers", needed: m as u64, budget: MAX_EXACT_POINTS as u64 });
        }
        let mut values = Vec::new();
        let mut k = 0u32;
        loop {
            let size = (1usize << k).min(m);
            let mut best = f64::INFINITY;
            for_each_combination(m, size, |c| {
                let r = self.radius_to(c).into_iter().fold(0.0, f64::max);
                best = best.min(r);
            });
            values.push(best);
            if size == m {
                break;
            }
            k += 1;
        }
        Ok(EntropySequence::from_values("finite", &values))
    }
}

/// Exact `γ_p` of a space with at most [`MAX_EXACT_POINTS`] points. Levels
/// `j ≥ 2` allow `16 ≥ |M|` points and contribute 0 with `M_j = M`, so only
/// `M₀` and `M₁` are enumerated; `M₁` takes the largest allowed size since
/// extra points only shrink distances.
pub fn gamma_exact_finite(
    space: &FiniteMetricSpace,
    p: f64,
    convention: Convention,
) -> Result<(f64, AdmissibleSequence<usize>)> {
    dudley_constant(p)?;
    let m = space.len();
    if m > MAX_EXACT_POINTS {
        return Err(Error::Budget { what: "exact γ_p", needed: m as u64, budget: MAX_EXACT_POINTS as u64 });
    }
    let size0 = match convention {
        Convention::Standard => 1,
        Convention::PaperLiteral => 2.min(m),
    };
    let size1 = 4.min(m);
    let w1 = 2f64.powf(1.0 / p);
    let mut level0 = Vec::new();
    for_each_combination(m, size0, |c| level0.push((c.to_vec(), space.radius_to(c))));
    let mut level1 = Vec::new();
    for_each_combination(m, size1, |c| level1.push((c.to_vec(), space.radius_to(c))));
    let mut best = (f64::INFINITY, 0, 0);
    for (i0, (_, d0)) in level0.iter().enumerate() {
        for (i1, (_, d1)) in level1.iter().enumerate() {
            let v = d0.iter().zip(d1).map(|(a, b)| a + w1 * b).fold(0.0, f64::max);
            if v < best.0 {
                best = (v, i0, i1);
            }
        }
    }
    let mut levels = vec![level0[best.1].0.clone(), level1[best.2].0.clone()];
    let all: Vec<usize> = (0..m).collect();
    if size1 < m || m > 4 {
        levels.push(all.clone());
    }
    if convention == Convention::PaperLiteral && levels.len() == 2 && m > 4 {
        levels.push(all);
    }
    Ok((best.0, AdmissibleSequence { levels, convention }))
}

/// Monte Carlo mean and standard error of `sup_{x∈K} ⟨x, G⟩ = h_K(G)` with
/// `G ~ N(0, Q)`, so that `E⟨s − t, G⟩² = d_D(s,t)²` for `D = {xᵀQx ≤ 1}`.
/// Batches of 4096 draw from per-batch ChaCha8 streams and are reduced in
/// batch order, so the result does not depend on the thread count.
pub fn gaussian_sup_mc(k: &ConvexBody, d: &ConvexBody, samples: usize, seed: u64) -> Result<(f64, f64)> {
    const BATCH: usize = 4096;
    if samples < 1000 {
        return Err(Error::Precondition(format!("need at least 1000 samples, got {samples}")));
    }
    if k.dim() != d.dim() {
        return Err(Error::Precondition("K and D have different dimensions".into()));
    }
    let q = d.quadratic_form().ok_or_else(|| Error::Unsupported("D must be an ellipsoid".into()))?;
    let l = q.cholesky().ok_or(Error::Singular(0.0))?.l();
    let n = k.dim();
    let batches = samples.div_ceil(BATCH);
    let sums: Vec<(f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let size = BATCH.min(samples - b * BATCH);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..size {
                let z: Point = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let v = k.support(&mat_vec(&l, &z));
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let count = samples as f64;
    let mean = s / count;
    let var = (s2 / count - mean * mean).max(0.0) * count / (count - 1.0);
    Ok((mean, (var / count).sqrt()))
}

/// Per-pair summary with CSV columns
/// `pair_id,p,sudakov_lo,dudley_hi,chaining_hi,exact,convention`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimates {
    pub pair_id: String,
    pub p: f64,
    pub sudakov_lo: f64,
    pub dudley_hi: f64,
    pub chaining_hi: f64,
    pub exact: Option<f64>,
    pub convention: Convention,
}

pub const GAMMA_CSV_HEADER: &str = "pair_id,p,sudakov_lo,dudley_hi,chaining_hi,exact,convention";

pub fn gamma_rows_to_csv(rows: &[GammaEstimates]) -> String {
    let mut out = format!("{GAMMA_CSV_HEADER}\n");
    for r in rows {
        let exact = r.exact.map_or(String::new(), |v| v.to_string());
        let _ = writeln!(out, "{},{},{},{},{},{},{}", r.pair_id, r.p, r.sudakov_lo, r.dudley_hi, r.chaining_hi, exact, r.convention);
    }
    out
}

/// Sudakov, Dudley and chaining bounds for one body pair.
pub fn gamma_estimates(
    pair_id: &str,
    k: &ConvexBody,
    t: &ConvexBody,
    p: f64,
    k_max: u32,
    levels: u32,
    convention: Convention,
    effort: &Effort,
) -> Result<GammaEstimates> {
    let seq = entropy_sequence(k, t, k_max.max(k.dim() as u32), effort, pair_id)?;
    let sudakov_lo = sudakov_lower(p, &seq)?;
    let mut dudley_hi = dudley_upper(p, &seq, k.dim() as u32, 1e-6)?.dyadic;
    if convention == Convention::Standard {
        // the j = 0 term uses one center: e₀ instead of e₁
        let e0 = seq.get(0).map_or(0.0, |b| b.hi);
        let e1 = seq.get(1).map_or(0.0, |b| b.hi);
        dudley_hi += e0 - e1;
    }
    let chaining_hi = chaining_upper(k, t, p, levels, convention, effort)?.value;
    Ok(GammaEstimates { pair_id: pair_id.into(), p, sudakov_lo, dudley_hi, chaining_hi, exact: None, convention })
}

/// One row of the `γ_p` duality report: `chaining_hi(K,T)` against
/// `sudakov_lo(T°,K°)`; their ratio upper-bounds one instance of
/// `γ_p(K,T)/γ_p(T°,K°)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaDualityRow {
    pub pair_id: String,
    pub n: usize,
    pub p: f64,
    pub chaining_hi: f64,
    pub sudakov_lo_dual: f64,
    pub ratio: f64,
    /// `C_p·log(1+n)^{2+1/p}·log log(2+n)^{1/p}` with Dudley's `C_p`.
    pub theorem_factor: f64,
    pub flags: Vec<String>,
}

pub const GAMMA_DUALITY_CSV_HEADER: &str = "pair_id,n,p,chaining_hi,sudakov_lo_dual,ratio,theorem_factor,flags";

pub fn gamma_duality_to_csv(rows: &[GammaDualityRow]) -> String {
    let mut out = format!("{GAMMA_DUALITY_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.pair_id, r.n, r.p, r.chaining_hi, r.sudakov_lo_dual, r.ratio, r.theorem_factor, r.flags.join(";")
        );
    }
    out
}

pub fn theorem_factor(p: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    Ok(dudley_constant(p)? * (1.0 + nf).ln().powf(2.0 + 1.0 / p) * (2.0 + nf).ln().ln().powf(1.0 / p))
}

/// Report-only rows, one per pair, in input order.
pub fn gamma_duality_report(
    pairs: &[BodyPair],
    p: f64,
    k_max: u32,
    levels: u32,
    convention: Convention,
    effort: &Effort,
) -> Result<Vec<GammaDualityRow>> {
    dudley_constant(p)?;
    pairs
        .par_iter()
        .map(|pair| {
            let n = pair.k.dim();
            let chaining_hi = chaining_upper(&pair.k, &pair.t, p, levels, convention, effort)?.value;
            let dual = entropy_sequence(&pair.t.polar(), &pair.k.polar(), k_max.max(1), effort, &pair.id)?;
            let sudakov_lo_dual = sudakov_lower(p, &dual)?;
            let mut flags = Vec::new();
            let ratio = if sudakov_lo_dual > 0.0 {
                chaining_hi / sudakov_lo_dual
            } else {
                flags.push("degenerate: zero Sudakov bound".to_string());
                f64::INFINITY
            };
            Ok(GammaDualityRow {
                pair_id: pair.id.clone(),
                n,
                p,
                chaining_hi,
                sudakov_lo_dual,
                ratio,
                theorem_factor: theorem_factor(p, n)?,
                flags,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_points(d: f64) -> FiniteMetricSpace {
        FiniteMetricSpace::new(vec!["a".into(), "b".into()], vec![vec![0.0, d], vec![d, 0.0]]).unwrap()
    }

    #[test]
    fn dudley_constant_values() {
        assert!((dudley_constant(2.0).unwrap() - 1.0 / (2.0 * (1.0 - 0.5f64.sqrt()))).abs() < 1e-15);
        assert!((dudley_constant(2.0).unwrap() - 1.7071).abs() < 1e-4);
        assert_eq!(dudley_constant(1.0).unwrap(), 2.0);
        assert_eq!(dudley_constant(0.5).unwrap(), 4.0);
        assert!(dudley_constant(0.0).is_err());
    }

    #[test]
    fn dyadic_steps_hold() {
        for p in [1.0, 1.5, 2.0, 3.0, 0.5, 0.25] {
            for j in 1..=12 {
                let s = dyadic_step(p, j).unwrap();
                assert!(s.holds, "{s:?}");
            }
        }
        let s = dyadic_step(1.0, 5).unwrap();
        assert!(s.exact && s.lhs == s.rhs);
        assert!(!dyadic_step(2.0, 3).unwrap().exact);
    }

    #[test]
    fn dudley_examples() {
        let zero = EntropySequence::from_values("z", &[0.0; 9]);
        assert_eq!(dudley_upper(2.0, &zero, 1, 1e-6).unwrap().dyadic, 0.0);
        // e_k = 2^{-k}: Σ_j 2^{j/2}·2^{-2^j} with an exponentially small tail
        let vals: Vec<f64> = (0..=16).map(|k| 2f64.powi(-k)).collect();
        let seq = EntropySequence::from_values("1d", &vals);
        let b = dudley_upper(2.0, &seq, 1, 1e-6).unwrap();
        let direct: f64 = (0..6).map(|j| 2f64.powf(j as f64 / 2.0) * 2f64.powi(-(1 << j))).sum();
        assert!((direct - 0.9897).abs() < 1e-4);
        assert!(b.dyadic >= direct - 1e-15 && b.dyadic - direct < 1e-4, "{b:?}");
        let integral: f64 = (1..200).map(|k| (k as f64).powf(-0.5) * 2f64.powi(-k)).sum::<f64>() * (1.0 + dudley_constant(2.0).unwrap());
        assert!(b.integral >= integral - 1e-12 && b.integral - integral < 1e-4);
        let short = EntropySequence::from_values("s", &[1.0]);
        assert!(dudley_upper(2.0, &short, 2, 1e-6).is_err());
    }

    #[test]
    fn sudakov_examples() {
        let zero = EntropySequence::from_values("z", &[0.0; 4]);
        assert_eq!(sudakov_lower(2.0, &zero).unwrap(), 0.0);
        let a = 3.0;
        let vals: Vec<f64> = (0..=10).map(|k| a * 2f64.powi(-k)).collect();
        let s = sudakov_lower(2.0, &EntropySequence::from_values("x", &vals)).unwrap();
        assert!((s - 0.5f64.sqrt() * 0.5 * a).abs() < 1e-12);
        assert!(sudakov_lower(2.0, &EntropySequence::from_values("e", &[1.0])).is_err());
    }

    #[test]
    fn exact_gamma_examples() {
        let one = FiniteMetricSpace::new(vec!["x".into()], vec![vec![0.0]]).unwrap();
        for c in [Convention::Standard, Convention::PaperLiteral] {
            assert_eq!(gamma_exact_finite(&one, 2.0, c).unwrap().0, 0.0);
        }
        let (v, seq) = gamma_exact_finite(&two_points(1.7), 2.0, Convention::Standard).unwrap();
        assert_eq!(v, 1.7);
        seq.check_cardinalities(Some(2)).unwrap();
        assert_eq!(gamma_exact_finite(&two_points(1.7), 1.0, Convention::PaperLiteral).unwrap().0, 0.0);
    }

    #[test]
    fn exact_gamma_is_homogeneous() {
        let space = FiniteMetricSpace::random_euclidean(7, 3).unwrap();
        for c in [Convention::Standard, Convention::PaperLiteral] {
            let (a, seq) = gamma_exact_finite(&space, 1.0, c).unwrap();
            seq.check_cardinalities(Some(7)).unwrap();
            let b = gamma_exact_finite(&space.scaled(2.5), 1.0, c).unwrap().0;
            assert!((b - 2.5 * a).abs() < 1e-9);
        }
    }

    #[test]
    fn finite_entropy_numbers() {
        // points 0, 1, 3 on a line
        let d = vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 2.0], vec![3.0, 2.0, 0.0]];
        let space = FiniteMetricSpace::new(vec!["a".into(), "b".into(), "c".into()], d).unwrap();
        let seq = space.entropy_numbers().unwrap();
        let v: Vec<f64> = seq.rows.iter().map(|r| r.bracket.hi).collect();
        assert_eq!(v, vec![2.0, 1.0, 0.0]);
        let bad = FiniteMetricSpace::new(vec!["a".into(), "b".into(), "c".into()], vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ]);
        assert!(bad.is_err());
    }

    #[test]
    fn chaining_on_interval() {
        let k = ConvexBody::cube(1, 4.0).unwrap();
        let t = ConvexBody::cube(1, 1.0).unwrap();
        let effort = Effort::default();
        let b = chaining_upper(&k, &t, 2.0, 3, Convention::PaperLiteral, &effort).unwrap();
        let analytic: f64 = (0..8).map(|j| 2f64.powf(j as f64 / 2.0) * 4.0 * 2f64.powi(-(1 << j))).sum();
        assert!((analytic - 3.96).abs() < 0.01);
        assert!(b.value >= analytic - 1e-9 && b.value <= analytic * (1.0 + effort.bisect_tol) + 1e-6, "{}", b.value);
        b.sequence.check_cardinalities(None).unwrap();
        for i in -40..=40 {
            let x = [i as f64 / 10.0];
            assert!(b.evaluate(&t, &x) <= b.value + effort.eta);
        }
        let s = chaining_upper(&k, &t, 2.0, 3, Convention::Standard, &effort).unwrap();
        assert!((s.radii[0] - 4.0).abs() < 1e-12 && s.sequence.levels[0].len() == 1);
    }

    #[test]
    fn gaussian_monte_carlo() {
        let square = ConvexBody::cube(2, 1.0).unwrap();
        let disk = ConvexBody::euclidean_ball(2, 1.0).unwrap();
        let (m, se) = gaussian_sup_mc(&square, &disk, 20_000, 5).unwrap();
        let exact = 2.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((m - exact).abs() <= 4.0 * se, "{m} ± {se}");
        let (m2, _) = gaussian_sup_mc(&square.scaled(2.0), &disk, 20_000, 5).unwrap();
        assert!((m2 - 2.0 * m).abs() < 1e-9);
        assert!(gaussian_sup_mc(&square, &disk, 10, 5).is_err());
        assert!(gaussian_sup_mc(&square, &square, 2000, 5).is_err());
    }
}
