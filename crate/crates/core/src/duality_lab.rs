//! Experiment harness: seeded families of body pairs, scans of
//! `log N(K,T)` against `log N(T°, a⁻¹K°)`, fitted constants and reports.
//!
//! Every family emits each pair together with its polar pair `(T°, K°)`
//! (once, when the pair is its own polar pair), so both directions of the
//! duality inequality come out of one scan.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::ConvexBody;
use crate::bracket::Bracket;
use crate::covering::covering_bracket;
use crate::effort::Effort;
use crate::error::{Error, Result};
use crate::linalg::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "ellipsoid")]
    Ellipsoid,
    #[serde(rename = "l1-linf")]
    L1Linf,
    #[serde(rename = "box-cross")]
    BoxCross,
    #[serde(rename = "vpoly-ball")]
    VpolyBall,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Ellipsoid, Family::L1Linf, Family::BoxCross, Family::VpolyBall];

    pub fn id(self) -> &'static str {
        match self {
            Family::Ellipsoid => "ellipsoid",
            Family::L1Linf => "l1-linf",
            Family::BoxCross => "box-cross",
            Family::VpolyBall => "vpoly-ball",
        }
    }

    /// Comma-separated list of the accepted ids, `all` included.
    pub fn valid_ids() -> String {
        let mut ids: Vec<&str> = Family::ALL.iter().map(|f| f.id()).collect();
        ids.push("all");
        ids.join(", ")
    }

    /// Parses one id, or `all` for every family.
    pub fn parse_selection(s: &str) -> Result<Vec<Family>> {
        if s == "all" {
            Ok(Family::ALL.to_vec())
        } else {
            Ok(vec![s.parse()?])
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.id() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string(), Family::valid_ids()))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Shape parameters of the generated pairs. Ranges are `[lo, hi]` and
/// sampled uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairParams {
    /// Pairs per family (the ℓ1/ℓ∞ family always has exactly one).
    pub count: usize,
    /// Semi-axes of `K` in the ellipsoid family.
    pub ellipsoid_k_axes: [f64; 2],
    /// Semi-axes of `T` in the ellipsoid family.
    pub ellipsoid_t_axes: [f64; 2],
    /// Half-width of the box `K`; `T` is the unit cross-polytope.
    pub box_half_width: [f64; 2],
    /// `±` vertex pairs of the random V-polytope `K`; `T` is the unit ball.
    pub vpoly_pairs: usize,
    /// Euclidean norms of the V-polytope vertices.
    pub vpoly_radius: [f64; 2],
}

impl Default for PairParams {
    fn default() -> Self {
        PairParams {
            count: 3,
            ellipsoid_k_axes: [1.0, 1.6],
            ellipsoid_t_axes: [0.8, 1.0],
            box_half_width: [1.0, 2.0],
            vpoly_pairs: 4,
            vpoly_radius: [1.0, 2.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// A family id or `all`.
    pub family: String,
    pub n: usize,
    pub params: PairParams,
    pub a_grid: Vec<f64>,
    /// Entropy indices `[first, last]` for the gamma report.
    pub k_range: [u32; 2],
    pub p_list: Vec<f64>,
    pub effort: Effort,
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            family: "all".into(),
            n: 2,
            params: PairParams::default(),
            a_grid: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            k_range: [1, 6],
            p_list: vec![1.0, 2.0],
            effort: Effort::default(),
            seed: 0,
        }
    }
}

/// A generated `(K, T)` pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BodyPair {
    pub id: String,
    pub family: Family,
    pub k: ConvexBody,
    pub t: ConvexBody,
}

impl BodyPair {
    /// `(T°, K°)`.
    pub fn polar_pair(&self, id: String) -> BodyPair {
        BodyPair { id, family: self.family, k: self.t.polar(), t: self.k.polar() }
    }
}

fn family_rng(seed: u64, family: Family, index: usize) -> ChaCha8Rng {
    let tag = Family::ALL.iter().position(|f| *f == family).unwrap_or(0) as u64;
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (tag << 32) ^ index as u64)
}

fn uniform(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..=range[1])
    } else {
        range[0]
    }
}

/// Haar-distributed rotation: QR of a Gaussian matrix with the signs of
/// `R`'s diagonal moved into `Q`.
fn random_rotation(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn random_ellipsoid(rng: &mut ChaCha8Rng, n: usize, axes: [f64; 2]) -> Result<ConvexBody> {
    let rot = random_rotation(rng, n);
    let inv_sq = DMatrix::from_fn(n, n, |i, j| if i == j { uniform(rng, axes).powi(-2) } else { 0.0 });
    let q = &rot * inv_sq * rot.transpose();
    ConvexBody::ellipsoid((&q + q.transpose()) * 0.5)
}

fn random_vpolytope(rng: &mut ChaCha8Rng, n: usize, pairs: usize, radius: [f64; 2]) -> Result<ConvexBody> {
    // the first n directions are kept near the axes so the hull is full-dimensional
    let mut vs: Vec<Point> = Vec::with_capacity(2 * pairs);
    for i in 0..pairs.max(n) {
        let mut v: Point = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        if i < n {
            v[i] += 3.0 * v[i].signum();
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let r = uniform(rng, radius);
        let v: Point = v.iter().map(|x| x * r / norm).collect();
        vs.push(v.iter().map(|x| -x).collect());
        vs.push(v);
    }
    ConvexBody::vpolytope(vs)
}

/// Deterministic pairs for the selected families, each followed by its
/// polar pair.
pub fn generate_family(spec: &ExperimentSpec) -> Result<Vec<BodyPair>> {
    let families = Family::parse_selection(&spec.family)?;
    let n = spec.n;
    if !(1..=3).contains(&n) {
        return Err(Error::Precondition(format!("families are generated for 1 ≤ n ≤ 3, got n = {n}")));
    }
    let p = &spec.params;
    let mut out = Vec::new();
    for family in families {
        let count = if family == Family::L1Linf { 1 } else { p.count };
        for i in 0..count {
            let mut rng = family_rng(spec.seed, family, i);
            let (k, t) = match family {
                Family::Ellipsoid => {
                    (random_ellipsoid(&mut rng, n, p.ellipsoid_k_axes)?, random_ellipsoid(&mut rng, n, p.ellipsoid_t_axes)?)
                }
                Family::L1Linf => (ConvexBody::lp_ball(1.0, vec![1.0; n])?, ConvexBody::lp_ball(f64::INFINITY, vec![1.0; n])?),
                Family::BoxCross => (ConvexBody::cube(n, uniform(&mut rng, p.box_half_width))?, ConvexBody::cross_polytope(n, 1.0)?),
                Family::VpolyBall => {
                    (random_vpolytope(&mut rng, n, p.vpoly_pairs, p.vpoly_radius)?, ConvexBody::euclidean_ball(n, 1.0)?)
                }
            };
            let pair = BodyPair { id: format!("{family}-{i}"), family, k, t };
            let polar = pair.polar_pair(format!("{family}-{i}-polar"));
            let self_polar = polar.k.to_json() == pair.k.to_json() && polar.t.to_json() == pair.t.to_json();
            out.push(pair);
            if !self_polar {
                out.push(polar);
            }
        }
    }
    Ok(out)
}

/// One `(pair, a)` cell of the duality scan. Logs are base 2; `ratio`
/// brackets `log N(K,T) / log N(T°, a⁻¹K°)`, the smallest admissible `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityRow {
    pub pair_id: String,
    pub family: Family,
    pub n: usize,
    pub a: f64,
    pub n_kt: Bracket<u64>,
    pub n_dual: Bracket<u64>,
    pub log_n_kt: Bracket<f64>,
    pub log_n_dual: Bracket<f64>,
    pub ratio: Bracket<f64>,
    pub flags: Vec<String>,
}

impl DualityRow {
    fn build(pair: &BodyPair, a: f64, n_kt: &Bracket<u64>, n_dual: &Bracket<u64>) -> Self {
        let log_n_kt = n_kt.log2();
        let log_n_dual = n_dual.log2();
        let div = |x: f64, y: f64| if y > 0.0 { x / y } else if x > 0.0 { f64::INFINITY } else { 0.0 };
        let ratio = Bracket::new(div(log_n_kt.lo, log_n_dual.hi), div(log_n_kt.hi, log_n_dual.lo));
        let mut flags: Vec<String> = Vec::new();
        if n_kt.hi == 1 {
            flags.push("degenerate".into());
        }
        for (side, b) in [("kt", n_kt), ("dual", n_dual)] {
            for f in &b.flags {
                flags.push(format!("{side}: {f}"));
            }
        }
        DualityRow {
            pair_id: pair.id.clone(),
            family: pair.family,
            n: pair.k.dim(),
            a,
            n_kt: strip(n_kt),
            n_dual: strip(n_dual),
            log_n_kt: strip(&log_n_kt),
            log_n_dual: strip(&log_n_dual),
            ratio,
            flags,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.flags.iter().any(|f| f == "degenerate")
    }

    /// Fit slack: twice the summed widths of the two log brackets.
    pub fn slack(&self) -> f64 {
        2.0 * (self.log_n_kt.width() + self.log_n_dual.width())
    }

    /// Least `b` with `log N(K,T).hi ≤ b·log N(T°, a⁻¹K°).lo + slack`.
    pub fn required_b(&self) -> f64 {
        let need = self.log_n_kt.hi - self.slack();
        if need <= 0.0 {
            0.0
        } else if self.log_n_dual.lo > 0.0 {
            need / self.log_n_dual.lo
        } else {
            f64::INFINITY
        }
    }
}

fn strip<T: Clone>(b: &Bracket<T>) -> Bracket<T> {
    Bracket { lo: b.lo.clone(), hi: b.hi.clone(), lo_witness: None, hi_witness: None, flags: Vec::new() }
}

/// Runs the scan; rows sorted by pair id then `a`. Per-pair failures become
/// flagged rows with the trivial bracket `[1, ∞)`.
pub fn duality_scan(pairs: &[BodyPair], a_grid: &[f64], effort: &Effort) -> Result<Vec<DualityRow>> {
    if a_grid.is_empty() || a_grid.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Error::Precondition("a_grid must hold positive finite values".into()));
    }
    if a_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("a_grid must be strictly ascending".into()));
    }
    effort.validate()?;
    let attempt = |k: &ConvexBody, t: &ConvexBody| match covering_bracket(k, t, effort) {
        Ok(b) => b,
        Err(e) => {
            let mut b = Bracket::new(1, u64::MAX);
            b.flag(format!("failed: {e}"));
            b
        }
    };
    let direct: Vec<Bracket<u64>> = pairs.par_iter().map(|p| attempt(&p.k, &p.t)).collect();
    let cells: Vec<(usize, f64)> =
        (0..pairs.len()).flat_map(|i| a_grid.iter().map(move |&a| (i, a))).collect();
    let mut rows: Vec<DualityRow> = cells
        .par_iter()
        .map(|&(i, a)| {
            let p = &pairs[i];
            let dual = attempt(&p.t.polar(), &p.k.polar().scaled(1.0 / a));
            DualityRow::build(p, a, &direct[i], &dual)
        })
        .collect();
    rows.sort_by(|x, y| x.pair_id.cmp(&y.pair_id).then(x.a.total_cmp(&y.a)));
    Ok(rows)
}

/// `b(a)` on one slice of rows, with the rows that make it infinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub a: f64,
    pub b: f64,
    pub loose: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitGroup {
    /// Family id, or `all`.
    pub group: String,
    pub frontier: Vec<FrontierPoint>,
    /// Smallest grid `a` with `b(a) ≤ 1`; otherwise the largest `a`.
    pub a: f64,
    pub b: f64,
    /// Rows whose brackets are too loose for a finite `b` at the chosen `a`.
    pub loose: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub groups: Vec<FitGroup>,
    /// `log(1+n)·log log(2+n)` (natural logs) per dimension present, the
    /// shape of the corollary's constant with its universal factor left out.
    pub log_factor: Vec<(usize, f64)>,
}

impl FitSummary {
    pub fn group(&self, id: &str) -> Option<&FitGroup> {
        self.groups.iter().find(|g| g.group == id)
    }
}

fn fit_group(group: String, rows: &[&DualityRow]) -> Option<FitGroup> {
    let mut grid: Vec<f64> = rows.iter().map(|r| r.a).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if grid.is_empty() {
        return None;
    }
    let frontier: Vec<FrontierPoint> = grid
        .iter()
        .map(|&a| {
            let at: Vec<&&DualityRow> = rows.iter().filter(|r| r.a == a).collect();
            let b = at.iter().map(|r| r.required_b()).fold(0.0, f64::max);
            let loose = at
                .iter()
                .filter(|r| r.required_b().is_infinite())
                .map(|r| {
                    format!("{} at a = {}: log N(K,T) ⊂ [{:.3}, {:.3}], log N(T°, a⁻¹K°) ⊂ [{:.3}, {:.3}]",
                        r.pair_id, r.a, r.log_n_kt.lo, r.log_n_kt.hi, r.log_n_dual.lo, r.log_n_dual.hi)
                })
                .collect();
            FrontierPoint { a, b, loose }
        })
        .collect();
    let pick = frontier.iter().find(|f| f.b <= 1.0).unwrap_or_else(|| frontier.last().expect("nonempty grid"));
    Some(FitGroup { group, a: pick.a, b: pick.b, loose: pick.loose.clone(), frontier })
}

/// Fitted `(a, b)` per family and over all rows. Degenerate rows carry no
/// constraint and are skipped.
pub fn fit_constants(rows: &[DualityRow]) -> Result<FitSummary> {
    let live: Vec<&DualityRow> = rows.iter().filter(|r| !r.is_degenerate()).collect();
    if live.is_empty() {
        return Err(Error::Insufficient("every row is degenerate; nothing to fit".into()));
    }
    let mut families: Vec<Family> = live.iter().map(|r| r.family).collect();
    families.sort();
    families.dedup();
    let mut groups = Vec::new();
    for f in families {
        let sel: Vec<&DualityRow> = live.iter().copied().filter(|r| r.family == f).collect();
        groups.extend(fit_group(f.id().to_string(), &sel));
    }
    groups.extend(fit_group("all".into(), &live));
    let mut dims: Vec<usize> = live.iter().map(|r| r.n).collect();
    dims.sort();
    dims.dedup();
    let log_factor = dims
        .into_iter()
        .map(|n| (n, (1.0 + n as f64).ln() * (2.0 + n as f64).ln().ln()))
        .collect();
    Ok(FitSummary { groups, log_factor })
}

pub const DUALITY_CSV_HEADER: &str = "pair_id,family,n,a,n_kt_lo,n_kt_hi,n_dual_lo,n_dual_hi,\
log_n_kt_lo,log_n_kt_hi,log_n_dual_lo,log_n_dual_hi,ratio_lo,ratio_hi,flags";

/// CSV with the frozen column order [`DUALITY_CSV_HEADER`].
pub fn rows_to_csv(rows: &[DualityRow]) -> String {
    let mut out = String::from(DUALITY_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.pair_id,
            r.family,
            r.n,
            r.a,
            r.n_kt.lo,
            r.n_kt.hi,
            r.n_dual.lo,
            r.n_dual.hi,
            r.log_n_kt.lo,
            r.log_n_kt.hi,
            r.log_n_dual.lo,
            r.log_n_dual.hi,
            r.ratio.lo,
            r.ratio.hi,
            csv_field(&r.flags.join(";"))
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Scatter of bracket midpoints `(log N(K,T), log N(T°, a⁻¹K°))`, one
/// colour per `a`, with the bracket extents drawn as error bars.
pub fn rows_to_svg(rows: &[DualityRow]) -> String {
    const SIZE: f64 = 480.0;
    const PAD: f64 = 48.0;
    const COLOURS: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];
    let finite = |x: f64| if x.is_finite() { x } else { 0.0 };
    let top = rows
        .iter()
        .flat_map(|r| [finite(r.log_n_kt.hi), finite(r.log_n_dual.hi)])
        .fold(1.0f64, f64::max)
        .ceil();
    let sx = |v: f64| PAD + finite(v).min(top) / top * (SIZE - 2.0 * PAD);
    let sy = |v: f64| SIZE - PAD - finite(v).min(top) / top * (SIZE - 2.0 * PAD);
    let mut grid: Vec<f64> = rows.iter().map(|r| r.a).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (lo, hi) = (PAD, SIZE - PAD);
    let _ = writeln!(s, r#"<path d="M{lo} {lo} L{lo} {hi} L{hi} {hi}" stroke="black" fill="none"/>"#);
    let _ = writeln!(s, r##"<line x1="{lo}" y1="{hi}" x2="{hi}" y2="{lo}" stroke="#999" stroke-dasharray="4 3"/>"##);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">log2 N(K,T)</text>"#, SIZE / 2.0, SIZE - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">log2 N(T°, K°/a)</text>"#, SIZE / 2.0, SIZE / 2.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{top}</text>"#, hi, hi + 14.0);
    for (i, a) in grid.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{colour}">a = {a}</text>"#, lo + 8.0, lo + 14.0 * i as f64);
        for r in rows.iter().filter(|r| r.a == *a) {
            let (x, y) = ((r.log_n_kt.lo + finite(r.log_n_kt.hi)) / 2.0, (r.log_n_dual.lo + finite(r.log_n_dual.hi)) / 2.0);
            let _ = writeln!(
                s,
                r#"<g stroke="{colour}"><line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"><title>{}</title></circle></g>"#,
                sx(r.log_n_kt.lo), sy(y), sx(r.log_n_kt.hi), sy(y),
                sx(x), sy(r.log_n_dual.lo), sx(x), sy(r.log_n_dual.hi),
                sx(x), sy(y), r.pair_id
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(family: &str, count: usize, seed: u64) -> ExperimentSpec {
        ExperimentSpec {
            family: family.into(),
            params: PairParams { count, ..PairParams::default() },
            seed,
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn ellipsoid_family_is_reproducible() {
        let a = generate_family(&spec("ellipsoid", 3, 7)).unwrap();
        let b = generate_family(&spec("ellipsoid", 3, 7)).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a.iter().filter(|p| !p.id.ends_with("polar")).count(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.k.to_json(), y.k.to_json());
            assert_eq!(x.t.to_json(), y.t.to_json());
            assert_eq!(x.k.kind(), "ellipsoid");
        }
        let c = generate_family(&spec("ellipsoid", 3, 8)).unwrap();
        assert_ne!(a[0].k.to_json(), c[0].k.to_json());
    }

    #[test]
    fn l1_linf_is_the_unit_pair() {
        let pairs = generate_family(&spec("l1-linf", 5, 0)).unwrap();
        assert_eq!(pairs.len(), 1);
        let x = [0.3, -0.5];
        assert!((pairs[0].k.gauge(&x) - 0.8).abs() < 1e-12);
        assert!((pairs[0].t.gauge(&x) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn polar_closure() {
        let pairs = generate_family(&spec("all", 2, 3)).unwrap();
        let key = |k: &ConvexBody, t: &ConvexBody| (k.to_json(), t.to_json());
        let keys: Vec<_> = pairs.iter().map(|p| key(&p.k, &p.t)).collect();
        let probe = [0.37, -0.81];
        for p in &pairs {
            let (kp, tp) = (p.t.polar(), p.k.polar());
            let found = keys.contains(&key(&kp, &tp))
                || pairs.iter().any(|q| {
                    (q.k.gauge(&probe) - kp.gauge(&probe)).abs() < 1e-9
                        && (q.t.gauge(&probe) - tp.gauge(&probe)).abs() < 1e-9
                });
            assert!(found, "polar pair of {} missing", p.id);
        }
    }

    #[test]
    fn unknown_family_lists_valid_ids() {
        let err = generate_family(&spec("cubes", 1, 0)).unwrap_err().to_string();
        for id in ["ellipsoid", "l1-linf", "box-cross", "vpoly-ball"] {
            assert!(err.contains(id), "{err}");
        }
    }

    #[test]
    fn scan_shape_and_degenerate_row() {
        let disk = ConvexBody::euclidean_ball(2, 1.0).unwrap();
        let pair = BodyPair { id: "self".into(), family: Family::Ellipsoid, k: disk.clone(), t: disk };
        let rows = duality_scan(&[pair], &[1.0, 2.0, 4.0], &Effort::default()).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.is_degenerate() && r.log_n_kt.hi == 0.0));
        assert!(fit_constants(&rows[..1]).is_err());
    }

    #[test]
    fn scan_rejects_bad_grid() {
        let sq = ConvexBody::cube(1, 1.0).unwrap();
        let pair = BodyPair { id: "p".into(), family: Family::BoxCross, k: sq.clone(), t: sq };
        assert!(duality_scan(std::slice::from_ref(&pair), &[2.0, 1.0], &Effort::default()).is_err());
        assert!(duality_scan(&[pair], &[0.0], &Effort::default()).is_err());
    }

    fn row(id: &str, a: f64, kt: (u64, u64), dual: (u64, u64)) -> DualityRow {
        let pair = BodyPair {
            id: id.into(),
            family: Family::BoxCross,
            k: ConvexBody::cube(1, 1.0).unwrap(),
            t: ConvexBody::cube(1, 1.0).unwrap(),
        };
        DualityRow::build(&pair, a, &Bracket::new(kt.0, kt.1), &Bracket::new(dual.0, dual.1))
    }

    #[test]
    fn fit_is_monotone_in_rows() {
        let base = vec![row("p", 1.0, (4, 4), (4, 4)), row("p", 2.0, (4, 4), (16, 16))];
        let f1 = fit_constants(&base).unwrap();
        let g1 = f1.group("box-cross").unwrap();
        assert_eq!((g1.a, g1.b), (1.0, 1.0));
        let mut more = base.clone();
        more.push(row("q", 1.0, (16, 16), (4, 4)));
        more.push(row("q", 2.0, (16, 16), (8, 8)));
        let g2 = fit_constants(&more).unwrap().group("box-cross").unwrap().clone();
        assert!(g2.a >= g1.a && g2.b >= g1.b);
        assert_eq!((g2.a, g2.b), (2.0, 4.0 / 3.0));
    }

    #[test]
    fn loose_rows_are_named() {
        let rows = vec![row("wide", 1.0, (8, 8), (1, 1))];
        let fit = fit_constants(&rows).unwrap();
        let g = fit.group("all").unwrap();
        assert!(g.b.is_infinite());
        assert!(g.loose[0].contains("wide"));
    }

    #[test]
    fn csv_and_svg_render() {
        let rows = vec![row("p", 1.0, (4, 4), (2, 8))];
        let csv = rows_to_csv(&rows);
        assert!(csv.starts_with(DUALITY_CSV_HEADER));
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("p,box-cross,1,1,4,4,2,8,2,2,1,3,"));
        let svg = rows_to_svg(&rows);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
