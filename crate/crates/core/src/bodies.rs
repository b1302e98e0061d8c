//! Centrally symmetric convex bodies and their gauge, support, polar,
//! volume and enclosing-ellipsoid operations.
//!
//! Polytopes keep both descriptions: the normalized facet rows `a·x ≤ 1` and
//! the vertex list. They are computed once at construction by brute-force
//! enumeration, which is cheap in the dimensions this crate targets (n ≤ 4)
//! and makes gauge and support evaluation a plain maximum over rows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, enumerate_vertices, norm_inf, Point};
use crate::lp::{LinearProgram, Relation};

/// Both descriptions of a symmetric polytope.
#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    /// Facet normals `a` with the body equal to `{x : a·x ≤ 1}`; closed under
    /// negation and irredundant.
    pub facets: Vec<Point>,
    /// Vertices, closed under negation.
    pub vertices: Vec<Point>,
}

impl Polytope {
    fn from_rows(rows: &[Point], n: usize) -> Result<Polytope> {
        let vertices = enumerate_vertices(rows, n);
        if rank(&vertices, n) < n {
            return Err(Error::InvalidBody("facet rows do not bound a full-dimensional body".into()));
        }
        let facets = enumerate_vertices(&vertices, n);
        Ok(Polytope { facets, vertices })
    }

    fn from_vertices(points: &[Point], n: usize) -> Result<Polytope> {
        if rank(points, n) < n {
            return Err(Error::InvalidBody("vertices do not span the space".into()));
        }
        let facets = enumerate_vertices(points, n);
        let vertices = enumerate_vertices(&facets, n);
        Ok(Polytope { facets, vertices })
    }

    pub fn gauge(&self, x: &[f64]) -> f64 {
        self.facets.iter().map(|a| dot(a, x)).fold(0.0, f64::max)
    }

    pub fn support(&self, y: &[f64]) -> f64 {
        self.vertices.iter().map(|v| dot(v, y)).fold(0.0, f64::max)
    }

    fn transformed(&self, m: &DMatrix<f64>, m_inv: &DMatrix<f64>) -> Polytope {
        let m_inv_t = m_inv.transpose();
        Polytope {
            facets: self.facets.iter().map(|a| linalg::mat_vec(&m_inv_t, a)).collect(),
            vertices: self.vertices.iter().map(|v| linalg::mat_vec(m, v)).collect(),
        }
    }
}

fn rank(points: &[Point], n: usize) -> usize {
    if points.is_empty() {
        return 0;
    }
    let m = linalg::to_matrix(points);
    let scale = points.iter().map(|p| norm_inf(p)).fold(0.0, f64::max).max(1e-300);
    m.rank(1e-10 * scale).min(n)
}

fn symmetric_closure(points: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(points.len() * 2);
    for p in points {
        for q in [p.clone(), linalg::scale(p, -1.0)] {
            let tol = 1e-12 * (1.0 + norm_inf(&q));
            if !out.iter().any(|o| norm_inf(&linalg::sub(o, &q)) <= tol) {
                out.push(q);
            }
        }
    }
    out
}

/// Exponent of an ℓp ball; `f64::INFINITY` is the max-norm ball.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PNorm(pub f64);

impl PNorm {
    pub fn is_inf(self) -> bool {
        self.0.is_infinite()
    }

    pub fn conjugate(self) -> PNorm {
        if self.0 == 1.0 {
            PNorm(f64::INFINITY)
        } else if self.is_inf() {
            PNorm(1.0)
        } else {
            PNorm(self.0 / (self.0 - 1.0))
        }
    }

    fn norm(self, v: impl Iterator<Item = f64> + Clone) -> f64 {
        let p = self.0;
        if self.is_inf() {
            v.fold(0.0f64, |m, x| m.max(x.abs()))
        } else if p == 1.0 {
            v.map(f64::abs).sum()
        } else {
            let m = v.clone().fold(0.0f64, |m, x| m.max(x.abs()));
            if m == 0.0 {
                return 0.0;
            }
            m * v.map(|x| (x.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }
}

#[derive(Clone, Debug)]
enum Repr {
    H { a: Vec<Point>, b: Vec<f64>, poly: Polytope },
    V { v: Vec<Point>, poly: Polytope },
    Ellipsoid { q: DMatrix<f64>, q_inv: DMatrix<f64> },
    Lp { p: PNorm, r: Vec<f64> },
    Image { m: DMatrix<f64>, m_inv: DMatrix<f64>, inner: Box<ConvexBody> },
}

/// A centrally symmetric convex body with the origin in its interior.
/// Immutable after construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "BodySpec", into = "BodySpec")]
pub struct ConvexBody {
    dim: usize,
    repr: Repr,
}

/// Borrowed view of a body's representation, for algorithms that specialize
/// on it.
pub enum View<'a> {
    Polytope(&'a Polytope),
    Ellipsoid { q: &'a DMatrix<f64>, q_inv: &'a DMatrix<f64> },
    Lp { p: PNorm, r: &'a [f64] },
    Image { m: &'a DMatrix<f64>, m_inv: &'a DMatrix<f64>, inner: &'a ConvexBody },
}

fn check_finite(what: &str, vals: impl IntoIterator<Item = f64>) -> Result<()> {
    if vals.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::InvalidBody(format!("{what} has non-finite entries")))
    }
}

fn square_matrix(rows: &[Point], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidBody(format!("{what} must be a nonempty square matrix")));
    }
    check_finite(what, rows.iter().flatten().copied())?;
    Ok(linalg::to_matrix(rows))
}

impl ConvexBody {
    /// `{x : |aᵢ·x| ≤ bᵢ}`; rows are implicitly closed under negation.
    pub fn hpolytope(a: Vec<Point>, b: Vec<f64>) -> Result<Self> {
        let n = a.first().map_or(0, |r| r.len());
        if n == 0 || a.iter().any(|r| r.len() != n) || a.len() != b.len() {
            return Err(Error::InvalidBody("A must be m×n with m = len(b) and n ≥ 1".into()));
        }
        check_finite("A", a.iter().flatten().copied())?;
        if !b.iter().all(|&x| x > 0.0 && x.is_finite()) {
            return Err(Error::InvalidBody("every entry of b must be positive".into()));
        }
        let rows: Vec<Point> = a.iter().zip(&b).map(|(r, &bi)| linalg::scale(r, 1.0 / bi)).collect();
        let poly = Polytope::from_rows(&symmetric_closure(&rows), n)?;
        Ok(ConvexBody { dim: n, repr: Repr::H { a, b, poly } })
    }

    /// `conv(±V)`.
    pub fn vpolytope(v: Vec<Point>) -> Result<Self> {
        let n = v.first().map_or(0, |r| r.len());
        if n == 0 || v.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidBody("vertex list must be nonempty with equal lengths".into()));
        }
        check_finite("V", v.iter().flatten().copied())?;
        let poly = Polytope::from_vertices(&symmetric_closure(&v), n)?;
        Ok(ConvexBody { dim: n, repr: Repr::V { v, poly } })
    }

    /// `{x : xᵀQx ≤ 1}` for symmetric positive definite `Q`.
    pub fn ellipsoid(q: DMatrix<f64>) -> Result<Self> {
        let n = q.nrows();
        if n == 0 || q.ncols() != n {
            return Err(Error::InvalidBody("Q must be square".into()));
        }
        check_finite("Q", q.iter().copied())?;
        let scale = q.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if (&q - q.transpose()).iter().any(|d| d.abs() > 1e-12 * scale.max(1.0)) {
            return Err(Error::InvalidBody("Q must be symmetric".into()));
        }
        let q = (&q + q.transpose()) * 0.5;
        let Some(chol) = q.clone().cholesky() else {
            return Err(Error::InvalidBody("Q must be positive definite".into()));
        };
        let q_inv = chol.inverse();
        Ok(ConvexBody { dim: n, repr: Repr::Ellipsoid { q, q_inv } })
    }

    pub fn ellipsoid_from_rows(q: &[Point]) -> Result<Self> {
        Self::ellipsoid(square_matrix(q, "Q")?)
    }

    /// `{x : ‖(xᵢ/rᵢ)‖_p ≤ 1}`.
    pub fn lp_ball(p: f64, r: Vec<f64>) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::InvalidBody(format!("p must be in [1, ∞], got {p}")));
        }
        if r.is_empty() || !r.iter().all(|&x| x > 0.0 && x.is_finite()) {
            return Err(Error::InvalidBody("radii must be positive and finite".into()));
        }
        Ok(ConvexBody { dim: r.len(), repr: Repr::Lp { p: PNorm(p), r } })
    }

    /// `M(inner)`.
    pub fn linear_image(m: DMatrix<f64>, inner: ConvexBody) -> Result<Self> {
        let n = inner.dim;
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::InvalidBody(format!("M must be {n}×{n}")));
        }
        check_finite("M", m.iter().copied())?;
        let det = m.determinant();
        let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
        if det.abs() <= 1e-12 * scale.powi(n as i32) {
            return Err(Error::Singular(det.abs()));
        }
        let m_inv = m.clone().try_inverse().ok_or(Error::Singular(det.abs()))?;
        Ok(ConvexBody { dim: n, repr: Repr::Image { m, m_inv, inner: Box::new(inner) } })
    }

    pub fn euclidean_ball(n: usize, radius: f64) -> Result<Self> {
        Self::lp_ball(2.0, vec![radius; n])
    }

    pub fn cube(n: usize, half_width: f64) -> Result<Self> {
        Self::lp_ball(f64::INFINITY, vec![half_width; n])
    }

    pub fn cross_polytope(n: usize, radius: f64) -> Result<Self> {
        Self::lp_ball(1.0, vec![radius; n])
    }

    /// Parses the command-line shorthands `l1:n[:r]`, `linf:n[:r]`,
    /// `ball:n[:r]`, `box:n:r` and `lp:p:n[:r]`.
    pub fn builtin(name: &str) -> Result<Self> {
        let parts: Vec<&str> = name.split(':').collect();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}` in `{name}`")))
        };
        let dim = |s: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n),
                _ => Err(Error::Parse(format!("bad dimension `{s}` in `{name}`"))),
            }
        };
        let radius = |i: usize| -> Result<f64> { parts.get(i).map_or(Ok(1.0), |s| num(s)) };
        match parts.as_slice() {
            ["l1", n, ..] if parts.len() <= 3 => Self::cross_polytope(dim(n)?, radius(2)?),
            ["linf", n, ..] if parts.len() <= 3 => Self::cube(dim(n)?, radius(2)?),
            ["ball", n, ..] if parts.len() <= 3 => Self::euclidean_ball(dim(n)?, radius(2)?),
            ["box", n, r] => Self::cube(dim(n)?, num(r)?),
            ["lp", p, n, ..] if parts.len() <= 4 => {
                let p = if *p == "inf" { f64::INFINITY } else { num(p)? };
                Self::lp_ball(p, vec![radius(3)?; dim(n)?])
            }
            _ => Err(Error::Parse(format!(
                "unknown body `{name}` (expected l1:n, linf:n, ball:n, box:n:r or lp:p:n, optional :r)"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &'static str {
        match &self.repr {
            Repr::H { .. } => "hpolytope",
            Repr::V { .. } => "vpolytope",
            Repr::Ellipsoid { .. } => "ellipsoid",
            Repr::Lp { .. } => "lpball",
            Repr::Image { .. } => "linear_image",
        }
    }

    pub fn view(&self) -> View<'_> {
        match &self.repr {
            Repr::H { poly, .. } | Repr::V { poly, .. } => View::Polytope(poly),
            Repr::Ellipsoid { q, q_inv } => View::Ellipsoid { q, q_inv },
            Repr::Lp { p, r } => View::Lp { p: *p, r },
            Repr::Image { m, m_inv, inner } => View::Image { m, m_inv, inner },
        }
    }

    /// Minkowski functional `inf{t > 0 : x ∈ tB}`.
    pub fn gauge(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.repr {
            Repr::H { poly, .. } | Repr::V { poly, .. } => poly.gauge(x),
            Repr::Ellipsoid { q, .. } => quad(q, x).max(0.0).sqrt(),
            Repr::Lp { p, r } => p.norm(x.iter().zip(r).map(|(a, b)| a / b)),
            Repr::Image { m_inv, inner, .. } => inner.gauge(&linalg::mat_vec(m_inv, x)),
        }
    }

    /// Support function `sup_{x∈B} ⟨x, y⟩`.
    pub fn support(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.dim);
        match &self.repr {
            Repr::H { poly, .. } | Repr::V { poly, .. } => poly.support(y),
            Repr::Ellipsoid { q_inv, .. } => quad(q_inv, y).max(0.0).sqrt(),
            Repr::Lp { p, r } => p.conjugate().norm(y.iter().zip(r).map(|(a, b)| a * b)),
            Repr::Image { m, inner, .. } => inner.support(&linalg::mat_vec(&m.transpose(), y)),
        }
    }

    /// A subgradient `g` of the gauge at `x`: `⟨g, x⟩ = gauge(x)` and
    /// `support(g) ≤ 1`, i.e. `g` lies in the polar body.
    pub fn subgradient(&self, x: &[f64]) -> Point {
        let g = self.gauge(x);
        if g <= 0.0 {
            return vec![0.0; self.dim];
        }
        match &self.repr {
            Repr::H { poly, .. } | Repr::V { poly, .. } => {
                let mut best = 0;
                let mut val = f64::NEG_INFINITY;
                for (i, a) in poly.facets.iter().enumerate() {
                    let v = dot(a, x);
                    if v > val {
                        val = v;
                        best = i;
                    }
                }
                poly.facets[best].clone()
            }
            Repr::Ellipsoid { q, .. } => linalg::scale(&linalg::mat_vec(q, x), 1.0 / g),
            Repr::Lp { p, r } => {
                if p.is_inf() {
                    let (i, _) = x
                        .iter()
                        .zip(r)
                        .map(|(a, b)| (a / b).abs())
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
                    let mut out = vec![0.0; self.dim];
                    out[i] = x[i].signum() / r[i];
                    out
                } else if p.0 == 1.0 {
                    x.iter().zip(r).map(|(a, b)| a.signum() / b).collect()
                } else {
                    x.iter()
                        .zip(r)
                        .map(|(a, b)| a.signum() * (a.abs() / b / g).powf(p.0 - 1.0) / b)
                        .collect()
                }
            }
            Repr::Image { m_inv, inner, .. } => {
                let gi = inner.subgradient(&linalg::mat_vec(m_inv, x));
                linalg::mat_vec(&m_inv.transpose(), &gi)
            }
        }
    }

    /// Exact polar body by representation swap.
    pub fn polar(&self) -> ConvexBody {
        let repr = match &self.repr {
            Repr::H { a, b, poly } => {
                let v: Vec<Point> = a.iter().zip(b).map(|(r, &bi)| linalg::scale(r, 1.0 / bi)).collect();
                let poly = Polytope { facets: poly.vertices.clone(), vertices: poly.facets.clone() };
                Repr::V { v, poly }
            }
            Repr::V { v, poly } => {
                let poly = Polytope { facets: poly.vertices.clone(), vertices: poly.facets.clone() };
                Repr::H { a: v.clone(), b: vec![1.0; v.len()], poly }
            }
            Repr::Ellipsoid { q, q_inv } => Repr::Ellipsoid { q: q_inv.clone(), q_inv: q.clone() },
            Repr::Lp { p, r } => Repr::Lp { p: p.conjugate(), r: r.iter().map(|x| 1.0 / x).collect() },
            Repr::Image { m, m_inv, inner } => Repr::Image {
                m: m_inv.transpose(),
                m_inv: m.transpose(),
                inner: Box::new(inner.polar()),
            },
        };
        ConvexBody { dim: self.dim, repr }
    }

    /// `s·B` for `s > 0`, keeping the representation kind.
    pub fn scaled(&self, s: f64) -> ConvexBody {
        assert!(s > 0.0 && s.is_finite(), "scale must be positive");
        let scale_poly = |p: &Polytope| Polytope {
            facets: p.facets.iter().map(|a| linalg::scale(a, 1.0 / s)).collect(),
            vertices: p.vertices.iter().map(|v| linalg::scale(v, s)).collect(),
        };
        let repr = match &self.repr {
            Repr::H { a, b, poly } => {
                Repr::H { a: a.clone(), b: b.iter().map(|x| x * s).collect(), poly: scale_poly(poly) }
            }
            Repr::V { v, poly } => {
                Repr::V { v: v.iter().map(|p| linalg::scale(p, s)).collect(), poly: scale_poly(poly) }
            }
            Repr::Ellipsoid { q, q_inv } => {
                Repr::Ellipsoid { q: q / (s * s), q_inv: q_inv * (s * s) }
            }
            Repr::Lp { p, r } => Repr::Lp { p: *p, r: r.iter().map(|x| x * s).collect() },
            Repr::Image { m, m_inv, inner } => {
                Repr::Image { m: m.clone(), m_inv: m_inv.clone(), inner: Box::new(inner.scaled(s)) }
            }
        };
        ConvexBody { dim: self.dim, repr }
    }

    /// Both descriptions when the body is a polytope (H/V polytopes, ℓ1 and
    /// ℓ∞ balls, and linear images of those).
    pub fn polytope(&self) -> Option<Polytope> {
        let n = self.dim;
        match &self.repr {
            Repr::H { poly, .. } | Repr::V { poly, .. } => Some(poly.clone()),
            Repr::Lp { p, r } if p.0 == 1.0 || p.is_inf() => {
                let axes: Vec<Point> = (0..n)
                    .map(|i| {
                        let mut e = vec![0.0; n];
                        e[i] = r[i];
                        e
                    })
                    .collect();
                let corners: Vec<Point> = (0..1usize << n)
                    .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect())
                    .collect();
                let cross_v = symmetric_closure(&axes);
                let cross_f: Vec<Point> = corners
                    .iter()
                    .map(|c: &Point| c.iter().zip(r).map(|(s, ri)| s / ri).collect())
                    .collect();
                let cube_v: Vec<Point> = corners
                    .iter()
                    .map(|c: &Point| c.iter().zip(r).map(|(s, ri)| s * ri).collect())
                    .collect();
                let cube_f: Vec<Point> = symmetric_closure(
                    &axes.iter().map(|e| e.iter().map(|x| if *x != 0.0 { 1.0 / x } else { 0.0 }).collect()).collect::<Vec<_>>(),
                );
                Some(if p.0 == 1.0 {
                    Polytope { facets: cross_f, vertices: cross_v }
                } else {
                    Polytope { facets: cube_f, vertices: cube_v }
                })
            }
            Repr::Image { m, m_inv, inner } => inner.polytope().map(|p| p.transformed(m, m_inv)),
            _ => None,
        }
    }

    pub fn is_polytope(&self) -> bool {
        match &self.repr {
            Repr::H { .. } | Repr::V { .. } => true,
            Repr::Lp { p, .. } => p.0 == 1.0 || p.is_inf(),
            Repr::Image { inner, .. } => inner.is_polytope(),
            Repr::Ellipsoid { .. } => false,
        }
    }

    /// `Q` with `B = {x : xᵀQx ≤ 1}` when the body is an ellipsoid in any
    /// representation.
    pub fn quadratic_form(&self) -> Option<DMatrix<f64>> {
        match &self.repr {
            Repr::Ellipsoid { q, .. } => Some(q.clone()),
            Repr::Lp { p, r } if p.0 == 2.0 => {
                Some(DMatrix::from_diagonal(&DVector::from_iterator(r.len(), r.iter().map(|x| 1.0 / (x * x)))))
            }
            Repr::Image { m_inv, inner, .. } => inner.quadratic_form().map(|q| m_inv.transpose() * q * m_inv),
            _ => None,
        }
    }

    /// Half-widths of the axis-aligned bounding box.
    pub fn half_widths(&self) -> Point {
        (0..self.dim)
            .map(|i| {
                let mut e = vec![0.0; self.dim];
                e[i] = 1.0;
                self.support(&e)
            })
            .collect()
    }

    /// Lebesgue volume. Polytopes are supported for n ≤ 3.
    pub fn volume(&self) -> Result<f64> {
        let n = self.dim;
        match &self.repr {
            Repr::H { poly, .. } | Repr::V { poly, .. } => polytope_volume(poly, n),
            Repr::Ellipsoid { q, .. } => Ok(unit_ball_volume(n) / q.determinant().sqrt()),
            Repr::Lp { p, r } => {
                let prod: f64 = r.iter().product();
                if p.is_inf() {
                    Ok(2f64.powi(n as i32) * prod)
                } else {
                    use statrs::function::gamma::ln_gamma;
                    let p = p.0;
                    let lv = n as f64 * (2f64.ln() + ln_gamma(1.0 / p + 1.0)) - ln_gamma(n as f64 / p + 1.0);
                    Ok(lv.exp() * prod)
                }
            }
            Repr::Image { m, inner, .. } => Ok(m.determinant().abs() * inner.volume()?),
        }
    }

    /// Gauge of a V-polytope via the linear program
    /// `min Σλ s.t. Σ λᵢ vᵢ = x, λ ≥ 0` over the symmetric vertex set. An
    /// independent route to the facet formula used by [`ConvexBody::gauge`].
    pub fn gauge_lp(&self) -> Option<impl Fn(&[f64]) -> f64 + '_> {
        let verts = match &self.repr {
            Repr::V { v, .. } => symmetric_closure(v),
            _ => return None,
        };
        let n = self.dim;
        Some(move |x: &[f64]| {
            let mut lp = LinearProgram::minimize(vec![1.0; verts.len()]);
            for i in 0..n {
                lp.add(verts.iter().map(|v| v[i]).collect(), Relation::Eq, x[i]);
            }
            lp.solve().optimal().map(|(_, v)| v).unwrap_or(f64::NAN)
        })
    }

    /// Support of an H-polytope via the linear program
    /// `max ⟨x, y⟩ s.t. |aᵢ·x| ≤ bᵢ`. Independent route to the vertex formula.
    pub fn support_lp(&self) -> Option<impl Fn(&[f64]) -> f64 + '_> {
        let (a, b) = match &self.repr {
            Repr::H { a, b, .. } => (a, b),
            _ => return None,
        };
        let n = self.dim;
        Some(move |y: &[f64]| {
            let mut lp = LinearProgram::maximize(y.to_vec());
            for j in 0..n {
                lp.set_free(j);
            }
            for (row, &bi) in a.iter().zip(b) {
                lp.add(row.clone(), Relation::Le, bi);
                lp.add(linalg::scale(row, -1.0), Relation::Le, bi);
            }
            lp.solve_max().optimal().map(|(_, v)| v).unwrap_or(f64::NAN)
        })
    }
}

fn quad(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let v = DVector::from_column_slice(x);
    (v.transpose() * m * &v)[(0, 0)]
}

/// Volume of the Euclidean unit ball in ℝⁿ.
pub fn unit_ball_volume(n: usize) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let n = n as f64;
    (n / 2.0 * std::f64::consts::PI.ln() - ln_gamma(n / 2.0 + 1.0)).exp()
}

fn polytope_volume(poly: &Polytope, n: usize) -> Result<f64> {
    match n {
        1 => Ok(2.0 * poly.vertices.iter().map(|v| v[0].abs()).fold(0.0, f64::max)),
        2 => {
            let mut v = poly.vertices.clone();
            v.sort_by(|a, b| a[1].atan2(a[0]).total_cmp(&b[1].atan2(b[0])));
            let k = v.len();
            Ok(0.5 * (0..k).map(|i| {
                let (p, q) = (&v[i], &v[(i + 1) % k]);
                p[0] * q[1] - p[1] * q[0]
            }).sum::<f64>().abs())
        }
        3 => {
            // fan from the origin: one pyramid per facet
            let mut total = 0.0;
            for a in &poly.facets {
                let on: Vec<&Point> = poly
                    .vertices
                    .iter()
                    .filter(|v| (dot(a, v) - 1.0).abs() <= 1e-9)
                    .collect();
                if on.len() < 3 {
                    continue;
                }
                let c: Point = (0..3).map(|i| on.iter().map(|v| v[i]).sum::<f64>() / on.len() as f64).collect();
                // in-plane basis
                let an = linalg::norm2(a);
                let normal = linalg::scale(a, 1.0 / an);
                let u = {
                    let d = linalg::sub(on[0], &c);
                    linalg::scale(&d, 1.0 / linalg::norm2(&d))
                };
                let w = cross(&normal, &u);
                let mut ring: Vec<(f64, &Point)> = on
                    .iter()
                    .map(|v| {
                        let d = linalg::sub(v, &c);
                        (dot(&d, &w).atan2(dot(&d, &u)), *v)
                    })
                    .collect();
                ring.sort_by(|x, y| x.0.total_cmp(&y.0));
                let mut area = 0.0;
                for i in 0..ring.len() {
                    let p = linalg::sub(ring[i].1, &c);
                    let q = linalg::sub(ring[(i + 1) % ring.len()].1, &c);
                    area += 0.5 * dot(&cross(&p, &q), &normal);
                }
                total += area.abs() / an / 3.0;
            }
            Ok(total)
        }
        _ => Err(Error::Unsupported(format!("polytope volume in dimension {n} (supported: n ≤ 3)"))),
    }
}

fn cross(a: &[f64], b: &[f64]) -> Point {
    vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Result of [`mvee`].
#[derive(Clone, Debug)]
pub struct Mvee {
    pub ellipsoid: ConvexBody,
    pub q: DMatrix<f64>,
    /// Smallest `ρ` with `ρ⁻¹E ⊆ B`; certifies `d_BM(B, ball) ≤ ρ`.
    pub john_ratio: f64,
    pub iterations: usize,
}

/// Origin-centered minimum-volume enclosing ellipsoid of a symmetric
/// polytope (Khachiyan's barycentric coordinate ascent). The returned
/// ellipsoid contains every vertex; its volume is within a factor
/// `(1 + tol)^{n/2}` of optimal.
pub fn mvee(body: &ConvexBody, tol: f64) -> Result<Mvee> {
    let poly = body
        .polytope()
        .ok_or_else(|| Error::Unsupported(format!("mvee of a {} (needs a polytope)", body.kind())))?;
    let n = body.dim();
    let pts = &poly.vertices;
    if rank(pts, n) < n {
        return Err(Error::InvalidBody("vertices do not span the space".into()));
    }
    let k = pts.len();
    let mut u = vec![1.0 / k as f64; k];
    let mut iterations = 0;
    let (x_inv, max_m) = loop {
        let mut x = DMatrix::<f64>::zeros(n, n);
        for (w, p) in u.iter().zip(pts) {
            let v = DVector::from_column_slice(p);
            x += *w * &v * v.transpose();
        }
        let x_inv = x.try_inverse().ok_or(Error::Singular(0.0))?;
        let ms: Vec<f64> = pts.iter().map(|p| quad(&x_inv, p)).collect();
        let (j, &mj) = ms
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |acc, (i, m)| if *m > *acc.1 { (i, m) } else { acc });
        if mj <= n as f64 * (1.0 + tol) || iterations >= 100_000 {
            break (x_inv, mj);
        }
        let step = (mj - n as f64) / (n as f64 * (mj - 1.0));
        for w in u.iter_mut() {
            *w *= 1.0 - step;
        }
        u[j] += step;
        iterations += 1;
    };
    let q = &x_inv / max_m;
    let q_inv = q.clone().try_inverse().ok_or(Error::Singular(0.0))?;
    let john_ratio = poly.facets.iter().map(|a| quad(&q_inv, a).sqrt()).fold(0.0, f64::max);
    Ok(Mvee { ellipsoid: ConvexBody::ellipsoid(q.clone())?, q, john_ratio, iterations })
}

// ---------------------------------------------------------------------------
// JSON text format

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum PValue {
    Num(f64),
    Text(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BodySpec {
    Hpolytope {
        #[serde(rename = "A")]
        a: Vec<Point>,
        b: Vec<f64>,
    },
    Vpolytope {
        #[serde(rename = "V")]
        v: Vec<Point>,
    },
    Ellipsoid {
        #[serde(rename = "Q")]
        q: Vec<Point>,
    },
    Lpball {
        p: PValueWrap,
        r: Vec<f64>,
    },
    LinearImage {
        #[serde(rename = "M")]
        m: Vec<Point>,
        inner: Box<BodySpec>,
    },
}

/// ℓp exponent on the wire: a number, or the string `"inf"`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PValueWrap(PValue);

impl TryFrom<BodySpec> for ConvexBody {
    type Error = Error;

    fn try_from(spec: BodySpec) -> Result<Self> {
        match spec {
            BodySpec::Hpolytope { a, b } => ConvexBody::hpolytope(a, b),
            BodySpec::Vpolytope { v } => ConvexBody::vpolytope(v),
            BodySpec::Ellipsoid { q } => ConvexBody::ellipsoid_from_rows(&q),
            BodySpec::Lpball { p, r } => {
                let p = match p.0 {
                    PValue::Num(x) => x,
                    PValue::Text(s) if s == "inf" => f64::INFINITY,
                    PValue::Text(s) => return Err(Error::Parse(format!("bad p `{s}`"))),
                };
                ConvexBody::lp_ball(p, r)
            }
            BodySpec::LinearImage { m, inner } => {
                let m = square_matrix(&m, "M")?;
                ConvexBody::linear_image(m, ConvexBody::try_from(*inner)?)
            }
        }
    }
}

impl From<ConvexBody> for BodySpec {
    fn from(body: ConvexBody) -> Self {
        BodySpec::from(&body)
    }
}

impl From<&ConvexBody> for BodySpec {
    fn from(body: &ConvexBody) -> Self {
        match &body.repr {
            Repr::H { a, b, .. } => BodySpec::Hpolytope { a: a.clone(), b: b.clone() },
            Repr::V { v, .. } => BodySpec::Vpolytope { v: v.clone() },
            Repr::Ellipsoid { q, .. } => BodySpec::Ellipsoid { q: linalg::from_matrix(q) },
            Repr::Lp { p, r } => BodySpec::Lpball {
                p: PValueWrap(if p.is_inf() { PValue::Text("inf".into()) } else { PValue::Num(p.0) }),
                r: r.clone(),
            },
            Repr::Image { m, inner, .. } => {
                BodySpec::LinearImage { m: linalg::from_matrix(m), inner: Box::new(BodySpec::from(&**inner)) }
            }
        }
    }
}

impl ConvexBody {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bodies always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    fn square() -> ConvexBody {
        ConvexBody::hpolytope(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn gauge_examples() {
        assert_eq!(square().gauge(&[2.0, 1.0]), 2.0);
        let e = ConvexBody::ellipsoid(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]))).unwrap();
        assert!(close(e.gauge(&[1.0, 0.0]), 1.0, 1e-15));
        let l1 = ConvexBody::cross_polytope(2, 1.0).unwrap();
        assert!(close(l1.gauge(&[0.3, 0.4]), 0.7, 1e-15));
    }

    #[test]
    fn support_examples() {
        assert_eq!(square().support(&[1.0, 1.0]), 2.0);
        let e = ConvexBody::ellipsoid(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]))).unwrap();
        assert!(close(e.support(&[1.0, 0.0]), 0.5, 1e-15));
    }

    #[test]
    fn polar_examples() {
        let l1 = ConvexBody::cross_polytope(2, 1.0).unwrap();
        let p = l1.polar();
        for x in [[0.3, -0.9], [2.0, 1.0], [-0.1, 0.05]] {
            assert!(close(p.gauge(&x), norm_inf(&x), 1e-14));
        }
        let e = ConvexBody::ellipsoid(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]))).unwrap();
        match e.polar().view() {
            View::Ellipsoid { q, .. } => {
                assert!(close(q[(0, 0)], 0.25, 1e-15) && close(q[(1, 1)], 1.0, 1e-15));
            }
            _ => panic!("polar of ellipsoid must be an ellipsoid"),
        }
        assert_eq!(square().polar().kind(), "vpolytope");
    }

    #[test]
    fn linear_image_examples() {
        let m2 = DMatrix::identity(2, 2) * 2.0;
        let img = ConvexBody::linear_image(m2, square()).unwrap();
        assert!(close(img.gauge(&[2.0, 0.0]), 1.0, 1e-15));
        let (c, s) = (FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let disk = ConvexBody::euclidean_ball(2, 1.0).unwrap();
        let rd = ConvexBody::linear_image(rot, disk.clone()).unwrap();
        assert!(close(rd.gauge(&[0.3, 0.7]), disk.gauge(&[0.3, 0.7]), 1e-14));
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(ConvexBody::linear_image(singular, square()), Err(Error::Singular(_))));
    }

    #[test]
    fn volume_examples() {
        assert!(close(ConvexBody::cross_polytope(2, 1.0).unwrap().volume().unwrap(), 2.0, 1e-14));
        assert!(close(ConvexBody::euclidean_ball(2, 1.0).unwrap().volume().unwrap(), PI, 1e-14));
        let box2 = ConvexBody::hpolytope(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![2.0, 2.0]).unwrap();
        assert!(close(box2.volume().unwrap(), 16.0, 1e-14));
        // exact polytope route agrees with the closed forms
        let cube3 = ConvexBody::cube(3, 1.0).unwrap();
        let h3 = ConvexBody::hpolytope(cube3.polytope().unwrap().facets, vec![1.0; 6]).unwrap();
        assert!(close(h3.volume().unwrap(), 8.0, 1e-12));
        let oct = ConvexBody::vpolytope(ConvexBody::cross_polytope(3, 1.0).unwrap().polytope().unwrap().vertices).unwrap();
        assert!(close(oct.volume().unwrap(), 4.0 / 3.0, 1e-12));
        let tess = ConvexBody::vpolytope(ConvexBody::cube(4, 1.0).unwrap().polytope().unwrap().vertices).unwrap();
        assert!(matches!(tess.volume(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn lp_ball_volume_matches_polytopes() {
        let a = ConvexBody::lp_ball(1.0, vec![1.0, 2.0, 0.5]).unwrap();
        let v = ConvexBody::vpolytope(a.polytope().unwrap().vertices).unwrap();
        assert!(close(a.volume().unwrap(), v.volume().unwrap(), 1e-12));
    }

    #[test]
    fn mvee_examples() {
        let sq = ConvexBody::vpolytope(square().polytope().unwrap().vertices).unwrap();
        let m = mvee(&sq, 1e-6).unwrap();
        assert!(close(m.q[(0, 0)], 0.5, 1e-6) && m.q[(0, 1)].abs() < 1e-9);
        assert!(close(m.john_ratio, SQRT_2, 1e-6));

        let l1 = ConvexBody::vpolytope(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let m = mvee(&l1, 1e-6).unwrap();
        assert!(close(m.q[(0, 0)], 1.0, 1e-6));
        assert!(close(m.john_ratio, SQRT_2, 1e-6));

        let gon: Vec<Point> = (0..64)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / 64.0;
                vec![t.cos(), t.sin()]
            })
            .collect();
        let m = mvee(&ConvexBody::vpolytope(gon.clone()).unwrap(), 1e-6).unwrap();
        assert!(close(m.q[(0, 0)], 1.0, 1e-5) && close(m.q[(1, 1)], 1.0, 1e-5));
        assert!(m.john_ratio <= 1.01);
        for v in &gon {
            assert!(m.ellipsoid.gauge(v) <= 1.0 + 1e-6);
        }

        let degenerate = ConvexBody::vpolytope(vec![vec![1.0, 1.0], vec![2.0, 2.0]]);
        assert!(degenerate.is_err());
    }

    #[test]
    fn lp_routes_agree_with_closed_forms() {
        let v = ConvexBody::vpolytope(vec![vec![1.0, 0.2], vec![-0.3, 1.0], vec![0.7, 0.7]]).unwrap();
        let g = v.gauge_lp().unwrap();
        for x in [[0.3, 0.2], [-1.0, 2.0], [0.0, 0.5]] {
            assert!(close(g(&x), v.gauge(&x), 1e-9), "{} vs {}", g(&x), v.gauge(&x));
        }
        let h = v.polar();
        let s = h.support_lp().unwrap();
        for y in [[0.3, 0.2], [-1.0, 2.0], [0.0, 0.5]] {
            assert!(close(s(&y), h.support(&y), 1e-9));
        }
    }

    #[test]
    fn construction_errors() {
        assert!(ConvexBody::hpolytope(vec![vec![1.0, 0.0]], vec![1.0]).is_err());
        assert!(ConvexBody::hpolytope(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, -1.0]).is_err());
        assert!(ConvexBody::ellipsoid(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        assert!(ConvexBody::lp_ball(0.5, vec![1.0]).is_err());
        assert!(ConvexBody::ellipsoid(DMatrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn json_format() {
        let text = r#"{"kind":"hpolytope","A":[[1.0,0.0],[0.0,1.0]],"b":[1.0,0.5]}"#;
        let b = ConvexBody::from_json(text).unwrap();
        assert_eq!(b.gauge(&[0.0, 1.0]), 2.0);
        assert_eq!(b.to_json(), text);
        let inf = ConvexBody::from_json(r#"{"kind":"lpball","p":"inf","r":[1.0,2.0]}"#).unwrap();
        assert_eq!(inf.gauge(&[0.5, 2.0]), 1.0);
        let img = r#"{"kind":"linear_image","M":[[2.0,0.0],[0.0,1.0]],"inner":{"kind":"ellipsoid","Q":[[1.0,0.0],[0.0,1.0]]}}"#;
        assert_eq!(ConvexBody::from_json(img).unwrap().to_json(), img);
        assert!(ConvexBody::from_json(r#"{"kind":"blob"}"#).is_err());
    }

    #[test]
    fn builtins() {
        assert_eq!(ConvexBody::builtin("l1:2").unwrap().gauge(&[0.5, 0.5]), 1.0);
        assert_eq!(ConvexBody::builtin("box:2:1.5").unwrap().gauge(&[3.0, 0.0]), 2.0);
        assert_eq!(ConvexBody::builtin("ball:3").unwrap().dim(), 3);
        assert!(ConvexBody::builtin("nope:2").is_err());
        assert!(ConvexBody::builtin("ball:0").is_err());
    }
}
