//! Small dense helpers over `Vec<f64>` points; heavier lifting goes through
//! nalgebra.

use nalgebra::{DMatrix, DVector};

pub type Point = Vec<f64>;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sub(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[inline]
pub fn add(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[inline]
pub fn scale(a: &[f64], s: f64) -> Point {
    a.iter().map(|x| x * s).collect()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let m = rows.len();
    let n = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(m, n, |i, j| rows[i][j])
}

pub fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Point {
    (m * DVector::from_column_slice(x)).as_slice().to_vec()
}

pub fn identity(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

/// Calls `f` with every `k`-subset of `0..n` in lexicographic order.
pub fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == i - 1 + n - k {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn push_unique(out: &mut Vec<Point>, p: Point, tol: f64) {
    if !out.iter().any(|q| norm_inf(&sub(q, &p)) <= tol * (1.0 + norm_inf(&p))) {
        out.push(p);
    }
}

/// Vertices of the bounded polytope `{x : a·x ≤ 1 for every row a}` by brute
/// force over `n`-subsets of rows. Fine for the few dozen rows we see in
/// dimension ≤ 4.
pub fn enumerate_vertices(rows: &[Vec<f64>], n: usize) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    let scale_rows = rows.iter().map(|r| norm_inf(r)).fold(0.0, f64::max).max(1e-300);
    for_each_combination(rows.len(), n, |sel| {
        let a = DMatrix::from_fn(n, n, |i, j| rows[sel[i]][j]);
        let lu = a.clone().lu();
        let det = lu.determinant();
        if det.abs() <= 1e-12 * scale_rows.powi(n as i32) {
            return;
        }
        let Some(x) = lu.solve(&DVector::from_element(n, 1.0)) else { return };
        let x = x.as_slice().to_vec();
        if rows.iter().all(|r| dot(r, &x) <= 1.0 + 1e-9) {
            push_unique(&mut out, x, 1e-9);
        }
    });
    out
}

/// Sorts points lexicographically (total order on finite floats).
pub fn sort_points(points: &mut [Point]) {
    points.sort_by(|a, b| {
        for (x, y) in a.iter().zip(b) {
            match x.total_cmp(y) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        std::cmp::Ordering::Equal
    });
}

/// Smallest Euclidean ball holding every point, by move-to-front Welzl.
/// Returns center and squared radius.
pub fn min_enclosing_ball(points: &[Point]) -> (Point, f64) {
    let dim = points.first().map_or(0, |p| p.len());
    let mut pts = points.to_vec();
    let mut support = Vec::with_capacity(dim + 1);
    let end = pts.len();
    mtf_ball(&mut pts, end, &mut support, dim)
}

fn mtf_ball(pts: &mut Vec<Point>, end: usize, support: &mut Vec<Point>, dim: usize) -> (Point, f64) {
    let mut ball = ball_through(support, dim);
    if support.len() == dim + 1 {
        return ball;
    }
    for i in 0..end {
        let d2 = dot(&sub(&pts[i], &ball.0), &sub(&pts[i], &ball.0));
        if d2 > ball.1 * (1.0 + 1e-12) + 1e-18 {
            support.push(pts[i].clone());
            ball = mtf_ball(pts, i, support, dim);
            support.pop();
            let p = pts.remove(i);
            pts.insert(0, p);
        }
    }
    ball
}

/// Smallest ball with every support point on its boundary (circumcenter in
/// the affine hull). Empty support gives a ball of negative radius.
fn ball_through(support: &[Point], dim: usize) -> (Point, f64) {
    let Some(p0) = support.first() else { return (vec![0.0; dim], -1.0) };
    let vs: Vec<Point> = support[1..].iter().map(|p| sub(p, p0)).collect();
    let m = vs.len();
    if m == 0 {
        return (p0.clone(), 0.0);
    }
    let gram = DMatrix::from_fn(m, m, |i, j| 2.0 * dot(&vs[i], &vs[j]));
    let rhs = DVector::from_fn(m, |i, _| dot(&vs[i], &vs[i]));
    let Some(lambda) = gram.lu().solve(&rhs) else {
        // degenerate support: fall back to the two farthest points
        let (a, b) = (0..support.len())
            .flat_map(|i| (i + 1..support.len()).map(move |j| (i, j)))
            .max_by(|x, y| {
                let dx = norm2(&sub(&support[x.0], &support[x.1]));
                let dy = norm2(&sub(&support[y.0], &support[y.1]));
                dx.total_cmp(&dy)
            })
            .unwrap_or((0, 0));
        let c = scale(&add(&support[a], &support[b]), 0.5);
        let r = norm2(&sub(&support[a], &c));
        return (c, r * r);
    };
    let mut c = p0.clone();
    for (v, l) in vs.iter().zip(lambda.iter()) {
        for (ci, vi) in c.iter_mut().zip(v) {
            *ci += l * vi;
        }
    }
    let r2 = dot(&sub(p0, &c), &sub(p0, &c));
    (c, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_are_complete_and_ordered() {
        let mut seen = Vec::new();
        for_each_combination(5, 3, |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 10);
        assert_eq!(seen[0], vec![0, 1, 2]);
        assert_eq!(seen[9], vec![2, 3, 4]);
        let mut one = 0;
        for_each_combination(4, 4, |_| one += 1);
        assert_eq!(one, 1);
        let mut none = 0;
        for_each_combination(2, 3, |_| none += 1);
        assert_eq!(none, 0);
    }

    #[test]
    fn square_vertices() {
        let rows = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let mut v = enumerate_vertices(&rows, 2);
        sort_points(&mut v);
        assert_eq!(v, vec![vec![-1.0, -1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn enclosing_ball_of_triangle_and_square() {
        let (c, r2) = min_enclosing_ball(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 0.1], vec![1.0, -0.2]]);
        assert!(norm2(&sub(&c, &[1.0, 0.0])) < 1e-12 && (r2 - 1.0).abs() < 1e-12);
        let sq: Vec<Point> = (0..4).map(|i| vec![(i & 1) as f64, (i >> 1) as f64]).collect();
        let (c, r2) = min_enclosing_ball(&sq);
        assert!(norm2(&sub(&c, &[0.5, 0.5])) < 1e-12 && (r2 - 0.5).abs() < 1e-12);
        let (c, r2) = min_enclosing_ball(&[vec![3.0]]);
        assert_eq!((c, r2), (vec![3.0], 0.0));
    }
}
