//! Dense two-phase simplex for the small linear programs that show up in
//! gauge, support and hull-distance computations.
//!
//! Problems are tiny (tens of variables, a few hundred rows at most), so a
//! full dense tableau is the simplest thing that works. Pricing uses the
//! most negative reduced cost and falls back to Bland's rule (lowest index)
//! after a run of degenerate pivots, which keeps the pivot sequence
//! deterministic and cycle free.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 32;
const MAX_PIVOTS: usize = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
struct Row {
    coeffs: Vec<f64>,
    rel: Relation,
    rhs: f64,
}

/// `minimize c·x` subject to linear rows; variables are nonnegative unless
/// declared free.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    objective: Vec<f64>,
    free: Vec<bool>,
    rows: Vec<Row>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Result<(Vec<f64>, f64)> {
        match self {
            LpOutcome::Optimal { x, value } => Ok((x, value)),
            LpOutcome::Infeasible => Err(Error::Lp("infeasible".into())),
            LpOutcome::Unbounded => Err(Error::Lp("unbounded".into())),
        }
    }
}

impl LinearProgram {
    pub fn minimize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram { objective, free: vec![false; n], rows: Vec::new() }
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::minimize(objective.into_iter().map(|c| -c).collect())
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_free(&mut self, var: usize) -> &mut Self {
        self.free[var] = true;
        self
    }

    pub fn add(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.objective.len(), "row width mismatch");
        self.rows.push(Row { coeffs, rel, rhs });
        self
    }

    /// Solves the program. The reported `value` is always `c·x` for the
    /// objective as passed to [`LinearProgram::minimize`] (so a maximization
    /// built with [`LinearProgram::maximize`] reports the negated optimum;
    /// use [`LinearProgram::solve_max`] there).
    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).run(self)
    }

    /// Like [`LinearProgram::solve`] but reports the maximization value for
    /// programs built with [`LinearProgram::maximize`].
    pub fn solve_max(&self) -> LpOutcome {
        match self.solve() {
            LpOutcome::Optimal { x, value } => LpOutcome::Optimal { x, value: -value },
            other => other,
        }
    }
}

struct Tableau {
    // (m + 1) x (ncols + 1), last row is the objective, last column the rhs
    data: Vec<f64>,
    m: usize,
    ncols: usize,
    basis: Vec<usize>,
    // column index of the first artificial variable
    first_artificial: usize,
    // structural column layout: for each user variable (pos, neg) columns
    var_cols: Vec<(usize, Option<usize>)>,
}

impl Tableau {
    fn width(&self) -> usize {
        self.ncols + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width() + c]
    }

    fn build(lp: &LinearProgram) -> Tableau {
        let mut var_cols = Vec::with_capacity(lp.num_vars());
        let mut col = 0;
        for &free in &lp.free {
            if free {
                var_cols.push((col, Some(col + 1)));
                col += 2;
            } else {
                var_cols.push((col, None));
                col += 1;
            }
        }
        let n_struct = col;

        // normalize rows to nonnegative rhs
        let rows: Vec<Row> = lp
            .rows
            .iter()
            .map(|r| {
                if r.rhs < 0.0 {
                    let rel = match r.rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    Row { coeffs: r.coeffs.iter().map(|c| -c).collect(), rel, rhs: -r.rhs }
                } else {
                    r.clone()
                }
            })
            .collect();

        let n_slack = rows.iter().filter(|r| r.rel != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.rel != Relation::Le).count();
        let first_artificial = n_struct + n_slack;
        let ncols = n_struct + n_slack + n_art;
        let m = rows.len();
        let width = ncols + 1;
        let mut data = vec![0.0; (m + 1) * width];
        let mut basis = vec![0; m];

        let mut slack = n_struct;
        let mut art = first_artificial;
        for (i, row) in rows.iter().enumerate() {
            let base = i * width;
            for (v, &c) in row.coeffs.iter().enumerate() {
                let (p, q) = var_cols[v];
                data[base + p] = c;
                if let Some(q) = q {
                    data[base + q] = -c;
                }
            }
            data[base + ncols] = row.rhs;
            match row.rel {
                Relation::Le => {
                    data[base + slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    data[base + slack] = -1.0;
                    slack += 1;
                    data[base + art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    data[base + art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Tableau { data, m, ncols, basis, first_artificial, var_cols }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width();
        let p = self.data[row * w + col];
        for c in 0..w {
            self.data[row * w + c] /= p;
        }
        for r in 0..=self.m {
            if r == row {
                continue;
            }
            let f = self.data[r * w + col];
            if f != 0.0 {
                for c in 0..w {
                    let v = self.data[row * w + c];
                    if v != 0.0 {
                        self.data[r * w + c] -= f * v;
                    }
                }
                self.data[r * w + col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Loads `cost` into the objective row, expressed in the current basis.
    fn load_objective(&mut self, cost: &[f64]) {
        let w = self.width();
        let obj = self.m * w;
        for c in 0..w {
            self.data[obj + c] = if c < cost.len() { cost[c] } else { 0.0 };
        }
        for r in 0..self.m {
            let cb = self.data[obj + self.basis[r]];
            if cb != 0.0 {
                for c in 0..w {
                    self.data[obj + c] -= cb * self.data[r * w + c];
                }
            }
        }
    }

    /// Runs simplex iterations on the loaded objective. Columns at or past
    /// `col_limit` never enter. Returns false when unbounded.
    fn iterate(&mut self, col_limit: usize) -> Option<bool> {
        let w = self.width();
        let obj = self.m * w;
        let mut degenerate = 0usize;
        for _ in 0..MAX_PIVOTS {
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -FEAS_TOL;
            for c in 0..col_limit {
                let rc = self.data[obj + c];
                if rc < best {
                    enter = Some(c);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(col) = enter else { return Some(true) };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.data[r * w + col];
                if a > PIVOT_TOL {
                    let ratio = self.data[r * w + self.ncols] / a;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12
                                || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, ratio)) = leave else { return Some(false) };
            if ratio.abs() < 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(row, col);
        }
        None
    }

    fn run(mut self, lp: &LinearProgram) -> LpOutcome {
        let w = self.width();
        // phase 1
        if self.first_artificial < self.ncols {
            let mut cost = vec![0.0; self.ncols];
            for c in cost.iter_mut().skip(self.first_artificial) {
                *c = 1.0;
            }
            self.load_objective(&cost);
            match self.iterate(self.ncols) {
                Some(true) => {}
                _ => return LpOutcome::Infeasible,
            }
            let infeas = -self.at(self.m, self.ncols);
            let scale = 1.0 + lp.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
            if infeas > 1e-8 * scale {
                return LpOutcome::Infeasible;
            }
            // drive remaining artificials out of the basis
            for r in 0..self.m {
                if self.basis[r] >= self.first_artificial {
                    let col = (0..self.first_artificial)
                        .find(|&c| self.data[r * w + c].abs() > 1e-9);
                    if let Some(col) = col {
                        self.pivot(r, col);
                    }
                    // otherwise the row is redundant; the artificial stays
                    // basic at level zero and never re-enters
                }
            }
        }
        // phase 2
        let mut cost = vec![0.0; self.ncols];
        for (v, &(p, q)) in self.var_cols.iter().enumerate() {
            cost[p] = lp.objective[v];
            if let Some(q) = q {
                cost[q] = -lp.objective[v];
            }
        }
        self.load_objective(&cost);
        match self.iterate(self.first_artificial) {
            Some(true) => {}
            Some(false) => return LpOutcome::Unbounded,
            None => return LpOutcome::Infeasible,
        }
        let mut values = vec![0.0; self.ncols];
        for r in 0..self.m {
            values[self.basis[r]] = self.at(r, self.ncols);
        }
        let x: Vec<f64> = self
            .var_cols
            .iter()
            .map(|&(p, q)| values[p] - q.map_or(0.0, |q| values[q]))
            .collect();
        let value = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
        LpOutcome::Optimal { x, value }
    }
}
