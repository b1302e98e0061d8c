//! Fast suite of known-answer checks behind the `selftest` command.

use std::f64::consts::PI;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bodies::{mvee, ConvexBody};
use crate::certificate::{tamper, verify, CertificateFile, Claim};
use crate::covering::{
    cover_bracket, covering_bracket, covering_restricted_bracket, entropy_bracket, tail_check, EntropySequence,
    TailStatus,
};
use crate::duality_lab::{generate_family, ExperimentSpec};
use crate::effort::Effort;
use crate::gamma::{dudley_constant, dudley_upper, dyadic_step, gamma_exact_finite, Convention, FiniteMetricSpace};
use crate::separation::{separation_candidates, separation_greedy_lower, verify_separation};

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub result: Result<(), String>,
    pub seconds: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.result.is_ok()
    }
}

type Check = fn(&Effort) -> Result<(), String>;

fn close(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol * want.abs().max(1.0) {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, expected {want}"))
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn diag_ellipsoid(a: f64, b: f64) -> Result<ConvexBody, String> {
    ConvexBody::ellipsoid_from_rows(&[vec![a, 0.0], vec![0.0, b]]).map_err(err)
}

fn gauges(_: &Effort) -> Result<(), String> {
    let square = ConvexBody::cube(2, 1.0).map_err(err)?;
    close("square gauge at (2,1)", square.gauge(&[2.0, 1.0]), 2.0, 1e-12)?;
    close("ellipsoid gauge at (1,0)", diag_ellipsoid(1.0, 4.0)?.gauge(&[1.0, 0.0]), 1.0, 1e-12)?;
    let l1 = ConvexBody::lp_ball(1.0, vec![1.0, 1.0]).map_err(err)?;
    close("l1 gauge at (0.3,0.4)", l1.gauge(&[0.3, 0.4]), 0.7, 1e-12)
}

fn supports(_: &Effort) -> Result<(), String> {
    let square = ConvexBody::cube(2, 1.0).map_err(err)?;
    close("square support at (1,1)", square.support(&[1.0, 1.0]), 2.0, 1e-12)?;
    close("ellipsoid support at (1,0)", diag_ellipsoid(4.0, 1.0)?.support(&[1.0, 0.0]), 0.5, 1e-12)
}

fn polars(_: &Effort) -> Result<(), String> {
    let l1 = ConvexBody::cross_polytope(2, 1.0).map_err(err)?;
    let polar = l1.polar();
    let cube = ConvexBody::cube(2, 1.0).map_err(err)?;
    for x in [[0.3, -0.9], [1.5, 0.2], [-0.7, -0.7]] {
        close("polar of l1 ball", polar.gauge(&x), cube.gauge(&x), 1e-9)?;
    }
    let e = diag_ellipsoid(4.0, 1.0)?.polar();
    close("polar ellipsoid gauge at (2,0)", e.gauge(&[2.0, 0.0]), 1.0, 1e-12)
}

fn volumes(_: &Effort) -> Result<(), String> {
    close("l1 ball area", ConvexBody::cross_polytope(2, 1.0).map_err(err)?.volume().map_err(err)?, 2.0, 1e-9)?;
    close("disk area", ConvexBody::euclidean_ball(2, 1.0).map_err(err)?.volume().map_err(err)?, PI, 1e-9)?;
    close("box area", ConvexBody::cube(2, 2.0).map_err(err)?.volume().map_err(err)?, 16.0, 1e-9)
}

fn john_ellipsoids(_: &Effort) -> Result<(), String> {
    let m = mvee(&ConvexBody::cube(2, 1.0).map_err(err)?, 1e-9).map_err(err)?;
    close("square enclosing disk", m.ellipsoid.gauge(&[1.0, 1.0]), 1.0, 1e-4)?;
    close("square john ratio", m.john_ratio, 2f64.sqrt(), 1e-4)
}

fn interval_covers(effort: &Effort) -> Result<(), String> {
    let t = ConvexBody::cube(1, 1.0).map_err(err)?;
    for a in [1.0, 1.5, 3.0] {
        let b = covering_bracket(&ConvexBody::cube(1, a).map_err(err)?, &t, effort).map_err(err)?;
        let want = a.ceil() as u64;
        if (b.lo, b.hi) != (want, want) {
            return Err(format!("N([-{a},{a}], [-1,1]) = [{}, {}], expected {want}", b.lo, b.hi));
        }
    }
    Ok(())
}

fn self_covers(effort: &Effort) -> Result<(), String> {
    for k in [ConvexBody::euclidean_ball(2, 1.0).map_err(err)?, ConvexBody::cross_polytope(2, 1.0).map_err(err)?] {
        for (name, b) in [
            ("N(K,K)", covering_bracket(&k, &k, effort).map_err(err)?),
            ("N'(K,K)", covering_restricted_bracket(&k, &k, effort).map_err(err)?),
        ] {
            if (b.lo, b.hi) != (1, 1) {
                return Err(format!("{name} on {} = [{}, {}]", k.kind(), b.lo, b.hi));
            }
        }
    }
    Ok(())
}

fn entropy_of_self(effort: &Effort) -> Result<(), String> {
    let k = ConvexBody::cube(2, 1.0).map_err(err)?;
    let b = entropy_bracket(&k, &k, 0, effort).map_err(err)?;
    if !b.contains(1.0) {
        return Err(format!("e_0(K,K) bracket [{}, {}] misses 1", b.lo, b.hi));
    }
    Ok(())
}

fn tail_rejects_constant(effort: &Effort) -> Result<(), String> {
    let seq = EntropySequence::from_values("constant", &[1.0; 13]);
    let rows = tail_check(&seq, 1, effort.eta).map_err(err)?;
    if !rows.iter().any(|r| r.status == TailStatus::CertifiedFail) {
        return Err("a constant sequence passed the tail inequality everywhere".into());
    }
    Ok(())
}

fn separation_trivial(effort: &Effort) -> Result<(), String> {
    let k = ConvexBody::euclidean_ball(2, 1.0).map_err(err)?;
    let t = k.scaled(3.0);
    let cands = separation_candidates(&k, &t, effort).map_err(err)?;
    let cert = separation_greedy_lower(&k, &t, effort.restarts, &cands, effort.seed).map_err(err)?;
    if cert.points.len() != 1 {
        return Err(format!("M̂(K,3K) gave {} points", cert.points.len()));
    }
    let t = ConvexBody::cube(1, 1.0 + effort.eta).map_err(err)?;
    let k = ConvexBody::cube(1, 1.0).map_err(err)?;
    let cands = separation_candidates(&k, &t, effort).map_err(err)?;
    let cert = separation_greedy_lower(&k, &t, effort.restarts, &cands, effort.seed).map_err(err)?;
    verify_separation(&k, &t, &cert, effort.eta)
}

fn dudley_constants(_: &Effort) -> Result<(), String> {
    close("C_1", dudley_constant(1.0).map_err(err)?, 2.0, 1e-12)?;
    close("C_2", dudley_constant(2.0).map_err(err)?, 1.0 / (2.0 * (1.0 - 0.5f64.sqrt())), 1e-12)?;
    for p in [1.0, 1.5, 2.0, 3.0] {
        for j in 1..=12 {
            let s = dyadic_step(p, j).map_err(err)?;
            if !s.holds {
                return Err(format!("dyadic step fails at p = {p}, j = {j}: {} > {}", s.lhs, s.rhs));
            }
        }
    }
    let zero = EntropySequence::from_values("zero", &[0.0; 8]);
    close("Dudley sum of zeros", dudley_upper(2.0, &zero, 1, 0.0).map_err(err)?.dyadic, 0.0, 1e-12)
}

fn finite_gamma(_: &Effort) -> Result<(), String> {
    let single = FiniteMetricSpace::new(vec!["a".into()], vec![vec![0.0]]).map_err(err)?;
    for convention in [Convention::Standard, Convention::PaperLiteral] {
        close("γ of a point", gamma_exact_finite(&single, 1.0, convention).map_err(err)?.0, 0.0, 1e-12)?;
    }
    Ok(())
}

fn family_shapes(_: &Effort) -> Result<(), String> {
    let spec = ExperimentSpec { family: "l1-linf".into(), ..ExperimentSpec::default() };
    let pairs = generate_family(&spec).map_err(err)?;
    if pairs.len() != 1 {
        return Err(format!("l1-linf family has {} pairs", pairs.len()));
    }
    let spec = ExperimentSpec { family: "ellipsoid".into(), seed: 7, ..ExperimentSpec::default() };
    let (a, b) = (generate_family(&spec).map_err(err)?, generate_family(&spec).map_err(err)?);
    if a.iter().map(|p| p.k.to_json()).ne(b.iter().map(|p| p.k.to_json())) {
        return Err("ellipsoid family is not reproducible".into());
    }
    Ok(())
}

fn certificate_soundness(effort: &Effort) -> Result<(), String> {
    let k = ConvexBody::euclidean_ball(2, 1.5).map_err(err)?;
    let t = ConvexBody::cube(2, 1.0).map_err(err)?;
    let bracket = cover_bracket(&k, &t, 1.0, false, effort).map_err(err)?;
    let file = CertificateFile::new(k, t, effort.seed, Claim::CoverBracket { radius_factor: 1.0, bracket });
    verify(&file, effort)?;
    let mut rng = ChaCha8Rng::seed_from_u64(effort.seed);
    for _ in 0..5 {
        let (bad, what) = tamper(&file, &mut rng).map_err(err)?;
        if verify(&bad, effort).is_ok() {
            return Err(format!("tampered certificate ({what}) verified"));
        }
    }
    Ok(())
}

const CHECKS: &[(&str, Check)] = &[
    ("gauge values", gauges),
    ("support values", supports),
    ("polar bodies", polars),
    ("volumes", volumes),
    ("enclosing ellipsoid of the square", john_ellipsoids),
    ("interval covering numbers", interval_covers),
    ("self covers", self_covers),
    ("e_0(K,K) contains 1", entropy_of_self),
    ("tail check rejects a constant sequence", tail_rejects_constant),
    ("separation examples", separation_trivial),
    ("Dudley constants and dyadic steps", dudley_constants),
    ("finite γ of a point", finite_gamma),
    ("family generation", family_shapes),
    ("tampered certificates are refuted", certificate_soundness),
];

/// Runs every check in order; a panic inside a check counts as a failure.
pub fn run(effort: &Effort) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|&(name, check)| {
            let start = Instant::now();
            let result = std::panic::catch_unwind(|| check(effort))
                .unwrap_or_else(|_| Err("check panicked".to_string()));
            CheckOutcome { name, result, seconds: start.elapsed().as_secs_f64() }
        })
        .collect()
}
