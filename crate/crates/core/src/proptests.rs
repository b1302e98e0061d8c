//! Randomized invariants over the public API.

use nalgebra::DMatrix;
use crate::bodies::unit_ball_volume;
use crate::certificate::{tamper, verify, CertificateFile, Claim};
use crate::covering::cover_bracket;
use crate::gamma::{dudley_constant, dyadic_step, gamma_exact_finite, sudakov_lower, Convention, FiniteMetricSpace};
use crate::nets::{certify_cover, grid_candidates, max_packing, CandidateGrid};
use crate::separation::{separation_candidates, separation_greedy_lower, verify_separation};
use crate::{ConvexBody, Effort};
use proptest::prelude::*;
use rand::SeedableRng;

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n)
}

/// Planar bodies of every representation, scaled to have inradius of order 1.
fn planar_body() -> impl Strategy<Value = ConvexBody> {
    prop_oneof![
        (0.3..2.0f64, 0.3..2.0f64, -0.4..0.4f64).prop_map(|(a, b, c)| {
            let off = c * (a * b).sqrt();
            ConvexBody::ellipsoid(DMatrix::from_row_slice(2, 2, &[a, off, off, b])).unwrap()
        }),
        (1.0..6.0f64, 0.5..2.0f64, 0.5..2.0f64).prop_map(|(p, r1, r2)| ConvexBody::lp_ball(p, vec![r1, r2]).unwrap()),
        (0.5..2.0f64, 0.5..2.0f64).prop_map(|(r1, r2)| ConvexBody::lp_ball(f64::INFINITY, vec![r1, r2]).unwrap()),
        (0.0..std::f64::consts::PI, 3usize..7, 0.6..1.5f64).prop_map(|(phase, m, r)| {
            let step = std::f64::consts::PI / m as f64;
            let v = (0..m).map(|i| {
                let a = phase + step * i as f64;
                vec![r * a.cos(), r * a.sin()]
            });
            ConvexBody::vpolytope(v.collect()).unwrap()
        }),
        (0.0..std::f64::consts::PI, 2usize..5).prop_map(|(phase, m)| {
            let step = std::f64::consts::PI / m as f64;
            let a = (0..m).map(|i| vec![(phase + step * i as f64).cos(), (phase + step * i as f64).sin()]);
            ConvexBody::hpolytope(a.collect(), vec![1.0; m]).unwrap()
        }),
        (0.3..1.5f64, -1.0..1.0f64, 0.3..1.5f64).prop_map(|(a, b, d)| {
            ConvexBody::linear_image(DMatrix::from_row_slice(2, 2, &[a, b, 0.0, d]), ConvexBody::cross_polytope(2, 1.0).unwrap())
                .unwrap()
        }),
    ]
}

fn interval(a: f64) -> ConvexBody {
    ConvexBody::cube(1, a).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauge_is_a_norm(body in planar_body(), x in point(2), y in point(2), lambda in 0.01..10.0f64) {
        let g = |v: &[f64]| body.gauge(v);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let scaled: Vec<f64> = x.iter().map(|v| lambda * v).collect();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let tol = 1e-9 * (1.0 + g(&x) + g(&y));
        prop_assert!((g(&x) - g(&neg)).abs() <= tol);
        prop_assert!((g(&scaled) - lambda * g(&x)).abs() <= lambda * tol);
        prop_assert!(g(&sum) <= g(&x) + g(&y) + tol);
    }

    #[test]
    fn support_is_the_gauge_of_the_polar(body in planar_body(), y in point(2)) {
        let polar = body.polar();
        let (s, g) = (body.support(&y), polar.gauge(&y));
        prop_assert!((s - g).abs() <= 1e-9 * (1.0 + s.abs()), "support {s} vs polar gauge {g}");
    }

    #[test]
    fn support_dominates_pairings_with_points_of_the_body(body in planar_body(), x in point(2), y in point(2)) {
        let gx = body.gauge(&x);
        prop_assume!(gx > 1e-6);
        let boundary: Vec<f64> = x.iter().map(|v| v / gx).collect();
        let pairing: f64 = boundary.iter().zip(&y).map(|(a, b)| a * b).sum();
        prop_assert!(pairing <= body.support(&y) + 1e-9 * (1.0 + pairing.abs()));
    }

    #[test]
    fn json_round_trip_preserves_the_gauge(body in planar_body(), x in point(2)) {
        let back = ConvexBody::from_json(&body.to_json()).unwrap();
        prop_assert_eq!(back.gauge(&x).to_bits(), body.gauge(&x).to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mahler_volume_product_is_at_least_the_cube_cross_value(body in planar_body()) {
        let product = body.volume().unwrap() * body.polar().volume().unwrap();
        prop_assert!(product >= 8.0 * (1.0 - 1e-6), "volume product {product}");
        prop_assert!(product <= unit_ball_volume(2).powi(2) * (1.0 + 1e-6), "volume product {product}");
    }

    #[test]
    fn cover_certificates_stay_valid_with_more_centers_or_larger_radius(
        a in 1.2..6.0f64,
        extra in -5.0..5.0f64,
        grow in 1.0..2.0f64,
    ) {
        let (k, t) = (interval(a), interval(1.0));
        let count = a.ceil() as usize;
        let centers: Vec<Vec<f64>> = (0..count).map(|i| vec![-a + a / count as f64 * (2 * i + 1) as f64]).collect();
        let grid = CandidateGrid::with_spacing(&k, &t, 1.0, 1_000).unwrap();
        prop_assert!(certify_cover(&k, &t, &centers, a / count as f64, 0.5, &grid).unwrap());
        let mut more = centers.clone();
        more.push(vec![extra]);
        prop_assert!(certify_cover(&k, &t, &more, a / count as f64, 0.5, &grid).unwrap());
        prop_assert!(certify_cover(&k, &t, &centers, grow * a / count as f64, 0.5, &grid).unwrap());
    }

    #[test]
    fn packings_sandwich_the_certified_cover(a in 1.0..5.0f64, b in 1.0..5.0f64, eps in 0.6..1.5f64) {
        let k = ConvexBody::lp_ball(f64::INFINITY, vec![a, b]).unwrap();
        let t = ConvexBody::cube(2, 1.0).unwrap();
        let effort = Effort::default();
        let cover = cover_bracket(&k, &t, eps, false, &effort).unwrap();
        let grid = grid_candidates(&k, &t, eps / 4.0, &effort).unwrap();
        let wide = max_packing(&k, &t, 2.0 * eps, &grid, effort.exact_cutoff, effort.eta, effort.node_limit);
        let narrow = max_packing(&k, &t, eps, &grid, effort.exact_cutoff, effort.eta, effort.node_limit);
        prop_assert!(wide.len() as u64 <= cover.hi, "P(2e) = {} > N = {}", wide.len(), cover.hi);
        prop_assert!(wide.len() <= narrow.len(), "P(2e) = {} > P(e) = {}", wide.len(), narrow.len());
    }

    #[test]
    fn self_covers_respect_the_volumetric_bound(body in planar_body(), eps in prop::sample::select(vec![0.5, 1.0, 2.0])) {
        let b = cover_bracket(&body, &body, eps, false, &Effort::default()).unwrap();
        prop_assert!(b.hi as f64 <= (1.0 + 2.0 / eps).powi(2), "N(T, {eps}T) <= {}", b.hi);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn brackets_are_sound_and_survive_reverification(k in planar_body(), t in planar_body(), rho in 0.5..2.0f64, restricted: bool) {
        let effort = Effort::default();
        let bracket = cover_bracket(&k, &t, rho, restricted, &effort).unwrap();
        prop_assert!(bracket.lo >= 1 && bracket.lo <= bracket.hi);
        let file = CertificateFile::new(k, t, 0, Claim::CoverBracket { radius_factor: rho, bracket });
        prop_assert_eq!(verify(&file, &effort), Ok(()));
        let (bad, what) = tamper(&file, &mut rand_chacha::ChaCha8Rng::seed_from_u64(rho.to_bits())).unwrap();
        prop_assert!(verify(&bad, &effort).is_err(), "tampering `{}` went unnoticed", what);
    }

    #[test]
    fn covering_is_monotone_in_the_radius(a in 1.5..4.0f64, rho in 0.4..1.0f64) {
        let k = ConvexBody::euclidean_ball(2, a).unwrap();
        let t = ConvexBody::cube(2, 1.0).unwrap();
        let effort = Effort::default();
        let near = cover_bracket(&k, &t, rho, false, &effort).unwrap();
        let far = cover_bracket(&k, &t, 2.0 * rho, false, &effort).unwrap();
        prop_assert!(far.lo <= near.hi);
    }

    #[test]
    fn greedy_separation_certificates_reverify(k in planar_body(), t in planar_body(), seed: u64) {
        let effort = Effort { restarts: 4, ..Effort::default() };
        let cands = separation_candidates(&k, &t, &effort).unwrap();
        let cert = separation_greedy_lower(&k, &t, effort.restarts, &cands, seed).unwrap();
        prop_assert!(!cert.is_empty());
        prop_assert_eq!(verify_separation(&k, &t, &cert, effort.eta), Ok(()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn finite_gamma_is_homogeneous(size in 2usize..9, seed: u64, alpha in 0.01..100.0f64, p in prop::sample::select(vec![0.5, 1.0, 2.0])) {
        let space = FiniteMetricSpace::random_euclidean(size, seed).unwrap();
        for convention in [Convention::Standard, Convention::PaperLiteral] {
            let (base, _) = gamma_exact_finite(&space, p, convention).unwrap();
            let (scaled, _) = gamma_exact_finite(&space.scaled(alpha), p, convention).unwrap();
            prop_assert!((scaled - alpha * base).abs() <= 1e-9 * (1.0 + alpha * base));
        }
    }

    #[test]
    fn sudakov_bounds_finite_gamma_from_below(size in 2usize..11, seed: u64, p in prop::sample::select(vec![1.0, 2.0])) {
        let space = FiniteMetricSpace::random_euclidean(size, seed).unwrap();
        let lower = sudakov_lower(p, &space.entropy_numbers().unwrap()).unwrap();
        let (gamma, sequence) = gamma_exact_finite(&space, p, Convention::Standard).unwrap();
        prop_assert!(lower <= gamma * (1.0 + 1e-9) + 1e-12, "sudakov {lower} > gamma {gamma}");
        prop_assert_eq!(sequence.check_cardinalities(Some(size)), Ok(()));
    }

    #[test]
    fn dudley_sum_bounds_paper_literal_gamma(size in 2usize..11, seed: u64, p in prop::sample::select(vec![1.0, 2.0])) {
        let space = FiniteMetricSpace::random_euclidean(size, seed).unwrap();
        let seq = space.entropy_numbers().unwrap();
        let sum: f64 = seq.rows.iter().filter(|r| r.k >= 1).map(|r| (r.k as f64).powf(1.0 / p - 1.0) * r.bracket.hi).sum();
        let (gamma, _) = gamma_exact_finite(&space, p, Convention::PaperLiteral).unwrap();
        prop_assert!(gamma <= (1.0 + dudley_constant(p).unwrap()) * sum * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn dyadic_steps_hold(p in 0.25..6.0f64, j in 1u32..16) {
        let step = dyadic_step(p, j).unwrap();
        prop_assert!(step.holds, "{step:?}");
    }
}
