//! Self-contained certificate files: the body pair, the seed and one claim,
//! re-checkable from scratch by [`verify`].

use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bodies::ConvexBody;
use crate::bracket::{Bracket, Witness};
use crate::covering::circumradius;
use crate::effort::Effort;
use crate::error::{Error, Result};
use crate::linalg::{scale, sub, Point};
use crate::nets::{check_cover, CoverCertificate, CoverMethod};
use crate::separation::{verify_separation, SeparationCertificate};

/// Current file format version.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "claim", rename_all = "snake_case")]
pub enum Claim {
    /// `N(K, ρT) ≤ centers` (or `N′` when restricted).
    Cover { certificate: CoverCertificate },
    /// Points of `K` pairwise farther apart than `separation` in the gauge
    /// of `T`.
    Packing { separation: f64, points: Vec<Point> },
    /// `lo ≤ N(K, ρT) ≤ hi` with both witnesses.
    CoverBracket { radius_factor: f64, bracket: Bracket<u64> },
    /// `M̂(K,T) ≥ points`.
    Separation { certificate: SeparationCertificate },
}

impl Claim {
    pub fn kind(&self) -> &'static str {
        match self {
            Claim::Cover { .. } => "cover",
            Claim::Packing { .. } => "packing",
            Claim::CoverBracket { .. } => "cover_bracket",
            Claim::Separation { .. } => "separation",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateFile {
    pub version: u32,
    #[serde(rename = "K")]
    pub k: ConvexBody,
    #[serde(rename = "T")]
    pub t: ConvexBody,
    pub seed: u64,
    #[serde(flatten)]
    pub claim: Claim,
}

impl CertificateFile {
    pub fn new(k: ConvexBody, t: ConvexBody, seed: u64, claim: Claim) -> Self {
        CertificateFile { version: FORMAT_VERSION, k, t, seed, claim }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json())?)
    }
}

fn check_packing(k: &ConvexBody, t: &ConvexBody, separation: f64, points: &[Point], tol: f64) -> Result<(), String> {
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(format!("separation {separation} is not positive"));
    }
    let n = k.dim();
    for (i, p) in points.iter().enumerate() {
        if p.len() != n || p.iter().any(|x| !x.is_finite()) {
            return Err(format!("packing point {i} is malformed"));
        }
        if k.gauge(p) > 1.0 + tol {
            return Err(format!("packing point {i} lies outside K"));
        }
        for (j, q) in points[..i].iter().enumerate() {
            let d = t.gauge(&sub(p, q));
            if d <= separation {
                return Err(format!("packing points {j} and {i} are only {d} apart (need > {separation})"));
            }
        }
    }
    Ok(())
}

fn check_lower(k: &ConvexBody, t: &ConvexBody, rho: f64, lo: u64, witness: Option<&Witness>, effort: &Effort) -> Result<(), String> {
    if lo <= 1 {
        return Ok(());
    }
    match witness {
        None => Err(format!("lower bound {lo} has no witness")),
        Some(Witness::Circumradius) => {
            let r = circumradius(k, t).map_err(|e| e.to_string())?;
            if lo > 2 || rho * (1.0 + effort.abs_tol) >= r.lo {
                return Err(format!("circumradius witness cannot show N ≥ {lo} at ρ = {rho} (R ≥ {})", r.lo));
            }
            Ok(())
        }
        Some(Witness::Volume) => {
            let (vk, vt) = (k.volume().map_err(|e| e.to_string())?, t.volume().map_err(|e| e.to_string())?);
            let ratio = vk / (vt * rho.powi(k.dim() as i32));
            let bound = (ratio * (1.0 - 1e-9)).ceil();
            if (lo as f64) > bound {
                return Err(format!("volume ratio {ratio} does not give N ≥ {lo}"));
            }
            Ok(())
        }
        Some(Witness::Packing { separation, points }) => {
            if *separation < 2.0 * rho {
                return Err(format!("packing separation {separation} is below 2ρ = {}", 2.0 * rho));
            }
            if (points.len() as u64) < lo {
                return Err(format!("{} packing points cannot show N ≥ {lo}", points.len()));
            }
            check_packing(k, t, *separation, points, effort.abs_tol)
        }
        Some(Witness::Cover(_)) => Err("a cover cannot witness a lower bound".into()),
    }
}

/// Re-checks the claim from scratch; the error names the first refuted
/// fact.
pub fn verify(file: &CertificateFile, effort: &Effort) -> Result<(), String> {
    if file.version != FORMAT_VERSION {
        return Err(format!("unsupported format version {}", file.version));
    }
    let (k, t) = (&file.k, &file.t);
    if k.dim() != t.dim() {
        return Err("K and T have different dimensions".into());
    }
    match &file.claim {
        Claim::Cover { certificate } => check_cover(k, t, certificate, effort),
        Claim::Packing { separation, points } => check_packing(k, t, *separation, points, effort.abs_tol),
        Claim::CoverBracket { radius_factor, bracket } => {
            if bracket.lo > bracket.hi || bracket.lo == 0 {
                return Err(format!("bracket [{}, {}] is not a valid count range", bracket.lo, bracket.hi));
            }
            match &bracket.hi_witness {
                Some(Witness::Cover(c)) => {
                    if c.count() != bracket.hi {
                        return Err(format!("upper bound {} but the cover has {} centers", bracket.hi, c.count()));
                    }
                    if c.radius_factor != *radius_factor {
                        return Err(format!("cover is at ρ = {}, claim is at ρ = {radius_factor}", c.radius_factor));
                    }
                    check_cover(k, t, c, effort)?;
                }
                _ => return Err("upper bound needs a cover witness".into()),
            }
            check_lower(k, t, *radius_factor, bracket.lo, bracket.lo_witness.as_ref(), effort)
        }
        Claim::Separation { certificate } => verify_separation(k, t, certificate, effort.eta),
    }
}

/// Applies one random corruption that provably invalidates the claim and
/// names it. Fails for claims with nothing to corrupt (a single-point
/// separation certificate).
pub fn tamper<R: Rng>(file: &CertificateFile, rng: &mut R) -> Result<(CertificateFile, String)> {
    let mut out = file.clone();
    let n = file.k.dim();
    let far = circumradius(&file.k, &file.t).map_err(|e| Error::Precondition(e.to_string()))?.hi;
    let what = match &mut out.claim {
        Claim::Cover { certificate } => tamper_cover(&file.k, &file.t, certificate, far, rng)?,
        Claim::CoverBracket { radius_factor, bracket } => {
            let options: &[&str] = if bracket.lo >= 2 { &["hi", "lo", "cover"] } else { &["hi", "cover"] };
            match *options.choose(rng).expect("nonempty") {
                "hi" if bracket.hi > bracket.lo => {
                    bracket.hi -= 1;
                    "claimed upper bound lowered below the cover size".to_string()
                }
                "lo" => {
                    bracket.lo = bracket.hi + 1 + rng.random_range(0..3);
                    bracket.hi = bracket.lo;
                    "claimed lower bound raised above the cover size".to_string()
                }
                _ => match &mut bracket.hi_witness {
                    Some(Witness::Cover(c)) => {
                        let what = tamper_cover(&file.k, &file.t, c, far, rng)?;
                        *radius_factor = c.radius_factor;
                        what
                    }
                    _ => return Err(Error::Precondition("bracket has no cover witness".into())),
                },
            }
        }
        Claim::Packing { separation, points } => {
            if points.len() < 2 {
                return Err(Error::Precondition("packing with fewer than two points".into()));
            }
            let i = rng.random_range(1..points.len());
            match rng.random_range(0..3) {
                0 => {
                    points[i] = points[i - 1].clone();
                    format!("packing point {i} duplicated")
                }
                1 => {
                    let mut dir: Point = vec![0.0; n];
                    dir[rng.random_range(0..n)] = 1.0;
                    points[i] = scale(&dir, 2.0 / file.k.gauge(&dir));
                    format!("packing point {i} moved outside K")
                }
                _ => {
                    let min = (0..points.len())
                        .flat_map(|a| (0..a).map(move |b| (a, b)))
                        .map(|(a, b)| file.t.gauge(&sub(&points[a], &points[b])))
                        .fold(f64::INFINITY, f64::min);
                    *separation = min * (1.0 + rng.random_range(0.0..0.5));
                    "claimed separation raised to the closest pair or beyond".to_string()
                }
            }
        }
        Claim::Separation { certificate } => {
            if certificate.points.len() < 2 {
                return Err(Error::Precondition("separation certificate with one point".into()));
            }
            let j = rng.random_range(1..certificate.points.len());
            match rng.random_range(0..3) {
                0 => {
                    certificate.points[j] = certificate.points[j - 1].clone();
                    format!("separation point {j} duplicated")
                }
                1 => {
                    certificate.functionals.remove(j - 1);
                    format!("functional {j} removed")
                }
                _ => {
                    // the negated functional has margin ≤ −1
                    let f = &mut certificate.functionals[j - 1];
                    *f = scale(f, -1.0);
                    format!("functional {j} negated")
                }
            }
        }
    };
    Ok((out, what))
}

fn tamper_cover<R: Rng>(k: &ConvexBody, t: &ConvexBody, c: &mut CoverCertificate, far: f64, rng: &mut R) -> Result<String> {
    let n = k.dim();
    match rng.random_range(0..3) {
        0 => {
            // below the volume threshold no cover with this many centers exists
            let (vk, vt) = (k.volume()?, t.volume()?);
            let threshold = (vk / (vt * c.centers.len() as f64)).powf(1.0 / n as f64);
            c.radius_factor = threshold * rng.random_range(0.3..0.95);
            if let CoverMethod::Grid { spacing } = &mut c.method {
                *spacing *= 0.5f64.powi(rng.random_range(0..3));
            }
            Ok(format!("radius factor shrunk to {} below the volume threshold {threshold}", c.radius_factor))
        }
        1 => {
            // gauge_T(x − far_point) ≥ 2(R + ρ) − R > ρ for every x in K
            let mut dir: Point = vec![0.0; n];
            dir[rng.random_range(0..n)] = 1.0;
            let far_point = scale(&dir, (far + c.radius_factor) * 2.0 / t.gauge(&dir));
            for x in &mut c.centers {
                *x = far_point.clone();
            }
            c.restricted = false;
            Ok("all centers moved to a point far from K".into())
        }
        _ => {
            let i = rng.random_range(0..c.centers.len());
            c.centers[i][rng.random_range(0..n)] = f64::NAN;
            Ok(format!("center {i} corrupted with NaN"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covering::cover_bracket;
    use rand::SeedableRng;

    #[test]
    fn bracket_file_round_trips_and_verifies() {
        let effort = Effort::default();
        let k = ConvexBody::cube(2, 2.0).unwrap();
        let t = ConvexBody::cube(2, 1.0).unwrap();
        let b = cover_bracket(&k, &t, 0.8, false, &effort).unwrap();
        let file = CertificateFile::new(k, t, 0, Claim::CoverBracket { radius_factor: 0.8, bracket: b });
        let back = CertificateFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back.to_json(), file.to_json());
        verify(&back, &effort).unwrap();
    }

    #[test]
    fn tampering_is_refuted() {
        let effort = Effort::default();
        let k = ConvexBody::euclidean_ball(2, 1.5).unwrap();
        let t = ConvexBody::euclidean_ball(2, 1.0).unwrap();
        let b = cover_bracket(&k, &t, 1.0, false, &effort).unwrap();
        let file = CertificateFile::new(k, t, 0, Claim::CoverBracket { radius_factor: 1.0, bracket: b });
        verify(&file, &effort).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let (bad, what) = tamper(&file, &mut rng).unwrap();
            assert!(verify(&bad, &effort).is_err(), "{what} was not refuted");
        }
    }

    #[test]
    fn wrong_version_and_dimension() {
        let effort = Effort::default();
        let k = ConvexBody::cube(1, 1.0).unwrap();
        let cert = CoverCertificate {
            centers: vec![vec![0.0]],
            radius_factor: 1.0,
            net_resolution: 0.0,
            method: CoverMethod::Circumradius,
            restricted: false,
        };
        let mut file = CertificateFile::new(k.clone(), k, 0, Claim::Cover { certificate: cert });
        verify(&file, &effort).unwrap();
        file.version = 9;
        assert!(verify(&file, &effort).is_err());
        file.version = FORMAT_VERSION;
        file.t = ConvexBody::cube(2, 1.0).unwrap();
        assert!(verify(&file, &effort).is_err());
    }
}
