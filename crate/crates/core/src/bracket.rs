//! Two-sided certified estimates.

use serde::{Deserialize, Serialize};

use crate::linalg::Point;
use crate::nets::CoverCertificate;

/// Evidence backing one side of a [`Bracket`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Closed-form volume ratio.
    Volume,
    /// `N(K, ρT) = 1` exactly when `K ⊆ ρT`; decided from the circumradius.
    Circumradius,
    /// Points pairwise farther apart than `separation` in the gauge of `T`.
    Packing { separation: f64, points: Vec<Point> },
    Cover(CoverCertificate),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket<T> {
    pub lo: T,
    pub hi: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo_witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi_witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl<T: PartialOrd + Copy + std::fmt::Debug> Bracket<T> {
    pub fn new(lo: T, hi: T) -> Self {
        assert!(lo <= hi, "bracket with lo > hi: {lo:?} > {hi:?}");
        Bracket { lo, hi, lo_witness: None, hi_witness: None, flags: Vec::new() }
    }

    pub fn exact(v: T) -> Self {
        Self::new(v, v)
    }

    pub fn contains(&self, v: T) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn intersects(&self, other: &Bracket<T>) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn flag(&mut self, f: impl Into<String>) {
        let f = f.into();
        if !self.flags.contains(&f) {
            self.flags.push(f);
        }
    }

    pub fn is_flagged(&self, f: &str) -> bool {
        self.flags.iter().any(|g| g == f)
    }
}

impl Bracket<u64> {
    pub fn width(&self) -> u64 {
        self.hi - self.lo
    }

    /// Base-2 logarithm of both ends, dropping witnesses.
    pub fn log2(&self) -> Bracket<f64> {
        let mut b = Bracket::new((self.lo as f64).log2(), (self.hi as f64).log2());
        b.flags = self.flags.clone();
        b
    }
}

impl Bracket<f64> {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// `hi / lo`, infinite when `lo` is zero.
    pub fn ratio(&self) -> f64 {
        if self.lo > 0.0 {
            self.hi / self.lo
        } else {
            f64::INFINITY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_queries() {
        let b = Bracket::new(3u64, 5);
        assert!(b.contains(4) && !b.contains(6));
        assert!(b.intersects(&Bracket::new(5, 9)));
        assert!(!b.intersects(&Bracket::new(6, 9)));
        assert_eq!(b.width(), 2);
        let l = Bracket::new(4u64, 8).log2();
        assert_eq!((l.lo, l.hi), (2.0, 3.0));
    }

    #[test]
    #[should_panic]
    fn inverted_bracket_panics() {
        let _ = Bracket::new(2.0, 1.0);
    }
}
