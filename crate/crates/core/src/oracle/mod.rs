//! Exact output laws of single repetitions on tiny inputs, target laws, and
//! goodness-of-fit statistics.

pub mod battery;
pub mod enumerate;
pub mod gof;
pub mod report;

use std::collections::BTreeMap;

use crate::exact::Symbolic;
use crate::measure::Measure;

pub use enumerate::{Convention, BRANCH_BUDGET};
pub use gof::{gof_test, total_variation, GofReport};

/// Exact law of one repetition: mass per index plus `Fail` and `Bottom`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ExactDistribution {
    pub index: BTreeMap<u64, Symbolic>,
    pub fail: Symbolic,
    pub bottom: Symbolic,
}

impl ExactDistribution {
    pub fn bottom_only() -> Self {
        Self { index: BTreeMap::new(), fail: Symbolic::zero(), bottom: Symbolic::one() }
    }

    /// Builds a law from index masses; the rest is `Fail`.
    pub fn from_masses(index: BTreeMap<u64, Symbolic>) -> Self {
        let success = index.values().fold(Symbolic::zero(), |a, b| a + b.clone());
        Self { index, fail: Symbolic::one() - success, bottom: Symbolic::zero() }
    }

    pub fn success(&self) -> Symbolic {
        self.index.values().fold(Symbolic::zero(), |a, b| a + b.clone())
    }

    pub fn mass(&self, i: u64) -> Symbolic {
        self.index.get(&i).cloned().unwrap_or_default()
    }

    /// Every mass nonnegative and the total exactly one.
    pub fn is_valid(&self) -> bool {
        let total = self.success() + self.fail.clone() + self.bottom.clone();
        self.index.values().all(Symbolic::is_nonnegative)
            && self.fail.is_nonnegative()
            && self.bottom.is_nonnegative()
            && (total - Symbolic::one()).is_zero()
    }

    /// Conditional law on success equals `weights / sum(weights)`, checked by
    /// cross-multiplication so no division is needed.
    pub fn conditional_matches(&self, target: &Target) -> bool {
        if target.is_zero() {
            return self.index.values().all(Symbolic::is_zero) && !self.bottom.is_zero();
        }
        let success = self.success();
        if success.is_zero() {
            return false;
        }
        let total = target.total();
        let keys: std::collections::BTreeSet<u64> = self.index.keys().chain(target.weights.keys()).copied().collect();
        keys.into_iter().all(|i| (&self.mass(i) * &total - &target.weight(i) * &success).is_zero())
    }

    pub fn to_f64(&self) -> BTreeMap<u64, f64> {
        self.index.iter().map(|(&i, v)| (i, v.to_f64())).collect()
    }

    pub fn conditional_f64(&self) -> BTreeMap<u64, f64> {
        let s = self.success().to_f64();
        self.index.iter().map(|(&i, v)| (i, if s > 0.0 { v.to_f64() / s } else { 0.0 })).collect()
    }
}

/// Unnormalized target weights `G(f_i)`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Target {
    pub weights: BTreeMap<u64, Symbolic>,
}

impl Target {
    pub fn weight(&self, i: u64) -> Symbolic {
        self.weights.get(&i).cloned().unwrap_or_default()
    }

    pub fn total(&self) -> Symbolic {
        self.weights.values().fold(Symbolic::zero(), |a, b| a + b.clone())
    }

    pub fn is_zero(&self) -> bool {
        self.weights.values().all(Symbolic::is_zero)
    }

    /// Normalized law when `F_G` has an exact reciprocal (rational or a single radical).
    pub fn distribution(&self) -> Option<ExactDistribution> {
        if self.is_zero() {
            return Some(ExactDistribution::bottom_only());
        }
        let inv = self.total().recip()?;
        let index = self.weights.iter().filter(|(_, w)| !w.is_zero()).map(|(&i, w)| (i, w * &inv)).collect();
        Some(ExactDistribution { index, fail: Symbolic::zero(), bottom: Symbolic::zero() })
    }

    /// Floating-point probabilities.
    pub fn probabilities(&self) -> BTreeMap<u64, f64> {
        let t = self.total().to_f64();
        self.weights.iter().filter(|(_, w)| !w.is_zero()).map(|(&i, w)| (i, w.to_f64() / t)).collect()
    }
}

/// `G(f_i)` for a frequency vector (`freqs[i-1] = f_i`); `None` when `G` is
/// not symbolically representable at these arguments.
pub fn target_distribution(freqs: &[u64], measure: &Measure) -> Option<Target> {
    let mut weights = BTreeMap::new();
    for (k, &f) in freqs.iter().enumerate() {
        if f > 0 {
            weights.insert(k as u64 + 1, measure.g_symbolic(f)?);
        }
    }
    Some(Target { weights })
}

/// Target with explicitly given weights.
pub fn target_from_weights(weights: impl IntoIterator<Item = (u64, Symbolic)>) -> Target {
    Target { weights: weights.into_iter().filter(|(_, w)| !w.is_zero()).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::interval::ratio;
    use crate::measure::Exponent;

    fn sym(n: i64, d: i64) -> Symbolic {
        Symbolic::rational(ratio(n, d))
    }

    #[test]
    fn squared_target() {
        let t = target_distribution(&[2, 1], &Measure::lp(Exponent::integer(2))).unwrap();
        let d = t.distribution().unwrap();
        assert_eq!(d.mass(1), sym(4, 5));
        assert_eq!(d.mass(2), sym(1, 5));
    }

    #[test]
    fn symmetric_target() {
        for m in [Measure::L1L2, Measure::lp(Exponent::new(1, 2).unwrap()), Measure::fair(ratio64(1)).unwrap()] {
            let t = target_distribution(&[1, 1, 1], &m).unwrap();
            let p = t.probabilities();
            assert!(p.values().all(|&v| (v - 1.0 / 3.0).abs() < 1e-12));
        }
    }

    fn ratio64(v: i64) -> num_rational::Rational64 {
        num_rational::Rational64::from_integer(v)
    }

    #[test]
    fn tukey_target() {
        let t = target_distribution(&[1, 2], &Measure::tukey(ratio64(2)).unwrap()).unwrap();
        let d = t.distribution().unwrap();
        assert_eq!(d.mass(1), sym(37, 101));
        assert_eq!(d.mass(2), sym(64, 101));
    }

    #[test]
    fn zero_vector_is_bottom() {
        let t = target_distribution(&[0, 0], &Measure::lp(Exponent::integer(1))).unwrap();
        assert_eq!(t.distribution().unwrap(), ExactDistribution::bottom_only());
    }

    #[test]
    fn conditional_cross_multiplication() {
        let t = target_from_weights([(1, sym(4, 1)), (2, sym(1, 1))]);
        let law = ExactDistribution::from_masses([(1, sym(4, 9)), (2, sym(1, 9))].into_iter().collect());
        assert!(law.is_valid());
        assert!(law.conditional_matches(&t));
        let bad = ExactDistribution::from_masses([(1, sym(3, 9)), (2, sym(1, 9))].into_iter().collect());
        assert!(!bad.conditional_matches(&t));
    }
}
