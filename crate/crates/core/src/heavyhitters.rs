//! Misra-Gries frequent-items summary.

use std::collections::{BTreeSet, HashMap};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, PrimInt, ToPrimitive, Unsigned};

use crate::measure::Exponent;

/// Deterministic summary with at most `k` counters and one-sided error:
/// `f_i - m/k <= estimate(i) <= f_i` for every coordinate.
///
/// Counters are stored shifted by a global `base`, so a decrement-all step
/// is a single addition followed by evicting the entries that reached zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MGSummary<C = u64> {
    k: usize,
    base: C,
    total: C,
    stored: HashMap<u64, C>,
    order: BTreeSet<(C, u64)>,
}

impl MGSummary {
    pub fn new(k: usize) -> Self {
        Self::with_budget(k)
    }

    /// Summary sized for the `L_p` normalizer: `k = ceil(n^(1 - 1/p))`.
    pub fn for_lp(n: u64, p: Exponent) -> Self {
        Self::new(lp_budget(n, p) as usize)
    }

    /// `Z = max estimate + m/k`, which satisfies `max_i f_i <= Z <= max_i f_i + m/k`.
    pub fn z_bound(&self) -> BigRational {
        BigRational::from_integer(BigInt::from(self.max_estimate()))
            + BigRational::new(BigInt::from(self.total), BigInt::from(self.k as u64))
    }
}

impl<C: PrimInt + Unsigned> MGSummary<C> {
    pub fn with_budget(k: usize) -> Self {
        assert!(k >= 1, "counter budget must be positive");
        Self { k, base: C::zero(), total: C::zero(), stored: HashMap::new(), order: BTreeSet::new() }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Total weight processed.
    pub fn total(&self) -> C {
        self.total
    }

    pub fn len(&self) -> usize {
        self.stored.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stored.is_empty()
    }

    pub fn update(&mut self, coord: u64) {
        self.update_weighted(coord, C::one());
    }

    /// Adds `w` occurrences of `coord` at once.
    pub fn update_weighted(&mut self, coord: u64, w: C) {
        if w.is_zero() {
            return;
        }
        self.total = self.total + w;
        if let Some(s) = self.stored.get_mut(&coord) {
            self.order.remove(&(*s, coord));
            *s = *s + w;
            self.order.insert((*s, coord));
            return;
        }
        if self.stored.len() < self.k {
            self.insert(coord, self.base + w);
            return;
        }
        // k+1 candidates: subtract the smallest count from all of them
        let min_existing = self.order.first().map(|&(s, _)| s - self.base).unwrap();
        let d = min_existing.min(w);
        let new_stored = self.base + w;
        self.base = self.base + d;
        while let Some(&(s, c)) = self.order.first() {
            if s > self.base {
                break;
            }
            self.order.pop_first();
            self.stored.remove(&c);
        }
        if new_stored > self.base {
            self.insert(coord, new_stored);
        }
    }

    fn insert(&mut self, coord: u64, s: C) {
        self.stored.insert(coord, s);
        self.order.insert((s, coord));
    }

    pub fn estimate(&self, coord: u64) -> C {
        self.stored.get(&coord).map_or(C::zero(), |&s| s - self.base)
    }

    pub fn max_estimate(&self) -> C {
        self.order.last().map_or(C::zero(), |&(s, _)| s - self.base)
    }

    /// Entries with a positive estimate, largest first.
    pub fn entries(&self) -> Vec<(u64, C)> {
        self.order.iter().rev().map(|&(s, c)| (c, s - self.base)).collect()
    }
}

/// Smallest integer `k` with `k >= n^(1 - 1/p)`; 1 when `p <= 1`.
pub fn lp_budget(n: u64, p: Exponent) -> u64 {
    if p.at_most_one() {
        return 1;
    }
    // k^num >= n^(num - den)
    let target: BigUint = Pow::pow(BigUint::from(n), p.num() - p.den());
    let r = target.nth_root(p.num());
    let k = if Pow::pow(r.clone(), p.num()) == target { r } else { r + BigUint::one() };
    k.to_u64().unwrap().max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::interval::ratio;
    use proptest::prelude::*;

    #[test]
    fn two_counters() {
        let mut s = MGSummary::new(2);
        for c in [1, 1, 2, 3] {
            s.update(c);
        }
        assert_eq!(s.estimate(1), 1);
        assert!(2 - 4 / 2 <= s.estimate(1) as i64 && s.estimate(1) <= 2);
        // n = 4, p = 2 gives k = 2
        assert_eq!(lp_budget(4, Exponent::integer(2)), 2);
        assert_eq!(s.z_bound(), ratio(3, 1));
    }

    #[test]
    fn single_item_is_exact() {
        let mut s = MGSummary::new(1);
        for _ in 0..3 {
            s.update(1);
        }
        assert_eq!(s.estimate(1), 3);
        assert!(s.z_bound() >= ratio(3, 1));
    }

    #[test]
    fn budgets() {
        assert_eq!(lp_budget(100, Exponent::integer(2)), 10);
        assert_eq!(lp_budget(101, Exponent::integer(2)), 11);
        assert_eq!(lp_budget(100, Exponent::new(3, 2).unwrap()), 5);
        assert_eq!(lp_budget(100, Exponent::integer(1)), 1);
        assert_eq!(lp_budget(100, Exponent::new(1, 2).unwrap()), 1);
    }

    fn check(stream: &[(u64, u64)], k: usize) -> Result<(), TestCaseError> {
        let mut s = MGSummary::new(k);
        let mut f: HashMap<u64, u64> = HashMap::new();
        for &(c, w) in stream {
            s.update_weighted(c, w);
            *f.entry(c).or_default() += w;
            prop_assert!(s.len() <= k);
        }
        let m = s.total();
        for (&c, &fc) in &f {
            let e = s.estimate(c);
            prop_assert!(e <= fc);
            prop_assert!((e as f64) >= fc as f64 - m as f64 / k as f64);
        }
        let fmax = f.values().copied().max().unwrap_or(0);
        let z = s.z_bound();
        prop_assert!(z >= ratio(fmax as i64, 1));
        prop_assert!(z <= ratio(fmax as i64, 1) + BigRational::new(BigInt::from(m), BigInt::from(k as u64)));
        Ok(())
    }

    proptest! {
        #[test]
        fn unit_bounds(stream in proptest::collection::vec(1u64..20, 0..300), k in 1usize..8) {
            let s: Vec<(u64, u64)> = stream.into_iter().map(|c| (c, 1)).collect();
            check(&s, k)?;
        }

        #[test]
        fn weighted_bounds(stream in proptest::collection::vec((1u64..12, 1u64..50), 0..200), k in 1usize..6) {
            check(&stream, k)?;
        }

        #[test]
        fn deterministic(stream in proptest::collection::vec(1u64..20, 0..100)) {
            let run = || {
                let mut s = MGSummary::new(3);
                for &c in &stream {
                    s.update(c);
                }
                s
            };
            prop_assert_eq!(run(), run());
        }
    }
}
