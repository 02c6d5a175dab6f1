//! Chi-square goodness of fit and total variation against a target law.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Result};

/// Smallest expected count a chi-square cell may have after pooling.
pub const MIN_EXPECTED: f64 = 50.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub samples: u64,
    pub statistic: f64,
    pub dof: usize,
    pub pvalue: f64,
    pub tv: f64,
    /// Draws that landed outside the target's support.
    pub off_support: u64,
}

/// `1/2 sum |p_i - q_i|` over the union of supports.
pub fn total_variation(p: &BTreeMap<u64, f64>, q: &BTreeMap<u64, f64>) -> f64 {
    let keys: std::collections::BTreeSet<u64> = p.keys().chain(q.keys()).copied().collect();
    0.5 * keys.iter().map(|k| (p.get(k).unwrap_or(&0.0) - q.get(k).unwrap_or(&0.0)).abs()).sum::<f64>()
}

/// Empirical frequencies of a histogram.
pub fn empirical(hist: &BTreeMap<u64, u64>) -> BTreeMap<u64, f64> {
    let n: u64 = hist.values().sum();
    hist.iter().map(|(&k, &c)| (k, c as f64 / n as f64)).collect()
}

/// Pearson chi-square of `hist` against `target` (probabilities summing to
/// one). Cells are pooled, smallest expected count first, until each
/// reaches [`MIN_EXPECTED`]. Any draw outside the support gives p-value 0.
pub fn gof_test(hist: &BTreeMap<u64, u64>, target: &BTreeMap<u64, f64>) -> Result<GofReport> {
    let n: u64 = hist.values().sum();
    if n == 0 {
        return Err(invalid("empty histogram"));
    }
    let tv = total_variation(&empirical(hist), target);
    let off_support: u64 = hist.iter().filter(|(k, _)| target.get(k).is_none_or(|&p| p <= 0.0)).map(|(_, &c)| c).sum();
    let mut cells: Vec<(f64, f64)> = target
        .iter()
        .filter(|(_, &p)| p > 0.0)
        .map(|(k, &p)| (p * n as f64, *hist.get(k).unwrap_or(&0) as f64))
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (e, o) in cells {
        acc = (acc.0 + e, acc.1 + o);
        if acc.0 >= MIN_EXPECTED {
            pooled.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 > 0.0 {
        match pooled.last_mut() {
            Some(last) => *last = (last.0 + acc.0, last.1 + acc.1),
            None => pooled.push(acc),
        }
    }
    let statistic: f64 = pooled.iter().map(|&(e, o)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len().saturating_sub(1);
    let pvalue = if off_support > 0 {
        0.0
    } else if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).map_err(|e| invalid(e.to_string()))?.sf(statistic)
    };
    Ok(GofReport { samples: n, statistic, dof, pvalue, tv, off_support })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;

    fn target() -> BTreeMap<u64, f64> {
        [(1, 0.5), (2, 0.3), (3, 0.15), (4, 0.05)].into_iter().collect()
    }

    fn draw(t: &BTreeMap<u64, f64>, n: u64, seed: u64) -> BTreeMap<u64, u64> {
        let mut rng = substream(seed, 3);
        let mut h = BTreeMap::new();
        for _ in 0..n {
            let mut u: f64 = rng.random();
            let mut k = *t.keys().last().unwrap();
            for (&i, &p) in t {
                if u < p {
                    k = i;
                    break;
                }
                u -= p;
            }
            *h.entry(k).or_insert(0) += 1;
        }
        h
    }

    #[test]
    fn tv_of_itself_is_zero() {
        assert_eq!(total_variation(&target(), &target()), 0.0);
    }

    #[test]
    fn rejects_empty() {
        assert!(gof_test(&BTreeMap::new(), &target()).is_err());
    }

    #[test]
    fn calibrated_under_the_null() {
        let passes = (0..100).filter(|&s| gof_test(&draw(&target(), 1_000_000, s), &target()).unwrap().pvalue > 0.01).count();
        assert!(passes >= 98, "{passes}");
    }

    #[test]
    fn detects_swapped_probabilities() {
        let mut biased = target();
        biased.insert(2, 0.2);
        biased.insert(3, 0.25);
        let r = gof_test(&draw(&biased, 1_000_000, 7), &target()).unwrap();
        assert!(r.pvalue < 1e-6);
        assert!((r.tv - 0.1).abs() < 0.01);
    }

    #[test]
    fn pools_rare_cells() {
        let t: BTreeMap<u64, f64> = (1..=100).map(|i| (i, 0.01)).collect();
        let r = gof_test(&draw(&t, 1000, 1), &t).unwrap();
        assert_eq!(r.dof, 19);
    }

    #[test]
    fn off_support_draws_fail() {
        let mut h = draw(&target(), 1000, 2);
        h.insert(9, 1);
        assert_eq!(gof_test(&h, &target()).unwrap().pvalue, 0.0);
    }
}
