//! Cross-module properties: F_G lower bounds, seeded reproducibility,
//! outcome validity and large-support F0 uniformity.

use std::collections::BTreeMap;

use num_rational::Rational64;
use proptest::prelude::*;

use tps_core::f0::{F0Bank, TukeySampler};
use tps_core::generate::shuffled;
use tps_core::gsampler::{GSampler, GSamplerConfig};
use tps_core::measure::builtin_measures;
use tps_core::oracle::gof_test;
use tps_core::randomorder::RandomOrderSampler;
use tps_core::rng::mix;
use tps_core::sliding::{CheckpointedSampler, Estimator, SwLpSampler};
use tps_core::smallp::SmallPSampler;
use tps_core::{Exponent, Measure, Outcome, SampleResult};

fn measures(tau: Rational64) -> Vec<Measure> {
    let ps = [Exponent::new(1, 2).unwrap(), Exponent::integer(1), Exponent::new(3, 2).unwrap(), Exponent::integer(2)];
    let mut v = builtin_measures(&ps, tau).unwrap();
    v.push(Measure::tukey(tau * 4).unwrap());
    v
}

fn taus() -> impl Strategy<Value = Rational64> {
    (1i64..=12, 1i64..=4).prop_map(|(a, b)| Rational64::new(a, b))
}

fn all_results(coords: &[u64], n: u64, seed: u64) -> Vec<SampleResult> {
    let m = coords.len() as u64;
    let mut out = Vec::new();
    for measure in measures(Rational64::from_integer(1)) {
        if matches!(measure, Measure::Tukey { .. }) {
            let mut t = TukeySampler::new(measure, n, 16, seed).unwrap();
            coords.iter().for_each(|&c| t.update(c));
            out.push(t.draw());
            continue;
        }
        let mut g = GSampler::new(GSamplerConfig::new(measure.clone(), n, m, 0.2, seed).with_repetitions(16)).unwrap();
        coords.iter().for_each(|&c| g.update(c));
        out.push(g.draw());
        if measure.zeta().is_some() {
            let mut s = CheckpointedSampler::with_repetitions(measure, 5, 8, seed).unwrap();
            coords.iter().for_each(|&c| s.update(c));
            out.push(s.draw());
        }
    }
    let mut f0 = F0Bank::new(n, 8, seed).unwrap();
    coords.iter().for_each(|&c| f0.update(c));
    out.push(f0.draw());
    let mut sw = SwLpSampler::with_repetitions(Exponent::integer(2), 5, 8, seed, Estimator::Exact).unwrap();
    coords.iter().for_each(|&c| sw.update(c));
    out.push(sw.draw());
    let mut sp = SmallPSampler::new(Exponent::new(1, 2).unwrap(), 16, 2, seed).unwrap();
    coords.iter().for_each(|&c| sp.update(c));
    out.push(sp.draw());
    // p = 3 needs blocks of at least 3 updates
    for p in [2, 3] {
        if let Ok(mut ro) = RandomOrderSampler::new(p, n, m.max(1), seed) {
            coords.iter().for_each(|&c| ro.update(c));
            out.push(ro.draw());
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fg_lower_bound_never_exceeds_fg(freqs in proptest::collection::vec(0u64..2000, 1..20), tau in taus()) {
        let m: u64 = freqs.iter().sum();
        for measure in measures(tau) {
            let fg: f64 = freqs.iter().map(|&f| measure.g_f64(f)).sum();
            prop_assert!(measure.fg_lower_bound(m) <= fg * (1.0 + 1e-12), "{} on {:?}", measure, freqs);
        }
    }

    #[test]
    fn seeded_runs_are_reproducible(coords in proptest::collection::vec(1u64..6, 0..30), seed in any::<u64>()) {
        prop_assert_eq!(all_results(&coords, 5, seed), all_results(&coords, 5, seed));
    }

    #[test]
    fn outcomes_respect_the_support(coords in proptest::collection::vec(1u64..6, 0..30), seed in any::<u64>()) {
        let mut f = [0u64; 6];
        coords.iter().for_each(|&c| f[c as usize] += 1);
        for r in all_results(&coords, 5, seed) {
            match r.outcome {
                Outcome::Index(i) => prop_assert!((1..=5).contains(&i) && f[i as usize] > 0, "{:?}", r),
                // window samplers see the last 5 updates, never empty when coords is not
                Outcome::Bottom => prop_assert!(coords.is_empty(), "{:?}", r),
                Outcome::Fail => {}
            }
        }
    }
}

#[test]
fn f0_large_support_uniformity() {
    const N: u64 = 10_000;
    const DRAWS: usize = 1_000_000;
    let coords = shuffled(&vec![1u64; N as usize], 91);
    let mut hist = BTreeMap::new();
    let mut drawn = 0;
    let mut batch = 0;
    while drawn < DRAWS {
        let r = 100_000;
        let mut b = F0Bank::new(N, r, mix(92, batch)).unwrap();
        coords.iter().for_each(|&c| b.update(c));
        for u in 0..r {
            if drawn == DRAWS {
                break;
            }
            if let Some(i) = b.draw_unit(u).as_index() {
                *hist.entry(i).or_insert(0u64) += 1;
                drawn += 1;
            }
        }
        batch += 1;
    }
    let target: BTreeMap<u64, f64> = (1..=N).map(|i| (i, 1.0 / N as f64)).collect();
    let r = gof_test(&hist, &target).unwrap();
    assert!(r.pvalue > 0.01, "pvalue {} tv {}", r.pvalue, r.tv);
    assert_eq!(r.off_support, 0);
}
