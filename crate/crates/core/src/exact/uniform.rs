//! Exact Bernoulli trials and reservoir skip lengths driven by a lazily
//! extended uniform bit stream.
//!
//! A uniform `U` in `[0, 1)` is revealed 64 bits at a time. A trial with
//! success probability `q` returns `U < q`; bits are only drawn until the
//! comparison is decided, so the result has probability exactly `q` whenever
//! the enclosures of `q` are correct.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, RngCore};

use super::interval::{F64Range, Interval};

/// A probability that can be enclosed to any requested precision.
pub trait Probability {
    /// Cheap certified enclosure in double precision.
    fn enclose_f64(&self) -> F64Range;
    /// Enclosure with roughly `bits` fractional bits of accuracy.
    fn enclose(&self, bits: u32) -> Interval;
}

impl Probability for BigRational {
    fn enclose_f64(&self) -> F64Range {
        F64Range::from_rational(self)
    }

    fn enclose(&self, _bits: u32) -> Interval {
        Interval::point(self.clone())
    }
}

const TWO_POW_M64: f64 = 1.0 / 18_446_744_073_709_551_616.0;

/// Returns `true` with probability exactly `p` (clamped to `[0, 1]`).
pub fn bernoulli<R: RngCore + ?Sized, P: Probability + ?Sized>(rng: &mut R, p: &P) -> bool {
    let u = rng.next_u64();
    let f = p.enclose_f64();
    if f.lo.is_finite() && f.hi.is_finite() {
        // (u as f64) is within 2^11 of u; 4096 covers that plus the +1.
        let u_hi = ((u as f64) + 4096.0) * TWO_POW_M64;
        let u_lo = ((u as f64) - 4096.0).max(0.0) * TWO_POW_M64;
        if u_hi <= f.lo {
            return true;
        }
        if u_lo >= f.hi {
            return false;
        }
    }
    refine(rng, BigUint::from(u), p)
}

fn refine<R: RngCore + ?Sized, P: Probability + ?Sized>(rng: &mut R, mut num: BigUint, p: &P) -> bool {
    let mut bits: u32 = 64;
    let mut prec: u32 = 96;
    loop {
        let iv = p.enclose(prec);
        if !iv.hi.is_positive() {
            return false;
        }
        if iv.lo >= BigRational::one() {
            return true;
        }
        let scale = BigInt::one() << bits;
        let lo = BigRational::new(BigInt::from(num.clone()), scale.clone());
        let hi = BigRational::new(BigInt::from(num.clone() + 1u32), scale);
        if hi <= iv.lo {
            return true;
        }
        if lo >= iv.hi {
            return false;
        }
        num = (num << 64u32) | BigUint::from(rng.next_u64());
        bits += 64;
        prec += 64;
    }
}

/// Returns `true` with probability exactly `num / den`.
pub fn bernoulli_ratio<R: Rng + ?Sized>(rng: &mut R, num: u64, den: u64) -> bool {
    assert!(den > 0 && num <= den);
    if num == den {
        return true;
    }
    rng.random_range(0..den) < num
}

/// Exact Bernoulli for a rational probability.
pub fn bernoulli_rational<R: RngCore + ?Sized>(rng: &mut R, q: &BigRational) -> bool {
    if !q.is_positive() {
        return false;
    }
    if q >= &BigRational::one() {
        return true;
    }
    bernoulli(rng, q)
}

/// Time of the next reservoir replacement for a size-one reservoir that has
/// processed `r >= 1` items.
///
/// The replacement at step `s` happens with probability `1/s` independently,
/// so `Pr[T > s] = r / s`. With `U` uniform, `T = ceil(r / U)` has exactly
/// this law; `U` is revealed lazily until the ceiling is determined.
/// Returns `u64::MAX` when the next replacement lies beyond `u64` range.
pub fn next_replacement<R: RngCore + ?Sized>(rng: &mut R, r: u64) -> u64 {
    assert!(r >= 1);
    let u = rng.next_u64();
    if u != 0 && r < (1u64 << 62) {
        // r/U lies in (r 2^64 / (u+1), r 2^64 / u]
        let scaled = (r as u128) << 64;
        let a_floor = scaled / (u as u128 + 1);
        let b_ceil = scaled.div_ceil(u as u128);
        if a_floor + 1 == b_ceil {
            return u64::try_from(b_ceil).unwrap_or(u64::MAX);
        }
    }
    let mut num = BigUint::from(u);
    let mut bits: u32 = 64;
    let r_big = BigUint::from(r);
    loop {
        if !num.is_zero() {
            let scaled = &r_big << bits;
            let a_floor = &scaled / (&num + 1u32);
            let b_ceil = (&scaled + &num - 1u32) / &num;
            if &a_floor + 1u32 == b_ceil {
                return u64::try_from(b_ceil).unwrap_or(u64::MAX);
            }
            if a_floor >= BigUint::from(u64::MAX) {
                return u64::MAX;
            }
        }
        num = (num << 64u32) | BigUint::from(rng.next_u64());
        bits += 64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::interval::ratio;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rational_bernoulli_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = ratio(1, 3);
        let n = 300_000;
        let hits = (0..n).filter(|_| bernoulli_rational(&mut rng, &q)).count();
        let p = hits as f64 / n as f64;
        let sigma = (q_f(&q) * (1.0 - q_f(&q)) / n as f64).sqrt();
        assert!((p - 1.0 / 3.0).abs() < 4.0 * sigma, "{p}");
    }

    fn q_f(q: &BigRational) -> f64 {
        use num_traits::ToPrimitive;
        q.to_f64().unwrap()
    }

    #[test]
    fn degenerate_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert!(bernoulli_rational(&mut rng, &ratio(1, 1)));
            assert!(!bernoulli_rational(&mut rng, &ratio(0, 1)));
        }
    }

    /// A probability whose double-precision enclosure is deliberately useless,
    /// forcing every trial through the exact refinement path.
    struct SlowHalf;
    impl Probability for SlowHalf {
        fn enclose_f64(&self) -> F64Range {
            F64Range { lo: 0.0, hi: 1.0 }
        }
        fn enclose(&self, _bits: u32) -> Interval {
            Interval::point(ratio(1, 2))
        }
    }

    #[test]
    fn refinement_path_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let hits = (0..n).filter(|_| bernoulli(&mut rng, &SlowHalf)).count();
        let sigma = (0.25 / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 4.0 * sigma);
    }

    #[test]
    fn skip_lengths_follow_reservoir_law() {
        // Pr[T > s] = r / s
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = 5u64;
        let n = 200_000;
        let draws: Vec<u64> = (0..n).map(|_| next_replacement(&mut rng, r)).collect();
        assert!(draws.iter().all(|&t| t > r));
        for s in [6u64, 10, 50] {
            let tail = draws.iter().filter(|&&t| t > s).count() as f64 / n as f64;
            let p = r as f64 / s as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((tail - p).abs() < 4.0 * sigma, "s={s}: {tail} vs {p}");
        }
    }

    #[test]
    fn first_replacement_after_one_item_is_at_least_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let twos = (0..n).filter(|_| next_replacement(&mut rng, 1) == 2).count() as f64 / n as f64;
        // Pr[T = 2] = 1 - 1/2
        assert!((twos - 0.5).abs() < 4.0 * (0.25f64 / n as f64).sqrt());
    }
}
