//! Certified enclosures of real numbers.
//!
//! Two tiers: [`F64Range`] is a cheap enclosure in double precision that is
//! widened after every operation, and [`Interval`] is an arbitrary-precision
//! enclosure with dyadic rational endpoints. Comparisons against a uniform
//! draw try the cheap tier first and refine with the exact tier only when the
//! draw lands inside the double-precision uncertainty.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Relative slack applied to libm results (`powf`, `ln`, `sqrt`).
const LIBM_SLACK: f64 = 1e-13;

/// Enclosure `[lo, hi]` of a real value in double precision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct F64Range {
    pub lo: f64,
    pub hi: f64,
}

fn down(x: f64) -> f64 {
    if x == 0.0 {
        -f64::MIN_POSITIVE
    } else {
        x - x.abs() * 4.0 * f64::EPSILON - f64::MIN_POSITIVE
    }
}

fn up(x: f64) -> f64 {
    if x == 0.0 {
        f64::MIN_POSITIVE
    } else {
        x + x.abs() * 4.0 * f64::EPSILON + f64::MIN_POSITIVE
    }
}

impl F64Range {
    pub fn point(x: f64) -> Self {
        Self { lo: down(x), hi: up(x) }
    }

    /// Enclosure of an exactly representable value.
    pub fn exact(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn from_rational(q: &BigRational) -> Self {
        let x = q.to_f64().unwrap_or(f64::NAN);
        Self::point(x)
    }

    pub fn add(self, o: Self) -> Self {
        Self { lo: down(self.lo + o.lo), hi: up(self.hi + o.hi) }
    }

    pub fn sub(self, o: Self) -> Self {
        Self { lo: down(self.lo - o.hi), hi: up(self.hi - o.lo) }
    }

    /// Product of two nonnegative enclosures.
    pub fn mul_nonneg(self, o: Self) -> Self {
        Self { lo: down(self.lo.max(0.0) * o.lo.max(0.0)).max(0.0), hi: up(self.hi * o.hi) }
    }

    /// Quotient by a strictly positive enclosure.
    pub fn div_pos(self, o: Self) -> Self {
        debug_assert!(o.lo > 0.0);
        let cands = [self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi];
        let lo = cands.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = cands.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Self { lo: down(lo), hi: up(hi) }
    }

    /// `x^e` for a nonnegative enclosure and `e > 0`.
    pub fn powf(self, e: f64) -> Self {
        let lo = self.lo.max(0.0).powf(e);
        let hi = self.hi.max(0.0).powf(e);
        Self { lo: (lo * (1.0 - LIBM_SLACK)).max(0.0), hi: hi * (1.0 + LIBM_SLACK) + f64::MIN_POSITIVE }
    }

    /// Natural log of an enclosure with `lo > 0`.
    pub fn ln(self) -> Self {
        let lo = self.lo.ln();
        let hi = self.hi.ln();
        let slack = |v: f64| v.abs() * LIBM_SLACK + 4.0 * f64::EPSILON;
        Self { lo: lo - slack(lo), hi: hi + slack(hi) }
    }

    /// `ln(1 + x)` for a nonnegative enclosure, accurate for small `x`.
    pub fn ln_1p(self) -> Self {
        let lo = self.lo.max(0.0).ln_1p();
        let hi = self.hi.ln_1p();
        Self { lo: (lo * (1.0 - LIBM_SLACK) - f64::MIN_POSITIVE).max(0.0), hi: hi * (1.0 + LIBM_SLACK) + f64::MIN_POSITIVE }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Enclosure `[lo, hi]` with rational endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub lo: BigRational,
    pub hi: BigRational,
}

fn pow2(bits: u32) -> BigInt {
    BigInt::one() << bits
}

/// Largest dyadic `k / 2^bits` not above `q`.
pub fn floor_dyadic(q: &BigRational, bits: u32) -> BigRational {
    let scaled = q * BigRational::from_integer(pow2(bits));
    BigRational::new(scaled.floor().to_integer(), pow2(bits))
}

/// Smallest dyadic `k / 2^bits` not below `q`.
pub fn ceil_dyadic(q: &BigRational, bits: u32) -> BigRational {
    let scaled = q * BigRational::from_integer(pow2(bits));
    BigRational::new(scaled.ceil().to_integer(), pow2(bits))
}

impl Interval {
    pub fn point(q: BigRational) -> Self {
        Self { lo: q.clone(), hi: q }
    }

    pub fn from_int(v: i64) -> Self {
        Self::point(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn contains(&self, q: &BigRational) -> bool {
        &self.lo <= q && q <= &self.hi
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    /// Rounds endpoints outward to `bits` fractional bits so sizes stay bounded.
    pub fn round_out(self, bits: u32) -> Self {
        Self { lo: floor_dyadic(&self.lo, bits), hi: ceil_dyadic(&self.hi, bits) }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { lo: &self.lo + &o.lo, hi: &self.hi + &o.hi }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { lo: &self.lo - &o.hi, hi: &self.hi - &o.lo }
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        if q.is_negative() {
            Self { lo: &self.hi * q, hi: &self.lo * q }
        } else {
            Self { lo: &self.lo * q, hi: &self.hi * q }
        }
    }

    pub fn mul_nonneg(&self, o: &Self) -> Self {
        let zero = BigRational::zero();
        let lo = if self.lo.is_negative() || o.lo.is_negative() { zero } else { &self.lo * &o.lo };
        Self { lo, hi: &self.hi * &o.hi }
    }

    /// Quotient by an interval whose lower endpoint is strictly positive.
    pub fn div_pos(&self, o: &Self) -> Self {
        assert!(o.lo.is_positive(), "divisor enclosure must be positive");
        let c = [&self.lo / &o.lo, &self.lo / &o.hi, &self.hi / &o.lo, &self.hi / &o.hi];
        let lo = c.iter().min().cloned().unwrap();
        let hi = c.iter().max().cloned().unwrap();
        Self { lo, hi }
    }

    /// `x^(num/den)` for a nonnegative enclosure, refined to `bits` fractional bits.
    pub fn pow_ratio(&self, num: u32, den: u32, bits: u32) -> Self {
        assert!(den > 0);
        let lo = if self.lo.is_positive() { rational_root(&self.lo.pow(num as i32), den, bits).lo } else { BigRational::zero() };
        let hi = rational_root(&self.hi.pow(num as i32), den, bits).hi;
        Self { lo, hi }
    }

    /// Natural logarithm of an enclosure with strictly positive lower endpoint.
    pub fn ln(&self, bits: u32) -> Self {
        Self { lo: ln_rational(&self.lo, bits).lo, hi: ln_rational(&self.hi, bits).hi }
    }
}

/// Enclosure of `q^(1/den)` for `q >= 0`, width at most `2^-bits`.
pub fn rational_root(q: &BigRational, den: u32, bits: u32) -> Interval {
    assert!(!q.is_negative());
    if den == 1 {
        return Interval::point(q.clone());
    }
    // floor(q * 2^(bits*den)) then an integer den-th root.
    let scaled = q * BigRational::from_integer(pow2(bits * den));
    let floor = scaled.floor().to_integer();
    let floor_u = floor.to_biguint().unwrap_or_default();
    let root = floor_u.nth_root(den);
    let scale = pow2(bits);
    let lo = BigRational::new(BigInt::from_biguint(Sign::Plus, root.clone()), scale.clone());
    let exact = root.pow(den) == floor_u && BigRational::from_integer(floor) == scaled;
    let hi = if exact { lo.clone() } else { BigRational::new(BigInt::from_biguint(Sign::Plus, root + BigUint::one()), scale) };
    Interval { lo, hi }
}

/// Enclosure of `ln(2)` with at least `bits` fractional bits.
fn ln2(bits: u32) -> Interval {
    atanh_series(&BigRational::new(BigInt::one(), BigInt::from(3)), bits).scale(&BigRational::from_integer(BigInt::from(2)))
}

/// Enclosure of `atanh(z) = sum z^(2k+1)/(2k+1)` for `0 <= z <= 1/3`.
fn atanh_series(z: &BigRational, bits: u32) -> Interval {
    let g = bits + 16;
    let zz = z * z;
    let (z2_lo, z2_hi) = (floor_dyadic(&zz, g), ceil_dyadic(&zz, g));
    let (mut t_lo, mut t_hi) = (floor_dyadic(z, g), ceil_dyadic(z, g));
    let (mut s_lo, mut s_hi) = (BigRational::zero(), BigRational::zero());
    // rounded terms bottom out at 2^-g, so stop well above that
    let tol = BigRational::new(BigInt::one(), pow2(bits + 2));
    // 1 / (1 - z^2) <= 9/8 for z <= 1/3; 5/4 leaves room for rounding
    let tail_factor = BigRational::new(BigInt::from(5), BigInt::from(4));
    let mut k: u64 = 0;
    loop {
        let d = BigRational::from_integer(BigInt::from(2 * k + 1));
        s_lo += floor_dyadic(&(&t_lo / &d), g);
        s_hi += ceil_dyadic(&(&t_hi / &d), g);
        t_lo = floor_dyadic(&(&t_lo * &z2_lo), g);
        t_hi = ceil_dyadic(&(&t_hi * &z2_hi), g);
        let tail = &t_hi * &tail_factor;
        if tail < tol {
            return Interval { lo: s_lo, hi: s_hi + tail };
        }
        k += 1;
    }
}

/// Enclosure of `ln(q)` for rational `q > 0`.
pub fn ln_rational(q: &BigRational, bits: u32) -> Interval {
    assert!(q.is_positive(), "logarithm of a non-positive value");
    if q.is_one() {
        return Interval::point(BigRational::zero());
    }
    if q < &BigRational::one() {
        let inv = ln_rational(&q.recip(), bits);
        return Interval { lo: -inv.hi, hi: -inv.lo };
    }
    // q = 2^e * r, r in [1, 2)
    let numer_bits = q.numer().bits() as i64;
    let denom_bits = q.denom().bits() as i64;
    let mut e = numer_bits - denom_bits;
    let two = BigRational::from_integer(BigInt::from(2));
    let mut r = q / two.pow(e as i32);
    while r >= two {
        r /= &two;
        e += 1;
    }
    while r < BigRational::one() {
        r *= &two;
        e -= 1;
    }
    // ln r = 2 atanh((r-1)/(r+1)); (r-1)/(r+1) <= 1/3
    let z = (&r - BigRational::one()) / (&r + BigRational::one());
    let lr = atanh_series(&z, bits + 2).scale(&two);
    let extra = 64 - (e.unsigned_abs().max(1)).leading_zeros();
    let l2 = ln2(bits + extra + 2).scale(&BigRational::from_integer(BigInt::from(e)));
    lr.add(&l2).round_out(bits + 4)
}

/// Converts a finite `f64` into the exact rational it represents.
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// `true` if `a` and `b` agree to within `tol` in absolute value (test helper).
pub fn approx_eq(a: &BigRational, b: f64, tol: f64) -> bool {
    (a.to_f64().unwrap() - b).abs() <= tol
}

/// Integer power helper used by measures.
pub fn big(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Reduces a ratio of machine integers into a `BigRational`.
pub fn ratio(n: i64, d: i64) -> BigRational {
    let g = n.gcd(&d);
    BigRational::new(BigInt::from(n / g), BigInt::from(d / g))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_two_enclosure_is_tight() {
        let iv = rational_root(&big(2), 2, 60);
        assert!(iv.lo < iv.hi);
        assert!(&iv.lo * &iv.lo <= big(2));
        assert!(&iv.hi * &iv.hi >= big(2));
        assert!(iv.width() <= BigRational::new(BigInt::one(), pow2(59)));
    }

    #[test]
    fn perfect_powers_are_exact() {
        let iv = rational_root(&ratio(9, 4), 2, 40);
        assert_eq!(iv.lo, ratio(3, 2));
        assert_eq!(iv.hi, ratio(3, 2));
    }

    #[test]
    fn ln_matches_libm() {
        for &(n, d) in &[(2i64, 1i64), (3, 1), (1, 3), (10, 7), (1000, 1), (7, 1024)] {
            let iv = ln_rational(&ratio(n, d), 80);
            let truth = (n as f64 / d as f64).ln();
            assert!(iv.lo.to_f64().unwrap() <= truth + 1e-15, "{n}/{d}");
            assert!(iv.hi.to_f64().unwrap() >= truth - 1e-15, "{n}/{d}");
            assert!(iv.width() < BigRational::new(BigInt::one(), pow2(70)));
        }
    }

    #[test]
    fn f64_range_tracks_cancellation() {
        let a = F64Range::point(1e10 + 1.0);
        let b = F64Range::point(1e10);
        let d = a.sub(b);
        assert!(d.lo <= 1.0 && d.hi >= 1.0);
    }
}
