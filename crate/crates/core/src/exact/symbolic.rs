//! Exact symbolic reals for the verification oracle.
//!
//! A [`Symbolic`] is a finite sum of monomials `c * sqrt(t) * ln(p1) * ... * ln(pk)`
//! with rational `c`, squarefree `t`, and primes `p_i`. Square roots of
//! distinct squarefree integers are linearly independent over the rationals,
//! so sums of radicals have a canonical form. Logarithms are kept as formal
//! products over primes: two values with equal canonical forms are equal, and
//! values with different forms are additionally compared numerically by
//! [`Symbolic::to_f64`].

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Monomial {
    radicand: u64,
    logs: Vec<u64>,
}

impl Monomial {
    fn unit() -> Self {
        Self { radicand: 1, logs: Vec::new() }
    }
}

/// Exact value in the span of radicals and formal log-products.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Symbolic {
    terms: BTreeMap<Monomial, BigRational>,
}

/// Factors `n` into `(prime, exponent)` pairs by trial division.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Splits `n = s^2 * t` with `t` squarefree.
fn square_split(n: u64) -> (u64, u64) {
    let mut s = 1u64;
    let mut t = 1u64;
    for (p, e) in factorize(n) {
        s *= p.pow(e / 2);
        if e % 2 == 1 {
            t *= p;
        }
    }
    (s, t)
}

fn to_u64(x: &BigInt) -> u64 {
    x.to_u64().expect("oracle values must fit in 64-bit integers")
}

impl Symbolic {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::rational(BigRational::one())
    }

    pub fn rational(q: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !q.is_zero() {
            terms.insert(Monomial::unit(), q);
        }
        Self { terms }
    }

    pub fn int(v: i64) -> Self {
        Self::rational(BigRational::from_integer(BigInt::from(v)))
    }

    /// `sqrt(q)` for a nonnegative rational.
    pub fn sqrt(q: &BigRational) -> Self {
        assert!(!q.is_negative(), "square root of a negative value");
        if q.is_zero() {
            return Self::zero();
        }
        // sqrt(a/b) = sqrt(a b) / b
        let a = to_u64(q.numer());
        let b = to_u64(q.denom());
        let prod = a.checked_mul(b).expect("radicand overflow");
        let (s, t) = square_split(prod);
        let coeff = BigRational::new(BigInt::from(s), BigInt::from(b));
        let mut terms = BTreeMap::new();
        terms.insert(Monomial { radicand: t, logs: Vec::new() }, coeff);
        Self { terms }
    }

    /// `ln(q)` for a positive rational, as a formal sum over prime logs.
    pub fn ln(q: &BigRational) -> Self {
        assert!(q.is_positive(), "logarithm of a non-positive value");
        let mut acc = Self::zero();
        for (p, e) in factorize(to_u64(q.numer())) {
            acc = acc + Self::ln_prime(p).scale(&BigRational::from_integer(BigInt::from(e)));
        }
        for (p, e) in factorize(to_u64(q.denom())) {
            acc = acc - Self::ln_prime(p).scale(&BigRational::from_integer(BigInt::from(e)));
        }
        acc
    }

    fn ln_prime(p: u64) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Monomial { radicand: 1, logs: vec![p] }, BigRational::one());
        Self { terms }
    }

    /// `x^(num/den)` for integer `x >= 0`; only `den` in `{1, 2}` is representable.
    pub fn pow_ratio(x: u64, num: u32, den: u32) -> Option<Self> {
        let base = BigRational::from_integer(BigInt::from(x)).pow(num as i32);
        match den {
            1 => Some(Self::rational(base)),
            2 => Some(Self::sqrt(&base)),
            _ => None,
        }
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        if q.is_zero() {
            return Self::zero();
        }
        Self { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * q)).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value as a rational, when it has no radical or log part.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                (*m == Monomial::unit()).then(|| c.clone())
            }
            _ => None,
        }
    }

    /// Reciprocal of a single radical monomial `c sqrt(t)`.
    pub fn recip(&self) -> Option<Self> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next().unwrap();
        if !m.logs.is_empty() {
            return None;
        }
        // 1 / (c sqrt t) = sqrt t / (c t)
        let t = BigRational::from_integer(BigInt::from(m.radicand));
        let coeff = (c * &t).recip();
        let mut terms = BTreeMap::new();
        terms.insert(m.clone(), coeff);
        Some(Self { terms })
    }

    pub fn to_f64(&self) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let logs: f64 = m.logs.iter().map(|&p| (p as f64).ln()).product();
                c.to_f64().unwrap() * (m.radicand as f64).sqrt() * logs
            })
            .sum()
    }

    /// Sign check: exact for rationals, numeric with a guard band otherwise.
    pub fn is_nonnegative(&self) -> bool {
        match self.as_rational() {
            Some(q) => !q.is_negative(),
            None => self.to_f64() >= -1e-12,
        }
    }

    fn insert(terms: &mut BTreeMap<Monomial, BigRational>, m: Monomial, c: BigRational) {
        let entry = terms.entry(m).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            terms.retain(|_, v| !v.is_zero());
        }
    }
}

impl Add for Symbolic {
    type Output = Symbolic;
    fn add(mut self, rhs: Symbolic) -> Symbolic {
        for (m, c) in rhs.terms {
            Self::insert(&mut self.terms, m, c);
        }
        self
    }
}

impl Sub for Symbolic {
    type Output = Symbolic;
    fn sub(self, rhs: Symbolic) -> Symbolic {
        self + (-rhs)
    }
}

impl Neg for Symbolic {
    type Output = Symbolic;
    fn neg(self) -> Symbolic {
        Self { terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect() }
    }
}

impl Mul for &Symbolic {
    type Output = Symbolic;
    fn mul(self, rhs: &Symbolic) -> Symbolic {
        let mut terms = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                let prod = m1.radicand.checked_mul(m2.radicand).expect("radicand overflow");
                let (s, t) = square_split(prod);
                let mut logs = m1.logs.clone();
                logs.extend_from_slice(&m2.logs);
                logs.sort_unstable();
                let c = c1 * c2 * BigRational::from_integer(BigInt::from(s));
                Symbolic::insert(&mut terms, Monomial { radicand: t, logs }, c);
            }
        }
        Symbolic { terms }
    }
}

impl fmt::Debug for Symbolic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Symbolic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            if m.radicand != 1 {
                write!(f, "*sqrt({})", m.radicand)?;
            }
            for p in &m.logs {
                write!(f, "*ln({p})")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::interval::ratio;

    #[test]
    fn radicals_canonicalize() {
        // sqrt(8) = 2 sqrt(2); sqrt(2) * sqrt(6) = 2 sqrt(3)
        assert_eq!(Symbolic::sqrt(&ratio(8, 1)), Symbolic::sqrt(&ratio(2, 1)).scale(&ratio(2, 1)));
        let prod = &Symbolic::sqrt(&ratio(2, 1)) * &Symbolic::sqrt(&ratio(6, 1));
        assert_eq!(prod, Symbolic::sqrt(&ratio(3, 1)).scale(&ratio(2, 1)));
        assert_eq!(Symbolic::sqrt(&ratio(9, 4)).as_rational(), Some(ratio(3, 2)));
    }

    #[test]
    fn logs_telescope() {
        // ln(3/2) + ln(4/3) = ln 2; ln 12 - ln 3 = 2 ln 2
        let s = Symbolic::ln(&ratio(3, 2)) + Symbolic::ln(&ratio(4, 3));
        assert_eq!(s, Symbolic::ln(&ratio(2, 1)));
        let t = Symbolic::ln(&ratio(12, 1)) - Symbolic::ln(&ratio(3, 1));
        assert_eq!(t, Symbolic::ln(&ratio(2, 1)).scale(&ratio(2, 1)));
        assert!((t.to_f64() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn reciprocal_of_radical() {
        let x = Symbolic::sqrt(&ratio(3, 2)).scale(&ratio(2, 1));
        let one = &x * &x.recip().unwrap();
        assert_eq!(one, Symbolic::one());
    }

    #[test]
    fn cancellation_removes_terms() {
        let a = Symbolic::sqrt(&ratio(5, 1));
        assert!((a.clone() - a).is_zero());
    }
}
