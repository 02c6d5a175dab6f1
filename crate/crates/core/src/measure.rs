//! Measure functions `G` with their increment bounds and `F_G` lower bounds.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Rational64};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exact::interval::{big, ln_rational, rational_root};
use crate::exact::{F64Range, Interval, Symbolic};

const MAX_DENOMINATOR: i64 = 1000;

/// A positive rational exponent `num/den` in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Exponent {
    num: u32,
    den: u32,
}

impl Exponent {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(invalid("exponent must be positive"));
        }
        let g = num.gcd(&den);
        Ok(Self { num: num / g, den: den / g })
    }

    pub fn integer(k: u32) -> Self {
        Self::new(k, 1).expect("positive integer exponent")
    }

    /// Nearest rational with denominator at most 1000, if within 1e-9 of `x`.
    pub fn from_f64(x: f64) -> Result<Self> {
        let q = rational_approx(x)?;
        Self::new(q.numer().to_u32().unwrap(), q.denom().to_u32().unwrap())
    }

    pub fn num(self) -> u32 {
        self.num
    }

    pub fn den(self) -> u32 {
        self.den
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn as_rational(self) -> BigRational {
        BigRational::new(BigInt::from(self.num), BigInt::from(self.den))
    }

    pub fn is_integer(self) -> bool {
        self.den == 1
    }

    /// `p <= 1`
    pub fn at_most_one(self) -> bool {
        self.num <= self.den
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let q = parse_rational(s)?;
        if q <= Rational64::zero() {
            return Err(invalid("exponent must be positive"));
        }
        Self::new(*q.numer() as u32, *q.denom() as u32)
    }
}

/// Parses `a/b`, an integer, or a decimal into a small-denominator rational.
pub fn parse_rational(s: &str) -> Result<Rational64> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: i64 = a.trim().parse().map_err(|_| invalid(format!("bad rational `{s}`")))?;
        let b: i64 = b.trim().parse().map_err(|_| invalid(format!("bad rational `{s}`")))?;
        if b == 0 {
            return Err(invalid(format!("zero denominator in `{s}`")));
        }
        return Ok(Rational64::new(a, b));
    }
    let x: f64 = s.parse().map_err(|_| invalid(format!("bad number `{s}`")))?;
    let q = rational_approx(x)?;
    Ok(Rational64::new(q.numer().to_i64().unwrap(), q.denom().to_i64().unwrap()))
}

fn rational_approx(x: f64) -> Result<BigRational> {
    if !x.is_finite() || x.abs() > 1e6 {
        return Err(invalid(format!("{x} is not a usable parameter")));
    }
    // continued-fraction convergents
    let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
    let mut r = x;
    for _ in 0..40 {
        let a = r.floor();
        let (h2, k2) = (a as i64 * h1 + h0, a as i64 * k1 + k0);
        if k2 > MAX_DENOMINATOR {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (h1 as f64 / k1 as f64 - x).abs() <= 1e-9 {
            return Ok(BigRational::new(BigInt::from(h1), BigInt::from(k1)));
        }
        let frac = r - a;
        if frac == 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    Err(invalid(format!("{x} is not a rational with denominator at most {MAX_DENOMINATOR}")))
}

fn to_big(q: Rational64) -> BigRational {
    BigRational::new(BigInt::from(*q.numer()), BigInt::from(*q.denom()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Measure {
    /// `G(x) = x^p`
    Lp { p: Exponent },
    /// `G(x) = 2 (sqrt(1 + x^2/2) - 1)`
    L1L2,
    /// `G(x) = tau x - tau^2 ln(1 + x/tau)`
    Fair { tau: Rational64 },
    /// `G(x) = x^2/(2 tau)` up to `tau`, then `x - tau/2`
    Huber { tau: Rational64 },
    /// `G(x) = tau^2/6 (1 - (1 - x^2/tau^2)^3)` up to `tau`, then `tau^2/6`
    Tukey { tau: Rational64 },
}

fn positive_tau(tau: Rational64) -> Result<Rational64> {
    if tau <= Rational64::zero() {
        return Err(invalid("tau must be positive"));
    }
    Ok(tau)
}

impl Measure {
    pub fn lp(p: Exponent) -> Self {
        Measure::Lp { p }
    }

    pub fn fair(tau: Rational64) -> Result<Self> {
        Ok(Measure::Fair { tau: positive_tau(tau)? })
    }

    pub fn huber(tau: Rational64) -> Result<Self> {
        Ok(Measure::Huber { tau: positive_tau(tau)? })
    }

    pub fn tukey(tau: Rational64) -> Result<Self> {
        Ok(Measure::Tukey { tau: positive_tau(tau)? })
    }

    /// Builds a measure from a name and textual parameters.
    pub fn parse(name: &str, p: Option<&str>, tau: Option<&str>) -> Result<Self> {
        let tau = || -> Result<Rational64> { parse_rational(tau.unwrap_or("1")) };
        match name {
            "lp" => Ok(Measure::lp(p.unwrap_or("2").parse()?)),
            "l1l2" => Ok(Measure::L1L2),
            "fair" => Measure::fair(tau()?),
            "huber" => Measure::huber(tau()?),
            "tukey" => Measure::tukey(tau()?),
            other => Err(invalid(format!("unknown measure `{other}`"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Measure::Lp { p } => format!("lp(p={p})"),
            Measure::L1L2 => "l1l2".into(),
            Measure::Fair { tau } => format!("fair(tau={tau})"),
            Measure::Huber { tau } => format!("huber(tau={tau})"),
            Measure::Tukey { tau } => format!("tukey(tau={tau})"),
        }
    }

    /// Fast double-precision evaluation.
    pub fn g_f64(&self, x: u64) -> f64 {
        let xf = x as f64;
        match *self {
            Measure::Lp { p } => xf.powf(p.as_f64()),
            Measure::L1L2 => 2.0 * ((1.0 + xf * xf / 2.0).sqrt() - 1.0),
            Measure::Fair { tau } => {
                let t = tau.to_f64().unwrap();
                t * xf - t * t * (xf / t).ln_1p()
            }
            Measure::Huber { .. } | Measure::Tukey { .. } => self.g_rational(x).unwrap().to_f64().unwrap(),
        }
    }

    /// Exact value when `G(x)` is rational for every integer `x`.
    pub fn g_rational(&self, x: u64) -> Option<BigRational> {
        let xq = big(x);
        match *self {
            Measure::Lp { p } if p.is_integer() => Some(xq.pow(p.num() as i32)),
            Measure::Huber { tau } => {
                let t = to_big(tau);
                Some(if xq <= t { &xq * &xq / (&t * big(2)) } else { &xq - &t / big(2) })
            }
            Measure::Tukey { tau } => {
                let t = to_big(tau);
                let cap = &t * &t / big(6);
                if xq >= t {
                    Some(cap)
                } else {
                    let u = BigRational::one() - &xq * &xq / (&t * &t);
                    Some(cap * (BigRational::one() - u.pow(3)))
                }
            }
            _ => None,
        }
    }

    /// Exact symbolic value, when representable.
    pub fn g_symbolic(&self, x: u64) -> Option<Symbolic> {
        if let Some(q) = self.g_rational(x) {
            return Some(Symbolic::rational(q));
        }
        let xq = big(x);
        match *self {
            Measure::Lp { p } => Symbolic::pow_ratio(x, p.num(), p.den()),
            Measure::L1L2 => {
                let inner = (big(2) + &xq * &xq) / big(2);
                Some(Symbolic::sqrt(&inner).scale(&big(2)) - Symbolic::int(2))
            }
            Measure::Fair { tau } => {
                if x == 0 {
                    return Some(Symbolic::zero());
                }
                let t = to_big(tau);
                let log = Symbolic::ln(&(BigRational::one() + &xq / &t));
                Some(Symbolic::rational(&t * &xq) - log.scale(&(&t * &t)))
            }
            _ => None,
        }
    }

    /// Certified double-precision enclosure of `G(x)`.
    pub fn g_range(&self, x: u64) -> F64Range {
        let xr = F64Range::point(x as f64);
        match *self {
            Measure::Lp { p } => {
                if x == 0 {
                    F64Range::exact(0.0)
                } else {
                    xr.powf(p.as_f64())
                }
            }
            Measure::L1L2 => {
                let inner = F64Range::exact(1.0).add(xr.mul_nonneg(xr).mul_nonneg(F64Range::exact(0.5)));
                inner.powf(0.5).sub(F64Range::exact(1.0)).mul_nonneg(F64Range::exact(2.0))
            }
            Measure::Fair { tau } => {
                let t = F64Range::from_rational(&to_big(tau));
                let lin = t.mul_nonneg(xr);
                let log = xr.div_pos(t).ln_1p();
                lin.sub(t.mul_nonneg(t).mul_nonneg(log))
            }
            Measure::Huber { .. } | Measure::Tukey { .. } => F64Range::from_rational(&self.g_rational(x).unwrap()),
        }
    }

    /// Enclosure of `G(x)` to about `bits` fractional bits.
    pub fn g_interval(&self, x: u64, bits: u32) -> Interval {
        if let Some(q) = self.g_rational(x) {
            return Interval::point(q);
        }
        let xq = big(x);
        match *self {
            Measure::Lp { p } => rational_root(&xq.pow(p.num() as i32), p.den(), bits),
            Measure::L1L2 => {
                let inner = (big(2) + &xq * &xq) / big(2);
                let root = rational_root(&inner, 2, bits + 2);
                root.scale(&big(2)).sub(&Interval::from_int(2))
            }
            Measure::Fair { tau } => {
                if x == 0 {
                    return Interval::from_int(0);
                }
                let t = to_big(tau);
                let t2 = &t * &t;
                let extra = t2.to_f64().unwrap().log2().max(0.0).ceil() as u32 + 2;
                let log = ln_rational(&(BigRational::one() + &xq / &t), bits + extra);
                Interval::point(&t * &xq).sub(&log.scale(&t2))
            }
            Measure::Huber { .. } | Measure::Tukey { .. } => unreachable!(),
        }
    }

    /// Enclosure of `G(c+1) - G(c)`, well conditioned for large `c`.
    pub fn increment_range(&self, c: u64) -> F64Range {
        if let Measure::Lp { p } = *self {
            if c >= 1 {
                // c^p * expm1(p * ln1p(1/c))
                let cp = F64Range::point(c as f64).powf(p.as_f64());
                let l = F64Range::point(1.0 / c as f64).ln_1p();
                let e = l.mul_nonneg(F64Range::point(p.as_f64()));
                let em1 = F64Range { lo: e.lo.exp_m1() * (1.0 - 1e-13), hi: e.hi.exp_m1() * (1.0 + 1e-13) + f64::MIN_POSITIVE };
                return cp.mul_nonneg(em1);
            }
        }
        self.g_range(c + 1).sub(self.g_range(c))
    }

    pub fn increment_interval(&self, c: u64, bits: u32) -> Interval {
        // cancellation costs about log2 G(c+1) bits
        let guard = (self.g_f64(c + 1).max(1.0).log2().ceil() as u32) + 4;
        self.g_interval(c + 1, bits + guard).sub(&self.g_interval(c, bits + guard))
    }

    /// Static increment bound `zeta`; `None` for `L_p` with `p > 1`, whose
    /// bound depends on the stream through `Z`.
    pub fn zeta(&self) -> Option<BigRational> {
        match *self {
            Measure::Lp { p } => p.at_most_one().then(BigRational::one),
            Measure::L1L2 => Some(big(3)),
            Measure::Fair { tau } => Some(to_big(tau)),
            Measure::Huber { .. } => Some(BigRational::one()),
            Measure::Tukey { tau } => {
                let top = tau.ceil().to_integer().max(1) as u64 + 1;
                (1..=top).map(|x| self.g_rational(x).unwrap() - self.g_rational(x - 1).unwrap()).max()
            }
        }
    }

    /// Deterministic lower bound on `F_G` for any insertion-only stream of
    /// length `m`.
    pub fn fg_lower_bound(&self, m: u64) -> f64 {
        if m == 0 {
            return 0.0;
        }
        let shrink = 1.0 - 1e-9;
        match *self {
            // F_p >= m^p for p <= 1 (subadditivity of x^p)
            Measure::Lp { p } if p.at_most_one() => (m as f64).powf(p.as_f64()) * shrink,
            // one nonzero coordinate is enough
            Measure::Tukey { .. } => self.g_f64(1) * shrink,
            // G(x)/x is non-decreasing, so G(f) >= f G(1)
            _ => self.g_f64(1) * m as f64 * shrink,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// `L_p(p)` for the given exponents plus the M-estimators at `tau`.
pub fn builtin_measures(ps: &[Exponent], tau: Rational64) -> Result<Vec<Measure>> {
    let mut out: Vec<Measure> = ps.iter().map(|&p| Measure::lp(p)).collect();
    out.push(Measure::L1L2);
    out.push(Measure::fair(tau)?);
    out.push(Measure::huber(tau)?);
    out.push(Measure::tukey(tau)?);
    Ok(out)
}

/// `true` when `G(0) = 0`.
pub fn is_zero_at_zero(m: &Measure) -> bool {
    m.g_symbolic(0).map(|s| s.is_zero()).unwrap_or(m.g_f64(0) == 0.0)
}
