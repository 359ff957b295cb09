//! Exact rational intervals.
//!
//! A [`ProbEnclosure`] is a closed interval `[lo, hi]` with rational endpoints
//! that is guaranteed to contain some exact quantity (a probability, a weight,
//! or an intermediate inclusion-exclusion term). Arithmetic is outward: the
//! result contains every pointwise combination of the operands. Long products
//! are kept tractable by [`ProbEnclosure::round_outward`], which snaps
//! endpoints with large denominators outward onto the dyadic grid
//! `2^-bits`; rounding never shrinks an interval.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProbEnclosure {
    lo: Rational,
    hi: Rational,
}

impl ProbEnclosure {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidConfig(format!(
                "enclosure endpoints out of order: {lo} > {hi}"
            )));
        }
        Ok(ProbEnclosure { lo, hi })
    }

    pub(crate) fn from_ordered(lo: Rational, hi: Rational) -> Self {
        debug_assert!(lo <= hi, "{lo} > {hi}");
        ProbEnclosure { lo, hi }
    }

    pub fn exact(value: Rational) -> Self {
        ProbEnclosure {
            lo: value.clone(),
            hi: value,
        }
    }

    pub fn zero() -> Self {
        Self::exact(Rational::zero())
    }

    pub fn one() -> Self {
        Self::exact(Rational::one())
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> Rational {
        (&self.lo + &self.hi) / Rational::from_integer(2.into())
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_f64(&self, x: f64) -> bool {
        Rational::from_float(x).is_some_and(|q| self.contains(&q))
    }

    pub fn intersects(&self, other: &ProbEnclosure) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn is_subset_of(&self, other: &ProbEnclosure) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn add(&self, other: &ProbEnclosure) -> ProbEnclosure {
        ProbEnclosure {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    pub fn sub(&self, other: &ProbEnclosure) -> ProbEnclosure {
        ProbEnclosure {
            lo: &self.lo - &other.hi,
            hi: &self.hi - &other.lo,
        }
    }

    pub fn neg(&self) -> ProbEnclosure {
        ProbEnclosure {
            lo: -&self.hi,
            hi: -&self.lo,
        }
    }

    pub fn mul(&self, other: &ProbEnclosure) -> ProbEnclosure {
        if !self.lo.is_negative() && !other.lo.is_negative() {
            return ProbEnclosure {
                lo: &self.lo * &other.lo,
                hi: &self.hi * &other.hi,
            };
        }
        let products = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let lo = products.iter().min().unwrap().clone();
        let hi = products.iter().max().unwrap().clone();
        ProbEnclosure { lo, hi }
    }

    pub fn scale(&self, k: &Rational) -> ProbEnclosure {
        self.mul(&ProbEnclosure::exact(k.clone()))
    }

    /// Intersects with `[0, 1]`. The enclosed value must be a probability.
    pub fn clamp_unit(&self) -> ProbEnclosure {
        let lo = self.lo.clone().max(Rational::zero());
        let hi = self.hi.clone().min(Rational::one());
        debug_assert!(
            lo <= hi,
            "enclosure [{}, {}] misses [0,1]",
            self.lo,
            self.hi
        );
        if lo > hi {
            // cannot happen for a sound enclosure of a probability
            return ProbEnclosure { lo: hi.clone(), hi };
        }
        ProbEnclosure { lo, hi }
    }

    /// Clamps only the lower end at zero (for weights, which may exceed 1).
    pub fn clamp_nonnegative(&self) -> ProbEnclosure {
        ProbEnclosure {
            lo: self.lo.clone().max(Rational::zero()),
            hi: self.hi.clone().max(Rational::zero()),
        }
    }

    /// Rounds `lo` down and `hi` up to multiples of `2^-bits`, leaving any
    /// endpoint whose denominator already fits in `bits` bits untouched.
    pub fn round_outward(&self, bits: u32) -> ProbEnclosure {
        ProbEnclosure {
            lo: round_down(&self.lo, bits),
            hi: round_up(&self.hi, bits),
        }
    }

    /// Intersection, or `None` when disjoint.
    pub fn intersect(&self, other: &ProbEnclosure) -> Option<ProbEnclosure> {
        let lo = (&self.lo).max(&other.lo).clone();
        let hi = (&self.hi).min(&other.hi).clone();
        (lo <= hi).then_some(ProbEnclosure { lo, hi })
    }

    pub fn lo_f64(&self) -> f64 {
        self.lo.to_f64().unwrap_or(f64::NAN)
    }

    pub fn hi_f64(&self) -> f64 {
        self.hi.to_f64().unwrap_or(f64::NAN)
    }

    pub fn approx(&self) -> f64 {
        self.midpoint().to_f64().unwrap_or(f64::NAN)
    }

    pub fn width_f64(&self) -> f64 {
        self.width().to_f64().unwrap_or(f64::NAN)
    }
}

/// `{lo: "num/den", hi: "num/den", approx: decimal}`
impl fmt::Display for ProbEnclosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{lo: \"{}\", hi: \"{}\", approx: {}}}",
            rational_text(&self.lo),
            rational_text(&self.hi),
            self.approx()
        )
    }
}

/// `num/den`, always with an explicit denominator.
pub fn rational_text(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Parses `num/den` or an integer.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let t = s.trim();
    let bad = |m: String| Error::parse(s, m);
    match t.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|e| bad(format!("{e}")))?;
            let d: BigInt = d.trim().parse().map_err(|e| bad(format!("{e}")))?;
            if d.is_zero() {
                return Err(bad("zero denominator".into()));
            }
            Ok(Rational::new(n, d))
        }
        None => {
            if let Ok(n) = t.parse::<BigInt>() {
                return Ok(Rational::from_integer(n));
            }
            let x: f64 = t.parse().map_err(|e| bad(format!("{e}")))?;
            Rational::from_float(x).ok_or_else(|| bad("not finite".into()))
        }
    }
}

fn fits(q: &Rational, bits: u32) -> bool {
    q.denom().bits() <= u64::from(bits)
}

fn grid(bits: u32) -> BigInt {
    BigInt::one() << bits
}

pub fn round_down(q: &Rational, bits: u32) -> Rational {
    if fits(q, bits) {
        return q.clone();
    }
    let g = grid(bits);
    let scaled = q.numer() * &g;
    Rational::new(scaled.div_floor(q.denom()), g)
}

pub fn round_up(q: &Rational, bits: u32) -> Rational {
    if fits(q, bits) {
        return q.clone();
    }
    let g = grid(bits);
    let scaled = q.numer() * &g;
    Rational::new(scaled.div_ceil(q.denom()), g)
}

pub fn rational_from_u64(n: u64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Product of enclosures with outward rounding after each step.
pub fn eta_product<I: IntoIterator<Item = ProbEnclosure>>(factors: I, bits: u32) -> ProbEnclosure {
    factors.into_iter().fold(ProbEnclosure::one(), |acc, f| {
        acc.mul(&f).round_outward(bits)
    })
}

/// `1 / n`
pub fn reciprocal(n: &BigUint) -> Rational {
    Rational::new(BigInt::one(), BigInt::from(n.clone()))
}

/// `num / den` from machine integers.
pub fn ratio(num: u64, den: u64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn basic_operations() {
        let a = ProbEnclosure::new(q(1, 4), q(1, 2)).unwrap();
        let b = ProbEnclosure::new(q(1, 3), q(2, 3)).unwrap();
        assert_eq!(a.add(&b), ProbEnclosure::new(q(7, 12), q(7, 6)).unwrap());
        assert_eq!(a.sub(&b), ProbEnclosure::new(q(-5, 12), q(1, 6)).unwrap());
        assert_eq!(a.mul(&b), ProbEnclosure::new(q(1, 12), q(1, 3)).unwrap());
        assert_eq!(a.add(&b).clamp_unit().hi(), &Rational::one());
        assert!(ProbEnclosure::new(q(1, 2), q(1, 3)).is_err());
        assert!(a.intersects(&b));
        assert_eq!(
            a.intersect(&b).unwrap(),
            ProbEnclosure::new(q(1, 3), q(1, 2)).unwrap()
        );
    }

    #[test]
    fn signed_multiplication() {
        let a = ProbEnclosure::new(q(-1, 2), q(1, 4)).unwrap();
        let b = ProbEnclosure::new(q(1, 3), q(2, 3)).unwrap();
        assert_eq!(a.mul(&b), ProbEnclosure::new(q(-1, 3), q(1, 6)).unwrap());
    }

    #[test]
    fn rounding_keeps_small_denominators() {
        let a = ProbEnclosure::new(q(1, 3), q(2, 3)).unwrap();
        assert_eq!(a.round_outward(8), a);
        let b = a.round_outward(1);
        assert_eq!(b, ProbEnclosure::new(q(0, 1), q(1, 1)).unwrap());
    }

    #[test]
    fn text_roundtrip() {
        let x = q(-7, 12);
        assert_eq!(parse_rational(&rational_text(&x)).unwrap(), x);
        assert_eq!(parse_rational("3").unwrap(), q(3, 1));
        assert_eq!(parse_rational("0.5").unwrap(), q(1, 2));
        assert!(parse_rational("1/0").is_err());
        let e = ProbEnclosure::new(q(1, 4), q(1, 2)).unwrap();
        assert_eq!(e.to_string(), "{lo: \"1/4\", hi: \"1/2\", approx: 0.375}");
    }

    proptest! {
        #[test]
        fn rounding_is_outward(n in 1i64..1_000_000, d in 1i64..1_000_000, bits in 1u32..24) {
            let x = q(n, d);
            let r = ProbEnclosure::exact(x.clone()).round_outward(bits);
            prop_assert!(r.contains(&x));
            prop_assert!(r.width() <= q(1, 1) / Rational::from_integer(grid(bits)));
        }

        #[test]
        fn products_contain_pointwise(a in 0i64..100, b in 0i64..100, c in -50i64..50, d in -50i64..50,
                                     s in 0i64..=100, t in 0i64..=100) {
            let (a, b) = (a.min(b), a.max(b));
            let (c, d) = (c.min(d), c.max(d));
            let x = ProbEnclosure::new(q(a, 7), q(b, 7)).unwrap();
            let y = ProbEnclosure::new(q(c, 5), q(d, 5)).unwrap();
            let px = q(a, 7) + (q(b, 7) - q(a, 7)) * q(s, 100);
            let py = q(c, 5) + (q(d, 5) - q(c, 5)) * q(t, 100);
            prop_assert!(x.mul(&y).contains(&(&px * &py)));
            prop_assert!(x.sub(&y).contains(&(&px - &py)));
            prop_assert!(x.add(&y).contains(&(&px + &py)));
        }
    }
}
