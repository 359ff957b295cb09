//! Local Cohen-Lenstra weights and probabilities at a single prime.
//!
//! The weight of an abelian p-group is `w(G) = 1 / #Aut(G)`. The total weight
//! of all p-groups is `1 / eta(p)` with `eta(p) = prod_{i >= 1} (1 - p^-i)`,
//! so the local probability of a set of partitions is its weight times
//! `eta(p)`. Both infinite objects are truncated here and the truncation is
//! accounted for:
//!
//! - `eta(p)` keeps `product_depth` factors and uses
//!   `prod_{i > M} (1 - p^-i) >= 1 - p^-M / (p - 1)` for the rest.
//! - Fiber weights enumerate partitions up to `partition_size_cap` and bound
//!   the weight of everything larger by [`tail_weight_bound`].

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Pow, Zero};

use crate::abelian::aut_order;
use crate::enclosure::{ratio, reciprocal, round_down, round_up, ProbEnclosure, Rational};
use crate::error::{Error, Result};
use crate::partitions::{enumerate_partitions, partitions_up_to, Partition};
use crate::primes::require_prime;
use crate::properties::UniformProperty;

/// Truncation parameters shared by every local computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Budget {
    /// Largest partition size enumerated explicitly.
    pub partition_size_cap: u32,
    /// Number of factors of `prod (1 - p^-i)` evaluated.
    pub product_depth: u32,
    /// Endpoints with larger denominators are rounded outward to `2^-bits`.
    pub precision_bits: u32,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            partition_size_cap: 24,
            product_depth: 64,
            precision_bits: 256,
        }
    }
}

impl Budget {
    pub fn new(partition_size_cap: u32, product_depth: u32) -> Result<Self> {
        let b = Budget {
            partition_size_cap,
            product_depth,
            ..Budget::default()
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_precision(mut self, bits: u32) -> Result<Self> {
        self.precision_bits = bits;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.partition_size_cap == 0 || self.product_depth == 0 {
            return Err(Error::InvalidConfig(
                "partition size cap and product depth must be positive".into(),
            ));
        }
        if self.precision_bits < 32 {
            return Err(Error::InvalidConfig(
                "precision must be at least 32 bits".into(),
            ));
        }
        Ok(())
    }
}

/// `w_p(lam) = 1 / #Aut`
pub fn weight(p: u64, lam: &Partition) -> Rational {
    reciprocal(&aut_order(p, lam))
}

/// Enclosure of `eta(p) = prod_{i >= 1} (1 - p^-i)`.
///
/// At most `product_depth` factors are multiplied, and none once `p^-i`
/// falls below `2^-precision_bits`.
pub fn eta(p: u64, budget: &Budget) -> ProbEnclosure {
    let bits = budget.precision_bits;
    let bp = BigInt::from(p);
    let mut lo = Rational::one();
    let mut hi = Rational::one();
    let mut power = BigInt::one();
    // factors closer to 1 than the rounding grid are left to the tail bound
    let grid = BigInt::one() << bits;
    for _ in 0..budget.product_depth {
        if power >= grid {
            break;
        }
        power *= &bp;
        let factor = Rational::new(&power - 1, power.clone());
        lo = round_down(&(lo * &factor), bits);
        hi = round_up(&(hi * &factor), bits);
    }
    // prod_{i > M} (1 - p^-i) >= 1 - p^-M / (p - 1)
    let tail = Rational::one() - Rational::new(BigInt::one(), power * (&bp - 1));
    let lo = round_down(&(lo * tail), bits).max(Rational::zero());
    ProbEnclosure::from_ordered(lo, hi)
}

/// Ratio `c = 81/50` majorizing partition counts: `a(i) <= F_{i+1} <= c^i`.
pub fn partition_growth_constant() -> Rational {
    ratio(81, 50)
}

/// Upper bound on the total weight of all partitions of size `> n`:
/// `sum_{i > n} (c/p)^i = (c/p)^(n+1) / (1 - c/p)`.
pub fn tail_weight_bound(p: u64, n: u32) -> Rational {
    let q = partition_growth_constant() / Rational::from_integer(BigInt::from(p));
    Pow::pow(&q, n + 1) / (Rational::one() - q)
}

/// `s_p(n)`: total weight of the partitions of `n`, by enumeration.
pub fn size_weight(p: u64, n: u32) -> Rational {
    enumerate_partitions(n).iter().map(|l| weight(p, l)).sum()
}

/// [`size_weight`] refusing sizes above `cap`.
pub fn size_weight_within(p: u64, n: u32, cap: u32) -> Result<Rational> {
    if n > cap {
        return Err(Error::PartitionBudget { requested: n, cap });
    }
    Ok(size_weight(p, n))
}

/// Smallest size cap at which the tail bound at `p` drops below
/// `2^-(bits/2)`, far under the rounding grid of the final products.
/// Enumerating further cannot change an enclosure materially.
fn negligible_tail_cap(p: u64, bits: u32) -> u32 {
    let threshold = Rational::new(BigInt::one(), BigInt::one() << (bits / 2));
    let mut n = 1;
    while tail_weight_bound(p, n) > threshold {
        n += 1;
    }
    n
}

/// The accepted partitions of a property, enumerated once and reused across
/// primes.
#[derive(Clone, Debug)]
pub struct FiberTable {
    by_size: Vec<Vec<Partition>>,
    /// `Some(b)`: the fiber has no members above size `b` and all of it is stored.
    complete_to: Option<u32>,
}

impl FiberTable {
    pub fn new(property: &UniformProperty, budget: &Budget) -> Self {
        let cap = budget.partition_size_cap;
        let (limit, complete_to) = match property.finite_fiber_bound() {
            Some(b) if b <= cap => (b, Some(b)),
            _ => (cap, None),
        };
        let mut by_size = vec![Vec::new(); limit as usize + 1];
        for lam in partitions_up_to(limit) {
            if property.holds(&lam) {
                by_size[lam.size() as usize].push(lam);
            }
        }
        FiberTable {
            by_size,
            complete_to,
        }
    }

    /// An explicitly given finite fiber.
    pub fn explicit<'a, I: IntoIterator<Item = &'a Partition>>(fiber: I) -> Self {
        let mut by_size: Vec<Vec<Partition>> = vec![Vec::new()];
        for lam in fiber {
            let s = lam.size() as usize;
            if by_size.len() <= s {
                by_size.resize(s + 1, Vec::new());
            }
            by_size[s].push(lam.clone());
        }
        let top = by_size.len() as u32 - 1;
        FiberTable {
            by_size,
            complete_to: Some(top),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.complete_to.is_some()
    }

    pub fn members(&self) -> impl Iterator<Item = &Partition> {
        self.by_size.iter().flatten()
    }

    /// Enclosure of the fiber's `w_p`-weight.
    ///
    /// Complete finite fibers are summed exactly. Otherwise each weight is
    /// rounded outward onto the `2^-precision_bits` grid before summing,
    /// and the tail bound is added on top.
    pub fn weight(&self, p: u64, budget: &Budget) -> ProbEnclosure {
        let bits = budget.precision_bits;
        if self.is_complete() {
            let total: Rational = self.members().map(|l| weight(p, l)).sum();
            return ProbEnclosure::exact(total).round_outward(bits);
        }
        let enumerated = self.by_size.len() as u32 - 1;
        let cap = enumerated.min(negligible_tail_cap(p, bits));
        let grid = BigUint::one() << bits;
        let mut lo = BigUint::zero();
        let mut hi = BigUint::zero();
        for lam in self.by_size[..=cap as usize].iter().flatten() {
            let (quotient, remainder) = grid.div_rem(&aut_order(p, lam));
            if !remainder.is_zero() {
                hi += 1u32;
            }
            hi += &quotient;
            lo += quotient;
        }
        let denominator = BigInt::from(grid);
        let lo = Rational::new(BigInt::from(lo), denominator.clone());
        let hi = Rational::new(BigInt::from(hi), denominator) + tail_weight_bound(p, cap);
        ProbEnclosure::from_ordered(lo, hi).round_outward(bits)
    }

    /// Enclosure of the fiber's local probability.
    pub fn probability(&self, p: u64, budget: &Budget) -> ProbEnclosure {
        self.weight(p, budget)
            .mul(&eta(p, budget))
            .round_outward(budget.precision_bits)
            .clamp_unit()
    }
}

/// `P_p(E^-1(1))`
pub fn local_probability(
    p: u64,
    property: &UniformProperty,
    budget: &Budget,
) -> Result<ProbEnclosure> {
    require_prime(p)?;
    budget.validate()?;
    Ok(FiberTable::new(property, budget).probability(p, budget))
}

/// `P_p(S)` for an explicit finite set of partitions.
pub fn local_probability_of_set<'a, I>(p: u64, fiber: I, budget: &Budget) -> Result<ProbEnclosure>
where
    I: IntoIterator<Item = &'a Partition>,
{
    require_prime(p)?;
    budget.validate()?;
    Ok(FiberTable::explicit(fiber).probability(p, budget))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abelian::aut_order_oracle;
    use crate::enclosure::rational_from_u64;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn deep() -> Budget {
        Budget::new(24, 80).unwrap()
    }

    #[test]
    fn weights() {
        assert_eq!(weight(2, &Partition::empty()), q(1, 1));
        assert_eq!(weight(2, &Partition::single(1)), q(1, 1));
        let l: Partition = "1,1".parse().unwrap();
        assert_eq!(weight(3, &l), q(1, 48));
        assert_eq!(
            weight(3, &l),
            Rational::new(1.into(), aut_order_oracle(3, &l).unwrap().into())
        );
    }

    #[test]
    fn size_weights() {
        assert_eq!(size_weight(7, 0), q(1, 1));
        assert_eq!(size_weight(2, 1), q(1, 1));
        assert_eq!(size_weight(2, 2), q(2, 3));
        assert!(size_weight_within(2, 9, 8).is_err());
    }

    #[test]
    fn eta_at_two() {
        let b = Budget::new(24, 60).unwrap();
        let e = eta(2, &b);
        assert!(e.lo() <= e.hi());
        assert!(e.width() <= Rational::new(2.into(), BigInt::one() << 60));
        // 0.288788095086602421278899721929...
        assert!(
            e.contains(&q(288_788_095_086, 1_000_000_000_000)) || {
                let x = e.approx();
                (x - 0.288788095086602).abs() < 1e-14
            }
        );
    }

    #[test]
    fn eta_depth_one_is_the_two_sided_formula() {
        for p in [101u64, 7919] {
            let e = eta(p, &Budget::new(4, 1).unwrap());
            let one_factor = Rational::one() - q(1, p as i64);
            let lo = &one_factor * (Rational::one() - q(1, (p * (p - 1)) as i64));
            assert_eq!(e, ProbEnclosure::new(lo, one_factor).unwrap());
        }
    }

    #[test]
    fn eta_tightens_with_depth() {
        for p in [2u64, 3, 5, 97] {
            let mut prev = eta(p, &Budget::new(4, 1).unwrap());
            for depth in [2, 4, 8, 16, 32, 64] {
                let next = eta(p, &Budget::new(4, depth).unwrap());
                assert!(next.width() <= prev.width(), "p={p} depth={depth}");
                assert!(next.intersects(&prev));
                prev = next;
            }
        }
    }

    #[test]
    fn tail_bound_formula() {
        let expected = Pow::pow(&q(81, 100), 21u32) * q(100, 19);
        assert_eq!(tail_weight_bound(2, 20), expected);
        for p in [2u64, 3, 5] {
            for n in 1..20 {
                assert!(tail_weight_bound(p, n + 1) < tail_weight_bound(p, n));
            }
        }
        assert!(tail_weight_bound(3, 5) < tail_weight_bound(2, 5));
    }

    #[test]
    fn tail_bound_exceeds_enumerated_tail() {
        let enumerated: Rational = (11..=14).map(|n| size_weight(2, n)).sum();
        assert!(enumerated < tail_weight_bound(2, 10));
    }

    #[test]
    fn single_point_fibers() {
        let b = deep();
        let trivial = UniformProperty::member_of([Partition::empty()]);
        let pe = local_probability(2, &trivial, &b).unwrap();
        assert_eq!(pe, eta(2, &b).round_outward(b.precision_bits));
        assert!((pe.approx() - 0.288_788_095_086_602_4).abs() < 1e-15);

        let zero_one = UniformProperty::member_of([Partition::empty(), Partition::single(1)]);
        let pz = local_probability(2, &zero_one, &b).unwrap();
        // prod_{i >= 2} (1 - 2^-i) = 2 * eta(2)
        assert!(
            pz.contains(&(Rational::from_integer(2.into()) * eta(2, &b).lo()))
                || pz.width() < q(1, 1_000_000_000)
        );
        assert!((pz.approx() - 0.577_576_190_173_204_8).abs() < 1e-15);
    }

    #[test]
    fn total_probability_is_one() {
        for p in [2u64, 3, 5, 101] {
            let e = local_probability(p, &UniformProperty::always(), &deep()).unwrap();
            assert!(e.contains(&Rational::one()), "p={p}: {e}");
        }
    }

    #[test]
    fn size_weight_identity_small() {
        for p in [2u64, 3, 5] {
            let mut product = Rational::one();
            let pr = rational_from_u64(p);
            for n in 0..=10u32 {
                if n > 0 {
                    product /= Rational::one() - Pow::pow(&pr, n).recip();
                }
                let expected = &product / Pow::pow(&pr, n);
                assert_eq!(size_weight(p, n), expected, "p={p} n={n}");
            }
        }
    }

    #[test]
    fn normalization_partial_sums() {
        for p in [2u64, 3, 5] {
            let b = deep();
            let inverse_eta_hi = eta(p, &b).lo().recip();
            let inverse_eta_lo = eta(p, &b).hi().recip();
            let mut partial = Rational::zero();
            for n in 0..=14u32 {
                partial += size_weight(p, n);
                assert!(partial < inverse_eta_hi);
                assert!(&partial + tail_weight_bound(p, n) >= inverse_eta_lo);
            }
        }
    }

    #[test]
    fn enclosures_never_widen_with_budget() {
        let props = [
            UniformProperty::rank_le(1),
            UniformProperty::always(),
            UniformProperty::uexp_le(2),
            UniformProperty::usize_le(30),
        ];
        for p in [2u64, 3, 7] {
            for e in &props {
                let mut prev: Option<ProbEnclosure> = None;
                for (n, m) in [(2, 4), (4, 8), (8, 16), (12, 32), (16, 64)] {
                    let cur = local_probability(p, e, &Budget::new(n, m).unwrap()).unwrap();
                    if let Some(prev) = &prev {
                        assert!(cur.width() <= prev.width(), "p={p} {e} N={n}");
                    }
                    prev = Some(cur);
                }
            }
        }
    }

    #[test]
    fn recomputation_is_bit_identical() {
        let e = UniformProperty::rank_le(2);
        let a = local_probability(3, &e, &Budget::default()).unwrap();
        let b = local_probability(3, &e, &Budget::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_non_primes() {
        assert!(local_probability(9, &UniformProperty::always(), &deep()).is_err());
        assert!(Budget::new(0, 4).is_err());
    }
}
