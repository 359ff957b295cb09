//! Finite abelian groups as maps `prime -> partition`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Pow};

use crate::enclosure::Rational;
use crate::error::{Error, Result};
use crate::partitions::Partition;
use crate::primes::{as_prime_power, require_prime};

/// Isomorphism class of a finite abelian group. Only nontrivial p-parts are
/// stored, so the trivial group is the empty map and structural equality is
/// isomorphism.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FinAbGroup {
    parts: BTreeMap<u64, Partition>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupInvariants {
    pub order: BigUint,
    pub rank: u32,
    pub exponent: BigUint,
    pub uniform_order: u32,
    pub uniform_exponent: u32,
}

impl FinAbGroup {
    pub fn trivial() -> Self {
        FinAbGroup::default()
    }

    /// Builds a group from p-parts; empty partitions are dropped.
    pub fn from_parts<I>(parts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, Partition)>,
    {
        let mut map = BTreeMap::new();
        for (p, lam) in parts {
            require_prime(p)?;
            if lam.is_empty() {
                continue;
            }
            if map.insert(p, lam).is_some() {
                return Err(Error::InvalidConfig(format!("prime {p} given twice")));
            }
        }
        Ok(FinAbGroup { parts: map })
    }

    /// `Z/p^n`, the cyclic p-group.
    pub fn cyclic_p(p: u64, n: u32) -> Result<Self> {
        FinAbGroup::from_parts([(p, Partition::single(n))])
    }

    /// Folds elementary divisors (prime powers, or `1`) into a group.
    pub fn from_elementary_divisors(divisors: &[u64]) -> Result<Self> {
        let mut by_prime: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
        for &q in divisors {
            if q == 1 {
                continue;
            }
            let (p, e) = as_prime_power(q)
                .ok_or_else(|| Error::InvalidConfig(format!("{q} is not a prime power")))?;
            by_prime.entry(p).or_default().push(e);
        }
        let parts = by_prime
            .into_iter()
            .map(|(p, es)| (p, Partition::from_unsorted(es)))
            .collect();
        Ok(FinAbGroup { parts })
    }

    /// The p-part; the empty partition for primes not stored.
    pub fn p_part(&self, p: u64) -> Partition {
        self.parts.get(&p).cloned().unwrap_or_default()
    }

    /// Stored (nontrivial) p-parts in ascending prime order.
    pub fn parts(&self) -> impl Iterator<Item = (u64, &Partition)> {
        self.parts.iter().map(|(&p, lam)| (p, lam))
    }

    pub fn is_trivial(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn invariants(&self) -> GroupInvariants {
        let mut order = BigUint::one();
        let mut exponent = BigUint::one();
        let mut rank = 0;
        let mut uniform_order = 0;
        let mut uniform_exponent = 0;
        for (&p, lam) in &self.parts {
            let bp = BigUint::from(p);
            order *= Pow::pow(&bp, lam.size());
            exponent *= Pow::pow(&bp, lam.largest_part());
            rank = rank.max(lam.num_parts());
            uniform_order = uniform_order.max(lam.size());
            uniform_exponent = uniform_exponent.max(lam.largest_part());
        }
        GroupInvariants {
            order,
            rank,
            exponent,
            uniform_order,
            uniform_exponent,
        }
    }

    /// `#Aut(G)`, the product of the local automorphism counts.
    pub fn aut_order(&self) -> BigUint {
        self.parts
            .iter()
            .map(|(&p, lam)| aut_order(p, lam))
            .product()
    }

    /// Cohen-Lenstra weight `1 / #Aut(G)`.
    pub fn weight(&self) -> Rational {
        Rational::new(1u32.into(), self.aut_order().into())
    }

    /// Elementary divisors, ascending by prime and descending within a prime.
    pub fn elementary_divisors(&self) -> Vec<BigUint> {
        self.parts
            .iter()
            .flat_map(|(&p, lam)| {
                lam.parts()
                    .iter()
                    .map(move |&e| Pow::pow(&BigUint::from(p), e))
            })
            .collect()
    }
}

/// The group file line form: `4,2,3` for `Z/4 + Z/2 + Z/3`, `1` for trivial.
impl fmt::Display for FinAbGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let divisors = self.elementary_divisors();
        if divisors.is_empty() {
            return f.write_str("1");
        }
        for (i, q) in divisors.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{q}")?;
        }
        Ok(())
    }
}

impl FromStr for FinAbGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.is_empty() {
            return Err(Error::parse(
                s,
                "empty group; write `1` for the trivial group",
            ));
        }
        let divisors = t
            .split(',')
            .map(|x| {
                let x = x.trim();
                let q: u64 = x
                    .parse()
                    .map_err(|e| Error::parse(s, format!("bad divisor `{x}`: {e}")))?;
                if q == 0 {
                    return Err(Error::parse(s, "divisor 0"));
                }
                if q != 1 && as_prime_power(q).is_none() {
                    return Err(Error::parse(s, format!("{q} is not a prime power")));
                }
                Ok(q)
            })
            .collect::<Result<Vec<_>>>()?;
        FinAbGroup::from_elementary_divisors(&divisors)
    }
}

/// `#Aut` of the abelian p-group of type `lam`, by the closed product formula.
///
/// With the parts sorted ascending as `e_1 <= ... <= e_n`, let
/// `d_k = max{l : e_l = e_k}` and `c_k = min{l : e_l = e_k}`. Then
///
/// ```text
/// #Aut = prod_k (p^d_k - p^(k-1)) * prod_j p^(e_j (n - d_j)) * prod_i p^((e_i - 1)(n - c_i + 1))
/// ```
pub fn aut_order(p: u64, lam: &Partition) -> BigUint {
    let mut e: Vec<u32> = lam.parts().to_vec();
    e.reverse();
    let n = e.len();
    let bp = BigUint::from(p);
    let mut total = BigUint::one();
    let mut exp_power: u64 = 0;
    for k in 0..n {
        // 1-based d_k and c_k
        let d = e.iter().rposition(|&x| x == e[k]).unwrap() + 1;
        let c = e.iter().position(|&x| x == e[k]).unwrap() + 1;
        total *= Pow::pow(&bp, d as u32) - Pow::pow(&bp, k as u32);
        exp_power += u64::from(e[k]) * (n - d) as u64;
        exp_power += u64::from(e[k] - 1) * (n - c + 1) as u64;
    }
    total * Pow::pow(&bp, exp_power)
}

/// Default cap on the number of homomorphism candidates the oracle may scan.
pub const ORACLE_HOM_CAP: u128 = 100_000_000;

/// `#Aut` by exhaustive search over generator images.
///
/// Generator `g_i` of order `p^l_i` may be sent to any `h_i` with
/// `p^l_i h_i = 0`. An endomorphism of a finite p-group is bijective iff no
/// element of order `p` lies in its kernel, so assignments are extended one
/// generator at a time while tracking the image of the socle
/// `{sum a_i p^(l_i - 1) g_i}`; a branch dies as soon as a nonzero socle
/// element maps to zero.
pub fn aut_order_oracle(p: u64, lam: &Partition) -> Result<BigUint> {
    aut_order_oracle_with_cap(p, lam, ORACLE_HOM_CAP)
}

pub fn aut_order_oracle_with_cap(p: u64, lam: &Partition, cap: u128) -> Result<BigUint> {
    require_prime(p)?;
    let group = PGroup::new(p, lam)?;
    let mut homs: u128 = 1;
    for &l in lam.parts() {
        homs = homs.saturating_mul(group.killed_by(l) as u128);
    }
    if homs > cap {
        return Err(Error::OracleCap { homs, cap });
    }
    let candidates: Vec<Vec<usize>> = lam
        .parts()
        .iter()
        .map(|&l| {
            (0..group.order)
                .filter(|&h| group.scale(h, group.pow(l)) == 0)
                .collect()
        })
        .collect();
    let mut in_image = vec![false; group.order];
    in_image[0] = true;
    let count = group.extend(lam.parts(), &candidates, 0, &[0], &mut in_image);
    Ok(BigUint::from(count))
}

/// `Z/p^l_1 + ... + Z/p^l_r` with elements encoded as mixed-radix indices.
struct PGroup {
    p: u64,
    moduli: Vec<u64>,
    order: usize,
}

impl PGroup {
    fn new(p: u64, lam: &Partition) -> Result<Self> {
        let mut order: u64 = 1;
        let mut moduli = Vec::new();
        for &l in lam.parts() {
            let m = p
                .checked_pow(l)
                .filter(|m| order.checked_mul(*m).is_some_and(|o| o <= 1 << 24))
                .ok_or(Error::OracleCap {
                    homs: u128::MAX,
                    cap: ORACLE_HOM_CAP,
                })?;
            order *= m;
            moduli.push(m);
        }
        Ok(PGroup {
            p,
            moduli,
            order: order as usize,
        })
    }

    fn pow(&self, l: u32) -> u64 {
        self.p.pow(l)
    }

    /// `#{h : p^l h = 0}`
    fn killed_by(&self, l: u32) -> u64 {
        self.moduli.iter().map(|&m| m.min(self.pow(l))).product()
    }

    fn decode(&self, mut x: usize) -> Vec<u64> {
        self.moduli
            .iter()
            .map(|&m| {
                let d = x as u64 % m;
                x /= m as usize;
                d
            })
            .collect()
    }

    fn encode(&self, v: &[u64]) -> usize {
        let mut x = 0usize;
        for (&d, &m) in v.iter().zip(&self.moduli).rev() {
            x = x * m as usize + d as usize;
        }
        x
    }

    fn add(&self, a: usize, b: usize) -> usize {
        let (va, vb) = (self.decode(a), self.decode(b));
        let sum: Vec<u64> = va
            .iter()
            .zip(&vb)
            .zip(&self.moduli)
            .map(|((&x, &y), &m)| (x + y) % m)
            .collect();
        self.encode(&sum)
    }

    fn scale(&self, a: usize, k: u64) -> usize {
        let v: Vec<u64> = self
            .decode(a)
            .iter()
            .zip(&self.moduli)
            .map(|(&x, &m)| ((x as u128 * k as u128) % m as u128) as u64)
            .collect();
        self.encode(&v)
    }

    /// Counts injective completions given the socle image `image` of the
    /// first `level` generators (`in_image` is its indicator).
    fn extend(
        &self,
        parts: &[u32],
        candidates: &[Vec<usize>],
        level: usize,
        image: &[usize],
        in_image: &mut [bool],
    ) -> u64 {
        if level == parts.len() {
            return 1;
        }
        let shift = self.pow(parts[level] - 1);
        let mut count = 0;
        for &h in &candidates[level] {
            let t = self.scale(h, shift);
            let multiples: Vec<usize> = (1..self.p).map(|a| self.scale(t, a)).collect();
            if multiples.iter().any(|&m| in_image[m]) {
                continue;
            }
            if level + 1 == parts.len() {
                count += 1;
                continue;
            }
            let mut next = Vec::with_capacity(image.len() * self.p as usize);
            for &s in image {
                next.push(s);
                for &m in &multiples {
                    next.push(self.add(s, m));
                }
            }
            for &x in &next {
                in_image[x] = true;
            }
            count += self.extend(parts, candidates, level + 1, &next, in_image);
            for &x in &next {
                in_image[x] = false;
            }
            for &s in image {
                in_image[s] = true;
            }
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partitions::enumerate_partitions;

    fn lam(parts: &[u32]) -> Partition {
        Partition::new(parts.to_vec()).unwrap()
    }

    #[test]
    fn invariants_of_small_groups() {
        let t = FinAbGroup::trivial().invariants();
        assert_eq!(t.order, BigUint::from(1u32));
        assert_eq!((t.rank, t.uniform_order, t.uniform_exponent), (0, 0, 0));
        assert_eq!(t.exponent, BigUint::from(1u32));

        let g = FinAbGroup::from_parts([(2, lam(&[2, 1])), (3, lam(&[1]))]).unwrap();
        let i = g.invariants();
        assert_eq!(i.order, BigUint::from(24u32));
        assert_eq!(i.rank, 2);
        assert_eq!(i.exponent, BigUint::from(12u32));
        assert_eq!((i.uniform_order, i.uniform_exponent), (3, 2));

        let c = FinAbGroup::cyclic_p(5, 3).unwrap().invariants();
        assert_eq!(c.order, BigUint::from(125u32));
        assert_eq!(c.exponent, BigUint::from(125u32));
        assert_eq!((c.rank, c.uniform_order, c.uniform_exponent), (1, 3, 3));
    }

    #[test]
    fn rank_is_max_over_primes() {
        let g = FinAbGroup::from_parts([(2, lam(&[1])), (3, lam(&[1, 1, 1])), (5, lam(&[4, 2]))])
            .unwrap();
        let expected = g.parts().map(|(_, l)| l.num_parts()).max().unwrap();
        assert_eq!(g.invariants().rank, expected);
        assert_eq!(expected, 3);
    }

    #[test]
    fn automorphism_examples() {
        assert_eq!(aut_order(2, &Partition::empty()), BigUint::from(1u32));
        assert_eq!(aut_order(2, &lam(&[1, 1])), BigUint::from(6u32));
        assert_eq!(aut_order(3, &lam(&[2])), BigUint::from(6u32));
        assert_eq!(aut_order(2, &lam(&[2, 1])), BigUint::from(8u32));
        assert_eq!(aut_order(3, &lam(&[1, 1])), BigUint::from(48u32));
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(
            aut_order_oracle(2, &lam(&[2, 1])).unwrap(),
            BigUint::from(8u32)
        );
        assert_eq!(
            aut_order_oracle(5, &lam(&[1])).unwrap(),
            BigUint::from(4u32)
        );
        assert_eq!(
            aut_order_oracle(2, &Partition::empty()).unwrap(),
            BigUint::from(1u32)
        );
        assert_eq!(
            aut_order_oracle(3, &lam(&[1, 1])).unwrap(),
            BigUint::from(48u32)
        );
    }

    #[test]
    fn oracle_refuses_above_cap() {
        let err = aut_order_oracle_with_cap(3, &lam(&[1, 1, 1]), 1000).unwrap_err();
        assert!(matches!(
            err,
            Error::OracleCap {
                homs: 19683,
                cap: 1000
            }
        ));
        assert!(aut_order_oracle(4, &lam(&[1])).is_err());
    }

    #[test]
    fn formula_matches_oracle_on_small_groups() {
        for (p, max) in [(2u64, 4u32), (3, 3), (5, 2)] {
            for n in 0..=max {
                for l in enumerate_partitions(n) {
                    assert_eq!(
                        aut_order(p, &l),
                        aut_order_oracle(p, &l).unwrap(),
                        "p={p} {l}"
                    );
                }
            }
        }
    }

    #[test]
    fn cyclic_automorphisms() {
        for p in [2u64, 3, 5] {
            for n in 1..=10u32 {
                let expected = BigUint::from(p).pow(n - 1) * BigUint::from(p - 1);
                assert_eq!(aut_order(p, &Partition::single(n)), expected);
            }
            for n in 1..=3u32 {
                assert_eq!(
                    aut_order_oracle(p, &Partition::single(n)).unwrap(),
                    aut_order(p, &Partition::single(n))
                );
            }
        }
    }

    #[test]
    fn aut_is_multiplicative_across_primes() {
        let g = FinAbGroup::from_parts([(2, lam(&[2, 1])), (3, lam(&[1, 1]))]).unwrap();
        assert_eq!(g.aut_order(), BigUint::from(8u32 * 48));
        assert_eq!(g.weight(), Rational::new(1u32.into(), 384u32.into()));
    }

    #[test]
    fn group_text_form() {
        let g: FinAbGroup = "4,2,3".parse().unwrap();
        assert_eq!(
            g,
            FinAbGroup::from_parts([(2, lam(&[2, 1])), (3, lam(&[1]))]).unwrap()
        );
        assert_eq!(g.to_string(), "4,2,3");
        assert_eq!("2,4,3".parse::<FinAbGroup>().unwrap(), g);
        assert_eq!("1".parse::<FinAbGroup>().unwrap(), FinAbGroup::trivial());
        assert_eq!(FinAbGroup::trivial().to_string(), "1");
        assert!("6".parse::<FinAbGroup>().is_err());
        assert!("".parse::<FinAbGroup>().is_err());
        assert!("0".parse::<FinAbGroup>().is_err());
        assert!("4,x".parse::<FinAbGroup>().is_err());
    }

    #[test]
    fn canonical_construction_drops_trivial_parts() {
        let g = FinAbGroup::from_parts([(2, Partition::empty()), (3, lam(&[1]))]).unwrap();
        assert_eq!(g.parts().count(), 1);
        assert_eq!(g.p_part(2), Partition::empty());
        assert!(FinAbGroup::from_parts([(4, lam(&[1]))]).is_err());
    }
}
