//! The global Cohen-Lenstra measure on uniform properties, O-sets and D-sets.
//!
//! For a uniform property `E` the measure of `O(E)` is the product over all
//! primes of the local probabilities of the fiber `E^-1(1)`. The product is
//! evaluated exactly (up to outward rounding) for `p <= x`; when the fiber
//! contains `()` and `(1)` every remaining factor is at least
//! `1 - 1/(p(p-1))`, and `sum_{p > x} 1/(p(p-1)) <= 1/x`, so the rest of the
//! product lies in `[1 - 1/x, 1]`. When the fiber misses `()` or `(1)` the
//! measure is exactly zero and no product is formed.
//!
//! Besides the global measure, [`MeasureSpace::Truncated`] evaluates the same
//! formulas on the finite product space `prod_{p in S} G_p`, and
//! [`truncated_space_measure`] computes measures there by brute force over
//! all tuples of partitions. The two agree on every target, which is what the
//! test suites check.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::abelian::{aut_order, FinAbGroup};
use crate::enclosure::{eta_product, ratio, rational_from_u64, ProbEnclosure, Rational};
use crate::error::{Error, Result};
use crate::localmeasure::{eta, partition_growth_constant, tail_weight_bound, Budget, FiberTable};
use crate::partitions::{partitions_up_to, Partition};
use crate::primes::{is_prime, primes_up_to, require_prime};
use crate::properties::{DSet, OSet, Target, UniformProperty};

/// Largest number of sets inclusion-exclusion is run over (`2^r - 1` terms).
pub const INCLUSION_EXCLUSION_LIMIT: usize = 12;

/// Largest number of tuples [`truncated_space_measure`] will visit.
pub const TRUNCATED_TUPLE_CAP: u128 = 20_000_000;

/// Largest modulus lcm used when deciding whether a class holds infinitely
/// many primes.
const RESIDUE_LCM_CAP: u64 = 1_000_000;

#[derive(Clone, Debug)]
pub struct GlobalConfig {
    /// Every prime `p <= x` enters the product exactly.
    pub prime_cutoff: u64,
    pub local_budget: Budget,
    /// Primes whose factor is dropped from the product.
    pub excluded_primes: BTreeSet<u64>,
    pub prime_classes: Option<PrimeClasses>,
}

impl GlobalConfig {
    pub fn new(prime_cutoff: u64, local_budget: Budget) -> Result<Self> {
        let cfg = GlobalConfig {
            prime_cutoff,
            local_budget,
            excluded_primes: BTreeSet::new(),
            prime_classes: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn excluding<I: IntoIterator<Item = u64>>(mut self, primes: I) -> Result<Self> {
        self.excluded_primes.extend(primes);
        self.validate()?;
        Ok(self)
    }

    pub fn with_classes(mut self, classes: PrimeClasses) -> Self {
        self.prime_classes = Some(classes);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.prime_cutoff < 3 {
            return Err(Error::InvalidConfig(
                "prime cutoff must be at least 3".into(),
            ));
        }
        self.local_budget.validate()?;
        for &p in &self.excluded_primes {
            require_prime(p)?;
        }
        Ok(())
    }

    /// The enclosure `[1 - 1/x, 1]` of the product over primes above the cutoff.
    pub fn prime_tail(&self) -> ProbEnclosure {
        ProbEnclosure::from_ordered(
            Rational::one() - ratio(1, self.prime_cutoff),
            Rational::one(),
        )
    }

    fn included_primes(&self) -> Vec<u64> {
        primes_up_to(self.prime_cutoff)
            .into_iter()
            .filter(|p| !self.excluded_primes.contains(p))
            .collect()
    }
}

/// Where measures are evaluated.
#[derive(Clone, Debug)]
pub enum MeasureSpace {
    /// All primes, with the prime tail above the cutoff enclosed.
    Global(GlobalConfig),
    /// The finite product `prod_{p in primes} G_p`.
    Truncated { primes: Vec<u64>, budget: Budget },
}

impl MeasureSpace {
    pub fn truncated(primes: &[u64], budget: Budget) -> Result<Self> {
        for &p in primes {
            require_prime(p)?;
        }
        budget.validate()?;
        let primes: BTreeSet<u64> = primes.iter().copied().collect();
        Ok(MeasureSpace::Truncated {
            primes: primes.into_iter().collect(),
            budget,
        })
    }

    fn budget(&self) -> &Budget {
        match self {
            MeasureSpace::Global(cfg) => &cfg.local_budget,
            MeasureSpace::Truncated { budget, .. } => budget,
        }
    }

    pub fn measure_property(&self, property: &UniformProperty) -> ProbEnclosure {
        match self {
            MeasureSpace::Global(cfg) => {
                if !property.accepts_zero_and_one() {
                    return ProbEnclosure::zero();
                }
                let table = FiberTable::new(property, &cfg.local_budget);
                let product = product_over(&cfg.included_primes(), &cfg.local_budget, |_| &table);
                product
                    .mul(&cfg.prime_tail())
                    .round_outward(cfg.local_budget.precision_bits)
                    .clamp_unit()
            }
            MeasureSpace::Truncated { primes, budget } => {
                let table = FiberTable::new(property, budget);
                product_over(primes, budget, |_| &table).clamp_unit()
            }
        }
    }

    pub fn measure_o(&self, set: &OSet) -> Result<ProbEnclosure> {
        inclusion_exclusion(set.members(), |e| self.measure_property(e))
    }

    pub fn measure_d(&self, set: &DSet) -> Result<ProbEnclosure> {
        let normalized = set.normalize();
        if normalized.positives().is_empty() {
            return Ok(ProbEnclosure::zero());
        }
        let pos = inclusion_exclusion(normalized.positives(), |e| self.measure_property(e))?;
        if normalized.negatives().is_empty() {
            return Ok(pos);
        }
        let neg = inclusion_exclusion(normalized.negatives(), |e| self.measure_property(e))?;
        Ok(pos
            .sub(&neg)
            .round_outward(self.budget().precision_bits)
            .clamp_unit())
    }

    pub fn measure(&self, target: &Target) -> Result<ProbEnclosure> {
        match target {
            Target::Property(e) => Ok(self.measure_property(e)),
            Target::O(o) => self.measure_o(o),
            Target::D(d) => self.measure_d(d),
        }
    }

    /// Enclosure of `E[f]` for an integer-valued uniform quantity, via
    /// `E[f] = sum_{k >= 1} P(f >= k)`.
    ///
    /// With `cap = Some(K)` this is the exact finite sum for `min(f, K)`.
    /// With `cap = None` the series is cut after `series_terms` terms and the
    /// rest is bounded: `f >= k` forces some p-part of size `>= k`, whose
    /// probability is at most [`tail_weight_bound`]`(p, k - 1)`, and the sum
    /// over primes and `k` is bounded in closed form. Only the global space
    /// supports the uncapped form.
    pub fn expected_value(
        &self,
        quantity: Quantity,
        cap: Option<u32>,
        series_terms: u32,
    ) -> Result<ProbEnclosure> {
        let terms = cap.unwrap_or(series_terms);
        if terms == 0 {
            return Err(Error::InvalidConfig("need at least one series term".into()));
        }
        let mut total = ProbEnclosure::zero();
        for k in 1..=terms {
            let at_most = self.measure_property(&quantity.level_le(k - 1));
            total = total.add(&ProbEnclosure::one().sub(&at_most));
        }
        if cap.is_none() {
            match self {
                MeasureSpace::Global(_) => {
                    let tail = quantity_series_tail(terms);
                    total = total.add(&ProbEnclosure::from_ordered(Rational::zero(), tail));
                }
                MeasureSpace::Truncated { .. } => {
                    return Err(Error::InvalidConfig(
                        "uncapped expectations are only available on the global space".into(),
                    ))
                }
            }
        }
        Ok(total
            .round_outward(self.budget().precision_bits)
            .clamp_nonnegative())
    }
}

/// Integer-valued uniform quantities whose level sets are uniform properties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantity {
    Rank,
    UniformOrder,
    UniformExponent,
}

impl Quantity {
    /// The property `f <= k`.
    pub fn level_le(self, k: u32) -> UniformProperty {
        match self {
            Quantity::Rank => UniformProperty::rank_le(k),
            Quantity::UniformOrder => UniformProperty::usize_le(k),
            Quantity::UniformExponent => UniformProperty::uexp_le(k),
        }
    }

    pub fn evaluate(self, group: &FinAbGroup) -> u32 {
        let inv = group.invariants();
        match self {
            Quantity::Rank => inv.rank,
            Quantity::UniformOrder => inv.uniform_order,
            Quantity::UniformExponent => inv.uniform_exponent,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "rank" => Some(Quantity::Rank),
            "uorder" | "usize" => Some(Quantity::UniformOrder),
            "uexp" => Some(Quantity::UniformExponent),
            _ => None,
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantity::Rank => "rank",
            Quantity::UniformOrder => "uorder",
            Quantity::UniformExponent => "uexp",
        })
    }
}

/// Upper bound on `sum_{k > K} P(f >= k)` for rank, uniform order and
/// uniform exponent.
///
/// `P(f >= k) <= sum_p (c/p)^k / (1 - c/p)`. The primes 2 and 3 are summed
/// as geometric series in `k`; for `p >= 5` the sum over primes is bounded by
/// `sum_{m >= 5} m^-k <= 4^(1-k) / (k - 1)`, and for `k > K` by
/// `4 (c/4)^k / (K (1 - c/5))`, again geometric in `k`.
fn quantity_series_tail(k_max: u32) -> Rational {
    let c = partition_growth_constant();
    let one = Rational::one();
    let geometric = |q: Rational, denom: Rational| {
        let first = num_traits::Pow::pow(&q, k_max + 1);
        first / ((&one - &q) * denom)
    };
    let two = geometric(&c / rational_from_u64(2), &one - &c / rational_from_u64(2));
    let three = geometric(&c / rational_from_u64(3), &one - &c / rational_from_u64(3));
    let rest = geometric(
        &c / rational_from_u64(4),
        rational_from_u64(u64::from(k_max)) * (&one - &c / rational_from_u64(5)),
    ) * rational_from_u64(4);
    two + three + rest
}

/// Exact product of per-prime local probabilities with outward rounding.
/// Factors are computed in parallel and multiplied in prime order.
fn product_over<'a, F>(primes: &[u64], budget: &Budget, table_for: F) -> ProbEnclosure
where
    F: Fn(u64) -> &'a FiberTable + Sync,
{
    let factors: Vec<ProbEnclosure> = primes
        .par_iter()
        .map(|&p| table_for(p).probability(p, budget))
        .collect();
    factors.iter().fold(ProbEnclosure::one(), |acc, f| {
        acc.mul(f).round_outward(budget.precision_bits)
    })
}

/// `sum_{T != {}} (-1)^(|T|+1) P(AND T)` over subsets of `members`.
fn inclusion_exclusion<F>(members: &[UniformProperty], measure: F) -> Result<ProbEnclosure>
where
    F: Fn(&UniformProperty) -> ProbEnclosure,
{
    let r = members.len();
    if r == 0 {
        return Ok(ProbEnclosure::zero());
    }
    if r > INCLUSION_EXCLUSION_LIMIT {
        return Err(Error::InclusionExclusionLimit {
            members: r,
            limit: INCLUSION_EXCLUSION_LIMIT,
        });
    }
    let mut total = ProbEnclosure::zero();
    for mask in 1u32..(1 << r) {
        let mut chosen = (0..r).filter(|i| mask & (1 << i) != 0).map(|i| &members[i]);
        let first = chosen.next().unwrap().clone();
        let conj = chosen.fold(first, |acc, e| acc.and(e));
        let term = measure(&conj);
        total = if mask.count_ones() % 2 == 1 {
            total.add(&term)
        } else {
            total.sub(&term)
        };
    }
    Ok(total.clamp_unit())
}

/// `P(O(E))` on the global space.
pub fn measure_property(property: &UniformProperty, cfg: &GlobalConfig) -> ProbEnclosure {
    MeasureSpace::Global(cfg.clone()).measure_property(property)
}

/// `P(O(E_1, ..., E_r))` on the global space.
pub fn measure_o(set: &OSet, cfg: &GlobalConfig) -> Result<ProbEnclosure> {
    MeasureSpace::Global(cfg.clone()).measure_o(set)
}

/// `P(D(E; F))` on the global space.
pub fn measure_d(set: &DSet, cfg: &GlobalConfig) -> Result<ProbEnclosure> {
    MeasureSpace::Global(cfg.clone()).measure_d(set)
}

/// A finite product space with a per-prime partition size cap.
#[derive(Clone, Debug)]
pub struct TruncatedSpace {
    primes: Vec<(u64, u32)>,
    budget: Budget,
}

impl TruncatedSpace {
    /// Every prime enumerated up to `budget.partition_size_cap`.
    pub fn uniform(primes: &[u64], budget: Budget) -> Result<Self> {
        let cap = budget.partition_size_cap;
        Self::with_caps(
            &primes.iter().map(|&p| (p, cap)).collect::<Vec<_>>(),
            budget,
        )
    }

    pub fn with_caps(primes: &[(u64, u32)], budget: Budget) -> Result<Self> {
        budget.validate()?;
        let mut seen = BTreeSet::new();
        for &(p, _) in primes {
            require_prime(p)?;
            if !seen.insert(p) {
                return Err(Error::InvalidConfig(format!("prime {p} listed twice")));
            }
        }
        let mut primes = primes.to_vec();
        primes.sort_unstable();
        Ok(TruncatedSpace { primes, budget })
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.primes.iter().map(|&(p, _)| p)
    }

    /// Number of tuples an exhaustive pass visits.
    pub fn tuple_count(&self) -> u128 {
        self.primes
            .iter()
            .map(|&(_, cap)| partitions_up_to(cap).len() as u128)
            .fold(1u128, |a, b| a.saturating_mul(b))
    }
}

/// Measure of `target` inside the finite product space, by visiting every
/// tuple of partitions within the per-prime caps.
///
/// Each visited tuple contributes `prod_p w_p(lam_p) eta(p)` when its group
/// is in the target. Tuples with some part above its cap are not visited;
/// their total mass `1 - prod_p P_p(size <= cap_p)` is added to the upper end.
pub fn truncated_space_measure(target: &Target, space: &TruncatedSpace) -> Result<ProbEnclosure> {
    let tuples = space.tuple_count();
    if tuples > TRUNCATED_TUPLE_CAP {
        return Err(Error::TruncatedSpaceCap {
            tuples,
            cap: TRUNCATED_TUPLE_CAP,
        });
    }
    let budget = &space.budget;
    // Weights as integers over a common denominator per prime.
    let mut locals = Vec::new();
    for &(p, cap) in &space.primes {
        let parts = partitions_up_to(cap);
        let auts: Vec<BigUint> = parts.iter().map(|l| aut_order(p, l)).collect();
        let common = auts.iter().fold(BigUint::one(), |acc, a| acc.lcm(a));
        let numerators: Vec<BigUint> = auts.iter().map(|a| &common / a).collect();
        locals.push(LocalTable {
            prime: p,
            parts,
            numerators,
            common,
        });
    }

    let primes: Vec<u64> = space.primes().collect();
    let mut member_sum = BigUint::zero();
    let mut index = vec![0usize; locals.len()];
    loop {
        let group = FinAbGroup::from_parts(
            locals
                .iter()
                .zip(&index)
                .map(|(t, &i)| (t.prime, t.parts[i].clone())),
        )?;
        if target.contains_at(&group, &primes) {
            let mut w = BigUint::one();
            for (t, &i) in locals.iter().zip(&index) {
                w *= &t.numerators[i];
            }
            member_sum += w;
        }
        // odometer
        let mut k = 0;
        loop {
            if k == locals.len() {
                return Ok(finish_truncated(&locals, member_sum, budget));
            }
            index[k] += 1;
            if index[k] < locals[k].parts.len() {
                break;
            }
            index[k] = 0;
            k += 1;
        }
    }
}

struct LocalTable {
    prime: u64,
    parts: Vec<Partition>,
    numerators: Vec<BigUint>,
    common: BigUint,
}

fn finish_truncated(locals: &[LocalTable], member_sum: BigUint, budget: &Budget) -> ProbEnclosure {
    let bits = budget.precision_bits;
    let denominator: BigUint = locals.iter().map(|t| t.common.clone()).product();
    let members = Rational::new(BigInt::from(member_sum), BigInt::from(denominator));
    let etas = eta_product(locals.iter().map(|t| eta(t.prime, budget)), bits);
    let member_mass = etas.scale(&members);
    // mass of the visited tuples
    let mut visited = ProbEnclosure::one();
    for t in locals {
        let explored: BigUint = t.numerators.iter().sum();
        let w = Rational::new(BigInt::from(explored), BigInt::from(t.common.clone()));
        visited = visited
            .mul(&eta(t.prime, budget).scale(&w))
            .round_outward(bits);
    }
    let unvisited_hi = Rational::one() - visited.lo();
    let hi = member_mass.hi() + unvisited_hi.max(Rational::zero());
    ProbEnclosure::from_ordered(member_mass.lo().clone(), hi)
        .round_outward(bits)
        .clamp_unit()
}

/// Which primes a class rule selects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PrimeClass {
    Primes(BTreeSet<u64>),
    Residue { modulus: u64, residue: u64 },
}

impl PrimeClass {
    pub fn contains(&self, p: u64) -> bool {
        match self {
            PrimeClass::Primes(set) => set.contains(&p),
            PrimeClass::Residue { modulus, residue } => p % modulus == *residue,
        }
    }

    /// The primes of a class that holds only finitely many, if so.
    fn finite_members(&self) -> Option<Vec<u64>> {
        match self {
            PrimeClass::Primes(set) => Some(set.iter().copied().collect()),
            PrimeClass::Residue { modulus, residue } => {
                if residue.gcd(modulus) == 1 {
                    None
                } else {
                    Some(
                        primes_up_to(*modulus)
                            .into_iter()
                            .filter(|p| p % modulus == *residue)
                            .collect(),
                    )
                }
            }
        }
    }
}

impl fmt::Display for PrimeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrimeClass::Primes(set) => {
                let list: Vec<String> = set.iter().map(u64::to_string).collect();
                write!(f, "p={}", list.join(","))
            }
            PrimeClass::Residue { modulus, residue } => write!(f, "mod{modulus}={residue}"),
        }
    }
}

/// A partition of the primes into finitely many classes, each carrying its
/// own uniform property. A prime belongs to the first rule that selects it,
/// and to the default class otherwise.
#[derive(Clone, Debug)]
pub struct PrimeClasses {
    rules: Vec<(PrimeClass, UniformProperty)>,
    default: UniformProperty,
}

impl PrimeClasses {
    pub fn new(
        rules: Vec<(PrimeClass, UniformProperty)>,
        default: UniformProperty,
    ) -> Result<Self> {
        for (class, _) in &rules {
            match class {
                PrimeClass::Primes(set) => {
                    if set.is_empty() {
                        return Err(Error::InvalidConfig("empty prime class".into()));
                    }
                    for &p in set {
                        require_prime(p)?;
                    }
                }
                PrimeClass::Residue { modulus, residue } => {
                    if *modulus == 0 || residue >= modulus {
                        return Err(Error::InvalidConfig(format!(
                            "bad residue class {residue} mod {modulus}"
                        )));
                    }
                }
            }
        }
        Ok(PrimeClasses { rules, default })
    }

    /// Parses `p=2,3:EXPR; mod4=1:EXPR; *:EXPR`. Without a `*` entry the
    /// default class uses `default`.
    pub fn parse(spec: &str, default: UniformProperty) -> Result<Self> {
        let mut rules = Vec::new();
        let mut fallback = default;
        for entry in spec.split(';').map(str::trim).filter(|e| !e.is_empty()) {
            let (selector, expr) = entry.split_once(':').ok_or_else(|| {
                Error::parse(spec, format!("entry `{entry}` needs `selector:property`"))
            })?;
            let property = UniformProperty::parse(expr)?;
            let selector = selector.trim();
            if selector == "*" {
                fallback = property;
            } else if let Some(list) = selector.strip_prefix("p=") {
                let set = list
                    .split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<u64>()
                            .map_err(|e| Error::parse(spec, e.to_string()))
                    })
                    .collect::<Result<BTreeSet<_>>>()?;
                rules.push((PrimeClass::Primes(set), property));
            } else if let Some(rest) = selector.strip_prefix("mod") {
                let (m, r) = rest.split_once('=').ok_or_else(|| {
                    Error::parse(spec, format!("selector `{selector}` needs `modM=R`"))
                })?;
                let modulus = m
                    .trim()
                    .parse::<u64>()
                    .map_err(|e| Error::parse(spec, e.to_string()))?;
                let residue = r
                    .trim()
                    .parse::<u64>()
                    .map_err(|e| Error::parse(spec, e.to_string()))?;
                rules.push((PrimeClass::Residue { modulus, residue }, property));
            } else {
                return Err(Error::parse(spec, format!("unknown selector `{selector}`")));
            }
        }
        PrimeClasses::new(rules, fallback)
    }

    pub fn property_for(&self, p: u64) -> &UniformProperty {
        self.rules
            .iter()
            .find(|(class, _)| class.contains(p))
            .map(|(_, e)| e)
            .unwrap_or(&self.default)
    }

    fn rule_index(&self, p: u64) -> Option<usize> {
        self.rules.iter().position(|(class, _)| class.contains(p))
    }

    /// Whether infinitely many primes fall through to the default class:
    /// some residue coprime to the lcm of all moduli is not claimed by a rule.
    fn default_is_infinite(&self) -> Result<bool> {
        let mut lcm = 1u64;
        for (class, _) in &self.rules {
            if let PrimeClass::Residue { modulus, .. } = class {
                lcm = lcm.lcm(modulus);
                if lcm > RESIDUE_LCM_CAP {
                    return Err(Error::InvalidConfig(format!(
                        "moduli lcm exceeds {RESIDUE_LCM_CAP}"
                    )));
                }
            }
        }
        Ok((0..lcm).any(|r| {
            r.gcd(&lcm) == 1
                && !self.rules.iter().any(|(class, _)| match class {
                    PrimeClass::Residue { modulus, residue } if residue.gcd(modulus) == 1 => {
                        r % modulus == *residue
                    }
                    _ => false,
                })
        }))
    }

    /// Properties attached to classes with infinitely many primes.
    fn infinite_class_properties(&self) -> Result<Vec<&UniformProperty>> {
        let mut out: Vec<&UniformProperty> = self
            .rules
            .iter()
            .filter(|(class, _)| class.finite_members().is_none())
            .map(|(_, e)| e)
            .collect();
        if self.default_is_infinite()? {
            out.push(&self.default);
        }
        Ok(out)
    }
}

impl fmt::Display for PrimeClasses {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (class, e) in &self.rules {
            write!(f, "{class}:{e}; ")?;
        }
        write!(f, "*:{}", self.default)
    }
}

/// `prod_p P_p(E_class(p))` over the primes, each prime using the property of
/// its class. Zero whenever a class with infinitely many primes uses a
/// property rejecting `()` or `(1)`. Excluded primes are dropped; primes of
/// finite classes above the cutoff are still included exactly.
pub fn measure_with_classes(classes: &PrimeClasses, cfg: &GlobalConfig) -> Result<ProbEnclosure> {
    if classes
        .infinite_class_properties()?
        .iter()
        .any(|e| !e.accepts_zero_and_one())
    {
        return Ok(ProbEnclosure::zero());
    }
    let budget = &cfg.local_budget;
    let mut primes: BTreeSet<u64> = cfg.included_primes().into_iter().collect();
    for (class, _) in &classes.rules {
        if let Some(members) = class.finite_members() {
            primes.extend(members.into_iter().filter(|p| {
                is_prime(*p) && !cfg.excluded_primes.contains(p) && classes.rule_index(*p).is_some()
            }));
        }
    }
    let primes: Vec<u64> = primes.into_iter().collect();
    let mut tables: Vec<FiberTable> = classes
        .rules
        .iter()
        .map(|(_, e)| FiberTable::new(e, budget))
        .collect();
    tables.push(FiberTable::new(&classes.default, budget));
    let default_index = tables.len() - 1;
    let product = product_over(&primes, budget, |p| {
        &tables[classes.rule_index(p).unwrap_or(default_index)]
    });
    Ok(product
        .mul(&cfg.prime_tail())
        .round_outward(budget.precision_bits)
        .clamp_unit())
}

/// Partial products `prod_{p <= x, p does not divide n} hi(P_p({()}))` along
/// an increasing schedule of cutoffs. Each is an upper bound on the measure
/// of any set of groups of fixed order `n`, and they decrease to zero.
pub fn nonmeasurability_demo(
    n: u64,
    schedule: &[u64],
    budget: &Budget,
) -> Result<Vec<(u64, Rational)>> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be positive".into()));
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "cutoff schedule must be increasing".into(),
        ));
    }
    let Some(&last) = schedule.last() else {
        return Ok(Vec::new());
    };
    let trivial = FiberTable::explicit([&Partition::empty()]);
    let mut out = Vec::with_capacity(schedule.len());
    let mut product = Rational::one();
    let mut next = schedule.iter().peekable();
    for p in primes_up_to(last) {
        while let Some(&&x) = next.peek() {
            if p > x {
                out.push((x, product.clone()));
                next.next();
            } else {
                break;
            }
        }
        if !n.is_multiple_of(p) {
            let factor = trivial.probability(p, budget);
            product = crate::enclosure::round_up(&(product * factor.hi()), budget.precision_bits);
        }
    }
    for &x in next {
        out.push((x, product.clone()));
    }
    Ok(out)
}

/// `eta(p)` for the given primes and the measure of the fiber `{(), (1)}`,
/// i.e. `prod_{i >= 2} zeta(i)^-1`.
pub fn constants(
    primes: &[u64],
    cfg: &GlobalConfig,
) -> Result<(Vec<(u64, ProbEnclosure)>, ProbEnclosure)> {
    let etas = primes
        .iter()
        .map(|&p| {
            require_prime(p)?;
            Ok((p, eta(p, &cfg.local_budget)))
        })
        .collect::<Result<Vec<_>>>()?;
    let fiber = UniformProperty::member_of([Partition::empty(), Partition::single(1)]);
    Ok((etas, measure_property(&fiber, cfg)))
}

/// Mass of all tuples with some part above its cap, per prime `tail_weight_bound`.
/// Used by callers that want a bound without running the exhaustive pass.
pub fn unexplored_mass_bound(space: &TruncatedSpace) -> Rational {
    space
        .primes
        .iter()
        .map(|&(p, cap)| tail_weight_bound(p, cap))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(x: u64) -> GlobalConfig {
        GlobalConfig::new(x, Budget::new(16, 64).unwrap()).unwrap()
    }

    fn zero_one() -> UniformProperty {
        UniformProperty::member_of([Partition::empty(), Partition::single(1)])
    }

    #[test]
    fn always_contains_one() {
        let e = measure_property(&UniformProperty::always(), &cfg(100));
        assert!(e.contains(&Rational::one()));
    }

    #[test]
    fn zero_short_circuit() {
        for e in [
            UniformProperty::member_of([Partition::empty()]),
            UniformProperty::rank_le(0),
            UniformProperty::never(),
            UniformProperty::member_of([Partition::single(1)]),
        ] {
            assert_eq!(
                measure_property(&e, &cfg(1000)),
                ProbEnclosure::zero(),
                "{e}"
            );
        }
    }

    #[test]
    fn zero_one_fiber_constant() {
        let e = measure_property(&zero_one(), &cfg(2000));
        // prod_{i >= 2} zeta(i)^-1 = 0.4357570767...
        assert!(e.contains_f64(0.435_757_076_7));
        assert!(e.width_f64() < 1.0 / 1000.0);
    }

    #[test]
    fn width_is_prime_tail_plus_local_widths() {
        let c = cfg(500);
        let e = UniformProperty::rank_le(2);
        let m = measure_property(&e, &c);
        let table = FiberTable::new(&e, &c.local_budget);
        let local: f64 = primes_up_to(500)
            .into_iter()
            .map(|p| table.probability(p, &c.local_budget).width_f64())
            .sum();
        assert!(m.width_f64() <= 1.0 / 500.0 + local + 1e-12);
    }

    #[test]
    fn oset_duplicates_and_always() {
        let c = cfg(200);
        let one = measure_o(&OSet::new(vec![UniformProperty::always()]).unwrap(), &c).unwrap();
        assert!(one.contains(&Rational::one()));
        let e = UniformProperty::rank_le(1);
        let single = measure_property(&e, &c);
        let dup = measure_o(&OSet::new(vec![e.clone(), e.clone()]).unwrap(), &c).unwrap();
        assert!(dup.intersects(&single));
        assert!(dup.width() >= single.width());
    }

    #[test]
    fn dset_basic_cases() {
        let c = cfg(100);
        let e = vec![UniformProperty::rank_le(1)];
        let empty = measure_d(&DSet::new(e.clone(), e.clone()), &c).unwrap();
        assert!(empty.contains(&Rational::zero()));
        let all = measure_d(&DSet::new(vec![UniformProperty::always()], vec![]), &c).unwrap();
        assert!(all.contains(&Rational::one()));
    }

    #[test]
    fn inclusion_exclusion_limit() {
        let many: Vec<_> = (0..13).map(UniformProperty::rank_le).collect();
        assert!(matches!(
            measure_o(&OSet::new(many).unwrap(), &cfg(10)),
            Err(Error::InclusionExclusionLimit { members: 13, .. })
        ));
    }

    #[test]
    fn truncated_space_trivial_cases() {
        let b = Budget::new(4, 64).unwrap();
        let empty = TruncatedSpace::uniform(&[], b).unwrap();
        let always = Target::Property(UniformProperty::always());
        let never = Target::Property(UniformProperty::never());
        assert_eq!(
            truncated_space_measure(&always, &empty).unwrap(),
            ProbEnclosure::one()
        );
        // With no primes every condition is vacuous.
        assert_eq!(
            truncated_space_measure(&never, &empty).unwrap(),
            ProbEnclosure::one()
        );
        let one = TruncatedSpace::uniform(&[3], b).unwrap();
        let nothing = truncated_space_measure(&never, &one).unwrap();
        assert!(nothing.lo() == &Rational::zero() && nothing.hi_f64() < 0.01);

        let two = TruncatedSpace::uniform(&[2], Budget::new(6, 64).unwrap()).unwrap();
        let zo = Target::Property(zero_one());
        let brute = truncated_space_measure(&zo, &two).unwrap();
        let direct =
            crate::localmeasure::local_probability(2, &zero_one(), &Budget::new(6, 64).unwrap())
                .unwrap();
        assert!(brute.intersects(&direct));
        assert!((brute.lo_f64() - direct.lo_f64()).abs() < 1e-15);
    }

    #[test]
    fn truncated_matches_product_formula() {
        let b = Budget::new(5, 64).unwrap();
        let space = TruncatedSpace::uniform(&[2, 3], b).unwrap();
        let formula = MeasureSpace::truncated(&[2, 3], b).unwrap();
        let cyclic = UniformProperty::member_of([Partition::single(1)]);
        for e in [
            UniformProperty::rank_le(1),
            UniformProperty::usize_le(2),
            zero_one(),
            cyclic.clone(),
        ] {
            let t = Target::Property(e.clone());
            let brute = truncated_space_measure(&t, &space).unwrap();
            let product = formula.measure_property(&e);
            assert!(brute.intersects(&product), "{e}: {brute} vs {product}");
        }
        let d = DSet::new(
            vec![UniformProperty::rank_le(2)],
            vec![UniformProperty::rank_le(1)],
        );
        let brute = truncated_space_measure(&Target::D(d.clone()), &space).unwrap();
        let ie = formula.measure_d(&d).unwrap();
        assert!(brute.intersects(&ie));
        let normalized = truncated_space_measure(&Target::D(d.normalize()), &space).unwrap();
        assert_eq!(brute, normalized);
        // Only the listed primes count: Z/6 is in `member{1}` here.
        let o = OSet::new(vec![
            UniformProperty::member_of([Partition::empty()]),
            cyclic,
        ])
        .unwrap();
        let brute = truncated_space_measure(&Target::O(o.clone()), &space).unwrap();
        assert!(brute.intersects(&formula.measure_o(&o).unwrap()));
        assert!(brute.lo_f64() > 0.24);
    }

    #[test]
    fn truncated_cap_is_enforced() {
        let space = TruncatedSpace::uniform(&[2, 3, 5, 7], Budget::new(30, 8).unwrap()).unwrap();
        assert!(matches!(
            truncated_space_measure(&Target::Property(UniformProperty::always()), &space),
            Err(Error::TruncatedSpaceCap { .. })
        ));
    }

    #[test]
    fn classes_parse_and_select() {
        let c = PrimeClasses::parse(
            "p=2:always; mod4=1:rank<=1; *:usize<=1",
            UniformProperty::never(),
        )
        .unwrap();
        assert_eq!(c.property_for(2).to_string(), "always");
        assert_eq!(c.property_for(13).to_string(), "rank<=1");
        assert_eq!(c.property_for(7).to_string(), "usize<=1");
        assert!(c.default_is_infinite().unwrap());
        let covered =
            PrimeClasses::parse("mod4=1:always; mod4=3:always", UniformProperty::never()).unwrap();
        assert!(!covered.default_is_infinite().unwrap());
        assert!(PrimeClasses::parse("q=2:always", UniformProperty::always()).is_err());
        assert!(PrimeClasses::parse("mod4=5:always", UniformProperty::always()).is_err());
    }

    #[test]
    fn uniform_classes_equal_plain_measure() {
        let c = cfg(300);
        let e = UniformProperty::rank_le(1);
        let classes = PrimeClasses::new(vec![], e.clone()).unwrap();
        assert_eq!(
            measure_with_classes(&classes, &c).unwrap(),
            measure_property(&e, &c)
        );
    }

    #[test]
    fn class_two_always_is_odd_prime_measure() {
        let c = cfg(300);
        let e = UniformProperty::rank_le(1);
        let classes = PrimeClasses::new(
            vec![(PrimeClass::Primes([2].into()), UniformProperty::always())],
            e.clone(),
        )
        .unwrap();
        let with_classes = measure_with_classes(&classes, &c).unwrap();
        let odd = measure_property(&e, &c.clone().excluding([2]).unwrap());
        assert!(with_classes.intersects(&odd));
    }

    #[test]
    fn class_zero_law_only_for_infinite_classes() {
        let c = cfg(100);
        let finite = PrimeClasses::new(
            vec![(
                PrimeClass::Primes([3].into()),
                UniformProperty::member_of([Partition::single(1)]),
            )],
            zero_one(),
        )
        .unwrap();
        assert!(measure_with_classes(&finite, &c).unwrap().lo() > &Rational::zero());
        let infinite = PrimeClasses::new(
            vec![(
                PrimeClass::Residue {
                    modulus: 4,
                    residue: 3,
                },
                UniformProperty::member_of([Partition::empty()]),
            )],
            zero_one(),
        )
        .unwrap();
        assert_eq!(
            measure_with_classes(&infinite, &c).unwrap(),
            ProbEnclosure::zero()
        );
    }

    #[test]
    fn demo_partial_products_decrease() {
        let rows = nonmeasurability_demo(12, &[10, 100, 1000], &Budget::default()).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.windows(2).all(|w| w[1].1 < w[0].1));
        // factor at 5 and 7 only for x = 10
        let b = Budget::default();
        let t = FiberTable::explicit([&Partition::empty()]);
        let expect = crate::enclosure::round_up(
            &(crate::enclosure::round_up(&t.probability(5, &b).hi().clone(), b.precision_bits)
                * t.probability(7, &b).hi()),
            b.precision_bits,
        );
        assert_eq!(rows[0].1, expect);
        assert!(nonmeasurability_demo(12, &[100, 10], &b).is_err());
    }

    #[test]
    fn expected_rank_enclosure() {
        let c = cfg(200);
        let capped = MeasureSpace::Global(c.clone())
            .expected_value(Quantity::Rank, Some(1), 0)
            .unwrap();
        // min(rank, 1) = 1 - [trivial], and P(trivial) = 0
        assert!(capped.contains(&Rational::one()));
        let full = MeasureSpace::Global(c)
            .expected_value(Quantity::Rank, None, 12)
            .unwrap();
        assert!(full.lo() >= capped.lo());
        assert!(quantity_series_tail(48) < ratio(1, 100));
        assert!(quantity_series_tail(24) < quantity_series_tail(12));
    }
}
