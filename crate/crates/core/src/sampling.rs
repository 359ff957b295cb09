//! Exact sampling from the local distributions `P_p`, the product sampler on
//! a finite set of primes, and the equidistribution harness.
//!
//! All randomness comes from ChaCha20 as implemented by `rand_chacha` 0.3,
//! seeded with `ChaCha20Rng::seed_from_u64(seed)`. Uniform integers below a
//! bound are drawn with `num_bigint::RandBigInt::gen_biguint_below`.
//!
//! There is deliberately no sampler over all primes: the global measure is
//! not a probability space one can draw from.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::abelian::{aut_order, FinAbGroup};
use crate::enclosure::{rational_text, ProbEnclosure, Rational};
use crate::error::{Error, Result};
use crate::globalmeasure::Quantity;
use crate::localmeasure::{eta, Budget};
use crate::partitions::{enumerate_partitions, Partition};
use crate::primes::require_prime;
use crate::properties::Target;

/// Name of the pinned generator, echoed in run manifests.
pub const RNG_NAME: &str = "chacha20 (rand_chacha 0.3, seed_from_u64)";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplerConfig {
    pub seed: u64,
    /// Total-variation budget for cutting off the size distribution.
    pub epsilon: Rational,
    /// Largest partition size the sampler may tabulate.
    pub partition_cap: u32,
}

impl SamplerConfig {
    pub fn new(seed: u64) -> Self {
        SamplerConfig {
            seed,
            epsilon: Rational::new(BigInt::one(), BigInt::from(1_000_000u32)),
            partition_cap: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon <= Rational::zero() || self.epsilon >= Rational::one() {
            return Err(Error::InvalidConfig("epsilon must lie in (0, 1)".into()));
        }
        if self.partition_cap == 0 {
            return Err(Error::InvalidConfig(
                "partition cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Running sums of nonnegative integer weights; drawing inverts them exactly.
#[derive(Clone, Debug)]
struct Cumulative(Vec<BigUint>);

impl Cumulative {
    fn new<I: IntoIterator<Item = BigUint>>(weights: I) -> Self {
        let mut acc = BigUint::zero();
        Cumulative(
            weights
                .into_iter()
                .map(|w| {
                    acc += w;
                    acc.clone()
                })
                .collect(),
        )
    }

    fn total(&self) -> &BigUint {
        self.0.last().expect("nonempty table")
    }

    fn draw(&self, rng: &mut ChaCha20Rng) -> usize {
        let u = rng.gen_biguint_below(self.total());
        self.0.partition_point(|c| *c <= u)
    }
}

/// Inversion tables for one prime.
#[derive(Clone, Debug)]
struct LocalTable {
    sizes: Cumulative,
    /// Per size: partitions in descending lexicographic order and their
    /// cumulative weights scaled by the lcm of the automorphism orders.
    shapes: Vec<(Vec<Partition>, Cumulative)>,
}

impl LocalTable {
    /// Tabulates sizes `0..=K` for the least `K` whose explored mass
    /// `eta(p) * sum_{n <= K} s_p(n)` is provably at least `1 - epsilon`.
    /// The leftover mass is redistributed proportionally over the explored
    /// sizes, so the law differs from `P_p` by at most `epsilon` in total
    /// variation.
    fn build(p: u64, cfg: &SamplerConfig) -> Result<Self> {
        require_prime(p)?;
        let eta_lo = eta(p, &Budget::default()).lo().clone();
        let target = Rational::one() - &cfg.epsilon;
        let mut shapes = Vec::new();
        let mut size_weights: Vec<(BigUint, BigUint)> = Vec::new();
        let mut explored = Rational::zero();
        for n in 0..=cfg.partition_cap {
            let parts = enumerate_partitions(n);
            let auts: Vec<BigUint> = parts.iter().map(|l| aut_order(p, l)).collect();
            let lcm = auts.iter().fold(BigUint::one(), |a, b| a.lcm(b));
            let scaled: Vec<BigUint> = auts.iter().map(|a| &lcm / a).collect();
            let table = Cumulative::new(scaled);
            explored += Rational::new(to_int(table.total()), to_int(&lcm));
            size_weights.push((table.total().clone(), lcm));
            shapes.push((parts, table));
            if &explored * &eta_lo >= target {
                let common = size_weights
                    .iter()
                    .fold(BigUint::one(), |a, (_, l)| a.lcm(l));
                let sizes = Cumulative::new(size_weights.iter().map(|(t, l)| t * (&common / l)));
                return Ok(LocalTable { sizes, shapes });
            }
        }
        Err(Error::SamplerBudget {
            prime: p,
            budget: cfg.partition_cap,
            achieved: rational_text(&(&explored * &eta_lo)),
        })
    }

    fn draw(&self, rng: &mut ChaCha20Rng) -> Partition {
        let n = self.sizes.draw(rng);
        let (parts, table) = &self.shapes[n];
        parts[table.draw(rng)].clone()
    }

    fn max_size(&self) -> u32 {
        self.shapes.len() as u32 - 1
    }

    fn size_probability(&self, n: u32) -> Rational {
        let c = &self.sizes.0;
        let Some(hi) = c.get(n as usize) else {
            return Rational::zero();
        };
        let lo = if n == 0 {
            BigUint::zero()
        } else {
            c[n as usize - 1].clone()
        };
        Rational::new(to_int(&(hi - lo)), to_int(self.sizes.total()))
    }
}

fn to_int(n: &BigUint) -> BigInt {
    BigInt::from(n.clone())
}

/// Sampler for the local distributions, building tables per prime on first
/// use.
#[derive(Clone, Debug)]
pub struct LocalSampler {
    cfg: SamplerConfig,
    rng: ChaCha20Rng,
    tables: BTreeMap<u64, LocalTable>,
}

impl LocalSampler {
    pub fn new(cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(LocalSampler {
            rng: ChaCha20Rng::seed_from_u64(cfg.seed),
            cfg,
            tables: BTreeMap::new(),
        })
    }

    fn table(&mut self, p: u64) -> Result<&LocalTable> {
        if !self.tables.contains_key(&p) {
            let t = LocalTable::build(p, &self.cfg)?;
            self.tables.insert(p, t);
        }
        Ok(&self.tables[&p])
    }

    pub fn sample(&mut self, p: u64) -> Result<Partition> {
        self.table(p)?;
        let table = &self.tables[&p];
        Ok(table.draw(&mut self.rng))
    }

    /// Exact probability the sampler assigns to size `n` at `p`.
    pub fn size_probability(&mut self, p: u64, n: u32) -> Result<Rational> {
        Ok(self.table(p)?.size_probability(n))
    }

    /// Largest size the sampler can produce at `p`.
    pub fn max_size(&mut self, p: u64) -> Result<u32> {
        Ok(self.table(p)?.max_size())
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }
}

/// One draw from `P_p` with a fresh generator.
pub fn sample_local(p: u64, cfg: &SamplerConfig) -> Result<Partition> {
    LocalSampler::new(cfg.clone())?.sample(p)
}

/// Product sampler over a finite set of primes: independent local draws,
/// in increasing prime order, assembled into one group.
#[derive(Clone, Debug)]
pub struct GroupSampler {
    primes: Vec<u64>,
    local: LocalSampler,
}

impl GroupSampler {
    pub fn new(primes: &BTreeSet<u64>, cfg: SamplerConfig) -> Result<Self> {
        let mut local = LocalSampler::new(cfg)?;
        for &p in primes {
            local.table(p)?;
        }
        Ok(GroupSampler {
            primes: primes.iter().copied().collect(),
            local,
        })
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn sample(&mut self) -> Result<FinAbGroup> {
        let mut parts = Vec::with_capacity(self.primes.len());
        for &p in &self.primes {
            parts.push((p, self.local.sample(p)?));
        }
        FinAbGroup::from_parts(parts)
    }
}

impl Iterator for GroupSampler {
    type Item = Result<FinAbGroup>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.sample())
    }
}

/// One draw from the product space over `primes` with a fresh generator.
pub fn sample_group(primes: &BTreeSet<u64>, cfg: &SamplerConfig) -> Result<FinAbGroup> {
    GroupSampler::new(primes, cfg.clone())?.sample()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: u64,
    pub p_value: f64,
}

impl ChiSquareTest {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Pearson's test of independence on a contingency table.
pub fn chi_square_independence(table: &[Vec<u64>]) -> Result<ChiSquareTest> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows < 2 || cols < 2 || table.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidConfig(
            "contingency table must be at least 2x2 and rectangular".into(),
        ));
    }
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_sums: Vec<f64> = (0..cols)
        .map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64)
        .collect();
    let total: f64 = row_sums.iter().sum();
    if row_sums.iter().chain(&col_sums).any(|&s| s == 0.0) {
        return Err(Error::InvalidConfig(
            "contingency table has an empty row or column".into(),
        ));
    }
    let mut statistic = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let expected = row_sums[i] * col_sums[j] / total;
            statistic += (obs as f64 - expected).powi(2) / expected;
        }
    }
    let dof = ((rows - 1) * (cols - 1)) as u64;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        degrees_of_freedom: dof,
        p_value: dist.sf(statistic),
    })
}

/// The functions the harness can average: indicators of targets and the
/// integer quantities, optionally capped.
#[derive(Clone, Debug)]
pub enum TestFunction {
    Indicator(Target),
    Quantity {
        quantity: Quantity,
        cap: Option<u32>,
    },
}

impl TestFunction {
    /// `rank`, `min(uexp,8)`, or any target expression.
    pub fn parse(input: &str) -> Result<Self> {
        let t = input.trim();
        if let Some(q) = Quantity::parse(t) {
            return Ok(TestFunction::Quantity {
                quantity: q,
                cap: None,
            });
        }
        if let Some(body) = t.strip_prefix("min(").and_then(|r| r.strip_suffix(')')) {
            if let Some((q, k)) = body.split_once(',') {
                if let Some(quantity) = Quantity::parse(q) {
                    let k = k
                        .trim()
                        .parse()
                        .map_err(|e| Error::parse(input, format!("bad cap: {e}")))?;
                    return Ok(TestFunction::Quantity {
                        quantity,
                        cap: Some(k),
                    });
                }
            }
        }
        Target::parse(t).map(TestFunction::Indicator)
    }

    pub fn evaluate(&self, group: &FinAbGroup) -> u64 {
        self.evaluate_in(group, None)
    }

    /// With `Some(primes)`, indicators are read in the finite product over
    /// those primes (see [`Target::contains_at`]).
    pub fn evaluate_in(&self, group: &FinAbGroup, primes: Option<&[u64]>) -> u64 {
        match self {
            TestFunction::Indicator(t) => u64::from(match primes {
                Some(ps) => t.contains_at(group, ps),
                None => t.contains(group),
            }),
            TestFunction::Quantity { quantity, cap } => {
                let v = quantity.evaluate(group);
                u64::from(cap.map_or(v, |k| v.min(k)))
            }
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Indicator(t) => write!(f, "{t}"),
            TestFunction::Quantity {
                quantity,
                cap: None,
            } => write!(f, "{quantity}"),
            TestFunction::Quantity {
                quantity,
                cap: Some(k),
            } => write!(f, "min({quantity},{k})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquidistributionReport {
    /// Running empirical means at the checkpoints reached.
    pub checkpoints: Vec<(u64, Rational)>,
    pub count: u64,
    pub mean: Rational,
    /// Sample standard deviation over `sqrt(count)`.
    pub std_error: f64,
    pub reference: ProbEnclosure,
    pub pass: bool,
}

impl EquidistributionReport {
    /// `[lo - 3 se, hi + 3 se]`.
    pub fn acceptance_band(&self) -> (Rational, Rational) {
        let slack = Rational::from_float(3.0 * self.std_error).unwrap_or_else(Rational::zero);
        (self.reference.lo() - &slack, self.reference.hi() + &slack)
    }
}

/// Folds a stream into running means of `f` and compares the final mean with
/// the reference enclosure.
pub fn equidistribution_report<I>(
    stream: I,
    f: &TestFunction,
    reference: &ProbEnclosure,
    checkpoints: &[u64],
) -> Result<EquidistributionReport>
where
    I: IntoIterator<Item = Result<FinAbGroup>>,
{
    equidistribution_report_in(stream, f, reference, checkpoints, None)
}

/// [`equidistribution_report`] with `f` read in the finite product over
/// `primes` when given, matching a reference computed on that space.
pub fn equidistribution_report_in<I>(
    stream: I,
    f: &TestFunction,
    reference: &ProbEnclosure,
    checkpoints: &[u64],
    primes: Option<&[u64]>,
) -> Result<EquidistributionReport>
where
    I: IntoIterator<Item = Result<FinAbGroup>>,
{
    let mut marks: Vec<u64> = checkpoints.iter().copied().filter(|&c| c > 0).collect();
    marks.sort_unstable();
    marks.dedup();
    let mut next = marks.iter().peekable();
    let (mut n, mut sum, mut sum_sq) = (0u64, 0u128, 0u128);
    let mut rows = Vec::new();
    for g in stream {
        let v = f.evaluate_in(&g?, primes) as u128;
        n += 1;
        sum += v;
        sum_sq += v * v;
        if next.peek() == Some(&&n) {
            rows.push((n, Rational::new(BigInt::from(sum), BigInt::from(n))));
            next.next();
        }
    }
    if n == 0 {
        return Err(Error::InvalidConfig("empty group stream".into()));
    }
    let mean = Rational::new(BigInt::from(sum), BigInt::from(n));
    let std_error = if n < 2 {
        0.0
    } else {
        let num = BigInt::from(n) * BigInt::from(sum_sq) - BigInt::from(sum) * BigInt::from(sum);
        let var = Rational::new(num, BigInt::from(n) * BigInt::from(n - 1));
        (var.to_f64().unwrap_or(0.0) / n as f64).sqrt()
    };
    let mut report = EquidistributionReport {
        checkpoints: rows,
        count: n,
        mean,
        std_error,
        reference: reference.clone(),
        pass: false,
    };
    let (lo, hi) = report.acceptance_band();
    report.pass = lo <= report.mean && report.mean <= hi;
    Ok(report)
}
