//! Finitely additive alternatives to the global measure: the content on sets
//! specified at finitely many primes, the content obtained by ordering
//! groups by their order, and densities of group sequences.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::abelian::FinAbGroup;
use crate::enclosure::{ProbEnclosure, Rational};
use crate::error::{Error, Result};
use crate::localmeasure::{local_probability, local_probability_of_set, Budget};
use crate::partitions::{enumerate_partitions, Partition};
use crate::primes::{factorize, require_prime, FACTORIZATION_CAP};
use crate::properties::UniformProperty;

/// The allowed p-parts of a cell at one prime.
#[derive(Clone, Debug)]
pub enum LocalDescriptor {
    Explicit(BTreeSet<Partition>),
    Predicate(UniformProperty),
}

impl LocalDescriptor {
    /// `member{...}` on its own is read as an explicit set; anything else is
    /// a predicate.
    pub fn parse(expr: &str) -> Result<Self> {
        let t = expr.trim();
        if let Some(body) = t.strip_prefix("member{").and_then(|r| r.strip_suffix('}')) {
            if !body.contains(['{', '}']) {
                let set = body
                    .split('|')
                    .map(str::parse)
                    .collect::<Result<BTreeSet<Partition>>>()?;
                return Ok(LocalDescriptor::Explicit(set));
            }
        }
        UniformProperty::parse(t).map(LocalDescriptor::Predicate)
    }

    fn probability(&self, p: u64, budget: &Budget) -> Result<ProbEnclosure> {
        match self {
            LocalDescriptor::Explicit(set) => local_probability_of_set(p, set, budget),
            LocalDescriptor::Predicate(e) => local_probability(p, e, budget),
        }
    }

    /// `Some(true)` if the two local sets meet, `Some(false)` if they are
    /// disjoint, `None` if that cannot be decided from predicates alone.
    fn meets(&self, other: &LocalDescriptor) -> Option<bool> {
        use LocalDescriptor::*;
        match (self, other) {
            (Explicit(a), Explicit(b)) => Some(!a.is_disjoint(b)),
            (Explicit(a), Predicate(e)) | (Predicate(e), Explicit(a)) => {
                Some(a.iter().any(|l| e.holds(l)))
            }
            (Predicate(_), Predicate(_)) => None,
        }
    }
}

impl fmt::Display for LocalDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalDescriptor::Explicit(set) => {
                write!(f, "{}", UniformProperty::member_of(set.iter().cloned()))
            }
            LocalDescriptor::Predicate(e) => write!(f, "{e}"),
        }
    }
}

/// A product of local sets over the support; primes of the support missing
/// from the map are unconstrained.
#[derive(Clone, Debug, Default)]
pub struct Cell {
    local: BTreeMap<u64, LocalDescriptor>,
}

impl Cell {
    pub fn new() -> Self {
        Cell::default()
    }

    pub fn with(mut self, p: u64, descriptor: LocalDescriptor) -> Self {
        self.local.insert(p, descriptor);
        self
    }

    /// `2:member{()|1}; 3:rank<=1`
    pub fn parse(spec: &str) -> Result<Self> {
        let mut cell = Cell::new();
        for entry in spec.split(';').map(str::trim).filter(|e| !e.is_empty()) {
            let (p, expr) = entry
                .split_once(':')
                .ok_or_else(|| Error::parse(spec, format!("entry `{entry}` needs `prime:set`")))?;
            let p: u64 = p
                .trim()
                .parse()
                .map_err(|e| Error::parse(spec, format!("{e}")))?;
            if cell
                .local
                .insert(p, LocalDescriptor::parse(expr)?)
                .is_some()
            {
                return Err(Error::parse(spec, format!("prime {p} given twice")));
            }
        }
        Ok(cell)
    }

    /// Primes this cell constrains.
    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.local.keys().copied()
    }

    fn descriptor(&self, p: u64) -> LocalDescriptor {
        self.local
            .get(&p)
            .cloned()
            .unwrap_or_else(|| LocalDescriptor::Predicate(UniformProperty::always()))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.local.iter().map(|(p, d)| format!("{p}:{d}")).collect();
        f.write_str(&items.join("; "))
    }
}

/// A finite disjoint union of cells, each a set of groups specified only at
/// the primes of the support `I` and arbitrary elsewhere.
#[derive(Clone, Debug)]
pub struct AlgebraSet {
    support: BTreeSet<u64>,
    cells: Vec<Cell>,
}

impl AlgebraSet {
    /// Checks primes and pairwise disjointness. Two cells are rejected when
    /// their local sets provably meet at every prime of the support; pairs
    /// separated only by predicate-vs-predicate comparisons are trusted.
    pub fn new(support: BTreeSet<u64>, cells: Vec<Cell>) -> Result<Self> {
        for &p in &support {
            require_prime(p)?;
        }
        for (i, cell) in cells.iter().enumerate() {
            if let Some(p) = cell.local.keys().find(|p| !support.contains(p)) {
                return Err(Error::InvalidConfig(format!(
                    "cell {i} constrains prime {p} outside the support"
                )));
            }
        }
        for i in 0..cells.len() {
            for j in i + 1..cells.len() {
                let verdicts: Vec<Option<bool>> = support
                    .iter()
                    .map(|&p| cells[i].descriptor(p).meets(&cells[j].descriptor(p)))
                    .collect();
                if verdicts.iter().all(|v| *v == Some(true)) {
                    return Err(Error::OverlappingCells {
                        first: i,
                        second: j,
                    });
                }
            }
        }
        Ok(AlgebraSet { support, cells })
    }

    pub fn support(&self) -> &BTreeSet<u64> {
        &self.support
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Disjoint union on a common support.
    pub fn union(&self, other: &AlgebraSet) -> Result<AlgebraSet> {
        if self.support != other.support {
            return Err(Error::InvalidConfig("union needs a common support".into()));
        }
        let cells = self.cells.iter().chain(&other.cells).cloned().collect();
        AlgebraSet::new(self.support.clone(), cells)
    }
}

/// `sum_cells prod_{p in I} P_p(cell_p)`.
pub fn content(set: &AlgebraSet, budget: &Budget) -> Result<ProbEnclosure> {
    let mut total = ProbEnclosure::zero();
    for cell in &set.cells {
        let mut product = ProbEnclosure::one();
        for &p in &set.support {
            product = product
                .mul(&cell.descriptor(p).probability(p, budget)?)
                .round_outward(budget.precision_bits);
        }
        total = total.add(&product);
    }
    Ok(total.clamp_unit())
}

/// Every group of order `n`, one per choice of partition at each prime.
pub fn enumerate_groups_of_order(n: u64) -> Result<Vec<FinAbGroup>> {
    let mut groups = vec![FinAbGroup::trivial()];
    for (p, e) in factorize(n, FACTORIZATION_CAP)? {
        let locals = enumerate_partitions(e);
        let mut next = Vec::with_capacity(groups.len() * locals.len());
        for g in &groups {
            for lam in &locals {
                let parts = g
                    .parts()
                    .map(|(q, l)| (q, l.clone()))
                    .chain(std::iter::once((p, lam.clone())));
                next.push(FinAbGroup::from_parts(parts)?);
            }
        }
        groups = next;
    }
    Ok(groups)
}

/// The weighted share of `members` among groups of order `< x'`, for every
/// `2 <= x' <= x`: `sum_{G in S, |G| < x'} w(G) / sum_{|G| < x'} w(G)`.
pub fn weight_ordered_content<F>(members: F, x: u64) -> Result<Vec<(u64, Rational)>>
where
    F: Fn(&FinAbGroup) -> bool,
{
    if x < 2 {
        return Err(Error::InvalidConfig(
            "order cutoff must be at least 2".into(),
        ));
    }
    let mut numerator = Rational::from_integer(0.into());
    let mut denominator = Rational::from_integer(0.into());
    let mut rows = Vec::with_capacity(x as usize - 1);
    for n in 1..x {
        for g in enumerate_groups_of_order(n)? {
            let w = g.weight();
            if members(&g) {
                numerator += &w;
            }
            denominator += w;
        }
        rows.push((n + 1, &numerator / &denominator));
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityReport {
    /// `(n, #{k <= n : G_k in S} / n)` at each checkpoint reached.
    pub rows: Vec<(u64, Rational)>,
    pub total: u64,
    pub members: u64,
}

/// Running densities of a group sequence at the given checkpoints.
pub fn sequence_density<I, F>(stream: I, members: F, checkpoints: &[u64]) -> Result<DensityReport>
where
    I: IntoIterator<Item = Result<FinAbGroup>>,
    F: Fn(&FinAbGroup) -> bool,
{
    let mut marks: Vec<u64> = checkpoints.iter().copied().filter(|&c| c > 0).collect();
    marks.sort_unstable();
    marks.dedup();
    let mut next = marks.iter().peekable();
    let mut rows = Vec::new();
    let (mut n, mut count) = (0u64, 0u64);
    for g in stream {
        let g = g?;
        n += 1;
        if members(&g) {
            count += 1;
        }
        if next.peek() == Some(&&n) {
            rows.push((n, Rational::new(count.into(), n.into())));
            next.next();
        }
    }
    Ok(DensityReport {
        rows,
        total: n,
        members: count,
    })
}
