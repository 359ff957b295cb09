//! Uniform properties and the O/D set algebra built from them.
//!
//! A uniform property is a predicate `E` on partitions. A group `G` has the
//! property when every p-part does, including the (empty) p-parts at all
//! primes not dividing `#G`. The set of such groups is `O(E)`.
//!
//! Two facts shape the API:
//!
//! - `O(E1 & E2) = O(E1) ∩ O(E2)`, but `O(E1 | E2)` is in general strictly
//!   larger than `O(E1) ∪ O(E2)`: the `or` combinator acts prime by prime.
//!   Unions of fibers are expressed with [`OSet`].
//! - `!E` is again a uniform property whose O-set is "every p-part fails E",
//!   not the complement of `O(E)`. Complements live in [`DSet`].
//!
//! # Expression language
//!
//! ```text
//! expr   := unary ('&' unary)* | unary ('|' unary)*     mixing & and | needs parentheses
//! unary  := '!' unary | atom
//! atom   := '(' expr ')' | 'always' | 'never'
//!         | 'rank<=' INT | 'usize<=' INT | 'uexp<=' INT
//!         | 'member{' partition ('|' partition)* '}'    partition: `2,1` or `()`
//! target := 'O(' expr (';' expr)* ')'
//!         | 'D(' expr (';' expr)* [ '\' expr (';' expr)* ] ')'
//!         | expr
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::abelian::FinAbGroup;
use crate::error::{Error, Result};
use crate::partitions::{enumerate_partitions, partitions_up_to, Partition};

/// How far past a declared fiber bound the constructor spot-checks.
const FIBER_SPOT_CHECK: u32 = 8;

type Predicate = dyn Fn(&Partition) -> bool + Send + Sync;

#[derive(Clone)]
pub struct UniformProperty(Arc<Node>);

enum Node {
    Always,
    Never,
    RankLe(u32),
    USizeLe(u32),
    UExpLe(u32),
    MemberOf(BTreeSet<Partition>),
    And(UniformProperty, UniformProperty),
    Or(UniformProperty, UniformProperty),
    Not(UniformProperty),
    Custom {
        name: String,
        predicate: Arc<Predicate>,
        bound: Option<u32>,
    },
}

impl UniformProperty {
    fn wrap(node: Node) -> Self {
        UniformProperty(Arc::new(node))
    }

    pub fn always() -> Self {
        Self::wrap(Node::Always)
    }

    pub fn never() -> Self {
        Self::wrap(Node::Never)
    }

    /// At most `r` cyclic factors.
    pub fn rank_le(r: u32) -> Self {
        Self::wrap(Node::RankLe(r))
    }

    /// `ord_p(G_p) <= n`; globally, uniform order at most `n`.
    pub fn usize_le(n: u32) -> Self {
        Self::wrap(Node::USizeLe(n))
    }

    /// Largest part at most `e`; globally, uniform exponent at most `e`.
    pub fn uexp_le(e: u32) -> Self {
        Self::wrap(Node::UExpLe(e))
    }

    pub fn member_of<I: IntoIterator<Item = Partition>>(fiber: I) -> Self {
        Self::wrap(Node::MemberOf(fiber.into_iter().collect()))
    }

    pub fn and(&self, other: &UniformProperty) -> Self {
        Self::wrap(Node::And(self.clone(), other.clone()))
    }

    pub fn or(&self, other: &UniformProperty) -> Self {
        Self::wrap(Node::Or(self.clone(), other.clone()))
    }

    /// Partition-level negation. `O(!E)` is *not* the complement of `O(E)`.
    #[allow(clippy::should_implement_trait)]
    pub fn not(&self) -> Self {
        Self::wrap(Node::Not(self.clone()))
    }

    /// A property backed by an arbitrary predicate.
    ///
    /// When `finite_fiber_bound` is `Some(b)`, the caller certifies that the
    /// predicate rejects every partition of size greater than `b`. This is
    /// spot-checked on sizes `b + 1 ..= b + 8`; beyond that a wrong
    /// certificate is a caller bug.
    pub fn custom<F>(
        name: impl Into<String>,
        predicate: F,
        finite_fiber_bound: Option<u32>,
    ) -> Result<Self>
    where
        F: Fn(&Partition) -> bool + Send + Sync + 'static,
    {
        let name = name.into();
        if let Some(b) = finite_fiber_bound {
            for n in b + 1..=b + FIBER_SPOT_CHECK {
                if let Some(lam) = enumerate_partitions(n).into_iter().find(|l| predicate(l)) {
                    return Err(Error::InvalidConfig(format!(
                        "property `{name}` declares fiber bound {b} but accepts {lam}"
                    )));
                }
            }
        }
        Ok(Self::wrap(Node::Custom {
            name,
            predicate: Arc::new(predicate),
            bound: finite_fiber_bound,
        }))
    }

    /// `E(lam)`
    pub fn holds(&self, lam: &Partition) -> bool {
        match &*self.0 {
            Node::Always => true,
            Node::Never => false,
            Node::RankLe(r) => lam.num_parts() <= *r,
            Node::USizeLe(n) => lam.size() <= *n,
            Node::UExpLe(e) => lam.largest_part() <= *e,
            Node::MemberOf(set) => set.contains(lam),
            Node::And(a, b) => a.holds(lam) && b.holds(lam),
            Node::Or(a, b) => a.holds(lam) || b.holds(lam),
            Node::Not(a) => !a.holds(lam),
            Node::Custom { predicate, .. } => predicate(lam),
        }
    }

    /// A size beyond which the predicate is known to be false, if any.
    pub fn finite_fiber_bound(&self) -> Option<u32> {
        match &*self.0 {
            Node::Always | Node::Not(_) => None,
            Node::Never => Some(0),
            Node::RankLe(0) | Node::UExpLe(0) => Some(0),
            Node::RankLe(_) | Node::UExpLe(_) => None,
            Node::USizeLe(n) => Some(*n),
            Node::MemberOf(set) => Some(set.iter().map(Partition::size).max().unwrap_or(0)),
            Node::And(a, b) => match (a.finite_fiber_bound(), b.finite_fiber_bound()) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, y) => x.or(y),
            },
            Node::Or(a, b) => Some(a.finite_fiber_bound()?.max(b.finite_fiber_bound()?)),
            Node::Custom { bound, .. } => *bound,
        }
    }

    /// Accepted partitions of size at most `n`, grouped by size.
    pub fn fiber_up_to(&self, n: u32) -> Vec<Partition> {
        partitions_up_to(n)
            .into_iter()
            .filter(|l| self.holds(l))
            .collect()
    }

    /// `E(G)`: every p-part, including the trivial ones, satisfies `E`.
    pub fn holds_globally(&self, group: &FinAbGroup) -> bool {
        self.holds(&Partition::empty()) && group.parts().all(|(_, lam)| self.holds(lam))
    }

    /// `E` at each of the given primes only, as in a finite product space.
    pub fn holds_at(&self, group: &FinAbGroup, primes: &[u64]) -> bool {
        primes.iter().all(|&p| self.holds(&group.p_part(p)))
    }

    /// `E(()) = E((1)) = 1`, the condition for positive global measure.
    pub fn accepts_zero_and_one(&self) -> bool {
        self.holds(&Partition::empty()) && self.holds(&Partition::single(1))
    }

    pub fn parse(input: &str) -> Result<Self> {
        let mut parser = Parser::new(input);
        let prop = parser.expr()?;
        parser.finish()?;
        Ok(prop)
    }
}

impl fmt::Display for UniformProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Always => f.write_str("always"),
            Node::Never => f.write_str("never"),
            Node::RankLe(r) => write!(f, "rank<={r}"),
            Node::USizeLe(n) => write!(f, "usize<={n}"),
            Node::UExpLe(e) => write!(f, "uexp<={e}"),
            Node::MemberOf(set) => {
                f.write_str("member{")?;
                for (i, lam) in set.iter().enumerate() {
                    if i > 0 {
                        f.write_str("|")?;
                    }
                    write!(f, "{lam}")?;
                }
                f.write_str("}")
            }
            Node::And(a, b) => write!(f, "({a}&{b})"),
            Node::Or(a, b) => write!(f, "({a}|{b})"),
            Node::Not(a) => write!(f, "!{a}"),
            Node::Custom { name, .. } => f.write_str(name),
        }
    }
}

impl fmt::Debug for UniformProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UniformProperty({self})")
    }
}

/// `O(E_1, ..., E_r)`: the union of the fibers' O-sets.
#[derive(Clone, Debug)]
pub struct OSet {
    members: Vec<UniformProperty>,
}

impl OSet {
    pub fn new(members: Vec<UniformProperty>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidConfig(
                "an O-set needs at least one property".into(),
            ));
        }
        Ok(OSet { members })
    }

    pub fn members(&self) -> &[UniformProperty] {
        &self.members
    }

    pub fn contains(&self, group: &FinAbGroup) -> bool {
        self.members.iter().any(|e| e.holds_globally(group))
    }

    pub fn contains_at(&self, group: &FinAbGroup, primes: &[u64]) -> bool {
        self.members.iter().any(|e| e.holds_at(group, primes))
    }
}

/// `D(E_1, ..., E_r; F_1, ..., F_s) = O(E_1, ..., E_r) \ O(F_1, ..., F_s)`.
#[derive(Clone, Debug)]
pub struct DSet {
    positives: Vec<UniformProperty>,
    negatives: Vec<UniformProperty>,
    normalized: bool,
}

impl DSet {
    pub fn new(positives: Vec<UniformProperty>, negatives: Vec<UniformProperty>) -> Self {
        let normalized = negatives.is_empty();
        DSet {
            positives,
            negatives,
            normalized,
        }
    }

    pub fn positives(&self) -> &[UniformProperty] {
        &self.positives
    }

    pub fn negatives(&self) -> &[UniformProperty] {
        &self.negatives
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Replaces the negatives by all `F_j & E_i`, which describes the same set
    /// and guarantees `O(negatives) ⊆ O(positives)`.
    pub fn normalize(&self) -> DSet {
        if self.normalized {
            return self.clone();
        }
        let negatives = self
            .negatives
            .iter()
            .flat_map(|f| self.positives.iter().map(move |e| f.and(e)))
            .collect();
        DSet {
            positives: self.positives.clone(),
            negatives,
            normalized: true,
        }
    }

    pub fn contains(&self, group: &FinAbGroup) -> bool {
        self.positives.iter().any(|e| e.holds_globally(group))
            && !self.negatives.iter().any(|f| f.holds_globally(group))
    }

    pub fn contains_at(&self, group: &FinAbGroup, primes: &[u64]) -> bool {
        self.positives.iter().any(|e| e.holds_at(group, primes))
            && !self.negatives.iter().any(|f| f.holds_at(group, primes))
    }
}

/// Anything the measures in this crate can be asked about.
#[derive(Clone, Debug)]
pub enum Target {
    Property(UniformProperty),
    O(OSet),
    D(DSet),
}

impl Target {
    pub fn contains(&self, group: &FinAbGroup) -> bool {
        match self {
            Target::Property(e) => e.holds_globally(group),
            Target::O(o) => o.contains(group),
            Target::D(d) => d.contains(group),
        }
    }

    /// Membership in the finite product over `primes`, where a group is its
    /// tuple of p-parts at those primes and nothing else is consulted.
    pub fn contains_at(&self, group: &FinAbGroup, primes: &[u64]) -> bool {
        match self {
            Target::Property(e) => e.holds_at(group, primes),
            Target::O(o) => o.contains_at(group, primes),
            Target::D(d) => d.contains_at(group, primes),
        }
    }

    pub fn parse(input: &str) -> Result<Self> {
        let t = input.trim();
        let inner = |prefix: &str| {
            t.strip_prefix(prefix)
                .and_then(|r| r.trim_start().strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
        };
        if let Some(body) = inner("O") {
            return Ok(Target::O(OSet::new(parse_list(input, body)?)?));
        }
        if let Some(body) = inner("D") {
            let (pos, neg) = match body.split_once('\\') {
                Some((p, n)) => (p, Some(n)),
                None => (body, None),
            };
            let positives = parse_list(input, pos)?;
            let negatives = match neg {
                Some(n) => parse_list(input, n)?,
                None => Vec::new(),
            };
            return Ok(Target::D(DSet::new(positives, negatives)));
        }
        UniformProperty::parse(t).map(Target::Property)
    }
}

fn parse_list(input: &str, body: &str) -> Result<Vec<UniformProperty>> {
    if body.trim().is_empty() {
        return Ok(Vec::new());
    }
    body.split(';')
        .map(|item| {
            UniformProperty::parse(item).map_err(|e| match e {
                Error::Parse { msg, .. } => Error::parse(input, msg),
                other => other,
            })
        })
        .collect()
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[UniformProperty]| {
            v.iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        };
        match self {
            Target::Property(e) => write!(f, "{e}"),
            Target::O(o) => write!(f, "O({})", join(o.members())),
            Target::D(d) if d.negatives().is_empty() => write!(f, "D({})", join(d.positives())),
            Target::D(d) => write!(f, "D({} \\ {})", join(d.positives()), join(d.negatives())),
        }
    }
}

struct Parser<'a> {
    input: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(input: &'a str) -> Self {
        Parser { input, pos: 0 }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.input, format!("{} (at byte {})", msg.into(), self.pos))
    }

    fn rest(&self) -> &'a str {
        &self.input[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.input.len() - trimmed.len();
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn finish(&mut self) -> Result<()> {
        self.skip_ws();
        if self.pos == self.input.len() {
            Ok(())
        } else {
            Err(self.err(format!("unexpected `{}`", self.rest())))
        }
    }

    fn expr(&mut self) -> Result<UniformProperty> {
        let first = self.unary()?;
        self.skip_ws();
        let op = match self.rest().chars().next() {
            Some('&') => '&',
            Some('|') => '|',
            _ => return Ok(first),
        };
        let mut acc = first;
        loop {
            self.skip_ws();
            match self.rest().chars().next() {
                Some(c) if c == op => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    acc = if op == '&' {
                        acc.and(&rhs)
                    } else {
                        acc.or(&rhs)
                    };
                }
                Some('&') | Some('|') => {
                    return Err(self.err("mixing `&` and `|` requires parentheses"))
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<UniformProperty> {
        if self.eat("!") {
            return Ok(self.unary()?.not());
        }
        self.atom()
    }

    fn number(&mut self) -> Result<u32> {
        self.skip_ws();
        let digits: String = self
            .rest()
            .chars()
            .take_while(|c| c.is_ascii_digit())
            .collect();
        if digits.is_empty() {
            return Err(self.err("expected a number"));
        }
        self.pos += digits.len();
        digits.parse().map_err(|e| self.err(format!("{e}")))
    }

    fn atom(&mut self) -> Result<UniformProperty> {
        if self.eat("(") {
            let inner = self.expr()?;
            if !self.eat(")") {
                return Err(self.err("expected `)`"));
            }
            return Ok(inner);
        }
        for (keyword, build) in [
            (
                "rank",
                UniformProperty::rank_le as fn(u32) -> UniformProperty,
            ),
            ("usize", UniformProperty::usize_le),
            ("uexp", UniformProperty::uexp_le),
        ] {
            if self.eat(keyword) {
                if !self.eat("<=") {
                    return Err(self.err(format!("expected `<=` after `{keyword}`")));
                }
                return Ok(build(self.number()?));
            }
        }
        if self.eat("always") {
            return Ok(UniformProperty::always());
        }
        if self.eat("never") {
            return Ok(UniformProperty::never());
        }
        if self.eat("member") {
            if !self.eat("{") {
                return Err(self.err("expected `{` after `member`"));
            }
            let close = self
                .rest()
                .find('}')
                .ok_or_else(|| self.err("unterminated `member{`"))?;
            let body = &self.rest()[..close];
            let fiber = body
                .split('|')
                .map(|s| s.parse::<Partition>())
                .collect::<Result<BTreeSet<_>>>()
                .map_err(|e| self.err(e.to_string()))?;
            self.pos += close + 1;
            return Ok(UniformProperty::member_of(fiber));
        }
        Err(self.err("expected a property"))
    }
}
