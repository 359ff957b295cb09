//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use clmeasure::contents::{content, AlgebraSet, Cell, LocalDescriptor};
use clmeasure::enclosure::{ratio, ProbEnclosure};
use clmeasure::globalmeasure::{
    constants, nonmeasurability_demo, truncated_space_measure, MeasureSpace, TruncatedSpace,
};
use clmeasure::localmeasure::{eta, size_weight, tail_weight_bound, weight};
use clmeasure::partitions::{count_partitions, enumerate_partitions, partitions_up_to};
use clmeasure::sampling::{
    chi_square_independence, equidistribution_report, GroupSampler, LocalSampler, SamplerConfig,
    TestFunction,
};
use clmeasure::{
    aut_order, aut_order_oracle, Budget, FinAbGroup, GlobalConfig, Partition, Rational, Target,
    UniformProperty,
};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_secs: u64, detail: String) -> Check {
    ensure(
        elapsed <= Duration::from_secs(limit_secs),
        format!("{detail}; {:.1}s of {limit_secs}s", elapsed.as_secs_f64()),
    )
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut checked = 0;
    for (p, max) in [(2u64, 4u32), (3, 4), (5, 3)] {
        for n in 0..=max {
            for lam in enumerate_partitions(n) {
                let formula = aut_order(p, &lam);
                let brute = aut_order_oracle(p, &lam).map_err(|e| e.to_string())?;
                if formula != brute {
                    return Err(format!("p={p} {lam}: formula {formula}, oracle {brute}"));
                }
                checked += 1;
            }
        }
    }
    within(start.elapsed(), 300, format!("{checked} partitions agree"))
}

fn criterion_2() -> Check {
    let start = Instant::now();
    for p in [2u64, 3, 5] {
        let pi = Rational::from_integer(BigInt::from(p));
        for n in 0..=20u32 {
            let mut closed = num_traits::Pow::pow(&pi, n).recip();
            for k in 1..=n {
                closed /= Rational::one() - num_traits::Pow::pow(&pi, k).recip();
            }
            if size_weight(p, n) != closed {
                return Err(format!("p={p} n={n}"));
            }
        }
    }
    within(start.elapsed(), 120, "p in {2,3,5}, n <= 20 exact".into())
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let cfg = GlobalConfig::new(100_000, Budget::new(24, 64).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let (_, fiber) = constants(&[2], &cfg).map_err(|e| e.to_string())?;
    let expected = Rational::new(435_757.into(), 1_000_000.into());
    let mid_err = (fiber.midpoint() - &expected).to_f64().unwrap().abs();
    let ok = fiber.width() <= ratio(1, 10_000) && fiber.contains(&expected) && mid_err <= 2e-5;
    let detail = format!(
        "[{:.9}, {:.9}] width {:.2e}, |mid - 0.435757| = {:.2e}",
        fiber.lo_f64(),
        fiber.hi_f64(),
        fiber.width_f64(),
        mid_err
    );
    ensure(ok, detail.clone()).and_then(|d| within(start.elapsed(), 60, d))
}

fn prop(s: &str) -> UniformProperty {
    UniformProperty::parse(s).expect("valid expression")
}

fn criterion_4() -> Check {
    let rejecting = [
        "never",
        "rank<=0",
        "usize<=0",
        "uexp<=0",
        "member{()}",
        "member{1}",
        "member{()|2}",
        "!member{()}",
        "!rank<=0",
        "member{()|1,1|2}",
    ];
    let accepting = [
        "always",
        "rank<=1",
        "rank<=2",
        "uexp<=1",
        "usize<=1",
        "usize<=3",
        "member{()|1}",
        "member{()|1|2}",
        "!member{2}",
        "rank<=1 & uexp<=2",
    ];
    let space = MeasureSpace::Global(
        GlobalConfig::new(1000, Budget::default()).map_err(|e| e.to_string())?,
    );
    for s in rejecting {
        let m = space.measure_property(&prop(s));
        if m != ProbEnclosure::zero() {
            return Err(format!("`{s}` gave {m}"));
        }
    }
    for s in accepting {
        let m = space.measure_property(&prop(s));
        if m.lo() <= &Rational::zero() {
            return Err(format!("`{s}` has lo = 0"));
        }
    }
    Ok("10 exact zeros, 10 positive lower bounds at x = 1000".into())
}

fn criterion_5() -> Check {
    let start = Instant::now();
    let targets = [
        "always",
        "never",
        "rank<=0",
        "rank<=1",
        "rank<=2",
        "uexp<=1",
        "uexp<=2",
        "usize<=2",
        "member{()|1}",
        "member{()|1|1,1|2}",
        "!member{2}",
        "rank<=1 & uexp<=2",
        "rank<=1 | uexp<=1",
        "O(rank<=0; uexp<=1)",
        "O(member{()}; member{1}; member{2})",
        "O(rank<=1; usize<=3; member{()|1,1})",
        "O(usize<=1; !rank<=1)",
        "D(rank<=2)",
        "D(rank<=1; uexp<=2)",
        "D(always \\ rank<=1)",
        "D(rank<=2 \\ member{()}; uexp<=1)",
        "D(usize<=3; member{()|1|2|1,1} \\ rank<=0; member{2})",
    ];
    let budget = Budget::new(5, 64).map_err(|e| e.to_string())?;
    let exhaustive_space = TruncatedSpace::uniform(&[2, 3], budget).map_err(|e| e.to_string())?;
    let algebra_space = MeasureSpace::truncated(&[2, 3], budget).map_err(|e| e.to_string())?;
    for s in targets {
        let t = Target::parse(s).map_err(|e| format!("{s}: {e}"))?;
        let exhaustive =
            truncated_space_measure(&t, &exhaustive_space).map_err(|e| e.to_string())?;
        let formula = algebra_space.measure(&t).map_err(|e| e.to_string())?;
        if !exhaustive.intersects(&formula) {
            return Err(format!("`{s}`: exhaustive {exhaustive} vs {formula}"));
        }
    }
    within(
        start.elapsed(),
        600,
        format!("{} targets intersect", targets.len()),
    )
}

fn criterion_6() -> Check {
    let start = Instant::now();
    let schedule = [10, 100, 1000, 10_000];
    let rows =
        nonmeasurability_demo(12, &schedule, &Budget::default()).map_err(|e| e.to_string())?;
    let decreasing = rows.windows(2).all(|w| w[1].1 < w[0].1);
    let last = rows.last().map(|(_, b)| b.to_f64().unwrap()).unwrap_or(1.0);
    let shown: Vec<String> = rows
        .iter()
        .map(|(x, b)| format!("x={x}: {:.4}", b.to_f64().unwrap()))
        .collect();
    let detail = format!(
        "{}; decreasing {decreasing}, final {last:.4} vs 1e-2",
        shown.join(", ")
    );
    ensure(decreasing && last < 1e-2, detail).and_then(|d| within(start.elapsed(), 60, d))
}

fn criterion_7() -> Check {
    let (mut f_n, mut f_next) = (BigUint::one(), BigUint::one());
    for n in 0..=80u32 {
        // f_next = F_{n+1}
        if n > 0 {
            let sum = &f_n + &f_next;
            f_n = std::mem::replace(&mut f_next, sum);
        }
        let a = count_partitions(n);
        if a > f_next {
            return Err(format!("a({n}) = {a} > F({}) = {f_next}", n + 1));
        }
    }
    Ok("a(n) <= F(n+1) for n <= 80".into())
}

fn criterion_8() -> Check {
    let mut details = Vec::new();
    for n in [6u32, 8, 10] {
        let tail: Rational = (n + 1..=n + 4)
            .flat_map(enumerate_partitions)
            .map(|l| weight(2, &l))
            .sum();
        let bound = tail_weight_bound(2, n);
        if tail >= bound {
            return Err(format!("N={n}: {tail} >= {bound}"));
        }
        details.push(format!(
            "N={n}: {:.3e} < {:.3e}",
            tail.to_f64().unwrap(),
            bound.to_f64().unwrap()
        ));
    }
    Ok(details.join(", "))
}

const DRAWS: usize = 100_000;

fn criterion_9() -> Check {
    let start = Instant::now();
    let mut s = LocalSampler::new(SamplerConfig::new(20_241_019)).map_err(|e| e.to_string())?;
    let mut empty = 0usize;
    let mut size_two: BTreeMap<Partition, usize> = BTreeMap::new();
    for _ in 0..DRAWS {
        let l = s.sample(2).map_err(|e| e.to_string())?;
        match l.size() {
            0 => empty += 1,
            2 => *size_two.entry(l).or_default() += 1,
            _ => {}
        }
    }
    let freq = empty as f64 / DRAWS as f64;
    let e2 = eta(2, &Budget::default());
    let freq_ok = freq >= e2.lo_f64() - 0.005 && freq <= e2.hi_f64() + 0.005;

    let two = *size_two.get(&Partition::single(2)).unwrap_or(&0) as f64;
    let total_two: f64 = size_two.values().sum::<usize>() as f64;
    let sigma = (0.75 * 0.25 / total_two).sqrt();
    let split = two / total_two;
    let split_ok = (split - 0.75).abs() <= 3.0 * sigma;

    let joint = GroupSampler::new(&[2, 3].into(), SamplerConfig::new(20_241_020))
        .map_err(|e| e.to_string())?;
    let mut table = vec![vec![0u64; 2]; 2];
    for g in joint.take(DRAWS) {
        let g = g.map_err(|e| e.to_string())?;
        table[usize::from(g.p_part(2).is_empty())][usize::from(g.p_part(3).is_empty())] += 1;
    }
    let chi = chi_square_independence(&table).map_err(|e| e.to_string())?;
    let detail = format!(
        "freq(()) = {freq:.4} vs [{:.4}, {:.4}]; P((2)|size 2) = {split:.4} (3 sigma = {:.4}); chi-square p = {:.3}",
        e2.lo_f64(),
        e2.hi_f64(),
        3.0 * sigma,
        chi.p_value
    );
    ensure(freq_ok && split_ok && chi.passes(0.01), detail)
        .and_then(|d| within(start.elapsed(), 120, d))
}

fn criterion_10() -> Check {
    let budget = Budget::default();
    let space =
        TruncatedSpace::with_caps(&[(2, 15), (3, 9), (5, 6)], budget).map_err(|e| e.to_string())?;
    let f = TestFunction::parse("rank<=1").map_err(|e| e.to_string())?;
    let TestFunction::Indicator(target) = &f else {
        unreachable!()
    };
    let reference = truncated_space_measure(target, &space).map_err(|e| e.to_string())?;
    let primes: BTreeSet<u64> = [2, 3, 5].into();
    let stream = GroupSampler::new(&primes, SamplerConfig::new(5_101))
        .map_err(|e| e.to_string())?
        .take(DRAWS);
    let report = equidistribution_report(stream, &f, &reference, &[1_000, 10_000, 100_000])
        .map_err(|e| e.to_string())?;
    let control_stream = std::iter::repeat_with(|| Ok(FinAbGroup::trivial())).take(DRAWS);
    let control =
        equidistribution_report(control_stream, &f, &reference, &[]).map_err(|e| e.to_string())?;
    let detail = format!(
        "mean {:.5} vs [{:.5}, {:.5}] with se {:.5}; control pass = {}",
        report.mean.to_f64().unwrap(),
        reference.lo_f64(),
        reference.hi_f64(),
        report.std_error,
        control.pass
    );
    ensure(report.pass && !control.pass, detail)
}

fn random_cells(rng: &mut ChaCha20Rng) -> Vec<Cell> {
    let at_two = partitions_up_to(3);
    let at_three = partitions_up_to(3);
    let predicates = ["rank<=1", "uexp<=1", "!member{()}", "always", "usize<=2"];
    let mut cells = Vec::new();
    for l2 in &at_two {
        if !rng.gen_bool(0.6) {
            continue;
        }
        let three = if rng.gen_bool(0.5) {
            let set: BTreeSet<Partition> = at_three
                .iter()
                .filter(|_| rng.gen_bool(0.4))
                .cloned()
                .collect();
            if set.is_empty() {
                continue;
            }
            LocalDescriptor::Explicit(set)
        } else {
            LocalDescriptor::Predicate(prop(predicates[rng.gen_range(0..predicates.len())]))
        };
        cells.push(
            Cell::new()
                .with(2, LocalDescriptor::Explicit([l2.clone()].into()))
                .with(3, three),
        );
    }
    cells
}

fn criterion_11() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let budget = Budget::new(16, 64).map_err(|e| e.to_string())?;
    let support: BTreeSet<u64> = [2, 3].into();
    let mut cases = 0;
    while cases < 100 {
        let cells = random_cells(&mut rng);
        if cells.len() < 2 {
            continue;
        }
        let split = rng.gen_range(1..cells.len());
        let a =
            AlgebraSet::new(support.clone(), cells[..split].to_vec()).map_err(|e| e.to_string())?;
        let b =
            AlgebraSet::new(support.clone(), cells[split..].to_vec()).map_err(|e| e.to_string())?;
        let union = a.union(&b).map_err(|e| e.to_string())?;
        let ca = content(&a, &budget).map_err(|e| e.to_string())?;
        let cb = content(&b, &budget).map_err(|e| e.to_string())?;
        let cu = content(&union, &budget).map_err(|e| e.to_string())?;
        let sum = ca.add(&cb).clamp_unit();
        if cu != sum {
            return Err(format!("case {cases}: union {cu} vs sum {sum}"));
        }
        cases += 1;
    }
    Ok(format!("{cases} random disjoint pairs add exactly"))
}

fn criterion_12() -> Check {
    let props = [
        "always",
        "rank<=1",
        "rank<=2",
        "uexp<=1",
        "usize<=2",
        "member{()|1}",
        "member{()|1|2}",
        "!member{2}",
        "rank<=1 & uexp<=2",
        "rank<=1 | uexp<=1",
    ];
    let (x, n) = (100u64, 8u32);
    let coarse = GlobalConfig::new(x, Budget::new(n, 64).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let fine = GlobalConfig::new(2 * x, Budget::new(2 * n, 64).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    if fine.prime_tail().width() * Rational::from_integer(2.into()) != coarse.prime_tail().width() {
        return Err("prime tail term did not halve".into());
    }
    for s in props {
        let e = prop(s);
        let a = MeasureSpace::Global(coarse.clone()).measure_property(&e);
        let b = MeasureSpace::Global(fine.clone()).measure_property(&e);
        if b.width() > a.width() || !a.intersects(&b) {
            return Err(format!("`{s}`: {a} then {b}"));
        }
    }
    Ok(format!(
        "x {x} -> {}, N {n} -> {}: widths never grow, 1/x term halves",
        2 * x,
        2 * n
    ))
}

fn main() {
    let criteria: [(u32, fn() -> Check); 12] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
        (12, criterion_12),
    ];
    let mut failed = Vec::new();
    for (n, check) in criteria {
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {n:>2}: PASS  {detail}"),
            Err(detail) => {
                println!("criterion {n:>2}: FAIL  {detail}");
                failed.push(n);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 12 criteria pass");
    } else {
        println!(
            "acceptance: {} of 12 criteria fail: {failed:?}",
            failed.len()
        );
        std::process::exit(1);
    }
}
