//! Command-line front end.
//!
//! Every run prints a TOML document with a `[manifest]` table (version,
//! subcommand, the argument vector and every resolved budget) and a
//! `[result]` table. `sample` instead prints a group file whose header
//! comments carry the same manifest. `replay FILE` re-runs the argument
//! vector recorded in a manifest.
//!
//! Exit codes: 0 success, 1 budget or I/O failure, 2 usage or parse error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};

use crate::abelian::{aut_order, aut_order_oracle};
use crate::contents::{content, sequence_density, weight_ordered_content, AlgebraSet, Cell};
use crate::enclosure::{parse_rational, rational_text, ProbEnclosure, Rational};
use crate::error::{Error, Result};
use crate::globalmeasure::{
    constants, measure_with_classes, nonmeasurability_demo, truncated_space_measure, GlobalConfig,
    MeasureSpace, PrimeClasses, TruncatedSpace,
};
use crate::groupio::{read_groups, write_group};
use crate::localmeasure::{local_probability, Budget};
use crate::partitions::Partition;
use crate::primes::require_prime;
use crate::properties::{Target, UniformProperty};
use crate::sampling::{
    equidistribution_report_in, GroupSampler, SamplerConfig, TestFunction, RNG_NAME,
};
use crate::VERSION;

#[derive(Parser, Debug)]
#[command(
    name = "clmeasure",
    version,
    about = "Cohen-Lenstra probabilities with exact enclosures"
)]
struct Cli {
    /// Write the output here (atomically) instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct BudgetArgs {
    /// Largest partition size enumerated per prime.
    #[arg(long, alias = "budget", default_value_t = 24)]
    budget_partitions: u32,
    /// Factors used for each eta(p) product.
    #[arg(long, default_value_t = 64)]
    budget_depth: u32,
    /// Dyadic grid for outward rounding, in bits.
    #[arg(long, default_value_t = 256)]
    precision_bits: u32,
}

impl BudgetArgs {
    fn budget(&self) -> Result<Budget> {
        Budget::new(self.budget_partitions, self.budget_depth)?.with_precision(self.precision_bits)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Order of Aut of the abelian p-group of the given type.
    Aut {
        p: u64,
        partition: String,
        /// Also count automorphisms by brute force.
        #[arg(long)]
        oracle: bool,
    },
    /// Local probability P_p of a uniform property.
    LocalProb {
        #[arg(long)]
        prime: u64,
        #[arg(long)]
        property: String,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Global measure of a property or target, or an expectation.
    Measure {
        #[arg(long, conflicts_with_all = ["target", "expect"])]
        property: Option<String>,
        /// `O(a; b)`, `D(a; b \ c)` or a property.
        #[arg(long, conflicts_with = "expect")]
        target: Option<String>,
        /// Expected value of `rank`, `uorder`, `uexp` or `min(F,K)`.
        #[arg(long)]
        expect: Option<String>,
        #[arg(long, default_value_t = 48)]
        series_terms: u32,
        #[arg(long, default_value_t = 1000)]
        primes_up_to: u64,
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<u64>,
        /// Per-prime-class properties, `p=2,3:EXPR; mod4=1:EXPR; *:EXPR`.
        #[arg(long, conflicts_with_all = ["target", "expect"])]
        classes: Option<String>,
        /// Measure in the finite product over these primes instead.
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["classes", "exclude"])]
        truncated: Vec<u64>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Content of a finite union of cells specified at finitely many primes.
    Content {
        /// Primes the cells are specified at; defaults to those named in cells.
        #[arg(long, value_delimiter = ',')]
        support: Option<Vec<u64>>,
        /// `2:member{()|1}; 3:rank<=1`, repeatable.
        #[arg(long = "cell", required = true)]
        cells: Vec<String>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Weighted share of a set among groups ordered by size.
    Wcontent {
        #[arg(long, conflicts_with = "order")]
        target: Option<String>,
        /// The set of groups of exactly this order.
        #[arg(long)]
        order: Option<u64>,
        #[arg(long)]
        max_order: u64,
        #[arg(long, value_delimiter = ',')]
        checkpoints: Vec<u64>,
    },
    /// Running density of a set in a group file.
    Density {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, conflicts_with = "order")]
        target: Option<String>,
        #[arg(long)]
        order: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        checkpoints: Vec<u64>,
    },
    /// Draw groups from the product distribution over a finite set of primes.
    Sample {
        #[arg(long, value_delimiter = ',', required = true)]
        primes: Vec<u64>,
        #[arg(long)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "1/1000000")]
        epsilon: String,
        #[arg(long, default_value_t = 32)]
        sampler_cap: u32,
    },
    /// Compare running means of a function on a group file with a reference.
    Equidist {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "f")]
        function: String,
        /// `auto`, `LO,HI` or `LO/HI` with decimal ends.
        #[arg(long, default_value = "auto")]
        reference: String,
        /// For `auto`: measure in the product over these primes.
        #[arg(long, value_delimiter = ',')]
        primes: Vec<u64>,
        /// For `auto` with `--primes`: exhaustive pass with per-prime caps, `2:15,3:9`.
        #[arg(long)]
        caps: Option<String>,
        /// For `auto` without `--primes`: global measure cutoff.
        #[arg(long, default_value_t = 1000)]
        primes_up_to: u64,
        #[arg(long, default_value_t = 48)]
        series_terms: u32,
        #[arg(long, value_delimiter = ',')]
        checkpoints: Vec<u64>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Upper bounds on the measure of the groups of order N along growing cutoffs.
    DemoNonmeasurableOrder {
        n: u64,
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000,10000")]
        schedule: Vec<u64>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// eta(p) for small primes and the measure of the fiber {(), (1)}.
    Constants {
        #[arg(long, default_value_t = 100_000)]
        primes_up_to: u64,
        #[arg(long, value_delimiter = ',', default_value = "2,3,5,7,11,13")]
        small_primes: Vec<u64>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Re-run the argument vector recorded in an output's manifest.
    Replay { file: PathBuf },
}

enum Output {
    Document(Table),
    Groups { manifest: Table, body: Vec<u8> },
}

impl Output {
    fn render(&self) -> Vec<u8> {
        match self {
            Output::Document(t) => t.to_string().into_bytes(),
            Output::Groups { manifest, body } => {
                let mut header = Table::new();
                header.insert("manifest".into(), Value::Table(manifest.clone()));
                let mut out: Vec<u8> = header
                    .to_string()
                    .lines()
                    .flat_map(|l| format!("# {l}\n").into_bytes())
                    .collect();
                out.extend_from_slice(body);
                out
            }
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let rendered = execute_with_argv(&cli.command, recorded_argv(&args)).map(|o| o.render());
    let result = rendered.and_then(|bytes| match &cli.output {
        Some(path) => write_atomically(path, &bytes),
        None => std::io::stdout().write_all(&bytes).map_err(Error::from),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. }
        | Error::GroupParse { .. }
        | Error::InvalidPartition(..)
        | Error::NotPrime(..)
        | Error::InvalidConfig(..)
        | Error::OverlappingCells { .. } => 2,
        _ => 1,
    }
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// The argument vector minus the program name and any `--output`.
fn recorded_argv(args: &[OsString]) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned());
    while let Some(a) = rest.next() {
        if a == "--output" {
            rest.next();
        } else if !a.starts_with("--output=") {
            out.push(a);
        }
    }
    out
}

fn manifest(subcommand: &str, argv: &[String]) -> Table {
    let mut m = Table::new();
    m.insert("version".into(), VERSION.into());
    m.insert("subcommand".into(), subcommand.into());
    m.insert(
        "argv".into(),
        Value::Array(argv.iter().map(|a| Value::from(a.as_str())).collect()),
    );
    m
}

fn budget_table(b: &Budget) -> Value {
    let mut t = Table::new();
    t.insert("partitions".into(), i64::from(b.partition_size_cap).into());
    t.insert("depth".into(), i64::from(b.product_depth).into());
    t.insert("precision_bits".into(), i64::from(b.precision_bits).into());
    Value::Table(t)
}

fn enclosure_table(e: &ProbEnclosure) -> Value {
    let mut t = Table::new();
    t.insert("lo".into(), rational_text(e.lo()).into());
    t.insert("hi".into(), rational_text(e.hi()).into());
    t.insert("approx".into(), e.approx().into());
    t.insert("width".into(), e.width_f64().into());
    Value::Table(t)
}

fn rational_value(q: &Rational) -> Value {
    rational_text(q).into()
}

fn int(n: u64) -> Value {
    Value::Integer(n as i64)
}

fn ints(ns: &[u64]) -> Value {
    Value::Array(ns.iter().map(|&n| int(n)).collect())
}

fn document(manifest: Table, result: Table) -> Output {
    let mut doc = Table::new();
    doc.insert("manifest".into(), Value::Table(manifest));
    doc.insert("result".into(), Value::Table(result));
    Output::Document(doc)
}

type Membership = Box<dyn Fn(&crate::FinAbGroup) -> bool>;

fn group_membership(target: &Option<String>, order: Option<u64>) -> Result<(String, Membership)> {
    match (target, order) {
        (Some(t), None) => {
            let t = Target::parse(t)?;
            Ok((t.to_string(), Box::new(move |g| t.contains(g))))
        }
        (None, Some(n)) => Ok((
            format!("order={n}"),
            Box::new(move |g| g.invariants().order == n.into()),
        )),
        _ => Err(Error::InvalidConfig(
            "give exactly one of --target and --order".into(),
        )),
    }
}

fn parse_reference(s: &str) -> Result<ProbEnclosure> {
    let (lo, hi) = match s.split_once(',') {
        Some(pair) => pair,
        None => s
            .split_once('/')
            .ok_or_else(|| Error::parse(s, "expected `auto`, `LO,HI` or `LO/HI`"))?,
    };
    ProbEnclosure::new(parse_rational(lo)?, parse_rational(hi)?)
}

fn parse_caps(s: &str) -> Result<Vec<(u64, u32)>> {
    s.split(',')
        .map(|item| {
            let (p, c) = item
                .split_once(':')
                .ok_or_else(|| Error::parse(s, format!("entry `{item}` needs `prime:cap`")))?;
            let p = p
                .trim()
                .parse()
                .map_err(|e| Error::parse(s, format!("{e}")))?;
            let c = c
                .trim()
                .parse()
                .map_err(|e| Error::parse(s, format!("{e}")))?;
            Ok((p, c))
        })
        .collect()
}

fn execute_with_argv(command: &Command, argv: Vec<String>) -> Result<Output> {
    match command {
        Command::Aut {
            p,
            partition,
            oracle,
        } => {
            require_prime(*p)?;
            let lam: Partition = partition.parse()?;
            let mut m = manifest("aut", &argv);
            m.insert("p".into(), int(*p));
            m.insert("partition".into(), lam.to_string().into());
            m.insert("oracle".into(), (*oracle).into());
            let order = aut_order(*p, &lam);
            let mut r = Table::new();
            r.insert("order".into(), order.to_string().into());
            if *oracle {
                let brute = aut_order_oracle(*p, &lam)?;
                r.insert("oracle_order".into(), brute.to_string().into());
                r.insert("agree".into(), (brute == order).into());
            }
            Ok(document(m, r))
        }
        Command::LocalProb {
            prime,
            property,
            budget,
        } => {
            let b = budget.budget()?;
            let e = UniformProperty::parse(property)?;
            let mut m = manifest("local-prob", &argv);
            m.insert("prime".into(), int(*prime));
            m.insert("property".into(), e.to_string().into());
            m.insert("budget".into(), budget_table(&b));
            let mut r = Table::new();
            r.insert(
                "probability".into(),
                enclosure_table(&local_probability(*prime, &e, &b)?),
            );
            Ok(document(m, r))
        }
        Command::Measure {
            property,
            target,
            expect,
            series_terms,
            primes_up_to,
            exclude,
            classes,
            truncated,
            budget,
        } => {
            let b = budget.budget()?;
            let mut m = manifest("measure", &argv);
            m.insert("budget".into(), budget_table(&b));
            let space = if truncated.is_empty() {
                m.insert("primes_up_to".into(), int(*primes_up_to));
                m.insert("exclude".into(), ints(exclude));
                MeasureSpace::Global(
                    GlobalConfig::new(*primes_up_to, b)?.excluding(exclude.iter().copied())?,
                )
            } else {
                m.insert("truncated_primes".into(), ints(truncated));
                MeasureSpace::truncated(truncated, b)?
            };
            let mut r = Table::new();
            let value = if let Some(spec) = classes {
                let default = match property {
                    Some(p) => UniformProperty::parse(p)?,
                    None => UniformProperty::always(),
                };
                let classes = PrimeClasses::parse(spec, default)?;
                m.insert("classes".into(), classes.to_string().into());
                let MeasureSpace::Global(cfg) = &space else {
                    unreachable!()
                };
                measure_with_classes(&classes, cfg)?
            } else if let Some(f) = expect {
                let TestFunction::Quantity { quantity, cap } = TestFunction::parse(f)? else {
                    return Err(Error::InvalidConfig(format!("`{f}` is not a quantity")));
                };
                m.insert("expect".into(), f.trim().into());
                m.insert("series_terms".into(), int(u64::from(*series_terms)));
                space.expected_value(quantity, cap, *series_terms)?
            } else {
                let t = match (property, target) {
                    (Some(p), None) => Target::Property(UniformProperty::parse(p)?),
                    (None, Some(t)) => Target::parse(t)?,
                    _ => {
                        return Err(Error::InvalidConfig(
                            "give --property, --target or --expect".into(),
                        ))
                    }
                };
                m.insert("target".into(), t.to_string().into());
                space.measure(&t)?
            };
            r.insert("measure".into(), enclosure_table(&value));
            Ok(document(m, r))
        }
        Command::Content {
            support,
            cells,
            budget,
        } => {
            let b = budget.budget()?;
            let cells: Vec<Cell> = cells
                .iter()
                .map(|c| Cell::parse(c))
                .collect::<Result<_>>()?;
            let support: BTreeSet<u64> = match support {
                Some(s) => s.iter().copied().collect(),
                None => cells.iter().flat_map(|c| c.primes()).collect(),
            };
            let set = AlgebraSet::new(support.clone(), cells)?;
            let mut m = manifest("content", &argv);
            m.insert(
                "support".into(),
                ints(&support.iter().copied().collect::<Vec<_>>()),
            );
            m.insert(
                "cells".into(),
                Value::Array(
                    set.cells()
                        .iter()
                        .map(|c| Value::from(c.to_string()))
                        .collect(),
                ),
            );
            m.insert("budget".into(), budget_table(&b));
            let mut r = Table::new();
            r.insert("content".into(), enclosure_table(&content(&set, &b)?));
            Ok(document(m, r))
        }
        Command::Wcontent {
            target,
            order,
            max_order,
            checkpoints,
        } => {
            let (name, members) = group_membership(target, *order)?;
            let rows = weight_ordered_content(members, *max_order)?;
            let mut m = manifest("wcontent", &argv);
            m.insert("set".into(), name.into());
            m.insert("max_order".into(), int(*max_order));
            m.insert("checkpoints".into(), ints(checkpoints));
            let mut r = Table::new();
            let shown: Vec<Value> = rows
                .iter()
                .filter(|(x, _)| checkpoints.contains(x))
                .map(|(x, q)| {
                    let mut t = Table::new();
                    t.insert("x".into(), int(*x));
                    t.insert("value".into(), rational_value(q));
                    t.insert(
                        "approx".into(),
                        ProbEnclosure::exact(q.clone()).approx().into(),
                    );
                    Value::Table(t)
                })
                .collect();
            let (_, last) = rows.last().expect("max_order >= 2");
            r.insert(
                "value".into(),
                enclosure_table(&ProbEnclosure::exact(last.clone())),
            );
            r.insert("rows".into(), Value::Array(shown));
            Ok(document(m, r))
        }
        Command::Density {
            input,
            target,
            order,
            checkpoints,
        } => {
            let (name, members) = group_membership(target, *order)?;
            let file = fs::File::open(input)?;
            let report = sequence_density(read_groups(BufReader::new(file)), members, checkpoints)?;
            let mut m = manifest("density", &argv);
            m.insert("input".into(), input.display().to_string().into());
            m.insert("set".into(), name.into());
            m.insert("checkpoints".into(), ints(checkpoints));
            let mut r = Table::new();
            r.insert("count".into(), int(report.total));
            r.insert("members".into(), int(report.members));
            r.insert(
                "rows".into(),
                Value::Array(
                    report
                        .rows
                        .iter()
                        .map(|(n, q)| {
                            let mut t = Table::new();
                            t.insert("n".into(), int(*n));
                            t.insert("density".into(), rational_value(q));
                            Value::Table(t)
                        })
                        .collect(),
                ),
            );
            Ok(document(m, r))
        }
        Command::Sample {
            primes,
            count,
            seed,
            epsilon,
            sampler_cap,
        } => {
            let cfg = SamplerConfig {
                seed: *seed,
                epsilon: parse_rational(epsilon)?,
                partition_cap: *sampler_cap,
            };
            let set: BTreeSet<u64> = primes.iter().copied().collect();
            let sampler = GroupSampler::new(&set, cfg.clone())?;
            let mut body = Vec::new();
            for g in sampler.take(*count as usize) {
                write_group(&mut body, &g?)?;
            }
            let mut m = manifest("sample", &argv);
            m.insert(
                "primes".into(),
                ints(&set.iter().copied().collect::<Vec<_>>()),
            );
            m.insert("count".into(), int(*count));
            m.insert("seed".into(), int(*seed));
            m.insert("epsilon".into(), rational_value(&cfg.epsilon));
            m.insert("sampler_cap".into(), int(u64::from(*sampler_cap)));
            m.insert("rng".into(), RNG_NAME.into());
            Ok(Output::Groups { manifest: m, body })
        }
        Command::Equidist {
            input,
            function,
            reference,
            primes,
            caps,
            primes_up_to,
            series_terms,
            checkpoints,
            budget,
        } => {
            let b = budget.budget()?;
            let f = TestFunction::parse(function)?;
            let mut m = manifest("equidist", &argv);
            m.insert("input".into(), input.display().to_string().into());
            m.insert("f".into(), f.to_string().into());
            m.insert("checkpoints".into(), ints(checkpoints));
            let reference = if reference.trim() == "auto" {
                m.insert("budget".into(), budget_table(&b));
                auto_reference(
                    &f,
                    primes,
                    caps.as_deref(),
                    *primes_up_to,
                    *series_terms,
                    &b,
                    &mut m,
                )?
            } else {
                parse_reference(reference)?
            };
            m.insert("reference".into(), reference_text(&reference).into());
            let file = fs::File::open(input)?;
            // A reference on a finite product is compared on that product.
            let space_primes: Vec<u64> = match (primes.is_empty(), caps) {
                (true, Some(c)) => parse_caps(c)?.into_iter().map(|(p, _)| p).collect(),
                _ => primes.clone(),
            };
            let space = (!space_primes.is_empty()).then_some(space_primes.as_slice());
            let report = equidistribution_report_in(
                read_groups(BufReader::new(file)),
                &f,
                &reference,
                checkpoints,
                space,
            )?;
            let (band_lo, band_hi) = report.acceptance_band();
            let mut r = Table::new();
            r.insert("count".into(), int(report.count));
            r.insert("mean".into(), rational_value(&report.mean));
            r.insert(
                "mean_approx".into(),
                ProbEnclosure::exact(report.mean.clone()).approx().into(),
            );
            r.insert("std_error".into(), report.std_error.into());
            r.insert("reference".into(), enclosure_table(&report.reference));
            r.insert("band_lo".into(), rational_value(&band_lo));
            r.insert("band_hi".into(), rational_value(&band_hi));
            r.insert("pass".into(), report.pass.into());
            r.insert(
                "rows".into(),
                Value::Array(
                    report
                        .checkpoints
                        .iter()
                        .map(|(n, q)| {
                            let mut t = Table::new();
                            t.insert("n".into(), int(*n));
                            t.insert("mean".into(), rational_value(q));
                            Value::Table(t)
                        })
                        .collect(),
                ),
            );
            Ok(document(m, r))
        }
        Command::DemoNonmeasurableOrder {
            n,
            schedule,
            budget,
        } => {
            let b = budget.budget()?;
            let rows = nonmeasurability_demo(*n, schedule, &b)?;
            let mut m = manifest("demo-nonmeasurable-order", &argv);
            m.insert("n".into(), int(*n));
            m.insert("schedule".into(), ints(schedule));
            m.insert("budget".into(), budget_table(&b));
            let mut r = Table::new();
            r.insert(
                "rows".into(),
                Value::Array(
                    rows.iter()
                        .map(|(x, bound)| {
                            let mut t = Table::new();
                            t.insert("x".into(), int(*x));
                            t.insert(
                                "bound".into(),
                                enclosure_table(&ProbEnclosure::new(
                                    Rational::from_integer(0.into()),
                                    bound.clone(),
                                )?),
                            );
                            Ok(Value::Table(t))
                        })
                        .collect::<Result<Vec<_>>>()?,
                ),
            );
            Ok(document(m, r))
        }
        Command::Constants {
            primes_up_to,
            small_primes,
            budget,
        } => {
            let b = budget.budget()?;
            let cfg = GlobalConfig::new(*primes_up_to, b)?;
            let (etas, fiber) = constants(small_primes, &cfg)?;
            let mut m = manifest("constants", &argv);
            m.insert("primes_up_to".into(), int(*primes_up_to));
            m.insert("small_primes".into(), ints(small_primes));
            m.insert("budget".into(), budget_table(&b));
            let mut r = Table::new();
            let mut eta_table = Table::new();
            for (p, e) in &etas {
                eta_table.insert(p.to_string(), enclosure_table(e));
            }
            r.insert("eta".into(), Value::Table(eta_table));
            r.insert("fiber_trivial_or_cyclic".into(), enclosure_table(&fiber));
            Ok(document(m, r))
        }
        Command::Replay { file } => {
            let text = fs::read_to_string(file)?;
            let argv = manifest_argv(&text)?;
            let mut full = vec!["clmeasure".to_string()];
            full.extend(argv.iter().cloned());
            let cli = Cli::try_parse_from(&full)
                .map_err(|e| Error::parse(argv.join(" "), e.to_string()))?;
            if matches!(cli.command, Command::Replay { .. }) {
                return Err(Error::InvalidConfig(
                    "a manifest cannot record a replay".into(),
                ));
            }
            execute_with_argv(&cli.command, argv)
        }
    }
}

fn reference_text(e: &ProbEnclosure) -> String {
    format!("{},{}", rational_text(e.lo()), rational_text(e.hi()))
}

fn auto_reference(
    f: &TestFunction,
    primes: &[u64],
    caps: Option<&str>,
    primes_up_to: u64,
    series_terms: u32,
    b: &Budget,
    m: &mut Table,
) -> Result<ProbEnclosure> {
    if let Some(caps) = caps {
        let TestFunction::Indicator(target) = f else {
            return Err(Error::InvalidConfig(
                "--caps needs an indicator function".into(),
            ));
        };
        let mut caps = parse_caps(caps)?;
        caps.sort_unstable();
        let listed: Vec<u64> = caps.iter().map(|&(p, _)| p).collect();
        let mut wanted = primes.to_vec();
        wanted.sort_unstable();
        if !primes.is_empty() && wanted != listed {
            return Err(Error::InvalidConfig(
                "--caps must list exactly the --primes".into(),
            ));
        }
        m.insert("reference_space".into(), "exhaustive".into());
        m.insert(
            "caps".into(),
            Value::Array(
                caps.iter()
                    .map(|(p, c)| Value::from(format!("{p}:{c}")))
                    .collect(),
            ),
        );
        return truncated_space_measure(target, &TruncatedSpace::with_caps(&caps, *b)?);
    }
    let space = if primes.is_empty() {
        m.insert("reference_space".into(), "global".into());
        m.insert("primes_up_to".into(), int(primes_up_to));
        MeasureSpace::Global(GlobalConfig::new(primes_up_to, *b)?)
    } else {
        m.insert("reference_space".into(), "truncated".into());
        m.insert("primes".into(), ints(primes));
        MeasureSpace::truncated(primes, *b)?
    };
    match f {
        TestFunction::Indicator(t) => space.measure(t),
        TestFunction::Quantity { quantity, cap } => {
            m.insert("series_terms".into(), int(u64::from(series_terms)));
            space.expected_value(*quantity, *cap, series_terms)
        }
    }
}

/// Reads `manifest.argv` from an output document or a commented group file.
fn manifest_argv(text: &str) -> Result<Vec<String>> {
    let parsed: Table = match text.parse::<Table>() {
        Ok(t) if t.contains_key("manifest") => t,
        _ => {
            let header: String = text
                .lines()
                .take_while(|l| l.starts_with('#'))
                .map(|l| format!("{}\n", l.trim_start_matches('#').trim_start()))
                .collect();
            header
                .parse::<Table>()
                .map_err(|e| Error::parse("manifest", e.to_string()))?
        }
    };
    parsed
        .get("manifest")
        .and_then(|m| m.get("argv"))
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse("manifest", "no manifest.argv array"))?
        .iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| Error::parse("manifest", "argv entries must be strings"))
        })
        .collect()
}
