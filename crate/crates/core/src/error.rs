use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("partition size {requested} exceeds the configured budget {cap}")]
    PartitionBudget { requested: u32, cap: u32 },

    #[error("exhaustive automorphism count needs {homs} homomorphisms, above the cap {cap}")]
    OracleCap { homs: u128, cap: u128 },

    #[error("{n} is outside the factorization cap {cap}")]
    FactorizationCap { n: u64, cap: u64 },

    #[error("cannot parse `{input}`: {msg}")]
    Parse { input: String, msg: String },

    #[error("line {line}: {msg}")]
    GroupParse { line: usize, msg: String },

    #[error("cells {first} and {second} overlap")]
    OverlappingCells { first: usize, second: usize },

    #[error("inclusion-exclusion over {members} sets exceeds the limit of {limit}")]
    InclusionExclusionLimit { members: usize, limit: usize },

    #[error("truncated space has {tuples} tuples, above the cap {cap}")]
    TruncatedSpaceCap { tuples: u128, cap: u128 },

    #[error("sampler at p = {prime} reached size budget {budget} with explored mass {achieved} < 1 - epsilon")]
    SamplerBudget {
        prime: u64,
        budget: u32,
        achieved: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(input: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse {
            input: input.into(),
            msg: msg.into(),
        }
    }
}
