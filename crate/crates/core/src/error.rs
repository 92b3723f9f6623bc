use thiserror::Error;

use crate::sim::RunReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("self-loop on node {0}")]
    SelfLoop(u64),

    #[error("unknown node id {0}")]
    UnknownNode(u64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("round cap of {cap} exceeded")]
    RoundCap { cap: u64, partial: Box<RunReport> },

    #[error("Moser-Tardos stopped after {iterations} iterations with {violated} violated events")]
    IterationCap { iterations: u64, violated: usize },

    #[error("none of the {instances} parallel instances satisfies every event")]
    NoWinningInstance { instances: usize },

    #[error("brute-force search space of {size} assignments exceeds the cap of {cap}")]
    SearchSpace { size: f64, cap: u64 },

    #[error("cluster decomposition needs {needed} colors but only {budget} are allowed")]
    ColorBudget { needed: u32, budget: u32 },

    #[error("post-shattering instance for slot {slot}, component {component}: {reason}")]
    PostShattering { slot: u32, component: usize, reason: String },

    #[error("edge coloring base case: measured degree {measured} exceeds the bound {bound:.3}")]
    BaseDegree { measured: usize, bound: f64 },

    #[error("list of node {node} became empty")]
    EmptyList { node: u32 },

    #[error("nibble iteration rejected {attempts} times; last violating nodes: {nodes:?}")]
    NibbleRetries { attempts: u32, nodes: Vec<u32> },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// At most 16 ids, then a count of the rest.
pub(crate) fn brief_ids(ids: &[u32]) -> String {
    if ids.len() <= 16 {
        format!("{ids:?}")
    } else {
        format!("{:?} and {} more", &ids[..16], ids.len() - 16)
    }
}
