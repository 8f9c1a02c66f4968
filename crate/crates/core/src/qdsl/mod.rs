//! Query language: parser, planner, executor and result documents.

mod ast;
mod exec;
mod parser;
mod plan;

use std::fmt;

pub use ast::{CmpOp, CombineSpec, Operand, Predicate, Query, SimilaritySpec};
pub use exec::{execute, render_error, ExecOptions, NodeReport, ResultDocument};
pub use parser::parse;
pub use plan::{plan, CompiledOperand, CompiledPredicate, Engine, PlanConfig, PlanOp, PlanStep, QueryPlan};

use crate::error::Error;

/// A query node: pre-order id (root is 0) and keyword.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeRef {
    pub id: usize,
    pub kind: &'static str,
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.id, self.kind)
    }
}

/// An error plus the query node it came from, when there is one.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryError {
    pub node: Option<NodeRef>,
    pub error: Error,
}

impl QueryError {
    pub fn at(node: NodeRef, error: Error) -> Self {
        QueryError { node: Some(node), error }
    }

    /// 3 for register budget violations, 2 for every other query error.
    pub fn exit_code(&self) -> i32 {
        match self.error {
            Error::QubitBudgetExceeded { .. } => 3,
            _ => 2,
        }
    }
}

impl From<Error> for QueryError {
    fn from(error: Error) -> Self {
        QueryError { node: None, error }
    }
}

impl fmt::Display for QueryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some(node) => write!(f, "node {node}: {}", self.error),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for QueryError {}

/// Parse, plan and execute `source` in one call.
pub fn run_query(
    source: &str,
    config: &PlanConfig,
    options: &ExecOptions,
) -> Result<ResultDocument, QueryError> {
    let query = parse(source)?;
    let plan = plan(&query, config)?;
    execute(&plan, options)
}
