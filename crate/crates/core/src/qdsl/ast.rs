use std::fmt;

use crate::qops::{FieldRef, Side};

#[derive(Clone, Debug, PartialEq)]
pub enum Query {
    Load { path: String },
    Select { input: Box<Query>, predicate: Predicate },
    Project { input: Box<Query>, fields: Vec<String> },
    Join { left: Box<Query>, right: Box<Query>, similarity: SimilaritySpec, combine: CombineSpec },
    Sample { input: Box<Query>, shots: u64 },
}

impl Query {
    /// Keyword naming the node kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Query::Load { .. } => "LOAD",
            Query::Select { .. } => "SELECT",
            Query::Project { .. } => "PROJECT",
            Query::Join { .. } => "JOIN",
            Query::Sample { .. } => "SAMPLE",
        }
    }

    /// Direct sub-queries, left to right.
    pub fn children(&self) -> Vec<&Query> {
        match self {
            Query::Load { .. } => vec![],
            Query::Select { input, .. } | Query::Project { input, .. } | Query::Sample { input, .. } => {
                vec![input]
            }
            Query::Join { left, right, .. } => vec![left, right],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Predicate {
    Compare { left: Operand, op: CmpOp, right: Operand },
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Operand {
    Field(String),
    Literal(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Lt,
    Gt,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimilaritySpec {
    /// Equality of a left field and a right field.
    Eq { left: String, right: String },
    /// `1 - |a - b| / scale` clamped to `[0, 1]`.
    Within { left: String, right: String, scale: f64 },
    /// Constant similarity `re + i im`.
    Const { re: f64, im: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum CombineSpec {
    Concat,
    ConcatDrop(String),
    Fields(Vec<FieldRef>),
}

fn write_child(f: &mut fmt::Formatter<'_>, q: &Query) -> fmt::Result {
    match q {
        Query::Load { .. } => write!(f, "{q}"),
        _ => write!(f, "({q})"),
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Load { path } => write!(f, "LOAD {}", quote(path)),
            Query::Select { input, predicate } => {
                f.write_str("SELECT ")?;
                write_child(f, input)?;
                write!(f, " WHERE {predicate}")
            }
            Query::Project { input, fields } => {
                f.write_str("PROJECT ")?;
                write_child(f, input)?;
                write!(f, " ON {}", fields.join(", "))
            }
            Query::Join { left, right, similarity, combine } => {
                f.write_str("JOIN ")?;
                write_child(f, left)?;
                f.write_str(", ")?;
                write_child(f, right)?;
                write!(f, " ON {similarity} COMBINE {combine}")
            }
            Query::Sample { input, shots } => {
                f.write_str("SAMPLE ")?;
                write_child(f, input)?;
                write!(f, " SHOTS {shots}")
            }
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Compare { left, op, right } => write!(f, "{left} {op} {right}"),
            Predicate::And(a, b) => write!(f, "({a} AND {b})"),
            Predicate::Or(a, b) => write!(f, "({a} OR {b})"),
            Predicate::Not(p) => write!(f, "NOT {p}"),
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Field(name) => f.write_str(name),
            Operand::Literal(v) => write!(f, "{v}"),
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
        })
    }
}

impl fmt::Display for SimilaritySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimilaritySpec::Eq { left, right } => write!(f, "eq({left}, {right})"),
            SimilaritySpec::Within { left, right, scale } => write!(f, "within({left}, {right}, {scale})"),
            SimilaritySpec::Const { re, im } if *im == 0.0 => write!(f, "const({re})"),
            SimilaritySpec::Const { re, im } => write!(f, "const({re}, {im})"),
        }
    }
}

impl fmt::Display for CombineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CombineSpec::Concat => f.write_str("concat"),
            CombineSpec::ConcatDrop(field) => write!(f, "concat_drop({field})"),
            CombineSpec::Fields(refs) => {
                let parts: Vec<String> = refs
                    .iter()
                    .map(|r| match r.side {
                        None => r.name.clone(),
                        Some(Side::Left) => format!("left.{}", r.name),
                        Some(Side::Right) => format!("right.{}", r.name),
                    })
                    .collect();
                write!(f, "[{}]", parts.join(", "))
            }
        }
    }
}
