use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::Error;
use crate::qops::{join_qubits, CombineOp, SimilarityOp};
use crate::qstate::{check_budget, DEFAULT_MAX_QUBITS};
use crate::relation::{Schema, Tuple, WeightedRelation};

use super::ast::{CmpOp, CombineSpec, Operand, Predicate, Query, SimilaritySpec};
use super::{NodeRef, QueryError};

/// Which engine runs a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    Quantum,
    Classical,
    Both,
}

impl Engine {
    pub fn runs_quantum(self) -> bool {
        matches!(self, Engine::Quantum | Engine::Both)
    }

    pub fn runs_classical(self) -> bool {
        matches!(self, Engine::Classical | Engine::Both)
    }

    pub fn name(self) -> &'static str {
        match self {
            Engine::Quantum => "quantum",
            Engine::Classical => "classical",
            Engine::Both => "both",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlanConfig {
    pub max_qubits: usize,
    pub engine: Engine,
    /// Directory that relative `LOAD` paths resolve against.
    pub base_dir: PathBuf,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig { max_qubits: DEFAULT_MAX_QUBITS, engine: Engine::Quantum, base_dir: PathBuf::from(".") }
    }
}

/// Predicate with field names resolved to indices of one schema.
#[derive(Clone, Debug, PartialEq)]
pub enum CompiledPredicate {
    Compare { left: CompiledOperand, op: CmpOp, right: CompiledOperand },
    And(Box<CompiledPredicate>, Box<CompiledPredicate>),
    Or(Box<CompiledPredicate>, Box<CompiledPredicate>),
    Not(Box<CompiledPredicate>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompiledOperand {
    Field(usize),
    Literal(u64),
}

impl CompiledPredicate {
    fn compile(p: &Predicate, schema: &Schema) -> Result<Self, Error> {
        let operand = |o: &Operand| -> Result<CompiledOperand, Error> {
            Ok(match o {
                Operand::Field(name) => CompiledOperand::Field(schema.field_index(name)?),
                Operand::Literal(v) => CompiledOperand::Literal(*v),
            })
        };
        Ok(match p {
            Predicate::Compare { left, op, right } => {
                CompiledPredicate::Compare { left: operand(left)?, op: *op, right: operand(right)? }
            }
            Predicate::And(a, b) => {
                CompiledPredicate::And(Box::new(Self::compile(a, schema)?), Box::new(Self::compile(b, schema)?))
            }
            Predicate::Or(a, b) => {
                CompiledPredicate::Or(Box::new(Self::compile(a, schema)?), Box::new(Self::compile(b, schema)?))
            }
            Predicate::Not(a) => CompiledPredicate::Not(Box::new(Self::compile(a, schema)?)),
        })
    }

    pub fn eval(&self, schema: &Schema, t: Tuple) -> bool {
        let value = |o: &CompiledOperand| match o {
            CompiledOperand::Field(i) => schema.value(t, *i),
            CompiledOperand::Literal(v) => *v,
        };
        match self {
            CompiledPredicate::Compare { left, op, right } => {
                let (a, b) = (value(left), value(right));
                match op {
                    CmpOp::Eq => a == b,
                    CmpOp::Lt => a < b,
                    CmpOp::Gt => a > b,
                }
            }
            CompiledPredicate::And(a, b) => a.eval(schema, t) && b.eval(schema, t),
            CompiledPredicate::Or(a, b) => a.eval(schema, t) || b.eval(schema, t),
            CompiledPredicate::Not(a) => !a.eval(schema, t),
        }
    }
}

#[derive(Clone, Debug)]
pub enum PlanOp {
    Load { path: String, relation: WeightedRelation },
    Select { input: usize, predicate: CompiledPredicate },
    Project { input: usize, fields: Vec<String> },
    Join { left: usize, right: usize, similarity: SimilarityOp, combine: CombineOp },
    Sample { input: usize, shots: usize },
}

/// One operator of the linearized plan. `input`/`left`/`right` index earlier steps.
#[derive(Clone, Debug)]
pub struct PlanStep {
    pub node: NodeRef,
    pub op: PlanOp,
    /// Schema of the relation this step produces.
    pub schema: Schema,
    /// Peak register width while this step runs on the simulator.
    pub qubits: usize,
    pub engine: Engine,
}

#[derive(Clone, Debug)]
pub struct QueryPlan {
    pub query: Query,
    /// Children before parents; the last step is the root.
    pub steps: Vec<PlanStep>,
    pub peak_qubits: usize,
    pub max_qubits: usize,
}

impl QueryPlan {
    pub fn root(&self) -> &PlanStep {
        self.steps.last().expect("a plan has at least one step")
    }
}

/// Resolves files and schemas, type-checks every node and enforces the qubit budget.
pub fn plan(query: &Query, config: &PlanConfig) -> Result<QueryPlan, QueryError> {
    let mut planner = Planner { config, steps: Vec::new(), next_id: 0 };
    planner.visit(query)?;
    let peak_qubits = planner.steps.iter().map(|s| s.qubits).max().unwrap_or(0);
    Ok(QueryPlan { query: query.clone(), steps: planner.steps, peak_qubits, max_qubits: config.max_qubits })
}

struct Planner<'a> {
    config: &'a PlanConfig,
    steps: Vec<PlanStep>,
    next_id: usize,
}

impl Planner<'_> {
    fn visit(&mut self, q: &Query) -> Result<usize, QueryError> {
        let node = NodeRef { id: self.next_id, kind: q.kind() };
        self.next_id += 1;
        let tag = |e: Error| QueryError::at(node, e);
        let (op, schema, qubits) = match q {
            Query::Load { path } => {
                let relation = WeightedRelation::read_file(&resolve(&self.config.base_dir, path)).map_err(tag)?;
                let schema = relation.schema().clone();
                let c = schema.total_bits();
                (PlanOp::Load { path: path.clone(), relation }, schema, c)
            }
            Query::Select { input, predicate } => {
                let input = self.visit(input)?;
                let schema = self.steps[input].schema.clone();
                let predicate = CompiledPredicate::compile(predicate, &schema).map_err(tag)?;
                let c = schema.total_bits();
                (PlanOp::Select { input, predicate }, schema, c)
            }
            Query::Project { input, fields } => {
                let input = self.visit(input)?;
                let source = &self.steps[input].schema;
                let names: Vec<&str> = fields.iter().map(String::as_str).collect();
                for (n, name) in names.iter().enumerate() {
                    if names[..n].contains(name) {
                        return Err(tag(Error::DuplicateField(name.to_string())));
                    }
                }
                let (schema, _) = source.project(&names).map_err(tag)?;
                let c = source.total_bits();
                (PlanOp::Project { input, fields: fields.clone() }, schema, c)
            }
            Query::Join { left, right, similarity, combine } => {
                let left = self.visit(left)?;
                let right = self.visit(right)?;
                let (rs, ss) = (&self.steps[left].schema, &self.steps[right].schema);
                let similarity = build_similarity(similarity, rs, ss).map_err(tag)?;
                let combine = build_combine(combine, rs, ss).map_err(tag)?;
                let schema = combine.output_schema().clone();
                let c = join_qubits(rs, ss);
                (PlanOp::Join { left, right, similarity, combine }, schema, c)
            }
            Query::Sample { input, shots } => {
                if *shots == 0 {
                    return Err(tag(Error::InvalidState("SHOTS must be at least 1".into())));
                }
                let input = self.visit(input)?;
                let schema = self.steps[input].schema.clone();
                let c = 2 * schema.total_bits();
                (PlanOp::Sample { input, shots: *shots as usize }, schema, c)
            }
        };
        if self.config.engine.runs_quantum() {
            check_budget(qubits, self.config.max_qubits).map_err(tag)?;
        }
        self.steps.push(PlanStep { node, op, schema, qubits, engine: self.config.engine });
        Ok(self.steps.len() - 1)
    }
}

fn resolve(base: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn build_similarity(spec: &SimilaritySpec, r: &Schema, s: &Schema) -> Result<SimilarityOp, Error> {
    match spec {
        SimilaritySpec::Eq { left, right } => SimilarityOp::equal(r, left, s, right),
        SimilaritySpec::Within { left, right, scale } => SimilarityOp::within(r, left, s, right, *scale),
        SimilaritySpec::Const { re, im } => {
            let z = Complex64::new(*re, *im);
            if z.norm().is_nan() || z.norm() > 1.0 {
                return Err(Error::InvalidSimilarity(z.to_string(), "magnitude exceeds 1"));
            }
            Ok(SimilarityOp::constant(r, s, z))
        }
    }
}

fn build_combine(spec: &CombineSpec, r: &Schema, s: &Schema) -> Result<CombineOp, Error> {
    match spec {
        CombineSpec::Concat => CombineOp::concat(r, s),
        CombineSpec::ConcatDrop(field) => CombineOp::concat_drop(r, s, field),
        CombineSpec::Fields(refs) => CombineOp::select_fields(r, s, refs),
    }
}
