use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::coracle::{
    classical_join, classical_project, classical_sample, classical_select, compare_distributions,
    DistributionDistance,
};
use crate::error::Error;
use crate::qops::{
    join_quantum, project, select_relation, CollisionMode, Iterations, JoinOptions, SimilarityLevel,
};
use crate::relation::{sample_oracle, Schema, Tuple, WeightedRelation};

use super::ast::Query;
use super::plan::{Engine, PlanOp, QueryPlan};
use super::{NodeRef, QueryError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExecOptions {
    pub seed: u64,
    pub iterations: Iterations,
    pub level: SimilarityLevel,
    pub postselect: bool,
    pub collisions: CollisionMode,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            seed: 0,
            iterations: Iterations::Auto,
            level: SimilarityLevel::Real,
            postselect: true,
            collisions: CollisionMode::TraceDiscarded,
        }
    }
}

/// Counters and diagnostics of one executed node.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeReport {
    pub iterations: Option<usize>,
    pub selection_fraction: Option<f64>,
    pub success_probability: Option<f64>,
    pub conditional_similarity: Option<f64>,
    pub quantum_steps: Option<u64>,
    pub classical_steps: Option<u64>,
    /// Quantum vs classical output of this node (`both` mode).
    pub distance: Option<DistributionDistance>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultDocument {
    pub engine: Engine,
    pub options: ExecOptions,
    pub query: Query,
    pub schema: Schema,
    /// Quantum result when the quantum engine ran, classical otherwise.
    pub distribution: WeightedRelation,
    /// Root `SAMPLE` draws, when the root is a sample node.
    pub samples: Option<Vec<Tuple>>,
    pub nodes: BTreeMap<NodeRef, NodeReport>,
}

#[derive(Default)]
struct Output {
    quantum: Option<WeightedRelation>,
    classical: Option<WeightedRelation>,
    quantum_samples: Option<Vec<Tuple>>,
    classical_samples: Option<Vec<Tuple>>,
}

fn empirical(schema: &Schema, samples: &[Tuple]) -> Result<WeightedRelation, Error> {
    let n = samples.len() as f64;
    WeightedRelation::normalized(schema.clone(), samples.iter().map(|&t| (t, 1.0 / n, 0.0)))
}

/// Runs every plan step on its engine(s); deterministic for fixed options.
pub fn execute(plan: &QueryPlan, options: &ExecOptions) -> Result<ResultDocument, QueryError> {
    let mut outputs: Vec<Output> = Vec::with_capacity(plan.steps.len());
    let mut nodes = BTreeMap::new();
    for step in &plan.steps {
        let tag = |e: Error| QueryError::at(step.node, e);
        let (q, c) = (step.engine.runs_quantum(), step.engine.runs_classical());
        let mut out = Output::default();
        let mut report = NodeReport::default();
        match &step.op {
            PlanOp::Load { relation, .. } => {
                out.quantum = q.then(|| relation.clone());
                out.classical = c.then(|| relation.clone());
            }
            PlanOp::Select { input, predicate } => {
                let schema = &plan.steps[*input].schema;
                let pred = |t: Tuple| predicate.eval(schema, t);
                if let Some(rel) = &outputs[*input].quantum {
                    let (res, sel) = select_relation(rel, pred, options.iterations, options.postselect, plan.max_qubits)
                        .map_err(tag)?;
                    report.iterations = Some(sel.iterations);
                    report.selection_fraction = Some(sel.selection_fraction);
                    report.success_probability = Some(sel.final_success_probability);
                    report.quantum_steps = Some(sel.grover_steps);
                    report.classical_steps = Some(rel.len() as u64);
                    out.quantum = Some(res);
                }
                if let Some(rel) = &outputs[*input].classical {
                    let (res, counter) = classical_select(rel, pred).map_err(tag)?;
                    report.classical_steps = Some(counter.comparisons);
                    out.classical = Some(res);
                }
            }
            PlanOp::Project { input, fields } => {
                let names: Vec<&str> = fields.iter().map(String::as_str).collect();
                if let Some(rel) = &outputs[*input].quantum {
                    let state = rel.prepare_state(plan.max_qubits).map_err(tag)?;
                    out.quantum = Some(project(&state, rel.schema(), &names).map_err(tag)?);
                    report.quantum_steps = Some(0);
                    report.classical_steps = Some(rel.len() as u64);
                }
                if let Some(rel) = &outputs[*input].classical {
                    out.classical = Some(classical_project(rel, &names).map_err(tag)?);
                    report.classical_steps = Some(rel.len() as u64);
                }
            }
            PlanOp::Join { left, right, similarity, combine } => {
                if let (Some(r), Some(s)) = (&outputs[*left].quantum, &outputs[*right].quantum) {
                    let opts = JoinOptions {
                        iterations: options.iterations,
                        level: options.level,
                        postselect: options.postselect,
                        collisions: options.collisions,
                        max_qubits: plan.max_qubits,
                    };
                    let (res, jr) = join_quantum(r, s, combine, similarity, &opts).map_err(tag)?;
                    report.iterations = Some(jr.iterations);
                    report.selection_fraction = Some(jr.conditional_similarity);
                    report.success_probability = Some(jr.success_probability);
                    report.conditional_similarity = Some(jr.conditional_similarity);
                    report.quantum_steps = Some(jr.quantum_steps);
                    report.classical_steps = Some(jr.classical_steps_reference);
                    out.quantum = Some(res);
                }
                if let (Some(r), Some(s)) = (&outputs[*left].classical, &outputs[*right].classical) {
                    let (res, counter) = classical_join(r, s, combine, similarity, options.level).map_err(tag)?;
                    report.classical_steps = Some(counter.comparisons);
                    out.classical = Some(res);
                }
            }
            PlanOp::Sample { input, shots } => {
                let seed = options.seed.wrapping_add(step.node.id as u64);
                if let Some(rel) = &outputs[*input].quantum {
                    let draws = sample_oracle(rel, *shots, seed, plan.max_qubits).map_err(tag)?;
                    out.quantum = Some(empirical(&step.schema, &draws).map_err(tag)?);
                    out.quantum_samples = Some(draws);
                    report.quantum_steps = Some(*shots as u64);
                }
                if let Some(rel) = &outputs[*input].classical {
                    let draws = classical_sample(rel, *shots, seed);
                    out.classical = Some(empirical(&step.schema, &draws).map_err(tag)?);
                    out.classical_samples = Some(draws);
                }
                report.classical_steps = Some(*shots as u64);
            }
        }
        if let (Some(a), Some(b)) = (&out.quantum, &out.classical) {
            report.distance = Some(compare_distributions(a, b).map_err(tag)?);
        }
        if !matches!(step.op, PlanOp::Load { .. }) {
            nodes.insert(step.node, report);
        }
        outputs.push(out);
    }

    let root = plan.root();
    let last = outputs.pop().expect("plan has a root");
    let (distribution, samples) = match (last.quantum, last.classical) {
        (Some(q), _) => (q, last.quantum_samples),
        (None, Some(c)) => (c, last.classical_samples),
        (None, None) => unreachable!("every step runs at least one engine"),
    };
    Ok(ResultDocument {
        engine: root.engine,
        options: *options,
        query: plan.query.clone(),
        schema: root.schema.clone(),
        distribution,
        samples,
        nodes,
    })
}

/// Fixed 12-decimal rendering; negative zero prints as zero.
fn fmt12(x: f64) -> String {
    let s = format!("{x:.12}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn write_header(out: &mut String, engine: Engine, options: &ExecOptions, query: Option<&Query>) {
    out.push_str("# qrel result\n");
    let _ = writeln!(out, "mode = {}", engine.name());
    let _ = writeln!(out, "seed = {}", options.seed);
    let iterations = match options.iterations {
        Iterations::Auto => "auto".to_string(),
        Iterations::Fixed(k) => k.to_string(),
    };
    let _ = writeln!(out, "iterations = {iterations}");
    let level = match options.level {
        SimilarityLevel::Real => 1,
        SimilarityLevel::Complex => 2,
    };
    let _ = writeln!(out, "similarity_level = {level}");
    let _ = writeln!(out, "postselect = {}", if options.postselect { "on" } else { "off" });
    if let Some(q) = query {
        let _ = writeln!(out, "query = {q}");
    }
}

impl ResultDocument {
    /// Byte-stable text rendering with sorted tuple keys.
    pub fn render(&self) -> String {
        let mut out = String::new();
        write_header(&mut out, self.engine, &self.options, Some(&self.query));

        let _ = write!(out, "\n[schema]\n{}\n", self.schema);

        out.push_str("\n[distribution]\n");
        for (t, row) in self.distribution.iter() {
            let _ = writeln!(out, "{} = {}", self.schema.format_tuple(t), fmt12(row.probability));
        }

        if let Some(samples) = &self.samples {
            let mut counts: BTreeMap<Tuple, usize> = BTreeMap::new();
            for t in samples {
                *counts.entry(*t).or_insert(0) += 1;
            }
            let _ = write!(out, "\n[samples]\nshots = {}\n", samples.len());
            for (t, n) in counts {
                let _ = writeln!(out, "{} = {n}", self.schema.format_tuple(t));
            }
        }

        out.push_str("\n[report]\n");
        let reports: Vec<&NodeReport> = self.nodes.values().collect();
        let quantum = self.engine.runs_quantum();
        if quantum {
            let iterations: usize = reports.iter().filter_map(|r| r.iterations).sum();
            let _ = writeln!(out, "iterations = {iterations}");
            let successes: Vec<f64> = reports.iter().filter_map(|r| r.success_probability).collect();
            if !successes.is_empty() {
                let _ = writeln!(out, "success_probability = {}", fmt12(successes.iter().product()));
            }
            // Nodes are in pre-order, so the first join is the outermost.
            if let Some(c) = reports.iter().find_map(|r| r.conditional_similarity) {
                let _ = writeln!(out, "conditional_similarity = {}", fmt12(c));
            }
            let steps: u64 = reports.iter().filter_map(|r| r.quantum_steps).sum();
            let _ = writeln!(out, "quantum_steps = {steps}");
        }
        let classical: u64 = reports.iter().filter_map(|r| r.classical_steps).sum();
        let _ = writeln!(out, "classical_steps = {classical}");
        if let Some(root) = self.nodes.iter().next().filter(|(n, _)| n.id == 0).map(|(_, r)| r) {
            if let Some(d) = root.distance {
                let _ = writeln!(out, "tv_distance = {}", fmt12(d.total_variation));
                let _ = writeln!(out, "max_abs_diff = {}", fmt12(d.max_abs_diff));
            }
        }

        for (node, r) in &self.nodes {
            let _ = write!(out, "\n[report.node.{}]\nkind = {}\n", node.id, node.kind);
            if let Some(k) = r.iterations {
                let _ = writeln!(out, "iterations = {k}");
            }
            if let Some(f) = r.selection_fraction {
                let _ = writeln!(out, "selection_fraction = {}", fmt12(f));
                let _ = writeln!(out, "sqrt_inverse_fraction = {}", fmt12((1.0 / f).sqrt()));
                let _ = writeln!(out, "sqrt_fraction = {}", fmt12(f.sqrt()));
            }
            if let Some(p) = r.success_probability {
                let _ = writeln!(out, "success_probability = {}", fmt12(p));
            }
            if let Some(c) = r.conditional_similarity {
                let _ = writeln!(out, "conditional_similarity = {}", fmt12(c));
            }
            if let Some(s) = r.quantum_steps {
                let _ = writeln!(out, "quantum_steps = {s}");
            }
            if let Some(s) = r.classical_steps {
                let _ = writeln!(out, "classical_steps = {s}");
            }
            if let Some(d) = r.distance {
                let _ = writeln!(out, "tv_distance = {}", fmt12(d.total_variation));
                let _ = writeln!(out, "max_abs_diff = {}", fmt12(d.max_abs_diff));
            }
        }
        out
    }
}

/// Error document in the same layout as a result document.
pub fn render_error(engine: Engine, options: &ExecOptions, query: Option<&Query>, err: &QueryError) -> String {
    let mut out = String::new();
    write_header(&mut out, engine, options, query);
    out.push_str("\n[error]\n");
    let _ = writeln!(out, "kind = {}", err.error.kind());
    if let Some(node) = err.node {
        let _ = writeln!(out, "node = {node}");
    }
    if let Error::Syntax { line, column, .. } = err.error {
        let _ = writeln!(out, "location = {line}:{column}");
    }
    let _ = writeln!(out, "message = {}", err.error);
    let _ = writeln!(out, "exit_code = {}", err.exit_code());
    out
}
