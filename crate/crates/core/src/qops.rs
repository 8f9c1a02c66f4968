//! Relational primitives as quantum operators.
//!
//! Selection is amplitude amplification of the predicate's subspace, projection
//! is a marginal over the kept fields' qubits, and the generalized join prepares
//! the product of both relations, rotates an ancilla by the pairwise similarity,
//! amplifies `ancilla = 1`, relabels through the combining operator and discards
//! everything but the output fields.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qstate::{check_budget, QubitIndexSet, StateVector};
use crate::relation::{Field, Schema, Tuple, WeightedRelation};

/// Slack allowed on `|z| <= 1` for similarity values.
const SIMILARITY_SLACK: f64 = 1e-12;

/// How a similarity value `z` turns into a probability weight and a phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SimilarityLevel {
    /// `z` must be real in `[0, 1]`; weight `z`, phase 0.
    #[default]
    Real,
    /// Any `|z| <= 1`; weight `|z|^2`, phase `arg z`.
    Complex,
}

/// Weight and phase of one similarity evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityWeight {
    pub weight: f64,
    pub phase: f64,
}

type SimilarityFn = Arc<dyn Fn(Tuple, Tuple) -> Complex64 + Send + Sync>;
type CombineFn = Arc<dyn Fn(Tuple, Tuple) -> Tuple + Send + Sync>;

#[derive(Clone)]
enum SimilarityKind {
    Const(Complex64),
    Equal { left: usize, right: usize },
    Within { left: usize, right: usize, scale: f64 },
    Custom(SimilarityFn),
}

/// Pairwise similarity between tuples of a left and a right schema.
#[derive(Clone)]
pub struct SimilarityOp {
    left: Schema,
    right: Schema,
    kind: SimilarityKind,
}

impl fmt::Debug for SimilarityOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            SimilarityKind::Const(z) => format!("const({z})"),
            SimilarityKind::Equal { left, right } => format!("eq({left},{right})"),
            SimilarityKind::Within { left, right, scale } => format!("within({left},{right},{scale})"),
            SimilarityKind::Custom(_) => "custom".to_string(),
        };
        f.debug_struct("SimilarityOp")
            .field("left", &self.left.to_string())
            .field("right", &self.right.to_string())
            .field("kind", &kind)
            .finish()
    }
}

impl SimilarityOp {
    pub fn constant(left: &Schema, right: &Schema, z: Complex64) -> Self {
        SimilarityOp { left: left.clone(), right: right.clone(), kind: SimilarityKind::Const(z) }
    }

    /// Equality indicator on `left_field` of the left tuple and `right_field` of the right.
    pub fn equal(left: &Schema, left_field: &str, right: &Schema, right_field: &str) -> Result<Self> {
        Ok(SimilarityOp {
            kind: SimilarityKind::Equal {
                left: left.field_index(left_field)?,
                right: right.field_index(right_field)?,
            },
            left: left.clone(),
            right: right.clone(),
        })
    }

    /// `1 - |a - b| / scale`, clamped to `[0, 1]`.
    pub fn within(
        left: &Schema,
        left_field: &str,
        right: &Schema,
        right_field: &str,
        scale: f64,
    ) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidSimilarity(scale.to_string(), "within() scale must be positive"));
        }
        Ok(SimilarityOp {
            kind: SimilarityKind::Within {
                left: left.field_index(left_field)?,
                right: right.field_index(right_field)?,
                scale,
            },
            left: left.clone(),
            right: right.clone(),
        })
    }

    pub fn custom<F>(left: &Schema, right: &Schema, f: F) -> Self
    where
        F: Fn(Tuple, Tuple) -> Complex64 + Send + Sync + 'static,
    {
        SimilarityOp { left: left.clone(), right: right.clone(), kind: SimilarityKind::Custom(Arc::new(f)) }
    }

    pub fn left_schema(&self) -> &Schema {
        &self.left
    }

    pub fn right_schema(&self) -> &Schema {
        &self.right
    }

    /// Raw similarity value; fails when `|z| > 1`.
    pub fn eval(&self, i: Tuple, j: Tuple) -> Result<Complex64> {
        let z = match &self.kind {
            SimilarityKind::Const(z) => *z,
            SimilarityKind::Equal { left, right } => {
                let hit = self.left.value(i, *left) == self.right.value(j, *right);
                Complex64::new(if hit { 1.0 } else { 0.0 }, 0.0)
            }
            SimilarityKind::Within { left, right, scale } => {
                let a = self.left.value(i, *left) as f64;
                let b = self.right.value(j, *right) as f64;
                Complex64::new((1.0 - (a - b).abs() / scale).clamp(0.0, 1.0), 0.0)
            }
            SimilarityKind::Custom(f) => f(i, j),
        };
        if z.norm().is_nan() || z.norm() > 1.0 + SIMILARITY_SLACK {
            return Err(Error::InvalidSimilarity(z.to_string(), "magnitude exceeds 1"));
        }
        Ok(z)
    }

    pub fn weight(&self, i: Tuple, j: Tuple, level: SimilarityLevel) -> Result<SimilarityWeight> {
        let z = self.eval(i, j)?;
        match level {
            SimilarityLevel::Real => {
                if z.im.abs() > SIMILARITY_SLACK || z.re < -SIMILARITY_SLACK {
                    return Err(Error::InvalidSimilarity(
                        z.to_string(),
                        "real similarity must lie in [0, 1]",
                    ));
                }
                Ok(SimilarityWeight { weight: z.re.clamp(0.0, 1.0), phase: 0.0 })
            }
            SimilarityLevel::Complex => Ok(SimilarityWeight { weight: z.norm_sqr().min(1.0), phase: z.arg() }),
        }
    }

    pub(crate) fn check_arity(&self, r: &Schema, s: &Schema) -> Result<()> {
        if &self.left != r || &self.right != s {
            return Err(Error::SchemaMismatch(format!(
                "similarity expects ({}) x ({}), got ({}) x ({})",
                self.left, self.right, r, s
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// A field reference in a combine list; `side = None` resolves left first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FieldRef {
    pub side: Option<Side>,
    pub name: String,
}

impl FieldRef {
    pub fn bare(name: impl Into<String>) -> Self {
        FieldRef { side: None, name: name.into() }
    }

    pub fn left(name: impl Into<String>) -> Self {
        FieldRef { side: Some(Side::Left), name: name.into() }
    }

    pub fn right(name: impl Into<String>) -> Self {
        FieldRef { side: Some(Side::Right), name: name.into() }
    }
}

#[derive(Clone)]
enum CombineKind {
    Fields(Vec<(Side, usize)>),
    Custom(CombineFn),
}

/// Combining operator mapping a (left, right) tuple pair to an output tuple.
#[derive(Clone)]
pub struct CombineOp {
    left: Schema,
    right: Schema,
    output: Schema,
    kind: CombineKind,
}

impl fmt::Debug for CombineOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CombineOp")
            .field("left", &self.left.to_string())
            .field("right", &self.right.to_string())
            .field("output", &self.output.to_string())
            .finish()
    }
}

impl CombineOp {
    /// All left fields followed by all right fields.
    pub fn concat(left: &Schema, right: &Schema) -> Result<Self> {
        let sources = (0..left.fields().len())
            .map(|i| (Side::Left, i))
            .chain((0..right.fields().len()).map(|i| (Side::Right, i)))
            .collect();
        CombineOp::from_sources(left, right, sources)
    }

    /// Concatenation without the right relation's copy of `field`.
    pub fn concat_drop(left: &Schema, right: &Schema, field: &str) -> Result<Self> {
        let dropped = right.field_index(field)?;
        let sources = (0..left.fields().len())
            .map(|i| (Side::Left, i))
            .chain((0..right.fields().len()).filter(|&i| i != dropped).map(|i| (Side::Right, i)))
            .collect();
        CombineOp::from_sources(left, right, sources)
    }

    /// Output made of the listed fields in order (permutation plus projection).
    pub fn select_fields(left: &Schema, right: &Schema, refs: &[FieldRef]) -> Result<Self> {
        if refs.is_empty() {
            return Err(Error::InvalidSchema("combine list is empty".into()));
        }
        let sources = refs
            .iter()
            .map(|r| match r.side {
                Some(Side::Left) => left.field_index(&r.name).map(|i| (Side::Left, i)),
                Some(Side::Right) => right.field_index(&r.name).map(|i| (Side::Right, i)),
                None => left
                    .field_index(&r.name)
                    .map(|i| (Side::Left, i))
                    .or_else(|_| right.field_index(&r.name).map(|i| (Side::Right, i))),
            })
            .collect::<Result<Vec<_>>>()?;
        CombineOp::from_sources(left, right, sources)
    }

    pub fn custom<F>(left: &Schema, right: &Schema, output: Schema, f: F) -> Self
    where
        F: Fn(Tuple, Tuple) -> Tuple + Send + Sync + 'static,
    {
        CombineOp { left: left.clone(), right: right.clone(), output, kind: CombineKind::Custom(Arc::new(f)) }
    }

    fn from_sources(left: &Schema, right: &Schema, sources: Vec<(Side, usize)>) -> Result<Self> {
        let mut fields: Vec<Field> = Vec::with_capacity(sources.len());
        for &(side, i) in &sources {
            let f = match side {
                Side::Left => &left.fields()[i],
                Side::Right => &right.fields()[i],
            };
            let mut name = f.name.clone();
            let mut n = 2;
            while fields.iter().any(|g| g.name == name) {
                name = format!("{}_{n}", f.name);
                n += 1;
            }
            fields.push(Field::new(name, f.width));
        }
        Ok(CombineOp {
            left: left.clone(),
            right: right.clone(),
            output: Schema::new(fields)?,
            kind: CombineKind::Fields(sources),
        })
    }

    pub fn output_schema(&self) -> &Schema {
        &self.output
    }

    /// True when every input field survives into the output, so distinct
    /// input pairs map to distinct outputs. Custom operators report false.
    pub fn is_injective(&self) -> bool {
        match &self.kind {
            CombineKind::Fields(src) => {
                (0..self.left.fields().len()).all(|i| src.contains(&(Side::Left, i)))
                    && (0..self.right.fields().len()).all(|i| src.contains(&(Side::Right, i)))
            }
            CombineKind::Custom(_) => false,
        }
    }

    pub fn eval(&self, i: Tuple, j: Tuple) -> Result<Tuple> {
        match &self.kind {
            CombineKind::Fields(src) => {
                let values: Vec<u64> = src
                    .iter()
                    .map(|&(side, f)| match side {
                        Side::Left => self.left.value(i, f),
                        Side::Right => self.right.value(j, f),
                    })
                    .collect();
                self.output.encode_tuple(&values)
            }
            CombineKind::Custom(f) => {
                let k = f(i, j);
                if !self.output.contains(k) {
                    return Err(Error::InvalidRelation(format!(
                        "combine produced bits {} outside schema {}",
                        k.0, self.output
                    )));
                }
                Ok(k)
            }
        }
    }

    pub(crate) fn check_arity(&self, r: &Schema, s: &Schema) -> Result<()> {
        if &self.left != r || &self.right != s {
            return Err(Error::SchemaMismatch(format!(
                "combine expects ({}) x ({}), got ({}) x ({})",
                self.left, self.right, r, s
            )));
        }
        Ok(())
    }
}

/// Grover iteration count: automatic or fixed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Iterations {
    #[default]
    Auto,
    Fixed(usize),
}

/// `floor((pi / 4) * sqrt(1 / f))`.
pub fn optimal_iterations(fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    Ok((PI / 4.0 * (1.0 / fraction).sqrt()).floor() as usize)
}

/// Probability mass on the basis states selected by `predicate`.
pub fn amplitude_of_marked<F: Fn(u64) -> bool>(state: &StateVector, predicate: F) -> f64 {
    state.marked_probability(predicate)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionReport {
    pub iterations: usize,
    /// Marked probability mass `f` of the input state.
    pub selection_fraction: f64,
    pub final_success_probability: f64,
    /// `(iteration, marked amplitude)` after each full iteration, starting at 0.
    pub amplitude_trace: Vec<(usize, f64)>,
    /// Marked amplitude after every half step: start, flip, diffusion, flip, ...
    pub step_trace: Vec<f64>,
    /// Phase flips plus diffusions applied.
    pub grover_steps: u64,
}

impl SelectionReport {
    /// `sqrt(1 / f)`, the order of the iteration count.
    pub fn sqrt_inverse_fraction(&self) -> f64 {
        (1.0 / self.selection_fraction).sqrt()
    }

    /// `sqrt(f)`, reported alongside for comparison with the `O(sqrt f)` reading.
    pub fn sqrt_fraction(&self) -> f64 {
        self.selection_fraction.sqrt()
    }
}

/// Amplitude amplification of the subspace selected by `predicate`.
///
/// Each iteration flips the phase of the marked basis states and then reflects
/// about the input state. For a uniform input that reflection is the inversion
/// about the average of [`StateVector::apply_diffusion`]; for any other input it
/// keeps the state in the plane of its marked and unmarked components, so the
/// marked probability after `k` rounds is `sin^2((2k+1) asin(sqrt f))`.
///
/// The traced "marked amplitude" is the overlap with the normalized marked part
/// of the input, which is real and signed.
pub fn grover_select<F: Fn(u64) -> bool>(
    state: &StateVector,
    predicate: F,
    iterations: Iterations,
) -> Result<(StateVector, SelectionReport)> {
    let f = state.marked_probability(&predicate);
    if f <= 0.0 {
        return Err(Error::EmptySelection);
    }
    let k = match iterations {
        Iterations::Auto => optimal_iterations(f.min(1.0))?,
        Iterations::Fixed(k) => k,
    };
    let scale = 1.0 / f.sqrt();
    let good: Vec<(usize, Complex64)> = state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(i, a)| predicate(*i as u64) && a.norm_sqr() > 0.0)
        .map(|(i, a)| (i, a * scale))
        .collect();
    let overlap = |s: &StateVector| -> f64 {
        good.iter().map(|(i, g)| g.conj() * s.amplitudes()[*i]).sum::<Complex64>().re
    };

    let axis = state.clone();
    let mut psi = state.clone();
    let mut amplitude_trace = vec![(0, overlap(&psi))];
    let mut step_trace = vec![overlap(&psi)];
    for it in 1..=k {
        psi.apply_phase_flip(&predicate);
        step_trace.push(overlap(&psi));
        psi.reflect_about(&axis)?;
        let a = overlap(&psi);
        step_trace.push(a);
        amplitude_trace.push((it, a));
    }
    let report = SelectionReport {
        iterations: k,
        selection_fraction: f,
        final_success_probability: psi.marked_probability(&predicate).min(1.0),
        amplitude_trace,
        step_trace,
        grover_steps: 2 * k as u64,
    };
    Ok((psi, report))
}

/// Grover selection on a relation's register.
///
/// With `postselect` the result is conditioned on the predicate holding
/// (phases kept); otherwise it is the full measured distribution.
pub fn select_relation<P: Fn(Tuple) -> bool>(
    rel: &WeightedRelation,
    predicate: P,
    iterations: Iterations,
    postselect: bool,
    max_qubits: usize,
) -> Result<(WeightedRelation, SelectionReport)> {
    let state = rel.prepare_state(max_qubits)?;
    let (out, report) = grover_select(&state, |b| predicate(Tuple(b)), iterations)?;
    let rows = out
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(b, _)| !postselect || predicate(Tuple(*b as u64)))
        .map(|(b, a)| (Tuple(b as u64), a.norm_sqr(), a.arg()));
    Ok((WeightedRelation::normalized(rel.schema().clone(), rows)?, report))
}

/// Marginal over the qubits of `keep_fields`, returned as a relation over
/// those fields (in the listed order).
pub fn project(state: &StateVector, schema: &Schema, keep_fields: &[&str]) -> Result<WeightedRelation> {
    if state.num_qubits() != schema.total_bits() {
        return Err(Error::SchemaMismatch(format!(
            "{}-qubit state for a {}-bit schema",
            state.num_qubits(),
            schema.total_bits()
        )));
    }
    for (n, name) in keep_fields.iter().enumerate() {
        if keep_fields[..n].contains(name) {
            return Err(Error::DuplicateField(name.to_string()));
        }
    }
    let (target, indices) = schema.project(keep_fields)?;
    let mut qubits: Vec<usize> = indices
        .iter()
        .flat_map(|&i| schema.field_qubits(i).indices().to_vec())
        .collect();
    qubits.sort_unstable();
    let keep = QubitIndexSet::new(qubits, state.num_qubits())?;
    let marginal = state.marginal_distribution(&keep)?;
    let rows = marginal.into_iter().map(|(pattern, p)| {
        let basis = deposit(pattern, keep.indices());
        (schema.reproject(Tuple(basis), &indices, &target), p, 0.0)
    }).collect::<Vec<_>>();
    WeightedRelation::normalized(target, rows)
}

/// Scatters bit `j` of `pattern` to position `positions[j]`.
fn deposit(pattern: u64, positions: &[usize]) -> u64 {
    positions
        .iter()
        .enumerate()
        .fold(0, |acc, (j, &q)| acc | (((pattern >> j) & 1) << q))
}

/// `C_ab = sum_i sum_j w(i, j) P_a(i) P_b(j)`.
pub fn conditional_similarity(
    a: &WeightedRelation,
    b: &WeightedRelation,
    sim: &SimilarityOp,
    level: SimilarityLevel,
) -> Result<f64> {
    sim.check_arity(a.schema(), b.schema())?;
    let mut total = 0.0;
    for (i, ri) in a.iter() {
        for (j, rj) in b.iter() {
            total += sim.weight(i, j, level)?.weight * ri.probability * rj.probability;
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

/// What happens to basis states that the combining operator sends to the same output.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CollisionMode {
    /// The inputs stay on their registers as discarded fields and are traced
    /// out, so colliding pairs add probabilities.
    #[default]
    TraceDiscarded,
    /// Amplitudes of colliding pairs are summed before measurement and may interfere.
    Coherent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JoinOptions {
    pub iterations: Iterations,
    pub level: SimilarityLevel,
    /// Condition the output on `ancilla = 1`; otherwise return the unconditioned distribution.
    pub postselect: bool,
    pub collisions: CollisionMode,
    pub max_qubits: usize,
}

impl Default for JoinOptions {
    fn default() -> Self {
        JoinOptions {
            iterations: Iterations::Auto,
            level: SimilarityLevel::Real,
            postselect: true,
            collisions: CollisionMode::TraceDiscarded,
            max_qubits: crate::qstate::DEFAULT_MAX_QUBITS,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JoinReport {
    /// Ancilla `= 1` mass after the similarity rotation.
    pub conditional_similarity: f64,
    pub iterations: usize,
    /// Ancilla `= 1` mass after amplification.
    pub success_probability: f64,
    /// One similarity rotation plus a phase flip and a diffusion per iteration.
    pub quantum_steps: u64,
    /// `|r| * |s|` pair comparisons of the classical nested loop.
    pub classical_steps_reference: u64,
    pub selection: SelectionReport,
}

/// Qubits needed by [`join_quantum`]: both registers plus one ancilla.
pub fn join_qubits(r: &Schema, s: &Schema) -> usize {
    r.total_bits() + s.total_bits() + 1
}

/// Generalized join on the simulator.
///
/// Register layout (high to low): `r` tuple, `s` tuple, ancilla qubit 0.
pub fn join_quantum(
    r: &WeightedRelation,
    s: &WeightedRelation,
    combine: &CombineOp,
    sim: &SimilarityOp,
    options: &JoinOptions,
) -> Result<(WeightedRelation, JoinReport)> {
    sim.check_arity(r.schema(), s.schema())?;
    combine.check_arity(r.schema(), s.schema())?;
    let cs = s.schema().total_bits();
    check_budget(join_qubits(r.schema(), s.schema()), options.max_qubits)?;

    // Similarity and combine are evaluated once per supported pair; errors surface here.
    let mut pairs: BTreeMap<u64, (SimilarityWeight, Tuple)> = BTreeMap::new();
    for (i, _) in r.iter() {
        for (j, _) in s.iter() {
            let w = sim.weight(i, j, options.level)?;
            let k = combine.eval(i, j)?;
            pairs.insert((i.0 << cs) | j.0, (w, k));
        }
    }

    let mut state = r
        .prepare_state(options.max_qubits)?
        .kron(&s.prepare_state(options.max_qubits)?)?
        .kron(&StateVector::zero(1)?)?;

    state.apply_controlled_unitary(0, |rest| {
        let w = pairs.get(&(rest >> 1)).map_or(SimilarityWeight { weight: 0.0, phase: 0.0 }, |p| p.0);
        similarity_rotation(w)
    })?;
    let c_rs = state.marked_probability(|b| b & 1 == 1);

    let (state, selection) = match grover_select(&state, |b| b & 1 == 1, options.iterations) {
        Err(Error::EmptySelection) => return Err(Error::EmptyJoin),
        other => other?,
    };

    let output = combine.output_schema().clone();
    let rows: Vec<(Tuple, f64, f64)> = match options.collisions {
        CollisionMode::TraceDiscarded => {
            let mut probs: BTreeMap<Tuple, f64> = BTreeMap::new();
            for (b, a) in state.amplitudes().iter().enumerate() {
                let b = b as u64;
                if (options.postselect && b & 1 == 0) || a.norm_sqr() == 0.0 {
                    continue;
                }
                if let Some((_, k)) = pairs.get(&(b >> 1)) {
                    *probs.entry(*k).or_insert(0.0) += a.norm_sqr();
                }
            }
            probs.into_iter().map(|(k, p)| (k, p, 0.0)).collect()
        }
        CollisionMode::Coherent => {
            let mut amps: BTreeMap<(Tuple, u64), Complex64> = BTreeMap::new();
            for (b, a) in state.amplitudes().iter().enumerate() {
                let b = b as u64;
                if options.postselect && b & 1 == 0 {
                    continue;
                }
                if let Some((_, k)) = pairs.get(&(b >> 1)) {
                    *amps.entry((*k, b & 1)).or_insert(Complex64::new(0.0, 0.0)) += a;
                }
            }
            let keep_phase = options.postselect;
            amps.into_iter()
                .map(|((k, _), z)| (k, z.norm_sqr(), if keep_phase { z.arg() } else { 0.0 }))
                .collect()
        }
    };
    let result = WeightedRelation::normalized(output, rows).map_err(|e| match e {
        Error::ZeroNorm => Error::EmptyJoin,
        other => other,
    })?;

    let report = JoinReport {
        conditional_similarity: c_rs.clamp(0.0, 1.0),
        iterations: selection.iterations,
        success_probability: selection.final_success_probability,
        quantum_steps: 1 + selection.grover_steps,
        classical_steps_reference: (r.len() * s.len()) as u64,
        selection,
    };
    Ok((result, report))
}

/// `|0> -> sqrt(1-w)|0> + sqrt(w) e^{i phi}|1>`, completed to a unitary.
fn similarity_rotation(w: SimilarityWeight) -> [[Complex64; 2]; 2] {
    let c = Complex64::new((1.0 - w.weight).max(0.0).sqrt(), 0.0);
    let s = Complex64::from_polar(w.weight.sqrt(), w.phase);
    [[c, -s.conj()], [s, c]]
}
