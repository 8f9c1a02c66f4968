//! Relations, their bit-level tuple encoding, and quantum state preparation.
//!
//! A tuple is packed into `c` bits with the first declared field in the most
//! significant bits. On a register, bit `b` of the tuple is qubit `b`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::qstate::{check_budget, QubitIndexSet, StateVector};

/// Widest tuple that still fits a `u64` bit pattern.
pub const MAX_TUPLE_BITS: usize = 63;

/// Tolerance on `sum(P) = 1` for a stored relation.
pub const PROBABILITY_TOLERANCE: f64 = 1e-10;

/// Probabilities at or below this are treated as absent rows.
pub const PROBABILITY_FLOOR: f64 = 1e-24;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Field {
    pub name: String,
    pub width: u32,
}

impl Field {
    pub fn new(name: impl Into<String>, width: u32) -> Self {
        Field { name: name.into(), width }
    }

    pub fn max_value(&self) -> u64 {
        (1u64 << self.width) - 1
    }
}

/// Ordered named fields with bit widths.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Schema {
    fields: Vec<Field>,
}

impl Schema {
    pub fn new(fields: Vec<Field>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InvalidSchema("a schema needs at least one field".into()));
        }
        for (i, f) in fields.iter().enumerate() {
            if f.width == 0 {
                return Err(Error::InvalidSchema(format!("field `{}` has width 0", f.name)));
            }
            if !is_identifier(&f.name) {
                return Err(Error::InvalidSchema(format!("`{}` is not a valid field name", f.name)));
            }
            if fields[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::DuplicateField(f.name.clone()));
            }
        }
        let total: usize = fields.iter().map(|f| f.width as usize).sum();
        if total > MAX_TUPLE_BITS {
            return Err(Error::InvalidSchema(format!(
                "{total} bits exceed the {MAX_TUPLE_BITS}-bit tuple limit"
            )));
        }
        Ok(Schema { fields })
    }

    /// Convenience constructor from `(name, width)` pairs.
    pub fn from_pairs(pairs: &[(&str, u32)]) -> Result<Self> {
        Schema::new(pairs.iter().map(|&(n, w)| Field::new(n, w)).collect())
    }

    /// Parses `name:width,name:width,...`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut fields = Vec::new();
        for part in text.split(',') {
            let (name, width) = part
                .split_once(':')
                .ok_or_else(|| Error::InvalidSchema(format!("expected name:width, got `{}`", part.trim())))?;
            let width = width
                .trim()
                .parse::<u32>()
                .map_err(|_| Error::InvalidSchema(format!("bad width `{}`", width.trim())))?;
            fields.push(Field::new(name.trim(), width));
        }
        Schema::new(fields)
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    /// Number of bits `c` in one encoded tuple.
    pub fn total_bits(&self) -> usize {
        self.fields.iter().map(|f| f.width as usize).sum()
    }

    pub fn field_index(&self, name: &str) -> Result<usize> {
        self.fields
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::UnknownField(name.to_string()))
    }

    pub fn has_field(&self, name: &str) -> bool {
        self.fields.iter().any(|f| f.name == name)
    }

    /// Position of the least significant bit of field `index`.
    pub fn shift(&self, index: usize) -> u32 {
        self.fields[index + 1..].iter().map(|f| f.width).sum()
    }

    /// Qubits holding field `index`, in increasing order.
    pub fn field_qubits(&self, index: usize) -> QubitIndexSet {
        QubitIndexSet::range(self.shift(index) as usize, self.fields[index].width as usize)
    }

    /// Packs per-field values into a tuple.
    pub fn encode_tuple(&self, values: &[u64]) -> Result<Tuple> {
        if values.len() != self.fields.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} values for a {}-field schema",
                values.len(),
                self.fields.len()
            )));
        }
        let mut bits = 0u64;
        for (f, &v) in self.fields.iter().zip(values) {
            if v > f.max_value() {
                return Err(Error::FieldOverflow { field: f.name.clone(), value: v, width: f.width });
            }
            bits = (bits << f.width) | v;
        }
        Ok(Tuple(bits))
    }

    pub fn decode_tuple(&self, tuple: Tuple) -> Vec<u64> {
        (0..self.fields.len()).map(|i| self.value(tuple, i)).collect()
    }

    /// Value of field `index` in `tuple`.
    pub fn value(&self, tuple: Tuple, index: usize) -> u64 {
        (tuple.0 >> self.shift(index)) & self.fields[index].max_value()
    }

    pub fn contains(&self, tuple: Tuple) -> bool {
        tuple.0 >> self.total_bits() == 0
    }

    /// Sub-schema made of `keep` (in the given order) plus the source indices.
    pub fn project(&self, keep: &[&str]) -> Result<(Schema, Vec<usize>)> {
        if keep.is_empty() {
            return Err(Error::InvalidSchema("projection needs at least one field".into()));
        }
        let indices = keep.iter().map(|k| self.field_index(k)).collect::<Result<Vec<_>>>()?;
        let fields = indices.iter().map(|&i| self.fields[i].clone()).collect();
        Ok((Schema::new(fields)?, indices))
    }

    /// Re-packs the fields `indices` of `tuple` into a tuple of `target`.
    pub fn reproject(&self, tuple: Tuple, indices: &[usize], target: &Schema) -> Tuple {
        let values: Vec<u64> = indices.iter().map(|&i| self.value(tuple, i)).collect();
        target
            .encode_tuple(&values)
            .expect("projected values fit their own fields")
    }

    /// `(v1,v2,...)`
    pub fn format_tuple(&self, tuple: Tuple) -> String {
        let values: Vec<String> = self.decode_tuple(tuple).iter().map(u64::to_string).collect();
        format!("({})", values.join(","))
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.fields.iter().map(|x| format!("{}:{}", x.name, x.width)).collect();
        f.write_str(&parts.join(","))
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Encoded tuple bits; field layout comes from a [`Schema`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tuple(pub u64);

impl Tuple {
    pub fn bits(self) -> u64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Row {
    pub probability: f64,
    /// Radians; the row's amplitude is `sqrt(probability) * exp(i * phase)`.
    pub phase: f64,
}

impl Row {
    pub fn new(probability: f64) -> Self {
        Row { probability, phase: 0.0 }
    }

    pub fn with_phase(probability: f64, phase: f64) -> Self {
        Row { probability, phase }
    }

    pub fn amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.probability.sqrt(), self.phase)
    }
}

/// A relation whose rows carry probabilities summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedRelation {
    schema: Schema,
    rows: BTreeMap<Tuple, Row>,
}

impl WeightedRelation {
    /// Validating constructor: probabilities in (0, 1], total 1, no duplicate tuples.
    pub fn new(schema: Schema, rows: impl IntoIterator<Item = (Tuple, Row)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (t, row) in rows {
            if !schema.contains(t) {
                return Err(Error::InvalidRelation(format!(
                    "tuple bits {} exceed the {}-bit schema",
                    t.0,
                    schema.total_bits()
                )));
            }
            if !(row.probability > 0.0 && row.probability <= 1.0) || !row.phase.is_finite() {
                return Err(Error::InvalidRelation(format!(
                    "row {} has probability {}",
                    schema.format_tuple(t),
                    row.probability
                )));
            }
            if map.insert(t, row).is_some() {
                return Err(Error::InvalidRelation(format!(
                    "duplicate row {}",
                    schema.format_tuple(t)
                )));
            }
        }
        if map.is_empty() {
            return Err(Error::InvalidRelation("relation has no rows".into()));
        }
        let total: f64 = map.values().map(|r| r.probability).sum();
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::InvalidRelation(format!("probabilities sum to {total}, not 1")));
        }
        Ok(WeightedRelation { schema, rows: map })
    }

    pub fn from_probabilities(
        schema: Schema,
        rows: impl IntoIterator<Item = (Tuple, f64)>,
    ) -> Result<Self> {
        WeightedRelation::new(schema, rows.into_iter().map(|(t, p)| (t, Row::new(p))))
    }

    /// Builds a relation from nonnegative weights, merging duplicate tuples,
    /// dropping negligible weights, and rescaling to total probability one.
    pub fn normalized(
        schema: Schema,
        weights: impl IntoIterator<Item = (Tuple, f64, f64)>,
    ) -> Result<Self> {
        let mut merged: BTreeMap<Tuple, (f64, f64)> = BTreeMap::new();
        for (t, w, phase) in weights {
            let e = merged.entry(t).or_insert((0.0, phase));
            e.0 += w;
        }
        let total: f64 = merged.values().filter(|(w, _)| *w > PROBABILITY_FLOOR).map(|(w, _)| w).sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let rows = merged
            .into_iter()
            .filter(|(_, (w, _))| *w > PROBABILITY_FLOOR)
            .map(|(t, (w, phase))| (t, Row::with_phase((w / total).min(1.0), phase)));
        WeightedRelation::new(schema, rows)
    }

    pub fn uniform(schema: Schema, tuples: &[Tuple]) -> Result<Self> {
        let p = 1.0 / tuples.len() as f64;
        WeightedRelation::normalized(schema, tuples.iter().map(|&t| (t, p, 0.0)))
    }

    pub fn singleton(schema: Schema, tuple: Tuple) -> Result<Self> {
        WeightedRelation::new(schema, [(tuple, Row::new(1.0))])
    }

    /// Reads the relation held by a state over `schema`'s register.
    pub fn from_state(schema: Schema, state: &StateVector) -> Result<Self> {
        if state.num_qubits() != schema.total_bits() {
            return Err(Error::SchemaMismatch(format!(
                "{}-qubit state for a {}-bit schema",
                state.num_qubits(),
                schema.total_bits()
            )));
        }
        WeightedRelation::normalized(
            schema,
            state
                .amplitudes()
                .iter()
                .enumerate()
                .map(|(i, a)| (Tuple(i as u64), a.norm_sqr(), a.arg())),
        )
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &BTreeMap<Tuple, Row> {
        &self.rows
    }

    pub fn iter(&self) -> impl Iterator<Item = (Tuple, &Row)> {
        self.rows.iter().map(|(t, r)| (*t, r))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `P(tuple)`, zero for absent rows.
    pub fn probability(&self, tuple: Tuple) -> f64 {
        self.rows.get(&tuple).map_or(0.0, |r| r.probability)
    }

    pub fn total_probability(&self) -> f64 {
        self.rows.values().map(|r| r.probability).sum()
    }

    /// Amplitude `sqrt(P(t)) e^{i phase(t)}` at basis index `t` on `c` qubits.
    pub fn prepare_state(&self, max_qubits: usize) -> Result<StateVector> {
        let c = self.schema.total_bits();
        check_budget(c, max_qubits)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << c];
        for (t, row) in &self.rows {
            amps[t.0 as usize] = row.amplitude();
        }
        StateVector::from_amplitudes(amps)
    }

    /// Serializes to the line-oriented relation format.
    pub fn to_text(&self) -> String {
        let mut out = format!("schema: {}\n", self.schema);
        for (t, row) in &self.rows {
            let values: Vec<String> = self.schema.decode_tuple(*t).iter().map(u64::to_string).collect();
            out.push_str(&values.join(","));
            out.push_str(&format!(" @p={}", row.probability));
            if row.phase != 0.0 {
                out.push_str(&format!(" @phase={}", row.phase));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the line-oriented relation format; `origin` names the source in errors.
    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let file_err = |line: usize, message: String| Error::File {
            path: origin.to_string(),
            message: format!("line {line}: {message}"),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (n, header) = lines.next().ok_or_else(|| file_err(1, "missing schema header".into()))?;
        let spec = header
            .strip_prefix("schema:")
            .ok_or_else(|| file_err(n, "expected `schema: name:width,...`".into()))?;
        let schema = Schema::parse(spec).map_err(|e| file_err(n, e.to_string()))?;

        let mut parsed: Vec<(usize, Tuple, Option<f64>, f64)> = Vec::new();
        for (n, line) in lines {
            let (values, suffix) = match line.find('@') {
                Some(at) => (&line[..at], &line[at..]),
                None => (line, ""),
            };
            let values = values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<u64>()
                        .map_err(|_| file_err(n, format!("bad field value `{}`", v.trim())))
                })
                .collect::<Result<Vec<_>>>()?;
            let tuple = schema.encode_tuple(&values).map_err(|e| match e {
                Error::SchemaMismatch(m) => file_err(n, m),
                other => other,
            })?;
            let (mut p, mut phase) = (None, 0.0);
            for attr in suffix.split_whitespace() {
                let (key, val) = attr
                    .strip_prefix('@')
                    .and_then(|a| a.split_once('='))
                    .ok_or_else(|| file_err(n, format!("bad attribute `{attr}`")))?;
                let val: f64 = val
                    .parse()
                    .map_err(|_| file_err(n, format!("bad number `{val}`")))?;
                match key {
                    "p" => p = Some(val),
                    "phase" => phase = val,
                    _ => return Err(file_err(n, format!("unknown attribute `@{key}`"))),
                }
            }
            if let Some(p) = p {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(file_err(n, format!("probability {p} outside (0, 1]")));
                }
            }
            parsed.push((n, tuple, p, phase));
        }

        let explicit: f64 = parsed.iter().filter_map(|r| r.2).sum();
        let unweighted = parsed.iter().filter(|r| r.2.is_none()).count();
        let share = if unweighted > 0 {
            let rest = 1.0 - explicit;
            if rest <= PROBABILITY_TOLERANCE {
                return Err(file_err(n, "no probability mass left for unweighted rows".into()));
            }
            rest / unweighted as f64
        } else {
            0.0
        };
        let mut rows = Vec::with_capacity(parsed.len());
        for (n, t, p, phase) in parsed {
            if rows.iter().any(|(u, _)| *u == t) {
                return Err(file_err(n, format!("duplicate row {}", schema.format_tuple(t))));
            }
            rows.push((t, Row::with_phase(p.unwrap_or(share), phase)));
        }
        WeightedRelation::new(schema, rows).map_err(|e| match e {
            Error::InvalidRelation(m) => Error::File { path: origin.to_string(), message: m },
            other => other,
        })
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        WeightedRelation::from_text(&text, &path.display().to_string())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Amplitude-level MIX of two relations: `(psi_a + psi_b) / sqrt 2`, rescaled.
pub fn mix_combine(a: &WeightedRelation, b: &WeightedRelation) -> Result<WeightedRelation> {
    if a.schema != b.schema {
        return Err(Error::SchemaMismatch(format!("{} vs {}", a.schema, b.schema)));
    }
    let mut amps: BTreeMap<Tuple, Complex64> = BTreeMap::new();
    for (t, row) in a.iter().chain(b.iter()) {
        *amps.entry(t).or_insert(Complex64::new(0.0, 0.0)) += row.amplitude() * std::f64::consts::FRAC_1_SQRT_2;
    }
    WeightedRelation::normalized(
        a.schema.clone(),
        amps.into_iter().map(|(t, z)| (t, z.norm_sqr(), z.arg())),
    )
}

/// Output of [`mix_network`].
#[derive(Clone, Debug, PartialEq)]
pub struct MixNetwork {
    pub relation: WeightedRelation,
    pub depth: usize,
}

/// Balanced binary tree of [`mix_combine`] over `2^N` leaves; depth `N`.
///
/// Leaves are paired in order at every layer. Repeated tuples are allowed and interfere.
pub fn mix_network(leaves: &[WeightedRelation]) -> Result<MixNetwork> {
    if leaves.is_empty() || !leaves.len().is_power_of_two() {
        return Err(Error::NotPowerOfTwo(leaves.len()));
    }
    let mut layer: Vec<WeightedRelation> = leaves.to_vec();
    let mut depth = 0;
    while layer.len() > 1 {
        layer = layer
            .chunks(2)
            .map(|pair| mix_combine(&pair[0], &pair[1]))
            .collect::<Result<_>>()?;
        depth += 1;
    }
    Ok(MixNetwork { relation: layer.pop().expect("one root"), depth })
}

/// Stochastic tuple generator: copy the data register into a fresh ancilla
/// register with CNOTs and measure the copy.
///
/// The data occupies the high `c` qubits and the ancilla the low `c`, so a
/// measured ancilla pattern is the tuple bits. The copied state is identical
/// for every shot, so it is built once and measured `shots` times.
pub fn sample_oracle(
    rel: &WeightedRelation,
    shots: usize,
    seed: u64,
    max_qubits: usize,
) -> Result<Vec<Tuple>> {
    if shots == 0 {
        return Err(Error::InvalidState("shots must be at least 1".into()));
    }
    let c = rel.schema.total_bits();
    check_budget(2 * c, max_qubits)?;
    let data = rel.prepare_state(max_qubits)?;
    let mut state = data.kron(&StateVector::zero(c)?)?;
    let ancilla = QubitIndexSet::range(0, c);
    state.apply_cnot_copy(&QubitIndexSet::range(c, c), &ancilla)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(state
        .sample(shots, &mut rng)
        .into_iter()
        .map(|b| Tuple(ancilla.extract(b)))
        .collect())
}
