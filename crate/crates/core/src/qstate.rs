//! Dense state-vector engine.
//!
//! Amplitudes are stored as a dense array indexed by the basis integer.
//! Qubit 0 is the least significant bit of the basis index, so a bit pattern
//! read off a register maps onto an index with plain shifts and masks.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default register ceiling: 2^24 amplitudes (256 MiB of `Complex64`).
pub const DEFAULT_MAX_QUBITS: usize = 24;

/// Largest drift of the squared norm from 1 that is tolerated before rescaling.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Absolute ceiling regardless of configuration; basis indices must fit in memory.
pub const HARD_MAX_QUBITS: usize = 30;

/// Fails with `QubitBudgetExceeded` when `needed > max`.
pub fn check_budget(needed: usize, max: usize) -> Result<()> {
    if needed > max || needed > HARD_MAX_QUBITS {
        return Err(Error::QubitBudgetExceeded { needed, max: max.min(HARD_MAX_QUBITS) });
    }
    Ok(())
}

/// Strictly increasing list of qubit positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QubitIndexSet(Vec<usize>);

impl QubitIndexSet {
    pub fn new(indices: Vec<usize>, num_qubits: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidQubitSet(format!(
                "indices {indices:?} are not strictly increasing"
            )));
        }
        let set = QubitIndexSet(indices);
        set.check_range(num_qubits)?;
        Ok(set)
    }

    /// Contiguous run `start..start + len`.
    pub fn range(start: usize, len: usize) -> Self {
        QubitIndexSet((start..start + len).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, qubit: usize) -> bool {
        self.0.binary_search(&qubit).is_ok()
    }

    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0, |m, &q| m | (1u64 << q))
    }

    /// Gathers the selected bits of `basis`: bit `j` of the result is qubit `indices[j]`.
    pub fn extract(&self, basis: u64) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &q)| acc | (((basis >> q) & 1) << j))
    }

    fn check_range(&self, num_qubits: usize) -> Result<()> {
        match self.0.iter().find(|&&q| q >= num_qubits) {
            Some(q) => Err(Error::InvalidQubitSet(format!(
                "qubit {q} out of range for a {num_qubits}-qubit register"
            ))),
            None => Ok(()),
        }
    }
}

/// Entries of a state's audit log.
#[derive(Clone, Debug, PartialEq)]
pub enum AuditEvent {
    /// A non-unitary matrix was applied; `pre_norm` is the norm before rescaling.
    NonUnitary { gate: &'static str, pre_norm: f64 },
    /// Accumulated drift exceeded [`NORM_TOLERANCE`] and the state was rescaled.
    Renormalized { norm_sqr: f64 },
}

#[derive(Clone, Debug)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
    audit: Vec<AuditEvent>,
}

impl PartialEq for StateVector {
    fn eq(&self, other: &Self) -> bool {
        self.num_qubits == other.num_qubits && self.amplitudes == other.amplitudes
    }
}

fn check_width(num_qubits: usize) -> Result<()> {
    if num_qubits == 0 {
        return Err(Error::InvalidState("a register needs at least one qubit".into()));
    }
    check_budget(num_qubits, HARD_MAX_QUBITS)
}

impl StateVector {
    /// `|0...0>` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        Self::basis(num_qubits, 0)
    }

    /// Computational basis state `|index>`.
    pub fn basis(num_qubits: usize, index: u64) -> Result<Self> {
        check_width(num_qubits)?;
        let dim = 1usize << num_qubits;
        if index as usize >= dim {
            return Err(Error::InvalidState(format!(
                "basis index {index} out of range for {num_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index as usize] = Complex64::new(1.0, 0.0);
        Ok(StateVector { num_qubits, amplitudes, audit: Vec::new() })
    }

    /// Equal superposition over all `2^num_qubits` basis states.
    pub fn uniform(num_qubits: usize) -> Result<Self> {
        check_width(num_qubits)?;
        let dim = 1usize << num_qubits;
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Ok(StateVector { num_qubits, amplitudes: vec![a; dim], audit: Vec::new() })
    }

    /// Wraps raw amplitudes. The length must be a power of two (at least 2);
    /// an unnormalized vector is rescaled and the rescale is logged.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidState(format!(
                "amplitude vector length {dim} is not a power of two >= 2"
            )));
        }
        let num_qubits = dim.trailing_zeros() as usize;
        check_width(num_qubits)?;
        let mut state = StateVector { num_qubits, amplitudes, audit: Vec::new() };
        state.ensure_normalized()?;
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: u64) -> Complex64 {
        self.amplitudes[index as usize]
    }

    pub fn audit_log(&self) -> &[AuditEvent] {
        &self.audit
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Total probability of the basis states selected by `marked`.
    pub fn marked_probability<F: Fn(u64) -> bool>(&self, marked: F) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| marked(*i as u64))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.same_shape(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Tensor product with `self` on the high qubits and `low` on the low qubits.
    pub fn kron(&self, low: &StateVector) -> Result<StateVector> {
        let num_qubits = self.num_qubits + low.num_qubits;
        check_width(num_qubits)?;
        let mut amplitudes = Vec::with_capacity(1usize << num_qubits);
        for h in &self.amplitudes {
            amplitudes.extend(low.amplitudes.iter().map(|l| h * l));
        }
        Ok(StateVector { num_qubits, amplitudes, audit: Vec::new() })
    }

    /// Negates the amplitude of every basis state selected by `marked`.
    pub fn apply_phase_flip<F: Fn(u64) -> bool>(&mut self, marked: F) {
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if marked(i as u64) {
                *a = -*a;
            }
        }
    }

    /// Inversion about the average: `a_i <- 2 * mean(a) - a_i`.
    pub fn apply_diffusion(&mut self) {
        let mean: Complex64 =
            self.amplitudes.iter().sum::<Complex64>() / self.amplitudes.len() as f64;
        let twice = mean * 2.0;
        for a in &mut self.amplitudes {
            *a = twice - *a;
        }
        self.renormalize_drift();
    }

    /// Reflection about `axis`: `|psi> <- 2 <axis|psi> |axis> - |psi>`.
    ///
    /// For the uniform axis this is exactly [`apply_diffusion`](Self::apply_diffusion).
    pub fn reflect_about(&mut self, axis: &StateVector) -> Result<()> {
        let overlap = axis.inner(self)? * 2.0;
        for (a, x) in self.amplitudes.iter_mut().zip(&axis.amplitudes) {
            *a = overlap * x - *a;
        }
        self.renormalize_drift();
        Ok(())
    }

    /// XORs each source bit into the matching target bit (pairwise by position).
    ///
    /// Every target qubit must be `|0>` on the support of the state.
    pub fn apply_cnot_copy(
        &mut self,
        source: &QubitIndexSet,
        target: &QubitIndexSet,
    ) -> Result<()> {
        source.check_range(self.num_qubits)?;
        target.check_range(self.num_qubits)?;
        if source.len() != target.len() {
            return Err(Error::InvalidQubitSet(format!(
                "source has {} qubits but target has {}",
                source.len(),
                target.len()
            )));
        }
        if source.mask() & target.mask() != 0 {
            return Err(Error::InvalidQubitSet("source and target overlap".into()));
        }
        let target_mask = target.mask();
        for (i, a) in self.amplitudes.iter().enumerate() {
            let i = i as u64;
            if i & target_mask != 0 && a.norm_sqr() > 0.0 {
                let qubit = target.indices().iter().find(|&&q| (i >> q) & 1 == 1);
                return Err(Error::TargetNotZero { qubit: *qubit.unwrap(), basis: i });
            }
        }
        let pairs: Vec<(usize, usize)> =
            source.indices().iter().copied().zip(target.indices().iter().copied()).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); self.amplitudes.len()];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let i = i as u64;
            let j = pairs
                .iter()
                .fold(i, |acc, &(s, t)| acc ^ (((i >> s) & 1) << t));
            out[j as usize] = *a;
        }
        self.amplitudes = out;
        Ok(())
    }

    /// Applies a 2x2 gate to `target`, chosen per basis state of the remaining qubits.
    ///
    /// `gate_for` receives the basis index with the target bit cleared and returns
    /// the matrix (row-major, acting on `(|0>, |1>)`) for that branch. This is a
    /// uniformly controlled gate; each returned matrix must be unitary.
    pub fn apply_controlled_unitary<F>(&mut self, target: usize, gate_for: F) -> Result<()>
    where
        F: Fn(u64) -> [[Complex64; 2]; 2],
    {
        if target >= self.num_qubits {
            return Err(Error::InvalidQubitSet(format!("qubit {target} out of range")));
        }
        let bit = 1usize << target;
        for i0 in (0..self.amplitudes.len()).filter(|i| i & bit == 0) {
            let i1 = i0 | bit;
            let (a0, a1) = (self.amplitudes[i0], self.amplitudes[i1]);
            if a0.norm_sqr() == 0.0 && a1.norm_sqr() == 0.0 {
                continue;
            }
            let m = gate_for(i0 as u64);
            self.amplitudes[i0] = m[0][0] * a0 + m[0][1] * a1;
            self.amplitudes[i1] = m[1][0] * a0 + m[1][1] * a1;
        }
        self.ensure_normalized()
    }

    /// Applies a 4x4 matrix to the qubit pair `(a, b)` and rescales to unit norm.
    ///
    /// The pair's local index is `(bit_a << 1) | bit_b`, i.e. `|ab>`. Returns the
    /// norm before rescaling; a non-norm-preserving application is logged.
    pub fn apply_two_qubit_matrix(
        &mut self,
        qubit_a: usize,
        qubit_b: usize,
        matrix: &[[Complex64; 4]; 4],
        label: &'static str,
    ) -> Result<f64> {
        if qubit_a == qubit_b {
            return Err(Error::InvalidQubitSet("pair qubits must differ".into()));
        }
        if qubit_a.max(qubit_b) >= self.num_qubits {
            return Err(Error::InvalidQubitSet(format!(
                "pair ({qubit_a}, {qubit_b}) out of range"
            )));
        }
        let (ba, bb) = (1usize << qubit_a, 1usize << qubit_b);
        let mut out = self.amplitudes.clone();
        for base in (0..self.amplitudes.len()).filter(|i| i & (ba | bb) == 0) {
            let idx = [base, base | bb, base | ba, base | ba | bb];
            let v = idx.map(|i| self.amplitudes[i]);
            for (row, &i) in idx.iter().enumerate() {
                out[i] = (0..4).map(|col| matrix[row][col] * v[col]).sum();
            }
        }
        let norm_sqr: f64 = out.iter().map(|a| a.norm_sqr()).sum();
        if norm_sqr == 0.0 || !norm_sqr.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let pre_norm = norm_sqr.sqrt();
        for a in &mut out {
            *a /= pre_norm;
        }
        self.amplitudes = out;
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE || label == MIX_LABEL {
            self.audit.push(AuditEvent::NonUnitary { gate: label, pre_norm });
        }
        Ok(pre_norm)
    }

    /// Applies the literal MIX matrix to `(qubit_a, qubit_b)`, then rescales.
    ///
    /// The matrix is not unitary, so every application is recorded on the audit
    /// log. Returns the pre-normalization norm so callers can recover the raw
    /// matrix-vector product.
    pub fn mix_matrix_apply(&mut self, qubit_a: usize, qubit_b: usize) -> Result<f64> {
        self.apply_two_qubit_matrix(qubit_a, qubit_b, &mix_matrix(), MIX_LABEL)
    }

    /// Draws one basis index with probability `|a_i|^2`; deterministic in `seed`.
    pub fn measure_all(&self, seed: u64) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample(1, &mut rng)[0]
    }

    /// Draws `shots` independent basis indices from the Born distribution.
    pub fn sample<R: Rng + ?Sized>(&self, shots: usize, rng: &mut R) -> Vec<u64> {
        let mut cdf = Vec::with_capacity(self.amplitudes.len());
        let mut acc = 0.0;
        for a in &self.amplitudes {
            acc += a.norm_sqr();
            cdf.push(acc);
        }
        let last = self
            .amplitudes
            .iter()
            .rposition(|a| a.norm_sqr() > 0.0)
            .unwrap_or(0);
        (0..shots)
            .map(|_| {
                let u = rng.gen::<f64>() * acc;
                cdf.partition_point(|&c| c <= u).min(last) as u64
            })
            .collect()
    }

    /// Probability of each bit pattern over `keep`, summing out the other qubits.
    ///
    /// Bit `j` of a pattern is qubit `keep[j]`. Patterns with zero probability are omitted.
    pub fn marginal_distribution(&self, keep: &QubitIndexSet) -> Result<BTreeMap<u64, f64>> {
        if keep.is_empty() {
            return Err(Error::InvalidQubitSet("marginal needs at least one qubit".into()));
        }
        keep.check_range(self.num_qubits)?;
        let mut out = BTreeMap::new();
        for (i, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            if p > 0.0 {
                *out.entry(keep.extract(i as u64)).or_insert(0.0) += p;
            }
        }
        Ok(out)
    }

    fn same_shape(&self, other: &StateVector) -> Result<()> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::InvalidState(format!(
                "register widths differ ({} vs {})",
                self.num_qubits, other.num_qubits
            )));
        }
        Ok(())
    }

    fn ensure_normalized(&mut self) -> Result<()> {
        let norm_sqr = self.norm_sqr();
        if norm_sqr == 0.0 || !norm_sqr.is_finite() {
            return Err(Error::ZeroNorm);
        }
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
            let scale = 1.0 / norm_sqr.sqrt();
            for a in &mut self.amplitudes {
                *a *= scale;
            }
            self.audit.push(AuditEvent::Renormalized { norm_sqr });
        }
        Ok(())
    }

    // Only called after norm-preserving operations, where the norm cannot vanish.
    fn renormalize_drift(&mut self) {
        let _ = self.ensure_normalized();
    }
}

const MIX_LABEL: &str = "MIX";

/// The MIX combiner as a literal 4x4 matrix over `|ab>`.
pub fn mix_matrix() -> [[Complex64; 4]; 4] {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    [[one, z, z, z], [h, h, z, z], [z, z, h, h], [z, z, z, one]]
}
