//! Random join instances plus a from-scratch join oracle, shared by the
//! integration and acceptance targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use qrel::qops::{CombineOp, FieldRef, SimilarityOp};
use qrel::relation::{Schema, Tuple, WeightedRelation};
use rand::seq::SliceRandom;
use rand::Rng;

/// Tables are indexed by the 4-bit tuple encodings of `r` and `s`.
pub struct Instance {
    pub r: WeightedRelation,
    pub s: WeightedRelation,
    pub sim: SimilarityOp,
    pub combine: CombineOp,
    pub weights: Arc<Vec<f64>>,
    pub colliding: bool,
}

pub fn r_schema() -> Schema {
    Schema::from_pairs(&[("a", 2), ("k", 2)]).unwrap()
}

pub fn s_schema() -> Schema {
    Schema::from_pairs(&[("k", 2), ("b", 2)]).unwrap()
}

pub fn random_relation<R: Rng>(rng: &mut R, schema: Schema, max_rows: usize) -> WeightedRelation {
    let n = rng.gen_range(1..=max_rows);
    let mut universe: Vec<u64> = (0..1u64 << schema.total_bits()).collect();
    universe.shuffle(rng);
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let rows = universe[..n].iter().zip(&weights).map(|(&t, &w)| (Tuple(t), w / total, 0.0));
    WeightedRelation::normalized(schema, rows).unwrap()
}

/// Output tuple of the naive oracle, computed from raw bits.
pub fn naive_combine(colliding: bool, i: Tuple, j: Tuple) -> u64 {
    if colliding {
        // (a, b): drops both k fields, so distinct pairs can collide
        ((i.0 >> 2) << 2) | (j.0 & 0b11)
    } else {
        (i.0 << 4) | j.0
    }
}

pub fn random_instance<R: Rng>(rng: &mut R, colliding: bool) -> Instance {
    let (rs, ss) = (r_schema(), s_schema());
    let r = random_relation(rng, rs.clone(), 8);
    let s = random_relation(rng, ss.clone(), 8);
    let weights: Arc<Vec<f64>> = Arc::new((0..256).map(|_| rng.gen_range(0.0..=1.0)).collect());
    let table = Arc::clone(&weights);
    let sim = SimilarityOp::custom(&rs, &ss, move |i, j| {
        Complex64::new(table[((i.0 << 4) | j.0) as usize], 0.0)
    });
    let combine = if colliding {
        CombineOp::select_fields(&rs, &ss, &[FieldRef::left("a"), FieldRef::right("b")]).unwrap()
    } else {
        CombineOp::concat(&rs, &ss).unwrap()
    };
    Instance { r, s, sim, combine, weights, colliding }
}

pub struct NaiveJoin {
    pub distribution: BTreeMap<u64, f64>,
    pub conditional_similarity: f64,
}

/// P(t) ∝ Σ_{i ⊕ j = t} p_i q_j w_ij, computed with plain loops over the rows.
pub fn naive_join(inst: &Instance) -> NaiveJoin {
    let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
    let mut c = 0.0;
    for (i, ri) in inst.r.iter() {
        for (j, sj) in inst.s.iter() {
            let w = inst.weights[((i.0 << 4) | j.0) as usize];
            let mass = ri.probability * sj.probability * w;
            c += mass;
            *acc.entry(naive_combine(inst.colliding, i, j)).or_insert(0.0) += mass;
        }
    }
    for p in acc.values_mut() {
        *p /= c;
    }
    acc.retain(|_, p| *p > 0.0);
    NaiveJoin { distribution: acc, conditional_similarity: c }
}

pub fn total_variation(a: &BTreeMap<u64, f64>, b: &WeightedRelation) -> f64 {
    let mut keys: Vec<u64> = a.keys().copied().collect();
    keys.extend(b.iter().map(|(t, _)| t.0));
    keys.sort_unstable();
    keys.dedup();
    0.5 * keys
        .iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.probability(Tuple(*k))).abs())
        .sum::<f64>()
}
