//! Brute-force probabilistic relational algebra.
//!
//! Every quantum result is checked against these functions. Each operation also
//! reports how many classical steps it took under a simple cost model.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::qops::{CombineOp, SimilarityLevel, SimilarityOp};
use crate::relation::{Row, Tuple, WeightedRelation};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepCounter {
    pub comparisons: u64,
    pub index_lookups: u64,
}

/// Rows satisfying `predicate`, renormalized. One comparison per row.
pub fn classical_select<P: Fn(Tuple) -> bool>(
    rel: &WeightedRelation,
    predicate: P,
) -> Result<(WeightedRelation, StepCounter)> {
    let mut counter = StepCounter::default();
    let mut kept = Vec::new();
    for (t, row) in rel.iter() {
        counter.comparisons += 1;
        if predicate(t) {
            kept.push((t, *row));
        }
    }
    let mass: f64 = kept.iter().map(|(_, r)| r.probability).sum();
    if kept.is_empty() || mass <= 0.0 {
        return Err(Error::EmptySelection);
    }
    let rows = kept
        .into_iter()
        .map(|(t, r)| (t, Row::with_phase((r.probability / mass).min(1.0), r.phase)));
    Ok((WeightedRelation::new(rel.schema().clone(), rows)?, counter))
}

/// Marginal over `keep_fields`: sums rows that agree on the kept fields.
pub fn classical_project(rel: &WeightedRelation, keep_fields: &[&str]) -> Result<WeightedRelation> {
    for (n, name) in keep_fields.iter().enumerate() {
        if keep_fields[..n].contains(name) {
            return Err(Error::DuplicateField(name.to_string()));
        }
    }
    let (target, indices) = rel.schema().project(keep_fields)?;
    let mut sums: BTreeMap<Tuple, f64> = BTreeMap::new();
    for (t, row) in rel.iter() {
        *sums.entry(rel.schema().reproject(t, &indices, &target)).or_insert(0.0) += row.probability;
    }
    WeightedRelation::normalized(target, sums.into_iter().map(|(t, p)| (t, p, 0.0)))
}

/// `P_p(k) = sum_{i,j : k = i (+) j} w(i, j) P_r(i) P_s(j) / C_rs` by exhaustive
/// double loop; `|r| * |s|` comparisons.
pub fn classical_join(
    r: &WeightedRelation,
    s: &WeightedRelation,
    combine: &CombineOp,
    sim: &SimilarityOp,
    level: SimilarityLevel,
) -> Result<(WeightedRelation, StepCounter)> {
    check_operands(r, s, combine, sim)?;
    let mut counter = StepCounter::default();
    let mut mass: BTreeMap<Tuple, f64> = BTreeMap::new();
    let mut c_rs = 0.0;
    for (i, ri) in r.iter() {
        for (j, sj) in s.iter() {
            counter.comparisons += 1;
            let w = sim.weight(i, j, level)?.weight * ri.probability * sj.probability;
            if w > 0.0 {
                *mass.entry(combine.eval(i, j)?).or_insert(0.0) += w;
                c_rs += w;
            }
        }
    }
    if c_rs <= 0.0 {
        return Err(Error::EmptyJoin);
    }
    let rel = WeightedRelation::normalized(
        combine.output_schema().clone(),
        mass.into_iter().map(|(k, w)| (k, w / c_rs, 0.0)),
    )?;
    Ok((rel, counter))
}

fn check_operands(
    r: &WeightedRelation,
    s: &WeightedRelation,
    combine: &CombineOp,
    sim: &SimilarityOp,
) -> Result<()> {
    sim.check_arity(r.schema(), s.schema())?;
    combine.check_arity(r.schema(), s.schema())
}

fn ceil_log2(n: usize) -> u64 {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as u64
    }
}

/// Equijoin of `r` with `s` on `key_field`, a primary key of `s`, through a
/// sorted index on `s`.
///
/// The output is `r`'s fields followed by `s`'s non-key fields. Each of the
/// `|r|` lookups is charged `ceil(log2 |s|)` comparisons (binary search).
pub fn classical_equijoin_indexed(
    r: &WeightedRelation,
    s: &WeightedRelation,
    key_field: &str,
) -> Result<(WeightedRelation, StepCounter)> {
    let rk = r.schema().field_index(key_field)?;
    let sk = s.schema().field_index(key_field)?;
    let combine = CombineOp::concat_drop(r.schema(), s.schema(), key_field)?;

    let mut index: Vec<(u64, Tuple, f64)> =
        s.iter().map(|(t, row)| (s.schema().value(t, sk), t, row.probability)).collect();
    index.sort_by_key(|e| e.0);
    if index.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::NotPrimaryKey(key_field.to_string()));
    }

    let per_lookup = ceil_log2(index.len());
    let mut counter = StepCounter::default();
    let mut mass: BTreeMap<Tuple, f64> = BTreeMap::new();
    let mut c_rs = 0.0;
    for (i, ri) in r.iter() {
        counter.index_lookups += 1;
        counter.comparisons += per_lookup;
        let key = r.schema().value(i, rk);
        if let Ok(pos) = index.binary_search_by_key(&key, |e| e.0) {
            let (_, j, pj) = index[pos];
            let w = ri.probability * pj;
            *mass.entry(combine.eval(i, j)?).or_insert(0.0) += w;
            c_rs += w;
        }
    }
    if c_rs <= 0.0 {
        return Err(Error::EmptyJoin);
    }
    let rel = WeightedRelation::normalized(
        combine.output_schema().clone(),
        mass.into_iter().map(|(k, w)| (k, w / c_rs, 0.0)),
    )?;
    Ok((rel, counter))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistributionDistance {
    pub total_variation: f64,
    pub max_abs_diff: f64,
}

/// Total variation distance and largest pointwise difference.
pub fn compare_distributions(a: &WeightedRelation, b: &WeightedRelation) -> Result<DistributionDistance> {
    if a.schema() != b.schema() {
        return Err(Error::SchemaMismatch(format!("{} vs {}", a.schema(), b.schema())));
    }
    let mut l1 = 0.0;
    let mut max_abs_diff: f64 = 0.0;
    let keys: std::collections::BTreeSet<Tuple> = a.rows().keys().chain(b.rows().keys()).copied().collect();
    for t in keys {
        let d = (a.probability(t) - b.probability(t)).abs();
        l1 += d;
        max_abs_diff = max_abs_diff.max(d);
    }
    Ok(DistributionDistance { total_variation: 0.5 * l1, max_abs_diff })
}

/// Draws `shots` rows from the relation's distribution.
pub fn classical_sample(rel: &WeightedRelation, shots: usize, seed: u64) -> Vec<Tuple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<(Tuple, f64)> = rel.iter().map(|(t, r)| (t, r.probability)).collect();
    let total: f64 = rows.iter().map(|r| r.1).sum();
    (0..shots)
        .map(|_| {
            let mut u = rng.gen::<f64>() * total;
            for &(t, p) in &rows {
                if u < p {
                    return t;
                }
                u -= p;
            }
            rows[rows.len() - 1].0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::Schema;
    use num_complex::Complex64;

    fn schema2() -> Schema {
        Schema::from_pairs(&[("f1", 1), ("f2", 1)]).unwrap()
    }

    #[test]
    fn select_examples() {
        let s = Schema::from_pairs(&[("x", 2)]).unwrap();
        let rel = WeightedRelation::uniform(s.clone(), &[Tuple(0), Tuple(1), Tuple(2), Tuple(3)]).unwrap();
        let (out, c) = classical_select(&rel, |t| t == Tuple(2)).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.probability(Tuple(2)), 1.0);
        assert_eq!(c.comparisons, 4);

        let (all, _) = classical_select(&rel, |_| true).unwrap();
        assert_eq!(all, rel);

        let skew = WeightedRelation::from_probabilities(s, [(Tuple(0), 0.9), (Tuple(1), 0.1)]).unwrap();
        let (one, _) = classical_select(&skew, |t| t == Tuple(1)).unwrap();
        assert_eq!(one.probability(Tuple(1)), 1.0);
        assert_eq!(classical_select(&skew, |_| false).unwrap_err(), Error::EmptySelection);
    }

    #[test]
    fn project_examples() {
        let s = schema2();
        let rel = WeightedRelation::uniform(s.clone(), &[Tuple(0b00), Tuple(0b01)]).unwrap();
        let p = classical_project(&rel, &["f1"]).unwrap();
        assert_eq!(p.probability(Tuple(0)), 1.0);
        assert_eq!(classical_project(&rel, &["f1", "f2"]).unwrap(), rel);

        let rel = WeightedRelation::from_probabilities(
            s,
            [(Tuple(0b00), 0.25), (Tuple(0b10), 0.25), (Tuple(0b11), 0.5)],
        )
        .unwrap();
        let p = classical_project(&rel, &["f1"]).unwrap();
        assert!((p.probability(Tuple(0)) - 0.25).abs() < 1e-15);
        assert!((p.probability(Tuple(1)) - 0.75).abs() < 1e-15);
        assert_eq!(classical_project(&rel, &["nope"]), Err(Error::UnknownField("nope".into())));
    }

    #[test]
    fn join_examples() {
        let rs = Schema::from_pairs(&[("a", 1)]).unwrap();
        let ss = Schema::from_pairs(&[("b", 1)]).unwrap();
        let r = WeightedRelation::uniform(rs.clone(), &[Tuple(0), Tuple(1)]).unwrap();
        let s = WeightedRelation::uniform(ss.clone(), &[Tuple(0), Tuple(1)]).unwrap();
        let cat = CombineOp::concat(&rs, &ss).unwrap();
        let one = SimilarityOp::constant(&rs, &ss, Complex64::new(1.0, 0.0));
        let (p, c) = classical_join(&r, &s, &cat, &one, SimilarityLevel::Real).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|(_, row)| (row.probability - 0.25).abs() < 1e-15));
        assert_eq!(c.comparisons, 4);
        assert!((p.total_probability() - 1.0).abs() < 1e-12);

        let r1 = WeightedRelation::singleton(rs.clone(), Tuple(1)).unwrap();
        let s1 = WeightedRelation::singleton(ss.clone(), Tuple(0)).unwrap();
        let (p, _) = classical_join(&r1, &s1, &cat, &one, SimilarityLevel::Real).unwrap();
        assert_eq!(p.probability(Tuple(0b10)), 1.0);

        let zero = SimilarityOp::constant(&rs, &ss, Complex64::new(0.0, 0.0));
        assert_eq!(classical_join(&r, &s, &cat, &zero, SimilarityLevel::Real).unwrap_err(), Error::EmptyJoin);
    }

    #[test]
    fn equijoin_counters() {
        let rs = Schema::from_pairs(&[("k", 3), ("a", 1)]).unwrap();
        let ss = Schema::from_pairs(&[("k", 3), ("b", 1)]).unwrap();
        let r = WeightedRelation::uniform(
            rs.clone(),
            &(0..4u64).map(|k| rs.encode_tuple(&[k, k & 1]).unwrap()).collect::<Vec<_>>(),
        )
        .unwrap();
        let s = WeightedRelation::uniform(
            ss.clone(),
            &(0..8u64).map(|k| ss.encode_tuple(&[k, 1]).unwrap()).collect::<Vec<_>>(),
        )
        .unwrap();
        let (p, c) = classical_equijoin_indexed(&r, &s, "k").unwrap();
        assert_eq!(c.index_lookups, 4);
        assert_eq!(c.comparisons, 12);
        assert_eq!(p.len(), 4);

        let eq = SimilarityOp::equal(&rs, "k", &ss, "k").unwrap();
        let comb = CombineOp::concat_drop(&rs, &ss, "k").unwrap();
        let (q, _) = classical_join(&r, &s, &comb, &eq, SimilarityLevel::Real).unwrap();
        assert!(compare_distributions(&p, &q).unwrap().total_variation < 1e-15);

        let r1 = WeightedRelation::singleton(rs.clone(), Tuple(0)).unwrap();
        let s1 = WeightedRelation::singleton(ss.clone(), Tuple(0)).unwrap();
        let (_, c) = classical_equijoin_indexed(&r1, &s1, "k").unwrap();
        assert_eq!(c.index_lookups, 1);
        assert_eq!(c.comparisons, 0);

        let dup = WeightedRelation::uniform(
            ss.clone(),
            &[ss.encode_tuple(&[1, 0]).unwrap(), ss.encode_tuple(&[1, 1]).unwrap()],
        )
        .unwrap();
        assert_eq!(classical_equijoin_indexed(&r, &dup, "k").unwrap_err(), Error::NotPrimaryKey("k".into()));
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!([1, 2, 3, 4, 5, 8, 9].map(ceil_log2), [0, 1, 2, 2, 3, 3, 4]);
    }

    #[test]
    fn compare_examples() {
        let s = Schema::from_pairs(&[("x", 2)]).unwrap();
        let a = WeightedRelation::singleton(s.clone(), Tuple(1)).unwrap();
        let b = WeightedRelation::singleton(s.clone(), Tuple(2)).unwrap();
        let d = compare_distributions(&a, &a).unwrap();
        assert_eq!((d.total_variation, d.max_abs_diff), (0.0, 0.0));
        let d = compare_distributions(&a, &b).unwrap();
        assert_eq!((d.total_variation, d.max_abs_diff), (1.0, 1.0));
        let x = WeightedRelation::from_probabilities(s.clone(), [(Tuple(0), 0.6), (Tuple(1), 0.4)]).unwrap();
        let y = WeightedRelation::from_probabilities(s, [(Tuple(0), 0.5), (Tuple(1), 0.5)]).unwrap();
        let d = compare_distributions(&x, &y).unwrap();
        assert!((d.total_variation - 0.1).abs() < 1e-15 && (d.max_abs_diff - 0.1).abs() < 1e-15);
        let other = WeightedRelation::singleton(Schema::from_pairs(&[("y", 2)]).unwrap(), Tuple(1)).unwrap();
        assert!(matches!(compare_distributions(&a, &other), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn sample_is_seeded() {
        let s = Schema::from_pairs(&[("x", 2)]).unwrap();
        let rel = WeightedRelation::from_probabilities(s, [(Tuple(0), 0.7), (Tuple(3), 0.3)]).unwrap();
        assert_eq!(classical_sample(&rel, 100, 4), classical_sample(&rel, 100, 4));
        assert!(classical_sample(&rel, 100, 4).iter().all(|t| *t == Tuple(0) || *t == Tuple(3)));
    }
}
