mod common;

use std::path::PathBuf;

use num_complex::Complex64;
use proptest::prelude::*;
use qrel::qdsl::{parse, run_query, CmpOp, CombineSpec, Engine, ExecOptions, Operand, PlanConfig, Predicate, Query, SimilaritySpec};
use qrel::qops::{conditional_similarity, grover_select, FieldRef, Iterations, SimilarityLevel, SimilarityOp};
use qrel::qstate::StateVector;
use qrel::relation::{Schema, WeightedRelation};
use qrel::Error;

fn random_state(amps: &[(f64, f64)]) -> StateVector {
    StateVector::from_amplitudes(amps.iter().map(|&(re, im)| Complex64::new(re, im)).collect()).unwrap()
}

fn amps(qubits: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1 << qubits)
        .prop_filter("nonzero", |v| v.iter().any(|&(a, b)| a.abs() + b.abs() > 1e-3))
}

fn max_diff(a: &StateVector, b: &StateVector) -> f64 {
    a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn encode_decode_round_trip(widths in prop::collection::vec(1u32..6, 1..5), seed in any::<u64>()) {
        let names = ["a", "b", "c", "d", "e"];
        let pairs: Vec<(&str, u32)> = widths.iter().enumerate().map(|(i, &w)| (names[i], w)).collect();
        let schema = Schema::from_pairs(&pairs).unwrap();
        let values: Vec<u64> = widths.iter().enumerate().map(|(i, &w)| (seed >> (i * 6)) & ((1 << w) - 1)).collect();
        let t = schema.encode_tuple(&values).unwrap();
        prop_assert_eq!(schema.decode_tuple(t), values);
        prop_assert!(t.0 < 1 << schema.total_bits());
    }

    #[test]
    fn overflowing_values_are_rejected(w in 1u32..8, excess in 0u64..100) {
        let schema = Schema::from_pairs(&[("x", w)]).unwrap();
        let bad = (1u64 << w) + excess;
        let is_overflow = matches!(schema.encode_tuple(&[bad]), Err(Error::FieldOverflow { .. }));
        prop_assert!(is_overflow);
    }

    #[test]
    fn phase_flip_is_an_involution(a in amps(3), mask in 0u64..256) {
        let s = random_state(&a);
        let mut t = s.clone();
        t.apply_phase_flip(|b| mask >> b & 1 == 1);
        t.apply_phase_flip(|b| mask >> b & 1 == 1);
        prop_assert!(max_diff(&s, &t) < 1e-15);
    }

    #[test]
    fn diffusion_is_an_involution_and_preserves_norm(a in amps(4)) {
        let s = random_state(&a);
        let mut t = s.clone();
        t.apply_diffusion();
        prop_assert!((t.norm_sqr() - 1.0).abs() < 1e-12);
        t.apply_diffusion();
        prop_assert!(max_diff(&s, &t) < 1e-12);
    }

    #[test]
    fn grover_keeps_unit_norm(a in amps(4), mask in 1u64..65536, k in 0usize..6) {
        let s = random_state(&a);
        let marked = |b: u64| mask >> b & 1 == 1;
        prop_assume!(s.marked_probability(marked) > 1e-6);
        let (out, report) = grover_select(&s, marked, Iterations::Fixed(k)).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
        // closed form for any input state
        let theta = report.selection_fraction.sqrt().asin();
        let expected = ((2 * k + 1) as f64 * theta).sin().powi(2);
        prop_assert!((report.final_success_probability - expected).abs() < 1e-9);
    }

    #[test]
    fn conditional_similarity_is_symmetric(seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let inst = common::random_instance(&mut rng, false);
        let w = inst.weights.clone();
        let flipped = SimilarityOp::custom(inst.s.schema(), inst.r.schema(), move |j, i| {
            Complex64::new(w[((i.0 << 4) | j.0) as usize], 0.0)
        });
        let crs = conditional_similarity(&inst.r, &inst.s, &inst.sim, SimilarityLevel::Real).unwrap();
        let csr = conditional_similarity(&inst.s, &inst.r, &flipped, SimilarityLevel::Real).unwrap();
        prop_assert!((crs - csr).abs() < 1e-12);
    }
}

// ---- query generation ----

const FIELDS: [&str; 4] = ["a", "k", "id", "x_1"];

fn operand() -> impl Strategy<Value = Operand> {
    prop_oneof![
        prop::sample::select(&FIELDS[..]).prop_map(|f| Operand::Field(f.to_string())),
        (0u64..1000).prop_map(Operand::Literal),
    ]
}

fn predicate() -> impl Strategy<Value = Predicate> {
    let leaf = (operand(), prop::sample::select(vec![CmpOp::Eq, CmpOp::Lt, CmpOp::Gt]), operand())
        .prop_map(|(left, op, right)| Predicate::Compare { left, op, right });
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Predicate::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Predicate::Or(Box::new(a), Box::new(b))),
            inner.prop_map(|p| Predicate::Not(Box::new(p))),
        ]
    })
}

fn field() -> impl Strategy<Value = String> {
    prop::sample::select(&FIELDS[..]).prop_map(str::to_string)
}

fn similarity() -> impl Strategy<Value = SimilaritySpec> {
    prop_oneof![
        (field(), field()).prop_map(|(left, right)| SimilaritySpec::Eq { left, right }),
        (field(), field(), 0.5f64..10.0).prop_map(|(left, right, scale)| SimilaritySpec::Within { left, right, scale }),
        (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| SimilaritySpec::Const { re, im }),
        (0.0f64..1.0).prop_map(|re| SimilaritySpec::Const { re, im: 0.0 }),
    ]
}

fn combine() -> impl Strategy<Value = CombineSpec> {
    let field_ref = (0u8..3, field()).prop_map(|(side, name)| match side {
        0 => FieldRef::bare(name),
        1 => FieldRef::left(name),
        _ => FieldRef::right(name),
    });
    prop_oneof![
        Just(CombineSpec::Concat),
        field().prop_map(CombineSpec::ConcatDrop),
        prop::collection::vec(field_ref, 1..4).prop_map(CombineSpec::Fields),
    ]
}

fn query() -> impl Strategy<Value = Query> {
    let leaf = "[a-z./ \"\\\\]{1,10}".prop_map(|path| Query::Load { path });
    leaf.prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), predicate()).prop_map(|(i, predicate)| Query::Select { input: Box::new(i), predicate }),
            (inner.clone(), prop::collection::vec(field(), 1..4))
                .prop_map(|(i, fields)| Query::Project { input: Box::new(i), fields }),
            (inner.clone(), inner.clone(), similarity(), combine()).prop_map(|(l, r, similarity, combine)| {
                Query::Join { left: Box::new(l), right: Box::new(r), similarity, combine }
            }),
            (inner, 1u64..100_000).prop_map(|(i, shots)| Query::Sample { input: Box::new(i), shots }),
        ]
    })
}

proptest! {
    #[test]
    fn parse_of_pretty_print_is_a_fixed_point(q in query()) {
        let printed = q.to_string();
        let reparsed = parse(&printed).unwrap();
        prop_assert_eq!(&reparsed, &q);
        prop_assert_eq!(reparsed.to_string(), printed);
    }
}

// ---- random query agreement between engines ----

fn corpus_dir(tag: &str, r: &WeightedRelation, s: &WeightedRelation) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qrel-prop-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    r.write_file(&dir.join("r.rel")).unwrap();
    s.write_file(&dir.join("s.rel")).unwrap();
    dir
}

fn small_query() -> impl Strategy<Value = String> {
    let pred = (prop::sample::select(vec!["a", "k"]), prop::sample::select(vec!["=", "<", ">"]), 0u64..4, any::<bool>())
        .prop_map(|(f, op, v, neg)| format!("{}{f} {op} {v}", if neg { "NOT " } else { "" }));
    let r_side = prop_oneof![
        Just("LOAD \"r.rel\"".to_string()),
        pred.clone().prop_map(|p| format!("(SELECT LOAD \"r.rel\" WHERE {p})")),
    ];
    let sim = prop_oneof![
        Just("eq(k, k)".to_string()),
        (1u32..4).prop_map(|s| format!("within(k, k, {s})")),
        (0.1f64..1.0).prop_map(|z| format!("const({z})")),
    ];
    let comb = prop::sample::select(vec!["concat", "concat_drop(k)", "[left.a, right.b]", "[a, right.k]"]);
    let join = (r_side, sim, comb).prop_map(|(r, sim, comb)| format!("JOIN {r}, LOAD \"s.rel\" ON {sim} COMBINE {comb}"));
    prop_oneof![
        pred.prop_map(|p| format!("SELECT LOAD \"r.rel\" WHERE {p}")),
        prop::sample::select(vec!["a", "k"]).prop_map(|f| format!("PROJECT LOAD \"r.rel\" ON {f}")),
        join.clone(),
        join.clone().prop_map(|j| format!("PROJECT ({j}) ON a")),
        // every combine keeps `a`
        (join, 0u64..4).prop_map(|(j, v)| format!("SELECT ({j}) WHERE NOT a = {v}")),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_queries_agree_across_engines(seed in any::<u64>(), source in small_query()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let r = common::random_relation(&mut rng, common::r_schema(), 16);
        let s = common::random_relation(&mut rng, common::s_schema(), 16);
        let dir = corpus_dir(&format!("{seed:x}"), &r, &s);
        let config = PlanConfig { engine: Engine::Both, base_dir: dir.clone(), ..PlanConfig::default() };
        let result = run_query(&source, &config, &ExecOptions::default());
        std::fs::remove_dir_all(&dir).unwrap();
        match result {
            Ok(doc) => {
                let root = doc.nodes.values().next().unwrap();
                prop_assert!(root.distance.unwrap().total_variation < 1e-9, "{}", source);
                prop_assert!((doc.distribution.total_probability() - 1.0).abs() < 1e-10);
            }
            Err(e) => prop_assert!(
                matches!(e.error, Error::EmptySelection | Error::EmptyJoin),
                "{}: {}", source, e
            ),
        }
    }
}

#[test]
fn execution_is_deterministic_for_a_seed() {
    let r = WeightedRelation::from_text("schema: a:2,k:2\n0,1 @p=0.5\n1,2 @p=0.3\n3,3\n", "r").unwrap();
    let s = WeightedRelation::from_text("schema: k:2,b:2\n1,0\n2,1\n3,3\n", "s").unwrap();
    let dir = corpus_dir("det", &r, &s);
    let config = PlanConfig { engine: Engine::Both, base_dir: dir.clone(), ..PlanConfig::default() };
    let q = "SAMPLE (JOIN LOAD \"r.rel\", LOAD \"s.rel\" ON within(k, k, 2) COMBINE concat) SHOTS 500";
    let opts = ExecOptions { seed: 99, ..ExecOptions::default() };
    let a = run_query(q, &config, &opts).unwrap().render();
    let b = run_query(q, &config, &opts).unwrap().render();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(a, b);
}
