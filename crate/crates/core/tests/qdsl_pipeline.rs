use std::path::PathBuf;

use qrel::qdsl::{execute, parse, plan, run_query, Engine, ExecOptions, PlanConfig};
use qrel::Error;

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")
}

fn config(engine: Engine) -> PlanConfig {
    PlanConfig { engine, base_dir: corpus(), ..PlanConfig::default() }
}

#[test]
fn three_by_three_bit_join_peaks_at_seven_qubits() {
    let dir = std::env::temp_dir().join(format!("qrel-plan-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("r.rel"), "schema: k:2,x:1\n0,0\n1,1\n").unwrap();
    std::fs::write(dir.join("s.rel"), "schema: k:2,y:1\n0,1\n3,0\n").unwrap();
    let q = parse("JOIN LOAD \"r.rel\", LOAD \"s.rel\" ON eq(k, k) COMBINE concat_drop(k)").unwrap();
    let p = plan(&q, &PlanConfig { base_dir: dir.clone(), ..PlanConfig::default() }).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(p.peak_qubits, 7);
    assert_eq!(p.root().qubits, 7);
    assert_eq!(p.steps.len(), 3);
}

#[test]
fn projection_onto_missing_field_is_unknown_field() {
    let q = parse("PROJECT LOAD \"emp.rel\" ON nope").unwrap();
    let err = plan(&q, &config(Engine::Quantum)).unwrap_err();
    assert_eq!(err.error, Error::UnknownField("nope".into()));
    assert_eq!(err.node.unwrap().kind, "PROJECT");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn budget_violation_names_the_join() {
    let q = parse("PROJECT (JOIN LOAD \"wide.rel\", LOAD \"wide.rel\" ON eq(a, a) COMBINE concat) ON a").unwrap();
    let err = plan(&q, &config(Engine::Quantum)).unwrap_err();
    let node = err.node.unwrap();
    assert_eq!((node.id, node.kind), (1, "JOIN"));
    assert_eq!(err.error, Error::QubitBudgetExceeded { needed: 25, max: 24 });
    assert_eq!(err.exit_code(), 3);
    // the classical engine has no register to budget
    assert!(plan(&q, &config(Engine::Classical)).is_ok());
}

#[test]
fn missing_relation_file_is_a_file_error() {
    let q = parse("LOAD \"absent.rel\"").unwrap();
    let err = plan(&q, &config(Engine::Quantum)).unwrap_err();
    assert_eq!(err.error.kind(), "FileError");
}

#[test]
fn both_mode_equijoin_agrees() {
    let q = "JOIN LOAD \"emp.rel\", LOAD \"dept.rel\" ON eq(dept, dept) COMBINE concat_drop(dept)";
    let doc = run_query(q, &config(Engine::Both), &ExecOptions::default()).unwrap();
    let report = doc.nodes.values().next().unwrap();
    assert!(report.distance.unwrap().total_variation < 1e-9);
    assert_eq!(report.classical_steps, Some(12));
    assert!(report.quantum_steps.is_some());
}

#[test]
fn sample_returns_the_requested_number_of_tuples() {
    let q = parse("SAMPLE LOAD \"weights.rel\" SHOTS 1000").unwrap();
    let p = plan(&q, &config(Engine::Quantum)).unwrap();
    let doc = execute(&p, &ExecOptions { seed: 3, ..ExecOptions::default() }).unwrap();
    let samples = doc.samples.as_ref().unwrap();
    assert_eq!(samples.len(), 1000);
    assert!(samples.iter().all(|t| t.0 < 4));
    assert_eq!(doc, execute(&p, &ExecOptions { seed: 3, ..ExecOptions::default() }).unwrap());
}

#[test]
fn empty_join_is_reported_at_the_join_node() {
    let q = "SELECT (JOIN LOAD \"emp.rel\", LOAD \"remote.rel\" ON eq(dept, dept) COMBINE concat) WHERE id = 1";
    let err = run_query(q, &config(Engine::Quantum), &ExecOptions::default()).unwrap_err();
    assert_eq!(err.error, Error::EmptyJoin);
    assert_eq!(err.node.unwrap().id, 1);
    assert_eq!(err.to_string(), "node 1 JOIN: no pair of tuples is similar (conditional similarity is 0)");
}

#[test]
fn zero_shots_and_oversized_constants_are_rejected() {
    for q in ["SAMPLE LOAD \"weights.rel\" SHOTS 0", "JOIN LOAD \"weights.rel\", LOAD \"emp.rel\" ON const(0.9, 0.9) COMBINE concat"] {
        let err = plan(&parse(q).unwrap(), &config(Engine::Quantum)).unwrap_err();
        assert_eq!(err.node.unwrap().id, 0, "{q}");
    }
}
