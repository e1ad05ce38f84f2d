use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::database::Database;
use crate::exec::{count_redistributions, run_parallel_sim, run_sequential, ParallelConfig};
use crate::ir::{parse_program, pretty, validate, Header, IterMethod, Program, Stmt};
use crate::multiset::test_support::rows;
use crate::multiset::{FieldType, Tuple, Value};
use crate::scheduler::ChunkPolicy;

fn s(v: &str) -> Value {
    Value::Str(v.into())
}

fn i(v: i64) -> Value {
    Value::Int(v)
}

const URL_COUNT: &str = "
table access(url: str);
output R(url: str, n: int);
acc count: int;

forelem (i in paccess.distinct(url)) {
  count = 0;
  forelem (j in paccess.url[access[i].url]) count += 1;
  R += (access[i].url, count);
}
";

fn access(n: usize) -> Database {
    let pool = ["a", "b", "c", "d", "e", "f", "g"];
    let t = rows(
        "access",
        &[("url", FieldType::Str)],
        (0..n).map(|x| vec![s(pool[(x * 5 + x / 3) % pool.len()])]).collect(),
    );
    Database::with_tables([t]).unwrap()
}

fn url_oracle(db: &Database) -> Vec<Tuple> {
    let mut counts: BTreeMap<Value, i64> = BTreeMap::new();
    for r in db.get("access").unwrap().rows() {
        *counts.entry(r.0[0].clone()).or_default() += 1;
    }
    counts.into_iter().map(|(u, c)| Tuple(vec![u, i(c)])).collect()
}

fn par(workers: usize) -> ParallelConfig {
    ParallelConfig::new(workers, ChunkPolicy::FixedChunk(1))
}

fn top_foralls(p: &Program) -> usize {
    p.body.iter().filter(|s| matches!(s, Stmt::Loop(l) if l.header.is_forall())).count()
}

#[test]
fn url_count_pipeline_reaches_parallel_form() {
    let db = access(60);
    let p = parse_program(URL_COUNT).unwrap();
    let (q, steps) = optimize(&p, Some(&db), &PipelineOptions { partitions: 4, ..Default::default() });
    validate(&q).unwrap();
    assert_eq!(top_foralls(&q), 1, "{}", pretty(&q));
    let count = q.acc("count").unwrap();
    assert!(count.keyed && count.per_worker);
    let text = pretty(&q);
    assert!(text.contains("X(access.url)"), "{text}");
    assert!(text.contains("sum(count[*]"), "{text}");
    let applied: Vec<&str> = steps.iter().filter(|s| s.report.applied).map(|s| s.report.pass.as_str()).collect();
    assert!(applied.contains(&"expand_and_hoist") && applied.contains(&"parallelize"), "{applied:?}");
    for w in [1, 3, 4] {
        let out = run_parallel_sim(&q, &db, &par(w)).unwrap();
        assert_eq!(out.results["R"].sorted_rows(), url_oracle(&db));
    }
}

#[test]
fn block_direct_covers_every_tuple_once() {
    let p = parse_program(
        "table A(x: int); acc total: int; output O(t: int);
         forelem (i in pA) total += A[i].x;
         O += (total);",
    )
    .unwrap();
    for n in [1, 3, 7, 20] {
        let (q, r) = block_direct(&p, &[0], n);
        assert!(r.applied);
        let t = rows("A", &[("x", FieldType::Int)], (0..13).map(|x| vec![i(x)]).collect());
        let db = Database::with_tables([t]).unwrap();
        let out = run_sequential(&q, &db).unwrap();
        assert_eq!(out.results["O"].sorted_rows(), vec![Tuple(vec![i(78)])]);
    }
    let (_, r) = block_direct(&p, &[1], 4);
    assert!(!r.applied);
}

#[test]
fn parallelize_rejects_shared_scalar() {
    let p = parse_program(
        "table A(x: int); acc total: int; output O(t: int);
         for (k = 1; k <= 4; k++) forelem (i in p[k]A) total += A[i].x;
         O += (total);",
    )
    .unwrap();
    let (q, r) = parallelize(&p, &[0]);
    assert!(!r.applied);
    assert!(r.evidence.iter().any(|e| e.contains("total")), "{r}");
    assert_eq!(q, p);
}

const TWO_AGG: &str = "
table T(field1: int, field2: int);
output R1(v: int, n: int);
output R2(v: int, n: int);
acc count1: int keyed;
acc count2: int keyed;

forelem (i in pT) count1[T[i].field1] += 1;
forelem (i in pT.distinct(field1)) R1 += (T[i].field1, count1[T[i].field1]);
forelem (i in pT) count2[T[i].field2] += 1;
forelem (i in pT.distinct(field2)) R2 += (T[i].field2, count2[T[i].field2]);
";

fn two_agg_db(shift: i64) -> Database {
    // field2 is a permutation of field1's values unless shifted.
    let t = rows(
        "T",
        &[("field1", FieldType::Int), ("field2", FieldType::Int)],
        (0..40).map(|x| vec![i(x % 9), i((x * 4) % 9 + shift)]).collect(),
    );
    Database::with_tables([t]).unwrap()
}

fn counts(db: &Database, col: usize) -> Vec<Tuple> {
    let mut m: BTreeMap<Value, i64> = BTreeMap::new();
    for r in db.get("T").unwrap().rows() {
        *m.entry(r.0[col].clone()).or_default() += 1;
    }
    m.into_iter().map(|(v, c)| Tuple(vec![v, i(c)])).collect()
}

#[test]
fn two_aggregates_fuse_without_redistribution() {
    let db = two_agg_db(0);
    let p = parse_program(TWO_AGG).unwrap();
    let opts = PipelineOptions { partitions: 3, ..Default::default() };
    let (q, steps) = optimize(&p, Some(&db), &opts);
    validate(&q).unwrap();
    let fuse = steps.iter().find(|s| s.report.pass == "reorder_and_fuse").unwrap();
    assert!(fuse.report.applied, "{}", fuse.report);
    assert_eq!(top_foralls(&q), 1, "{}", pretty(&q));
    // Before fusion the two nests need access by different fields.
    let before = &steps.iter().find(|s| s.report.pass == "parallelize").unwrap().program;
    assert_eq!(count_redistributions(before, &db).unwrap().count(), 1);
    assert_eq!(count_redistributions(&q, &db).unwrap().count(), 0, "{}", pretty(&q));
    let out = run_parallel_sim(&q, &db, &par(3)).unwrap();
    assert_eq!(out.results["R1"].sorted_rows(), counts(&db, 0));
    assert_eq!(out.results["R2"].sorted_rows(), counts(&db, 1));
}

#[test]
fn inner_fusion_declined_when_value_sets_differ() {
    let db = two_agg_db(1);
    let p = parse_program(TWO_AGG).unwrap();
    let (q, _) = optimize(&p, Some(&db), &PipelineOptions { partitions: 3, ..Default::default() });
    let text = pretty(&q);
    assert!(text.contains("X(T.field1)") && text.contains("X(T.field2)"), "{text}");
    let out = run_parallel_sim(&q, &db, &par(2)).unwrap();
    assert_eq!(out.results["R1"].sorted_rows(), counts(&db, 0));
    assert_eq!(out.results["R2"].sorted_rows(), counts(&db, 1));
}

#[test]
fn fusion_declined_for_different_multisets() {
    let p = parse_program(
        "table A(x: int); table B(x: int); acc a: int; acc b: int; output O(a: int, b: int);
         forelem (i in pA) a += A[i].x;
         forelem (i in pB) b += B[i].x;
         O += (a, b);",
    )
    .unwrap();
    let (q, r) = fuse_loops(&p, &[0], &[1], None);
    assert!(!r.applied);
    assert!(r.evidence[0].contains("different multisets"), "{r}");
    assert_eq!(q, p);
}

#[test]
fn fusion_of_identical_headers() {
    let p = parse_program(
        "table A(x: int); acc a: int; acc b: int; output O(a: int, b: int);
         forelem (i in pA) a += A[i].x;
         forelem (j in pA) b += 1;
         O += (a, b);",
    )
    .unwrap();
    let (q, r) = fuse_loops(&p, &[0], &[1], None);
    assert!(r.applied, "{r}");
    assert_eq!(q.body.len(), 2);
    validate(&q).unwrap();
    let db = Database::with_tables([rows("A", &[("x", FieldType::Int)], vec![vec![i(2)], vec![i(5)]])]).unwrap();
    assert_eq!(
        run_sequential(&q, &db).unwrap().results["O"].sorted_rows(),
        vec![Tuple(vec![i(7), i(2)])]
    );
}

#[test]
fn reorder_rejects_true_dependence() {
    let p = parse_program(
        "table A(x: int); acc a: int keyed; output O(x: int, n: int);
         forelem (i in pA) a[A[i].x] += 1;
         forelem (i in pA) O += (A[i].x, a[A[i].x]);",
    )
    .unwrap();
    let (q, r) = statement_reorder(&p, &[1], 0);
    assert!(!r.applied);
    assert!(r.evidence[0].contains("'a'") || r.evidence[0].contains(" a"), "{r}");
    assert_eq!(q, p);

    let indep = parse_program(
        "table A(x: int); acc a: int; acc b: int; output O(a: int, b: int);
         forelem (i in pA) a += 1;
         forelem (i in pA) b += 2;
         O += (a, b);",
    )
    .unwrap();
    let (q, r) = statement_reorder(&indep, &[1], 0);
    assert!(r.applied);
    assert_ne!(q, indep);
}

const JOIN: &str = "
table A(b_id: int, field: int);
table B(id: int, field: int);
output R(a: int, b: int);
forelem (i in pA) forelem (j in pB.id[A[i].b_id]) R += (A[i].field, B[j].field);
";

fn join_db() -> Database {
    let a = rows(
        "A",
        &[("b_id", FieldType::Int), ("field", FieldType::Int)],
        (0..20).map(|x| vec![i(x % 6), i(x)]).collect(),
    );
    let b = rows(
        "B",
        &[("id", FieldType::Int), ("field", FieldType::Int)],
        (0..8).map(|x| vec![i(x % 4), i(50 + x)]).collect(),
    );
    Database::with_tables([a, b]).unwrap()
}

#[test]
fn interchange_is_an_involution() {
    let p = parse_program(JOIN).unwrap();
    let db = join_db();
    let (q, r) = interchange(&p, &[0]);
    assert!(r.applied, "{r}");
    validate(&q).unwrap();
    let Stmt::Loop(outer) = &q.body[0] else { panic!() };
    let Header::Forelem { domain, .. } = &outer.header else { panic!() };
    assert_eq!(domain.set, "B");
    let want = run_sequential(&p, &db).unwrap().results["R"].sorted_rows();
    assert_eq!(run_sequential(&q, &db).unwrap().results["R"].sorted_rows(), want);
    let (back, r) = interchange(&q, &[0]);
    assert!(r.applied);
    assert_eq!(pretty(&back), pretty(&p));
}

#[test]
fn interchange_rejects_order_dependent_body() {
    let p = parse_program(
        "table A(x: int); table B(y: int); acc last: int; output O(v: int);
         forelem (i in pA) forelem (j in pB) last = A[i].x;
         O += (last);",
    )
    .unwrap();
    let (_, r) = interchange(&p, &[0]);
    assert!(!r.applied);
}

const GRADES: &str = "
table grades(studentID: int, grade: int, weight: int);
result res(g: int, w: int);
acc avg: float;
output Out(avg: float);

forelem (i in pgrades.studentID[1]) res += (grades[i].grade, grades[i].weight);
avg = 0;
forelem (r in pres) avg += res[r].g * res[r].w;
Out += (avg);
";

fn grades_db() -> Database {
    let t = rows(
        "grades",
        &[("studentID", FieldType::Int), ("grade", FieldType::Int), ("weight", FieldType::Int)],
        vec![
            vec![i(1), i(8), i(2)],
            vec![i(2), i(5), i(1)],
            vec![i(1), i(6), i(1)],
        ],
    );
    Database::with_tables([t]).unwrap()
}

#[test]
fn merge_consumer_removes_intermediate() {
    let p = parse_program(GRADES).unwrap();
    let (q, r) = merge_consumer(&p);
    assert!(r.applied, "{r}");
    assert!(q.result("res").is_none());
    validate(&q).unwrap();
    let db = grades_db();
    assert_eq!(
        run_sequential(&q, &db).unwrap().results["Out"].sorted_rows(),
        run_sequential(&p, &db).unwrap().results["Out"].sorted_rows()
    );
    let (full, _) = optimize(&p, Some(&db), &PipelineOptions::default());
    assert_eq!(top_foralls(&full), 1, "{}", pretty(&full));
    let out = run_parallel_sim(&full, &db, &par(2)).unwrap();
    assert_eq!(out.results["Out"].sorted_rows(), vec![Tuple(vec![Value::Float(22.0)])]);
}

#[test]
fn merge_consumer_declines_two_consumers() {
    let src = GRADES.replace("Out += (avg);", "forelem (r in pres) avg += res[r].w;\nOut += (avg);");
    let p = parse_program(&src).unwrap();
    let (q, r) = merge_consumer(&p);
    assert!(!r.applied);
    assert!(r.evidence.iter().any(|e| e.contains("'res'")), "{r}");
    assert_eq!(q, p);
}

#[test]
fn dead_loop_is_removed() {
    let p = parse_program(
        "table A(x: int); acc a: int; acc unused: int; output O(a: int);
         forelem (i in pA) a += A[i].x;
         forelem (i in pA) unused += 1;
         O += (a);",
    )
    .unwrap();
    let (q, r) = eliminate_dead_access(&p);
    assert!(r.applied);
    assert_eq!(q.body.len(), 2);
    assert!(q.acc("unused").is_none());
    validate(&q).unwrap();
    let (again, r2) = eliminate_dead_access(&q);
    assert!(!r2.applied);
    assert_eq!(again, q);
}

fn inner_method(p: &Program) -> Option<IterMethod> {
    let Stmt::Loop(o) = &p.body[0] else { return None };
    let Stmt::Loop(inner) = &o.body[0] else { return None };
    match &inner.header {
        Header::Forelem { method, .. } => method.clone(),
        _ => None,
    }
}

#[test]
fn method_follows_threshold() {
    let p = parse_program(JOIN).unwrap();
    let db = join_db();
    let (hash, _) = select_iteration_method(&p, Some(&db), 4);
    assert_eq!(inner_method(&hash), Some(IterMethod::HashProbe(String::from("id"))));
    let (scan, _) = select_iteration_method(&p, Some(&db), 10_000);
    assert_eq!(inner_method(&scan), Some(IterMethod::NestedScan));
    let want = run_sequential(&p, &db).unwrap().results["R"].sorted_rows();
    for q in [&hash, &scan] {
        assert_eq!(run_sequential(q, &db).unwrap().results["R"].sorted_rows(), want);
    }
}

#[test]
fn unknown_pass_is_an_argument_error() {
    let p = parse_program(JOIN).unwrap();
    assert!(run_pass("nope", &p, None, &PipelineOptions::default()).is_err());
    for name in PASS_NAMES {
        run_pass(name, &p, None, &PipelineOptions::default()).unwrap();
    }
}

