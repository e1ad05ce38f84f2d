use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::error::Error;
use crate::ir::parse_program;
use crate::multiset::test_support::rows;
use crate::multiset::{FieldType, Tuple};
use crate::scheduler::{ChunkStatus, FaultEvent};

fn s(v: &str) -> Value {
    Value::Str(v.into())
}

fn i(v: i64) -> Value {
    Value::Int(v)
}

fn fig1_db(n: i64) -> Database {
    let a = rows(
        "A",
        &[("b_id", FieldType::Int), ("field", FieldType::Int)],
        (0..n).map(|x| vec![i(x % 7), i(x)]).collect(),
    );
    let b = rows(
        "B",
        &[("id", FieldType::Int), ("field", FieldType::Int)],
        (0..n).map(|x| vec![i(x), i(100 + x)]).collect(),
    );
    Database::with_tables([a, b]).unwrap()
}

fn fig1(method: &str) -> Program {
    parse_program(&alloc::format!(
        "table A(b_id: int, field: int);
         table B(id: int, field: int);
         output R(a: int, b: int);
         forelem (i in pA) {{
           forelem (j in pB.id[A[i].b_id]) {method} {{
             R += (A[i].field, B[j].field);
           }}
         }}"
    ))
    .unwrap()
}

fn fig1_expected(n: i64) -> Vec<Tuple> {
    // Hand-written join: b_id = x mod 7 matches B row with id = x mod 7 when it exists.
    let mut want: Vec<Tuple> = (0..n)
        .filter(|x| x % 7 < n)
        .map(|x| Tuple(vec![i(x), i(100 + x % 7)]))
        .collect();
    want.sort();
    want
}

#[test]
fn fig1_scan_and_probe_counts() {
    let n = 12;
    let db = fig1_db(n);
    let scan = run_sequential(&fig1("using scan"), &db).unwrap();
    assert_eq!(scan.results["R"].sorted_rows(), fig1_expected(n));
    assert_eq!(scan.stats.inner_iterations, (n * n) as u64);
    assert_eq!((scan.stats.hash_probes, scan.stats.hash_builds), (0, 0));

    let hash = run_sequential(&fig1("using hash(id)"), &db).unwrap();
    assert_eq!(hash.results["R"].sorted_rows(), fig1_expected(n));
    assert_eq!(hash.stats.hash_probes, n as u64);
    assert_eq!(hash.stats.hash_builds, 1);
    assert_eq!(hash.stats.inner_iterations, 0);
}

#[test]
fn fig1_single_match() {
    let a = rows("A", &[("b_id", FieldType::Int), ("field", FieldType::Str)], vec![vec![i(1), s("x")]]);
    let b = rows("B", &[("id", FieldType::Int), ("field", FieldType::Str)], vec![vec![i(1), s("y")]]);
    let db = Database::with_tables([a, b]).unwrap();
    let p = parse_program(
        "table A(b_id: int, field: str); table B(id: int, field: str); output R(a: str, b: str);
         forelem (i in pA) forelem (j in pB.id[A[i].b_id]) R += (A[i].field, B[j].field);",
    )
    .unwrap();
    let out = run_sequential(&p, &db).unwrap();
    assert_eq!(out.results["R"].sorted_rows(), vec![Tuple(vec![s("x"), s("y")])]);
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

const URL_COUNT_PAR: &str = "
table access(url: str);
output R(url: str, n: int);
acc count: int keyed per_worker;

forall (k = 1; k <= 4; k++) {
  for (l in X(access.url)[k]) {
    forelem (i in paccess.url[l]) count[k][access[i].url] += 1;
  }
}
forelem (i in paccess.distinct(url)) R += (access[i].url, sum(count[*][access[i].url]));
";

fn access(urls: &[&str]) -> Database {
    let t = rows("access", &[("url", FieldType::Str)], urls.iter().map(|u| vec![s(u)]).collect());
    Database::with_tables([t]).unwrap()
}

fn url_oracle(urls: &[&str]) -> Vec<Tuple> {
    let mut counts: BTreeMap<&str, i64> = BTreeMap::new();
    for u in urls {
        *counts.entry(u).or_default() += 1;
    }
    counts.into_iter().map(|(u, c)| Tuple(vec![s(u), i(c)])).collect()
}

#[test]
fn url_count_sequential() {
    let out = run_sequential(&parse_program(URL_COUNT).unwrap(), &access(&["u1", "u1", "u2"])).unwrap();
    assert_eq!(
        out.results["R"].sorted_rows(),
        vec![Tuple(vec![s("u1"), i(2)]), Tuple(vec![s("u2"), i(1)])]
    );
}

fn many_urls() -> Vec<&'static str> {
    let pool = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k"];
    (0..97).map(|x| pool[(x * x + 3 * x) % pool.len()]).collect()
}

#[test]
fn url_count_parallel_matches_oracle() {
    let urls = many_urls();
    let db = access(&urls);
    let p = parse_program(URL_COUNT_PAR).unwrap();
    let seq = run_sequential(&p, &db).unwrap();
    assert_eq!(seq.results["R"].sorted_rows(), url_oracle(&urls));
    for policy in [ChunkPolicy::StaticBlock, ChunkPolicy::Gss, ChunkPolicy::Trapezoid(None)] {
        let out = run_parallel_sim(&p, &db, &ParallelConfig::new(4, policy.clone())).unwrap();
        assert_eq!(out.results["R"].sorted_rows(), url_oracle(&urls), "{policy}");
        assert_eq!(out.stats.chunks.len(), 1);
        assert_eq!(out.stats.per_worker_iterations.iter().sum::<u64>(), out.stats.total_iterations);
        assert_eq!(out.stats.total_iterations, seq.stats.total_iterations);
    }
}

#[test]
fn parallel_survives_a_fault() {
    let urls = many_urls();
    let db = access(&urls);
    let p = parse_program(URL_COUNT_PAR).unwrap();
    let cfg = ParallelConfig::new(4, ChunkPolicy::FixedChunk(1)).with_faults(vec![FaultEvent::after_chunk(1, 1)]);
    let out = run_parallel_sim(&p, &db, &cfg).unwrap();
    assert_eq!(out.results["R"].sorted_rows(), url_oracle(&urls));
    let t = &out.stats.chunks[0];
    let failed = t.entries.iter().position(|e| e.status == ChunkStatus::Failed).unwrap();
    assert!(t.entries.iter().any(|e| e.redispatch_of == Some(failed)));
    assert_eq!(out.stats.discarded_iterations, t.entries[failed].len());
}

#[test]
fn all_workers_failing_propagates() {
    let p = parse_program(URL_COUNT_PAR).unwrap();
    let faults = (0..2).map(|w| FaultEvent::after_chunk(w, 1)).collect();
    let cfg = ParallelConfig::new(2, ChunkPolicy::Gss).with_faults(faults);
    assert!(matches!(
        run_parallel_sim(&p, &access(&many_urls()), &cfg),
        Err(Error::Unrecoverable { .. })
    ));
}

#[test]
fn one_worker_equals_sequential() {
    let db = access(&many_urls());
    let p = parse_program(URL_COUNT_PAR).unwrap();
    let seq = run_sequential(&p, &db).unwrap();
    let par = run_parallel_sim(&p, &db, &ParallelConfig::new(1, ChunkPolicy::Gss)).unwrap();
    assert!(par.results["R"].same_rows(&seq.results["R"]));
    assert_eq!(par.stats.inner_iterations, seq.stats.inner_iterations);
    assert_eq!(par.stats.per_worker_iterations, vec![seq.stats.total_iterations]);
}

#[test]
fn grades_weighted_sum() {
    let g = rows(
        "grades",
        &[("studentID", FieldType::Int), ("grade", FieldType::Int), ("weight", FieldType::Int)],
        vec![vec![i(1), i(8), i(2)], vec![i(1), i(6), i(1)], vec![i(2), i(10), i(1)]],
    );
    let db = Database::with_tables([g]).unwrap();
    let p = parse_program(
        "table grades(studentID: int, grade: int, weight: int);
         output Out(avg: float);
         acc avg: float;
         avg = 0;
         forelem (i in pgrades.studentID[1]) avg += grades[i].grade * grades[i].weight;
         Out += (avg);",
    )
    .unwrap();
    let out = run_sequential(&p, &db).unwrap();
    // 8*2 + 6*1
    assert_eq!(out.accumulators["avg"], Value::Float(22.0));
    assert_eq!(out.results["Out"].sorted_rows(), vec![Tuple(vec![Value::Float(22.0)])]);
}

#[test]
fn shared_writes_are_refused_in_parallel() {
    let p = parse_program(
        "table access(url: str); acc n: int;
         forall (k = 1; k <= 2; k++) forelem (i in p[k]access) n += 1;",
    )
    .unwrap();
    let db = access(&["a", "b", "c"]);
    assert_eq!(run_sequential(&p, &db).unwrap().accumulators["n"], i(3));
    assert!(matches!(
        run_parallel_sim(&p, &db, &ParallelConfig::new(2, ChunkPolicy::Gss)),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn direct_blocks_cover_the_table() {
    let p = parse_program(
        "table access(url: str); acc n: int per_worker; output C(n: int);
         forall (k = 1; k <= 3; k++) forelem (i in p[k]access) n[k] += 1;
         C += (sum(n[*]));",
    )
    .unwrap();
    let db = access(&["a", "b", "c", "d", "e"]);
    for cfg in [ParallelConfig::new(2, ChunkPolicy::StaticCyclic), ParallelConfig::new(3, ChunkPolicy::Gss)] {
        let out = run_parallel_sim(&p, &db, &cfg).unwrap();
        assert_eq!(out.results["C"].sorted_rows(), vec![Tuple(vec![i(5)])]);
        assert_eq!(out.accumulators["n"], i(5));
    }
}

#[test]
fn schema_and_type_errors() {
    let db = access(&["a"]);
    let missing = parse_program("table access(path: str); output R(p: str); forelem (i in paccess) R += (access[i].path);").unwrap();
    assert!(matches!(run_sequential(&missing, &db), Err(Error::Schema(_))));
    let wrong = parse_program("table access(url: int); output R(p: int); forelem (i in paccess) R += (access[i].url);").unwrap();
    assert!(matches!(run_sequential(&wrong, &db), Err(Error::Type(_))));
    let absent = parse_program("table nope(url: str); output R(p: str); forelem (i in pnope) R += (nope[i].url);").unwrap();
    assert!(run_sequential(&absent, &db).is_err());
}

#[test]
fn integer_overflow_is_an_evaluation_error() {
    let p = parse_program(
        "table access(url: str); acc n: int;
         n = 9223372036854775807;
         forelem (i in paccess) n += 1;",
    )
    .unwrap();
    assert!(matches!(run_sequential(&p, &access(&["a"])), Err(Error::Eval(_))));
}

#[test]
fn result_sets_can_be_probed_and_grow() {
    let p = parse_program(
        "table access(url: str); result G(url: str); output R(url: str, n: int); acc c: int;
         forelem (i in paccess.distinct(url)) G += (access[i].url);
         forelem (g in pG) {
           c = 0;
           forelem (j in paccess.url[G[g].url]) using hash(url) c += 1;
           R += (G[g].url, c);
         }",
    )
    .unwrap();
    let urls = ["x", "y", "x", "z", "x"];
    let out = run_sequential(&p, &access(&urls)).unwrap();
    assert_eq!(out.results["R"].sorted_rows(), url_oracle(&urls));
    assert_eq!(out.stats.hash_builds, 1);
    assert_eq!(out.stats.hash_probes, 3);
}

const TWO_COUNTS_DB_FIELDS: &[(&str, FieldType)] = &[("field1", FieldType::Int), ("field2", FieldType::Int)];

fn two_counts_db() -> Database {
    let t = rows(
        "Table",
        TWO_COUNTS_DB_FIELDS,
        (0..40).map(|x| vec![i(x % 5), i((x * 3) % 5)]).collect(),
    );
    Database::with_tables([t]).unwrap()
}

const SPLIT: &str = "
table Table(field1: int, field2: int);
acc c1: int keyed per_worker;
acc c2: int keyed per_worker;
forall (k = 1; k <= 4; k++)
  for (l in X(Table.field1)[k])
    forelem (i in pTable.field1[l]) c1[k][Table[i].field1] += 1;
forall (k = 1; k <= 4; k++)
  for (l in X(Table.field2)[k])
    forelem (i in pTable.field2[l]) c2[k][Table[i].field2] += 1;
";

const FUSED: &str = "
table Table(field1: int, field2: int);
acc c1: int keyed per_worker;
acc c2: int keyed per_worker;
forall (k = 1; k <= 4; k++)
  for (l in X(Table.field1)[k])
    forelem (i in pTable.field1[l]) {
      c1[k][Table[i].field1] += 1;
      c2[k][Table[i].field2] += 1;
    }
";

const SAME: &str = "
table Table(field1: int, field2: int);
acc c1: int keyed per_worker;
acc c2: int keyed per_worker;
forall (k = 1; k <= 4; k++)
  for (l in X(Table.field1)[k])
    forelem (i in pTable.field1[l]) c1[k][Table[i].field1] += 1;
forall (k = 1; k <= 4; k++)
  for (l in X(Table.field1)[k])
    forelem (i in pTable.field1[l]) c2[k][Table[i].field2] += 1;
";

#[test]
fn redistribution_counts() {
    let db = two_counts_db();
    let split = count_redistributions(&parse_program(SPLIT).unwrap(), &db).unwrap();
    assert_eq!(split.count(), 1);
    assert_eq!(split.events[0].from, Some(vec![0, 0, 0]));
    assert_eq!(split.events[0].to, vec![1, 0, 0]);
    assert_eq!(split.lines().len(), 1);
    assert_eq!(count_redistributions(&parse_program(FUSED).unwrap(), &db).unwrap().count(), 0);
    assert_eq!(count_redistributions(&parse_program(SAME).unwrap(), &db).unwrap().count(), 0);
    let out = run_sequential(&parse_program(SPLIT).unwrap(), &db).unwrap();
    assert_eq!(out.stats.redistribution_events, 1);
}

#[test]
fn initial_distribution_counts_when_it_conflicts() {
    let mut db = two_counts_db();
    let part = crate::multiset::ValueRangePartition::of_field(db.table("Table").unwrap(), "field2", 4).unwrap();
    db.set_distribution("Table", part).unwrap();
    let r = count_redistributions(&parse_program(FUSED).unwrap(), &db).unwrap();
    assert_eq!(r.count(), 1);
    assert_eq!(r.events[0].from, None);
}

#[test]
fn block_direct_and_value_partitions_conflict() {
    let p = parse_program(
        "table Table(field1: int, field2: int); acc c: int per_worker; acc d: int keyed per_worker;
         forall (k = 1; k <= 4; k++) forelem (i in p[k]Table) c[k] += 1;
         forall (k = 1; k <= 4; k++) for (l in X(Table.field1)[k]) forelem (i in pTable.field1[l]) d[k][l] += 1;
         forall (k = 1; k <= 4; k++) forelem (i in p[k]Table) c[k] += 1;",
    )
    .unwrap();
    assert_eq!(count_redistributions(&p, &two_counts_db()).unwrap().count(), 2);
}
