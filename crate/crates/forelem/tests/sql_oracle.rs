//! Lowered SQL, with and without the optimization pipeline, against a
//! brute-force evaluation of the same parsed query.

mod common;

use std::collections::BTreeMap;

use common::sql_eval::eval_sql;
use forelem::corpus::{self, Lang};
use forelem::gen::{random_database, GenOptions};
use forelem_core::exec::run_sequential;
use forelem_core::sql::{lower_to_forelem, parse_sql};
use forelem_core::transforms::{optimize, PipelineOptions};

const EXTRA: &[&str] = &[
    "SELECT DISTINCT url FROM access",
    "SELECT target FROM links WHERE source = 's1'",
    "SELECT COUNT(*) FROM links",
    "SELECT A.field, B.field FROM A, B WHERE A.b_id = B.id AND A.field = 2",
    "SELECT B.field, COUNT(*) FROM A, B WHERE A.b_id = B.id GROUP BY B.field",
    "SELECT studentID, SUM(grade) FROM grades WHERE weight = 2 GROUP BY studentID",
    "SELECT L.source FROM links L, access A WHERE L.target = A.url",
    "SELECT * FROM T WHERE field1 = :k",
    "SELECT field1, COUNT(field2) FROM T WHERE field2 = {k} GROUP BY field1",
];

#[test]
fn lowered_queries_match_brute_force() {
    let mut queries: Vec<(String, BTreeMap<String, String>)> = corpus::ENTRIES
        .iter()
        .filter(|e| e.lang == Lang::Sql)
        .map(|e| (e.text.to_string(), e.params()))
        .collect();
    let k = BTreeMap::from([("k".to_string(), "1".to_string())]);
    queries.extend(EXTRA.iter().map(|q| (q.to_string(), k.clone())));

    let opts = GenOptions { min_rows: 0, max_rows: 120 };
    for seed in 0..25 {
        let db = random_database(&corpus::catalog(), seed, &opts);
        for (text, params) in &queries {
            let q = parse_sql(text).unwrap();
            let want = eval_sql(&q, &db, params);
            let p = lower_to_forelem(&q, &db.catalog(), params).unwrap_or_else(|e| panic!("{text}: {e}"));
            let (opt, _) = optimize(&p, Some(&db), &PipelineOptions::default());
            for prog in [&p, &opt] {
                let out = run_sequential(prog, &db).unwrap();
                assert_eq!(out.results.len(), 1, "{text}");
                let got = out.results.values().next().unwrap();
                assert!(common::bag_eq(got, &want), "seed {seed}: {text}\ngot {got}\nwant {want:?}");
            }
        }
    }
}
