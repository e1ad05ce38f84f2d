//! The `forelem` command-line driver.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use forelem_core::database::Catalog;
use forelem_core::exec::{count_redistributions, run_parallel_sim, run_sequential, ParallelConfig};
use forelem_core::ir::{parse_program, pretty, Program};
use forelem_core::mapreduce::{detect_pattern, emit_mapreduce, run_mapreduce, MrProgram};
use forelem_core::reformat::{
    adapt_program, auto_reformat_fields, decode_database, dictionary_encode, drop_unused_fields, to_columnar,
    Encoding,
};
use forelem_core::scheduler::{ChunkPolicy, FaultEvent};
use forelem_core::sql::{lower_to_forelem, parse_sql, Params};
use forelem_core::transforms::{
    optimize, run_pass, select_iteration_method, PassStep, PipelineOptions, DEFAULT_HASH_THRESHOLD,
};
use forelem_core::{Database, FieldType, Multiset};

use crate::columnar_io::write_columnar;
use crate::corpus;
use crate::data::{read_database, write_csv, write_database};
use crate::gen::{random_database, GenOptions};
use crate::stats::StatsJson;

/// Compile, optimize and run forelem loop programs.
#[derive(Debug, Parser)]
#[command(name = "forelem", version, about)]
pub struct Cli {
    /// Seed for generated data.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write run counters as JSON to this path.
    #[arg(long, global = true)]
    pub stats: Option<PathBuf>,
    /// Smallest inner table that gets a hash index.
    #[arg(long, global = true, default_value_t = DEFAULT_HASH_THRESHOLD)]
    pub hash_threshold: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the program after every pass that applied.
    Compile(CompileArgs),
    /// Show pass reports, redistribution events and the final program.
    Explain(CompileArgs),
    /// Execute a program over a data directory.
    Run(RunArgs),
    /// Compare counters and wall time across configurations.
    Bench(BenchArgs),
    /// Print the MapReduce job derived from a program.
    EmitMr(CompileArgs),
    /// Derive a MapReduce job and run it.
    RunMr(RunMrArgs),
    /// Re-encode a data directory into the columnar store.
    Reformat(ReformatArgs),
    /// Write a random database for the bundled example programs.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// SQL query file.
    #[arg(long, conflicts_with_all = ["program", "corpus"])]
    pub sql: Option<PathBuf>,
    /// Textual IR program file.
    #[arg(long, conflicts_with = "corpus")]
    pub program: Option<PathBuf>,
    /// A bundled example program by name.
    #[arg(long)]
    pub corpus: Option<String>,
    /// SQL parameter as NAME=VALUE.
    #[arg(long = "param", value_parser = parse_kv)]
    pub params: Vec<(String, String)>,
}

#[derive(Debug, Clone, Args)]
pub struct PassArgs {
    /// `default`, `none` or a comma-separated list of pass names.
    #[arg(long, default_value = "default")]
    pub passes: String,
    /// Blocks or value segments per partitioned loop.
    #[arg(long, default_value_t = 8)]
    pub partitions: u32,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub passes: PassArgs,
    /// Data directory; supplies schemas, value sets and table sizes.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Also write the final program to this file.
    #[arg(long)]
    pub emit: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Seq,
    Par,
    Mr,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub passes: PassArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendKind::Seq)]
    pub backend: BackendKind,
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
    /// static, cyclic, fixed:C, gss, tss, hybrid:G
    #[arg(long, default_value = "static")]
    pub policy: ChunkPolicy,
    /// worker=W,after-chunk=M or worker=W,at=T (W counts from 0).
    #[arg(long = "fault")]
    pub faults: Vec<FaultEvent>,
    /// Input fragments for the MapReduce backend.
    #[arg(long, default_value_t = 4)]
    pub splits: usize,
    /// Directory for result CSV files; results go to stdout without it.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write the schedule or MapReduce trace to this file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Keep dictionary keys in results instead of decoding them.
    #[arg(long)]
    pub raw_keys: bool,
    /// Dictionary-encode string fields used as filter or grouping keys first.
    #[arg(long)]
    pub auto_reformat: bool,
}

#[derive(Debug, Args)]
pub struct RunMrArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub splits: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write `phase key value` records to this file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub passes: PassArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated KEY=VALUE list: backend, workers, policy, splits,
    /// method (auto|scan|hash), layout (row|dict|dropped). Give at least two.
    #[arg(long = "config", required = true)]
    pub configs: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ReformatArgs {
    /// Program whose accesses drive --drop-unused and --auto.
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for the columnar store.
    #[arg(long)]
    pub out: PathBuf,
    /// Dictionary-encode TABLE.FIELD.
    #[arg(long = "dict")]
    pub dict: Vec<String>,
    /// Store TABLE.FIELD as a range descriptor when it is a progression.
    #[arg(long = "range")]
    pub range: Vec<String>,
    /// Remove fields the program never reads.
    #[arg(long)]
    pub drop_unused: bool,
    /// Dictionary-encode string fields the program filters or groups on.
    #[arg(long)]
    pub auto: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub min_rows: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_rows: usize,
    /// Comma-separated subset of tables; all by default.
    #[arg(long, value_delimiter = ',')]
    pub tables: Vec<String>,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.to_string()))
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))
}

fn table_field(s: &str) -> anyhow::Result<(String, String)> {
    s.split_once('.')
        .map(|(t, f)| (t.to_string(), f.to_string()))
        .ok_or_else(|| forelem_core::Error::Argument(format!("expected TABLE.FIELD, got `{s}`")).into())
}

/// Exit status for an error: 2 bad arguments, 3 syntax, 4 schema, type or
/// unsupported construct, 5 evaluation or unrecoverable failure, 1 I/O and
/// file formats.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let core = err
        .downcast_ref::<forelem_core::Error>()
        .or_else(|| match err.downcast_ref::<crate::Error>() {
            Some(crate::Error::Core(e)) => Some(e),
            _ => None,
        });
    match core {
        Some(forelem_core::Error::Argument(_)) => 2,
        Some(forelem_core::Error::Syntax { .. }) => 3,
        Some(
            forelem_core::Error::Schema(_)
            | forelem_core::Error::Type(_)
            | forelem_core::Error::Undeclared(_)
            | forelem_core::Error::Unsupported(_),
        ) => 4,
        Some(forelem_core::Error::Eval(_) | forelem_core::Error::Unrecoverable { .. }) => 5,
        None => 1,
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    let opts = |p: &PassArgs| PipelineOptions {
        partitions: p.partitions,
        hash_threshold: cli.hash_threshold,
    };
    match &cli.command {
        Command::Compile(a) => compile(a, &opts(&a.passes), out),
        Command::Explain(a) => explain(a, &opts(&a.passes), out),
        Command::Run(a) => cmd_run(a, &opts(&a.passes), cli.stats.as_deref(), out),
        Command::Bench(a) => bench(a, &opts(&a.passes), out),
        Command::EmitMr(a) => {
            let db = a.data.as_deref().map(read_database).transpose()?;
            let program = load_source(&a.source, &catalog_of(db.as_ref()))?;
            write!(out, "{}", derive_mr(&program)?)?;
            Ok(())
        }
        Command::RunMr(a) => run_mr(a, cli.stats.as_deref(), out),
        Command::Reformat(a) => reformat(a, out),
        Command::Gen(a) => gen(a, cli.seed, out),
    }
}

fn catalog_of(db: Option<&Database>) -> Catalog {
    db.map_or_else(corpus::catalog, Database::catalog)
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Builds the program named by `src`. SQL is lowered against `catalog`.
pub fn load_source(src: &SourceArgs, catalog: &Catalog) -> anyhow::Result<Program> {
    let mut params: Params = src.params.iter().cloned().collect();
    let (lang, text) = match (&src.sql, &src.program, &src.corpus) {
        (Some(p), _, _) => (corpus::Lang::Sql, read(p)?),
        (_, Some(p), _) => (corpus::Lang::Ir, read(p)?),
        (_, _, Some(name)) => {
            let e = corpus::entry(name).ok_or_else(|| {
                let names: Vec<&str> = corpus::ENTRIES.iter().map(|e| e.name).collect();
                forelem_core::Error::Argument(format!("no bundled program `{name}`; have {}", names.join(", ")))
            })?;
            for (k, v) in e.params() {
                params.entry(k).or_insert(v);
            }
            (e.lang, e.text.to_string())
        }
        _ => return Err(forelem_core::Error::Argument("give one of --sql, --program or --corpus".into()).into()),
    };
    Ok(match lang {
        corpus::Lang::Sql => lower_to_forelem(&parse_sql(&text)?, catalog, &params)?,
        corpus::Lang::Ir => {
            if !src.params.is_empty() {
                return Err(forelem_core::Error::Argument("--param only applies to SQL sources".into()).into());
            }
            parse_program(&text)?
        }
    })
}

/// Runs the pass list `spec` (`default`, `none` or comma-separated names).
pub fn apply_passes(
    p: &Program,
    db: Option<&Database>,
    spec: &str,
    opts: &PipelineOptions,
) -> anyhow::Result<(Program, Vec<PassStep>)> {
    match spec {
        "default" => Ok(optimize(p, db, opts)),
        "none" => Ok((p.clone(), Vec::new())),
        list => {
            let mut cur = p.clone();
            let mut steps = Vec::new();
            for name in list.split(',').map(str::trim).filter(|n| !n.is_empty()) {
                let (next, report) = run_pass(name, &cur, db, opts)?;
                cur = next;
                steps.push(PassStep {
                    report,
                    program: cur.clone(),
                });
            }
            Ok((cur, steps))
        }
    }
}

/// The database with dictionary keys decoded, which is what optimization
/// legality checks and the MapReduce backend look at.
fn logical(db: &Database) -> anyhow::Result<Cow<'_, Database>> {
    Ok(if db.has_dictionaries() {
        Cow::Owned(decode_database(db)?)
    } else {
        Cow::Borrowed(db)
    })
}

fn compile(a: &CompileArgs, opts: &PipelineOptions, out: &mut dyn Write) -> anyhow::Result<()> {
    let db = a.data.as_deref().map(read_database).transpose()?;
    let program = load_source(&a.source, &catalog_of(db.as_ref()))?;
    let logical_db = db.as_ref().map(logical).transpose()?;
    let (final_program, steps) = apply_passes(&program, logical_db.as_deref(), &a.passes.passes, opts)?;
    writeln!(out, "// input")?;
    write!(out, "{}", pretty(&program))?;
    for s in steps.iter().filter(|s| s.report.applied) {
        writeln!(out)?;
        writeln!(out, "// after {}", s.report.pass)?;
        write!(out, "{}", pretty(&s.program))?;
    }
    if let Some(path) = &a.emit {
        fs::write(path, pretty(&final_program)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn explain(a: &CompileArgs, opts: &PipelineOptions, out: &mut dyn Write) -> anyhow::Result<()> {
    let db = a.data.as_deref().map(read_database).transpose()?;
    let program = load_source(&a.source, &catalog_of(db.as_ref()))?;
    let logical_db = db.as_ref().map(logical).transpose()?;
    let (final_program, steps) = apply_passes(&program, logical_db.as_deref(), &a.passes.passes, opts)?;
    for s in &steps {
        writeln!(out, "{}", s.report)?;
    }
    if let Some(db) = &logical_db {
        let r = count_redistributions(&final_program, db)?;
        writeln!(out, "redistribution events: {}", r.count())?;
        for line in r.lines() {
            writeln!(out, "  {line}")?;
        }
    }
    match detect_pattern(&final_program).or_else(|| detect_pattern(&program)) {
        Some(p) => writeln!(out, "mapreduce: map {} by {}, reduce into {}", p.input, p.key_field, p.output)?,
        None => writeln!(out, "mapreduce: no accumulate-then-read pattern")?,
    }
    writeln!(out)?;
    write!(out, "{}", pretty(&final_program))?;
    Ok(())
}

fn derive_mr(p: &Program) -> anyhow::Result<MrProgram> {
    let pat = detect_pattern(p).ok_or_else(|| {
        forelem_core::Error::Unsupported("program does not have the accumulate-then-read shape".into())
    })?;
    Ok(emit_mapreduce(&pat))
}

/// Backend settings for one execution.
#[derive(Debug, Clone)]
pub struct Backend {
    pub kind: BackendKind,
    pub workers: usize,
    pub policy: ChunkPolicy,
    pub faults: Vec<FaultEvent>,
    pub splits: usize,
}

pub struct Execution {
    pub results: BTreeMap<String, Multiset>,
    pub stats: StatsJson,
    pub trace: Vec<String>,
}

/// Runs `program` (already optimized) on `db`. Dictionary-encoded fields are
/// handled by adapting the program and decoding results unless `raw_keys`.
pub fn execute(program: &Program, db: &Database, b: &Backend, raw_keys: bool) -> anyhow::Result<Execution> {
    if b.kind == BackendKind::Mr {
        let mr = derive_mr(program)?;
        let logical_db = logical(db)?;
        let (m, trace) = run_mapreduce(&mr, &logical_db, b.splits)?;
        let rows = logical_db.table(&mr.input)?.len() as u64;
        return Ok(Execution {
            results: BTreeMap::from([(mr.output.clone(), m)]),
            stats: StatsJson::from_mapreduce(&trace, rows),
            trace: trace.lines(),
        });
    }
    let (adapted, decoding) = if db.has_dictionaries() {
        let (p, d) = adapt_program(program, db)?;
        (Cow::Owned(p), Some(d))
    } else {
        (Cow::Borrowed(program), None)
    };
    let mut output = match b.kind {
        BackendKind::Seq => run_sequential(&adapted, db)?,
        _ => {
            let cfg = ParallelConfig::new(b.workers, b.policy.clone()).with_faults(b.faults.clone());
            run_parallel_sim(&adapted, db, &cfg)?
        }
    };
    if let (Some(d), false) = (decoding, raw_keys) {
        d.apply(&mut output.results, db)?;
    }
    let mut trace = Vec::new();
    for (n, t) in output.stats.chunks.iter().enumerate() {
        trace.push(format!("# parallel loop {n}"));
        trace.extend(t.lines());
    }
    Ok(Execution {
        results: output.results,
        stats: StatsJson::from(&output.stats),
        trace,
    })
}

fn write_results(results: &BTreeMap<String, Multiset>, dir: Option<&Path>, out: &mut dyn Write) -> anyhow::Result<()> {
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, m) in results {
                write_csv(&dir.join(format!("{name}.csv")), m)?;
            }
        }
        None => {
            for (name, m) in results {
                let tmp = csv_text(m)?;
                writeln!(out, "# {name}")?;
                write!(out, "{tmp}")?;
            }
        }
    }
    Ok(())
}

fn csv_text(m: &Multiset) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(m.schema().names())?;
    for row in m.sorted_rows() {
        w.write_record(row.values().iter().map(ToString::to_string))?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?)
}

fn write_lines(path: &Path, lines: &[String]) -> anyhow::Result<()> {
    let mut text = lines.join("\n");
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(a: &RunArgs, opts: &PipelineOptions, stats: Option<&Path>, out: &mut dyn Write) -> anyhow::Result<()> {
    if a.workers == 0 {
        bail!(forelem_core::Error::Argument("--workers must be at least 1".into()));
    }
    if a.backend != BackendKind::Par && !a.faults.is_empty() {
        bail!(forelem_core::Error::Argument("--fault needs --backend par".into()));
    }
    let mut db = read_database(&a.data)?;
    let program = load_source(&a.source, &db.catalog())?;
    if a.auto_reformat {
        for (t, f) in auto_reformat_fields(&program, &db) {
            if db.dictionary(&t, &f).is_none() {
                db = dictionary_encode(&db, &t, &f)?.0;
            }
        }
    }
    let (optimized, _) = apply_passes(&program, Some(logical(&db)?.as_ref()), &a.passes.passes, opts)?;
    let backend = Backend {
        kind: a.backend,
        workers: a.workers,
        policy: a.policy.clone(),
        faults: a.faults.clone(),
        splits: a.splits,
    };
    let mr_source = if a.backend == BackendKind::Mr && detect_pattern(&optimized).is_none() {
        &program
    } else {
        &optimized
    };
    let ex = execute(mr_source, &db, &backend, a.raw_keys)?;
    write_results(&ex.results, a.output.as_deref(), out)?;
    if let Some(path) = stats {
        ex.stats.write(path)?;
    }
    if let Some(path) = &a.trace {
        write_lines(path, &ex.trace)?;
    }
    Ok(())
}

fn run_mr(a: &RunMrArgs, stats: Option<&Path>, out: &mut dyn Write) -> anyhow::Result<()> {
    let db = read_database(&a.data)?;
    let program = load_source(&a.source, &db.catalog())?;
    let backend = Backend {
        kind: BackendKind::Mr,
        workers: 1,
        policy: ChunkPolicy::StaticBlock,
        faults: Vec::new(),
        splits: a.splits,
    };
    let ex = execute(&program, &db, &backend, false)?;
    write_results(&ex.results, a.output.as_deref(), out)?;
    if let Some(path) = stats {
        ex.stats.write(path)?;
    }
    if let Some(path) = &a.trace {
        write_lines(path, &ex.trace)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    Auto,
    Scan,
    Hash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Row,
    Dict,
    Dropped,
}

struct BenchConfig {
    label: String,
    backend: Backend,
    method: Method,
    layout: Layout,
}

fn parse_bench_config(s: &str) -> anyhow::Result<BenchConfig> {
    let bad = |m: String| forelem_core::Error::Argument(format!("--config `{s}`: {m}"));
    let mut c = BenchConfig {
        label: s.to_string(),
        backend: Backend {
            kind: BackendKind::Seq,
            workers: 4,
            policy: ChunkPolicy::StaticBlock,
            faults: Vec::new(),
            splits: 4,
        },
        method: Method::Auto,
        layout: Layout::Row,
    };
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = parse_kv(part).map_err(bad)?;
        match k.as_str() {
            "backend" => {
                c.backend.kind = BackendKind::from_str(&v, true).map_err(|_| bad(format!("unknown backend `{v}`")))?
            }
            "workers" => c.backend.workers = v.parse().map_err(|_| bad(format!("bad worker count `{v}`")))?,
            "splits" => c.backend.splits = v.parse().map_err(|_| bad(format!("bad split count `{v}`")))?,
            "policy" => c.backend.policy = v.parse()?,
            "method" => {
                c.method = match v.as_str() {
                    "auto" => Method::Auto,
                    "scan" => Method::Scan,
                    "hash" => Method::Hash,
                    _ => return Err(bad(format!("unknown method `{v}`")).into()),
                }
            }
            "layout" => {
                c.layout = match v.as_str() {
                    "row" => Layout::Row,
                    "dict" => Layout::Dict,
                    "dropped" => Layout::Dropped,
                    _ => return Err(bad(format!("unknown layout `{v}`")).into()),
                }
            }
            _ => return Err(bad(format!("unknown key `{k}`")).into()),
        }
    }
    Ok(c)
}

fn bench(a: &BenchArgs, opts: &PipelineOptions, out: &mut dyn Write) -> anyhow::Result<()> {
    if a.configs.len() < 2 {
        bail!(forelem_core::Error::Argument("bench needs at least two --config values, nothing to compare".into()));
    }
    let configs = a.configs.iter().map(|s| parse_bench_config(s)).collect::<anyhow::Result<Vec<_>>>()?;
    let base = read_database(&a.data)?;
    let program = load_source(&a.source, &base.catalog())?;
    let logical_base = logical(&base)?.into_owned();
    let (optimized, _) = apply_passes(&program, Some(&logical_base), &a.passes.passes, opts)?;

    let mut rows = Vec::new();
    let mut reference: Option<BTreeMap<String, Multiset>> = None;
    for c in &configs {
        let mut db = logical_base.clone();
        match c.layout {
            Layout::Row => {}
            Layout::Dict => {
                for decl in &program.tables {
                    for f in decl.schema.fields().iter().filter(|f| f.ty == FieldType::Str) {
                        db = dictionary_encode(&db, &decl.name, &f.name)?.0;
                    }
                }
            }
            Layout::Dropped => db = drop_unused_fields(&program, &db)?.0,
        }
        let p = match c.method {
            Method::Auto => optimized.clone(),
            Method::Scan => select_iteration_method(&optimized, Some(&db), usize::MAX).0,
            Method::Hash => select_iteration_method(&optimized, Some(&db), 0).0,
        };
        let started = Instant::now();
        let ex = execute(&p, &db, &c.backend, false)?;
        let wall = started.elapsed();
        match &reference {
            None => reference = Some(ex.results.clone()),
            Some(r) => {
                let same = r.len() == ex.results.len()
                    && r.iter().all(|(k, m)| ex.results.get(k).is_some_and(|o| o.approx_same_rows(m, 1e-9)));
                if !same {
                    bail!(forelem_core::Error::Eval(format!(
                        "results of `{}` differ from `{}`",
                        c.label, configs[0].label
                    )));
                }
            }
        }
        rows.push((c.label.clone(), ex.stats, wall));
    }

    writeln!(
        out,
        "{:<40} {:>16} {:>12} {:>14} {:>10}",
        "config", "inner_iterations", "hash_probes", "redistribution", "wall_ms"
    )?;
    for (label, s, wall) in &rows {
        writeln!(
            out,
            "{:<40} {:>16} {:>12} {:>14} {:>10.3}",
            label,
            s.inner_iterations,
            s.hash_probes,
            s.redistribution_events,
            wall.as_secs_f64() * 1e3
        )?;
    }
    let key = |s: &StatsJson| [s.inner_iterations + s.hash_probes, s.redistribution_events];
    let dominant: Vec<&str> = rows
        .iter()
        .filter(|(l, s, _)| {
            rows.iter().filter(|(o, _, _)| o != l).all(|(_, t, _)| {
                let (a, b) = (key(s), key(t));
                a.iter().zip(&b).all(|(x, y)| x <= y) && a != b
            })
        })
        .map(|(l, _, _)| l.as_str())
        .collect();
    writeln!(out, "results: identical across {} configs", rows.len())?;
    match dominant.as_slice() {
        [one] => writeln!(out, "dominates on counters: {one}")?,
        _ => writeln!(out, "dominates on counters: none")?,
    }
    let fastest = rows
        .iter()
        .min_by_key(|(_, _, w)| *w)
        .map(|(l, _, _)| l.as_str())
        .unwrap_or_default();
    writeln!(out, "fastest wall time (observation only): {fastest}")?;
    Ok(())
}

fn reformat(a: &ReformatArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let stored = read_database(&a.data)?;
    let mut db = logical(&stored)?.into_owned();
    let has_source = a.source.sql.is_some() || a.source.program.is_some() || a.source.corpus.is_some();
    let program = if has_source {
        Some(load_source(&a.source, &db.catalog())?)
    } else {
        None
    };
    let need_program = |flag: &str| {
        program.as_ref().ok_or_else(|| {
            forelem_core::Error::Argument(format!("{flag} needs a program (--sql, --program or --corpus)"))
        })
    };
    if a.drop_unused {
        let (next, report) = drop_unused_fields(need_program("--drop-unused")?, &db)?;
        db = next;
        for (t, f) in &report.dropped {
            writeln!(out, "dropped {t}.{f}")?;
        }
    }
    let mut encodings: BTreeMap<String, BTreeMap<String, Encoding>> = BTreeMap::new();
    for (t, d) in stored.dictionaries() {
        encodings.entry(t.to_string()).or_default().insert(d.field().to_string(), Encoding::Dict);
    }
    let mut requested = Vec::new();
    for s in &a.dict {
        requested.push((table_field(s)?, Encoding::Dict));
    }
    for s in &a.range {
        requested.push((table_field(s)?, Encoding::Range));
    }
    if a.auto {
        for tf in auto_reformat_fields(need_program("--auto")?, &db) {
            requested.push((tf, Encoding::Dict));
        }
    }
    for ((t, f), e) in requested {
        db.table(&t)?.schema().require(&f)?;
        encodings.entry(t).or_default().insert(f, e);
    }
    let mut tables = Vec::new();
    for m in db.tables() {
        let enc: Vec<(&str, Encoding)> = encodings
            .get(m.name())
            .map(|e| {
                e.iter()
                    .filter(|(f, _)| m.schema().index_of(f).is_some())
                    .map(|(f, e)| (f.as_str(), *e))
                    .collect()
            })
            .unwrap_or_default();
        let (ct, fallbacks) = to_columnar(m, &enc)?;
        for fb in fallbacks {
            writeln!(out, "{}.{}: stored plain: {}", m.name(), fb.field, fb.reason)?;
        }
        tables.push(ct);
    }
    write_columnar(&a.out, &tables)?;
    writeln!(out, "wrote {} table(s) to {}", tables.len(), a.out.display())?;
    Ok(())
}

fn gen(a: &GenArgs, seed: u64, out: &mut dyn Write) -> anyhow::Result<()> {
    let mut catalog = corpus::catalog();
    if !a.tables.is_empty() {
        for t in &a.tables {
            if !catalog.contains_key(t) {
                bail!(forelem_core::Error::Argument(format!("no bundled table `{t}`")));
            }
        }
        catalog.retain(|name, _| a.tables.contains(name));
    }
    let opts = GenOptions {
        min_rows: a.min_rows,
        max_rows: a.max_rows,
    };
    let db = random_database(&catalog, seed, &opts);
    write_database(&a.out, &db)?;
    for m in db.tables() {
        writeln!(out, "{}: {} rows", m.name(), m.len())?;
    }
    Ok(())
}
