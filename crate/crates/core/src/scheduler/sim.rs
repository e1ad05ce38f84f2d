use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec::Vec;

use super::policy::{ChunkPolicy, ChunkSizer};
use crate::error::{Error, Result};
use crate::multiset::block_bounds;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultTrigger {
    /// The worker's `m`-th granted chunk (counting from 1) fails instead of completing.
    AfterChunk(u32),
    /// The worker stops at this virtual time; a chunk in flight is lost.
    AtTime(u64),
}

/// Fail-stop fault of one worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultEvent {
    pub worker: usize,
    pub trigger: FaultTrigger,
}

impl FaultEvent {
    pub fn after_chunk(worker: usize, m: u32) -> FaultEvent {
        FaultEvent {
            worker,
            trigger: FaultTrigger::AfterChunk(m),
        }
    }

    pub fn at_time(worker: usize, t: u64) -> FaultEvent {
        FaultEvent {
            worker,
            trigger: FaultTrigger::AtTime(t),
        }
    }
}

/// Accepts `worker=W,after-chunk=M` and `worker=W,at=T`, with `W` a
/// zero-based worker index.
impl core::str::FromStr for FaultEvent {
    type Err = Error;

    fn from_str(s: &str) -> Result<FaultEvent> {
        let bad = || Error::Argument(format!("bad fault spec `{s}`, expected worker=W,after-chunk=M or worker=W,at=T"));
        let mut worker = None;
        let mut trigger = None;
        for part in s.split(',') {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            let v = v.trim();
            match k.trim() {
                "worker" => worker = Some(v.parse::<usize>().map_err(|_| bad())?),
                "after-chunk" => {
                    let m = v.parse::<u32>().map_err(|_| bad())?;
                    if m == 0 {
                        return Err(Error::Argument(format!("after-chunk counts from 1 in `{s}`")));
                    }
                    trigger = Some(FaultTrigger::AfterChunk(m));
                }
                "at" => trigger = Some(FaultTrigger::AtTime(v.parse::<u64>().map_err(|_| bad())?)),
                _ => return Err(bad()),
            }
        }
        match (worker, trigger) {
            (Some(worker), Some(trigger)) => Ok(FaultEvent { worker, trigger }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerStatus {
    Idle,
    Busy,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerState {
    pub status: WorkerStatus,
    /// Virtual time at which the worker is next free.
    pub clock: u64,
    /// Chunks granted so far, over the lifetime of the pool.
    pub chunks: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerPool {
    workers: Vec<WorkerState>,
}

impl WorkerPool {
    pub fn new(p: usize) -> Result<WorkerPool> {
        if p == 0 {
            return Err(Error::Argument("worker count must be at least 1".into()));
        }
        Ok(WorkerPool {
            workers: (0..p)
                .map(|_| WorkerState {
                    status: WorkerStatus::Idle,
                    clock: 0,
                    chunks: 0,
                })
                .collect(),
        })
    }

    pub fn p(&self) -> usize {
        self.workers.len()
    }

    pub fn workers(&self) -> &[WorkerState] {
        &self.workers
    }

    pub fn live(&self) -> usize {
        self.workers.iter().filter(|w| w.status != WorkerStatus::Failed).count()
    }

    fn alive(&self, w: usize) -> bool {
        self.workers[w].status != WorkerStatus::Failed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChunkStatus {
    Done,
    Failed,
}

/// One chunk execution on one worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub worker: usize,
    pub start: u64,
    pub end: u64,
    pub t_grant: u64,
    pub t_done: u64,
    pub status: ChunkStatus,
    /// The failed entry this chunk re-executes.
    pub redispatch_of: Option<usize>,
    /// Remaining iterations and live worker (or group) count when a fresh
    /// dynamic chunk was granted; `None` for static and re-dispatched chunks.
    pub grant: Option<(u64, usize)>,
    /// Sequence number of the dispatcher grant this entry belongs to. Hybrid
    /// grants produce several entries with the same number.
    pub grant_seq: usize,
}

impl TraceEntry {
    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScheduleTrace {
    pub entries: Vec<TraceEntry>,
}

impl ScheduleTrace {
    pub fn completed(&self) -> impl Iterator<Item = &TraceEntry> {
        self.entries.iter().filter(|e| e.status == ChunkStatus::Done)
    }

    /// Sizes of fresh dispatcher grants, in grant order.
    pub fn granted_sizes(&self) -> Vec<u64> {
        let mut out: Vec<(usize, u64)> = Vec::new();
        for e in self.entries.iter().filter(|e| e.grant.is_some()) {
            match out.last_mut() {
                Some((seq, n)) if *seq == e.grant_seq => *n += e.len(),
                _ => out.push((e.grant_seq, e.len())),
            }
        }
        out.into_iter().map(|(_, n)| n).collect()
    }

    pub fn per_worker_iterations(&self, p: usize) -> Vec<u64> {
        let mut v = alloc::vec![0; p];
        for e in self.completed() {
            v[e.worker] += e.len();
        }
        v
    }

    pub fn discarded_iterations(&self) -> u64 {
        self.entries
            .iter()
            .filter(|e| e.status == ChunkStatus::Failed)
            .map(TraceEntry::len)
            .sum()
    }

    /// Line records `worker chunk_start chunk_end t_grant t_done status`.
    pub fn lines(&self) -> Vec<alloc::string::String> {
        self.entries
            .iter()
            .map(|e| {
                let status = match e.status {
                    ChunkStatus::Done => "DONE",
                    ChunkStatus::Failed => "FAILED",
                };
                let mut line = format!("{} {} {} {} {} {status}", e.worker, e.start, e.end, e.t_grant, e.t_done);
                if let Some(r) = e.redispatch_of {
                    line.push_str(&format!(" redispatch_of={r}"));
                }
                line
            })
            .collect()
    }
}

/// Latest completion time in the trace, equal to the busiest worker's total
/// cost when workers start together.
pub fn makespan(trace: &ScheduleTrace) -> u64 {
    trace.entries.iter().map(|e| e.t_done).max().unwrap_or(0)
}

/// The work behind a parallel loop.
pub trait ChunkWork {
    /// Executes iterations `start..end` for trace entry `entry` on `worker`
    /// and returns the virtual time the chunk takes. The result must stay
    /// private until the caller sees the entry completed in the trace.
    fn execute(&mut self, entry: usize, worker: usize, start: u64, end: u64) -> Result<u64>;
}

struct CostWork<F>(F);

impl<F: FnMut(u64) -> u64> ChunkWork for CostWork<F> {
    fn execute(&mut self, _: usize, _: usize, start: u64, end: u64) -> Result<u64> {
        Ok((start..end).map(&mut self.0).sum())
    }
}

/// Simulates one parallel loop of `n_iters` iterations on a fresh copy of `pool`.
pub fn run_schedule(
    n_iters: u64,
    pool: &WorkerPool,
    policy: &ChunkPolicy,
    faults: &[FaultEvent],
    cost_fn: impl FnMut(u64) -> u64,
) -> Result<ScheduleTrace> {
    let mut sim = Simulator::new(pool.clone(), policy.clone(), faults.to_vec())?;
    sim.run(n_iters, &mut CostWork(cost_fn))
}

/// Deterministic virtual-time dispatcher. Worker clocks, failures and chunk
/// counts persist across successive loops, which are separated by a barrier.
#[derive(Debug, Clone)]
pub struct Simulator {
    pool: WorkerPool,
    policy: ChunkPolicy,
    faults: Vec<FaultEvent>,
    groups: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    start: u64,
    end: u64,
    redispatch_of: Option<usize>,
}

struct InFlight {
    entry: usize,
    ends_at: u64,
    fails: bool,
}

impl Simulator {
    pub fn new(pool: WorkerPool, policy: ChunkPolicy, faults: Vec<FaultEvent>) -> Result<Simulator> {
        policy.validate()?;
        for f in &faults {
            if f.worker >= pool.p() {
                return Err(Error::Argument(format!(
                    "fault names worker {} but there are only {} workers",
                    f.worker,
                    pool.p()
                )));
            }
            if matches!(f.trigger, FaultTrigger::AfterChunk(0) | FaultTrigger::AtTime(0)) {
                return Err(Error::Argument("fault triggers must be positive".into()));
            }
        }
        let size = match &policy {
            ChunkPolicy::Hybrid { group, .. } => *group,
            _ => 1,
        };
        let ids: Vec<usize> = (0..pool.p()).collect();
        let groups = ids.chunks(size).map(<[usize]>::to_vec).collect();
        Ok(Simulator {
            pool,
            policy,
            faults,
            groups,
        })
    }

    pub fn pool(&self) -> &WorkerPool {
        &self.pool
    }

    pub fn policy(&self) -> &ChunkPolicy {
        &self.policy
    }

    fn death_time(&self, w: usize) -> Option<u64> {
        self.faults
            .iter()
            .filter(|f| f.worker == w)
            .filter_map(|f| match f.trigger {
                FaultTrigger::AtTime(t) => Some(t),
                _ => None,
            })
            .min()
    }

    fn fails_on_chunk(&self, w: usize, nth: u32) -> bool {
        self.faults
            .iter()
            .any(|f| f.worker == w && f.trigger == FaultTrigger::AfterChunk(nth))
    }

    fn unit_alive(&self, u: usize) -> bool {
        self.groups[u].iter().any(|&w| self.pool.alive(w))
    }

    fn unit_clock(&self, u: usize) -> u64 {
        self.groups[u]
            .iter()
            .filter(|&&w| self.pool.alive(w))
            .map(|&w| self.pool.workers[w].clock)
            .max()
            .unwrap_or(0)
    }

    fn live_units(&self) -> usize {
        (0..self.groups.len()).filter(|&u| self.unit_alive(u)).count()
    }

    fn kill(&mut self, w: usize) {
        self.pool.workers[w].status = WorkerStatus::Failed;
    }

    /// Runs one parallel loop of `n` iterations to completion.
    pub fn run(&mut self, n: u64, work: &mut dyn ChunkWork) -> Result<ScheduleTrace> {
        let units = self.groups.len();
        let barrier = (0..self.pool.p())
            .filter(|&w| self.pool.alive(w))
            .map(|w| self.pool.workers[w].clock)
            .max()
            .unwrap_or(0);
        for w in &mut self.pool.workers {
            if w.status != WorkerStatus::Failed {
                w.clock = barrier;
                w.status = WorkerStatus::Idle;
            }
        }

        let mut trace = ScheduleTrace::default();
        let mut pending: VecDeque<Pending> = VecDeque::new();
        let mut own: Vec<VecDeque<Pending>> = (0..units).map(|_| VecDeque::new()).collect();
        let mut fresh = 0u64;
        let fresh_chunk = |s: u64, e: u64| Pending {
            start: s,
            end: e,
            redispatch_of: None,
        };
        match self.policy {
            ChunkPolicy::StaticBlock => {
                for u in 0..units {
                    let (s, e) = block_bounds(n as usize, units, u);
                    if s < e {
                        own[u].push_back(fresh_chunk(s as u64, e as u64));
                    }
                }
                fresh = n;
            }
            ChunkPolicy::StaticCyclic => {
                for i in 0..n {
                    own[(i % units as u64) as usize].push_back(fresh_chunk(i, i + 1));
                }
                fresh = n;
            }
            _ => {}
        }
        let mut sizer = ChunkSizer::new(&self.policy, n, self.live_units());
        let mut inflight: Vec<Vec<InFlight>> = (0..units).map(|_| Vec::new()).collect();
        let mut grant_seq = 0usize;
        for u in 0..units {
            if !self.unit_alive(u) {
                let moved: Vec<Pending> = own[u].drain(..).collect();
                pending.extend(moved);
            }
        }

        loop {
            let completion = inflight
                .iter()
                .enumerate()
                .flat_map(|(u, fl)| fl.iter().enumerate().map(move |(i, f)| (u, i, f)))
                .min_by_key(|(_, _, f)| (f.ends_at, trace.entries[f.entry].worker))
                .map(|(u, i, f)| (f.ends_at, u, i));
            let has_work = |u: usize| !pending.is_empty() || fresh < n || !own[u].is_empty();
            let grant = (0..units)
                .filter(|&u| self.unit_alive(u) && inflight[u].is_empty() && has_work(u))
                .map(|u| (self.unit_clock(u), u))
                .min();

            match (completion, grant) {
                (Some((t, u, i)), g) if g.is_none_or(|(tg, _)| t <= tg) => {
                    let f = inflight[u].swap_remove(i);
                    let e = &mut trace.entries[f.entry];
                    let w = e.worker;
                    e.t_done = f.ends_at;
                    if f.fails {
                        e.status = ChunkStatus::Failed;
                        pending.push_back(Pending {
                            start: e.start,
                            end: e.end,
                            redispatch_of: Some(f.entry),
                        });
                        self.kill(w);
                        if !self.unit_alive(u) {
                            let moved: Vec<Pending> = own[u].drain(..).collect();
                            pending.extend(moved);
                        }
                    } else {
                        e.status = ChunkStatus::Done;
                        self.pool.workers[w].clock = f.ends_at;
                        self.pool.workers[w].status = WorkerStatus::Idle;
                    }
                }
                (_, Some((now, u))) => {
                    for w in self.groups[u].clone() {
                        if self.pool.alive(w) && self.death_time(w).is_some_and(|d| d <= now) {
                            self.kill(w);
                        }
                    }
                    if !self.unit_alive(u) {
                        let moved: Vec<Pending> = own[u].drain(..).collect();
                        pending.extend(moved);
                        continue;
                    }
                    let (chunk, info) = if let Some(c) = pending.pop_front() {
                        (c, None)
                    } else if let Some(c) = own[u].pop_front() {
                        (c, None)
                    } else {
                        let live = self.live_units();
                        let size = sizer.next_chunk(n - fresh, live).expect("work remains");
                        let c = fresh_chunk(fresh, fresh + size);
                        let info = Some((n - fresh, live));
                        fresh += size;
                        (c, info)
                    };
                    let members: Vec<usize> = self.groups[u].iter().copied().filter(|&w| self.pool.alive(w)).collect();
                    let len = (chunk.end - chunk.start) as usize;
                    for (j, &w) in members.iter().enumerate() {
                        let (s, e) = block_bounds(len, members.len(), j);
                        if s == e {
                            continue;
                        }
                        let (s, e) = (chunk.start + s as u64, chunk.start + e as u64);
                        let entry = trace.entries.len();
                        self.pool.workers[w].chunks += 1;
                        self.pool.workers[w].status = WorkerStatus::Busy;
                        let nth = self.pool.workers[w].chunks;
                        trace.entries.push(TraceEntry {
                            worker: w,
                            start: s,
                            end: e,
                            t_grant: now,
                            t_done: now,
                            status: ChunkStatus::Failed,
                            redispatch_of: chunk.redispatch_of,
                            grant: info,
                            grant_seq,
                        });
                        let cost = work.execute(entry, w, s, e)?;
                        let done = now + cost;
                        let (ends_at, fails) = match self.death_time(w) {
                            Some(d) if d < done => (d, true),
                            _ => (done, self.fails_on_chunk(w, nth)),
                        };
                        inflight[u].push(InFlight { entry, ends_at, fails });
                    }
                    grant_seq += 1;
                }
                _ => {
                    let mut unfinished: Vec<u64> = pending
                        .iter()
                        .chain(own.iter().flatten())
                        .flat_map(|c| c.start..c.end)
                        .chain(fresh..n)
                        .collect();
                    if unfinished.is_empty() {
                        break;
                    }
                    unfinished.sort_unstable();
                    return Err(Error::Unrecoverable { unfinished });
                }
            }
        }
        Ok(trace)
    }
}
