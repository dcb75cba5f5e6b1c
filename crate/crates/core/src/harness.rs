//! Simulated cluster substrate: message channels with byte accounting, a
//! FIFO job queue and timing reports that separate communication from
//! computation.
//!
//! Two execution modes share one API. `Simulated` runs everything on the
//! calling thread against virtual clocks and is bit-for-bit reproducible;
//! `Threaded` uses real threads and measures wall time.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HarnessError {
    #[error("invalid cluster configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("channel {from} -> {to} is closed")]
    ChannelClosed { from: Endpoint, to: Endpoint },
    #[error("unknown endpoint {0}")]
    UnknownEndpoint(Endpoint),
    #[error("duplicate job id {0}")]
    DuplicateJob(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    /// Deterministic discrete-event simulation on the calling thread.
    Simulated,
    /// One OS thread per worker, wall-clock timing.
    Threaded,
}

impl std::str::FromStr for ExecMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sim" | "simulated" => Ok(ExecMode::Simulated),
            "threads" | "threaded" => Ok(ExecMode::Threaded),
            other => Err(format!("unknown mode {other:?} (expected sim or threads)")),
        }
    }
}

/// Cost of moving a message in simulation: `latency + bytes / bandwidth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommModel {
    /// Bytes per second.
    pub bandwidth: f64,
    pub latency: Duration,
}

impl CommModel {
    pub const FREE: CommModel = CommModel {
        bandwidth: f64::INFINITY,
        latency: Duration::ZERO,
    };

    pub fn transfer_time(&self, bytes: usize) -> Duration {
        let nanos = (bytes as f64 / self.bandwidth * 1e9).round();
        self.latency + Duration::from_nanos(nanos as u64)
    }
}

impl Default for CommModel {
    /// 1 GiB/s and 100 µs per message.
    fn default() -> Self {
        CommModel {
            bandwidth: (1u64 << 30) as f64,
            latency: Duration::from_micros(100),
        }
    }
}

/// Cost of one abstract work unit (a DP cell, a scanned residue) in simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComputeModel {
    pub per_unit: Duration,
}

impl ComputeModel {
    pub fn cost(&self, units: u64) -> Duration {
        Duration::from_nanos((self.per_unit.as_nanos() as u64).saturating_mul(units))
    }
}

impl Default for ComputeModel {
    fn default() -> Self {
        ComputeModel {
            per_unit: Duration::from_nanos(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConfig {
    pub workers: usize,
    pub mode: ExecMode,
    pub comm: CommModel,
    pub compute: ComputeModel,
}

impl ClusterConfig {
    pub fn new(workers: usize, mode: ExecMode) -> Result<Self, HarnessError> {
        let cfg = ClusterConfig {
            workers,
            mode,
            comm: CommModel::default(),
            compute: ComputeModel::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn simulated(workers: usize) -> Result<Self, HarnessError> {
        Self::new(workers, ExecMode::Simulated)
    }

    pub fn threaded(workers: usize) -> Result<Self, HarnessError> {
        Self::new(workers, ExecMode::Threaded)
    }

    pub fn with_comm(mut self, comm: CommModel) -> Result<Self, HarnessError> {
        self.comm = comm;
        self.validate()?;
        Ok(self)
    }

    pub fn with_compute(mut self, compute: ComputeModel) -> Self {
        self.compute = compute;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Result<Self, HarnessError> {
        self.workers = workers;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.workers < 1 {
            return Err(HarnessError::InvalidConfig("worker count must be at least 1"));
        }
        if self.comm.bandwidth.is_nan() || self.comm.bandwidth <= 0.0 {
            return Err(HarnessError::InvalidConfig("bandwidth must be positive"));
        }
        Ok(())
    }

    fn check_endpoint(&self, e: Endpoint) -> Result<(), HarnessError> {
        match e {
            Endpoint::Worker(w) if w >= self.workers => Err(HarnessError::UnknownEndpoint(e)),
            _ => Ok(()),
        }
    }

    /// Open a simulated channel between two endpoints of this cluster.
    pub fn sim_channel<M: WireSize>(
        &self,
        from: Endpoint,
        to: Endpoint,
    ) -> Result<SimChannel<M>, HarnessError> {
        self.check_endpoint(from)?;
        self.check_endpoint(to)?;
        Ok(SimChannel::new(from, to, self.comm))
    }

    /// Open a thread-safe channel between two endpoints of this cluster.
    pub fn thread_channel<M: WireSize + Send>(
        &self,
        from: Endpoint,
        to: Endpoint,
    ) -> Result<(Sender<M>, Receiver<M>), HarnessError> {
        self.check_endpoint(from)?;
        self.check_endpoint(to)?;
        Ok(channel(from, to))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    Coordinator,
    Worker(usize),
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Endpoint::Coordinator => f.write_str("coordinator"),
            Endpoint::Worker(w) => write!(f, "worker{w}"),
        }
    }
}

/// Size of a message on the wire, used for communication accounting.
pub trait WireSize {
    fn wire_bytes(&self) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SendRecord {
    pub bytes: usize,
    /// Send time: virtual time in simulation, offset from channel creation otherwise.
    pub at: Duration,
}

/// A point on two virtual timelines at once: one that pays for messages and
/// one where communication is free. Their difference at the end of a run is
/// the communication time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct SimTime {
    pub with_comm: Duration,
    pub without_comm: Duration,
}

impl SimTime {
    pub const ZERO: SimTime = SimTime {
        with_comm: Duration::ZERO,
        without_comm: Duration::ZERO,
    };

    pub fn compute(self, d: Duration) -> SimTime {
        SimTime {
            with_comm: self.with_comm + d,
            without_comm: self.without_comm + d,
        }
    }

    pub fn comm(self, d: Duration) -> SimTime {
        SimTime {
            with_comm: self.with_comm + d,
            without_comm: self.without_comm,
        }
    }

    pub fn latest(self, other: SimTime) -> SimTime {
        SimTime {
            with_comm: self.with_comm.max(other.with_comm),
            without_comm: self.without_comm.max(other.without_comm),
        }
    }
}

/// FIFO channel for the simulated mode. The sender pays the transfer time;
/// each message carries its arrival time.
#[derive(Debug)]
pub struct SimChannel<M> {
    from: Endpoint,
    to: Endpoint,
    model: CommModel,
    queue: VecDeque<(M, SimTime)>,
    closed: bool,
    log: Vec<SendRecord>,
}

impl<M: WireSize> SimChannel<M> {
    pub fn new(from: Endpoint, to: Endpoint, model: CommModel) -> Self {
        SimChannel {
            from,
            to,
            model,
            queue: VecDeque::new(),
            closed: false,
            log: Vec::new(),
        }
    }

    /// Enqueue `msg` sent at `now`; returns the time the transfer completes,
    /// which is both the sender's new clock and the message arrival time.
    pub fn send(&mut self, msg: M, now: SimTime) -> Result<SimTime, HarnessError> {
        if self.closed {
            return Err(HarnessError::ChannelClosed { from: self.from, to: self.to });
        }
        let bytes = msg.wire_bytes();
        let done = now.comm(self.model.transfer_time(bytes));
        self.log.push(SendRecord { bytes, at: now.with_comm });
        self.queue.push_back((msg, done));
        Ok(done)
    }

    /// `Ok(None)` means the caller should step another participant and retry.
    pub fn try_recv(&mut self) -> Result<Option<(M, SimTime)>, HarnessError> {
        match self.queue.pop_front() {
            Some(m) => Ok(Some(m)),
            None if self.closed => Err(HarnessError::ChannelClosed { from: self.from, to: self.to }),
            None => Ok(None),
        }
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn log(&self) -> &[SendRecord] {
        &self.log
    }

    pub fn bytes_sent(&self) -> usize {
        self.log.iter().map(|r| r.bytes).sum()
    }

    /// Total modeled transfer time of everything sent so far.
    pub fn comm_time(&self) -> Duration {
        self.log.iter().map(|r| self.model.transfer_time(r.bytes)).sum()
    }
}

/// Sending half of a threaded channel. Time spent inside `send` counts as
/// communication.
pub struct Sender<M> {
    from: Endpoint,
    to: Endpoint,
    inner: mpsc::Sender<M>,
    closed: Arc<AtomicBool>,
    epoch: Instant,
    log: Vec<SendRecord>,
    comm_time: Duration,
}

/// Receiving half of a threaded channel. Time blocked in `recv` counts as
/// communication.
pub struct Receiver<M> {
    from: Endpoint,
    to: Endpoint,
    inner: mpsc::Receiver<M>,
    closed: Arc<AtomicBool>,
    comm_time: Duration,
}

pub fn channel<M: WireSize + Send>(from: Endpoint, to: Endpoint) -> (Sender<M>, Receiver<M>) {
    let (tx, rx) = mpsc::channel();
    let closed = Arc::new(AtomicBool::new(false));
    (
        Sender {
            from,
            to,
            inner: tx,
            closed: Arc::clone(&closed),
            epoch: Instant::now(),
            log: Vec::new(),
            comm_time: Duration::ZERO,
        },
        Receiver {
            from,
            to,
            inner: rx,
            closed,
            comm_time: Duration::ZERO,
        },
    )
}

impl<M: WireSize + Send> Sender<M> {
    pub fn send(&mut self, msg: M) -> Result<(), HarnessError> {
        let start = Instant::now();
        if self.closed.load(Ordering::Acquire) {
            return Err(HarnessError::ChannelClosed { from: self.from, to: self.to });
        }
        let bytes = msg.wire_bytes();
        self.inner
            .send(msg)
            .map_err(|_| HarnessError::ChannelClosed { from: self.from, to: self.to })?;
        self.log.push(SendRecord {
            bytes,
            at: start.duration_since(self.epoch),
        });
        self.comm_time += start.elapsed();
        Ok(())
    }

    pub fn log(&self) -> &[SendRecord] {
        &self.log
    }

    pub fn comm_time(&self) -> Duration {
        self.comm_time
    }
}

impl<M> Receiver<M> {
    /// Blocks until a message arrives or every sender is gone.
    pub fn recv(&mut self) -> Result<M, HarnessError> {
        let start = Instant::now();
        let out = self
            .inner
            .recv()
            .map_err(|_| HarnessError::ChannelClosed { from: self.from, to: self.to });
        self.comm_time += start.elapsed();
        out
    }

    /// Refuse further sends; queued messages can still be received.
    pub fn close(&self) {
        self.closed.store(true, Ordering::Release);
    }

    pub fn comm_time(&self) -> Duration {
        self.comm_time
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkerTiming {
    pub worker: usize,
    pub compute: Duration,
    pub comm: Duration,
    /// When the worker finished, measured from the start of the run.
    pub finish: Duration,
}

/// Wall time of a run split into computation and communication.
///
/// `comm` covers every message of the run (boundary exchange, query
/// distribution and result collection). `without_comm()` is `total - comm`,
/// exactly, so the three numbers always satisfy the accounting identity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TimingReport {
    pub total: Duration,
    pub compute: Duration,
    pub comm: Duration,
    pub per_worker: Vec<WorkerTiming>,
}

impl TimingReport {
    pub fn without_comm(&self) -> Duration {
        self.total - self.comm
    }

    /// Build a report from the two simulated timelines. `end` is the time the
    /// run completes; comm is the gap between the paid and free timelines.
    pub fn from_sim(end: SimTime, per_worker: Vec<WorkerTiming>) -> TimingReport {
        let compute = per_worker.iter().map(|w| w.compute).max().unwrap_or_default();
        TimingReport {
            total: end.with_comm,
            compute,
            comm: end.with_comm - end.without_comm,
            per_worker,
        }
    }

    /// Build a report from measured wall time. The run's comm time is the
    /// largest per-worker comm time, capped at the total.
    pub fn from_measured(total: Duration, per_worker: Vec<WorkerTiming>) -> TimingReport {
        let compute = per_worker.iter().map(|w| w.compute).max().unwrap_or_default();
        let comm = per_worker
            .iter()
            .map(|w| w.comm)
            .max()
            .unwrap_or_default()
            .min(total);
        TimingReport {
            total,
            compute: compute.min(total),
            comm,
            per_worker,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JobId(pub u64);

impl std::fmt::Display for JobId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "j{}", self.0)
    }
}

#[derive(Debug, Clone)]
pub struct Job<P> {
    pub id: JobId,
    pub payload: P,
    /// Abstract cost units, informational only.
    pub cost_estimate: u64,
}

/// What an executor hands back: the job's result and, for the simulated
/// mode, how long the job takes.
#[derive(Debug, Clone)]
pub struct JobOutcome<R> {
    pub result: R,
    pub duration: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub job: JobId,
    pub worker: usize,
    pub start: Duration,
    pub end: Duration,
}

#[derive(Debug, Clone)]
pub struct QueueReport<R> {
    /// In submission order.
    pub assignments: Vec<Assignment>,
    pub results: BTreeMap<JobId, R>,
    pub failures: Vec<(JobId, String)>,
    pub makespan: Duration,
    pub timing: TimingReport,
}

impl<R> QueueReport<R> {
    pub fn worker_jobs(&self, worker: usize) -> Vec<Assignment> {
        self.assignments.iter().copied().filter(|a| a.worker == worker).collect()
    }
}

/// Dispatch jobs in submission order, each to the earliest-free worker
/// (lowest id on ties). A failing job is recorded and the rest still run.
pub fn run_job_queue<P, R, F>(
    jobs: &[Job<P>],
    cfg: &ClusterConfig,
    executor: F,
) -> Result<QueueReport<R>, HarnessError>
where
    P: Sync,
    R: Send,
    F: Fn(&Job<P>) -> Result<JobOutcome<R>, String> + Sync,
{
    cfg.validate()?;
    let mut seen = HashSet::new();
    for j in jobs {
        if !seen.insert(j.id) {
            return Err(HarnessError::DuplicateJob(j.id.0));
        }
    }
    match cfg.mode {
        ExecMode::Simulated => Ok(simulate_queue(jobs, cfg.workers, executor)),
        ExecMode::Threaded => Ok(threaded_queue(jobs, cfg.workers, executor)),
    }
}

fn simulate_queue<P, R, F>(jobs: &[Job<P>], workers: usize, executor: F) -> QueueReport<R>
where
    F: Fn(&Job<P>) -> Result<JobOutcome<R>, String>,
{
    let mut free_at = vec![Duration::ZERO; workers];
    let mut busy = vec![Duration::ZERO; workers];
    let mut assignments = Vec::with_capacity(jobs.len());
    let mut results = BTreeMap::new();
    let mut failures = Vec::new();
    for job in jobs {
        let (worker, start) = free_at
            .iter()
            .copied()
            .enumerate()
            .min_by_key(|&(w, t)| (t, w))
            .expect("at least one worker");
        let duration = match executor(job) {
            Ok(out) => {
                results.insert(job.id, out.result);
                out.duration
            }
            Err(e) => {
                failures.push((job.id, e));
                Duration::ZERO
            }
        };
        let end = start + duration;
        free_at[worker] = end;
        busy[worker] += duration;
        assignments.push(Assignment { job: job.id, worker, start, end });
    }
    let makespan = free_at.iter().copied().max().unwrap_or_default();
    let per_worker = (0..workers)
        .map(|w| WorkerTiming {
            worker: w,
            compute: busy[w],
            comm: Duration::ZERO,
            finish: free_at[w],
        })
        .collect();
    let end = SimTime { with_comm: makespan, without_comm: makespan };
    QueueReport {
        assignments,
        results,
        failures,
        makespan,
        timing: TimingReport::from_sim(end, per_worker),
    }
}

fn threaded_queue<P, R, F>(jobs: &[Job<P>], workers: usize, executor: F) -> QueueReport<R>
where
    P: Sync,
    R: Send,
    F: Fn(&Job<P>) -> Result<JobOutcome<R>, String> + Sync,
{
    let next = AtomicUsize::new(0);
    let epoch = Instant::now();
    // results travel back to the coordinator over a channel
    let (tx, rx) = mpsc::channel::<(usize, Assignment, Result<R, String>)>();
    let timings = Mutex::new(vec![WorkerTiming::default(); workers]);
    thread::scope(|scope| {
        for w in 0..workers {
            let tx = tx.clone();
            let next = &next;
            let executor = &executor;
            let timings = &timings;
            scope.spawn(move || {
                let mut busy = Duration::ZERO;
                loop {
                    let idx = next.fetch_add(1, Ordering::SeqCst);
                    let Some(job) = jobs.get(idx) else { break };
                    let start = epoch.elapsed();
                    let out = executor(job).map(|o| o.result);
                    let end = epoch.elapsed();
                    busy += end - start;
                    let a = Assignment { job: job.id, worker: w, start, end };
                    if tx.send((idx, a, out)).is_err() {
                        break;
                    }
                }
                let mut t = timings.lock().expect("timing lock");
                t[w] = WorkerTiming {
                    worker: w,
                    compute: busy,
                    comm: Duration::ZERO,
                    finish: epoch.elapsed(),
                };
            });
        }
    });
    drop(tx);
    let mut slots: Vec<Option<Assignment>> = vec![None; jobs.len()];
    let mut results = BTreeMap::new();
    let mut failures = Vec::new();
    for (idx, a, out) in rx.iter() {
        slots[idx] = Some(a);
        match out {
            Ok(r) => {
                results.insert(a.job, r);
            }
            Err(e) => failures.push((a.job, e)),
        }
    }
    failures.sort_by_key(|(id, _)| *id);
    let assignments: Vec<Assignment> = slots.into_iter().flatten().collect();
    let makespan = assignments.iter().map(|a| a.end).max().unwrap_or_default();
    let per_worker = timings.into_inner().expect("timing lock");
    QueueReport {
        assignments,
        results,
        failures,
        makespan,
        timing: TimingReport::from_measured(makespan, per_worker),
    }
}

/// One row of a benchmark table: single-node time and the multi-node time
/// with and without communication.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchRow {
    pub label: String,
    pub one_node: Duration,
    pub with_comm: Duration,
    pub without_comm: Duration,
    pub comm: Duration,
}

impl BenchRow {
    pub fn from_reports(label: impl Into<String>, one: &TimingReport, many: &TimingReport) -> Self {
        BenchRow {
            label: label.into(),
            one_node: one.total,
            with_comm: many.total,
            without_comm: many.without_comm(),
            comm: many.comm,
        }
    }
}

pub const BENCH_HEADER: &str = "label,one_node,nodes_with_comm,nodes_without_comm,comm_time";

/// Render rows as CSV; times are seconds with six significant digits.
pub fn bench_report(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    out.push_str(BENCH_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            csv_field(&r.label),
            sig6(r.one_node.as_secs_f64()),
            sig6(r.with_comm.as_secs_f64()),
            sig6(r.without_comm.as_secs_f64()),
            sig6(r.comm.as_secs_f64()),
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `%g`-style formatting with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
