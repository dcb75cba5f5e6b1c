//! Block-wavefront parallel Needleman-Wunsch.
//!
//! The columns of the matrix are split into one strip per worker. Each
//! worker fills its strip `tile_height` rows at a time; after every tile it
//! sends the scores of its last column (plus the corner above them) to its
//! right neighbour, which needs them for its own first column. Worker `k`
//! therefore runs tile `t` during wavefront step `k + t`.
//!
//! Every worker keeps the traceback moves of its strip. The coordinator
//! walks the optimal path from `(n, m)` leftwards, asking the owner of each
//! strip in turn to trace its part of the path.

use std::mem::size_of;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::align::{self, best_step, AlignError, Alignment, Score, Scoring, Step};
use crate::harness::{
    self, ClusterConfig, Endpoint, ExecMode, HarnessError, SimChannel, SimTime, TimingReport,
    WireSize, WorkerTiming,
};
use crate::seqio::Sequence;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WavefrontError {
    #[error("cannot split {m} columns over {workers} workers with tile height {tile_height}")]
    InvalidPartition {
        m: usize,
        workers: usize,
        tile_height: usize,
    },
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

/// Half-open, 1-based column range `[col_lo, col_hi)` owned by one worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Strip {
    pub worker: usize,
    pub col_lo: usize,
    pub col_hi: usize,
}

impl Strip {
    pub fn width(&self) -> usize {
        self.col_hi - self.col_lo
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    pub n: usize,
    pub m: usize,
    pub workers: usize,
    pub tile_height: usize,
    pub strips: Vec<Strip>,
}

impl BlockLayout {
    pub fn tiles(&self) -> usize {
        self.n.div_ceil(self.tile_height)
    }

    /// Number of boundary messages a full fill sends: `(W - 1) * ceil(n / h)`.
    pub fn boundary_messages(&self) -> usize {
        (self.workers - 1) * self.tiles()
    }

    fn owner(&self, col: usize) -> usize {
        self.strips
            .iter()
            .position(|s| col >= s.col_lo && col < s.col_hi)
            .expect("column inside the matrix")
    }
}

/// Split columns `1..=m` into `workers` strips whose widths differ by at
/// most one, wider strips first.
///
/// `m = 0` is accepted only for a single worker, which then owns an empty
/// strip.
pub fn partition(
    n: usize,
    m: usize,
    workers: usize,
    tile_height: usize,
) -> Result<BlockLayout, WavefrontError> {
    let bad = WavefrontError::InvalidPartition { m, workers, tile_height };
    if workers < 1 || tile_height < 1 || (workers > m && !(m == 0 && workers == 1)) {
        return Err(bad);
    }
    let base = m / workers;
    let extra = m % workers;
    let mut strips = Vec::with_capacity(workers);
    let mut lo = 1;
    for worker in 0..workers {
        let width = base + usize::from(worker < extra);
        strips.push(Strip { worker, col_lo: lo, col_hi: lo + width });
        lo += width;
    }
    Ok(BlockLayout { n, m, workers, tile_height, strips })
}

/// Last-column scores of one tile, sent to the right neighbour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMessage<T> {
    pub from_worker: usize,
    pub to_worker: usize,
    /// First row of the tile (1-based).
    pub row_lo: usize,
    /// `A(row_lo - 1, c)` followed by `A(r, c)` for each tile row, where
    /// `c = col_hi - 1` of the sender.
    pub values: Vec<T>,
}

impl<T> BoundaryMessage<T> {
    pub fn row_hi(&self) -> usize {
        self.row_lo + self.values.len() - 1
    }
}

impl<T> WireSize for BoundaryMessage<T> {
    fn wire_bytes(&self) -> usize {
        3 * size_of::<u64>() + self.values.len() * size_of::<T>()
    }
}

enum ToCoordinator<T> {
    Done { score: Option<T>, timing: WorkerTiming },
    Segment(TraceSegment),
}

impl<T> WireSize for ToCoordinator<T> {
    fn wire_bytes(&self) -> usize {
        match self {
            ToCoordinator::Done { .. } => 4 * size_of::<u64>(),
            ToCoordinator::Segment(s) => s.wire_bytes(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct TraceRequest {
    i: usize,
    j: usize,
}

impl WireSize for TraceRequest {
    fn wire_bytes(&self) -> usize {
        2 * size_of::<u64>()
    }
}

/// Part of the alignment traced inside one strip, columns in reverse order.
#[derive(Debug, Clone)]
struct TraceSegment {
    i: usize,
    j: usize,
    rev_s: Vec<u8>,
    rev_r: Vec<u8>,
}

impl WireSize for TraceSegment {
    fn wire_bytes(&self) -> usize {
        2 * size_of::<u64>() + self.rev_s.len() + self.rev_r.len()
    }
}

/// One worker's share of the matrix.
struct StripWorker<'a, T> {
    id: usize,
    lo: usize,
    width: usize,
    s: &'a [u8],
    r: &'a [u8],
    scoring: Scoring<T>,
    tile_height: usize,
    next_row: usize,
    /// Scores of the last filled row for columns `lo - 1 ..= hi - 1`.
    prev: Vec<T>,
    cur: Vec<T>,
    /// Moves for rows `0..=n` and columns `lo..hi`.
    steps: Vec<Step>,
}

impl<'a, T: Score> StripWorker<'a, T> {
    fn new(strip: Strip, s: &'a [u8], r: &'a [u8], scoring: Scoring<T>, tile_height: usize) -> Self {
        let width = strip.width();
        let n = s.len();
        let prev: Vec<T> = (strip.col_lo - 1..strip.col_hi).map(|j| scoring.boundary(j)).collect();
        let mut steps = vec![Step::Diagonal; (n + 1) * width];
        steps[..width].fill(Step::Left);
        StripWorker {
            id: strip.worker,
            lo: strip.col_lo,
            width,
            s,
            r: &r[strip.col_lo - 1..strip.col_hi - 1],
            scoring,
            tile_height,
            next_row: 1,
            cur: vec![T::zero(); width + 1],
            prev,
            steps,
        }
    }

    /// Fill the next tile. `incoming` carries the left boundary column and
    /// is `None` only for worker 0. Returns the message for the right
    /// neighbour and the number of cells computed.
    fn fill_tile(&mut self, incoming: Option<&BoundaryMessage<T>>) -> (BoundaryMessage<T>, u64) {
        let n = self.s.len();
        let row_lo = self.next_row;
        let row_hi = (row_lo + self.tile_height).min(n + 1);
        let mut out = Vec::with_capacity(row_hi - row_lo + 1);
        out.push(self.prev[self.width]);
        if let Some(msg) = incoming {
            debug_assert_eq!(msg.row_lo, row_lo);
            debug_assert_eq!(msg.values[0], self.prev[0]);
        }
        let (w, delta) = (self.width, self.scoring.delta);
        for i in row_lo..row_hi {
            self.cur[0] = match incoming {
                Some(msg) => msg.values[i - row_lo + 1],
                None => self.scoring.boundary(i),
            };
            let si = self.s[i - 1];
            let row = &mut self.steps[i * w..(i + 1) * w];
            let (prev, cur) = (&self.prev, &mut self.cur);
            for c in 1..=w {
                let diag = prev[c - 1] + self.scoring.substitution(si, self.r[c - 1]);
                let up = prev[c] + delta;
                let left = cur[c - 1] + delta;
                let (v, step) = best_step(diag, up, left);
                cur[c] = v;
                row[c - 1] = step;
            }
            std::mem::swap(&mut self.prev, &mut self.cur);
            out.push(self.prev[w]);
        }
        self.next_row = row_hi;
        let msg = BoundaryMessage {
            from_worker: self.id,
            to_worker: self.id + 1,
            row_lo,
            values: out,
        };
        (msg, ((row_hi - row_lo) * w) as u64)
    }

    /// `A(n, hi - 1)` once every tile is filled.
    fn corner_score(&self) -> T {
        self.prev[self.width]
    }

    /// Follow the moves from `(i, j)` until the path leaves this strip.
    fn trace(&self, req: TraceRequest) -> TraceSegment {
        let (mut i, mut j) = (req.i, req.j);
        let mut rev_s = Vec::new();
        let mut rev_r = Vec::new();
        while j >= self.lo && j > 0 {
            let step = if i == 0 {
                Step::Left
            } else {
                self.steps[i * self.width + (j - self.lo)]
            };
            match step {
                Step::Diagonal => {
                    rev_s.push(self.s[i - 1]);
                    rev_r.push(self.r[j - self.lo]);
                    i -= 1;
                    j -= 1;
                }
                Step::Up => {
                    rev_s.push(self.s[i - 1]);
                    rev_r.push(b'-');
                    i -= 1;
                }
                Step::Left => {
                    rev_s.push(b'-');
                    rev_r.push(self.r[j - self.lo]);
                    j -= 1;
                }
            }
        }
        TraceSegment { i, j, rev_s, rev_r }
    }
}

/// Result of a parallel alignment run.
#[derive(Debug, Clone)]
pub struct WavefrontRun<T> {
    pub alignment: Alignment<T>,
    pub timing: TimingReport,
    pub layout: BlockLayout,
    pub boundary_messages: usize,
    pub boundary_bytes: usize,
}

/// Parallel global alignment of `s` (rows) against `r` (columns) over
/// `cfg.workers` workers. The alignment is identical to
/// [`align::nw_align`] for every worker count and tile height.
pub fn parallel_nw<T: Score>(
    s: &Sequence,
    r: &Sequence,
    scoring: &Scoring<T>,
    tile_height: usize,
    cfg: &ClusterConfig,
) -> Result<WavefrontRun<T>, WavefrontError> {
    align::check_alphabets(s, r)?;
    parallel_nw_bytes(s.residues(), r.residues(), scoring, tile_height, cfg)
}

pub(crate) fn parallel_nw_bytes<T: Score>(
    s: &[u8],
    r: &[u8],
    scoring: &Scoring<T>,
    tile_height: usize,
    cfg: &ClusterConfig,
) -> Result<WavefrontRun<T>, WavefrontError> {
    cfg.validate()?;
    scoring.check_range(s.len(), r.len())?;
    let layout = partition(s.len(), r.len(), cfg.workers, tile_height)?;
    match cfg.mode {
        ExecMode::Simulated => simulate(s, r, scoring, layout, cfg),
        ExecMode::Threaded => threaded(s, r, scoring, layout),
    }
}

fn assemble<T: Score>(score: T, mut rev_s: Vec<u8>, mut rev_r: Vec<u8>, i: usize, s: &[u8]) -> Alignment<T> {
    // path reached column 0: the remaining rows are gaps in R
    for row in (1..=i).rev() {
        rev_s.push(s[row - 1]);
        rev_r.push(b'-');
    }
    rev_s.reverse();
    rev_r.reverse();
    Alignment {
        score,
        aligned_s: String::from_utf8(rev_s).expect("ASCII"),
        aligned_r: String::from_utf8(rev_r).expect("ASCII"),
    }
}

/// Deterministic mode: workers are stepped round-robin, one wavefront at a
/// time, over simulated channels.
fn simulate<T: Score>(
    s: &[u8],
    r: &[u8],
    scoring: &Scoring<T>,
    layout: BlockLayout,
    cfg: &ClusterConfig,
) -> Result<WavefrontRun<T>, WavefrontError> {
    let w = layout.workers;
    let tiles = layout.tiles();
    let mut workers: Vec<StripWorker<T>> = layout
        .strips
        .iter()
        .map(|&st| StripWorker::new(st, s, r, *scoring, layout.tile_height))
        .collect();
    let mut right: Vec<SimChannel<BoundaryMessage<T>>> = (0..w.saturating_sub(1))
        .map(|k| cfg.sim_channel(Endpoint::Worker(k), Endpoint::Worker(k + 1)))
        .collect::<Result<_, _>>()?;
    let mut to_coord: Vec<SimChannel<ToCoordinator<T>>> = (0..w)
        .map(|k| cfg.sim_channel(Endpoint::Worker(k), Endpoint::Coordinator))
        .collect::<Result<_, _>>()?;
    let mut to_worker: Vec<SimChannel<TraceRequest>> = (0..w)
        .map(|k| cfg.sim_channel(Endpoint::Coordinator, Endpoint::Worker(k)))
        .collect::<Result<_, _>>()?;

    let mut clock = vec![SimTime::ZERO; w];
    let mut compute = vec![Duration::ZERO; w];
    for step in 0..tiles + w - 1 {
        for k in 0..w {
            let Some(t) = step.checked_sub(k).filter(|&t| t < tiles) else { continue };
            let incoming = if k > 0 {
                let (msg, arrival) = right[k - 1]
                    .try_recv()?
                    .expect("left neighbour finished this tile one step earlier");
                clock[k] = clock[k].latest(arrival);
                debug_assert_eq!(msg.row_lo, 1 + t * layout.tile_height);
                Some(msg)
            } else {
                None
            };
            let (out, cells) = workers[k].fill_tile(incoming.as_ref());
            let cost = cfg.compute.cost(cells);
            compute[k] += cost;
            clock[k] = clock[k].compute(cost);
            if k + 1 < w {
                clock[k] = right[k].send(out, clock[k])?;
            }
        }
    }

    // the last strip holds A(n, m)
    let last = w - 1;
    let score = workers[last].corner_score();
    let done = ToCoordinator::Done {
        score: Some(score),
        timing: WorkerTiming::default(),
    };
    let mut coord = to_coord[last].send(done, clock[last])?;
    clock[last] = coord;
    let _ = to_coord[last].try_recv()?;

    let (mut i, mut j) = (s.len(), r.len());
    let (mut rev_s, mut rev_r) = (Vec::new(), Vec::new());
    while j > 0 {
        let k = layout.owner(j);
        let arrival = to_worker[k].send(TraceRequest { i, j }, coord)?;
        let (req, _) = to_worker[k].try_recv()?.expect("request just sent");
        let seg = workers[k].trace(req);
        let start = clock[k].latest(arrival);
        let cost = cfg.compute.cost(seg.rev_s.len() as u64);
        compute[k] += cost;
        clock[k] = to_coord[k].send(ToCoordinator::Segment(seg), start.compute(cost))?;
        let Some((ToCoordinator::Segment(seg), back)) = to_coord[k].try_recv()? else {
            unreachable!("worker replies with a segment")
        };
        coord = coord.latest(back);
        rev_s.extend_from_slice(&seg.rev_s);
        rev_r.extend_from_slice(&seg.rev_r);
        (i, j) = (seg.i, seg.j);
    }

    let boundary_messages = right.iter().map(|c| c.log().len()).sum();
    let boundary_bytes = right.iter().map(|c| c.bytes_sent()).sum();
    let end = clock.iter().fold(coord, |acc, &c| acc.latest(c));
    let per_worker = (0..w)
        .map(|k| WorkerTiming {
            worker: k,
            compute: compute[k],
            comm: right.get(k).map_or(Duration::ZERO, |c| c.comm_time()) + to_coord[k].comm_time(),
            finish: clock[k].with_comm,
        })
        .collect();
    Ok(WavefrontRun {
        alignment: assemble(score, rev_s, rev_r, i, s),
        timing: TimingReport::from_sim(end, per_worker),
        layout,
        boundary_messages,
        boundary_bytes,
    })
}

/// Threaded mode: one OS thread per strip; the calling thread coordinates.
fn threaded<T: Score>(
    s: &[u8],
    r: &[u8],
    scoring: &Scoring<T>,
    layout: BlockLayout,
) -> Result<WavefrontRun<T>, WavefrontError> {
    let w = layout.workers;
    let tiles = layout.tiles();
    let epoch = Instant::now();

    let mut right_tx = Vec::new();
    let mut left_rx = vec![None];
    for k in 0..w.saturating_sub(1) {
        let (tx, rx) = harness::channel::<BoundaryMessage<T>>(Endpoint::Worker(k), Endpoint::Worker(k + 1));
        right_tx.push(Some(tx));
        left_rx.push(Some(rx));
    }
    right_tx.push(None);
    let mut coord_rx = Vec::new();
    let mut coord_tx = Vec::new();
    let mut req_tx = Vec::new();
    let mut req_rx = Vec::new();
    for k in 0..w {
        let (tx, rx) = harness::channel::<ToCoordinator<T>>(Endpoint::Worker(k), Endpoint::Coordinator);
        coord_tx.push(tx);
        coord_rx.push(rx);
        let (tx, rx) = harness::channel::<TraceRequest>(Endpoint::Coordinator, Endpoint::Worker(k));
        req_tx.push(tx);
        req_rx.push(rx);
    }

    let mut boundary_messages = 0;
    let mut boundary_bytes = 0;
    let result = thread::scope(|scope| -> Result<_, WavefrontError> {
        let mut handles = Vec::with_capacity(w);
        let iter = layout
            .strips
            .iter()
            .zip(right_tx)
            .zip(left_rx)
            .zip(coord_tx)
            .zip(req_rx);
        for ((((&strip, mut right), mut left), mut to_coord), mut requests) in iter {
            let scoring = *scoring;
            let tile_height = layout.tile_height;
            handles.push(scope.spawn(move || -> Result<(usize, usize), HarnessError> {
                let mut worker = StripWorker::new(strip, s, r, scoring, tile_height);
                let mut compute = Duration::ZERO;
                for _ in 0..tiles {
                    let incoming = match left.as_mut() {
                        Some(rx) => Some(rx.recv()?),
                        None => None,
                    };
                    let t0 = Instant::now();
                    let (out, _) = worker.fill_tile(incoming.as_ref());
                    compute += t0.elapsed();
                    if let Some(tx) = right.as_mut() {
                        tx.send(out)?;
                    }
                }
                let sent = right.as_ref().map_or((0, 0), |tx| {
                    (tx.log().len(), tx.log().iter().map(|r| r.bytes).sum())
                });
                let comm = right.as_ref().map_or(Duration::ZERO, |tx| tx.comm_time())
                    + left.as_ref().map_or(Duration::ZERO, |rx| rx.comm_time());
                let score = (strip.worker == w - 1).then(|| worker.corner_score());
                let timing = WorkerTiming {
                    worker: strip.worker,
                    compute,
                    comm,
                    finish: epoch.elapsed(),
                };
                to_coord.send(ToCoordinator::Done { score, timing })?;
                // serve traceback requests until the coordinator hangs up
                while let Ok(req) = requests.recv() {
                    to_coord.send(ToCoordinator::Segment(worker.trace(req)))?;
                }
                Ok(sent)
            }));
        }

        let mut score = None;
        let mut per_worker = Vec::with_capacity(w);
        for rx in coord_rx.iter_mut() {
            match rx.recv()? {
                ToCoordinator::Done { score: sc, timing } => {
                    score = score.or(sc);
                    per_worker.push(timing);
                }
                ToCoordinator::Segment(_) => unreachable!("no trace requested yet"),
            }
        }
        let score = score.expect("last worker reports the score");

        let (mut i, mut j) = (s.len(), r.len());
        let (mut rev_s, mut rev_r) = (Vec::new(), Vec::new());
        while j > 0 {
            let k = layout.owner(j);
            req_tx[k].send(TraceRequest { i, j })?;
            let ToCoordinator::Segment(seg) = coord_rx[k].recv()? else {
                unreachable!("worker replies with a segment")
            };
            rev_s.extend_from_slice(&seg.rev_s);
            rev_r.extend_from_slice(&seg.rev_r);
            (i, j) = (seg.i, seg.j);
        }
        drop(req_tx);
        for h in handles {
            let (count, bytes) = h.join().expect("worker thread panicked")?;
            boundary_messages += count;
            boundary_bytes += bytes;
        }
        let total = epoch.elapsed();
        Ok((assemble(score, rev_s, rev_r, i, s), TimingReport::from_measured(total, per_worker)))
    })?;

    Ok(WavefrontRun {
        alignment: result.0,
        timing: result.1,
        layout,
        boundary_messages,
        boundary_bytes,
    })
}
