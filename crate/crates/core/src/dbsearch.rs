//! Scatter-gather database search.
//!
//! The database is split into `W` partitions, every query is broadcast to
//! every partition, each partition runs a small seed-and-extend matcher
//! (exact k-mer seeds, ungapped X-dropoff extension) and the coordinator
//! merges the per-partition top-k lists.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{self, Write};
use std::thread;
use std::time::Instant;

use thiserror::Error;

use crate::align::Scoring;
use crate::harness::{
    self, ClusterConfig, Endpoint, ExecMode, HarnessError, SimTime, TimingReport, WireSize,
    WorkerTiming,
};
use crate::seqio::{Alphabet, AlphabetKind, Sequence};

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("database is empty")]
    EmptyDatabase,
    #[error("duplicate sequence id {0:?}")]
    DuplicateId(String),
    #[error("mixed alphabets: {0} and {1}")]
    AlphabetMismatch(Alphabet, Alphabet),
    #[error("bad search parameters: {0}")]
    BadParams(&'static str),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Database {
    sequences: Vec<Sequence>,
    total_residues: usize,
}

impl Database {
    pub fn new(sequences: Vec<Sequence>) -> Result<Database, SearchError> {
        let mut seen = HashSet::new();
        for s in &sequences {
            if !seen.insert(s.id()) {
                return Err(SearchError::DuplicateId(s.id().to_string()));
            }
            if s.alphabet() != sequences[0].alphabet() {
                return Err(SearchError::AlphabetMismatch(sequences[0].alphabet(), s.alphabet()));
            }
        }
        let total_residues = sequences.iter().map(Sequence::len).sum();
        Ok(Database { sequences, total_residues })
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.sequences
    }

    pub fn total_residues(&self) -> usize {
        self.total_residues
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn alphabet(&self) -> Option<Alphabet> {
        self.sequences.first().map(Sequence::alphabet)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub worker: usize,
    /// Positions in the database, in assignment order.
    pub members: Vec<usize>,
    pub residue_count: usize,
}

impl Partition {
    pub fn ids<'a>(&self, db: &'a Database) -> Vec<&'a str> {
        self.members.iter().map(|&i| db.sequences[i].id()).collect()
    }
}

/// Greedy balance: longest sequence first, each to the partition with the
/// fewest residues (lowest worker id on ties).
pub fn segment(db: &Database, workers: usize) -> Result<Vec<Partition>, SearchError> {
    if db.is_empty() {
        return Err(SearchError::EmptyDatabase);
    }
    if workers == 0 {
        return Err(SearchError::BadParams("worker count must be at least 1"));
    }
    let mut parts: Vec<Partition> = (0..workers)
        .map(|worker| Partition { worker, members: Vec::new(), residue_count: 0 })
        .collect();
    let mut order: Vec<usize> = (0..db.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(db.sequences[i].len()));
    for i in order {
        let target = parts
            .iter_mut()
            .min_by_key(|p| (p.residue_count, p.worker))
            .expect("at least one partition");
        target.members.push(i);
        target.residue_count += db.sequences[i].len();
    }
    Ok(parts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchParams {
    pub k: usize,
    pub scoring: Scoring<i32>,
    pub xdrop: i32,
    pub min_score: i32,
}

impl SearchParams {
    pub fn for_alphabet(alphabet: Alphabet) -> SearchParams {
        SearchParams {
            k: match alphabet.kind {
                AlphabetKind::Dna => 11,
                AlphabetKind::Protein => 4,
            },
            scoring: Scoring::default(),
            xdrop: 20,
            min_score: 16,
        }
    }

    fn validate(&self, alphabet: Alphabet) -> Result<(), SearchError> {
        if self.k == 0 {
            return Err(SearchError::BadParams("seed length must be at least 1"));
        }
        if self.k > max_seed_len(alphabet) {
            return Err(SearchError::BadParams("seed length too large for the alphabet"));
        }
        if self.xdrop < 0 {
            return Err(SearchError::BadParams("dropoff must be non-negative"));
        }
        Ok(())
    }
}

/// A local ungapped match; coordinates are 1-based and inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hit {
    pub query_id: String,
    pub subject_id: String,
    pub score: i32,
    pub q_start: usize,
    pub q_end: usize,
    pub s_start: usize,
    pub s_end: usize,
}

/// Ranking order: best score first, then subject id, then subject start.
impl Ord for Hit {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .cmp(&self.score)
            .then_with(|| self.subject_id.cmp(&other.subject_id))
            .then_with(|| self.s_start.cmp(&other.s_start))
            .then_with(|| self.s_end.cmp(&other.s_end))
            .then_with(|| self.q_start.cmp(&other.q_start))
            .then_with(|| self.q_end.cmp(&other.q_end))
            .then_with(|| self.query_id.cmp(&other.query_id))
    }
}

impl PartialOrd for Hit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sum of substitution scores over the paired intervals of `hit`.
pub fn rescore_hit(hit: &Hit, query: &Sequence, subject: &Sequence, scoring: &Scoring<i32>) -> Option<i32> {
    let q = query.residues().get(hit.q_start.checked_sub(1)?..hit.q_end)?;
    let s = subject.residues().get(hit.s_start.checked_sub(1)?..hit.s_end)?;
    (q.len() == s.len()).then(|| q.iter().zip(s).map(|(&a, &b)| scoring.substitution(a, b)).sum())
}

fn max_seed_len(alphabet: Alphabet) -> usize {
    let base = (alphabet.symbols().len() - 1) as f64;
    (64.0 / base.log2()).floor() as usize
}

/// Packed codes of every wildcard-free k-mer of `seq`, by start position.
fn kmer_codes(seq: &[u8], k: usize, alphabet: Alphabet) -> Vec<Option<u64>> {
    let base = (alphabet.symbols().len() - 1) as u64;
    let rank = |c: u8| {
        alphabet
            .symbols()
            .iter()
            .position(|&s| s == c)
            .filter(|_| !alphabet.is_wildcard(c))
            .map(|r| r as u64)
    };
    let ranks: Vec<Option<u64>> = seq.iter().map(|&c| rank(c)).collect();
    if seq.len() < k {
        return Vec::new();
    }
    (0..=seq.len() - k)
        .map(|i| ranks[i..i + k].iter().try_fold(0u64, |acc, r| Some(acc * base + (*r)?)))
        .collect()
}

/// Exact k-mer index over the sequences of one partition.
#[derive(Debug, Clone)]
pub struct PartitionIndex<'a> {
    db: &'a Database,
    members: Vec<usize>,
    k: usize,
    alphabet: Alphabet,
    seeds: HashMap<u64, Vec<(u32, u32)>>,
}

impl<'a> PartitionIndex<'a> {
    pub fn build(db: &'a Database, part: &Partition, k: usize) -> Result<Self, SearchError> {
        let alphabet = db.alphabet().ok_or(SearchError::EmptyDatabase)?;
        if k == 0 || k > max_seed_len(alphabet) {
            return Err(SearchError::BadParams("seed length out of range"));
        }
        let mut seeds: HashMap<u64, Vec<(u32, u32)>> = HashMap::new();
        for (slot, &i) in part.members.iter().enumerate() {
            for (pos, code) in kmer_codes(db.sequences[i].residues(), k, alphabet).into_iter().enumerate() {
                if let Some(code) = code {
                    seeds.entry(code).or_default().push((slot as u32, pos as u32));
                }
            }
        }
        Ok(PartitionIndex { db, members: part.members.clone(), k, alphabet, seeds })
    }

    /// All distinct hits of `query` scoring at least `min_score`, ranked.
    /// The second value counts work units for the cost model.
    pub fn search(&self, query: &Sequence, params: &SearchParams) -> Result<(Vec<Hit>, u64), SearchError> {
        params.validate(self.alphabet)?;
        if params.k != self.k {
            return Err(SearchError::BadParams("seed length differs from the index"));
        }
        if query.alphabet() != self.alphabet {
            return Err(SearchError::AlphabetMismatch(self.alphabet, query.alphabet()));
        }
        if query.len() < params.k {
            return Err(SearchError::BadParams("seed length exceeds query length"));
        }
        let q = query.residues();
        let mut units = q.len() as u64;
        let mut found = BTreeSet::new();
        for (qi, code) in kmer_codes(q, self.k, self.alphabet).into_iter().enumerate() {
            let Some(hits) = code.and_then(|c| self.seeds.get(&c)) else { continue };
            for &(slot, sj) in hits {
                let subject = &self.db.sequences[self.members[slot as usize]];
                let (ext, steps) = extend(q, subject.residues(), qi, sj as usize, params);
                units += steps;
                if ext.score >= params.min_score {
                    found.insert(Hit {
                        query_id: query.id().to_string(),
                        subject_id: subject.id().to_string(),
                        score: ext.score,
                        q_start: ext.q_lo + 1,
                        q_end: ext.q_lo + ext.len,
                        s_start: ext.s_lo + 1,
                        s_end: ext.s_lo + ext.len,
                    });
                }
            }
        }
        Ok((found.into_iter().collect(), units))
    }
}

struct Extension {
    score: i32,
    q_lo: usize,
    s_lo: usize,
    len: usize,
}

/// Ungapped X-dropoff extension of the seed at `q[qi..qi+k]`/`s[sj..sj+k]`.
fn extend(q: &[u8], s: &[u8], qi: usize, sj: usize, params: &SearchParams) -> (Extension, u64) {
    let k = params.k;
    let sub = |a: u8, b: u8| params.scoring.substitution(a, b);
    let seed: i32 = (0..k).map(|t| sub(q[qi + t], s[sj + t])).sum();
    let mut steps = 0u64;
    let mut run_one_way = |pairs: &mut dyn Iterator<Item = (u8, u8)>| {
        let (mut run, mut best, mut best_len) = (0i32, 0i32, 0usize);
        for (t, (a, b)) in pairs.enumerate() {
            steps += 1;
            run += sub(a, b);
            if run > best {
                best = run;
                best_len = t + 1;
            }
            if best - run > params.xdrop {
                break;
            }
        }
        (best, best_len)
    };
    let (right, right_len) =
        run_one_way(&mut q[qi + k..].iter().copied().zip(s[sj + k..].iter().copied()));
    let (left, left_len) =
        run_one_way(&mut q[..qi].iter().rev().copied().zip(s[..sj].iter().rev().copied()));
    (
        Extension {
            score: seed + left + right,
            q_lo: qi - left_len,
            s_lo: sj - left_len,
            len: left_len + k + right_len,
        },
        steps,
    )
}

/// Search one partition, building its index on the fly.
pub fn search_partition(
    query: &Sequence,
    db: &Database,
    part: &Partition,
    params: &SearchParams,
) -> Result<Vec<Hit>, SearchError> {
    Ok(PartitionIndex::build(db, part, params.k)?.search(query, params)?.0)
}

/// Merge ranked lists and keep the best `topk`.
fn merge_topk(lists: impl IntoIterator<Item = Vec<Hit>>, topk: usize) -> Vec<Hit> {
    let mut all: Vec<Hit> = lists.into_iter().flatten().collect();
    all.sort();
    all.dedup();
    all.truncate(topk);
    all
}

#[derive(Debug, Clone)]
struct QueryBatch(Vec<Sequence>);

impl WireSize for QueryBatch {
    fn wire_bytes(&self) -> usize {
        self.0.iter().map(|s| s.id().len() + s.len() + 8).sum()
    }
}

#[derive(Debug)]
struct HitBatch(Result<Vec<Vec<Hit>>, SearchError>);

impl WireSize for HitBatch {
    fn wire_bytes(&self) -> usize {
        match &self.0 {
            Ok(lists) => lists
                .iter()
                .flatten()
                .map(|h| h.query_id.len() + h.subject_id.len() + 5 * 8)
                .sum::<usize>()
                + 8 * lists.len(),
            Err(_) => 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchRun {
    /// Ranked top-k hits, one list per query in input order.
    pub results: Vec<Vec<Hit>>,
    pub timing: TimingReport,
    pub partitions: Vec<Partition>,
}

fn search_batch(
    index: &PartitionIndex<'_>,
    queries: &[Sequence],
    params: &SearchParams,
    topk: usize,
) -> Result<(Vec<Vec<Hit>>, u64), SearchError> {
    let mut units = 0;
    let mut out = Vec::with_capacity(queries.len());
    for q in queries {
        let (mut hits, u) = index.search(q, params)?;
        hits.truncate(topk);
        units += u;
        out.push(hits);
    }
    Ok((out, units))
}

/// Broadcast every query to every partition and merge the per-partition
/// top-k lists. Communication covers both query distribution and result
/// collection.
pub fn scatter_gather(
    queries: &[Sequence],
    db: &Database,
    params: &SearchParams,
    topk: usize,
    cfg: &ClusterConfig,
) -> Result<SearchRun, SearchError> {
    cfg.validate()?;
    let alphabet = db.alphabet().ok_or(SearchError::EmptyDatabase)?;
    params.validate(alphabet)?;
    let partitions = segment(db, cfg.workers)?;
    let indexes: Vec<PartitionIndex<'_>> = partitions
        .iter()
        .map(|p| PartitionIndex::build(db, p, params.k))
        .collect::<Result<_, _>>()?;
    let (lists, timing) = match cfg.mode {
        ExecMode::Simulated => simulate(queries, &indexes, params, topk, cfg)?,
        ExecMode::Threaded => threaded(queries, &indexes, params, topk)?,
    };
    let results = (0..queries.len())
        .map(|qi| merge_topk(lists.iter().map(|l| l[qi].clone()), topk))
        .collect();
    Ok(SearchRun { results, timing, partitions })
}

type Gathered = (Vec<Vec<Vec<Hit>>>, TimingReport);

fn simulate(
    queries: &[Sequence],
    indexes: &[PartitionIndex<'_>],
    params: &SearchParams,
    topk: usize,
    cfg: &ClusterConfig,
) -> Result<Gathered, SearchError> {
    let w = indexes.len();
    let mut coord = SimTime::ZERO;
    let mut arrivals = Vec::with_capacity(w);
    for k in 0..w {
        let mut ch = cfg.sim_channel(Endpoint::Coordinator, Endpoint::Worker(k))?;
        coord = ch.send(QueryBatch(queries.to_vec()), coord)?;
        arrivals.push(ch.try_recv()?.expect("just sent").1);
    }
    let mut end = coord;
    let mut lists = Vec::with_capacity(w);
    let mut per_worker = Vec::with_capacity(w);
    for (k, index) in indexes.iter().enumerate() {
        let (hits, units) = search_batch(index, queries, params, topk)?;
        let compute = cfg.compute.cost(units);
        let mut clock = arrivals[k].compute(compute);
        let mut ch = cfg.sim_channel(Endpoint::Worker(k), Endpoint::Coordinator)?;
        clock = ch.send(HitBatch(Ok(hits)), clock)?;
        let (HitBatch(hits), arrival) = ch.try_recv()?.expect("just sent");
        end = end.latest(arrival);
        lists.push(hits?);
        per_worker.push(WorkerTiming {
            worker: k,
            compute,
            comm: clock.with_comm - clock.without_comm,
            finish: clock.with_comm,
        });
    }
    Ok((lists, TimingReport::from_sim(end, per_worker)))
}

fn threaded(
    queries: &[Sequence],
    indexes: &[PartitionIndex<'_>],
    params: &SearchParams,
    topk: usize,
) -> Result<Gathered, SearchError> {
    let epoch = Instant::now();
    thread::scope(|scope| -> Result<Gathered, SearchError> {
        let mut to_workers = Vec::new();
        let mut from_workers = Vec::new();
        let mut handles = Vec::new();
        for (k, index) in indexes.iter().enumerate() {
            let (q_tx, mut q_rx) = harness::channel::<QueryBatch>(Endpoint::Coordinator, Endpoint::Worker(k));
            let (mut h_tx, h_rx) = harness::channel::<HitBatch>(Endpoint::Worker(k), Endpoint::Coordinator);
            to_workers.push(q_tx);
            from_workers.push(h_rx);
            handles.push(scope.spawn(move || -> Result<WorkerTiming, HarnessError> {
                let QueryBatch(batch) = q_rx.recv()?;
                let t0 = Instant::now();
                let result = search_batch(index, &batch, params, topk).map(|(hits, _)| hits);
                let compute = t0.elapsed();
                h_tx.send(HitBatch(result))?;
                Ok(WorkerTiming {
                    worker: k,
                    compute,
                    comm: q_rx.comm_time() + h_tx.comm_time(),
                    finish: epoch.elapsed(),
                })
            }));
        }
        for tx in &mut to_workers {
            tx.send(QueryBatch(queries.to_vec()))?;
        }
        let mut lists = Vec::new();
        for rx in &mut from_workers {
            lists.push(rx.recv()?.0);
        }
        let mut per_worker = Vec::new();
        for h in handles {
            per_worker.push(h.join().expect("search worker panicked")?);
        }
        let total = epoch.elapsed();
        let lists = lists.into_iter().collect::<Result<Vec<_>, _>>()?;
        Ok((lists, TimingReport::from_measured(total, per_worker)))
    })
}

/// Tab-separated, one hit per line:
/// `query_id subject_id score q_start q_end s_start s_end`.
pub fn write_hits<W: Write>(mut w: W, hits: &[Hit]) -> io::Result<()> {
    for h in hits {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            h.query_id, h.subject_id, h.score, h.q_start, h.q_end, h.s_start, h.s_end
        )?;
    }
    Ok(())
}

pub fn parse_hits(text: &str) -> Result<Vec<Hit>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || format!("line {}: malformed hit", i + 1);
            if f.len() != 7 {
                return Err(bad());
            }
            let n = |s: &str| s.parse::<usize>().map_err(|_| bad());
            Ok(Hit {
                query_id: f[0].to_string(),
                subject_id: f[1].to_string(),
                score: f[2].parse().map_err(|_| bad())?,
                q_start: n(f[3])?,
                q_end: n(f[4])?,
                s_start: n(f[5])?,
                s_end: n(f[6])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::time::Duration;

    fn dna(id: &str, s: &str) -> Sequence {
        Sequence::dna(id, s).unwrap()
    }

    fn db_of(lens: &[usize]) -> Database {
        Database::new(
            lens.iter()
                .enumerate()
                .map(|(i, &n)| dna(&format!("s{i}"), &"A".repeat(n)))
                .collect(),
        )
        .unwrap()
    }

    fn params(k: usize, min_score: i32) -> SearchParams {
        SearchParams { k, min_score, ..SearchParams::for_alphabet(Alphabet::DNA) }
    }

    fn whole(db: &Database) -> Partition {
        segment(db, 1).unwrap().remove(0)
    }

    /// Best ungapped segment pair over every pair of equal-length substrings.
    fn best_segment_pair(q: &[u8], s: &[u8], w: &Scoring<i32>) -> (i32, usize, usize, usize) {
        let mut best = (i32::MIN, 0, 0, 0);
        for i in 0..q.len() {
            for j in 0..s.len() {
                for len in 1..=(q.len() - i).min(s.len() - j) {
                    let sc: i32 = (0..len).map(|t| w.substitution(q[i + t], s[j + t])).sum();
                    if sc > best.0 {
                        best = (sc, i + 1, j + 1, len);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn segment_examples() {
        let p = segment(&db_of(&[7]), 1).unwrap();
        assert_eq!(p, vec![Partition { worker: 0, members: vec![0], residue_count: 7 }]);

        let p = segment(&db_of(&[10, 10, 10, 10]), 2).unwrap();
        assert_eq!(p.iter().map(|p| p.residue_count).collect::<Vec<_>>(), vec![20, 20]);

        let db = db_of(&[9, 5, 4, 2]);
        let p = segment(&db, 2).unwrap();
        assert_eq!(p[0].ids(&db), vec!["s0", "s3"]);
        assert_eq!(p[0].residue_count, 11);
        assert_eq!(p[1].ids(&db), vec!["s1", "s2"]);
        assert_eq!(p[1].residue_count, 9);

        assert_eq!(segment(&Database::new(vec![]).unwrap(), 2), Err(SearchError::EmptyDatabase));
    }

    #[test]
    fn three_way_balance_can_exceed_ratio_two() {
        // no sequence exceeds half the total, yet one partition gets only
        // the short one
        let p = segment(&db_of(&[5, 5, 1]), 3).unwrap();
        assert_eq!(p.iter().map(|p| p.residue_count).collect::<Vec<_>>(), vec![5, 5, 1]);
    }

    #[test]
    fn database_rejects_duplicates_and_mixed_alphabets() {
        let e = Database::new(vec![dna("a", "ACGT"), dna("a", "GG")]).unwrap_err();
        assert_eq!(e, SearchError::DuplicateId("a".into()));
        let p = Sequence::protein("p", "MKV").unwrap();
        assert!(matches!(Database::new(vec![dna("a", "ACGT"), p]), Err(SearchError::AlphabetMismatch(..))));
    }

    #[test]
    fn self_match_covers_full_length() {
        let db = Database::new(vec![dna("x", "ACGTTGCAAGCTTAGC"), dna("y", "GGGGGGGGGGGG")]).unwrap();
        let q = dna("q", "ACGTTGCAAGCTTAGC");
        let hits = search_partition(&q, &db, &whole(&db), &params(5, 5)).unwrap();
        assert_eq!(
            hits[0],
            Hit {
                query_id: "q".into(),
                subject_id: "x".into(),
                score: 16,
                q_start: 1,
                q_end: 16,
                s_start: 1,
                s_end: 16
            }
        );
    }

    #[test]
    fn no_shared_kmer_no_hits() {
        let db = Database::new(vec![dna("x", "AAAAAAAAAA")]).unwrap();
        let hits = search_partition(&dna("q", "CCCCCC"), &db, &whole(&db), &params(4, 1)).unwrap();
        assert!(hits.is_empty());
    }

    #[test]
    fn small_example_top_hit() {
        let db = Database::new(vec![dna("s", "TTACGTACGTTT")]).unwrap();
        let q = dna("q", "ACGTACGT");
        let p = params(4, 5);
        let hits = search_partition(&q, &db, &whole(&db), &p).unwrap();
        let (score, qs, ss, len) = best_segment_pair(q.residues(), db.sequences()[0].residues(), &p.scoring);
        assert_eq!((score, qs, ss, len), (8, 1, 3, 8));
        assert_eq!((hits[0].score, hits[0].q_start, hits[0].q_end, hits[0].s_start, hits[0].s_end), (8, 1, 8, 3, 10));
        for h in &hits {
            assert!(h.score >= 5);
            assert_eq!(rescore_hit(h, &q, &db.sequences()[0], &p.scoring), Some(h.score));
        }
    }

    #[test]
    fn bad_params() {
        let db = Database::new(vec![dna("s", "ACGTACGT")]).unwrap();
        let q = dna("q", "ACG");
        assert!(matches!(search_partition(&q, &db, &whole(&db), &params(4, 1)), Err(SearchError::BadParams(_))));
        assert!(matches!(search_partition(&q, &db, &whole(&db), &params(0, 1)), Err(SearchError::BadParams(_))));
    }

    #[test]
    fn wildcard_kmers_are_not_seeds() {
        let db = Database::new(vec![dna("s", "ACGNACG")]).unwrap();
        let hits = search_partition(&dna("q", "ACGNACG"), &db, &whole(&db), &params(4, 1)).unwrap();
        assert!(hits.is_empty());
    }

    #[test]
    fn protein_search() {
        let db = Database::new(vec![
            Sequence::protein("p1", "MKVLAAGHWRST").unwrap(),
            Sequence::protein("p2", "GGGGGGGG").unwrap(),
        ])
        .unwrap();
        let q = Sequence::protein("q", "KVLAAGHW").unwrap();
        let p = SearchParams { min_score: 5, ..SearchParams::for_alphabet(Alphabet::PROTEIN) };
        let hits = search_partition(&q, &db, &whole(&db), &p).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!((hits[0].score, hits[0].s_start, hits[0].s_end), (8, 2, 9));
    }

    #[test]
    fn hit_ranking_is_total() {
        let h = |score, subject: &str, s_start| Hit {
            query_id: "q".into(),
            subject_id: subject.into(),
            score,
            q_start: 1,
            q_end: 5,
            s_start,
            s_end: s_start + 4,
        };
        let mut v = vec![h(5, "b", 1), h(9, "z", 3), h(5, "a", 7), h(5, "a", 2)];
        v.sort();
        assert_eq!(v, vec![h(9, "z", 3), h(5, "a", 2), h(5, "a", 7), h(5, "b", 1)]);
    }

    #[test]
    fn zero_queries() {
        let db = Database::new(vec![dna("s", "ACGTACGTACGT")]).unwrap();
        for cfg in [ClusterConfig::simulated(2).unwrap(), ClusterConfig::threaded(2).unwrap()] {
            let run = scatter_gather(&[], &db, &params(4, 4), 5, &cfg).unwrap();
            assert!(run.results.is_empty());
            assert!(run.timing.per_worker.iter().all(|w| cfg.mode == ExecMode::Threaded || w.compute == Duration::ZERO));
        }
    }

    #[test]
    fn hit_text_round_trip() {
        let db = Database::new(vec![dna("s", "TTACGTACGTTT")]).unwrap();
        let hits = search_partition(&dna("q", "ACGTACGT"), &db, &whole(&db), &params(4, 5)).unwrap();
        let mut buf = Vec::new();
        write_hits(&mut buf, &hits).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("q\ts\t8\t1\t8\t3\t10\n"));
        assert_eq!(parse_hits(&text).unwrap(), hits);
    }

    fn random_db(seed: u64, n: usize, len: std::ops::Range<usize>) -> Database {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let seqs = (0..n)
            .map(|i| {
                let l = rng.gen_range(len.clone());
                let s: String = (0..l).map(|_| b"ACGT"[rng.gen_range(0..4)] as char).collect();
                dna(&format!("seq{i}"), &s)
            })
            .collect();
        Database::new(seqs).unwrap()
    }

    #[test]
    fn sim_timing_identity_and_reproducibility() {
        let db = random_db(3, 12, 50..300);
        let queries: Vec<Sequence> = db.sequences()[..3].to_vec();
        let cfg = ClusterConfig::simulated(3).unwrap();
        let a = scatter_gather(&queries, &db, &params(8, 10), 3, &cfg).unwrap();
        let b = scatter_gather(&queries, &db, &params(8, 10), 3, &cfg).unwrap();
        assert_eq!(a.timing, b.timing);
        assert_eq!(a.timing.without_comm() + a.timing.comm, a.timing.total);
        assert!(a.timing.comm > Duration::ZERO);
        for (q, hits) in queries.iter().zip(&a.results) {
            assert_eq!(hits[0].subject_id, q.id());
            assert_eq!(hits[0].score, q.len() as i32);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn merge_invariance(seed in any::<u64>(), workers in 2usize..6, threaded in any::<bool>()) {
            let db = random_db(seed, 15, 20..200);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 1);
            let queries: Vec<Sequence> = (0..4)
                .map(|i| {
                    let src = &db.sequences()[rng.gen_range(0..db.len())];
                    let lo = rng.gen_range(0..src.len() - 15);
                    let hi = rng.gen_range(lo + 15..=src.len());
                    dna(&format!("q{i}"), &src.as_str()[lo..hi])
                })
                .collect();
            let p = params(6, 8);
            let one = scatter_gather(&queries, &db, &p, 4, &ClusterConfig::simulated(1).unwrap()).unwrap();
            let mode = if threaded { ExecMode::Threaded } else { ExecMode::Simulated };
            let many = scatter_gather(&queries, &db, &p, 4, &ClusterConfig::new(workers, mode).unwrap()).unwrap();
            prop_assert_eq!(&one.results, &many.results);
            for (q, hits) in queries.iter().zip(&one.results) {
                for h in hits {
                    let subject = db.sequences().iter().find(|s| s.id() == h.subject_id).unwrap();
                    prop_assert_eq!(rescore_hit(h, q, subject, &p.scoring), Some(h.score));
                }
                let mut sorted = hits.clone();
                sorted.sort();
                prop_assert_eq!(&sorted, hits);
            }
        }

        #[test]
        fn segment_covers_disjointly(lens in prop::collection::vec(1usize..50, 1..30), workers in 1usize..8) {
            let db = db_of(&lens);
            let parts = segment(&db, workers).unwrap();
            let mut all: Vec<usize> = parts.iter().flat_map(|p| p.members.clone()).collect();
            all.sort();
            prop_assert_eq!(all, (0..lens.len()).collect::<Vec<_>>());
            for p in &parts {
                prop_assert_eq!(p.residue_count, p.members.iter().map(|&i| lens[i]).sum::<usize>());
            }
            let total: usize = lens.iter().sum();
            if workers == 2 && lens.iter().all(|&l| 2 * l <= total) {
                let max = parts.iter().map(|p| p.residue_count).max().unwrap();
                let min = parts.iter().map(|p| p.residue_count).min().unwrap();
                prop_assert!(max <= 2 * min);
            }
        }
    }
}
