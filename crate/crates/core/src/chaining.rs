//! Highest-scoring chain of collinear fragments.
//!
//! [`RangeMax`] is a 2-D dominance-maximum structure (a kd-tree). The chain
//! itself is found with a line sweep that only needs a 1-D maximum keyed by
//! `y`, because the sweep order already enforces the `x` condition.

use std::cmp::Reverse;
use std::io::{self, Write};

use thiserror::Error;

use crate::memfind::{
    build_index, enumerate_mems, enumerate_mems_both_strands, write_mems, Fragment, MemError,
    Point, Strand,
};
use crate::seqio::{AlphabetKind, Sequence};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("fragments come from different strands")]
    StrandMismatch,
    #[error(transparent)]
    Mem(#[from] MemError),
    #[error("bad chain file line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// `f1` can come before `f2` in a chain: strictly left of and below it.
pub fn precedes(f1: &Fragment, f2: &Fragment) -> Result<bool, ChainError> {
    if f1.strand != f2.strand {
        return Err(ChainError::StrandMismatch);
    }
    Ok(f1.end.x < f2.beg.x && f1.end.y < f2.beg.y)
}

#[derive(Debug, Clone)]
struct KdNode<V> {
    point: Point,
    value: V,
    left: Option<usize>,
    right: Option<usize>,
    /// Smallest x and y over the subtree.
    min: Point,
    /// Best (value, point) over the subtree.
    best: (V, Point),
}

/// Higher value wins; on equal values the lexicographically smaller point.
fn beats<V: Ord>(a: &(V, Point), b: &(V, Point)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Points with values; answers "best value strictly dominated by `q`".
#[derive(Debug, Clone, Default)]
pub struct RangeMax<V> {
    nodes: Vec<KdNode<V>>,
}

impl<V: Ord + Copy> RangeMax<V> {
    pub fn new() -> Self {
        RangeMax { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn insert(&mut self, point: Point, value: V) {
        let id = self.nodes.len();
        self.nodes.push(KdNode {
            point,
            value,
            left: None,
            right: None,
            min: point,
            best: (value, point),
        });
        if id == 0 {
            return;
        }
        let mut cur = 0;
        let mut depth = 0;
        loop {
            let node = &mut self.nodes[cur];
            node.min = Point { x: node.min.x.min(point.x), y: node.min.y.min(point.y) };
            if beats(&(value, point), &node.best) {
                node.best = (value, point);
            }
            let go_left = if depth % 2 == 0 { point.x < node.point.x } else { point.y < node.point.y };
            let slot = if go_left { &mut node.left } else { &mut node.right };
            match *slot {
                Some(next) => cur = next,
                None => {
                    *slot = Some(id);
                    return;
                }
            }
            depth += 1;
        }
    }

    /// Best `(value, point)` over points with `x < q.x` and `y < q.y`.
    pub fn query_max(&self, q: Point) -> Option<(V, Point)> {
        let mut best: Option<(V, Point)> = None;
        let mut stack = Vec::new();
        if !self.nodes.is_empty() {
            stack.push(0);
        }
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.min.x >= q.x || node.min.y >= q.y {
                continue;
            }
            if let Some(b) = &best {
                if !beats(&node.best, b) {
                    continue;
                }
            }
            if node.point.x < q.x && node.point.y < q.y {
                let cand = (node.value, node.point);
                if best.as_ref().is_none_or(|b| beats(&cand, b)) {
                    best = Some(cand);
                }
            }
            stack.extend(node.left);
            stack.extend(node.right);
        }
        best
    }
}

/// Prefix maximum over a fixed key range (Fenwick tree).
struct PrefixMax<V> {
    tree: Vec<Option<V>>,
}

impl<V: Ord + Copy> PrefixMax<V> {
    fn new(n: usize) -> Self {
        PrefixMax { tree: vec![None; n + 1] }
    }

    fn update(&mut self, idx: usize, v: V) {
        let mut i = idx + 1;
        while i < self.tree.len() {
            if self.tree[i].is_none_or(|cur| v > cur) {
                self.tree[i] = Some(v);
            }
            i += i & i.wrapping_neg();
        }
    }

    /// Maximum over keys `0..len`.
    fn query(&self, len: usize) -> Option<V> {
        let mut i = len.min(self.tree.len() - 1);
        let mut best = None;
        while i > 0 {
            best = best.max(self.tree[i]);
            i -= i & i.wrapping_neg();
        }
        best
    }
}

/// Collinear fragments and the sum of their weights.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Chain {
    pub fragments: Vec<Fragment>,
    pub score: u64,
}

impl Chain {
    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }
}

/// A maximum-score chain. Among equal-score chains the one whose fragment
/// indices (in `(beg, end)` order) are lexicographically smallest wins, so
/// the result does not depend on input order.
///
/// Computes, right to left, the best chain *starting* at each fragment;
/// then walks forward from the first fragment that reaches the optimum,
/// always stepping to the lowest-index successor that keeps it.
pub fn global_chain(frags: &[Fragment]) -> Result<Chain, ChainError> {
    if let Some(first) = frags.first() {
        if frags.iter().any(|f| f.strand != first.strand) {
            return Err(ChainError::StrandMismatch);
        }
    }
    if frags.is_empty() {
        return Ok(Chain::default());
    }
    let mut sorted = frags.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();

    // successors g of f satisfy beg(g).y > end(f).y; rank beg.y descending
    // so that condition becomes a prefix of the key space
    let mut ys: Vec<usize> = sorted.iter().map(|f| f.beg.y).collect();
    ys.sort_unstable_by(|a, b| b.cmp(a));
    ys.dedup();
    let key_of = |y: usize| ys.binary_search_by(|probe| y.cmp(probe)).expect("present");
    let prefix_above = |y: usize| ys.partition_point(|&v| v > y);

    let mut by_end: Vec<usize> = (0..n).collect();
    by_end.sort_unstable_by_key(|&i| Reverse(sorted[i].end.x));
    let mut by_beg: Vec<usize> = (0..n).collect();
    by_beg.sort_unstable_by_key(|&i| Reverse(sorted[i].beg.x));

    let mut best_from = vec![0u64; n];
    let mut next: Vec<Option<usize>> = vec![None; n];
    let mut active: PrefixMax<(u64, Reverse<usize>)> = PrefixMax::new(ys.len());
    let mut cursor = 0;
    for &f in &by_end {
        let end = sorted[f].end;
        while cursor < n && sorted[by_beg[cursor]].beg.x > end.x {
            let g = by_beg[cursor];
            active.update(key_of(sorted[g].beg.y), (best_from[g], Reverse(g)));
            cursor += 1;
        }
        let tail = active.query(prefix_above(end.y));
        best_from[f] = sorted[f].weight as u64 + tail.map_or(0, |(v, _)| v);
        next[f] = tail.map(|(_, Reverse(g))| g);
    }

    let score = *best_from.iter().max().expect("non-empty");
    let mut cur = best_from.iter().position(|&v| v == score);
    let mut fragments = Vec::new();
    while let Some(f) = cur {
        fragments.push(sorted[f]);
        cur = next[f];
    }
    Ok(Chain { fragments, score })
}

/// Fragments and best chains for both strands of a sequence pair.
#[derive(Debug, Clone, Default)]
pub struct ChainPair {
    pub forward_mems: Vec<Fragment>,
    pub reverse_mems: Vec<Fragment>,
    pub forward: Chain,
    pub reverse: Chain,
}

/// MEMs of length at least `min_len` and the best chain on each strand.
/// Protein pairs have no reverse strand.
pub fn chain_pipeline(s1: &Sequence, s2: &Sequence, min_len: usize) -> Result<ChainPair, ChainError> {
    let dna = s1.alphabet().kind == AlphabetKind::Dna && s2.alphabet().kind == AlphabetKind::Dna;
    let (forward_mems, reverse_mems) = if dna {
        let m = enumerate_mems_both_strands(s1, s2, min_len)?;
        (m.forward, m.reverse)
    } else {
        (enumerate_mems(&build_index(s1, s2)?, min_len)?, Vec::new())
    };
    let (forward, reverse) = std::thread::scope(|scope| {
        let rev = scope.spawn(|| global_chain(&reverse_mems));
        let fwd = global_chain(&forward_mems);
        (fwd, rev.join().expect("chaining thread panicked"))
    });
    Ok(ChainPair {
        forward: forward?,
        reverse: reverse?,
        forward_mems,
        reverse_mems,
    })
}

/// `chain score=<int> strand=<F|R> nfrags=<int>` followed by the fragments
/// in MEM format.
pub fn write_chain<W: Write>(mut w: W, chain: &Chain, strand: Strand) -> io::Result<()> {
    writeln!(w, "chain score={} strand={} nfrags={}", chain.score, strand, chain.fragments.len())?;
    write_mems(w, &chain.fragments)
}

pub fn parse_chains(text: &str) -> Result<Vec<(Strand, Chain)>, ChainError> {
    let mut out: Vec<(Strand, Chain, usize)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let err = |reason: &str| ChainError::Parse { line: i + 1, reason: reason.into() };
        if let Some(rest) = line.strip_prefix("chain ") {
            let mut score = None;
            let mut strand = None;
            let mut nfrags = None;
            for field in rest.split_whitespace() {
                match field.split_once('=') {
                    Some(("score", v)) => score = v.parse::<u64>().ok(),
                    Some(("strand", "F")) => strand = Some(Strand::Forward),
                    Some(("strand", "R")) => strand = Some(Strand::Reverse),
                    Some(("nfrags", v)) => nfrags = v.parse::<usize>().ok(),
                    _ => return Err(err("unknown header field")),
                }
            }
            let (Some(score), Some(strand), Some(nfrags)) = (score, strand, nfrags) else {
                return Err(err("incomplete chain header"));
            };
            out.push((strand, Chain { fragments: Vec::new(), score }, nfrags));
        } else if !line.trim().is_empty() {
            let Some((_, chain, _)) = out.last_mut() else {
                return Err(err("fragment before chain header"));
            };
            let f = crate::memfind::parse_mems(line).map_err(|e| err(&e.to_string()))?;
            chain.fragments.extend(f);
        }
    }
    out.into_iter()
        .map(|(strand, chain, n)| {
            if chain.fragments.len() == n {
                Ok((strand, chain))
            } else {
                Err(ChainError::Parse { line: 0, reason: "fragment count differs from nfrags".into() })
            }
        })
        .collect()
}
