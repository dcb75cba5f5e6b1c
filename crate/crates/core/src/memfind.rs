//! Maximal exact matches between two sequences via a suffix array over
//! their concatenation, plus a brute-force diagonal scanner with the same
//! output.

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::seqio::{reverse_complement, Alphabet, AlphabetKind, SeqError, Sequence};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MemError {
    #[error("sequences use different alphabets ({0} vs {1})")]
    AlphabetMismatch(Alphabet, Alphabet),
    #[error("cannot index an empty sequence")]
    EmptySequence,
    #[error("reverse-strand matching needs DNA input")]
    WrongAlphabet,
    #[error("minimum match length must be at least 1")]
    InvalidMinLength,
    #[error("bad MEM line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl From<SeqError> for MemError {
    fn from(_: SeqError) -> Self {
        MemError::WrongAlphabet
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strand {
    Forward,
    Reverse,
}

impl Strand {
    pub fn code(self) -> char {
        match self {
            Strand::Forward => 'F',
            Strand::Reverse => 'R',
        }
    }
}

impl fmt::Display for Strand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// 1-based coordinates: `x` in the first sequence, `y` in the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub x: usize,
    pub y: usize,
}

/// An exact match seen as a diagonal segment from `beg` to `end` (inclusive).
///
/// For reverse-strand fragments `y` counts along the reverse complement of
/// the second sequence; [`Fragment::plot_endpoints`] maps back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fragment {
    pub beg: Point,
    pub end: Point,
    pub weight: usize,
    pub strand: Strand,
}

impl Fragment {
    /// Fragment of `len` symbols starting at 1-based `(x, y)`.
    pub fn new(x: usize, y: usize, len: usize, strand: Strand) -> Fragment {
        debug_assert!(len >= 1);
        Fragment {
            beg: Point { x, y },
            end: Point { x: x + len - 1, y: y + len - 1 },
            weight: len,
            strand,
        }
    }

    /// Endpoints in the original orientation of the second sequence:
    /// reverse-strand `y` becomes `y_len - y + 1`, giving a descending segment.
    pub fn plot_endpoints(&self, y_len: usize) -> (Point, Point) {
        match self.strand {
            Strand::Forward => (self.beg, self.end),
            Strand::Reverse => (
                Point { x: self.beg.x, y: y_len + 1 - self.beg.y },
                Point { x: self.end.x, y: y_len + 1 - self.end.y },
            ),
        }
    }
}

const TERMINAL: u32 = 0;
const SEPARATOR: u32 = 1;
const SYMBOL_BASE: u32 = 2;
const WILDCARD_BASE: u32 = 256;

/// Suffix array and LCP array over `s1 # s2 $`.
///
/// Every wildcard is encoded as a distinct symbol so no common prefix runs
/// through it; both sentinels sort before every residue.
#[derive(Debug, Clone)]
pub struct MatchIndex {
    text: Vec<u32>,
    len1: usize,
    len2: usize,
    sa: Vec<u32>,
    lcp: Vec<u32>,
}

pub fn build_index(s1: &Sequence, s2: &Sequence) -> Result<MatchIndex, MemError> {
    if s1.alphabet() != s2.alphabet() {
        return Err(MemError::AlphabetMismatch(s1.alphabet(), s2.alphabet()));
    }
    if s1.is_empty() || s2.is_empty() {
        return Err(MemError::EmptySequence);
    }
    Ok(MatchIndex::from_bytes(s1.residues(), s2.residues(), s1.alphabet()))
}

impl MatchIndex {
    fn from_bytes(s1: &[u8], s2: &[u8], alphabet: Alphabet) -> MatchIndex {
        let mut text = Vec::with_capacity(s1.len() + s2.len() + 2);
        let push = |c: u8, text: &mut Vec<u32>| {
            let code = if alphabet.is_wildcard(c) {
                WILDCARD_BASE + text.len() as u32
            } else {
                SYMBOL_BASE + c as u32
            };
            text.push(code);
        };
        for &c in s1 {
            push(c, &mut text);
        }
        text.push(SEPARATOR);
        for &c in s2 {
            push(c, &mut text);
        }
        text.push(TERMINAL);
        let sa = suffix_array(&text);
        let lcp = lcp_array(&text, &sa);
        MatchIndex { text, len1: s1.len(), len2: s2.len(), sa, lcp }
    }

    pub fn text(&self) -> &[u32] {
        &self.text
    }

    pub fn suffix_array(&self) -> &[u32] {
        &self.sa
    }

    /// `lcp[k]` is the common prefix length of the suffixes ranked `k - 1`
    /// and `k`; `lcp[0] = 0`.
    pub fn lcp(&self) -> &[u32] {
        &self.lcp
    }

    /// Which sequence a text position falls in, with its 0-based offset.
    pub fn owner(&self, pos: usize) -> Option<(usize, usize)> {
        if pos < self.len1 {
            Some((0, pos))
        } else if pos > self.len1 && pos < self.len1 + 1 + self.len2 {
            Some((1, pos - self.len1 - 1))
        } else {
            None
        }
    }

    /// Class of the symbol left of `pos`; `None` when nothing can match it
    /// (sequence start or wildcard).
    fn left_class(&self, pos: usize, offset: usize) -> Option<u32> {
        if offset == 0 {
            return None;
        }
        let c = self.text[pos - 1];
        (c < WILDCARD_BASE).then_some(c)
    }
}

/// Prefix doubling: sort by the first `k` symbols, then by `2k`, until all
/// ranks are distinct.
fn suffix_array(text: &[u32]) -> Vec<u32> {
    let n = text.len();
    let mut sa: Vec<usize> = (0..n).collect();
    let mut rank: Vec<usize> = {
        let mut symbols: Vec<u32> = text.to_vec();
        symbols.sort_unstable();
        symbols.dedup();
        text.iter().map(|c| symbols.binary_search(c).expect("present")).collect()
    };
    let mut next = vec![0usize; n];
    let mut k = 1;
    loop {
        let key = |i: usize| (rank[i], if i + k < n { rank[i + k] + 1 } else { 0 });
        sa.sort_unstable_by_key(|&i| key(i));
        next[sa[0]] = 0;
        for t in 1..n {
            next[sa[t]] = next[sa[t - 1]] + usize::from(key(sa[t - 1]) < key(sa[t]));
        }
        std::mem::swap(&mut rank, &mut next);
        if rank[sa[n - 1]] == n - 1 {
            break;
        }
        k *= 2;
    }
    sa.into_iter().map(|i| i as u32).collect()
}

/// Kasai's linear-time LCP construction.
fn lcp_array(text: &[u32], sa: &[u32]) -> Vec<u32> {
    let n = text.len();
    let mut rank = vec![0usize; n];
    for (r, &p) in sa.iter().enumerate() {
        rank[p as usize] = r;
    }
    let mut lcp = vec![0u32; n];
    let mut h = 0usize;
    for i in 0..n {
        if rank[i] == 0 {
            h = 0;
            continue;
        }
        let j = sa[rank[i] - 1] as usize;
        while i + h < n && j + h < n && text[i + h] == text[j + h] {
            h += 1;
        }
        lcp[rank[i]] = h as u32;
        h = h.saturating_sub(1);
    }
    lcp
}

/// Suffix start positions of one lcp-interval, bucketed by the symbol to
/// their left and by the sequence they come from.
#[derive(Default)]
struct Buckets {
    groups: Vec<(Option<u32>, Vec<u32>, Vec<u32>)>,
}

impl Buckets {
    fn leaf(idx: &MatchIndex, pos: usize) -> Buckets {
        let mut b = Buckets::default();
        if let Some((seq, offset)) = idx.owner(pos) {
            if idx.text[pos] < WILDCARD_BASE {
                let class = idx.left_class(pos, offset);
                let (s1, s2) = if seq == 0 {
                    (vec![pos as u32], vec![])
                } else {
                    (vec![], vec![pos as u32])
                };
                b.groups.push((class, s1, s2));
            }
        }
        b
    }

    /// Report every left-maximal pair with one side in `self` and the other
    /// in `child`.
    fn cross(&self, child: &Buckets, len: usize, idx: &MatchIndex, out: &mut Vec<Fragment>) {
        let offset2 = idx.len1 + 1;
        for (ka, a1, a2) in &self.groups {
            for (kb, b1, b2) in &child.groups {
                if ka.is_some() && ka == kb {
                    continue;
                }
                for (xs, ys) in [(a1, b2), (b1, a2)] {
                    for &p1 in xs {
                        for &p2 in ys {
                            out.push(Fragment::new(
                                p1 as usize + 1,
                                p2 as usize - offset2 + 1,
                                len,
                                Strand::Forward,
                            ));
                        }
                    }
                }
            }
        }
    }

    fn absorb(&mut self, child: Buckets) {
        for (kb, b1, b2) in child.groups {
            match self.groups.iter_mut().find(|(ka, _, _)| *ka == kb) {
                Some((_, a1, a2)) => {
                    a1.extend(b1);
                    a2.extend(b2);
                }
                None => self.groups.push((kb, b1, b2)),
            }
        }
    }
}

/// All maximal exact matches of length at least `min_len`, sorted by
/// `(beg.x, beg.y)`.
///
/// Walks the lcp-interval tree bottom-up. Two suffixes sitting in different
/// children of an interval with lcp `L` share exactly `L` symbols, so the
/// match is right-maximal; it is left-maximal when the symbols before the
/// two suffixes differ.
pub fn enumerate_mems(idx: &MatchIndex, min_len: usize) -> Result<Vec<Fragment>, MemError> {
    if min_len < 1 {
        return Err(MemError::InvalidMinLength);
    }
    let n = idx.sa.len();
    let mut out = Vec::new();
    let mut stack: Vec<(usize, Buckets)> = vec![(0, Buckets::default())];
    for i in 0..n {
        let next_lcp = if i + 1 < n { idx.lcp[i + 1] as usize } else { 0 };
        let mut child = Buckets::leaf(idx, idx.sa[i] as usize);
        loop {
            let (top_lcp, top) = stack.last_mut().expect("root stays on the stack");
            let top_lcp = *top_lcp;
            if top_lcp >= next_lcp {
                if top_lcp >= min_len {
                    top.cross(&child, top_lcp, idx, &mut out);
                    top.absorb(child);
                }
                if top_lcp == next_lcp {
                    break;
                }
                child = stack.pop().expect("non-root").1;
            } else {
                stack.push((next_lcp, child));
                break;
            }
        }
    }
    out.sort_unstable_by_key(|f| (f.beg, f.end));
    Ok(out)
}

/// Reference scanner: walk every diagonal of the `|s1| x |s2|` grid and cut
/// maximal runs of equal, non-wildcard symbols.
pub fn brute_force_mems(s1: &Sequence, s2: &Sequence, min_len: usize) -> Vec<Fragment> {
    let (a, b) = (s1.residues(), s2.residues());
    let alphabet = s1.alphabet();
    let mut out = Vec::new();
    for start_x in 0..a.len() {
        scan_diagonal(a, b, start_x, 0, min_len, alphabet, &mut out);
    }
    for start_y in 1..b.len() {
        scan_diagonal(a, b, 0, start_y, min_len, alphabet, &mut out);
    }
    out.sort_unstable_by_key(|f| (f.beg, f.end));
    out
}

fn scan_diagonal(
    a: &[u8],
    b: &[u8],
    mut x: usize,
    mut y: usize,
    min_len: usize,
    alphabet: Alphabet,
    out: &mut Vec<Fragment>,
) {
    let mut run = 0;
    while x < a.len() && y < b.len() {
        if a[x] == b[y] && !alphabet.is_wildcard(a[x]) {
            run += 1;
        } else {
            if run >= min_len {
                out.push(Fragment::new(x - run + 1, y - run + 1, run, Strand::Forward));
            }
            run = 0;
        }
        x += 1;
        y += 1;
    }
    if run >= min_len {
        out.push(Fragment::new(x - run + 1, y - run + 1, run, Strand::Forward));
    }
}

/// Matches against both strands of the second sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StrandMems {
    pub forward: Vec<Fragment>,
    /// `y` in reverse-complement coordinates of the second sequence.
    pub reverse: Vec<Fragment>,
}

pub fn enumerate_mems_both_strands(
    s1: &Sequence,
    s2: &Sequence,
    min_len: usize,
) -> Result<StrandMems, MemError> {
    if s1.alphabet().kind != AlphabetKind::Dna || s2.alphabet().kind != AlphabetKind::Dna {
        return Err(MemError::WrongAlphabet);
    }
    let forward = enumerate_mems(&build_index(s1, s2)?, min_len)?;
    let rc = reverse_complement(s2)?;
    let mut reverse = enumerate_mems(&build_index(s1, &rc)?, min_len)?;
    for f in &mut reverse {
        f.strand = Strand::Reverse;
    }
    Ok(StrandMems { forward, reverse })
}

/// Tab-separated: `s1_start s1_end s2_start s2_end length strand`.
pub fn write_mems<W: Write>(mut w: W, frags: &[Fragment]) -> io::Result<()> {
    for f in frags {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            f.beg.x, f.end.x, f.beg.y, f.end.y, f.weight, f.strand
        )?;
    }
    Ok(())
}

pub fn parse_mems(text: &str) -> Result<Vec<Fragment>, MemError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') || line.starts_with("chain") {
            continue;
        }
        let err = |reason: &str| MemError::Parse { line: line_no, reason: reason.to_string() };
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(err("expected 6 columns"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| err("not a number"));
        let (x0, x1, y0, y1, len) = (num(cols[0])?, num(cols[1])?, num(cols[2])?, num(cols[3])?, num(cols[4])?);
        let strand = match cols[5] {
            "F" => Strand::Forward,
            "R" => Strand::Reverse,
            _ => return Err(err("strand must be F or R")),
        };
        if len == 0 || x0 == 0 || y0 == 0 || x1 + 1 != x0 + len || y1 + 1 != y0 + len {
            return Err(err("coordinates disagree with length"));
        }
        out.push(Fragment::new(x0, y0, len, strand));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dna(s: &str) -> Sequence {
        Sequence::dna("x", s).unwrap()
    }

    fn mems(a: &str, b: &str, l: usize) -> Vec<Fragment> {
        enumerate_mems(&build_index(&dna(a), &dna(b)).unwrap(), l).unwrap()
    }

    fn naive_sa(text: &[u32]) -> Vec<u32> {
        let mut sa: Vec<u32> = (0..text.len() as u32).collect();
        sa.sort_by(|&a, &b| text[a as usize..].cmp(&text[b as usize..]));
        sa
    }

    #[test]
    fn index_matches_naive_sort() {
        let idx = build_index(&dna("A"), &dna("A")).unwrap();
        assert_eq!(idx.suffix_array(), naive_sa(idx.text()).as_slice());
        assert_eq!(idx.suffix_array(), &[3, 1, 2, 0]);
    }

    #[test]
    fn protein_lcp() {
        let p = Sequence::protein("p", "AC").unwrap();
        let idx = build_index(&p, &p).unwrap();
        let sa = idx.suffix_array();
        let r0 = sa.iter().position(|&p| p == 0).unwrap();
        let r3 = sa.iter().position(|&p| p == 3).unwrap();
        assert_eq!(r0.abs_diff(r3), 1);
        assert_eq!(idx.lcp()[r0.max(r3)], 2);
    }

    #[test]
    fn index_errors() {
        assert_eq!(build_index(&dna(""), &dna("AC")).unwrap_err(), MemError::EmptySequence);
        let p = Sequence::protein("p", "MK").unwrap();
        assert!(matches!(build_index(&dna("AC"), &p), Err(MemError::AlphabetMismatch(..))));
        let idx = build_index(&dna("AC"), &dna("AC")).unwrap();
        assert_eq!(enumerate_mems(&idx, 0), Err(MemError::InvalidMinLength));
    }

    #[test]
    fn mem_examples() {
        assert_eq!(mems("ACGT", "ACGT", 4), vec![Fragment::new(1, 1, 4, Strand::Forward)]);
        assert_eq!(brute_force_mems(&dna("ACTGA"), &dna("CTG"), 3), vec![Fragment::new(2, 1, 3, Strand::Forward)]);
        assert_eq!(mems("ACTGA", "CTG", 3), vec![Fragment::new(2, 1, 3, Strand::Forward)]);
        let expect = vec![
            Fragment::new(1, 1, 3, Strand::Forward),
            Fragment::new(1, 2, 2, Strand::Forward),
            Fragment::new(2, 1, 2, Strand::Forward),
        ];
        assert_eq!(brute_force_mems(&dna("AAA"), &dna("AAA"), 2), expect);
        assert_eq!(mems("AAA", "AAA", 2), expect);
    }

    #[test]
    fn wildcards_break_matches() {
        assert_eq!(
            mems("ACNGT", "ACNGT", 2),
            vec![Fragment::new(1, 1, 2, Strand::Forward), Fragment::new(4, 4, 2, Strand::Forward)]
        );
        assert!(mems("NNNN", "NNNN", 1).is_empty());
    }

    #[test]
    fn both_strands() {
        let r = enumerate_mems_both_strands(&dna("ACGT"), &dna("ACGT"), 4).unwrap();
        assert_eq!(r.forward.len(), 1);
        assert_eq!(r.reverse, vec![Fragment::new(1, 1, 4, Strand::Reverse)]);

        let r = enumerate_mems_both_strands(&dna("AAAA"), &dna("TTTT"), 3).unwrap();
        assert!(r.forward.is_empty());
        let mut oracle = brute_force_mems(&dna("AAAA"), &dna("AAAA"), 3);
        oracle.iter_mut().for_each(|f| f.strand = Strand::Reverse);
        assert_eq!(r.reverse, oracle);

        let p = Sequence::protein("p", "MK").unwrap();
        assert_eq!(enumerate_mems_both_strands(&p, &p, 1), Err(MemError::WrongAlphabet));
    }

    #[test]
    fn reverse_plot_endpoints_descend() {
        let f = Fragment::new(3, 2, 4, Strand::Reverse);
        let (a, b) = f.plot_endpoints(10);
        assert_eq!((a, b), (Point { x: 3, y: 9 }, Point { x: 6, y: 6 }));
    }

    #[test]
    fn mem_text_round_trip() {
        let frags = mems("ACGTTACGGA", "TTACGGACGT", 3);
        let mut buf = Vec::new();
        write_mems(&mut buf, &frags).unwrap();
        assert_eq!(parse_mems(std::str::from_utf8(&buf).unwrap()).unwrap(), frags);
        assert!(parse_mems("1\t2\t3\t4\t9\tF\n").is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(a in "[ACGTN]{1,80}", b in "[ACGT]{1,80}", l in 1usize..6) {
            prop_assert_eq!(mems(&a, &b, l), brute_force_mems(&dna(&a), &dna(&b), l));
        }

        #[test]
        fn fragments_are_maximal(a in "[AC]{1,60}", b in "[AC]{1,60}", l in 1usize..4) {
            let (x, y) = (a.as_bytes(), b.as_bytes());
            for f in mems(&a, &b, l) {
                let (x0, y0) = (f.beg.x - 1, f.beg.y - 1);
                prop_assert_eq!(&x[x0..f.end.x], &y[y0..f.end.y]);
                prop_assert!(f.weight >= l);
                prop_assert!(x0 == 0 || y0 == 0 || x[x0 - 1] != y[y0 - 1]);
                prop_assert!(f.end.x == x.len() || f.end.y == y.len() || x[f.end.x] != y[f.end.y]);
            }
        }

        #[test]
        fn raising_min_len_filters(a in "[ACGT]{1,100}", b in "[ACGT]{1,100}", l in 1usize..5) {
            let low = mems(&a, &b, l);
            let high = mems(&a, &b, l + 2);
            let filtered: Vec<_> = low.into_iter().filter(|f| f.weight >= l + 2).collect();
            prop_assert_eq!(high, filtered);
        }
    }
}
