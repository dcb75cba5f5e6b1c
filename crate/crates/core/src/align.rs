//! Serial Needleman-Wunsch global alignment.
//!
//! Scores are signed and added directly: a match adds `alpha`, a mismatch
//! adds `beta` and each gap symbol adds `delta`, so the first row and column
//! of the matrix are `j * delta` and `i * delta`. The score type is generic
//! over the signed primitive integers.

use std::fmt::{self, Debug, Display};

use num_traits::{PrimInt, Signed};
use thiserror::Error;

use crate::seqio::Sequence;

/// Signed integer usable as an alignment score.
pub trait Score: PrimInt + Signed + Debug + Display + Send + Sync + 'static {}

impl<T> Score for T where T: PrimInt + Signed + Debug + Display + Send + Sync + 'static {}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlignError {
    #[error("sequences use different alphabets ({0} vs {1})")]
    AlphabetMismatch(String, String),
    #[error("invalid scoring scheme: {0}")]
    InvalidScheme(&'static str),
    #[error("alignment of {n}x{m} can overflow the score type")]
    ScoreOverflow { n: usize, m: usize },
    #[error("invalid alignment: {0}")]
    InvalidAlignment(&'static str),
}

/// Match / mismatch / gap scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scoring<T> {
    pub alpha: T,
    pub beta: T,
    pub delta: T,
}

impl<T: Score> Scoring<T> {
    /// Requires `alpha > 0`, `beta <= 0` and `delta < 0`.
    pub fn new(alpha: T, beta: T, delta: T) -> Result<Self, AlignError> {
        if alpha <= T::zero() {
            return Err(AlignError::InvalidScheme("match score must be positive"));
        }
        if beta > T::zero() {
            return Err(AlignError::InvalidScheme("mismatch score must not be positive"));
        }
        if delta >= T::zero() {
            return Err(AlignError::InvalidScheme("gap score must be negative"));
        }
        Ok(Scoring { alpha, beta, delta })
    }

    #[inline]
    pub fn substitution(&self, a: u8, b: u8) -> T {
        if a == b {
            self.alpha
        } else {
            self.beta
        }
    }

    fn magnitude(&self) -> T {
        self.alpha.max(self.beta.abs()).max(self.delta.abs())
    }

    /// Fails when some cell of an `n x m` matrix could leave the range of `T`.
    pub(crate) fn check_range(&self, n: usize, m: usize) -> Result<(), AlignError> {
        let overflow = AlignError::ScoreOverflow { n, m };
        let steps = n.checked_add(m).ok_or(AlignError::ScoreOverflow { n, m })?;
        let steps = T::from(steps).ok_or(AlignError::ScoreOverflow { n, m })?;
        steps.checked_mul(&self.magnitude()).ok_or(overflow)?;
        Ok(())
    }

    pub(crate) fn boundary(&self, k: usize) -> T {
        T::from(k).expect("checked by check_range") * self.delta
    }
}

impl Default for Scoring<i32> {
    fn default() -> Self {
        Scoring { alpha: 1, beta: -1, delta: -1 }
    }
}

impl Default for Scoring<i64> {
    fn default() -> Self {
        Scoring { alpha: 1, beta: -1, delta: -1 }
    }
}

/// Full `(n+1) x (m+1)` score table, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreMatrix<T> {
    n: usize,
    m: usize,
    cells: Vec<T>,
}

impl<T: Score> ScoreMatrix<T> {
    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.cells[i * (self.m + 1) + j]
    }

    /// The optimal global score `A(n, m)`.
    pub fn score(&self) -> T {
        self.get(self.n, self.m)
    }
}

/// Traceback move out of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Step {
    /// `(i-1, j-1)`: `S[i]` over `R[j]`.
    Diagonal = 0,
    /// `(i-1, j)`: `S[i]` over a gap.
    Up = 1,
    /// `(i, j-1)`: a gap over `R[j]`.
    Left = 2,
}

/// Best of the three recurrence branches; ties prefer diagonal, then up.
#[inline(always)]
pub(crate) fn best_step<T: Score>(diag: T, up: T, left: T) -> (T, Step) {
    if diag >= up && diag >= left {
        (diag, Step::Diagonal)
    } else if up >= left {
        (up, Step::Up)
    } else {
        (left, Step::Left)
    }
}

/// A scored global alignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment<T> {
    pub score: T,
    pub aligned_s: String,
    pub aligned_r: String,
}

impl<T: Score> Alignment<T> {
    /// `|` for a match, `x` for a mismatch and a blank for a gap column.
    pub fn midline(&self) -> String {
        self.aligned_s
            .bytes()
            .zip(self.aligned_r.bytes())
            .map(|(a, b)| match (a, b) {
                (b'-', _) | (_, b'-') => ' ',
                (a, b) if a == b => '|',
                _ => 'x',
            })
            .collect()
    }
}

impl<T: Score> Display for Alignment<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.aligned_s)?;
        writeln!(f, "{}", self.midline())?;
        writeln!(f, "{}", self.aligned_r)?;
        writeln!(f, "score={}", self.score)
    }
}

pub(crate) fn check_alphabets(s: &Sequence, r: &Sequence) -> Result<(), AlignError> {
    if s.alphabet() != r.alphabet() {
        return Err(AlignError::AlphabetMismatch(
            s.alphabet().to_string(),
            r.alphabet().to_string(),
        ));
    }
    Ok(())
}

/// Fill the full score matrix for `s` (rows) against `r` (columns).
pub fn nw_matrix<T: Score>(
    s: &Sequence,
    r: &Sequence,
    scoring: &Scoring<T>,
) -> Result<ScoreMatrix<T>, AlignError> {
    check_alphabets(s, r)?;
    fill_matrix(s.residues(), r.residues(), scoring)
}

pub(crate) fn fill_matrix<T: Score>(
    s: &[u8],
    r: &[u8],
    scoring: &Scoring<T>,
) -> Result<ScoreMatrix<T>, AlignError> {
    let (n, m) = (s.len(), r.len());
    scoring.check_range(n, m)?;
    let width = m + 1;
    let mut cells = vec![T::zero(); (n + 1) * width];
    for j in 0..=m {
        cells[j] = scoring.boundary(j);
    }
    for i in 1..=n {
        cells[i * width] = scoring.boundary(i);
        let si = s[i - 1];
        for j in 1..=m {
            let diag = cells[(i - 1) * width + j - 1] + scoring.substitution(si, r[j - 1]);
            let up = cells[(i - 1) * width + j] + scoring.delta;
            let left = cells[i * width + j - 1] + scoring.delta;
            cells[i * width + j] = best_step(diag, up, left).0;
        }
    }
    Ok(ScoreMatrix { n, m, cells })
}

/// Traceback moves for a full matrix, stored one byte per cell.
pub(crate) struct StepMatrix {
    width: usize,
    steps: Vec<Step>,
}

impl StepMatrix {
    #[inline]
    fn get(&self, i: usize, j: usize) -> Step {
        self.steps[i * self.width + j]
    }
}

/// Fill row by row keeping only two score rows plus the traceback moves.
pub(crate) fn fill_steps<T: Score>(
    s: &[u8],
    r: &[u8],
    scoring: &Scoring<T>,
) -> Result<(T, StepMatrix), AlignError> {
    let (n, m) = (s.len(), r.len());
    scoring.check_range(n, m)?;
    let width = m + 1;
    let mut steps = vec![Step::Diagonal; (n + 1) * width];
    let mut prev: Vec<T> = (0..=m).map(|j| scoring.boundary(j)).collect();
    let mut cur = vec![T::zero(); width];
    for j in 1..=m {
        steps[j] = Step::Left;
    }
    for i in 1..=n {
        cur[0] = scoring.boundary(i);
        steps[i * width] = Step::Up;
        let si = s[i - 1];
        let row = &mut steps[i * width..(i + 1) * width];
        for j in 1..=m {
            let diag = prev[j - 1] + scoring.substitution(si, r[j - 1]);
            let up = prev[j] + scoring.delta;
            let left = cur[j - 1] + scoring.delta;
            let (v, step) = best_step(diag, up, left);
            cur[j] = v;
            row[j] = step;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok((prev[m], StepMatrix { width, steps }))
}

/// Walk recorded moves from `(n, m)` back to the origin.
fn trace(s: &[u8], r: &[u8], steps: &StepMatrix) -> (String, String) {
    let (mut i, mut j) = (s.len(), r.len());
    let mut out_s = Vec::with_capacity(i + j);
    let mut out_r = Vec::with_capacity(i + j);
    while i > 0 || j > 0 {
        let step = if i == 0 {
            Step::Left
        } else if j == 0 {
            Step::Up
        } else {
            steps.get(i, j)
        };
        match step {
            Step::Diagonal => {
                out_s.push(s[i - 1]);
                out_r.push(r[j - 1]);
                i -= 1;
                j -= 1;
            }
            Step::Up => {
                out_s.push(s[i - 1]);
                out_r.push(b'-');
                i -= 1;
            }
            Step::Left => {
                out_s.push(b'-');
                out_r.push(r[j - 1]);
                j -= 1;
            }
        }
    }
    out_s.reverse();
    out_r.reverse();
    (
        String::from_utf8(out_s).expect("ASCII"),
        String::from_utf8(out_r).expect("ASCII"),
    )
}

/// Optimal global alignment with deterministic traceback
/// (diagonal before up before left).
pub fn nw_align<T: Score>(
    s: &Sequence,
    r: &Sequence,
    scoring: &Scoring<T>,
) -> Result<Alignment<T>, AlignError> {
    check_alphabets(s, r)?;
    align_bytes(s.residues(), r.residues(), scoring)
}

pub(crate) fn align_bytes<T: Score>(
    s: &[u8],
    r: &[u8],
    scoring: &Scoring<T>,
) -> Result<Alignment<T>, AlignError> {
    let (score, steps) = fill_steps(s, r, scoring)?;
    let (aligned_s, aligned_r) = trace(s, r, &steps);
    Ok(Alignment { score, aligned_s, aligned_r })
}

/// Sum the per-column scores of an alignment.
pub fn rescore<T: Score>(a: &Alignment<T>, scoring: &Scoring<T>) -> Result<T, AlignError> {
    rescore_columns(a.aligned_s.as_bytes(), a.aligned_r.as_bytes(), scoring)
}

pub fn rescore_columns<T: Score>(
    top: &[u8],
    bottom: &[u8],
    scoring: &Scoring<T>,
) -> Result<T, AlignError> {
    if top.len() != bottom.len() {
        return Err(AlignError::InvalidAlignment("rows differ in length"));
    }
    let mut total = T::zero();
    for (&a, &b) in top.iter().zip(bottom) {
        let col = match (a, b) {
            (b'-', b'-') => return Err(AlignError::InvalidAlignment("gap over gap column")),
            (b'-', _) | (_, b'-') => scoring.delta,
            _ => scoring.substitution(a, b),
        };
        total = total
            .checked_add(&col)
            .ok_or(AlignError::InvalidAlignment("score overflow"))?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqio::Sequence;
    use proptest::prelude::*;

    fn dna(s: &str) -> Sequence {
        Sequence::dna("x", s).unwrap()
    }

    fn unit() -> Scoring<i32> {
        Scoring::new(1, -1, -1).unwrap()
    }

    /// Enumerate every global alignment column by column and keep the best.
    fn brute_force(s: &[u8], r: &[u8], w: &Scoring<i64>) -> i64 {
        fn go(s: &[u8], r: &[u8], w: &Scoring<i64>) -> i64 {
            match (s.split_first(), r.split_first()) {
                (None, None) => 0,
                (Some(_), None) => s.len() as i64 * w.delta,
                (None, Some(_)) => r.len() as i64 * w.delta,
                (Some((&a, s_rest)), Some((&b, r_rest))) => {
                    let sub = if a == b { w.alpha } else { w.beta };
                    (sub + go(s_rest, r_rest, w))
                        .max(w.delta + go(s_rest, r, w))
                        .max(w.delta + go(s, r_rest, w))
                }
            }
        }
        go(s, r, w)
    }

    #[test]
    fn matrix_examples() {
        let w = unit();
        assert_eq!(nw_matrix(&dna("ACGT"), &dna("ACGT"), &w).unwrap().get(4, 4), 4);
        assert_eq!(nw_matrix(&dna(""), &dna("AC"), &w).unwrap().get(0, 2), -2);
        let oracle = brute_force(b"ACT", b"AGT", &Scoring::new(1, -1, -1).unwrap());
        assert_eq!(oracle, 1);
        assert_eq!(nw_matrix(&dna("ACT"), &dna("AGT"), &w).unwrap().get(3, 3), 1);
    }

    #[test]
    fn align_examples() {
        let w = unit();
        let a = nw_align(&dna("ACGT"), &dna("ACGT"), &w).unwrap();
        assert_eq!((a.aligned_s.as_str(), a.aligned_r.as_str(), a.score), ("ACGT", "ACGT", 4));
        let a = nw_align(&dna("A"), &dna(""), &w).unwrap();
        assert_eq!((a.aligned_s.as_str(), a.aligned_r.as_str(), a.score), ("A", "-", -1));
        let a = nw_align(&dna("ACT"), &dna("AGT"), &w).unwrap();
        assert_eq!((a.aligned_s.as_str(), a.aligned_r.as_str(), a.score), ("ACT", "AGT", 1));
        let a = nw_align(&dna(""), &dna(""), &w).unwrap();
        assert_eq!((a.aligned_s.as_str(), a.aligned_r.as_str(), a.score), ("", "", 0));
    }

    #[test]
    fn tie_break_prefers_up_over_left() {
        let w = unit();
        let a = nw_align(&dna("AC"), &dna("C"), &w).unwrap();
        assert_eq!(a.score, 0);
        assert_eq!((a.aligned_s.as_str(), a.aligned_r.as_str()), ("AC", "-C"));
        // at (2,2) up and left both give -1
        let a = nw_align(&dna("AT"), &dna("TA"), &w).unwrap();
        assert_eq!(a.score, -1);
        assert_eq!((a.aligned_s.as_str(), a.aligned_r.as_str()), ("-AT", "TA-"));
    }

    #[test]
    fn rescore_examples() {
        let w = unit();
        let al = |s: &str, r: &str| Alignment { score: 0, aligned_s: s.into(), aligned_r: r.into() };
        assert_eq!(rescore(&al("ACGT", "ACGT"), &w), Ok(4));
        assert_eq!(rescore(&al("A-CT", "AG-T"), &w), Ok(0));
        assert_eq!(rescore(&al("ACT", "AGT"), &w), Ok(1));
        assert!(rescore(&al("AC", "A"), &w).is_err());
        assert!(rescore(&al("A-", "A-"), &w).is_err());
    }

    #[test]
    fn alphabet_mismatch() {
        let p = Sequence::protein("p", "MKV").unwrap();
        assert!(matches!(nw_align(&dna("ACG"), &p, &unit()), Err(AlignError::AlphabetMismatch(..))));
    }

    #[test]
    fn invalid_scheme() {
        assert!(Scoring::new(0, -1, -1).is_err());
        assert!(Scoring::new(1, 1, -1).is_err());
        assert!(Scoring::new(1, -1, 0).is_err());
    }

    #[test]
    fn overflow_is_rejected_for_narrow_scores() {
        let w: Scoring<i8> = Scoring::new(1, -1, -100).unwrap();
        let s = dna("ACGT");
        assert!(matches!(nw_align(&s, &s, &w), Err(AlignError::ScoreOverflow { .. })));
        let w: Scoring<i16> = Scoring::new(1, -1, -100).unwrap();
        assert_eq!(nw_align(&s, &s, &w).unwrap().score, 4);
    }

    #[test]
    fn display_format() {
        let a = nw_align(&dna("ACGT"), &dna("AGT"), &unit()).unwrap();
        assert_eq!(a.to_string(), "ACGT\n| ||\nA-GT\nscore=2\n");
        let a = nw_align(&dna("ACT"), &dna("AGT"), &unit()).unwrap();
        assert_eq!(a.midline(), "|x|");
    }

    proptest! {
        #[test]
        fn matches_brute_force(s in "[ACGT]{0,7}", r in "[ACGT]{0,7}") {
            let w64 = Scoring::new(2i64, -3, -2).unwrap();
            let w = Scoring::new(2i32, -3, -2).unwrap();
            let a = nw_align(&dna(&s), &dna(&r), &w).unwrap();
            prop_assert_eq!(a.score as i64, brute_force(s.as_bytes(), r.as_bytes(), &w64));
        }

        #[test]
        fn rescore_and_matrix_agree(s in "[ACGTN]{0,40}", r in "[ACGTN]{0,40}") {
            let w = unit();
            let a = nw_align(&dna(&s), &dna(&r), &w).unwrap();
            let mat = nw_matrix(&dna(&s), &dna(&r), &w).unwrap();
            prop_assert_eq!(rescore(&a, &w).unwrap(), mat.score());
            prop_assert_eq!(a.aligned_s.replace('-', ""), s.clone());
            prop_assert_eq!(a.aligned_r.replace('-', ""), r.clone());
        }

        #[test]
        fn score_is_symmetric(s in "[ACGT]{0,30}", r in "[ACGT]{0,30}") {
            let w = Scoring::new(2i32, -3, -2).unwrap();
            prop_assert_eq!(
                nw_align(&dna(&s), &dna(&r), &w).unwrap().score,
                nw_align(&dna(&r), &dna(&s), &w).unwrap().score
            );
        }

        #[test]
        fn matrix_invariants(s in "[ACGT]{0,20}", r in "[ACGT]{0,20}") {
            let w = Scoring::new(1i64, -1, -2).unwrap();
            let mat = nw_matrix(&dna(&s), &dna(&r), &w).unwrap();
            prop_assert_eq!(mat.get(0, 0), 0);
            for i in 1..=mat.rows() {
                prop_assert_eq!(mat.get(i, 0), -2 * i as i64);
                prop_assert!(mat.get(i, 0) < mat.get(i - 1, 0));
            }
            for j in 0..=mat.cols() {
                prop_assert_eq!(mat.get(0, j), -2 * j as i64);
            }
            for i in 1..=mat.rows() {
                for j in 1..=mat.cols() {
                    let sub = w.substitution(s.as_bytes()[i - 1], r.as_bytes()[j - 1]);
                    let best = (mat.get(i - 1, j - 1) + sub)
                        .max(mat.get(i - 1, j) + w.delta)
                        .max(mat.get(i, j - 1) + w.delta);
                    prop_assert_eq!(mat.get(i, j), best);
                }
            }
        }
    }
}
