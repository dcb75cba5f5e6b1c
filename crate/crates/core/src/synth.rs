//! Seeded synthetic sequences for benchmarks and end-to-end checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::seqio::{reverse_complement, Sequence};

pub type SynthRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SynthRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_dna(rng: &mut SynthRng, len: usize) -> Vec<u8> {
    (0..len).map(|_| b"ACGT"[rng.gen_range(0..4)]).collect()
}

/// Copy of `seq` with each position substituted by a different base with
/// probability `rate`.
pub fn mutate(rng: &mut SynthRng, seq: &[u8], rate: f64) -> Vec<u8> {
    seq.iter()
        .map(|&c| {
            if rng.gen_bool(rate) {
                let others: Vec<u8> = b"ACGT".iter().copied().filter(|&b| b != c).collect();
                others[rng.gen_range(0..others.len())]
            } else {
                c
            }
        })
        .collect()
}

/// `n` random DNA sequences `seq0..` whose lengths sum to about `total`.
pub fn random_database(rng: &mut SynthRng, n: usize, total: usize) -> Vec<Sequence> {
    let mean = (total / n.max(1)).max(2);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(mean / 2..=mean + mean / 2);
            Sequence::dna(format!("seq{i}"), random_dna(rng, len)).expect("ACGT only")
        })
        .collect()
}

/// Substrings of random database entries. Each query id records its source.
pub fn sample_queries(
    rng: &mut SynthRng,
    db: &[Sequence],
    n: usize,
    len: std::ops::RangeInclusive<usize>,
) -> Vec<(Sequence, usize)> {
    (0..n)
        .map(|i| {
            let src = rng.gen_range(0..db.len());
            let residues = db[src].residues();
            let l = rng.gen_range(len.clone()).min(residues.len());
            let start = rng.gen_range(0..=residues.len() - l);
            let q = Sequence::dna(format!("q{i}_{}", db[src].id()), &residues[start..start + l])
                .expect("substring of DNA");
            (q, src)
        })
        .collect()
}

/// A segment shared between two synthetic genomes; positions are 1-based
/// and inclusive, `b_*` in the coordinates of the second genome as written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Planted {
    pub a_start: usize,
    pub b_start: usize,
    pub len: usize,
    pub reverse: bool,
}

/// Two random genomes of length `genome_len` sharing `segments`, each given
/// as `(len, reverse)`. Segments sit in disjoint slots, in order along the
/// first genome. Forward copies keep that order in the second genome;
/// reverse copies are reverse-complemented and their slots taken in the
/// opposite order, as an inversion would leave them.
pub fn planted_pair(
    rng: &mut SynthRng,
    genome_len: usize,
    segments: &[(usize, bool)],
) -> (Sequence, Sequence, Vec<Planted>) {
    let mut a = random_dna(rng, genome_len);
    let mut b = random_dna(rng, genome_len);
    let slot = genome_len / segments.len().max(1);
    let rev_slots: Vec<usize> = (0..segments.len()).filter(|&i| segments[i].1).collect();
    let mut planted = Vec::new();
    for (i, &(len, reverse)) in segments.iter().enumerate() {
        assert!(len < slot, "segment does not fit its slot");
        let b_slot = match rev_slots.iter().position(|&r| r == i) {
            Some(p) => rev_slots[rev_slots.len() - 1 - p],
            None => i,
        };
        let a_off = i * slot + rng.gen_range(0..slot - len);
        let b_off = b_slot * slot + rng.gen_range(0..slot - len);
        let seg = random_dna(rng, len);
        a[a_off..a_off + len].copy_from_slice(&seg);
        if reverse {
            let rc = reverse_complement(&Sequence::dna("seg", &seg).expect("ACGT only")).expect("DNA");
            b[b_off..b_off + len].copy_from_slice(rc.residues());
        } else {
            b[b_off..b_off + len].copy_from_slice(&seg);
        }
        planted.push(Planted { a_start: a_off + 1, b_start: b_off + 1, len, reverse });
    }
    (
        Sequence::dna("genomeA", a).expect("ACGT only"),
        Sequence::dna("genomeB", b).expect("ACGT only"),
        planted,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_output_is_reproducible() {
        assert_eq!(random_dna(&mut rng(7), 50), random_dna(&mut rng(7), 50));
        let s = random_dna(&mut rng(1), 1000);
        let m = mutate(&mut rng(2), &s, 0.1);
        let diff = s.iter().zip(&m).filter(|(a, b)| a != b).count();
        assert!((50..150).contains(&diff));
    }

    #[test]
    fn planted_segments_are_present() {
        let (a, b, planted) = planted_pair(&mut rng(3), 5000, &[(300, false), (200, true)]);
        for p in &planted {
            let seg = &a.residues()[p.a_start - 1..p.a_start - 1 + p.len];
            let other = &b.residues()[p.b_start - 1..p.b_start - 1 + p.len];
            if p.reverse {
                let rc = reverse_complement(&Sequence::dna("x", seg).unwrap()).unwrap();
                assert_eq!(rc.residues(), other);
            } else {
                assert_eq!(seg, other);
            }
        }
    }

    #[test]
    fn reverse_segments_are_inverted() {
        let (_, _, planted) = planted_pair(&mut rng(6), 10_000, &[(300, true), (300, false), (300, true)]);
        assert!(planted[0].b_start > planted[2].b_start);
        assert!(planted[1].b_start > 3333 && planted[1].b_start < 6666);
    }

    #[test]
    fn queries_come_from_their_source() {
        let db = random_database(&mut rng(4), 10, 5000);
        for (q, src) in sample_queries(&mut rng(5), &db, 20, 50..=80) {
            assert!(db[src].as_str().contains(q.as_str()));
        }
    }
}
