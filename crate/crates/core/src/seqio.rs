//! FASTA ingestion, alphabets and reverse complement.

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SeqError {
    #[error("empty input")]
    EmptyInput,
    #[error("malformed header at line {line}: {reason}")]
    MalformedHeader { line: usize, reason: &'static str },
    #[error("illegal symbol {symbol:?} in record {record:?} at position {position}{}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    IllegalSymbol {
        record: String,
        line: Option<usize>,
        /// 0-based offset into the residue string.
        position: usize,
        symbol: char,
    },
    #[error("record {0:?} requires a DNA sequence")]
    WrongAlphabet(String),
    #[error("sequence id must not be empty")]
    EmptyId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlphabetKind {
    Dna,
    Protein,
}

const DNA_SYMBOLS: &[u8] = b"ACGTN";
const PROTEIN_SYMBOLS: &[u8] = b"ACDEFGHIKLMNPQRSTVWYX";

/// Residue alphabet with its wildcard symbol.
///
/// The wildcard (`N` for DNA, `X` for protein) is accepted on input but never
/// takes part in an exact match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Alphabet {
    pub kind: AlphabetKind,
}

impl Alphabet {
    pub const DNA: Alphabet = Alphabet { kind: AlphabetKind::Dna };
    pub const PROTEIN: Alphabet = Alphabet { kind: AlphabetKind::Protein };

    pub fn wildcard(self) -> u8 {
        match self.kind {
            AlphabetKind::Dna => b'N',
            AlphabetKind::Protein => b'X',
        }
    }

    pub fn symbols(self) -> &'static [u8] {
        match self.kind {
            AlphabetKind::Dna => DNA_SYMBOLS,
            AlphabetKind::Protein => PROTEIN_SYMBOLS,
        }
    }

    /// Membership test for an uppercase symbol, wildcard included.
    pub fn contains(self, symbol: u8) -> bool {
        self.symbols().contains(&symbol)
    }

    pub fn is_wildcard(self, symbol: u8) -> bool {
        symbol == self.wildcard()
    }

    /// Guess the alphabet of raw residues: DNA when every symbol is in `ACGTN`.
    pub fn detect(residues: &[u8]) -> Alphabet {
        if residues
            .iter()
            .all(|c| DNA_SYMBOLS.contains(&c.to_ascii_uppercase()))
        {
            Alphabet::DNA
        } else {
            Alphabet::PROTEIN
        }
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AlphabetKind::Dna => f.write_str("DNA"),
            AlphabetKind::Protein => f.write_str("protein"),
        }
    }
}

/// A validated, uppercase residue string with an identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    id: String,
    description: Option<String>,
    residues: Vec<u8>,
    alphabet: Alphabet,
}

impl Sequence {
    /// Build a sequence, folding case and validating every residue.
    pub fn new(
        id: impl Into<String>,
        residues: impl AsRef<[u8]>,
        alphabet: Alphabet,
    ) -> Result<Self, SeqError> {
        let id = id.into();
        if id.is_empty() {
            return Err(SeqError::EmptyId);
        }
        let residues: Vec<u8> = residues
            .as_ref()
            .iter()
            .map(|c| c.to_ascii_uppercase())
            .collect();
        check_residues(&id, &residues, alphabet, None)?;
        Ok(Sequence {
            id,
            description: None,
            residues,
            alphabet,
        })
    }

    pub fn dna(id: impl Into<String>, residues: impl AsRef<[u8]>) -> Result<Self, SeqError> {
        Self::new(id, residues, Alphabet::DNA)
    }

    pub fn protein(id: impl Into<String>, residues: impl AsRef<[u8]>) -> Result<Self, SeqError> {
        Self::new(id, residues, Alphabet::PROTEIN)
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        let d = description.into();
        self.description = if d.is_empty() { None } else { Some(d) };
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn description(&self) -> Option<&str> {
        self.description.as_deref()
    }

    pub fn residues(&self) -> &[u8] {
        &self.residues
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn as_str(&self) -> &str {
        // residues are validated ASCII
        std::str::from_utf8(&self.residues).expect("residues are ASCII")
    }
}

fn check_residues(
    id: &str,
    residues: &[u8],
    alphabet: Alphabet,
    line: Option<usize>,
) -> Result<(), SeqError> {
    match residues.iter().position(|&c| !alphabet.contains(c)) {
        None => Ok(()),
        Some(position) => Err(SeqError::IllegalSymbol {
            record: id.to_string(),
            line,
            position,
            symbol: residues[position] as char,
        }),
    }
}

/// Check that every residue of `s` belongs to `alphabet`.
pub fn validate(s: &Sequence, alphabet: Alphabet) -> Result<(), SeqError> {
    check_residues(&s.id, &s.residues, alphabet, None)
}

/// Parse FASTA text into sequences, in file order.
pub fn parse_fasta(input: &[u8], alphabet: Alphabet) -> Result<Vec<Sequence>, SeqError> {
    parse_records(input, |_| alphabet)
}

/// Parse FASTA text, choosing each record's alphabet from its content.
pub fn parse_fasta_auto(input: &[u8]) -> Result<Vec<Sequence>, SeqError> {
    parse_records(input, Alphabet::detect)
}

struct Pending {
    id: String,
    description: String,
    residues: Vec<u8>,
    // (line number, offset into residues where that line starts)
    line_starts: Vec<(usize, usize)>,
}

fn parse_records(
    input: &[u8],
    choose: impl Fn(&[u8]) -> Alphabet,
) -> Result<Vec<Sequence>, SeqError> {
    if input.iter().all(|c| c.is_ascii_whitespace()) {
        return Err(SeqError::EmptyInput);
    }
    let mut out = Vec::new();
    let mut current: Option<Pending> = None;

    let finish = |p: Pending, out: &mut Vec<Sequence>| -> Result<(), SeqError> {
        let alphabet = choose(&p.residues);
        if let Some(position) = p.residues.iter().position(|&c| !alphabet.contains(c)) {
            let line = p
                .line_starts
                .iter()
                .rev()
                .find(|(_, start)| *start <= position)
                .map(|(l, _)| *l);
            return Err(SeqError::IllegalSymbol {
                record: p.id,
                line,
                position,
                symbol: p.residues[position] as char,
            });
        }
        out.push(Sequence {
            id: p.id,
            description: if p.description.is_empty() {
                None
            } else {
                Some(p.description)
            },
            residues: p.residues,
            alphabet,
        });
        Ok(())
    };

    for (idx, raw) in input.split(|&c| c == b'\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix(b"\r").unwrap_or(raw);
        if let Some(header) = line.strip_prefix(b">") {
            if let Some(p) = current.take() {
                finish(p, &mut out)?;
            }
            let header = String::from_utf8_lossy(header);
            let header = header.trim();
            let mut parts = header.splitn(2, char::is_whitespace);
            let id = parts.next().unwrap_or("").to_string();
            if id.is_empty() {
                return Err(SeqError::MalformedHeader {
                    line: line_no,
                    reason: "missing record id",
                });
            }
            let description = parts.next().unwrap_or("").trim().to_string();
            current = Some(Pending {
                id,
                description,
                residues: Vec::new(),
                line_starts: Vec::new(),
            });
        } else {
            let content: Vec<u8> = line
                .iter()
                .filter(|c| !c.is_ascii_whitespace())
                .map(|c| c.to_ascii_uppercase())
                .collect();
            if content.is_empty() {
                continue;
            }
            match current.as_mut() {
                None => {
                    return Err(SeqError::MalformedHeader {
                        line: line_no,
                        reason: "sequence data before first '>'",
                    })
                }
                Some(p) => {
                    p.line_starts.push((line_no, p.residues.len()));
                    p.residues.extend_from_slice(&content);
                }
            }
        }
    }
    if let Some(p) = current.take() {
        finish(p, &mut out)?;
    }
    Ok(out)
}

/// Write sequences as FASTA, wrapping residue lines at `width` (0 = no wrap).
pub fn write_fasta<W: Write>(mut w: W, seqs: &[Sequence], width: usize) -> io::Result<()> {
    for s in seqs {
        match &s.description {
            Some(d) => writeln!(w, ">{} {}", s.id, d)?,
            None => writeln!(w, ">{}", s.id)?,
        }
        if width == 0 {
            w.write_all(&s.residues)?;
            writeln!(w)?;
        } else {
            for chunk in s.residues.chunks(width) {
                w.write_all(chunk)?;
                writeln!(w)?;
            }
        }
    }
    Ok(())
}

fn complement(c: u8) -> u8 {
    match c {
        b'A' => b'T',
        b'T' => b'A',
        b'C' => b'G',
        b'G' => b'C',
        other => other,
    }
}

/// Reverse complement of a DNA sequence; `N` maps to itself.
pub fn reverse_complement(s: &Sequence) -> Result<Sequence, SeqError> {
    if s.alphabet.kind != AlphabetKind::Dna {
        return Err(SeqError::WrongAlphabet(s.id.clone()));
    }
    Ok(Sequence {
        id: s.id.clone(),
        description: s.description.clone(),
        residues: s.residues.iter().rev().map(|&c| complement(c)).collect(),
        alphabet: s.alphabet,
    })
}
