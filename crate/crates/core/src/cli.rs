//! Command-line front end: `align`, `compare`, `search` and `bench`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::align::{AlignError, Scoring};
use crate::chaining::{chain_pipeline, write_chain, ChainError};
use crate::dbsearch::{scatter_gather, write_hits, Database, SearchError, SearchParams};
use crate::dotplot::{emit_gnuplot, render_svg, PlotError, PlotSpec};
use crate::harness::{bench_report, BenchRow, ClusterConfig, ExecMode, HarnessError, TimingReport};
use crate::memfind::{write_mems, Strand};
use crate::seqio::{parse_fasta, parse_fasta_auto, Alphabet, SeqError, Sequence};
use crate::synth;
use crate::wavefront::{parallel_nw, WavefrontError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "clusterseq", version, about = "Cluster-style sequence alignment, genome comparison and database search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Global alignment of the first record of two FASTA files
    Align(AlignArgs),
    /// MEMs, best chains per strand and a dot plot for two sequences
    Compare(CompareArgs),
    /// Seed-and-extend search of query sequences against a database
    Search(SearchArgs),
    /// Time a synthetic workload on one worker and on many; prints CSV
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlphabetArg {
    Auto,
    Dna,
    Protein,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sim,
    Threads,
}

impl From<ModeArg> for ExecMode {
    fn from(m: ModeArg) -> ExecMode {
        match m {
            ModeArg::Sim => ExecMode::Simulated,
            ModeArg::Threads => ExecMode::Threaded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Workload {
    Align,
    Search,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Score for a pair of equal residues (> 0)
    #[arg(long = "match", default_value_t = 1, allow_negative_numbers = true)]
    pub match_score: i32,
    /// Score for a pair of different residues (<= 0)
    #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
    pub mismatch: i32,
    /// Score for a residue aligned to a gap (< 0)
    #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
    pub gap: i32,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// FASTA file with the first sequence (rows)
    #[arg(long)]
    pub a: PathBuf,
    /// FASTA file with the second sequence (columns)
    #[arg(long)]
    pub b: PathBuf,
    /// Residue alphabet of the inputs
    #[arg(long, value_enum, default_value_t = AlphabetArg::Auto)]
    pub alphabet: AlphabetArg,
    #[command(flatten)]
    pub scores: ScoreArgs,
    /// Number of workers (column strips)
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Rows per tile between boundary messages
    #[arg(long, default_value_t = 64)]
    pub tile: usize,
    /// Execution mode
    #[arg(long, value_enum, default_value_t = ModeArg::Sim)]
    pub mode: ModeArg,
    /// Write the alignment here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write a timing CSV here; runs an extra single-worker baseline
    #[arg(long)]
    pub timing: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// FASTA file with the first sequence (x axis)
    #[arg(long)]
    pub a: PathBuf,
    /// FASTA file with the second sequence (y axis)
    #[arg(long)]
    pub b: PathBuf,
    /// Residue alphabet of the inputs
    #[arg(long, value_enum, default_value_t = AlphabetArg::Auto)]
    pub alphabet: AlphabetArg,
    /// Minimum MEM length
    #[arg(long, default_value_t = 20)]
    pub minlen: usize,
    /// Output prefix for <prefix>.mems and <prefix>.chains [default: the
    /// --plot path without extension, else "compare"]
    #[arg(long)]
    pub prefix: Option<PathBuf>,
    /// SVG dot plot path [default: <prefix>.svg]
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Also write <prefix>.gp and <prefix>.dat for gnuplot
    #[arg(long)]
    pub gnuplot: bool,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// FASTA database
    #[arg(long)]
    pub db: PathBuf,
    /// FASTA queries
    #[arg(long)]
    pub queries: PathBuf,
    /// Residue alphabet of the inputs
    #[arg(long, value_enum, default_value_t = AlphabetArg::Auto)]
    pub alphabet: AlphabetArg,
    /// Seed length [default: 11 for DNA, 4 for protein]
    #[arg(long)]
    pub k: Option<usize>,
    /// Stop extending once the score falls this far below its best
    #[arg(long, default_value_t = 20)]
    pub xdrop: i32,
    /// Report hits scoring at least this much
    #[arg(long, default_value_t = 16, allow_negative_numbers = true)]
    pub min_score: i32,
    #[command(flatten)]
    pub scores: ScoreArgs,
    /// Hits kept per query
    #[arg(long, default_value_t = 10)]
    pub topk: usize,
    /// Number of workers (database partitions)
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Execution mode
    #[arg(long, value_enum, default_value_t = ModeArg::Sim)]
    pub mode: ModeArg,
    /// Write the hit table here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write a timing CSV here; runs an extra single-worker baseline
    #[arg(long)]
    pub timing: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Workload to run
    #[arg(long, value_enum, default_value_t = Workload::Align)]
    pub workload: Workload,
    /// Sequence length (align) or database residues (search); repeatable
    #[arg(long, num_args = 1.., default_values_t = [2000usize])]
    pub size: Vec<usize>,
    /// Worker count for the multi-worker run
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
    /// Rows per tile (align)
    #[arg(long, default_value_t = 64)]
    pub tile: usize,
    /// Number of queries (search)
    #[arg(long, default_value_t = 100)]
    pub queries: usize,
    /// Execution mode
    #[arg(long, value_enum, default_value_t = ModeArg::Threads)]
    pub mode: ModeArg,
    /// Random seed for the synthetic data
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Write the CSV here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: SeqError },
    #[error("{0}: no sequences")]
    NoRecords(PathBuf),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Wavefront(#[from] WavefrontError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_)
            | CliError::Align(AlignError::InvalidScheme(_))
            | CliError::Wavefront(WavefrontError::InvalidPartition { .. })
            | CliError::Search(SearchError::BadParams(_))
            | CliError::Harness(HarnessError::InvalidConfig(_)) => EXIT_USAGE,
            _ => EXIT_DATA,
        }
    }
}

/// Parse `argv` (including the program name) and run it. Returns the exit
/// code; diagnostics go to `stderr`.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Align(a) => align(a, stdout),
        Command::Compare(a) => compare(a, stdout),
        Command::Search(a) => search(a, stdout),
        Command::Bench(a) => bench(a, stdout),
    }
}

fn read_fasta(path: &Path, alphabet: AlphabetArg) -> Result<Vec<Sequence>, CliError> {
    let bytes = fs::read(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    let parsed = match alphabet {
        AlphabetArg::Auto => parse_fasta_auto(&bytes),
        AlphabetArg::Dna => parse_fasta(&bytes, Alphabet::DNA),
        AlphabetArg::Protein => parse_fasta(&bytes, Alphabet::PROTEIN),
    };
    let seqs = parsed.map_err(|source| CliError::Input { path: path.into(), source })?;
    if seqs.is_empty() {
        return Err(CliError::NoRecords(path.into()));
    }
    Ok(seqs)
}

fn first_record(path: &Path, alphabet: AlphabetArg) -> Result<Sequence, CliError> {
    Ok(read_fasta(path, alphabet)?.swap_remove(0))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.into(), source })
}

fn emit(out: Option<&Path>, stdout: &mut dyn Write, contents: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, contents),
        None => stdout
            .write_all(contents)
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

fn scoring(s: &ScoreArgs) -> Result<Scoring<i32>, CliError> {
    Ok(Scoring::new(s.match_score, s.mismatch, s.gap)?)
}

fn timing_csv(label: String, one: &TimingReport, many: &TimingReport) -> String {
    bench_report(&[BenchRow::from_reports(label, one, many)])
}

fn align(args: AlignArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let s = first_record(&args.a, args.alphabet)?;
    let r = first_record(&args.b, args.alphabet)?;
    let w = scoring(&args.scores)?;
    let cfg = ClusterConfig::new(args.workers, args.mode.into())?;
    let run = parallel_nw(&s, &r, &w, args.tile, &cfg)?;
    let text = format!(">{} vs {}\n{}", s.id(), r.id(), run.alignment);
    emit(args.out.as_deref(), stdout, text.as_bytes())?;
    if let Some(path) = &args.timing {
        let one = if args.workers == 1 {
            run.timing.clone()
        } else {
            parallel_nw(&s, &r, &w, args.tile, &cfg.with_workers(1)?)?.timing
        };
        let label = format!("align {}x{} W={}", s.len(), r.len(), args.workers);
        write_file(path, timing_csv(label, &one, &run.timing).as_bytes())?;
    }
    Ok(())
}

/// Output prefix: `--prefix`, else the `--plot` path without extension,
/// else `compare`.
pub fn compare_prefix(prefix: Option<&Path>, plot: Option<&Path>) -> PathBuf {
    match (prefix, plot) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(plot)) => plot.with_extension(""),
        (None, None) => PathBuf::from("compare"),
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn compare(args: CompareArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if args.minlen == 0 {
        return Err(CliError::Usage("--minlen must be at least 1".into()));
    }
    let a = first_record(&args.a, args.alphabet)?;
    let b = first_record(&args.b, args.alphabet)?;
    let pair = chain_pipeline(&a, &b, args.minlen)?;
    let prefix = compare_prefix(args.prefix.as_deref(), args.plot.as_deref());

    let mut mems = Vec::new();
    let _ = writeln!(mems, "# s1_start\ts1_end\ts2_start\ts2_end\tlength\tstrand");
    let _ = write_mems(&mut mems, &pair.forward_mems);
    let _ = write_mems(&mut mems, &pair.reverse_mems);
    let mems_path = with_suffix(&prefix, ".mems");
    write_file(&mems_path, &mems)?;

    let mut chains = Vec::new();
    let _ = write_chain(&mut chains, &pair.forward, Strand::Forward);
    let _ = write_chain(&mut chains, &pair.reverse, Strand::Reverse);
    let chains_path = with_suffix(&prefix, ".chains");
    write_file(&chains_path, &chains)?;

    let spec = PlotSpec {
        x_id: a.id().to_string(),
        y_id: b.id().to_string(),
        x_len: a.len(),
        y_len: b.len(),
        fwd: pair.forward.fragments.clone(),
        rev: pair.reverse.fragments.clone(),
        title: format!("{} vs {}", a.id(), b.id()),
    };
    let svg_path = args.plot.clone().unwrap_or_else(|| with_suffix(&prefix, ".svg"));
    write_file(&svg_path, render_svg(&spec)?.as_bytes())?;
    if args.gnuplot {
        let data_path = with_suffix(&prefix, ".dat");
        let gp_svg = with_suffix(&prefix, ".gnuplot.svg");
        let (script, data) = emit_gnuplot(&spec, &data_path.to_string_lossy(), &gp_svg.to_string_lossy())?;
        write_file(&with_suffix(&prefix, ".gp"), script.as_bytes())?;
        write_file(&data_path, data.as_bytes())?;
    }
    let summary = format!(
        "mems: {} forward, {} reverse -> {}\nchains: forward score {} ({} fragments), reverse score {} ({} fragments) -> {}\nplot -> {}\n",
        pair.forward_mems.len(),
        pair.reverse_mems.len(),
        mems_path.display(),
        pair.forward.score,
        pair.forward.fragments.len(),
        pair.reverse.score,
        pair.reverse.fragments.len(),
        chains_path.display(),
        svg_path.display(),
    );
    emit(None, stdout, summary.as_bytes())
}

fn search(args: SearchArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let db = Database::new(read_fasta(&args.db, args.alphabet)?)?;
    let queries = read_fasta(&args.queries, args.alphabet)?;
    let alphabet = db.alphabet().ok_or(SearchError::EmptyDatabase)?;
    let mut params = SearchParams::for_alphabet(alphabet);
    if let Some(k) = args.k {
        params.k = k;
    }
    params.xdrop = args.xdrop;
    params.min_score = args.min_score;
    params.scoring = scoring(&args.scores)?;
    let cfg = ClusterConfig::new(args.workers, args.mode.into())?;
    let run = scatter_gather(&queries, &db, &params, args.topk, &cfg)?;
    let mut table = Vec::new();
    for hits in &run.results {
        let _ = write_hits(&mut table, hits);
    }
    emit(args.out.as_deref(), stdout, &table)?;
    if let Some(path) = &args.timing {
        let one = if args.workers == 1 {
            run.timing.clone()
        } else {
            scatter_gather(&queries, &db, &params, args.topk, &cfg.with_workers(1)?)?.timing
        };
        let label = format!("search {} queries {} residues W={}", queries.len(), db.total_residues(), args.workers);
        write_file(path, timing_csv(label, &one, &run.timing).as_bytes())?;
    }
    Ok(())
}

/// One bench row: the workload at one worker and at `args.workers`.
pub fn bench_row(workload: Workload, size: usize, args: &BenchArgs) -> Result<BenchRow, CliError> {
    let mode: ExecMode = args.mode.into();
    let one_cfg = ClusterConfig::new(1, mode)?;
    let many_cfg = ClusterConfig::new(args.workers, mode)?;
    let mut rng = synth::rng(args.seed);
    match workload {
        Workload::Align => {
            let s = synth::random_dna(&mut rng, size);
            let r = synth::mutate(&mut rng, &s, 0.1);
            let s = Sequence::dna("s", s).map_err(|source| CliError::Input { path: "<synthetic>".into(), source })?;
            let r = Sequence::dna("r", r).map_err(|source| CliError::Input { path: "<synthetic>".into(), source })?;
            let w: Scoring<i32> = Scoring::default();
            let one = parallel_nw(&s, &r, &w, args.tile, &one_cfg)?;
            let many = parallel_nw(&s, &r, &w, args.tile, &many_cfg)?;
            Ok(BenchRow::from_reports(format!("align {size}x{size}"), &one.timing, &many.timing))
        }
        Workload::Search => {
            let n = (size / 5000).max(1);
            let db = Database::new(synth::random_database(&mut rng, n, size))?;
            let queries: Vec<Sequence> = synth::sample_queries(&mut rng, db.sequences(), args.queries, 200..=1000)
                .into_iter()
                .map(|(q, _)| q)
                .collect();
            let params = SearchParams::for_alphabet(Alphabet::DNA);
            let one = scatter_gather(&queries, &db, &params, 10, &one_cfg)?;
            let many = scatter_gather(&queries, &db, &params, 10, &many_cfg)?;
            Ok(BenchRow::from_reports(
                format!("search {} queries {} residues", queries.len(), db.total_residues()),
                &one.timing,
                &many.timing,
            ))
        }
    }
}

fn bench(args: BenchArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if args.size.contains(&0) {
        return Err(CliError::Usage("--size must be positive".into()));
    }
    let rows = args
        .size
        .iter()
        .map(|&size| bench_row(args.workload, size, &args))
        .collect::<Result<Vec<_>, _>>()?;
    emit(args.out.as_deref(), stdout, bench_report(&rows).as_bytes())
}
