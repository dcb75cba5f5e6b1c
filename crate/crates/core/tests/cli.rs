use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use clusterseq::align::{nw_align, Scoring};
use clusterseq::chaining::parse_chains;
use clusterseq::dbsearch::parse_hits;
use clusterseq::dotplot::parse_svg_lines;
use clusterseq::memfind::parse_mems;
use clusterseq::seqio::write_fasta;
use clusterseq::{synth, Sequence};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clusterseq"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn write_seqs(path: &Path, seqs: &[Sequence]) {
    let mut buf = Vec::new();
    write_fasta(&mut buf, seqs, 60).unwrap();
    fs::write(path, buf).unwrap();
}

#[test]
fn align_matches_serial() {
    let dir = tempfile::tempdir().unwrap();
    let mut g = synth::rng(11);
    let a = synth::random_dna(&mut g, 300);
    let b = synth::mutate(&mut g, &a, 0.2);
    let (a, b) = (Sequence::dna("a", a).unwrap(), Sequence::dna("b", b).unwrap());
    write_seqs(&dir.path().join("a.fa"), std::slice::from_ref(&a));
    write_seqs(&dir.path().join("b.fa"), std::slice::from_ref(&b));
    let timing = dir.path().join("timing.csv");
    let out = run(bin()
        .current_dir(dir.path())
        .args(["align", "--a", "a.fa", "--b", "b.fa", "--match", "1", "--mismatch", "-1", "--gap", "-1", "--workers", "4", "--timing"])
        .arg(&timing));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let serial = nw_align(&a, &b, &Scoring::new(1, -1, -1).unwrap()).unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, format!(">a vs b\n{serial}"));
    let csv = fs::read_to_string(timing).unwrap();
    assert!(csv.starts_with("label,one_node,nodes_with_comm,nodes_without_comm,comm_time\n"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn compare_writes_parseable_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, _) = synth::planted_pair(&mut synth::rng(12), 6000, &[(200, false), (150, true)]);
    write_seqs(&dir.path().join("a.fa"), &[a]);
    write_seqs(&dir.path().join("b.fa"), &[b]);
    let out = run(bin()
        .current_dir(dir.path())
        .args(["compare", "--a", "a.fa", "--b", "b.fa", "--minlen", "20", "--plot", "out.svg", "--gnuplot"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mems = parse_mems(&fs::read_to_string(dir.path().join("out.mems")).unwrap()).unwrap();
    let chains = parse_chains(&fs::read_to_string(dir.path().join("out.chains")).unwrap()).unwrap();
    let svg = parse_svg_lines(&fs::read_to_string(dir.path().join("out.svg")).unwrap()).unwrap();
    assert!(!mems.is_empty());
    assert_eq!(chains.len(), 2);
    assert_eq!(svg.len(), chains.iter().map(|(_, c)| c.fragments.len()).sum::<usize>());
    let data = parse_mems(&fs::read_to_string(dir.path().join("out.dat")).unwrap()).unwrap();
    assert_eq!(data.len(), svg.len());
    assert!(fs::read_to_string(dir.path().join("out.gp")).unwrap().contains("out.dat"));
}

#[test]
fn compare_default_prefix() {
    let dir = tempfile::tempdir().unwrap();
    write_seqs(&dir.path().join("a.fa"), &[Sequence::dna("a", "ACGTACGTACGTTTGACCA").unwrap()]);
    let out = run(bin().current_dir(dir.path()).args(["compare", "--a", "a.fa", "--b", "a.fa", "--minlen", "5"]));
    assert!(out.status.success());
    for f in ["compare.mems", "compare.chains", "compare.svg"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn search_is_merge_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let mut g = synth::rng(13);
    let db = synth::random_database(&mut g, 30, 60_000);
    let queries: Vec<Sequence> = synth::sample_queries(&mut g, &db, 10, 100..=300).into_iter().map(|(q, _)| q).collect();
    write_seqs(&dir.path().join("db.fa"), &db);
    write_seqs(&dir.path().join("q.fa"), &queries);
    let table = |workers: &str| {
        let out = run(bin()
            .current_dir(dir.path())
            .args(["search", "--db", "db.fa", "--queries", "q.fa", "--workers", workers, "--topk", "5"]));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let one = table("1");
    assert_eq!(table("4"), one);
    let hits = parse_hits(&one).unwrap();
    for q in &queries {
        let first = hits.iter().find(|h| h.query_id == q.id()).unwrap();
        assert_eq!(first.score, q.len() as i32);
    }
}

#[test]
fn malformed_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.fa"), ">x\nACGT\nAC#T\n").unwrap();
    fs::write(dir.path().join("ok.fa"), ">y\nACGT\n").unwrap();
    let out = run(bin().current_dir(dir.path()).args(["align", "--a", "bad.fa", "--b", "ok.fa", "--alphabet", "dna"]));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.fa") && err.contains("line 3"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(bin().args(["align", "--unknown"])).status.code(), Some(1));
    assert_eq!(run(bin().args(["search", "--db", "x.fa"])).status.code(), Some(1));
    let out = run(bin().args(["align", "--a", "x", "--b", "y", "--match", "0"]));
    assert_ne!(out.status.code(), Some(0));
    let help = run(bin().args(["--help"]));
    assert!(help.status.success());
    assert!(String::from_utf8_lossy(&help.stdout).contains("compare"));
}

#[test]
fn invalid_scheme_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ok.fa"), ">y\nACGT\n").unwrap();
    let out = run(bin().current_dir(dir.path()).args(["align", "--a", "ok.fa", "--b", "ok.fa", "--gap", "0"]));
    assert_eq!(out.status.code(), Some(1));
}
