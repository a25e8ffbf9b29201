use std::io::Write;
use std::process::{Command, Output, Stdio};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fpadd(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_fpadd"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn fpadd");
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn sum_bf16_lines() {
    let out = fpadd(&["sum", "--fmt", "bf16", "--config", "2"], "3F80 3F80\n7FC0 3F80\n");
    assert!(out.status.success());
    assert_eq!(stdout(&out), "4000\n7FC0\n");
}

#[test]
fn sum_reads_comments_and_prefixes() {
    let input = "# header\n0x3F80 0x4000 0x3F00 0xBF80\n\n";
    let out = fpadd(&["sum", "--fmt", "bf16", "--config", "2-2"], input);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out), "4020\n");
}

#[test]
fn bad_config_is_usage_error() {
    let out = fpadd(&["sum", "--fmt", "bf16", "--config", "3-2"], "3F80 3F80\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn parse_error_reports_line() {
    let out = fpadd(&["sum", "--fmt", "bf16", "--config", "2"], "3F80 3F80\n3F80 zz\n");
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn wrong_term_count_is_rejected() {
    let out = fpadd(&["sum", "--fmt", "bf16", "--config", "2-2"], "3F80 3F80 3F80\n");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn configs_for_eight() {
    let out = fpadd(&["configs", "--n", "8"], "");
    assert!(out.status.success());
    assert_eq!(stdout(&out), "2-2-2\n2-4\n4-2\n8\n");
}

#[test]
fn decode_shows_fields() {
    let out = fpadd(&["decode", "--fmt", "e4m3", "7E", "7F"], "");
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("value=448"), "{text}");
    assert!(text.contains("class=NaN"), "{text}");
}

#[test]
fn encode_round_trips_decode() {
    let out = fpadd(&["encode", "--fmt", "bf16", "--biased-exp", "127", "--significand", "80"], "");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out), "3F80\n");
}

#[test]
fn oracle_agrees_with_lossless_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let input: String = (0..200)
        .map(|_| {
            let words: Vec<String> = (0..16).map(|_| format!("{:02X}", rng.random::<u8>() & 0xF7 | 0x01)).collect();
            words.join(" ") + "\n"
        })
        .collect();
    let sum = fpadd(&["sum", "--fmt", "e4m3", "--config", "4-4"], &input);
    let oracle = fpadd(&["oracle", "--fmt", "e4m3"], &input);
    assert!(sum.status.success() && oracle.status.success());
    assert_eq!(stdout(&sum), stdout(&oracle));
}

#[test]
fn verify_lossless_is_ok() {
    let out = fpadd(&["verify", "--fmt", "e5m2", "--n", "8", "--samples", "500"], "");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("OK"));
}

#[test]
fn verify_truncate_reports_deltas() {
    let out = fpadd(&["verify", "--fmt", "e5m2", "--n", "8", "--samples", "500", "--mode", "truncate", "--guard", "0"], "");
    assert!(out.status.code().is_some_and(|c| c == 0 || c == 1));
    assert!(stdout(&out).contains("2-2-2"));
}

#[test]
fn sweep_writes_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let out = fpadd(
        &["sweep", "--fmt", "bf16", "--n", "8", "--samples", "100", "--csv", path.to_str().unwrap()],
        "",
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("config,depth,nodes"));
    // 4 configs x (lossless + truncate/sticky at 2 guard widths)
    assert_eq!(lines.count(), 4 * 5);
}

#[test]
fn sweep_from_vector_file() {
    let dir = tempfile::tempdir().unwrap();
    let vectors = dir.path().join("v.txt");
    std::fs::write(&vectors, "3C 3C 3C 3C\n40 B8 01 02\n").unwrap();
    let out = fpadd(
        &["sweep", "--fmt", "e5m2", "--n", "4", "--modes", "truncate", "--guards", "0", "--vectors", vectors.to_str().unwrap()],
        "",
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("2-2"));
}

#[test]
fn unknown_format_is_error() {
    let out = fpadd(&["decode", "--fmt", "e9m9x", "00"], "");
    assert_eq!(out.status.code(), Some(2));
}
