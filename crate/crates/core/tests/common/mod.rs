//! Helpers shared by the binary-level test targets.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use rand::{Rng, SeedableRng};

pub const BIN: &str = env!("CARGO_BIN_EXE_countseq");

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn run(args: &[&str], stdin: Option<&[u8]>) -> Output {
    use std::io::Write;
    let mut child = Command::new(BIN)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn countseq");
    {
        let mut pipe = child.stdin.take().unwrap();
        if let Some(bytes) = stdin {
            // The binary may exit on a config error before reading its input.
            if let Err(e) = pipe.write_all(bytes) {
                assert_eq!(e.kind(), std::io::ErrorKind::BrokenPipe, "{e}");
            }
        }
    }
    child.wait_with_output().unwrap()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Compares against a golden file, or rewrites it when `UPDATE_GOLDEN` is set.
pub fn compare_golden(name: &str, actual: &[u8]) -> Result<(), String> {
    let path = fixture("golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected = fs::read(&path).map_err(|_| format!("missing golden file {}", path.display()))?;
    if expected != actual {
        let exp = String::from_utf8_lossy(&expected);
        let act = String::from_utf8_lossy(actual);
        let line = exp.lines().zip(act.lines()).position(|(a, b)| a != b);
        return Err(format!(
            "{name} differs from golden (first differing line {:?}; {} vs {} lines)",
            line.map(|i| i + 1),
            exp.lines().count(),
            act.lines().count()
        ));
    }
    Ok(())
}

pub fn check_golden(name: &str, actual: &[u8]) {
    if let Err(e) = compare_golden(name, actual) {
        panic!("{e}");
    }
}

/// Runs `cmd` over all input in one go, then over a split at each point with
/// a checkpoint in between, and requires identical report bytes.
pub fn split_anywhere(cmd: &str, extra: &[&str], seed: u64) -> Result<(), String> {
    let cfg = fixture(&format!("{cmd}.json"));
    let input = fs::read_to_string(fixture(&format!("{cmd}_events.ndjson"))).unwrap();
    let lines: Vec<&str> = input.lines().collect();
    let dir = tempfile::tempdir().unwrap();

    let mut args = vec![cmd, "--config", path_str(&cfg), "--report-every", "7"];
    args.extend_from_slice(extra);
    let whole = run(&args, Some(input.as_bytes()));
    if whole.status.code() == Some(1) {
        return Err(format!("{cmd}: {}", String::from_utf8_lossy(&whole.stderr)));
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for i in 0..20 {
        let k = rng.random_range(0..=lines.len());
        let out = dir.path().join(format!("out{i}.csv"));
        let cp = dir.path().join(format!("cp{i}.json"));
        let head: String = lines[..k].iter().map(|l| format!("{l}\n")).collect();
        let tail: String = lines[k..].iter().map(|l| format!("{l}\n")).collect();
        let common = [args.clone(), vec!["--out", path_str(&out), "--checkpoint", path_str(&cp)]].concat();
        let first = run(&common, Some(head.as_bytes()));
        if first.status.code() == Some(1) {
            return Err(format!("{cmd} split at {k}: {}", String::from_utf8_lossy(&first.stderr)));
        }
        let mut second_args = common.clone();
        if cmd == "canary" {
            second_args.push("--finalize");
        }
        let second = run(&second_args, Some(tail.as_bytes()));
        if second.status.code() != whole.status.code() {
            return Err(format!("{cmd} split at {k}: exit {:?}: {}", second.status.code(), String::from_utf8_lossy(&second.stderr)));
        }
        let joined = fs::read(&out).map_err(|e| e.to_string())?;
        if joined != whole.stdout {
            return Err(format!("{cmd}: split at {k} changes the report"));
        }
    }
    Ok(())
}

