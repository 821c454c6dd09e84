//! Every acceptance criterion at its stated scale and tolerance, one status
//! line per criterion. Criterion 10 runs the binary twice. Runs without the
//! test harness so the status lines are always printed.

use std::process::Command;
use std::time::{Duration, Instant};

use bdnet_cli::validate::{run_criterion, Preset, Scale};

const SEED: u64 = 7;

/// Runtime limit per criterion; `None` where no limit is stated.
fn limit(id: u32) -> Option<Duration> {
    let s = Duration::from_secs;
    match id {
        1 => Some(s(30)),
        2..=4 => Some(s(120)),
        5 => Some(s(600)),
        _ => None,
    }
}

fn validate_smoke() -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_bdnet"))
        .args(["validate", "--preset", "smoke", "--seed", "7", "--quiet", "--out", "-"])
        .output()
        .expect("binary runs");
    assert!(out.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn main() {
    let scale = Scale::preset(Preset::Standard);
    let mut failed = Vec::new();
    for id in 1..=9 {
        let start = Instant::now();
        let r = run_criterion(id, &scale, SEED).expect("criterion runs");
        let took = start.elapsed();
        let in_time = limit(id).is_none_or(|l| took <= l);
        println!("{}  {:.1}s", r.line(), took.as_secs_f64());
        if !(r.passed && in_time) {
            failed.push(id);
        }
    }

    // Criterion 7's runtime limit is stated for the smoke scale.
    let start = Instant::now();
    let smoke7 = run_criterion(7, &Scale::preset(Preset::Smoke), SEED).expect("criterion runs");
    let took = start.elapsed();
    println!("criterion  7 at smoke scale took {:.1}s (limit 900s)", took.as_secs_f64());
    if !smoke7.passed || took > Duration::from_secs(900) {
        failed.push(7);
    }

    let (a, b) = (validate_smoke(), validate_smoke());
    let identical = !a.is_empty() && a == b;
    println!(
        "criterion 10 {:<28} {}  {} report bytes",
        "determinism_binary",
        if identical { "PASS" } else { "FAIL" },
        a.len()
    );
    if !identical {
        failed.push(10);
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        eprintln!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
