#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chanleak_core::profile::{Frame, GoroutineProfile, GoroutineRecord};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixtures() -> PathBuf {
    repo_root().join("fixtures")
}

/// Profiles of the canonical corpus, sorted by file name.
pub fn corpus_files() -> Vec<PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(fixtures().join("profiles"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".gprof.txt"))
        .collect();
    v.sort();
    v
}

/// Runs the CLI in-process: (exit code, stdout, stderr).
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("chanleak").chain(args.iter().copied());
    let code = chanleak::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

const PARKED: [(&str, &str, &[&str]); 3] = [
    ("chan send", "runtime.chansend1", &[]),
    ("chan receive", "runtime.chanrecv1", &[]),
    ("select", "runtime.selectgo", &["chan done", "time.Tick"]),
];

/// A profile of `n` goroutines spread over 40 parked channel sites and a
/// few running ones, fully determined by `seed`.
pub fn synthetic_profile(n: u64, seed: u64) -> GoroutineProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let goroutines = (1..=n)
        .map(|id| {
            if rng.random_ratio(1, 50) {
                return GoroutineRecord {
                    id,
                    state_label: "running".into(),
                    frames: vec![Frame::new("main.main", "main.go", 20)],
                    created_by: None,
                };
            }
            let site: u32 = rng.random_range(0..40);
            let (label, sig, arms) = PARKED[site as usize % 3];
            let mut kind = Frame::new(sig, "runtime/chan.go", 100);
            kind.arms = arms.iter().map(|a| a.to_string()).collect();
            GoroutineRecord {
                id,
                state_label: label.into(),
                frames: vec![
                    Frame::new("runtime.gopark", "runtime/proc.go", 398),
                    kind,
                    Frame::new(format!("svc{site}.handle$1"), format!("svc{site}/handle.go"), 10 + site),
                    Frame::new(format!("svc{site}.Serve"), format!("svc{site}/serve.go"), 40),
                ],
                created_by: Some(Frame::new(format!("svc{site}.Serve"), format!("svc{site}/serve.go"), 38)),
            }
        })
        .collect();
    GoroutineProfile { instance_id: format!("synthetic-{seed}"), captured_at: "2024-05-01T00:00:00Z".into(), goroutines }
}
