//! Built-in fixtures end to end: expectation matrix, the Spectre leak for
//! every secret, witness replay and run-to-run determinism.

mod common;

use std::process::Command;

use specsim::explorer::{check_reach, explore, final_values, replay, Settings, Verdict};
use specsim::model::MemoryModel;
use specsim::scenarios::{builtin, fixtures_dir, spectre_v1, spectre_v1_fenced, worked_example};
use specsim::semantics::{terminated, SpecMode};
use specsim::syntax::parse_predicate;

#[test]
fn expectation_matrix() {
    for s in builtin() {
        for e in &s.expected {
            let pred = parse_predicate(&s.system, &e.predicate).unwrap();
            let v = check_reach(&s.system, &pred, &Settings::new(e.model, e.mode)).unwrap();
            assert!(!matches!(v, Verdict::BoundExhausted(_)), "{} {}", s.name, e.predicate);
            assert_eq!(
                v.witness().is_some(),
                e.reachable,
                "{} {} {} {}",
                s.name,
                e.model.name(),
                e.mode,
                e.predicate
            );
        }
    }
}

#[test]
fn worked_example_fetches_z_then_takes_false_branch() {
    let s = worked_example();
    let sys = &s.system;
    let off = explore(sys, &Settings::new(MemoryModel::sc(), SpecMode::Off)).unwrap();
    let wrong = explore(sys, &Settings::new(MemoryModel::sc(), SpecMode::WrongBranch)).unwrap();
    assert_eq!(off.behaviours.len(), 1);
    let base = off.behaviours.iter().next().unwrap();
    let labels = |b: &specsim::explorer::Behaviour| b.trace.iter().map(|l| l.to_string()).collect::<Vec<_>>();
    assert_eq!(labels(base), ["P1: [!b]", "P1: y := 7"]);

    let z = sys.layout.address(&"z".into(), None).unwrap();
    let leaky = wrong
        .behaviours
        .iter()
        .find(|b| labels(b) == ["P1: fetch z", "P1: [!b]", "P1: y := 7"])
        .expect("speculative trace");
    assert_eq!(final_values(sys, &leaky.finals), final_values(sys, &base.finals));
    let mut cache = base.finals.mem.cache().clone();
    cache.insert(z);
    assert_eq!(*leaky.finals.mem.cache(), cache);
}

fn position(trace: &[String], label: &str) -> Option<usize> {
    trace.iter().position(|l| l == label)
}

#[test]
fn spectre_leaks_every_secret() {
    let wrong = Settings::new(MemoryModel::sc(), SpecMode::WrongBranch);
    let off = Settings::new(MemoryModel::sc(), SpecMode::Off);
    for d in 0..8 {
        let s = spectre_v1(8, d, 4).unwrap();
        let pred = parse_predicate(&s.system, &format!("atk.r = {d}")).unwrap();
        let v = check_reach(&s.system, &pred, &wrong).unwrap();
        let w = v.witness().unwrap_or_else(|| panic!("no witness for D = {d}"));
        let t: Vec<String> = w.trace.iter().map(|l| l.to_string()).collect();
        let guard = position(&t, "V: [!(4 < 4)]").expect("failed bounds guard");
        let fa = position(&t, "V: fetch A[4]").expect("fetch of the secret");
        let fb = position(&t, &format!("V: fetch B[{d}]")).expect("fetch of the probe line");
        assert!(fa < fb && fb < guard, "{t:?}");

        assert!(check_reach(&s.system, &pred, &off).unwrap().holds(), "off, D = {d}");
        let f = spectre_v1_fenced(8, d, 4).unwrap();
        assert!(
            check_reach(&f.system, &pred, &wrong).unwrap().holds(),
            "fenced, D = {d}"
        );
    }
}

#[test]
fn witnesses_replay_to_termination() {
    for s in builtin() {
        for e in s.expected.iter().filter(|e| e.reachable) {
            let settings = Settings::new(e.model, e.mode);
            let pred = parse_predicate(&s.system, &e.predicate).unwrap();
            let v = check_reach(&s.system, &pred, &settings).unwrap();
            let w = v.witness().unwrap();
            let cfg = replay(&s.system, &w.trace, &settings).unwrap().expect("replays");
            assert!(terminated(&cfg), "{}", s.name);
            assert_eq!(final_values(&s.system, &cfg), final_values(&s.system, &w.finals));
        }
    }
}

#[test]
fn parallel_exploration_matches_sequential() {
    for s in builtin() {
        for mode in [SpecMode::Off, SpecMode::WrongBranch, SpecMode::BothBranches] {
            // Without the handshake the speculative trace sets are huge.
            if s.name == "spectre_parallel" && mode != SpecMode::Off {
                continue;
            }
            let mut seq = Settings::new(MemoryModel::tso(), mode);
            seq.jobs = 1;
            let mut par = seq.clone();
            par.jobs = 4;
            let a = explore(&s.system, &seq).unwrap();
            let b = explore(&s.system, &par).unwrap();
            assert_eq!(a.behaviours, b.behaviours, "{} {mode}", s.name);
            assert_eq!(a.states, b.states);
        }
    }
}

fn specsim(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_specsim")).args(args).output().unwrap();
    (out.status.code().unwrap(), out.stdout)
}

#[test]
fn jsonl_output_is_byte_identical() {
    let dir = fixtures_dir();
    for name in ["spectre.prog", "sb.prog", "worked_example.prog"] {
        let path = dir.join(name);
        let path = path.to_str().unwrap();
        for args in [
            vec!["--format", "jsonl", "--model", "tso", "explore", path],
            vec!["--format", "jsonl", "--seed", "7", "run", path],
            vec!["--format", "jsonl", "--jobs", "4", "explore", path],
        ] {
            let (c1, o1) = specsim(&args);
            let (c2, o2) = specsim(&args);
            assert_eq!(c1, 0, "{args:?}");
            assert_eq!(c1, c2);
            assert!(!o1.is_empty());
            assert_eq!(o1, o2, "{args:?}");
        }
    }
}

#[test]
fn cli_exit_codes() {
    let p = fixtures_dir().join("sb.prog");
    let p = p.to_str().unwrap();
    let pred = "P1.r1 = 0 && P2.r2 = 0";
    assert_eq!(specsim(&["--model", "sc", "check", p, "--reach", pred]).0, 0);
    assert_eq!(specsim(&["--model", "tso", "check", p, "--reach", pred]).0, 1);
    assert_eq!(specsim(&["check", p, "--reach", "P1.nope = 0"]).0, 3);
}
