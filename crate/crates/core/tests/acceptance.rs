//! Acceptance run: one PASS/FAIL line per criterion, with wall-clock
//! limits. Exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use specsim::explorer::{check_reach, explore, final_values, replay, Settings};
use specsim::laws::law_suite;
use specsim::model::MemoryModel;
use specsim::scenarios::{builtin, fixtures_dir, litmus_sb, spectre_v1, spectre_v1_fenced, worked_example};
use specsim::semantics::{terminated, SpecMode};
use specsim::syntax::{parse, parse_predicate};

type Check = Result<String, String>;

fn sc(mode: SpecMode) -> Settings {
    Settings::new(MemoryModel::sc(), mode)
}

fn labels(t: &[specsim::explorer::TraceLabel]) -> Vec<String> {
    t.iter().map(|l| l.to_string()).collect()
}

fn worked() -> Check {
    let s = worked_example();
    let sys = &s.system;
    let off = explore(sys, &sc(SpecMode::Off)).map_err(|e| e.to_string())?;
    let wrong = explore(sys, &sc(SpecMode::WrongBranch)).map_err(|e| e.to_string())?;
    let base = off.behaviours.iter().next().ok_or("no Off run")?;
    if off.behaviours.len() != 1 {
        return Err(format!("{} Off behaviours", off.behaviours.len()));
    }
    let z = sys.layout.address(&"z".into(), None).map_err(|e| e.to_string())?;
    let mut cache = base.finals.mem.cache().clone();
    cache.insert(z);
    let mut want = vec!["P1: fetch z".to_string()];
    want.extend(labels(&base.trace));
    let hit = wrong.behaviours.iter().find(|b| {
        labels(&b.trace) == want
            && final_values(sys, &b.finals) == final_values(sys, &base.finals)
            && *b.finals.mem.cache() == cache
    });
    match hit {
        Some(b) => Ok(format!("trace {:?}", labels(&b.trace))),
        None => Err(format!("no matching trace among {:?}", wrong.traces())),
    }
}

fn laws() -> Check {
    let mut summary = Vec::new();
    for model in [MemoryModel::sc(), MemoryModel::tso()] {
        let report = law_suite(&Settings::new(model, SpecMode::WrongBranch), 100, 1).map_err(|e| e.to_string())?;
        for r in &report.results {
            if let Some(why) = r.not_applicable {
                return Err(format!("{} not applicable under {}: {why}", r.law, model.name()));
            }
            if let Some(c) = r.failures.first() {
                return Err(format!(
                    "{} under {}: {} vs {}: {}",
                    r.law,
                    model.name(),
                    c.abstract_,
                    c.concrete,
                    c.reason
                ));
            }
            if r.checked < 100 {
                return Err(format!(
                    "{} under {}: only {} instances",
                    r.law,
                    model.name(),
                    r.checked
                ));
            }
        }
        let n: usize = report.results.iter().map(|r| r.checked).sum();
        summary.push(format!("{} {n} instances", model.name()));
    }
    Ok(summary.join(", "))
}

fn spectre_one(d: i64) -> Check {
    let wrong = sc(SpecMode::WrongBranch);
    let s = spectre_v1(8, d, 4).map_err(|e| e.to_string())?;
    let pred = parse_predicate(&s.system, &format!("atk.r = {d}")).map_err(|e| e.to_string())?;
    let v = check_reach(&s.system, &pred, &wrong).map_err(|e| e.to_string())?;
    let w = v.witness().ok_or(format!("no witness for D = {d}"))?;
    let t = labels(&w.trace);
    let at = |l: &str| t.iter().position(|x| x == l);
    let guard = at("V: [!(4 < 4)]").ok_or("no failed bounds guard")?;
    let (fa, fb) = (at("V: fetch A[4]"), at(&format!("V: fetch B[{d}]")));
    if !matches!((fa, fb), (Some(a), Some(b)) if a < guard && b < guard) {
        return Err(format!("fetches not before the guard: {t:?}"));
    }
    if !check_reach(&s.system, &pred, &sc(SpecMode::Off))
        .map_err(|e| e.to_string())?
        .holds()
    {
        return Err(format!("Off mode leaks D = {d}"));
    }
    let f = spectre_v1_fenced(8, d, 4).map_err(|e| e.to_string())?;
    if !check_reach(&f.system, &pred, &wrong)
        .map_err(|e| e.to_string())?
        .holds()
    {
        return Err(format!("fenced variant leaks D = {d}"));
    }
    Ok(String::new())
}

fn transparency() -> Check {
    let mut r = rng(2024);
    let (mut n, mut speculated) = (0, 0);
    for model in [MemoryModel::sc(), MemoryModel::tso()] {
        for _ in 0..200 {
            let src = random_spec_program(&mut r);
            let sys = parse(&src).map_err(|e| format!("{e}\n{src}"))?;
            let wrong = engine_behaviours(&sys, &Settings::new(model, SpecMode::WrongBranch));
            let off = engine_behaviours(&sys, &Settings::new(model, SpecMode::Off));
            let erase = |b: &Behaviours| b.iter().map(|(t, _)| t.clone()).collect::<BTreeSet<_>>();
            if erase(&without_fetches(&wrong)) != erase(&off) {
                return Err(format!("{}: trace sets differ for\n{src}", model.name()));
            }
            speculated += usize::from(wrong != off);
            n += 1;
        }
    }
    Ok(format!("{n} programs, {speculated} with speculative fetches"))
}

fn baseline() -> Check {
    let mut r = rng(99);
    let settings = sc(SpecMode::Off);
    let n = 500;
    for _ in 0..n {
        let p = random_oprog(&mut r, 6, 2, true);
        let sys = parse(&p.render()).map_err(|e| e.to_string())?;
        let got: BTreeSet<Vec<String>> = engine_behaviours(&sys, &settings).into_iter().map(|(t, _)| t).collect();
        let want: BTreeSet<Vec<String>> = sc_oracle(&p).into_iter().map(|(t, _)| t).collect();
        if got != want {
            return Err(format!("trace sets differ for\n{}", p.render()));
        }
    }
    let sb = litmus_sb();
    let pred = parse_predicate(&sb.system, "P1.r1 = 0 && P2.r2 = 0").map_err(|e| e.to_string())?;
    let under = |m| check_reach(&sb.system, &pred, &Settings::new(m, SpecMode::Off)).map_err(|e| e.to_string());
    if !under(MemoryModel::sc())?.holds() {
        return Err("SB r1=r2=0 reachable under SC".into());
    }
    if under(MemoryModel::tso())?.witness().is_none() {
        return Err("SB r1=r2=0 unreachable under TSO".into());
    }
    Ok(format!("{n} programs; SB r1=r2=0 SC no, TSO yes"))
}

fn determinism() -> Check {
    let mut witnesses = 0;
    for s in builtin() {
        for e in &s.expected {
            let settings = Settings::new(e.model, e.mode);
            let pred = parse_predicate(&s.system, &e.predicate).map_err(|e| e.to_string())?;
            let v = check_reach(&s.system, &pred, &settings).map_err(|e| e.to_string())?;
            let Some(w) = v.witness() else { continue };
            match replay(&s.system, &w.trace, &settings).map_err(|e| e.to_string())? {
                Some(cfg) if terminated(&cfg) => witnesses += 1,
                _ => return Err(format!("{} witness for {} does not replay", s.name, e.predicate)),
            }
        }
    }
    let bin = env!("CARGO_BIN_EXE_specsim");
    let mut runs = 0;
    for f in ["spectre.prog", "sb.prog", "worked_example.prog"] {
        let path = fixtures_dir().join(f);
        let path = path.to_str().unwrap();
        for args in [
            vec!["--format", "jsonl", "--model", "tso", "explore", path],
            vec!["--format", "jsonl", "--jobs", "4", "explore", path],
            vec!["--format", "jsonl", "--seed", "3", "run", path],
        ] {
            let out = || {
                Command::new(bin)
                    .args(&args)
                    .output()
                    .map(|o| o.stdout)
                    .map_err(|e| e.to_string())
            };
            let (a, b) = (out()?, out()?);
            if a.is_empty() || a != b {
                return Err(format!("jsonl differs for {args:?}"));
            }
            runs += 1;
        }
    }
    Ok(format!("{witnesses} witnesses replayed, {runs} jsonl runs identical"))
}

fn report(n: usize, name: &str, limit: Duration, f: impl FnOnce() -> Check) -> bool {
    let t = Instant::now();
    let res = f();
    let took = t.elapsed();
    let (ok, detail) = match res {
        Ok(_) if took > limit => (false, format!("took {took:.2?}, limit {limit:?}")),
        Ok(d) => (true, d),
        Err(e) => (false, e),
    };
    println!(
        "criterion {n} {}: {name} ({took:.2?}) {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

fn main() {
    let mut ok = true;
    ok &= report(1, "worked example", Duration::from_secs(1), worked);
    ok &= report(2, "law suite", Duration::from_secs(60), laws);
    ok &= report(3, "spectre end to end", Duration::from_secs(60 * 8), || {
        let mut worst = Duration::ZERO;
        for d in 0..8 {
            let t = Instant::now();
            spectre_one(d)?;
            worst = worst.max(t.elapsed());
        }
        if worst > Duration::from_secs(60) {
            return Err(format!("slowest secret took {worst:.2?}"));
        }
        Ok(format!("D = 0..7, slowest {worst:.2?}"))
    });
    ok &= report(4, "speculation transparency", Duration::from_secs(300), transparency);
    ok &= report(5, "SC baseline", Duration::MAX, baseline);
    ok &= report(6, "determinism and replay", Duration::MAX, determinism);
    if !ok {
        std::process::exit(1);
    }
}
