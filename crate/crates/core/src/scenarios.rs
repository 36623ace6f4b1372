//! Built-in fixtures: the speculative-conditional worked example, the
//! Spectre v1 bounds-check bypass, and the store-buffering litmus test.
//!
//! Each scenario is generated as program text and parsed, so the shipped
//! files under `fixtures/` are exactly what the constructors produce.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::lang::Value;
use crate::model::MemoryModel;
use crate::semantics::{SpecMode, System};
use crate::syntax::{parse, ParseError};

/// Length of the victim's public array `A`.
pub const VICTIM_ARRAY_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expectation {
    pub model: MemoryModel,
    pub mode: SpecMode,
    pub predicate: String,
    /// Whether some terminating run satisfies the predicate.
    pub reachable: bool,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub source: String,
    pub system: System,
    /// Globals holding secret data.
    pub secrets: Vec<String>,
    pub expected: Vec<Expectation>,
    pub notes: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("probe array needs at least 2 entries, got {0}")]
    ProbeTooSmall(usize),
    #[error("secret {secret} is not a valid probe index (0..{size})")]
    SecretOutOfRange { secret: Value, size: usize },
    #[error("chi = {0} is within A's bounds; the attack needs an out-of-bounds index (>= {VICTIM_ARRAY_LEN})")]
    ChiInBounds(usize),
    #[error("generated program does not parse: {0}")]
    Parse(#[from] ParseError),
}

fn expect(model: MemoryModel, mode: SpecMode, predicate: &str, reachable: bool) -> Expectation {
    Expectation {
        model,
        mode,
        predicate: predicate.to_string(),
        reachable,
    }
}

/// How the attacker is scheduled relative to the victim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectreVariant {
    /// Attacker probes after the victim signals completion.
    Sequential,
    /// Same, with a fence at the head of the victim's bounds-checked branch.
    Fenced,
    /// No handshake: attacker and victim run fully in parallel.
    Parallel,
}

fn spectre_source(array_size: usize, secret: Value, chi: usize, variant: SpectreVariant) -> String {
    let mut a: Vec<String> = (1..=VICTIM_ARRAY_LEN).map(|v| v.to_string()).collect();
    a.resize(chi, "0".to_string());
    a.push(secret.to_string());
    let fence = if variant == SpectreVariant::Fenced {
        "fence ; "
    } else {
        ""
    };
    let handshake = if variant == SpectreVariant::Parallel {
        ""
    } else {
        "[done = 1] ;; "
    };
    let mut s = String::new();
    let header = match variant {
        SpectreVariant::Sequential => "# Spectre v1: the victim's bounds check is speculated past with an\n# out-of-bounds index, leaking A[chi] into the cache through B.\n",
        SpectreVariant::Fenced => "# Spectre v1 with a fence at the head of the bounds-checked branch.\n",
        SpectreVariant::Parallel => "# Spectre v1 without the completion handshake (experimental).\n",
    };
    s.push_str(header);
    writeln!(
        s,
        "globals {{\n  A[{VICTIM_ARRAY_LEN}] = [{}]\n  alias k = A[{chi}]\n  B[{array_size}]\n  done = 0\n}}",
        a.join(", ")
    )
    .expect("writing to a string");
    writeln!(
        s,
        "\nprocess V {{\n  locals {{ r1 = 0, n = 0, r2 = 0, r3 = 0 }}\n  code {{\n    flush ; r1 := {chi} ; n := {VICTIM_ARRAY_LEN} ;\n    if r1 < n then {fence}r2 := A[r1] ; r3 := B[r2] else skip fi ;\n    done := 1\n  }}\n}}"
    )
    .expect("writing to a string");
    writeln!(
        s,
        "\nprocess atk {{\n  locals {{ r = -1, i = 0 }}\n  code {{\n    {handshake}i := 0 ;\n    while i < {array_size} do\n      if in_cache(B[i]) then r := i else skip fi ;\n      i := i + 1\n    od\n  }}\n}}"
    )
    .expect("writing to a string");
    s
}

fn spectre(array_size: usize, secret: Value, chi: usize, variant: SpectreVariant) -> Result<Scenario, ScenarioError> {
    if array_size < 2 {
        return Err(ScenarioError::ProbeTooSmall(array_size));
    }
    if secret < 0 || secret as usize >= array_size {
        return Err(ScenarioError::SecretOutOfRange {
            secret,
            size: array_size,
        });
    }
    if chi < VICTIM_ARRAY_LEN {
        return Err(ScenarioError::ChiInBounds(chi));
    }
    let source = spectre_source(array_size, secret, chi, variant);
    let system = parse(&source)?;
    let leak = format!("atk.r = {secret}");
    let sc = MemoryModel::sc();
    let (name, expected, notes) = match variant {
        SpectreVariant::Sequential => (
            "spectre",
            vec![
                expect(sc, SpecMode::WrongBranch, &leak, true),
                expect(sc, SpecMode::Off, &leak, false),
                expect(MemoryModel::tso(), SpecMode::WrongBranch, &leak, true),
            ],
            "flush ; V(chi) ; Atk with a completion flag ordering the attacker after the victim",
        ),
        SpectreVariant::Fenced => (
            "spectre_fenced",
            vec![
                expect(sc, SpecMode::WrongBranch, &leak, false),
                expect(sc, SpecMode::Off, &leak, false),
            ],
            "speculation of the bounds-checked branch is blocked by the fence",
        ),
        SpectreVariant::Parallel => (
            "spectre_parallel",
            vec![expect(sc, SpecMode::Off, &leak, false)],
            "experimental: the attacker may probe before, during or after the victim",
        ),
    };
    Ok(Scenario {
        name: name.to_string(),
        source,
        system,
        secrets: vec!["k".to_string()],
        expected,
        notes,
    })
}

/// Bounds-check bypass with probe array `B[array_size]`, secret value
/// `secret` stored at the out-of-bounds cell `A[chi]` (aliased as `k`).
pub fn spectre_v1(array_size: usize, secret: Value, chi: usize) -> Result<Scenario, ScenarioError> {
    spectre(array_size, secret, chi, SpectreVariant::Sequential)
}

pub fn spectre_v1_fenced(array_size: usize, secret: Value, chi: usize) -> Result<Scenario, ScenarioError> {
    spectre(array_size, secret, chi, SpectreVariant::Fenced)
}

pub fn spectre_v1_parallel(array_size: usize, secret: Value, chi: usize) -> Result<Scenario, ScenarioError> {
    spectre(array_size, secret, chi, SpectreVariant::Parallel)
}

const WORKED_EXAMPLE: &str = "\
# A conditional whose true branch writes x and r1 and loads z.
# With b = 0 the false branch runs, but speculating the true branch
# leaves z in the cache.
globals {
  x = 0
  y = 0
  z = 42
  b = 0
}

process P1 {
  locals { r1 = 0, r2 = 0 }
  code {
    if b then x := 1 ; r1 := 2 ; r2 := z else y := 7 fi
  }
}
";

pub fn worked_example() -> Scenario {
    let system = parse(WORKED_EXAMPLE).expect("built-in fixture parses");
    let sc = MemoryModel::sc();
    Scenario {
        name: "worked_example".to_string(),
        source: WORKED_EXAMPLE.to_string(),
        system,
        secrets: Vec::new(),
        expected: vec![
            expect(
                sc,
                SpecMode::WrongBranch,
                "y = 7 && x = 0 && P1.r1 = 0 && P1.r2 = 0",
                true,
            ),
            expect(sc, SpecMode::WrongBranch, "in_cache(z)", true),
            expect(sc, SpecMode::Off, "in_cache(z)", false),
        ],
        notes: "the speculated true branch is discarded except for its cache fetch of z",
    }
}

const LITMUS_SB: &str = "\
# Store buffering: each process stores to one variable and loads the other.
globals {
  x = 0
  y = 0
}

process P1 {
  locals { r1 = 0 }
  code { x := 1 ; r1 := y }
}

process P2 {
  locals { r2 = 0 }
  code { y := 1 ; r2 := x }
}
";

pub fn litmus_sb() -> Scenario {
    let system = parse(LITMUS_SB).expect("built-in fixture parses");
    let both_zero = "P1.r1 = 0 && P2.r2 = 0";
    let both_one = "P1.r1 = 1 && P2.r2 = 1";
    let (sc, tso) = (MemoryModel::sc(), MemoryModel::tso());
    Scenario {
        name: "sb".to_string(),
        source: LITMUS_SB.to_string(),
        system,
        secrets: Vec::new(),
        expected: vec![
            expect(sc, SpecMode::Off, both_zero, false),
            expect(tso, SpecMode::Off, both_zero, true),
            expect(sc, SpecMode::Off, both_one, true),
            expect(tso, SpecMode::Off, both_one, true),
        ],
        notes: "r1 = r2 = 0 needs a load to overtake an earlier store",
    }
}

/// Parameters of the shipped Spectre fixtures.
pub const SPECTRE_PROBE_SIZE: usize = 8;
pub const SPECTRE_SECRET: Value = 5;
pub const SPECTRE_CHI: usize = 4;

/// Every scenario shipped under `fixtures/`, keyed by file stem.
pub fn builtin() -> Vec<Scenario> {
    let (n, d, chi) = (SPECTRE_PROBE_SIZE, SPECTRE_SECRET, SPECTRE_CHI);
    vec![
        worked_example(),
        litmus_sb(),
        spectre_v1(n, d, chi).expect("valid parameters"),
        spectre_v1_fenced(n, d, chi).expect("valid parameters"),
        spectre_v1_parallel(n, d, chi).expect("valid parameters"),
    ]
}

/// Directory holding the shipped program files.
pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}
