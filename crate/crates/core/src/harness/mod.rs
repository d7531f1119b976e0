//! Differential testing of the two evaluators.

pub mod gen;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use gen::{gen_welltyped, GenConfig, GenError, GeneratedProgram, Target};

use crate::ordinary::run_observed;
use crate::outcome::{Observation, Outcome, OutcomeKind};
use crate::program::{load, LoadOptions, Program};
use crate::pure::{run_pure, PureOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Agree,
    Disagree,
    /// Neither agreement nor a contradiction: one side ran out of fuel, or
    /// both hit the same blackhole.
    Inconclusive,
}

impl Verdict {
    pub fn of(ordinary: &Outcome<Observation>, pure: &Outcome<Observation>) -> Verdict {
        match (ordinary, pure) {
            (Outcome::Value(a), Outcome::Value(b)) if a == b => Verdict::Agree,
            (Outcome::OutOfFuel, Outcome::OutOfFuel) => Verdict::Agree,
            (Outcome::OutOfFuel, _) | (_, Outcome::OutOfFuel) => Verdict::Inconclusive,
            (Outcome::Blackhole(_), Outcome::Blackhole(_)) => Verdict::Inconclusive,
            _ => Verdict::Disagree,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Agree => "agree",
            Verdict::Disagree => "disagree",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug)]
pub struct DiffReport {
    pub id: String,
    pub ordinary: Outcome<Observation>,
    pub pure: Outcome<Observation>,
    pub verdict: Verdict,
    pub fuel: u64,
    pub ordinary_steps: u64,
    pub pure_steps: u64,
}

impl fmt::Display for DiffReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |o: &Outcome<Observation>| match o {
            Outcome::Value(v) => v.to_string(),
            Outcome::Blocked(s) => format!("blocked: {}", s),
            other => other.kind().label().to_string(),
        };
        write!(
            f,
            "{}: {} (ordinary {} in {} steps, pure {} in {} steps)",
            self.id,
            self.verdict,
            show(&self.ordinary),
            self.ordinary_steps,
            show(&self.pure),
            self.pure_steps
        )
    }
}

/// Runs a loaded program under both semantics and compares the fully
/// forced results.
pub fn bisim_run(id: &str, program: &Program, fuel: u64) -> DiffReport {
    let ord = run_observed(&program.term, &program.ty, &program.decls, fuel, false);
    let pure = run_pure(
        &program.term,
        &program.ty,
        &program.decls,
        fuel,
        PureOptions::default(),
    );
    DiffReport {
        id: id.to_string(),
        verdict: Verdict::of(&ord.outcome, &pure.outcome),
        ordinary: ord.outcome,
        pure: pure.outcome,
        fuel,
        ordinary_steps: ord.stats.steps,
        pure_steps: pure.stats.steps,
    }
}

#[derive(Clone, Debug)]
pub struct FuzzConfig {
    pub gen: GenConfig,
    pub count: u64,
    pub fuel: u64,
    /// Where offending programs are written. `None` keeps them in memory
    /// only.
    pub reproducer_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FuzzError {
    NoPrograms,
    Config(GenError),
}

impl fmt::Display for FuzzError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FuzzError::NoPrograms => f.write_str("fuzz count must be at least 1"),
            FuzzError::Config(e) => write!(f, "{}", e),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuzzFailure {
    pub index: u64,
    pub kinds: Vec<&'static str>,
    pub detail: String,
    pub source: String,
    pub reproducer: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FuzzSummary {
    pub programs: u64,
    pub generation_failures: u64,
    /// Generated programs that did not load back from their printed form.
    pub reload_failures: u64,
    pub progress_violations: u64,
    pub preservation_violations: u64,
    pub disagreements: u64,
    pub blackholes: u64,
    pub fuel_outs: u64,
    pub state_checks: u64,
    pub ordinary_steps: u64,
    pub pure_steps: u64,
    pub failures: Vec<FuzzFailure>,
}

impl FuzzSummary {
    pub fn merge(mut self, other: FuzzSummary) -> FuzzSummary {
        self.programs += other.programs;
        self.generation_failures += other.generation_failures;
        self.reload_failures += other.reload_failures;
        self.progress_violations += other.progress_violations;
        self.preservation_violations += other.preservation_violations;
        self.disagreements += other.disagreements;
        self.blackholes += other.blackholes;
        self.fuel_outs += other.fuel_outs;
        self.state_checks += other.state_checks;
        self.ordinary_steps += other.ordinary_steps;
        self.pure_steps += other.pure_steps;
        self.failures.extend(other.failures);
        self
    }

    pub fn violations(&self) -> u64 {
        self.reload_failures
            + self.progress_violations
            + self.preservation_violations
            + self.disagreements
    }

    pub fn is_clean(&self) -> bool {
        self.violations() == 0
    }

    /// Named counters in display order.
    pub fn rows(&self) -> [(&'static str, u64); 11] {
        [
            ("programs", self.programs),
            ("generation failures", self.generation_failures),
            ("reload failures", self.reload_failures),
            ("progress violations", self.progress_violations),
            ("preservation violations", self.preservation_violations),
            ("disagreements", self.disagreements),
            ("blackholes", self.blackholes),
            ("fuel-outs", self.fuel_outs),
            ("state checks", self.state_checks),
            ("ordinary steps", self.ordinary_steps),
            ("pure steps", self.pure_steps),
        ]
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.rows() {
            s.push_str(&format!("{:<24} {:>10}\n", k, v));
        }
        for f in &self.failures {
            s.push_str(&format!("program {}: {}", f.index, f.kinds.join(", ")));
            if let Some(p) = &f.reproducer {
                s.push_str(&format!(" ({})", p.display()));
            }
            s.push('\n');
        }
        s
    }
}

struct Runs {
    ordinary: Outcome<Observation>,
    pure: Outcome<Observation>,
    ordinary_steps: u64,
    pure_steps: u64,
    checks: u64,
    preservation: Option<String>,
}

fn run_both(p: &Program, fuel: u64) -> Runs {
    let ord = run_observed(&p.term, &p.ty, &p.decls, fuel, false);
    let opts = PureOptions {
        trace: false,
        check_states: true,
    };
    let pure = run_pure(&p.term, &p.ty, &p.decls, fuel, opts);
    let preservation = if !pure.precondition {
        Some("initial state is not well typed".to_string())
    } else {
        pure.failures
            .first()
            .map(|f| format!("step {} ({}): {}", f.step, f.rule, f.message))
    };
    Runs {
        ordinary: ord.outcome,
        pure: pure.outcome,
        ordinary_steps: ord.stats.steps,
        pure_steps: pure.stats.steps,
        checks: pure.stats.state_checks,
        preservation,
    }
}

fn fuzz_one(cfg: &FuzzConfig, index: u64) -> FuzzSummary {
    let mut s = FuzzSummary {
        programs: 1,
        ..FuzzSummary::default()
    };
    let generated = match gen_welltyped(&cfg.gen, index) {
        Ok(g) => g,
        Err(_) => {
            s.generation_failures = 1;
            return s;
        }
    };
    let mut kinds = Vec::new();
    let mut detail = String::new();
    match load(&generated.text, &LoadOptions::default()) {
        Err(e) => {
            s.reload_failures = 1;
            kinds.push("reload");
            detail = e.to_string();
        }
        Ok(p) => {
            let mut r = run_both(&p, cfg.fuel);
            if matches!(r.ordinary, Outcome::OutOfFuel) || matches!(r.pure, Outcome::OutOfFuel) {
                r = run_both(&p, cfg.fuel.saturating_mul(2));
            }
            s.state_checks = r.checks;
            s.ordinary_steps = r.ordinary_steps;
            s.pure_steps = r.pure_steps;
            let kinds_of = [r.ordinary.kind(), r.pure.kind()];
            if kinds_of.contains(&OutcomeKind::Blocked) {
                s.progress_violations = 1;
                kinds.push("progress");
            }
            if let Some(msg) = &r.preservation {
                s.preservation_violations = 1;
                kinds.push("preservation");
                detail = msg.clone();
            }
            if Verdict::of(&r.ordinary, &r.pure) == Verdict::Disagree {
                s.disagreements = 1;
                kinds.push("disagreement");
            }
            if kinds_of.contains(&OutcomeKind::Blackhole) {
                s.blackholes = 1;
            }
            if kinds_of.contains(&OutcomeKind::OutOfFuel) {
                s.fuel_outs = 1;
            }
            if !kinds.is_empty() && detail.is_empty() {
                detail = format!("ordinary: {:?}\npure: {:?}", r.ordinary, r.pure);
            }
        }
    }
    if !kinds.is_empty() {
        let reproducer = cfg.reproducer_dir.as_deref().and_then(|dir| {
            write_reproducer(dir, cfg.gen.seed, index, &kinds, &detail, &generated.text)
        });
        s.failures.push(FuzzFailure {
            index,
            kinds,
            detail,
            source: generated.text,
            reproducer,
        });
    }
    s
}

fn write_reproducer(
    dir: &Path,
    seed: u64,
    index: u64,
    kinds: &[&str],
    detail: &str,
    text: &str,
) -> Option<PathBuf> {
    fs::create_dir_all(dir).ok()?;
    let path = dir.join(format!("fuzz-{}-{}.lq", seed, index));
    let mut body = format!("-- seed {} index {}: {}\n", seed, index, kinds.join(", "));
    for line in detail.lines() {
        body.push_str(&format!("-- {}\n", line));
    }
    body.push_str(text);
    fs::write(&path, body).ok()?;
    Some(path)
}

/// Generates and checks `cfg.count` programs in parallel.
pub fn fuzz(cfg: &FuzzConfig) -> Result<FuzzSummary, FuzzError> {
    if cfg.count == 0 {
        return Err(FuzzError::NoPrograms);
    }
    cfg.gen.validate().map_err(FuzzError::Config)?;
    let mut summary = (0..cfg.count)
        .into_par_iter()
        .map(|i| fuzz_one(cfg, i))
        .reduce(FuzzSummary::default, FuzzSummary::merge);
    summary.failures.sort_by_key(|f| f.index);
    Ok(summary)
}
