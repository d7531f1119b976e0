use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use lq_core::harness::{fuzz, FuzzConfig, FuzzSummary, GenConfig, Verdict};
use lq_core::ordinary::run_observed;
use lq_core::outcome::{Observation, Outcome, TraceRecord};
use lq_core::pretty::type_to_string;
use lq_core::program::{load, LoadError, LoadOptions, Program, PRELUDE};
use lq_core::pure::{run_pure, PureOptions};

const USAGE_ERROR: u8 = 2;

#[derive(Parser)]
#[command(
    name = "lq",
    version,
    about = "Check and run programs in a linear lambda calculus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Type check a program.
    Check {
        file: PathBuf,
        #[arg(long)]
        no_prelude: bool,
    },
    /// Evaluate a program and print its value.
    Run {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Sem::Ordinary)]
        sem: Sem,
        #[arg(long, default_value_t = 100_000)]
        fuel: u64,
        /// Print every rule application.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        json: bool,
        /// Check the program without enforcing linearity, then run it anyway.
        #[arg(long)]
        no_typecheck: bool,
        #[arg(long)]
        no_prelude: bool,
    },
    /// Run both evaluators on random well-typed programs.
    Fuzz {
        #[arg(long, default_value_t = 100)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        fuel: u64,
        #[arg(long, default_value_t = GenConfig::default().max_depth)]
        depth: u32,
        /// Chance of an array block at each generation step.
        #[arg(long, default_value_t = GenConfig::default().array_prob)]
        arrays: f64,
        /// Directory for programs that expose a violation.
        #[arg(long, default_value = "fuzz-failures")]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Sem {
    Ordinary,
    Pure,
    Both,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Check { file, no_prelude } => check(&file, no_prelude),
        Command::Run {
            file,
            sem,
            fuel,
            trace,
            json,
            no_typecheck,
            no_prelude,
        } => run(&file, sem, fuel, trace, json, no_typecheck, no_prelude),
        Command::Fuzz {
            count,
            seed,
            fuel,
            depth,
            arrays,
            out,
            json,
        } => {
            let cfg = FuzzConfig {
                gen: GenConfig {
                    seed,
                    max_depth: depth,
                    array_prob: arrays,
                    ..GenConfig::default()
                },
                count,
                fuel,
                reproducer_dir: Some(out),
            };
            run_fuzz(&cfg, json)
        }
    }
}

fn prelude_text(no_prelude: bool) -> Result<Option<String>, ExitCode> {
    if no_prelude {
        return Ok(None);
    }
    match std::env::var_os("LLQ_PRELUDE") {
        Some(path) => fs::read_to_string(&path).map(Some).map_err(|e| {
            eprintln!(
                "lq: cannot read prelude {}: {}",
                Path::new(&path).display(),
                e
            );
            ExitCode::from(USAGE_ERROR)
        }),
        None => Ok(Some(PRELUDE.to_string())),
    }
}

fn read(file: &Path) -> Result<String, ExitCode> {
    fs::read_to_string(file).map_err(|e| {
        eprintln!("lq: cannot read {}: {}", file.display(), e);
        ExitCode::from(USAGE_ERROR)
    })
}

fn report(file: &Path, err: &LoadError) {
    match err {
        LoadError::Parse {
            file: "input",
            error,
        } => eprintln!("{}:{}", file.display(), error),
        other => eprintln!("{}: {}", file.display(), other),
    }
}

fn load_file(file: &Path, no_prelude: bool, lenient: bool) -> Result<Program, ExitCode> {
    let prelude = prelude_text(no_prelude)?;
    let src = read(file)?;
    let opts = LoadOptions {
        prelude: prelude.as_deref(),
        lenient,
    };
    load(&src, &opts).map_err(|e| {
        report(file, &e);
        ExitCode::FAILURE
    })
}

fn check(file: &Path, no_prelude: bool) -> ExitCode {
    match load_file(file, no_prelude, false) {
        Ok(p) => {
            println!("main : {}", type_to_string(&p.ty));
            ExitCode::SUCCESS
        }
        Err(code) => code,
    }
}

struct Ran {
    semantics: &'static str,
    outcome: Outcome<Observation>,
    steps: u64,
    trace: Vec<TraceRecord>,
}

fn shown(o: &Outcome<Observation>) -> String {
    match o {
        Outcome::Value(v) => v.to_string(),
        Outcome::Blocked(s) => format!("blocked: {}", s),
        Outcome::OutOfFuel => "out of fuel".to_string(),
        Outcome::Blackhole(x) => format!("blackhole: `{}` depends on itself", x),
    }
}

fn to_json(r: &Ran, with_trace: bool) -> Value {
    let mut v = json!({
        "outcome": r.outcome.kind().label(),
        "steps": r.steps,
        "semantics": r.semantics,
    });
    match &r.outcome {
        Outcome::Value(o) => v["value"] = json!(o.to_string()),
        Outcome::Blocked(s) => v["value"] = json!(s.to_string()),
        _ => {}
    }
    if with_trace {
        v["trace"] = r
            .trace
            .iter()
            .map(|t| json!({"rule": t.rule, "redex": t.redex}))
            .collect();
    }
    v
}

fn run(
    file: &Path,
    sem: Sem,
    fuel: u64,
    trace: bool,
    json: bool,
    no_typecheck: bool,
    no_prelude: bool,
) -> ExitCode {
    let p = match load_file(file, no_prelude, no_typecheck) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let mut runs = Vec::new();
    if sem != Sem::Pure {
        let r = run_observed(&p.term, &p.ty, &p.decls, fuel, trace);
        runs.push(Ran {
            semantics: "ordinary",
            outcome: r.outcome,
            steps: r.stats.steps,
            trace: r.trace,
        });
    }
    if sem != Sem::Ordinary {
        let opts = PureOptions {
            trace,
            check_states: false,
        };
        let r = run_pure(&p.term, &p.ty, &p.decls, fuel, opts);
        runs.push(Ran {
            semantics: "pure",
            outcome: r.outcome,
            steps: r.stats.steps,
            trace: r.trace,
        });
    }
    let agree = match runs.as_slice() {
        [a, b] => Verdict::of(&a.outcome, &b.outcome) != Verdict::Disagree,
        _ => true,
    };
    if json {
        for r in &runs {
            println!("{}", to_json(r, trace));
        }
    } else {
        for r in &runs {
            if trace {
                for t in &r.trace {
                    println!("[{}] {:<16} {}", r.semantics, t.rule, t.redex);
                }
            }
        }
        if runs.len() == 1 || (agree && runs[0].outcome == runs[1].outcome) {
            println!("{}", shown(&runs[0].outcome));
        } else {
            for r in &runs {
                println!("{}: {}", r.semantics, shown(&r.outcome));
            }
        }
    }
    if !agree {
        eprintln!("lq: the two semantics disagree");
        return ExitCode::FAILURE;
    }
    if runs.iter().all(|r| matches!(r.outcome, Outcome::Value(_))) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn summary_json(s: &FuzzSummary) -> Value {
    let mut v = json!({});
    for (k, n) in s.rows() {
        v[k.replace([' ', '-'], "_")] = json!(n);
    }
    v["failures"] = s
        .failures
        .iter()
        .map(|f| {
            json!({
                "index": f.index,
                "kinds": f.kinds,
                "detail": f.detail,
                "reproducer": f.reproducer.as_ref().map(|p| p.display().to_string()),
            })
        })
        .collect();
    v
}

fn run_fuzz(cfg: &FuzzConfig, json: bool) -> ExitCode {
    let s = match fuzz(cfg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("lq: {}", e);
            return ExitCode::from(USAGE_ERROR);
        }
    };
    if json {
        println!("{}", summary_json(&s));
    } else {
        print!("{}", s.table());
    }
    if s.is_clean() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
