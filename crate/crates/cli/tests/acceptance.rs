//! Acceptance checks. Runs without the default test harness so that every
//! criterion prints exactly one PASS or FAIL line.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lq_core::corpus::{self, Expectation, CORPUS};
use lq_core::harness::{bisim_run, fuzz, gen_welltyped, FuzzConfig, GenConfig, Verdict};
use lq_core::mult::{mult_normalize, sub_usage, MultExpr, UsageMult};
use lq_core::name::Name;
use lq_core::ordinary::run_observed;
use lq_core::outcome::{Observation, Outcome};
use lq_core::program::{check_source, load, LoadError, LoadOptions, PRELUDE};
use lq_core::pure::{run_pure, PureOptions};
use lq_core::syntax::{DeclTable, Term, Type};
use lq_core::typecheck::{infer_type, DiagnosticKind, TypeEnv};
use lq_core::usage::Usage;

const FUEL: u64 = 100_000;

type Check = Result<String, String>;

type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn source(name: &str) -> &'static str {
    corpus::get(name)
        .unwrap_or_else(|| panic!("no corpus program {}", name))
        .source
}

enum Want {
    Accept,
    Reject,
}

fn verdict_table() -> Check {
    let g_with_linear_f = "
def f : Int -o Int =[w] \\[1] y : Int . add(y, 1)
def g : Int -> Int =[w] \\[w] x : Int . f x
main = g 2
";
    let rows = [
        ("swap at a linear type", source("swap"), Want::Accept),
        ("fst under case[1]", source("fst_case1"), Want::Reject),
        ("fst under case[w]", source("fst_omega"), Want::Accept),
        ("f2 linear", source("f2_linear"), Want::Accept),
        ("f1 linear", source("f1_linear"), Want::Reject),
        ("f1 unrestricted", source("f1_omega"), Want::Accept),
        ("dup at a linear type", source("dup_linear"), Want::Reject),
        ("polymorphic identity", source("poly_id"), Want::Reject),
        ("g calls a linear f", g_with_linear_f, Want::Accept),
    ];
    let mut ok = 0;
    for (label, src, want) in &rows {
        let got = check_source(src, Some(PRELUDE));
        match (want, &got) {
            (Want::Accept, Ok(_)) => ok += 1,
            (Want::Reject, Err(LoadError::Rejected(d)))
                if d.iter()
                    .any(|d| d.kind == DiagnosticKind::LinearityMismatch) =>
            {
                ok += 1
            }
            _ => return Err(format!("{}: got {:?}", label, got)),
        }
    }

    // x :1 Int, y :w Int |- x : Int, and the same with y linear fails
    let decls = DeclTable::new();
    let fits = |y_mult: MultExpr| {
        let mut env = TypeEnv::new(&decls);
        env.bind(Name::new("x"), Type::Int, MultExpr::One);
        env.bind(Name::new("y"), Type::Int, y_mult.clone());
        let (ty, usage) = infer_type(&mut env, &Term::var("x")).expect("x is bound");
        ty == Type::Int
            && sub_usage(&usage.get("x"), &MultExpr::One)
            && sub_usage(&usage.get("y"), &y_mult)
    };
    ensure(fits(MultExpr::Omega), || "x:1, y:w |- x rejected".into())?;
    ensure(!fits(MultExpr::One), || "x:1, y:1 |- x accepted".into())?;
    Ok(format!(
        "{} of {} programs and both judgements as expected",
        ok,
        rows.len()
    ))
}

fn random_mult(rng: &mut ChaCha8Rng, depth: u32) -> MultExpr {
    if depth == 0 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..5) {
            0 => MultExpr::One,
            1 => MultExpr::Omega,
            2 => MultExpr::var("p"),
            3 => MultExpr::var("q"),
            _ => MultExpr::var("r"),
        };
    }
    let a = random_mult(rng, depth - 1);
    let b = random_mult(rng, depth - 1);
    if rng.gen_bool(0.5) {
        MultExpr::add(a, b)
    } else {
        MultExpr::mul(a, b)
    }
}

/// Value of a multiplicity with its variables fixed, `true` meaning ω.
fn count(e: &MultExpr, env: u8) -> bool {
    match e {
        MultExpr::One => false,
        MultExpr::Omega => true,
        MultExpr::Var(v) => env & (1 << (v.as_str().as_bytes()[0] - b'p')) != 0,
        MultExpr::Add(..) => true,
        MultExpr::Mul(a, b) => count(a, env) || count(b, env),
    }
}

fn multiplicity_algebra() -> Check {
    use MultExpr as M;
    let eq = |a: &M, b: &M| -> Result<(), String> {
        ensure(mult_normalize(a) == mult_normalize(b), || {
            format!("{} is not {}", a, b)
        })?;
        for env in 0..8 {
            ensure(count(a, env) == count(b, env), || {
                format!("{} and {} differ under assignment {:03b}", a, b, env)
            })?;
        }
        Ok(())
    };
    let usage = |x: &M, y: &M| {
        Usage::from_entries([
            (Name::new("x"), UsageMult::of(x)),
            (Name::new("y"), UsageMult::of(y)),
        ])
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let triples = 10_000;
    for _ in 0..triples {
        let a = random_mult(&mut rng, 3);
        let b = random_mult(&mut rng, 3);
        let c = random_mult(&mut rng, 3);
        eq(
            &M::add(a.clone(), M::add(b.clone(), c.clone())),
            &M::add(M::add(a.clone(), b.clone()), c.clone()),
        )?;
        eq(
            &M::mul(a.clone(), M::mul(b.clone(), c.clone())),
            &M::mul(M::mul(a.clone(), b.clone()), c.clone()),
        )?;
        eq(&M::add(a.clone(), b.clone()), &M::add(b.clone(), a.clone()))?;
        eq(&M::mul(a.clone(), b.clone()), &M::mul(b.clone(), a.clone()))?;
        eq(&M::mul(M::One, a.clone()), &a)?;
        eq(
            &M::mul(a.clone(), M::add(b.clone(), c.clone())),
            &M::add(M::mul(a.clone(), b.clone()), M::mul(a.clone(), c.clone())),
        )?;

        let g = usage(&a, &b);
        let d = usage(&c, &a);
        ensure(g.add(&d) == d.add(&g), || {
            "context addition does not commute".into()
        })?;
        ensure(g.add(&d).scale(&c) == g.scale(&c).add(&d.scale(&c)), || {
            format!("{} does not distribute over context addition", c)
        })?;
        ensure(
            g.scale(&M::add(b.clone(), c.clone())) == g.scale(&b).add(&g.scale(&c)),
            || format!("({} + {}) does not distribute over a context", b, c),
        )?;
        ensure(
            g.scale(&M::mul(b.clone(), c.clone())) == g.scale(&c).scale(&b),
            || format!("({} * {}) does not scale in two steps", b, c),
        )?;
        ensure(g.scale(&M::One) == g, || "1 does not fix a context".into())?;
    }
    for (a, b) in [
        (M::mul(M::Omega, M::Omega), M::Omega),
        (M::add(M::One, M::One), M::Omega),
        (M::add(M::One, M::Omega), M::Omega),
        (M::add(M::Omega, M::Omega), M::Omega),
    ] {
        eq(&a, &b)?;
    }
    let p_plus_q = M::add(M::var("p"), M::var("q"));
    let w_plus_wp = M::add(M::Omega, M::mul(M::Omega, M::var("p")));
    ensure(
        mult_normalize(&p_plus_q) != mult_normalize(&M::Omega),
        || "p + q equals w".into(),
    )?;
    ensure(
        mult_normalize(&w_plus_wp) != mult_normalize(&M::Omega),
        || "w + w*p equals w".into(),
    )?;
    Ok(format!(
        "{} triples, every law holds, both non-laws kept apart",
        triples
    ))
}

fn observational_equivalence() -> Check {
    let mut corpus_runs = 0;
    for e in CORPUS {
        let Expectation::Value(want) = e.expectation() else {
            continue;
        };
        let p = load(e.source, &LoadOptions::default())
            .map_err(|err| format!("{}: {}", e.name, err))?;
        let r = bisim_run(e.name, &p, FUEL);
        ensure(r.verdict == Verdict::Agree, || r.to_string())?;
        let got = r.ordinary.value().map(|v| v.to_string());
        ensure(got.as_deref() == Some(want.as_str()), || {
            format!("{}: expected {}, both gave {:?}", e.name, want, got)
        })?;
        corpus_runs += 1;
    }
    ensure(corpus_runs >= 25, || {
        format!("only {} corpus programs", corpus_runs)
    })?;
    let cfg = GenConfig {
        seed: 2026,
        ..GenConfig::default()
    };
    let generated = 200;
    for i in 0..generated {
        let g = gen_welltyped(&cfg, i).map_err(|e| format!("program {}: {}", i, e))?;
        let p =
            load(&g.text, &LoadOptions::default()).map_err(|e| format!("program {}: {}", i, e))?;
        let r = bisim_run(&format!("generated {}", i), &p, FUEL);
        ensure(r.verdict == Verdict::Agree, || format!("{}\n{}", r, g.text))?;
    }
    Ok(format!(
        "{} corpus and {} generated programs agree",
        corpus_runs, generated
    ))
}

fn progress() -> Check {
    let cfg = FuzzConfig {
        gen: GenConfig {
            seed: 1,
            ..GenConfig::default()
        },
        count: 1000,
        fuel: FUEL,
        reproducer_dir: None,
    };
    let s = fuzz(&cfg).map_err(|e| e.to_string())?;
    ensure(s.programs == 1000 && s.generation_failures == 0, || {
        s.table()
    })?;
    ensure(s.progress_violations == 0, || s.table())?;
    Ok(format!(
        "{} programs, 0 blocked ({} blackholes, {} fuel-outs excluded)",
        s.programs, s.blackholes, s.fuel_outs
    ))
}

fn preservation() -> Check {
    let opts = PureOptions {
        trace: false,
        check_states: true,
    };
    let mut checks = 0;
    let mut programs = 0;
    for e in CORPUS.iter().filter(|e| e.is_positive()) {
        let p = load(e.source, &LoadOptions::default())
            .map_err(|err| format!("{}: {}", e.name, err))?;
        let r = run_pure(&p.term, &p.ty, &p.decls, FUEL, opts);
        ensure(r.precondition, || {
            format!("{}: initial state ill typed", e.name)
        })?;
        ensure(r.failure_count == 0, || {
            format!("{}: {:?}", e.name, r.failures.first())
        })?;
        // a blackholed run stops inside rules that never complete
        let finished = matches!(r.outcome, Outcome::Value(_));
        ensure(!finished || r.stats.state_checks == r.stats.steps, || {
            format!(
                "{}: {} checks for {} rules",
                e.name, r.stats.state_checks, r.stats.steps
            )
        })?;
        checks += r.stats.state_checks;
        programs += 1;
    }
    ensure(checks >= 10_000, || format!("only {} state checks", checks))?;
    Ok(format!(
        "{} state checks over {} programs, 0 violations",
        checks, programs
    ))
}

fn typestate() -> Check {
    let src = source("write_after_freeze");
    match check_source(src, Some(PRELUDE)) {
        Err(LoadError::Rejected(_)) => {}
        other => return Err(format!("check accepted the program: {:?}", other)),
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let file = dir.path().join("write_after_freeze.lq");
    std::fs::write(&file, src).map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_lq");
    let check = Command::new(bin)
        .arg("check")
        .arg(&file)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(check.status.code() == Some(1), || {
        format!("lq check exited with {:?}", check.status)
    })?;
    let run = Command::new(bin)
        .args(["run", "--sem=ordinary", "--no-typecheck", "--json"])
        .arg(&file)
        .output()
        .map_err(|e| e.to_string())?;
    let v: serde_json::Value =
        serde_json::from_slice(&run.stdout).map_err(|e| format!("bad json: {}", e))?;
    ensure(v["outcome"] == "blocked", || format!("outcome was {}", v))?;
    let detail = v["value"].as_str().unwrap_or_default();
    ensure(detail.starts_with("TypestateViolation"), || {
        format!("blocked with {}", detail)
    })?;
    Ok("rejected by check, blocks with TypestateViolation when forced".into())
}

fn allocation() -> Check {
    let mut writes = 0;
    let mut programs = 0;
    for e in CORPUS
        .iter()
        .filter(|e| matches!(e.expectation(), Expectation::Value(_)))
    {
        let p = load(e.source, &LoadOptions::default())
            .map_err(|err| format!("{}: {}", e.name, err))?;
        let o = run_observed(&p.term, &p.ty, &p.decls, FUEL, false);
        let q = run_pure(&p.term, &p.ty, &p.decls, FUEL, PureOptions::default());
        ensure(o.stats.cells_allocated == o.stats.newmarray_calls, || {
            format!(
                "{}: {} cells for {} newMArray",
                e.name, o.stats.cells_allocated, o.stats.newmarray_calls
            )
        })?;
        ensure(
            q.stats.arrays_allocated == q.stats.newmarray_calls + q.stats.writes,
            || {
                format!(
                    "{}: {} arrays for {} newMArray and {} writes",
                    e.name, q.stats.arrays_allocated, q.stats.newmarray_calls, q.stats.writes
                )
            },
        )?;
        ensure(o.stats.writes == q.stats.writes, || {
            format!("{}: write counts differ", e.name)
        })?;
        ensure(
            matches!((&o.outcome, &q.outcome), (Outcome::Value(a), Outcome::Value(b)) if a == b),
            || format!("{}: results differ", e.name),
        )?;
        if o.stats.newmarray_calls > 0 {
            programs += 1;
        }
        writes += q.stats.writes;
    }
    ensure(programs > 0 && writes > 0, || {
        "no array program in the corpus".into()
    })?;
    Ok(format!(
        "{} array programs, {} writes copied only by the pure evaluator",
        programs, writes
    ))
}

fn ground_cleanliness() -> Check {
    let mut programs = 0;
    for e in CORPUS
        .iter()
        .filter(|e| matches!(e.expectation(), Expectation::Value(_)))
    {
        let p = load(e.source, &LoadOptions::default())
            .map_err(|err| format!("{}: {}", e.name, err))?;
        if p.ty != Type::Int && p.ty != Type::simple("Bool") {
            continue;
        }
        let r = run_pure(&p.term, &p.ty, &p.decls, FUEL, PureOptions::default());
        ensure(
            matches!(
                r.outcome,
                Outcome::Value(Observation::Int(_) | Observation::Con(..))
            ),
            || format!("{}: {:?}", e.name, r.outcome),
        )?;
        ensure(r.linear_left == 0, || {
            format!("{}: {} linear bindings left", e.name, r.linear_left)
        })?;
        programs += 1;
    }
    ensure(programs > 0, || "no Int or Bool programs".into())?;
    Ok(format!(
        "{} Int/Bool programs end with no linear bindings",
        programs
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("verdict table", Duration::from_secs(1), verdict_table),
        (
            "multiplicity algebra",
            Duration::from_secs(10),
            multiplicity_algebra,
        ),
        (
            "observational equivalence",
            Duration::from_secs(60),
            observational_equivalence,
        ),
        ("progress", Duration::from_secs(300), progress),
        ("preservation", Duration::MAX, preservation),
        ("static typestate", Duration::MAX, typestate),
        ("in-place arrays", Duration::MAX, allocation),
        (
            "ground-result cleanliness",
            Duration::MAX,
            ground_cleanliness,
        ),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let result = result.and_then(|msg| {
            if elapsed > *limit {
                Err(format!(
                    "{} but took {:.2?}, limit {:.2?}",
                    msg, elapsed, limit
                ))
            } else {
                Ok(msg)
            }
        });
        match result {
            Ok(msg) => println!(
                "criterion {} ({}): PASS in {:.2?}: {}",
                i + 1,
                name,
                elapsed,
                msg
            ),
            Err(msg) => {
                failed += 1;
                println!(
                    "criterion {} ({}): FAIL in {:.2?}: {}",
                    i + 1,
                    name,
                    elapsed,
                    msg
                )
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
