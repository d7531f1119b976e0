use lq_core::corpus::{Expectation, CORPUS};
use lq_core::ordinary::run_observed;
use lq_core::outcome::{Outcome, StuckReason};
use lq_core::program::{load, LoadError, LoadOptions};
use lq_core::pure::{run_pure, PureOptions};
use lq_core::syntax::Type;

const FUEL: u64 = 100_000;

#[test]
fn every_program_meets_its_expectation() {
    let mut failures = Vec::new();
    for e in CORPUS {
        let loaded = load(e.source, &LoadOptions::default());
        match (e.expectation(), loaded) {
            (Expectation::Reject(kind), Err(LoadError::Rejected(diags))) => {
                if !diags.iter().any(|d| format!("{:?}", d.kind) == kind) {
                    failures.push(format!("{}: expected {} but got {:?}", e.name, kind, diags));
                }
            }
            (Expectation::Reject(kind), other) => failures.push(format!(
                "{}: expected {} but got {:?}",
                e.name,
                kind,
                other.err()
            )),
            (_, Err(err)) => failures.push(format!("{}: {}", e.name, err)),
            (expect, Ok(p)) => {
                let ord = run_observed(&p.term, &p.ty, &p.decls, FUEL, false);
                let pure = run_pure(&p.term, &p.ty, &p.decls, FUEL, PureOptions::default());
                let shown = |o: &Outcome<_>| match o {
                    Outcome::Value(v) => format!("value {}", v),
                    Outcome::Blackhole(_) => "blackhole".to_string(),
                    other => format!("{:?}", other),
                };
                let want = match expect {
                    Expectation::Value(v) => format!("value {}", v),
                    _ => "blackhole".to_string(),
                };
                for (sem, got) in [
                    ("ordinary", shown(&ord.outcome)),
                    ("pure", shown(&pure.outcome)),
                ] {
                    if got != want {
                        failures.push(format!(
                            "{} ({}): expected {} but got {}",
                            e.name, sem, want, got
                        ));
                    }
                }
            }
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn there_are_enough_positive_programs() {
    let runnable = CORPUS
        .iter()
        .filter(|e| matches!(e.expectation(), Expectation::Value(_)))
        .count();
    assert!(runnable >= 25, "only {} runnable programs", runnable);
}

#[test]
fn forced_runs_block_where_expected() {
    for e in CORPUS.iter().filter(|e| e.forced().is_some()) {
        let opts = LoadOptions {
            lenient: true,
            ..LoadOptions::default()
        };
        let p = load(e.source, &opts).unwrap_or_else(|err| panic!("{}: {}", e.name, err));
        let r = run_observed(&p.term, &p.ty, &p.decls, FUEL, false);
        match r.outcome {
            Outcome::Blocked(s) => {
                assert_eq!(format!("{:?}", s.reason), e.forced().unwrap(), "{}", e.name)
            }
            other => panic!("{}: expected to block, got {:?}", e.name, other),
        }
    }
}

#[test]
fn every_state_of_every_run_is_well_typed() {
    let opts = PureOptions {
        trace: false,
        check_states: true,
    };
    let mut checks = 0;
    for e in CORPUS.iter().filter(|e| e.is_positive()) {
        let p = load(e.source, &LoadOptions::default()).unwrap();
        let r = run_pure(&p.term, &p.ty, &p.decls, FUEL, opts);
        assert!(r.precondition, "{}", e.name);
        assert_eq!(r.failure_count, 0, "{}: {:#?}", e.name, r.failures);
        checks += r.stats.state_checks;
    }
    assert!(checks > 0);
}

#[test]
fn ground_results_leave_no_linear_bindings() {
    for e in CORPUS
        .iter()
        .filter(|e| matches!(e.expectation(), Expectation::Value(_)))
    {
        let p = load(e.source, &LoadOptions::default()).unwrap();
        let r = run_pure(&p.term, &p.ty, &p.decls, FUEL, PureOptions::default());
        let ground = p.ty == Type::Int || p.ty == Type::simple("Bool");
        if ground {
            assert_eq!(r.linear_left, 0, "{}", e.name);
        }
        assert!(
            !matches!(r.outcome, Outcome::Blocked(ref s) if s.reason == StuckReason::MissingLinearBinding)
        );
    }
}
