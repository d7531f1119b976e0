use std::collections::HashMap;

use proptest::prelude::*;

use lq_core::corpus::CORPUS;
use lq_core::harness::{gen_welltyped, GenConfig};
use lq_core::mult::{mult_join, mult_normalize, MultExpr, UsageMult};
use lq_core::name::Name;
use lq_core::parse::{parse_mult, parse_source};
use lq_core::pretty::source_to_string;
use lq_core::program::{load, parse_with_prelude, LoadOptions, PRELUDE};
use lq_core::syntax::DeclTable;
use lq_core::translate::{is_sharing_form, to_sharing};
use lq_core::typecheck::{infer, infer_type, TypeEnv};
use lq_core::usage::{usage_join, Usage};

const VARS: [&str; 3] = ["p", "q", "r"];

fn mult_expr() -> impl Strategy<Value = MultExpr> {
    let leaf = prop_oneof![
        Just(MultExpr::One),
        Just(MultExpr::Omega),
        (0..VARS.len()).prop_map(|i| MultExpr::var(VARS[i])),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| MultExpr::add(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| MultExpr::mul(a, b)),
        ]
    })
}

/// Reads a multiplicity as a count in {1, ω} once its variables are fixed.
/// Anything the normal form identifies must agree here.
fn eval(e: &MultExpr, env: &HashMap<&str, bool>) -> bool {
    match e {
        MultExpr::One => false,
        MultExpr::Omega => true,
        MultExpr::Var(v) => env[v.as_str()],
        MultExpr::Add(_, _) => true,
        MultExpr::Mul(a, b) => eval(a, env) || eval(b, env),
    }
}

fn assignments() -> Vec<HashMap<&'static str, bool>> {
    (0..8u8)
        .map(|bits| {
            VARS.iter()
                .enumerate()
                .map(|(i, v)| (*v, bits & (1 << i) != 0))
                .collect()
        })
        .collect()
}

fn same(a: &MultExpr, b: &MultExpr) -> bool {
    let equal = mult_normalize(a) == mult_normalize(b);
    if equal {
        for env in assignments() {
            assert_eq!(
                eval(a, &env),
                eval(b, &env),
                "{} and {} normalise alike",
                a,
                b
            );
        }
    }
    equal
}

fn usage() -> impl Strategy<Value = Usage> {
    proptest::collection::vec(proptest::option::of(mult_expr()), 3).prop_map(|ms| {
        Usage::from_entries(
            ms.into_iter()
                .zip(["x", "y", "z"])
                .filter_map(|(m, x)| m.map(|m| (Name::new(x), UsageMult::of(&m)))),
        )
    })
}

fn concrete_usage_mult() -> impl Strategy<Value = UsageMult> {
    prop_oneof![
        Just(UsageMult::Zero),
        Just(UsageMult::one()),
        Just(UsageMult::omega()),
    ]
}

fn any_usage_mult() -> impl Strategy<Value = UsageMult> {
    prop_oneof![
        concrete_usage_mult(),
        mult_expr().prop_map(|m| UsageMult::of(&m)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn semiring_laws(a in mult_expr(), b in mult_expr(), c in mult_expr()) {
        use MultExpr as M;
        prop_assert!(same(&M::add(a.clone(), M::add(b.clone(), c.clone())), &M::add(M::add(a.clone(), b.clone()), c.clone())));
        prop_assert!(same(&M::mul(a.clone(), M::mul(b.clone(), c.clone())), &M::mul(M::mul(a.clone(), b.clone()), c.clone())));
        prop_assert!(same(&M::add(a.clone(), b.clone()), &M::add(b.clone(), a.clone())));
        prop_assert!(same(&M::mul(a.clone(), b.clone()), &M::mul(b.clone(), a.clone())));
        prop_assert!(same(&M::mul(M::One, a.clone()), &a));
        prop_assert!(same(&M::mul(a.clone(), M::add(b.clone(), c.clone())), &M::add(M::mul(a.clone(), b.clone()), M::mul(a.clone(), c.clone()))));
    }

    #[test]
    fn normalisation_is_idempotent(a in mult_expr()) {
        let nf = mult_normalize(&a);
        prop_assert_eq!(mult_normalize(&nf.render()), nf.clone());
        prop_assert!(same(&a, &a.simplify()));
    }

    #[test]
    fn printed_multiplicities_parse_back(a in mult_expr()) {
        let back = parse_mult(&a.to_string()).unwrap();
        prop_assert_eq!(mult_normalize(&back), mult_normalize(&a));
    }

    #[test]
    fn module_laws(g in usage(), d in usage(), pi in mult_expr(), mu in mult_expr()) {
        prop_assert_eq!(g.add(&d), d.add(&g));
        prop_assert_eq!(g.add(&d).scale(&pi), g.scale(&pi).add(&d.scale(&pi)));
        prop_assert_eq!(g.scale(&MultExpr::add(pi.clone(), mu.clone())), g.scale(&pi).add(&g.scale(&mu)));
        prop_assert_eq!(g.scale(&MultExpr::mul(pi.clone(), mu.clone())), g.scale(&mu).scale(&pi));
        prop_assert_eq!(g.scale(&MultExpr::One), g);
    }

    #[test]
    fn joins_of_concrete_multiplicities(a in concrete_usage_mult(), b in concrete_usage_mult(), c in concrete_usage_mult()) {
        let ab = mult_join(&a, &b).unwrap();
        prop_assert_eq!(&ab, &mult_join(&b, &a).unwrap());
        prop_assert_eq!(mult_join(&a, &a).unwrap(), a.clone());
        let left = mult_join(&ab, &c).unwrap();
        let right = mult_join(&a, &mult_join(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
        // an upper bound: joining again with either side changes nothing
        prop_assert_eq!(mult_join(&ab, &a).unwrap(), ab.clone());
        if a != b {
            prop_assert_eq!(ab, UsageMult::omega());
        }
    }

    #[test]
    fn joins_are_commutative_where_defined(a in any_usage_mult(), b in any_usage_mult()) {
        prop_assert_eq!(mult_join(&a, &b), mult_join(&b, &a));
        prop_assert_eq!(mult_join(&a, &a), Some(a.clone()));
    }

    #[test]
    fn usage_join_is_pointwise(g in usage(), d in usage()) {
        match usage_join(&g, &d) {
            Ok(j) => {
                for x in ["x", "y", "z"] {
                    prop_assert_eq!(Some(j.get(x)), mult_join(&g.get(x), &d.get(x)));
                }
            }
            Err(e) => prop_assert!(mult_join(&e.left, &e.right).is_none()),
        }
        prop_assert_eq!(usage_join(&g, &g), Ok(g.clone()));
    }

    #[test]
    fn generated_programs_print_and_parse_back(seed in any::<u64>(), index in 0u64..1000) {
        let cfg = GenConfig { seed, ..GenConfig::default() };
        let p = gen_welltyped(&cfg, index).unwrap();
        let (_, file) = parse_with_prelude(&p.text, Some(PRELUDE)).unwrap();
        prop_assert_eq!(&file, &p.file);
        prop_assert_eq!(source_to_string(&file), p.text);
    }

    #[test]
    fn translation_preserves_types(seed in any::<u64>(), index in 0u64..1000) {
        let cfg = GenConfig { seed, ..GenConfig::default() };
        let g = gen_welltyped(&cfg, index).unwrap();
        let p = load(&g.text, &LoadOptions::default()).unwrap();
        prop_assert!(is_sharing_form(&p.term));
        let mut env = TypeEnv::new(&p.decls);
        let (typed, usage) = infer(&mut env, &p.term).unwrap();
        prop_assert!(typed.ty.equiv(&p.ty));
        prop_assert!(usage.is_empty());
        prop_assert_eq!(to_sharing(&typed), p.term);
    }
}

#[test]
fn conservative_non_laws() {
    let p = || MultExpr::var("p");
    let q = || MultExpr::var("q");
    assert!(!same(&MultExpr::add(p(), q()), &MultExpr::Omega));
    let w_plus = MultExpr::add(MultExpr::Omega, MultExpr::mul(MultExpr::Omega, p()));
    assert!(!same(&w_plus, &MultExpr::Omega));
}

#[test]
fn concrete_equations() {
    use MultExpr::{Omega, One};
    for (a, b) in [
        (MultExpr::mul(Omega, Omega), Omega),
        (MultExpr::add(One, One), Omega),
        (MultExpr::add(One, Omega), Omega),
        (MultExpr::add(Omega, Omega), Omega),
    ] {
        assert!(same(&a, &b), "{} vs {}", a, b);
    }
}

#[test]
fn corpus_round_trips_through_the_printer() {
    let known = DeclTable::from_decls(&parse_source(PRELUDE, &DeclTable::new()).unwrap().decls);
    for e in CORPUS {
        let Ok(first) = parse_source(e.source, &known) else {
            panic!("{} does not parse", e.name)
        };
        let printed = source_to_string(&first);
        let second = parse_source(&printed, &known).unwrap();
        assert_eq!(first, second, "{}", e.name);
        assert_eq!(printed, source_to_string(&second), "{}", e.name);
    }
}

#[test]
fn prelude_round_trips() {
    let f = parse_source(PRELUDE, &DeclTable::new()).unwrap();
    let again = parse_source(&source_to_string(&f), &DeclTable::new()).unwrap();
    assert_eq!(f, again);
    assert_eq!(f.decls.len(), 4);
}

#[test]
fn translated_corpus_keeps_its_types() {
    for e in CORPUS.iter().filter(|e| e.is_positive()) {
        let p = load(e.source, &LoadOptions::default()).unwrap();
        let mut env = TypeEnv::new(&p.decls);
        let (ty, usage) =
            infer_type(&mut env, &p.term).unwrap_or_else(|d| panic!("{}: {}", e.name, d));
        assert!(ty.equiv(&p.ty), "{}", e.name);
        assert!(usage.is_empty(), "{}", e.name);
    }
}
