//! Translation to explicit-sharing form: every argument of an application,
//! constructor or primitive becomes a variable, so that laziness can be
//! expressed through heap bindings.

use crate::mult::MultExpr;
use crate::name::NameSupply;
use crate::syntax::{Binding, Branch, Term, Type};
use crate::typecheck::{Typed, TypedNode};

/// Translates an annotated term. Fresh binders are `%t0`, `%t1`, ... in a
/// deterministic order.
pub fn to_sharing(t: &Typed) -> Term {
    let mut supply = NameSupply::new("t");
    go(t, &mut supply)
}

fn bind_single(mult: &MultExpr, var: crate::name::Name, ty: Type, rhs: Term, body: Term) -> Term {
    Term::Let {
        mult: mult.clone(),
        recursive: *mult == MultExpr::Omega,
        binds: vec![Binding { var, ty, rhs }],
        body: Box::new(body),
    }
}

/// Replaces each non-variable argument by a fresh variable bound at its
/// multiplicity, outermost first.
fn share_args(
    args: &[Typed],
    mults: &[MultExpr],
    supply: &mut NameSupply,
    build: impl FnOnce(Vec<Term>) -> Term,
) -> Term {
    let mut vars = Vec::with_capacity(args.len());
    let mut pending = Vec::new();
    for (a, m) in args.iter().zip(mults) {
        match &a.node {
            TypedNode::Var(x) => vars.push(Term::Var(x.clone())),
            _ => {
                let y = supply.fresh();
                let rhs = go(a, supply);
                pending.push((m.clone(), y.clone(), a.ty.clone(), rhs));
                vars.push(Term::Var(y));
            }
        }
    }
    let mut out = build(vars);
    for (m, y, ty, rhs) in pending.into_iter().rev() {
        out = bind_single(&m, y, ty, rhs, out);
    }
    out
}

fn go(t: &Typed, supply: &mut NameSupply) -> Term {
    stacker::maybe_grow(64 * 1024, 2 * 1024 * 1024, || go_inner(t, supply))
}

fn go_inner(t: &Typed, supply: &mut NameSupply) -> Term {
    match &t.node {
        TypedNode::Var(x) => Term::Var(x.clone()),
        TypedNode::Int(i) => Term::Int(*i),
        TypedNode::Lam {
            mult,
            var,
            ty,
            body,
        } => Term::lam(mult.clone(), var.clone(), ty.clone(), go(body, supply)),
        TypedNode::App { fun, arg, mult } => {
            let f = go(fun, supply);
            match &arg.node {
                TypedNode::Var(x) => Term::app(f, Term::Var(x.clone())),
                _ => {
                    let y = supply.fresh();
                    let rhs = go(arg, supply);
                    bind_single(
                        mult,
                        y.clone(),
                        arg.ty.clone(),
                        rhs,
                        Term::app(f, Term::Var(y)),
                    )
                }
            }
        }
        TypedNode::MultLam { var, body } => Term::mult_lam(var.clone(), go(body, supply)),
        TypedNode::MultApp(inner, m) => Term::mult_app(go(inner, supply), m.clone()),
        TypedNode::Con {
            name,
            tys,
            mults,
            fields,
            args,
        } => {
            let field_mults: Vec<MultExpr> = fields.iter().map(|f| f.mult.clone()).collect();
            share_args(args, &field_mults, supply, |vars| {
                Term::con(name.clone(), tys.clone(), mults.clone(), vars)
            })
        }
        TypedNode::Prim(op, args) => {
            share_args(args, op.arg_mults(), supply, |vars| Term::Prim(*op, vars))
        }
        TypedNode::Case {
            mult,
            scrut,
            branches,
        } => Term::case(
            mult.clone(),
            go(scrut, supply),
            branches
                .iter()
                .map(|b| Branch {
                    con: b.con.clone(),
                    binders: b.binders.clone(),
                    body: go(&b.body, supply),
                })
                .collect(),
        ),
        TypedNode::Let {
            mult,
            recursive,
            binds,
            body,
        } => Term::Let {
            mult: mult.clone(),
            recursive: *recursive,
            binds: binds
                .iter()
                .map(|b| Binding {
                    var: b.var.clone(),
                    ty: b.ty.clone(),
                    rhs: go(&b.rhs, supply),
                })
                .collect(),
            body: Box::new(go(body, supply)),
        },
        TypedNode::Runtime(term) => term.clone(),
        TypedNode::Unannotated => panic!("the sharing translation needs an annotated tree"),
    }
}

/// True when every application, constructor and primitive argument is a
/// variable.
pub fn is_sharing_form(t: &Term) -> bool {
    match t {
        Term::Var(_) | Term::Int(_) | Term::Loc(_) | Term::Array { .. } => true,
        Term::Lam { body, .. } | Term::MultLam { body, .. } => is_sharing_form(body),
        Term::App(f, a) => a.as_var().is_some() && is_sharing_form(f),
        Term::MultApp(inner, _) => is_sharing_form(inner),
        Term::Con { args, .. } | Term::Prim(_, args) => args.iter().all(|a| a.as_var().is_some()),
        Term::Case {
            scrut, branches, ..
        } => is_sharing_form(scrut) && branches.iter().all(|b| is_sharing_form(&b.body)),
        Term::Let { binds, body, .. } => {
            binds.iter().all(|b| is_sharing_form(&b.rhs)) && is_sharing_form(body)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_source, parse_term};
    use crate::syntax::DeclTable;
    use crate::typecheck::{infer, TypeEnv};

    fn table() -> DeclTable {
        let src = "data Pair [p, q] a b where { Pair : a ->[p] b ->[q] Pair p q a b }";
        DeclTable::from_decls(&parse_source(src, &DeclTable::new()).unwrap().decls)
    }

    fn translate(src: &str) -> Term {
        let t = table();
        let term = parse_term(src, &t).unwrap();
        let mut env = TypeEnv::new(&t);
        let (typed, _) = infer(&mut env, &term).unwrap();
        to_sharing(&typed)
    }

    #[test]
    fn application_argument_is_let_bound_at_arrow_multiplicity() {
        let out = translate("\\[w] f : Int -o Int . \\[w] g : Int -> Int . f (g 1)");
        let s = out.to_string();
        assert!(
            s.contains("let[1] %t0 : Int = (let[w] %t1 : Int = 1 in g %t1) in f %t0"),
            "{}",
            s
        );
        assert!(is_sharing_form(&out));
    }

    #[test]
    fn variable_arguments_untouched() {
        let src = "\\[1] f : Int -o Int . \\[1] x : Int . f x";
        let t = table();
        assert_eq!(translate(src), parse_term(src, &t).unwrap());
    }

    #[test]
    fn constructor_fields_bound_at_field_multiplicities() {
        let out = translate("Pair @[Int, Int] @[1, w] 1 2");
        assert_eq!(
            out.to_string(),
            "let[1] %t0 : Int = 1 in let[w] %t1 : Int = 2 in Pair @[Int, Int] @[1, w] %t0 %t1"
        );
    }
}
