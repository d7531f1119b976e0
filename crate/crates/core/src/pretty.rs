//! Printing back to surface syntax. `parse ∘ print` is the identity on
//! parsed programs; runtime-only forms print in a readable but
//! unparseable notation.

use std::fmt::{self, Write};

use crate::mult::MultExpr;
use crate::parse::{Def, SourceFile};
use crate::syntax::{DataDecl, Term, Type};

fn mult_atom(m: &MultExpr) -> String {
    match m {
        MultExpr::One | MultExpr::Omega | MultExpr::Var(_) => m.to_string(),
        _ => format!("({})", m),
    }
}

pub fn type_to_string(t: &Type) -> String {
    let mut s = String::new();
    write_type(&mut s, t, 0).expect("writing to a String");
    s
}

// prec 0: anything; 1: arrow domain; 2: argument position
fn write_type(out: &mut String, t: &Type, prec: u8) -> fmt::Result {
    crate::deep(|| match t {
        Type::Int => out.write_str("Int"),
        Type::Var(v) => write!(out, "{}", v),
        Type::MArray(e) | Type::Array(e) => {
            let kw = if matches!(t, Type::MArray(_)) {
                "MArray"
            } else {
                "Array"
            };
            if prec >= 2 {
                out.write_char('(')?;
            }
            write!(out, "{} ", kw)?;
            write_type(out, e, 2)?;
            if prec >= 2 {
                out.write_char(')')?;
            }
            Ok(())
        }
        Type::Data { name, mults, args } => {
            let bare = mults.is_empty() && args.is_empty();
            if !bare && prec >= 2 {
                out.write_char('(')?;
            }
            write!(out, "{}", name)?;
            for m in mults {
                write!(out, " {}", mult_atom(m))?;
            }
            for a in args {
                out.write_char(' ')?;
                write_type(out, a, 2)?;
            }
            if !bare && prec >= 2 {
                out.write_char(')')?;
            }
            Ok(())
        }
        Type::Arrow(a, m, b) => {
            if prec >= 1 {
                out.write_char('(')?;
            }
            write_type(out, a, 1)?;
            match m {
                MultExpr::One => out.write_str(" -o ")?,
                MultExpr::Omega => out.write_str(" -> ")?,
                other => write!(out, " ->[{}] ", other)?,
            }
            write_type(out, b, 0)?;
            if prec >= 1 {
                out.write_char(')')?;
            }
            Ok(())
        }
        Type::Forall(p, body) => {
            if prec >= 1 {
                out.write_char('(')?;
            }
            write!(out, "forall {}. ", p)?;
            write_type(out, body, 0)?;
            if prec >= 1 {
                out.write_char(')')?;
            }
            Ok(())
        }
    })
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&type_to_string(self))
    }
}

pub fn term_to_string(t: &Term) -> String {
    let mut s = String::new();
    write_term(&mut s, t, Prec::Top).expect("writing to a String");
    s
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    /// Binders extend as far right as possible.
    Top,
    /// Head of an application.
    App,
    /// Argument of an application or constructor.
    Arg,
}

fn is_binder(t: &Term) -> bool {
    matches!(
        t,
        Term::Lam { .. } | Term::MultLam { .. } | Term::Case { .. } | Term::Let { .. }
    )
}

fn write_term(out: &mut String, t: &Term, prec: Prec) -> fmt::Result {
    crate::deep(|| {
        let paren = match t {
            _ if is_binder(t) => prec > Prec::Top,
            Term::App(..) => prec >= Prec::Arg,
            Term::Con { args, .. } => !args.is_empty() && prec >= Prec::App,
            _ => false,
        };
        if paren {
            out.write_char('(')?;
        }
        match t {
            Term::Var(v) => write!(out, "{}", v)?,
            Term::Int(i) => write!(out, "{}", i)?,
            Term::Loc(l) => write!(out, "<cell {}>", l)?,
            Term::Array {
                elem,
                frozen,
                elems,
                id,
            } => {
                let kind = if *frozen { "Array" } else { "MArray" };
                write!(out, "<{} {} #{} [", kind, type_to_string(elem), id)?;
                for (i, e) in elems.iter().enumerate() {
                    if i > 0 {
                        out.write_str(", ")?;
                    }
                    write!(out, "{}", e)?;
                }
                out.write_str("]>")?;
            }
            Term::Lam {
                mult,
                var,
                ty,
                body,
            } => {
                write!(out, "\\[{}] {} : {} . ", mult, var, type_to_string(ty))?;
                write_term(out, body, Prec::Top)?;
            }
            Term::MultLam { var, body } => {
                write!(out, "/\\{} . ", var)?;
                write_term(out, body, Prec::Top)?;
            }
            Term::App(f, a) => {
                write_term(out, f, Prec::App)?;
                out.write_char(' ')?;
                write_term(out, a, Prec::Arg)?;
            }
            Term::MultApp(inner, m) => {
                write_term(out, inner, Prec::Arg)?;
                write!(out, " @[{}]", m)?;
            }
            Term::Con {
                name,
                tys,
                mults,
                args,
            } => {
                write!(out, "{}", name)?;
                if !tys.is_empty() {
                    out.write_str(" @[")?;
                    for (i, ty) in tys.iter().enumerate() {
                        if i > 0 {
                            out.write_str(", ")?;
                        }
                        write_type(out, ty, 0)?;
                    }
                    out.write_char(']')?;
                }
                if !mults.is_empty() {
                    out.write_str(" @[")?;
                    for (i, m) in mults.iter().enumerate() {
                        if i > 0 {
                            out.write_str(", ")?;
                        }
                        write!(out, "{}", m)?;
                    }
                    out.write_char(']')?;
                }
                for a in args {
                    out.write_char(' ')?;
                    write_term(out, a, Prec::Arg)?;
                }
            }
            Term::Case {
                mult,
                scrut,
                branches,
            } => {
                write!(out, "case[{}] ", mult)?;
                write_term(out, scrut, Prec::App)?;
                out.write_str(" of { ")?;
                for (i, b) in branches.iter().enumerate() {
                    if i > 0 {
                        out.write_str(" ; ")?;
                    }
                    write!(out, "{}", b.con)?;
                    for x in &b.binders {
                        write!(out, " {}", x)?;
                    }
                    out.write_str(" -> ")?;
                    write_term(out, &b.body, Prec::Top)?;
                }
                out.write_str(" }")?;
            }
            Term::Let {
                mult, binds, body, ..
            } => {
                write!(out, "let[{}] ", mult)?;
                for (i, b) in binds.iter().enumerate() {
                    if i > 0 {
                        out.write_str(", ")?;
                    }
                    write!(out, "{} : {} = ", b.var, type_to_string(&b.ty))?;
                    // a nested let would swallow the following bindings
                    let rhs_prec = if matches!(b.rhs, Term::Let { .. }) {
                        Prec::App
                    } else {
                        Prec::Top
                    };
                    write_term(out, &b.rhs, rhs_prec)?;
                }
                out.write_str(" in ")?;
                write_term(out, body, Prec::Top)?;
            }
            Term::Prim(op, args) => {
                write!(out, "{}(", op.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.write_str(", ")?;
                    }
                    write_term(out, a, Prec::Top)?;
                }
                out.write_char(')')?;
            }
        }
        if paren {
            out.write_char(')')?;
        }
        Ok(())
    })
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&term_to_string(self))
    }
}

pub fn decl_to_string(d: &DataDecl) -> String {
    let mut s = format!("data {}", d.name);
    if !d.mult_params.is_empty() {
        let ps: Vec<&str> = d.mult_params.iter().map(|p| p.as_str()).collect();
        write!(s, " [{}]", ps.join(", ")).ok();
    }
    for a in &d.type_params {
        write!(s, " {}", a).ok();
    }
    s.push_str(" where {");
    for (i, c) in d.cons.iter().enumerate() {
        s.push_str(if i > 0 { " ;\n  " } else { "\n  " });
        write!(s, "{} : {}", c.name, type_to_string(&d.con_signature(c))).ok();
    }
    s.push_str("\n}");
    s
}

pub fn def_to_string(d: &Def) -> String {
    format!(
        "def {} : {} =[{}] {}",
        d.name,
        type_to_string(&d.ty),
        d.mult,
        term_to_string(&d.body)
    )
}

pub fn source_to_string(f: &SourceFile) -> String {
    let mut parts: Vec<String> = f.decls.iter().map(decl_to_string).collect();
    parts.extend(f.defs.iter().map(def_to_string));
    if let Some(main) = &f.main {
        parts.push(format!("main = {}", term_to_string(main)));
    }
    let mut s = parts.join("\n\n");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::name::Name;

    #[test]
    fn arrow_sugar() {
        let t = Type::lolli(Type::lolli(Type::Int, Type::Int), Type::Int);
        assert_eq!(type_to_string(&t), "(Int -o Int) -o Int");
        let p = Type::arrow(Type::Int, MultExpr::var("p"), Type::Int);
        assert_eq!(type_to_string(&p), "Int ->[p] Int");
    }

    #[test]
    fn application_parens() {
        let t = Term::app(Term::var("f"), Term::app(Term::var("g"), Term::var("x")));
        assert_eq!(term_to_string(&t), "f (g x)");
        let l = Term::app(
            Term::lam(MultExpr::One, "x", Type::Int, Term::var("x")),
            Term::Int(3),
        );
        assert_eq!(term_to_string(&l), "(\\[1] x : Int . x) 3");
    }

    #[test]
    fn data_application() {
        let t = Type::data(
            Name::new("Pair"),
            vec![
                MultExpr::One,
                MultExpr::add(MultExpr::One, MultExpr::var("p")),
            ],
            vec![Type::Int, Type::MArray(Box::new(Type::Int))],
        );
        assert_eq!(type_to_string(&t), "Pair 1 (1 + p) Int (MArray Int)");
    }
}
