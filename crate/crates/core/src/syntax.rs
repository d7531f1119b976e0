//! Abstract syntax: types, terms and datatype declarations.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::mult::{mult_equiv, MultExpr};
use crate::name::{fresh_variant, Name};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Int,
    MArray(Box<Type>),
    Array(Box<Type>),
    /// A datatype parameter inside a declaration, or an opaque base type in
    /// a program (there is no term-level type abstraction).
    Var(Name),
    Arrow(Box<Type>, MultExpr, Box<Type>),
    Forall(Name, Box<Type>),
    Data {
        name: Name,
        mults: Vec<MultExpr>,
        args: Vec<Type>,
    },
}

impl Type {
    pub fn arrow(dom: Type, mult: MultExpr, cod: Type) -> Type {
        Type::Arrow(Box::new(dom), mult, Box::new(cod))
    }

    pub fn lolli(dom: Type, cod: Type) -> Type {
        Type::arrow(dom, MultExpr::One, cod)
    }

    pub fn forall(var: impl Into<Name>, body: Type) -> Type {
        Type::Forall(var.into(), Box::new(body))
    }

    pub fn data(name: impl Into<Name>, mults: Vec<MultExpr>, args: Vec<Type>) -> Type {
        Type::Data {
            name: name.into(),
            mults,
            args,
        }
    }

    pub fn simple(name: &str) -> Type {
        Type::data(name, Vec::new(), Vec::new())
    }

    pub fn free_mult_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_mult_vars(&mut out);
        out
    }

    fn collect_mult_vars(&self, out: &mut BTreeSet<Name>) {
        crate::deep(|| match self {
            Type::Int | Type::Var(_) => {}
            Type::MArray(t) | Type::Array(t) => t.collect_mult_vars(out),
            Type::Arrow(a, m, b) => {
                a.collect_mult_vars(out);
                m.collect_vars(out);
                b.collect_mult_vars(out);
            }
            Type::Forall(p, body) => {
                let mut inner = BTreeSet::new();
                body.collect_mult_vars(&mut inner);
                inner.remove(p);
                out.extend(inner);
            }
            Type::Data { mults, args, .. } => {
                for m in mults {
                    m.collect_vars(out);
                }
                for a in args {
                    a.collect_mult_vars(out);
                }
            }
        })
    }

    pub fn mentions_mult_var(&self, var: &str) -> bool {
        self.free_mult_vars().contains(var)
    }

    pub fn type_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_type_vars(&mut out);
        out
    }

    fn collect_type_vars(&self, out: &mut BTreeSet<Name>) {
        crate::deep(|| match self {
            Type::Int => {}
            Type::Var(v) => {
                out.insert(v.clone());
            }
            Type::MArray(t) | Type::Array(t) => t.collect_type_vars(out),
            Type::Arrow(a, _, b) => {
                a.collect_type_vars(out);
                b.collect_type_vars(out);
            }
            Type::Forall(_, body) => body.collect_type_vars(out),
            Type::Data { args, .. } => {
                for a in args {
                    a.collect_type_vars(out);
                }
            }
        })
    }

    /// `self[by/var]` on multiplicity variables, renaming binders that
    /// would capture a variable of `by`.
    pub fn subst_mult(&self, var: &str, by: &MultExpr) -> Type {
        let mut map = HashMap::new();
        map.insert(Name::new(var), by.clone());
        self.subst(&map, &HashMap::new())
    }

    /// Simultaneous substitution of multiplicity and type variables.
    pub fn subst(&self, mults: &HashMap<Name, MultExpr>, tys: &HashMap<Name, Type>) -> Type {
        crate::deep(|| {
            if mults.is_empty() && tys.is_empty() {
                return self.clone();
            }
            match self {
                Type::Int => Type::Int,
                Type::Var(v) => tys.get(v).cloned().unwrap_or_else(|| self.clone()),
                Type::MArray(t) => Type::MArray(Box::new(t.subst(mults, tys))),
                Type::Array(t) => Type::Array(Box::new(t.subst(mults, tys))),
                Type::Arrow(a, m, b) => Type::Arrow(
                    Box::new(a.subst(mults, tys)),
                    m.subst_many(mults),
                    Box::new(b.subst(mults, tys)),
                ),
                Type::Forall(p, body) => {
                    let mut inner = mults.clone();
                    inner.remove(p);
                    let incoming: BTreeSet<Name> = inner
                        .values()
                        .flat_map(|m| m.free_vars())
                        .chain(tys.values().flat_map(|t| t.free_mult_vars()))
                        .collect();
                    if incoming.contains(p) {
                        let body_vars = body.free_mult_vars();
                        let fresh = fresh_variant(p, |s| {
                            incoming.contains(s) || body_vars.contains(s) || inner.contains_key(s)
                        });
                        inner.insert(p.clone(), MultExpr::Var(fresh.clone()));
                        Type::Forall(fresh, Box::new(body.subst(&inner, tys)))
                    } else {
                        Type::Forall(p.clone(), Box::new(body.subst(&inner, tys)))
                    }
                }
                Type::Data {
                    name,
                    mults: ms,
                    args,
                } => Type::Data {
                    name: name.clone(),
                    mults: ms.iter().map(|m| m.subst_many(mults)).collect(),
                    args: args.iter().map(|a| a.subst(mults, tys)).collect(),
                },
            }
        })
    }

    /// Structural equality up to multiplicity equivalence and renaming of
    /// `forall`-bound variables.
    pub fn equiv(&self, other: &Type) -> bool {
        fn go(a: &Type, b: &Type, depth: &mut u32) -> bool {
            crate::deep(|| match (a, b) {
                (Type::Int, Type::Int) => true,
                (Type::Var(x), Type::Var(y)) => x == y,
                (Type::MArray(x), Type::MArray(y)) | (Type::Array(x), Type::Array(y)) => {
                    go(x, y, depth)
                }
                (Type::Arrow(a1, m1, b1), Type::Arrow(a2, m2, b2)) => {
                    mult_equiv(m1, m2) && go(a1, a2, depth) && go(b1, b2, depth)
                }
                (Type::Forall(p, x), Type::Forall(q, y)) => {
                    if p == q {
                        return go(x, y, depth);
                    }
                    *depth += 1;
                    let shared = MultExpr::Var(Name::from(format!("%a{}", depth)));
                    go(&x.subst_mult(p, &shared), &y.subst_mult(q, &shared), depth)
                }
                (
                    Type::Data {
                        name: n1,
                        mults: m1,
                        args: a1,
                    },
                    Type::Data {
                        name: n2,
                        mults: m2,
                        args: a2,
                    },
                ) => {
                    n1 == n2
                        && m1.len() == m2.len()
                        && a1.len() == a2.len()
                        && m1.iter().zip(m2).all(|(x, y)| mult_equiv(x, y))
                        && a1.iter().zip(a2).all(|(x, y)| go(x, y, depth))
                }
                _ => false,
            })
        }
        go(self, other, &mut 0)
    }

    pub fn is_data(&self) -> bool {
        matches!(self, Type::Data { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrimOp {
    NewMArray,
    Write,
    Freeze,
    Index,
    Add,
    Sub,
    Mul,
    Eq,
    Lt,
}

impl PrimOp {
    pub const ALL: [PrimOp; 9] = [
        PrimOp::NewMArray,
        PrimOp::Write,
        PrimOp::Freeze,
        PrimOp::Index,
        PrimOp::Add,
        PrimOp::Sub,
        PrimOp::Mul,
        PrimOp::Eq,
        PrimOp::Lt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrimOp::NewMArray => "newMArray",
            PrimOp::Write => "write",
            PrimOp::Freeze => "freeze",
            PrimOp::Index => "index",
            PrimOp::Add => "add",
            PrimOp::Sub => "sub",
            PrimOp::Mul => "mul",
            PrimOp::Eq => "eq",
            PrimOp::Lt => "lt",
        }
    }

    pub fn from_name(s: &str) -> Option<PrimOp> {
        PrimOp::ALL.iter().copied().find(|p| p.name() == s)
    }

    pub fn arity(self) -> usize {
        self.arg_mults().len()
    }

    /// Multiplicities of the primitive's arrows, argument by argument.
    pub fn arg_mults(self) -> &'static [MultExpr] {
        use MultExpr::{Omega as W, One as I};
        match self {
            PrimOp::NewMArray => &[I, W, I],
            PrimOp::Write => &[I, I, W],
            PrimOp::Freeze => &[I],
            PrimOp::Index => &[W, I],
            PrimOp::Add | PrimOp::Sub | PrimOp::Mul | PrimOp::Eq | PrimOp::Lt => &[I, I],
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            PrimOp::Add | PrimOp::Sub | PrimOp::Mul | PrimOp::Eq | PrimOp::Lt
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Branch {
    pub con: Name,
    pub binders: Vec<Name>,
    pub body: Term,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Binding {
    pub var: Name,
    pub ty: Type,
    pub rhs: Term,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Name),
    Lam {
        mult: MultExpr,
        var: Name,
        ty: Type,
        body: Box<Term>,
    },
    App(Box<Term>, Box<Term>),
    MultLam {
        var: Name,
        body: Box<Term>,
    },
    MultApp(Box<Term>, MultExpr),
    Con {
        name: Name,
        tys: Vec<Type>,
        mults: Vec<MultExpr>,
        args: Vec<Term>,
    },
    Case {
        mult: MultExpr,
        scrut: Box<Term>,
        branches: Vec<Branch>,
    },
    /// `recursive` groups scope their binders over the right-hand sides as
    /// well as the body. Only ω groups may be recursive.
    Let {
        mult: MultExpr,
        recursive: bool,
        binds: Vec<Binding>,
        body: Box<Term>,
    },
    Int(i64),
    Prim(PrimOp, Vec<Term>),
    /// Runtime only: the name of a mutable array cell in the ordinary heap.
    Loc(u32),
    /// Runtime only: an array value of the pure semantics. `id` tags each
    /// allocation so copies can be told apart.
    Array {
        elem: Type,
        frozen: bool,
        elems: Vec<Name>,
        id: u32,
    },
}

impl Term {
    pub fn var(name: impl Into<Name>) -> Term {
        Term::Var(name.into())
    }

    pub fn lam(mult: MultExpr, var: impl Into<Name>, ty: Type, body: Term) -> Term {
        Term::Lam {
            mult,
            var: var.into(),
            ty,
            body: Box::new(body),
        }
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Box::new(f), Box::new(a))
    }

    pub fn mult_lam(var: impl Into<Name>, body: Term) -> Term {
        Term::MultLam {
            var: var.into(),
            body: Box::new(body),
        }
    }

    pub fn mult_app(t: Term, m: MultExpr) -> Term {
        Term::MultApp(Box::new(t), m)
    }

    pub fn con(
        name: impl Into<Name>,
        tys: Vec<Type>,
        mults: Vec<MultExpr>,
        args: Vec<Term>,
    ) -> Term {
        Term::Con {
            name: name.into(),
            tys,
            mults,
            args,
        }
    }

    pub fn case(mult: MultExpr, scrut: Term, branches: Vec<Branch>) -> Term {
        Term::Case {
            mult,
            scrut: Box::new(scrut),
            branches,
        }
    }

    /// A let group; ω groups are recursive.
    pub fn let_(mult: MultExpr, binds: Vec<Binding>, body: Term) -> Term {
        let recursive = mult == MultExpr::Omega;
        Term::Let {
            mult,
            recursive,
            binds,
            body: Box::new(body),
        }
    }

    pub fn let1(var: impl Into<Name>, ty: Type, rhs: Term, body: Term) -> Term {
        Term::Let {
            mult: MultExpr::One,
            recursive: false,
            binds: vec![Binding {
                var: var.into(),
                ty,
                rhs,
            }],
            body: Box::new(body),
        }
    }

    pub fn is_value(&self) -> bool {
        matches!(
            self,
            Term::Lam { .. }
                | Term::MultLam { .. }
                | Term::Con { .. }
                | Term::Int(_)
                | Term::Loc(_)
                | Term::Array { .. }
        )
    }

    pub fn as_var(&self) -> Option<&Name> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn size(&self) -> usize {
        1 + match self {
            Term::Var(_) | Term::Int(_) | Term::Loc(_) | Term::Array { .. } => 0,
            Term::Lam { body, .. } | Term::MultLam { body, .. } => body.size(),
            Term::App(f, a) => f.size() + a.size(),
            Term::MultApp(t, _) => t.size(),
            Term::Con { args, .. } | Term::Prim(_, args) => args.iter().map(Term::size).sum(),
            Term::Case {
                scrut, branches, ..
            } => scrut.size() + branches.iter().map(|b| b.body.size()).sum::<usize>(),
            Term::Let { binds, body, .. } => {
                body.size() + binds.iter().map(|b| b.rhs.size()).sum::<usize>()
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free_vars(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free_vars(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        crate::deep(|| match self {
            Term::Var(v) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            Term::Int(_) | Term::Loc(_) => {}
            Term::Array { elems, .. } => {
                for e in elems {
                    if !bound.contains(e) {
                        out.insert(e.clone());
                    }
                }
            }
            Term::Lam { var, body, .. } => {
                bound.push(var.clone());
                body.collect_free_vars(bound, out);
                bound.pop();
            }
            Term::App(f, a) => {
                f.collect_free_vars(bound, out);
                a.collect_free_vars(bound, out);
            }
            Term::MultLam { body, .. } => body.collect_free_vars(bound, out),
            Term::MultApp(t, _) => t.collect_free_vars(bound, out),
            Term::Con { args, .. } | Term::Prim(_, args) => {
                for a in args {
                    a.collect_free_vars(bound, out);
                }
            }
            Term::Case {
                scrut, branches, ..
            } => {
                scrut.collect_free_vars(bound, out);
                for b in branches {
                    let n = bound.len();
                    bound.extend(b.binders.iter().cloned());
                    b.body.collect_free_vars(bound, out);
                    bound.truncate(n);
                }
            }
            Term::Let {
                recursive,
                binds,
                body,
                ..
            } => {
                let n = bound.len();
                if !*recursive {
                    for b in binds {
                        b.rhs.collect_free_vars(bound, out);
                    }
                }
                bound.extend(binds.iter().map(|b| b.var.clone()));
                if *recursive {
                    for b in binds {
                        b.rhs.collect_free_vars(bound, out);
                    }
                }
                body.collect_free_vars(bound, out);
                bound.truncate(n);
            }
        })
    }

    /// Simultaneous renaming of free term variables. The replacement names
    /// must not be bound anywhere inside `self`; the evaluators only ever
    /// substitute reserved heap names, which no binder uses.
    pub fn rename(&self, map: &HashMap<Name, Name>) -> Term {
        crate::deep(|| {
            if map.is_empty() {
                return self.clone();
            }
            let without = |names: &mut dyn Iterator<Item = &Name>| -> Option<HashMap<Name, Name>> {
                let mut shadowed: Option<HashMap<Name, Name>> = None;
                for n in names {
                    if map.contains_key(n) {
                        shadowed.get_or_insert_with(|| map.clone()).remove(n);
                    }
                }
                shadowed
            };
            match self {
                Term::Var(v) => Term::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())),
                Term::Int(_) | Term::Loc(_) => self.clone(),
                Term::Array {
                    elem,
                    frozen,
                    elems,
                    id,
                } => Term::Array {
                    elem: elem.clone(),
                    frozen: *frozen,
                    elems: elems
                        .iter()
                        .map(|e| map.get(e).cloned().unwrap_or_else(|| e.clone()))
                        .collect(),
                    id: *id,
                },
                Term::Lam {
                    mult,
                    var,
                    ty,
                    body,
                } => {
                    let inner = without(&mut std::iter::once(var));
                    let body = body.rename(inner.as_ref().unwrap_or(map));
                    Term::Lam {
                        mult: mult.clone(),
                        var: var.clone(),
                        ty: ty.clone(),
                        body: Box::new(body),
                    }
                }
                Term::App(f, a) => Term::app(f.rename(map), a.rename(map)),
                Term::MultLam { var, body } => Term::MultLam {
                    var: var.clone(),
                    body: Box::new(body.rename(map)),
                },
                Term::MultApp(t, m) => Term::MultApp(Box::new(t.rename(map)), m.clone()),
                Term::Con {
                    name,
                    tys,
                    mults,
                    args,
                } => Term::Con {
                    name: name.clone(),
                    tys: tys.clone(),
                    mults: mults.clone(),
                    args: args.iter().map(|a| a.rename(map)).collect(),
                },
                Term::Prim(op, args) => {
                    Term::Prim(*op, args.iter().map(|a| a.rename(map)).collect())
                }
                Term::Case {
                    mult,
                    scrut,
                    branches,
                } => Term::Case {
                    mult: mult.clone(),
                    scrut: Box::new(scrut.rename(map)),
                    branches: branches
                        .iter()
                        .map(|b| {
                            let inner = without(&mut b.binders.iter());
                            Branch {
                                con: b.con.clone(),
                                binders: b.binders.clone(),
                                body: b.body.rename(inner.as_ref().unwrap_or(map)),
                            }
                        })
                        .collect(),
                },
                Term::Let {
                    mult,
                    recursive,
                    binds,
                    body,
                } => {
                    let inner = without(&mut binds.iter().map(|b| &b.var));
                    let inner = inner.as_ref().unwrap_or(map);
                    let rhs_map = if *recursive { inner } else { map };
                    Term::Let {
                        mult: mult.clone(),
                        recursive: *recursive,
                        binds: binds
                            .iter()
                            .map(|b| Binding {
                                var: b.var.clone(),
                                ty: b.ty.clone(),
                                rhs: b.rhs.rename(rhs_map),
                            })
                            .collect(),
                        body: Box::new(body.rename(inner)),
                    }
                }
            }
        })
    }

    pub fn rename_one(&self, from: &Name, to: &Name) -> Term {
        let mut map = HashMap::new();
        map.insert(from.clone(), to.clone());
        self.rename(&map)
    }

    /// `self[by/var]` for a multiplicity variable, through every annotation.
    pub fn subst_mult(&self, var: &str, by: &MultExpr) -> Term {
        crate::deep(|| {
            let ty = |t: &Type| t.subst_mult(var, by);
            let m = |e: &MultExpr| e.subst(var, by);
            match self {
                Term::Var(_) | Term::Int(_) | Term::Loc(_) => self.clone(),
                Term::Array {
                    elem,
                    frozen,
                    elems,
                    id,
                } => Term::Array {
                    elem: ty(elem),
                    frozen: *frozen,
                    elems: elems.clone(),
                    id: *id,
                },
                Term::Lam {
                    mult,
                    var: x,
                    ty: t,
                    body,
                } => Term::Lam {
                    mult: m(mult),
                    var: x.clone(),
                    ty: ty(t),
                    body: Box::new(body.subst_mult(var, by)),
                },
                Term::App(f, a) => Term::app(f.subst_mult(var, by), a.subst_mult(var, by)),
                Term::MultLam { var: p, body } => {
                    if &**p == var {
                        return self.clone();
                    }
                    if by.mentions(p) {
                        let taken = by.free_vars();
                        let fresh = fresh_variant(p, |s| taken.contains(s) || s == var);
                        let body = body.subst_mult(p, &MultExpr::Var(fresh.clone()));
                        return Term::MultLam {
                            var: fresh,
                            body: Box::new(body.subst_mult(var, by)),
                        };
                    }
                    Term::MultLam {
                        var: p.clone(),
                        body: Box::new(body.subst_mult(var, by)),
                    }
                }
                Term::MultApp(t, e) => Term::MultApp(Box::new(t.subst_mult(var, by)), m(e)),
                Term::Con {
                    name,
                    tys,
                    mults,
                    args,
                } => Term::Con {
                    name: name.clone(),
                    tys: tys.iter().map(ty).collect(),
                    mults: mults.iter().map(m).collect(),
                    args: args.iter().map(|a| a.subst_mult(var, by)).collect(),
                },
                Term::Prim(op, args) => {
                    Term::Prim(*op, args.iter().map(|a| a.subst_mult(var, by)).collect())
                }
                Term::Case {
                    mult,
                    scrut,
                    branches,
                } => Term::Case {
                    mult: m(mult),
                    scrut: Box::new(scrut.subst_mult(var, by)),
                    branches: branches
                        .iter()
                        .map(|b| Branch {
                            con: b.con.clone(),
                            binders: b.binders.clone(),
                            body: b.body.subst_mult(var, by),
                        })
                        .collect(),
                },
                Term::Let {
                    mult,
                    recursive,
                    binds,
                    body,
                } => Term::Let {
                    mult: m(mult),
                    recursive: *recursive,
                    binds: binds
                        .iter()
                        .map(|b| Binding {
                            var: b.var.clone(),
                            ty: ty(&b.ty),
                            rhs: b.rhs.subst_mult(var, by),
                        })
                        .collect(),
                    body: Box::new(body.subst_mult(var, by)),
                },
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Field {
    pub ty: Type,
    pub mult: MultExpr,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConDecl {
    pub name: Name,
    pub fields: Vec<Field>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DataDecl {
    pub name: Name,
    pub mult_params: Vec<Name>,
    pub type_params: Vec<Name>,
    pub cons: Vec<ConDecl>,
}

impl DataDecl {
    /// The type every constructor returns: the datatype applied to its own
    /// parameters.
    pub fn self_type(&self) -> Type {
        Type::Data {
            name: self.name.clone(),
            mults: self
                .mult_params
                .iter()
                .cloned()
                .map(MultExpr::Var)
                .collect(),
            args: self.type_params.iter().cloned().map(Type::Var).collect(),
        }
    }

    /// A constructor's full signature `A1 ->[m1] ... -> D p.. a..`.
    pub fn con_signature(&self, con: &ConDecl) -> Type {
        con.fields.iter().rev().fold(self.self_type(), |acc, f| {
            Type::arrow(f.ty.clone(), f.mult.clone(), acc)
        })
    }

    pub fn con(&self, name: &str) -> Option<&ConDecl> {
        self.cons.iter().find(|c| &*c.name == name)
    }

    /// Field types and multiplicities of `con` at the given instantiation.
    pub fn instantiate(&self, con: &ConDecl, mults: &[MultExpr], tys: &[Type]) -> Vec<Field> {
        let msub: HashMap<Name, MultExpr> = self
            .mult_params
            .iter()
            .cloned()
            .zip(mults.iter().cloned())
            .collect();
        let tsub: HashMap<Name, Type> = self
            .type_params
            .iter()
            .cloned()
            .zip(tys.iter().cloned())
            .collect();
        con.fields
            .iter()
            .map(|f| Field {
                ty: f.ty.subst(&msub, &tsub),
                mult: f.mult.subst_many(&msub),
            })
            .collect()
    }
}

/// Datatype declarations indexed by type and by constructor name.
#[derive(Clone, Debug, Default)]
pub struct DeclTable {
    decls: BTreeMap<Name, DataDecl>,
    order: Vec<Name>,
    cons: BTreeMap<Name, Name>,
}

impl DeclTable {
    pub fn new() -> DeclTable {
        DeclTable::default()
    }

    pub fn from_decls(decls: &[DataDecl]) -> DeclTable {
        let mut table = DeclTable::new();
        for d in decls {
            table.insert(d.clone());
        }
        table
    }

    /// Later declarations with the same name replace earlier ones.
    pub fn insert(&mut self, decl: DataDecl) {
        for c in &decl.cons {
            self.cons.insert(c.name.clone(), decl.name.clone());
        }
        if !self.decls.contains_key(&decl.name) {
            self.order.push(decl.name.clone());
        }
        self.decls.insert(decl.name.clone(), decl);
    }

    pub fn get(&self, name: &str) -> Option<&DataDecl> {
        self.decls.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.decls.contains_key(name)
    }

    /// The declaration owning constructor `con`, and the constructor itself.
    pub fn lookup_con(&self, con: &str) -> Option<(&DataDecl, &ConDecl)> {
        let data = self.cons.get(con)?;
        let decl = self.decls.get(data)?;
        Some((decl, decl.con(con)?))
    }

    pub fn iter(&self) -> impl Iterator<Item = &DataDecl> {
        self.order.iter().filter_map(|n| self.decls.get(n))
    }

    pub fn len(&self) -> usize {
        self.decls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forall_subst_avoids_capture() {
        // (forall q. Int ->[p] Int)[q/p] must not capture q
        let t = Type::forall("q", Type::arrow(Type::Int, MultExpr::var("p"), Type::Int));
        let s = t.subst_mult("p", &MultExpr::var("q"));
        match &s {
            Type::Forall(bound, body) => {
                assert_ne!(&**bound, "q");
                assert!(body.mentions_mult_var("q"));
            }
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn alpha_equivalent_foralls() {
        let a = Type::forall("p", Type::arrow(Type::Int, MultExpr::var("p"), Type::Int));
        let b = Type::forall("q", Type::arrow(Type::Int, MultExpr::var("q"), Type::Int));
        assert!(a.equiv(&b));
        let c = Type::forall("q", Type::arrow(Type::Int, MultExpr::One, Type::Int));
        assert!(!a.equiv(&c));
    }

    #[test]
    fn rename_respects_shadowing() {
        let t = Term::app(
            Term::var("x"),
            Term::lam(MultExpr::One, "x", Type::Int, Term::var("x")),
        );
        let r = t.rename_one(&Name::new("x"), &Name::new("%h0"));
        assert_eq!(
            r,
            Term::app(
                Term::var("%h0"),
                Term::lam(MultExpr::One, "x", Type::Int, Term::var("x")),
            )
        );
    }

    #[test]
    fn recursive_let_scopes_over_rhs() {
        let rec = Term::let_(
            MultExpr::Omega,
            vec![Binding {
                var: Name::new("x"),
                ty: Type::Int,
                rhs: Term::var("x"),
            }],
            Term::var("y"),
        );
        assert_eq!(
            rec.free_vars().into_iter().collect::<Vec<_>>(),
            vec![Name::new("y")]
        );
        let nonrec = Term::let1("x", Type::Int, Term::var("x"), Term::var("x"));
        assert_eq!(
            nonrec.free_vars().into_iter().collect::<Vec<_>>(),
            vec![Name::new("x")]
        );
    }
}
