//! Algorithmic typechecking with usages as outputs.
//!
//! [`infer`] synthesises a type and, for every free variable, how often the
//! term consumes it. Binders compare the synthesised usage against their
//! declared multiplicity with [`sub_usage`]; the declarative rules' context
//! splitting never has to be guessed.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::mult::{mult_equiv, sub_usage, MultExpr, UsageMult};
use crate::name::Name;
use crate::parse::Def;
use crate::pretty::type_to_string;
use crate::syntax::{Binding, Branch, DataDecl, DeclTable, Field, PrimOp, Term, Type};
use crate::usage::{usage_join, Usage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    UnboundVariable,
    LinearityMismatch,
    UnjoinableUsage,
    ArityMismatch,
    TypeMismatch,
    FreshnessViolation,
    MalformedDecl,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    /// Path from the enclosing definition down to the offending node,
    /// e.g. `main › λx › case › Pair branch`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.kind, self.location, self.message)
    }
}

impl std::error::Error for Diagnostic {}

static OMEGA: MultExpr = MultExpr::Omega;

/// Typing context: term variables with their declared types and
/// multiplicities, multiplicity variables in scope, and datatypes.
pub struct TypeEnv<'a> {
    pub decls: &'a DeclTable,
    vars: HashMap<Name, Vec<(Type, MultExpr)>>,
    mult_vars: Vec<Name>,
    /// Extra variables, all bound at ω, consulted after `vars`.
    fallback: Option<&'a HashMap<Name, Type>>,
}

impl<'a> TypeEnv<'a> {
    pub fn new(decls: &'a DeclTable) -> TypeEnv<'a> {
        TypeEnv {
            decls,
            vars: HashMap::new(),
            mult_vars: Vec::new(),
            fallback: None,
        }
    }

    pub fn with_fallback(decls: &'a DeclTable, fallback: &'a HashMap<Name, Type>) -> TypeEnv<'a> {
        TypeEnv {
            fallback: Some(fallback),
            ..TypeEnv::new(decls)
        }
    }

    pub fn bind(&mut self, x: Name, ty: Type, mult: MultExpr) {
        self.vars.entry(x).or_default().push((ty, mult));
    }

    pub fn unbind(&mut self, x: &str) {
        if let Some(stack) = self.vars.get_mut(x) {
            stack.pop();
            if stack.is_empty() {
                self.vars.remove(x);
            }
        }
    }

    pub fn lookup(&self, x: &str) -> Option<(&Type, &MultExpr)> {
        if let Some((t, m)) = self.vars.get(x).and_then(|s| s.last()) {
            return Some((t, m));
        }
        self.fallback.and_then(|f| f.get(x)).map(|t| (t, &OMEGA))
    }

    pub fn bind_mult_var(&mut self, p: Name) {
        self.mult_vars.push(p);
    }

    pub fn unbind_mult_var(&mut self) {
        self.mult_vars.pop();
    }

    pub fn has_mult_var(&self, p: &str) -> bool {
        self.mult_vars.iter().any(|q| &**q == p)
    }
}

/// A term annotated with its synthesised type. Applications additionally
/// record the arrow's multiplicity, constructors their instantiated fields.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Typed {
    pub ty: Type,
    pub node: TypedNode,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedBranch {
    pub con: Name,
    pub binders: Vec<Name>,
    pub body: Typed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedBinding {
    pub var: Name,
    pub ty: Type,
    pub rhs: Typed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypedNode {
    Var(Name),
    Lam {
        mult: MultExpr,
        var: Name,
        ty: Type,
        body: Box<Typed>,
    },
    App {
        fun: Box<Typed>,
        arg: Box<Typed>,
        mult: MultExpr,
    },
    MultLam {
        var: Name,
        body: Box<Typed>,
    },
    MultApp(Box<Typed>, MultExpr),
    Con {
        name: Name,
        tys: Vec<Type>,
        mults: Vec<MultExpr>,
        fields: Vec<Field>,
        args: Vec<Typed>,
    },
    Case {
        mult: MultExpr,
        scrut: Box<Typed>,
        branches: Vec<TypedBranch>,
    },
    Let {
        mult: MultExpr,
        recursive: bool,
        binds: Vec<TypedBinding>,
        body: Box<Typed>,
    },
    Int(i64),
    Prim(PrimOp, Vec<Typed>),
    /// Runtime forms are kept verbatim.
    Runtime(Term),
    /// Stands in for subtrees when annotations were not requested.
    Unannotated,
}

impl Typed {
    fn bare(ty: Type) -> Typed {
        Typed {
            ty,
            node: TypedNode::Unannotated,
        }
    }

    /// The underlying term. Panics on unannotated trees.
    pub fn erase(&self) -> Term {
        match &self.node {
            TypedNode::Var(x) => Term::Var(x.clone()),
            TypedNode::Lam {
                mult,
                var,
                ty,
                body,
            } => Term::lam(mult.clone(), var.clone(), ty.clone(), body.erase()),
            TypedNode::App { fun, arg, .. } => Term::app(fun.erase(), arg.erase()),
            TypedNode::MultLam { var, body } => Term::mult_lam(var.clone(), body.erase()),
            TypedNode::MultApp(t, m) => Term::mult_app(t.erase(), m.clone()),
            TypedNode::Con {
                name,
                tys,
                mults,
                args,
                ..
            } => Term::con(
                name.clone(),
                tys.clone(),
                mults.clone(),
                args.iter().map(Typed::erase).collect(),
            ),
            TypedNode::Case {
                mult,
                scrut,
                branches,
            } => Term::case(
                mult.clone(),
                scrut.erase(),
                branches
                    .iter()
                    .map(|b| Branch {
                        con: b.con.clone(),
                        binders: b.binders.clone(),
                        body: b.body.erase(),
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
                        rhs: b.rhs.erase(),
                    })
                    .collect(),
                body: Box::new(body.erase()),
            },
            TypedNode::Int(i) => Term::Int(*i),
            TypedNode::Prim(op, args) => Term::Prim(*op, args.iter().map(Typed::erase).collect()),
            TypedNode::Runtime(t) => t.clone(),
            TypedNode::Unannotated => panic!("erase of an unannotated tree"),
        }
    }
}

struct Checker {
    lenient: bool,
    annotate: bool,
    path: Vec<String>,
    /// Outermost lets that stand for top-level definitions.
    top_levels: usize,
}

type CResult<T> = Result<T, Diagnostic>;

impl Checker {
    fn diag<T>(&self, kind: DiagnosticKind, message: impl Into<String>) -> CResult<T> {
        Err(Diagnostic {
            kind,
            location: if self.path.is_empty() {
                "top level".to_string()
            } else {
                self.path.join(" › ")
            },
            message: message.into(),
        })
    }

    fn node(&self, ty: Type, node: impl FnOnce() -> TypedNode) -> Typed {
        if self.annotate {
            Typed { ty, node: node() }
        } else {
            Typed::bare(ty)
        }
    }

    fn scoped<T>(&mut self, seg: Option<String>, f: impl FnOnce(&mut Checker) -> T) -> T {
        let pushed = seg.is_some();
        if let Some(s) = seg {
            self.path.push(s);
        }
        let r = f(self);
        if pushed {
            self.path.pop();
        }
        r
    }

    fn check_mult(&self, env: &TypeEnv, m: &MultExpr) -> CResult<()> {
        for v in m.free_vars() {
            if !env.has_mult_var(&v) {
                return self.diag(
                    DiagnosticKind::UnboundVariable,
                    format!("multiplicity variable `{}` is not in scope", v),
                );
            }
        }
        Ok(())
    }

    fn check_type(&self, env: &mut TypeEnv, t: &Type) -> CResult<()> {
        crate::deep(|| match t {
            Type::Int | Type::Var(_) => Ok(()),
            Type::MArray(e) | Type::Array(e) => self.check_type(env, e),
            Type::Arrow(a, m, b) => {
                self.check_type(env, a)?;
                self.check_mult(env, m)?;
                self.check_type(env, b)
            }
            Type::Forall(p, body) => {
                env.bind_mult_var(p.clone());
                let r = self.check_type(env, body);
                env.unbind_mult_var();
                r
            }
            Type::Data { name, mults, args } => {
                let decl = match env.decls.get(name) {
                    Some(d) => d,
                    None => {
                        return self.diag(
                            DiagnosticKind::UnboundVariable,
                            format!("unknown datatype `{}`", name),
                        )
                    }
                };
                if decl.mult_params.len() != mults.len() || decl.type_params.len() != args.len() {
                    return self.diag(
                        DiagnosticKind::ArityMismatch,
                        format!(
                            "`{}` takes {} multiplicity and {} type arguments, given {} and {}",
                            name,
                            decl.mult_params.len(),
                            decl.type_params.len(),
                            mults.len(),
                            args.len()
                        ),
                    );
                }
                for m in mults {
                    self.check_mult(env, m)?;
                }
                for a in args {
                    self.check_type(env, a)?;
                }
                Ok(())
            }
        })
    }

    fn expect_type(&self, expected: &Type, actual: &Type, what: &str) -> CResult<()> {
        if expected.equiv(actual) {
            Ok(())
        } else {
            self.diag(
                DiagnosticKind::TypeMismatch,
                format!(
                    "{}: expected `{}`, found `{}`",
                    what,
                    type_to_string(expected),
                    type_to_string(actual)
                ),
            )
        }
    }

    fn check_binder(&self, x: &Name, used: &UsageMult, declared: &MultExpr) -> CResult<()> {
        if self.lenient || sub_usage(used, declared) {
            Ok(())
        } else {
            self.diag(
                DiagnosticKind::LinearityMismatch,
                format!(
                    "`{}` is used {} times but bound at multiplicity {}",
                    x,
                    used,
                    declared.simplify()
                ),
            )
        }
    }

    fn join(&self, a: &Usage, b: &Usage) -> CResult<Usage> {
        match usage_join(a, b) {
            Ok(u) => Ok(u),
            Err(e) if self.lenient => {
                let mut fixed = a.clone();
                fixed.set(e.var.clone(), UsageMult::omega());
                let mut other = b.clone();
                other.set(e.var, UsageMult::omega());
                self.join(&fixed, &other)
            }
            Err(e) => self.diag(
                DiagnosticKind::UnjoinableUsage,
                format!(
                    "branches use `{}` at incompatible multiplicities {} and {}",
                    e.var, e.left, e.right
                ),
            ),
        }
    }

    fn infer(&mut self, env: &mut TypeEnv, t: &Term) -> CResult<(Typed, Usage)> {
        stacker::maybe_grow(64 * 1024, 2 * 1024 * 1024, || self.infer_inner(env, t))
    }

    fn infer_inner(&mut self, env: &mut TypeEnv, t: &Term) -> CResult<(Typed, Usage)> {
        match t {
            Term::Var(x) => match env.lookup(x) {
                Some((ty, _)) => {
                    let ty = ty.clone();
                    Ok((
                        self.node(ty, || TypedNode::Var(x.clone())),
                        Usage::single(x.clone()),
                    ))
                }
                None => self.diag(
                    DiagnosticKind::UnboundVariable,
                    format!("variable `{}` is not in scope", x),
                ),
            },
            Term::Int(i) => Ok((self.node(Type::Int, || TypedNode::Int(*i)), Usage::empty())),
            Term::Lam {
                mult,
                var,
                ty,
                body,
            } => self.scoped(Some(format!("λ{}", var)), |c| {
                c.check_mult(env, mult)?;
                c.check_type(env, ty)?;
                env.bind(var.clone(), ty.clone(), mult.clone());
                let r = c.infer(env, body);
                env.unbind(var);
                let (body_t, mut u) = r?;
                let used = u.take(var);
                c.check_binder(var, &used, mult)?;
                let fty = Type::arrow(ty.clone(), mult.clone(), body_t.ty.clone());
                let node = c.node(fty, || TypedNode::Lam {
                    mult: mult.clone(),
                    var: var.clone(),
                    ty: ty.clone(),
                    body: Box::new(body_t),
                });
                Ok((node, u))
            }),
            Term::App(f, a) => {
                let (ft, fu) = self.infer(env, f)?;
                let (dom, mult, cod) = match &ft.ty {
                    Type::Arrow(d, m, c) => ((**d).clone(), m.clone(), (**c).clone()),
                    other => {
                        return self.diag(
                            DiagnosticKind::TypeMismatch,
                            format!(
                                "applying a non-function of type `{}`",
                                type_to_string(other)
                            ),
                        )
                    }
                };
                let (at, au) = self.scoped(Some("argument".into()), |c| c.infer(env, a))?;
                self.expect_type(&dom, &at.ty, "argument type")?;
                let u = fu.add(&au.scale(&mult));
                let node = self.node(cod, || TypedNode::App {
                    fun: Box::new(ft),
                    arg: Box::new(at),
                    mult,
                });
                Ok((node, u))
            }
            Term::MultLam { var, body } => self.scoped(Some(format!("Λ{}", var)), |c| {
                if env.has_mult_var(var) {
                    return c.diag(
                        DiagnosticKind::FreshnessViolation,
                        format!("multiplicity variable `{}` is already in scope", var),
                    );
                }
                env.bind_mult_var(var.clone());
                let r = c.infer(env, body);
                env.unbind_mult_var();
                let (bt, u) = r?;
                // usages mentioning the bound variable can only be met by an
                // outer ω binder, so they escape as ω
                let u = Usage::from_entries(u.iter().map(|(k, m)| {
                    let escapes = match m {
                        UsageMult::Mult(nf) => nf.monomials().any(|(mono, _)| mono.contains(var)),
                        UsageMult::Zero => false,
                    };
                    (
                        k.clone(),
                        if escapes {
                            UsageMult::omega()
                        } else {
                            m.clone()
                        },
                    )
                }));
                let ty = Type::Forall(var.clone(), Box::new(bt.ty.clone()));
                let node = c.node(ty, || TypedNode::MultLam {
                    var: var.clone(),
                    body: Box::new(bt),
                });
                Ok((node, u))
            }),
            Term::MultApp(inner, m) => {
                self.check_mult(env, m)?;
                let (it, u) = self.infer(env, inner)?;
                let ty = match &it.ty {
                    Type::Forall(p, body) => body.subst_mult(p, m),
                    other => {
                        return self.diag(
                            DiagnosticKind::TypeMismatch,
                            format!(
                                "multiplicity application to a term of type `{}`",
                                type_to_string(other)
                            ),
                        )
                    }
                };
                let node = self.node(ty, || TypedNode::MultApp(Box::new(it), m.clone()));
                Ok((node, u))
            }
            Term::Con {
                name,
                tys,
                mults,
                args,
            } => self.scoped(Some(name.to_string()), |c| {
                c.infer_con(env, name, tys, mults, args)
            }),
            Term::Case {
                mult,
                scrut,
                branches,
            } => self.scoped(Some("case".into()), |c| {
                c.infer_case(env, mult, scrut, branches)
            }),
            Term::Let {
                mult,
                recursive,
                binds,
                body,
            } => self.infer_let(env, mult, *recursive, binds, body),
            Term::Prim(op, args) => {
                self.scoped(Some(op.name().into()), |c| c.infer_prim(env, *op, args))
            }
            Term::Array {
                elem,
                frozen,
                elems,
                ..
            } => {
                self.check_type(env, elem)?;
                let mut u = Usage::empty();
                for e in elems {
                    let ety = match env.lookup(e) {
                        Some((ty, _)) => ty.clone(),
                        None => {
                            return self.diag(
                                DiagnosticKind::UnboundVariable,
                                format!("array element `{}` is not in scope", e),
                            )
                        }
                    };
                    self.expect_type(elem, &ety, "array element")?;
                    u = u.add(&Usage::from_entries([(e.clone(), UsageMult::omega())]));
                }
                let ty = if *frozen {
                    Type::Array(Box::new(elem.clone()))
                } else {
                    Type::MArray(Box::new(elem.clone()))
                };
                Ok((self.node(ty, || TypedNode::Runtime(t.clone())), u))
            }
            Term::Loc(l) => self.diag(
                DiagnosticKind::TypeMismatch,
                format!("array cell {} has no static type", l),
            ),
        }
    }

    fn infer_con(
        &mut self,
        env: &mut TypeEnv,
        name: &Name,
        tys: &[Type],
        mults: &[MultExpr],
        args: &[Term],
    ) -> CResult<(Typed, Usage)> {
        let (decl, con) = match env.decls.lookup_con(name) {
            Some((d, c)) => (d.clone(), c.clone()),
            None => {
                return self.diag(
                    DiagnosticKind::UnboundVariable,
                    format!("unknown constructor `{}`", name),
                )
            }
        };
        if decl.type_params.len() != tys.len() || decl.mult_params.len() != mults.len() {
            return self.diag(
                DiagnosticKind::ArityMismatch,
                format!(
                    "`{}` needs {} type and {} multiplicity arguments, given {} and {}",
                    name,
                    decl.type_params.len(),
                    decl.mult_params.len(),
                    tys.len(),
                    mults.len()
                ),
            );
        }
        if con.fields.len() != args.len() {
            return self.diag(
                DiagnosticKind::ArityMismatch,
                format!(
                    "`{}` takes {} arguments, given {}",
                    name,
                    con.fields.len(),
                    args.len()
                ),
            );
        }
        for t in tys {
            self.check_type(env, t)?;
        }
        for m in mults {
            self.check_mult(env, m)?;
        }
        let fields = decl.instantiate(&con, mults, tys);
        let mut u = Usage::empty();
        let mut typed_args = Vec::with_capacity(args.len());
        for (i, (a, f)) in args.iter().zip(&fields).enumerate() {
            let (at, au) = self.infer(env, a)?;
            self.expect_type(&f.ty, &at.ty, &format!("field {} of `{}`", i + 1, name))?;
            u = u.add(&au.scale(&f.mult));
            typed_args.push(at);
        }
        let ty = Type::Data {
            name: decl.name.clone(),
            mults: mults.to_vec(),
            args: tys.to_vec(),
        };
        let node = self.node(ty, || TypedNode::Con {
            name: name.clone(),
            tys: tys.to_vec(),
            mults: mults.to_vec(),
            fields,
            args: typed_args,
        });
        Ok((node, u))
    }

    fn infer_case(
        &mut self,
        env: &mut TypeEnv,
        mult: &MultExpr,
        scrut: &Term,
        branches: &[Branch],
    ) -> CResult<(Typed, Usage)> {
        self.check_mult(env, mult)?;
        let (st, su) = self.scoped(Some("scrutinee".into()), |c| c.infer(env, scrut))?;
        let (dname, dmults, dargs) = match &st.ty {
            Type::Data { name, mults, args } => (name.clone(), mults.clone(), args.clone()),
            other => {
                return self.diag(
                    DiagnosticKind::TypeMismatch,
                    format!("case on a non-datatype `{}`", type_to_string(other)),
                )
            }
        };
        let decl = match env.decls.get(&dname) {
            Some(d) => d.clone(),
            None => {
                return self.diag(
                    DiagnosticKind::UnboundVariable,
                    format!("unknown datatype `{}`", dname),
                )
            }
        };
        if branches.is_empty() {
            return self.diag(DiagnosticKind::ArityMismatch, "case without branches");
        }
        let mut seen = HashSet::new();
        let mut result_ty: Option<Type> = None;
        let mut joined: Option<Usage> = None;
        let mut typed_branches = Vec::with_capacity(branches.len());
        for b in branches {
            let r = self.scoped(Some(format!("{} branch", b.con)), |c| {
                let con = match decl.con(&b.con) {
                    Some(con) => con,
                    None => {
                        return c.diag(
                            DiagnosticKind::TypeMismatch,
                            format!("`{}` is not a constructor of `{}`", b.con, dname),
                        )
                    }
                };
                if !seen.insert(b.con.clone()) {
                    return c.diag(
                        DiagnosticKind::TypeMismatch,
                        format!("constructor `{}` matched twice", b.con),
                    );
                }
                if con.fields.len() != b.binders.len() {
                    return c.diag(
                        DiagnosticKind::ArityMismatch,
                        format!(
                            "`{}` has {} fields, pattern binds {}",
                            b.con,
                            con.fields.len(),
                            b.binders.len()
                        ),
                    );
                }
                let distinct: BTreeSet<&Name> = b.binders.iter().collect();
                if distinct.len() != b.binders.len() {
                    return c.diag(
                        DiagnosticKind::TypeMismatch,
                        "pattern binds the same variable twice",
                    );
                }
                let fields = decl.instantiate(con, &dmults, &dargs);
                let field_mults: Vec<MultExpr> = fields
                    .iter()
                    .map(|f| MultExpr::mul(mult.clone(), f.mult.clone()))
                    .collect();
                for (x, (f, m)) in b.binders.iter().zip(fields.iter().zip(&field_mults)) {
                    env.bind(x.clone(), f.ty.clone(), m.clone());
                }
                let r = c.infer(env, &b.body);
                for x in b.binders.iter().rev() {
                    env.unbind(x);
                }
                let (bt, mut bu) = r?;
                for (x, m) in b.binders.iter().zip(&field_mults) {
                    let used = bu.take(x);
                    c.check_binder(x, &used, m)?;
                }
                Ok((bt, bu))
            })?;
            let (bt, bu) = r;
            match &result_ty {
                None => result_ty = Some(bt.ty.clone()),
                Some(rt) => {
                    let rt = rt.clone();
                    self.scoped(Some(format!("{} branch", b.con)), |c| {
                        c.expect_type(&rt, &bt.ty, "branch type")
                    })?
                }
            }
            joined = Some(match joined {
                None => bu,
                Some(j) => self.join(&j, &bu)?,
            });
            typed_branches.push(TypedBranch {
                con: b.con.clone(),
                binders: b.binders.clone(),
                body: bt,
            });
        }
        let u = su.scale(mult).add(&joined.expect("at least one branch"));
        let ty = result_ty.expect("at least one branch");
        let node = self.node(ty, || TypedNode::Case {
            mult: mult.clone(),
            scrut: Box::new(st),
            branches: typed_branches,
        });
        Ok((node, u))
    }

    fn infer_let(
        &mut self,
        env: &mut TypeEnv,
        mult: &MultExpr,
        recursive: bool,
        binds: &[Binding],
        body: &Term,
    ) -> CResult<(Typed, Usage)> {
        let is_top = self.top_levels > 0;
        let outer_levels = self.top_levels;
        if is_top {
            self.top_levels -= 1;
        }
        let label = |x: &Name| {
            if is_top {
                format!("def {}", x)
            } else {
                format!("let {}", x)
            }
        };
        self.check_mult(env, mult)?;
        if recursive && !mult_equiv(mult, &MultExpr::Omega) {
            return self.diag(
                DiagnosticKind::LinearityMismatch,
                format!("recursive bindings must have multiplicity w, not {}", mult),
            );
        }
        if binds.is_empty() {
            return self.diag(DiagnosticKind::ArityMismatch, "empty binding group");
        }
        let distinct: BTreeSet<&Name> = binds.iter().map(|b| &b.var).collect();
        if distinct.len() != binds.len() {
            return self.diag(
                DiagnosticKind::TypeMismatch,
                "a binding group defines the same variable twice",
            );
        }
        for b in binds {
            self.scoped(Some(label(&b.var)), |c| c.check_type(env, &b.ty))?;
        }
        let levels_in_body = self.top_levels;
        self.top_levels = 0;
        if recursive {
            for b in binds {
                env.bind(b.var.clone(), b.ty.clone(), mult.clone());
            }
        }
        let mut rhs_usage = Usage::empty();
        let mut typed_binds = Vec::with_capacity(binds.len());
        let mut failure = None;
        for b in binds {
            let r = self.scoped(Some(label(&b.var)), |c| {
                let (rt, ru) = c.infer(env, &b.rhs)?;
                c.expect_type(&b.ty, &rt.ty, "bound expression")?;
                Ok((rt, ru))
            });
            match r {
                Ok((rt, ru)) => {
                    rhs_usage = rhs_usage.add(&ru);
                    typed_binds.push(TypedBinding {
                        var: b.var.clone(),
                        ty: b.ty.clone(),
                        rhs: rt,
                    });
                }
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = failure {
            if recursive {
                for b in binds.iter().rev() {
                    env.unbind(&b.var);
                }
            }
            self.top_levels = outer_levels;
            return Err(e);
        }
        self.top_levels = levels_in_body;
        if !recursive {
            for b in binds {
                env.bind(b.var.clone(), b.ty.clone(), mult.clone());
            }
        }
        let body_seg = if is_top && levels_in_body == 0 {
            Some("main".to_string())
        } else {
            None
        };
        let r = self.scoped(body_seg, |c| c.infer(env, body));
        for b in binds.iter().rev() {
            env.unbind(&b.var);
        }
        let (bt, bu) = r?;
        let mut total = bu.add(&rhs_usage.scale(mult));
        for b in binds {
            let used = total.take(&b.var);
            self.scoped(Some(label(&b.var)), |c| c.check_binder(&b.var, &used, mult))?;
        }
        let ty = bt.ty.clone();
        let node = self.node(ty, || TypedNode::Let {
            mult: mult.clone(),
            recursive,
            binds: typed_binds,
            body: Box::new(bt),
        });
        Ok((node, total))
    }

    fn unrestricted(&self, env: &TypeEnv, inner: Type) -> CResult<Type> {
        match env.decls.get("Unrestricted") {
            Some(d) if d.mult_params.is_empty() && d.type_params.len() == 1 => {
                Ok(Type::data("Unrestricted", Vec::new(), vec![inner]))
            }
            _ => self.diag(
                DiagnosticKind::UnboundVariable,
                "array primitives need the `Unrestricted a` datatype",
            ),
        }
    }

    fn infer_prim(
        &mut self,
        env: &mut TypeEnv,
        op: PrimOp,
        args: &[Term],
    ) -> CResult<(Typed, Usage)> {
        if args.len() != op.arity() {
            return self.diag(
                DiagnosticKind::ArityMismatch,
                format!(
                    "`{}` takes {} arguments, given {}",
                    op.name(),
                    op.arity(),
                    args.len()
                ),
            );
        }
        let mut typed = Vec::with_capacity(args.len());
        let mut u = Usage::empty();
        for (a, m) in args.iter().zip(op.arg_mults()) {
            let (at, au) = self.infer(env, a)?;
            u = u.add(&au.scale(m));
            typed.push(at);
        }
        let tys: Vec<&Type> = typed.iter().map(|t| &t.ty).collect();
        let int = Type::Int;
        let ty = match op {
            PrimOp::NewMArray => {
                self.expect_type(&int, tys[0], "array size")?;
                let elem = tys[1].clone();
                let k = match tys[2] {
                    Type::Arrow(d, m, c) if mult_equiv(m, &MultExpr::One) => {
                        self.expect_type(
                            &Type::MArray(Box::new(elem.clone())),
                            d,
                            "continuation argument",
                        )?;
                        (**c).clone()
                    }
                    other => {
                        return self.diag(
                            DiagnosticKind::TypeMismatch,
                            format!(
                                "continuation: expected `MArray {} -o Unrestricted b`, found `{}`",
                                type_to_string(&elem),
                                type_to_string(other)
                            ),
                        )
                    }
                };
                match &k {
                    Type::Data { name, args, .. }
                        if &**name == "Unrestricted" && args.len() == 1 =>
                    {
                        self.unrestricted(env, args[0].clone())?
                    }
                    other => {
                        return self.diag(
                            DiagnosticKind::TypeMismatch,
                            format!(
                                "continuation result: expected `Unrestricted b`, found `{}`",
                                type_to_string(other)
                            ),
                        )
                    }
                }
            }
            PrimOp::Write => {
                let elem = match tys[0] {
                    Type::MArray(e) => (**e).clone(),
                    other => {
                        return self.diag(
                            DiagnosticKind::TypeMismatch,
                            format!(
                                "write: expected a mutable array, found `{}`",
                                type_to_string(other)
                            ),
                        )
                    }
                };
                self.expect_type(&int, tys[1], "array index")?;
                self.expect_type(&elem, tys[2], "written element")?;
                Type::MArray(Box::new(elem))
            }
            PrimOp::Freeze => {
                let elem = match tys[0] {
                    Type::MArray(e) => (**e).clone(),
                    other => {
                        return self.diag(
                            DiagnosticKind::TypeMismatch,
                            format!(
                                "freeze: expected a mutable array, found `{}`",
                                type_to_string(other)
                            ),
                        )
                    }
                };
                self.unrestricted(env, Type::Array(Box::new(elem)))?
            }
            PrimOp::Index => {
                let elem = match tys[0] {
                    Type::Array(e) => (**e).clone(),
                    other => {
                        return self.diag(
                            DiagnosticKind::TypeMismatch,
                            format!(
                                "index: expected a frozen array, found `{}`",
                                type_to_string(other)
                            ),
                        )
                    }
                };
                self.expect_type(&int, tys[1], "array index")?;
                elem
            }
            PrimOp::Add | PrimOp::Sub | PrimOp::Mul | PrimOp::Eq | PrimOp::Lt => {
                self.expect_type(&int, tys[0], "left operand")?;
                self.expect_type(&int, tys[1], "right operand")?;
                if matches!(op, PrimOp::Eq | PrimOp::Lt) {
                    match env.decls.get("Bool") {
                        Some(d) if d.mult_params.is_empty() && d.type_params.is_empty() => {
                            Type::simple("Bool")
                        }
                        _ => {
                            return self.diag(
                                DiagnosticKind::UnboundVariable,
                                "comparisons need the `Bool` datatype",
                            )
                        }
                    }
                } else {
                    Type::Int
                }
            }
        };
        let node = self.node(ty, || TypedNode::Prim(op, typed));
        Ok((node, u))
    }
}

fn checker(lenient: bool, annotate: bool) -> Checker {
    Checker {
        lenient,
        annotate,
        path: Vec::new(),
        top_levels: 0,
    }
}

/// Synthesises the type and usage of `t`, with full annotations.
pub fn infer(env: &mut TypeEnv, t: &Term) -> Result<(Typed, Usage), Diagnostic> {
    checker(false, true).infer(env, t)
}

/// Like [`infer`] but without building the annotated tree.
pub fn infer_type(env: &mut TypeEnv, t: &Term) -> Result<(Type, Usage), Diagnostic> {
    checker(false, false).infer(env, t).map(|(t, u)| (t.ty, u))
}

/// Type synthesis that ignores linearity: usages are still computed, but no
/// binder rejects them and unjoinable branches widen to ω.
pub fn infer_lenient(env: &mut TypeEnv, t: &Term) -> Result<(Typed, Usage), Diagnostic> {
    checker(true, true).infer(env, t)
}

pub fn infer_type_lenient(env: &mut TypeEnv, t: &Term) -> Result<(Type, Usage), Diagnostic> {
    checker(true, false).infer(env, t).map(|(t, u)| (t.ty, u))
}

/// Checks parameter scoping and field well-formedness of one declaration
/// against the table of all declarations.
pub fn check_datadecl(d: &DataDecl, table: &DeclTable) -> Result<(), Diagnostic> {
    let malformed = |message: String| {
        Err(Diagnostic {
            kind: DiagnosticKind::MalformedDecl,
            location: format!("data {}", d.name),
            message,
        })
    };
    let mparams: BTreeSet<&Name> = d.mult_params.iter().collect();
    if mparams.len() != d.mult_params.len() {
        return malformed("repeated multiplicity parameter".into());
    }
    let tparams: BTreeSet<&Name> = d.type_params.iter().collect();
    if tparams.len() != d.type_params.len() {
        return malformed("repeated type parameter".into());
    }
    let mut seen = HashSet::new();
    for c in &d.cons {
        if !seen.insert(&c.name) {
            return malformed(format!("constructor `{}` declared twice", c.name));
        }
        for (i, f) in c.fields.iter().enumerate() {
            for v in f.mult.free_vars().into_iter().chain(f.ty.free_mult_vars()) {
                if !mparams.contains(&v) {
                    return malformed(format!(
                        "field {} of `{}` mentions multiplicity `{}`, which is not a parameter",
                        i + 1,
                        c.name,
                        v
                    ));
                }
            }
            for v in f.ty.type_vars() {
                if !tparams.contains(&v) {
                    return malformed(format!(
                        "field {} of `{}` mentions type `{}`, which is not a parameter",
                        i + 1,
                        c.name,
                        v
                    ));
                }
            }
            let mut env = TypeEnv::new(table);
            for p in &d.mult_params {
                env.bind_mult_var(p.clone());
            }
            let ck = checker(false, false);
            if let Err(e) = ck.check_type(&mut env, &f.ty) {
                return malformed(format!("field {} of `{}`: {}", i + 1, c.name, e.message));
            }
        }
    }
    Ok(())
}

/// The single term a program stands for: ω definitions form one recursive
/// group, linear definitions nest inside it in source order, and `main`
/// sits innermost.
pub fn program_term(defs: &[Def], main: &Term) -> Term {
    let mut t = main.clone();
    for d in defs.iter().rev().filter(|d| d.mult != MultExpr::Omega) {
        t = Term::Let {
            mult: d.mult.clone(),
            recursive: false,
            binds: vec![Binding {
                var: d.name.clone(),
                ty: d.ty.clone(),
                rhs: d.body.clone(),
            }],
            body: Box::new(t),
        };
    }
    let shared: Vec<Binding> = defs
        .iter()
        .filter(|d| d.mult == MultExpr::Omega)
        .map(|d| Binding {
            var: d.name.clone(),
            ty: d.ty.clone(),
            rhs: d.body.clone(),
        })
        .collect();
    if !shared.is_empty() {
        t = Term::Let {
            mult: MultExpr::Omega,
            recursive: true,
            binds: shared,
            body: Box::new(t),
        };
    }
    t
}

#[derive(Clone, Debug)]
pub struct CheckedProgram {
    pub decls: DeclTable,
    pub term: Term,
    pub typed: Typed,
    pub ty: Type,
}

fn top_level_groups(defs: &[Def]) -> usize {
    let linear = defs.iter().filter(|d| d.mult != MultExpr::Omega).count();
    let shared = usize::from(defs.iter().any(|d| d.mult == MultExpr::Omega));
    linear + shared
}

fn check_decls(decls: &[DataDecl]) -> Result<DeclTable, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut names = HashSet::new();
    let mut cons = HashSet::new();
    for d in decls {
        if !names.insert(d.name.clone()) {
            diags.push(Diagnostic {
                kind: DiagnosticKind::MalformedDecl,
                location: format!("data {}", d.name),
                message: format!("datatype `{}` declared twice", d.name),
            });
        }
        for c in &d.cons {
            if !cons.insert(c.name.clone()) {
                diags.push(Diagnostic {
                    kind: DiagnosticKind::MalformedDecl,
                    location: format!("data {}", d.name),
                    message: format!("constructor `{}` declared twice", c.name),
                });
            }
        }
    }
    let table = DeclTable::from_decls(decls);
    for d in decls {
        if let Err(e) = check_datadecl(d, &table) {
            diags.push(e);
        }
    }
    if diags.is_empty() {
        Ok(table)
    } else {
        Err(diags)
    }
}

fn check_program_with(
    decls: &[DataDecl],
    defs: &[Def],
    main: &Term,
    lenient: bool,
) -> Result<CheckedProgram, Vec<Diagnostic>> {
    let table = check_decls(decls)?;
    let term = program_term(defs, main);
    let mut env = TypeEnv::new(&table);
    let mut ck = checker(lenient, true);
    ck.top_levels = top_level_groups(defs);
    if ck.top_levels == 0 {
        ck.path.push("main".into());
    }
    let (typed, _) = ck.infer(&mut env, &term).map_err(|e| vec![e])?;
    let ty = typed.ty.clone();
    Ok(CheckedProgram {
        decls: table,
        term,
        typed,
        ty,
    })
}

/// Validates declarations and types the whole program as one closed term.
pub fn check_program(
    decls: &[DataDecl],
    defs: &[Def],
    main: &Term,
) -> Result<CheckedProgram, Vec<Diagnostic>> {
    check_program_with(decls, defs, main, false)
}

/// Like [`check_program`] but linearity is not enforced. Used to force-run
/// ill-typed programs.
pub fn check_program_lenient(
    decls: &[DataDecl],
    defs: &[Def],
    main: &Term,
) -> Result<CheckedProgram, Vec<Diagnostic>> {
    check_program_with(decls, defs, main, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_source, parse_term};

    const DECLS: &str = "
        data Bool where { True : Bool ; False : Bool }
        data Pair [p, q] a b where { Pair : a ->[p] b ->[q] Pair p q a b }
        data Unrestricted a where { Unrestricted : a -> Unrestricted a }
    ";

    fn table() -> DeclTable {
        DeclTable::from_decls(&parse_source(DECLS, &DeclTable::new()).unwrap().decls)
    }

    fn check(src: &str) -> Result<(Type, Usage), Diagnostic> {
        let t = table();
        let term = parse_term(src, &t).unwrap();
        let mut env = TypeEnv::new(&t);
        infer(&mut env, &term).map(|(ty, u)| (ty.ty, u))
    }

    #[test]
    fn identity_at_both_multiplicities() {
        assert!(check("\\[1] x : Int . x").is_ok());
        assert!(check("\\[w] x : Int . x").is_ok());
    }

    #[test]
    fn unused_linear_binder_rejected() {
        let e = check("\\[1] x : Int . 3").unwrap_err();
        assert_eq!(e.kind, DiagnosticKind::LinearityMismatch);
        assert!(e.location.contains("λx"));
    }

    #[test]
    fn linear_arrow_needs_linear_argument_use() {
        let e = check("\\[1] x : Int . (\\[w] y : Int . y) x").unwrap_err();
        assert_eq!(e.kind, DiagnosticKind::LinearityMismatch);
    }

    #[test]
    fn recursive_linear_let_rejected() {
        let t = table();
        let term = Term::Let {
            mult: MultExpr::One,
            recursive: true,
            binds: vec![Binding {
                var: Name::new("x"),
                ty: Type::Int,
                rhs: Term::Int(1),
            }],
            body: Box::new(Term::var("x")),
        };
        let mut env = TypeEnv::new(&t);
        assert!(infer(&mut env, &term).is_err());
    }

    #[test]
    fn freshness() {
        let e = check("/\\p . /\\p . 3").unwrap_err();
        assert_eq!(e.kind, DiagnosticKind::FreshnessViolation);
    }

    #[test]
    fn multiplicity_application_substitutes() {
        let src = "(/\\p . \\[w] f : Int ->[p] Int . \\[p] x : Int . f x) @[1]";
        let (ty, _) = check(src).unwrap();
        let lin = Type::lolli(Type::Int, Type::Int);
        assert_eq!(ty, Type::arrow(lin.clone(), MultExpr::Omega, lin));
    }

    #[test]
    fn case_joins_branches() {
        let ok = "\\[1] b : Bool . \\[1] x : Int . case[1] b of { True -> x ; False -> x }";
        assert!(check(ok).is_ok());
        let bad = "\\[1] b : Bool . \\[1] x : Int . case[1] b of { True -> x ; False -> 0 }";
        assert_eq!(
            check(bad).unwrap_err().kind,
            DiagnosticKind::LinearityMismatch
        );
    }

    #[test]
    fn lenient_mode_ignores_linearity() {
        let t = table();
        let term = parse_term("\\[1] x : Int . 3", &t).unwrap();
        let mut env = TypeEnv::new(&t);
        assert!(infer_lenient(&mut env, &term).is_ok());
    }

    #[test]
    fn annotation_erases_back() {
        let t = table();
        let src = "\\[1] x : Int . Pair @[Int, Int] @[1, w] x 3";
        let term = parse_term(src, &t).unwrap();
        let mut env = TypeEnv::new(&t);
        let (typed, _) = infer(&mut env, &term).unwrap();
        assert_eq!(typed.erase(), term);
    }

    #[test]
    fn datadecl_scoping() {
        let src = "data Bad [p] where { Bad : Int ->[q] Bad p }";
        let file = parse_source(src, &DeclTable::new()).unwrap();
        let table = DeclTable::from_decls(&file.decls);
        let e = check_datadecl(&file.decls[0], &table).unwrap_err();
        assert_eq!(e.kind, DiagnosticKind::MalformedDecl);
    }
}
