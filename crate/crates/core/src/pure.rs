//! Evaluation without mutation. Every binding and every expression under
//! evaluation carries the demand it is evaluated at; linear bindings are
//! removed when they are read, and `write` builds a new array value.
//!
//! The machine state can be read back as a single term (see
//! [`encode_state`]) so that the type checker can confirm that each step
//! preserves typing.

use std::collections::{BTreeSet, HashMap};

use indexmap::IndexMap;

use crate::mult::MultExpr;
use crate::name::{Name, NameSupply};
use crate::ordinary::{arith, index_in, observable, opaque_kind, substitute_fields, var_arg};
use crate::outcome::{summarize, Halt, Observation, Outcome, Stuck, StuckReason, TraceRecord};
use crate::pretty::term_to_string;
use crate::syntax::{Binding, ConDecl, DataDecl, DeclTable, Field, PrimOp, Term, Type};
use crate::typecheck::{infer_type, infer_type_lenient, TypeEnv};

/// How many times a value is needed: exactly once, or any number of times.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Demand {
    One,
    Omega,
}

impl Demand {
    /// `None` for multiplicities that still mention variables.
    pub fn from_mult(m: &MultExpr) -> Option<Demand> {
        let nf = m.normalize();
        if nf.is_one() {
            Some(Demand::One)
        } else if nf.is_omega() {
            Some(Demand::Omega)
        } else {
            None
        }
    }

    pub fn mult(self) -> MultExpr {
        match self {
            Demand::One => MultExpr::One,
            Demand::Omega => MultExpr::Omega,
        }
    }

    pub fn times(self, other: Demand) -> Demand {
        if self == Demand::One && other == Demand::One {
            Demand::One
        } else {
            Demand::Omega
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvBinding {
    pub demand: Demand,
    pub ty: Type,
    pub term: Term,
}

/// A term together with the demand on it and its type: the focus of
/// evaluation or a pending stack entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub term: Term,
    pub demand: Demand,
    pub ty: Type,
}

/// A snapshot of the machine.
#[derive(Clone, Debug, Default)]
pub struct AnnState {
    /// Shared variables whose evaluation is in progress.
    pub xi: Vec<(Name, Type)>,
    pub env: IndexMap<Name, EnvBinding>,
    pub focus: Option<Frame>,
    /// Pending entries, bottom first.
    pub stack: Vec<Frame>,
}

impl AnnState {
    /// The state for evaluating a closed term.
    pub fn initial(term: Term, ty: Type) -> AnnState {
        AnnState {
            focus: Some(Frame {
                term,
                demand: Demand::One,
                ty,
            }),
            ..AnnState::default()
        }
    }

    pub fn linear_bindings(&self) -> usize {
        linear_count(&self.env)
    }
}

fn linear_count(env: &IndexMap<Name, EnvBinding>) -> usize {
    env.values().filter(|b| b.demand == Demand::One).count()
}

const PAIR: &str = "%WPair";
const UNIT: &str = "%Unit";

/// The declarations plus the two internal datatypes used by the encoding.
pub fn encoding_decls(decls: &DeclTable) -> DeclTable {
    let mut t = decls.clone();
    if t.contains(PAIR) {
        return t;
    }
    let (p, a, b) = (Name::new("p"), Name::new("a"), Name::new("b"));
    t.insert(DataDecl {
        name: Name::new(PAIR),
        mult_params: vec![p.clone()],
        type_params: vec![a.clone(), b.clone()],
        cons: vec![ConDecl {
            name: Name::new(PAIR),
            fields: vec![
                Field {
                    ty: Type::Var(a),
                    mult: MultExpr::Var(p),
                },
                Field {
                    ty: Type::Var(b),
                    mult: MultExpr::One,
                },
            ],
        }],
    });
    t.insert(DataDecl {
        name: Name::new(UNIT),
        mult_params: vec![],
        type_params: vec![],
        cons: vec![ConDecl {
            name: Name::new(UNIT),
            fields: vec![],
        }],
    });
    t
}

/// Reads a state back as one term: shared bindings become a recursive ω
/// group, linear bindings nest as single lets in creation order, and the
/// focus and stack entries become weighted pairs whose first fields are
/// used at their demands. The pairs are combined as a balanced tree (with
/// weight 1 at inner nodes) so that the encoding stays shallow. Shared
/// bindings unreachable from the rest are dropped. Returns the term and
/// the type it must have.
pub fn encode_state<'a>(
    env: &IndexMap<Name, EnvBinding>,
    focus: Option<&'a Frame>,
    stack: impl DoubleEndedIterator<Item = &'a Frame>,
) -> (Term, Type) {
    let entries: Vec<&Frame> = focus.into_iter().chain(stack.rev()).collect();
    let leaves: Vec<(Term, Type)> = entries
        .iter()
        .map(|e| weighted(e.demand.mult(), (e.term.clone(), e.ty.clone()), unit()))
        .collect();
    let (mut term, ty) = balance(leaves);

    let mut live: BTreeSet<Name> = BTreeSet::new();
    let mut work: Vec<Name> = Vec::new();
    let mut visit = |t: &Term, work: &mut Vec<Name>| {
        for x in t.free_vars() {
            if !live.contains(&x) {
                live.insert(x.clone());
                work.push(x);
            }
        }
    };
    for e in &entries {
        visit(&e.term, &mut work);
    }
    for b in env.values().filter(|b| b.demand == Demand::One) {
        visit(&b.term, &mut work);
    }
    let mut reached: BTreeSet<Name> = BTreeSet::new();
    while let Some(x) = work.pop() {
        if let Some(b) = env.get(&x) {
            if b.demand == Demand::Omega && reached.insert(x.clone()) {
                visit(&b.term, &mut work);
            }
        }
    }

    for (x, b) in env.iter().rev().filter(|(_, b)| b.demand == Demand::One) {
        term = Term::let1(x.clone(), b.ty.clone(), b.term.clone(), term);
    }
    let shared: Vec<Binding> = env
        .iter()
        .filter(|(x, b)| b.demand == Demand::Omega && reached.contains(*x))
        .map(|(x, b)| Binding {
            var: x.clone(),
            ty: b.ty.clone(),
            rhs: b.term.clone(),
        })
        .collect();
    if !shared.is_empty() {
        term = Term::Let {
            mult: MultExpr::Omega,
            recursive: true,
            binds: shared,
            body: Box::new(term),
        };
    }
    (term, ty)
}

fn unit() -> (Term, Type) {
    (Term::con(UNIT, vec![], vec![], vec![]), Type::simple(UNIT))
}

fn weighted(m: MultExpr, (l, lt): (Term, Type), (r, rt): (Term, Type)) -> (Term, Type) {
    let ty = Type::data(PAIR, vec![m.clone()], vec![lt.clone(), rt.clone()]);
    (Term::con(PAIR, vec![lt, rt], vec![m], vec![l, r]), ty)
}

fn balance(mut items: Vec<(Term, Type)>) -> (Term, Type) {
    match items.len() {
        0 => unit(),
        1 => items.pop().expect("one item"),
        n => {
            let right = items.split_off(n / 2);
            weighted(MultExpr::One, balance(items), balance(right))
        }
    }
}

fn check_parts<'a>(
    table: &DeclTable,
    xi: &[(Name, Type)],
    env: &IndexMap<Name, EnvBinding>,
    focus: Option<&'a Frame>,
    stack: impl DoubleEndedIterator<Item = &'a Frame>,
) -> Result<(), String> {
    let (term, want) = encode_state(env, focus, stack);
    let mut tenv = TypeEnv::new(table);
    for (x, ty) in xi {
        tenv.bind(x.clone(), ty.clone(), MultExpr::Omega);
    }
    let (got, _) = infer_type(&mut tenv, &term).map_err(|d| d.to_string())?;
    if got.equiv(&want) {
        Ok(())
    } else {
        Err(format!("state has type {} but {} was expected", got, want))
    }
}

/// Explains why a state is not well typed.
pub fn check_state(s: &AnnState, decls: &DeclTable) -> Result<(), String> {
    let table = encoding_decls(decls);
    check_parts(&table, &s.xi, &s.env, s.focus.as_ref(), s.stack.iter())
}

pub fn state_welltyped(s: &AnnState, decls: &DeclTable) -> bool {
    check_state(s, decls).is_ok()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PureStats {
    pub steps: u64,
    /// Array values created, by `newMArray` or by `write`.
    pub arrays_allocated: u64,
    pub newmarray_calls: u64,
    pub writes: u64,
    pub freezes: u64,
    pub indexes: u64,
    pub state_checks: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreservationFailure {
    pub rule: &'static str,
    pub step: u64,
    pub message: String,
}

const FAILURES_KEPT: usize = 8;

pub struct PureMachine {
    table: DeclTable,
    pub env: IndexMap<Name, EnvBinding>,
    pub xi: Vec<(Name, Type)>,
    stack: Vec<Frame>,
    /// Fields of the result that deep forcing does not look into.
    residue: Vec<Frame>,
    pub fuel: u64,
    pub stats: PureStats,
    instrument: bool,
    pub failures: Vec<PreservationFailure>,
    pub failure_count: u64,
    trace: Option<Vec<TraceRecord>>,
    supply: NameSupply,
    types: HashMap<Name, Type>,
    next_array: u32,
}

fn stuck(
    reason: StuckReason,
    rule: &'static str,
    location: impl Into<String>,
    detail: impl Into<String>,
) -> Halt {
    Halt::Blocked(Stuck {
        reason,
        rule,
        location: location.into(),
        detail: detail.into(),
    })
}

fn unknown() -> Type {
    Type::Var(Name::new("?"))
}

fn hole() -> Name {
    Name::new("%k")
}

impl PureMachine {
    pub fn new(decls: &DeclTable, fuel: u64, instrument: bool, tracing: bool) -> PureMachine {
        PureMachine {
            table: encoding_decls(decls),
            env: IndexMap::new(),
            xi: Vec::new(),
            stack: Vec::new(),
            residue: Vec::new(),
            fuel,
            stats: PureStats::default(),
            instrument,
            failures: Vec::new(),
            failure_count: 0,
            trace: tracing.then(Vec::new),
            supply: NameSupply::new("h"),
            types: HashMap::new(),
            next_array: 0,
        }
    }

    /// Loads a state; its focus is returned for evaluation.
    pub fn load(&mut self, s: AnnState) -> Option<Frame> {
        for (x, b) in &s.env {
            self.types.insert(x.clone(), b.ty.clone());
        }
        for (x, ty) in &s.xi {
            self.types.insert(x.clone(), ty.clone());
        }
        let ids = s
            .env
            .values()
            .map(|b| &b.term)
            .chain(s.stack.iter().map(|f| &f.term));
        for t in ids.chain(s.focus.iter().map(|f| &f.term)) {
            if let Term::Array { id, .. } = t {
                self.next_array = self.next_array.max(id + 1);
            }
        }
        self.env = s.env;
        self.xi = s.xi;
        self.stack = s.stack;
        s.focus
    }

    /// The current state with the given focus.
    pub fn snapshot(&self, focus: Option<Frame>) -> AnnState {
        AnnState {
            xi: self.xi.clone(),
            env: self.env.clone(),
            focus,
            stack: self.residue.iter().chain(&self.stack).cloned().collect(),
        }
    }

    pub fn check_current(&self, focus: Option<&Frame>) -> Result<(), String> {
        check_parts(
            &self.table,
            &self.xi,
            &self.env,
            focus,
            self.residue.iter().chain(self.stack.iter()),
        )
    }

    pub fn take_trace(&mut self) -> Vec<TraceRecord> {
        self.trace.take().unwrap_or_default()
    }

    pub fn linear_bindings(&self) -> usize {
        linear_count(&self.env)
    }

    fn fresh(&mut self) -> Name {
        loop {
            let x = self.supply.fresh();
            if !self.types.contains_key(&x) {
                return x;
            }
        }
    }

    fn bind(&mut self, x: Name, demand: Demand, ty: Type, term: Term) {
        self.types.insert(x.clone(), ty.clone());
        self.env.insert(x, EnvBinding { demand, ty, term });
    }

    fn new_array_id(&mut self) -> u32 {
        let id = self.next_array;
        self.next_array += 1;
        id
    }

    /// The type of a subterm under evaluation, only needed when states are
    /// being checked.
    fn synth(&self, t: &Term) -> Type {
        if !self.instrument {
            return unknown();
        }
        let mut env = TypeEnv::with_fallback(&self.table, &self.types);
        for (x, ty) in &self.xi {
            env.bind(x.clone(), ty.clone(), MultExpr::Omega);
        }
        infer_type_lenient(&mut env, t)
            .map(|(ty, _)| ty)
            .unwrap_or_else(|_| unknown())
    }

    fn push(&mut self, term: impl FnOnce() -> Term, demand: Demand, ty: impl FnOnce() -> Type) {
        if self.instrument {
            self.stack.push(Frame {
                term: term(),
                demand,
                ty: ty(),
            });
        }
    }

    fn pop(&mut self) {
        if self.instrument {
            self.stack.pop();
        }
    }

    fn rule_of(&self, t: &Term) -> &'static str {
        match t {
            Term::Var(x) => match self.env.get(x) {
                Some(b) if b.demand == Demand::One => "linear variable",
                _ => "shared variable",
            },
            Term::Lam { .. } => "abs",
            Term::MultLam { .. } => "m.abs",
            Term::App(..) => "app",
            Term::MultApp(..) => "m.app",
            Term::Con { .. } => "constructor",
            Term::Case { .. } => "case",
            Term::Let { .. } => "let",
            Term::Int(_) => "literal",
            Term::Loc(_) => "mutable cell",
            Term::Array { .. } => "array",
            Term::Prim(op, _) if op.is_arithmetic() => "arithmetic",
            Term::Prim(op, _) => op.name(),
        }
    }

    fn enter(&mut self, rule: &'static str, t: &Term) -> Result<Option<(usize, usize)>, Halt> {
        if self.fuel == 0 {
            return Err(Halt::OutOfFuel);
        }
        self.fuel -= 1;
        self.stats.steps += 1;
        let before = self.env.len();
        Ok(self.trace.as_mut().map(|tr| {
            tr.push(TraceRecord {
                rule,
                redex: summarize(term_to_string(t), 80),
                heap_delta: 0,
            });
            (tr.len() - 1, before)
        }))
    }

    fn conclude(
        &mut self,
        rule: &'static str,
        mark: Option<(usize, usize)>,
        v: &Term,
        rho: Demand,
        ty: &Type,
    ) {
        if let (Some(tr), Some((i, before))) = (self.trace.as_mut(), mark) {
            tr[i].heap_delta = self.env.len() as i64 - before as i64;
        }
        if self.instrument {
            let focus = Frame {
                term: v.clone(),
                demand: rho,
                ty: ty.clone(),
            };
            self.record_check(rule, Some(&focus));
        }
    }

    fn record_check(&mut self, rule: &'static str, focus: Option<&Frame>) {
        self.stats.state_checks += 1;
        if let Err(message) = self.check_current(focus) {
            self.failure_count += 1;
            if self.failures.len() < FAILURES_KEPT {
                self.failures.push(PreservationFailure {
                    rule,
                    step: self.stats.steps,
                    message,
                });
            }
        }
    }

    /// Evaluates `t` at demand `rho` to weak head normal form. `ty` is the
    /// type of `t`; it only matters when states are checked.
    pub fn eval(&mut self, t: Term, rho: Demand, ty: &Type) -> Result<Term, Halt> {
        stacker::maybe_grow(256 * 1024, 4 * 1024 * 1024, || self.eval_inner(t, rho, ty))
    }

    fn eval_inner(&mut self, t: Term, rho: Demand, ty: &Type) -> Result<Term, Halt> {
        let rule = self.rule_of(&t);
        let mark = self.enter(rule, &t)?;
        let v = match t {
            Term::Lam { .. }
            | Term::MultLam { .. }
            | Term::Con { .. }
            | Term::Int(_)
            | Term::Array { .. } => t,
            Term::Loc(_) => {
                return Err(stuck(
                    StuckReason::PrimitiveMisuse,
                    rule,
                    "cell",
                    "mutable cells do not exist in the pure semantics",
                ))
            }
            Term::Var(x) => self.variable(x, rho, ty)?,
            Term::App(f, a) => {
                let x = var_arg(rule, *a)?;
                let fty = self.synth(&f);
                let (dom, pi) = match &fty {
                    Type::Arrow(dom, m, _) => (
                        (**dom).clone(),
                        Demand::from_mult(m).unwrap_or(Demand::Omega),
                    ),
                    _ => (unknown(), Demand::Omega),
                };
                self.push(|| Term::Var(x.clone()), rho.times(pi), || dom);
                let fv = self.eval(*f, rho, &fty)?;
                self.pop();
                match fv {
                    Term::Lam { var, body, .. } => self.eval(body.rename_one(&var, &x), rho, ty)?,
                    other => {
                        return Err(stuck(
                            StuckReason::PrimitiveMisuse,
                            rule,
                            summarize(term_to_string(&other), 40),
                            "applied a non-function",
                        ))
                    }
                }
            }
            Term::MultApp(e, m) => {
                let ety = self.synth(&e);
                match self.eval(*e, rho, &ety)? {
                    Term::MultLam { var, body } => self.eval(body.subst_mult(&var, &m), rho, ty)?,
                    other => {
                        return Err(stuck(
                            StuckReason::PrimitiveMisuse,
                            rule,
                            summarize(term_to_string(&other), 40),
                            "multiplicity applied to a non-abstraction",
                        ))
                    }
                }
            }
            Term::Let {
                mult,
                recursive,
                binds,
                body,
            } => {
                let pi = closed(rule, &mult)?;
                let d = rho.times(pi);
                let mut map = HashMap::new();
                for b in &binds {
                    let fresh = self.fresh();
                    map.insert(b.var.clone(), fresh);
                }
                for b in binds {
                    let rhs = if recursive { b.rhs.rename(&map) } else { b.rhs };
                    self.bind(map[&b.var].clone(), d, b.ty, rhs);
                }
                self.eval(body.rename(&map), rho, ty)?
            }
            Term::Case {
                mult,
                scrut,
                branches,
            } => {
                let pi = closed(rule, &mult)?;
                let sty = self.synth(&scrut);
                if self.instrument {
                    let s = Name::new("%s");
                    let cont = Term::lam(
                        mult.clone(),
                        s.clone(),
                        sty.clone(),
                        Term::case(mult.clone(), Term::Var(s), branches.clone()),
                    );
                    let cty = Type::arrow(sty.clone(), mult.clone(), ty.clone());
                    self.push(|| cont, rho, || cty);
                }
                let v = self.eval(*scrut, rho.times(pi), &sty)?;
                self.pop();
                let (con, args) = match v {
                    Term::Con { name, args, .. } => (name, args),
                    other => {
                        return Err(stuck(
                            StuckReason::PrimitiveMisuse,
                            rule,
                            summarize(term_to_string(&other), 40),
                            "scrutinee is not a constructor",
                        ))
                    }
                };
                let branch = match branches.into_iter().find(|b| b.con == con) {
                    Some(b) => b,
                    None => {
                        return Err(stuck(
                            StuckReason::MissingBranch,
                            rule,
                            con.to_string(),
                            "no branch for constructor",
                        ))
                    }
                };
                self.eval(
                    substitute_fields(rule, &branch.binders, &args, &branch.body)?,
                    rho,
                    ty,
                )?
            }
            Term::Prim(op, args) => self.prim(rule, op, args, rho, ty)?,
        };
        self.conclude(rule, mark, &v, rho, ty);
        Ok(v)
    }

    fn variable(&mut self, x: Name, rho: Demand, ty: &Type) -> Result<Term, Halt> {
        let b = match self.env.get(&x) {
            Some(b) => b,
            None if self.xi.iter().any(|(y, _)| *y == x) => return Err(Halt::Blackhole(x)),
            None => {
                return Err(stuck(
                    StuckReason::MissingLinearBinding,
                    "linear variable",
                    x.to_string(),
                    "no binding in the environment",
                ))
            }
        };
        if b.demand == Demand::One {
            if rho != Demand::One {
                return Err(stuck(
                    StuckReason::MissingLinearBinding,
                    "linear variable",
                    x.to_string(),
                    "linear binding demanded more than once",
                ));
            }
            let b = self.env.shift_remove(&x).expect("present");
            return self.eval(b.term, Demand::One, ty);
        }
        let b = self.env.shift_remove(&x).expect("present");
        self.xi.push((x.clone(), b.ty.clone()));
        let z = self.eval(b.term, Demand::Omega, ty)?;
        self.xi.pop();
        self.env.insert(
            x,
            EnvBinding {
                demand: Demand::Omega,
                ty: b.ty,
                term: z.clone(),
            },
        );
        Ok(z)
    }

    /// Evaluates a primitive's argument with the rest of the call waiting
    /// on the stack as `λ(%k). op(.., %k, ..)`.
    fn prim_arg(
        &mut self,
        op: PrimOp,
        current: &[Term],
        at: usize,
        rho: Demand,
        ty: &Type,
    ) -> Result<Term, Halt> {
        let mu = op.arg_mults()[at].clone();
        let d = Demand::from_mult(&mu).expect("primitive multiplicities are closed");
        let aty = match op {
            _ if at == 0 && matches!(op, PrimOp::Write | PrimOp::Freeze | PrimOp::Index) => {
                self.synth(&current[0])
            }
            _ => Type::Int,
        };
        if self.instrument {
            let mut args = current.to_vec();
            args[at] = Term::Var(hole());
            let cont = Term::lam(mu.clone(), hole(), aty.clone(), Term::Prim(op, args));
            let cty = Type::arrow(aty.clone(), mu, ty.clone());
            self.push(|| cont, rho, || cty);
        }
        let v = self.eval(current[at].clone(), rho.times(d), &aty)?;
        self.pop();
        Ok(v)
    }

    fn int_arg(
        &mut self,
        op: PrimOp,
        current: &mut [Term],
        at: usize,
        rho: Demand,
        ty: &Type,
    ) -> Result<i64, Halt> {
        let rule = if op.is_arithmetic() {
            "arithmetic"
        } else {
            op.name()
        };
        match self.prim_arg(op, current, at, rho, ty)? {
            Term::Int(i) => {
                current[at] = Term::Int(i);
                Ok(i)
            }
            other => Err(stuck(
                StuckReason::PrimitiveMisuse,
                rule,
                summarize(term_to_string(&other), 40),
                "expected an integer",
            )),
        }
    }

    fn array_arg(
        &mut self,
        op: PrimOp,
        current: &[Term],
        rho: Demand,
        ty: &Type,
        frozen: bool,
    ) -> Result<(Type, Vec<Name>, u32), Halt> {
        let rule = op.name();
        match self.prim_arg(op, current, 0, rho, ty)? {
            Term::Array {
                elem,
                frozen: f,
                elems,
                id,
            } => {
                if f != frozen {
                    let detail = if frozen {
                        "array has not been frozen"
                    } else {
                        "array has already been frozen"
                    };
                    return Err(stuck(
                        StuckReason::TypestateViolation,
                        rule,
                        format!("array #{}", id),
                        detail,
                    ));
                }
                Ok((elem, elems, id))
            }
            other => Err(stuck(
                StuckReason::PrimitiveMisuse,
                rule,
                summarize(term_to_string(&other), 40),
                "expected an array",
            )),
        }
    }

    fn prim(
        &mut self,
        rule: &'static str,
        op: PrimOp,
        args: Vec<Term>,
        rho: Demand,
        ty: &Type,
    ) -> Result<Term, Halt> {
        if args.len() != op.arity() {
            return Err(stuck(
                StuckReason::PrimitiveMisuse,
                rule,
                op.name(),
                "wrong number of arguments",
            ));
        }
        let mut args = args;
        match op {
            PrimOp::NewMArray => {
                let len = self.int_arg(op, &mut args, 0, rho, ty)?;
                if len < 0 {
                    return Err(stuck(
                        StuckReason::PrimitiveMisuse,
                        rule,
                        len.to_string(),
                        "negative length",
                    ));
                }
                let f = args.pop().expect("arity checked");
                let a = var_arg(rule, args.pop().expect("arity checked"))?;
                let elem = self.types.get(&a).cloned().unwrap_or_else(unknown);
                self.stats.newmarray_calls += 1;
                self.stats.arrays_allocated += 1;
                let id = self.new_array_id();
                let arr = Name::new("%arr");
                let body = Term::let1(
                    arr.clone(),
                    Type::MArray(Box::new(elem.clone())),
                    Term::Array {
                        elem,
                        frozen: false,
                        elems: vec![a; len as usize],
                        id,
                    },
                    Term::app(f, Term::Var(arr)),
                );
                self.eval(body, rho, ty)
            }
            PrimOp::Write => {
                let i = self.int_arg(op, &mut args, 1, rho, ty)?;
                let (elem, mut elems, _) = self.array_arg(op, &args, rho, ty, false)?;
                let slot = index_in(rule, i, elems.len())?;
                elems[slot] = var_arg(rule, args.pop().expect("arity checked"))?;
                self.stats.writes += 1;
                self.stats.arrays_allocated += 1;
                Ok(Term::Array {
                    elem,
                    frozen: false,
                    elems,
                    id: self.new_array_id(),
                })
            }
            PrimOp::Freeze => {
                let (elem, elems, id) = self.array_arg(op, &args, rho, ty, false)?;
                self.stats.freezes += 1;
                let aty = Type::Array(Box::new(elem.clone()));
                let x = self.fresh();
                self.bind(
                    x.clone(),
                    Demand::Omega,
                    aty.clone(),
                    Term::Array {
                        elem,
                        frozen: true,
                        elems,
                        id,
                    },
                );
                Ok(Term::con(
                    "Unrestricted",
                    vec![aty],
                    vec![],
                    vec![Term::Var(x)],
                ))
            }
            PrimOp::Index => {
                let i = self.int_arg(op, &mut args, 1, rho, ty)?;
                let (_, elems, _) = self.array_arg(op, &args, rho, ty, true)?;
                let slot = index_in(rule, i, elems.len())?;
                self.stats.indexes += 1;
                self.eval(Term::Var(elems[slot].clone()), rho, ty)
            }
            _ => {
                let a = self.int_arg(op, &mut args, 0, rho, ty)?;
                let b = self.int_arg(op, &mut args, 1, rho, ty)?;
                Ok(arith(op, a, b))
            }
        }
    }

    /// Forces a value through its integer and datatype fields, each at the
    /// demand its constructor places on it. Fields waiting to be forced sit
    /// on the stack; fields that are not looked into stay there for good.
    pub fn observe(&mut self, v: Term, rho: Demand, ty: &Type) -> Result<Observation, Halt> {
        stacker::maybe_grow(256 * 1024, 4 * 1024 * 1024, || match (ty, v) {
            (Type::Int, Term::Int(i)) => Ok(Observation::Int(i)),
            (
                Type::Data {
                    mults, args: tys, ..
                },
                Term::Con { name, args, .. },
            ) => {
                let (d, c) = self.table.lookup_con(&name).ok_or_else(|| {
                    stuck(
                        StuckReason::PrimitiveMisuse,
                        "constructor",
                        name.to_string(),
                        "unknown constructor",
                    )
                })?;
                let fields = d.instantiate(c, mults, tys);
                let mut pending = Vec::new();
                let mut out: Vec<Option<Observation>> = Vec::with_capacity(args.len());
                for (field, arg) in fields.into_iter().zip(args) {
                    let demand = rho.times(Demand::from_mult(&field.mult).unwrap_or(Demand::Omega));
                    let frame = Frame {
                        term: arg,
                        demand,
                        ty: field.ty,
                    };
                    if observable(&frame.ty) {
                        out.push(None);
                        pending.push(frame);
                    } else {
                        out.push(Some(Observation::Opaque(opaque_kind(&frame.ty))));
                        if self.instrument {
                            self.residue.push(frame);
                        }
                    }
                }
                if self.instrument {
                    self.stack.extend(pending.iter().rev().cloned());
                }
                let mut forced = Vec::with_capacity(pending.len());
                for frame in pending {
                    self.pop();
                    let fv = self.eval(frame.term, frame.demand, &frame.ty)?;
                    forced.push(self.observe(fv, frame.demand, &frame.ty)?);
                }
                let mut forced = forced.into_iter();
                let fields = out
                    .into_iter()
                    .map(|o| o.unwrap_or_else(|| forced.next().expect("one per pending field")))
                    .collect();
                Ok(Observation::Con(name, fields))
            }
            (ty, _) if !observable(ty) => Ok(Observation::Opaque(opaque_kind(ty))),
            (ty, other) => Err(stuck(
                StuckReason::PrimitiveMisuse,
                "observe",
                summarize(term_to_string(&other), 40),
                format!("value does not have type {}", ty),
            )),
        })
    }
}

fn closed(rule: &'static str, m: &MultExpr) -> Result<Demand, Halt> {
    Demand::from_mult(m).ok_or_else(|| {
        stuck(
            StuckReason::PrimitiveMisuse,
            rule,
            m.to_string(),
            "multiplicity is not closed at run time",
        )
    })
}

/// Evaluates the focus of `s` to weak head normal form and returns the
/// final state, whose focus is the value.
pub fn eval_pure(s: AnnState, decls: &DeclTable, fuel: u64) -> Outcome<AnnState> {
    let mut m = PureMachine::new(decls, fuel, false, false);
    let Some(focus) = m.load(s) else {
        return Outcome::Blocked(Stuck {
            reason: StuckReason::PrimitiveMisuse,
            rule: "eval",
            location: "state".into(),
            detail: "nothing to evaluate".into(),
        });
    };
    let r = m.eval(focus.term, focus.demand, &focus.ty);
    Outcome::from_result(r.map(|v| {
        m.snapshot(Some(Frame {
            term: v,
            demand: focus.demand,
            ty: focus.ty,
        }))
    }))
}

#[derive(Clone, Debug)]
pub struct Instrumented {
    pub outcome: Outcome<AnnState>,
    /// Whether the starting state was well typed. Nothing runs otherwise.
    pub precondition: bool,
    pub checks: u64,
    pub failure_count: u64,
    pub failures: Vec<PreservationFailure>,
}

/// Evaluates like [`eval_pure`] and type checks the state after every rule
/// application.
pub fn instrumented_eval(s: AnnState, decls: &DeclTable, fuel: u64) -> Instrumented {
    let mut m = PureMachine::new(decls, fuel, true, false);
    let precondition = s.focus.is_some() && check_state(&s, decls).is_ok();
    if !precondition {
        return Instrumented {
            outcome: Outcome::Blocked(Stuck {
                reason: StuckReason::PrimitiveMisuse,
                rule: "eval",
                location: "state".into(),
                detail: "starting state is not well typed".into(),
            }),
            precondition,
            checks: 0,
            failure_count: 0,
            failures: Vec::new(),
        };
    }
    let focus = m.load(s).expect("checked above");
    let r = m.eval(focus.term, focus.demand, &focus.ty);
    let outcome = Outcome::from_result(r.map(|v| {
        m.snapshot(Some(Frame {
            term: v,
            demand: focus.demand,
            ty: focus.ty,
        }))
    }));
    Instrumented {
        outcome,
        precondition,
        checks: m.stats.state_checks,
        failure_count: m.failure_count,
        failures: m.failures,
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PureOptions {
    pub trace: bool,
    /// Type check the state after every rule.
    pub check_states: bool,
}

#[derive(Clone, Debug)]
pub struct PureRun {
    pub outcome: Outcome<Observation>,
    pub stats: PureStats,
    pub trace: Vec<TraceRecord>,
    /// Linear bindings left in the environment when evaluation stopped.
    pub linear_left: usize,
    pub precondition: bool,
    pub failure_count: u64,
    pub failures: Vec<PreservationFailure>,
}

/// Evaluates a closed program of type `ty` at demand 1 and forces its
/// result.
pub fn run_pure(t: &Term, ty: &Type, decls: &DeclTable, fuel: u64, opts: PureOptions) -> PureRun {
    let mut m = PureMachine::new(decls, fuel, opts.check_states, opts.trace);
    let mut precondition = true;
    if opts.check_states {
        let start = Frame {
            term: t.clone(),
            demand: Demand::One,
            ty: ty.clone(),
        };
        precondition = m.check_current(Some(&start)).is_ok();
    }
    let r = m
        .eval(t.clone(), Demand::One, ty)
        .and_then(|v| m.observe(v, Demand::One, ty));
    PureRun {
        outcome: Outcome::from_result(r),
        stats: m.stats,
        trace: m.take_trace(),
        linear_left: m.linear_bindings(),
        precondition,
        failure_count: m.failure_count,
        failures: m.failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{load, LoadOptions};

    fn run(src: &str) -> PureRun {
        let p = load(src, &LoadOptions::default()).unwrap_or_else(|e| panic!("{}", e));
        let opts = PureOptions {
            trace: false,
            check_states: true,
        };
        run_pure(&p.term, &p.ty, &p.decls, 10_000, opts)
    }

    fn assert_preserved(r: &PureRun) {
        assert!(r.precondition);
        assert_eq!(r.failure_count, 0, "{:#?}", r.failures);
        assert!(r.stats.state_checks > 0);
    }

    #[test]
    fn array_write_then_read() {
        let r = run("main = case[1] newMArray(2, 0, \\[1] m : MArray Int . \
             case[1] freeze(write(m, 0, 7)) of { Unrestricted a -> Unrestricted @[Int] (index(a, 0)) }) \
             of { Unrestricted r -> r }");
        assert_eq!(r.outcome, Outcome::Value(Observation::Int(7)));
        assert_eq!(r.stats.arrays_allocated, 2);
        assert_eq!(r.linear_left, 0);
        assert_preserved(&r);
    }

    #[test]
    fn linear_pair_swap() {
        let r = run("def swap : Pair 1 1 Int Int -o Pair 1 1 Int Int =[w] \
             \\[1] p : Pair 1 1 Int Int . case[1] p of { Pair x y -> Pair @[Int, Int] @[1, 1] y x } \
             main = swap (Pair @[Int, Int] @[1, 1] 1 (add(1, 1)))");
        assert_eq!(r.outcome.value().unwrap().to_string(), "Pair 2 1");
        assert_eq!(r.linear_left, 0);
        assert_preserved(&r);
    }

    #[test]
    fn shared_bindings_are_updated() {
        let r = run("main = let[w] x : Int = add(1, 2) in add(x, x)");
        assert_eq!(r.outcome, Outcome::Value(Observation::Int(6)));
        assert_preserved(&r);
    }

    #[test]
    fn self_reference_is_a_blackhole() {
        let r = run("main = let[w] x : Int = x in x");
        assert!(matches!(r.outcome, Outcome::Blackhole(_)));
    }

    #[test]
    fn states_with_misused_linear_bindings_are_rejected() {
        let decls = encoding_decls(&DeclTable::new());
        let mut s = AnnState::initial(Term::var("x"), Type::Int);
        s.env.insert(
            Name::new("x"),
            EnvBinding {
                demand: Demand::One,
                ty: Type::Int,
                term: Term::Int(1),
            },
        );
        assert!(state_welltyped(&s, &decls));
        s.focus.as_mut().unwrap().demand = Demand::Omega;
        assert!(!state_welltyped(&s, &decls));
        let unbound = AnnState::initial(Term::var("y"), Type::Int);
        assert!(!state_welltyped(&unbound, &decls));
    }
}
