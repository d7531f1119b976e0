//! Call-by-need evaluation over a mutable heap. Arrays live in cells that
//! `write` updates in place; each cell carries a tag saying whether it has
//! been frozen.

use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;

use crate::name::{Name, NameSupply};
use crate::outcome::{summarize, Halt, Observation, Outcome, Stuck, StuckReason, TraceRecord};
use crate::pretty::term_to_string;
use crate::syntax::{DeclTable, PrimOp, Term, Type};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeapBinding {
    pub ty: Type,
    pub term: Term,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellTag {
    Mutable,
    Frozen,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub tag: CellTag,
    pub elem: Type,
    pub elems: Vec<Name>,
}

#[derive(Clone, Debug, Default)]
pub struct Heap {
    pub bindings: IndexMap<Name, HeapBinding>,
    pub cells: Vec<Cell>,
}

impl Heap {
    pub fn new() -> Heap {
        Heap::default()
    }

    pub fn len(&self) -> usize {
        self.bindings.len() + self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, x: &str) -> Option<&HeapBinding> {
        self.bindings.get(x)
    }

    pub fn cell(&self, l: u32) -> Option<&Cell> {
        self.cells.get(l as usize)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OrdinaryStats {
    pub steps: u64,
    pub cells_allocated: u64,
    pub newmarray_calls: u64,
    pub writes: u64,
    pub freezes: u64,
    pub indexes: u64,
}

pub struct Machine {
    pub heap: Heap,
    pub fuel: u64,
    pub stats: OrdinaryStats,
    trace: Option<Vec<TraceRecord>>,
    supply: NameSupply,
    types: HashMap<Name, Type>,
    under_eval: HashSet<Name>,
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

fn rule_of(t: &Term) -> &'static str {
    match t {
        Term::Var(_) => "variable",
        Term::Lam { .. } => "abs",
        Term::MultLam { .. } => "m.abs",
        Term::App(..) => "application",
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

pub(crate) fn bool_con(b: bool) -> Term {
    Term::con(if b { "True" } else { "False" }, vec![], vec![], vec![])
}

pub(crate) fn arith(op: PrimOp, a: i64, b: i64) -> Term {
    match op {
        PrimOp::Add => Term::Int(a.wrapping_add(b)),
        PrimOp::Sub => Term::Int(a.wrapping_sub(b)),
        PrimOp::Mul => Term::Int(a.wrapping_mul(b)),
        PrimOp::Eq => bool_con(a == b),
        PrimOp::Lt => bool_con(a < b),
        _ => unreachable!("not an arithmetic primitive"),
    }
}

/// Whether deep forcing looks inside values of this type.
pub(crate) fn observable(ty: &Type) -> bool {
    matches!(ty, Type::Int | Type::Data { .. })
}

pub(crate) fn opaque_kind(ty: &Type) -> &'static str {
    match ty {
        Type::Arrow(..) | Type::Forall(..) => "function",
        Type::MArray(_) | Type::Array(_) => "array",
        _ => "value",
    }
}

impl Machine {
    pub fn new(heap: Heap, fuel: u64, tracing: bool) -> Machine {
        let types = heap
            .bindings
            .iter()
            .map(|(x, b)| (x.clone(), b.ty.clone()))
            .collect();
        Machine {
            heap,
            fuel,
            stats: OrdinaryStats::default(),
            trace: tracing.then(Vec::new),
            supply: NameSupply::new("h"),
            types,
            under_eval: HashSet::new(),
        }
    }

    pub fn take_trace(&mut self) -> Vec<TraceRecord> {
        self.trace.take().unwrap_or_default()
    }

    fn fresh(&mut self) -> Name {
        loop {
            let x = self.supply.fresh();
            if !self.types.contains_key(&x) {
                return x;
            }
        }
    }

    fn bind(&mut self, x: Name, ty: Type, term: Term) {
        self.types.insert(x.clone(), ty.clone());
        self.heap.bindings.insert(x, HeapBinding { ty, term });
    }

    fn enter(&mut self, rule: &'static str, t: &Term) -> Result<Option<(usize, usize)>, Halt> {
        if self.fuel == 0 {
            return Err(Halt::OutOfFuel);
        }
        self.fuel -= 1;
        self.stats.steps += 1;
        let before = self.heap.len();
        Ok(self.trace.as_mut().map(|tr| {
            tr.push(TraceRecord {
                rule,
                redex: summarize(term_to_string(t), 80),
                heap_delta: 0,
            });
            (tr.len() - 1, before)
        }))
    }

    fn conclude(&mut self, mark: Option<(usize, usize)>) {
        if let (Some(tr), Some((i, before))) = (self.trace.as_mut(), mark) {
            tr[i].heap_delta = self.heap.len() as i64 - before as i64;
        }
    }

    /// Evaluates to weak head normal form.
    pub fn eval(&mut self, t: Term) -> Result<Term, Halt> {
        stacker::maybe_grow(256 * 1024, 4 * 1024 * 1024, || self.eval_inner(t))
    }

    fn eval_inner(&mut self, t: Term) -> Result<Term, Halt> {
        let rule = rule_of(&t);
        let mark = self.enter(rule, &t)?;
        let v = match t {
            Term::Lam { .. }
            | Term::MultLam { .. }
            | Term::Con { .. }
            | Term::Int(_)
            | Term::Loc(_) => t,
            Term::Array { .. } => {
                return Err(stuck(
                    StuckReason::PrimitiveMisuse,
                    rule,
                    "array literal",
                    "array values do not exist in the heap semantics",
                ))
            }
            Term::Var(x) => self.force(x)?,
            Term::App(f, a) => {
                let x = match *a {
                    Term::Var(x) => x,
                    other => {
                        return Err(stuck(
                            StuckReason::PrimitiveMisuse,
                            rule,
                            term_to_string(&other),
                            "argument is not a variable",
                        ))
                    }
                };
                match self.eval(*f)? {
                    Term::Lam { var, body, .. } => self.eval(body.rename_one(&var, &x))?,
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
            Term::MultApp(e, m) => match self.eval(*e)? {
                Term::MultLam { var, body } => self.eval(body.subst_mult(&var, &m))?,
                other => {
                    return Err(stuck(
                        StuckReason::PrimitiveMisuse,
                        rule,
                        summarize(term_to_string(&other), 40),
                        "multiplicity applied to a non-abstraction",
                    ))
                }
            },
            Term::Let {
                recursive,
                binds,
                body,
                ..
            } => {
                let mut map = HashMap::new();
                for b in &binds {
                    let fresh = self.fresh();
                    map.insert(b.var.clone(), fresh);
                }
                for b in binds {
                    let rhs = if recursive { b.rhs.rename(&map) } else { b.rhs };
                    self.bind(map[&b.var].clone(), b.ty, rhs);
                }
                self.eval(body.rename(&map))?
            }
            Term::Case {
                scrut, branches, ..
            } => {
                let v = self.eval(*scrut)?;
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
                self.eval(substitute_fields(
                    rule,
                    &branch.binders,
                    &args,
                    &branch.body,
                )?)?
            }
            Term::Prim(op, args) => self.prim(rule, op, args)?,
        };
        self.conclude(mark);
        Ok(v)
    }

    fn force(&mut self, x: Name) -> Result<Term, Halt> {
        let b = match self.heap.bindings.swap_remove(&x) {
            Some(b) => b,
            None if self.under_eval.contains(&x) => return Err(Halt::Blackhole(x)),
            None => {
                return Err(stuck(
                    StuckReason::MissingLinearBinding,
                    "variable",
                    x.to_string(),
                    "no heap binding",
                ))
            }
        };
        self.under_eval.insert(x.clone());
        let z = self.eval(b.term)?;
        self.under_eval.remove(&x);
        self.heap.bindings.insert(
            x,
            HeapBinding {
                ty: b.ty,
                term: z.clone(),
            },
        );
        Ok(z)
    }

    fn eval_int(&mut self, rule: &'static str, t: Term) -> Result<i64, Halt> {
        match self.eval(t)? {
            Term::Int(i) => Ok(i),
            other => Err(stuck(
                StuckReason::PrimitiveMisuse,
                rule,
                summarize(term_to_string(&other), 40),
                "expected an integer",
            )),
        }
    }

    fn eval_cell(&mut self, rule: &'static str, t: Term, want: CellTag) -> Result<u32, Halt> {
        let l = match self.eval(t)? {
            Term::Loc(l) => l,
            other => {
                return Err(stuck(
                    StuckReason::PrimitiveMisuse,
                    rule,
                    summarize(term_to_string(&other), 40),
                    "expected an array cell",
                ))
            }
        };
        let cell = self.heap.cells.get(l as usize).ok_or_else(|| {
            stuck(
                StuckReason::PrimitiveMisuse,
                rule,
                format!("cell {}", l),
                "dangling cell",
            )
        })?;
        if cell.tag != want {
            let detail = match want {
                CellTag::Mutable => "array has already been frozen",
                CellTag::Frozen => "array has not been frozen",
            };
            return Err(stuck(
                StuckReason::TypestateViolation,
                rule,
                format!("cell {}", l),
                detail,
            ));
        }
        Ok(l)
    }

    fn prim(&mut self, rule: &'static str, op: PrimOp, args: Vec<Term>) -> Result<Term, Halt> {
        if args.len() != op.arity() {
            return Err(stuck(
                StuckReason::PrimitiveMisuse,
                rule,
                op.name(),
                "wrong number of arguments",
            ));
        }
        let mut args = args.into_iter();
        let mut next = || args.next().expect("arity checked");
        match op {
            PrimOp::NewMArray => {
                let (n, a, f) = (next(), next(), next());
                let len = self.eval_int(rule, n)?;
                if len < 0 {
                    return Err(stuck(
                        StuckReason::PrimitiveMisuse,
                        rule,
                        len.to_string(),
                        "negative length",
                    ));
                }
                let a = var_arg(rule, a)?;
                let elem = self
                    .types
                    .get(&a)
                    .cloned()
                    .unwrap_or(Type::Var(Name::new("?")));
                self.stats.newmarray_calls += 1;
                self.stats.cells_allocated += 1;
                let l = self.heap.cells.len() as u32;
                self.heap.cells.push(Cell {
                    tag: CellTag::Mutable,
                    elem: elem.clone(),
                    elems: vec![a; len as usize],
                });
                let x = self.fresh();
                self.bind(x.clone(), Type::MArray(Box::new(elem)), Term::Loc(l));
                self.eval(Term::app(f, Term::Var(x)))
            }
            PrimOp::Write => {
                let (arr, n, a) = (next(), next(), next());
                let i = self.eval_int(rule, n)?;
                let l = self.eval_cell(rule, arr, CellTag::Mutable)?;
                let a = var_arg(rule, a)?;
                let cell = &mut self.heap.cells[l as usize];
                let slot = index_in(rule, i, cell.elems.len())?;
                cell.elems[slot] = a;
                self.stats.writes += 1;
                Ok(Term::Loc(l))
            }
            PrimOp::Freeze => {
                let l = self.eval_cell(rule, next(), CellTag::Mutable)?;
                let cell = &mut self.heap.cells[l as usize];
                cell.tag = CellTag::Frozen;
                let ty = Type::Array(Box::new(cell.elem.clone()));
                self.stats.freezes += 1;
                let x = self.fresh();
                self.bind(x.clone(), ty.clone(), Term::Loc(l));
                Ok(Term::con(
                    "Unrestricted",
                    vec![ty],
                    vec![],
                    vec![Term::Var(x)],
                ))
            }
            PrimOp::Index => {
                let (arr, n) = (next(), next());
                let i = self.eval_int(rule, n)?;
                let l = self.eval_cell(rule, arr, CellTag::Frozen)?;
                let cell = &self.heap.cells[l as usize];
                let slot = index_in(rule, i, cell.elems.len())?;
                let y = cell.elems[slot].clone();
                self.stats.indexes += 1;
                self.eval(Term::Var(y))
            }
            _ => {
                let (x, y) = (next(), next());
                let a = self.eval_int(rule, x)?;
                let b = self.eval_int(rule, y)?;
                Ok(arith(op, a, b))
            }
        }
    }

    /// Forces a value of type `ty` all the way down through integer and
    /// datatype fields. Other fields are reported as opaque without being
    /// evaluated.
    pub fn observe(&mut self, v: Term, ty: &Type, decls: &DeclTable) -> Result<Observation, Halt> {
        stacker::maybe_grow(256 * 1024, 4 * 1024 * 1024, || match (ty, v) {
            (Type::Int, Term::Int(i)) => Ok(Observation::Int(i)),
            (
                Type::Data {
                    mults, args: tys, ..
                },
                Term::Con { name, args, .. },
            ) => {
                let (d, c) = decls.lookup_con(&name).ok_or_else(|| {
                    stuck(
                        StuckReason::PrimitiveMisuse,
                        "constructor",
                        name.to_string(),
                        "unknown constructor",
                    )
                })?;
                let fields = d.instantiate(c, mults, tys);
                let mut out = Vec::with_capacity(args.len());
                for (field, arg) in fields.iter().zip(args) {
                    if observable(&field.ty) {
                        let fv = self.eval(arg)?;
                        out.push(self.observe(fv, &field.ty, decls)?);
                    } else {
                        out.push(Observation::Opaque(opaque_kind(&field.ty)));
                    }
                }
                Ok(Observation::Con(name, out))
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

pub(crate) fn var_arg(rule: &'static str, t: Term) -> Result<Name, Halt> {
    match t {
        Term::Var(x) => Ok(x),
        other => Err(stuck(
            StuckReason::PrimitiveMisuse,
            rule,
            summarize(term_to_string(&other), 40),
            "argument is not a variable",
        )),
    }
}

pub(crate) fn index_in(rule: &'static str, i: i64, len: usize) -> Result<usize, Halt> {
    if i < 0 || i as usize >= len {
        Err(stuck(
            StuckReason::PrimitiveMisuse,
            rule,
            i.to_string(),
            format!("index out of bounds for length {}", len),
        ))
    } else {
        Ok(i as usize)
    }
}

pub(crate) fn substitute_fields(
    rule: &'static str,
    binders: &[Name],
    args: &[Term],
    body: &Term,
) -> Result<Term, Halt> {
    if binders.len() != args.len() {
        return Err(stuck(
            StuckReason::PrimitiveMisuse,
            rule,
            "branch",
            "pattern arity does not match the constructor",
        ));
    }
    let mut map = HashMap::new();
    for (b, a) in binders.iter().zip(args) {
        match a {
            Term::Var(x) => {
                map.insert(b.clone(), x.clone());
            }
            other => {
                return Err(stuck(
                    StuckReason::PrimitiveMisuse,
                    rule,
                    summarize(term_to_string(other), 40),
                    "constructor field is not a variable",
                ))
            }
        }
    }
    Ok(body.rename(&map))
}

/// Evaluates `t` to weak head normal form.
pub fn eval(heap: Heap, t: &Term, fuel: u64) -> Outcome<(Heap, Term)> {
    let mut m = Machine::new(heap, fuel, false);
    let r = m.eval(t.clone());
    Outcome::from_result(r.map(|v| (m.heap, v)))
}

/// Like [`eval`] but also returns the rules applied, in pre-order.
pub fn trace_eval(heap: Heap, t: &Term, fuel: u64) -> (Outcome<(Heap, Term)>, Vec<TraceRecord>) {
    let mut m = Machine::new(heap, fuel, true);
    let r = m.eval(t.clone());
    let trace = m.take_trace();
    (Outcome::from_result(r.map(|v| (m.heap, v))), trace)
}

#[derive(Clone, Debug)]
pub struct OrdinaryRun {
    pub outcome: Outcome<Observation>,
    pub stats: OrdinaryStats,
    pub trace: Vec<TraceRecord>,
    pub heap: Heap,
}

/// Evaluates a closed program of type `ty` and forces its result.
pub fn run_observed(
    t: &Term,
    ty: &Type,
    decls: &DeclTable,
    fuel: u64,
    tracing: bool,
) -> OrdinaryRun {
    let mut m = Machine::new(Heap::new(), fuel, tracing);
    let r = m.eval(t.clone()).and_then(|v| m.observe(v, ty, decls));
    OrdinaryRun {
        outcome: Outcome::from_result(r),
        stats: m.stats,
        trace: m.take_trace(),
        heap: m.heap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{load, LoadOptions};

    fn run(src: &str) -> OrdinaryRun {
        let p = load(src, &LoadOptions::default()).unwrap_or_else(|e| panic!("{}", e));
        run_observed(&p.term, &p.ty, &p.decls, 10_000, true)
    }

    #[test]
    fn array_write_then_read() {
        let r = run("main = case[1] newMArray(2, 0, \\[1] m : MArray Int . \
             case[1] freeze(write(m, 0, 7)) of { Unrestricted a -> Unrestricted @[Int] (index(a, 0)) }) \
             of { Unrestricted r -> r }");
        assert_eq!(r.outcome, Outcome::Value(Observation::Int(7)));
        assert_eq!(r.stats.cells_allocated, 1);
        assert_eq!(r.stats.writes, 1);
    }

    #[test]
    fn sharing_evaluates_once() {
        let r = run("main = let[w] x : Int = add(1, 2) in add(x, x)");
        assert_eq!(r.outcome, Outcome::Value(Observation::Int(6)));
        assert_eq!(r.trace.iter().filter(|t| t.rule == "arithmetic").count(), 2);
    }

    #[test]
    fn self_reference_is_a_blackhole() {
        let r = run("main = let[w] x : Int = x in x");
        assert!(matches!(r.outcome, Outcome::Blackhole(_)));
    }

    #[test]
    fn zero_fuel_has_empty_trace() {
        let p = load("main = 3", &LoadOptions::default()).unwrap();
        let (o, tr) = trace_eval(Heap::new(), &p.term, 0);
        assert_eq!(o.kind(), crate::outcome::OutcomeKind::OutOfFuel);
        assert!(tr.is_empty());
    }

    #[test]
    fn list_results_are_forced() {
        let r = run("main = Cons @[Int] (add(1, 1)) (Nil @[Int])");
        assert_eq!(r.outcome.value().unwrap().to_string(), "Cons 2 Nil");
    }
}
