//! Random generation of well-typed programs.
//!
//! Generation is goal directed: every call is asked for a term of a given
//! type that consumes a given set of linear variables exactly once. Linear
//! variables are divided between the linear positions of a form, while
//! positions used ω times only see unrestricted variables.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mult::MultExpr;
use crate::name::Name;
use crate::parse::{parse_source, Def, SourceFile};
use crate::pretty::source_to_string;
use crate::program::PRELUDE;
use crate::syntax::{Branch, ConDecl, DataDecl, DeclTable, Field, PrimOp, Term, Type};
use crate::typecheck::{check_program, Diagnostic};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Int,
    Bool,
    /// A pair of integers with random field multiplicities.
    Pair,
    List,
    Unrestricted,
    /// One of the generated datatypes.
    Data,
    /// Picked at random for each program.
    Any,
}

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub seed: u64,
    pub max_depth: u32,
    /// Up to this many extra datatypes are declared per program.
    pub max_datatypes: usize,
    /// Relative weights of 1, ω and a multiplicity variable when a
    /// multiplicity is chosen.
    pub mult_weights: [u32; 3],
    /// Chance that a generation step opens an array block.
    pub array_prob: f64,
    pub target: Target,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            max_depth: 6,
            max_datatypes: 2,
            mult_weights: [3, 2, 1],
            array_prob: 0.15,
            target: Target::Any,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GenError {
    InvalidConfig(String),
    /// Every attempt produced a program the checker rejected.
    Exhausted {
        attempts: u32,
        last: Vec<Diagnostic>,
    },
}

impl fmt::Display for GenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenError::InvalidConfig(m) => write!(f, "invalid generator configuration: {}", m),
            GenError::Exhausted { attempts, last } => {
                write!(f, "no well-typed program after {} attempts", attempts)?;
                if let Some(d) = last.first() {
                    write!(f, " (last: {})", d)?;
                }
                Ok(())
            }
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.max_depth < 1 {
            return Err(GenError::InvalidConfig("depth must be at least 1".into()));
        }
        if self.mult_weights.iter().all(|w| *w == 0) {
            return Err(GenError::InvalidConfig(
                "multiplicity weights are all zero".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.array_prob) {
            return Err(GenError::InvalidConfig(
                "array probability must be within [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GeneratedProgram {
    pub file: SourceFile,
    /// The program in surface syntax, prelude not included.
    pub text: String,
    pub ty: Type,
    pub attempts: u32,
}

const RETRIES: u32 = 32;

/// Generates program number `index` of the stream selected by `cfg.seed`.
/// The same pair always gives the same program.
pub fn gen_welltyped(cfg: &GenConfig, index: u64) -> Result<GeneratedProgram, GenError> {
    cfg.validate()?;
    let prelude = parse_source(PRELUDE, &DeclTable::new())
        .expect("the prelude parses")
        .decls;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let mut last = Vec::new();
    for attempt in 1..=RETRIES {
        let mut g = Gen::new(cfg, &prelude, &mut rng);
        let (file, ty) = g.program();
        let mut all = prelude.clone();
        all.extend(file.decls.iter().cloned());
        let main = file.main.as_ref().expect("generated programs have a main");
        match check_program(&all, &file.defs, main) {
            Ok(checked) if checked.ty.equiv(&ty) => {
                let text = source_to_string(&file);
                return Ok(GeneratedProgram {
                    file,
                    text,
                    ty,
                    attempts: attempt,
                });
            }
            Ok(checked) => {
                last = vec![Diagnostic {
                    kind: crate::typecheck::DiagnosticKind::TypeMismatch,
                    location: "main".into(),
                    message: format!("generated {} but aimed for {}", checked.ty, ty),
                }]
            }
            Err(diags) => last = diags,
        }
    }
    Err(GenError::Exhausted {
        attempts: RETRIES,
        last,
    })
}

#[derive(Clone, Debug)]
struct Lin {
    name: Name,
    ty: Type,
}

struct Gen<'r> {
    cfg: GenConfig,
    rng: &'r mut ChaCha8Rng,
    decls: DeclTable,
    extra: Vec<DataDecl>,
    /// Unrestricted variables in scope.
    shared: Vec<(Name, Type)>,
    /// Frozen arrays in scope with their lengths.
    arrays: Vec<(Name, i64)>,
    next: u32,
}

fn int() -> Type {
    Type::Int
}

fn boolean() -> Type {
    Type::simple("Bool")
}

fn list_int() -> Type {
    Type::data("List", vec![], vec![Type::Int])
}

fn unrestricted(t: Type) -> Type {
    Type::data("Unrestricted", vec![], vec![t])
}

fn pair(p: MultExpr, q: MultExpr, a: Type, b: Type) -> Type {
    Type::data("Pair", vec![p, q], vec![a, b])
}

fn int_fn(m: MultExpr) -> Type {
    Type::arrow(Type::Int, m, Type::Int)
}

fn is_linear(m: &MultExpr) -> bool {
    m.normalize().is_one()
}

const SUM: &str = "sumL";
const POLY: &str = "polyApp";

fn helper_defs() -> Vec<Def> {
    let src = "
def sumL : List Int -o Int =[w]
  \\[1] xs : List Int . case[1] xs of { Nil -> 0 ; Cons h t -> add(h, sumL t) }

def polyApp : forall p. (Int ->[p] Int) -> Int ->[p] Int =[w]
  /\\p . \\[w] f : Int ->[p] Int . \\[p] x : Int . f x
";
    let known = DeclTable::from_decls(
        &parse_source(PRELUDE, &DeclTable::new())
            .expect("prelude")
            .decls,
    );
    parse_source(src, &known)
        .expect("helper definitions parse")
        .defs
}

impl<'r> Gen<'r> {
    fn new(cfg: &GenConfig, prelude: &[DataDecl], rng: &'r mut ChaCha8Rng) -> Gen<'r> {
        Gen {
            cfg: cfg.clone(),
            rng,
            decls: DeclTable::from_decls(prelude),
            extra: Vec::new(),
            shared: Vec::new(),
            arrays: Vec::new(),
            next: 0,
        }
    }

    fn fresh(&mut self, base: &str) -> Name {
        let n = self.next;
        self.next += 1;
        Name::from(format!("{}{}", base, n))
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p.clamp(0.0, 1.0))
    }

    /// 1 or ω, by the configured weights.
    fn mult(&mut self) -> MultExpr {
        let [one, omega, _] = self.cfg.mult_weights;
        if one + omega == 0 {
            return MultExpr::One;
        }
        if self.rng.gen_range(0..one + omega) < one {
            MultExpr::One
        } else {
            MultExpr::Omega
        }
    }

    fn wants_mult_var(&mut self) -> bool {
        let total: u32 = self.cfg.mult_weights.iter().sum();
        self.rng.gen_range(0..total) < self.cfg.mult_weights[2]
    }

    fn literal(&mut self) -> Term {
        Term::Int(self.rng.gen_range(-3..10))
    }

    fn program(&mut self) -> (SourceFile, Type) {
        let count = if self.cfg.max_datatypes == 0 {
            0
        } else {
            self.rng.gen_range(0..=self.cfg.max_datatypes)
        };
        for i in 0..count {
            let d = self.datatype(i);
            self.decls.insert(d.clone());
            self.extra.push(d);
        }
        let defs = helper_defs();
        let target = self.target();
        let main = self.term(&target, Vec::new(), self.cfg.max_depth - 1);
        let file = SourceFile {
            decls: self.extra.clone(),
            defs,
            main: Some(main),
        };
        (file, target)
    }

    /// `data Dk [p] where { ... }` with integer and boolean fields of mixed
    /// multiplicity. The first constructor has no fields.
    fn datatype(&mut self, k: usize) -> DataDecl {
        let name = Name::from(format!("D{}", k));
        let param = self.chance(0.5);
        let mult_params = if param { vec![Name::new("p")] } else { vec![] };
        let ncons = self.rng.gen_range(1..=3);
        let mut cons = Vec::new();
        for j in 0..ncons {
            let nfields = if j == 0 { 0 } else { self.rng.gen_range(1..=3) };
            let fields = (0..nfields)
                .map(|_| {
                    let ty = if self.chance(0.7) { int() } else { boolean() };
                    let mult = match self.rng.gen_range(0..3) {
                        0 if param => MultExpr::var("p"),
                        1 => MultExpr::Omega,
                        _ => MultExpr::One,
                    };
                    Field { ty, mult }
                })
                .collect();
            cons.push(ConDecl {
                name: Name::from(format!("K{}x{}", k, j)),
                fields,
            });
        }
        DataDecl {
            name,
            mult_params,
            type_params: vec![],
            cons,
        }
    }

    fn data_type(&mut self) -> Option<Type> {
        let d = self.extra.choose(self.rng)?.clone();
        let mults = d.mult_params.iter().map(|_| self.mult()).collect();
        Some(Type::data(d.name.clone(), mults, vec![]))
    }

    fn target(&mut self) -> Type {
        let t = match self.cfg.target {
            Target::Any => *[
                Target::Int,
                Target::Int,
                Target::Bool,
                Target::Pair,
                Target::List,
                Target::Unrestricted,
                Target::Data,
            ]
            .choose(self.rng)
            .expect("nonempty"),
            t => t,
        };
        match t {
            Target::Int | Target::Any => int(),
            Target::Bool => boolean(),
            Target::Pair => {
                let (p, q) = (self.mult(), self.mult());
                pair(p, q, int(), int())
            }
            Target::List => list_int(),
            Target::Unrestricted => unrestricted(int()),
            Target::Data => self.data_type().unwrap_or_else(int),
        }
    }

    /// A type for an intermediate binding.
    fn any_type(&mut self) -> Type {
        match self.rng.gen_range(0..9) {
            0..=2 => int(),
            3 => boolean(),
            4 => {
                let (p, q) = (self.mult(), self.mult());
                pair(p, q, int(), int())
            }
            5 => list_int(),
            6 => unrestricted(int()),
            7 => self.data_type().unwrap_or_else(int),
            _ => {
                let m = self.mult();
                int_fn(m)
            }
        }
    }

    fn split(&mut self, lin: Vec<Lin>, parts: usize) -> Vec<Vec<Lin>> {
        let mut out = vec![Vec::new(); parts];
        for l in lin {
            let i = self.rng.gen_range(0..parts);
            out[i].push(l);
        }
        out
    }

    fn with_shared<T>(&mut self, vars: Vec<(Name, Type)>, f: impl FnOnce(&mut Self) -> T) -> T {
        let n = self.shared.len();
        self.shared.extend(vars);
        let r = f(self);
        self.shared.truncate(n);
        r
    }

    /// A term of type `ty` that uses every variable of `lin` exactly once.
    fn term(&mut self, ty: &Type, lin: Vec<Lin>, depth: u32) -> Term {
        if depth == 0 {
            return if lin.is_empty() {
                self.leaf(ty, 2)
            } else {
                self.finish(ty, lin)
            };
        }
        if !lin.is_empty() && self.chance(0.35) {
            return self.consume(ty, lin, depth);
        }
        if self.chance(self.cfg.array_prob) {
            return self.array_block(ty, lin, depth);
        }
        match self.rng.gen_range(0..10) {
            0 => self.let_linear(ty, lin, depth),
            1 => self.let_shared(ty, lin, depth),
            2 => self.beta(ty, lin, depth),
            _ => self.intro(ty, lin, depth),
        }
    }

    /// A closed-over-nothing-linear term, built quickly.
    fn leaf(&mut self, ty: &Type, size: u32) -> Term {
        match ty {
            Type::Int => {
                let mut options: Vec<u8> = vec![0, 0];
                if self.shared.iter().any(|(_, t)| *t == int()) {
                    options.push(1);
                }
                if !self.arrays.is_empty() {
                    options.push(2);
                }
                if self
                    .shared
                    .iter()
                    .any(|(_, t)| matches!(t, Type::Arrow(a, _, b) if **a == int() && **b == int()))
                {
                    options.push(3);
                }
                match *options.choose(self.rng).expect("nonempty") {
                    1 => {
                        let vars: Vec<Name> = self
                            .shared
                            .iter()
                            .filter(|(_, t)| *t == int())
                            .map(|(x, _)| x.clone())
                            .collect();
                        Term::Var(vars.choose(self.rng).expect("nonempty").clone())
                    }
                    2 => {
                        let (a, len) = self.arrays.choose(self.rng).expect("nonempty").clone();
                        let i = self.rng.gen_range(0..len);
                        Term::Prim(PrimOp::Index, vec![Term::Var(a), Term::Int(i)])
                    }
                    3 => {
                        let fs: Vec<Name> = self
                            .shared
                            .iter()
                            .filter(|(_, t)| matches!(t, Type::Arrow(a, _, b) if **a == int() && **b == int()))
                            .map(|(x, _)| x.clone())
                            .collect();
                        let f = fs.choose(self.rng).expect("nonempty").clone();
                        let arg = self.literal();
                        Term::app(Term::Var(f), arg)
                    }
                    _ => self.literal(),
                }
            }
            Type::Arrow(_, m, _) => {
                let y = self.fresh("y");
                let lit = self.literal();
                let op = *[PrimOp::Add, PrimOp::Mul, PrimOp::Sub]
                    .choose(self.rng)
                    .expect("nonempty");
                Term::lam(
                    m.clone(),
                    y.clone(),
                    int(),
                    Term::Prim(op, vec![Term::Var(y), lit]),
                )
            }
            Type::Data { .. } => {
                if let Some(x) = self.shared_of(ty) {
                    if self.chance(0.3) {
                        return Term::Var(x);
                    }
                }
                let (name, tys, mults, fields) = self.pick_con(ty, size == 0);
                let args = fields
                    .iter()
                    .map(|f| self.leaf(&f.ty, size.saturating_sub(1)))
                    .collect();
                Term::con(name, tys, mults, args)
            }
            _ => self.literal(),
        }
    }

    fn shared_of(&mut self, ty: &Type) -> Option<Name> {
        let vars: Vec<Name> = self
            .shared
            .iter()
            .filter(|(_, t)| t.equiv(ty))
            .map(|(x, _)| x.clone())
            .collect();
        vars.choose(self.rng).cloned()
    }

    /// Picks a constructor of `ty`, preferring ones without fields when
    /// `small`. Returns its instantiated fields.
    fn pick_con(&mut self, ty: &Type, small: bool) -> (Name, Vec<Type>, Vec<MultExpr>, Vec<Field>) {
        let Type::Data { name, mults, args } = ty else {
            panic!("not a datatype: {}", ty)
        };
        let d = self.decls.get(name).expect("declared").clone();
        let nullary: Vec<&ConDecl> = d.cons.iter().filter(|c| c.fields.is_empty()).collect();
        let c = if small && !nullary.is_empty() {
            nullary.choose(self.rng).copied().expect("nonempty")
        } else {
            d.cons
                .choose(self.rng)
                .expect("datatypes have constructors")
        };
        let fields = d.instantiate(c, mults, args);
        (c.name.clone(), args.clone(), mults.clone(), fields)
    }

    /// Uses up `lin` when no depth is left: everything is turned into one
    /// integer which then decides between two small results.
    fn finish(&mut self, ty: &Type, lin: Vec<Lin>) -> Term {
        let sum = lin
            .into_iter()
            .map(|l| self.int_of(l))
            .reduce(|a, b| Term::Prim(PrimOp::Add, vec![a, b]))
            .expect("something to consume");
        match ty {
            Type::Int => sum,
            t if *t == boolean() => {
                let lit = self.literal();
                Term::Prim(PrimOp::Lt, vec![sum, lit])
            }
            Type::Arrow(_, m, _) => {
                let y = self.fresh("y");
                Term::lam(
                    m.clone(),
                    y.clone(),
                    int(),
                    Term::Prim(PrimOp::Add, vec![sum, Term::Var(y)]),
                )
            }
            Type::Data { .. } => {
                // put the sum into a linear integer field when there is one
                let Type::Data { name, mults, args } = ty else {
                    unreachable!()
                };
                let d = self.decls.get(name).expect("declared").clone();
                let slot = d.cons.iter().find_map(|c| {
                    let fields = d.instantiate(c, mults, args);
                    let i = fields
                        .iter()
                        .position(|f| f.ty == int() && is_linear(&f.mult))?;
                    Some((c.name.clone(), fields, i))
                });
                match slot {
                    Some((c, fields, i)) => {
                        let mut sum = Some(sum);
                        let args_out = fields
                            .iter()
                            .enumerate()
                            .map(|(j, f)| {
                                if j == i {
                                    sum.take().expect("once")
                                } else {
                                    self.leaf(&f.ty, 0)
                                }
                            })
                            .collect();
                        Term::con(c, args.clone(), mults.clone(), args_out)
                    }
                    None => {
                        let lit = self.literal();
                        let yes = self.leaf(ty, 1);
                        let no = self.leaf(ty, 1);
                        bool_case(Term::Prim(PrimOp::Eq, vec![sum, lit]), yes, no)
                    }
                }
            }
            _ => unreachable!("unsupported goal type {}", ty),
        }
    }

    /// An integer term that consumes exactly the linear variable `l`.
    fn int_of(&mut self, l: Lin) -> Term {
        let x = Term::Var(l.name.clone());
        match &l.ty {
            Type::Int => x,
            Type::Arrow(..) => {
                let lit = self.literal();
                Term::app(x, lit)
            }
            t if *t == list_int() => Term::app(Term::var(SUM), x),
            Type::Data { .. } => {
                let branches = self.branches(&l.ty, |g, fields_lin, _| {
                    fields_lin
                        .into_iter()
                        .map(|f| g.int_of(f))
                        .reduce(|a, b| Term::Prim(PrimOp::Add, vec![a, b]))
                        .unwrap_or_else(|| g.literal())
                });
                Term::case(MultExpr::One, x, branches)
            }
            other => unreachable!("no linear variables of type {}", other),
        }
    }

    /// One branch per constructor of `ty`. Linear fields are handed to
    /// `body`; unrestricted ones are in scope while it runs.
    fn branches(
        &mut self,
        ty: &Type,
        mut body: impl FnMut(&mut Self, Vec<Lin>, usize) -> Term,
    ) -> Vec<Branch> {
        let Type::Data { name, mults, args } = ty else {
            panic!("not a datatype: {}", ty)
        };
        let d = self.decls.get(name).expect("declared").clone();
        let mut out = Vec::new();
        for (i, c) in d.cons.iter().enumerate() {
            let fields = d.instantiate(c, mults, args);
            let mut binders = Vec::new();
            let mut lin = Vec::new();
            let mut shared = Vec::new();
            for f in fields {
                let x = self.fresh("x");
                binders.push(x.clone());
                if is_linear(&f.mult) {
                    lin.push(Lin { name: x, ty: f.ty });
                } else {
                    shared.push((x, f.ty));
                }
            }
            let t = self.with_shared(shared, |g| body(g, lin, i));
            out.push(Branch {
                con: c.name.clone(),
                binders,
                body: t,
            });
        }
        out
    }

    /// Takes one linear variable apart and continues with the rest.
    fn consume(&mut self, ty: &Type, mut lin: Vec<Lin>, depth: u32) -> Term {
        let i = self.rng.gen_range(0..lin.len());
        let l = lin.remove(i);
        let rest = lin;
        let d = depth - 1;
        match &l.ty {
            Type::Data { .. } if l.ty != list_int() || self.chance(0.5) => {
                let scrut = Term::Var(l.name.clone());
                let branches = self.branches(&l.ty, |g, fields, _| {
                    let mut all = rest.clone();
                    all.extend(fields);
                    g.term(ty, all, d)
                });
                Term::case(MultExpr::One, scrut, branches)
            }
            _ => {
                let n = self.int_of(l);
                match ty {
                    Type::Int => {
                        let op = *[PrimOp::Add, PrimOp::Sub, PrimOp::Mul]
                            .choose(self.rng)
                            .expect("nonempty");
                        let other = self.term(ty, rest, d);
                        Term::Prim(op, vec![n, other])
                    }
                    _ => {
                        let lit = self.literal();
                        let yes = self.term(ty, rest.clone(), d);
                        let no = self.term(ty, rest, d);
                        bool_case(Term::Prim(PrimOp::Lt, vec![n, lit]), yes, no)
                    }
                }
            }
        }
    }

    /// A form whose head builds a value of `ty`.
    fn intro(&mut self, ty: &Type, lin: Vec<Lin>, depth: u32) -> Term {
        let d = depth - 1;
        match ty {
            Type::Int if self.wants_mult_var() && self.chance(0.5) => self.poly_app(lin, d),
            Type::Int => match self.rng.gen_range(0..8) {
                1 => {
                    let xs = self.term(&list_int(), lin, d);
                    Term::app(Term::var(SUM), xs)
                }
                2 if lin.is_empty() => self.leaf(ty, 1),
                3 if !self.shared.is_empty() => self.shared_fn_app(lin, d),
                _ => {
                    let op = *[PrimOp::Add, PrimOp::Sub, PrimOp::Mul]
                        .choose(self.rng)
                        .expect("nonempty");
                    let mut parts = self.split(lin, 2).into_iter();
                    let a = self.term(&int(), parts.next().expect("two"), d);
                    let b = self.term(&int(), parts.next().expect("two"), d);
                    Term::Prim(op, vec![a, b])
                }
            },
            Type::Arrow(_, m, _) => {
                let y = self.fresh("y");
                let body = if is_linear(m) {
                    let mut all = lin;
                    all.push(Lin {
                        name: y.clone(),
                        ty: int(),
                    });
                    self.term(&int(), all, d)
                } else {
                    self.with_shared(vec![(y.clone(), int())], |g| g.term(&int(), lin, d))
                };
                Term::lam(m.clone(), y, int(), body)
            }
            t if *t == boolean() && self.chance(0.6) => {
                let op = if self.chance(0.5) {
                    PrimOp::Lt
                } else {
                    PrimOp::Eq
                };
                let mut parts = self.split(lin, 2).into_iter();
                let a = self.term(&int(), parts.next().expect("two"), d);
                let b = self.term(&int(), parts.next().expect("two"), d);
                Term::Prim(op, vec![a, b])
            }
            Type::Data { .. } => {
                let (name, tys, mults, fields) = self.pick_con(ty, d == 0);
                let linear: Vec<usize> = (0..fields.len())
                    .filter(|i| is_linear(&fields[*i].mult))
                    .collect();
                if linear.is_empty() && !lin.is_empty() {
                    return self.consume(ty, lin, depth);
                }
                let mut shares = self.split(lin, linear.len().max(1)).into_iter();
                let args = fields
                    .iter()
                    .enumerate()
                    .map(|(i, f)| {
                        let share = if linear.contains(&i) {
                            shares.next().unwrap_or_default()
                        } else {
                            Vec::new()
                        };
                        let fd = if ty.equiv(&f.ty) { d.min(1) } else { d };
                        self.term(&f.ty, share, fd)
                    })
                    .collect();
                Term::con(name, tys, mults, args)
            }
            _ => self.leaf(ty, 1),
        }
    }

    /// `polyApp @[m] f x`: the multiplicity is chosen at the call.
    fn poly_app(&mut self, lin: Vec<Lin>, d: u32) -> Term {
        let m = if lin.is_empty() {
            self.mult()
        } else {
            MultExpr::One
        };
        let f = self.term(&int_fn(m.clone()), Vec::new(), d);
        let x = self.term(&int(), lin, d);
        Term::app(Term::app(Term::mult_app(Term::var(POLY), m), f), x)
    }

    /// Applies an unrestricted function variable of type `Int ->[m] Int`.
    fn shared_fn_app(&mut self, lin: Vec<Lin>, d: u32) -> Term {
        let fs: Vec<(Name, MultExpr)> = self
            .shared
            .iter()
            .filter_map(|(x, t)| match t {
                Type::Arrow(a, m, b) if **a == int() && **b == int() => {
                    Some((x.clone(), m.clone()))
                }
                _ => None,
            })
            .collect();
        let usable: Vec<&(Name, MultExpr)> = fs
            .iter()
            .filter(|(_, m)| lin.is_empty() || is_linear(m))
            .collect();
        match usable.choose(self.rng) {
            Some((f, _)) => {
                let f = f.clone();
                let x = self.term(&int(), lin, d);
                Term::app(Term::Var(f), x)
            }
            None => {
                let mut parts = self.split(lin, 2).into_iter();
                let a = self.term(&int(), parts.next().expect("two"), d);
                let b = self.term(&int(), parts.next().expect("two"), d);
                Term::Prim(PrimOp::Add, vec![a, b])
            }
        }
    }

    fn let_linear(&mut self, ty: &Type, lin: Vec<Lin>, depth: u32) -> Term {
        let d = depth - 1;
        let bty = self.any_type();
        let y = self.fresh("v");
        let mut parts = self.split(lin, 2).into_iter();
        let rhs = self.term(&bty, parts.next().expect("two"), d);
        let mut body_lin = parts.next().expect("two");
        body_lin.push(Lin {
            name: y.clone(),
            ty: bty.clone(),
        });
        let body = self.term(ty, body_lin, d);
        Term::let1(y, bty, rhs, body)
    }

    fn let_shared(&mut self, ty: &Type, lin: Vec<Lin>, depth: u32) -> Term {
        let d = depth - 1;
        let bty = self.any_type();
        let y = self.fresh("v");
        let rhs = self.term(&bty, Vec::new(), d);
        let body = self.with_shared(vec![(y.clone(), bty.clone())], |g| g.term(ty, lin, d));
        Term::Let {
            mult: MultExpr::Omega,
            recursive: true,
            binds: vec![crate::syntax::Binding {
                var: y,
                ty: bty,
                rhs,
            }],
            body: Box::new(body),
        }
    }

    /// `(\[m] y : A . body) arg`
    fn beta(&mut self, ty: &Type, lin: Vec<Lin>, depth: u32) -> Term {
        let d = depth - 1;
        let aty = self.any_type();
        let m = self.mult();
        let y = self.fresh("v");
        if is_linear(&m) {
            let mut parts = self.split(lin, 2).into_iter();
            let arg = self.term(&aty, parts.next().expect("two"), d);
            let mut body_lin = parts.next().expect("two");
            body_lin.push(Lin {
                name: y.clone(),
                ty: aty.clone(),
            });
            let body = self.term(ty, body_lin, d);
            Term::app(Term::lam(m, y, aty, body), arg)
        } else {
            let arg = self.term(&aty, Vec::new(), d);
            let body = self.with_shared(vec![(y.clone(), aty.clone())], |g| g.term(ty, lin, d));
            Term::app(Term::lam(m, y, aty, body), arg)
        }
    }

    /// Allocates, fills and freezes an array, then continues with it in
    /// scope.
    fn array_block(&mut self, ty: &Type, lin: Vec<Lin>, depth: u32) -> Term {
        let d = depth - 1;
        let len = self.rng.gen_range(1..=4);
        let init = self.leaf(&int(), 1);
        let m = self.fresh("m");
        let mut arr = Term::Var(m.clone());
        for _ in 0..self.rng.gen_range(0..=3) {
            let i = self.rng.gen_range(0..len);
            let v = self.term(&int(), Vec::new(), d.min(2));
            arr = Term::Prim(PrimOp::Write, vec![arr, Term::Int(i), v]);
        }
        let fill = Term::lam(
            MultExpr::One,
            m,
            Type::MArray(Box::new(int())),
            Term::Prim(PrimOp::Freeze, vec![arr]),
        );
        let alloc = Term::Prim(PrimOp::NewMArray, vec![Term::Int(len), init, fill]);
        let a = self.fresh("a");
        self.arrays.push((a.clone(), len));
        let body = self.with_shared(vec![(a.clone(), Type::Array(Box::new(int())))], |g| {
            g.term(ty, lin, d)
        });
        self.arrays.pop();
        Term::case(
            MultExpr::One,
            alloc,
            vec![Branch {
                con: Name::new("Unrestricted"),
                binders: vec![a],
                body,
            }],
        )
    }
}

fn bool_case(scrut: Term, yes: Term, no: Term) -> Term {
    Term::case(
        MultExpr::One,
        scrut,
        vec![
            Branch {
                con: Name::new("True"),
                binders: vec![],
                body: yes,
            },
            Branch {
                con: Name::new("False"),
                binders: vec![],
                body: no,
            },
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_one_int_is_a_literal() {
        let cfg = GenConfig {
            max_depth: 1,
            target: Target::Int,
            ..GenConfig::default()
        };
        for i in 0..20 {
            let p = gen_welltyped(&cfg, i).unwrap();
            assert!(matches!(p.file.main, Some(Term::Int(_))), "{}", p.text);
        }
    }

    #[test]
    fn same_seed_same_program() {
        let cfg = GenConfig {
            seed: 42,
            ..GenConfig::default()
        };
        for i in 0..10 {
            assert_eq!(
                gen_welltyped(&cfg, i).unwrap().text,
                gen_welltyped(&cfg, i).unwrap().text
            );
        }
    }

    #[test]
    fn every_emitted_program_checks_first_time() {
        let cfg = GenConfig {
            seed: 7,
            ..GenConfig::default()
        };
        for i in 0..200 {
            let p = gen_welltyped(&cfg, i).unwrap_or_else(|e| panic!("program {}: {}", i, e));
            assert_eq!(p.attempts, 1, "program {} needed retries:\n{}", i, p.text);
        }
    }

    #[test]
    fn zero_depth_is_invalid() {
        let cfg = GenConfig {
            max_depth: 0,
            ..GenConfig::default()
        };
        assert!(matches!(
            gen_welltyped(&cfg, 0),
            Err(GenError::InvalidConfig(_))
        ));
    }
}
