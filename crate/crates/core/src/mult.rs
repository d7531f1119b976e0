//! Multiplicities and their equivalence.
//!
//! Multiplicity expressions are built from `1`, `ω`, variables, sums and
//! products. Two expressions are equivalent when they have the same
//! [`MultNF`]: a polynomial whose monomials are multisets of variables and
//! whose coefficients live in the two-element semiring `{1, ω}` with
//! `1 + 1 = 1 + ω = ω + ω = ω` and `ω · ω = ω`. There is no zero.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::name::Name;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum MultExpr {
    One,
    Omega,
    Var(Name),
    Add(Box<MultExpr>, Box<MultExpr>),
    Mul(Box<MultExpr>, Box<MultExpr>),
}

impl MultExpr {
    pub fn var(name: impl Into<Name>) -> MultExpr {
        MultExpr::Var(name.into())
    }

    /// The formal sum, left unnormalised.
    #[allow(clippy::should_implement_trait)]
    pub fn add(a: MultExpr, b: MultExpr) -> MultExpr {
        MultExpr::Add(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: MultExpr, b: MultExpr) -> MultExpr {
        MultExpr::Mul(Box::new(a), Box::new(b))
    }

    pub fn normalize(&self) -> MultNF {
        mult_normalize(self)
    }

    pub fn is_closed(&self) -> bool {
        match self {
            MultExpr::One | MultExpr::Omega => true,
            MultExpr::Var(_) => false,
            MultExpr::Add(a, b) | MultExpr::Mul(a, b) => a.is_closed() && b.is_closed(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut BTreeSet<Name>) {
        match self {
            MultExpr::One | MultExpr::Omega => {}
            MultExpr::Var(v) => {
                out.insert(v.clone());
            }
            MultExpr::Add(a, b) | MultExpr::Mul(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn mentions(&self, var: &str) -> bool {
        match self {
            MultExpr::One | MultExpr::Omega => false,
            MultExpr::Var(v) => &**v == var,
            MultExpr::Add(a, b) | MultExpr::Mul(a, b) => a.mentions(var) || b.mentions(var),
        }
    }

    /// `self[by/var]`. Multiplicity expressions have no binders, so this is
    /// plain replacement.
    pub fn subst(&self, var: &str, by: &MultExpr) -> MultExpr {
        match self {
            MultExpr::Var(v) if &**v == var => by.clone(),
            MultExpr::One | MultExpr::Omega | MultExpr::Var(_) => self.clone(),
            MultExpr::Add(a, b) => MultExpr::add(a.subst(var, by), b.subst(var, by)),
            MultExpr::Mul(a, b) => MultExpr::mul(a.subst(var, by), b.subst(var, by)),
        }
    }

    pub fn subst_many(&self, map: &HashMap<Name, MultExpr>) -> MultExpr {
        if map.is_empty() {
            return self.clone();
        }
        match self {
            MultExpr::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            MultExpr::One | MultExpr::Omega => self.clone(),
            MultExpr::Add(a, b) => MultExpr::add(a.subst_many(map), b.subst_many(map)),
            MultExpr::Mul(a, b) => MultExpr::mul(a.subst_many(map), b.subst_many(map)),
        }
    }

    /// Renders the canonical form, which is usually much shorter than the
    /// expression it came from.
    pub fn simplify(&self) -> MultExpr {
        self.normalize().render()
    }
}

impl fmt::Display for MultExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(e: &MultExpr, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match e {
                MultExpr::One => f.write_str("1"),
                MultExpr::Omega => f.write_str("w"),
                MultExpr::Var(v) => write!(f, "{}", v),
                MultExpr::Add(a, b) => {
                    if prec > 0 {
                        f.write_str("(")?;
                    }
                    go(a, 0, f)?;
                    f.write_str(" + ")?;
                    go(b, 1, f)?;
                    if prec > 0 {
                        f.write_str(")")?;
                    }
                    Ok(())
                }
                MultExpr::Mul(a, b) => {
                    if prec > 1 {
                        f.write_str("(")?;
                    }
                    go(a, 1, f)?;
                    f.write_str(" * ")?;
                    go(b, 2, f)?;
                    if prec > 1 {
                        f.write_str(")")?;
                    }
                    Ok(())
                }
            }
        }
        go(self, 0, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coeff {
    One,
    Omega,
}

impl Coeff {
    fn plus(self, _other: Coeff) -> Coeff {
        Coeff::Omega
    }

    fn times(self, other: Coeff) -> Coeff {
        match (self, other) {
            (Coeff::One, Coeff::One) => Coeff::One,
            _ => Coeff::Omega,
        }
    }
}

/// A monomial: a sorted multiset of multiplicity variables. The empty
/// monomial is the constant term.
pub type Monomial = Vec<Name>;

/// Canonical form of a multiplicity expression. Never empty.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultNF {
    terms: BTreeMap<Monomial, Coeff>,
}

impl MultNF {
    pub fn one() -> MultNF {
        MultNF::constant(Coeff::One)
    }

    pub fn omega() -> MultNF {
        MultNF::constant(Coeff::Omega)
    }

    fn constant(c: Coeff) -> MultNF {
        let mut terms = BTreeMap::new();
        terms.insert(Vec::new(), c);
        MultNF { terms }
    }

    pub fn var(name: Name) -> MultNF {
        let mut terms = BTreeMap::new();
        terms.insert(vec![name], Coeff::One);
        MultNF { terms }
    }

    pub fn monomials(&self) -> impl Iterator<Item = (&Monomial, Coeff)> {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn is_one(&self) -> bool {
        *self == MultNF::one()
    }

    pub fn is_omega(&self) -> bool {
        *self == MultNF::omega()
    }

    pub fn is_closed(&self) -> bool {
        self.terms.keys().all(|m| m.is_empty())
    }

    pub fn plus(&self, other: &MultNF) -> MultNF {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            terms
                .entry(m.clone())
                .and_modify(|existing| *existing = existing.plus(*c))
                .or_insert(*c);
        }
        MultNF { terms }
    }

    pub fn times(&self, other: &MultNF) -> MultNF {
        let mut terms: BTreeMap<Monomial, Coeff> = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let mut m: Monomial = m1.iter().chain(m2.iter()).cloned().collect();
                m.sort();
                let c = c1.times(*c2);
                terms
                    .entry(m)
                    .and_modify(|existing| *existing = existing.plus(c))
                    .or_insert(c);
            }
        }
        MultNF { terms }
    }

    /// Back to syntax: a left-nested sum of `coeff * v1 * ... * vk`.
    pub fn render(&self) -> MultExpr {
        let mut sum: Option<MultExpr> = None;
        for (m, c) in &self.terms {
            let mut prod: Option<MultExpr> = match (c, m.is_empty()) {
                (Coeff::One, true) => Some(MultExpr::One),
                (Coeff::Omega, _) => Some(MultExpr::Omega),
                (Coeff::One, false) => None,
            };
            for v in m {
                let factor = MultExpr::Var(v.clone());
                prod = Some(match prod {
                    None => factor,
                    Some(p) => MultExpr::mul(p, factor),
                });
            }
            let prod = prod.expect("monomial renders to something");
            sum = Some(match sum {
                None => prod,
                Some(s) => MultExpr::add(s, prod),
            });
        }
        sum.expect("normal forms are never empty")
    }
}

impl fmt::Display for MultNF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

pub fn mult_normalize(e: &MultExpr) -> MultNF {
    match e {
        MultExpr::One => MultNF::one(),
        MultExpr::Omega => MultNF::omega(),
        MultExpr::Var(v) => MultNF::var(v.clone()),
        MultExpr::Add(a, b) => mult_normalize(a).plus(&mult_normalize(b)),
        MultExpr::Mul(a, b) => mult_normalize(a).times(&mult_normalize(b)),
    }
}

pub fn mult_equiv(a: &MultExpr, b: &MultExpr) -> bool {
    mult_normalize(a) == mult_normalize(b)
}

pub fn mult_subst(e: &MultExpr, var: &str, by: &MultExpr) -> MultExpr {
    e.subst(var, by)
}

/// A multiplicity as it appears in synthesized usages: either a real
/// multiplicity, or the bookkeeping `Zero` for "not used at all". `Zero`
/// cannot be written by users and is never substituted for a variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum UsageMult {
    Zero,
    Mult(MultNF),
}

impl UsageMult {
    pub fn one() -> UsageMult {
        UsageMult::Mult(MultNF::one())
    }

    pub fn omega() -> UsageMult {
        UsageMult::Mult(MultNF::omega())
    }

    pub fn of(e: &MultExpr) -> UsageMult {
        UsageMult::Mult(e.normalize())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, UsageMult::Zero)
    }

    /// Zero, 1 or ω: the multiplicities that joins are defined on.
    fn is_concrete(&self) -> bool {
        match self {
            UsageMult::Zero => true,
            UsageMult::Mult(nf) => nf.is_one() || nf.is_omega(),
        }
    }
}

impl fmt::Display for UsageMult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UsageMult::Zero => f.write_str("0"),
            UsageMult::Mult(nf) => write!(f, "{}", nf),
        }
    }
}

pub fn mult_add(a: &UsageMult, b: &UsageMult) -> UsageMult {
    match (a, b) {
        (UsageMult::Zero, x) | (x, UsageMult::Zero) => x.clone(),
        (UsageMult::Mult(x), UsageMult::Mult(y)) => UsageMult::Mult(x.plus(y)),
    }
}

pub fn mult_mul(a: &UsageMult, b: &UsageMult) -> UsageMult {
    match (a, b) {
        (UsageMult::Zero, _) | (_, UsageMult::Zero) => UsageMult::Zero,
        (UsageMult::Mult(x), UsageMult::Mult(y)) => UsageMult::Mult(x.times(y)),
    }
}

/// Least upper bound of two branch usages. Only defined when the two agree
/// or both are among `{0, 1, ω}`; anything else would have to widen a
/// multiplicity variable.
pub fn mult_join(a: &UsageMult, b: &UsageMult) -> Option<UsageMult> {
    if a == b {
        Some(a.clone())
    } else if a.is_concrete() && b.is_concrete() {
        Some(UsageMult::omega())
    } else {
        None
    }
}

/// Does a synthesized usage fit a binder declared at `declared`?
pub fn sub_usage(used: &UsageMult, declared: &MultExpr) -> bool {
    let declared = declared.normalize();
    if declared.is_omega() {
        return true;
    }
    match used {
        UsageMult::Zero => false,
        UsageMult::Mult(nf) => *nf == declared,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> MultExpr {
        MultExpr::var("p")
    }
    fn q() -> MultExpr {
        MultExpr::var("q")
    }

    fn nf(entries: &[(&[&str], Coeff)]) -> MultNF {
        MultNF {
            terms: entries
                .iter()
                .map(|(m, c)| (m.iter().map(|s| Name::new(s)).collect(), *c))
                .collect(),
        }
    }

    #[test]
    fn one_plus_one_is_omega() {
        let e = MultExpr::add(MultExpr::One, MultExpr::One);
        assert_eq!(e.normalize(), nf(&[(&[], Coeff::Omega)]));
    }

    #[test]
    fn one_is_unit() {
        let e = MultExpr::mul(MultExpr::One, p());
        assert_eq!(e.normalize(), nf(&[(&["p"], Coeff::One)]));
    }

    #[test]
    fn p_plus_p_is_omega_p() {
        let e = MultExpr::add(p(), p());
        assert_eq!(e.normalize(), nf(&[(&["p"], Coeff::Omega)]));
    }

    #[test]
    fn p_plus_q_is_not_omega() {
        let e = MultExpr::add(p(), q());
        assert_eq!(
            e.normalize(),
            nf(&[(&["p"], Coeff::One), (&["q"], Coeff::One)])
        );
        assert!(!mult_equiv(&e, &MultExpr::Omega));
    }

    #[test]
    fn equivalences() {
        let ww = MultExpr::mul(MultExpr::Omega, MultExpr::Omega);
        assert!(mult_equiv(&ww, &MultExpr::Omega));
        assert!(mult_equiv(&p(), &p()));
        let w_plus_wp = MultExpr::add(MultExpr::Omega, MultExpr::mul(MultExpr::Omega, p()));
        assert!(!mult_equiv(&w_plus_wp, &MultExpr::Omega));
    }

    #[test]
    fn usage_mult_arithmetic() {
        assert_eq!(
            mult_add(&UsageMult::one(), &UsageMult::one()),
            UsageMult::omega()
        );
        let up = UsageMult::of(&p());
        assert_eq!(mult_add(&UsageMult::Zero, &up), up);
        assert_eq!(
            mult_mul(&UsageMult::omega(), &UsageMult::one()),
            UsageMult::omega()
        );
        assert_eq!(mult_mul(&UsageMult::Zero, &up), UsageMult::Zero);
    }

    #[test]
    fn joins() {
        let one = UsageMult::one();
        let w = UsageMult::omega();
        let up = UsageMult::of(&p());
        assert_eq!(mult_join(&one, &one), Some(one.clone()));
        assert_eq!(mult_join(&one, &UsageMult::Zero), Some(w.clone()));
        assert_eq!(mult_join(&UsageMult::Zero, &w), Some(w.clone()));
        assert_eq!(mult_join(&one, &w), Some(w.clone()));
        assert_eq!(
            mult_join(&UsageMult::Zero, &UsageMult::Zero),
            Some(UsageMult::Zero)
        );
        assert_eq!(mult_join(&up, &one), None);
        assert_eq!(mult_join(&up, &up), Some(up));
    }

    #[test]
    fn sub_usage_cases() {
        assert!(sub_usage(&UsageMult::Zero, &MultExpr::Omega));
        assert!(sub_usage(&UsageMult::one(), &MultExpr::One));
        assert!(!sub_usage(&UsageMult::one(), &p()));
        assert!(!sub_usage(&UsageMult::Zero, &MultExpr::One));
        assert!(!sub_usage(&UsageMult::Zero, &p()));
        let pq = MultExpr::mul(p(), q());
        assert!(sub_usage(&UsageMult::of(&MultExpr::mul(q(), p())), &pq));
    }

    #[test]
    fn substitution_examples() {
        let pq = MultExpr::mul(p(), q());
        assert_eq!(
            mult_subst(&pq, "p", &MultExpr::One).normalize(),
            q().normalize()
        );
        let pp = MultExpr::add(p(), p());
        assert!(mult_subst(&pp, "p", &MultExpr::One).normalize().is_omega());
        assert_eq!(mult_subst(&p(), "p", &MultExpr::Omega), MultExpr::Omega);
    }

    #[test]
    fn render_examples() {
        let e = MultExpr::add(MultExpr::mul(MultExpr::Omega, p()), MultExpr::One);
        assert_eq!(e.simplify().to_string(), "1 + w * p");
    }
}
