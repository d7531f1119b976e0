//! Usages: how often each free variable of a term is consumed.
//!
//! A [`Usage`] is the algorithmic counterpart of a typing context's
//! multiplicities. Variables that do not appear are unused (bookkeeping
//! zero), so `Zero` is never stored.

use std::collections::BTreeMap;
use std::fmt;

use crate::mult::{mult_add, mult_join, mult_mul, MultExpr, UsageMult};
use crate::name::Name;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Usage {
    entries: BTreeMap<Name, UsageMult>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnjoinableUsage {
    pub var: Name,
    pub left: UsageMult,
    pub right: UsageMult,
}

impl Usage {
    pub fn empty() -> Usage {
        Usage::default()
    }

    pub fn single(var: Name) -> Usage {
        let mut entries = BTreeMap::new();
        entries.insert(var, UsageMult::one());
        Usage { entries }
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (Name, UsageMult)>) -> Usage {
        let mut u = Usage::empty();
        for (k, v) in entries {
            u.set(k, v);
        }
        u
    }

    pub fn get(&self, var: &str) -> UsageMult {
        self.entries.get(var).cloned().unwrap_or(UsageMult::Zero)
    }

    pub fn set(&mut self, var: Name, m: UsageMult) {
        if m.is_zero() {
            self.entries.remove(&var);
        } else {
            self.entries.insert(var, m);
        }
    }

    /// Removes `var`, returning how it was used.
    pub fn take(&mut self, var: &str) -> UsageMult {
        self.entries.remove(var).unwrap_or(UsageMult::Zero)
    }

    pub fn vars(&self) -> impl Iterator<Item = &Name> {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &UsageMult)> {
        self.entries.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn add(&self, other: &Usage) -> Usage {
        usage_add(self, other)
    }

    pub fn scale(&self, by: &MultExpr) -> Usage {
        usage_scale(by, self)
    }

    /// Pointwise normal-form equality; this is also `==`.
    pub fn equiv(&self, other: &Usage) -> bool {
        self == other
    }
}

pub fn usage_add(a: &Usage, b: &Usage) -> Usage {
    let mut out = a.clone();
    for (k, v) in &b.entries {
        let sum = mult_add(&out.get(k), v);
        out.set(k.clone(), sum);
    }
    out
}

pub fn usage_scale(by: &MultExpr, u: &Usage) -> Usage {
    let factor = UsageMult::of(by);
    Usage::from_entries(
        u.entries
            .iter()
            .map(|(k, v)| (k.clone(), mult_mul(&factor, v))),
    )
}

pub fn usage_join(a: &Usage, b: &Usage) -> Result<Usage, UnjoinableUsage> {
    let mut out = Usage::empty();
    for var in a.entries.keys().chain(b.entries.keys()) {
        if out.entries.contains_key(var) {
            continue;
        }
        let (l, r) = (a.get(var), b.get(var));
        match mult_join(&l, &r) {
            Some(m) => out.set(var.clone(), m),
            None => {
                return Err(UnjoinableUsage {
                    var: var.clone(),
                    left: l,
                    right: r,
                })
            }
        }
    }
    Ok(out)
}

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{} ↦ {}", k, v)?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Name {
        Name::new("x")
    }

    #[test]
    fn add_and_scale() {
        let u = Usage::single(x());
        assert_eq!(usage_add(&u, &u).get("x"), UsageMult::omega());
        assert_eq!(
            usage_scale(&MultExpr::Omega, &u).get("x"),
            UsageMult::omega()
        );
        let mixed = Usage::from_entries([
            (x(), UsageMult::of(&MultExpr::var("p"))),
            (Name::new("y"), UsageMult::one()),
        ]);
        assert_eq!(usage_scale(&MultExpr::One, &mixed), mixed);
    }

    #[test]
    fn join_examples() {
        let one = Usage::single(x());
        assert_eq!(usage_join(&one, &one).unwrap(), one);
        assert_eq!(
            usage_join(&one, &Usage::empty()).unwrap().get("x"),
            UsageMult::omega()
        );
        let p = Usage::from_entries([(x(), UsageMult::of(&MultExpr::var("p")))]);
        let err = usage_join(&p, &one).unwrap_err();
        assert_eq!(err.var, x());
    }
}
