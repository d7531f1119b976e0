//! Types shared by both evaluators: outcomes, trace records and observed
//! ground values.

use std::fmt;

use crate::name::Name;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StuckReason {
    MissingLinearBinding,
    TypestateViolation,
    MissingBranch,
    PrimitiveMisuse,
}

/// Why no rule applies: the rule that was attempted and where.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stuck {
    pub reason: StuckReason,
    pub rule: &'static str,
    pub location: String,
    pub detail: String,
}

impl fmt::Display for Stuck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} in rule `{}` at {}: {}",
            self.reason, self.rule, self.location, self.detail
        )
    }
}

/// Reasons an evaluation stops without a value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Halt {
    Blocked(Stuck),
    OutOfFuel,
    Blackhole(Name),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome<V> {
    Value(V),
    Blocked(Stuck),
    OutOfFuel,
    Blackhole(Name),
}

impl<V> Outcome<V> {
    pub fn from_result(r: Result<V, Halt>) -> Outcome<V> {
        match r {
            Ok(v) => Outcome::Value(v),
            Err(Halt::Blocked(s)) => Outcome::Blocked(s),
            Err(Halt::OutOfFuel) => Outcome::OutOfFuel,
            Err(Halt::Blackhole(x)) => Outcome::Blackhole(x),
        }
    }

    pub fn kind(&self) -> OutcomeKind {
        match self {
            Outcome::Value(_) => OutcomeKind::Value,
            Outcome::Blocked(_) => OutcomeKind::Blocked,
            Outcome::OutOfFuel => OutcomeKind::OutOfFuel,
            Outcome::Blackhole(_) => OutcomeKind::Blackhole,
        }
    }

    pub fn is_blocked(&self) -> bool {
        matches!(self, Outcome::Blocked(_))
    }

    pub fn value(&self) -> Option<&V> {
        match self {
            Outcome::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn map<W>(self, f: impl FnOnce(V) -> W) -> Outcome<W> {
        match self {
            Outcome::Value(v) => Outcome::Value(f(v)),
            Outcome::Blocked(s) => Outcome::Blocked(s),
            Outcome::OutOfFuel => Outcome::OutOfFuel,
            Outcome::Blackhole(x) => Outcome::Blackhole(x),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OutcomeKind {
    Value,
    Blocked,
    OutOfFuel,
    Blackhole,
}

impl OutcomeKind {
    /// The `outcome` field of JSON reports.
    pub fn label(self) -> &'static str {
        match self {
            OutcomeKind::Value => "value",
            OutcomeKind::Blocked => "blocked",
            OutcomeKind::OutOfFuel => "fuel",
            OutcomeKind::Blackhole => "blackhole",
        }
    }
}

/// One rule application, recorded when the rule is entered. `heap_delta`
/// is the change in environment size between entry and conclusion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub rule: &'static str,
    pub redex: String,
    pub heap_delta: i64,
}

/// A fully forced ground result. Functions and arrays are never compared.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Observation {
    Int(i64),
    Con(Name, Vec<Observation>),
    Opaque(&'static str),
}

impl Observation {
    fn write(&self, f: &mut fmt::Formatter<'_>, nested: bool) -> fmt::Result {
        match self {
            Observation::Int(i) => write!(f, "{}", i),
            Observation::Opaque(kind) => write!(f, "<{}>", kind),
            Observation::Con(c, fields) if fields.is_empty() => write!(f, "{}", c),
            Observation::Con(c, fields) => {
                if nested {
                    f.write_str("(")?;
                }
                write!(f, "{}", c)?;
                for x in fields {
                    f.write_str(" ")?;
                    x.write(f, true)?;
                }
                if nested {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }

    /// Contains no opaque parts.
    pub fn is_ground(&self) -> bool {
        match self {
            Observation::Int(_) => true,
            Observation::Opaque(_) => false,
            Observation::Con(_, fields) => fields.iter().all(Observation::is_ground),
        }
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, false)
    }
}

/// Shortens a printed term for trace output.
pub fn summarize(s: String, limit: usize) -> String {
    if s.chars().count() <= limit {
        s
    } else {
        let mut out: String = s.chars().take(limit).collect();
        out.push('…');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observation_display() {
        let o = Observation::Con(
            Name::new("Cons"),
            vec![
                Observation::Int(1),
                Observation::Con(Name::new("Nil"), vec![]),
            ],
        );
        assert_eq!(o.to_string(), "Cons 1 Nil");
        let nested = Observation::Con(Name::new("Just"), vec![o]);
        assert_eq!(nested.to_string(), "Just (Cons 1 Nil)");
    }
}
