use std::borrow::Borrow;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

/// An interned-ish identifier. Cheap to clone and safe to share across threads.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(s: &str) -> Name {
        Name(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Names beginning with `%` cannot be written in surface syntax; the
    /// translation and the evaluators draw their fresh names from there.
    pub fn is_reserved(&self) -> bool {
        self.0.starts_with('%')
    }
}

impl Deref for Name {
    type Target = str;
    fn deref(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Name {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Name {
        Name::new(s)
    }
}

impl From<String> for Name {
    fn from(s: String) -> Name {
        Name(Arc::from(s))
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

/// Deterministic supply of reserved names: `%<prefix><n>`.
#[derive(Clone, Debug)]
pub struct NameSupply {
    prefix: &'static str,
    next: u64,
}

impl NameSupply {
    pub fn new(prefix: &'static str) -> NameSupply {
        NameSupply { prefix, next: 0 }
    }

    pub fn fresh(&mut self) -> Name {
        let n = self.next;
        self.next += 1;
        Name::from(format!("%{}{}", self.prefix, n))
    }

    pub fn issued(&self) -> u64 {
        self.next
    }
}

/// Picks `base`, `base'`, `base''`, ... until `taken` says no.
pub fn fresh_variant(base: &Name, taken: impl Fn(&str) -> bool) -> Name {
    let mut candidate = format!("{}'", base);
    while taken(&candidate) {
        candidate.push('\'');
    }
    Name::from(candidate)
}
