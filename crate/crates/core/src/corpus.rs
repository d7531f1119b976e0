//! The bundled example programs. Each file starts with a comment stating
//! what it should do:
//!
//! ```text
//! -- expect: value <printed result>
//! -- expect: reject <diagnostic kind>
//! -- expect: blackhole
//! -- forced: <stuck reason when run without checking>
//! ```

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expectation {
    Value(String),
    Reject(String),
    Blackhole,
}

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub source: &'static str,
}

impl CorpusEntry {
    pub fn expectation(&self) -> Expectation {
        let line = header(self.source, "expect:")
            .unwrap_or_else(|| panic!("{} has no expectation", self.name));
        if let Some(v) = line.strip_prefix("value ") {
            Expectation::Value(v.trim().to_string())
        } else if let Some(k) = line.strip_prefix("reject ") {
            Expectation::Reject(k.trim().to_string())
        } else if line.trim() == "blackhole" {
            Expectation::Blackhole
        } else {
            panic!("{}: unreadable expectation `{}`", self.name, line)
        }
    }

    /// The stuck reason expected when the program is run unchecked.
    pub fn forced(&self) -> Option<String> {
        header(self.source, "forced:").map(|s| s.trim().to_string())
    }

    pub fn is_positive(&self) -> bool {
        !matches!(self.expectation(), Expectation::Reject(_))
    }
}

fn header<'a>(src: &'a str, key: &str) -> Option<&'a str> {
    src.lines()
        .take_while(|l| l.starts_with("--"))
        .filter_map(|l| l.trim_start_matches('-').trim().strip_prefix(key))
        .map(str::trim)
        .next()
}

macro_rules! corpus {
    ($($name:literal),* $(,)?) => {
        &[$(CorpusEntry { name: $name, source: include_str!(concat!("../corpus/", $name, ".lq")) }),*]
    };
}

pub const CORPUS: &[CorpusEntry] = corpus![
    "array7",
    "array_builder",
    "array_lazy_elem",
    "array_of_lists",
    "array_overwrite",
    "array_roundtrip",
    "array_two",
    "blackhole",
    "bool_logic",
    "case_let_mix",
    "compose",
    "dup_linear",
    "even_odd",
    "f1_linear",
    "f1_omega",
    "f2_linear",
    "fib",
    "fst_case1",
    "fst_omega",
    "lazy_unused",
    "linear_to_shared",
    "list_fold",
    "list_map",
    "list_pairs",
    "list_reverse",
    "list_shared",
    "list_sum",
    "maybe",
    "multi_let",
    "nested_case",
    "pair_mixed",
    "poly_apply",
    "poly_id",
    "sharing",
    "swap",
    "tagged",
    "unbound",
    "unrestricted",
    "write_after_freeze",
];

pub fn get(name: &str) -> Option<&'static CorpusEntry> {
    CORPUS.iter().find(|e| e.name == name)
}
