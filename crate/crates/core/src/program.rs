//! From source text to a checked program in sharing form.

use std::fmt;

use crate::parse::{parse_source, ParseError, SourceFile};
use crate::syntax::{DataDecl, DeclTable, Term, Type};
use crate::translate::to_sharing;
use crate::typecheck::{check_program, check_program_lenient, Diagnostic};

pub const PRELUDE: &str = include_str!("prelude.lq");

#[derive(Clone, Debug)]
pub enum LoadError {
    Parse {
        file: &'static str,
        error: ParseError,
    },
    NoMain,
    Rejected(Vec<Diagnostic>),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Parse { file, error } => write!(f, "{}:{}", file, error),
            LoadError::NoMain => f.write_str("program has no `main`"),
            LoadError::Rejected(diags) => {
                for (i, d) in diags.iter().enumerate() {
                    if i > 0 {
                        f.write_str("\n")?;
                    }
                    write!(f, "{}", d)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoadOptions<'a> {
    /// Declarations prepended to every program. `None` disables them.
    pub prelude: Option<&'a str>,
    /// Skip linearity checking.
    pub lenient: bool,
}

impl Default for LoadOptions<'_> {
    fn default() -> Self {
        LoadOptions {
            prelude: Some(PRELUDE),
            lenient: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Program {
    pub decls: DeclTable,
    /// The whole program as one closed term, before translation.
    pub source: Term,
    /// The same term in sharing form.
    pub term: Term,
    pub ty: Type,
}

pub fn parse_with_prelude(
    src: &str,
    prelude: Option<&str>,
) -> Result<(Vec<DataDecl>, SourceFile), LoadError> {
    let pre = match prelude {
        Some(p) => {
            parse_source(p, &DeclTable::new())
                .map_err(|error| LoadError::Parse {
                    file: "prelude",
                    error,
                })?
                .decls
        }
        None => Vec::new(),
    };
    let known = DeclTable::from_decls(&pre);
    let file = parse_source(src, &known).map_err(|error| LoadError::Parse {
        file: "input",
        error,
    })?;
    Ok((pre, file))
}

pub fn load(src: &str, opts: &LoadOptions) -> Result<Program, LoadError> {
    let (mut decls, file) = parse_with_prelude(src, opts.prelude)?;
    decls.extend(file.decls.iter().cloned());
    let main = file.main.as_ref().ok_or(LoadError::NoMain)?;
    let checked = if opts.lenient {
        check_program_lenient(&decls, &file.defs, main)
    } else {
        check_program(&decls, &file.defs, main)
    }
    .map_err(LoadError::Rejected)?;
    let term = to_sharing(&checked.typed);
    Ok(Program {
        decls: checked.decls,
        source: checked.term,
        term,
        ty: checked.ty,
    })
}

/// Type checks a program without translating it.
pub fn check_source(src: &str, prelude: Option<&str>) -> Result<Type, LoadError> {
    let (mut decls, file) = parse_with_prelude(src, prelude)?;
    decls.extend(file.decls.iter().cloned());
    let main = file.main.as_ref().ok_or(LoadError::NoMain)?;
    check_program(&decls, &file.defs, main)
        .map(|c| c.ty)
        .map_err(LoadError::Rejected)
}
