//! Lexer and recursive-descent parser for `.lq` source files.

use std::collections::HashMap;
use std::fmt;

use crate::mult::MultExpr;
use crate::name::Name;
use crate::syntax::{Binding, Branch, ConDecl, DataDecl, DeclTable, Field, PrimOp, Term, Type};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

/// A top-level definition `def x : T =[m] body`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Def {
    pub name: Name,
    pub ty: Type,
    pub mult: MultExpr,
    pub body: Term,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SourceFile {
    pub decls: Vec<DataDecl>,
    pub defs: Vec<Def>,
    pub main: Option<Term>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Upper(String),
    Int(i64),
    Backslash,
    BigLambda,
    Dot,
    Colon,
    Comma,
    Semi,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    At,
    Eq,
    Arrow,
    Lolli,
    Plus,
    Star,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Upper(s) => write!(f, "`{}`", s),
            Tok::Int(i) => write!(f, "`{}`", i),
            Tok::Eof => f.write_str("end of input"),
            other => {
                let s = match other {
                    Tok::Backslash => "\\",
                    Tok::BigLambda => "/\\",
                    Tok::Dot => ".",
                    Tok::Colon => ":",
                    Tok::Comma => ",",
                    Tok::Semi => ";",
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::LBrace => "{",
                    Tok::RBrace => "}",
                    Tok::LBracket => "[",
                    Tok::RBracket => "]",
                    Tok::At => "@",
                    Tok::Eq => "=",
                    Tok::Arrow => "->",
                    Tok::Lolli => "-o",
                    Tok::Plus => "+",
                    Tok::Star => "*",
                    _ => unreachable!(),
                };
                write!(f, "`{}`", s)
            }
        }
    }
}

const KEYWORDS: &[&str] = &[
    "data", "where", "def", "main", "case", "of", "let", "in", "forall", "w",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s) || PrimOp::from_name(s).is_some()
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut push = |tok: Tok, len: usize, i: &mut usize, col: &mut usize| {
            out.push(Spanned {
                tok,
                line: tl,
                col: tc,
            });
            *i += len;
            *col += len;
        };
        let next = chars.get(i + 1).copied();
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '-' if next == Some('-') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '-' if next == Some('>') => push(Tok::Arrow, 2, &mut i, &mut col),
            '-' if next == Some('o') && !chars.get(i + 2).copied().is_some_and(is_ident_char) => {
                push(Tok::Lolli, 2, &mut i, &mut col)
            }
            '-' if next.is_some_and(|d| d.is_ascii_digit()) => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let text: String = chars[start..j].iter().collect();
                let value = format!("-{}", text)
                    .parse::<i64>()
                    .map_err(|_| ParseError {
                        line: tl,
                        col: tc,
                        message: format!("integer literal -{} out of range", text),
                    })?;
                push(Tok::Int(value), j - i, &mut i, &mut col);
            }
            '/' if next == Some('\\') => push(Tok::BigLambda, 2, &mut i, &mut col),
            '\\' => push(Tok::Backslash, 1, &mut i, &mut col),
            '.' => push(Tok::Dot, 1, &mut i, &mut col),
            ':' => push(Tok::Colon, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            ';' => push(Tok::Semi, 1, &mut i, &mut col),
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            '{' => push(Tok::LBrace, 1, &mut i, &mut col),
            '}' => push(Tok::RBrace, 1, &mut i, &mut col),
            '[' => push(Tok::LBracket, 1, &mut i, &mut col),
            ']' => push(Tok::RBracket, 1, &mut i, &mut col),
            '@' => push(Tok::At, 1, &mut i, &mut col),
            '=' => push(Tok::Eq, 1, &mut i, &mut col),
            '+' => push(Tok::Plus, 1, &mut i, &mut col),
            '*' => push(Tok::Star, 1, &mut i, &mut col),
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let text: String = chars[i..j].iter().collect();
                let value = text.parse::<i64>().map_err(|_| ParseError {
                    line: tl,
                    col: tc,
                    message: format!("integer literal {} out of range", text),
                })?;
                push(Tok::Int(value), j - i, &mut i, &mut col);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                let text: String = chars[i..j].iter().collect();
                let tok = if c.is_ascii_uppercase() {
                    Tok::Upper(text)
                } else {
                    Tok::Ident(text)
                };
                push(tok, j - i, &mut i, &mut col);
            }
            other => {
                return Err(ParseError {
                    line: tl,
                    col: tc,
                    message: format!("unexpected character {:?}", other),
                })
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

/// Arity of a datatype as seen by the parser: (multiplicity params, type params).
type Arities = HashMap<String, (usize, usize)>;

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    types: Arities,
    /// Constructor name to (mult params, type params, fields) of its datatype.
    cons: HashMap<String, (usize, usize, usize)>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let s = &self.toks[self.pos];
        Err(ParseError {
            line: s.line,
            col: s.col,
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            self.error(format!("expected {}, found {}", tok, self.peek()))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.advance();
            Ok(())
        } else {
            self.error(format!("expected `{}`, found {}", kw, self.peek()))
        }
    }

    fn ident(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.advance();
                Ok(Name::from(s))
            }
            other => self.error(format!("expected an identifier, found {}", other)),
        }
    }

    fn upper(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Upper(s) => {
                self.advance();
                Ok(Name::from(s))
            }
            other => self.error(format!("expected a capitalised name, found {}", other)),
        }
    }

    // ---- multiplicities ----

    fn mult(&mut self) -> PResult<MultExpr> {
        let mut lhs = self.mult_product()?;
        while *self.peek() == Tok::Plus {
            self.advance();
            let rhs = self.mult_product()?;
            lhs = MultExpr::add(lhs, rhs);
        }
        Ok(lhs)
    }

    fn mult_product(&mut self) -> PResult<MultExpr> {
        let mut lhs = self.mult_atom()?;
        while *self.peek() == Tok::Star {
            self.advance();
            let rhs = self.mult_atom()?;
            lhs = MultExpr::mul(lhs, rhs);
        }
        Ok(lhs)
    }

    fn mult_atom(&mut self) -> PResult<MultExpr> {
        match self.peek().clone() {
            Tok::Int(1) => {
                self.advance();
                Ok(MultExpr::One)
            }
            Tok::Ident(s) if s == "w" => {
                self.advance();
                Ok(MultExpr::Omega)
            }
            Tok::Ident(_) => Ok(MultExpr::Var(self.ident()?)),
            Tok::LParen => {
                self.advance();
                let m = self.mult()?;
                self.expect(Tok::RParen)?;
                Ok(m)
            }
            other => self.error(format!("expected a multiplicity, found {}", other)),
        }
    }

    fn bracket_mult(&mut self) -> PResult<MultExpr> {
        self.expect(Tok::LBracket)?;
        let m = self.mult()?;
        self.expect(Tok::RBracket)?;
        Ok(m)
    }

    // ---- types ----

    fn ty(&mut self) -> PResult<Type> {
        if self.is_kw("forall") {
            self.advance();
            let p = self.ident()?;
            self.expect(Tok::Dot)?;
            let body = self.ty()?;
            return Ok(Type::Forall(p, Box::new(body)));
        }
        let dom = self.ty_app()?;
        match self.peek() {
            Tok::Arrow => {
                self.advance();
                let m = if *self.peek() == Tok::LBracket {
                    self.bracket_mult()?
                } else {
                    MultExpr::Omega
                };
                let cod = self.ty()?;
                Ok(Type::arrow(dom, m, cod))
            }
            Tok::Lolli => {
                self.advance();
                let cod = self.ty()?;
                Ok(Type::arrow(dom, MultExpr::One, cod))
            }
            _ => Ok(dom),
        }
    }

    fn ty_app(&mut self) -> PResult<Type> {
        match self.peek().clone() {
            Tok::Upper(s) if s == "MArray" || s == "Array" => {
                self.advance();
                let elem = self.ty_atom()?;
                Ok(if s == "MArray" {
                    Type::MArray(Box::new(elem))
                } else {
                    Type::Array(Box::new(elem))
                })
            }
            Tok::Upper(s) if s != "Int" => {
                self.advance();
                let (nm, nt) = match self.types.get(&s) {
                    Some(a) => *a,
                    None => return self.error(format!("unknown datatype `{}`", s)),
                };
                let mut mults = Vec::with_capacity(nm);
                for _ in 0..nm {
                    mults.push(self.mult_atom()?);
                }
                let mut args = Vec::with_capacity(nt);
                for _ in 0..nt {
                    args.push(self.ty_atom()?);
                }
                Ok(Type::Data {
                    name: Name::from(s),
                    mults,
                    args,
                })
            }
            _ => self.ty_atom(),
        }
    }

    fn ty_atom(&mut self) -> PResult<Type> {
        match self.peek().clone() {
            Tok::Upper(s) if s == "Int" => {
                self.advance();
                Ok(Type::Int)
            }
            Tok::Upper(s) => match self.types.get(&s) {
                Some((0, 0)) => {
                    self.advance();
                    Ok(Type::simple(&s))
                }
                Some(_) => self.error(format!(
                    "datatype `{}` takes arguments; parenthesise its application",
                    s
                )),
                None if s == "MArray" || s == "Array" => {
                    self.error(format!("`{}` takes an argument; parenthesise it", s))
                }
                None => self.error(format!("unknown datatype `{}`", s)),
            },
            Tok::Ident(_) => Ok(Type::Var(self.ident()?)),
            Tok::LParen => {
                self.advance();
                let t = self.ty()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            other => self.error(format!("expected a type, found {}", other)),
        }
    }

    // ---- terms ----

    fn term(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Backslash => {
                self.advance();
                let m = self.bracket_mult()?;
                let x = self.ident()?;
                self.expect(Tok::Colon)?;
                let ty = self.ty()?;
                self.expect(Tok::Dot)?;
                let body = self.term()?;
                Ok(Term::Lam {
                    mult: m,
                    var: x,
                    ty,
                    body: Box::new(body),
                })
            }
            Tok::BigLambda => {
                self.advance();
                let p = self.ident()?;
                self.expect(Tok::Dot)?;
                let body = self.term()?;
                Ok(Term::MultLam {
                    var: p,
                    body: Box::new(body),
                })
            }
            Tok::Ident(s) if s == "case" => {
                self.advance();
                let m = self.bracket_mult()?;
                let scrut = self.term()?;
                self.expect_kw("of")?;
                self.expect(Tok::LBrace)?;
                let mut branches = Vec::new();
                loop {
                    if *self.peek() == Tok::RBrace {
                        break;
                    }
                    let con = self.upper()?;
                    let mut binders = Vec::new();
                    while *self.peek() != Tok::Arrow {
                        binders.push(self.ident()?);
                    }
                    self.expect(Tok::Arrow)?;
                    let body = self.term()?;
                    branches.push(Branch { con, binders, body });
                    if *self.peek() == Tok::Semi {
                        self.advance();
                    } else {
                        break;
                    }
                }
                self.expect(Tok::RBrace)?;
                if branches.is_empty() {
                    return self.error("a case needs at least one branch");
                }
                Ok(Term::case(m, scrut, branches))
            }
            Tok::Ident(s) if s == "let" => {
                self.advance();
                let m = self.bracket_mult()?;
                let mut binds = Vec::new();
                loop {
                    let var = self.ident()?;
                    self.expect(Tok::Colon)?;
                    let ty = self.ty()?;
                    self.expect(Tok::Eq)?;
                    let rhs = self.term()?;
                    binds.push(Binding { var, ty, rhs });
                    if *self.peek() == Tok::Comma {
                        self.advance();
                    } else {
                        break;
                    }
                }
                self.expect_kw("in")?;
                let body = self.term()?;
                Ok(Term::let_(m, binds, body))
            }
            _ => self.application(),
        }
    }

    fn starts_arg(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => !is_keyword(s) || PrimOp::from_name(s).is_some(),
            Tok::Upper(_) | Tok::Int(_) | Tok::LParen => true,
            _ => false,
        }
    }

    fn application(&mut self) -> PResult<Term> {
        let mut head = self.postfix()?;
        while self.starts_arg() {
            let arg = self.postfix()?;
            head = Term::app(head, arg);
        }
        Ok(head)
    }

    fn postfix(&mut self) -> PResult<Term> {
        let mut t = self.atom()?;
        while *self.peek() == Tok::At && *self.peek_at(1) == Tok::LBracket {
            self.advance();
            let m = self.bracket_mult()?;
            t = Term::mult_app(t, m);
        }
        Ok(t)
    }

    fn atom(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.advance();
                Ok(Term::Int(i))
            }
            Tok::Ident(s) => {
                if let Some(op) = PrimOp::from_name(&s) {
                    self.advance();
                    self.expect(Tok::LParen)?;
                    let mut args = Vec::new();
                    if *self.peek() != Tok::RParen {
                        loop {
                            args.push(self.term()?);
                            if *self.peek() == Tok::Comma {
                                self.advance();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen)?;
                    if args.len() != op.arity() {
                        return self.error(format!(
                            "`{}` takes {} arguments, given {}",
                            op.name(),
                            op.arity(),
                            args.len()
                        ));
                    }
                    return Ok(Term::Prim(op, args));
                }
                Ok(Term::Var(self.ident()?))
            }
            Tok::Upper(s) => {
                let (nm, nt, nf) = match self.cons.get(&s) {
                    Some(a) => *a,
                    None => return self.error(format!("unknown constructor `{}`", s)),
                };
                self.advance();
                let mut tys = Vec::new();
                if nt > 0 {
                    self.expect(Tok::At)?;
                    self.expect(Tok::LBracket)?;
                    loop {
                        tys.push(self.ty()?);
                        if *self.peek() == Tok::Comma {
                            self.advance();
                        } else {
                            break;
                        }
                    }
                    self.expect(Tok::RBracket)?;
                }
                let mut mults = Vec::new();
                if nm > 0 {
                    self.expect(Tok::At)?;
                    self.expect(Tok::LBracket)?;
                    loop {
                        mults.push(self.mult()?);
                        if *self.peek() == Tok::Comma {
                            self.advance();
                        } else {
                            break;
                        }
                    }
                    self.expect(Tok::RBracket)?;
                }
                let mut args = Vec::with_capacity(nf);
                for _ in 0..nf {
                    if !self.starts_arg() {
                        return self.error(format!("constructor `{}` expects {} arguments", s, nf));
                    }
                    args.push(self.postfix()?);
                }
                Ok(Term::Con {
                    name: Name::from(s),
                    tys,
                    mults,
                    args,
                })
            }
            Tok::LParen => {
                self.advance();
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            other => self.error(format!("expected a term, found {}", other)),
        }
    }

    // ---- declarations ----

    fn data_decl(&mut self) -> PResult<DataDecl> {
        self.expect_kw("data")?;
        let name = self.upper()?;
        let mut mult_params = Vec::new();
        if *self.peek() == Tok::LBracket {
            self.advance();
            loop {
                mult_params.push(self.ident()?);
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
            self.expect(Tok::RBracket)?;
        }
        let mut type_params = Vec::new();
        while !self.is_kw("where") {
            type_params.push(self.ident()?);
        }
        self.expect_kw("where")?;
        self.expect(Tok::LBrace)?;
        let mut decl = DataDecl {
            name,
            mult_params,
            type_params,
            cons: Vec::new(),
        };
        let expected = decl.self_type();
        loop {
            if *self.peek() == Tok::RBrace {
                break;
            }
            let con = self.upper()?;
            self.expect(Tok::Colon)?;
            let sig = self.ty()?;
            let mut fields = Vec::new();
            let mut rest = sig;
            while let Type::Arrow(a, m, b) = rest {
                fields.push(Field { ty: *a, mult: m });
                rest = *b;
            }
            if rest != expected {
                return self.error(format!(
                    "constructor `{}` must return `{}`",
                    con,
                    crate::pretty::type_to_string(&expected)
                ));
            }
            decl.cons.push(ConDecl { name: con, fields });
            if *self.peek() == Tok::Semi {
                self.advance();
            } else {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        Ok(decl)
    }

    fn def(&mut self) -> PResult<Def> {
        self.expect_kw("def")?;
        let name = self.ident()?;
        self.expect(Tok::Colon)?;
        let ty = self.ty()?;
        self.expect(Tok::Eq)?;
        let mult = self.bracket_mult()?;
        if mult != MultExpr::One && mult != MultExpr::Omega {
            return self.error("definitions are either `=[1]` or `=[w]`");
        }
        let body = self.term()?;
        Ok(Def {
            name,
            ty,
            mult,
            body,
        })
    }

    fn source_file(&mut self) -> PResult<SourceFile> {
        let mut file = SourceFile::default();
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(s) if s == "data" => {
                    let d = self.data_decl()?;
                    if file.decls.iter().any(|e| e.name == d.name) {
                        return self.error(format!("datatype `{}` declared twice", d.name));
                    }
                    file.decls.push(d);
                }
                Tok::Ident(s) if s == "def" => {
                    let d = self.def()?;
                    if file.defs.iter().any(|e| e.name == d.name) {
                        return self.error(format!("`{}` defined twice", d.name));
                    }
                    file.defs.push(d);
                }
                Tok::Ident(s) if s == "main" => {
                    if file.main.is_some() {
                        return self.error("`main` defined twice");
                    }
                    self.advance();
                    self.expect(Tok::Eq)?;
                    file.main = Some(self.term()?);
                }
                other => {
                    return self.error(format!("expected `data`, `def` or `main`, found {}", other))
                }
            }
        }
        Ok(file)
    }
}

/// Datatype headers and constructor arities, gathered ahead of parsing so
/// that declarations may appear in any order.
fn prescan(
    toks: &[Spanned],
    known: &DeclTable,
) -> (Arities, HashMap<String, (usize, usize, usize)>) {
    let mut types: Arities = HashMap::new();
    let mut cons = HashMap::new();
    for d in known.iter() {
        types.insert(
            d.name.to_string(),
            (d.mult_params.len(), d.type_params.len()),
        );
        for c in &d.cons {
            cons.insert(
                c.name.to_string(),
                (d.mult_params.len(), d.type_params.len(), c.fields.len()),
            );
        }
    }
    let mut i = 0;
    while i < toks.len() {
        if toks[i].tok == Tok::Ident("data".into()) {
            if let Some(Tok::Upper(name)) = toks.get(i + 1).map(|s| &s.tok) {
                let mut j = i + 2;
                let mut nm = 0;
                let mut nt = 0;
                if toks.get(j).map(|s| &s.tok) == Some(&Tok::LBracket) {
                    j += 1;
                    while let Some(t) = toks.get(j).map(|s| &s.tok) {
                        match t {
                            Tok::Ident(_) => nm += 1,
                            Tok::Comma => {}
                            _ => break,
                        }
                        j += 1;
                    }
                    j += 1;
                }
                while let Some(Tok::Ident(s)) = toks.get(j).map(|s| &s.tok) {
                    if s == "where" {
                        break;
                    }
                    nt += 1;
                    j += 1;
                }
                types.insert(name.clone(), (nm, nt));
                // constructors: `C : ...` at brace depth one, fields counted
                // as top-level arrows of the signature
                let mut depth = 0i32;
                let mut k = j;
                let mut current: Option<(String, usize, i32)> = None;
                while let Some(t) = toks.get(k).map(|s| &s.tok) {
                    match t {
                        Tok::LBrace => depth += 1,
                        Tok::RBrace => {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        Tok::LParen => {
                            if let Some(c) = current.as_mut() {
                                c.2 += 1;
                            }
                        }
                        Tok::RParen => {
                            if let Some(c) = current.as_mut() {
                                c.2 -= 1;
                            }
                        }
                        Tok::Upper(c)
                            if depth == 1
                                && toks.get(k + 1).map(|s| &s.tok) == Some(&Tok::Colon) =>
                        {
                            current = Some((c.clone(), 0, 0));
                        }
                        Tok::Arrow | Tok::Lolli => {
                            if let Some(c) = current.as_mut() {
                                if c.2 == 0 {
                                    c.1 += 1;
                                }
                            }
                        }
                        Tok::Semi if depth == 1 => {
                            if let Some((c, n, _)) = current.take() {
                                cons.insert(c, (nm, nt, n));
                            }
                        }
                        _ => {}
                    }
                    k += 1;
                }
                if let Some((c, n, _)) = current.take() {
                    cons.insert(c, (nm, nt, n));
                }
                i = k;
            }
        }
        i += 1;
    }
    (types, cons)
}

fn parser_for(src: &str, known: &DeclTable) -> PResult<Parser> {
    let toks = lex(src)?;
    let (types, cons) = prescan(&toks, known);
    Ok(Parser {
        toks,
        pos: 0,
        types,
        cons,
    })
}

/// Parses a whole source file. `known` supplies datatypes declared
/// elsewhere (normally the prelude).
pub fn parse_source(src: &str, known: &DeclTable) -> Result<SourceFile, ParseError> {
    let mut p = parser_for(src, known)?;
    p.source_file()
}

pub fn parse_term(src: &str, known: &DeclTable) -> Result<Term, ParseError> {
    let mut p = parser_for(src, known)?;
    let t = p.term()?;
    p.expect(Tok::Eof)?;
    Ok(t)
}

pub fn parse_type(src: &str, known: &DeclTable) -> Result<Type, ParseError> {
    let mut p = parser_for(src, known)?;
    let t = p.ty()?;
    p.expect(Tok::Eof)?;
    Ok(t)
}

pub fn parse_mult(src: &str) -> Result<MultExpr, ParseError> {
    let mut p = parser_for(src, &DeclTable::new())?;
    let m = p.mult()?;
    p.expect(Tok::Eof)?;
    Ok(m)
}
