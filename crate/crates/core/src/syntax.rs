//! Abstract and concrete syntax for F<: types and type environments.
//!
//! Types are `X | Top | T -> T | All X <: T . T`; environments are ordered
//! sequences of `X <: T` bindings with pairwise-distinct names. Binders are
//! represented by name, so alpha-equivalence is an explicit operation rather
//! than a property of the representation, and environment splits and
//! permutations can be expressed directly on names.
//!
//! Everything here is immutable after construction and all operations are
//! pure functions.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Reserved words of the concrete syntax; never legal variable names.
pub const RESERVED: [&str; 2] = ["Top", "All"];

/// Errors produced by name validation and the type/environment parsers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("reserved name `{name}` cannot be used as a variable")]
    ReservedName { name: String },
    #[error("invalid variable name `{name}`")]
    InvalidName { name: String },
    #[error("duplicate environment name `{name}`")]
    DuplicateName { name: String },
}

/// A type-variable name.
///
/// Names are nonempty runs of letters, digits and underscores that do not
/// begin with a digit and are not reserved. Equality is textual; the derived
/// `Ord` (lexicographic) makes name sets deterministic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TyVarName(String);

impl TyVarName {
    pub fn new(text: &str) -> Result<Self, SyntaxError> {
        let mut chars = text.chars();
        let head_ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_');
        let tail_ok = chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !head_ok || !tail_ok {
            return Err(SyntaxError::InvalidName { name: text.to_string() });
        }
        if RESERVED.contains(&text) {
            return Err(SyntaxError::ReservedName { name: text.to_string() });
        }
        Ok(TyVarName(text.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TyVarName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An F<: type.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Type {
    Var(TyVarName),
    Top,
    Arrow(Box<Type>, Box<Type>),
    /// `All binder <: bound . body`; `binder` scopes over `body` only, never
    /// over `bound`.
    Forall {
        binder: TyVarName,
        bound: Box<Type>,
        body: Box<Type>,
    },
}

impl Type {
    pub fn var(name: TyVarName) -> Type {
        Type::Var(name)
    }

    pub fn arrow(dom: Type, cod: Type) -> Type {
        Type::Arrow(Box::new(dom), Box::new(cod))
    }

    pub fn forall(binder: TyVarName, bound: Type, body: Type) -> Type {
        Type::Forall { binder, bound: Box::new(bound), body: Box::new(body) }
    }

    /// Number of nodes in the tree; always at least 1.
    pub fn size(&self) -> usize {
        match self {
            Type::Var(_) | Type::Top => 1,
            Type::Arrow(a, b) => 1 + a.size() + b.size(),
            Type::Forall { bound, body, .. } => 1 + bound.size() + body.size(),
        }
    }

    /// Free variables. A `Forall` removes its binder from the body's
    /// contribution but leaves the bound's contribution intact.
    pub fn free_vars(&self) -> BTreeSet<TyVarName> {
        fn walk(t: &Type, acc: &mut BTreeSet<TyVarName>) {
            match t {
                Type::Top => {}
                Type::Var(x) => {
                    acc.insert(x.clone());
                }
                Type::Arrow(a, b) => {
                    walk(a, acc);
                    walk(b, acc);
                }
                Type::Forall { binder, bound, body } => {
                    walk(bound, acc);
                    let mut inner = BTreeSet::new();
                    walk(body, &mut inner);
                    inner.remove(binder);
                    acc.extend(inner);
                }
            }
        }
        let mut acc = BTreeSet::new();
        walk(self, &mut acc);
        acc
    }

    /// Every name occurring anywhere in the type, free or as a binder.
    /// Freshness choices avoid this set so renamings can never capture.
    pub fn all_names(&self) -> BTreeSet<TyVarName> {
        fn walk(t: &Type, acc: &mut BTreeSet<TyVarName>) {
            match t {
                Type::Top => {}
                Type::Var(x) => {
                    acc.insert(x.clone());
                }
                Type::Arrow(a, b) => {
                    walk(a, acc);
                    walk(b, acc);
                }
                Type::Forall { binder, bound, body } => {
                    acc.insert(binder.clone());
                    walk(bound, acc);
                    walk(body, acc);
                }
            }
        }
        let mut acc = BTreeSet::new();
        walk(self, &mut acc);
        acc
    }

    /// True iff every free variable of the type is in `names`; under a
    /// `Forall` the binder is visible to the body but not to the bound.
    pub fn well_scoped_over(&self, names: &BTreeSet<TyVarName>) -> bool {
        match self {
            Type::Top => true,
            Type::Var(x) => names.contains(x),
            Type::Arrow(a, b) => a.well_scoped_over(names) && b.well_scoped_over(names),
            Type::Forall { binder, bound, body } => {
                if !bound.well_scoped_over(names) {
                    return false;
                }
                let mut inner = names.clone();
                inner.insert(binder.clone());
                body.well_scoped_over(&inner)
            }
        }
    }

    /// True iff every free variable of the type is bound in `env`.
    pub fn well_scoped_in(&self, env: &TypeEnv) -> bool {
        self.well_scoped_over(&env.name_set())
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_type(self))
    }
}

/// Scoping discipline for rule checking and environment well-formedness.
///
/// `Strict` enforces the well-scoping provisos on the leaf rules and requires
/// each environment bound to be scoped over the bindings before it. `Lax`
/// drops both, treating environments by name lookup only; name distinctness
/// is enforced in both modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScopeMode {
    Strict,
    Lax,
}

impl fmt::Display for ScopeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScopeMode::Strict => f.write_str("strict"),
            ScopeMode::Lax => f.write_str("lax"),
        }
    }
}

/// One environment entry `name <: bound`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub name: TyVarName,
    pub bound: Type,
}

/// An ordered sequence of bindings with pairwise-distinct names.
///
/// Distinctness is enforced by every constructor, so a `TypeEnv` value is
/// always name-unique; prefix well-scoping is a separate, mode-dependent
/// check ([`TypeEnv::well_formed`]).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TypeEnv {
    entries: Vec<Binding>,
}

impl TypeEnv {
    pub fn empty() -> Self {
        TypeEnv { entries: Vec::new() }
    }

    pub fn from_entries(entries: Vec<Binding>) -> Result<Self, SyntaxError> {
        let mut seen = BTreeSet::new();
        for b in &entries {
            if !seen.insert(b.name.clone()) {
                return Err(SyntaxError::DuplicateName { name: b.name.to_string() });
            }
        }
        Ok(TypeEnv { entries })
    }

    pub fn entries(&self) -> &[Binding] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn binds(&self, name: &TyVarName) -> bool {
        self.entries.iter().any(|b| &b.name == name)
    }

    pub fn lookup(&self, name: &TyVarName) -> Option<&Type> {
        self.entries.iter().find(|b| &b.name == name).map(|b| &b.bound)
    }

    pub fn names(&self) -> impl Iterator<Item = &TyVarName> {
        self.entries.iter().map(|b| &b.name)
    }

    pub fn name_set(&self) -> BTreeSet<TyVarName> {
        self.names().cloned().collect()
    }

    /// A copy with one more binding at the end.
    pub fn extended(&self, binding: Binding) -> Result<Self, SyntaxError> {
        if self.binds(&binding.name) {
            return Err(SyntaxError::DuplicateName { name: binding.name.to_string() });
        }
        let mut entries = self.entries.clone();
        entries.push(binding);
        Ok(TypeEnv { entries })
    }

    /// A copy in which `name`'s bound is replaced; `None` if `name` is unbound.
    pub fn with_bound_replaced(&self, name: &TyVarName, bound: Type) -> Option<Self> {
        let idx = self.entries.iter().position(|b| &b.name == name)?;
        let mut entries = self.entries.clone();
        entries[idx].bound = bound;
        Some(TypeEnv { entries })
    }

    /// A copy without the entry at `index`.
    pub fn without(&self, index: usize) -> Self {
        let mut entries = self.entries.clone();
        entries.remove(index);
        TypeEnv { entries }
    }

    /// True iff `self`'s entries appear in `wider`, in order, with equal
    /// names and alpha-equal bounds.
    pub fn is_subsequence_of(&self, wider: &TypeEnv) -> bool {
        let mut it = wider.entries.iter();
        'outer: for b in &self.entries {
            for w in it.by_ref() {
                if w.name == b.name && alpha_eq(&w.bound, &b.bound) {
                    continue 'outer;
                }
            }
            return false;
        }
        true
    }

    /// Entry-wise comparison: equal names in order, alpha-equal bounds.
    pub fn alpha_eq(&self, other: &TypeEnv) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.name == b.name && alpha_eq(&a.bound, &b.bound))
    }

    /// `Strict`: each bound well-scoped over the names before it.
    /// `Lax`: nothing beyond the always-enforced name distinctness.
    pub fn well_formed(&self, mode: ScopeMode) -> bool {
        match mode {
            ScopeMode::Lax => true,
            ScopeMode::Strict => {
                let mut prefix = BTreeSet::new();
                for b in &self.entries {
                    if !b.bound.well_scoped_over(&prefix) {
                        return false;
                    }
                    prefix.insert(b.name.clone());
                }
                true
            }
        }
    }
}

impl fmt::Display for TypeEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_env(self))
    }
}

/// Alpha-equivalence: equal up to consistent renaming of `Forall` binders.
/// Free variables compare by name.
pub fn alpha_eq(a: &Type, b: &Type) -> bool {
    fn walk(a: &Type, b: &Type, scope: &mut Vec<(TyVarName, TyVarName)>) -> bool {
        match (a, b) {
            (Type::Top, Type::Top) => true,
            (Type::Var(x), Type::Var(y)) => {
                let ix = scope.iter().rposition(|(l, _)| l == x);
                let iy = scope.iter().rposition(|(_, r)| r == y);
                match (ix, iy) {
                    (None, None) => x == y,
                    (Some(i), Some(j)) => i == j,
                    _ => false,
                }
            }
            (Type::Arrow(a1, a2), Type::Arrow(b1, b2)) => {
                walk(a1, b1, scope) && walk(a2, b2, scope)
            }
            (
                Type::Forall { binder: x, bound: xb, body: xt },
                Type::Forall { binder: y, bound: yb, body: yt },
            ) => {
                if !walk(xb, yb, scope) {
                    return false;
                }
                scope.push((x.clone(), y.clone()));
                let r = walk(xt, yt, scope);
                scope.pop();
                r
            }
            _ => false,
        }
    }
    walk(a, b, &mut Vec::new())
}

/// Alpha-equivalence of two open types under correlated binders: `t1` with
/// `x1` bound corresponds to `t2` with `x2` bound. Used to compare a
/// quantifier body against a premise stated under a renamed binder.
pub fn alpha_eq_open(x1: &TyVarName, t1: &Type, x2: &TyVarName, t2: &Type) -> bool {
    // Equivalent to alpha_eq(All x1<:Top.t1, All x2<:Top.t2).
    alpha_eq(
        &Type::forall(x1.clone(), Type::Top, t1.clone()),
        &Type::forall(x2.clone(), Type::Top, t2.clone()),
    )
}

/// Rename free occurrences of `from` to `to`. The caller must pick `to`
/// outside `t.all_names()`; a binder equal to `from` shadows as usual.
pub fn rename_free(t: &Type, from: &TyVarName, to: &TyVarName) -> Type {
    match t {
        Type::Top => Type::Top,
        Type::Var(x) => {
            if x == from {
                Type::Var(to.clone())
            } else {
                t.clone()
            }
        }
        Type::Arrow(a, b) => Type::arrow(rename_free(a, from, to), rename_free(b, from, to)),
        Type::Forall { binder, bound, body } => {
            debug_assert!(binder != to, "renaming target must be fresh");
            let bound = rename_free(bound, from, to);
            let body = if binder == from { (**body).clone() } else { rename_free(body, from, to) };
            Type::forall(binder.clone(), bound, body)
        }
    }
}

/// The first name of the form `X`, `X1`, `X2`, ... not in `avoid`.
/// Deterministic, so constructions that freshen binders are reproducible.
pub fn fresh_name(avoid: &BTreeSet<TyVarName>) -> TyVarName {
    for k in 0u64.. {
        let text = if k == 0 { "X".to_string() } else { format!("X{k}") };
        let candidate = TyVarName(text);
        if !avoid.contains(&candidate) {
            return candidate;
        }
    }
    unreachable!("the fresh-name sequence is infinite")
}

// ---------------------------------------------------------------------------
// Concrete syntax.
//
//   ty  ::= "All" name "<:" ty "." ty | arr
//   arr ::= atom "->" arr | atom
//   atom ::= "Top" | name | "(" ty ")"
//   env ::= "" | binding ("," binding)*
//   binding ::= name "<:" ty
//
// Whitespace between tokens is insignificant.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Arrow,
    Sub,
    Dot,
    Comma,
    KwTop,
    KwAll,
    Ident(String),
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, SyntaxError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            '.' => {
                toks.push((Tok::Dot, i));
                i += 1;
            }
            ',' => {
                toks.push((Tok::Comma, i));
                i += 1;
            }
            '-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    toks.push((Tok::Arrow, i));
                    i += 2;
                } else {
                    return Err(SyntaxError::Parse { pos: i, msg: "expected `->`".into() });
                }
            }
            '<' => {
                if bytes.get(i + 1) == Some(&b':') {
                    toks.push((Tok::Sub, i));
                    i += 2;
                } else {
                    return Err(SyntaxError::Parse { pos: i, msg: "expected `<:`".into() });
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                let word = &text[start..i];
                let tok = match word {
                    "Top" => Tok::KwTop,
                    "All" => Tok::KwAll,
                    _ => Tok::Ident(word.to_string()),
                };
                toks.push((tok, start));
            }
            _ => {
                return Err(SyntaxError::Parse { pos: i, msg: format!("unexpected character `{c}`") })
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, SyntaxError> {
        Ok(Parser { toks: lex(text)?, pos: 0, end: text.len() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), SyntaxError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(SyntaxError::Parse { pos: self.here(), msg: format!("expected {what}") })
        }
    }

    fn binder_name(&mut self) -> Result<TyVarName, SyntaxError> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                TyVarName::new(&s)
            }
            Some(Tok::KwTop) => Err(SyntaxError::ReservedName { name: "Top".into() }),
            Some(Tok::KwAll) => Err(SyntaxError::ReservedName { name: "All".into() }),
            _ => Err(SyntaxError::Parse { pos: self.here(), msg: "expected a binder name".into() }),
        }
    }

    fn ty(&mut self) -> Result<Type, SyntaxError> {
        if self.peek() == Some(&Tok::KwAll) {
            self.pos += 1;
            let binder = self.binder_name()?;
            self.expect(Tok::Sub, "`<:`")?;
            let bound = self.ty()?;
            self.expect(Tok::Dot, "`.`")?;
            let body = self.ty()?;
            Ok(Type::forall(binder, bound, body))
        } else {
            self.arr()
        }
    }

    fn arr(&mut self) -> Result<Type, SyntaxError> {
        let left = self.atom()?;
        if self.peek() == Some(&Tok::Arrow) {
            self.pos += 1;
            let right = self.arr()?;
            Ok(Type::arrow(left, right))
        } else {
            Ok(left)
        }
    }

    fn atom(&mut self) -> Result<Type, SyntaxError> {
        match self.peek().cloned() {
            Some(Tok::KwTop) => {
                self.pos += 1;
                Ok(Type::Top)
            }
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(Type::Var(TyVarName::new(&s)?))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.ty()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            _ => Err(SyntaxError::Parse { pos: self.here(), msg: "expected a type".into() }),
        }
    }

    fn at_end(&self) -> bool {
        self.pos == self.toks.len()
    }

    fn expect_end(&self) -> Result<(), SyntaxError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(SyntaxError::Parse { pos: self.here(), msg: "unexpected trailing input".into() })
        }
    }
}

/// Parse a type from the surface grammar. Arrow is right-associative and a
/// quantifier body spans maximally to the right.
pub fn parse_type(text: &str) -> Result<Type, SyntaxError> {
    let mut p = Parser::new(text)?;
    let t = p.ty()?;
    p.expect_end()?;
    Ok(t)
}

/// Parse a comma-separated environment; the empty string is the empty
/// environment. Repeated names are rejected.
pub fn parse_env(text: &str) -> Result<TypeEnv, SyntaxError> {
    let mut p = Parser::new(text)?;
    if p.at_end() {
        return Ok(TypeEnv::empty());
    }
    let mut entries = Vec::new();
    loop {
        let name = p.binder_name()?;
        p.expect(Tok::Sub, "`<:`")?;
        let bound = p.ty()?;
        entries.push(Binding { name, bound });
        if p.peek() == Some(&Tok::Comma) {
            p.pos += 1;
        } else {
            break;
        }
    }
    p.expect_end()?;
    TypeEnv::from_entries(entries)
}

#[derive(Clone, Copy, PartialEq)]
enum RenderCtx {
    Ty,
    Arr,
    Atom,
}

fn render_into(t: &Type, ctx: RenderCtx, out: &mut String) {
    match t {
        Type::Top => out.push_str("Top"),
        Type::Var(x) => out.push_str(x.as_str()),
        Type::Arrow(a, b) => {
            let parens = ctx == RenderCtx::Atom;
            if parens {
                out.push('(');
            }
            render_into(a, RenderCtx::Atom, out);
            out.push_str(" -> ");
            render_into(b, RenderCtx::Arr, out);
            if parens {
                out.push(')');
            }
        }
        Type::Forall { binder, bound, body } => {
            let parens = ctx != RenderCtx::Ty;
            if parens {
                out.push('(');
            }
            out.push_str("All ");
            out.push_str(binder.as_str());
            out.push_str(" <: ");
            render_into(bound, RenderCtx::Ty, out);
            out.push_str(" . ");
            render_into(body, RenderCtx::Ty, out);
            if parens {
                out.push(')');
            }
        }
    }
}

/// Canonical minimally-parenthesized text; `parse_type` inverts it exactly.
pub fn render_type(t: &Type) -> String {
    let mut out = String::new();
    render_into(t, RenderCtx::Ty, &mut out);
    out
}

/// Canonical environment text; the empty environment renders as "".
pub fn render_env(env: &TypeEnv) -> String {
    let mut out = String::new();
    for (i, b) in env.entries().iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(b.name.as_str());
        out.push_str(" <: ");
        render_into(&b.bound, RenderCtx::Ty, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tv(s: &str) -> TyVarName {
        TyVarName::new(s).unwrap()
    }

    fn ty(s: &str) -> Type {
        parse_type(s).unwrap()
    }

    #[test]
    fn parse_basics() {
        assert_eq!(ty("Top"), Type::Top);
        assert_eq!(
            ty("A -> B -> Top"),
            Type::arrow(Type::Var(tv("A")), Type::arrow(Type::Var(tv("B")), Type::Top))
        );
        assert_eq!(
            ty("All X <: Top . X -> X"),
            Type::forall(tv("X"), Type::Top, Type::arrow(Type::Var(tv("X")), Type::Var(tv("X"))))
        );
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse_type("Top ->") {
            Err(SyntaxError::Parse { pos, .. }) => assert_eq!(pos, 6),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(parse_type("(Top"), Err(SyntaxError::Parse { .. })));
        assert!(matches!(parse_type("Top Top"), Err(SyntaxError::Parse { .. })));
        assert!(matches!(parse_type("1x"), Err(SyntaxError::Parse { .. })));
    }

    #[test]
    fn reserved_binder_is_its_own_error() {
        assert_eq!(
            parse_type("All Top <: Top . Top"),
            Err(SyntaxError::ReservedName { name: "Top".into() })
        );
        assert_eq!(
            parse_type("All All <: Top . Top"),
            Err(SyntaxError::ReservedName { name: "All".into() })
        );
    }

    #[test]
    fn render_minimal_parens() {
        assert_eq!(render_type(&Type::arrow(Type::arrow(Type::Top, Type::Top), Type::Top)), "(Top -> Top) -> Top");
        assert_eq!(render_type(&Type::Top), "Top");
        assert_eq!(render_type(&Type::forall(tv("X"), Type::Top, Type::Var(tv("X")))), "All X <: Top . X");
        // A quantifier in arrow-codomain position needs parentheses.
        let t = Type::arrow(Type::Top, Type::forall(tv("X"), Type::Top, Type::Top));
        assert_eq!(render_type(&t), "Top -> (All X <: Top . Top)");
        assert_eq!(parse_type(&render_type(&t)).unwrap(), t);
    }

    #[test]
    fn render_round_trips_nested_quantifier_bounds() {
        let t = Type::forall(
            tv("X"),
            Type::forall(tv("Y"), Type::Top, Type::Var(tv("Y"))),
            Type::Var(tv("X")),
        );
        let text = render_type(&t);
        assert_eq!(text, "All X <: All Y <: Top . Y . X");
        assert_eq!(parse_type(&text).unwrap(), t);
    }

    #[test]
    fn parse_env_examples() {
        assert_eq!(parse_env("").unwrap(), TypeEnv::empty());
        let env = parse_env("A <: Top, B <: A").unwrap();
        assert_eq!(env.len(), 2);
        assert_eq!(env.lookup(&tv("B")), Some(&Type::Var(tv("A"))));
        assert_eq!(
            parse_env("A <: Top, A <: Top"),
            Err(SyntaxError::DuplicateName { name: "A".into() })
        );
    }

    #[test]
    fn free_vars_examples() {
        assert!(Type::Top.free_vars().is_empty());
        let t = Type::forall(tv("X"), Type::Var(tv("Y")), Type::Var(tv("X")));
        assert_eq!(t.free_vars(), BTreeSet::from([tv("Y")]));
        let t = Type::arrow(
            Type::Var(tv("A")),
            Type::forall(tv("B"), Type::Var(tv("A")), Type::Var(tv("C"))),
        );
        assert_eq!(t.free_vars(), BTreeSet::from([tv("A"), tv("C")]));
    }

    #[test]
    fn well_scoped_examples() {
        let empty = TypeEnv::empty();
        assert!(Type::Top.well_scoped_in(&empty));
        assert!(!Type::Var(tv("X")).well_scoped_in(&empty));
        let t = Type::forall(tv("X"), Type::Top, Type::Var(tv("X")));
        assert!(t.well_scoped_in(&empty));
        assert!(t.free_vars().is_empty());
    }

    #[test]
    fn env_well_formed_examples() {
        let good = parse_env("A <: Top, B <: A").unwrap();
        assert!(good.well_formed(ScopeMode::Strict));
        let bad = parse_env("B <: A, A <: Top").unwrap();
        assert!(!bad.well_formed(ScopeMode::Strict));
        assert!(bad.well_formed(ScopeMode::Lax));
    }

    #[test]
    fn alpha_eq_examples() {
        let a = Type::forall(tv("X"), Type::Top, Type::Var(tv("X")));
        let b = Type::forall(tv("Y"), Type::Top, Type::Var(tv("Y")));
        assert!(alpha_eq(&a, &b));
        assert!(!alpha_eq(&Type::Var(tv("X")), &Type::Var(tv("Y"))));
        let a = Type::forall(tv("X"), Type::Var(tv("Z")), Type::Var(tv("X")));
        let b = Type::forall(tv("Y"), Type::Var(tv("Z")), Type::Var(tv("Y")));
        assert!(alpha_eq(&a, &b));
        // Bound positions are outer scope: renaming must not identify them.
        let a = Type::forall(tv("X"), Type::Var(tv("X")), Type::Top);
        let b = Type::forall(tv("Y"), Type::Var(tv("X")), Type::Top);
        assert!(alpha_eq(&a, &b));
    }

    #[test]
    fn alpha_eq_respects_shadowing() {
        // All X<:Top. All X<:Top. X  vs  All X<:Top. All Y<:Top. X
        let a = Type::forall(
            tv("X"),
            Type::Top,
            Type::forall(tv("X"), Type::Top, Type::Var(tv("X"))),
        );
        let b = Type::forall(
            tv("X"),
            Type::Top,
            Type::forall(tv("Y"), Type::Top, Type::Var(tv("X"))),
        );
        assert!(!alpha_eq(&a, &b));
    }

    #[test]
    fn fresh_name_examples() {
        assert_eq!(fresh_name(&BTreeSet::new()), tv("X"));
        assert_eq!(fresh_name(&BTreeSet::from([tv("X")])), tv("X1"));
        assert_eq!(fresh_name(&BTreeSet::from([tv("X"), tv("X1"), tv("X2")])), tv("X3"));
    }

    #[test]
    fn rename_free_shadows() {
        // Renaming X under a binder named X leaves the body alone.
        let t = Type::forall(tv("X"), Type::Var(tv("X")), Type::Var(tv("X")));
        let r = rename_free(&t, &tv("X"), &tv("Z"));
        assert_eq!(r, Type::forall(tv("X"), Type::Var(tv("Z")), Type::Var(tv("X"))));
    }
}
