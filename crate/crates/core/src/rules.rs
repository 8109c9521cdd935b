//! Judgments, rule systems, derivation trees, node-level validation, and a
//! bit-exact s-expression serialization for derivations.
//!
//! Two rule systems are represented, plus one extension:
//!
//! * `Original` — the syntax-directed presentation: `SA-Top`,
//!   `SA-Refl-TVar`, `SA-Trans-TVar` (a variable on the left steps to its
//!   declared bound), `SA-Arrow`, `SA-All`.
//! * `Variant` — replaces `SA-Trans-TVar` with `SA-Hyp` (environment
//!   membership directly yields a judgment) and `SA-Tr-TVar` (transitivity
//!   built into the variable rule).
//! * `VariantPlus` — `Variant` plus `SA-Extra`, which swaps a variable's
//!   bound for any type the variable is derivably below.
//!
//! Environment membership and the subtype judgment are deliberately kept
//! distinct notions: membership is a side condition consulted by rules, and
//! only `SA-Hyp` turns a membership fact directly into a judgment.
//!
//! A [`Derivation`] is plain data; [`validate_derivation`] checks every node
//! against a chosen system and scoping mode and reports all offending nodes
//! by path rather than failing fast.

use std::fmt;

use thiserror::Error;

use crate::syntax::{
    alpha_eq, alpha_eq_open, Binding, ScopeMode, SyntaxError, TyVarName, Type, TypeEnv,
};

/// Tags for the rules of all represented systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleTag {
    SaTop,
    SaReflTvar,
    SaTransTvar,
    SaArrow,
    SaAll,
    SaHyp,
    SaTrTvar,
    SaExtra,
}

impl RuleTag {
    /// All tags in canonical order.
    pub const ALL: [RuleTag; 8] = [
        RuleTag::SaTop,
        RuleTag::SaReflTvar,
        RuleTag::SaTransTvar,
        RuleTag::SaArrow,
        RuleTag::SaAll,
        RuleTag::SaHyp,
        RuleTag::SaTrTvar,
        RuleTag::SaExtra,
    ];

    /// Number of premises the rule takes.
    pub fn arity(self) -> usize {
        match self {
            RuleTag::SaTop | RuleTag::SaReflTvar | RuleTag::SaHyp => 0,
            RuleTag::SaTransTvar => 1,
            RuleTag::SaArrow | RuleTag::SaAll | RuleTag::SaTrTvar | RuleTag::SaExtra => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RuleTag::SaTop => "SA-Top",
            RuleTag::SaReflTvar => "SA-Refl-TVar",
            RuleTag::SaTransTvar => "SA-Trans-TVar",
            RuleTag::SaArrow => "SA-Arrow",
            RuleTag::SaAll => "SA-All",
            RuleTag::SaHyp => "SA-Hyp",
            RuleTag::SaTrTvar => "SA-Tr-TVar",
            RuleTag::SaExtra => "SA-Extra",
        }
    }

    pub fn from_name(name: &str) -> Option<RuleTag> {
        RuleTag::ALL.iter().copied().find(|t| t.name() == name)
    }
}

impl fmt::Display for RuleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which rule system a derivation is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemId {
    Original,
    Variant,
    VariantPlus,
}

impl SystemId {
    /// The system's rule tags, in canonical order.
    pub fn tags(self) -> &'static [RuleTag] {
        match self {
            SystemId::Original => &[
                RuleTag::SaTop,
                RuleTag::SaReflTvar,
                RuleTag::SaTransTvar,
                RuleTag::SaArrow,
                RuleTag::SaAll,
            ],
            SystemId::Variant => &[
                RuleTag::SaTop,
                RuleTag::SaReflTvar,
                RuleTag::SaArrow,
                RuleTag::SaAll,
                RuleTag::SaHyp,
                RuleTag::SaTrTvar,
            ],
            SystemId::VariantPlus => &[
                RuleTag::SaTop,
                RuleTag::SaReflTvar,
                RuleTag::SaArrow,
                RuleTag::SaAll,
                RuleTag::SaHyp,
                RuleTag::SaTrTvar,
                RuleTag::SaExtra,
            ],
        }
    }

    pub fn admits(self, tag: RuleTag) -> bool {
        self.tags().contains(&tag)
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemId::Original => f.write_str("original"),
            SystemId::Variant => f.write_str("variant"),
            SystemId::VariantPlus => f.write_str("variant-plus"),
        }
    }
}

/// A subtype judgment `env |- left <: right`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgment {
    pub env: TypeEnv,
    pub left: Type,
    pub right: Type,
}

impl Judgment {
    pub fn new(env: TypeEnv, left: Type, right: Type) -> Judgment {
        Judgment { env, left, right }
    }

    /// Same environment entry-for-entry and alpha-equal endpoint types.
    pub fn alpha_matches(&self, other: &Judgment) -> bool {
        self.env.alpha_eq(&other.env)
            && alpha_eq(&self.left, &other.left)
            && alpha_eq(&self.right, &other.right)
    }
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} |- {} <: {}", self.env, self.left, self.right)
    }
}

/// A rule-labeled tree of judgments. Plain data: any tree is representable,
/// and [`validate_derivation`] decides whether it is a real derivation for a
/// given system and scoping mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub rule: RuleTag,
    pub conclusion: Judgment,
    pub premises: Vec<Derivation>,
}

impl Derivation {
    pub fn leaf(rule: RuleTag, conclusion: Judgment) -> Derivation {
        Derivation { rule, conclusion, premises: Vec::new() }
    }

    pub fn node(rule: RuleTag, conclusion: Judgment, premises: Vec<Derivation>) -> Derivation {
        Derivation { rule, conclusion, premises }
    }

    pub fn height(&self) -> usize {
        1 + self.premises.iter().map(Derivation::height).max().unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        1 + self.premises.iter().map(Derivation::node_count).sum::<usize>()
    }

    pub fn contains_tag(&self, tag: RuleTag) -> bool {
        self.rule == tag || self.premises.iter().any(|p| p.contains_tag(tag))
    }

    /// Count nodes carrying `tag`.
    pub fn count_tag(&self, tag: RuleTag) -> usize {
        (self.rule == tag) as usize
            + self.premises.iter().map(|p| p.count_tag(tag)).sum::<usize>()
    }
}

/// One validation failure: the offending node's path (premise indices from
/// the root) and a human-readable reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub path: Vec<usize>,
    pub reason: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, p) in self.path.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "] {}", self.reason)
    }
}

/// Result of validating a derivation: ok iff no node failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub failures: Vec<Failure>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            f.write_str("valid")
        } else {
            for (i, fail) in self.failures.iter().enumerate() {
                if i > 0 {
                    writeln!(f)?;
                }
                write!(f, "{fail}")?;
            }
            Ok(())
        }
    }
}

/// Check every node of `d` as an instance of its rule under `system` and
/// `mode`. All failing nodes are reported, each once.
pub fn validate_derivation(d: &Derivation, system: SystemId, mode: ScopeMode) -> ValidationReport {
    let mut failures = Vec::new();
    let mut path = Vec::new();
    walk(d, system, mode, &mut path, &mut failures);
    ValidationReport { failures }
}

fn walk(
    d: &Derivation,
    system: SystemId,
    mode: ScopeMode,
    path: &mut Vec<usize>,
    failures: &mut Vec<Failure>,
) {
    if let Some(reason) = check_node(d, system, mode) {
        failures.push(Failure { path: path.clone(), reason });
    }
    for (i, p) in d.premises.iter().enumerate() {
        path.push(i);
        walk(p, system, mode, path, failures);
        path.pop();
    }
}

/// Environments match entry-wise (names exact, bounds alpha-equal).
fn envs_match(a: &TypeEnv, b: &TypeEnv) -> bool {
    a.alpha_eq(b)
}

fn check_node(d: &Derivation, system: SystemId, mode: ScopeMode) -> Option<String> {
    let tag = d.rule;
    if !system.admits(tag) {
        return Some(format!("rule {tag} not in system {system}"));
    }
    if d.premises.len() != tag.arity() {
        return Some(format!(
            "rule {tag} takes {} premise(s), found {}",
            tag.arity(),
            d.premises.len()
        ));
    }
    let env = &d.conclusion.env;
    let left = &d.conclusion.left;
    let right = &d.conclusion.right;
    let strict = mode == ScopeMode::Strict;
    match tag {
        RuleTag::SaTop => {
            if *right != Type::Top {
                return Some("right-hand side is not Top".into());
            }
            if strict && !left.well_scoped_in(env) {
                return Some("left not well-scoped".into());
            }
        }
        RuleTag::SaReflTvar => {
            let (Type::Var(x), Type::Var(y)) = (left, right) else {
                return Some("conclusion is not of the form X <: X".into());
            };
            if x != y {
                return Some("conclusion is not of the form X <: X".into());
            }
            if strict && !env.binds(x) {
                return Some(format!("variable {x} not bound in environment"));
            }
        }
        RuleTag::SaTransTvar => {
            let Type::Var(x) = left else {
                return Some("left-hand side is not a variable".into());
            };
            let Some(bound) = env.lookup(x) else {
                return Some(format!("variable {x} not bound in environment"));
            };
            let p = &d.premises[0];
            if !envs_match(&p.conclusion.env, env) {
                return Some("premise environment differs from conclusion".into());
            }
            if !alpha_eq(&p.conclusion.left, bound) {
                return Some(format!("premise left is not the declared bound of {x}"));
            }
            if !alpha_eq(&p.conclusion.right, right) {
                return Some("premise right differs from conclusion right".into());
            }
        }
        RuleTag::SaArrow => {
            let (Type::Arrow(s1, s2), Type::Arrow(t1, t2)) = (left, right) else {
                return Some("conclusion sides are not both arrow types".into());
            };
            let (p1, p2) = (&d.premises[0], &d.premises[1]);
            if !envs_match(&p1.conclusion.env, env) || !envs_match(&p2.conclusion.env, env) {
                return Some("premise environment differs from conclusion".into());
            }
            // Contravariant domain premise comes first.
            if !alpha_eq(&p1.conclusion.left, t1) || !alpha_eq(&p1.conclusion.right, s1) {
                return Some("first premise does not relate the domains contravariantly".into());
            }
            if !alpha_eq(&p2.conclusion.left, s2) || !alpha_eq(&p2.conclusion.right, t2) {
                return Some("second premise does not relate the codomains".into());
            }
        }
        RuleTag::SaAll => {
            let (
                Type::Forall { binder: x, bound: s1, body: s2 },
                Type::Forall { binder: y, bound: t1, body: t2 },
            ) = (left, right)
            else {
                return Some("conclusion sides are not both universal types".into());
            };
            let (p1, p2) = (&d.premises[0], &d.premises[1]);
            if !envs_match(&p1.conclusion.env, env) {
                return Some("first premise environment differs from conclusion".into());
            }
            if !alpha_eq(&p1.conclusion.left, t1) || !alpha_eq(&p1.conclusion.right, s1) {
                return Some("first premise does not relate the bounds contravariantly".into());
            }
            // Second premise runs under env extended with one fresh binder
            // whose bound is the right-hand bound.
            let p2env = &p2.conclusion.env;
            if p2env.len() != env.len() + 1 {
                return Some("second premise environment is not a one-entry extension".into());
            }
            let prefix_ok = env
                .entries()
                .iter()
                .zip(p2env.entries())
                .all(|(a, b)| a.name == b.name && alpha_eq(&a.bound, &b.bound));
            if !prefix_ok {
                return Some("second premise environment does not extend the conclusion's".into());
            }
            let ext = p2env.entries().last().expect("nonempty by the length check");
            if !alpha_eq(&ext.bound, t1) {
                return Some("extension bound is not the right-hand bound".into());
            }
            let z = &ext.name;
            if !alpha_eq_open(x, s2, z, &p2.conclusion.left) {
                return Some("second premise left does not match the left body".into());
            }
            if !alpha_eq_open(y, t2, z, &p2.conclusion.right) {
                return Some("second premise right does not match the right body".into());
            }
        }
        RuleTag::SaHyp => {
            let Type::Var(x) = left else {
                return Some("left-hand side is not a variable".into());
            };
            match env.lookup(x) {
                Some(bound) if alpha_eq(bound, right) => {}
                Some(_) => return Some(format!("{x} <: right is not an environment hypothesis")),
                None => return Some(format!("variable {x} not bound in environment")),
            }
        }
        RuleTag::SaTrTvar => {
            let Type::Var(_) = left else {
                return Some("left-hand side is not a variable".into());
            };
            let (p1, p2) = (&d.premises[0], &d.premises[1]);
            if !envs_match(&p1.conclusion.env, env) || !envs_match(&p2.conclusion.env, env) {
                return Some("premise environment differs from conclusion".into());
            }
            if p1.conclusion.left != *left {
                return Some("first premise left differs from conclusion left".into());
            }
            if !alpha_eq(&p1.conclusion.right, &p2.conclusion.left) {
                return Some("premises do not share the intermediate type".into());
            }
            if !alpha_eq(&p2.conclusion.right, right) {
                return Some("second premise right differs from conclusion right".into());
            }
        }
        RuleTag::SaExtra => {
            let (p1, p2) = (&d.premises[0], &d.premises[1]);
            let Type::Var(x) = &p1.conclusion.left else {
                return Some("first premise left is not a variable".into());
            };
            if !env.binds(x) {
                return Some(format!("pivot variable {x} not bound in environment"));
            }
            if !envs_match(&p1.conclusion.env, env) {
                return Some("first premise environment differs from conclusion".into());
            }
            let v = &p1.conclusion.right;
            let Some(swapped) = env.with_bound_replaced(x, v.clone()) else {
                return Some(format!("pivot variable {x} not bound in environment"));
            };
            if !envs_match(&p2.conclusion.env, &swapped) {
                return Some("second premise environment is not the conclusion's with the pivot bound swapped".into());
            }
            if !alpha_eq(&p2.conclusion.left, left) || !alpha_eq(&p2.conclusion.right, right) {
                return Some("second premise endpoints differ from conclusion".into());
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Serialization.
//
//   deriv ::= "(" tag judgment deriv* ")"
//   judgment ::= "(judgment" envsexp tysexp tysexp ")"
//   envsexp ::= "(" ("(" name tysexp ")")* ")"
//   tysexp ::= "Top" | "(var" name ")" | "(arrow" tysexp tysexp ")"
//            | "(all" name tysexp tysexp ")"
//
// The writer emits single spaces between tokens and no trailing whitespace,
// so equal derivations serialize identically, byte for byte.
// ---------------------------------------------------------------------------

/// Errors from [`parse_derivation`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DerivationParseError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("rule {tag} takes {expected} premise(s), found {found}")]
    Arity { tag: RuleTag, expected: usize, found: usize },
}

fn ty_sexp(t: &Type, out: &mut String) {
    match t {
        Type::Top => out.push_str("Top"),
        Type::Var(x) => {
            out.push_str("(var ");
            out.push_str(x.as_str());
            out.push(')');
        }
        Type::Arrow(a, b) => {
            out.push_str("(arrow ");
            ty_sexp(a, out);
            out.push(' ');
            ty_sexp(b, out);
            out.push(')');
        }
        Type::Forall { binder, bound, body } => {
            out.push_str("(all ");
            out.push_str(binder.as_str());
            out.push(' ');
            ty_sexp(bound, out);
            out.push(' ');
            ty_sexp(body, out);
            out.push(')');
        }
    }
}

fn env_sexp(env: &TypeEnv, out: &mut String) {
    out.push('(');
    for (i, b) in env.entries().iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push('(');
        out.push_str(b.name.as_str());
        out.push(' ');
        ty_sexp(&b.bound, out);
        out.push(')');
    }
    out.push(')');
}

fn deriv_sexp(d: &Derivation, out: &mut String) {
    out.push('(');
    out.push_str(d.rule.name());
    out.push_str(" (judgment ");
    env_sexp(&d.conclusion.env, out);
    out.push(' ');
    ty_sexp(&d.conclusion.left, out);
    out.push(' ');
    ty_sexp(&d.conclusion.right, out);
    out.push(')');
    for p in &d.premises {
        out.push(' ');
        deriv_sexp(p, out);
    }
    out.push(')');
}

/// Canonical s-expression text for a derivation.
pub fn serialize_derivation(d: &Derivation) -> String {
    let mut out = String::new();
    deriv_sexp(d, &mut out);
    out
}

#[derive(Debug)]
enum Sexp {
    Atom(String, usize),
    List(Vec<Sexp>, usize),
}

impl Sexp {
    fn pos(&self) -> usize {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }
}

fn read_sexp(text: &str) -> Result<Sexp, DerivationParseError> {
    struct Reader<'a> {
        bytes: &'a [u8],
        i: usize,
    }
    impl Reader<'_> {
        fn skip_ws(&mut self) {
            while self.i < self.bytes.len() && (self.bytes[self.i] as char).is_ascii_whitespace() {
                self.i += 1;
            }
        }
        fn read(&mut self) -> Result<Sexp, DerivationParseError> {
            self.skip_ws();
            let start = self.i;
            match self.bytes.get(self.i) {
                Some(b'(') => {
                    self.i += 1;
                    let mut items = Vec::new();
                    loop {
                        self.skip_ws();
                        match self.bytes.get(self.i) {
                            Some(b')') => {
                                self.i += 1;
                                return Ok(Sexp::List(items, start));
                            }
                            Some(_) => items.push(self.read()?),
                            None => {
                                return Err(DerivationParseError::Parse {
                                    pos: self.i,
                                    msg: "unclosed list".into(),
                                })
                            }
                        }
                    }
                }
                Some(b')') => Err(DerivationParseError::Parse {
                    pos: self.i,
                    msg: "unexpected `)`".into(),
                }),
                Some(_) => {
                    while self.i < self.bytes.len() {
                        let c = self.bytes[self.i] as char;
                        if c == '(' || c == ')' || c.is_ascii_whitespace() {
                            break;
                        }
                        self.i += 1;
                    }
                    let atom = std::str::from_utf8(&self.bytes[start..self.i])
                        .expect("input is valid utf-8")
                        .to_string();
                    Ok(Sexp::Atom(atom, start))
                }
                None => Err(DerivationParseError::Parse {
                    pos: self.i,
                    msg: "unexpected end of input".into(),
                }),
            }
        }
    }
    let mut r = Reader { bytes: text.as_bytes(), i: 0 };
    let sexp = r.read()?;
    r.skip_ws();
    if r.i != r.bytes.len() {
        return Err(DerivationParseError::Parse {
            pos: r.i,
            msg: "unexpected trailing input".into(),
        });
    }
    Ok(sexp)
}

fn perr(pos: usize, msg: impl Into<String>) -> DerivationParseError {
    DerivationParseError::Parse { pos, msg: msg.into() }
}

fn name_of(sexp: &Sexp) -> Result<TyVarName, DerivationParseError> {
    match sexp {
        Sexp::Atom(s, pos) => {
            TyVarName::new(s).map_err(|e| perr(*pos, format!("bad name: {e}")))
        }
        Sexp::List(_, pos) => Err(perr(*pos, "expected a name")),
    }
}

fn ty_of(sexp: &Sexp) -> Result<Type, DerivationParseError> {
    match sexp {
        Sexp::Atom(s, pos) => {
            if s == "Top" {
                Ok(Type::Top)
            } else {
                Err(perr(*pos, format!("unknown type atom `{s}`")))
            }
        }
        Sexp::List(items, pos) => {
            let head = match items.first() {
                Some(Sexp::Atom(s, _)) => s.as_str(),
                _ => return Err(perr(*pos, "expected a type form")),
            };
            match (head, items.len()) {
                ("var", 2) => Ok(Type::Var(name_of(&items[1])?)),
                ("arrow", 3) => Ok(Type::arrow(ty_of(&items[1])?, ty_of(&items[2])?)),
                ("all", 4) => Ok(Type::forall(
                    name_of(&items[1])?,
                    ty_of(&items[2])?,
                    ty_of(&items[3])?,
                )),
                _ => Err(perr(*pos, format!("malformed type form `{head}`"))),
            }
        }
    }
}

fn env_of(sexp: &Sexp) -> Result<TypeEnv, DerivationParseError> {
    let Sexp::List(items, pos) = sexp else {
        return Err(perr(sexp.pos(), "expected an environment list"));
    };
    let mut entries = Vec::new();
    for item in items {
        let Sexp::List(pair, ppos) = item else {
            return Err(perr(item.pos(), "expected an environment entry"));
        };
        if pair.len() != 2 {
            return Err(perr(*ppos, "environment entry takes a name and a bound"));
        }
        entries.push(Binding { name: name_of(&pair[0])?, bound: ty_of(&pair[1])? });
    }
    TypeEnv::from_entries(entries).map_err(|e| match e {
        SyntaxError::DuplicateName { name } => {
            perr(*pos, format!("duplicate environment name `{name}`"))
        }
        other => perr(*pos, other.to_string()),
    })
}

fn judgment_of(sexp: &Sexp) -> Result<Judgment, DerivationParseError> {
    let Sexp::List(items, pos) = sexp else {
        return Err(perr(sexp.pos(), "expected a judgment"));
    };
    match items.first() {
        Some(Sexp::Atom(s, _)) if s == "judgment" => {}
        _ => return Err(perr(*pos, "expected `judgment`")),
    }
    if items.len() != 4 {
        return Err(perr(*pos, "judgment takes an environment and two types"));
    }
    Ok(Judgment::new(env_of(&items[1])?, ty_of(&items[2])?, ty_of(&items[3])?))
}

fn deriv_of(sexp: &Sexp) -> Result<Derivation, DerivationParseError> {
    let Sexp::List(items, pos) = sexp else {
        return Err(perr(sexp.pos(), "expected a derivation"));
    };
    let tag = match items.first() {
        Some(Sexp::Atom(s, apos)) => RuleTag::from_name(s)
            .ok_or_else(|| perr(*apos, format!("unknown rule tag `{s}`")))?,
        _ => return Err(perr(*pos, "expected a rule tag")),
    };
    if items.len() < 2 {
        return Err(perr(*pos, "missing judgment"));
    }
    let conclusion = judgment_of(&items[1])?;
    let premises: Vec<Derivation> =
        items[2..].iter().map(deriv_of).collect::<Result<_, _>>()?;
    if premises.len() != tag.arity() {
        return Err(DerivationParseError::Arity {
            tag,
            expected: tag.arity(),
            found: premises.len(),
        });
    }
    Ok(Derivation::node(tag, conclusion, premises))
}

/// Parse the s-expression format; tolerant of extra whitespace, and the
/// exact inverse of [`serialize_derivation`] on its image.
pub fn parse_derivation(text: &str) -> Result<Derivation, DerivationParseError> {
    deriv_of(&read_sexp(text)?)
}
