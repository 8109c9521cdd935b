//! The metatheory as total, deterministic derivation-to-derivation
//! constructions.
//!
//! Each transformer consumes validity-checked derivations and produces a
//! derivation that validates for its advertised system and mode, concluding
//! the contracted judgment (exact environment, alpha-equal endpoint types).
//!
//! The original-system constructions mirror the classic simultaneous
//! induction: transitivity and narrowing recurse into one another, and a
//! runtime audit checks that every recursive call strictly decreases the
//! lexicographic measure (cut-type size, then transitivity below narrowing,
//! then input-derivation height).
//!
//! The variant-system constructions exercise two different claims. With
//! transitivity built into the variable rule, a variable-headed left input
//! is discharged by a single `SA-Tr-TVar` node without looking inside it,
//! so the construction recurses only on the cut type. Variant narrowing is
//! routed through [`extra_rule_admissible`]: the bound swap is first stated
//! as one `SA-Extra` instance and then discharged by the admissibility
//! construction, which splices a weakened bound-change derivation at every
//! `SA-Hyp` node on the pivot. Narrowing therefore never invokes variant
//! transitivity, and the audit records that too.
//!
//! Weakening is explicit here: first-order environments cannot absorb it,
//! and both narrowing constructions need it at their splice points.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::rules::{validate_derivation, Derivation, Judgment, RuleTag, SystemId};
use crate::syntax::{
    alpha_eq, fresh_name, rename_free, Binding, ScopeMode, TyVarName, Type, TypeEnv,
};

/// Errors shared by all transformers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("input derivation is not valid for {system}: {first}")]
    InvalidInput { system: SystemId, first: String },
    #[error("judgment mismatch: {0}")]
    JudgmentMismatch(String),
    #[error("not well-scoped: {0}")]
    NotWellScoped(String),
    #[error("name clash while freshening binders: {0}")]
    NameClash(String),
    #[error("scoping proviso violated at node {path:?}: {reason}")]
    ScopeViolation { path: Vec<usize>, reason: String },
}

/// Counters collected while a transformer runs. Every `*_audited` entry
/// point returns one; the claims under test are that the violation counters
/// stay at zero.
#[derive(Debug, Clone, Default)]
pub struct TransformAudit {
    /// Entries into the original-system transitivity construction.
    pub transitivity_steps: usize,
    /// Entries into the original-system narrowing construction.
    pub narrowing_steps: usize,
    /// Recursive calls whose measure failed to decrease strictly below the
    /// caller's (cut size, construction flag, input height).
    pub measure_violations: Vec<String>,
    /// Variable-headed left inputs seen by variant transitivity.
    pub variant_var_head_cases: usize,
    /// Recursive transitivity calls made while handling a variable-headed
    /// case; the variant system's design keeps this at zero.
    pub variant_var_head_descents: usize,
    /// Variant-transitivity calls made anywhere inside variant narrowing;
    /// the independence claim keeps this at zero.
    pub transitivity_calls_inside_narrowing: usize,
    /// `SA-Extra` nodes found in outputs of the admissibility construction.
    pub extra_tags_in_admissibility_outputs: usize,
}

/// An environment presented as prefix, pivot binding, suffix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvSplit {
    pub prefix: TypeEnv,
    pub pivot: Binding,
    pub suffix: TypeEnv,
}

impl EnvSplit {
    /// Build a split, rejecting name collisions between the three parts.
    pub fn new(prefix: TypeEnv, pivot: Binding, suffix: TypeEnv) -> Result<EnvSplit, TransformError> {
        let split = EnvSplit { prefix, pivot, suffix };
        split.concat().map(|_| split)
    }

    /// The whole environment `prefix, pivot, suffix`.
    pub fn concat(&self) -> Result<TypeEnv, TransformError> {
        let mut entries = self.prefix.entries().to_vec();
        entries.push(self.pivot.clone());
        entries.extend(self.suffix.entries().iter().cloned());
        TypeEnv::from_entries(entries)
            .map_err(|e| TransformError::JudgmentMismatch(e.to_string()))
    }

    /// Split an environment around the entry named `name`.
    pub fn around(env: &TypeEnv, name: &TyVarName) -> Option<EnvSplit> {
        let idx = env.entries().iter().position(|b| &b.name == name)?;
        let entries = env.entries();
        Some(EnvSplit {
            prefix: TypeEnv::from_entries(entries[..idx].to_vec()).expect("prefix of a valid env"),
            pivot: entries[idx].clone(),
            suffix: TypeEnv::from_entries(entries[idx + 1..].to_vec())
                .expect("suffix of a valid env"),
        })
    }
}

impl fmt::Display for EnvSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}; {} <: {}; {}", self.prefix, self.pivot.name, self.pivot.bound, self.suffix)
    }
}

// ---------------------------------------------------------------------------
// Shared machinery.
// ---------------------------------------------------------------------------

const FLAG_TRANS: u8 = 0;
const FLAG_NARROW: u8 = 1;

#[derive(Clone, Copy, PartialEq)]
enum Case {
    VarHead,
    Structural,
}

struct Ctx {
    mode: ScopeMode,
    audit: TransformAudit,
    measure_stack: Vec<(usize, u8, usize)>,
    case_stack: Vec<Case>,
    in_narrowing_variant: bool,
}

impl Ctx {
    fn new(mode: ScopeMode) -> Ctx {
        Ctx {
            mode,
            audit: TransformAudit::default(),
            measure_stack: Vec::new(),
            case_stack: Vec::new(),
            in_narrowing_variant: false,
        }
    }

    fn enter_measure(&mut self, m: (usize, u8, usize), what: &str) {
        if let Some(parent) = self.measure_stack.last() {
            if m >= *parent {
                self.audit.measure_violations.push(format!(
                    "{what}: measure {m:?} does not decrease below {parent:?}"
                ));
            }
        }
        self.measure_stack.push(m);
    }

    fn exit_measure(&mut self) {
        self.measure_stack.pop();
    }
}

fn ensure_valid(d: &Derivation, system: SystemId, mode: ScopeMode) -> Result<(), TransformError> {
    let report = validate_derivation(d, system, mode);
    match report.failures.first() {
        None => Ok(()),
        Some(f) => Err(TransformError::InvalidInput { system, first: f.to_string() }),
    }
}

fn debug_check_output(d: &Derivation, system: SystemId, mode: ScopeMode, what: &str) {
    if cfg!(debug_assertions) {
        let report = validate_derivation(d, system, mode);
        debug_assert!(report.ok(), "{what} produced an invalid derivation: {report}");
    }
}

/// Every name visible anywhere in a derivation: environment entry names and
/// all names of every bound and endpoint type, at every node.
fn subtree_names(d: &Derivation, acc: &mut BTreeSet<TyVarName>) {
    for b in d.conclusion.env.entries() {
        acc.insert(b.name.clone());
        acc.extend(b.bound.all_names());
    }
    acc.extend(d.conclusion.left.all_names());
    acc.extend(d.conclusion.right.all_names());
    for p in &d.premises {
        subtree_names(p, acc);
    }
}

/// Simultaneous free-variable renaming; targets must be globally fresh.
fn apply_ren(t: &Type, ren: &BTreeMap<TyVarName, TyVarName>) -> Type {
    if ren.is_empty() {
        return t.clone();
    }
    match t {
        Type::Top => Type::Top,
        Type::Var(x) => match ren.get(x) {
            Some(y) => Type::Var(y.clone()),
            None => t.clone(),
        },
        Type::Arrow(a, b) => Type::arrow(apply_ren(a, ren), apply_ren(b, ren)),
        Type::Forall { binder, bound, body } => {
            let bound = apply_ren(bound, ren);
            if ren.contains_key(binder) {
                let mut inner = ren.clone();
                inner.remove(binder);
                Type::forall(binder.clone(), bound, apply_ren(body, &inner))
            } else {
                debug_assert!(ren.values().all(|v| v != binder), "targets must be fresh");
                Type::forall(binder.clone(), bound, apply_ren(body, ren))
            }
        }
    }
}

/// Rename an environment variable (entry name plus free type occurrences)
/// throughout a derivation. `to` must be fresh for the whole subtree.
fn rename_env_var(d: &Derivation, from: &TyVarName, to: &TyVarName) -> Derivation {
    if from == to {
        return d.clone();
    }
    let entries = d
        .conclusion
        .env
        .entries()
        .iter()
        .map(|b| Binding {
            name: if &b.name == from { to.clone() } else { b.name.clone() },
            bound: rename_free(&b.bound, from, to),
        })
        .collect();
    let env = TypeEnv::from_entries(entries).expect("fresh target preserves distinctness");
    let conclusion = Judgment::new(
        env,
        rename_free(&d.conclusion.left, from, to),
        rename_free(&d.conclusion.right, from, to),
    );
    let premises = d.premises.iter().map(|p| rename_env_var(p, from, to)).collect();
    Derivation::node(d.rule, conclusion, premises)
}

/// Transport a derivation to `wider` without revalidating it. Quantifier
/// premises whose extension binder collides with a wider name are freshened
/// and the rename is pushed through the subtree.
fn weaken_into(d: &Derivation, wider: &TypeEnv) -> Result<Derivation, TransformError> {
    weaken_go(d, wider, &BTreeMap::new())
}

fn weaken_go(
    node: &Derivation,
    env: &TypeEnv,
    ren: &BTreeMap<TyVarName, TyVarName>,
) -> Result<Derivation, TransformError> {
    let conclusion = Judgment::new(
        env.clone(),
        apply_ren(&node.conclusion.left, ren),
        apply_ren(&node.conclusion.right, ren),
    );
    let premises = match node.rule {
        RuleTag::SaAll if node.premises.len() == 2 => {
            let p1 = weaken_go(&node.premises[0], env, ren)?;
            let p2_old = &node.premises[1];
            let ext = p2_old.conclusion.env.entries().last().ok_or_else(|| {
                TransformError::JudgmentMismatch("quantifier premise lacks its extension".into())
            })?;
            let (z, b) = (ext.name.clone(), ext.bound.clone());
            let mut ren2 = ren.clone();
            let z_new = if env.binds(&z) {
                let mut avoid = env.name_set();
                subtree_names(p2_old, &mut avoid);
                avoid.extend(ren.values().cloned());
                let fresh = fresh_name(&avoid);
                ren2.insert(z.clone(), fresh.clone());
                fresh
            } else {
                z
            };
            let inner = env
                .extended(Binding { name: z_new, bound: apply_ren(&b, ren) })
                .map_err(|e| TransformError::NameClash(e.to_string()))?;
            let p2 = weaken_go(p2_old, &inner, &ren2)?;
            vec![p1, p2]
        }
        RuleTag::SaExtra if node.premises.len() == 2 => {
            let p1 = weaken_go(&node.premises[0], env, ren)?;
            let Type::Var(x_old) = &node.premises[0].conclusion.left else {
                return Err(TransformError::JudgmentMismatch(
                    "extra-rule premise does not start with a variable".into(),
                ));
            };
            let x_new = ren.get(x_old).cloned().unwrap_or_else(|| x_old.clone());
            let v_new = apply_ren(&node.premises[0].conclusion.right, ren);
            let env2 = env.with_bound_replaced(&x_new, v_new).ok_or_else(|| {
                TransformError::JudgmentMismatch("extra-rule pivot is not bound".into())
            })?;
            let p2 = weaken_go(&node.premises[1], &env2, ren)?;
            vec![p1, p2]
        }
        _ => node
            .premises
            .iter()
            .map(|p| weaken_go(p, env, ren))
            .collect::<Result<_, _>>()?,
    };
    Ok(Derivation::node(node.rule, conclusion, premises))
}

// ---------------------------------------------------------------------------
// Reflexivity and weakening.
// ---------------------------------------------------------------------------

/// A derivation of `env |- t <: t`, built structurally: `SA-Refl-TVar` at
/// variables, `SA-Top` at `Top`, and the structural rules elsewhere. Valid
/// in both systems.
pub fn reflexivity(env: &TypeEnv, t: &Type, mode: ScopeMode) -> Result<Derivation, TransformError> {
    if mode == ScopeMode::Strict && !t.well_scoped_in(env) {
        return Err(TransformError::NotWellScoped(format!(
            "`{t}` is not well-scoped in `{env}`"
        )));
    }
    Ok(refl_build(env, t))
}

fn refl_build(env: &TypeEnv, t: &Type) -> Derivation {
    let conclusion = Judgment::new(env.clone(), t.clone(), t.clone());
    match t {
        Type::Top => Derivation::leaf(RuleTag::SaTop, conclusion),
        Type::Var(_) => Derivation::leaf(RuleTag::SaReflTvar, conclusion),
        Type::Arrow(a, b) => Derivation::node(
            RuleTag::SaArrow,
            conclusion,
            vec![refl_build(env, a), refl_build(env, b)],
        ),
        Type::Forall { binder, bound, body } => {
            let mut avoid = env.name_set();
            avoid.extend(t.all_names());
            let z = fresh_name(&avoid);
            let inner = env
                .extended(Binding { name: z.clone(), bound: (**bound).clone() })
                .expect("fresh name cannot collide");
            let body_z = rename_free(body, binder, &z);
            Derivation::node(
                RuleTag::SaAll,
                conclusion,
                vec![refl_build(env, bound), refl_build(&inner, &body_z)],
            )
        }
    }
}

/// Transport a valid derivation to a wider environment containing its own
/// as a subsequence.
pub fn weakening(
    d: &Derivation,
    wider: &TypeEnv,
    system: SystemId,
    mode: ScopeMode,
) -> Result<Derivation, TransformError> {
    ensure_valid(d, system, mode)?;
    if !d.conclusion.env.is_subsequence_of(wider) {
        return Err(TransformError::JudgmentMismatch(
            "derivation environment is not a subsequence of the wider environment".into(),
        ));
    }
    let out = weaken_into(d, wider)?;
    debug_check_output(&out, system, mode, "weakening");
    Ok(out)
}

// ---------------------------------------------------------------------------
// Original system: transitivity and narrowing, mutually recursive.
// ---------------------------------------------------------------------------

/// Compose `d1 : Γ |- S <: Q` and `d2 : Γ |- Q <: T` into `Γ |- S <: T`.
pub fn transitivity_original(
    d1: &Derivation,
    d2: &Derivation,
    mode: ScopeMode,
) -> Result<Derivation, TransformError> {
    transitivity_original_audited(d1, d2, mode).map(|(d, _)| d)
}

/// As [`transitivity_original`], also returning the measure audit.
pub fn transitivity_original_audited(
    d1: &Derivation,
    d2: &Derivation,
    mode: ScopeMode,
) -> Result<(Derivation, TransformAudit), TransformError> {
    ensure_valid(d1, SystemId::Original, mode)?;
    ensure_valid(d2, SystemId::Original, mode)?;
    check_cut(d1, d2)?;
    let mut ctx = Ctx::new(mode);
    let out = trans_rec(&mut ctx, d1, d2)?;
    debug_check_output(&out, SystemId::Original, mode, "transitivity_original");
    Ok((out, ctx.audit))
}

fn check_cut(d1: &Derivation, d2: &Derivation) -> Result<(), TransformError> {
    if d1.conclusion.env != d2.conclusion.env {
        return Err(TransformError::JudgmentMismatch(
            "the two derivations use different environments".into(),
        ));
    }
    if !alpha_eq(&d1.conclusion.right, &d2.conclusion.left) {
        return Err(TransformError::JudgmentMismatch(format!(
            "cut types differ: `{}` vs `{}`",
            d1.conclusion.right, d2.conclusion.left
        )));
    }
    Ok(())
}

fn trans_rec(ctx: &mut Ctx, d1: &Derivation, d2: &Derivation) -> Result<Derivation, TransformError> {
    ctx.audit.transitivity_steps += 1;
    let m = (d1.conclusion.right.size(), FLAG_TRANS, d1.height());
    ctx.enter_measure(m, "transitivity");
    let r = trans_cases(ctx, d1, d2);
    ctx.exit_measure();
    r
}

fn top_conclusion(env: &TypeEnv, left: &Type) -> Derivation {
    Derivation::leaf(RuleTag::SaTop, Judgment::new(env.clone(), left.clone(), Type::Top))
}

fn trans_cases(
    ctx: &mut Ctx,
    d1: &Derivation,
    d2: &Derivation,
) -> Result<Derivation, TransformError> {
    let env = &d1.conclusion.env;
    match d1.rule {
        // Q = Top, so d2 can only end in SA-Top and T = Top.
        RuleTag::SaTop => {
            if d2.conclusion.right != Type::Top {
                return Err(TransformError::JudgmentMismatch(
                    "nothing is above Top but the second derivation claims otherwise".into(),
                ));
            }
            Ok(top_conclusion(env, &d1.conclusion.left))
        }
        // S = Q, so d2 already concludes the goal.
        RuleTag::SaReflTvar => Ok(d2.clone()),
        // Step through the declared bound and compose behind it.
        RuleTag::SaTransTvar => {
            let inner = trans_rec(ctx, &d1.premises[0], d2)?;
            Ok(Derivation::node(
                RuleTag::SaTransTvar,
                Judgment::new(env.clone(), d1.conclusion.left.clone(), d2.conclusion.right.clone()),
                vec![inner],
            ))
        }
        RuleTag::SaArrow => match d2.rule {
            RuleTag::SaTop => Ok(top_conclusion(env, &d1.conclusion.left)),
            RuleTag::SaArrow => {
                // Cut components are strictly smaller than Q.
                let p1 = trans_rec(ctx, &d2.premises[0], &d1.premises[0])?;
                let p2 = trans_rec(ctx, &d1.premises[1], &d2.premises[1])?;
                Ok(Derivation::node(
                    RuleTag::SaArrow,
                    Judgment::new(
                        env.clone(),
                        d1.conclusion.left.clone(),
                        d2.conclusion.right.clone(),
                    ),
                    vec![p1, p2],
                ))
            }
            _ => Err(TransformError::JudgmentMismatch(
                "arrow cut type meets a non-arrow rule".into(),
            )),
        },
        RuleTag::SaAll => match d2.rule {
            RuleTag::SaTop => Ok(top_conclusion(env, &d1.conclusion.left)),
            RuleTag::SaAll => {
                let d1a = &d1.premises[0];
                let d1b = &d1.premises[1];
                let d2a = &d2.premises[0];
                let d2b = &d2.premises[1];
                // New bound premise: T1 <: Q1 composed with Q1 <: S1.
                let p1 = trans_rec(ctx, d2a, d1a)?;
                // Narrow d1's body premise from the old bound to the new
                // one, at a strictly smaller pivot bound.
                let z1 = d1b
                    .conclusion
                    .env
                    .entries()
                    .last()
                    .ok_or_else(|| {
                        TransformError::JudgmentMismatch(
                            "quantifier premise lacks its extension".into(),
                        )
                    })?
                    .name
                    .clone();
                let narrowed = narrow_rec(ctx, &z1, d2a, d1b)?;
                // Align both body premises on one fresh binder.
                let z2 = d2b
                    .conclusion
                    .env
                    .entries()
                    .last()
                    .ok_or_else(|| {
                        TransformError::JudgmentMismatch(
                            "quantifier premise lacks its extension".into(),
                        )
                    })?
                    .name
                    .clone();
                let mut avoid = env.name_set();
                subtree_names(&narrowed, &mut avoid);
                subtree_names(d2b, &mut avoid);
                let z = fresh_name(&avoid);
                let left_prem = rename_env_var(&narrowed, &z1, &z);
                let right_prem = rename_env_var(d2b, &z2, &z);
                let p2 = trans_rec(ctx, &left_prem, &right_prem)?;
                Ok(Derivation::node(
                    RuleTag::SaAll,
                    Judgment::new(
                        env.clone(),
                        d1.conclusion.left.clone(),
                        d2.conclusion.right.clone(),
                    ),
                    vec![p1, p2],
                ))
            }
            _ => Err(TransformError::JudgmentMismatch(
                "quantifier cut type meets a non-quantifier rule".into(),
            )),
        },
        _ => Err(TransformError::InvalidInput {
            system: SystemId::Original,
            first: format!("rule {} not in system original", d1.rule),
        }),
    }
}

/// Replace the pivot's bound `Q` by `P` (with `dP : Γ1 |- P <: Q`)
/// throughout `d : Γ1, X<:Q, Γ2 |- M <: N`, preserving the endpoints.
pub fn narrowing_original(
    split: &EnvSplit,
    d: &Derivation,
    dp: &Derivation,
    mode: ScopeMode,
) -> Result<Derivation, TransformError> {
    narrowing_original_audited(split, d, dp, mode).map(|(out, _)| out)
}

/// As [`narrowing_original`], also returning the measure audit.
pub fn narrowing_original_audited(
    split: &EnvSplit,
    d: &Derivation,
    dp: &Derivation,
    mode: ScopeMode,
) -> Result<(Derivation, TransformAudit), TransformError> {
    ensure_valid(d, SystemId::Original, mode)?;
    ensure_valid(dp, SystemId::Original, mode)?;
    check_split(split, d, dp)?;
    let mut ctx = Ctx::new(mode);
    let out = narrow_rec(&mut ctx, &split.pivot.name, dp, d)?;
    debug_check_output(&out, SystemId::Original, mode, "narrowing_original");
    Ok((out, ctx.audit))
}

fn check_split(split: &EnvSplit, d: &Derivation, dp: &Derivation) -> Result<(), TransformError> {
    let whole = split.concat()?;
    if !whole.alpha_eq(&d.conclusion.env) {
        return Err(TransformError::JudgmentMismatch(
            "split does not describe the derivation's environment".into(),
        ));
    }
    if dp.conclusion.env != split.prefix {
        return Err(TransformError::JudgmentMismatch(
            "bound derivation does not live in the split prefix".into(),
        ));
    }
    if !alpha_eq(&dp.conclusion.right, &split.pivot.bound) {
        return Err(TransformError::JudgmentMismatch(
            "bound derivation does not end at the pivot's bound".into(),
        ));
    }
    Ok(())
}

fn narrow_rec(
    ctx: &mut Ctx,
    pivot: &TyVarName,
    dp: &Derivation,
    node: &Derivation,
) -> Result<Derivation, TransformError> {
    ctx.audit.narrowing_steps += 1;
    let q_size = node
        .conclusion
        .env
        .lookup(pivot)
        .map(Type::size)
        .ok_or_else(|| TransformError::JudgmentMismatch("pivot vanished from environment".into()))?;
    let m = (q_size, FLAG_NARROW, node.height());
    ctx.enter_measure(m, "narrowing");
    let r = narrow_cases(ctx, pivot, dp, node);
    ctx.exit_measure();
    r
}

fn narrow_cases(
    ctx: &mut Ctx,
    pivot: &TyVarName,
    dp: &Derivation,
    node: &Derivation,
) -> Result<Derivation, TransformError> {
    let p_new = dp.conclusion.left.clone();
    let new_env = node
        .conclusion
        .env
        .with_bound_replaced(pivot, p_new)
        .ok_or_else(|| TransformError::JudgmentMismatch("pivot vanished from environment".into()))?;
    let conclusion = Judgment::new(
        new_env.clone(),
        node.conclusion.left.clone(),
        node.conclusion.right.clone(),
    );
    match node.rule {
        RuleTag::SaTop | RuleTag::SaReflTvar => Ok(Derivation::leaf(node.rule, conclusion)),
        RuleTag::SaTransTvar => {
            let inner = narrow_rec(ctx, pivot, dp, &node.premises[0])?;
            if matches!(&node.conclusion.left, Type::Var(y) if y == pivot) {
                // The old bound is no longer declared: reach it through the
                // new bound and a transitivity step at the old bound.
                let w = weaken_into(dp, &new_env)?;
                let stitched = trans_rec(ctx, &w, &inner)?;
                Ok(Derivation::node(RuleTag::SaTransTvar, conclusion, vec![stitched]))
            } else {
                Ok(Derivation::node(RuleTag::SaTransTvar, conclusion, vec![inner]))
            }
        }
        RuleTag::SaArrow | RuleTag::SaAll => {
            let premises = node
                .premises
                .iter()
                .map(|p| narrow_rec(ctx, pivot, dp, p))
                .collect::<Result<_, _>>()?;
            Ok(Derivation::node(node.rule, conclusion, premises))
        }
        _ => Err(TransformError::InvalidInput {
            system: SystemId::Original,
            first: format!("rule {} not in system original", node.rule),
        }),
    }
}

// ---------------------------------------------------------------------------
// Variant system: transitivity, narrowing, and extra-rule admissibility.
// ---------------------------------------------------------------------------

/// Variant-system counterpart of [`transitivity_original`]. A variable on
/// the left of `d1` is discharged by a single `SA-Tr-TVar` node; only the
/// cut type drives the recursion.
pub fn transitivity_variant(
    d1: &Derivation,
    d2: &Derivation,
    mode: ScopeMode,
) -> Result<Derivation, TransformError> {
    transitivity_variant_audited(d1, d2, mode).map(|(d, _)| d)
}

/// As [`transitivity_variant`], also returning the call-trace audit.
pub fn transitivity_variant_audited(
    d1: &Derivation,
    d2: &Derivation,
    mode: ScopeMode,
) -> Result<(Derivation, TransformAudit), TransformError> {
    ensure_valid(d1, SystemId::Variant, mode)?;
    ensure_valid(d2, SystemId::Variant, mode)?;
    check_cut(d1, d2)?;
    let mut ctx = Ctx::new(mode);
    let out = tv_rec(&mut ctx, d1, d2)?;
    debug_check_output(&out, SystemId::Variant, mode, "transitivity_variant");
    Ok((out, ctx.audit))
}

fn tv_rec(ctx: &mut Ctx, d1: &Derivation, d2: &Derivation) -> Result<Derivation, TransformError> {
    if ctx.case_stack.last() == Some(&Case::VarHead) {
        ctx.audit.variant_var_head_descents += 1;
    }
    if ctx.in_narrowing_variant {
        ctx.audit.transitivity_calls_inside_narrowing += 1;
    }
    let env = &d1.conclusion.env;
    if d1.rule == RuleTag::SaReflTvar {
        return Ok(d2.clone());
    }
    if matches!(&d1.conclusion.left, Type::Var(_)) {
        // The built-in rule takes both derivations whole; no recursion and
        // no inspection of d1's premises.
        ctx.audit.variant_var_head_cases += 1;
        ctx.case_stack.push(Case::VarHead);
        let node = Derivation::node(
            RuleTag::SaTrTvar,
            Judgment::new(env.clone(), d1.conclusion.left.clone(), d2.conclusion.right.clone()),
            vec![d1.clone(), d2.clone()],
        );
        ctx.case_stack.pop();
        return Ok(node);
    }
    ctx.case_stack.push(Case::Structural);
    let r = tv_structural(ctx, d1, d2);
    ctx.case_stack.pop();
    r
}

fn tv_structural(
    ctx: &mut Ctx,
    d1: &Derivation,
    d2: &Derivation,
) -> Result<Derivation, TransformError> {
    let env = &d1.conclusion.env;
    match d1.rule {
        RuleTag::SaTop => {
            if d2.conclusion.right != Type::Top {
                return Err(TransformError::JudgmentMismatch(
                    "nothing is above Top but the second derivation claims otherwise".into(),
                ));
            }
            Ok(top_conclusion(env, &d1.conclusion.left))
        }
        RuleTag::SaArrow => match d2.rule {
            RuleTag::SaTop => Ok(top_conclusion(env, &d1.conclusion.left)),
            RuleTag::SaArrow => {
                let p1 = tv_rec(ctx, &d2.premises[0], &d1.premises[0])?;
                let p2 = tv_rec(ctx, &d1.premises[1], &d2.premises[1])?;
                Ok(Derivation::node(
                    RuleTag::SaArrow,
                    Judgment::new(
                        env.clone(),
                        d1.conclusion.left.clone(),
                        d2.conclusion.right.clone(),
                    ),
                    vec![p1, p2],
                ))
            }
            _ => Err(TransformError::JudgmentMismatch(
                "arrow cut type meets a non-arrow rule".into(),
            )),
        },
        RuleTag::SaAll => match d2.rule {
            RuleTag::SaTop => Ok(top_conclusion(env, &d1.conclusion.left)),
            RuleTag::SaAll => {
                let d1b = &d1.premises[1];
                let d2a = &d2.premises[0];
                let d2b = &d2.premises[1];
                let p1 = tv_rec(ctx, d2a, &d1.premises[0])?;
                let z1 = d1b
                    .conclusion
                    .env
                    .entries()
                    .last()
                    .ok_or_else(|| {
                        TransformError::JudgmentMismatch(
                            "quantifier premise lacks its extension".into(),
                        )
                    })?
                    .name
                    .clone();
                // Narrow the body premise via the variant route; narrowing
                // here never calls back into this construction.
                let narrowed = narrow_variant_inner(ctx, &z1, d2a, d1b)?;
                let z2 = d2b
                    .conclusion
                    .env
                    .entries()
                    .last()
                    .ok_or_else(|| {
                        TransformError::JudgmentMismatch(
                            "quantifier premise lacks its extension".into(),
                        )
                    })?
                    .name
                    .clone();
                let mut avoid = env.name_set();
                subtree_names(&narrowed, &mut avoid);
                subtree_names(d2b, &mut avoid);
                let z = fresh_name(&avoid);
                let left_prem = rename_env_var(&narrowed, &z1, &z);
                let right_prem = rename_env_var(d2b, &z2, &z);
                let p2 = tv_rec(ctx, &left_prem, &right_prem)?;
                Ok(Derivation::node(
                    RuleTag::SaAll,
                    Judgment::new(
                        env.clone(),
                        d1.conclusion.left.clone(),
                        d2.conclusion.right.clone(),
                    ),
                    vec![p1, p2],
                ))
            }
            _ => Err(TransformError::JudgmentMismatch(
                "quantifier cut type meets a non-quantifier rule".into(),
            )),
        },
        _ => Err(TransformError::InvalidInput {
            system: SystemId::Variant,
            first: format!("unexpected rule {} for a non-variable left side", d1.rule),
        }),
    }
}

/// Variant-system narrowing, deliberately routed through
/// [`extra_rule_admissible`]: the bound swap is stated as one extra-rule
/// instance whose first premise is `SA-Tr-TVar(SA-Hyp, weakened dP)` and is
/// then discharged by the admissibility construction.
pub fn narrowing_variant(
    split: &EnvSplit,
    d: &Derivation,
    dp: &Derivation,
    mode: ScopeMode,
) -> Result<Derivation, TransformError> {
    narrowing_variant_audited(split, d, dp, mode).map(|(out, _)| out)
}

/// As [`narrowing_variant`], also returning the call-trace audit.
pub fn narrowing_variant_audited(
    split: &EnvSplit,
    d: &Derivation,
    dp: &Derivation,
    mode: ScopeMode,
) -> Result<(Derivation, TransformAudit), TransformError> {
    ensure_valid(d, SystemId::Variant, mode)?;
    ensure_valid(dp, SystemId::Variant, mode)?;
    check_split(split, d, dp)?;
    let mut ctx = Ctx::new(mode);
    let out = narrow_variant_inner(&mut ctx, &split.pivot.name, dp, d)?;
    debug_check_output(&out, SystemId::Variant, mode, "narrowing_variant");
    Ok((out, ctx.audit))
}

fn narrow_variant_inner(
    ctx: &mut Ctx,
    pivot: &TyVarName,
    dp: &Derivation,
    d: &Derivation,
) -> Result<Derivation, TransformError> {
    let saved = ctx.in_narrowing_variant;
    ctx.in_narrowing_variant = true;
    let r = narrow_variant_body(ctx, pivot, dp, d);
    ctx.in_narrowing_variant = saved;
    r
}

fn narrow_variant_body(
    ctx: &mut Ctx,
    pivot: &TyVarName,
    dp: &Derivation,
    d: &Derivation,
) -> Result<Derivation, TransformError> {
    let p_new = dp.conclusion.left.clone();
    let q_old = d
        .conclusion
        .env
        .lookup(pivot)
        .cloned()
        .ok_or_else(|| TransformError::JudgmentMismatch("pivot vanished from environment".into()))?;
    let new_env = d
        .conclusion
        .env
        .with_bound_replaced(pivot, p_new.clone())
        .ok_or_else(|| TransformError::JudgmentMismatch("pivot vanished from environment".into()))?;
    let hyp = Derivation::leaf(
        RuleTag::SaHyp,
        Judgment::new(new_env.clone(), Type::Var(pivot.clone()), p_new),
    );
    let w = weaken_into(dp, &new_env)?;
    let d_xv = Derivation::node(
        RuleTag::SaTrTvar,
        Judgment::new(new_env, Type::Var(pivot.clone()), q_old),
        vec![hyp, w],
    );
    let out = extra_rule_rec(ctx, &d_xv, d)?;
    ctx.audit.extra_tags_in_admissibility_outputs += out.count_tag(RuleTag::SaExtra);
    Ok(out)
}

/// Discharge one instance of the extra rule: given
/// `d_xv : Γ1, X<:U, Γ2 |- X <: V` and `d_mn : Γ1, X<:V, Γ2 |- M <: N`,
/// build `Γ1, X<:U, Γ2 |- M <: N` with no `SA-Extra` node, by structural
/// recursion on `d_mn` that splices a weakened `d_xv` at every `SA-Hyp`
/// node on the pivot.
pub fn extra_rule_admissible(
    d_xv: &Derivation,
    d_mn: &Derivation,
    mode: ScopeMode,
) -> Result<Derivation, TransformError> {
    ensure_valid(d_xv, SystemId::Variant, mode)?;
    ensure_valid(d_mn, SystemId::Variant, mode)?;
    let Type::Var(x) = &d_xv.conclusion.left else {
        return Err(TransformError::JudgmentMismatch(
            "bound-change derivation must conclude a variable on the left".into(),
        ));
    };
    let v = &d_xv.conclusion.right;
    let expected = d_xv
        .conclusion
        .env
        .with_bound_replaced(x, v.clone())
        .ok_or_else(|| TransformError::JudgmentMismatch("pivot is not bound".into()))?;
    if !d_mn.conclusion.env.alpha_eq(&expected) {
        return Err(TransformError::JudgmentMismatch(
            "main derivation must carry the pivot at the intermediate bound".into(),
        ));
    }
    let mut ctx = Ctx::new(mode);
    let out = extra_rule_rec(&mut ctx, d_xv, d_mn)?;
    debug_check_output(&out, SystemId::Variant, mode, "extra_rule_admissible");
    Ok(out)
}

fn extra_rule_rec(
    ctx: &mut Ctx,
    d_xv: &Derivation,
    node: &Derivation,
) -> Result<Derivation, TransformError> {
    let Type::Var(x) = &d_xv.conclusion.left else {
        return Err(TransformError::JudgmentMismatch(
            "bound-change derivation must conclude a variable on the left".into(),
        ));
    };
    let u = d_xv
        .conclusion
        .env
        .lookup(x)
        .cloned()
        .ok_or_else(|| TransformError::JudgmentMismatch("pivot is not bound".into()))?;
    let new_env = node
        .conclusion
        .env
        .with_bound_replaced(x, u)
        .ok_or_else(|| TransformError::JudgmentMismatch("pivot vanished from environment".into()))?;
    let conclusion = Judgment::new(
        new_env.clone(),
        node.conclusion.left.clone(),
        node.conclusion.right.clone(),
    );
    match node.rule {
        RuleTag::SaHyp => {
            if matches!(&node.conclusion.left, Type::Var(y) if y == x) {
                // The hypothesis consumed the swapped bound: splice the
                // bound-change derivation, transported to this node's env.
                weaken_into(d_xv, &new_env)
            } else {
                Ok(Derivation::leaf(RuleTag::SaHyp, conclusion))
            }
        }
        RuleTag::SaTop | RuleTag::SaReflTvar => Ok(Derivation::leaf(node.rule, conclusion)),
        RuleTag::SaTrTvar | RuleTag::SaArrow | RuleTag::SaAll => {
            let premises = node
                .premises
                .iter()
                .map(|p| extra_rule_rec(ctx, d_xv, p))
                .collect::<Result<_, _>>()?;
            Ok(Derivation::node(node.rule, conclusion, premises))
        }
        _ => Err(TransformError::InvalidInput {
            system: SystemId::Variant,
            first: format!("rule {} not in system variant", node.rule),
        }),
    }
}

// ---------------------------------------------------------------------------
// System translations and scoping transfer.
// ---------------------------------------------------------------------------

/// Translate an original-system derivation into the variant system: every
/// `SA-Trans-TVar` node becomes `SA-Tr-TVar(SA-Hyp, translated premise)`;
/// all other nodes keep their tag.
pub fn orig_to_variant(d: &Derivation, mode: ScopeMode) -> Result<Derivation, TransformError> {
    ensure_valid(d, SystemId::Original, mode)?;
    let out = o2v(d);
    debug_check_output(&out, SystemId::Variant, mode, "orig_to_variant");
    Ok(out)
}

fn o2v(d: &Derivation) -> Derivation {
    match d.rule {
        RuleTag::SaTransTvar => {
            let p = o2v(&d.premises[0]);
            let hyp = Derivation::leaf(
                RuleTag::SaHyp,
                Judgment::new(
                    d.conclusion.env.clone(),
                    d.conclusion.left.clone(),
                    p.conclusion.left.clone(),
                ),
            );
            Derivation::node(RuleTag::SaTrTvar, d.conclusion.clone(), vec![hyp, p])
        }
        _ => Derivation::node(
            d.rule,
            d.conclusion.clone(),
            d.premises.iter().map(o2v).collect(),
        ),
    }
}

/// Translate a variant-system derivation into the original system. This is
/// the non-trivial direction: `SA-Hyp` needs reflexivity of the declared
/// bound, and `SA-Tr-TVar` is eliminated with the full transitivity
/// construction.
pub fn variant_to_orig(d: &Derivation, mode: ScopeMode) -> Result<Derivation, TransformError> {
    ensure_valid(d, SystemId::Variant, mode)?;
    let mut ctx = Ctx::new(mode);
    let out = v2o(&mut ctx, d)?;
    debug_check_output(&out, SystemId::Original, mode, "variant_to_orig");
    Ok(out)
}

fn v2o(ctx: &mut Ctx, d: &Derivation) -> Result<Derivation, TransformError> {
    match d.rule {
        RuleTag::SaHyp => {
            let refl = reflexivity(&d.conclusion.env, &d.conclusion.right, ctx.mode)?;
            Ok(Derivation::node(RuleTag::SaTransTvar, d.conclusion.clone(), vec![refl]))
        }
        RuleTag::SaTrTvar => {
            let a = v2o(ctx, &d.premises[0])?;
            let b = v2o(ctx, &d.premises[1])?;
            trans_rec(ctx, &a, &b)
        }
        _ => {
            let premises = d
                .premises
                .iter()
                .map(|p| v2o(ctx, p))
                .collect::<Result<_, _>>()?;
            Ok(Derivation::node(d.rule, d.conclusion.clone(), premises))
        }
    }
}

/// Transfer a lax-mode derivation over a strictly well-formed environment
/// with well-scoped endpoints into strict mode. The tree is unchanged; the
/// scoping provisos are re-checked node by node and the first genuine
/// violation is reported by path.
pub fn lax_to_strict(d: &Derivation, system: SystemId) -> Result<Derivation, TransformError> {
    ensure_valid(d, system, ScopeMode::Lax)?;
    let env = &d.conclusion.env;
    if !env.well_formed(ScopeMode::Strict) {
        return Err(TransformError::NotWellScoped(
            "conclusion environment is not strictly well-formed".into(),
        ));
    }
    if !d.conclusion.left.well_scoped_in(env) || !d.conclusion.right.well_scoped_in(env) {
        return Err(TransformError::NotWellScoped(
            "conclusion endpoints are not well-scoped".into(),
        ));
    }
    let report = validate_derivation(d, system, ScopeMode::Strict);
    match report.failures.into_iter().next() {
        None => Ok(d.clone()),
        Some(f) => Err(TransformError::ScopeViolation { path: f.path, reason: f.reason }),
    }
}
