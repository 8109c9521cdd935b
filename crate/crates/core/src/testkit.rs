//! Brute-force oracle, deterministic random generators with shrinking, and
//! the differential/permutation property harnesses.
//!
//! Determinism contract: every generator is a pure function of its
//! [`GenConfig`]; per-trial seeds derive from the run seed and the trial
//! index through [`mix_seed`], so serial and parallel runs would tally the
//! same report.

use std::fmt;

use thiserror::Error;

use crate::checker::{check, CheckOutcome, Fuel};
use crate::rules::{Derivation, Judgment, RuleTag, SystemId};
use crate::syntax::{
    alpha_eq, fresh_name, rename_free, Binding, ScopeMode, TyVarName, Type, TypeEnv,
};

/// Errors from the testkit operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TestkitError {
    #[error("oracle depth {depth} exceeds the guardrail of {max}")]
    DepthGuard { depth: usize, max: usize },
    #[error("permutation runs require lax mode")]
    Mode,
}

// ---------------------------------------------------------------------------
// Deterministic randomness.
// ---------------------------------------------------------------------------

/// Splitmix-style generator. The constants are fixed here so sample streams
/// are stable across runs and platforms: the state advances by
/// 0x9E3779B97F4A7C15 and is finalized with the 30/27/31 shift-multiply
/// mix (0xBF58476D1CE4E5B9, 0x94D049BB133111EB).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> SplitMix64 {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }
}

/// Per-trial seed: the run seed xor the trial index, scrambled once.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    SplitMix64::new(seed ^ index).next_u64()
}

/// Configuration for the random generators. Equal configs yield equal
/// sample streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenConfig {
    pub seed: u64,
    pub max_type_size: usize,
    pub max_env_len: usize,
    pub mode: ScopeMode,
}

impl GenConfig {
    pub fn new(seed: u64, max_type_size: usize, max_env_len: usize, mode: ScopeMode) -> GenConfig {
        GenConfig { seed, max_type_size, max_env_len, mode }
    }

    fn with_seed(&self, seed: u64) -> GenConfig {
        GenConfig { seed, ..self.clone() }
    }
}

/// The deterministic name sequence used for generated environments.
fn env_names(count: usize) -> Vec<TyVarName> {
    let mut avoid = std::collections::BTreeSet::new();
    let mut names = Vec::with_capacity(count);
    for _ in 0..count {
        let n = fresh_name(&avoid);
        avoid.insert(n.clone());
        names.push(n);
    }
    names
}

/// Node-by-node random type: 40% leaf, 30% arrow, 30% quantifier until the
/// size budget forces leaves; leaves are Top 40% / a scoped variable 60%.
fn gen_type_impl(rng: &mut SplitMix64, scope: &[TyVarName], budget: usize) -> Type {
    if budget < 3 {
        return gen_leaf(rng, scope);
    }
    match rng.below(10) {
        0..=3 => gen_leaf(rng, scope),
        4..=6 => {
            let left_budget = 1 + rng.below((budget - 2) as u64) as usize;
            let dom = gen_type_impl(rng, scope, left_budget);
            let cod = gen_type_impl(rng, scope, budget - 1 - dom.size());
            Type::arrow(dom, cod)
        }
        _ => {
            let avoid: std::collections::BTreeSet<_> = scope.iter().cloned().collect();
            let binder = fresh_name(&avoid);
            let left_budget = 1 + rng.below((budget - 2) as u64) as usize;
            let bound = gen_type_impl(rng, scope, left_budget);
            let mut inner: Vec<TyVarName> = scope.to_vec();
            inner.push(binder.clone());
            let body = gen_type_impl(rng, &inner, budget - 1 - bound.size());
            Type::forall(binder, bound, body)
        }
    }
}

fn gen_leaf(rng: &mut SplitMix64, scope: &[TyVarName]) -> Type {
    if scope.is_empty() || rng.below(10) < 4 {
        Type::Top
    } else {
        Type::Var(scope[rng.below(scope.len() as u64) as usize].clone())
    }
}

/// A random environment. Strict mode draws each bound over the names before
/// it; lax mode draws every bound over all names, so self-referential and
/// forward-referencing bounds occur.
pub fn gen_env(cfg: &GenConfig) -> TypeEnv {
    let mut rng = SplitMix64::new(cfg.seed);
    let len = if cfg.max_env_len == 0 { 0 } else { rng.below(cfg.max_env_len as u64 + 1) as usize };
    let names = env_names(len);
    let mut entries = Vec::with_capacity(len);
    for i in 0..len {
        let scope: &[TyVarName] = match cfg.mode {
            ScopeMode::Strict => &names[..i],
            ScopeMode::Lax => &names[..],
        };
        let bound = gen_type_impl(&mut rng, scope, cfg.max_type_size.max(1));
        entries.push(Binding { name: names[i].clone(), bound });
    }
    TypeEnv::from_entries(entries).expect("generated names are distinct")
}

/// A random type over `env`'s names; in strict mode the result is
/// well-scoped by construction.
pub fn gen_type(cfg: &GenConfig, env: &TypeEnv) -> Type {
    let mut rng = SplitMix64::new(cfg.seed);
    let scope: Vec<TyVarName> = env.names().cloned().collect();
    gen_type_impl(&mut rng, &scope, cfg.max_type_size.max(1))
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration.
// ---------------------------------------------------------------------------

const DEPTH_GUARD: usize = 12;

/// All valid derivations of `env |- s <: t` with height at most `depth`, in
/// canonical order: rule tags in system order, then premises recursively.
///
/// Unlike the checker, the variant-system enumeration lets the `SA-Tr-TVar`
/// intermediate range over the whole subterm closure of the environment
/// bounds and both endpoints, so it can expose incompleteness in the
/// checker's single-candidate strategy.
pub fn enumerate_oracle(
    system: SystemId,
    mode: ScopeMode,
    env: &TypeEnv,
    s: &Type,
    t: &Type,
    depth: usize,
) -> Result<Vec<Derivation>, TestkitError> {
    if depth > DEPTH_GUARD {
        return Err(TestkitError::DepthGuard { depth, max: DEPTH_GUARD });
    }
    Ok(enum_rec(system, mode, env, s, t, depth))
}

fn enum_rec(
    system: SystemId,
    mode: ScopeMode,
    env: &TypeEnv,
    s: &Type,
    t: &Type,
    depth: usize,
) -> Vec<Derivation> {
    if depth == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let strict = mode == ScopeMode::Strict;
    let conclusion = || Judgment::new(env.clone(), s.clone(), t.clone());
    for &tag in system.tags() {
        match tag {
            RuleTag::SaTop => {
                if *t == Type::Top && (!strict || s.well_scoped_in(env)) {
                    out.push(Derivation::leaf(tag, conclusion()));
                }
            }
            RuleTag::SaReflTvar => {
                if let (Type::Var(x), Type::Var(y)) = (s, t) {
                    if x == y && (!strict || env.binds(x)) {
                        out.push(Derivation::leaf(tag, conclusion()));
                    }
                }
            }
            RuleTag::SaTransTvar => {
                if let Type::Var(x) = s {
                    if let Some(bound) = env.lookup(x) {
                        for p in enum_rec(system, mode, env, &bound.clone(), t, depth - 1) {
                            out.push(Derivation::node(tag, conclusion(), vec![p]));
                        }
                    }
                }
            }
            RuleTag::SaArrow => {
                if let (Type::Arrow(s1, s2), Type::Arrow(t1, t2)) = (s, t) {
                    let firsts = enum_rec(system, mode, env, t1, s1, depth - 1);
                    if !firsts.is_empty() {
                        let seconds = enum_rec(system, mode, env, s2, t2, depth - 1);
                        for p1 in &firsts {
                            for p2 in &seconds {
                                out.push(Derivation::node(
                                    tag,
                                    conclusion(),
                                    vec![p1.clone(), p2.clone()],
                                ));
                            }
                        }
                    }
                }
            }
            RuleTag::SaAll => {
                if let (
                    Type::Forall { binder: x, bound: s1, body: s2 },
                    Type::Forall { binder: y, bound: t1, body: t2 },
                ) = (s, t)
                {
                    let mut avoid = env.name_set();
                    avoid.extend(s.all_names());
                    avoid.extend(t.all_names());
                    let z = fresh_name(&avoid);
                    let firsts = enum_rec(system, mode, env, t1, s1, depth - 1);
                    if !firsts.is_empty() {
                        let inner = env
                            .extended(Binding { name: z.clone(), bound: (**t1).clone() })
                            .expect("fresh name cannot collide");
                        let s2z = rename_free(s2, x, &z);
                        let t2z = rename_free(t2, y, &z);
                        let seconds = enum_rec(system, mode, &inner, &s2z, &t2z, depth - 1);
                        for p1 in &firsts {
                            for p2 in &seconds {
                                out.push(Derivation::node(
                                    tag,
                                    conclusion(),
                                    vec![p1.clone(), p2.clone()],
                                ));
                            }
                        }
                    }
                }
            }
            RuleTag::SaHyp => {
                if let Type::Var(x) = s {
                    if matches!(env.lookup(x), Some(b) if alpha_eq(b, t)) {
                        out.push(Derivation::leaf(tag, conclusion()));
                    }
                }
            }
            RuleTag::SaTrTvar => {
                if let Type::Var(_) = s {
                    for u in subterm_closure(env, s, t) {
                        let firsts = enum_rec(system, mode, env, s, &u, depth - 1);
                        if firsts.is_empty() {
                            continue;
                        }
                        let seconds = enum_rec(system, mode, env, &u, t, depth - 1);
                        for p1 in &firsts {
                            for p2 in &seconds {
                                out.push(Derivation::node(
                                    tag,
                                    conclusion(),
                                    vec![p1.clone(), p2.clone()],
                                ));
                            }
                        }
                    }
                }
            }
            RuleTag::SaExtra => {
                for pivot in env.names().cloned().collect::<Vec<_>>() {
                    for v in subterm_closure(env, s, t) {
                        let firsts =
                            enum_rec(system, mode, env, &Type::Var(pivot.clone()), &v, depth - 1);
                        if firsts.is_empty() {
                            continue;
                        }
                        let swapped = env
                            .with_bound_replaced(&pivot, v.clone())
                            .expect("pivot drawn from the environment");
                        let seconds = enum_rec(system, mode, &swapped, s, t, depth - 1);
                        for p1 in &firsts {
                            for p2 in &seconds {
                                out.push(Derivation::node(
                                    tag,
                                    conclusion(),
                                    vec![p1.clone(), p2.clone()],
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Subterms of every environment bound and of both endpoints, deduplicated,
/// in first-occurrence order.
fn subterm_closure(env: &TypeEnv, s: &Type, t: &Type) -> Vec<Type> {
    fn collect(t: &Type, acc: &mut Vec<Type>) {
        if !acc.contains(t) {
            acc.push(t.clone());
        }
        match t {
            Type::Top | Type::Var(_) => {}
            Type::Arrow(a, b) => {
                collect(a, acc);
                collect(b, acc);
            }
            Type::Forall { bound, body, .. } => {
                collect(bound, acc);
                collect(body, acc);
            }
        }
    }
    let mut acc = Vec::new();
    for b in env.entries() {
        collect(&b.bound, &mut acc);
    }
    collect(s, &mut acc);
    collect(t, &mut acc);
    acc
}

/// Every type of size at most `max_size` over the given free names, with
/// deterministically named binders. Sizes 1, 3, 5, ... are the realizable
/// ones (arrows and quantifiers add a node over two subtrees).
pub fn enumerate_types(names: &[TyVarName], max_size: usize) -> Vec<Type> {
    let mut out = Vec::new();
    for size in 1..=max_size {
        out.extend(enumerate_types_of_size(names, size));
    }
    out
}

fn enumerate_types_of_size(names: &[TyVarName], size: usize) -> Vec<Type> {
    let mut out = Vec::new();
    match size {
        0 => {}
        1 => {
            out.push(Type::Top);
            out.extend(names.iter().cloned().map(Type::Var));
        }
        _ => {
            for left in 1..size - 1 {
                let right = size - 1 - left;
                for a in enumerate_types_of_size(names, left) {
                    for b in enumerate_types_of_size(names, right) {
                        out.push(Type::arrow(a.clone(), b.clone()));
                    }
                }
                // One canonical binder name suffices: alpha-variants add
                // nothing to the universe.
                let avoid: std::collections::BTreeSet<_> = names.iter().cloned().collect();
                let binder = fresh_name(&avoid);
                let mut inner = names.to_vec();
                inner.push(binder.clone());
                for bound in enumerate_types_of_size(names, left) {
                    for body in enumerate_types_of_size(&inner, right) {
                        out.push(Type::forall(binder.clone(), bound.clone(), body.clone()));
                    }
                }
            }
        }
    }
    out
}

/// Every strict environment with at most `max_bindings` bindings drawn from
/// the enumerated type universe of size at most `bound_size`, using the
/// deterministic name sequence.
pub fn enumerate_strict_envs(max_bindings: usize, bound_size: usize) -> Vec<TypeEnv> {
    let names = env_names(max_bindings);
    let mut out = vec![TypeEnv::empty()];
    let mut frontier = vec![TypeEnv::empty()];
    for name in names.iter().take(max_bindings) {
        let mut next = Vec::new();
        for env in &frontier {
            let scope: Vec<TyVarName> = env.names().cloned().collect();
            for bound in enumerate_types(&scope, bound_size) {
                let ext = env
                    .extended(Binding { name: name.clone(), bound })
                    .expect("sequence names are distinct");
                next.push(ext);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

// ---------------------------------------------------------------------------
// Differential and permutation harnesses.
// ---------------------------------------------------------------------------

/// A generated instance on which two checked runs genuinely disagreed
/// (`Derivable` vs `NotDerivable`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub env: TypeEnv,
    pub left: Type,
    pub right: Type,
    pub outcomes: (CheckOutcome, CheckOutcome),
    pub shrunk: bool,
}

impl Counterexample {
    fn words(&self) -> (&'static str, &'static str) {
        (self.outcomes.0.word(), self.outcomes.1.word())
    }
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.words();
        write!(
            f,
            "counterexample: env=`{}` left=`{}` right=`{}` outcomes={}/{} shrunk={}",
            self.env, self.left, self.right, a, b, self.shrunk
        )
    }
}

/// Tally of a differential or permutation run.
/// `trials = agree + disagreements + fuel_exhausted` always holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffReport {
    pub trials: u64,
    pub agree: u64,
    pub fuel_exhausted: u64,
    pub disagreements: Vec<Counterexample>,
}

impl DiffReport {
    fn new() -> DiffReport {
        DiffReport { trials: 0, agree: 0, fuel_exhausted: 0, disagreements: Vec::new() }
    }

    pub fn render_text(&self) -> String {
        let mut out = format!(
            "trials {}\nagree {}\nfuel-exhausted {}\ndisagreements {}\n",
            self.trials,
            self.agree,
            self.fuel_exhausted,
            self.disagreements.len()
        );
        for c in &self.disagreements {
            out.push_str(&format!("{c}\n"));
        }
        out
    }

    pub fn render_sexp(&self) -> String {
        let mut out = format!(
            "(diff-report (trials {}) (agree {}) (fuel-exhausted {}) (disagreements",
            self.trials, self.agree, self.fuel_exhausted
        );
        for c in &self.disagreements {
            let judgment = Derivation::leaf(
                RuleTag::SaTop,
                Judgment::new(c.env.clone(), c.left.clone(), c.right.clone()),
            );
            // Reuse the derivation writer for the judgment part.
            let text = crate::rules::serialize_derivation(&judgment);
            let judgment_sexp = text
                .strip_prefix("(SA-Top ")
                .and_then(|s| s.strip_suffix(')'))
                .expect("writer shape is fixed")
                .to_string();
            let (a, b) = c.words();
            out.push_str(&format!(
                " (counterexample {judgment_sexp} (outcomes {a} {b}) (shrunk {}))",
                c.shrunk
            ));
        }
        out.push_str("))");
        out
    }
}

/// Greedily minimize a counterexample: drop environment entries, then send
/// subterms of the endpoints and the bounds to Top, while `recheck` keeps
/// confirming a genuine disagreement. `recheck` returns the two outcomes
/// when the candidate still disagrees.
pub fn shrink_instance(
    c: &Counterexample,
    mut recheck: impl FnMut(&TypeEnv, &Type, &Type) -> Option<(CheckOutcome, CheckOutcome)>,
) -> Counterexample {
    let mut cur = c.clone();
    'outer: loop {
        for i in 0..cur.env.len() {
            let cand = cur.env.without(i);
            if let Some(outcomes) = recheck(&cand, &cur.left, &cur.right) {
                cur.env = cand;
                cur.outcomes = outcomes;
                continue 'outer;
            }
        }
        for pos in 0..cur.left.size() {
            if let Some(cand) = replace_subterm(&cur.left, pos) {
                if let Some(outcomes) = recheck(&cur.env, &cand, &cur.right) {
                    cur.left = cand;
                    cur.outcomes = outcomes;
                    continue 'outer;
                }
            }
        }
        for pos in 0..cur.right.size() {
            if let Some(cand) = replace_subterm(&cur.right, pos) {
                if let Some(outcomes) = recheck(&cur.env, &cur.left, &cand) {
                    cur.right = cand;
                    cur.outcomes = outcomes;
                    continue 'outer;
                }
            }
        }
        for i in 0..cur.env.len() {
            let bound = cur.env.entries()[i].bound.clone();
            for pos in 0..bound.size() {
                if let Some(cand_bound) = replace_subterm(&bound, pos) {
                    let name = cur.env.entries()[i].name.clone();
                    let cand = cur
                        .env
                        .with_bound_replaced(&name, cand_bound)
                        .expect("entry exists");
                    if let Some(outcomes) = recheck(&cand, &cur.left, &cur.right) {
                        cur.env = cand;
                        cur.outcomes = outcomes;
                        continue 'outer;
                    }
                }
            }
        }
        break;
    }
    cur.shrunk = true;
    cur
}

/// Replace the pre-order `pos`-th subterm by Top; `None` if it already is
/// Top (no shrink).
fn replace_subterm(t: &Type, pos: usize) -> Option<Type> {
    fn go(t: &Type, pos: &mut usize) -> Option<Type> {
        if *pos == 0 {
            return match t {
                Type::Top => None,
                _ => Some(Type::Top),
            };
        }
        *pos -= 1;
        match t {
            Type::Top | Type::Var(_) => None,
            Type::Arrow(a, b) => {
                if *pos < a.size() {
                    go(a, pos).map(|a2| Type::arrow(a2, (**b).clone()))
                } else {
                    *pos -= a.size();
                    go(b, pos).map(|b2| Type::arrow((**a).clone(), b2))
                }
            }
            Type::Forall { binder, bound, body } => {
                if *pos < bound.size() {
                    go(bound, pos)
                        .map(|b2| Type::forall(binder.clone(), b2, (**body).clone()))
                } else {
                    *pos -= bound.size();
                    go(body, pos)
                        .map(|b2| Type::forall(binder.clone(), (**bound).clone(), b2))
                }
            }
        }
    }
    let mut p = pos;
    go(t, &mut p)
}

fn genuinely_differ(a: &CheckOutcome, b: &CheckOutcome) -> bool {
    matches!(
        (a, b),
        (CheckOutcome::Derivable(_), CheckOutcome::NotDerivable)
            | (CheckOutcome::NotDerivable, CheckOutcome::Derivable(_))
    )
}

/// Check the same generated instances against two systems and tally
/// agreement on derivability. Disagreements are shrunk before reporting.
pub fn differential_run(
    cfg: &GenConfig,
    systems: (SystemId, SystemId),
    fuel: Fuel,
    trials: u64,
) -> DiffReport {
    let mut report = DiffReport::new();
    report.trials = trials;
    for i in 0..trials {
        let tseed = mix_seed(cfg.seed, i);
        let env = gen_env(&cfg.with_seed(mix_seed(tseed, 1)));
        let s = gen_type(&cfg.with_seed(mix_seed(tseed, 2)), &env);
        let t = gen_type(&cfg.with_seed(mix_seed(tseed, 3)), &env);
        let run = |sys: SystemId, e: &TypeEnv, l: &Type, r: &Type| {
            check(sys, cfg.mode, e, l, r, fuel)
                .expect("generated instances satisfy the checker preconditions")
        };
        let oa = run(systems.0, &env, &s, &t);
        let ob = run(systems.1, &env, &s, &t);
        if matches!(oa, CheckOutcome::FuelExhausted) || matches!(ob, CheckOutcome::FuelExhausted) {
            report.fuel_exhausted += 1;
        } else if genuinely_differ(&oa, &ob) {
            let raw = Counterexample { env, left: s, right: t, outcomes: (oa, ob), shrunk: false };
            let shrunk = shrink_instance(&raw, |e, l, r| {
                let a = check(systems.0, cfg.mode, e, l, r, fuel).ok()?;
                let b = check(systems.1, cfg.mode, e, l, r, fuel).ok()?;
                genuinely_differ(&a, &b).then_some((a, b))
            });
            report.disagreements.push(shrunk);
        } else {
            report.agree += 1;
        }
    }
    report
}

/// Generate lax instances, permute the environment entries, and compare
/// derivability in the original system before and after. Lax rules consult
/// the environment only by name lookup, so the outcomes should agree;
/// fuel-exhausted trials are tallied separately, not counted as agreement.
pub fn permutation_run(cfg: &GenConfig, trials: u64, fuel: Fuel) -> Result<DiffReport, TestkitError> {
    if cfg.mode != ScopeMode::Lax {
        return Err(TestkitError::Mode);
    }
    let mut report = DiffReport::new();
    report.trials = trials;
    for i in 0..trials {
        let tseed = mix_seed(cfg.seed, i);
        let env = gen_env(&cfg.with_seed(mix_seed(tseed, 1)));
        let s = gen_type(&cfg.with_seed(mix_seed(tseed, 2)), &env);
        let t = gen_type(&cfg.with_seed(mix_seed(tseed, 3)), &env);
        let mut entries = env.entries().to_vec();
        let mut rng = SplitMix64::new(mix_seed(tseed, 4));
        for k in (1..entries.len()).rev() {
            let j = rng.below(k as u64 + 1) as usize;
            entries.swap(k, j);
        }
        let permuted = TypeEnv::from_entries(entries).expect("permutation keeps names distinct");
        let before = check(SystemId::Original, ScopeMode::Lax, &env, &s, &t, fuel)
            .expect("lax checking cannot fail");
        let after = check(SystemId::Original, ScopeMode::Lax, &permuted, &s, &t, fuel)
            .expect("lax checking cannot fail");
        if matches!(before, CheckOutcome::FuelExhausted)
            || matches!(after, CheckOutcome::FuelExhausted)
        {
            report.fuel_exhausted += 1;
        } else if genuinely_differ(&before, &after) {
            report.disagreements.push(Counterexample {
                env: permuted,
                left: s,
                right: t,
                outcomes: (before, after),
                shrunk: false,
            });
        } else {
            report.agree += 1;
        }
    }
    Ok(report)
}
