//! Fuel-bounded subtype checking for both rule systems, producing explicit
//! derivations.
//!
//! Full F<: subtyping carries no termination guarantee (lax environments can
//! make the variable rule regress forever), so the checker spends one unit of
//! fuel per goal expansion and returns a three-valued [`CheckOutcome`].
//!
//! Dispatch is by the shapes of the two types, with a fixed priority where
//! rules overlap on variables: `SA-Top`, then `SA-Refl-TVar`, then the
//! system's variable rule. Failed attempts fall through to the next
//! applicable rule, so outcomes are deterministic and the returned derivation
//! is the first one found under that order.

use std::fmt;

use thiserror::Error;

use crate::rules::{Derivation, Judgment, RuleTag, SystemId};
use crate::syntax::{alpha_eq, fresh_name, rename_free, Binding, ScopeMode, TyVarName, Type, TypeEnv};

/// A budget of goal expansions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fuel(u64);

impl Fuel {
    pub fn new(remaining: u64) -> Fuel {
        Fuel(remaining)
    }

    pub fn remaining(self) -> u64 {
        self.0
    }
}

impl Default for Fuel {
    fn default() -> Fuel {
        Fuel(1000)
    }
}

/// Three-valued result of a fuel-bounded check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckOutcome {
    /// The judgment holds; the carried derivation concludes exactly the
    /// queried judgment and validates for the queried system and mode.
    Derivable(Derivation),
    /// Every applicable rule failed with fuel left over.
    NotDerivable,
    /// Some branch ran out of budget before the search finished.
    FuelExhausted,
}

impl CheckOutcome {
    pub fn is_derivable(&self) -> bool {
        matches!(self, CheckOutcome::Derivable(_))
    }

    pub fn derivation(&self) -> Option<&Derivation> {
        match self {
            CheckOutcome::Derivable(d) => Some(d),
            _ => None,
        }
    }

    /// The outcome word used in reports and CLI output.
    pub fn word(&self) -> &'static str {
        match self {
            CheckOutcome::Derivable(_) => "derivable",
            CheckOutcome::NotDerivable => "not-derivable",
            CheckOutcome::FuelExhausted => "fuel-exhausted",
        }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.word())
    }
}

/// Precondition breaches; only possible in strict mode.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("environment is not well-formed under strict scoping")]
    IllFormedEnv,
    #[error("variable `{0}` is not bound in the environment")]
    UnknownVariable(TyVarName),
}

/// Decide `env |- s <: t` in the given system and scoping mode.
///
/// Strict mode requires a strictly well-formed environment and well-scoped
/// endpoints up front; lax mode asks nothing and reports unresolvable
/// variables as `NotDerivable`.
pub fn check(
    system: SystemId,
    mode: ScopeMode,
    env: &TypeEnv,
    s: &Type,
    t: &Type,
    fuel: Fuel,
) -> Result<CheckOutcome, CheckError> {
    if mode == ScopeMode::Strict {
        if !env.well_formed(ScopeMode::Strict) {
            return Err(CheckError::IllFormedEnv);
        }
        let names = env.name_set();
        for side in [s, t] {
            if let Some(x) = side.free_vars().into_iter().find(|x| !names.contains(x)) {
                return Err(CheckError::UnknownVariable(x));
            }
        }
    }
    let mut search = Search { system, mode, fuel: fuel.remaining() };
    Ok(match search.derive(env, s, t) {
        Step::Found(d) => CheckOutcome::Derivable(d),
        Step::NoRule => CheckOutcome::NotDerivable,
        Step::Out => CheckOutcome::FuelExhausted,
    })
}

enum Step {
    Found(Derivation),
    NoRule,
    Out,
}

struct Search {
    system: SystemId,
    mode: ScopeMode,
    fuel: u64,
}

impl Search {
    fn leaf(&self, rule: RuleTag, env: &TypeEnv, s: &Type, t: &Type) -> Derivation {
        Derivation::leaf(rule, Judgment::new(env.clone(), s.clone(), t.clone()))
    }

    fn derive(&mut self, env: &TypeEnv, s: &Type, t: &Type) -> Step {
        // Search depth is bounded only by fuel; grow the stack rather than
        // cap the recursion.
        stacker::maybe_grow(64 * 1024, 2 * 1024 * 1024, || self.derive_inner(env, s, t))
    }

    fn derive_inner(&mut self, env: &TypeEnv, s: &Type, t: &Type) -> Step {
        if self.fuel == 0 {
            return Step::Out;
        }
        self.fuel -= 1;

        // SA-Top.
        if *t == Type::Top && (self.mode == ScopeMode::Lax || s.well_scoped_in(env)) {
            return Step::Found(self.leaf(RuleTag::SaTop, env, s, t));
        }

        // SA-Refl-TVar.
        if let (Type::Var(x), Type::Var(y)) = (s, t) {
            if x == y && (self.mode == ScopeMode::Lax || env.binds(x)) {
                return Step::Found(self.leaf(RuleTag::SaReflTvar, env, s, t));
            }
        }

        // The system's variable rule.
        if let Type::Var(x) = s {
            if let Some(bound) = env.lookup(x) {
                let bound = bound.clone();
                return match self.system {
                    SystemId::Original => match self.derive(env, &bound, t) {
                        Step::Found(p) => Step::Found(Derivation::node(
                            RuleTag::SaTransTvar,
                            Judgment::new(env.clone(), s.clone(), t.clone()),
                            vec![p],
                        )),
                        other => other,
                    },
                    SystemId::Variant | SystemId::VariantPlus => {
                        if alpha_eq(&bound, t) {
                            return Step::Found(self.leaf(RuleTag::SaHyp, env, s, t));
                        }
                        // SA-Tr-TVar through the declared bound; its first
                        // premise is the hypothesis itself.
                        let hyp = self.leaf(RuleTag::SaHyp, env, s, &bound);
                        match self.derive(env, &bound, t) {
                            Step::Found(p2) => Step::Found(Derivation::node(
                                RuleTag::SaTrTvar,
                                Judgment::new(env.clone(), s.clone(), t.clone()),
                                vec![hyp, p2],
                            )),
                            other => other,
                        }
                    }
                };
            }
            // Variable with no hypothesis: nothing applies beyond the leaf
            // rules already tried.
            return Step::NoRule;
        }

        // SA-Arrow.
        if let (Type::Arrow(s1, s2), Type::Arrow(t1, t2)) = (s, t) {
            let p1 = match self.derive(env, t1, s1) {
                Step::Found(d) => d,
                other => return other,
            };
            let p2 = match self.derive(env, s2, t2) {
                Step::Found(d) => d,
                other => return other,
            };
            return Step::Found(Derivation::node(
                RuleTag::SaArrow,
                Judgment::new(env.clone(), s.clone(), t.clone()),
                vec![p1, p2],
            ));
        }

        // SA-All: rename both binders to one fresh name before comparing
        // the bodies under the extended environment.
        if let (
            Type::Forall { binder: x, bound: s1, body: s2 },
            Type::Forall { binder: y, bound: t1, body: t2 },
        ) = (s, t)
        {
            let mut avoid = env.name_set();
            avoid.extend(s.all_names());
            avoid.extend(t.all_names());
            let z = fresh_name(&avoid);
            let p1 = match self.derive(env, t1, s1) {
                Step::Found(d) => d,
                other => return other,
            };
            let inner_env = env
                .extended(Binding { name: z.clone(), bound: (**t1).clone() })
                .expect("fresh name cannot collide");
            let s2z = rename_free(s2, x, &z);
            let t2z = rename_free(t2, y, &z);
            let p2 = match self.derive(&inner_env, &s2z, &t2z) {
                Step::Found(d) => d,
                other => return other,
            };
            return Step::Found(Derivation::node(
                RuleTag::SaAll,
                Judgment::new(env.clone(), s.clone(), t.clone()),
                vec![p1, p2],
            ));
        }

        Step::NoRule
    }
}
