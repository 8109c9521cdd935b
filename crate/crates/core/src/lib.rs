//! A subtyping kernel for the pure type language of System F<: (bounded
//! quantification, no records): the fragment known as PoplMark Challenge 1A.
//!
//! The crate provides:
//!
//! * [`syntax`] — types, type environments, alpha-equivalence, scoping;
//! * [`rules`] — two rival rule systems, explicit derivation trees,
//!   node-by-node validation, and a bit-exact s-expression format;
//! * [`checker`] — fuel-bounded subtype checking that produces derivations;
//! * [`transforms`] — the metatheory (reflexivity, weakening, transitivity,
//!   narrowing, admissibility of an extra rule, system translations) as
//!   executable derivation-to-derivation constructions;
//! * [`testkit`] — a brute-force derivation enumerator, deterministic random
//!   generators with shrinking, and differential/permutation harnesses.

pub mod checker;
pub mod rules;
pub mod syntax;
pub mod testkit;
pub mod transforms;

pub use checker::{check, CheckError, CheckOutcome, Fuel};
pub use rules::{
    parse_derivation, serialize_derivation, validate_derivation, Derivation,
    DerivationParseError, Judgment, RuleTag, SystemId, ValidationReport,
};
pub use syntax::{
    alpha_eq, fresh_name, parse_env, parse_type, render_env, render_type, Binding, ScopeMode,
    SyntaxError, TyVarName, Type, TypeEnv,
};
pub use testkit::{
    differential_run, enumerate_oracle, gen_env, gen_type, permutation_run, shrink_instance,
    Counterexample, DiffReport, GenConfig, TestkitError,
};
pub use transforms::{
    extra_rule_admissible, lax_to_strict, narrowing_original, narrowing_variant, orig_to_variant,
    reflexivity, transitivity_original, transitivity_variant, variant_to_orig, weakening,
    EnvSplit, TransformAudit, TransformError,
};
