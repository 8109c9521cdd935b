//! The acceptance suite: ten desk-scale property checks, one test per
//! criterion, each printing a single PASS/FAIL line (run with
//! `cargo test --test acceptance -- --nocapture` to see them).

use std::io::Write as _;

use fsub_core::checker::{check, CheckOutcome, Fuel};
use fsub_core::rules::{
    parse_derivation, serialize_derivation, validate_derivation, Derivation, Judgment, RuleTag,
    SystemId,
};
use fsub_core::syntax::{alpha_eq, fresh_name, Binding, ScopeMode, TyVarName, Type, TypeEnv};
use fsub_core::testkit::{
    differential_run, enumerate_oracle, enumerate_strict_envs, enumerate_types, gen_env, gen_type,
    mix_seed, permutation_run, GenConfig, SplitMix64,
};
use fsub_core::transforms::{
    extra_rule_admissible, lax_to_strict, narrowing_original_audited, narrowing_variant_audited,
    orig_to_variant, reflexivity, transitivity_original_audited, transitivity_variant_audited,
    variant_to_orig, weakening, EnvSplit, TransformAudit,
};

fn report(number: u32, name: &str, result: Result<String, String>) {
    match result {
        Ok(detail) => println!("acceptance {number:02} {name}: PASS ({detail})"),
        Err(why) => {
            println!("acceptance {number:02} {name}: FAIL ({why})");
            panic!("criterion {number} ({name}) failed: {why}");
        }
    }
}

fn cfg(seed: u64, max_type_size: usize, max_env_len: usize, mode: ScopeMode) -> GenConfig {
    GenConfig::new(seed, max_type_size, max_env_len, mode)
}

fn derivable(
    system: SystemId,
    mode: ScopeMode,
    env: &TypeEnv,
    s: &Type,
    t: &Type,
) -> Option<Derivation> {
    match check(system, mode, env, s, t, Fuel::new(2000)).ok()? {
        CheckOutcome::Derivable(d) => Some(d),
        _ => None,
    }
}

/// A random environment with at least one binding.
fn nonempty_env(seed: u64, mode: ScopeMode) -> TypeEnv {
    let env = gen_env(&cfg(seed, 5, 3, mode));
    if env.is_empty() {
        let name = fresh_name(&env.name_set());
        env.extended(Binding { name, bound: Type::Top }).expect("fresh name")
    } else {
        env
    }
}

/// Two derivations sharing a cut type: `d1 : Γ |- S <: Q`, `d2 : Γ |- Q <: T`.
/// Random candidates first, then fallbacks that always exist (`S = Q`,
/// `T = Top`), so every seed yields a pair.
fn derivable_pair(system: SystemId, seed: u64) -> (TypeEnv, Derivation, Derivation) {
    let env = gen_env(&cfg(mix_seed(seed, 1), 6, 3, ScopeMode::Strict));
    let q = gen_type(&cfg(mix_seed(seed, 2), 6, 3, ScopeMode::Strict), &env);
    let mut d1 = None;
    for k in 0..3u64 {
        let s = gen_type(&cfg(mix_seed(seed, 10 + k), 6, 3, ScopeMode::Strict), &env);
        if let Some(d) = derivable(system, ScopeMode::Strict, &env, &s, &q) {
            d1 = Some(d);
            break;
        }
    }
    let d1 = d1.unwrap_or_else(|| {
        derivable(system, ScopeMode::Strict, &env, &q, &q).expect("reflexive instances derive")
    });
    let mut d2 = None;
    for k in 0..3u64 {
        let t = gen_type(&cfg(mix_seed(seed, 20 + k), 6, 3, ScopeMode::Strict), &env);
        if let Some(d) = derivable(system, ScopeMode::Strict, &env, &q, &t) {
            d2 = Some(d);
            break;
        }
    }
    let d2 = d2.unwrap_or_else(|| {
        derivable(system, ScopeMode::Strict, &env, &q, &Type::Top)
            .expect("everything is below Top")
    });
    (env, d1, d2)
}

/// A narrowing instance: a split around a random pivot, a derivation over
/// the whole environment, and a bound derivation `Γ1 |- P <: Q`.
fn narrowing_instance(system: SystemId, seed: u64) -> (EnvSplit, Derivation, Derivation) {
    let env = nonempty_env(mix_seed(seed, 1), ScopeMode::Strict);
    let mut rng = SplitMix64::new(mix_seed(seed, 2));
    let pivot_idx = rng.below(env.len() as u64) as usize;
    let pivot_name = env.entries()[pivot_idx].name.clone();
    let split = EnvSplit::around(&env, &pivot_name).expect("pivot drawn from the environment");
    let q = split.pivot.bound.clone();

    let mut dp = None;
    for k in 0..2u64 {
        let p = gen_type(&cfg(mix_seed(seed, 30 + k), 5, 3, ScopeMode::Strict), &split.prefix);
        if let Some(d) = derivable(system, ScopeMode::Strict, &split.prefix, &p, &q) {
            dp = Some(d);
            break;
        }
    }
    let dp = dp.unwrap_or_else(|| {
        derivable(system, ScopeMode::Strict, &split.prefix, &q, &q)
            .expect("reflexive instances derive")
    });

    let pivot_var = Type::Var(pivot_name);
    let candidates: Vec<(Type, Type)> = vec![
        (
            gen_type(&cfg(mix_seed(seed, 40), 5, 3, ScopeMode::Strict), &env),
            gen_type(&cfg(mix_seed(seed, 41), 5, 3, ScopeMode::Strict), &env),
        ),
        (pivot_var.clone(), q.clone()),
        (pivot_var, Type::Top),
    ];
    let d = candidates
        .into_iter()
        .find_map(|(m, n)| derivable(system, ScopeMode::Strict, &env, &m, &n))
        .expect("the pivot is below Top");
    (split, d, dp)
}

fn combine(total: &mut TransformAudit, audit: &TransformAudit) {
    total.transitivity_steps += audit.transitivity_steps;
    total.narrowing_steps += audit.narrowing_steps;
    total.measure_violations.extend(audit.measure_violations.iter().cloned());
    total.variant_var_head_cases += audit.variant_var_head_cases;
    total.variant_var_head_descents += audit.variant_var_head_descents;
    total.transitivity_calls_inside_narrowing += audit.transitivity_calls_inside_narrowing;
    total.extra_tags_in_admissibility_outputs += audit.extra_tags_in_admissibility_outputs;
}

#[test]
fn criterion_01_oracle_equivalence() {
    let result = (|| {
        let mut instances = 0u64;
        for env in enumerate_strict_envs(2, 3) {
            let names: Vec<TyVarName> = env.names().cloned().collect();
            let universe = enumerate_types(&names, 3);
            for s in &universe {
                for t in &universe {
                    instances += 1;
                    let out = check(SystemId::Original, ScopeMode::Strict, &env, s, t, Fuel::new(10_000))
                        .map_err(|e| format!("checker precondition failed: {e}"))?;
                    if matches!(out, CheckOutcome::FuelExhausted) {
                        return Err(format!("fuel exhausted on `{env}` |- `{s}` <: `{t}`"));
                    }
                    let oracle = enumerate_oracle(SystemId::Original, ScopeMode::Strict, &env, s, t, 8)
                        .map_err(|e| e.to_string())?;
                    if out.is_derivable() != !oracle.is_empty() {
                        return Err(format!(
                            "disagreement on `{env}` |- `{s}` <: `{t}`: checker {}, oracle found {}",
                            out.word(),
                            oracle.len()
                        ));
                    }
                    if let CheckOutcome::Derivable(d) = &out {
                        if !validate_derivation(d, SystemId::Original, ScopeMode::Strict).ok() {
                            return Err("checker returned an invalid derivation".into());
                        }
                    }
                }
            }
        }
        Ok(format!("{instances} instances, zero disagreements, zero fuel exhaustion"))
    })();
    report(1, "oracle-equivalence", result);
}

#[test]
fn criterion_02_transitivity_original() {
    const TRIALS: u64 = 10_000;
    let result = (|| {
        let mut total = TransformAudit::default();
        for i in 0..TRIALS {
            let (env, d1, d2) = derivable_pair(SystemId::Original, mix_seed(0x72A5, i));
            let s = d1.conclusion.left.clone();
            let t = d2.conclusion.right.clone();
            let (out, audit) = transitivity_original_audited(&d1, &d2, ScopeMode::Strict)
                .map_err(|e| format!("trial {i}: {e}"))?;
            if !validate_derivation(&out, SystemId::Original, ScopeMode::Strict).ok() {
                return Err(format!("trial {i}: output does not validate"));
            }
            if out.conclusion.env != env
                || !alpha_eq(&out.conclusion.left, &s)
                || !alpha_eq(&out.conclusion.right, &t)
            {
                return Err(format!("trial {i}: wrong conclusion {}", out.conclusion));
            }
            combine(&mut total, &audit);
        }
        if !total.measure_violations.is_empty() {
            return Err(format!(
                "{} measure violations, first: {}",
                total.measure_violations.len(),
                total.measure_violations[0]
            ));
        }
        Ok(format!(
            "{TRIALS} trials valid, {} transitivity steps, zero measure violations",
            total.transitivity_steps
        ))
    })();
    report(2, "transitivity-original", result);
}

#[test]
fn criterion_03_narrowing_original() {
    const TRIALS: u64 = 10_000;
    let result = (|| {
        let mut total = TransformAudit::default();
        for i in 0..TRIALS {
            let (split, d, dp) = narrowing_instance(SystemId::Original, mix_seed(0x9A44, i));
            let (out, audit) = narrowing_original_audited(&split, &d, &dp, ScopeMode::Strict)
                .map_err(|e| format!("trial {i}: {e}"))?;
            if !validate_derivation(&out, SystemId::Original, ScopeMode::Strict).ok() {
                return Err(format!("trial {i}: output does not validate"));
            }
            let expected_env = d
                .conclusion
                .env
                .with_bound_replaced(&split.pivot.name, dp.conclusion.left.clone())
                .expect("pivot is bound");
            if out.conclusion.env != expected_env
                || !alpha_eq(&out.conclusion.left, &d.conclusion.left)
                || !alpha_eq(&out.conclusion.right, &d.conclusion.right)
            {
                return Err(format!("trial {i}: wrong conclusion {}", out.conclusion));
            }
            combine(&mut total, &audit);
        }
        if !total.measure_violations.is_empty() {
            return Err(format!(
                "{} measure violations, first: {}",
                total.measure_violations.len(),
                total.measure_violations[0]
            ));
        }
        Ok(format!(
            "{TRIALS} trials valid, {} narrowing steps, zero measure violations",
            total.narrowing_steps
        ))
    })();
    report(3, "narrowing-original", result);
}

#[test]
fn criterion_04_variant_claims() {
    const TRIALS: u64 = 10_000;
    let result = (|| {
        let mut total = TransformAudit::default();
        let mut extra_outputs_scanned = 0u64;
        for i in 0..TRIALS {
            // (a) Variable-headed transitivity performs no descent into d1.
            let (_, d1, d2) = derivable_pair(SystemId::Variant, mix_seed(0x4A11, i));
            let (out, audit) = transitivity_variant_audited(&d1, &d2, ScopeMode::Strict)
                .map_err(|e| format!("trial {i}: transitivity: {e}"))?;
            if !validate_derivation(&out, SystemId::Variant, ScopeMode::Strict).ok() {
                return Err(format!("trial {i}: transitivity output does not validate"));
            }
            combine(&mut total, &audit);

            // (b) Narrowing never calls variant transitivity; (c) its
            // admissibility-built output carries no SA-Extra node.
            let (split, d, dp) = narrowing_instance(SystemId::Variant, mix_seed(0x4B22, i));
            let (out, audit) = narrowing_variant_audited(&split, &d, &dp, ScopeMode::Strict)
                .map_err(|e| format!("trial {i}: narrowing: {e}"))?;
            if !validate_derivation(&out, SystemId::Variant, ScopeMode::Strict).ok() {
                return Err(format!("trial {i}: narrowing output does not validate"));
            }
            if out.contains_tag(RuleTag::SaExtra) {
                return Err(format!("trial {i}: narrowing output contains SA-Extra"));
            }
            extra_outputs_scanned += 1;
            combine(&mut total, &audit);

            // (c) again, via the public admissibility entry point: restate
            // the bound swap as one extra-rule instance and discharge it.
            let narrowed_env = d
                .conclusion
                .env
                .with_bound_replaced(&split.pivot.name, dp.conclusion.left.clone())
                .expect("pivot is bound");
            let w = weakening(&dp, &narrowed_env, SystemId::Variant, ScopeMode::Strict)
                .map_err(|e| format!("trial {i}: weakening: {e}"))?;
            let hyp = Derivation::leaf(
                RuleTag::SaHyp,
                Judgment::new(
                    narrowed_env.clone(),
                    Type::Var(split.pivot.name.clone()),
                    dp.conclusion.left.clone(),
                ),
            );
            let d_xv = Derivation::node(
                RuleTag::SaTrTvar,
                Judgment::new(
                    narrowed_env,
                    Type::Var(split.pivot.name.clone()),
                    split.pivot.bound.clone(),
                ),
                vec![hyp, w],
            );
            let spliced = extra_rule_admissible(&d_xv, &d, ScopeMode::Strict)
                .map_err(|e| format!("trial {i}: admissibility: {e}"))?;
            if spliced.contains_tag(RuleTag::SaExtra) {
                return Err(format!("trial {i}: admissibility output contains SA-Extra"));
            }
            extra_outputs_scanned += 1;
        }
        if total.variant_var_head_descents != 0 {
            return Err(format!("{} descents into d1 at variable heads", total.variant_var_head_descents));
        }
        if total.variant_var_head_cases == 0 {
            return Err("no variable-headed cases were exercised".into());
        }
        if total.transitivity_calls_inside_narrowing != 0 {
            return Err(format!(
                "{} transitivity calls inside narrowing",
                total.transitivity_calls_inside_narrowing
            ));
        }
        if total.extra_tags_in_admissibility_outputs != 0 {
            return Err("SA-Extra tags survived admissibility".into());
        }
        Ok(format!(
            "{TRIALS} trials; {} variable-headed cases, zero descents; zero transitivity calls in narrowing; {} outputs free of SA-Extra",
            total.variant_var_head_cases, extra_outputs_scanned
        ))
    })();
    report(4, "variant-claims", result);
}

#[test]
fn criterion_05_cross_system_differential() {
    const TRIALS: u64 = 10_000;
    let result = (|| {
        let config = cfg(0xD1FF, 6, 3, ScopeMode::Strict);
        let report = differential_run(
            &config,
            (SystemId::Original, SystemId::Variant),
            Fuel::new(1000),
            TRIALS,
        );
        if !report.disagreements.is_empty() {
            let dir = std::path::PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
            let path = dir.join("differential_counterexamples.sexp");
            let mut f = std::fs::File::create(&path)
                .map_err(|e| format!("cannot ship counterexamples: {e}"))?;
            writeln!(f, "{}", report.render_sexp()).map_err(|e| e.to_string())?;
            return Err(format!(
                "{} disagreement(s); shrunk counterexamples shipped to {}",
                report.disagreements.len(),
                path.display()
            ));
        }
        let limit = TRIALS / 100;
        if report.fuel_exhausted >= limit {
            return Err(format!(
                "fuel exhausted on {} of {TRIALS} trials (limit {limit})",
                report.fuel_exhausted
            ));
        }
        Ok(format!(
            "{TRIALS} trials, {} agreed, {} fuel-exhausted, zero disagreements",
            report.agree, report.fuel_exhausted
        ))
    })();
    report(5, "cross-system-differential", result);
}

#[test]
fn criterion_06_translations() {
    const TRIALS: u64 = 10_000;
    let result = (|| {
        for i in 0..TRIALS {
            let seed = mix_seed(0x77AB, i);
            let env = gen_env(&cfg(mix_seed(seed, 1), 6, 3, ScopeMode::Strict));
            let s = gen_type(&cfg(mix_seed(seed, 2), 6, 3, ScopeMode::Strict), &env);
            let t = gen_type(&cfg(mix_seed(seed, 3), 6, 3, ScopeMode::Strict), &env);

            let d_orig = derivable(SystemId::Original, ScopeMode::Strict, &env, &s, &t)
                .or_else(|| derivable(SystemId::Original, ScopeMode::Strict, &env, &s, &Type::Top))
                .expect("everything is below Top");
            let v = orig_to_variant(&d_orig, ScopeMode::Strict)
                .map_err(|e| format!("trial {i}: to-variant: {e}"))?;
            if !validate_derivation(&v, SystemId::Variant, ScopeMode::Strict).ok() {
                return Err(format!("trial {i}: translated derivation invalid in variant"));
            }
            if !v.conclusion.alpha_matches(&d_orig.conclusion) {
                return Err(format!("trial {i}: to-variant changed the conclusion"));
            }

            let d_var = derivable(SystemId::Variant, ScopeMode::Strict, &env, &s, &t)
                .or_else(|| derivable(SystemId::Variant, ScopeMode::Strict, &env, &s, &Type::Top))
                .expect("everything is below Top");
            let o = variant_to_orig(&d_var, ScopeMode::Strict)
                .map_err(|e| format!("trial {i}: to-original: {e}"))?;
            if !validate_derivation(&o, SystemId::Original, ScopeMode::Strict).ok() {
                return Err(format!("trial {i}: translated derivation invalid in original"));
            }
            if !o.conclusion.alpha_matches(&d_var.conclusion) {
                return Err(format!("trial {i}: to-original changed the conclusion"));
            }
        }
        Ok(format!("{TRIALS} translations each way, all valid, conclusions preserved"))
    })();
    report(6, "translations", result);
}

#[test]
fn criterion_07_permutation_invariance() {
    const TRIALS: u64 = 1000;
    let result = (|| {
        let config = cfg(0x9E4A, 5, 4, ScopeMode::Lax);
        let report = permutation_run(&config, TRIALS, Fuel::new(1000))
            .map_err(|e| e.to_string())?;
        if !report.disagreements.is_empty() {
            return Err(format!(
                "{} permutation disagreement(s): {}",
                report.disagreements.len(),
                report.disagreements[0]
            ));
        }
        Ok(format!(
            "{TRIALS} trials, {} agreed, {} fuel-exhausted, zero disagreements",
            report.agree, report.fuel_exhausted
        ))
    })();
    report(7, "permutation-invariance", result);
}

#[test]
fn criterion_08_lax_to_strict_transfer() {
    const TRIALS: u64 = 1000;
    let result = (|| {
        for i in 0..TRIALS {
            let seed = mix_seed(0x1A25, i);
            // Strict-well-formed instance, deliberately checked laxly.
            let env = gen_env(&cfg(mix_seed(seed, 1), 5, 3, ScopeMode::Strict));
            let s = gen_type(&cfg(mix_seed(seed, 2), 5, 3, ScopeMode::Strict), &env);
            let t = gen_type(&cfg(mix_seed(seed, 3), 5, 3, ScopeMode::Strict), &env);
            let d = derivable(SystemId::Original, ScopeMode::Lax, &env, &s, &t)
                .or_else(|| derivable(SystemId::Original, ScopeMode::Lax, &env, &s, &Type::Top))
                .expect("everything is below Top");
            let out = lax_to_strict(&d, SystemId::Original)
                .map_err(|e| format!("trial {i}: {e}"))?;
            if !validate_derivation(&out, SystemId::Original, ScopeMode::Strict).ok() {
                return Err(format!("trial {i}: transferred derivation invalid strictly"));
            }
            if out != d {
                return Err(format!("trial {i}: transfer changed the tree"));
            }
        }
        Ok(format!("{TRIALS} lax derivations transferred unchanged and strict-valid"))
    })();
    report(8, "lax-to-strict-transfer", result);
}

#[test]
fn criterion_09_reflexivity() {
    let result = (|| {
        let mut instances = 0u64;
        for env in enumerate_strict_envs(2, 3) {
            let names: Vec<TyVarName> = env.names().cloned().collect();
            for t in enumerate_types(&names, 5) {
                instances += 1;
                let d = reflexivity(&env, &t, ScopeMode::Strict)
                    .map_err(|e| format!("`{env}` |- `{t}`: {e}"))?;
                if !validate_derivation(&d, SystemId::Original, ScopeMode::Strict).ok() {
                    return Err(format!("`{env}` |- `{t}`: reflexivity output invalid"));
                }
                if d.conclusion != Judgment::new(env.clone(), t.clone(), t.clone()) {
                    return Err(format!("`{env}` |- `{t}`: wrong conclusion"));
                }
            }
        }
        Ok(format!("{instances} reflexive derivations, all valid"))
    })();
    report(9, "reflexivity", result);
}

#[test]
fn criterion_10_serialization_round_trip() {
    const TRIALS: u64 = 10_000;
    let result = (|| {
        for i in 0..TRIALS {
            let seed = mix_seed(0x5E71, i);
            let system = if i % 2 == 0 { SystemId::Original } else { SystemId::Variant };
            let mode = if i % 4 < 2 { ScopeMode::Strict } else { ScopeMode::Lax };
            let env = gen_env(&cfg(mix_seed(seed, 1), 6, 3, mode));
            let s = gen_type(&cfg(mix_seed(seed, 2), 6, 3, mode), &env);
            let t = gen_type(&cfg(mix_seed(seed, 3), 6, 3, mode), &env);
            let d = derivable(system, mode, &env, &s, &t)
                .or_else(|| derivable(system, mode, &env, &s, &Type::Top))
                .expect("everything is below Top");
            let text = serialize_derivation(&d);
            let back = parse_derivation(&text).map_err(|e| format!("trial {i}: {e}"))?;
            if back != d {
                return Err(format!("trial {i}: parse(serialize(d)) differs from d"));
            }
            if serialize_derivation(&back) != text {
                return Err(format!("trial {i}: second serialization differs byte-wise"));
            }
        }
        Ok(format!("{TRIALS} derivations round-tripped byte-exact"))
    })();
    report(10, "serialization-round-trip", result);
}
