use proptest::prelude::*;

use shadow_arena::meta::enumerate_contexts;
use shadow_arena::qualifiers::{overlap, qual_sub, saturate, Name, Qualifier};
use shadow_arena::subtyping::{Type, TypingEnv};

/// Contexts of up to three bindings, shared across cases.
fn contexts() -> &'static [TypingEnv] {
    static CONTEXTS: std::sync::OnceLock<Vec<TypingEnv>> = std::sync::OnceLock::new();
    CONTEXTS.get_or_init(|| enumerate_contexts(3))
}

/// A qualifier over the context's variables chosen by the bits of `mask`.
fn pick(env: &TypingEnv, mask: u8) -> Qualifier {
    let names = env.qualifier_domain();
    let q = Qualifier::from_vars(names.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, n)| n.clone()));
    q.with_fresh(mask & 0x80 != 0)
}

fn instance() -> impl Strategy<Value = (usize, u8, u8, u8)> {
    (0..contexts().len(), any::<u8>(), any::<u8>(), any::<u8>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn saturation_is_extensive_monotone_idempotent((i, a, b, _) in instance()) {
        let env = &contexts()[i];
        let p = pick(env, a & b);
        let q = pick(env, a);
        let sp = saturate(env, &p).unwrap();
        let sq = saturate(env, &q).unwrap();
        prop_assert!(q.is_subset(&sq));
        prop_assert!(sp.is_subset(&sq));
        prop_assert_eq!(saturate(env, &sq).unwrap(), sq);
    }

    #[test]
    fn overlap_commutes_and_is_fresh((i, a, b, _) in instance()) {
        let env = &contexts()[i];
        let (p, q) = (pick(env, a), pick(env, b));
        let pq = overlap(env, &p, &q).unwrap();
        prop_assert!(pq.fresh);
        prop_assert_eq!(pq, overlap(env, &q, &p).unwrap());
    }

    #[test]
    fn subtyping_is_reflexive_and_transitive((i, a, b, c) in instance()) {
        let env = &contexts()[i];
        let (p, q, r) = (pick(env, a), pick(env, b), pick(env, c));
        prop_assert!(qual_sub(env, &p, &p));
        if qual_sub(env, &p, &q) && qual_sub(env, &q, &r) {
            prop_assert!(qual_sub(env, &p, &r), "{} <: {} <: {} under {}", p, q, r, env);
        }
    }

    #[test]
    fn identity_substitution(mask in any::<u8>(), x in 0usize..3) {
        let env = &contexts()[contexts().len() - 1];
        let q = pick(env, mask);
        let x = env.qualifier_domain()[x].clone();
        prop_assert_eq!(q.substitute_var(&x, &Qualifier::var(x.clone())), q);
    }
}

#[test]
fn all_fresh_contexts_use_plain_inclusion() {
    for n in 0..=4 {
        let mut env = TypingEnv::new();
        for i in 0..n {
            let name = Name::new(&format!("v{i}"));
            env.push_term(name, Type::Int.q(Qualifier::fresh_only())).unwrap();
        }
        for a in 0u8..(1 << n) {
            for b in 0u8..(1 << n) {
                for fa in [0, 0x80] {
                    for fb in [0, 0x80] {
                        let (p, q) = (pick(&env, a | fa), pick(&env, b | fb));
                        assert_eq!(qual_sub(&env, &p, &q), p.is_subset(&q), "{p} <: {q}");
                    }
                }
            }
        }
    }
}
