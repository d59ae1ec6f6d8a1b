//! Property tests for the execution semantics and the feature encoding.

use proptest::prelude::*;

use reconcile_core::fixtures::{fetch_pair, BUILTIN};
use reconcile_core::ground::{ground, Plan, PlanStep};
use reconcile_core::pddl::{parse_domain, parse_problem};
use reconcile_core::space::{apply_edits, gamma, model_delta, Edit};

fn fixture_index() -> impl Strategy<Value = usize> {
    0..BUILTIN.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Whenever progression is defined, the result keeps everything not
    /// deleted and gains everything added.
    #[test]
    fn progress_monotone_in_effects(fi in fixture_index(), walk in proptest::collection::vec(0usize..64, 0..8)) {
        let task = ground(&BUILTIN[fi].model().unwrap());
        let mut state = task.init.clone();
        for pick in walk {
            if task.actions.is_empty() { break; }
            let ai = pick % task.actions.len();
            if let Some(next) = task.progress(&state, ai) {
                let a = &task.actions[ai];
                for f in a.add.iter() {
                    prop_assert!(next.contains(f));
                }
                for f in state.iter() {
                    if !a.del.contains(f) {
                        prop_assert!(next.contains(f));
                    }
                }
                state = next;
            }
        }
    }

    /// Step-by-step folding equals whole-plan evaluation (the cumulative
    /// transition recursion).
    #[test]
    fn cumulative_progression_is_a_fold(fi in fixture_index(), picks in proptest::collection::vec(0usize..64, 0..10)) {
        let task = ground(&BUILTIN[fi].model().unwrap());
        if task.actions.is_empty() { return Ok(()); }
        let steps: Vec<PlanStep> = picks.iter().map(|&p| task.actions[p % task.actions.len()].to_step()).collect();
        let plan = Plan { steps };

        let whole = task.run(&plan);
        let mut folded = Some(task.init.clone());
        for step in &plan.steps {
            folded = folded.and_then(|s| {
                let idx = task.resolve(step)?;
                task.progress(&s, idx)
            });
        }
        prop_assert_eq!(whole, folded);
    }

    /// Applying a set of edits is order-independent: any permutation of
    /// singleton applications lands on the same state.
    #[test]
    fn apply_edits_commutes(perm in proptest::collection::vec(0usize..100, 3), take in 1usize..=3) {
        let (robot, human) = fetch_pair();
        let hs = gamma(&human);
        let delta: Vec<Edit> = model_delta(&hs, &gamma(&robot)).into_iter().collect();
        let chosen: Vec<&Edit> = {
            let mut idx: Vec<usize> = (0..delta.len()).collect();
            // permute by the random keys
            idx.sort_by_key(|&i| perm[i % perm.len()].wrapping_mul(31).wrapping_add(i));
            idx.into_iter().take(take).map(|i| &delta[i]).collect()
        };
        let at_once = apply_edits(&hs, chosen.iter().copied()).unwrap();
        let mut stepped = hs.clone();
        for e in &chosen {
            stepped = apply_edits(&stepped, [*e]).unwrap();
        }
        prop_assert_eq!(at_once, stepped);
    }

    /// The parser either rejects mutated fixture text or yields a model
    /// that satisfies every structural invariant.
    #[test]
    fn parser_never_accepts_invalid_models(fi in fixture_index(), cut in 0usize..2000, flip in 0usize..2000, ch in proptest::char::range('(', 'z')) {
        let f = &BUILTIN[fi];
        let mut text = f.domain_text.to_string();
        if !text.is_empty() {
            let cut = cut % text.len();
            if text.is_char_boundary(cut) {
                text.truncate(cut.max(1));
            }
        }
        let mut bytes = text.into_bytes();
        if !bytes.is_empty() {
            let at = flip % bytes.len();
            bytes[at] = ch as u8;
        }
        let mutated = String::from_utf8_lossy(&bytes).into_owned();
        if let Ok(dom) = parse_domain(&mutated, "fuzz.pddl") {
            if let Ok(model) = parse_problem(f.problem_text, "fuzz-p.pddl", &dom) {
                prop_assert!(model.validate().is_ok());
            }
        }
    }

    /// Gamma distinguishes mutated models from their sources.
    #[test]
    fn gamma_injective_under_mutation(fi in fixture_index(), seed in 0u64..500) {
        use reconcile_core::perturb::{inject, FaultSpec};
        let model = BUILTIN[fi].model().unwrap();
        if let Ok(mutant) = inject(&model, &FaultSpec::removals(seed, 2)) {
            prop_assert_ne!(gamma(&mutant), gamma(&model));
            prop_assert_ne!(mutant, model);
        }
    }
}
