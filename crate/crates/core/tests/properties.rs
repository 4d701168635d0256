use cdrum_core::io::{dataset_to_string, parse_dataset};
use cdrum_core::{
    check_cdrum, eval_habit_logit, evaluate_representation, identify_habit_logit, mobius_inverse, mobius_reconstruct,
    perturb, random_mixture, recover_representation, sample_choices, test_cdrum_facet, test_cdrum_vertex,
    verify_representation, ChoiceSource, HabitLogitParams, ObservationDomain, Rational, Scalar, TestOptions,
    Universe,
};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn mixtures_are_consistent_and_recoverable(n in 2usize..=3, periods in 1usize..=3, k in 1usize..=5, seed: u64) {
        let u = Universe::letters(n);
        let p = random_mixture::<Rational>(&u, periods, k, seed).unwrap().rule;
        prop_assert!(check_cdrum(&p, 0.0).unwrap().holds);
        let rep = recover_representation(&p, 0.0).unwrap();
        prop_assert_eq!(verify_representation(&rep, &p).unwrap(), 0.0);
        prop_assert_eq!(evaluate_representation(&rep, &p.domain()).unwrap(), p);
    }

    #[test]
    fn mobius_round_trip(n in 1usize..=3, periods in 1usize..=2, k in 1usize..=4, seed: u64) {
        let p = random_mixture::<Rational>(&Universe::letters(n), periods, k, seed).unwrap().rule;
        let q = mobius_inverse(&p).unwrap();
        prop_assert_eq!(mobius_reconstruct(&q).to_rule(0.0).unwrap(), p);
    }

    #[test]
    fn mobius_is_linear(seed: u64, alpha in 0i64..=8) {
        let u = Universe::letters(3);
        let a = random_mixture::<Rational>(&u, 2, 2, seed).unwrap().rule;
        let b = random_mixture::<Rational>(&u, 2, 3, seed.wrapping_add(1)).unwrap().rule;
        let w = Rational::from_ratio(alpha, 8);
        let mixed = mobius_inverse(&a.mix(&b, &w).unwrap()).unwrap();
        let (qa, qb) = (mobius_inverse(&a).unwrap(), mobius_inverse(&b).unwrap());
        for (menus, choices, v) in mixed.cells() {
            let expect = w.clone() * qa.get(&menus.0, &choices).clone()
                + (Rational::from_ratio(1, 1) - w.clone()) * qb.get(&menus.0, &choices).clone();
            prop_assert_eq!(v, &expect);
        }
    }

    #[test]
    fn relabeling_preserves_the_verdict(seed: u64, eps in 0u32..=3) {
        let u = Universe::letters(3);
        let mut p = random_mixture::<Rational>(&u, 2, 3, seed).unwrap().rule;
        if eps > 0 {
            p = perturb(&p, eps as f64 / 10.0, seed).unwrap();
        }
        let verdict = check_cdrum(&p, 0.0).unwrap().holds;
        for perm in [[1, 2, 0], [2, 1, 0], [0, 2, 1]] {
            prop_assert_eq!(check_cdrum(&p.relabel(&perm), 0.0).unwrap().holds, verdict);
        }
    }

    #[test]
    fn perturbation_stays_a_rule(seed: u64, eps in 0u32..=10) {
        let p = random_mixture::<Rational>(&Universe::letters(3), 2, 4, seed).unwrap().rule;
        let q = perturb(&p, eps as f64 / 10.0, seed).unwrap();
        for (_, block) in q.blocks() {
            prop_assert_eq!(block.iter().cloned().sum::<Rational>(), Rational::from_ratio(1, 1));
        }
        if eps == 0 {
            prop_assert_eq!(q, p);
        }
    }

    #[test]
    fn datasets_round_trip_byte_exact(n in 1usize..=3, periods in 1usize..=2, seed: u64) {
        let p = random_mixture::<Rational>(&Universe::letters(n), periods, 3, seed).unwrap().rule;
        let text = dataset_to_string(&p);
        let back = parse_dataset::<Rational>(&text, 0.0).unwrap();
        prop_assert_eq!(dataset_to_string(&back), text);
        prop_assert_eq!(back, p.clone());
        let float = p.convert::<f64>();
        let text = dataset_to_string(&float);
        prop_assert_eq!(dataset_to_string(&parse_dataset::<f64>(&text, 1e-9).unwrap()), text);
    }

    #[test]
    fn sampled_frequencies_sum_to_one(seed: u64, agents in 1usize..200) {
        let p = random_mixture::<Rational>(&Universe::letters(3), 2, 3, seed).unwrap().rule;
        let rep = recover_representation(&p, 0.0).unwrap();
        let s = sample_choices(&ChoiceSource::Representation(&rep), &p.domain(), agents, seed).unwrap();
        for (_, block) in s.blocks() {
            prop_assert_eq!(block.iter().cloned().sum::<Rational>(), Rational::from_ratio(1, 1));
        }
        let again = sample_choices(&ChoiceSource::Representation(&rep), &p.domain(), agents, seed).unwrap();
        prop_assert_eq!(s, again);
    }

    #[test]
    fn habit_identification_inverts_evaluation(
        v in proptest::collection::vec(-2.0f64..2.0, 3),
        c in proptest::collection::vec(-1.0f64..2.0, 3),
    ) {
        let mut v = v;
        let mut c: Vec<Vec<f64>> = c.into_iter().map(|x| vec![x]).collect();
        v[0] = 0.0;
        c[0] = vec![0.0];
        let params = HabitLogitParams::new(Universe::letters(3), 0, v.clone(), c.clone()).unwrap();
        let ccs = eval_habit_logit(&params, &ObservationDomain::full(params.universe(), 2)).unwrap();
        let back = identify_habit_logit(&ccs, 0).unwrap();
        for x in 0..3 {
            prop_assert!((back.v(x) - v[x]).abs() <= 1e-12);
            prop_assert!((back.c(x, 1) - c[x][0]).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn both_tests_agree_with_the_axioms(seed: u64, perturbed: bool) {
        let u = Universe::letters(3);
        let mut p = random_mixture::<Rational>(&u, 2, 4, seed).unwrap().rule;
        if perturbed {
            p = perturb(&p, 0.2, seed).unwrap();
        }
        let holds = check_cdrum(&p, 0.0).unwrap().holds;
        let pf = p.convert::<f64>();
        let options = TestOptions::default();
        prop_assert_eq!(test_cdrum_vertex(&pf, &options).unwrap().feasible, holds);
        prop_assert_eq!(test_cdrum_facet(&pf, &options).unwrap().feasible, holds);
        prop_assert_eq!(test_cdrum_facet(&p, &options).unwrap().exact_feasible, Some(holds));
    }
}
