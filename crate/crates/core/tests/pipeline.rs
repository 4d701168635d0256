use cdrum_core::data::History;
use cdrum_core::lptest::{build_e, build_e_by_choice, DEFAULT_CAP};
use cdrum_core::recovery::build_flow_graph;
use cdrum_core::{
    check_cdrum, check_si_cdrum, evaluate_representation, fixtures, load_dataset, mobius_inverse, random_mixture,
    recover_representation, sample_choices, save_dataset, truncated_mobius, ChoiceSource, Menu, ObservationDomain,
    RandomJointChoiceRule, Rational, Scalar, Universe,
};
use num_traits::{One, Zero};

fn r(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

#[test]
fn datasets_survive_the_filesystem() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("example4.json");
    let p = fixtures::example4::<Rational>();
    save_dataset(&p, &file).unwrap();
    assert_eq!(load_dataset::<Rational>(&file, 0.0).unwrap(), p);

    let float = dir.path().join("mixture.json");
    let m = random_mixture::<f64>(&Universe::letters(3), 2, 5, 3).unwrap().rule;
    save_dataset(&m, &float).unwrap();
    let back = load_dataset::<f64>(&float, 1e-9).unwrap();
    assert_eq!(back.sup_distance(&m), 0.0);
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_dataset::<f64>(dir.path().join("absent.json"), 1e-9).is_err());
}

#[test]
fn example2_recovers_the_stated_representation() {
    let p = fixtures::example2::<Rational>();
    let rep = recover_representation(&p, 0.0).unwrap();
    let half = r(1, 2);
    let x_first: Rational = rep.nu.support().filter(|(o, _)| o.ranking()[0] == 0).map(|(_, w)| w.clone()).sum();
    assert_eq!(x_first, half);
    assert_eq!(rep.nu.total(), Rational::one());
    assert!(rep.is_state_independent());
    assert_eq!(evaluate_representation(&rep, &p.domain()).unwrap(), p);

    // after x every kernel ranks x first, after y every kernel ranks y first
    for (h, k) in &rep.transitions[0].kernels {
        let chosen = h.choices[0];
        for (o, w) in k.support() {
            assert!(w.is_zero() || o.ranking()[0] == chosen, "{:?}", h);
        }
    }
}

#[test]
fn example4_needs_state_dependence() {
    let p = fixtures::example4::<Rational>();
    assert!(check_cdrum(&p, 0.0).unwrap().holds);
    assert!(!check_si_cdrum(&p, 0.0).unwrap().holds);
    let rep = recover_representation(&p, 0.0).unwrap();
    assert!(!rep.is_state_independent());
    assert_eq!(evaluate_representation(&rep, &p.domain()).unwrap(), p);
}

#[test]
fn null_history_graph_has_eight_nodes_and_conserves_flow() {
    let u = Universe::letters(3);
    let p = random_mixture::<Rational>(&u, 2, 4, 21).unwrap().rule;
    let q = truncated_mobius(&p, 1, 0.0).unwrap();
    let g = build_flow_graph(&q, &History::null());
    let full = u.full();
    assert_eq!(g.outflow(), Rational::one());
    let nodes: Vec<Menu> = (0u32..8).map(Menu).collect();
    for &a in &nodes {
        let out: Rational = (0..3).filter(|&y| a.contains(y)).map(|y| g.capacity(a, y).clone()).sum();
        let inflow: Rational = (0..3)
            .filter(|&y| !a.contains(y))
            .map(|y| g.capacity(a.with(y), y).clone())
            .sum();
        if a == full {
            assert_eq!(out, Rational::one());
        } else if a.is_empty() {
            assert_eq!(inflow, Rational::one());
        } else {
            assert_eq!(out, inflow, "node {}", a.0);
        }
    }
    for y in 0..3 {
        let first: Rational = (0..3).map(|z| p.p(&[full, full], &[y, z])).sum();
        assert_eq!(g.capacity(full, y), &first);
    }
}

#[test]
fn extreme_point_patterns() {
    // per-choice rows count n(n!)^2; the full product of orders has (n!)^(n+1) distinct patterns
    for (n, by_choice_rows, distinct) in [(2usize, 8usize, 8usize), (3, 108, 1296)] {
        let u = Universe::letters(n);
        let d = ObservationDomain::full(&u, 2);
        assert_eq!(build_e_by_choice(&u, &d, DEFAULT_CAP).unwrap().rows(), by_choice_rows);
        let all = build_e(&u, &d, true).unwrap();
        assert_eq!(all.rows(), distinct);
        assert_eq!(all.distinct_patterns().len(), distinct);
    }
}

#[test]
fn a_million_agents_reproduce_example2() {
    let p = fixtures::example2::<f64>();
    let rep = recover_representation(&p, 1e-12).unwrap();
    let sampled: RandomJointChoiceRule<f64> =
        sample_choices(&ChoiceSource::Representation(&rep), &p.domain(), 1_000_000, 2024).unwrap();
    assert!(sampled.sup_distance(&p) <= 0.005, "gap {}", sampled.sup_distance(&p));
    for (_, block) in sampled.blocks() {
        assert_eq!(block.iter().sum::<f64>(), 1.0);
    }
}

#[test]
fn mobius_of_example2_matches_the_table() {
    let p = fixtures::example2::<Rational>();
    let q = mobius_inverse(&p).unwrap();
    let full = p.universe().full();
    assert_eq!(q.get(&[full, full], &[0, 0]), &r(1, 2));
    assert_eq!(q.get(&[full, full], &[0, 1]), &Rational::zero());
}
