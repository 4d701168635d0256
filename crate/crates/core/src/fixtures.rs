//! Exact rules for the worked examples and a few hand-built violations.

use std::collections::BTreeMap;

use crate::data::{choice_index, MenuSequence, ObservationDomain, RandomJointChoiceRule};
use crate::lattice::{Alt, LinearOrder, Menu, Universe};
use crate::scalar::Scalar;
use crate::simulate::{extreme_point_rule, ExtremePoint};

fn half<S: Scalar>() -> S {
    S::from_ratio(1, 2)
}

fn order(ranking: &[Alt]) -> LinearOrder {
    LinearOrder::new(ranking.to_vec()).expect("valid ranking")
}

/// Perfect correlation from habit: half the population ranks `x` first, half `y`,
/// and whoever consumes an alternative ranks it first next period.
pub fn example2<S: Scalar>() -> RandomJointChoiceRule<S> {
    let u = Universe::new(["x", "y"]).unwrap();
    let habit = vec![order(&[0, 1]), order(&[1, 0])];
    let components = vec![
        (half(), ExtremePoint::two_period(order(&[0, 1]), habit.clone())),
        (half(), ExtremePoint::two_period(order(&[1, 0]), habit)),
    ];
    extreme_point_rule(&u, &ObservationDomain::full(&u, 2), &components).unwrap()
}

/// The same behavior from persistent tastes: each agent keeps their first-period ranking.
pub fn example3<S: Scalar>() -> RandomJointChoiceRule<S> {
    let u = Universe::new(["rain_coat", "tee_shirt"]).unwrap();
    let components = [[0, 1], [1, 0]]
        .iter()
        .map(|r| (half(), ExtremePoint::two_period(order(r), vec![order(r), order(r)])))
        .collect::<Vec<_>>();
    extreme_point_rule(&u, &ObservationDomain::full(&u, 2), &components).unwrap()
}

/// Half rank `x≻y≻z`, half `z≻y≻x`, and rankings never change.
pub fn example4<S: Scalar>() -> RandomJointChoiceRule<S> {
    let u = Universe::new(["x", "y", "z"]).unwrap();
    let components = [[0, 1, 2], [2, 1, 0]]
        .iter()
        .map(|r| (half(), ExtremePoint::two_period(order(r), vec![order(r); 3])))
        .collect::<Vec<_>>();
    extreme_point_rule(&u, &ObservationDomain::full(&u, 2), &components).unwrap()
}

/// Waning self control over `{x, c}`: cake `c` is resisted the first time it is on
/// the menu and taken the second time.
pub fn example1<S: Scalar>() -> RandomJointChoiceRule<S> {
    let u = Universe::new(["x", "c"]).unwrap();
    let (x, c) = (0, 1);
    let only_x = Menu::singleton(x);
    RandomJointChoiceRule::from_fn(&u, &ObservationDomain::full(&u, 2), 0.0, |menus, choices| {
        let (a, b) = (menus.0[0], menus.0[1]);
        let first = if a.contains(x) { x } else { c };
        let second = if !b.contains(c) {
            x
        } else if !b.contains(x) || a != only_x {
            c
        } else {
            x
        };
        if choices == [first, second] {
            S::one()
        } else {
            S::zero()
        }
    })
    .unwrap()
}

/// A single ranking applied in every period.
pub fn deterministic<S: Scalar>(universe: &Universe, ranking: &[Alt], periods: usize) -> RandomJointChoiceRule<S> {
    let o = order(ranking);
    RandomJointChoiceRule::from_fn(universe, &ObservationDomain::full(universe, periods), 0.0, |menus, choices| {
        if menus.0.iter().zip(choices).all(|(m, &c)| o.best_in(*m) == c) {
            S::one()
        } else {
            S::zero()
        }
    })
    .unwrap()
}

/// [`example2`] with the `({x,y},{x})` block shifted so the first-period marginal moves.
pub fn marginality_violation<S: Scalar>() -> RandomJointChoiceRule<S> {
    let p = example2::<S>();
    let u = p.universe().clone();
    let target = MenuSequence(vec![u.full(), u.menu(&["x"]).unwrap()]);
    let mut table: BTreeMap<MenuSequence, Vec<S>> = p.blocks().map(|(m, b)| (m.clone(), b.to_vec())).collect();
    let block = table.get_mut(&target).unwrap();
    block[choice_index(2, &[0, 0])] = S::from_ratio(3, 5);
    block[choice_index(2, &[1, 0])] = S::from_ratio(2, 5);
    RandomJointChoiceRule::from_table(u, 2, table, 0.0).unwrap().rule
}

/// Independent periods sharing a static rule in which adding `c` raises the share of `a`.
pub fn attraction_effect<S: Scalar>() -> RandomJointChoiceRule<S> {
    let u = Universe::letters(3);
    let static_rule = |x: Alt, m: Menu| -> S {
        match (m.bits(), x) {
            (0b111, 0) => S::from_ratio(3, 5),
            (0b111, _) => S::from_ratio(1, 5),
            _ => S::from_ratio(1, m.len() as i64),
        }
    };
    RandomJointChoiceRule::from_fn(&u, &ObservationDomain::full(&u, 2), 0.0, |menus, choices| {
        static_rule(choices[0], menus.0[0]) * static_rule(choices[1], menus.0[1])
    })
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn example2_matches_the_printed_tables() {
        let p = example2::<Rational>();
        let u = p.universe();
        let xy = u.full();
        let x = u.menu(&["x"]).unwrap();
        assert_eq!(p.p(&[xy, xy], &[0, 0]), r(1, 2));
        assert_eq!(p.p(&[xy, xy], &[0, 1]), r(0, 1));
        assert_eq!(p.p(&[xy, xy], &[1, 0]), r(0, 1));
        assert_eq!(p.p(&[xy, xy], &[1, 1]), r(1, 2));
        assert_eq!(p.p(&[xy, x], &[0, 0]), r(1, 2));
        assert_eq!(p.p(&[xy, x], &[1, 0]), r(1, 2));
    }

    #[test]
    fn example3_matches_example2_on_the_printed_tables() {
        let p2 = example2::<Rational>();
        let p3 = example3::<Rational>();
        let full = p2.universe().full();
        for ((m2, b2), (m3, b3)) in p2.blocks().zip(p3.blocks()) {
            assert_eq!(m2, m3);
            if m2.0[0] == full {
                assert_eq!(b2, b3);
            }
        }
        // a forced first choice separates habit from persistent tastes
        let x = Menu::singleton(0);
        assert_eq!(p2.p(&[x, full], &[0, 0]), r(1, 1));
        assert_eq!(p3.p(&[x, full], &[0, 0]), r(1, 2));
    }

    #[test]
    fn example4_matches_the_printed_tables() {
        let p = example4::<Rational>();
        let u = p.universe();
        let xy = u.menu(&["x", "y"]).unwrap();
        let yz = u.menu(&["y", "z"]).unwrap();
        assert_eq!(p.p(&[xy, xy], &[0, 0]), r(1, 2));
        assert_eq!(p.p(&[xy, xy], &[1, 1]), r(1, 2));
        assert_eq!(p.p(&[yz, xy], &[1, 0]), r(1, 2));
        assert_eq!(p.p(&[yz, xy], &[2, 1]), r(1, 2));
    }

    #[test]
    fn example1_matches_the_displayed_conditions() {
        let p = example1::<Rational>();
        let u = p.universe();
        let a = u.menu(&["x"]).unwrap();
        let ac = u.full();
        assert_eq!(p.p(&[a, a], &[0, 0]) - p.p(&[a, ac], &[0, 0]), r(0, 1));
        assert!(p.p(&[ac, a], &[0, 0]) - p.p(&[ac, ac], &[0, 0]) > r(0, 1));
    }
}
