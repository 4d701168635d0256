//! Möbius inversion over the product lattice of menus.

use rayon::prelude::*;

use crate::data::{choice_index, MenuSequence, RandomJointChoiceRule};
use crate::error::{Error, Result};
use crate::lattice::{Alt, Menu, Universe};
use crate::scalar::Scalar;

/// Dense table over every `(𝐱, 𝐀)` of the `τ`-fold product lattice.
///
/// Cells whose choices fall outside their menus hold zero. The layout uses the raw
/// menu bitmask as the coordinate, so entries for the empty menu are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeTable<S> {
    universe: Universe,
    depth: usize,
    values: Vec<S>,
}

/// Signed Möbius coefficients `q`.
pub type MobiusTable<S> = LatticeTable<S>;

impl<S: Scalar> LatticeTable<S> {
    pub fn zeros(universe: &Universe, depth: usize) -> Self {
        let len = (1usize << (universe.size() * depth)) * universe.size().pow(depth as u32);
        LatticeTable { universe: universe.clone(), depth, values: vec![S::zero(); len] }
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    fn block_len(&self) -> usize {
        self.universe.size().pow(self.depth as u32)
    }

    fn menu_offset(&self, menus: &[Menu]) -> usize {
        let n = self.universe.size();
        let idx = menus.iter().fold(0usize, |acc, m| (acc << n) | m.bits() as usize);
        idx * self.block_len()
    }

    pub fn get(&self, menus: &[Menu], choices: &[Alt]) -> &S {
        debug_assert_eq!(menus.len(), self.depth);
        &self.values[self.menu_offset(menus) + choice_index(self.universe.size(), choices)]
    }

    pub fn set(&mut self, menus: &[Menu], choices: &[Alt], value: S) {
        let at = self.menu_offset(menus) + choice_index(self.universe.size(), choices);
        self.values[at] = value;
    }

    pub fn block(&self, menus: &[Menu]) -> &[S] {
        let at = self.menu_offset(menus);
        &self.values[at..at + self.block_len()]
    }

    /// Every menu sequence of the lattice, canonical order.
    pub fn menu_sequences(&self) -> Vec<MenuSequence> {
        crate::data::all_menu_sequences(&self.universe, self.depth)
    }

    /// Admissible cells in canonical menu order, choices lexicographic.
    pub fn cells(&self) -> Vec<(MenuSequence, Vec<Alt>, &S)> {
        let mut out = Vec::new();
        for menus in self.menu_sequences() {
            for choices in menus.choices() {
                let v = self.get(&menus.0, &choices);
                out.push((menus.clone(), choices, v));
            }
        }
        out
    }

    /// Drops the last period by summing it at the full menu:
    /// `q_{τ−1}(𝐱,𝐀) = Σ_y q_τ(𝐱,y,𝐀,X)`.
    pub fn sum_last_at_full(&self) -> LatticeTable<S> {
        assert!(self.depth >= 2);
        let full = self.universe.full();
        let mut out = LatticeTable::zeros(&self.universe, self.depth - 1);
        for menus in out.menu_sequences() {
            let mut ext = menus.0.clone();
            ext.push(full);
            for choices in menus.choices() {
                let mut total = S::zero();
                let mut c = choices.clone();
                c.push(0);
                for y in 0..self.universe.size() {
                    *c.last_mut().unwrap() = y;
                    total += self.get(&ext, &c).clone();
                }
                out.set(&menus.0, &choices, total);
            }
        }
        out
    }

    /// Largest absolute cellwise difference.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a.clone() - b.clone()).to_f64().abs())
            .fold(0.0, f64::max)
    }

    /// Reads the table as a rule on the full lattice, validating normalization.
    pub fn to_rule(&self, tolerance: f64) -> Result<RandomJointChoiceRule<S>> {
        let domain = crate::data::ObservationDomain::full(&self.universe, self.depth);
        RandomJointChoiceRule::from_fn(&self.universe, &domain, tolerance, |m, c| self.get(&m.0, c).clone())
    }

    fn from_rule_unchecked(p: &RandomJointChoiceRule<S>) -> Result<Self> {
        let mut t = LatticeTable::zeros(p.universe(), p.periods());
        for menus in t.menu_sequences() {
            let block = p.block(&menus).ok_or_else(|| Error::DomainIncomplete(menus.format(p.universe())))?;
            let at = t.menu_offset(&menus.0);
            t.values[at..at + block.len()].clone_from_slice(block);
        }
        Ok(t)
    }
}

/// Signed superset sum `Σ_{𝐀'⊇𝐀} sign(𝐀,𝐀')·f(𝐱,𝐀')` over the full lattice.
fn superset_transform<S: Scalar>(source: &LatticeTable<S>, signed: bool) -> LatticeTable<S> {
    let universe = source.universe.clone();
    let n = universe.size();
    let depth = source.depth;
    let full = universe.full();
    let menus_list = source.menu_sequences();
    let block_len = source.block_len();

    let blocks: Vec<(MenuSequence, Vec<S>)> = menus_list
        .par_iter()
        .map(|menus| {
            let admissible = menus.choices();
            let mut acc = vec![S::zero(); block_len];
            let supers: Vec<Vec<Menu>> = menus.0.iter().map(|m| m.supersets(full).collect()).collect();
            let mut cursor = vec![0usize; depth];
            loop {
                let sup: Vec<Menu> = cursor.iter().enumerate().map(|(i, &k)| supers[i][k]).collect();
                let extra: usize = sup.iter().zip(&menus.0).map(|(a, b)| a.len() - b.len()).sum();
                let negative = signed && extra % 2 == 1;
                let src = source.block(&sup);
                for c in &admissible {
                    let idx = choice_index(n, c);
                    if negative {
                        acc[idx] -= src[idx].clone();
                    } else {
                        acc[idx] += src[idx].clone();
                    }
                }
                // odometer over the superset product
                let mut i = depth;
                loop {
                    if i == 0 {
                        return (menus.clone(), acc);
                    }
                    i -= 1;
                    cursor[i] += 1;
                    if cursor[i] < supers[i].len() {
                        break;
                    }
                    cursor[i] = 0;
                }
            }
        })
        .collect();

    let mut out = LatticeTable::zeros(&universe, depth);
    for (menus, block) in blocks {
        let at = out.menu_offset(&menus.0);
        out.values[at..at + block_len].clone_from_slice(&block);
    }
    out
}

/// Möbius inverse of a rule on the full domain `𝒳^T`.
pub fn mobius_inverse<S: Scalar>(p: &RandomJointChoiceRule<S>) -> Result<MobiusTable<S>> {
    let table = LatticeTable::from_rule_unchecked(p)?;
    Ok(superset_transform(&table, true))
}

/// Superset sums `p(𝐱,𝐀) = Σ_{𝐀'⊇𝐀} q(𝐱,𝐀')`; the result is not validated as a rule.
pub fn mobius_reconstruct<S: Scalar>(q: &MobiusTable<S>) -> LatticeTable<S> {
    superset_transform(q, false)
}

/// Möbius inverse of the `τ`-period marginal rule.
pub fn truncated_mobius<S: Scalar>(p: &RandomJointChoiceRule<S>, depth: usize, tolerance: f64) -> Result<MobiusTable<S>> {
    if depth == 0 || depth > p.periods() {
        return Err(Error::InvalidParameters(format!("depth {} outside 1..={}", depth, p.periods())));
    }
    if let Some(m) = p.domain().first_missing(p.universe()) {
        return Err(Error::DomainIncomplete(m.format(p.universe())));
    }
    let report = crate::axioms::check_marginality(p, tolerance);
    if !report.holds {
        return Err(Error::MarginalityViolated(report.witnesses[0].describe()));
    }
    let marginal = p.marginal(depth);
    let mut table = LatticeTable::zeros(p.universe(), depth);
    for (menus, block) in &marginal {
        let at = table.menu_offset(&menus.0);
        table.values[at..at + block.len()].clone_from_slice(block);
    }
    Ok(superset_transform(&table, true))
}

/// Truncated tables for every depth `1..=T`.
pub fn mobius_depths<S: Scalar>(p: &RandomJointChoiceRule<S>, tolerance: f64) -> Result<Vec<MobiusTable<S>>> {
    (1..=p.periods()).map(|d| truncated_mobius(p, d, tolerance)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn example2_top_cell_equals_p() {
        let p = fixtures::example2::<Rational>();
        let u = p.universe();
        let xy = u.full();
        let q = mobius_inverse(&p).unwrap();
        assert_eq!(q.get(&[xy, xy], &[0, 0]), &r(1, 2));
        assert_eq!(q.get(&[xy, xy], &[0, 1]), &r(0, 1));
    }

    #[test]
    fn round_trip_is_exact() {
        for p in [fixtures::example2::<Rational>(), fixtures::example4(), fixtures::example1()] {
            let q = mobius_inverse(&p).unwrap();
            let back = mobius_reconstruct(&q).to_rule(0.0).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn single_atom_reconstructs_to_indicator() {
        let u = Universe::letters(2);
        let full = u.full();
        let mut q = LatticeTable::<Rational>::zeros(&u, 2);
        q.set(&[full, full], &[0, 1], r(1, 1));
        let p = mobius_reconstruct(&q);
        for menus in p.menu_sequences() {
            for c in menus.choices() {
                let expected = if c == [0, 1] { r(1, 1) } else { r(0, 1) };
                assert_eq!(p.get(&menus.0, &c), &expected, "{:?} {:?}", menus, c);
            }
        }
    }

    #[test]
    fn depth_one_of_example2() {
        let p = fixtures::example2::<Rational>();
        let q1 = truncated_mobius(&p, 1, 0.0).unwrap();
        let u = p.universe();
        let x = u.menu(&["x"]).unwrap();
        assert_eq!(q1.get(&[u.full()], &[0]), &r(1, 2));
        assert_eq!(q1.get(&[x], &[0]), &r(1, 2));
        assert_eq!(truncated_mobius(&p, 2, 0.0).unwrap(), mobius_inverse(&p).unwrap());
        assert_eq!(mobius_inverse(&p).unwrap().sum_last_at_full(), q1);
    }

    #[test]
    fn marginality_violation_is_rejected() {
        let p = fixtures::marginality_violation::<Rational>();
        assert!(matches!(truncated_mobius(&p, 1, 0.0), Err(Error::MarginalityViolated(_))));
    }

    #[test]
    fn missing_menu_is_reported() {
        let p = fixtures::example2::<Rational>();
        let first = p.menu_sequences().next().unwrap().clone();
        let limited = p.restrict(&p.domain().without(&first)).unwrap();
        assert!(matches!(mobius_inverse(&limited), Err(Error::DomainIncomplete(_))));
    }

    #[test]
    fn inverse_is_linear() {
        let a = fixtures::example2::<Rational>();
        let b = fixtures::deterministic::<Rational>(a.universe(), &[1, 0], 2);
        let alpha = r(1, 3);
        let mixed = a.mix(&b, &alpha).unwrap();
        let qa = mobius_inverse(&a).unwrap();
        let qb = mobius_inverse(&b).unwrap();
        let qm = mobius_inverse(&mixed).unwrap();
        for menus in qm.menu_sequences() {
            for c in menus.choices() {
                let lhs = qm.get(&menus.0, &c).clone();
                let rhs = alpha.clone() * qa.get(&menus.0, &c).clone() + (r(1, 1) - alpha.clone()) * qb.get(&menus.0, &c).clone();
                assert_eq!(lhs, rhs);
            }
        }
    }
}
