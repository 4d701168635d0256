//! Random joint choice rules and conditional choice systems.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Alt, Menu, Universe};
use crate::scalar::{convert, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MenuSequence(pub Vec<Menu>);

impl MenuSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn menus(&self) -> &[Menu] {
        &self.0
    }

    pub fn prefix(&self, depth: usize) -> MenuSequence {
        MenuSequence(self.0[..depth].to_vec())
    }

    /// Componentwise inclusion of menu products.
    pub fn is_subset(&self, other: &MenuSequence) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.is_subset(*b))
    }

    /// All choice vectors in the product of the menus, lexicographic.
    pub fn choices(&self) -> Vec<Vec<Alt>> {
        let mut out: Vec<Vec<Alt>> = vec![Vec::new()];
        for m in &self.0 {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    m.iter().map(move |a| {
                        let mut v = prefix.clone();
                        v.push(a);
                        v
                    })
                })
                .collect();
        }
        out
    }

    pub fn admits(&self, choices: &[Alt]) -> bool {
        choices.len() == self.0.len() && self.0.iter().zip(choices).all(|(m, &c)| m.contains(c))
    }

    pub fn format(&self, universe: &Universe) -> String {
        let parts: Vec<String> = self.0.iter().map(|m| universe.format_menu(*m)).collect();
        format!("({})", parts.join(","))
    }
}

pub fn format_choices(universe: &Universe, choices: &[Alt]) -> String {
    let parts: Vec<&str> = choices.iter().map(|&c| universe.label(c)).collect();
    format!("({})", parts.join(","))
}

/// Index of a choice vector in a dense `n^T` block; period 0 is most significant.
pub fn choice_index(n: usize, choices: &[Alt]) -> usize {
    choices.iter().fold(0, |acc, &c| acc * n + c)
}

pub fn choice_from_index(n: usize, periods: usize, mut idx: usize) -> Vec<Alt> {
    let mut out = vec![0; periods];
    for slot in out.iter_mut().rev() {
        *slot = idx % n;
        idx /= n;
    }
    out
}

/// Every menu sequence of the given length, canonical order.
pub fn all_menu_sequences(universe: &Universe, periods: usize) -> Vec<MenuSequence> {
    let menus = universe.menus();
    let mut out: Vec<Vec<Menu>> = vec![Vec::new()];
    for _ in 0..periods {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                menus.iter().map(move |m| {
                    let mut v = prefix.clone();
                    v.push(*m);
                    v
                })
            })
            .collect();
    }
    out.into_iter().map(MenuSequence).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationDomain {
    periods: usize,
    observed: BTreeSet<MenuSequence>,
}

impl ObservationDomain {
    pub fn new(periods: usize, observed: impl IntoIterator<Item = MenuSequence>) -> Result<Self> {
        let observed: BTreeSet<MenuSequence> = observed.into_iter().collect();
        if observed.is_empty() {
            return Err(Error::MissingData("observation domain is empty".into()));
        }
        for m in &observed {
            if m.len() != periods {
                return Err(Error::PeriodMismatch { expected: periods, found: m.len() });
            }
            if m.0.iter().any(|a| a.is_empty()) {
                return Err(Error::EmptyMenu);
            }
        }
        Ok(ObservationDomain { periods, observed })
    }

    /// The full product lattice `𝒳^T`.
    pub fn full(universe: &Universe, periods: usize) -> Self {
        ObservationDomain { periods, observed: all_menu_sequences(universe, periods).into_iter().collect() }
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    pub fn contains(&self, menus: &MenuSequence) -> bool {
        self.observed.contains(menus)
    }

    pub fn iter(&self) -> impl Iterator<Item = &MenuSequence> {
        self.observed.iter()
    }

    pub fn is_full(&self, universe: &Universe) -> bool {
        let full = (1usize << universe.size()) - 1;
        self.observed.len() == full.pow(self.periods as u32)
    }

    pub fn first_missing(&self, universe: &Universe) -> Option<MenuSequence> {
        all_menu_sequences(universe, self.periods).into_iter().find(|m| !self.observed.contains(m))
    }

    pub fn without(&self, menus: &MenuSequence) -> Self {
        let mut observed = self.observed.clone();
        observed.remove(menus);
        ObservationDomain { periods: self.periods, observed }
    }
}

/// Joint choice frequencies `p(𝐱, 𝐀)` over an observation domain.
///
/// Each observed menu sequence owns a dense block of length `n^T` indexed by
/// [`choice_index`]; cells whose choices fall outside the menus are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomJointChoiceRule<S> {
    universe: Universe,
    periods: usize,
    table: BTreeMap<MenuSequence, Vec<S>>,
}

/// One observation of a raw table: menus by label and listed choice cells.
#[derive(Debug, Clone)]
pub struct RawObservation<S> {
    pub menus: Vec<Vec<String>>,
    pub probs: Vec<(Vec<String>, S)>,
}

#[derive(Debug, Clone)]
pub struct Validated<S> {
    pub rule: RandomJointChoiceRule<S>,
    /// Largest `|Σ p − 1|` across menu sequences.
    pub worst_deviation: f64,
}

/// Validates a raw table against the universe.
pub fn validate_rjcr<S: Scalar>(
    raw: &[RawObservation<S>],
    universe: &Universe,
    periods: usize,
    tolerance: f64,
) -> Result<Validated<S>> {
    let n = universe.size();
    let mut table: BTreeMap<MenuSequence, Vec<S>> = BTreeMap::new();
    for (oi, obs) in raw.iter().enumerate() {
        if obs.menus.len() != periods {
            return Err(Error::PeriodMismatch { expected: periods, found: obs.menus.len() });
        }
        let menus = MenuSequence(
            obs.menus.iter().map(|m| universe.menu(m)).collect::<Result<Vec<_>>>()?,
        );
        if table.contains_key(&menus) {
            return Err(Error::DuplicateObservation(menus.format(universe)));
        }
        let mut block = vec![S::zero(); n.pow(periods as u32)];
        for (ci, (labels, p)) in raw[oi].probs.iter().enumerate() {
            if labels.len() != periods {
                return Err(Error::PeriodMismatch { expected: periods, found: labels.len() });
            }
            let choices = labels.iter().map(|l| universe.index(l)).collect::<Result<Vec<_>>>()?;
            let at = || format!("{} choices {} (entry {})", menus.format(universe), format_choices(universe, &choices), ci);
            if !menus.admits(&choices) {
                return Err(Error::ChoiceOutsideMenu(at()));
            }
            if *p < S::zero() {
                return Err(Error::NegativeProbability(at()));
            }
            let idx = choice_index(n, &choices);
            block[idx] += p.clone();
        }
        table.insert(menus, block);
    }
    if table.is_empty() {
        return Err(Error::MissingData("no observations".into()));
    }
    RandomJointChoiceRule::from_table(universe.clone(), periods, table, tolerance)
}

impl<S: Scalar> RandomJointChoiceRule<S> {
    /// Builds and validates a rule from dense blocks.
    pub fn from_table(
        universe: Universe,
        periods: usize,
        table: BTreeMap<MenuSequence, Vec<S>>,
        tolerance: f64,
    ) -> Result<Validated<S>> {
        let n = universe.size();
        let mut worst = 0.0f64;
        for (menus, block) in &table {
            if menus.len() != periods {
                return Err(Error::PeriodMismatch { expected: periods, found: menus.len() });
            }
            if block.len() != n.pow(periods as u32) {
                return Err(Error::parse(menus.format(&universe), "block has the wrong length"));
            }
            let mut total = S::zero();
            for (idx, p) in block.iter().enumerate() {
                let choices = choice_from_index(n, periods, idx);
                if !menus.admits(&choices) {
                    if !p.is_zero() {
                        return Err(Error::ChoiceOutsideMenu(format!(
                            "{} choices {}",
                            menus.format(&universe),
                            format_choices(&universe, &choices)
                        )));
                    }
                    continue;
                }
                if p.is_negative_beyond(0.0) {
                    return Err(Error::NegativeProbability(format!(
                        "{} choices {}",
                        menus.format(&universe),
                        format_choices(&universe, &choices)
                    )));
                }
                total += p.clone();
            }
            let deviation = total - S::one();
            let dev = deviation.to_f64();
            if deviation.is_nonzero_beyond(tolerance) {
                return Err(Error::NormalizationFailure { menus: menus.format(&universe), deviation: dev });
            }
            worst = worst.max(dev.abs());
        }
        Ok(Validated { rule: RandomJointChoiceRule { universe, periods, table }, worst_deviation: worst })
    }

    /// Evaluates `f` on every admissible cell of `domain`.
    pub fn from_fn(
        universe: &Universe,
        domain: &ObservationDomain,
        tolerance: f64,
        mut f: impl FnMut(&MenuSequence, &[Alt]) -> S,
    ) -> Result<Self> {
        let n = universe.size();
        let periods = domain.periods();
        let mut table = BTreeMap::new();
        for menus in domain.iter() {
            let mut block = vec![S::zero(); n.pow(periods as u32)];
            for choices in menus.choices() {
                block[choice_index(n, &choices)] = f(menus, &choices);
            }
            table.insert(menus.clone(), block);
        }
        Ok(Self::from_table(universe.clone(), periods, table, tolerance)?.rule)
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn domain(&self) -> ObservationDomain {
        ObservationDomain { periods: self.periods, observed: self.table.keys().cloned().collect() }
    }

    pub fn is_full_domain(&self) -> bool {
        self.domain().is_full(&self.universe)
    }

    pub fn menu_sequences(&self) -> impl Iterator<Item = &MenuSequence> {
        self.table.keys()
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&MenuSequence, &[S])> {
        self.table.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn block(&self, menus: &MenuSequence) -> Option<&[S]> {
        self.table.get(menus).map(|v| v.as_slice())
    }

    pub fn prob(&self, menus: &MenuSequence, choices: &[Alt]) -> Option<&S> {
        self.table.get(menus).map(|b| &b[choice_index(self.universe.size(), choices)])
    }

    /// `p(𝐱,𝐀)`; panics when the menu sequence is unobserved.
    pub fn p(&self, menus: &[Menu], choices: &[Alt]) -> S {
        self.prob(&MenuSequence(menus.to_vec()), choices)
            .unwrap_or_else(|| panic!("menu sequence {:?} not observed", menus))
            .clone()
    }

    /// Marginal frequencies `p(𝐱^τ, 𝐀^τ)` read off the canonically first observed
    /// completion of each prefix. Well defined when marginality holds.
    pub fn marginal(&self, depth: usize) -> BTreeMap<MenuSequence, Vec<S>> {
        assert!(depth >= 1 && depth <= self.periods);
        let n = self.universe.size();
        let tail = n.pow((self.periods - depth) as u32);
        let mut out: BTreeMap<MenuSequence, Vec<S>> = BTreeMap::new();
        for (menus, block) in &self.table {
            let prefix = menus.prefix(depth);
            if out.contains_key(&prefix) {
                continue;
            }
            let mut m = vec![S::zero(); n.pow(depth as u32)];
            for (i, slot) in m.iter_mut().enumerate() {
                for v in &block[i * tail..(i + 1) * tail] {
                    *slot += v.clone();
                }
            }
            out.insert(prefix, m);
        }
        out
    }

    pub fn restrict(&self, domain: &ObservationDomain) -> Result<Self> {
        let mut table = BTreeMap::new();
        for m in domain.iter() {
            let block = self.table.get(m).ok_or_else(|| Error::DomainIncomplete(m.format(&self.universe)))?;
            table.insert(m.clone(), block.clone());
        }
        Ok(RandomJointChoiceRule { universe: self.universe.clone(), periods: self.periods, table })
    }

    pub fn convert<B: Scalar>(&self) -> RandomJointChoiceRule<B> {
        RandomJointChoiceRule {
            universe: self.universe.clone(),
            periods: self.periods,
            table: self.table.iter().map(|(k, v)| (k.clone(), v.iter().map(convert::<S, B>).collect())).collect(),
        }
    }

    /// Sup-norm distance over the common domain; `INFINITY` if the domains differ.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        if self.table.len() != other.table.len() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for (menus, block) in &self.table {
            let Some(ob) = other.table.get(menus) else {
                return f64::INFINITY;
            };
            for (a, b) in block.iter().zip(ob) {
                worst = worst.max((a.clone() - b.clone()).to_f64().abs());
            }
        }
        worst
    }

    /// Applies an alternative permutation: old index `i` becomes `perm[i]`.
    pub fn relabel(&self, perm: &[Alt]) -> Self {
        let n = self.universe.size();
        let mut inverse = vec![0; n];
        for (i, &j) in perm.iter().enumerate() {
            inverse[j] = i;
        }
        let universe = self.universe.relabel(&inverse);
        let map_menu = |m: Menu| m.iter().fold(Menu(0), |acc, a| acc.with(perm[a]));
        let mut table = BTreeMap::new();
        for (menus, block) in &self.table {
            let new_menus = MenuSequence(menus.0.iter().map(|&m| map_menu(m)).collect());
            let mut new_block = vec![S::zero(); block.len()];
            for (idx, v) in block.iter().enumerate() {
                let choices = choice_from_index(n, self.periods, idx);
                let mapped: Vec<Alt> = choices.iter().map(|&c| perm[c]).collect();
                new_block[choice_index(n, &mapped)] = v.clone();
            }
            table.insert(new_menus, new_block);
        }
        RandomJointChoiceRule { universe, periods: self.periods, table }
    }

    /// Convex combination `α·self + (1−α)·other` on a shared domain.
    pub fn mix(&self, other: &Self, alpha: &S) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (menus, block) in &self.table {
            let ob = other.table.get(menus).ok_or_else(|| Error::DomainIncomplete(menus.format(&self.universe)))?;
            let beta = S::one() - alpha.clone();
            table.insert(
                menus.clone(),
                block.iter().zip(ob).map(|(a, b)| alpha.clone() * a.clone() + beta.clone() * b.clone()).collect(),
            );
        }
        Ok(RandomJointChoiceRule { universe: self.universe.clone(), periods: self.periods, table })
    }
}

/// Choice history `(𝐱^τ, 𝐀^τ)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct History {
    pub choices: Vec<Alt>,
    pub menus: Vec<Menu>,
}

impl History {
    pub fn null() -> Self {
        History { choices: Vec::new(), menus: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    pub fn extend(&self, choice: Alt, menu: Menu) -> History {
        let mut h = self.clone();
        h.choices.push(choice);
        h.menus.push(menu);
        h
    }

    pub fn format(&self, universe: &Universe) -> String {
        format!("{}|{}", format_choices(universe, &self.choices), MenuSequence(self.menus.clone()).format(universe))
    }
}

/// First-period marginals plus history-conditional blocks.
///
/// Blocks are dense vectors indexed by alternative, zero outside the menu.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalChoiceSystem<S> {
    universe: Universe,
    periods: usize,
    domain: ObservationDomain,
    first: BTreeMap<Menu, Vec<S>>,
    conditional: BTreeMap<History, BTreeMap<Menu, Vec<S>>>,
    zero_histories: BTreeSet<History>,
}

impl<S: Scalar> ConditionalChoiceSystem<S> {
    pub fn new(
        universe: Universe,
        domain: ObservationDomain,
        first: BTreeMap<Menu, Vec<S>>,
        conditional: BTreeMap<History, BTreeMap<Menu, Vec<S>>>,
        tolerance: f64,
    ) -> Result<Self> {
        let check = |menu: Menu, block: &[S], at: &dyn Fn() -> String| -> Result<()> {
            let mut total = S::zero();
            for (a, p) in block.iter().enumerate() {
                if !menu.contains(a) && !p.is_zero() {
                    return Err(Error::ChoiceOutsideMenu(at()));
                }
                if p.is_negative_beyond(0.0) {
                    return Err(Error::NegativeProbability(at()));
                }
                total += p.clone();
            }
            let dev = total - S::one();
            if dev.is_nonzero_beyond(tolerance) {
                return Err(Error::NormalizationFailure { menus: at(), deviation: dev.to_f64() });
            }
            Ok(())
        };
        for (m, b) in &first {
            check(*m, b, &|| format!("first-period block {}", universe.format_menu(*m)))?;
        }
        for (h, blocks) in &conditional {
            for (m, b) in blocks {
                check(*m, b, &|| format!("block {} after {}", universe.format_menu(*m), h.format(&universe)))?;
            }
        }
        Ok(ConditionalChoiceSystem {
            periods: domain.periods(),
            universe,
            domain,
            first,
            conditional,
            zero_histories: BTreeSet::new(),
        })
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn domain(&self) -> &ObservationDomain {
        &self.domain
    }

    pub fn first_blocks(&self) -> &BTreeMap<Menu, Vec<S>> {
        &self.first
    }

    pub fn conditional_blocks(&self) -> &BTreeMap<History, BTreeMap<Menu, Vec<S>>> {
        &self.conditional
    }

    /// Histories omitted because their probability is zero.
    pub fn zero_histories(&self) -> &BTreeSet<History> {
        &self.zero_histories
    }

    /// `p(x, A)`.
    pub fn first(&self, x: Alt, menu: Menu) -> Option<&S> {
        self.first.get(&menu).map(|b| &b[x])
    }

    /// `p(y, B | history)`; the null history gives the first-period block.
    pub fn conditional(&self, y: Alt, menu: Menu, history: &History) -> Option<&S> {
        if history.is_empty() {
            return self.first(y, menu);
        }
        self.conditional.get(history).and_then(|m| m.get(&menu)).map(|b| &b[y])
    }

    pub fn block(&self, history: &History, menu: Menu) -> Option<&[S]> {
        if history.is_empty() {
            return self.first.get(&menu).map(|b| b.as_slice());
        }
        self.conditional.get(history).and_then(|m| m.get(&menu)).map(|b| b.as_slice())
    }

    /// Every history with at least one block, including the null history.
    pub fn histories(&self) -> Vec<History> {
        let mut out = vec![History::null()];
        out.extend(self.conditional.keys().cloned());
        out
    }

    /// Menus with a block after `history`.
    pub fn menus_after(&self, history: &History) -> Vec<Menu> {
        if history.is_empty() {
            return self.first.keys().copied().collect();
        }
        self.conditional.get(history).map(|m| m.keys().copied().collect()).unwrap_or_default()
    }
}

/// Converts a rule satisfying marginality into conditional form.
pub fn to_conditional<S: Scalar>(p: &RandomJointChoiceRule<S>, tolerance: f64) -> Result<ConditionalChoiceSystem<S>> {
    let report = crate::axioms::check_marginality(p, tolerance);
    if !report.holds {
        let w = report.witnesses.first().map(|w| w.describe()).unwrap_or_default();
        return Err(Error::MarginalityViolated(w));
    }
    let n = p.universe().size();
    let periods = p.periods();
    let marginals: Vec<BTreeMap<MenuSequence, Vec<S>>> = (1..=periods).map(|d| p.marginal(d)).collect();

    let mut first = BTreeMap::new();
    for (prefix, block) in &marginals[0] {
        first.insert(prefix.0[0], block.clone());
    }
    let mut conditional: BTreeMap<History, BTreeMap<Menu, Vec<S>>> = BTreeMap::new();
    let mut zero_histories = BTreeSet::new();
    for depth in 1..periods {
        let here = &marginals[depth - 1];
        let next = &marginals[depth];
        for (menus, block) in next {
            let prefix = menus.prefix(depth);
            let next_menu = menus.0[depth];
            let prefix_block = &here[&prefix];
            for choices in prefix.choices() {
                let history = History { choices: choices.clone(), menus: prefix.0.clone() };
                let weight = &prefix_block[choice_index(n, &choices)];
                if !weight.is_positive_beyond(tolerance) {
                    zero_histories.insert(history);
                    continue;
                }
                let mut cond = vec![S::zero(); n];
                for y in next_menu.iter() {
                    let mut full = choices.clone();
                    full.push(y);
                    cond[y] = block[choice_index(n, &full)].clone() / weight.clone();
                }
                conditional.entry(history).or_default().insert(next_menu, cond);
            }
        }
    }
    Ok(ConditionalChoiceSystem {
        universe: p.universe().clone(),
        periods,
        domain: p.domain(),
        first,
        conditional,
        zero_histories,
    })
}

/// Multiplies conditional blocks back into joint frequencies.
pub fn from_conditional<S: Scalar>(ccs: &ConditionalChoiceSystem<S>, tolerance: f64) -> Result<RandomJointChoiceRule<S>> {
    let universe = ccs.universe().clone();
    RandomJointChoiceRule::from_fn(&universe, ccs.domain(), tolerance.max(S::default_tolerance()), |menus, choices| {
        let mut history = History::null();
        let mut value = S::one();
        for (t, (&menu, &c)) in menus.0.iter().zip(choices).enumerate() {
            let factor = if t == 0 { ccs.first(c, menu) } else { ccs.conditional(c, menu, &history) };
            match factor {
                Some(f) => value = value * f.clone(),
                None => return S::zero(),
            }
            history = history.extend(c, menu);
        }
        value
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;
    use crate::fixtures;
    use crate::scalar::Rational;

    #[test]
    fn example2_is_valid() {
        let p = fixtures::example2::<Rational>();
        assert!(p.is_full_domain());
        let raw: Vec<RawObservation<Rational>> = p
            .blocks()
            .map(|(menus, block)| RawObservation {
                menus: menus.0.iter().map(|m| p.universe().menu_labels(*m)).collect(),
                probs: menus
                    .choices()
                    .into_iter()
                    .map(|c| {
                        (c.iter().map(|&a| p.universe().label(a).to_string()).collect(), block[choice_index(2, &c)].clone())
                    })
                    .collect(),
            })
            .collect();
        let v = validate_rjcr(&raw, p.universe(), 2, 0.0).unwrap();
        assert_eq!(v.worst_deviation, 0.0);
        assert_eq!(v.rule, p);
    }

    fn raw_example2(pxx: &str) -> Vec<RawObservation<Rational>> {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        vec![
            RawObservation {
                menus: vec![s(&["x", "y"]), s(&["x", "y"])],
                probs: vec![
                    (s(&["x", "x"]), Rational::parse_prob(pxx).unwrap()),
                    (s(&["y", "y"]), Rational::parse_prob("0.5").unwrap()),
                ],
            },
            RawObservation {
                menus: vec![s(&["x", "y"]), s(&["x"])],
                probs: vec![
                    (s(&["x", "x"]), Rational::parse_prob("0.5").unwrap()),
                    (s(&["y", "x"]), Rational::parse_prob("0.5").unwrap()),
                ],
            },
        ]
    }

    #[test]
    fn example2_table_validates_and_detects_bad_sum() {
        let u = Universe::new(["x", "y"]).unwrap();
        assert!(validate_rjcr(&raw_example2("0.5"), &u, 2, 0.0).is_ok());
        match validate_rjcr(&raw_example2("0.6"), &u, 2, 0.0) {
            Err(Error::NormalizationFailure { deviation, .. }) => assert!((deviation - 0.1).abs() < 1e-12),
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn negative_and_outside_entries_are_rejected() {
        let u = Universe::new(["x", "y"]).unwrap();
        let mut raw = raw_example2("0.5");
        raw[1].probs[0].1 = Rational::parse_prob("-0.5").unwrap();
        assert!(matches!(validate_rjcr(&raw, &u, 2, 0.0), Err(Error::NegativeProbability(_))));
        let mut raw = raw_example2("0.5");
        raw[1].probs[0].0 = vec!["x".into(), "y".into()];
        assert!(matches!(validate_rjcr(&raw, &u, 2, 0.0), Err(Error::ChoiceOutsideMenu(_))));
    }

    #[test]
    fn deterministic_rule_is_valid_and_conditionals_are_degenerate() {
        let u = Universe::letters(3);
        let order = crate::lattice::LinearOrder::new(vec![1, 2, 0]).unwrap();
        let domain = ObservationDomain::full(&u, 2);
        let p = RandomJointChoiceRule::<Rational>::from_fn(&u, &domain, 0.0, |m, c| {
            if m.0.iter().zip(c).all(|(menu, &x)| order.best_in(*menu) == x) {
                Rational::from_ratio(1, 1)
            } else {
                Rational::from_ratio(0, 1)
            }
        })
        .unwrap();
        let ccs = to_conditional(&p, 0.0).unwrap();
        for blocks in ccs.conditional_blocks().values() {
            for b in blocks.values() {
                assert!(b.iter().all(|v| v.is_zero() || *v == Rational::from_ratio(1, 1)));
            }
        }
        assert_eq!(from_conditional(&ccs, 0.0).unwrap(), p);
    }

    #[test]
    fn example2_conditionals() {
        let p = fixtures::example2::<Rational>();
        let u = p.universe().clone();
        let xy = u.menu(&["x", "y"]).unwrap();
        let ccs = to_conditional(&p, 0.0).unwrap();
        assert_eq!(ccs.first(0, xy).unwrap(), &Rational::from_ratio(1, 2));
        let h = History { choices: vec![0], menus: vec![xy] };
        assert_eq!(ccs.conditional(0, xy, &h).unwrap(), &Rational::from_ratio(1, 1));
        // round trip
        assert_eq!(from_conditional(&ccs, 0.0).unwrap(), p);
    }

    #[test]
    fn marginality_violation_blocks_conversion() {
        let p = fixtures::marginality_violation::<Rational>();
        assert!(matches!(to_conditional(&p, 0.0), Err(Error::MarginalityViolated(_))));
    }

    #[test]
    fn single_period_system_is_its_first_block() {
        let u = Universe::letters(3);
        let domain = ObservationDomain::full(&u, 1);
        let p = RandomJointChoiceRule::<Rational>::from_fn(&u, &domain, 0.0, |m, _| {
            Rational::from_ratio(1, m.0[0].len() as i64)
        })
        .unwrap();
        let ccs = to_conditional(&p, 0.0).unwrap();
        assert!(ccs.conditional_blocks().is_empty());
        for (menu, block) in ccs.first_blocks() {
            assert_eq!(block.as_slice(), p.block(&MenuSequence(vec![*menu])).unwrap());
        }
        assert_eq!(from_conditional(&ccs, 0.0).unwrap(), p);
    }

    #[test]
    fn relabel_round_trip() {
        let p = fixtures::example4::<Rational>();
        let q = p.relabel(&[2, 0, 1]).relabel(&[1, 2, 0]);
        assert_eq!(p, q);
    }
}
