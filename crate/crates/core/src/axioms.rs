//! Axiom checks with reproducible witnesses.
//!
//! Every check walks its index space in canonical order, keeps the first violation
//! as the witness and counts the rest.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::data::{choice_index, format_choices, MenuSequence, RandomJointChoiceRule};
use crate::error::{Error, Result};
use crate::lattice::{Alt, Menu, Universe};
use crate::mobius::{mobius_inverse, MobiusTable};
use crate::scalar::{Rational, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// `lhs ≥ rhs` was required.
    Ge,
    /// `lhs = rhs` was required.
    Eq,
    /// `lhs > rhs` was required.
    Gt,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub indices: String,
    pub lhs: String,
    pub rhs: String,
    pub relation: Relation,
}

impl Witness {
    pub fn describe(&self) -> String {
        let op = match self.relation {
            Relation::Ge => "≥",
            Relation::Eq => "=",
            Relation::Gt => ">",
        };
        format!("{}: {} {} {} fails", self.indices, self.lhs, op, self.rhs)
    }

    /// Re-evaluates the stored sides exactly; true when they still violate the relation.
    pub fn is_violation(&self, tolerance: f64) -> bool {
        let (Some(lhs), Some(rhs)) = (Rational::parse_prob(&self.lhs), Rational::parse_prob(&self.rhs)) else {
            return false;
        };
        let gap = lhs - rhs;
        match self.relation {
            Relation::Ge => gap.is_negative_beyond(tolerance),
            Relation::Eq => gap.is_nonzero_beyond(tolerance),
            Relation::Gt => !gap.is_positive_beyond(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub axiom: String,
    pub holds: bool,
    pub witnesses: Vec<Witness>,
    pub violations: usize,
    pub tolerance: f64,
}

impl AxiomReport {
    pub fn first_witness(&self) -> Option<&Witness> {
        self.witnesses.first()
    }
}

/// Collects violations for one axiom.
pub(crate) struct Checker {
    axiom: &'static str,
    tolerance: f64,
    first: Option<Witness>,
    count: usize,
}

impl Checker {
    pub(crate) fn new(axiom: &'static str, tolerance: f64) -> Self {
        Checker { axiom, tolerance, first: None, count: 0 }
    }

    pub(crate) fn ge<S: Scalar>(&mut self, lhs: &S, rhs: &S, indices: impl FnOnce() -> String) {
        if (lhs.clone() - rhs.clone()).is_negative_beyond(self.tolerance) {
            self.record(lhs, rhs, Relation::Ge, indices);
        }
    }

    pub(crate) fn eq<S: Scalar>(&mut self, lhs: &S, rhs: &S, indices: impl FnOnce() -> String) {
        if (lhs.clone() - rhs.clone()).is_nonzero_beyond(self.tolerance) {
            self.record(lhs, rhs, Relation::Eq, indices);
        }
    }

    /// Strict positivity; the tolerance is not applied.
    pub(crate) fn positive<S: Scalar>(&mut self, value: &S, indices: impl FnOnce() -> String) {
        if !value.is_positive_beyond(0.0) {
            self.record(value, &S::zero(), Relation::Gt, indices);
        }
    }

    fn record<S: Scalar>(&mut self, lhs: &S, rhs: &S, relation: Relation, indices: impl FnOnce() -> String) {
        self.count += 1;
        if self.first.is_none() {
            self.first = Some(Witness { indices: indices(), lhs: lhs.format_prob(), rhs: rhs.format_prob(), relation });
        }
    }

    pub(crate) fn finish(self) -> AxiomReport {
        AxiomReport {
            axiom: self.axiom.to_string(),
            holds: self.count == 0,
            witnesses: self.first.into_iter().collect(),
            violations: self.count,
            tolerance: self.tolerance,
        }
    }
}

fn cell(universe: &Universe, f: &str, choices: &[Alt], menus: &[Menu]) -> String {
    let c = format_choices(universe, choices);
    let m = MenuSequence(menus.to_vec()).format(universe);
    format!("{}({},{})", f, &c[1..c.len() - 1], &m[1..m.len() - 1])
}

/// `q ≥ −ε` on every cell of a full-lattice Möbius table.
pub fn check_complete_monotonicity<S: Scalar>(q: &MobiusTable<S>, tolerance: f64) -> AxiomReport {
    let mut checker = Checker::new("complete_monotonicity", tolerance);
    let zero = S::zero();
    let u = q.universe();
    for (menus, choices, v) in q.cells() {
        checker.ge(v, &zero, || cell(u, "q", &choices, &menus.0));
    }
    checker.finish()
}

/// Earlier-period marginals do not depend on later menus, at every depth.
pub fn check_marginality<S: Scalar>(p: &RandomJointChoiceRule<S>, tolerance: f64) -> AxiomReport {
    let mut checker = Checker::new("marginality", tolerance);
    let u = p.universe();
    let n = u.size();
    let periods = p.periods();
    for depth in 1..periods {
        let tail = n.pow((periods - depth) as u32);
        let mut reference: BTreeMap<MenuSequence, (MenuSequence, Vec<S>)> = BTreeMap::new();
        for (menus, block) in p.blocks() {
            let prefix = menus.prefix(depth);
            let sums: Vec<S> = (0..n.pow(depth as u32))
                .map(|i| block[i * tail..(i + 1) * tail].iter().fold(S::zero(), |acc, v| acc + v.clone()))
                .collect();
            match reference.get(&prefix) {
                None => {
                    reference.insert(prefix, (menus.clone(), sums));
                }
                Some((ref_menus, ref_sums)) => {
                    for choices in prefix.choices() {
                        let i = choice_index(n, &choices);
                        checker.eq(&sums[i], &ref_sums[i], || {
                            format!(
                                "{} under later menus {} vs {}",
                                cell(u, "p", &choices, &prefix.0),
                                MenuSequence(menus.0[depth..].to_vec()).format(u),
                                MenuSequence(ref_menus.0[depth..].to_vec()).format(u)
                            )
                        });
                    }
                }
            }
        }
    }
    checker.finish()
}

/// The recursivity identity at the last coordinate of a Möbius table:
/// `Σ_{y∈B} q(𝐱,y,𝐀,B) = Σ_{z∉B} q(𝐱,z,𝐀,B∪{z})` for nonempty proper `B`.
fn recursivity_at_last<S: Scalar>(q: &MobiusTable<S>, checker: &mut Checker) {
    let u = q.universe();
    let full = u.full();
    let depth = q.depth();
    for prefix in crate::data::all_menu_sequences(u, depth - 1) {
        for choices in prefix.choices() {
            for b in u.menus() {
                if b == full {
                    continue;
                }
                let mut menus = prefix.0.clone();
                menus.push(b);
                let mut c = choices.clone();
                c.push(0);
                let mut lhs = S::zero();
                for y in b.iter() {
                    *c.last_mut().unwrap() = y;
                    lhs += q.get(&menus, &c).clone();
                }
                let mut rhs = S::zero();
                for z in full.iter().filter(|&z| !b.contains(z)) {
                    *menus.last_mut().unwrap() = b.with(z);
                    *c.last_mut().unwrap() = z;
                    rhs += q.get(&menus, &c).clone();
                }
                checker.eq(&lhs, &rhs, || {
                    let mut m = prefix.0.clone();
                    m.push(b);
                    format!("Σ_(y∈B) q after {} with B={}", cell(u, "h", &choices, &prefix.0), u.format_menu(b))
                        + &format!(" over {}", MenuSequence(m).format(u))
                });
            }
        }
    }
}

/// Recursivity at every depth of a full-lattice Möbius table.
///
/// Shallower tables are derived by summing the last coordinate at `X`; a depth-one
/// table passes vacuously.
pub fn check_recursivity<S: Scalar>(q: &MobiusTable<S>, tolerance: f64) -> AxiomReport {
    let mut checker = Checker::new("recursivity", tolerance);
    let mut table = q.clone();
    while table.depth() >= 2 {
        recursivity_at_last(&table, &mut checker);
        table = table.sum_last_at_full();
    }
    checker.finish()
}

/// `p(A,B) − p(A,B') ≥ p(A',B) − p(A',B')` for every pair of periods `i < j`,
/// nested `A ⊆ A'` in period `i` and `B ⊆ B'` in period `j`, other coordinates fixed.
pub fn check_increasing_differences<S: Scalar>(p: &RandomJointChoiceRule<S>, tolerance: f64) -> AxiomReport {
    let mut checker = Checker::new("increasing_differences", tolerance);
    let u = p.universe();
    let full = u.full();
    let periods = p.periods();
    for (menus, block) in p.blocks() {
        for i in 0..periods {
            for j in i + 1..periods {
                let a = menus.0[i];
                let b = menus.0[j];
                for a2 in a.supersets(full).filter(|&m| m != a) {
                    for b2 in b.supersets(full).filter(|&m| m != b) {
                        let with = |ai: Menu, bj: Menu| {
                            let mut m = menus.0.clone();
                            m[i] = ai;
                            m[j] = bj;
                            MenuSequence(m)
                        };
                        let (Some(p_ab2), Some(p_a2b), Some(p_a2b2)) =
                            (p.block(&with(a, b2)), p.block(&with(a2, b)), p.block(&with(a2, b2)))
                        else {
                            continue;
                        };
                        for choices in menus.choices() {
                            let k = choice_index(u.size(), &choices);
                            let lhs = block[k].clone() - p_ab2[k].clone();
                            let rhs = p_a2b[k].clone() - p_a2b2[k].clone();
                            checker.ge(&lhs, &rhs, || {
                                format!(
                                    "{} periods {},{} enlarged to {},{}",
                                    cell(u, "p", &choices, &menus.0),
                                    i + 1,
                                    j + 1,
                                    u.format_menu(a2),
                                    u.format_menu(b2)
                                )
                            });
                        }
                    }
                }
            }
        }
    }
    checker.finish()
}

/// `p(𝐱,𝐀) ≥ p(𝐱,𝐀')` whenever `𝐀 ⊆ 𝐀'` componentwise.
pub fn check_regularity<S: Scalar>(p: &RandomJointChoiceRule<S>, tolerance: f64) -> AxiomReport {
    let mut checker = Checker::new("regularity", tolerance);
    let u = p.universe();
    let blocks: Vec<(&MenuSequence, &[S])> = p.blocks().collect();
    for (menus, block) in &blocks {
        for (bigger, big_block) in &blocks {
            if bigger == menus || !menus.is_subset(bigger) {
                continue;
            }
            for choices in menus.choices() {
                let k = choice_index(u.size(), &choices);
                checker.ge(&block[k], &big_block[k], || {
                    format!("{} vs {}", cell(u, "p", &choices, &menus.0), bigger.format(u))
                });
            }
        }
    }
    checker.finish()
}

/// Later blocks agree across earlier menu histories that share a choice history,
/// in the cross-multiplied form. Pairs with a conditioning probability at or below
/// the tolerance are skipped.
pub fn check_choice_set_independence<S: Scalar>(p: &RandomJointChoiceRule<S>, tolerance: f64) -> AxiomReport {
    let mut checker = Checker::new("choice_set_independence", tolerance);
    let u = p.universe();
    let n = u.size();
    for depth in 1..p.periods() {
        let here = p.marginal(depth);
        let next = p.marginal(depth + 1);
        // group next-depth prefixes by their last menu
        let mut by_next: BTreeMap<Menu, Vec<&MenuSequence>> = BTreeMap::new();
        for menus in next.keys() {
            by_next.entry(menus.0[depth]).or_default().push(menus);
        }
        for (b, seqs) in &by_next {
            for (ia, ext_a) in seqs.iter().enumerate() {
                for ext_b in &seqs[ia + 1..] {
                    let hist_a = ext_a.prefix(depth);
                    let hist_b = ext_b.prefix(depth);
                    let (ma, mb) = (&here[&hist_a], &here[&hist_b]);
                    for choices in hist_a.choices() {
                        if !hist_b.admits(&choices) {
                            continue;
                        }
                        let k = choice_index(n, &choices);
                        if !ma[k].is_positive_beyond(tolerance) || !mb[k].is_positive_beyond(tolerance) {
                            continue;
                        }
                        let mut c = choices.clone();
                        c.push(0);
                        for y in b.iter() {
                            *c.last_mut().unwrap() = y;
                            let kk = choice_index(n, &c);
                            let lhs = next[*ext_a][kk].clone() * mb[k].clone();
                            let rhs = next[*ext_b][kk].clone() * ma[k].clone();
                            checker.eq(&lhs, &rhs, || {
                                format!(
                                    "choice {} from {} after {} vs {}",
                                    u.label(y),
                                    u.format_menu(*b),
                                    cell(u, "h", &choices, &hist_a.0),
                                    hist_b.format(u)
                                )
                            });
                        }
                    }
                }
            }
        }
    }
    checker.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub holds: bool,
    pub reports: Vec<AxiomReport>,
}

impl Verdict {
    pub fn report(&self, axiom: &str) -> Option<&AxiomReport> {
        self.reports.iter().find(|r| r.axiom == axiom)
    }
}

fn require_full<S: Scalar>(p: &RandomJointChoiceRule<S>) -> Result<()> {
    match p.domain().first_missing(p.universe()) {
        Some(m) => Err(Error::DomainIncomplete(m.format(p.universe()))),
        None => Ok(()),
    }
}

/// Complete monotonicity and marginality on a full-domain rule.
pub fn check_cdrum<S: Scalar>(p: &RandomJointChoiceRule<S>, tolerance: f64) -> Result<Verdict> {
    require_full(p)?;
    let q = mobius_inverse(p)?;
    let reports = vec![check_complete_monotonicity(&q, tolerance), check_marginality(p, tolerance)];
    Ok(Verdict { holds: reports.iter().all(|r| r.holds), reports })
}

/// [`check_cdrum`] plus choice set independence.
pub fn check_si_cdrum<S: Scalar>(p: &RandomJointChoiceRule<S>, tolerance: f64) -> Result<Verdict> {
    let mut v = check_cdrum(p, tolerance)?;
    let csi = check_choice_set_independence(p, tolerance);
    v.holds &= csi.holds;
    v.reports.push(csi);
    Ok(v)
}

/// Every check in this module, for reporting.
pub fn check_all<S: Scalar>(p: &RandomJointChoiceRule<S>, tolerance: f64) -> Result<Vec<AxiomReport>> {
    require_full(p)?;
    let q = mobius_inverse(p)?;
    Ok(vec![
        check_complete_monotonicity(&q, tolerance),
        check_marginality(p, tolerance),
        check_recursivity(&q, tolerance),
        check_regularity(p, tolerance),
        check_increasing_differences(p, tolerance),
        check_choice_set_independence(p, tolerance),
    ])
}
