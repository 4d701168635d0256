//! Flow-graph decomposition and explicit representations.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::axioms::{check_cdrum, check_choice_set_independence};
use crate::data::{History, ObservationDomain, RandomJointChoiceRule};
use crate::error::{Error, Result};
use crate::lattice::{factorial, Alt, LinearOrder, Menu, Universe};
use crate::mobius::{mobius_depths, mobius_inverse, MobiusTable};
use crate::scalar::{NumericMode, Scalar};

/// Residual threshold used by path extraction in float mode.
pub const FLOAT_RESIDUAL: f64 = 1e-12;

fn residual_threshold<S: Scalar>() -> f64 {
    match S::MODE {
        NumericMode::Float => FLOAT_RESIDUAL,
        NumericMode::Rational => 0.0,
    }
}

/// Distribution over linear orders; orders absent from the map have weight zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceDistribution<S> {
    n: usize,
    weights: BTreeMap<LinearOrder, S>,
}

impl<S: Scalar> PreferenceDistribution<S> {
    pub fn new(n: usize, weights: BTreeMap<LinearOrder, S>, tolerance: f64) -> Result<Self> {
        let mut total = S::zero();
        for (o, w) in &weights {
            if o.ranking().len() != n {
                return Err(Error::InvalidParameters(format!("order {:?} has the wrong length", o.ranking())));
            }
            if w.is_negative_beyond(0.0) {
                return Err(Error::InvalidParameters("negative preference weight".into()));
            }
            total += w.clone();
        }
        let dev = total - S::one();
        if dev.is_nonzero_beyond(tolerance) {
            return Err(Error::InvalidParameters(format!("preference weights sum to 1 {:+e}", dev.to_f64())));
        }
        Ok(PreferenceDistribution { n, weights })
    }

    pub fn uniform(n: usize) -> Self {
        let w = S::from_ratio(1, factorial(n) as i64);
        PreferenceDistribution { n, weights: LinearOrder::all(n).into_iter().map(|o| (o, w.clone())).collect() }
    }

    pub fn degenerate(order: LinearOrder) -> Self {
        PreferenceDistribution { n: order.ranking().len(), weights: [(order, S::one())].into_iter().collect() }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn weight(&self, order: &LinearOrder) -> S {
        self.weights.get(order).cloned().unwrap_or_else(S::zero)
    }

    /// Orders with nonzero weight, lexicographic.
    pub fn support(&self) -> impl Iterator<Item = (&LinearOrder, &S)> {
        self.weights.iter().filter(|(_, w)| !w.is_zero())
    }

    /// `ν(I(x, A))`.
    pub fn cell_mass(&self, x: Alt, menu: Menu) -> S {
        self.support().filter(|(o, _)| o.in_cell(x, menu)).fold(S::zero(), |acc, (_, w)| acc + w.clone())
    }

    pub fn total(&self) -> S {
        self.weights.values().fold(S::zero(), |acc, w| acc + w.clone())
    }
}

/// Uniform mass on `I(x, A)`: `(n−|A|)!·(|A|−1)!/n!`.
fn uniform_cell_mass<S: Scalar>(n: usize, menu: Menu) -> S {
    let k = menu.len();
    S::from_ratio((factorial(n - k) * factorial(k - 1)) as i64, factorial(n) as i64)
}

/// Transition kernels of one degree keyed by choice history and the `I`-cell history,
/// each cell `I(x_i, A_i)` being recorded by its menu `A_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionFunction<S> {
    pub degree: usize,
    pub kernels: BTreeMap<History, PreferenceDistribution<S>>,
    pub state_independent: bool,
}

impl<S: Scalar> TransitionFunction<S> {
    pub fn kernel(&self, key: &History) -> Option<&PreferenceDistribution<S>> {
        self.kernels.get(key)
    }

    /// True when kernels sharing a choice history coincide.
    pub fn is_state_independent(&self) -> bool {
        let mut seen: BTreeMap<&[Alt], &PreferenceDistribution<S>> = BTreeMap::new();
        for (h, k) in &self.kernels {
            match seen.get(h.choices.as_slice()) {
                Some(prev) if *prev != k => return false,
                Some(_) => {}
                None => {
                    seen.insert(&h.choices, k);
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdrumRepresentation<S> {
    pub universe: Universe,
    pub periods: usize,
    pub nu: PreferenceDistribution<S>,
    pub transitions: Vec<TransitionFunction<S>>,
}

impl<S: Scalar> CdrumRepresentation<S> {
    /// Kernel at a history, uniform where none is stored.
    fn kernel_mass(&self, key: &History, x: Alt, menu: Menu) -> S {
        match self.transitions[key.len() - 1].kernel(key) {
            Some(k) => k.cell_mass(x, menu),
            None => uniform_cell_mass(self.universe.size(), menu),
        }
    }

    pub fn is_state_independent(&self) -> bool {
        self.transitions.iter().all(|t| t.state_independent)
    }

    pub fn to_json(&self) -> Value {
        let u = &self.universe;
        let dist = |d: &PreferenceDistribution<S>| -> Value {
            let mut m = Map::new();
            for (o, w) in d.support() {
                m.insert(o.format(u), Value::String(w.format_prob()));
            }
            Value::Object(m)
        };
        let transitions: Vec<Value> = self
            .transitions
            .iter()
            .map(|t| {
                let kernels: Vec<Value> = t
                    .kernels
                    .iter()
                    .map(|(h, k)| {
                        json!({
                            "choices": h.choices.iter().map(|&c| u.label(c)).collect::<Vec<_>>(),
                            "cells": h.menus.iter().map(|&m| u.menu_labels(m)).collect::<Vec<_>>(),
                            "weights": dist(k),
                        })
                    })
                    .collect();
                json!({"degree": t.degree, "state_independent": t.state_independent, "kernels": kernels})
            })
            .collect();
        json!({
            "alternatives": u.labels(),
            "periods": self.periods,
            "numeric_mode": S::MODE.as_str(),
            "nu": dist(&self.nu),
            "transitions": transitions,
        })
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let err = |m: &str| Error::parse("representation", m);
        let labels: Vec<String> = value
            .get("alternatives")
            .and_then(|v| serde_json::from_value(v.clone()).ok())
            .ok_or_else(|| err("missing alternatives"))?;
        let universe = Universe::new(labels)?;
        let n = universe.size();
        let periods = value.get("periods").and_then(Value::as_u64).ok_or_else(|| err("missing periods"))? as usize;
        let tol = S::default_tolerance();
        let dist = |v: &Value| -> Result<PreferenceDistribution<S>> {
            let obj = v.as_object().ok_or_else(|| err("weights must be an object"))?;
            let mut weights = BTreeMap::new();
            for (k, w) in obj {
                let o = LinearOrder::parse(k, &universe)?;
                let w = w.as_str().and_then(S::parse_prob).ok_or_else(|| err("weights must be probability strings"))?;
                weights.insert(o, w);
            }
            PreferenceDistribution::new(n, weights, tol)
        };
        let nu = dist(value.get("nu").ok_or_else(|| err("missing nu"))?)?;
        let mut transitions = Vec::new();
        for t in value.get("transitions").and_then(Value::as_array).cloned().unwrap_or_default() {
            let degree = t.get("degree").and_then(Value::as_u64).ok_or_else(|| err("missing degree"))? as usize;
            let mut kernels = BTreeMap::new();
            for k in t.get("kernels").and_then(Value::as_array).cloned().unwrap_or_default() {
                let choices: Vec<String> = serde_json::from_value(k["choices"].clone()).map_err(|e| err(&e.to_string()))?;
                let cells: Vec<Vec<String>> = serde_json::from_value(k["cells"].clone()).map_err(|e| err(&e.to_string()))?;
                let h = History {
                    choices: choices.iter().map(|c| universe.index(c)).collect::<Result<_>>()?,
                    menus: cells.iter().map(|m| universe.menu(m)).collect::<Result<_>>()?,
                };
                if h.len() != degree || h.menus.len() != degree {
                    return Err(err("kernel key length differs from its degree"));
                }
                kernels.insert(h, dist(&k["weights"])?);
            }
            let state_independent = t.get("state_independent").and_then(Value::as_bool).unwrap_or(false);
            transitions.push(TransitionFunction { degree, kernels, state_independent });
        }
        if transitions.len() + 1 != periods {
            return Err(err("expected one transition function per later period"));
        }
        Ok(CdrumRepresentation { universe, periods, nu, transitions })
    }
}

/// Lattice graph for one history; the edge `B → B∖{y}` carries `q(history, y, B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowGraph<S> {
    universe: Universe,
    history: History,
    capacity: Vec<S>,
}

impl<S: Scalar> FlowGraph<S> {
    pub fn history(&self) -> &History {
        &self.history
    }

    /// Capacity of the edge leaving `from` by removing `y`.
    pub fn capacity(&self, from: Menu, y: Alt) -> &S {
        &self.capacity[from.bits() as usize * self.universe.size() + y]
    }

    /// Total flow leaving `X`.
    pub fn outflow(&self) -> S {
        let full = self.universe.full();
        full.iter().fold(S::zero(), |acc, y| acc + self.capacity(full, y).clone())
    }

    fn edges(&self) -> impl Iterator<Item = (Menu, Alt)> + '_ {
        self.universe.menus().into_iter().flat_map(|b| b.iter().map(move |y| (b, y)))
    }
}

/// Graph of a history from the Möbius table one period deeper than the history.
pub fn build_flow_graph<S: Scalar>(q: &MobiusTable<S>, history: &History) -> FlowGraph<S> {
    assert_eq!(q.depth(), history.len() + 1, "table depth must exceed the history length by one");
    let u = q.universe().clone();
    let n = u.size();
    let mut capacity = vec![S::zero(); (1usize << n) * n];
    let mut menus = history.menus.clone();
    menus.push(Menu(0));
    let mut choices = history.choices.clone();
    choices.push(0);
    for b in u.menus() {
        *menus.last_mut().unwrap() = b;
        for y in b.iter() {
            *choices.last_mut().unwrap() = y;
            capacity[b.bits() as usize * n + y] = q.get(&menus, &choices).clone();
        }
    }
    FlowGraph { universe: u, history: history.clone(), capacity }
}

/// Path-flow decomposition of a conserving graph into weighted linear orders.
pub fn decompose<S: Scalar>(graph: &FlowGraph<S>, tolerance: f64) -> Result<PreferenceDistribution<S>> {
    let u = &graph.universe;
    let n = u.size();
    let full = u.full();
    let eps = residual_threshold::<S>();

    for (b, y) in graph.edges() {
        let c = graph.capacity(b, y);
        if c.is_negative_beyond(tolerance) {
            return Err(Error::NegativeCapacity {
                edge: format!("{} -> {}", u.format_menu(b), u.format_menu(b.without(y))),
                value: c.to_f64(),
            });
        }
    }
    for node in u.menus() {
        if node == full {
            continue;
        }
        let inflow = full
            .iter()
            .filter(|&z| !node.contains(z))
            .fold(S::zero(), |acc, z| acc + graph.capacity(node.with(z), z).clone());
        let outflow = node.iter().fold(S::zero(), |acc, y| acc + graph.capacity(node, y).clone());
        let imbalance = inflow - outflow;
        if imbalance.is_nonzero_beyond(tolerance) {
            return Err(Error::ConservationViolated { node: u.format_menu(node), imbalance: imbalance.to_f64() });
        }
    }

    let total = graph.outflow();
    if !total.is_positive_beyond(eps) {
        return Ok(PreferenceDistribution::uniform(n));
    }
    let mut residual: Vec<S> = graph
        .capacity
        .iter()
        .map(|c| if c.is_negative_beyond(0.0) { S::zero() } else { c.clone() / total.clone() })
        .collect();
    let at = |b: Menu, y: Alt| b.bits() as usize * n + y;

    let mut weights: BTreeMap<LinearOrder, S> = BTreeMap::new();
    'paths: loop {
        let mut node = full;
        let mut path: Vec<(Menu, Alt)> = Vec::with_capacity(n);
        while !node.is_empty() {
            let Some(y) = node.iter().find(|&y| residual[at(node, y)].is_positive_beyond(eps)) else {
                // only rounding dust remains
                break 'paths;
            };
            path.push((node, y));
            node = node.without(y);
        }
        let (arg, min) = path
            .iter()
            .map(|&(b, y)| (at(b, y), residual[at(b, y)].clone()))
            .reduce(|a, b| if b.1 < a.1 { b } else { a })
            .expect("nonempty path");
        for &(b, y) in &path {
            let i = at(b, y);
            residual[i] = if i == arg { S::zero() } else { residual[i].clone() - min.clone() };
        }
        let order = LinearOrder::new(path.iter().map(|&(_, y)| y).collect()).expect("path visits every alternative");
        *weights.entry(order).or_insert_with(S::zero) += min;
    }

    let sum = weights.values().fold(S::zero(), |acc, w| acc + w.clone());
    if S::MODE == NumericMode::Float {
        for w in weights.values_mut() {
            *w = w.clone() / sum.clone();
        }
    }
    PreferenceDistribution::new(n, weights, tolerance.max(S::default_tolerance()))
}

/// Recovers `(ν, t¹..t^{T−1})` from a rule passing complete monotonicity and marginality.
///
/// Kernels are stored only for histories with positive Möbius mass. When choice set
/// independence holds, one kernel per choice history is shared by every cell history.
pub fn recover_representation<S: Scalar>(p: &RandomJointChoiceRule<S>, tolerance: f64) -> Result<CdrumRepresentation<S>> {
    let verdict = check_cdrum(p, tolerance)?;
    if !verdict.holds {
        let failing = verdict.reports.iter().find(|r| !r.holds).expect("a failing report");
        let w = failing.first_witness().map(|w| w.describe()).unwrap_or_default();
        return Err(Error::NotCdrum(format!("{}: {}", failing.axiom, w)));
    }
    let state_independent = check_choice_set_independence(p, tolerance).holds;
    let u = p.universe().clone();
    let depths = mobius_depths(p, tolerance)?;
    let nu = decompose(&build_flow_graph(&depths[0], &History::null()), tolerance)?;

    let mut transitions = Vec::with_capacity(p.periods().saturating_sub(1));
    for degree in 1..p.periods() {
        let here = &depths[degree - 1];
        let next = &depths[degree];
        let mut positive: Vec<History> = Vec::new();
        for menus in here.menu_sequences() {
            for choices in menus.choices() {
                if here.get(&menus.0, &choices).is_positive_beyond(tolerance) {
                    positive.push(History { choices, menus: menus.0.clone() });
                }
            }
        }
        let kernels: BTreeMap<History, PreferenceDistribution<S>> = if state_independent {
            let mut by_choices: BTreeMap<Vec<Alt>, PreferenceDistribution<S>> = BTreeMap::new();
            let mut out = BTreeMap::new();
            for h in positive {
                let k = match by_choices.get(&h.choices) {
                    Some(k) => k.clone(),
                    None => {
                        let k = decompose(&build_flow_graph(next, &h), tolerance)?;
                        by_choices.insert(h.choices.clone(), k.clone());
                        k
                    }
                };
                out.insert(h, k);
            }
            out
        } else {
            positive
                .par_iter()
                .map(|h| decompose(&build_flow_graph(next, h), tolerance).map(|k| (h.clone(), k)))
                .collect::<Result<_>>()?
        };
        transitions.push(TransitionFunction { degree, kernels, state_independent });
    }
    Ok(CdrumRepresentation { universe: u, periods: p.periods(), nu, transitions })
}

/// Forward evaluation of a representation on a domain.
pub fn evaluate_representation<S: Scalar>(
    rep: &CdrumRepresentation<S>,
    domain: &ObservationDomain,
) -> Result<RandomJointChoiceRule<S>> {
    if domain.periods() != rep.periods {
        return Err(Error::PeriodMismatch { expected: rep.periods, found: domain.periods() });
    }
    let n = rep.universe.size();
    let uniform = PreferenceDistribution::<S>::uniform(n);
    RandomJointChoiceRule::from_fn(&rep.universe, domain, S::default_tolerance(), |menus, choices| {
        // mass of agents consistent with the prefix, keyed by their I-cell history
        let mut states: BTreeMap<Vec<Menu>, S> = BTreeMap::new();
        for (o, w) in rep.nu.support() {
            let a = menus.0[0];
            if o.best_in(a) == choices[0] {
                *states.entry(vec![o.cell_menu(choices[0])]).or_insert_with(S::zero) += w.clone();
            }
        }
        for t in 1..rep.periods {
            let mut next: BTreeMap<Vec<Menu>, S> = BTreeMap::new();
            let (x, a) = (choices[t], menus.0[t]);
            for (cells, mass) in states {
                let key = History { choices: choices[..t].to_vec(), menus: cells.clone() };
                let kernel = rep.transitions[t - 1].kernel(&key).unwrap_or(&uniform);
                for (o, w) in kernel.support() {
                    if o.best_in(a) == x {
                        let mut c = cells.clone();
                        c.push(o.cell_menu(x));
                        *next.entry(c).or_insert_with(S::zero) += mass.clone() * w.clone();
                    }
                }
            }
            states = next;
        }
        states.into_values().fold(S::zero(), |acc, v| acc + v)
    })
}

/// Sup-norm gap between the Möbius inverse of `p` and the cell masses implied by `rep`.
pub fn verify_representation<S: Scalar>(rep: &CdrumRepresentation<S>, p: &RandomJointChoiceRule<S>) -> Result<f64> {
    let q = mobius_inverse(p)?;
    let mut worst = 0.0f64;
    for (menus, choices, value) in q.cells() {
        let mut implied = rep.nu.cell_mass(choices[0], menus.0[0]);
        for t in 1..rep.periods {
            if implied.is_zero() {
                break;
            }
            let key = History { choices: choices[..t].to_vec(), menus: menus.0[..t].to_vec() };
            implied = implied * rep.kernel_mass(&key, choices[t], menus.0[t]);
        }
        worst = worst.max((implied - value.clone()).to_f64().abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn ord(u: &Universe, s: &str) -> LinearOrder {
        LinearOrder::parse(s, u).unwrap()
    }

    #[test]
    fn deterministic_graph_is_a_single_path() {
        let u = Universe::new(["x", "y", "z"]).unwrap();
        let p = fixtures::deterministic::<Rational>(&u, &[0, 1, 2], 1);
        let q = mobius_inverse(&p).unwrap();
        let g = build_flow_graph(&q, &History::null());
        let path = [(0b111, 0), (0b110, 1), (0b100, 2)];
        for b in u.menus() {
            for y in b.iter() {
                let expected = if path.contains(&(b.bits(), y)) { r(1, 1) } else { r(0, 1) };
                assert_eq!(g.capacity(b, y), &expected);
            }
        }
        let d = decompose(&g, 0.0).unwrap();
        assert_eq!(d.weight(&ord(&u, "x>y>z")), r(1, 1));
    }

    #[test]
    fn zero_graph_gives_uniform() {
        let u = Universe::letters(3);
        let q = MobiusTable::<Rational>::zeros(&u, 1);
        let d = decompose(&build_flow_graph(&q, &History::null()), 0.0).unwrap();
        assert_eq!(d.support().count(), 6);
        assert!(d.support().all(|(_, w)| *w == r(1, 6)));
    }

    #[test]
    fn example2_recovery() {
        let p = fixtures::example2::<Rational>();
        let u = p.universe().clone();
        let rep = recover_representation(&p, 0.0).unwrap();
        assert_eq!(rep.nu.weight(&ord(&u, "x>y")), r(1, 2));
        assert_eq!(rep.nu.weight(&ord(&u, "y>x")), r(1, 2));
        assert!(rep.is_state_independent());
        for (h, k) in &rep.transitions[0].kernels {
            let first = h.choices[0];
            for (o, _) in k.support() {
                assert_eq!(o.ranking()[0], first);
            }
        }
        assert_eq!(evaluate_representation(&rep, &p.domain()).unwrap(), p);
        assert_eq!(verify_representation(&rep, &p).unwrap(), 0.0);
    }

    #[test]
    fn example4_kernels_depend_on_cells() {
        let p = fixtures::example4::<Rational>();
        let rep = recover_representation(&p, 0.0).unwrap();
        assert!(!rep.transitions[0].state_independent);
        assert!(!rep.transitions[0].is_state_independent());
        assert_eq!(evaluate_representation(&rep, &p.domain()).unwrap(), p);
        assert_eq!(verify_representation(&rep, &p).unwrap(), 0.0);
    }

    #[test]
    fn example1_is_rejected() {
        let p = fixtures::example1::<Rational>();
        assert!(matches!(recover_representation(&p, 0.0), Err(Error::NotCdrum(_))));
    }

    #[test]
    fn negative_capacity_is_reported() {
        let p = fixtures::example1::<Rational>();
        let q = mobius_inverse(&p).unwrap();
        let u = p.universe();
        let h = History { choices: vec![0], menus: vec![u.menu(&["x"]).unwrap()] };
        assert!(matches!(decompose(&build_flow_graph(&q, &h), 0.0), Err(Error::NegativeCapacity { .. })));
    }

    #[test]
    fn broken_conservation_is_reported() {
        let u = Universe::letters(2);
        let mut q = MobiusTable::<Rational>::zeros(&u, 1);
        q.set(&[u.full()], &[0], r(1, 1));
        let g = build_flow_graph(&q, &History::null());
        assert!(matches!(decompose(&g, 0.0), Err(Error::ConservationViolated { .. })));
    }

    #[test]
    fn mismatched_representation_has_positive_gap() {
        let p = fixtures::example4::<Rational>();
        let mut rep = recover_representation(&p, 0.0).unwrap();
        let u = p.universe().clone();
        let mut weights = BTreeMap::new();
        weights.insert(ord(&u, "x>y>z"), r(3, 4));
        weights.insert(ord(&u, "z>y>x"), r(1, 4));
        rep.nu = PreferenceDistribution::new(3, weights, 0.0).unwrap();
        assert!(verify_representation(&rep, &p).unwrap() > 0.1);
    }

    #[test]
    fn single_alternative_verifies_to_zero() {
        let u = Universe::new(["only"]).unwrap();
        let p = fixtures::deterministic::<Rational>(&u, &[0], 2);
        let rep = recover_representation(&p, 0.0).unwrap();
        assert_eq!(verify_representation(&rep, &p).unwrap(), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let p = fixtures::example4::<Rational>();
        let rep = recover_representation(&p, 0.0).unwrap();
        let back = CdrumRepresentation::<Rational>::from_json(&rep.to_json()).unwrap();
        assert_eq!(evaluate_representation(&back, &p.domain()).unwrap(), p);
        assert_eq!(back.to_json(), rep.to_json());
    }
}
