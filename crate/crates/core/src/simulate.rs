//! Ground-truth generators: extreme-point mixtures, perturbations and sampled agents.
//!
//! Every generator is a deterministic function of its inputs and seed. Randomness
//! comes from ChaCha20 seeded with `seed_from_u64`; per-agent streams use
//! `set_stream((menu_index << 32) | agent)`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use crate::data::{choice_index, MenuSequence, ObservationDomain, RandomJointChoiceRule};
use crate::error::{Error, Result};
use crate::lattice::{Alt, LinearOrder, Universe};
use crate::parametric::LogitParams;
use crate::recovery::{CdrumRepresentation, PreferenceDistribution};
use crate::scalar::Scalar;

/// Name of the generator behind every seeded routine.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha, seed_from_u64)";

/// A deterministic agent: one order for every choice prefix, the empty prefix included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtremePoint {
    periods: usize,
    orders: BTreeMap<Vec<Alt>, LinearOrder>,
}

impl ExtremePoint {
    pub fn new(periods: usize, orders: BTreeMap<Vec<Alt>, LinearOrder>) -> Result<Self> {
        let n = orders.get(&Vec::new()).map(|o| o.ranking().len()).ok_or_else(|| {
            Error::InvalidParameters("an extreme point needs a first-period order".into())
        })?;
        let mut prefixes = vec![Vec::new()];
        for _ in 1..periods {
            prefixes = prefixes
                .iter()
                .flat_map(|p: &Vec<Alt>| {
                    (0..n).map(move |x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
            if let Some(missing) = prefixes.iter().find(|p| !orders.contains_key(*p)) {
                return Err(Error::InvalidParameters(format!("no order after choices {:?}", missing)));
            }
        }
        Ok(ExtremePoint { periods, orders })
    }

    /// `(≻, ≻_{x₁}, …, ≻_{x_n})`: a first order and one order per first choice.
    pub fn two_period(first: LinearOrder, next: Vec<LinearOrder>) -> Self {
        let mut orders = BTreeMap::new();
        orders.insert(Vec::new(), first);
        for (x, o) in next.into_iter().enumerate() {
            orders.insert(vec![x], o);
        }
        ExtremePoint { periods: 2, orders }
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn order(&self, prefix: &[Alt]) -> &LinearOrder {
        &self.orders[prefix]
    }

    /// The agent's choices along `menus`.
    pub fn choose(&self, menus: &MenuSequence) -> Vec<Alt> {
        let mut choices = Vec::with_capacity(menus.len());
        for &m in &menus.0 {
            let x = self.orders[&choices].best_in(m);
            choices.push(x);
        }
        choices
    }

    /// Uniform draw over `ℒ(X)` for every prefix.
    pub fn random(n: usize, periods: usize, rng: &mut impl Rng) -> Self {
        let mut orders = BTreeMap::new();
        let mut prefixes = vec![Vec::new()];
        for t in 0..periods {
            let mut next = Vec::new();
            for p in prefixes {
                let mut ranking: Vec<Alt> = (0..n).collect();
                ranking.shuffle(rng);
                orders.insert(p.clone(), LinearOrder::new(ranking).expect("permutation"));
                if t + 1 < periods {
                    for x in 0..n {
                        let mut q = p.clone();
                        q.push(x);
                        next.push(q);
                    }
                }
            }
            prefixes = next;
        }
        ExtremePoint { periods, orders }
    }
}

/// Weighted sum of extreme points evaluated on `domain`.
pub fn extreme_point_rule<S: Scalar>(
    universe: &Universe,
    domain: &ObservationDomain,
    components: &[(S, ExtremePoint)],
) -> Result<RandomJointChoiceRule<S>> {
    let n = universe.size();
    let periods = domain.periods();
    if components.iter().any(|(_, e)| e.periods != periods || e.order(&[]).ranking().len() != n) {
        return Err(Error::InvalidParameters("extreme point does not match the domain".into()));
    }
    let mut table = BTreeMap::new();
    for menus in domain.iter() {
        let mut block = vec![S::zero(); n.pow(periods as u32)];
        for (w, e) in components {
            block[choice_index(n, &e.choose(menus))] += w.clone();
        }
        table.insert(menus.clone(), block);
    }
    Ok(RandomJointChoiceRule::from_table(universe.clone(), periods, table, S::default_tolerance())?.rule)
}

/// A random mixture and the certificate that produced it.
#[derive(Debug, Clone)]
pub struct Mixture<S> {
    pub rule: RandomJointChoiceRule<S>,
    pub weights: Vec<S>,
    pub components: Vec<ExtremePoint>,
}

const QUANTUM: f64 = 1e6;

/// `k` uniform extreme points with Dirichlet(1, …, 1) weights quantized to multiples of `1/Σk_i`.
pub fn random_mixture<S: Scalar>(universe: &Universe, periods: usize, k: usize, seed: u64) -> Result<Mixture<S>> {
    if k == 0 {
        return Err(Error::InvalidParameters("a mixture needs at least one component".into()));
    }
    if periods == 0 {
        return Err(Error::InvalidParameters("a mixture needs at least one period".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let gamma = Gamma::new(1.0, 1.0).expect("valid shape");
    let n = universe.size();
    let mut components = Vec::with_capacity(k);
    let mut ticks = Vec::with_capacity(k);
    for _ in 0..k {
        components.push(ExtremePoint::random(n, periods, &mut rng));
        let g: f64 = gamma.sample(&mut rng);
        ticks.push(((g * QUANTUM).ceil() as i64).max(1));
    }
    let total: i64 = ticks.iter().sum();
    let weights: Vec<S> = ticks.iter().map(|&t| S::from_ratio(t, total)).collect();
    let pairs: Vec<(S, ExtremePoint)> = weights.iter().cloned().zip(components.iter().cloned()).collect();
    let rule = extreme_point_rule(universe, &ObservationDomain::full(universe, periods), &pairs)?;
    Ok(Mixture { rule, weights, components })
}

/// Adds a mean-zero disturbance of size `epsilon` to every block, clamps at zero and renormalizes.
pub fn perturb<S: Scalar>(p: &RandomJointChoiceRule<S>, epsilon: f64, seed: u64) -> Result<RandomJointChoiceRule<S>> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::InvalidParameters("epsilon must be finite and nonnegative".into()));
    }
    if epsilon == 0.0 {
        return Ok(p.clone());
    }
    let eps = S::parse_prob(&format!("{}", epsilon)).expect("finite decimal");
    let n = p.universe().size();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut table = BTreeMap::new();
    for (menus, block) in p.blocks() {
        let cells: Vec<usize> = menus.choices().iter().map(|c| choice_index(n, c)).collect();
        let noise: Vec<S> =
            cells.iter().map(|_| S::from_ratio(rng.random_range(-1_000_000i64..=1_000_000), 1_000_000)).collect();
        let mean = noise.iter().cloned().fold(S::zero(), |a, b| a + b) / S::from_ratio(cells.len() as i64, 1);
        let mut out = block.to_vec();
        let mut total = S::zero();
        for (&i, d) in cells.iter().zip(noise) {
            let v = out[i].clone() + eps.clone() * (d - mean.clone());
            out[i] = if v < S::zero() { S::zero() } else { v };
            total += out[i].clone();
        }
        if total.is_zero() {
            out = block.to_vec();
        } else {
            for &i in &cells {
                out[i] = out[i].clone() / total.clone();
            }
        }
        table.insert(menus.clone(), out);
    }
    Ok(RandomJointChoiceRule::from_table(p.universe().clone(), p.periods(), table, S::default_tolerance())?.rule)
}

/// What simulated agents follow.
#[derive(Debug, Clone)]
pub enum ChoiceSource<'a, S> {
    Representation(&'a CdrumRepresentation<S>),
    Logit(&'a LogitParams),
}

/// Cumulative-weight sampler over a preference distribution.
struct OrderSampler<'a> {
    orders: Vec<&'a LinearOrder>,
    cumulative: Vec<f64>,
}

impl<'a> OrderSampler<'a> {
    fn new<S: Scalar>(d: &'a PreferenceDistribution<S>) -> Self {
        let mut orders = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (o, w) in d.support() {
            acc += w.to_f64();
            orders.push(o);
            cumulative.push(acc);
        }
        OrderSampler { orders, cumulative }
    }

    fn draw(&self, rng: &mut impl Rng) -> &'a LinearOrder {
        let u = rng.random::<f64>() * self.cumulative.last().copied().unwrap_or(0.0);
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.orders.len() - 1);
        self.orders[i]
    }
}

fn draw_index(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn simulate_agent<S: Scalar>(source: &ChoiceSource<'_, S>, menus: &MenuSequence, rng: &mut impl Rng) -> Vec<Alt> {
    let mut choices = Vec::with_capacity(menus.len());
    match source {
        ChoiceSource::Representation(rep) => {
            let n = rep.universe.size();
            let uniform = PreferenceDistribution::<S>::uniform(n);
            let mut cells = Vec::new();
            let mut order = OrderSampler::new(&rep.nu).draw(rng).clone();
            for (t, &m) in menus.0.iter().enumerate() {
                if t > 0 {
                    let key = crate::data::History { choices: choices.clone(), menus: cells.clone() };
                    let kernel = rep.transitions[t - 1].kernel(&key).unwrap_or(&uniform);
                    order = OrderSampler::new(kernel).draw(rng).clone();
                }
                let x = order.best_in(m);
                cells.push(order.cell_menu(x));
                choices.push(x);
            }
        }
        ChoiceSource::Logit(params) => {
            for &m in &menus.0 {
                let probs = params.block(&choices, m);
                choices.push(draw_index(&probs, rng));
            }
        }
    }
    choices
}

/// Empirical frequencies of `n_agents` independent trajectories per menu sequence.
pub fn sample_choices<S: Scalar>(
    source: &ChoiceSource<'_, S>,
    domain: &ObservationDomain,
    n_agents: usize,
    seed: u64,
) -> Result<RandomJointChoiceRule<S>> {
    if n_agents == 0 {
        return Err(Error::InvalidParameters("at least one agent is needed".into()));
    }
    let universe = match source {
        ChoiceSource::Representation(rep) => {
            if rep.periods != domain.periods() {
                return Err(Error::PeriodMismatch { expected: rep.periods, found: domain.periods() });
            }
            rep.universe.clone()
        }
        ChoiceSource::Logit(params) => params.universe().clone(),
    };
    let n = universe.size();
    let periods = domain.periods();
    let mut table = BTreeMap::new();
    for (mi, menus) in domain.iter().enumerate() {
        let counts = (0..n_agents)
            .into_par_iter()
            .fold(
                || vec![0i64; n.pow(periods as u32)],
                |mut acc, agent| {
                    let mut rng = ChaCha20Rng::seed_from_u64(seed);
                    rng.set_stream(((mi as u64) << 32) | agent as u64);
                    acc[choice_index(n, &simulate_agent(source, menus, &mut rng))] += 1;
                    acc
                },
            )
            .reduce(
                || vec![0i64; n.pow(periods as u32)],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        let block = counts.into_iter().map(|c| S::from_ratio(c, n_agents as i64)).collect();
        table.insert(menus.clone(), block);
    }
    Ok(RandomJointChoiceRule::from_table(universe, periods, table, S::default_tolerance())?.rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;
    use crate::axioms::check_cdrum;
    use crate::fixtures;
    use crate::scalar::Rational;

    #[test]
    fn single_component_is_deterministic() {
        let u = Universe::letters(3);
        let m = random_mixture::<Rational>(&u, 2, 1, 5).unwrap();
        for (_, block) in m.rule.blocks() {
            assert_eq!(block.iter().filter(|v| !v.is_zero()).count(), 1);
        }
    }

    #[test]
    fn mixtures_pass_the_axioms_and_repeat() {
        let u = Universe::letters(3);
        for seed in 0..5 {
            let a = random_mixture::<Rational>(&u, 2, 4, seed).unwrap();
            assert!(check_cdrum(&a.rule, 0.0).unwrap().holds);
            let b = random_mixture::<Rational>(&u, 2, 4, seed).unwrap();
            assert_eq!(a.rule, b.rule);
        }
    }

    #[test]
    fn perturbation_keeps_normalization() {
        let p = fixtures::example2::<Rational>();
        assert_eq!(perturb(&p, 0.0, 1).unwrap(), p);
        let q = perturb(&p, 0.2, 1).unwrap();
        for (_, block) in q.blocks() {
            assert_eq!(block.iter().cloned().fold(Rational::from_ratio(0, 1), |a, b| a + b), Rational::from_ratio(1, 1));
        }
        assert!(!check_cdrum(&q, 0.0).unwrap().holds);
    }

    #[test]
    fn one_agent_gives_one_hot_blocks() {
        let p = fixtures::example2::<Rational>();
        let rep = crate::recovery::recover_representation(&p, 0.0).unwrap();
        let src = ChoiceSource::Representation(&rep);
        let s = sample_choices(&src, &p.domain(), 1, 3).unwrap();
        for (_, block) in s.blocks() {
            assert_eq!(block.iter().filter(|v| !v.is_zero()).count(), 1);
        }
        assert_eq!(s, sample_choices(&src, &p.domain(), 1, 3).unwrap());
    }

    #[test]
    fn large_samples_converge() {
        let p = fixtures::example2::<f64>();
        let rep = crate::recovery::recover_representation(&p, 1e-9).unwrap();
        let s = sample_choices(&ChoiceSource::Representation(&rep), &p.domain(), 40_000, 11).unwrap();
        assert!(s.sup_distance(&p) < 0.02);
    }
}
