//! Habit-formation, consumption-dependent and learning logit models.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::axioms::{AxiomReport, Checker};
use crate::data::{ConditionalChoiceSystem, History, ObservationDomain};
use crate::error::{Error, Result};
use crate::lattice::{Alt, Menu, Universe};
use crate::scalar::Scalar;

/// Most recent choice and the length of its trailing run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StreakSignature {
    pub last: Alt,
    pub run: usize,
}

impl StreakSignature {
    /// `None` for the null history.
    pub fn of(choices: &[Alt]) -> Option<Self> {
        let &last = choices.last()?;
        let run = choices.iter().rev().take_while(|&&c| c == last).count();
        Some(StreakSignature { last, run })
    }
}

/// Log-space softmax over `menu`; zero outside it.
fn softmax(n: usize, menu: Menu, utility: impl Fn(Alt) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let max = menu.iter().map(&utility).fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for a in menu.iter() {
        let e = (utility(a) - max).exp();
        out[a] = e;
        total += e;
    }
    for a in menu.iter() {
        out[a] /= total;
    }
    out
}

fn check_finite(values: impl IntoIterator<Item = f64>, what: &str) -> Result<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::InvalidParameters(format!("{} must be finite", what)))
    }
}

/// Base utilities `v` and streak increments `c(x, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HabitLogitParams {
    universe: Universe,
    outside: Alt,
    v: Vec<f64>,
    /// `c[x][n − 1]`; missing entries are zero.
    c: Vec<Vec<f64>>,
}

impl HabitLogitParams {
    pub fn new(universe: Universe, outside: Alt, v: Vec<f64>, c: Vec<Vec<f64>>) -> Result<Self> {
        let n = universe.size();
        if outside >= n || v.len() != n || c.len() != n {
            return Err(Error::InvalidParameters("parameter vectors must cover every alternative".into()));
        }
        check_finite(v.iter().copied(), "utilities")?;
        check_finite(c.iter().flatten().copied(), "habit increments")?;
        if v[outside] != 0.0 || c[outside].iter().any(|&x| x != 0.0) {
            return Err(Error::InvalidParameters("the outside option must have v = 0 and c = 0".into()));
        }
        Ok(HabitLogitParams { universe, outside, v, c })
    }

    /// Two-period form with a single increment per alternative.
    pub fn two_period(universe: Universe, outside: Alt, v: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        Self::new(universe, outside, v, c.into_iter().map(|x| vec![x]).collect())
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn outside(&self) -> Alt {
        self.outside
    }

    pub fn v(&self, x: Alt) -> f64 {
        self.v[x]
    }

    pub fn c(&self, x: Alt, run: usize) -> f64 {
        self.c[x].get(run - 1).copied().unwrap_or(0.0)
    }

    pub fn max_run(&self) -> usize {
        self.c.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_habit_formation(&self) -> bool {
        self.c.iter().flatten().all(|&x| x >= 0.0)
    }

    pub fn is_variety(&self) -> bool {
        self.c.iter().flatten().all(|&x| x <= 0.0)
    }

    /// Choice probabilities after `history` (a choice sequence, possibly empty).
    pub fn block(&self, history: &[Alt], menu: Menu) -> Vec<f64> {
        let streak = StreakSignature::of(history);
        softmax(self.universe.size(), menu, |y| {
            let bonus = match streak {
                Some(s) if s.last == y => (1..=s.run).map(|i| self.c(y, i)).sum(),
                _ => 0.0,
            };
            self.v[y] + bonus
        })
    }

    /// Habit kernel on the full menu: `P[x][y] = p(y, X | x, X)`.
    pub fn kernel(&self) -> Vec<Vec<f64>> {
        let full = self.universe.full();
        (0..self.universe.size()).map(|x| self.block(&[x], full)).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let u = &self.universe;
        let dto = LogitJson {
            model: "habit".into(),
            alternatives: u.labels().to_vec(),
            outside: u.label(self.outside).to_string(),
            v: Some((0..u.size()).map(|x| (u.label(x).to_string(), self.v[x])).collect()),
            c: Some((0..u.size()).map(|x| (u.label(x).to_string(), self.c[x].clone())).collect()),
            mean: None,
            realized: None,
        };
        serde_json::to_value(dto).expect("serializable")
    }
}

/// Prior means `E[v]` and realized utilities `v*`.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningLogitParams {
    universe: Universe,
    outside: Alt,
    mean: Vec<f64>,
    realized: Vec<f64>,
}

impl LearningLogitParams {
    pub fn new(universe: Universe, outside: Alt, mean: Vec<f64>, realized: Vec<f64>) -> Result<Self> {
        let n = universe.size();
        if outside >= n || mean.len() != n || realized.len() != n {
            return Err(Error::InvalidParameters("parameter vectors must cover every alternative".into()));
        }
        check_finite(mean.iter().chain(&realized).copied(), "utilities")?;
        if mean[outside] != 0.0 {
            return Err(Error::InvalidParameters("the outside option must have E[v] = 0".into()));
        }
        Ok(LearningLogitParams { universe, outside, mean, realized })
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn outside(&self) -> Alt {
        self.outside
    }

    pub fn mean(&self, x: Alt) -> f64 {
        self.mean[x]
    }

    pub fn realized(&self, x: Alt) -> f64 {
        self.realized[x]
    }

    pub fn block(&self, history: &[Alt], menu: Menu) -> Vec<f64> {
        softmax(self.universe.size(), menu, |y| if history.contains(&y) { self.realized[y] } else { self.mean[y] })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let u = &self.universe;
        let labelled = |v: &[f64]| (0..u.size()).map(|x| (u.label(x).to_string(), v[x])).collect();
        let dto = LogitJson {
            model: "learning".into(),
            alternatives: u.labels().to_vec(),
            outside: u.label(self.outside).to_string(),
            v: None,
            c: None,
            mean: Some(labelled(&self.mean)),
            realized: Some(labelled(&self.realized)),
        };
        serde_json::to_value(dto).expect("serializable")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LogitJson {
    model: String,
    alternatives: Vec<String>,
    outside: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    v: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    realized: Option<BTreeMap<String, f64>>,
}

/// Either parametric model, as read from JSON.
#[derive(Debug, Clone, PartialEq)]
pub enum LogitParams {
    Habit(HabitLogitParams),
    Learning(LearningLogitParams),
}

impl LogitParams {
    pub fn universe(&self) -> &Universe {
        match self {
            LogitParams::Habit(p) => p.universe(),
            LogitParams::Learning(p) => p.universe(),
        }
    }

    pub fn block(&self, history: &[Alt], menu: Menu) -> Vec<f64> {
        match self {
            LogitParams::Habit(p) => p.block(history, menu),
            LogitParams::Learning(p) => p.block(history, menu),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            LogitParams::Habit(p) => p.to_json(),
            LogitParams::Learning(p) => p.to_json(),
        }
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let dto: LogitJson =
            serde_json::from_value(value.clone()).map_err(|e| Error::parse("parameters", e.to_string()))?;
        let universe = Universe::new(dto.alternatives.clone())?;
        let outside = universe.index(&dto.outside)?;
        let by_label = |m: &Option<BTreeMap<String, f64>>, what: &str| -> Result<Vec<f64>> {
            let m = m.as_ref().ok_or_else(|| Error::parse("parameters", format!("missing `{}`", what)))?;
            universe
                .labels()
                .iter()
                .map(|l| m.get(l).copied().ok_or_else(|| Error::parse("parameters", format!("`{}` lacks {}", what, l))))
                .collect()
        };
        match dto.model.as_str() {
            "habit" => {
                let c = dto.c.as_ref().ok_or_else(|| Error::parse("parameters", "missing `c`"))?;
                let c = universe.labels().iter().map(|l| c.get(l).cloned().unwrap_or_default()).collect();
                Ok(LogitParams::Habit(HabitLogitParams::new(universe.clone(), outside, by_label(&dto.v, "v")?, c)?))
            }
            "learning" => Ok(LogitParams::Learning(LearningLogitParams::new(
                universe.clone(),
                outside,
                by_label(&dto.mean, "mean")?,
                by_label(&dto.realized, "realized")?,
            )?)),
            other => Err(Error::parse("parameters", format!("unknown model `{}`", other))),
        }
    }
}

/// Builds a conditional system over `domain` from a history-to-block map.
fn eval_blocks(
    universe: &Universe,
    domain: &ObservationDomain,
    block: impl Fn(&[Alt], Menu) -> Vec<f64>,
) -> Result<ConditionalChoiceSystem<f64>> {
    let mut first = BTreeMap::new();
    let mut conditional: BTreeMap<History, BTreeMap<Menu, Vec<f64>>> = BTreeMap::new();
    for menus in domain.iter() {
        first.entry(menus.0[0]).or_insert_with(|| block(&[], menus.0[0]));
        for depth in 1..domain.periods() {
            let next = menus.0[depth];
            for choices in menus.prefix(depth).choices() {
                let h = History { choices, menus: menus.0[..depth].to_vec() };
                let b = block(&h.choices, next);
                conditional.entry(h).or_default().entry(next).or_insert(b);
            }
        }
    }
    ConditionalChoiceSystem::new(universe.clone(), domain.clone(), first, conditional, 1e-9)
}

pub fn eval_habit_logit(params: &HabitLogitParams, domain: &ObservationDomain) -> Result<ConditionalChoiceSystem<f64>> {
    eval_blocks(params.universe(), domain, |h, m| params.block(h, m))
}

pub fn eval_learning_logit(
    params: &LearningLogitParams,
    domain: &ObservationDomain,
) -> Result<ConditionalChoiceSystem<f64>> {
    eval_blocks(params.universe(), domain, |h, m| params.block(h, m))
}

fn full_history(x: Alt, run: usize, full: Menu) -> History {
    History { choices: vec![x; run], menus: vec![full; run] }
}

fn prob_at(ccs: &ConditionalChoiceSystem<f64>, history: &History, x: Alt) -> Result<f64> {
    let u = ccs.universe();
    let full = u.full();
    let p = ccs
        .block(history, full)
        .map(|b| b[x])
        .ok_or_else(|| Error::MissingData(format!("no block on {} after {}", u.format_menu(full), history.format(u))))?;
    if p > 0.0 {
        Ok(p)
    } else {
        Err(Error::PositivityViolated(format!("p({},{}|{}) = {}", u.label(x), u.format_menu(full), history.format(u), p)))
    }
}

/// Log-odds against the outside option on the full menu after `history`.
fn log_odds(ccs: &ConditionalChoiceSystem<f64>, history: &History, x: Alt, o: Alt) -> Result<f64> {
    Ok((prob_at(ccs, history, x)? / prob_at(ccs, history, o)?).ln())
}

/// Inverts the habit model from full-menu blocks after runs `x, x, ..., x`.
pub fn identify_habit_logit(ccs: &ConditionalChoiceSystem<f64>, outside: Alt) -> Result<HabitLogitParams> {
    let u = ccs.universe().clone();
    let n = u.size();
    if outside >= n {
        return Err(Error::InvalidParameters("outside option outside the universe".into()));
    }
    let full = u.full();
    let mut v = vec![0.0; n];
    let mut c = vec![Vec::new(); n];
    for x in (0..n).filter(|&x| x != outside) {
        v[x] = log_odds(ccs, &History::null(), x, outside)?;
        let mut previous = v[x];
        for run in 1..ccs.periods() {
            let l = log_odds(ccs, &full_history(x, run, full), x, outside)?;
            c[x].push(l - previous);
            previous = l;
        }
    }
    c[outside] = vec![0.0; ccs.periods().saturating_sub(1)];
    HabitLogitParams::new(u, outside, v, c)
}

/// Inverts the learning model from first-period and one-choice histories.
pub fn identify_learning_logit(ccs: &ConditionalChoiceSystem<f64>, outside: Alt) -> Result<LearningLogitParams> {
    let u = ccs.universe().clone();
    let n = u.size();
    if outside >= n {
        return Err(Error::InvalidParameters("outside option outside the universe".into()));
    }
    if ccs.periods() < 2 {
        return Err(Error::MissingData("realized utilities need a second period".into()));
    }
    let full = u.full();
    let mut mean = vec![0.0; n];
    for x in (0..n).filter(|&x| x != outside) {
        mean[x] = log_odds(ccs, &History::null(), x, outside)?;
    }
    let mut realized = mean.clone();
    for x in (0..n).filter(|&x| x != outside) {
        realized[x] = log_odds(ccs, &full_history(x, 1, full), x, outside)?;
    }
    if let Some(y) = (0..n).find(|&y| y != outside) {
        realized[outside] = log_odds(ccs, &full_history(outside, 1, full), outside, y)? + mean[y];
    }
    LearningLogitParams::new(u, outside, mean, realized)
}

/// Long-run shares `p_s(x) ∝ e^{v_x}·Σ_y e^{v_y + c_y·1{x=y}}` under the one-step habit kernel.
pub fn stationary_distribution(params: &HabitLogitParams) -> Vec<f64> {
    let n = params.universe().size();
    let v: Vec<f64> = (0..n).map(|x| params.v(x)).collect();
    let c: Vec<f64> = (0..n).map(|x| params.c(x, 1)).collect();
    stationary_from_utilities(&v, &c)
}

/// [`stationary_distribution`] on raw utilities, without the outside-option normalization.
pub fn stationary_from_utilities(v: &[f64], c: &[f64]) -> Vec<f64> {
    let vmax = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|&x| (x - vmax).exp()).collect();
    let base: f64 = e.iter().sum();
    // Σ_y e^{v_y + c_y 1{x=y}} = base − e_x + e_x·e^{c_x}
    let weights: Vec<f64> = e.iter().zip(c).map(|(&ex, &cx)| ex * (base + ex * cx.exp_m1())).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

type MenuBlocks<'a, S> = Vec<(Menu, &'a [S])>;
type BlockRef<'a, S> = (&'a History, &'a [S]);
type CellRef<'a, S> = (&'a History, Menu, &'a S);

/// Histories with their blocks, null history first.
fn histories_with_blocks<S: Scalar>(ccs: &ConditionalChoiceSystem<S>) -> Vec<(History, MenuBlocks<'_, S>)> {
    ccs.histories()
        .into_iter()
        .map(|h| {
            let blocks = ccs.menus_after(&h).into_iter().map(|m| (m, ccs.block(&h, m).unwrap())).collect();
            (h, blocks)
        })
        .collect()
}

/// Compares every member of a group to the group's first member.
struct RatioGroups<S> {
    first: BTreeMap<String, (S, S, String)>,
}

impl<S: Scalar> RatioGroups<S> {
    fn new() -> Self {
        RatioGroups { first: BTreeMap::new() }
    }

    /// Records `num/den` under `key`; checks it against the group's reference.
    fn add(&mut self, checker: &mut Checker, key: String, num: &S, den: &S, at: impl Fn() -> String) {
        match self.first.get(&key) {
            None => {
                self.first.insert(key, (num.clone(), den.clone(), at()));
            }
            Some((n0, d0, at0)) => {
                let lhs = num.clone() * d0.clone();
                let rhs = n0.clone() * den.clone();
                checker.eq(&lhs, &rhs, || format!("{}: {} vs {}", key, at(), at0));
            }
        }
    }
}

fn consumed(choices: &[Alt]) -> BTreeSet<Alt> {
    choices.iter().copied().collect()
}

/// Reports for marginality, choice set independence and the logit axioms.
///
/// Ratio axioms are read within each history: the odds of `w` against `z` must agree
/// across every qualifying history and menu. The null history counts as streak zero.
pub fn check_parametric_axioms<S: Scalar>(ccs: &ConditionalChoiceSystem<S>, tolerance: f64) -> Vec<AxiomReport> {
    let u = ccs.universe();
    let n = u.size();
    let all = histories_with_blocks(ccs);
    let label = |h: &History, m: Menu| format!("{} after {}", u.format_menu(m), h.format(u));

    let marginality = Checker::new("marginality", tolerance).finish();

    let mut csi = Checker::new("choice_set_independence", tolerance);
    {
        let mut reference: BTreeMap<(Vec<Alt>, Menu), BlockRef<'_, S>> = BTreeMap::new();
        for (h, blocks) in all.iter().filter(|(h, _)| !h.is_empty()) {
            for &(m, b) in blocks {
                match reference.get(&(h.choices.clone(), m)) {
                    None => {
                        reference.insert((h.choices.clone(), m), (h, b));
                    }
                    Some((h0, b0)) => {
                        for a in m.iter() {
                            csi.eq(&b[a], &b0[a], || format!("p({}) {} vs {}", u.label(a), label(h, m), h0.format(u)));
                        }
                    }
                }
            }
        }
    }

    let mut positivity = Checker::new("positivity", 0.0);
    for (h, blocks) in &all {
        for &(m, b) in blocks {
            for a in m.iter() {
                positivity.positive(&b[a], || format!("p({}) on {}", u.label(a), label(h, m)));
            }
        }
    }

    let mut fhi = Checker::new("far_history_independence", tolerance);
    {
        let mut reference: BTreeMap<(StreakSignature, Menu), (&History, &[S])> = BTreeMap::new();
        for (h, blocks) in &all {
            let Some(sig) = StreakSignature::of(&h.choices) else { continue };
            for &(m, b) in blocks {
                match reference.get(&(sig, m)) {
                    None => {
                        reference.insert((sig, m), (h, b));
                    }
                    Some((h0, b0)) => {
                        for a in m.iter() {
                            fhi.eq(&b[a], &b0[a], || format!("p({}) {} vs {}", u.label(a), label(h, m), h0.format(u)));
                        }
                    }
                }
            }
        }
    }

    let mut fhi_iia = Checker::new("fhi_iia", tolerance);
    {
        let mut groups = RatioGroups::new();
        for (h, blocks) in &all {
            let sig = StreakSignature::of(&h.choices);
            for &(m, b) in blocks {
                for w in m.iter() {
                    for z in m.iter().filter(|&z| z != w) {
                        let key = match sig {
                            Some(s) if s.last == w => format!("odds {}:{} at streak {}", u.label(w), u.label(z), s.run),
                            Some(s) if s.last == z => continue,
                            _ if w < z => format!("odds {}:{} away from the last choice", u.label(w), u.label(z)),
                            _ => continue,
                        };
                        groups.add(&mut fhi_iia, key, &b[w], &b[z], || label(h, m));
                    }
                }
            }
        }
    }

    // habit formation and variety compare run n against run n + 1 of the same alternative
    let mut habit = Checker::new("habit_formation", tolerance);
    let mut variety = Checker::new("preference_for_variety", tolerance);
    {
        let mut by_run: BTreeMap<(Alt, usize), Vec<CellRef<'_, S>>> = BTreeMap::new();
        for (h, blocks) in &all {
            for &(m, b) in blocks {
                for x in m.iter() {
                    let run = match StreakSignature::of(&h.choices) {
                        None => 0,
                        Some(s) if s.last == x => s.run,
                        Some(_) => continue,
                    };
                    by_run.entry((x, run)).or_default().push((h, m, &b[x]));
                }
            }
        }
        for ((x, run), shorter) in &by_run {
            let Some(longer) = by_run.get(&(*x, run + 1)) else { continue };
            for &(h, a, p) in shorter {
                for &(h2, a2, p2) in longer.iter().filter(|(_, a2, _)| *a2 == a) {
                    let at = || format!("p({}) {} vs {}", u.label(*x), label(h, a), label(h2, a2));
                    habit.ge(p2, p, at);
                    variety.ge(p, p2, at);
                }
            }
        }
    }

    let mut intertemporal = Checker::new("intertemporal_iia", tolerance);
    {
        let mut groups = RatioGroups::new();
        for (h, blocks) in &all {
            let eaten = consumed(&h.choices);
            for &(m, b) in blocks {
                for x in m.iter() {
                    for y in m.iter().filter(|&y| y != x) {
                        let key = match (eaten.contains(&x), eaten.contains(&y)) {
                            (false, false) if x < y => "both unconsumed",
                            (false, true) => "second consumed",
                            (true, true) if x < y => "both consumed",
                            _ => continue,
                        };
                        let key = format!("odds {}:{} {}", u.label(x), u.label(y), key);
                        groups.add(&mut intertemporal, key, &b[x], &b[y], || label(h, m));
                    }
                }
            }
        }
    }

    let _ = n;
    vec![
        marginality,
        csi.finish(),
        positivity.finish(),
        fhi.finish(),
        fhi_iia.finish(),
        habit.finish(),
        variety.finish(),
        intertemporal.finish(),
    ]
}

fn holds(reports: &[AxiomReport], axiom: &str) -> bool {
    reports.iter().find(|r| r.axiom == axiom).map(|r| r.holds).unwrap_or(false)
}

/// Model-class verdicts derived from the axiom battery.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub consumption_dependent: bool,
    pub learning: bool,
    pub habit_formation: bool,
    pub variety: bool,
    pub reports: Vec<AxiomReport>,
}

pub fn consumption_dependent_holds(reports: &[AxiomReport]) -> bool {
    ["marginality", "choice_set_independence", "positivity", "far_history_independence", "fhi_iia"]
        .iter()
        .all(|a| holds(reports, a))
}

pub fn learning_holds(reports: &[AxiomReport]) -> bool {
    ["marginality", "choice_set_independence", "positivity", "intertemporal_iia"].iter().all(|a| holds(reports, a))
}

/// Classifies a conditional system; the habit and variety flags compare
/// `p(x,X|x,X)` with `p(x,X)` when those blocks exist and fall back to the axioms otherwise.
pub fn classify<S: Scalar>(ccs: &ConditionalChoiceSystem<S>, tolerance: f64) -> Classification {
    let reports = check_parametric_axioms(ccs, tolerance);
    let consumption_dependent = consumption_dependent_holds(&reports);
    let learning = learning_holds(&reports);
    let full = ccs.universe().full();
    let n = ccs.universe().size();
    let comparisons: Option<Vec<(S, S)>> = (0..n)
        .map(|x| {
            let before = ccs.first(x, full)?.clone();
            let after = ccs.conditional(x, full, &full_history(x, 1, full))?.clone();
            Some((after, before))
        })
        .collect();
    let (habit_ok, variety_ok) = match comparisons {
        Some(pairs) => (
            pairs.iter().all(|(a, b)| !(a.clone() - b.clone()).is_negative_beyond(tolerance)),
            pairs.iter().all(|(a, b)| !(b.clone() - a.clone()).is_negative_beyond(tolerance)),
        ),
        None => (holds(&reports, "habit_formation"), holds(&reports, "preference_for_variety")),
    };
    Classification {
        consumption_dependent,
        learning,
        habit_formation: consumption_dependent && habit_ok,
        variety: consumption_dependent && variety_ok,
        reports,
    }
}
