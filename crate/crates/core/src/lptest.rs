//! Vertex-form and facet-form feasibility tests for two-period data.
//!
//! Both tests ask whether a cone program `M z = b, z ≥ 0` has a solution and
//! answer it as the quadratic minimization `min_{z ≥ 0} (Mz − b)ᵀ Ω (Mz − b)`.

use std::collections::{BTreeMap, HashSet};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::axioms::check_cdrum;
use crate::data::{ObservationDomain, RandomJointChoiceRule};
use crate::error::{Error, Result};
use crate::lattice::{factorial, Alt, LinearOrder, Menu, Universe};
use crate::scalar::{convert, NumericMode, Rational, Scalar};
use crate::simulate::{perturb, random_mixture};

/// Statistic at or below which a program is declared feasible.
pub const FEASIBILITY_THRESHOLD: f64 = 1e-8;
/// Largest first-order residual accepted from the solver.
pub const KKT_TOLERANCE: f64 = 1e-10;
/// Largest universe for which the per-choice vertex matrix is built.
pub const DEFAULT_CAP: usize = 4;
/// Largest universe for which every extreme point of `ℒ(X)^{|X|+1}` is enumerated.
pub const FULL_VERTEX_CAP: usize = 3;

/// A cell `(x, y, A, B)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: Alt,
    pub y: Alt,
    pub a: Menu,
    pub b: Menu,
}

impl Cell {
    pub fn format(&self, u: &Universe) -> String {
        format!("({},{},{},{})", u.label(self.x), u.label(self.y), u.format_menu(self.a), u.format_menu(self.b))
    }
}

/// Cells of the observed menu pairs, canonical pair order then lexicographic choices.
fn observed_cells(domain: &ObservationDomain) -> Vec<Cell> {
    let mut out = Vec::new();
    for menus in domain.iter() {
        let (a, b) = (menus.0[0], menus.0[1]);
        for x in a.iter() {
            for y in b.iter() {
                out.push(Cell { x, y, a, b });
            }
        }
    }
    out
}

fn require_two_periods(domain: &ObservationDomain) -> Result<()> {
    if domain.periods() != 2 {
        return Err(Error::PeriodMismatch { expected: 2, found: domain.periods() });
    }
    Ok(())
}

/// Vertex matrix `E`: one row per extreme point, one 0/1 column per observed cell.
#[derive(Debug, Clone)]
pub struct VertexMatrix {
    pub universe: Universe,
    pub columns: Vec<Cell>,
    /// Orders `(≻, ≻_{x₁}, …, ≻_{x_n})` behind each row.
    pub extreme_points: Vec<Vec<LinearOrder>>,
    /// Column indices holding a one, in column order.
    pub patterns: Vec<Vec<usize>>,
}

impl VertexMatrix {
    pub fn rows(&self) -> usize {
        self.patterns.len()
    }

    /// Patterns with duplicates removed, first occurrence kept.
    pub fn distinct_patterns(&self) -> Vec<&[usize]> {
        let mut seen = HashSet::new();
        self.patterns.iter().filter(|p| seen.insert(p.as_slice())).map(Vec::as_slice).collect()
    }

    pub fn entry(&self, row: usize, col: usize) -> u8 {
        self.patterns[row].binary_search(&col).is_ok() as u8
    }
}

fn pattern(columns: &[Cell], first: &LinearOrder, next: &[LinearOrder]) -> Vec<usize> {
    columns
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            let x = first.best_in(c.a);
            x == c.x && next[x].best_in(c.b) == c.y
        })
        .map(|(i, _)| i)
        .collect()
}

/// Every extreme point of `ℒ(X)^{|X|+1}`, optionally keeping one row per distinct pattern.
pub fn build_e(universe: &Universe, domain: &ObservationDomain, dedup: bool) -> Result<VertexMatrix> {
    require_two_periods(domain)?;
    let n = universe.size();
    if n > FULL_VERTEX_CAP {
        return Err(Error::UniverseTooLarge { size: n, cap: FULL_VERTEX_CAP });
    }
    let columns = observed_cells(domain);
    let orders = LinearOrder::all(n);
    let total = orders.len().pow(n as u32 + 1);
    let rows: Vec<(Vec<LinearOrder>, Vec<usize>)> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut tuple = Vec::with_capacity(n + 1);
            for _ in 0..=n {
                tuple.push(orders[idx % orders.len()].clone());
                idx /= orders.len();
            }
            tuple.reverse();
            let pat = pattern(&columns, &tuple[0], &tuple[1..]);
            (tuple, pat)
        })
        .collect();
    let mut seen = HashSet::new();
    let mut extreme_points = Vec::new();
    let mut patterns = Vec::new();
    for (tuple, pat) in rows {
        if dedup && !seen.insert(pat.clone()) {
            continue;
        }
        extreme_points.push(tuple);
        patterns.push(pat);
    }
    Ok(VertexMatrix { universe: universe.clone(), columns, extreme_points, patterns })
}

/// Rows indexed by a first order `≻`, a first choice `x` and a next order `≻'`,
/// holding the cells where `≻` picks `x` and `≻'` picks the second choice.
/// Gives the `|X|(|X|!)²` count.
pub fn build_e_by_choice(universe: &Universe, domain: &ObservationDomain, cap: usize) -> Result<VertexMatrix> {
    require_two_periods(domain)?;
    let n = universe.size();
    if n > cap {
        return Err(Error::UniverseTooLarge { size: n, cap });
    }
    let columns = observed_cells(domain);
    let orders = LinearOrder::all(n);
    let mut extreme_points = Vec::new();
    let mut patterns = Vec::new();
    for first in &orders {
        for x in 0..n {
            for next in &orders {
                let pat = columns
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.x == x && first.best_in(c.a) == x && next.best_in(c.b) == c.y)
                    .map(|(i, _)| i)
                    .collect();
                let mut tuple = vec![first.clone(); n + 1];
                tuple[1 + x] = next.clone();
                extreme_points.push(tuple);
                patterns.push(pat);
            }
        }
    }
    Ok(VertexMatrix { universe: universe.clone(), columns, extreme_points, patterns })
}

/// Row groups of the facet system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowGroup {
    Consistency,
    Recursivity,
    InflowOutflow,
    Initialization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FacetRow<S> {
    pub group: RowGroup,
    /// `(column, coefficient)` with coefficients ±1.
    pub entries: Vec<(usize, i8)>,
    pub rhs: S,
}

/// `F_lim q = l_lim` over one column per full-lattice cell.
#[derive(Debug, Clone)]
pub struct FacetSystem<S> {
    pub universe: Universe,
    pub columns: Vec<Cell>,
    pub rows: Vec<FacetRow<S>>,
}

impl<S: Scalar> FacetSystem<S> {
    pub fn group_size(&self, group: RowGroup) -> usize {
        self.rows.iter().filter(|r| r.group == group).count()
    }
}

/// Dense index from `(A, B, x, y)` to column.
struct ColumnIndex {
    n: usize,
    slots: Vec<usize>,
}

impl ColumnIndex {
    fn new(n: usize, columns: &[Cell]) -> Self {
        let mut slots = vec![usize::MAX; (1 << (2 * n)) * n * n];
        let mut idx = ColumnIndex { n, slots: Vec::new() };
        for (i, c) in columns.iter().enumerate() {
            slots[idx.offset(c)] = i;
        }
        idx.slots = slots;
        idx
    }

    fn offset(&self, c: &Cell) -> usize {
        ((((c.a.bits() as usize) << self.n) | c.b.bits() as usize) * self.n + c.x) * self.n + c.y
    }

    fn get(&self, x: Alt, y: Alt, a: Menu, b: Menu) -> usize {
        self.slots[self.offset(&Cell { x, y, a, b })]
    }
}

/// Facet system for a two-period rule on its own domain.
///
/// With `extension_everywhere` the inflow-outflow and initialization rows are
/// imposed at every menu rather than only where no menu pair is observed.
pub fn build_f<S: Scalar>(p: &RandomJointChoiceRule<S>, extension_everywhere: bool) -> Result<FacetSystem<S>> {
    let domain = p.domain();
    require_two_periods(&domain)?;
    let u = p.universe();
    let n = u.size();
    let full = u.full();
    let menus = u.menus();
    let columns = observed_cells(&ObservationDomain::full(u, 2));
    let index = ColumnIndex::new(n, &columns);
    let mut rows = Vec::new();

    for menus_ab in domain.iter() {
        let (a, b) = (menus_ab.0[0], menus_ab.0[1]);
        for x in a.iter() {
            for y in b.iter() {
                let mut entries = Vec::new();
                for a2 in a.supersets(full) {
                    for b2 in b.supersets(full) {
                        entries.push((index.get(x, y, a2, b2), 1));
                    }
                }
                entries.sort_unstable();
                rows.push(FacetRow { group: RowGroup::Consistency, entries, rhs: p.p(&[a, b], &[x, y]) });
            }
        }
    }

    for &a in &menus {
        for x in a.iter() {
            for &b in menus.iter().filter(|&&b| b != full) {
                let mut entries: Vec<(usize, i8)> = b.iter().map(|y| (index.get(x, y, a, b), 1)).collect();
                for z in (0..n).filter(|&z| !b.contains(z)) {
                    entries.push((index.get(x, z, a, b.with(z)), -1));
                }
                entries.sort_unstable();
                rows.push(FacetRow { group: RowGroup::Recursivity, entries, rhs: S::zero() });
            }
        }
    }

    let observed_first: HashSet<Menu> = domain.iter().map(|m| m.0[0]).collect();
    for &a in menus.iter().filter(|&&a| a != full) {
        if !extension_everywhere && observed_first.contains(&a) {
            continue;
        }
        let mut entries = Vec::new();
        for x in a.iter() {
            for y in 0..n {
                entries.push((index.get(x, y, a, full), 1));
            }
        }
        for z in (0..n).filter(|&z| !a.contains(z)) {
            for y in 0..n {
                entries.push((index.get(z, y, a.with(z), full), -1));
            }
        }
        entries.sort_unstable();
        rows.push(FacetRow { group: RowGroup::InflowOutflow, entries, rhs: S::zero() });
    }
    if extension_everywhere || !observed_first.contains(&full) {
        let mut entries = Vec::new();
        for x in 0..n {
            for y in 0..n {
                entries.push((index.get(x, y, full, full), 1));
            }
        }
        entries.sort_unstable();
        rows.push(FacetRow { group: RowGroup::Initialization, entries, rhs: S::one() });
    }
    Ok(FacetSystem { universe: u.clone(), columns, rows })
}

/// Row counts `(|X|(|X|!)², (|X|2^{|X|−1})² + |X|2^{2|X|−1} − |X|2^{|X|})`.
pub fn matrix_sizes(n: usize) -> Result<(u128, u128)> {
    if !(2..=20).contains(&n) {
        return Err(Error::InvalidParameters(format!("sizes are tabulated for 2 ≤ |X| ≤ 20, got {}", n)));
    }
    let nn = n as u128;
    let f = factorial(n);
    let e = nn * f * f;
    let half = nn << (n - 1);
    let facet = half * half + (nn << (2 * n - 1)) - (nn << n);
    Ok((e, facet))
}

/// Positive definite weight of the quadratic form.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Omega {
    #[default]
    Identity,
    /// One positive weight per row.
    Diagonal(Vec<f64>),
}

impl Omega {
    pub fn describe(&self) -> String {
        match self {
            Omega::Identity => "identity".into(),
            Omega::Diagonal(w) => format!("diagonal({} weights)", w.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticTestResult {
    pub statistic: f64,
    pub minimizer: Vec<f64>,
    pub feasible: bool,
    pub threshold: f64,
    pub omega: String,
    pub kkt_residual: f64,
    /// Verdict of the exact simplex, set in rational mode.
    pub exact_feasible: Option<bool>,
    pub rows: usize,
    pub columns: usize,
}

/// Least squares on the passive columns, Cholesky first and SVD as a fallback.
fn passive_solve(m: &DMatrix<f64>, b: &DVector<f64>, passive: &[usize]) -> DVector<f64> {
    let sub = m.select_columns(passive.iter());
    let gram = sub.transpose() * &sub;
    let rhs = sub.transpose() * b;
    if let Some(ch) = gram.clone().cholesky() {
        let z = ch.solve(&rhs);
        if z.iter().all(|v| v.is_finite()) {
            return z;
        }
    }
    sub.svd(true, true).solve(b, 1e-13).unwrap_or_else(|_| DVector::zeros(passive.len()))
}

/// Lawson–Hanson active set method for `min_{z ≥ 0} ‖Mz − b‖²`.
fn nnls(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let cols = m.ncols();
    let mut x = DVector::zeros(cols);
    let mut passive: Vec<usize> = Vec::new();
    let mut in_passive = vec![false; cols];
    let budget = 3 * cols + 50;
    let enter_tol = 1e-12;
    let mut iterations = 0;
    loop {
        let w = m.transpose() * (b - m * &x);
        let candidate = (0..cols).filter(|&j| !in_passive[j] && w[j] > enter_tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive.push(j);
        in_passive[j] = true;
        loop {
            iterations += 1;
            if iterations > budget {
                let residual = kkt_residual(m, b, &x);
                return Err(Error::SolverStalled(residual));
            }
            let z = passive_solve(m, b, &passive);
            if z.iter().all(|&v| v > 0.0) {
                for (k, &j) in passive.iter().enumerate() {
                    x[j] = z[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &j) in passive.iter().enumerate() {
                if z[k] <= 0.0 {
                    let denom = x[j] - z[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            let alpha = if alpha.is_finite() { alpha } else { 0.0 };
            for (k, &j) in passive.iter().enumerate() {
                x[j] += alpha * (z[k] - x[j]);
            }
            let mut kept = Vec::with_capacity(passive.len());
            for (k, &j) in passive.iter().enumerate() {
                if x[j] <= 1e-15 || (z[k] <= 0.0 && alpha == 0.0 && x[j] <= 0.0) {
                    x[j] = 0.0;
                    in_passive[j] = false;
                } else {
                    kept.push(j);
                }
            }
            if kept.len() == passive.len() {
                // no column left the passive set; drop the most negative one to make progress
                if let Some((k, _)) = z.iter().enumerate().filter(|(_, &v)| v <= 0.0).min_by(|a, b| a.1.total_cmp(b.1)) {
                    let j = passive[k];
                    x[j] = 0.0;
                    in_passive[j] = false;
                    kept.retain(|&c| c != j);
                }
            }
            passive = kept;
            if passive.is_empty() {
                break;
            }
        }
    }
    let residual = kkt_residual(m, b, &x);
    Ok((x, residual))
}

/// Largest violation of the first-order conditions of the nonnegative least squares problem.
fn kkt_residual(m: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let g = m.transpose() * (m * x - b);
    g.iter()
        .zip(x.iter())
        .map(|(&g, &x)| if x > 0.0 { g.abs() } else { (-g).max(0.0) })
        .fold(0.0, f64::max)
}

/// Minimizes `(Mz − b)ᵀ Ω (Mz − b)` over `z ≥ 0` after scaling rows to unit max-norm.
pub fn solve_cone_feasibility(m: &DMatrix<f64>, b: &DVector<f64>, omega: &Omega) -> Result<QuadraticTestResult> {
    if m.nrows() != b.len() {
        return Err(Error::InvalidParameters("matrix and right-hand side disagree in length".into()));
    }
    let weights: Vec<f64> = match omega {
        Omega::Identity => vec![1.0; m.nrows()],
        Omega::Diagonal(w) => {
            if w.len() != m.nrows() || w.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
                return Err(Error::InvalidParameters("Ω needs one positive weight per row".into()));
            }
            w.clone()
        }
    };
    let mut scaled = m.clone();
    let mut rhs = b.clone();
    for i in 0..m.nrows() {
        let norm = m.row(i).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let s = if norm > 0.0 { weights[i].sqrt() / norm } else { weights[i].sqrt() };
        scaled.row_mut(i).scale_mut(s);
        rhs[i] *= s;
    }
    let (x, kkt) = nnls(&scaled, &rhs)?;
    if kkt > KKT_TOLERANCE {
        return Err(Error::SolverStalled(kkt));
    }
    let statistic = (&scaled * &x - &rhs).norm_squared();
    Ok(QuadraticTestResult {
        statistic,
        feasible: statistic <= FEASIBILITY_THRESHOLD,
        minimizer: x.iter().copied().collect(),
        threshold: FEASIBILITY_THRESHOLD,
        omega: omega.describe(),
        kkt_residual: kkt,
        exact_feasible: None,
        rows: m.nrows(),
        columns: m.ncols(),
    })
}

/// Exact phase-one simplex with Bland's rule: does `A z = b, z ≥ 0` have a solution?
pub fn exact_feasible(columns: usize, rows: &[(Vec<(usize, i8)>, Rational)]) -> bool {
    use num_traits::{One, Signed, Zero};
    let m = rows.len();
    let width = columns + m + 1;
    let mut t: Vec<Vec<Rational>> = Vec::with_capacity(m);
    for (i, (entries, rhs)) in rows.iter().enumerate() {
        let mut row = vec![Rational::zero(); width];
        let flip = rhs.is_negative();
        for &(j, c) in entries {
            let v = Rational::from_integer((c as i64).into());
            row[j] += if flip { -v } else { v };
        }
        row[columns + i] = Rational::one();
        row[width - 1] = if flip { -rhs.clone() } else { rhs.clone() };
        t.push(row);
    }
    let mut basis: Vec<usize> = (columns..columns + m).collect();
    // reduced costs of the phase-one objective Σ artificials
    let mut cost = vec![Rational::zero(); width];
    for row in &t {
        for j in 0..columns {
            if !row[j].is_zero() {
                cost[j] -= row[j].clone();
            }
        }
        cost[width - 1] -= row[width - 1].clone();
    }
    while let Some(enter) = (0..columns + m).find(|&j| cost[j].is_negative()) {
        let mut leave: Option<(usize, Rational)> = None;
        for (i, row) in t.iter().enumerate() {
            if row[enter].is_positive() {
                let ratio = row[width - 1].clone() / row[enter].clone();
                let better = match &leave {
                    None => true,
                    Some((k, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*k]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((r, _)) = leave else { break };
        let pivot = t[r][enter].clone();
        for v in t[r].iter_mut() {
            if !v.is_zero() {
                *v = v.clone() / pivot.clone();
            }
        }
        let pivot_row = t[r].clone();
        let nonzero: Vec<usize> = (0..width).filter(|&j| !pivot_row[j].is_zero()).collect();
        for (i, row) in t.iter_mut().enumerate() {
            if i == r || row[enter].is_zero() {
                continue;
            }
            let f = row[enter].clone();
            for &j in &nonzero {
                row[j] -= f.clone() * pivot_row[j].clone();
            }
        }
        if !cost[enter].is_zero() {
            let f = cost[enter].clone();
            for &j in &nonzero {
                cost[j] -= f.clone() * pivot_row[j].clone();
            }
        }
        basis[r] = enter;
    }
    cost[width - 1].is_zero()
}

/// Options shared by the two tests.
#[derive(Debug, Clone, Default)]
pub struct TestOptions {
    pub omega: Omega,
    /// Impose the inflow-outflow and initialization rows at every menu.
    pub extension_everywhere: bool,
}

fn observed_values<S: Scalar>(p: &RandomJointChoiceRule<S>, columns: &[Cell]) -> Vec<S> {
    columns.iter().map(|c| p.p(&[c.a, c.b], &[c.x, c.y])).collect()
}

/// Vertex-form test: `Σ_i r_i e_i = p`, `r ≥ 0`, over distinct extreme-point patterns.
pub fn test_cdrum_vertex<S: Scalar>(p: &RandomJointChoiceRule<S>, options: &TestOptions) -> Result<QuadraticTestResult> {
    let e = build_e(p.universe(), &p.domain(), true)?;
    let values = observed_values(p, &e.columns);
    let mut m = DMatrix::zeros(e.columns.len(), e.rows());
    for (r, pat) in e.patterns.iter().enumerate() {
        for &c in pat {
            m[(c, r)] = 1.0;
        }
    }
    let b = DVector::from_iterator(values.len(), values.iter().map(Scalar::to_f64));
    let mut result = solve_cone_feasibility(&m, &b, &options.omega)?;
    if S::MODE == NumericMode::Rational {
        let mut rows: Vec<(Vec<(usize, i8)>, Rational)> =
            values.iter().map(|v| (Vec::new(), convert::<S, Rational>(v))).collect();
        for (r, pat) in e.patterns.iter().enumerate() {
            for &c in pat {
                rows[c].0.push((r, 1));
            }
        }
        let exact = exact_feasible(e.rows(), &rows);
        result.exact_feasible = Some(exact);
        result.feasible = exact;
    }
    Ok(result)
}

/// Facet-form test on `F_lim q = l_lim`, `q ≥ 0`.
pub fn test_cdrum_facet<S: Scalar>(p: &RandomJointChoiceRule<S>, options: &TestOptions) -> Result<QuadraticTestResult> {
    let f = build_f(p, options.extension_everywhere)?;
    let mut m = DMatrix::zeros(f.rows.len(), f.columns.len());
    for (i, row) in f.rows.iter().enumerate() {
        for &(j, c) in &row.entries {
            m[(i, j)] += c as f64;
        }
    }
    let b = DVector::from_iterator(f.rows.len(), f.rows.iter().map(|r| r.rhs.to_f64()));
    let mut result = solve_cone_feasibility(&m, &b, &options.omega)?;
    if S::MODE == NumericMode::Rational {
        let rows: Vec<(Vec<(usize, i8)>, Rational)> =
            f.rows.iter().map(|r| (r.entries.clone(), convert::<S, Rational>(&r.rhs))).collect();
        let exact = exact_feasible(f.columns.len(), &rows);
        result.exact_feasible = Some(exact);
        result.feasible = exact;
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub kind: &'static str,
    pub axioms: bool,
    pub vertex: bool,
    pub facet: bool,
    pub facet_everywhere: bool,
    pub vertex_statistic: f64,
    pub facet_statistic: f64,
    /// `Σ r_i` of the vertex minimizer.
    pub vertex_weight_sum: f64,
}

impl TrialOutcome {
    pub fn agrees(&self) -> bool {
        self.axioms == self.vertex && self.vertex == self.facet && self.facet == self.facet_everywhere
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub trials: usize,
    pub seed: u64,
    pub agreeing: usize,
    pub all_agree: bool,
    /// Counts keyed by `axioms/vertex/facet/facet_everywhere` verdict strings.
    pub matrix: BTreeMap<String, usize>,
    pub outcomes: Vec<TrialOutcome>,
}

/// Runs both tests and the axiom check on alternating mixtures and `ε = 0.2` perturbations.
pub fn oracle_agreement(n_trials: usize, seed: u64, universe: &Universe) -> Result<AgreementReport> {
    if universe.size() > FULL_VERTEX_CAP {
        return Err(Error::UniverseTooLarge { size: universe.size(), cap: FULL_VERTEX_CAP });
    }
    let mut master = ChaCha20Rng::seed_from_u64(seed);
    let plans: Vec<(usize, u64, u64)> =
        (0..n_trials).map(|_| (master.random_range(1..=6usize), master.random(), master.random())).collect();
    let outcomes = plans
        .into_par_iter()
        .enumerate()
        .map(|(trial, (k, mix_seed, noise_seed))| -> Result<TrialOutcome> {
            let mixture = random_mixture::<Rational>(universe, 2, k, mix_seed)?.rule;
            let (kind, rule) = if trial % 2 == 0 {
                ("mixture", mixture)
            } else {
                ("perturbed", perturb(&mixture, 0.2, noise_seed)?)
            };
            let axioms = check_cdrum(&rule, 0.0)?.holds;
            let float = rule.convert::<f64>();
            let vertex = test_cdrum_vertex(&float, &TestOptions::default())?;
            let facet = test_cdrum_facet(&float, &TestOptions::default())?;
            let everywhere = test_cdrum_facet(&float, &TestOptions { extension_everywhere: true, ..Default::default() })?;
            Ok(TrialOutcome {
                trial,
                kind,
                axioms,
                vertex: vertex.feasible,
                facet: facet.feasible,
                facet_everywhere: everywhere.feasible,
                vertex_statistic: vertex.statistic,
                facet_statistic: facet.statistic,
                vertex_weight_sum: vertex.minimizer.iter().sum(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut matrix = BTreeMap::new();
    for o in &outcomes {
        let key = format!("{}/{}/{}/{}", o.axioms, o.vertex, o.facet, o.facet_everywhere);
        *matrix.entry(key).or_insert(0) += 1;
    }
    let agreeing = outcomes.iter().filter(|o| o.agrees()).count();
    Ok(AgreementReport { trials: n_trials, seed, agreeing, all_agree: agreeing == n_trials, matrix, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn table_sizes() {
        assert_eq!(matrix_sizes(2).unwrap(), (8, 24));
        assert_eq!(matrix_sizes(3).unwrap(), (108, 216));
        assert_eq!(matrix_sizes(5).unwrap(), (72_000, 8_800));
        assert_eq!(matrix_sizes(7).unwrap(), (177_811_200, 257_152));
        assert!(matrix_sizes(1).is_err());
    }

    #[test]
    fn full_domain_f_has_no_extension_rows() {
        let p = fixtures::example4::<f64>();
        let f = build_f(&p, false).unwrap();
        assert_eq!(f.rows.len(), 216);
        assert_eq!(f.group_size(RowGroup::InflowOutflow), 0);
        assert_eq!(f.group_size(RowGroup::Initialization), 0);
        assert_eq!(f.columns.len(), 144);
    }

    #[test]
    fn vertex_rows_choose_once_per_block() {
        let u = Universe::letters(2);
        let e = build_e(&u, &ObservationDomain::full(&u, 2), false).unwrap();
        assert_eq!(e.rows(), 8);
        for pat in &e.patterns {
            assert_eq!(pat.len(), 9);
        }
        let f = build_e_by_choice(&u, &ObservationDomain::full(&u, 2), DEFAULT_CAP).unwrap();
        assert_eq!(f.rows(), 8);
    }

    #[test]
    fn zero_rhs_is_trivially_feasible() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 2.0, 1.0]);
        let r = solve_cone_feasibility(&m, &DVector::zeros(2), &Omega::Identity).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.minimizer.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nnls_matches_a_hand_solution() {
        // min ‖(z1 − 1, z2 + 1)‖² over z ≥ 0 is attained at (1, 0) with value 1
        let m = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![1.0, -1.0]);
        let r = solve_cone_feasibility(&m, &b, &Omega::Identity).unwrap();
        assert!((r.statistic - 1.0).abs() < 1e-14);
        assert!((r.minimizer[0] - 1.0).abs() < 1e-14 && r.minimizer[1] == 0.0);
        assert!(!r.feasible);
    }

    #[test]
    fn simplex_decides_small_systems() {
        let one = Rational::from_ratio(1, 1);
        // z1 + z2 = 1, z1 − z2 = 3 needs z2 = −1
        assert!(!exact_feasible(2, &[(vec![(0, 1), (1, 1)], one.clone()), (vec![(0, 1), (1, -1)], Rational::from_ratio(3, 1))]));
        assert!(exact_feasible(2, &[(vec![(0, 1), (1, 1)], one.clone()), (vec![(0, 1), (1, -1)], Rational::from_ratio(1, 2))]));
    }

    #[test]
    fn examples_get_the_right_verdicts() {
        for p in [fixtures::example2::<Rational>(), fixtures::example4()] {
            assert!(test_cdrum_vertex(&p, &TestOptions::default()).unwrap().feasible);
            assert!(test_cdrum_facet(&p, &TestOptions::default()).unwrap().feasible);
        }
        let p = fixtures::example1::<f64>();
        let v = test_cdrum_vertex(&p, &TestOptions::default()).unwrap();
        let f = test_cdrum_facet(&p, &TestOptions::default()).unwrap();
        assert!(v.statistic > 1e-6 && f.statistic > 1e-6);
    }
}
