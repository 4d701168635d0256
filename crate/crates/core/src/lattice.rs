//! Alternatives, menus as bitmasks, and the canonical subset ordering.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest universe the dense lattice tables support.
pub const MAX_ALTERNATIVES: usize = 12;

/// Index of an alternative in the universe's canonical ordering.
pub type Alt = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Universe {
    labels: Vec<String>,
}

impl Universe {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidUniverse("no alternatives".into()));
        }
        if labels.len() > MAX_ALTERNATIVES {
            return Err(Error::InvalidUniverse(format!(
                "{} alternatives exceeds the limit of {}",
                labels.len(),
                MAX_ALTERNATIVES
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::InvalidUniverse("empty label".into()));
            }
            if labels[..i].contains(l) {
                return Err(Error::InvalidUniverse(format!("duplicate label `{}`", l)));
            }
        }
        Ok(Universe { labels })
    }

    /// Universe labelled `a`, `b`, `c`, ...
    pub fn letters(n: usize) -> Self {
        Universe::new((0..n).map(|i| ((b'a' + i as u8) as char).to_string())).expect("valid letters")
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, alt: Alt) -> &str {
        &self.labels[alt]
    }

    pub fn index(&self, label: &str) -> Result<Alt> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownAlternative(label.to_string()))
    }

    pub fn full(&self) -> Menu {
        Menu((1u32 << self.size()) - 1)
    }

    pub fn menu<S: AsRef<str>>(&self, labels: &[S]) -> Result<Menu> {
        let mut mask = 0u32;
        for l in labels {
            mask |= 1 << self.index(l.as_ref())?;
        }
        if mask == 0 {
            return Err(Error::EmptyMenu);
        }
        Ok(Menu(mask))
    }

    /// All nonempty menus in canonical order.
    pub fn menus(&self) -> Vec<Menu> {
        canonical_subsets(self.size())
    }

    /// Number of `(x, A)` pairs with `x ∈ A`.
    pub fn cell_count(&self) -> usize {
        self.size() << (self.size() - 1)
    }

    pub fn format_menu(&self, menu: Menu) -> String {
        let items: Vec<&str> = menu.iter().map(|a| self.label(a)).collect();
        format!("{{{}}}", items.join(","))
    }

    pub fn menu_labels(&self, menu: Menu) -> Vec<String> {
        menu.iter().map(|a| self.labels[a].clone()).collect()
    }

    /// Same universe with labels permuted: label `i` becomes `labels[perm[i]]`.
    pub fn relabel(&self, perm: &[usize]) -> Universe {
        Universe { labels: perm.iter().map(|&i| self.labels[i].clone()).collect() }
    }
}

/// Nonempty subset of the universe encoded as a bitmask over alternative indices.
///
/// `Ord` follows the canonical enumeration: popcount descending, then mask ascending.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Menu(pub u32);

impl Menu {
    pub fn singleton(alt: Alt) -> Self {
        Menu(1 << alt)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, alt: Alt) -> bool {
        self.0 >> alt & 1 == 1
    }

    pub fn is_subset(self, other: Menu) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn with(self, alt: Alt) -> Menu {
        Menu(self.0 | 1 << alt)
    }

    pub fn without(self, alt: Alt) -> Menu {
        Menu(self.0 & !(1 << alt))
    }

    /// Members in ascending index order.
    pub fn iter(self) -> impl Iterator<Item = Alt> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }

    /// Supersets of `self` inside `full`, including `self`.
    pub fn supersets(self, full: Menu) -> impl Iterator<Item = Menu> {
        let free = full.0 & !self.0;
        let base = self.0;
        let mut sub = free;
        let mut done = false;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let out = Menu(base | sub);
            if sub == 0 {
                done = true;
            } else {
                sub = (sub - 1) & free;
            }
            Some(out)
        })
    }
}

impl Ord for Menu {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.count_ones().cmp(&self.0.count_ones()).then(self.0.cmp(&other.0))
    }
}

impl PartialOrd for Menu {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Menu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#b}", self.0)
    }
}

/// Nonempty subsets of an `n`-element universe, canonical order.
pub fn canonical_subsets(n: usize) -> Vec<Menu> {
    let mut all: Vec<Menu> = (1u32..(1 << n)).map(Menu).collect();
    all.sort();
    all
}

/// Strict linear order on the universe, best alternative first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinearOrder(Vec<Alt>);

impl LinearOrder {
    pub fn new(ranking: Vec<Alt>) -> Result<Self> {
        let n = ranking.len();
        let mut seen = vec![false; n];
        for &a in &ranking {
            if a >= n || seen[a] {
                return Err(Error::InvalidParameters(format!("{:?} is not a permutation", ranking)));
            }
            seen[a] = true;
        }
        Ok(LinearOrder(ranking))
    }

    pub fn ranking(&self) -> &[Alt] {
        &self.0
    }

    /// `M(≻, A)`: the best member of `menu`.
    pub fn best_in(&self, menu: Menu) -> Alt {
        *self.0.iter().find(|&&a| menu.contains(a)).expect("menu is nonempty")
    }

    /// The menu `A` with `≻ ∈ I(x, A)`: `x` together with everything ranked below it.
    pub fn cell_menu(&self, x: Alt) -> Menu {
        let pos = self.0.iter().position(|&a| a == x).expect("alternative in order");
        self.0[pos..].iter().fold(Menu(0), |m, &a| m.with(a))
    }

    /// Membership in `I(x, A)`.
    pub fn in_cell(&self, x: Alt, menu: Menu) -> bool {
        menu.contains(x) && self.cell_menu(x) == menu
    }

    /// Membership in `N(x, A)`.
    pub fn in_upper(&self, x: Alt, menu: Menu) -> bool {
        menu.contains(x) && self.best_in(menu) == x
    }

    pub fn format(&self, universe: &Universe) -> String {
        self.0.iter().map(|&a| universe.label(a)).collect::<Vec<_>>().join(">")
    }

    pub fn parse(s: &str, universe: &Universe) -> Result<Self> {
        let ranking = s
            .split('>')
            .map(|l| universe.index(l.trim()))
            .collect::<Result<Vec<_>>>()?;
        if ranking.len() != universe.size() {
            return Err(Error::parse("order", format!("`{}` does not rank every alternative", s)));
        }
        LinearOrder::new(ranking)
    }

    /// All `n!` orders, lexicographic in the ranking vector.
    pub fn all(n: usize) -> Vec<LinearOrder> {
        let mut out = Vec::new();
        let mut current: Vec<Alt> = (0..n).collect();
        loop {
            out.push(LinearOrder(current.clone()));
            // next lexicographic permutation
            let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
                break;
            };
            let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).unwrap();
            current.swap(i - 1, j);
            current[i..].reverse();
        }
        out
    }
}

pub fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_is_popcount_desc_then_mask() {
        let m = canonical_subsets(3);
        let bits: Vec<u32> = m.iter().map(|m| m.0).collect();
        assert_eq!(bits, vec![7, 3, 5, 6, 1, 2, 4]);
    }

    #[test]
    fn supersets_enumerates_all() {
        let full = Menu(0b111);
        let mut s: Vec<u32> = Menu(0b001).supersets(full).map(|m| m.0).collect();
        s.sort();
        assert_eq!(s, vec![1, 3, 5, 7]);
        assert_eq!(full.supersets(full).count(), 1);
    }

    #[test]
    fn orders_and_cells() {
        let orders = LinearOrder::all(3);
        assert_eq!(orders.len(), 6);
        let o = LinearOrder::new(vec![2, 0, 1]).unwrap();
        assert_eq!(o.best_in(Menu(0b011)), 0);
        assert_eq!(o.cell_menu(0), Menu(0b011));
        assert!(o.in_cell(2, Menu(0b111)));
        assert!(!o.in_cell(0, Menu(0b111)));
        assert!(o.in_upper(0, Menu(0b011)));
        assert!(LinearOrder::new(vec![0, 0, 1]).is_err());
    }

    #[test]
    fn universe_validation() {
        assert!(Universe::new(["a", "a"]).is_err());
        assert!(Universe::new(Vec::<String>::new()).is_err());
        let u = Universe::letters(3);
        assert_eq!(u.menu(&["c", "a"]).unwrap(), Menu(0b101));
        assert_eq!(u.format_menu(Menu(0b101)), "{a,c}");
        assert!(u.menu::<&str>(&[]).is_err());
        let o = LinearOrder::parse("c>a>b", &u).unwrap();
        assert_eq!(o.format(&u), "c>a>b");
    }
}
