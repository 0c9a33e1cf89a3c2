use std::collections::BTreeMap;

use num_traits::{One, Zero};

use super::rational::{ratio, Rational};

/// Probability distribution over a dense index set, with exact weights.
///
/// Entries are sorted by index, every weight is strictly positive and the
/// weights sum to exactly one, so the support is the key set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Distribution {
    entries: Vec<(usize, Rational)>,
}

impl Distribution {
    pub fn point(item: usize) -> Self {
        Distribution {
            entries: vec![(item, Rational::one())],
        }
    }

    /// Uniform distribution over the given items (duplicates collapse).
    ///
    /// Panics if `items` is empty.
    pub fn uniform<I: IntoIterator<Item = usize>>(items: I) -> Self {
        let mut items: Vec<usize> = items.into_iter().collect();
        items.sort_unstable();
        items.dedup();
        assert!(!items.is_empty(), "uniform distribution over empty set");
        let weight = ratio(1, items.len() as i64);
        Distribution {
            entries: items.into_iter().map(|i| (i, weight.clone())).collect(),
        }
    }

    /// Uniform distribution over the set bits of `mask`.
    pub fn uniform_mask(mask: u64) -> Self {
        Self::uniform((0..64).filter(|i| mask >> i & 1 == 1))
    }

    /// Builds a distribution from explicit weights, rejecting duplicates,
    /// non-positive weights and totals different from one.
    pub fn from_weights(weights: Vec<(usize, Rational)>) -> Result<Self, String> {
        let mut entries = weights;
        entries.sort_by_key(|(i, _)| *i);
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(format!("duplicate entry for index {}", pair[0].0));
            }
        }
        let mut total = Rational::zero();
        for (i, w) in &entries {
            if *w <= Rational::zero() {
                return Err(format!("non-positive weight {w} for index {i}"));
            }
            total += w;
        }
        if !total.is_one() {
            return Err(format!("weights sum to {total}, expected 1"));
        }
        Ok(Distribution { entries })
    }

    /// Convex combination `Σ coeff · dist`. The coefficients must be
    /// positive and sum to one for the result to be a distribution.
    pub fn mix<'a, I>(parts: I) -> Self
    where
        I: IntoIterator<Item = (Rational, &'a Distribution)>,
    {
        let mut acc: BTreeMap<usize, Rational> = BTreeMap::new();
        for (coeff, dist) in parts {
            for (i, w) in &dist.entries {
                *acc.entry(*i).or_insert_with(Rational::zero) += &coeff * w;
            }
        }
        Distribution {
            entries: acc.into_iter().filter(|(_, w)| !w.is_zero()).collect(),
        }
    }

    /// Relabels the support through `f`, merging entries that collide.
    pub fn map<F: FnMut(usize) -> usize>(&self, mut f: F) -> Self {
        let mut acc: BTreeMap<usize, Rational> = BTreeMap::new();
        for (i, w) in &self.entries {
            *acc.entry(f(*i)).or_insert_with(Rational::zero) += w;
        }
        Distribution {
            entries: acc.into_iter().collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, Rational)] {
        &self.entries
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|(i, _)| *i)
    }

    /// Support as a bitmask; only meaningful for indices below 64.
    pub fn support_mask(&self) -> u64 {
        self.support().fold(0, |m, i| m | 1 << i)
    }

    pub fn weight(&self, item: usize) -> Rational {
        match self.entries.binary_search_by_key(&item, |(i, _)| *i) {
            Ok(pos) => self.entries[pos].1.clone(),
            Err(_) => Rational::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.entries.windows(2).all(|p| p[0].1 == p[1].1)
    }

    pub fn total(&self) -> Rational {
        self.entries.iter().map(|(_, w)| w).sum()
    }
}
