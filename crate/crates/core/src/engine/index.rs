use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::LatticeConfig;
use crate::rates::RateTable;

/// Exact rebuild period, in updates, for the cached tree and total.
pub const REBUILD_PERIOD: u64 = 1 << 20;

/// Fenwick tree over the `N` bond weights
/// `weight(i) = rates[occupancy[i]][occupancy[i+1]]`.
///
/// Sampling and single-bond updates are `O(log N)`. The tree accumulates
/// floating-point drift under updates, so it is rebuilt from the exact
/// weights every [`REBUILD_PERIOD`] updates.
#[derive(Debug, Clone)]
pub struct RateIndex {
    weights: Vec<f64>,
    tree: Vec<f64>,
    total: f64,
    active: usize,
    top_bit: usize,
    updates_since_rebuild: u64,
}

impl RateIndex {
    pub fn build(config: &LatticeConfig, table: &RateTable) -> Result<Self> {
        if table.n_species() != config.n_species() {
            return Err(Error::DimensionMismatch {
                expected: config.n_species(),
                found: table.n_species(),
            });
        }
        let n = config.n_sites();
        let weights: Vec<f64> = (0..n)
            .map(|i| table.rate(config.label(i), config.label(config.right(i))))
            .collect();
        let mut index = RateIndex {
            active: 0,
            tree: vec![0.0; n + 1],
            total: 0.0,
            top_bit: 1 << (usize::BITS - 1 - n.leading_zeros()),
            updates_since_rebuild: 0,
            weights,
        };
        index.rebuild();
        Ok(index)
    }

    /// Recomputes the tree, the total and the active-bond count from the weights.
    pub fn rebuild(&mut self) {
        let n = self.weights.len();
        self.tree[0] = 0.0;
        self.tree[1..].copy_from_slice(&self.weights);
        for i in 1..=n {
            let j = i + (i & i.wrapping_neg());
            if j <= n {
                self.tree[j] += self.tree[i];
            }
        }
        self.total = self.weights.iter().sum();
        self.active = self.weights.iter().filter(|&&w| w > 0.0).count();
        self.updates_since_rebuild = 0;
    }

    pub fn n_bonds(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, bond: usize) -> f64 {
        self.weights[bond]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_rate(&self) -> f64 {
        self.total
    }

    /// True when no bond carries a positive rate.
    pub fn is_frozen(&self) -> bool {
        self.active == 0
    }

    pub fn set_weight(&mut self, bond: usize, weight: f64) {
        let old = self.weights[bond];
        if old == weight {
            return;
        }
        match (old > 0.0, weight > 0.0) {
            (false, true) => self.active += 1,
            (true, false) => self.active -= 1,
            _ => {}
        }
        self.weights[bond] = weight;
        let delta = weight - old;
        self.total += delta;
        let n = self.weights.len();
        let mut i = bond + 1;
        while i <= n {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
        self.updates_since_rebuild += 1;
        if self.updates_since_rebuild >= REBUILD_PERIOD {
            self.rebuild();
        }
    }

    /// Refreshes the weight of `bond` from the configuration.
    #[inline]
    pub fn refresh(&mut self, bond: usize, config: &LatticeConfig, table: &RateTable) {
        let w = table.rate(config.label(bond), config.label(config.right(bond)));
        self.set_weight(bond, w);
    }

    /// Bond `i` whose cumulative-weight interval contains `target`, i.e.
    /// `prefix(i) <= target < prefix(i + 1)`. `None` when `target` falls
    /// past the tree's own total through rounding.
    pub fn find(&self, target: f64) -> Option<usize> {
        let n = self.weights.len();
        let mut pos = 0;
        let mut rem = target;
        let mut step = self.top_bit;
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= rem {
                pos = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        (pos < n).then_some(pos)
    }

    /// Samples a bond with probability `weight(i) / total_rate`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        debug_assert!(!self.is_frozen());
        loop {
            let target = rng.random::<f64>() * self.total;
            if let Some(bond) = self.find(target) {
                // Rounding can land on a zero-weight neighbour of a boundary.
                if self.weights[bond] > 0.0 {
                    return bond;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binary_31() -> RateTable {
        RateTable::from_rows(vec![vec![0.0, 1.0], vec![3.0, 0.0]]).unwrap()
    }

    #[test]
    fn all_particles_are_frozen() {
        let c = LatticeConfig::binary(&[1, 1, 1, 1]).unwrap();
        let idx = RateIndex::build(&c, &binary_31()).unwrap();
        assert_eq!(idx.total_rate(), 0.0);
        assert!(idx.weights().iter().all(|&w| w == 0.0));
        assert!(idx.is_frozen());
    }

    #[test]
    fn two_site_ring_lookup() {
        let c = LatticeConfig::binary(&[1, 0]).unwrap();
        let idx = RateIndex::build(&c, &binary_31()).unwrap();
        assert_eq!(idx.weights(), &[3.0, 1.0]);
        assert_eq!(idx.total_rate(), 4.0);
    }

    #[test]
    fn alternating_ring_total() {
        // Bonds (0,1)=AB:3, (1,2)=BA:1, (2,3)=AB:3, (3,0)=BA:1.
        let c = LatticeConfig::binary(&[1, 0, 1, 0]).unwrap();
        let idx = RateIndex::build(&c, &binary_31()).unwrap();
        assert_eq!(idx.weights(), &[3.0, 1.0, 3.0, 1.0]);
        assert_eq!(idx.total_rate(), 8.0);
    }

    #[test]
    fn dimension_mismatch() {
        let c = LatticeConfig::exact(3, vec![0, 1, 2]).unwrap();
        assert!(matches!(
            RateIndex::build(&c, &binary_31()),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    proptest! {
        #[test]
        fn find_matches_linear_scan(
            weights in proptest::collection::vec(prop_oneof![Just(0.0), 0.1f64..10.0], 2..40),
            u in 0.0f64..1.0,
        ) {
            let c = LatticeConfig::binary(&vec![0u8; weights.len()]).unwrap();
            let mut idx = RateIndex::build(&c, &binary_31()).unwrap();
            for (i, &w) in weights.iter().enumerate() {
                idx.set_weight(i, w);
            }
            let ws = idx.weights().to_vec();
            let total: f64 = ws.iter().sum();
            prop_assume!(total > 0.0);
            let target = u * total;
            let mut acc = 0.0;
            let mut expected = None;
            for (i, &w) in ws.iter().enumerate() {
                if target < acc + w {
                    expected = Some(i);
                    break;
                }
                acc += w;
            }
            if let (Some(e), Some(f)) = (expected, idx.find(target)) {
                // Exact ties at interval boundaries may resolve either way.
                let boundary = (ws[..e].iter().sum::<f64>() - target).abs() < 1e-12;
                prop_assert!(f == e || boundary);
            }
        }
    }
}
