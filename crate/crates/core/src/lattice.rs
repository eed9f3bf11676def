//! Occupancy configurations on the discrete torus `Z/NZ`.
//!
//! Site `i` sits at macroscopic position `i / N`; all index arithmetic wraps
//! modulo `N`. In the two-species model label 1 is a particle and label 0 a
//! hole.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::profile::InitialProfile;
use crate::rng::seeded;

pub const HOLE: u8 = 0;
pub const PARTICLE: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeConfig {
    n_species: usize,
    occupancy: Vec<u8>,
    species_counts: Vec<usize>,
}

impl LatticeConfig {
    /// Samples a product-measure configuration with
    /// `P(occupancy[i] = k) = profile.density(k, i / N)`.
    pub fn sample(n_sites: usize, profile: &InitialProfile, seed: u64) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 sites, got {n_sites}")));
        }
        let n_species = profile.n_species();
        check_species(n_species)?;
        let positions: Vec<f64> = (0..n_sites).map(|i| i as f64 / n_sites as f64).collect();
        profile.validate_at(&positions)?;

        let mut rng = seeded(seed);
        let mut cdf = vec![0.0; n_species];
        let occupancy = positions
            .iter()
            .map(|&x| {
                let mut acc = 0.0;
                for (k, c) in cdf.iter_mut().enumerate() {
                    acc += profile.density(k, x);
                    *c = acc;
                }
                let u: f64 = rng.random::<f64>() * acc;
                cdf.iter().position(|&c| u < c).unwrap_or(n_species - 1) as u8
            })
            .collect();
        Self::exact(n_species, occupancy)
    }

    /// Configuration with an explicit occupancy array.
    pub fn exact(n_species: usize, occupancy: Vec<u8>) -> Result<Self> {
        check_species(n_species)?;
        if occupancy.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 sites, got {}",
                occupancy.len()
            )));
        }
        let mut species_counts = vec![0; n_species];
        for (site, &label) in occupancy.iter().enumerate() {
            if usize::from(label) >= n_species {
                return Err(Error::InvalidLabel { site, label, n_species });
            }
            species_counts[usize::from(label)] += 1;
        }
        Ok(LatticeConfig { n_species, occupancy, species_counts })
    }

    /// Two-species configuration from particle/hole labels.
    pub fn binary(occupancy: &[u8]) -> Result<Self> {
        Self::exact(2, occupancy.to_vec())
    }

    pub fn n_sites(&self) -> usize {
        self.occupancy.len()
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn occupancy(&self) -> &[u8] {
        &self.occupancy
    }

    pub fn species_counts(&self) -> &[usize] {
        &self.species_counts
    }

    #[inline]
    pub fn label(&self, site: usize) -> u8 {
        self.occupancy[site]
    }

    #[inline]
    pub fn right(&self, site: usize) -> usize {
        if site + 1 == self.occupancy.len() {
            0
        } else {
            site + 1
        }
    }

    #[inline]
    pub fn left(&self, site: usize) -> usize {
        if site == 0 {
            self.occupancy.len() - 1
        } else {
            site - 1
        }
    }

    /// Exchanges the contents of `bond` and its right neighbour.
    #[inline]
    pub fn exchange(&mut self, bond: usize) {
        let j = self.right(bond);
        self.occupancy.swap(bond, j);
    }

    /// Mutable access to the raw labels for drivers that only permute them.
    pub(crate) fn occupancy_mut(&mut self) -> &mut [u8] {
        &mut self.occupancy
    }

    /// Recomputes the tallies from the occupancy array.
    pub fn recount(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_species];
        for &label in &self.occupancy {
            counts[usize::from(label)] += 1;
        }
        counts
    }

    /// Single-line CSV: `N,n,label_0,...,label_{N-1}`.
    pub fn to_csv_line(&self) -> String {
        let mut s = format!("{},{}", self.n_sites(), self.n_species);
        for &label in &self.occupancy {
            write!(s, ",{label}").unwrap();
        }
        s
    }

    pub fn from_csv_line(line: &str) -> Result<Self> {
        let mut fields = line.trim().split(',');
        let mut next_usize = |what: &str| -> Result<usize> {
            fields
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what}")))?
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("{what}: {e}")))
        };
        let n_sites = next_usize("N")?;
        let n_species = next_usize("n")?;
        let occupancy = fields
            .map(|f| f.trim().parse::<u8>().map_err(|e| Error::Parse(format!("label `{f}`: {e}"))))
            .collect::<Result<Vec<u8>>>()?;
        if occupancy.len() != n_sites {
            return Err(Error::DimensionMismatch { expected: n_sites, found: occupancy.len() });
        }
        Self::exact(n_species, occupancy)
    }
}

fn check_species(n_species: usize) -> Result<()> {
    if !(2..=usize::from(u8::MAX)).contains(&n_species) {
        return Err(Error::InvalidParameter(format!(
            "number of species must lie in 2..=255, got {n_species}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Profile;
    use proptest::prelude::*;
    use statrs::distribution::{Binomial, DiscreteCDF};

    #[test]
    fn degenerate_profiles() {
        let full = InitialProfile::binary(Profile::Const(1.0)).unwrap();
        let c = LatticeConfig::sample(4, &full, 1).unwrap();
        assert_eq!(c.occupancy(), &[1, 1, 1, 1]);
        assert_eq!(c.species_counts(), &[0, 4]);

        let empty = InitialProfile::binary(Profile::Const(0.0)).unwrap();
        let c = LatticeConfig::sample(4, &empty, 1).unwrap();
        assert_eq!(c.occupancy(), &[0, 0, 0, 0]);
    }

    #[test]
    fn exact_counts() {
        assert_eq!(LatticeConfig::binary(&[1, 0, 1, 0]).unwrap().species_counts(), &[2, 2]);
        assert_eq!(LatticeConfig::binary(&[0, 0, 0]).unwrap().species_counts(), &[3, 0]);
        let c = LatticeConfig::exact(3, vec![0, 1, 2, 0, 1, 2]).unwrap();
        assert_eq!(c.species_counts(), &[2, 2, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            LatticeConfig::exact(2, vec![0, 2]),
            Err(Error::InvalidLabel { site: 1, label: 2, .. })
        ));
        assert!(LatticeConfig::exact(1, vec![0, 0]).is_err());
        let half = InitialProfile::binary(Profile::Const(0.5)).unwrap();
        assert!(LatticeConfig::sample(1, &half, 0).is_err());
    }

    #[test]
    fn half_filling_concentrates() {
        // P(|X/N - 1/2| <= 5e-3) for X ~ Bin(1e5, 1/2), from the binomial CDF.
        let n = 100_000u64;
        let bin = Binomial::new(0.5, n).unwrap();
        let lo = 49_500u64;
        let hi = 50_500u64;
        let p_inside = bin.cdf(hi) - bin.cdf(lo - 1);
        assert!(p_inside >= 0.99, "binomial band probability {p_inside}");

        let half = InitialProfile::binary(Profile::Const(0.5)).unwrap();
        let mut inside = 0;
        for seed in 0..20 {
            let c = LatticeConfig::sample(n as usize, &half, seed).unwrap();
            let k = c.species_counts()[1] as u64;
            if (lo..=hi).contains(&k) {
                inside += 1;
            }
        }
        // 20 draws at p >= 0.99: at most one miss happens with probability > 0.98.
        assert!(inside >= 19, "{inside}/20 inside the band");
    }

    #[test]
    fn csv_line_layout() {
        let c = LatticeConfig::binary(&[1, 0, 1]).unwrap();
        assert_eq!(c.to_csv_line(), "3,2,1,0,1");
        assert!(LatticeConfig::from_csv_line("3,2,1,0").is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip(n_species in 2usize..5, labels in proptest::collection::vec(0u8..4, 2..64)) {
            let labels: Vec<u8> = labels.into_iter().map(|l| l % n_species as u8).collect();
            let c = LatticeConfig::exact(n_species, labels).unwrap();
            let back = LatticeConfig::from_csv_line(&c.to_csv_line()).unwrap();
            prop_assert_eq!(back, c);
        }

        #[test]
        fn seed_determinism(seed in any::<u64>(), n in 2usize..200) {
            let p = InitialProfile::binary(Profile::Sin { amplitude: 0.3, k: 2, mean: 0.5 }).unwrap();
            let a = LatticeConfig::sample(n, &p, seed).unwrap();
            let b = LatticeConfig::sample(n, &p, seed).unwrap();
            prop_assert_eq!(a.recount(), a.species_counts().to_vec());
            prop_assert_eq!(a, b);
        }
    }
}
