use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson};

use super::trajectory::{Snapshot, TrajectoryRecord};
use super::check_snapshot_times;
use crate::error::{Error, Result};
use crate::lattice::LatticeConfig;
use crate::rates::RateTable;

/// Uniformized sampler for the exchange dynamics.
///
/// Candidates arrive at the constant rate `N * r_max`; each picks a bond
/// uniformly and fires with probability `rate(pattern) / r_max`. The number
/// of candidates in an interval of length `t` is Poisson(`N r_max t`), so no
/// holding times are drawn. The law of the state at any fixed time equals
/// that of the event-by-event chain.
///
/// The thinning probability is resolved to `2^-32`; patterns at the maximal
/// rate and at rate zero are exact.
#[derive(Debug, Clone)]
pub struct Uniformized {
    n_species: usize,
    max_rate: f64,
    thresholds: Vec<u64>,
}

impl Uniformized {
    pub fn new(table: &RateTable) -> Self {
        let max_rate = table.max_rate();
        let thresholds = table
            .as_slice()
            .iter()
            .map(|&r| {
                if max_rate == 0.0 {
                    0
                } else {
                    ((r / max_rate) * 4_294_967_296.0).round() as u64
                }
            })
            .collect();
        Uniformized { n_species: table.n_species(), max_rate, thresholds }
    }

    /// Candidate rate `N * r_max`.
    pub fn candidate_rate(&self, n_sites: usize) -> f64 {
        self.max_rate * n_sites as f64
    }

    /// True when no candidate can fire on `occupancy`.
    fn is_frozen(&self, occupancy: &[u8]) -> bool {
        let n = occupancy.len();
        (0..n).all(|i| {
            let (x, y) = (occupancy[i], occupancy[if i + 1 == n { 0 } else { i + 1 }]);
            self.thresholds[usize::from(x) * self.n_species + usize::from(y)] == 0
        })
    }

    /// Applies `candidates` thinned candidate exchanges.
    pub fn advance<R: RngCore + ?Sized>(&self, occupancy: &mut [u8], rng: &mut R, candidates: u64) {
        let n = occupancy.len();
        assert!(n >= 2 && n <= u32::MAX as usize);
        let n32 = n as u32;
        let reject_below = n32.wrapping_neg() % n32;
        let ns = self.n_species;
        for _ in 0..candidates {
            // Lemire's multiply-shift with rejection: the bond index is exactly uniform.
            let (u, i) = loop {
                let u = rng.next_u64();
                let m = u64::from(u as u32) * n as u64;
                if (m as u32) >= reject_below {
                    break (u, (m >> 32) as usize);
                }
            };
            let j = if i + 1 == n { 0 } else { i + 1 };
            let x = occupancy[i];
            let y = occupancy[j];
            let thr = self.thresholds[usize::from(x) * ns + usize::from(y)];
            let mask = 0u8.wrapping_sub(u8::from((u >> 32) < thr));
            let d = (x ^ y) & mask;
            occupancy[i] = x ^ d;
            occupancy[j] = y ^ d;
        }
    }

    /// Advances the configuration by `duration` of dynamics.
    pub fn evolve<R: Rng + ?Sized>(&self, config: &mut LatticeConfig, rng: &mut R, duration: f64) -> Result<u64> {
        if !(duration >= 0.0) {
            return Err(Error::InvalidParameter(format!("negative duration {duration}")));
        }
        let mean = self.candidate_rate(config.n_sites()) * duration;
        if mean == 0.0 {
            return Ok(0);
        }
        let poisson = Poisson::new(mean)
            .map_err(|e| Error::InvalidParameter(format!("candidate count mean {mean}: {e}")))?;
        let candidates = poisson.sample(rng) as u64;
        self.advance(config.occupancy_mut(), rng, candidates);
        Ok(candidates)
    }

    /// Records the configuration at each of the sorted `snapshot_times`,
    /// starting from time `t_start`. Leaves `config` at the last snapshot time.
    pub fn run_snapshots<R: Rng + ?Sized>(
        &self,
        config: &mut LatticeConfig,
        rng: &mut R,
        t_start: f64,
        snapshot_times: &[f64],
    ) -> Result<TrajectoryRecord> {
        let t_end = snapshot_times.last().copied().unwrap_or(t_start);
        check_snapshot_times(t_start, t_end, snapshot_times)?;
        let mut record = TrajectoryRecord::start(config.clone(), t_start, false);
        record.frozen = self.is_frozen(config.occupancy());
        let mut t = t_start;
        for &s in snapshot_times {
            self.evolve(config, rng, s - t)?;
            t = s;
            record.snapshots.push(Snapshot { time: s, occupancy: config.occupancy().to_vec() });
        }
        record.t_end = t;
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn thresholds_are_exact_at_the_extremes() {
        let t = RateTable::totally_asymmetric(1.0, 8).unwrap();
        let u = Uniformized::new(&t);
        assert_eq!(u.thresholds[2], 1 << 32); // rates[1][0] = r_max
        assert_eq!(u.thresholds[1], 0); // rates[0][1] = 0
    }

    #[test]
    fn conserves_counts_and_is_reproducible() {
        let t = RateTable::equidiffusive(1.0, RateTable::cyclic_alpha(2.0), 30).unwrap();
        let mut a = LatticeConfig::exact(3, (0..30).map(|i| (i % 3) as u8).collect()).unwrap();
        let mut b = a.clone();
        let counts = a.species_counts().to_vec();
        let u = Uniformized::new(&t);
        u.evolve(&mut a, &mut seeded(8), 0.3).unwrap();
        u.evolve(&mut b, &mut seeded(8), 0.3).unwrap();
        assert_eq!(a.recount(), counts);
        assert_eq!(a, b);
    }

    #[test]
    fn frozen_table_does_nothing() {
        let t = RateTable::from_rows(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let mut c = LatticeConfig::binary(&[1, 0, 1]).unwrap();
        let rec = Uniformized::new(&t).run_snapshots(&mut c, &mut seeded(1), 0.0, &[1.0, 2.0]).unwrap();
        assert!(rec.frozen);
        assert!(rec.snapshots.iter().all(|s| s.occupancy == vec![1, 0, 1]));
    }
}
