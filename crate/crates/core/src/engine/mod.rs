//! Continuous-time exchange dynamics on the ring.
//!
//! Two drivers share one law. [`step`] and [`run_until`] are the event-by-event
//! jump chain over a [`RateIndex`] and can log every event, which the
//! martingale diagnostics need. [`Uniformized`] resamples the same generator
//! through a constant-rate Poisson clock with thinning; it produces snapshot
//! laws only and is what large ensembles run on.

mod index;
mod trajectory;
mod uniformized;

pub use index::{RateIndex, REBUILD_PERIOD};
pub use trajectory::{EventRecord, Snapshot, TrajectoryRecord};
pub use uniformized::Uniformized;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::lattice::LatticeConfig;
use crate::rates::RateTable;

/// Microscopic time. The `N^2` diffusive speed-up lives in the rates, so this
/// is also the macroscopic time of the limiting equation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimClock {
    pub t: f64,
    pub event_count: u64,
}

impl SimClock {
    pub fn at(t: f64) -> Self {
        SimClock { t, event_count: 0 }
    }
}

/// Swaps the pair at `bond` and refreshes the three bond weights it touches.
pub fn apply_exchange(config: &mut LatticeConfig, index: &mut RateIndex, table: &RateTable, bond: usize) {
    config.exchange(bond);
    let left = config.left(bond);
    let right = config.right(bond);
    index.refresh(left, config, table);
    index.refresh(bond, config, table);
    if right != left {
        index.refresh(right, config, table);
    }
}

/// Executes one exchange. Returns `None` when every bond rate is zero, in
/// which case nothing changes, the clock included.
pub fn step<R: Rng + ?Sized>(
    config: &mut LatticeConfig,
    index: &mut RateIndex,
    table: &RateTable,
    clock: &mut SimClock,
    rng: &mut R,
) -> Option<EventRecord> {
    if index.is_frozen() {
        return None;
    }
    let dt = holding_time(rng) / index.total_rate();
    let bond = index.sample(rng);
    apply_exchange(config, index, table, bond);
    clock.t += dt;
    clock.event_count += 1;
    Some(EventRecord { bond, dt })
}

/// Runs the jump chain up to `t_end`, recording the configuration at every
/// snapshot time.
///
/// The state recorded at time `s` is the one whose holding interval
/// `[t_k, t_{k+1})` contains `s`. A holding time that would overshoot `t_end`
/// is discarded and the clock set to `t_end`; by memorylessness this is the
/// exact law of the state at `t_end`.
#[allow(clippy::too_many_arguments)]
pub fn run_until<R: Rng + ?Sized>(
    config: &mut LatticeConfig,
    index: &mut RateIndex,
    table: &RateTable,
    clock: &mut SimClock,
    rng: &mut R,
    t_end: f64,
    snapshot_times: &[f64],
    log_events: bool,
) -> Result<TrajectoryRecord> {
    check_snapshot_times(clock.t, t_end, snapshot_times)?;
    let mut record = TrajectoryRecord::start(config.clone(), clock.t, log_events);
    let mut pending = snapshot_times.iter().copied().peekable();

    loop {
        if index.is_frozen() {
            record.frozen = true;
            break;
        }
        let t_next = clock.t + holding_time(rng) / index.total_rate();
        if t_next > t_end {
            break;
        }
        while let Some(s) = pending.next_if(|&s| s < t_next) {
            record.push_snapshot(s, config);
        }
        let bond = index.sample(rng);
        apply_exchange(config, index, table, bond);
        if let Some(events) = record.events.as_mut() {
            events.push(EventRecord { bond, dt: t_next - clock.t });
        }
        clock.t = t_next;
        clock.event_count += 1;
    }
    for s in pending {
        record.push_snapshot(s, config);
    }
    clock.t = clock.t.max(t_end);
    record.t_end = clock.t;
    Ok(record)
}

/// Runs the jump chain up to `t_end` without recording anything, calling
/// `observer(t, bond)` right after each exchange. Returns true if the chain
/// froze before `t_end`.
#[allow(clippy::too_many_arguments)]
pub fn run_observed<R: Rng + ?Sized, F: FnMut(f64, usize)>(
    config: &mut LatticeConfig,
    index: &mut RateIndex,
    table: &RateTable,
    clock: &mut SimClock,
    rng: &mut R,
    t_end: f64,
    mut observer: F,
) -> bool {
    let mut frozen = false;
    loop {
        if index.is_frozen() {
            frozen = true;
            break;
        }
        let t_next = clock.t + holding_time(rng) / index.total_rate();
        if t_next > t_end {
            break;
        }
        let bond = index.sample(rng);
        apply_exchange(config, index, table, bond);
        clock.t = t_next;
        clock.event_count += 1;
        observer(t_next, bond);
    }
    clock.t = clock.t.max(t_end);
    frozen
}

/// True when no bond of `config` carries a positive rate.
pub fn is_frozen(config: &LatticeConfig, table: &RateTable) -> bool {
    let occ = config.occupancy();
    let n = occ.len();
    (0..n).all(|i| table.rate(occ[i], occ[if i + 1 == n { 0 } else { i + 1 }]) == 0.0)
}

/// Unit-rate exponential variate.
#[inline]
fn holding_time<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

pub(crate) fn check_snapshot_times(t_start: f64, t_end: f64, times: &[f64]) -> Result<()> {
    if !(t_end >= t_start) {
        return Err(Error::InvalidParameter(format!("t_end = {t_end} precedes the clock at {t_start}")));
    }
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("snapshot times must be sorted".into()));
    }
    if let (Some(&first), Some(&last)) = (times.first(), times.last()) {
        if first < t_start || last > t_end {
            return Err(Error::InvalidParameter(format!(
                "snapshot times must lie in [{t_start}, {t_end}], got [{first}, {last}]"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn rates_31() -> RateTable {
        RateTable::from_rows(vec![vec![0.0, 1.0], vec![3.0, 0.0]]).unwrap()
    }

    #[test]
    fn full_ring_is_frozen() {
        let mut c = LatticeConfig::binary(&[1, 1]).unwrap();
        let t = rates_31();
        let mut idx = RateIndex::build(&c, &t).unwrap();
        let mut clock = SimClock::default();
        assert!(step(&mut c, &mut idx, &t, &mut clock, &mut seeded(1)).is_none());
        assert_eq!(clock, SimClock::default());
    }

    #[test]
    fn single_admissible_event() {
        let t = RateTable::from_rows(vec![vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let mut c = LatticeConfig::binary(&[1, 0]).unwrap();
        let mut idx = RateIndex::build(&c, &t).unwrap();
        let mut clock = SimClock::default();
        let ev = step(&mut c, &mut idx, &t, &mut clock, &mut seeded(3)).unwrap();
        assert_eq!(ev.bond, 0);
        assert_eq!(c.occupancy(), &[0, 1]);
        assert_eq!(clock.event_count, 1);
        assert!(clock.t > 0.0);
    }

    #[test]
    fn bond_selection_frequencies() {
        // Weights {3,1,3,1} on the alternating ring; each event swaps the pair
        // and changes the weights, so sample from a fixed index instead.
        let c = LatticeConfig::binary(&[1, 0, 1, 0]).unwrap();
        let idx = RateIndex::build(&c, &rates_31()).unwrap();
        let mut rng = seeded(11);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[idx.sample(&mut rng)] += 1;
        }
        let expected = [3.0 / 8.0, 1.0 / 8.0, 3.0 / 8.0, 1.0 / 8.0];
        for (c, p) in counts.iter().zip(expected) {
            let freq = *c as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 3.0 * se, "freq {freq} vs {p}");
        }
    }

    #[test]
    fn zero_horizon_and_frozen_runs() {
        let t = rates_31();
        let mut c = LatticeConfig::binary(&[1, 0, 0, 1, 0, 1]).unwrap();
        let init = c.clone();
        let mut idx = RateIndex::build(&c, &t).unwrap();
        let mut clock = SimClock::at(0.5);
        let rec = run_until(&mut c, &mut idx, &t, &mut clock, &mut seeded(2), 0.5, &[0.5, 0.5], true).unwrap();
        assert_eq!(clock.event_count, 0);
        assert!(rec.snapshots.iter().all(|s| s.occupancy == init.occupancy()));
        assert!(rec.events.unwrap().is_empty());

        let mut holes = LatticeConfig::binary(&[0; 8]).unwrap();
        let mut idx = RateIndex::build(&holes, &t).unwrap();
        let mut clock = SimClock::default();
        let rec = run_until(&mut holes, &mut idx, &t, &mut clock, &mut seeded(2), 5.0, &[1.0, 2.0, 5.0], false).unwrap();
        assert!(rec.frozen);
        assert_eq!(rec.snapshots.len(), 3);
        assert!(rec.snapshots.iter().all(|s| s.occupancy == vec![0; 8]));
        assert_eq!(clock.t, 5.0);
    }

    #[test]
    fn observed_run_reports_each_event() {
        let t = rates_31();
        let mut c = LatticeConfig::binary(&[1, 0, 0, 1, 0, 1, 1, 0]).unwrap();
        let mut idx = RateIndex::build(&c, &t).unwrap();
        let mut clock = SimClock::default();
        let mut seen = Vec::new();
        let frozen = run_observed(&mut c, &mut idx, &t, &mut clock, &mut seeded(4), 2.0, |s, b| seen.push((s, b)));
        assert!(!frozen);
        assert_eq!(seen.len() as u64, clock.event_count);
        assert!(seen.windows(2).all(|w| w[0].0 < w[1].0));
        assert_eq!(clock.t, 2.0);
        assert!(is_frozen(&LatticeConfig::binary(&[1; 4]).unwrap(), &t));
        assert!(!is_frozen(&c, &t));
    }

    #[test]
    fn rejects_unsorted_or_out_of_range_snapshots() {
        let t = rates_31();
        let mut c = LatticeConfig::binary(&[1, 0]).unwrap();
        let mut idx = RateIndex::build(&c, &t).unwrap();
        let mut clock = SimClock::default();
        let mut rng = seeded(0);
        assert!(run_until(&mut c, &mut idx, &t, &mut clock, &mut rng, 1.0, &[0.5, 0.2], false).is_err());
        assert!(run_until(&mut c, &mut idx, &t, &mut clock, &mut rng, 1.0, &[1.5], false).is_err());
    }

    #[test]
    fn long_run_keeps_index_consistent() {
        let table = RateTable::binary(1.0, 3.0, 64).unwrap();
        let profile: crate::profile::InitialProfile = "sin:0.3,1,0.5".parse().unwrap();
        let mut c = LatticeConfig::sample(64, &profile, 5).unwrap();
        let counts = c.species_counts().to_vec();
        let mut idx = RateIndex::build(&c, &table).unwrap();
        let mut clock = SimClock::default();
        let mut rng = seeded(9);
        for _ in 0..(REBUILD_PERIOD / 3 + 12_345) {
            step(&mut c, &mut idx, &table, &mut clock, &mut rng).unwrap();
        }
        assert_eq!(c.recount(), counts);
        let fresh = RateIndex::build(&c, &table).unwrap();
        assert_eq!(fresh.weights(), idx.weights());
        let rel = (fresh.total_rate() - idx.total_rate()).abs() / fresh.total_rate();
        assert!(rel < 1e-9, "relative total drift {rel}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn exchanges_conserve_counts(
            n_species in 2usize..5,
            labels in proptest::collection::vec(0u8..5, 2..40),
            seed in any::<u64>(),
            steps in 0usize..500,
        ) {
            let labels: Vec<u8> = labels.into_iter().map(|l| l % n_species as u8).collect();
            let mut c = LatticeConfig::exact(n_species, labels).unwrap();
            let counts = c.species_counts().to_vec();
            let rows = (0..n_species)
                .map(|k| (0..n_species).map(|l| ((k * 7 + l * 3) % 5) as f64).collect())
                .collect();
            let table = RateTable::from_rows(rows).unwrap();
            let mut idx = RateIndex::build(&c, &table).unwrap();
            let mut clock = SimClock::default();
            let mut rng = seeded(seed);
            let mut last_t = 0.0;
            for _ in 0..steps {
                if step(&mut c, &mut idx, &table, &mut clock, &mut rng).is_none() {
                    break;
                }
                prop_assert!(clock.t >= last_t);
                last_t = clock.t;
            }
            prop_assert_eq!(c.recount(), counts.clone());
            prop_assert_eq!(c.species_counts(), &counts[..]);
            let fresh = RateIndex::build(&c, &table).unwrap();
            prop_assert_eq!(fresh.weights(), idx.weights());
        }
    }
}
