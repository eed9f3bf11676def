//! Simulated laws against the exact generator, for both drivers.

use asep_core::engine::{run_observed, RateIndex, SimClock};
use asep_core::harness::oracle::{encode, Generator};
use asep_core::harness::{run_generator_oracle, Driver};
use asep_core::rng::seeded;
use asep_core::{LatticeConfig, RateTable};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const DRIVERS: [Driver; 2] = [Driver::EventDriven, Driver::Uniformized];

#[test]
fn symmetric_four_sites_two_particles() {
    let table = RateTable::binary(1.0, 0.0, 4).unwrap();
    let init = LatticeConfig::binary(&[1, 1, 0, 0]).unwrap();
    for t in [0.02, 1.0] {
        for d in DRIVERS {
            let rep = run_generator_oracle(&init, &table, t, 10_000, 5, d).unwrap();
            let support = rep.exact.iter().filter(|&&p| p > 1e-12).count();
            assert_eq!(support, 6);
            assert!(rep.tv < 0.02, "t={t} {d:?}: TV {}", rep.tv);
        }
    }
}

#[test]
fn asymmetric_binary_ring() {
    let table = RateTable::binary(1.0, 3.0, 5).unwrap();
    let init = LatticeConfig::binary(&[1, 1, 1, 0, 0]).unwrap();
    for d in DRIVERS {
        let rep = run_generator_oracle(&init, &table, 0.03, 20_000, 6, d).unwrap();
        assert!(rep.tv < 0.025, "{d:?}: TV {}", rep.tv);
    }
}

#[test]
fn three_species_with_unequal_rates() {
    let table = RateTable::abc(2.0, 0.5, 1.0, 1.5, 0.7, 1.2).unwrap();
    let init = LatticeConfig::exact(3, vec![0, 0, 1, 1, 2, 2]).unwrap();
    for d in DRIVERS {
        let rep = run_generator_oracle(&init, &table, 0.4, 100_000, 7, d).unwrap();
        assert!(rep.tv < 0.03, "{d:?}: TV {}", rep.tv);
    }
}

#[test]
fn equidiffusive_three_species() {
    let table = RateTable::equidiffusive(1.0, RateTable::cyclic_alpha(2.0), 5).unwrap();
    let init = LatticeConfig::exact(3, vec![0, 1, 2, 0, 1]).unwrap();
    for d in DRIVERS {
        let rep = run_generator_oracle(&init, &table, 0.01, 50_000, 8, d).unwrap();
        assert!(rep.tv < 0.03, "{d:?}: TV {}", rep.tv);
    }
}

/// The uniform law on fixed-count configurations is invariant for exclusion
/// on the ring, asymmetric or not. Samples far apart along one trajectory
/// are compared with it by a chi-square test at the 1% level.
#[test]
fn long_run_law_is_uniform() {
    for (mu, seed) in [(0.0, 11), (2.0, 12)] {
        let n = 8;
        let table = RateTable::binary(1.0, mu, n).unwrap();
        let mut config = LatticeConfig::binary(&[1, 1, 1, 0, 0, 0, 0, 0]).unwrap();
        let gen = Generator::assemble(n, &table).unwrap();
        let mut counts = vec![0usize; gen.n_states()];
        let mut index = RateIndex::build(&config, &table).unwrap();
        let mut clock = SimClock::default();
        let mut rng = seeded(seed);
        let samples = 20_000;
        // Spectral gap ~ 4 pi^2 / N^2 per unit of N^2 rate, so 0.5 is many relaxation times.
        let spacing = 0.5;
        for s in 1..=samples {
            run_observed(&mut config, &mut index, &table, &mut clock, &mut rng, s as f64 * spacing, |_, _| {});
            counts[encode(config.occupancy(), 2)] += 1;
        }
        let support: Vec<usize> = (0..gen.n_states())
            .filter(|&c| (0..n).filter(|i| (c >> i) & 1 == 1).count() == 3)
            .collect();
        assert_eq!(support.len(), 56);
        assert_eq!(support.iter().map(|&c| counts[c]).sum::<usize>(), samples);
        let expected = samples as f64 / support.len() as f64;
        let chi2: f64 = support.iter().map(|&c| (counts[c] as f64 - expected).powi(2) / expected).sum();
        let critical = ChiSquared::new((support.len() - 1) as f64).unwrap().inverse_cdf(0.99);
        assert!(chi2 < critical, "mu={mu}: chi2 {chi2:.1} >= {critical:.1}");
    }
}
