//! Exact law of tiny systems from the full generator matrix.

use std::collections::HashMap;

use statrs::function::gamma::ln_gamma;

use crate::engine::{run_observed, RateIndex, SimClock, Uniformized};
use crate::error::{Error, Result};
use crate::lattice::LatticeConfig;
use crate::rates::RateTable;
use crate::rng::{seeded, stream_seed};

pub const MAX_STATES: u64 = 60_000;

/// Poisson weights are summed until the neglected tail is below this.
pub const TRUNCATION: f64 = 1e-10;

/// Sparse generator on all `n^N` labelings, indexed by `sum_i label_i n^i`.
#[derive(Debug, Clone)]
pub struct Generator {
    pub n_sites: usize,
    pub n_species: usize,
    /// Row starts into `targets` and `rates`, CSR layout.
    offsets: Vec<usize>,
    targets: Vec<usize>,
    rates: Vec<f64>,
    exit: Vec<f64>,
}

pub fn encode(occupancy: &[u8], n_species: usize) -> usize {
    occupancy.iter().rev().fold(0, |acc, &l| acc * n_species + usize::from(l))
}

pub fn decode(mut code: usize, n_sites: usize, n_species: usize) -> Vec<u8> {
    (0..n_sites)
        .map(|_| {
            let l = (code % n_species) as u8;
            code /= n_species;
            l
        })
        .collect()
}

impl Generator {
    pub fn assemble(n_sites: usize, table: &RateTable) -> Result<Self> {
        let n = table.n_species();
        let size = (n as u64).checked_pow(n_sites as u32).filter(|&s| s <= MAX_STATES);
        let Some(size) = size else {
            return Err(Error::StateSpaceTooLarge((n as f64).powi(n_sites as i32) as u64));
        };
        let size = size as usize;
        let mut g = Generator {
            n_sites,
            n_species: n,
            offsets: Vec::with_capacity(size + 1),
            targets: Vec::new(),
            rates: Vec::new(),
            exit: Vec::with_capacity(size),
        };
        g.offsets.push(0);
        for code in 0..size {
            let mut occ = decode(code, n_sites, n);
            let mut exit = 0.0;
            for b in 0..n_sites {
                let c = if b + 1 == n_sites { 0 } else { b + 1 };
                let r = table.rate(occ[b], occ[c]);
                if r > 0.0 && occ[b] != occ[c] {
                    occ.swap(b, c);
                    g.targets.push(encode(&occ, n));
                    occ.swap(b, c);
                    g.rates.push(r);
                    exit += r;
                }
            }
            g.exit.push(exit);
            g.offsets.push(g.targets.len());
        }
        Ok(g)
    }

    pub fn n_states(&self) -> usize {
        self.exit.len()
    }

    /// `(target, rate)` pairs leaving `state`.
    pub fn transitions(&self, state: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[state]..self.offsets[state + 1];
        self.targets[r.clone()].iter().copied().zip(self.rates[r].iter().copied())
    }

    pub fn exit_rate(&self, state: usize) -> f64 {
        self.exit[state]
    }

    /// `p exp(tQ)` by uniformization at rate `max exit`.
    pub fn evolve(&self, p0: &[f64], t: f64) -> Vec<f64> {
        let big = self.exit.iter().copied().fold(0.0, f64::max);
        let mean = big * t;
        if mean == 0.0 {
            return p0.to_vec();
        }
        let mut v = p0.to_vec();
        let mut next = vec![0.0; v.len()];
        let mut out = vec![0.0; v.len()];
        let mut covered = 0.0;
        let ln_mean = mean.ln();
        let mut k = 0u64;
        loop {
            let w = (-mean + k as f64 * ln_mean - ln_gamma(k as f64 + 1.0)).exp();
            for (o, x) in out.iter_mut().zip(&v) {
                *o += w * x;
            }
            covered += w;
            // Past the mode the remaining mass is at most what is not yet covered.
            if 1.0 - covered < TRUNCATION && k as f64 > mean {
                break;
            }
            next.iter_mut().for_each(|x| *x = 0.0);
            for s in 0..v.len() {
                let m = v[s];
                if m == 0.0 {
                    continue;
                }
                next[s] += m * (1.0 - self.exit[s] / big);
                for (target, r) in self.transitions(s) {
                    next[target] += m * r / big;
                }
            }
            std::mem::swap(&mut v, &mut next);
            k += 1;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    EventDriven,
    Uniformized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub n_states: usize,
    pub runs: usize,
    pub tv: f64,
    /// Exact law, indexed by state code.
    pub exact: Vec<f64>,
    pub empirical: Vec<f64>,
}

/// Total-variation distance `(1/2) sum |p - q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Compares the law of `runs` simulated copies at time `t` with the exact
/// law `delta_initial exp(tQ)`.
pub fn run_generator_oracle(
    initial: &LatticeConfig,
    table: &RateTable,
    t: f64,
    runs: usize,
    seed: u64,
    driver: Driver,
) -> Result<OracleReport> {
    if initial.n_species() != table.n_species() {
        return Err(Error::DimensionMismatch { expected: table.n_species(), found: initial.n_species() });
    }
    if runs == 0 {
        return Err(Error::InvalidParameter("need at least one run".into()));
    }
    let gen = Generator::assemble(initial.n_sites(), table)?;
    let mut p0 = vec![0.0; gen.n_states()];
    p0[encode(initial.occupancy(), gen.n_species)] = 1.0;
    let exact = gen.evolve(&p0, t);

    let uniformized = Uniformized::new(table);
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for r in 0..runs {
        let mut c = initial.clone();
        let mut rng = seeded(stream_seed(seed, initial.n_sites(), r));
        match driver {
            Driver::EventDriven => {
                let mut index = RateIndex::build(&c, table)?;
                let mut clock = SimClock::default();
                run_observed(&mut c, &mut index, table, &mut clock, &mut rng, t, |_, _| {});
            }
            Driver::Uniformized => {
                uniformized.evolve(&mut c, &mut rng, t)?;
            }
        }
        *counts.entry(encode(c.occupancy(), gen.n_species)).or_default() += 1;
    }
    let mut empirical = vec![0.0; gen.n_states()];
    for (code, k) in counts {
        empirical[code] = k as f64 / runs as f64;
    }
    Ok(OracleReport { n_states: gen.n_states(), runs, tv: total_variation(&exact, &empirical), exact, empirical })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_round_trips() {
        for code in 0..81 {
            assert_eq!(encode(&decode(code, 4, 3), 3), code);
        }
    }

    #[test]
    fn refuses_large_state_spaces() {
        let t = RateTable::abc(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(Generator::assemble(11, &t), Err(Error::StateSpaceTooLarge(_))));
        assert!(Generator::assemble(10, &t).is_ok());
    }

    /// Two sites: `[1,0] <-> [0,1]` through both bonds, total rate
    /// `a + b` each way, so the flip probability is `(1 - exp(-2(a+b)t)) / 2`.
    #[test]
    fn two_state_chain_matches_closed_form() {
        let (a, b) = (3.0, 1.0);
        let table = RateTable::from_rows(vec![vec![0.0, b], vec![a, 0.0]]).unwrap();
        let g = Generator::assemble(2, &table).unwrap();
        let mut p0 = vec![0.0; 4];
        p0[encode(&[1, 0], 2)] = 1.0;
        for t in [0.0, 0.05, 0.3, 2.0] {
            let p = g.evolve(&p0, t);
            let flip = 0.5 * (1.0 - (-2.0 * (a + b) * t).exp());
            assert!((p[encode(&[0, 1], 2)] - flip).abs() < 1e-10);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_time_is_a_point_mass() {
        let table = RateTable::binary(1.0, 0.0, 4).unwrap();
        let init = LatticeConfig::binary(&[1, 1, 0, 0]).unwrap();
        for d in [Driver::EventDriven, Driver::Uniformized] {
            let rep = run_generator_oracle(&init, &table, 0.0, 100, 1, d).unwrap();
            assert_eq!(rep.tv, 0.0);
        }
    }
}
