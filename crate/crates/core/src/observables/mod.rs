//! Empirical functionals of a configuration and the martingale built from
//! the exponential functional `Z = exp((1/N) sum phi_a(i/N) A_i + phi_b(i/N) B_i)`.
//!
//! `A_i` is the particle indicator (label 1) and `B_i = 1 - A_i`.

mod testfn;

pub use testfn::{PeriodicSpline, TestFn, TestFunctionPair};

use std::io::Write;

use crate::engine::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::hydro::DensityField;
use crate::lattice::{LatticeConfig, PARTICLE};
use crate::rates::RateTable;

/// `(1/N) sum_i phi(i/N) 1{occupancy[i] = k}`.
pub fn empirical_pairing(config: &LatticeConfig, phi: impl Fn(f64) -> f64, k: u8) -> f64 {
    let n = config.n_sites() as f64;
    config
        .occupancy()
        .iter()
        .enumerate()
        .filter(|&(_, &l)| l == k)
        .map(|(i, _)| phi(i as f64 / n))
        .sum::<f64>()
        / n
}

/// Block averages over `bins` consecutive groups of `N / bins` sites, one row
/// per species.
pub fn density_profile(config: &LatticeConfig, bins: usize) -> Result<DensityField> {
    let n = config.n_sites();
    if bins == 0 || !n.is_multiple_of(bins) {
        return Err(Error::BinsDoNotDivide { bins, n_sites: n, suggestion: nearest_divisor(n, bins) });
    }
    let width = n / bins;
    let mut rows = vec![vec![0.0; bins]; config.n_species()];
    for (i, &l) in config.occupancy().iter().enumerate() {
        rows[usize::from(l)][i / width] += 1.0;
    }
    for v in rows.iter_mut().flatten() {
        *v /= width as f64;
    }
    DensityField::new(0.0, rows)
}

/// Divisor of `n` closest to `m`, ties to the smaller one.
pub fn nearest_divisor(n: usize, m: usize) -> usize {
    (1..=n).filter(|&d| n.is_multiple_of(d)).min_by_key(|&d| (d.abs_diff(m), d)).unwrap_or(1)
}

/// `log Z` for a two-species configuration.
pub fn log_z(config: &LatticeConfig, tf: &TestFunctionPair) -> Result<f64> {
    if config.n_species() != 2 {
        return Err(Error::NotBinary(config.n_species()));
    }
    let n = config.n_sites() as f64;
    Ok(config
        .occupancy()
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let x = i as f64 / n;
            if l == PARTICLE {
                tf.phi_a.value(x)
            } else {
                tf.phi_b.value(x)
            }
        })
        .sum::<f64>()
        / n)
}

/// Per-bond coefficients of `L` and `R` for one `(N, psi, rates)`.
///
/// With `d_i = psi((i+1)/N) - psi(i/N)`, an `AB -> BA` exchange at bond `i`
/// multiplies `Z` by `exp(d_i / N)` and `BA -> AB` by `exp(-d_i / N)`.
#[derive(Debug, Clone)]
pub struct BondKernel {
    /// `lambda_ab (exp(d_i/N) - 1)`
    gain_ab: Vec<f64>,
    /// `lambda_ba (exp(-d_i/N) - 1)`
    gain_ba: Vec<f64>,
    /// `gain_ab^2 / lambda_ab`, zero when `lambda_ab = 0`
    qv_ab: Vec<f64>,
    qv_ba: Vec<f64>,
    /// `phi_a(i/N) / N` and `phi_b(i/N) / N`
    weight_a: Vec<f64>,
    weight_b: Vec<f64>,
}

impl BondKernel {
    pub fn new(n_sites: usize, tf: &TestFunctionPair, table: &RateTable) -> Result<Self> {
        tf.validate()?;
        let lab = table.lambda_ab()?;
        let lba = table.lambda_ba()?;
        let n = n_sites as f64;
        let mut k = BondKernel {
            gain_ab: Vec::with_capacity(n_sites),
            gain_ba: Vec::with_capacity(n_sites),
            qv_ab: Vec::with_capacity(n_sites),
            qv_ba: Vec::with_capacity(n_sites),
            weight_a: Vec::with_capacity(n_sites),
            weight_b: Vec::with_capacity(n_sites),
        };
        for i in 0..n_sites {
            let x = i as f64 / n;
            let d = tf.psi((i + 1) as f64 / n) - tf.psi(x);
            let up = (d / n).exp_m1();
            let down = (-d / n).exp_m1();
            k.gain_ab.push(lab * up);
            k.gain_ba.push(lba * down);
            k.qv_ab.push(lab * up * up);
            k.qv_ba.push(lba * down * down);
            k.weight_a.push(tf.phi_a.value(x) / n);
            k.weight_b.push(tf.phi_b.value(x) / n);
        }
        Ok(k)
    }

    pub fn n_sites(&self) -> usize {
        self.gain_ab.len()
    }

    /// Contribution of bond `i` to `(L, R)` given the labels on it.
    #[inline]
    fn bond_terms(&self, i: usize, left: u8, right: u8) -> (f64, f64) {
        match (left, right) {
            (1, 0) => (self.gain_ab[i], self.qv_ab[i]),
            (0, 1) => (self.gain_ba[i], self.qv_ba[i]),
            _ => (0.0, 0.0),
        }
    }

    #[inline]
    fn site_term(&self, i: usize, label: u8) -> f64 {
        if label == PARTICLE {
            self.weight_a[i]
        } else {
            self.weight_b[i]
        }
    }

    /// `(log Z, L, R)` by full summation.
    pub fn evaluate(&self, occupancy: &[u8]) -> Result<(f64, f64, f64)> {
        let n = self.n_sites();
        if occupancy.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: occupancy.len() });
        }
        let (mut lz, mut l, mut r) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let j = if i + 1 == n { 0 } else { i + 1 };
            let (gl, qr) = self.bond_terms(i, occupancy[i], occupancy[j]);
            l += gl;
            r += qr;
            lz += self.site_term(i, occupancy[i]);
        }
        Ok((lz, l, r))
    }
}

/// `L = sum_i gain_ab(i) A_i B_{i+1} + gain_ba(i) B_i A_{i+1}`, so that the
/// generator applied to `Z` equals `L Z`.
pub fn generator_functional(config: &LatticeConfig, tf: &TestFunctionPair, table: &RateTable) -> Result<f64> {
    let kernel = BondKernel::new(config.n_sites(), tf, table)?;
    Ok(kernel.evaluate(config.occupancy())?.1)
}

/// `R = sum_i gain_ab(i)^2 / lambda_ab A_i B_{i+1} + gain_ba(i)^2 / lambda_ba B_i A_{i+1}`,
/// the rate of the predictable quadratic variation of `U` divided by `Z^2`.
/// A zero base rate contributes zero.
pub fn quadratic_variation_rate(config: &LatticeConfig, tf: &TestFunctionPair, table: &RateTable) -> Result<f64> {
    let kernel = BondKernel::new(config.n_sites(), tf, table)?;
    Ok(kernel.evaluate(config.occupancy())?.2)
}

const RESUM_PERIOD: u64 = 1 << 16;

/// Incremental `Z`, `L`, `R` and the compensator `int_0^t L Z ds` along a
/// jump path. Owns a mirror of the occupancy.
#[derive(Debug, Clone)]
pub struct MartingaleTracker {
    kernel: BondKernel,
    occupancy: Vec<u8>,
    t: f64,
    log_z: f64,
    z0: f64,
    generator: f64,
    qv_rate: f64,
    compensator: f64,
    qv_integral: f64,
    r_integral: f64,
    max_abs_generator: f64,
    since_resum: u64,
}

/// Values of the tracked quantities at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleSample {
    pub t: f64,
    pub z: f64,
    pub u: f64,
    pub generator: f64,
    pub qv_rate: f64,
    pub compensator: f64,
    /// `int_0^t Z^2 R ds`, the predictable quadratic variation of `U`.
    pub qv_integral: f64,
    /// `int_0^t R ds`
    pub r_integral: f64,
}

impl MartingaleTracker {
    pub fn new(config: &LatticeConfig, tf: &TestFunctionPair, table: &RateTable, t0: f64) -> Result<Self> {
        if config.n_species() != 2 {
            return Err(Error::NotBinary(config.n_species()));
        }
        let kernel = BondKernel::new(config.n_sites(), tf, table)?;
        let (log_z, generator, qv_rate) = kernel.evaluate(config.occupancy())?;
        Ok(MartingaleTracker {
            kernel,
            occupancy: config.occupancy().to_vec(),
            t: t0,
            log_z,
            z0: log_z.exp(),
            generator,
            qv_rate,
            compensator: 0.0,
            qv_integral: 0.0,
            r_integral: 0.0,
            max_abs_generator: generator.abs(),
            since_resum: 0,
        })
    }

    /// Integrates over the holding interval up to `t`; the state is unchanged.
    pub fn advance_to(&mut self, t: f64) {
        let dt = t - self.t;
        debug_assert!(dt >= 0.0, "time runs backwards: {} -> {t}", self.t);
        let z = self.log_z.exp();
        self.compensator += self.generator * z * dt;
        self.qv_integral += z * z * self.qv_rate * dt;
        self.r_integral += self.qv_rate * dt;
        self.t = t;
    }

    /// Applies the exchange at `bond` at the current time.
    pub fn exchange(&mut self, bond: usize) {
        let n = self.occupancy.len();
        let right = if bond + 1 == n { 0 } else { bond + 1 };
        let left = if bond == 0 { n - 1 } else { bond - 1 };
        let touched = [left, bond, right];
        let bonds: &[usize] = if n == 2 { &touched[1..2] } else { &touched };

        let occ = &self.occupancy;
        let mut delta = -self.kernel.site_term(bond, occ[bond]) - self.kernel.site_term(right, occ[right]);
        let (mut dl, mut dr) = (0.0, 0.0);
        for &b in bonds {
            let (gl, qr) = self.kernel.bond_terms(b, occ[b], occ[(b + 1) % n]);
            dl -= gl;
            dr -= qr;
        }
        self.occupancy.swap(bond, right);
        let occ = &self.occupancy;
        delta += self.kernel.site_term(bond, occ[bond]) + self.kernel.site_term(right, occ[right]);
        for &b in bonds {
            let (gl, qr) = self.kernel.bond_terms(b, occ[b], occ[(b + 1) % n]);
            dl += gl;
            dr += qr;
        }
        self.log_z += delta;
        self.generator += dl;
        self.qv_rate += dr;

        self.since_resum += 1;
        if self.since_resum >= RESUM_PERIOD {
            self.resum();
        }
        self.max_abs_generator = self.max_abs_generator.max(self.generator.abs());
    }

    fn resum(&mut self) {
        let (lz, l, r) = self.kernel.evaluate(&self.occupancy).expect("mirror has the kernel's length");
        self.log_z = lz;
        self.generator = l;
        self.qv_rate = r;
        self.since_resum = 0;
    }

    pub fn sample(&self) -> MartingaleSample {
        let z = self.log_z.exp();
        MartingaleSample {
            t: self.t,
            z,
            u: z - self.z0 - self.compensator,
            generator: self.generator,
            qv_rate: self.qv_rate,
            compensator: self.compensator,
            qv_integral: self.qv_integral,
            r_integral: self.r_integral,
        }
    }

    /// Largest `|L|` seen at the start and after every exchange.
    pub fn max_abs_generator(&self) -> f64 {
        self.max_abs_generator
    }

    pub fn occupancy(&self) -> &[u8] {
        &self.occupancy
    }
}

/// `Z`, `U`, `R` and the compensator sampled along one trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MartingaleTrace {
    pub times: Vec<f64>,
    pub z_values: Vec<f64>,
    pub u_values: Vec<f64>,
    pub r_values: Vec<f64>,
    pub generator_integral: Vec<f64>,
}

impl MartingaleTrace {
    fn push(&mut self, s: MartingaleSample) {
        if self.times.last() == Some(&s.t) {
            return;
        }
        self.times.push(s.t);
        self.z_values.push(s.z);
        self.u_values.push(s.u);
        self.r_values.push(s.qv_rate);
        self.generator_integral.push(s.compensator);
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,Z,U,R,generator_integral")?;
        for j in 0..self.times.len() {
            writeln!(
                out,
                "{:?},{:?},{:?},{:?},{:?}",
                self.times[j], self.z_values[j], self.u_values[j], self.r_values[j], self.generator_integral[j]
            )?;
        }
        Ok(())
    }
}

/// Replays an event-resolved trajectory. Samples at the start, at every
/// snapshot time and at the end; a time equal to an event time sees the
/// post-event state.
pub fn martingale_trace(traj: &TrajectoryRecord, tf: &TestFunctionPair, table: &RateTable) -> Result<MartingaleTrace> {
    let events = traj.events.as_ref().ok_or(Error::EventLogRequired)?;
    let mut tracker = MartingaleTracker::new(&traj.initial, tf, table, traj.t_start)?;
    let mut trace = MartingaleTrace::default();
    trace.push(tracker.sample());
    let mut pending = traj.snapshots.iter().map(|s| s.time).peekable();
    let mut t = traj.t_start;
    for ev in events {
        let t_event = t + ev.dt;
        while let Some(s) = pending.next_if(|&s| s < t_event) {
            tracker.advance_to(s);
            trace.push(tracker.sample());
        }
        tracker.advance_to(t_event);
        tracker.exchange(ev.bond);
        t = t_event;
    }
    for s in pending {
        tracker.advance_to(s);
        trace.push(tracker.sample());
    }
    tracker.advance_to(traj.t_end.max(t));
    trace.push(tracker.sample());
    Ok(trace)
}
