//! Explicit conservative solvers for the limiting equations on the periodic
//! unit interval, and the weak-form residual of a density trajectory.
//!
//! Sign convention, fixed by the microscopic generator (a particle on the
//! left of a hole hops right at `lambda N^2 + mu N / 2`):
//!
//! ```text
//! rho_t + d_x( mu rho (1 - rho) ) = lambda rho_xx
//! ```
//!
//! so `mu > 0` transports density to the right. The n-species system is
//!
//! ```text
//! d_t rho_k = D [ rho_k'' + d_x sum_l alpha[l][k] rho_k rho_l ]
//! ```
//!
//! with `alpha[k][l] = N log(rate[k][l] / rate[l][k])`. For two species with
//! `alpha[1][0] = mu / lambda` and `D = lambda` it is the equation above.

mod field;
mod weak;

pub use field::{write_fields_csv, DensityField};
pub use weak::{weak_residual, SeparableTest, SpaceTimeTest, TimeFactor};

use crate::error::{Error, Result};
use crate::rates::check_antisymmetric;

/// Out-of-range values beyond this are clipped and logged.
pub const CLIP_EPS: f64 = 1e-8;

/// Fraction of the linear stability bound used by [`PdeParams::max_stable_dt`].
pub const CFL_SAFETY: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub enum PdeModel {
    Burgers { lambda: f64, mu: f64 },
    NSpecies { d: f64, alpha: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeParams {
    pub model: PdeModel,
    /// Grid size `M`; `dx = 1 / M`.
    pub grid: usize,
    pub dt: f64,
}

impl PdeParams {
    pub fn burgers(lambda: f64, mu: f64, grid: usize, dt: f64) -> Result<Self> {
        if !(lambda > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("need lambda > 0 and finite mu, got {lambda}, {mu}")));
        }
        PdeParams::checked(PdeModel::Burgers { lambda, mu }, grid, dt)
    }

    pub fn nspecies(d: f64, alpha: Vec<Vec<f64>>, grid: usize, dt: f64) -> Result<Self> {
        if !(d > 0.0) {
            return Err(Error::InvalidParameter(format!("need D > 0, got {d}")));
        }
        if alpha.len() < 2 {
            return Err(Error::InvalidParameter("need at least two species".into()));
        }
        check_antisymmetric(&alpha)?;
        PdeParams::checked(PdeModel::NSpecies { d, alpha }, grid, dt)
    }

    fn checked(model: PdeModel, grid: usize, dt: f64) -> Result<Self> {
        if grid < 3 {
            return Err(Error::InvalidParameter(format!("grid needs at least 3 points, got {grid}")));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("need dt > 0, got {dt}")));
        }
        Ok(PdeParams { model, grid, dt })
    }

    pub fn n_rows(&self) -> usize {
        match &self.model {
            PdeModel::Burgers { .. } => 1,
            PdeModel::NSpecies { alpha, .. } => alpha.len(),
        }
    }

    fn diffusivity(&self) -> f64 {
        match &self.model {
            PdeModel::Burgers { lambda, .. } => *lambda,
            PdeModel::NSpecies { d, .. } => *d,
        }
    }

    /// Bound on the local flux speed for data starting in `rho0`.
    ///
    /// Burgers: `|mu| max |1 - 2 rho|` over the range of `rho0`, which the
    /// scheme preserves. n species: `D max_k sum_l |alpha[k][l]|`.
    pub fn max_speed(&self, rho0: &DensityField) -> f64 {
        match &self.model {
            PdeModel::Burgers { mu, .. } => {
                let lo = rho0.min_value().clamp(0.0, 1.0);
                let hi = rho0.max_value().clamp(0.0, 1.0);
                mu.abs() * (1.0 - 2.0 * lo).abs().max((1.0 - 2.0 * hi).abs())
            }
            PdeModel::NSpecies { d, alpha } => {
                d * alpha.iter().map(|r| r.iter().map(|a| a.abs()).sum::<f64>()).fold(0.0, f64::max)
            }
        }
    }

    /// `CFL_SAFETY / (2 nu / dx^2 + a / dx)`: the explicit update is then a
    /// convex combination of neighbouring values.
    pub fn max_stable_dt(&self, rho0: &DensityField) -> f64 {
        let dx = 1.0 / self.grid as f64;
        CFL_SAFETY / (2.0 * self.diffusivity() / (dx * dx) + self.max_speed(rho0) / dx)
    }

    pub fn with_stable_dt(mut self, rho0: &DensityField) -> Self {
        self.dt = self.max_stable_dt(rho0);
        self
    }

    pub fn check_cfl(&self, rho0: &DensityField) -> Result<()> {
        let max_dt = self.max_stable_dt(rho0);
        if self.dt > max_dt {
            return Err(Error::Cfl { dt: self.dt, max_dt });
        }
        Ok(())
    }

    pub fn metadata(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        match &self.model {
            PdeModel::Burgers { lambda, mu } => {
                out.push(("pde".into(), "burgers".into()));
                out.push(("lambda".into(), lambda.to_string()));
                out.push(("mu".into(), mu.to_string()));
                out.push(("flux".into(), "+mu rho (1 - rho)".into()));
            }
            PdeModel::NSpecies { d, alpha } => {
                out.push(("pde".into(), "nspecies".into()));
                out.push(("D".into(), d.to_string()));
                out.push(("alpha".into(), crate::rates::format_matrix(alpha)));
                out.push((
                    "alpha_convention".into(),
                    "d_t rho_k = D [rho_k'' + d_x sum_l alpha[l][k] rho_k rho_l]".into(),
                ));
            }
        }
        out.push(("M".into(), self.grid.to_string()));
        out.push(("dt".into(), format!("{:?}", self.dt)));
        out
    }
}

/// Solves the viscous Burgers equation from a one-row field. Returns the
/// fields at `output_times`, or at `t_end` alone when none are given.
pub fn solve_burgers(rho0: &DensityField, params: &PdeParams, t_end: f64, output_times: &[f64]) -> Result<Vec<DensityField>> {
    if !matches!(params.model, PdeModel::Burgers { .. }) {
        return Err(Error::InvalidParameter("solve_burgers needs Burgers parameters".into()));
    }
    solve(rho0, params, t_end, output_times)
}

/// Solves the equidiffusive n-species system from an n-row field.
pub fn solve_nspecies(rho0: &DensityField, params: &PdeParams, t_end: f64, output_times: &[f64]) -> Result<Vec<DensityField>> {
    if !matches!(params.model, PdeModel::NSpecies { .. }) {
        return Err(Error::InvalidParameter("solve_nspecies needs n-species parameters".into()));
    }
    let defect = rho0.simplex_defect();
    if defect > CLIP_EPS {
        return Err(Error::InvalidProfile(format!("initial densities sum to 1 only within {defect:e}")));
    }
    solve(rho0, params, t_end, output_times)
}

/// Dispatches on the model.
pub fn solve(rho0: &DensityField, params: &PdeParams, t_end: f64, output_times: &[f64]) -> Result<Vec<DensityField>> {
    if rho0.n_rows() != params.n_rows() {
        return Err(Error::DimensionMismatch { expected: params.n_rows(), found: rho0.n_rows() });
    }
    if rho0.grid_size() != params.grid {
        return Err(Error::DimensionMismatch { expected: params.grid, found: rho0.grid_size() });
    }
    if rho0.min_value() < -CLIP_EPS || rho0.max_value() > 1.0 + CLIP_EPS {
        return Err(Error::InvalidProfile(format!(
            "initial density leaves [0, 1]: range [{}, {}]",
            rho0.min_value(),
            rho0.max_value()
        )));
    }
    params.check_cfl(rho0)?;
    let times: Vec<f64> = if output_times.is_empty() { vec![t_end] } else { output_times.to_vec() };
    crate::engine::check_snapshot_times(rho0.t, t_end, &times)?;

    let mut stepper = Stepper::new(params, rho0);
    let mut out = Vec::with_capacity(times.len());
    for &target in &times {
        let span = target - stepper.t;
        if span > 0.0 {
            // Land exactly on `target` with equal steps no longer than dt.
            let n_steps = (span / params.dt * (1.0 - 1e-12)).ceil().max(1.0) as u64;
            let h = span / n_steps as f64;
            for _ in 0..n_steps {
                stepper.step(h);
            }
            stepper.t = target;
        }
        out.push(DensityField::new(target, stepper.rows.clone())?);
    }
    if stepper.clipped > 0 {
        log::warn!("clipped {} grid values that left [0, 1] by more than {CLIP_EPS}", stepper.clipped);
    }
    Ok(out)
}

struct Stepper<'a> {
    params: &'a PdeParams,
    t: f64,
    rows: Vec<Vec<f64>>,
    /// `flux[k][j]` sits on the interface between cells `j` and `j + 1`.
    flux: Vec<Vec<f64>>,
    speed: Vec<f64>,
    clipped: u64,
}

impl<'a> Stepper<'a> {
    fn new(params: &'a PdeParams, rho0: &DensityField) -> Self {
        let m = params.grid;
        let n = rho0.n_rows();
        Stepper {
            params,
            t: rho0.t,
            rows: rho0.rows().to_vec(),
            flux: vec![vec![0.0; m]; n],
            speed: vec![0.0; m],
            clipped: 0,
        }
    }

    fn step(&mut self, h: f64) {
        let m = self.params.grid;
        let dx = 1.0 / m as f64;
        match &self.params.model {
            PdeModel::Burgers { lambda, mu } => {
                let r = &self.rows[0];
                let f = &mut self.flux[0];
                for j in 0..m {
                    let k = if j + 1 == m { 0 } else { j + 1 };
                    let (a, b) = (r[j], r[k]);
                    let speed = (mu * (1.0 - 2.0 * a)).abs().max((mu * (1.0 - 2.0 * b)).abs());
                    f[j] = 0.5 * (mu * a * (1.0 - a) + mu * b * (1.0 - b)) - 0.5 * speed * (b - a);
                }
                let nu = *lambda;
                update(&mut self.rows[0], &self.flux[0], h / dx, nu * h / (dx * dx));
            }
            PdeModel::NSpecies { d, alpha } => {
                let n = alpha.len();
                // Species-independent dissipation keeps sum_k rho_k = 1.
                let drift = |rows: &[Vec<f64>], j: usize, k: usize| -> f64 {
                    (0..n).map(|l| alpha[k][l] * rows[l][j]).sum::<f64>()
                };
                let row_sums: Vec<f64> = alpha.iter().map(|r| r.iter().sum()).collect();
                // max_k D |sum_l alpha[k][l] (rho_l - rho_k)|
                let local_speed = |rows: &[Vec<f64>], j: usize| -> f64 {
                    (0..n).map(|k| (d * (drift(rows, j, k) - row_sums[k] * rows[k][j])).abs()).fold(0.0, f64::max)
                };
                for j in 0..m {
                    let jn = if j + 1 == m { 0 } else { j + 1 };
                    self.speed[j] = local_speed(&self.rows, j).max(local_speed(&self.rows, jn));
                }
                for k in 0..n {
                    for j in 0..m {
                        let jn = if j + 1 == m { 0 } else { j + 1 };
                        let (a, b) = (self.rows[k][j], self.rows[k][jn]);
                        let fa = d * a * drift(&self.rows, j, k);
                        let fb = d * b * drift(&self.rows, jn, k);
                        self.flux[k][j] = 0.5 * (fa + fb) - 0.5 * self.speed[j] * (b - a);
                    }
                }
                for k in 0..n {
                    update(&mut self.rows[k], &self.flux[k], h / dx, d * h / (dx * dx));
                }
            }
        }
        for v in self.rows.iter_mut().flatten() {
            if *v < -CLIP_EPS || *v > 1.0 + CLIP_EPS {
                self.clipped += 1;
                *v = v.clamp(0.0, 1.0);
            }
        }
    }
}

/// `r_j -= c (F_j - F_{j-1})` plus `q (r_{j+1} - 2 r_j + r_{j-1})`, periodic.
fn update(r: &mut [f64], f: &[f64], c: f64, q: f64) {
    let m = r.len();
    let first = r[0];
    let mut prev = r[m - 1];
    for j in 0..m {
        let cur = r[j];
        let next = if j + 1 == m { first } else { r[j + 1] };
        let fl = if j == 0 { f[m - 1] } else { f[j - 1] };
        r[j] = cur - c * (f[j] - fl) + q * (next - 2.0 * cur + prev);
        prev = cur;
    }
}

/// `k + 1` equally spaced times from `0` to `t_end` inclusive.
pub fn uniform_times(t_end: f64, k: usize) -> Vec<f64> {
    (0..=k).map(|j| t_end * j as f64 / k as f64).collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{PI, TAU};

    use super::*;

    fn field(m: usize, f: impl Fn(f64) -> f64) -> DensityField {
        DensityField::new(0.0, vec![(0..m).map(|j| f(j as f64 / m as f64)).collect()]).unwrap()
    }

    fn stable_burgers(lambda: f64, mu: f64, rho0: &DensityField) -> PdeParams {
        PdeParams::burgers(lambda, mu, rho0.grid_size(), 1.0).unwrap().with_stable_dt(rho0)
    }

    #[test]
    fn constants_are_stationary() {
        let rho0 = field(64, |_| 0.3);
        let p = stable_burgers(1.0, 2.0, &rho0);
        let out = solve_burgers(&rho0, &p, 0.05, &[0.01, 0.05]).unwrap();
        assert!(out.iter().all(|f| f.max_abs_diff(&rho0) < 1e-13));
        assert_eq!(out[1].t, 0.05);

        let third = DensityField::new(0.0, vec![vec![1.0 / 3.0; 48]; 3]).unwrap();
        let p = PdeParams::nspecies(1.0, crate::rates::RateTable::cyclic_alpha(2.0), 48, 1.0)
            .unwrap()
            .with_stable_dt(&third);
        let out = solve_nspecies(&third, &p, 0.02, &[]).unwrap();
        assert!(out[0].max_abs_diff(&third) < 1e-13);
    }

    #[test]
    fn heat_mode_decays_at_the_exact_rate() {
        let rho0 = field(256, |x| 0.5 + 0.25 * (TAU * x).cos());
        let p = stable_burgers(1.0, 0.0, &rho0);
        let t = 0.05;
        let out = solve_burgers(&rho0, &p, t, &[]).unwrap();
        let exact = field(256, |x| 0.5 + 0.25 * (-4.0 * PI * PI * t).exp() * (TAU * x).cos());
        let err = out[0].max_abs_diff(&exact);
        assert!(err < 1e-4, "max-norm error {err}");
    }

    #[test]
    fn rejects_cfl_violation_with_suggestion() {
        let rho0 = field(128, |_| 0.5);
        let p = PdeParams::burgers(1.0, 1.0, 128, 1e-3).unwrap();
        match solve_burgers(&rho0, &p, 0.1, &[]) {
            Err(Error::Cfl { dt, max_dt }) => {
                assert_eq!(dt, 1e-3);
                assert!(max_dt < dt && max_dt > 0.0);
            }
            other => panic!("expected a CFL error, got {other:?}"),
        }
    }

    #[test]
    fn conserves_mass_and_respects_maximum_principle() {
        let rho0 = field(200, |x| 0.5 + 0.3 * (TAU * x).sin() + 0.1 * (3.0 * TAU * x).cos());
        let (lo, hi) = (rho0.min_value(), rho0.max_value());
        let p = stable_burgers(0.2, 4.0, &rho0);
        let t = 0.2;
        let out = solve_burgers(&rho0, &p, t, &[0.1, 0.2]).unwrap();
        for f in &out {
            assert!((f.mass(0) - rho0.mass(0)).abs() < 1e-12 * t.max(1.0));
            assert!(f.min_value() >= lo - 1e-8 && f.max_value() <= hi + 1e-8);
        }
    }

    #[test]
    fn positive_mu_moves_mass_right() {
        // A narrow bump on a low background: its centre of mass moves in the
        // direction of mu (1 - 2 rho) > 0.
        let rho0 = field(256, |x| 0.1 + 0.2 * (-((x - 0.5) / 0.05).powi(2)).exp());
        let p = stable_burgers(0.05, 1.0, &rho0);
        let out = solve_burgers(&rho0, &p, 0.05, &[]).unwrap();
        let centre = |f: &DensityField| {
            let r = f.row(0);
            let w: f64 = r.iter().map(|v| v - 0.1).sum();
            r.iter().enumerate().map(|(j, v)| (v - 0.1) * j as f64 / 256.0).sum::<f64>() / w
        };
        assert!(centre(&out[0]) > centre(&rho0) + 0.01);
    }

    #[test]
    fn two_species_system_reduces_to_burgers() {
        let (lambda, mu) = (0.7, 1.3);
        let m = 96;
        let rho0 = field(m, |x| 0.5 + 0.3 * (TAU * x).sin());
        let pair = DensityField::new(0.0, vec![rho0.row(0).iter().map(|r| 1.0 - r).collect(), rho0.row(0).to_vec()]).unwrap();
        let alpha = vec![vec![0.0, -mu / lambda], vec![mu / lambda, 0.0]];
        let pn = PdeParams::nspecies(lambda, alpha, m, 1.0).unwrap().with_stable_dt(&pair);
        let pb = PdeParams::burgers(lambda, mu, m, pn.dt).unwrap();
        let times = uniform_times(0.1, 5);
        let b = solve_burgers(&rho0, &pb, 0.1, &times).unwrap();
        let n = solve_nspecies(&pair, &pn, 0.1, &times).unwrap();
        for (fb, fn_) in b.iter().zip(&n) {
            let diff = fb.row(0).iter().zip(fn_.row(1)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-10, "t = {}: {diff}", fb.t);
        }
    }

    #[test]
    fn cyclic_three_species_stays_on_the_simplex() {
        let m = 120;
        let r0: Vec<f64> = (0..m).map(|j| 0.3 + 0.2 * (TAU * j as f64 / m as f64).sin()).collect();
        let r1: Vec<f64> = (0..m).map(|j| 0.35 + 0.15 * (2.0 * TAU * j as f64 / m as f64).cos()).collect();
        let r2: Vec<f64> = r0.iter().zip(&r1).map(|(a, b)| 1.0 - a - b).collect();
        let rho0 = DensityField::new(0.0, vec![r0, r1, r2]).unwrap();
        let p = PdeParams::nspecies(1.0, crate::rates::RateTable::cyclic_alpha(3.0), m, 1.0)
            .unwrap()
            .with_stable_dt(&rho0);
        let out = solve_nspecies(&rho0, &p, 0.1, &uniform_times(0.1, 4)).unwrap();
        for f in &out {
            assert!(f.simplex_defect() < 1e-10);
            assert!(f.min_value() >= -1e-8);
            for k in 0..3 {
                assert!((f.mass(k) - rho0.mass(k)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_antisymmetric_alpha() {
        assert!(matches!(
            PdeParams::nspecies(1.0, vec![vec![0.0, 1.0], vec![1.0, 0.0]], 16, 1e-4),
            Err(Error::NotAntisymmetric { .. })
        ));
    }
}
