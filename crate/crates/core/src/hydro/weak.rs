use crate::error::{Error, Result};
use crate::hydro::DensityField;
use crate::observables::TestFn;

/// Smooth test function `theta(x, t)`, periodic in `x`.
pub trait SpaceTimeTest {
    fn value(&self, x: f64, t: f64) -> f64;
    fn d_t(&self, x: f64, t: f64) -> f64;
    fn d_x(&self, x: f64, t: f64) -> f64;
    fn d_xx(&self, x: f64, t: f64) -> f64;
}

/// Polynomial time factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeFactor {
    One,
    /// `(t (T - t))^power`, vanishing at both ends of `[0, T]`.
    Bump { t_end: f64, power: u32 },
}

impl TimeFactor {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeFactor::One => 1.0,
            TimeFactor::Bump { t_end, power } => (t * (t_end - t)).powi(power as i32),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            TimeFactor::One => 0.0,
            TimeFactor::Bump { power: 0, .. } => 0.0,
            TimeFactor::Bump { t_end, power } => {
                let p = power as i32;
                f64::from(p) * (t * (t_end - t)).powi(p - 1) * (t_end - 2.0 * t)
            }
        }
    }
}

/// `theta(x, t) = space(x) time(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableTest {
    pub space: TestFn,
    pub time: TimeFactor,
}

impl SpaceTimeTest for SeparableTest {
    fn value(&self, x: f64, t: f64) -> f64 {
        self.space.value(x) * self.time.value(t)
    }
    fn d_t(&self, x: f64, t: f64) -> f64 {
        self.space.value(x) * self.time.derivative(t)
    }
    fn d_x(&self, x: f64, t: f64) -> f64 {
        self.space.d1(x) * self.time.value(t)
    }
    fn d_xx(&self, x: f64, t: f64) -> f64 {
        self.space.d2(x) * self.time.value(t)
    }
}

/// Particle density row: the only row of a solver field, row 1 of a
/// two-species empirical field.
fn particle_row(f: &DensityField) -> Result<&[f64]> {
    match f.n_rows() {
        1 => Ok(f.row(0)),
        2 => Ok(f.row(1)),
        n => Err(Error::NotBinary(n)),
    }
}

/// Signed defect of the weak form
///
/// ```text
/// int_0^T int [ rho (theta_t + lambda theta_xx) + mu rho (1 - rho) theta_x ] dx dt
///   - int [ rho(T) theta(T) - rho(0) theta(0) ] dx
/// ```
///
/// over the span of `traj`: trapezoid rule in time over the stored slices,
/// periodic trapezoid rule in space.
pub fn weak_residual(traj: &[DensityField], theta: &impl SpaceTimeTest, lambda: f64, mu: f64) -> Result<f64> {
    if traj.len() < 2 {
        return Err(Error::TooFewSlices(traj.len()));
    }
    let m = traj[0].grid_size();
    if let Some(bad) = traj.iter().find(|f| f.grid_size() != m) {
        return Err(Error::DimensionMismatch { expected: m, found: bad.grid_size() });
    }
    if traj.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::InvalidParameter("trajectory times must increase strictly".into()));
    }
    let space_mean = |f: &DensityField, g: &dyn Fn(f64, f64) -> f64| -> Result<f64> {
        let r = particle_row(f)?;
        Ok(r.iter().enumerate().map(|(j, &rho)| g(j as f64 / m as f64, rho)).sum::<f64>() / m as f64)
    };
    let bulk = |f: &DensityField| {
        let t = f.t;
        space_mean(f, &|x, rho| {
            rho * (theta.d_t(x, t) + lambda * theta.d_xx(x, t)) + mu * rho * (1.0 - rho) * theta.d_x(x, t)
        })
    };
    let mut integral = 0.0;
    let mut prev = bulk(&traj[0])?;
    for w in traj.windows(2) {
        let cur = bulk(&w[1])?;
        integral += 0.5 * (w[1].t - w[0].t) * (prev + cur);
        prev = cur;
    }
    let first = &traj[0];
    let last = &traj[traj.len() - 1];
    let boundary = space_mean(last, &|x, rho| rho * theta.value(x, last.t))?
        - space_mean(first, &|x, rho| rho * theta.value(x, first.t))?;
    Ok(integral - boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydro::{solve_burgers, uniform_times, PdeParams};
    use std::f64::consts::TAU;

    fn sin_bump(t_end: f64) -> SeparableTest {
        SeparableTest { space: TestFn::Sin { k: 1, amplitude: 1.0 }, time: TimeFactor::Bump { t_end, power: 1 } }
    }

    #[test]
    fn time_factor_derivative() {
        let f = TimeFactor::Bump { t_end: 0.3, power: 3 };
        let h = 1e-6;
        for t in [0.05, 0.1, 0.22] {
            let fd = (f.value(t + h) - f.value(t - h)) / (2.0 * h);
            assert!((fd - f.derivative(t)).abs() < 1e-9);
        }
    }

    #[test]
    fn trivial_residuals_vanish() {
        let traj: Vec<DensityField> =
            uniform_times(0.1, 10).into_iter().map(|t| DensityField::new(t, vec![vec![0.37; 64]]).unwrap()).collect();
        let zero = SeparableTest { space: TestFn::Constant(0.0), time: TimeFactor::One };
        assert_eq!(weak_residual(&traj, &zero, 1.0, 1.0).unwrap(), 0.0);
        for theta in [
            sin_bump(0.1),
            SeparableTest { space: TestFn::Cos { k: 2, amplitude: 1.0 }, time: TimeFactor::One },
            SeparableTest { space: TestFn::Bump { center: 0.3, kappa: 2.0 }, time: TimeFactor::Bump { t_end: 0.1, power: 2 } },
        ] {
            assert!(weak_residual(&traj, &theta, 1.0, 1.0).unwrap().abs() < 1e-10);
        }
        assert!(matches!(weak_residual(&traj[..1], &zero, 1.0, 1.0), Err(Error::TooFewSlices(1))));
    }

    #[test]
    fn solver_output_satisfies_its_weak_form() {
        let t_end = 0.1;
        let m = 128;
        let rho0 =
            DensityField::new(0.0, vec![(0..m).map(|j| 0.5 + 0.25 * (TAU * j as f64 / m as f64).sin()).collect()]).unwrap();
        let p = PdeParams::burgers(1.0, 1.0, m, 1.0).unwrap().with_stable_dt(&rho0);
        let traj = solve_burgers(&rho0, &p, t_end, &uniform_times(t_end, 40)).unwrap();
        let r = weak_residual(&traj, &sin_bump(t_end), 1.0, 1.0).unwrap();
        assert!(r.abs() < 1e-3, "residual {r}");
        // The opposite drift sign is visibly inconsistent with the same data.
        // sin(4 pi x) is the mode that rho (1 - rho) excites.
        let probe = SeparableTest { space: TestFn::Sin { k: 2, amplitude: 1.0 }, time: TimeFactor::One };
        let wrong = weak_residual(&traj, &probe, 1.0, -1.0).unwrap();
        let right = weak_residual(&traj, &probe, 1.0, 1.0).unwrap();
        assert!(wrong.abs() > 100.0 * right.abs(), "wrong {wrong}, right {right}");
    }
}
