use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use super::convergence::dynamics_seed;
use super::plan::{ExperimentPlan, ModelSpec};
use super::stats::{loglog_fit, mean, sample_var, std_error, var_std_error, LinearFit};
use super::Verdict;
use crate::engine::{run_observed, RateIndex, SimClock};
use crate::error::{Error, Result};
use crate::lattice::LatticeConfig;
use crate::observables::{MartingaleTracker, TestFn, TestFunctionPair};
use crate::profile::InitialProfile;
use crate::rng::{seeded, stream_seed};

/// Accepted range of the `log Var U` against `log N` slope.
pub const VAR_SLOPE_RANGE: (f64, f64) = (-1.3, -0.7);

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleStudy {
    pub model: ModelSpec,
    pub n_list: Vec<usize>,
    pub ensemble: usize,
    pub profile: InitialProfile,
    pub psi: TestFn,
    pub t: f64,
    pub seed_base: u64,
}

impl MartingaleStudy {
    pub fn from_plan(plan: &ExperimentPlan) -> Self {
        MartingaleStudy {
            model: plan.model.clone(),
            n_list: plan.n_list.clone(),
            ensemble: plan.ensemble,
            profile: plan.profile.clone(),
            psi: plan.psi.clone(),
            t: plan.martingale_t,
            seed_base: plan.seed_base,
        }
    }
}

/// Per-run end values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleRun {
    pub u: f64,
    /// `int_0^T Z^2 R ds`
    pub qv_integral: f64,
    /// `(1/T) int_0^T R ds`
    pub mean_r: f64,
    pub max_abs_l: f64,
    pub events: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleRow {
    pub n_sites: usize,
    pub mean_u: f64,
    pub se_u: f64,
    pub var_u: f64,
    pub var_u_se: f64,
    /// Ensemble mean of `int Z^2 R ds`, the expected value of `U_T^2`.
    pub mean_qv_integral: f64,
    pub mean_r: f64,
    pub max_abs_l: f64,
    pub mean_events: f64,
}

impl MartingaleRow {
    /// `|mean U| <= 3 se`.
    pub fn mean_consistent_with_zero(&self) -> bool {
        self.mean_u.abs() <= 3.0 * self.se_u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingStatus {
    Pass,
    Fail,
    /// `psi` is constant, so `U` vanishes identically and there is nothing to fit.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleScaling {
    pub rows: Vec<MartingaleRow>,
    pub var_fit: Option<LinearFit>,
    pub r_fit: Option<LinearFit>,
    pub status: ScalingStatus,
}

impl MartingaleScaling {
    /// Ratios `max|L|(N_{i+1}) / max|L|(N_i)`.
    pub fn generator_max_ratios(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[1].max_abs_l / w[0].max_abs_l).collect()
    }

    pub fn verdicts(&self) -> Vec<Verdict> {
        let mut v = Vec::new();
        for r in &self.rows {
            v.push(Verdict::new(
                format!("E[U_T] = 0 within 3 SE at N={}", r.n_sites),
                r.mean_consistent_with_zero(),
                format!("mean {:.3e}, se {:.3e}", r.mean_u, r.se_u),
            ));
        }
        match (self.status, &self.var_fit) {
            (ScalingStatus::Degenerate, _) => {
                v.push(Verdict::new("Var[U_T] slope", true, "degenerate: psi is constant, U vanishes".to_string()))
            }
            (status, Some(f)) => v.push(Verdict::new(
                format!("Var[U_T] slope in [{}, {}]", VAR_SLOPE_RANGE.0, VAR_SLOPE_RANGE.1),
                status == ScalingStatus::Pass,
                format!("{:.3} [{:.3}, {:.3}]", f.slope, f.ci_low, f.ci_high),
            )),
            (_, None) => v.push(Verdict::new("Var[U_T] slope", false, "no fit".to_string())),
        }
        v
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "N,mean_U,se_U,var_U,var_U_se,mean_qv_integral,mean_R,max_abs_L,mean_events")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                r.n_sites, r.mean_u, r.se_u, r.var_u, r.var_u_se, r.mean_qv_integral, r.mean_r, r.max_abs_l, r.mean_events
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "N={:<5} mean U={:+.3e} (se {:.3e})  Var U={:.3e}  E[int Z^2 R]={:.3e}  mean R={:.3e}  max|L|={:.3}",
                r.n_sites, r.mean_u, r.se_u, r.var_u, r.mean_qv_integral, r.mean_r, r.max_abs_l
            );
        }
        if let Some(f) = &self.r_fit {
            let _ = writeln!(s, "mean R slope {:.3} [{:.3}, {:.3}]", f.slope, f.ci_low, f.ci_high);
        }
        for v in self.verdicts() {
            let _ = writeln!(s, "{v}");
        }
        s
    }
}

/// Runs the jump chain for one seed and tracks the martingale alongside.
pub fn martingale_run(study: &MartingaleStudy, tf: &TestFunctionPair, n_sites: usize, run: usize) -> Result<MartingaleRun> {
    let table = study.model.rate_table(n_sites)?;
    let seed = stream_seed(study.seed_base, n_sites, run);
    let mut config = LatticeConfig::sample(n_sites, &study.profile, seed)?;
    let mut index = RateIndex::build(&config, &table)?;
    let mut tracker = MartingaleTracker::new(&config, tf, &table, 0.0)?;
    let mut clock = SimClock::default();
    let mut rng = seeded(dynamics_seed(seed));
    run_observed(&mut config, &mut index, &table, &mut clock, &mut rng, study.t, |t, bond| {
        tracker.advance_to(t);
        tracker.exchange(bond);
    });
    tracker.advance_to(study.t);
    let s = tracker.sample();
    Ok(MartingaleRun {
        u: s.u,
        qv_integral: s.qv_integral,
        mean_r: if study.t > 0.0 { s.r_integral / study.t } else { s.qv_rate },
        max_abs_l: tracker.max_abs_generator(),
        events: clock.event_count,
    })
}

/// Estimates `Var[U_T]` and the generator and quadratic-variation bounds at each size and fits
/// their decay in `N`.
pub fn run_martingale_scaling(study: &MartingaleStudy) -> Result<MartingaleScaling> {
    if study.n_list.len() < 3 {
        return Err(Error::TooFewSizes { needed: 3, got: study.n_list.len() });
    }
    if matches!(study.model, ModelSpec::NSpecies { .. }) {
        return Err(Error::NotBinary(study.model.n_species()));
    }
    if study.ensemble < 2 {
        return Err(Error::InvalidParameter("ensemble must be at least 2".into()));
    }
    let tf = TestFunctionPair::from_psi(study.psi.clone())?;
    let mut rows = Vec::new();
    for &n in &study.n_list {
        let runs: Vec<MartingaleRun> =
            (0..study.ensemble).into_par_iter().map(|r| martingale_run(study, &tf, n, r)).collect::<Result<_>>()?;
        let us: Vec<f64> = runs.iter().map(|r| r.u).collect();
        rows.push(MartingaleRow {
            n_sites: n,
            mean_u: mean(&us),
            se_u: std_error(&us),
            var_u: sample_var(&us),
            var_u_se: var_std_error(&us),
            mean_qv_integral: mean(&runs.iter().map(|r| r.qv_integral).collect::<Vec<_>>()),
            mean_r: mean(&runs.iter().map(|r| r.mean_r).collect::<Vec<_>>()),
            max_abs_l: runs.iter().map(|r| r.max_abs_l).fold(0.0, f64::max),
            mean_events: mean(&runs.iter().map(|r| r.events as f64).collect::<Vec<_>>()),
        });
        log::info!("martingale N = {n}: {} runs done", study.ensemble);
    }
    if tf.psi_is_constant() {
        return Ok(MartingaleScaling { rows, var_fit: None, r_fit: None, status: ScalingStatus::Degenerate });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n_sites as f64).collect();
    let var_fit = loglog_fit(&ns, &rows.iter().map(|r| r.var_u).collect::<Vec<_>>()).ok();
    let r_fit = loglog_fit(&ns, &rows.iter().map(|r| r.mean_r).collect::<Vec<_>>()).ok();
    let status = match &var_fit {
        Some(f) if f.slope_within(VAR_SLOPE_RANGE.0, VAR_SLOPE_RANGE.1) => ScalingStatus::Pass,
        _ => ScalingStatus::Fail,
    };
    Ok(MartingaleScaling { rows, var_fit, r_fit, status })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn study(psi: TestFn, n_list: Vec<usize>) -> MartingaleStudy {
        MartingaleStudy {
            model: ModelSpec::Binary { lambda: 1.0, mu: 1.0 },
            n_list,
            ensemble: 8,
            profile: "const:0.5".parse().unwrap(),
            psi,
            t: 0.005,
            seed_base: 2,
        }
    }

    #[test]
    fn needs_three_sizes() {
        let s = study(TestFn::Sin { k: 1, amplitude: 1.0 }, vec![16, 32]);
        assert!(matches!(run_martingale_scaling(&s), Err(Error::TooFewSizes { needed: 3, got: 2 })));
    }

    #[test]
    fn constant_psi_is_degenerate() {
        let s = study(TestFn::Constant(1.5), vec![16, 32, 64]);
        let rep = run_martingale_scaling(&s).unwrap();
        assert_eq!(rep.status, ScalingStatus::Degenerate);
        assert!(rep.rows.iter().all(|r| r.var_u == 0.0 && r.mean_u == 0.0));
    }

    #[test]
    fn runs_are_reproducible_and_mean_zero_consistent() {
        let s = study(TestFn::Sin { k: 1, amplitude: 1.0 }, vec![16, 32, 64]);
        let a = run_martingale_scaling(&s).unwrap();
        assert_eq!(a, run_martingale_scaling(&s).unwrap());
        assert!(a.rows.iter().all(|r| r.var_u > 0.0 && r.mean_r > 0.0 && r.mean_events > 0.0));
    }
}
