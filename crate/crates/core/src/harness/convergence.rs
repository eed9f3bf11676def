use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use super::plan::ExperimentPlan;
use super::stats::{decreasing_with_one_inversion, jackknife_se, loglog_fit, mean, sample_var, LinearFit};
use super::Verdict;
use crate::engine::Uniformized;
use crate::error::Result;
use crate::hydro::{solve, DensityField};
use crate::lattice::LatticeConfig;
use crate::observables::density_profile;
use crate::rng::{mix64, seeded, stream_seed};

/// Seed of the dynamics of run `r`; the initial configuration uses the run
/// seed itself.
pub fn dynamics_seed(run_seed: u64) -> u64 {
    mix64(run_seed ^ 0xD1B5_4A32_D192_ED03)
}

/// Distances at one `(N, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n_sites: usize,
    pub t: f64,
    /// L1 distance between the ensemble-mean profile and the reference.
    pub l1: f64,
    pub l2: f64,
    /// Jackknife standard error of `l1`.
    pub l1_se: f64,
    /// Mean and standard deviation of the per-run L1 distances.
    pub run_l1_mean: f64,
    pub run_l1_std: f64,
    /// Every run started with all bond rates zero.
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Fit of `log l1` against `log N` per compare time; `None` when the data
    /// is degenerate (frozen, zero errors, or a single size).
    pub fits: Vec<(f64, Option<LinearFit>)>,
    pub verdicts: Vec<Verdict>,
}

impl ConvergenceReport {
    pub fn rows_at(&self, t: f64) -> impl Iterator<Item = &ConvergenceRow> {
        self.rows.iter().filter(move |r| r.t == t)
    }

    pub fn degenerate(&self) -> bool {
        self.rows.iter().all(|r| r.frozen)
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "N,t,l1,l2,l1_se,run_l1_mean,run_l1_std,frozen")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{}",
                r.n_sites, r.t, r.l1, r.l2, r.l1_se, r.run_l1_mean, r.run_l1_std, r.frozen
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "N={:<6} t={:<6} L1={:.5} (se {:.5})  L2={:.5}  per-run L1={:.5} +- {:.5}{}",
                r.n_sites,
                r.t,
                r.l1,
                r.l1_se,
                r.l2,
                r.run_l1_mean,
                r.run_l1_std,
                if r.frozen { "  [frozen]" } else { "" }
            );
        }
        for (t, fit) in &self.fits {
            match fit {
                Some(f) => {
                    let _ = writeln!(s, "t={t}: slope of log L1 vs log N = {:.3} [{:.3}, {:.3}]", f.slope, f.ci_low, f.ci_high);
                }
                None => {
                    let _ = writeln!(s, "t={t}: no fit (degenerate)");
                }
            }
        }
        for v in &self.verdicts {
            let _ = writeln!(s, "{v}");
        }
        s
    }
}

/// Mean over species rows of `(1/M) sum_j |a_j - b_j|`; for two species this
/// is the particle-density L1 distance.
pub fn l1_distance(a: &DensityField, b: &DensityField) -> f64 {
    let rows = a.n_rows() as f64;
    a.rows().iter().zip(b.rows()).map(|(x, y)| mean_abs(x, y)).sum::<f64>() / rows
}

/// Same averaging as [`l1_distance`] for the root-mean-square difference.
pub fn l2_distance(a: &DensityField, b: &DensityField) -> f64 {
    let rows = a.n_rows() as f64;
    a.rows()
        .iter()
        .zip(b.rows())
        .map(|(x, y)| (x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / x.len() as f64).sqrt())
        .sum::<f64>()
        / rows
}

fn mean_abs(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>() / x.len() as f64
}

/// Block average of a reference field over the bins of an `N`-site ring,
/// reading the reference at the site positions `i / N`. A one-row field is
/// the particle density and gains the hole row.
pub fn bin_reference(reference: &DensityField, n_sites: usize, bins: usize) -> Result<DensityField> {
    let width = n_sites / bins;
    let binned = |k: usize| -> Vec<f64> {
        (0..bins)
            .map(|j| {
                (j * width..(j + 1) * width).map(|i| reference.interpolate(k, i as f64 / n_sites as f64)).sum::<f64>()
                    / width as f64
            })
            .collect()
    };
    let rows = if reference.n_rows() == 1 {
        let p = binned(0);
        vec![p.iter().map(|v| 1.0 - v).collect(), p]
    } else {
        (0..reference.n_rows()).map(binned).collect()
    };
    DensityField::new(reference.t, rows)
}

/// Binned profiles of one run at each compare time.
fn one_run(plan: &ExperimentPlan, driver: &Uniformized, n_sites: usize, run: usize) -> Result<(bool, Vec<DensityField>)> {
    let seed = stream_seed(plan.seed_base, n_sites, run);
    let mut config = LatticeConfig::sample(n_sites, &plan.profile, seed)?;
    let mut rng = seeded(dynamics_seed(seed));
    let rec = driver.run_snapshots(&mut config, &mut rng, 0.0, &plan.compare_times)?;
    let mut fields = Vec::with_capacity(rec.snapshots.len());
    for s in &rec.snapshots {
        let c = LatticeConfig::exact(plan.model.n_species(), s.occupancy.clone())?;
        let mut f = density_profile(&c, plan.bins)?;
        f.t = s.time;
        fields.push(f);
    }
    Ok((rec.frozen, fields))
}

/// Ensemble study of the empirical density against the limiting equation.
///
/// Runs are independent and execute in parallel; aggregation is serial in
/// run order, so the report depends only on the plan.
pub fn run_convergence(plan: &ExperimentPlan) -> Result<ConvergenceReport> {
    plan.validate()?;
    let rho0 = plan.model.initial_field(&plan.profile, plan.pde_grid)?;
    let params = plan.model.pde_params(plan.pde_grid, &rho0)?;
    let t_end = *plan.compare_times.last().expect("validated non-empty");
    let reference = solve(&rho0, &params, t_end, &plan.compare_times)?;

    let mut rows = Vec::new();
    for &n in &plan.n_list {
        let table = plan.model.rate_table(n)?;
        let driver = Uniformized::new(&table);
        let runs: Vec<(bool, Vec<DensityField>)> =
            (0..plan.ensemble).into_par_iter().map(|r| one_run(plan, &driver, n, r)).collect::<Result<_>>()?;
        let frozen = runs.iter().all(|(f, _)| *f);
        for (ti, &t) in plan.compare_times.iter().enumerate() {
            let target = bin_reference(&reference[ti], n, plan.bins)?;
            let profiles: Vec<&DensityField> = runs.iter().map(|(_, f)| &f[ti]).collect();
            rows.push(aggregate(n, t, &profiles, &target, frozen)?);
        }
        log::info!("N = {n}: {} runs done", plan.ensemble);
    }

    let mut fits = Vec::new();
    let mut verdicts = Vec::new();
    for &t in &plan.compare_times {
        let at: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.t == t).collect();
        let usable = at.iter().all(|r| !r.frozen && r.l1 > 0.0) && at.len() >= 2;
        let ns: Vec<f64> = at.iter().map(|r| r.n_sites as f64).collect();
        let errs: Vec<f64> = at.iter().map(|r| r.l1).collect();
        let ses: Vec<f64> = at.iter().map(|r| r.l1_se).collect();
        fits.push((t, if usable { loglog_fit(&ns, &errs).ok() } else { None }));
        if usable && t > 0.0 {
            verdicts.push(Verdict::new(
                format!("L1 error decreasing in N at t={t}"),
                decreasing_with_one_inversion(&errs, &ses),
                format!("{errs:.5?}"),
            ));
        }
    }
    if let Some(th) = plan.l1_threshold {
        let t = *plan.compare_times.last().expect("validated non-empty");
        let last = rows.iter().rev().find(|r| r.t == t).expect("one row per (N, t)");
        verdicts.push(Verdict::new(
            format!("L1 error below {th} at N={} t={t}", last.n_sites),
            last.l1 < th,
            format!("{:.5}", last.l1),
        ));
    }
    Ok(ConvergenceReport { rows, fits, verdicts })
}

fn aggregate(
    n_sites: usize,
    t: f64,
    profiles: &[&DensityField],
    target: &DensityField,
    frozen: bool,
) -> Result<ConvergenceRow> {
    let e = profiles.len();
    let shape: Vec<usize> = target.rows().iter().map(Vec::len).collect();
    let mut sum: Vec<Vec<f64>> = shape.iter().map(|&m| vec![0.0; m]).collect();
    for p in profiles {
        for (s, r) in sum.iter_mut().zip(p.rows()) {
            for (a, b) in s.iter_mut().zip(r) {
                *a += b;
            }
        }
    }
    let scaled = |f: &dyn Fn(usize, usize, f64) -> f64, div: f64| -> Result<DensityField> {
        let rows = sum
            .iter()
            .enumerate()
            .map(|(k, r)| r.iter().enumerate().map(|(j, v)| f(k, j, *v) / div).collect())
            .collect();
        DensityField::new(t, rows)
    };
    let mean_profile = scaled(&|_, _, v| v, e as f64)?;
    let l1 = l1_distance(&mean_profile, target);
    let l2 = l2_distance(&mean_profile, target);
    let loo: Vec<f64> = profiles
        .iter()
        .map(|p| {
            let without = scaled(&|k, j, v| v - p.row(k)[j], (e - 1) as f64)?;
            Ok(l1_distance(&without, target))
        })
        .collect::<Result<_>>()?;
    let per_run: Vec<f64> = profiles.iter().map(|p| l1_distance(p, target)).collect();
    Ok(ConvergenceRow {
        n_sites,
        t,
        l1,
        l2,
        l1_se: jackknife_se(&loo),
        run_l1_mean: mean(&per_run),
        run_l1_std: sample_var(&per_run).sqrt(),
        frozen,
    })
}
