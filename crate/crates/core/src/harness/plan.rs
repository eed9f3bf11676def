use std::path::Path;

use crate::error::{Error, Result};
use crate::hydro::{DensityField, PdeParams};
use crate::meta::KvMap;
use crate::observables::TestFn;
use crate::profile::InitialProfile;
use crate::rates::{format_matrix, parse_matrix, RateTable};

/// Microscopic model family, instantiated at each system size.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Binary { lambda: f64, mu: f64 },
    /// `mu = 2 lambda N`, so that holes never pass particles.
    TotallyAsymmetric { lambda: f64 },
    NSpecies { d: f64, alpha: Vec<Vec<f64>> },
}

impl ModelSpec {
    pub fn n_species(&self) -> usize {
        match self {
            ModelSpec::NSpecies { alpha, .. } => alpha.len(),
            _ => 2,
        }
    }

    pub fn rate_table(&self, n_sites: usize) -> Result<RateTable> {
        match self {
            ModelSpec::Binary { lambda, mu } => RateTable::binary(*lambda, *mu, n_sites),
            ModelSpec::TotallyAsymmetric { lambda } => RateTable::totally_asymmetric(*lambda, n_sites),
            ModelSpec::NSpecies { d, alpha } => RateTable::equidiffusive(*d, alpha.clone(), n_sites),
        }
    }

    /// Limiting equation on a grid of `m` points, at the stable step for `rho0`.
    pub fn pde_params(&self, m: usize, rho0: &DensityField) -> Result<PdeParams> {
        let p = match self {
            ModelSpec::Binary { lambda, mu } => PdeParams::burgers(*lambda, *mu, m, 1.0)?,
            ModelSpec::TotallyAsymmetric { .. } => {
                return Err(Error::InvalidParameter(
                    "the totally asymmetric family has no N-independent limit equation".into(),
                ))
            }
            ModelSpec::NSpecies { d, alpha } => PdeParams::nspecies(*d, alpha.clone(), m, 1.0)?,
        };
        Ok(p.with_stable_dt(rho0))
    }

    /// Initial field for the limiting equation: the particle density for
    /// two species, every species otherwise.
    pub fn initial_field(&self, profile: &InitialProfile, m: usize) -> Result<DensityField> {
        match self {
            ModelSpec::NSpecies { .. } => DensityField::species_from_profile(profile, m),
            _ => DensityField::binary_from_profile(profile, m),
        }
    }

    fn from_kv(kv: &KvMap) -> Result<Self> {
        match kv.require("model")? {
            "binary" => Ok(ModelSpec::Binary { lambda: kv.value("lambda")?, mu: kv.value("mu")? }),
            "tasep" => Ok(ModelSpec::TotallyAsymmetric { lambda: kv.value("lambda")? }),
            "nspecies" => {
                let d = kv.value("d")?;
                let alpha = match kv.get("alpha") {
                    Some(raw) => parse_matrix(raw)?,
                    None => RateTable::cyclic_alpha(kv.value("alpha_cyclic").map_err(|e| match e {
                        Error::MissingKey(_) => Error::MissingKey("alpha".into()),
                        other => other,
                    })?),
                };
                Ok(ModelSpec::NSpecies { d, alpha })
            }
            other => Err(Error::Parse(format!("unknown model `{other}` (binary, tasep, nspecies)"))),
        }
    }

    fn to_kv(&self, kv: &mut KvMap) {
        match self {
            ModelSpec::Binary { lambda, mu } => {
                kv.insert("model", "binary");
                kv.insert("lambda", lambda);
                kv.insert("mu", mu);
            }
            ModelSpec::TotallyAsymmetric { lambda } => {
                kv.insert("model", "tasep");
                kv.insert("lambda", lambda);
            }
            ModelSpec::NSpecies { d, alpha } => {
                kv.insert("model", "nspecies");
                kv.insert("d", d);
                kv.insert("alpha", format_matrix(alpha));
            }
        }
    }
}

/// Everything needed to reproduce an ensemble study.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub model: ModelSpec,
    pub n_list: Vec<usize>,
    pub ensemble: usize,
    pub profile: InitialProfile,
    pub compare_times: Vec<f64>,
    /// Comparison grid `M`; must divide every `N`.
    pub bins: usize,
    pub seed_base: u64,
    /// Grid of the reference solver.
    pub pde_grid: usize,
    /// Optional pass threshold on the ensemble-mean L1 error at the largest `N`.
    pub l1_threshold: Option<f64>,
    /// Test function `psi = phi_a - phi_b` for the martingale diagnostics.
    pub psi: TestFn,
    pub martingale_t: f64,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::InvalidParameter("n_list is empty".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("n_list must be strictly increasing".into()));
        }
        if self.ensemble < 2 {
            return Err(Error::InvalidParameter(format!("ensemble must be at least 2, got {}", self.ensemble)));
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| self.bins == 0 || n % self.bins != 0) {
            return Err(Error::BinsDoNotDivide {
                bins: self.bins,
                n_sites: n,
                suggestion: crate::observables::nearest_divisor(n, self.bins),
            });
        }
        if self.profile.n_species() != self.model.n_species() {
            return Err(Error::DimensionMismatch { expected: self.model.n_species(), found: self.profile.n_species() });
        }
        if self.compare_times.iter().any(|t| !(*t >= 0.0)) || self.compare_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("compare_times must be non-negative and increasing".into()));
        }
        if self.compare_times.is_empty() {
            return Err(Error::InvalidParameter("compare_times is empty".into()));
        }
        if self.pde_grid < 3 {
            return Err(Error::InvalidParameter("pde_grid must be at least 3".into()));
        }
        if !(self.martingale_t >= 0.0) {
            return Err(Error::InvalidParameter("martingale_t must be non-negative".into()));
        }
        for &n in &self.n_list {
            self.model.rate_table(n)?;
        }
        Ok(())
    }

    /// Reads a plan. Required keys: `model` and its parameters (`lambda`,
    /// `mu`; or `d` and `alpha`), `n_list`, `ensemble`, `profile`,
    /// `compare_times`, `bins`, `seed_base`. Optional: `pde_grid`,
    /// `l1_threshold`, `test_function`, `martingale_t`.
    pub fn from_kv(kv: &KvMap) -> Result<Self> {
        let model = ModelSpec::from_kv(kv)?;
        let bins: usize = kv.value("bins")?;
        let plan = ExperimentPlan {
            model,
            n_list: kv.list("n_list")?,
            ensemble: kv.value("ensemble")?,
            profile: kv.value("profile")?,
            compare_times: kv.list("compare_times")?,
            bins,
            seed_base: kv.value("seed_base")?,
            pde_grid: kv.value_or("pde_grid", bins.max(256))?,
            l1_threshold: kv.get("l1_threshold").map(|_| kv.value("l1_threshold")).transpose()?,
            psi: kv.value_or("test_function", TestFn::Sin { k: 1, amplitude: 1.0 })?,
            martingale_t: kv.value_or("martingale_t", 0.02)?,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        ExperimentPlan::from_kv(&KvMap::read(path)?)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        self.model.to_kv(&mut kv);
        let join = |v: Vec<String>| v.join(",");
        kv.insert("n_list", join(self.n_list.iter().map(|n| n.to_string()).collect()));
        kv.insert("ensemble", self.ensemble);
        kv.insert("profile", self.profile.describe());
        kv.insert("compare_times", join(self.compare_times.iter().map(|t| format!("{t:?}")).collect()));
        kv.insert("bins", self.bins);
        kv.insert("seed_base", self.seed_base);
        kv.insert("pde_grid", self.pde_grid);
        if let Some(th) = self.l1_threshold {
            kv.insert("l1_threshold", th);
        }
        kv.insert("test_function", &self.psi);
        kv.insert("martingale_t", format!("{:?}", self.martingale_t));
        kv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLAN: &str = "model=binary\nlambda=1\nmu=1\nn_list=64,128\nensemble=10\nprofile=sin:0.25,1,0.5\ncompare_times=0.05,0.1\nbins=16\nseed_base=3\n";

    #[test]
    fn parses_and_round_trips() {
        let plan = ExperimentPlan::from_kv(&KvMap::parse(PLAN).unwrap()).unwrap();
        assert_eq!(plan.n_list, vec![64, 128]);
        assert_eq!(plan.pde_grid, 256);
        let again = ExperimentPlan::from_kv(&plan.to_kv()).unwrap();
        assert_eq!(plan, again);
    }

    #[test]
    fn names_the_missing_key() {
        let text = PLAN.replace("ensemble=10\n", "");
        match ExperimentPlan::from_kv(&KvMap::parse(&text).unwrap()) {
            Err(Error::MissingKey(k)) => assert_eq!(k, "ensemble"),
            other => panic!("expected MissingKey, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bins_that_do_not_divide() {
        let text = PLAN.replace("bins=16", "bins=24");
        assert!(matches!(
            ExperimentPlan::from_kv(&KvMap::parse(&text).unwrap()),
            Err(Error::BinsDoNotDivide { suggestion: 16, .. })
        ));
    }

    #[test]
    fn reads_nspecies_models() {
        let text = "model=nspecies\nd=1\nalpha_cyclic=2\nn_list=60\nensemble=2\nprofile=const:0.2;const:0.3;rest\ncompare_times=0.01\nbins=12\nseed_base=1\n";
        let plan = ExperimentPlan::from_kv(&KvMap::parse(text).unwrap()).unwrap();
        assert_eq!(plan.model, ModelSpec::NSpecies { d: 1.0, alpha: RateTable::cyclic_alpha(2.0) });
        assert_eq!(ExperimentPlan::from_kv(&plan.to_kv()).unwrap(), plan);
    }
}
