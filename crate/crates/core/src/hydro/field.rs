use std::io::Write;

use crate::error::{Error, Result};
use crate::profile::InitialProfile;

/// Density profile(s) on the uniform grid `x_j = j / M` of the torus.
///
/// Two-species solver fields carry a single row, the particle density;
/// the hole density is its complement. Empirical profiles and n-species
/// fields carry one row per species.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub t: f64,
    values: Vec<Vec<f64>>,
}

impl DensityField {
    pub fn new(t: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        let m = values.first().map_or(0, Vec::len);
        if m == 0 {
            return Err(Error::InvalidParameter("density field needs at least one non-empty row".into()));
        }
        if let Some(bad) = values.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, found: bad.len() });
        }
        Ok(DensityField { t, values })
    }

    /// Samples the particle density of a two-species profile at `j / m`.
    pub fn binary_from_profile(profile: &InitialProfile, m: usize) -> Result<Self> {
        if profile.n_species() != 2 {
            return Err(Error::NotBinary(profile.n_species()));
        }
        let row = (0..m).map(|j| profile.density(1, j as f64 / m as f64)).collect();
        DensityField::new(0.0, vec![row])
    }

    /// Samples every species of a profile at `j / m`.
    pub fn species_from_profile(profile: &InitialProfile, m: usize) -> Result<Self> {
        let rows = (0..profile.n_species())
            .map(|k| (0..m).map(|j| profile.density(k, j as f64 / m as f64)).collect())
            .collect();
        DensityField::new(0.0, rows)
    }

    pub fn grid_size(&self) -> usize {
        self.values[0].len()
    }

    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.values
    }

    /// `integral of rho_k dx` by the periodic trapezoid rule (the grid mean).
    pub fn mass(&self, k: usize) -> f64 {
        let r = &self.values[k];
        r.iter().sum::<f64>() / r.len() as f64
    }

    /// Periodic linear interpolation of row `k` at `x`.
    pub fn interpolate(&self, k: usize, x: f64) -> f64 {
        let r = &self.values[k];
        let m = r.len();
        let s = x.rem_euclid(1.0) * m as f64;
        let j = (s.floor() as usize).min(m - 1);
        let w = s - j as f64;
        let next = if j + 1 == m { 0 } else { j + 1 };
        (1.0 - w) * r[j] + w * r[next]
    }

    /// Largest `|sum_k rho_k - 1|` over the grid.
    pub fn simplex_defect(&self) -> f64 {
        (0..self.grid_size())
            .map(|j| (self.values.iter().map(|r| r[j]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Max-norm distance over all rows.
    pub fn max_abs_diff(&self, other: &DensityField) -> f64 {
        self.values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One CSV row per field: `t`, then the `M` values of each row in turn.
pub fn write_fields_csv<W: Write>(fields: &[DensityField], mut out: W) -> Result<()> {
    let Some(first) = fields.first() else {
        return Ok(());
    };
    write!(out, "t")?;
    for k in 0..first.n_rows() {
        for j in 0..first.grid_size() {
            write!(out, ",rho{k}_{j}")?;
        }
    }
    writeln!(out)?;
    for f in fields {
        write!(out, "{:?}", f.t)?;
        for v in f.values.iter().flatten() {
            write!(out, ",{v:?}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_rows() {
        assert!(DensityField::new(0.0, vec![vec![0.5, 0.5], vec![0.5]]).is_err());
        assert!(DensityField::new(0.0, vec![]).is_err());
    }

    #[test]
    fn interpolation_wraps() {
        let f = DensityField::new(0.0, vec![vec![0.0, 1.0]]).unwrap();
        assert!((f.interpolate(0, 0.75) - 0.5).abs() < 1e-15);
        assert!((f.interpolate(0, -0.25) - 0.5).abs() < 1e-15);
        assert_eq!(f.mass(0), 0.5);
    }

    #[test]
    fn csv_layout() {
        let f = DensityField::new(0.25, vec![vec![0.5, 0.25]]).unwrap();
        let mut buf = Vec::new();
        write_fields_csv(&[f], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,rho0_0,rho0_1\n0.25,0.5,0.25\n");
    }
}
