//! Pairwise exchange rates `rates[k][l]` for `X^k X^l -> X^l X^k` at a bond.
//!
//! The left member of a bond moves right when the exchange fires, so in the
//! two-species model `rates[1][0]` is the rightward hop rate of a particle.

use std::fmt;

use crate::error::{Error, Result};

/// Parameters a [`RateTable`] was generated from.
#[derive(Debug, Clone, PartialEq)]
pub enum MacroParams {
    /// `rates[1][0] = lambda N^2 + mu N / 2`, `rates[0][1] = lambda N^2 - mu N / 2`.
    Binary { lambda: f64, mu: f64, n_sites: usize },
    /// `rates[k][l] = D N^2 exp(alpha[k][l] / (2N))`.
    Equidiffusive { d: f64, alpha: Vec<Vec<f64>>, n_sites: usize },
    /// Rates given directly, without a scaling family.
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    n_species: usize,
    rates: Vec<f64>,
    params: MacroParams,
}

impl RateTable {
    /// Binary table with the `o(N^2)` and `o(N)` corrections set to zero.
    /// Requires `lambda N >= |mu| / 2`.
    pub fn binary(lambda: f64, mu: f64, n_sites: usize) -> Result<Self> {
        if !(lambda > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need lambda > 0 and finite mu, got lambda = {lambda}, mu = {mu}"
            )));
        }
        let n = n_sites as f64;
        if lambda * n < mu.abs() / 2.0 {
            return Err(Error::InvalidParameter(format!(
                "lambda N = {} is below |mu| / 2 = {}: negative rate",
                lambda * n,
                mu.abs() / 2.0
            )));
        }
        let ab = lambda * n * n + mu * n / 2.0;
        // Exact zero in the totally asymmetric corner, not a rounding residue.
        let ba = if lambda * n == mu / 2.0 { 0.0 } else { (lambda * n * n - mu * n / 2.0).max(0.0) };
        let mut table = RateTable::from_rows(vec![vec![0.0, ba], vec![ab, 0.0]])?;
        table.params = MacroParams::Binary { lambda, mu, n_sites };
        Ok(table)
    }

    /// Binary table on the totally asymmetric edge, `mu = 2 lambda N`, so that
    /// `rates[0][1] = 0`.
    pub fn totally_asymmetric(lambda: f64, n_sites: usize) -> Result<Self> {
        RateTable::binary(lambda, 2.0 * lambda * n_sites as f64, n_sites)
    }

    /// Equidiffusive n-species table `rates[k][l] = D N^2 exp(alpha[k][l] / (2N))`.
    ///
    /// With this form `N log(rates[k][l] / rates[l][k]) = alpha[k][l]` holds at
    /// every `N`, not only in the limit.
    pub fn equidiffusive(d: f64, alpha: Vec<Vec<f64>>, n_sites: usize) -> Result<Self> {
        if !(d > 0.0) {
            return Err(Error::InvalidParameter(format!("need D > 0, got {d}")));
        }
        check_antisymmetric(&alpha)?;
        let n = n_sites as f64;
        let rows = alpha
            .iter()
            .enumerate()
            .map(|(k, row)| {
                row.iter()
                    .enumerate()
                    .map(|(l, a)| if k == l { 0.0 } else { d * n * n * (a / (2.0 * n)).exp() })
                    .collect()
            })
            .collect();
        let mut table = RateTable::from_rows(rows)?;
        table.params = MacroParams::Equidiffusive { d, alpha, n_sites };
        Ok(table)
    }

    /// ABC model with `AB -> BA` at `p_plus`, `BA -> AB` at `p_minus`, and the
    /// same pattern for `BC` (`q`) and `CA` (`r`). A, B, C are labels 0, 1, 2.
    pub fn abc(p_plus: f64, p_minus: f64, q_plus: f64, q_minus: f64, r_plus: f64, r_minus: f64) -> Result<Self> {
        let (a, b, c) = (0, 1, 2);
        let mut rows = vec![vec![0.0; 3]; 3];
        rows[a][b] = p_plus;
        rows[b][a] = p_minus;
        rows[b][c] = q_plus;
        rows[c][b] = q_minus;
        rows[c][a] = r_plus;
        rows[a][c] = r_minus;
        RateTable::from_rows(rows)
    }

    /// Cyclic antisymmetric drift matrix with `alpha[A][B] = alpha[B][C] = alpha[C][A] = a`.
    pub fn cyclic_alpha(a: f64) -> Vec<Vec<f64>> {
        vec![vec![0.0, a, -a], vec![-a, 0.0, a], vec![a, -a, 0.0]]
    }

    /// Table from explicit rows. Diagonal entries are forced to zero.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_species = rows.len();
        if n_species < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 species, got {n_species}")));
        }
        let mut rates = Vec::with_capacity(n_species * n_species);
        for (k, row) in rows.iter().enumerate() {
            if row.len() != n_species {
                return Err(Error::DimensionMismatch { expected: n_species, found: row.len() });
            }
            for (l, &r) in row.iter().enumerate() {
                if !(r >= 0.0) || !r.is_finite() {
                    return Err(Error::InvalidParameter(format!("rate[{k}][{l}] = {r} is not a finite non-negative number")));
                }
                rates.push(if k == l { 0.0 } else { r });
            }
        }
        Ok(RateTable { n_species, rates, params: MacroParams::Raw })
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    #[inline]
    pub fn rate(&self, left: u8, right: u8) -> f64 {
        self.rates[usize::from(left) * self.n_species + usize::from(right)]
    }

    /// Flattened row-major `n x n` matrix.
    pub fn as_slice(&self) -> &[f64] {
        &self.rates
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    pub fn params(&self) -> &MacroParams {
        &self.params
    }

    /// Rightward particle hop rate `lambda_ab(N)` of a binary table.
    pub fn lambda_ab(&self) -> Result<f64> {
        self.require_binary()?;
        Ok(self.rate(1, 0))
    }

    /// Leftward particle hop rate `lambda_ba(N)` of a binary table.
    pub fn lambda_ba(&self) -> Result<f64> {
        self.require_binary()?;
        Ok(self.rate(0, 1))
    }

    pub fn require_binary(&self) -> Result<()> {
        if self.n_species == 2 {
            Ok(())
        } else {
            Err(Error::NotBinary(self.n_species))
        }
    }

    /// `key=value` lines describing the generating parameters.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let mut out = vec![("n".to_string(), self.n_species.to_string())];
        match &self.params {
            MacroParams::Binary { lambda, mu, n_sites } => {
                out.push(("model".into(), "binary".into()));
                out.push(("lambda".into(), lambda.to_string()));
                out.push(("mu".into(), mu.to_string()));
                out.push(("N".into(), n_sites.to_string()));
            }
            MacroParams::Equidiffusive { d, alpha, n_sites } => {
                out.push(("model".into(), "nspecies".into()));
                out.push(("D".into(), d.to_string()));
                out.push(("alpha".into(), format_matrix(alpha)));
                out.push(("alpha_convention".into(), "alpha[k][l] = N log(rate[k][l] / rate[l][k])".into()));
                out.push(("N".into(), n_sites.to_string()));
            }
            MacroParams::Raw => out.push(("model".into(), "raw".into())),
        }
        let rows: Vec<Vec<f64>> = self.rates.chunks(self.n_species).map(|r| r.to_vec()).collect();
        out.push(("rates".into(), format_matrix(&rows)));
        out
    }
}

impl fmt::Display for RateTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.rates.chunks(self.n_species) {
            writeln!(f, "{row:?}")?;
        }
        Ok(())
    }
}

/// Rows separated by `;`, entries by `,`.
pub fn format_matrix(rows: &[Vec<f64>]) -> String {
    rows.iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn parse_matrix(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("matrix entry `{v}`: {e}"))))
                .collect()
        })
        .collect()
}

pub(crate) fn check_antisymmetric(alpha: &[Vec<f64>]) -> Result<()> {
    let n = alpha.len();
    for row in alpha {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: row.len() });
        }
    }
    #[allow(clippy::needless_range_loop)]
    for k in 0..n {
        for l in k..n {
            let defect = alpha[k][l] + alpha[l][k];
            if defect.abs() > 1e-12 {
                return Err(Error::NotAntisymmetric { k, l, defect });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_inverts_scaling() {
        let n = 100;
        let t = RateTable::binary(1.5, 2.0, n).unwrap();
        let (ab, ba) = (t.lambda_ab().unwrap(), t.lambda_ba().unwrap());
        let nf = n as f64;
        assert!(((ab + ba) / 2.0 - 1.5 * nf * nf).abs() < 1e-9);
        assert!((ab - ba - 2.0 * nf).abs() < 1e-9);
        assert_eq!(t.rate(0, 0), 0.0);
        assert_eq!(t.rate(1, 1), 0.0);
    }

    #[test]
    fn binary_rejects_negative_rates() {
        assert!(RateTable::binary(1.0, 30.0, 10).is_err());
        assert!(RateTable::binary(0.0, 0.0, 10).is_err());
        let tasep = RateTable::totally_asymmetric(1.0, 10).unwrap();
        assert_eq!(tasep.lambda_ba().unwrap(), 0.0);
        assert_eq!(tasep.lambda_ab().unwrap(), 200.0);
    }

    #[test]
    fn equidiffusive_log_ratio_is_exact() {
        let alpha = RateTable::cyclic_alpha(1.7);
        for n in [4usize, 37, 1000] {
            let t = RateTable::equidiffusive(0.8, alpha.clone(), n).unwrap();
            let nf = n as f64;
            for k in 0..3u8 {
                for l in 0..3u8 {
                    if k == l {
                        assert_eq!(t.rate(k, l), 0.0);
                        continue;
                    }
                    let lr = nf * (t.rate(k, l) / t.rate(l, k)).ln();
                    assert!((lr - alpha[k as usize][l as usize]).abs() < 1e-9);
                    let sym = (t.rate(k, l) + t.rate(l, k)) / 2.0;
                    let cosh = 0.8 * nf * nf * (alpha[k as usize][l as usize] / (2.0 * nf)).cosh();
                    assert!((sym - cosh).abs() < 1e-9 * cosh);
                }
            }
        }
    }

    #[test]
    fn equidiffusive_requires_antisymmetry() {
        let alpha = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(
            RateTable::equidiffusive(1.0, alpha, 10),
            Err(Error::NotAntisymmetric { .. })
        ));
    }

    #[test]
    fn abc_layout_and_matrix_io() {
        let t = RateTable::abc(1.0, 2.0, 3.0, 4.0, 5.0, 6.0).unwrap();
        assert_eq!(t.rate(0, 1), 1.0);
        assert_eq!(t.rate(1, 0), 2.0);
        assert_eq!(t.rate(1, 2), 3.0);
        assert_eq!(t.rate(2, 1), 4.0);
        assert_eq!(t.rate(2, 0), 5.0);
        assert_eq!(t.rate(0, 2), 6.0);
        let m = RateTable::cyclic_alpha(2.0);
        assert_eq!(parse_matrix(&format_matrix(&m)).unwrap(), m);
        assert!(t.lambda_ab().is_err());
    }
}
