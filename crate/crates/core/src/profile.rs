//! Macroscopic initial density profiles on the continuous torus `[0, 1)`.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;
const VALIDATION_GRID: usize = 4096;

/// A single density function `x -> rho(x)` on `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Const(f64),
    /// `mean + amplitude * sin(2 pi k x)`
    Sin { amplitude: f64, k: u32, mean: f64 },
    /// `mean + amplitude * cos(2 pi k x)`
    Cos { amplitude: f64, k: u32, mean: f64 },
    /// Uniform samples at `j / len`, linearly interpolated with periodic wrap.
    Table(Vec<f64>),
    /// One minus the sum of all other species. Only meaningful inside an
    /// [`InitialProfile`].
    Remainder,
}

impl Profile {
    /// Evaluates the profile. `Remainder` evaluates to NaN on its own.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Const(c) => *c,
            Profile::Sin { amplitude, k, mean } => mean + amplitude * (TAU * f64::from(*k) * x).sin(),
            Profile::Cos { amplitude, k, mean } => mean + amplitude * (TAU * f64::from(*k) * x).cos(),
            Profile::Table(samples) => periodic_lerp(samples, x),
            Profile::Remainder => f64::NAN,
        }
    }

    /// Reads a `Table` profile from a file of whitespace- or comma-separated numbers.
    pub fn from_file(path: &Path) -> Result<Profile> {
        let text = std::fs::read_to_string(path)?;
        let samples = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{}: `{s}`: {e}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        if samples.is_empty() {
            return Err(Error::InvalidProfile(format!("{} holds no samples", path.display())));
        }
        Ok(Profile::Table(samples))
    }
}

fn periodic_lerp(samples: &[f64], x: f64) -> f64 {
    let m = samples.len();
    let s = x.rem_euclid(1.0) * m as f64;
    let j = (s.floor() as usize).min(m - 1);
    let w = s - j as f64;
    let next = if j + 1 == m { 0 } else { j + 1 };
    (1.0 - w) * samples[j] + w * samples[next]
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Const(c) => write!(f, "const:{c}"),
            Profile::Sin { amplitude, k, mean } => write!(f, "sin:{amplitude},{k},{mean}"),
            Profile::Cos { amplitude, k, mean } => write!(f, "cos:{amplitude},{k},{mean}"),
            Profile::Table(s) => write!(f, "table:{}", s.len()),
            Profile::Remainder => write!(f, "rest"),
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    /// Accepts `const:c`, `sin:amplitude,k,mean`, `cos:amplitude,k,mean`,
    /// `file:path` and `rest`.
    fn from_str(s: &str) -> Result<Profile> {
        let s = s.trim();
        if s == "rest" {
            return Ok(Profile::Remainder);
        }
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("profile `{s}` lacks a `kind:` prefix")))?;
        let nums = || -> Result<Vec<f64>> {
            args.split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("profile `{s}`: {e}")))
                })
                .collect()
        };
        match kind {
            "const" => match nums()?.as_slice() {
                [c] => Ok(Profile::Const(*c)),
                _ => Err(Error::Parse(format!("`{s}`: const takes one value"))),
            },
            "sin" | "cos" => match nums()?.as_slice() {
                &[amplitude, k, mean] => {
                    if k < 0.0 || k.fract() != 0.0 {
                        return Err(Error::Parse(format!("`{s}`: wavenumber must be a non-negative integer")));
                    }
                    let k = k as u32;
                    Ok(if kind == "sin" {
                        Profile::Sin { amplitude, k, mean }
                    } else {
                        Profile::Cos { amplitude, k, mean }
                    })
                }
                _ => Err(Error::Parse(format!("`{s}`: expected amplitude,k,mean"))),
            },
            "file" => Profile::from_file(Path::new(args.trim())),
            other => Err(Error::Parse(format!("unknown profile kind `{other}`"))),
        }
    }
}

/// Per-species initial densities, one function per species, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialProfile {
    species: Vec<Profile>,
}

impl InitialProfile {
    pub fn new(species: Vec<Profile>) -> Result<Self> {
        if species.len() < 2 {
            return Err(Error::InvalidProfile(format!(
                "need at least two species, got {}",
                species.len()
            )));
        }
        let remainders = species.iter().filter(|p| **p == Profile::Remainder).count();
        if remainders > 1 {
            return Err(Error::InvalidProfile("at most one species may be `rest`".into()));
        }
        let profile = InitialProfile { species };
        let grid: Vec<f64> = (0..VALIDATION_GRID)
            .map(|j| j as f64 / VALIDATION_GRID as f64)
            .collect();
        profile.validate_at(&grid)?;
        Ok(profile)
    }

    /// Two-species profile from the particle density; holes take the complement.
    pub fn binary(rho: Profile) -> Result<Self> {
        InitialProfile::new(vec![Profile::Remainder, rho])
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self) -> &[Profile] {
        &self.species
    }

    pub fn density(&self, k: usize, x: f64) -> f64 {
        match &self.species[k] {
            Profile::Remainder => {
                let others: f64 = self
                    .species
                    .iter()
                    .enumerate()
                    .filter(|(l, _)| *l != k)
                    .map(|(_, p)| p.eval(x))
                    .sum();
                1.0 - others
            }
            p => p.eval(x),
        }
    }

    /// All species densities at `x`.
    pub fn densities(&self, x: f64) -> Vec<f64> {
        (0..self.n_species()).map(|k| self.density(k, x)).collect()
    }

    /// Checks the simplex constraint at every point of `xs`.
    pub fn validate_at(&self, xs: &[f64]) -> Result<()> {
        for &x in xs {
            let d = self.densities(x);
            for (k, &v) in d.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidProfile(format!(
                        "species {k} has density {v} at x = {x}"
                    )));
                }
            }
            let sum: f64 = d.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::InvalidProfile(format!(
                    "densities sum to {sum} at x = {x}"
                )));
            }
        }
        Ok(())
    }

    /// Canonical text form, one profile per species separated by `;`.
    pub fn describe(&self) -> String {
        self.species
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl FromStr for InitialProfile {
    type Err = Error;

    /// A single profile is read as the two-species particle density; a
    /// `;`-separated list gives one profile per species.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(';').filter(|p| !p.trim().is_empty()).collect();
        match parts.as_slice() {
            [single] => InitialProfile::binary(single.parse()?),
            many => InitialProfile::new(many.iter().map(|p| p.parse()).collect::<Result<_>>()?),
        }
    }
}
