//! Smooth periodic test functions with analytic derivatives.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

const PERIODICITY_TOLERANCE: f64 = 1e-10;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Catalog of `C^2` periodic functions on `[0, 1]`, plus user closures.
#[derive(Clone)]
pub enum TestFn {
    Constant(f64),
    /// `amplitude * sin(2 pi k x)`
    Sin { k: u32, amplitude: f64 },
    /// `amplitude * cos(2 pi k x)`
    Cos { k: u32, amplitude: f64 },
    /// `exp(kappa (cos(2 pi (x - center)) - 1))`, a periodic bump of height 1.
    Bump { center: f64, kappa: f64 },
    Spline(PeriodicSpline),
    /// Function with its first and second derivatives.
    Closure { f: RealFn, d1: RealFn, d2: RealFn },
}

impl TestFn {
    pub fn closure(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TestFn::Closure { f: Arc::new(f), d1: Arc::new(d1), d2: Arc::new(d2) }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            TestFn::Constant(c) => *c,
            TestFn::Sin { k, amplitude } => amplitude * (TAU * f64::from(*k) * x).sin(),
            TestFn::Cos { k, amplitude } => amplitude * (TAU * f64::from(*k) * x).cos(),
            TestFn::Bump { center, kappa } => (kappa * ((TAU * (x - center)).cos() - 1.0)).exp(),
            TestFn::Spline(s) => s.value(x),
            TestFn::Closure { f, .. } => f(x),
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match self {
            TestFn::Constant(_) => 0.0,
            TestFn::Sin { k, amplitude } => {
                let w = TAU * f64::from(*k);
                amplitude * w * (w * x).cos()
            }
            TestFn::Cos { k, amplitude } => {
                let w = TAU * f64::from(*k);
                -amplitude * w * (w * x).sin()
            }
            TestFn::Bump { center, kappa } => {
                let th = TAU * (x - center);
                -self.value(x) * kappa * TAU * th.sin()
            }
            TestFn::Spline(s) => s.d1(x),
            TestFn::Closure { d1, .. } => d1(x),
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match self {
            TestFn::Constant(_) => 0.0,
            TestFn::Sin { k, .. } | TestFn::Cos { k, .. } => {
                let w = TAU * f64::from(*k);
                -w * w * self.value(x)
            }
            TestFn::Bump { center, kappa } => {
                let th = TAU * (x - center);
                let g = kappa * TAU * th.sin();
                self.value(x) * (g * g - kappa * TAU * TAU * th.cos())
            }
            TestFn::Spline(s) => s.d2(x),
            TestFn::Closure { d2, .. } => d2(x),
        }
    }
}

impl fmt::Display for TestFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFn::Constant(c) => write!(f, "const:{c}"),
            TestFn::Sin { k, amplitude } => write!(f, "sin:{k},{amplitude}"),
            TestFn::Cos { k, amplitude } => write!(f, "cos:{k},{amplitude}"),
            TestFn::Bump { center, kappa } => write!(f, "bump:{center},{kappa}"),
            TestFn::Spline(s) => write!(f, "spline:{}", s.samples.len()),
            TestFn::Closure { .. } => write!(f, "closure"),
        }
    }
}

impl fmt::Debug for TestFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFn({self})")
    }
}

/// Closures compare by identity.
impl PartialEq for TestFn {
    fn eq(&self, other: &Self) -> bool {
        use TestFn::*;
        match (self, other) {
            (Constant(a), Constant(b)) => a == b,
            (Sin { k, amplitude }, Sin { k: k2, amplitude: a2 }) => k == k2 && amplitude == a2,
            (Cos { k, amplitude }, Cos { k: k2, amplitude: a2 }) => k == k2 && amplitude == a2,
            (Bump { center, kappa }, Bump { center: c2, kappa: k2 }) => center == c2 && kappa == k2,
            (Spline(a), Spline(b)) => a == b,
            (Closure { f, .. }, Closure { f: g, .. }) => Arc::ptr_eq(f, g),
            _ => false,
        }
    }
}

impl FromStr for TestFn {
    type Err = Error;

    /// `const:c`, `sin:k[,amplitude]`, `cos:k[,amplitude]`,
    /// `bump:center,kappa` or `spline:path`.
    fn from_str(s: &str) -> Result<TestFn> {
        let (kind, args) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("test function `{s}` lacks a `kind:` prefix")))?;
        if kind == "spline" {
            return Ok(TestFn::Spline(PeriodicSpline::from_file(Path::new(args.trim()))?));
        }
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}"))))
            .collect::<Result<_>>()?;
        let wavenumber = |v: f64| -> Result<u32> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as u32)
            } else {
                Err(Error::Parse(format!("`{s}`: wavenumber must be a non-negative integer")))
            }
        };
        match (kind, nums.as_slice()) {
            ("const", &[c]) => Ok(TestFn::Constant(c)),
            ("sin", &[k]) => Ok(TestFn::Sin { k: wavenumber(k)?, amplitude: 1.0 }),
            ("sin", &[k, a]) => Ok(TestFn::Sin { k: wavenumber(k)?, amplitude: a }),
            ("cos", &[k]) => Ok(TestFn::Cos { k: wavenumber(k)?, amplitude: 1.0 }),
            ("cos", &[k, a]) => Ok(TestFn::Cos { k: wavenumber(k)?, amplitude: a }),
            ("bump", &[center, kappa]) => Ok(TestFn::Bump { center, kappa }),
            _ => Err(Error::Parse(format!("unrecognised test function `{s}`"))),
        }
    }
}

/// Periodic cubic interpolating spline through samples at `j / M`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSpline {
    samples: Vec<f64>,
    /// Second derivatives at the knots.
    curvature: Vec<f64>,
}

impl PeriodicSpline {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        let m = samples.len();
        if m < 3 {
            return Err(Error::InvalidParameter(format!("spline needs at least 3 samples, got {m}")));
        }
        let h = 1.0 / m as f64;
        let rhs: Vec<f64> = (0..m)
            .map(|j| {
                let prev = samples[(j + m - 1) % m];
                let next = samples[(j + 1) % m];
                6.0 * (next - 2.0 * samples[j] + prev) / (h * h)
            })
            .collect();
        // Cyclic system c[j-1] + 4 c[j] + c[j+1] = rhs[j]; Gauss-Seidel
        // contracts by at least 1/2 per sweep.
        let scale = rhs.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
        let mut c = vec![0.0; m];
        for _ in 0..200 {
            let mut change = 0.0f64;
            for j in 0..m {
                let new = (rhs[j] - c[(j + m - 1) % m] - c[(j + 1) % m]) / 4.0;
                change = change.max((new - c[j]).abs());
                c[j] = new;
            }
            if change <= 1e-15 * scale {
                break;
            }
        }
        Ok(PeriodicSpline { samples, curvature: c })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let samples = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("{}: `{s}`: {e}", path.display()))))
            .collect::<Result<Vec<_>>>()?;
        PeriodicSpline::new(samples)
    }

    fn locate(&self, x: f64) -> (usize, usize, f64, f64) {
        let m = self.samples.len();
        let s = x.rem_euclid(1.0) * m as f64;
        let j = (s.floor() as usize).min(m - 1);
        let a = s - j as f64; // (x - x_j) / h
        (j, (j + 1) % m, a, 1.0 / m as f64)
    }

    pub fn value(&self, x: f64) -> f64 {
        let (j, k, a, h) = self.locate(x);
        let b = 1.0 - a;
        let (cj, ck) = (self.curvature[j], self.curvature[k]);
        cj * b * b * b * h * h / 6.0
            + ck * a * a * a * h * h / 6.0
            + (self.samples[j] - cj * h * h / 6.0) * b
            + (self.samples[k] - ck * h * h / 6.0) * a
    }

    pub fn d1(&self, x: f64) -> f64 {
        let (j, k, a, h) = self.locate(x);
        let b = 1.0 - a;
        let (cj, ck) = (self.curvature[j], self.curvature[k]);
        -cj * b * b * h / 2.0 + ck * a * a * h / 2.0 + (self.samples[k] - self.samples[j]) / h
            - (ck - cj) * h / 6.0
    }

    pub fn d2(&self, x: f64) -> f64 {
        let (j, k, a, _) = self.locate(x);
        self.curvature[j] * (1.0 - a) + self.curvature[k] * a
    }
}

/// The pair `(phi_a, phi_b)` and its difference `psi = phi_a - phi_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionPair {
    pub phi_a: TestFn,
    pub phi_b: TestFn,
}

impl TestFunctionPair {
    /// Validated pair; `psi` must be periodic and the derivatives consistent.
    pub fn new(phi_a: TestFn, phi_b: TestFn) -> Result<Self> {
        let pair = TestFunctionPair { phi_a, phi_b };
        pair.validate()?;
        Ok(pair)
    }

    /// Pair without the periodicity and derivative checks. Enough for `log Z`,
    /// which never differentiates.
    pub fn unchecked(phi_a: TestFn, phi_b: TestFn) -> Self {
        TestFunctionPair { phi_a, phi_b }
    }

    /// Pair with `phi_a = psi`, `phi_b = 0`.
    pub fn from_psi(psi: TestFn) -> Result<Self> {
        TestFunctionPair::new(psi, TestFn::Constant(0.0))
    }

    pub fn psi(&self, x: f64) -> f64 {
        self.phi_a.value(x) - self.phi_b.value(x)
    }

    pub fn dpsi(&self, x: f64) -> f64 {
        self.phi_a.d1(x) - self.phi_b.d1(x)
    }

    pub fn d2psi(&self, x: f64) -> f64 {
        self.phi_a.d2(x) - self.phi_b.d2(x)
    }

    /// True when `psi` is constant, so that `Z` only depends on particle number.
    pub fn psi_is_constant(&self) -> bool {
        (0..64).all(|j| {
            let x = j as f64 / 64.0;
            self.dpsi(x).abs() < 1e-14
        })
    }

    pub fn validate(&self) -> Result<()> {
        let gap = (self.psi(0.0) - self.psi(1.0)).abs();
        if gap >= PERIODICITY_TOLERANCE {
            return Err(Error::NotPeriodic(gap));
        }
        let h = 1e-4;
        for f in [&self.phi_a, &self.phi_b] {
            for j in 0..7 {
                let x = 0.05 + 0.13 * j as f64;
                let fd1 = (f.value(x + h) - f.value(x - h)) / (2.0 * h);
                let fd2 = (f.value(x + h) - 2.0 * f.value(x) + f.value(x - h)) / (h * h);
                let (d1, d2) = (f.d1(x), f.d2(x));
                if (fd1 - d1).abs() > 1e-5 * (1.0 + d1.abs()) || (fd2 - d2).abs() > 1e-3 * (1.0 + d2.abs()) {
                    return Err(Error::InvalidParameter(format!(
                        "test function {f} has inconsistent derivatives at x = {x}"
                    )));
                }
            }
        }
        Ok(())
    }
}
