//! `asep`: simulate exclusion processes, solve their limit equations, and run
//! convergence and martingale diagnostics.
//!
//! Exit codes: 0 success, 2 configuration error, 3 degenerate or frozen run,
//! 4 internal error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use asep_core::engine::{run_until, RateIndex, SimClock, TrajectoryRecord, Uniformized};
use asep_core::harness::{
    run_convergence, run_generator_oracle, run_martingale_scaling, Driver, ExperimentPlan, MartingaleStudy,
    ScalingStatus,
};
use asep_core::hydro::{solve, uniform_times, write_fields_csv, DensityField, PdeParams};
use asep_core::meta::{write_sidecar, KvMap};
use asep_core::rates::parse_matrix;
use asep_core::rng::{mix64, seeded};
use asep_core::{Error, InitialProfile, LatticeConfig, Profile, RateTable};

const OUT_DIR_ENV: &str = "ASEP_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "asep", version, about = "Exclusion processes on the ring and their hydrodynamic limits")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the particle system and write configuration snapshots.
    Simulate(SimulateArgs),
    /// Solve the limiting equation and write density profiles.
    Solve(SolveArgs),
    /// Ensemble convergence study from a plan file.
    Converge(PlanArgs),
    /// Martingale scaling, generator bounds and the exact oracle from a plan file.
    Diagnose(DiagnoseArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Model {
    Binary,
    Nspecies,
    AbcPreset,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum DriverArg {
    /// Event by event; required for --log-events.
    Event,
    /// Thinned constant-rate clock; same snapshot law, much faster.
    Uniformized,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "binary")]
    model: Model,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    mu: f64,
    /// Diffusion constant of the n-species model.
    #[arg(long, default_value_t = 1.0)]
    d: f64,
    /// Drift matrix, rows separated by `;`, entries by `,`.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// ABC rates `p+,p-,q+,q-,r+,r-`.
    #[arg(long, default_value = "1,1,1,1,1,1")]
    abc_rates: String,
    /// Initial profile: `const:c`, `sin:amplitude,k,mean`, `cos:...`,
    /// `file:path`, or a `;`-separated list with one `rest`.
    #[arg(long)]
    rho0: Option<String>,
    /// Final time.
    #[arg(long, default_value_t = 0.1)]
    t: f64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "N", default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of equally spaced snapshots after time 0.
    #[arg(long, default_value_t = 10)]
    snapshots: usize,
    #[arg(long, value_enum, default_value = "uniformized")]
    driver: DriverArg,
    /// Also write every event (bond, holding time).
    #[arg(long)]
    log_events: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file; its entries override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Grid size.
    #[arg(long = "M", default_value_t = 256)]
    m: usize,
    /// Time step; defaults to the largest stable one.
    #[arg(long)]
    dt: Option<f64>,
    /// Number of equally spaced output times after time 0.
    #[arg(long, default_value_t = 10)]
    outputs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlanArgs {
    /// Experiment plan (key=value).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[command(flatten)]
    plan: PlanArgs,
    /// Also run the generator-matrix oracle on a binary and a three-species case.
    #[arg(long)]
    oracle: bool,
}

/// Outcome other than plain success.
#[derive(Debug)]
struct Degenerate(String);

impl std::fmt::Display for Degenerate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Degenerate {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match std::panic::catch_unwind(|| dispatch(cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(4),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Degenerate>().is_some() {
        3
    } else if e.downcast_ref::<Error>().is_some() || e.downcast_ref::<std::io::Error>().is_some() {
        2
    } else {
        4
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Converge(a) => converge(a),
        Command::Diagnose(a) => diagnose(a),
    }
}

fn default_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

/// Creates the parent directory and the file itself, so an unwritable path
/// fails before any work is done.
fn create_output(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(Error::from).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).map_err(Error::from).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn parse_kv_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, Error>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e| Error::Parse(format!("`{key} = {raw}`: {e}")))
}

impl ModelArgs {
    /// Applies a config entry; returns false for keys this group does not own.
    fn apply(&mut self, key: &str, raw: &str) -> Result<bool, Error> {
        match key {
            "model" => {
                self.model = Model::from_str(raw, true).map_err(|e| Error::Parse(format!("`model = {raw}`: {e}")))?
            }
            "lambda" => self.lambda = parse_kv_value(key, raw)?,
            "mu" => self.mu = parse_kv_value(key, raw)?,
            "d" => self.d = parse_kv_value(key, raw)?,
            "alpha" => self.alpha = Some(raw.to_string()),
            "abc_rates" => self.abc_rates = raw.to_string(),
            "rho0" => self.rho0 = Some(raw.to_string()),
            "t" => self.t = parse_kv_value(key, raw)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn alpha_matrix(&self) -> Result<Vec<Vec<f64>>, Error> {
        let raw = self.alpha.as_deref().ok_or_else(|| Error::MissingKey("alpha".into()))?;
        parse_matrix(raw)
    }

    fn profile(&self) -> Result<InitialProfile, Error> {
        match (&self.rho0, self.model) {
            (Some(s), _) => s.parse(),
            (None, Model::AbcPreset) => {
                let third = Profile::Const(1.0 / 3.0);
                InitialProfile::new(vec![third.clone(), third, Profile::Remainder])
            }
            (None, _) => Err(Error::MissingKey("rho0".into())),
        }
    }

    fn rate_table(&self, n_sites: usize) -> Result<RateTable, Error> {
        match self.model {
            Model::Binary => RateTable::binary(self.lambda, self.mu, n_sites),
            Model::Nspecies => RateTable::equidiffusive(self.d, self.alpha_matrix()?, n_sites),
            Model::AbcPreset => {
                let r: Vec<f64> = self
                    .abc_rates
                    .split(',')
                    .map(|s| parse_kv_value("abc_rates", s.trim()))
                    .collect::<Result<_, _>>()?;
                let [pp, pm, qp, qm, rp, rm] = r[..] else {
                    return Err(Error::Parse(format!("abc_rates needs six values, got {}", r.len())));
                };
                RateTable::abc(pp, pm, qp, qm, rp, rm)
            }
        }
    }

    fn describe(&self, kv: &mut KvMap) -> Result<(), Error> {
        kv.insert("rho0", self.profile()?.describe());
        kv.insert("t", format!("{:?}", self.t));
        Ok(())
    }
}

fn apply_config(path: &Path, mut apply: impl FnMut(&str, &str) -> Result<bool, Error>) -> Result<()> {
    let kv = KvMap::read(path).with_context(|| format!("reading {}", path.display()))?;
    for (k, v) in kv.iter() {
        if !apply(k, v)? {
            return Err(Error::Parse(format!("unknown configuration key `{k}`")).into());
        }
    }
    Ok(())
}

fn simulate(mut a: SimulateArgs) -> Result<()> {
    if let Some(cfg) = a.config.clone() {
        apply_config(&cfg, |k, v| {
            if a.model.apply(k, v)? {
                return Ok(true);
            }
            match k {
                "N" => a.n = parse_kv_value(k, v)?,
                "seed" => a.seed = parse_kv_value(k, v)?,
                "snapshots" => a.snapshots = parse_kv_value(k, v)?,
                "driver" => {
                    a.driver =
                        DriverArg::from_str(v, true).map_err(|e| Error::Parse(format!("`driver = {v}`: {e}")))?
                }
                "log_events" => a.log_events = parse_kv_value(k, v)?,
                "out" => a.out = Some(PathBuf::from(v)),
                _ => return Ok(false),
            }
            Ok(true)
        })?;
    }
    if a.log_events && a.driver == DriverArg::Uniformized {
        a.driver = DriverArg::Event;
    }
    if a.snapshots == 0 {
        return Err(Error::InvalidParameter("snapshots must be at least 1".into()).into());
    }
    let table = a.model.rate_table(a.n)?;
    let profile = a.model.profile()?;
    if profile.n_species() != table.n_species() {
        return Err(Error::DimensionMismatch { expected: table.n_species(), found: profile.n_species() }.into());
    }
    let out_path = a.out.clone().unwrap_or_else(|| default_dir().join("trajectory.csv"));
    let mut out = create_output(&out_path)?;

    let mut config = LatticeConfig::sample(a.n, &profile, a.seed)?;
    let times = uniform_times(a.model.t, a.snapshots);
    let mut rng = seeded(mix64(a.seed ^ 0xD1B5_4A32_D192_ED03));
    let record: TrajectoryRecord = match a.driver {
        DriverArg::Uniformized => Uniformized::new(&table).run_snapshots(&mut config, &mut rng, 0.0, &times)?,
        DriverArg::Event => {
            let mut index = RateIndex::build(&config, &table)?;
            let mut clock = SimClock::default();
            run_until(&mut config, &mut index, &table, &mut clock, &mut rng, a.model.t, &times, a.log_events)?
        }
    };
    record.write_csv(&mut out)?;
    out.flush()?;

    let mut kv = KvMap::new();
    kv.extend(table.metadata());
    a.model.describe(&mut kv)?;
    kv.insert("N", a.n);
    kv.insert("seed", a.seed);
    kv.insert("snapshots", a.snapshots);
    kv.insert("driver", format!("{:?}", a.driver).to_lowercase());
    kv.insert("frozen", record.frozen);
    write_sidecar(&out_path, &kv)?;

    if let Some(events) = &record.events {
        let ev_path = out_path.with_extension("events.csv");
        let mut w = create_output(&ev_path)?;
        writeln!(w, "bond,dt")?;
        for e in events {
            writeln!(w, "{},{:?}", e.bond, e.dt)?;
        }
        w.flush()?;
        write_sidecar(&ev_path, &kv)?;
    }
    if record.frozen {
        return Err(Degenerate(format!("initial configuration is frozen: no bond has a positive rate (output in {})", out_path.display())).into());
    }
    println!("wrote {}", out_path.display());
    Ok(())
}

fn solve_cmd(mut a: SolveArgs) -> Result<()> {
    if let Some(cfg) = a.config.clone() {
        apply_config(&cfg, |k, v| {
            if a.model.apply(k, v)? {
                return Ok(true);
            }
            match k {
                "M" => a.m = parse_kv_value(k, v)?,
                "dt" => a.dt = Some(parse_kv_value(k, v)?),
                "outputs" => a.outputs = parse_kv_value(k, v)?,
                "out" => a.out = Some(PathBuf::from(v)),
                _ => return Ok(false),
            }
            Ok(true)
        })?;
    }
    if a.outputs == 0 {
        return Err(Error::InvalidParameter("outputs must be at least 1".into()).into());
    }
    let profile = a.model.profile()?;
    let (rho0, params) = match a.model.model {
        Model::Binary => {
            let rho0 = DensityField::binary_from_profile(&profile, a.m)?;
            (rho0, PdeParams::burgers(a.model.lambda, a.model.mu, a.m, 1.0)?)
        }
        Model::Nspecies => {
            let rho0 = DensityField::species_from_profile(&profile, a.m)?;
            (rho0, PdeParams::nspecies(a.model.d, a.model.alpha_matrix()?, a.m, 1.0)?)
        }
        Model::AbcPreset => {
            return Err(Error::InvalidParameter("abc-preset has N-independent rates and no limit equation; use nspecies".into()).into())
        }
    };
    let params = match a.dt {
        Some(dt) => PdeParams { dt, ..params },
        None => params.with_stable_dt(&rho0),
    };
    let out_path = a.out.clone().unwrap_or_else(|| default_dir().join("density.csv"));
    let mut out = create_output(&out_path)?;
    let fields = solve(&rho0, &params, a.model.t, &uniform_times(a.model.t, a.outputs))?;
    write_fields_csv(&fields, &mut out)?;
    out.flush()?;

    let mut kv = KvMap::new();
    kv.extend(params.metadata());
    a.model.describe(&mut kv)?;
    kv.insert("outputs", a.outputs);
    write_sidecar(&out_path, &kv)?;
    println!("wrote {}", out_path.display());
    Ok(())
}

fn read_plan(path: &Path) -> Result<ExperimentPlan> {
    ExperimentPlan::from_file(path).with_context(|| format!("plan {}", path.display()))
}

fn converge(a: PlanArgs) -> Result<()> {
    let plan = read_plan(&a.config)?;
    let dir = a.out_dir.unwrap_or_else(default_dir);
    let csv_path = dir.join("convergence.csv");
    let summary_path = dir.join("convergence_summary.txt");
    let mut csv = create_output(&csv_path)?;
    let mut summary = create_output(&summary_path)?;

    let report = run_convergence(&plan)?;
    report.write_csv(&mut csv)?;
    csv.flush()?;
    let text = report.summary();
    summary.write_all(text.as_bytes())?;
    summary.flush()?;
    let kv = plan.to_kv();
    write_sidecar(&csv_path, &kv)?;
    write_sidecar(&summary_path, &kv)?;
    print!("{text}");
    if report.degenerate() {
        return Err(Degenerate("every run was frozen at the start; distances are zero and no fit is made".into()).into());
    }
    Ok(())
}

fn diagnose(a: DiagnoseArgs) -> Result<()> {
    let plan = read_plan(&a.plan.config)?;
    let dir = a.plan.out_dir.unwrap_or_else(default_dir);
    let csv_path = dir.join("martingale.csv");
    let summary_path = dir.join("diagnose_summary.txt");
    let mut csv = create_output(&csv_path)?;
    let mut summary = create_output(&summary_path)?;

    let scaling = run_martingale_scaling(&MartingaleStudy::from_plan(&plan))?;
    scaling.write_csv(&mut csv)?;
    csv.flush()?;
    let mut text = scaling.summary();
    let ratios = scaling.generator_max_ratios();
    text.push_str(&format!(
        "[{}] max|L| ratios between consecutive sizes in [0.5, 2]: {ratios:.3?}\n",
        if ratios.iter().all(|r| (0.5..=2.0).contains(r)) { "PASS" } else { "FAIL" }
    ));
    if a.oracle {
        let binary = run_generator_oracle(
            &LatticeConfig::binary(&[1, 1, 0, 0])?,
            &RateTable::binary(1.0, 0.0, 4)?,
            0.05,
            10_000,
            plan.seed_base,
            Driver::EventDriven,
        )?;
        let abc = run_generator_oracle(
            &LatticeConfig::exact(3, vec![0, 0, 1, 1, 2, 2])?,
            &RateTable::abc(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)?,
            0.5,
            100_000,
            plan.seed_base,
            Driver::EventDriven,
        )?;
        text.push_str(&format!(
            "[{}] generator oracle, binary N=4: TV {:.4} (< 0.02)\n",
            if binary.tv < 0.02 { "PASS" } else { "FAIL" },
            binary.tv
        ));
        text.push_str(&format!(
            "[{}] generator oracle, ABC N=6: TV {:.4} (< 0.03)\n",
            if abc.tv < 0.03 { "PASS" } else { "FAIL" },
            abc.tv
        ));
    }
    summary.write_all(text.as_bytes())?;
    summary.flush()?;
    let kv = plan.to_kv();
    write_sidecar(&csv_path, &kv)?;
    write_sidecar(&summary_path, &kv)?;
    print!("{text}");
    if scaling.status == ScalingStatus::Degenerate {
        return Err(Degenerate("test function is constant: U vanishes identically".into()).into());
    }
    Ok(())
}
