use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;
use skf_core::experiments::{
    convergence_study, monte_carlo_check, wave_instance, wave_slow_convergence_demo, StudyConfig, WaveConfig,
};
use skf_core::filters::{discrete_kf, refine_to_depth, EstimateRecord};
use skf_core::lti::bound_constants_with_mu;
use skf_core::{bound_constants, simulate, BoundVariant, DyadicGrid, LtiSystem, SamplePath};

use crate::config::{Config, ConfigError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Simulate,
    Kf,
    Refine,
    Converge,
    WaveDemo,
    Bounds,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Kf => "kf",
            Command::Refine => "refine",
            Command::Converge => "converge",
            Command::WaveDemo => "wave-demo",
            Command::Bounds => "bounds",
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numeric(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numeric(m) => write!(f, "numerical failure: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<skf_core::Error> for Failure {
    fn from(e: skf_core::Error) -> Self {
        match e {
            skf_core::Error::NonFinite(_) => Failure::Numeric(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

/// Full double precision: 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn ensure_finite<'a>(what: &str, values: impl IntoIterator<Item = &'a f64>) -> Result<(), Failure> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Failure::Numeric(format!("{what} contains non-finite values")))
    }
}

/// Files written by one command, relative to the output directory.
pub struct Outputs {
    dir: PathBuf,
    pub files: Vec<String>,
}

impl Outputs {
    pub fn new(dir: PathBuf) -> Result<Self, Failure> {
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        Ok(Self { dir, files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Numeric(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }
}

pub fn system(cfg: &Config) -> Result<LtiSystem, Failure> {
    match (cfg.has_section("system"), cfg.has_section("wave")) {
        (true, true) => Err(Failure::Config("give either [system] or [wave], not both".into())),
        (false, false) => Err(Failure::Config("a [system] or [wave] section is required".into())),
        (false, true) => Ok(wave_instance(&wave_config(cfg)?)?),
        (true, false) => {
            let a = cfg.required_matrix("system", "A")?;
            let p = a.nrows();
            let c = cfg.required_matrix("system", "C")?;
            let r = cfg.required_matrix("system", "R")?;
            let p0 = cfg.required_matrix("system", "P0")?;
            let m = cfg.vector("system", "m")?.unwrap_or_else(|| nalgebra::DVector::zeros(p));
            let b = cfg.matrix("system", "B")?;
            let q = cfg.matrix("system", "Q")?;
            let sys = match (b, q) {
                (None, None) => LtiSystem::noiseless(a, c, r, p0, m)?,
                (Some(b), Some(q)) if b.is_empty() && q.is_empty() => {
                    LtiSystem::new(a, DMatrix::zeros(p, 0), c, q, r, p0, m)?
                }
                (Some(b), Some(q)) => LtiSystem::new(a, b, c, q, r, p0, m)?,
                _ => return Err(Failure::Config("B and Q must be given together".into())),
            };
            Ok(sys)
        }
    }
}

pub fn wave_config(cfg: &Config) -> Result<WaveConfig, Failure> {
    let wave = WaveConfig {
        mode_exponents: cfg.required_list("wave", "modes")?,
        c_coeffs: cfg.required_list("wave", "c")?,
        sigmas: cfg.required_list("wave", "sigma")?,
        r: cfg.required_scalar("wave", "R")?,
    };
    wave.validate()?;
    Ok(wave)
}

fn grid(cfg: &Config) -> Result<DyadicGrid, Failure> {
    let horizon = cfg.scalar_or("grid", "horizon", 1.0)?;
    let n = cfg.scalar_or("grid", "n", 8usize)?;
    let depth = cfg.scalar_or("grid", "depth", 0u32)?;
    Ok(DyadicGrid::new(horizon, n, depth)?)
}

fn variant(cfg: &Config, section: &str, sys: &LtiSystem) -> Result<BoundVariant, Failure> {
    match cfg.raw(section, "variant") {
        Some(v) => Ok(v.parse()?),
        None if sys.is_noiseless() => Ok(BoundVariant::Noiseless),
        None => Ok(BoundVariant::InputNoise),
    }
}

fn path_csv(path: &SamplePath) -> Result<String, Failure> {
    let p = path.x.len();
    let r = path.y[0].len();
    let mut out = String::from("t");
    for i in 1..=p {
        write!(out, ",z_{i}").unwrap();
    }
    for i in 1..=r {
        write!(out, ",y_{i}").unwrap();
    }
    out.push('\n');
    for (i, (z, y)) in path.z.iter().zip(&path.y).enumerate() {
        ensure_finite("simulated path", z.iter().chain(y.iter()))?;
        out.push_str(&num(path.grid.time(i)));
        for v in z.iter().chain(y.iter()) {
            out.push(',');
            out.push_str(&num(*v));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn run(command: Command, cfg: &Config, seed: u64, out: &mut Outputs) -> Result<(), Failure> {
    match command {
        Command::Simulate => {
            let sys = system(cfg)?;
            let path = simulate(&sys, &grid(cfg)?, seed)?;
            out.write("path.csv", &path_csv(&path)?)
        }
        Command::Kf => {
            let sys = system(cfg)?;
            let grid = grid(cfg)?;
            let path = simulate(&sys, &grid, seed)?;
            let n = grid.base_n();
            let estimate = discrete_kf(&sys, &path, n)?;
            let reference = discrete_kf(&sys, &path, grid.intervals())?;
            let record = EstimateRecord {
                n,
                depth: grid.depth(),
                mean: estimate.mean().iter().copied().collect(),
                cov_trace: estimate.cov_trace(),
                error_sq_vs_ref: (estimate.mean() - reference.mean()).norm_squared(),
            };
            ensure_finite("estimate", record.mean.iter().chain([&record.cov_trace, &record.error_sq_vs_ref]))?;
            out.json("estimate.json", &record)
        }
        Command::Refine => {
            let sys = system(cfg)?;
            let grid = grid(cfg)?;
            let path = simulate(&sys, &grid, seed)?;
            let run = refine_to_depth(&sys, &path, grid.base_n(), grid.depth())?;
            let mut csv = String::from("j,trace,increment_trace\n");
            for step in &run.steps {
                let trace = step.estimate.trace();
                ensure_finite("refinement trajectory", [&trace, &step.increment_trace])?;
                writeln!(csv, "{},{},{}", step.j, num(trace), num(step.increment_trace)).unwrap();
            }
            out.write("trajectory.csv", &csv)
        }
        Command::Converge => {
            let sys = system(cfg)?;
            let study = StudyConfig {
                variant: variant(cfg, "study", &sys)?,
                system: sys,
                horizon: cfg.scalar_or("grid", "horizon", 1.0)?,
                n_list: cfg.required_list("study", "n_list")?,
                ref_depth: cfg.scalar_or("study", "ref_depth", 10u32)?,
                seeds: cfg.scalar_or("study", "seeds", 1usize)?,
            };
            let report = convergence_study(&study)?;
            let mut csv = String::from("n,error_sq,bound_value,a_priori_bound\n");
            for row in &report.rows {
                ensure_finite("rate report", [&row.error_sq, &row.bound_value, &row.a_priori_bound])?;
                writeln!(csv, "{},{},{},{}", row.n, num(row.error_sq), num(row.bound_value), num(row.a_priori_bound))
                    .unwrap();
            }
            out.write("rate.csv", &csv)?;
            out.json("rate_report.json", &report)?;
            if cfg.scalar_or("study", "monte_carlo", false)? {
                let rows = monte_carlo_check(&study, seed)?;
                let mut csv = String::from("n,mc_error_sq,stderr,trace_error_sq\n");
                for row in &rows {
                    ensure_finite("Monte Carlo table", [&row.mc_error_sq, &row.stderr, &row.trace_error_sq])?;
                    writeln!(csv, "{},{},{},{}", row.n, num(row.mc_error_sq), num(row.stderr), num(row.trace_error_sq))
                        .unwrap();
                }
                out.write("monte_carlo.csv", &csv)?;
            }
            Ok(())
        }
        Command::WaveDemo => {
            if cfg.has_section("system") {
                return Err(Failure::Config("wave-demo takes a [wave] section, not [system]".into()));
            }
            let wave = wave_config(cfg)?;
            let levels: Vec<u32> = cfg.required_list("demo", "levels")?;
            let reference: u32 = cfg.required_scalar("demo", "reference_level")?;
            let rows = wave_slow_convergence_demo(&wave, &levels, reference)?;
            let mut csv = String::from("l,error_sq,lower_bound\n");
            for row in &rows {
                ensure_finite("wave demo", [&row.error_sq, &row.lower_bound])?;
                writeln!(csv, "{},{},{}", row.l, num(row.error_sq), num(row.lower_bound)).unwrap();
            }
            out.write("wave_demo.csv", &csv)
        }
        Command::Bounds => {
            let sys = system(cfg)?;
            let horizon = cfg.scalar_or("grid", "horizon", 1.0)?;
            let n = match cfg.scalar::<usize>("bounds", "n")? {
                Some(n) => n,
                None => cfg.scalar_or("grid", "n", 8usize)?,
            };
            let variant = variant(cfg, "bounds", &sys)?;
            let report = match cfg.scalar::<f64>("bounds", "mu")? {
                Some(mu) => bound_constants_with_mu(&sys, horizon, n, variant, mu)?,
                None => bound_constants(&sys, horizon, n, variant)?,
            };
            ensure_finite("bound report", report.constants.values().chain([&report.bound_value]))?;
            out.json("bounds.json", &report)
        }
    }
}
