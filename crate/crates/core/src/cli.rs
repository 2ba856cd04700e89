//! Experiment runner: flat `key=value` configs, suite dispatch and the
//! pass/fail report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::report::{fmt_num, Check, Csv};
use crate::suites;

pub const SUITES: [&str; 6] = ["flows", "bounds", "commutators", "weakform", "uniqueness", "all"];

pub const SEED_ENV: &str = "SPDECHAR_SEED";

/// Parsed configuration. Unset fields fall back to per-suite defaults.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub drift: Option<String>,
    pub initial: Option<String>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub h: Option<f64>,
    pub domain: Option<f64>,
    pub eps: Option<Vec<f64>>,
    pub x_probes: Option<Vec<f64>>,
    pub t_probes: Option<Vec<f64>>,
    pub k: Option<f64>,
    pub dim: Option<usize>,
    pub guard_box: Option<f64>,
    pub seed: Option<u64>,
    pub output: PathBuf,
}

fn config_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse::<T>().map_err(|_| config_err(key, format!("cannot parse `{v}`")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_num::<f64>(key, s.trim())).collect()
}

impl ExperimentConfig {
    /// Parses `key=value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig {
            output: PathBuf::from("out"),
            ..Default::default()
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(&format!("line {}", lineno + 1), "expected `key=value`"))?;
            let (key, v) = (key.trim(), value.trim());
            match key {
                "experiment" => cfg.experiment = v.to_string(),
                "drift" => cfg.drift = Some(v.to_string()),
                "initial" => cfg.initial = Some(v.to_string()),
                "paths" => cfg.paths = Some(parse_num(key, v)?),
                "steps" => cfg.steps = Some(parse_num(key, v)?),
                "horizon" => cfg.horizon = Some(parse_num(key, v)?),
                "dt" => cfg.dt = Some(parse_num(key, v)?),
                "h" => cfg.h = Some(parse_num(key, v)?),
                "domain" => cfg.domain = Some(parse_num(key, v)?),
                "eps" => cfg.eps = Some(parse_list(key, v)?),
                "x_probes" => cfg.x_probes = Some(parse_list(key, v)?),
                "t_probes" => cfg.t_probes = Some(parse_list(key, v)?),
                "k" => cfg.k = Some(parse_num(key, v)?),
                "dim" => cfg.dim = Some(parse_num(key, v)?),
                "guard_box" => cfg.guard_box = Some(parse_num(key, v)?),
                "seed" => cfg.seed = Some(parse_num(key, v)?),
                "output" => cfg.output = PathBuf::from(v),
                _ => return Err(config_err(key, "unknown key")),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Checks names, signs and orderings.
    pub fn validate(&self) -> Result<()> {
        if !SUITES.contains(&self.experiment.as_str()) {
            return Err(Error::UnknownExperiment {
                name: self.experiment.clone(),
                valid: SUITES.join(", "),
            });
        }
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(config_err(name, format!("must be positive, got {x}"))),
            _ => Ok(()),
        };
        positive("horizon", self.horizon)?;
        positive("dt", self.dt)?;
        positive("h", self.h)?;
        positive("domain", self.domain)?;
        if let Some(k) = self.k {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(config_err("k", format!("must be non-negative, got {k}")));
            }
        }
        positive("guard_box", self.guard_box)?;
        positive("paths", self.paths.map(|v| v as f64))?;
        positive("steps", self.steps.map(|v| v as f64))?;
        if let Some(d) = self.dim {
            if d != 1 && d != 2 {
                return Err(config_err("dim", "must be 1 or 2"));
            }
        }
        if let Some(eps) = &self.eps {
            if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) || eps.windows(2).any(|p| !(p[1] < p[0])) {
                return Err(config_err("eps", "must be positive and strictly decreasing"));
            }
        }
        for (name, list) in [("x_probes", &self.x_probes), ("t_probes", &self.t_probes)] {
            if let Some(l) = list {
                if l.is_empty() || l.iter().any(|v| !v.is_finite()) {
                    return Err(config_err(name, "must be a non-empty list of numbers"));
                }
            }
        }
        if let Some(t) = &self.t_probes {
            if t.iter().any(|v| !(*v > 0.0)) {
                return Err(config_err("t_probes", "times must be positive"));
            }
        }
        if self.seed.is_none() {
            return Err(config_err("seed", format!("a seed is required (config key or {SEED_ENV})")));
        }
        if let Some(d) = &self.drift {
            crate::field::DriftField::parse(d)?;
        }
        if let Some(i) = &self.initial {
            crate::solution::InitialCondition::parse(i)?;
        }
        Ok(())
    }

    /// Applies `SPDECHAR_SEED` if it is set.
    pub fn with_env_seed(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = Some(parse_num(SEED_ENV, v.trim())?);
        }
        Ok(self)
    }
}

/// Outcome of one `run`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub experiment: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    /// Reported quantities without a pass/fail threshold.
    pub notes: Vec<String>,
}

impl SuiteReport {
    pub fn new(experiment: &str, seed: u64) -> Self {
        Self {
            experiment: experiment.to_string(),
            seed,
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn merge(&mut self, other: SuiteReport) {
        self.checks.extend(other.checks);
        self.notes.extend(other.notes);
    }

    pub fn checks_csv(&self) -> String {
        let mut csv = Csv::new(&["name", "measured", "threshold", "pass", "artifact"]);
        for c in &self.checks {
            csv.push(vec![
                c.name.clone(),
                fmt_num(c.measured),
                fmt_num(c.threshold),
                c.pass.to_string(),
                c.artifact.clone(),
            ]);
        }
        csv.render()
    }

    /// Human-readable summary; the `timestamp` line is the only
    /// non-reproducible content.
    pub fn summary(&self, timestamp: u64) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "spdechar {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "experiment={}", self.experiment);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "timestamp={timestamp}");
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{} {} measured={} threshold={} artifact={}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                fmt_num(c.measured),
                fmt_num(c.threshold),
                c.artifact
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "NOTE {n}");
        }
        let _ = writeln!(s, "overall={}", if self.pass() { "PASS" } else { "FAIL" });
        s
    }
}

/// Writes `contents` to `dir/name`, creating `dir`.
pub(crate) fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

/// Validates `cfg`, runs its suite(s) and writes `checks.csv` and
/// `summary.txt` into the output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let report = suites::run_suite(cfg)?;
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    write_artifact(&cfg.output, "checks.csv", &report.checks_csv())?;
    write_artifact(&cfg.output, "summary.txt", &report.summary(stamp))?;
    Ok(report)
}

/// What a suite verifies and its default parameters.
pub fn describe(name: &str) -> Result<String> {
    let text = match name {
        "flows" => "flows: Euler-Maruyama characteristics and representation formulas.\n\
             Checks zero-drift exactness (u(t,x) = u0(x - B_t), J = 1), mass conservation of the\n\
             continuity solution, the Ornstein-Uhlenbeck oracle (b = -x, dt = 1e-4, T = 0.02) and\n\
             L2 conservation plus det(DX) -> 1 for the planar rotation field.\n\
             defaults: drift=zero initial=bump(0,1) paths=4 steps=100 horizon=1 h=1/64 domain=6 dim=1\n",
        "bounds" => "bounds: explicit constants c1, c2, k1, k2 of the negative-moment bound\n\
             E[J_t(x)^-2] <= k1 t^(-3/8) exp(k2 x^2), obtained by Gaussian quadrature, and Monte Carlo\n\
             checks of that bound (99% upper confidence edge), of E[J^p] and of E[|X_t(x)|^4] against\n\
             C(|x|^4 + T^4).\n\
             defaults: drift=tanh(0.01) paths=10000 steps=100 horizon=1 x_probes=0,1 t_probes=0.25,1\n",
        "commutators" => "commutators: decay of R_eps(f,g) = f d(rho_eps*g) - rho_eps*(f dg) as eps -> 0.\n\
             Smooth pair f = x, g = sin: L2 norm on [-2,2] against m2 eps^2 ||g''|| and a log-log slope\n\
             near 2; Holder(1/2) field: strictly decreasing norms (L1 on the window).\n\
             defaults: eps=0.1,0.05,0.025 h=1/1024 domain=3\n",
        "weakform" => "weakform: pathwise Ito weak formulation and the composition identity\n\
             V_eps(t, X_t(x)) = V_eps(0, x) + int R_eps(V, b)(X_s) ds along mollified characteristics.\n\
             Residual sup|r| for b = 0 and b = -x under coupled dt-halving; composition defect under\n\
             simultaneous (dt, h) halving.\n\
             defaults: drift=tanh(0.01) paths=256 steps=128 horizon=0.25 h=1/256 eps=0.1\n",
        "uniqueness" => "uniqueness: L2 uniqueness of weak solutions, seen through shared-noise convergence\n\
             of mollified problems. Mean ||u^eps(T) - u^(eps/2)(T)||^2 in L2((1+|x|)^2 dx) must strictly\n\
             decrease along the sweep, and vanish for zero data.\n\
             defaults: drift=holder(0.5,0.01) initial=bump(0,1) eps=0.2,0.1,0.05,0.025 paths=200\n\
             steps=50 horizon=1 h=1/256 domain=6\n",
        "all" => "all: runs every suite in turn: flows, bounds, commutators, weakform, uniqueness.\n\
             Artifacts go to one subdirectory per suite.\n",
        _ => {
            return Err(Error::UnknownExperiment {
                name: name.to_string(),
                valid: SUITES.join(", "),
            })
        }
    };
    Ok(text.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "spdechar", about = "Stochastic characteristics experiment runner", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the suite named in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "guard-box")]
        guard_box: Option<f64>,
    },
    /// Explain what a suite verifies.
    Describe { name: String },
    /// Print the version.
    Version,
}

/// Executes a parsed command line, returning the process exit code.
pub fn execute(cli: Cli) -> i32 {
    match cli.command {
        Command::Version => {
            println!("spdechar {}", env!("CARGO_PKG_VERSION"));
            0
        }
        Command::Describe { name } => match describe(&name) {
            Ok(t) => {
                print!("{t}");
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
        Command::Run {
            config,
            threads,
            paths,
            steps,
            horizon,
            seed,
            dim,
            dt,
            guard_box,
        } => {
            let cfg = ExperimentConfig::load(&config).and_then(ExperimentConfig::with_env_seed).map(|mut c| {
                c.paths = paths.or(c.paths);
                c.steps = steps.or(c.steps);
                c.horizon = horizon.or(c.horizon);
                c.seed = seed.or(c.seed);
                c.dim = dim.or(c.dim);
                c.dt = dt.or(c.dt);
                c.guard_box = guard_box.or(c.guard_box);
                c
            });
            let result = cfg.and_then(|c| match threads {
                Some(t) => crate::exec::with_threads(t.max(1), || run(&c)),
                None => run(&c),
            });
            match result {
                Ok(report) => {
                    for c in &report.checks {
                        println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
                    }
                    println!("overall={}", if report.pass() { "PASS" } else { "FAIL" });
                    if report.pass() {
                        0
                    } else {
                        1
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    2
                }
            }
        }
    }
}
