use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use crate::engine::{IleaConfig, Schedule};
use crate::error::{IleaError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    FrechetExtrinsic,
    FrechetIntrinsic,
    MatrixCompletion,
    GradCheck,
}

impl FromStr for Experiment {
    type Err = IleaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "frechetextrinsic" | "extrinsic" => Ok(Experiment::FrechetExtrinsic),
            "frechetintrinsic" | "intrinsic" => Ok(Experiment::FrechetIntrinsic),
            "matrixcompletion" | "completion" => Ok(Experiment::MatrixCompletion),
            "gradcheck" => Ok(Experiment::GradCheck),
            _ => Err(IleaError::Config(format!("unknown experiment {s:?}"))),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::FrechetExtrinsic => "frechet_extrinsic",
            Experiment::FrechetIntrinsic => "frechet_intrinsic",
            Experiment::MatrixCompletion => "matrix_completion",
            Experiment::GradCheck => "gradcheck",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TransportKind {
    #[default]
    InProc,
    Socket,
}

impl FromStr for TransportKind {
    type Err = IleaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "inproc" => Ok(TransportKind::InProc),
            "socket" | "tcp" => Ok(TransportKind::Socket),
            _ => Err(IleaError::Config(format!("unknown transport {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Total sample count for the sphere experiments.
    pub n: usize,
    /// Sphere dimension; points live in `R^(d+1)`.
    pub d: usize,
    /// Subspace rank for matrix completion.
    pub r: usize,
    pub lambda: f64,
    pub workers: usize,
    pub kappa: f64,
    pub trials: usize,
    pub seed: u64,
    pub ilea: IleaConfig,
    pub transport: TransportKind,
    pub socket_addr: String,
    pub round_timeout: Duration,
    pub ratings: Option<PathBuf>,
    pub center_ratings: bool,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// When false the wallclock column is written as 0 so that runs are
    /// byte-for-byte reproducible.
    pub wallclock: bool,
}

impl ExperimentConfig {
    /// Defaults for `experiment`, including its outer iteration count.
    pub fn new(experiment: Experiment) -> Self {
        let mut ilea = IleaConfig::default();
        ilea.outer_iters = match experiment {
            Experiment::MatrixCompletion => 50,
            _ => 10,
        };
        if experiment == Experiment::MatrixCompletion {
            // A shard holds a quarter of the users but every item, so full
            // surrogate solves overshoot along rarely rated items.
            ilea.inner.max_steps = 20;
        }
        Self {
            experiment,
            n: 100_000,
            d: 100,
            r: 10,
            lambda: 0.1,
            workers: 4,
            kappa: 2.0,
            trials: 20,
            seed: 0,
            ilea,
            transport: TransportKind::InProc,
            socket_addr: "127.0.0.1:0".into(),
            round_timeout: crate::comm::DEFAULT_ROUND_TIMEOUT,
            ratings: None,
            center_ratings: true,
            out: None,
            checkpoint: None,
            wallclock: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(IleaError::Config(msg));
        if self.workers == 0 {
            return bad("workers must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        match self.experiment {
            Experiment::FrechetExtrinsic | Experiment::FrechetIntrinsic => {
                if self.n < self.workers {
                    return bad(format!("N = {} is smaller than m = {}", self.n, self.workers));
                }
                if self.d == 0 {
                    return bad("d must be at least 1".into());
                }
            }
            Experiment::MatrixCompletion => {
                if self.r == 0 {
                    return bad("r must be at least 1".into());
                }
            }
            Experiment::GradCheck => {}
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa must be >= 0, got {}", self.kappa));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        self.ilea.validate()
    }

    /// Reads a `key = value` file. `#` starts a comment. The `experiment`
    /// key is required and fixes the defaults the other keys override.
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                IleaError::Config(format!("line {}: expected key = value", idx + 1))
            })?;
            pairs.push((idx + 1, key.trim().to_string(), value.trim().to_string()));
        }
        let experiment = pairs
            .iter()
            .find(|(_, k, _)| k == "experiment")
            .map(|(_, _, v)| v.parse::<Experiment>())
            .transpose()?
            .ok_or_else(|| IleaError::Config("missing experiment key".into()))?;
        let mut cfg = Self::new(experiment);
        for (line, key, value) in &pairs {
            cfg.set(key, value)
                .map_err(|e| IleaError::Config(format!("line {line}: {e}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one option by its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: fmt::Display,
        {
            value
                .parse::<T>()
                .map_err(|e| IleaError::Config(format!("{key}: cannot parse {value:?}: {e}")))
        }
        match key {
            "experiment" => self.experiment = value.parse()?,
            "N" | "n" => self.n = num(key, value)?,
            "d" => self.d = num(key, value)?,
            "r" => self.r = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "m" | "workers" => self.workers = num(key, value)?,
            "kappa" => self.kappa = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "T" | "outer_iters" => self.ilea.outer_iters = num(key, value)?,
            "inner_max_steps" => self.ilea.inner.max_steps = num(key, value)?,
            "inner_grad_tol" => self.ilea.inner.grad_tol = num(key, value)?,
            "inner_relative_tol" => self.ilea.inner.relative_tol = num(key, value)?,
            "armijo_initial_step" => self.ilea.inner.armijo.initial_step = num(key, value)?,
            "armijo_beta" => self.ilea.inner.armijo.beta = num(key, value)?,
            "armijo_sigma" => self.ilea.inner.armijo.sigma = num(key, value)?,
            "armijo_max_backtracks" => self.ilea.inner.armijo.max_backtracks = num(key, value)?,
            "schedule" => self.ilea.schedule = value.parse::<Schedule>()?,
            "transport" => self.transport = value.parse()?,
            "socket_addr" => self.socket_addr = value.to_string(),
            "round_timeout_s" => {
                self.round_timeout = Duration::from_secs_f64(num::<f64>(key, value)?)
            }
            "ratings" => self.ratings = Some(PathBuf::from(value)),
            "center_ratings" => self.center_ratings = num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            "wallclock" => self.wallclock = num(key, value)?,
            _ => return Err(IleaError::Config(format!("unknown key {key:?}"))),
        }
        self.ilea.seed = self.seed;
        Ok(())
    }
}
