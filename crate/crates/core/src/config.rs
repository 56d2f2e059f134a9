//! Run configuration: a flat `key = value` file whose values can be
//! overridden from the command line. Every key has a default.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::energy::SpeedLaw;
use crate::error::{Error, Result};
use crate::expfam::{Estimator, ExpFamily, Family, ParamVec};
use crate::levelset::{EvolveConfig, Initialization};
use crate::synth::{BenchmarkSpec, Shape};

/// Region model selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    Family(Family),
    ChanVese,
}

impl ModelChoice {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "chanvese" | "chan-vese" | "cv" => Ok(ModelChoice::ChanVese),
            other => Family::parse(other)
                .map(ModelChoice::Family)
                .ok_or_else(|| Error::Spec(format!("unknown model '{s}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelChoice::Family(Family::Gaussian) => "gauss",
            ModelChoice::Family(Family::Poisson) => "poisson",
            ModelChoice::Family(Family::Rayleigh) => "rayleigh",
            ModelChoice::ChanVese => "chanvese",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub width: usize,
    pub height: usize,
    pub shapes: Vec<Shape>,
    /// Noise types; `generate` uses the first one.
    pub noise: Vec<Family>,
    pub poisson_bg: f64,
    pub rayleigh_bg: f64,
    /// Mean and variance of the Gaussian background.
    pub gaussian_bg: (f64, f64),
    pub target_d: f64,
    pub d_values: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub model: ModelChoice,
    pub estimator: Estimator,
    pub lambda: f64,
    pub dt: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub reinit_every: usize,
    pub converge_tol: usize,
    /// Automatic initialization; `None` lets each subcommand pick its own.
    pub init: Option<Initialization>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let evolve = EvolveConfig::default();
        RunConfig {
            width: 128,
            height: 128,
            shapes: BenchmarkSpec::default_shapes(),
            noise: vec![Family::Poisson, Family::Rayleigh],
            poisson_bg: 9.0,
            rayleigh_bg: 1.0,
            gaussian_bg: (100.0, 400.0),
            target_d: 0.5,
            d_values: vec![0.125, 0.25, 0.5, 1.0],
            realizations: 10,
            seed: 0,
            out: PathBuf::from("out"),
            model: ModelChoice::Family(Family::Poisson),
            estimator: Estimator::Ml,
            lambda: evolve.lambda,
            dt: evolve.dt,
            epsilon: evolve.epsilon,
            max_iter: evolve.max_iter,
            reinit_every: evolve.reinit_every,
            converge_tol: evolve.converge_tol,
            init: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Spec(format!("invalid value '{v}' for '{key}'")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str, sep: char) -> Result<Vec<T>> {
    v.split(sep)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

impl RunConfig {
    /// Every accepted key.
    pub const KEYS: &'static [&'static str] = &[
        "width",
        "height",
        "shapes",
        "noise",
        "poisson_bg",
        "rayleigh_bg",
        "gaussian_bg",
        "target_d",
        "d_values",
        "realizations",
        "seed",
        "out",
        "model",
        "estimator",
        "lambda",
        "dt",
        "epsilon",
        "max_iter",
        "reinit_every",
        "converge_tol",
        "init",
    ];

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "width" => self.width = parse_num(key, v)?,
            "height" => self.height = parse_num(key, v)?,
            "shapes" => {
                self.shapes = v
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(Shape::parse)
                    .collect::<Result<_>>()?
            }
            "noise" => {
                self.noise = v
                    .split(',')
                    .map(|s| {
                        Family::parse(s).ok_or_else(|| Error::Spec(format!("unknown noise '{s}'")))
                    })
                    .collect::<Result<_>>()?;
                if self.noise.is_empty() {
                    return Err(Error::Spec("noise list is empty".into()));
                }
            }
            "poisson_bg" => self.poisson_bg = parse_num(key, v)?,
            "rayleigh_bg" => self.rayleigh_bg = parse_num(key, v)?,
            "gaussian_bg" => {
                let p: Vec<f64> = parse_list(key, v, ',')?;
                if p.len() != 2 {
                    return Err(Error::Spec("gaussian_bg takes 'mean,variance'".into()));
                }
                self.gaussian_bg = (p[0], p[1]);
            }
            "target_d" => self.target_d = parse_num(key, v)?,
            "d_values" => {
                self.d_values = parse_list(key, v, ',')?;
                if self.d_values.is_empty() {
                    return Err(Error::Spec("d_values is empty".into()));
                }
            }
            "realizations" => self.realizations = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "model" => self.model = ModelChoice::parse(v)?,
            "estimator" => {
                self.estimator = match v.to_ascii_lowercase().as_str() {
                    "ml" => Estimator::Ml,
                    "moments" | "mo" => Estimator::MomentsRayleigh,
                    _ => return Err(Error::Spec(format!("unknown estimator '{v}'"))),
                }
            }
            "lambda" => self.lambda = parse_num(key, v)?,
            "dt" => self.dt = parse_num(key, v)?,
            "epsilon" => self.epsilon = parse_num(key, v)?,
            "max_iter" => self.max_iter = parse_num(key, v)?,
            "reinit_every" => self.reinit_every = parse_num(key, v)?,
            "converge_tol" => self.converge_tol = parse_num(key, v)?,
            "init" => {
                self.init = match v {
                    "auto" => None,
                    other => Some(Initialization::parse(other)?),
                }
            }
            other => return Err(Error::Spec(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    /// Parses a configuration file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Spec(format!("line {}: expected key = value", ln + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Spec(format!("line {}: {e}", ln + 1)))?;
        }
        Ok(())
    }

    /// Serializes every key, so that the output parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "width = {}", self.width);
        let _ = writeln!(s, "height = {}", self.height);
        let shapes: Vec<String> = self.shapes.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(s, "shapes = {}", shapes.join(";"));
        let noise: Vec<&str> = self.noise.iter().map(|n| n.name()).collect();
        let _ = writeln!(s, "noise = {}", noise.join(","));
        let _ = writeln!(s, "poisson_bg = {}", self.poisson_bg);
        let _ = writeln!(s, "rayleigh_bg = {}", self.rayleigh_bg);
        let _ = writeln!(s, "gaussian_bg = {},{}", self.gaussian_bg.0, self.gaussian_bg.1);
        let _ = writeln!(s, "target_d = {}", self.target_d);
        let _ = writeln!(s, "d_values = {}", join(&self.d_values));
        let _ = writeln!(s, "realizations = {}", self.realizations);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "model = {}", self.model.name());
        let est = match self.estimator {
            Estimator::MomentsRayleigh => "moments",
            _ => "ml",
        };
        let _ = writeln!(s, "estimator = {est}");
        let _ = writeln!(s, "lambda = {}", self.lambda);
        let _ = writeln!(s, "dt = {}", self.dt);
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "max_iter = {}", self.max_iter);
        let _ = writeln!(s, "reinit_every = {}", self.reinit_every);
        let _ = writeln!(s, "converge_tol = {}", self.converge_tol);
        let init = self.init.map_or_else(|| "auto".to_string(), |i| i.to_string());
        let _ = writeln!(s, "init = {init}");
        s
    }

    pub fn speed_law(&self) -> Result<SpeedLaw> {
        match (self.model, self.estimator) {
            (ModelChoice::ChanVese, _) => Ok(SpeedLaw::ChanVese),
            (ModelChoice::Family(f), Estimator::MomentsRayleigh) => SpeedLaw::moments(f),
            (ModelChoice::Family(f), _) => Ok(SpeedLaw::MlLogLikelihood(f)),
        }
    }

    pub fn evolve_config(&self) -> Result<EvolveConfig> {
        let cfg = EvolveConfig {
            lambda: self.lambda,
            dt: self.dt,
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            reinit_every: self.reinit_every,
            converge_tol: self.converge_tol,
            speed_law: self.speed_law()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn background(&self, noise: Family) -> ParamVec {
        match noise {
            Family::Poisson => ParamVec::scalar(self.poisson_bg),
            Family::Rayleigh => ParamVec::scalar(self.rayleigh_bg),
            Family::Gaussian => ParamVec::pair(self.gaussian_bg.0, self.gaussian_bg.1),
        }
    }

    pub fn benchmark_spec(&self, noise: Family, target_d: f64) -> BenchmarkSpec {
        BenchmarkSpec {
            width: self.width,
            height: self.height,
            shapes: self.shapes.clone(),
            noise,
            bg_param: self.background(noise),
            target_d,
            realizations: self.realizations,
            base_seed: self.seed,
        }
    }
}
