//! Canonical exponential families for scalar observations.
//!
//! A member is written `p(y, eta) = h(y) exp(<eta, T(y)> - A(eta))` with natural
//! parameter `eta`, sufficient statistic `T`, log-normalizer `A` and carrier `h`.
//! The gradient of `A` maps natural parameters to mean parameters `E[T(Y)]`; for
//! a full-rank family it is one-to-one and its inverse `psi` turns the in-region
//! sample mean of `T` into the maximum-likelihood natural parameter.
//!
//! Three members ship: [`Gaussian`] (k = 2), [`Poisson`] (k = 1) and
//! [`Rayleigh`] (k = 1). New members implement [`ExpFamily`].

use std::f64::consts::PI;
use std::fmt;
use std::ops::Deref;
use std::sync::OnceLock;

use rand::RngCore;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Largest parameter dimension among the shipped families.
pub const MAX_K: usize = 2;

/// Small fixed-capacity real vector holding `k <= MAX_K` components.
#[derive(Clone, Copy, PartialEq)]
pub struct ParamVec {
    vals: [f64; MAX_K],
    len: usize,
}

impl ParamVec {
    pub fn zeros(k: usize) -> Self {
        assert!(k <= MAX_K, "parameter dimension {k} exceeds {MAX_K}");
        ParamVec {
            vals: [0.0; MAX_K],
            len: k,
        }
    }

    pub fn scalar(v: f64) -> Self {
        ParamVec {
            vals: [v, 0.0],
            len: 1,
        }
    }

    pub fn pair(a: f64, b: f64) -> Self {
        ParamVec {
            vals: [a, b],
            len: 2,
        }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let mut p = ParamVec::zeros(v.len());
        p.vals[..v.len()].copy_from_slice(v);
        p
    }

    pub fn dot(&self, other: &ParamVec) -> f64 {
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn add_assign(&mut self, other: &ParamVec) {
        for i in 0..self.len {
            self.vals[i] += other.vals[i];
        }
    }

    pub fn sub_assign(&mut self, other: &ParamVec) {
        for i in 0..self.len {
            self.vals[i] -= other.vals[i];
        }
    }

    pub fn scaled(&self, s: f64) -> ParamVec {
        let mut out = *self;
        for v in &mut out.vals[..self.len] {
            *v *= s;
        }
        out
    }
}

impl Deref for ParamVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.vals[..self.len]
    }
}

impl fmt::Debug for ParamVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

/// Lower bounds applied to region moments so that `psi` stays defined when a
/// region momentarily becomes constant or tiny.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentFloor {
    /// Minimum variance (Gaussian).
    pub variance: f64,
    /// Minimum mean of the sufficient statistic (Poisson: `y`, Rayleigh: `y^2`).
    pub mean_t: f64,
    /// Minimum mean of `y` (Rayleigh moments estimator).
    pub mean_y: f64,
}

impl MomentFloor {
    /// Relative size of every floor with respect to the global image moments.
    pub const RELATIVE: f64 = 1e-6;
    const ABSOLUTE: f64 = 1e-12;

    /// Floors derived from whole-image statistics.
    pub fn from_global(global: &RegionStats) -> Self {
        let n = global.count.max(1) as f64;
        let mean_y = global.sum_y / n;
        let var = (global.sum_y2 / n - mean_y * mean_y).max(0.0);
        let mean_t = if global.sum_t.is_empty() {
            mean_y
        } else {
            global.sum_t[global.sum_t.len() - 1] / n
        };
        MomentFloor {
            variance: (Self::RELATIVE * var).max(Self::ABSOLUTE),
            mean_t: (Self::RELATIVE * mean_t.abs()).max(Self::ABSOLUTE),
            mean_y: (Self::RELATIVE * mean_y.abs()).max(Self::ABSOLUTE),
        }
    }

    /// No flooring beyond the absolute minimum.
    pub fn none() -> Self {
        MomentFloor {
            variance: Self::ABSOLUTE,
            mean_t: Self::ABSOLUTE,
            mean_y: Self::ABSOLUTE,
        }
    }
}

/// Behaviour shared by every canonical exponential family over scalar
/// observations.
pub trait ExpFamily {
    fn name(&self) -> &'static str;

    /// Parameter dimension `k`.
    fn dim(&self) -> usize;

    /// Maps a raw observation onto the support, or fails if it lies outside.
    /// Poisson rounds to the nearest non-negative integer here.
    fn canonicalize(&self, y: f64) -> Result<f64>;

    /// Forces an arbitrary real onto the support (used when a model is applied
    /// to data it did not generate). `scale` is a typical magnitude of the data.
    fn project_to_support(&self, y: f64, scale: f64) -> f64;

    /// `T(y)` for a canonical observation.
    fn stat_unchecked(&self, y: f64) -> ParamVec;

    /// `log h(y)` for a canonical observation.
    fn log_carrier_unchecked(&self, y: f64) -> f64;

    fn check_eta(&self, eta: &[f64]) -> Result<()>;

    /// `A(eta)`, assuming `eta` is valid.
    fn log_normalizer_unchecked(&self, eta: &[f64]) -> f64;

    /// `grad A(eta) = E[T(Y)]`, assuming `eta` is valid.
    fn mean_of_stat_unchecked(&self, eta: &[f64]) -> ParamVec;

    /// `psi`: the inverse of `grad A`. Fails with a degenerate-region error when
    /// `mu` is outside the image of `grad A`.
    fn natural_from_mean(&self, mu: &[f64]) -> Result<ParamVec>;

    /// Clamps a mean parameter into the interior of the image of `grad A`.
    fn floor_mean(&self, mu: ParamVec, floor: &MomentFloor) -> ParamVec;

    /// One draw from `p(., eta)`, assuming `eta` is valid.
    fn sample_unchecked(&self, eta: &[f64], rng: &mut dyn RngCore) -> f64;

    /// Natural parameters from the conventional ones
    /// (Gaussian: mean, variance; Poisson: rate; Rayleigh: scale).
    fn natural_from_conventional(&self, params: &[f64]) -> Result<ParamVec>;

    fn conventional_from_natural(&self, eta: &[f64]) -> Result<ParamVec>;

    fn sufficient_stat(&self, y: f64) -> Result<ParamVec> {
        Ok(self.stat_unchecked(self.canonicalize(y)?))
    }

    fn log_normalizer(&self, eta: &[f64]) -> Result<f64> {
        self.check_eta(eta)?;
        Ok(self.log_normalizer_unchecked(eta))
    }

    fn mean_of_stat(&self, eta: &[f64]) -> Result<ParamVec> {
        self.check_eta(eta)?;
        Ok(self.mean_of_stat_unchecked(eta))
    }

    fn log_pdf(&self, y: f64, eta: &[f64]) -> Result<f64> {
        let y = self.canonicalize(y)?;
        self.check_eta(eta)?;
        let t = self.stat_unchecked(y);
        Ok(self.log_carrier_unchecked(y) + dot(eta, &t) - self.log_normalizer_unchecked(eta))
    }

    fn sample(&self, eta: &[f64], rng: &mut dyn RngCore) -> Result<f64> {
        self.check_eta(eta)?;
        Ok(self.sample_unchecked(eta, rng))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_len(family: &'static str, eta: &[f64], k: usize) -> Result<()> {
    if eta.len() != k {
        return Err(Error::Parameter {
            family,
            reason: format!("expected {k} components, got {}", eta.len()),
        });
    }
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter {
            family,
            reason: "non-finite component".into(),
        });
    }
    Ok(())
}

/// Uniform draw on `(0, 1]`.
#[inline]
pub(crate) fn uniform_open0(rng: &mut dyn RngCore) -> f64 {
    // 53 random bits mapped to (0, 1].
    ((rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw on `[0, 1)`.
#[inline]
fn uniform(rng: &mut dyn RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

const LN_FACT_TABLE: usize = 1024;

/// `log(n!)`, tabulated for small `n`.
pub fn ln_factorial(n: f64) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE);
        let mut acc = 0.0f64;
        t.push(0.0);
        for i in 1..LN_FACT_TABLE {
            acc += (i as f64).ln();
            t.push(acc);
        }
        t
    });
    if n >= 0.0 && n < LN_FACT_TABLE as f64 && n.fract() == 0.0 {
        table[n as usize]
    } else {
        ln_gamma(n + 1.0)
    }
}

/// Normal family with unknown mean and variance.
///
/// `eta = (mu / s2, -1 / (2 s2))`, `T = (y, y^2)`, `h = 1` with the `2 pi`
/// factor folded into `A`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Gaussian;

impl ExpFamily for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn dim(&self) -> usize {
        2
    }

    fn canonicalize(&self, y: f64) -> Result<f64> {
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::Domain {
                family: self.name(),
                value: y,
            })
        }
    }

    fn project_to_support(&self, y: f64, _scale: f64) -> f64 {
        y
    }

    fn stat_unchecked(&self, y: f64) -> ParamVec {
        ParamVec::pair(y, y * y)
    }

    fn log_carrier_unchecked(&self, _y: f64) -> f64 {
        0.0
    }

    fn check_eta(&self, eta: &[f64]) -> Result<()> {
        check_len(self.name(), eta, 2)?;
        if eta[1] >= 0.0 {
            return Err(Error::Parameter {
                family: self.name(),
                reason: format!("second natural parameter must be negative, got {}", eta[1]),
            });
        }
        Ok(())
    }

    fn log_normalizer_unchecked(&self, eta: &[f64]) -> f64 {
        let (e1, e2) = (eta[0], eta[1]);
        -e1 * e1 / (4.0 * e2) - 0.5 * (-2.0 * e2).ln() + 0.5 * (2.0 * PI).ln()
    }

    fn mean_of_stat_unchecked(&self, eta: &[f64]) -> ParamVec {
        let (e1, e2) = (eta[0], eta[1]);
        let mean = -e1 / (2.0 * e2);
        let var = -1.0 / (2.0 * e2);
        ParamVec::pair(mean, mean * mean + var)
    }

    fn natural_from_mean(&self, mu: &[f64]) -> Result<ParamVec> {
        check_len(self.name(), mu, 2)?;
        let var = mu[1] - mu[0] * mu[0];
        if !(var > 0.0) {
            return Err(Error::DegenerateRegion(format!(
                "gaussian variance {var} is not positive"
            )));
        }
        Ok(ParamVec::pair(mu[0] / var, -0.5 / var))
    }

    fn floor_mean(&self, mu: ParamVec, floor: &MomentFloor) -> ParamVec {
        let var = mu[1] - mu[0] * mu[0];
        if var >= floor.variance {
            mu
        } else {
            ParamVec::pair(mu[0], mu[0] * mu[0] + floor.variance)
        }
    }

    fn sample_unchecked(&self, eta: &[f64], rng: &mut dyn RngCore) -> f64 {
        let var = -0.5 / eta[1];
        let mean = eta[0] * var;
        // Box-Muller, cosine branch.
        let u1 = uniform_open0(rng);
        let u2 = uniform(rng);
        mean + var.sqrt() * (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    fn natural_from_conventional(&self, params: &[f64]) -> Result<ParamVec> {
        check_len(self.name(), params, 2)?;
        let (mean, var) = (params[0], params[1]);
        if !(var > 0.0) {
            return Err(Error::Parameter {
                family: self.name(),
                reason: format!("variance must be positive, got {var}"),
            });
        }
        Ok(ParamVec::pair(mean / var, -0.5 / var))
    }

    fn conventional_from_natural(&self, eta: &[f64]) -> Result<ParamVec> {
        self.check_eta(eta)?;
        let var = -0.5 / eta[1];
        Ok(ParamVec::pair(eta[0] * var, var))
    }
}

/// Poisson counts. `eta = log(lambda)`, `T = y`, `A = exp(eta)`, `h = 1 / y!`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Poisson;

impl ExpFamily for Poisson {
    fn name(&self) -> &'static str {
        "poisson"
    }

    fn dim(&self) -> usize {
        1
    }

    fn canonicalize(&self, y: f64) -> Result<f64> {
        if !y.is_finite() || y < -0.5 {
            return Err(Error::Domain {
                family: self.name(),
                value: y,
            });
        }
        Ok(y.round().max(0.0))
    }

    fn project_to_support(&self, y: f64, _scale: f64) -> f64 {
        if y.is_finite() {
            y.round().max(0.0)
        } else {
            0.0
        }
    }

    fn stat_unchecked(&self, y: f64) -> ParamVec {
        ParamVec::scalar(y)
    }

    fn log_carrier_unchecked(&self, y: f64) -> f64 {
        -ln_factorial(y)
    }

    fn check_eta(&self, eta: &[f64]) -> Result<()> {
        check_len(self.name(), eta, 1)
    }

    fn log_normalizer_unchecked(&self, eta: &[f64]) -> f64 {
        eta[0].exp()
    }

    fn mean_of_stat_unchecked(&self, eta: &[f64]) -> ParamVec {
        ParamVec::scalar(eta[0].exp())
    }

    fn natural_from_mean(&self, mu: &[f64]) -> Result<ParamVec> {
        check_len(self.name(), mu, 1)?;
        if !(mu[0] > 0.0) {
            return Err(Error::DegenerateRegion(format!(
                "poisson mean {} is not positive",
                mu[0]
            )));
        }
        Ok(ParamVec::scalar(mu[0].ln()))
    }

    fn floor_mean(&self, mu: ParamVec, floor: &MomentFloor) -> ParamVec {
        ParamVec::scalar(mu[0].max(floor.mean_t))
    }

    fn sample_unchecked(&self, eta: &[f64], rng: &mut dyn RngCore) -> f64 {
        let lambda = eta[0].exp();
        if lambda <= 30.0 {
            poisson_knuth(lambda, rng)
        } else {
            poisson_ptrs(lambda, rng)
        }
    }

    fn natural_from_conventional(&self, params: &[f64]) -> Result<ParamVec> {
        check_len(self.name(), params, 1)?;
        if !(params[0] > 0.0) {
            return Err(Error::Parameter {
                family: self.name(),
                reason: format!("rate must be positive, got {}", params[0]),
            });
        }
        Ok(ParamVec::scalar(params[0].ln()))
    }

    fn conventional_from_natural(&self, eta: &[f64]) -> Result<ParamVec> {
        self.check_eta(eta)?;
        Ok(ParamVec::scalar(eta[0].exp()))
    }
}

fn poisson_knuth(lambda: f64, rng: &mut dyn RngCore) -> f64 {
    let limit = (-lambda).exp();
    let mut k = 0u64;
    let mut p = uniform_open0(rng);
    while p > limit {
        k += 1;
        p *= uniform_open0(rng);
    }
    k as f64
}

/// Transformed rejection with squeeze (Hoermann's PTRS), for `lambda > 10`.
fn poisson_ptrs(lambda: f64, rng: &mut dyn RngCore) -> f64 {
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = uniform(rng) - 0.5;
        let v = uniform_open0(rng);
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln()
            <= -lambda + k * loglam - ln_factorial(k)
        {
            return k;
        }
    }
}

/// Rayleigh law `p(y) = y / theta^2 exp(-y^2 / (2 theta^2))`.
///
/// `eta = -1 / (2 theta^2)`, `T = y^2`, `A = -log(-2 eta)`, `h = y`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Rayleigh;

impl ExpFamily for Rayleigh {
    fn name(&self) -> &'static str {
        "rayleigh"
    }

    fn dim(&self) -> usize {
        1
    }

    fn canonicalize(&self, y: f64) -> Result<f64> {
        if y.is_finite() && y > 0.0 {
            Ok(y)
        } else {
            Err(Error::Domain {
                family: self.name(),
                value: y,
            })
        }
    }

    fn project_to_support(&self, y: f64, scale: f64) -> f64 {
        let min = (MomentFloor::RELATIVE * scale.abs()).max(f64::MIN_POSITIVE);
        if y.is_finite() {
            y.max(min)
        } else {
            min
        }
    }

    fn stat_unchecked(&self, y: f64) -> ParamVec {
        ParamVec::scalar(y * y)
    }

    fn log_carrier_unchecked(&self, y: f64) -> f64 {
        y.ln()
    }

    fn check_eta(&self, eta: &[f64]) -> Result<()> {
        check_len(self.name(), eta, 1)?;
        if eta[0] >= 0.0 {
            return Err(Error::Parameter {
                family: self.name(),
                reason: format!("natural parameter must be negative, got {}", eta[0]),
            });
        }
        Ok(())
    }

    fn log_normalizer_unchecked(&self, eta: &[f64]) -> f64 {
        -(-2.0 * eta[0]).ln()
    }

    fn mean_of_stat_unchecked(&self, eta: &[f64]) -> ParamVec {
        ParamVec::scalar(-1.0 / eta[0])
    }

    fn natural_from_mean(&self, mu: &[f64]) -> Result<ParamVec> {
        check_len(self.name(), mu, 1)?;
        if !(mu[0] > 0.0) {
            return Err(Error::DegenerateRegion(format!(
                "rayleigh second moment {} is not positive",
                mu[0]
            )));
        }
        Ok(ParamVec::scalar(-1.0 / mu[0]))
    }

    fn floor_mean(&self, mu: ParamVec, floor: &MomentFloor) -> ParamVec {
        ParamVec::scalar(mu[0].max(floor.mean_t))
    }

    fn sample_unchecked(&self, eta: &[f64], rng: &mut dyn RngCore) -> f64 {
        let theta = (-0.5 / eta[0]).sqrt();
        rayleigh_from_uniform(theta, uniform_open0(rng))
    }

    fn natural_from_conventional(&self, params: &[f64]) -> Result<ParamVec> {
        check_len(self.name(), params, 1)?;
        let theta = params[0];
        if !(theta > 0.0) {
            return Err(Error::Parameter {
                family: self.name(),
                reason: format!("scale must be positive, got {theta}"),
            });
        }
        Ok(ParamVec::scalar(-0.5 / (theta * theta)))
    }

    fn conventional_from_natural(&self, eta: &[f64]) -> Result<ParamVec> {
        self.check_eta(eta)?;
        Ok(ParamVec::scalar((-0.5 / eta[0]).sqrt()))
    }
}

/// Inverse-CDF transform: `theta * sqrt(-2 ln u)` for `u` in `(0, 1]`.
pub fn rayleigh_from_uniform(theta: f64, u: f64) -> f64 {
    theta * (-2.0 * u.ln()).sqrt()
}

/// The shipped family members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Gaussian,
    Poisson,
    Rayleigh,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Gaussian, Family::Poisson, Family::Rayleigh];

    fn member(&self) -> &'static dyn ExpFamily {
        match self {
            Family::Gaussian => &Gaussian,
            Family::Poisson => &Poisson,
            Family::Rayleigh => &Rayleigh,
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gauss" | "gaussian" | "normal" => Some(Family::Gaussian),
            "poisson" => Some(Family::Poisson),
            "rayleigh" => Some(Family::Rayleigh),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl ExpFamily for Family {
    fn name(&self) -> &'static str {
        self.member().name()
    }
    fn dim(&self) -> usize {
        self.member().dim()
    }
    fn canonicalize(&self, y: f64) -> Result<f64> {
        self.member().canonicalize(y)
    }
    fn project_to_support(&self, y: f64, scale: f64) -> f64 {
        self.member().project_to_support(y, scale)
    }
    fn stat_unchecked(&self, y: f64) -> ParamVec {
        self.member().stat_unchecked(y)
    }
    fn log_carrier_unchecked(&self, y: f64) -> f64 {
        self.member().log_carrier_unchecked(y)
    }
    fn check_eta(&self, eta: &[f64]) -> Result<()> {
        self.member().check_eta(eta)
    }
    fn log_normalizer_unchecked(&self, eta: &[f64]) -> f64 {
        self.member().log_normalizer_unchecked(eta)
    }
    fn mean_of_stat_unchecked(&self, eta: &[f64]) -> ParamVec {
        self.member().mean_of_stat_unchecked(eta)
    }
    fn natural_from_mean(&self, mu: &[f64]) -> Result<ParamVec> {
        self.member().natural_from_mean(mu)
    }
    fn floor_mean(&self, mu: ParamVec, floor: &MomentFloor) -> ParamVec {
        self.member().floor_mean(mu, floor)
    }
    fn sample_unchecked(&self, eta: &[f64], rng: &mut dyn RngCore) -> f64 {
        self.member().sample_unchecked(eta, rng)
    }
    fn natural_from_conventional(&self, params: &[f64]) -> Result<ParamVec> {
        self.member().natural_from_conventional(params)
    }
    fn conventional_from_natural(&self, eta: &[f64]) -> Result<ParamVec> {
        self.member().conventional_from_natural(eta)
    }
}

/// How a region's natural parameter is obtained from its pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    Ml,
    MomentsRayleigh,
    /// Plain sample mean of `y`, stored as a one-component `eta_hat`
    /// (piecewise-constant model; no family involved).
    SampleMean,
}

/// Running sums over the pixels of one region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStats {
    pub count: usize,
    pub sum_y: f64,
    pub sum_y2: f64,
    pub sum_t: ParamVec,
}

impl RegionStats {
    pub fn new(k: usize) -> Self {
        RegionStats {
            count: 0,
            sum_y: 0.0,
            sum_y2: 0.0,
            sum_t: ParamVec::zeros(k),
        }
    }

    /// Adds one pixel with raw value `y` and sufficient statistic `t`.
    #[inline]
    pub fn push(&mut self, y: f64, t: &ParamVec) {
        self.count += 1;
        self.sum_y += y;
        self.sum_y2 += y * y;
        self.sum_t.add_assign(t);
    }

    #[inline]
    pub fn remove(&mut self, y: f64, t: &ParamVec) {
        self.count -= 1;
        self.sum_y -= y;
        self.sum_y2 -= y * y;
        self.sum_t.sub_assign(t);
    }

    /// Accumulates canonicalized observations under `family`.
    pub fn from_values<F: ExpFamily + ?Sized>(family: &F, ys: &[f64]) -> Result<Self> {
        let mut s = RegionStats::new(family.dim());
        for &y in ys {
            let yc = family.canonicalize(y)?;
            s.push(yc, &family.stat_unchecked(yc));
        }
        Ok(s)
    }

    pub fn mean_y(&self) -> f64 {
        self.sum_y / self.count as f64
    }

    pub fn mean_y2(&self) -> f64 {
        self.sum_y2 / self.count as f64
    }
}

/// A fitted region: its sufficient statistics and the natural-parameter estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionEstimate {
    pub stats: RegionStats,
    pub eta_hat: ParamVec,
    pub estimator: Estimator,
}

impl RegionEstimate {
    pub fn count(&self) -> usize {
        self.stats.count
    }

    pub fn sum_t(&self) -> &ParamVec {
        &self.stats.sum_t
    }

    /// Fits `stats` with the chosen estimator. With `floor = None` a degenerate
    /// region is an error; otherwise the region moments are clamped first.
    pub fn fit(
        family: Family,
        stats: RegionStats,
        estimator: Estimator,
        floor: Option<&MomentFloor>,
    ) -> Result<Self> {
        let eta_hat = match estimator {
            Estimator::Ml => match floor {
                None => ml_estimate(&family, &stats.sum_t, stats.count)?,
                Some(fl) => ml_estimate_floored(&family, &stats.sum_t, stats.count, fl)?,
            },
            Estimator::MomentsRayleigh => {
                if family != Family::Rayleigh {
                    return Err(Error::Parameter {
                        family: family.name(),
                        reason: "the moments estimator is defined for rayleigh only".into(),
                    });
                }
                let sum_y = match floor {
                    None => stats.sum_y,
                    Some(fl) => stats.sum_y.max(fl.mean_y * stats.count as f64),
                };
                let theta = moments_estimate_rayleigh(sum_y, stats.count)?;
                Rayleigh.natural_from_conventional(&[theta])?
            }
            Estimator::SampleMean => {
                if stats.count == 0 {
                    return Err(Error::DegenerateRegion("empty region".into()));
                }
                ParamVec::scalar(stats.mean_y())
            }
        };
        Ok(RegionEstimate {
            stats,
            eta_hat,
            estimator,
        })
    }
}

/// Maximum-likelihood natural parameter: `psi(sum_t / count)`.
pub fn ml_estimate<F: ExpFamily + ?Sized>(
    family: &F,
    sum_t: &[f64],
    count: usize,
) -> Result<ParamVec> {
    if count < family.dim() {
        return Err(Error::DegenerateRegion(format!(
            "{} pixels cannot determine {} parameters",
            count,
            family.dim()
        )));
    }
    let mu = ParamVec::from_slice(sum_t).scaled(1.0 / count as f64);
    family.natural_from_mean(&mu)
}

/// [`ml_estimate`] after clamping the sample moments by `floor`.
pub fn ml_estimate_floored<F: ExpFamily + ?Sized>(
    family: &F,
    sum_t: &[f64],
    count: usize,
    floor: &MomentFloor,
) -> Result<ParamVec> {
    if count == 0 {
        return Err(Error::DegenerateRegion("empty region".into()));
    }
    let mu = ParamVec::from_slice(sum_t).scaled(1.0 / count as f64);
    family.natural_from_mean(&family.floor_mean(mu, floor))
}

/// Rayleigh scale by the method of moments: `sqrt(2 / pi) * mean(y)`.
pub fn moments_estimate_rayleigh(sum_y: f64, count: usize) -> Result<f64> {
    if count == 0 {
        return Err(Error::DegenerateRegion("empty region".into()));
    }
    if !(sum_y > 0.0) {
        return Err(Error::DegenerateRegion(format!(
            "rayleigh moments estimate needs a positive sum, got {sum_y}"
        )));
    }
    Ok((2.0 / PI).sqrt() * sum_y / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn log_pdf_reference_values() {
        let r = Rayleigh.log_pdf(1.0, &[-0.5]).unwrap();
        assert!(close(r, -0.5, 1e-14));
        let p = Poisson.log_pdf(0.0, &[0.0]).unwrap();
        assert!(close(p, -1.0, 1e-14));
        let eta = Gaussian.natural_from_conventional(&[0.0, 1.0]).unwrap();
        let g = Gaussian.log_pdf(0.0, &eta).unwrap();
        assert!(close(g, -0.5 * (2.0 * PI).ln(), 1e-14));
        assert!(close(g, -0.9189385332, 1e-9));
    }

    #[test]
    fn gaussian_log_pdf_matches_density_formula() {
        for &(m, v) in &[(0.0, 1.0), (3.0, 0.5), (-2.0, 7.0)] {
            let eta = Gaussian.natural_from_conventional(&[m, v]).unwrap();
            for i in -20..=20 {
                let y = m + i as f64 * 0.37;
                let expect = -0.5 * (2.0 * PI * v).ln() - (y - m) * (y - m) / (2.0 * v);
                assert!(close(Gaussian.log_pdf(y, &eta).unwrap(), expect, 1e-12));
            }
        }
    }

    #[test]
    fn sufficient_statistics() {
        assert_eq!(&*Rayleigh.sufficient_stat(3.0).unwrap(), &[9.0]);
        assert_eq!(&*Gaussian.sufficient_stat(2.0).unwrap(), &[2.0, 4.0]);
        assert_eq!(&*Poisson.sufficient_stat(5.0).unwrap(), &[5.0]);
    }

    #[test]
    fn support_and_parameter_errors() {
        assert!(matches!(Rayleigh.log_pdf(0.0, &[-0.5]), Err(Error::Domain { .. })));
        assert!(matches!(Rayleigh.log_pdf(-1.0, &[-0.5]), Err(Error::Domain { .. })));
        assert!(matches!(Poisson.log_pdf(-3.0, &[0.0]), Err(Error::Domain { .. })));
        assert!(matches!(Gaussian.log_pdf(f64::NAN, &[0.0, -0.5]), Err(Error::Domain { .. })));
        assert!(matches!(Rayleigh.log_pdf(1.0, &[0.5]), Err(Error::Parameter { .. })));
        assert!(matches!(Gaussian.log_pdf(1.0, &[0.0, 0.0]), Err(Error::Parameter { .. })));
        assert!(matches!(Poisson.log_pdf(1.0, &[0.0, 1.0]), Err(Error::Parameter { .. })));
    }

    #[test]
    fn poisson_rounds_real_valued_input() {
        let eta = [5f64.ln()];
        assert_eq!(
            Poisson.log_pdf(3.4, &eta).unwrap(),
            Poisson.log_pdf(3.0, &eta).unwrap()
        );
        assert_eq!(
            Poisson.log_pdf(-0.2, &eta).unwrap(),
            Poisson.log_pdf(0.0, &eta).unwrap()
        );
    }

    #[test]
    fn ml_reference_values() {
        // constant y = sqrt(2): mean of y^2 is 2, theta = 1
        let s = RegionStats::from_values(&Rayleigh, &[2f64.sqrt(); 10]).unwrap();
        let eta = ml_estimate(&Rayleigh, &s.sum_t, s.count).unwrap();
        assert!(close(eta[0], -0.5, 1e-12));

        let eta = ml_estimate(&Poisson, &[50.0], 10).unwrap();
        assert!(close(eta[0], 5f64.ln(), 1e-14));

        let n = 8usize;
        let eta = ml_estimate(&Gaussian, &[0.0, n as f64 * 4.0], n).unwrap();
        let conv = Gaussian.conventional_from_natural(&eta).unwrap();
        assert!(close(conv[0], 0.0, 1e-14) && close(conv[1], 4.0, 1e-12));
    }

    #[test]
    fn ml_degenerate_regions() {
        let s = RegionStats::from_values(&Gaussian, &[3.0; 5]).unwrap();
        assert!(matches!(
            ml_estimate(&Gaussian, &s.sum_t, s.count),
            Err(Error::DegenerateRegion(_))
        ));
        assert!(matches!(
            ml_estimate(&Poisson, &[0.0], 4),
            Err(Error::DegenerateRegion(_))
        ));
        assert!(matches!(
            ml_estimate(&Gaussian, &[1.0, 1.0], 1),
            Err(Error::DegenerateRegion(_))
        ));
        let floor = MomentFloor {
            variance: 1e-3,
            mean_t: 1e-3,
            mean_y: 1e-3,
        };
        let eta = ml_estimate_floored(&Gaussian, &s.sum_t, s.count, &floor).unwrap();
        let conv = Gaussian.conventional_from_natural(&eta).unwrap();
        assert!(close(conv[0], 3.0, 1e-12) && close(conv[1], 1e-3, 1e-12));
        let eta = ml_estimate_floored(&Poisson, &[0.0], 4, &floor).unwrap();
        assert!(close(eta[0], 1e-3f64.ln(), 1e-12));
    }

    #[test]
    fn moments_estimator_values() {
        let t = moments_estimate_rayleigh(7.0, 7).unwrap();
        assert!(close(t, 0.7978845608, 1e-9));
        let n = 13;
        let t = moments_estimate_rayleigh(n as f64 * (PI / 2.0).sqrt(), n).unwrap();
        assert!(close(t, 1.0, 1e-14));
        assert!(moments_estimate_rayleigh(0.0, 3).is_err());
        assert!(moments_estimate_rayleigh(-1.0, 3).is_err());
    }

    #[test]
    fn moments_estimator_requires_rayleigh() {
        let s = RegionStats::from_values(&Poisson, &[1.0, 2.0]).unwrap();
        assert!(RegionEstimate::fit(Family::Poisson, s, Estimator::MomentsRayleigh, None).is_err());
    }

    #[test]
    fn ml_fit_matches_psi_of_mean() {
        let ys = [0.3, 1.2, 2.5, 0.9, 1.7];
        let s = RegionStats::from_values(&Rayleigh, &ys).unwrap();
        let est = RegionEstimate::fit(Family::Rayleigh, s, Estimator::Ml, None).unwrap();
        let mu = s.sum_t[0] / s.count as f64;
        assert_eq!(est.eta_hat[0], Rayleigh.natural_from_mean(&[mu]).unwrap()[0]);
    }

    #[test]
    fn rayleigh_inverse_cdf() {
        let y = rayleigh_from_uniform(1.0, (-0.5f64).exp());
        assert!(close(y, 1.0, 1e-14));
    }

    #[test]
    fn sample_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let eta = [4f64.ln()];
        let m: f64 = (0..n).map(|_| Poisson.sample(&eta, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((m - 4.0).abs() / 4.0 < 0.02, "poisson mean {m}");

        // rejection branch
        let eta = [80f64.ln()];
        let xs: Vec<f64> = (0..n).map(|_| Poisson.sample(&eta, &mut rng).unwrap()).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
        assert!((m - 80.0).abs() / 80.0 < 0.01, "poisson mean {m}");
        assert!((v - 80.0).abs() / 80.0 < 0.03, "poisson var {v}");
        assert!(xs.iter().all(|x| x.fract() == 0.0 && *x >= 0.0));

        let eta = Gaussian.natural_from_conventional(&[0.0, 1.0]).unwrap();
        let xs: Vec<f64> = (0..n).map(|_| Gaussian.sample(&eta, &mut rng).unwrap()).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
        assert!((v - 1.0).abs() < 0.03, "gaussian var {v}");
    }

    #[test]
    fn ln_factorial_table_matches_gamma() {
        for n in [0.0, 1.0, 5.0, 170.0, 1023.0, 1024.0, 5000.0] {
            assert!(close(ln_factorial(n), ln_gamma(n + 1.0), 1e-9 * (1.0 + ln_gamma(n + 1.0))));
        }
    }
}
