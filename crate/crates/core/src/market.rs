//! Interest rate and risky-asset models, and their path simulation.
//!
//! Assets are carried as the return increments `dS/S_-` of their driving
//! semimartingale: geometric Brownian motion, exponential-Levy with
//! finite-activity jumps strictly above -1, and a diffusion whose squared
//! volatility follows a square-root (CIR) process. Asset jump times are
//! exact grid nodes, and every driver draws from its own random stream.

use rand::distr::OpenClosed01;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{require_finite, Error, Result};
use crate::stoch::{Grid, Increments};

/// Jump law of an exponential-Levy return driver; support must stay
/// strictly above -1 so asset prices remain positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum ReturnJumpLaw {
    /// Point mass at `size`, `size > -1`.
    Const { size: f64 },
    /// Uniform on `[lo, hi]`, `-1 < lo <= hi`.
    Uniform { lo: f64, hi: f64 },
    /// Density proportional to `(1+u)^{beta-1}` on `(-1, hi]`, `hi <= 0`;
    /// `beta` controls how much mass piles up against the bankruptcy
    /// boundary at -1.
    PowerFloor { beta: f64, hi: f64 },
}

impl ReturnJumpLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ReturnJumpLaw::Const { size } => {
                require_finite("jump.size", size)?;
                if !(size > -1.0) {
                    return Err(Error::invalid("jump.size", format!("{size} must be > -1")));
                }
            }
            ReturnJumpLaw::Uniform { lo, hi } => {
                require_finite("jump.lo", lo)?;
                require_finite("jump.hi", hi)?;
                if !(lo > -1.0 && hi >= lo) {
                    return Err(Error::invalid(
                        "jump.uniform",
                        format!("need -1 < lo <= hi, got [{lo}, {hi}]"),
                    ));
                }
            }
            ReturnJumpLaw::PowerFloor { beta, hi } => {
                require_finite("jump.beta", beta)?;
                require_finite("jump.hi", hi)?;
                if !(beta > 0.0) {
                    return Err(Error::invalid("jump.beta", format!("{beta} must be > 0")));
                }
                if !(hi > -1.0 && hi <= 0.0) {
                    return Err(Error::invalid(
                        "jump.hi",
                        format!("{hi} must lie in (-1, 0]"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ReturnJumpLaw::Const { size } => size,
            ReturnJumpLaw::Uniform { lo, hi } => {
                let u: f64 = rng.random();
                lo + (hi - lo) * u
            }
            ReturnJumpLaw::PowerFloor { beta, hi } => {
                // 1 + u = (1 + hi) v^{1/beta} with v uniform in (0, 1]
                let v: f64 = rng.sample(OpenClosed01);
                (1.0 + hi) * v.powf(1.0 / beta) - 1.0
            }
        }
    }

    /// `E (1 + J)^{-p}` when finite; `None` when the integral diverges at
    /// the -1 boundary.
    pub fn inverse_moment(&self, p: f64) -> Option<f64> {
        match *self {
            ReturnJumpLaw::Const { size } => Some((1.0 + size).powf(-p)),
            ReturnJumpLaw::Uniform { lo, hi } => {
                if hi == lo {
                    return Some((1.0 + lo).powf(-p));
                }
                let width = hi - lo;
                let (a, b) = (1.0 + lo, 1.0 + hi);
                if (p - 1.0).abs() < 1e-12 {
                    Some((b.ln() - a.ln()) / width)
                } else {
                    Some((b.powf(1.0 - p) - a.powf(1.0 - p)) / ((1.0 - p) * width))
                }
            }
            ReturnJumpLaw::PowerFloor { beta, hi } => {
                if beta <= p {
                    None
                } else {
                    Some(beta / (beta - p) * (1.0 + hi).powf(-p))
                }
            }
        }
    }
}

/// Square-root variance process parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirParams {
    /// Mean-reversion speed, > 0.
    pub kappa: f64,
    /// Long-run variance level, > 0.
    pub theta: f64,
    /// Volatility of variance, > 0.
    pub vol_of_vol: f64,
    /// Initial variance, >= 0.
    pub v0: f64,
}

impl CirParams {
    pub fn validate(&self) -> Result<()> {
        require_finite("cir.kappa", self.kappa)?;
        require_finite("cir.theta", self.theta)?;
        require_finite("cir.vol_of_vol", self.vol_of_vol)?;
        require_finite("cir.v0", self.v0)?;
        if !(self.kappa > 0.0) {
            return Err(Error::invalid(
                "cir.kappa",
                format!("{} must be > 0", self.kappa),
            ));
        }
        if !(self.theta > 0.0) {
            return Err(Error::invalid(
                "cir.theta",
                format!("{} must be > 0", self.theta),
            ));
        }
        if !(self.vol_of_vol > 0.0) {
            return Err(Error::invalid(
                "cir.vol_of_vol",
                format!("{} must be > 0", self.vol_of_vol),
            ));
        }
        if !(self.v0 >= 0.0) {
            return Err(Error::invalid(
                "cir.v0",
                format!("{} must be >= 0", self.v0),
            ));
        }
        Ok(())
    }
}

/// One risky asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AssetModel {
    /// Geometric Brownian motion with drift `mu` and volatility `sigma > 0`.
    Gbm { mu: f64, sigma: f64 },
    /// Exponential-Levy driver: drift, Gaussian part, and compound-Poisson
    /// jumps with support in (-1, inf).
    ExpLevy {
        drift: f64,
        sigma: f64,
        jump_rate: f64,
        jump: ReturnJumpLaw,
    },
    /// Diffusion with constant drift and CIR squared volatility.
    DiffusionSv { mu: f64, variance: CirParams },
}

impl AssetModel {
    pub fn validate(&self) -> Result<()> {
        require_finite("asset.drift", self.drift())?;
        match self {
            AssetModel::Gbm { sigma, .. } => {
                require_finite("gbm.sigma", *sigma)?;
                // sigma = 0 is tolerated as a degenerate test case; the
                // strategy formulas that divide by sigma^2 reject it.
                if !(*sigma >= 0.0) {
                    return Err(Error::invalid("gbm.sigma", format!("{sigma} must be >= 0")));
                }
                Ok(())
            }
            AssetModel::ExpLevy {
                sigma,
                jump_rate,
                jump,
                ..
            } => {
                require_finite("exp_levy.sigma", *sigma)?;
                require_finite("exp_levy.jump_rate", *jump_rate)?;
                if !(*sigma >= 0.0) {
                    return Err(Error::invalid(
                        "exp_levy.sigma",
                        format!("{sigma} must be >= 0"),
                    ));
                }
                if !(*jump_rate >= 0.0) {
                    return Err(Error::invalid(
                        "exp_levy.jump_rate",
                        format!("{jump_rate} must be >= 0"),
                    ));
                }
                jump.validate()
            }
            AssetModel::DiffusionSv { variance, .. } => variance.validate(),
        }
    }

    /// Drift of the return process (constant in all supported models).
    pub fn drift(&self) -> f64 {
        match self {
            AssetModel::Gbm { mu, .. } => *mu,
            AssetModel::ExpLevy { drift, .. } => *drift,
            AssetModel::DiffusionSv { mu, .. } => *mu,
        }
    }
}

/// Instantaneous interest rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateModel {
    Constant(f64),
    /// Right-continuous piecewise-constant: `values[k]` applies on
    /// `[times[k], times[k+1])`, with `times[0] = 0`.
    PiecewiseConstant {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl RateModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            RateModel::Constant(r) => {
                require_finite("rate", *r)?;
                if !(*r >= 0.0) {
                    return Err(Error::invalid("rate", format!("{r} must be >= 0")));
                }
                Ok(())
            }
            RateModel::PiecewiseConstant { times, values } => {
                if times.len() != values.len() || times.is_empty() {
                    return Err(Error::invalid(
                        "rate",
                        "times and values must be non-empty and equally long",
                    ));
                }
                if times[0] != 0.0 {
                    return Err(Error::invalid("rate", "first breakpoint must be t = 0"));
                }
                if !times.windows(2).all(|w| w[0] < w[1] && w[1].is_finite()) {
                    return Err(Error::invalid(
                        "rate",
                        "breakpoints must increase and be finite",
                    ));
                }
                for v in values {
                    require_finite("rate", *v)?;
                }
                if values.iter().any(|v| !(*v >= 0.0)) {
                    return Err(Error::invalid("rate", "rates must be >= 0"));
                }
                Ok(())
            }
        }
    }

    /// Breakpoints strictly inside (0, 1); these must become grid nodes.
    pub fn interior_breakpoints(&self) -> Vec<f64> {
        match self {
            RateModel::Constant(_) => Vec::new(),
            RateModel::PiecewiseConstant { times, .. } => times
                .iter()
                .copied()
                .filter(|t| *t > 0.0 && *t < 1.0)
                .collect(),
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            RateModel::Constant(r) => *r,
            RateModel::PiecewiseConstant { times, values } => {
                let idx = times.partition_point(|&bp| bp <= t);
                values[idx.saturating_sub(1)]
            }
        }
    }

    /// Rate on each cell, sampled at the cell's left node. Requires every
    /// interior breakpoint to be a node of `grid`.
    pub fn cell_rates(&self, grid: &Grid) -> Result<Vec<f64>> {
        for bp in self.interior_breakpoints() {
            if grid.node_at(bp).is_none() {
                return Err(Error::GridMismatch(format!(
                    "rate breakpoint {bp} is not a grid node"
                )));
            }
        }
        Ok((0..grid.n_cells())
            .map(|i| self.value_at(grid.times()[i]))
            .collect())
    }
}

/// The investable market: bank account rate plus `n >= 0` risky assets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketModel {
    pub rate: RateModel,
    pub assets: Vec<AssetModel>,
}

impl MarketModel {
    pub fn validate(&self) -> Result<()> {
        self.rate.validate()?;
        for asset in &self.assets {
            asset.validate()?;
        }
        Ok(())
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }
}

/// One asset jump: time in (0, 1] and relative size in (-1, inf).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssetJump {
    pub time: f64,
    pub size: f64,
}

/// Draw the jump times and sizes of an exponential-Levy asset (empty for
/// the other models). Draw order: count, times, sizes.
pub fn sample_asset_jumps<R: Rng + ?Sized>(
    asset: &AssetModel,
    rng: &mut R,
) -> Result<Vec<AssetJump>> {
    asset.validate()?;
    let AssetModel::ExpLevy {
        jump_rate, jump, ..
    } = asset
    else {
        return Ok(Vec::new());
    };
    if *jump_rate == 0.0 {
        return Ok(Vec::new());
    }
    let poisson = Poisson::new(*jump_rate)
        .map_err(|e| Error::invalid("jump_rate", format!("Poisson rate {jump_rate}: {e}")))?;
    let draw: f64 = poisson.sample(rng);
    let count = draw as usize;
    let mut times: Vec<f64> = (0..count)
        .map(|_| {
            let u: f64 = rng.sample(OpenClosed01);
            u
        })
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let jumps = times
        .into_iter()
        .map(|time| {
            let size = jump.sample(rng);
            debug_assert!(size > -1.0, "jump law produced a bankrupting jump");
            AssetJump { time, size }
        })
        .collect();
    Ok(jumps)
}

/// Full-truncation Euler path of the CIR variance on the grid nodes.
///
/// The internal iterate may dip below zero; drift and diffusion evaluate the
/// truncated value and the reported path is `max(v, 0)` at every node, so
/// callers always see a non-negative variance.
pub fn simulate_cir_variance<R: Rng + ?Sized>(
    params: &CirParams,
    grid: &Grid,
    rng: &mut R,
) -> Result<Vec<f64>> {
    params.validate()?;
    let mut path = Vec::with_capacity(grid.n_nodes());
    let mut v = params.v0;
    path.push(v.max(0.0));
    for i in 0..grid.n_cells() {
        let dt = grid.dt(i);
        let v_plus = v.max(0.0);
        let g: f64 = rng.sample(StandardNormal);
        v += params.kappa * (params.theta - v_plus) * dt
            + params.vol_of_vol * v_plus.sqrt() * dt.sqrt() * g;
        path.push(v.max(0.0));
    }
    Ok(path)
}

/// Per-cell increments of `dS/S_-` for one asset, plus the spot variance at
/// each cell's left node (needed by coefficient-reading strategies).
#[derive(Debug, Clone)]
pub struct AssetPath {
    pub increments: Increments,
    /// sigma_t^2 sampled at each cell's left node.
    pub variance_cells: Vec<f64>,
    /// Constant drift of the return process.
    pub drift: f64,
}

/// Simulate the return increments of one asset on a grid that already
/// contains the asset's drawn jump times (pass the same jumps).
///
/// The continuous part is `mu dt + sigma sqrt(dt) N` per cell; jumps land at
/// their exact nodes. For the stochastic-volatility model the variance path
/// must have been simulated on the same grid.
pub fn simulate_asset_return_increments<R: Rng + ?Sized>(
    asset: &AssetModel,
    grid: &Grid,
    jumps: &[AssetJump],
    variance_path: Option<&[f64]>,
    rng: &mut R,
) -> Result<AssetPath> {
    asset.validate()?;
    let n = grid.n_cells();
    let mut inc = Increments::zeros(n);
    let mut variance_cells = vec![0.0; n];

    for j in jumps {
        let cell = grid.cell_ending_at(j.time).ok_or_else(|| {
            Error::GridMismatch(format!("asset jump time {} is not a grid node", j.time))
        })?;
        if !(j.size > -1.0) {
            return Err(Error::invalid(
                "asset jump",
                format!("relative jump {} would bankrupt the asset", j.size),
            ));
        }
        inc.jump[cell] += j.size;
    }

    match asset {
        AssetModel::Gbm { mu, sigma } => {
            for i in 0..n {
                let dt = grid.dt(i);
                let g: f64 = rng.sample(StandardNormal);
                inc.cont[i] = mu * dt + sigma * dt.sqrt() * g;
                inc.qv[i] = sigma * sigma * dt;
                variance_cells[i] = sigma * sigma;
            }
        }
        AssetModel::ExpLevy { drift, sigma, .. } => {
            for i in 0..n {
                let dt = grid.dt(i);
                let mut cell = drift * dt;
                if *sigma > 0.0 {
                    let g: f64 = rng.sample(StandardNormal);
                    cell += sigma * dt.sqrt() * g;
                }
                inc.cont[i] = cell;
                inc.qv[i] = sigma * sigma * dt;
                variance_cells[i] = sigma * sigma;
            }
        }
        AssetModel::DiffusionSv { mu, .. } => {
            let v = variance_path.ok_or_else(|| {
                Error::invalid(
                    "variance_path",
                    "stochastic-volatility asset needs its variance path",
                )
            })?;
            if v.len() != grid.n_nodes() {
                return Err(Error::GridMismatch(format!(
                    "variance path has {} nodes, grid has {}",
                    v.len(),
                    grid.n_nodes()
                )));
            }
            for i in 0..n {
                let dt = grid.dt(i);
                let spot_var = v[i];
                let g: f64 = rng.sample(StandardNormal);
                inc.cont[i] = mu * dt + spot_var.sqrt() * dt.sqrt() * g;
                inc.qv[i] = spot_var * dt;
                variance_cells[i] = spot_var;
            }
        }
    }

    Ok(AssetPath {
        increments: inc,
        variance_cells,
        drift: asset.drift(),
    })
}

/// Whether `E exp(u * integral of V)` stays finite for every horizon or
/// blows up at a finite time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExponentialMomentHorizon {
    AllT,
    FiniteHorizon(f64),
}

/// Largest horizon up to which the integrated CIR variance has a finite
/// exponential moment of order `u`.
///
/// Finite for all horizons iff `u <= kappa^2 / (2 delta^2)`; otherwise the
/// moment blows up at `t* = (2/gamma) (pi + atan(-gamma/kappa))` with
/// `gamma = sqrt(2 delta^2 u - kappa^2)`.
pub fn cir_exponential_moment_horizon(
    u: f64,
    kappa: f64,
    vol_of_vol: f64,
) -> Result<ExponentialMomentHorizon> {
    if !(u > 0.0) {
        return Err(Error::invalid("u", format!("{u} must be > 0")));
    }
    if !(kappa > 0.0) {
        return Err(Error::invalid("kappa", format!("{kappa} must be > 0")));
    }
    if !(vol_of_vol > 0.0) {
        return Err(Error::invalid(
            "vol_of_vol",
            format!("{vol_of_vol} must be > 0"),
        ));
    }
    let threshold = kappa * kappa / (2.0 * vol_of_vol * vol_of_vol);
    if u <= threshold {
        return Ok(ExponentialMomentHorizon::AllT);
    }
    let gamma = (2.0 * vol_of_vol * vol_of_vol * u - kappa * kappa).sqrt();
    let t_star = 2.0 / gamma * (std::f64::consts::PI + (-gamma / kappa).atan());
    Ok(ExponentialMomentHorizon::FiniteHorizon(t_star))
}
