//! Experiment configuration: one TOML file per experiment, schema-validated
//! before any computation runs. Unknown keys are hard errors, so a typo
//! never silently falls back to a default.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use ruinlab_core::engine::DEFAULT_MESH;
use ruinlab_core::levy::{ClaimLaw, ClaimsProcessSpec};
use ruinlab_core::market::{AssetModel, CirParams, MarketModel, RateModel, ReturnJumpLaw};
use ruinlab_core::strategy::{FeedbackRule, Strategy};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub claims: ClaimsConfig,
    pub market: Option<MarketConfig>,
    pub strategy: Option<StrategyConfig>,
    pub run: RunConfig,
    pub check: Option<CheckConfig>,
    pub optimal: Option<OptimalConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimsConfig {
    /// "pareto" or "uniform"
    pub law: String,
    pub alpha: Option<f64>,
    pub scale: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub intensity: f64,
    pub premium: f64,
    #[serde(default)]
    pub diffusion_vol: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub rate: Option<RateConfig>,
    #[serde(default)]
    pub asset: Vec<AssetConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseRateConfig {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum RateConfig {
    Constant(f64),
    Piecewise(PiecewiseRateConfig),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetConfig {
    /// "gbm", "exp-levy" or "diffusion-sv"
    pub kind: String,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub drift: Option<f64>,
    pub jump_rate: Option<f64>,
    /// "const", "uniform" or "power-floor"
    pub jump_law: Option<String>,
    pub jump_size: Option<f64>,
    pub jump_lo: Option<f64>,
    pub jump_hi: Option<f64>,
    pub jump_beta: Option<f64>,
    pub kappa: Option<f64>,
    pub theta: Option<f64>,
    pub vol_of_vol: Option<f64>,
    pub v0: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    /// "constant", "feedback" or "asymptotically-optimal"
    pub kind: String,
    pub weights: Option<Vec<f64>>,
    /// feedback rule name: "reserve-proportional"
    pub rule: Option<String>,
    pub base: Option<f64>,
    pub cap: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum EpsConfig {
    One(f64),
    Ladder(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub x: f64,
    pub eps: EpsConfig,
    pub n_paths: u64,
    pub mesh: Option<f64>,
    pub seed: u64,
    /// Importance-sampling tilt; 0 (default) runs the plain estimator.
    #[serde(default)]
    pub theta: f64,
    pub out: Option<PathBuf>,
    /// "csv" (default) or "json"
    pub format: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    /// Slack in the jump moment exponent; defaults to 0.1 * alpha.
    pub delta: Option<f64>,
    /// Cut point of the near-bankruptcy integral (reported, not used
    /// numerically: the verdict does not depend on it).
    pub a: Option<f64>,
    /// Moment order for the exponential conditions; defaults to alpha + 1.
    pub gamma: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimalConfig {
    /// Constant risky fractions to compare against the optimal one.
    #[serde(default)]
    pub candidates: Vec<f64>,
}

/// Output format of result tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// A fully validated experiment: core model types plus run parameters.
#[derive(Debug)]
pub struct Experiment {
    pub claims: ClaimsProcessSpec,
    pub market: MarketModel,
    pub strategy: Strategy,
    pub x: f64,
    pub eps_ladder: Vec<f64>,
    pub n_paths: u64,
    pub mesh: f64,
    pub seed: u64,
    pub theta: f64,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub check_delta: Option<f64>,
    pub check_a: f64,
    pub check_gamma: Option<f64>,
    pub candidates: Vec<f64>,
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<u64>,
    pub eps: Option<Vec<f64>>,
    pub mesh: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

pub fn load_experiment(path: &Path, overrides: &Overrides) -> Result<Experiment, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let parsed: ExperimentConfig =
        toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    build_experiment(parsed, overrides)
}

fn build_experiment(
    config: ExperimentConfig,
    overrides: &Overrides,
) -> Result<Experiment, ConfigError> {
    let claims = build_claims(&config.claims)?;
    let market = match &config.market {
        Some(m) => build_market(m)?,
        None => MarketModel {
            rate: RateModel::Constant(0.0),
            assets: vec![],
        },
    };
    let strategy = match &config.strategy {
        Some(s) => build_strategy(s)?,
        None => Strategy::Constant {
            weights: vec![0.0; market.n_assets()],
        },
    };

    claims.validate().map_err(|e| ConfigError(e.to_string()))?;
    market.validate().map_err(|e| ConfigError(e.to_string()))?;
    strategy
        .validate(market.n_assets())
        .map_err(|e| ConfigError(e.to_string()))?;

    let run = &config.run;
    let mut eps_ladder = match overrides.eps.clone() {
        Some(eps) => eps,
        None => match &run.eps {
            EpsConfig::One(e) => vec![*e],
            EpsConfig::Ladder(l) => l.clone(),
        },
    };
    if eps_ladder.is_empty() {
        return err("run.eps must contain at least one value");
    }
    for e in &mut eps_ladder {
        if !(*e >= 0.0) {
            return err(format!("run.eps entry {e} must be >= 0"));
        }
    }
    if !(run.x > 0.0) {
        return err(format!("run.x = {} must be > 0", run.x));
    }
    let n_paths = overrides.paths.unwrap_or(run.n_paths);
    if n_paths == 0 {
        return err("run.n_paths must be at least 1");
    }
    let mesh = overrides.mesh.or(run.mesh).unwrap_or(DEFAULT_MESH);
    if !(mesh > 0.0 && mesh <= 1.0) {
        return err(format!("run.mesh = {mesh} must lie in (0, 1]"));
    }
    if !(run.theta >= 0.0) {
        return err(format!("run.theta = {} must be >= 0", run.theta));
    }
    if run.theta > 0.0 {
        match claims.claim_law {
            ClaimLaw::Pareto { alpha, .. } if run.theta < alpha => {}
            ClaimLaw::Pareto { alpha, .. } => {
                return err(format!(
                    "run.theta = {} must stay below the claim tail index {alpha}",
                    run.theta
                ))
            }
            ClaimLaw::Uniform { .. } => {
                return err("run.theta > 0 needs Pareto claims (nothing to tilt otherwise)")
            }
        }
    }

    let format = match overrides.format {
        Some(f) => f,
        None => match run.format.as_deref() {
            None | Some("csv") => OutputFormat::Csv,
            Some("json") => OutputFormat::Json,
            Some(other) => return err(format!("run.format = {other:?} must be csv or json")),
        },
    };

    let check = config.check.as_ref();
    let check_a = check.and_then(|c| c.a).unwrap_or(0.5);
    if !(check_a > 0.0 && check_a < 1.0) {
        return err(format!("check.a = {check_a} must lie in (0, 1)"));
    }

    Ok(Experiment {
        claims,
        market,
        strategy,
        x: run.x,
        eps_ladder,
        n_paths,
        mesh,
        seed: overrides.seed.unwrap_or(run.seed),
        theta: run.theta,
        out: overrides.out.clone().or_else(|| run.out.clone()),
        format,
        check_delta: check.and_then(|c| c.delta),
        check_a,
        check_gamma: check.and_then(|c| c.gamma),
        candidates: config
            .optimal
            .as_ref()
            .map(|o| o.candidates.clone())
            .unwrap_or_default(),
    })
}

fn build_claims(config: &ClaimsConfig) -> Result<ClaimsProcessSpec, ConfigError> {
    let law = match config.law.as_str() {
        "pareto" => {
            reject_unused(&[("lo", config.lo), ("hi", config.hi)], "pareto claims")?;
            ClaimLaw::Pareto {
                alpha: required("claims.alpha", config.alpha)?,
                scale: required("claims.scale", config.scale)?,
            }
        }
        "uniform" => {
            reject_unused(
                &[("alpha", config.alpha), ("scale", config.scale)],
                "uniform claims",
            )?;
            ClaimLaw::Uniform {
                lo: required("claims.lo", config.lo)?,
                hi: required("claims.hi", config.hi)?,
            }
        }
        other => return err(format!("claims.law = {other:?} must be pareto or uniform")),
    };
    Ok(ClaimsProcessSpec {
        premium_drift: config.premium,
        diffusion_vol: config.diffusion_vol,
        claim_intensity: config.intensity,
        claim_law: law,
    })
}

fn build_market(config: &MarketConfig) -> Result<MarketModel, ConfigError> {
    let rate = match &config.rate {
        None => RateModel::Constant(0.0),
        Some(RateConfig::Constant(r)) => RateModel::Constant(*r),
        Some(RateConfig::Piecewise(p)) => RateModel::PiecewiseConstant {
            times: p.times.clone(),
            values: p.values.clone(),
        },
    };
    let assets = config
        .asset
        .iter()
        .map(build_asset)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MarketModel { rate, assets })
}

fn build_asset(config: &AssetConfig) -> Result<AssetModel, ConfigError> {
    match config.kind.as_str() {
        "gbm" => {
            reject_unused(
                &[
                    ("drift", config.drift),
                    ("jump_rate", config.jump_rate),
                    ("kappa", config.kappa),
                    ("theta", config.theta),
                    ("vol_of_vol", config.vol_of_vol),
                    ("v0", config.v0),
                ],
                "a gbm asset",
            )?;
            Ok(AssetModel::Gbm {
                mu: required("asset.mu", config.mu)?,
                sigma: required("asset.sigma", config.sigma)?,
            })
        }
        "exp-levy" => {
            reject_unused(
                &[
                    ("mu", config.mu),
                    ("kappa", config.kappa),
                    ("theta", config.theta),
                    ("vol_of_vol", config.vol_of_vol),
                    ("v0", config.v0),
                ],
                "an exp-levy asset",
            )?;
            let jump = build_jump_law(config)?;
            Ok(AssetModel::ExpLevy {
                drift: required("asset.drift", config.drift)?,
                sigma: required("asset.sigma", config.sigma)?,
                jump_rate: required("asset.jump_rate", config.jump_rate)?,
                jump,
            })
        }
        "diffusion-sv" => {
            reject_unused(
                &[
                    ("sigma", config.sigma),
                    ("drift", config.drift),
                    ("jump_rate", config.jump_rate),
                ],
                "a diffusion-sv asset",
            )?;
            Ok(AssetModel::DiffusionSv {
                mu: required("asset.mu", config.mu)?,
                variance: CirParams {
                    kappa: required("asset.kappa", config.kappa)?,
                    theta: required("asset.theta", config.theta)?,
                    vol_of_vol: required("asset.vol_of_vol", config.vol_of_vol)?,
                    v0: required("asset.v0", config.v0)?,
                },
            })
        }
        other => err(format!(
            "asset.kind = {other:?} must be gbm, exp-levy or diffusion-sv"
        )),
    }
}

fn build_jump_law(config: &AssetConfig) -> Result<ReturnJumpLaw, ConfigError> {
    match config.jump_law.as_deref() {
        Some("const") => {
            reject_unused(
                &[
                    ("jump_lo", config.jump_lo),
                    ("jump_hi", config.jump_hi),
                    ("jump_beta", config.jump_beta),
                ],
                "a const jump law",
            )?;
            Ok(ReturnJumpLaw::Const {
                size: required("asset.jump_size", config.jump_size)?,
            })
        }
        Some("uniform") => {
            reject_unused(
                &[
                    ("jump_size", config.jump_size),
                    ("jump_beta", config.jump_beta),
                ],
                "a uniform jump law",
            )?;
            Ok(ReturnJumpLaw::Uniform {
                lo: required("asset.jump_lo", config.jump_lo)?,
                hi: required("asset.jump_hi", config.jump_hi)?,
            })
        }
        Some("power-floor") => {
            reject_unused(
                &[("jump_size", config.jump_size), ("jump_lo", config.jump_lo)],
                "a power-floor jump law",
            )?;
            Ok(ReturnJumpLaw::PowerFloor {
                beta: required("asset.jump_beta", config.jump_beta)?,
                hi: required("asset.jump_hi", config.jump_hi)?,
            })
        }
        Some(other) => err(format!(
            "asset.jump_law = {other:?} must be const, uniform or power-floor"
        )),
        None => err("asset.jump_law is required for exp-levy assets"),
    }
}

fn build_strategy(config: &StrategyConfig) -> Result<Strategy, ConfigError> {
    match config.kind.as_str() {
        "constant" => {
            if config.rule.is_some() || config.base.is_some() || config.cap.is_some() {
                return err("constant strategies take only `weights`");
            }
            Ok(Strategy::Constant {
                weights: config
                    .weights
                    .clone()
                    .ok_or(ConfigError("strategy.weights is required".into()))?,
            })
        }
        "feedback" => {
            if config.weights.is_some() {
                return err("feedback strategies do not take `weights`");
            }
            match config.rule.as_deref() {
                Some("reserve-proportional") => {
                    Ok(Strategy::Feedback(FeedbackRule::ReserveProportional {
                        base: required("strategy.base", config.base)?,
                        cap: required("strategy.cap", config.cap)?,
                    }))
                }
                Some(other) => err(format!(
                    "strategy.rule = {other:?}; known rules: reserve-proportional"
                )),
                None => err("strategy.rule is required for feedback strategies"),
            }
        }
        "asymptotically-optimal" => {
            if config.weights.is_some()
                || config.rule.is_some()
                || config.base.is_some()
                || config.cap.is_some()
            {
                return err("asymptotically-optimal takes no further parameters");
            }
            Ok(Strategy::AsymptoticallyOptimal)
        }
        other => err(format!(
            "strategy.kind = {other:?} must be constant, feedback or asymptotically-optimal"
        )),
    }
}

fn required<T>(name: &str, value: Option<T>) -> Result<T, ConfigError> {
    value.ok_or_else(|| ConfigError(format!("{name} is required")))
}

fn reject_unused(fields: &[(&str, Option<f64>)], context: &str) -> Result<(), ConfigError> {
    for (name, value) in fields {
        if value.is_some() {
            return err(format!("`{name}` does not apply to {context}"));
        }
    }
    Ok(())
}
