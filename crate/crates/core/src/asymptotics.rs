//! The constant that governs the leading-order ruin probability:
//! `K = integral over [0,1] of E E(Z)_t^{-alpha} dt`, in closed form for
//! Levy portfolio processes and by Monte Carlo time quadrature in general,
//! plus the derived quantities built on it (the small-noise ruin
//! approximation, the investment reduction ratio, family infima).

use rayon::prelude::*;

use crate::engine;
use crate::error::{Error, Result};
use crate::levy::LevyMeasureTail;
use crate::market::{MarketModel, RateModel, ReturnJumpLaw};
use crate::strategy::{check_levy_moment_condition, Strategy};

/// How an asymptotic constant was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantMethod {
    ClosedForm,
    McTimeQuadrature,
}

impl ConstantMethod {
    pub fn label(&self) -> &'static str {
        match self {
            ConstantMethod::ClosedForm => "closed-form",
            ConstantMethod::McTimeQuadrature => "mc-quadrature",
        }
    }
}

/// `K = integral of E E(Z)_t^{-alpha} dt` with provenance.
#[derive(Debug, Clone)]
pub struct AsymptoticConstant {
    pub value: f64,
    pub method: ConstantMethod,
    /// Standard error of the estimate (Monte Carlo only).
    pub std_error: Option<f64>,
    /// The growth exponent `kappa` with `E E(Z)_t^{-alpha} = exp(kappa t)`
    /// (closed form only).
    pub exponent: Option<f64>,
}

/// `(e^kappa - 1) / kappa`, the unit-time integral of `exp(kappa t)`;
/// the removable singularity at zero is evaluated by series below 1e-6.
pub fn growth_to_constant(kappa: f64) -> f64 {
    if kappa.abs() < 1e-6 {
        1.0 + kappa / 2.0 + kappa * kappa / 6.0
    } else {
        kappa.exp_m1() / kappa
    }
}

/// Closed-form constant for a continuous Levy portfolio process with drift
/// `r` and volatility `sigma`: the growth exponent is
/// `sigma^2 (alpha^2 + alpha)/2 - alpha r`, and `K = 1` exactly when the
/// exponent vanishes (`alpha = 2r/sigma^2 - 1`).
pub fn gbm_constant(alpha: f64, r: f64, sigma: f64) -> Result<AsymptoticConstant> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("{alpha} must be > 0")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::invalid("sigma", format!("{sigma} must be >= 0")));
    }
    let kappa = 0.5 * sigma * sigma * (alpha * alpha + alpha) - alpha * r;
    Ok(AsymptoticConstant {
        value: growth_to_constant(kappa),
        method: ConstantMethod::ClosedForm,
        std_error: None,
        exponent: Some(kappa),
    })
}

/// Growth exponent of the jump part: `b` with
/// `E E(J)_t^{-alpha} = exp(b t)` for a compound-Poisson `J`, i.e.
/// `b = rate * (E (1+J)^{-alpha} - 1)`.
///
/// Requires the jump measure to satisfy
/// `integral of (1+z)^{-alpha} near -1 < infinity`; a divergent law is
/// rejected with the violated condition spelled out.
pub fn jump_exponent(jump: &ReturnJumpLaw, rate: f64, alpha: f64) -> Result<f64> {
    if !(rate >= 0.0) {
        return Err(Error::invalid("rate", format!("{rate} must be >= 0")));
    }
    if rate == 0.0 {
        return Ok(0.0);
    }
    let report = check_levy_moment_condition(jump, rate, alpha, 0.0, 1)?;
    if !report.holds() {
        return Err(Error::MomentCondition(format!(
            "integral of (1+z)^(-alpha) against the jump measure near -1 must be finite \
             (alpha = {alpha}): {}",
            report.detail
        )));
    }
    let moment = jump
        .inverse_moment(alpha)
        .expect("moment exists when the condition holds");
    Ok(rate * (moment - 1.0))
}

/// Closed-form constant for a Levy portfolio process
/// `Z_t = drift t + sigma B_t + J_t`: the continuous and jump growth
/// exponents add, and `K = (e^(kappa + b) - 1) / (kappa + b)`.
pub fn levy_constant(
    alpha: f64,
    drift: f64,
    sigma: f64,
    jumps: Option<(&ReturnJumpLaw, f64)>,
) -> Result<AsymptoticConstant> {
    let continuous = gbm_constant(alpha, drift, sigma)?;
    let b = match jumps {
        Some((law, rate)) => jump_exponent(law, rate, alpha)?,
        None => 0.0,
    };
    let exponent = continuous.exponent.unwrap() + b;
    Ok(AsymptoticConstant {
        value: growth_to_constant(exponent),
        method: ConstantMethod::ClosedForm,
        std_error: None,
        exponent: Some(exponent),
    })
}

fn scale_jump_law(law: &ReturnJumpLaw, weight: f64) -> Result<Option<ReturnJumpLaw>> {
    if weight == 0.0 {
        return Ok(None);
    }
    let scaled = match *law {
        ReturnJumpLaw::Const { size } => ReturnJumpLaw::Const {
            size: weight * size,
        },
        ReturnJumpLaw::Uniform { lo, hi } => {
            let (a, b) = (weight * lo, weight * hi);
            ReturnJumpLaw::Uniform {
                lo: a.min(b),
                hi: a.max(b),
            }
        }
        ReturnJumpLaw::PowerFloor { .. } => {
            if weight == 1.0 {
                *law
            } else {
                // the scaled law has no closed-form inverse moment
                return Err(Error::Unsupported(
                    "power-floor jump laws admit a closed form only at full weight".into(),
                ));
            }
        }
    };
    scaled.validate().map_err(|_| {
        Error::invalid(
            "strategy.weights",
            format!("weight {weight} scales an asset jump to -1 or below"),
        )
    })?;
    Ok(Some(scaled))
}

/// Closed-form constant for a constant strategy in a constant-rate market
/// whose assets are Levy drivers, when every scaled jump law stays in
/// closed form. `Ok(None)` means "no closed form here, fall back to Monte
/// Carlo"; an error means the configuration itself is invalid.
pub fn closed_form_constant(
    market: &MarketModel,
    strategy: &Strategy,
    alpha: f64,
) -> Result<Option<AsymptoticConstant>> {
    market.validate()?;
    strategy.validate(market.n_assets())?;
    let Strategy::Constant { weights } = strategy else {
        return Ok(None);
    };
    let RateModel::Constant(rate) = market.rate else {
        return Ok(None);
    };

    let bank = 1.0 - weights.iter().sum::<f64>();
    let mut drift = bank * rate;
    let mut variance = 0.0;
    let mut jump_total = 0.0;
    for (w, asset) in weights.iter().zip(&market.assets) {
        match asset {
            crate::market::AssetModel::Gbm { mu, sigma } => {
                drift += w * mu;
                variance += w * w * sigma * sigma;
            }
            crate::market::AssetModel::ExpLevy {
                drift: a,
                sigma,
                jump_rate,
                jump,
            } => {
                drift += w * a;
                variance += w * w * sigma * sigma;
                match scale_jump_law(jump, *w) {
                    Ok(Some(scaled)) => {
                        jump_total += jump_exponent(&scaled, *jump_rate, alpha)?;
                    }
                    Ok(None) => {}
                    Err(Error::Unsupported(_)) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
            crate::market::AssetModel::DiffusionSv { .. } => return Ok(None),
        }
    }

    let kappa = 0.5 * variance * (alpha * alpha + alpha) - alpha * drift + jump_total;
    Ok(Some(AsymptoticConstant {
        value: growth_to_constant(kappa),
        method: ConstantMethod::ClosedForm,
        std_error: None,
        exponent: Some(kappa),
    }))
}

/// Monte Carlo estimate of `K` by trapezoidal time quadrature of the
/// pathwise average of `E(Z)_t^{-alpha}`.
///
/// Paths are built with the same machinery as the ruin engine (the reserve
/// with zero noise), so feedback strategies are evaluated on the unperturbed
/// reserve. The standard error comes from the path-level variance of the
/// time integral. Any non-positive exponential node aborts the estimate.
pub fn estimate_constant_mc(
    market: &MarketModel,
    strategy: &Strategy,
    alpha: f64,
    n_paths: u64,
    mesh: f64,
    seed: u64,
) -> Result<AsymptoticConstant> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("{alpha} must be > 0")));
    }
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", "need at least one path"));
    }
    market.validate()?;
    strategy.validate(market.n_assets())?;

    #[derive(Clone, Copy, Default)]
    struct Agg {
        sum: f64,
        sum_sq: f64,
    }

    let chunk = 4096u64;
    let n_chunks = n_paths.div_ceil(chunk);
    let partials: Vec<Agg> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * chunk;
            let end = n_paths.min(start + chunk);
            let mut agg = Agg::default();
            for path_index in start..end {
                let q = engine::sample_inverse_moment_integral(
                    market, strategy, alpha, mesh, seed, path_index,
                )?;
                agg.sum += q;
                agg.sum_sq += q * q;
            }
            Ok(agg)
        })
        .collect::<Result<Vec<Agg>>>()?;

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for a in &partials {
        sum += a.sum;
        sum_sq += a.sum_sq;
    }
    let n = n_paths as f64;
    let mean = sum / n;
    let std_error = if n_paths > 1 {
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(AsymptoticConstant {
        value: mean,
        method: ConstantMethod::McTimeQuadrature,
        std_error: Some(std_error),
        exponent: None,
    })
}

/// Leading-order ruin approximation
/// `nu(-inf, -1/eps) * x^{-alpha} * K`.
pub fn asymptotic_ruin_approx(
    x: f64,
    eps: f64,
    alpha: f64,
    tail: &LevyMeasureTail,
    constant: &AsymptoticConstant,
) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::invalid("x", format!("{x} must be > 0")));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", format!("{eps} must be > 0")));
    }
    let normalizer = tail.eval(1.0 / eps)?;
    Ok(normalizer * x.powf(-alpha) * constant.value)
}

/// Ratio of the leading-order ruin probability under the asymptotically
/// optimal fraction to the one under no investment, for a constant-rate
/// geometric-Brownian asset with Sharpe ratio `gamma = (mu - r)/sigma`:
///
/// `R = (1 - exp(-ar - q)) / (1 - exp(-ar)) * ar / (ar + q)`
///
/// with `ar = alpha r` and `q = alpha gamma^2 / (2 (1 + alpha))`.
pub fn reduction_ratio(alpha: f64, r: f64, sharpe: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("{alpha} must be > 0")));
    }
    if !(r > 0.0) {
        return Err(Error::invalid(
            "r",
            format!("{r} must be > 0; the no-investment constant degenerates at r = 0"),
        ));
    }
    let ar = alpha * r;
    let q = alpha * sharpe * sharpe / (2.0 * (1.0 + alpha));
    Ok((1.0 - (-ar - q).exp()) / (1.0 - (-ar).exp()) * (ar / (ar + q)))
}

/// Index and value of the smallest constant among candidate strategies;
/// ties break to the first index.
pub fn family_infimum<T>(candidates: &[(T, f64)]) -> Result<(usize, f64)> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidates", "the family must be non-empty"));
    }
    let mut best = 0usize;
    for (i, (_, k)) in candidates.iter().enumerate().skip(1) {
        if *k < candidates[best].1 {
            best = i;
        }
    }
    Ok((best, candidates[best].1))
}
