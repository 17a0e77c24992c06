//! Investment strategies, the portfolio semimartingale they generate, and
//! the checkable sufficient conditions under which the ruin asymptotics
//! apply to a whole strategy family.
//!
//! A strategy fixes the fractions `(pi^0, ..., pi^n)` of the reserve held in
//! the bank account and the risky assets; the fractions always sum to one.
//! Feedback strategies are evaluated strictly on left limits, so the
//! fraction used over a cell depends only on information available at the
//! cell's left node.

use serde::{Deserialize, Serialize};

use crate::error::{require_finite, Error, Result};
use crate::market::{
    cir_exponential_moment_horizon, AssetModel, AssetPath, ExponentialMomentHorizon, RateModel,
    ReturnJumpLaw,
};
use crate::stoch::{
    solve_reserve, stochastic_exponential, Grid, Increments, ReserveSolution, StochasticExponential,
};

/// A named feedback rule; the fraction is a pure function of left-limit
/// state, which is what makes concurrent per-path evaluation safe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum FeedbackRule {
    /// Risky fraction `base * clamp(X_{t-} / x_0, 0, cap)`: scale exposure
    /// with the reserve's performance, capped.
    ReserveProportional { base: f64, cap: f64 },
}

impl FeedbackRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FeedbackRule::ReserveProportional { base, cap } => {
                require_finite("feedback.base", base)?;
                // an infinite cap is a meaningful "uncapped" choice; the
                // condition checkers then report undecidable
                if !(base >= 0.0) {
                    return Err(Error::invalid(
                        "feedback.base",
                        format!("{base} must be >= 0"),
                    ));
                }
                if !(cap >= 0.0) {
                    return Err(Error::invalid(
                        "feedback.cap",
                        format!("{cap} must be >= 0"),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Evaluate on the left limit of the reserve.
    pub fn eval(&self, reserve_left: f64, initial_capital: f64) -> f64 {
        match *self {
            FeedbackRule::ReserveProportional { base, cap } => {
                base * (reserve_left / initial_capital).clamp(0.0, cap)
            }
        }
    }

    /// Largest risky fraction the rule can produce.
    pub fn sup_abs_fraction(&self) -> f64 {
        match *self {
            FeedbackRule::ReserveProportional { base, cap } => base * cap,
        }
    }
}

/// An investment strategy over the bank account and `n` risky assets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Strategy {
    /// Fixed risky fractions `pi^1..pi^n`; the bank fraction is
    /// `1 - sum(weights)`.
    Constant { weights: Vec<f64> },
    /// Left-limit feedback rule on a single risky asset.
    Feedback(FeedbackRule),
    /// `pi*_t = (mu_t - r_t) / ((1 + alpha) sigma_t^2)` on a single
    /// diffusion asset, with `alpha` the claim tail index.
    AsymptoticallyOptimal,
}

impl Strategy {
    pub fn validate(&self, n_assets: usize) -> Result<()> {
        match self {
            Strategy::Constant { weights } => {
                if weights.len() != n_assets {
                    return Err(Error::invalid(
                        "strategy.weights",
                        format!("{} weights for {} assets", weights.len(), n_assets),
                    ));
                }
                for w in weights {
                    require_finite("strategy.weights", *w)?;
                }
                Ok(())
            }
            Strategy::Feedback(rule) => {
                rule.validate()?;
                if n_assets != 1 {
                    return Err(Error::Unsupported(
                        "feedback strategies require exactly one risky asset".into(),
                    ));
                }
                Ok(())
            }
            Strategy::AsymptoticallyOptimal => {
                if n_assets != 1 {
                    return Err(Error::Unsupported(
                        "the asymptotically optimal strategy requires exactly one risky asset"
                            .into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Whether the portfolio process can be assembled once from already
    /// sampled increments (no state feedback in the loop).
    pub fn is_constant(&self) -> bool {
        matches!(self, Strategy::Constant { .. })
    }
}

/// The pointwise asymptotically optimal risky fraction
/// `(mu - r) / ((1 + alpha) sigma^2)`.
pub fn asymptotically_optimal_pi(mu: f64, r: f64, sigma: f64, alpha: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("{sigma} must be > 0")));
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("{alpha} must be > 0")));
    }
    Ok((mu - r) / ((1.0 + alpha) * sigma * sigma))
}

/// Portfolio increments for a constant strategy:
/// `dZ = pi^0 r dt + sum_k pi^k dS^k / S^k_-`.
pub fn build_z_constant(
    weights: &[f64],
    grid: &Grid,
    rate_cells: &[f64],
    assets: &[AssetPath],
) -> Result<Increments> {
    if weights.len() != assets.len() {
        return Err(Error::invalid(
            "strategy.weights",
            format!("{} weights for {} assets", weights.len(), assets.len()),
        ));
    }
    if rate_cells.len() != grid.n_cells() {
        return Err(Error::GridMismatch("rate cells disagree with grid".into()));
    }
    let n = grid.n_cells();
    let bank = 1.0 - weights.iter().sum::<f64>();
    let mut z = Increments::zeros(n);
    for i in 0..n {
        let mut cont = bank * rate_cells[i] * grid.dt(i);
        let mut jump = 0.0;
        let mut qv = 0.0;
        for (w, asset) in weights.iter().zip(assets) {
            cont += w * asset.increments.cont[i];
            jump += w * asset.increments.jump[i];
            qv += w * w * asset.increments.qv[i];
        }
        z.cont[i] = cont;
        z.jump[i] = jump;
        z.qv[i] = qv;
    }
    Ok(z)
}

/// Everything one path of the reserve produces.
#[derive(Debug, Clone)]
pub struct SimulatedReserve {
    pub z: Increments,
    pub expz: StochasticExponential,
    pub solution: ReserveSolution,
    /// Risky fraction used on each cell (single-asset strategies record
    /// their trace here; constant multi-asset strategies leave it empty).
    pub risky_weights: Vec<f64>,
}

/// Build the portfolio process and solve the reserve equation along one
/// path.
///
/// Constant strategies compose the already sampled increments and go through
/// the explicit solution. Feedback and coefficient-reading strategies are
/// interleaved: the fraction for each cell is fixed from left-limit state
/// before the cell is advanced, which is exactly the predictability
/// requirement.
#[allow(clippy::too_many_arguments)]
pub fn build_reserve(
    strategy: &Strategy,
    claim_tail_index: Option<f64>,
    x: f64,
    eps: f64,
    grid: &Grid,
    rate_cells: &[f64],
    assets: &[AssetPath],
    y: &Increments,
) -> Result<SimulatedReserve> {
    strategy.validate(assets.len())?;
    if !(x > 0.0) {
        return Err(Error::invalid(
            "x",
            format!("initial capital {x} must be > 0"),
        ));
    }

    if let Strategy::Constant { weights } = strategy {
        let z = build_z_constant(weights, grid, rate_cells, assets)?;
        let expz = stochastic_exponential(grid, &z)?;
        let solution = solve_reserve(x, eps, &expz, grid, y)?;
        let trace = if weights.len() == 1 {
            vec![weights[0]; grid.n_cells()]
        } else {
            Vec::new()
        };
        return Ok(SimulatedReserve {
            z,
            expz,
            solution,
            risky_weights: trace,
        });
    }

    let asset = &assets[0];
    let n = grid.n_cells();
    let mut z = Increments::zeros(n);
    let mut values = Vec::with_capacity(n + 1);
    let mut left_limits = Vec::with_capacity(n);
    let mut integrator = Vec::with_capacity(n + 1);
    let mut reserve = Vec::with_capacity(n + 1);
    let mut risky_weights = Vec::with_capacity(n);

    let mut exp_z = 1.0;
    let mut integral = 0.0;
    let mut x_t = x;
    values.push(exp_z);
    integrator.push(integral);
    reserve.push(x_t);

    for i in 0..n {
        let pi = match strategy {
            Strategy::Feedback(rule) => rule.eval(x_t, x),
            Strategy::AsymptoticallyOptimal => {
                let alpha = claim_tail_index.ok_or_else(|| {
                    Error::Unsupported(
                        "the asymptotically optimal strategy needs a regularly varying claim law"
                            .into(),
                    )
                })?;
                let variance = asset.variance_cells[i];
                if !(variance > 0.0) {
                    return Err(Error::invalid(
                        "sigma",
                        format!("spot variance {variance} at cell {i} must be > 0"),
                    ));
                }
                (asset.drift - rate_cells[i]) / ((1.0 + alpha) * variance)
            }
            Strategy::Constant { .. } => unreachable!("handled above"),
        };
        risky_weights.push(pi);

        let cont = (1.0 - pi) * rate_cells[i] * grid.dt(i) + pi * asset.increments.cont[i];
        let qv = pi * pi * asset.increments.qv[i];
        let jump = pi * asset.increments.jump[i];
        z.cont[i] = cont;
        z.qv[i] = qv;
        z.jump[i] = jump;

        let before_jump = exp_z * (cont - 0.5 * qv).exp();
        left_limits.push(before_jump);
        if jump <= -1.0 {
            return Err(Error::JumpAtOrBelowMinusOne {
                node: i + 1,
                time: grid.times()[i + 1],
                jump,
            });
        }
        integral = (integral + (1.0 / exp_z) * y.cont[i]) + (1.0 / before_jump) * y.jump[i];
        exp_z = before_jump * (1.0 + jump);
        x_t = exp_z * (x + eps * integral);

        values.push(exp_z);
        integrator.push(integral);
        reserve.push(x_t);
    }

    Ok(SimulatedReserve {
        z,
        expz: StochasticExponential {
            values,
            left_limits,
        },
        solution: ReserveSolution {
            reserve: crate::stoch::ValuePath { values: reserve },
            integrator: crate::stoch::ValuePath { values: integrator },
        },
        risky_weights,
    })
}

/// Outcome of a checkable sufficient condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Fails,
    /// The inputs fall outside the families this checker can decide
    /// analytically; sampling cannot decide exponential-moment finiteness,
    /// so no verdict is guessed.
    Undecidable,
}

/// One checked condition with its verdict and the quantity that decided it.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub condition: String,
    pub verdict: Verdict,
    pub diagnostic: Option<f64>,
    pub detail: String,
}

impl ConditionReport {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }
}

/// Decide `int (1+u)^{-(n alpha + delta)} eta(du) < infinity` for the
/// supported jump laws.
///
/// Laws bounded away from -1 always pass; the power-floor law passes exactly
/// when its boundary exponent `beta` exceeds `n alpha + delta`. The verdict
/// is analytic, never sampled.
pub fn check_levy_moment_condition(
    jump: &ReturnJumpLaw,
    jump_rate: f64,
    alpha: f64,
    delta: f64,
    n_assets: usize,
) -> Result<ConditionReport> {
    jump.validate()?;
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("{alpha} must be > 0")));
    }
    if !(delta >= 0.0) {
        return Err(Error::invalid("delta", format!("{delta} must be >= 0")));
    }
    if n_assets == 0 {
        return Err(Error::invalid("n_assets", "need at least one asset"));
    }
    if !(jump_rate >= 0.0) {
        return Err(Error::invalid(
            "jump_rate",
            format!("{jump_rate} must be >= 0"),
        ));
    }
    let p = n_assets as f64 * alpha + delta;
    let report = match jump.inverse_moment(p) {
        Some(moment) => ConditionReport {
            condition: "levy-jump-moment".into(),
            verdict: Verdict::Holds,
            diagnostic: Some(jump_rate * moment),
            detail: format!(
                "integral of (1+u)^-{p} against the jump measure is {}",
                jump_rate * moment
            ),
        },
        None => {
            let ReturnJumpLaw::PowerFloor { beta, .. } = jump else {
                unreachable!("only the power-floor law can diverge at -1");
            };
            ConditionReport {
                condition: "levy-jump-moment".into(),
                verdict: Verdict::Fails,
                diagnostic: Some(beta - p),
                detail: format!(
                    "density exponent beta = {beta} does not exceed n*alpha + delta = {p}; \
                     the integral diverges at -1"
                ),
            }
        }
    };
    Ok(report)
}

fn sup_abs_fraction(
    strategy: &Strategy,
    asset: &AssetModel,
    rate: &RateModel,
    alpha: f64,
) -> Option<f64> {
    let bound = match strategy {
        Strategy::Constant { weights } => {
            // the decidable exponential-moment family is single-asset
            if weights.len() != 1 {
                return None;
            }
            Some(weights[0].abs())
        }
        Strategy::Feedback(rule) => Some(rule.sup_abs_fraction()),
        Strategy::AsymptoticallyOptimal => match asset {
            AssetModel::Gbm { mu, sigma } if *sigma > 0.0 => {
                let (rmin, rmax) = rate_range(rate);
                let spread = (mu - rmin).abs().max((mu - rmax).abs());
                Some(spread / ((1.0 + alpha) * sigma * sigma))
            }
            // With stochastic volatility the optimal fraction grows like
            // 1/V_t and is unbounded near V = 0.
            _ => None,
        },
    };
    bound.filter(|b| b.is_finite())
}

fn rate_range(rate: &RateModel) -> (f64, f64) {
    match rate {
        RateModel::Constant(r) => (*r, *r),
        RateModel::PiecewiseConstant { values, .. } => values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            }),
    }
}

fn exponential_moment_report(name: &str, u: f64, asset: &AssetModel) -> ConditionReport {
    match asset {
        AssetModel::Gbm { sigma, .. } => ConditionReport {
            condition: name.into(),
            verdict: Verdict::Holds,
            diagnostic: Some(u * sigma * sigma),
            detail: format!(
                "deterministic exponent u * sigma^2 = {}; the moment is finite",
                u * sigma * sigma
            ),
        },
        AssetModel::DiffusionSv { variance, .. } => {
            match cir_exponential_moment_horizon(u, variance.kappa, variance.vol_of_vol) {
                Ok(ExponentialMomentHorizon::AllT) => ConditionReport {
                    condition: name.into(),
                    verdict: Verdict::Holds,
                    diagnostic: Some(u),
                    detail: format!("u = {u} <= kappa^2/(2 delta^2); finite for every horizon"),
                },
                Ok(ExponentialMomentHorizon::FiniteHorizon(t_star)) => {
                    if t_star > 1.0 {
                        ConditionReport {
                            condition: name.into(),
                            verdict: Verdict::Holds,
                            diagnostic: Some(t_star),
                            detail: format!("blow-up time t* = {t_star} exceeds the unit horizon"),
                        }
                    } else {
                        ConditionReport {
                            condition: name.into(),
                            verdict: Verdict::Fails,
                            diagnostic: Some(t_star),
                            detail: format!(
                                "blow-up time t* = {t_star} is inside the unit horizon"
                            ),
                        }
                    }
                }
                Err(e) => ConditionReport {
                    condition: name.into(),
                    verdict: Verdict::Undecidable,
                    diagnostic: None,
                    detail: format!("horizon computation failed: {e}"),
                },
            }
        }
        AssetModel::ExpLevy { .. } => ConditionReport {
            condition: name.into(),
            verdict: Verdict::Undecidable,
            diagnostic: None,
            detail: "exponential-Levy assets are checked through the jump moment condition".into(),
        },
    }
}

/// Check the exponential-moment conditions that make the ruin asymptotics
/// uniform over a diffusion-asset strategy family: the volatility moment
/// `E exp((2 gamma^2 + gamma) int pi^2 sigma^2)` for some `gamma > alpha`,
/// the drift moment (finite for every order), and the Novikov condition
/// `E exp((alpha^2 / 2) int pi^2 sigma^2)` used by the optimal strategy.
///
/// Verdicts are analytic: constant and CIR volatility with a bounded
/// fraction are decided; anything else is reported undecidable rather than
/// guessed from simulation.
pub fn check_exponential_moment_conditions(
    strategy: &Strategy,
    asset: &AssetModel,
    rate: &RateModel,
    alpha: f64,
    gamma: Option<f64>,
) -> Result<Vec<ConditionReport>> {
    asset.validate()?;
    rate.validate()?;
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("{alpha} must be > 0")));
    }
    let gamma = gamma.unwrap_or(alpha + 1.0);
    if !(gamma > alpha) {
        return Err(Error::invalid(
            "gamma",
            format!("{gamma} must exceed alpha = {alpha}"),
        ));
    }

    let mut reports = Vec::new();
    match sup_abs_fraction(strategy, asset, rate, alpha) {
        Some(pi_bar) => {
            let u_vol = (2.0 * gamma * gamma + gamma) * pi_bar * pi_bar;
            reports.push(if u_vol == 0.0 {
                ConditionReport {
                    condition: "volatility-exponential-moment".into(),
                    verdict: Verdict::Holds,
                    diagnostic: Some(0.0),
                    detail: "zero risky exposure".into(),
                }
            } else {
                exponential_moment_report("volatility-exponential-moment", u_vol, asset)
            });

            let (rmin, rmax) = rate_range(rate);
            let mu = asset.drift();
            let drift_bound =
                rmax.abs().max(rmin.abs()) + pi_bar * (mu - rmin).abs().max((mu - rmax).abs());
            reports.push(ConditionReport {
                condition: "drift-exponential-moment".into(),
                verdict: Verdict::Holds,
                diagnostic: Some(drift_bound),
                detail: format!(
                    "|r + pi (mu - r)| <= {drift_bound} pathwise, so every order is finite"
                ),
            });

            let u_nov = 0.5 * alpha * alpha * pi_bar * pi_bar;
            reports.push(if u_nov == 0.0 {
                ConditionReport {
                    condition: "novikov-condition".into(),
                    verdict: Verdict::Holds,
                    diagnostic: Some(0.0),
                    detail: "zero risky exposure".into(),
                }
            } else {
                exponential_moment_report("novikov-condition", u_nov, asset)
            });
        }
        None => {
            for name in [
                "volatility-exponential-moment",
                "drift-exponential-moment",
                "novikov-condition",
            ] {
                reports.push(ConditionReport {
                    condition: name.into(),
                    verdict: Verdict::Undecidable,
                    diagnostic: None,
                    detail: "no analytic bound on the risky fraction for this strategy/asset pair"
                        .into(),
                });
            }
        }
    }
    Ok(reports)
}
