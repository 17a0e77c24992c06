//! Monte Carlo estimation of finite-horizon ruin probabilities, the
//! eps-ladder convergence study against the large-deviation limit, and
//! single-big-jump importance sampling.
//!
//! ## Reproducibility
//!
//! Every estimate is a pure function of (configuration, seed). Paths derive
//! their noise from per-(path, driver) streams, partial results are
//! aggregated in fixed chunk order, and the reduction tree does not depend
//! on the worker count, so runs are bit-identical under any parallelism.

use rayon::prelude::*;

use crate::asymptotics::{self, AsymptoticConstant};
use crate::error::{Error, Result};
use crate::levy::{sample_claim_jumps_tilted, sample_y_increments, ClaimsProcessSpec};
use crate::market::{
    sample_asset_jumps, simulate_asset_return_increments, simulate_cir_variance, AssetModel,
    AssetPath, MarketModel,
};
use crate::rng::{stream_rng, Driver};
use crate::stoch::{ruin_from_solution, Grid, Increments};
use crate::strategy::{build_reserve, SimulatedReserve, Strategy};

/// Default uniform mesh width (2^-10), merged with exact jump times.
pub const DEFAULT_MESH: f64 = 0.0009765625;

const CHUNK: u64 = 4096;
const Z95: f64 = 1.959963984540054;

/// One ruin-probability estimate with its sampling error and the
/// tail-normalized ratio that the large-deviation limit speaks about.
#[derive(Debug, Clone)]
pub struct RuinEstimate {
    pub eps: f64,
    pub x: f64,
    pub n_paths: u64,
    pub ruin_count: u64,
    /// Estimated ruin probability (weighted mean under importance sampling).
    pub p_hat: f64,
    /// 95% half-width: normal approximation, or exact Clopper-Pearson when
    /// fewer than 30 ruin events were seen (plain estimator only).
    pub ci_halfwidth: f64,
    /// `p_hat / nu(-inf, -1/eps)`; NaN when `eps = 0`.
    pub normalized_ratio: f64,
    pub seed: u64,
}

/// Sample-mean diagnostics of the importance weights (unit mean when the
/// estimator is correctly normalized).
#[derive(Debug, Clone, Copy)]
pub struct WeightDiagnostics {
    pub mean: f64,
    pub std_error: f64,
}

/// Result of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub ruined: bool,
    /// Likelihood ratio of the path (1.0 without tilting).
    pub weight: f64,
}

/// A fully validated simulation setup; paths can be evaluated independently
/// and in any order.
pub struct Simulator {
    claims: ClaimsProcessSpec,
    market: MarketModel,
    strategy: Strategy,
    x: f64,
    eps: f64,
    mesh: f64,
    seed: u64,
    tilt: f64,
    claim_tail_index: Option<f64>,
}

impl Simulator {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        claims: &ClaimsProcessSpec,
        market: &MarketModel,
        strategy: &Strategy,
        x: f64,
        eps: f64,
        mesh: f64,
        seed: u64,
        tilt: f64,
    ) -> Result<Simulator> {
        claims.validate()?;
        market.validate()?;
        strategy.validate(market.n_assets())?;
        Grid::uniform(mesh)?;
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::invalid(
                "x",
                format!("{x} must be positive and finite"),
            ));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::invalid(
                "eps",
                format!("{eps} must be non-negative and finite"),
            ));
        }
        let claim_tail_index = claims.claim_law.tail_index();
        if tilt != 0.0 {
            let alpha = claim_tail_index.ok_or_else(|| {
                Error::Unsupported("importance sampling needs Pareto claims".into())
            })?;
            if !(tilt > 0.0 && tilt < alpha) {
                return Err(Error::invalid(
                    "theta",
                    format!("tilt {tilt} must lie in [0, alpha = {alpha})"),
                ));
            }
        }
        if matches!(strategy, Strategy::AsymptoticallyOptimal) {
            if claim_tail_index.is_none() {
                return Err(Error::Unsupported(
                    "the asymptotically optimal strategy needs a regularly varying claim law"
                        .into(),
                ));
            }
            match market.assets.first() {
                Some(AssetModel::Gbm { sigma, .. }) if *sigma > 0.0 => {}
                Some(AssetModel::DiffusionSv { .. }) => {}
                _ => {
                    return Err(Error::Unsupported(
                        "the asymptotically optimal strategy needs a single diffusion asset \
                         with positive volatility"
                            .into(),
                    ))
                }
            }
        }
        Ok(Simulator {
            claims: claims.clone(),
            market: market.clone(),
            strategy: strategy.clone(),
            x,
            eps,
            mesh,
            seed,
            tilt,
            claim_tail_index,
        })
    }

    /// Simulate one path and decide ruin through both representations.
    pub fn run_path(&self, path_index: u64) -> Result<PathOutcome> {
        let sim = self.build_path(path_index)?;
        let ruined = ruin_from_solution(self.x, self.eps, &sim.reserve.solution)?;
        Ok(PathOutcome {
            ruined,
            weight: sim.log_weight.exp(),
        })
    }

    fn build_path(&self, path_index: u64) -> Result<PathArtifacts> {
        let mut rng_claims = stream_rng(self.seed, path_index, Driver::Claims);
        let (claim_jumps, log_weight) =
            sample_claim_jumps_tilted(&self.claims, self.tilt, &mut rng_claims)?;

        let mut events: Vec<f64> = claim_jumps.iter().map(|c| c.time).collect();
        let mut asset_jumps = Vec::with_capacity(self.market.n_assets());
        let mut asset_rngs = Vec::with_capacity(self.market.n_assets());
        for (k, asset) in self.market.assets.iter().enumerate() {
            let mut rng = stream_rng(self.seed, path_index, Driver::Asset(k as u32));
            let jumps = sample_asset_jumps(asset, &mut rng)?;
            events.extend(jumps.iter().map(|j| j.time));
            asset_jumps.push(jumps);
            asset_rngs.push(rng);
        }
        events.extend(self.market.rate.interior_breakpoints());

        let grid = Grid::with_event_times(self.mesh, &events)?;
        let rate_cells = self.market.rate.cell_rates(&grid)?;
        let y = sample_y_increments(&self.claims, &grid, &claim_jumps, &mut rng_claims)?;

        let mut assets: Vec<AssetPath> = Vec::with_capacity(self.market.n_assets());
        for (k, asset) in self.market.assets.iter().enumerate() {
            let variance = if let AssetModel::DiffusionSv { variance, .. } = asset {
                let mut rng_var = stream_rng(self.seed, path_index, Driver::Variance(k as u32));
                Some(simulate_cir_variance(variance, &grid, &mut rng_var)?)
            } else {
                None
            };
            let path = simulate_asset_return_increments(
                asset,
                &grid,
                &asset_jumps[k],
                variance.as_deref(),
                &mut asset_rngs[k],
            )?;
            assets.push(path);
        }

        let reserve = build_reserve(
            &self.strategy,
            self.claim_tail_index,
            self.x,
            self.eps,
            &grid,
            &rate_cells,
            &assets,
            &y,
        )?;
        Ok(PathArtifacts {
            reserve,
            log_weight,
        })
    }
}

struct PathArtifacts {
    reserve: SimulatedReserve,
    log_weight: f64,
}

#[derive(Debug, Default, Clone, Copy)]
struct Agg {
    ruin_count: u64,
    sum_w: f64,
    sum_w2: f64,
    sum_wr: f64,
    sum_wr2: f64,
}

impl Agg {
    fn add(&mut self, outcome: PathOutcome) {
        let w = outcome.weight;
        self.sum_w += w;
        self.sum_w2 += w * w;
        if outcome.ruined {
            self.ruin_count += 1;
            self.sum_wr += w;
            self.sum_wr2 += w * w;
        }
    }

    fn merge(&mut self, other: &Agg) {
        self.ruin_count += other.ruin_count;
        self.sum_w += other.sum_w;
        self.sum_w2 += other.sum_w2;
        self.sum_wr += other.sum_wr;
        self.sum_wr2 += other.sum_wr2;
    }
}

fn run_aggregated(sim: &Simulator, n_paths: u64) -> Result<Agg> {
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", "need at least one path"));
    }
    let n_chunks = n_paths.div_ceil(CHUNK);
    let partials: Vec<Agg> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = n_paths.min(start + CHUNK);
            let mut agg = Agg::default();
            for path_index in start..end {
                agg.add(sim.run_path(path_index)?);
            }
            Ok(agg)
        })
        .collect::<Result<Vec<Agg>>>()?;
    let mut total = Agg::default();
    for partial in &partials {
        total.merge(partial);
    }
    Ok(total)
}

fn finish_estimate(sim: &Simulator, n_paths: u64, agg: &Agg) -> Result<RuinEstimate> {
    let n = n_paths as f64;
    let p_hat = agg.sum_wr / n;
    let ci_halfwidth = if sim.tilt == 0.0 {
        binomial_ci_halfwidth(agg.ruin_count, n_paths)
    } else {
        weighted_ci_halfwidth(agg.sum_wr, agg.sum_wr2, n_paths)
    };
    let normalized_ratio = if sim.eps > 0.0 {
        p_hat / sim.claims.levy_tail().eval(1.0 / sim.eps)?
    } else {
        f64::NAN
    };
    Ok(RuinEstimate {
        eps: sim.eps,
        x: sim.x,
        n_paths,
        ruin_count: agg.ruin_count,
        p_hat,
        ci_halfwidth,
        normalized_ratio,
        seed: sim.seed,
    })
}

/// Plain Monte Carlo estimate of
/// `P(inf over [0,1] of the reserve < 0)`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_ruin_probability(
    claims: &ClaimsProcessSpec,
    market: &MarketModel,
    strategy: &Strategy,
    x: f64,
    eps: f64,
    n_paths: u64,
    mesh: f64,
    seed: u64,
) -> Result<RuinEstimate> {
    let sim = Simulator::new(claims, market, strategy, x, eps, mesh, seed, 0.0)?;
    let agg = run_aggregated(&sim, n_paths)?;
    finish_estimate(&sim, n_paths, &agg)
}

/// Importance-sampled estimate: claim sizes are drawn from the tilted
/// Pareto with index `alpha - theta` and every path carries the product of
/// per-claim likelihood ratios. `theta = 0` reproduces the plain estimator
/// path for path.
#[allow(clippy::too_many_arguments)]
pub fn estimate_ruin_probability_is(
    claims: &ClaimsProcessSpec,
    market: &MarketModel,
    strategy: &Strategy,
    x: f64,
    eps: f64,
    n_paths: u64,
    mesh: f64,
    seed: u64,
    theta: f64,
) -> Result<RuinEstimate> {
    let (estimate, _) = estimate_ruin_probability_is_detailed(
        claims, market, strategy, x, eps, n_paths, mesh, seed, theta,
    )?;
    Ok(estimate)
}

/// Importance-sampled estimate together with the weight diagnostics.
#[allow(clippy::too_many_arguments)]
pub fn estimate_ruin_probability_is_detailed(
    claims: &ClaimsProcessSpec,
    market: &MarketModel,
    strategy: &Strategy,
    x: f64,
    eps: f64,
    n_paths: u64,
    mesh: f64,
    seed: u64,
    theta: f64,
) -> Result<(RuinEstimate, WeightDiagnostics)> {
    let sim = Simulator::new(claims, market, strategy, x, eps, mesh, seed, theta)?;
    let agg = run_aggregated(&sim, n_paths)?;
    let estimate = finish_estimate(&sim, n_paths, &agg)?;
    let n = n_paths as f64;
    let mean = agg.sum_w / n;
    let std_error = if n_paths > 1 {
        let var = ((agg.sum_w2 - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok((estimate, WeightDiagnostics { mean, std_error }))
}

/// Per-path ruin indicators, in path-index order. Meant for coupling
/// studies (monotonicity in `x`, scale invariance) where two runs on the
/// same seed are compared path by path.
#[allow(clippy::too_many_arguments)]
pub fn simulate_ruin_flags(
    claims: &ClaimsProcessSpec,
    market: &MarketModel,
    strategy: &Strategy,
    x: f64,
    eps: f64,
    n_paths: u64,
    mesh: f64,
    seed: u64,
) -> Result<Vec<bool>> {
    let sim = Simulator::new(claims, market, strategy, x, eps, mesh, seed, 0.0)?;
    let n_chunks = n_paths.div_ceil(CHUNK);
    let chunks: Vec<Vec<bool>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = n_paths.min(start + CHUNK);
            let mut flags = Vec::with_capacity((end - start) as usize);
            for path_index in start..end {
                flags.push(sim.run_path(path_index)?.ruined);
            }
            Ok(flags)
        })
        .collect::<Result<Vec<Vec<bool>>>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// One rung of an eps-ladder study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub estimate: RuinEstimate,
    /// The limit value `x^{-alpha} K` the normalized ratio converges to.
    pub limit: f64,
    /// The full approximation `nu(-inf, -1/eps) * x^{-alpha} * K`.
    pub approx: f64,
    /// `normalized_ratio / limit`; 1 in the small-eps regime.
    pub ratio_to_limit: f64,
}

/// Ladder of estimates against the large-deviation limit.
#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub constant: AsymptoticConstant,
    pub rows: Vec<ConvergenceRow>,
}

/// Run the estimator down a strictly decreasing eps-ladder and report each
/// rung against `x^{-alpha} K`. All rungs share the master seed, so they are
/// coupled: a path's driving noise is identical across rungs and the ruin
/// sets shrink as eps does. `K` is taken in closed form when the portfolio
/// process is a Levy process with closed-form jump moments, otherwise
/// estimated by Monte Carlo quadrature on the same seed.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    claims: &ClaimsProcessSpec,
    market: &MarketModel,
    strategy: &Strategy,
    x: f64,
    ladder: &[f64],
    n_paths: u64,
    mesh: f64,
    seed: u64,
    theta: f64,
) -> Result<ConvergenceTable> {
    if ladder.is_empty() {
        return Err(Error::invalid("eps", "the ladder must be non-empty"));
    }
    if !ladder.windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::invalid(
            "eps",
            "the ladder must be strictly decreasing",
        ));
    }
    if ladder.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::invalid("eps", "ladder entries must be > 0"));
    }
    let alpha = claims.claim_law.tail_index().ok_or_else(|| {
        Error::Unsupported("the normalized ratio needs a regularly varying claim law".into())
    })?;

    let constant = match asymptotics::closed_form_constant(market, strategy, alpha)? {
        Some(k) => k,
        None => {
            let k_paths = n_paths.clamp(10_000, 200_000);
            asymptotics::estimate_constant_mc(market, strategy, alpha, k_paths, mesh, seed)?
        }
    };
    let limit = x.powf(-alpha) * constant.value;
    let tail = claims.levy_tail();

    let mut rows = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        let estimate = if theta == 0.0 {
            estimate_ruin_probability(claims, market, strategy, x, eps, n_paths, mesh, seed)?
        } else {
            estimate_ruin_probability_is(
                claims, market, strategy, x, eps, n_paths, mesh, seed, theta,
            )?
        };
        let approx = tail.eval(1.0 / eps)? * limit;
        let ratio_to_limit = estimate.normalized_ratio / limit;
        rows.push(ConvergenceRow {
            estimate,
            limit,
            approx,
            ratio_to_limit,
        });
    }
    Ok(ConvergenceTable { constant, rows })
}

/// Pathwise time integral of `E(Z)_t^{-alpha}` for one market path with no
/// claims noise; trapezoidal in time with the left limit at each cell's
/// right end, so pure-jump paths integrate exactly.
pub(crate) fn sample_inverse_moment_integral(
    market: &MarketModel,
    strategy: &Strategy,
    alpha: f64,
    mesh: f64,
    seed: u64,
    path_index: u64,
) -> Result<f64> {
    let mut events: Vec<f64> = Vec::new();
    let mut asset_jumps = Vec::with_capacity(market.n_assets());
    let mut asset_rngs = Vec::with_capacity(market.n_assets());
    for (k, asset) in market.assets.iter().enumerate() {
        let mut rng = stream_rng(seed, path_index, Driver::Asset(k as u32));
        let jumps = sample_asset_jumps(asset, &mut rng)?;
        events.extend(jumps.iter().map(|j| j.time));
        asset_jumps.push(jumps);
        asset_rngs.push(rng);
    }
    events.extend(market.rate.interior_breakpoints());
    let grid = Grid::with_event_times(mesh, &events)?;
    let rate_cells = market.rate.cell_rates(&grid)?;

    let mut assets: Vec<AssetPath> = Vec::with_capacity(market.n_assets());
    for (k, asset) in market.assets.iter().enumerate() {
        let variance = if let AssetModel::DiffusionSv { variance, .. } = asset {
            let mut rng_var = stream_rng(seed, path_index, Driver::Variance(k as u32));
            Some(simulate_cir_variance(variance, &grid, &mut rng_var)?)
        } else {
            None
        };
        let path = simulate_asset_return_increments(
            asset,
            &grid,
            &asset_jumps[k],
            variance.as_deref(),
            &mut asset_rngs[k],
        )?;
        assets.push(path);
    }

    let y = Increments::zeros(grid.n_cells());
    let sim = build_reserve(
        strategy,
        Some(alpha),
        1.0,
        0.0,
        &grid,
        &rate_cells,
        &assets,
        &y,
    )?;

    let expz = &sim.expz;
    let mut integral = 0.0;
    for i in 0..grid.n_cells() {
        let left = expz.values[i];
        let right = expz.left_limits[i];
        if !(left > 0.0 && right > 0.0) {
            return Err(Error::Inconsistency(format!(
                "non-positive stochastic exponential at cell {i}: {left}, {right}"
            )));
        }
        integral += 0.5 * (left.powf(-alpha) + right.powf(-alpha)) * grid.dt(i);
    }
    Ok(integral)
}

/// 95% half-width for a binomial proportion: exact Clopper-Pearson when the
/// success count is below 30, normal approximation otherwise.
pub fn binomial_ci_halfwidth(successes: u64, trials: u64) -> f64 {
    let n = trials as f64;
    if successes < 30 {
        let (lo, hi) = clopper_pearson(successes, trials, 0.95);
        0.5 * (hi - lo)
    } else {
        let p = successes as f64 / n;
        Z95 * (p * (1.0 - p) / n).sqrt()
    }
}

fn weighted_ci_halfwidth(sum_wr: f64, sum_wr2: f64, trials: u64) -> f64 {
    let n = trials as f64;
    let mean = sum_wr / n;
    if trials < 2 {
        return 0.0;
    }
    let var = ((sum_wr2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Z95 * (var / n).sqrt()
}

/// Exact Clopper-Pearson confidence bounds for a binomial proportion,
/// obtained by bisection on the binomial CDF.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    assert!(confidence > 0.0 && confidence < 1.0);
    let tail = 0.5 * (1.0 - confidence);
    let lower = if successes == 0 {
        0.0
    } else {
        // P(X >= k | p) = tail  <=>  cdf(k-1; p) = 1 - tail
        bisect_cdf(successes - 1, trials, 1.0 - tail)
    };
    let upper = if successes == trials {
        1.0
    } else {
        // P(X <= k | p) = tail
        bisect_cdf(successes, trials, tail)
    };
    (lower, upper)
}

fn bisect_cdf(j_max: u64, n: u64, target: f64) -> f64 {
    // binom_cdf(j_max, n, p) decreases monotonically from 1 to 0 in p
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if binom_cdf(j_max, n, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn binom_cdf(j_max: u64, n: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return if j_max >= n { 1.0 } else { 0.0 };
    }
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let mut ln_choose = 0.0;
    let mut acc = 0.0;
    for j in 0..=j_max {
        if j > 0 {
            ln_choose += ((n - j + 1) as f64 / j as f64).ln();
        }
        acc += (ln_choose + j as f64 * ln_p + (n - j) as f64 * ln_q).exp();
    }
    acc.min(1.0)
}
