//! The premiums-minus-claims process: drift, optional Gaussian part, and
//! compound-Poisson claims with a heavy (regularly varying) left tail.
//!
//! Claims enter the process as negative jumps at their exact arrival times;
//! nothing is rounded onto the mesh. The Levy-measure left tail
//! `u -> nu(-inf, -u)` is closed-form for the supported claim laws, which is
//! what makes exact normalizers possible in the ruin-ratio experiments.

use rand::distr::OpenClosed01;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{require_finite, Error, Result};
use crate::stoch::{Grid, Increments};

/// Distribution of a single (positive) claim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum ClaimLaw {
    /// `P(claim > u) = (scale/u)^alpha` for `u >= scale`; regularly varying
    /// with index `-alpha`.
    Pareto { alpha: f64, scale: f64 },
    /// Uniform on `[lo, hi]` with `0 < lo <= hi`; bounded-support
    /// alternative for tests.
    Uniform { lo: f64, hi: f64 },
}

impl ClaimLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ClaimLaw::Pareto { alpha, scale } => {
                require_finite("claims.alpha", alpha)?;
                require_finite("claims.scale", scale)?;
                if !(alpha > 0.0) {
                    return Err(Error::invalid(
                        "claims.alpha",
                        format!("{alpha} must be > 0"),
                    ));
                }
                if !(scale > 0.0) {
                    return Err(Error::invalid(
                        "claims.scale",
                        format!("{scale} must be > 0"),
                    ));
                }
            }
            ClaimLaw::Uniform { lo, hi } => {
                require_finite("claims.lo", lo)?;
                require_finite("claims.hi", hi)?;
                if !(lo > 0.0 && hi >= lo) {
                    return Err(Error::invalid(
                        "claims.uniform",
                        format!("need 0 < lo <= hi, got [{lo}, {hi}]"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Survival function `P(claim > u)` for `u > 0`.
    pub fn survival(&self, u: f64) -> f64 {
        match *self {
            ClaimLaw::Pareto { alpha, scale } => {
                if u <= scale {
                    1.0
                } else {
                    (scale / u).powf(alpha)
                }
            }
            ClaimLaw::Uniform { lo, hi } => {
                if u <= lo {
                    1.0
                } else if u >= hi {
                    0.0
                } else {
                    (hi - u) / (hi - lo)
                }
            }
        }
    }

    /// Tail index of regular variation, when the law has one.
    pub fn tail_index(&self) -> Option<f64> {
        match *self {
            ClaimLaw::Pareto { alpha, .. } => Some(alpha),
            ClaimLaw::Uniform { .. } => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ClaimLaw::Pareto { alpha, scale } => {
                let u: f64 = rng.sample(OpenClosed01);
                scale * u.powf(-1.0 / alpha)
            }
            ClaimLaw::Uniform { lo, hi } => {
                let u: f64 = rng.random();
                lo + (hi - lo) * u
            }
        }
    }
}

/// The premiums-minus-claims process.
///
/// Over a unit horizon the process is `c t + sigma B_t - sum of claims`,
/// with claim arrivals Poisson at rate `claim_intensity`. Immutable after
/// construction and safe to share across path workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimsProcessSpec {
    /// Premium income per unit time, `c >= 0`.
    pub premium_drift: f64,
    /// Volatility of the small-fluctuation Gaussian part; may be 0.
    pub diffusion_vol: f64,
    /// Poisson arrival rate of claims. Zero is allowed as a degenerate case
    /// for tests (no claims ever arrive).
    pub claim_intensity: f64,
    pub claim_law: ClaimLaw,
}

impl ClaimsProcessSpec {
    pub fn validate(&self) -> Result<()> {
        require_finite("claims.premium", self.premium_drift)?;
        require_finite("claims.diffusion_vol", self.diffusion_vol)?;
        require_finite("claims.intensity", self.claim_intensity)?;
        if !(self.premium_drift >= 0.0) {
            return Err(Error::invalid(
                "claims.premium",
                format!("{} must be >= 0", self.premium_drift),
            ));
        }
        if !(self.diffusion_vol >= 0.0) {
            return Err(Error::invalid(
                "claims.diffusion_vol",
                format!("{} must be >= 0", self.diffusion_vol),
            ));
        }
        if !(self.claim_intensity >= 0.0) {
            return Err(Error::invalid(
                "claims.intensity",
                format!("{} must be >= 0", self.claim_intensity),
            ));
        }
        self.claim_law.validate()
    }

    /// The Levy-measure left tail of this process, `u -> nu(-inf, -u)`.
    pub fn levy_tail(&self) -> LevyMeasureTail {
        LevyMeasureTail {
            intensity: self.claim_intensity,
            law: self.claim_law,
        }
    }
}

/// The left tail `u -> nu(-inf, -u)` of the claims process' Levy measure.
///
/// For Pareto claims with `u >= scale` this is exactly
/// `intensity * (scale/u)^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyMeasureTail {
    pub intensity: f64,
    pub law: ClaimLaw,
}

impl LevyMeasureTail {
    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) {
            return Err(Error::invalid("u", format!("{u} must be > 0")));
        }
        Ok(self.intensity * self.law.survival(u))
    }

    pub fn tail_index(&self) -> Option<f64> {
        self.law.tail_index()
    }
}

/// `nu(-inf, -u) = intensity * P(claim > u)` for `u > 0`.
pub fn tail(spec: &ClaimsProcessSpec, u: f64) -> Result<f64> {
    spec.validate()?;
    spec.levy_tail().eval(u)
}

/// One claim: arrival time in (0, 1] and (negative) jump size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaimJump {
    pub time: f64,
    pub size: f64,
}

/// Draw the claim arrivals of one path: Poisson count, i.i.d. uniform times
/// sorted ascending, i.i.d. sizes entering with negative sign. The draw
/// order (count, times, sizes) is fixed; it is part of the reproducibility
/// contract.
pub fn sample_claim_jumps<R: Rng + ?Sized>(
    spec: &ClaimsProcessSpec,
    rng: &mut R,
) -> Result<Vec<ClaimJump>> {
    spec.validate()?;
    let (jumps, _) = sample_claim_jumps_tilted(spec, 0.0, rng)?;
    Ok(jumps)
}

/// Tilted variant for importance sampling: claim sizes are drawn from a
/// Pareto with index `alpha - theta`; the second return value is the
/// log-likelihood ratio of the original law against the proposal, summed
/// over claims. With `theta = 0` the draws and the zero log-weight are
/// bitwise identical to the plain sampler.
pub fn sample_claim_jumps_tilted<R: Rng + ?Sized>(
    spec: &ClaimsProcessSpec,
    theta: f64,
    rng: &mut R,
) -> Result<(Vec<ClaimJump>, f64)> {
    spec.validate()?;
    let law = if theta == 0.0 {
        spec.claim_law
    } else {
        match spec.claim_law {
            ClaimLaw::Pareto { alpha, scale } => {
                if !(theta > 0.0 && theta < alpha) {
                    return Err(Error::invalid(
                        "theta",
                        format!("tilt {theta} must lie in [0, alpha = {alpha})"),
                    ));
                }
                ClaimLaw::Pareto {
                    alpha: alpha - theta,
                    scale,
                }
            }
            ClaimLaw::Uniform { .. } => {
                return Err(Error::Unsupported(
                    "importance sampling tilts are defined for Pareto claims only".into(),
                ))
            }
        }
    };

    let count = poisson_count(spec.claim_intensity, rng)?;
    let mut times: Vec<f64> = (0..count)
        .map(|_| {
            let u: f64 = rng.sample(OpenClosed01);
            u
        })
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut log_weight = 0.0;
    let jumps = times
        .into_iter()
        .map(|time| {
            let size = law.sample(rng);
            if theta != 0.0 {
                if let ClaimLaw::Pareto { alpha, scale } = spec.claim_law {
                    // log of f_alpha(z) / f_{alpha - theta}(z)
                    log_weight += (alpha / (alpha - theta)).ln() + theta * (scale.ln() - size.ln());
                }
            }
            ClaimJump { time, size: -size }
        })
        .collect();
    Ok((jumps, log_weight))
}

fn poisson_count<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<usize> {
    if rate == 0.0 {
        return Ok(0);
    }
    let poisson = Poisson::new(rate)
        .map_err(|e| Error::invalid("intensity", format!("Poisson rate {rate}: {e}")))?;
    let draw: f64 = poisson.sample(rng);
    Ok(draw as usize)
}

/// Fill the per-cell increments of the premiums-minus-claims process on a
/// grid that already contains every claim time as a node.
///
/// Continuous part per cell: `c dt + sigma sqrt(dt) N`. Each claim
/// contributes its (negative) size as the jump at its own node; a grid
/// missing one of the claim times is a contract violation.
pub fn sample_y_increments<R: Rng + ?Sized>(
    spec: &ClaimsProcessSpec,
    grid: &Grid,
    claims: &[ClaimJump],
    rng: &mut R,
) -> Result<Increments> {
    spec.validate()?;
    let n = grid.n_cells();
    let mut inc = Increments::zeros(n);
    for claim in claims {
        let cell = grid.cell_ending_at(claim.time).ok_or_else(|| {
            Error::GridMismatch(format!("claim time {} is not a grid node", claim.time))
        })?;
        if !(claim.size < 0.0) {
            return Err(Error::invalid(
                "claims",
                format!("claim jump {} must be negative", claim.size),
            ));
        }
        inc.jump[cell] += claim.size;
    }
    let c = spec.premium_drift;
    let sigma = spec.diffusion_vol;
    for i in 0..n {
        let dt = grid.dt(i);
        let mut cell = c * dt;
        if sigma > 0.0 {
            let g: f64 = rng.sample(StandardNormal);
            cell += sigma * dt.sqrt() * g;
        }
        inc.cont[i] = cell;
        inc.qv[i] = sigma * sigma * dt;
    }
    Ok(inc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Driver};

    fn pareto_spec(alpha: f64, scale: f64, intensity: f64) -> ClaimsProcessSpec {
        ClaimsProcessSpec {
            premium_drift: 1.0,
            diffusion_vol: 0.0,
            claim_intensity: intensity,
            claim_law: ClaimLaw::Pareto { alpha, scale },
        }
    }

    #[test]
    fn pareto_tail_closed_form() {
        let spec = pareto_spec(2.0, 1.0, 1.0);
        assert!((tail(&spec, 10.0).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(tail(&spec, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn pareto_tail_matches_numeric_survival() {
        // Independent check: integrate the Pareto density alpha x_m^a z^{-a-1}
        // from u upward by midpoint quadrature on 1/z.
        let spec = pareto_spec(1.5, 2.0, 3.0);
        let (alpha, scale, u) = (1.5f64, 2.0f64, 8.0f64);
        let survival_quad = {
            // substitute z = u / w, w in (0, 1]: integral of a x_m^a u^{-a} w^{a-1} dw
            let n = 200_000;
            let mut acc = 0.0;
            for k in 0..n {
                let w = (k as f64 + 0.5) / n as f64;
                acc += alpha * scale.powf(alpha) * u.powf(-alpha) * w.powf(alpha - 1.0);
            }
            acc / n as f64
        };
        let got = tail(&spec, u).unwrap();
        assert!(
            (got - 3.0 * survival_quad).abs() < 1e-6,
            "{got} vs {}",
            3.0 * survival_quad
        );
        assert!((got - 0.375).abs() < 1e-12);
    }

    #[test]
    fn tail_rejects_nonpositive_u() {
        let spec = pareto_spec(2.0, 1.0, 1.0);
        assert!(tail(&spec, 0.0).is_err());
        assert!(tail(&spec, -1.0).is_err());
    }

    #[test]
    fn zero_intensity_yields_no_claims() {
        let spec = pareto_spec(2.0, 1.0, 0.0);
        let mut rng = stream_rng(1, 0, Driver::Claims);
        assert!(sample_claim_jumps(&spec, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn claim_sampling_is_reproducible() {
        let spec = pareto_spec(2.0, 1.0, 4.0);
        let a = sample_claim_jumps(&spec, &mut stream_rng(9, 5, Driver::Claims)).unwrap();
        let b = sample_claim_jumps(&spec, &mut stream_rng(9, 5, Driver::Claims)).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(a
            .iter()
            .all(|c| c.size < 0.0 && c.time > 0.0 && c.time <= 1.0));
    }

    #[test]
    fn claim_count_matches_poisson_mean() {
        let spec = pareto_spec(2.0, 1.0, 4.0);
        let n = 100_000u64;
        let mut total = 0usize;
        for path in 0..n {
            let mut rng = stream_rng(11, path, Driver::Claims);
            total += sample_claim_jumps(&spec, &mut rng).unwrap().len();
        }
        let mean = total as f64 / n as f64;
        // Poisson(4): SE of the sample mean is sqrt(4/n)
        let se = (4.0 / n as f64).sqrt();
        assert!((mean - 4.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn claim_sizes_pass_ks_against_pareto_cdf() {
        let law = ClaimLaw::Pareto {
            alpha: 2.0,
            scale: 1.0,
        };
        let n = 100_000usize;
        let mut rng = stream_rng(13, 0, Driver::Claims);
        let mut samples: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut d = 0.0f64;
        for (i, z) in samples.iter().enumerate() {
            let cdf = 1.0 - law.survival(*z);
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
        }
        // Kolmogorov-Smirnov critical value at the 1% level for large n
        let critical = 1.628 / (n as f64).sqrt();
        assert!(d < critical, "KS statistic {d} exceeds {critical}");
    }

    #[test]
    fn increments_place_drift_and_claims() {
        let spec = pareto_spec(2.0, 1.0, 1.0);
        let grid = Grid::with_event_times(0.25, &[0.4]).unwrap();
        let claims = [ClaimJump {
            time: 0.4,
            size: -5.0,
        }];
        let mut rng = stream_rng(1, 0, Driver::Claims);
        let y = sample_y_increments(&spec, &grid, &claims, &mut rng).unwrap();
        for i in 0..grid.n_cells() {
            assert_eq!(y.cont[i], grid.dt(i), "drift-only cells carry c * dt");
        }
        assert_eq!(y.jump[grid.cell_ending_at(0.4).unwrap()], -5.0);
        let total: f64 = y.cont.iter().sum::<f64>() + y.jump.iter().sum::<f64>();
        assert!((total - (1.0 - 5.0)).abs() < 1e-12);
    }

    #[test]
    fn increments_require_claim_nodes() {
        let spec = pareto_spec(2.0, 1.0, 1.0);
        let grid = Grid::uniform(0.25).unwrap();
        let claims = [ClaimJump {
            time: 0.4,
            size: -5.0,
        }];
        let mut rng = stream_rng(1, 0, Driver::Claims);
        assert!(matches!(
            sample_y_increments(&spec, &grid, &claims, &mut rng),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn terminal_mean_matches_analytic_value() {
        // E Y_1 = c - lambda E[claim]; Pareto(2, 1) has mean 2.
        let spec = pareto_spec(2.0, 1.0, 1.0);
        let n = 100_000u64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for path in 0..n {
            let mut rng = stream_rng(17, path, Driver::Claims);
            let claims = sample_claim_jumps(&spec, &mut rng).unwrap();
            let times: Vec<f64> = claims.iter().map(|c| c.time).collect();
            let grid = Grid::with_event_times(0.25, &times).unwrap();
            let y = sample_y_increments(&spec, &grid, &claims, &mut rng).unwrap();
            let terminal = y.node_values().terminal();
            sum += terminal;
            sumsq += terminal * terminal;
        }
        let mean = sum / n as f64;
        let var = (sumsq - n as f64 * mean * mean) / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        let expected = 1.0 - 1.0 * 2.0;
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "mean {mean}, expected {expected}, se {se}"
        );
    }

    #[test]
    fn tilted_sampler_with_zero_tilt_is_identical() {
        let spec = pareto_spec(2.0, 1.0, 3.0);
        let plain = sample_claim_jumps(&spec, &mut stream_rng(3, 7, Driver::Claims)).unwrap();
        let (tilted, logw) =
            sample_claim_jumps_tilted(&spec, 0.0, &mut stream_rng(3, 7, Driver::Claims)).unwrap();
        assert_eq!(plain, tilted);
        assert_eq!(logw, 0.0);
    }

    #[test]
    fn tilted_sampler_rejects_bad_tilt() {
        let spec = pareto_spec(2.0, 1.0, 3.0);
        let mut rng = stream_rng(3, 7, Driver::Claims);
        assert!(sample_claim_jumps_tilted(&spec, 2.0, &mut rng).is_err());
        assert!(sample_claim_jumps_tilted(&spec, -0.5, &mut rng).is_err());
    }
}
