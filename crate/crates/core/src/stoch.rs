//! Path-level stochastic calculus on a shared time grid.
//!
//! All processes of one path live on a single [`Grid`]: a uniform mesh on
//! [0, 1] merged with the exact jump times of every driver. A cadlag
//! semimartingale is carried as per-cell [`Increments`]; derived quantities
//! (the stochastic exponential, stochastic integrals, the reserve) are node
//! value paths. Integrands always enter integrals predictably: the value at
//! a cell's left node multiplies the continuous increment, the left limit at
//! the cell's right node multiplies the jump placed there. Jumps from
//! independent drivers land on distinct nodes, which keeps the pure-jump
//! identities below exact up to rounding.

use crate::error::{Error, Result};

/// Strictly increasing node times `0 = t_0 < ... < t_N = 1`.
///
/// Cell `i` (0-based) covers the half-open interval `(t_i, t_{i+1}]`; a jump
/// recorded in cell `i` sits exactly at the right node `t_{i+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    times: Vec<f64>,
}

impl Grid {
    /// Uniform grid with `round(1/mesh)` cells.
    pub fn uniform(mesh: f64) -> Result<Grid> {
        let n = cells_for_mesh(mesh)?;
        let times = (0..=n).map(|k| k as f64 / n as f64).collect();
        Ok(Grid { times })
    }

    /// Uniform grid merged with event times in (0, 1]; duplicates collapse
    /// onto a single node.
    pub fn with_event_times(mesh: f64, events: &[f64]) -> Result<Grid> {
        let n = cells_for_mesh(mesh)?;
        for &t in events {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::invalid(
                    "events",
                    format!("event time {t} outside (0, 1]"),
                ));
            }
        }
        let mut sorted = events.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("event times must not be NaN"));

        let mut times = Vec::with_capacity(n + 1 + sorted.len());
        times.push(0.0);
        let mut ev = sorted.iter().copied().peekable();
        for k in 1..=n {
            let node = k as f64 / n as f64;
            while let Some(&t) = ev.peek() {
                if t < node {
                    if t > *times.last().unwrap() {
                        times.push(t);
                    }
                    ev.next();
                } else if t == node {
                    ev.next();
                } else {
                    break;
                }
            }
            times.push(node);
        }
        Ok(Grid { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_cells(&self) -> usize {
        self.times.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.times.len()
    }

    /// Width of cell `i`, i.e. `t_{i+1} - t_i`.
    pub fn dt(&self, cell: usize) -> f64 {
        self.times[cell + 1] - self.times[cell]
    }

    /// Node index holding exactly time `t`, if present.
    pub fn node_at(&self, t: f64) -> Option<usize> {
        self.times
            .binary_search_by(|x| x.partial_cmp(&t).unwrap())
            .ok()
    }

    /// Cell index whose right node is exactly `t`.
    pub fn cell_ending_at(&self, t: f64) -> Option<usize> {
        match self.node_at(t) {
            Some(0) | None => None,
            Some(i) => Some(i - 1),
        }
    }
}

fn cells_for_mesh(mesh: f64) -> Result<usize> {
    if !(mesh > 0.0 && mesh <= 1.0) {
        return Err(Error::invalid(
            "mesh",
            format!("mesh {mesh} must lie in (0, 1]"),
        ));
    }
    let n = (1.0 / mesh).round() as usize;
    // 2^26 cells is ~0.5 GB of path state; anything finer is a typo
    if n > (1 << 26) {
        return Err(Error::invalid(
            "mesh",
            format!("mesh {mesh} needs {n} cells per path"),
        ));
    }
    Ok(n.max(1))
}

/// Per-cell increments of a cadlag semimartingale on a [`Grid`].
#[derive(Debug, Clone)]
pub struct Increments {
    /// Continuous-part increment over each cell (drift plus Gaussian part).
    pub cont: Vec<f64>,
    /// Jump at each cell's right node; 0.0 where there is none.
    pub jump: Vec<f64>,
    /// Continuous quadratic variation accumulated over each cell. Filled
    /// from model volatilities (sigma^2 * dt terms), never from squared
    /// increments, so drift-only and pure-jump paths carry exact zeros.
    pub qv: Vec<f64>,
}

impl Increments {
    pub fn zeros(n_cells: usize) -> Increments {
        Increments {
            cont: vec![0.0; n_cells],
            jump: vec![0.0; n_cells],
            qv: vec![0.0; n_cells],
        }
    }

    pub fn n_cells(&self) -> usize {
        self.cont.len()
    }

    /// Node values `t_i -> sum of increments over (0, t_i]`.
    ///
    /// Accumulated as `(acc + cont) + jump` per cell; other code that must
    /// reproduce these values bitwise relies on that association order.
    pub fn node_values(&self) -> ValuePath {
        let mut values = Vec::with_capacity(self.n_cells() + 1);
        let mut acc = 0.0;
        values.push(acc);
        for i in 0..self.n_cells() {
            acc = (acc + self.cont[i]) + self.jump[i];
            values.push(acc);
        }
        ValuePath { values }
    }

    fn check_cells(&self, grid: &Grid) -> Result<()> {
        if self.n_cells() != grid.n_cells()
            || self.jump.len() != self.cont.len()
            || self.qv.len() != self.cont.len()
        {
            return Err(Error::GridMismatch(format!(
                "increments carry {} cells, grid has {}",
                self.n_cells(),
                grid.n_cells()
            )));
        }
        Ok(())
    }
}

/// A process sampled at grid nodes; `values[i]` is the cadlag value at
/// `t_i` (after any jump there).
#[derive(Debug, Clone, PartialEq)]
pub struct ValuePath {
    pub values: Vec<f64>,
}

impl ValuePath {
    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// The Doleans-Dade exponential of a semimartingale, sampled at grid nodes.
///
/// Positive at every node whenever every jump of the integrator exceeds -1.
#[derive(Debug, Clone)]
pub struct StochasticExponential {
    /// Value at each node; `values[0] = 1`.
    pub values: Vec<f64>,
    /// Left limit at each cell's right node: the value after the cell's
    /// continuous move but before the jump placed at that node.
    pub left_limits: Vec<f64>,
}

impl StochasticExponential {
    /// The reciprocal, packaged for predictable integration.
    pub fn inverse_integrand(&self) -> PredictableIntegrand {
        let n = self.left_limits.len();
        let mut at_left_node = Vec::with_capacity(n);
        let mut before_jump = Vec::with_capacity(n);
        for i in 0..n {
            at_left_node.push(1.0 / self.values[i]);
            before_jump.push(1.0 / self.left_limits[i]);
        }
        PredictableIntegrand {
            at_left_node,
            before_jump,
        }
    }
}

/// An integrand sampled the way predictable (caglad) processes enter
/// stochastic integrals: per cell, the value at the left node multiplies the
/// continuous increment, and the left limit at the right node multiplies the
/// jump there.
#[derive(Debug, Clone)]
pub struct PredictableIntegrand {
    pub at_left_node: Vec<f64>,
    pub before_jump: Vec<f64>,
}

impl PredictableIntegrand {
    pub fn constant(value: f64, n_cells: usize) -> PredictableIntegrand {
        PredictableIntegrand {
            at_left_node: vec![value; n_cells],
            before_jump: vec![value; n_cells],
        }
    }
}

/// Evaluate the Doleans-Dade exponential of `z` on `grid`.
///
/// Per cell: multiply by `exp(cont - qv/2)`, then by `(1 + jump)`. The
/// continuous quadratic variation comes from the increments' analytic `qv`
/// field, so drift-only and pure-jump inputs are reproduced exactly.
/// Any jump at or below -1 is a hard error naming the offending node.
pub fn stochastic_exponential(grid: &Grid, z: &Increments) -> Result<StochasticExponential> {
    z.check_cells(grid)?;
    let n = z.n_cells();
    let mut values = Vec::with_capacity(n + 1);
    let mut left_limits = Vec::with_capacity(n);
    let mut current = 1.0;
    values.push(current);
    for i in 0..n {
        let before = current * (z.cont[i] - 0.5 * z.qv[i]).exp();
        left_limits.push(before);
        let jump = z.jump[i];
        if jump <= -1.0 {
            return Err(Error::JumpAtOrBelowMinusOne {
                node: i + 1,
                time: grid.times()[i + 1],
                jump,
            });
        }
        current = before * (1.0 + jump);
        values.push(current);
    }
    Ok(StochasticExponential {
        values,
        left_limits,
    })
}

/// Left-point stochastic integral of a predictable integrand against the
/// increments of `integrator`.
pub fn stochastic_integral(
    grid: &Grid,
    integrand: &PredictableIntegrand,
    integrator: &Increments,
) -> Result<ValuePath> {
    integrator.check_cells(grid)?;
    if integrand.at_left_node.len() != grid.n_cells()
        || integrand.before_jump.len() != grid.n_cells()
    {
        return Err(Error::GridMismatch(format!(
            "integrand carries {} cells, grid has {}",
            integrand.at_left_node.len(),
            grid.n_cells()
        )));
    }
    let n = grid.n_cells();
    let mut values = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    values.push(acc);
    for i in 0..n {
        acc = (acc + integrand.at_left_node[i] * integrator.cont[i])
            + integrand.before_jump[i] * integrator.jump[i];
        values.push(acc);
    }
    Ok(ValuePath { values })
}

/// The reserve path together with the integrator it was built from.
#[derive(Debug, Clone)]
pub struct ReserveSolution {
    /// `X_t = E(Z)_t (x + eps * I_t)` at each node.
    pub reserve: ValuePath,
    /// `I_t`, the integral of `1/E(Z)_{s-}` against the claims process.
    pub integrator: ValuePath,
}

/// Solve the perturbed linear equation explicitly: the reserve is the
/// stochastic exponential scaled by the perturbed initial capital. With
/// `eps = 0` this is exactly `x * E(Z)`.
pub fn solve_reserve(
    x: f64,
    eps: f64,
    expz: &StochasticExponential,
    grid: &Grid,
    y: &Increments,
) -> Result<ReserveSolution> {
    if !(x > 0.0) {
        return Err(Error::invalid(
            "x",
            format!("initial capital {x} must be > 0"),
        ));
    }
    if !(eps >= 0.0) {
        return Err(Error::invalid(
            "eps",
            format!("noise scale {eps} must be >= 0"),
        ));
    }
    let integrator = stochastic_integral(grid, &expz.inverse_integrand(), y)?;
    let values = expz
        .values
        .iter()
        .zip(&integrator.values)
        .map(|(&e, &i)| e * (x + eps * i))
        .collect();
    Ok(ReserveSolution {
        reserve: ValuePath { values },
        integrator,
    })
}

/// Ruin decision for a solved path, computed two ways: directly from the
/// reserve values, and from the integrator crossing `-x/eps`. The two
/// representations are algebraically identical; a disagreement is an
/// internal-consistency error.
pub fn ruin_from_solution(x: f64, eps: f64, solution: &ReserveSolution) -> Result<bool> {
    let direct = solution.reserve.min() < 0.0;
    let via_integrator = eps > 0.0 && solution.integrator.min() < -x / eps;
    if direct != via_integrator {
        return Err(Error::Inconsistency(format!(
            "ruin representations disagree: reserve min {} vs integrator min {} against -x/eps = {}",
            solution.reserve.min(),
            solution.integrator.min(),
            if eps > 0.0 { -x / eps } else { f64::NEG_INFINITY },
        )));
    }
    Ok(direct)
}

/// Sample drivers, solve, and decide ruin in one call.
pub fn ruin_indicator(
    x: f64,
    eps: f64,
    expz: &StochasticExponential,
    grid: &Grid,
    y: &Increments,
) -> Result<bool> {
    let solution = solve_reserve(x, eps, expz, grid, y)?;
    ruin_from_solution(x, eps, &solution)
}

/// Maximum residual of the integral equation
/// `X_t = x + int X_{s-} dZ_s + eps Y_t` over all nodes, with the integral
/// replayed as a left-point sum.
///
/// The pre-jump reserve needed at jump nodes is reconstructed from the node
/// values: `X_{t-} = X_t / (1 + dZ_t) - eps * dY_t`.
pub fn verify_sde_residual(
    x: f64,
    eps: f64,
    reserve: &ValuePath,
    z: &Increments,
    y: &Increments,
) -> Result<f64> {
    let n = z.n_cells();
    if y.n_cells() != n || reserve.values.len() != n + 1 {
        return Err(Error::GridMismatch(format!(
            "residual inputs disagree on cell count: z {}, y {}, reserve {} nodes",
            n,
            y.n_cells(),
            reserve.values.len()
        )));
    }
    let mut max_resid = 0.0f64;
    let mut integral = 0.0f64;
    let mut y_acc = 0.0f64;
    for i in 0..n {
        let x_left = reserve.values[i];
        let x_right = reserve.values[i + 1];
        let x_before_jump = x_right / (1.0 + z.jump[i]) - eps * y.jump[i];
        integral = (integral + x_left * z.cont[i]) + x_before_jump * z.jump[i];
        y_acc = (y_acc + y.cont[i]) + y.jump[i];
        let resid = x_right - (x + (integral + eps * y_acc));
        max_resid = max_resid.max(resid.abs());
    }
    Ok(max_resid)
}
