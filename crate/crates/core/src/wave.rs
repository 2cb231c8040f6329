//! Finite-`k` travelling waves
//!
//! ```text
//! -u'' - c u' = u(1-u) - k u v
//! -d v'' - c v' = r v(1-v) - alpha k u v
//! ```
//!
//! with `(u, v) -> (1, 0)` at `-inf` and `(0, 1)` at `+inf`, discretised by
//! centered differences on `[-L, L]` and solved for `(u, v, c)` by damped
//! Newton. One phase condition pins the translation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit::{LimitParams, LimitSolver, LimitWave, DEFAULT_C_TOL};
use crate::numerics::{solve_block_tridiagonal, Block2, Grid1D, Profile};

/// Target infinity norm of the discrete residual.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Slack allowed in the post-hoc monotonicity and range checks.
pub const SHAPE_TOL: f64 = 1e-10;

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 20;
const STALL_WINDOW: usize = 5;
const MAX_NEWTON: usize = 200;

/// Rescaled system parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub k: f64,
    pub alpha: f64,
    pub r: f64,
    pub d: f64,
}

impl SystemParams {
    pub fn new(k: f64, alpha: f64, r: f64, d: f64) -> Result<Self> {
        let p = Self { k, alpha, r, d };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 1.0 && self.k.is_finite()) {
            return Err(Error::invalid(format!("k must exceed 1, got {}", self.k)));
        }
        self.limit().validate()
    }

    pub fn limit(&self) -> LimitParams {
        LimitParams { alpha: self.alpha, r: self.r, d: self.d }
    }

    pub fn with_k(&self, k: f64) -> Self {
        Self { k, ..*self }
    }

    pub fn speed_bounds(&self) -> (f64, f64) {
        self.limit().speed_bounds()
    }
}

/// Which scalar equation pins the translation at `xi = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// `u(0) = 1/2`
    UHalf,
    /// `v(0) = 1/2`
    VHalf,
    /// `u(0) = v(0)`
    #[default]
    Cross,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uhalf" => Ok(Self::UHalf),
            "vhalf" => Ok(Self::VHalf),
            "cross" => Ok(Self::Cross),
            other => Err(Error::invalid(format!("unknown normalization {other:?}"))),
        }
    }
}

impl Normalization {
    fn residual(self, u0: f64, v0: f64) -> f64 {
        match self {
            Self::UHalf => u0 - 0.5,
            Self::VHalf => v0 - 0.5,
            Self::Cross => u0 - v0,
        }
    }

    /// Gradient with respect to `(u0, v0)`.
    fn gradient(self) -> [f64; 2] {
        match self {
            Self::UHalf => [1.0, 0.0],
            Self::VHalf => [0.0, 1.0],
            Self::Cross => [1.0, -1.0],
        }
    }
}

#[derive(Clone, Debug)]
pub struct TravellingWave {
    pub params: SystemParams,
    pub c: f64,
    pub u: Profile,
    pub v: Profile,
    pub normalization: Normalization,
    /// Infinity norm of [`wave_residual`].
    pub residual_norm: f64,
}

impl TravellingWave {
    pub fn grid(&self) -> &Grid1D {
        self.u.grid()
    }

    /// Index of `xi = 0`.
    pub fn centre(&self) -> usize {
        self.grid().nearest_index(0.0)
    }

    /// Rows `(xi, u, v)`.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.grid().points().zip(self.u.values().iter().zip(self.v.values())).map(|(x, (&u, &v))| (x, u, v))
    }
}

/// Spatial discretisation of the wave problem.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveOptions {
    pub normalization: Normalization,
    /// Half-length `L`; default `max(40, 40 sqrt(d/r))`.
    pub half_length: Option<f64>,
    /// Grid spacing; default `min(0.05, 0.25 / sqrt(k))`.
    pub spacing: Option<f64>,
    pub tol: f64,
}

impl Default for WaveOptions {
    fn default() -> Self {
        Self { normalization: Normalization::Cross, half_length: None, spacing: None, tol: RESIDUAL_TOL }
    }
}

impl WaveOptions {
    pub fn with_normalization(normalization: Normalization) -> Self {
        Self { normalization, ..Self::default() }
    }

    /// Symmetric grid with a node at `xi = 0`.
    pub fn grid(&self, params: &SystemParams) -> Result<Grid1D> {
        let half = self.half_length.unwrap_or_else(|| 40f64.max(40.0 * (params.d / params.r).sqrt()));
        let h = self.spacing.unwrap_or_else(|| default_spacing(params.k));
        if !(half > 0.0) || !(h > 0.0) {
            return Err(Error::invalid("grid length and spacing must be positive"));
        }
        let m = (half / h).ceil().max(2.0) as usize;
        Grid1D::new(-half, half, 2 * m + 1)
    }
}

/// Uniform spacing that resolves the `O(k^-1/3)` contact layer.
pub fn default_spacing(k: f64) -> f64 {
    0.05f64.min(0.25 / k.sqrt())
}

/// Starting point for Newton.
#[derive(Clone, Copy, Debug)]
pub enum Seed<'a> {
    /// Logistic ramps of width 5 centred at 0, `c = 0`.
    Logistic,
    /// A converged wave (any grid), interpolated.
    Wave(&'a TravellingWave),
    /// Segregated limit profiles.
    Limit(&'a LimitWave),
}

impl Seed<'_> {
    fn build(&self, grid: Grid1D) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let (u, v, c): (Vec<f64>, Vec<f64>, f64) = match self {
            Seed::Logistic => (
                grid.points().map(|x| 1.0 / (1.0 + (x / 5.0).exp())).collect(),
                grid.points().map(|x| 1.0 / (1.0 + (-x / 5.0).exp())).collect(),
                0.0,
            ),
            Seed::Wave(w) => (
                grid.points().map(|x| w.u.interpolate(x)).collect(),
                grid.points().map(|x| w.v.interpolate(x)).collect(),
                w.c,
            ),
            Seed::Limit(l) => {
                let (u, v): (Vec<f64>, Vec<f64>) = grid.points().map(|x| l.evaluate(x)).unzip();
                (u, v, l.c)
            }
        };
        Ok((u, v, c))
    }
}

/// Discrete residual: `u` equations at interior nodes, then `v` equations,
/// then the phase equation. Boundary nodes hold the Dirichlet values.
pub fn wave_residual(wave: &TravellingWave) -> Vec<f64> {
    let (fu, fv) = node_residuals(&wave.params, wave.u.values(), wave.v.values(), wave.c, wave.grid().spacing());
    let m = wave.centre();
    let mut out = fu;
    out.extend(fv);
    out.push(wave.normalization.residual(wave.u.values()[m], wave.v.values()[m]));
    out
}

fn node_residuals(p: &SystemParams, u: &[f64], v: &[f64], c: f64, h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = u.len();
    let h2 = h * h;
    let mut fu = Vec::with_capacity(n - 2);
    let mut fv = Vec::with_capacity(n - 2);
    for i in 1..n - 1 {
        let (ul, uc, ur) = (u[i - 1], u[i], u[i + 1]);
        let (vl, vc, vr) = (v[i - 1], v[i], v[i + 1]);
        let competition = p.k * uc * vc;
        fu.push(-(ur - 2.0 * uc + ul) / h2 - c * (ur - ul) / (2.0 * h) - uc * (1.0 - uc) + competition);
        fv.push(
            -p.d * (vr - 2.0 * vc + vl) / h2 - c * (vr - vl) / (2.0 * h) - p.r * vc * (1.0 - vc)
                + p.alpha * competition,
        );
    }
    (fu, fv)
}

struct NewtonSystem<'a> {
    params: &'a SystemParams,
    h: f64,
    centre: usize,
    normalization: Normalization,
}

impl NewtonSystem<'_> {
    /// Residual stacked per node as `[F_u, F_v]`, plus the phase residual.
    fn residual(&self, u: &[f64], v: &[f64], c: f64) -> (Vec<[f64; 2]>, f64) {
        let (fu, fv) = node_residuals(self.params, u, v, c, self.h);
        let stacked = fu.into_iter().zip(fv).map(|(a, b)| [a, b]).collect();
        (stacked, self.normalization.residual(u[self.centre], v[self.centre]))
    }

    fn norm(res: &(Vec<[f64; 2]>, f64)) -> f64 {
        res.0.iter().fold(res.1.abs(), |m, r| m.max(r[0].abs()).max(r[1].abs()))
    }

    /// Newton direction `(du, dv, dc)` for interior nodes via bordered
    /// elimination on the block-tridiagonal Jacobian.
    fn direction(&self, u: &[f64], v: &[f64], c: f64, res: &(Vec<[f64; 2]>, f64)) -> Result<(Vec<[f64; 2]>, f64)> {
        let p = self.params;
        let n = u.len();
        let interior = n - 2;
        let h = self.h;
        let h2 = h * h;
        let mut diag: Vec<Block2> = Vec::with_capacity(interior);
        let mut c_column: Vec<[f64; 2]> = Vec::with_capacity(interior);
        for i in 1..n - 1 {
            let (uc, vc) = (u[i], v[i]);
            diag.push([
                [2.0 / h2 - (1.0 - 2.0 * uc) + p.k * vc, p.k * uc],
                [p.alpha * p.k * vc, 2.0 * p.d / h2 - p.r * (1.0 - 2.0 * vc) + p.alpha * p.k * uc],
            ]);
            c_column.push([-(u[i + 1] - u[i - 1]) / (2.0 * h), -(v[i + 1] - v[i - 1]) / (2.0 * h)]);
        }
        let lower: Block2 = [[-1.0 / h2 + c / (2.0 * h), 0.0], [0.0, -p.d / h2 + c / (2.0 * h)]];
        let upper: Block2 = [[-1.0 / h2 - c / (2.0 * h), 0.0], [0.0, -p.d / h2 - c / (2.0 * h)]];
        let sub = vec![lower; interior - 1];
        let sup = vec![upper; interior - 1];
        let neg_f: Vec<[f64; 2]> = res.0.iter().map(|r| [-r[0], -r[1]]).collect();
        let mut sols = solve_block_tridiagonal(&sub, &diag, &sup, &[&neg_f, &c_column])?;
        let z2 = sols.pop().expect("two solutions");
        let z1 = sols.pop().expect("two solutions");
        // phase row acts on the centre node (interior index centre-1)
        let j = self.centre - 1;
        let g = self.normalization.gradient();
        let pz1 = g[0] * z1[j][0] + g[1] * z1[j][1];
        let pz2 = g[0] * z2[j][0] + g[1] * z2[j][1];
        if pz2.abs() < 1e-300 {
            return Err(Error::SingularPivot { row: n, pivot: pz2 });
        }
        let dc = (pz1 + res.1) / pz2;
        let dx = z1.iter().zip(&z2).map(|(a, b)| [a[0] - dc * b[0], a[1] - dc * b[1]]).collect();
        Ok((dx, dc))
    }
}

/// Solve for `(u, v, c)` from `seed` by damped Newton with Armijo
/// backtracking; checks speed bounds, ranges and monotonicity afterwards.
pub fn solve_wave(params: &SystemParams, seed: Seed<'_>, opts: &WaveOptions) -> Result<TravellingWave> {
    params.validate()?;
    let grid = opts.grid(params)?;
    let (mut u, mut v, mut c) = seed.build(grid)?;
    let n = grid.n_points();
    u[0] = 1.0;
    v[0] = 0.0;
    u[n - 1] = 0.0;
    v[n - 1] = 1.0;
    let system = NewtonSystem {
        params,
        h: grid.spacing(),
        centre: grid.nearest_index(0.0),
        normalization: opts.normalization,
    };

    let mut res = system.residual(&u, &v, c);
    let mut norm = NewtonSystem::norm(&res);
    if !norm.is_finite() {
        return Err(Error::invalid("seed residual is not finite"));
    }
    let mut history = vec![norm];
    let mut iteration = 0;
    while norm > opts.tol {
        iteration += 1;
        if iteration > MAX_NEWTON {
            return Err(Error::NewtonStall { iteration, residual: norm });
        }
        let (dx, dc) = system.direction(&u, &v, c, &res)?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial_u: Vec<f64> = (0..n)
                .map(|i| if i == 0 || i == n - 1 { u[i] } else { u[i] + lambda * dx[i - 1][0] })
                .collect();
            let trial_v: Vec<f64> = (0..n)
                .map(|i| if i == 0 || i == n - 1 { v[i] } else { v[i] + lambda * dx[i - 1][1] })
                .collect();
            let trial_c = c + lambda * dc;
            let trial_res = system.residual(&trial_u, &trial_v, trial_c);
            let trial_norm = NewtonSystem::norm(&trial_res);
            if trial_norm.is_finite() && trial_norm <= (1.0 - ARMIJO * lambda) * norm {
                accepted = Some((trial_u, trial_v, trial_c, trial_res, trial_norm));
                break;
            }
            lambda *= 0.5;
        }
        let Some((nu, nv, nc, nres, nnorm)) = accepted else {
            return Err(Error::NewtonStall { iteration, residual: norm });
        };
        u = nu;
        v = nv;
        c = nc;
        res = nres;
        norm = nnorm;
        history.push(norm);
        if history.len() > STALL_WINDOW {
            let before = history[history.len() - 1 - STALL_WINDOW];
            let stalled = history[history.len() - STALL_WINDOW..].iter().all(|&r| r > 0.99 * before);
            if stalled && norm > opts.tol {
                return Err(Error::NewtonStall { iteration, residual: norm });
            }
        }
    }

    let wave = TravellingWave {
        params: *params,
        c,
        u: Profile::new(grid, u)?,
        v: Profile::new(grid, v)?,
        normalization: opts.normalization,
        residual_norm: norm,
    };
    check_shape(&wave)?;
    Ok(wave)
}

fn check_shape(wave: &TravellingWave) -> Result<()> {
    let (lo, hi) = wave.params.speed_bounds();
    if !(wave.c > lo && wave.c < hi) {
        return Err(Error::DomainViolation { c: wave.c, lo, hi });
    }
    let u = wave.u.values();
    let v = wave.v.values();
    for (name, values, sign) in [("u", u, -1.0), ("v", v, 1.0)] {
        if let Some(i) = values.iter().position(|&x| !(-SHAPE_TOL..=1.0 + SHAPE_TOL).contains(&x)) {
            return Err(Error::MonotonicityViolation(format!("{name}[{i}] = {} outside [0, 1]", values[i])));
        }
        if let Some(i) = values.windows(2).position(|w| sign * (w[1] - w[0]) < -SHAPE_TOL) {
            return Err(Error::MonotonicityViolation(format!(
                "{name} not monotone between nodes {i} and {}",
                i + 1
            )));
        }
    }
    Ok(())
}

/// `max u v` over the grid.
pub fn segregation_metric(wave: &TravellingWave) -> f64 {
    wave.u.values().iter().zip(wave.v.values()).map(|(u, v)| u * v).fold(0.0, f64::max)
}

/// `alpha u' + d v'` at the contact point where `alpha u = d v`.
///
/// `alpha u - d v` has a continuous derivative through the contact layer,
/// and the inner layer problem is symmetric about `alpha u = d v`; there
/// the estimate tends to the free-boundary condition `alpha u'(0-) + d
/// v'(0+) = 0` as `k` grows.
pub fn interface_condition_estimate(wave: &TravellingWave) -> f64 {
    let p = &wave.params;
    contact_flux_sum(wave, |u, v| p.alpha * u - p.d * v)
}

/// Same estimate taken where `u = v` (coincides with the above iff
/// `alpha = d`).
pub fn crossing_flux_sum(wave: &TravellingWave) -> f64 {
    contact_flux_sum(wave, |u, v| u - v)
}

fn contact_flux_sum(wave: &TravellingWave, balance: impl Fn(f64, f64) -> f64) -> f64 {
    let p = &wave.params;
    let u = wave.u.values();
    let v = wave.v.values();
    let h = wave.grid().spacing();
    let n = u.len();
    let flux = |i: usize| {
        let du = (u[i + 1] - u[i - 1]) / (2.0 * h);
        let dv = (v[i + 1] - v[i - 1]) / (2.0 * h);
        p.alpha * du + p.d * dv
    };
    // balance is decreasing in xi: first sign change
    for i in 1..n - 2 {
        let (b0, b1) = (balance(u[i], v[i]), balance(u[i + 1], v[i + 1]));
        if b0 >= 0.0 && b1 < 0.0 {
            let w = b0 / (b0 - b1);
            return flux(i) * (1.0 - w) + flux(i + 1) * w;
        }
    }
    f64::NAN
}

/// Result of a continuation in `k`.
#[derive(Clone, Debug)]
pub struct ContinuationReport {
    pub k_values: Vec<f64>,
    pub c_values: Vec<f64>,
    pub segregation_values: Vec<f64>,
    pub interface_values: Vec<f64>,
    /// Limit speed for the same `(alpha, r, d)`.
    pub c_limit: f64,
    pub waves: Vec<TravellingWave>,
}

impl ContinuationReport {
    pub fn gaps(&self) -> Vec<f64> {
        self.c_values.iter().map(|c| (c - self.c_limit).abs()).collect()
    }
}

/// Solve along an increasing `k` schedule, warm-starting each solve from
/// the previous wave. A failed step is retried once via the geometric
/// midpoint of the increment.
pub fn continue_in_k(base: &LimitParams, k_schedule: &[f64], normalization: Normalization) -> Result<ContinuationReport> {
    continue_in_k_with(base, k_schedule, &WaveOptions::with_normalization(normalization), &LimitSolver::new())
}

pub fn continue_in_k_with(
    base: &LimitParams,
    k_schedule: &[f64],
    opts: &WaveOptions,
    limit: &LimitSolver,
) -> Result<ContinuationReport> {
    base.validate()?;
    if k_schedule.is_empty() {
        return Err(Error::invalid("empty k schedule"));
    }
    if k_schedule[0] > 20.0 {
        return Err(Error::invalid(format!("schedule must start at k <= 20, got {}", k_schedule[0])));
    }
    for w in k_schedule.windows(2) {
        if !(w[1] > w[0]) || w[1] > 10.0 * w[0] {
            return Err(Error::invalid(format!("schedule step {} -> {} must increase by a factor <= 10", w[0], w[1])));
        }
    }
    let params_at = |k: f64| SystemParams::new(k, base.alpha, base.r, base.d);
    let mut waves: Vec<TravellingWave> = Vec::with_capacity(k_schedule.len());
    for &k in k_schedule {
        let wave = match waves.last() {
            None => solve_wave(&params_at(k)?, Seed::Logistic, opts)?,
            Some(prev) => match solve_wave(&params_at(k)?, Seed::Wave(prev), opts) {
                Ok(w) => w,
                Err(_) => {
                    let mid = (prev.params.k * k).sqrt();
                    let bridge = solve_wave(&params_at(mid)?, Seed::Wave(prev), opts)?;
                    solve_wave(&params_at(k)?, Seed::Wave(&bridge), opts)?
                }
            },
        };
        waves.push(wave);
    }
    let c_limit = limit.solve_limit_speed(base, DEFAULT_C_TOL)?;
    Ok(ContinuationReport {
        k_values: k_schedule.to_vec(),
        c_values: waves.iter().map(|w| w.c).collect(),
        segregation_values: waves.iter().map(segregation_metric).collect(),
        interface_values: waves.iter().map(interface_condition_estimate).collect(),
        c_limit,
        waves,
    })
}
