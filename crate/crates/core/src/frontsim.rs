//! Time integration of the rescaled parabolic system
//!
//! ```text
//! u_t = u_xx + u(1-u) - k u v
//! v_t = d v_xx + r v(1-v) - alpha k u v
//! ```
//!
//! by IMEX Euler: explicit (sub-stepped) reaction followed by backward Euler
//! diffusion with zero-flux ends. Front speeds are measured by tracking a
//! level crossing inside a window that follows the front.

use crate::error::{Error, Result};
use crate::numerics::{solve_tridiagonal, Grid1D};
use crate::wave::{SystemParams, TravellingWave};

/// Allowed excursion outside `[0, 1]` before a step is rejected.
pub const BOUND_SLACK: f64 = 1e-9;
/// Largest reaction sub-step measured in units of the fastest reaction rate.
pub const REACTION_CFL: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct PdeState {
    pub grid: Grid1D,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub time: f64,
}

impl PdeState {
    pub fn new(grid: Grid1D, u: Vec<f64>, v: Vec<f64>, time: f64) -> Result<Self> {
        let n = grid.n_points();
        if u.len() != n || v.len() != n {
            return Err(Error::invalid(format!("state arrays must have {n} entries")));
        }
        if !(time >= 0.0) {
            return Err(Error::invalid("time must be non-negative"));
        }
        let state = Self { grid, u, v, time };
        state.check_bounds()?;
        Ok(state)
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> (f64, f64)) -> Result<Self> {
        let (u, v) = grid.points().map(f).unzip();
        Self::new(grid, u, v, 0.0)
    }

    /// Sharp steps at `x = 0`: `u = 1` on the left when `with_u`, `v = 1`
    /// on the right when `with_v`, zero elsewhere.
    pub fn step_fronts(grid: Grid1D, with_u: bool, with_v: bool) -> Result<Self> {
        Self::from_fn(grid, |x| {
            let u = if with_u && x < 0.0 { 1.0 } else { 0.0 };
            let v = if with_v && x >= 0.0 { 1.0 } else { 0.0 };
            (u, v)
        })
    }

    /// Wave profiles sampled on `grid` (constant beyond the wave domain).
    pub fn from_wave(grid: Grid1D, wave: &TravellingWave) -> Result<Self> {
        Self::from_fn(grid, |x| (wave.u.interpolate(x).clamp(0.0, 1.0), wave.v.interpolate(x).clamp(0.0, 1.0)))
    }

    fn check_bounds(&self) -> Result<()> {
        for (species, values) in [("u", &self.u), ("v", &self.v)] {
            if let Some(&value) = values.iter().find(|&&x| !(-BOUND_SLACK..=1.0 + BOUND_SLACK).contains(&x)) {
                return Err(Error::StabilityViolation { time: self.time, species, value });
            }
        }
        Ok(())
    }

    /// Shift the data left by `m` cells (right if negative), padding with the
    /// equilibrium value (0 or 1) nearest to each end, and move the grid.
    fn recentre(&mut self, m: isize, origin: f64, offset: &mut isize) -> Result<()> {
        if m == 0 {
            return Ok(());
        }
        let n = self.grid.n_points();
        let h = self.grid.spacing();
        let shift = |a: &mut Vec<f64>| {
            if m > 0 {
                let s = (m as usize).min(n);
                let pad = a[n - 1].round();
                a.drain(..s);
                a.resize(n, pad);
            } else {
                let s = (m.unsigned_abs()).min(n);
                let pad = a[0].round();
                a.truncate(n - s);
                a.splice(0..0, std::iter::repeat_n(pad, s));
            }
        };
        shift(&mut self.u);
        shift(&mut self.v);
        *offset += m;
        let left = origin + *offset as f64 * h;
        self.grid = Grid1D::new(left, left + (n - 1) as f64 * h, n)?;
        Ok(())
    }
}

/// Advance one IMEX step of length `dt`.
pub fn step(state: &PdeState, dt: f64, params: &SystemParams) -> Result<PdeState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt must be positive"));
    }
    let SystemParams { k, alpha, r, d } = *params;
    let rate = (1.0 + k).max(r + alpha * k);
    let substeps = (dt * rate / REACTION_CFL).ceil().max(1.0) as usize;
    let tau = dt / substeps as f64;
    let mut u = state.u.clone();
    let mut v = state.v.clone();
    for _ in 0..substeps {
        for (ui, vi) in u.iter_mut().zip(v.iter_mut()) {
            let (a, b) = (*ui, *vi);
            let contact = k * a * b;
            *ui = a + tau * (a * (1.0 - a) - contact);
            *vi = b + tau * (r * b * (1.0 - b) - alpha * contact);
        }
    }
    let h = state.grid.spacing();
    let u = implicit_diffusion(&u, dt / (h * h))?;
    let v = implicit_diffusion(&v, d * dt / (h * h))?;
    let next = PdeState { grid: state.grid, u, v, time: state.time + dt };
    next.check_bounds()?;
    Ok(next)
}

/// Backward Euler for `w_t = w_xx` with mirrored ghost nodes; `sigma = D dt / h^2`.
fn implicit_diffusion(w: &[f64], sigma: f64) -> Result<Vec<f64>> {
    let n = w.len();
    let diag = vec![1.0 + 2.0 * sigma; n];
    let mut sub = vec![-sigma; n - 1];
    let mut sup = vec![-sigma; n - 1];
    sup[0] = -2.0 * sigma;
    sub[n - 2] = -2.0 * sigma;
    solve_tridiagonal(&sub, &diag, &sup, w)
}

/// Which profile carries the tracked level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tracked {
    /// Decreasing `u`.
    U,
    /// Increasing `v`.
    V,
}

impl Tracked {
    /// `U` unless `u` never reaches `level`.
    pub fn infer(state: &PdeState, level: f64) -> Self {
        if state.u.iter().any(|&x| x >= level) {
            Self::U
        } else {
            Self::V
        }
    }
}

/// Abscissa where the tracked profile crosses `level`, by linear
/// interpolation between the bracketing nodes.
pub fn front_position(state: &PdeState, tracked: Tracked, level: f64) -> Option<f64> {
    let (values, sign) = match tracked {
        Tracked::U => (&state.u, 1.0),
        Tracked::V => (&state.v, -1.0),
    };
    let h = state.grid.spacing();
    values.windows(2).position(|w| sign * (w[0] - level) >= 0.0 && sign * (w[1] - level) < 0.0).map(|i| {
        let (a, b) = (values[i], values[i + 1]);
        state.grid.point(i) + h * (a - level) / (a - b)
    })
}

/// True if `u` is non-increasing and `v` non-decreasing up to `tol`.
pub fn is_monotone_front(state: &PdeState, tol: f64) -> bool {
    state.u.windows(2).all(|w| w[1] <= w[0] + tol) && state.v.windows(2).all(|w| w[1] >= w[0] - tol)
}

#[derive(Clone, Debug)]
pub struct FrontSimOptions {
    pub dt: f64,
    /// Time between position samples.
    pub sample_interval: f64,
    /// Keep the front near the middle of the window.
    pub follow_front: bool,
    /// `None` picks [`Tracked::infer`].
    pub tracked: Option<Tracked>,
}

impl Default for FrontSimOptions {
    fn default() -> Self {
        Self { dt: 0.01, sample_interval: 0.5, follow_front: true, tracked: None }
    }
}

#[derive(Clone, Debug)]
pub struct FrontSpeedEstimate {
    pub level: f64,
    pub tracked: Tracked,
    /// `(time, position)` samples, positions in absolute coordinates.
    pub positions: Vec<(f64, f64)>,
    pub fitted_speed: f64,
    /// RMS deviation from the fitted line divided by the fit duration.
    pub fit_residual: f64,
    /// Whether every sampled state had monotone fronts.
    pub monotone: bool,
    pub final_state: PdeState,
}

/// Fit `position = a + c t` over the trailing half of `samples`; returns
/// `(c, rms / duration)`.
pub fn fit_trailing_half(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    let tail = &samples[samples.len() / 2..];
    if tail.len() < 2 {
        return Err(Error::invalid("need at least two samples in the fit window"));
    }
    let n = tail.len() as f64;
    let mt = tail.iter().map(|s| s.0).sum::<f64>() / n;
    let mx = tail.iter().map(|s| s.1).sum::<f64>() / n;
    let stt: f64 = tail.iter().map(|s| (s.0 - mt).powi(2)).sum();
    let stx: f64 = tail.iter().map(|s| (s.0 - mt) * (s.1 - mx)).sum();
    let slope = stx / stt;
    let rms = (tail.iter().map(|s| (s.1 - mx - slope * (s.0 - mt)).powi(2)).sum::<f64>() / n).sqrt();
    let duration = tail[tail.len() - 1].0 - tail[0].0;
    Ok((slope, rms / duration))
}

/// Run to `t_end`, sampling the crossing of `level`, and fit a speed.
pub fn measure_front_speed(initial: PdeState, params: &SystemParams, t_end: f64, level: f64) -> Result<FrontSpeedEstimate> {
    measure_front_speed_with(initial, params, t_end, level, &FrontSimOptions::default())
}

pub fn measure_front_speed_with(
    initial: PdeState,
    params: &SystemParams,
    t_end: f64,
    level: f64,
    opts: &FrontSimOptions,
) -> Result<FrontSpeedEstimate> {
    measure_front_speed_observed(initial, params, t_end, level, opts, |_| {})
}

/// As [`measure_front_speed_with`], calling `observer` with every sampled state.
pub fn measure_front_speed_observed(
    initial: PdeState,
    params: &SystemParams,
    t_end: f64,
    level: f64,
    opts: &FrontSimOptions,
    mut observer: impl FnMut(&PdeState),
) -> Result<FrontSpeedEstimate> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("level must lie in (0, 1), got {level}")));
    }
    if !(t_end > initial.time) {
        return Err(Error::invalid("t_end must exceed the initial time"));
    }
    if !(opts.sample_interval >= opts.dt && opts.dt > 0.0) {
        return Err(Error::invalid("sample interval must be at least dt"));
    }
    let tracked = opts.tracked.unwrap_or_else(|| Tracked::infer(&initial, level));
    let mut state = initial;
    let grid0 = state.grid;
    let h = grid0.spacing();
    let width = grid0.right() - grid0.left();
    let mut offset: isize = 0;

    let start = front_position(&state, tracked, level).ok_or(Error::FrontLost { time: state.time })?;
    let mut positions = vec![(state.time, start)];
    let mut monotone = is_monotone_front(&state, 1e-12);
    observer(&state);

    let steps_per_sample = (opts.sample_interval / opts.dt).round().max(1.0) as usize;
    let n_steps = ((t_end - state.time) / opts.dt).round() as usize;
    let t0 = state.time;
    for i in 1..=n_steps {
        let mut next = step(&state, opts.dt, params)?;
        next.time = t0 + i as f64 * opts.dt;
        state = next;
        if i % steps_per_sample == 0 || i == n_steps {
            let x = front_position(&state, tracked, level).ok_or(Error::FrontLost { time: state.time })?;
            positions.push((state.time, x));
            monotone &= is_monotone_front(&state, 1e-12);
            observer(&state);
            if opts.follow_front {
                let target = state.grid.left() + 0.5 * width;
                if (x - target).abs() > 0.1 * width {
                    let m = ((x - target) / h).round() as isize;
                    state.recentre(m, grid0.left(), &mut offset)?;
                }
            }
        }
    }
    let (fitted_speed, fit_residual) = fit_trailing_half(&positions)?;
    Ok(FrontSpeedEstimate { level, tracked, positions, fitted_speed, fit_residual, monotone, final_state: state })
}

/// `|fitted PDE speed - wave.c|` starting from the wave profiles.
pub fn compare_with_wave(params: &SystemParams, wave: &TravellingWave, t_end: f64) -> Result<f64> {
    compare_with_wave_on(params, wave, t_end, 0.1, &FrontSimOptions::default())
}

/// As [`compare_with_wave`] with explicit spacing `dx` on a `[-100, 100]` window.
pub fn compare_with_wave_on(
    params: &SystemParams,
    wave: &TravellingWave,
    t_end: f64,
    dx: f64,
    opts: &FrontSimOptions,
) -> Result<f64> {
    let grid = Grid1D::with_max_spacing(-100.0, 100.0, dx)?;
    let initial = PdeState::from_wave(grid, wave)?;
    let estimate = measure_front_speed_with(initial, params, t_end, 0.5, &FrontSimOptions { tracked: Some(Tracked::U), ..opts.clone() })?;
    Ok((estimate.fitted_speed - wave.c).abs())
}
