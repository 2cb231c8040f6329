//! Numerical kernel: adaptive Dormand–Prince integration, bracketed bisection,
//! tridiagonal solves (scalar and 2×2 block) and uniform-grid stencils.
//!
//! Everything here is a pure function of its arguments.

use crate::error::{Error, Result};

/// Default absolute/relative tolerance for [`integrate_ivp`].
pub const DEFAULT_IVP_TOL: f64 = 1e-10;
/// Default abscissa tolerance for [`bisect_root`].
pub const DEFAULT_X_TOL: f64 = 1e-12;
/// Default residual tolerance for [`bisect_root`].
pub const DEFAULT_F_TOL: f64 = 1e-12;

const PIVOT_FLOOR: f64 = 1e-14;

/// Uniform grid on `[left, right]` with `n_points` nodes (endpoints included).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    left: f64,
    right: f64,
    n_points: usize,
    spacing: f64,
}

impl Grid1D {
    pub fn new(left: f64, right: f64, n_points: usize) -> Result<Self> {
        if !(left.is_finite() && right.is_finite() && left < right) {
            return Err(Error::invalid(format!("grid needs left < right, got [{left}, {right}]")));
        }
        if n_points < 3 {
            return Err(Error::invalid(format!("grid needs at least 3 points, got {n_points}")));
        }
        let spacing = (right - left) / (n_points - 1) as f64;
        Ok(Self { left, right, n_points, spacing })
    }

    /// Grid with spacing no larger than `max_spacing`.
    pub fn with_max_spacing(left: f64, right: f64, max_spacing: f64) -> Result<Self> {
        if !(max_spacing > 0.0) {
            return Err(Error::invalid("max_spacing must be positive"));
        }
        let cells = ((right - left) / max_spacing).ceil().max(2.0) as usize;
        Self::new(left, right, cells + 1)
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.right
        } else {
            self.left + i as f64 * self.spacing
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.point(i))
    }

    /// Index of the node closest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let raw = ((x - self.left) / self.spacing).round();
        raw.clamp(0.0, (self.n_points - 1) as f64) as usize
    }
}

/// A real function sampled on a [`Grid1D`].
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Profile {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::invalid(format!(
                "profile has {} values for a {}-point grid",
                values.len(),
                grid.n_points()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("profile value {i} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().map(f).collect())
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Piecewise-linear evaluation; constant extrapolation outside the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g.left() {
            return self.first();
        }
        if x >= g.right() {
            return self.last();
        }
        let s = (x - g.left()) / g.spacing();
        let i = (s.floor() as usize).min(g.n_points() - 2);
        let w = s - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Resample onto another grid by linear interpolation.
    pub fn resample(&self, grid: Grid1D) -> Profile {
        Profile { grid, values: grid.points().map(|x| self.interpolate(x)).collect() }
    }

    /// Fourth-order one-sided derivative at the left end.
    pub fn left_derivative(&self) -> f64 {
        forward_derivative4(&self.values[..5], self.grid.spacing())
    }

    /// Fourth-order one-sided derivative at the right end.
    pub fn right_derivative(&self) -> f64 {
        let n = self.values.len();
        backward_derivative4(&self.values[n - 5..], self.grid.spacing())
    }
}

/// Bracket `[lo, hi]` with function values of opposite (or zero) sign.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl RootBracket {
    pub fn new(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Result<Self> {
        let bracket = Self { lo, hi, f_lo, f_hi };
        if !(lo < hi) || !(f_lo * f_hi <= 0.0) {
            return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
        }
        Ok(bracket)
    }

    /// Evaluate `f` at both ends and validate.
    pub fn evaluate(lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        let f_lo = f(lo);
        let f_hi = f(hi);
        Self::new(lo, hi, f_lo, f_hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Bisection. Returns as soon as `|f(x)| <= f_tol` or the bracket is no
/// wider than `x_tol` (then the midpoint).
pub fn bisect_root(
    mut f: impl FnMut(f64) -> f64,
    bracket: RootBracket,
    x_tol: f64,
    f_tol: f64,
) -> Result<f64> {
    let RootBracket { mut lo, mut hi, f_lo, f_hi } = RootBracket::new(bracket.lo, bracket.hi, bracket.f_lo, bracket.f_hi)?;
    if f_lo == 0.0 || f_lo.abs() <= f_tol && f_lo.abs() <= f_hi.abs() {
        return Ok(lo);
    }
    if f_hi.abs() <= f_tol {
        return Ok(hi);
    }
    let lo_negative = f_lo < 0.0;
    // 200 halvings exhaust any f64 interval
    for _ in 0..200 {
        let mid = lo + 0.5 * (hi - lo);
        if hi - lo <= x_tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if !fm.is_finite() {
            return Err(Error::invalid(format!("bisection met non-finite f({mid})")));
        }
        if fm.abs() <= f_tol {
            return Ok(mid);
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + 0.5 * (hi - lo))
}

/// Thomas algorithm for `sub[i-1] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 || sub.len() + 1 != n || sup.len() + 1 != n || rhs.len() != n {
        return Err(Error::invalid(format!(
            "tridiagonal sizes: sub {}, diag {}, sup {}, rhs {}",
            sub.len(),
            n,
            sup.len(),
            rhs.len()
        )));
    }
    let mut c_prime = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot.abs() <= PIVOT_FLOOR {
        return Err(Error::SingularPivot { row: 0, pivot });
    }
    if n > 1 {
        c_prime[0] = sup[0] / pivot;
    }
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i - 1] * c_prime[i - 1];
        if pivot.abs() <= PIVOT_FLOOR {
            return Err(Error::SingularPivot { row: i, pivot });
        }
        if i + 1 < n {
            c_prime[i] = sup[i] / pivot;
        }
        x[i] = (rhs[i] - sub[i - 1] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c_prime[i] * x[i + 1];
    }
    Ok(x)
}

/// 2×2 block, row major.
pub type Block2 = [[f64; 2]; 2];

fn mat_vec(a: &Block2, v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

fn mat_mul(a: &Block2, b: &Block2) -> Block2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn mat_sub(a: &Block2, b: &Block2) -> Block2 {
    [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]]
}

fn inverse(a: &Block2, row: usize) -> Result<Block2> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let scale = a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(det.abs() > PIVOT_FLOOR * scale * scale) {
        return Err(Error::SingularPivot { row, pivot: det });
    }
    Ok([[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]])
}

/// Block Thomas elimination for a block-tridiagonal system with 2×2 blocks.
///
/// Row `i` reads `sub[i-1] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
/// Several right-hand sides share one factorisation.
pub fn solve_block_tridiagonal(
    sub: &[Block2],
    diag: &[Block2],
    sup: &[Block2],
    rhs: &[&[[f64; 2]]],
) -> Result<Vec<Vec<[f64; 2]>>> {
    let n = diag.len();
    if n == 0 || sub.len() + 1 != n || sup.len() + 1 != n || rhs.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("block tridiagonal size mismatch"));
    }
    // forward sweep: store inverted pivots and modified super-diagonal
    let mut pivots_inv: Vec<Block2> = Vec::with_capacity(n);
    let mut sup_mod: Vec<Block2> = Vec::with_capacity(n.saturating_sub(1));
    let mut pivot = diag[0];
    for i in 0..n {
        if i > 0 {
            pivot = mat_sub(&diag[i], &mat_mul(&sub[i - 1], &sup_mod[i - 1]));
        }
        let inv = inverse(&pivot, i)?;
        if i + 1 < n {
            sup_mod.push(mat_mul(&inv, &sup[i]));
        }
        pivots_inv.push(inv);
    }
    let solutions = rhs
        .iter()
        .map(|r| {
            let mut y: Vec<[f64; 2]> = Vec::with_capacity(n);
            for i in 0..n {
                let mut b = r[i];
                if i > 0 {
                    let t = mat_vec(&sub[i - 1], y[i - 1]);
                    b = [b[0] - t[0], b[1] - t[1]];
                }
                y.push(mat_vec(&pivots_inv[i], b));
            }
            for i in (0..n - 1).rev() {
                let t = mat_vec(&sup_mod[i], y[i + 1]);
                y[i] = [y[i][0] - t[0], y[i][1] - t[1]];
            }
            y
        })
        .collect();
    Ok(solutions)
}

/// `(-25 f0 + 48 f1 - 36 f2 + 16 f3 - 3 f4) / 12h`
pub fn forward_derivative4(f: &[f64], h: f64) -> f64 {
    (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h)
}

/// Mirror of [`forward_derivative4`]; `f[4]` is the evaluation point.
pub fn backward_derivative4(f: &[f64], h: f64) -> f64 {
    (25.0 * f[4] - 48.0 * f[3] + 36.0 * f[2] - 16.0 * f[1] + 3.0 * f[0]) / (12.0 * h)
}

/// Second-order centered first and second derivatives at interior nodes.
pub fn centered_derivatives(values: &[f64], h: f64, i: usize) -> (f64, f64) {
    let d1 = (values[i + 1] - values[i - 1]) / (2.0 * h);
    let d2 = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
    (d1, d2)
}

// ---------------------------------------------------------------------------
// Dormand–Prince 5(4)

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI controller exponents (Hairer–Wanner, DOPRI5)
const PI_BETA: f64 = 0.04;
const PI_ALPHA: f64 = 0.2 - 0.75 * PI_BETA;
const SAFETY: f64 = 0.9;

/// Options for the adaptive integrator.
#[derive(Clone, Debug)]
pub struct IvpOptions {
    /// Mixed absolute/relative local error bound per step.
    pub tol: f64,
    /// Absolute floor of the error scale; defaults to `tol`.
    pub abs_tol: Option<f64>,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
    pub max_step: Option<f64>,
}

impl Default for IvpOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_IVP_TOL, abs_tol: None, max_steps: 2_000_000, initial_step: None, max_step: None }
    }
}

impl IvpOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Returned by the step observer of [`integrate_observed`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// Every accepted step of an integration, states stored row-major.
#[derive(Clone, Debug)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn terminal_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.len() - 1)
    }
}

/// Where an observed integration ended.
#[derive(Clone, Debug)]
pub struct Endpoint {
    pub t: f64,
    pub y: Vec<f64>,
    pub steps: usize,
    /// True when the observer requested the stop.
    pub stopped: bool,
}

/// Integrate `y' = rhs(t, y)` over `span` and record every accepted step.
///
/// `span.1 < span.0` integrates backwards.
pub fn integrate_ivp<F>(rhs: F, y0: &[f64], span: (f64, f64), tol: f64) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut traj = Trajectory { dim: y0.len(), times: vec![span.0], states: y0.to_vec() };
    integrate_observed(rhs, y0, span, &IvpOptions::with_tol(tol), &[], |t, y| {
        traj.times.push(t);
        traj.states.extend_from_slice(y);
        Flow::Continue
    })?;
    Ok(traj)
}

fn check_finite(k: &[f64], t: f64) -> Result<()> {
    if k.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteRhs { t })
    }
}

/// Adaptive Dormand–Prince integration with a per-step observer.
///
/// `landmarks` (monotone in the integration direction, inside `span`) are
/// hit exactly by shortening steps; the observer sees every accepted step
/// including those. Returning [`Flow::Stop`] ends the integration there.
pub fn integrate_observed<F, O>(
    mut rhs: F,
    y0: &[f64],
    span: (f64, f64),
    opts: &IvpOptions,
    landmarks: &[f64],
    mut observer: O,
) -> Result<Endpoint>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]) -> Flow,
{
    let (t0, t_end) = span;
    let length = (t_end - t0).abs();
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("ivp tolerance must be positive"));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::invalid(format!("degenerate span ({t0}, {t_end})")));
    }
    let dir = (t_end - t0).signum();
    let m = y0.len();
    let h_min = length * 1e-12;
    let h_max = opts.max_step.unwrap_or(length).min(length);

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; m];
    let mut k2 = vec![0.0; m];
    let mut k3 = vec![0.0; m];
    let mut k4 = vec![0.0; m];
    let mut k5 = vec![0.0; m];
    let mut k6 = vec![0.0; m];
    let mut k7 = vec![0.0; m];
    let mut stage = vec![0.0; m];
    let mut y_new = vec![0.0; m];

    rhs(t, &y, &mut k1);
    check_finite(&k1, t)?;

    let mut h = match opts.initial_step {
        Some(h0) => h0.abs().min(h_max),
        None => initial_step(&y, &k1, opts.tol, h_max),
    };
    let abs_tol = opts.abs_tol.unwrap_or(opts.tol);
    let mut err_prev: f64 = 1e-4;
    let mut next_mark = 0usize;
    let mut steps = 0usize;

    while (t_end - t) * dir > 0.0 {
        if steps >= opts.max_steps {
            return Err(Error::StepBudget(opts.max_steps));
        }
        while next_mark < landmarks.len() && (landmarks[next_mark] - t) * dir <= 0.0 {
            next_mark += 1;
        }
        let target = landmarks.get(next_mark).copied().unwrap_or(t_end);
        let remaining = (target - t).abs();
        let mut lands = false;
        let mut step = h;
        if step >= remaining * (1.0 - 1e-12) {
            step = remaining;
            lands = true;
        }
        if step < h_min && !lands {
            return Err(Error::StepUnderflow { t, h: step });
        }
        let hs = dir * step;

        for i in 0..m {
            stage[i] = y[i] + hs * A21 * k1[i];
        }
        rhs(t + C2 * hs, &stage, &mut k2);
        for i in 0..m {
            stage[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * hs, &stage, &mut k3);
        for i in 0..m {
            stage[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * hs, &stage, &mut k4);
        for i in 0..m {
            stage[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * hs, &stage, &mut k5);
        for i in 0..m {
            stage[i] =
                y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(t + hs, &stage, &mut k6);
        for i in 0..m {
            y_new[i] =
                y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        let t_new = if lands { target } else { t + hs };
        rhs(t_new, &y_new, &mut k7);

        let finite = [&k2, &k3, &k4, &k5, &k6, &k7].iter().all(|k| k.iter().all(|v| v.is_finite()))
            && y_new.iter().all(|v| v.is_finite());

        let err = if finite {
            let mut err: f64 = 0.0;
            for i in 0..m {
                let e = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = abs_tol + opts.tol * y[i].abs().max(y_new[i].abs());
                err = err.max((e / scale).abs());
            }
            err
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            steps += 1;
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            let factor = if err == 0.0 {
                5.0
            } else {
                (SAFETY * err.powf(-PI_ALPHA) * err_prev.powf(PI_BETA)).clamp(0.2, 5.0)
            };
            err_prev = err.max(1e-4);
            if !lands || step >= h {
                h = (step * factor).min(h_max);
            }
            if observer(t, &y) == Flow::Stop {
                return Ok(Endpoint { t, y, steps, stopped: true });
            }
        } else {
            if !finite && step <= h_min {
                check_finite(&k7, t_new)?;
                return Err(Error::NonFiniteRhs { t });
            }
            let factor = if err.is_finite() { (SAFETY * err.powf(-0.2)).max(0.1) } else { 0.1 };
            h = step * factor;
            if h < h_min {
                return Err(Error::StepUnderflow { t, h });
            }
        }
    }
    Ok(Endpoint { t, y, steps, stopped: false })
}

fn initial_step(y: &[f64], f: &[f64], tol: f64, h_max: f64) -> f64 {
    let d0 = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let d1 = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let h = if d1 <= 1e-12 { 1e-3 * h_max.min(1.0) } else { 0.01 * (d0 + tol) / d1 };
    h.min(h_max).min(tol.powf(0.2) * 0.1).max(h_max * 1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    #[test]
    fn grid_spacing_and_points() {
        let g = Grid1D::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.points().collect::<Vec<_>>(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(Grid1D::new(1.0, 1.0, 5).is_err());
        assert!(Grid1D::new(0.0, 1.0, 2).is_err());
    }

    #[test]
    fn profile_rejects_non_finite() {
        let g = Grid1D::new(0.0, 1.0, 3).unwrap();
        assert!(Profile::new(g, vec![0.0, f64::NAN, 1.0]).is_err());
        assert!(Profile::new(g, vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn one_sided_stencils_are_exact_on_quartics() {
        let g = Grid1D::new(0.0, 1.0, 11).unwrap();
        let p = Profile::from_fn(g, |x| x.powi(4) - 2.0 * x.powi(3) + x + 3.0).unwrap();
        assert!((p.left_derivative() - 1.0).abs() < 1e-10);
        // 4 - 6 + 1
        assert!((p.right_derivative() - (-1.0)).abs() < 1e-10);
    }

    #[test]
    fn constant_field_is_exact() {
        let traj = integrate_ivp(|_, _, dy| dy[0] = 0.0, &[1.0], (0.0, 10.0), 1e-10).unwrap();
        assert_eq!(traj.terminal(), &[1.0]);
        assert_eq!(traj.terminal_time(), 10.0);
    }

    #[test]
    fn exponential_growth() {
        let traj = integrate_ivp(|_, y, dy| dy[0] = y[0], &[1.0], (0.0, 1.0), 1e-10).unwrap();
        assert!((traj.terminal()[0] - E).abs() < 1e-8);
    }

    #[test]
    fn harmonic_oscillator_period() {
        let traj = integrate_ivp(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            &[1.0, 0.0],
            (0.0, 2.0 * PI),
            1e-10,
        )
        .unwrap();
        let end = traj.terminal();
        assert!((end[0] - 1.0).abs() < 1e-6 && end[1].abs() < 1e-6, "{end:?}");
    }

    #[test]
    fn backward_integration() {
        let traj = integrate_ivp(|_, y, dy| dy[0] = y[0], &[E], (1.0, 0.0), 1e-11).unwrap();
        assert!((traj.terminal()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn error_tracks_tolerance() {
        // global error should scale roughly linearly with tol
        let err = |tol: f64| {
            let t = integrate_ivp(|_, y, dy| dy[0] = y[0], &[1.0], (0.0, 1.0), tol).unwrap();
            (t.terminal()[0] - E).abs()
        };
        for tol in [1e-5, 1e-6, 1e-7, 1e-8] {
            let ratio = err(tol / 2.0) / err(tol);
            assert!((0.5 / 4.0..=0.5 * 4.0).contains(&ratio), "tol {tol}: ratio {ratio}");
        }
    }

    #[test]
    fn landmarks_are_hit_exactly() {
        let marks = [0.25, 0.5, 0.75];
        let mut seen = Vec::new();
        integrate_observed(
            |_, y, dy| dy[0] = y[0],
            &[1.0],
            (0.0, 1.0),
            &IvpOptions::with_tol(1e-6),
            &marks,
            |t, _| {
                seen.push(t);
                Flow::Continue
            },
        )
        .unwrap();
        for m in marks {
            assert!(seen.contains(&m), "missing landmark {m}");
        }
    }

    #[test]
    fn observer_can_stop() {
        let end = integrate_observed(
            |_, _, dy| dy[0] = 1.0,
            &[0.0],
            (0.0, 10.0),
            &IvpOptions::with_tol(1e-8),
            &[],
            |_, y| if y[0] > 2.0 { Flow::Stop } else { Flow::Continue },
        )
        .unwrap();
        assert!(end.stopped && end.t < 10.0 && end.y[0] > 2.0);
    }

    #[test]
    fn blow_up_is_reported() {
        let res = integrate_ivp(|_, y, dy| dy[0] = y[0] * y[0], &[1.0], (0.0, 2.0), 1e-8);
        assert!(
            matches!(res, Err(Error::StepUnderflow { .. }) | Err(Error::NonFiniteRhs { .. })),
            "{res:?}"
        );
    }

    #[test]
    fn non_finite_rhs_is_reported() {
        let res = integrate_ivp(|_, _, dy| dy[0] = f64::NAN, &[1.0], (0.0, 1.0), 1e-8);
        assert!(matches!(res, Err(Error::NonFiniteRhs { .. })));
    }

    #[test]
    fn bisect_linear_and_closed_forms() {
        let tol = 1e-12;
        let b = RootBracket::evaluate(0.0, 2.0, |x| x - 1.0).unwrap();
        assert!((bisect_root(|x| x - 1.0, b, tol, 0.0).unwrap() - 1.0).abs() <= tol);
        let f = |x: f64| x * x - 2.0;
        let b = RootBracket::evaluate(1.0, 2.0, f).unwrap();
        assert!((bisect_root(f, b, tol, 0.0).unwrap() - 2f64.sqrt()).abs() <= tol);
        let b = RootBracket::evaluate(1.0, 2.0, f64::cos).unwrap();
        assert!((bisect_root(f64::cos, b, tol, 0.0).unwrap() - PI / 2.0).abs() <= tol);
    }

    #[test]
    fn bisect_rejects_invalid_bracket() {
        assert!(matches!(
            RootBracket::evaluate(2.0, 3.0, |x| x - 1.0),
            Err(Error::NoSignChange { .. })
        ));
        let bad = RootBracket { lo: 0.0, hi: 1.0, f_lo: 1.0, f_hi: 1.0 };
        assert!(bisect_root(|x| x, bad, 1e-12, 1e-12).is_err());
    }

    #[test]
    fn bisect_stays_inside_bracket() {
        let b = RootBracket::evaluate(0.3, 0.9, |x| x - 0.5).unwrap();
        let mut lo = b.lo;
        let mut hi = b.hi;
        bisect_root(
            |x| {
                assert!(x >= lo && x <= hi, "{x} outside [{lo}, {hi}]");
                let f = x - 0.5;
                if f < 0.0 {
                    lo = x;
                } else {
                    hi = x;
                }
                f
            },
            b,
            1e-14,
            0.0,
        )
        .unwrap();
    }

    #[test]
    fn tridiagonal_examples() {
        let x = solve_tridiagonal(&[0.0, 0.0], &[1.0; 3], &[0.0, 0.0], &[3.0, -1.0, 2.0]).unwrap();
        assert_eq!(x, vec![3.0, -1.0, 2.0]);
        let x = solve_tridiagonal(&[-1.0, -1.0], &[2.0; 3], &[-1.0, -1.0], &[1.0; 3]).unwrap();
        for (a, b) in x.iter().zip([1.5, 2.0, 1.5]) {
            assert!((a - b).abs() < 1e-14);
        }
        let x = solve_tridiagonal(&[0.0], &[1.0, 1.0], &[1.0], &[2.0, 1.0]).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
    }

    #[test]
    fn tridiagonal_singular_pivot() {
        let res = solve_tridiagonal(&[1.0], &[1.0, 1.0], &[1.0], &[1.0, 1.0]);
        assert!(matches!(res, Err(Error::SingularPivot { row: 1, .. })));
    }

    #[test]
    fn block_tridiagonal_matches_scalar_decoupled() {
        // two independent scalar systems packed in diagonal blocks
        let n = 6;
        let diag = vec![[[2.0, 0.0], [0.0, 3.0]]; n];
        let off = vec![[[-1.0, 0.0], [0.0, -1.0]]; n - 1];
        let rhs: Vec<[f64; 2]> = (0..n).map(|i| [i as f64, 1.0]).collect();
        let sol = solve_block_tridiagonal(&off, &diag, &off, &[&rhs]).unwrap();
        let a = solve_tridiagonal(&[-1.0; 5], &[2.0; 6], &[-1.0; 5], &rhs.iter().map(|r| r[0]).collect::<Vec<_>>()).unwrap();
        let b = solve_tridiagonal(&[-1.0; 5], &[3.0; 6], &[-1.0; 5], &[1.0; 6]).unwrap();
        for i in 0..n {
            assert!((sol[0][i][0] - a[i]).abs() < 1e-13);
            assert!((sol[0][i][1] - b[i]).abs() < 1e-13);
        }
    }
}
