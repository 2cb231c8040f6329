//! Half-line KPP problem `-y'' - c y' = y(1-y)`, `y(0) = 0`, `y(+inf) = 1`,
//! and its initial slope `gamma(c) = y'(0)`.
//!
//! `gamma` is found by shooting forward from `y(0) = 0` and bisecting on the
//! initial slope. The stored profile is built independently by following
//! the one-dimensional stable manifold of `y = 1` backwards until `y = 0`,
//! which avoids the exponential error growth that forward shooting suffers
//! for negative drifts.

use crate::error::{Error, Result};
use crate::numerics::{
    bisect_root, integrate_observed, solve_tridiagonal, Flow, Grid1D, IvpOptions, Profile,
    RootBracket,
};

/// Default truncation length of the half line.
pub const DEFAULT_LENGTH: f64 = 40.0;
/// Smallest admissible distance of `c` above the existence threshold `-2`.
pub const EXISTENCE_MARGIN: f64 = 1e-9;
/// Tube around `(1, 0)` inside which a shot counts as converged.
pub const CONVERGENCE_TUBE: f64 = 1e-8;
/// Default grid spacing of stored profiles.
pub const DEFAULT_PROFILE_SPACING: f64 = 0.002;

const MIN_LENGTH: f64 = 20.0;
/// Upper witness slope per unit of `max(1, c)`; `gamma(c) ~ c` for large `c`.
const MAX_WITNESS_SLOPE: f64 = 10.0;
const MIN_WITNESS_SLOPE: f64 = 1e-30;
/// Distance from `y = 1` where the stable-manifold integration starts.
const MANIFOLD_OFFSET: f64 = 1e-10;
/// `y'(0)` when `c = 0` (first integral `y'^2/2 + y^2/2 - y^3/3 = 1/6`).
pub const GAMMA_AT_ZERO: f64 = 0.577_350_269_189_625_8;

/// Outcome of one forward shot from `(y, y') = (0, slope)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShotClass {
    /// `y'` vanished while `y < 1 - tol`.
    Undershoot,
    /// `y` exceeded `1 + tol` while rising.
    Overshoot,
    /// Entered `|y - 1| < tol`, `|y'| < tol`.
    Converged,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GammaOptions {
    /// Shooting horizon.
    pub length: f64,
    /// Final width of the slope bracket.
    pub slope_tol: f64,
    pub ivp_tol: f64,
}

impl Default for GammaOptions {
    fn default() -> Self {
        Self { length: DEFAULT_LENGTH, slope_tol: 1e-11, ivp_tol: 1e-12 }
    }
}

/// A validated half-line problem.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfLineProblem {
    pub c: f64,
    pub domain_length: f64,
    /// Slope tolerance of the shooting bisection.
    pub tol: f64,
    pub max_spacing: f64,
}

impl HalfLineProblem {
    pub fn new(c: f64) -> Result<Self> {
        Self::with_length(c, DEFAULT_LENGTH)
    }

    pub fn with_length(c: f64, domain_length: f64) -> Result<Self> {
        let problem = Self {
            c,
            domain_length,
            tol: GammaOptions::default().slope_tol,
            max_spacing: DEFAULT_PROFILE_SPACING,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        check_drift(self.c)?;
        if !(self.domain_length >= MIN_LENGTH) || !self.domain_length.is_finite() {
            return Err(Error::invalid(format!(
                "half-line length must be at least {MIN_LENGTH}, got {}",
                self.domain_length
            )));
        }
        if !(self.tol > 0.0) || !(self.max_spacing > 0.0) {
            return Err(Error::invalid("tolerance and spacing must be positive"));
        }
        Ok(())
    }

    fn gamma_options(&self) -> GammaOptions {
        GammaOptions { length: self.domain_length, slope_tol: self.tol, ..GammaOptions::default() }
    }
}

/// Half-line solution: slope at the origin plus the sampled profile.
#[derive(Clone, Debug)]
pub struct HalfLineSolution {
    pub problem: HalfLineProblem,
    /// `y'(0)` from the shooting bisection.
    pub gamma: f64,
    /// Profile on `[0, L]`.
    pub profile: Profile,
    /// Final width of the slope bracket.
    pub shot_slope_bracket_width: f64,
    /// `y'(0)` of the stable-manifold trajectory (independent of `gamma`).
    pub manifold_slope: f64,
    /// `1 - y(L)`.
    pub tail_deficit: f64,
}

impl HalfLineSolution {
    /// Centered-difference residual `-y'' - c y' - y(1-y)` at interior nodes.
    pub fn ode_residual(&self) -> Vec<f64> {
        let y = self.profile.values();
        let h = self.profile.grid().spacing();
        let c = self.problem.c;
        (1..y.len() - 1)
            .map(|i| {
                let (d1, d2) = crate::numerics::centered_derivatives(y, h, i);
                -d2 - c * d1 - y[i] * (1.0 - y[i])
            })
            .collect()
    }
}

fn check_drift(c: f64) -> Result<()> {
    if !c.is_finite() || c <= -2.0 + EXISTENCE_MARGIN {
        return Err(Error::ExistenceViolation {
            c,
            reason: "the drift must exceed -2".to_string(),
        });
    }
    Ok(())
}

fn rhs(c: f64) -> impl Fn(f64, &[f64], &mut [f64]) {
    move |_, s, ds| {
        ds[0] = s[1];
        ds[1] = -c * s[1] - s[0] * (1.0 - s[0]);
    }
}

/// Same field in the deficit variable `w = 1 - y`, which keeps relative
/// precision near the equilibrium.
fn deficit_rhs(c: f64) -> impl Fn(f64, &[f64], &mut [f64]) {
    move |_, s, ds| {
        ds[0] = -s[1];
        ds[1] = -c * s[1] - (1.0 - s[0]) * s[0];
    }
}

/// Purely relative error control: along the manifold neither `w = 1 - y`
/// nor `y` nor `y'` changes sign before the crossing.
fn manifold_options(ivp_tol: f64, max_step: f64) -> IvpOptions {
    IvpOptions { max_step: Some(max_step), abs_tol: Some(1e-300), ..IvpOptions::with_tol(ivp_tol) }
}

/// Negative root of `mu^2 + c mu - 1 = 0`: decay rate towards `y = 1`.
pub fn stable_rate(c: f64) -> f64 {
    -0.5 * (c + (c * c + 4.0).sqrt())
}

/// Shot classification. With `resolve_tube`, a trajectory that reaches
/// the tube is decided by the sign of its unstable component instead of
/// being reported as converged.
fn shoot(c: f64, slope: f64, length: f64, tol: f64, ivp_tol: f64, resolve_tube: bool) -> Result<ShotClass> {
    let mu_stable = stable_rate(c);
    // sign of the unstable-mode coefficient of (y - 1, y')
    let unstable_sign = |y: &[f64]| {
        if y[1] - mu_stable * (y[0] - 1.0) > 0.0 {
            ShotClass::Overshoot
        } else {
            ShotClass::Undershoot
        }
    };
    let classify = |y: &[f64]| {
        let (pos, vel) = (y[0], y[1]);
        if pos > 1.0 + tol {
            Some(ShotClass::Overshoot)
        } else if vel <= 0.0 && pos < 1.0 - tol {
            Some(ShotClass::Undershoot)
        } else if (pos - 1.0).abs() < tol && vel.abs() < tol {
            Some(if resolve_tube { unstable_sign(y) } else { ShotClass::Converged })
        } else {
            None
        }
    };
    let opts = IvpOptions { max_step: Some(0.5), abs_tol: Some(ivp_tol * slope.min(1.0)), ..IvpOptions::with_tol(ivp_tol) };
    let mut verdict: Option<ShotClass> = None;
    let end = integrate_observed(rhs(c), &[0.0, slope], (0.0, length), &opts, &[], |_, y| {
        verdict = classify(y);
        if verdict.is_some() { Flow::Stop } else { Flow::Continue }
    })?;
    if let Some(v) = verdict {
        return Ok(v);
    }
    // Not yet classified: keep going unless already in the linear regime.
    let near = (end.y[0] - 1.0).abs() < 1e-2 && end.y[1].abs() < 1e-2;
    if near {
        return Ok(unstable_sign(&end.y));
    }
    let end = integrate_observed(rhs(c), &end.y, (length, 20.0 * length), &opts, &[], |_, y| {
        verdict = classify(y);
        if verdict.is_some() { Flow::Stop } else { Flow::Continue }
    })?;
    Ok(verdict.unwrap_or_else(|| unstable_sign(&end.y)))
}

/// Classify a forward shot with initial slope `slope`.
pub fn classify_shot(c: f64, slope: f64, length: f64, tol: f64) -> Result<ShotClass> {
    check_drift(c)?;
    if !(slope > 0.0) {
        return Err(Error::invalid(format!("shooting slope must be positive, got {slope}")));
    }
    if !(length > 0.0) || !(tol > 0.0) {
        return Err(Error::invalid("length and tolerance must be positive"));
    }
    shoot(c, slope, length, tol, GammaOptions::default().ivp_tol, false)
}

enum SlopeSearch {
    /// `(undershoot, overshoot)` witnesses.
    Bracket(f64, f64),
    /// A shot landed in the convergence tube.
    Exact(f64),
    /// Every slope down to the floor overshoots: `gamma(c)` is below it.
    BelowFloor,
}

/// Geometric search (factor 2 from `1/sqrt(3)`) for a slope bracket.
fn slope_bracket(c: f64, opts: &GammaOptions) -> Result<SlopeSearch> {
    let shot = |s: f64| shoot(c, s, opts.length, CONVERGENCE_TUBE, opts.ivp_tol, true);
    let start = GAMMA_AT_ZERO;
    match shot(start)? {
        ShotClass::Converged => Ok(SlopeSearch::Exact(start)),
        ShotClass::Undershoot => {
            let mut lo = start;
            let mut hi = 2.0 * start;
            let ceiling = MAX_WITNESS_SLOPE * c.max(1.0);
            loop {
                if hi > ceiling {
                    return Err(Error::ExistenceViolation {
                        c,
                        reason: format!("no overshooting slope below {ceiling}"),
                    });
                }
                match shot(hi)? {
                    ShotClass::Overshoot => return Ok(SlopeSearch::Bracket(lo, hi)),
                    ShotClass::Converged => return Ok(SlopeSearch::Exact(hi)),
                    ShotClass::Undershoot => {
                        lo = hi;
                        hi *= 2.0;
                    }
                }
            }
        }
        ShotClass::Overshoot => {
            let mut hi = start;
            let mut lo = 0.5 * start;
            loop {
                if lo < MIN_WITNESS_SLOPE {
                    return Ok(SlopeSearch::BelowFloor);
                }
                match shot(lo)? {
                    ShotClass::Undershoot => return Ok(SlopeSearch::Bracket(lo, hi)),
                    ShotClass::Converged => return Ok(SlopeSearch::Exact(lo)),
                    ShotClass::Overshoot => {
                        hi = lo;
                        lo *= 0.5;
                    }
                }
            }
        }
    }
}

/// `(gamma, bracket width)`, or `None` when `gamma(c)` is below the
/// witness floor.
fn gamma_search(c: f64, opts: &GammaOptions) -> Result<Option<(f64, f64)>> {
    check_drift(c)?;
    if !(opts.slope_tol > 0.0) || !(opts.ivp_tol > 0.0) || !(opts.length > 0.0) {
        return Err(Error::invalid("gamma options must be positive"));
    }
    let (mut lo, mut hi) = match slope_bracket(c, opts)? {
        SlopeSearch::Bracket(lo, hi) => (lo, hi),
        SlopeSearch::Exact(s) => return Ok(Some((s, 0.0))),
        SlopeSearch::BelowFloor => return Ok(None),
    };
    // absolute tolerance, relative once gamma drops below 1
    while hi - lo > opts.slope_tol * hi.min(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shoot(c, mid, opts.length, CONVERGENCE_TUBE, opts.ivp_tol, true)? {
            ShotClass::Undershoot => lo = mid,
            ShotClass::Overshoot => hi = mid,
            ShotClass::Converged => return Ok(Some((mid, hi - lo))),
        }
    }
    Ok(Some((0.5 * (lo + hi), hi - lo)))
}

fn gamma_with_width(c: f64, opts: &GammaOptions) -> Result<(f64, f64)> {
    gamma_search(c, opts)?.ok_or_else(|| Error::ExistenceViolation {
        c,
        reason: format!("no undershooting slope above {MIN_WITNESS_SLOPE:e}"),
    })
}

/// `gamma(c) = y_c'(0)`, increasing and continuous on `(-2, inf)`.
pub fn gamma(c: f64, opts: &GammaOptions) -> Result<f64> {
    gamma_with_width(c, opts).map(|(g, _)| g)
}

/// Like [`gamma`], but a value below the witness floor (only reachable
/// for `c` within about `1e-2` of `-2`) is reported as `0`.
pub fn gamma_or_negligible(c: f64, opts: &GammaOptions) -> Result<f64> {
    Ok(gamma_search(c, opts)?.map_or(0.0, |(g, _)| g))
}

/// Stable manifold of `(1, 0)` traced backwards to `y = 0`.
///
/// The first leg runs in `w = 1 - y` until `w = 1/2`, the second in `y`.
struct Manifold {
    c: f64,
    ivp_tol: f64,
    s_switch: f64,
    state_switch: [f64; 2],
    /// Arc parameter (negative) where `y = 0`.
    s_star: f64,
    /// `y'` at the crossing.
    slope: f64,
}

impl Manifold {
    fn start(c: f64) -> [f64; 2] {
        [MANIFOLD_OFFSET, -stable_rate(c) * MANIFOLD_OFFSET]
    }

    fn trace(c: f64, ivp_tol: f64) -> Result<Self> {
        let missing = |what: &str| Error::ExistenceViolation {
            c,
            reason: format!("stable manifold never reaches {what}"),
        };
        let mut switch: Option<(f64, [f64; 2])> = None;
        integrate_observed(deficit_rhs(c), &Self::start(c), (0.0, -1e4), &manifold_options(ivp_tol, 0.5), &[], |t, w| {
            if w[0] >= 0.5 {
                switch = Some((t, [1.0 - w[0], w[1]]));
                Flow::Stop
            } else {
                Flow::Continue
            }
        })?;
        let (s_switch, state_switch) = switch.ok_or_else(|| missing("y = 1/2"))?;

        let mut prev = (s_switch, state_switch.to_vec());
        let mut crossed: Option<f64> = None;
        integrate_observed(rhs(c), &state_switch, (s_switch, s_switch - 1e4), &manifold_options(ivp_tol, 0.5), &[], |t, y| {
            if y[0] <= 0.0 {
                crossed = Some(t);
                Flow::Stop
            } else {
                prev = (t, y.to_vec());
                Flow::Continue
            }
        })?;
        let t_after = crossed.ok_or_else(|| missing("y = 0"))?;
        let (t_before, y_before) = prev;
        let fine = manifold_options(ivp_tol, 0.05);
        let advance = |s: f64| -> Result<Vec<f64>> {
            if s == t_before {
                return Ok(y_before.clone());
            }
            integrate_observed(rhs(c), &y_before, (t_before, s), &fine, &[], |_, _| Flow::Continue).map(|e| e.y)
        };
        // y increases with s: y <= 0 at t_after, y > 0 at t_before
        let mut failure = None;
        let mut height = |s: f64| match advance(s) {
            Ok(y) => y[0],
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        };
        let bracket = RootBracket::evaluate(t_after, t_before, &mut height)?;
        let s_star = bisect_root(&mut height, bracket, 1e-14, 0.0)?;
        if let Some(e) = failure {
            return Err(e);
        }
        let slope = advance(s_star)?[1];
        Ok(Self { c, ivp_tol, s_switch, state_switch, s_star, slope })
    }

    /// Sample on `[0, L]`, shifted so that `y(0) = 0`.
    fn sample(&self, grid: Grid1D) -> Result<Profile> {
        let c = self.c;
        let mu = stable_rate(c);
        let arc = |i: usize| self.s_star + grid.point(i);
        let mut samples = std::collections::HashMap::new();

        // nodes past the start of the trace use the linear stable tail
        let mut first: Vec<f64> = (0..grid.n_points()).rev().map(arc).filter(|&s| s < 0.0 && s > self.s_switch).collect();
        first.push(self.s_switch);
        integrate_observed(deficit_rhs(c), &Self::start(c), (0.0, self.s_switch), &manifold_options(self.ivp_tol, 0.5), &first, |t, w| {
            samples.insert(t.to_bits(), 1.0 - w[0]);
            Flow::Continue
        })?;
        let second: Vec<f64> = (0..grid.n_points()).rev().map(arc).filter(|&s| s <= self.s_switch).collect();
        if let Some(&end) = second.last() {
            if end < self.s_switch {
                integrate_observed(rhs(c), &self.state_switch, (self.s_switch, end), &manifold_options(self.ivp_tol, 0.5), &second, |t, y| {
                    samples.insert(t.to_bits(), y[0]);
                    Flow::Continue
                })?;
            }
        }
        samples.insert(self.s_switch.to_bits(), self.state_switch[0]);

        let mut values = Vec::with_capacity(grid.n_points());
        for i in 0..grid.n_points() {
            let s = arc(i);
            values.push(if s >= 0.0 {
                1.0 - MANIFOLD_OFFSET * (mu * s).exp()
            } else {
                *samples
                    .get(&s.to_bits())
                    .ok_or_else(|| Error::invalid(format!("missing manifold sample at s={s}")))?
            });
        }
        values[0] = 0.0;
        Profile::new(grid, values)
    }
}

/// Solve the half-line problem: `gamma` by shooting, profile from the
/// stable manifold.
pub fn solve_halfline(problem: &HalfLineProblem) -> Result<HalfLineSolution> {
    problem.validate()?;
    let opts = problem.gamma_options();
    let (gamma, width) = gamma_with_width(problem.c, &opts)?;
    let grid = Grid1D::with_max_spacing(0.0, problem.domain_length, problem.max_spacing)?;
    let manifold = Manifold::trace(problem.c, opts.ivp_tol)?;
    let profile = manifold.sample(grid)?;
    let manifold_slope = manifold.slope;
    let profile_last = profile.last();
    Ok(HalfLineSolution {
        problem: problem.clone(),
        gamma,
        profile,
        shot_slope_bracket_width: width,
        manifold_slope,
        tail_deficit: 1.0 - profile_last,
    })
}

/// Dirichlet principal eigenvalue of `-(phi'' + c phi' + phi)` on `(0, l)`.
pub fn eigenvalue_dirichlet(c: f64, l: f64) -> f64 {
    -1.0 + c * c / 4.0 + std::f64::consts::PI.powi(2) / (l * l)
}

/// Smallest eigenvalue of the centered finite-difference discretisation of
/// `-(phi'' + c phi' + phi)` on `(0, l)` with `n` cells and Dirichlet ends,
/// by shifted inverse power iteration.
pub fn principal_eigenvalue_numeric(c: f64, l: f64, n: usize) -> Result<f64> {
    const MAX_ITER: usize = 10_000;
    if n < 100 {
        return Err(Error::invalid(format!("need at least 100 cells, got {n}")));
    }
    if !(l > 0.0) || !c.is_finite() {
        return Err(Error::invalid("interval length must be positive"));
    }
    let h = l / n as f64;
    let m = n - 1;
    let lower = -1.0 / (h * h) + c / (2.0 * h);
    let upper = -1.0 / (h * h) - c / (2.0 * h);
    let centre = 2.0 / (h * h) - 1.0;
    // Gershgorin lower bound, nudged so the shifted matrix is nonsingular
    let shift = centre - lower.abs() - upper.abs() - 1e-3;
    let sub = vec![lower; m - 1];
    let sup = vec![upper; m - 1];
    let diag = vec![centre - shift; m];
    let mut x: Vec<f64> = (1..=m).map(|i| (std::f64::consts::PI * i as f64 / n as f64).sin() + 0.1).collect();
    let mut estimate = f64::NAN;
    let mut settled = 0;
    for _ in 0..MAX_ITER {
        let y = solve_tridiagonal(&sub, &diag, &sup, &x)?;
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let xy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let next = shift + xy / yy;
        let norm = yy.sqrt();
        x = y.into_iter().map(|v| v / norm).collect();
        if (next - estimate).abs() <= 1e-13 * next.abs().max(1.0) {
            settled += 1;
            if settled >= 3 {
                return Ok(next);
            }
        } else {
            settled = 0;
        }
        estimate = next;
    }
    Err(Error::NoConvergence { iterations: MAX_ITER })
}
