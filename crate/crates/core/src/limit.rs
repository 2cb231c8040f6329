//! Infinite-competition limit: the interface relation
//! `alpha * gamma(-c) = sqrt(r d) * gamma(c / sqrt(r d))`, its unique root
//! `c_inf`, and the segregated limit profiles.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::halfline::{self, GammaOptions, HalfLineProblem};
use crate::numerics::{bisect_root, Grid1D, Profile, RootBracket};

/// Distance kept from both ends of the admissible speed interval.
pub const BRACKET_MARGIN: f64 = 1e-6;
/// Default abscissa tolerance of the speed bisection.
pub const DEFAULT_C_TOL: f64 = 1e-11;
/// Residual at which the speed bisection may stop early.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// `|c|` below which the verdict is a standoff.
pub const STANDOFF_TOL: f64 = 1e-9;
/// Bound on the reconstructed interface residual.
pub const INTERFACE_TOL: f64 = 1e-6;

/// Rescaled interspecific ratio, growth ratio and diffusion ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitParams {
    pub alpha: f64,
    pub r: f64,
    pub d: f64,
}

impl LimitParams {
    pub fn new(alpha: f64, r: f64, d: f64) -> Result<Self> {
        let p = Self { alpha, r, d };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("r", self.r), ("d", self.d)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn sqrt_rd(&self) -> f64 {
        (self.r * self.d).sqrt()
    }

    /// `alpha^2 / r`: the diffusion ratio at which neither species invades.
    pub fn threshold(&self) -> f64 {
        self.alpha * self.alpha / self.r
    }

    /// Open interval `(-2 sqrt(r d), 2)` containing every wave speed.
    pub fn speed_bounds(&self) -> (f64, f64) {
        (-2.0 * self.sqrt_rd(), 2.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InvaderTag {
    UInvades,
    VInvades,
    Standoff,
}

impl std::fmt::Display for InvaderTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InvaderTag::UInvades => "u-invades",
            InvaderTag::VInvades => "v-invades",
            InvaderTag::Standoff => "standoff",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvaderVerdict {
    pub tag: InvaderTag,
    pub c: f64,
    pub threshold: f64,
}

/// Segregated limit wave: `u` supported on `[-L, 0]`, `v` on `[0, L_v]`.
#[derive(Clone, Debug)]
pub struct LimitWave {
    pub params: LimitParams,
    pub c: f64,
    pub u_profile: Profile,
    pub v_profile: Profile,
    /// `|alpha u'(0-) + d v'(0+)|` from one-sided stencils.
    pub interface_residual: f64,
}

impl LimitWave {
    pub fn u_slope(&self) -> f64 {
        self.u_profile.right_derivative()
    }

    pub fn v_slope(&self) -> f64 {
        self.v_profile.left_derivative()
    }

    /// Evaluate `(u, v)` at `xi`; each vanishes off its half line.
    pub fn evaluate(&self, xi: f64) -> (f64, f64) {
        let u = if xi <= 0.0 { self.u_profile.interpolate(xi) } else { 0.0 };
        let v = if xi >= 0.0 { self.v_profile.interpolate(xi) } else { 0.0 };
        (u, v)
    }

    /// `max u v` over both grids; zero for exactly segregated profiles.
    pub fn segregation(&self) -> f64 {
        self.u_profile
            .grid()
            .points()
            .chain(self.v_profile.grid().points())
            .map(|x| {
                let (u, v) = self.evaluate(x);
                u * v
            })
            .fold(0.0, f64::max)
    }

    /// Rows `(xi, u, v)`: the `u` grid on `xi < 0` followed by the `v` grid.
    pub fn rows(&self) -> Vec<(f64, f64, f64)> {
        let u_grid = self.u_profile.grid();
        let mut rows: Vec<(f64, f64, f64)> = u_grid
            .points()
            .zip(self.u_profile.values())
            .filter(|(x, _)| *x < 0.0)
            .map(|(x, &u)| (x, u, 0.0))
            .collect();
        rows.extend(self.v_profile.grid().points().zip(self.v_profile.values()).map(|(x, &v)| (x, 0.0, v)));
        rows
    }
}

type CacheKey = (u64, u64, u64);

/// Memoised `gamma` evaluations keyed by `(c, L, slope_tol)`.
///
/// Safe to share between threads; values are deterministic, so results do
/// not depend on which worker filled an entry.
#[derive(Clone, Debug, Default)]
pub struct GammaCache {
    inner: Arc<RwLock<HashMap<CacheKey, f64>>>,
}

impl GammaCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.read().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get_or_compute(&self, c: f64, opts: &GammaOptions) -> Result<f64> {
        let key = (c.to_bits(), opts.length.to_bits(), opts.slope_tol.to_bits());
        if let Some(v) = self.inner.read().ok().and_then(|m| m.get(&key).copied()) {
            return Ok(v);
        }
        let v = halfline::gamma_or_negligible(c, opts)?;
        if let Ok(mut m) = self.inner.write() {
            m.insert(key, v);
        }
        Ok(v)
    }
}

/// Limit-speed solver with its `gamma` settings and cache.
#[derive(Clone, Debug, Default)]
pub struct LimitSolver {
    pub gamma: GammaOptions,
    pub cache: GammaCache,
}

impl LimitSolver {
    pub fn new() -> Self {
        Self::default()
    }

    fn gamma_at(&self, c: f64) -> Result<f64> {
        self.cache.get_or_compute(c, &self.gamma)
    }

    /// `alpha gamma(-c) - sqrt(r d) gamma(c / sqrt(r d))`, decreasing in `c`.
    pub fn interface_relation_residual(&self, c: f64, params: &LimitParams) -> Result<f64> {
        params.validate()?;
        let s = params.sqrt_rd();
        let (lo, hi) = params.speed_bounds();
        let inside = -c > -2.0 + halfline::EXISTENCE_MARGIN && c / s > -2.0 + halfline::EXISTENCE_MARGIN;
        if !c.is_finite() || !inside {
            return Err(Error::DomainViolation { c, lo, hi });
        }
        Ok(params.alpha * self.gamma_at(-c)? - s * self.gamma_at(c / s)?)
    }

    /// Unique root of the interface relation by bisection on
    /// `(-2 sqrt(r d) + delta, 2 - delta)`.
    pub fn solve_limit_speed(&self, params: &LimitParams, c_tol: f64) -> Result<f64> {
        params.validate()?;
        if !(c_tol > 0.0) {
            return Err(Error::invalid("c_tol must be positive"));
        }
        let (lo, hi) = params.speed_bounds();
        let (lo, hi) = (lo + BRACKET_MARGIN, hi - BRACKET_MARGIN);
        let r_lo = self.interface_relation_residual(lo, params)?;
        let r_hi = self.interface_relation_residual(hi, params)?;
        if !(r_lo > 0.0 && r_hi < 0.0) {
            return Err(Error::BracketFailure { r_lo, r_hi });
        }
        let mut failure = None;
        let f = |c: f64| match self.interface_relation_residual(c, params) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        };
        let bracket = RootBracket::new(lo, hi, r_lo, r_hi)?;
        let c = bisect_root(f, bracket, c_tol, RESIDUAL_TOL)?;
        match failure {
            Some(e) => Err(e),
            None => Ok(c),
        }
    }

    pub fn classify_invader(&self, params: &LimitParams) -> Result<InvaderVerdict> {
        let c = self.solve_limit_speed(params, DEFAULT_C_TOL)?;
        Ok(verdict_for(c, params))
    }

    /// Segregated profiles for speed `c`, which must solve the interface
    /// relation to `1e-8`.
    pub fn build_limit_profiles(&self, params: &LimitParams, c: f64) -> Result<LimitWave> {
        let residual = self.interface_relation_residual(c, params)?;
        if residual.abs() > 1e-8 {
            return Err(Error::invalid(format!(
                "c={c} does not solve the interface relation (residual {residual:e})"
            )));
        }
        let s = params.sqrt_rd();
        let u_half = HalfLineProblem::new(-c)?;
        let v_half = HalfLineProblem::new(c / s)?;
        let (u_sol, v_sol) = rayon::join(|| halfline::solve_halfline(&u_half), || halfline::solve_halfline(&v_half));
        let (u_sol, v_sol) = (u_sol?, v_sol?);

        // u(xi) = y_{-c}(-xi)
        let uy = u_sol.profile;
        let u_grid = Grid1D::new(-uy.grid().right(), 0.0, uy.grid().n_points())?;
        let u_profile = Profile::new(u_grid, uy.values().iter().rev().copied().collect())?;

        // v(xi) = y_{c/sqrt(rd)}(sqrt(r/d) xi): same samples on a stretched grid
        let vy = v_sol.profile;
        let stretch = (params.d / params.r).sqrt();
        let v_grid = Grid1D::new(0.0, vy.grid().right() * stretch, vy.grid().n_points())?;
        let v_profile = Profile::new(v_grid, vy.into_values())?;

        let mut wave = LimitWave { params: *params, c, u_profile, v_profile, interface_residual: 0.0 };
        wave.interface_residual = (params.alpha * wave.u_slope() + params.d * wave.v_slope()).abs();
        Ok(wave)
    }
}

fn verdict_for(c: f64, params: &LimitParams) -> InvaderVerdict {
    let tag = if c > STANDOFF_TOL {
        InvaderTag::UInvades
    } else if c < -STANDOFF_TOL {
        InvaderTag::VInvades
    } else {
        InvaderTag::Standoff
    };
    InvaderVerdict { tag, c, threshold: params.threshold() }
}

/// One-shot wrapper with a fresh cache.
pub fn interface_relation_residual(c: f64, params: &LimitParams) -> Result<f64> {
    LimitSolver::new().interface_relation_residual(c, params)
}

pub fn solve_limit_speed(params: &LimitParams, c_tol: f64) -> Result<f64> {
    LimitSolver::new().solve_limit_speed(params, c_tol)
}

pub fn classify_invader(params: &LimitParams) -> Result<InvaderVerdict> {
    LimitSolver::new().classify_invader(params)
}

pub fn build_limit_profiles(params: &LimitParams, c: f64) -> Result<LimitWave> {
    LimitSolver::new().build_limit_profiles(params, c)
}

/// `|c_inf(alpha, r1, d1) - c_inf(alpha, r2, d2)|` for pairs with `r1 d1 = r2 d2`.
pub fn speed_invariance_check(alpha: f64, r1: f64, d1: f64, r2: f64, d2: f64) -> Result<f64> {
    let (p1, p2) = (r1 * d1, r2 * d2);
    if (p1 - p2).abs() > 1e-12 * p1.abs().max(p2.abs()) {
        return Err(Error::invalid(format!("products differ: {p1} vs {p2}")));
    }
    let solver = LimitSolver::new();
    let a = solver.solve_limit_speed(&LimitParams::new(alpha, r1, d1)?, DEFAULT_C_TOL)?;
    let b = solver.solve_limit_speed(&LimitParams::new(alpha, r2, d2)?, DEFAULT_C_TOL)?;
    Ok((a - b).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(LimitParams::new(1.0, 0.0, 1.0).is_err());
        assert!(LimitParams::new(f64::NAN, 1.0, 1.0).is_err());
        let p = LimitParams::new(2.0, 1.0, 4.0).unwrap();
        assert_eq!(p.threshold(), 4.0);
        assert_eq!(p.speed_bounds(), (-4.0, 2.0));
    }

    #[test]
    fn residual_vanishes_in_symmetric_cases() {
        let solver = LimitSolver::new();
        let sym = LimitParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(solver.interface_relation_residual(0.0, &sym).unwrap().abs() < 2e-6);
        let p = LimitParams::new(2.0, 1.0, 4.0).unwrap();
        assert!(solver.interface_relation_residual(0.0, &p).unwrap().abs() < 2e-6);
        assert!(solver.interface_relation_residual(0.5, &sym).unwrap() < 0.0);
    }

    #[test]
    fn residual_outside_domain() {
        let p = LimitParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(interface_relation_residual(2.5, &p), Err(Error::DomainViolation { .. })));
        assert!(matches!(interface_relation_residual(-2.0, &p), Err(Error::DomainViolation { .. })));
    }

    #[test]
    fn verdict_examples() {
        let solver = LimitSolver::new();
        let v = solver.classify_invader(&LimitParams::new(1.0, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(v.tag, InvaderTag::Standoff);
        let v = solver.classify_invader(&LimitParams::new(3.0, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!((v.tag, v.threshold), (InvaderTag::UInvades, 9.0));
        let v = solver.classify_invader(&LimitParams::new(1.0, 4.0, 1.0).unwrap()).unwrap();
        assert_eq!((v.tag, v.threshold), (InvaderTag::VInvades, 0.25));
    }

    #[test]
    fn profiles_require_a_root() {
        let p = LimitParams::new(1.0, 1.0, 4.0).unwrap();
        assert!(build_limit_profiles(&p, 0.0).is_err());
    }

    #[test]
    fn invariance_rejects_unequal_products() {
        assert!(speed_invariance_check(1.0, 1.0, 2.0, 1.0, 3.0).is_err());
    }
}
