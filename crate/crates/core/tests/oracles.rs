//! Reference values from independent computations, frozen here.
//!
//! Slopes and limit speeds were reproduced with a separate collocation BVP
//! solver (scipy `solve_bvp` on `[0, 40]`, tolerance 1e-12) and Brent root
//! finding on the interface relation; the two implementations agree to
//! about 5e-11.

use segwave::halfline::{
    eigenvalue_dirichlet, gamma, principal_eigenvalue_numeric, solve_halfline, GammaOptions, HalfLineProblem,
    GAMMA_AT_ZERO,
};
use segwave::limit::{classify_invader, solve_limit_speed, InvaderTag, LimitParams, DEFAULT_C_TOL};
use segwave::sweep::{rescale_parameters, RawEcologicalParams, Rescaled};

const GAMMA_TABLE: [(f64, f64); 8] = [
    (-1.5, 0.013573484943),
    (-1.0, 0.104915138531),
    (0.0, 0.577350269190),
    (0.5, 0.928225358873),
    (1.0, 1.328102135277),
    (2.0, 2.212946944843),
    (3.0, 3.153683468388),
    (4.0, 4.119125250057),
];

const SPEED_TABLE: [((f64, f64, f64), f64); 5] = [
    ((1.0, 1.0, 4.0), -0.443353228394),
    ((1.0, 1.0, 0.25), 0.221676614197),
    ((3.0, 1.0, 1.0), 0.482035665325),
    ((0.5, 0.5, 10.0), -1.061280113769),
    ((2.0, 0.5, 0.1), 0.525906605881),
];

#[test]
fn slopes_match_collocation_reference() {
    let opts = GammaOptions::default();
    for (c, expected) in GAMMA_TABLE {
        let g = gamma(c, &opts).unwrap();
        assert!((g - expected).abs() <= 1e-9, "gamma({c}) = {g}, reference {expected}");
    }
}

#[test]
fn slope_at_zero_drift_from_first_integral() {
    // y'^2/2 + y^2/2 - y^3/3 is conserved and equals 1/6 at y = 1
    assert!((GAMMA_AT_ZERO - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    let sol = solve_halfline(&HalfLineProblem::new(0.0).unwrap()).unwrap();
    let h = sol.profile.grid().spacing();
    let y = sol.profile.values();
    let mut worst: f64 = 0.0;
    for i in 1..y.len() / 2 {
        let p = (y[i + 1] - y[i - 1]) / (2.0 * h);
        let energy = 0.5 * p * p + 0.5 * y[i] * y[i] - y[i].powi(3) / 3.0;
        worst = worst.max((energy - 1.0 / 6.0).abs());
    }
    assert!(worst < 1e-5, "first integral drift {worst}");
}

#[test]
fn limit_speeds_match_reference() {
    for ((a, r, d), expected) in SPEED_TABLE {
        let c = solve_limit_speed(&LimitParams::new(a, r, d).unwrap(), DEFAULT_C_TOL).unwrap();
        assert!((c - expected).abs() <= 1e-9, "c_inf({a}, {r}, {d}) = {c}, reference {expected}");
    }
}

#[test]
fn dirichlet_eigenvalue_closed_form() {
    let pi = std::f64::consts::PI;
    assert!((eigenvalue_dirichlet(0.0, pi) - 0.0).abs() < 1e-15);
    assert!((eigenvalue_dirichlet(2.0, pi) - 1.0).abs() < 1e-15);
    assert!((eigenvalue_dirichlet(1.0, 2.0 * pi) - (-0.5)).abs() < 1e-15);
    let numeric = principal_eigenvalue_numeric(1.0, 10.0, 1000).unwrap();
    assert!((numeric - eigenvalue_dirichlet(1.0, 10.0)).abs() < 1e-4);
}

#[test]
fn sign_threshold_and_bounds() {
    // threshold alpha^2 / r separates the two invasion directions
    for (a, r, d, tag) in [
        (1.0, 1.0, 1.0, InvaderTag::Standoff),
        (1.0, 1.0, 0.5, InvaderTag::UInvades),
        (1.0, 1.0, 2.0, InvaderTag::VInvades),
        (2.0, 8.0, 0.5, InvaderTag::Standoff),
        (2.0, 1.0, 3.0, InvaderTag::UInvades),
    ] {
        let p = LimitParams::new(a, r, d).unwrap();
        let v = classify_invader(&p).unwrap();
        assert_eq!(v.tag, tag, "{p:?} c={}", v.c);
        assert_eq!(v.threshold, a * a / r);
        let (lo, hi) = p.speed_bounds();
        assert!(v.c > lo && v.c < hi);
    }
}

#[test]
fn rescaling_by_direct_substitution() {
    let raw = |d1, d2, r1, r2, a1, a2, k1, k2| RawEcologicalParams { d1, d2, r1, r2, a1, a2, k1, k2 };
    assert_eq!(
        rescale_parameters(&raw(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)).unwrap(),
        Rescaled { k: 1.0, alpha: 1.0, d: 1.0, r: 1.0 }
    );
    assert_eq!(
        rescale_parameters(&raw(1.0, 3.0, 4.0, 2.0, 1.0, 1.0, 5.0, 5.0)).unwrap(),
        Rescaled { k: 2.5, alpha: 2.0, d: 3.0, r: 0.5 }
    );
    // k = 10, alpha = 0.5, r = 2: alpha / r < 1
    assert!(matches!(
        rescale_parameters(&raw(1.0, 3.0, 2.0, 4.0, 1.0, 1.0, 5.0, 5.0)),
        Err(segwave::Error::AssumptionViolation { .. })
    ));
}
