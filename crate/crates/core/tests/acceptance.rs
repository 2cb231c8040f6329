//! One PASS/FAIL line per acceptance criterion; exits non-zero on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use segwave::frontsim::{compare_with_wave, measure_front_speed, PdeState};
use segwave::halfline::{eigenvalue_dirichlet, gamma, principal_eigenvalue_numeric, GammaOptions};
use segwave::limit::{LimitParams, LimitSolver, DEFAULT_C_TOL};
use segwave::numerics::Grid1D;
use segwave::sweep::{log_grid, run_sweep, SweepSpec};
use segwave::wave::{continue_in_k, solve_wave, Normalization, Seed, SystemParams, WaveOptions};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn gamma_oracle() -> Outcome {
    let g = gamma(0.0, &GammaOptions::default()).unwrap();
    let err = (g - 1.0 / 3f64.sqrt()).abs();
    outcome(err <= 1e-6, format!("gamma(0)={g:.12} |err|={err:.2e} tol=1e-6"))
}

fn gamma_monotone() -> Outcome {
    let opts = GammaOptions::default();
    let cs: Vec<f64> = (0..60).map(|i| -1.9 + 5.9 * i as f64 / 59.0).collect();
    let gs: Vec<f64> = cs.par_iter().map(|&c| gamma(c, &opts).unwrap()).collect();
    let min_step = gs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    outcome(min_step > 1e-5, format!("60 samples on [-1.9, 4], min increment {min_step:.3e} margin=1e-5"))
}

fn eigen_cross_check() -> Outcome {
    let mut worst: f64 = 0.0;
    for c in [0.0, 1.0, 3.0] {
        for l in [std::f64::consts::PI, 2.0 * std::f64::consts::PI, 10.0] {
            let numeric = principal_eigenvalue_numeric(c, l, 2000).unwrap();
            worst = worst.max((numeric - eigenvalue_dirichlet(c, l)).abs());
        }
    }
    outcome(worst <= 1e-4, format!("9 (c, l) pairs, max |err|={worst:.2e} tol=1e-4"))
}

fn standoff() -> Outcome {
    let pairs = [(1.0, 1.0), (2.0, 1.0), (2.0, 8.0), (0.5, 0.5), (3.0, 2.0), (1.5, 3.0), (0.7, 0.2), (1.2, 0.9), (2.5, 5.0), (0.3, 0.1)];
    let worst = pairs
        .par_iter()
        .map(|&(a, r)| {
            let p = LimitParams::new(a, r, a * a / r).unwrap();
            LimitSolver::new().solve_limit_speed(&p, DEFAULT_C_TOL).unwrap().abs()
        })
        .reduce(|| 0.0, f64::max);
    outcome(worst <= 1e-7, format!("10 pairs with d = alpha^2/r, max |c|={worst:.2e} tol=1e-7"))
}

fn trichotomy() -> Outcome {
    let alphas = [0.5, 0.8, 1.0, 1.7, 3.0];
    let rs = [0.3, 0.5, 1.0, 2.0, 5.0];
    let ds = [0.1, 0.4, 1.0, 2.5, 8.0];
    let mut grid = Vec::new();
    for &a in &alphas {
        for &r in &rs {
            for &d in &ds {
                grid.push(LimitParams::new(a, r, d).unwrap());
            }
        }
    }
    let solver = LimitSolver::new();
    let failures: Vec<String> = grid
        .par_iter()
        .filter_map(|p| {
            let c = match solver.solve_limit_speed(p, DEFAULT_C_TOL) {
                Ok(c) => c,
                Err(e) => return Some(format!("{p:?}: {e}")),
            };
            let gap = p.threshold() - p.d;
            let sign_ok = if gap == 0.0 { c.abs() <= 1e-7 } else { c.signum() == gap.signum() };
            let (lo, hi) = p.speed_bounds();
            (!sign_ok || !(c > lo && c < hi)).then(|| format!("{p:?}: c={c}"))
        })
        .collect();
    outcome(failures.is_empty(), format!("{} grid points, {} failures {:?}", grid.len(), failures.len(), failures))
}

fn interface_identity() -> Outcome {
    let params = [(1.0, 1.0, 1.0), (1.0, 1.0, 4.0), (1.0, 1.0, 0.25), (3.0, 1.0, 1.0), (0.5, 0.5, 10.0), (2.0, 0.5, 0.1)];
    let solver = LimitSolver::new();
    let worst = params
        .iter()
        .map(|&(a, r, d)| {
            let p = LimitParams::new(a, r, d).unwrap();
            let c = solver.solve_limit_speed(&p, DEFAULT_C_TOL).unwrap();
            let w = solver.build_limit_profiles(&p, c).unwrap();
            let left = w.u_profile.right_derivative();
            let right = w.v_profile.left_derivative();
            (a * left + d * right).abs()
        })
        .fold(0.0, f64::max);
    outcome(worst <= 1e-6, format!("{} limit waves, max |alpha u'(0-) + d v'(0+)|={worst:.2e} tol=1e-6", params.len()))
}

fn rd_invariance() -> Outcome {
    let alpha = 1.3;
    let pairs = [(1.0, 2.0), (2.0, 1.0), (0.5, 4.0), (4.0, 0.5), (0.25, 8.0), (8.0, 0.25)];
    let solver = LimitSolver::new();
    let cs: Vec<f64> = pairs
        .iter()
        .map(|&(r, d)| solver.solve_limit_speed(&LimitParams::new(alpha, r, d).unwrap(), DEFAULT_C_TOL).unwrap())
        .collect();
    let spread = cs.iter().fold(f64::NEG_INFINITY, |m, &c| m.max(c)) - cs.iter().fold(f64::INFINITY, |m, &c| m.min(c));
    outcome(spread <= 1e-7, format!("6 (r, d) pairs with rd=2, spread {spread:.2e} tol=1e-7"))
}

fn finite_k_symmetry(speeds: &mut Vec<(SystemParams, f64)>) -> Outcome {
    let base = LimitParams::new(1.0, 1.0, 1.0).unwrap();
    let report = continue_in_k(&base, &[10.0, 100.0, 1000.0], Normalization::Cross).unwrap();
    speeds.extend(report.waves.iter().map(|w| (w.params, w.c)));
    let worst = report.c_values.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    outcome(worst <= 1e-8, format!("k in {{10, 100, 1000}}, max |c_k|={worst:.2e} tol=1e-8"))
}

fn convergence_in_k(speeds: &mut Vec<(SystemParams, f64)>) -> Outcome {
    let ks = [10.0, 100.0, 1000.0, 10000.0];
    let mut pass = true;
    let mut detail = Vec::new();
    for d in [4.0, 0.25] {
        let base = LimitParams::new(1.0, 1.0, d).unwrap();
        let report = continue_in_k(&base, &ks, Normalization::Cross).unwrap();
        speeds.extend(report.waves.iter().map(|w| (w.params, w.c)));
        let gaps = report.gaps();
        let gaps_ok = gaps.windows(2).all(|w| w[1] < w[0]);
        let seg_ok = report.segregation_values.windows(2).all(|w| w[1] < w[0]);
        pass &= gaps_ok && seg_ok;
        detail.push(format!(
            "d={d}: gaps {} segregation {}",
            gaps.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>().join(">"),
            report.segregation_values.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>().join(">")
        ));
    }
    outcome(pass, detail.join("; "))
}

fn speed_bounds_everywhere(speeds: &mut Vec<(SystemParams, f64)>) -> Outcome {
    for (a, r, d, k) in [(3.0, 1.0, 1.0, 50.0), (0.5, 0.5, 10.0, 10.0), (2.0, 0.5, 0.1, 10.0), (1.0, 2.0, 1.0, 20.0)] {
        let p = SystemParams::new(k, a, r, d).unwrap();
        let w = solve_wave(&p, Seed::Logistic, &WaveOptions::default()).unwrap();
        speeds.push((p, w.c));
    }
    let outside: Vec<_> = speeds
        .iter()
        .filter(|(p, c)| {
            let (lo, hi) = p.speed_bounds();
            !(*c > lo && *c < hi)
        })
        .collect();
    outcome(outside.is_empty(), format!("{} converged waves, {} outside (-2 sqrt(rd), 2)", speeds.len(), outside.len()))
}

fn pde_extremal_speeds() -> Outcome {
    let grid = Grid1D::with_max_spacing(-100.0, 300.0, 0.1).unwrap();
    let pu = SystemParams::new(50.0, 1.0, 1.0, 1.0).unwrap();
    let su = measure_front_speed(PdeState::step_fronts(grid, true, false).unwrap(), &pu, 200.0, 0.5).unwrap();
    let pv = SystemParams::new(50.0, 1.0, 1.0, 4.0).unwrap();
    let sv = measure_front_speed(PdeState::step_fronts(grid, false, true).unwrap(), &pv, 200.0, 0.5).unwrap();
    let eu = (su.fitted_speed - 2.0).abs() / 2.0;
    let ev = (sv.fitted_speed.abs() - 4.0).abs() / 4.0;
    outcome(
        eu <= 0.05 && ev <= 0.05,
        format!("u front {:.4} (rel {eu:.2e}), v front {:.4} vs 2 sqrt(rd)=4 (rel {ev:.2e}), tol=5%", su.fitted_speed, sv.fitted_speed),
    )
}

fn cross_solver() -> Outcome {
    let sets = [(1.0, 1.0, 0.25), (1.0, 1.0, 4.0), (1.0, 1.0, 1.0), (2.0, 1.0, 1.0)];
    let results: Vec<(f64, f64, bool)> = sets
        .par_iter()
        .map(|&(a, r, d)| {
            let p = SystemParams::new(50.0, a, r, d).unwrap();
            let w = solve_wave(&p, Seed::Logistic, &WaveOptions::default()).unwrap();
            let diff = compare_with_wave(&p, &w, 100.0).unwrap();
            (w.c, diff, diff <= 0.1f64.max(0.1 * w.c.abs()))
        })
        .collect();
    let detail = results.iter().map(|(c, diff, _)| format!("c_k={c:.4} |diff|={diff:.2e}")).collect::<Vec<_>>().join(", ");
    outcome(results.iter().all(|r| r.2), format!("k=50: {detail}; tol=max(0.1, 10%)"))
}

fn sweep_threshold() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (a, r) in [(1.0, 1.0), (2.0, 1.0), (2.0, 8.0)] {
        let spec = SweepSpec { alpha: a, r, d_grid: log_grid(0.1, 10.0, 41).unwrap(), k_list: None, output_path: None };
        let curve = run_sweep(&spec).unwrap();
        let err = curve.sign_change_d.map_or(f64::INFINITY, |d| (d - a * a / r).abs());
        pass &= err <= 1e-6;
        detail.push(format!("({a}, {r}): |err|={err:.2e}"));
    }
    outcome(pass, format!("{}; tol=1e-6", detail.join(", ")))
}

fn main() -> ExitCode {
    let mut speeds = Vec::new();
    let mut failed = 0;
    let mut report = |id: usize, name: &str, budget: Duration, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let within = elapsed <= budget;
        let pass = out.pass && within;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {}: {name}: {} [{:.1}s, budget {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if within { "" } else { ", over budget" }
        );
    };
    let s = Duration::from_secs;
    report(1, "gamma oracle", s(1), &mut gamma_oracle);
    report(2, "gamma monotonicity", s(30), &mut gamma_monotone);
    report(3, "eigenvalue cross-check", s(10), &mut eigen_cross_check);
    report(4, "standoff", s(60), &mut standoff);
    report(5, "trichotomy", s(300), &mut trichotomy);
    report(6, "interface identity", s(60), &mut interface_identity);
    report(7, "rd-invariance", s(60), &mut rd_invariance);
    report(8, "finite-k symmetry", s(120), &mut || finite_k_symmetry(&mut speeds));
    report(9, "convergence in k", s(600), &mut || convergence_in_k(&mut speeds));
    report(10, "speed bounds at every k", s(120), &mut || speed_bounds_everywhere(&mut speeds));
    report(11, "PDE extremal speeds", s(240), &mut pde_extremal_speeds);
    report(12, "cross-solver consistency", s(240), &mut cross_solver);
    report(13, "sweep threshold", s(600), &mut sweep_threshold);
    if failed == 0 {
        println!("acceptance: all 13 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria fail");
        ExitCode::FAILURE
    }
}
