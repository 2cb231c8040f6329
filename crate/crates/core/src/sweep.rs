//! Parameter ingestion, `d`-sweeps of the invasion speed and report export.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit::{LimitParams, LimitSolver, DEFAULT_C_TOL};
use crate::numerics::{bisect_root, RootBracket};
use crate::wave::{continue_in_k_with, WaveOptions};

/// Relative resolution of the sign-change locator in `d`.
pub const SIGN_CHANGE_TOL: f64 = 1e-9;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// The eight dimensional coefficients of the two-species system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawEcologicalParams {
    pub d1: f64,
    pub d2: f64,
    pub r1: f64,
    pub r2: f64,
    pub a1: f64,
    pub a2: f64,
    pub k1: f64,
    pub k2: f64,
}

/// Nondimensional quadruple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rescaled {
    pub k: f64,
    pub alpha: f64,
    pub d: f64,
    pub r: f64,
}

impl Rescaled {
    pub fn limit(&self) -> Result<LimitParams> {
        LimitParams::new(self.alpha, self.r, self.d)
    }
}

/// `k = k1 r2/(a2 r1)`, `alpha = k2 a2 r1/(k1 a1 r2)`, `d = d2/d1`, `r = r2/r1`.
///
/// Species must be labelled so that `k2 a2 / r2^2 >= k1 a1 / r1^2`
/// (equivalently `alpha / r >= 1`).
pub fn rescale_parameters(raw: &RawEcologicalParams) -> Result<Rescaled> {
    let RawEcologicalParams { d1, d2, r1, r2, a1, a2, k1, k2 } = *raw;
    if [d1, d2, r1, r2, a1, a2, k1, k2].iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::invalid("all eight coefficients must be positive and finite"));
    }
    let lhs = k2 * a2 / (r2 * r2);
    let rhs = k1 * a1 / (r1 * r1);
    if lhs < rhs {
        return Err(Error::AssumptionViolation { lhs, rhs });
    }
    Ok(Rescaled {
        k: k1 * r2 / (a2 * r1),
        alpha: k2 * a2 * r1 / (k1 * a1 * r2),
        d: d2 / d1,
        r: r2 / r1,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub alpha: f64,
    pub r: f64,
    pub d_grid: Vec<f64>,
    #[serde(default)]
    pub k_list: Option<Vec<f64>>,
    #[serde(default)]
    pub output_path: Option<String>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        LimitParams::new(self.alpha, self.r, 1.0)?;
        if self.d_grid.is_empty() {
            return Err(Error::invalid("d grid is empty"));
        }
        if self.d_grid.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::invalid("d grid entries must be positive"));
        }
        if self.d_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("d grid must be strictly increasing"));
        }
        if let Some(ks) = &self.k_list {
            if ks.iter().any(|k| !(*k > 1.0 && k.is_finite())) {
                return Err(Error::invalid("k list entries must exceed 1"));
            }
            if ks.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::invalid("k list must be strictly increasing"));
            }
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        self.alpha * self.alpha / self.r
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::invalid("log grid needs 0 < lo < hi and at least two points"));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect())
}

/// One `c_k` column of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct KColumn {
    pub k: f64,
    pub values: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpeedCurve {
    pub alpha: f64,
    pub r: f64,
    pub d_values: Vec<f64>,
    pub c_inf: Vec<Option<f64>>,
    pub c_k_columns: Vec<KColumn>,
    /// Per-row failure messages, empty when the row succeeded.
    pub diagnostics: Vec<String>,
    pub sign_change_d: Option<f64>,
    pub predicted_threshold: f64,
}

/// Continuation path through every target: starts at `min(10, first)` and
/// never grows by more than a factor of 10 per step.
pub fn continuation_schedule(targets: &[f64]) -> Vec<f64> {
    let mut path: Vec<f64> = Vec::new();
    let mut current = targets.first().map_or(10.0, |&k| k.min(10.0));
    path.push(current);
    for &k in targets {
        while k > 10.0 * current {
            current *= 10.0;
            path.push(current);
        }
        if k > current {
            current = k;
            path.push(k);
        }
    }
    path
}

/// `c_inf` at every `d` (parallel), optional `c_k` columns by continuation,
/// and the refined sign change of `c_inf` in `d`. Per-point failures leave
/// empty cells and a diagnostic.
pub fn run_sweep(spec: &SweepSpec) -> Result<SpeedCurve> {
    run_sweep_with(spec, &LimitSolver::new())
}

pub fn run_sweep_with(spec: &SweepSpec, solver: &LimitSolver) -> Result<SpeedCurve> {
    spec.validate()?;
    let ks = spec.k_list.clone().unwrap_or_default();
    let schedule = continuation_schedule(&ks);
    let rows: Vec<(Option<f64>, Vec<Option<f64>>, String)> = spec
        .d_grid
        .par_iter()
        .map(|&d| {
            let mut notes = Vec::new();
            let params = LimitParams { alpha: spec.alpha, r: spec.r, d };
            let c_inf = match solver.solve_limit_speed(&params, DEFAULT_C_TOL) {
                Ok(c) => Some(c),
                Err(e) => {
                    notes.push(format!("c_inf: {e}"));
                    None
                }
            };
            let mut c_k = vec![None; ks.len()];
            if !ks.is_empty() {
                match continue_in_k_with(&params, &schedule, &WaveOptions::default(), solver) {
                    Ok(report) => {
                        for (slot, k) in c_k.iter_mut().zip(&ks) {
                            *slot = report.k_values.iter().position(|x| x == k).map(|i| report.c_values[i]);
                        }
                    }
                    Err(e) => notes.push(format!("c_k: {e}")),
                }
            }
            (c_inf, c_k, notes.join("; "))
        })
        .collect();

    let c_inf: Vec<Option<f64>> = rows.iter().map(|r| r.0).collect();
    let c_k_columns = ks
        .iter()
        .enumerate()
        .map(|(j, &k)| KColumn { k, values: rows.iter().map(|r| r.1[j]).collect() })
        .collect();
    let diagnostics = rows.into_iter().map(|r| r.2).collect();
    let sign_change_d = locate_sign_change(spec.alpha, spec.r, &spec.d_grid, &c_inf, solver)?;
    Ok(SpeedCurve {
        alpha: spec.alpha,
        r: spec.r,
        d_values: spec.d_grid.clone(),
        c_inf,
        c_k_columns,
        diagnostics,
        sign_change_d,
        predicted_threshold: spec.threshold(),
    })
}

/// First sign change of the `c_inf` column, refined by bisection in `d`
/// on the sign of the limit speed.
pub fn locate_sign_change(
    alpha: f64,
    r: f64,
    d_values: &[f64],
    c_inf: &[Option<f64>],
    solver: &LimitSolver,
) -> Result<Option<f64>> {
    let known: Vec<(f64, f64)> = d_values.iter().zip(c_inf).filter_map(|(&d, c)| c.map(|c| (d, c))).collect();
    if let Some(&(d, _)) = known.iter().find(|(_, c)| *c == 0.0) {
        return Ok(Some(d));
    }
    let Some(pair) = known.windows(2).find(|w| w[0].1.signum() != w[1].1.signum()) else {
        return Ok(None);
    };
    let (lo, hi) = (pair[0], pair[1]);
    let speed = |d: f64| -> f64 {
        solver
            .solve_limit_speed(&LimitParams { alpha, r, d }, DEFAULT_C_TOL)
            .unwrap_or(f64::NAN)
    };
    let bracket = RootBracket::new(lo.0, hi.0, lo.1, hi.1)?;
    let x_tol = SIGN_CHANGE_TOL * lo.0.max(1.0);
    bisect_root(speed, bracket, x_tol, 0.0).map(Some)
}

fn fmt_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_cell(x: Option<f64>) -> String {
    x.map(fmt_number).unwrap_or_default()
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn csv_error(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |e| Error::Io { path: path.to_path_buf(), source: std::io::Error::other(e) }
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    alpha: f64,
    r: f64,
    threshold: f64,
    sign_change_d: Option<f64>,
    tool_version: String,
}

/// Path of the JSON sidecar written next to `path`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// CSV with header `d,c_inf[,c_k_<k>...]` (plus `diagnostics` when any row
/// failed) and a JSON sidecar. Numbers carry 17 significant digits;
/// missing cells are empty.
pub fn emit_report(curve: &SpeedCurve, path: &Path) -> Result<()> {
    let with_notes = curve.diagnostics.iter().any(|d| !d.is_empty());
    let mut header = vec!["d".to_string(), "c_inf".to_string()];
    header.extend(curve.c_k_columns.iter().map(|col| format!("c_k_{}", col.k)));
    if with_notes {
        header.push("diagnostics".to_string());
    }
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    writer.write_record(&header).map_err(csv_error(path))?;
    for (i, &d) in curve.d_values.iter().enumerate() {
        let mut row = vec![fmt_number(d), fmt_cell(curve.c_inf[i])];
        row.extend(curve.c_k_columns.iter().map(|col| fmt_cell(col.values[i])));
        if with_notes {
            row.push(curve.diagnostics[i].clone());
        }
        writer.write_record(&row).map_err(csv_error(path))?;
    }
    let bytes = writer.into_inner().map_err(|e| csv_error(path)(e.into_error().into()))?;
    fs::write(path, bytes).map_err(io_error(path))?;

    let sidecar = Sidecar {
        alpha: curve.alpha,
        r: curve.r,
        threshold: curve.predicted_threshold,
        sign_change_d: curve.sign_change_d,
        tool_version: TOOL_VERSION.to_string(),
    };
    let json_path = sidecar_path(path);
    let mut text = serde_json::to_string_pretty(&sidecar).expect("sidecar serialises");
    text.push('\n');
    fs::write(&json_path, text).map_err(io_error(&json_path))
}

/// Inverse of [`emit_report`].
pub fn read_report(path: &Path) -> Result<SpeedCurve> {
    let json_path = sidecar_path(path);
    let text = fs::read_to_string(&json_path).map_err(io_error(&json_path))?;
    let sidecar: Sidecar = serde_json::from_str(&text)
        .map_err(|e| Error::Io { path: json_path.clone(), source: std::io::Error::other(e) })?;

    let mut reader = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let header = reader.headers().map_err(csv_error(path))?.clone();
    let with_notes = header.iter().next_back() == Some("diagnostics");
    let k_headers: Vec<&str> = header.iter().skip(2).take(header.len() - 2 - with_notes as usize).collect();
    let bad = |what: &str| Error::invalid(format!("{}: malformed {what}", path.display()));
    let ks = k_headers
        .iter()
        .map(|h| h.strip_prefix("c_k_").and_then(|k| k.parse::<f64>().ok()).ok_or_else(|| bad("header")))
        .collect::<Result<Vec<f64>>>()?;
    let parse_cell = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| bad("number"))
        }
    };

    let mut curve = SpeedCurve {
        alpha: sidecar.alpha,
        r: sidecar.r,
        d_values: Vec::new(),
        c_inf: Vec::new(),
        c_k_columns: ks.iter().map(|&k| KColumn { k, values: Vec::new() }).collect(),
        diagnostics: Vec::new(),
        sign_change_d: sidecar.sign_change_d,
        predicted_threshold: sidecar.threshold,
    };
    for record in reader.records() {
        let record = record.map_err(csv_error(path))?;
        curve.d_values.push(parse_cell(&record[0])?.ok_or_else(|| bad("d"))?);
        curve.c_inf.push(parse_cell(&record[1])?);
        for (j, col) in curve.c_k_columns.iter_mut().enumerate() {
            col.values.push(parse_cell(&record[2 + j])?);
        }
        curve.diagnostics.push(if with_notes { record[record.len() - 1].to_string() } else { String::new() });
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(d1: f64, d2: f64, r1: f64, r2: f64, a: f64, k: f64) -> RawEcologicalParams {
        RawEcologicalParams { d1, d2, r1, r2, a1: a, a2: a, k1: k, k2: k }
    }

    #[test]
    fn rescale_identity() {
        let p = rescale_parameters(&raw(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(p, Rescaled { k: 1.0, alpha: 1.0, d: 1.0, r: 1.0 });
    }

    #[test]
    fn rescale_substitution() {
        let p = rescale_parameters(&raw(1.0, 3.0, 4.0, 2.0, 1.0, 5.0)).unwrap();
        assert_eq!(p, Rescaled { k: 2.5, alpha: 2.0, d: 3.0, r: 0.5 });
    }

    #[test]
    fn rescale_rejects_mislabelled_species() {
        let err = rescale_parameters(&raw(1.0, 3.0, 2.0, 4.0, 1.0, 5.0)).unwrap_err();
        assert!(matches!(err, Error::AssumptionViolation { .. }));
        assert!(rescale_parameters(&raw(0.0, 3.0, 2.0, 4.0, 1.0, 5.0)).is_err());
    }

    #[test]
    fn spec_validation() {
        let ok = SweepSpec { alpha: 1.0, r: 1.0, d_grid: vec![0.5, 1.0], k_list: Some(vec![10.0]), output_path: None };
        assert!(ok.validate().is_ok());
        assert!(SweepSpec { d_grid: vec![1.0, 1.0], ..ok.clone() }.validate().is_err());
        assert!(SweepSpec { d_grid: vec![], ..ok.clone() }.validate().is_err());
        assert!(SweepSpec { k_list: Some(vec![1.0]), ..ok.clone() }.validate().is_err());
    }

    #[test]
    fn schedule_covers_targets_in_decades() {
        assert_eq!(continuation_schedule(&[50.0, 10000.0]), vec![10.0, 50.0, 500.0, 5000.0, 10000.0]);
        assert_eq!(continuation_schedule(&[5.0]), vec![5.0]);
        assert_eq!(continuation_schedule(&[]), vec![10.0]);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.1, 10.0, 5).unwrap();
        assert_eq!(g[0], 0.1);
        assert_eq!(g[4], 10.0);
        assert!((g[2] - 1.0).abs() < 1e-15);
    }
}
