//! N-refinement and h-refinement experiment drivers with CSV output.

use crate::analytic::Rect;
use crate::decomp::LocalDomain;
use crate::geometry::{
    area_element, builtin_sphere_face, builtin_spheroid, load_patch, GeometryError, Point2, SurfacePatch,
};
use crate::integrator::{integrate, Aux, FitSpec, IntegralTask, ModeChoice};
use crate::kernel::{ExactKernel, KernelFamily, RegMode};
use crate::quadrature::{duffy_oracle, OracleDomain, OracleOptions, QuadratureError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const NREFINE_HEADER: &str = "kernel,mode,n,N,s1,s2,value,oracle,abs_error";
pub const HREFINE_HEADER: &str = "kernel,mode,n,h,s1,s2,support_id,value,oracle,abs_error";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Experiment settings; every field has a default so JSON files may be partial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `spheroid`, `sphere-face`, `flat` or a path to a patch JSON file.
    pub patch: String,
    pub kernels: Vec<KernelFamily>,
    pub sources: Vec<Point2>,
    pub n_values: Vec<usize>,
    pub modes: Vec<RegMode>,
    #[serde(rename = "N_schedule")]
    pub n_schedule: Vec<usize>,
    pub h_schedule: Vec<f64>,
    /// Division correction for `G`.
    pub eta_g: Option<f64>,
    /// Division correction for `H̄`; negative because the builtin spheroid's
    /// normal points outward and `H̄ ≤ 0` near the source.
    pub eta_hbar: Option<f64>,
    pub oracle_tol: f64,
    /// Gauss nodes per direction in h-refinement.
    pub nodes: usize,
    pub fit: FitSpec,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let grid = [0.6, 0.7, 0.8, 0.9];
        Self {
            patch: "spheroid".into(),
            kernels: vec![KernelFamily::G, KernelFamily::Hbar],
            sources: grid.iter().flat_map(|&a| grid.iter().map(move |&b| [a, b])).collect(),
            n_values: vec![0, 1, 2, 3],
            modes: vec![RegMode::Subtract],
            n_schedule: vec![10, 20, 40, 80, 160],
            h_schedule: vec![0.1, 0.05, 0.025, 0.0125],
            eta_g: None,
            eta_hbar: Some(-0.1),
            oracle_tol: 1e-12,
            nodes: 10,
            fit: FitSpec::default(),
            seed: 0,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn eta_for(&self, family: KernelFamily) -> Option<f64> {
        match family {
            KernelFamily::Hbar => self.eta_hbar,
            _ => self.eta_g,
        }
    }

    fn check_common(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.into()));
        if self.kernels.is_empty() || self.sources.is_empty() || self.n_values.is_empty() || self.modes.is_empty() {
            return bad("kernels, sources, n_values and modes must be non-empty");
        }
        if self.kernels.contains(&KernelFamily::Generic) {
            return bad("generic kernels cannot run experiments");
        }
        if !(self.oracle_tol > 0.0) {
            return bad("oracle_tol must be positive");
        }
        Ok(())
    }

    pub fn validate_nrefine(&self) -> Result<(), ExperimentError> {
        self.check_common()?;
        if self.n_schedule.is_empty() || self.n_schedule[0] == 0 || self.n_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ExperimentError::Config("N schedule must be non-empty, positive and increasing".into()));
        }
        Ok(())
    }

    pub fn validate_hrefine(&self, patch: &SurfacePatch) -> Result<(), ExperimentError> {
        self.check_common()?;
        let hs = &self.h_schedule;
        if hs.is_empty() || !(hs[0] > 0.0) || hs.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(ExperimentError::Config("h schedule must be non-empty, positive and decreasing".into()));
        }
        let [[u0, u1], [v0, v1]] = patch.domain();
        for s in &self.sources {
            for r in hrefine_supports(*s, hs[0]) {
                if r.x0 < u0 || r.x1 > u1 || r.y0 < v0 || r.y1 > v1 {
                    return Err(ExperimentError::Config(format!(
                        "support [{}, {}]×[{}, {}] for source ({}, {}) leaves the patch domain",
                        r.x0, r.x1, r.y0, r.y1, s[0], s[1]
                    )));
                }
            }
        }
        if self.nodes == 0 {
            return Err(ExperimentError::Config("nodes must be positive".into()));
        }
        Ok(())
    }

    pub fn load_patch(&self) -> Result<SurfacePatch, ExperimentError> {
        resolve_patch(&self.patch)
    }
}

pub fn resolve_patch(name: &str) -> Result<SurfacePatch, ExperimentError> {
    Ok(match name {
        "spheroid" => builtin_spheroid(),
        "sphere-face" => builtin_sphere_face(),
        "flat" => SurfacePatch::flat_unit(),
        path => load_patch(Path::new(path))?,
    })
}

/// The five `h×h` supports around `s`, centered and shifted by `h/3`.
pub fn hrefine_supports(s: Point2, h: f64) -> [Rect; 5] {
    let (a, b) = (s[0], s[1]);
    let (t1, t2) = (h / 3.0, 2.0 * h / 3.0);
    [
        Rect::new(a - h / 2.0, a + h / 2.0, b - h / 2.0, b + h / 2.0),
        Rect::new(a - t2, a + t1, b - t2, b + t1),
        Rect::new(a - t2, a + t1, b - t1, b + t2),
        Rect::new(a - t1, a + t2, b - t2, b + t1),
        Rect::new(a - t1, a + t2, b - t1, b + t2),
    ]
}

/// Mode label of a row; `none` for the unregularized `n = 0` baseline.
fn mode_label(n: usize, mode: RegMode) -> String {
    if n == 0 {
        "none".into()
    } else {
        mode.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NRow {
    pub kernel: KernelFamily,
    pub mode: String,
    pub n: usize,
    pub nodes: usize,
    pub s: Point2,
    pub value: f64,
    pub oracle: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HRow {
    pub kernel: KernelFamily,
    pub mode: String,
    pub n: usize,
    pub h: f64,
    pub s: Point2,
    pub support_id: usize,
    pub value: f64,
    pub oracle: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput<R> {
    pub rows: Vec<R>,
    /// Oracle or integration failures; the affected rows carry `NaN`.
    pub warnings: Vec<String>,
}

impl<R> Default for RunOutput<R> {
    fn default() -> Self {
        Self { rows: Vec::new(), warnings: Vec::new() }
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

impl NRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.kernel,
            self.mode,
            self.n,
            self.nodes,
            fmt(self.s[0]),
            fmt(self.s[1]),
            fmt(self.value),
            fmt(self.oracle),
            fmt(self.abs_error)
        )
    }
}

impl HRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.kernel,
            self.mode,
            self.n,
            fmt(self.h),
            fmt(self.s[0]),
            fmt(self.s[1]),
            self.support_id,
            fmt(self.value),
            fmt(self.oracle),
            fmt(self.abs_error)
        )
    }
}

fn oracle_options(tol: f64) -> OracleOptions {
    OracleOptions { rel_tol: tol, abs_tol: 1e-15, ..OracleOptions::default() }
}

/// Reference value; a non-converged result is kept with a warning.
fn oracle_value<F: Fn(Point2) -> f64>(
    f: F,
    s: Point2,
    dom: &OracleDomain,
    tol: f64,
    what: &str,
    warnings: &mut Vec<String>,
) -> f64 {
    match duffy_oracle(f, s, dom, &oracle_options(tol)) {
        Ok(o) => o.value,
        Err(QuadratureError::NotConverged(o)) => {
            warnings.push(format!("{what}: oracle stopped at error estimate {:.3e}", o.error_estimate));
            o.value
        }
        Err(e) => {
            warnings.push(format!("{what}: oracle failed: {e}"));
            f64::NAN
        }
    }
}

fn cmp_f(a: f64, b: f64) -> Ordering {
    a.total_cmp(&b)
}

fn mode_order(m: &str) -> u8 {
    match m {
        "none" => 0,
        "subtract" => 1,
        _ => 2,
    }
}

/// `(1/4π)∫_{[0,1]²} K(s,t) dt` with `N×N` Gauss nodes for every configured `n`, mode and `N`.
pub fn run_nrefine(cfg: &ExperimentConfig) -> Result<RunOutput<NRow>, ExperimentError> {
    cfg.validate_nrefine()?;
    let patch = cfg.load_patch()?;
    let [[u0, u1], [v0, v1]] = patch.domain();
    let rect = Rect::new(u0, u1, v0, v1);
    let jobs: Vec<(KernelFamily, Point2)> =
        cfg.kernels.iter().flat_map(|&k| cfg.sources.iter().map(move |&s| (k, s))).collect();
    let parts: Vec<RunOutput<NRow>> = jobs
        .par_iter()
        .map(|&(family, s)| {
            let mut out = RunOutput::default();
            let what = format!("{family} s=({}, {})", s[0], s[1]);
            let oracle = match ExactKernel::new(&patch, family, s) {
                Ok(ex) => oracle_value(
                    |t| ex.at_t(t).unwrap_or(f64::NAN),
                    s,
                    &OracleDomain::Rect(rect),
                    cfg.oracle_tol,
                    &what,
                    &mut out.warnings,
                ),
                Err(e) => {
                    out.warnings.push(format!("{what}: {e}"));
                    f64::NAN
                }
            };
            for &n in &cfg.n_values {
                let modes: &[RegMode] = if n == 0 { &cfg.modes[..1] } else { &cfg.modes };
                for &mode in modes {
                    for &nodes in &cfg.n_schedule {
                        let task = IntegralTask::new(&patch, family, s, LocalDomain::Rect(rect))
                            .with_n(n)
                            .with_mode(choice(mode))
                            .with_nodes(nodes)
                            .with_fit(cfg.fit)
                            .with_eta(if mode == RegMode::Divide { cfg.eta_for(family) } else { None });
                        let value = match integrate(&task) {
                            Ok(r) => r.value,
                            Err(e) => {
                                out.warnings.push(format!("{what} n={n} {mode} N={nodes}: {e}"));
                                f64::NAN
                            }
                        };
                        out.rows.push(NRow {
                            kernel: family,
                            mode: mode_label(n, mode),
                            n,
                            nodes,
                            s,
                            value,
                            oracle,
                            abs_error: (value - oracle).abs(),
                        });
                    }
                }
            }
            out
        })
        .collect();
    let mut all = merge(parts);
    all.rows.sort_by(|a, b| {
        (a.kernel as u8, mode_order(&a.mode), a.n, a.nodes)
            .cmp(&(b.kernel as u8, mode_order(&b.mode), b.n, b.nodes))
            .then(cmp_f(a.s[0], b.s[0]))
            .then(cmp_f(a.s[1], b.s[1]))
    });
    Ok(all)
}

fn choice(mode: RegMode) -> ModeChoice {
    match mode {
        RegMode::Subtract => ModeChoice::Subtract,
        RegMode::Divide => ModeChoice::Divide,
    }
}

fn merge<R>(parts: Vec<RunOutput<R>>) -> RunOutput<R> {
    let mut all = RunOutput::default();
    for p in parts {
        all.rows.extend(p.rows);
        all.warnings.extend(p.warnings);
    }
    all
}

/// `(1/4π)∫ K(s,t) B(t) v(t) dt` over the five supports per source and `h`,
/// with `v = J` for `G` and `v ≡ 1` for `H̄`.
pub fn run_hrefine(cfg: &ExperimentConfig) -> Result<RunOutput<HRow>, ExperimentError> {
    let patch = cfg.load_patch()?;
    cfg.validate_hrefine(&patch)?;
    let mut jobs = Vec::new();
    for &family in &cfg.kernels {
        for &s in &cfg.sources {
            for &h in &cfg.h_schedule {
                for (k, r) in hrefine_supports(s, h).into_iter().enumerate() {
                    jobs.push((family, s, h, k + 1, r));
                }
            }
        }
    }
    let parts: Vec<RunOutput<HRow>> = jobs
        .par_iter()
        .map(|&(family, s, h, id, rect)| {
            let mut out = RunOutput::default();
            let what = format!("{family} s=({}, {}) h={h} D{id}", s[0], s[1]);
            let aux = if family == KernelFamily::G { Aux::AreaElement } else { Aux::One };
            let oracle = match ExactKernel::new(&patch, family, s) {
                Ok(ex) => {
                    let f = |t: Point2| {
                        let k = ex.at_t(t).unwrap_or(f64::NAN);
                        match family {
                            KernelFamily::G => k * area_element(&patch, t).map(|a| a.0).unwrap_or(f64::NAN),
                            _ => k,
                        }
                    };
                    oracle_value(f, s, &OracleDomain::Rect(rect), cfg.oracle_tol, &what, &mut out.warnings)
                }
                Err(e) => {
                    out.warnings.push(format!("{what}: {e}"));
                    f64::NAN
                }
            };
            for &n in &cfg.n_values {
                let modes: &[RegMode] = if n == 0 { &cfg.modes[..1] } else { &cfg.modes };
                for &mode in modes {
                    let task = IntegralTask::new(&patch, family, s, LocalDomain::Rect(rect))
                        .with_n(n)
                        .with_mode(choice(mode))
                        .with_nodes(cfg.nodes)
                        .with_fit(cfg.fit)
                        .with_aux(aux.clone())
                        .with_eta(if mode == RegMode::Divide { cfg.eta_for(family) } else { None });
                    let value = match integrate(&task) {
                        Ok(r) => r.value,
                        Err(e) => {
                            out.warnings.push(format!("{what} n={n} {mode}: {e}"));
                            f64::NAN
                        }
                    };
                    out.rows.push(HRow {
                        kernel: family,
                        mode: mode_label(n, mode),
                        n,
                        h,
                        s,
                        support_id: id,
                        value,
                        oracle,
                        abs_error: (value - oracle).abs(),
                    });
                }
            }
            out
        })
        .collect();
    let mut all = merge(parts);
    all.rows.sort_by(|a, b| {
        (a.kernel as u8, mode_order(&a.mode), a.n)
            .cmp(&(b.kernel as u8, mode_order(&b.mode), b.n))
            .then(cmp_f(b.h, a.h))
            .then(cmp_f(a.s[0], b.s[0]))
            .then(cmp_f(a.s[1], b.s[1]))
            .then(a.support_id.cmp(&b.support_id))
    });
    Ok(all)
}

pub fn write_nrefine_csv<W: Write>(mut w: W, rows: &[NRow]) -> std::io::Result<()> {
    writeln!(w, "{NREFINE_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv())?;
    }
    Ok(())
}

pub fn write_hrefine_csv<W: Write>(mut w: W, rows: &[HRow]) -> std::io::Result<()> {
    writeln!(w, "{HREFINE_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv())?;
    }
    Ok(())
}

/// Max `abs_error` per `(kernel, mode, n)` and refinement parameter, in schedule order.
pub type ErrorTable<K> = BTreeMap<(String, String, usize), Vec<(K, f64)>>;

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

pub fn nrefine_max_errors(rows: &[NRow]) -> ErrorTable<usize> {
    let mut m: BTreeMap<(String, String, usize), BTreeMap<usize, f64>> = BTreeMap::new();
    for r in rows {
        let e = m.entry((r.kernel.to_string(), r.mode.clone(), r.n)).or_default().entry(r.nodes).or_insert(0.0);
        *e = nan_max(*e, r.abs_error);
    }
    m.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect()
}

pub fn hrefine_max_errors(rows: &[HRow]) -> ErrorTable<f64> {
    let mut m: BTreeMap<(String, String, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        let v = m.entry((r.kernel.to_string(), r.mode.clone(), r.n)).or_default();
        match v.iter_mut().find(|(h, _)| *h == r.h) {
            Some(slot) => slot.1 = nan_max(slot.1, r.abs_error),
            None => v.push((r.h, r.abs_error)),
        }
    }
    for v in m.values_mut() {
        v.sort_by(|a, b| b.0.total_cmp(&a.0));
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supports_match_definition() {
        let d = hrefine_supports([0.6, 0.6], 0.1);
        assert!((d[0].x0 - 0.55).abs() < 1e-15 && (d[0].x1 - 0.65).abs() < 1e-15);
        assert!((d[0].y0 - 0.55).abs() < 1e-15 && (d[0].y1 - 0.65).abs() < 1e-15);
        for r in &d {
            assert!(((r.x1 - r.x0) - 0.1).abs() < 1e-15 && ((r.y1 - r.y0) - 0.1).abs() < 1e-15);
            assert!(r.x0 < 0.6 && r.x1 > 0.6 && r.y0 < 0.6 && r.y1 > 0.6);
        }
    }

    #[test]
    fn config_json_partial() {
        let c = ExperimentConfig::from_json(r#"{"kernels":["g"],"N_schedule":[10,20]}"#).unwrap();
        assert_eq!(c.kernels, vec![KernelFamily::G]);
        assert_eq!(c.n_schedule, vec![10, 20]);
        assert_eq!(c.sources.len(), 16);
        assert!(ExperimentConfig::from_json(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn schedules_validated() {
        let mut c = ExperimentConfig { n_schedule: vec![20, 10], ..Default::default() };
        assert!(c.validate_nrefine().is_err());
        c.n_schedule = vec![10];
        assert!(c.validate_nrefine().is_ok());
        let p = builtin_spheroid();
        let c = ExperimentConfig { h_schedule: vec![0.3], ..Default::default() };
        assert!(c.validate_hrefine(&p).is_err());
    }

    #[test]
    fn flat_nrefine_smoke() {
        let cfg = ExperimentConfig {
            patch: "flat".into(),
            kernels: vec![KernelFamily::G],
            sources: vec![[0.6, 0.7]],
            n_values: vec![1],
            n_schedule: vec![10, 20],
            ..Default::default()
        };
        let out = run_nrefine(&cfg).unwrap();
        assert_eq!(out.rows.len(), 2);
        for r in &out.rows {
            assert!(r.abs_error <= 1e-12, "{r:?}");
        }
        let mut buf = Vec::new();
        write_nrefine_csv(&mut buf, &out.rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), NREFINE_HEADER);
    }
}
