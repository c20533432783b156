//! Regularized evaluation of `∫ K(s, t) B(t) v(t) dt` over a parameter-space support.
//!
//! Subtraction splits the integral into a quadrature of `ρ·B·v` and an analytic
//! integral of `K_{s,n}` times a polynomial fit of `B·v`. Division fits
//! `ρ·B·v` itself and integrates `(K_{s,n} + (η/4π)‖z‖²)·P` analytically. Every
//! analytic piece is evaluated in the source-local frame `z = s − t`.

use crate::analytic::{AnalyticError, Rect};
use crate::decomp::{integrate_decomposed, DecompError, LocalDomain};
use crate::geometry::{area_element, GeometryError, Point2, SurfacePatch};
use crate::kernel::{
    build_context, expand, regularized, ExactKernel, KernelError, KernelFamily, RegMode, FOUR_PI,
};
use crate::quadrature::{
    poly_integral_rect, poly_integral_tri, tensor_nodes, triangle_nodes, Neumaier, QuadratureError,
};
use crate::series::Poly2;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Default near-singular threshold: `dist(s, support) ≤ θ·diam(support)`.
pub const DEFAULT_THETA: f64 = 0.5;

/// Analytic pieces above this condition estimate add a warning to the report.
pub const CONDITION_WARN: f64 = crate::analytic::CONDITION_WARN;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("quadrature: {0}")]
    Quadrature(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("invalid task: {0}")]
    Invalid(String),
}

impl From<QuadratureError> for IntegratorError {
    fn from(e: QuadratureError) -> Self {
        IntegratorError::Quadrature(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, IntegratorError>;

/// Support of a basis function in parameter space.
pub type Support = LocalDomain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Regular,
    NearlySingular,
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    #[default]
    Auto,
    Subtract,
    Divide,
}

impl std::str::FromStr for ModeChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "subtract" => Ok(Self::Subtract),
            "divide" => Ok(Self::Divide),
            other => Err(format!("unknown mode '{other}' (expected subtract, divide or auto)")),
        }
    }
}

impl fmt::Display for ModeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeChoice::Auto => "auto",
            ModeChoice::Subtract => "subtract",
            ModeChoice::Divide => "divide",
        })
    }
}

/// What was actually run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeUsed {
    /// Plain tensor quadrature of the full integrand.
    Quadrature,
    Subtract,
    Divide,
}

impl fmt::Display for ModeUsed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeUsed::Quadrature => "quadrature",
            ModeUsed::Subtract => "subtract",
            ModeUsed::Divide => "divide",
        })
    }
}

/// The factor `v(t)`.
#[derive(Clone)]
pub enum Aux {
    One,
    /// `J(t) = ‖∂₁F × ∂₂F‖`.
    AreaElement,
    Custom(Arc<dyn Fn(Point2) -> f64 + Send + Sync>),
}

impl fmt::Debug for Aux {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aux::One => f.write_str("One"),
            Aux::AreaElement => f.write_str("AreaElement"),
            Aux::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Aux {
    fn eval(&self, patch: &SurfacePatch, t: Point2) -> Result<f64> {
        Ok(match self {
            Aux::One => 1.0,
            Aux::AreaElement => area_element(patch, t)?.0,
            Aux::Custom(f) => f(t),
        })
    }
}

/// Least-squares fit settings: tensor bidegree and Gauss sample sites per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitSpec {
    pub bidegree: (u32, u32),
    pub sites: usize,
}

impl Default for FitSpec {
    fn default() -> Self {
        Self { bidegree: (4, 4), sites: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct IntegralTask<'a> {
    pub patch: &'a SurfacePatch,
    pub family: KernelFamily,
    pub source: Point2,
    pub support: Support,
    /// `B(t)` in parameter coordinates.
    pub basis: Poly2,
    pub aux: Aux,
    pub mode: ModeChoice,
    /// Series terms; `0` disables regularization.
    pub n: usize,
    pub fit: FitSpec,
    pub eta: Option<f64>,
    /// Gauss nodes per direction for the quadrature part.
    pub nodes: usize,
    pub theta: f64,
}

impl<'a> IntegralTask<'a> {
    pub fn new(patch: &'a SurfacePatch, family: KernelFamily, source: Point2, support: Support) -> Self {
        Self {
            patch,
            family,
            source,
            support,
            basis: Poly2::constant(1.0),
            aux: Aux::One,
            mode: ModeChoice::Auto,
            n: 1,
            fit: FitSpec::default(),
            eta: None,
            nodes: 10,
            theta: DEFAULT_THETA,
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_mode(mut self, mode: ModeChoice) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_eta(mut self, eta: Option<f64>) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn with_aux(mut self, aux: Aux) -> Self {
        self.aux = aux;
        self
    }

    pub fn with_basis(mut self, basis: Poly2) -> Self {
        self.basis = basis;
        self
    }

    pub fn with_fit(mut self, fit: FitSpec) -> Self {
        self.fit = fit;
        self
    }

    fn integrand_factor(&self, t: Point2) -> Result<f64> {
        Ok(self.basis.eval(t[0], t[1]) * self.aux.eval(self.patch, t)?)
    }
}

/// Tensor-monomial fit in `z = s − t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit2D {
    pub bidegree: (u32, u32),
    pub poly: Poly2,
    /// Max abs deviation at the sample sites.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralReport {
    pub value: f64,
    pub mode: ModeUsed,
    pub n: usize,
    pub classification: Classification,
    pub fit_residual: Option<f64>,
    pub analytic_part: f64,
    pub quadrature_part: f64,
    pub condition: f64,
    pub fundamental_integrals: usize,
    pub edge_quadrature: usize,
    pub warnings: Vec<String>,
}

fn support_vertices(sup: &Support) -> Vec<Point2> {
    match sup {
        LocalDomain::Rect(r) => vec![[r.x0, r.y0], [r.x1, r.y0], [r.x1, r.y1], [r.x0, r.y1]],
        LocalDomain::Tri(v) => v.to_vec(),
    }
}

fn dist_to_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let u = if l2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + u * d[0] - p[0], a[1] + u * d[1] - p[1]];
    q[0].hypot(q[1])
}

fn contains(sup: &Support, p: Point2) -> bool {
    match sup {
        LocalDomain::Rect(r) => {
            let (x0, x1) = (r.x0.min(r.x1), r.x0.max(r.x1));
            let (y0, y1) = (r.y0.min(r.y1), r.y0.max(r.y1));
            p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1
        }
        LocalDomain::Tri([a, b, c]) => {
            let s = |u: Point2, v: Point2| (v[0] - u[0]) * (p[1] - u[1]) - (v[1] - u[1]) * (p[0] - u[0]);
            let (d1, d2, d3) = (s(*a, *b), s(*b, *c), s(*c, *a));
            (d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0) || (d1 <= 0.0 && d2 <= 0.0 && d3 <= 0.0)
        }
    }
}

pub fn support_diameter(sup: &Support) -> f64 {
    let v = support_vertices(sup);
    let mut d = 0.0f64;
    for a in &v {
        for b in &v {
            d = d.max((a[0] - b[0]).hypot(a[1] - b[1]));
        }
    }
    d
}

pub fn support_distance(sup: &Support, p: Point2) -> f64 {
    if contains(sup, p) {
        return 0.0;
    }
    let v = support_vertices(sup);
    (0..v.len()).map(|i| dist_to_segment(p, v[i], v[(i + 1) % v.len()])).fold(f64::INFINITY, f64::min)
}

/// Singular iff `s` lies in the closed support; nearly singular within `θ·diam`.
pub fn classify_point(sup: &Support, s: Point2, theta: f64) -> Classification {
    let d = support_distance(sup, s);
    if d == 0.0 {
        Classification::Singular
    } else if d <= theta * support_diameter(sup) {
        Classification::NearlySingular
    } else {
        Classification::Regular
    }
}

pub fn classify(task: &IntegralTask) -> Classification {
    classify_point(&task.support, task.source, task.theta)
}

/// Quadrature nodes `(t, weight)` on a support: `n×n` Gauss on rectangles, collapsed Gauss on triangles.
pub fn support_nodes(sup: &Support, n: usize) -> Result<Vec<(Point2, f64)>> {
    let raw = match sup {
        LocalDomain::Rect(r) => {
            let r = Rect::new(r.x0.min(r.x1), r.x0.max(r.x1), r.y0.min(r.y1), r.y0.max(r.y1));
            tensor_nodes(&r, n)?
        }
        LocalDomain::Tri(v) => triangle_nodes(v, n)?,
    };
    Ok(raw.into_iter().map(|(x, y, w)| ([x, y], w)).collect())
}

/// Least-squares fit of `f` sampled at `sites` (parameter points) by a tensor
/// polynomial in `z = s − t`.
pub fn fit_regular_part<F>(f: F, sites: &[Point2], s: Point2, bidegree: (u32, u32)) -> Result<PolyFit2D>
where
    F: Fn(Point2) -> Result<f64>,
{
    let (d1, d2) = bidegree;
    let k = ((d1 + 1) * (d2 + 1)) as usize;
    if sites.len() < k {
        return Err(IntegratorError::Fit(format!("{} sites for {k} unknowns", sites.len())));
    }
    let zs: Vec<Point2> = sites.iter().map(|t| [s[0] - t[0], s[1] - t[1]]).collect();
    // scale so the design matrix stays well conditioned
    let lx = zs.iter().map(|z| z[0].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let ly = zs.iter().map(|z| z[1].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut a = DMatrix::<f64>::zeros(sites.len(), k);
    let mut rhs = DVector::<f64>::zeros(sites.len());
    for (row, (t, z)) in sites.iter().zip(&zs).enumerate() {
        rhs[row] = f(*t)?;
        let (u, v) = (z[0] / lx, z[1] / ly);
        let mut col = 0;
        for i in 0..=d1 {
            for j in 0..=d2 {
                a[(row, col)] = u.powi(i as i32) * v.powi(j as i32);
                col += 1;
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(IntegratorError::Fit(format!("rank deficient design (σ_min/σ_max = {:e})", smin / smax)));
    }
    let coef = svd.solve(&rhs, 0.0).map_err(|e| IntegratorError::Fit(e.to_string()))?;
    let fitted = &a * &coef;
    let residual = (0..sites.len()).map(|r| (fitted[r] - rhs[r]).abs()).fold(0.0, f64::max);
    let mut poly = Poly2::zero();
    let mut col = 0;
    for i in 0..=d1 {
        for j in 0..=d2 {
            poly.add_term(i, j, coef[col] / (lx.powi(i as i32) * ly.powi(j as i32)));
            col += 1;
        }
    }
    Ok(PolyFit2D { bidegree, poly, residual })
}

fn fit_sites(task: &IntegralTask) -> Result<Vec<Point2>> {
    Ok(support_nodes(&task.support, task.fit.sites)?.into_iter().map(|(t, _)| t).collect())
}

fn resolve_mode(task: &IntegralTask) -> RegMode {
    match task.mode {
        ModeChoice::Subtract => RegMode::Subtract,
        ModeChoice::Divide => RegMode::Divide,
        ModeChoice::Auto => match task.family {
            KernelFamily::G if task.n >= 2 => RegMode::Divide,
            _ => RegMode::Subtract,
        },
    }
}

/// `∫∫ P` over a source-local domain.
fn poly_integral_local(poly: &Poly2, dom: &LocalDomain) -> f64 {
    match dom {
        LocalDomain::Rect(r) => {
            let r = Rect::new(r.x0.min(r.x1), r.x0.max(r.x1), r.y0.min(r.y1), r.y0.max(r.y1));
            poly_integral_rect(poly, &r)
        }
        LocalDomain::Tri(v) => poly_integral_tri(poly, v),
    }
}

fn validate(task: &IntegralTask) -> Result<()> {
    if task.nodes == 0 {
        return Err(IntegratorError::Invalid("zero quadrature nodes".into()));
    }
    if !(task.support.area() > 0.0) {
        return Err(IntegratorError::Invalid("support has zero area".into()));
    }
    if task.family == KernelFamily::Generic {
        return Err(IntegratorError::Invalid("generic kernels need an explicit evaluator".into()));
    }
    if !(task.theta >= 0.0) {
        return Err(IntegratorError::Invalid(format!("theta = {}", task.theta)));
    }
    Ok(())
}

/// Evaluates one task.
pub fn integrate(task: &IntegralTask) -> Result<IntegralReport> {
    validate(task)?;
    let class = classify(task);
    let exact = ExactKernel::new(task.patch, task.family, task.source)?;
    let s = task.source;
    let nodes = support_nodes(&task.support, task.nodes)?;

    if class == Classification::Regular || task.n == 0 {
        let mut acc = Neumaier::default();
        for (t, w) in &nodes {
            acc.add(w * exact.at_t(*t)? * task.integrand_factor(*t)?);
        }
        let v = acc.sum();
        return Ok(IntegralReport {
            value: v,
            mode: ModeUsed::Quadrature,
            n: task.n,
            classification: class,
            fit_residual: None,
            analytic_part: 0.0,
            quadrature_part: v,
            condition: 1.0,
            fundamental_integrals: 0,
            edge_quadrature: 0,
            warnings: Vec::new(),
        });
    }

    let mode = resolve_mode(task);
    let ctx = build_context(task.patch, s, task.n as u32 + 2)?;
    let trunc = expand(&ctx, task.family, task.n)?.with_eta(task.eta);
    let local = LocalDomain::from_support(&task.support, s);
    let form = *trunc.form();
    let terms = trunc.poly_terms();
    let sites = fit_sites(task)?;
    let at_z = |z: Point2| exact.at_z(z);
    let rho = |t: Point2| regularized(at_z, &trunc, mode, [s[0] - t[0], s[1] - t[1]]);

    let (quad, analytic, residual, kint) = match mode {
        RegMode::Subtract => {
            let mut acc = Neumaier::default();
            for (t, w) in &nodes {
                acc.add(w * rho(*t)? * task.integrand_factor(*t)?);
            }
            let fit = fit_regular_part(|t| task.integrand_factor(t), &sites, s, task.fit.bidegree)?;
            let k = integrate_decomposed(&terms, &fit.poly, &form, &local)?;
            (acc.sum(), k.value, fit.residual, k)
        }
        RegMode::Divide => {
            crate::kernel::check_division(&trunc)?;
            let fit = fit_regular_part(|t| Ok(rho(t)? * task.integrand_factor(t)?), &sites, s, task.fit.bidegree)?;
            let k = integrate_decomposed(&terms, &fit.poly, &form, &local)?;
            let mut v = k.value;
            if let Some(eta) = task.eta {
                let r2 = Poly2::from_terms([((2, 0), 1.0), ((0, 2), 1.0)]);
                v += eta / FOUR_PI * poly_integral_local(&r2.mul(&fit.poly), &local);
            }
            (0.0, v, fit.residual, k)
        }
    };
    let mut warnings = Vec::new();
    if kint.condition > CONDITION_WARN {
        warnings.push(format!("analytic condition estimate {:.3e}", kint.condition));
    }
    Ok(IntegralReport {
        value: quad + analytic,
        mode: match mode {
            RegMode::Subtract => ModeUsed::Subtract,
            RegMode::Divide => ModeUsed::Divide,
        },
        n: task.n,
        classification: class,
        fit_residual: Some(residual),
        analytic_part: analytic,
        quadrature_part: quad,
        condition: kint.condition,
        fundamental_integrals: kint.fundamental_integrals,
        edge_quadrature: kint.edge_quadrature,
        warnings,
    })
}

/// Independent tasks evaluated in parallel; results keep the input order.
pub fn integrate_batch(tasks: &[IntegralTask]) -> Vec<Result<IntegralReport>> {
    tasks.par_iter().map(integrate).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::builtin_spheroid;

    fn unit() -> Support {
        LocalDomain::Rect(Rect::unit())
    }

    #[test]
    fn classification() {
        let sq = LocalDomain::Rect(Rect::new(0.0, 1.0, 0.0, 1.0));
        assert_eq!(classify_point(&sq, [0.5, 0.5], 0.5), Classification::Singular);
        assert_eq!(classify_point(&sq, [1.0, 0.3], 0.5), Classification::Singular);
        assert_eq!(classify_point(&sq, [1.0 + 0.1 * 2f64.sqrt(), 0.5], 0.5), Classification::NearlySingular);
        assert_eq!(classify_point(&sq, [1.0 + 10.0 * 2f64.sqrt(), 0.5], 0.5), Classification::Regular);
        let tri = LocalDomain::Tri([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(classify_point(&tri, [0.2, 0.2], 0.5), Classification::Singular);
        assert_eq!(classify_point(&tri, [0.8, 0.8], 0.5), Classification::NearlySingular);
    }

    #[test]
    fn fit_reproduces_polynomials() {
        let sites = support_nodes(&unit(), 10).unwrap().into_iter().map(|(t, _)| t).collect::<Vec<_>>();
        let f = |t: Point2| Ok(1.0 + t[0] - 2.0 * t[1] * t[1] + 0.5 * t[0] * t[0] * t[1] * t[1]);
        let s = [0.6, 0.7];
        let fit = fit_regular_part(f, &sites, s, (4, 4)).unwrap();
        assert!(fit.residual < 1e-12);
        for t in [[0.1, 0.9], [0.5, 0.5], [0.93, 0.02]] {
            let z = [s[0] - t[0], s[1] - t[1]];
            assert!((fit.poly.eval(z[0], z[1]) - f(t).unwrap()).abs() < 1e-12);
        }
        let few = &sites[..10];
        assert!(matches!(fit_regular_part(f, few, s, (4, 4)), Err(IntegratorError::Fit(_))));
    }

    #[test]
    fn flat_area_element_fit_is_one() {
        let p = SurfacePatch::flat_unit();
        let sites = support_nodes(&unit(), 10).unwrap().into_iter().map(|(t, _)| t).collect::<Vec<_>>();
        let fit = fit_regular_part(|t| Ok(area_element(&p, t)?.0), &sites, [0.5, 0.5], (4, 4)).unwrap();
        assert!((fit.poly.eval(0.0, 0.0) - 1.0).abs() < 1e-13);
        assert!(fit.residual < 1e-13);
    }

    #[test]
    fn hbar_divide_without_eta_is_guarded() {
        let p = builtin_spheroid();
        let task = IntegralTask::new(&p, KernelFamily::Hbar, [0.6, 0.6], unit()).with_mode(ModeChoice::Divide);
        assert!(matches!(integrate(&task), Err(IntegratorError::Kernel(KernelError::DivisionGuard(_)))));
    }

    #[test]
    fn regular_is_plain_quadrature() {
        let p = SurfacePatch::flat_unit();
        let sup = LocalDomain::Rect(Rect::new(0.0, 0.1, 0.0, 0.1));
        let task = IntegralTask::new(&p, KernelFamily::G, [0.9, 0.9], sup);
        let r = integrate(&task).unwrap();
        assert_eq!(r.classification, Classification::Regular);
        assert_eq!(r.mode, ModeUsed::Quadrature);
        assert!(r.value > 0.0);
    }
}
