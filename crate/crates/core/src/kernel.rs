//! Truncated series of the single-layer kernel `G` and the weighted double-layer
//! kernel `H̄ = H·J`, and the regularized kernels built from them.
//!
//! With `z = s − t` the patch expands as `F(s − z) = Σ_α a_α z^α`,
//! `a_α = (−1)^{|α|} D^α F(s) / α!`. Then
//!
//! ```text
//! ‖F(s) − F(t)‖²                    = Σ c_α z^α   (|α| ≥ 2)
//! (F(s) − F(t))·(D1F(t) × D2F(t))   = Σ d_α z^α   (|α| ≥ 2)
//! ```
//!
//! and both kernels become fractional powers of graded polynomial series.

use crate::geometry::{
    chord, cross, dot, partial_derivatives, DerivativeBundle, GeometryError, Point2,
    SurfacePatch, Vec3,
};
use crate::numeric::factorial;
use crate::series::{
    binomial_sqrt_series, eval_rterm_sum, graded_poly_product, zeta, HomoPoly, MultiIndex, Poly2,
    QuadraticForm, RTermSum, SeriesError, Zeta,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub const FOUR_PI: f64 = 4.0 * PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("context of order {order} cannot support n = {n} terms (needs order ≥ n + 2)")]
    InsufficientOrder { order: u32, n: usize },
    #[error("context order must be at least 2, got {0}")]
    OrderTooLow(u32),
    #[error("first fundamental form at ({0}, {1}) is not positive definite")]
    DegenerateForm(f64, f64),
    #[error("kernel evaluated at coincident points F(s) = F(t)")]
    Coincident,
    #[error("removable value at z = 0 undefined: m + n = {0} < 1")]
    NotRemovable(i32),
    #[error("division guard: {0}")]
    DivisionGuard(String),
    #[error("invalid kernel: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    G,
    Hbar,
    Generic,
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelFamily::G => "g",
            KernelFamily::Hbar => "hbar",
            KernelFamily::Generic => "generic",
        })
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "g" => Ok(Self::G),
            "hbar" | "h" => Ok(Self::Hbar),
            other => Err(format!("unknown kernel '{other}' (expected g or hbar)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegMode {
    Subtract,
    Divide,
}

impl std::fmt::Display for RegMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegMode::Subtract => "subtract",
            RegMode::Divide => "divide",
        })
    }
}

/// Dense storage indexed by multi-index, `|α| ≤ order`.
#[derive(Debug, Clone, PartialEq)]
struct Graded<T> {
    order: u32,
    data: Vec<T>,
}

impl<T: Clone> Graded<T> {
    fn new(order: u32, fill: T) -> Self {
        let n = ((order + 1) * (order + 2) / 2) as usize;
        Self { order, data: vec![fill; n] }
    }

    fn slot(alpha: MultiIndex) -> usize {
        let k = alpha.order() as usize;
        k * (k + 1) / 2 + alpha.a2 as usize
    }

    fn get(&self, alpha: MultiIndex) -> &T {
        &self.data[Self::slot(alpha)]
    }

    fn set(&mut self, alpha: MultiIndex, v: T) {
        let i = Self::slot(alpha);
        self.data[i] = v;
    }
}

/// Expansion data of the patch around one source point.
#[derive(Debug, Clone)]
pub struct SourceContext {
    pub s: Point2,
    pub order: u32,
    bundle: DerivativeBundle,
    a: Graded<Vec3>,
    c: Graded<f64>,
    d: Graded<f64>,
}

impl SourceContext {
    pub fn bundle(&self) -> &DerivativeBundle {
        &self.bundle
    }

    pub fn a(&self, alpha: MultiIndex) -> Vec3 {
        *self.a.get(alpha)
    }

    /// `c_α`; zero for `|α| < 2`.
    pub fn c(&self, alpha: MultiIndex) -> f64 {
        *self.c.get(alpha)
    }

    /// `d_α`; `d_α` for `|α| = 1` is computed, not assumed zero.
    pub fn d(&self, alpha: MultiIndex) -> f64 {
        *self.d.get(alpha)
    }

    /// First fundamental form `(c_20, c_11, c_02)`.
    pub fn form(&self) -> QuadraticForm {
        QuadraticForm {
            a: self.c(MultiIndex::new(2, 0)),
            b: self.c(MultiIndex::new(1, 1)),
            c: self.c(MultiIndex::new(0, 2)),
        }
    }

    /// `P_k = Σ_{|α|=k} c_α z^α`.
    pub fn p_poly(&self, k: u32) -> HomoPoly {
        HomoPoly::from_coeffs(MultiIndex::of_order(k).map(|a| self.c(a)).collect())
    }

    /// `Q_k = Σ_{|α|=k} d_α z^α`.
    pub fn q_poly(&self, k: u32) -> HomoPoly {
        HomoPoly::from_coeffs(MultiIndex::of_order(k).map(|a| self.d(a)).collect())
    }
}

fn scale3(a: Vec3, k: f64) -> Vec3 {
    [a[0] * k, a[1] * k, a[2] * k]
}

/// Derivatives at `s` up to `order` and the coefficients `a_α`, `c_α`, `d_α`.
pub fn build_context(patch: &SurfacePatch, s: Point2, order: u32) -> Result<SourceContext, KernelError> {
    if order < 2 {
        return Err(KernelError::OrderTooLow(order));
    }
    let bundle = partial_derivatives(patch, s, order)?;
    let mut a = Graded::new(order, [0.0; 3]);
    for k in 1..=order {
        for al in MultiIndex::of_order(k) {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let den = factorial(al.a1) * factorial(al.a2);
            a.set(al, scale3(bundle.get(al), sign / den));
        }
    }
    let mut c = Graded::new(order, 0.0);
    let mut d = Graded::new(order, 0.0);
    let all = |k: u32| (0..=k).flat_map(MultiIndex::of_order);
    for k in 1..=order {
        for al in MultiIndex::of_order(k) {
            let mut cs = 0.0;
            for be in all(k) {
                if be.a1 > al.a1 || be.a2 > al.a2 {
                    continue;
                }
                let ga = MultiIndex::new(al.a1 - be.a1, al.a2 - be.a2);
                if be.order() >= 1 && ga.order() >= 1 {
                    cs += dot(*a.get(be), *a.get(ga));
                }
            }
            c.set(al, cs);
            // d_α = −Σ_{β+γ+δ=α, |β|≥1} a_β · ((γ1+1) a_{γ+e1} × (δ2+1) a_{δ+e2})
            let mut ds = 0.0;
            for be in all(k) {
                if be.order() == 0 || be.a1 > al.a1 || be.a2 > al.a2 {
                    continue;
                }
                let rest = MultiIndex::new(al.a1 - be.a1, al.a2 - be.a2);
                for ga in all(rest.order()) {
                    if ga.a1 > rest.a1 || ga.a2 > rest.a2 {
                        continue;
                    }
                    let de = MultiIndex::new(rest.a1 - ga.a1, rest.a2 - ga.a2);
                    let u = scale3(*a.get(MultiIndex::new(ga.a1 + 1, ga.a2)), (ga.a1 + 1) as f64);
                    let v = scale3(*a.get(MultiIndex::new(de.a1, de.a2 + 1)), (de.a2 + 1) as f64);
                    ds -= dot(*a.get(be), cross(u, v));
                }
            }
            d.set(al, ds);
        }
    }
    let ctx = SourceContext { s, order, bundle, a, c, d };
    let f = ctx.form();
    if !(f.a > 0.0 && f.c > 0.0 && f.discriminant() > 0.0) {
        return Err(KernelError::DegenerateForm(s[0], s[1]));
    }
    Ok(ctx)
}

/// `K_{s,n}`: graded truncation of a kernel series with singularity indices `(m1, m2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedKernel {
    pub family: KernelFamily,
    pub source: Point2,
    pub n: usize,
    pub m1: i32,
    pub m2: i32,
    pub sum: RTermSum,
    pub correction_eta: Option<f64>,
}

impl TruncatedKernel {
    /// Kernel from a user-supplied sum; `ζ(sum)` must equal `m = −2 m1 + m2 + 2` unless the sum is empty.
    pub fn generic(source: Point2, n: usize, m1: i32, m2: i32, sum: RTermSum) -> Result<Self, KernelError> {
        if n < 1 || m1 < 0 || m2 < -3 {
            return Err(KernelError::Invalid(format!("n={n}, m1={m1}, m2={m2}")));
        }
        let m = -2 * m1 + m2 + 2;
        match zeta(&sum) {
            Zeta::Infinite => {}
            Zeta::Finite(z) if z == m as i64 => {}
            Zeta::Finite(z) => {
                return Err(KernelError::Invalid(format!("ζ(sum) = {z} but m = {m}")));
            }
        }
        Ok(Self { family: KernelFamily::Generic, source, n, m1, m2, sum, correction_eta: None })
    }

    /// `m = −2 m1 + m2 + 2`.
    pub fn m(&self) -> i32 {
        -2 * self.m1 + self.m2 + 2
    }

    pub fn with_eta(mut self, eta: Option<f64>) -> Self {
        self.correction_eta = eta;
        self
    }

    pub fn form(&self) -> &QuadraticForm {
        self.sum.form()
    }

    /// `K_{s,n}(z)`.
    pub fn eval(&self, z: Point2) -> Result<f64, KernelError> {
        Ok(eval_rterm_sum(&self.sum, z)?)
    }

    /// Terms as `(p, polynomial)` pairs for the analytic integrator.
    pub fn poly_terms(&self) -> Vec<(i32, Poly2)> {
        self.sum.terms().iter().map(|t| (t.p, Poly2::from_homo(&t.poly))).collect()
    }
}

fn check_order(ctx: &SourceContext, n: usize) -> Result<(), KernelError> {
    if n < 1 || (ctx.order as usize) < n + 2 {
        return Err(KernelError::InsufficientOrder { order: ctx.order, n });
    }
    Ok(())
}

/// `P3, …, P_{n+1}`: the tail needed for `n` graded terms.
fn tail(ctx: &SourceContext, n: usize) -> Vec<HomoPoly> {
    (3..=n as u32 + 1).map(|k| ctx.p_poly(k)).collect()
}

/// `G_{s,n}`, the first `n` terms of `(1/4π)(Σ c_α z^α)^{−1/2}`.
pub fn expand_g(ctx: &SourceContext, n: usize) -> Result<TruncatedKernel, KernelError> {
    check_order(ctx, n)?;
    let sum = binomial_sqrt_series(&ctx.form(), &tail(ctx, n), -1, n)?.scaled(1.0 / FOUR_PI);
    Ok(TruncatedKernel { family: KernelFamily::G, source: ctx.s, n, m1: 0, m2: -3, sum, correction_eta: None })
}

/// `H̄_{s,n}`, the first `n` terms of `(1/4π)(Σ d_α z^α)(Σ c_α z^α)^{−3/2}`.
pub fn expand_h(ctx: &SourceContext, n: usize) -> Result<TruncatedKernel, KernelError> {
    check_order(ctx, n)?;
    let s = binomial_sqrt_series(&ctx.form(), &tail(ctx, n), -3, n)?;
    let numer: Vec<HomoPoly> = (2..=n as u32 + 1).map(|k| ctx.q_poly(k)).collect();
    let sum = graded_poly_product(&numer, &s, n)?.scaled(1.0 / FOUR_PI);
    Ok(TruncatedKernel { family: KernelFamily::Hbar, source: ctx.s, n, m1: 1, m2: -1, sum, correction_eta: None })
}

pub fn expand(ctx: &SourceContext, family: KernelFamily, n: usize) -> Result<TruncatedKernel, KernelError> {
    match family {
        KernelFamily::G => expand_g(ctx, n),
        KernelFamily::Hbar => expand_h(ctx, n),
        KernelFamily::Generic => Err(KernelError::Invalid("generic kernels have no expansion".into())),
    }
}

/// `G(s,t)` or `H̄(s,t)` evaluated from the patch.
pub fn eval_exact_kernel(
    patch: &SurfacePatch,
    family: KernelFamily,
    s: Point2,
    t: Point2,
) -> Result<f64, KernelError> {
    let x = crate::geometry::eval_patch(patch, s)?;
    exact_from_point(patch, family, s, x, t)
}

/// Same as [`eval_exact_kernel`] with `F(s)` already known.
pub fn exact_from_point(
    patch: &SurfacePatch,
    family: KernelFamily,
    s: Point2,
    fs: Vec3,
    t: Point2,
) -> Result<f64, KernelError> {
    let (diff, _, d1, d2) = chord(patch, s, fs, t)?;
    let r2 = dot(diff, diff);
    if r2 == 0.0 {
        return Err(KernelError::Coincident);
    }
    let r = r2.sqrt();
    match family {
        // same operation order as the R^{-1} term of the series
        KernelFamily::G => Ok(r.powi(-1) * (1.0 / FOUR_PI)),
        KernelFamily::Hbar => Ok(dot(diff, cross(d1, d2)) / (FOUR_PI * r2 * r)),
        KernelFamily::Generic => Err(KernelError::Invalid("no exact generic kernel".into())),
    }
}

/// Exact kernel as a function of `z = s − t` for a fixed source.
#[derive(Debug, Clone)]
pub struct ExactKernel<'a> {
    patch: &'a SurfacePatch,
    family: KernelFamily,
    s: Point2,
    fs: Vec3,
}

impl<'a> ExactKernel<'a> {
    pub fn new(patch: &'a SurfacePatch, family: KernelFamily, s: Point2) -> Result<Self, KernelError> {
        let fs = crate::geometry::eval_patch(patch, s)?;
        Ok(Self { patch, family, s, fs })
    }

    pub fn source(&self) -> Point2 {
        self.s
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn at_z(&self, z: Point2) -> Result<f64, KernelError> {
        exact_from_point(self.patch, self.family, self.s, self.fs, [self.s[0] - z[0], self.s[1] - z[1]])
    }

    pub fn at_t(&self, t: Point2) -> Result<f64, KernelError> {
        exact_from_point(self.patch, self.family, self.s, self.fs, t)
    }
}

/// Denominator of the division mode: `K_{s,n}(z) + (η/4π)‖z‖²`.
pub fn division_denominator(trunc: &TruncatedKernel, z: Point2) -> Result<f64, KernelError> {
    let eta = trunc.correction_eta.unwrap_or(0.0);
    Ok(trunc.eval(z)? + eta / FOUR_PI * (z[0] * z[0] + z[1] * z[1]))
}

/// Rejects division setups that can hit a zero denominator.
pub fn check_division(trunc: &TruncatedKernel) -> Result<(), KernelError> {
    if trunc.family == KernelFamily::Hbar && trunc.correction_eta.is_none() {
        return Err(KernelError::DivisionGuard(
            "the double-layer kernel changes sign; division needs --eta".into(),
        ));
    }
    if trunc.sum.is_empty() && trunc.correction_eta.is_none() {
        return Err(KernelError::DivisionGuard("truncated kernel vanishes identically".into()));
    }
    Ok(())
}

/// `ρ(z)` for subtraction (`K − K_n`) or division (`K / (K_n + (η/4π)‖z‖²)`),
/// with the removable values 0 and 1 at `z = 0`.
pub fn regularized<E>(kernel_exact: E, trunc: &TruncatedKernel, mode: RegMode, z: Point2) -> Result<f64, KernelError>
where
    E: Fn(Point2) -> Result<f64, KernelError>,
{
    let origin = z[0] == 0.0 && z[1] == 0.0;
    match mode {
        RegMode::Subtract => {
            if origin {
                let mn = trunc.m() + trunc.n as i32;
                return if mn >= 1 { Ok(0.0) } else { Err(KernelError::NotRemovable(mn)) };
            }
            Ok(kernel_exact(z)? - trunc.eval(z)?)
        }
        RegMode::Divide => {
            check_division(trunc)?;
            if origin {
                return Ok(1.0);
            }
            let den = division_denominator(trunc, z)?;
            if den == 0.0 || !den.is_finite() {
                return Err(KernelError::DivisionGuard(format!(
                    "denominator {den} at z = ({}, {})",
                    z[0], z[1]
                )));
            }
            Ok(kernel_exact(z)? / den)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{builtin_spheroid, SurfacePatch};

    #[test]
    fn flat_context() {
        let p = SurfacePatch::flat_unit();
        let ctx = build_context(&p, [0.4, 0.3], 5).unwrap();
        assert!((ctx.c(MultiIndex::new(2, 0)) - 1.0).abs() < 1e-15);
        assert_eq!(ctx.c(MultiIndex::new(1, 1)), 0.0);
        assert!((ctx.c(MultiIndex::new(0, 2)) - 1.0).abs() < 1e-15);
        for k in 1..=5 {
            for al in MultiIndex::of_order(k) {
                assert_eq!(ctx.d(al), 0.0);
                if k >= 3 {
                    assert_eq!(ctx.c(al), 0.0);
                }
            }
        }
        let g1 = expand_g(&ctx, 1).unwrap();
        let g3 = expand_g(&ctx, 3).unwrap();
        assert_eq!(g1.sum, g3.sum);
        let z = [0.3, -0.4];
        assert!((g1.eval(z).unwrap() - 1.0 / (FOUR_PI * 0.5)).abs() < 1e-15);
        assert!(expand_h(&ctx, 2).unwrap().sum.is_empty());
    }

    #[test]
    fn order_and_guard_errors() {
        let p = SurfacePatch::flat_unit();
        let ctx = build_context(&p, [0.5, 0.5], 3).unwrap();
        assert!(matches!(expand_g(&ctx, 2), Err(KernelError::InsufficientOrder { .. })));
        assert!(build_context(&p, [0.5, 0.5], 1).is_err());
        let sp = builtin_spheroid();
        let ctx = build_context(&sp, [0.6, 0.6], 4).unwrap();
        let h = expand_h(&ctx, 2).unwrap();
        let ex = ExactKernel::new(&sp, KernelFamily::Hbar, [0.6, 0.6]).unwrap();
        let r = regularized(|z| ex.at_z(z), &h, RegMode::Divide, [0.05, 0.02]);
        assert!(matches!(r, Err(KernelError::DivisionGuard(_))));
    }

    #[test]
    fn spheroid_terms_match_printed_structure() {
        let sp = builtin_spheroid();
        let ctx = build_context(&sp, [0.6, 0.6], 5).unwrap();
        let g = expand_g(&ctx, 2).unwrap();
        let r = ctx.form();
        let p3 = ctx.p_poly(3);
        let z = [0.013, -0.021];
        let want = (1.0 / r.r(z[0], z[1]) - 0.5 * r.r(z[0], z[1]).powi(-3) * p3.eval(z[0], z[1])) / FOUR_PI;
        assert!((g.eval(z).unwrap() - want).abs() < 1e-12 * want.abs());
        let h = expand_h(&ctx, 1).unwrap();
        let q2 = ctx.q_poly(2);
        let want = r.r(z[0], z[1]).powi(-3) * q2.eval(z[0], z[1]) / FOUR_PI;
        assert!((h.eval(z).unwrap() - want).abs() < 1e-12 * want.abs());
        assert_eq!(zeta(&g.sum), Zeta::Finite(-1));
        assert_eq!(zeta(&h.sum), Zeta::Finite(-1));
    }

    #[test]
    fn regularized_values_at_origin() {
        let p = SurfacePatch::flat_unit();
        let ctx = build_context(&p, [0.5, 0.5], 4).unwrap();
        let g = expand_g(&ctx, 1).unwrap();
        let ex = ExactKernel::new(&p, KernelFamily::G, [0.5, 0.5]).unwrap();
        // m + n = 0 for G with one term: no removable value
        assert!(matches!(
            regularized(|z| ex.at_z(z), &g, RegMode::Subtract, [0.0, 0.0]),
            Err(KernelError::NotRemovable(0))
        ));
        let g2 = expand_g(&ctx, 2).unwrap();
        assert_eq!(regularized(|z| ex.at_z(z), &g2, RegMode::Subtract, [0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(regularized(|z| ex.at_z(z), &g, RegMode::Divide, [0.0, 0.0]).unwrap(), 1.0);
        let v = regularized(|z| ex.at_z(z), &g, RegMode::Divide, [0.2, -0.1]).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn family_parsing() {
        assert_eq!("G".parse::<KernelFamily>().unwrap(), KernelFamily::G);
        assert_eq!("hbar".parse::<KernelFamily>().unwrap(), KernelFamily::Hbar);
        assert!("x".parse::<KernelFamily>().is_err());
    }
}
