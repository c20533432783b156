//! Gauss–Legendre rules, tensor quadrature and the Duffy reference oracle.

use crate::analytic::Rect;
use crate::series::Poly2;
use std::collections::BinaryHeap;
use std::sync::{Arc, OnceLock, RwLock};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("a Gauss-Legendre rule needs at least one node")]
    ZeroNodes,
    #[error("invalid integration domain: {0}")]
    InvalidDomain(String),
    #[error("oracle did not converge: best {:e} ± {:e} after {} evaluations", .0.value, .0.error_estimate, .0.evaluations)]
    NotConverged(OracleResult),
}

/// Nodes and weights on `(-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let m = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (m + h * x, h * w))
    }
}

/// Newton iteration on `P_n` from the Tricomi initial guesses.
pub fn gauss_legendre(n: usize) -> Result<QuadRule1D, QuadratureError> {
    if n == 0 {
        return Err(QuadratureError::ZeroNodes);
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadRule1D { nodes, weights })
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Process-wide cache of rules, shared by every caller.
pub fn cached_rule(n: usize) -> Result<Arc<QuadRule1D>, QuadratureError> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<QuadRule1D>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(r) = cache.read().expect("rule cache").get(&n) {
        return Ok(r.clone());
    }
    let rule = Arc::new(gauss_legendre(n)?);
    Ok(cache.write().expect("rule cache").entry(n).or_insert(rule).clone())
}

/// Tensor nodes `(x, y, weight)` of an `n×n` rule on `rect`.
pub fn tensor_nodes(rect: &Rect, n: usize) -> Result<Vec<(f64, f64, f64)>, QuadratureError> {
    let rule = cached_rule(n)?;
    let mut out = Vec::with_capacity(n * n);
    for (x, wx) in rule.mapped(rect.x0, rect.x1) {
        for (y, wy) in rule.mapped(rect.y0, rect.y1) {
            out.push((x, y, wx * wy));
        }
    }
    Ok(out)
}

/// Collapsed tensor nodes on the triangle `v0, v1, v2` (exact for degree `2n − 2` polynomials).
pub fn triangle_nodes(tri: &[[f64; 2]; 3], n: usize) -> Result<Vec<(f64, f64, f64)>, QuadratureError> {
    let rule = cached_rule(n)?;
    let [v0, v1, v2] = *tri;
    let e1 = [v1[0] - v0[0], v1[1] - v0[1]];
    let e2 = [v2[0] - v0[0], v2[1] - v0[1]];
    let area2 = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
    let mut out = Vec::with_capacity(n * n);
    for (u, wu) in rule.mapped(0.0, 1.0) {
        for (v, wv) in rule.mapped(0.0, 1.0) {
            // (u, v) ↦ v0 + u (e1 + v (e2 − e1)), Jacobian u·|e1 × e2|
            let x = v0[0] + u * (e1[0] + v * (e2[0] - e1[0]));
            let y = v0[1] + u * (e1[1] + v * (e2[1] - e1[1]));
            out.push((x, y, wu * wv * u * area2));
        }
    }
    Ok(out)
}

pub fn tensor_integrate<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    rect: &Rect,
    n: usize,
) -> Result<f64, QuadratureError> {
    let mut acc = Neumaier::default();
    for (x, y, w) in tensor_nodes(rect, n)? {
        acc.add(w * f(x, y));
    }
    Ok(acc.sum())
}

/// Like [`tensor_integrate`] but propagates evaluator errors.
pub fn try_tensor_integrate<E, F: FnMut(f64, f64) -> Result<f64, E>>(
    mut f: F,
    rect: &Rect,
    n: usize,
) -> Result<Result<f64, E>, QuadratureError> {
    let mut acc = Neumaier::default();
    for (x, y, w) in tensor_nodes(rect, n)? {
        match f(x, y) {
            Ok(v) => acc.add(w * v),
            Err(e) => return Ok(Err(e)),
        }
    }
    Ok(Ok(acc.sum()))
}

/// Exact `∫∫_rect P` from monomial antiderivatives.
pub fn poly_integral_rect(poly: &Poly2, rect: &Rect) -> f64 {
    let mut acc = Neumaier::default();
    for ((i, j), c) in poly.terms() {
        let ix = (rect.x1.powi(i as i32 + 1) - rect.x0.powi(i as i32 + 1)) / (i + 1) as f64;
        let iy = (rect.y1.powi(j as i32 + 1) - rect.y0.powi(j as i32 + 1)) / (j + 1) as f64;
        acc.add(c * ix * iy);
    }
    acc.sum()
}

/// `∫∫_tri P` with a collapsed Gauss rule of sufficient degree (exact up to rounding).
pub fn poly_integral_tri(poly: &Poly2, tri: &[[f64; 2]; 3]) -> f64 {
    let n = poly.total_degree() as usize / 2 + 2;
    let mut acc = Neumaier::default();
    for (x, y, w) in triangle_nodes(tri, n).expect("n > 0") {
        acc.add(w * poly.eval(x, y));
    }
    acc.sum()
}

/// Compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `∫_{t0}^{t1} f` for an integrand analytic on the interval whose nearest
/// complex singularity sits at `center ± i·scale`.
///
/// Panels grow geometrically away from `center` (clamped into the interval),
/// so each panel stays well separated from the singularity relative to its length.
pub fn graded_integral<F: Fn(f64) -> f64>(f: F, t0: f64, t1: f64, center: f64, scale: f64) -> f64 {
    if t0 == t1 {
        return 0.0;
    }
    let (lo, hi, sign) = if t0 < t1 { (t0, t1, 1.0) } else { (t1, t0, -1.0) };
    let rule = cached_rule(20).expect("n > 0");
    let c = center.clamp(lo, hi);
    let d0 = scale.abs().max((hi - lo) * 1e-15);
    let mut acc = Neumaier::default();
    let mut panel = |a: f64, b: f64| {
        for (t, w) in rule.mapped(a, b) {
            acc.add(w * f(t));
        }
    };
    // central panel, then geometric panels on each side
    let first_hi = (c + d0).min(hi);
    let first_lo = (c - d0).max(lo);
    panel(first_lo, first_hi);
    let mut a = first_hi;
    let mut d = d0;
    while a < hi {
        let b = (c + 2.0 * d).min(hi);
        panel(a, b);
        a = b;
        d *= 2.0;
    }
    let mut b = first_lo;
    let mut d = d0;
    while b > lo {
        let a = (c - 2.0 * d).max(lo);
        panel(a, b);
        b = a;
        d *= 2.0;
    }
    sign * acc.sum()
}

/// Reference value from the Duffy oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: u64,
}

/// Oracle integration domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleDomain {
    Rect(Rect),
    Tri([[f64; 2]; 3]),
}

/// Adaptive oracle settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
    pub max_panels: usize,
    /// Low order `n` of the embedded `(n, 2n)` tensor pair.
    pub order: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-12, abs_tol: 1e-300, max_depth: 30, max_panels: 40_000, order: 8 }
    }
}

impl OracleOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

/// Triangle with its singular vertex first.
#[derive(Debug, Clone, Copy)]
struct SingularTri {
    p: [f64; 2],
    a: [f64; 2],
    b: [f64; 2],
    area2: f64,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    tri: usize,
    u0: f64,
    u1: f64,
    v0: f64,
    v1: f64,
    depth: u32,
    value: f64,
    err: f64,
    id: u64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err && self.id == o.id
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err).then(o.id.cmp(&self.id))
    }
}

fn split_at_anchor(dom: &OracleDomain, z: [f64; 2]) -> Result<Vec<SingularTri>, QuadratureError> {
    let mut tris = Vec::new();
    let mut push = |p: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        let area2 = ((a[0] - p[0]) * (b[1] - p[1]) - (a[1] - p[1]) * (b[0] - p[0])).abs();
        if area2 > 0.0 {
            tris.push(SingularTri { p, a, b, area2 });
        }
    };
    match dom {
        OracleDomain::Rect(r) => {
            let (x0, x1) = (r.x0.min(r.x1), r.x0.max(r.x1));
            let (y0, y1) = (r.y0.min(r.y1), r.y0.max(r.y1));
            if !(x1 > x0 && y1 > y0) {
                return Err(QuadratureError::InvalidDomain("rectangle has no area".into()));
            }
            let p = [z[0].clamp(x0, x1), z[1].clamp(y0, y1)];
            // the four boundary corners in counter-clockwise order; fan from p
            let corners = [[x0, y0], [x1, y0], [x1, y1], [x0, y1]];
            // insert the projections of p on each edge so every triangle has p as a vertex
            let mut ring = Vec::new();
            for k in 0..4 {
                let c = corners[k];
                let d = corners[(k + 1) % 4];
                ring.push(c);
                let t = match k {
                    0 | 2 => [p[0], c[1]],
                    _ => [c[0], p[1]],
                };
                if t != c && t != d {
                    ring.push(t);
                }
            }
            for k in 0..ring.len() {
                push(p, ring[k], ring[(k + 1) % ring.len()]);
            }
        }
        OracleDomain::Tri(v) => {
            let p = nearest_in_triangle(v, z)?;
            for k in 0..3 {
                push(p, v[k], v[(k + 1) % 3]);
            }
        }
    }
    Ok(tris)
}

fn nearest_in_triangle(v: &[[f64; 2]; 3], z: [f64; 2]) -> Result<[f64; 2], QuadratureError> {
    let cross = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let area = cross(v[0], v[1], v[2]);
    if area == 0.0 {
        return Err(QuadratureError::InvalidDomain("degenerate triangle".into()));
    }
    let s = area.signum();
    let inside = (0..3).all(|k| s * cross(v[k], v[(k + 1) % 3], z) >= 0.0);
    if inside {
        return Ok(z);
    }
    let mut best = v[0];
    let mut best_d = f64::INFINITY;
    for k in 0..3 {
        let (a, b) = (v[k], v[(k + 1) % 3]);
        let e = [b[0] - a[0], b[1] - a[1]];
        let t = (((z[0] - a[0]) * e[0] + (z[1] - a[1]) * e[1]) / (e[0] * e[0] + e[1] * e[1])).clamp(0.0, 1.0);
        let q = [a[0] + t * e[0], a[1] + t * e[1]];
        let d = (q[0] - z[0]).hypot(q[1] - z[1]);
        if d < best_d {
            best_d = d;
            best = q;
        }
    }
    Ok(best)
}

/// Adaptive Duffy-transformed integration around a weak singularity at `z`.
///
/// The domain is fanned into triangles with `z` (or its nearest boundary point)
/// as a vertex; each is pulled back to the unit square by the Duffy map, whose
/// Jacobian cancels a `1/r` singularity. Panels are bisected quad-tree style,
/// worst embedded-pair error first.
pub fn duffy_oracle<F: Fn([f64; 2]) -> f64>(
    f: F,
    z: [f64; 2],
    dom: &OracleDomain,
    opts: &OracleOptions,
) -> Result<OracleResult, QuadratureError> {
    let tris = split_at_anchor(dom, z)?;
    let lo = cached_rule(opts.order)?;
    let hi = cached_rule(2 * opts.order)?;
    let mut evaluations = 0u64;
    let mut next_id = 0u64;
    let mut eval_panel = |tri: usize, u0: f64, u1: f64, v0: f64, v1: f64, depth: u32, evals: &mut u64| {
        let t = &tris[tri];
        let g = |u: f64, v: f64| {
            let x = t.p[0] + u * ((t.a[0] - t.p[0]) + v * (t.b[0] - t.a[0]));
            let y = t.p[1] + u * ((t.a[1] - t.p[1]) + v * (t.b[1] - t.a[1]));
            f([x, y]) * u * t.area2
        };
        let mut ql = Neumaier::default();
        for (u, wu) in lo.mapped(u0, u1) {
            for (v, wv) in lo.mapped(v0, v1) {
                ql.add(wu * wv * g(u, v));
            }
        }
        let mut qh = Neumaier::default();
        for (u, wu) in hi.mapped(u0, u1) {
            for (v, wv) in hi.mapped(v0, v1) {
                qh.add(wu * wv * g(u, v));
            }
        }
        *evals += (lo.len() * lo.len() + hi.len() * hi.len()) as u64;
        let value = qh.sum();
        let err = (value - ql.sum()).abs();
        next_id += 1;
        Panel { tri, u0, u1, v0, v1, depth, value, err, id: next_id }
    };
    let mut heap = BinaryHeap::new();
    for k in 0..tris.len() {
        heap.push(eval_panel(k, 0.0, 1.0, 0.0, 1.0, 0, &mut evaluations));
    }
    let total = |heap: &BinaryHeap<Panel>| {
        let mut panels: Vec<&Panel> = heap.iter().collect();
        panels.sort_by_key(|p| p.id);
        let mut v = Neumaier::default();
        let mut e = Neumaier::default();
        for p in panels {
            v.add(p.value);
            e.add(p.err);
        }
        (v.sum(), e.sum())
    };
    loop {
        let (value, err) = total(&heap);
        if !value.is_finite() || !err.is_finite() {
            return Err(QuadratureError::NotConverged(OracleResult {
                value,
                error_estimate: err,
                evaluations,
            }));
        }
        if err <= opts.abs_tol.max(opts.rel_tol * value.abs()) {
            return Ok(OracleResult { value, error_estimate: err, evaluations });
        }
        let worst = heap.pop().expect("at least one panel");
        if worst.depth >= opts.max_depth || heap.len() + 4 > opts.max_panels {
            heap.push(worst);
            return Err(QuadratureError::NotConverged(OracleResult {
                value,
                error_estimate: err,
                evaluations,
            }));
        }
        let um = 0.5 * (worst.u0 + worst.u1);
        let vm = 0.5 * (worst.v0 + worst.v1);
        let d = worst.depth + 1;
        for (a, b) in [(worst.u0, um), (um, worst.u1)] {
            for (c, e) in [(worst.v0, vm), (vm, worst.v1)] {
                heap.push(eval_panel(worst.tri, a, b, c, e, d, &mut evaluations));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_rules() {
        let r1 = gauss_legendre(1).unwrap();
        assert_eq!(r1.nodes, vec![0.0]);
        assert!((r1.weights[0] - 2.0).abs() < 1e-15);
        let r2 = gauss_legendre(2).unwrap();
        assert!((r2.nodes[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((r2.weights[0] - 1.0).abs() < 1e-15);
        assert!(gauss_legendre(0).is_err());
    }

    #[test]
    fn exactness_degree() {
        let r = gauss_legendre(10).unwrap();
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(19)).sum();
        assert!(s.abs() < 1e-14);
        let wsum: f64 = r.weights.iter().sum();
        assert!((wsum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tensor_examples() {
        let v = tensor_integrate(|_, _| 1.0, &Rect::unit(), 3).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let v = tensor_integrate(|x, y| x * x * y * y, &Rect::unit(), 2).unwrap();
        assert!((v - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_rule_polynomial() {
        let tri = [[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]];
        let s: f64 = triangle_nodes(&tri, 4).unwrap().iter().map(|(x, y, w)| w * x * y).sum();
        // ∫ x y over the triangle = 2²·1²/24
        assert!((s - 4.0 / 24.0).abs() < 1e-14);
    }

    #[test]
    fn oracle_inverse_distance() {
        let f = |z: [f64; 2]| 1.0 / (4.0 * std::f64::consts::PI * z[0].hypot(z[1]));
        let r = duffy_oracle(f, [0.0, 0.0], &OracleDomain::Rect(Rect::unit()), &OracleOptions::default())
            .unwrap();
        let want = 2.0 * (1.0 + 2f64.sqrt()).ln() / (4.0 * std::f64::consts::PI);
        assert!((r.value - want).abs() < 1e-13);
    }

    #[test]
    fn graded_matches_closed_form() {
        // ∫_0^1 dt / sqrt(t² + ε²) = asinh(1/ε)
        let eps = 1e-6;
        let v = graded_integral(|t| 1.0 / (t * t + eps * eps).sqrt(), 0.0, 1.0, 0.0, eps);
        assert!((v - (1.0 / eps).asinh()).abs() < 1e-13 * v);
    }
}
