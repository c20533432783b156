//! Rational tensor-product spline patches with exact partial derivatives.

use crate::numeric::binomial;
use crate::series::MultiIndex;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub type Point2 = [f64; 2];
pub type Vec3 = [f64; 3];

/// Largest derivative order served unless a caller raises the limit.
pub const DEFAULT_MAX_ORDER: u32 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("parameter ({0}, {1}) lies outside the patch domain")]
    OutsideDomain(f64, f64),
    #[error("derivative order {requested} exceeds the limit {limit}")]
    OrderTooHigh { requested: u32, limit: u32 },
    #[error("degenerate surface: area element {0:e} at ({1}, {2})")]
    Degenerate(f64, f64, f64),
    #[error("patch parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GeometryError {
    fn from(e: std::io::Error) -> Self {
        GeometryError::Io(e.to_string())
    }
}

fn parse_err(location: impl Into<String>, message: impl Into<String>) -> GeometryError {
    GeometryError::Parse { location: location.into(), message: message.into() }
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Rational tensor-product B-spline surface with clamped knot vectors.
///
/// Control points are stored weighted, `(w x, w y, w z, w)`; `points[i][j]`
/// belongs to basis function `i` in `t1` and `j` in `t2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePatch {
    degrees: (usize, usize),
    knots_u: Vec<f64>,
    knots_v: Vec<f64>,
    points: Vec<Vec<[f64; 4]>>,
    domain: [[f64; 2]; 2],
    /// `(origin, ∂1, ∂2)` when the patch is an affine map, evaluated without basis sums.
    affine: Option<[Vec3; 3]>,
}

/// Partial derivatives `D^α F(s)` for `|α| ≤ max_order`.
#[derive(Debug, Clone)]
pub struct DerivativeBundle {
    pub center: Point2,
    pub max_order: u32,
    partials: Vec<Vec3>,
}

impl DerivativeBundle {
    fn slot(alpha: MultiIndex) -> usize {
        let k = alpha.order() as usize;
        k * (k + 1) / 2 + alpha.a2 as usize
    }

    /// `D^α F(s)`; `α = (0, 0)` gives the point itself.
    pub fn get(&self, alpha: MultiIndex) -> Vec3 {
        assert!(alpha.order() <= self.max_order, "derivative order not in bundle");
        self.partials[Self::slot(alpha)]
    }

    pub fn value(&self) -> Vec3 {
        self.partials[0]
    }
}

/// Serialized patch, see `load_patch`.
#[derive(Debug, Serialize, Deserialize)]
struct PatchFile {
    degrees: [usize; 2],
    knots_u: Vec<f64>,
    knots_v: Vec<f64>,
    points: Vec<[f64; 4]>,
    domain: [[f64; 2]; 2],
}

impl SurfacePatch {
    pub fn new(
        degrees: (usize, usize),
        knots_u: Vec<f64>,
        knots_v: Vec<f64>,
        points: Vec<Vec<[f64; 4]>>,
        domain: [[f64; 2]; 2],
    ) -> Result<Self, GeometryError> {
        let (p, q) = degrees;
        check_knots("knots_u", &knots_u, p)?;
        check_knots("knots_v", &knots_v, q)?;
        let nu = knots_u.len() - p - 1;
        let nv = knots_v.len() - q - 1;
        if points.len() != nu || points.iter().any(|row| row.len() != nv) {
            return Err(parse_err(
                "points",
                format!("expected a {nu}×{nv} control net for the given knots and degrees"),
            ));
        }
        for (i, row) in points.iter().enumerate() {
            for (j, pt) in row.iter().enumerate() {
                if !(pt[3] > 0.0) {
                    return Err(parse_err(format!("points[{}]", i * nv + j), "non-positive weight"));
                }
                if pt.iter().any(|c| !c.is_finite()) {
                    return Err(parse_err(format!("points[{}]", i * nv + j), "non-finite value"));
                }
            }
        }
        let (u0, u1) = (knots_u[p], knots_u[nu]);
        let (v0, v1) = (knots_v[q], knots_v[nv]);
        let [[a0, a1], [b0, b1]] = domain;
        if !(a0 < a1 && b0 < b1 && a0 >= u0 && a1 <= u1 && b0 >= v0 && b1 <= v1) {
            return Err(parse_err("domain", "domain must be a nonempty sub-rectangle of the knot span"));
        }
        let affine = affine_form(degrees, &knots_u, &knots_v, &points);
        Ok(Self { degrees, knots_u, knots_v, points, domain, affine })
    }

    /// Bilinear patch realizing `F(t) = (t1, t2, 0)` exactly on `domain`.
    pub fn flat(domain: [[f64; 2]; 2]) -> Self {
        let [[u0, u1], [v0, v1]] = domain;
        let points = vec![
            vec![[u0, v0, 0.0, 1.0], [u0, v1, 0.0, 1.0]],
            vec![[u1, v0, 0.0, 1.0], [u1, v1, 0.0, 1.0]],
        ];
        Self::new((1, 1), vec![u0, u0, u1, u1], vec![v0, v0, v1, v1], points, domain)
            .expect("flat patch is valid")
    }

    /// Flat patch on the unit square.
    pub fn flat_unit() -> Self {
        Self::flat([[0.0, 1.0], [0.0, 1.0]])
    }

    pub fn degrees(&self) -> (usize, usize) {
        self.degrees
    }

    pub fn domain(&self) -> [[f64; 2]; 2] {
        self.domain
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.knots_u, &self.knots_v)
    }

    pub fn weighted_points(&self) -> &[Vec<[f64; 4]>] {
        &self.points
    }

    pub fn contains(&self, t: Point2) -> bool {
        let [[u0, u1], [v0, v1]] = self.domain;
        t[0] >= u0 && t[0] <= u1 && t[1] >= v0 && t[1] <= v1
    }

    fn check(&self, t: Point2) -> Result<(), GeometryError> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(GeometryError::OutsideDomain(t[0], t[1]))
        }
    }

    /// Returns a copy with every Cartesian coordinate multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let points: Vec<Vec<[f64; 4]>> = self
            .points
            .iter()
            .map(|row| row.iter().map(|p| [p[0] * k, p[1] * k, p[2] * k, p[3]]).collect())
            .collect();
        let affine = affine_form(self.degrees, &self.knots_u, &self.knots_v, &points);
        Self { points, affine, ..self.clone() }
    }

    /// Homogeneous derivatives `∂^(k,l) A` for `k + l ≤ order`, `A = Σ N_i M_j P^w_ij`.
    fn homogeneous_ders(&self, t: Point2, order: usize) -> Vec<Vec<[f64; 4]>> {
        let (p, q) = self.degrees;
        let su = find_span(&self.knots_u, p, t[0]);
        let sv = find_span(&self.knots_v, q, t[1]);
        let nu = basis_ders(&self.knots_u, p, su, t[0], order);
        let nv = basis_ders(&self.knots_v, q, sv, t[1], order);
        let mut out = vec![vec![[0.0; 4]; order + 1]; order + 1];
        for k in 0..=order {
            for l in 0..=(order - k) {
                let mut acc = [0.0; 4];
                for i in 0..=p {
                    let bu = nu[k][i];
                    if bu == 0.0 {
                        continue;
                    }
                    for j in 0..=q {
                        let b = bu * nv[l][j];
                        if b == 0.0 {
                            continue;
                        }
                        let cp = &self.points[su - p + i][sv - q + j];
                        for c in 0..4 {
                            acc[c] += b * cp[c];
                        }
                    }
                }
                out[k][l] = acc;
            }
        }
        out
    }

    fn eval_unchecked(&self, t: Point2) -> Vec3 {
        if let Some([o, d1, d2]) = self.affine {
            return affine_point(o, d1, d2, t);
        }
        let a = self.homogeneous_ders(t, 0)[0][0];
        [a[0] / a[3], a[1] / a[3], a[2] / a[3]]
    }

    /// Rational derivatives `S^(k,l)` for `k + l ≤ order` by the Leibniz quotient rule.
    fn rational_ders(&self, t: Point2, order: usize) -> Vec<Vec<Vec3>> {
        if let Some([o, d1, d2]) = self.affine {
            let mut s = vec![vec![[0.0; 3]; order + 1]; order + 1];
            s[0][0] = affine_point(o, d1, d2, t);
            if order >= 1 {
                s[1][0] = d1;
                s[0][1] = d2;
            }
            return s;
        }
        let a = self.homogeneous_ders(t, order);
        let w = |k: usize, l: usize| a[k][l][3];
        let mut s = vec![vec![[0.0; 3]; order + 1]; order + 1];
        for k in 0..=order {
            for l in 0..=(order - k) {
                let mut v = [a[k][l][0], a[k][l][1], a[k][l][2]];
                for j in 1..=l {
                    let f = binomial(l as u32, j as u32) * w(0, j);
                    for c in 0..3 {
                        v[c] -= f * s[k][l - j][c];
                    }
                }
                for i in 1..=k {
                    let fi = binomial(k as u32, i as u32) * w(i, 0);
                    for c in 0..3 {
                        v[c] -= fi * s[k - i][l][c];
                    }
                    for j in 1..=l {
                        let f = binomial(k as u32, i as u32) * binomial(l as u32, j as u32) * w(i, j);
                        for c in 0..3 {
                            v[c] -= f * s[k - i][l - j][c];
                        }
                    }
                }
                let w0 = w(0, 0);
                s[k][l] = [v[0] / w0, v[1] / w0, v[2] / w0];
            }
        }
        s
    }
}

fn affine_point(o: Vec3, d1: Vec3, d2: Vec3, t: Point2) -> Vec3 {
    [o[0] + t[0] * d1[0] + t[1] * d2[0], o[1] + t[0] * d1[1] + t[1] * d2[1], o[2] + t[0] * d1[2] + t[1] * d2[2]]
}

/// Detects bilinear patches with equal weights and a parallelogram net.
fn affine_form(degrees: (usize, usize), ku: &[f64], kv: &[f64], pts: &[Vec<[f64; 4]>]) -> Option<[Vec3; 3]> {
    if degrees != (1, 1) || ku.len() != 4 || kv.len() != 4 {
        return None;
    }
    let w = pts[0][0][3];
    let p = |i: usize, j: usize| -> Option<Vec3> {
        let c = pts[i][j];
        (c[3] == w).then(|| [c[0] / w, c[1] / w, c[2] / w])
    };
    let (p00, p10, p01, p11) = (p(0, 0)?, p(1, 0)?, p(0, 1)?, p(1, 1)?);
    let (du, dv) = (ku[2] - ku[1], kv[2] - kv[1]);
    let mut d1 = [0.0; 3];
    let mut d2 = [0.0; 3];
    let mut o = [0.0; 3];
    for c in 0..3 {
        if p11[c] - p10[c] - p01[c] + p00[c] != 0.0 {
            return None;
        }
        d1[c] = (p10[c] - p00[c]) / du;
        d2[c] = (p01[c] - p00[c]) / dv;
        o[c] = p00[c] - ku[1] * d1[c] - kv[1] * d2[c];
    }
    Some([o, d1, d2])
}

fn check_knots(name: &str, knots: &[f64], degree: usize) -> Result<(), GeometryError> {
    if knots.len() < 2 * (degree + 1) {
        return Err(parse_err(name, format!("need at least {} knots", 2 * (degree + 1))));
    }
    for (i, w) in knots.windows(2).enumerate() {
        if !(w[1] >= w[0]) {
            return Err(parse_err(format!("{name}[{}]", i + 1), "knot vector is not non-decreasing"));
        }
    }
    let mut run = 1;
    for w in knots.windows(2) {
        run = if w[1] == w[0] { run + 1 } else { 1 };
        if run > degree + 1 {
            return Err(parse_err(name, "knot multiplicity exceeds degree + 1"));
        }
    }
    let m = knots.len();
    let clamped_lo = knots[..=degree].iter().all(|k| *k == knots[0]);
    let clamped_hi = knots[m - degree - 1..].iter().all(|k| *k == knots[m - 1]);
    if !(clamped_lo && clamped_hi) {
        return Err(parse_err(name, "knot vector must be clamped"));
    }
    Ok(())
}

/// Knot span index `i` with `U[i] ≤ u < U[i+1]`, clamped to the last nonempty span.
fn find_span(knots: &[f64], p: usize, u: f64) -> usize {
    let n = knots.len() - p - 2;
    if u >= knots[n + 1] {
        let mut i = n;
        while i > p && knots[i] == knots[i + 1] {
            i -= 1;
        }
        return i;
    }
    if u <= knots[p] {
        let mut i = p;
        while knots[i] == knots[i + 1] {
            i += 1;
        }
        return i;
    }
    let (mut lo, mut hi) = (p, n + 1);
    let mut mid = (lo + hi) / 2;
    while u < knots[mid] || u >= knots[mid + 1] {
        if u < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
        mid = (lo + hi) / 2;
    }
    mid
}

/// Nonzero basis functions and their derivatives up to `nd` (higher ones are zero).
fn basis_ders(knots: &[f64], p: usize, span: usize, u: f64, nd: usize) -> Vec<Vec<f64>> {
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let mut ders = vec![vec![0.0; p + 1]; nd + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let top = nd.min(p);
    let mut a = vec![vec![0.0; p + 1]; 2];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=top {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if (r as isize - 1) <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut fac = p as f64;
    for k in 1..=top {
        for j in 0..=p {
            ders[k][j] *= fac;
        }
        fac *= (p - k) as f64;
    }
    ders
}

/// De-homogenized patch value `F(t)`.
pub fn eval_patch(patch: &SurfacePatch, t: Point2) -> Result<Vec3, GeometryError> {
    patch.check(t)?;
    Ok(patch.eval_unchecked(t))
}

/// Exact partials `D^α F(s)` for `|α| ≤ max_order` (default limit 8).
pub fn partial_derivatives(
    patch: &SurfacePatch,
    s: Point2,
    max_order: u32,
) -> Result<DerivativeBundle, GeometryError> {
    partial_derivatives_with_limit(patch, s, max_order, DEFAULT_MAX_ORDER)
}

pub fn partial_derivatives_with_limit(
    patch: &SurfacePatch,
    s: Point2,
    max_order: u32,
    limit: u32,
) -> Result<DerivativeBundle, GeometryError> {
    if max_order > limit {
        return Err(GeometryError::OrderTooHigh { requested: max_order, limit });
    }
    patch.check(s)?;
    let d = max_order as usize;
    let ders = patch.rational_ders(s, d);
    let mut partials = Vec::with_capacity((d + 1) * (d + 2) / 2);
    for k in 0..=d {
        for a in MultiIndex::of_order(k as u32) {
            partials.push(ders[a.a1 as usize][a.a2 as usize]);
        }
    }
    Ok(DerivativeBundle { center: s, max_order, partials })
}

/// First derivatives `(D1F, D2F)` at `t`.
pub fn tangents(patch: &SurfacePatch, t: Point2) -> Result<(Vec3, Vec3), GeometryError> {
    patch.check(t)?;
    let s = patch.rational_ders(t, 1);
    Ok((s[1][0], s[0][1]))
}

/// `(F, D1F, D2F)` at `t` from one basis evaluation.
pub fn point_and_tangents(patch: &SurfacePatch, t: Point2) -> Result<(Vec3, Vec3, Vec3), GeometryError> {
    patch.check(t)?;
    let s = patch.rational_ders(t, 1);
    Ok((s[0][0], s[1][0], s[0][1]))
}

/// Below this parameter distance [`chord`] integrates tangents instead of subtracting points.
pub const CHORD_RADIUS: f64 = 0.1;

/// `F(s) − F(t)` with `F(t)` and the tangents at `t`.
///
/// Close to `s` the difference is `∫₀¹ DF(t + τ(s − t))·(s − t) dτ` on an
/// 8-point Gauss rule, which keeps full relative accuracy where direct
/// subtraction loses it. Affine patches subtract directly.
pub fn chord(patch: &SurfacePatch, s: Point2, fs: Vec3, t: Point2) -> Result<(Vec3, Vec3, Vec3, Vec3), GeometryError> {
    let (ft, d1, d2) = point_and_tangents(patch, t)?;
    let z = [s[0] - t[0], s[1] - t[1]];
    if patch.affine.is_some() || z[0].hypot(z[1]) >= CHORD_RADIUS {
        return Ok(([fs[0] - ft[0], fs[1] - ft[1], fs[2] - ft[2]], ft, d1, d2));
    }
    let rule = crate::quadrature::cached_rule(8).expect("8-point rule");
    let mut acc = [0.0; 3];
    for (tau, w) in rule.mapped(0.0, 1.0) {
        let (e1, e2) = tangents(patch, [t[0] + tau * z[0], t[1] + tau * z[1]])?;
        for k in 0..3 {
            acc[k] += w * (e1[k] * z[0] + e2[k] * z[1]);
        }
    }
    Ok((acc, ft, d1, d2))
}

/// Area element `J = |D1F × D2F|` and unit normal.
pub fn area_element(patch: &SurfacePatch, t: Point2) -> Result<(f64, Vec3), GeometryError> {
    let (d1, d2) = tangents(patch, t)?;
    let n = cross(d1, d2);
    let j = norm(n);
    if !(j >= 1e-14) {
        return Err(GeometryError::Degenerate(j, t[0], t[1]));
    }
    Ok((j, [n[0] / j, n[1] / j, n[2] / j]))
}

/// Constants of the quartic sphere-face net.
#[derive(Debug, Clone, Copy)]
pub struct SpheroidConstants {
    pub c: [f64; 9],
    pub w: [f64; 4],
}

pub fn spheroid_constants() -> SpheroidConstants {
    let s3 = 3f64.sqrt();
    let s2 = 2f64.sqrt();
    let s6 = 6f64.sqrt();
    SpheroidConstants {
        c: [
            4.0 * (s3 - 1.0),
            s2,
            s2 * (4.0 - s3),
            4.0 * (2.0 * s3 - 1.0) / 3.0,
            (3.0 * s3 - 2.0) / 2.0,
            s2 * (7.0 - 2.0 * s3) / 3.0,
            (s3 + 6.0) / 2.0,
            5.0 * s6 / 3.0,
            4.0 * (5.0 - s3) / 3.0,
        ],
        w: [4.0 * (3.0 - s3), s2 * (3.0 * s3 - 2.0), s2 * (s3 + 6.0) / 3.0, 4.0 * (5.0 * s3 - 1.0) / 9.0],
    }
}

/// The four 5×5 matrices `(Cx, Cy, Cz, Cw)` before any stretching; `Cy` is taken
/// with positive sign so the unstretched net is a face of the unit sphere.
pub fn sphere_face_matrices() -> [[[f64; 5]; 5]; 4] {
    let k = spheroid_constants();
    let [c1, c2, c3, c4, c5, c6, c7, c8, c9] = k.c;
    let [w1, w2, w3, w4] = k.w;
    let cx = [
        [-c1, -c3, -c4, -c3, -c1],
        [-c2, -c5, -c6, -c5, -c2],
        [0.0; 5],
        [c2, c5, c6, c5, c2],
        [c1, c3, c4, c3, c1],
    ];
    let cy = [
        [c1, c3, c4, c3, c1],
        [c3, c7, c8, c7, c3],
        [c4, c8, c9, c8, c4],
        [c3, c7, c8, c7, c3],
        [c1, c3, c4, c3, c1],
    ];
    let cz = [
        [-c1, -c2, 0.0, c2, c1],
        [-c3, -c5, 0.0, c5, c3],
        [-c4, -c6, 0.0, c6, c4],
        [-c3, -c5, 0.0, c5, c3],
        [-c1, -c2, 0.0, c2, c1],
    ];
    let cw = [
        [w1, w2, c9, w2, w1],
        [w2, c7, w3, c7, w2],
        [c9, w3, w4, w3, c9],
        [w2, c7, w3, c7, w2],
        [w1, w2, c9, w2, w1],
    ];
    [cx, cy, cz, cw]
}

fn bezier44(sx: f64, sy: f64, sz: f64) -> SurfacePatch {
    let [cx, cy, cz, cw] = sphere_face_matrices();
    // Row index i runs along t1 and column index j along t2.
    let points = (0..5)
        .map(|i| (0..5).map(|j| [sx * cx[i][j], sy * cy[i][j], sz * cz[i][j], cw[i][j]]).collect())
        .collect();
    let knots = vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0];
    SurfacePatch::new((4, 4), knots.clone(), knots, points, [[0.0, 1.0], [0.0, 1.0]])
        .expect("builtin net is valid")
}

/// The quartic rational Bézier spheroid section on `[0,1]²` (stretch 1.5 in x, −2 in y).
pub fn builtin_spheroid() -> SurfacePatch {
    bezier44(1.5, -2.0, 1.0)
}

/// The unstretched net: an exact face of the unit sphere.
pub fn builtin_sphere_face() -> SurfacePatch {
    bezier44(1.0, 1.0, 1.0)
}

/// Reads a patch from the JSON schema used by `save_patch`.
pub fn load_patch(path: &Path) -> Result<SurfacePatch, GeometryError> {
    let text = std::fs::read_to_string(path)?;
    parse_patch(&text)
}

pub fn parse_patch(text: &str) -> Result<SurfacePatch, GeometryError> {
    let file: PatchFile = serde_json::from_str(text).map_err(|e| {
        parse_err(format!("line {}, column {}", e.line(), e.column()), e.to_string())
    })?;
    let [p, q] = file.degrees;
    if file.knots_u.len() < p + 2 || file.knots_v.len() < q + 2 {
        return Err(parse_err("knots", "knot vectors too short for the degrees"));
    }
    let nu = file.knots_u.len() - p - 1;
    let nv = file.knots_v.len() - q - 1;
    if file.points.len() != nu * nv {
        return Err(parse_err("points", format!("expected {} points, found {}", nu * nv, file.points.len())));
    }
    for (k, pt) in file.points.iter().enumerate() {
        if !(pt[3] > 0.0) {
            return Err(parse_err(format!("points[{k}]"), "non-positive weight"));
        }
    }
    let points = file.points.chunks(nv).map(|c| c.to_vec()).collect();
    SurfacePatch::new((p, q), file.knots_u, file.knots_v, points, file.domain)
}

pub fn patch_to_json(patch: &SurfacePatch) -> String {
    let file = PatchFile {
        degrees: [patch.degrees.0, patch.degrees.1],
        knots_u: patch.knots_u.clone(),
        knots_v: patch.knots_v.clone(),
        points: patch.points.iter().flatten().copied().collect(),
        domain: patch.domain,
    };
    serde_json::to_string_pretty(&file).expect("patch serializes")
}

pub fn save_patch(patch: &SurfacePatch, path: &Path) -> Result<(), GeometryError> {
    std::fs::write(path, patch_to_json(patch))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_patch_value_and_derivatives() {
        let f = SurfacePatch::flat_unit();
        let p = eval_patch(&f, [0.3, 0.7]).unwrap();
        assert!((p[0] - 0.3).abs() < 1e-15 && (p[1] - 0.7).abs() < 1e-15 && p[2] == 0.0);
        let b = partial_derivatives(&f, [0.3, 0.7], 3).unwrap();
        let d1 = b.get(MultiIndex::new(1, 0));
        assert!((d1[0] - 1.0).abs() < 1e-15 && d1[1] == 0.0 && d1[2] == 0.0);
        assert_eq!(b.get(MultiIndex::new(2, 0)), [0.0, 0.0, 0.0]);
        let (j, n) = area_element(&f, [0.2, 0.9]).unwrap();
        assert!((j - 1.0).abs() < 1e-15);
        assert_eq!(n, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn outside_domain_and_order_limit() {
        let f = SurfacePatch::flat_unit();
        assert!(matches!(eval_patch(&f, [1.5, 0.0]), Err(GeometryError::OutsideDomain(..))));
        assert!(matches!(
            partial_derivatives(&f, [0.5, 0.5], 9),
            Err(GeometryError::OrderTooHigh { .. })
        ));
    }

    #[test]
    fn spheroid_corner_interpolates() {
        let s = builtin_spheroid();
        let [cx, cy, cz, cw] = sphere_face_matrices();
        let p = eval_patch(&s, [0.0, 0.0]).unwrap();
        let expect = [1.5 * cx[0][0] / cw[0][0], -2.0 * cy[0][0] / cw[0][0], cz[0][0] / cw[0][0]];
        for c in 0..3 {
            assert!((p[c] - expect[c]).abs() < 1e-14);
        }
    }

    #[test]
    fn sphere_face_lies_on_unit_sphere() {
        let s = builtin_sphere_face();
        for &(u, v) in &[(0.0, 0.0), (0.3, 0.8), (0.5, 0.5), (1.0, 0.2)] {
            let p = eval_patch(&s, [u, v]).unwrap();
            assert!((norm(p) - 1.0).abs() < 1e-14, "radius {}", norm(p));
        }
    }
}
