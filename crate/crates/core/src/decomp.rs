//! Signed splitting of rectangles and triangles into origin-anchored pieces,
//! and the two-parameter normalization behind the lookup tables.

use crate::analytic::{
    definite_anchored, triangle_pullback, AnalyticError, AnchoredDomain, IntegerTriple, KernelIntegral,
    Rect,
};
use crate::geometry::Point2;
use crate::series::{Poly2, QuadraticForm};
use thiserror::Error;

/// Coordinates within this distance of the source are snapped onto it.
pub const TIE_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompError {
    #[error("degenerate domain")]
    Degenerate,
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

/// Origin-anchored piece: a rectangle with opposite corner `(x2, y2)` or a
/// triangle `0, v1, v2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Rect { x2: f64, y2: f64 },
    Tri { v1: Point2, v2: Point2 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedDomain {
    pub sign: i8,
    pub shape: Shape,
}

impl SignedDomain {
    pub fn anchored(&self) -> AnchoredDomain {
        match self.shape {
            Shape::Rect { x2, y2 } => {
                AnchoredDomain::Rect(Rect::new(x2.min(0.0), x2.max(0.0), y2.min(0.0), y2.max(0.0)))
            }
            Shape::Tri { v1, v2 } => AnchoredDomain::Tri { v1, v2 },
        }
    }

    pub fn area(&self) -> f64 {
        match self.shape {
            Shape::Rect { x2, y2 } => (x2 * y2).abs(),
            Shape::Tri { v1, v2 } => 0.5 * (v1[0] * v2[1] - v1[1] * v2[0]).abs(),
        }
    }
}

/// Domain in source-local coordinates (source at the origin).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalDomain {
    Rect(Rect),
    Tri([Point2; 3]),
}

impl LocalDomain {
    /// Image of a parameter-space domain under `z = s − t`.
    pub fn from_support(support: &LocalDomain, s: Point2) -> Self {
        match support {
            LocalDomain::Rect(r) => LocalDomain::Rect(Rect::new(s[0] - r.x1, s[0] - r.x0, s[1] - r.y1, s[1] - r.y0)),
            LocalDomain::Tri(v) => LocalDomain::Tri(v.map(|p| [s[0] - p[0], s[1] - p[1]])),
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            LocalDomain::Rect(r) => r.area().abs(),
            LocalDomain::Tri(v) => 0.5 * cross(v[0], v[1], v[2]).abs(),
        }
    }
}

fn snap(v: f64) -> f64 {
    if v.abs() <= TIE_TOL {
        0.0
    } else {
        v
    }
}

fn cross(a: Point2, b: Point2, c: Point2) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// `∫_{x0}^{x1} = ∫_0^{x1} − ∫_0^{x0}` in both directions; pieces touching an axis vanish.
pub fn decompose_rect(rect: &Rect) -> Vec<SignedDomain> {
    let (x0, x1) = (rect.x0.min(rect.x1), rect.x0.max(rect.x1));
    let (y0, y1) = (rect.y0.min(rect.y1), rect.y0.max(rect.y1));
    if !(x1 > x0 && y1 > y0) {
        return Vec::new();
    }
    let xs = [(snap(x1), 1i8), (snap(x0), -1i8)];
    let ys = [(snap(y1), 1i8), (snap(y0), -1i8)];
    let mut out = Vec::with_capacity(4);
    for (x, sx) in xs {
        for (y, sy) in ys {
            if x == 0.0 || y == 0.0 {
                continue;
            }
            // an oriented interval [0, x] with x < 0 carries an extra minus sign
            let orient = (x.signum() * y.signum()) as i8;
            out.push(SignedDomain { sign: sx * sy * orient, shape: Shape::Rect { x2: x, y2: y } });
        }
    }
    out
}

/// Fan from the origin over the three edges, signed by orientation.
pub fn decompose_tri(tri: &[Point2; 3]) -> Result<Vec<SignedDomain>, DecompError> {
    let area = cross(tri[0], tri[1], tri[2]);
    let scale = (0..3)
        .map(|k| {
            let e = [tri[(k + 1) % 3][0] - tri[k][0], tri[(k + 1) % 3][1] - tri[k][1]];
            e[0].hypot(e[1])
        })
        .fold(0.0, f64::max);
    if !(area.abs() > TIE_TOL * scale * scale) {
        return Err(DecompError::Degenerate);
    }
    let v: Vec<Point2> = tri.iter().map(|p| [snap(p[0]), snap(p[1])]).collect();
    let mut out = Vec::with_capacity(3);
    for k in 0..3 {
        let (a, b) = (v[k], v[(k + 1) % 3]);
        let c = a[0] * b[1] - a[1] * b[0];
        let na = a[0].hypot(a[1]);
        let nb = b[0].hypot(b[1]);
        if c.abs() <= TIE_TOL * na.max(nb).max(scale) * scale {
            continue;
        }
        let sign = if (c > 0.0) == (area > 0.0) { 1 } else { -1 };
        out.push(SignedDomain { sign, shape: Shape::Tri { v1: a, v2: b } });
    }
    Ok(out)
}

pub fn decompose(dom: &LocalDomain) -> Result<Vec<SignedDomain>, DecompError> {
    match dom {
        LocalDomain::Rect(r) => Ok(decompose_rect(r)),
        LocalDomain::Tri(t) => decompose_tri(t),
    }
}

/// `I = scale · ∫∫_{[0,1]²} R(1, b̄, c̄)^p x^q y^r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectNormalization {
    pub scale: f64,
    pub bbar: f64,
    pub cbar: f64,
}

/// Normalizes the piece itself (its sign is not folded into `scale`).
pub fn normalize_rect(
    d: &SignedDomain,
    form: &QuadraticForm,
    t: IntegerTriple,
) -> Result<RectNormalization, DecompError> {
    let Shape::Rect { x2, y2 } = d.shape else {
        return Err(DecompError::Degenerate);
    };
    if x2 == 0.0 || y2 == 0.0 {
        return Err(DecompError::Degenerate);
    }
    let (ax, ay) = (x2.abs(), y2.abs());
    let mut sign = 1.0;
    if x2 < 0.0 && t.q % 2 == 1 {
        sign = -sign;
    }
    if y2 < 0.0 && t.r % 2 == 1 {
        sign = -sign;
    }
    let scale = sign * ax.powi(t.p + t.q as i32 + 1) * ay.powi(t.r as i32 + 1) * form.a.powf(t.p as f64 / 2.0);
    let ratio = y2 / x2;
    Ok(RectNormalization { scale, bbar: form.b / form.a * ratio, cbar: form.c / form.a * ratio * ratio })
}

/// `I = |jac| Σ_i mix_i · scale · ∫_{T_ref} R(1, b̄, c̄)^p x^{q+r−i} y^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriNormalization {
    pub jac: f64,
    pub hat: QuadraticForm,
    pub mix: Vec<f64>,
    /// `â^{p/2}`
    pub scale: f64,
    pub bbar: f64,
    pub cbar: f64,
}

pub fn normalize_tri(
    d: &SignedDomain,
    form: &QuadraticForm,
    t: IntegerTriple,
) -> Result<TriNormalization, DecompError> {
    let Shape::Tri { v1, v2 } = d.shape else {
        return Err(DecompError::Degenerate);
    };
    let (jac, hat, mix) = triangle_pullback(v1, v2, form, t.q, t.r).map_err(|e| match e {
        AnalyticError::DegenerateDomain => DecompError::Degenerate,
        other => DecompError::Analytic(other),
    })?;
    Ok(TriNormalization {
        jac,
        scale: hat.a.powf(t.p as f64 / 2.0),
        bbar: hat.b / hat.a,
        cbar: hat.c / hat.a,
        hat,
        mix,
    })
}

/// `∫∫_dom Σ R^{p_l} P_l(z) · P(z) dz` as a signed sum over anchored pieces.
pub fn integrate_decomposed(
    terms: &[(i32, Poly2)],
    poly: &Poly2,
    form: &QuadraticForm,
    dom: &LocalDomain,
) -> Result<KernelIntegral, DecompError> {
    let mut out = KernelIntegral { value: 0.0, condition: 1.0, fundamental_integrals: 0, edge_quadrature: 0 };
    for piece in decompose(dom)? {
        let k = crate::analytic::integrate_rterms_poly(terms, poly, form, &piece.anchored())?;
        out.value += piece.sign as f64 * k.value;
        out.condition = out.condition.max(k.condition);
        out.fundamental_integrals += k.fundamental_integrals;
        out.edge_quadrature += k.edge_quadrature;
    }
    Ok(out)
}

/// Signed sum of one fundamental integral over the pieces of `dom`.
pub fn definite_decomposed(t: IntegerTriple, form: &QuadraticForm, dom: &LocalDomain) -> Result<f64, DecompError> {
    let mut v = 0.0;
    for piece in decompose(dom)? {
        v += piece.sign as f64 * definite_anchored(t, form, &piece.anchored())?.value;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signs(v: &[SignedDomain]) -> Vec<i8> {
        v.iter().map(|d| d.sign).collect()
    }

    #[test]
    fn rect_cases() {
        let inside = decompose_rect(&Rect::new(-0.3, 0.5, -0.2, 0.7));
        assert_eq!(signs(&inside), vec![1, 1, 1, 1]);
        let edge = decompose_rect(&Rect::new(0.0, 0.5, -0.2, 0.7));
        assert_eq!(signs(&edge), vec![1, 1]);
        let corner = decompose_rect(&Rect::new(0.0, 0.5, 0.0, 0.7));
        assert_eq!(signs(&corner), vec![1]);
        let outside = decompose_rect(&Rect::new(0.2, 0.5, 0.3, 0.7));
        assert_eq!(signs(&outside), vec![1, -1, -1, 1]);
        assert!(decompose_rect(&Rect::new(0.2, 0.2, 0.3, 0.7)).is_empty());
    }

    #[test]
    fn tri_cases() {
        let inside = decompose_tri(&[[-0.5, -0.4], [0.6, -0.3], [0.1, 0.8]]).unwrap();
        assert_eq!(signs(&inside), vec![1, 1, 1]);
        let vertex = decompose_tri(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(vertex.len(), 1);
        assert_eq!(vertex[0].sign, 1);
        // beyond the vertex (1,1) of the triangle (1,1),(2,1),(1,2)
        let mut s = signs(&decompose_tri(&[[1.0, 1.0], [2.0, 1.0], [1.0, 2.0]]).unwrap());
        s.sort();
        assert_eq!(s, vec![-1, -1, 1]);
        assert!(decompose_tri(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_err());
    }

    #[test]
    fn normalization_examples() {
        let e = QuadraticForm::euclidean();
        let t = IntegerTriple::new(-1, 0, 0).unwrap();
        let d = SignedDomain { sign: 1, shape: Shape::Rect { x2: 2.0, y2: 1.0 } };
        let n = normalize_rect(&d, &e, t).unwrap();
        assert_eq!((n.bbar, n.cbar), (0.0, 0.25));
        let f = QuadraticForm::new(1.0, 0.3, 0.8).unwrap();
        let d = SignedDomain { sign: 1, shape: Shape::Rect { x2: 1.0, y2: 1.0 } };
        let n = normalize_rect(&d, &f, t).unwrap();
        assert_eq!((n.bbar, n.cbar), (0.3, 0.8));
        let d = SignedDomain { sign: 1, shape: Shape::Tri { v1: [1.0, 0.0], v2: [0.0, 1.0] } };
        let n = normalize_tri(&d, &f, t).unwrap();
        assert_eq!(n.jac, 1.0);
        assert_eq!(n.hat, f);
    }
}
