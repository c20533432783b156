//! Closed-form integrals of `R^p x^q y^r` over origin-anchored rectangles and triangles.
//!
//! Everything is driven by one univariate engine for `J_p(k) = ∫ t^k Q(t)^{p/2} dt`
//! with `Q(t) = A t² + B w t + C w²`. Coefficients are Laurent polynomials in the
//! parameter `w`, so an expression is built once per triple and form and then
//! evaluated anywhere, generically over [`Scalar`].
//!
//! Rectangle antiderivatives use Euler's identity for homogeneous integrands:
//! with `ζ0 = p + q + r ≠ -2`,
//!
//! ```text
//! F(x, y) = [ x ∫_0^y f(x, η) dη + y ∫_0^x f(ξ, y) dξ ] / (ζ0 + 2)
//! ```
//!
//! satisfies `∂²F/∂x∂y = f` and vanishes on both axes, so the four-corner formula on
//! `[0,X]×[0,Y]` collapses to `F(X, Y)`. The case `ζ0 = -2` is written as a function
//! of `y/x` instead.

use crate::numeric::{binomial, Scalar};
use crate::quadrature::graded_integral;
use crate::series::{Poly2, QuadraticForm, SeriesError};
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock, RwLock};
use thiserror::Error;

/// Condition estimates above this value are reported as warnings.
pub const CONDITION_WARN: f64 = 1e12;

/// Closed forms whose condition estimate exceeds this switch to graded edge quadrature.
pub const CLOSED_FORM_MAX_CONDITION: f64 = 1e4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("invalid triple (p={p}, q={q}, r={r}): p must be odd and negative")]
    InvalidTriple { p: i32, q: u32, r: u32 },
    #[error("integral of R^{p} x^{q} y^{r} diverges on a domain touching the origin (ζ0 = {zeta0})")]
    Divergent { p: i32, q: u32, r: u32, zeta0: i32 },
    #[error("domain is not anchored at the origin")]
    NotAnchored,
    #[error("degenerate domain")]
    DegenerateDomain,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// `(p, q, r)` with `p` odd and negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntegerTriple {
    pub p: i32,
    pub q: u32,
    pub r: u32,
}

impl IntegerTriple {
    pub fn new(p: i32, q: u32, r: u32) -> Result<Self, AnalyticError> {
        if p >= 0 || p % 2 == 0 {
            return Err(AnalyticError::InvalidTriple { p, q, r });
        }
        Ok(Self { p, q, r })
    }

    pub fn zeta0(&self) -> i32 {
        self.p + self.q as i32 + self.r as i32
    }
}

/// Axis-aligned rectangle `[x0,x1]×[y0,y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 1.0, 0.0, 1.0)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    /// Opposite corner `(X, Y)` of an origin-cornered rectangle, signs included.
    pub fn anchored_corner(&self) -> Result<(f64, f64), AnalyticError> {
        let x = if self.x0 == 0.0 {
            self.x1
        } else if self.x1 == 0.0 {
            self.x0
        } else {
            return Err(AnalyticError::NotAnchored);
        };
        let y = if self.y0 == 0.0 {
            self.y1
        } else if self.y1 == 0.0 {
            self.y0
        } else {
            return Err(AnalyticError::NotAnchored);
        };
        Ok((x, y))
    }
}

/// Sum `Σ c_k w^k` with integer `k`.
///
/// Each coefficient carries the sum of the absolute values of its contributions,
/// so cancellation inside the recursions shows up in the condition estimate.
#[derive(Debug, Clone, Default, PartialEq)]
struct Laurent(BTreeMap<i32, (f64, f64)>);

impl Laurent {
    fn mono(k: i32, c: f64) -> Self {
        let mut m = BTreeMap::new();
        if c != 0.0 {
            m.insert(k, (c, c.abs()));
        }
        Self(m)
    }

    fn is_zero(&self) -> bool {
        self.0.values().all(|c| c.0 == 0.0)
    }

    fn add_shifted(&mut self, other: &Laurent, shift: i32, c: f64) {
        for (k, (v, m)) in &other.0 {
            let e = self.0.entry(k + shift).or_insert((0.0, 0.0));
            e.0 += c * v;
            e.1 += c.abs() * m;
        }
    }

    fn sum_at_one(&self) -> f64 {
        self.0.values().map(|v| v.0).sum()
    }

    /// Value and the magnitude bound `Σ |c_k|⁺ |w|^k`.
    fn eval<T: Scalar>(&self, w: T) -> (T, f64) {
        let mut acc = T::from_f64(0.0);
        let mut mag = 0.0;
        let wa = w.re().abs();
        for (k, (c, m)) in &self.0 {
            if *c != 0.0 {
                acc = acc + w.powi(*k).scale(*c);
            }
            mag += m * wa.powi(*k);
        }
        (acc, mag)
    }
}

/// Univariate antiderivative in `t` with parameter `w`.
///
/// `Σ coef(w) t^i Q^{e/2} + la(w)·ln(2√A √Q + 2At + Bw) + lc(w)·ln(2C + Bt + 2√C √Q) + lt(w)·ln|t|`.
/// The last two kinds only occur with `w ≡ 1`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UExpr {
    alg: BTreeMap<(u32, i32), Laurent>,
    la: Laurent,
    lc: Laurent,
    lt: Laurent,
}

impl UExpr {
    fn alg_term(i: u32, e: i32, coef: Laurent) -> Self {
        let mut out = Self::default();
        out.alg.insert((i, e), coef);
        out
    }

    /// `self += c w^shift · other`.
    fn add_scaled(&mut self, other: &UExpr, shift: i32, c: f64) {
        if c == 0.0 {
            return;
        }
        for (key, coef) in &other.alg {
            self.alg.entry(*key).or_default().add_shifted(coef, shift, c);
        }
        self.la.add_shifted(&other.la, shift, c);
        self.lc.add_shifted(&other.lc, shift, c);
        self.lt.add_shifted(&other.lt, shift, c);
    }

    fn scaled(&self, shift: i32, c: f64) -> Self {
        let mut out = Self::default();
        out.add_scaled(self, shift, c);
        out
    }

    fn has_logs(&self) -> bool {
        !(self.la.is_zero() && self.lc.is_zero() && self.lt.is_zero())
    }

    /// Evaluates with `sq = √Q(t)`; returns the value and the largest term magnitude.
    fn eval_terms<T: Scalar>(&self, q: &Quad, t: T, w: T, sq: T) -> (T, f64) {
        let mut acc = T::from_f64(0.0);
        let mut big = 0.0f64;
        let mut push = |(c, m): (T, f64), f: T| {
            big = big.max(m * f.re().abs());
            acc = acc + c * f;
        };
        for ((i, e), coef) in &self.alg {
            if coef.is_zero() {
                continue;
            }
            let base = if *i == 0 { T::from_f64(1.0) } else { t.powi(*i as i32) };
            push(coef.eval(w), base * sq.powi(*e));
        }
        if !self.la.is_zero() {
            let arg = sq.scale(2.0 * q.a.sqrt()) + t.scale(2.0 * q.a) + w.scale(q.b);
            push(self.la.eval(w), arg.ln());
        }
        if !self.lc.is_zero() {
            let arg = T::from_f64(2.0 * q.c) + t.scale(q.b) + sq.scale(2.0 * q.c.sqrt());
            push(self.lc.eval(w), arg.ln());
        }
        if !self.lt.is_zero() {
            push(self.lt.eval(w), t.abs().ln());
        }
        (acc, big)
    }
}

/// Coefficients of `Q(t) = A t² + B w t + C w²`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Quad {
    a: f64,
    b: f64,
    c: f64,
}

impl Quad {
    fn disc(&self) -> f64 {
        4.0 * self.a * self.c - self.b * self.b
    }

    fn eval<T: Scalar>(&self, t: T, w: T) -> T {
        (t * t).scale(self.a) + (t * w).scale(self.b) + (w * w).scale(self.c)
    }
}

/// Memoized recursion for `J_p(k)` and `L_p = ∫ t^{-1} Q^{p/2} dt`.
struct Engine {
    q: Quad,
    j: HashMap<(i32, u32), UExpr>,
    l: HashMap<i32, UExpr>,
}

impl Engine {
    fn new(q: Quad) -> Self {
        Self { q, j: HashMap::new(), l: HashMap::new() }
    }

    fn j(&mut self, p: i32, k: u32) -> UExpr {
        if let Some(e) = self.j.get(&(p, k)) {
            return e.clone();
        }
        let Quad { a, b, c } = self.q;
        let d = self.q.disc();
        let out = if k == 0 {
            if p == -1 {
                UExpr { la: Laurent::mono(0, 1.0 / a.sqrt()), ..Default::default() }
            } else {
                // ∫Q^{p/2} = [2A(p+3) J_{p+2}(0) − (2At + Bw) Q^{(p+2)/2}] / ((p+2)/2 · D w²)
                let s = (p + 2) as f64 / 2.0;
                let mut e = UExpr::default();
                e.add_scaled(&self.j(p + 2, 0), -2, 2.0 * a * (p + 3) as f64 / (s * d));
                e.add_scaled(&UExpr::alg_term(1, p + 2, Laurent::mono(-2, -2.0 * a / (s * d))), 0, 1.0);
                e.add_scaled(&UExpr::alg_term(0, p + 2, Laurent::mono(-1, -b / (s * d))), 0, 1.0);
                e
            }
        } else if k == 1 {
            // [Q^{(p+2)/2} − Bw (p+2)/2 J_p(0)] / (A (p+2))
            let p2 = (p + 2) as f64;
            let mut e = UExpr::alg_term(0, p + 2, Laurent::mono(0, 1.0 / (a * p2)));
            e.add_scaled(&self.j(p, 0), 1, -b / (2.0 * a));
            e
        } else if p == -1 {
            // A k J(k) = t^{k-1} Q^{1/2} − Bw (k − 1/2) J(k−1) − (k−1) C w² J(k−2)
            let kf = k as f64;
            let mut e = UExpr::alg_term(k - 1, 1, Laurent::mono(0, 1.0 / (a * kf)));
            e.add_scaled(&self.j(-1, k - 1), 1, -b * (kf - 0.5) / (a * kf));
            e.add_scaled(&self.j(-1, k - 2), 2, -c * (kf - 1.0) / (a * kf));
            e
        } else {
            // J_p(k) = [J_{p+2}(k−2) − Bw J_p(k−1) − C w² J_p(k−2)] / A
            let mut e = self.j(p + 2, k - 2).scaled(0, 1.0 / a);
            e.add_scaled(&self.j(p, k - 1), 1, -b / a);
            e.add_scaled(&self.j(p, k - 2), 2, -c / a);
            e
        };
        self.j.insert((p, k), out.clone());
        out
    }

    /// `∫ Q^{p/2} / t dt`, valid for `w ≡ 1`.
    fn l(&mut self, p: i32) -> UExpr {
        if let Some(e) = self.l.get(&p) {
            return e.clone();
        }
        let Quad { a, b, c } = self.q;
        let out = if p == -1 {
            let k = -1.0 / c.sqrt();
            UExpr { lc: Laurent::mono(0, k), lt: Laurent::mono(0, -k), ..Default::default() }
        } else {
            // L_p = (L_{p+2} − A J_p(1) − B J_p(0)) / C
            let mut e = self.l(p + 2).scaled(0, 1.0 / c);
            e.add_scaled(&self.j(p, 1), 0, -a / c);
            e.add_scaled(&self.j(p, 0), 0, -b / c);
            e
        };
        self.l.insert(p, out.clone());
        out
    }
}

/// Antiderivative of `R^p x^q` in `x`, treating `y` as a parameter.
#[derive(Debug, Clone)]
pub struct InnerAntiderivative {
    p: i32,
    q: u32,
    quad: Quad,
    expr: UExpr,
}

impl InnerAntiderivative {
    /// Evaluates at `(x, y)`; `∂/∂x` of the result is `R(x,y)^p x^q`.
    pub fn eval<T: Scalar>(&self, x: T, y: T) -> T {
        let sq = self.quad.eval(x, y).sqrt();
        self.expr.eval_terms(&self.quad, x, y, sq).0
    }

    pub fn powers(&self) -> (i32, u32) {
        (self.p, self.q)
    }
}

/// `∫ R^p x^q dx` built by the `p`/`q` recursions.
pub fn inner_antiderivative(
    p: i32,
    q: u32,
    form: &QuadraticForm,
) -> Result<InnerAntiderivative, AnalyticError> {
    IntegerTriple::new(p, q, 0)?;
    let quad = Quad { a: form.a, b: form.b, c: form.c };
    let expr = Engine::new(quad).j(p, q);
    Ok(InnerAntiderivative { p, q, quad, expr })
}

#[derive(Debug, Clone)]
enum RectKind {
    /// `ax = ∫R^p x^q dx` in `(t=x, w=y)`, `ay = ∫R^p y^r dy` in `(t=y, w=x)`.
    Homogeneous { ax: UExpr, qx: Quad, ay: UExpr, qy: Quad },
    /// `ζ0 = -2`: `F = h(y/x)` where `|y| ≤ |x|`, `F = k(x/y)` elsewhere, so the
    /// ratio never exceeds one. The two branches differ by a function of one variable.
    Ratio { by_x: RatioBranch, by_y: RatioBranch },
}

/// `h(u)` for positive and (through reflection) negative denominators.
#[derive(Debug, Clone)]
struct RatioBranch {
    pos: UExpr,
    q_pos: Quad,
    neg: UExpr,
    q_neg: Quad,
    /// Power of the denominator variable in the integrand.
    power: u32,
}

impl RatioBranch {
    fn new(p: i32, power: u32, other: u32, form: &QuadraticForm) -> Self {
        let (pos, q_pos) = ratio_expr(p, other, form);
        let refl = QuadraticForm { a: form.a, b: -form.b, c: form.c };
        let (neg, q_neg) = ratio_expr(p, other, &refl);
        Self { pos, q_pos, neg, q_neg, power }
    }

    /// `h(num/den)` with the sign of the reflection for `den < 0`.
    fn eval<T: Scalar>(&self, den: T, num: T) -> (T, f64) {
        let one = T::from_f64(1.0);
        if den.re() > 0.0 {
            let u = num / den;
            self.pos.eval_terms(&self.q_pos, u, one, self.q_pos.eval(u, one).sqrt())
        } else {
            let u = num / (-den);
            let (v, m) = self.neg.eval_terms(&self.q_neg, u, one, self.q_neg.eval(u, one).sqrt());
            let sign = if self.power % 2 == 0 { -1.0 } else { 1.0 };
            (v.scale(sign), m)
        }
    }
}

/// Antiderivative `F` of `R^p x^q y^r` with `∂²F/∂x∂y = R^p x^q y^r` off the axes.
#[derive(Debug, Clone)]
pub struct RectAntiderivative {
    triple: IntegerTriple,
    form: QuadraticForm,
    kind: RectKind,
}

impl RectAntiderivative {
    pub fn triple(&self) -> IntegerTriple {
        self.triple
    }

    pub fn form(&self) -> QuadraticForm {
        self.form
    }

    /// `F(x, y)`; requires `x ≠ 0` and `y ≠ 0`.
    pub fn eval<T: Scalar>(&self, x: T, y: T) -> T {
        self.eval_with_magnitude(x, y).0
    }

    /// Value together with the largest intermediate term magnitude.
    pub fn eval_with_magnitude<T: Scalar>(&self, x: T, y: T) -> (T, f64) {
        let IntegerTriple { q, r, .. } = self.triple;
        match &self.kind {
            RectKind::Homogeneous { ax, qx, ay, qy } => {
                let z2 = (self.triple.zeta0() + 2) as f64;
                let zero = T::from_f64(0.0);
                let sq = qx.eval(x, y).sqrt();
                let (ay1, m1) = ay.eval_terms(qy, y, x, sq);
                let (ay0, m2) = ay.eval_terms(qy, zero, x, qy.eval(zero, x).sqrt());
                let (ax1, m3) = ax.eval_terms(qx, x, y, sq);
                let (ax0, m4) = ax.eval_terms(qx, zero, y, qx.eval(zero, y).sqrt());
                let xs = x.powi(q as i32 + 1);
                let ys = y.powi(r as i32 + 1);
                let v = (xs * (ay1 - ay0) + ys * (ax1 - ax0)).scale(1.0 / z2);
                let big = (xs.re().abs() * m1.max(m2) + ys.re().abs() * m3.max(m4)) / z2.abs();
                (v, big)
            }
            RectKind::Ratio { by_x, by_y } => {
                if y.re().abs() <= x.re().abs() {
                    by_x.eval(x, y)
                } else {
                    by_y.eval(y, x)
                }
            }
        }
    }
}

/// `h(u) = -∫ G(u)/u du` with `G = ∫ R(1,u)^p u^r du`, for `ζ0 = -2`.
fn ratio_expr(p: i32, r: u32, form: &QuadraticForm) -> (UExpr, Quad) {
    let quad = Quad { a: form.c, b: form.b, c: form.a };
    let mut eng = Engine::new(quad);
    let g = eng.j(p, r);
    debug_assert!(!g.has_logs(), "ζ0 = -2 never produces logarithms in the inner integral");
    let mut h = UExpr::default();
    for ((i, e), coef) in &g.alg {
        let c0 = coef.sum_at_one();
        if c0 == 0.0 {
            continue;
        }
        let piece = if *i == 0 { eng.l(*e) } else { eng.j(*e, i - 1) };
        h.add_scaled(&piece, 0, -c0);
    }
    (h, quad)
}

fn build_rect(t: IntegerTriple, form: &QuadraticForm) -> RectAntiderivative {
    let kind = if t.zeta0() == -2 {
        RectKind::Ratio {
            by_x: RatioBranch::new(t.p, t.q, t.r, form),
            by_y: RatioBranch::new(t.p, t.r, t.q, &form.swapped()),
        }
    } else {
        let qx = Quad { a: form.a, b: form.b, c: form.c };
        let qy = Quad { a: form.c, b: form.b, c: form.a };
        let ax = Engine::new(qx).j(t.p, t.q);
        let ay = Engine::new(qy).j(t.p, t.r);
        RectKind::Homogeneous { ax, qx, ay, qy }
    };
    RectAntiderivative { triple: t, form: *form, kind }
}

type CacheKey = (IntegerTriple, [u64; 3]);

fn cache_key(t: IntegerTriple, form: &QuadraticForm) -> CacheKey {
    (t, [form.a.to_bits(), form.b.to_bits(), form.c.to_bits()])
}

fn rect_cache() -> &'static RwLock<HashMap<CacheKey, Arc<RectAntiderivative>>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, Arc<RectAntiderivative>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn tri_cache() -> &'static RwLock<HashMap<CacheKey, Arc<TriAntiderivative>>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, Arc<TriAntiderivative>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Cached rectangle antiderivative; built once per `(p, q, r, form)`.
pub fn rect_antiderivative(
    t: IntegerTriple,
    form: &QuadraticForm,
) -> Result<Arc<RectAntiderivative>, AnalyticError> {
    IntegerTriple::new(t.p, t.q, t.r)?;
    let key = cache_key(t, form);
    if let Some(hit) = rect_cache().read().expect("cache lock").get(&key) {
        return Ok(hit.clone());
    }
    let built = Arc::new(build_rect(t, form));
    let mut w = rect_cache().write().expect("cache lock");
    Ok(w.entry(key).or_insert(built).clone())
}

/// How a definite value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalPath {
    ClosedForm,
    /// The closed form cancelled too badly; the one-dimensional edge integrals
    /// of the same boundary formula were summed by graded Gauss–Legendre instead.
    EdgeQuadrature,
}

/// Definite value with a condition estimate (largest term over result).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Definite {
    pub value: f64,
    pub condition: f64,
    /// Condition estimate of the closed form, also when it was not used.
    pub closed_form_condition: f64,
    pub path: EvalPath,
}

impl Definite {
    fn closed(value: f64, condition: f64) -> Self {
        Self { value, condition, closed_form_condition: condition, path: EvalPath::ClosedForm }
    }
}

fn condition(big: f64, value: f64) -> f64 {
    if value == 0.0 {
        if big == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        (big / value.abs()).max(1.0)
    }
}

/// `∫∫ R^p x^q y^r` over a rectangle with a corner at the origin.
pub fn definite_rect(
    t: IntegerTriple,
    form: &QuadraticForm,
    rect: &Rect,
) -> Result<f64, AnalyticError> {
    definite_rect_diag(t, form, rect).map(|d| d.value)
}

pub fn definite_rect_diag(
    t: IntegerTriple,
    form: &QuadraticForm,
    rect: &Rect,
) -> Result<Definite, AnalyticError> {
    rect_impl(t, form, rect, true)
}

/// Like [`definite_rect_diag`] but never touches the expression cache; used for
/// table builds where every cell has its own form.
pub fn definite_rect_uncached(
    t: IntegerTriple,
    form: &QuadraticForm,
    rect: &Rect,
) -> Result<Definite, AnalyticError> {
    rect_impl(t, form, rect, false)
}

fn rect_impl(t: IntegerTriple, form: &QuadraticForm, rect: &Rect, cached: bool) -> Result<Definite, AnalyticError> {
    IntegerTriple::new(t.p, t.q, t.r)?;
    let (x, y) = rect.anchored_corner()?;
    if t.zeta0() <= -2 {
        return Err(AnalyticError::Divergent { p: t.p, q: t.q, r: t.r, zeta0: t.zeta0() });
    }
    if x == 0.0 || y == 0.0 {
        return Ok(Definite::closed(0.0, 1.0));
    }
    // Reflect into the first quadrant: x → -x flips b and contributes (-1)^q.
    let (sx, sy) = (x.signum(), y.signum());
    let mut sign = 1.0;
    if sx < 0.0 && t.q % 2 == 1 {
        sign = -sign;
    }
    if sy < 0.0 && t.r % 2 == 1 {
        sign = -sign;
    }
    let f = QuadraticForm { a: form.a, b: form.b * sx * sy, c: form.c };
    let anti = if cached { rect_antiderivative(t, &f)? } else { Arc::new(build_rect(t, &f)) };
    let (v, big) = anti.eval_with_magnitude(x.abs(), y.abs());
    let cond = condition(big, v);
    if cond <= CLOSED_FORM_MAX_CONDITION {
        return Ok(Definite::closed(sign * v, cond));
    }
    let g = rect_by_edges(t, &f, x.abs(), y.abs());
    Ok(Definite {
        value: sign * g,
        condition: 1.0,
        closed_form_condition: cond,
        path: EvalPath::EdgeQuadrature,
    })
}

/// Same boundary formula as the closed form with the two edge integrals done numerically.
fn rect_by_edges(t: IntegerTriple, f: &QuadraticForm, x: f64, y: f64) -> f64 {
    let (p, q, r) = (t.p, t.q as i32, t.r as i32);
    let sd = f.discriminant().sqrt();
    let g = |u: f64, w: f64| f.r(u, w).powi(p) * u.powi(q) * w.powi(r);
    let e1 = graded_integral(|eta| g(x, eta), 0.0, y, -f.b * x / (2.0 * f.c), sd * x / (2.0 * f.c));
    let e2 = graded_integral(|xi| g(xi, y), 0.0, x, -f.b * y / (2.0 * f.a), sd * y / (2.0 * f.a));
    (x * e1 + y * e2) / (t.zeta0() + 2) as f64
}

/// Edge antiderivative for the reference triangle `(0,0),(1,0),(0,1)`.
///
/// `d/dτ` of the expression is `R̂(τ)^p (1−τ)^q τ^r` with
/// `R̂(τ)² = R(1−τ, τ)² = a + (b − 2a) τ + (a − b + c) τ²`.
#[derive(Debug, Clone)]
pub struct TriAntiderivative {
    triple: IntegerTriple,
    quad: Quad,
    expr: UExpr,
}

impl TriAntiderivative {
    pub fn eval<T: Scalar>(&self, tau: T) -> T {
        self.eval_with_magnitude(tau).0
    }

    fn eval_with_magnitude<T: Scalar>(&self, tau: T) -> (T, f64) {
        let one = T::from_f64(1.0);
        let sq = self.quad.eval(tau, one).sqrt();
        self.expr.eval_terms(&self.quad, tau, one, sq)
    }

    pub fn triple(&self) -> IntegerTriple {
        self.triple
    }

    /// `(â, b̂, ĉ)` of the substituted quadratic in `τ` (constant, linear, quadratic coefficient).
    pub fn hatted(&self) -> (f64, f64, f64) {
        (self.quad.c, self.quad.b, self.quad.a)
    }
}

/// Hatted form on the hypotenuse: `(a, b − 2a, a − b + c)`.
pub fn hatted_form(form: &QuadraticForm) -> (f64, f64, f64) {
    (form.a, form.b - 2.0 * form.a, form.a - form.b + form.c)
}

pub fn tri_antiderivative(
    t: IntegerTriple,
    form: &QuadraticForm,
) -> Result<Arc<TriAntiderivative>, AnalyticError> {
    IntegerTriple::new(t.p, t.q, t.r)?;
    let key = cache_key(t, form);
    if let Some(hit) = tri_cache().read().expect("cache lock").get(&key) {
        return Ok(hit.clone());
    }
    let built = Arc::new(build_tri(t, form));
    let mut w = tri_cache().write().expect("cache lock");
    Ok(w.entry(key).or_insert(built).clone())
}

fn build_tri(t: IntegerTriple, form: &QuadraticForm) -> TriAntiderivative {
    let (ha, hb, hc) = hatted_form(form);
    let quad = Quad { a: hc, b: hb, c: ha };
    let mut eng = Engine::new(quad);
    let mut expr = UExpr::default();
    // (1−τ)^q τ^r = Σ_j C(q,j) (−1)^j τ^{r+j}
    for j in 0..=t.q {
        let c = binomial(t.q, j) * if j % 2 == 0 { 1.0 } else { -1.0 };
        expr.add_scaled(&eng.j(t.p, t.r + j), 0, c);
    }
    TriAntiderivative { triple: t, quad, expr }
}

/// `∫∫ R^p x^q y^r` over the reference triangle `(0,0),(1,0),(0,1)`.
pub fn definite_tri(t: IntegerTriple, form: &QuadraticForm) -> Result<f64, AnalyticError> {
    definite_tri_diag(t, form).map(|d| d.value)
}

pub fn definite_tri_diag(t: IntegerTriple, form: &QuadraticForm) -> Result<Definite, AnalyticError> {
    tri_impl(t, form, true)
}

/// Uncached variant of [`definite_tri_diag`].
pub fn definite_tri_uncached(t: IntegerTriple, form: &QuadraticForm) -> Result<Definite, AnalyticError> {
    tri_impl(t, form, false)
}

fn tri_impl(t: IntegerTriple, form: &QuadraticForm, cached: bool) -> Result<Definite, AnalyticError> {
    IntegerTriple::new(t.p, t.q, t.r)?;
    if t.zeta0() <= -2 {
        return Err(AnalyticError::Divergent { p: t.p, q: t.q, r: t.r, zeta0: t.zeta0() });
    }
    let anti = if cached { tri_antiderivative(t, form)? } else { Arc::new(build_tri(t, form)) };
    let (g1, m1) = anti.eval_with_magnitude(1.0f64);
    let (g0, m0) = anti.eval_with_magnitude(0.0f64);
    let z2 = (t.zeta0() + 2) as f64;
    let value = (g1 - g0) / z2;
    let cond = condition(m1.max(m0) / z2, value);
    if cond <= CLOSED_FORM_MAX_CONDITION {
        return Ok(Definite::closed(value, cond));
    }
    let (ha, hb, hc) = hatted_form(form);
    let (p, q, r) = (t.p, t.q as i32, t.r as i32);
    let sd = (4.0 * ha * hc - hb * hb).sqrt();
    let e = graded_integral(
        |tau| (ha + hb * tau + hc * tau * tau).sqrt().powi(p) * (1.0 - tau).powi(q) * tau.powi(r),
        0.0,
        1.0,
        -hb / (2.0 * hc),
        sd / (2.0 * hc),
    );
    Ok(Definite {
        value: e / z2,
        condition: 1.0,
        closed_form_condition: cond,
        path: EvalPath::EdgeQuadrature,
    })
}

/// Origin-anchored integration domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnchoredDomain {
    Rect(Rect),
    /// Triangle with vertices `0, v1, v2`.
    Tri { v1: [f64; 2], v2: [f64; 2] },
}

/// Maps the triangle `0, v1, v2` onto the reference triangle.
///
/// Returns the signed Jacobian, the pulled-back form and the coefficients
/// `m_i` of `(x1 x + x2 y)^q (y1 x + y2 y)^r = Σ m_i x^{q+r−i} y^i`.
pub fn triangle_pullback(
    v1: [f64; 2],
    v2: [f64; 2],
    form: &QuadraticForm,
    q: u32,
    r: u32,
) -> Result<(f64, QuadraticForm, Vec<f64>), AnalyticError> {
    let [x1, y1] = v1;
    let [x2, y2] = v2;
    let jac = x1 * y2 - x2 * y1;
    if jac == 0.0 {
        return Err(AnalyticError::DegenerateDomain);
    }
    let QuadraticForm { a, b, c } = *form;
    let fa = a * x1 * x1 + b * x1 * y1 + c * y1 * y1;
    let fb = 2.0 * a * x1 * x2 + b * x2 * y1 + b * x1 * y2 + 2.0 * c * y1 * y2;
    let fc = a * x2 * x2 + b * x2 * y2 + c * y2 * y2;
    let hat = QuadraticForm::new(fa, fb, fc)?;
    // coefficients in powers of y (index i), starting from 1
    let mut mix = vec![1.0];
    let mul = |m: &Vec<f64>, cx: f64, cy: f64| {
        let mut out = vec![0.0; m.len() + 1];
        for (i, v) in m.iter().enumerate() {
            out[i] += v * cx;
            out[i + 1] += v * cy;
        }
        out
    };
    for _ in 0..q {
        mix = mul(&mix, x1, x2);
    }
    for _ in 0..r {
        mix = mul(&mix, y1, y2);
    }
    Ok((jac, hat, mix))
}

/// `(1/(ζ0+2)) ∫_0^1 f(v1 + τ(v2 − v1)) dτ`, the far-edge form of the triangle integral.
fn tri_edge_integral(t: IntegerTriple, form: &QuadraticForm, v1: [f64; 2], v2: [f64; 2]) -> f64 {
    let e = [v2[0] - v1[0], v2[1] - v1[1]];
    let QuadraticForm { a, b, c } = *form;
    let q0 = form.r2(v1[0], v1[1]);
    let q1 = 2.0 * a * v1[0] * e[0] + b * (v1[0] * e[1] + v1[1] * e[0]) + 2.0 * c * v1[1] * e[1];
    let q2 = form.r2(e[0], e[1]);
    let sd = (4.0 * q0 * q2 - q1 * q1).max(0.0).sqrt();
    let (p, q, r) = (t.p, t.q as i32, t.r as i32);
    let g = |tau: f64| {
        let (x, y) = (v1[0] + tau * e[0], v1[1] + tau * e[1]);
        (q0 + q1 * tau + q2 * tau * tau).sqrt().powi(p) * x.powi(q) * y.powi(r)
    };
    graded_integral(g, 0.0, 1.0, -q1 / (2.0 * q2), sd / (2.0 * q2)) / (t.zeta0() + 2) as f64
}

/// `∫∫ R^p x^q y^r` over an origin-anchored domain.
pub fn definite_anchored(
    t: IntegerTriple,
    form: &QuadraticForm,
    dom: &AnchoredDomain,
) -> Result<Definite, AnalyticError> {
    match dom {
        AnchoredDomain::Rect(r) => definite_rect_diag(t, form, r),
        AnchoredDomain::Tri { v1, v2 } => {
            IntegerTriple::new(t.p, t.q, t.r)?;
            if t.zeta0() <= -2 {
                return Err(AnalyticError::Divergent { p: t.p, q: t.q, r: t.r, zeta0: t.zeta0() });
            }
            let (jac, hat, mix) = triangle_pullback(*v1, *v2, form, t.q, t.r)?;
            let n = t.q + t.r;
            let mut value = 0.0;
            let mut big = 0.0f64;
            let mut closed_big = 0.0f64;
            let mut path = EvalPath::ClosedForm;
            for (i, m) in mix.iter().enumerate() {
                if *m == 0.0 {
                    continue;
                }
                let d = definite_tri_diag(IntegerTriple::new(t.p, n - i as u32, i as u32)?, &hat)?;
                value += m * d.value;
                big = big.max((m * d.value).abs() * d.condition);
                closed_big = closed_big.max((m * d.value).abs() * d.closed_form_condition);
                if d.path == EvalPath::EdgeQuadrature {
                    path = EvalPath::EdgeQuadrature;
                }
            }
            let value = jac.abs() * value;
            let closed_form_condition = condition(closed_big * jac.abs(), value);
            let cond = condition(big * jac.abs(), value);
            if cond <= CLOSED_FORM_MAX_CONDITION {
                return Ok(Definite { value, condition: cond, closed_form_condition, path });
            }
            Ok(Definite {
                value: jac.abs() * tri_edge_integral(t, form, *v1, *v2),
                condition: 1.0,
                closed_form_condition,
                path: EvalPath::EdgeQuadrature,
            })
        }
    }
}

/// Result of integrating a truncated kernel against a polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelIntegral {
    pub value: f64,
    pub condition: f64,
    pub fundamental_integrals: usize,
    /// Fundamental integrals that fell back to edge quadrature.
    pub edge_quadrature: usize,
}

/// `∫∫ Σ_l R^{p_l} P_l(z) · P(z) dz` over an origin-anchored domain, grouped by triple.
pub fn integrate_rterms_poly(
    terms: &[(i32, Poly2)],
    poly: &Poly2,
    form: &QuadraticForm,
    dom: &AnchoredDomain,
) -> Result<KernelIntegral, AnalyticError> {
    let mut grouped: BTreeMap<IntegerTriple, f64> = BTreeMap::new();
    for (p, kp) in terms {
        let prod = kp.mul(poly);
        for ((q, r), c) in prod.terms() {
            let t = IntegerTriple::new(*p, q, r)?;
            *grouped.entry(t).or_insert(0.0) += c;
        }
    }
    let mut value = 0.0;
    let mut big = 0.0f64;
    let mut count = 0;
    let mut fallback = 0;
    for (t, c) in grouped {
        if c == 0.0 {
            continue;
        }
        if t.zeta0() <= -2 {
            return Err(AnalyticError::Divergent { p: t.p, q: t.q, r: t.r, zeta0: t.zeta0() });
        }
        let d = definite_anchored(t, form, dom)?;
        value += c * d.value;
        big = big.max((c * d.value).abs() * d.condition);
        count += 1;
        if d.path == EvalPath::EdgeQuadrature {
            fallback += 1;
        }
    }
    Ok(KernelIntegral {
        value,
        condition: condition(big, value),
        fundamental_integrals: count,
        edge_quadrature: fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::HyperDual;

    fn mixed<F: Fn(HyperDual, HyperDual) -> HyperDual>(f: F, x: f64, y: f64) -> f64 {
        f(HyperDual::new(x, 1.0, 0.0, 0.0), HyperDual::new(y, 0.0, 1.0, 0.0)).d12
    }

    #[test]
    fn inner_examples() {
        let e = QuadraticForm::euclidean();
        let i = inner_antiderivative(-1, 0, &e).unwrap();
        let (x, y) = (0.7f64, 1.3f64);
        let want = (2.0 * (x * x + y * y).sqrt() + 2.0 * x).ln();
        assert!((i.eval(x, y) - want).abs() < 1e-15);
        let f = QuadraticForm::new(1.3, 0.4, 0.9).unwrap();
        for (p, q) in [(-1, 1), (-3, 1), (-5, 4), (-1, 5)] {
            let i = inner_antiderivative(p, q, &f).unwrap();
            let d = i.eval(HyperDual::new(x, 1.0, 0.0, 0.0), HyperDual::constant(y)).d1;
            let want = f.r(x, y).powi(p) * x.powi(q as i32);
            assert!((d - want).abs() < 1e-12 * want.abs(), "p={p} q={q}: {d} vs {want}");
        }
        assert!(inner_antiderivative(-2, 0, &f).is_err());
        assert!(inner_antiderivative(1, 0, &f).is_err());
    }

    #[test]
    fn inner_p1_lemma_form() {
        let f = QuadraticForm::new(2.0, 0.6, 1.1).unwrap();
        let (x, y) = (0.4, -0.9);
        let i11 = inner_antiderivative(-1, 1, &f).unwrap().eval(x, y);
        let i10 = inner_antiderivative(-1, 0, &f).unwrap().eval(x, y);
        let want = f.r(x, y) / f.a - f.b / (2.0 * f.a) * y * i10;
        assert!((i11 - want).abs() < 1e-14);
    }

    #[test]
    fn rect_mixed_partial() {
        let f = QuadraticForm::new(1.3, -0.5, 0.8).unwrap();
        for &(p, q, r) in &[(-1, 0, 0), (-3, 1, 1), (-3, 1, 0), (-5, 2, 1), (-7, 0, 0), (-1, 2, 1)] {
            let t = IntegerTriple::new(p, q, r).unwrap();
            let a = rect_antiderivative(t, &f).unwrap();
            for &(x, y) in &[(0.3, 0.8), (-0.7, 0.4), (1.1, -0.2), (-0.5, -0.6)] {
                let got = mixed(|x, y| a.eval(x, y), x, y);
                let want = f.r(x, y).powi(p) * x.powi(q as i32) * y.powi(r as i32);
                assert!((got - want).abs() < 1e-9 * want.abs(), "{t:?} at ({x},{y}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn anchors() {
        let e = QuadraticForm::euclidean();
        let t = IntegerTriple::new(-1, 0, 0).unwrap();
        let sq = definite_rect(t, &e, &Rect::unit()).unwrap();
        assert!((sq - 2.0 * (1.0 + 2f64.sqrt()).ln()).abs() < 1e-14);
        let tri = definite_tri(t, &e).unwrap();
        assert!((tri - 2f64.sqrt() * (1.0 + 2f64.sqrt()).ln()).abs() < 1e-14);
        assert_eq!(definite_rect(t, &e, &Rect::new(0.0, 1.0, 0.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn divergence_and_anchor_errors() {
        let e = QuadraticForm::euclidean();
        let t = IntegerTriple::new(-3, 0, 0).unwrap();
        assert!(matches!(definite_rect(t, &e, &Rect::unit()), Err(AnalyticError::Divergent { .. })));
        let t = IntegerTriple::new(-1, 0, 0).unwrap();
        assert!(matches!(
            definite_rect(t, &e, &Rect::new(0.5, 1.0, 0.0, 1.0)),
            Err(AnalyticError::NotAnchored)
        ));
    }

    #[test]
    fn pullback_examples() {
        let e = QuadraticForm::euclidean();
        let (jac, hat, _) = triangle_pullback([1.0, 0.0], [1.0, 1.0], &e, 0, 0).unwrap();
        assert_eq!(jac, 1.0);
        assert_eq!((hat.a, hat.b, hat.c), (1.0, 2.0, 2.0));
        let (_, _, mix) = triangle_pullback([2.0, 0.0], [0.0, 3.0], &e, 1, 1).unwrap();
        assert_eq!(mix, vec![0.0, 6.0, 0.0]);
        assert_eq!(hatted_form(&e), (1.0, -2.0, 2.0));
    }
}
