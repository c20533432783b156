//! Bivariate homogeneous polynomials and formal sums `Σ R^p P(z)`.
//!
//! `R = sqrt(a x² + b x y + c y²)` is fixed by a [`QuadraticForm`]; every kernel,
//! truncated series and residual in the crate is an [`RTermSum`] over one form.

use crate::numeric::{gen_binomial, Scalar};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("quadratic form ({a}, {b}, {c}) is not positive definite")]
    NotPositiveDefinite { a: f64, b: f64, c: f64 },
    #[error("term R^{p} evaluated at the origin is singular")]
    SingularPoint { p: i32 },
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Multi-index `α = (a1, a2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    pub a1: u32,
    pub a2: u32,
}

impl MultiIndex {
    pub const fn new(a1: u32, a2: u32) -> Self {
        Self { a1, a2 }
    }

    pub const fn order(&self) -> u32 {
        self.a1 + self.a2
    }

    /// All indices with `|α| = k`, ordered by increasing `a2`.
    pub fn of_order(k: u32) -> impl Iterator<Item = MultiIndex> {
        (0..=k).map(move |j| MultiIndex::new(k - j, j))
    }
}

/// Homogeneous bivariate polynomial of fixed degree.
///
/// `coeffs[j]` multiplies `x^(degree-j) y^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomoPoly {
    degree: u32,
    coeffs: Vec<f64>,
}

impl HomoPoly {
    pub fn zero(degree: u32) -> Self {
        Self { degree, coeffs: vec![0.0; degree as usize + 1] }
    }

    pub fn one() -> Self {
        Self::from_coeffs(vec![1.0])
    }

    /// Builds a polynomial from dense coefficients; the degree is `len - 1`.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a homogeneous polynomial needs at least one coefficient");
        Self { degree: coeffs.len() as u32 - 1, coeffs }
    }

    /// Single monomial `k x^a1 y^a2`.
    pub fn monomial(alpha: MultiIndex, k: f64) -> Self {
        let mut p = Self::zero(alpha.order());
        p.coeffs[alpha.a2 as usize] = k;
        p
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, alpha: MultiIndex) -> f64 {
        if alpha.order() != self.degree {
            return 0.0;
        }
        self.coeffs[alpha.a2 as usize]
    }

    pub fn set(&mut self, alpha: MultiIndex, v: f64) {
        assert_eq!(alpha.order(), self.degree, "index order must match the degree");
        self.coeffs[alpha.a2 as usize] = v;
    }

    /// Nonzero `(α, coefficient)` pairs.
    pub fn terms(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        let d = self.degree;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(move |(j, c)| (MultiIndex::new(d - j as u32, j as u32), *c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { degree: self.degree, coeffs: self.coeffs.iter().map(|c| c * k).collect() }
    }

    /// Sum of two polynomials of the same degree.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.degree, other.degree, "degree mismatch in HomoPoly::add");
        Self {
            degree: self.degree,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn add_assign_scaled(&mut self, other: &Self, k: f64) {
        assert_eq!(self.degree, other.degree, "degree mismatch in HomoPoly::add_assign_scaled");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += k * b;
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.eval_generic(x, y)
    }

    pub fn eval_generic<T: Scalar>(&self, x: T, y: T) -> T {
        // Horner in the ratio would divide by x; a plain power table is safer at x = 0.
        let d = self.degree as usize;
        let mut xp = vec![T::from_f64(1.0); d + 1];
        let mut yp = vec![T::from_f64(1.0); d + 1];
        for i in 1..=d {
            xp[i] = xp[i - 1] * x;
            yp[i] = yp[i - 1] * y;
        }
        let mut acc = T::from_f64(0.0);
        for (j, c) in self.coeffs.iter().enumerate() {
            if *c != 0.0 {
                acc = acc + (xp[d - j] * yp[j]).scale(*c);
            }
        }
        acc
    }

    /// Partial derivative in `x` (degree drops by one; the zero polynomial of degree 0 stays put).
    pub fn dx(&self) -> Self {
        if self.degree == 0 {
            return Self::zero(0);
        }
        let d = self.degree;
        let coeffs = (0..d).map(|j| self.coeffs[j as usize] * (d - j) as f64).collect();
        Self { degree: d - 1, coeffs }
    }

    pub fn dy(&self) -> Self {
        if self.degree == 0 {
            return Self::zero(0);
        }
        let d = self.degree;
        let coeffs = (0..d).map(|j| self.coeffs[j as usize + 1] * (j + 1) as f64).collect();
        Self { degree: d - 1, coeffs }
    }

    /// Substitutes `(x, y) → (-x, y)`.
    pub fn reflect_x(&self) -> Self {
        let d = self.degree as usize;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| if (d - j) % 2 == 1 { -c } else { *c })
            .collect();
        Self { degree: self.degree, coeffs }
    }

    /// Substitutes `(x, y) → (x, -y)`.
    pub fn reflect_y(&self) -> Self {
        let coeffs =
            self.coeffs.iter().enumerate().map(|(j, c)| if j % 2 == 1 { -c } else { *c }).collect();
        Self { degree: self.degree, coeffs }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = homopoly_mul(&acc, self);
        }
        acc
    }
}

impl fmt::Display for HomoPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (al, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}·x^{}y^{}", al.a1, al.a2)?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Product of two homogeneous polynomials.
pub fn homopoly_mul(p: &HomoPoly, q: &HomoPoly) -> HomoPoly {
    let mut out = HomoPoly::zero(p.degree + q.degree);
    for (i, a) in p.coeffs.iter().enumerate() {
        if *a == 0.0 {
            continue;
        }
        for (j, b) in q.coeffs.iter().enumerate() {
            out.coeffs[i + j] += a * b;
        }
    }
    out
}

/// `R² = a x² + b x y + c y²`, positive definite.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadraticForm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticForm {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, SeriesError> {
        if a > 0.0 && c > 0.0 && 4.0 * a * c - b * b > 0.0 {
            Ok(Self { a, b, c })
        } else {
            Err(SeriesError::NotPositiveDefinite { a, b, c })
        }
    }

    /// Euclidean form `x² + y²`.
    pub const fn euclidean() -> Self {
        Self { a: 1.0, b: 0.0, c: 1.0 }
    }

    pub fn discriminant(&self) -> f64 {
        4.0 * self.a * self.c - self.b * self.b
    }

    pub fn r2(&self, x: f64, y: f64) -> f64 {
        self.a * x * x + self.b * x * y + self.c * y * y
    }

    pub fn r(&self, x: f64, y: f64) -> f64 {
        self.r2(x, y).sqrt()
    }

    pub fn r_generic<T: Scalar>(&self, x: T, y: T) -> T {
        ((x * x).scale(self.a) + (x * y).scale(self.b) + (y * y).scale(self.c)).sqrt()
    }

    /// `R²` as a degree-2 homogeneous polynomial.
    pub fn as_poly(&self) -> HomoPoly {
        HomoPoly::from_coeffs(vec![self.a, self.b, self.c])
    }

    /// Exchanges the roles of `x` and `y`.
    pub fn swapped(&self) -> Self {
        Self { a: self.c, b: self.b, c: self.a }
    }
}

/// One summand `R^p · P`.
#[derive(Debug, Clone, PartialEq)]
pub struct RTerm {
    pub p: i32,
    pub poly: HomoPoly,
}

impl RTerm {
    pub fn zeta(&self) -> i64 {
        self.p as i64 + self.poly.degree() as i64
    }

    /// `∂/∂x (R^p P) = R^(p-2) [ (p/2)(2ax + by) P + R² ∂P/∂x ]`.
    pub fn dx(&self, form: &QuadraticForm) -> RTerm {
        let lin = HomoPoly::from_coeffs(vec![form.a * self.p as f64, 0.5 * form.b * self.p as f64]);
        let mut poly = homopoly_mul(&lin, &self.poly);
        if self.poly.degree() > 0 {
            let d = homopoly_mul(&form.as_poly(), &self.poly.dx());
            poly.add_assign_scaled(&d, 1.0);
        }
        RTerm { p: self.p - 2, poly }
    }

    pub fn dy(&self, form: &QuadraticForm) -> RTerm {
        let lin = HomoPoly::from_coeffs(vec![0.5 * form.b * self.p as f64, form.c * self.p as f64]);
        let mut poly = homopoly_mul(&lin, &self.poly);
        if self.poly.degree() > 0 {
            let d = homopoly_mul(&form.as_poly(), &self.poly.dy());
            poly.add_assign_scaled(&d, 1.0);
        }
        RTerm { p: self.p - 2, poly }
    }
}

/// Value of `ζ`: an integer, or `+∞` for the empty sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Zeta {
    Finite(i64),
    Infinite,
}

/// Formal sum `Σ R^{p_l} P_l` with pairwise distinct `p_l`.
///
/// `ζ` of a user-supplied sum is a lower bound: the representation is not
/// checked for common factors with `R²`.
#[derive(Debug, Clone, PartialEq)]
pub struct RTermSum {
    terms: Vec<RTerm>,
    form: QuadraticForm,
}

impl RTermSum {
    pub fn empty(form: QuadraticForm) -> Self {
        Self { terms: Vec::new(), form }
    }

    /// Merges equal powers (their polynomials must share a degree) and drops zero polynomials.
    pub fn new(terms: Vec<RTerm>, form: QuadraticForm) -> Result<Self, SeriesError> {
        let mut merged: Vec<RTerm> = Vec::new();
        for t in terms {
            match merged.iter_mut().find(|m| m.p == t.p) {
                Some(m) => {
                    if m.poly.degree() != t.poly.degree() {
                        return Err(SeriesError::Argument(format!(
                            "two terms with R^{} have degrees {} and {}",
                            t.p,
                            m.poly.degree(),
                            t.poly.degree()
                        )));
                    }
                    m.poly.add_assign_scaled(&t.poly, 1.0);
                }
                None => merged.push(t),
            }
        }
        merged.retain(|t| !t.poly.is_zero());
        merged.sort_by(|a, b| b.p.cmp(&a.p));
        Ok(Self { terms: merged, form })
    }

    pub fn terms(&self) -> &[RTerm] {
        &self.terms
    }

    pub fn form(&self) -> &QuadraticForm {
        &self.form
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, k: f64) -> Self {
        let terms = self.terms.iter().map(|t| RTerm { p: t.p, poly: t.poly.scaled(k) }).collect();
        Self { terms, form: self.form }
    }

    pub fn eval_generic<T: Scalar>(&self, x: T, y: T) -> T {
        let r = self.form.r_generic(x, y);
        let mut acc = T::from_f64(0.0);
        for t in &self.terms {
            acc = acc + r.powi(t.p) * t.poly.eval_generic(x, y);
        }
        acc
    }
}

/// `min_l (p_l + deg P_l)`, or `+∞` for an empty sum.
pub fn zeta(s: &RTermSum) -> Zeta {
    s.terms.iter().map(|t| t.zeta()).min().map_or(Zeta::Infinite, Zeta::Finite)
}

/// Evaluates `Σ R(z)^{p_l} P_l(z)`.
pub fn eval_rterm_sum(s: &RTermSum, z: [f64; 2]) -> Result<f64, SeriesError> {
    let [x, y] = z;
    let r = s.form.r(x, y);
    if r == 0.0 {
        if let Some(t) = s.terms.iter().find(|t| t.p < 0) {
            return Err(SeriesError::SingularPoint { p: t.p });
        }
        // R^p with p ≥ 0 at the origin; only R^0 times a constant survives.
        let mut acc = 0.0;
        for t in &s.terms {
            if t.p == 0 && t.poly.degree() == 0 {
                acc += t.poly.coeffs()[0];
            }
        }
        return Ok(acc);
    }
    Ok(s.terms.iter().map(|t| r.powi(t.p) * t.poly.eval(x, y)).sum())
}

/// First `n` graded terms of `(R² + P3 + P4 + …)^e` with `2e` odd.
///
/// `tail[k]` must have degree `k + 3`. Term `l` (1-based) is returned as
/// `R^(2e - 2(l-1)) · P_{3(l-1)}`, so its `ζ` is `2e + (l - 1)`.
pub fn binomial_sqrt_series(
    head: &QuadraticForm,
    tail: &[HomoPoly],
    twice_exponent: i32,
    n: usize,
) -> Result<RTermSum, SeriesError> {
    if n < 1 {
        return Err(SeriesError::Argument("binomial series needs n ≥ 1".into()));
    }
    if twice_exponent % 2 == 0 {
        return Err(SeriesError::Argument("exponent must be a half-integer".into()));
    }
    for (k, t) in tail.iter().enumerate() {
        if t.degree() != k as u32 + 3 {
            return Err(SeriesError::Argument(format!(
                "tail[{k}] has degree {} instead of {}",
                t.degree(),
                k + 3
            )));
        }
    }
    let e = twice_exponent as f64 / 2.0;
    let r2 = head.as_poly();
    // u_pow[k][j]: part of (P3 + P4 + …)^k with excess degree j over 2k.
    let mut u_pow: Vec<Vec<Option<HomoPoly>>> = vec![vec![None; n]; n];
    u_pow[0][0] = Some(HomoPoly::one());
    for k in 1..n {
        for j in k..n {
            let mut acc = HomoPoly::zero((2 * k + j) as u32);
            let mut any = false;
            for i in 1..=j {
                let Some(pi) = tail.get(i - 1) else { break };
                if let Some(prev) = &u_pow[k - 1][j - i] {
                    acc.add_assign_scaled(&homopoly_mul(pi, prev), 1.0);
                    any = true;
                }
            }
            if any {
                u_pow[k][j] = Some(acc);
            }
        }
    }
    let mut r2_pow = vec![HomoPoly::one()];
    for k in 1..n {
        let next = homopoly_mul(&r2_pow[k - 1], &r2);
        r2_pow.push(next);
    }
    let mut terms = Vec::with_capacity(n);
    for l in 1..=n {
        let j = l - 1;
        let mut poly = HomoPoly::zero(3 * j as u32);
        for k in 0..=j {
            if let Some(u) = &u_pow[k][j] {
                let prod = homopoly_mul(&r2_pow[j - k], u);
                poly.add_assign_scaled(&prod, gen_binomial(e, k as u32));
            }
        }
        terms.push(RTerm { p: twice_exponent - 2 * j as i32, poly });
    }
    RTermSum::new(terms, *head)
}

/// Graded product of a polynomial series `Σ_j N_j` (with `deg N_j = deg N_0 + j`)
/// and a graded sum whose term `i` is `R^(p1 - 2(i-1)) S_i`.
///
/// Returns the first `n` graded terms, each lifted to the power `p1 - 2(l-1)`.
pub fn graded_poly_product(
    numer: &[HomoPoly],
    series: &RTermSum,
    n: usize,
) -> Result<RTermSum, SeriesError> {
    let form = *series.form();
    let graded = series.terms();
    if graded.is_empty() || numer.is_empty() {
        return Ok(RTermSum::empty(form));
    }
    let p1 = graded[0].p;
    let d_s = graded[0].poly.degree() as i64;
    let d_n = numer[0].degree() as i64;
    let s_of = |i: usize| graded.iter().find(|t| t.p == p1 - 2 * (i as i32 - 1));
    let r2 = form.as_poly();
    let mut terms = Vec::new();
    for l in 1..=n {
        let deg = (d_n + d_s + 3 * (l as i64 - 1)) as u32;
        let mut poly = HomoPoly::zero(deg);
        for j in 0..l {
            let Some(nj) = numer.get(j) else { break };
            let Some(si) = s_of(l - j) else { continue };
            let prod = homopoly_mul(&homopoly_mul(nj, &si.poly), &r2.pow(j as u32));
            poly.add_assign_scaled(&prod, 1.0);
        }
        terms.push(RTerm { p: p1 - 2 * (l as i32 - 1), poly });
    }
    RTermSum::new(terms, form)
}

/// General bivariate polynomial `Σ c_ij x^i y^j`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Poly2 {
    terms: std::collections::BTreeMap<(u32, u32), f64>,
}

impl Poly2 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(0, 0, c);
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = ((u32, u32), f64)>) -> Self {
        let mut p = Self::zero();
        for ((i, j), c) in terms {
            p.add_term(i, j, c);
        }
        p
    }

    pub fn add_term(&mut self, i: u32, j: u32, c: f64) {
        if c != 0.0 {
            *self.terms.entry((i, j)).or_insert(0.0) += c;
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), f64)> + '_ {
        self.terms.iter().map(|(k, v)| (*k, *v)).filter(|(_, v)| *v != 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|v| *v == 0.0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms().map(|((i, j), _)| i + j).max().unwrap_or(0)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms().map(|((i, j), c)| c * x.powi(i as i32) * y.powi(j as i32)).sum()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::from_terms(self.terms().map(|(e, c)| (e, c * k)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for ((i, j), a) in self.terms() {
            for ((k, l), b) in other.terms() {
                out.add_term(i + k, j + l, a * b);
            }
        }
        out
    }

    pub fn from_homo(p: &HomoPoly) -> Self {
        Self::from_terms(p.terms().map(|(a, c)| ((a.a1, a.a2), c)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn mul_examples() {
        let p = HomoPoly::from_coeffs(vec![1.0, 1.0]);
        let q = HomoPoly::from_coeffs(vec![1.0, -1.0]);
        assert_eq!(homopoly_mul(&p, &q).coeffs(), &[1.0, 0.0, -1.0]);
        let p3 = HomoPoly::monomial(MultiIndex::new(3, 0), 1.0);
        assert_eq!(homopoly_mul(&p3, &p3), HomoPoly::monomial(MultiIndex::new(6, 0), 1.0));
        let l = HomoPoly::from_coeffs(vec![2.0, 3.0]);
        let y = HomoPoly::from_coeffs(vec![0.0, 1.0]);
        assert_eq!(homopoly_mul(&l, &y).coeffs(), &[0.0, 2.0, 3.0]);
    }

    #[test]
    fn zeta_examples() {
        let f = QuadraticForm::euclidean();
        let s = RTermSum::new(
            vec![RTerm { p: -3, poly: HomoPoly::monomial(MultiIndex::new(2, 1), 1.0) }],
            f,
        )
        .unwrap();
        assert_eq!(zeta(&s), Zeta::Finite(0));
        let s = RTermSum::new(
            vec![
                RTerm { p: -1, poly: HomoPoly::one() },
                RTerm { p: -3, poly: HomoPoly::from_coeffs(vec![1.0, 0.0, 2.0, 0.0]) },
            ],
            f,
        )
        .unwrap();
        assert_eq!(zeta(&s), Zeta::Finite(-1));
        assert_eq!(zeta(&RTermSum::empty(f)), Zeta::Infinite);
    }

    #[test]
    fn eval_examples() {
        let f = QuadraticForm::euclidean();
        let inv = RTermSum::new(vec![RTerm { p: -1, poly: HomoPoly::one() }], f).unwrap();
        assert!(close(eval_rterm_sum(&inv, [3.0, 4.0]).unwrap(), 0.2, 1e-15));
        assert!(matches!(
            eval_rterm_sum(&inv, [0.0, 0.0]),
            Err(SeriesError::SingularPoint { p: -1 })
        ));
        let r1 = RTermSum::new(vec![RTerm { p: 1, poly: HomoPoly::one() }], f).unwrap();
        assert_eq!(eval_rterm_sum(&r1, [0.0, 0.0]).unwrap(), 0.0);
        let cube = RTermSum::new(
            vec![RTerm { p: -3, poly: HomoPoly::monomial(MultiIndex::new(3, 0), 1.0) }],
            f,
        )
        .unwrap();
        assert!(close(eval_rterm_sum(&cube, [1.0, 0.0]).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn binomial_flat_case() {
        let f = QuadraticForm::new(1.3, 0.2, 0.8).unwrap();
        let s = binomial_sqrt_series(&f, &[HomoPoly::zero(3), HomoPoly::zero(4)], -1, 3).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.terms()[0].p, -1);
        assert_eq!(s.terms()[0].poly, HomoPoly::one());
    }

    #[test]
    fn binomial_matches_printed_terms() {
        let f = QuadraticForm::new(1.3, 0.2, 0.8).unwrap();
        let p3 = HomoPoly::from_coeffs(vec![0.3, -0.2, 0.5, 0.1]);
        let p4 = HomoPoly::from_coeffs(vec![-0.1, 0.4, 0.0, 0.2, 0.7]);
        let s = binomial_sqrt_series(&f, &[p3.clone(), p4.clone()], -1, 3).unwrap();
        let (x, y) = (0.37, -0.52);
        let r = f.r(x, y);
        let second = -0.5 * r.powi(-3) * p3.eval(x, y);
        let third = -0.5 * r.powi(-3) * p4.eval(x, y) + 0.375 * r.powi(-5) * p3.eval(x, y).powi(2);
        let t2 = &s.terms()[1];
        let t3 = &s.terms()[2];
        assert!(close(r.powi(t2.p) * t2.poly.eval(x, y), second, 1e-14));
        assert!(close(r.powi(t3.p) * t3.poly.eval(x, y), third, 1e-14));
    }

    #[test]
    fn binomial_rejects_zero_terms() {
        let f = QuadraticForm::euclidean();
        assert!(binomial_sqrt_series(&f, &[], -1, 0).is_err());
    }

    #[test]
    fn form_validation() {
        assert!(QuadraticForm::new(1.0, 2.0, 1.0).is_err());
        assert!(QuadraticForm::new(-1.0, 0.0, 1.0).is_err());
        assert!(QuadraticForm::new(1.0, 1.9, 1.0).is_ok());
    }
}
