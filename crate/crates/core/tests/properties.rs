use proptest::prelude::*;
use singex3d::analytic::{definite_anchored, AnchoredDomain, IntegerTriple, Rect};
use singex3d::decomp::{decompose, LocalDomain};
use singex3d::geometry::{area_element, builtin_sphere_face, builtin_spheroid, eval_patch, norm, SurfacePatch};
use singex3d::kernel::{build_context, eval_exact_kernel, KernelFamily};
use singex3d::quadrature::{gauss_legendre, poly_integral_rect, tensor_integrate};
use singex3d::series::{binomial_sqrt_series, eval_rterm_sum, homopoly_mul, HomoPoly, MultiIndex, Poly2, QuadraticForm};

fn form() -> impl Strategy<Value = QuadraticForm> {
    (0.3f64..3.0, 0.3f64..3.0, -0.9f64..0.9)
        .prop_map(|(a, c, t)| QuadraticForm::new(a, t * 2.0 * (a * c).sqrt(), c).unwrap())
}

fn homo(degree: u32) -> impl Strategy<Value = HomoPoly> {
    prop::collection::vec(-1.0f64..1.0, degree as usize + 1).prop_map(HomoPoly::from_coeffs)
}

/// Convergent triple: `ζ0 = p + q + r ≥ -1`.
fn triple() -> impl Strategy<Value = IntegerTriple> {
    (prop::sample::select(vec![-1, -3, -5]), 0u32..5, 0u32..5)
        .prop_filter("convergent", |(p, q, r)| p + (q + r) as i32 >= -1)
        .prop_map(|(p, q, r)| IntegerTriple::new(p, q, r).unwrap())
}

/// Rigid motion applied to the weighted control net.
fn moved(patch: &SurfacePatch, rot: [[f64; 3]; 3], shift: [f64; 3]) -> SurfacePatch {
    let points = patch
        .weighted_points()
        .iter()
        .map(|row| {
            row.iter()
                .map(|p| {
                    let w = p[3];
                    let mut out = [0.0, 0.0, 0.0, w];
                    for i in 0..3 {
                        out[i] = rot[i][0] * p[0] + rot[i][1] * p[1] + rot[i][2] * p[2] + w * shift[i];
                    }
                    out
                })
                .collect()
        })
        .collect();
    let (ku, kv) = patch.knots();
    SurfacePatch::new(patch.degrees(), ku.to_vec(), kv.to_vec(), points, patch.domain()).unwrap()
}

fn rotation(a: f64, b: f64) -> [[f64; 3]; 3] {
    let (ca, sa, cb, sb) = (a.cos(), a.sin(), b.cos(), b.sin());
    // R_z(a) · R_x(b)
    [[ca, -sa * cb, sa * sb], [sa, ca * cb, -ca * sb], [0.0, sb, cb]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn homopoly_product_evaluates_to_product(p in homo(3), q in homo(4), x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let pq = homopoly_mul(&p, &q);
        prop_assert_eq!(pq.degree(), 7);
        let want = p.eval(x, y) * q.eval(x, y);
        prop_assert!((pq.eval(x, y) - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn homopoly_derivatives_lower_degree(p in homo(5), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let h = 1e-6;
        let fd = (p.eval(x + h, y) - p.eval(x - h, y)) / (2.0 * h);
        prop_assert!((p.dx().eval(x, y) - fd).abs() < 1e-7);
        // Euler: x ∂x + y ∂y = degree · p
        let euler = x * p.dx().eval(x, y) + y * p.dy().eval(x, y);
        prop_assert!((euler - 5.0 * p.eval(x, y)).abs() < 1e-12);
    }

    #[test]
    fn sqrt_series_truncation_order(f in form(), p3 in homo(3), p4 in homo(4), th in 0.0f64..std::f64::consts::TAU) {
        let s = binomial_sqrt_series(&f, &[p3.clone(), p4.clone()], -1, 3).unwrap();
        let err = |lam: f64| {
            let z = [lam * th.cos(), lam * th.sin()];
            let full = f.r2(z[0], z[1]) + p3.eval(z[0], z[1]) + p4.eval(z[0], z[1]);
            (eval_rterm_sum(&s, z).unwrap() - full.powf(-0.5)).abs()
        };
        // remainder is O(λ^{-1+3}) = O(λ²)
        let (e1, e2) = (err(0.02), err(0.01));
        prop_assert!(e2 <= e1 / 2.0 + 1e-11, "{} {}", e1, e2);
    }

    #[test]
    fn rect_integral_is_homogeneous(t in triple(), f in form(), x in 0.2f64..1.5, y in 0.2f64..1.5, lam in 0.3f64..3.0) {
        let i1 = definite_anchored(t, &f, &AnchoredDomain::Rect(Rect::new(0.0, x, 0.0, y))).unwrap().value;
        let i2 = definite_anchored(t, &f, &AnchoredDomain::Rect(Rect::new(0.0, lam * x, 0.0, lam * y))).unwrap().value;
        let want = lam.powi(t.zeta0() + 2) * i1;
        prop_assert!((i2 - want).abs() <= 1e-10 * want.abs().max(1e-300));
    }

    #[test]
    fn rect_splits_into_two_triangles(t in triple(), f in form(), x in -1.5f64..1.5, y in -1.5f64..1.5) {
        prop_assume!(x.abs() > 0.1 && y.abs() > 0.1);
        let r = Rect::new(x.min(0.0), x.max(0.0), y.min(0.0), y.max(0.0));
        let whole = definite_anchored(t, &f, &AnchoredDomain::Rect(r)).unwrap().value;
        let a = definite_anchored(t, &f, &AnchoredDomain::Tri { v1: [x, 0.0], v2: [x, y] }).unwrap().value;
        let b = definite_anchored(t, &f, &AnchoredDomain::Tri { v1: [x, y], v2: [0.0, y] }).unwrap().value;
        prop_assert!((a + b - whole).abs() <= 1e-9 * (1.0 + whole.abs()), "{} + {} vs {}", a, b, whole);
    }

    #[test]
    fn signed_pieces_cover_the_domain(
        x0 in -1.0f64..0.5, w in 0.05f64..1.0, y0 in -1.0f64..0.5, h in 0.05f64..1.0,
        s in (-1.5f64..1.5, -1.5f64..1.5),
    ) {
        let local = LocalDomain::from_support(&LocalDomain::Rect(Rect::new(x0, x0 + w, y0, y0 + h)), [s.0, s.1]);
        let area: f64 = decompose(&local).unwrap().iter().map(|d| d.sign as f64 * d.area()).sum();
        prop_assert!((area - w * h).abs() < 1e-13);
    }

    #[test]
    fn gauss_rule_is_exact_to_degree(n in 1usize..20, k in 0u32..40) {
        prop_assume!(k < 2 * n as u32);
        let rule = gauss_legendre(n).unwrap();
        let got: f64 = rule.mapped(0.0, 1.0).map(|(x, w)| w * x.powi(k as i32)).sum();
        prop_assert!((got - 1.0 / (k as f64 + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn tensor_rule_matches_poly_integral(c in prop::collection::vec(-1.0f64..1.0, 16), x0 in -1.0f64..0.0, y0 in -1.0f64..0.0) {
        let p = Poly2::from_terms((0..16).map(|k| ((k / 4, k % 4), c[k as usize])));
        let r = Rect::new(x0, x0 + 1.3, y0, y0 + 0.7);
        let q = tensor_integrate(|x, y| p.eval(x, y), &r, 4).unwrap();
        prop_assert!((q - poly_integral_rect(&p, &r)).abs() < 1e-13);
    }

    #[test]
    fn kernels_are_rigid_motion_invariant(
        a in 0.0f64..std::f64::consts::TAU, b in 0.0f64..std::f64::consts::PI, shift in prop::array::uniform3(-5.0f64..5.0),
        s in (0.1f64..0.9, 0.1f64..0.9), t in (0.1f64..0.9, 0.1f64..0.9),
    ) {
        prop_assume!((s.0 - t.0).hypot(s.1 - t.1) > 1e-3);
        let base = builtin_spheroid();
        let m = moved(&base, rotation(a, b), shift);
        for fam in [KernelFamily::G, KernelFamily::Hbar] {
            let k0 = eval_exact_kernel(&base, fam, [s.0, s.1], [t.0, t.1]).unwrap();
            let k1 = eval_exact_kernel(&m, fam, [s.0, s.1], [t.0, t.1]).unwrap();
            prop_assert!((k0 - k1).abs() <= 1e-11 * k0.abs().max(1e-3), "{:?}: {} vs {}", fam, k0, k1);
        }
        let c0 = build_context(&base, [s.0, s.1], 4).unwrap();
        let c1 = build_context(&m, [s.0, s.1], 4).unwrap();
        for k in 2..=4 {
            for al in MultiIndex::of_order(k) {
                prop_assert!((c0.c(al) - c1.c(al)).abs() <= 1e-11 * (1.0 + c0.c(al).abs()));
            }
        }
    }

    #[test]
    fn single_layer_is_symmetric(s in (0.0f64..1.0, 0.0f64..1.0), t in (0.0f64..1.0, 0.0f64..1.0)) {
        prop_assume!((s.0 - t.0).hypot(s.1 - t.1) > 1e-4);
        let sp = builtin_spheroid();
        let a = eval_exact_kernel(&sp, KernelFamily::G, [s.0, s.1], [t.0, t.1]).unwrap();
        let b = eval_exact_kernel(&sp, KernelFamily::G, [t.0, t.1], [s.0, s.1]).unwrap();
        prop_assert!((a - b).abs() <= 1e-13 * a);
    }

    #[test]
    fn scaling_the_patch_scales_g(k in 0.2f64..5.0, s in (0.1f64..0.9, 0.1f64..0.9), t in (0.1f64..0.9, 0.1f64..0.9)) {
        prop_assume!((s.0 - t.0).hypot(s.1 - t.1) > 1e-3);
        let sp = builtin_spheroid();
        let a = eval_exact_kernel(&sp, KernelFamily::G, [s.0, s.1], [t.0, t.1]).unwrap();
        let b = eval_exact_kernel(&sp.scaled(k), KernelFamily::G, [s.0, s.1], [t.0, t.1]).unwrap();
        prop_assert!((b * k - a).abs() <= 1e-12 * a);
    }

    #[test]
    fn sphere_face_has_unit_radius_and_normal(t in (0.0f64..1.0, 0.0f64..1.0)) {
        let p = builtin_sphere_face();
        let x = eval_patch(&p, [t.0, t.1]).unwrap();
        prop_assert!((norm(x) - 1.0).abs() < 1e-13);
        let (j, n) = area_element(&p, [t.0, t.1]).unwrap();
        prop_assert!(j > 0.0);
        prop_assert!((norm(n) - 1.0).abs() < 1e-13);
        // radial normal, up to orientation
        let d = (n[0] * x[0] + n[1] * x[1] + n[2] * x[2]).abs();
        prop_assert!((d - 1.0).abs() < 1e-12);
    }
}
