use singex3d_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sx3d_last_error()) }.to_string_lossy().into_owned()
}

fn spheroid() -> *mut Sx3dPatch {
    let mut p = ptr::null_mut();
    let name = CString::new("spheroid").unwrap();
    assert_eq!(unsafe { sx3d_patch_builtin(name.as_ptr(), &mut p) }, Sx3dStatus::Ok);
    assert!(!p.is_null());
    p
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(sx3d_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn unit_square_inverse_distance() {
    let rect = [0.0, 1.0, 0.0, 1.0];
    let mut v = 0.0;
    let st = unsafe { sx3d_definite_rect(-1, 0, 0, 1.0, 0.0, 1.0, rect.as_ptr(), &mut v) };
    assert_eq!(st, Sx3dStatus::Ok);
    assert!((v - 2.0 * (1.0 + 2f64.sqrt()).ln()).abs() < 1e-14);

    let st = unsafe { sx3d_definite_tri(-1, 0, 0, 1.0, 0.0, 1.0, &mut v) };
    assert_eq!(st, Sx3dStatus::Ok);
    assert!((v - 2f64.sqrt() * (1.0 + 2f64.sqrt()).ln()).abs() < 1e-14);
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut v = 0.0;
    let st = unsafe { sx3d_definite_tri(-1, 0, 0, 1.0, 3.0, 1.0, &mut v) };
    assert_eq!(st, Sx3dStatus::InvalidArgument);
    assert!(last_error().contains("positive definite"), "{}", last_error());

    let st = unsafe { sx3d_definite_tri(-2, 0, 0, 1.0, 0.0, 1.0, &mut v) };
    assert_eq!(st, Sx3dStatus::InvalidArgument);
    let st = unsafe { sx3d_definite_tri(-3, 0, 0, 1.0, 0.0, 1.0, &mut v) };
    assert_eq!(st, Sx3dStatus::Analytic);
    assert!(last_error().contains("diverges"));

    let st = unsafe { sx3d_definite_tri(-1, 0, 0, 1.0, 0.0, 1.0, ptr::null_mut()) };
    assert_eq!(st, Sx3dStatus::NullPointer);

    let mut p = ptr::null_mut();
    let name = CString::new("torus").unwrap();
    assert_eq!(unsafe { sx3d_patch_builtin(name.as_ptr(), &mut p) }, Sx3dStatus::InvalidArgument);
    assert!(p.is_null());
    assert!(last_error().contains("torus"));

    let path = CString::new("/nonexistent/patch.json").unwrap();
    assert_eq!(unsafe { sx3d_patch_load(path.as_ptr(), &mut p) }, Sx3dStatus::Io);
}

#[test]
fn patch_and_kernel() {
    let p = spheroid();
    let mut x = [0.0; 3];
    assert_eq!(unsafe { sx3d_patch_eval(p, 0.3, 0.7, x.as_mut_ptr()) }, Sx3dStatus::Ok);
    assert!(x.iter().all(|c| c.is_finite()));
    assert_eq!(unsafe { sx3d_patch_eval(p, 3.0, 0.7, x.as_mut_ptr()) }, Sx3dStatus::Geometry);

    let mut g = 0.0;
    let st = unsafe { sx3d_kernel_eval(p, SX3D_KERNEL_G, 0.5, 0.5, 0.6, 0.55, &mut g) };
    assert_eq!(st, Sx3dStatus::Ok);
    assert!(g > 0.0);
    let st = unsafe { sx3d_kernel_eval(p, 7, 0.5, 0.5, 0.6, 0.55, &mut g) };
    assert_eq!(st, Sx3dStatus::InvalidArgument);
    unsafe { sx3d_patch_free(p) };
    unsafe { sx3d_patch_free(ptr::null_mut()) };
}

fn options(kernel: i32, mode: i32, n: u32) -> Sx3dIntegralOptions {
    Sx3dIntegralOptions {
        kernel,
        mode,
        n,
        source: [0.5, 0.5],
        support_kind: SX3D_SUPPORT_RECT,
        support: [0.45, 0.55, 0.45, 0.55, 0.0, 0.0],
        has_eta: false,
        eta: 0.0,
        nodes: 10,
        aux: SX3D_AUX_ONE,
    }
}

#[test]
fn integrate_modes() {
    let p = spheroid();
    let mut sub = Sx3dIntegralReport::default();
    let st = unsafe { sx3d_integrate(p, &options(SX3D_KERNEL_G, SX3D_MODE_SUBTRACT, 3), &mut sub) };
    assert_eq!(st, Sx3dStatus::Ok, "{}", last_error());
    assert_eq!(sub.mode_used, 1);
    assert_eq!(sub.classification, 2);

    let mut div = Sx3dIntegralReport::default();
    let st = unsafe { sx3d_integrate(p, &options(SX3D_KERNEL_G, SX3D_MODE_DIVIDE, 3), &mut div) };
    assert_eq!(st, Sx3dStatus::Ok, "{}", last_error());
    assert_eq!(div.mode_used, 2);
    assert!((sub.value - div.value).abs() < 1e-6 * sub.value.abs());

    let mut far = options(SX3D_KERNEL_G, SX3D_MODE_AUTO, 3);
    far.source = [0.1, 0.1];
    let mut r = Sx3dIntegralReport::default();
    assert_eq!(unsafe { sx3d_integrate(p, &far, &mut r) }, Sx3dStatus::Ok);
    assert_eq!(r.mode_used, 0);
    assert_eq!(r.classification, 0);
    assert!(r.fit_residual.is_nan());

    let st = unsafe { sx3d_integrate(p, &options(SX3D_KERNEL_HBAR, SX3D_MODE_DIVIDE, 3), &mut r) };
    assert_eq!(st, Sx3dStatus::DivisionGuard, "{}", last_error());

    let mut bad = options(SX3D_KERNEL_G, SX3D_MODE_SUBTRACT, 3);
    bad.support_kind = 9;
    assert_eq!(unsafe { sx3d_integrate(p, &bad, &mut r) }, Sx3dStatus::InvalidArgument);
    assert_eq!(unsafe { sx3d_integrate(ptr::null(), &bad, &mut r) }, Sx3dStatus::NullPointer);
    unsafe { sx3d_patch_free(p) };
}

#[test]
fn table_lifecycle() {
    let mut t = ptr::null_mut();
    let st = unsafe { sx3d_table_build(-1, 0, 0, SX3D_DOMAIN_SQUARE, 17, 17, &mut t) };
    assert_eq!(st, Sx3dStatus::Ok, "{}", last_error());

    let mut v = 0.0;
    assert_eq!(unsafe { sx3d_table_query(t, 0.0, 1.0, &mut v) }, Sx3dStatus::Ok);
    assert!((v - 2.0 * (1.0 + 2f64.sqrt()).ln()).abs() < 1e-13);
    assert_eq!(unsafe { sx3d_table_fallbacks(t) }, 0);

    assert_eq!(unsafe { sx3d_table_query(t, 20.0, 200.0, &mut v) }, Sx3dStatus::Ok);
    assert_eq!(unsafe { sx3d_table_fallbacks(t) }, 1);

    let dir = tempfile::tempdir().unwrap();
    let d = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { sx3d_table_save(t, d.as_ptr()) }, Sx3dStatus::Ok, "{}", last_error());
    unsafe { sx3d_table_free(t) };

    let file = dir.path().join("lut_p-1_q0_r0_square.bin");
    let f = CString::new(file.to_str().unwrap()).unwrap();
    let mut t2 = ptr::null_mut();
    assert_eq!(unsafe { sx3d_table_load(f.as_ptr(), &mut t2) }, Sx3dStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { sx3d_table_query(t2, 0.0, 1.0, &mut v) }, Sx3dStatus::Ok);
    assert!((v - 2.0 * (1.0 + 2f64.sqrt()).ln()).abs() < 1e-13);
    unsafe { sx3d_table_free(t2) };
    assert_eq!(unsafe { sx3d_table_fallbacks(ptr::null()) }, 0);
}
