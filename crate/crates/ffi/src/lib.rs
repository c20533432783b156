//! C ABI over `singex3d`.
//!
//! Objects cross the boundary as opaque handles created by `sx3d_*_new`/`load`
//! functions and released by the matching `_free`. Every fallible call returns
//! an [`Sx3dStatus`]; the message of the last failure on the calling thread is
//! available from [`sx3d_last_error`]. Panics are caught and reported as
//! [`Sx3dStatus::Panic`].

use singex3d::analytic::{definite_rect, definite_tri, AnalyticError, IntegerTriple, Rect};
use singex3d::decomp::LocalDomain;
use singex3d::geometry::{builtin_sphere_face, builtin_spheroid, eval_patch, load_patch, GeometryError, SurfacePatch};
use singex3d::integrator::{
    integrate, Aux, Classification, IntegralTask, IntegratorError, ModeChoice, ModeUsed,
};
use singex3d::kernel::{eval_exact_kernel, KernelError, KernelFamily};
use singex3d::lookup::{DomainKind, GridSpec, LookupError, LookupTable};
use singex3d::series::QuadraticForm;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sx3dStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Geometry = 3,
    Kernel = 4,
    DivisionGuard = 5,
    NotRemovable = 6,
    Analytic = 7,
    Quadrature = 8,
    Fit = 9,
    Io = 10,
    Panic = 11,
}

/// Opaque surface patch.
pub struct Sx3dPatch(SurfacePatch);

/// Opaque lookup table.
pub struct Sx3dTable(LookupTable);

pub const SX3D_KERNEL_G: i32 = 0;
pub const SX3D_KERNEL_HBAR: i32 = 1;

pub const SX3D_MODE_AUTO: i32 = 0;
pub const SX3D_MODE_SUBTRACT: i32 = 1;
pub const SX3D_MODE_DIVIDE: i32 = 2;

pub const SX3D_SUPPORT_RECT: i32 = 0;
pub const SX3D_SUPPORT_TRI: i32 = 1;

pub const SX3D_AUX_ONE: i32 = 0;
pub const SX3D_AUX_AREA_ELEMENT: i32 = 1;

pub const SX3D_DOMAIN_SQUARE: i32 = 0;
pub const SX3D_DOMAIN_TRIANGLE: i32 = 1;

/// Input of [`sx3d_integrate`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct Sx3dIntegralOptions {
    /// `SX3D_KERNEL_*`.
    pub kernel: i32,
    /// `SX3D_MODE_*`.
    pub mode: i32,
    /// Series terms; 0 disables regularization.
    pub n: u32,
    pub source: [f64; 2],
    /// `SX3D_SUPPORT_*`.
    pub support_kind: i32,
    /// Rectangle `x0, x1, y0, y1` or triangle `ax, ay, bx, by, cx, cy`.
    pub support: [f64; 6],
    pub has_eta: bool,
    pub eta: f64,
    /// Gauss nodes per direction.
    pub nodes: u32,
    /// `SX3D_AUX_*`.
    pub aux: i32,
}

/// Output of [`sx3d_integrate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct Sx3dIntegralReport {
    pub value: f64,
    pub analytic_part: f64,
    pub quadrature_part: f64,
    /// NaN when no fit was used.
    pub fit_residual: f64,
    pub condition: f64,
    /// 0 quadrature, 1 subtract, 2 divide.
    pub mode_used: i32,
    /// 0 regular, 1 nearly singular, 2 singular.
    pub classification: i32,
    pub edge_quadrature: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).expect("nul bytes removed"));
}

struct Fail(Sx3dStatus, String);

impl From<GeometryError> for Fail {
    fn from(e: GeometryError) -> Self {
        let code = if matches!(e, GeometryError::Io(_)) { Sx3dStatus::Io } else { Sx3dStatus::Geometry };
        Fail(code, e.to_string())
    }
}

impl From<KernelError> for Fail {
    fn from(e: KernelError) -> Self {
        let code = match &e {
            KernelError::Geometry(_) => Sx3dStatus::Geometry,
            KernelError::DivisionGuard(_) => Sx3dStatus::DivisionGuard,
            KernelError::NotRemovable(_) => Sx3dStatus::NotRemovable,
            _ => Sx3dStatus::Kernel,
        };
        Fail(code, e.to_string())
    }
}

impl From<AnalyticError> for Fail {
    fn from(e: AnalyticError) -> Self {
        let code = match e {
            AnalyticError::InvalidTriple { .. } => Sx3dStatus::InvalidArgument,
            _ => Sx3dStatus::Analytic,
        };
        Fail(code, e.to_string())
    }
}

impl From<singex3d::series::SeriesError> for Fail {
    fn from(e: singex3d::series::SeriesError) -> Self {
        Fail(Sx3dStatus::InvalidArgument, e.to_string())
    }
}

impl From<IntegratorError> for Fail {
    fn from(e: IntegratorError) -> Self {
        match e {
            IntegratorError::Kernel(k) => k.into(),
            IntegratorError::Geometry(g) => g.into(),
            IntegratorError::Analytic(a) => a.into(),
            IntegratorError::Decomp(d) => Fail(Sx3dStatus::Analytic, d.to_string()),
            IntegratorError::Quadrature(m) => Fail(Sx3dStatus::Quadrature, m),
            IntegratorError::Fit(m) => Fail(Sx3dStatus::Fit, m),
            IntegratorError::Invalid(m) => Fail(Sx3dStatus::InvalidArgument, m),
        }
    }
}

impl From<LookupError> for Fail {
    fn from(e: LookupError) -> Self {
        match e {
            LookupError::Analytic(a) => a.into(),
            LookupError::Io(_) => Fail(Sx3dStatus::Io, e.to_string()),
            LookupError::Format(_) => Fail(Sx3dStatus::Io, e.to_string()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(Sx3dStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting failures and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> Sx3dStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => Sx3dStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            Sx3dStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail(Sx3dStatus::NullPointer, "null pointer argument".into()))
}

unsafe fn as_mut<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail(Sx3dStatus::NullPointer, "null pointer argument".into()))
}

unsafe fn as_str<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(Sx3dStatus::NullPointer, "null string argument".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid("string is not valid UTF-8"))
}

fn family(k: i32) -> Result<KernelFamily, Fail> {
    match k {
        SX3D_KERNEL_G => Ok(KernelFamily::G),
        SX3D_KERNEL_HBAR => Ok(KernelFamily::Hbar),
        _ => Err(invalid(format!("unknown kernel {k}"))),
    }
}

fn domain_kind(k: i32) -> Result<DomainKind, Fail> {
    match k {
        SX3D_DOMAIN_SQUARE => Ok(DomainKind::UnitSquare),
        SX3D_DOMAIN_TRIANGLE => Ok(DomainKind::ReferenceTriangle),
        _ => Err(invalid(format!("unknown domain kind {k}"))),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sx3d_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread; valid until the next failing call.
#[no_mangle]
pub extern "C" fn sx3d_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builtin patch: `"spheroid"`, `"sphere-face"` or `"flat"`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sx3d_patch_builtin(name: *const c_char, out: *mut *mut Sx3dPatch) -> Sx3dStatus {
    guard(|| {
        let out = as_mut(out)?;
        let patch = match as_str(name)? {
            "spheroid" => builtin_spheroid(),
            "sphere-face" => builtin_sphere_face(),
            "flat" => SurfacePatch::flat_unit(),
            other => return Err(invalid(format!("unknown builtin patch '{other}'"))),
        };
        *out = Box::into_raw(Box::new(Sx3dPatch(patch)));
        Ok(())
    })
}

/// Patch from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sx3d_patch_load(path: *const c_char, out: *mut *mut Sx3dPatch) -> Sx3dStatus {
    guard(|| {
        let out = as_mut(out)?;
        let patch = load_patch(Path::new(as_str(path)?))?;
        *out = Box::into_raw(Box::new(Sx3dPatch(patch)));
        Ok(())
    })
}

/// Releases a patch; null is ignored.
///
/// # Safety
/// `patch` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sx3d_patch_free(patch: *mut Sx3dPatch) {
    if !patch.is_null() {
        drop(Box::from_raw(patch));
    }
}

/// `F(t)` into `out[0..3]`.
///
/// # Safety
/// `patch` must be a live handle and `out` point to three doubles.
#[no_mangle]
pub unsafe extern "C" fn sx3d_patch_eval(patch: *const Sx3dPatch, t1: f64, t2: f64, out: *mut f64) -> Sx3dStatus {
    guard(|| {
        let p = as_ref(patch)?;
        if out.is_null() {
            return Err(Fail(Sx3dStatus::NullPointer, "null output".into()));
        }
        let x = eval_patch(&p.0, [t1, t2])?;
        std::ptr::copy_nonoverlapping(x.as_ptr(), out, 3);
        Ok(())
    })
}

/// `G(s,t)` or `H̄(s,t)`.
///
/// # Safety
/// `patch` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sx3d_kernel_eval(
    patch: *const Sx3dPatch,
    kernel: i32,
    s1: f64,
    s2: f64,
    t1: f64,
    t2: f64,
    out: *mut f64,
) -> Sx3dStatus {
    guard(|| {
        let p = as_ref(patch)?;
        let out = as_mut(out)?;
        *out = eval_exact_kernel(&p.0, family(kernel)?, [s1, s2], [t1, t2])?;
        Ok(())
    })
}

/// `∫∫ R^p x^q y^r` for `R² = a x² + b xy + c y²` over `[x0,x1]×[y0,y1]` with a corner at the origin.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sx3d_definite_rect(
    p: i32,
    q: u32,
    r: u32,
    a: f64,
    b: f64,
    c: f64,
    rect: *const f64,
    out: *mut f64,
) -> Sx3dStatus {
    guard(|| {
        let out = as_mut(out)?;
        if rect.is_null() {
            return Err(Fail(Sx3dStatus::NullPointer, "null rectangle".into()));
        }
        let v = std::slice::from_raw_parts(rect, 4);
        let form = QuadraticForm::new(a, b, c)?;
        *out = definite_rect(IntegerTriple::new(p, q, r)?, &form, &Rect { x0: v[0], x1: v[1], y0: v[2], y1: v[3] })?;
        Ok(())
    })
}

/// `∫∫ R^p x^q y^r` over the reference triangle `(0,0), (1,0), (0,1)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sx3d_definite_tri(p: i32, q: u32, r: u32, a: f64, b: f64, c: f64, out: *mut f64) -> Sx3dStatus {
    guard(|| {
        let out = as_mut(out)?;
        let form = QuadraticForm::new(a, b, c)?;
        *out = definite_tri(IntegerTriple::new(p, q, r)?, &form)?;
        Ok(())
    })
}

/// Regularized `∫ K(s,t) v(t) dt` over a support, with `B ≡ 1`.
///
/// # Safety
/// `patch`, `opts` and `report` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sx3d_integrate(
    patch: *const Sx3dPatch,
    opts: *const Sx3dIntegralOptions,
    report: *mut Sx3dIntegralReport,
) -> Sx3dStatus {
    guard(|| {
        let p = as_ref(patch)?;
        let o = as_ref(opts)?;
        let out = as_mut(report)?;
        let v = o.support;
        let support = match o.support_kind {
            SX3D_SUPPORT_RECT => LocalDomain::Rect(Rect { x0: v[0], x1: v[1], y0: v[2], y1: v[3] }),
            SX3D_SUPPORT_TRI => LocalDomain::Tri([[v[0], v[1]], [v[2], v[3]], [v[4], v[5]]]),
            k => return Err(invalid(format!("unknown support kind {k}"))),
        };
        let mode = match o.mode {
            SX3D_MODE_AUTO => ModeChoice::Auto,
            SX3D_MODE_SUBTRACT => ModeChoice::Subtract,
            SX3D_MODE_DIVIDE => ModeChoice::Divide,
            m => return Err(invalid(format!("unknown mode {m}"))),
        };
        let aux = match o.aux {
            SX3D_AUX_ONE => Aux::One,
            SX3D_AUX_AREA_ELEMENT => Aux::AreaElement,
            a => return Err(invalid(format!("unknown aux {a}"))),
        };
        let task = IntegralTask::new(&p.0, family(o.kernel)?, o.source, support)
            .with_n(o.n as usize)
            .with_mode(mode)
            .with_eta(o.has_eta.then_some(o.eta))
            .with_nodes(o.nodes as usize)
            .with_aux(aux);
        let r = integrate(&task)?;
        *out = Sx3dIntegralReport {
            value: r.value,
            analytic_part: r.analytic_part,
            quadrature_part: r.quadrature_part,
            fit_residual: r.fit_residual.unwrap_or(f64::NAN),
            condition: r.condition,
            mode_used: match r.mode {
                ModeUsed::Quadrature => 0,
                ModeUsed::Subtract => 1,
                ModeUsed::Divide => 2,
            },
            classification: match r.classification {
                Classification::Regular => 0,
                Classification::NearlySingular => 1,
                Classification::Singular => 2,
            },
            edge_quadrature: r.edge_quadrature as u64,
        };
        Ok(())
    })
}

/// Builds a table on the default ranges with `nb × nc` nodes.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sx3d_table_build(
    p: i32,
    q: u32,
    r: u32,
    domain: i32,
    nb: u32,
    nc: u32,
    out: *mut *mut Sx3dTable,
) -> Sx3dStatus {
    guard(|| {
        let out = as_mut(out)?;
        let grid = GridSpec { nb: nb as usize, nc: nc as usize, ..GridSpec::default() };
        let t = LookupTable::build(IntegerTriple::new(p, q, r)?, grid, domain_kind(domain)?)?;
        *out = Box::into_raw(Box::new(Sx3dTable(t)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sx3d_table_load(path: *const c_char, out: *mut *mut Sx3dTable) -> Sx3dStatus {
    guard(|| {
        let out = as_mut(out)?;
        let t = LookupTable::load(Path::new(as_str(path)?))?;
        *out = Box::into_raw(Box::new(Sx3dTable(t)));
        Ok(())
    })
}

/// Writes the binary table and its JSON sidecar into `dir`.
///
/// # Safety
/// `table` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sx3d_table_save(table: *const Sx3dTable, dir: *const c_char) -> Sx3dStatus {
    guard(|| {
        let t = as_ref(table)?;
        t.0.save(Path::new(as_str(dir)?))?;
        Ok(())
    })
}

/// Interpolated value, or direct evaluation outside the served region.
///
/// # Safety
/// `table` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sx3d_table_query(table: *const Sx3dTable, bbar: f64, cbar: f64, out: *mut f64) -> Sx3dStatus {
    guard(|| {
        let t = as_ref(table)?;
        let out = as_mut(out)?;
        *out = t.0.query(bbar, cbar)?;
        Ok(())
    })
}

/// Number of queries answered by direct evaluation; 0 for null.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sx3d_table_fallbacks(table: *const Sx3dTable) -> u64 {
    table.as_ref().map_or(0, |t| t.0.fallback_count())
}

/// # Safety
/// `table` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sx3d_table_free(table: *mut Sx3dTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}
