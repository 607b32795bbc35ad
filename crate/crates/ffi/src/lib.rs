//! C ABI over the `combo` library.
//!
//! Objects are opaque handles created by `*_new`/`*_read`-style functions and
//! released with the matching `*_free`. Every fallible function returns a
//! [`ComboStatus`]; on failure a message is available from
//! [`combo_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use combo::cli::RunConfig;
use combo::imaging::{assign_normals, coarsen, generate, io, ComboGrid as Grid, MomentCentering, NormalMethod, PhaseImage, Shape};
use combo::solver::{solve, Microstructure, Solution};
use combo::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComboStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigInvalid = 3,
    UpstreamArtifactMissing = 4,
    Io = 5,
    NoConvergence = 6,
    Inadmissible = 7,
    BadMaterial = 8,
    BadGeometry = 9,
    Panic = 10,
    Other = 11,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComboNormalMethod {
    Barycenter = 0,
    SecondMoment = 1,
}

/// Voxel phase image.
pub struct ComboImage(PhaseImage);

/// Boxel grid with volume fractions and normals.
pub struct ComboGrid(Grid);

/// Converged cell state.
pub struct ComboSolution {
    sol: Solution,
    composites: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ComboStatus {
    match e {
        Error::ConfigInvalid(_) | Error::Json(_) => ComboStatus::ConfigInvalid,
        Error::UpstreamArtifactMissing(_) => ComboStatus::UpstreamArtifactMissing,
        Error::Io(_) | Error::IoFailure(_) | Error::Format(_) => ComboStatus::Io,
        Error::NoConvergence { .. } | Error::LaminateNoConvergence(_) | Error::CgBreakdown { .. } | Error::LoadPathFailed { .. } => {
            ComboStatus::NoConvergence
        }
        Error::InadmissibleDeformation { .. } | Error::InadmissibleMacroState { .. } | Error::InadmissibleIterate { .. } => ComboStatus::Inadmissible,
        Error::BadMaterial(_) | Error::BadLambda { .. } => ComboStatus::BadMaterial,
        Error::BadShapeSpec(_) | Error::NonDividingFactor { .. } => ComboStatus::BadGeometry,
        _ => ComboStatus::Other,
    }
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, translating errors and panics into a status and the last-error
/// message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ComboStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ComboStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            ComboStatus::NullPointer
        }
        Ok(Err(Fail::Arg(m))) => {
            set_error(m);
            ComboStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(format!("{}: {e}", e.kind()));
            status_of(&e)
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned()).unwrap_or_default();
            set_error(format!("panic: {msg}"));
            ComboStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    let s = borrow(p, what)?;
    CStr::from_ptr(s).to_str().map_err(|_| Fail::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn array<const N: usize, T: Copy>(p: *const T, what: &'static str) -> Result<[T; N], Fail> {
    borrow(p, what)?;
    Ok(std::array::from_fn(|i| *p.add(i)))
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), Fail> {
    let o = borrow_mut(out, "out")?;
    *o = Box::into_raw(Box::new(v));
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn combo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn combo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Voxelizes a shape given as JSON, e.g. `{"shape":"sphere","radius":0.4}`.
///
/// # Safety
/// `shape_json` must be a NUL-terminated string, `dims` and `lengths` must
/// point to three values, `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn combo_image_generate(shape_json: *const c_char, dims: *const usize, lengths: *const f64, out: *mut *mut ComboImage) -> ComboStatus {
    guard(|| {
        let shape: Shape = serde_json::from_str(string(shape_json, "shape_json")?).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        let img = generate(&shape, array(dims, "dims")?, array(lengths, "lengths")?)?;
        put(out, ComboImage(img))
    })
}

/// # Safety
/// `header` must be a NUL-terminated path, `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn combo_image_read(header: *const c_char, out: *mut *mut ComboImage) -> ComboStatus {
    guard(|| put(out, ComboImage(io::read_phase_image(&PathBuf::from(string(header, "header")?))?)))
}

/// # Safety
/// `img` must be a live handle and `header` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn combo_image_write(img: *const ComboImage, header: *const c_char) -> ComboStatus {
    guard(|| Ok(io::write_phase_image(&borrow(img, "img")?.0, &PathBuf::from(string(header, "header")?))?))
}

/// Writes the voxel counts per axis to `dims[0..3]`.
///
/// # Safety
/// `img` must be a live handle and `dims` must point to three writable values.
#[no_mangle]
pub unsafe extern "C" fn combo_image_dims(img: *const ComboImage, dims: *mut usize) -> ComboStatus {
    guard(|| {
        let d = borrow(img, "img")?.0.dims();
        borrow_mut(dims, "dims")?;
        std::ptr::copy_nonoverlapping(d.as_ptr(), dims, 3);
        Ok(())
    })
}

/// # Safety
/// `img` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn combo_image_inclusion_fraction(img: *const ComboImage, out: *mut f64) -> ComboStatus {
    guard(|| {
        *borrow_mut(out, "out")? = borrow(img, "img")?.0.inclusion_fraction();
        Ok(())
    })
}

/// # Safety
/// `img` must be NULL or a handle that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn combo_image_free(img: *mut ComboImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// # Safety
/// `img` must be a live handle, `factors` must point to three values and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn combo_grid_coarsen(img: *const ComboImage, factors: *const usize, out: *mut *mut ComboGrid) -> ComboStatus {
    guard(|| put(out, ComboGrid(coarsen(&borrow(img, "img")?.0, array(factors, "factors")?)?)))
}

/// Estimates the normals of all composite boxels from the image the grid was
/// coarsened from.
///
/// # Safety
/// `grid` and `img` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn combo_grid_assign_normals(grid: *mut ComboGrid, img: *const ComboImage, method: ComboNormalMethod) -> ComboStatus {
    guard(|| {
        let g = &mut borrow_mut(grid, "grid")?.0;
        let img = &borrow(img, "img")?.0;
        if img.dims() != [0, 1, 2].map(|a| g.dims[a] * g.factors[a]) {
            return Err(Fail::Arg("image does not match the grid".into()));
        }
        let m = match method {
            ComboNormalMethod::Barycenter => NormalMethod::Barycenter,
            ComboNormalMethod::SecondMoment => NormalMethod::SecondMoment,
        };
        assign_normals(img, g, m, MomentCentering::WeightedCentroid);
        Ok(())
    })
}

/// # Safety
/// `grid` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn combo_grid_composite_count(grid: *const ComboGrid, out: *mut usize) -> ComboStatus {
    guard(|| {
        *borrow_mut(out, "out")? = borrow(grid, "grid")?.0.composite_count();
        Ok(())
    })
}

/// # Safety
/// `grid` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn combo_grid_inclusion_fraction(grid: *const ComboGrid, out: *mut f64) -> ComboStatus {
    guard(|| {
        *borrow_mut(out, "out")? = borrow(grid, "grid")?.0.inclusion_fraction();
        Ok(())
    })
}

/// # Safety
/// `grid` must be a live handle and `header` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn combo_grid_write(grid: *const ComboGrid, header: *const c_char) -> ComboStatus {
    guard(|| Ok(io::write_combo_grid(&borrow(grid, "grid")?.0, &PathBuf::from(string(header, "header")?))?))
}

/// # Safety
/// `header` must be a NUL-terminated path, `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn combo_grid_read(header: *const c_char, out: *mut *mut ComboGrid) -> ComboStatus {
    guard(|| put(out, ComboGrid(io::read_combo_grid(&PathBuf::from(string(header, "header")?))?)))
}

/// # Safety
/// `grid` must be NULL or a handle that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn combo_grid_free(grid: *mut ComboGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Solves the cell problem on `grid`. `config_json` is a run configuration
/// (NULL for defaults); its `materials`, `loading` and `solver` sections are
/// used.
///
/// # Safety
/// `grid` must be a live handle, `config_json` NULL or a NUL-terminated
/// string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn combo_solve(grid: *const ComboGrid, config_json: *const c_char, out: *mut *mut ComboSolution) -> ComboStatus {
    guard(|| {
        let g = &borrow(grid, "grid")?.0;
        let cfg: RunConfig = if config_json.is_null() {
            RunConfig::default()
        } else {
            serde_json::from_str(string(config_json, "config_json")?).map_err(|e| Error::ConfigInvalid(e.to_string()))?
        };
        cfg.validate()?;
        let micro = Microstructure::from_combo(g, cfg.materials.plus.build()?, cfg.materials.minus.build()?, cfg.solver.combo)?;
        let sol = solve(&micro, &cfg.loading_tensor(), &cfg.solver)?;
        put(out, ComboSolution { sol, composites: micro.composites().len() })
    })
}

/// Writes the mean first Piola-Kirchhoff stress, row-major, to `p[0..9]`.
///
/// # Safety
/// `sol` must be a live handle and `p` must point to nine writable values.
#[no_mangle]
pub unsafe extern "C" fn combo_solution_mean_stress(sol: *const ComboSolution, p: *mut f64) -> ComboStatus {
    guard(|| {
        let m = borrow(sol, "sol")?.sol.p_mean;
        borrow_mut(p, "p")?;
        for i in 0..3 {
            for j in 0..3 {
                *p.add(3 * i + j) = m[(i, j)];
            }
        }
        Ok(())
    })
}

/// Total outer iterations over all load steps.
///
/// # Safety
/// `sol` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn combo_solution_iterations(sol: *const ComboSolution, out: *mut usize) -> ComboStatus {
    guard(|| {
        *borrow_mut(out, "out")? = borrow(sol, "sol")?.sol.report.outer_iterations();
        Ok(())
    })
}

/// Number of cells treated with the laminate law.
///
/// # Safety
/// `sol` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn combo_solution_composites(sol: *const ComboSolution, out: *mut usize) -> ComboStatus {
    guard(|| {
        *borrow_mut(out, "out")? = borrow(sol, "sol")?.composites;
        Ok(())
    })
}

/// # Safety
/// `sol` must be NULL or a handle that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn combo_solution_free(sol: *mut ComboSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}
