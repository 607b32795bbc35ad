use std::ffi::{CStr, CString};
use std::ptr;

use combo_ffi::*;

fn last_error() -> String {
    let p = combo_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn pipeline_through_handles() {
    unsafe {
        let shape = CString::new(r#"{"shape":"sphere","radius":0.4}"#).unwrap();
        let mut img = ptr::null_mut();
        assert_eq!(combo_image_generate(shape.as_ptr(), [64usize; 3].as_ptr(), [1.0f64; 3].as_ptr(), &mut img), ComboStatus::Ok);
        assert!(combo_last_error_message().is_null());
        let mut dims = [0usize; 3];
        assert_eq!(combo_image_dims(img, dims.as_mut_ptr()), ComboStatus::Ok);
        assert_eq!(dims, [64; 3]);

        let mut grid = ptr::null_mut();
        assert_eq!(combo_grid_coarsen(img, [8usize; 3].as_ptr(), &mut grid), ComboStatus::Ok);
        assert_eq!(combo_grid_assign_normals(grid, img, ComboNormalMethod::SecondMoment), ComboStatus::Ok);
        let (mut n, mut fi, mut fg) = (0usize, 0.0, 0.0);
        assert_eq!(combo_grid_composite_count(grid, &mut n), ComboStatus::Ok);
        assert_eq!(combo_image_inclusion_fraction(img, &mut fi), ComboStatus::Ok);
        assert_eq!(combo_grid_inclusion_fraction(grid, &mut fg), ComboStatus::Ok);
        assert!(n > 0);
        assert_eq!(fi, fg);

        let cfg = CString::new(r#"{"solver": {"tol_equilibrium": 1e-6}}"#).unwrap();
        let mut sol = ptr::null_mut();
        assert_eq!(combo_solve(grid, cfg.as_ptr(), &mut sol), ComboStatus::Ok);
        let mut p = [0.0; 9];
        assert_eq!(combo_solution_mean_stress(sol, p.as_mut_ptr()), ComboStatus::Ok);
        assert!((p[1] - 0.3747).abs() < 5e-3, "{p:?}");
        let mut c = 0usize;
        assert_eq!(combo_solution_composites(sol, &mut c), ComboStatus::Ok);
        assert_eq!(c, n);

        combo_solution_free(sol);
        combo_grid_free(grid);
        combo_image_free(img);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut img = ptr::null_mut();
        assert_eq!(combo_image_generate(ptr::null(), [4usize; 3].as_ptr(), [1.0f64; 3].as_ptr(), &mut img), ComboStatus::NullPointer);
        assert!(last_error().contains("shape_json"));

        let bad = CString::new(r#"{"shape":"sphere","radius":-1}"#).unwrap();
        assert_eq!(combo_image_generate(bad.as_ptr(), [4usize; 3].as_ptr(), [1.0f64; 3].as_ptr(), &mut img), ComboStatus::BadGeometry);

        let shape = CString::new(r#"{"shape":"sphere","radius":0.3}"#).unwrap();
        assert_eq!(combo_image_generate(shape.as_ptr(), [6usize; 3].as_ptr(), [1.0f64; 3].as_ptr(), &mut img), ComboStatus::Ok);
        let mut grid = ptr::null_mut();
        assert_eq!(combo_grid_coarsen(img, [4usize; 3].as_ptr(), &mut grid), ComboStatus::BadGeometry);
        assert!(last_error().starts_with("NonDividingFactor"));

        let path = CString::new("/nonexistent/dir/image.json").unwrap();
        let mut other = ptr::null_mut();
        assert_eq!(combo_image_read(path.as_ptr(), &mut other), ComboStatus::UpstreamArtifactMissing);

        assert_eq!(combo_grid_coarsen(img, [3usize; 3].as_ptr(), &mut grid), ComboStatus::Ok);
        let cfg = CString::new(r#"{"loading": [[1,0,0],[0,1,0],[0,0,-1]]}"#).unwrap();
        let mut sol = ptr::null_mut();
        assert_eq!(combo_solve(grid, cfg.as_ptr(), &mut sol), ComboStatus::ConfigInvalid);
        assert!(sol.is_null());

        combo_grid_free(grid);
        combo_image_free(img);
        combo_image_free(ptr::null_mut());
    }
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let shape = CString::new(r#"{"shape":"octahedron","radius":0.45}"#).unwrap();
        let mut img = ptr::null_mut();
        assert_eq!(combo_image_generate(shape.as_ptr(), [16usize; 3].as_ptr(), [1.0f64; 3].as_ptr(), &mut img), ComboStatus::Ok);
        let ih = CString::new(dir.path().join("img.json").to_str().unwrap()).unwrap();
        assert_eq!(combo_image_write(img, ih.as_ptr()), ComboStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(combo_image_read(ih.as_ptr(), &mut back), ComboStatus::Ok);
        let (mut a, mut b) = (0.0, 0.0);
        combo_image_inclusion_fraction(img, &mut a);
        combo_image_inclusion_fraction(back, &mut b);
        assert_eq!(a, b);

        let mut grid = ptr::null_mut();
        assert_eq!(combo_grid_coarsen(back, [4usize; 3].as_ptr(), &mut grid), ComboStatus::Ok);
        let gh = CString::new(dir.path().join("grid.json").to_str().unwrap()).unwrap();
        assert_eq!(combo_grid_write(grid, gh.as_ptr()), ComboStatus::Ok);
        let mut g2 = ptr::null_mut();
        assert_eq!(combo_grid_read(gh.as_ptr(), &mut g2), ComboStatus::Ok);
        let (mut n1, mut n2) = (0usize, 0usize);
        combo_grid_composite_count(grid, &mut n1);
        combo_grid_composite_count(g2, &mut n2);
        assert_eq!(n1, n2);
        assert!(!CStr::from_ptr(combo_version()).to_str().unwrap().is_empty());

        combo_grid_free(g2);
        combo_grid_free(grid);
        combo_image_free(back);
        combo_image_free(img);
    }
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/combo.h")).unwrap();
    for f in ["combo_last_error_message", "combo_image_generate", "combo_grid_coarsen", "combo_solve", "combo_solution_mean_stress", "combo_solution_free"] {
        assert!(h.contains(f), "{f}");
    }
}
