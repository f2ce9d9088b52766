use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use dirac_vacuum_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(dv_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn lattice_density_solve_round_trip() {
    unsafe {
        let mut lat = ptr::null_mut();
        assert_eq!(dv_lattice_new(2.0 * std::f64::consts::PI, 1, 1.5, &mut lat), DvStatus::Ok);
        assert_eq!(dv_lattice_num_modes(lat), 19);

        let mut nu = ptr::null_mut();
        assert_eq!(dv_density_gaussian(lat, 0.5, 1.0, &mut nu), DvStatus::Ok);
        let mut d = 0.0;
        assert_eq!(dv_coulomb_inner(nu, nu, &mut d), DvStatus::Ok);
        assert!(d > 0.0);

        let mut cfg = dv_scf_config_default();
        assert_eq!(cfg.max_iter, 500);
        cfg.tol = 1e-11;
        let mut res = ptr::null_mut();
        assert_eq!(dv_scf_solve(nu, 0.05, &cfg, lat, 1.0, &mut res), DvStatus::Ok);
        let e = dv_scf_result_energy(res);
        assert!(e <= 0.0 && e >= -0.025 * d - 1e-9, "{e} {d}");
        assert!(dv_scf_result_residual(res) <= 1e-11);
        assert!(dv_scf_result_iterations(res) >= 1);

        let mut rho = ptr::null_mut();
        assert_eq!(dv_scf_result_density(res, &mut rho), DvStatus::Ok);
        let mut json = ptr::null_mut();
        assert_eq!(dv_density_to_json(rho, &mut json), DvStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(dv_density_from_json(json, &mut back), DvStatus::Ok);
        let mut same = 0.0;
        let mut orig = 0.0;
        assert_eq!(dv_coulomb_inner(back, rho, &mut same), DvStatus::Ok);
        assert_eq!(dv_coulomb_inner(rho, rho, &mut orig), DvStatus::Ok);
        assert_eq!(same, orig);

        dv_string_free(json);
        dv_density_free(back);
        dv_density_free(rho);
        dv_scf_result_free(res);
        dv_density_free(nu);
        dv_lattice_free(lat);
    }
}

#[test]
fn solver_errors_map_to_status_codes() {
    unsafe {
        let mut lat = ptr::null_mut();
        assert_eq!(dv_lattice_new(4.0, 1, -1.0, &mut lat), DvStatus::InvalidArgument);
        assert!(lat.is_null());
        assert_eq!(dv_lattice_new(4.0, 1, 2.0, &mut lat), DvStatus::Ok);
        let mut nu = ptr::null_mut();
        assert_eq!(dv_density_gaussian(lat, 1.0, 0.8, &mut nu), DvStatus::Ok);
        let mut cfg = dv_scf_config_default();
        cfg.max_iter = 1;
        cfg.tol = 1e-15;
        let mut res = ptr::null_mut();
        assert_eq!(dv_scf_solve(nu, 0.1, &cfg, lat, 1.0, &mut res), DvStatus::MaxIterExceeded);
        assert!(res.is_null());
        assert!(last_error().contains("did not converge"));

        let mut x = 0.0;
        assert_eq!(dv_bare_coupling(0.5, 2.0, &mut x), DvStatus::LandauPoleViolation);
        let (mut c1, mut c2) = (0.0, 0.0);
        assert_eq!(dv_pv_coefficients(1.0, 2.0, 2.0, &mut c1, &mut c2), DvStatus::DegenerateMasses);
        assert_eq!(dv_density_gaussian(ptr::null(), 1.0, 1.0, &mut nu), DvStatus::NullPointer);
        let bad = CString::new("{not json").unwrap();
        let mut d = ptr::null_mut();
        assert_ne!(dv_density_from_json(bad.as_ptr(), &mut d), DvStatus::Ok);
        dv_density_free(nu);
        dv_lattice_free(lat);
        dv_lattice_free(ptr::null_mut());
    }
}

#[test]
fn scalar_entry_points() {
    unsafe {
        let (mut c1, mut c2) = (0.0, 0.0);
        assert_eq!(dv_pv_coefficients(1.0, 2.0, 3.0, &mut c1, &mut c2), DvStatus::Ok);
        assert!((c1 + 1.6).abs() < 1e-15 && (c2 - 0.6).abs() < 1e-15);
        let mut b = 0.0;
        assert_eq!(dv_b_constant(100.0, &mut b), DvStatus::Ok);
        let (mut ph, mut bare) = (0.0, 0.0);
        assert_eq!(dv_renormalize_coupling(0.1, b, &mut ph), DvStatus::Ok);
        assert_eq!(dv_bare_coupling(ph, b, &mut bare), DvStatus::Ok);
        assert!((bare - 0.1).abs() < 1e-15);
        let (mut ex, mut asym) = (0.0, 0.0);
        assert_eq!(dv_landau_cutoff(0.2, 1.0, &mut ex, &mut asym), DvStatus::Ok);
        assert!((ex.ln() / asym.ln() - 1.0).abs() < 0.2);
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/dirac_vacuum.h");
    let text = std::fs::read_to_string(&header).expect("generated header");
    for name in ["dv_lattice_new", "dv_scf_solve", "dv_last_error_message", "typedef struct DvLattice DvLattice"] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(&src, "#include \"dirac_vacuum.h\"\nint main(void) { DvScfConfig c = dv_scf_config_default(); return (int)c.max_iter == 500 ? 0 : 1; }\n").unwrap();
    match std::process::Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
    {
        Ok(o) => assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr)),
        Err(e) => eprintln!("skipping C syntax check, no compiler: {e}"),
    }
}
