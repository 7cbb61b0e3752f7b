use std::ffi::{c_char, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use zerovisc_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { zv_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn rate_fit_and_its_errors() {
    let eps = [0.1, 0.05, 0.025];
    let vals: Vec<f64> = eps.iter().map(|e| 2.0 * e * e).collect();
    let (mut slope, mut res) = (0.0, 0.0);
    let s = unsafe { zv_fit_rate(eps.as_ptr(), vals.as_ptr(), 3, &mut slope, &mut res) };
    assert_eq!(s, ZvStatus::Ok);
    assert!((slope - 2.0).abs() < 1e-12 && res < 1e-12);
    let s = unsafe { zv_fit_rate(eps.as_ptr(), vals.as_ptr(), 2, &mut slope, &mut res) };
    assert_eq!(s, ZvStatus::Config);
    assert!(last_error().contains("at least 3"));
    let s = unsafe { zv_fit_rate(ptr::null(), vals.as_ptr(), 3, &mut slope, &mut res) };
    assert_eq!(s, ZvStatus::NullPointer);
}

#[test]
fn config_handles() {
    unsafe {
        let mut c: *mut ZvConfig = ptr::null_mut();
        assert_eq!(zv_config_desk(&mut c), ZvStatus::Ok);
        let good = [0.2, 0.1, 0.05];
        assert_eq!(zv_config_set_eps(c, good.as_ptr(), 3), ZvStatus::Ok);
        let bad = [0.05, 0.1];
        assert_eq!(zv_config_set_eps(c, bad.as_ptr(), 2), ZvStatus::Config);
        assert!(last_error().contains("descending"));
        assert_eq!(zv_config_set_eps(c, ptr::null(), 0), ZvStatus::Config);
        assert_eq!(zv_config_set_time(c, 0.1, 0.003), ZvStatus::Config);
        assert_eq!(zv_config_set_time(c, 0.2, 0.0025), ZvStatus::Ok);
        zv_config_free(c);

        let toml = CString::new("eps = [0.1]").unwrap();
        let mut c2: *mut ZvConfig = ptr::null_mut();
        assert_eq!(zv_config_from_toml(toml.as_ptr(), &mut c2), ZvStatus::Config);
        assert!(c2.is_null());
        assert_eq!(zv_config_from_toml(ptr::null(), &mut c2), ZvStatus::NullPointer);
        zv_config_free(ptr::null_mut());
    }
}

#[test]
fn fields_through_the_c_surface() {
    unsafe {
        let mut g: *mut ZvGrid = ptr::null_mut();
        assert_eq!(zv_grid_new(1, 8, 2.0 * std::f64::consts::PI, 128, 8.0, 2.0, &mut g), ZvStatus::Ok);
        let mut n = 0;
        assert_eq!(zv_grid_len(g, &mut n), ZvStatus::Ok);
        assert_eq!(n, 8 * 128);
        let mut y = vec![0.0; 128];
        assert_eq!(zv_grid_nodes(g, y.as_mut_ptr(), 128), ZvStatus::Ok);
        assert_eq!(zv_grid_nodes(g, y.as_mut_ptr(), 127), ZvStatus::OutOfRange);
        let vals: Vec<f64> = (0..n).map(|q| (-y[q % 128]).exp()).collect();
        let mut f: *mut ZvField = ptr::null_mut();
        assert_eq!(zv_field_from_values(g, vals.as_ptr(), n, &mut f), ZvStatus::Ok);
        let mut df: *mut ZvField = ptr::null_mut();
        assert_eq!(zv_field_dy(f, 1, &mut df), ZvStatus::Ok);
        let mut out = vec![0.0; n];
        assert_eq!(zv_field_values(df, out.as_mut_ptr(), n), ZvStatus::Ok);
        for q in 0..n {
            assert!((out[q] + vals[q]).abs() < 1e-6);
        }
        assert_eq!(zv_field_dy(f, 3, &mut df), ZvStatus::OutOfRange);

        let mut l2 = 0.0;
        assert_eq!(zv_norm(f, ZvNormKind::Tangential, 0, 0.1, 1.0, 0.0, 0.1, &mut l2), ZvStatus::Ok);
        let exact = (2.0 * std::f64::consts::PI * (1.0 - (-16.0f64).exp()) / 2.0).sqrt();
        assert!((l2 - exact).abs() < 1e-6 * exact);
        let mut w = 0.0;
        assert_eq!(zv_norm(f, ZvNormKind::Outer, 1, 0.1, 1.0, 0.0, 0.1, &mut w), ZvStatus::Ok);
        assert!(w > l2);
        assert_eq!(zv_norm(f, ZvNormKind::Conormal, 9, 0.1, 1.0, 0.0, 0.1, &mut w), ZvStatus::Numeric);

        let mut u: *mut ZvField = ptr::null_mut();
        assert_eq!(zv_solve_dirichlet(f, &mut u), ZvStatus::Ok);
        assert_eq!(zv_field_values(u, out.as_mut_ptr(), n), ZvStatus::Ok);
        assert!(out[0].abs() < 1e-12);

        for h in [f, df, u] {
            zv_field_free(h);
        }
        zv_grid_free(g);

        let mut bad: *mut ZvGrid = ptr::null_mut();
        assert_eq!(zv_grid_new(1, 8, 1.0, 4, 8.0, 2.0, &mut bad), ZvStatus::Numeric);
        assert!(!last_error().is_empty());
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/zerovisc.h");
    assert!(header.exists(), "header not generated");
    let src = std::env::temp_dir().join(format!("zerovisc_header_{}.c", std::process::id()));
    std::fs::write(
        &src,
        "#include \"zerovisc.h\"\nint main(void) { ZvStatus s = ZV_STATUS_OK; ZvGrid *g = 0; (void)g; return (int)s; }\n",
    )
    .unwrap();
    for (cc, lang) in [("cc", "c"), ("c++", "c++")] {
        let out = Command::new(cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I"])
            .arg(dir.join("include"))
            .arg(&src)
            .output();
        match out {
            Ok(o) => assert!(o.status.success(), "{cc}: {}", String::from_utf8_lossy(&o.stderr)),
            Err(e) => panic!("{cc} not runnable: {e}"),
        }
    }
    let _ = std::fs::remove_file(src);
}
