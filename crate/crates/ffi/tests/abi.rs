use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ips_ffi::*;

fn last_error() -> String {
    unsafe {
        let n = ips_last_error_message(ptr::null_mut(), 0);
        let mut buf = vec![0 as c_char; n + 1];
        ips_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn model_lifecycle_and_evolve() {
    let name = CString::new("contact").unwrap();
    let params = CString::new(r#"{"lambda": 2.0}"#).unwrap();
    let mut m: *mut IpsModel = ptr::null_mut();
    unsafe {
        assert_eq!(ips_model_new(name.as_ptr(), params.as_ptr(), 1, 30, &mut m), IpsStatus::Ok);
        assert_eq!(ips_model_n_sites(m), 30);
        assert_eq!(ips_model_alphabet(m), 2);
        let x0 = [1u8; 30];
        let mut a = vec![0u8; 30];
        let mut b = vec![0u8; 30];
        assert_eq!(ips_model_evolve(m, x0.as_ptr(), 30, 1.0, 7, a.as_mut_ptr()), IpsStatus::Ok);
        assert_eq!(ips_model_evolve(m, x0.as_ptr(), 30, 1.0, 7, b.as_mut_ptr()), IpsStatus::Ok);
        assert_eq!(a, b);
        // The all-zero state is absorbing.
        let z = [0u8; 30];
        assert_eq!(ips_model_evolve(m, z.as_ptr(), 30, 3.0, 1, a.as_mut_ptr()), IpsStatus::Ok);
        assert!(a.iter().all(|&s| s == 0));
        assert_eq!(
            ips_model_evolve(m, x0.as_ptr(), 29, 1.0, 7, a.as_mut_ptr()),
            IpsStatus::InvalidArgument
        );
        assert!(last_error().contains("29"));
        ips_model_free(m);
        ips_model_free(ptr::null_mut());
    }
}

#[test]
fn errors_are_reported() {
    let mut m: *mut IpsModel = ptr::null_mut();
    let bad = CString::new("no_such_model").unwrap();
    unsafe {
        assert_eq!(ips_model_new(bad.as_ptr(), ptr::null(), 1, 10, &mut m), IpsStatus::InvalidArgument);
        assert!(m.is_null());
        assert!(last_error().contains("no_such_model"));
        assert_eq!(ips_model_new(ptr::null(), ptr::null(), 1, 10, &mut m), IpsStatus::NullPointer);
        let name = CString::new("voter").unwrap();
        let p = CString::new("{\"lambda\": ").unwrap();
        assert_eq!(ips_model_new(name.as_ptr(), p.as_ptr(), 1, 10, &mut m), IpsStatus::InvalidArgument);
        assert_eq!(ips_model_n_sites(ptr::null()), 0);
        let mut out = IpsProportion::default();
        assert_eq!(ips_contact_survival(1.0, 1, 1.0, 10, 0, &mut out), IpsStatus::InvalidArgument);
    }
}

#[test]
fn survival_and_run() {
    unsafe {
        let mut p = IpsProportion::default();
        assert_eq!(ips_contact_survival(0.5, 41, 20.0, 200, 3, &mut p), IpsStatus::Ok);
        assert!(p.estimate < 0.05 && p.lo <= p.estimate && p.estimate <= p.hi);

        let cmd = CString::new("couple").unwrap();
        let params = CString::new(r#"{"coupling": "lambda", "runs": 10, "n": 16}"#).unwrap();
        let mut csv: *mut c_char = ptr::null_mut();
        assert_eq!(ips_run(cmd.as_ptr(), params.as_ptr(), 1, &mut csv), IpsStatus::Ok);
        let text = CStr::from_ptr(csv).to_str().unwrap().to_owned();
        ips_string_free(csv);
        assert!(text.starts_with("coupling,runs,events,violations\nlambda,10,"));
        assert!(text.trim_end().ends_with(",0"));

        let params = CString::new(r#"{"runz": 1}"#).unwrap();
        assert_eq!(ips_run(cmd.as_ptr(), params.as_ptr(), 1, &mut csv), IpsStatus::InvalidArgument);
        assert!(csv.is_null());
        let v = CStr::from_ptr(ips_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/ips.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["ips_model_new", "ips_model_free", "ips_model_evolve", "ips_run", "ips_string_free", "IPS_STATUS_PANIC"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let src = std::env::temp_dir().join(format!("ips_header_{}.c", std::process::id()));
    std::fs::write(
        &src,
        "#include \"ips.h\"\nint main(void) { IpsModel *m = 0; return ips_model_new(\"voter\", 0, 1, 4, &m) == IPS_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .status();
    let _ = std::fs::remove_file(&src);
    match status {
        Ok(s) => assert!(s.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler found, skipped syntax check"),
    }
}
