use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use triplet_mur_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(tmur_last_error()) }.to_string_lossy().into_owned()
}

fn pauli() -> *mut TmurTriplet {
    let m = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { tmur_triplet_new(m.as_ptr(), &mut t) }, TmurStatus::Ok);
    assert!(!t.is_null());
    t
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(tmur_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn analyze_pauli() {
    let t = pauli();
    let mut r = TmurReport::default();
    assert_eq!(unsafe { tmur_analyze(t, &mut r) }, TmurStatus::Ok);
    let expect = 2.0 * (3f64.sqrt() - 1.0);
    assert!((r.lower_bound - expect).abs() < 1e-9);
    assert!((r.lhs - 4.0 * 3f64.sqrt()).abs() < 1e-9);
    assert!(!r.jointly_measurable);
    assert!(r.attainable);
    assert!(r.ft_point.iter().all(|x| x.abs() < 1e-6));
    assert!(last_error().is_empty());
    unsafe { tmur_triplet_free(t) };
}

#[test]
fn solve_pauli_both_forms() {
    let t = pauli();
    let expect = 2.0 * (3f64.sqrt() - 1.0);
    for form in [TmurForm::Bloch, TmurForm::Povm] {
        let mut s = ptr::null_mut();
        assert_eq!(unsafe { tmur_solve(t, form, 1e-9, &mut s) }, TmurStatus::Ok, "{}", last_error());
        let mut v = 0.0;
        assert_eq!(unsafe { tmur_solution_value(s, &mut v) }, TmurStatus::Ok);
        assert!((v - expect).abs() < 1e-6, "{form:?}: {v}");

        let mut n = [0.0; 9];
        assert_eq!(unsafe { tmur_solution_approximators(s, n.as_mut_ptr()) }, TmurStatus::Ok);
        for j in 0..3 {
            let len = (n[3 * j] * n[3 * j] + n[3 * j + 1] * n[3 * j + 1] + n[3 * j + 2] * n[3 * j + 2]).sqrt();
            assert!((len - 1.0 / 3f64.sqrt()).abs() < 1e-5, "{form:?}: {len}");
        }
        let mut biases = [1.0; 3];
        assert_eq!(unsafe { tmur_solution_biases(s, biases.as_mut_ptr()) }, TmurStatus::Ok);
        assert!(biases.iter().all(|b| b.abs() < 1e-5));

        let mut w = [0.0; 3];
        assert_eq!(unsafe { tmur_solution_worst_state(s, w.as_mut_ptr()) }, TmurStatus::Ok);
        assert!(w.iter().map(|x| x * x).sum::<f64>() <= 1.0 + 1e-9);

        let mut len = 0usize;
        assert_eq!(unsafe { tmur_solution_parent_len(s, &mut len) }, TmurStatus::Ok);
        assert!(len > 0);
        let (mut a_sum, mut b_sum) = (0.0, [0.0; 3]);
        for i in 0..len {
            let (mut e, mut r) = ([0.0; 4], [0.0; 3]);
            assert_eq!(unsafe { tmur_solution_parent_outcome(s, i, e.as_mut_ptr(), r.as_mut_ptr()) }, TmurStatus::Ok);
            a_sum += e[0];
            for k in 0..3 {
                b_sum[k] += e[k + 1];
            }
            assert!(r.iter().all(|p| (0.0..=1.0).contains(p)));
        }
        // The effects add up to the identity.
        assert!((a_sum - 2.0).abs() < 1e-7, "{a_sum}");
        assert!(b_sum.iter().all(|b| b.abs() < 1e-7));

        let (mut e, mut r) = ([0.0; 4], [0.0; 3]);
        assert_eq!(
            unsafe { tmur_solution_parent_outcome(s, len, e.as_mut_ptr(), r.as_mut_ptr()) },
            TmurStatus::InvalidInput
        );
        unsafe { tmur_solution_free(s) };
    }
    unsafe { tmur_triplet_free(t) };
}

#[test]
fn family_triplets() {
    let name = CString::new("m_perp").unwrap();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { tmur_triplet_family(name.as_ptr(), 90.0, &mut t) }, TmurStatus::Ok);
    let mut m = [0.0; 9];
    assert_eq!(unsafe { tmur_triplet_bloch(t, m.as_mut_ptr()) }, TmurStatus::Ok);
    for j in 0..3 {
        let len: f64 = m[3 * j..3 * j + 3].iter().map(|x| x * x).sum();
        assert!((len - 1.0).abs() < 1e-12);
    }
    unsafe { tmur_triplet_free(t) };

    let bad = CString::new("m_q").unwrap();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { tmur_triplet_family(bad.as_ptr(), 10.0, &mut t) }, TmurStatus::InvalidInput);
    assert!(t.is_null());
    assert!(last_error().contains("m_q"));
    assert_eq!(unsafe { tmur_triplet_family(name.as_ptr(), 91.0, &mut t) }, TmurStatus::InvalidInput);
}

#[test]
fn closed_forms() {
    let mut v = 0.0;
    assert_eq!(unsafe { tmur_delta_orthogonal(0.0, &mut v) }, TmurStatus::Ok);
    assert!((v - 2.0 * (3f64.sqrt() - 1.0)).abs() < 1e-12);
    assert_eq!(unsafe { tmur_delta_orthogonal(90.0, &mut v) }, TmurStatus::Ok);
    assert_eq!(v, 0.0);
    // At 45 degrees the family is an orthonormal triad.
    assert_eq!(unsafe { tmur_delta_perp(45.0, &mut v) }, TmurStatus::Ok);
    assert!((v - 2.0 * (3f64.sqrt() - 1.0)).abs() < 1e-9);
    assert_eq!(unsafe { tmur_delta_y(120.0, &mut v) }, TmurStatus::InvalidInput);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { tmur_delta_y(90.0, &mut v) }, TmurStatus::Ok);
    assert!(last_error().is_empty());
}

#[test]
fn invalid_and_null_arguments() {
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { tmur_triplet_new(ptr::null(), &mut t) }, TmurStatus::NullPointer);
    let m = [1.0; 9];
    assert_eq!(unsafe { tmur_triplet_new(m.as_ptr(), ptr::null_mut()) }, TmurStatus::NullPointer);
    assert_eq!(unsafe { tmur_triplet_new(m.as_ptr(), &mut t) }, TmurStatus::InvalidInput);
    assert!(t.is_null());
    let nan = [f64::NAN; 9];
    assert_eq!(unsafe { tmur_triplet_new(nan.as_ptr(), &mut t) }, TmurStatus::InvalidInput);

    let mut r = TmurReport::default();
    assert_eq!(unsafe { tmur_analyze(ptr::null(), &mut r) }, TmurStatus::NullPointer);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { tmur_solve(ptr::null(), TmurForm::Bloch, 1e-9, &mut s) }, TmurStatus::NullPointer);
    let mut v = 0.0;
    assert_eq!(unsafe { tmur_solution_value(ptr::null(), &mut v) }, TmurStatus::NullPointer);
    assert_eq!(unsafe { tmur_delta_perp(10.0, ptr::null_mut()) }, TmurStatus::NullPointer);
    assert!(last_error().contains("null"));

    let p = pauli();
    assert_eq!(unsafe { tmur_solve(p, TmurForm::Bloch, -1.0, &mut s) }, TmurStatus::InvalidInput);
    assert!(s.is_null());
    unsafe {
        tmur_triplet_free(p);
        tmur_triplet_free(ptr::null_mut());
        tmur_solution_free(ptr::null_mut());
    }
}

#[test]
fn header_parses_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/triplet_mur.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["tmur_triplet_new", "tmur_solve", "tmur_solution_parent_outcome", "tmur_delta_y", "TMUR_STATUS_OK"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("check.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{}\"\nint main(void) {{ TmurTriplet *t = 0; TmurReport r; return tmur_analyze(t, &r) == TMUR_STATUS_OK; }}\n",
            header.display()
        ),
    )
    .unwrap();
    match Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).output() {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("cc not found, header compile check skipped"),
    }
}
