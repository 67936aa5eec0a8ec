use std::ffi::{c_char, CString};
use std::ptr;

use defect_resonance_ffi::*;

const REF1: &str = r#"{
  "periodic": {"cos": [0.0, 10.0]},
  "defect": {"shape": "smooth_bump", "amplitude": -8.0, "rho": 0.5},
  "symmetric": true
}"#;

struct Handle(*mut DrPotential);

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { dr_potential_free(self.0) }
    }
}

fn load(json: &str) -> Result<Handle, (DrStatus, String)> {
    let text = CString::new(json).unwrap();
    let mut h = ptr::null_mut();
    let s = unsafe { dr_potential_from_json(text.as_ptr(), &mut h) };
    if s == DrStatus::Ok {
        Ok(Handle(h))
    } else {
        assert!(h.is_null());
        Err((s, last_error()))
    }
}

fn last_error() -> String {
    let n = unsafe { dr_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; n + 1];
    unsafe { dr_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn first_gap(h: &Handle) -> DrInterval {
    let mut count = 0;
    let s = unsafe { dr_band_gap_scan(h.0, -10.0, 40.0, 2000, ptr::null_mut(), 0, &mut count) };
    assert_eq!(s, DrStatus::BufferTooSmall);
    assert!(last_error().contains("capacity"));
    let mut buf = vec![
        DrInterval {
            is_gap: false,
            lo: 0.0,
            hi: 0.0
        };
        count
    ];
    let s = unsafe { dr_band_gap_scan(h.0, -10.0, 40.0, 2000, buf.as_mut_ptr(), buf.len(), &mut count) };
    assert_eq!(s, DrStatus::Ok);
    assert_eq!(count, buf.len());
    *buf.iter().find(|i| i.is_gap && i.lo > 0.0).unwrap()
}

fn modes_in(h: &Handle, gap: DrInterval) -> Vec<DrDefectMode> {
    let mut buf = [DrDefectMode {
        energy: 0.0,
        parity: DrParity::None,
        normalization: DrNormalization::UnitValue,
        w0: 0.0,
        k: 0.0,
        k_fit: 0.0,
        antiperiodic: false,
    }; 8];
    let mut count = 0;
    let s = unsafe {
        dr_find_defect_modes(
            h.0,
            gap.lo,
            gap.hi,
            1e-12,
            buf.as_mut_ptr(),
            buf.len(),
            &mut count,
        )
    };
    assert_eq!(s, DrStatus::Ok, "{}", last_error());
    buf[..count].to_vec()
}

#[test]
fn eval_and_floquet() {
    let h = load(REF1).unwrap();
    let mut v = 0.0;
    assert_eq!(unsafe { dr_potential_eval(h.0, 0.0, &mut v) }, DrStatus::Ok);
    assert!((v - (10.0 - 8.0 * (-1.0f64).exp())).abs() < 1e-12);

    let mut f = std::mem::MaybeUninit::<DrFloquet>::uninit();
    let s = unsafe {
        dr_floquet(
            h.0,
            DrComplex {
                re: 14.310410360986,
                im: 0.0,
            },
            1e-12,
            f.as_mut_ptr(),
        )
    };
    assert_eq!(s, DrStatus::Ok);
    let f = unsafe { f.assume_init() };
    assert!(f.is_gap);
    assert!((f.k - 0.20894).abs() < 1e-5, "{}", f.k);
    let prod_re = f.lambda_small.re * f.lambda_large.re - f.lambda_small.im * f.lambda_large.im;
    assert!((prod_re - 1.0).abs() < 1e-10);
}

#[test]
fn defect_mode_and_resonance() {
    let h = load(REF1).unwrap();
    let gap = first_gap(&h);
    assert!((gap.lo - 4.5725).abs() < 1e-3 && (gap.hi - 14.5326).abs() < 1e-3);
    let modes = modes_in(&h, gap);
    let mode = *modes.iter().find(|m| (m.energy - 14.3104).abs() < 1e-3).unwrap();
    assert!((mode.energy - 14.310410360986).abs() < 1e-9);
    assert_eq!(mode.parity, DrParity::Even);

    let opts = dr_solver_options_default();
    let mut r = std::mem::MaybeUninit::<DrResonance>::uninit();
    let s = unsafe { dr_solve_resonance(h.0, &mode, 8.0, &opts, r.as_mut_ptr()) };
    assert_eq!(s, DrStatus::Ok, "{}", last_error());
    let r = unsafe { r.assume_init() };
    assert!(r.z_star.im < 0.0);
    assert!(r.residual < 1e-10);
    assert!(r.w_star.re.is_nan());
    assert!((r.lifetime - 1.0 / (2.0 * r.z_star.im.abs())).abs() < 1e-9 * r.lifetime);

    let (mut t, mut dt) = (DrComplex { re: 0.0, im: 0.0 }, DrComplex { re: 0.0, im: 0.0 });
    let one = DrComplex { re: 1.0, im: 0.0 };
    let zero = DrComplex { re: 0.0, im: 0.0 };
    let s = unsafe {
        dr_theta(
            h.0,
            r.z_star,
            8.0,
            one,
            zero,
            DrBranch::Resonance,
            &mut t,
            &mut dt,
        )
    };
    assert_eq!(s, DrStatus::Ok);
    assert!(t.re.hypot(t.im) < 1e-10);
    assert!(dt.re.hypot(dt.im) > 1.0);
}

#[test]
fn errors_are_reported() {
    let (s, msg) = load(r#"{"periodic": {"cos": [0.0]}, "defect": 3}"#)
        .err()
        .unwrap();
    assert_eq!(s, DrStatus::InvalidPotential);
    assert!(!msg.is_empty());

    let h = load(REF1).unwrap();
    let one = DrComplex { re: 1.0, im: 0.0 };
    let mut t = one;
    let s = unsafe {
        dr_theta(
            h.0,
            DrComplex { re: 14.3, im: 0.0 },
            0.25,
            one,
            one,
            DrBranch::Resonance,
            &mut t,
            ptr::null_mut(),
        )
    };
    assert_eq!(s, DrStatus::TruncationInsideSupport);
    assert!(last_error().contains("must exceed"));

    let s = unsafe {
        dr_theta(
            h.0,
            DrComplex { re: -1.0, im: 0.0 },
            8.0,
            one,
            one,
            DrBranch::Resonance,
            &mut t,
            ptr::null_mut(),
        )
    };
    assert_eq!(s, DrStatus::BranchCut);

    let mut v = 0.0;
    assert_eq!(
        unsafe { dr_potential_eval(ptr::null(), 0.0, &mut v) },
        DrStatus::NullPointer
    );
    assert_eq!(unsafe { dr_potential_eval(h.0, 0.0, &mut v) }, DrStatus::Ok);
    assert!(last_error().is_empty());
}

#[test]
fn truncated_error_message() {
    let h = load(REF1).unwrap();
    let one = DrComplex { re: 1.0, im: 0.0 };
    let mut t = one;
    unsafe {
        dr_theta(
            h.0,
            one,
            0.1,
            one,
            one,
            DrBranch::Resonance,
            &mut t,
            ptr::null_mut(),
        )
    };
    let full = last_error();
    let mut buf = [0 as c_char; 8];
    let n = unsafe { dr_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(n, full.len());
    assert_eq!(buf[7], 0);
    let head: Vec<u8> = buf[..7].iter().map(|&c| c as u8).collect();
    assert_eq!(head, full.as_bytes()[..7]);
}
