mod common;

use common::*;
use defect_resonance::defect::{find_defect_modes, profile, Normalization, Parity};
use defect_resonance::floquet::gap_data;
use defect_resonance::Potential;
use std::time::Instant;

fn fd_mode(p: &Potential, e: f64, half_width: f64) -> Richardson {
    let lo = e - 0.05;
    let hi = e + 0.05;
    fd_eigenvalue(|x| p.eval(x), -half_width, half_width, 5e-4, lo, hi)
}

fn check(p: &Potential, gap_energy: f64, half_width: f64) -> (f64, Richardson) {
    let gap = gap_containing(p, gap_energy);
    let modes = find_defect_modes(p, &gap, 1e-12).unwrap();
    assert_eq!(modes.len(), 1, "{modes:?}");
    let e = modes[0].energy;
    let t = Instant::now();
    let fd = fd_mode(p, e, half_width);
    println!(
        "E = {e:.12}, oracle {:.12} +- {:.2e} ({:?})",
        fd.value,
        fd.error,
        t.elapsed()
    );
    assert!((e - fd.value).abs() <= 5.0 * fd.error, "{e} vs {fd:?}");
    (e, fd)
}

#[test]
fn ref1_even_mode_matches_finite_differences() {
    let p = ref1();
    let (e, fd) = check(&p, 10.0, 40.0);
    assert!((e - fd.value).abs() < 1e-6);
    let gap = gap_containing(&p, e);
    let m = &find_defect_modes(&p, &gap, 1e-12).unwrap()[0];
    assert_eq!(m.parity, Parity::Even);
    assert!(!m.antiperiodic || gap_data(&p, e).unwrap().is_antiperiodic());
}

#[test]
fn ref2_mode_matches_finite_differences() {
    let p = ref2();
    let (e, _) = check(&p, 10.0, 40.0);
    let m = &find_defect_modes(&p, &gap_containing(&p, e), 1e-12).unwrap()[0];
    assert_eq!(m.parity, Parity::None);
    // the shifted bump keeps the mode close to the centred one
    assert!((e - 14.3434288898).abs() < 1e-8);
}

#[test]
fn ref3_bound_mode_matches_finite_differences() {
    let p = ref3();
    let (e, _) = check(&p, -3.0, 40.0);
    assert!(e < 0.0);
}

#[test]
fn ref4_edge_mode_matches_finite_differences() {
    let p = ref4();
    let (e, _) = check(&p, -3.0, 40.0);
    let m = &find_defect_modes(&p, &gap_containing(&p, e), 1e-12).unwrap()[0];
    assert_eq!(m.normalization, Normalization::UnitValue);
    assert!((m.w0 - (-e).sqrt()).abs() < 1e-12);
}

#[test]
fn profile_decays_at_floquet_rate() {
    let p = ref1();
    let gap = gap_containing(&p, 10.0);
    let m = &find_defect_modes(&p, &gap, 1e-12).unwrap()[0];
    assert!((m.k_fit - m.k).abs() / m.k < 0.05);
    let prof = profile(&p, m.energy, m.initial_data(), 20.0, 801).unwrap();
    let at = |x: f64| prof.iter().find(|s| (s.x - x).abs() < 1e-9).unwrap().phi;
    for x in [3.0, 7.0, 12.0] {
        assert!((at(x) - at(-x)).abs() < 1e-8 * at(0.0).abs());
        let ratio = (at(x + 1.0) / at(x)).abs();
        assert!((ratio - (-m.k).exp()).abs() < 1e-6, "x = {x}: {ratio}");
    }
}
