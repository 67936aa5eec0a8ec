//! Defect eigenvalues in spectral gaps of the untruncated operator.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::fit_rate;
use crate::floquet::{self, FloquetData, SpectralInterval, MONODROMY_TOL};
use crate::ode::{self, StateVector};
use crate::potential::Potential;

/// ODE tolerance for shooting and profiles.
pub const MATCH_TOL: f64 = 1e-13;

/// Default number of scan points per gap.
pub const SCAN_POINTS: usize = 400;

/// Below this fraction of `max |Phi|` the value at the origin is treated as
/// zero and the unit-slope normalization is used instead.
pub const SMALL_VALUE_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
    None,
}

impl Parity {
    /// `+1` for even, `-1` for odd.
    pub fn sign(self) -> Option<f64> {
        match self {
            Parity::Even => Some(1.0),
            Parity::Odd => Some(-1.0),
            Parity::None => None,
        }
    }

    pub fn initial_data(self) -> Option<StateVector> {
        match self {
            Parity::Even => Some(StateVector::real(1.0, 0.0)),
            Parity::Odd => Some(StateVector::real(0.0, 1.0)),
            Parity::None => None,
        }
    }
}

/// How the one free parameter `w` enters the data at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `Phi(0) = 1`, `Phi'(0) = w`.
    UnitValue,
    /// `Phi(0) = -w`, `Phi'(0) = 1`.
    UnitSlope,
}

impl Normalization {
    pub fn initial_data(self, w: Complex64) -> StateVector {
        let one = Complex64::new(1.0, 0.0);
        match self {
            Normalization::UnitValue => StateVector::new(one, w),
            Normalization::UnitSlope => StateVector::new(-w, one),
        }
    }

    /// `d/dw` of the initial data.
    pub fn dw_data(self) -> StateVector {
        match self {
            Normalization::UnitValue => StateVector::real(0.0, 1.0),
            Normalization::UnitSlope => StateVector::real(-1.0, 0.0),
        }
    }

    /// Normalization and `w` for a state `(value, slope)` at the origin.
    pub fn from_state(value: f64, slope: f64, unit_slope: bool) -> (Self, f64) {
        if unit_slope {
            (Normalization::UnitSlope, -value / slope)
        } else {
            (Normalization::UnitValue, slope / value)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileSample {
    pub x: f64,
    pub phi: f64,
    pub dphi: f64,
}

/// A gap eigenvalue with its normalized eigenfunction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectMode {
    pub energy: f64,
    pub parity: Parity,
    pub normalization: Normalization,
    pub w0: f64,
    /// Floquet decay rate at `energy`.
    pub k: f64,
    /// Rate fitted to per-period maxima of `|Phi|`.
    pub k_fit: f64,
    pub antiperiodic: bool,
    /// Growing-solution coefficient left after polishing, relative to the
    /// bracket scale.
    pub matching_residual: f64,
    #[serde(skip)]
    pub profile: Vec<ProfileSample>,
}

impl DefectMode {
    pub fn initial_data(&self) -> StateVector {
        self.normalization.initial_data(Complex64::new(self.w0, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectOptions {
    pub scan_points: usize,
    /// Root tolerance in `E`.
    pub tol: f64,
    pub ode_tol: f64,
    /// Matching point; defaults to `ceil(rho) + 5`.
    pub matching_point: Option<f64>,
    /// Use the two-sided determinant even for symmetric potentials.
    pub two_sided: bool,
    pub profile_x_max: Option<f64>,
    pub profile_points: usize,
}

impl Default for DefectOptions {
    fn default() -> Self {
        Self {
            scan_points: SCAN_POINTS,
            tol: 1e-10,
            ode_tol: MATCH_TOL,
            matching_point: None,
            two_sided: false,
            profile_x_max: None,
            profile_points: 401,
        }
    }
}

/// Default matching point `ceil(rho) + 5`.
pub fn default_matching_point(p: &Potential) -> f64 {
    p.rho_ceil() + 5.0
}

fn check_matching_point(p: &Potential, x: f64) -> Result<()> {
    if !(x >= p.support_radius() + 1.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "matching point {x} must be at least rho + 1 = {}",
            p.support_radius() + 1.0
        )));
    }
    Ok(())
}

/// Floquet data of the background for the period `[x0, x0 + 1]`.
fn floquet_at(p: &Potential, e: f64, x0: f64) -> Result<FloquetData> {
    let data = floquet::gap_data(p, e)?;
    if x0.fract() == 0.0 {
        return Ok(data);
    }
    let bg = Potential::periodic_only(p.periodic().clone())?;
    let t = ode::transfer_matrix(&bg, Complex64::new(e, 0.0), x0, x0 + 1.0, MONODROMY_TOL)?;
    let shifted = floquet::monodromy_from_matrix(Complex64::new(e, 0.0), t);
    shifted.require_gap()?;
    Ok(shifted)
}

/// Decay rate of the free left half-line.
fn half_line_kappa(e: f64) -> Result<f64> {
    if !(e < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "half-line edge states need E < 0, got {e}"
        )));
    }
    Ok((-e).sqrt())
}

/// Initial data of the shooting problem for one-sided matching.
fn one_sided_data(p: &Potential, e: f64, parity: Parity) -> Result<StateVector> {
    if p.is_half_line() {
        return Ok(StateVector::real(1.0, half_line_kappa(e)?));
    }
    parity
        .initial_data()
        .ok_or_else(|| Error::InvalidArgument("parity none needs the two-sided matching determinant".into()))
}

/// Coefficient of the growing Floquet solution at `x` for the solution with
/// parity data at the origin (or free-decay data for a half-line potential).
pub fn matching_function(p: &Potential, e: f64, parity: Parity, x: f64) -> Result<f64> {
    matching_function_with(p, e, parity, x, MATCH_TOL)
}

pub fn matching_function_with(p: &Potential, e: f64, parity: Parity, x: f64, tol: f64) -> Result<f64> {
    check_matching_point(p, x)?;
    let data = floquet_at(p, e, x)?;
    let init = one_sided_data(p, e, parity)?;
    let y = ode::integrate(p, Complex64::new(e, 0.0), 0.0, x, init, tol)?;
    Ok(data.decompose(y).1.re)
}

/// Two-sided matching: the determinant of the map from data at the origin to
/// (growing coefficient at `+x`, coefficient growing toward `-inf` at `-x`),
/// and a unit null-direction estimate `(Phi(0), Phi'(0))`.
pub fn two_sided_matching(p: &Potential, e: f64, x: f64, tol: f64) -> Result<(f64, [f64; 2])> {
    if p.is_half_line() {
        return Err(Error::InvalidArgument(
            "two-sided matching is not defined for half-line potentials".into(),
        ));
    }
    check_matching_point(p, x)?;
    let right = floquet_at(p, e, x)?;
    let left = floquet_at(p, e, -x)?;
    let z = Complex64::new(e, 0.0);
    let mut rows = [[0.0; 2]; 2];
    for (j, init) in [StateVector::real(1.0, 0.0), StateVector::real(0.0, 1.0)]
        .into_iter()
        .enumerate()
    {
        let yp = ode::integrate(p, z, 0.0, x, init, tol)?;
        let ym = ode::integrate(p, z, 0.0, -x, init, tol)?;
        rows[0][j] = right.decompose(yp).1.re;
        // toward -inf the small-multiplier solution is the growing one
        rows[1][j] = left.decompose(ym).0.re;
    }
    let det = rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0];
    let r = if rows[0][0].hypot(rows[0][1]) >= rows[1][0].hypot(rows[1][1]) {
        rows[0]
    } else {
        rows[1]
    };
    let n = r[0].hypot(r[1]);
    Ok((det, [r[1] / n, -r[0] / n]))
}

/// Safeguarded secant on a sign-change bracket.
fn polish<F: Fn(f64) -> Result<f64>>(
    f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    tol: f64,
) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let (mut x0, mut f0, mut x1, mut f1) = (a, fa, b, fb);
    let mut width = (b - a).abs();
    for _ in 0..200 {
        let mut x = x1 - f1 * (x1 - x0) / (f1 - f0);
        let lo = a.min(b);
        let hi = a.max(b);
        if !x.is_finite() || x <= lo || x >= hi {
            x = 0.5 * (a + b);
        }
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx < 0.0) == (fa < 0.0) {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        let step = (x - x1).abs();
        x0 = x1;
        f0 = f1;
        x1 = x;
        f1 = fx;
        let new_width = (b - a).abs();
        if step < tol || new_width < tol {
            return Ok(x);
        }
        // force a bisection when the bracket stops shrinking
        if new_width > 0.5 * width {
            let m = 0.5 * (a + b);
            let fm = f(m)?;
            if fm == 0.0 {
                return Ok(m);
            }
            if (fm < 0.0) == (fa < 0.0) {
                a = m;
                fa = fm;
            } else {
                b = m;
                fb = fm;
            }
            x0 = a;
            f0 = fa;
            x1 = b;
            f1 = fb;
        }
        width = (b - a).abs();
    }
    Err(Error::NonConvergence {
        stage: "defect root polish",
        iterations: 200,
        last_step: (b - a).abs(),
    })
}

/// Candidate brackets of a scanned function: sign changes, plus sign
/// changes found by refining around local minima of `|f|`.
fn brackets<F: Fn(f64) -> Result<f64> + Sync>(
    f: &F,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<Vec<(f64, f64, f64, f64)>> {
    let grid = |lo: f64, hi: f64, n: usize| -> Result<Vec<(f64, f64)>> {
        (1..=n)
            .into_par_iter()
            .map(|i| {
                let e = lo + (hi - lo) * i as f64 / (n + 1) as f64;
                Ok((e, f(e)?))
            })
            .collect()
    };
    let pts = grid(lo, hi, n)?;
    let mut out = Vec::new();
    for w in pts.windows(2) {
        if (w[0].1 < 0.0) != (w[1].1 < 0.0) || w[0].1 == 0.0 {
            out.push((w[0].0, w[1].0, w[0].1, w[1].1));
        }
    }
    for i in 1..pts.len().saturating_sub(1) {
        let (l, c, r) = (pts[i - 1], pts[i], pts[i + 1]);
        let same_sign = (l.1 < 0.0) == (c.1 < 0.0) && (c.1 < 0.0) == (r.1 < 0.0);
        if same_sign && c.1.abs() < l.1.abs() && c.1.abs() < r.1.abs() {
            let fine = grid(l.0, r.0, 20)?;
            for w in fine.windows(2) {
                if (w[0].1 < 0.0) != (w[1].1 < 0.0) {
                    out.push((w[0].0, w[1].0, w[0].1, w[1].1));
                }
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Polished roots of `f` in `(lo, hi)`; spurious sign changes (jumps of the
/// eigenvector orientation) are dropped by the residual test.
fn roots<F: Fn(f64) -> Result<f64> + Sync>(
    f: &F,
    lo: f64,
    hi: f64,
    n: usize,
    tol: f64,
) -> Result<Vec<(f64, f64)>> {
    let br = brackets(f, lo, hi, n)?;
    let found = br
        .par_iter()
        .map(|&(a, b, fa, fb)| {
            let scale = fa.abs().max(fb.abs());
            let tol = tol.max(4.0 * f64::EPSILON * a.abs().max(b.abs()));
            let e = polish(f, a, b, fa, fb, tol)?;
            let r = f(e)?.abs() / scale;
            Ok((e, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out: Vec<(f64, f64)> = found.into_iter().filter(|(_, r)| *r < 1e-6).collect();
    out.dedup_by(|a, b| (a.0 - b.0).abs() < 1e3 * tol);
    Ok(out)
}

/// All defect eigenvalues in a gap, with default options.
pub fn find_defect_modes(p: &Potential, gap: &SpectralInterval, tol: f64) -> Result<Vec<DefectMode>> {
    find_defect_modes_with(
        p,
        gap,
        &DefectOptions {
            tol,
            ..DefectOptions::default()
        },
    )
}

pub fn find_defect_modes_with(
    p: &Potential,
    gap: &SpectralInterval,
    opts: &DefectOptions,
) -> Result<Vec<DefectMode>> {
    if gap.kind != floquet::IntervalKind::Gap {
        return Err(Error::InvalidArgument(format!(
            "[{}, {}] is not a gap",
            gap.lo, gap.hi
        )));
    }
    let x = opts.matching_point.unwrap_or_else(|| default_matching_point(p));
    check_matching_point(p, x)?;
    let (lo, mut hi) = (gap.lo, gap.hi);
    if p.is_half_line() {
        hi = hi.min(0.0);
        if !(lo < hi) {
            return Ok(Vec::new());
        }
    }
    let tol = opts.ode_tol;
    let mut modes = Vec::new();
    if p.is_half_line() || (p.is_symmetric() && !opts.two_sided) {
        let classes: &[Parity] = if p.is_half_line() {
            &[Parity::None]
        } else {
            &[Parity::Even, Parity::Odd]
        };
        for &parity in classes {
            let f = |e: f64| matching_function_with(p, e, parity, x, tol);
            for (e, r) in roots(&f, lo, hi, opts.scan_points, opts.tol)? {
                let init = one_sided_data(p, e, parity)?;
                let (normalization, w0) = match parity {
                    Parity::Odd => (Normalization::UnitSlope, 0.0),
                    _ => (Normalization::UnitValue, init.du.re),
                };
                modes.push(assemble(p, e, parity, normalization, w0, r, opts)?);
            }
        }
    } else {
        let f = |e: f64| Ok(two_sided_matching(p, e, x, tol)?.0);
        for (e, r) in roots(&f, lo, hi, opts.scan_points, opts.tol)? {
            let (_, null) = two_sided_matching(p, e, x, tol)?;
            let raw = profile(
                p,
                e,
                StateVector::real(null[0], null[1]),
                opts.profile_x_max.unwrap_or(p.rho_ceil() + 10.0),
                opts.profile_points,
            )?;
            let max = raw.iter().map(|s| s.phi.abs()).fold(0.0, f64::max);
            let unit_slope = null[0].abs() < SMALL_VALUE_RATIO * max;
            let (normalization, w0) = Normalization::from_state(null[0], null[1], unit_slope);
            let parity = if p.is_symmetric() {
                if unit_slope {
                    Parity::Odd
                } else {
                    Parity::Even
                }
            } else {
                Parity::None
            };
            modes.push(assemble(p, e, parity, normalization, w0, r, opts)?);
        }
    }
    modes.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(modes)
}

fn assemble(
    p: &Potential,
    e: f64,
    parity: Parity,
    normalization: Normalization,
    w0: f64,
    residual: f64,
    opts: &DefectOptions,
) -> Result<DefectMode> {
    let data = floquet::gap_data(p, e)?;
    let init = normalization.initial_data(Complex64::new(w0, 0.0));
    let x_max = opts.profile_x_max.unwrap_or(p.rho_ceil() + 10.0);
    let samples = profile(p, e, init, x_max, opts.profile_points)?;
    let k_fit = fitted_decay_rate(p, e, init)?;
    Ok(DefectMode {
        energy: e,
        parity,
        normalization,
        w0,
        k: data.k,
        k_fit,
        antiperiodic: data.is_antiperiodic(),
        matching_residual: residual,
        profile: samples,
    })
}

/// Walk outward from the origin through sorted `targets` (all on one side),
/// discarding the component growing away from the defect at every period
/// boundary beyond the support.
fn stabilized_walk(
    p: &Potential,
    e: f64,
    init: StateVector,
    targets: &[f64],
    dir: f64,
) -> Result<Vec<StateVector>> {
    let data = floquet::gap_data(p, e)?;
    let z = Complex64::new(e, 0.0);
    let rc = p.rho_ceil();
    let far = targets.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let mut events: Vec<(f64, Option<usize>)> = targets
        .iter()
        .enumerate()
        .map(|(i, t)| (t.abs(), Some(i)))
        .collect();
    let mut b = rc;
    while b <= far {
        events.push((b, None));
        b += 1.0;
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.is_some().cmp(&b.1.is_some())));
    let mut out = vec![StateVector::ZERO; targets.len()];
    let mut x = 0.0;
    let mut y = init;
    for (s, idx) in events {
        let xt = dir * s;
        if xt != x {
            y = ode::integrate(p, z, x, xt, y, MATCH_TOL)?;
            x = xt;
        }
        match idx {
            Some(i) => out[i] = y,
            None => {
                let (cd, cg) = data.decompose(y);
                y = if dir > 0.0 {
                    let r = data.decaying();
                    StateVector::new(cd * r.u, cd * r.du)
                } else {
                    let r = data.growing();
                    StateVector::new(cg * r.u, cg * r.du)
                };
            }
        }
    }
    Ok(out)
}

/// `n` samples of the eigenfunction on `[-x_max, x_max]` (on the periodic
/// side only for half-line potentials, whose free side is exponential).
pub fn profile(p: &Potential, e: f64, init: StateVector, x_max: f64, n: usize) -> Result<Vec<ProfileSample>> {
    if n < 2 || !(x_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "profile needs n >= 2 and x_max > 0, got n = {n}, x_max = {x_max}"
        )));
    }
    let xs: Vec<f64> = (0..n)
        .map(|i| -x_max + 2.0 * x_max * i as f64 / (n - 1) as f64)
        .collect();
    let pos: Vec<f64> = xs.iter().copied().filter(|x| *x >= 0.0).collect();
    let neg: Vec<f64> = xs.iter().copied().filter(|x| *x < 0.0).collect();
    let right = stabilized_walk(p, e, init, &pos, 1.0)?;
    let left = if p.is_half_line() {
        let kappa = half_line_kappa(e)?;
        neg.iter()
            .map(|x| {
                let u = init.u * (kappa * x).exp();
                StateVector::new(u, u * kappa)
            })
            .collect()
    } else {
        stabilized_walk(p, e, init, &neg, -1.0)?
    };
    Ok(neg
        .iter()
        .zip(left)
        .chain(pos.iter().zip(right))
        .map(|(x, s)| ProfileSample {
            x: *x,
            phi: s.u.re,
            dphi: s.du.re,
        })
        .collect())
}

/// Decay rate fitted to the maxima of `|Phi|` over the unit windows of
/// `[rho + 2, rho + 8]`.
pub fn fitted_decay_rate(p: &Potential, e: f64, init: StateVector) -> Result<f64> {
    const PER_PERIOD: usize = 64;
    let start = p.support_radius() + 2.0;
    let xs: Vec<f64> = (0..=6 * PER_PERIOD)
        .map(|i| start + i as f64 / PER_PERIOD as f64)
        .collect();
    let ys = stabilized_walk(p, e, init, &xs, 1.0)?;
    let pts: Vec<(f64, f64)> = (0..6)
        .map(|w| {
            let m = ys[w * PER_PERIOD..=(w + 1) * PER_PERIOD]
                .iter()
                .map(|s| s.u.norm())
                .fold(0.0, f64::max);
            (start + w as f64, m)
        })
        .collect();
    Ok(-fit_rate(&pts)?.slope)
}
