#![allow(dead_code)]

use defect_resonance::floquet::{band_gap_scan, SpectralInterval};
use defect_resonance::{DefectPotential, DefectShape, PeriodicPotential, Potential};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub fn lattice() -> PeriodicPotential {
    PeriodicPotential::new(vec![0.0, 10.0], vec![])
}

pub fn bump(amplitude: f64) -> DefectPotential {
    DefectPotential::new(DefectShape::SmoothBump, amplitude, 0.5)
}

/// `10 cos(2 pi x)` with a smooth bump of depth 8.
pub fn ref1() -> Potential {
    Potential::new(lattice(), bump(-8.0), true).unwrap()
}

/// `ref1` with the bump moved off the origin.
pub fn ref2() -> Potential {
    Potential::new(lattice(), bump(-8.0).shifted(0.13), false).unwrap()
}

/// Deep bump binding a state below zero energy.
pub fn ref3() -> Potential {
    Potential::new(lattice(), bump(-20.0), true).unwrap()
}

/// `ref3` with the left half-line switched off.
pub fn ref4() -> Potential {
    Potential::half_line(lattice(), bump(-20.0)).unwrap()
}

pub fn gap_containing(p: &Potential, e: f64) -> SpectralInterval {
    let report = band_gap_scan(p.periodic(), -10.0, 40.0, 2000).unwrap();
    *report.gap_containing(e).expect("energy in a gap")
}

pub fn first_gap(p: &Potential) -> SpectralInterval {
    let report = band_gap_scan(p.periodic(), -10.0, 40.0, 2000).unwrap();
    let gap = *report.gaps().find(|g| g.lo > -9.0).expect("a finite gap");
    gap
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Classical fixed-step RK4 for `u'' = (V - z) u`.
pub fn rk4(
    v: impl Fn(f64) -> f64,
    z: Complex64,
    x0: f64,
    x1: f64,
    u: [Complex64; 2],
    steps: usize,
) -> [Complex64; 2] {
    let h = (x1 - x0) / steps as f64;
    let f = |x: f64, y: [Complex64; 2]| [y[1], (v(x) - z) * y[0]];
    let mut y = u;
    for i in 0..steps {
        let x = x0 + i as f64 * h;
        let k1 = f(x, y);
        let k2 = f(x + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f(x + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f(x + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for j in 0..2 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    y
}

/// Second-order Dirichlet finite differences of `-d^2/dx^2 + V` on `[a, b]`.
pub struct FdOperator {
    diag: Vec<f64>,
    off: f64,
}

impl FdOperator {
    /// `V` at a node is the mean of its one-sided limits, so jumps sitting on
    /// nodes keep second order.
    pub fn new(v: impl Fn(f64) -> f64, a: f64, b: f64, h: f64) -> Self {
        let n = ((b - a) / h).round() as usize;
        let diag = (1..n)
            .map(|i| {
                let x = a + i as f64 * h;
                let d = 1e-9 * h;
                2.0 / (h * h) + 0.5 * (v(x - d) + v(x + d))
            })
            .collect();
        Self {
            diag,
            off: -1.0 / (h * h),
        }
    }

    /// Number of eigenvalues below `x` (Sturm count of the LDL^T pivots).
    pub fn count_below(&self, x: f64) -> usize {
        let b2 = self.off * self.off;
        let mut d = 1.0;
        let mut count = 0;
        for (i, a) in self.diag.iter().enumerate() {
            d = if i == 0 { a - x } else { a - x - b2 / d };
            if d == 0.0 {
                d = -f64::EPSILON * a.abs().max(1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The unique eigenvalue in `(lo, hi)`, by bisection.
    pub fn eigenvalue_in(&self, lo: f64, hi: f64) -> f64 {
        let (n_lo, n_hi) = (self.count_below(lo), self.count_below(hi));
        assert_eq!(
            n_hi - n_lo,
            1,
            "expected one eigenvalue in ({lo}, {hi}), found {}",
            n_hi - n_lo
        );
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if self.count_below(m) > n_lo {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Richardson {
    pub value: f64,
    /// `|E_h - E_{h/2}| / 3`: the error estimate of the finer level.
    pub error: f64,
}

/// Eigenvalue in `(lo, hi)` at steps `h` and `h/2`, extrapolated.
pub fn fd_eigenvalue(v: impl Fn(f64) -> f64 + Copy, a: f64, b: f64, h: f64, lo: f64, hi: f64) -> Richardson {
    let coarse = FdOperator::new(v, a, b, h).eigenvalue_in(lo, hi);
    let fine = FdOperator::new(v, a, b, 0.5 * h).eigenvalue_in(lo, hi);
    Richardson {
        value: (4.0 * fine - coarse) / 3.0,
        error: (fine - coarse).abs() / 3.0,
    }
}

fn fourier(p: &PeriodicPotential, n: i64) -> Complex64 {
    let m = n.unsigned_abs() as usize;
    if m == 0 {
        return c(p.cosine_coeffs.first().copied().unwrap_or(0.0), 0.0);
    }
    let a = p.cosine_coeffs.get(m).copied().unwrap_or(0.0);
    let b = p.sine_coeffs.get(m - 1).copied().unwrap_or(0.0);
    let sign = if n > 0 { -1.0 } else { 1.0 };
    c(0.5 * a, 0.5 * sign * b)
}

pub const HILL_MODES: i64 = 64;

fn hill_potential(p: &PeriodicPotential) -> DMatrix<Complex64> {
    let n = HILL_MODES as usize;
    let lo = -HILL_MODES / 2;
    DMatrix::from_fn(n, n, |i, j| fourier(p, (i as i64 + lo) - (j as i64 + lo)))
}

/// Sorted eigenvalues of the plane-wave Hill matrix at quasi-momentum `theta`.
pub fn hill_eigenvalues(p: &PeriodicPotential, theta: f64) -> Vec<f64> {
    let lo = -HILL_MODES / 2;
    let mut h = hill_potential(p);
    for i in 0..HILL_MODES as usize {
        let q = 2.0 * std::f64::consts::PI * (i as i64 + lo) as f64 + theta;
        h[(i, i)] += q * q;
    }
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Gaps `(lo, hi)` between the first `count` bands, from the periodic and
/// antiperiodic spectra.
pub fn hill_gaps(p: &PeriodicPotential, count: usize) -> Vec<(f64, f64)> {
    let per = hill_eigenvalues(p, 0.0);
    let anti = hill_eigenvalues(p, std::f64::consts::PI);
    // band j runs between per[j] and anti[j] (in some order); gap j lies
    // between band j and band j + 1
    (0..count)
        .map(|j| {
            let top = per[j].max(anti[j]);
            let bottom = per[j + 1].min(anti[j + 1]);
            (top, bottom)
        })
        .collect()
}

/// Decay rate at `E` from the linearized quadratic eigenproblem
/// `(D + q)^2 c + V c = E c` for the complex quasi-momentum `q`.
pub fn hill_decay_rate(p: &PeriodicPotential, e: f64) -> f64 {
    let n = HILL_MODES as usize;
    let lo = -HILL_MODES / 2;
    let d = DVector::from_fn(n, |i, _| {
        c(2.0 * std::f64::consts::PI * (i as i64 + lo) as f64, 0.0)
    });
    let mut k0 = hill_potential(p);
    for i in 0..n {
        k0[(i, i)] += d[i] * d[i] - e;
    }
    let mut a = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, n + i)] = c(1.0, 0.0);
        a[(n + i, n + i)] = -2.0 * d[i];
        for j in 0..n {
            a[(n + i, j)] = -k0[(i, j)];
        }
    }
    let ev = a.eigenvalues().expect("complex eigenvalues");
    // copies near the edge of the truncated basis are spurious; the physical
    // quasi-momenta repeat with period 2 pi, so the central ones suffice
    ev.iter()
        .filter(|q| q.re.abs() < 20.0)
        .map(|q| q.im.abs())
        .filter(|k| *k > 1e-8)
        .fold(f64::INFINITY, f64::min)
}
