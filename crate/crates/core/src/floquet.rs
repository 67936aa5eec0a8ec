//! Monodromy, multipliers and band/gap structure of the periodic background.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{self, StateVector, TransferMatrix};
use crate::potential::{PeriodicPotential, Potential};

/// Integration tolerance used for one-period monodromies.
pub const MONODROMY_TOL: f64 = 1e-12;

/// `|Delta|` must exceed `2 + GAP_MARGIN` to count as a gap; points on the
/// band edge itself belong to the band.
pub const GAP_MARGIN: f64 = 1e-9;

/// Bisection width for band edges.
pub const EDGE_WIDTH: f64 = 1e-8;

/// One period of the periodic background at energy `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloquetData {
    pub z: Complex64,
    pub monodromy: TransferMatrix,
    /// Trace of the monodromy.
    pub discriminant: Complex64,
    pub lambda_small: Complex64,
    pub lambda_large: Complex64,
    /// `ln |lambda_large| = -ln |lambda_small|`.
    pub k: f64,
}

impl FloquetData {
    fn from_monodromy(z: Complex64, t: TransferMatrix) -> Self {
        let delta = t.trace();
        let root = (delta * delta - 4.0).sqrt();
        // Pick the sign that adds magnitudes; the other root follows from
        // lambda_small * lambda_large = 1 without cancellation.
        let plus = delta + root;
        let minus = delta - root;
        let big = if plus.norm() >= minus.norm() { plus } else { minus };
        let lambda_large = big / 2.0;
        let lambda_small = 1.0 / lambda_large;
        Self {
            z,
            monodromy: t,
            discriminant: delta,
            lambda_small,
            lambda_large,
            k: lambda_large.norm().ln().max(0.0),
        }
    }

    /// Real energy with `|Delta| > 2`.
    pub fn is_gap(&self) -> bool {
        self.z.im == 0.0 && is_gap_discriminant(self.discriminant)
    }

    /// Multipliers are negative: Floquet solutions flip sign each period.
    pub fn is_antiperiodic(&self) -> bool {
        self.discriminant.re < 0.0
    }

    /// Fail with `InBand` unless the energy is a real gap energy.
    pub fn require_gap(&self) -> Result<()> {
        if self.is_gap() {
            Ok(())
        } else {
            Err(Error::InBand {
                energy: self.z.re,
                abs_discriminant: self.discriminant.norm(),
            })
        }
    }

    /// Unit right eigenvector of the monodromy for `lambda`, as data `(u, u')`
    /// at a period boundary, with its largest component made real positive.
    pub fn eigenvector(&self, lambda: Complex64) -> StateVector {
        let t = &self.monodromy;
        let v1 = StateVector::new(t.b, lambda - t.a);
        let v2 = StateVector::new(lambda - t.d, t.c);
        let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
        normalize(v)
    }

    /// Data of the solution decaying toward `+inf`.
    pub fn decaying(&self) -> StateVector {
        self.eigenvector(self.lambda_small)
    }

    /// Data of the solution growing toward `+inf`.
    pub fn growing(&self) -> StateVector {
        self.eigenvector(self.lambda_large)
    }

    /// Coefficients `(c_decay, c_grow)` of `y = c_decay r_decay + c_grow r_grow`.
    ///
    /// Each coefficient is a left-eigenvector projection (a Wronskian with
    /// the other eigenvector), so neither requires subtracting the other
    /// component.
    pub fn decompose(&self, y: StateVector) -> (Complex64, Complex64) {
        let rd = self.decaying();
        let rg = self.growing();
        let w = rd.wronskian(&rg);
        (y.wronskian(&rg) / w, rd.wronskian(&y) / w)
    }
}

fn normalize(v: StateVector) -> StateVector {
    let n = v.norm();
    let pivot = if v.u.norm() >= v.du.norm() { v.u } else { v.du };
    let phase = pivot / pivot.norm();
    StateVector::new(v.u / (phase * n), v.du / (phase * n))
}

pub fn is_gap_discriminant(delta: Complex64) -> bool {
    delta.re.abs() > 2.0 + GAP_MARGIN
}

fn background(p_per: &PeriodicPotential) -> Result<Potential> {
    Potential::periodic_only(p_per.clone())
}

/// Monodromy over `[0, 1]`. The background has period one, so this equals
/// the monodromy over any integer-aligned period, in particular
/// `[ceil(rho), ceil(rho) + 1]`.
pub fn monodromy(p_per: &PeriodicPotential, z: Complex64, tol: f64) -> Result<FloquetData> {
    let p = background(p_per)?;
    monodromy_of(&p, z, tol)
}

pub(crate) fn monodromy_from_matrix(z: Complex64, t: TransferMatrix) -> FloquetData {
    FloquetData::from_monodromy(z, t)
}

pub(crate) fn monodromy_of(p: &Potential, z: Complex64, tol: f64) -> Result<FloquetData> {
    let t = ode::transfer_matrix(p, z, 0.0, 1.0, tol)?;
    Ok(FloquetData::from_monodromy(z, t))
}

/// Floquet data of the periodic part of `p` at a real gap energy.
pub fn gap_data(p: &Potential, energy: f64) -> Result<FloquetData> {
    let data = monodromy(p.periodic(), Complex64::new(energy, 0.0), MONODROMY_TOL)?;
    data.require_gap()?;
    Ok(data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Band,
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralInterval {
    pub kind: IntervalKind,
    pub lo: f64,
    pub hi: f64,
}

impl SpectralInterval {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, e: f64) -> bool {
        e > self.lo && e < self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscriminantSample {
    pub z: f64,
    pub discriminant: Complex64,
    pub in_gap: bool,
}

/// Band/gap classification of an energy window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandGapReport {
    pub z_min: f64,
    pub z_max: f64,
    /// Sample spacing of the scan.
    pub resolution: f64,
    /// Width of the bisection bracket around each edge.
    pub edge_width: f64,
    pub intervals: Vec<SpectralInterval>,
    #[serde(skip)]
    pub samples: Vec<DiscriminantSample>,
}

impl BandGapReport {
    pub fn gaps(&self) -> impl Iterator<Item = &SpectralInterval> {
        self.intervals.iter().filter(|i| i.kind == IntervalKind::Gap)
    }

    pub fn bands(&self) -> impl Iterator<Item = &SpectralInterval> {
        self.intervals.iter().filter(|i| i.kind == IntervalKind::Band)
    }

    /// The gap containing `e`, if any.
    pub fn gap_containing(&self, e: f64) -> Option<&SpectralInterval> {
        self.gaps().find(|g| g.contains(e))
    }
}

fn discriminant_at(p: &Potential, z: f64) -> Result<Complex64> {
    Ok(monodromy_of(p, Complex64::new(z, 0.0), MONODROMY_TOL)?.discriminant)
}

/// Sample `|Delta|` on a uniform grid, then bisect each band/gap transition.
pub fn band_gap_scan(
    p_per: &PeriodicPotential,
    z_min: f64,
    z_max: f64,
    n_samples: usize,
) -> Result<BandGapReport> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "band scan needs at least 2 samples, got {n_samples}"
        )));
    }
    if !(z_min < z_max) || !z_min.is_finite() || !z_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "band scan window [{z_min}, {z_max}] is empty or not finite"
        )));
    }
    let p = background(p_per)?;
    let step = (z_max - z_min) / (n_samples - 1) as f64;
    let samples = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let z = if i + 1 == n_samples {
                z_max
            } else {
                z_min + i as f64 * step
            };
            let d = discriminant_at(&p, z)?;
            Ok(DiscriminantSample {
                z,
                discriminant: d,
                in_gap: is_gap_discriminant(d),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let transitions = samples
        .windows(2)
        .filter(|w| w[0].in_gap != w[1].in_gap)
        .map(|w| (w[0].z, w[1].z, w[0].in_gap))
        .collect::<Vec<_>>();
    let edges = transitions
        .par_iter()
        .map(|&(lo, hi, lo_gap)| bisect_edge(&p, lo, hi, lo_gap))
        .collect::<Result<Vec<_>>>()?;

    let kind = |gap: bool| {
        if gap {
            IntervalKind::Gap
        } else {
            IntervalKind::Band
        }
    };
    let mut intervals = Vec::with_capacity(edges.len() + 1);
    let mut lo = z_min;
    let mut current = samples[0].in_gap;
    for edge in edges {
        intervals.push(SpectralInterval {
            kind: kind(current),
            lo,
            hi: edge,
        });
        lo = edge;
        current = !current;
    }
    intervals.push(SpectralInterval {
        kind: kind(current),
        lo,
        hi: z_max,
    });
    Ok(BandGapReport {
        z_min,
        z_max,
        resolution: step,
        edge_width: EDGE_WIDTH,
        intervals,
        samples,
    })
}

fn bisect_edge(p: &Potential, mut lo: f64, mut hi: f64, lo_gap: bool) -> Result<f64> {
    while hi - lo > EDGE_WIDTH {
        let mid = 0.5 * (lo + hi);
        if is_gap_discriminant(discriminant_at(p, mid)?) == lo_gap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Periodic factors of the Floquet solutions over one period:
/// `u_decay(x) = e^{-k x} p(x)`, `u_grow(x) = e^{k x} q(x)`.
///
/// When the multipliers are negative (`antiperiodic`), `p` and `q` change
/// sign over one period instead of repeating.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlochFactors {
    pub energy: f64,
    pub k: f64,
    pub antiperiodic: bool,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl BlochFactors {
    /// `p(x)` continued to any `x` with the (anti)periodicity rule; linear
    /// interpolation between samples.
    pub fn p_at(&self, x: f64) -> f64 {
        self.extend(&self.p, x)
    }

    fn extend(&self, f: &[f64], x: f64) -> f64 {
        let n = x.floor();
        let t = x - n;
        let sign = if self.antiperiodic && (n as i64).rem_euclid(2) == 1 {
            -1.0
        } else {
            1.0
        };
        let m = self.x.len() - 1;
        let pos = t * m as f64;
        let i = (pos.floor() as usize).min(m - 1);
        let frac = pos - i as f64;
        sign * (f[i] * (1.0 - frac) + f[i + 1] * frac)
    }
}

/// Eigenvector data scaled so the value is one, or the derivative when the
/// value is negligible.
fn unit_value(v: StateVector) -> StateVector {
    let pivot = if v.u.norm() > 1e-8 * v.norm() { v.u } else { v.du };
    StateVector::new(v.u / pivot, v.du / pivot)
}

/// Sample the periodic factors on `n + 1` points of `[0, 1]`.
pub fn bloch_factors(p_per: &PeriodicPotential, energy: f64, n: usize) -> Result<BlochFactors> {
    if n < 1 {
        return Err(Error::InvalidArgument("bloch_factors needs n >= 1".into()));
    }
    let p = background(p_per)?;
    let data = monodromy_of(&p, Complex64::new(energy, 0.0), MONODROMY_TOL)?;
    data.require_gap()?;
    let z = Complex64::new(energy, 0.0);
    let mut dec = unit_value(data.decaying());
    let mut gro = unit_value(data.growing());
    let mut xs = Vec::with_capacity(n + 1);
    let mut ps = Vec::with_capacity(n + 1);
    let mut qs = Vec::with_capacity(n + 1);
    let mut x = 0.0;
    for j in 0..=n {
        let xj = j as f64 / n as f64;
        if j > 0 {
            dec = ode::integrate(&p, z, x, xj, dec, MONODROMY_TOL)?;
            gro = ode::integrate(&p, z, x, xj, gro, MONODROMY_TOL)?;
            x = xj;
        }
        xs.push(xj);
        ps.push((data.k * xj).exp() * dec.u.re);
        qs.push((-data.k * xj).exp() * gro.u.re);
    }
    Ok(BlochFactors {
        energy,
        k: data.k,
        antiperiodic: data.is_antiperiodic(),
        x: xs,
        p: ps,
        q: qs,
    })
}
