//! Outgoing-condition functionals of the truncated operator, their roots,
//! and first-order asymptotics in the truncation radius.

mod solve;
mod state;

use num_complex::Complex64;
use serde::Serialize;

use crate::defect::{Normalization, Parity};
use crate::error::{Error, Result};
use crate::ode::{PairIntegrals, Propagator, StateVector, VariationalState};
use crate::potential::Potential;

pub use solve::{
    residual_floor, solve_bound_negative, solve_edge, solve_general, solve_mode, solve_parity,
    ResonanceResult, SolverOptions,
};
pub use state::{resonant_state, ResonantSample, StateData};

/// ODE tolerance for every Θ evaluation.
pub const THETA_TOL: f64 = 1e-13;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which square root of `z` the outgoing condition uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SqrtBranch {
    /// Principal root, cut on `(-inf, 0]`: `Im z < 0` gives `Im sqrt z < 0`.
    Resonance,
    /// `i sqrt(-z)`, cut on `[0, inf)`: `Im sqrt z > 0`, and
    /// `i sqrt z = -sqrt|z|` on the negative axis.
    Bound,
}

impl SqrtBranch {
    /// Natural branch for a real energy.
    pub fn for_energy(e: f64) -> Result<Self> {
        if e > 0.0 {
            Ok(SqrtBranch::Resonance)
        } else if e < 0.0 {
            Ok(SqrtBranch::Bound)
        } else {
            Err(Error::ZeroEnergy)
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SqrtBranch::Resonance => "resonance",
            SqrtBranch::Bound => "bound",
        }
    }

    pub fn sqrt(self, z: Complex64) -> Result<Complex64> {
        let on_cut = match self {
            SqrtBranch::Resonance => z.im == 0.0 && z.re <= 0.0,
            SqrtBranch::Bound => z.im == 0.0 && z.re >= 0.0,
        };
        if on_cut || !z.is_finite() {
            return Err(Error::BranchCut {
                z,
                branch: self.name(),
            });
        }
        Ok(match self {
            SqrtBranch::Resonance => z.sqrt(),
            SqrtBranch::Bound => I * (-z).sqrt(),
        })
    }
}

/// `s = sqrt z` and its first two z-derivatives.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Root {
    pub s: Complex64,
    pub s_z: Complex64,
    pub s_zz: Complex64,
}

impl Root {
    pub fn new(branch: SqrtBranch, z: Complex64) -> Result<Self> {
        let s = branch.sqrt(z)?;
        Ok(Self {
            s,
            s_z: 0.5 / s,
            s_zz: -0.25 / (s * s * s),
        })
    }
}

/// Θ and its derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaEval {
    pub theta: Complex64,
    pub d_z: Option<Complex64>,
    pub d_z2: Option<Complex64>,
    /// Derivative in the free parameter of the data at the origin.
    pub d_w: Option<Complex64>,
}

impl ThetaEval {
    pub fn d_z(&self) -> Complex64 {
        self.d_z.expect("evaluated with derivatives")
    }

    pub fn d_w(&self) -> Complex64 {
        self.d_w.expect("evaluated with w-derivative")
    }
}

/// Θ⁺ (at `+M`) and Θ⁻ (at `-M`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaPm {
    pub plus: ThetaEval,
    pub minus: ThetaEval,
}

impl ThetaPm {
    pub fn residual(&self) -> f64 {
        self.plus.theta.norm().max(self.minus.theta.norm())
    }
}

/// Outgoing functional `u' - side i s u` and its z-derivatives from the
/// variational state at `side * M`.
fn outgoing(side: f64, r: &Root, st: &VariationalState, with_derivs: bool) -> ThetaEval {
    let is = I * r.s * side;
    let theta = st.u.du - is * st.u.u;
    if !with_derivs {
        return ThetaEval {
            theta,
            d_z: None,
            d_z2: None,
            d_w: None,
        };
    }
    let is_z = I * r.s_z * side;
    let is_zz = I * r.s_zz * side;
    let d_z = st.dz_u.du - is * st.dz_u.u - is_z * st.u.u;
    let d_z2 = st.dz2_u.du - is * st.dz2_u.u - 2.0 * is_z * st.dz_u.u - is_zz * st.u.u;
    ThetaEval {
        theta,
        d_z: Some(d_z),
        d_z2: Some(d_z2),
        d_w: None,
    }
}

fn plain_outgoing(side: f64, r: &Root, s: &StateVector) -> Complex64 {
    s.du - I * r.s * side * s.u
}

/// Data at the origin of the interior solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shooting {
    /// Fixed data.
    Data(StateVector),
    /// Continuation of `e^{-i s x}` from the free left half-line:
    /// `(1, -i s(z))`, so the data itself depends on `z`.
    HalfLineDecay,
}

impl Shooting {
    pub fn parity(parity: Parity) -> Result<Self> {
        parity
            .initial_data()
            .map(Shooting::Data)
            .ok_or_else(|| Error::InvalidArgument("parity none has no fixed shooting data".into()))
    }

    fn variational(&self, r: &Root) -> VariationalState {
        match *self {
            Shooting::Data(s) => VariationalState::from_initial(s),
            Shooting::HalfLineDecay => {
                let one = Complex64::new(1.0, 0.0);
                let zero = Complex64::new(0.0, 0.0);
                VariationalState {
                    u: StateVector::new(one, -I * r.s),
                    dz_u: StateVector::new(zero, -I * r.s_z),
                    dz2_u: StateVector::new(zero, -I * r.s_zz),
                }
            }
        }
    }
}

fn check_radius(p: &Potential, m: f64) -> Result<()> {
    p.check_truncation(m)
}

/// Θ on a mesh frozen at a reference energy; the one-sided problem.
pub(crate) struct OneSided<'a> {
    prop: Propagator<'a>,
    shooting: Shooting,
    branch: SqrtBranch,
}

impl<'a> OneSided<'a> {
    pub fn new(
        p: &'a Potential,
        z_ref: Complex64,
        m: f64,
        shooting: Shooting,
        branch: SqrtBranch,
    ) -> Result<Self> {
        check_radius(p, m)?;
        Ok(Self {
            prop: Propagator::build(p, z_ref, 0.0, m, THETA_TOL)?,
            shooting,
            branch,
        })
    }

    pub fn eval(&self, z: Complex64, with_derivs: bool) -> Result<ThetaEval> {
        let r = Root::new(self.branch, z)?;
        let init = self.shooting.variational(&r);
        if with_derivs {
            let st = self.prop.variational(z, init)?;
            Ok(outgoing(1.0, &r, &st, true))
        } else {
            let s = self.prop.state(z, init.u)?;
            Ok(ThetaEval {
                theta: plain_outgoing(1.0, &r, &s),
                d_z: None,
                d_z2: None,
                d_w: None,
            })
        }
    }

    /// Interior solution and companion with their integrals on `[0, M]`.
    pub fn integrals(&self, z: Complex64, u: StateVector, v: StateVector) -> Result<PairIntegrals> {
        self.prop.pair_integrals(z, u, v)
    }
}

/// Θ⁺ and Θ⁻ with `w`-derivatives, on meshes frozen at a reference energy.
pub(crate) struct TwoSided<'a> {
    plus: Propagator<'a>,
    minus: Propagator<'a>,
    normalization: Normalization,
    branch: SqrtBranch,
}

impl<'a> TwoSided<'a> {
    pub fn new(
        p: &'a Potential,
        z_ref: Complex64,
        m: f64,
        normalization: Normalization,
        branch: SqrtBranch,
    ) -> Result<Self> {
        check_radius(p, m)?;
        if p.is_half_line() {
            return Err(Error::InvalidArgument(
                "the two-sided functional needs a full-line potential".into(),
            ));
        }
        Ok(Self {
            plus: Propagator::build(p, z_ref, 0.0, m, THETA_TOL)?,
            minus: Propagator::build(p, z_ref, 0.0, -m, THETA_TOL)?,
            normalization,
            branch,
        })
    }

    pub fn eval(&self, w: Complex64, z: Complex64, with_derivs: bool) -> Result<ThetaPm> {
        let r = Root::new(self.branch, z)?;
        let init = VariationalState::from_initial(self.normalization.initial_data(w));
        if !with_derivs {
            let eval = |prop: &Propagator, side: f64| -> Result<ThetaEval> {
                let s = prop.state(z, init.u)?;
                Ok(ThetaEval {
                    theta: plain_outgoing(side, &r, &s),
                    d_z: None,
                    d_z2: None,
                    d_w: None,
                })
            };
            return Ok(ThetaPm {
                plus: eval(&self.plus, 1.0)?,
                minus: eval(&self.minus, -1.0)?,
            });
        }
        let dw = self.normalization.dw_data();
        let eval = |prop: &Propagator, side: f64| -> Result<ThetaEval> {
            let (st, v) = prop.variational_pair(z, init, dw)?;
            let mut t = outgoing(side, &r, &st, true);
            t.d_w = Some(plain_outgoing(side, &r, &v));
            Ok(t)
        };
        Ok(ThetaPm {
            plus: eval(&self.plus, 1.0)?,
            minus: eval(&self.minus, -1.0)?,
        })
    }

    fn integrals(
        &self,
        z: Complex64,
        u: StateVector,
        v: StateVector,
    ) -> Result<(PairIntegrals, PairIntegrals)> {
        Ok((
            self.plus.pair_integrals(z, u, v)?,
            self.minus.pair_integrals(z, u, v)?,
        ))
    }
}

/// Θ(z) = u'(M) - i sqrt(z) u(M) for the solution with data `init` at the
/// origin, with optional z-derivatives.
pub fn theta(
    p: &Potential,
    z: Complex64,
    m: f64,
    init: StateVector,
    branch: SqrtBranch,
    with_derivs: bool,
) -> Result<ThetaEval> {
    branch.sqrt(z)?;
    OneSided::new(p, z, m, Shooting::Data(init), branch)?.eval(z, with_derivs)
}

/// Θ for the half-line problem, whose data at the origin matches the free
/// decaying exponential on the left.
pub fn theta_edge(
    p: &Potential,
    z: Complex64,
    m: f64,
    branch: SqrtBranch,
    with_derivs: bool,
) -> Result<ThetaEval> {
    branch.sqrt(z)?;
    OneSided::new(p, z, m, Shooting::HalfLineDecay, branch)?.eval(z, with_derivs)
}

/// Θ⁺(ζ) = u'(M) - i sqrt(z) u(M) and Θ⁻(ζ) = u'(-M) + i sqrt(z) u(-M) for
/// `ζ = (w, z)`; with derivatives, includes `d_w` on both.
pub fn theta_pm(
    p: &Potential,
    w: Complex64,
    z: Complex64,
    m: f64,
    normalization: Normalization,
    branch: SqrtBranch,
    with_derivs: bool,
) -> Result<ThetaPm> {
    branch.sqrt(z)?;
    TwoSided::new(p, z, m, normalization, branch)?.eval(w, z, with_derivs)
}

/// Companion data with unit Wronskian against `normalization.initial_data(w)`.
pub fn companion_data(normalization: Normalization, w: f64) -> StateVector {
    let d = 1.0 + w * w;
    match normalization {
        Normalization::UnitValue => StateVector::real(-w / d, 1.0 / d),
        Normalization::UnitSlope => StateVector::real(-1.0 / d, -w / d),
    }
}

/// First-order quantities of the one-sided problem at a real energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParityAsymptotics {
    /// `E + (u' - i s u) / ((v' - i s v) int_0^M u^2)`.
    pub z1: Complex64,
    /// `-(int_0^M u^2)(v' - i s v)`: the leading part of `dΘ/dz(E)`.
    pub d_theta_explicit: Complex64,
    pub int_u2: f64,
}

/// First-order resonance (E > 0) or perturbed bound state (E < 0) for the
/// parity or half-line problem.
pub fn asymptotic_parity(p: &Potential, e: f64, shooting: Shooting, m: f64) -> Result<ParityAsymptotics> {
    let branch = SqrtBranch::for_energy(e)?;
    let z = Complex64::new(e, 0.0);
    let one = OneSided::new(p, z, m, shooting, branch)?;
    one_sided_asymptotics(&one, e)
}

pub(crate) fn one_sided_asymptotics(one: &OneSided, e: f64) -> Result<ParityAsymptotics> {
    let z = Complex64::new(e, 0.0);
    let r = Root::new(one.branch, z)?;
    let u0 = one.shooting.variational(&r).u;
    // unit-Wronskian companion of the (real) data u0
    let n2 = (u0.u.norm_sqr() + u0.du.norm_sqr()).max(f64::MIN_POSITIVE);
    let v0 = StateVector::new(-u0.du / n2, u0.u / n2);
    let ints = one.integrals(z, u0, v0)?;
    let up = plain_outgoing(1.0, &r, &ints.u);
    let vp = plain_outgoing(1.0, &r, &ints.v);
    let int_u2 = ints.int_uu.re;
    Ok(ParityAsymptotics {
        z1: z + up / (vp * int_u2),
        d_theta_explicit: -vp * int_u2,
        int_u2,
    })
}

/// First-order `(w1, z1)` of the two-sided problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralAsymptotics {
    pub w1: Complex64,
    pub z1: Complex64,
    pub int_u2_minus: f64,
    pub int_u2_plus: f64,
}

pub fn asymptotic_general(
    p: &Potential,
    e: f64,
    w0: f64,
    normalization: Normalization,
    m: f64,
) -> Result<GeneralAsymptotics> {
    let branch = SqrtBranch::for_energy(e)?;
    let z = Complex64::new(e, 0.0);
    let two = TwoSided::new(p, z, m, normalization, branch)?;
    two_sided_asymptotics(&two, e, w0)
}

pub(crate) fn two_sided_asymptotics(two: &TwoSided, e: f64, w0: f64) -> Result<GeneralAsymptotics> {
    let z = Complex64::new(e, 0.0);
    let r = Root::new(two.branch, z)?;
    let u0 = two.normalization.initial_data(Complex64::new(w0, 0.0));
    let v0 = companion_data(two.normalization, w0);
    let (plus, minus) = two.integrals(z, u0, v0)?;
    let up = plain_outgoing(1.0, &r, &plus.u);
    let vp = plain_outgoing(1.0, &r, &plus.v);
    let um = plain_outgoing(-1.0, &r, &minus.u);
    let vm = plain_outgoing(-1.0, &r, &minus.v);
    let i_plus = plus.int_uu.re;
    let i_minus = minus.int_uu.re;
    let denom = (i_plus + i_minus) * vp * vm;
    Ok(GeneralAsymptotics {
        w1: w0 - (i_minus * vm * up + i_plus * vp * um) / denom,
        z1: z - (vp * um - vm * up) / denom,
        int_u2_minus: i_minus,
        int_u2_plus: i_plus,
    })
}

/// Radius `e^{-kM}/M^2` of the ball around `E` holding the unique root.
pub fn ball_radius(k: f64, m: f64) -> f64 {
    (-k * m).exp() / (m * m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PeriodicPotential;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn free() -> Potential {
        Potential::periodic_only(PeriodicPotential::zero()).unwrap()
    }

    #[test]
    fn branches() {
        let s = SqrtBranch::Resonance.sqrt(c(4.0, -1e-3)).unwrap();
        assert!(s.im < 0.0 && (s.re - 2.0).abs() < 1e-3);
        let s = SqrtBranch::Bound.sqrt(c(-4.0, 0.0)).unwrap();
        assert_eq!(I * s, c(-2.0, 0.0));
        assert!(SqrtBranch::Bound.sqrt(c(1.0, 1.0)).unwrap().im > 0.0);
        assert!(SqrtBranch::Resonance.sqrt(c(-1.0, 0.0)).is_err());
        assert!(SqrtBranch::Bound.sqrt(c(1.0, 0.0)).is_err());
        assert!(matches!(SqrtBranch::for_energy(0.0), Err(Error::ZeroEnergy)));
    }

    #[test]
    fn free_theta() {
        let t = theta(
            &free(),
            c(1.0, 0.0),
            PI,
            StateVector::real(1.0, 0.0),
            SqrtBranch::Resonance,
            false,
        )
        .unwrap();
        assert!((t.theta - I).norm() < 1e-10);
        let pm = theta_pm(
            &free(),
            c(0.0, 0.0),
            c(1.0, 0.0),
            PI,
            Normalization::UnitValue,
            SqrtBranch::Resonance,
            true,
        )
        .unwrap();
        // cos is even, so u'(-M) + i u(-M) = -(u'(M) - i u(M))
        assert!((pm.plus.theta - I).norm() < 1e-10 && (pm.minus.theta + I).norm() < 1e-10);
        for m in [0.7, 2.0, 5.3] {
            let t = theta(
                &free(),
                c(1.0, 0.0),
                m,
                StateVector::real(1.0, 0.0),
                SqrtBranch::Resonance,
                false,
            )
            .unwrap();
            assert!((t.theta.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn companion_has_unit_wronskian() {
        for n in [Normalization::UnitValue, Normalization::UnitSlope] {
            for w in [-2.0, 0.0, 0.3] {
                let u = n.initial_data(c(w, 0.0));
                let v = companion_data(n, w);
                assert!((u.wronskian(&v) - 1.0).norm() < 1e-15);
            }
        }
    }
}
