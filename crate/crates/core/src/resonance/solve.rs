use num_complex::Complex64;
use serde::Serialize;

use super::StateData;
use super::{
    ball_radius, plain_outgoing, OneSided, Root, Shooting, SqrtBranch, ThetaEval, ThetaPm, TwoSided,
};
use crate::defect::{DefectMode, Normalization, Parity};
use crate::error::{Error, Result};
use crate::floquet;
use crate::ode::StateVector;
use crate::potential::Potential;

/// Frozen-derivative iterations before switching to Newton.
pub const STALL_ITERATIONS: usize = 50;

/// Width in units of `ulp(E)` of the z-resolution residual floor.
pub const RESOLUTION_ULPS: f64 = 16.0;

/// Smallest residual distinguishable from rounding of `z` itself.
pub fn residual_floor(e: f64, d_theta: f64) -> f64 {
    RESOLUTION_ULPS * f64::EPSILON * e.abs().max(1.0) * d_theta
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Step tolerance relative to `max(1, |E|)`.
    pub step_tol: f64,
    /// Absolute residual tolerance on Θ. Raised to the floor
    /// `RESOLUTION_ULPS * ulp(E) * |Θ'(E)|` when Θ cannot resolve finer
    /// steps in `z`.
    pub residual_tol: f64,
    pub max_iter: usize,
    /// Relative threshold for the non-degeneracy condition of the bound and
    /// edge problems.
    pub precondition_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            step_tol: 1e-13,
            residual_tol: 1e-11,
            max_iter: 200,
            precondition_tol: 1e-10,
        }
    }
}

/// Root of the truncated problem near a defect eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceResult {
    pub energy: f64,
    pub m: f64,
    pub k: f64,
    pub branch: SqrtBranch,
    pub z_star: Complex64,
    pub w0: Option<f64>,
    pub w_star: Option<Complex64>,
    /// `|Θ(z*)|`, or `max |Θ±|` for the two-sided problem.
    pub residual: f64,
    /// `z` iterates starting from `E`.
    pub iterates: Vec<Complex64>,
    /// `w` iterates of the two-sided problem.
    pub w_iterates: Vec<Complex64>,
    /// Index of the first Newton step, when the frozen map stalled.
    pub newton_from: Option<usize>,
    /// `E - Θ(E)/Θ'(E)` (first iterate of the map).
    pub asymptotic_z1: Complex64,
    pub asymptotic_w1: Option<Complex64>,
    pub theta_e: Complex64,
    pub d_theta_e: Complex64,
    /// `1/(2|Im z*|)` for a resonance below the real axis.
    pub lifetime: Option<f64>,
    pub ball_radius: f64,
    pub in_ball: bool,
    /// `|v'(M) - i s v(M)|` relative to `|v(M)| + |v'(M)|`, for the real
    /// problems whose solvability needs it nonzero.
    pub precondition_margin: Option<f64>,
    /// `|N|` of the two-sided Jacobian at `(w0, E)`.
    pub jacobian_norm: Option<f64>,
}

impl ResonanceResult {
    pub fn iterations(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    /// `|z_{n+1} - z_n|` for every recorded step.
    pub fn step_sizes(&self) -> Vec<f64> {
        self.iterates
            .windows(2)
            .zip(
                self.w_iterates
                    .windows(2)
                    .map(Some)
                    .chain(std::iter::repeat(None)),
            )
            .map(|(z, w)| {
                let dz = (z[1] - z[0]).norm();
                match w {
                    Some(w) => dz.max((w[1] - w[0]).norm()),
                    None => dz,
                }
            })
            .collect()
    }
}

fn check_energy(e: f64, branch: SqrtBranch) -> Result<()> {
    if e == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    branch.sqrt(Complex64::new(e, 0.0)).map(|_| ())
}

struct Iteration {
    z: Complex64,
    residual: f64,
    iterates: Vec<Complex64>,
    newton_from: Option<usize>,
    at_e: ThetaEval,
}

/// `z <- z - Θ(z)/Θ'(E)`, then Newton after `STALL_ITERATIONS`.
fn iterate_scalar<F: Fn(Complex64, bool) -> Result<ThetaEval>>(
    eval: F,
    e: f64,
    real: bool,
    opts: &SolverOptions,
) -> Result<Iteration> {
    let z0 = Complex64::new(e, 0.0);
    let at_e = eval(z0, true)?;
    let frozen = at_e.d_z();
    let step_tol = opts.step_tol * e.abs().max(1.0);
    let res_tol = opts.residual_tol.max(residual_floor(e, frozen.norm()));
    let mut z = z0;
    let mut th = at_e.theta;
    let mut iterates = vec![z];
    let mut newton_from = None;
    let mut last = f64::INFINITY;
    for n in 0..opts.max_iter {
        let d = if newton_from.is_some() {
            eval(z, true)?.d_z()
        } else {
            frozen
        };
        let mut dz = -th / d;
        if real {
            dz = Complex64::new(dz.re, 0.0);
        }
        if !dz.is_finite() {
            return Err(Error::NonConvergence {
                stage: "outgoing-condition iteration",
                iterations: n,
                last_step: f64::NAN,
            });
        }
        z += dz;
        iterates.push(z);
        th = eval(z, false)?.theta;
        last = dz.norm();
        if last < step_tol && th.norm() < res_tol {
            return Ok(Iteration {
                z,
                residual: th.norm(),
                iterates,
                newton_from,
                at_e,
            });
        }
        if newton_from.is_none() && n + 1 >= STALL_ITERATIONS {
            newton_from = Some(n + 1);
        }
    }
    Err(Error::NonConvergence {
        stage: "outgoing-condition iteration",
        iterations: opts.max_iter,
        last_step: last,
    })
}

fn finish(
    p: &Potential,
    e: f64,
    m: f64,
    branch: SqrtBranch,
    it: Iteration,
    asymptotic_z1: Complex64,
) -> Result<ResonanceResult> {
    let k = floquet::gap_data(p, e)?.k;
    let radius = ball_radius(k, m);
    let z = it.z;
    Ok(ResonanceResult {
        energy: e,
        m,
        k,
        branch,
        z_star: z,
        w0: None,
        w_star: None,
        residual: it.residual,
        iterates: it.iterates,
        w_iterates: Vec::new(),
        newton_from: it.newton_from,
        asymptotic_z1,
        asymptotic_w1: None,
        theta_e: it.at_e.theta,
        d_theta_e: it.at_e.d_z(),
        lifetime: (z.im < 0.0).then(|| 0.5 / z.im.abs()),
        ball_radius: radius,
        in_ball: (z - e).norm() <= radius,
        precondition_margin: None,
        jacobian_norm: None,
    })
}

/// Resonance (or bound state) of the truncated symmetric problem in one
/// parity class.
pub fn solve_parity(
    p: &Potential,
    e: f64,
    parity: Parity,
    m: f64,
    branch: SqrtBranch,
    opts: &SolverOptions,
) -> Result<ResonanceResult> {
    if !p.is_symmetric() {
        return Err(Error::InvalidArgument(
            "the parity solver needs a symmetric potential".into(),
        ));
    }
    check_energy(e, branch)?;
    let shooting = Shooting::parity(parity)?;
    let z0 = Complex64::new(e, 0.0);
    let one = OneSided::new(p, z0, m, shooting, branch)?;
    let it = iterate_scalar(|z, d| one.eval(z, d), e, false, opts)?;
    let z1 = it.iterates.get(1).copied().unwrap_or(it.z);
    finish(p, e, m, branch, it, z1)
}

fn margin(one: &OneSided, e: f64, u0: StateVector, opts: &SolverOptions) -> Result<f64> {
    let z = Complex64::new(e, 0.0);
    let n2 = u0.u.norm_sqr() + u0.du.norm_sqr();
    let v0 = StateVector::new(-u0.du / n2, u0.u / n2);
    let ints = one.integrals(z, u0, v0)?;
    let r = Root::new(one.branch, z)?;
    let vp = plain_outgoing(1.0, &r, &ints.v);
    let scale = ints.v.u.norm() + ints.v.du.norm();
    let margin = vp.norm() / scale;
    if !(margin > opts.precondition_tol) {
        return Err(Error::PreconditionViolated {
            what: "v'(M) - i sqrt(E) v(M) must not vanish",
            margin: vp.norm(),
            scale,
        });
    }
    Ok(margin)
}

fn solve_real(
    p: &Potential,
    e: f64,
    shooting: Shooting,
    m: f64,
    opts: &SolverOptions,
) -> Result<ResonanceResult> {
    if !(e < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "the real-axis solver needs E < 0, got {e}"
        )));
    }
    let branch = SqrtBranch::Bound;
    let z0 = Complex64::new(e, 0.0);
    let one = OneSided::new(p, z0, m, shooting, branch)?;
    let u0 = shooting.variational(&Root::new(branch, z0)?).u;
    let margin = margin(&one, e, u0, opts)?;
    let it = iterate_scalar(|z, d| one.eval(z, d), e, true, opts)?;
    let z1 = it.iterates.get(1).copied().unwrap_or(it.z);
    let mut out = finish(p, e, m, branch, it, z1)?;
    out.precondition_margin = Some(margin);
    Ok(out)
}

/// Perturbed bound state below zero energy. The iteration runs on the real
/// axis, so the result is exactly real.
pub fn solve_bound_negative(
    p: &Potential,
    e: f64,
    normalization: Normalization,
    w0: f64,
    m: f64,
    opts: &SolverOptions,
) -> Result<ResonanceResult> {
    if p.is_symmetric() {
        let parity = match normalization {
            Normalization::UnitValue if w0 == 0.0 => Parity::Even,
            Normalization::UnitSlope if w0 == 0.0 => Parity::Odd,
            _ => return Err(Error::InvalidArgument("symmetric modes have w0 = 0".into())),
        };
        return solve_real(p, e, Shooting::parity(parity)?, m, opts);
    }
    let mut r = solve_general(p, e, normalization, w0, m, SqrtBranch::Bound, opts)?;
    if r.z_star.im != 0.0 {
        return Err(Error::NonConvergence {
            stage: "real bound-state iteration",
            iterations: r.iterations(),
            last_step: r.z_star.im.abs(),
        });
    }
    r.w0 = Some(w0);
    Ok(r)
}

/// Edge state of a half-line potential truncated at `+M`.
pub fn solve_edge(p: &Potential, e: f64, m: f64, opts: &SolverOptions) -> Result<ResonanceResult> {
    if !p.is_half_line() {
        return Err(Error::InvalidArgument(
            "the edge solver needs a half-line potential".into(),
        ));
    }
    solve_real(p, e, Shooting::HalfLineDecay, m, opts)
}

/// Continue a defect mode to truncation radius `m` with the solver its
/// structure calls for: the edge solver on half-line potentials, the real
/// iteration below zero, the parity map for symmetric modes above zero and
/// the two-sided map otherwise. Also returns the data the resonant state
/// needs.
pub fn solve_mode(
    p: &Potential,
    mode: &DefectMode,
    m: f64,
    opts: &SolverOptions,
) -> Result<(ResonanceResult, StateData)> {
    let e = mode.energy;
    if p.is_half_line() {
        return Ok((solve_edge(p, e, m, opts)?, StateData::HalfLine));
    }
    let symmetric = p.is_symmetric() && mode.parity != Parity::None;
    let data = if symmetric {
        StateData::Parity(mode.parity)
    } else {
        StateData::General(mode.normalization)
    };
    let r = if e < 0.0 {
        solve_bound_negative(p, e, mode.normalization, mode.w0, m, opts)?
    } else if symmetric {
        solve_parity(p, e, mode.parity, m, SqrtBranch::Resonance, opts)?
    } else {
        solve_general(p, e, mode.normalization, mode.w0, m, SqrtBranch::Resonance, opts)?
    };
    Ok((r, data))
}

/// Root `(w*, z*)` of `(Θ⁺, Θ⁻)` by the map `ζ <- ζ - Ξ Θ(ζ)` with Ξ the
/// inverse Jacobian frozen at `(w0, E)`, then Newton after stalling.
pub fn solve_general(
    p: &Potential,
    e: f64,
    normalization: Normalization,
    w0: f64,
    m: f64,
    branch: SqrtBranch,
    opts: &SolverOptions,
) -> Result<ResonanceResult> {
    check_energy(e, branch)?;
    let z0 = Complex64::new(e, 0.0);
    let w_init = Complex64::new(w0, 0.0);
    let two = TwoSided::new(p, z0, m, normalization, branch)?;
    // the real problem (E < 0 on the bound branch) stays on the real axis
    let real = branch == SqrtBranch::Bound && e < 0.0;

    let jac = |w: Complex64, z: Complex64| -> Result<([Complex64; 4], Complex64, ThetaPm)> {
        let t = two.eval(w, z, true)?;
        let (wp, zp, wm, zm) = (t.plus.d_w(), t.plus.d_z(), t.minus.d_w(), t.minus.d_z());
        let n = wp * zm - zp * wm;
        if !(n.norm() > 0.0) || !n.is_finite() {
            return Err(Error::SingularJacobian { norm: n.norm() });
        }
        Ok(([zm / n, -zp / n, -wm / n, wp / n], n, t))
    };
    let (frozen, n_e, at_e) = jac(w_init, z0)?;
    let step_tol = opts.step_tol * e.abs().max(1.0);
    let scale = at_e.plus.d_z().norm().max(at_e.minus.d_z().norm());
    let res_tol = opts.residual_tol.max(residual_floor(e, scale));
    let (mut w, mut z) = (w_init, z0);
    let (mut tp, mut tm) = (at_e.plus.theta, at_e.minus.theta);
    let mut zs = vec![z];
    let mut ws = vec![w];
    let mut newton_from = None;
    let mut last = f64::INFINITY;
    let mut converged = None;
    for n in 0..opts.max_iter {
        let xi = if newton_from.is_some() {
            jac(w, z)?.0
        } else {
            frozen
        };
        let mut dw = -(xi[0] * tp + xi[1] * tm);
        let mut dz = -(xi[2] * tp + xi[3] * tm);
        if real {
            dw = Complex64::new(dw.re, 0.0);
            dz = Complex64::new(dz.re, 0.0);
        }
        if !dw.is_finite() || !dz.is_finite() {
            break;
        }
        w += dw;
        z += dz;
        zs.push(z);
        ws.push(w);
        let t = two.eval(w, z, false)?;
        tp = t.plus.theta;
        tm = t.minus.theta;
        last = dz.norm().max(dw.norm());
        let residual = t.residual();
        if last < step_tol && residual < res_tol {
            converged = Some(residual);
            break;
        }
        if newton_from.is_none() && n + 1 >= STALL_ITERATIONS {
            newton_from = Some(n + 1);
        }
    }
    let Some(residual) = converged else {
        return Err(Error::NonConvergence {
            stage: "two-sided outgoing-condition iteration",
            iterations: zs.len() - 1,
            last_step: last,
        });
    };
    let k = floquet::gap_data(p, e)?.k;
    let radius = ball_radius(k, m);
    Ok(ResonanceResult {
        energy: e,
        m,
        k,
        branch,
        z_star: z,
        w0: Some(w0),
        w_star: Some(w),
        residual,
        asymptotic_z1: zs.get(1).copied().unwrap_or(z),
        asymptotic_w1: Some(ws.get(1).copied().unwrap_or(w)),
        iterates: zs,
        w_iterates: ws,
        newton_from,
        theta_e: at_e.plus.theta,
        d_theta_e: at_e.plus.d_z(),
        lifetime: (z.im < 0.0).then(|| 0.5 / z.im.abs()),
        ball_radius: radius,
        in_ball: (z - e).norm() <= radius,
        precondition_margin: None,
        jacobian_norm: Some(n_e.norm()),
    })
}
