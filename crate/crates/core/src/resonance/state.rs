use num_complex::Complex64;
use serde::Serialize;

use super::{ResonanceResult, Root, Shooting};
use crate::defect::{Normalization, Parity};
use crate::error::{Error, Result};
use crate::ode::{self, StateVector};
use crate::potential::Potential;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonantSample {
    pub x: f64,
    pub phi: Complex64,
    pub dphi: Complex64,
}

/// Interior data of a converged root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateData {
    Parity(Parity),
    General(Normalization),
    HalfLine,
}

/// Samples of the resonant (or truncated bound) state on `[-x_max, x_max]`:
/// the interior solution for `|x| <= M` and the outgoing tails
/// `u(M) e^{i s (x - M)}` and `u(-M) e^{-i s (x + M)}` beyond.
pub fn resonant_state(
    p: &Potential,
    result: &ResonanceResult,
    data: StateData,
    x_max: f64,
    n: usize,
) -> Result<Vec<ResonantSample>> {
    if n < 2 || !(x_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "resonant_state needs n >= 2 and x_max > 0, got n = {n}, x_max = {x_max}"
        )));
    }
    let z = result.z_star;
    let m = result.m;
    let r = Root::new(result.branch, z)?;
    let init = match data {
        StateData::Parity(parity) => Shooting::parity(parity)?.variational(&r).u,
        StateData::HalfLine => Shooting::HalfLineDecay.variational(&r).u,
        StateData::General(norm) => norm.initial_data(
            result
                .w_star
                .ok_or_else(|| Error::InvalidArgument("general state needs w_star".into()))?,
        ),
    };
    let xs: Vec<f64> = (0..n)
        .map(|i| -x_max + 2.0 * x_max * i as f64 / (n - 1) as f64)
        .collect();

    let pos: Vec<f64> = xs.iter().copied().filter(|x| *x >= 0.0).collect();
    let right = side(p, z, m, &r, init, &pos, 1.0)?;
    let neg: Vec<f64> = xs.iter().rev().copied().filter(|x| *x < 0.0).collect();
    let mut left = match data {
        StateData::Parity(parity) => {
            let sign = parity.sign().unwrap_or(1.0);
            let mirrored: Vec<f64> = neg.iter().map(|x| -x).collect();
            side(p, z, m, &r, init, &mirrored, 1.0)?
                .into_iter()
                .zip(&neg)
                .map(|(s, x)| ResonantSample {
                    x: *x,
                    phi: s.phi * sign,
                    dphi: -s.dphi * sign,
                })
                .collect()
        }
        StateData::HalfLine => neg
            .iter()
            .map(|&x| {
                let e = (-I * r.s * x).exp();
                ResonantSample {
                    x,
                    phi: init.u * e,
                    dphi: -I * r.s * init.u * e,
                }
            })
            .collect(),
        StateData::General(_) => side(p, z, m, &r, init, &neg, -1.0)?,
    };
    left.reverse();
    left.extend(right);
    Ok(left)
}

/// Samples along one side; `targets` are ordered outward from the origin.
fn side(
    p: &Potential,
    z: Complex64,
    m: f64,
    r: &Root,
    init: StateVector,
    targets: &[f64],
    dir: f64,
) -> Result<Vec<ResonantSample>> {
    let edge = dir * m;
    let mut out = Vec::with_capacity(targets.len());
    let mut x = 0.0;
    let mut y = init;
    let mut boundary: Option<StateVector> = None;
    for &t in targets {
        if t.abs() <= m {
            y = ode::integrate(p, z, x, t, y, super::THETA_TOL)?;
            x = t;
            out.push(ResonantSample {
                x: t,
                phi: y.u,
                dphi: y.du,
            });
        } else {
            let b = match boundary {
                Some(b) => b,
                None => {
                    let b = ode::integrate(p, z, x, edge, y, super::THETA_TOL)?;
                    boundary = Some(b);
                    b
                }
            };
            let is = I * r.s * dir;
            let e = (is * (t - edge)).exp();
            out.push(ResonantSample {
                x: t,
                phi: b.u * e,
                dphi: is * b.u * e,
            });
        }
    }
    Ok(out)
}
