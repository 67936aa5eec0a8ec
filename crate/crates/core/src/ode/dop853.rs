//! Dormand–Prince 8(5,3) on fixed-size complex state arrays.
//!
//! Two entry points: [`Dop853::integrate`] runs with error control and
//! returns the accepted mesh, and [`replay`] re-runs the same method over a
//! given mesh with no step selection. Replaying a frozen mesh makes the
//! discrete solution an analytic function of the spectral parameter, which
//! the root solvers rely on.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Right-hand side `y' = f(x, y)` of a first-order complex system.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, x: f64, y: &[Complex64; N]) -> [Complex64; N];
}

const STAGES: usize = 12;

const C: [f64; STAGES] = [
    0.0,
    5.260_015_195_876_773E-2,
    7.890_022_793_815_16E-2,
    1.183_503_419_072_274E-1,
    2.816_496_580_927_726E-1,
    3.333_333_333_333_333E-1,
    0.25,
    3.076_923_076_923_077E-1,
    6.512_820_512_820_513E-1,
    0.6,
    8.571_428_571_428_571E-1,
    1.0,
];

#[rustfmt::skip]
const A: [[f64; STAGES]; STAGES] = [
    [0.0; STAGES],
    [5.260_015_195_876_773E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.972_505_698_453_79E-2, 5.917_517_095_361_37E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.958_758_547_680_685E-2, 0.0, 8.876_275_643_042_054E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.413_651_341_592_667E-1, 0.0, -8.845_494_793_282_861E-1, 9.248_340_032_617_92E-1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.703_703_703_703_703_5E-2, 0.0, 0.0, 1.708_286_087_294_738_6E-1, 1.254_676_875_668_224_2E-1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.7109375E-2, 0.0, 0.0, 1.702_522_110_195_440_5E-1, 6.021_653_898_045_596E-2, -1.7578125E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.709_200_011_850_479E-2, 0.0, 0.0, 1.703_839_257_122_399_8E-1, 1.072_620_304_463_732_8E-1, -1.531_943_774_862_440_2E-2, 8.273_789_163_814_023E-3, 0.0, 0.0, 0.0, 0.0, 0.0],
    [6.241_109_587_160_757E-1, 0.0, 0.0, -3.360_892_629_446_941_4, -8.682_193_468_417_26E-1, 2.759_209_969_944_671E1, 2.015_406_755_047_789_4E1, -4.348_988_418_106_996E1, 0.0, 0.0, 0.0, 0.0],
    [4.776_625_364_382_643_4E-1, 0.0, 0.0, -2.488_114_619_971_667_7, -5.902_908_268_368_43E-1, 2.123_005_144_818_119_3E1, 1.527_923_363_288_242_3E1, -3.328_821_096_898_486E1, -2.033_120_170_850_862_7E-2, 0.0, 0.0, 0.0],
    [-9.371_424_300_859_873E-1, 0.0, 0.0, 5.186_372_428_844_064, 1.091_437_348_996_729_5, -8.149_787_010_746_927, -1.852_006_565_999_696E1, 2.273_948_709_935_050_5E1, 2.493_605_552_679_652_3, -3.046_764_471_898_219_6, 0.0, 0.0],
    [2.273_310_147_516_538, 0.0, 0.0, -1.053_449_546_673_725E1, -2.000_872_058_224_862_5, -1.795_893_186_311_88E1, 2.794_888_452_941_996E1, -2.858_998_277_135_023_5, -8.872_856_933_530_63, 1.236_056_717_579_430_3E1, 6.433_927_460_157_636E-1, 0.0],
];

const B: [f64; STAGES] = [
    5.429_373_411_656_876_5E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450_312_892_752_409,
    1.891_517_899_314_500_3,
    -5.801_203_960_010_585,
    3.111_643_669_578_199E-1,
    -1.521_609_496_625_161E-1,
    2.013_654_008_040_303_4E-1,
    4.471_061_572_777_259E-2,
];

const ER: [f64; STAGES] = [
    1.312_004_499_419_488E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.225_156_446_376_204_4,
    -4.957_589_496_572_502E-1,
    1.664_377_182_454_986_4,
    -3.503_288_487_499_736_6E-1,
    3.341_791_187_130_175E-1,
    8.192_320_648_511_571E-2,
    -2.235_530_786_388_629_4E-2,
];

const BHH: [f64; 3] = [
    2.440_944_881_889_764E-1,
    7.338_466_882_816_118E-1,
    2.205_882_352_941_176_6E-2,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 1.0 / 3.0;
const MAX_FACTOR: f64 = 6.0;

struct Stages<const N: usize> {
    k: [[Complex64; N]; STAGES],
}

fn stages<S: OdeSystem<N>, const N: usize>(sys: &S, x: f64, y: &[Complex64; N], h: f64) -> Stages<N> {
    let mut k = [[Complex64::new(0.0, 0.0); N]; STAGES];
    k[0] = sys.rhs(x, y);
    for i in 1..STAGES {
        let mut yi = *y;
        for (j, kj) in k.iter().enumerate().take(i) {
            let a = A[i][j];
            if a != 0.0 {
                let ha = h * a;
                for n in 0..N {
                    yi[n] += kj[n] * ha;
                }
            }
        }
        k[i] = sys.rhs(x + C[i] * h, &yi);
    }
    Stages { k }
}

fn combine<const N: usize>(y: &[Complex64; N], st: &Stages<N>, h: f64) -> [Complex64; N] {
    let mut out = *y;
    for (i, ki) in st.k.iter().enumerate() {
        if B[i] != 0.0 {
            let hb = h * B[i];
            for n in 0..N {
                out[n] += ki[n] * hb;
            }
        }
    }
    out
}

/// Hairer's combined 5th/3rd order error norm for one step.
fn error_norm<const N: usize>(
    y: &[Complex64; N],
    y_new: &[Complex64; N],
    st: &Stages<N>,
    h: f64,
    rtol: f64,
    atol: f64,
) -> f64 {
    let mut err5 = 0.0;
    let mut err3 = 0.0;
    for n in 0..N {
        let sk = atol + rtol * y[n].norm().max(y_new[n].norm());
        let mut e5 = Complex64::new(0.0, 0.0);
        let mut bsum = Complex64::new(0.0, 0.0);
        for i in 0..STAGES {
            e5 += st.k[i][n] * ER[i];
            bsum += st.k[i][n] * B[i];
        }
        let e3 = bsum - st.k[0][n] * BHH[0] - st.k[8][n] * BHH[1] - st.k[11][n] * BHH[2];
        err5 += (e5.norm() / sk).powi(2);
        err3 += (e3.norm() / sk).powi(2);
    }
    let mut deno = err5 + 0.01 * err3;
    if deno <= 0.0 {
        deno = 1.0;
    }
    h.abs() * err5 * (1.0 / (N as f64 * deno)).sqrt()
}

fn all_finite<const N: usize>(y: &[Complex64; N]) -> bool {
    y.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// One unconditional step of size `h`.
pub fn step<S: OdeSystem<N>, const N: usize>(sys: &S, x: f64, y: &[Complex64; N], h: f64) -> [Complex64; N] {
    let st = stages(sys, x, y, h);
    combine(y, &st, h)
}

/// Re-run the method over a fixed mesh (first entry is the start point).
pub fn replay<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    mesh: &[f64],
    y0: [Complex64; N],
) -> Result<[Complex64; N]> {
    let mut y = y0;
    for w in mesh.windows(2) {
        y = step(sys, w[0], &y, w[1] - w[0]);
        if !all_finite(&y) {
            return Err(Error::NonFinite { x: w[1] });
        }
    }
    Ok(y)
}

/// Adaptive driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dop853 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Largest step ever taken.
    pub h_max: f64,
}

impl Dop853 {
    pub fn new(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            max_steps: 200_000,
            h_max: 0.25,
        }
    }

    /// Integrate from `x0` to `x1` (either direction). Returns the final state
    /// and the accepted mesh, which starts at `x0` and ends at `x1`.
    pub fn integrate<S: OdeSystem<N>, const N: usize>(
        &self,
        sys: &S,
        x0: f64,
        x1: f64,
        y0: [Complex64; N],
    ) -> Result<([Complex64; N], Vec<f64>)> {
        let mut mesh = vec![x0];
        if x0 == x1 {
            return Ok((y0, mesh));
        }
        let dir = (x1 - x0).signum();
        let span = (x1 - x0).abs();
        let mut h = (0.01 * span).min(self.h_max).min(1e-2) * dir;
        let mut x = x0;
        let mut y = y0;
        let mut last_rejected = false;
        let mut steps = 0usize;
        while (x1 - x) * dir > 0.0 {
            if steps >= self.max_steps {
                return Err(Error::TooManySteps {
                    x,
                    target: x1,
                    max_steps: self.max_steps,
                });
            }
            steps += 1;
            let remaining = x1 - x;
            let floor = 16.0 * f64::EPSILON * x.abs().max(1.0);
            // a closing step onto x1 may be a few ulps long
            let last = h.abs() >= remaining.abs() * (1.0 - 1e-12) || remaining.abs() < floor;
            if last {
                h = remaining;
            }
            if !last && h.abs() < floor {
                return Err(Error::StepSizeUnderflow { x, h });
            }
            // Use the step the mesh will record so that replay is bit-exact.
            let x_new = if last { x1 } else { x + h };
            h = x_new - x;
            let st = stages(sys, x, &y, h);
            let y_new = combine(&y, &st, h);
            let err = if all_finite(&y_new) {
                error_norm(&y, &y_new, &st, h, self.rtol, self.atol)
            } else {
                f64::INFINITY
            };
            if err <= 1.0 {
                x = x_new;
                y = y_new;
                mesh.push(x);
                let fac = (err.powf(0.125) / SAFETY).clamp(1.0 / MAX_FACTOR, 1.0 / MIN_FACTOR);
                let mut h_new = h / fac;
                if last_rejected && h_new.abs() > h.abs() {
                    h_new = h;
                }
                h = h_new.abs().min(self.h_max) * dir;
                last_rejected = false;
            } else {
                let fac = if err.is_finite() {
                    (err.powf(0.125) / SAFETY).min(1.0 / MIN_FACTOR)
                } else {
                    10.0
                };
                h /= fac;
                last_rejected = true;
            }
        }
        if !all_finite(&y) {
            return Err(Error::NonFinite { x });
        }
        Ok((y, mesh))
    }
}
