//! Periodic-plus-defect potentials.
//!
//! A [`Potential`] is a finite Fourier series of period one plus a compactly
//! supported analytic bump. Nothing is ever sampled onto a grid, so the
//! integrators can evaluate it anywhere and the defect vanishes exactly
//! outside its support.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PARITY_SAMPLES: usize = 100;
const PARITY_TOL: f64 = 1e-12;
const PARITY_SEED: u64 = 0x005e_ed0f_0dd5;

/// `sum_n a_n cos(2 pi n x) + sum_n b_n sin(2 pi n x)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PeriodicPotential {
    /// Coefficient of `cos(2 pi n x)` at index `n`, starting from `n = 0`.
    #[serde(rename = "cos", default)]
    pub cosine_coeffs: Vec<f64>,
    /// Coefficient of `sin(2 pi n x)` at index `n - 1`, starting from `n = 1`.
    #[serde(rename = "sin", default)]
    pub sine_coeffs: Vec<f64>,
}

impl PeriodicPotential {
    pub fn new(cosine_coeffs: Vec<f64>, sine_coeffs: Vec<f64>) -> Self {
        Self {
            cosine_coeffs,
            sine_coeffs,
        }
    }

    /// The constant potential `c`.
    pub fn constant(c: f64) -> Self {
        Self::new(vec![c], vec![])
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn eval(&self, x: f64) -> f64 {
        // Reduce to one period first so that eval(x + 1) == eval(x) up to the
        // rounding of the reduction itself.
        let t = x.rem_euclid(1.0);
        let mut acc = 0.0;
        for (n, a) in self.cosine_coeffs.iter().enumerate() {
            if n == 0 {
                acc += a;
            } else if *a != 0.0 {
                acc += a * (2.0 * PI * n as f64 * t).cos();
            }
        }
        for (j, b) in self.sine_coeffs.iter().enumerate() {
            if *b != 0.0 {
                acc += b * (2.0 * PI * (j + 1) as f64 * t).sin();
            }
        }
        acc
    }

    /// Even about `x = 0` exactly when every sine coefficient vanishes.
    pub fn is_even(&self) -> bool {
        self.sine_coeffs.iter().all(|b| *b == 0.0)
    }

    fn validate(&self) -> Result<()> {
        if self
            .cosine_coeffs
            .iter()
            .chain(&self.sine_coeffs)
            .any(|c| !c.is_finite())
        {
            return Err(Error::InvalidPotential(
                "periodic coefficients must be finite".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectShape {
    /// `a exp(-1 / (1 - (x/r)^2))` inside the support.
    SmoothBump,
    /// `a cos^2(pi x / (2 r))` inside the support.
    CosineWindow,
}

/// Compactly supported defect centred at `center` with half-width `radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectPotential {
    pub shape: DefectShape,
    pub amplitude: f64,
    #[serde(rename = "rho")]
    pub radius: f64,
    #[serde(default)]
    pub center: f64,
}

impl DefectPotential {
    pub fn new(shape: DefectShape, amplitude: f64, radius: f64) -> Self {
        Self {
            shape,
            amplitude,
            radius,
            center: 0.0,
        }
    }

    pub fn shifted(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn none() -> Self {
        Self::new(DefectShape::SmoothBump, 0.0, 0.5)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = (x - self.center) / self.radius;
        if s.abs() >= 1.0 || self.amplitude == 0.0 {
            return 0.0;
        }
        match self.shape {
            DefectShape::SmoothBump => self.amplitude * (-1.0 / (1.0 - s * s)).exp(),
            DefectShape::CosineWindow => {
                let c = (0.5 * PI * s).cos();
                self.amplitude * c * c
            }
        }
    }

    /// Smallest `rho` with `eval(x) == 0` for every `|x| >= rho`.
    pub fn support_radius(&self) -> f64 {
        self.center.abs() + self.radius
    }

    /// Points where the defect is not smooth or starts/stops.
    fn breakpoints(&self) -> [f64; 2] {
        [self.center - self.radius, self.center + self.radius]
    }

    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidPotential(format!(
                "defect.rho must be positive and finite, got {}",
                self.radius
            )));
        }
        if !self.amplitude.is_finite() || !self.center.is_finite() {
            return Err(Error::InvalidPotential(
                "defect.amplitude and defect.center must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// `V = V_per + V_def`, optionally switched off on the left half-line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialSpec", into = "PotentialSpec")]
pub struct Potential {
    periodic: PeriodicPotential,
    defect: DefectPotential,
    symmetric: bool,
    half_line: bool,
}

/// Wire form of [`Potential`]; validated on conversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub periodic: PeriodicPotential,
    pub defect: DefectPotential,
    #[serde(default)]
    pub symmetric: bool,
    #[serde(default)]
    pub half_line: bool,
}

impl TryFrom<PotentialSpec> for Potential {
    type Error = Error;

    fn try_from(spec: PotentialSpec) -> Result<Self> {
        Potential::with_flags(spec.periodic, spec.defect, spec.symmetric, spec.half_line)
    }
}

impl From<Potential> for PotentialSpec {
    fn from(p: Potential) -> Self {
        PotentialSpec {
            periodic: p.periodic,
            defect: p.defect,
            symmetric: p.symmetric,
            half_line: p.half_line,
        }
    }
}

impl Potential {
    /// Full-line potential; `symmetric` is verified, not trusted.
    pub fn new(periodic: PeriodicPotential, defect: DefectPotential, symmetric: bool) -> Result<Self> {
        Self::with_flags(periodic, defect, symmetric, false)
    }

    /// Edge configuration: `V = 0` for `x < 0`.
    pub fn half_line(periodic: PeriodicPotential, defect: DefectPotential) -> Result<Self> {
        Self::with_flags(periodic, defect, false, true)
    }

    /// The bare periodic background, declared symmetric when it is even.
    pub fn periodic_only(periodic: PeriodicPotential) -> Result<Self> {
        let symmetric = periodic.is_even();
        Self::with_flags(periodic, DefectPotential::none(), symmetric, false)
    }

    pub fn with_flags(
        periodic: PeriodicPotential,
        defect: DefectPotential,
        symmetric: bool,
        half_line: bool,
    ) -> Result<Self> {
        periodic.validate()?;
        defect.validate()?;
        if symmetric && half_line {
            return Err(Error::InvalidPotential(
                "a half-line potential cannot be declared symmetric".into(),
            ));
        }
        let p = Self {
            periodic,
            defect,
            symmetric,
            half_line,
        };
        if symmetric {
            p.check_parity()?;
        }
        Ok(p)
    }

    /// Randomised honesty check of the declared parity.
    pub fn check_parity(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(PARITY_SEED);
        let span = self.support_radius() + 3.0;
        for _ in 0..PARITY_SAMPLES {
            let x = rng.gen_range(0.0..span);
            let (a, b) = (self.eval(x), self.eval(-x));
            if (a - b).abs() > PARITY_TOL * (1.0 + a.abs()) {
                return Err(Error::InvalidPotential(format!(
                    "declared symmetric but V({x}) = {a} differs from V(-{x}) = {b}"
                )));
            }
        }
        Ok(())
    }

    pub fn periodic(&self) -> &PeriodicPotential {
        &self.periodic
    }

    pub fn defect(&self) -> &DefectPotential {
        &self.defect
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_half_line(&self) -> bool {
        self.half_line
    }

    /// `rho`: the defect vanishes for `|x| >= rho`.
    pub fn support_radius(&self) -> f64 {
        self.defect.support_radius()
    }

    /// Smallest integer `>= rho`; the periodic region starts there on a
    /// period boundary.
    pub fn rho_ceil(&self) -> f64 {
        self.support_radius().ceil()
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.half_line && x < 0.0 {
            return 0.0;
        }
        self.periodic.eval(x) + self.defect.eval(x)
    }

    /// `V(x)` for `|x| <= M`, zero outside.
    pub fn eval_truncated(&self, m: f64, x: f64) -> Result<f64> {
        self.check_truncation(m)?;
        Ok(if x.abs() <= m { self.eval(x) } else { 0.0 })
    }

    pub fn check_truncation(&self, m: f64) -> Result<()> {
        let rho = self.support_radius();
        if !(m > rho) || !m.is_finite() {
            return Err(Error::TruncationInsideSupport { m, rho });
        }
        Ok(())
    }

    /// Sorted points strictly inside `(lo, hi)` where `V` is not smooth.
    pub fn breakpoints_between(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = Vec::with_capacity(3);
        if self.defect.amplitude != 0.0 {
            pts.extend(self.defect.breakpoints());
        }
        if self.half_line {
            pts.push(0.0);
        }
        pts.retain(|x| *x > lo && *x < hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn ref1() -> Potential {
        Potential::new(
            PeriodicPotential::new(vec![0.0, 10.0], vec![]),
            DefectPotential::new(DefectShape::SmoothBump, -8.0, 0.5),
            true,
        )
        .unwrap()
    }

    #[test]
    fn cosine_background_vanishes_at_quarter_period() {
        let p = Potential::periodic_only(PeriodicPotential::new(vec![0.0, 1.0], vec![])).unwrap();
        assert!(p.eval(0.25).abs() < 1e-15);
    }

    #[test]
    fn constant_background_outside_support() {
        let p = Potential::new(
            PeriodicPotential::constant(3.5),
            DefectPotential::new(DefectShape::CosineWindow, 2.0, 0.7),
            true,
        )
        .unwrap();
        let rho = p.support_radius();
        assert_eq!(p.eval(rho + 1.0), 3.5);
        assert_eq!(p.eval(rho + 2.0), 3.5);
    }

    #[test]
    fn ref1_at_origin() {
        let expected = 10.0 - 8.0 * (-1.0f64).exp();
        assert!((ref1().eval(0.0) - expected).abs() < 1e-14);
        assert!((expected - 7.05696).abs() < 1e-5);
    }

    #[test]
    fn truncation() {
        let p = ref1();
        assert_eq!(p.eval_truncated(8.0, 8.5).unwrap(), 0.0);
        assert!((p.eval_truncated(8.0, 0.0).unwrap() - p.eval(0.0)).abs() == 0.0);
        assert!((p.eval_truncated(8.0, -8.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(matches!(
            p.eval_truncated(0.4, 0.0),
            Err(Error::TruncationInsideSupport { .. })
        ));
        assert!(p.eval_truncated(0.5, 0.0).is_err());
    }

    #[test]
    fn dishonest_parity_is_rejected() {
        let shifted = DefectPotential::new(DefectShape::SmoothBump, -8.0, 0.5).shifted(0.13);
        let err = Potential::new(PeriodicPotential::new(vec![0.0, 10.0], vec![]), shifted, true);
        assert!(matches!(err, Err(Error::InvalidPotential(_))));
        let sine = PeriodicPotential::new(vec![0.0, 10.0], vec![1.0]);
        assert!(Potential::new(sine, DefectPotential::none(), true).is_err());
    }

    #[test]
    fn half_line_is_zero_on_the_left() {
        let p = Potential::half_line(
            PeriodicPotential::new(vec![0.0, 10.0], vec![]),
            DefectPotential::new(DefectShape::SmoothBump, -20.0, 0.5),
        )
        .unwrap();
        assert_eq!(p.eval(-0.1), 0.0);
        assert_eq!(p.eval(-7.0), 0.0);
        assert!((p.eval(0.0) - (10.0 - 20.0 * (-1.0f64).exp())).abs() < 1e-12);
        assert_eq!(p.breakpoints_between(-1.0, 1.0), vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let json = r#"{"periodic": {"cos": [0, 10], "sin": []},
                       "defect": {"shape": "smooth_bump", "amplitude": -8, "rho": 0.5},
                       "symmetric": true, "half_line": false}"#;
        let p: Potential = serde_json::from_str(json).unwrap();
        assert_eq!(p, ref1());
        let back: Potential = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        let bad =
            r#"{"periodic": {"cos": [0]}, "defect": {"shape": "smooth_bump", "amplitude": 1, "rho": -1}}"#;
        assert!(serde_json::from_str::<Potential>(bad).is_err());
    }

    proptest! {
        #[test]
        fn periodic_outside_support(x in 0.5f64..5.5) {
            let p = ref1();
            prop_assert!((p.eval(x + 1.0) - p.eval(x)).abs() < 1e-12);
        }

        #[test]
        fn defect_vanishes_outside_support(x in 0.5f64..50.0, sign in prop::bool::ANY) {
            let p = Potential::new(
                PeriodicPotential::new(vec![1.0, 10.0, -2.0], vec![]),
                DefectPotential::new(DefectShape::CosineWindow, 4.0, 0.5),
                true,
            ).unwrap();
            let x = if sign { x } else { -x };
            prop_assert_eq!(p.eval(x) - p.periodic().eval(x), 0.0);
        }
    }
}
