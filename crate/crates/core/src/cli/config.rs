use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::output;
use crate::potential::{Potential, PotentialSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Bands,
    Defect,
    Resonance,
    Bound,
    Edge,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Bands => "bands",
            Mode::Defect => "defect",
            Mode::Resonance => "resonance",
            Mode::Bound => "bound",
            Mode::Edge => "edge",
            Mode::Sweep => "sweep",
        }
    }

    fn needs_truncation(self) -> bool {
        !matches!(self, Mode::Bands | Mode::Defect)
    }
}

/// One radius or an increasing list of radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Radii {
    One(f64),
    List(Vec<f64>),
}

impl Radii {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Radii::One(m) => vec![*m],
            Radii::List(ms) => ms.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Adaptive integrator tolerance for the band scan.
    pub ode: f64,
    /// Root tolerance of the defect-eigenvalue search.
    pub defect: f64,
    /// Solver step tolerance, relative to `max(1, |E|)`.
    pub step: f64,
    /// Solver residual tolerance.
    pub residual: f64,
    pub max_iter: usize,
    /// Relative margin below which the bound/edge problem is rejected.
    pub precondition: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ode: 1e-10,
            defect: 1e-12,
            step: 1e-13,
            residual: 1e-11,
            max_iter: 200,
            precondition: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub dir: String,
    /// Prefix of every emitted file name.
    pub stem: String,
    /// Half-width of the sampled profiles; defaults to `ceil(rho) + 10`
    /// (defect) or `M + 4` (truncated states).
    pub profile_x_max: Option<f64>,
    pub profile_points: usize,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            stem: "run".into(),
            profile_x_max: None,
            profile_points: 401,
        }
    }
}

fn default_window() -> [f64; 2] {
    [-10.0, 40.0]
}

fn default_scan_points() -> usize {
    2000
}

/// A complete experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    pub mode: Mode,
    /// Energy window `[z_min, z_max]` of the band scan and defect search.
    #[serde(default = "default_window")]
    pub window: [f64; 2],
    #[serde(default = "default_scan_points")]
    pub scan_points: usize,
    /// Defect eigenvalue to continue; the mode nearest to it is used.
    /// Without it: the lowest mode of the sign the mode requires.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Radii>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Outputs,
}

/// A validation failure with the path of the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.into(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            err(
                if path == "." { "<root>" } else { &path },
                e.into_inner().to_string(),
            )
        })?;
        Ok(cfg)
    }

    pub fn potential(&self) -> Result<Potential, ConfigError> {
        Potential::try_from(self.potential.clone()).map_err(|e| err("potential", e.to_string()))
    }

    pub fn radii(&self) -> Vec<f64> {
        self.m.as_ref().map(Radii::values).unwrap_or_default()
    }

    /// Checks everything that can be checked before any numerics run.
    pub fn validate(&self) -> Result<Potential, ConfigError> {
        let p = self.potential()?;
        let [lo, hi] = self.window;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(err(
                "window",
                format!("need finite z_min < z_max, got [{lo}, {hi}]"),
            ));
        }
        if self.scan_points < 2 {
            return Err(err("scan_points", "need at least 2 points"));
        }
        if let Some(e) = self.energy {
            if !e.is_finite() {
                return Err(err("energy", "must be finite"));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.ode", t.ode),
            ("tolerances.defect", t.defect),
            ("tolerances.step", t.step),
            ("tolerances.residual", t.residual),
            ("tolerances.precondition", t.precondition),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(err(name, format!("must be positive, got {v}")));
            }
        }
        if t.max_iter == 0 {
            return Err(err("tolerances.max_iter", "must be positive"));
        }
        if self.output.profile_points < 2 {
            return Err(err("output.profile_points", "need at least 2 points"));
        }
        if let Some(x) = self.output.profile_x_max {
            if !(x > 0.0) || !x.is_finite() {
                return Err(err("output.profile_x_max", "must be positive"));
            }
        }
        if self.mode.needs_truncation() {
            let ms = self.radii();
            if ms.is_empty() {
                return Err(err(
                    "M",
                    format!("mode {} needs a truncation radius", self.mode.name()),
                ));
            }
            let rho = p.support_radius();
            for (i, m) in ms.iter().enumerate() {
                if !(*m > rho) || !m.is_finite() {
                    return Err(err(
                        &format!("M[{i}]"),
                        format!(
                            "truncation radius M = {m} must exceed the defect support radius rho = {rho}"
                        ),
                    ));
                }
            }
            if ms.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(err("M", "radii must be strictly increasing"));
            }
            if self.mode == Mode::Sweep && ms.len() < 3 {
                return Err(err("M", "a sweep needs at least 3 radii for the rate fits"));
            }
        }
        if self.mode == Mode::Edge && !p.is_half_line() {
            return Err(err(
                "potential.half_line",
                "edge mode needs a half-line potential",
            ));
        }
        if matches!(self.mode, Mode::Resonance | Mode::Bound) && p.is_half_line() {
            return Err(err(
                "potential.half_line",
                format!("mode {} needs a full-line potential; use edge", self.mode.name()),
            ));
        }
        Ok(p)
    }

    /// SHA-256 of the canonical serialization (defaults filled in, fixed
    /// number format), so equivalent files hash equally.
    pub fn hash(&self) -> String {
        let bytes = output::to_json_compact(self).expect("config serializes");
        format!("{:x}", Sha256::digest(&bytes))
    }
}
