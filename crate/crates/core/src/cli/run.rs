use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ConfigError, Mode, RunConfig};
use super::output::{write_csv, write_json, Cell};
use crate::defect::{find_defect_modes_with, DefectMode, DefectOptions, Normalization, Parity};
use crate::error::Error;
use crate::fit::{fit_rate, relative_deviation};
use crate::floquet::{band_gap_scan, BandGapReport, SpectralInterval};
use crate::potential::Potential;
use crate::resonance::{resonant_state, solve_mode, ResonanceResult, SolverOptions, StateData};

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Config = 2,
    NonConvergence = 3,
    Precondition = 4,
    Failure = 1,
}

#[derive(Debug)]
pub struct RunError {
    pub kind: ExitKind,
    pub stage: String,
    pub message: String,
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }

    fn config(e: ConfigError) -> Self {
        Self {
            kind: ExitKind::Config,
            stage: "config".into(),
            message: e.to_string(),
        }
    }

    fn numeric(stage: impl Into<String>, e: Error) -> Self {
        let kind = match e {
            Error::NonConvergence { .. } | Error::SingularJacobian { .. } => ExitKind::NonConvergence,
            Error::PreconditionViolated { .. } => ExitKind::Precondition,
            Error::InvalidPotential(_) | Error::TruncationInsideSupport { .. } => ExitKind::Config,
            _ => ExitKind::Failure,
        };
        Self {
            kind,
            stage: stage.into(),
            message: e.to_string(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            kind: ExitKind::Failure,
            stage: "output".into(),
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

impl std::error::Error for RunError {}

/// Files written by a run.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub config_hash: String,
    pub files: Vec<PathBuf>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    p: Potential,
    hash: String,
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}_{suffix}", self.cfg.output.stem))
    }

    fn json<T: Serialize>(&mut self, suffix: &str, value: &T) -> Result<String, RunError> {
        let path = self.path(suffix);
        write_json(&path, value).map_err(|e| RunError::io(&path, e))?;
        self.files.push(path);
        Ok(self.name(suffix))
    }

    fn csv(
        &mut self,
        suffix: &str,
        description: &str,
        columns: &[&str],
        rows: Vec<Vec<Cell<'static>>>,
    ) -> Result<String, RunError> {
        let path = self.path(suffix);
        write_csv(&path, description, columns, rows, &self.hash).map_err(|e| RunError::io(&path, e))?;
        self.files.push(path);
        Ok(self.name(suffix))
    }

    fn name(&self, suffix: &str) -> String {
        format!("{}_{suffix}", self.cfg.output.stem)
    }

    fn solver_options(&self) -> SolverOptions {
        let t = &self.cfg.tolerances;
        SolverOptions {
            step_tol: t.step,
            residual_tol: t.residual,
            max_iter: t.max_iter,
            precondition_tol: t.precondition,
        }
    }
}

/// Validate `cfg`, execute its mode and write the artifacts to `out_dir`
/// (or the configured directory).
pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunReport, RunError> {
    let p = cfg.validate().map_err(RunError::config)?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    fs::create_dir_all(&dir).map_err(|e| RunError::io(&dir, e))?;
    let mut ctx = Ctx {
        cfg,
        p,
        hash: cfg.hash(),
        dir,
        files: Vec::new(),
    };
    log::info!("mode {} (config {})", cfg.mode.name(), &ctx.hash[..12]);
    match cfg.mode {
        Mode::Bands => {
            bands(&mut ctx)?;
        }
        Mode::Defect => {
            defect(&mut ctx)?;
        }
        Mode::Resonance | Mode::Bound | Mode::Edge => truncated(&mut ctx)?,
        Mode::Sweep => sweep(&mut ctx)?,
    }
    Ok(RunReport {
        config_hash: ctx.hash,
        files: ctx.files,
    })
}

#[derive(Serialize)]
struct BandsDoc<'a> {
    config_hash: &'a str,
    #[serde(flatten)]
    report: &'a BandGapReport,
}

fn scan(ctx: &Ctx) -> Result<BandGapReport, RunError> {
    let [lo, hi] = ctx.cfg.window;
    band_gap_scan(ctx.p.periodic(), lo, hi, ctx.cfg.scan_points)
        .map_err(|e| RunError::numeric("band scan", e))
}

fn bands(ctx: &mut Ctx) -> Result<BandGapReport, RunError> {
    let report = scan(ctx)?;
    log::info!("{} bands, {} gaps", report.bands().count(), report.gaps().count());
    let hash = ctx.hash.clone();
    ctx.json(
        "bands.json",
        &BandsDoc {
            config_hash: &hash,
            report: &report,
        },
    )?;
    let rows = report
        .samples
        .iter()
        .map(|s| {
            vec![
                Cell::F(s.z),
                Cell::F(s.discriminant.re),
                Cell::F(s.discriminant.im),
                Cell::B(s.in_gap),
            ]
        })
        .collect();
    ctx.csv(
        "bands.csv",
        "Floquet discriminant on the scan grid: energy z, Re and Im of Delta(z), |Delta| > 2",
        &["z", "delta_re", "delta_im", "in_gap"],
        rows,
    )?;
    Ok(report)
}

#[derive(Serialize)]
struct ModeRecord<'a> {
    config_hash: &'a str,
    #[serde(rename = "E")]
    energy: f64,
    parity: Parity,
    normalization: Normalization,
    w0: f64,
    k: f64,
    k_fit: f64,
    antiperiodic: bool,
    matching_residual: f64,
    gap: [f64; 2],
    profile_csv_path: String,
}

#[derive(Serialize)]
struct DefectDoc<'a> {
    config_hash: &'a str,
    modes: Vec<ModeRecord<'a>>,
}

fn find_modes(ctx: &Ctx, report: &BandGapReport) -> Result<Vec<(DefectMode, SpectralInterval)>, RunError> {
    let opts = DefectOptions {
        tol: ctx.cfg.tolerances.defect,
        profile_x_max: ctx.cfg.output.profile_x_max,
        profile_points: ctx.cfg.output.profile_points,
        ..DefectOptions::default()
    };
    let gaps: Vec<SpectralInterval> = report.gaps().copied().collect();
    let found = gaps
        .par_iter()
        .map(|g| {
            find_defect_modes_with(&ctx.p, g, &opts)
                .map(|ms| ms.into_iter().map(|m| (m, *g)).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| RunError::numeric("defect search", e))?;
    Ok(found.into_iter().flatten().collect())
}

fn defect(ctx: &mut Ctx) -> Result<Vec<(DefectMode, SpectralInterval)>, RunError> {
    let report = scan(ctx)?;
    let modes = find_modes(ctx, &report)?;
    log::info!("{} defect modes", modes.len());
    let mut records = Vec::new();
    for (i, (m, gap)) in modes.iter().enumerate() {
        let rows = m
            .profile
            .iter()
            .map(|s| vec![Cell::F(s.x), Cell::F(s.phi), Cell::F(s.dphi)])
            .collect();
        let csv = ctx.csv(
            &format!("defect_mode{i}.csv"),
            &format!(
                "defect eigenfunction at E = {:.16e}: x, Phi(x), Phi'(x)",
                m.energy
            ),
            &["x", "phi", "dphi"],
            rows,
        )?;
        records.push((m, gap, csv));
    }
    let hash = ctx.hash.clone();
    let doc = DefectDoc {
        config_hash: &hash,
        modes: records
            .iter()
            .map(|(m, g, csv)| ModeRecord {
                config_hash: &hash,
                energy: m.energy,
                parity: m.parity,
                normalization: m.normalization,
                w0: m.w0,
                k: m.k,
                k_fit: m.k_fit,
                antiperiodic: m.antiperiodic,
                matching_residual: m.matching_residual,
                gap: [g.lo, g.hi],
                profile_csv_path: csv.clone(),
            })
            .collect(),
    };
    ctx.json("defect.json", &doc)?;
    Ok(modes)
}

/// The mode to continue: nearest to the configured energy, or the lowest
/// one of the sign the mode needs.
fn select_mode(ctx: &Ctx, modes: Vec<(DefectMode, SpectralInterval)>) -> Result<DefectMode, RunError> {
    let wanted = |e: f64| match ctx.cfg.mode {
        Mode::Resonance => e > 0.0,
        Mode::Bound | Mode::Edge => e < 0.0,
        _ => e != 0.0,
    };
    let candidates: Vec<DefectMode> = modes
        .into_iter()
        .map(|(m, _)| m)
        .filter(|m| wanted(m.energy))
        .collect();
    let chosen = match ctx.cfg.energy {
        Some(target) => candidates
            .into_iter()
            .min_by(|a, b| (a.energy - target).abs().total_cmp(&(b.energy - target).abs())),
        None => candidates.into_iter().next(),
    };
    chosen.ok_or_else(|| RunError {
        kind: ExitKind::Config,
        stage: "mode selection".into(),
        message: format!(
            "no defect mode suitable for mode {} in window [{}, {}]",
            ctx.cfg.mode.name(),
            ctx.cfg.window[0],
            ctx.cfg.window[1]
        ),
    })
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Serialize)]
struct SolveRecord<'a> {
    config_hash: &'a str,
    #[serde(rename = "E")]
    energy: f64,
    #[serde(rename = "M")]
    m: f64,
    k: f64,
    z_star: [f64; 2],
    w_star: Option<[f64; 2]>,
    asymptotic_z1: [f64; 2],
    residual: f64,
    iterations: usize,
    lifetime: Option<f64>,
    ball_radius: f64,
    in_ball: bool,
    newton_from: Option<usize>,
    precondition_margin: Option<f64>,
    jacobian_norm: Option<f64>,
    step_sizes: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    state_csv_path: Option<String>,
}

#[derive(Serialize)]
struct TruncatedDoc<'a> {
    config_hash: &'a str,
    mode: &'static str,
    #[serde(rename = "E")]
    energy: f64,
    parity: Parity,
    normalization: Normalization,
    w0: f64,
    solves: Vec<SolveRecord<'a>>,
}

fn solve_all(ctx: &Ctx, mode: &DefectMode) -> Result<Vec<(ResonanceResult, StateData)>, RunError> {
    let opts = ctx.solver_options();
    ctx.cfg
        .radii()
        .par_iter()
        .map(|&m| {
            solve_mode(&ctx.p, mode, m, &opts).map_err(|e| RunError::numeric(format!("solve at M = {m}"), e))
        })
        .collect()
}

fn record<'a>(hash: &'a str, r: &ResonanceResult, state_csv_path: Option<String>) -> SolveRecord<'a> {
    SolveRecord {
        config_hash: hash,
        energy: r.energy,
        m: r.m,
        k: r.k,
        z_star: pair(r.z_star),
        w_star: r.w_star.map(pair),
        asymptotic_z1: pair(r.asymptotic_z1),
        residual: r.residual,
        iterations: r.iterations(),
        lifetime: r.lifetime,
        ball_radius: r.ball_radius,
        in_ball: r.in_ball,
        newton_from: r.newton_from,
        precondition_margin: r.precondition_margin,
        jacobian_norm: r.jacobian_norm,
        step_sizes: r.step_sizes(),
        state_csv_path,
    }
}

fn truncated(ctx: &mut Ctx) -> Result<(), RunError> {
    let report = scan(ctx)?;
    let modes = find_modes(ctx, &report)?;
    let mode = select_mode(ctx, modes)?;
    log::info!("continuing E = {:.12}", mode.energy);
    let results = solve_all(ctx, &mode)?;
    let mut records = Vec::new();
    for (r, data) in &results {
        log::info!(
            "M = {}: z* = {:.12} {:+.6e}i after {} iterations",
            r.m,
            r.z_star.re,
            r.z_star.im,
            r.iterations()
        );
        let x_max = ctx.cfg.output.profile_x_max.unwrap_or(r.m + 4.0);
        let samples = resonant_state(&ctx.p, r, *data, x_max, ctx.cfg.output.profile_points)
            .map_err(|e| RunError::numeric("resonant state", e))?;
        let rows = samples
            .iter()
            .map(|s| {
                vec![
                    Cell::F(s.x),
                    Cell::F(s.phi.re),
                    Cell::F(s.phi.im),
                    Cell::F(s.dphi.re),
                    Cell::F(s.dphi.im),
                ]
            })
            .collect();
        let csv = ctx.csv(
            &format!("{}_M{}.csv", ctx.cfg.mode.name(), r.m),
            &format!("truncated state at M = {}: x, Re/Im Phi*(x), Re/Im Phi*'(x)", r.m),
            &["x", "phi_re", "phi_im", "dphi_re", "dphi_im"],
            rows,
        )?;
        records.push((r, csv));
    }
    let hash = ctx.hash.clone();
    let doc = TruncatedDoc {
        config_hash: &hash,
        mode: ctx.cfg.mode.name(),
        energy: mode.energy,
        parity: mode.parity,
        normalization: mode.normalization,
        w0: mode.w0,
        solves: records
            .into_iter()
            .map(|(r, csv)| record(&hash, r, Some(csv)))
            .collect(),
    };
    let name = format!("{}.json", ctx.cfg.mode.name());
    ctx.json(&name, &doc)?;
    Ok(())
}

/// A fitted slope and its target, or why it could not be fitted.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub target: f64,
    pub slope: Option<f64>,
    pub stderr: Option<f64>,
    pub relative_deviation: Option<f64>,
    /// Radii that entered the fit.
    #[serde(rename = "M_used")]
    pub m_used: Vec<f64>,
    pub error: Option<String>,
}

impl SlopeFit {
    pub fn new(points: &[(f64, f64)], target: f64) -> Self {
        let m_used = points.iter().map(|p| p.0).collect();
        match fit_rate(points) {
            Ok(f) => Self {
                target,
                slope: Some(f.slope),
                stderr: Some(f.stderr),
                relative_deviation: Some(relative_deviation(f.slope, target)),
                m_used,
                error: None,
            },
            Err(e) => Self {
                target,
                slope: None,
                stderr: None,
                relative_deviation: None,
                m_used,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepFits {
    pub err_vs_e: SlopeFit,
    pub err_vs_asymptotic: SlopeFit,
    pub log_theta_e: SlopeFit,
    pub log_d_theta_e: SlopeFit,
}

/// Rate fits of an M-sweep; points with `|z* - E|` below the noise floor
/// are left out of the error fits.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    #[serde(rename = "E")]
    pub energy: f64,
    pub k: f64,
    pub k_fit: f64,
    /// `100 eps |E|`.
    pub noise_floor: f64,
    /// Smallest listed radius from which every root lies in its ball.
    #[serde(rename = "M_min")]
    pub m_min: Option<f64>,
    pub fits: SweepFits,
}

pub fn noise_floor(e: f64) -> f64 {
    100.0 * f64::EPSILON * e.abs()
}

pub fn summarize(results: &[ResonanceResult], k_fit: f64) -> SweepSummary {
    let e = results[0].energy;
    let k = results[0].k;
    let floor = noise_floor(e);
    let above = |v: f64| v >= floor && v.is_finite();
    let err_e: Vec<(f64, f64)> = results
        .iter()
        .map(|r| (r.m, (r.z_star - e).norm()))
        .filter(|p| above(p.1))
        .collect();
    let err_a: Vec<(f64, f64)> = results
        .iter()
        .filter(|r| above((r.z_star - e).norm()))
        .map(|r| (r.m, (r.z_star - r.asymptotic_z1).norm()))
        .filter(|p| above(p.1))
        .collect();
    let theta: Vec<(f64, f64)> = results.iter().map(|r| (r.m, r.theta_e.norm())).collect();
    let d_theta: Vec<(f64, f64)> = results.iter().map(|r| (r.m, r.d_theta_e.norm())).collect();
    let m_min = results
        .iter()
        .rposition(|r| !r.in_ball)
        .map_or(Some(0), |i| (i + 1 < results.len()).then_some(i + 1))
        .map(|i| results[i].m);
    SweepSummary {
        energy: e,
        k,
        k_fit,
        noise_floor: floor,
        m_min,
        fits: SweepFits {
            err_vs_e: SlopeFit::new(&err_e, -2.0 * k),
            err_vs_asymptotic: SlopeFit::new(&err_a, -4.0 * k),
            log_theta_e: SlopeFit::new(&theta, -k),
            log_d_theta_e: SlopeFit::new(&d_theta, k),
        },
    }
}

#[derive(Serialize)]
struct SweepDoc<'a> {
    config_hash: &'a str,
    #[serde(flatten)]
    summary: &'a SweepSummary,
    records: Vec<SolveRecord<'a>>,
}

fn sweep(ctx: &mut Ctx) -> Result<(), RunError> {
    let report = scan(ctx)?;
    let modes = find_modes(ctx, &report)?;
    let mode = select_mode(ctx, modes)?;
    log::info!("sweeping E = {:.12} over M = {:?}", mode.energy, ctx.cfg.radii());
    let results: Vec<ResonanceResult> = solve_all(ctx, &mode)?.into_iter().map(|(r, _)| r).collect();
    let summary = summarize(&results, mode.k_fit);
    let rows = results
        .iter()
        .map(|r| {
            vec![
                Cell::F(r.m),
                Cell::F(r.z_star.re),
                Cell::F(r.z_star.im),
                Cell::F((r.z_star - r.energy).norm()),
                Cell::F((r.z_star - r.asymptotic_z1).norm()),
                Cell::F(r.theta_e.norm()),
                Cell::F(r.d_theta_e.norm()),
                Cell::F(r.k),
                Cell::F(mode.k_fit),
                Cell::B(r.in_ball),
                Cell::I(r.iterations() as i64),
                Cell::F(r.residual),
            ]
        })
        .collect();
    ctx.csv(
        "sweep.csv",
        "truncation sweep: M, Re/Im z*, |z* - E|, |z* - z1|, |Theta(E)|, |dTheta/dz(E)|, Floquet k, fitted k, root in ball, iterations, residual",
        &[
            "M",
            "re_z",
            "im_z",
            "abs_err_vs_E",
            "abs_err_vs_asymptotic",
            "abs_theta_E",
            "abs_dtheta_E",
            "k",
            "k_fit",
            "in_ball",
            "iterations",
            "residual",
        ],
        rows,
    )?;
    let hash = ctx.hash.clone();
    let doc = SweepDoc {
        config_hash: &hash,
        summary: &summary,
        records: results.iter().map(|r| record(&hash, r, None)).collect(),
    };
    ctx.json("sweep_summary.json", &doc)?;
    Ok(())
}
