//! Configuration-driven experiment runner behind the `collapse-lab` binary.
//!
//! A run reads a strict TOML config (unknown keys are errors), fills in
//! defaults, writes the resolved config and a provenance sidecar next to its
//! results, and produces CSV tables, JSON documents and SVG plots. Outputs are
//! a pure function of `(config, seed)`; the worker count only changes how
//! fast they appear.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::born;
use crate::coherent::{CoherentPoint, Component, Mode, ModeBasis, SuperposedState};
use crate::current::{self, PhotonMode, PhotonModes, Trajectory};
use crate::plot::{Chart, Series};
use crate::ring::{self, Absorber, ArcRegion, ClassicalEnsemble, RingProfile, RingState};
use crate::selection::{
    self, BlockingStage, Drift, FixedSatellite, NoDrift, SpawnPerturbed, UrgencySchedule,
};
use crate::spread::{self, ATOMIC_MASS_UNIT};

/// Version string recorded in every provenance sidecar.
pub const VERSION: &str = concat!("collapse-lab ", env!("CARGO_PKG_VERSION"));

/// Environment variable that overrides the output directory.
pub const OUT_ENV: &str = "COLLAPSE_LAB_OUT";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Numerical(String),
}

impl HarnessError {
    /// Process exit status: 2 for configuration errors, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io { .. } | Self::Numerical(_) => 3,
        }
    }

    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Config(_) => "E_CONFIG",
            Self::Io { .. } => "E_IO",
            Self::Numerical(_) => "E_NUMERICAL",
        }
    }

    /// Single-line report: `error[<code>]: <detail>`.
    pub fn report_line(&self) -> String {
        format!(
            "error[{}]: {}",
            self.code(),
            self.to_string().replace('\n', " ")
        )
    }
}

fn config_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(e.to_string())
}

fn numerical_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Numerical(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Ring,
    Select,
    Born,
    Current,
    Spread,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ring => "ring",
            Self::Select => "select",
            Self::Born => "born",
            Self::Current => "current",
            Self::Spread => "spread",
        }
    }
}

/// Top-level config file. Only the section matching the experiment may be
/// present.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ring: Option<RingParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<SelectParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub born: Option<BornParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<CurrentParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spread: Option<SpreadParams>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| config_err(e.message()))
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RingParams {
    pub grid: usize,
    pub mass: f64,
    pub profile: RingProfile,
    pub absorber: Absorber,
    /// Defaults to the accuracy bound of the grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Approximate number of rows in the survival table.
    pub samples: usize,
    pub classical_members: usize,
    /// Measure of the region opened in the classical comparator.
    pub classical_fraction: f64,
    /// Extra strengths `b` run as independent jobs with the same absorber shape.
    pub sweep_strengths: Vec<f64>,
}

impl Default for RingParams {
    fn default() -> Self {
        Self {
            grid: 64,
            mass: 1.0,
            profile: RingProfile::Uniform,
            absorber: Absorber::Delta { x0: 0.0, b: 0.5 },
            dt: None,
            t_end: 8.0,
            samples: 200,
            classical_members: 100_000,
            classical_fraction: 0.05,
            sweep_strengths: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    None,
    /// Fixed extra component at `offset` (flat `[q.., p..]`) from the first
    /// component.
    Satellite {
        offset: Vec<f64>,
        re: f64,
        #[serde(default)]
        im: f64,
    },
    /// Random components around the first one, seeded from the run seed.
    Spawn {
        count: usize,
        spread: f64,
        magnitude: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectParams {
    pub modes: Vec<Mode>,
    pub components: Vec<ComponentSpec>,
    pub schedule: UrgencySchedule,
    pub events: usize,
    pub drift: DriftSpec,
    /// Route every candidate through a sampled blocking vector.
    pub blocking: bool,
}

impl Default for SelectParams {
    fn default() -> Self {
        Self {
            modes: vec![Mode {
                label: 0,
                omega: 1.0,
                weight: 1.0,
            }],
            components: vec![ComponentSpec {
                re: 1.0,
                im: 0.0,
                q: vec![1.0],
                p: vec![0.0],
            }],
            schedule: UrgencySchedule::Constant(1.0),
            events: 3,
            drift: DriftSpec::None,
            blocking: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BornParams {
    pub thetas: Vec<f64>,
    pub samples: u64,
}

impl Default for BornParams {
    fn default() -> Self {
        Self {
            thetas: (1..=15).map(|i| i as f64 / 10.0).collect(),
            samples: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurrentParams {
    /// CSV with columns `particle,charge,t,x,y,z`; replaces `trajectories`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories_csv: Option<PathBuf>,
    pub trajectories: Vec<Trajectory>,
    pub modes: Vec<PhotonMode>,
}

impl Default for CurrentParams {
    fn default() -> Self {
        use crate::current::Breakpoint;
        let bp = |t, x| Breakpoint { t, x };
        Self {
            trajectories_csv: None,
            trajectories: vec![Trajectory::new(
                1.0,
                vec![
                    bp(0.0, [0.0; 3]),
                    bp(1.0, [0.5, 0.0, 0.0]),
                    bp(2.0, [0.5, 0.3, 0.0]),
                ],
            )
            .expect("valid default trajectory")],
            modes: vec![
                PhotonMode {
                    k: [1.0, 0.0, 0.0],
                    polarization: 0,
                    weight: 1.0,
                },
                PhotonMode {
                    k: [0.0, 1.0, 0.0],
                    polarization: 0,
                    weight: 1.0,
                },
                PhotonMode {
                    k: [0.0, 1.0, 1.0],
                    polarization: 1,
                    weight: 1.0,
                },
                PhotonMode {
                    k: [0.0, 0.0, 2.0],
                    polarization: 0,
                    weight: 1.0,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpreadParams {
    pub t_s: f64,
    pub x_m: f64,
    pub mass_kg: f64,
}

impl Default for SpreadParams {
    fn default() -> Self {
        Self {
            t_s: 200e-6,
            x_m: 1e-9,
            mass_kg: 40.0 * ATOMIC_MASS_UNIT,
        }
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub experiment: ExperimentKind,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: usize,
}

impl RunOptions {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            out_dir: None,
            seed: None,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Checks the config against the chosen experiment and returns it with every
/// default filled in. The output directory is not part of the result.
pub fn resolve(
    config: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<ExperimentConfig, HarnessError> {
    let kind = opts.experiment;
    if let Some(declared) = config.experiment {
        if declared != kind {
            return Err(HarnessError::Config(format!(
                "config declares experiment '{}' but '{}' was requested",
                declared.name(),
                kind.name()
            )));
        }
    }
    let present = [
        (ExperimentKind::Ring, config.ring.is_some()),
        (ExperimentKind::Select, config.select.is_some()),
        (ExperimentKind::Born, config.born.is_some()),
        (ExperimentKind::Current, config.current.is_some()),
        (ExperimentKind::Spread, config.spread.is_some()),
    ];
    if let Some((other, _)) = present.iter().find(|(k, p)| *p && *k != kind) {
        return Err(HarnessError::Config(format!(
            "section [{}] does not belong to experiment '{}'",
            other.name(),
            kind.name()
        )));
    }
    let mut resolved = ExperimentConfig {
        experiment: Some(kind),
        seed: Some(opts.seed.or(config.seed).unwrap_or(0)),
        ..Default::default()
    };
    match kind {
        ExperimentKind::Ring => {
            let mut p = config.ring.clone().unwrap_or_default();
            p.dt = Some(p.dt.unwrap_or_else(|| ring::max_dt(p.grid, p.mass)));
            resolved.ring = Some(p);
        }
        ExperimentKind::Select => resolved.select = Some(config.select.clone().unwrap_or_default()),
        ExperimentKind::Born => resolved.born = Some(config.born.clone().unwrap_or_default()),
        ExperimentKind::Current => {
            resolved.current = Some(config.current.clone().unwrap_or_default())
        }
        ExperimentKind::Spread => resolved.spread = Some(config.spread.clone().unwrap_or_default()),
    }
    Ok(resolved)
}

/// Runs one experiment and writes its artifacts.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport, HarnessError> {
    if opts.workers == 0 {
        return Err(HarnessError::Config("--workers must be at least 1".into()));
    }
    let resolved = resolve(config, opts)?;
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(opts.experiment.name()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(numerical_err)?;

    let seed = resolved.seed.unwrap_or(0);
    let artifacts = pool.install(|| match opts.experiment {
        ExperimentKind::Ring => run_ring(resolved.ring.as_ref().expect("resolved")),
        ExperimentKind::Select => run_select(resolved.select.as_ref().expect("resolved"), seed),
        ExperimentKind::Born => run_born(resolved.born.as_ref().expect("resolved"), seed),
        ExperimentKind::Current => run_current(resolved.current.as_ref().expect("resolved")),
        ExperimentKind::Spread => run_spread(resolved.spread.as_ref().expect("resolved")),
    });

    let (artifacts, failure) = match artifacts {
        Ok(a) => (a, None),
        Err(Failure { partial, error }) => match partial {
            Some(a) => (a, Some(error)),
            None => return Err(error),
        },
    };

    fs::create_dir_all(&out_dir).map_err(|e| io_err(&out_dir, e))?;
    let mut files = Vec::new();
    let resolved_text = toml::to_string(&resolved).map_err(numerical_err)?;
    files.push(write_file(
        &out_dir,
        "resolved_config.toml",
        &resolved_text,
    )?);
    for (name, contents) in &artifacts {
        files.push(write_file(&out_dir, name, contents)?);
    }
    let provenance = serde_json::json!({
        "version": VERSION,
        "experiment": opts.experiment.name(),
        "seed": seed,
        "files": artifacts.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
        "status": failure.as_ref().map_or("ok".to_string(), |e| e.report_line()),
    });
    files.push(write_file(
        &out_dir,
        "provenance.json",
        &pretty_json(&provenance)?,
    )?);

    match failure {
        Some(e) => Err(e),
        None => Ok(RunReport { out_dir, files }),
    }
}

type Artifacts = Vec<(String, String)>;

/// A failed run, possibly with partial artifacts worth writing.
struct Failure {
    partial: Option<Artifacts>,
    error: HarnessError,
}

impl From<HarnessError> for Failure {
    fn from(error: HarnessError) -> Self {
        Self {
            partial: None,
            error,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, HarnessError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn pretty_json<T: Serialize>(value: &T) -> Result<String, HarnessError> {
    let mut s = serde_json::to_string_pretty(value).map_err(numerical_err)?;
    s.push('\n');
    Ok(s)
}

fn csv_table(
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(numerical_err)?;
    for row in rows {
        w.write_record(&row).map_err(numerical_err)?;
    }
    let bytes = w.into_inner().map_err(numerical_err)?;
    String::from_utf8(bytes).map_err(numerical_err)
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn run_ring(p: &RingParams) -> Result<Artifacts, Failure> {
    let dt = p.dt.expect("resolved");
    if !(p.t_end > 0.0) || !p.t_end.is_finite() {
        return Err(config_err("ring.t_end must be positive").into());
    }
    if !(0.0..=1.0).contains(&p.classical_fraction) {
        return Err(config_err("ring.classical_fraction must lie in [0, 1]").into());
    }
    let initial = RingState::from_profile(p.profile, p.grid, p.mass).map_err(config_err)?;
    // validates grid, absorber and dt before any stepping
    ring::RingPropagator::new(p.grid, p.mass, &p.absorber, dt).map_err(config_err)?;
    let with_strength = |b: f64| match p.absorber {
        Absorber::Delta { x0, .. } => Absorber::Delta { x0, b },
        Absorber::Plateau {
            x0, width, sigma, ..
        } => Absorber::Plateau {
            x0,
            b,
            width,
            sigma,
        },
    };
    for &b in &p.sweep_strengths {
        ring::RingPropagator::new(p.grid, p.mass, &with_strength(b), dt).map_err(config_err)?;
    }

    let steps = (p.t_end / dt).ceil() as usize;
    let every = (steps / p.samples.max(1)).max(1);
    let curve =
        ring::survival_curve(&initial, &p.absorber, dt, steps, every).map_err(numerical_err)?;

    let ensemble = ClassicalEnsemble::uniform(p.classical_members, 0);
    let region = ArcRegion::centered(p.absorber.center(), p.classical_fraction);
    let times: Vec<f64> = curve.iter().map(|s| s.t).collect();
    let classical = ring::classical_survival(&ensemble, &region, &times);

    let sweep: Vec<(f64, Vec<ring::SurvivalSample>)> = p
        .sweep_strengths
        .par_iter()
        .map(|&b| {
            ring::survival_curve(&initial, &with_strength(b), dt, steps, every).map(|c| (b, c))
        })
        .collect::<Result<_, _>>()
        .map_err(numerical_err)?;

    let mut out = Artifacts::new();
    out.push((
        "survival.csv".into(),
        csv_table(
            &["t_natural", "norm"],
            curve.iter().map(|s| vec![num(s.t), num(s.norm)]),
        )?,
    ));
    out.push((
        "classical.csv".into(),
        csv_table(
            &["t_natural", "fraction_alive"],
            classical
                .iter()
                .map(|s| vec![num(s.t), num(s.fraction_alive)]),
        )?,
    ));
    if !sweep.is_empty() {
        out.push((
            "survival_sweep.csv".into(),
            csv_table(
                &["b_natural", "t_natural", "norm"],
                sweep
                    .iter()
                    .flat_map(|(b, c)| c.iter().map(move |s| vec![num(*b), num(s.t), num(s.norm)])),
            )?,
        ));
    }

    let sidecar = serde_json::json!({
        "grid": p.grid,
        "mass": p.mass,
        "dt": dt,
        "steps": steps,
        "profile": p.profile,
        "absorber": p.absorber,
        "initial_loss_rate": ring::loss_rate(&initial, &p.absorber),
        "final_norm": curve.last().map(|s| s.norm),
        "crossing_time_0_01": ring::crossing_time(&curve, 0.01),
        "classical_members": p.classical_members,
        "classical_fraction_alive": classical.first().map(|s| s.fraction_alive),
    });
    out.push(("ring.json".into(), pretty_json(&sidecar)?));

    let mut series = vec![
        Series::line(
            "quantum N(t)",
            curve.iter().map(|s| (s.t, s.norm)).collect(),
        ),
        Series::line(
            "classical ensemble",
            classical.iter().map(|s| (s.t, s.fraction_alive)).collect(),
        ),
    ];
    for (b, c) in &sweep {
        series.push(Series::line(
            format!("b = {b}"),
            c.iter().map(|s| (s.t, s.norm)).collect(),
        ));
    }
    let chart = Chart {
        title: "Survival on the absorbing ring".into(),
        x_label: "t (hbar = m = 1)".into(),
        y_label: "norm".into(),
        series,
    };
    out.push(("survival.svg".into(), chart.to_svg()));
    Ok(out)
}

fn build_select(
    p: &SelectParams,
    seed: u64,
) -> Result<(SuperposedState, Box<dyn Drift + Sync>), HarnessError> {
    let basis = ModeBasis::new(p.modes.clone()).map_err(config_err)?;
    let components = p
        .components
        .iter()
        .map(|c| {
            CoherentPoint::new(c.q.clone(), c.p.clone())
                .map(|pt| Component::new(Complex64::new(c.re, c.im), pt))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(config_err)?;
    let state = SuperposedState::new(basis, components).map_err(config_err)?;
    p.schedule.validate().map_err(config_err)?;
    if p.events == 0 {
        return Err(config_err("select.events must be at least 1"));
    }
    let drift: Box<dyn Drift + Sync> = match &p.drift {
        DriftSpec::None => Box::new(NoDrift),
        DriftSpec::Satellite { offset, re, im } => {
            if offset.len() != 2 * state.basis().len() {
                return Err(config_err(
                    "select.drift.offset must have 2 entries per mode",
                ));
            }
            Box::new(FixedSatellite {
                offset: offset.clone(),
                coeff: Complex64::new(*re, *im),
            })
        }
        DriftSpec::Spawn {
            count,
            spread,
            magnitude,
        } => Box::new(SpawnPerturbed {
            count: *count,
            spread: *spread,
            magnitude: *magnitude,
            seed,
        }),
    };
    Ok((state, drift))
}

fn run_select(p: &SelectParams, seed: u64) -> Result<Artifacts, Failure> {
    let (state, drift) = build_select(p, seed)?;
    let blocking = p.blocking.then_some(BlockingStage { seed });
    let log = selection::run_sequence_with(&state, &p.schedule, drift.as_ref(), p.events, blocking)
        .map_err(numerical_err)?;

    let n = state.basis().len();
    let mut header: Vec<String> = ["index", "time_natural", "v", "blocked", "tie"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for k in 0..n {
        header.push(format!("q{k}"));
        header.push(format!("p{k}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = log.records.iter().map(|r| {
        let mut row = vec![
            r.index.to_string(),
            num(r.time),
            num(r.v_at_choice),
            r.blocked.to_string(),
            r.tie.to_string(),
        ];
        row.extend(r.chosen.interleaved().into_iter().map(num));
        row
    });
    let mut out = Artifacts::new();
    out.push(("events.csv".into(), csv_table(&header_refs, rows)?));
    let doc = serde_json::json!({
        "events": log.records,
        "aborted": log.aborted.as_ref().map(|e| e.to_string()),
    });
    out.push(("events.json".into(), pretty_json(&doc)?));
    let chart = Chart {
        title: "Selection events".into(),
        x_label: "t (hbar = 1)".into(),
        y_label: "V at choice".into(),
        series: vec![Series::markers(
            "V(chosen)",
            log.records
                .iter()
                .map(|r| (r.time, r.v_at_choice))
                .collect(),
        )],
    };
    out.push(("events.svg".into(), chart.to_svg()));

    match log.aborted {
        None => Ok(out),
        Some(e) => Err(Failure {
            partial: Some(out),
            error: HarnessError::Numerical(format!("sequence aborted: {e}")),
        }),
    }
}

fn run_born(p: &BornParams, seed: u64) -> Result<Artifacts, Failure> {
    if p.thetas.is_empty() {
        return Err(config_err("born.thetas must not be empty").into());
    }
    for &theta in &p.thetas {
        born::TransitionGeometry::from_theta(theta)
            .map_err(|_| config_err(format!("born.thetas entry {theta} outside [0, pi/2]")))?;
    }
    if p.samples == 0 {
        return Err(config_err("born.samples must be at least 1").into());
    }
    let cells = born::sweep(&p.thetas, p.samples, seed).map_err(numerical_err)?;
    let mut out = Artifacts::new();
    out.push((
        "sweep.csv".into(),
        csv_table(
            &["theta_rad", "n", "p_hat", "stderr", "cos2theta", "z_score"],
            cells.iter().map(|c| {
                vec![
                    num(c.theta),
                    c.n.to_string(),
                    num(c.p_hat),
                    num(c.stderr),
                    num(c.cos2theta),
                    num(c.z_score),
                ]
            }),
        )?,
    ));
    let fine: Vec<(f64, f64)> = (0..=100)
        .map(|i| {
            let t = i as f64 / 100.0 * std::f64::consts::FRAC_PI_2;
            (t, t.cos().powi(2))
        })
        .collect();
    let chart = Chart {
        title: "Acceptance frequency vs cos^2 theta".into(),
        x_label: "theta (rad)".into(),
        y_label: "acceptance".into(),
        series: vec![
            Series::line("cos^2 theta", fine),
            Series::markers(
                "Monte Carlo",
                cells.iter().map(|c| (c.theta, c.p_hat)).collect(),
            ),
        ],
    };
    out.push(("sweep.svg".into(), chart.to_svg()));
    Ok(out)
}

fn run_current(p: &CurrentParams) -> Result<Artifacts, Failure> {
    let trajectories = match &p.trajectories_csv {
        Some(path) => {
            let file =
                fs::File::open(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            current::read_trajectories_csv(file).map_err(config_err)?
        }
        None => p.trajectories.clone(),
    };
    let modes = PhotonModes::new(p.modes.clone()).map_err(config_err)?;
    let currents = current::mode_currents(&trajectories, &modes).map_err(config_err)?;
    let displacement =
        current::displacement_from_current(&trajectories, &modes).map_err(numerical_err)?;
    let bracket = current::current_bracket(&trajectories, &modes).map_err(numerical_err)?;
    let persistence = current::vacuum_persistence(&trajectories, &modes);
    let basis = modes.basis();
    let photon_number = (basis.bracket(displacement.q(), displacement.q())
        + basis.bracket(displacement.p(), displacement.p()))
        / 2.0;

    let rows = modes.modes().iter().enumerate().map(|(i, m)| {
        let k = modes.wave_vector(i);
        let j = &currents[i];
        let kj = current::k_dot_j(&k, j);
        let mut row = vec![
            i.to_string(),
            num(k.k0()),
            num(m.k[0]),
            num(m.k[1]),
            num(m.k[2]),
            m.polarization.to_string(),
            num(m.weight),
        ];
        for z in j.0 {
            row.push(num(z.re));
            row.push(num(z.im));
        }
        row.extend([
            num(kj.re),
            num(kj.im),
            num(displacement.q()[i]),
            num(displacement.p()[i]),
        ]);
        row
    });
    let header = [
        "mode",
        "k0_natural",
        "kx",
        "ky",
        "kz",
        "polarization",
        "weight",
        "j0_re",
        "j0_im",
        "j1_re",
        "j1_im",
        "j2_re",
        "j2_im",
        "j3_re",
        "j3_im",
        "kdotj_re",
        "kdotj_im",
        "q",
        "p",
    ];
    let mut out = Artifacts::new();
    out.push(("current.csv".into(), csv_table(&header, rows)?));
    let summary = serde_json::json!({
        "mass_shell_bracket": bracket,
        "vacuum_persistence": persistence.as_ref().ok(),
        "persistence_error": persistence.as_ref().err().map(|e| e.to_string()),
        "transverse_photon_number": photon_number,
        "displacement": displacement,
        "trajectories": trajectories.len(),
    });
    out.push(("current.json".into(), pretty_json(&summary)?));
    Ok(out)
}

fn run_spread(p: &SpreadParams) -> Result<Artifacts, Failure> {
    let value = spread::spread_estimate(p.t_s, p.x_m, p.mass_kg).map_err(config_err)?;
    let mut out = Artifacts::new();
    out.push((
        "spread.csv".into(),
        csv_table(
            &["t_s", "x_m", "mass_kg", "spread_m"],
            [vec![num(p.t_s), num(p.x_m), num(p.mass_kg), num(value)]],
        )?,
    ));
    let doc = serde_json::json!({
        "t_s": p.t_s,
        "x_m": p.x_m,
        "mass_kg": p.mass_kg,
        "hbar_js": spread::HBAR,
        "spread_m": value,
        "spread_cm": value * 100.0,
    });
    out.push(("spread.json".into(), pretty_json(&doc)?));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "experiment = \"born\"\nsede = 3\n",
            "[born]\nsamples = 10\nthetaz = [0.1]\n",
            "[ring.absorber]\nkind = \"delta\"\nx0 = 0.0\nb = 1.0\nwidth = 0.1\n",
        ] {
            let err = ExperimentConfig::from_toml_str(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
    }

    #[test]
    fn foreign_sections_are_rejected() {
        let cfg = ExperimentConfig::from_toml_str("[born]\nsamples = 10\n").unwrap();
        let err = resolve(&cfg, &RunOptions::new(ExperimentKind::Ring)).unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)));
        let cfg = ExperimentConfig::from_toml_str("experiment = \"born\"\n").unwrap();
        assert!(resolve(&cfg, &RunOptions::new(ExperimentKind::Spread)).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        for kind in [
            ExperimentKind::Ring,
            ExperimentKind::Select,
            ExperimentKind::Born,
            ExperimentKind::Current,
            ExperimentKind::Spread,
        ] {
            let resolved = resolve(&ExperimentConfig::default(), &RunOptions::new(kind)).unwrap();
            let text = toml::to_string(&resolved).unwrap();
            let back = ExperimentConfig::from_toml_str(&text).unwrap();
            assert_eq!(back, resolved, "{text}");
        }
    }

    #[test]
    fn seed_precedence() {
        let cfg = ExperimentConfig::from_toml_str("seed = 5\n").unwrap();
        let mut opts = RunOptions::new(ExperimentKind::Born);
        assert_eq!(resolve(&cfg, &opts).unwrap().seed, Some(5));
        opts.seed = Some(9);
        assert_eq!(resolve(&cfg, &opts).unwrap().seed, Some(9));
    }

    #[test]
    fn report_line_is_single_line() {
        let e = HarnessError::Config("bad\nkey".into());
        assert_eq!(e.report_line(), "error[E_CONFIG]: bad key");
    }
}
