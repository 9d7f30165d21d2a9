//! Classical currents of piecewise-linear charged trajectories and the
//! coherent photon displacement they induce.
//!
//! Metric signature `(+,−,−,−)`, `kx = k₀t − k⃗·x⃗`, `c = ħ = 1`. Four-vectors
//! store covariant components, so a trajectory with velocity `v⃗` has
//! `dx_μ/dt = (1, −v⃗)` and
//!
//! ```text
//! J_μ(k) = Σ_i −i e_i ∫ dt (dx_{iμ}/dt) e^{ikx_i(t)}.
//! ```
//!
//! On a linear segment starting at `(t_a, x⃗_a)` the integral is closed-form:
//! `u_μ e^{ik·x_a} (e^{iφΔt} − 1)/(iφ)` with `φ = k·u = k₀ − k⃗·v⃗`.

use std::io::Read;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coherent::{CoherentError, CoherentPoint, Mode, ModeBasis};

/// Largest tolerated `|k₀ − |k⃗||`.
pub const SHELL_TOLERANCE: f64 = 1e-9;

/// Trajectories sharing an interval may differ in endpoints by this much.
const INTERVAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurrentError {
    #[error("wave vector off the mass shell: k0 = {k0}, |k| = {k_abs}")]
    OffShell { k0: f64, k_abs: f64 },
    #[error("trajectory needs at least 2 breakpoints, got {0}")]
    TooFewBreakpoints(usize),
    #[error("breakpoint times must increase strictly (at index {0})")]
    NonIncreasingTime(usize),
    #[error("segment {segment} has speed {speed} >= 1")]
    Superluminal { segment: usize, speed: f64 },
    #[error("non-finite trajectory data")]
    NonFinite,
    #[error("trajectories do not share a common time interval")]
    IntervalMismatch,
    #[error("no trajectories given")]
    NoTrajectories,
    #[error("expected {expected} per-mode values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("photon mode {0} has zero wave vector; polarization undefined")]
    ZeroWaveVector(usize),
    #[error("photon mode {index} has polarization {polarization}, expected 0 or 1")]
    Polarization { index: usize, polarization: u8 },
    #[error("⟨J*·J⟩ = {0:e} is negative; persistence undefined for this current")]
    IndefiniteBracket(f64),
    #[error("particle {0} has inconsistent charges across rows")]
    InconsistentCharge(String),
    #[error("trajectory csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Coherent(#[from] CoherentError),
}

/// Four components `X_μ`, `μ = 0..3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourVector(pub [Complex64; 4]);

impl FourVector {
    pub const ZERO: Self = Self([Complex64 { re: 0.0, im: 0.0 }; 4]);

    pub fn real(c: [f64; 4]) -> Self {
        Self(c.map(|x| Complex64::new(x, 0.0)))
    }

    /// `X·Y = X_μ Y^μ = X₀Y₀ − X⃗·Y⃗`, bilinear (no conjugation).
    pub fn dot(&self, other: &Self) -> Complex64 {
        let [a0, a1, a2, a3] = self.0;
        let [b0, b1, b2, b3] = other.0;
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self(self.0.map(|z| z * factor))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.0;
        out.iter_mut().zip(other.0).for_each(|(a, b)| *a += b);
        Self(out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// An on-shell wave vector `k^μ = (|k⃗|, k⃗)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveVector {
    k0: f64,
    k: [f64; 3],
}

impl WaveVector {
    pub fn on_shell(k: [f64; 3]) -> Self {
        Self { k0: norm3(&k), k }
    }

    /// Rejects `k₀ < 0` or `|k₀ − |k⃗|| > 1e-9`.
    pub fn new(k0: f64, k: [f64; 3]) -> Result<Self, CurrentError> {
        let k_abs = norm3(&k);
        if !k0.is_finite() || k.iter().any(|x| !x.is_finite()) {
            return Err(CurrentError::NonFinite);
        }
        if k0 < 0.0 || (k0 - k_abs).abs() > SHELL_TOLERANCE {
            return Err(CurrentError::OffShell { k0, k_abs });
        }
        Ok(Self { k0, k })
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn spatial(&self) -> [f64; 3] {
        self.k
    }

    /// `k·x = k₀t − k⃗·x⃗`.
    pub fn phase_at(&self, t: f64, x: &[f64; 3]) -> f64 {
        self.k0 * t - dot3(&self.k, x)
    }

    /// `k^μ` lowered to covariant components `(k₀, −k⃗)`, for `k·J`.
    pub fn covariant(&self) -> FourVector {
        FourVector::real([self.k0, -self.k[0], -self.k[1], -self.k[2]])
    }
}

fn norm3(v: &[f64; 3]) -> f64 {
    dot3(v, v).sqrt()
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Breakpoint {
    pub t: f64,
    pub x: [f64; 3],
}

/// A charge moving linearly between breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrajectory")]
pub struct Trajectory {
    charge: f64,
    breakpoints: Vec<Breakpoint>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrajectory {
    charge: f64,
    breakpoints: Vec<Breakpoint>,
}

impl TryFrom<RawTrajectory> for Trajectory {
    type Error = CurrentError;

    fn try_from(raw: RawTrajectory) -> Result<Self, Self::Error> {
        Self::new(raw.charge, raw.breakpoints)
    }
}

impl Trajectory {
    pub fn new(charge: f64, breakpoints: Vec<Breakpoint>) -> Result<Self, CurrentError> {
        if breakpoints.len() < 2 {
            return Err(CurrentError::TooFewBreakpoints(breakpoints.len()));
        }
        if !charge.is_finite()
            || breakpoints
                .iter()
                .any(|b| !b.t.is_finite() || b.x.iter().any(|x| !x.is_finite()))
        {
            return Err(CurrentError::NonFinite);
        }
        for (i, w) in breakpoints.windows(2).enumerate() {
            if w[1].t <= w[0].t {
                return Err(CurrentError::NonIncreasingTime(i + 1));
            }
        }
        let traj = Self {
            charge,
            breakpoints,
        };
        for (segment, v) in traj.velocities().enumerate() {
            let speed = norm3(&v);
            if !(speed < 1.0) {
                return Err(CurrentError::Superluminal { segment, speed });
            }
        }
        Ok(traj)
    }

    /// Charge at rest at `x` over `[t1, t2]`.
    pub fn stationary(charge: f64, x: [f64; 3], t1: f64, t2: f64) -> Result<Self, CurrentError> {
        Self::new(
            charge,
            vec![Breakpoint { t: t1, x }, Breakpoint { t: t2, x }],
        )
    }

    pub fn charge(&self) -> f64 {
        self.charge
    }

    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.breakpoints
    }

    pub fn with_charge(&self, charge: f64) -> Self {
        Self {
            charge,
            breakpoints: self.breakpoints.clone(),
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        (
            self.breakpoints[0].t,
            self.breakpoints[self.breakpoints.len() - 1].t,
        )
    }

    fn velocities(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.breakpoints.windows(2).map(|w| {
            let dt = w[1].t - w[0].t;
            [0, 1, 2].map(|i| (w[1].x[i] - w[0].x[i]) / dt)
        })
    }

    /// `∫ dt (dx_μ/dt) e^{ikx(t)}` summed over segments, without the charge.
    pub fn line_integral(&self, k: &WaveVector) -> FourVector {
        let mut total = FourVector::ZERO;
        for (w, v) in self.breakpoints.windows(2).zip(self.velocities()) {
            let dt = w[1].t - w[0].t;
            let phi = k.k0 - dot3(&k.k, &v);
            let half = 0.5 * phi * dt;
            // (e^{iφΔt} − 1)/(iφ) = Δt e^{iφΔt/2} sinc(φΔt/2)
            let sinc = if half.abs() < 1e-8 {
                1.0 - half * half / 6.0
            } else {
                half.sin() / half
            };
            let factor = Complex64::from_polar(dt * sinc, k.phase_at(w[0].t, &w[0].x) + half);
            let u = FourVector::real([1.0, -v[0], -v[1], -v[2]]);
            total = total.add(&u.scale(factor));
        }
        total
    }
}

fn common_interval(trajectories: &[Trajectory]) -> Result<(), CurrentError> {
    let first = trajectories
        .first()
        .ok_or(CurrentError::NoTrajectories)?
        .interval();
    for t in trajectories {
        let (a, b) = t.interval();
        if (a - first.0).abs() > INTERVAL_TOLERANCE || (b - first.1).abs() > INTERVAL_TOLERANCE {
            return Err(CurrentError::IntervalMismatch);
        }
    }
    Ok(())
}

/// `J_μ(L; k)`. Linear in every charge.
pub fn current_j(trajectories: &[Trajectory], k: &WaveVector) -> Result<FourVector, CurrentError> {
    common_interval(trajectories)?;
    Ok(current_unchecked(trajectories, k))
}

fn current_unchecked(trajectories: &[Trajectory], k: &WaveVector) -> FourVector {
    trajectories.iter().fold(FourVector::ZERO, |acc, t| {
        acc.add(&t.line_integral(k).scale(Complex64::new(0.0, -t.charge)))
    })
}

/// `k·J`; nonzero for open trajectories, where charge appears and vanishes at
/// the endpoints.
pub fn k_dot_j(k: &WaveVector, j: &FourVector) -> Complex64 {
    let [k0, k1, k2, k3] = [k.k0, k.k[0], k.k[1], k.k[2]];
    let [j0, j1, j2, j3] = j.0;
    // k^μ J_μ
    j0 * k0 + j1 * k1 + j2 * k2 + j3 * k3
}

/// One box-quantized photon mode: a wave vector and one of its two transverse
/// polarizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotonMode {
    pub k: [f64; 3],
    pub polarization: u8,
    pub weight: f64,
}

/// Photon modes aligned one-to-one with a [`ModeBasis`] (label = index,
/// `ω = |k⃗|`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PhotonMode>", into = "Vec<PhotonMode>")]
pub struct PhotonModes {
    modes: Vec<PhotonMode>,
    basis: ModeBasis,
}

impl PhotonModes {
    pub fn new(modes: Vec<PhotonMode>) -> Result<Self, CurrentError> {
        for (index, m) in modes.iter().enumerate() {
            if m.k.iter().any(|x| !x.is_finite()) {
                return Err(CurrentError::NonFinite);
            }
            if norm3(&m.k) == 0.0 {
                return Err(CurrentError::ZeroWaveVector(index));
            }
            if m.polarization > 1 {
                return Err(CurrentError::Polarization {
                    index,
                    polarization: m.polarization,
                });
            }
        }
        let basis = ModeBasis::new(
            modes
                .iter()
                .enumerate()
                .map(|(i, m)| Mode {
                    label: i as i64,
                    omega: norm3(&m.k),
                    weight: m.weight,
                })
                .collect(),
        )?;
        Ok(Self { modes, basis })
    }

    pub fn modes(&self) -> &[PhotonMode] {
        &self.modes
    }

    pub fn basis(&self) -> &ModeBasis {
        &self.basis
    }

    pub fn wave_vector(&self, i: usize) -> WaveVector {
        WaveVector::on_shell(self.modes[i].k)
    }
}

impl TryFrom<Vec<PhotonMode>> for PhotonModes {
    type Error = CurrentError;

    fn try_from(modes: Vec<PhotonMode>) -> Result<Self, Self::Error> {
        Self::new(modes)
    }
}

impl From<PhotonModes> for Vec<PhotonMode> {
    fn from(m: PhotonModes) -> Self {
        m.modes
    }
}

/// Orthonormal transverse pair `(ε₁, ε₂)` for direction `k`, with
/// `ε₁ ∝ ref × k̂` (`ref = ẑ`, or `x̂` when `k̂` is within ~25° of `ẑ`) and
/// `ε₂ = k̂ × ε₁`.
pub fn polarization_vectors(k: &[f64; 3]) -> [[f64; 3]; 2] {
    let n = norm3(k);
    let khat = k.map(|x| x / n);
    let reference = if khat[2].abs() < 0.9 {
        [0.0, 0.0, 1.0]
    } else {
        [1.0, 0.0, 0.0]
    };
    let e1 = cross3(&reference, &khat);
    let e1n = norm3(&e1);
    let e1 = e1.map(|x| x / e1n);
    let e2 = cross3(&khat, &e1);
    [e1, e2]
}

/// `J_μ` for every mode, in mode order.
pub fn mode_currents(
    trajectories: &[Trajectory],
    modes: &PhotonModes,
) -> Result<Vec<FourVector>, CurrentError> {
    common_interval(trajectories)?;
    Ok((0..modes.modes.len())
        .map(|i| current_unchecked(trajectories, &modes.wave_vector(i)))
        .collect())
}

/// `⟨X·Y⟩ = Σ_k w_k X(k)·Y(k)`.
pub fn mass_shell_bracket(
    x: &[FourVector],
    y: &[FourVector],
    basis: &ModeBasis,
) -> Result<Complex64, CurrentError> {
    for len in [x.len(), y.len()] {
        if len != basis.len() {
            return Err(CurrentError::LengthMismatch {
                expected: basis.len(),
                found: len,
            });
        }
    }
    Ok(basis
        .modes()
        .iter()
        .zip(x.iter().zip(y))
        .map(|(m, (a, b))| a.dot(b) * m.weight)
        .sum())
}

/// `⟨J*·J⟩` over the modes; real by construction.
pub fn current_bracket(
    trajectories: &[Trajectory],
    modes: &PhotonModes,
) -> Result<f64, CurrentError> {
    let j = mode_currents(trajectories, modes)?;
    let conj: Vec<FourVector> = j.iter().map(FourVector::conj).collect();
    Ok(mass_shell_bracket(&conj, &j, modes.basis())?.re)
}

/// `exp(−⟨J*·J⟩)`, the probability that the current leaves the vacuum
/// unchanged.
///
/// With the `(+,−,−,−)` contraction the bracket is not sign-definite for
/// non-conserved currents; a negative value is reported as
/// [`CurrentError::IndefiniteBracket`] rather than returning a number above 1.
pub fn vacuum_persistence(
    trajectories: &[Trajectory],
    modes: &PhotonModes,
) -> Result<f64, CurrentError> {
    let bracket = current_bracket(trajectories, modes)?;
    if bracket < 0.0 {
        return Err(CurrentError::IndefiniteBracket(bracket));
    }
    Ok((-bracket).exp())
}

/// Transverse mode amplitude `A = ε_λ · J⃗` (contravariant spatial parts).
pub fn transverse_amplitude(mode: &PhotonMode, j: &FourVector) -> Complex64 {
    let eps = polarization_vectors(&mode.k)[mode.polarization as usize];
    // J^i = −J_i
    -(j.0[1] * eps[0] + j.0[2] * eps[1] + j.0[3] * eps[2])
}

/// Coherent displacement per mode: `q = √2 Re A`, `p = √2 Im A`.
///
/// With this scaling `Σ_k w_k (q_k² + p_k²)/2 = Σ_k w_k |A_k|²`, the transverse
/// photon number, and `|⟨0|q,p⟩|² = exp(−Σ_k w_k |A_k|²)`.
pub fn displacement_from_current(
    trajectories: &[Trajectory],
    modes: &PhotonModes,
) -> Result<CoherentPoint, CurrentError> {
    let j = mode_currents(trajectories, modes)?;
    let amps: Vec<Complex64> = modes
        .modes
        .iter()
        .zip(&j)
        .map(|(m, jk)| transverse_amplitude(m, jk) * std::f64::consts::SQRT_2)
        .collect();
    Ok(CoherentPoint::new(
        amps.iter().map(|a| a.re).collect(),
        amps.iter().map(|a| a.im).collect(),
    )?)
}

#[derive(Debug, Deserialize)]
struct TrajectoryRow {
    particle: String,
    charge: f64,
    t: f64,
    x: f64,
    y: f64,
    z: f64,
}

/// Reads trajectories from CSV with header `particle,charge,t,x,y,z`.
///
/// Rows are grouped by particle id in order of first appearance; within a
/// particle they must be time ordered and carry the same charge.
pub fn read_trajectories_csv<R: Read>(reader: R) -> Result<Vec<Trajectory>, CurrentError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut groups: Vec<(String, f64, Vec<Breakpoint>)> = Vec::new();
    for row in rdr.deserialize::<TrajectoryRow>() {
        let row = row.map_err(|e| CurrentError::Csv(e.to_string()))?;
        let bp = Breakpoint {
            t: row.t,
            x: [row.x, row.y, row.z],
        };
        match groups.iter_mut().find(|g| g.0 == row.particle) {
            Some(g) => {
                if g.1 != row.charge {
                    return Err(CurrentError::InconsistentCharge(row.particle));
                }
                g.2.push(bp);
            }
            None => groups.push((row.particle, row.charge, vec![bp])),
        }
    }
    if groups.is_empty() {
        return Err(CurrentError::NoTrajectories);
    }
    groups
        .into_iter()
        .map(|(_, charge, bps)| Trajectory::new(charge, bps))
        .collect()
}
