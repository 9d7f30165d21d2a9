//! A particle on the unit circle draining through a localized absorber.
//!
//! `i ∂ψ/∂t = −(1/2m) ∂²ψ/∂x² − i W(x) ψ` on `x ∈ [0, 1)` with `ħ = 1`. The
//! norm `N(t) = ∫|ψ|² dx` then obeys `−dN/dt = 2 ∫ W |ψ|² dx`, which for a
//! point absorber `W = b δ(x − x0)` is `2b |ψ(x0)|²`.
//!
//! Time stepping is Strang splitting: half a decay step `exp(−W dt/2)`, an
//! exact spectral kinetic step, and another half decay step. With `W = 0` the
//! step is unitary to roundoff.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::born::shard_rng;

/// Smallest supported grid.
pub const MIN_POINTS: usize = 64;

/// `dt ≤ DT_ACCURACY_FACTOR · m / (π N)²`: the kinetic phase at the Nyquist
/// wavenumber stays below 0.05 rad per step.
pub const DT_ACCURACY_FACTOR: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RingError {
    #[error("grid size must be a power of two >= {MIN_POINTS}, got {0}")]
    GridSize(usize),
    #[error("mass must be positive and finite, got {0}")]
    Mass(f64),
    #[error("time step {dt:e} violates the accuracy bound dt <= {bound:e}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("invalid absorber: {0}")]
    Absorber(&'static str),
    #[error("invalid initial profile: {0}")]
    Profile(&'static str),
    #[error("wavefunction sample count {found} does not match grid {expected}")]
    Length { expected: usize, found: usize },
}

/// Accuracy bound on the time step for an `n`-point grid.
pub fn max_dt(n: usize, mass: f64) -> f64 {
    DT_ACCURACY_FACTOR * mass / (PI * n as f64).powi(2)
}

/// Initial profiles; all are normalized to `N = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RingProfile {
    /// `|ψ|² = 1` everywhere.
    Uniform,
    /// Periodic Gaussian analog `exp(κ (cos 2π(x − c) − 1)/2) · e^{2πi k x}`,
    /// so `|ψ|² ∝ exp(κ cos 2π(x − c))`.
    VonMises {
        center: f64,
        kappa: f64,
        #[serde(default)]
        wavenumber: i64,
    },
    /// `e^{2πi n x}`.
    FourierMode { n: i64 },
}

/// `ψ` sampled at `x_j = j/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RingState {
    psi: Vec<Complex64>,
    mass: f64,
    time: f64,
}

fn check_grid(n: usize) -> Result<(), RingError> {
    if n < MIN_POINTS || !n.is_power_of_two() {
        return Err(RingError::GridSize(n));
    }
    Ok(())
}

impl RingState {
    pub fn new(psi: Vec<Complex64>, mass: f64) -> Result<Self, RingError> {
        check_grid(psi.len())?;
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(RingError::Mass(mass));
        }
        Ok(Self {
            psi,
            mass,
            time: 0.0,
        })
    }

    pub fn from_profile(profile: RingProfile, n: usize, mass: f64) -> Result<Self, RingError> {
        check_grid(n)?;
        let psi: Vec<Complex64> = match profile {
            RingProfile::Uniform => vec![Complex64::new(1.0, 0.0); n],
            RingProfile::VonMises {
                center,
                kappa,
                wavenumber,
            } => {
                if !(kappa >= 0.0) || !kappa.is_finite() || !center.is_finite() {
                    return Err(RingError::Profile(
                        "von Mises needs finite center and kappa >= 0",
                    ));
                }
                (0..n)
                    .map(|j| {
                        let x = j as f64 / n as f64;
                        let amp = (kappa * ((TAU * (x - center)).cos() - 1.0) / 2.0).exp();
                        Complex64::from_polar(amp, TAU * wavenumber as f64 * x)
                    })
                    .collect()
            }
            RingProfile::FourierMode { n: mode } => (0..n)
                .map(|j| Complex64::from_polar(1.0, TAU * mode as f64 * j as f64 / n as f64))
                .collect(),
        };
        let mut state = Self::new(psi, mass)?;
        let norm = state.norm();
        if !(norm > 0.0) {
            return Err(RingError::Profile("profile has zero norm"));
        }
        let scale = norm.sqrt().recip();
        state.psi.iter_mut().for_each(|z| *z *= scale);
        Ok(state)
    }

    pub fn psi(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `N = (1/N_grid) Σ |ψ_j|²`.
    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.psi.len() as f64
    }
}

/// Absorbing term `−i W(x)` of the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Absorber {
    /// `b δ(x − x0)`, realized as the single grid cell nearest `x0` with
    /// depth `b N` (integrated strength `b`).
    Delta { x0: f64, b: f64 },
    /// `b f(x)`: `f = 1` within circular distance `width/2` of `x0`, Gaussian
    /// walls `exp(−(d − width/2)² / 2σ²)` outside.
    Plateau {
        x0: f64,
        b: f64,
        width: f64,
        sigma: f64,
    },
}

impl Absorber {
    pub fn none() -> Self {
        Self::Delta { x0: 0.0, b: 0.0 }
    }

    pub fn strength(&self) -> f64 {
        match *self {
            Self::Delta { b, .. } | Self::Plateau { b, .. } => b,
        }
    }

    pub fn center(&self) -> f64 {
        match *self {
            Self::Delta { x0, .. } | Self::Plateau { x0, .. } => x0,
        }
    }

    fn validate(&self) -> Result<(), RingError> {
        let (x0, b) = (self.center(), self.strength());
        if !(0.0..1.0).contains(&x0) {
            return Err(RingError::Absorber("x0 must lie in [0, 1)"));
        }
        if !(b >= 0.0) || !b.is_finite() {
            return Err(RingError::Absorber("strength b must be finite and >= 0"));
        }
        if let Self::Plateau { width, sigma, .. } = *self {
            if !(width > 0.0 && width <= 1.0) {
                return Err(RingError::Absorber("plateau width must be in (0, 1]"));
            }
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(RingError::Absorber("wall sharpness sigma must be positive"));
            }
        }
        Ok(())
    }

    /// Shape `f(x)` of a plateau absorber, in `[0, 1]`.
    pub fn plateau_shape(x: f64, x0: f64, width: f64, sigma: f64) -> f64 {
        let d = circular_distance(x, x0);
        let edge = width / 2.0;
        if d < edge {
            1.0
        } else {
            (-(d - edge).powi(2) / (2.0 * sigma * sigma)).exp()
        }
    }

    /// `W_j` on an `n`-point grid.
    pub fn rates(&self, n: usize) -> Vec<f64> {
        match *self {
            Self::Delta { x0, b } => {
                let mut w = vec![0.0; n];
                w[(x0 * n as f64).round() as usize % n] = b * n as f64;
                w
            }
            Self::Plateau {
                x0,
                b,
                width,
                sigma,
            } => (0..n)
                .map(|j| b * Self::plateau_shape(j as f64 / n as f64, x0, width, sigma))
                .collect(),
        }
    }
}

/// Distance on the unit circle, in `[0, 1/2]`.
pub fn circular_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Instantaneous `−dN/dt = 2 ∫ W |ψ|² dx` on the grid.
pub fn loss_rate(state: &RingState, absorber: &Absorber) -> f64 {
    let n = state.len();
    2.0 * absorber
        .rates(n)
        .iter()
        .zip(&state.psi)
        .map(|(w, z)| w * z.norm_sqr())
        .sum::<f64>()
        / n as f64
}

/// Split-step propagator with precomputed factors for a fixed grid, absorber
/// and time step.
pub struct RingPropagator {
    dt: f64,
    half_decay: Vec<f64>,
    kinetic: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl RingPropagator {
    pub fn new(n: usize, mass: f64, absorber: &Absorber, dt: f64) -> Result<Self, RingError> {
        check_grid(n)?;
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(RingError::Mass(mass));
        }
        absorber.validate()?;
        let bound = max_dt(n, mass);
        if !(dt > 0.0) || dt > bound {
            return Err(RingError::StepTooLarge { dt, bound });
        }
        let half_decay = absorber
            .rates(n)
            .iter()
            .map(|w| (-w * dt / 2.0).exp())
            .collect();
        let inv_n = 1.0 / n as f64;
        let kinetic = (0..n)
            .map(|j| {
                let freq = if j < n / 2 {
                    j as f64
                } else {
                    j as f64 - n as f64
                };
                let k = TAU * freq;
                Complex64::from_polar(inv_n, -k * k * dt / (2.0 * mass))
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            dt,
            half_decay,
            kinetic,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&mut self, state: &mut RingState) -> Result<(), RingError> {
        if state.len() != self.kinetic.len() {
            return Err(RingError::Length {
                expected: self.kinetic.len(),
                found: state.len(),
            });
        }
        let psi = &mut state.psi;
        psi.iter_mut()
            .zip(&self.half_decay)
            .for_each(|(z, d)| *z *= d);
        self.forward.process_with_scratch(psi, &mut self.scratch);
        psi.iter_mut().zip(&self.kinetic).for_each(|(z, k)| *z *= k);
        self.inverse.process_with_scratch(psi, &mut self.scratch);
        psi.iter_mut()
            .zip(&self.half_decay)
            .for_each(|(z, d)| *z *= d);
        state.time += self.dt;
        Ok(())
    }
}

/// Advances `state` by one step of size `dt`.
pub fn step(state: &RingState, absorber: &Absorber, dt: f64) -> Result<RingState, RingError> {
    let mut prop = RingPropagator::new(state.len(), state.mass, absorber, dt)?;
    let mut next = state.clone();
    prop.step(&mut next)?;
    Ok(next)
}

/// One sample `(t, N(t))` of a survival curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSample {
    pub t: f64,
    pub norm: f64,
}

/// `N(t)` from `t = 0` over `steps` steps, recorded every `sample_every` steps
/// and at the final step.
pub fn survival_curve(
    initial: &RingState,
    absorber: &Absorber,
    dt: f64,
    steps: usize,
    sample_every: usize,
) -> Result<Vec<SurvivalSample>, RingError> {
    let mut prop = RingPropagator::new(initial.len(), initial.mass, absorber, dt)?;
    let every = sample_every.max(1);
    let mut state = initial.clone();
    let mut curve = vec![SurvivalSample {
        t: state.time,
        norm: state.norm(),
    }];
    for i in 1..=steps {
        prop.step(&mut state)?;
        if i % every == 0 || i == steps {
            curve.push(SurvivalSample {
                t: state.time,
                norm: state.norm(),
            });
        }
    }
    Ok(curve)
}

/// First sampled time at which `N(t) < level`.
pub fn crossing_time(curve: &[SurvivalSample], level: f64) -> Option<f64> {
    curve.iter().find(|s| s.norm < level).map(|s| s.t)
}

/// Arc `[start, start + length)` of the circle, wrapping through 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcRegion {
    pub start: f64,
    pub length: f64,
}

impl ArcRegion {
    /// Arc of the given measure centered on `center`.
    pub fn centered(center: f64, length: f64) -> Self {
        Self {
            start: (center - length / 2.0).rem_euclid(1.0),
            length,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.start).rem_euclid(1.0) < self.length
    }
}

/// Stationary members of the classical trough ensemble. Angles never change;
/// members only die.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalEnsemble {
    angles: Vec<f64>,
    alive: Vec<bool>,
}

impl ClassicalEnsemble {
    pub fn new(angles: Vec<f64>) -> Self {
        let alive = vec![true; angles.len()];
        Self { angles, alive }
    }

    /// `members` angles drawn uniformly on `[0, 1)`.
    pub fn uniform(members: usize, seed: u64) -> Self {
        let mut rng = shard_rng(seed, 0, 0);
        Self::new((0..members).map(|_| rng.random::<f64>()).collect())
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn alive_fraction(&self) -> f64 {
        if self.angles.is_empty() {
            return 0.0;
        }
        self.alive.iter().filter(|a| **a).count() as f64 / self.angles.len() as f64
    }

    /// Opens `region`: every member inside it leaves.
    pub fn open(&mut self, region: &ArcRegion) {
        for (a, alive) in self.angles.iter().zip(self.alive.iter_mut()) {
            if region.contains(*a) {
                *alive = false;
            }
        }
    }
}

/// One sample `(t, fraction alive)` of the classical comparator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSample {
    pub t: f64,
    pub fraction_alive: f64,
}

/// Survival of the classical ensemble after `region` opens at `t = 0`.
/// Members do not move, so the fraction is the same at every time.
pub fn classical_survival(
    ensemble: &ClassicalEnsemble,
    region: &ArcRegion,
    times: &[f64],
) -> Vec<ClassicalSample> {
    let mut opened = ensemble.clone();
    opened.open(region);
    let fraction_alive = opened.alive_fraction();
    times
        .iter()
        .map(|&t| ClassicalSample { t, fraction_alive })
        .collect()
}
