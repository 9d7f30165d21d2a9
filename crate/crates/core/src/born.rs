//! Blocking geometry on the sphere `S_{1/2}` and the acceptance statistics it
//! induces.
//!
//! The transition `Ψ → PΨ` lives in the complex plane spanned by the two
//! states. Its real image is parametrized by `(θ', χ)`, where the surface
//! point with parameter `θ'` sits at polar angle `2θ'` from the `Ψ` pole of
//! `S_{1/2}`. A blocking vector `Φ` is a point on that sphere; it blocks the
//! transition iff its own parameter `θ' = α/2` lies on the direct path
//! `[0, θ]`.
//!
//! Under the rotation-invariant measure, `cos α` is uniform on `[−1, 1]`, so
//!
//! ```text
//! P(blocked) = P(α ≤ 2θ) = (1 − cos 2θ) / 2 = sin²θ,
//! ```
//!
//! and the transition proceeds with probability `cos²θ = ‖PΨ‖² / ‖Ψ‖²`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Samples per Monte Carlo shard. Fixed so that results do not depend on the
/// number of worker threads.
pub const SHARD_SIZE: u64 = 1 << 16;

/// Relative slack allowed for `‖PΨ‖² > ‖Ψ‖²` from roundoff.
const RATIO_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BornError {
    #[error("‖Ψ‖² must be positive and finite, got {0}")]
    NonPositiveNorm(f64),
    #[error("‖PΨ‖²/‖Ψ‖² = {0} is outside [0, 1]")]
    RatioOutOfRange(f64),
    #[error("blocking vector angles out of range: alpha = {alpha}, chi = {chi}")]
    InvalidBlockingVector { alpha: f64, chi: f64 },
    #[error("sample count must be at least 1")]
    NoSamples,
}

/// Angle `θ ∈ [0, π/2]` of a candidate transition, `cos²θ = ‖PΨ‖²/‖Ψ‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionGeometry {
    theta: f64,
}

impl TransitionGeometry {
    pub fn from_theta(theta: f64) -> Result<Self, BornError> {
        if !(0.0..=FRAC_PI_2).contains(&theta) {
            return Err(BornError::RatioOutOfRange(theta.cos().powi(2)));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Acceptance probability under the uniform measure.
    pub fn cos2_theta(&self) -> f64 {
        self.theta.cos().powi(2)
    }
}

/// `θ = arccos √(‖PΨ‖²/‖Ψ‖²)`. Only the ratio matters, so any common scaling
/// of the two norms (and any overall phase of the states) is invisible.
pub fn theta_from_norms(
    norm_sq_psi: f64,
    norm_sq_p_psi: f64,
) -> Result<TransitionGeometry, BornError> {
    if !(norm_sq_psi > 0.0) || !norm_sq_psi.is_finite() {
        return Err(BornError::NonPositiveNorm(norm_sq_psi));
    }
    let ratio = norm_sq_p_psi / norm_sq_psi;
    if !(ratio >= 0.0) || ratio > 1.0 + RATIO_SLACK {
        return Err(BornError::RatioOutOfRange(ratio));
    }
    Ok(TransitionGeometry {
        theta: ratio.clamp(0.0, 1.0).sqrt().acos(),
    })
}

/// A point `Φ` on `S_{1/2}`: polar angle `alpha` from the `Ψ` pole, azimuth
/// `chi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockingVector {
    alpha: f64,
    chi: f64,
}

impl BlockingVector {
    pub fn new(alpha: f64, chi: f64) -> Result<Self, BornError> {
        if !(0.0..=PI).contains(&alpha) || !(0.0..TAU).contains(&chi) {
            return Err(BornError::InvalidBlockingVector { alpha, chi });
        }
        Ok(Self { alpha, chi })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// The path parameter `θ' = α/2` of this point.
    pub fn path_parameter(&self) -> f64 {
        self.alpha / 2.0
    }
}

/// Draws `Φ` uniformly on the sphere by inverting the CDF: `cos α` uniform on
/// `[−1, 1)`, `χ` uniform on `[0, 2π)`. Exactly two uniforms per sample.
///
/// `α = 0` is never produced, so a transition with `θ = 0` is never blocked.
pub fn sample_phi<R: Rng + ?Sized>(rng: &mut R) -> BlockingVector {
    // 1 − U with U ∈ [0, 1) lies in (0, 1]
    let u: f64 = 1.0 - rng.random::<f64>();
    let cos_alpha = 1.0 - 2.0 * u;
    let chi = TAU * rng.random::<f64>();
    BlockingVector {
        alpha: cos_alpha.acos(),
        chi,
    }
}

/// True iff `Φ` lies on the direct path from `Ψ` to `PΨ`, i.e.
/// `0 ≤ α/2 ≤ θ`. The degenerate path of `θ = 0` (`P = I`) blocks nothing.
pub fn is_blocked(geom: &TransitionGeometry, phi: &BlockingVector) -> bool {
    geom.theta > 0.0 && phi.path_parameter() <= geom.theta
}

/// Monte Carlo estimate of the acceptance probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceEstimate {
    pub n: u64,
    pub accepted: u64,
    pub p_hat: f64,
    pub stderr: f64,
}

impl AcceptanceEstimate {
    pub fn from_counts(n: u64, accepted: u64) -> Self {
        let p_hat = accepted as f64 / n as f64;
        Self {
            n,
            accepted,
            p_hat,
            stderr: (p_hat * (1.0 - p_hat) / n as f64).sqrt(),
        }
    }
}

/// Seeds the substream for Monte Carlo shard `shard` of stream `stream`.
///
/// The key is `(seed, stream, shard)`; sweeps use one stream per cell.
pub fn shard_rng(seed: u64, stream: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream)));
    rng.set_stream(shard);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counts how many of `n` sampled blocking vectors let the transition pass.
///
/// Shards of [`SHARD_SIZE`] run in parallel on the current rayon pool; the
/// integer counts make the result identical for any thread count.
pub fn transition_prob_mc(
    geom: &TransitionGeometry,
    n: u64,
    seed: u64,
) -> Result<AcceptanceEstimate, BornError> {
    transition_prob_mc_stream(geom, n, seed, 0)
}

/// [`transition_prob_mc`] on an explicit substream, for sweeps.
pub fn transition_prob_mc_stream(
    geom: &TransitionGeometry,
    n: u64,
    seed: u64,
    stream: u64,
) -> Result<AcceptanceEstimate, BornError> {
    if n == 0 {
        return Err(BornError::NoSamples);
    }
    let shards = n.div_ceil(SHARD_SIZE);
    let accepted: u64 = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = shard_rng(seed, stream, shard);
            let len = SHARD_SIZE.min(n - shard * SHARD_SIZE);
            (0..len)
                .filter(|_| !is_blocked(geom, &sample_phi(&mut rng)))
                .count() as u64
        })
        .sum();
    Ok(AcceptanceEstimate::from_counts(n, accepted))
}

/// One row of a θ sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub theta: f64,
    pub n: u64,
    pub p_hat: f64,
    pub stderr: f64,
    pub cos2theta: f64,
    /// `(p̂ − cos²θ) / stderr`; zero when the standard error vanishes and the
    /// estimate is exact.
    pub z_score: f64,
}

/// Runs [`transition_prob_mc`] for each angle, cell `i` on substream `i`.
pub fn sweep(thetas: &[f64], n: u64, seed: u64) -> Result<Vec<SweepCell>, BornError> {
    thetas
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let geom = TransitionGeometry::from_theta(theta)?;
            let est = transition_prob_mc_stream(&geom, n, seed, i as u64)?;
            let cos2theta = geom.cos2_theta();
            let diff = est.p_hat - cos2theta;
            let z_score = if est.stderr > 0.0 {
                diff / est.stderr
            } else if diff == 0.0 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            };
            Ok(SweepCell {
                theta,
                n,
                p_hat: est.p_hat,
                stderr: est.stderr,
                cos2theta,
                z_score,
            })
        })
        .collect()
}
