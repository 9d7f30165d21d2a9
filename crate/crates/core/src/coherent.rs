//! Coherent-state algebra over a finite set of discretized field modes.
//!
//! A state is always a finite superposition `Σ c_j |q_j, p_j⟩` of coherent
//! states. Every quantity used downstream (overlaps, the landscape `V`, free
//! rotation, the resolution of identity) is closed-form on that class.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * The mode bracket is `⟨x·y⟩ = Σ_k w_k x_k y_k` with the quadrature weights
//!   of the [`ModeBasis`].
//! * `⟨q,p|q',p'⟩ = exp −(⟨Δq·Δq⟩ + ⟨Δp·Δp⟩ + 2i⟨Δp·(q+q')⟩)/4` with
//!   `Δ = (q,p) − (q',p')`.
//! * The phase-space measure is `dμ = Π_k w_k dq_k dp_k / (2π)`; with it
//!   `∫ dμ |q,p⟩⟨q,p| = I` holds exactly.
//! * Free evolution turns each mode clockwise in its `(q, p)` plane:
//!   `q ← q cos ωt + p sin ωt`, `p ← p cos ωt − q sin ωt`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported mode count. Landscape searches scale as `grid^(2n)`.
pub const MAX_MODES: usize = 8;

/// Overlaps whose magnitude would fall below `1e-300` are flushed to zero.
const LN_OVERLAP_CUTOFF: f64 = -690.775_527_898_213_7; // ln(1e-300)

/// `V` values on the boundary of an identity-check grid must stay below this.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoherentError {
    #[error("dimension mismatch: expected {expected} modes, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite coordinate or coefficient")]
    NonFinite,
    #[error("invalid mode {label}: {reason}")]
    InvalidMode { label: i64, reason: &'static str },
    #[error("mode basis must hold between 1 and {MAX_MODES} modes, got {0}")]
    ModeCount(usize),
    #[error("a superposition needs at least one component")]
    EmptyState,
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("point or state defined over a different mode basis")]
    BasisMismatch,
    #[error("identity check supports 1 or 2 modes, got {0}")]
    UnsupportedModeCount(usize),
    #[error("quadrature grid truncates the support: V = {boundary_value:e} on the boundary")]
    TruncatedSupport { boundary_value: f64 },
    #[error("invalid quadrature grid: {0}")]
    InvalidGrid(&'static str),
}

/// One discretized field mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub label: i64,
    /// Angular frequency, `ħ = 1`.
    pub omega: f64,
    /// Quadrature weight of the mass-shell bracket.
    pub weight: f64,
}

/// Ordered set of modes carrying the `⟨X·Y⟩` bracket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Mode>", into = "Vec<Mode>")]
pub struct ModeBasis {
    modes: Vec<Mode>,
}

impl ModeBasis {
    /// Labels must be strictly increasing, frequencies finite and
    /// non-negative, weights strictly positive.
    pub fn new(modes: Vec<Mode>) -> Result<Self, CoherentError> {
        if modes.is_empty() || modes.len() > MAX_MODES {
            return Err(CoherentError::ModeCount(modes.len()));
        }
        for (i, m) in modes.iter().enumerate() {
            if !m.omega.is_finite() || m.omega < 0.0 {
                return Err(CoherentError::InvalidMode {
                    label: m.label,
                    reason: "omega must be finite and non-negative",
                });
            }
            if !m.weight.is_finite() || m.weight <= 0.0 {
                return Err(CoherentError::InvalidMode {
                    label: m.label,
                    reason: "weight must be finite and positive",
                });
            }
            if i > 0 && modes[i - 1].label >= m.label {
                return Err(CoherentError::InvalidMode {
                    label: m.label,
                    reason: "labels must be unique and increasing",
                });
            }
        }
        Ok(Self { modes })
    }

    /// `n` modes labelled `0..n`, all with the same frequency and weight.
    pub fn uniform(n: usize, omega: f64, weight: f64) -> Result<Self, CoherentError> {
        Self::new(
            (0..n)
                .map(|k| Mode {
                    label: k as i64,
                    omega,
                    weight,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.modes[k].weight
    }

    /// `⟨x·y⟩ = Σ_k w_k x_k y_k`.
    pub fn bracket(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.len());
        debug_assert_eq!(y.len(), self.len());
        self.modes
            .iter()
            .zip(x.iter().zip(y))
            .map(|(m, (a, b))| m.weight * a * b)
            .sum()
    }

    fn check_point(&self, point: &CoherentPoint) -> Result<(), CoherentError> {
        if point.dim() != self.len() {
            return Err(CoherentError::DimensionMismatch {
                expected: self.len(),
                found: point.dim(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<Mode>> for ModeBasis {
    type Error = CoherentError;

    fn try_from(modes: Vec<Mode>) -> Result<Self, Self::Error> {
        Self::new(modes)
    }
}

impl From<ModeBasis> for Vec<Mode> {
    fn from(basis: ModeBasis) -> Self {
        basis.modes
    }
}

/// A point `(q_1, p_1, …, q_n, p_n)` of phase space, labelling `|q,p⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherentPoint {
    q: Vec<f64>,
    p: Vec<f64>,
}

impl CoherentPoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self, CoherentError> {
        if q.len() != p.len() {
            return Err(CoherentError::DimensionMismatch {
                expected: q.len(),
                found: p.len(),
            });
        }
        if q.iter().chain(&p).any(|x| !x.is_finite()) {
            return Err(CoherentError::NonFinite);
        }
        Ok(Self { q, p })
    }

    pub fn origin(n: usize) -> Self {
        Self {
            q: vec![0.0; n],
            p: vec![0.0; n],
        }
    }

    /// Builds a point from the flat layout `[q_0..q_{n-1}, p_0..p_{n-1}]`.
    pub fn from_flat(flat: &[f64]) -> Result<Self, CoherentError> {
        if !flat.len().is_multiple_of(2) {
            return Err(CoherentError::DimensionMismatch {
                expected: flat.len() + 1,
                found: flat.len(),
            });
        }
        let n = flat.len() / 2;
        Self::new(flat[..n].to_vec(), flat[n..].to_vec())
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// `[q_0..q_{n-1}, p_0..p_{n-1}]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.q.iter().chain(&self.p).copied().collect()
    }

    /// Interleaved `(q_0, p_0, q_1, p_1, …)`, the order used for tie-breaking
    /// and in serialized event logs.
    pub fn interleaved(&self) -> Vec<f64> {
        self.q
            .iter()
            .zip(&self.p)
            .flat_map(|(q, p)| [*q, *p])
            .collect()
    }

    /// Euclidean distance in raw coordinates.
    pub fn distance(&self, other: &Self) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .chain(self.p.iter().zip(&other.p))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            q: self.q.iter().map(|x| x * factor).collect(),
            p: self.p.iter().map(|x| x * factor).collect(),
        }
    }
}

/// `⟨a|b⟩` for two points over `basis`.
pub fn overlap(
    a: &CoherentPoint,
    b: &CoherentPoint,
    basis: &ModeBasis,
) -> Result<Complex64, CoherentError> {
    basis.check_point(a)?;
    basis.check_point(b)?;
    Ok(overlap_unchecked(a, b, basis))
}

pub(crate) fn overlap_unchecked(
    a: &CoherentPoint,
    b: &CoherentPoint,
    basis: &ModeBasis,
) -> Complex64 {
    let mut dq2 = 0.0;
    let mut dp2 = 0.0;
    let mut cross = 0.0;
    for (k, m) in basis.modes.iter().enumerate() {
        let dq = a.q[k] - b.q[k];
        let dp = a.p[k] - b.p[k];
        dq2 += m.weight * dq * dq;
        dp2 += m.weight * dp * dp;
        cross += m.weight * dp * (a.q[k] + b.q[k]);
    }
    let re = -(dq2 + dp2) / 4.0;
    if re < LN_OVERLAP_CUTOFF {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::from_polar(re.exp(), -cross / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub coeff: Complex64,
    pub point: CoherentPoint,
}

impl Component {
    pub fn new(coeff: Complex64, point: CoherentPoint) -> Self {
        Self { coeff, point }
    }

    pub fn real(coeff: f64, point: CoherentPoint) -> Self {
        Self::new(Complex64::new(coeff, 0.0), point)
    }
}

/// `Ψ = Σ_j c_j |q_j, p_j⟩`, never empty and never of zero norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperposedState {
    basis: ModeBasis,
    components: Vec<Component>,
    norm_sq: f64,
}

impl SuperposedState {
    pub fn new(basis: ModeBasis, components: Vec<Component>) -> Result<Self, CoherentError> {
        if components.is_empty() {
            return Err(CoherentError::EmptyState);
        }
        for c in &components {
            basis.check_point(&c.point)?;
            if !c.coeff.re.is_finite() || !c.coeff.im.is_finite() {
                return Err(CoherentError::NonFinite);
            }
        }
        let norm_sq = gram_quadratic_form(&basis, &components);
        if !(norm_sq > 0.0) || !norm_sq.is_finite() {
            return Err(CoherentError::ZeroNorm);
        }
        Ok(Self {
            basis,
            components,
            norm_sq,
        })
    }

    /// `1·|point⟩`.
    pub fn single(basis: ModeBasis, point: CoherentPoint) -> Result<Self, CoherentError> {
        Self::new(basis, vec![Component::real(1.0, point)])
    }

    pub fn basis(&self) -> &ModeBasis {
        &self.basis
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// `⟨Ψ|Ψ⟩`, cached at construction.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// `⟨point|Ψ⟩ = Σ_j c_j ⟨point|pt_j⟩`.
    pub fn amplitude(&self, point: &CoherentPoint) -> Result<Complex64, CoherentError> {
        self.basis.check_point(point)?;
        Ok(self.amplitude_unchecked(point))
    }

    pub(crate) fn amplitude_unchecked(&self, point: &CoherentPoint) -> Complex64 {
        self.components
            .iter()
            .map(|c| c.coeff * overlap_unchecked(point, &c.point, &self.basis))
            .sum()
    }

    /// `V(q,p) = |⟨q,p|Ψ⟩|² / ⟨Ψ|Ψ⟩`, in `[0, 1]`.
    pub fn v_value(&self, point: &CoherentPoint) -> Result<f64, CoherentError> {
        self.basis.check_point(point)?;
        Ok(self.v_unchecked(point))
    }

    pub(crate) fn v_unchecked(&self, point: &CoherentPoint) -> f64 {
        (self.amplitude_unchecked(point).norm_sqr() / self.norm_sq).min(1.0)
    }

    /// `V` and its gradient in the flat `[∂q_0.., ∂p_0..]` layout.
    pub fn v_and_gradient(&self, point: &CoherentPoint) -> Result<(f64, Vec<f64>), CoherentError> {
        self.basis.check_point(point)?;
        Ok(self.v_and_gradient_unchecked(point))
    }

    pub(crate) fn v_and_gradient_unchecked(&self, point: &CoherentPoint) -> (f64, Vec<f64>) {
        let n = self.basis.len();
        let mut amp = Complex64::new(0.0, 0.0);
        let mut damp = vec![Complex64::new(0.0, 0.0); 2 * n];
        for c in &self.components {
            let term = c.coeff * overlap_unchecked(point, &c.point, &self.basis);
            if term == Complex64::new(0.0, 0.0) {
                continue;
            }
            amp += term;
            for (k, m) in self.basis.modes.iter().enumerate() {
                let dq = point.q[k] - c.point.q[k];
                let dp = point.p[k] - c.point.p[k];
                let sq = point.q[k] + c.point.q[k];
                // derivatives of the overlap exponent w.r.t. the bra point
                let de_dq = Complex64::new(-dq, -dp) * (m.weight / 2.0);
                let de_dp = Complex64::new(-dp, -sq) * (m.weight / 2.0);
                damp[k] += term * de_dq;
                damp[n + k] += term * de_dp;
            }
        }
        let scale = 2.0 / self.norm_sq;
        let grad = damp.iter().map(|d| scale * (amp.conj() * d).re).collect();
        ((amp.norm_sqr() / self.norm_sq).min(1.0), grad)
    }

    /// Multiplies every coefficient by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Result<Self, CoherentError> {
        Self::new(
            self.basis.clone(),
            self.components
                .iter()
                .map(|c| Component::new(c.coeff * factor, c.point.clone()))
                .collect(),
        )
    }

    /// Free rotation over `dt`.
    ///
    /// Each point turns clockwise by `ω_k dt` in every `(q_k, p_k)` plane and
    /// its coefficient picks up `exp(i(⟨p·q⟩ − ⟨p'·q'⟩)/2)`, which is exactly
    /// the phase the coherent-state convention above requires for the map to
    /// be unitary.
    pub fn evolve_free(&self, dt: f64) -> Self {
        if dt == 0.0 {
            return self.clone();
        }
        let rotations: Vec<(f64, f64)> = self
            .basis
            .modes
            .iter()
            .map(|m| (m.omega * dt).sin_cos())
            .collect();
        let components = self
            .components
            .iter()
            .map(|c| {
                let (q, p): (Vec<f64>, Vec<f64>) = c
                    .point
                    .q
                    .iter()
                    .zip(&c.point.p)
                    .zip(&rotations)
                    .map(|((q, p), (s, co))| (q * co + p * s, p * co - q * s))
                    .unzip();
                let before = self.basis.bracket(&c.point.p, &c.point.q);
                let after = self.basis.bracket(&p, &q);
                let phase = Complex64::from_polar(1.0, (before - after) / 2.0);
                Component::new(c.coeff * phase, CoherentPoint { q, p })
            })
            .collect();
        let mut out = Self {
            basis: self.basis.clone(),
            components,
            norm_sq: self.norm_sq,
        };
        out.norm_sq = gram_quadratic_form(&out.basis, &out.components);
        out
    }

    /// Gram matrix `G_{jl} = ⟨pt_j|pt_l⟩`.
    pub fn gram(&self) -> DMatrix<Complex64> {
        gram_matrix(&self.basis, self.components.iter().map(|c| &c.point))
    }
}

fn gram_quadratic_form(basis: &ModeBasis, components: &[Component]) -> f64 {
    let mut total = 0.0;
    for (j, a) in components.iter().enumerate() {
        total += a.coeff.norm_sqr();
        for b in &components[j + 1..] {
            let term = a.coeff.conj() * b.coeff * overlap_unchecked(&a.point, &b.point, basis);
            total += 2.0 * term.re;
        }
    }
    total
}

/// Gram matrix of arbitrary points over `basis`.
pub fn gram_matrix<'a>(
    basis: &ModeBasis,
    points: impl IntoIterator<Item = &'a CoherentPoint>,
) -> DMatrix<Complex64> {
    let points: Vec<&CoherentPoint> = points.into_iter().collect();
    let m = points.len();
    DMatrix::from_fn(m, m, |j, l| overlap_unchecked(points[j], points[l], basis))
}

/// Smallest eigenvalue of a Hermitian matrix, via its real symmetric embedding
/// `[[Re, −Im], [Im, Re]]` (same spectrum, each eigenvalue doubled).
pub fn min_hermitian_eigenvalue(h: &DMatrix<Complex64>) -> f64 {
    let m = h.nrows();
    let real = DMatrix::from_fn(2 * m, 2 * m, |r, c| {
        let (rb, cb) = (r / m, c / m);
        let z = h[(r % m, c % m)];
        match (rb, cb) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    });
    SymmetricEigen::new(real)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Uniform tensor-product grid for [`identity_check`].
///
/// Each mode axis spans the component centers' range padded by `half_width`
/// on both sides, sampled every `spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub spacing: f64,
    pub half_width: f64,
}

/// Trapezoid estimate of `∫ dμ V(q,p)`, which converges to 1.
///
/// Fails with [`CoherentError::TruncatedSupport`] when `V` on the grid
/// boundary exceeds [`SUPPORT_THRESHOLD`].
pub fn identity_check(state: &SuperposedState, grid: QuadratureGrid) -> Result<f64, CoherentError> {
    let n = state.basis.len();
    if n > 2 {
        return Err(CoherentError::UnsupportedModeCount(n));
    }
    if !(grid.spacing > 0.0) || !(grid.half_width > 0.0) || !grid.spacing.is_finite() {
        return Err(CoherentError::InvalidGrid(
            "spacing and half_width must be positive",
        ));
    }

    // axes in the order q_0, p_0, q_1, p_1
    let axes: Vec<Vec<f64>> = (0..2 * n)
        .map(|axis| {
            let (k, is_p) = (axis / 2, axis % 2 == 1);
            let coords =
                state
                    .components
                    .iter()
                    .map(|c| if is_p { c.point.p[k] } else { c.point.q[k] });
            let lo = coords.clone().fold(f64::INFINITY, f64::min) - grid.half_width;
            let hi = coords.fold(f64::NEG_INFINITY, f64::max) + grid.half_width;
            let count = ((hi - lo) / grid.spacing).ceil() as usize + 1;
            (0..count).map(|i| lo + i as f64 * grid.spacing).collect()
        })
        .collect();
    if axes.iter().map(Vec::len).product::<usize>() > 50_000_000 {
        return Err(CoherentError::InvalidGrid("grid exceeds 5e7 points"));
    }

    let cell: f64 = state
        .basis
        .modes
        .iter()
        .map(|m| m.weight * grid.spacing * grid.spacing / (2.0 * PI))
        .product();

    // Parallel over the first axis; partial sums are combined in index order.
    let first = &axes[0];
    let partials: Vec<(f64, f64)> = (0..first.len())
        .into_par_iter()
        .map(|i0| {
            let mut sum = 0.0;
            let mut boundary = 0.0_f64;
            let mut idx = vec![0usize; 2 * n];
            idx[0] = i0;
            let inner: usize = axes[1..].iter().map(Vec::len).product();
            let mut q = vec![0.0; n];
            let mut p = vec![0.0; n];
            for flat in 0..inner {
                let mut rem = flat;
                for a in (1..2 * n).rev() {
                    idx[a] = rem % axes[a].len();
                    rem /= axes[a].len();
                }
                let mut weight = 1.0;
                let mut on_edge = false;
                for a in 0..2 * n {
                    let x = axes[a][idx[a]];
                    if a % 2 == 0 {
                        q[a / 2] = x;
                    } else {
                        p[a / 2] = x;
                    }
                    if idx[a] == 0 || idx[a] + 1 == axes[a].len() {
                        weight *= 0.5;
                        on_edge = true;
                    }
                }
                let point = CoherentPoint {
                    q: q.clone(),
                    p: p.clone(),
                };
                let v = state.v_unchecked(&point);
                sum += weight * v;
                if on_edge {
                    boundary = boundary.max(v);
                }
            }
            (sum, boundary)
        })
        .collect();

    let boundary_value = partials.iter().map(|p| p.1).fold(0.0, f64::max);
    if boundary_value > SUPPORT_THRESHOLD {
        return Err(CoherentError::TruncatedSupport { boundary_value });
    }
    Ok(partials.iter().map(|p| p.0).sum::<f64>() * cell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn pt(q: &[f64], p: &[f64]) -> CoherentPoint {
        CoherentPoint::new(q.to_vec(), p.to_vec()).unwrap()
    }

    fn basis1() -> ModeBasis {
        ModeBasis::uniform(1, 1.0, 1.0).unwrap()
    }

    #[test]
    fn overlap_of_point_with_itself_is_one() {
        let b = ModeBasis::uniform(3, 1.0, 0.7).unwrap();
        let a = pt(&[0.3, -1.2, 4.0], &[2.0, 0.1, -0.5]);
        assert_eq!(overlap(&a, &a, &b).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn overlap_examples() {
        // exponent −(4 + 0 + 0)/4
        let e_minus_1 = 0.367_879_441_171_442_33;
        let o = overlap(&pt(&[0.0], &[0.0]), &pt(&[2.0], &[0.0]), &basis1()).unwrap();
        assert!((o.norm() - e_minus_1).abs() < 1e-15);
        assert!(o.arg().abs() < 1e-15);

        let o = overlap(&pt(&[0.0], &[0.0]), &pt(&[0.0], &[2.0]), &basis1()).unwrap();
        assert!((o.norm() - e_minus_1).abs() < 1e-15);
        assert!(o.arg().abs() < 1e-15);
    }

    #[test]
    fn overlap_rejects_dimension_mismatch() {
        let err = overlap(
            &pt(&[0.0, 1.0], &[0.0, 0.0]),
            &pt(&[0.0], &[0.0]),
            &basis1(),
        );
        assert!(matches!(err, Err(CoherentError::DimensionMismatch { .. })));
    }

    #[test]
    fn far_overlaps_flush_to_zero() {
        let o = overlap(&pt(&[0.0], &[0.0]), &pt(&[60.0], &[0.0]), &basis1()).unwrap();
        assert_eq!(o, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn basis_validation() {
        assert!(ModeBasis::uniform(0, 1.0, 1.0).is_err());
        assert!(ModeBasis::uniform(9, 1.0, 1.0).is_err());
        assert!(ModeBasis::uniform(2, -1.0, 1.0).is_err());
        assert!(ModeBasis::uniform(2, 1.0, 0.0).is_err());
        let dup = vec![
            Mode {
                label: 1,
                omega: 1.0,
                weight: 1.0,
            },
            Mode {
                label: 1,
                omega: 1.0,
                weight: 1.0,
            },
        ];
        assert!(ModeBasis::new(dup).is_err());
    }

    #[test]
    fn amplitude_examples() {
        let a = pt(&[0.0], &[0.0]);
        let b = pt(&[12.0], &[0.0]);
        let single = SuperposedState::single(basis1(), a.clone()).unwrap();
        assert!((single.amplitude(&a).unwrap() - 1.0).norm() < 1e-15);

        let s = SuperposedState::new(
            basis1(),
            vec![Component::real(0.6, a.clone()), Component::real(0.8, b)],
        )
        .unwrap();
        // cross term bounded by 0.8·e^{-36}
        assert!((s.amplitude(&a).unwrap() - 0.6).norm() < 0.8 * (-36.0f64).exp() + 1e-15);
    }

    #[test]
    fn zero_coefficients_are_rejected() {
        let s = SuperposedState::new(basis1(), vec![Component::real(0.0, pt(&[1.0], &[0.0]))]);
        assert_eq!(s, Err(CoherentError::ZeroNorm));
        assert_eq!(
            SuperposedState::new(basis1(), vec![]),
            Err(CoherentError::EmptyState)
        );
    }

    #[test]
    fn v_value_examples() {
        let a = pt(&[0.0], &[0.0]);
        let s = SuperposedState::single(basis1(), a.clone()).unwrap();
        assert!((s.v_value(&a).unwrap() - 1.0).abs() < 1e-15);
        let far = pt(&[2.0], &[0.0]);
        assert!((s.v_value(&far).unwrap() - 0.135_335_283_236_612_7).abs() < 1e-15);

        let b = pt(&[0.0], &[12.0]);
        let s = SuperposedState::new(
            basis1(),
            vec![
                Component::real(FRAC_1_SQRT_2, a.clone()),
                Component::real(FRAC_1_SQRT_2, b),
            ],
        )
        .unwrap();
        assert!((s.v_value(&a).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn free_evolution_examples() {
        let a = pt(&[1.0], &[0.0]);
        let b = pt(&[-0.5], &[2.0]);
        let s = SuperposedState::new(
            basis1(),
            vec![
                Component::real(0.6, a),
                Component::new(Complex64::new(0.0, 0.8), b),
            ],
        )
        .unwrap();
        assert_eq!(s.evolve_free(0.0), s);

        let full = s.evolve_free(2.0 * PI);
        for (x, y) in full.components().iter().zip(s.components()) {
            assert!(x.point.distance(&y.point) < 1e-12);
        }
        let g0 = s.gram();
        let g1 = full.gram();
        assert!((g0 - g1).iter().all(|z| z.norm() < 1e-12));

        let quarter = SuperposedState::single(basis1(), pt(&[1.0], &[0.0]))
            .unwrap()
            .evolve_free(FRAC_PI_2);
        let p = &quarter.components()[0].point;
        assert!(p.q()[0].abs() < 1e-15);
        assert!((p.p()[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_check_single_state() {
        let s = SuperposedState::single(basis1(), pt(&[0.4], &[-1.0])).unwrap();
        let got = identity_check(
            &s,
            QuadratureGrid {
                spacing: 0.25,
                half_width: 8.0,
            },
        )
        .unwrap();
        assert!((got - 1.0).abs() < 1e-3, "{got}");
    }

    #[test]
    fn identity_check_far_pair() {
        let s = SuperposedState::new(
            basis1(),
            vec![
                Component::real(FRAC_1_SQRT_2, pt(&[-6.0], &[0.0])),
                Component::real(FRAC_1_SQRT_2, pt(&[6.0], &[1.0])),
            ],
        )
        .unwrap();
        let got = identity_check(
            &s,
            QuadratureGrid {
                spacing: 0.25,
                half_width: 8.0,
            },
        )
        .unwrap();
        assert!((got - 1.0).abs() < 1e-2, "{got}");
    }

    #[test]
    fn identity_check_rejects_clipped_grid() {
        let s = SuperposedState::single(basis1(), pt(&[0.0], &[0.0])).unwrap();
        let err = identity_check(
            &s,
            QuadratureGrid {
                spacing: 0.25,
                half_width: 1.0,
            },
        );
        assert!(matches!(err, Err(CoherentError::TruncatedSupport { .. })));
    }

    #[test]
    fn identity_check_rejects_three_modes() {
        let b = ModeBasis::uniform(3, 1.0, 1.0).unwrap();
        let s = SuperposedState::single(b, CoherentPoint::origin(3)).unwrap();
        let err = identity_check(
            &s,
            QuadratureGrid {
                spacing: 0.5,
                half_width: 8.0,
            },
        );
        assert_eq!(err, Err(CoherentError::UnsupportedModeCount(3)));
    }

    #[test]
    fn identity_check_two_modes_with_weights() {
        let b = ModeBasis::new(vec![
            Mode {
                label: 0,
                omega: 1.0,
                weight: 1.0,
            },
            Mode {
                label: 3,
                omega: 2.0,
                weight: 2.0,
            },
        ])
        .unwrap();
        let s = SuperposedState::new(
            b,
            vec![
                Component::real(0.8, pt(&[0.0, 1.0], &[0.5, 0.0])),
                Component::new(Complex64::new(0.3, 0.5), pt(&[0.7, 0.2], &[-0.4, 0.6])),
            ],
        )
        .unwrap();
        let got = identity_check(
            &s,
            QuadratureGrid {
                spacing: 0.4,
                half_width: 8.0,
            },
        )
        .unwrap();
        assert!((got - 1.0).abs() < 1e-6, "{got}");
    }

    #[test]
    fn gradient_matches_central_differences() {
        let b = ModeBasis::new(vec![
            Mode {
                label: 0,
                omega: 1.0,
                weight: 0.8,
            },
            Mode {
                label: 1,
                omega: 1.5,
                weight: 1.3,
            },
        ])
        .unwrap();
        let s = SuperposedState::new(
            b,
            vec![
                Component::real(0.8, pt(&[0.0, 1.0], &[0.5, 0.0])),
                Component::new(Complex64::new(0.3, -0.5), pt(&[1.1, 0.2], &[-0.4, 0.6])),
            ],
        )
        .unwrap();
        let x = pt(&[0.4, 0.3], &[0.1, 0.2]);
        let (_, grad) = s.v_and_gradient(&x).unwrap();
        let flat = x.to_flat();
        for i in 0..flat.len() {
            let h = 1e-5;
            let mut up = flat.clone();
            let mut dn = flat.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (s.v_value(&CoherentPoint::from_flat(&up).unwrap()).unwrap()
                - s.v_value(&CoherentPoint::from_flat(&dn).unwrap()).unwrap())
                / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() <= 1e-6 * grad[i].abs().max(1e-3),
                "{i}: {fd} vs {}",
                grad[i]
            );
        }
    }
}
