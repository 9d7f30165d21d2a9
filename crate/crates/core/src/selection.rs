//! The selection process: event clock, landscape maxima, actualization by
//! projection onto the global maximum, and the optional blocking test.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::born::{self, BlockingVector, BornError, TransitionGeometry};
use crate::coherent::{CoherentError, CoherentPoint, Component, SuperposedState};

/// Global maxima closer than this in `V` are a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Convergence radius of the ascent: largest remaining Newton step at a
/// reported maximum.
const NEWTON_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("urgency energy must be positive and finite, got {0}")]
    InvalidEnergy(f64),
    #[error("event time must be finite, got {0}")]
    InvalidTime(f64),
    #[error("urgency schedule is empty")]
    EmptySchedule,
    #[error("at least one event is required")]
    NoEvents,
    #[error("no start of the landscape ascent converged")]
    NoMaximum,
    #[error(transparent)]
    Coherent(#[from] CoherentError),
    #[error(transparent)]
    Born(#[from] BornError),
}

/// `t_{i+1} = t_i + ħ/E` with `ħ = 1`.
pub fn next_event_time(t: f64, energy: f64) -> Result<f64, SelectionError> {
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(SelectionError::InvalidEnergy(energy));
    }
    if !t.is_finite() {
        return Err(SelectionError::InvalidTime(t));
    }
    Ok(t + 1.0 / energy)
}

/// Urgency energies driving the event clock. A per-event list repeats its last
/// entry once exhausted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UrgencySchedule {
    Constant(f64),
    PerEvent(Vec<f64>),
}

impl UrgencySchedule {
    pub fn validate(&self) -> Result<(), SelectionError> {
        let values: &[f64] = match self {
            Self::Constant(e) => std::slice::from_ref(e),
            Self::PerEvent(v) if v.is_empty() => return Err(SelectionError::EmptySchedule),
            Self::PerEvent(v) => v,
        };
        match values.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
            Some(e) => Err(SelectionError::InvalidEnergy(*e)),
            None => Ok(()),
        }
    }

    /// Energy for the event with zero-based position `i`.
    pub fn energy(&self, i: usize) -> f64 {
        match self {
            Self::Constant(e) => *e,
            Self::PerEvent(v) => v[i.min(v.len() - 1)],
        }
    }
}

/// A local maximum of `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub point: CoherentPoint,
    pub v: f64,
}

/// Tuning of the multi-start ascent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentOptions {
    /// Stationarity backstop, `‖∇V‖ < grad_tol · max(1, V)`, for peaks where
    /// Newton polishing runs out of resolvable progress.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Converged points closer than this are the same maximum.
    pub dedup_radius: f64,
    /// Component pairs with `⟨Δ·Δ⟩` (q and p together) below this also seed
    /// a start at their midpoint.
    pub near_pair_bracket: f64,
    /// Coordinate step of the second-order probe.
    pub probe_step: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            max_iter: 20_000,
            dedup_radius: 1e-6,
            near_pair_bracket: 36.0,
            probe_step: 1e-3,
        }
    }
}

/// Result of [`find_local_maxima`]: maxima sorted by descending `V`, plus the
/// number of starts discarded for not converging or failing the probe test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximaSearch {
    pub maxima: Vec<Candidate>,
    pub dropped_starts: usize,
}

pub fn find_local_maxima(state: &SuperposedState) -> MaximaSearch {
    find_local_maxima_with(state, &AscentOptions::default())
}

/// Multi-start ascent on `V`, seeded at every component center and at the
/// midpoint of every near pair.
pub fn find_local_maxima_with(state: &SuperposedState, opts: &AscentOptions) -> MaximaSearch {
    let starts = seed_points(state, opts);
    let results: Vec<Option<Candidate>> = starts
        .par_iter()
        .map(|start| {
            let point = ascend(state, start, opts)?;
            let v = state.v_unchecked(&point);
            passes_probe(state, &point, v, opts.probe_step).then_some(Candidate { point, v })
        })
        .collect();

    let dropped_starts = results.iter().filter(|r| r.is_none()).count();
    let mut converged: Vec<Candidate> = results.into_iter().flatten().collect();
    sort_candidates(&mut converged);

    let mut maxima: Vec<Candidate> = Vec::with_capacity(converged.len());
    for c in converged {
        if maxima
            .iter()
            .all(|m| m.point.distance(&c.point) > opts.dedup_radius)
        {
            maxima.push(c);
        }
    }
    MaximaSearch {
        maxima,
        dropped_starts,
    }
}

/// Descending `V`, ties broken lexicographically on interleaved `(q, p)`.
fn sort_candidates(c: &mut [Candidate]) {
    c.sort_by(|a, b| {
        b.v.total_cmp(&a.v)
            .then_with(|| lex_cmp(&a.point, &b.point))
    });
}

fn lex_cmp(a: &CoherentPoint, b: &CoherentPoint) -> std::cmp::Ordering {
    a.interleaved()
        .iter()
        .zip(b.interleaved().iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn seed_points(state: &SuperposedState, opts: &AscentOptions) -> Vec<CoherentPoint> {
    let comps = state.components();
    let basis = state.basis();
    let mut seeds: Vec<CoherentPoint> = comps.iter().map(|c| c.point.clone()).collect();
    for (j, a) in comps.iter().enumerate() {
        for b in &comps[j + 1..] {
            let dq: Vec<f64> = a
                .point
                .q()
                .iter()
                .zip(b.point.q())
                .map(|(x, y)| x - y)
                .collect();
            let dp: Vec<f64> = a
                .point
                .p()
                .iter()
                .zip(b.point.p())
                .map(|(x, y)| x - y)
                .collect();
            if basis.bracket(&dq, &dq) + basis.bracket(&dp, &dp) < opts.near_pair_bracket {
                let mid: Vec<f64> = a
                    .point
                    .to_flat()
                    .iter()
                    .zip(b.point.to_flat())
                    .map(|(x, y)| 0.5 * (x + y))
                    .collect();
                seeds.push(CoherentPoint::from_flat(&mid).expect("finite midpoint"));
            }
        }
    }
    seeds
}

/// Two phases: Armijo ascent on `ln V` along the gradient preconditioned by
/// the inverse mode weights (for an isolated coherent bump the first full step
/// lands on the center), then Newton polishing on `∇V`. The line search alone
/// cannot place a peak better than ~1e-8, where `V` goes flat in floating
/// point; the analytic gradient keeps resolving it.
fn ascend(
    state: &SuperposedState,
    start: &CoherentPoint,
    opts: &AscentOptions,
) -> Option<CoherentPoint> {
    let n = state.basis().len();
    let inv_w: Vec<f64> = (0..2 * n)
        .map(|i| 1.0 / state.basis().weight(i % n))
        .collect();
    let mut x = start.to_flat();
    let (mut v, mut grad) = state.v_and_gradient_unchecked(start);
    if !(v > 0.0) {
        return None;
    }
    let mut step = 1.0_f64;

    for _ in 0..opts.max_iter {
        let dir: Vec<f64> = grad.iter().zip(&inv_w).map(|(g, w)| g / v * w).collect();
        if norm(&dir) < NEWTON_TOL {
            break;
        }
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g / v * d).sum();
        let ln_v = v.ln();
        let mut t = (step * 2.0).min(64.0);
        let mut accepted = None;
        while t > 1e-12 {
            let tx: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let (tv, tg) = state.v_and_gradient_unchecked(&CoherentPoint::from_flat(&tx).ok()?);
            if tv > 0.0 && tv.ln() >= ln_v + 1e-4 * t * slope {
                accepted = Some((tx, tv, tg));
                break;
            }
            t *= 0.5;
        }
        let Some((tx, tv, tg)) = accepted else { break };
        let gain = tv.ln() - ln_v;
        x = tx;
        v = tv;
        grad = tg;
        step = t;
        // V no longer resolves progress
        if gain < 1e-13 {
            break;
        }
    }
    polish(state, x, v, grad, opts)
}

/// Newton iterations on `∇V = 0` with a finite-difference Hessian of the
/// analytic gradient. Succeeds when the last Newton step is below
/// [`NEWTON_TOL`] (or the gradient already meets `grad_tol`) and the Hessian is
/// negative definite.
fn polish(
    state: &SuperposedState,
    mut x: Vec<f64>,
    mut v: f64,
    mut grad: Vec<f64>,
    opts: &AscentOptions,
) -> Option<CoherentPoint> {
    let dim = x.len();
    for _ in 0..50 {
        let hess = hessian(state, &x)?;
        let eig = nalgebra::SymmetricEigen::new(hess.clone());
        if eig.eigenvalues.iter().any(|&l| !(l < 0.0)) {
            return None;
        }
        let g = nalgebra::DVector::from_column_slice(&grad);
        let delta = -(hess.lu().solve(&g)?);
        let dist = delta.norm();
        let grad_norm = norm(&grad);
        if dist < NEWTON_TOL || grad_norm < opts.grad_tol * v.max(1.0) * 1e-3 {
            return CoherentPoint::from_flat(&x).ok();
        }
        // never jump further than the bump scale in one go
        let scale = (1.0 / dist).min(1.0);
        let tx: Vec<f64> = (0..dim).map(|i| x[i] + scale * delta[i]).collect();
        let (tv, tg) = state.v_and_gradient_unchecked(&CoherentPoint::from_flat(&tx).ok()?);
        if !(tv >= v * (1.0 - 1e-12)) || !(norm(&tg) < grad_norm) {
            // no progress left: accept only if already stationary
            return (dist < NEWTON_TOL * 1e3 && grad_norm < opts.grad_tol * v.max(1.0))
                .then(|| CoherentPoint::from_flat(&x).ok())
                .flatten();
        }
        x = tx;
        v = tv;
        grad = tg;
    }
    None
}

fn hessian(state: &SuperposedState, x: &[f64]) -> Option<nalgebra::DMatrix<f64>> {
    let dim = x.len();
    let mut h = nalgebra::DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let step = 1e-5 * x[j].abs().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += step;
        xm[j] -= step;
        let (_, gp) = state.v_and_gradient_unchecked(&CoherentPoint::from_flat(&xp).ok()?);
        let (_, gm) = state.v_and_gradient_unchecked(&CoherentPoint::from_flat(&xm).ok()?);
        for i in 0..dim {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    Some((&h + h.transpose()) * 0.5)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// `V` must not increase along any of the `2n` coordinate probes.
fn passes_probe(state: &SuperposedState, point: &CoherentPoint, v: f64, h: f64) -> bool {
    let flat = point.to_flat();
    (0..flat.len()).all(|i| {
        [-h, h].iter().all(|d| {
            let mut probe = flat.clone();
            probe[i] += d;
            let p = CoherentPoint::from_flat(&probe).expect("finite probe");
            state.v_unchecked(&p) <= v
        })
    })
}

/// One actualization event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub index: usize,
    pub time: f64,
    pub chosen: CoherentPoint,
    pub v_at_choice: f64,
    pub candidates: Vec<Candidate>,
    pub blocked: bool,
    /// Several global maxima within [`TIE_TOLERANCE`]; the lexicographically
    /// smallest was taken.
    pub tie: bool,
    pub dropped_starts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collapse {
    pub state_next: SuperposedState,
    pub record: EventRecord,
}

struct Choice {
    chosen: CoherentPoint,
    v: f64,
    tie: bool,
    search: MaximaSearch,
}

fn choose(state: &SuperposedState) -> Result<Choice, SelectionError> {
    let search = find_local_maxima(state);
    let top = search.maxima.first().ok_or(SelectionError::NoMaximum)?.v;
    let tied: Vec<&Candidate> = search
        .maxima
        .iter()
        .take_while(|c| top - c.v < TIE_TOLERANCE)
        .collect();
    let best = tied
        .iter()
        .min_by(|a, b| lex_cmp(&a.point, &b.point))
        .expect("non-empty");
    Ok(Choice {
        chosen: best.point.clone(),
        v: best.v,
        tie: tied.len() > 1,
        search,
    })
}

/// Projects onto the coherent state at the global maximum of `V`.
///
/// The projected state `|max⟩⟨max|Ψ⟩` is renormalized, so `state_next` is
/// `1·|max⟩`.
pub fn select_and_collapse(state: &SuperposedState, t: f64) -> Result<Collapse, SelectionError> {
    collapse_event(state, t, 1)
}

fn collapse_event(
    state: &SuperposedState,
    t: f64,
    index: usize,
) -> Result<Collapse, SelectionError> {
    let choice = choose(state)?;
    let state_next = SuperposedState::single(state.basis().clone(), choice.chosen.clone())?;
    Ok(Collapse {
        state_next,
        record: EventRecord {
            index,
            time: t,
            chosen: choice.chosen,
            v_at_choice: choice.v,
            candidates: choice.search.maxima,
            blocked: false,
            tie: choice.tie,
            dropped_starts: choice.search.dropped_starts,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Accepted,
    Blocked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockedSelection {
    pub outcome: Outcome,
    /// The collapsed state when accepted, the unchanged input when blocked.
    pub state_next: SuperposedState,
    pub record: EventRecord,
}

/// Picks the top candidate as [`select_and_collapse`] does, then lets `phi`
/// veto it. A blocked transition leaves the state untouched.
pub fn blocked_select(
    state: &SuperposedState,
    t: f64,
    phi: &BlockingVector,
) -> Result<BlockedSelection, SelectionError> {
    blocked_event(state, t, phi, 1)
}

fn blocked_event(
    state: &SuperposedState,
    t: f64,
    phi: &BlockingVector,
    index: usize,
) -> Result<BlockedSelection, SelectionError> {
    let Collapse {
        state_next,
        mut record,
    } = collapse_event(state, t, index)?;
    let geom = transition_geometry(state, &record.chosen)?;
    if born::is_blocked(&geom, phi) {
        record.blocked = true;
        Ok(BlockedSelection {
            outcome: Outcome::Blocked,
            state_next: state.clone(),
            record,
        })
    } else {
        Ok(BlockedSelection {
            outcome: Outcome::Accepted,
            state_next,
            record,
        })
    }
}

/// `θ` for projecting `state` onto `|point⟩`, from `⟨Ψ|Ψ⟩` and
/// `‖PΨ‖² = |⟨point|Ψ⟩|²`.
pub fn transition_geometry(
    state: &SuperposedState,
    point: &CoherentPoint,
) -> Result<TransitionGeometry, SelectionError> {
    let projected = state.amplitude(point)?.norm_sqr();
    Ok(born::theta_from_norms(state.norm_sq(), projected)?)
}

/// Regenerates alternatives between events. Implementations must be a
/// deterministic function of `(state, step)` and their own configuration.
pub trait Drift {
    fn apply(&self, state: &SuperposedState, step: usize)
        -> Result<SuperposedState, CoherentError>;
}

/// Leaves the state alone.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoDrift;

impl Drift for NoDrift {
    fn apply(
        &self,
        state: &SuperposedState,
        _step: usize,
    ) -> Result<SuperposedState, CoherentError> {
        Ok(state.clone())
    }
}

/// Adds one component at a fixed offset from the first component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedSatellite {
    /// Flat `[q.., p..]` offset.
    pub offset: Vec<f64>,
    pub coeff: Complex64,
}

impl Drift for FixedSatellite {
    fn apply(
        &self,
        state: &SuperposedState,
        _step: usize,
    ) -> Result<SuperposedState, CoherentError> {
        let anchor = state.components()[0].point.to_flat();
        if anchor.len() != self.offset.len() {
            return Err(CoherentError::DimensionMismatch {
                expected: anchor.len() / 2,
                found: self.offset.len() / 2,
            });
        }
        let at: Vec<f64> = anchor
            .iter()
            .zip(&self.offset)
            .map(|(a, o)| a + o)
            .collect();
        let mut components = state.components().to_vec();
        components.push(Component::new(self.coeff, CoherentPoint::from_flat(&at)?));
        SuperposedState::new(state.basis().clone(), components)
    }
}

/// Spawns `count` components uniformly within `±spread` of the first
/// component in every coordinate, each with magnitude `magnitude` and a random
/// phase. Randomness comes from substream `step` of `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpawnPerturbed {
    pub count: usize,
    pub spread: f64,
    pub magnitude: f64,
    pub seed: u64,
}

impl Drift for SpawnPerturbed {
    fn apply(
        &self,
        state: &SuperposedState,
        step: usize,
    ) -> Result<SuperposedState, CoherentError> {
        let mut rng = born::shard_rng(self.seed, step as u64, 0);
        let anchor = state.components()[0].point.to_flat();
        let mut components = state.components().to_vec();
        for _ in 0..self.count {
            let at: Vec<f64> = anchor
                .iter()
                .map(|a| a + self.spread * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            let phase = std::f64::consts::TAU * rng.random::<f64>();
            components.push(Component::new(
                Complex64::from_polar(self.magnitude, phase),
                CoherentPoint::from_flat(&at)?,
            ));
        }
        SuperposedState::new(state.basis().clone(), components)
    }
}

/// Event log of [`run_sequence`]. `aborted` is set when a step failed; the
/// records before it are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceLog {
    pub records: Vec<EventRecord>,
    pub final_state: SuperposedState,
    pub aborted: Option<SelectionError>,
}

/// Optional blocking stage for [`run_sequence_with`]: each event samples a
/// fresh `Φ` from substream `event index` of `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockingStage {
    pub seed: u64,
}

/// Starting at `t = 0`, repeats: free evolution over `1/E`, drift, selection.
pub fn run_sequence(
    initial: &SuperposedState,
    schedule: &UrgencySchedule,
    drift: &dyn Drift,
    n_events: usize,
) -> Result<SequenceLog, SelectionError> {
    run_sequence_with(initial, schedule, drift, n_events, None)
}

pub fn run_sequence_with(
    initial: &SuperposedState,
    schedule: &UrgencySchedule,
    drift: &dyn Drift,
    n_events: usize,
    blocking: Option<BlockingStage>,
) -> Result<SequenceLog, SelectionError> {
    if n_events == 0 {
        return Err(SelectionError::NoEvents);
    }
    schedule.validate()?;

    let mut records = Vec::with_capacity(n_events);
    let mut state = initial.clone();
    let mut t = 0.0;
    for i in 0..n_events {
        let index = i + 1;
        let step = (|| -> Result<(f64, SuperposedState, EventRecord), SelectionError> {
            let t_next = next_event_time(t, schedule.energy(i))?;
            let evolved = state.evolve_free(t_next - t);
            let drifted = drift.apply(&evolved, index)?;
            match blocking {
                None => {
                    let c = collapse_event(&drifted, t_next, index)?;
                    Ok((t_next, c.state_next, c.record))
                }
                Some(stage) => {
                    let phi = born::sample_phi(&mut born::shard_rng(stage.seed, index as u64, 0));
                    let b = blocked_event(&drifted, t_next, &phi, index)?;
                    Ok((t_next, b.state_next, b.record))
                }
            }
        })();
        match step {
            Ok((t_next, next, record)) => {
                t = t_next;
                state = next;
                records.push(record);
            }
            Err(e) => {
                return Ok(SequenceLog {
                    records,
                    final_state: state,
                    aborted: Some(e),
                })
            }
        }
    }
    Ok(SequenceLog {
        records,
        final_state: state,
        aborted: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherent::ModeBasis;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

    fn basis1() -> ModeBasis {
        ModeBasis::uniform(1, 1.0, 1.0).unwrap()
    }

    fn pt(q: f64, p: f64) -> CoherentPoint {
        CoherentPoint::new(vec![q], vec![p]).unwrap()
    }

    fn pair(ca: f64, cb: f64) -> SuperposedState {
        SuperposedState::new(
            basis1(),
            vec![
                Component::real(ca, pt(-6.0, 0.0)),
                Component::real(cb, pt(6.0, 0.0)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn event_time_examples() {
        assert_eq!(next_event_time(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(next_event_time(2.0, 4.0).unwrap(), 2.25);
        assert_eq!(
            next_event_time(0.0, 0.0),
            Err(SelectionError::InvalidEnergy(0.0))
        );
        assert!(next_event_time(0.0, -1.0).is_err());
    }

    #[test]
    fn single_bump_has_one_maximum() {
        let a = pt(1.5, -0.5);
        let s = SuperposedState::single(basis1(), a.clone()).unwrap();
        let m = find_local_maxima(&s);
        assert_eq!(m.maxima.len(), 1);
        assert_eq!(m.maxima[0].point, a);
        assert!((m.maxima[0].v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn collapse_picks_heavier_component() {
        let s = pair(0.8, 0.6);
        let c = select_and_collapse(&s, 1.0).unwrap();
        assert!(c.record.chosen.distance(&pt(-6.0, 0.0)) < 1e-6);
        assert!((c.record.v_at_choice - 0.64).abs() < 1e-9);
        assert!(!c.record.tie);
        assert_eq!(c.state_next.components().len(), 1);
        assert_eq!(c.record.v_at_choice, c.record.candidates[0].v);
    }

    #[test]
    fn symmetric_state_is_a_flagged_tie() {
        let s = pair(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        let c = select_and_collapse(&s, 0.0).unwrap();
        assert!(c.record.tie);
        assert!(c.record.chosen.q()[0] < 0.0);
    }

    #[test]
    fn collapse_is_idempotent() {
        let s = pair(0.3, 0.9);
        let first = select_and_collapse(&s, 0.0).unwrap();
        let second = select_and_collapse(&first.state_next, 0.0).unwrap();
        assert_eq!(first.record.chosen, second.record.chosen);
        assert!((second.record.v_at_choice - 1.0).abs() < 1e-15);
    }

    #[test]
    fn blocked_select_examples() {
        let s = SuperposedState::single(basis1(), pt(0.0, 0.0)).unwrap();
        for alpha in [1e-6, 1.0, 3.0] {
            let phi = BlockingVector::new(alpha, 0.0).unwrap();
            assert_eq!(
                blocked_select(&s, 0.0, &phi).unwrap().outcome,
                Outcome::Accepted
            );
        }
        let half = pair(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        let phi = BlockingVector::new(FRAC_PI_4, 0.0).unwrap();
        let b = blocked_select(&half, 0.0, &phi).unwrap();
        assert_eq!(b.outcome, Outcome::Blocked);
        assert!(b.record.blocked);
        assert_eq!(b.state_next, half);
    }

    #[test]
    fn sequence_with_no_drift_reactualizes() {
        let s = SuperposedState::single(basis1(), pt(1.0, 0.0)).unwrap();
        let log = run_sequence(&s, &UrgencySchedule::Constant(1.0), &NoDrift, 1).unwrap();
        assert_eq!(log.records.len(), 1);
        assert_eq!(log.records[0].time, 1.0);
        // the point rotated by ω·Δt = 1 rad before being re-actualized
        let rotated = s.evolve_free(1.0);
        assert!(
            log.records[0]
                .chosen
                .distance(&rotated.components()[0].point)
                < 1e-12
        );
    }

    #[test]
    fn doubling_energy_schedule_times() {
        let s = SuperposedState::single(basis1(), pt(1.0, 0.0)).unwrap();
        let sched = UrgencySchedule::PerEvent(vec![1.0, 2.0, 4.0]);
        let log = run_sequence(&s, &sched, &NoDrift, 3).unwrap();
        let times: Vec<f64> = log.records.iter().map(|r| r.time).collect();
        assert_eq!(times, vec![1.0, 1.5, 1.75]);
    }

    #[test]
    fn zero_norm_drift_aborts_with_partial_log() {
        struct Annihilate;
        impl Drift for Annihilate {
            fn apply(
                &self,
                state: &SuperposedState,
                step: usize,
            ) -> Result<SuperposedState, CoherentError> {
                if step < 2 {
                    return Ok(state.clone());
                }
                state.scaled(Complex64::new(0.0, 0.0))
            }
        }
        let s = SuperposedState::single(basis1(), pt(1.0, 0.0)).unwrap();
        let log = run_sequence(&s, &UrgencySchedule::Constant(1.0), &Annihilate, 4).unwrap();
        assert_eq!(log.records.len(), 1);
        assert_eq!(
            log.aborted,
            Some(SelectionError::Coherent(CoherentError::ZeroNorm))
        );
    }

    #[test]
    fn invalid_schedule_rejected() {
        let s = SuperposedState::single(basis1(), pt(1.0, 0.0)).unwrap();
        let err = run_sequence(&s, &UrgencySchedule::PerEvent(vec![1.0, -2.0]), &NoDrift, 2);
        assert_eq!(err.unwrap_err(), SelectionError::InvalidEnergy(-2.0));
        assert_eq!(
            run_sequence(&s, &UrgencySchedule::Constant(1.0), &NoDrift, 0).unwrap_err(),
            SelectionError::NoEvents
        );
    }
}
