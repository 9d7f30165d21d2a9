//! Reference implementations shared by the integration tests. Nothing here
//! calls into the library's numerics; the oracles re-derive every quantity
//! from its defining formula.
#![allow(dead_code)]

use collapse_lab::coherent::{CoherentPoint, Component, ModeBasis, SuperposedState};
use collapse_lab::current::{Breakpoint, Trajectory};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Plain-data copy of a superposition, used by the oracles.
#[derive(Debug, Clone)]
pub struct Spec {
    pub weights: Vec<f64>,
    pub comps: Vec<(Complex64, Vec<f64>, Vec<f64>)>,
}

impl Spec {
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn build(&self) -> SuperposedState {
        let basis = ModeBasis::new(
            self.weights
                .iter()
                .enumerate()
                .map(|(i, &w)| collapse_lab::coherent::Mode {
                    label: i as i64,
                    omega: 1.0 + i as f64,
                    weight: w,
                })
                .collect(),
        )
        .unwrap();
        let comps = self
            .comps
            .iter()
            .map(|(c, q, p)| Component::new(*c, CoherentPoint::new(q.clone(), p.clone()).unwrap()))
            .collect();
        SuperposedState::new(basis, comps).unwrap()
    }
}

/// `exp −(Σw(Δq²+Δp²) + 2iΣw Δp(q+q'))/4` with `Δ = a − b`.
pub fn ref_overlap(w: &[f64], aq: &[f64], ap: &[f64], bq: &[f64], bp: &[f64]) -> Complex64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for k in 0..w.len() {
        let dq = aq[k] - bq[k];
        let dp = ap[k] - bp[k];
        re += w[k] * (dq * dq + dp * dp);
        im += w[k] * dp * (aq[k] + bq[k]);
    }
    Complex64::new(-re / 4.0, -im / 2.0).exp()
}

pub fn ref_amplitude(spec: &Spec, q: &[f64], p: &[f64]) -> Complex64 {
    spec.comps
        .iter()
        .map(|(c, cq, cp)| c * ref_overlap(&spec.weights, q, p, cq, cp))
        .sum()
}

pub fn ref_norm_sq(spec: &Spec) -> f64 {
    let mut s = Complex64::new(0.0, 0.0);
    for (ca, aq, ap) in &spec.comps {
        for (cb, bq, bp) in &spec.comps {
            s += ca.conj() * cb * ref_overlap(&spec.weights, aq, ap, bq, bp);
        }
    }
    s.re
}

pub fn ref_v(spec: &Spec, q: &[f64], p: &[f64]) -> f64 {
    ref_amplitude(spec, q, p).norm_sqr() / ref_norm_sq(spec)
}

/// Random superposition of up to `max_comps` components whose centers are at
/// least `separation` apart in the weighted bracket distance.
pub fn well_separated<R: Rng>(
    rng: &mut R,
    modes: usize,
    max_comps: usize,
    separation: f64,
) -> Spec {
    let weights: Vec<f64> = (0..modes).map(|_| rng.random_range(1.0..2.0)).collect();
    let count = rng.random_range(1..=max_comps);
    let mut comps: Vec<(Complex64, Vec<f64>, Vec<f64>)> = Vec::new();
    while comps.len() < count {
        let q: Vec<f64> = (0..modes).map(|_| rng.random_range(-25.0..25.0)).collect();
        let p: Vec<f64> = (0..modes).map(|_| rng.random_range(-25.0..25.0)).collect();
        let far = comps.iter().all(|(_, cq, cp)| {
            let d2: f64 = (0..modes)
                .map(|k| weights[k] * ((q[k] - cq[k]).powi(2) + (p[k] - cp[k]).powi(2)))
                .sum();
            d2.sqrt() >= separation
        });
        if far {
            let mag = rng.random_range(0.2..1.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            comps.push((Complex64::from_polar(mag, phase), q, p));
        }
    }
    // Distinct magnitudes so the global maximum is not a near tie.
    let mut mags: Vec<f64> = comps.iter().map(|c| c.0.norm()).collect();
    mags.sort_by(f64::total_cmp);
    if mags.windows(2).any(|w| w[1] - w[0] < 0.02) {
        return well_separated(rng, modes, max_comps, separation);
    }
    Spec { weights, comps }
}

/// Arbitrary (possibly overlapping) superposition.
pub fn random_spec<R: Rng>(rng: &mut R, modes: usize, comps: usize, spread: f64) -> Spec {
    let weights: Vec<f64> = (0..modes).map(|_| rng.random_range(0.3..3.0)).collect();
    let comps = (0..comps)
        .map(|_| {
            let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let q = (0..modes)
                .map(|_| rng.random_range(-spread..spread))
                .collect();
            let p = (0..modes)
                .map(|_| rng.random_range(-spread..spread))
                .collect();
            (c, q, p)
        })
        .collect();
    Spec { weights, comps }
}

/// Brute-force argmax of `V`: a coarse tensor grid around every component
/// center (displaced by `shift` so no node sits on a center), then repeated
/// 5-point-per-axis zooms around the running best.
pub fn grid_argmax(spec: &Spec, shift: f64) -> (Vec<f64>, f64) {
    let n = spec.n();
    let dim = 2 * n;
    let norm = ref_norm_sq(spec);
    let eval = |x: &[f64]| ref_amplitude(spec, &x[..n], &x[n..]).norm_sqr() / norm;
    let mut best: (Vec<f64>, f64) = (Vec::new(), f64::NEG_INFINITY);
    // coarse: 7 points per axis, spacing 0.5, around each center
    let coarse: Vec<f64> = (-3..=3).map(|i| i as f64 * 0.5 + shift).collect();
    for (_, cq, cp) in &spec.comps {
        let center: Vec<f64> = cq.iter().chain(cp).copied().collect();
        scan(&center, &coarse, dim, &eval, &mut best);
    }
    let mut h = 0.25;
    while h > 2e-6 {
        let offsets: Vec<f64> = (-2..=2).map(|i| i as f64 * h).collect();
        let center = best.0.clone();
        scan(&center, &offsets, dim, &eval, &mut best);
        h *= 0.5;
    }
    best
}

fn scan(
    center: &[f64],
    offsets: &[f64],
    dim: usize,
    eval: &dyn Fn(&[f64]) -> f64,
    best: &mut (Vec<f64>, f64),
) {
    let m = offsets.len();
    let total = m.pow(dim as u32);
    let mut x = vec![0.0; dim];
    for idx in 0..total {
        let mut r = idx;
        for d in 0..dim {
            x[d] = center[d] + offsets[r % m];
            r /= m;
        }
        let v = eval(&x);
        if v > best.1 {
            *best = (x.clone(), v);
        }
    }
}

/// Random trajectory on `[0, t_end]` with `segments` pieces and every speed
/// below `vmax`.
pub fn random_trajectory<R: Rng>(
    rng: &mut R,
    charge: f64,
    segments: usize,
    t_end: f64,
    vmax: f64,
) -> Trajectory {
    let mut cuts: Vec<f64> = (1..segments)
        .map(|_| rng.random_range(0.05..0.95) * t_end)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut times = vec![0.0];
    times.extend(cuts);
    times.push(t_end);
    let mut x = [
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ];
    let mut bps = vec![Breakpoint { t: 0.0, x }];
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        let dir = unit(rng);
        let speed = rng.random_range(0.0..vmax);
        x = [0, 1, 2].map(|i| x[i] + dir[i] * speed * dt);
        bps.push(Breakpoint { t: w[1], x });
    }
    Trajectory::new(charge, bps).unwrap()
}

pub fn unit<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v = [0, 1, 2].map(|_| rng.random_range(-1.0..1.0));
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 > 1e-4 && n2 <= 1.0 {
            let n = n2.sqrt();
            return v.map(|x| x / n);
        }
    }
}

/// `J_μ(k) = −i e ∫ dt (dx_μ/dt) e^{i(k₀t − k⃗·x⃗(t))}` by adaptive
/// double-exponential quadrature, one segment at a time.
pub fn quad_current(trajectories: &[Trajectory], k: [f64; 3]) -> [Complex64; 4] {
    let k0 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for traj in trajectories {
        for w in traj.breakpoints().windows(2) {
            let (a, b) = (w[0], w[1]);
            let v = [0, 1, 2].map(|i| (b.x[i] - a.x[i]) / (b.t - a.t));
            let u = [1.0, -v[0], -v[1], -v[2]];
            let phase = |t: f64| {
                let x = [0, 1, 2].map(|i| a.x[i] + v[i] * (t - a.t));
                k0 * t - (k[0] * x[0] + k[1] * x[1] + k[2] * x[2])
            };
            let re = quadrature::double_exponential::integrate(|t| phase(t).cos(), a.t, b.t, 1e-13)
                .integral;
            let im = quadrature::double_exponential::integrate(|t| phase(t).sin(), a.t, b.t, 1e-13)
                .integral;
            let seg = Complex64::new(re, im) * Complex64::new(0.0, -traj.charge());
            for mu in 0..4 {
                out[mu] += seg * u[mu];
            }
        }
    }
    out
}
