//! Nanbu–Babovsky particle engine.
//!
//! One step: permute the population with a keyed Fisher–Yates shuffle, pair
//! element i with element i + N/2, gate every pair by an independent
//! Bernoulli draw, and apply the symmetric mixing rule with fresh (p, q)
//! draws. Every pair owns a keyed substream, so pair updates commute and the
//! result is independent of the degree of parallelism.

use crate::error::{Error, Result};
use crate::kinetics::{AdmissibilityReport, InteractionLaw, ScalingRegime};
use crate::math::pairwise_sum;
use crate::sampling::{self, InitialCondition, RngStream, StreamKey};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Stream domains: one per source of randomness inside a step.
pub(crate) const DOMAIN_INIT: u64 = 1;
pub(crate) const DOMAIN_PERMUTE: u64 = 2;
pub(crate) const DOMAIN_PAIR: u64 = 3;
pub(crate) const DOMAIN_MIGRATE: u64 = 4;

/// Number of whole steps in [0, t_final]; tolerant to the usual floating
/// division shortfall (10/0.001 = 9999.999...).
pub fn step_count(t_final: f64, dt: f64) -> u64 {
    ((t_final / dt) + 1e-9).floor() as u64
}

/// The discrete carrier of f(v, t): particle states plus the step geometry.
#[derive(Debug, Clone)]
pub struct Ensemble {
    states: Vec<f64>,
    dt: f64,
    t: f64,
    seed: u64,
    iteration: u64,
    interaction_rate: f64,
}

impl Ensemble {
    /// `interaction_rate` is the per-pair Bernoulli parameter of one step:
    /// dt for the unscaled scheme, dt/eps in the quasi-invariant regime.
    /// Zero is allowed (the no-interaction limit); above 1 is not.
    pub fn new(states: Vec<f64>, dt: f64, seed: u64, interaction_rate: f64) -> Result<Self> {
        if states.len() < 2 || states.len() % 2 != 0 {
            return Err(Error::OddParticleCount(states.len()));
        }
        if !(dt > 0.0) {
            return Err(Error::NonPositiveParameter { name: "dt", value: dt });
        }
        if !(0.0..=1.0).contains(&interaction_rate) {
            return Err(Error::ProbabilityOutOfRange(interaction_rate));
        }
        Ok(Self { states, dt, t: 0.0, seed, iteration: 0, interaction_rate })
    }

    /// Sample the initial population from `f0` with the run's init stream.
    pub fn from_initial_condition(
        f0: &InitialCondition,
        n: usize,
        dt: f64,
        seed: u64,
        interaction_rate: f64,
    ) -> Result<Self> {
        let mut stream = RngStream::new(seed, StreamKey::new(DOMAIN_INIT, 0, 0, 0));
        let states = sampling::sample_initial_condition(&mut stream, f0, n)?;
        Self::new(states, dt, seed, interaction_rate)
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn interaction_rate(&self) -> f64 {
        self.interaction_rate
    }

    /// One Nanbu–Babovsky step.
    pub fn step(&mut self, law: &InteractionLaw) {
        let mut perm =
            RngStream::new(self.seed, StreamKey::new(DOMAIN_PERMUTE, self.iteration, 0, 0));
        sampling::shuffle(&mut self.states, &mut perm);
        let half = self.states.len() / 2;
        let (left, right) = self.states.split_at_mut(half);
        let seed = self.seed;
        let iteration = self.iteration;
        let rate = self.interaction_rate;
        let update = |k: usize, a: &mut f64, b: &mut f64| {
            let mut stream =
                RngStream::new(seed, StreamKey::new(DOMAIN_PAIR, iteration, 0, k as u64));
            // rate is validated in [0, 1] at construction.
            if stream.bernoulli(rate).unwrap() == 1 {
                let (p, q) = law.draw_pair(&mut stream);
                let (va, vb) = (*a, *b);
                *a = p * va + q * vb;
                *b = p * vb + q * va;
            }
        };
        #[cfg(feature = "parallel")]
        left.par_iter_mut()
            .zip(right.par_iter_mut())
            .enumerate()
            .for_each(|(k, (a, b))| update(k, a, b));
        #[cfg(not(feature = "parallel"))]
        left.iter_mut()
            .zip(right.iter_mut())
            .enumerate()
            .for_each(|(k, (a, b))| update(k, a, b));

        self.iteration += 1;
        self.t = self.iteration as f64 * self.dt;
    }

    /// Shift all states so the empirical mean equals `target`.
    ///
    /// Stabilization hook for regimes whose mean equation is unstable (the
    /// conserved-energy scaling has <p+q> > 1, so sampling or rounding
    /// errors in the mean grow exponentially); callers opt in per step.
    pub fn recenter_mean(&mut self, target: f64) {
        let shift = target - crate::math::mean(&self.states);
        for v in self.states.iter_mut() {
            *v += shift;
        }
    }

    /// Sequential variant of [`Ensemble::step`], always available so the
    /// bench suite can compare against the data-parallel path. Produces
    /// bit-identical states.
    pub fn step_sequential(&mut self, law: &InteractionLaw) {
        let mut perm =
            RngStream::new(self.seed, StreamKey::new(DOMAIN_PERMUTE, self.iteration, 0, 0));
        sampling::shuffle(&mut self.states, &mut perm);
        let half = self.states.len() / 2;
        let (left, right) = self.states.split_at_mut(half);
        for (k, (a, b)) in left.iter_mut().zip(right.iter_mut()).enumerate() {
            let mut stream = RngStream::new(
                self.seed,
                StreamKey::new(DOMAIN_PAIR, self.iteration, 0, k as u64),
            );
            if stream.bernoulli(self.interaction_rate).unwrap() == 1 {
                let (p, q) = law.draw_pair(&mut stream);
                let (va, vb) = (*a, *b);
                *a = p * va + q * vb;
                *b = p * vb + q * va;
            }
        }
        self.iteration += 1;
        self.t = self.iteration as f64 * self.dt;
    }
}

/// Run floor(t_final/dt) steps, invoking `observer(iteration, t, states)`
/// before the first step and after every step.
pub fn run<F>(mut e: Ensemble, law: &InteractionLaw, t_final: f64, mut observer: F) -> Ensemble
where
    F: FnMut(u64, f64, &[f64]),
{
    let steps = step_count(t_final, e.dt);
    observer(e.iteration, e.t, &e.states);
    for _ in 0..steps {
        e.step(law);
        observer(e.iteration, e.t, &e.states);
    }
    e
}

/// Quasi-invariant run: the law is materialized from the regime, the pair
/// gate becomes Bernoulli(dt/eps), and dt must not exceed eps.
pub fn run_quasi_invariant<F>(
    f0: &InitialCondition,
    n: usize,
    dt: f64,
    seed: u64,
    regime: &ScalingRegime,
    eps: f64,
    t_final: f64,
    observer: F,
) -> Result<(Ensemble, InteractionLaw, AdmissibilityReport)>
where
    F: FnMut(u64, f64, &[f64]),
{
    if dt > eps {
        return Err(Error::TimeStepTooLarge { dt, bound: eps, context: "dt <= eps" });
    }
    let (law, report) = regime.materialize(eps)?;
    let e = Ensemble::from_initial_condition(f0, n, dt, seed, dt / eps)?;
    let e = run(e, &law, t_final, observer);
    Ok((e, law, report))
}

// ---------------------------------------------------------------------------
// Histograms and ensemble statistics
// ---------------------------------------------------------------------------

/// Binning request: explicit edges or a regular grid over a range.
#[derive(Debug, Clone)]
pub enum BinSpec {
    Edges(Vec<f64>),
    Regular { lo: f64, hi: f64, bins: usize },
}

/// Density histogram normalized so that the integral over the covered range
/// equals the fraction of samples falling inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
    density: Vec<f64>,
    n_samples: usize,
    below: u64,
    above: u64,
}

impl Histogram {
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Samples below/above the covered range.
    pub fn overflow(&self) -> (u64, u64) {
        (self.below, self.above)
    }

    pub fn bin_center(&self, b: usize) -> f64 {
        0.5 * (self.edges[b] + self.edges[b + 1])
    }

    pub fn bin_width(&self, b: usize) -> f64 {
        self.edges[b + 1] - self.edges[b]
    }

    /// Fraction of samples inside the covered range.
    pub fn covered_fraction(&self) -> f64 {
        (self.n_samples as u64 - self.below - self.above) as f64 / self.n_samples as f64
    }

    /// Integral of the density over the covered range.
    pub fn mass(&self) -> f64 {
        (0..self.density.len()).map(|b| self.density[b] * self.bin_width(b)).sum()
    }

    /// L1 distance to a reference density sampled at the bin centers:
    /// sum_b |density_b - pdf(center_b)| * width_b.
    pub fn l1_distance_to<F: Fn(f64) -> f64>(&self, pdf: F) -> f64 {
        (0..self.density.len())
            .map(|b| (self.density[b] - pdf(self.bin_center(b))).abs() * self.bin_width(b))
            .sum()
    }
}

/// Build a histogram. Empty samples and degenerate ranges are rejected.
pub fn histogram(states: &[f64], spec: &BinSpec) -> Result<Histogram> {
    if states.is_empty() {
        return Err(Error::EmptyStates);
    }
    let edges: Vec<f64> = match spec {
        BinSpec::Edges(edges) => {
            if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidHistogram(
                    "edges must be strictly increasing with at least one bin".into(),
                ));
            }
            edges.clone()
        }
        BinSpec::Regular { lo, hi, bins } => {
            if *bins == 0 {
                return Err(Error::InvalidHistogram("need at least one bin".into()));
            }
            if !(lo < hi) {
                return Err(Error::InvalidHistogram(format!("degenerate range [{lo}, {hi}]")));
            }
            (0..=*bins).map(|b| lo + (hi - lo) * b as f64 / *bins as f64).collect()
        }
    };
    let nbins = edges.len() - 1;
    let lo = edges[0];
    let hi = edges[nbins];
    let mut counts = vec![0u64; nbins];
    let mut below = 0u64;
    let mut above = 0u64;
    let regular_width = match spec {
        BinSpec::Regular { .. } => Some((hi - lo) / nbins as f64),
        BinSpec::Edges(_) => None,
    };
    for &v in states {
        if v < lo {
            below += 1;
        } else if v > hi {
            above += 1;
        } else if v == hi {
            counts[nbins - 1] += 1; // closed right edge on the last bin
        } else if let Some(w) = regular_width {
            let idx = (((v - lo) / w) as usize).min(nbins - 1);
            // Rounding at a bin boundary can land one bin high.
            let idx = if v < edges[idx] { idx - 1 } else { idx };
            counts[idx] += 1;
        } else {
            let idx = edges.partition_point(|&e| e <= v) - 1;
            counts[idx.min(nbins - 1)] += 1;
        }
    }
    let n = states.len();
    let density = counts
        .iter()
        .enumerate()
        .map(|(b, &c)| c as f64 / (n as f64 * (edges[b + 1] - edges[b])))
        .collect();
    Ok(Histogram { edges, counts, density, n_samples: n, below, above })
}

/// Default binning: 100 bins over [min, max], clipped to the 0.1%-99.9%
/// sample quantiles when `clip_tails` is set (fat-tailed data).
pub fn default_bin_spec(states: &[f64], clip_tails: bool) -> Result<BinSpec> {
    if states.is_empty() {
        return Err(Error::EmptyStates);
    }
    let (lo, hi) = if clip_tails {
        let mut sorted = states.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| sorted[((p * (sorted.len() - 1) as f64).round() as usize).min(sorted.len() - 1)];
        (q(0.001), q(0.999))
    } else {
        let lo = states.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = states.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    if !(lo < hi) {
        return Err(Error::InvalidHistogram(format!("degenerate sample range [{lo}, {hi}]")));
    }
    Ok(BinSpec::Regular { lo, hi, bins: 100 })
}

/// Empirical raw moment (1/N) sum v^n, n <= 8, in compensated summation.
pub fn ensemble_moment(states: &[f64], n: u32) -> Result<f64> {
    if n > 8 {
        return Err(Error::MomentOrderTooLarge(n));
    }
    if states.is_empty() {
        return Err(Error::EmptyStates);
    }
    let powers: Vec<f64> = states.iter().map(|&v| v.powi(n as i32)).collect();
    Ok(pairwise_sum(&powers) / states.len() as f64)
}

/// Empirical variance M2 - M1^2 with a nonnegativity clamp at -1e-12.
pub fn ensemble_variance(states: &[f64]) -> Result<f64> {
    let m1 = ensemble_moment(states, 1)?;
    let m2 = ensemble_moment(states, 2)?;
    let var = m2 - m1 * m1;
    debug_assert!(var >= -1e-12, "variance {var} beyond clamp tolerance");
    Ok(var.max(0.0))
}

/// Observer that records named scalar statistics each iteration.
#[derive(Debug, Clone)]
pub struct TraceRecorder {
    stats: Vec<TraceStat>,
    times: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceStat {
    Moment(u32),
    Variance,
    Min,
    Max,
}

impl TraceStat {
    pub fn name(&self) -> String {
        match self {
            TraceStat::Moment(n) => format!("M{n}"),
            TraceStat::Variance => "var".into(),
            TraceStat::Min => "min".into(),
            TraceStat::Max => "max".into(),
        }
    }
}

impl TraceRecorder {
    pub fn new(stats: Vec<TraceStat>) -> Self {
        Self { stats, times: Vec::new(), rows: Vec::new() }
    }

    pub fn observe(&mut self, _iteration: u64, t: f64, states: &[f64]) {
        let row = self
            .stats
            .iter()
            .map(|s| match s {
                TraceStat::Moment(n) => ensemble_moment(states, *n).unwrap(),
                TraceStat::Variance => ensemble_variance(states).unwrap(),
                TraceStat::Min => states.iter().cloned().fold(f64::INFINITY, f64::min),
                TraceStat::Max => states.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            })
            .collect();
        self.times.push(t);
        self.rows.push(row);
    }

    pub fn names(&self) -> Vec<String> {
        self.stats.iter().map(TraceStat::name).collect()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[idx]).collect()
    }
}
