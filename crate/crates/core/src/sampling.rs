//! Deterministic, reproducible sampling.
//!
//! Randomness is organized as counter-based keyed streams: a stream is fully
//! determined by a 64-bit seed plus a [`StreamKey`], so any worker can
//! reconstruct the stream for (iteration, pair) without observing draw order
//! elsewhere. This is what makes the pair-interaction loops data-parallel
//! with bit-reproducible output.

use crate::equilibria::AnalyticDistribution;
use crate::error::{Error, Result};
use crate::montecarlo::Histogram;
use crate::quadrature;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream coordinates: which phase of which iteration is drawing, and for
/// which lane/index (vertex and pair, particle, ...).
///
/// Distinct keys yield statistically independent streams; identical
/// (seed, key) pairs yield identical draw sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub domain: u64,
    pub iteration: u64,
    pub lane: u64,
    pub index: u64,
}

impl StreamKey {
    pub fn new(domain: u64, iteration: u64, lane: u64, index: u64) -> Self {
        Self { domain, iteration, lane, index }
    }
}

/// A keyed counter-based random stream (splitmix-style with a per-stream
/// odd increment derived from the key).
#[derive(Debug, Clone)]
pub struct RngStream {
    state: u64,
    gamma: u64,
}

impl RngStream {
    pub fn new(seed: u64, key: StreamKey) -> Self {
        // Chained injective absorption of the key components.
        let mut h = mix64(seed ^ GOLDEN);
        for k in [key.domain, key.iteration, key.lane, key.index] {
            h = mix64(h ^ k.wrapping_mul(GOLDEN));
        }
        let gamma = mix64(h ^ 0xD605_BBB5_8C8A_BC2D) | 1;
        Self { state: h, gamma }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(self.gamma);
        mix64(self.state)
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in (0, 1]; safe argument for a logarithm.
    #[inline]
    fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased integer in [0, n).
    pub fn next_u64_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // Lemire's widening-multiply rejection method.
        loop {
            let x = self.next_u64();
            let m = (x as u128) * (n as u128);
            let low = m as u64;
            if low >= n {
                return (m >> 64) as u64;
            }
            // low < n: reject only the biased fringe.
            let threshold = n.wrapping_neg() % n;
            if low >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Bernoulli draw: 1 with probability `r`.
    pub fn bernoulli(&mut self, r: f64) -> Result<u8> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::ProbabilityOutOfRange(r));
        }
        // next_f64 < 1 strictly, so r = 1 always fires and r = 0 never does.
        Ok(u8::from(self.next_f64() < r))
    }

    /// Uniform on [lo, hi).
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box–Muller; consumes exactly two uniforms.
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Gamma(shape, scale) via Marsaglia–Tsang squeeze; shape < 1 handled by
    /// the boost `Gamma(shape+1) * U^{1/shape}`.
    pub fn gamma(&mut self, shape: f64, scale: f64) -> Result<f64> {
        if shape <= 0.0 {
            return Err(Error::NonPositiveParameter { name: "shape", value: shape });
        }
        if scale <= 0.0 {
            return Err(Error::NonPositiveParameter { name: "scale", value: scale });
        }
        if shape < 1.0 {
            let boosted = self.gamma(shape + 1.0, 1.0)?;
            let u = self.next_f64_open();
            return Ok(scale * boosted * u.powf(1.0 / shape));
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.standard_normal();
            let t = 1.0 + c * x;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u = self.next_f64_open();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return Ok(scale * d * v);
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return Ok(scale * d * v);
            }
        }
    }

    /// Inverse gamma(shape, scale): 1/X with X ~ Gamma(shape, 1/scale).
    pub fn inverse_gamma(&mut self, shape: f64, scale: f64) -> Result<f64> {
        if scale <= 0.0 {
            return Err(Error::NonPositiveParameter { name: "scale", value: scale });
        }
        let x = self.gamma(shape, 1.0 / scale)?;
        Ok(1.0 / x)
    }
}

/// Fisher–Yates shuffle driven by one keyed stream; the permutation is a
/// deterministic function of (seed, key).
pub fn shuffle<T>(values: &mut [T], stream: &mut RngStream) {
    for i in (1..values.len()).rev() {
        let j = stream.next_u64_below(i as u64 + 1) as usize;
        values.swap(i, j);
    }
}

// ---------------------------------------------------------------------------
// Random coefficients
// ---------------------------------------------------------------------------

/// A scalar random variable with closed-form low-order moments and exact
/// support bounds. Houses the interaction coefficients p, q and the
/// fluctuation eta of the quasi-invariant scalings.
#[derive(Debug, Clone, PartialEq)]
pub enum RandomCoefficient {
    Deterministic(f64),
    Uniform { lo: f64, hi: f64 },
    TwoPoint { x1: f64, p1: f64, x2: f64, p2: f64 },
    AffineOfBase { offset: f64, scale: f64, base: Box<RandomCoefficient> },
}

/// Flattened form: affine maps folded away.
#[derive(Debug, Clone, PartialEq)]
enum Canonical {
    Atoms(Vec<(f64, f64)>),
    Interval { lo: f64, hi: f64 },
}

impl RandomCoefficient {
    /// eta with mean 0, unit variance: Uniform(-sqrt(3), sqrt(3)).
    pub fn uniform_symmetric_unit() -> Self {
        let r = 3f64.sqrt();
        RandomCoefficient::Uniform { lo: -r, hi: r }
    }

    /// eta with mean 0, unit variance: +/-1 with probability 1/2 each.
    pub fn two_point_symmetric_unit() -> Self {
        RandomCoefficient::TwoPoint { x1: -1.0, p1: 0.5, x2: 1.0, p2: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RandomCoefficient::Deterministic(c) => {
                if !c.is_finite() {
                    return Err(Error::InvalidCoefficient(format!("non-finite constant {c}")));
                }
            }
            RandomCoefficient::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidCoefficient(format!(
                        "uniform interval [{lo}, {hi}] must be finite and nondegenerate"
                    )));
                }
            }
            RandomCoefficient::TwoPoint { x1, p1, x2, p2 } => {
                if !(*p1 >= 0.0 && *p2 >= 0.0 && (p1 + p2 - 1.0).abs() <= 1e-12) {
                    return Err(Error::InvalidCoefficient(format!(
                        "two-point weights ({p1}, {p2}) must be nonnegative and sum to 1"
                    )));
                }
                if !(x1.is_finite() && x2.is_finite()) {
                    return Err(Error::InvalidCoefficient("non-finite atom".into()));
                }
            }
            RandomCoefficient::AffineOfBase { offset, scale, base } => {
                if !(offset.is_finite() && scale.is_finite()) {
                    return Err(Error::InvalidCoefficient("non-finite affine map".into()));
                }
                base.validate()?;
            }
        }
        Ok(())
    }

    fn canonical(&self) -> Canonical {
        match self {
            RandomCoefficient::Deterministic(c) => Canonical::Atoms(vec![(*c, 1.0)]),
            RandomCoefficient::Uniform { lo, hi } => Canonical::Interval { lo: *lo, hi: *hi },
            RandomCoefficient::TwoPoint { x1, p1, x2, p2 } => {
                Canonical::Atoms(vec![(*x1, *p1), (*x2, *p2)])
            }
            RandomCoefficient::AffineOfBase { offset, scale, base } => match base.canonical() {
                Canonical::Atoms(atoms) => Canonical::Atoms(
                    atoms.into_iter().map(|(x, w)| (offset + scale * x, w)).collect(),
                ),
                Canonical::Interval { lo, hi } => {
                    if *scale == 0.0 {
                        Canonical::Atoms(vec![(*offset, 1.0)])
                    } else {
                        let a = offset + scale * lo;
                        let b = offset + scale * hi;
                        Canonical::Interval { lo: a.min(b), hi: a.max(b) }
                    }
                }
            },
        }
    }

    /// Exact lower bound of the support; no draw falls below it.
    pub fn support_min(&self) -> f64 {
        match self.canonical() {
            Canonical::Atoms(atoms) => {
                atoms.iter().map(|&(x, _)| x).fold(f64::INFINITY, f64::min)
            }
            Canonical::Interval { lo, .. } => lo,
        }
    }

    /// Exact upper bound of the support.
    pub fn support_max(&self) -> f64 {
        match self.canonical() {
            Canonical::Atoms(atoms) => {
                atoms.iter().map(|&(x, _)| x).fold(f64::NEG_INFINITY, f64::max)
            }
            Canonical::Interval { hi, .. } => hi,
        }
    }

    pub fn mean(&self) -> f64 {
        self.raw_moment(1)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.raw_moment(2) - m * m
    }

    /// Closed-form raw moment <X^k>.
    pub fn raw_moment(&self, k: u32) -> f64 {
        match self.canonical() {
            Canonical::Atoms(atoms) => {
                atoms.iter().map(|&(x, w)| w * x.powi(k as i32)).sum()
            }
            Canonical::Interval { lo, hi } => uniform_raw_moment(lo, hi, k),
        }
    }

    /// Fractional moment <X^s> for real s.
    ///
    /// Closed form on atoms; adaptive quadrature (absolute tolerance 1e-10)
    /// on intervals, per the tail-classification contract. Negative
    /// non-integer powers additionally require a strictly positive support
    /// except for integrable endpoint singularities on intervals.
    pub fn fractional_moment(&self, s: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(1.0);
        }
        if s.fract() == 0.0 && s > 0.0 && s <= 32.0 {
            return Ok(self.raw_moment(s as u32));
        }
        match self.canonical() {
            Canonical::Atoms(atoms) => {
                let min = atoms.iter().map(|&(x, _)| x).fold(f64::INFINITY, f64::min);
                if min < 0.0 || (min == 0.0 && s < 0.0) {
                    return Err(Error::FractionalMomentUndefined { order: s, support_min: min });
                }
                Ok(atoms.iter().map(|&(x, w)| w * x.powf(s)).sum())
            }
            Canonical::Interval { lo, hi } => {
                if lo < 0.0 {
                    return Err(Error::FractionalMomentUndefined { order: s, support_min: lo });
                }
                if s <= -1.0 {
                    return Err(Error::FractionalMomentUndefined { order: s, support_min: lo });
                }
                if s < 0.0 {
                    // Integrable singularity at lo = 0: use the antiderivative.
                    return Ok((hi.powf(s + 1.0) - lo.powf(s + 1.0)) / ((s + 1.0) * (hi - lo)));
                }
                let w = hi - lo;
                Ok(quadrature::integrate(|x| x.powf(s), lo, hi, 1e-10) / w)
            }
        }
    }

    /// One draw from the coefficient's law.
    pub fn draw(&self, stream: &mut RngStream) -> f64 {
        match self.canonical() {
            Canonical::Atoms(atoms) => {
                if atoms.len() == 1 {
                    return atoms[0].0;
                }
                let u = stream.next_f64();
                let mut acc = 0.0;
                for &(x, w) in &atoms {
                    acc += w;
                    if u < acc {
                        return x;
                    }
                }
                atoms.last().unwrap().0
            }
            Canonical::Interval { lo, hi } => stream.uniform(lo, hi),
        }
    }
}

fn uniform_raw_moment(lo: f64, hi: f64, k: u32) -> f64 {
    if lo == hi {
        return lo.powi(k as i32);
    }
    let kk = k as i32;
    (hi.powi(kk + 1) - lo.powi(kk + 1)) / ((k as f64 + 1.0) * (hi - lo))
}

// ---------------------------------------------------------------------------
// Initial conditions
// ---------------------------------------------------------------------------

/// Initial laws the particle schemes can sample from.
#[derive(Debug, Clone)]
pub enum InitialCondition {
    UniformInterval(f64, f64),
    TwoPointSym(f64),
    /// Two-point +/-x with exactly half the population on each atom. This
    /// pins the empirical mean to zero exactly, which stabilizes the
    /// conserved-energy regime where the zero mean is an unstable
    /// equilibrium and any sampling error in it grows exponentially.
    TwoPointSymBalanced(f64),
    Analytic(AnalyticDistribution),
    Empirical(Histogram),
}

impl InitialCondition {
    pub fn mean(&self) -> Option<f64> {
        match self {
            InitialCondition::UniformInterval(a, b) => Some(0.5 * (a + b)),
            InitialCondition::TwoPointSym(_) | InitialCondition::TwoPointSymBalanced(_) => {
                Some(0.0)
            }
            InitialCondition::Analytic(d) => d.mean(),
            InitialCondition::Empirical(_) => None,
        }
    }

    /// Pointwise density, where one exists (atomic laws have none).
    pub fn pdf(&self, v: f64) -> Result<f64> {
        match self {
            InitialCondition::UniformInterval(a, b) => {
                Ok(if v >= *a && v <= *b { 1.0 / (b - a) } else { 0.0 })
            }
            InitialCondition::TwoPointSym(_) | InitialCondition::TwoPointSymBalanced(_) => {
                Err(Error::PdfUndefined)
            }
            InitialCondition::Analytic(d) => d.pdf(v),
            InitialCondition::Empirical(h) => {
                let edges = h.edges();
                if v < edges[0] || v > edges[edges.len() - 1] {
                    return Ok(0.0);
                }
                let idx = edges.partition_point(|&e| e <= v).saturating_sub(1);
                Ok(h.density()[idx.min(h.density().len() - 1)])
            }
        }
    }

    pub(crate) fn draw(&self, stream: &mut RngStream) -> Result<f64> {
        match self {
            InitialCondition::UniformInterval(a, b) => Ok(stream.uniform(*a, *b)),
            InitialCondition::TwoPointSym(x) => {
                Ok(if stream.next_f64() < 0.5 { -*x } else { *x })
            }
            InitialCondition::TwoPointSymBalanced(_) => Err(Error::Precondition(
                "balanced two-point samples are drawn population-wide, not one by one".into(),
            )),
            InitialCondition::Analytic(d) => d.draw(stream),
            InitialCondition::Empirical(h) => {
                // Pick a bin by its sample mass, then uniform within the bin.
                let total: u64 = h.counts().iter().sum();
                debug_assert!(total > 0);
                let target = stream.next_u64_below(total);
                let mut acc = 0u64;
                for (b, &c) in h.counts().iter().enumerate() {
                    acc += c;
                    if target < acc {
                        return Ok(stream.uniform(h.edges()[b], h.edges()[b + 1]));
                    }
                }
                Ok(h.edges()[h.edges().len() - 1])
            }
        }
    }
}

/// Sample `n` i.i.d. states from `f0`. The pairing scheme requires an even
/// population, so odd counts are rejected instead of silently padded.
pub fn sample_initial_condition(
    stream: &mut RngStream,
    f0: &InitialCondition,
    n: usize,
) -> Result<Vec<f64>> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::OddParticleCount(n));
    }
    if let InitialCondition::UniformInterval(a, b) = f0 {
        if !(a < b) {
            return Err(Error::InvalidCoefficient(format!(
                "uniform initial interval [{a}, {b}] must be nondegenerate"
            )));
        }
    }
    if let InitialCondition::TwoPointSymBalanced(x) = f0 {
        // Exactly n/2 on each atom; the first step's pairing permutation
        // randomizes positions.
        let mut states = vec![*x; n];
        for s in states.iter_mut().take(n / 2) {
            *s = -*x;
        }
        return Ok(states);
    }
    (0..n).map(|_| f0.draw(stream)).collect()
}
