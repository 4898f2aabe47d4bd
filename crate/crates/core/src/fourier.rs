//! Empirical characteristic functions and the s-Fourier metrics.
//!
//! The metric d_s(mu, nu) = sup_{xi != 0} |mu^(xi) - nu^(xi)| / |xi|^s is
//! approximated by its maximum over a symmetric log-spaced grid. For pairs
//! with matching low-order moments the ratio is bounded near zero and decays
//! at infinity, so a truncated grid captures the supremum; the grid bounds
//! and resolution are configuration parameters and any finite grid
//! under-estimates the true supremum.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kinetics::InteractionLaw;
use crate::math::{linear_fit, pairwise_sum};
use crate::montecarlo::Histogram;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Complex value as (re, im).
pub type Complex = (f64, f64);

#[inline]
fn cabs((re, im): Complex) -> f64 {
    re.hypot(im)
}

#[inline]
fn cmul(a: Complex, b: Complex) -> Complex {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

/// Symmetric log-spaced frequency grid excluding zero.
#[derive(Debug, Clone, PartialEq)]
pub struct XiGrid {
    xis: Vec<f64>,
}

impl XiGrid {
    /// `per_side` log-spaced magnitudes in [min_abs, max_abs], mirrored to
    /// negative frequencies; ascending order.
    pub fn log_symmetric(min_abs: f64, max_abs: f64, per_side: usize) -> Result<Self> {
        if !(min_abs > 0.0 && max_abs > min_abs) || per_side < 2 {
            return Err(Error::InvalidHistogram(format!(
                "invalid xi grid: [{min_abs}, {max_abs}] x {per_side}"
            )));
        }
        let ratio = max_abs / min_abs;
        let mut pos: Vec<f64> = (0..per_side)
            .map(|j| min_abs * ratio.powf(j as f64 / (per_side - 1) as f64))
            .collect();
        let mut xis: Vec<f64> = pos.iter().rev().map(|&x| -x).collect();
        xis.append(&mut pos);
        Ok(Self { xis })
    }

    /// Default grid of the distance diagnostics: |xi| in [1e-4, 1e2],
    /// 512 points per side.
    pub fn default_grid() -> Self {
        Self::log_symmetric(1e-4, 1e2, 512).unwrap()
    }

    pub fn xis(&self) -> &[f64] {
        &self.xis
    }

    pub fn len(&self) -> usize {
        self.xis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xis.is_empty()
    }
}

/// A characteristic function tabulated on a grid, together with the moments
/// the caller declares for finiteness checks of d_s.
#[derive(Debug, Clone)]
pub struct Cf {
    grid: Arc<XiGrid>,
    values: Vec<Complex>,
    n_samples: Option<usize>,
    declared_moments: Vec<f64>,
}

impl Cf {
    pub fn grid(&self) -> &XiGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex] {
        &self.values
    }

    pub fn n_samples(&self) -> Option<usize> {
        self.n_samples
    }

    /// Declare raw moments m_1, m_2, ... used by the finiteness check.
    pub fn with_declared_moments(mut self, moments: Vec<f64>) -> Self {
        self.declared_moments = moments;
        self
    }

    pub fn declared_moments(&self) -> &[f64] {
        &self.declared_moments
    }
}

/// Empirical characteristic function (1/n) sum_k e^{-i xi v_k} on the grid.
pub fn empirical_cf(states: &[f64], grid: &Arc<XiGrid>) -> Result<Cf> {
    if states.is_empty() {
        return Err(Error::EmptyStates);
    }
    let n = states.len() as f64;
    let eval = |&xi: &f64| -> Complex {
        // Compensated accumulation per grid point keeps the reduction
        // deterministic and accurate for large n.
        let cos: Vec<f64> = states.iter().map(|&v| (xi * v).cos()).collect();
        let sin: Vec<f64> = states.iter().map(|&v| (xi * v).sin()).collect();
        (pairwise_sum(&cos) / n, -pairwise_sum(&sin) / n)
    };
    #[cfg(feature = "parallel")]
    let values: Vec<Complex> = grid.xis().par_iter().map(eval).collect();
    #[cfg(not(feature = "parallel"))]
    let values: Vec<Complex> = grid.xis().iter().map(eval).collect();
    Ok(Cf { grid: Arc::clone(grid), values, n_samples: Some(states.len()), declared_moments: vec![] })
}

/// Tabulate an analytic transform xi -> (re, im) on the grid.
pub fn analytic_cf<F: Fn(f64) -> Complex>(grid: &Arc<XiGrid>, f: F) -> Cf {
    let values = grid.xis().iter().map(|&xi| f(xi)).collect();
    Cf { grid: Arc::clone(grid), values, n_samples: None, declared_moments: vec![] }
}

/// Transform of a Dirac mass at `a`: e^{-i a xi}.
pub fn cf_dirac(a: f64) -> impl Fn(f64) -> Complex {
    move |xi| ((a * xi).cos(), -(a * xi).sin())
}

/// Transform of a Gaussian with the given mean and variance.
pub fn cf_gaussian(mean: f64, variance: f64) -> impl Fn(f64) -> Complex {
    move |xi| {
        let mag = (-0.5 * variance * xi * xi).exp();
        ((mean * xi).cos() * mag, -(mean * xi).sin() * mag)
    }
}

/// Transform of the uniform law on [a, b].
pub fn cf_uniform(a: f64, b: f64) -> impl Fn(f64) -> Complex {
    move |xi| {
        let half_w = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let sinc = if xi.abs() < 1e-300 { 1.0 } else { (xi * half_w).sin() / (xi * half_w) };
        cmul(((mid * xi).cos(), -(mid * xi).sin()), (sinc, 0.0))
    }
}

/// Result of a grid distance evaluation. When the declared moments of the
/// two sides differ (finiteness is then not guaranteed as the grid refines
/// toward zero) the value is still the grid maximum and the flag is set.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    pub value: f64,
    pub moment_mismatch: bool,
}

fn required_moment_orders(s: f64) -> usize {
    if s <= 1.0 {
        0
    } else if (s - s.round()).abs() < 1e-12 {
        s.round() as usize - 1
    } else {
        s.floor() as usize
    }
}

/// Grid approximation of d_s(a, b) = sup |a^ - b^| / |xi|^s.
pub fn fourier_distance(a: &Cf, b: &Cf, s: f64) -> Result<DistanceReport> {
    if s <= 0.0 {
        return Err(Error::Precondition(format!("d_s requires s > 0, got {s}")));
    }
    if a.grid.xis() != b.grid.xis() {
        return Err(Error::GridMismatch);
    }
    let mut value: f64 = 0.0;
    for ((&xi, &va), &vb) in a.grid.xis().iter().zip(&a.values).zip(&b.values) {
        let diff = cabs((va.0 - vb.0, va.1 - vb.1));
        value = value.max(diff / xi.abs().powf(s));
    }
    let needed = required_moment_orders(s);
    let mut mismatch = false;
    for k in 0..needed {
        match (a.declared_moments.get(k), b.declared_moments.get(k)) {
            (Some(ma), Some(mb)) => {
                if (ma - mb).abs() > 1e-9 * ma.abs().max(mb.abs()).max(1.0) {
                    mismatch = true;
                }
            }
            _ => mismatch = true,
        }
    }
    Ok(DistanceReport { value, moment_mismatch: mismatch })
}

/// Dilation identity sup |a^(c xi) - b^(c xi)| / |xi|^s = |c|^s d_s(a, b):
/// the left side is evaluated on `grid`, the right side on the dilated grid.
pub fn dilation_scaling_check<F, G>(
    f: F,
    g: G,
    grid: &XiGrid,
    s: f64,
    c: f64,
) -> (f64, f64)
where
    F: Fn(f64) -> Complex,
    G: Fn(f64) -> Complex,
{
    let diff = |xi: f64| {
        let (fa, fb) = (f(xi), g(xi));
        cabs((fa.0 - fb.0, fa.1 - fb.1))
    };
    let mut lhs: f64 = 0.0;
    let mut sup_on_dilated: f64 = 0.0;
    for &xi in grid.xis() {
        lhs = lhs.max(diff(c * xi) / xi.abs().powf(s));
        let eta = c * xi;
        sup_on_dilated = sup_on_dilated.max(diff(eta) / eta.abs().powf(s));
    }
    (lhs, c.abs().powf(s) * sup_on_dilated)
}

/// Density-weighted graph distance D_s = sum_i rho_i d_s(F_i, G_i).
/// Vertices with rho_i < 1e-12 contribute nothing (their normalized
/// distribution is undefined).
pub fn graph_distance(rho: &[f64], f: &[Cf], g: &[Cf], s: f64) -> Result<f64> {
    if rho.len() != f.len() || rho.len() != g.len() {
        return Err(Error::Precondition(format!(
            "component counts differ: {} masses, {} and {} transforms",
            rho.len(),
            f.len(),
            g.len()
        )));
    }
    if rho.iter().any(|&r| r < 0.0) {
        return Err(Error::InvalidDensity("negative vertex mass".into()));
    }
    let mut total = 0.0;
    for ((&r, fi), gi) in rho.iter().zip(f).zip(g) {
        if r < 1e-12 {
            continue;
        }
        total += r * fourier_distance(fi, gi, s)?.value;
    }
    Ok(total)
}

/// L2 norm of a piecewise-constant histogram density:
/// sqrt(sum_b density_b^2 * width_b).
pub fn l2_histogram_norm(h: &Histogram) -> f64 {
    (0..h.density().len())
        .map(|b| h.density()[b] * h.density()[b] * h.bin_width(b))
        .sum::<f64>()
        .sqrt()
}

/// A priori L2 growth envelope ||f0|| e^{(min{<p^-1/2>, <q^-1/2>} - 1) t}.
/// A soft diagnostic: reported alongside runs, not asserted.
pub fn l2_growth_bound(law: &InteractionLaw, f0_l2_norm: f64, t: f64) -> Result<f64> {
    let inv_sqrt_p = law.p().fractional_moment(-0.5)?;
    let inv_sqrt_q = law.q().fractional_moment(-0.5)?;
    Ok(f0_l2_norm * ((inv_sqrt_p.min(inv_sqrt_q) - 1.0) * t).exp())
}

/// Least-squares slope of ln(values) over times, ignoring non-positive
/// entries. Returns (slope, standard error).
pub fn log_decay_slope(times: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Precondition("need at least 3 positive samples for a slope".into()));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (slope, _, se) = linear_fit(&xs, &ys);
    Ok((slope, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{RngStream, StreamKey};

    fn grid() -> Arc<XiGrid> {
        Arc::new(XiGrid::default_grid())
    }

    #[test]
    fn grid_shape() {
        let g = XiGrid::log_symmetric(1e-2, 10.0, 4).unwrap();
        assert_eq!(g.len(), 8);
        assert!(g.xis().windows(2).all(|w| w[0] < w[1]));
        assert!(g.xis().iter().all(|&x| x != 0.0));
        assert!(XiGrid::log_symmetric(0.0, 1.0, 4).is_err());
    }

    #[test]
    fn empirical_cf_basics() {
        let g = grid();
        // All states zero: transform identically one.
        let cf = empirical_cf(&[0.0; 10], &g).unwrap();
        assert!(cf.values().iter().all(|&(re, im)| re == 1.0 && im == 0.0));

        // States {-1, +1}: transform cos(xi), conjugate-symmetric, |.| <= 1.
        let cf = empirical_cf(&[-1.0, 1.0], &g).unwrap();
        for (&xi, &(re, im)) in g.xis().iter().zip(cf.values()) {
            assert!((re - xi.cos()).abs() < 1e-12);
            assert!(im.abs() < 1e-12);
        }
        let m = g.len();
        for j in 0..m / 2 {
            let (re_n, im_n) = cf.values()[j];
            let (re_p, im_p) = cf.values()[m - 1 - j];
            assert_eq!(re_n, re_p);
            assert_eq!(im_n, -im_p);
        }
        assert!(empirical_cf(&[], &g).is_err());
    }

    #[test]
    fn empirical_cf_matches_gaussian() {
        let g = grid();
        let mut stream = RngStream::new(5, StreamKey::new(0, 0, 0, 0));
        let n = 200_000;
        let states: Vec<f64> = (0..n).map(|_| stream.standard_normal()).collect();
        let cf = empirical_cf(&states, &g).unwrap();
        let band = 4.0 / (n as f64).sqrt();
        for (&xi, &v) in g.xis().iter().zip(cf.values()) {
            let expect = cf_gaussian(0.0, 1.0)(xi);
            assert!(cabs((v.0 - expect.0, v.1 - expect.1)) < band, "xi = {xi}");
            assert!(cabs(v) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn distance_identity_and_dirac_pair() {
        let g = grid();
        let a = analytic_cf(&g, cf_dirac(0.0)).with_declared_moments(vec![0.0]);
        assert_eq!(fourier_distance(&a, &a, 2.0).unwrap().value, 0.0);

        // d_1(delta_0, delta_a) = |a|, approached as xi -> 0.
        let b = analytic_cf(&g, cf_dirac(0.7)).with_declared_moments(vec![0.7]);
        let d1 = fourier_distance(&a, &b, 1.0).unwrap();
        assert!((d1.value - 0.7).abs() < 1e-6, "d1 = {}", d1.value);
        // s = 2 with different declared means: warning branch.
        let d2 = fourier_distance(&a, &b, 2.0).unwrap();
        assert!(d2.moment_mismatch);
        assert!(d2.value > 0.0);
    }

    #[test]
    fn distance_is_symmetric_and_triangular() {
        let g = grid();
        let a = analytic_cf(&g, cf_gaussian(0.0, 1.0));
        let b = analytic_cf(&g, cf_gaussian(0.0, 2.0));
        let c = analytic_cf(&g, cf_uniform(-1.5, 1.5));
        let dab = fourier_distance(&a, &b, 2.0).unwrap().value;
        let dba = fourier_distance(&b, &a, 2.0).unwrap().value;
        assert_eq!(dab, dba);
        let dac = fourier_distance(&a, &c, 2.0).unwrap().value;
        let dcb = fourier_distance(&c, &b, 2.0).unwrap().value;
        assert!(dab <= dac + dcb + 1e-12);
    }

    #[test]
    fn grid_refinement_never_shrinks_distances() {
        // Odd per-side counts with shared endpoints nest the coarse grid in
        // the fine one, so the max over the fine grid dominates exactly.
        let coarse = Arc::new(XiGrid::log_symmetric(1e-3, 1e2, 65).unwrap());
        let fine = Arc::new(XiGrid::log_symmetric(1e-3, 1e2, 129).unwrap());
        let d_of = |g: &Arc<XiGrid>| {
            let a = analytic_cf(g, cf_gaussian(0.0, 1.0));
            let b = analytic_cf(g, cf_uniform(-2.0, 2.0));
            fourier_distance(&a, &b, 2.0).unwrap().value
        };
        assert!(d_of(&fine) >= d_of(&coarse) - 1e-15);
    }

    #[test]
    fn interpolation_inequality_on_grid() {
        // d_1 <= 2 sqrt(2) d_2^{1/2} holds on any common grid because
        // |diff|/|xi| = sqrt(|diff|^2/xi^2) <= sqrt(2 |diff|/xi^2).
        let g = grid();
        let mut stream = RngStream::new(77, StreamKey::new(1, 0, 0, 0));
        for trial in 0..20 {
            let n = 2000;
            let shift = stream.uniform(-1.0, 1.0);
            let spread = stream.uniform(0.5, 2.0);
            let xs: Vec<f64> =
                (0..n).map(|_| shift + spread * (stream.next_f64() - 0.5)).collect();
            let ys: Vec<f64> = (0..n).map(|_| shift + stream.standard_normal()).collect();
            // Recentre both samples to the exact common mean.
            let mx = crate::math::mean(&xs);
            let my = crate::math::mean(&ys);
            let xs: Vec<f64> = xs.iter().map(|v| v - mx + shift).collect();
            let ys: Vec<f64> = ys.iter().map(|v| v - my + shift).collect();
            let a = empirical_cf(&xs, &g).unwrap().with_declared_moments(vec![shift]);
            let b = empirical_cf(&ys, &g).unwrap().with_declared_moments(vec![shift]);
            let d1 = fourier_distance(&a, &b, 1.0).unwrap().value;
            let d2 = fourier_distance(&a, &b, 2.0).unwrap().value;
            assert!(
                d1 <= 2.0 * 2f64.sqrt() * d2.sqrt() + 1e-12,
                "trial {trial}: d1 = {d1}, bound = {}",
                2.0 * 2f64.sqrt() * d2.sqrt()
            );
        }
    }

    #[test]
    fn dilation_scaling() {
        let g = XiGrid::log_symmetric(1e-3, 1e2, 128).unwrap();
        let f = cf_dirac(0.0);
        let h = cf_dirac(1.3);
        let (lhs, rhs) = dilation_scaling_check(&f, &h, &g, 2.0, 1.0);
        assert!((lhs - rhs).abs() < 1e-12);
        let (lhs, rhs) = dilation_scaling_check(&f, &h, &g, 2.0, 2.0);
        assert!((lhs - rhs).abs() < 1e-10 * rhs.max(1.0), "{lhs} vs {rhs}");
        let (lhs, rhs) = dilation_scaling_check(&f, &h, &g, 1.0, 0.5);
        assert!((lhs - rhs).abs() < 1e-10 * rhs.max(1.0));
    }

    #[test]
    fn graph_distance_cases() {
        let g = grid();
        let d0 = analytic_cf(&g, cf_dirac(0.0));
        let d1 = analytic_cf(&g, cf_dirac(1.0));
        let d2 = analytic_cf(&g, cf_dirac(2.0));
        // Identical components: zero.
        assert_eq!(
            graph_distance(&[0.5, 0.5], &[d0.clone(), d1.clone()], &[d0.clone(), d1.clone()], 1.0)
                .unwrap(),
            0.0
        );
        // Single vertex reduces to d_s.
        let single = graph_distance(&[1.0], &[d0.clone()], &[d1.clone()], 1.0).unwrap();
        let direct = fourier_distance(&d0, &d1, 1.0).unwrap().value;
        assert_eq!(single, direct);
        // Weighted sum of per-vertex Dirac distances.
        let v = graph_distance(
            &[0.5, 0.5],
            &[d0.clone(), d0.clone()],
            &[d1.clone(), d2.clone()],
            1.0,
        )
        .unwrap();
        assert!((v - 1.5).abs() < 2e-6, "D_1 = {v}");
        // Near-empty vertices are skipped.
        let v = graph_distance(&[1.0, 1e-14], &[d0.clone(), d0.clone()], &[d0, d2], 1.0).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn histogram_l2_norm() {
        use crate::montecarlo::{histogram, BinSpec};
        // Uniform density 1/4 over width 4: norm 1/2.
        let states: Vec<f64> = (0..4000).map(|i| -1.0 + 4.0 * (i as f64 + 0.5) / 4000.0).collect();
        let h = histogram(&states, &BinSpec::Regular { lo: -1.0, hi: 3.0, bins: 10 }).unwrap();
        assert!((l2_histogram_norm(&h) - 0.5).abs() < 1e-12);
        // Everything in a single bin of width w: norm 1/sqrt(w).
        let h = histogram(&[0.5; 100], &BinSpec::Regular { lo: 0.0, hi: 2.0, bins: 1 }).unwrap();
        assert!((l2_histogram_norm(&h) - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn log_slope_fits_exponentials() {
        let times: Vec<f64> = (0..20).map(|k| 0.5 * k as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| 3.0 * (-0.275 * t).exp()).collect();
        let (slope, se) = log_decay_slope(&times, &values).unwrap();
        assert!((slope + 0.275).abs() < 1e-10);
        assert!(se < 1e-10);
    }
}
