//! Closed-form densities and time-dependent solutions arising in the
//! quasi-invariant limits: the inverse-gamma steady state of the
//! advection-diffusion regime, the transported self-similar profile of the
//! advection-dominated regime, the Gaussian and algebraic-tail states of the
//! conserved-energy regime, and the solvable two-vertex graph pair.

use crate::error::{Error, Result};
use crate::math::ln_gamma;
use crate::sampling::{InitialCondition, RngStream};

/// Tagged family of closed-form distributions.
#[derive(Debug, Clone)]
pub enum AnalyticDistribution {
    /// Inverse gamma with shape alpha > 0 and scale theta > 0, supported on
    /// v > 0. The quasi-invariant steady state uses alpha = 1 + 2 lambda /
    /// sigma^2 and theta = (2 lambda / sigma^2) M_1(0).
    InverseGamma { shape: f64, scale: f64 },
    /// Mirror image v -> -v of the inverse gamma, supported on v < 0
    /// (negative conserved mean).
    MirroredInverseGamma { shape: f64, scale: f64 },
    Gaussian { mean: f64, variance: f64 },
    DiracAtom { location: f64 },
    /// Exact solution of the pure-drift limit: e^{lambda t} f0(m + e^{lambda
    /// t} (v - m)).
    TransportSelfSimilar { f0: Box<InitialCondition>, lambda: f64, m10: f64, t: f64 },
    /// Symmetric algebraic-tail steady state of the conserved-energy regime
    /// with sigma > 0; energy m20, Pareto exponent 1 + 2 lambda / sigma^2.
    ConservedEnergyFatTail { lambda: f64, sigma_sq: f64, m20: f64 },
    GraphTwoVertexPair(TwoVertexSolution),
}

impl AnalyticDistribution {
    pub fn inverse_gamma(shape: f64, scale: f64) -> Result<Self> {
        if shape <= 0.0 {
            return Err(Error::NonPositiveParameter { name: "shape", value: shape });
        }
        if scale <= 0.0 {
            return Err(Error::NonPositiveParameter { name: "scale", value: scale });
        }
        Ok(AnalyticDistribution::InverseGamma { shape, scale })
    }

    /// Steady state of the advection-diffusion quasi-invariant limit for a
    /// conserved mean `m10`: inverse gamma for m10 > 0, its mirror image for
    /// m10 < 0, and the Dirac mass at zero for m10 = 0.
    pub fn quasi_invariant_equilibrium(lambda: f64, sigma_sq: f64, m10: f64) -> Result<Self> {
        if lambda <= 0.0 {
            return Err(Error::NonPositiveParameter { name: "lambda", value: lambda });
        }
        if sigma_sq <= 0.0 {
            return Err(Error::NonPositiveParameter { name: "sigma_sq", value: sigma_sq });
        }
        let ratio = 2.0 * lambda / sigma_sq;
        if m10 == 0.0 {
            return Ok(AnalyticDistribution::DiracAtom { location: 0.0 });
        }
        let shape = 1.0 + ratio;
        let scale = ratio * m10.abs();
        Ok(if m10 > 0.0 {
            AnalyticDistribution::InverseGamma { shape, scale }
        } else {
            AnalyticDistribution::MirroredInverseGamma { shape, scale }
        })
    }

    pub fn conserved_energy_fat_tail(lambda: f64, sigma_sq: f64, m20: f64) -> Result<Self> {
        if lambda <= 0.0 {
            return Err(Error::NonPositiveParameter { name: "lambda", value: lambda });
        }
        if sigma_sq <= 0.0 || sigma_sq >= 2.0 * lambda {
            return Err(Error::InadmissibleRegime(format!(
                "fat-tail state needs 0 < sigma^2 < 2*lambda, got sigma^2 = {sigma_sq}"
            )));
        }
        if m20 <= 0.0 {
            return Err(Error::NonPositiveParameter { name: "m20", value: m20 });
        }
        Ok(AnalyticDistribution::ConservedEnergyFatTail { lambda, sigma_sq, m20 })
    }

    /// Pointwise density. Atomic distributions have none.
    pub fn pdf(&self, v: f64) -> Result<f64> {
        match self {
            AnalyticDistribution::InverseGamma { shape, scale } => {
                Ok(inverse_gamma_pdf(*shape, *scale, v))
            }
            AnalyticDistribution::MirroredInverseGamma { shape, scale } => {
                Ok(inverse_gamma_pdf(*shape, *scale, -v))
            }
            AnalyticDistribution::Gaussian { mean, variance } => {
                let z = v - mean;
                Ok((-0.5 * z * z / variance).exp()
                    / (2.0 * std::f64::consts::PI * variance).sqrt())
            }
            AnalyticDistribution::DiracAtom { .. } => Err(Error::PdfUndefined),
            AnalyticDistribution::TransportSelfSimilar { f0, lambda, m10, t } => {
                let growth = (lambda * t).exp();
                Ok(growth * f0.pdf(m10 + growth * (v - m10))?)
            }
            AnalyticDistribution::ConservedEnergyFatTail { lambda, sigma_sq, m20 } => {
                let (a, b, exponent) = fat_tail_parameters(*lambda, *sigma_sq, *m20);
                let ln_c = fat_tail_ln_norm(a, b, exponent);
                Ok((ln_c - exponent * (a * v * v + b).ln()).exp())
            }
            AnalyticDistribution::GraphTwoVertexPair(sol) => {
                let (g1, g2) = sol.densities(v);
                Ok(g1 + g2)
            }
        }
    }

    /// Mean, where finite and well-defined.
    pub fn mean(&self) -> Option<f64> {
        match self {
            AnalyticDistribution::InverseGamma { shape, scale } => {
                (*shape > 1.0).then(|| scale / (shape - 1.0))
            }
            AnalyticDistribution::MirroredInverseGamma { shape, scale } => {
                (*shape > 1.0).then(|| -scale / (shape - 1.0))
            }
            AnalyticDistribution::Gaussian { mean, .. } => Some(*mean),
            AnalyticDistribution::DiracAtom { location } => Some(*location),
            AnalyticDistribution::TransportSelfSimilar { m10, .. } => Some(*m10),
            AnalyticDistribution::ConservedEnergyFatTail { .. } => Some(0.0),
            AnalyticDistribution::GraphTwoVertexPair(_) => None,
        }
    }

    /// Pareto exponent of algebraically decaying tails; None for slim tails.
    pub fn tail_exponent(&self) -> Option<f64> {
        match self {
            AnalyticDistribution::InverseGamma { shape, .. }
            | AnalyticDistribution::MirroredInverseGamma { shape, .. } => Some(*shape),
            AnalyticDistribution::ConservedEnergyFatTail { lambda, sigma_sq, .. } => {
                Some(1.0 + 2.0 * lambda / sigma_sq)
            }
            AnalyticDistribution::GraphTwoVertexPair(sol) => Some(1.0 + sol.shape_ratio()),
            _ => None,
        }
    }

    /// One draw. Only proper unit-mass distributions can be sampled.
    pub fn draw(&self, stream: &mut RngStream) -> Result<f64> {
        match self {
            AnalyticDistribution::InverseGamma { shape, scale } => {
                stream.inverse_gamma(*shape, *scale)
            }
            AnalyticDistribution::MirroredInverseGamma { shape, scale } => {
                Ok(-stream.inverse_gamma(*shape, *scale)?)
            }
            AnalyticDistribution::Gaussian { mean, variance } => {
                Ok(mean + variance.sqrt() * stream.standard_normal())
            }
            AnalyticDistribution::DiracAtom { location } => Ok(*location),
            AnalyticDistribution::TransportSelfSimilar { f0, lambda, m10, t } => {
                let x = f0.draw(stream)?;
                Ok(m10 + (-lambda * t).exp() * (x - m10))
            }
            AnalyticDistribution::ConservedEnergyFatTail { lambda, sigma_sq, m20 } => {
                // Scaled Student-t with nu = 1 + 2 lambda / sigma^2 degrees:
                // v = Z / sqrt(W / nu) * sqrt(b / (a nu)), W ~ chi^2_nu.
                let (a, b, _) = fat_tail_parameters(*lambda, *sigma_sq, *m20);
                let nu = 1.0 + 2.0 * lambda / sigma_sq;
                let z = stream.standard_normal();
                let w = stream.gamma(0.5 * nu, 2.0)?;
                Ok(z / (w / nu).sqrt() * (b / (a * nu)).sqrt())
            }
            AnalyticDistribution::GraphTwoVertexPair(_) => {
                Err(Error::SampleUndefined("two-vertex pair carries per-vertex masses"))
            }
        }
    }

    /// `n` i.i.d. draws.
    pub fn sample(&self, stream: &mut RngStream, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.draw(stream)).collect()
    }
}

fn inverse_gamma_pdf(shape: f64, scale: f64, v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    (shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * v.ln() - scale / v).exp()
}

/// Density (a v^2 + b)^{-exponent} parameters of the conserved-energy state.
fn fat_tail_parameters(lambda: f64, sigma_sq: f64, m20: f64) -> (f64, f64, f64) {
    (0.5 * sigma_sq, (lambda - 0.5 * sigma_sq) * m20, 1.0 + lambda / sigma_sq)
}

/// ln of the normalizing constant of (a v^2 + b)^{-g} over the real line:
/// C = sqrt(a) b^{g - 1/2} Gamma(g) / (sqrt(pi) Gamma(g - 1/2)).
fn fat_tail_ln_norm(a: f64, b: f64, g: f64) -> f64 {
    0.5 * a.ln() + (g - 0.5) * b.ln() + ln_gamma(g)
        - 0.5 * std::f64::consts::PI.ln()
        - ln_gamma(g - 0.5)
}

/// ln of the inverse-gamma normalizing constant theta^alpha / Gamma(alpha).
pub fn inverse_gamma_ln_norm(shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - ln_gamma(shape)
}

// ---------------------------------------------------------------------------
// Gaussian fixed point of the conserved-energy rule
// ---------------------------------------------------------------------------

/// Max over the grid of |g(xi) - g(p xi) g(q xi)| for the Gaussian transform
/// g(xi) = exp(-m20 xi^2 / 2) and the deterministic conserved-energy pair
/// (p_eps, q_eps). With p^2 + q^2 = 1 this vanishes to rounding.
pub fn gaussian_fixed_point_residual(
    lambda: f64,
    eps: f64,
    m20: f64,
    xi_grid: &[f64],
) -> Result<f64> {
    if lambda <= 0.0 {
        return Err(Error::NonPositiveParameter { name: "lambda", value: lambda });
    }
    let eps_max = 1.0 / lambda;
    if eps <= 0.0 || eps >= eps_max {
        return Err(Error::EpsilonTooLarge { eps, eps_max });
    }
    let p = 1.0 - eps * lambda;
    let q = (2.0 * lambda * eps).sqrt() * (1.0 - eps * lambda / 2.0).sqrt();
    Ok(gaussian_pair_residual(p, q, m20, xi_grid))
}

/// Residual of the fixed-point identity for an arbitrary deterministic pair;
/// nonzero pairs with p^2 + q^2 != 1 serve as negative controls.
pub fn gaussian_pair_residual(p: f64, q: f64, m20: f64, xi_grid: &[f64]) -> f64 {
    let transform = |xi: f64| (-0.5 * m20 * xi * xi).exp();
    xi_grid
        .iter()
        .map(|&xi| (transform(xi) - transform(p * xi) * transform(q * xi)).abs())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Two-vertex solvable graph solution
// ---------------------------------------------------------------------------

/// Closed-form pair (g1, g2) for the two-vertex one-way graph: vertex 1
/// interacts and leaks mass to vertex 2 at rate beta; vertex 2 accumulates a
/// copy of vertex 1's self-similar profile.
#[derive(Debug, Clone)]
pub struct TwoVertexSolution {
    rho10: f64,
    m110: f64,
    lambda1: f64,
    sigma1_sq: f64,
    beta: f64,
    g20: Box<AnalyticDistribution>,
    t: f64,
}

impl TwoVertexSolution {
    /// `g20` is the unit-mass initial profile of vertex 2; it carries mass
    /// 1 - rho10 in the pair.
    pub fn new(
        rho10: f64,
        m110: f64,
        lambda1: f64,
        sigma1_sq: f64,
        beta: f64,
        g20: AnalyticDistribution,
        t: f64,
    ) -> Result<Self> {
        if m110 <= 0.0 {
            // A negative conserved mean mirrors the profile onto v < 0;
            // only the positive branch is materialized here.
            return Err(Error::Precondition(format!(
                "two-vertex closed form requires M_11(0) > 0, got {m110}"
            )));
        }
        if !(0.0 < beta && beta < 1.0) {
            return Err(Error::Precondition(format!("beta must lie in (0,1), got {beta}")));
        }
        if !(rho10 > 0.0 && rho10 <= 1.0) {
            return Err(Error::Precondition(format!("rho_1(0) must lie in (0,1], got {rho10}")));
        }
        if sigma1_sq <= 0.0 || sigma1_sq >= 2.0 * lambda1 {
            return Err(Error::InadmissibleRegime(format!(
                "vertex-1 profile needs 0 < sigma^2 < 2*lambda, got sigma^2 = {sigma1_sq}"
            )));
        }
        if t < 0.0 {
            return Err(Error::NonPositiveParameter { name: "t", value: t });
        }
        Ok(Self { rho10, m110, lambda1, sigma1_sq, beta, g20: Box::new(g20), t })
    }

    pub fn at_time(&self, t: f64) -> Result<Self> {
        let mut sol = self.clone();
        if t < 0.0 {
            return Err(Error::NonPositiveParameter { name: "t", value: t });
        }
        sol.t = t;
        Ok(sol)
    }

    fn shape_ratio(&self) -> f64 {
        2.0 * self.lambda1 / self.sigma1_sq
    }

    /// Unit-mass, unit-mean profile h: inverse gamma with shape
    /// 1 + 2 lambda_1/sigma_1^2 and scale 2 lambda_1/sigma_1^2.
    pub fn profile_pdf(&self, w: f64) -> f64 {
        let r = self.shape_ratio();
        inverse_gamma_pdf(1.0 + r, r, w)
    }

    /// The normalized vertex-1 density (1/m) h(v/m); time-independent.
    pub fn g1_normalized_pdf(&self, v: f64) -> f64 {
        self.profile_pdf(v / self.m110) / self.m110
    }

    pub fn g1_mass(&self) -> f64 {
        self.rho10 * (-self.beta * self.t).exp()
    }

    pub fn g2_mass(&self) -> f64 {
        1.0 - self.g1_mass()
    }

    /// (g1(v, t), g2(v, t)).
    pub fn densities(&self, v: f64) -> (f64, f64) {
        let shape = self.g1_normalized_pdf(v);
        let transferred = self.rho10 * (1.0 - (-self.beta * self.t).exp());
        let g1 = self.g1_mass() * shape;
        let g20_mass = 1.0 - self.rho10;
        let g20_pdf = self.g20.pdf(v).unwrap_or(0.0);
        let g2 = g20_mass * g20_pdf + transferred * shape;
        (g1, g2)
    }

    /// The normalized vertex-2 density at the current time.
    pub fn g2_normalized_pdf(&self, v: f64) -> f64 {
        let (_, g2) = self.densities(v);
        g2 / self.g2_mass()
    }
}

/// Evaluate the closed-form pair at (v, t).
pub fn graph_two_vertex_solution(sol: &TwoVertexSolution, v: f64, t: f64) -> Result<(f64, f64)> {
    Ok(sol.at_time(t)?.densities(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use crate::sampling::StreamKey;

    fn stream(seed: u64) -> RngStream {
        RngStream::new(seed, StreamKey::new(9, 0, 0, 0))
    }

    /// Quadrature mass/moment of a density over (lo, hi).
    fn quad_moment<F: Fn(f64) -> f64>(pdf: F, lo: f64, hi: f64, order: i32) -> f64 {
        integrate(|v| v.powi(order) * pdf(v), lo, hi, 1e-11)
    }

    #[test]
    fn inverse_gamma_mass_mean_and_norm_constant() {
        // alpha = 13/6, theta = 7/6: mean 1; tail mass beyond v_max < 1e-10.
        let d = AnalyticDistribution::inverse_gamma(13.0 / 6.0, 7.0 / 6.0).unwrap();
        let pdf = |v: f64| d.pdf(v).unwrap();
        assert_eq!(pdf(-1.0), 0.0);
        assert_eq!(pdf(0.0), 0.0);
        let v_max = 4.0e4; // power-law bound: C/alpha * v^-alpha < 1e-10
        let mass = quad_moment(pdf, 0.0, v_max, 0);
        assert!((mass - 1.0).abs() < 1e-8, "mass {mass}");
        // The mean integrand decays one power slower; push the cutoff out
        // until its tail is below 1e-7.
        let mean = quad_moment(pdf, 0.0, 3.0e6, 1);
        assert!((mean - 1.0).abs() < 1e-6, "mean {mean}");
        // Normalizing constant in log space vs direct quadrature of the
        // unnormalized kernel.
        let ln_c = inverse_gamma_ln_norm(13.0 / 6.0, 7.0 / 6.0);
        let kernel =
            |v: f64| (-(13.0 / 6.0 + 1.0) * v.ln() - (7.0 / 6.0) / v).exp();
        let raw = integrate(kernel, 1e-12, v_max, 1e-12);
        assert!((ln_c + raw.ln()).abs() < 1e-8, "log-norm mismatch");
        // And against an independent log-gamma implementation to 1e-10.
        assert!((ln_c - 0.254_868_493_948_282_5).abs() < 1e-10);
    }

    #[test]
    fn quasi_invariant_equilibrium_cases() {
        // lambda = 7/2, sigma^2 = 6: alpha = 13/6, theta = 7/6 for m10 = 1.
        match AnalyticDistribution::quasi_invariant_equilibrium(3.5, 6.0, 1.0).unwrap() {
            AnalyticDistribution::InverseGamma { shape, scale } => {
                assert!((shape - 13.0 / 6.0).abs() < 1e-15);
                assert!((scale - 7.0 / 6.0).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        let mirrored =
            AnalyticDistribution::quasi_invariant_equilibrium(3.5, 6.0, -1.0).unwrap();
        assert!((mirrored.mean().unwrap() + 1.0).abs() < 1e-14);
        assert!(mirrored.pdf(1.0).unwrap() == 0.0 && mirrored.pdf(-1.0).unwrap() > 0.0);
        assert!(matches!(
            AnalyticDistribution::quasi_invariant_equilibrium(3.5, 6.0, 0.0).unwrap(),
            AnalyticDistribution::DiracAtom { .. }
        ));
    }

    #[test]
    fn gaussian_pdf_and_dirac() {
        let g = AnalyticDistribution::Gaussian { mean: 0.0, variance: 2.0 };
        let expect = 1.0 / (2.0 * std::f64::consts::PI * 2.0).sqrt();
        assert!((g.pdf(0.0).unwrap() - expect).abs() < 1e-15);
        let d = AnalyticDistribution::DiracAtom { location: 0.3 };
        assert!(matches!(d.pdf(0.0), Err(Error::PdfUndefined)));
        let mut s = stream(1);
        assert!(d.sample(&mut s, 5).unwrap().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn tail_exponents() {
        let d = AnalyticDistribution::quasi_invariant_equilibrium(3.5, 6.0, 1.0).unwrap();
        assert!((d.tail_exponent().unwrap() - 13.0 / 6.0).abs() < 1e-14);
        let g = AnalyticDistribution::Gaussian { mean: 0.0, variance: 1.0 };
        assert_eq!(g.tail_exponent(), None);
        // gamma = 1 + 2 lambda / sigma^2 > 2 whenever sigma^2 < 2 lambda.
        for (lambda, sigma_sq) in [(1.0, 0.5), (1.0, 1.9), (3.5, 6.0)] {
            let f =
                AnalyticDistribution::conserved_energy_fat_tail(lambda, sigma_sq, 1.0).unwrap();
            assert!(f.tail_exponent().unwrap() > 2.0);
        }
    }

    #[test]
    fn transport_profile_box() {
        // f0 = U(-1, 3), lambda = 1, m10 = 1: support [1 - 2e^-t, 1 + 2e^-t],
        // height e^t / 4, unit mass.
        let d = AnalyticDistribution::TransportSelfSimilar {
            f0: Box::new(InitialCondition::UniformInterval(-1.0, 3.0)),
            lambda: 1.0,
            m10: 1.0,
            t: 1.0,
        };
        let e = std::f64::consts::E;
        let half_width = 2.0 / e;
        let height = e / 4.0;
        assert!((d.pdf(1.0).unwrap() - height).abs() < 1e-14);
        assert!((d.pdf(1.0 + 0.99 * half_width).unwrap() - height).abs() < 1e-14);
        assert_eq!(d.pdf(1.0 + 1.01 * half_width).unwrap(), 0.0);
        let mass = quad_moment(|v| d.pdf(v).unwrap(), 0.0, 2.0, 0);
        assert!((mass - 1.0).abs() < 1e-9);
        // Draws are the affine pushforward of f0 draws.
        let mut s = stream(4);
        let draws = d.sample(&mut s, 20_000).unwrap();
        assert!(draws
            .iter()
            .all(|&v| v >= 1.0 - half_width - 1e-12 && v <= 1.0 + half_width + 1e-12));
        let m = crate::math::mean(&draws);
        assert!((m - 1.0).abs() < 4.0 * (half_width / 3f64.sqrt()) / (20_000f64).sqrt());
    }

    #[test]
    fn fat_tail_mass_and_energy() {
        // Tangent substitution makes both integrals exact on a finite
        // interval: v = sqrt(b/a) tan(theta).
        let (lambda, sigma_sq, m20) = (1.0, 0.5, 1.0);
        let d = AnalyticDistribution::conserved_energy_fat_tail(lambda, sigma_sq, m20).unwrap();
        let (a, b, _) = super::fat_tail_parameters(lambda, sigma_sq, m20);
        let s = (b / a).sqrt();
        let half_pi = 0.5 * std::f64::consts::PI;
        let mass = integrate(
            |th| {
                let v = s * th.tan();
                let jac = s / th.cos().powi(2);
                d.pdf(v).unwrap() * jac
            },
            -half_pi + 1e-9,
            half_pi - 1e-9,
            1e-11,
        );
        assert!((mass - 1.0).abs() < 1e-8, "mass {mass}");
        let energy = integrate(
            |th| {
                let v = s * th.tan();
                let jac = s / th.cos().powi(2);
                v * v * d.pdf(v).unwrap() * jac
            },
            -half_pi + 1e-9,
            half_pi - 1e-9,
            1e-11,
        );
        assert!((energy - m20).abs() < 1e-6, "energy {energy}");
        // Symmetry about zero.
        assert_eq!(d.pdf(0.7).unwrap(), d.pdf(-0.7).unwrap());
        // Sampled energy agrees within Monte Carlo error.
        let mut st = stream(8);
        let draws = d.sample(&mut st, 400_000).unwrap();
        let sq: Vec<f64> = draws.iter().map(|v| v * v).collect();
        let m2 = crate::math::mean(&sq);
        assert!((m2 - m20).abs() < 0.05, "sampled energy {m2}");
    }

    #[test]
    fn inverse_gamma_stationarity_flux() {
        // The drift-diffusion flux lambda (m - v) g - (sigma^2/2) d/dv (v^2 g)
        // vanishes identically on the inverse-gamma steady state.
        let (lambda, sigma_sq, m10) = (3.5, 6.0, 1.0);
        let d = AnalyticDistribution::quasi_invariant_equilibrium(lambda, sigma_sq, m10).unwrap();
        let (shape, scale) = match d {
            AnalyticDistribution::InverseGamma { shape, scale } => (shape, scale),
            _ => unreachable!(),
        };
        for k in 1..=60 {
            let v = 0.1 * k as f64;
            let g = inverse_gamma_pdf(shape, scale, v);
            // Analytic derivative: g'/g = -(shape+1)/v + scale/v^2.
            let dg = g * (-(shape + 1.0) / v + scale / (v * v));
            let flux = lambda * (m10 - v) * g - 0.5 * sigma_sq * (2.0 * v * g + v * v * dg);
            let scale_ref = lambda * (m10.abs() + v) * g;
            assert!(
                flux.abs() <= 1e-8 * scale_ref.max(1e-300),
                "flux {flux} at v = {v}"
            );
        }
    }

    #[test]
    fn gaussian_fixed_point() {
        let grid: Vec<f64> = (1..=500).map(|k| k as f64 * 0.01).collect();
        for eps in [0.1, 0.01, 0.001] {
            let r = gaussian_fixed_point_residual(1.0, eps, 1.0, &grid).unwrap();
            assert!(r <= 1e-12, "eps {eps}: residual {r}");
        }
        // m20 = 0 degenerates to the constant transform.
        assert_eq!(gaussian_pair_residual(0.99, 0.1410673598, 0.0, &grid), 0.0);
        // Negative control: perturbing q breaks the identity visibly.
        let p = 1.0 - 0.01;
        let q = (0.02f64).sqrt() * (1.0 - 0.005f64).sqrt() + 1e-3;
        assert!(gaussian_pair_residual(p, q, 1.0, &grid) > 1e-8);
        // Inadmissible eps rejected.
        assert!(gaussian_fixed_point_residual(1.0, 1.5, 1.0, &grid).is_err());
    }

    #[test]
    fn two_vertex_solution_shapes() {
        let sol = TwoVertexSolution::new(
            0.6,
            1.0,
            3.5,
            6.0,
            0.3,
            AnalyticDistribution::Gaussian { mean: 0.0, variance: 0.25 },
            0.0,
        )
        .unwrap();
        // t = 0: g2 is the initial profile, g1 carries mass rho10.
        let (g1, g2) = sol.densities(0.0);
        assert_eq!(g1, 0.0); // inverse-gamma profile vanishes at v = 0
        let gauss = AnalyticDistribution::Gaussian { mean: 0.0, variance: 0.25 };
        assert!((g2 - 0.4 * gauss.pdf(0.0).unwrap()).abs() < 1e-14);
        assert!((sol.g1_mass() - 0.6).abs() < 1e-15);

        // Quadrature: g1 mass = rho10 e^{-beta t} at t in {0.5, 1, 2}.
        for t in [0.5, 1.0, 2.0] {
            let at = sol.at_time(t).unwrap();
            let mass = integrate(|v| at.densities(v).0, 0.0, 4.0e4, 1e-10);
            let expected = 0.6 * (-0.3 * t).exp();
            assert!((mass - expected).abs() < 1e-8, "t = {t}: {mass} vs {expected}");
        }

        // Long-run: vertex 1 empties, vertex 2 holds everything.
        let late = sol.at_time(60.0).unwrap();
        assert!(late.g1_mass() < 1e-7);
        assert!((late.g2_mass() - 1.0).abs() < 1e-7);
        let total = integrate(|v| late.densities(v).1, -5.0, 4.0e4, 1e-9);
        assert!((total - 1.0).abs() < 1e-6, "g2 mass {total}");

        // Rejected parameterizations.
        assert!(TwoVertexSolution::new(
            0.6,
            -1.0,
            3.5,
            6.0,
            0.3,
            AnalyticDistribution::Gaussian { mean: 0.0, variance: 0.25 },
            0.0
        )
        .is_err());
    }

    #[test]
    fn inverse_gamma_sample_mean() {
        let d = AnalyticDistribution::inverse_gamma(13.0 / 6.0, 7.0 / 6.0).unwrap();
        let mut s = stream(12);
        let draws = d.sample(&mut s, 1_000_000).unwrap();
        let m = crate::math::mean(&draws);
        assert!((m - 1.0).abs() < 4.0 * (6.0f64 / 1e6).sqrt());
    }

    #[test]
    fn pair_sampling_undefined() {
        let sol = TwoVertexSolution::new(
            0.6,
            1.0,
            3.5,
            6.0,
            0.3,
            AnalyticDistribution::Gaussian { mean: 0.0, variance: 0.25 },
            1.0,
        )
        .unwrap();
        let d = AnalyticDistribution::GraphTwoVertexPair(sol);
        let mut s = stream(2);
        assert!(matches!(d.sample(&mut s, 3), Err(Error::SampleUndefined(_))));
    }
}
