//! Interaction-law algebra: the linear symmetric rule v' = p v + q v*, its
//! admissibility statistics, quasi-invariant scalings, and the spectral
//! function S(s) = <p^s + q^s> - 1 that governs moment growth and tails.

use crate::error::{Error, Result};
use crate::sampling::{RandomCoefficient, RngStream};

/// Default ceiling for the tail-exponent search; higher roots have no
/// observable effect at desk-scale particle counts.
pub const DEFAULT_S_MAX: f64 = 12.0;

/// An independent (p, q) coefficient pair with cached closed-form statistics.
///
/// Both coefficients are restricted to nonnegative support, which is what
/// makes the particle dynamics preserve nonnegative state supports pathwise.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionLaw {
    p: RandomCoefficient,
    q: RandomCoefficient,
    mean_sum: f64,
    energy_sum: f64,
    cubic_sum: f64,
    cross: f64,
    cross_cubic: f64,
}

impl InteractionLaw {
    pub fn new(p: RandomCoefficient, q: RandomCoefficient) -> Result<Self> {
        p.validate()?;
        q.validate()?;
        let min = p.support_min().min(q.support_min());
        if min < 0.0 {
            return Err(Error::NegativeCoefficientSupport(min));
        }
        // p and q are independent, so mixed moments factorize.
        let mean_sum = p.mean() + q.mean();
        let energy_sum = p.raw_moment(2) + q.raw_moment(2);
        let cubic_sum = p.raw_moment(3) + q.raw_moment(3);
        let cross = p.mean() * q.mean();
        let cross_cubic = p.raw_moment(2) * q.mean() + p.mean() * q.raw_moment(2);
        Ok(Self { p, q, mean_sum, energy_sum, cubic_sum, cross, cross_cubic })
    }

    pub fn symmetric_deterministic(c: f64) -> Result<Self> {
        Self::new(RandomCoefficient::Deterministic(c), RandomCoefficient::Deterministic(c))
    }

    /// The prototype mixing rule v' = v + gamma (v* - v) + v eta, i.e.
    /// p = 1 - gamma + eta with a centred uniform eta of variance
    /// `eta_variance`, q = gamma.
    pub fn prototype(gamma: f64, eta_variance: f64) -> Result<Self> {
        let r = (3.0 * eta_variance).sqrt();
        Self::new(
            RandomCoefficient::AffineOfBase {
                offset: 1.0 - gamma,
                scale: 1.0,
                base: Box::new(RandomCoefficient::Uniform { lo: -r, hi: r }),
            },
            RandomCoefficient::Deterministic(gamma),
        )
    }

    pub fn p(&self) -> &RandomCoefficient {
        &self.p
    }

    pub fn q(&self) -> &RandomCoefficient {
        &self.q
    }

    /// <p + q>
    pub fn mean_sum(&self) -> f64 {
        self.mean_sum
    }

    /// <p^2 + q^2>
    pub fn energy_sum(&self) -> f64 {
        self.energy_sum
    }

    /// <p^3 + q^3>
    pub fn cubic_sum(&self) -> f64 {
        self.cubic_sum
    }

    /// <p q> (independence: <p><q>)
    pub fn cross_moment(&self) -> f64 {
        self.cross
    }

    /// <p q (p + q)>
    pub fn cross_cubic_moment(&self) -> f64 {
        self.cross_cubic
    }

    /// <p^k q^m> for the moment recursion, k + m <= 8.
    pub fn mixed_moment(&self, k: u32, m: u32) -> Result<f64> {
        if k + m > 8 {
            return Err(Error::MomentOrderTooLarge(k + m));
        }
        Ok(self.p.raw_moment(k) * self.q.raw_moment(m))
    }

    pub fn is_mean_conserving(&self) -> bool {
        (self.mean_sum - 1.0).abs() <= 1e-12
    }

    pub fn is_energy_dissipative(&self) -> bool {
        self.energy_sum < 1.0
    }

    /// Draw one (p, q) realization.
    pub fn draw_pair(&self, stream: &mut RngStream) -> (f64, f64) {
        (self.p.draw(stream), self.q.draw(stream))
    }
}

/// Post-interaction state of the first agent: p v + q v*.
#[inline]
pub fn interact(v: f64, v_star: f64, p_draw: f64, q_draw: f64) -> f64 {
    p_draw * v + q_draw * v_star
}

/// Admissibility summary of a law (optionally of the regime it came from).
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub mean_sum: f64,
    pub energy_sum: f64,
    pub cubic_sum: f64,
    pub eps_max: Option<f64>,
    pub eta_min_required: Option<f64>,
    pub mean_conserving: bool,
    pub energy_dissipative: bool,
    pub cubic_contractive: bool,
}

pub fn law_statistics(law: &InteractionLaw) -> AdmissibilityReport {
    AdmissibilityReport {
        mean_sum: law.mean_sum(),
        energy_sum: law.energy_sum(),
        cubic_sum: law.cubic_sum(),
        eps_max: None,
        eta_min_required: None,
        mean_conserving: law.is_mean_conserving(),
        energy_dissipative: law.is_energy_dissipative(),
        cubic_contractive: law.cubic_sum() < 1.0,
    }
}

// ---------------------------------------------------------------------------
// Quasi-invariant scalings
// ---------------------------------------------------------------------------

/// The three epsilon-scalings of (p, q). `sigma_sq` is the variance
/// proportionality constant sigma^2.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalingRegime {
    /// p_eps = 1 - eps*lambda + sqrt(eps)*sigma*eta, q_eps = eps*lambda.
    /// Limit: drift toward the conserved mean plus multiplicative diffusion.
    AdvectionDiffusion { lambda: f64, sigma_sq: f64, eta: RandomCoefficient },
    /// Var(p_eps) = eps^{1+delta} sigma^2: diffusion is subordinate to the
    /// drift and vanishes in the limit.
    AdvectionDominated { lambda: f64, sigma_sq: f64, delta: f64, eta: RandomCoefficient },
    /// q_eps chosen so that <p_eps^2 + q_eps^2> = 1 exactly: mean zero and
    /// energy are conserved.
    ConservedEnergy { lambda: f64, sigma_sq: f64, eta: RandomCoefficient },
}

impl ScalingRegime {
    fn lambda(&self) -> f64 {
        match self {
            ScalingRegime::AdvectionDiffusion { lambda, .. }
            | ScalingRegime::AdvectionDominated { lambda, .. }
            | ScalingRegime::ConservedEnergy { lambda, .. } => *lambda,
        }
    }

    fn sigma_sq(&self) -> f64 {
        match self {
            ScalingRegime::AdvectionDiffusion { sigma_sq, .. }
            | ScalingRegime::AdvectionDominated { sigma_sq, .. }
            | ScalingRegime::ConservedEnergy { sigma_sq, .. } => *sigma_sq,
        }
    }

    pub fn eta(&self) -> &RandomCoefficient {
        match self {
            ScalingRegime::AdvectionDiffusion { eta, .. }
            | ScalingRegime::AdvectionDominated { eta, .. }
            | ScalingRegime::ConservedEnergy { eta, .. } => eta,
        }
    }

    /// Structural admissibility of (lambda, sigma).
    pub fn validate(&self) -> Result<()> {
        let lambda = self.lambda();
        let sigma_sq = self.sigma_sq();
        if lambda <= 0.0 {
            return Err(Error::NonPositiveParameter { name: "lambda", value: lambda });
        }
        match self {
            ScalingRegime::AdvectionDiffusion { .. } => {
                if sigma_sq <= 0.0 {
                    return Err(Error::NonPositiveParameter {
                        name: "sigma_sq",
                        value: sigma_sq,
                    });
                }
                if sigma_sq >= 2.0 * lambda {
                    return Err(Error::InadmissibleRegime(format!(
                        "requires sigma^2 < 2*lambda, got sigma^2 = {sigma_sq}, 2*lambda = {}",
                        2.0 * lambda
                    )));
                }
            }
            ScalingRegime::AdvectionDominated { delta, .. } => {
                if sigma_sq <= 0.0 {
                    return Err(Error::NonPositiveParameter {
                        name: "sigma_sq",
                        value: sigma_sq,
                    });
                }
                if *delta <= 0.0 {
                    return Err(Error::NonPositiveParameter { name: "delta", value: *delta });
                }
                if sigma_sq <= 2.0 * lambda * (1.0 - lambda) {
                    return Err(Error::InadmissibleRegime(format!(
                        "requires sigma^2 > 2*lambda*(1-lambda), got sigma^2 = {sigma_sq}, \
                         bound = {}",
                        2.0 * lambda * (1.0 - lambda)
                    )));
                }
            }
            ScalingRegime::ConservedEnergy { .. } => {
                if sigma_sq < 0.0 {
                    return Err(Error::NonPositiveParameter {
                        name: "sigma_sq",
                        value: sigma_sq,
                    });
                }
                if sigma_sq >= 2.0 * lambda {
                    return Err(Error::InadmissibleRegime(format!(
                        "requires sigma^2 < 2*lambda, got sigma^2 = {sigma_sq}, 2*lambda = {}",
                        2.0 * lambda
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest admissible epsilon (strict upper bound).
    pub fn eps_max(&self) -> f64 {
        let lambda = self.lambda();
        let sigma_sq = self.sigma_sq();
        match self {
            ScalingRegime::AdvectionDiffusion { .. } | ScalingRegime::ConservedEnergy { .. } => {
                (1.0 / lambda) * (1.0 - sigma_sq / (2.0 * lambda))
            }
            ScalingRegime::AdvectionDominated { delta, .. } => {
                let base = 2.0 * lambda / (2.0 * lambda * lambda + sigma_sq);
                base.powf(1.0 / delta.min(1.0))
            }
        }
    }

    /// Epsilon-free lower support bound required of eta so that p_eps stays
    /// nonnegative for every admissible epsilon.
    pub fn eta_min_required(&self) -> f64 {
        let r = self.sigma_sq() / (2.0 * self.lambda());
        match self {
            ScalingRegime::AdvectionDiffusion { .. } | ScalingRegime::ConservedEnergy { .. } => {
                -(r / (2.0 * (1.0 - r))).sqrt()
            }
            ScalingRegime::AdvectionDominated { .. } => {
                // Diffusion is higher order in eps here; the binding
                // constraint is evaluated per epsilon in materialize.
                f64::NEG_INFINITY
            }
        }
    }

    fn validate_eta(&self) -> Result<()> {
        let eta = self.eta();
        if self.sigma_sq() == 0.0 {
            return Ok(()); // eta never enters the law
        }
        let mean = eta.mean();
        let second = eta.raw_moment(2);
        if mean.abs() > 1e-12 || (second - 1.0).abs() > 1e-12 {
            return Err(Error::EtaMomentsInvalid { mean, second });
        }
        let required = self.eta_min_required();
        if eta.support_min() < required - 1e-12 {
            return Err(Error::EtaSupportInvalid { support_min: eta.support_min(), required });
        }
        Ok(())
    }

    /// Concrete epsilon-scaled law plus its admissibility report.
    pub fn materialize(&self, eps: f64) -> Result<(InteractionLaw, AdmissibilityReport)> {
        self.validate()?;
        if eps <= 0.0 {
            return Err(Error::NonPositiveParameter { name: "eps", value: eps });
        }
        let eps_max = self.eps_max();
        if eps >= eps_max {
            return Err(Error::EpsilonTooLarge { eps, eps_max });
        }
        self.validate_eta()?;
        let lambda = self.lambda();
        let sigma = self.sigma_sq().sqrt();

        let affine = |offset: f64, scale: f64| -> RandomCoefficient {
            if scale == 0.0 {
                RandomCoefficient::Deterministic(offset)
            } else {
                RandomCoefficient::AffineOfBase {
                    offset,
                    scale,
                    base: Box::new(self.eta().clone()),
                }
            }
        };

        let (p, q) = match self {
            ScalingRegime::AdvectionDiffusion { .. } => (
                affine(1.0 - eps * lambda, eps.sqrt() * sigma),
                RandomCoefficient::Deterministic(eps * lambda),
            ),
            ScalingRegime::AdvectionDominated { delta, .. } => (
                affine(1.0 - eps * lambda, eps.powf(0.5 * (1.0 + delta)) * sigma),
                RandomCoefficient::Deterministic(eps * lambda),
            ),
            ScalingRegime::ConservedEnergy { .. } => {
                let q = (2.0 * lambda * eps).sqrt()
                    * (1.0 - self.sigma_sq() / (2.0 * lambda) - eps * lambda / 2.0).sqrt();
                (affine(1.0 - eps * lambda, eps.sqrt() * sigma), RandomCoefficient::Deterministic(q))
            }
        };
        if p.support_min() < 0.0 {
            return Err(Error::EtaSupportInvalid {
                support_min: self.eta().support_min(),
                required: (eps * lambda - 1.0)
                    / (eps.powf(self.p_noise_exponent()) * sigma.max(f64::MIN_POSITIVE)),
            });
        }
        let law = InteractionLaw::new(p, q)?;
        let mut report = law_statistics(&law);
        report.eps_max = Some(eps_max);
        report.eta_min_required = Some(self.eta_min_required());
        Ok((law, report))
    }

    fn p_noise_exponent(&self) -> f64 {
        match self {
            ScalingRegime::AdvectionDominated { delta, .. } => 0.5 * (1.0 + delta),
            _ => 0.5,
        }
    }
}

// ---------------------------------------------------------------------------
// Spectral function and tail classification
// ---------------------------------------------------------------------------

/// S(s) = <p^s + q^s> - 1.
pub fn spectral_s(law: &InteractionLaw, s: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::Precondition(format!("spectral function requires s >= 0, got {s}")));
    }
    Ok(law.p().fractional_moment(s)? + law.q().fractional_moment(s)? - 1.0)
}

/// Outcome of the tail dichotomy on (1, s_max].
#[derive(Debug, Clone, PartialEq)]
pub enum TailClassification {
    /// S stays negative on (1, s_max]: all checked moments stay bounded.
    SlimTails { s_max_checked: f64 },
    /// S crosses zero at s_bar > 1: moments of order >= n_bar blow up.
    FatTails { s_bar: f64, pareto_n_bar: u32 },
}

/// Locate the positive root of S on (1, s_max] by bisection.
///
/// Requires a mean-conserving, energy-dissipative law, so S(1) = 0 and
/// S(2) < 0; convexity then confines any further root to (2, s_max].
pub fn classify_tail(law: &InteractionLaw, s_max: f64) -> Result<TailClassification> {
    if !law.is_mean_conserving() || !law.is_energy_dissipative() {
        return Err(Error::LawNotAdmissible {
            mean_sum: law.mean_sum(),
            energy_sum: law.energy_sum(),
        });
    }
    if s_max <= 2.0 {
        return Err(Error::Precondition(format!("s_max must exceed 2, got {s_max}")));
    }
    let s_top = spectral_s(law, s_max)?;
    if s_top <= 0.0 {
        return Ok(TailClassification::SlimTails { s_max_checked: s_max });
    }
    let (mut lo, mut hi) = (2.0, s_max);
    // S(2) < 0 <= S(s_max): bisect to the crossing.
    for _ in 0..200 {
        if hi - lo <= 1e-10 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if spectral_s(law, mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let s_bar = 0.5 * (lo + hi);
    Ok(TailClassification::FatTails { s_bar, pareto_n_bar: s_bar as u32 + 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::StreamKey;

    fn uniform_eta() -> RandomCoefficient {
        RandomCoefficient::uniform_symmetric_unit()
    }

    fn prototype_law(gamma: f64, eta_var: f64) -> InteractionLaw {
        InteractionLaw::prototype(gamma, eta_var).unwrap()
    }

    #[test]
    fn interact_is_the_mixing_rule() {
        assert_eq!(interact(1.0, 2.0, 0.5, 0.5), 1.5);
        assert_eq!(interact(4.0, -7.0, 1.0, 0.0), 4.0);
        assert!((interact(3.0, -1.0, 0.9, 0.1) - 2.6).abs() < 1e-15);
    }

    #[test]
    fn negative_support_rejected() {
        let err = InteractionLaw::new(
            RandomCoefficient::Uniform { lo: -0.1, hi: 0.5 },
            RandomCoefficient::Deterministic(0.25),
        );
        assert!(matches!(err, Err(Error::NegativeCoefficientSupport(_))));
    }

    #[test]
    fn prototype_statistics() {
        // gamma = 0.25, eta variance 0.1: <p+q> = 1,
        // <p^2+q^2> = 1 - 2*gamma*(1-gamma) + var = 0.725, <pq> = 0.1875.
        let law = prototype_law(0.25, 0.1);
        let report = law_statistics(&law);
        assert!((report.mean_sum - 1.0).abs() < 1e-14);
        assert!((report.energy_sum - 0.725).abs() < 1e-14);
        assert!((law.cross_moment() - 0.1875).abs() < 1e-14);
        assert!(report.mean_conserving && report.energy_dissipative);
    }

    #[test]
    fn deterministic_half_half() {
        let law = InteractionLaw::symmetric_deterministic(0.5).unwrap();
        let r = law_statistics(&law);
        assert_eq!(r.mean_sum, 1.0);
        assert_eq!(r.energy_sum, 0.5);
    }

    #[test]
    fn advection_diffusion_eps_bound() {
        // lambda = 7/2, sigma^2 = 6: eps_max = 2/49.
        let regime = ScalingRegime::AdvectionDiffusion {
            lambda: 3.5,
            sigma_sq: 6.0,
            eta: uniform_eta(),
        };
        assert!((regime.eps_max() - 2.0 / 49.0).abs() < 1e-15);
        assert!(regime.materialize(0.04).is_ok());
        assert!(matches!(
            regime.materialize(0.05),
            Err(Error::EpsilonTooLarge { .. })
        ));
        // The eta lower bound for sigma^2/(2 lambda) = 6/7 is exactly -sqrt(3),
        // which Uniform(-sqrt3, sqrt3) attains.
        assert!((regime.eta_min_required() + 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn advection_diffusion_second_moment_expansion() {
        // <p_eps^2 + q_eps^2> = 1 - eps(2 lambda - sigma^2) + 2 eps^2 lambda^2.
        let regime = ScalingRegime::AdvectionDiffusion {
            lambda: 3.5,
            sigma_sq: 6.0,
            eta: uniform_eta(),
        };
        let (law, report) = regime.materialize(1e-3).unwrap();
        assert!((report.mean_sum - 1.0).abs() < 1e-14);
        assert!((report.energy_sum - 0.999_024_5).abs() < 1e-12);
        // Monte Carlo cross-check of the closed-form statistic.
        let mut stream = RngStream::new(99, StreamKey::new(0, 0, 0, 0));
        let n = 10_000_000usize;
        let mut acc = 0.0;
        for _ in 0..n {
            let (p, q) = law.draw_pair(&mut stream);
            acc += p * p + q * q;
        }
        let emp = acc / n as f64;
        // Var(p^2) is dominated by 4<p>^2 Var(p) ~ 4 * eps sigma^2.
        let se = (4.0 * 1e-3 * 6.0 / n as f64).sqrt();
        assert!((emp - report.energy_sum).abs() < 5.0 * se, "{emp}");
    }

    #[test]
    fn conserved_energy_is_exact() {
        let regime = ScalingRegime::ConservedEnergy {
            lambda: 1.0,
            sigma_sq: 0.0,
            eta: uniform_eta(),
        };
        let (law, report) = regime.materialize(0.01).unwrap();
        assert!((report.energy_sum - 1.0).abs() < 1e-15);
        let p = law.p().mean();
        let q = law.q().mean();
        assert!((p - 0.99).abs() < 1e-15);
        assert!((q - (0.02f64 * 0.995).sqrt()).abs() < 1e-15);
        assert!((p * p + q * q - 1.0).abs() < 1e-15);
        // sigma > 0 keeps the identity in expectation. The eta support bound
        // admits the symmetric uniform only for sigma^2 >= (12/7) lambda.
        let regime = ScalingRegime::ConservedEnergy {
            lambda: 1.0,
            sigma_sq: 1.8,
            eta: uniform_eta(),
        };
        let (_, report) = regime.materialize(0.01).unwrap();
        assert!((report.energy_sum - 1.0).abs() < 1e-14);
        // Below that threshold the support check fires.
        let tight = ScalingRegime::ConservedEnergy {
            lambda: 1.0,
            sigma_sq: 0.5,
            eta: uniform_eta(),
        };
        assert!(matches!(tight.materialize(0.01), Err(Error::EtaSupportInvalid { .. })));
    }

    #[test]
    fn advection_dominated_conditions() {
        let regime = ScalingRegime::AdvectionDominated {
            lambda: 1.0,
            sigma_sq: 1.69,
            delta: 1.0,
            eta: uniform_eta(),
        };
        regime.validate().unwrap();
        let bound = 2.0 / (2.0 + 1.69);
        assert!((regime.eps_max() - bound).abs() < 1e-15);
        assert!(regime.materialize(1e-3).is_ok());
        // Tie at the bound is rejected (strict inequality).
        assert!(regime.materialize(bound).is_err());
        // sigma^2 <= 2 lambda (1 - lambda) is structurally inadmissible.
        let bad = ScalingRegime::AdvectionDominated {
            lambda: 0.5,
            sigma_sq: 0.4,
            delta: 1.0,
            eta: uniform_eta(),
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn eta_validation() {
        let skew = RandomCoefficient::TwoPoint { x1: 0.0, p1: 0.5, x2: 2.0, p2: 0.5 };
        let regime =
            ScalingRegime::AdvectionDiffusion { lambda: 3.5, sigma_sq: 6.0, eta: skew };
        assert!(matches!(regime.materialize(1e-3), Err(Error::EtaMomentsInvalid { .. })));

        // Unit-variance eta whose support dips below the admissible bound:
        // two-point at {-3, 1/3} with weights {1/10, 9/10} has mean 0,
        // second moment 1, support min -3 < -sqrt(3).
        let wide = RandomCoefficient::TwoPoint { x1: -3.0, p1: 0.1, x2: 1.0 / 3.0, p2: 0.9 };
        assert!((wide.mean()).abs() < 1e-14);
        assert!((wide.raw_moment(2) - 1.0).abs() < 1e-14);
        let regime =
            ScalingRegime::AdvectionDiffusion { lambda: 3.5, sigma_sq: 6.0, eta: wide };
        assert!(matches!(regime.materialize(1e-3), Err(Error::EtaSupportInvalid { .. })));
    }

    #[test]
    fn spectral_s_basics() {
        let law = prototype_law(0.25, 0.1);
        assert!((spectral_s(&law, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(spectral_s(&law, 1.0).unwrap().abs() < 1e-12);
        let half = InteractionLaw::symmetric_deterministic(0.5).unwrap();
        assert!((spectral_s(&half, 2.0).unwrap() + 0.5).abs() < 1e-15);
        assert!(spectral_s(&half, -1.0).is_err());
    }

    #[test]
    fn spectral_s_cubic_closed_form() {
        // For p = 1 - eps*lambda + sqrt(eps)*sigma*eta with zero-skew eta:
        // S(3) = 3 (sigma^2 - lambda) eps (1 - eps*lambda).
        let regime = ScalingRegime::AdvectionDiffusion {
            lambda: 3.5,
            sigma_sq: 6.0,
            eta: uniform_eta(),
        };
        let eps = 1e-3;
        let (law, _) = regime.materialize(eps).unwrap();
        let s3 = spectral_s(&law, 3.0).unwrap();
        let closed = 3.0 * (6.0 - 3.5) * eps * (1.0 - eps * 3.5);
        assert!((s3 - closed).abs() < 1e-12, "{s3} vs {closed}");
        assert!(s3 > 0.0);
    }

    #[test]
    fn spectral_s_is_convex_on_grid() {
        let regime = ScalingRegime::AdvectionDiffusion {
            lambda: 3.5,
            sigma_sq: 6.0,
            eta: uniform_eta(),
        };
        let (law, _) = regime.materialize(1e-3).unwrap();
        let grid: Vec<f64> = (0..=40).map(|i| 0.25 * i as f64).collect();
        for w in grid.windows(3) {
            let (a, b, c) = (w[0], w[1], w[2]);
            let lhs = spectral_s(&law, b).unwrap();
            let rhs =
                0.5 * spectral_s(&law, a).unwrap() + 0.5 * spectral_s(&law, c).unwrap();
            assert!(lhs <= rhs + 1e-12, "convexity violated at {b}");
        }
    }

    #[test]
    fn tail_dichotomy() {
        // Deterministic p = q = 1/2: S(s) = 2^{1-s} - 1 < 0 for s > 1.
        let slim = InteractionLaw::symmetric_deterministic(0.5).unwrap();
        assert!(matches!(
            classify_tail(&slim, DEFAULT_S_MAX).unwrap(),
            TailClassification::SlimTails { .. }
        ));

        // The eps-scaled advection-diffusion law with sigma^2 >= 4 lambda / 3
        // has S(3) > 0: fat tails with n_bar = 3.
        let regime = ScalingRegime::AdvectionDiffusion {
            lambda: 3.5,
            sigma_sq: 6.0,
            eta: uniform_eta(),
        };
        let (law, _) = regime.materialize(1e-3).unwrap();
        match classify_tail(&law, DEFAULT_S_MAX).unwrap() {
            TailClassification::FatTails { s_bar, pareto_n_bar } => {
                assert!(s_bar > 2.0 && s_bar < 3.0, "s_bar = {s_bar}");
                assert_eq!(pareto_n_bar, 3);
                assert!(spectral_s(&law, s_bar).unwrap().abs() < 1e-8);
            }
            other => panic!("expected fat tails, got {other:?}"),
        }
    }

    #[test]
    fn classification_agrees_with_integer_signs() {
        for (law, _) in [
            (prototype_law(0.25, 0.1), ()),
            (InteractionLaw::symmetric_deterministic(0.5).unwrap(), ()),
            (
                ScalingRegime::AdvectionDiffusion {
                    lambda: 3.5,
                    sigma_sq: 6.0,
                    eta: uniform_eta(),
                }
                .materialize(1e-2)
                .unwrap()
                .0,
                (),
            ),
        ] {
            let class = classify_tail(&law, DEFAULT_S_MAX).unwrap();
            for n in 2..=(DEFAULT_S_MAX as u32) {
                let sign = spectral_s(&law, n as f64).unwrap() > 0.0;
                let fat_at_n = match &class {
                    TailClassification::SlimTails { .. } => false,
                    TailClassification::FatTails { s_bar, .. } => (n as f64) > *s_bar,
                };
                assert_eq!(sign, fat_at_n, "disagreement at integer s = {n}");
            }
        }
    }
}
