//! Closed-form and numerically integrated moment evolution.
//!
//! Single population: dM_n/dt = S(n) M_n + sum_k C(n,k) <p^k q^{n-k}> M_k M_{n-k},
//! with closed forms for n = 1, 2. Graph: coupled (density, momentum, energy)
//! systems per vertex, integrated in conservative form.

use crate::error::{Error, Result};
use crate::graph::{GraphModel, MuSpec};
use crate::kinetics::InteractionLaw;
use crate::math::binomial;

/// Clamp applied to vertex densities when dividing by rho_i; positive initial
/// densities stay above it on the horizons integrated here.
const RHO_CLAMP: f64 = 1e-12;

/// Time series of moments M_0..M_n.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    /// values[k][j] = M_j at times[k]; values[k][0] = 1 always.
    pub values: Vec<Vec<f64>>,
}

impl MomentSeries {
    pub fn order(&self) -> usize {
        self.values.first().map_or(0, |row| row.len() - 1)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }
}

/// M_1(t) = M_1(0) exp((<p+q> - 1) t).
pub fn mean_closed_form(m10: f64, law: &InteractionLaw, t: f64) -> f64 {
    m10 * ((law.mean_sum() - 1.0) * t).exp()
}

/// M_2(t) under a conserved mean:
/// e^{S(2) t} M_2(0) + (1 - e^{S(2) t}) M_2^inf, with
/// M_2^inf = 2 <pq> M_1(0)^2 / (1 - <p^2+q^2>).
pub fn energy_closed_form(m10: f64, m20: f64, law: &InteractionLaw, t: f64) -> Result<f64> {
    let s2 = law.energy_sum() - 1.0;
    if s2.abs() < 1e-14 {
        // Energy-conserving rule: constant branch, only meaningful at zero mean.
        if m10 == 0.0 {
            return Ok(m20);
        }
        return Err(Error::EnergyRateSingular);
    }
    let decay = (s2 * t).exp();
    Ok(decay * m20 + 2.0 * (1.0 - decay) * law.cross_moment() / (1.0 - law.energy_sum()) * m10 * m10)
}

/// Limit energy M_2^inf for a mean-conserving, dissipative law.
pub fn energy_steady(m10: f64, law: &InteractionLaw) -> Result<f64> {
    if law.energy_sum() >= 1.0 {
        return Err(Error::EnergyRateSingular);
    }
    Ok(2.0 * law.cross_moment() / (1.0 - law.energy_sum()) * m10 * m10)
}

/// Uniform-in-time energy bound M_2(0) + 2<pq> M_1(0)^2 / (1 - <p^2+q^2>).
pub fn energy_bound(m10: f64, m20: f64, law: &InteractionLaw) -> Result<f64> {
    Ok(m20 + energy_steady(m10, law)?)
}

/// Bound on the third absolute moment of the stationary state:
/// 3 <pq(p+q)> / (1 - <p^3+q^3>) * (M_2^inf)^{3/2}.
pub fn steady_third_bound(law: &InteractionLaw, m1_inf: f64) -> Result<f64> {
    if law.cubic_sum() >= 1.0 {
        return Err(Error::CubicMomentNotContractive(law.cubic_sum()));
    }
    let m2_inf = energy_steady(m1_inf, law)?;
    Ok(3.0 * law.cross_cubic_moment() / (1.0 - law.cubic_sum()) * m2_inf.powf(1.5))
}

/// Fixed-step RK4 integration of the moment recursion for M_0..M_n.
///
/// `initial` lists M_0..M_n (M_0 must be 1). The step is rejected when
/// dt * |S(j)| > 0.5 for any order j.
pub fn integrate_moment_system(
    law: &InteractionLaw,
    initial: &[f64],
    t_final: f64,
    dt: f64,
) -> Result<MomentSeries> {
    let n = initial.len().saturating_sub(1);
    if n == 0 || n > 8 {
        return Err(Error::MomentOrderTooLarge(n as u32));
    }
    if (initial[0] - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition("M_0 must equal 1".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::NonPositiveParameter { name: "dt_ode", value: dt });
    }
    // Rates S(j) and mixed moments are exact (integer orders).
    let mut s = vec![0.0; n + 1];
    let mut mixed = vec![vec![0.0; n + 1]; n + 1];
    for j in 1..=n {
        s[j] = law.p().raw_moment(j as u32) + law.q().raw_moment(j as u32) - 1.0;
        if dt * s[j].abs() > 0.5 {
            return Err(Error::OdeStepUnstable { dt, rate: s[j] });
        }
        for k in 1..j {
            mixed[j][k] = law.mixed_moment(k as u32, (j - k) as u32)?;
        }
    }
    let rhs = |m: &[f64], out: &mut [f64]| {
        out[0] = 0.0;
        for j in 1..=n {
            let mut acc = s[j] * m[j];
            for k in 1..j {
                acc += binomial(j as u32, k as u32) * mixed[j][k] * m[k] * m[j - k];
            }
            out[j] = acc;
        }
    };
    let steps = crate::montecarlo::step_count(t_final, dt);
    let mut m = initial.to_vec();
    let mut times = Vec::with_capacity(steps as usize + 1);
    let mut values = Vec::with_capacity(steps as usize + 1);
    times.push(0.0);
    values.push(m.clone());
    let mut k1 = vec![0.0; n + 1];
    let mut k2 = vec![0.0; n + 1];
    let mut k3 = vec![0.0; n + 1];
    let mut k4 = vec![0.0; n + 1];
    let mut tmp = vec![0.0; n + 1];
    for step in 1..=steps {
        rhs(&m, &mut k1);
        for j in 0..=n {
            tmp[j] = m[j] + 0.5 * dt * k1[j];
        }
        rhs(&tmp, &mut k2);
        for j in 0..=n {
            tmp[j] = m[j] + 0.5 * dt * k2[j];
        }
        rhs(&tmp, &mut k3);
        for j in 0..=n {
            tmp[j] = m[j] + dt * k3[j];
        }
        rhs(&tmp, &mut k4);
        for j in 0..=n {
            m[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        m[0] = 1.0;
        times.push(step as f64 * dt);
        values.push(m.clone());
    }
    Ok(MomentSeries { times, values })
}

// ---------------------------------------------------------------------------
// Graph moment systems
// ---------------------------------------------------------------------------

/// Per-vertex series of density, mean, and energy of the normalized vertex
/// distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMomentSeries {
    pub times: Vec<f64>,
    /// rho[k][i] = density of vertex i at times[k]; sums to 1.
    pub rho: Vec<Vec<f64>>,
    /// m1[k][i] = mean of the normalized distribution in vertex i.
    pub m1: Vec<Vec<f64>>,
    /// m2[k][i] = second moment of the normalized distribution in vertex i.
    pub m2: Vec<Vec<f64>>,
}

/// RK4 on the coupled (rho_i, rho_i M_{1,i}, rho_i M_{2,i}) system.
///
/// The momentum form stays linear where the division by rho_i is not, and is
/// integrated directly; means and energies are recovered by clamped division.
pub fn graph_moment_systems(
    graph: &GraphModel,
    rho0: &[f64],
    m1_0: &[f64],
    m2_0: &[f64],
    t_final: f64,
    dt: f64,
) -> Result<GraphMomentSeries> {
    let n = graph.vertex_count();
    if rho0.len() != n || m1_0.len() != n || m2_0.len() != n {
        return Err(Error::InvalidDensity(format!(
            "expected {n} components, got ({}, {}, {})",
            rho0.len(),
            m1_0.len(),
            m2_0.len()
        )));
    }
    graph.validate_density(rho0)?;
    if !(dt > 0.0) {
        return Err(Error::NonPositiveParameter { name: "dt_ode", value: dt });
    }
    let chi = graph.chi();
    // Stability guard mirrors the single-population one.
    let max_rate = (0..n)
        .map(|i| {
            let law = graph.law(i);
            (law.energy_sum() - 1.0).abs().max((law.mean_sum() - 1.0).abs())
        })
        .fold(chi, f64::max);
    if dt * max_rate > 0.5 {
        return Err(Error::OdeStepUnstable { dt, rate: max_rate });
    }

    // State layout: [rho_0.., momentum_0.., energy_0..].
    let dim = 3 * n;
    let mut y = Vec::with_capacity(dim);
    y.extend_from_slice(rho0);
    for i in 0..n {
        y.push(rho0[i] * m1_0[i]);
    }
    for i in 0..n {
        y.push(rho0[i] * m2_0[i]);
    }

    let rhs = |y: &[f64], out: &mut [f64]| {
        let (rho, rest) = y.split_at(n);
        let (mom, en) = rest.split_at(n);
        for i in 0..n {
            // Jump operator chi (sum_j P_ij x_j - x_i) acts identically on
            // density, momentum, and energy.
            let mut jr = -rho[i];
            let mut jm = -mom[i];
            let mut je = -en[i];
            for j in 0..n {
                let p_ij = graph.transition(i, j);
                jr += p_ij * rho[j];
                jm += p_ij * mom[j];
                je += p_ij * en[j];
            }
            let law = graph.law(i);
            let mu_i = match graph.mu_spec() {
                MuSpec::PerVertex(mus) => mus[i],
                MuSpec::Normalized(mu) => mu / rho[i].max(RHO_CLAMP),
            };
            let rho_low = rho[i].max(RHO_CLAMP);
            out[i] = chi * jr;
            out[n + i] = chi * jm + mu_i * (law.mean_sum() - 1.0) * rho_low * mom[i];
            out[2 * n + i] = chi * je
                + mu_i
                    * ((law.energy_sum() - 1.0) * rho_low * en[i]
                        + 2.0 * law.cross_moment() * mom[i] * mom[i]);
        }
    };

    let steps = crate::montecarlo::step_count(t_final, dt);
    let mut times = Vec::with_capacity(steps as usize + 1);
    let mut rho_series = Vec::with_capacity(steps as usize + 1);
    let mut m1_series = Vec::with_capacity(steps as usize + 1);
    let mut m2_series = Vec::with_capacity(steps as usize + 1);
    let record = |y: &[f64], rho_s: &mut Vec<Vec<f64>>, m1_s: &mut Vec<Vec<f64>>, m2_s: &mut Vec<Vec<f64>>| {
        let rho = y[..n].to_vec();
        let m1 = (0..n).map(|i| y[n + i] / y[i].max(RHO_CLAMP)).collect();
        let m2 = (0..n).map(|i| y[2 * n + i] / y[i].max(RHO_CLAMP)).collect();
        rho_s.push(rho);
        m1_s.push(m1);
        m2_s.push(m2);
    };
    times.push(0.0);
    record(&y, &mut rho_series, &mut m1_series, &mut m2_series);
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    for step in 1..=steps {
        rhs(&y, &mut k1);
        for j in 0..dim {
            tmp[j] = y[j] + 0.5 * dt * k1[j];
        }
        rhs(&tmp, &mut k2);
        for j in 0..dim {
            tmp[j] = y[j] + 0.5 * dt * k2[j];
        }
        rhs(&tmp, &mut k3);
        for j in 0..dim {
            tmp[j] = y[j] + dt * k3[j];
        }
        rhs(&tmp, &mut k4);
        for j in 0..dim {
            y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        times.push(step as f64 * dt);
        record(&y, &mut rho_series, &mut m1_series, &mut m2_series);
    }
    Ok(GraphMomentSeries { times, rho: rho_series, m1: m1_series, m2: m2_series })
}
