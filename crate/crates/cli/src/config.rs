//! Flat-keyed text configuration: `key = value` lines plus `[section]`
//! headers. Unknown keys are hard errors with a nearest-key suggestion, and
//! numeric constraints of the core modules are re-validated at load time
//! with aggregated reporting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// Canned experiment names.
pub const EXPERIMENTS: [&str; 6] =
    ["fig1", "fig2", "cons_energy_sigma0", "two_vertex", "d2_contraction", "perron"];

/// All recognized configuration keys (section-qualified).
const KNOWN_KEYS: [&str; 36] = [
    "experiment",
    "seed",
    "n_particles",
    "t_final",
    "out_dir",
    "regime.lambda",
    "regime.sigma_sq",
    "regime.delta",
    "regime.eps",
    "regime.eps_list",
    "regime.eta",
    "law.gamma",
    "law.eta_variance",
    "initial.kind",
    "initial.lo",
    "initial.hi",
    "initial.x",
    "initial.mean",
    "initial.variance",
    "histogram.bins",
    "histogram.lo",
    "histogram.hi",
    "histogram.snapshots",
    "xi_grid.min",
    "xi_grid.max",
    "xi_grid.per_side",
    "contraction.trials",
    "contraction.sample_every",
    "contraction.dt",
    "graph.beta",
    "graph.chi",
    "graph.rho1_0",
    "graph.m11_0",
    "graph.g2_variance",
    "graph.n",
    "graph.p_matrix",
];

/// Typed, fully defaulted run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub experiment: String,
    pub seed: u64,
    /// Where the seed came from: "config", "default", or "env".
    pub seed_source: String,
    pub n_particles: usize,
    pub t_final: f64,
    pub out_dir: String,
    // Regime parameters (single-population experiments).
    pub lambda: f64,
    pub sigma_sq: f64,
    pub delta: f64,
    pub eps_list: Vec<f64>,
    pub eta: String,
    // Prototype law (contraction experiment).
    pub law_gamma: f64,
    pub law_eta_variance: f64,
    // Initial condition.
    pub initial_kind: String,
    pub initial_lo: f64,
    pub initial_hi: f64,
    pub initial_x: f64,
    pub initial_mean: f64,
    pub initial_variance: f64,
    // Histogram spec.
    pub hist_bins: usize,
    pub hist_lo: f64,
    pub hist_hi: f64,
    pub snapshots: Vec<f64>,
    // Frequency grid.
    pub xi_min: f64,
    pub xi_max: f64,
    pub xi_per_side: usize,
    // Contraction experiment.
    pub trials: usize,
    pub sample_every: u64,
    pub contraction_dt: f64,
    // Graph experiments.
    pub graph_beta: f64,
    pub graph_chi: f64,
    pub graph_rho1_0: f64,
    pub graph_m11_0: f64,
    pub graph_g2_variance: f64,
    pub graph_n: usize,
    pub graph_p_matrix: Option<Vec<f64>>,
}

impl RunConfig {
    /// Experiment defaults; every canned run is fully specified without a
    /// config file beyond the experiment name.
    pub fn defaults(experiment: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig {
            experiment: experiment.to_string(),
            seed: 0,
            seed_source: "default".into(),
            n_particles: 200_000,
            t_final: 10.0,
            out_dir: "out".into(),
            lambda: 3.5,
            sigma_sq: 6.0,
            delta: 1.0,
            eps_list: vec![0.04, 0.01, 0.001],
            eta: "uniform_sym".into(),
            law_gamma: 0.25,
            law_eta_variance: 0.1,
            initial_kind: "uniform".into(),
            initial_lo: -1.0,
            initial_hi: 3.0,
            initial_x: 1.0,
            initial_mean: 0.0,
            initial_variance: 1.0,
            hist_bins: 100,
            hist_lo: 0.0,
            hist_hi: 6.0,
            snapshots: vec![0.0, 2.5, 5.0, 10.0],
            xi_min: 1e-4,
            xi_max: 1e2,
            xi_per_side: 512,
            trials: 5,
            sample_every: 20,
            contraction_dt: 0.05,
            graph_beta: 0.3,
            graph_chi: 1.0,
            graph_rho1_0: 0.6,
            graph_m11_0: 1.0,
            graph_g2_variance: 0.25,
            graph_n: 6,
            graph_p_matrix: None,
        };
        match experiment {
            "fig1" => {
                cfg.seed = 12;
            }
            "fig2" => {
                cfg.seed = 2;
                cfg.lambda = 1.0;
                cfg.sigma_sq = 1.69;
                cfg.eps_list = vec![0.001];
                cfg.t_final = 4.0;
                cfg.hist_lo = -1.0;
                cfg.hist_hi = 3.0;
                cfg.snapshots = vec![1.0, 2.0, 4.0];
            }
            "cons_energy_sigma0" => {
                cfg.seed = 3;
                cfg.n_particles = 100_000;
                cfg.lambda = 1.0;
                cfg.sigma_sq = 0.0;
                cfg.eps_list = vec![0.01];
                cfg.t_final = 5.0;
                // Balanced so the empirical mean starts exactly at the
                // (unstable) zero equilibrium.
                cfg.initial_kind = "two_point_sym_balanced".into();
                cfg.initial_x = 1.0;
                cfg.hist_lo = -4.0;
                cfg.hist_hi = 4.0;
                cfg.snapshots = vec![5.0];
            }
            "two_vertex" => {
                cfg.seed = 4;
                cfg.lambda = 3.5;
                cfg.sigma_sq = 6.0;
                cfg.eps_list = vec![0.001];
                cfg.t_final = 3.0;
                cfg.snapshots = vec![1.0, 3.0];
            }
            "d2_contraction" => {
                cfg.seed = 5;
                cfg.n_particles = 50_000;
                cfg.t_final = 6.0;
                cfg.initial_lo = -3.0;
                cfg.initial_hi = 5.0;
                cfg.xi_min = 0.5;
                cfg.xi_max = 20.0;
                cfg.xi_per_side = 128;
            }
            "perron" => {
                cfg.seed = 6;
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown experiment `{other}`; known: {}",
                    EXPERIMENTS.join(", ")
                )))
            }
        }
        Ok(cfg)
    }
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            cur[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn suggest(key: &str) -> Option<&'static str> {
    // Compare against the unqualified key names too, so `sigma2` suggests
    // `sigma_sq` even without the section prefix.
    let mut best: Option<(&'static str, usize)> = None;
    for known in KNOWN_KEYS {
        let tail = known.rsplit('.').next().unwrap();
        let d = levenshtein(key, known).min(levenshtein(key, tail));
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((known, d));
        }
    }
    best.and_then(|(k, d)| (d <= 3).then_some(k))
}

/// Parse the flat key/value syntax; returns section-qualified pairs.
fn parse_lines(text: &str) -> Result<BTreeMap<String, (usize, String)>, CliError> {
    let mut section = String::new();
    let mut out: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(CliError::Config(format!("line {line_no}: malformed section header")));
            };
            section = name.trim().to_string();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "line {line_no}: expected `key = value`, got `{line}`"
            )));
        };
        let key = key.trim();
        let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        if !KNOWN_KEYS.contains(&full.as_str()) {
            let hint = suggest(&full)
                .map(|s| format!("; did you mean `{s}`?"))
                .unwrap_or_default();
            return Err(CliError::Config(format!(
                "line {line_no}: unknown key `{full}`{hint}"
            )));
        }
        if out.insert(full.clone(), (line_no, value.trim().to_string())).is_some() {
            return Err(CliError::Config(format!("line {line_no}: duplicate key `{full}`")));
        }
    }
    Ok(out)
}

struct Reader<'a> {
    pairs: &'a BTreeMap<String, (usize, String)>,
    errors: Vec<String>,
}

impl<'a> Reader<'a> {
    fn f64(&mut self, key: &str, into: &mut f64) {
        if let Some((line, v)) = self.pairs.get(key) {
            match v.parse::<f64>() {
                Ok(x) => *into = x,
                Err(_) => self.errors.push(format!("line {line}: `{key}` is not a number: {v}")),
            }
        }
    }

    fn usize(&mut self, key: &str, into: &mut usize) {
        if let Some((line, v)) = self.pairs.get(key) {
            match v.parse::<usize>() {
                Ok(x) => *into = x,
                Err(_) => self.errors.push(format!("line {line}: `{key}` is not an integer: {v}")),
            }
        }
    }

    fn u64(&mut self, key: &str, into: &mut u64) -> bool {
        if let Some((line, v)) = self.pairs.get(key) {
            match v.parse::<u64>() {
                Ok(x) => {
                    *into = x;
                    return true;
                }
                Err(_) => self.errors.push(format!("line {line}: `{key}` is not an integer: {v}")),
            }
        }
        false
    }

    fn string(&mut self, key: &str, into: &mut String) {
        if let Some((_, v)) = self.pairs.get(key) {
            *into = v.clone();
        }
    }

    fn f64_list(&mut self, key: &str, into: &mut Vec<f64>) {
        if let Some((line, v)) = self.pairs.get(key) {
            let parsed: Result<Vec<f64>, _> =
                v.split(',').map(|p| p.trim().parse::<f64>()).collect();
            match parsed {
                Ok(xs) if !xs.is_empty() => *into = xs,
                _ => self.errors.push(format!("line {line}: `{key}` is not a number list: {v}")),
            }
        }
    }
}

/// Load, merge with experiment defaults, and validate.
///
/// `env_seed` is the optional KINETIC_MC_SEED override.
pub fn load_config(path: &Path, env_seed: Option<u64>) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    load_config_str(&text, env_seed)
}

pub fn load_config_str(text: &str, env_seed: Option<u64>) -> Result<RunConfig, CliError> {
    let pairs = parse_lines(text)?;
    let Some((_, experiment)) = pairs.get("experiment") else {
        return Err(CliError::Config("missing required key `experiment`".into()));
    };
    let mut cfg = RunConfig::defaults(experiment)?;
    let mut r = Reader { pairs: &pairs, errors: Vec::new() };
    if r.u64("seed", &mut cfg.seed) {
        cfg.seed_source = "config".into();
    }
    r.usize("n_particles", &mut cfg.n_particles);
    r.f64("t_final", &mut cfg.t_final);
    r.string("out_dir", &mut cfg.out_dir);
    r.f64("regime.lambda", &mut cfg.lambda);
    r.f64("regime.sigma_sq", &mut cfg.sigma_sq);
    r.f64("regime.delta", &mut cfg.delta);
    let mut single_eps = f64::NAN;
    r.f64("regime.eps", &mut single_eps);
    if single_eps.is_finite() {
        cfg.eps_list = vec![single_eps];
    }
    r.f64_list("regime.eps_list", &mut cfg.eps_list);
    r.string("regime.eta", &mut cfg.eta);
    r.f64("law.gamma", &mut cfg.law_gamma);
    r.f64("law.eta_variance", &mut cfg.law_eta_variance);
    r.string("initial.kind", &mut cfg.initial_kind);
    r.f64("initial.lo", &mut cfg.initial_lo);
    r.f64("initial.hi", &mut cfg.initial_hi);
    r.f64("initial.x", &mut cfg.initial_x);
    r.f64("initial.mean", &mut cfg.initial_mean);
    r.f64("initial.variance", &mut cfg.initial_variance);
    r.usize("histogram.bins", &mut cfg.hist_bins);
    r.f64("histogram.lo", &mut cfg.hist_lo);
    r.f64("histogram.hi", &mut cfg.hist_hi);
    r.f64_list("histogram.snapshots", &mut cfg.snapshots);
    r.f64("xi_grid.min", &mut cfg.xi_min);
    r.f64("xi_grid.max", &mut cfg.xi_max);
    r.usize("xi_grid.per_side", &mut cfg.xi_per_side);
    r.usize("contraction.trials", &mut cfg.trials);
    let mut sample_every = cfg.sample_every;
    r.u64("contraction.sample_every", &mut sample_every);
    cfg.sample_every = sample_every;
    r.f64("contraction.dt", &mut cfg.contraction_dt);
    r.f64("graph.beta", &mut cfg.graph_beta);
    r.f64("graph.chi", &mut cfg.graph_chi);
    r.f64("graph.rho1_0", &mut cfg.graph_rho1_0);
    r.f64("graph.m11_0", &mut cfg.graph_m11_0);
    r.f64("graph.g2_variance", &mut cfg.graph_g2_variance);
    r.usize("graph.n", &mut cfg.graph_n);
    if let Some((line, v)) = pairs.get("graph.p_matrix") {
        let parsed: Result<Vec<f64>, _> = v
            .split([',', ';'])
            .map(|p| p.trim().parse::<f64>())
            .collect();
        match parsed {
            Ok(xs) => cfg.graph_p_matrix = Some(xs),
            Err(_) => r
                .errors
                .push(format!("line {line}: `graph.p_matrix` is not a number matrix: {v}")),
        }
    }
    let mut errors = r.errors;
    if let Some(seed) = env_seed {
        cfg.seed = seed;
        cfg.seed_source = "env".into();
    }

    validate(&cfg, &mut errors);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        let mut msg = String::from("configuration invalid:");
        for e in errors {
            let _ = write!(msg, "\n  - {e}");
        }
        Err(CliError::Config(msg))
    }
}

/// Re-validate the numeric constraints of the referenced core modules.
fn validate(cfg: &RunConfig, errors: &mut Vec<String>) {
    if cfg.n_particles < 2 || cfg.n_particles % 2 != 0 {
        errors.push(format!("n_particles must be even and >= 2, got {}", cfg.n_particles));
    }
    if !(cfg.t_final > 0.0) {
        errors.push(format!("t_final must be positive, got {}", cfg.t_final));
    }
    if cfg.hist_bins == 0 || !(cfg.hist_lo < cfg.hist_hi) {
        errors.push(format!(
            "histogram must have bins >= 1 and lo < hi, got {} bins on [{}, {}]",
            cfg.hist_bins, cfg.hist_lo, cfg.hist_hi
        ));
    }
    if !(cfg.xi_min > 0.0 && cfg.xi_max > cfg.xi_min && cfg.xi_per_side >= 2) {
        errors.push(format!(
            "xi grid must satisfy 0 < min < max with per_side >= 2, got [{}, {}] x {}",
            cfg.xi_min, cfg.xi_max, cfg.xi_per_side
        ));
    }
    match cfg.initial_kind.as_str() {
        "uniform" => {
            if !(cfg.initial_lo < cfg.initial_hi) {
                errors.push(format!(
                    "initial uniform interval [{}, {}] must be nondegenerate",
                    cfg.initial_lo, cfg.initial_hi
                ));
            }
        }
        "two_point_sym" | "two_point_sym_balanced" | "dirac" => {}
        "gaussian" => {
            if !(cfg.initial_variance > 0.0) {
                errors.push(format!(
                    "initial gaussian variance must be positive, got {}",
                    cfg.initial_variance
                ));
            }
        }
        other => errors.push(format!(
            "initial.kind must be uniform | two_point_sym | two_point_sym_balanced | dirac \
             | gaussian, got `{other}`"
        )),
    }
    if !matches!(cfg.eta.as_str(), "uniform_sym" | "two_point_sym") {
        errors.push(format!("regime.eta must be uniform_sym or two_point_sym, got `{}`", cfg.eta));
    }
    // Regime admissibility for the quasi-invariant experiments.
    if matches!(cfg.experiment.as_str(), "fig1" | "fig2" | "cons_energy_sigma0" | "two_vertex") {
        match crate::experiments::build_regime(cfg) {
            Ok(regime) => {
                let eps_max = regime.eps_max();
                for &eps in &cfg.eps_list {
                    if !(eps > 0.0) {
                        errors.push(format!("eps must be positive, got {eps}"));
                    } else if eps >= eps_max {
                        errors.push(format!(
                            "eps = {eps} is not admissible: the bound for lambda = {}, \
                             sigma_sq = {} is eps < {eps_max}",
                            cfg.lambda, cfg.sigma_sq
                        ));
                    }
                }
                if let Err(e) = regime.materialize(cfg.eps_list[0].min(0.5 * eps_max)) {
                    errors.push(format!("regime inadmissible: {e}"));
                }
            }
            Err(e) => errors.push(format!("regime invalid: {e}")),
        }
    }
    if cfg.experiment == "two_vertex" {
        if !(0.0 < cfg.graph_beta && cfg.graph_beta < 1.0) {
            errors.push(format!("graph.beta must lie in (0,1), got {}", cfg.graph_beta));
        }
        if !(cfg.graph_rho1_0 > 0.0 && cfg.graph_rho1_0 < 1.0) {
            errors.push(format!("graph.rho1_0 must lie in (0,1), got {}", cfg.graph_rho1_0));
        }
        if !(cfg.graph_m11_0 > 0.0) {
            errors.push(format!("graph.m11_0 must be positive, got {}", cfg.graph_m11_0));
        }
        if !(cfg.graph_g2_variance > 0.0) {
            errors.push(format!(
                "graph.g2_variance must be positive, got {}",
                cfg.graph_g2_variance
            ));
        }
    }
    if cfg.experiment == "perron" {
        if cfg.graph_n < 1 || cfg.graph_n > 1000 {
            errors.push(format!("graph.n must lie in [1, 1000], got {}", cfg.graph_n));
        }
        if let Some(p) = &cfg.graph_p_matrix {
            if p.len() != cfg.graph_n * cfg.graph_n {
                errors.push(format!(
                    "graph.p_matrix has {} entries, expected {}",
                    p.len(),
                    cfg.graph_n * cfg.graph_n
                ));
            }
        }
    }
    if cfg.experiment == "d2_contraction" {
        if cfg.trials == 0 {
            errors.push("contraction.trials must be >= 1".into());
        }
        if cfg.sample_every == 0 {
            errors.push("contraction.sample_every must be >= 1".into());
        }
        if !(cfg.contraction_dt > 0.0 && cfg.contraction_dt <= 1.0) {
            errors.push(format!("contraction.dt must lie in (0,1], got {}", cfg.contraction_dt));
        }
        let gamma = cfg.law_gamma;
        if !(0.0 < gamma && gamma < 1.0) {
            errors.push(format!("law.gamma must lie in (0,1), got {gamma}"));
        }
        if !(cfg.law_eta_variance >= 0.0) {
            errors.push(format!("law.eta_variance must be >= 0, got {}", cfg.law_eta_variance));
        }
    }
}
