//! Monte Carlo experiments: replicate field simulation, evaluate and
//! normalize the functional, and compare with the Gaussian oracles.

use std::time::{Duration, Instant};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fieldsim::{FieldRealization, FrequencySampler};
use crate::functionals::{
    convergence_r, convergence_s, exact_functional, functional_path, normalize, normalized_variance, window_scale,
    NormalizationConstants, QuadratureSpec,
};
use crate::limits::LimitProcess;
use crate::quad::{Estimate, Tolerance};
use crate::rng::{stream, Purpose};
use crate::spectrum::SpectralModel;
use crate::stats::{ks_test, normal_cdf, normal_quantile, qq_points, summarize, KsResult, Summary, KS_MIN_SAMPLES};
use crate::weights::{RadialWeight, SpatialForm};

pub const DEFAULT_R: f64 = 100.0;
pub const DEFAULT_REPLICATIONS: usize = 500;
pub const DEFAULT_FREQUENCIES: usize = 1 << 14;

/// How `I_j(r)` is obtained from a simulated field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integration {
    /// Spatial product quadrature of the realized field.
    Quadrature,
    /// Closed form of the spatial integral of each simulated harmonic.
    Exact,
}

impl Integration {
    pub fn name(&self) -> &'static str {
        match self {
            Integration::Quadrature => "quadrature",
            Integration::Exact => "exact",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "quadrature" => Ok(Integration::Quadrature),
            "exact" => Ok(Integration::Exact),
            other => Err(Error::Config(format!("unknown integration '{other}' (quadrature or exact)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: SpectralModel,
    pub weight: RadialWeight,
    pub r: f64,
    pub t_grid: Vec<f64>,
    pub replications: usize,
    pub frequencies: usize,
    pub seed: u64,
    pub integration: Integration,
    pub quadrature: QuadratureSpec,
    pub tolerance: Tolerance,
    /// Scales at which `R_r` and `S_r` are tabulated; may be empty.
    pub ladder: Vec<f64>,
}

impl ExperimentConfig {
    pub fn new(model: SpectralModel, weight: RadialWeight) -> Self {
        ExperimentConfig {
            model,
            weight,
            r: DEFAULT_R,
            t_grid: vec![1.0],
            replications: DEFAULT_REPLICATIONS,
            frequencies: DEFAULT_FREQUENCIES,
            seed: 0,
            integration: Integration::Quadrature,
            quadrature: QuadratureSpec::default(),
            tolerance: default_tolerance(),
            ladder: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::Config(format!("need at least 2 replications, got {}", self.replications)));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::Config(format!("r must be finite and > 0, got {}", self.r)));
        }
        if self.t_grid.is_empty() {
            return Err(Error::Config("t grid is empty".into()));
        }
        if self.t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Config("t grid must lie in [0, 1]".into()));
        }
        if self.t_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("t grid must be sorted".into()));
        }
        if self.frequencies == 0 {
            return Err(Error::Config("need at least one frequency per field".into()));
        }
        if self.ladder.iter().any(|r| !(*r > 0.0 && r.is_finite())) || self.ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("r ladder must be positive and increasing".into()));
        }
        if self.model.dimension() != self.weight.n {
            return Err(Error::Config(format!(
                "model has n = {} but the weight has n = {}",
                self.model.dimension(),
                self.weight.n
            )));
        }
        NormalizationConstants::for_weight(&self.model, &self.weight)?;
        if self.integration == Integration::Quadrature
            && matches!(self.weight.spatial_form(), SpatialForm::Unavailable)
            && !self.weight.profile().is_zero()
        {
            return Err(Error::Config("weight has no spatial form; use exact integration".into()));
        }
        Ok(())
    }
}

fn default_tolerance() -> Tolerance {
    Tolerance::new(1e-16, 1e-9)
}

/// Statistics of `X_{r,j}(t)` at one `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSummary {
    pub t: f64,
    pub field: Summary,
    pub oracle: Summary,
    /// Exact variance of `X_{r,j}(t)` from spectral quadrature.
    pub oracle_variance: Estimate,
    pub limit_variance: f64,
    /// Field path against `N(0, oracle_variance)`; `None` when degenerate or too few samples.
    pub ks: Option<KsResult>,
    /// Oracle path against the same normal.
    pub oracle_ks: Option<KsResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub r: f64,
    pub t: f64,
    pub r_value: Estimate,
    pub s_value: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Whether the last `R_r` (and `S_r`) is below the first. `None` for a
    /// single row; all-zero columns count as converged.
    pub fn decreasing(&self) -> Option<bool> {
        if self.rows.len() < 2 {
            return None;
        }
        let (first, last) = (&self.rows[0], &self.rows[self.rows.len() - 1]);
        let drops = |a: f64, b: f64| b < a || (a == 0.0 && b == 0.0);
        let s_ok = match (&first.s_value, &last.s_value) {
            (Some(a), Some(b)) => drops(a.value, b.value),
            _ => true,
        };
        Some(drops(first.r_value.value, last.r_value.value) && s_ok)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub n: usize,
    pub j: usize,
    pub r: f64,
    pub replications: usize,
    pub frequencies: usize,
    pub seed: u64,
    pub integration: Integration,
    pub t_grid: Vec<f64>,
    /// Field path, one row per replication.
    pub samples: Vec<Vec<f64>>,
    /// Oracle path, one row per replication.
    pub oracle_samples: Vec<Vec<f64>>,
    pub per_t: Vec<TimeSummary>,
    /// Q-Q points of the field path at the last `t` against `N(0, oracle_variance)`.
    pub qq: Vec<(f64, f64)>,
    pub convergence: Option<ConvergenceTable>,
    /// Set when the oracle variance vanishes, so no normality test is possible.
    pub degenerate: bool,
    pub elapsed: Duration,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    cfg.validate()?;
    let consts = NormalizationConstants::for_weight(&cfg.model, &cfg.weight)?;
    let sampler = FrequencySampler::new(&cfg.model)?;
    let w = &cfg.weight;

    // Collected in full so that the reported failure is the lowest index.
    let samples: Vec<Result<Vec<f64>>> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|i| field_path(cfg, &sampler, &consts, i).map_err(|e| e.context(format!("replication {i}"))))
        .collect();
    let samples: Vec<Vec<f64>> = samples.into_iter().collect::<Result<_>>()?;

    let oracle_variance: Vec<Estimate> = cfg
        .t_grid
        .iter()
        .map(|&t| normalized_variance(&cfg.model, w, &consts, cfg.r, t, cfg.tolerance))
        .collect::<Result<_>>()?;
    // Marginals only: each t gets its own independent draw.
    let oracle_samples: Vec<Vec<f64>> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, Purpose::OracleDraws, i);
            oracle_variance
                .iter()
                .map(|v| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v.value.sqrt() * z
                })
                .collect()
        })
        .collect();

    let limit = LimitProcess::new(w, consts.alpha)?;
    let degenerate = oracle_variance.iter().all(|v| v.value == 0.0);
    let mut per_t = Vec::with_capacity(cfg.t_grid.len());
    for (k, &t) in cfg.t_grid.iter().enumerate() {
        let field: Vec<f64> = samples.iter().map(|row| row[k]).collect();
        let oracle: Vec<f64> = oracle_samples.iter().map(|row| row[k]).collect();
        let v = oracle_variance[k].value;
        let testable = v > 0.0 && cfg.replications >= KS_MIN_SAMPLES;
        let ks = |xs: &[f64]| if testable { ks_test(xs, |x| normal_cdf(x, v)).ok() } else { None };
        per_t.push(TimeSummary {
            t,
            field: summarize(&field)?,
            oracle: summarize(&oracle)?,
            oracle_variance: oracle_variance[k],
            limit_variance: limit.variance(t),
            ks: ks(&field),
            oracle_ks: ks(&oracle),
        });
    }
    let last = cfg.t_grid.len() - 1;
    let v_last = oracle_variance[last].value;
    let last_column: Vec<f64> = samples.iter().map(|row| row[last]).collect();
    let qq = qq_points(&last_column, |p| normal_quantile(p, v_last));

    let convergence = if cfg.ladder.is_empty() {
        None
    } else {
        Some(convergence_study(&cfg.model, w, &consts, &cfg.ladder, cfg.t_grid[last], cfg.tolerance)?)
    };

    Ok(ExperimentReport {
        n: w.n,
        j: w.j,
        r: cfg.r,
        replications: cfg.replications,
        frequencies: cfg.frequencies,
        seed: cfg.seed,
        integration: cfg.integration,
        t_grid: cfg.t_grid.clone(),
        samples,
        oracle_samples,
        per_t,
        qq,
        convergence,
        degenerate,
        elapsed: start.elapsed(),
    })
}

fn field_path(cfg: &ExperimentConfig, sampler: &FrequencySampler, consts: &NormalizationConstants, i: u64) -> Result<Vec<f64>> {
    let sample = sampler.sample(cfg.frequencies, cfg.seed, i)?;
    match cfg.integration {
        Integration::Exact => Ok(cfg
            .t_grid
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    return 0.0;
                }
                let i_value = exact_functional(&sample, &cfg.weight, window_scale(cfg.r, t, cfg.weight.n));
                normalize(i_value, consts, cfg.r, t)
            })
            .collect()),
        Integration::Quadrature => {
            let field = FieldRealization::new(&sample);
            Ok(functional_path(&field, &cfg.weight, consts, cfg.r, &cfg.t_grid, &cfg.quadrature)?.values)
        }
    }
}

/// `R_r(t)`, and `S_r(t)` when `j != 0`, along an increasing ladder of `r`.
pub fn convergence_study(
    model: &SpectralModel,
    w: &RadialWeight,
    consts: &NormalizationConstants,
    ladder: &[f64],
    t: f64,
    tol: Tolerance,
) -> Result<ConvergenceTable> {
    if ladder.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::DomainError("r ladder must be increasing".into()));
    }
    let rows = ladder
        .iter()
        .map(|&r| {
            let r_value = convergence_r(model, w, consts, r, t, tol).map_err(|e| e.context(format!("R at r = {r}")))?;
            let s_value = if consts.j == 0 {
                None
            } else {
                Some(convergence_s(model, w, consts, r, t, tol).map_err(|e| e.context(format!("S at r = {r}")))?)
            };
            Ok(ConvergenceRow { r, t, r_value, s_value })
        })
        .collect::<Result<_>>()?;
    Ok(ConvergenceTable { rows })
}
