//! TOML run configuration.
//!
//! ```toml
//! preset = "cauchy-like"          # or [model] and [weight] below
//!
//! [model]
//! n = 2
//! local = false                   # allow non-decaying envelopes
//! components = [
//!   { location = 0.0, alpha = 1.0, envelope = { kind = "exponential", params = [1.0, 20.0] } },
//! ]
//!
//! [weight]
//! kind = "donsker"                # gaussian-ring, rational, tabulated, zero
//! j = 0
//! c = 1.0
//! sigma = 8.5                     # gaussian-ring
//! power = 2.0                     # rational
//! spatial = { kind = "ball", radius = 1.0 }   # tabulated: ball, polynomial, samples
//! grid_end = 1000.0               # tabulated
//!
//! [experiment]
//! r = 100.0
//! t = [1.0]
//! replications = 500
//! frequencies = 16384
//! seed = 0
//! integration = "quadrature"      # or "exact"
//!
//! [quadrature]
//! nodes_per_wavelength = 12.0
//! max_frequency = 3.0
//! abs_tol = 1e-16
//! rel_tol = 1e-9
//!
//! [convergence]
//! ladder = [10.0, 100.0, 1000.0, 10000.0]
//!
//! [limit]
//! t = [0.2, 0.4, 0.6, 0.8, 1.0]
//! replications = 10000
//! method = "cholesky"             # or "shells"
//! shells = 4096
//!
//! [field]
//! lags = [0.0, 1.0, 2.0]          # covariance
//! lambdas = [0.5, 1.5]            # density
//! points = [[0.0, 0.0], [1.0, 0.0]]   # simulate
//! covariance_replications = 0     # Monte Carlo covariance next to the exact one
//!
//! [output]
//! dir = "out"
//! ```

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::functionals::QuadratureSpec;
use crate::harness::{ExperimentConfig, Integration, DEFAULT_FREQUENCIES, DEFAULT_R, DEFAULT_REPLICATIONS};
use crate::limits::{PathMethod, MIN_SHELLS};
use crate::models::preset;
use crate::quad::Tolerance;
use crate::spectrum::{Envelope, SingularComponent, SpectralModel};
use crate::weights::{default_profile_grid, RadialWeight, SpatialProfile, DEFAULT_PROFILE_END};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    model: Option<RawModel>,
    weight: Option<RawWeight>,
    #[serde(default)]
    experiment: RawExperiment,
    #[serde(default)]
    quadrature: RawQuadrature,
    #[serde(default)]
    convergence: RawConvergence,
    #[serde(default)]
    limit: RawLimit,
    #[serde(default)]
    field: RawField,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    n: usize,
    #[serde(default)]
    local: bool,
    components: Vec<RawComponent>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    location: f64,
    alpha: f64,
    envelope: RawEnvelope,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvelope {
    kind: String,
    params: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeight {
    kind: String,
    #[serde(default)]
    j: usize,
    c: Option<f64>,
    sigma: Option<f64>,
    power: Option<f64>,
    spatial: Option<RawSpatial>,
    grid_end: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpatial {
    kind: String,
    radius: Option<f64>,
    coeffs: Option<Vec<f64>>,
    radii: Option<Vec<f64>>,
    values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    r: Option<f64>,
    t: Option<Vec<f64>>,
    replications: Option<usize>,
    frequencies: Option<usize>,
    seed: Option<u64>,
    integration: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuadrature {
    nodes_per_wavelength: Option<f64>,
    max_frequency: Option<f64>,
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConvergence {
    ladder: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLimit {
    t: Option<Vec<f64>>,
    replications: Option<usize>,
    method: Option<String>,
    shells: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    lags: Option<Vec<f64>>,
    lambdas: Option<Vec<f64>>,
    points: Option<Vec<Vec<f64>>>,
    covariance_replications: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitSettings {
    pub t_grid: Vec<f64>,
    pub replications: usize,
    pub method: PathMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSettings {
    pub lags: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub covariance_replications: usize,
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub limit: LimitSettings,
    pub field: FieldSettings,
    pub output_dir: Option<String>,
}

/// Overrides applied after parsing and before validation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub r: Option<f64>,
    pub frequencies: Option<usize>,
}

pub fn parse_config(text: &str, overrides: Overrides) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    let (model, weight) = match (&raw.preset, raw.model, raw.weight) {
        (Some(name), None, None) => {
            let p = preset(name)?;
            (p.model, p.weight)
        }
        (Some(_), _, _) => return Err(Error::Config("give either a preset or [model] and [weight], not both".into())),
        (None, Some(m), Some(w)) => {
            let model = build_model(m)?;
            let weight = build_weight(w, &model)?;
            (model, weight)
        }
        (None, _, _) => return Err(Error::Config("missing [model] or [weight] section".into())),
    };

    let mut exp = ExperimentConfig::new(model, weight);
    let e = raw.experiment;
    exp.r = overrides.r.or(e.r).unwrap_or(DEFAULT_R);
    exp.t_grid = e.t.unwrap_or_else(|| vec![1.0]);
    exp.replications = overrides.replications.or(e.replications).unwrap_or(DEFAULT_REPLICATIONS);
    exp.frequencies = overrides.frequencies.or(e.frequencies).unwrap_or(DEFAULT_FREQUENCIES);
    exp.seed = overrides.seed.or(e.seed).unwrap_or(0);
    if let Some(i) = e.integration {
        exp.integration = Integration::from_name(&i)?;
    }
    let q = raw.quadrature;
    exp.quadrature = QuadratureSpec {
        nodes_per_wavelength: q.nodes_per_wavelength.unwrap_or(QuadratureSpec::default().nodes_per_wavelength),
        max_frequency: q.max_frequency,
    };
    let (abs, rel) = (q.abs_tol.unwrap_or(exp.tolerance.abs), q.rel_tol.unwrap_or(exp.tolerance.rel));
    if !(abs >= 0.0 && rel >= 0.0 && abs + rel > 0.0) {
        return Err(Error::Config("tolerances must be >= 0 and not both zero".into()));
    }
    exp.tolerance = Tolerance::new(abs, rel);
    exp.ladder = raw.convergence.ladder.unwrap_or_default();
    exp.validate()?;

    let l = raw.limit;
    let method = match l.method.as_deref().unwrap_or("cholesky") {
        "cholesky" => PathMethod::Cholesky,
        "shells" => PathMethod::Shells { shells: l.shells.unwrap_or(4096) },
        other => return Err(Error::Config(format!("unknown limit method '{other}' (cholesky or shells)"))),
    };
    if let PathMethod::Shells { shells } = method {
        if shells < MIN_SHELLS {
            return Err(Error::Config(format!("need at least {MIN_SHELLS} shells, got {shells}")));
        }
    }
    let limit = LimitSettings {
        t_grid: l.t.unwrap_or_else(|| vec![0.2, 0.4, 0.6, 0.8, 1.0]),
        replications: overrides.replications.or(l.replications).unwrap_or(10_000),
        method,
    };
    if limit.t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Config("limit t grid must lie in [0, 1]".into()));
    }

    let f = raw.field;
    let n = exp.model.dimension();
    let field = FieldSettings {
        lags: f.lags.unwrap_or_else(|| (0..=20).map(|k| k as f64).collect()),
        lambdas: f.lambdas.unwrap_or_else(|| (1..=40).map(|k| 0.05 * k as f64 - 0.025).collect()),
        points: f.points.unwrap_or_else(|| {
            (0..=100)
                .map(|k| {
                    let mut x = vec![0.0; n];
                    x[0] = 0.5 * k as f64;
                    x
                })
                .collect()
        }),
        covariance_replications: f.covariance_replications.unwrap_or(0),
    };
    if field.points.iter().any(|p| p.len() != n) {
        return Err(Error::Config(format!("field points must have {n} coordinates")));
    }
    if field.lags.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::Config("lags must be finite and >= 0".into()));
    }

    Ok(RunConfig { experiment: exp, limit, field, output_dir: raw.output.dir })
}

fn build_model(m: RawModel) -> Result<SpectralModel> {
    let comps = m
        .components
        .into_iter()
        .map(|c| Ok(SingularComponent::new(c.location, c.alpha, Envelope::from_kind(&c.envelope.kind, &c.envelope.params)?)))
        .collect::<Result<Vec<_>>>()?;
    if m.local {
        SpectralModel::local(m.n, comps)
    } else {
        SpectralModel::new(m.n, comps)
    }
}

fn build_weight(w: RawWeight, model: &SpectralModel) -> Result<RadialWeight> {
    let n = model.dimension();
    let a_j = model
        .components()
        .get(w.j)
        .ok_or_else(|| Error::Config(format!("weight index j = {} but the model has {} components", w.j, model.components().len())))?
        .location;
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Config(format!("weight kind '{}' needs '{name}'", w.kind)));
    match w.kind.as_str() {
        "donsker" => {
            if w.j != 0 {
                return Err(Error::Config("the donsker weight is matched to j = 0".into()));
            }
            RadialWeight::donsker(n)
        }
        "gaussian-ring" => RadialWeight::gaussian_ring(n, w.j, a_j, w.c.unwrap_or(1.0), need(w.sigma, "sigma")?),
        "rational" => RadialWeight::rational(n, w.j, a_j, w.c.unwrap_or(1.0), need(w.power, "power")?),
        "zero" => RadialWeight::zero(n),
        "tabulated" => {
            let s = w.spatial.clone().ok_or_else(|| Error::Config("tabulated weight needs 'spatial'".into()))?;
            let spatial = build_spatial(s)?;
            let grid = default_profile_grid(w.grid_end.unwrap_or(DEFAULT_PROFILE_END));
            RadialWeight::tabulated(n, w.j, a_j, spatial, &grid)
        }
        other => Err(Error::Config(format!(
            "unknown weight kind '{other}' (donsker, gaussian-ring, rational, tabulated, zero)"
        ))),
    }
}

fn build_spatial(s: RawSpatial) -> Result<SpatialProfile> {
    let missing = |name: &str| Error::Config(format!("spatial kind '{}' needs '{name}'", s.kind));
    Ok(match s.kind.as_str() {
        "ball" => SpatialProfile::Ball { radius: s.radius.ok_or_else(|| missing("radius"))? },
        "polynomial" => SpatialProfile::Polynomial {
            coeffs: s.coeffs.clone().ok_or_else(|| missing("coeffs"))?,
            radius: s.radius.ok_or_else(|| missing("radius"))?,
        },
        "samples" => SpatialProfile::Samples {
            radii: s.radii.clone().ok_or_else(|| missing("radii"))?,
            values: s.values.clone().ok_or_else(|| missing("values"))?,
        },
        other => return Err(Error::Config(format!("unknown spatial kind '{other}' (ball, polynomial, samples)"))),
    })
}
