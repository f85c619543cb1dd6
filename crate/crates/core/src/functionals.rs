//! Weighted functionals `I_j(r) = r^{-n} int f_{j,r}(x) xi(x) dx`, their
//! normalizations `X_{r,j}(t)`, the exact Gaussian law of `I_j(r)` and the
//! convergence functionals `Q_r`, `R_r`, `Q̄_r`, `S_r`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fieldsim::{FieldRealization, FrequencySample};
use crate::quad::{self, gauss_legendre, CompensatedSum, Estimate, Tolerance};
use crate::special::sphere_area;
use crate::spectrum::{Segmentation, Side, SpectralModel};
use crate::weights::{ProfileTail, RadialWeight};

/// Start of the tail region in units of the weight argument `s`.
const TAIL_START: f64 = 2048.0;
/// Nodes per panel of the radial rule.
const PANEL_NODES: usize = 8;
/// Smallest admissible radial resolution.
pub const MIN_NODES_PER_WAVELENGTH: f64 = 4.0;

/// Resolution of the spatial product rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Radial nodes per wavelength `2 pi / max_frequency`.
    pub nodes_per_wavelength: f64,
    /// Frequency the grid is designed for; defaults to the largest sampled one.
    pub max_frequency: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { nodes_per_wavelength: 12.0, max_frequency: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationConstants {
    pub j: usize,
    pub n: usize,
    pub a_j: f64,
    pub alpha: f64,
    pub h_at_zero: f64,
    /// `1` for `j = 0`, else `2 a_j^{n-1}`.
    pub a_factor: f64,
    /// `1` for `j = 0`, else `a_j^{n-1}`.
    pub v_factor: f64,
}

impl NormalizationConstants {
    pub fn new(model: &SpectralModel, j: usize) -> Result<Self> {
        let comp = model
            .components()
            .get(j)
            .ok_or_else(|| Error::IndexMismatch(format!("model has no component {j}")))?;
        let n = model.dimension();
        let a = comp.location;
        let (a_factor, v_factor) = if j == 0 { (1.0, 1.0) } else { (2.0 * a.powi(n as i32 - 1), a.powi(n as i32 - 1)) };
        let h_at_zero = comp.envelope.at_zero();
        if !(h_at_zero > 0.0) {
            return Err(Error::InvalidModel(format!("envelope of component {j} vanishes at 0")));
        }
        Ok(NormalizationConstants { j, n, a_j: a, alpha: comp.alpha, h_at_zero, a_factor, v_factor })
    }

    /// Constants for the component the weight is matched to.
    pub fn for_weight(model: &SpectralModel, w: &RadialWeight) -> Result<Self> {
        check_pair(model, w)?;
        Self::new(model, w.j)
    }
}

fn check_pair(model: &SpectralModel, w: &RadialWeight) -> Result<()> {
    if w.n != model.dimension() {
        return Err(Error::IndexMismatch(format!(
            "weight is for dimension {}, model has dimension {}",
            w.n,
            model.dimension()
        )));
    }
    match model.components().get(w.j) {
        Some(c) if c.location == w.a_j => Ok(()),
        Some(c) => Err(Error::IndexMismatch(format!(
            "weight {} is matched to {}, component {} sits at {}",
            w.j, w.a_j, w.j, c.location
        ))),
        None => Err(Error::IndexMismatch(format!("model has no component {}", w.j))),
    }
}

/// Nodes of the spatial product rule.
struct ProductRule {
    n: usize,
    /// `(rho, combined radial weight)`.
    radial: Vec<(f64, f64)>,
    /// Angular rule per radial node: unit vectors and weights, stored flat.
    angular: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Angular resolution needed to integrate `cos(x <theta, e>)` exactly to
/// working precision: the band limit of the angular expansion plus margin.
fn angular_band(x: f64) -> usize {
    (x + 8.0 * x.cbrt() + 16.0).ceil() as usize
}

/// Directions covering half the sphere, with weights for the whole sphere.
/// Only even integrands are integrated, so antipodes are folded together.
fn half_sphere(n: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let band = angular_band(x);
    match n {
        1 => (vec![1.0], vec![2.0]),
        2 => {
            let full = 2 * band.div_ceil(2).max(4);
            let half = full / 2;
            let mut dirs = Vec::with_capacity(2 * half);
            for m in 0..half {
                let th = 2.0 * PI * m as f64 / full as f64;
                dirs.extend([th.cos(), th.sin()]);
            }
            (dirs, vec![4.0 * PI / full as f64; half])
        }
        _ => {
            // Gauss-Legendre in cos(theta) (even count, positive half) times a
            // uniform azimuthal grid.
            let p = 2 * (band / 4 + 1);
            let q = band + 1;
            let gl = gauss_legendre(p);
            let mut dirs = Vec::new();
            let mut wts = Vec::new();
            for &(z, wz) in gl.iter().filter(|(z, _)| *z > 0.0) {
                let s = (1.0 - z * z).sqrt();
                for m in 0..q {
                    let ph = 2.0 * PI * m as f64 / q as f64;
                    dirs.extend([s * ph.cos(), s * ph.sin(), z]);
                    wts.push(2.0 * wz * 2.0 * PI / q as f64);
                }
            }
            (dirs, wts)
        }
    }
}

impl ProductRule {
    fn new(w: &RadialWeight, r: f64, design_frequency: f64, nodes_per_wavelength: f64) -> Result<Self> {
        let n = w.n;
        let support = w.spatial_support(r)?;
        let freq = design_frequency.max(2.0 * PI / support);
        let panel = PANEL_NODES as f64 / nodes_per_wavelength * 2.0 * PI / freq;
        let mut edges = vec![0.0];
        edges.extend(w.spatial_breakpoints(r).into_iter().filter(|&b| b > 0.0 && b < support));
        edges.push(support);
        let gl = gauss_legendre(PANEL_NODES);
        let scale = r.powi(-(n as i32));
        let mut radial = Vec::new();
        let mut angular = Vec::new();
        for seg in edges.windows(2) {
            let count = ((seg[1] - seg[0]) / panel).ceil().max(1.0) as usize;
            let h = (seg[1] - seg[0]) / count as f64;
            for k in 0..count {
                let mid = seg[0] + (k as f64 + 0.5) * h;
                for &(x, wt) in &gl {
                    let rho = mid + 0.5 * h * x;
                    let f = w.spatial_value(r, rho)?;
                    if f == 0.0 {
                        continue;
                    }
                    radial.push((rho, 0.5 * h * wt * f * rho.powi(n as i32 - 1) * scale));
                    angular.push(half_sphere(n, freq * rho));
                }
            }
        }
        Ok(ProductRule { n, radial, angular })
    }

    fn apply(&self, field: &FieldRealization) -> f64 {
        let n = self.n;
        let mut total = CompensatedSum::new();
        let mut x = vec![0.0; n];
        for ((rho, rw), (dirs, wts)) in self.radial.iter().zip(&self.angular) {
            let mut shell = 0.0;
            for (dir, wt) in dirs.chunks(n).zip(wts) {
                for c in 0..n {
                    x[c] = rho * dir[c];
                }
                shell += wt * field.even_part(&x);
            }
            total.add(rw * shell);
        }
        total.value()
    }
}

/// `I_j(r)` for one realization by spatial product quadrature.
pub fn functional_i(field: &FieldRealization, w: &RadialWeight, r: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::DomainError(format!("scale r must be finite and >= 0, got {r}")));
    }
    if field.dimension() != w.n {
        return Err(Error::IndexMismatch("field and weight dimensions differ".into()));
    }
    if r == 0.0 || w.profile().is_zero() {
        return Ok(0.0);
    }
    let sampled = field.max_frequency();
    let design = spec.max_frequency.unwrap_or(sampled);
    let effective = if sampled > 0.0 { spec.nodes_per_wavelength * design / sampled } else { spec.nodes_per_wavelength };
    if !(effective >= MIN_NODES_PER_WAVELENGTH) {
        return Err(Error::ResolutionTooCoarse {
            nodes_per_wavelength: effective,
            required: MIN_NODES_PER_WAVELENGTH,
        });
    }
    Ok(ProductRule::new(w, r, design, spec.nodes_per_wavelength)?.apply(field))
}

/// `I_j(r)` computed from the frequencies directly:
/// `sum_k amp_k zeta_k g_j(r (|lambda_k| - a_j))`.
pub fn exact_functional(sample: &FrequencySample, w: &RadialWeight, r: f64) -> f64 {
    let mut s = CompensatedSum::new();
    for k in 0..sample.len() {
        s.add(sample.amplitudes[k] * sample.zeta[k] * w.g(r * (sample.radii[k] - w.a_j)));
    }
    s.value()
}

/// `X_{r,j}(t)` from `I_j(r t^{1/n})`.
pub fn normalize(i_value: f64, consts: &NormalizationConstants, r: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    t * r.powf(0.5 * consts.alpha) * i_value / (consts.a_factor * consts.h_at_zero).sqrt()
}

/// Scale at which `I` enters `X_{r,j}(t)`.
pub fn window_scale(r: f64, t: f64, n: usize) -> f64 {
    r * t.powf(1.0 / n as f64)
}

/// `X_{r,j}` along a `t` grid for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub r: f64,
    pub j: usize,
}

pub fn functional_path(
    field: &FieldRealization,
    w: &RadialWeight,
    consts: &NormalizationConstants,
    r: f64,
    t_grid: &[f64],
    spec: &QuadratureSpec,
) -> Result<FunctionalSample> {
    let mut values = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::DomainError(format!("t must lie in [0, 1], got {t}")));
        }
        let v = if t == 0.0 {
            0.0
        } else {
            normalize(functional_i(field, w, window_scale(r, t, w.n), spec)?, consts, r, t)
        };
        values.push(v);
    }
    Ok(FunctionalSample { t: t_grid.to_vec(), values, r, j: w.j })
}

/// `Var I_j(r) = int g_j^2(r (|lambda| - a_j)) phi(|lambda|) dlambda`.
pub fn spectral_variance(model: &SpectralModel, w: &RadialWeight, r: f64, tol: Tolerance) -> Result<Estimate> {
    check_pair(model, w)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::DomainError(format!("scale r must be finite and > 0, got {r}")));
    }
    let profile = w.profile();
    if profile.is_zero() {
        return Ok(Estimate::default());
    }
    let a = w.a_j;
    let g2 = |lambda: f64| profile.eval(r * (lambda - a)).powi(2);
    let seg = Segmentation::Uniform { origin: a, width: profile.panel_width() / r };
    if let ProfileTail::Negligible { cutoff } = profile.tail() {
        let lo = (a - cutoff / r).max(0.0);
        return model.integrate_radial(&g2, lo, a + cutoff / r, seg, tol, false);
    }
    // Everything up to the end of the finite parts, or to the tail start.
    let mut hi = a + TAIL_START / r;
    for part in model.parts() {
        if let Some(e) = part.extent {
            let top = match part.side {
                Side::Outer => part.location + e,
                Side::Inner => part.location,
            };
            hi = hi.max(top);
        }
        hi = hi.max(part.location);
    }
    let mut total = model.integrate_radial(&g2, 0.0, hi, seg, tol, false)?;
    for part in model.parts() {
        if part.side != Side::Outer || part.extent.is_some() {
            continue;
        }
        let d0 = hi - part.location;
        let f = |d: f64| part.bounded(d) * d.powf(part.alpha - 1.0);
        total += profile.square_integral(&f, r * (part.location - a), r, d0, f64::INFINITY, tol)?;
    }
    Ok(total)
}

/// `Var X_{r,j}(t) = t^2 r^alpha Var I_j(r t^{1/n}) / (A_j h_j(0))`.
pub fn normalized_variance(
    model: &SpectralModel,
    w: &RadialWeight,
    consts: &NormalizationConstants,
    r: f64,
    t: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    if t == 0.0 {
        return Ok(Estimate::default());
    }
    let sv = spectral_variance(model, w, window_scale(r, t, w.n), tol)?;
    Ok(sv.scale(t * t * r.powf(consts.alpha) / (consts.a_factor * consts.h_at_zero)))
}

fn component_term(model: &SpectralModel, i: usize, x: f64, at: f64, alpha_j: f64, hj0: f64) -> Result<f64> {
    // x^{1-alpha_j} h_i(at - a_i) / (h_j(0) |at - a_i|^{e_i}), e_0 = n - alpha_0, e_i = 1 - alpha_i
    let c = &model.components()[i];
    let d = at - c.location;
    if d == 0.0 {
        return Err(Error::SingularPoint { at });
    }
    let e = if i == 0 { model.dimension() as f64 - c.alpha } else { 1.0 - c.alpha };
    Ok(x.powf(1.0 - alpha_j) * c.envelope.eval(d) / (hj0 * d.abs().powf(e)))
}

/// `Q_r(rho)`, the outer-region discrepancy factor.
pub fn q_factor(model: &SpectralModel, consts: &NormalizationConstants, r: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && r > 0.0) {
        return Err(Error::DomainError(format!("need rho > 0 and r > 0, got {rho}, {r}")));
    }
    let x = rho / r;
    let (j, a, n) = (consts.j, consts.a_j, consts.n as f64);
    let hj0 = consts.h_at_zero;
    let mut b = 0.0;
    if j != 0 {
        b += model.components()[j].envelope.eval(x) / hj0;
    }
    for i in 0..model.components().len() {
        if i != j || j == 0 {
            b += component_term(model, i, x, x + a, consts.alpha, hj0)?;
        }
    }
    let root = consts.v_factor.powf(-0.5) * (a + x).powf(0.5 * (n - 1.0)) * b.sqrt();
    Ok((root - 1.0).powi(2))
}

/// `(1 - rho/(r a_j))_+^{(n-1)/2}`; zero from `rho = r a_j` on, for every `n`.
pub fn inner_factor(consts: &NormalizationConstants, r: f64, rho: f64) -> f64 {
    let y = 1.0 - rho / (r * consts.a_j);
    if y <= 0.0 {
        0.0
    } else {
        y.powf(0.5 * (consts.n as f64 - 1.0))
    }
}

/// `Q̄_r(rho)`, the inner-region discrepancy factor (`j != 0`).
pub fn q_bar(model: &SpectralModel, consts: &NormalizationConstants, r: f64, rho: f64) -> Result<f64> {
    if consts.j == 0 {
        return Err(Error::IndexMismatch("the inner region is empty for j = 0".into()));
    }
    if !(rho > 0.0 && r > 0.0) {
        return Err(Error::DomainError(format!("need rho > 0 and r > 0, got {rho}, {r}")));
    }
    let factor = inner_factor(consts, r, rho);
    if factor == 0.0 {
        return Ok(1.0);
    }
    let x = rho / r;
    let (j, a) = (consts.j, consts.a_j);
    let hj0 = consts.h_at_zero;
    let mut b = model.components()[j].envelope.eval(-x) / hj0;
    for i in 0..model.components().len() {
        if i != j {
            b += component_term(model, i, x, a - x, consts.alpha, hj0)?;
        }
    }
    Ok((factor * b.sqrt() - 1.0).powi(2))
}

/// Which discrepancy factor a convergence integral uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Outer,
    Inner,
}

/// Points `rho` where the discrepancy factor has an integrable power
/// singularity, with the exponent of `|rho - point|`.
fn singular_points(model: &SpectralModel, consts: &NormalizationConstants, r: f64, region: Region) -> Vec<(f64, f64)> {
    let a = consts.a_j;
    let mut pts = Vec::new();
    for (i, c) in model.components().iter().enumerate() {
        if i == consts.j {
            continue;
        }
        match region {
            Region::Outer if c.location > a => pts.push((r * (c.location - a), c.alpha)),
            Region::Inner if c.location < a => {
                let gamma = if i == 0 { c.alpha.min(1.0) } else { c.alpha };
                pts.push((r * (a - c.location), gamma));
            }
            _ => {}
        }
    }
    if region == Region::Inner {
        // The inner factor switches off at rho = r a_j.
        if !pts.iter().any(|p| p.0 == r * a) {
            pts.push((r * a, 1.0));
        }
    }
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    pts
}

fn convergence_integral(
    model: &SpectralModel,
    w: &RadialWeight,
    consts: &NormalizationConstants,
    r: f64,
    t: f64,
    tol: Tolerance,
    region: Region,
) -> Result<Estimate> {
    check_pair(model, w)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::DomainError(format!("t must lie in [0, 1], got {t}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::DomainError(format!("scale r must be finite and > 0, got {r}")));
    }
    if t == 0.0 || w.profile().is_zero() {
        return Ok(Estimate::default());
    }
    let n = consts.n;
    let tau = t.powf(1.0 / n as f64);
    let profile = w.profile();
    let alpha = consts.alpha;
    let factor = |rho: f64| match region {
        Region::Outer => q_factor(model, consts, r, rho),
        Region::Inner => q_bar(model, consts, r, rho),
    };
    // Errors inside the integrand are recorded and reported afterwards.
    let failure = std::cell::RefCell::new(None);
    let weight = |rho: f64| match factor(rho) {
        Ok(q) => rho.powf(alpha - 1.0) * q,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let integrand = |rho: f64| weight(rho) * profile.eval(rho * tau).powi(2);
    let points = singular_points(model, consts, r, region);
    let last = points.last().map_or(0.0, |p| p.0);
    let width = profile.panel_width() / tau;
    let (core_end, tail) = match profile.tail() {
        ProfileTail::Negligible { cutoff } => (cutoff / tau, false),
        _ => ((TAIL_START / tau).max(2.0 * last), true),
    };
    let mut cuts = vec![(0.0, alpha)];
    cuts.extend(points.iter().copied().filter(|p| p.0 < core_end));
    cuts.push((core_end, 1.0));
    let mut total = quad::integrate_panels(&integrand, &cuts, width, tol, "convergence integral")?;
    if tail {
        total += profile.square_integral(&weight, 0.0, tau, core_end, f64::INFINITY, tol)?;
    }
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(total.scale(t * t * sphere_area(n)))
}

/// `R_r(t) = t^2 int g_j^2(|u| t^{1/n}) |u|^{-(n - alpha_j)} Q_r(|u|) du`.
pub fn convergence_r(
    model: &SpectralModel,
    w: &RadialWeight,
    consts: &NormalizationConstants,
    r: f64,
    t: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    convergence_integral(model, w, consts, r, t, tol, Region::Outer)
}

/// `S_r(t)`, as `R_r(t)` with `Q̄_r`; only defined for `j != 0`.
pub fn convergence_s(
    model: &SpectralModel,
    w: &RadialWeight,
    consts: &NormalizationConstants,
    r: f64,
    t: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    if consts.j == 0 {
        return Err(Error::IndexMismatch("S_r is only defined for j != 0".into()));
    }
    convergence_integral(model, w, consts, r, t, tol, Region::Inner)
}
