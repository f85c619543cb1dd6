//! Isotropic spectral densities with integrable power singularities at the
//! origin and on spheres `|lambda| = a_i`, their spectral function and the
//! covariance obtained through the radial Bessel kernel.

use crate::error::{Error, Result};
use crate::quad::{self, CompensatedSum, Estimate, PanelSum, Tolerance};
use crate::special::{check_dimension, radial_kernel, radial_kernel_zero, sphere_area};

/// `e^{-39}` is below double precision relative to the envelope at zero.
const EXP_CUTOFF: f64 = 39.0;
const MAX_PANELS: usize = 400_000;

/// Bounded envelope `h_i(s)` multiplying a power singularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    /// `c`
    Constant { c: f64 },
    /// `c e^{-beta |s|}`
    Exponential { c: f64, beta: f64 },
    /// `c 1[|s| <= half_width]`
    Plateau { c: f64, half_width: f64 },
}

impl Envelope {
    pub fn constant(c: f64) -> Self {
        Envelope::Constant { c }
    }

    pub fn exponential(c: f64, beta: f64) -> Self {
        Envelope::Exponential { c, beta }
    }

    pub fn plateau(c: f64, half_width: f64) -> Self {
        Envelope::Plateau { c, half_width }
    }

    /// Builds an envelope from its kind name and parameter list.
    pub fn from_kind(kind: &str, params: &[f64]) -> Result<Self> {
        let want = |k: usize| -> Result<()> {
            if params.len() == k {
                Ok(())
            } else {
                Err(Error::InvalidModel(format!(
                    "envelope kind '{kind}' takes {k} parameter(s), got {}",
                    params.len()
                )))
            }
        };
        let env = match kind {
            "constant" => {
                want(1)?;
                Envelope::Constant { c: params[0] }
            }
            "exponential" => {
                want(2)?;
                Envelope::Exponential { c: params[0], beta: params[1] }
            }
            "plateau" => {
                want(2)?;
                Envelope::Plateau { c: params[0], half_width: params[1] }
            }
            other => {
                return Err(Error::InvalidModel(format!(
                    "unknown envelope kind '{other}' (expected constant, exponential or plateau)"
                )))
            }
        };
        env.validate()?;
        Ok(env)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Envelope::Constant { .. } => "constant",
            Envelope::Exponential { .. } => "exponential",
            Envelope::Plateau { .. } => "plateau",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Envelope::Constant { c } => vec![c],
            Envelope::Exponential { c, beta } => vec![c, beta],
            Envelope::Plateau { c, half_width } => vec![c, half_width],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        match *self {
            Envelope::Constant { c } if !(c > 0.0 && c.is_finite()) => {
                bad(format!("envelope value at 0 must be positive and finite, got {c}"))
            }
            Envelope::Exponential { c, beta } if !(c > 0.0 && c.is_finite() && beta >= 0.0 && beta.is_finite()) => {
                bad(format!("exponential envelope needs c > 0 and beta >= 0, got c={c}, beta={beta}"))
            }
            Envelope::Plateau { c, half_width } if !(c > 0.0 && c.is_finite() && half_width > 0.0 && half_width.is_finite()) => {
                bad(format!("plateau envelope needs c > 0 and half-width > 0, got c={c}, L={half_width}"))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Envelope::Constant { c } => c,
            Envelope::Exponential { c, beta } => c * (-beta * s.abs()).exp(),
            Envelope::Plateau { c, half_width } => {
                if s.abs() <= half_width {
                    c
                } else {
                    0.0
                }
            }
        }
    }

    pub fn at_zero(&self) -> f64 {
        self.sup()
    }

    pub fn sup(&self) -> f64 {
        match *self {
            Envelope::Constant { c } | Envelope::Exponential { c, .. } | Envelope::Plateau { c, .. } => c,
        }
    }

    /// Distance from the singular point beyond which the envelope vanishes to
    /// working precision; `None` when it never does.
    pub fn reach(&self) -> Option<f64> {
        match *self {
            Envelope::Constant { .. } => None,
            Envelope::Exponential { beta, .. } if beta == 0.0 => None,
            Envelope::Exponential { beta, .. } => Some(EXP_CUTOFF / beta),
            Envelope::Plateau { half_width, .. } => Some(half_width),
        }
    }

    /// Length scale on which the envelope changes.
    fn scale(&self) -> f64 {
        match *self {
            Envelope::Constant { .. } => 1.0,
            Envelope::Exponential { beta, .. } if beta == 0.0 => 1.0,
            Envelope::Exponential { beta, .. } => 3.0 / beta,
            Envelope::Plateau { half_width, .. } => half_width,
        }
    }
}

/// One singular term `h(s) / |s|^{power}` of the density, `s = |lambda| - a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularComponent {
    pub location: f64,
    pub alpha: f64,
    pub envelope: Envelope,
}

impl SingularComponent {
    pub fn new(location: f64, alpha: f64, envelope: Envelope) -> Self {
        SingularComponent { location, alpha, envelope }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// `|lambda| = a + d`
    Outer,
    /// `|lambda| = a - d`
    Inner,
}

/// Half of a singular term on one side of its singular sphere, written in the
/// distance `d` from it so that the radial measure is `bounded(d) d^{alpha-1} dd`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPart {
    pub component: usize,
    pub side: Side,
    pub location: f64,
    pub alpha: f64,
    pub envelope: Envelope,
    /// Largest distance with non-negligible density, `None` if unbounded.
    pub extent: Option<f64>,
    omega: f64,
    n: usize,
    origin: bool,
}

impl SpectralPart {
    #[inline]
    pub fn lambda(&self, d: f64) -> f64 {
        match self.side {
            Side::Outer => self.location + d,
            Side::Inner => self.location - d,
        }
    }

    #[inline]
    pub fn distance(&self, lambda: f64) -> f64 {
        match self.side {
            Side::Outer => lambda - self.location,
            Side::Inner => self.location - lambda,
        }
    }

    /// Bounded factor of `omega_n lambda^{n-1} phi_i(lambda)` after removing `d^{alpha-1}`.
    #[inline]
    pub fn bounded(&self, d: f64) -> f64 {
        let s = match self.side {
            Side::Outer => d,
            Side::Inner => -d,
        };
        let h = self.envelope.eval(s);
        if self.origin {
            self.omega * h
        } else {
            self.omega * self.lambda(d).powi(self.n as i32 - 1) * h
        }
    }

    /// Range `[d0, d1]` of distances whose `lambda` lies in `[lo, hi]`.
    fn d_range(&self, lo: f64, hi: f64) -> Result<Option<(f64, f64)>> {
        let (mut d0, mut d1) = match self.side {
            Side::Outer => ((lo - self.location).max(0.0), hi - self.location),
            Side::Inner => ((self.location - hi).max(0.0), self.location - lo.max(0.0)),
        };
        if let Some(e) = self.extent {
            d1 = d1.min(e);
        }
        if self.side == Side::Inner {
            d1 = d1.min(self.location);
        }
        if d1.is_infinite() {
            return Err(Error::MassNotFinite(format!(
                "component {} has an envelope that does not decay; the density is not integrable",
                self.component
            )));
        }
        d0 = d0.max(0.0);
        if d1 <= d0 {
            return Ok(None);
        }
        Ok(Some((d0, d1)))
    }
}

/// How panels are laid out along `|lambda|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segmentation {
    /// One adaptive integral per part.
    Free,
    /// Edges at the zeros of `K_n(r lambda)`; tails are accelerated.
    KernelZeros { r: f64 },
    /// Edges at `origin + k width`.
    Uniform { origin: f64, width: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    n: usize,
    components: Vec<SingularComponent>,
    envelope_sup: Vec<f64>,
    parts: Vec<SpectralPart>,
    part_mass: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceEvaluation {
    pub lag: f64,
    pub value: f64,
    pub error: f64,
}

impl SpectralModel {
    /// Validates the parameters and checks integrability of the density.
    pub fn new(n: usize, components: Vec<SingularComponent>) -> Result<Self> {
        let mut model = Self::local(n, components)?;
        let tol = Tolerance::new(1e-12, 1e-10);
        let mut masses = Vec::with_capacity(model.parts.len());
        for part in &model.parts {
            if part.extent.is_none() {
                return Err(Error::MassNotFinite(format!(
                    "envelope of component {} ({}) does not decay, so the density is not integrable",
                    part.component,
                    part.envelope.kind()
                )));
            }
            let m = model.integrate_part(part, &|_| 1.0, 0.0, f64::INFINITY, Segmentation::Free, tol, false)?;
            if !m.value.is_finite() {
                return Err(Error::MassNotFinite(format!("component {}", part.component)));
            }
            masses.push(m.value);
        }
        model.part_mass = Some(masses);
        Ok(model)
    }

    /// Validates the parameters only. Operations that need the total mass
    /// fail on such a model when the density is not integrable.
    pub fn local(n: usize, components: Vec<SingularComponent>) -> Result<Self> {
        check_dimension(n)?;
        let nf = n as f64;
        if components.is_empty() {
            return Err(Error::InvalidModel("at least the component at the origin is required".into()));
        }
        if components[0].location != 0.0 {
            return Err(Error::InvalidModel(format!(
                "component 0 must sit at the origin, got a_0 = {}",
                components[0].location
            )));
        }
        for (i, c) in components.iter().enumerate() {
            c.envelope.validate().map_err(|e| match e {
                Error::InvalidModel(m) => Error::InvalidModel(format!("component {i}: {m}")),
                other => other,
            })?;
            if i == 0 {
                if !(c.alpha > 0.0 && c.alpha < nf) {
                    return Err(Error::InvalidModel(format!(
                        "alpha_0 must lie in (0, n) = (0, {n}), got {}",
                        c.alpha
                    )));
                }
            } else {
                if !(c.alpha > 0.0 && c.alpha < 1.0) {
                    return Err(Error::InvalidModel(format!(
                        "alpha_{i} must lie in (0, 1), got {}",
                        c.alpha
                    )));
                }
                let prev = components[i - 1].location;
                if !(c.location > prev) || !c.location.is_finite() {
                    return Err(Error::InvalidModel(format!(
                        "locations must be strictly increasing: a_{i} = {} after {prev}",
                        c.location
                    )));
                }
            }
        }
        let omega = sphere_area(n);
        let mut parts = Vec::new();
        for (i, c) in components.iter().enumerate() {
            let extent = c.envelope.reach();
            let base = SpectralPart {
                component: i,
                side: Side::Outer,
                location: c.location,
                alpha: c.alpha,
                envelope: c.envelope,
                extent,
                omega,
                n,
                origin: i == 0,
            };
            parts.push(base);
            if i > 0 {
                let inner = extent.map_or(c.location, |e| e.min(c.location));
                parts.push(SpectralPart { side: Side::Inner, extent: Some(inner), ..base });
            }
        }
        let envelope_sup = components.iter().map(|c| c.envelope.sup()).collect();
        Ok(SpectralModel { n, components, envelope_sup, parts, part_mass: None })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[SingularComponent] {
        &self.components
    }

    pub fn envelope_sup(&self) -> &[f64] {
        &self.envelope_sup
    }

    pub fn parts(&self) -> &[SpectralPart] {
        &self.parts
    }

    /// Spectral mass of each part, in the order of [`Self::parts`].
    pub fn part_masses(&self) -> Result<&[f64]> {
        self.part_mass
            .as_deref()
            .ok_or_else(|| Error::MassNotFinite("model was built without the integrability check".into()))
    }

    /// Total spectral mass, equal to the variance of the field.
    pub fn total_mass(&self) -> Result<f64> {
        Ok(quad::compensated_sum(self.part_masses()?.iter().copied()))
    }

    pub fn is_singular_at(&self, lambda: f64) -> bool {
        self.components
            .iter()
            .any(|c| (lambda - c.location).abs() <= 1e-12 * c.location.max(1.0))
    }

    /// Density value contributed by component `i` alone.
    #[inline]
    pub fn component_density(&self, i: usize, lambda: f64) -> f64 {
        let c = &self.components[i];
        if i == 0 {
            c.envelope.eval(lambda) / lambda.powf(self.n as f64 - c.alpha)
        } else {
            let s = lambda - c.location;
            c.envelope.eval(s) / s.abs().powf(1.0 - c.alpha)
        }
    }

    pub fn density(&self, lambda: f64) -> Result<f64> {
        if !(lambda >= 0.0) {
            return Err(Error::DomainError(format!("|lambda| must be >= 0, got {lambda}")));
        }
        if let Some(c) = self
            .components
            .iter()
            .find(|c| (lambda - c.location).abs() <= 1e-12 * c.location.max(1.0))
        {
            return Err(Error::SingularPoint { at: c.location });
        }
        let mut s = CompensatedSum::new();
        for i in 0..self.components.len() {
            s.add(self.component_density(i, lambda));
        }
        Ok(s.value())
    }

    /// `Phi(u) = omega_n int_0^u z^{n-1} phi(z) dz`.
    pub fn spectral_function(&self, u: f64, tol: Tolerance) -> Result<Estimate> {
        if !(u >= 0.0) {
            return Err(Error::DomainError(format!("u must be >= 0, got {u}")));
        }
        if u == 0.0 {
            return Ok(Estimate::default());
        }
        if u.is_infinite() {
            return Ok(Estimate::new(self.total_mass()?, 0.0));
        }
        self.integrate_radial(&|_| 1.0, 0.0, u, Segmentation::Free, tol, false)
    }

    /// `B_n(r) = int K_n(r u) dPhi(u)`.
    pub fn covariance(&self, r: f64, tol: Tolerance) -> Result<CovarianceEvaluation> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::DomainError(format!("lag must be finite and >= 0, got {r}")));
        }
        if r == 0.0 {
            let mass = self.total_mass()?;
            return Ok(CovarianceEvaluation { lag: 0.0, value: mass, error: 0.0 });
        }
        let n = self.n;
        let est = self.integrate_radial(
            &|lambda| radial_kernel(n, r * lambda),
            0.0,
            f64::INFINITY,
            Segmentation::KernelZeros { r },
            tol,
            true,
        )?;
        Ok(CovarianceEvaluation { lag: r, value: est.value, error: est.error })
    }

    /// Frequency scale of the density, used to size panels in lag space.
    pub fn frequency_scale(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.location + c.envelope.scale())
            .fold(0.0, f64::max)
    }

    /// Cumulative `int_0^T |B_n(r)| dr` for each `T` in `t_list`.
    pub fn lrd_diagnostic(&self, t_list: &[f64], tol: Tolerance) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(t_list.len());
        let width = std::f64::consts::PI / (2.0 * self.frequency_scale());
        let inner = Tolerance::new(tol.abs * 1e-2, tol.rel * 1e-2);
        let mut acc = CompensatedSum::new();
        let mut reached = 0.0;
        for &t in t_list {
            if !(t >= reached) {
                return Err(Error::DomainError("T values must be non-negative and increasing".into()));
            }
            while reached < t {
                let next = (reached + width).min(t);
                let mut failure = None;
                let est = quad::integrate(
                    |r| match self.covariance(r, inner) {
                        Ok(c) => c.value.abs(),
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    },
                    reached,
                    next,
                    tol,
                    "absolute covariance integral",
                )?;
                if let Some(e) = failure {
                    return Err(e);
                }
                acc.add(est.value);
                reached = next;
            }
            out.push((t, acc.value()));
        }
        Ok(out)
    }

    /// `int g(lambda) dPhi(lambda)` over `lo <= lambda <= hi`.
    pub fn integrate_radial(
        &self,
        g: &dyn Fn(f64) -> f64,
        lo: f64,
        hi: f64,
        seg: Segmentation,
        tol: Tolerance,
        accelerate: bool,
    ) -> Result<Estimate> {
        let share = 1.0 / self.parts.len() as f64;
        let mut total = Estimate::default();
        let mut sum = CompensatedSum::new();
        for part in &self.parts {
            let e = self.integrate_part(part, g, lo, hi, seg, tol.scaled_abs(share), accelerate)?;
            sum.add(e.value);
            total.error += e.error;
        }
        total.value = sum.value();
        Ok(total)
    }

    /// Integral over a single part, panel by panel in the variable `w = d^alpha`.
    pub fn integrate_part(
        &self,
        part: &SpectralPart,
        g: &dyn Fn(f64) -> f64,
        lo: f64,
        hi: f64,
        seg: Segmentation,
        tol: Tolerance,
        accelerate: bool,
    ) -> Result<Estimate> {
        let Some((d0, d1)) = part.d_range(lo, hi)? else {
            return Ok(Estimate::default());
        };
        let edges = panel_edges(part, d0, d1, seg, self.n)?;
        let panels = edges.len() - 1;
        let f = |d: f64| part.bounded(d) * g(part.lambda(d));
        let ctx = "spectral integral";
        if panels == 1 {
            return quad::integrate_power(f, d0, d1, part.alpha, tol, ctx);
        }
        let panel_tol = tol.scaled_abs(1.0 / panels as f64);
        let alternating = accelerate
            && part.side == Side::Outer
            && matches!(part.envelope, Envelope::Exponential { .. })
            && matches!(seg, Segmentation::KernelZeros { .. });
        let mut acc = PanelSum::new();
        for k in 0..panels {
            let e = quad::integrate_power(f, edges[k], edges[k + 1], part.alpha, panel_tol, ctx)?;
            acc.push(e);
            if alternating && k >= 32 {
                if let Some(est) = acc.accelerated() {
                    if est.error < 0.1 * tol.target(est.value) {
                        return Ok(est);
                    }
                }
            }
        }
        Ok(acc.total())
    }
}

/// Panel edges in `d` covering `[d0, d1]`.
fn panel_edges(part: &SpectralPart, d0: f64, d1: f64, seg: Segmentation, n: usize) -> Result<Vec<f64>> {
    let mut edges = vec![d0];
    let (l0, l1) = {
        let a = part.lambda(d0);
        let b = part.lambda(d1);
        (a.min(b), a.max(b))
    };
    let mut lambdas: Vec<f64> = Vec::new();
    match seg {
        Segmentation::Free => {}
        Segmentation::KernelZeros { r } => {
            let spacing = std::f64::consts::PI / r;
            let count = ((l1 - l0) / spacing) as usize + 2;
            if count > MAX_PANELS {
                return Err(Error::QuadratureFailure {
                    context: "covariance panel layout",
                    estimate: count as f64,
                    tolerance: MAX_PANELS as f64,
                });
            }
            // Zero index just below l0 r, then walk upwards.
            let mut k = ((l0 * r / std::f64::consts::PI) as usize).saturating_sub(2).max(1);
            loop {
                let z = radial_kernel_zero(n, k) / r;
                if z >= l1 {
                    break;
                }
                if z > l0 {
                    lambdas.push(z);
                }
                k += 1;
            }
        }
        Segmentation::Uniform { origin, width } => {
            let count = ((l1 - l0) / width) as usize + 2;
            if count > MAX_PANELS {
                return Err(Error::QuadratureFailure {
                    context: "panel layout",
                    estimate: count as f64,
                    tolerance: MAX_PANELS as f64,
                });
            }
            let mut k = ((l0 - origin) / width).floor() as i64;
            loop {
                let z = origin + k as f64 * width;
                if z >= l1 {
                    break;
                }
                if z > l0 {
                    lambdas.push(z);
                }
                k += 1;
            }
        }
    }
    let mut ds: Vec<f64> = lambdas.into_iter().map(|l| part.distance(l)).collect();
    ds.sort_by(|a, b| a.total_cmp(b));
    for d in ds {
        if d > d0 && d < d1 && d > *edges.last().unwrap() {
            edges.push(d);
        }
    }
    edges.push(d1);
    Ok(edges)
}
