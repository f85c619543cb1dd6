//! Radial weights `f_{j,r}` and their Fourier profiles `g_j`, where the
//! Fourier transform of `r^{-n} f_{j,r}` is `g_j(r(|lambda| - a_j))`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::{self, CompensatedSum, Estimate, PanelSum, Tolerance};
use crate::special::{check_dimension, radial_kernel, sphere_area, BesselOrder};

/// `g^2` of a Gaussian profile drops below `1e-34` of its peak here (in sigmas).
const GAUSSIAN_CUTOFF: f64 = 8.83;
/// Range in sigmas of the s-integral that synthesizes the spatial weight.
const GAUSSIAN_SYNTH_RANGE: f64 = 9.6;
/// Spatial reach of a synthesized Gaussian-ring weight, in units of `r / sigma`.
const GAUSSIAN_SPATIAL_REACH: f64 = 8.6;

/// Radial spatial profile `f~(rho)` at scale one; at scale `r` the weight is
/// `f~(|x| / r)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpatialProfile {
    /// Indicator of the ball of the given radius.
    Ball { radius: f64 },
    /// `sum_k coeffs[k] rho^k` on `[0, radius]`, zero outside.
    Polynomial { coeffs: Vec<f64>, radius: f64 },
    /// Piecewise-linear through `(radii[i], values[i])`, zero beyond the last radius.
    Samples { radii: Vec<f64>, values: Vec<f64> },
}

impl SpatialProfile {
    pub fn eval(&self, rho: f64) -> f64 {
        match self {
            SpatialProfile::Ball { radius } => {
                if rho <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            SpatialProfile::Polynomial { coeffs, radius } => {
                if rho > *radius {
                    return 0.0;
                }
                coeffs.iter().rev().fold(0.0, |acc, &c| acc * rho + c)
            }
            SpatialProfile::Samples { radii, values } => {
                let last = radii.len() - 1;
                if rho > radii[last] {
                    return 0.0;
                }
                if rho <= radii[0] {
                    return values[0];
                }
                let i = radii.partition_point(|&x| x <= rho).min(last);
                let (x0, x1) = (radii[i - 1], radii[i]);
                let t = (rho - x0) / (x1 - x0);
                values[i - 1] * (1.0 - t) + values[i] * t
            }
        }
    }

    pub fn support(&self) -> f64 {
        match self {
            SpatialProfile::Ball { radius } | SpatialProfile::Polynomial { radius, .. } => *radius,
            SpatialProfile::Samples { radii, .. } => *radii.last().unwrap(),
        }
    }

    /// Points where the profile is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            SpatialProfile::Samples { radii, .. } => radii.clone(),
            _ => vec![self.support()],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            SpatialProfile::Ball { radius } => *radius > 0.0 && radius.is_finite(),
            SpatialProfile::Polynomial { coeffs, radius } => {
                !coeffs.is_empty() && coeffs.iter().all(|c| c.is_finite()) && *radius > 0.0 && radius.is_finite()
            }
            SpatialProfile::Samples { radii, values } => {
                radii.len() >= 2
                    && radii.len() == values.len()
                    && radii[0] >= 0.0
                    && radii.windows(2).all(|w| w[1] > w[0])
                    && values.iter().chain(radii.iter()).all(|v| v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidWeight(format!("malformed spatial profile {self:?}")))
        }
    }

    /// `int_{R^n} |f~|^p dx` for `p` in `{1, 2}`.
    fn lp_norm(&self, n: usize, p: i32) -> Result<f64> {
        let omega = sphere_area(n);
        let mut edges = vec![0.0];
        edges.extend(self.breakpoints().into_iter().filter(|&b| b > 0.0));
        edges.dedup();
        let mut s = CompensatedSum::new();
        for w in edges.windows(2) {
            let e = quad::integrate(
                |rho| self.eval(rho).abs().powi(p) * rho.powi(n as i32 - 1),
                w[0],
                w[1],
                Tolerance::new(1e-14, 1e-10),
                "spatial norm",
            )?;
            s.add(e.value);
        }
        Ok(omega * s.value())
    }
}

/// Interpolation table for a profile on `s >= 0`; the profile is even and
/// vanishes beyond the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl ProfileTable {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 4 || nodes.len() != values.len() || nodes[0] != 0.0 || !nodes.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidWeight(
                "profile table needs at least 4 increasing nodes starting at 0".into(),
            ));
        }
        Ok(ProfileTable { nodes, values })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Cubic Lagrange interpolation through the four surrounding nodes.
    pub fn eval(&self, s: f64) -> f64 {
        let s = s.abs();
        let m = self.nodes.len();
        if s > self.nodes[m - 1] {
            return 0.0;
        }
        let i = self.nodes.partition_point(|&x| x <= s);
        let lo = i.saturating_sub(2).min(m - 4);
        let xs = &self.nodes[lo..lo + 4];
        let ys = &self.values[lo..lo + 4];
        let mut acc = 0.0;
        for k in 0..4 {
            let mut l = 1.0;
            for q in 0..4 {
                if q != k {
                    l *= (s - xs[q]) / (xs[k] - xs[q]);
                }
            }
            acc += l * ys[k];
        }
        acc
    }
}

/// Default tabulation grid: 0, geometric on `[1e-4, 1]`, then uniform with
/// spacing `pi/16` up to `s_max`.
pub fn default_profile_grid(s_max: f64) -> Vec<f64> {
    let mut g = vec![0.0];
    let geo = 64;
    for k in 0..geo {
        g.push(1e-4 * 1e4f64.powf(k as f64 / geo as f64));
    }
    let h = PI / 16.0;
    let mut k = 0;
    loop {
        let s = 1.0 + k as f64 * h;
        if s > s_max {
            break;
        }
        g.push(s);
        k += 1;
    }
    g
}

pub const DEFAULT_PROFILE_END: f64 = 1000.0;

/// Fourier profile `g_j(s)`, even in `s`.
#[derive(Debug, Clone, PartialEq)]
pub enum FourierProfile {
    /// `(2 pi)^{n/2} J_{n/2}(s) / s^{n/2}`, the transform of the unit ball.
    Ball { n: usize },
    /// `c exp(-s^2 / (2 sigma^2))`
    Gaussian { c: f64, sigma: f64 },
    /// `c / (1 + |s|)^power`
    Rational { c: f64, power: f64 },
    Tabulated(ProfileTable),
    Zero,
}

/// Behaviour of `g^2` for large arguments, used by the tail integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileTail {
    /// `g` is zero to working precision beyond `cutoff`.
    Negligible { cutoff: f64 },
    /// `g^2` is smooth and decays algebraically.
    Smooth,
    /// `g^2 = mean(s) + oscillation`, the oscillation changing sign at
    /// `offset + k pi/2`.
    Oscillatory { offset: f64 },
}

impl FourierProfile {
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        let s = s.abs();
        match self {
            FourierProfile::Ball { n } => {
                let order = BesselOrder::ball(*n).expect("dimension checked at construction");
                (2.0 * PI).powf(*n as f64 / 2.0) * order.eval_over_power(s)
            }
            FourierProfile::Gaussian { c, sigma } => c * (-0.5 * (s / sigma).powi(2)).exp(),
            FourierProfile::Rational { c, power } => c / (1.0 + s).powf(*power),
            FourierProfile::Tabulated(t) => t.eval(s),
            FourierProfile::Zero => 0.0,
        }
    }

    pub fn tail(&self) -> ProfileTail {
        match self {
            FourierProfile::Ball { n } => {
                let order = BesselOrder::ball(*n).expect("dimension checked at construction");
                ProfileTail::Oscillatory { offset: order.phase() + 0.25 * PI }
            }
            FourierProfile::Gaussian { sigma, .. } => ProfileTail::Negligible { cutoff: GAUSSIAN_CUTOFF * sigma },
            FourierProfile::Rational { .. } => ProfileTail::Smooth,
            FourierProfile::Tabulated(t) => ProfileTail::Negligible { cutoff: t.end() },
            FourierProfile::Zero => ProfileTail::Negligible { cutoff: 0.0 },
        }
    }

    /// Non-oscillating part of `g^2`; equals `g^2` unless the tail oscillates.
    pub fn mean_square(&self, s: f64) -> f64 {
        match self {
            FourierProfile::Ball { n } => {
                let order = BesselOrder::ball(*n).expect("dimension checked at construction");
                (2.0 * PI).powi(*n as i32) * order.mean_square(s) / s.powi(*n as i32)
            }
            other => other.eval(s).powi(2),
        }
    }

    /// Characteristic oscillation length of `g`, used to size panels.
    pub fn panel_width(&self) -> f64 {
        match self {
            FourierProfile::Ball { .. } | FourierProfile::Tabulated(_) => 0.5 * PI,
            FourierProfile::Gaussian { sigma, .. } => 0.5 * sigma,
            FourierProfile::Rational { .. } | FourierProfile::Zero => 1.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, FourierProfile::Zero)
    }

    /// `int_{x0}^{x1} f(x) g^2(p + q x) dx` for smooth `f`, `q > 0`, `x0 > 0`
    /// and `x1` possibly infinite. Intended for tails, i.e. `p + q x0` well
    /// past the main lobe of `g`.
    pub fn square_integral(
        &self,
        f: &dyn Fn(f64) -> f64,
        p: f64,
        q: f64,
        x0: f64,
        x1: f64,
        tol: Tolerance,
    ) -> Result<Estimate> {
        debug_assert!(q > 0.0 && x0 > 0.0);
        if x1 <= x0 || self.is_zero() {
            return Ok(Estimate::default());
        }
        match self.tail() {
            ProfileTail::Negligible { cutoff } => {
                let end = x1.min((cutoff - p) / q);
                if end <= x0 {
                    return Ok(Estimate::default());
                }
                let width = self.panel_width() / q;
                let panels = ((end - x0) / width).ceil().max(1.0) as usize;
                let h = (end - x0) / panels as f64;
                let mut sum = PanelSum::new();
                for k in 0..panels {
                    let a = x0 + k as f64 * h;
                    let g = |x: f64| f(x) * self.eval(p + q * x).powi(2);
                    sum.push(quad::integrate(g, a, a + h, tol.scaled_abs(1.0 / panels as f64), "profile tail")?);
                }
                Ok(sum.total())
            }
            ProfileTail::Smooth => smooth_tail(&|x| f(x) * self.eval(p + q * x).powi(2), x0, x1, tol),
            ProfileTail::Oscillatory { offset } => {
                let mean = smooth_tail(&|x| f(x) * self.mean_square(p + q * x), x0, x1, tol)?;
                let wiggle = |x: f64| {
                    let s = p + q * x;
                    f(x) * (self.eval(s).powi(2) - self.mean_square(s))
                };
                let rest = oscillating_tail(&wiggle, p, q, offset, x0, x1, tol, mean.value)?;
                Ok(mean + rest)
            }
        }
    }
}

/// `int_{x0}^{x1} h` for smooth, algebraically decaying `h`, in the variable
/// `u = ln(x / x0)`.
pub(crate) fn smooth_tail(h: &dyn Fn(f64) -> f64, x0: f64, x1: f64, tol: Tolerance) -> Result<Estimate> {
    const STEP: f64 = 0.5;
    const U_MAX: f64 = 700.0;
    let u_end = if x1.is_finite() { (x1 / x0).ln() } else { f64::INFINITY };
    let g = |u: f64| {
        let x = x0 * u.exp();
        h(x) * x
    };
    let mut total = Estimate::default();
    let mut sum = CompensatedSum::new();
    let mut quiet = 0;
    let mut u = 0.0;
    while u < u_end {
        if u > U_MAX {
            return Err(Error::NotIntegrable(format!("tail does not decay beyond x = {x0:e} e^{U_MAX}")));
        }
        let next = (u + STEP).min(u_end);
        let e = quad::integrate(g, u, next, tol.scaled_abs(1.0 / 64.0), "smooth tail")?;
        sum.add(e.value);
        total.error += e.error;
        quiet = if e.value.abs() <= 1e-3 * tol.target(sum.value()) { quiet + 1 } else { 0 };
        u = next;
        if quiet >= 6 && u >= 4.0 {
            break;
        }
    }
    total.value = sum.value();
    Ok(total)
}

/// `int_{x0}^{x1} h` where `h(x)` changes sign near `p + q x = offset + k pi/2`,
/// summed panel by panel and accelerated. `scale` sets the absolute target.
#[allow(clippy::too_many_arguments)]
fn oscillating_tail(
    h: &dyn Fn(f64) -> f64,
    p: f64,
    q: f64,
    offset: f64,
    x0: f64,
    x1: f64,
    tol: Tolerance,
    scale: f64,
) -> Result<Estimate> {
    const MAX_PANELS: usize = 1 << 20;
    let half = 0.5 * PI;
    let target = tol.target(scale);
    let mut k = ((p + q * x0 - offset) / half).floor() + 1.0;
    let mut a = x0;
    let mut sum = PanelSum::new();
    loop {
        let b = ((offset + k * half - p) / q).min(x1);
        sum.push(quad::integrate(h, a, b, Tolerance::new(1e-3 * target, tol.rel), "oscillating tail")?);
        if b >= x1 {
            return Ok(sum.total());
        }
        if sum.len() >= 32 {
            if let Some(est) = sum.accelerated() {
                if est.error < 0.1 * target {
                    return Ok(est);
                }
            }
        }
        if sum.len() >= MAX_PANELS {
            return Err(Error::QuadratureFailure {
                context: "oscillating tail",
                estimate: sum.accelerated().map_or(f64::INFINITY, |e| e.error),
                tolerance: target,
            });
        }
        a = b;
        k += 1.0;
    }
}

/// Decay bound `g^2(s) <= c / s^n` for `s >= s0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub s0: f64,
    pub c: f64,
}

/// How the spatial weight at scale `r` is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum SpatialForm {
    /// `f_{j,r}(x) = f~(|x| / r)`; only valid for `a_j = 0`.
    Scaled(SpatialProfile),
    /// Inverse Fourier transform of `r^n g(r(|lambda| - a_j))`.
    Synthesized,
    /// No spatial form; only spectral-domain computations are possible.
    Unavailable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialWeight {
    pub j: usize,
    pub a_j: f64,
    pub n: usize,
    spatial: SpatialForm,
    profile: FourierProfile,
    certificate: Certificate,
}

impl RadialWeight {
    /// Ball-indicator weight matched to the singularity at the origin.
    pub fn donsker(n: usize) -> Result<Self> {
        BesselOrder::ball(n)?;
        // |J_{n/2}(s)|^2 <= (2/(pi s)) * 2 for s >= 1 and n <= 3
        let c = (2.0 * PI).powi(n as i32) * 4.0 / PI;
        Ok(RadialWeight {
            j: 0,
            a_j: 0.0,
            n,
            spatial: SpatialForm::Scaled(SpatialProfile::Ball { radius: 1.0 }),
            profile: FourierProfile::Ball { n },
            certificate: Certificate { s0: 1.0, c },
        })
    }

    /// Weight whose profile is `c exp(-s^2/(2 sigma^2))` around `a_j`; its
    /// spatial form is synthesized from the profile.
    pub fn gaussian_ring(n: usize, j: usize, a_j: f64, c: f64, sigma: f64) -> Result<Self> {
        check_dimension(n)?;
        check_match(j, a_j)?;
        if !(c > 0.0 && sigma > 0.0 && c.is_finite() && sigma.is_finite()) {
            return Err(Error::InvalidWeight(format!("gaussian profile needs c > 0, sigma > 0, got {c}, {sigma}")));
        }
        let nf = n as f64;
        let peak = c * c * (0.5 * nf * sigma * sigma).powf(0.5 * nf) * (-0.5 * nf).exp();
        Ok(RadialWeight {
            j,
            a_j,
            n,
            spatial: SpatialForm::Synthesized,
            profile: FourierProfile::Gaussian { c, sigma },
            certificate: Certificate { s0: 1.0, c: peak },
        })
    }

    /// Weight with profile `c / (1 + |s|)^power`. The certificate is estimated
    /// on `[1, 100]` and is not a proof of decay.
    pub fn rational(n: usize, j: usize, a_j: f64, c: f64, power: f64) -> Result<Self> {
        check_dimension(n)?;
        check_match(j, a_j)?;
        let profile = FourierProfile::Rational { c, power };
        let certificate = estimate_certificate(&profile, n, 1.0, 100.0);
        Ok(RadialWeight { j, a_j, n, spatial: SpatialForm::Unavailable, profile, certificate })
    }

    /// Weight from a spatial profile, with the profile tabulated by a Hankel
    /// transform at `|lambda| = a_j + s`.
    pub fn tabulated(n: usize, j: usize, a_j: f64, spatial: SpatialProfile, grid: &[f64]) -> Result<Self> {
        check_match(j, a_j)?;
        let table = hankel_profile(&spatial, n, a_j, grid)?;
        let profile = FourierProfile::Tabulated(table);
        let certificate = estimate_certificate(&profile, n, 1.0, grid.last().copied().unwrap_or(1.0));
        let spatial = if a_j == 0.0 { SpatialForm::Scaled(spatial) } else { SpatialForm::Unavailable };
        Ok(RadialWeight { j, a_j, n, spatial, profile, certificate })
    }

    /// Assembles a weight from given parts without checking their consistency.
    pub fn from_parts(
        n: usize,
        j: usize,
        a_j: f64,
        spatial: SpatialForm,
        profile: FourierProfile,
        certificate: Certificate,
    ) -> Result<Self> {
        check_dimension(n)?;
        check_match(j, a_j)?;
        Ok(RadialWeight { j, a_j, n, spatial, profile, certificate })
    }

    /// Identically zero weight.
    pub fn zero(n: usize) -> Result<Self> {
        check_dimension(n)?;
        Ok(RadialWeight {
            j: 0,
            a_j: 0.0,
            n,
            spatial: SpatialForm::Unavailable,
            profile: FourierProfile::Zero,
            certificate: Certificate { s0: 1.0, c: 0.0 },
        })
    }

    pub fn profile(&self) -> &FourierProfile {
        &self.profile
    }

    pub fn spatial_form(&self) -> &SpatialForm {
        &self.spatial
    }

    pub fn certificate(&self) -> Certificate {
        self.certificate
    }

    pub fn with_certificate(mut self, certificate: Certificate) -> Self {
        self.certificate = certificate;
        self
    }

    #[inline]
    pub fn g(&self, s: f64) -> f64 {
        self.profile.eval(s)
    }

    /// Radius outside of which `f_{j,r}` vanishes (or is negligible).
    pub fn spatial_support(&self, r: f64) -> Result<f64> {
        match (&self.spatial, &self.profile) {
            (SpatialForm::Scaled(p), _) => Ok(r * p.support()),
            (SpatialForm::Synthesized, FourierProfile::Gaussian { sigma, .. }) => Ok(GAUSSIAN_SPATIAL_REACH * r / sigma),
            _ => Err(Error::InvalidWeight("weight has no spatial form".into())),
        }
    }

    /// Points in `[0, support]` where the spatial weight is not smooth.
    pub fn spatial_breakpoints(&self, r: f64) -> Vec<f64> {
        match &self.spatial {
            SpatialForm::Scaled(p) => p.breakpoints().into_iter().map(|b| b * r).collect(),
            _ => Vec::new(),
        }
    }

    /// `f_{j,r}(rho)`.
    pub fn spatial_value(&self, r: f64, rho: f64) -> Result<f64> {
        match (&self.spatial, &self.profile) {
            (SpatialForm::Scaled(p), _) => Ok(p.eval(rho / r)),
            (SpatialForm::Synthesized, FourierProfile::Gaussian { sigma, .. }) => {
                self.synthesize(r, rho, GAUSSIAN_SYNTH_RANGE * sigma)
            }
            _ => Err(Error::InvalidWeight("weight has no spatial form".into())),
        }
    }

    /// `r^{n-1} (2 pi)^{-n} omega_n int g(s) K_n((a + s/r) rho) (a + s/r)^{n-1} ds`.
    fn synthesize(&self, r: f64, rho: f64, range: f64) -> Result<f64> {
        let n = self.n;
        let a = self.a_j;
        let lo = (-r * a).max(-range);
        let hi = range;
        let f = |s: f64| {
            let lam = a + s / r;
            self.profile.eval(s) * radial_kernel(n, lam * rho) * lam.powi(n as i32 - 1)
        };
        // Panels short enough to hold about one kernel oscillation each.
        let width = if rho > 0.0 { (PI * r / rho).min(hi - lo) } else { hi - lo };
        let panels = ((hi - lo) / width).ceil().max(1.0) as usize;
        let h = (hi - lo) / panels as f64;
        let mut s = CompensatedSum::new();
        for k in 0..panels {
            let a0 = lo + k as f64 * h;
            let e = quad::integrate(f, a0, a0 + h, Tolerance::new(1e-13 / panels as f64, 1e-11), "spatial synthesis")?;
            s.add(e.value);
        }
        let scale = r.powi(n as i32 - 1) * sphere_area(n) / (2.0 * PI).powi(n as i32);
        Ok(scale * s.value())
    }

    /// Checks `g^2(s) s^n <= C` on the grid; returns the verdict and the largest
    /// observed `g^2(s) s^n`.
    pub fn check_decay(&self, grid: &[f64]) -> (bool, f64) {
        let worst = grid
            .iter()
            .map(|&s| self.g(s).powi(2) * s.powi(self.n as i32))
            .fold(0.0, f64::max);
        (worst <= self.certificate.c, worst)
    }

    /// Largest `|F[r^{-n} f_{j,r}](lambda) - g(r(|lambda| - a_j))|` over `lambdas`,
    /// with the left side computed by a numerical Hankel transform.
    pub fn verify_pair(&self, r: f64, lambdas: &[f64]) -> Result<f64> {
        let support = self.spatial_support(r)?;
        let mut edges = vec![0.0];
        edges.extend(self.spatial_breakpoints(r).into_iter().filter(|&b| b > 0.0 && b < support));
        edges.push(support);
        let mut worst: f64 = 0.0;
        for &lam in lambdas {
            let lam = lam.abs();
            let transform = hankel_transform(
                &|rho| self.spatial_value(r, rho).unwrap_or(f64::NAN),
                self.n,
                lam,
                &edges,
                Tolerance::new(1e-12 * r.powi(self.n as i32), 1e-10),
            )? / r.powi(self.n as i32);
            let expected = self.g(r * (lam - self.a_j));
            worst = worst.max((transform - expected).abs());
        }
        Ok(worst)
    }
}

fn check_match(j: usize, a_j: f64) -> Result<()> {
    if !(a_j >= 0.0 && a_j.is_finite()) {
        return Err(Error::InvalidWeight(format!("matched frequency must be >= 0, got {a_j}")));
    }
    if (j == 0) != (a_j == 0.0) {
        return Err(Error::InvalidWeight(format!(
            "index j = {j} and matched frequency a_j = {a_j} disagree: only j = 0 sits at the origin"
        )));
    }
    Ok(())
}

/// Empirical certificate: `s0` and the largest `g^2 s^n` on a geometric grid
/// over `[s0, s_max]`, padded by 5%.
pub fn estimate_certificate(profile: &FourierProfile, n: usize, s0: f64, s_max: f64) -> Certificate {
    let m = 400;
    let ratio = (s_max / s0).max(1.0);
    let worst = (0..=m)
        .map(|k| s0 * ratio.powf(k as f64 / m as f64))
        .map(|s| profile.eval(s).powi(2) * s.powi(n as i32))
        .fold(0.0, f64::max);
    Certificate { s0, c: 1.05 * worst }
}

/// `omega_n int f(rho) K_n(k rho) rho^{n-1} drho` over `[edges[0], edges.last()]`,
/// split at `edges` and at half-wavelengths of the kernel.
pub fn hankel_transform(f: &dyn Fn(f64) -> f64, n: usize, k: f64, edges: &[f64], tol: Tolerance) -> Result<f64> {
    let mut s = CompensatedSum::new();
    let step = if k > 0.0 { PI / k } else { f64::INFINITY };
    let total_len = edges.last().unwrap() - edges[0];
    let pieces = (total_len / step).ceil().max(1.0);
    let piece_tol = tol.scaled_abs(1.0 / pieces);
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let m = ((hi - lo) / step).ceil().max(1.0) as usize;
        let h = (hi - lo) / m as f64;
        for q in 0..m {
            let a = lo + q as f64 * h;
            let b = if q + 1 == m { hi } else { a + h };
            let e = quad::integrate(
                |rho| f(rho) * radial_kernel(n, k * rho) * rho.powi(n as i32 - 1),
                a,
                b,
                piece_tol,
                "hankel transform",
            )?;
            s.add(e.value);
        }
    }
    let v = sphere_area(n) * s.value();
    if !v.is_finite() {
        return Err(Error::QuadratureFailure { context: "hankel transform", estimate: f64::INFINITY, tolerance: tol.abs });
    }
    Ok(v)
}

/// Tabulates `g(s) = F[f~](a_j + s)` on `grid` (which must start at 0).
pub fn hankel_profile(spatial: &SpatialProfile, n: usize, a_j: f64, grid: &[f64]) -> Result<ProfileTable> {
    check_dimension(n)?;
    spatial.validate()?;
    let l1 = spatial.lp_norm(n, 1)?;
    let l2 = spatial.lp_norm(n, 2)?;
    if !(l1 > 0.0 && l1.is_finite() && l2.is_finite()) {
        return Err(Error::NotIntegrable(format!(
            "spatial profile has L1 norm {l1} and L2 norm {l2}; it must be finite and non-zero"
        )));
    }
    let mut edges = vec![0.0];
    edges.extend(spatial.breakpoints().into_iter().filter(|&b| b > 0.0));
    edges.dedup();
    let tol = Tolerance::new(1e-13 * l1, 1e-11);
    let values = grid
        .iter()
        .map(|&s| hankel_transform(&|rho| spatial.eval(rho), n, a_j + s, &edges, tol))
        .collect::<Result<Vec<_>>>()?;
    ProfileTable::new(grid.to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::ball_volume;

    #[test]
    fn donsker_profile_at_zero_is_ball_volume() {
        for n in 1..=3 {
            let w = RadialWeight::donsker(n).unwrap();
            assert!((w.g(0.0) - ball_volume(n)).abs() < 1e-12, "n={n}");
        }
        assert!((RadialWeight::donsker(2).unwrap().g(0.0) - PI).abs() < 1e-12);
        assert!(matches!(RadialWeight::donsker(4), Err(Error::UnsupportedDimension(4))));
    }

    #[test]
    fn donsker_line_is_sinc() {
        let w = RadialWeight::donsker(1).unwrap();
        assert!(w.g(PI).abs() < 1e-15);
        for s in [0.1, 1.3, 7.0, 42.0] {
            assert!((w.g(s) - 2.0 * s.sin() / s).abs() < 1e-14);
            assert_eq!(w.g(s), w.g(-s));
        }
    }

    #[test]
    fn donsker_decay_certificate() {
        let w = RadialWeight::donsker(2).unwrap();
        let c = w.certificate();
        assert!(w.g(100.0).powi(2) <= c.c / 1e4);
        let grid: Vec<f64> = (0..=60).map(|k| 10.0 * 100f64.powf(k as f64 / 60.0)).collect();
        assert!(w.check_decay(&grid).0);
    }

    #[test]
    fn slow_decay_is_detected() {
        let w = RadialWeight::rational(2, 0, 0.0, 1.0, 0.2).unwrap();
        let grid: Vec<f64> = (0..=40).map(|k| 10f64.powf(1.0 + 3.0 * k as f64 / 40.0)).collect();
        assert!(!w.check_decay(&grid).0);
        assert_eq!(w.check_decay(&[]), (true, 0.0));
    }

    #[test]
    fn gaussian_certificate_is_tight() {
        let w = RadialWeight::gaussian_ring(2, 1, 1.0, 1.0, 8.5).unwrap();
        let grid: Vec<f64> = (1..2000).map(|k| k as f64 * 0.05).collect();
        let (holds, worst) = w.check_decay(&grid);
        assert!(holds);
        assert!(worst > 0.999 * w.certificate().c);
    }

    #[test]
    fn synthesized_line_weight_has_closed_form() {
        // n = 1: f(rho) = (c sigma / sqrt(2 pi)) * 2 exp(-sigma^2 rho^2 / (2 r^2)) cos(a rho) / ... r^0
        let (c, sigma, a, r) = (1.0, 4.0, 1.0, 100.0);
        let w = RadialWeight::gaussian_ring(1, 1, a, c, sigma).unwrap();
        for rho in [0.0, 3.0, 17.5, 60.0] {
            let expect = c * sigma * (2.0 * PI).sqrt() / PI * (-0.5 * (sigma * rho / r).powi(2)).exp() * (a * rho).cos();
            let got = w.spatial_value(r, rho).unwrap();
            assert!((got - expect).abs() < 1e-10, "rho={rho}: {got} vs {expect}");
        }
    }

    #[test]
    fn pair_consistency() {
        let w = RadialWeight::donsker(2).unwrap();
        let lams: Vec<f64> = (0..12).map(|k| 0.05 + 0.37 * k as f64).collect();
        assert!(w.verify_pair(5.0, &lams).unwrap() <= 1e-6);
        let w1 = RadialWeight::donsker(1).unwrap();
        assert!(w1.verify_pair(1.0, &lams).unwrap() <= 1e-10);
        let ring = RadialWeight::gaussian_ring(2, 1, 1.0, 1.0, 4.0).unwrap();
        let near: Vec<f64> = (0..5).map(|k| 0.9 + 0.05 * k as f64).collect();
        let d = ring.verify_pair(50.0, &near).unwrap();
        assert!(d <= 1e-6, "{d}");
    }

    #[test]
    fn hankel_profile_of_ball() {
        let grid = default_profile_grid(60.0);
        let t2 = hankel_profile(&SpatialProfile::Ball { radius: 1.0 }, 2, 0.0, &grid).unwrap();
        let d2 = RadialWeight::donsker(2).unwrap();
        for (&s, &v) in t2.nodes().iter().zip(t2.values()) {
            assert!((v - d2.g(s)).abs() < 1e-6, "s={s}");
        }
        let t1 = hankel_profile(&SpatialProfile::Ball { radius: 1.0 }, 1, 0.0, &grid).unwrap();
        for (&s, &v) in t1.nodes().iter().zip(t1.values()) {
            let exact = if s == 0.0 { 2.0 } else { 2.0 * s.sin() / s };
            assert!((v - exact).abs() < 1e-8, "s={s}");
        }
    }

    #[test]
    fn zero_profile_is_not_integrable() {
        let zero = SpatialProfile::Polynomial { coeffs: vec![0.0], radius: 1.0 };
        let r = hankel_profile(&zero, 2, 0.0, &default_profile_grid(4.0));
        assert!(matches!(r, Err(Error::NotIntegrable(_))));
    }

    #[test]
    fn corrupted_table_is_caught() {
        let grid = default_profile_grid(20.0);
        let mut w = RadialWeight::tabulated(1, 0, 0.0, SpatialProfile::Ball { radius: 1.0 }, &grid).unwrap();
        if let FourierProfile::Tabulated(t) = &mut w.profile {
            for v in t.values_mut() {
                *v *= 1.5;
            }
        }
        assert!(w.verify_pair(1.0, &[0.0, 0.5, 1.0]).unwrap() > 0.1);
    }

    #[test]
    fn table_interpolation_is_accurate() {
        let grid = default_profile_grid(100.0);
        let vals: Vec<f64> = grid.iter().map(|&s| if s == 0.0 { 2.0 } else { 2.0 * s.sin() / s }).collect();
        let t = ProfileTable::new(grid, vals).unwrap();
        for k in 0..500 {
            let s = 0.013 + 0.19 * k as f64;
            let exact = 2.0 * s.sin() / s;
            assert!((t.eval(s) - exact).abs() < 2e-4, "s={s}");
            assert_eq!(t.eval(s), t.eval(-s));
        }
        assert_eq!(t.eval(101.0), 0.0);
    }

    #[test]
    fn matched_index_consistency() {
        assert!(RadialWeight::gaussian_ring(2, 0, 1.0, 1.0, 1.0).is_err());
        assert!(RadialWeight::gaussian_ring(2, 1, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn ball_square_integrals_with_tail() {
        // int_0^inf g^2(s) s^{n-1} ds = (2 pi)^n int J_{n/2}^2(s)/s ds = (2 pi)^n / n
        let tol = Tolerance::new(1e-15, 1e-13);
        for n in [1usize, 2, 3] {
            let p = FourierProfile::Ball { n };
            let f = |s: f64| s.powi(n as i32 - 1);
            let cut = 64.0;
            let core = quad::integrate(|s| f(s) * p.eval(s).powi(2), 0.0, cut, tol, "test").unwrap();
            let tail = p.square_integral(&f, 0.0, 1.0, cut, f64::INFINITY, tol).unwrap();
            let expect = (2.0 * PI).powi(n as i32) / n as f64;
            let got = core.value + tail.value;
            assert!((got / expect - 1.0).abs() < 1e-11, "n={n}: {got} vs {expect}");
        }
    }

    #[test]
    fn rational_square_integral() {
        // int_1^inf (1+s)^{-4} ds = 1/(3 * 8)
        let p = FourierProfile::Rational { c: 1.0, power: 2.0 };
        let got = p.square_integral(&|_| 1.0, 0.0, 1.0, 1.0, f64::INFINITY, Tolerance::new(1e-14, 1e-12)).unwrap();
        assert!((got.value - 1.0 / 24.0).abs() < 1e-12, "{}", got.value);
    }
}
