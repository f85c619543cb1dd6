//! The limiting process `X_j(t) = t int g_j(|u| t^{1/n}) |u|^{-(n - alpha_j)/2} dZ(u)`:
//! covariance kernel, path simulation, and the change-of-variables facts used
//! to reach it.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad::{self, gauss_legendre, Estimate, Tolerance};
use crate::rng::{stream, Purpose};
use crate::special::sphere_area;
use crate::spectrum::{Side, SpectralModel};
use crate::weights::{smooth_tail, FourierProfile, ProfileTail, RadialWeight};

/// End of the exact part of the radial integrals, in units of `s`.
const CORE_END: f64 = 2048.0;
/// End of the exact part for products of two oscillating profiles.
const PRODUCT_CORE_END: f64 = 32768.0;

fn default_tolerance() -> Tolerance {
    Tolerance::new(1e-13, 1e-12)
}

/// Covariance structure of `X_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitProcess {
    pub n: usize,
    pub alpha: f64,
    profile: FourierProfile,
    certificate_c: f64,
    /// `omega_n int_0^inf g^2(rho) rho^{alpha - 1} drho`, i.e. `Var X_j(1)`.
    pub variance_at_one: Estimate,
    tol: Tolerance,
}

impl LimitProcess {
    pub fn new(w: &RadialWeight, alpha: f64) -> Result<Self> {
        Self::with_tolerance(w, alpha, default_tolerance())
    }

    pub fn with_tolerance(w: &RadialWeight, alpha: f64, tol: Tolerance) -> Result<Self> {
        if !(alpha > 0.0 && alpha < w.n as f64) {
            return Err(Error::UnsupportedOrder(alpha));
        }
        let profile = w.profile().clone();
        if let FourierProfile::Rational { power, .. } = profile {
            if 2.0 * power <= alpha {
                return Err(Error::DivergentLimitIntegral(format!(
                    "g^2 decays like s^-{} which does not beat s^{}",
                    2.0 * power,
                    alpha - 1.0
                )));
            }
        }
        let mut p = LimitProcess {
            n: w.n,
            alpha,
            profile,
            certificate_c: w.certificate().c,
            variance_at_one: Estimate::default(),
            tol,
        };
        p.variance_at_one = p.direct_variance(1.0)?;
        Ok(p)
    }

    /// `Var X_j(t) = t^{2 - alpha/n} Var X_j(1)`.
    pub fn variance(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        t.powf(2.0 - self.alpha / self.n as f64) * self.variance_at_one.value
    }

    /// `t^2 omega_n int g^2(rho t^{1/n}) rho^{alpha-1} drho`, by quadrature at `t`.
    pub fn direct_variance(&self, t: f64) -> Result<Estimate> {
        if t == 0.0 || self.profile.is_zero() {
            return Ok(Estimate::default());
        }
        let tau = self.tau(t);
        let f = |rho: f64| self.profile.eval(rho * tau).powi(2) * rho.powf(self.alpha - 1.0);
        let width = self.profile.panel_width() / tau;
        let est = match self.profile.tail() {
            ProfileTail::Negligible { cutoff } => self.core(&f, cutoff / tau, width)?,
            _ => {
                let end = CORE_END / tau;
                let core = self.core(&f, end, width)?;
                let weight = |rho: f64| rho.powf(self.alpha - 1.0);
                let tail = self
                    .profile
                    .square_integral(&weight, 0.0, tau, end, f64::INFINITY, self.tol)
                    .map_err(divergent)?;
                core + tail
            }
        };
        Ok(est.scale(t * t * sphere_area(self.n)))
    }

    /// `Cov(X_j(t), X_j(s)) = t s omega_n int g(rho t^{1/n}) g(rho s^{1/n}) rho^{alpha-1} drho`.
    pub fn covariance(&self, t: f64, s: f64) -> Result<Estimate> {
        for v in [t, s] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::DomainError(format!("t must lie in [0, 1], got {v}")));
            }
        }
        if t == 0.0 || s == 0.0 || self.profile.is_zero() {
            return Ok(Estimate::default());
        }
        if t == s {
            return self.direct_variance(t);
        }
        let (ta, tb) = (self.tau(t), self.tau(s));
        let (lo, hi) = (ta.min(tb), ta.max(tb));
        let weight = |rho: f64| rho.powf(self.alpha - 1.0);
        let f = |rho: f64| self.profile.eval(rho * ta) * self.profile.eval(rho * tb) * weight(rho);
        let width = self.profile.panel_width() / hi;
        let est = match self.profile.tail() {
            ProfileTail::Negligible { cutoff } => self.core(&f, cutoff / hi, width)?,
            ProfileTail::Smooth => {
                let end = CORE_END / lo;
                self.core(&f, end, width)? + smooth_tail(&f, end, f64::INFINITY, self.tol).map_err(divergent)?
            }
            ProfileTail::Oscillatory { .. } => {
                // Beyond the core the product oscillates at the beat frequency
                // `|ta - tb|` with amplitude below C (ta tb)^{-n/2} rho^{alpha-1-n}.
                let end = PRODUCT_CORE_END / lo;
                let nf = self.n as f64;
                let amp = self.certificate_c * (ta * tb).powf(-0.5 * nf) * end.powf(self.alpha - 1.0 - nf);
                let mut e = self.core(&f, end, width)?;
                e.error += 2.0 * amp / (hi - lo);
                e
            }
        };
        Ok(est.scale(t * s * sphere_area(self.n)))
    }

    pub fn covariance_matrix(&self, grid: &[f64]) -> Result<Vec<Vec<f64>>> {
        let m = grid.len();
        let mut k = vec![vec![0.0; m]; m];
        for a in 0..m {
            for b in a..m {
                let v = self.covariance(grid[a], grid[b])?.value;
                k[a][b] = v;
                k[b][a] = v;
            }
        }
        Ok(k)
    }

    fn tau(&self, t: f64) -> f64 {
        t.powf(1.0 / self.n as f64)
    }

    fn core(&self, f: &dyn Fn(f64) -> f64, end: f64, width: f64) -> Result<Estimate> {
        quad::integrate_panels(f, &[(0.0, self.alpha), (end, 1.0)], width, self.tol, "limit integral")
    }
}

fn divergent(e: Error) -> Error {
    match e {
        Error::NotIntegrable(m) => Error::DivergentLimitIntegral(m),
        other => other,
    }
}

pub fn limit_variance(w: &RadialWeight, alpha: f64, t: f64) -> Result<Estimate> {
    let p = LimitProcess::new(w, alpha)?;
    let scale = if t == 0.0 { 0.0 } else { t.powf(2.0 - alpha / w.n as f64) };
    Ok(p.variance_at_one.scale(scale))
}

pub fn limit_covariance(w: &RadialWeight, alpha: f64, t: f64, s: f64) -> Result<Estimate> {
    LimitProcess::new(w, alpha)?.covariance(t, s)
}

/// Lower-triangular `L` with `L L^T = a`. A jitter of `1e-12 trace / m` is
/// added to the diagonal once if the plain factorization fails.
pub fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    match factor(a, 0.0) {
        Ok(l) => Ok(l),
        Err(_) => {
            let m = a.len() as f64;
            let trace: f64 = a.iter().enumerate().map(|(i, row)| row[i]).sum();
            factor(a, 1e-12 * trace / m)
        }
    }
}

fn factor(a: &[Vec<f64>], jitter: f64) -> Result<Vec<Vec<f64>>> {
    let m = a.len();
    let mut l = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                s += jitter;
                if !(s > 0.0) {
                    return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Ok(l)
}

/// How limit paths are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathMethod {
    /// Exact Gaussian vector from the covariance kernel.
    Cholesky,
    /// Radial white noise projected onto `shells` shells.
    Shells { shells: usize },
}

pub const MIN_SHELLS: usize = 64;

/// `replications` paths of `X_j` on `grid`; path `i` uses its own stream.
pub fn simulate_limit(
    process: &LimitProcess,
    grid: &[f64],
    replications: usize,
    method: PathMethod,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::DomainError("t grid must lie in [0, 1]".into()));
    }
    let m = grid.len();
    let active: Vec<usize> = (0..m).filter(|&i| grid[i] != 0.0 && !process.profile.is_zero()).collect();
    if active.is_empty() {
        return Ok(vec![vec![0.0; m]; replications]);
    }
    let sub: Vec<f64> = active.iter().map(|&i| grid[i]).collect();
    match method {
        PathMethod::Cholesky => {
            let l = cholesky(&process.covariance_matrix(&sub)?)?;
            let k = sub.len();
            Ok((0..replications as u64)
                .into_par_iter()
                .map(|r| {
                    let mut rng = stream(seed, Purpose::LimitPaths, r);
                    let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let mut path = vec![0.0; m];
                    for (a, &slot) in active.iter().enumerate() {
                        path[slot] = (0..=a).map(|b| l[a][b] * z[b]).sum();
                    }
                    path
                })
                .collect())
        }
        PathMethod::Shells { shells } => {
            if shells < MIN_SHELLS {
                return Err(Error::DomainError(format!("need at least {MIN_SHELLS} shells, got {shells}")));
            }
            let basis = shell_basis(process, &sub, shells);
            Ok((0..replications as u64)
                .into_par_iter()
                .map(|r| {
                    let mut rng = stream(seed, Purpose::LimitPaths, r);
                    let z: Vec<f64> = (0..shells).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let mut path = vec![0.0; m];
                    for (a, &slot) in active.iter().enumerate() {
                        path[slot] = quad::compensated_sum(basis[a].iter().zip(&z).map(|(b, z)| b * z));
                    }
                    path
                })
                .collect())
        }
    }
}

/// `t sqrt(m_k) gbar_k(t)` per grid point and shell, where `m_k` is the
/// white-noise mass of shell `k` and `gbar_k(t)` the mass-weighted average of
/// `g(rho t^{1/n})` over it.
fn shell_basis(p: &LimitProcess, grid: &[f64], shells: usize) -> Vec<Vec<f64>> {
    let tau_min = grid.iter().map(|&t| p.tau(t)).fold(f64::INFINITY, f64::min);
    let reach = match p.profile.tail() {
        ProfileTail::Negligible { cutoff } => cutoff,
        _ => 256.0,
    };
    let end = reach / tau_min;
    let h = end / shells as f64;
    let alpha = p.alpha;
    let omega = sphere_area(p.n);
    let gl = gauss_legendre(8);
    grid.iter()
        .map(|&t| {
            let tau = p.tau(t);
            (0..shells)
                .map(|k| {
                    // average in w = rho^alpha, where the shell mass is uniform
                    let (w0, w1) = ((k as f64 * h).powf(alpha), ((k + 1) as f64 * h).powf(alpha));
                    let avg: f64 = gl
                        .iter()
                        .map(|&(x, wt)| {
                            let w = 0.5 * (w0 + w1) + 0.5 * (w1 - w0) * x;
                            0.5 * wt * p.profile.eval(w.powf(1.0 / alpha) * tau)
                        })
                        .sum();
                    let mass = omega * (w1 - w0) / alpha;
                    t * mass.sqrt() * avg
                })
                .collect()
        })
        .collect()
}

fn norm(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Determinant of the Jacobian of `u -> u (1 + a/|u|)`: `(1 + a/|u|)^{n-1}`.
pub fn jacobian_outer(a: f64, u: &[f64]) -> Result<f64> {
    let r = norm(u);
    if r == 0.0 || u.is_empty() || a < 0.0 {
        return Err(Error::DomainError("outer map needs u != 0 and a >= 0".into()));
    }
    Ok((1.0 + a / r).powi(u.len() as i32 - 1))
}

/// Determinant of the Jacobian of `u -> u (a/|u| - 1)`: `-(a/|u| - 1)^{n-1}`.
pub fn jacobian_inner(a: f64, u: &[f64]) -> Result<f64> {
    let r = norm(u);
    if !(r > 0.0 && r < a) || u.is_empty() {
        return Err(Error::DomainError(format!("inner map needs 0 < |u| < a, got |u| = {r}, a = {a}")));
    }
    Ok(-(a / r - 1.0).powi(u.len() as i32 - 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorollaryIntegral {
    pub label: String,
    pub value: Estimate,
}

/// Finite radial integrals behind the change of variables around `a_j`:
/// outer ones `int_0^inf h_i(rho + a_j - a_i) |rho + a_j - a_i|^{e_i} (rho + a_j)^{n-1} drho`
/// and, for `a_j > 0`, inner ones over `(0, a_j)` with `a_j - rho` in place of
/// `rho + a_j`. Here `e_0 = alpha_0 - n` and `e_i = alpha_i - 1`.
pub fn corollary_integrals(model: &SpectralModel, j: usize, tol: Tolerance) -> Result<Vec<CorollaryIntegral>> {
    let comps = model.components();
    let a = comps
        .get(j)
        .ok_or_else(|| Error::IndexMismatch(format!("model has no component {j}")))?
        .location;
    let n = model.dimension() as i32;
    let mut out = Vec::new();
    let invalid = |label: &str, e: Error| Error::InvalidModel(format!("{label} is not finite: {e}"));
    for side in [Side::Outer, Side::Inner] {
        if side == Side::Inner && a == 0.0 {
            break;
        }
        for (i, c) in comps.iter().enumerate() {
            if i == j && j != 0 {
                continue;
            }
            let e = if i == 0 { c.alpha - n as f64 } else { c.alpha - 1.0 };
            // lambda as a function of rho on this side
            let lam = |rho: f64| match side {
                Side::Outer => a + rho,
                Side::Inner => a - rho,
            };
            let f = |rho: f64| {
                let l = lam(rho);
                let d = l - c.location;
                c.envelope.eval(d) * d.abs().powf(e) * l.powi(n - 1)
            };
            let label = format!("{}_{i}", if side == Side::Outer { "outer" } else { "inner" });
            // Singular where lambda hits a_i; the integrand carries |.|^{alpha_i - 1} there,
            // or |.|^{alpha_0 - 1} at the origin (the factor lambda^{n-1} cancels the rest).
            let gamma = c.alpha.min(1.0);
            let hit = match side {
                Side::Outer => c.location - a,
                Side::Inner => a - c.location,
            };
            let reach = c.envelope.reach();
            let end = match side {
                Side::Inner => a,
                Side::Outer => match reach {
                    Some(r) => (c.location + r - a).max(0.0),
                    None => return Err(invalid(&label, Error::NotIntegrable("envelope does not decay".into()))),
                },
            };
            let mut cuts = vec![(0.0, if hit == 0.0 { gamma } else { 1.0 })];
            if hit > 0.0 && hit < end {
                cuts.push((hit, gamma));
            }
            let end_gamma = if hit == end { gamma } else { 1.0 };
            cuts.push((end, end_gamma));
            if end <= 0.0 {
                out.push(CorollaryIntegral { label, value: Estimate::default() });
                continue;
            }
            let width = end.max(1e-300);
            let value = quad::integrate_panels(&f, &cuts, width, tol, "corollary integral").map_err(|e| invalid(&label, e))?;
            if !value.value.is_finite() {
                return Err(invalid(&label, Error::NotIntegrable("non-finite value".into())));
            }
            out.push(CorollaryIntegral { label, value });
        }
    }
    Ok(out)
}
