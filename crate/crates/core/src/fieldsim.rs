//! Randomized spectral simulation of the isotropic field,
//! `xi(x) = sum_k amp_k (zeta_k cos<lambda_k, x> + eta_k sin<lambda_k, x>)`.
//!
//! Radii are drawn part by part (each singular term on each side of its
//! singular sphere) in the variable `w = d^alpha`, where the radial law has a
//! bounded density, by rejection from a piecewise constant envelope. Draws per
//! part are proportional to its mass, so `E xi(x) xi(y) = B_n(|x-y|)`.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, CompensatedSum};
use crate::rng::{stream, Purpose};
use crate::spectrum::{Side, SpectralModel};

const HISTOGRAM_BINS: usize = 512;

const ENVELOPE_PAD: f64 = 1.05;

#[derive(Debug, Clone)]
struct PartTable {
    part: usize,
    alpha: f64,
    w_max: f64,
    mass: f64,
    /// Per-bin upper bound of the density in `w`.
    bound: Vec<f64>,
    cdf: Vec<f64>,
}

impl PartTable {
    fn draw<R: Rng>(&self, model: &SpectralModel, rng: &mut R) -> f64 {
        let part = &model.parts()[self.part];
        let bins = self.bound.len();
        let dw = self.w_max / bins as f64;
        loop {
            let u: f64 = rng.random();
            let k = self.cdf.partition_point(|&c| c <= u).clamp(1, bins) - 1;
            let w = (k as f64 + rng.random::<f64>()) * dw;
            let d = w.powf(1.0 / self.alpha);
            if !(d > 0.0) {
                continue;
            }
            let b = part.bounded(d);
            debug_assert!(b <= self.bound[k], "envelope violated in bin {k}");
            if rng.random::<f64>() * self.bound[k] < b {
                return d;
            }
        }
    }
}

/// Per-model sampling tables, reusable across realizations.
#[derive(Debug, Clone)]
pub struct FrequencySampler {
    model: SpectralModel,
    tables: Vec<PartTable>,
    total_mass: f64,
}

impl FrequencySampler {
    pub fn new(model: &SpectralModel) -> Result<Self> {
        let masses = model.part_masses()?.to_vec();
        let total_mass = model.total_mass()?;
        if !(total_mass.is_finite() && total_mass > 0.0) {
            return Err(Error::MassNotFinite(format!("total spectral mass {total_mass}")));
        }
        let gl = gauss_legendre(8);
        let mut tables = Vec::new();
        for (i, (part, &mass)) in model.parts().iter().zip(&masses).enumerate() {
            if mass <= 0.0 {
                continue;
            }
            let extent = part.extent.ok_or_else(|| {
                Error::MassNotFinite(format!("component {} does not decay", part.component))
            })?;
            let w_max = extent.powf(part.alpha);
            let dw = w_max / HISTOGRAM_BINS as f64;
            let density = |w: f64| part.bounded(w.powf(1.0 / part.alpha));
            let mut bound = Vec::with_capacity(HISTOGRAM_BINS);
            let mut cdf = Vec::with_capacity(HISTOGRAM_BINS + 1);
            let mut acc = CompensatedSum::new();
            cdf.push(0.0);
            for k in 0..HISTOGRAM_BINS {
                let (lo, hi) = (k as f64 * dw, (k + 1) as f64 * dw);
                let c = 0.5 * (lo + hi);
                let peak = gl
                    .iter()
                    .map(|&(x, _)| density(c + 0.5 * dw * x))
                    .chain([density(lo.max(f64::MIN_POSITIVE)), density(hi)])
                    .fold(0.0, f64::max);
                let m = ENVELOPE_PAD * peak;
                bound.push(m);
                acc.add(m * dw);
                cdf.push(acc.value());
            }
            let top = acc.value();
            if !(top > 0.0) {
                continue;
            }
            for c in cdf.iter_mut() {
                *c /= top;
            }
            *cdf.last_mut().unwrap() = 1.0;
            tables.push(PartTable { part: i, alpha: part.alpha, w_max, mass, bound, cdf });
        }
        Ok(FrequencySampler { model: model.clone(), tables, total_mass })
    }

    pub fn model(&self) -> &SpectralModel {
        &self.model
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Number of draws per part: proportional to mass, at least one each.
    fn allocation(&self, count: usize) -> Option<Vec<usize>> {
        let parts = self.tables.len();
        if count < parts {
            return None;
        }
        let spare = (count - parts) as f64;
        let mut alloc: Vec<usize> = Vec::with_capacity(parts);
        let mut remainders = Vec::with_capacity(parts);
        for t in &self.tables {
            let share = spare * t.mass / self.total_mass;
            alloc.push(1 + share.floor() as usize);
            remainders.push(share - share.floor());
        }
        let mut left = count - alloc.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..parts).collect();
        order.sort_by(|&a, &b| remainders[b].total_cmp(&remainders[a]).then(a.cmp(&b)));
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            alloc[i] += 1;
            left -= 1;
        }
        Some(alloc)
    }

    /// `count` frequencies with coefficients, from stream `index` of `seed`.
    pub fn sample(&self, count: usize, seed: u64, index: u64) -> Result<FrequencySample> {
        if count == 0 {
            return Err(Error::DomainError("at least one frequency is required".into()));
        }
        let n = self.model.dimension();
        let mut rng = stream(seed, Purpose::Frequencies, index);
        let mut radii = Vec::with_capacity(count);
        let mut amplitudes = Vec::with_capacity(count);
        let mut push = |table: &PartTable, amp2: f64, rng: &mut crate::rng::Stream| {
            let d = table.draw(&self.model, rng);
            radii.push(off_singular(&self.model, table.part, d));
            amplitudes.push(amp2.sqrt());
        };
        match self.allocation(count) {
            Some(alloc) => {
                for (table, &m) in self.tables.iter().zip(&alloc) {
                    let amp2 = table.mass / m as f64;
                    for _ in 0..m {
                        push(table, amp2, &mut rng);
                    }
                }
            }
            None => {
                let amp2 = self.total_mass / count as f64;
                for _ in 0..count {
                    let u: f64 = rng.random::<f64>() * self.total_mass;
                    let mut acc = 0.0;
                    let mut pick = self.tables.len() - 1;
                    for (i, t) in self.tables.iter().enumerate() {
                        acc += t.mass;
                        if u < acc {
                            pick = i;
                            break;
                        }
                    }
                    push(&self.tables[pick], amp2, &mut rng);
                }
            }
        }
        let mut directions = Vec::with_capacity(count * n);
        for _ in 0..count {
            push_direction(n, &mut rng, &mut directions);
        }
        let mut coef = stream(seed, Purpose::Coefficients, index);
        let zeta: Vec<f64> = (0..count).map(|_| coef.sample(StandardNormal)).collect();
        let eta: Vec<f64> = (0..count).map(|_| coef.sample(StandardNormal)).collect();
        Ok(FrequencySample { n, seed, index, total_mass: self.total_mass, radii, directions, amplitudes, zeta, eta })
    }
}

/// Radius for distance `d` in `part`. With small exponents `d` can fall below
/// one ulp of the location; the radius is then moved one ulp off it.
fn off_singular(model: &SpectralModel, part: usize, d: f64) -> f64 {
    let p = &model.parts()[part];
    let mut lambda = p.lambda(d);
    let hits = |l: f64| l <= 0.0 || model.components().iter().any(|c| c.location == l);
    while hits(lambda) {
        lambda = match p.side {
            Side::Inner if lambda > 0.0 => lambda.next_down(),
            _ => lambda.next_up(),
        };
    }
    lambda
}

fn push_direction<R: Rng>(n: usize, rng: &mut R, out: &mut Vec<f64>) {
    let two_pi = 2.0 * std::f64::consts::PI;
    match n {
        1 => out.push(if rng.random::<bool>() { 1.0 } else { -1.0 }),
        2 => {
            let th: f64 = two_pi * rng.random::<f64>();
            out.extend([th.cos(), th.sin()]);
        }
        _ => {
            let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
            let ph: f64 = two_pi * rng.random::<f64>();
            let s = (1.0 - z * z).max(0.0).sqrt();
            out.extend([s * ph.cos(), s * ph.sin(), z]);
        }
    }
}

/// Sampled surrogate of the spectral white noise.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySample {
    pub n: usize,
    pub seed: u64,
    pub index: u64,
    pub total_mass: f64,
    pub radii: Vec<f64>,
    /// Unit vectors, `n` entries per frequency.
    pub directions: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub zeta: Vec<f64>,
    pub eta: Vec<f64>,
}

impl FrequencySample {
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }
}

/// `count` frequencies for `model`, stream 0 of `seed`.
pub fn sample_frequencies(model: &SpectralModel, count: usize, seed: u64) -> Result<FrequencySample> {
    FrequencySampler::new(model)?.sample(count, seed, 0)
}

/// A field realization ready for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    n: usize,
    /// Frequency vectors, `n` entries each.
    freqs: Vec<f64>,
    cos_coef: Vec<f64>,
    sin_coef: Vec<f64>,
    max_frequency: f64,
}

impl FieldRealization {
    pub fn new(sample: &FrequencySample) -> Self {
        let n = sample.n;
        let mut freqs = Vec::with_capacity(sample.len() * n);
        for k in 0..sample.len() {
            for c in 0..n {
                freqs.push(sample.radii[k] * sample.directions[k * n + c]);
            }
        }
        let cos_coef = sample.amplitudes.iter().zip(&sample.zeta).map(|(a, z)| a * z).collect();
        let sin_coef = sample.amplitudes.iter().zip(&sample.eta).map(|(a, e)| a * e).collect();
        let max_frequency = sample.radii.iter().copied().fold(0.0, f64::max);
        FieldRealization { n, freqs, cos_coef, sin_coef, max_frequency }
    }

    /// Realization built from explicit frequency vectors and coefficient pairs
    /// `(amp zeta, amp eta)`.
    pub fn from_terms(n: usize, freqs: Vec<f64>, cos_coef: Vec<f64>, sin_coef: Vec<f64>) -> Result<Self> {
        let count = cos_coef.len();
        if freqs.len() != count * n || sin_coef.len() != count {
            return Err(Error::DomainError("frequency and coefficient lengths disagree".into()));
        }
        let max_frequency = freqs
            .chunks(n)
            .map(|f| f.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        Ok(FieldRealization { n, freqs, cos_coef, sin_coef, max_frequency })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.cos_coef.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cos_coef.is_empty()
    }

    pub fn max_frequency(&self) -> f64 {
        self.max_frequency
    }

    pub fn frequency(&self, k: usize) -> &[f64] {
        &self.freqs[k * self.n..(k + 1) * self.n]
    }

    pub fn cos_coefficients(&self) -> &[f64] {
        &self.cos_coef
    }

    #[inline]
    fn phase(&self, k: usize, x: &[f64]) -> f64 {
        let f = &self.freqs[k * self.n..(k + 1) * self.n];
        f.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `xi(x)`.
    pub fn evaluate_at(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        let mut s = 0.0;
        for k in 0..self.len() {
            let (sn, cs) = self.phase(k, x).sin_cos();
            s += self.cos_coef[k] * cs + self.sin_coef[k] * sn;
        }
        s
    }

    pub fn evaluate(&self, points: &[Vec<f64>]) -> Vec<f64> {
        points.iter().map(|p| self.evaluate_at(p)).collect()
    }

    /// `(xi(x) + xi(-x)) / 2`, the part of the field seen by radial weights.
    #[inline]
    pub fn even_part(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.len() {
            s += self.cos_coef[k] * self.phase(k, x).cos();
        }
        s
    }
}

/// Monte Carlo covariance estimate at one lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceEstimate {
    pub lag: f64,
    pub estimate: f64,
    /// Standard error; `None` when only one replication is available.
    pub stderr: Option<f64>,
}

/// Averages `xi(0) xi(lag e_1)` over `replications` independent realizations.
pub fn estimate_covariance(
    model: &SpectralModel,
    lags: &[f64],
    count: usize,
    replications: usize,
    seed: u64,
) -> Result<Vec<CovarianceEstimate>> {
    if lags.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::DomainError("lags must be >= 0".into()));
    }
    if replications == 0 {
        return Err(Error::DomainError("at least one replication is required".into()));
    }
    let sampler = FrequencySampler::new(model)?;
    let n = model.dimension();
    let origin = vec![0.0; n];
    let products: Vec<Vec<f64>> = (0..replications as u64)
        .into_par_iter()
        .map(|i| {
            let field = FieldRealization::new(&sampler.sample(count, seed, i)?);
            let x0 = field.evaluate_at(&origin);
            Ok(lags
                .iter()
                .map(|&l| {
                    let mut x = vec![0.0; n];
                    x[0] = l;
                    x0 * field.evaluate_at(&x)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let m = replications as f64;
    Ok(lags
        .iter()
        .enumerate()
        .map(|(li, &lag)| {
            let mean = crate::quad::compensated_sum(products.iter().map(|p| p[li])) / m;
            let stderr = (replications > 1).then(|| {
                let ss = crate::quad::compensated_sum(products.iter().map(|p| (p[li] - mean).powi(2)));
                (ss / (m - 1.0) / m).sqrt()
            });
            CovarianceEstimate { lag, estimate: mean, stderr }
        })
        .collect())
}

pub const DUMP_MAGIC: &[u8; 4] = b"LRDF";
pub const DUMP_VERSION: u32 = 1;

/// Writes a sample in the little-endian dump layout:
/// magic `LRDF`, version `u32`, `n` as `u32`, `N` as `u64`, seed `u64`,
/// stream index `u64`, total mass `f64`, then per frequency
/// `radius f64`, `n` direction components `f64`, amplitude, zeta, eta (`f64`).
pub fn write_sample<W: Write>(sample: &FrequencySample, mut out: W) -> std::io::Result<()> {
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&DUMP_VERSION.to_le_bytes())?;
    out.write_all(&(sample.n as u32).to_le_bytes())?;
    out.write_all(&(sample.len() as u64).to_le_bytes())?;
    out.write_all(&sample.seed.to_le_bytes())?;
    out.write_all(&sample.index.to_le_bytes())?;
    out.write_all(&sample.total_mass.to_le_bytes())?;
    for k in 0..sample.len() {
        out.write_all(&sample.radii[k].to_le_bytes())?;
        for c in 0..sample.n {
            out.write_all(&sample.directions[k * sample.n + c].to_le_bytes())?;
        }
        out.write_all(&sample.amplitudes[k].to_le_bytes())?;
        out.write_all(&sample.zeta[k].to_le_bytes())?;
        out.write_all(&sample.eta[k].to_le_bytes())?;
    }
    Ok(())
}

pub fn read_sample<R: Read>(mut input: R) -> Result<FrequencySample> {
    let bad = |m: &str| Error::Config(format!("realization dump: {m}"));
    let mut buf4 = [0u8; 4];
    let mut buf8 = [0u8; 8];
    let mut u32_ = |r: &mut R| -> Result<u32> {
        r.read_exact(&mut buf4).map_err(|e| bad(&e.to_string()))?;
        Ok(u32::from_le_bytes(buf4))
    };
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(|e| bad(&e.to_string()))?;
    if &magic != DUMP_MAGIC {
        return Err(bad("bad magic"));
    }
    if u32_(&mut input)? != DUMP_VERSION {
        return Err(bad("unsupported version"));
    }
    let n = u32_(&mut input)? as usize;
    let mut u64_ = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut buf8).map_err(|e| bad(&e.to_string()))?;
        Ok(u64::from_le_bytes(buf8))
    };
    let count = u64_(&mut input)? as usize;
    let seed = u64_(&mut input)?;
    let index = u64_(&mut input)?;
    let total_mass = f64::from_bits(u64_(&mut input)?);
    if !(1..=3).contains(&n) {
        return Err(bad("dimension out of range"));
    }
    let mut f = |r: &mut R| -> Result<f64> { Ok(f64::from_bits(u64_(r)?)) };
    let mut s = FrequencySample {
        n,
        seed,
        index,
        total_mass,
        radii: Vec::with_capacity(count),
        directions: Vec::with_capacity(count * n),
        amplitudes: Vec::with_capacity(count),
        zeta: Vec::with_capacity(count),
        eta: Vec::with_capacity(count),
    };
    for _ in 0..count {
        s.radii.push(f(&mut input)?);
        for _ in 0..n {
            s.directions.push(f(&mut input)?);
        }
        s.amplitudes.push(f(&mut input)?);
        s.zeta.push(f(&mut input)?);
        s.eta.push(f(&mut input)?);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::Tolerance;
    use crate::spectrum::{Envelope, SingularComponent};

    fn plateau_line() -> SpectralModel {
        SpectralModel::new(1, vec![SingularComponent::new(0.0, 0.5, Envelope::plateau(1.0, 1.0))]).unwrap()
    }

    fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).max((i + 1) as f64 / n - f)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn radial_law_matches_spectral_function() {
        // plateau on the line with alpha = 1/2: Phi(u) / Phi(inf) = sqrt(u)
        let s = sample_frequencies(&plateau_line(), 4000, 21).unwrap();
        let d = ks_distance(s.radii.clone(), |u| u.min(1.0).sqrt());
        assert!(d * 4000f64.sqrt() < 1.95, "KS {d}");

        // exponential in the plane with alpha = 1: Phi(u) / Phi(inf) = 1 - exp(-beta u)
        let m = SpectralModel::new(2, vec![SingularComponent::new(0.0, 1.0, Envelope::exponential(1.0, 3.0))]).unwrap();
        let s = sample_frequencies(&m, 4000, 22).unwrap();
        let d = ks_distance(s.radii.clone(), |u| 1.0 - (-3.0 * u).exp());
        assert!(d * 4000f64.sqrt() < 1.95, "KS {d}");
    }

    #[test]
    fn directions_are_unit_and_balanced() {
        let m = SpectralModel::new(3, vec![SingularComponent::new(0.0, 1.5, Envelope::exponential(1.0, 1.0))]).unwrap();
        let s = sample_frequencies(&m, 3000, 4).unwrap();
        for v in s.directions.chunks(3) {
            assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // upper hemisphere count is Binomial(N, 1/2)
        let up = s.directions.chunks(3).filter(|v| v[2] > 0.0).count() as f64;
        assert!((up - 1500.0).abs() < 3.0 * (3000.0f64 * 0.25).sqrt());
    }

    #[test]
    fn zero_frequencies_is_an_error() {
        assert!(sample_frequencies(&plateau_line(), 0, 1).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let m = plateau_line();
        let a = sample_frequencies(&m, 64, 9).unwrap();
        let b = sample_frequencies(&m, 64, 9).unwrap();
        assert_eq!(a, b);
        let c = sample_frequencies(&m, 64, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_frequency_closed_form() {
        let mass: f64 = 4.0;
        let f = FieldRealization::from_terms(2, vec![0.3, 0.4], vec![mass.sqrt()], vec![0.0]).unwrap();
        for x in [[0.0f64, 0.0], [1.0, -2.0], [7.5, 3.25]] {
            let expect = mass.sqrt() * (0.3 * x[0] + 0.4 * x[1]).cos();
            assert!((f.evaluate_at(&x) - expect).abs() < 1e-14);
        }
        // period 2 pi lambda / |lambda|^2
        let x = [0.7, 0.1];
        let shift = 2.0 * std::f64::consts::PI / 0.25;
        let y = [x[0] + shift * 0.3 * 3.0, x[1] + shift * 0.4 * 3.0];
        assert!((f.evaluate_at(&x) - f.evaluate_at(&y)).abs() < 1e-12);
    }

    #[test]
    fn amplitudes_reproduce_mass() {
        // E amp^2 summed over frequencies equals the mass for every stratum.
        let m = SpectralModel::new(
            2,
            vec![
                SingularComponent::new(0.0, 1.0, Envelope::exponential(0.2, 20.0)),
                SingularComponent::new(1.0, 0.5, Envelope::exponential(1.0, 20.0)),
            ],
        )
        .unwrap();
        let sampler = FrequencySampler::new(&m).unwrap();
        let reps = 200;
        let mut acc = 0.0;
        for i in 0..reps {
            let s = sampler.sample(256, 3, i).unwrap();
            acc += s.amplitudes.iter().map(|a| a * a).sum::<f64>();
        }
        let mean = acc / reps as f64;
        let mass = m.total_mass().unwrap();
        assert!((mean / mass - 1.0).abs() < 0.01, "{mean} vs {mass}");
    }

    #[test]
    fn radii_avoid_singular_points() {
        let m = SpectralModel::new(
            1,
            vec![
                SingularComponent::new(0.0, 0.5, Envelope::plateau(1.0, 0.5)),
                SingularComponent::new(1.0, 0.1, Envelope::plateau(1.0, 0.5)),
            ],
        )
        .unwrap();
        let s = sample_frequencies(&m, 5000, 1).unwrap();
        assert!(s.radii.iter().all(|&r| r > 0.0 && r != 1.0));
        assert!(s.radii.iter().all(|&r| r <= 1.5));
    }

    #[test]
    fn dump_round_trip() {
        let m = plateau_line();
        let s = sample_frequencies(&m, 17, 5).unwrap();
        let mut buf = Vec::new();
        write_sample(&s, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 8 * 4 + 17 * 5 * 8);
        let back = read_sample(&buf[..]).unwrap();
        assert_eq!(back, s);
        assert!(read_sample(&b"XXXX"[..]).is_err());
    }

    #[test]
    fn covariance_at_lag_zero_matches_mass() {
        let m = plateau_line();
        let est = estimate_covariance(&m, &[0.0], 64, 2000, 11).unwrap();
        let b0 = m.covariance(0.0, Tolerance::default()).unwrap().value;
        let e = est[0];
        assert!((e.estimate - b0).abs() < 3.0 * e.stderr.unwrap());
        let single = estimate_covariance(&m, &[0.0], 64, 1, 11).unwrap();
        assert_eq!(single[0].stderr, None);
    }
}
