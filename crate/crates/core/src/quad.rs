//! One-dimensional quadrature: Gauss-Kronrod 21 with global adaptive
//! bisection, removal of integrable endpoint power singularities, Gauss-Legendre
//! nodes, compensated summation and iterated averaging of oscillatory partial
//! sums.

use std::ops::{Add, AddAssign};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-8, rel: 1e-6 }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    pub fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }

    pub fn scaled_abs(&self, factor: f64) -> Self {
        Tolerance { abs: self.abs * factor, rel: self.rel }
    }
}

/// Integral value with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn new(value: f64, error: f64) -> Self {
        Estimate { value, error }
    }

    pub fn scale(self, c: f64) -> Self {
        Estimate { value: self.value * c, error: self.error * c.abs() }
    }
}

impl Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate { value: self.value + rhs.value, error: self.error + rhs.error }
    }
}

impl AddAssign for Estimate {
    fn add_assign(&mut self, rhs: Estimate) {
        *self = *self + rhs;
    }
}

/// Neumaier's compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut s = CompensatedSum::new();
    for v in values {
        s.add(v);
    }
    s.value()
}

// Kronrod abscissae; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_932_299_016,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Single Gauss-Kronrod 21 point rule on `[a, b]`.
pub fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Estimate {
    gk21_abs(f, a, b).0
}

/// `gk21` together with the rule applied to `|f|`.
fn gk21_abs<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (Estimate, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = fc.abs() * WGK[10];
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for i in 0..10 {
        let dx = half * XGK[i];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[i] = f1;
        fv2[i] = f2;
        res_k += WGK[i] * (f1 + f2);
        res_abs += WGK[i] * (f1.abs() + f2.abs());
        if i % 2 == 1 {
            res_g += WG[i / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for i in 0..10 {
        res_asc += WGK[i] * ((fv1[i] - mean).abs() + (fv2[i] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (Estimate { value, error: err }, res_abs)
}

const MAX_INTERVALS: usize = 4000;

/// Globally adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
    context: &'static str,
) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate::default());
    }
    let (first, abs) = gk21_abs(&mut f, a, b);
    let mut intervals = vec![(a, b, first, abs)];
    let mut total = first;
    loop {
        if !total.value.is_finite() {
            return Err(Error::QuadratureFailure {
                context,
                estimate: f64::INFINITY,
                tolerance: tol.target(0.0),
            });
        }
        let target = tol.target(total.value);
        // Below the rounding floor of the panels no refinement can help.
        let floor = 100.0 * f64::EPSILON * intervals.iter().map(|iv| iv.3).sum::<f64>();
        if total.error <= target.max(floor) {
            return Ok(total);
        }
        // Bisect the interval with the largest error.
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, iv)| if iv.2.error > acc.1 { (i, iv.2.error) } else { acc });
        let (lo, hi, _, _) = intervals[worst];
        let mid = 0.5 * (lo + hi);
        let too_narrow = (hi - lo).abs() <= 1e3 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE);
        if intervals.len() >= MAX_INTERVALS || too_narrow {
            return Err(Error::QuadratureFailure { context, estimate: total.error, tolerance: target });
        }
        let (left, la) = gk21_abs(&mut f, lo, mid);
        let (right, ra) = gk21_abs(&mut f, mid, hi);
        intervals[worst] = (lo, mid, left, la);
        intervals.push((mid, hi, right, ra));
        // Recompute rather than update incrementally to avoid drift.
        total = Estimate {
            value: compensated_sum(intervals.iter().map(|iv| iv.2.value)),
            error: intervals.iter().map(|iv| iv.2.error).sum(),
        };
    }
}

/// `int_{d0}^{d1} F(d) d^{gamma - 1} dd` for bounded `F`, computed in the
/// variable `w = d^gamma` where the integrand is bounded.
pub fn integrate_power<F: FnMut(f64) -> f64>(
    mut f: F,
    d0: f64,
    d1: f64,
    gamma: f64,
    tol: Tolerance,
    context: &'static str,
) -> Result<Estimate> {
    debug_assert!(gamma > 0.0 && d0 >= 0.0 && d1 >= d0);
    if d1 <= d0 {
        return Ok(Estimate::default());
    }
    let inv = 1.0 / gamma;
    let w0 = d0.powf(gamma);
    let w1 = d1.powf(gamma);
    let est = integrate(
        |w: f64| {
            let d = w.powf(inv);
            if d <= 0.0 {
                return 0.0;
            }
            f(d)
        },
        w0,
        w1,
        tol.scaled_abs(gamma),
        context,
    )?;
    Ok(est.scale(inv))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    assert!(m >= 1);
    let mut out = vec![(0.0, 0.0); m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = mf * (x * pm - pm1) / (x * x - 1.0);
            let dx = pm / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if m == 1 {
            out[0] = (0.0, 2.0);
            break;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[m - 1 - i] = (x, w);
    }
    out
}

/// `int f` over `[cuts[0].0, cuts[last].0]`, where `f` may behave like
/// `|x - c|^{gamma - 1}` at each cut `(c, gamma)`; `gamma = 1` marks a plain
/// breakpoint. Cuts must be increasing. Panels are at most `width` wide.
pub fn integrate_panels(
    f: &dyn Fn(f64) -> f64,
    cuts: &[(f64, f64)],
    width: f64,
    tol: Tolerance,
    context: &'static str,
) -> Result<Estimate> {
    if cuts.len() < 2 {
        return Ok(Estimate::default());
    }
    let span = cuts[cuts.len() - 1].0 - cuts[0].0;
    let panel_tol = tol.scaled_abs(1.0 / (span / width).ceil().max(1.0));
    let from_left = |a: f64, b: f64, g: f64| integrate_power(|d| f(a + d) * d.powf(1.0 - g), 0.0, b - a, g, panel_tol, context);
    let from_right = |a: f64, b: f64, g: f64| integrate_power(|d| f(b - d) * d.powf(1.0 - g), 0.0, b - a, g, panel_tol, context);
    let mut sum = CompensatedSum::new();
    let mut err = 0.0;
    for seg in cuts.windows(2) {
        let ((a, ga), (b, gb)) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let count = ((b - a) / width).ceil().max(1.0) as usize;
        let h = (b - a) / count as f64;
        for k in 0..count {
            let p0 = a + k as f64 * h;
            let p1 = if k + 1 == count { b } else { p0 + h };
            let left = k == 0 && ga != 1.0;
            let right = k + 1 == count && gb != 1.0;
            let e = match (left, right) {
                (false, false) => integrate(f, p0, p1, panel_tol, context)?,
                (true, false) => from_left(p0, p1, ga)?,
                (false, true) => from_right(p0, p1, gb)?,
                (true, true) => {
                    let m = 0.5 * (p0 + p1);
                    from_left(p0, m, ga)? + from_right(m, p1, gb)?
                }
            };
            sum.add(e.value);
            err += e.error;
        }
    }
    Ok(Estimate::new(sum.value(), err))
}

/// Limit estimate of a slowly converging sequence of partial sums by iterated
/// pairwise averaging of its last `depth + 1` terms. Returns the estimate and
/// the change from the estimate one term earlier.
pub fn averaged_limit(partials: &[f64], depth: usize) -> Option<Estimate> {
    let len = partials.len();
    if len < depth + 2 {
        return None;
    }
    let reduce = |window: &[f64]| {
        let mut v = window.to_vec();
        while v.len() > 1 {
            for i in 0..v.len() - 1 {
                v[i] = 0.5 * (v[i] + v[i + 1]);
            }
            v.pop();
        }
        v[0]
    };
    let now = reduce(&partials[len - depth - 1..]);
    let before = reduce(&partials[len - depth - 2..len - 1]);
    Some(Estimate { value: now, error: (now - before).abs() })
}

/// Running sum of panel integrals with an oscillating, slowly decaying tail,
/// with an accelerated estimate of the limit.
pub struct PanelSum {
    partials: Vec<f64>,
    sum: CompensatedSum,
    error: f64,
}

impl Default for PanelSum {
    fn default() -> Self {
        Self::new()
    }
}

impl PanelSum {
    pub const DEPTH: usize = 12;

    pub fn new() -> Self {
        PanelSum { partials: Vec::new(), sum: CompensatedSum::new(), error: 0.0 }
    }

    pub fn push(&mut self, panel: Estimate) {
        self.sum.add(panel.value);
        self.error += panel.error;
        self.partials.push(self.sum.value());
    }

    pub fn len(&self) -> usize {
        self.partials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partials.is_empty()
    }

    /// Plain sum of all pushed panels.
    pub fn total(&self) -> Estimate {
        Estimate { value: self.sum.value(), error: self.error }
    }

    /// Accelerated limit, once enough panels are present.
    pub fn accelerated(&self) -> Option<Estimate> {
        averaged_limit(&self.partials, Self::DEPTH)
            .map(|e| Estimate { value: e.value, error: e.error + self.error })
    }
}
