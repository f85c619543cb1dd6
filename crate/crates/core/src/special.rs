//! Bessel functions of the first kind for the orders that appear in radial
//! Fourier analysis in dimensions one to three, plus the gamma values and
//! sphere constants that go with them.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Orders `nu` supported by [`besselj`]: the radial kernel orders `(n-2)/2`
/// and the ball-transform orders `n/2` for `n` in `{1, 2, 3}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BesselOrder {
    MinusHalf,
    Zero,
    Half,
    One,
    ThreeHalves,
}

impl BesselOrder {
    pub const ALL: [BesselOrder; 5] = [
        BesselOrder::MinusHalf,
        BesselOrder::Zero,
        BesselOrder::Half,
        BesselOrder::One,
        BesselOrder::ThreeHalves,
    ];

    pub fn from_f64(nu: f64) -> Result<Self> {
        let twice = 2.0 * nu;
        let rounded = twice.round();
        if (twice - rounded).abs() > 1e-12 {
            return Err(Error::UnsupportedOrder(nu));
        }
        match rounded as i64 {
            -1 => Ok(BesselOrder::MinusHalf),
            0 => Ok(BesselOrder::Zero),
            1 => Ok(BesselOrder::Half),
            2 => Ok(BesselOrder::One),
            3 => Ok(BesselOrder::ThreeHalves),
            _ => Err(Error::UnsupportedOrder(nu)),
        }
    }

    pub fn value(self) -> f64 {
        match self {
            BesselOrder::MinusHalf => -0.5,
            BesselOrder::Zero => 0.0,
            BesselOrder::Half => 0.5,
            BesselOrder::One => 1.0,
            BesselOrder::ThreeHalves => 1.5,
        }
    }

    /// Order `n/2` of the Fourier transform of a ball indicator in `R^n`.
    pub fn ball(n: usize) -> Result<Self> {
        check_dimension(n)?;
        Self::from_f64(n as f64 / 2.0)
    }

    /// `Gamma(nu + 1)`.
    fn gamma_shifted(self) -> f64 {
        match self {
            BesselOrder::MinusHalf => PI.sqrt(),
            BesselOrder::Zero => 1.0,
            BesselOrder::Half => 0.5 * PI.sqrt(),
            BesselOrder::One => 1.0,
            BesselOrder::ThreeHalves => 0.75 * PI.sqrt(),
        }
    }

    /// `J_nu(x)` for `x >= 0`.
    pub fn eval(self, x: f64) -> f64 {
        match self {
            BesselOrder::MinusHalf => (2.0 / (PI * x)).sqrt() * x.cos(),
            BesselOrder::Half => {
                if x == 0.0 {
                    0.0
                } else {
                    (2.0 / (PI * x)).sqrt() * x.sin()
                }
            }
            BesselOrder::ThreeHalves => {
                if x < 1.0 {
                    (0.5 * x).powf(1.5) * series_scaled(self, x)
                } else {
                    (2.0 / (PI * x)).sqrt() * (x.sin() / x - x.cos())
                }
            }
            BesselOrder::Zero => j0(x),
            BesselOrder::One => j1(x),
        }
    }

    /// `J_nu(x) / x^nu`, continuous at `x = 0`. Only meaningful for `nu >= 0`.
    pub fn eval_over_power(self, x: f64) -> f64 {
        let nu = self.value();
        if x < 2.0 {
            series_scaled(self, x) / 2f64.powf(nu)
        } else {
            self.eval(x) / x.powf(nu)
        }
    }

    /// Period average of `J_nu(x)^2`, i.e. half the squared Hankel modulus.
    /// Exact for half-integer orders, asymptotic (valid for `x >~ 10`) otherwise.
    pub fn mean_square(self, x: f64) -> f64 {
        let mu = 4.0 * self.value() * self.value();
        let y = 1.0 / (4.0 * x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            let odd = (2 * k - 1) as f64;
            term *= (odd / (2 * k) as f64) * (mu - odd * odd) * y;
            if term == 0.0 {
                break;
            }
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum / (PI * x)
    }

    /// Phase offset `(nu/2 + 1/4) pi` of the large-argument expansion.
    pub fn phase(self) -> f64 {
        (0.5 * self.value() + 0.25) * PI
    }
}

pub fn check_dimension(n: usize) -> Result<()> {
    if (1..=3).contains(&n) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n))
    }
}

/// Bessel function of the first kind `J_nu(x)` for `nu` in
/// `{-1/2, 0, 1/2, 1, 3/2}` and `x >= 0`.
pub fn besselj(nu: f64, x: f64) -> Result<f64> {
    let order = BesselOrder::from_f64(nu)?;
    if !(x >= 0.0) {
        return Err(Error::DomainError(format!("besselj argument {x} must be >= 0")));
    }
    Ok(order.eval(x))
}

/// `sum_k (-x^2/4)^k / (k! Gamma(k + nu + 1))`, so that
/// `J_nu(x) = (x/2)^nu * series_scaled(nu, x)`.
fn series_scaled(order: BesselOrder, x: f64) -> f64 {
    let nu = order.value();
    let q = -0.25 * x * x;
    let mut term = 1.0 / order.gamma_shifted();
    let mut sum = term;
    let mut comp = 0.0;
    for k in 1..300 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) && kf > 0.5 * x {
            break;
        }
    }
    sum + comp
}

fn j0(x: f64) -> f64 {
    if x < 8.0 {
        series_scaled(BesselOrder::Zero, x)
    } else if x < 25.0 {
        miller_j01(x).0
    } else {
        hankel_asymptotic(0.0, x)
    }
}

fn j1(x: f64) -> f64 {
    if x < 8.0 {
        0.5 * x * series_scaled(BesselOrder::One, x)
    } else if x < 25.0 {
        miller_j01(x).1
    } else {
        hankel_asymptotic(1.0, x)
    }
}

/// Backward recurrence for `(J_0(x), J_1(x))`, normalised with
/// `J_0 + 2 sum_k J_2k = 1`.
fn miller_j01(x: f64) -> (f64, f64) {
    let start = 2 * ((x + 30.0 + 3.0 * x.sqrt()) as usize / 2) + 2;
    let mut next = 0.0;
    let mut cur = 1e-30;
    let mut norm = 0.0;
    let mut j1 = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // `cur` now holds the value for index k - 1.
        if k == 2 {
            j1 = cur;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
    }
    if start == 1 {
        j1 = next;
    }
    norm += cur;
    (cur / norm, j1 / norm)
}

/// Large-argument expansion `sqrt(2/(pi x)) (P cos chi - Q sin chi)`.
fn hankel_asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0f64;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() > term.abs() && k > 2 {
            break;
        }
        term = next;
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-18 {
            break;
        }
    }
    let chi = x - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// `Gamma(m / 2)` for positive integers `m`.
pub fn gamma_half(m: u32) -> f64 {
    assert!(m > 0, "gamma_half needs m > 0");
    if m % 2 == 0 {
        (1..m / 2).map(f64::from).product()
    } else {
        // Gamma(1/2) = sqrt(pi), Gamma(x + 1) = x Gamma(x)
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < m as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Surface area `2 pi^{n/2} / Gamma(n/2)` of the unit sphere in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n as u32)
}

/// Volume `pi^{n/2} / Gamma(n/2 + 1)` of the unit ball in `R^n`.
pub fn ball_volume(n: usize) -> f64 {
    PI.powf(n as f64 / 2.0) / gamma_half(n as u32 + 2)
}

/// Radial kernel of the isotropic Fourier transform in `R^n`,
/// `2^{(n-2)/2} Gamma(n/2) J_{(n-2)/2}(x) / x^{(n-2)/2}`, normalised to 1 at 0:
/// `cos x`, `J_0(x)` and `sin x / x` for `n = 1, 2, 3`.
#[inline]
pub fn radial_kernel(n: usize, x: f64) -> f64 {
    match n {
        1 => x.cos(),
        2 => j0(x),
        3 => {
            if x.abs() < 1e-4 {
                let x2 = x * x;
                1.0 - x2 / 6.0 + x2 * x2 / 120.0
            } else {
                x.sin() / x
            }
        }
        _ => panic!("radial kernel requested for unsupported dimension {n}"),
    }
}

/// Positive zeros of [`radial_kernel`] in increasing order, starting at the
/// `first`-th zero (1-based).
pub fn radial_kernel_zero(n: usize, k: usize) -> f64 {
    debug_assert!(k >= 1);
    let kf = k as f64;
    match n {
        1 => (kf - 0.5) * PI,
        3 => kf * PI,
        2 => {
            let beta = (kf - 0.25) * PI;
            let b2 = beta * beta;
            let mut z = beta + 1.0 / (8.0 * beta) - 31.0 / (384.0 * beta * b2)
                + 3779.0 / (15360.0 * beta * b2 * b2);
            for _ in 0..3 {
                z += j0(z) / j1(z);
            }
            z
        }
        _ => panic!("radial kernel requested for unsupported dimension {n}"),
    }
}
