//! Gaussian window, its Fourier coefficients and autocorrelation, and the
//! interpolation kernel used to build dual certificates.
//!
//! The window is `g(t) = σ^(-1/2) exp(-π t² / (2σ²))`, normalized so that
//! `‖g‖₂ = 1` on the real line. Its autocorrelation is
//! `G(t) = exp(-π t² / (4σ²))` and its Fourier transform at integer `n` is
//! `g_n = √(2σ) exp(-2π σ² n²)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::Domain;

/// Largest admissible `g_N / g_0` in strict mode.
pub const STRICT_TRUNCATION_RATIO: f64 = 1e-6;

/// Below this value of `2π f_c |t|` the sinc factor is evaluated by its Taylor series.
const SINC_TAYLOR_RADIUS: f64 = 1e-2;

/// Window width, band limit and Fourier truncation shared by every operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowParams {
    pub sigma: f64,
    pub fc: usize,
    #[serde(rename = "n")]
    pub n_trunc: usize,
}

impl WindowParams {
    pub fn new(sigma: f64, fc: usize, n_trunc: usize) -> Result<Self> {
        check_sigma(sigma)?;
        if fc == 0 {
            return Err(Error::InvalidParameter("cutoff f_c must be >= 1".into()));
        }
        Ok(Self { sigma, fc, n_trunc })
    }

    /// Like [`WindowParams::new`], but rejects truncations with `g_N/g_0 > 1e-6`.
    pub fn strict(sigma: f64, fc: usize, n_trunc: usize) -> Result<Self> {
        let params = Self::new(sigma, fc, n_trunc)?;
        let ratio = params.truncation_ratio();
        if ratio > STRICT_TRUNCATION_RATIO {
            return Err(Error::InvalidParameter(format!(
                "truncation N = {n_trunc} leaves g_N/g_0 = {ratio:.3e} > {STRICT_TRUNCATION_RATIO:e}"
            )));
        }
        Ok(params)
    }

    /// Smallest `N` that satisfies the strict truncation requirement.
    pub fn with_strict_truncation(sigma: f64, fc: usize) -> Result<Self> {
        check_sigma(sigma)?;
        // exp(-2πσ²N²) <= ratio  <=>  N >= sqrt(-ln(ratio) / (2πσ²))
        let bound = (-STRICT_TRUNCATION_RATIO.ln() / (2.0 * PI * sigma * sigma)).sqrt();
        let mut n = bound.floor().max(0.0) as usize;
        while (-2.0 * PI * sigma * sigma * (n * n) as f64).exp() > STRICT_TRUNCATION_RATIO {
            n += 1;
        }
        Self::strict(sigma, fc, n)
    }

    /// `σ = 1/(4 f_c)` with strict truncation: the exact-recovery regime.
    pub fn recovery_regime(fc: usize) -> Result<Self> {
        if fc == 0 {
            return Err(Error::InvalidParameter("cutoff f_c must be >= 1".into()));
        }
        Self::with_strict_truncation(1.0 / (4.0 * fc as f64), fc)
    }

    /// `g_N / g_0`.
    pub fn truncation_ratio(&self) -> f64 {
        let n = self.n_trunc as f64;
        (-2.0 * PI * self.sigma * self.sigma * n * n).exp()
    }

    pub fn is_strict(&self) -> bool {
        self.truncation_ratio() <= STRICT_TRUNCATION_RATIO
    }

    /// Degree `f_c + N` of the adjoint polynomial.
    pub fn degree(&self) -> usize {
        self.fc + self.n_trunc
    }

    pub fn window_coefficient(&self, n: i64) -> f64 {
        window_coefficient_unchecked(n, self.sigma)
    }

    /// `g_n` for `n = -N..=N`.
    pub fn window_coefficients(&self) -> Vec<f64> {
        let n = self.n_trunc as i64;
        (-n..=n).map(|i| self.window_coefficient(i)).collect()
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "window width sigma must be positive and finite, got {sigma}"
        )))
    }
}

/// Value and first two derivatives of a real kernel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KernelJet {
    pub value: f64,
    pub first_derivative: f64,
    pub second_derivative: f64,
}

impl KernelJet {
    fn add(self, other: Self) -> Self {
        Self {
            value: self.value + other.value,
            first_derivative: self.first_derivative + other.first_derivative,
            second_derivative: self.second_derivative + other.second_derivative,
        }
    }
}

/// `g(t) = σ^(-1/2) exp(-π t² / (2σ²))`.
pub fn window_value(t: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(window_value_unchecked(t, sigma))
}

pub(crate) fn window_value_unchecked(t: f64, sigma: f64) -> f64 {
    (-PI * t * t / (2.0 * sigma * sigma)).exp() / sigma.sqrt()
}

/// `g_n = √(2σ) exp(-2π σ² n²)`, the Fourier transform of the window at `n`.
pub fn window_fourier_coefficient(n: i64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(window_coefficient_unchecked(n, sigma))
}

pub(crate) fn window_coefficient_unchecked(n: i64, sigma: f64) -> f64 {
    let n = n as f64;
    (2.0 * sigma).sqrt() * (-2.0 * PI * sigma * sigma * n * n).exp()
}

/// Number of integer shifts on either side needed to periodize a Gaussian of
/// width `sigma` to double precision.
fn image_count(sigma: f64) -> i64 {
    (12.0 * sigma).ceil() as i64 + 1
}

/// The window periodized on the unit torus, `Σ_j g(t + j)`.
pub fn periodized_window(t: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(periodized_window_unchecked(t, sigma))
}

pub(crate) fn periodized_window_unchecked(t: f64, sigma: f64) -> f64 {
    let t = t - t.round();
    let images = image_count(sigma);
    (-images..=images)
        .map(|j| window_value_unchecked(t + j as f64, sigma))
        .sum()
}

/// `G(t) = exp(-π t² / (4σ²))` with its first two derivatives.
pub fn autocorrelation_jet(t: f64, sigma: f64) -> Result<KernelJet> {
    check_sigma(sigma)?;
    let [g0, g1, g2, _] = gaussian_derivatives(t, sigma);
    Ok(KernelJet {
        value: g0,
        first_derivative: g1,
        second_derivative: g2,
    })
}

/// The autocorrelation periodized on the unit torus.
pub fn periodized_autocorrelation(t: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(periodized_autocorrelation_unchecked(t, sigma))
}

pub(crate) fn periodized_autocorrelation_unchecked(t: f64, sigma: f64) -> f64 {
    let t = t - t.round();
    // G has twice the width of g.
    let images = image_count(2.0 * sigma);
    let a = PI / (4.0 * sigma * sigma);
    (-images..=images)
        .map(|j| {
            let s = t + j as f64;
            (-a * s * s).exp()
        })
        .sum()
}

/// `G`, `G'`, `G''`, `G'''` at `t`.
fn gaussian_derivatives(t: f64, sigma: f64) -> [f64; 4] {
    let a = PI / (4.0 * sigma * sigma);
    let g = (-a * t * t).exp();
    [
        g,
        -2.0 * a * t * g,
        (4.0 * a * a * t * t - 2.0 * a) * g,
        (-8.0 * a * a * a * t * t * t + 12.0 * a * a * t) * g,
    ]
}

/// `sinc(x) = sin(x)/x` and its first two derivatives in `x`.
fn sinc_derivatives(x: f64) -> [f64; 3] {
    if x.abs() < SINC_TAYLOR_RADIUS {
        let x2 = x * x;
        let s0 = 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)));
        let s1 = -x / 3.0 + x * x2 / 30.0 - x * x2 * x2 / 840.0 + x * x2 * x2 * x2 / 45360.0;
        let s2 = -1.0 / 3.0 + x2 / 10.0 - x2 * x2 / 168.0 + x2 * x2 * x2 / 6480.0;
        [s0, s1, s2]
    } else {
        let (sin, cos) = x.sin_cos();
        [
            sin / x,
            (x * cos - sin) / (x * x),
            ((2.0 - x * x) * sin - 2.0 * x * cos) / (x * x * x),
        ]
    }
}

/// The pair of interpolation kernels at `t` on the real line:
/// `K(t) = G(t) sinc(2π f_c t)` and `K̃(t) = G'(-t) sinc(2π f_c t)`.
pub(crate) fn kernel_pair(t: f64, sigma: f64, fc: usize) -> (KernelJet, KernelJet) {
    let omega = 2.0 * PI * fc as f64;
    let [g0, g1, g2, g3] = gaussian_derivatives(t, sigma);
    let [s0, s1, s2] = sinc_derivatives(omega * t);
    let (s1, s2) = (omega * s1, omega * omega * s2);
    let k = KernelJet {
        value: g0 * s0,
        first_derivative: g1 * s0 + g0 * s1,
        second_derivative: g2 * s0 + 2.0 * g1 * s1 + g0 * s2,
    };
    // G' is odd, so G'(-t) = -G'(t).
    let k_tilde = KernelJet {
        value: -g1 * s0,
        first_derivative: -(g2 * s0 + g1 * s1),
        second_derivative: -(g3 * s0 + 2.0 * g2 * s1 + g1 * s2),
    };
    (k, k_tilde)
}

/// Kernel pair periodized over the three nearest integer shifts.
pub(crate) fn kernel_pair_torus(t: f64, sigma: f64, fc: usize) -> (KernelJet, KernelJet) {
    let t = t - t.round();
    (-1..=1)
        .map(|j| kernel_pair(t + j as f64, sigma, fc))
        .fold((KernelJet::default(), KernelJet::default()), |acc, (k, kt)| {
            (acc.0.add(k), acc.1.add(kt))
        })
}

pub(crate) fn kernel_pair_on(domain: Domain, t: f64, sigma: f64, fc: usize) -> (KernelJet, KernelJet) {
    match domain {
        Domain::Real => kernel_pair(t, sigma, fc),
        Domain::Torus => kernel_pair_torus(t, sigma, fc),
    }
}

/// `K(t) = G(t) sinc(2π f_c t)` with its first two derivatives.
pub fn cert_kernel_jet(t: f64, params: &WindowParams) -> KernelJet {
    kernel_pair(t, params.sigma, params.fc).0
}

/// Companion kernel `K̃(t) = G'(-t) sinc(2π f_c t)` that carries the `β` terms.
pub fn cert_companion_jet(t: f64, params: &WindowParams) -> KernelJet {
    kernel_pair(t, params.sigma, params.fc).1
}

/// Wrapped distance on the unit torus.
pub fn torus_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Smallest distance between distinct points of a sorted support.
///
/// On the torus distances wrap, including the pair formed by the last and
/// the first point. Fewer than two points give `f64::INFINITY`.
pub fn min_separation(support: &[f64], domain: Domain) -> f64 {
    if support.len() < 2 {
        return f64::INFINITY;
    }
    let adjacent = support.windows(2).map(|w| match domain {
        Domain::Real => (w[1] - w[0]).abs(),
        Domain::Torus => torus_distance(w[1], w[0]),
    });
    let mut best = adjacent.fold(f64::INFINITY, f64::min);
    if domain == Domain::Torus {
        best = best.min(torus_distance(support[0], support[support.len() - 1]));
    }
    best
}
