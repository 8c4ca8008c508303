use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A trigonometric polynomial `t ↦ Σ_{|m| ≤ M} x_m e^{2πimt}` on the unit torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    degree: usize,
    coeffs: Vec<Complex64>,
}

/// `p`, `p'` and `p''` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyJet {
    pub value: Complex64,
    pub first: Complex64,
    pub second: Complex64,
}

impl PolyJet {
    /// `q = |p|²` and its first two derivatives.
    pub fn modulus_squared(&self) -> (f64, f64, f64) {
        let q = self.value.norm_sqr();
        let dq = 2.0 * (self.value.conj() * self.first).re;
        let d2q = 2.0 * (self.first.norm_sqr() + (self.value.conj() * self.second).re);
        (q, dq, d2q)
    }
}

impl TrigPoly {
    /// Coefficients ordered `x_{-M}, ..., x_M`.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() % 2 == 0 {
            return Err(Error::ShapeMismatch(format!(
                "trigonometric polynomial needs an odd number of coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(Self {
            degree: coeffs.len() / 2,
            coeffs,
        })
    }

    pub fn zeros(degree: usize) -> Self {
        Self {
            degree,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * degree + 1],
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// `x_m`, zero outside `|m| ≤ M`.
    pub fn coeff(&self, m: i64) -> Complex64 {
        let idx = m + self.degree as i64;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[idx as usize]
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm_sqr() == 0.0)
    }

    pub fn scale(&mut self, factor: f64) {
        for c in &mut self.coeffs {
            *c *= factor;
        }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let step = Complex64::from_polar(1.0, 2.0 * PI * t);
        let mut phase = Complex64::from_polar(1.0, -2.0 * PI * self.degree as f64 * t);
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in &self.coeffs {
            acc += c * phase;
            phase *= step;
        }
        acc
    }

    pub fn eval_jet(&self, t: f64) -> PolyJet {
        let step = Complex64::from_polar(1.0, 2.0 * PI * t);
        let mut phase = Complex64::from_polar(1.0, -2.0 * PI * self.degree as f64 * t);
        let mut value = Complex64::new(0.0, 0.0);
        let mut first = Complex64::new(0.0, 0.0);
        let mut second = Complex64::new(0.0, 0.0);
        for (i, &c) in self.coeffs.iter().enumerate() {
            let w = 2.0 * PI * (i as f64 - self.degree as f64);
            let term = c * phase;
            value += term;
            first += term * Complex64::new(0.0, w);
            second -= term * (w * w);
            phase *= step;
        }
        PolyJet { value, first, second }
    }

    /// Values at `t_j = j/len`, `j = 0..len`, by one inverse FFT.
    pub fn grid_values(&self, len: usize) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (i, &c) in self.coeffs.iter().enumerate() {
            let m = i as i64 - self.degree as i64;
            buf[m.rem_euclid(len as i64) as usize] += c;
        }
        FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
        buf
    }

    /// Local maxima of `|p|²` located on a uniform grid with at least
    /// `points_per_degree` samples per unit degree and refined by Newton's
    /// method on `(|p|²)' = 0`. Each entry is `(t, |p(t)|, confident)`.
    pub fn local_maxima(&self, points_per_degree: usize, max_newton: usize) -> Vec<(f64, f64, bool)> {
        let len = (points_per_degree * self.degree.max(1)).max(16);
        let q: Vec<f64> = self.grid_values(len).iter().map(|v| v.norm_sqr()).collect();
        let h = 1.0 / len as f64;
        let mut out = Vec::new();
        for j in 0..len {
            let prev = q[(j + len - 1) % len];
            let next = q[(j + 1) % len];
            // Ties are broken towards the left neighbour so plateaus yield one candidate.
            if q[j] > prev && q[j] >= next {
                let t0 = j as f64 * h;
                let (t, confident) = self.newton_peak(t0, h, max_newton);
                let value = self.eval(t).norm();
                if confident && value >= q[j].sqrt() {
                    out.push((t, value, true));
                } else {
                    out.push((t0, q[j].sqrt(), false));
                }
            }
        }
        out
    }

    /// Newton iteration for a critical point of `|p|²` within `radius` of `t0`.
    pub(crate) fn newton_peak(&self, t0: f64, radius: f64, max_steps: usize) -> (f64, bool) {
        let mut t = t0;
        for _ in 0..max_steps {
            let (_, dq, d2q) = self.eval_jet(t).modulus_squared();
            if d2q >= 0.0 || !d2q.is_finite() {
                return (t0, false);
            }
            let step = dq / d2q;
            t -= step;
            if (t - t0).abs() > radius {
                return (t0, false);
            }
            if step.abs() <= 1e-15 * (1.0 + t.abs()) {
                return (t.rem_euclid(1.0), true);
            }
        }
        // Converged to rounding noise without meeting the step criterion.
        let (_, dq, d2q) = self.eval_jet(t).modulus_squared();
        let ok = (dq / d2q).abs() < 1e-12;
        (if ok { t.rem_euclid(1.0) } else { t0 }, ok)
    }

    /// Estimate of `sup_t |p(t)|` from a grid with `points_per_degree`
    /// samples per unit degree plus Newton refinement of every local maximum.
    pub fn sup_norm(&self, points_per_degree: usize) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let len = (points_per_degree * self.degree.max(1)).max(16);
        let grid_max = self.grid_values(len).iter().map(|v| v.norm()).fold(0.0, f64::max);
        self.local_maxima(points_per_degree, 50)
            .into_iter()
            .map(|(_, v, _)| v)
            .fold(grid_max, f64::max)
    }
}
