//! Explicit interpolating dual certificates
//!
//! ```text
//! q(t) = Σ_ℓ α_ℓ K(t - t_ℓ) + β_ℓ K̃(t - t_ℓ),
//! K(t) = G(t) sinc(2π f_c t),   K̃(t) = G'(-t) sinc(2π f_c t),
//! ```
//!
//! with `α, β` chosen so that `q(t_ℓ) = ε_ℓ` and `q'(t_ℓ) = 0`. When
//! `|q| < 1` away from the support, `q` certifies that the measure with
//! support `{t_ℓ}` and phases `ε_ℓ` is the unique TV minimizer.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{kernel_pair_on, min_separation, torus_distance, WindowParams};
use crate::measure::Domain;
use crate::trigpoly::TrigPoly;

/// Largest condition number accepted for the interpolation system.
pub const MAX_CONDITION: f64 = 1e12;

/// Construction settings for [`build_certificate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildOptions {
    /// `Real` works on the line; `Torus` periodizes the kernels.
    pub domain: Domain,
    /// Pairs further apart than this do not interact. `None` keeps all pairs.
    pub interaction_radius: Option<f64>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            domain: Domain::Real,
            interaction_radius: None,
        }
    }
}

/// Interaction radius `10σ·max(1, 1/(Δ f_c))` suggested for large supports.
pub fn suggested_interaction_radius(params: &WindowParams, delta: f64) -> f64 {
    10.0 * params.sigma * (1.0f64).max(1.0 / (delta * params.fc as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub params: WindowParams,
    pub domain: Domain,
    pub support: Vec<f64>,
    pub signs: Vec<Complex64>,
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
    /// 2-norm condition number of the equilibrated interpolation system.
    pub condition_number: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub max_interpolation_residual: f64,
    pub max_derivative_residual: f64,
    /// Certified upper bound on `|q|` outside the node neighbourhoods.
    pub sup_off_support: f64,
    /// Largest `|q|` actually sampled outside the neighbourhoods.
    pub grid_sup_off_support: f64,
    /// Largest `|q|` sampled inside the neighbourhoods.
    pub sup_near_support: f64,
    /// `1 - sup_off_support`.
    pub margin: f64,
    pub grid_spacing: f64,
    pub exclusion_radius: f64,
    pub passed: bool,
}

/// Settings for [`verify_certificate`]. Unset spacing and radius fall back to
/// `1/(64 f_c)` and a quarter of the minimum separation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyOptions {
    pub grid_spacing: Option<f64>,
    pub exclusion_radius: Option<f64>,
    pub tol_interp: f64,
    pub margin_required: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            grid_spacing: None,
            exclusion_radius: None,
            tol_interp: 1e-8,
            margin_required: 1e-9,
        }
    }
}

fn check_inputs(support: &[f64], signs: &[Complex64], domain: Domain) -> Result<()> {
    if support.is_empty() {
        return Err(Error::InvalidParameter(
            "certificate needs at least one support point".into(),
        ));
    }
    if support.len() != signs.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} support points but {} signs",
            support.len(),
            signs.len()
        )));
    }
    if support.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("support points must be finite".into()));
    }
    if support.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("support must be strictly increasing".into()));
    }
    if domain == Domain::Torus && support.iter().any(|t| !(0.0..1.0).contains(t)) {
        return Err(Error::InvalidParameter(
            "torus support points must lie in [0, 1)".into(),
        ));
    }
    if !(min_separation(support, domain) > 0.0) {
        return Err(Error::InvalidParameter("support points must be separated".into()));
    }
    for (i, e) in signs.iter().enumerate() {
        if !((e.norm() - 1.0).abs() <= 1e-12) {
            return Err(Error::InvalidParameter(format!("sign {i} does not have unit modulus")));
        }
    }
    Ok(())
}

fn offset(domain: Domain, t: f64, s: f64) -> f64 {
    match domain {
        Domain::Real => t - s,
        Domain::Torus => {
            let d = t - s;
            d - d.round()
        }
    }
}

/// Solves for `α, β` so that the certificate interpolates `signs` with
/// vanishing derivative at every support point.
pub fn build_certificate(
    support: &[f64],
    signs: &[Complex64],
    params: &WindowParams,
    options: &BuildOptions,
) -> Result<Certificate> {
    check_inputs(support, signs, options.domain)?;
    let s = support.len();
    let (sigma, fc) = (params.sigma, params.fc);

    // Equilibration: derivative rows are divided by κ = sqrt(|K''(0)|) and
    // β is replaced by b = β·K̃'(0)/κ, so the diagonal blocks become identity.
    let (k0, kt0) = kernel_pair_on(options.domain, 0.0, sigma, fc);
    let kappa = k0.second_derivative.abs().sqrt();
    let beta_scale = kappa / kt0.first_derivative;

    let mut a = DMatrix::<f64>::zeros(2 * s, 2 * s);
    for j in 0..s {
        for l in 0..s {
            let d = offset(options.domain, support[j], support[l]);
            if let Some(r) = options.interaction_radius {
                if j != l && d.abs() > r {
                    continue;
                }
            }
            let (k, kt) = kernel_pair_on(options.domain, d, sigma, fc);
            a[(j, l)] = k.value;
            a[(j, s + l)] = kt.value * beta_scale;
            a[(s + j, l)] = k.first_derivative / kappa;
            a[(s + j, s + l)] = kt.first_derivative * beta_scale / kappa;
        }
    }

    let singular = a.clone().svd(false, false).singular_values;
    let smin = singular.min();
    let condition = if smin > 0.0 {
        singular.max() / smin
    } else {
        f64::INFINITY
    };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let lu = a.lu();
    let solve = |rhs: DVector<f64>| lu.solve(&rhs).ok_or(Error::IllConditioned { condition });
    let mut rhs_re = DVector::zeros(2 * s);
    let mut rhs_im = DVector::zeros(2 * s);
    for (j, e) in signs.iter().enumerate() {
        rhs_re[j] = e.re;
        rhs_im[j] = e.im;
    }
    let x_re = solve(rhs_re)?;
    let x_im = solve(rhs_im)?;
    let alpha = (0..s).map(|l| Complex64::new(x_re[l], x_im[l])).collect();
    let beta = (0..s)
        .map(|l| Complex64::new(x_re[s + l], x_im[s + l]) * beta_scale)
        .collect();
    Ok(Certificate {
        params: *params,
        domain: options.domain,
        support: support.to_vec(),
        signs: signs.to_vec(),
        alpha,
        beta,
        condition_number: condition,
    })
}

/// `q(t)`.
pub fn certificate_value(cert: &Certificate, t: f64) -> Complex64 {
    cert.jet(t).0
}

/// `q'(t)`.
pub fn certificate_derivative(cert: &Certificate, t: f64) -> Complex64 {
    cert.jet(t).1
}

impl Certificate {
    /// `(q, q', q'')` at `t`.
    pub fn jet(&self, t: f64) -> (Complex64, Complex64, Complex64) {
        let mut out = (Complex64::default(), Complex64::default(), Complex64::default());
        for ((&s, &a), &b) in self.support.iter().zip(&self.alpha).zip(&self.beta) {
            let d = offset(self.domain, t, s);
            let (k, kt) = kernel_pair_on(self.domain, d, self.params.sigma, self.params.fc);
            out.0 += a * k.value + b * kt.value;
            out.1 += a * k.first_derivative + b * kt.first_derivative;
            out.2 += a * k.second_derivative + b * kt.second_derivative;
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Trigonometric polynomial whose coefficients are the Fourier
    /// coefficients of a torus certificate, truncated where they fall below
    /// roughly `1e-16` of the leading ones.
    pub fn to_trig_poly(&self) -> Result<TrigPoly> {
        if self.domain != Domain::Torus {
            return Err(Error::DomainMismatch {
                expected: "torus",
                found: self.domain.name(),
            });
        }
        // The spectrum of G sinc(2π f_c ·) decays like exp(-4πσ²(|m| - f_c)²).
        let tail = (37.0 * std::f64::consts::LN_10 / (4.0 * PI * self.params.sigma.powi(2))).sqrt();
        let degree = self.params.fc + tail.ceil() as usize;
        let len = crate::solver::next_smooth(4 * (2 * degree + 1));
        let mut buf: Vec<Complex64> = (0..len)
            .map(|j| certificate_value(self, j as f64 / len as f64))
            .collect();
        FftPlanner::new().plan_fft_forward(len).process(&mut buf);
        let coeffs = (-(degree as i64)..=degree as i64)
            .map(|m| buf[m.rem_euclid(len as i64) as usize] / len as f64)
            .collect();
        TrigPoly::new(coeffs)
    }

    fn separation(&self) -> f64 {
        min_separation(&self.support, self.domain)
    }

    fn distance(&self, t: f64, s: f64) -> f64 {
        match self.domain {
            Domain::Real => (t - s).abs(),
            Domain::Torus => torus_distance(t, s),
        }
    }

    /// Upper bound on `|q'|` over any point at distance at least `d_l` from each node.
    fn derivative_bound(&self, dists: impl Iterator<Item = f64>) -> f64 {
        let a = PI / (4.0 * self.params.sigma.powi(2));
        let omega = 2.0 * PI * self.params.fc as f64;
        // max |sinc'| on the real line
        let sinc1 = 0.44;
        let xstar = (1.0 / (2.0 * a)).sqrt();
        let g = |x: f64| (-a * x * x).exp();
        let mut total = 0.0;
        for ((d, al), be) in dists.zip(&self.alpha).zip(&self.beta) {
            let x = d.max(xstar);
            // |K'| ≤ |G'| + ω|sinc'| G,  |K̃'| ≤ |G''| + ω|sinc'||G'|
            let g1 = 2.0 * a * x * g(x);
            let g2 = (4.0 * a * a * x * x + 2.0 * a) * g(x);
            total += al.norm() * (g1 + omega * sinc1 * g(d)) + be.norm() * (g2 + omega * sinc1 * g1);
        }
        // Periodic images further away contribute below double precision.
        total * (1.0 + 1e-12) + 1e-300
    }

    fn interval_bound(&self, lo: f64, hi: f64, q_lo: f64, q_hi: f64) -> f64 {
        let dists = self.support.iter().map(|&s| {
            let (a, b) = (self.distance(lo, s), self.distance(hi, s));
            let inside = match self.domain {
                Domain::Real => lo <= s && s <= hi,
                Domain::Torus => {
                    let rel = (s - lo).rem_euclid(1.0);
                    rel <= hi - lo
                }
            };
            if inside {
                0.0
            } else {
                a.min(b)
            }
        });
        q_lo.max(q_hi) + 0.5 * (hi - lo) * self.derivative_bound(dists)
    }
}

/// Bounds `|q|` on `[lo, hi]`, bisecting while the bound exceeds `target`.
fn bound_on(cert: &Certificate, lo: f64, hi: f64, q_lo: f64, q_hi: f64, target: f64, depth: usize) -> f64 {
    let bound = cert.interval_bound(lo, hi, q_lo, q_hi);
    if bound <= target || depth == 0 {
        return bound;
    }
    let mid = 0.5 * (lo + hi);
    let q_mid = certificate_value(cert, mid).norm();
    bound_on(cert, lo, mid, q_lo, q_mid, target, depth - 1).max(bound_on(cert, mid, hi, q_mid, q_hi, target, depth - 1))
}

/// Checks interpolation, vanishing derivatives, `|q| < 1` away from the
/// support (certified by a Lipschitz bound between grid points) and
/// `|q|² ≤ 1` at sampled points near the support.
pub fn verify_certificate(cert: &Certificate, options: &VerifyOptions) -> VerificationReport {
    let fc = cert.params.fc as f64;
    let h = options.grid_spacing.unwrap_or(1.0 / (64.0 * fc));
    let sep = cert.separation();
    let radius = options
        .exclusion_radius
        .unwrap_or(if sep.is_finite() { sep / 4.0 } else { 1.0 / (4.0 * fc) });

    let mut interp: f64 = 0.0;
    let mut deriv: f64 = 0.0;
    for (&t, &e) in cert.support.iter().zip(&cert.signs) {
        let (v, d, _) = cert.jet(t);
        interp = interp.max((v - e).norm());
        deriv = deriv.max(d.norm());
    }

    // Off-support segments between consecutive neighbourhoods.
    let s = cert.support.len();
    let mut segments: Vec<(f64, f64)> = Vec::new();
    let mut tail_bound: f64 = 0.0;
    match cert.domain {
        Domain::Torus => {
            for l in 0..s {
                let lo = cert.support[l] + radius;
                let next = if l + 1 < s {
                    cert.support[l + 1]
                } else {
                    cert.support[0] + 1.0
                };
                let hi = next - radius;
                if hi > lo {
                    segments.push((lo, hi));
                }
            }
        }
        Domain::Real => {
            let pad = 12.0 * cert.params.sigma + radius;
            segments.push((cert.support[0] - pad, cert.support[0] - radius));
            for w in cert.support.windows(2) {
                if w[1] - radius > w[0] + radius {
                    segments.push((w[0] + radius, w[1] - radius));
                }
            }
            segments.push((cert.support[s - 1] + radius, cert.support[s - 1] + pad));
            // Beyond the padding every kernel term is Gaussian-small.
            let a = PI / (4.0 * cert.params.sigma.powi(2));
            let g = (-a * pad * pad).exp();
            tail_bound = cert
                .alpha
                .iter()
                .zip(&cert.beta)
                .map(|(al, be)| al.norm() * g + be.norm() * 2.0 * a * pad * g)
                .sum();
        }
    }

    let target = 1.0 - options.margin_required;
    let mut grid_sup: f64 = 0.0;
    let mut sup: f64 = tail_bound;
    for &(lo, hi) in &segments {
        let pieces = ((hi - lo) / h).ceil().max(1.0) as usize;
        let step = (hi - lo) / pieces as f64;
        let mut prev = certificate_value(cert, lo).norm();
        grid_sup = grid_sup.max(prev);
        for i in 1..=pieces {
            let a = lo + (i - 1) as f64 * step;
            let b = if i == pieces { hi } else { lo + i as f64 * step };
            let cur = certificate_value(cert, b).norm();
            grid_sup = grid_sup.max(cur);
            sup = sup.max(bound_on(cert, a, b, prev, cur, target, 16));
            prev = cur;
        }
    }

    // Inside each neighbourhood: sampled |q|² ≤ 1.
    let samples = 64;
    let mut near: f64 = 0.0;
    for &t in &cert.support {
        for i in 0..=samples {
            let x = t - radius + 2.0 * radius * i as f64 / samples as f64;
            near = near.max(certificate_value(cert, x).norm_sqr());
        }
    }
    let near = near.sqrt();

    let passed = interp <= options.tol_interp && sup <= target && near <= 1.0 + options.tol_interp;
    VerificationReport {
        max_interpolation_residual: interp,
        max_derivative_residual: deriv,
        sup_off_support: sup,
        grid_sup_off_support: grid_sup,
        sup_near_support: near,
        margin: 1.0 - sup,
        grid_spacing: h,
        exclusion_radius: radius,
        passed,
    }
}
