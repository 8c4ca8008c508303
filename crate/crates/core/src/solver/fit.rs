use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernels::torus_distance;
use crate::measure::wrap_unit;
use crate::stft::MomentVector;
use crate::trigpoly::TrigPoly;

/// Singular values below this fraction of the largest count as zero.
const RANK_TOLERANCE: f64 = 1e-10;

/// Least-squares amplitudes for a fixed support.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeFit {
    pub amplitudes: Vec<Complex64>,
    /// `‖V a - u‖₂ / ‖u‖₂`, or the absolute residual when `u = 0`.
    pub residual: f64,
}

/// Column `ℓ` holds `e^{-2πimt_ℓ}` for `m = -M..=M`.
fn vandermonde(cutoff: usize, support: &[f64]) -> DMatrix<Complex64> {
    let width = 2 * cutoff + 1;
    let mut v = DMatrix::zeros(width, support.len());
    for (l, &t) in support.iter().enumerate() {
        let step = Complex64::from_polar(1.0, -2.0 * PI * t);
        let mut phase = Complex64::from_polar(1.0, 2.0 * PI * cutoff as f64 * t);
        for i in 0..width {
            v[(i, l)] = phase;
            phase *= step;
        }
    }
    v
}

/// Solves `min_a ‖Σ_ℓ a_ℓ e^{-2πimt_ℓ} - u_m‖₂` over `|m| ≤ M`.
pub fn fit_amplitudes(u: &MomentVector, support: &[f64]) -> Result<AmplitudeFit> {
    let width = 2 * u.cutoff() + 1;
    if support.is_empty() {
        let norm = DVector::from_column_slice(u.moments()).norm();
        return Ok(AmplitudeFit {
            amplitudes: Vec::new(),
            residual: if norm > 0.0 { 1.0 } else { 0.0 },
        });
    }
    if support.len() > width {
        return Err(Error::DegenerateSupport(format!(
            "{} support points but only {width} moments",
            support.len()
        )));
    }
    let v = vandermonde(u.cutoff(), support);
    let rhs = DVector::from_column_slice(u.moments());
    let svd = v.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > RANK_TOLERANCE * smax) {
        return Err(Error::DegenerateSupport(format!(
            "moment matrix is rank deficient (singular value ratio {:.3e})",
            smin / smax
        )));
    }
    let a = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::DegenerateSupport(e.to_string()))?;
    let resid = (&v * &a - &rhs).norm();
    let norm = rhs.norm();
    Ok(AmplitudeFit {
        amplitudes: a.iter().copied().collect(),
        residual: if norm > 0.0 { resid / norm } else { resid },
    })
}

fn model_residual(u: &MomentVector, support: &[f64], amps: &[Complex64]) -> Vec<Complex64> {
    let cutoff = u.cutoff();
    let mut r: Vec<Complex64> = u.moments().iter().map(|z| -z).collect();
    for (&t, &a) in support.iter().zip(amps) {
        let step = Complex64::from_polar(1.0, -2.0 * PI * t);
        let mut phase = Complex64::from_polar(1.0, 2.0 * PI * cutoff as f64 * t) * a;
        for ri in r.iter_mut() {
            *ri += phase;
            phase *= step;
        }
    }
    r
}

fn cost(r: &[Complex64]) -> f64 {
    r.iter().map(|z| z.norm_sqr()).sum()
}

/// Levenberg–Marquardt on the moment equations in both locations and
/// amplitudes, started from `(support, amps)`.
///
/// Returns `None` when the iteration does not reduce the residual or moves a
/// point further than `max_shift` (wrapped).
pub(crate) fn refine_atoms(
    u: &MomentVector,
    support: &[f64],
    amps: &[Complex64],
    max_shift: f64,
) -> Option<(Vec<f64>, Vec<Complex64>)> {
    let s = support.len();
    if s == 0 {
        return None;
    }
    let cutoff = u.cutoff() as i64;
    let width = u.moments().len();
    let mut t = support.to_vec();
    let mut a = amps.to_vec();
    let mut r = model_residual(u, &t, &a);
    let start_cost = cost(&r);
    let mut current = start_cost;
    let mut lambda = 1e-3;

    for _ in 0..100 {
        // Real Jacobian: rows (Re r, Im r), columns (t, Re a, Im a).
        let mut jac = DMatrix::<f64>::zeros(2 * width, 3 * s);
        for l in 0..s {
            let step = Complex64::from_polar(1.0, -2.0 * PI * t[l]);
            let mut phase = Complex64::from_polar(1.0, 2.0 * PI * cutoff as f64 * t[l]);
            for i in 0..width {
                let m = i as i64 - cutoff;
                let dt = a[l] * phase * Complex64::new(0.0, -2.0 * PI * m as f64);
                let di = Complex64::new(0.0, 1.0) * phase;
                jac[(i, l)] = dt.re;
                jac[(width + i, l)] = dt.im;
                jac[(i, s + l)] = phase.re;
                jac[(width + i, s + l)] = phase.im;
                jac[(i, 2 * s + l)] = di.re;
                jac[(width + i, 2 * s + l)] = di.im;
                phase *= step;
            }
        }
        let rv = DVector::from_iterator(2 * width, r.iter().map(|z| z.re).chain(r.iter().map(|z| z.im)));
        let grad = jac.transpose() * &rv;
        let hess = jac.transpose() * &jac;
        let diag: Vec<f64> = (0..3 * s).map(|i| hess[(i, i)].max(1e-300)).collect();

        let mut accepted = false;
        while lambda < 1e16 {
            let mut lhs = hess.clone();
            for (i, d) in diag.iter().enumerate() {
                lhs[(i, i)] += lambda * d;
            }
            let Some(chol) = lhs.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&grad));
            let t_new: Vec<f64> = (0..s).map(|l| t[l] + delta[l]).collect();
            let a_new: Vec<Complex64> = (0..s)
                .map(|l| a[l] + Complex64::new(delta[s + l], delta[2 * s + l]))
                .collect();
            let r_new = model_residual(u, &t_new, &a_new);
            let c_new = cost(&r_new);
            if c_new < current {
                let step_t = (0..s).map(|l| delta[l].abs()).fold(0.0, f64::max);
                let decrease = current - c_new;
                t = t_new;
                a = a_new;
                r = r_new;
                current = c_new;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if step_t < 1e-15 || decrease <= 1e-24 * start_cost {
                    lambda = f64::INFINITY;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted || !lambda.is_finite() {
            break;
        }
    }

    if !(current < start_cost) {
        return None;
    }
    if support
        .iter()
        .zip(&t)
        .any(|(&t0, &t1)| torus_distance(t0, wrap_unit(t1)) > max_shift)
    {
        return None;
    }
    Some((t.into_iter().map(wrap_unit).collect(), a))
}

/// Smallest-norm correction of `p` such that `p(t_ℓ) = signs_ℓ` and
/// `p'(t_ℓ) = 0` at every point.
pub(crate) fn interpolate_signs(p: &TrigPoly, support: &[f64], signs: &[Complex64]) -> Option<TrigPoly> {
    let s = support.len();
    let degree = p.degree();
    let width = 2 * degree + 1;
    let scale = 1.0 / degree.max(1) as f64;
    let mut b = DMatrix::<Complex64>::zeros(2 * s, width);
    for (l, &t) in support.iter().enumerate() {
        let step = Complex64::from_polar(1.0, 2.0 * PI * t);
        let mut phase = Complex64::from_polar(1.0, -2.0 * PI * degree as f64 * t);
        for i in 0..width {
            let m = i as f64 - degree as f64;
            b[(l, i)] = phase;
            b[(s + l, i)] = phase * Complex64::new(0.0, m * scale);
            phase *= step;
        }
    }
    let x0 = DVector::from_column_slice(p.coeffs());
    let mut target = DVector::<Complex64>::zeros(2 * s);
    for (l, &e) in signs.iter().enumerate() {
        target[l] = e;
    }
    let rhs = target - &b * &x0;
    let gram = &b * b.adjoint();
    let z = gram.lu().solve(&rhs)?;
    let x = x0 + b.adjoint() * z;
    if x.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return None;
    }
    TrigPoly::new(x.iter().copied().collect()).ok()
}
