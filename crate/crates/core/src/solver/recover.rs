use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::fit::{fit_amplitudes, interpolate_signs, refine_atoms};
use super::support::extract_support;
use super::{solve_dual, SolverOptions};
use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, Domain};
use crate::stft::{reduce_measurements, MomentVector, StftMeasurements};
use crate::trigpoly::TrigPoly;

/// Atoms below this fraction of the largest modulus are dropped.
const PRUNE_RATIO: f64 = 1e-6;

/// A duality gap above this fraction of the primal value marks the result unreliable.
const GAP_FLAG_RATIO: f64 = 1e-3;

/// Relative moment residual above which the fit is augmented with new atoms.
const AUGMENT_RESIDUAL: f64 = 1e-8;
const AUGMENT_ROUNDS: usize = 3;
/// An augmented estimate is kept only if a re-interpolated dual certifies it to this relative gap.
const AUGMENT_GAP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryDiagnostics {
    pub iterations: usize,
    /// Largest `|p| - 1` measured before the dual polynomial was rescaled.
    pub constraint_violation: f64,
    pub kkt_residual: f64,
    pub exchange_points: usize,
    /// Relative least-squares residual of the fitted moments.
    pub fit_residual: f64,
    /// Locations and amplitudes were refined on the moment equations.
    pub refined: bool,
    /// The dual polynomial was re-interpolated on the recovered support.
    pub polished: bool,
    /// Atoms missed by the dual were added from the fit residual.
    pub augmented: bool,
    pub low_confidence: bool,
}

/// Estimate and diagnostics returned by [`recover`] and [`recover_fourier`].
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub measure: DiscreteMeasure,
    pub dual_poly: TrigPoly,
    pub dual_objective: f64,
    pub primal_tv: f64,
    /// `primal_tv - dual_objective`.
    pub duality_gap: f64,
    /// `|p(t̂_ℓ)| - 1` per recovered atom.
    pub support_residuals: Vec<f64>,
    /// `max_ℓ |p(t̂_ℓ) - â_ℓ/|â_ℓ||`.
    pub sign_residual: f64,
    /// The gap exceeds `1e-3` of the primal value.
    pub unreliable: bool,
    pub diagnostics: RecoveryDiagnostics,
}

#[derive(Serialize)]
struct AtomJson {
    t: f64,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct ResultJson<'a> {
    atoms: Vec<AtomJson>,
    dual_objective: f64,
    primal_tv: f64,
    duality_gap: f64,
    support_residuals: &'a [f64],
    sign_residual: f64,
    unreliable: bool,
    diagnostics: &'a RecoveryDiagnostics,
}

impl RecoveryResult {
    pub fn to_json(&self) -> Result<String> {
        let doc = ResultJson {
            atoms: self
                .measure
                .atoms()
                .map(|(t, a)| AtomJson { t, re: a.re, im: a.im })
                .collect(),
            dual_objective: self.dual_objective,
            primal_tv: self.primal_tv,
            duality_gap: self.duality_gap,
            support_residuals: &self.support_residuals,
            sign_residual: self.sign_residual,
            unreliable: self.unreliable,
            diagnostics: &self.diagnostics,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Recovers a measure from STFT measurements.
///
/// The data are first reduced to Fourier moments up to `|m| ≤ f_c + N`;
/// inconsistent data are rejected.
pub fn recover(y: &StftMeasurements, options: &SolverOptions) -> Result<RecoveryResult> {
    let reduction = reduce_measurements(y)?;
    recover_moments(&reduction.moments, options)
}

/// Recovers a measure from plain Fourier moments.
pub fn recover_fourier(u: &MomentVector, options: &SolverOptions) -> Result<RecoveryResult> {
    recover_moments(u, options)
}

fn dual_value(p: &TrigPoly, u: &MomentVector) -> f64 {
    p.coeffs().iter().zip(u.moments()).map(|(x, m)| (x * m.conj()).re).sum()
}

/// Re-interpolates `p` on the support of `measure` with its signs, rescaled to be feasible.
fn polish(p: &TrigPoly, measure: &DiscreteMeasure, u: &MomentVector, sup_density: usize) -> Option<(TrigPoly, f64)> {
    if measure.is_empty() {
        return None;
    }
    let signs: Vec<Complex64> = measure.amplitudes().iter().map(|a| a / a.norm()).collect();
    let mut candidate = interpolate_signs(p, measure.support(), &signs)?;
    let sup = candidate.sup_norm(sup_density);
    if !(sup.is_finite() && sup > 0.0) {
        return None;
    }
    if sup > 1.0 {
        candidate.scale(1.0 / sup);
    }
    let value = dual_value(&candidate, u);
    Some((candidate, value))
}

fn moment_residual(u: &MomentVector, support: &[f64], amplitudes: &[Complex64]) -> Vec<Complex64> {
    let cutoff = u.cutoff() as i64;
    u.moments()
        .iter()
        .zip(-cutoff..=cutoff)
        .map(|(&z, m)| {
            let model: Complex64 = support
                .iter()
                .zip(amplitudes)
                .map(|(&t, &a)| a * Complex64::from_polar(1.0, -2.0 * PI * m as f64 * t))
                .sum();
            z - model
        })
        .collect()
}

/// Atoms too small for the regularized dual to resolve leave a residual
/// peaked at their location. Adds the peak, refits, and repeats; the result
/// is returned only when it fits the data and a dual certificate proves it optimal.
fn augment(
    u: &MomentVector,
    support: &[f64],
    amplitudes: &[Complex64],
    dual: &TrigPoly,
    sup_density: usize,
) -> Option<(Vec<f64>, Vec<Complex64>)> {
    let norm = u.moments().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let relative = |t: &[f64], a: &[Complex64]| {
        moment_residual(u, t, a)
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
            / norm
    };
    let mut current = relative(support, amplitudes);
    if norm == 0.0 || current <= AUGMENT_RESIDUAL {
        return None;
    }
    let max_shift = 1.0 / (8.0 * u.cutoff().max(1) as f64);
    let mut support = support.to_vec();
    let mut amplitudes = amplitudes.to_vec();
    for _ in 0..AUGMENT_ROUNDS {
        let q = TrigPoly::new(moment_residual(u, &support, &amplitudes)).ok()?;
        let (peak, _, _) = q
            .local_maxima(sup_density, 50)
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        let mut t = support.clone();
        t.push(peak);
        t.sort_by(f64::total_cmp);
        let fit = fit_amplitudes(u, &t).ok()?;
        let (t, a) = refine_atoms(u, &t, &fit.amplitudes, max_shift).unwrap_or((t, fit.amplitudes));
        let next = relative(&t, &a);
        if !(next < 0.5 * current) {
            return None;
        }
        support = t;
        amplitudes = a;
        current = next;
        if current <= AUGMENT_RESIDUAL {
            break;
        }
    }
    if current > AUGMENT_RESIDUAL {
        return None;
    }
    let measure =
        DiscreteMeasure::from_atoms(Domain::Torus, support.iter().copied().zip(amplitudes.iter().copied())).ok()?;
    let (_, value) = polish(dual, &measure, u, sup_density)?;
    let tv = measure.tv_norm();
    if tv - value > AUGMENT_GAP * tv {
        log::debug!("augmented support not certified (gap {:.3e})", tv - value);
        return None;
    }
    Some((support, amplitudes))
}

fn recover_moments(u: &MomentVector, options: &SolverOptions) -> Result<RecoveryResult> {
    options.validate()?;
    let dual = solve_dual(u, options)?;
    let mut diagnostics = RecoveryDiagnostics {
        iterations: dual.iterations,
        constraint_violation: (dual.sup_before_rescale - 1.0).max(0.0),
        kkt_residual: dual.kkt_residual,
        exchange_points: dual.exchange_points,
        fit_residual: 0.0,
        refined: false,
        polished: false,
        augmented: false,
        low_confidence: false,
    };
    if u.max_modulus() == 0.0 {
        return Ok(RecoveryResult {
            measure: DiscreteMeasure::zero(Domain::Torus),
            dual_poly: dual.poly,
            dual_objective: 0.0,
            primal_tv: 0.0,
            duality_gap: 0.0,
            support_residuals: Vec::new(),
            sign_residual: 0.0,
            unreliable: false,
            diagnostics,
        });
    }

    let estimate = extract_support(&dual.poly, options);
    if estimate.degenerate {
        return Err(Error::DegenerateSupport(
            "dual polynomial has modulus close to one on an interval; the measure is not identifiable".into(),
        ));
    }
    diagnostics.low_confidence = estimate.low_confidence;

    let mut support = estimate.points;
    let fit = fit_amplitudes(u, &support)?;
    let mut amplitudes = fit.amplitudes;
    diagnostics.fit_residual = fit.residual;

    let max_shift = 1.0 / (8.0 * u.cutoff().max(1) as f64);
    if let Some((t, a)) = refine_atoms(u, &support, &amplitudes, max_shift) {
        support = t;
        amplitudes = a;
        diagnostics.refined = true;
    }
    let sup_density = options.grid_oversampling * options.sup_refinement;
    if let Some((t, a)) = augment(u, &support, &amplitudes, &dual.poly, sup_density) {
        support = t;
        amplitudes = a;
        diagnostics.refined = true;
        diagnostics.augmented = true;
    }

    let largest = amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let atoms: Vec<(f64, Complex64)> = support
        .iter()
        .copied()
        .zip(amplitudes.iter().copied())
        .filter(|(_, a)| a.norm() >= PRUNE_RATIO * largest && a.norm() > 0.0)
        .collect();
    let measure = DiscreteMeasure::from_atoms(Domain::Torus, atoms)?;
    if diagnostics.refined {
        let norm = u.moments().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let resid = crate::stft::fourier_moments(&measure, u.cutoff())?
            .moments()
            .iter()
            .zip(u.moments())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        diagnostics.fit_residual = resid / norm;
    }

    // Keep whichever feasible polynomial certifies more.
    let mut poly = dual.poly;
    let mut objective = dual.objective;
    if let Some((candidate, value)) = polish(&poly, &measure, u, sup_density) {
        if value > objective {
            poly = candidate;
            objective = value;
            diagnostics.polished = true;
        }
    }

    let primal_tv = measure.tv_norm();
    let duality_gap = primal_tv - objective;
    let mut support_residuals = Vec::with_capacity(measure.len());
    let mut sign_residual: f64 = 0.0;
    for (t, a) in measure.atoms() {
        let v = poly.eval(t);
        support_residuals.push(v.norm() - 1.0);
        sign_residual = sign_residual.max((v - a / a.norm()).norm());
    }
    let unreliable = duality_gap > GAP_FLAG_RATIO * primal_tv || (primal_tv == 0.0 && objective > 0.0);
    if unreliable {
        log::warn!("duality gap {duality_gap:.3e} against primal value {primal_tv:.3e}");
    }
    Ok(RecoveryResult {
        measure,
        dual_poly: poly,
        dual_objective: objective,
        primal_tv,
        duality_gap,
        support_residuals,
        sign_residual,
        unreliable,
        diagnostics,
    })
}
