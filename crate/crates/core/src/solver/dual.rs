//! First-order solver for the dual program
//!
//! ```text
//! maximize  Re Σ_m conj(u_m) x_m   subject to  |p_x(t)| ≤ 1 for all t,
//! ```
//!
//! where `p_x(t) = Σ_m x_m e^{2πimt}`. The semi-infinite constraint is imposed
//! on a uniform grid plus a small set of exchange points that are added
//! wherever the previous solution overshoots between grid points. Each
//! constrained subproblem is solved by a primal–dual splitting
//! (Chambolle–Pock) with adaptive restarts and primal-weight updates; its
//! dual variable is the gridded primal measure.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::SolverOptions;
use crate::error::{Error, Result};
use crate::stft::MomentVector;
use crate::trigpoly::TrigPoly;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// How often (in iterations) residuals are evaluated and restarts considered.
const CHECK_PERIOD: usize = 64;

/// Result of [`solve_dual`].
#[derive(Debug, Clone)]
pub struct DualSolution {
    /// Feasible dual polynomial (`sup |p| ≤ 1` up to the refinement tolerance).
    pub poly: TrigPoly,
    /// `Re Σ conj(u_m) x_m` for the returned polynomial.
    pub objective: f64,
    /// Total splitting iterations over all exchange rounds.
    pub iterations: usize,
    /// Relative KKT residual of the last subproblem.
    pub kkt_residual: f64,
    /// Measured `sup |p|` before the final rescaling.
    pub sup_before_rescale: f64,
    /// Number of exchange points in the final constraint set.
    pub exchange_points: usize,
}

/// Evaluation of `x ↦ (p_x(t_j))_j` on a uniform grid plus extra points, and its adjoint.
struct ConstraintOperator {
    degree: usize,
    grid_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    fft_scratch: Vec<Complex64>,
    /// Row-major `extra.len() × (2M+1)` table of `e^{2πimt_e}`.
    extra_phasors: Vec<Complex64>,
    extra: Vec<f64>,
}

impl ConstraintOperator {
    fn new(degree: usize, grid_len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid_len);
        let inverse = planner.plan_fft_inverse(grid_len);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Self {
            degree,
            grid_len,
            forward,
            inverse,
            scratch: vec![ZERO; grid_len],
            fft_scratch: vec![ZERO; scratch_len],
            extra_phasors: Vec::new(),
            extra: Vec::new(),
        }
    }

    fn rows(&self) -> usize {
        self.grid_len + self.extra.len()
    }

    fn push_extra(&mut self, t: f64) {
        let m = self.degree as i64;
        let step = Complex64::from_polar(1.0, 2.0 * PI * t);
        let mut phase = Complex64::from_polar(1.0, -2.0 * PI * m as f64 * t);
        for _ in -m..=m {
            self.extra_phasors.push(phase);
            phase *= step;
        }
        self.extra.push(t);
    }

    fn apply(&mut self, x: &[Complex64], out: &mut [Complex64]) {
        let len = self.grid_len as i64;
        self.scratch.fill(ZERO);
        for (i, &c) in x.iter().enumerate() {
            let m = i as i64 - self.degree as i64;
            self.scratch[m.rem_euclid(len) as usize] += c;
        }
        self.inverse
            .process_with_scratch(&mut self.scratch, &mut self.fft_scratch);
        out[..self.grid_len].copy_from_slice(&self.scratch);
        let width = x.len();
        for (e, o) in out[self.grid_len..].iter_mut().enumerate() {
            let row = &self.extra_phasors[e * width..(e + 1) * width];
            *o = row.iter().zip(x).map(|(w, c)| w * c).sum();
        }
    }

    fn adjoint(&mut self, y: &[Complex64], out: &mut [Complex64]) {
        let len = self.grid_len as i64;
        self.scratch.copy_from_slice(&y[..self.grid_len]);
        self.forward
            .process_with_scratch(&mut self.scratch, &mut self.fft_scratch);
        for (i, o) in out.iter_mut().enumerate() {
            let m = i as i64 - self.degree as i64;
            *o = self.scratch[m.rem_euclid(len) as usize];
        }
        let width = out.len();
        for (e, &ye) in y[self.grid_len..].iter().enumerate() {
            let row = &self.extra_phasors[e * width..(e + 1) * width];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w.conj() * ye;
            }
        }
    }

    /// Largest singular value, by power iteration on `A*A`.
    fn norm(&mut self) -> f64 {
        let width = 2 * self.degree + 1;
        // Deterministic, non-symmetric start vector.
        let mut x: Vec<Complex64> = (0..width)
            .map(|i| Complex64::new(1.0 + 0.1 * (i % 7) as f64, 0.05 * (i % 3) as f64))
            .collect();
        let mut ax = vec![ZERO; self.rows()];
        let mut estimate = 0.0;
        for _ in 0..50 {
            let nx = norm2(&x);
            x.iter_mut().for_each(|v| *v /= nx);
            self.apply(&x, &mut ax);
            let mut next = vec![ZERO; width];
            self.adjoint(&ax, &mut next);
            let lambda = norm2(&next);
            let converged = (lambda - estimate).abs() <= 1e-10 * lambda;
            estimate = lambda;
            x = next;
            if converged {
                break;
            }
        }
        estimate.sqrt()
    }
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dist2(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn dot_re(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum()
}

/// Smallest `n ≥ target` whose only prime factors are 2, 3 and 5.
pub(crate) fn next_smooth(target: usize) -> usize {
    let mut n = target.max(1);
    loop {
        let mut r = n;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return n;
        }
        n += 1;
    }
}

struct Residuals {
    primal: f64,
    gap: f64,
}

impl Residuals {
    fn relative(&self) -> f64 {
        self.primal.max(self.gap)
    }

    fn weighted(&self, weight: f64) -> f64 {
        (weight * weight * self.primal * self.primal + self.gap * self.gap).sqrt()
    }
}

/// State of the splitting for one constraint set.
struct Splitting<'a> {
    op: &'a mut ConstraintOperator,
    u: &'a [Complex64],
    eps: f64,
}

impl Splitting<'_> {
    fn residuals(
        &mut self,
        x: &[Complex64],
        y: &[Complex64],
        ax: &mut [Complex64],
        aty: &mut [Complex64],
    ) -> Residuals {
        self.op.apply(x, ax);
        self.op.adjoint(y, aty);
        let primal = ax.iter().map(|v| (v.norm() - 1.0).max(0.0)).fold(0.0, f64::max);
        // f(x) = ε/2 ‖x‖² - Re⟨x, u⟩ and g(y) = -‖y‖₁ - ‖u - A*y‖² / (2ε).
        let f = 0.5 * self.eps * norm2(x).powi(2) - dot_re(x, self.u);
        let g = -y.iter().map(|v| v.norm()).sum::<f64>() - dist2(aty, self.u).powi(2) / (2.0 * self.eps);
        let gap = (f - g).abs() / (1.0 + f.abs() + g.abs());
        Residuals { primal, gap }
    }

    /// Runs restarted primal–dual iterations from `(x, y)` until the relative
    /// KKT residual drops below `tol` or `budget` iterations are spent.
    fn run(
        &mut self,
        x: &mut Vec<Complex64>,
        y: &mut Vec<Complex64>,
        tol: f64,
        budget: usize,
        initial_weight: f64,
    ) -> (usize, f64, f64) {
        let width = x.len();
        let rows = y.len();
        let eta = 0.99 / self.op.norm();
        let mut weight = initial_weight;

        let mut ax = vec![ZERO; rows];
        let mut aty = vec![ZERO; width];
        let mut x_bar = vec![ZERO; width];
        let mut x_new = vec![ZERO; width];
        let mut x_sum = vec![ZERO; width];
        let mut y_sum = vec![ZERO; rows];
        let mut x_anchor = x.clone();
        let mut y_anchor = y.clone();
        let mut since_restart = 0usize;

        let mut anchor_kkt = self.residuals(x, y, &mut ax, &mut aty).weighted(weight);
        let mut prev_candidate_kkt = f64::INFINITY;
        let mut last_relative = f64::INFINITY;

        self.op.adjoint(y, &mut aty);
        let mut iter = 0;
        while iter < budget {
            let tau = eta / weight;
            let sigma = eta * weight;
            let shrink = 1.0 / (1.0 + tau * self.eps);
            for i in 0..width {
                x_new[i] = (x[i] - (aty[i] - self.u[i]) * tau) * shrink;
                x_bar[i] = x_new[i] * 2.0 - x[i];
            }
            std::mem::swap(x, &mut x_new);
            self.op.apply(&x_bar, &mut ax);
            for (yj, &a) in y.iter_mut().zip(ax.iter()) {
                let v = *yj + a * sigma;
                let r = v.norm();
                *yj = if r > sigma { v * (1.0 - sigma / r) } else { ZERO };
            }
            self.op.adjoint(y, &mut aty);

            for (s, v) in x_sum.iter_mut().zip(x.iter()) {
                *s += v;
            }
            for (s, v) in y_sum.iter_mut().zip(y.iter()) {
                *s += v;
            }
            since_restart += 1;
            iter += 1;

            if iter % CHECK_PERIOD != 0 && iter != budget {
                continue;
            }

            let inv = 1.0 / since_restart as f64;
            let x_avg: Vec<Complex64> = x_sum.iter().map(|v| v * inv).collect();
            let y_avg: Vec<Complex64> = y_sum.iter().map(|v| v * inv).collect();
            let current = self.residuals(x, y, &mut ax, &mut aty);
            let average = self.residuals(&x_avg, &y_avg, &mut ax, &mut aty);
            let use_average = average.weighted(weight) < current.weighted(weight);
            let best = if use_average { &average } else { &current };
            last_relative = best.relative();
            if last_relative <= tol {
                if use_average {
                    *x = x_avg;
                    *y = y_avg;
                }
                self.op.adjoint(y, &mut aty);
                return (iter, last_relative, weight);
            }

            let candidate_kkt = best.weighted(weight);
            let restart = candidate_kkt <= 0.2 * anchor_kkt
                || (candidate_kkt <= 0.8 * anchor_kkt && candidate_kkt > prev_candidate_kkt)
                || since_restart as f64 >= 0.36 * iter as f64;
            prev_candidate_kkt = candidate_kkt;
            if restart {
                if use_average {
                    *x = x_avg;
                    *y = y_avg;
                }
                let dx = dist2(x, &x_anchor);
                let dy = dist2(y, &y_anchor);
                if dx > 1e-14 && dy > 1e-14 {
                    weight = (0.5 * (dy / dx).ln() + 0.5 * weight.ln()).exp();
                }
                x_anchor.copy_from_slice(x);
                y_anchor.copy_from_slice(y);
                x_sum.fill(ZERO);
                y_sum.fill(ZERO);
                since_restart = 0;
                anchor_kkt = self.residuals(x, y, &mut ax, &mut aty).weighted(weight);
                prev_candidate_kkt = f64::INFINITY;
            }
            self.op.adjoint(y, &mut aty);
        }
        (iter, last_relative, weight)
    }
}

/// Maximizes `Re Σ conj(u_m) x_m` subject to `sup_t |p_x(t)| ≤ 1`.
///
/// The returned polynomial has degree equal to the cutoff of `u` and is
/// rescaled by its measured supremum when that exceeds one, so it is always
/// feasible up to the accuracy of the supremum estimate.
pub fn solve_dual(u: &MomentVector, options: &SolverOptions) -> Result<DualSolution> {
    options.validate()?;
    let degree = u.cutoff();
    let width = 2 * degree + 1;
    let scale = u.max_modulus();
    if scale == 0.0 {
        return Ok(DualSolution {
            poly: TrigPoly::zeros(degree),
            objective: 0.0,
            iterations: 0,
            kkt_residual: 0.0,
            sup_before_rescale: 0.0,
            exchange_points: 0,
        });
    }
    let u_scaled: Vec<Complex64> = u.moments().iter().map(|z| z / scale).collect();
    let grid_len = next_smooth(options.grid_oversampling * width);
    let mut op = ConstraintOperator::new(degree, grid_len);

    let mut x = vec![ZERO; width];
    let mut y = vec![ZERO; grid_len];
    let mut weight = match options.primal_dual_step_sizes {
        Some((tau, sigma)) => (sigma / tau).sqrt(),
        None => norm2(&u_scaled) / (grid_len as f64).sqrt(),
    };
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let sup_density = options.grid_oversampling * options.sup_refinement;

    for round in 0..=options.exchange_rounds {
        let budget = options.max_iterations.saturating_sub(iterations);
        if budget == 0 {
            break;
        }
        let mut split = Splitting {
            op: &mut op,
            u: &u_scaled,
            eps: options.dual_regularization,
        };
        let (used, res, w) = split.run(&mut x, &mut y, options.convergence_tolerance, budget, weight);
        weight = w;
        log::debug!(
            "dual round {round}: {used} iterations, residual {res:.2e}, {} exchange points",
            op.extra.len()
        );
        iterations += used;
        residual = res;
        if residual > options.convergence_tolerance {
            break;
        }
        if round == options.exchange_rounds {
            break;
        }
        let poly = TrigPoly::new(x.clone())?;
        let overshoot: Vec<f64> = poly
            .local_maxima(sup_density, options.newton_max_steps)
            .into_iter()
            .filter(|&(t, v, _)| {
                v > 1.0 + options.exchange_tolerance && !op.extra.iter().any(|&e| (e - t).abs() < 1e-13)
            })
            .map(|(t, _, _)| t)
            .collect();
        if overshoot.is_empty() {
            break;
        }
        for t in overshoot {
            op.push_extra(t);
            y.push(ZERO);
        }
    }

    if residual > options.convergence_tolerance {
        return Err(Error::SolverFailure {
            iterations,
            residual,
            last_iterate: Box::new(TrigPoly::new(x)?),
        });
    }

    let mut poly = TrigPoly::new(x)?;
    let sup = poly.sup_norm(sup_density);
    if sup > 1.0 {
        poly.scale(1.0 / sup);
    }
    let objective = dot_re(poly.coeffs(), u.moments());
    Ok(DualSolution {
        poly,
        objective,
        iterations,
        kkt_residual: residual,
        sup_before_rescale: sup,
        exchange_points: op.extra.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{DiscreteMeasure, Domain};
    use crate::stft::fourier_moments;

    #[test]
    fn smooth_sizes() {
        assert_eq!(next_smooth(11120), 11250);
        assert_eq!(next_smooth(48), 48);
        assert_eq!(next_smooth(7), 8);
    }

    #[test]
    fn operator_adjoint_identity() {
        let degree = 4;
        let mut op = ConstraintOperator::new(degree, 40);
        op.push_extra(0.123);
        op.push_extra(0.777);
        let x: Vec<Complex64> = (0..9)
            .map(|i| Complex64::new(i as f64 * 0.3 - 1.0, 0.2 * i as f64))
            .collect();
        let y: Vec<Complex64> = (0..42)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos()))
            .collect();
        let mut ax = vec![ZERO; 42];
        let mut aty = vec![ZERO; 9];
        op.apply(&x, &mut ax);
        op.adjoint(&y, &mut aty);
        assert!((dot_re(&ax, &y) - dot_re(&x, &aty)).abs() < 1e-10);
        let p = TrigPoly::new(x).unwrap();
        assert!((ax[41] - p.eval(0.777)).norm() < 1e-12);
        assert!((ax[3] - p.eval(3.0 / 40.0)).norm() < 1e-12);
        // uniform part alone is a scaled isometry
        let mut plain = ConstraintOperator::new(degree, 40);
        assert!((plain.norm() - 40f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn zero_moments_give_zero_polynomial() {
        let sol = solve_dual(&MomentVector::zeros(3), &SolverOptions::default()).unwrap();
        assert!(sol.poly.is_zero());
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn single_atom_strong_duality() {
        let m = DiscreteMeasure::from_atoms(Domain::Torus, [(0.3, Complex64::new(5.0, 0.0))]).unwrap();
        let options = SolverOptions::default();
        for cutoff in [1, 4, 20] {
            let u = fourier_moments(&m, cutoff).unwrap();
            let sol = solve_dual(&u, &options).unwrap();
            assert!(
                (sol.objective - 5.0).abs() < 5.0 * options.selection_threshold,
                "cutoff {cutoff}: {}",
                sol.objective
            );
            assert!((sol.poly.eval(0.3).norm() - 1.0).abs() < options.selection_threshold);
            assert!(sol.objective <= 5.0 + 1e-9);
        }
    }
}
