use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stftsr::bench::support_error;
use stftsr::solver::{
    extract_support, fit_amplitudes, recover, recover_fourier, solve_dual, RecoveryResult, SolverOptions,
};
use stftsr::stft::{fourier_moments, stft_coefficients};
use stftsr::{DiscreteMeasure, Domain, Error, MomentVector, StftMeasurements, TrigPoly, WindowParams};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn measure(atoms: &[(f64, Complex64)]) -> DiscreteMeasure {
    DiscreteMeasure::from_atoms(Domain::Torus, atoms.iter().copied()).unwrap()
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

/// `S` atoms at spacing exactly `delta`, random phases and moduli in `[1, 2)`.
fn cluster(rng: &mut ChaCha8Rng, s: usize, delta: f64) -> DiscreteMeasure {
    let start = rng.random::<f64>() * 0.5;
    let atoms: Vec<(f64, Complex64)> = (0..s)
        .map(|l| {
            let a = Complex64::from_polar(1.0 + rng.random::<f64>(), rng.random_range(0.0..2.0 * PI));
            (start + l as f64 * delta, a)
        })
        .collect();
    measure(&atoms)
}

fn check_invariants(r: &RecoveryResult, tau: f64) {
    assert!(r.duality_gap >= -1e-7 * r.primal_tv.max(1.0));
    assert!(r.dual_objective <= r.primal_tv + 1e-7 * r.primal_tv.max(1.0));
    for res in &r.support_residuals {
        assert!(*res >= -2.0 * tau);
    }
}

#[test]
fn dual_of_a_single_atom() {
    let m = measure(&[(0.3, c(5.0, 0.0))]);
    for cutoff in [1, 5, 20] {
        let u = fourier_moments(&m, cutoff).unwrap();
        let d = solve_dual(&u, &opts()).unwrap();
        assert!((d.objective - 5.0).abs() <= 1e-4 * 5.0, "M={cutoff}: {}", d.objective);
        assert!((d.poly.eval(0.3).norm() - 1.0).abs() <= 1e-4);
        assert!(d.poly.sup_norm(128) <= 1.0 + 1e-12);

        let r = recover_fourier(&u, &opts()).unwrap();
        assert!((r.dual_objective - 5.0).abs() <= 1e-6 * 5.0);
        assert!((r.dual_poly.eval(0.3).norm() - 1.0).abs() <= 1e-6);
    }
}

#[test]
fn dual_of_zero_and_scaling() {
    let d = solve_dual(&MomentVector::zeros(6), &opts()).unwrap();
    assert_eq!(d.objective, 0.0);
    assert!(d.poly.is_zero());

    let m = measure(&[(0.1, c(1.0, 2.0)), (0.55, c(-0.5, 0.3))]);
    let u = fourier_moments(&m, 8).unwrap();
    let one = solve_dual(&u, &opts()).unwrap();
    let two = solve_dual(&u.scaled(2.0), &opts()).unwrap();
    assert!((two.objective - 2.0 * one.objective).abs() <= 1e-12 * one.objective);
    for (a, b) in one.poly.coeffs().iter().zip(two.poly.coeffs()) {
        assert!((a - b).norm() <= 1e-12);
    }
}

#[test]
fn constant_modulus_is_degenerate() {
    let mut x = vec![c(0.0, 0.0); 3];
    x[2] = c(1.0, 0.0);
    let est = extract_support(&TrigPoly::new(x).unwrap(), &opts());
    assert!(est.degenerate);
    assert!(est.points.is_empty());
}

/// Normalized Fejér kernel of degree `m` centred at `t0`, scaled by `h`.
fn fejer(m: usize, t0: f64, h: f64) -> Vec<Complex64> {
    let mi = m as i64;
    (-mi..=mi)
        .map(|k| {
            let w = (1.0 - k.abs() as f64 / (m + 1) as f64) / (m + 1) as f64;
            h * w * Complex64::from_polar(1.0, -2.0 * PI * k as f64 * t0)
        })
        .collect()
}

#[test]
fn only_full_height_peaks_are_kept() {
    let m = 40;
    let a = fejer(m, 0.2, 1.0);
    let b = fejer(m, 0.7, 0.9);
    let p = TrigPoly::new(a.iter().zip(&b).map(|(x, y)| x + y).collect()).unwrap();
    // Dense argmax near the first peak as oracle.
    let n = 200_000;
    let (mut best, mut arg) = (0.0, 0.0);
    for j in 0..n {
        let t = 0.15 + 0.1 * j as f64 / n as f64;
        let v = p.eval(t).norm();
        if v > best {
            best = v;
            arg = t;
        }
    }
    let est = extract_support(&p, &opts());
    assert!(!est.degenerate);
    assert_eq!(est.points.len(), 1, "{:?}", est.points);
    assert!((est.points[0] - arg).abs() < 1e-6);
    assert!((est.points[0] - 0.2).abs() < 1e-3);
}

#[test]
fn amplitude_fit_examples() {
    let one = measure(&[(0.42, c(0.0, 3.0))]);
    let fit = fit_amplitudes(&fourier_moments(&one, 4).unwrap(), &[0.42]).unwrap();
    assert!((fit.amplitudes[0] - c(0.0, 3.0)).norm() < 1e-13);

    let two = measure(&[(0.2, c(1.0, 1.0)), (0.8, c(-2.0, 0.0))]);
    let u = fourier_moments(&two, 10).unwrap();
    let fit = fit_amplitudes(&u, &[0.2, 0.8]).unwrap();
    assert!((fit.amplitudes[0] - c(1.0, 1.0)).norm() <= 1e-10);
    assert!((fit.amplitudes[1] - c(-2.0, 0.0)).norm() <= 1e-10);
    assert!(fit.residual <= 1e-10);

    let fit = fit_amplitudes(&u, &[0.2, 0.5, 0.8]).unwrap();
    assert!(fit.amplitudes[1].norm() <= 1e-8);

    assert!(matches!(
        fit_amplitudes(&u, &[0.3, 0.3]),
        Err(Error::DegenerateSupport(_))
    ));
    let too_many: Vec<f64> = (0..30).map(|i| i as f64 / 30.0).collect();
    assert!(fit_amplitudes(&u, &too_many).is_err());
}

#[test]
fn single_atom_strict_stft() {
    let params = WindowParams::recovery_regime(50).unwrap();
    let m = measure(&[(0.5, c(0.0, 3.0))]);
    let r = recover(&stft_coefficients(&m, &params).unwrap(), &opts()).unwrap();
    assert_eq!(r.measure.len(), 1);
    assert!((r.measure.support()[0] - 0.5).abs() <= 1e-8);
    assert!((r.measure.amplitudes()[0] - c(0.0, 3.0)).norm() <= 1e-6 * 3.0);
    assert!(r.duality_gap.abs() <= 1e-6 * r.primal_tv);
    assert!(r.sign_residual <= 1e-2);
    assert!(!r.unreliable);
    check_invariants(&r, 1e-3);

    let json: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    for key in ["atoms", "dual_objective", "primal_tv", "duality_gap", "diagnostics"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    assert!((json["atoms"][0]["t"].as_f64().unwrap() - 0.5).abs() < 1e-8);
}

#[test]
fn five_atoms_strict_stft_and_scale_equivariance() {
    let params = WindowParams::recovery_regime(50).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let delta = 1.5 / 50.0;
    let atoms: Vec<(f64, Complex64)> = (0..5)
        .map(|l| {
            (
                2.0 * l as f64 * delta + rng.random::<f64>() * delta,
                c(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
            )
        })
        .collect();
    let m = measure(&atoms);
    let y = stft_coefficients(&m, &params).unwrap();
    let r = recover(&y, &opts()).unwrap();
    assert!(support_error(m.support(), r.measure.support()) <= 1e-3);
    assert!(r.duality_gap.abs() <= 1e-4 * r.primal_tv);
    assert!(r.sign_residual <= 1e-2);
    check_invariants(&r, 1e-3);

    let scaled = recover(&y.scaled(7.5), &opts()).unwrap();
    assert_eq!(scaled.measure.len(), r.measure.len());
    for ((t1, a1), (t2, a2)) in r.measure.atoms().zip(scaled.measure.atoms()) {
        assert!((t1 - t2).abs() <= 1e-9);
        assert!((a2 - a1 * 7.5).norm() <= 1e-8 * a2.norm());
    }
}

#[test]
fn zero_measurements_give_the_zero_measure() {
    let params = WindowParams::new(1.0 / 40.0, 10, 20).unwrap();
    let r = recover(&StftMeasurements::zeros(params), &opts()).unwrap();
    assert!(r.measure.is_empty());
    assert_eq!(r.primal_tv, 0.0);
    assert_eq!(r.duality_gap, 0.0);
    assert!(!r.unreliable);
}

#[test]
fn inconsistent_measurements_are_rejected() {
    let params = WindowParams::new(1.0 / 40.0, 10, 20).unwrap();
    let m = measure(&[(0.25, c(1.0, 0.0))]);
    let mut y = stft_coefficients(&m, &params).unwrap();
    let v = y.get(0, 0);
    y.set(0, 0, v * 1.01);
    assert!(matches!(recover(&y, &opts()), Err(Error::CorruptedMeasurements { .. })));
}

#[test]
fn fourier_baseline_well_separated() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let single = measure(&[(0.77, c(-1.0, 2.0))]);
    let r = recover_fourier(&fourier_moments(&single, 50).unwrap(), &opts()).unwrap();
    assert!((r.measure.support()[0] - 0.77).abs() <= 1e-8);
    assert!((r.measure.amplitudes()[0] - c(-1.0, 2.0)).norm() <= 1e-6);

    for _ in 0..3 {
        let delta = 2.5 / 50.0;
        let atoms: Vec<(f64, Complex64)> = (0..5)
            .map(|l| {
                (
                    2.0 * l as f64 * delta + rng.random::<f64>() * delta,
                    c(rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0),
                )
            })
            .collect();
        let m = measure(&atoms);
        let r = recover_fourier(&fourier_moments(&m, 50).unwrap(), &opts()).unwrap();
        assert!(support_error(m.support(), r.measure.support()) <= 1e-3);
        check_invariants(&r, 1e-3);
    }
}

#[test]
fn windowed_data_resolve_what_plain_moments_cannot() {
    let params = WindowParams::recovery_regime(50).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (mut stft_ok, mut fourier_ok) = (0, 0);
    let draws = 6;
    for _ in 0..draws {
        let m = cluster(&mut rng, 5, 0.5 / 50.0);
        let s = recover(&stft_coefficients(&m, &params).unwrap(), &opts()).unwrap();
        stft_ok += (support_error(m.support(), s.measure.support()) <= 1e-3) as usize;
        let f = recover_fourier(&fourier_moments(&m, 50).unwrap(), &opts());
        if let Ok(f) = f {
            fourier_ok += (support_error(m.support(), f.measure.support()) <= 1e-3) as usize;
        }
    }
    assert_eq!(stft_ok, draws);
    assert!(fourier_ok < draws, "fourier {fourier_ok}/{draws}");
}

#[test]
fn weak_duality_and_sign_condition() {
    let params = WindowParams::new(1.0 / 100.0, 25, 25).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..5 {
        let s = rng.random_range(1..=6);
        let atoms: Vec<(f64, Complex64)> = (0..s)
            .map(|_| {
                (
                    rng.random::<f64>(),
                    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                )
            })
            .collect();
        let m = measure(&atoms);
        let r = recover(&stft_coefficients(&m, &params).unwrap(), &opts());
        let Ok(r) = r else { continue };
        check_invariants(&r, 1e-3);
        // Any measure consistent with the data bounds the dual objective.
        assert!(r.dual_objective <= m.tv_norm() + 1e-7 * m.tv_norm());
        if !r.unreliable {
            assert!(r.sign_residual <= 1e-2);
        }
    }
}

#[test]
fn tiny_atom_among_large_ones_is_recovered() {
    // One atom is a thousandth of the largest; the regularized dual misses it.
    let config = stftsr::bench::SweepConfig::paper_figure();
    let truth = stftsr::bench::sample_instance(0.024, &mut ChaCha8Rng::seed_from_u64(18198252371732091328)).unwrap();
    let smallest = truth
        .amplitudes()
        .iter()
        .map(|a| a.norm())
        .fold(f64::INFINITY, f64::min);
    assert!(smallest < 2.0);
    let y = stft_coefficients(&truth, &config.window().unwrap()).unwrap();
    let r = recover(&y, &config.solver).unwrap();
    assert!(r.diagnostics.augmented);
    assert_eq!(r.measure.len(), truth.len());
    assert!(support_error(truth.support(), r.measure.support()) < 1e-9);
    assert!(r.duality_gap.abs() <= 1e-6 * r.primal_tv);
    assert!(!r.unreliable);
}
