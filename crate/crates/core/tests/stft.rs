use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stftsr::stft::{
    adjoint_polynomial, complete_inversion_approx, fourier_moments, real_inner, reduce_measurements, stft_coefficients,
    stft_time_function,
};
use stftsr::{DiscreteMeasure, Domain, Error, MomentVector, StftMeasurements, WindowParams};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn gn(n: i64, sigma: f64) -> f64 {
    (2.0 * sigma).sqrt() * (-2.0 * PI * sigma * sigma * (n * n) as f64).exp()
}

fn cis(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

fn random_measure(rng: &mut ChaCha8Rng, max_atoms: usize) -> DiscreteMeasure {
    let s = rng.random_range(1..=max_atoms);
    let atoms: Vec<(f64, Complex64)> = (0..s)
        .map(|_| {
            (
                rng.random::<f64>(),
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            )
        })
        .collect();
    DiscreteMeasure::from_atoms(Domain::Torus, atoms).unwrap()
}

/// `y_{k,n} = Σ a g_n e^{-2πi(n+k)t}` summed term by term.
fn direct_stft(m: &DiscreteMeasure, p: &WindowParams) -> Vec<Complex64> {
    let (fc, nt) = (p.fc as i64, p.n_trunc as i64);
    let mut out = Vec::new();
    for k in -fc..=fc {
        for n in -nt..=nt {
            out.push(
                m.atoms()
                    .map(|(t, a)| a * gn(n, p.sigma) * cis(-2.0 * PI * (n + k) as f64 * t))
                    .sum(),
            );
        }
    }
    out
}

#[test]
fn coefficients_match_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let p = WindowParams::new(
            rng.random_range(0.01..0.2),
            rng.random_range(1..=12),
            rng.random_range(0..=15),
        )
        .unwrap();
        let m = random_measure(&mut rng, 6);
        let lib = stft_coefficients(&m, &p).unwrap();
        for (x, y) in lib.data().iter().zip(direct_stft(&m, &p)) {
            assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
        }
    }
}

#[test]
fn single_atom_examples() {
    let p = WindowParams::new(1.0 / 200.0, 2, 1).unwrap();
    let one = DiscreteMeasure::from_atoms(Domain::Torus, [(0.0, c(1.0, 0.0))]).unwrap();
    let y = stft_coefficients(&one, &p).unwrap();
    for (_, n, v) in y.entries() {
        assert!((v - gn(n, p.sigma)).norm() < 1e-15);
    }
    let quarter = DiscreteMeasure::from_atoms(Domain::Torus, [(0.25, c(1.0, 0.0))]).unwrap();
    let y = stft_coefficients(&quarter, &p).unwrap();
    // e^{-iπ(n+k)/2} = (-i)^{n+k}
    assert!((y.get(1, 0) - c(0.0, -gn(0, p.sigma))).norm() < 1e-15);
    assert!((y.get(1, 1) - c(-gn(1, p.sigma), 0.0)).norm() < 1e-15);
}

#[test]
fn adjoint_identity_three_ways() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let p = WindowParams::new(
            rng.random_range(0.005..0.2),
            rng.random_range(1..=20),
            rng.random_range(0..=40),
        )
        .unwrap();
        let m = random_measure(&mut rng, 8);
        let mut cmat = StftMeasurements::zeros(p);
        let entries: Vec<(i64, i64)> = cmat.entries().map(|(k, n, _)| (k, n)).collect();
        for (k, n) in entries {
            cmat.set(k, n, c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        }
        let lhs = real_inner(cmat.data(), &direct_stft(&m, &p));
        let x = adjoint_polynomial(&cmat);
        let atom_form: f64 = m.atoms().map(|(t, a)| (a.conj() * x.eval(t)).re).sum();
        let u = fourier_moments(&m, p.degree()).unwrap();
        let moment_form: f64 = u
            .moments()
            .iter()
            .zip(x.coeffs())
            .map(|(um, xm)| (um.conj() * xm).re)
            .sum();
        let scale = lhs.abs().max(1e-300);
        assert!((lhs - atom_form).abs() <= 1e-11 * scale.max(atom_form.abs()));
        assert!((lhs - moment_form).abs() <= 1e-11 * scale.max(moment_form.abs()));
    }
}

#[test]
fn reduction_recovers_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let p = WindowParams::new(
            rng.random_range(0.01..0.05),
            rng.random_range(1..=10),
            rng.random_range(0..=30),
        )
        .unwrap();
        let m = random_measure(&mut rng, 5);
        let red = reduce_measurements(&stft_coefficients(&m, &p).unwrap()).unwrap();
        assert_eq!(red.moments.cutoff(), p.degree());
        assert!(red.inconsistency < 1e-10);
        for mi in -(p.degree() as i64)..=p.degree() as i64 {
            let direct: Complex64 = m.atoms().map(|(t, a)| a * cis(-2.0 * PI * mi as f64 * t)).sum();
            assert!((red.moments.get(mi) - direct).norm() <= 1e-9 * (1.0 + direct.norm()));
        }
    }
}

#[test]
fn perturbed_entry_is_rejected() {
    let p = WindowParams::new(1.0 / 40.0, 5, 20).unwrap();
    let m = DiscreteMeasure::from_atoms(Domain::Torus, [(0.3, c(1.0, 2.0)), (0.7, c(-1.0, 0.5))]).unwrap();
    let mut y = stft_coefficients(&m, &p).unwrap();
    let v = y.get(2, 3);
    y.set(2, 3, v * 1.01);
    assert!(matches!(
        reduce_measurements(&y),
        Err(Error::CorruptedMeasurements { .. })
    ));
}

#[test]
fn time_function_tail_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let sigma = rng.random_range(0.02..0.1);
        let nt = rng.random_range(3..=25);
        let p = WindowParams::new(sigma, 4, nt).unwrap();
        let m = random_measure(&mut rng, 4);
        let y = stft_coefficients(&m, &p).unwrap();
        let tail: f64 = ((nt as i64 + 1)..2000).map(|n| 2.0 * gn(n, sigma)).sum::<f64>() * m.tv_norm();
        for k in -4i64..=4 {
            let tau = rng.random::<f64>();
            let series: Complex64 = (-(nt as i64)..=nt as i64)
                .map(|n| y.get(k, n) * cis(2.0 * PI * n as f64 * tau))
                .sum();
            let exact = stft_time_function(&m, &p, k, tau).unwrap();
            assert!((exact - series).norm() <= tail + 1e-12, "k={k}");
        }
    }
    let p = WindowParams::new(0.05, 3, 5).unwrap();
    let m = DiscreteMeasure::from_atoms(Domain::Torus, [(0.4, c(1.0, 0.0))]).unwrap();
    assert!(matches!(
        stft_time_function(&m, &p, 4, 0.0),
        Err(Error::OutOfBand { .. })
    ));
}

#[test]
fn inversion_examples() {
    let p = WindowParams::new(0.05, 5, 10).unwrap();
    let m = DiscreteMeasure::from_atoms(Domain::Torus, [(0.2, c(1.5, -2.0))]).unwrap();
    let on = complete_inversion_approx(&m, &p, 0.2, 50).unwrap();
    assert!((on - c(1.5, -2.0)).norm() < 1e-12);
    let off = complete_inversion_approx(&m, &p, 0.5, 50).unwrap();
    assert!(off.norm() < 1e-3);
    assert!(complete_inversion_approx(&m, &p, 0.2, 0).is_err());
}

#[test]
fn real_line_measures_are_rejected() {
    let p = WindowParams::new(0.05, 2, 2).unwrap();
    let m = DiscreteMeasure::from_atoms(Domain::Real, [(0.2, c(1.0, 0.0))]).unwrap();
    assert!(stft_coefficients(&m, &p).is_err());
    assert!(fourier_moments(&m, 3).is_err());
}

#[test]
fn csv_formats_roundtrip() {
    let p = WindowParams::new(0.05, 2, 3).unwrap();
    let m = DiscreteMeasure::from_atoms(Domain::Torus, [(0.1, c(0.3, -1.0)), (0.6, c(2.0, 0.0))]).unwrap();
    let y = stft_coefficients(&m, &p).unwrap();
    let text = y.to_csv().unwrap();
    assert!(text.starts_with("k,n,re,im"));
    assert_eq!(StftMeasurements::from_csv(&text, p).unwrap(), y);

    let u = fourier_moments(&m, 4).unwrap();
    let text = u.to_csv().unwrap();
    assert!(text.starts_with("m,re,im"));
    assert_eq!(MomentVector::from_csv(&text).unwrap(), u);

    // Missing rows and unknown indices are errors.
    let short: String = y.to_csv().unwrap().lines().take(5).collect::<Vec<_>>().join("\n");
    assert!(StftMeasurements::from_csv(&short, p).is_err());
    assert!(StftMeasurements::from_csv("k,n,re,im\n9,0,1,0\n", p).is_err());
    assert!(MomentVector::from_csv("m,re,im\n0,abc,0\n").is_err());
}

proptest! {
    #[test]
    fn operator_is_linear(s in -3.0f64..3.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        prop_assume!((t1 - t2).abs() > 1e-6);
        let p = WindowParams::new(0.05, 3, 6).unwrap();
        let a = DiscreteMeasure::from_atoms(Domain::Torus, [(t1, c(1.0, 0.5))]).unwrap();
        let b = DiscreteMeasure::from_atoms(Domain::Torus, [(t2, c(-0.2, 2.0))]).unwrap();
        let sum = DiscreteMeasure::from_atoms(Domain::Torus, [(t1, c(s, 0.5 * s)), (t2, c(-0.2, 2.0))]).unwrap();
        let ya = stft_coefficients(&a, &p).unwrap().scaled(s);
        let yb = stft_coefficients(&b, &p).unwrap();
        let ys = stft_coefficients(&sum, &p).unwrap();
        for ((x, y), z) in ya.data().iter().zip(yb.data()).zip(ys.data()) {
            prop_assert!((x + y - z).norm() < 1e-12);
        }
    }
}
