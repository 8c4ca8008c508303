//! STFT measurement operator on the torus and its adjoint.
//!
//! With the window truncated to `2N+1` Fourier coefficients, the measurements
//! of `μ = Σ a_ℓ δ_{t_ℓ}` are `y_{k,n} = g_n u_{n+k}` for `|k| ≤ f_c`,
//! `|n| ≤ N`, where `u_m = Σ a_ℓ e^{-2πimt_ℓ}` are the Fourier moments of `μ`.
//! The data therefore carry exactly the moments `|m| ≤ f_c + N`, which is what
//! [`reduce_measurements`] extracts.
//!
//! The adjoint of a coefficient matrix `C` is the trigonometric polynomial
//! with `x_m = Σ_n g_n c_{m-n,n}`; matching the exponent `k + n = m` in
//! `Σ_{k,n} g_n c_{k,n} e^{2πi(k+n)t}` gives the factor `g_n`, not `g_m`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernels::{periodized_autocorrelation_unchecked, periodized_window_unchecked, WindowParams};
use crate::measure::DiscreteMeasure;
use crate::trigpoly::TrigPoly;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative anti-diagonal inconsistency above which measurements are rejected.
pub const CONSISTENCY_THRESHOLD: f64 = 1e-6;

/// A `(2f_c+1) × (2N+1)` complex matrix indexed by `|k| ≤ f_c`, `|n| ≤ N`.
///
/// Holds STFT measurements `y_{k,n}` as well as dual coefficient matrices
/// `c_{k,n}` of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct StftMeasurements {
    params: WindowParams,
    data: Vec<Complex64>,
}

impl StftMeasurements {
    /// `data` is row-major with `k` outer, both indices ascending.
    pub fn new(params: WindowParams, data: Vec<Complex64>) -> Result<Self> {
        let (rows, cols) = shape(&params);
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "expected {rows} x {cols} = {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParameter("non-finite measurement entry".into()));
        }
        Ok(Self { params, data })
    }

    pub fn zeros(params: WindowParams) -> Self {
        let (rows, cols) = shape(&params);
        Self {
            params,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn params(&self) -> &WindowParams {
        &self.params
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// `(2f_c + 1, 2N + 1)`.
    pub fn shape(&self) -> (usize, usize) {
        shape(&self.params)
    }

    fn index(&self, k: i64, n: i64) -> usize {
        let fc = self.params.fc as i64;
        let nt = self.params.n_trunc as i64;
        assert!(k.abs() <= fc && n.abs() <= nt, "index ({k}, {n}) out of range");
        ((k + fc) * (2 * nt + 1) + (n + nt)) as usize
    }

    pub fn get(&self, k: i64, n: i64) -> Complex64 {
        self.data[self.index(k, n)]
    }

    pub fn set(&mut self, k: i64, n: i64, value: Complex64) {
        let i = self.index(k, n);
        self.data[i] = value;
    }

    /// Iterates `(k, n, value)` with `k` outer.
    pub fn entries(&self) -> impl Iterator<Item = (i64, i64, Complex64)> + '_ {
        let fc = self.params.fc as i64;
        let nt = self.params.n_trunc as i64;
        let cols = 2 * nt + 1;
        self.data.iter().enumerate().map(move |(i, &v)| {
            let i = i as i64;
            (i / cols - fc, i % cols - nt, v)
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            params: self.params,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["k", "n", "re", "im"]).map_err(csv_error)?;
        for (k, n, v) in self.entries() {
            w.write_record([k.to_string(), n.to_string(), v.re.to_string(), v.im.to_string()])
                .map_err(csv_error)?;
        }
        into_string(w)
    }

    /// Reads `k,n,re,im` rows; every index pair of the shape implied by
    /// `params` must appear exactly once, `k` outer-sorted then `n`.
    pub fn from_csv(text: &str, params: WindowParams) -> Result<Self> {
        let rows = read_rows(text, &["k", "n", "re", "im"])?;
        let expected = Self::zeros(params);
        if rows.len() != expected.data.len() {
            return Err(Error::Parse(format!(
                "expected {} rows for f_c = {}, N = {}, got {}",
                expected.data.len(),
                params.fc,
                params.n_trunc,
                rows.len()
            )));
        }
        let mut data = Vec::with_capacity(rows.len());
        for ((line, fields), (k, n, _)) in rows.iter().zip(expected.entries()) {
            let rk = parse_int(&fields[0], *line)?;
            let rn = parse_int(&fields[1], *line)?;
            if (rk, rn) != (k, n) {
                return Err(Error::Parse(format!(
                    "line {line}: expected index ({k}, {n}), found ({rk}, {rn})"
                )));
            }
            data.push(Complex64::new(
                parse_float(&fields[2], *line)?,
                parse_float(&fields[3], *line)?,
            ));
        }
        Self::new(params, data)
    }
}

fn shape(params: &WindowParams) -> (usize, usize) {
    (2 * params.fc + 1, 2 * params.n_trunc + 1)
}

/// Fourier moments `u_m`, `|m| ≤ M`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    cutoff: usize,
    moments: Vec<Complex64>,
}

impl MomentVector {
    pub fn new(moments: Vec<Complex64>) -> Result<Self> {
        if moments.len() % 2 == 0 {
            return Err(Error::ShapeMismatch(format!(
                "moment vector needs an odd length, got {}",
                moments.len()
            )));
        }
        if moments.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParameter("non-finite moment".into()));
        }
        Ok(Self {
            cutoff: moments.len() / 2,
            moments,
        })
    }

    pub fn zeros(cutoff: usize) -> Self {
        Self {
            cutoff,
            moments: vec![ZERO; 2 * cutoff + 1],
        }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Ordered `u_{-M}, ..., u_M`.
    pub fn moments(&self) -> &[Complex64] {
        &self.moments
    }

    pub fn get(&self, m: i64) -> Complex64 {
        self.moments[(m + self.cutoff as i64) as usize]
    }

    pub fn max_modulus(&self) -> f64 {
        self.moments.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            cutoff: self.cutoff,
            moments: self.moments.iter().map(|z| z * factor).collect(),
        }
    }

    /// Keeps `|m| ≤ cutoff`.
    pub fn truncated(&self, cutoff: usize) -> Result<Self> {
        if cutoff > self.cutoff {
            return Err(Error::ShapeMismatch(format!(
                "cannot truncate cutoff {} to larger {cutoff}",
                self.cutoff
            )));
        }
        let skip = self.cutoff - cutoff;
        Ok(Self {
            cutoff,
            moments: self.moments[skip..skip + 2 * cutoff + 1].to_vec(),
        })
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["m", "re", "im"]).map_err(csv_error)?;
        let c = self.cutoff as i64;
        for (m, v) in (-c..=c).zip(&self.moments) {
            w.write_record([m.to_string(), v.re.to_string(), v.im.to_string()])
                .map_err(csv_error)?;
        }
        into_string(w)
    }

    /// Reads `m,re,im` rows covering `-M..=M` in ascending order.
    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = read_rows(text, &["m", "re", "im"])?;
        if rows.len() % 2 == 0 {
            return Err(Error::Parse(format!(
                "expected an odd number of moments, got {}",
                rows.len()
            )));
        }
        let c = (rows.len() / 2) as i64;
        let mut moments = Vec::with_capacity(rows.len());
        for ((line, fields), m) in rows.iter().zip(-c..=c) {
            let rm = parse_int(&fields[0], *line)?;
            if rm != m {
                return Err(Error::Parse(format!("line {line}: expected m = {m}, found {rm}")));
            }
            moments.push(Complex64::new(
                parse_float(&fields[1], *line)?,
                parse_float(&fields[2], *line)?,
            ));
        }
        Self::new(moments)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn read_rows(text: &str, header: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(Error::Parse(format!(
            "expected header {:?}, found {:?}",
            header.join(","),
            found.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        if record.len() != header.len() {
            return Err(Error::Parse(format!(
                "line {}: expected {} fields",
                i + 2,
                header.len()
            )));
        }
        rows.push((i + 2, record.iter().map(str::to_owned).collect()));
    }
    Ok(rows)
}

fn parse_int(s: &str, line: usize) -> Result<i64> {
    s.parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad integer {s:?}")))
}

fn parse_float(s: &str, line: usize) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad number {s:?}")))
}

/// Real inner product `⟨A, B⟩ = Re Σ a_i conj(b_i)`.
pub fn real_inner(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum()
}

/// `y_{k,n} = Σ_ℓ a_ℓ g_n e^{-2πi(n+k)t_ℓ}` for `|k| ≤ f_c`, `|n| ≤ N`.
pub fn stft_coefficients(measure: &DiscreteMeasure, params: &WindowParams) -> Result<StftMeasurements> {
    measure.require_torus()?;
    let mut out = StftMeasurements::zeros(*params);
    let fc = params.fc as i64;
    let nt = params.n_trunc as i64;
    let g = params.window_coefficients();
    let cols = (2 * nt + 1) as usize;
    for (t, a) in measure.atoms() {
        let step = Complex64::from_polar(1.0, -2.0 * PI * t);
        for k in -fc..=fc {
            let row = ((k + fc) as usize) * cols;
            let mut phase = Complex64::from_polar(1.0, -2.0 * PI * ((k - nt) as f64) * t);
            for (j, gn) in g.iter().enumerate() {
                out.data[row + j] += a * phase * *gn;
                phase *= step;
            }
        }
    }
    Ok(out)
}

/// The windowed measurement `y_k(τ) = Σ_ℓ a_ℓ g(t_ℓ - τ) e^{-2πikt_ℓ}` with
/// the periodized window.
pub fn stft_time_function(measure: &DiscreteMeasure, params: &WindowParams, k: i64, tau: f64) -> Result<Complex64> {
    measure.require_torus()?;
    if k.unsigned_abs() as usize > params.fc {
        return Err(Error::OutOfBand { k, fc: params.fc });
    }
    Ok(measure
        .atoms()
        .map(|(t, a)| {
            a * periodized_window_unchecked(t - tau, params.sigma)
                * Complex64::from_polar(1.0, -2.0 * PI * k as f64 * t)
        })
        .sum())
}

/// The adjoint `A*C` as a trigonometric polynomial of degree `f_c + N` with
/// `x_m = Σ_{n=n_min}^{n_max} g_n c_{m-n,n}`.
pub fn adjoint_polynomial(coeffs: &StftMeasurements) -> TrigPoly {
    let params = coeffs.params;
    let fc = params.fc as i64;
    let nt = params.n_trunc as i64;
    let degree = params.degree() as i64;
    let mut x = TrigPoly::zeros(degree as usize);
    let out = x.coeffs_mut();
    for m in -degree..=degree {
        let n_min = (-nt).max(m - fc);
        let n_max = nt.min(m + fc);
        let mut acc = ZERO;
        for n in n_min..=n_max {
            acc += coeffs.get(m - n, n) * params.window_coefficient(n);
        }
        out[(m + degree) as usize] = acc;
    }
    x
}

/// Checks the shape of a raw coefficient matrix and applies [`adjoint_polynomial`].
pub fn adjoint_polynomial_from(data: Vec<Complex64>, params: &WindowParams) -> Result<TrigPoly> {
    Ok(adjoint_polynomial(&StftMeasurements::new(*params, data)?))
}

/// Moments recovered from STFT data, with the worst relative disagreement
/// between entries on the same anti-diagonal.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub moments: MomentVector,
    pub inconsistency: f64,
}

/// Recovers `u_m`, `|m| ≤ f_c + N`, from `y_{k,n} = g_n u_{n+k}`.
///
/// Each anti-diagonal `k + n = m` is averaged with weights `g_n²`. Data whose
/// anti-diagonals disagree by more than `1e-6 · max|u|` are rejected.
pub fn reduce_measurements(y: &StftMeasurements) -> Result<Reduction> {
    let reduction = reduce_unchecked(y);
    if reduction.inconsistency > CONSISTENCY_THRESHOLD {
        return Err(Error::CorruptedMeasurements {
            inconsistency: reduction.inconsistency,
            threshold: CONSISTENCY_THRESHOLD,
        });
    }
    Ok(reduction)
}

/// [`reduce_measurements`] without the consistency check.
pub fn reduce_unchecked(y: &StftMeasurements) -> Reduction {
    let params = y.params;
    let fc = params.fc as i64;
    let nt = params.n_trunc as i64;
    let degree = params.degree() as i64;
    let mut moments = Vec::with_capacity((2 * degree + 1) as usize);
    for m in -degree..=degree {
        let (mut num, mut den) = (ZERO, 0.0);
        for n in (-nt).max(m - fc)..=nt.min(m + fc) {
            let gn = params.window_coefficient(n);
            num += y.get(m - n, n) * gn;
            den += gn * gn;
        }
        moments.push(num / den);
    }
    let scale = moments.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    if scale > 0.0 {
        for (k, n, v) in y.entries() {
            let u = moments[(k + n + degree) as usize];
            let dev = (v / params.window_coefficient(n) - u).norm();
            worst = worst.max(dev / scale);
        }
    }
    Reduction {
        moments: MomentVector {
            cutoff: degree as usize,
            moments,
        },
        inconsistency: worst,
    }
}

/// `u_m = Σ_ℓ a_ℓ e^{-2πimt_ℓ}` for `|m| ≤ cutoff`.
pub fn fourier_moments(measure: &DiscreteMeasure, cutoff: usize) -> Result<MomentVector> {
    measure.require_torus()?;
    let c = cutoff as i64;
    let mut moments = vec![ZERO; 2 * cutoff + 1];
    for (t, a) in measure.atoms() {
        let step = Complex64::from_polar(1.0, -2.0 * PI * t);
        let mut phase = Complex64::from_polar(1.0, 2.0 * PI * c as f64 * t);
        for u in moments.iter_mut() {
            *u += a * phase;
            phase *= step;
        }
    }
    Ok(MomentVector { cutoff, moments })
}

/// Frequency-averaged inversion of complete STFT data on the torus:
///
/// `(1/(2F+1)) Σ_{|k|≤F} Σ_ℓ a_ℓ G_per(t - t_ℓ) e^{2πik(t - t_ℓ)} / G_per(0)`,
///
/// which tends to `a_ℓ` at `t = t_ℓ` and to zero off the support as `F → ∞`.
pub fn complete_inversion_approx(
    measure: &DiscreteMeasure,
    params: &WindowParams,
    t: f64,
    truncation: usize,
) -> Result<Complex64> {
    measure.require_torus()?;
    if truncation == 0 {
        return Err(Error::InvalidParameter("inversion truncation F must be >= 1".into()));
    }
    let norm = periodized_autocorrelation_unchecked(0.0, params.sigma);
    Ok(measure
        .atoms()
        .map(|(tl, a)| {
            let d = t - tl;
            a * periodized_autocorrelation_unchecked(d, params.sigma) * dirichlet_mean(d, truncation)
        })
        .sum::<Complex64>()
        / norm)
}

/// `(1/(2F+1)) Σ_{|k|≤F} e^{2πikx} = sin((2F+1)πx) / ((2F+1) sin(πx))`.
pub fn dirichlet_mean(x: f64, truncation: usize) -> f64 {
    let x = x - x.round();
    let len = (2 * truncation + 1) as f64;
    let s = (PI * x).sin();
    if s.abs() < 1e-8 {
        // Only x = 0 reaches here after wrapping; the ratio tends to 1.
        let k = truncation as f64;
        1.0 - (PI * x).powi(2) * (4.0 * k * (k + 1.0)) / 6.0
    } else {
        (len * PI * x).sin() / (len * s)
    }
}
