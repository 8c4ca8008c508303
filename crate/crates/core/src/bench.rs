//! Monte Carlo success-rate sweeps comparing recovery from STFT
//! measurements with recovery from plain Fourier moments.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{min_separation, torus_distance, WindowParams};
use crate::measure::{DiscreteMeasure, Domain};
use crate::solver::{recover, recover_fourier, SolverOptions};
use crate::stft::{fourier_moments, stft_coefficients};

/// Relative support error at or below which a trial counts as a success.
pub const SUCCESS_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Stft,
    Fourier,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Stft => "stft",
            Mode::Fourier => "fourier",
        }
    }

    fn code(self) -> u64 {
        match self {
            Mode::Stft => 1,
            Mode::Fourier => 2,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stft" => Ok(Mode::Stft),
            "fourier" => Ok(Mode::Fourier),
            other => Err(Error::InvalidParameter(format!(
                "unknown mode '{other}' (expected stft or fourier)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub delta: f64,
    pub mode: Mode,
    pub seed: u64,
    pub success: bool,
    /// Relative ℓ² support error; infinite when the atom counts differ or recovery failed.
    pub support_error: f64,
    /// Number of atoms in the sampled measure.
    pub atoms: usize,
    /// Zero unless timing is enabled in the config.
    pub wall_time: f64,
    /// Why the trial failed before scoring, if it did.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub delta: f64,
    pub mode: Mode,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Minimum separations to test, in time units, increasing.
    pub delta_grid: Vec<f64>,
    pub trials_per_point: usize,
    pub fc: usize,
    #[serde(rename = "n")]
    pub n_trunc: usize,
    pub sigma: f64,
    pub master_seed: u64,
    pub modes: Vec<Mode>,
    /// Record per-trial wall time. Off by default so that outputs are reproducible.
    pub record_timing: bool,
    pub solver: SolverOptions,
}

impl Default for SweepConfig {
    /// `σ = 1/(4 f_c)` with `N` large enough that `g_N/g_0 ≤ 1e-6`, `f_c = 50`.
    fn default() -> Self {
        let fc = 50;
        let params = WindowParams::recovery_regime(fc).expect("valid preset");
        Self {
            delta_grid: delta_grid_from_fc(&[1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4], fc),
            trials_per_point: 100,
            fc,
            n_trunc: params.n_trunc,
            sigma: params.sigma,
            master_seed: 0,
            modes: vec![Mode::Stft, Mode::Fourier],
            record_timing: false,
            solver: SolverOptions::default(),
        }
    }
}

/// Converts values of `Δ·f_c` to separations.
pub fn delta_grid_from_fc(products: &[f64], fc: usize) -> Vec<f64> {
    products.iter().map(|p| p / fc as f64).collect()
}

impl SweepConfig {
    /// `f_c = 50`, `N = 50`, `σ = 1/200`: the window series is cut at
    /// `g_50/g_0 ≈ 0.68`, but measurements and solver share the same truncation.
    pub fn paper_figure() -> Self {
        Self {
            n_trunc: 50,
            sigma: 1.0 / 200.0,
            ..Self::default()
        }
    }

    pub fn window(&self) -> Result<WindowParams> {
        WindowParams::new(self.sigma, self.fc, self.n_trunc)
    }

    pub fn validate(&self) -> Result<()> {
        self.window()?;
        self.solver.validate()?;
        if self.trials_per_point == 0 {
            return Err(Error::InvalidParameter("trials_per_point must be >= 1".into()));
        }
        if self.delta_grid.is_empty() {
            return Err(Error::InvalidParameter("delta grid is empty".into()));
        }
        if self.delta_grid.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidParameter("delta values must be positive".into()));
        }
        if self.delta_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("delta grid must be strictly increasing".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::InvalidParameter("no recovery modes selected".into()));
        }
        if self.modes.iter().enumerate().any(|(i, m)| self.modes[..i].contains(m)) {
            return Err(Error::InvalidParameter("modes must be distinct".into()));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one trial: SplitMix64 folded over master seed, Δ index, trial index and mode.
pub fn trial_seed(master_seed: u64, delta_index: usize, trial_index: usize, mode: Mode) -> u64 {
    [delta_index as u64, trial_index as u64, mode.code()]
        .iter()
        .fold(splitmix64(master_seed), |acc, &v| splitmix64(acc ^ v))
}

/// Draws `S = ⌊1/(2Δ)⌋` atoms at `t_ℓ = 2ℓΔ + r_ℓ`, `ℓ = 0..S-1`, with
/// `r_ℓ ~ U[0, Δ]` and real and imaginary amplitude parts `~ U[0, 1000]`.
pub fn sample_instance<R: Rng + ?Sized>(delta: f64, rng: &mut R) -> Result<DiscreteMeasure> {
    if !(delta.is_finite() && delta > 0.0 && delta <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "separation {delta} must lie in (0, 0.5] to fit at least one atom"
        )));
    }
    let count = (1.0 / (2.0 * delta)).floor() as usize;
    let mut atoms = Vec::with_capacity(count);
    for l in 0..count {
        let t = 2.0 * l as f64 * delta + rng.random::<f64>() * delta;
        let mut a = Complex64::new(0.0, 0.0);
        while a.norm() == 0.0 {
            a = Complex64::new(rng.random::<f64>() * 1000.0, rng.random::<f64>() * 1000.0);
        }
        atoms.push((t, a));
    }
    let measure = DiscreteMeasure::from_atoms(Domain::Torus, atoms)?;
    let sep = min_separation(measure.support(), Domain::Torus);
    if sep < delta {
        return Err(Error::InvalidMeasure(format!(
            "sampled separation {sep} is below {delta}"
        )));
    }
    Ok(measure)
}

/// `‖T̂ - T‖₂ / ‖T‖₂` with wrapped residuals, after aligning the sorted
/// estimate with the truth by the cyclic shift that brings points closest.
/// Infinite when the sizes differ.
pub fn support_error(truth: &[f64], estimate: &[f64]) -> f64 {
    if truth.len() != estimate.len() {
        return f64::INFINITY;
    }
    if truth.is_empty() {
        return 0.0;
    }
    let s = truth.len();
    let best = (0..s)
        .map(|shift| {
            truth
                .iter()
                .enumerate()
                .map(|(l, &t)| torus_distance(t, estimate[(l + shift) % s]).powi(2))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    let norm: f64 = truth.iter().map(|t| t * t).sum();
    (best / norm).sqrt()
}

/// Samples one instance, recovers it in `mode`, and scores the support.
pub fn run_trial(delta: f64, mode: Mode, config: &SweepConfig, seed: u64) -> TrialRecord {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut record = TrialRecord {
        delta,
        mode,
        seed,
        success: false,
        support_error: f64::INFINITY,
        atoms: 0,
        wall_time: 0.0,
        failure: None,
    };
    let outcome = (|| -> Result<DiscreteMeasure> {
        let measure = sample_instance(delta, &mut rng)?;
        record.atoms = measure.len();
        let result = match mode {
            Mode::Stft => recover(&stft_coefficients(&measure, &config.window()?)?, &config.solver)?,
            Mode::Fourier => recover_fourier(&fourier_moments(&measure, config.fc)?, &config.solver)?,
        };
        record.support_error = support_error(measure.support(), result.measure.support());
        Ok(measure)
    })();
    if let Err(e) = outcome {
        record.failure = Some(e.to_string());
    }
    record.success = record.support_error <= SUCCESS_THRESHOLD;
    if config.record_timing {
        record.wall_time = start.elapsed().as_secs_f64();
    }
    record
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<AggregateRow>,
}

/// Runs every `(Δ, mode, trial)` of the config on the current rayon pool.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    run_sweep_with(config, |_| Ok(()))
}

/// Like [`run_sweep`], handing each completed Δ point to `sink` in grid order.
pub fn run_sweep_with<F>(config: &SweepConfig, mut sink: F) -> Result<SweepResult>
where
    F: FnMut(&[TrialRecord]) -> Result<()>,
{
    config.validate()?;
    let mut records = Vec::new();
    let mut aggregates = Vec::new();
    for (di, &delta) in config.delta_grid.iter().enumerate() {
        let tasks: Vec<(Mode, usize)> = config
            .modes
            .iter()
            .flat_map(|&m| (0..config.trials_per_point).map(move |i| (m, i)))
            .collect();
        let point: Vec<TrialRecord> = tasks
            .par_iter()
            .map(|&(mode, i)| run_trial(delta, mode, config, trial_seed(config.master_seed, di, i, mode)))
            .collect();
        for &mode in &config.modes {
            let trials = point.iter().filter(|r| r.mode == mode).count();
            let successes = point.iter().filter(|r| r.mode == mode && r.success).count();
            aggregates.push(AggregateRow {
                delta,
                mode,
                trials,
                successes,
                rate: successes as f64 / trials as f64,
            });
        }
        log::info!(
            "delta {delta}: {}",
            aggregates[aggregates.len() - config.modes.len()..]
                .iter()
                .map(|a| format!("{} {}/{}", a.mode, a.successes, a.trials))
                .collect::<Vec<_>>()
                .join(", ")
        );
        sink(&point)?;
        records.extend(point);
    }
    Ok(SweepResult { records, aggregates })
}

pub const TRIALS_HEADER: &str = "delta,mode,seed,success,support_error,atoms,wall_time_s";
pub const AGGREGATE_HEADER: &str = "delta,mode,trials,successes,rate";

pub fn trial_rows(records: &[TrialRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{:e},{},{}",
            r.delta, r.mode, r.seed, r.success, r.support_error, r.atoms, r.wall_time
        );
    }
    out
}

pub fn trials_csv(records: &[TrialRecord]) -> String {
    format!("{TRIALS_HEADER}\n{}", trial_rows(records))
}

pub fn aggregates_csv(rows: &[AggregateRow]) -> String {
    let mut out = format!("{AGGREGATE_HEADER}\n");
    for a in rows {
        let _ = writeln!(out, "{},{},{},{},{}", a.delta, a.mode, a.trials, a.successes, a.rate);
    }
    out
}

/// Success rate against `Δ·f_c`, one polyline per mode, with reference lines
/// at `Δ·f_c = 1` and `2` when they fall inside the plotted range.
pub fn render_svg(rows: &[AggregateRow], fc: usize) -> Result<String> {
    let mut modes: Vec<Mode> = Vec::new();
    for r in rows {
        if !modes.contains(&r.mode) {
            modes.push(r.mode);
        }
    }
    if modes.is_empty() {
        return Err(Error::InvalidParameter("nothing to plot: no aggregate rows".into()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.delta * fc as f64).collect();
    let mut x_min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut x_max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if x_max <= x_min {
        x_min -= 0.5;
        x_max += 0.5;
    }

    let (width, height) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 30.0, 60.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let px = |x: f64| left + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| top + (1.0 - y) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#
    );
    // axes
    let _ = writeln!(
        svg,
        r#"<path d="M {left} {top} L {left} {y0} L {x1} {y0}" fill="none" stroke="black"/>"#,
        y0 = top + plot_h,
        x1 = left + plot_w
    );
    for i in 0..=5 {
        let y = i as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.1}</text>"#,
            left - 6.0,
            py(y) + 4.0
        );
    }
    for i in 0..=4 {
        let x = x_min + (x_max - x_min) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x:.2}</text>"#,
            px(x),
            top + plot_h + 18.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">Δ·f_c</text>"#,
        left + plot_w / 2.0,
        height - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">success rate</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    for reference in [1.0, 2.0] {
        if (x_min..=x_max).contains(&reference) {
            let _ = writeln!(
                svg,
                r#"<line class="reference" x1="{x:.1}" y1="{top}" x2="{x:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="4 4"/>"#,
                top + plot_h,
                x = px(reference)
            );
        }
    }
    let colors = ["#1f77b4", "#d62728"];
    for (i, &mode) in modes.iter().enumerate() {
        let points: Vec<String> = rows
            .iter()
            .filter(|r| r.mode == mode)
            .map(|r| format!("{:.2},{:.2}", px(r.delta * fc as f64), py(r.rate)))
            .collect();
        let color = colors[i % colors.len()];
        let _ = writeln!(
            svg,
            r#"<polyline class="mode-{mode}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        );
        let ly = top + 20.0 + 20.0 * i as f64;
        let lx = left + plot_w + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            lx + 25.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 32.0,
            ly + 4.0,
            legend(mode)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn legend(mode: Mode) -> &'static str {
    match mode {
        Mode::Stft => "STFT",
        Mode::Fourier => "Fourier",
    }
}

/// Renders [`render_svg`] and writes it atomically to `path`.
pub fn emit_plot(rows: &[AggregateRow], fc: usize, path: &Path) -> Result<()> {
    let svg = render_svg(rows, fc)?;
    crate::io::write_atomic(path, svg.as_bytes())
}
