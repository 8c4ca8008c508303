use super::SolverOptions;
use crate::kernels::torus_distance;
use crate::trigpoly::TrigPoly;

/// Grid density used to locate peaks of `|p|²`, in samples per unit degree.
const SEARCH_DENSITY: usize = 32;

/// Fraction of the search grid above the selection level beyond which the
/// dual polynomial is treated as flat.
const FLATNESS_FRACTION: f64 = 0.1;

/// Points where a dual polynomial reaches modulus one.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SupportEstimate {
    /// Sorted torus coordinates.
    pub points: Vec<f64>,
    /// `|p|` at each point.
    pub peaks: Vec<f64>,
    /// At least one point fell back to its grid location after Newton failed.
    pub low_confidence: bool,
    /// `|p|` stays near one on a whole interval; no isolated support exists.
    pub degenerate: bool,
}

/// Locates the isolated maxima of `|p|` that reach `1 - selection_threshold`.
pub fn extract_support(p: &TrigPoly, options: &SolverOptions) -> SupportEstimate {
    if p.is_zero() {
        return SupportEstimate::default();
    }
    let level = (1.0 - options.selection_threshold).powi(2);
    let len = (SEARCH_DENSITY * p.degree().max(1)).max(16);
    let above = p.grid_values(len).iter().filter(|v| v.norm_sqr() >= level).count();
    if above as f64 > FLATNESS_FRACTION * len as f64 {
        return SupportEstimate {
            degenerate: true,
            ..SupportEstimate::default()
        };
    }

    let mut candidates: Vec<(f64, f64, bool)> = p
        .local_maxima(SEARCH_DENSITY, options.newton_max_steps)
        .into_iter()
        .filter(|&(_, v, _)| v * v >= level)
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Merge neighbours closer than the de-duplication radius, keeping the taller peak.
    let radius = 1.0 / (8.0 * p.degree().max(1) as f64);
    let mut kept: Vec<(f64, f64, bool)> = Vec::with_capacity(candidates.len());
    for c in candidates {
        match kept.last_mut() {
            Some(last) if torus_distance(last.0, c.0) < radius => {
                if c.1 > last.1 {
                    *last = c;
                }
            }
            _ => kept.push(c),
        }
    }
    if kept.len() > 1 {
        let first = kept[0];
        let last = kept[kept.len() - 1];
        if torus_distance(first.0, last.0) < radius {
            if last.1 > first.1 {
                kept[0] = last;
            }
            kept.pop();
            kept.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
    }

    SupportEstimate {
        low_confidence: kept.iter().any(|c| !c.2),
        points: kept.iter().map(|c| c.0).collect(),
        peaks: kept.iter().map(|c| c.1).collect(),
        degenerate: false,
    }
}
