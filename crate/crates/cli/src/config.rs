use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use stftsr::bench::{delta_grid_from_fc, SweepConfig};
use stftsr::solver::SolverOptions;

use crate::{Failure, LogLevel};

/// Contents of the `--config` TOML file. Every key is optional; command-line
/// flags and environment variables take precedence.
///
/// ```toml
/// seed = 7
/// threads = 4
/// output_dir = "out"
/// log_level = "info"
///
/// [solver]
/// grid_oversampling = 16
///
/// [bench]
/// preset = "paper-figure"
/// delta_fc_grid = [1.0, 1.5, 2.0]
/// trials_per_point = 20
/// ```
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub log_level: Option<LogLevel>,
    pub solver: Option<SolverOptions>,
    bench: Option<toml::Table>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::input(format!("invalid config {}: {e}", path.display())))
    }

    /// Sweep settings: the chosen preset overlaid with the `[bench]` table.
    /// `paper_figure` from the command line overrides a preset named in the file.
    pub fn sweep(&self, paper_figure: Option<bool>) -> Result<SweepConfig, Failure> {
        let mut table = self.bench.clone().unwrap_or_default();
        let preset = table.remove("preset");
        let from_file = match preset.as_ref().map(|v| v.as_str()) {
            None => None,
            Some(Some("strict")) => Some(false),
            Some(Some("paper-figure")) => Some(true),
            Some(other) => {
                return Err(Failure::input(format!(
                    "unknown bench preset {other:?} (expected \"strict\" or \"paper-figure\")"
                )))
            }
        };
        let mut config = if paper_figure.or(from_file).unwrap_or(false) {
            SweepConfig::paper_figure()
        } else {
            SweepConfig::default()
        };
        if let Some(solver) = &self.solver {
            config.solver = solver.clone();
        }
        let products = table.remove("delta_fc_grid");
        let mut base =
            toml::Table::try_from(&config).map_err(|e| Failure::input(format!("cannot encode sweep preset: {e}")))?;
        for (k, v) in table {
            base.insert(k, v);
        }
        let mut config: SweepConfig = base
            .try_into()
            .map_err(|e| Failure::input(format!("invalid [bench] section: {e}")))?;
        if let Some(products) = products {
            let values: Vec<f64> = products
                .try_into()
                .map_err(|e| Failure::input(format!("delta_fc_grid must be a list of numbers: {e}")))?;
            config.delta_grid = delta_grid_from_fc(&values, config.fc);
        }
        Ok(config)
    }
}
