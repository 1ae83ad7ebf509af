//! Experiment and analysis configuration (TOML or JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldParams, Rect};
use crate::inference::{FitOptions, FixedMask, LaplaceOptions, ThetaFull};
use crate::inference::optimize::OptimOptions;
use crate::movement::MovementParams;
use crate::score::RmspeConvention;

fn default_domain() -> Rect {
    Rect { x_min: -150.0, x_max: 150.0, y_min: -150.0, y_max: 150.0 }
}

fn default_field() -> FieldParams {
    FieldParams { mu: 5.0, tau2: 0.1, kappa: 2, phi: 25.0, sigma2: 1.5 }
}

fn default_movement() -> MovementParams {
    MovementParams { alpha: 100.0, c: 0.0, sigma_beta: 0.1, sigma: [3.0, 3.0], beta0: -1.5 }
}

/// Track-generation protocol without the domain (which lives alongside).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub n_raw: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub lambda: f64,
    pub n_tracks: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig { n_raw: 360, burn_in: 60, thin: 3, lambda: 10.0, n_tracks: 3 }
    }
}

/// Numerical options shared by both fits.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub outer_tol: f64,
    pub outer_max_evals: usize,
    pub fd_step: f64,
    pub hessian_fd_step: f64,
    pub compute_covariance: bool,
    /// Prior standard deviation of each track's first behavioural state.
    pub beta0_sd: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            inner_tol: 1e-8,
            inner_max_iter: 100,
            outer_tol: 1e-6,
            outer_max_evals: 500,
            fd_step: 1e-4,
            hessian_fd_step: 0.05,
            compute_covariance: true,
            beta0_sd: 1.0,
        }
    }
}

impl FitConfig {
    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            laplace: LaplaceOptions {
                inner_tol: self.inner_tol,
                inner_max_iter: self.inner_max_iter,
            },
            outer: OptimOptions {
                tol_rel: self.outer_tol,
                max_evals: self.outer_max_evals,
                fd_step: self.fd_step,
            },
            compute_covariance: self.compute_covariance,
            hessian_fd_step: self.hessian_fd_step,
        }
    }
}

/// Full simulation-study configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub domain: Rect,
    pub field: FieldParams,
    pub movement: MovementParams,
    pub protocol: ProtocolConfig,
    /// Vertices per side of the square generation grid on the domain.
    pub generation_grid: usize,
    /// Extra generation cells beyond the domain so gradient stencils stay
    /// inside the hull under boundary reflection.
    pub generation_apron_cells: usize,
    /// Vertices per side of the square fitting grid core on the domain.
    pub fitting_grid: usize,
    /// Mesh extension beyond the domain for the fitting grid; when absent,
    /// twice the generating scale.
    pub fitting_margin: Option<f64>,
    /// Vertices per side of the square prediction lattice on the domain.
    pub prediction_grid: usize,
    pub replicate_count: usize,
    pub seed_base: u64,
    pub fixed: FixedMask,
    pub rmspe_convention: RmspeConvention,
    pub fit: FitConfig,
    /// Gradient step for fitting; defaults to the fitting-grid cell width.
    pub gradient_step: Option<f64>,
    /// Optional explicit initial parameters for the movement-aware fit;
    /// when absent, initials come from the standard fit plus track moments.
    pub init: Option<ThetaFull>,
    /// Worker threads for the replicate pool (0 = one per CPU).
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: default_domain(),
            field: default_field(),
            movement: default_movement(),
            protocol: ProtocolConfig::default(),
            generation_grid: 51,
            generation_apron_cells: 2,
            fitting_grid: 21,
            fitting_margin: None,
            prediction_grid: 26,
            replicate_count: 20,
            seed_base: 1,
            fixed: FixedMask::default(),
            rmspe_convention: RmspeConvention::Paper,
            fit: FitConfig::default(),
            gradient_step: None,
            init: None,
            threads: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicate_count == 0 {
            return Err(Error::Config("replicate_count must be at least 1".into()));
        }
        if self.generation_grid < 2 || self.fitting_grid < 2 || self.prediction_grid < 2 {
            return Err(Error::Config("grids need at least 2 vertices per side".into()));
        }
        self.field.validate()?;
        self.field.require_kappa2()?;
        self.movement.validate()?;
        if !(self.field.tau2 > 0.0) {
            return Err(Error::Config(
                "the joint likelihood needs tau2 > 0; give the nugget its known value".into(),
            ));
        }
        Ok(())
    }

    pub fn fitting_margin_value(&self) -> f64 {
        self.fitting_margin.unwrap_or(2.0 * self.field.phi)
    }
}

/// Configuration of a data analysis over an external observation file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyzeConfig {
    /// Observation CSV (`track_id,timestamp,longitude,latitude,response`).
    pub input: PathBuf,
    pub zone: u32,
    /// Projection scale into abstract units. No default: its magnitude
    /// determines every distance in the analysis.
    pub scale: f64,
    #[serde(default = "default_true")]
    pub south: bool,
    /// Observations kept per track in each replicate.
    pub per_track: usize,
    #[serde(default = "default_replicates")]
    pub replicate_count: usize,
    #[serde(default = "default_seed")]
    pub seed_base: u64,
    /// Known nugget variance (response units squared).
    pub tau2: f64,
    /// Field offset constant for the foraging term.
    #[serde(default)]
    pub c: f64,
    /// Prediction lattice: vertices per side over the track bounding box
    /// (padded by `prediction_pad` in abstract units).
    #[serde(default = "default_pred_grid")]
    pub prediction_grid: usize,
    #[serde(default)]
    pub prediction_pad: f64,
    /// Fitting lattice core vertices per side over the track bounding box.
    #[serde(default = "default_fit_grid")]
    pub fitting_grid: usize,
    /// Mesh margin beyond the fitting core; when absent, twice the initial
    /// scale estimate.
    #[serde(default)]
    pub fitting_margin: Option<f64>,
    #[serde(default)]
    pub fixed: FixedMask,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub rmspe_convention: RmspeConvention,
    /// Optional truth grid CSV (`x,y,value`) for scoring predictions.
    #[serde(default)]
    pub truth_csv: Option<PathBuf>,
    /// Quantile levels for the prediction-difference maps.
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    #[serde(default)]
    pub threads: usize,
}

fn default_true() -> bool {
    true
}
fn default_replicates() -> usize {
    50
}
fn default_seed() -> u64 {
    1
}
fn default_pred_grid() -> usize {
    26
}
fn default_fit_grid() -> usize {
    21
}
fn default_quantiles() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}

impl AnalyzeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_track < 3 {
            return Err(Error::Config("per_track must be at least 3".into()));
        }
        if self.replicate_count == 0 {
            return Err(Error::Config("replicate_count must be at least 1".into()));
        }
        if !(self.tau2 > 0.0) {
            return Err(Error::Config("tau2 must be positive".into()));
        }
        for &q in &self.quantiles {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::Config(format!("quantile level {q} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Reads a TOML (default) or JSON config by extension.
pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().map(|e| e == "json").unwrap_or(false);
    if is_json {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_study_protocol() {
        let c = ExperimentConfig::default();
        assert_eq!(c.protocol.n_raw, 360);
        assert_eq!(c.protocol.burn_in, 60);
        assert_eq!(c.protocol.thin, 3);
        assert_eq!(c.protocol.n_tracks, 3);
        assert_eq!(c.generation_grid, 51);
        assert_eq!(c.prediction_grid, 26);
        assert_eq!(c.fitting_margin_value(), 50.0);
        c.validate().unwrap();
    }

    #[test]
    fn toml_and_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("exp.toml");
        std::fs::write(
            &toml_path,
            "replicate_count = 3\nseed_base = 9\n[field]\nmu = 4.0\ntau2 = 0.2\nkappa = 2\nphi = 20.0\nsigma2 = 1.0\n",
        )
        .unwrap();
        let c: ExperimentConfig = load_config(&toml_path).unwrap();
        assert_eq!(c.replicate_count, 3);
        assert_eq!(c.field.mu, 4.0);
        assert_eq!(c.protocol.n_raw, 360); // default preserved

        let json_path = dir.path().join("exp.json");
        std::fs::write(&json_path, serde_json::to_string(&c).unwrap()).unwrap();
        let c2: ExperimentConfig = load_config(&json_path).unwrap();
        assert_eq!(c2.replicate_count, 3);
        assert_eq!(c2.field.phi, 20.0);
    }

    #[test]
    fn bad_config_is_config_error() {
        let mut c = ExperimentConfig::default();
        c.replicate_count = 0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ExperimentConfig::default();
        c.field.tau2 = 0.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
