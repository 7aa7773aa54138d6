//! Scenario configuration: geometry, radio parameters, noise levels, and
//! Monte-Carlo controls, loadable from a JSON file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One path-loss segment: the exponent applies up to `max_distance_m`.
/// The final segment is unbounded (`max_distance_m: null`).
///
/// Boundary convention: the first segment covers distances strictly below its
/// bound; every later segment includes its bound. For the bundled urban-micro
/// parameters this yields exponent 0 for d < 10 m, 2 for 10 m <= d <= 45 m,
/// and 6.7 beyond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathlossSegment {
    pub max_distance_m: Option<f64>,
    pub exponent: f64,
}

/// Evaluation mode for the piecewise path-loss curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathlossMode {
    /// Apply each segment's exponent directly to log10(d); discontinuous at
    /// segment boundaries.
    Literal,
    /// Dual-slope variant that matches literal mode on the first sloped
    /// segment and chains the remaining segments continuously.
    Continuous,
}

/// Layout of the training users over the service area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainLayout {
    #[serde(rename = "grid")]
    Grid,
    #[serde(rename = "uniform-random")]
    UniformRandom,
}

/// Full experiment description. Field names match the configuration file
/// schema one-to-one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Service-area width in meters.
    pub area_width_m: f64,
    /// Service-area height in meters.
    pub area_height_m: f64,
    /// Number of RRH antennas M.
    pub num_rrh: usize,
    /// Number of training user locations.
    pub num_train: usize,
    /// Number of test users.
    pub num_test: usize,
    /// Path-loss reference distance d0 in meters.
    pub ref_distance: f64,
    /// Path loss at the reference distance, in dB.
    pub ref_loss: f64,
    /// Piecewise path-loss exponents, ordered by distance.
    pub pathloss_breakpoints: Vec<PathlossSegment>,
    /// Uplink transmit power in dBm.
    pub tx_power: f64,
    /// System noise power in dBm.
    pub noise_power: f64,
    /// Receiver sensitivity in dBm; weaker test RSS is replaced by the noise
    /// power.
    pub rx_sensitivity: f64,
    /// Shadowing variances (dB^2) swept by the experiment harness.
    pub shadowing_variances: Vec<f64>,
    /// Known measurement-error variance of the coordinate labels (m^2).
    pub coord_noise_var: f64,
    /// Monte-Carlo trials per (M, shadowing variance) cell.
    pub mc_trials: usize,
    /// Monte-Carlo samples S drawn per test user by the noisy-input predictor.
    pub mc_samples: usize,
    /// Master seed; every random stream in the pipeline derives from it.
    pub master_seed: u64,
    pub pathloss_mode: PathlossMode,
    pub train_layout: TrainLayout,
}

impl ScenarioConfig {
    /// Received power at the reference distance, in dBm.
    pub fn p0_dbm(&self) -> f64 {
        self.tx_power + self.ref_loss
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0; // false for NaN as well
        if !positive(self.area_width_m) || !positive(self.area_height_m) {
            return Err(Error::config("area dimensions must be positive"));
        }
        if self.num_rrh < 1 || self.num_train < 1 || self.num_test < 1 {
            return Err(Error::config("num_rrh, num_train, num_test must be >= 1"));
        }
        if self.mc_trials < 1 || self.mc_samples < 1 {
            return Err(Error::config("mc_trials and mc_samples must be >= 1"));
        }
        if !positive(self.ref_distance) {
            return Err(Error::config("ref_distance must be positive"));
        }
        if self.rx_sensitivity < self.noise_power {
            return Err(Error::config(
                "rx_sensitivity must not be below noise_power",
            ));
        }
        if self.shadowing_variances.is_empty() {
            return Err(Error::config("shadowing_variances must be non-empty"));
        }
        if !self.shadowing_variances.iter().all(|v| *v >= 0.0) {
            return Err(Error::config("shadowing_variances must all be >= 0"));
        }
        if self.coord_noise_var.is_nan() || self.coord_noise_var < 0.0 {
            return Err(Error::config("coord_noise_var must be >= 0"));
        }
        self.validate_breakpoints()
    }

    fn validate_breakpoints(&self) -> Result<()> {
        let segs = &self.pathloss_breakpoints;
        if segs.is_empty() {
            return Err(Error::config("pathloss_breakpoints must be non-empty"));
        }
        let mut prev = 0.0_f64;
        for (i, seg) in segs.iter().enumerate() {
            if !seg.exponent.is_finite() {
                return Err(Error::config("path-loss exponent must be finite"));
            }
            let last = i + 1 == segs.len();
            match seg.max_distance_m {
                Some(d) => {
                    if last {
                        return Err(Error::config(
                            "final path-loss segment must be unbounded (max_distance_m: null)",
                        ));
                    }
                    if d.is_nan() || d <= prev {
                        return Err(Error::config(
                            "pathloss_breakpoints must be strictly increasing in distance",
                        ));
                    }
                    prev = d;
                }
                None => {
                    if !last {
                        return Err(Error::config(
                            "only the final path-loss segment may be unbounded",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Load and validate a configuration from a JSON file.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let cfg: ScenarioConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    /// Urban-micro desk-scale scenario: 3GPP UMi path loss, 200 m x 200 m
    /// area, 400 grid training locations, 25 test users, 50 trials.
    pub fn urban_micro_desk() -> Self {
        ScenarioConfig {
            area_width_m: 200.0,
            area_height_m: 200.0,
            num_rrh: 30,
            num_train: 400,
            num_test: 25,
            ref_distance: 10.0,
            ref_loss: -47.5,
            pathloss_breakpoints: vec![
                PathlossSegment {
                    max_distance_m: Some(10.0),
                    exponent: 0.0,
                },
                PathlossSegment {
                    max_distance_m: Some(45.0),
                    exponent: 2.0,
                },
                PathlossSegment {
                    max_distance_m: None,
                    exponent: 6.7,
                },
            ],
            tx_power: 21.0,
            noise_power: -107.5,
            rx_sensitivity: -106.5,
            shadowing_variances: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            coord_noise_var: 1.0,
            mc_trials: 50,
            mc_samples: 10,
            master_seed: 1729,
            // The continuous dual-slope curve crosses the receiver
            // sensitivity inside the service area, so thresholding depends
            // on the shadowing draw rather than on geometry alone.
            pathloss_mode: PathlossMode::Continuous,
            train_layout: TrainLayout::Grid,
        }
    }

    /// Full-scale variant of [`ScenarioConfig::urban_micro_desk`] with 200
    /// Monte-Carlo trials per cell.
    pub fn urban_micro_full() -> Self {
        ScenarioConfig {
            mc_trials: 200,
            ..Self::urban_micro_desk()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_config_is_valid() {
        ScenarioConfig::urban_micro_desk().validate().unwrap();
        ScenarioConfig::urban_micro_full().validate().unwrap();
    }

    #[test]
    fn rejects_sensitivity_below_noise() {
        let cfg = ScenarioConfig {
            rx_sensitivity: -110.0,
            ..ScenarioConfig::urban_micro_desk()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_unordered_breakpoints() {
        let mut cfg = ScenarioConfig::urban_micro_desk();
        cfg.pathloss_breakpoints[1].max_distance_m = Some(5.0);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bounded_final_segment() {
        let mut cfg = ScenarioConfig::urban_micro_desk();
        cfg.pathloss_breakpoints.last_mut().unwrap().max_distance_m = Some(500.0);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_zero_trials() {
        let cfg = ScenarioConfig {
            mc_trials: 0,
            ..ScenarioConfig::urban_micro_desk()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        let cfg = ScenarioConfig::urban_micro_desk();
        cfg.to_json_file(&path).unwrap();
        let back = ScenarioConfig::from_json_file(&path).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn json_field_names_match_schema() {
        let text = serde_json::to_string(&ScenarioConfig::urban_micro_desk()).unwrap();
        for field in [
            "area_width_m",
            "area_height_m",
            "num_rrh",
            "num_train",
            "num_test",
            "ref_distance",
            "ref_loss",
            "pathloss_breakpoints",
            "tx_power",
            "noise_power",
            "rx_sensitivity",
            "shadowing_variances",
            "coord_noise_var",
            "mc_trials",
            "mc_samples",
            "master_seed",
            "pathloss_mode",
            "train_layout",
        ] {
            assert!(text.contains(&format!("\"{field}\"")), "missing {field}");
        }
        assert!(text.contains("\"continuous\""));
        assert!(text.contains("\"grid\""));
        let literal = ScenarioConfig {
            pathloss_mode: PathlossMode::Literal,
            ..ScenarioConfig::urban_micro_desk()
        };
        assert!(serde_json::to_string(&literal)
            .unwrap()
            .contains("\"literal\""));
    }
}
