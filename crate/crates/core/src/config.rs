//! Scenario and calibration files (JSON).

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::PeakDetector;
use crate::estimator::CorrectionContext;
use crate::geometry::{
    calibrate_pixel_scale, estimate_homography, GeometryError, Homography, PixelPoint, PixelScale,
    PointPair,
};
use crate::sim::{SensorModel, SpeedProfile};
use crate::track::{CameraGeometry, Route, SleeperLattice};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.display().to_string(),
        source,
    })
}

/// Route, sleeper lattice and camera section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteConfig {
    pub stations_m: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tunnels_m: Vec<[f64; 2]>,
    pub tau_m: f64,
    pub phase_m: f64,
    #[serde(rename = "d_B_m")]
    pub blind_m: f64,
    pub visible_m: f64,
    pub strip_px: usize,
    pub px_per_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    /// One value for every interval, or one per interval.
    pub cruise_mps: Vec<f64>,
    pub accel_mps2: f64,
    pub decel_mps2: f64,
    pub dwell_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RasterConfig {
    pub enabled: bool,
    #[serde(default = "RasterConfig::default_noise")]
    pub noise_sigma: f64,
    /// Render every n-th frame only.
    #[serde(default = "RasterConfig::default_every")]
    pub every_n_frames: usize,
}

impl RasterConfig {
    fn default_noise() -> f64 {
        0.05
    }

    fn default_every() -> usize {
        1
    }
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            noise_sigma: Self::default_noise(),
            every_n_frames: Self::default_every(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub xi: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { xi: 0.5 }
    }
}

/// The full scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub route: RouteConfig,
    pub profile: ProfileConfig,
    pub sensor: SensorModel,
    pub dt_s: f64,
    #[serde(default)]
    pub raster: RasterConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub detector: PeakDetector,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub route: Route,
    pub lattice: SleeperLattice,
    pub cam: CameraGeometry,
    pub profile: SpeedProfile,
    pub sensor: SensorModel,
    pub dt: f64,
    pub raster: RasterConfig,
    pub ctx: CorrectionContext,
    pub detector: PeakDetector,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        read_json(path)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            path: "<inline>".into(),
            source,
        })
    }

    pub fn build(&self) -> Result<Scenario, ConfigError> {
        let r = &self.route;
        let total = r.total_m.unwrap_or_else(|| r.stations_m.last().copied().unwrap_or(0.0));
        let tunnels = r.tunnels_m.iter().map(|t| (t[0], t[1])).collect();
        let route = Route::new(r.stations_m.clone(), total, tunnels).map_err(invalid)?;
        let lattice = SleeperLattice::new(r.tau_m, r.phase_m).map_err(invalid)?;
        let scale = PixelScale::new(r.px_per_m).map_err(invalid)?;
        let cam = CameraGeometry::new(r.blind_m, r.visible_m, scale, r.strip_px).map_err(invalid)?;

        let p = &self.profile;
        let cruise = match p.cruise_mps.len() {
            1 => vec![p.cruise_mps[0]; route.interval_count()],
            n if n == route.interval_count() => p.cruise_mps.clone(),
            n => {
                return Err(ConfigError::Invalid(format!(
                    "cruise_mps has {n} entries for {} intervals",
                    route.interval_count()
                )))
            }
        };
        let profile = SpeedProfile::new(cruise, p.accel_mps2, p.decel_mps2, p.dwell_s).map_err(invalid)?;
        self.sensor.validate().map_err(invalid)?;

        if !(self.dt_s.is_finite() && self.dt_s > 0.0) {
            return Err(ConfigError::Invalid(format!("dt_s {} must be > 0", self.dt_s)));
        }
        if self.raster.every_n_frames == 0 || !(self.raster.noise_sigma >= 0.0) {
            return Err(ConfigError::Invalid("raster settings out of range".into()));
        }
        let d = &self.detector;
        if !(d.threshold > 0.0 && d.threshold < 1.0) || !(d.box_side_px > 0.0) {
            return Err(ConfigError::Invalid("detector settings out of range".into()));
        }
        let ctx = CorrectionContext::new(r.tau_m, r.blind_m, scale, self.estimator.xi).map_err(invalid)?;
        Ok(Scenario {
            route,
            lattice,
            cam,
            profile,
            sensor: self.sensor.clone(),
            dt: self.dt_s,
            raster: self.raster.clone(),
            ctx,
            detector: *d,
        })
    }
}

/// IPM calibration: four front/aerial pairs plus a track-axis baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    /// `[x_front, y_front, x_aerial, y_aerial]` per pair.
    pub pairs: Vec<[f64; 4]>,
    pub axis_points: [[f64; 2]; 2],
    pub axis_world_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub homography: Homography,
    pub scale: PixelScale,
}

impl CalibrationFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        read_json(path)
    }

    pub fn solve(&self) -> Result<Calibration, GeometryError> {
        let pairs: Vec<PointPair> = self
            .pairs
            .iter()
            .map(|p| PointPair::new(PixelPoint::new(p[0], p[1]), PixelPoint::new(p[2], p[3])))
            .collect();
        let homography = estimate_homography(&pairs)?;
        let [a, b] = self.axis_points;
        let scale = calibrate_pixel_scale(
            PixelPoint::new(a[0], a[1]),
            PixelPoint::new(b[0], b[1]),
            self.axis_world_m,
        )?;
        Ok(Calibration { homography, scale })
    }
}
