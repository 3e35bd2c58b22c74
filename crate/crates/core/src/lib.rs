//! Sleeper-anchored self-localization for rail vehicles.
//!
//! A forward camera image is warped into a top-down strip over the track
//! ([`geometry`]), rail sleepers are detected in that strip ([`detector`]),
//! and the distance to the nearest sleeper pins the sub-spacing phase of the
//! train's mileage ([`estimator`]). Whole sleeper spacings are counted with
//! the speed sensor, so its drift cannot accumulate.
//!
//! [`sim`] produces seeded ground truth over a [`track::Route`], and
//! [`report`] scores estimates the way inter-station errors are usually
//! tabulated. [`cli`] wires everything into the `sleeperloc` binary.

pub mod cli;
pub mod config;
pub mod detector;
pub mod estimator;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod raster;
pub mod report;
pub mod sim;
pub mod track;

use thiserror::Error;

pub use config::{Scenario, ScenarioConfig};
pub use detector::{Detection, DetectionScore, OracleDetector, PeakDetector, SleeperDetector};
pub use estimator::{CorrectionContext, EstimatorKind, PositionEstimate};
pub use geometry::{Homography, PixelPoint, PixelScale, PointPair};
pub use raster::Raster;
pub use report::ErrorReport;
pub use sim::{SimFrame, SimRun};
pub use track::{CameraGeometry, Route, SleeperLattice};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Track(#[from] track::TrackError),
    #[error(transparent)]
    Sim(#[from] sim::SimError),
    #[error(transparent)]
    Detector(#[from] detector::DetectorError),
    #[error(transparent)]
    Estimator(#[from] estimator::EstimatorError),
    #[error(transparent)]
    Report(#[from] report::ReportError),
    #[error("{path}: {source}")]
    File {
        path: String,
        source: io::IoError,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
