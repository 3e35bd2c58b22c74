//! Streaming mileage estimators.
//!
//! The visual estimator splits each advance into whole sleeper spacings,
//! counted with the speed sensor, plus a sub-spacing remainder read from
//! the phase of the nearest detected sleeper:
//!
//! ```text
//! Θ      = (Θ_r + d_B) mod τ                 phase of the nearest sleeper ahead
//! γ      = advance of that phase, in [0, τ)
//! L      = ⌊(d_vt − γ)/τ + ½⌋                whole spacings
//! d_delt = L·τ + γ
//! ```
//!
//! `d_vt` only has to be right to within half a spacing for `d_delt` to be
//! exact up to the pixel quantisation of Θ, so speed-sensor drift never
//! accumulates. When a frame has no usable detection, Θ falls back to ξ·τ;
//! such frames advance by the sensor distance and the last good phase stays
//! the anchor until a usable detection returns.
//!
//! The direct-integral baseline integrates measured speed with the
//! trapezoidal rule and is included for comparison.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{DetectorError, DetectorInput, InputKind, SleeperDetector};
use crate::geometry::{pixel_to_world, PixelScale};
use crate::sim::SimRun;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("time interval must be positive, got {0}")]
    NonPositiveInterval(f64),
    #[error("invalid correction context: {0}")]
    InvalidContext(String),
    #[error("run has no frames")]
    EmptyRun,
    #[error("frame {frame}: {source}")]
    Detector {
        frame: usize,
        source: DetectorError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionContext {
    tau: f64,
    d_b: f64,
    scale: PixelScale,
    xi: f64,
}

impl CorrectionContext {
    pub fn new(tau: f64, d_b: f64, scale: PixelScale, xi: f64) -> Result<Self, EstimatorError> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(EstimatorError::InvalidContext(format!("tau {tau} must be > 0")));
        }
        if !(d_b.is_finite() && d_b >= 0.0) {
            return Err(EstimatorError::InvalidContext(format!("d_B {d_b} must be >= 0")));
        }
        if !(xi > 0.0 && xi < 1.0) {
            return Err(EstimatorError::InvalidContext(format!("xi {xi} must be in (0, 1)")));
        }
        Ok(Self { tau, d_b, scale, xi })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn blind_distance(&self) -> f64 {
        self.d_b
    }

    pub fn scale(&self) -> PixelScale {
        self.scale
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionFactor {
    pub theta: f64,
    pub fallback_used: bool,
}

/// Reduce into `[0, tau)`, folding a round-off result of exactly `tau` to 0.
fn wrap_phase(x: f64, tau: f64) -> f64 {
    let w = x - (x / tau).floor() * tau;
    if w >= tau || w < 0.0 {
        0.0
    } else {
        w
    }
}

/// Visual correction factor from the nearest detection's strip offset (px).
///
/// Falls back to `ξ·τ` when there is no detection or the detection lies a
/// full spacing or more into the strip (a nearer sleeper was missed).
pub fn correction_factor(ctx: &CorrectionContext, nearest_px: Option<f64>) -> CorrectionFactor {
    let fallback = CorrectionFactor {
        theta: ctx.xi * ctx.tau,
        fallback_used: true,
    };
    let Some(theta_r) = nearest_px.and_then(|px| pixel_to_world(ctx.scale, px).ok()) else {
        return fallback;
    };
    if !(theta_r < ctx.tau) {
        return fallback;
    }
    CorrectionFactor {
        theta: wrap_phase(theta_r + ctx.d_b, ctx.tau),
        fallback_used: false,
    }
}

/// Trapezoidal sensor distance between two speed readings.
pub fn sensor_distance(v1: f64, v2: f64, dt: f64) -> Result<f64, EstimatorError> {
    if !(dt > 0.0) {
        return Err(EstimatorError::NonPositiveInterval(dt));
    }
    Ok(0.5 * (v1 + v2) * dt)
}

/// Whole sleeper spacings contained in `distance`: `⌊distance / tau⌋`.
pub fn sleeper_count(distance: f64, tau: f64) -> i64 {
    (distance / tau).floor() as i64
}

/// `θ2 − θ1`, wrapped into `[0, tau)`.
pub fn remainder_gamma(theta1: f64, theta2: f64, tau: f64) -> f64 {
    let g = if theta2 >= theta1 {
        theta2 - theta1
    } else {
        theta2 - theta1 + tau
    };
    if g >= tau || g < 0.0 {
        0.0
    } else {
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionEstimate {
    pub t: f64,
    /// Raw, unclamped mileage.
    pub mileage: f64,
    /// Advance applied at this step.
    pub d_delt: f64,
    pub sleeper_count: Option<i64>,
    pub gamma: Option<f64>,
    pub theta: Option<f64>,
    pub fallback_used: bool,
}

impl PositionEstimate {
    pub fn start(t: f64, mileage: f64) -> Self {
        Self {
            t,
            mileage,
            d_delt: 0.0,
            sleeper_count: None,
            gamma: None,
            theta: None,
            fallback_used: false,
        }
    }

    /// Mileage clamped into `[0, route_length]` for reporting.
    pub fn reported_mileage(&self, route_length: f64) -> f64 {
        self.mileage.clamp(0.0, route_length)
    }
}

/// Visual estimator state between frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisualState {
    pub estimate: PositionEstimate,
    /// Phase and mileage at the last frame with a usable detection.
    pub anchor_theta: f64,
    pub anchor_mileage: f64,
    /// Sensor distance travelled since the anchor frame.
    pub pending_m: f64,
}

impl VisualState {
    /// First frame: the phase comes from that frame's own detection, or ξ·τ.
    pub fn init(ctx: &CorrectionContext, t: f64, mileage: f64, nearest_px: Option<f64>) -> Self {
        let cf = correction_factor(ctx, nearest_px);
        let mut estimate = PositionEstimate::start(t, mileage);
        estimate.theta = Some(cf.theta);
        estimate.fallback_used = cf.fallback_used;
        Self {
            estimate,
            anchor_theta: cf.theta,
            anchor_mileage: mileage,
            pending_m: 0.0,
        }
    }
}

/// Data for one step between consecutive frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInput {
    pub t: f64,
    pub v1: f64,
    pub v2: f64,
    pub dt: f64,
    /// Strip offset of the nearest detection at the new frame, px.
    pub nearest_px: Option<f64>,
}

pub fn step_visual(
    state: &VisualState,
    ctx: &CorrectionContext,
    input: &StepInput,
) -> Result<VisualState, EstimatorError> {
    let d_vt = sensor_distance(input.v1, input.v2, input.dt)?;
    let cf = correction_factor(ctx, input.nearest_px);
    let pending = state.pending_m + d_vt;
    let prev = state.estimate.mileage;

    if cf.fallback_used {
        let estimate = PositionEstimate {
            t: input.t,
            mileage: prev + d_vt,
            d_delt: d_vt,
            sleeper_count: None,
            gamma: None,
            theta: Some(cf.theta),
            fallback_used: true,
        };
        return Ok(VisualState {
            estimate,
            pending_m: pending,
            ..*state
        });
    }

    let tau = ctx.tau;
    // Θ is the distance to the sleeper ahead, so it shrinks as the train moves.
    let gamma = remainder_gamma(cf.theta, state.anchor_theta, tau);
    let count = sleeper_count(pending - gamma + 0.5 * tau, tau);
    let mileage = state.anchor_mileage + count as f64 * tau + gamma;
    let estimate = PositionEstimate {
        t: input.t,
        mileage,
        d_delt: mileage - prev,
        sleeper_count: Some(count),
        gamma: Some(gamma),
        theta: Some(cf.theta),
        fallback_used: false,
    };
    Ok(VisualState {
        estimate,
        anchor_theta: cf.theta,
        anchor_mileage: mileage,
        pending_m: 0.0,
    })
}

pub fn step_direct(
    state: &PositionEstimate,
    t: f64,
    v1: f64,
    v2: f64,
    dt: f64,
) -> Result<PositionEstimate, EstimatorError> {
    let d = sensor_distance(v1, v2, dt)?;
    Ok(PositionEstimate {
        t,
        mileage: state.mileage + d,
        d_delt: d,
        ..PositionEstimate::start(t, 0.0)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Direct,
    Visual,
}

impl std::str::FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Self::Direct),
            "visual" => Ok(Self::Visual),
            other => Err(format!("unknown estimator '{other}' (expected visual|direct)")),
        }
    }
}

fn nearest_detection(
    run: &SimRun,
    frame: usize,
    detector: &dyn SleeperDetector,
) -> Result<Option<f64>, EstimatorError> {
    let f = &run.frames[frame];
    let input = match detector.input_kind() {
        InputKind::Oracle => DetectorInput::Oracle(&f.oracle_detections),
        InputKind::Raster => match &f.aerial_raster {
            Some(r) => DetectorInput::Raster(r),
            None => {
                return Err(EstimatorError::Detector {
                    frame,
                    source: DetectorError::InputKindMismatch {
                        expected: InputKind::Raster,
                        got: InputKind::Oracle,
                    },
                })
            }
        },
    };
    let dets = detector
        .detect(input)
        .map_err(|source| EstimatorError::Detector { frame, source })?;
    Ok(dets
        .iter()
        .map(|d| d.y())
        .filter(|y| y.is_finite())
        .min_by(f64::total_cmp))
}

/// One estimate per frame, starting from the first station.
pub fn run_estimator(
    run: &SimRun,
    kind: EstimatorKind,
    ctx: &CorrectionContext,
    detector: &dyn SleeperDetector,
) -> Result<Vec<PositionEstimate>, EstimatorError> {
    let first = run.frames.first().ok_or(EstimatorError::EmptyRun)?;
    let origin = run.route.station_mileages()[0];
    let mut out = Vec::with_capacity(run.frames.len());

    match kind {
        EstimatorKind::Direct => {
            let mut est = PositionEstimate::start(first.t, origin);
            out.push(est);
            for w in run.frames.windows(2) {
                est = step_direct(&est, w[1].t, w[0].measured_speed, w[1].measured_speed, w[1].t - w[0].t)?;
                out.push(est);
            }
        }
        EstimatorKind::Visual => {
            let mut state = VisualState::init(ctx, first.t, origin, nearest_detection(run, 0, detector)?);
            out.push(state.estimate);
            for k in 1..run.frames.len() {
                let (a, b) = (&run.frames[k - 1], &run.frames[k]);
                let input = StepInput {
                    t: b.t,
                    v1: a.measured_speed,
                    v2: b.measured_speed,
                    dt: b.t - a.t,
                    nearest_px: nearest_detection(run, k, detector)?,
                };
                state = step_visual(&state, ctx, &input)?;
                out.push(state.estimate);
            }
        }
    }
    Ok(out)
}
