//! Seeded route simulator: exact trapezoidal kinematics, corrupted speed
//! readings and per-frame aerial observations.
//!
//! Randomness comes from three independent ChaCha8 streams derived from the
//! scenario seed (speed noise, detections, raster noise), drawn in frame
//! order. A run is therefore a pure function of its config.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Scenario;
use crate::detector::Detection;
use crate::geometry::PixelPoint;
use crate::raster::Raster;
use crate::track::{visible_sleepers, CameraGeometry, Route, SleeperLattice};

const BACKGROUND: f32 = 0.2;
const BAND: f32 = 0.9;

const STREAM_SPEED: u64 = 0;
const STREAM_DETECT: u64 = 1;
const STREAM_RASTER: u64 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("infeasible speed profile on interval {interval}: {reason}")]
    InfeasibleProfile { interval: usize, reason: String },
    #[error("invalid sensor model: {0}")]
    InvalidSensor(String),
    #[error("invalid time step {0}")]
    InvalidTimeStep(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    cruise: Vec<f64>,
    accel: f64,
    decel: f64,
    dwell_s: f64,
}

impl SpeedProfile {
    pub fn new(cruise: Vec<f64>, accel: f64, decel: f64, dwell_s: f64) -> Result<Self, SimError> {
        let bad = |reason: &str| SimError::InfeasibleProfile {
            interval: 0,
            reason: reason.to_string(),
        };
        if cruise.is_empty() || cruise.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(bad("cruise speeds must be > 0"));
        }
        if !(accel > 0.0 && decel > 0.0 && accel.is_finite() && decel.is_finite()) {
            return Err(bad("accel and decel must be > 0"));
        }
        if !(dwell_s >= 0.0 && dwell_s.is_finite()) {
            return Err(bad("dwell must be >= 0"));
        }
        Ok(Self {
            cruise,
            accel,
            decel,
            dwell_s,
        })
    }

    pub fn cruise(&self) -> &[f64] {
        &self.cruise
    }

    pub fn accel(&self) -> f64 {
        self.accel
    }

    pub fn decel(&self) -> f64 {
        self.decel
    }

    pub fn dwell_s(&self) -> f64 {
        self.dwell_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorModel {
    /// Multiplicative speed bias (0.0035 = +0.35 %).
    pub speed_bias: f64,
    /// Per-reading Gaussian noise, m/s.
    pub speed_noise_sigma: f64,
    pub detect_miss_prob: f64,
    pub detect_pixel_sigma: f64,
    /// Expected spurious detections per frame.
    pub false_positive_rate: f64,
    pub seed: u64,
}

impl SensorModel {
    pub fn noiseless(seed: u64) -> Self {
        Self {
            speed_bias: 0.0,
            speed_noise_sigma: 0.0,
            detect_miss_prob: 0.0,
            detect_pixel_sigma: 0.0,
            false_positive_rate: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.speed_bias.is_finite()
            && self.speed_noise_sigma >= 0.0
            && self.speed_noise_sigma.is_finite()
            && (0.0..=1.0).contains(&self.detect_miss_prob)
            && self.detect_pixel_sigma >= 0.0
            && self.detect_pixel_sigma.is_finite()
            && self.false_positive_rate >= 0.0
            && self.false_positive_rate.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidSensor(format!("{self:?}")))
        }
    }
}

/// Ground-truth state at one sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicSample {
    pub t: f64,
    pub mileage: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    Dwell {
        at: f64,
    },
    Move {
        from: f64,
        to: f64,
        cruise: f64,
        accel: f64,
        decel: f64,
        t_accel: f64,
        t_cruise: f64,
    },
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    start: f64,
    duration: f64,
    phase: Phase,
}

impl Segment {
    fn state(&self, t: f64) -> (f64, f64) {
        let u = (t - self.start).clamp(0.0, self.duration);
        match self.phase {
            Phase::Dwell { at } => (at, 0.0),
            Phase::Move {
                from,
                to,
                cruise,
                accel,
                decel,
                t_accel,
                t_cruise,
            } => {
                if u < t_accel {
                    (from + 0.5 * accel * u * u, accel * u)
                } else if u < t_accel + t_cruise {
                    (from + 0.5 * cruise * t_accel + cruise * (u - t_accel), cruise)
                } else {
                    // measured back from the stop so arrival is exact
                    let left = self.duration - u;
                    (to - 0.5 * decel * left * left, decel * left)
                }
            }
        }
    }
}

fn plan(route: &Route, profile: &SpeedProfile) -> Result<Vec<Segment>, SimError> {
    let stations = route.station_mileages();
    if profile.cruise.len() != route.interval_count() {
        return Err(SimError::InfeasibleProfile {
            interval: 0,
            reason: format!(
                "{} cruise speeds for {} intervals",
                profile.cruise.len(),
                route.interval_count()
            ),
        });
    }
    let mut segs = Vec::with_capacity(2 * route.interval_count());
    let mut t = 0.0;
    for (i, w) in stations.windows(2).enumerate() {
        let (from, to) = (w[0], w[1]);
        let v = profile.cruise[i];
        let (a, d) = (profile.accel, profile.decel);
        let length = to - from;
        let ramp = 0.5 * v * v / a + 0.5 * v * v / d;
        if ramp > length {
            return Err(SimError::InfeasibleProfile {
                interval: i,
                reason: format!(
                    "cruise {v} m/s needs {ramp:.1} m to speed up and brake, interval is {length:.1} m"
                ),
            });
        }
        if profile.dwell_s > 0.0 {
            segs.push(Segment {
                start: t,
                duration: profile.dwell_s,
                phase: Phase::Dwell { at: from },
            });
            t += profile.dwell_s;
        }
        let t_accel = v / a;
        let t_decel = v / d;
        let t_cruise = (length - ramp) / v;
        let duration = t_accel + t_cruise + t_decel;
        segs.push(Segment {
            start: t,
            duration,
            phase: Phase::Move {
                from,
                to,
                cruise: v,
                accel: a,
                decel: d,
                t_accel,
                t_cruise,
            },
        });
        t += duration;
    }
    Ok(segs)
}

/// Total run time in seconds (dwell at every station but the terminus).
pub fn run_duration(route: &Route, profile: &SpeedProfile) -> Result<f64, SimError> {
    Ok(plan(route, profile)?
        .last()
        .map(|s| s.start + s.duration)
        .unwrap_or(0.0))
}

/// Sample the closed-form trapezoidal trajectory at `t_k = k·dt` until the
/// train has stopped at the terminus.
pub fn generate_kinematics(
    route: &Route,
    profile: &SpeedProfile,
    dt: f64,
) -> Result<Vec<KinematicSample>, SimError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SimError::InvalidTimeStep(dt));
    }
    let segs = plan(route, profile)?;
    let total = segs.last().map(|s| s.start + s.duration).unwrap_or(0.0);
    let n = (total / dt - 1e-9).ceil().max(0.0) as usize + 1;
    let terminus = *route.station_mileages().last().unwrap();

    let mut out = Vec::with_capacity(n);
    let mut idx = 0;
    for k in 0..n {
        let t = k as f64 * dt;
        while idx < segs.len() && t >= segs[idx].start + segs[idx].duration {
            idx += 1;
        }
        let (mileage, speed) = match segs.get(idx) {
            Some(seg) => seg.state(t),
            None => (terminus, 0.0),
        };
        out.push(KinematicSample { t, mileage, speed });
    }
    Ok(out)
}

/// `max(0, v·(1 + bias) + N(0, σ))`.
pub fn corrupt_speed<R: Rng + ?Sized>(model: &SensorModel, true_speed: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (true_speed * (1.0 + model.speed_bias) + model.speed_noise_sigma * z).max(0.0)
}

/// Band width in pixels for a lattice at the camera scale.
pub fn band_width_px(lattice: &SleeperLattice, cam: &CameraGeometry) -> f64 {
    (0.1 * lattice.tau() * cam.scale().px_per_m()).round().max(1.0)
}

/// Synthetic single-sided aerial crop: dim background with a bright
/// anti-aliased band across the strip at every visible sleeper.
pub fn render_aerial_strip<R: Rng + ?Sized>(
    lattice: &SleeperLattice,
    cam: &CameraGeometry,
    front_mileage: f64,
    noise_sigma: f64,
    rng: &mut R,
) -> Raster {
    let n = cam.strip_pixels();
    let r = cam.scale().px_per_m();
    let half = band_width_px(lattice, cam) / 2.0;
    let centers: Vec<f64> = visible_sleepers(lattice, cam, front_mileage)
        .iter()
        .map(|s| s.strip_offset * r)
        .collect();

    let mut strip = Raster::filled(n, n, BACKGROUND);
    for row in 0..n {
        let (lo, hi) = (row as f64 - 0.5, row as f64 + 0.5);
        let coverage = centers
            .iter()
            .map(|c| ((c + half).min(hi) - (c - half).max(lo)).max(0.0))
            .fold(0.0, f64::max) as f32;
        if coverage > 0.0 {
            strip.row_mut(row).fill(BACKGROUND + (BAND - BACKGROUND) * coverage);
        }
    }
    if noise_sigma > 0.0 {
        for row in 0..n {
            for v in strip.row_mut(row) {
                let z: f64 = rng.sample(StandardNormal);
                *v = (*v + (noise_sigma * z) as f32).clamp(0.0, 1.0);
            }
        }
    }
    strip
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimFrame {
    pub t: f64,
    pub true_mileage: f64,
    pub true_speed: f64,
    pub measured_speed: f64,
    pub aerial_raster: Option<Raster>,
    /// Noisy detections as a detector would report them, nearest first.
    pub oracle_detections: Vec<Detection>,
    /// Ground-truth centres (rows) of every visible sleeper, nearest first.
    pub truth_px: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub frames: Vec<SimFrame>,
    pub route: Route,
    pub lattice: SleeperLattice,
    pub cam: CameraGeometry,
    pub dt: f64,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Centre column of the strip, where oracle boxes sit.
pub fn strip_center_x(cam: &CameraGeometry) -> f64 {
    (cam.strip_pixels() as f64 - 1.0) / 2.0
}

/// Simulate one complete run of the scenario.
pub fn generate_run(sc: &Scenario) -> Result<SimRun, SimError> {
    sc.sensor.validate()?;
    let kin = generate_kinematics(&sc.route, &sc.profile, sc.dt)?;
    let seed = sc.sensor.seed;
    let mut speed_rng = stream(seed, STREAM_SPEED);
    let mut det_rng = stream(seed, STREAM_DETECT);
    let mut raster_rng = stream(seed, STREAM_RASTER);

    let strip_px = sc.cam.strip_pixels() as f64;
    let r = sc.cam.scale().px_per_m();
    let cx = strip_center_x(&sc.cam);
    let box_side = sc.detector.box_side_px;
    let fp = if sc.sensor.false_positive_rate > 0.0 {
        Some(
            Poisson::new(sc.sensor.false_positive_rate)
                .map_err(|e| SimError::InvalidSensor(e.to_string()))?,
        )
    } else {
        None
    };

    let mut frames = Vec::with_capacity(kin.len());
    for (k, s) in kin.iter().enumerate() {
        let measured_speed = corrupt_speed(&sc.sensor, s.speed, &mut speed_rng);
        let truth_px: Vec<f64> = visible_sleepers(&sc.lattice, &sc.cam, s.mileage)
            .iter()
            .map(|v| v.strip_offset * r)
            .collect();

        let mut rows = Vec::with_capacity(truth_px.len() + 1);
        for &y in &truth_px {
            let miss = det_rng.random::<f64>() < sc.sensor.detect_miss_prob;
            let z: f64 = det_rng.sample(StandardNormal);
            if miss {
                continue;
            }
            let noisy = y + sc.sensor.detect_pixel_sigma * z;
            if (0.0..=strip_px).contains(&noisy) {
                rows.push(noisy);
            }
        }
        if let Some(p) = &fp {
            let count = p.sample(&mut det_rng) as usize;
            for _ in 0..count {
                rows.push(det_rng.random::<f64>() * strip_px);
            }
        }
        rows.sort_by(f64::total_cmp);
        let oracle_detections = rows
            .into_iter()
            .map(|y| Detection {
                center_px: PixelPoint::new(cx, y),
                box_side_px: box_side,
                confidence: 1.0,
            })
            .collect();

        let aerial_raster = (sc.raster.enabled && k % sc.raster.every_n_frames == 0).then(|| {
            render_aerial_strip(&sc.lattice, &sc.cam, s.mileage, sc.raster.noise_sigma, &mut raster_rng)
        });

        frames.push(SimFrame {
            t: s.t,
            true_mileage: s.mileage,
            true_speed: s.speed,
            measured_speed,
            aerial_raster,
            oracle_detections,
            truth_px,
        });
    }
    Ok(SimRun {
        frames,
        route: sc.route.clone(),
        lattice: sc.lattice,
        cam: sc.cam,
        dt: sc.dt,
    })
}
