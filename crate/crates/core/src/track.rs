//! Route, sleeper lattice and camera viewing geometry.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::PixelScale;

/// Relative slack used when snapping lattice positions onto sleepers.
const LATTICE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("mileage {0} m outside the route")]
    OutOfRoute(f64),
    #[error("invalid route: {0}")]
    InvalidRoute(String),
    #[error("invalid sleeper lattice: {0}")]
    InvalidLattice(String),
    #[error("invalid camera geometry: {0}")]
    InvalidCamera(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    station_mileages: Vec<f64>,
    total_length: f64,
    tunnel_segments: Vec<(f64, f64)>,
}

impl Route {
    pub fn new(
        station_mileages: Vec<f64>,
        total_length: f64,
        mut tunnel_segments: Vec<(f64, f64)>,
    ) -> Result<Self, TrackError> {
        if station_mileages.len() < 2 {
            return Err(TrackError::InvalidRoute("need at least two stations".into()));
        }
        if station_mileages[0] != 0.0 {
            return Err(TrackError::InvalidRoute("first station must be at 0 m".into()));
        }
        if station_mileages.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(TrackError::InvalidRoute(
                "station mileages must be strictly increasing".into(),
            ));
        }
        let last = *station_mileages.last().unwrap();
        if !total_length.is_finite() || total_length < last {
            return Err(TrackError::InvalidRoute(format!(
                "total length {total_length} m shorter than last station {last} m"
            )));
        }
        tunnel_segments.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(s, e) in &tunnel_segments {
            if !(s >= 0.0 && e > s && e <= total_length) {
                return Err(TrackError::InvalidRoute(format!(
                    "tunnel segment [{s}, {e}] outside route"
                )));
            }
        }
        if tunnel_segments.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(TrackError::InvalidRoute("tunnel segments overlap".into()));
        }
        Ok(Self {
            station_mileages,
            total_length,
            tunnel_segments,
        })
    }

    /// Route whose total length is the last station.
    pub fn from_stations(station_mileages: Vec<f64>) -> Result<Self, TrackError> {
        let total = station_mileages.last().copied().unwrap_or(0.0);
        Self::new(station_mileages, total, Vec::new())
    }

    pub fn station_mileages(&self) -> &[f64] {
        &self.station_mileages
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn tunnel_segments(&self) -> &[(f64, f64)] {
        &self.tunnel_segments
    }

    pub fn interval_count(&self) -> usize {
        self.station_mileages.len() - 1
    }

    /// "1-2", "2-3", ...
    pub fn interval_label(&self, i: usize) -> String {
        format!("{}-{}", i + 1, i + 2)
    }

    pub fn in_tunnel(&self, mileage: f64) -> bool {
        self.tunnel_segments
            .iter()
            .any(|&(s, e)| mileage >= s && mileage <= e)
    }

    /// Station interval containing `mileage`; half-open except the last,
    /// which also absorbs any run-out past the final station.
    pub fn interval_of(&self, mileage: f64) -> Result<usize, TrackError> {
        if !(0.0..=self.total_length).contains(&mileage) {
            return Err(TrackError::OutOfRoute(mileage));
        }
        let upper = self.station_mileages.partition_point(|&s| s <= mileage);
        Ok((upper.max(1) - 1).min(self.interval_count() - 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SleeperLattice {
    tau: f64,
    phase: f64,
}

impl SleeperLattice {
    pub fn new(tau: f64, phase: f64) -> Result<Self, TrackError> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(TrackError::InvalidLattice(format!("spacing {tau} must be > 0")));
        }
        if !(phase >= 0.0 && phase < tau) {
            return Err(TrackError::InvalidLattice(format!(
                "phase {phase} must lie in [0, {tau})"
            )));
        }
        Ok(Self { tau, phase })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// Mileage of sleeper `k`.
    pub fn sleeper(&self, k: i64) -> f64 {
        self.phase + k as f64 * self.tau
    }

    /// Index of the first sleeper at or beyond `mileage`.
    fn first_index_at_or_after(&self, mileage: f64) -> i64 {
        ((mileage - self.phase) / self.tau - LATTICE_EPS).ceil() as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraGeometry {
    blind_distance: f64,
    visible_length: f64,
    scale: PixelScale,
    strip_pixels: usize,
}

impl CameraGeometry {
    pub fn new(
        blind_distance: f64,
        visible_length: f64,
        scale: PixelScale,
        strip_pixels: usize,
    ) -> Result<Self, TrackError> {
        if !(blind_distance >= 0.0 && blind_distance.is_finite()) {
            return Err(TrackError::InvalidCamera("blind distance must be >= 0".into()));
        }
        if !(visible_length > 0.0 && visible_length.is_finite()) {
            return Err(TrackError::InvalidCamera("visible length must be > 0".into()));
        }
        if strip_pixels == 0 {
            return Err(TrackError::InvalidCamera("strip must have >= 1 pixel".into()));
        }
        let strip_m_px = visible_length * scale.px_per_m();
        if (strip_m_px - strip_pixels as f64).abs() > 1.0 {
            return Err(TrackError::InvalidCamera(format!(
                "visible length covers {strip_m_px:.2} px but strip is {strip_pixels} px"
            )));
        }
        Ok(Self {
            blind_distance,
            visible_length,
            scale,
            strip_pixels,
        })
    }

    pub fn blind_distance(&self) -> f64 {
        self.blind_distance
    }

    pub fn visible_length(&self) -> f64 {
        self.visible_length
    }

    pub fn scale(&self) -> PixelScale {
        self.scale
    }

    pub fn strip_pixels(&self) -> usize {
        self.strip_pixels
    }
}

/// A sleeper inside the aerial strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibleSleeper {
    pub mileage: f64,
    /// Distance from the near edge of the strip, metres.
    pub strip_offset: f64,
}

/// Distance from the train front to the first sleeper at or ahead of it, in `[0, tau)`.
pub fn nearest_sleeper_phase(lattice: &SleeperLattice, front_mileage: f64) -> f64 {
    let tau = lattice.tau;
    let theta = (lattice.phase - front_mileage).rem_euclid(tau);
    if theta >= tau * (1.0 - LATTICE_EPS) || theta <= tau * LATTICE_EPS {
        0.0
    } else {
        theta
    }
}

/// Sleepers in `[front + d_B, front + d_B + visible_length]`, nearest first.
pub fn visible_sleepers(
    lattice: &SleeperLattice,
    cam: &CameraGeometry,
    front_mileage: f64,
) -> Vec<VisibleSleeper> {
    let near = front_mileage + cam.blind_distance;
    let far = near + cam.visible_length;
    let slack = lattice.tau * LATTICE_EPS;
    let mut out = Vec::new();
    let mut k = lattice.first_index_at_or_after(near).max(0);
    loop {
        let m = lattice.sleeper(k);
        if m > far + slack {
            break;
        }
        let offset = (m - near).clamp(0.0, cam.visible_length);
        out.push(VisibleSleeper {
            mileage: m,
            strip_offset: offset,
        });
        k += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cam(d_b: f64, visible: f64) -> CameraGeometry {
        let px = (visible * 100.0).round() as usize;
        CameraGeometry::new(d_b, visible, PixelScale::new(100.0).unwrap(), px).unwrap()
    }

    #[test]
    fn phase_examples() {
        let l = SleeperLattice::new(0.6, 0.0).unwrap();
        assert_abs_diff_eq!(nearest_sleeper_phase(&l, 1.2), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(nearest_sleeper_phase(&l, 1.25), 0.55, epsilon = 1e-9);
        let l = SleeperLattice::new(0.6, 0.1).unwrap();
        assert_abs_diff_eq!(nearest_sleeper_phase(&l, 0.0), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn visible_enumeration() {
        let l = SleeperLattice::new(0.6, 0.0).unwrap();
        let v = visible_sleepers(&l, &cam(2.0, 2.4), 0.0);
        let miles: Vec<f64> = v.iter().map(|s| s.mileage).collect();
        let offs: Vec<f64> = v.iter().map(|s| s.strip_offset).collect();
        for (got, want) in miles.iter().zip([2.4, 3.0, 3.6, 4.2]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
        }
        for (got, want) in offs.iter().zip([0.4, 1.0, 1.6, 2.2]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
        }
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn short_strip_between_sleepers_is_empty() {
        let l = SleeperLattice::new(0.6, 0.0).unwrap();
        // strip covers [0.1, 0.5]
        let c = cam(0.1, 0.4);
        assert!(visible_sleepers(&l, &c, 0.0).is_empty());
    }

    #[test]
    fn front_on_sleeper_zero_blind() {
        let l = SleeperLattice::new(0.6, 0.0).unwrap();
        let v = visible_sleepers(&l, &cam(0.0, 2.56), 1.8);
        assert_eq!(v[0].strip_offset, 0.0);
        assert_abs_diff_eq!(v[0].mileage, 1.8, epsilon = 1e-9);
    }

    #[test]
    fn interval_lookup() {
        let r = Route::from_stations(vec![0.0, 1100.0, 2400.0]).unwrap();
        assert_eq!(r.interval_of(0.0).unwrap(), 0);
        assert_eq!(r.interval_of(1100.0).unwrap(), 1);
        assert_eq!(r.interval_of(2400.0).unwrap(), 1);
        assert_eq!(r.interval_of(5000.0), Err(TrackError::OutOfRoute(5000.0)));
        assert!(r.interval_of(-0.1).is_err());
        assert_eq!(r.interval_label(1), "2-3");
    }

    #[test]
    fn route_validation() {
        assert!(Route::from_stations(vec![0.0, 10.0, 10.0]).is_err());
        assert!(Route::from_stations(vec![5.0, 10.0]).is_err());
        assert!(Route::new(vec![0.0, 10.0], 9.0, vec![]).is_err());
        assert!(Route::new(vec![0.0, 10.0], 10.0, vec![(0.0, 5.0), (4.0, 8.0)]).is_err());
        let r = Route::new(vec![0.0, 10.0], 12.0, vec![(6.0, 8.0), (0.0, 5.0)]).unwrap();
        assert!(r.in_tunnel(7.0) && !r.in_tunnel(5.5));
        assert_eq!(r.interval_of(11.0).unwrap(), 0);
    }

    #[test]
    fn lattice_and_camera_validation() {
        assert!(SleeperLattice::new(0.0, 0.0).is_err());
        assert!(SleeperLattice::new(0.6, 0.6).is_err());
        let s = PixelScale::new(100.0).unwrap();
        assert!(CameraGeometry::new(2.0, 2.56, s, 200).is_err());
        assert!(CameraGeometry::new(-1.0, 2.56, s, 256).is_err());
        assert!(CameraGeometry::new(2.0, 2.56, s, 256).is_ok());
    }

    fn circ_dist(a: f64, b: f64, tau: f64) -> f64 {
        let d = (a - b).rem_euclid(tau);
        d.min(tau - d)
    }

    proptest! {
        #[test]
        fn phase_is_periodic(m in 0.0f64..5000.0, phase in 0.0f64..0.599) {
            let l = SleeperLattice::new(0.6, phase).unwrap();
            let a = nearest_sleeper_phase(&l, m);
            let b = nearest_sleeper_phase(&l, m + 0.6);
            prop_assert!((0.0..0.6).contains(&a));
            prop_assert!(circ_dist(a, b, 0.6) < 1e-9);
        }

        #[test]
        fn first_visible_matches_phase(m in 0.0f64..5000.0, phase in 0.0f64..0.599, d_b in 0.0f64..5.0) {
            let l = SleeperLattice::new(0.6, phase).unwrap();
            let v = visible_sleepers(&l, &cam(d_b, 2.56), m);
            prop_assert!(!v.is_empty());
            let first = v[0];
            prop_assert!(circ_dist(first.mileage - m, nearest_sleeper_phase(&l, m), 0.6) < 1e-9);
            for w in v.windows(2) {
                prop_assert!(w[1].strip_offset > w[0].strip_offset);
            }
            for s in &v {
                prop_assert!((0.0..=2.56).contains(&s.strip_offset));
            }
        }

        #[test]
        fn intervals_partition_route(m in 0.0f64..=6900.0) {
            let r = Route::from_stations(vec![0.0, 1100.0, 2400.0, 4000.0, 5300.0, 6900.0]).unwrap();
            let i = r.interval_of(m).unwrap();
            let st = r.station_mileages();
            prop_assert!(st[i] <= m);
            prop_assert!(m < st[i + 1] || (i == 4 && m == 6900.0));
        }
    }
}
