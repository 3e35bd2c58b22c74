//! Front-view to aerial-view projective mapping and pixel-to-world scale.
//!
//! A single 3×3 homography, estimated once from four hand-labelled point
//! pairs, maps every front-camera frame onto the aerial (bird's-eye) plane.
//! Along the track axis of the aerial view, pixel distances are proportional
//! to ground distances; [`PixelScale`] carries that ratio.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Raster;

/// Pivot / determinant threshold separating singular systems from round-off.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("expected exactly 4 point pairs, got {0}")]
    WrongArity(usize),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("point maps to infinity (w = {0:e})")]
    PointAtInfinity(f64),
    #[error("zero calibration baseline")]
    ZeroBaseline,
    #[error("negative pixel distance {0}")]
    NegativeDistance(f64),
    #[error("invalid pixel scale {0}")]
    InvalidScale(f64),
    #[error("non-finite coordinate")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

impl PixelPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Front-view source point and its aerial-view target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPair {
    pub source: PixelPoint,
    pub target: PixelPoint,
}

impl PointPair {
    pub const fn new(source: PixelPoint, target: PixelPoint) -> Self {
        Self { source, target }
    }
}

/// Projective map normalised so that `m[2][2] == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography {
    m: [[f64; 3]; 3],
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

impl Homography {
    pub const IDENTITY: Homography = Homography {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Build from an arbitrary homogeneous matrix, dividing through by
    /// `m[2][2]`. Any nonzero multiple of the same matrix gives the same result.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let s = m[2][2];
        if s.abs() <= DEGENERACY_TOL {
            return Err(GeometryError::DegenerateConfiguration("m[2][2] is zero"));
        }
        let mut n = m;
        for v in n.iter_mut().flatten() {
            *v /= s;
        }
        n[2][2] = 1.0;
        if det3(&n).abs() <= DEGENERACY_TOL {
            return Err(GeometryError::DegenerateConfiguration("singular matrix"));
        }
        Ok(Self { m: n })
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    pub fn determinant(&self) -> f64 {
        det3(&self.m)
    }

    /// Map `p` through the homography.
    pub fn apply(&self, p: PixelPoint) -> Result<PixelPoint, GeometryError> {
        let m = &self.m;
        let w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
        if w.abs() <= DEGENERACY_TOL || !w.is_finite() {
            return Err(GeometryError::PointAtInfinity(w));
        }
        let x = (m[0][0] * p.x + m[0][1] * p.y + m[0][2]) / w;
        let y = (m[1][0] * p.x + m[1][1] * p.y + m[1][2]) / w;
        Ok(PixelPoint { x, y })
    }

    /// Inverse via the adjugate, renormalised.
    pub fn inverse(&self) -> Result<Homography, GeometryError> {
        let m = &self.m;
        let det = det3(m);
        if det.abs() <= DEGENERACY_TOL {
            return Err(GeometryError::DegenerateConfiguration("singular matrix"));
        }
        let adj = [
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ];
        Homography::from_matrix(adj)
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &Homography) -> Result<Homography, GeometryError> {
        Homography::from_matrix(mat_mul(&self.m, &first.m))
    }
}

/// Twice the signed triangle area, compared against the squared extent.
fn collinear(a: PixelPoint, b: PixelPoint, c: PixelPoint, extent_sq: f64) -> bool {
    let cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    cross.abs() <= DEGENERACY_TOL * extent_sq.max(1.0)
}

fn in_general_position(pts: &[PixelPoint; 4]) -> bool {
    let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in pts {
        lo_x = lo_x.min(p.x);
        hi_x = hi_x.max(p.x);
        lo_y = lo_y.min(p.y);
        hi_y = hi_y.max(p.y);
    }
    let extent = (hi_x - lo_x).max(hi_y - lo_y);
    let extent_sq = extent * extent;
    const TRIPLES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    TRIPLES
        .iter()
        .all(|&[i, j, k]| !collinear(pts[i], pts[j], pts[k], extent_sq))
}

/// Solve `a · x = b` in place by Gaussian elimination with partial pivoting.
fn solve_linear<const N: usize>(
    mut a: [[f64; N]; N],
    mut b: [f64; N],
) -> Result<[f64; N], GeometryError> {
    for col in 0..N {
        let pivot_row = (col..N)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot_row][col].abs() <= DEGENERACY_TOL {
            return Err(GeometryError::DegenerateConfiguration("singular linear system"));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..N {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let tail: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Ok(x)
}

/// Estimate the homography taking each `pair.source` to `pair.target`.
///
/// Solves the 8-unknown direct linear system with `h33 = 1`. Exactly four
/// pairs in general position are required.
pub fn estimate_homography(pairs: &[PointPair]) -> Result<Homography, GeometryError> {
    if pairs.len() != 4 {
        return Err(GeometryError::WrongArity(pairs.len()));
    }
    if pairs
        .iter()
        .any(|p| !p.source.is_finite() || !p.target.is_finite())
    {
        return Err(GeometryError::NonFinite);
    }
    let src = [pairs[0].source, pairs[1].source, pairs[2].source, pairs[3].source];
    let dst = [pairs[0].target, pairs[1].target, pairs[2].target, pairs[3].target];
    if !in_general_position(&src) || !in_general_position(&dst) {
        return Err(GeometryError::DegenerateConfiguration(
            "three or more points are collinear",
        ));
    }

    let mut a = [[0.0; 8]; 8];
    let mut b = [0.0; 8];
    for (i, (s, d)) in src.iter().zip(dst.iter()).enumerate() {
        a[2 * i] = [s.x, s.y, 1.0, 0.0, 0.0, 0.0, -d.x * s.x, -d.x * s.y];
        b[2 * i] = d.x;
        a[2 * i + 1] = [0.0, 0.0, 0.0, s.x, s.y, 1.0, -d.y * s.x, -d.y * s.y];
        b[2 * i + 1] = d.y;
    }
    let h = solve_linear(a, b)?;
    Homography::from_matrix([[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]])
}

pub fn apply_homography(h: &Homography, p: PixelPoint) -> Result<PixelPoint, GeometryError> {
    h.apply(p)
}

pub fn invert_homography(h: &Homography) -> Result<Homography, GeometryError> {
    h.inverse()
}

/// Resample `src` into an `out_width × out_height` raster through `h`.
///
/// Each output pixel centre is pulled back through `h⁻¹` and sampled
/// bilinearly. Samples outside the source area read as 0.
pub fn warp_raster(
    h: &Homography,
    src: &Raster,
    out_width: usize,
    out_height: usize,
) -> Result<Raster, GeometryError> {
    if out_width == 0 || out_height == 0 || src.is_empty() {
        return Err(GeometryError::DegenerateConfiguration("empty raster"));
    }
    let inv = h.inverse()?;
    let mut out = Raster::filled(out_width, out_height, 0.0);
    for row in 0..out_height {
        for col in 0..out_width {
            let p = PixelPoint::new(col as f64, row as f64);
            if let Ok(q) = inv.apply(p) {
                out.set(row, col, src.sample_bilinear(q.x, q.y));
            }
        }
    }
    Ok(out)
}

/// Pixels per metre along the aerial-view track axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PixelScale(f64);

impl PixelScale {
    pub fn new(px_per_m: f64) -> Result<Self, GeometryError> {
        if px_per_m.is_finite() && px_per_m > 0.0 {
            Ok(Self(px_per_m))
        } else {
            Err(GeometryError::InvalidScale(px_per_m))
        }
    }

    pub fn px_per_m(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PixelScale {
    type Error = GeometryError;

    fn try_from(v: f64) -> Result<Self, Self::Error> {
        PixelScale::new(v)
    }
}

impl From<PixelScale> for f64 {
    fn from(s: PixelScale) -> f64 {
        s.0
    }
}

/// Scale from two aerial points on the track axis a known ground distance apart.
pub fn calibrate_pixel_scale(
    a: PixelPoint,
    b: PixelPoint,
    world_distance_m: f64,
) -> Result<PixelScale, GeometryError> {
    if !a.is_finite() || !b.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    let dy = (b.y - a.y).abs();
    if !(world_distance_m > 0.0) || !world_distance_m.is_finite() || dy <= DEGENERACY_TOL {
        return Err(GeometryError::ZeroBaseline);
    }
    PixelScale::new(dy / world_distance_m)
}

/// Convert an aerial-view pixel distance to metres.
pub fn pixel_to_world(scale: PixelScale, theta_px: f64) -> Result<f64, GeometryError> {
    if theta_px < 0.0 {
        return Err(GeometryError::NegativeDistance(theta_px));
    }
    Ok(theta_px / scale.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn square() -> [PixelPoint; 4] {
        [
            PixelPoint::new(0.0, 0.0),
            PixelPoint::new(1.0, 0.0),
            PixelPoint::new(1.0, 1.0),
            PixelPoint::new(0.0, 1.0),
        ]
    }

    fn pairs(src: [PixelPoint; 4], dst: [PixelPoint; 4]) -> Vec<PointPair> {
        src.iter()
            .zip(dst.iter())
            .map(|(s, d)| PointPair::new(*s, *d))
            .collect()
    }

    fn assert_matrix_eq(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3], tol: f64) {
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(a[i][j], b[i][j], epsilon = tol);
            }
        }
    }

    #[test]
    fn identity_from_identical_pairs() {
        let h = estimate_homography(&pairs(square(), square())).unwrap();
        assert_matrix_eq(h.matrix(), Homography::IDENTITY.matrix(), 1e-12);
        assert_eq!(h.matrix()[2][2], 1.0);
    }

    #[test]
    fn pure_scaling() {
        let scaled = square().map(|p| PixelPoint::new(2.0 * p.x, 2.0 * p.y));
        let h = estimate_homography(&pairs(square(), scaled)).unwrap();
        let want = [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]];
        assert_matrix_eq(h.matrix(), &want, 1e-12);
    }

    #[test]
    fn arity_and_degeneracy() {
        let mut p = pairs(square(), square());
        p.pop();
        assert_eq!(estimate_homography(&p), Err(GeometryError::WrongArity(3)));

        let line = [
            PixelPoint::new(0.0, 0.0),
            PixelPoint::new(1.0, 1.0),
            PixelPoint::new(2.0, 2.0),
            PixelPoint::new(0.0, 5.0),
        ];
        assert!(matches!(
            estimate_homography(&pairs(line, square())),
            Err(GeometryError::DegenerateConfiguration(_))
        ));
        let dup = [square()[0], square()[0], square()[2], square()[3]];
        assert!(matches!(
            estimate_homography(&pairs(square(), dup)),
            Err(GeometryError::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn apply_examples() {
        let p = Homography::IDENTITY.apply(PixelPoint::new(3.5, 7.0)).unwrap();
        assert_eq!(p, PixelPoint::new(3.5, 7.0));
        let d2 = Homography::from_matrix([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]])
            .unwrap();
        assert_eq!(d2.apply(PixelPoint::new(1.0, 1.0)).unwrap(), PixelPoint::new(2.0, 2.0));
        let inv = d2.inverse().unwrap();
        assert_matrix_eq(
            inv.matrix(),
            &[[0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 1.0]],
            1e-15,
        );
        assert_eq!(Homography::IDENTITY.inverse().unwrap(), Homography::IDENTITY);
    }

    #[test]
    fn point_at_infinity() {
        let h = Homography::from_matrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
            .unwrap();
        assert!(matches!(
            h.apply(PixelPoint::new(-1.0, 3.0)),
            Err(GeometryError::PointAtInfinity(_))
        ));
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = [[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]];
        assert!(Homography::from_matrix(m).is_err());
    }

    #[test]
    fn pixel_scale_calibration() {
        let r = calibrate_pixel_scale(PixelPoint::new(10.0, 40.0), PixelPoint::new(10.0, 100.0), 0.6)
            .unwrap();
        assert_abs_diff_eq!(r.px_per_m(), 100.0, epsilon = 1e-12);
        let r = calibrate_pixel_scale(PixelPoint::new(0.0, 0.0), PixelPoint::new(0.0, 1.0), 1.0)
            .unwrap();
        assert_eq!(r.px_per_m(), 1.0);
        assert_eq!(
            calibrate_pixel_scale(PixelPoint::new(3.0, 5.0), PixelPoint::new(9.0, 5.0), 1.0),
            Err(GeometryError::ZeroBaseline)
        );
        assert_eq!(
            calibrate_pixel_scale(PixelPoint::new(0.0, 0.0), PixelPoint::new(0.0, 5.0), 0.0),
            Err(GeometryError::ZeroBaseline)
        );
    }

    #[test]
    fn pixel_to_world_examples() {
        let s = PixelScale::new(100.0).unwrap();
        assert_abs_diff_eq!(pixel_to_world(s, 50.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(pixel_to_world(s, 0.0).unwrap(), 0.0);
        assert_eq!(pixel_to_world(PixelScale::new(1.0).unwrap(), 7.25).unwrap(), 7.25);
        assert_eq!(pixel_to_world(s, -1.0), Err(GeometryError::NegativeDistance(-1.0)));
        assert!(PixelScale::new(0.0).is_err());
        assert!(PixelScale::new(f64::NAN).is_err());
    }

    #[test]
    fn warp_identity_is_exact() {
        let mut src = Raster::filled(7, 5, 0.0);
        for r in 0..5 {
            for c in 0..7 {
                src.set(r, c, ((r * 7 + c) as f32) / 35.0);
            }
        }
        let out = warp_raster(&Homography::IDENTITY, &src, 7, 5).unwrap();
        assert_eq!(out, src);
    }

    #[test]
    fn warp_scaled_constant_stays_constant() {
        let src = Raster::filled(16, 16, 0.7);
        let h = Homography::from_matrix([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]])
            .unwrap();
        let out = warp_raster(&h, &src, 32, 32).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.7).abs() < 1e-6));
    }

    #[test]
    fn warp_rejects_empty() {
        let src = Raster::filled(4, 4, 0.0);
        assert!(warp_raster(&Homography::IDENTITY, &src, 0, 4).is_err());
    }

    fn quad() -> impl Strategy<Value = [PixelPoint; 4]> {
        // Jittered corners of a 200 px square: always convex, never collinear.
        prop::array::uniform8(-40.0f64..40.0).prop_map(|j| {
            [
                PixelPoint::new(j[0], j[1]),
                PixelPoint::new(200.0 + j[2], j[3]),
                PixelPoint::new(200.0 + j[4], 200.0 + j[5]),
                PixelPoint::new(j[6], 200.0 + j[7]),
            ]
        })
    }

    proptest! {
        #[test]
        fn reproduces_defining_targets(src in quad(), dst in quad()) {
            let h = estimate_homography(&pairs(src, dst)).unwrap();
            prop_assert_eq!(h.matrix()[2][2], 1.0);
            for (s, d) in src.iter().zip(dst.iter()) {
                let q = h.apply(*s).unwrap();
                prop_assert!((q.x - d.x).abs() < 1e-9 && (q.y - d.y).abs() < 1e-9);
            }
        }

        #[test]
        fn projective_scale_invariance(src in quad(), dst in quad(), k in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
            let h = estimate_homography(&pairs(src, dst)).unwrap();
            let scaled = h.matrix().map(|row| row.map(|v| v * k));
            let h2 = Homography::from_matrix(scaled).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let a = h.matrix()[i][j];
                    let b = h2.matrix()[i][j];
                    prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
                }
            }
        }

        #[test]
        fn composition_consistency(a in quad(), b in quad(), c in quad(), x in 0.0f64..200.0, y in 0.0f64..200.0) {
            let h1 = estimate_homography(&pairs(a, b)).unwrap();
            let h2 = estimate_homography(&pairs(b, c)).unwrap();
            let p = PixelPoint::new(x, y);
            let composed = h2.compose(&h1).unwrap();
            if let (Ok(mid), Ok(direct)) = (h1.apply(p), composed.apply(p)) {
                if let Ok(two_step) = h2.apply(mid) {
                    let scale = two_step.x.abs().max(two_step.y.abs()).max(1.0);
                    prop_assert!((two_step.x - direct.x).abs() <= 1e-8 * scale);
                    prop_assert!((two_step.y - direct.y).abs() <= 1e-8 * scale);
                }
            }
        }

        #[test]
        fn pixel_to_world_is_linear(r in 0.1f64..1000.0, a in 0.0f64..1e4, b in 0.0f64..1e4) {
            let s = PixelScale::new(r).unwrap();
            let lhs = pixel_to_world(s, a + b).unwrap();
            let rhs = pixel_to_world(s, a).unwrap() + pixel_to_world(s, b).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }
}
