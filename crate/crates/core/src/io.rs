//! CSV interchange formats.
//!
//! All floats are written with Rust's shortest round-trip formatting so a
//! file read back reproduces the in-memory values bit for bit.

use std::io::{Read, Write};

use thiserror::Error;

use crate::config::Scenario;
use crate::detector::Detection;
use crate::estimator::PositionEstimate;
use crate::geometry::PixelPoint;
use crate::sim::{strip_center_x, SimFrame, SimRun};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
}

pub const RUN_HEADER_FIXED: [&str; 5] =
    ["t_s", "true_mileage_m", "true_speed_mps", "measured_speed_mps", "det_count"];
pub const TRACE_HEADER: [&str; 8] = [
    "t_s",
    "est_mileage_m",
    "true_mileage_m",
    "err_m",
    "L",
    "gamma_m",
    "theta_m",
    "fallback",
];
pub const DETECTION_HEADER: [&str; 4] = ["frame", "det_idx", "y_px", "confidence"];
pub const ERROR_CURVE_HEADER: [&str; 3] = ["t_s", "err_direct_m", "err_visual_m"];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().flexible(true).from_reader(r)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T, IoError> {
    let line = rec.position().map(|p| p.line()).unwrap_or(0);
    let raw = rec.get(i).ok_or_else(|| IoError::Malformed {
        line,
        msg: format!("missing column {name}"),
    })?;
    raw.trim().parse().map_err(|_| IoError::Malformed {
        line,
        msg: format!("bad {name} value '{raw}'"),
    })
}

fn check_header(rdr: &mut csv::Reader<impl Read>, want: &[&str]) -> Result<(), IoError> {
    let got = rdr.headers()?.clone();
    if got.len() < want.len() || want.iter().zip(got.iter()).any(|(w, g)| *w != g) {
        return Err(IoError::Malformed {
            line: 1,
            msg: format!("expected header starting {}", want.join(",")),
        });
    }
    Ok(())
}

/// One row of a run file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub t: f64,
    pub true_mileage: f64,
    pub true_speed: f64,
    pub measured_speed: f64,
    pub detections_px: Vec<f64>,
}

pub fn write_run_csv<W: Write>(run: &SimRun, w: W) -> Result<(), IoError> {
    let max_dets = run
        .frames
        .iter()
        .map(|f| f.oracle_detections.len())
        .max()
        .unwrap_or(0);
    let mut wtr = writer(w);
    let mut header: Vec<String> = RUN_HEADER_FIXED.iter().map(|s| s.to_string()).collect();
    header.extend((0..max_dets).map(|i| format!("det_px_{i}")));
    wtr.write_record(&header)?;
    for f in &run.frames {
        let mut rec = vec![
            f.t.to_string(),
            f.true_mileage.to_string(),
            f.true_speed.to_string(),
            f.measured_speed.to_string(),
            f.oracle_detections.len().to_string(),
        ];
        rec.extend(f.oracle_detections.iter().map(|d| d.y().to_string()));
        rec.resize(header.len(), String::new());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_run_csv<R: Read>(r: R) -> Result<Vec<RunRow>, IoError> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &RUN_HEADER_FIXED)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let count: usize = field(&rec, 4, "det_count")?;
        let detections_px = (0..count)
            .map(|i| field(&rec, 5 + i, &format!("det_px_{i}")))
            .collect::<Result<_, _>>()?;
        rows.push(RunRow {
            t: field(&rec, 0, "t_s")?,
            true_mileage: field(&rec, 1, "true_mileage_m")?,
            true_speed: field(&rec, 2, "true_speed_mps")?,
            measured_speed: field(&rec, 3, "measured_speed_mps")?,
            detections_px,
        });
    }
    Ok(rows)
}

/// Rebuild a run (without rasters or ground-truth sleeper lists) from file rows.
pub fn run_from_rows(rows: Vec<RunRow>, sc: &Scenario) -> SimRun {
    let cx = strip_center_x(&sc.cam);
    let frames = rows
        .into_iter()
        .map(|r| SimFrame {
            t: r.t,
            true_mileage: r.true_mileage,
            true_speed: r.true_speed,
            measured_speed: r.measured_speed,
            aerial_raster: None,
            oracle_detections: r
                .detections_px
                .into_iter()
                .map(|y| Detection {
                    center_px: PixelPoint::new(cx, y),
                    box_side_px: sc.detector.box_side_px,
                    confidence: 1.0,
                })
                .collect(),
            truth_px: Vec::new(),
        })
        .collect();
    SimRun {
        frames,
        route: sc.route.clone(),
        lattice: sc.lattice,
        cam: sc.cam,
        dt: sc.dt,
    }
}

/// Estimate trace; `est_mileage_m` is clamped to the route, `err_m` is signed.
pub fn write_trace_csv<W: Write>(
    estimates: &[PositionEstimate],
    truths: &[f64],
    route_length: f64,
    w: W,
) -> Result<(), IoError> {
    let mut wtr = writer(w);
    wtr.write_record(TRACE_HEADER)?;
    for (e, &truth) in estimates.iter().zip(truths) {
        let est = e.reported_mileage(route_length);
        wtr.write_record(&[
            e.t.to_string(),
            est.to_string(),
            truth.to_string(),
            (est - truth).to_string(),
            opt(e.sleeper_count),
            opt(e.gamma),
            opt(e.theta),
            if e.fallback_used { "1" } else { "0" }.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub estimate: f64,
    pub truth: f64,
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<Vec<TraceRow>, IoError> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &TRACE_HEADER[..3])?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(TraceRow {
                t: field(&rec, 0, "t_s")?,
                estimate: field(&rec, 1, "est_mileage_m")?,
                truth: field(&rec, 2, "true_mileage_m")?,
            })
        })
        .collect()
}

/// Per-frame detections as `frame,det_idx,y_px,confidence`.
pub fn write_detection_dump<W: Write>(frames: &[Vec<Detection>], w: W) -> Result<(), IoError> {
    let mut wtr = writer(w);
    wtr.write_record(DETECTION_HEADER)?;
    for (k, dets) in frames.iter().enumerate() {
        for (i, d) in dets.iter().enumerate() {
            wtr.write_record(&[
                k.to_string(),
                i.to_string(),
                d.y().to_string(),
                d.confidence.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Ground-truth rows in detection-dump form (confidence 1).
pub fn write_truth_dump<W: Write>(frames: &[Vec<f64>], w: W) -> Result<(), IoError> {
    let mut wtr = writer(w);
    wtr.write_record(DETECTION_HEADER)?;
    for (k, rows) in frames.iter().enumerate() {
        for (i, y) in rows.iter().enumerate() {
            wtr.write_record(&[k.to_string(), i.to_string(), y.to_string(), "1".to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Read a detection dump into per-frame row lists, indexed by frame number.
/// Frames with no rows come back empty.
pub fn read_detection_dump<R: Read>(r: R) -> Result<Vec<Vec<f64>>, IoError> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &DETECTION_HEADER[..3])?;
    let mut frames: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let k: usize = field(&rec, 0, "frame")?;
        let y: f64 = field(&rec, 2, "y_px")?;
        if frames.len() <= k {
            frames.resize(k + 1, Vec::new());
        }
        frames[k].push(y);
    }
    Ok(frames)
}

pub fn write_error_curve<W: Write>(
    t: &[f64],
    err_direct: &[f64],
    err_visual: &[f64],
    w: W,
) -> Result<(), IoError> {
    let mut wtr = writer(w);
    wtr.write_record(ERROR_CURVE_HEADER)?;
    for ((t, d), v) in t.iter().zip(err_direct).zip(err_visual) {
        wtr.write_record(&[t.to_string(), d.to_string(), v.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
