//! Maximum error / mean percentage error per station interval, and report
//! rendering.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::track::{Route, TrackError};

/// Points whose true mileage is below this are left out of the MPE average.
pub const MPE_MIN_TRUTH_M: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("empty series")]
    EmptySeries,
    #[error("length mismatch: {estimates} estimates vs {truths} truths")]
    LengthMismatch { estimates: usize, truths: usize },
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error("unknown format '{0}' (expected table|csv|json)")]
    UnknownFormat(String),
    #[error("bad report json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalError {
    pub label: String,
    pub me_m: f64,
    /// Fraction, not percent.
    pub mpe: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteError {
    pub me_m: f64,
    pub mpe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub per_interval: Vec<IntervalError>,
    pub whole_route: RouteError,
    pub n_points: usize,
}

#[derive(Default, Clone, Copy)]
struct Acc {
    max_abs: f64,
    rel_sum: f64,
    rel_n: usize,
    n: usize,
}

impl Acc {
    fn push(&mut self, est: f64, truth: f64) {
        let e = (est - truth).abs();
        self.max_abs = self.max_abs.max(e);
        self.n += 1;
        if truth >= MPE_MIN_TRUTH_M {
            self.rel_sum += e / truth;
            self.rel_n += 1;
        }
    }

    fn mpe(&self) -> f64 {
        if self.rel_n == 0 {
            0.0
        } else {
            self.rel_sum / self.rel_n as f64
        }
    }
}

/// ME = max |P_m − P_r|, MPE = mean |P_m − P_r| / P_r, grouped by the
/// station interval of the true mileage.
pub fn compute_errors(estimates: &[f64], truths: &[f64], route: &Route) -> Result<ErrorReport, ReportError> {
    if estimates.len() != truths.len() {
        return Err(ReportError::LengthMismatch {
            estimates: estimates.len(),
            truths: truths.len(),
        });
    }
    if truths.is_empty() {
        return Err(ReportError::EmptySeries);
    }
    let mut per = vec![Acc::default(); route.interval_count()];
    let mut all = Acc::default();
    for (&est, &truth) in estimates.iter().zip(truths) {
        let i = route.interval_of(truth)?;
        per[i].push(est, truth);
        all.push(est, truth);
    }
    Ok(ErrorReport {
        per_interval: per
            .iter()
            .enumerate()
            .map(|(i, a)| IntervalError {
                label: route.interval_label(i),
                me_m: a.max_abs,
                mpe: a.mpe(),
                n_points: a.n,
            })
            .collect(),
        whole_route: RouteError {
            me_m: all.max_abs,
            mpe: all.mpe(),
        },
        n_points: all.n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Self::Table),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

const WHOLE_ROUTE: &str = "Whole Route";

pub fn emit_report(report: &ErrorReport, format: &str) -> Result<String, ReportError> {
    Ok(render(report, format.parse()?))
}

pub fn render(report: &ErrorReport, format: ReportFormat) -> String {
    let mut s = String::new();
    match format {
        ReportFormat::Table => {
            let _ = writeln!(s, "{:<12} {:>10} {:>9}", "Interval", "ME (m)", "MPE");
            for row in &report.per_interval {
                let _ = writeln!(s, "{:<12} {:>10.2} {:>8.2}%", row.label, row.me_m, row.mpe * 100.0);
            }
            let w = report.whole_route;
            let _ = writeln!(s, "{:<12} {:>10.2} {:>8.2}%", WHOLE_ROUTE, w.me_m, w.mpe * 100.0);
        }
        ReportFormat::Csv => {
            s.push_str("interval,me_m,mpe,n_points\n");
            for row in &report.per_interval {
                let _ = writeln!(s, "{},{},{},{}", row.label, row.me_m, row.mpe, row.n_points);
            }
            let w = report.whole_route;
            let _ = writeln!(s, "{},{},{},{}", WHOLE_ROUTE, w.me_m, w.mpe, report.n_points);
        }
        ReportFormat::Json => {
            s = serde_json::to_string_pretty(report).expect("report serialises");
            s.push('\n');
        }
    }
    s
}

pub fn parse_json_report(text: &str) -> Result<ErrorReport, ReportError> {
    serde_json::from_str(text).map_err(|e| ReportError::Json(e.to_string()))
}

/// Direct-integral and visual reports side by side.
pub fn emit_comparison(direct: &ErrorReport, visual: &ErrorReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:>14} {:>11} {:>14} {:>11}",
        "Interval", "Direct ME (m)", "Direct MPE", "Visual ME (m)", "Visual MPE"
    );
    let rows = direct
        .per_interval
        .iter()
        .zip(&visual.per_interval)
        .map(|(d, v)| (d.label.as_str(), d.me_m, d.mpe, v.me_m, v.mpe))
        .chain(std::iter::once((
            WHOLE_ROUTE,
            direct.whole_route.me_m,
            direct.whole_route.mpe,
            visual.whole_route.me_m,
            visual.whole_route.mpe,
        )));
    for (label, dme, dmpe, vme, vmpe) in rows {
        let _ = writeln!(
            s,
            "{:<12} {:>14.2} {:>10.2}% {:>14.2} {:>10.2}%",
            label,
            dme,
            dmpe * 100.0,
            vme,
            vmpe * 100.0
        );
    }
    s
}
