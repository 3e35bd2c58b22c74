//! End-to-end compositions used by the CLI and the experiments.

use crate::config::Scenario;
use crate::detector::OracleDetector;
use crate::estimator::{run_estimator, EstimatorKind, PositionEstimate};
use crate::report::{compute_errors, ErrorReport};
use crate::sim::{generate_run, SimRun};
use crate::Result;

pub fn simulate(sc: &Scenario) -> Result<SimRun> {
    Ok(generate_run(sc)?)
}

/// Estimate on oracle detections.
pub fn estimate(run: &SimRun, kind: EstimatorKind, sc: &Scenario) -> Result<Vec<PositionEstimate>> {
    Ok(run_estimator(run, kind, &sc.ctx, &OracleDetector)?)
}

pub fn reported_mileages(estimates: &[PositionEstimate], route_length: f64) -> Vec<f64> {
    estimates
        .iter()
        .map(|e| e.reported_mileage(route_length))
        .collect()
}

pub fn evaluate(run: &SimRun, estimates: &[PositionEstimate]) -> Result<ErrorReport> {
    let est = reported_mileages(estimates, run.route.total_length());
    let truth: Vec<f64> = run.frames.iter().map(|f| f.true_mileage).collect();
    Ok(compute_errors(&est, &truth, &run.route)?)
}

/// Both estimators on one simulated run.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub run: SimRun,
    pub direct: Vec<PositionEstimate>,
    pub visual: Vec<PositionEstimate>,
    pub direct_report: ErrorReport,
    pub visual_report: ErrorReport,
}

pub fn compare(sc: &Scenario) -> Result<Comparison> {
    let run = simulate(sc)?;
    let direct = estimate(&run, EstimatorKind::Direct, sc)?;
    let visual = estimate(&run, EstimatorKind::Visual, sc)?;
    let direct_report = evaluate(&run, &direct)?;
    let visual_report = evaluate(&run, &visual)?;
    Ok(Comparison {
        run,
        direct,
        visual,
        direct_report,
        visual_report,
    })
}
