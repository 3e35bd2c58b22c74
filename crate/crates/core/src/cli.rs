//! `sleeperloc` command line.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data errors.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{CalibrationFile, Scenario, ScenarioConfig};
use crate::detector::score_detections;
use crate::estimator::EstimatorKind;
use crate::io::{self as csvio, IoError};
use crate::pipeline;
use crate::report::{compute_errors, emit_comparison, render, ReportFormat};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "sleeperloc", version, about = "Sleeper-anchored train localization toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a run and write run.csv (plus detection dumps and optional PGM frames)
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an estimator over a run file and write an estimate trace
    Estimate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute ME / MPE per station interval from an estimate trace
    Evaluate {
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Score per-frame detections against ground truth
    DetectEval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        tol: f64,
    },
    /// Solve the IPM homography and pixel scale from a calibration file
    Calibrate {
        #[arg(long)]
        points: PathBuf,
    },
    /// Simulate, run both estimators and print a side-by-side report
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Directory for run, traces, reports and the error curve
        #[arg(long, default_value = "compare_out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Method {
    Visual,
    Direct,
}

impl From<Method> for EstimatorKind {
    fn from(m: Method) -> Self {
        match m {
            Method::Visual => EstimatorKind::Visual,
            Method::Direct => EstimatorKind::Direct,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Table => ReportFormat::Table,
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

fn file_err(path: &Path, e: impl Into<IoError>) -> Error {
    Error::File {
        path: path.display().to_string(),
        source: e.into(),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| file_err(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| file_err(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| file_err(path, e))
}

fn make_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| file_err(dir, e))
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    Ok(ScenarioConfig::load(path)?.build()?)
}

fn simulate(config: &Path, out: &Path) -> Result<String> {
    let sc = load_scenario(config)?;
    let run = pipeline::simulate(&sc)?;
    make_dir(out)?;
    let run_path = out.join("run.csv");
    csvio::write_run_csv(&run, create(&run_path)?).map_err(|e| file_err(&run_path, e))?;

    let dets: Vec<_> = run.frames.iter().map(|f| f.oracle_detections.clone()).collect();
    let p = out.join("detections.csv");
    csvio::write_detection_dump(&dets, create(&p)?).map_err(|e| file_err(&p, e))?;
    let truth: Vec<_> = run.frames.iter().map(|f| f.truth_px.clone()).collect();
    let p = out.join("truth.csv");
    csvio::write_truth_dump(&truth, create(&p)?).map_err(|e| file_err(&p, e))?;

    let mut rasters = 0;
    for (k, f) in run.frames.iter().enumerate() {
        if let Some(r) = &f.aerial_raster {
            let p = out.join(format!("frame_{k:06}.pgm"));
            let mut w = create(&p)?;
            r.write_pgm(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| file_err(&p, e))?;
            rasters += 1;
        }
    }
    Ok(format!(
        "wrote {} frames to {} ({} raster frames)\n",
        run.frames.len(),
        run_path.display(),
        rasters
    ))
}

fn estimate(run_path: &Path, method: Method, config: &Path, out: &Path) -> Result<String> {
    let sc = load_scenario(config)?;
    let rows = csvio::read_run_csv(open(run_path)?).map_err(|e| file_err(run_path, e))?;
    let run = csvio::run_from_rows(rows, &sc);
    let est = pipeline::estimate(&run, method.into(), &sc)?;
    let truth: Vec<f64> = run.frames.iter().map(|f| f.true_mileage).collect();
    csvio::write_trace_csv(&est, &truth, sc.route.total_length(), create(out)?)
        .map_err(|e| file_err(out, e))?;
    Ok(format!("wrote {} estimates to {}\n", est.len(), out.display()))
}

fn evaluate(estimates: &Path, config: &Path, format: Format) -> Result<String> {
    let sc = load_scenario(config)?;
    let rows = csvio::read_trace_csv(open(estimates)?).map_err(|e| file_err(estimates, e))?;
    let est: Vec<f64> = rows.iter().map(|r| r.estimate).collect();
    let truth: Vec<f64> = rows.iter().map(|r| r.truth).collect();
    let report = compute_errors(&est, &truth, &sc.route)?;
    Ok(render(&report, format.into()))
}

fn detect_eval(pred: &Path, truth: &Path, tol: f64) -> Result<String> {
    let p = csvio::read_detection_dump(open(pred)?).map_err(|e| file_err(pred, e))?;
    let t = csvio::read_detection_dump(open(truth)?).map_err(|e| file_err(truth, e))?;
    let s = score_detections(&p, &t, tol);
    Ok(format!(
        "precision {:.4}\nrecall {:.4}\nf1 {:.4}\ntp {}\nfp {}\nfn {}\n",
        s.precision, s.recall, s.f1, s.true_positives, s.false_positives, s.false_negatives
    ))
}

fn calibrate(points: &Path) -> Result<String> {
    let cal = CalibrationFile::load(points)?.solve()?;
    let m = cal.homography.matrix();
    let mut s = String::from("H =\n");
    for row in m {
        s.push_str(&format!("  [{:>16.9e} {:>16.9e} {:>16.9e}]\n", row[0], row[1], row[2]));
    }
    s.push_str(&format!("r = {} px/m\n", cal.scale.px_per_m()));
    Ok(s)
}

fn compare(config: &Path, out: &Path) -> Result<String> {
    let sc = load_scenario(config)?;
    let c = pipeline::compare(&sc)?;
    make_dir(out)?;
    let len = sc.route.total_length();
    let truth: Vec<f64> = c.run.frames.iter().map(|f| f.true_mileage).collect();

    let p = out.join("run.csv");
    csvio::write_run_csv(&c.run, create(&p)?).map_err(|e| file_err(&p, e))?;
    for (name, est) in [("direct", &c.direct), ("visual", &c.visual)] {
        let p = out.join(format!("estimates_{name}.csv"));
        csvio::write_trace_csv(est, &truth, len, create(&p)?).map_err(|e| file_err(&p, e))?;
    }
    write_file(&out.join("report_direct.json"), &render(&c.direct_report, ReportFormat::Json))?;
    write_file(&out.join("report_visual.json"), &render(&c.visual_report, ReportFormat::Json))?;

    let t: Vec<f64> = c.run.frames.iter().map(|f| f.t).collect();
    let err = |est: &[crate::PositionEstimate]| -> Vec<f64> {
        pipeline::reported_mileages(est, len)
            .iter()
            .zip(&truth)
            .map(|(e, r)| e - r)
            .collect()
    };
    let p = out.join("error_curve.csv");
    csvio::write_error_curve(&t, &err(&c.direct), &err(&c.visual), create(&p)?)
        .map_err(|e| file_err(&p, e))?;

    let table = emit_comparison(&c.direct_report, &c.visual_report);
    write_file(&out.join("comparison.txt"), &table)?;
    Ok(table)
}

fn dispatch(cmd: Command) -> Result<String> {
    match cmd {
        Command::Simulate { config, out } => simulate(&config, &out),
        Command::Estimate {
            run,
            method,
            config,
            out,
        } => estimate(&run, method, &config, &out),
        Command::Evaluate {
            estimates,
            config,
            format,
        } => evaluate(&estimates, &config, format),
        Command::DetectEval { pred, truth, tol } => detect_eval(&pred, &truth, tol),
        Command::Calibrate { points } => calibrate(&points),
        Command::Compare { config, out } => compare(&config, &out),
    }
}

/// Run the CLI with explicit argument list and output streams.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    if let Command::DetectEval { tol, .. } = &cli.command {
        if !(*tol > 0.0) {
            let _ = writeln!(stderr, "error: --tol must be > 0");
            return EXIT_USAGE;
        }
    }
    match dispatch(cli.command) {
        Ok(text) => {
            let _ = stdout.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_DATA
        }
    }
}

/// Entry point over the process arguments and standard streams.
pub fn cli_main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
