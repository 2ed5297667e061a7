//! The five commands and their report types.
//!
//! Tensor index order in every report is upper index first:
//! `G[c][d] = G^c_d`, `G_vert[c][d][b] = G^c_{d·b}`, `P[c][a] = P^c_a`,
//! `K[c][a][b] = K^c_{ab}`, `R_hor[c][a][b] = R^c_{ab}`,
//! `R_mixed[c][a] = R^c_{na}`.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use wagner_core::chart::FiberPoint;
use wagner_core::connection::Tensor3;
use wagner_core::curvature::{self, BracketPair, FlatnessSample, FLATNESS_TOL};
use wagner_core::linalg::{self, Matrix};
use wagner_core::sampling::{SampleBox, Sampler};
use wagner_core::transport::{self, TransportMode};

use crate::manifest::{Mode, Setup};
use crate::{to_json, CliError};

/// Metrizability residuals above this fail `eval`.
pub const METRIZABILITY_TOL: f64 = 1e-8;
/// Interior transports drifting more than this are flagged.
pub const DRIFT_TOL: f64 = 1e-8;
/// Oracle agreement: relative above this magnitude, absolute below it.
pub const BRACKET_REL_TOL: f64 = 1e-6;
pub const BRACKET_ABS_TOL: f64 = 1e-8;
pub const BRACKET_ABS_FLOOR: f64 = 1e-2;
/// Validation and scans without a sample box use this many unit-box points.
pub const DEFAULT_SAMPLES: usize = 100;

const INDEX_ORDER: &str = "upper index first: G[c][d]=G^c_d, G_vert[c][d][b]=G^c_{d.b}, P[c][a]=P^c_a, K[c][a][b]=K^c_{ab}, R_hor[c][a][b]=R^c_{ab}, R_mixed[c][a]=R^c_{na}";

#[derive(Debug, Clone, Serialize)]
pub struct Engine {
    pub name: &'static str,
    pub version: &'static str,
}

impl Engine {
    pub fn current() -> Self {
        Engine { name: "wagner", version: env!("CARGO_PKG_VERSION") }
    }
}

#[derive(Debug, Clone, Serialize)]
struct OptionsEcho {
    eq22_sigma: f64,
    omega_inverse_transpose: bool,
    omega_inverse_convention: &'static str,
    fd_step: f64,
    seed: u64,
}

#[derive(Debug, Clone, Serialize)]
struct InputEcho {
    m: usize,
    gamma: Vec<String>,
    energy: String,
    metric_label: String,
    points: usize,
    samples: usize,
    curves: usize,
}

#[derive(Debug, Clone, Serialize)]
struct Header {
    engine: Engine,
    command: &'static str,
    options: OptionsEcho,
    input: InputEcho,
    index_order: &'static str,
}

fn header(setup: &Setup, command: &'static str) -> Header {
    let o = &setup.manifest.options;
    Header {
        engine: Engine::current(),
        command,
        options: OptionsEcho {
            eq22_sigma: o.eq22_sigma,
            omega_inverse_transpose: o.omega_inverse_transpose,
            omega_inverse_convention: if o.omega_inverse_transpose { "omega^{ba} omega_{bc} = delta^a_c" } else { "omega^{ab} omega_{bc} = delta^a_c" },
            fd_step: o.fd_step,
            seed: o.seed,
        },
        input: InputEcho {
            m: setup.chart.m(),
            gamma: setup.chart.gamma().iter().map(ToString::to_string).collect(),
            energy: setup.metric.energy().to_string(),
            metric_label: setup.metric.label.clone(),
            points: setup.points.len(),
            samples: setup.samples.len(),
            curves: setup.curves.len(),
        },
        index_order: INDEX_ORDER,
    }
}

#[derive(Debug, Clone, Serialize)]
struct PointRef {
    index: usize,
    x: Vec<f64>,
    v: Vec<f64>,
}

impl PointRef {
    fn new(index: usize, p: &FiberPoint) -> Self {
        PointRef { index, x: p.x().to_vec(), v: p.v().to_vec() }
    }
}

fn default_samples(setup: &Setup, radius: [f64; 2]) -> Vec<FiberPoint> {
    let spec = SampleBox::unit(setup.chart.m(), radius, DEFAULT_SAMPLES);
    Sampler::new(setup.manifest.options.seed).fiber_points(&spec).expect("unit box samples are valid")
}

// ---- validate ----

#[derive(Debug, Clone, Serialize)]
struct ChartIssue {
    point: PointRef,
    message: String,
}

#[derive(Debug, Clone, Serialize)]
struct ChartValidation {
    checked: usize,
    max_identity_deviation: f64,
    max_reeb_defect: f64,
    degenerate: Vec<ChartIssue>,
}

#[derive(Debug, Clone, Serialize)]
struct MetricSample {
    point: PointRef,
    euler_residual: f64,
    positive: bool,
    definite: bool,
    min_eigenvalue: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct MetricValidation {
    checked: usize,
    max_euler_residual: f64,
    failure_count: usize,
    /// The first failures, at most `MAX_LISTED`.
    failures: Vec<MetricSample>,
}

const MAX_LISTED: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct Validation {
    source: &'static str,
    chart: ChartValidation,
    metric: MetricValidation,
    /// Diagnostics for every manifest point, in order.
    points: Vec<MetricSample>,
    passed: bool,
}

impl Validation {
    pub fn passed(&self) -> bool {
        self.passed
    }
}

pub fn run_validation(setup: &Setup) -> Validation {
    let (source, all): (&'static str, Vec<FiberPoint>) = if setup.points.is_empty() && setup.samples.is_empty() {
        ("default unit box", default_samples(setup, [0.5, 2.0]))
    } else {
        ("manifest points and sample box", setup.points.iter().chain(&setup.samples).cloned().collect())
    };

    let chart_results: Vec<Result<(f64, f64), String>> = all
        .par_iter()
        .map(|p| {
            let o = setup.chart.omega(p.x(), setup.manifest.options.omega_inverse_transpose).map_err(|e| e.to_string())?;
            let upper = if setup.manifest.options.omega_inverse_transpose { transpose(&o.upper) } else { o.upper.clone() };
            let dev = linalg::identity_deviation(&upper, &o.lower);
            let reeb = setup.chart.reeb_defect(p.x()).map_err(|e| e.to_string())?.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            Ok((dev, reeb))
        })
        .collect();
    let mut chart = ChartValidation { checked: all.len(), max_identity_deviation: 0.0, max_reeb_defect: 0.0, degenerate: Vec::new() };
    for (i, r) in chart_results.iter().enumerate() {
        match r {
            Ok((dev, reeb)) => {
                chart.max_identity_deviation = chart.max_identity_deviation.max(*dev);
                chart.max_reeb_defect = chart.max_reeb_defect.max(*reeb);
            }
            Err(message) => {
                if chart.degenerate.len() < MAX_LISTED {
                    chart.degenerate.push(ChartIssue { point: PointRef::new(i, &all[i]), message: message.clone() });
                }
            }
        }
    }
    let degenerate_count = chart_results.iter().filter(|r| r.is_err()).count();

    let diagnostics: Vec<MetricSample> = all
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let d = setup.metric.validate_metric(&setup.chart, std::slice::from_ref(p)).samples.remove(0);
            MetricSample {
                point: PointRef::new(i, p),
                euler_residual: d.euler_residual,
                positive: d.positive,
                definite: d.definite,
                min_eigenvalue: d.min_eigenvalue,
                error: d.error.clone(),
            }
        })
        .collect();
    let sample_passed = |s: &MetricSample| s.error.is_none() && s.positive && s.definite && s.euler_residual <= wagner_core::finsler::EULER_TOL;
    let failing: Vec<&MetricSample> = diagnostics.iter().filter(|s| !sample_passed(s)).collect();
    let metric = MetricValidation {
        checked: diagnostics.len(),
        max_euler_residual: diagnostics.iter().map(|s| s.euler_residual).fold(0.0, nan_max),
        failure_count: failing.len(),
        failures: failing.iter().take(MAX_LISTED).map(|s| (*s).clone()).collect(),
    };
    let points = diagnostics[..setup.points.len()].to_vec();
    let passed = degenerate_count == 0 && metric.failure_count == 0;
    Validation { source, chart, metric, points, passed }
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn transpose(m: &Matrix<f64>) -> Matrix<f64> {
    (0..m.len()).map(|i| (0..m.len()).map(|j| m[j][i]).collect()).collect()
}

#[derive(Serialize)]
struct ValidateReport {
    #[serde(flatten)]
    header: Header,
    validation: Validation,
    passed: bool,
}

pub fn validate(setup: &Setup) -> (bool, String) {
    let validation = run_validation(setup);
    let passed = validation.passed;
    (passed, to_json(&ValidateReport { header: header(setup, "validate"), validation, passed }))
}

#[derive(Serialize)]
struct Blocked {
    #[serde(flatten)]
    header: Header,
    validation: Validation,
    note: &'static str,
    passed: bool,
}

/// `Some(report)` when validation fails and `--force` was not given.
fn gate(setup: &Setup, command: &'static str, force: bool) -> Option<(bool, String)> {
    if force {
        return None;
    }
    let validation = run_validation(setup);
    if validation.passed {
        return None;
    }
    Some((false, to_json(&Blocked { header: header(setup, command), validation, note: "validation failed; rerun with --force to evaluate anyway", passed: false })))
}

// ---- eval ----

#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
struct EvalData {
    spray: Vec<f64>,
    G: Matrix<f64>,
    G_vert: Tensor3<f64>,
    G_n: Vec<f64>,
    P: Matrix<f64>,
    K: Tensor3<f64>,
    R_hor: Tensor3<f64>,
    R_mixed: Matrix<f64>,
    K_trace: Vec<f64>,
    R_hor_trace_variant: Tensor3<f64>,
    trace_identity_residual: f64,
    omega_lower: Matrix<f64>,
    omega_upper: Matrix<f64>,
    reeb_defect: Vec<f64>,
    metrizability_residual: Vec<f64>,
    reeb_metrizability_residual: f64,
    max_abs_R_hor: f64,
    max_abs_R_mixed: f64,
}

#[derive(Debug, Clone, Serialize)]
struct EvalPoint {
    point: PointRef,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<EvalData>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    passed: bool,
}

#[derive(Serialize)]
struct EvalReport {
    #[serde(flatten)]
    header: Header,
    metrizability_tolerance: f64,
    points: Vec<EvalPoint>,
    failed_points: usize,
    passed: bool,
}

pub fn eval(setup: &Setup, force: bool) -> (bool, String) {
    if let Some(blocked) = gate(setup, "eval", force) {
        return blocked;
    }
    let points: Vec<EvalPoint> = setup
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| match curvature::evaluate(&setup.connection, p) {
            Ok(e) => {
                let c = &e.connection;
                let worst = c.metrizability.iter().fold(0.0f64, |m, r| nan_max(m, r.abs()));
                let data = EvalData {
                    spray: c.spray.clone(),
                    G: c.g.clone(),
                    G_vert: c.g_vert.clone(),
                    G_n: c.g_n.clone(),
                    P: c.p.clone(),
                    K: c.k.clone(),
                    max_abs_R_hor: e.max_abs_hor(),
                    max_abs_R_mixed: e.max_abs_mixed(),
                    R_hor: e.r_hor.clone(),
                    R_mixed: e.r_mixed.clone(),
                    K_trace: e.k_trace.clone(),
                    R_hor_trace_variant: e.r_hor_trace_variant.clone(),
                    trace_identity_residual: e.trace_identity_residual,
                    omega_lower: c.omega_lower.clone(),
                    omega_upper: c.omega_upper.clone(),
                    reeb_defect: c.reeb_defect.clone(),
                    metrizability_residual: c.metrizability.clone(),
                    reeb_metrizability_residual: c.reeb_metrizability,
                };
                EvalPoint { point: PointRef::new(i, p), result: Some(data), error: None, passed: worst <= METRIZABILITY_TOL }
            }
            Err(err) => EvalPoint { point: PointRef::new(i, p), result: None, error: Some(err.to_string()), passed: false },
        })
        .collect();
    let failed_points = points.iter().filter(|p| !p.passed).count();
    let passed = failed_points == 0;
    (passed, to_json(&EvalReport { header: header(setup, "eval"), metrizability_tolerance: METRIZABILITY_TOL, points, failed_points, passed }))
}

// ---- brackets ----

#[derive(Debug, Clone, Serialize)]
struct PairRow {
    pair: String,
    oracle: Vec<f64>,
    formula: Vec<f64>,
    max_abs_deviation: f64,
    u_component: f64,
    u_residual: f64,
    max_abs_epsilon: f64,
    passed: bool,
}

#[derive(Debug, Clone, Serialize)]
struct BracketPoint {
    point: PointRef,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pairs: Vec<PairRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    passed: bool,
}

#[derive(Debug, Clone, Serialize)]
struct Tolerances {
    relative: f64,
    absolute: f64,
    absolute_below: f64,
}

#[derive(Serialize)]
struct BracketReport {
    #[serde(flatten)]
    header: Header,
    tolerances: Tolerances,
    points: Vec<BracketPoint>,
    max_abs_deviation: f64,
    failed_points: usize,
    passed: bool,
}

/// Formula agreement with the oracle, in the scale-aware sense of the
/// bracket tolerances.
pub fn within_bracket_tolerance(oracle: f64, formula: f64) -> bool {
    let d = (oracle - formula).abs();
    if formula.abs() < BRACKET_ABS_FLOOR {
        d <= BRACKET_ABS_TOL
    } else {
        d <= BRACKET_REL_TOL * formula.abs()
    }
}

fn pair_label(pair: BracketPair) -> String {
    match pair {
        BracketPair::Horizontal(a, b) => format!("e{},e{}", a + 1, b + 1),
        BracketPair::Mixed(a) => format!("e{},U", a + 1),
    }
}

fn bracket_point(setup: &Setup, i: usize, p: &FiberPoint) -> BracketPoint {
    let run = || -> wagner_core::Result<Vec<PairRow>> {
        let e = curvature::evaluate(&setup.connection, p)?;
        let table = curvature::bracket_table(&setup.connection, p, setup.manifest.options.fd_step)?;
        let dim = setup.connection.dim();
        Ok(table
            .into_iter()
            .map(|b| {
                let formula: Vec<f64> = (0..dim)
                    .map(|c| match b.pair {
                        BracketPair::Horizontal(a, bb) => e.r_hor[c][a][bb],
                        BracketPair::Mixed(a) => e.r_mixed[c][a],
                    })
                    .collect();
                let max_abs_deviation = b.vertical.iter().zip(&formula).fold(0.0f64, |m, (o, f)| nan_max(m, (o - f).abs()));
                let max_abs_epsilon = b.epsilon.iter().fold(0.0f64, |m, x| nan_max(m, x.abs()));
                let passed = b.vertical.iter().zip(&formula).all(|(o, f)| within_bracket_tolerance(*o, *f))
                    && b.u_residual.abs() <= BRACKET_REL_TOL
                    && max_abs_epsilon <= BRACKET_REL_TOL;
                PairRow { pair: pair_label(b.pair), oracle: b.vertical, formula, max_abs_deviation, u_component: b.u, u_residual: b.u_residual, max_abs_epsilon, passed }
            })
            .collect())
    };
    match run() {
        Ok(pairs) => {
            let passed = pairs.iter().all(|r| r.passed);
            BracketPoint { point: PointRef::new(i, p), pairs, error: None, passed }
        }
        Err(e) => BracketPoint { point: PointRef::new(i, p), pairs: Vec::new(), error: Some(e.to_string()), passed: false },
    }
}

pub fn brackets(setup: &Setup, force: bool) -> (bool, String) {
    if let Some(blocked) = gate(setup, "brackets", force) {
        return blocked;
    }
    let all: Vec<FiberPoint> = setup.points.iter().chain(&setup.samples).cloned().collect();
    let points: Vec<BracketPoint> = all.par_iter().enumerate().map(|(i, p)| bracket_point(setup, i, p)).collect();
    let max_abs_deviation = points.iter().flat_map(|p| &p.pairs).fold(0.0f64, |m, r| nan_max(m, r.max_abs_deviation));
    let failed_points = points.iter().filter(|p| !p.passed).count();
    let passed = failed_points == 0;
    let report = BracketReport {
        header: header(setup, "brackets"),
        tolerances: Tolerances { relative: BRACKET_REL_TOL, absolute: BRACKET_ABS_TOL, absolute_below: BRACKET_ABS_FLOOR },
        points,
        max_abs_deviation,
        failed_points,
        passed,
    };
    (passed, to_json(&report))
}

// ---- scan ----

#[derive(Debug, Clone, Serialize)]
struct ScanFailure {
    point: PointRef,
    error: String,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct ScanReport {
    #[serde(flatten)]
    header: Header,
    source: &'static str,
    samples: usize,
    tolerance: f64,
    classification: &'static str,
    max_abs_R_hor: f64,
    argmax_R_hor: Option<PointRef>,
    max_abs_R_mixed: f64,
    argmax_R_mixed: Option<PointRef>,
    failures: Vec<ScanFailure>,
    passed: bool,
}

pub fn scan(setup: &Setup, force: bool) -> (bool, String) {
    if let Some(blocked) = gate(setup, "scan", force) {
        return blocked;
    }
    let (source, samples) = if setup.samples.is_empty() { ("default unit box, |v| = 1", default_samples(setup, [1.0, 1.0])) } else { ("sample_box", setup.samples.clone()) };
    let results: Vec<Result<FlatnessSample, String>> = samples.par_iter().map(|p| curvature::flatness_sample(&setup.connection, p).map_err(|e| e.to_string())).collect();
    let failures: Vec<ScanFailure> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().err().map(|e| ScanFailure { point: PointRef::new(i, &samples[i]), error: e.clone() }))
        .collect();
    // Failed samples count as zero so indices still refer to `samples`.
    let per: Vec<FlatnessSample> = results.iter().map(|r| r.clone().unwrap_or(FlatnessSample { max_abs_hor: 0.0, max_abs_mixed: 0.0 })).collect();
    let summary = curvature::FlatnessReport::from_samples(&per);
    let passed = failures.is_empty();
    let report = ScanReport {
        header: header(setup, "scan"),
        source,
        samples: samples.len(),
        tolerance: FLATNESS_TOL,
        classification: if !passed {
            "incomplete"
        } else if summary.flat {
            "flat"
        } else {
            "non-flat"
        },
        max_abs_R_hor: summary.max_abs_hor,
        argmax_R_hor: summary.argmax_hor.map(|i| PointRef::new(i, &samples[i])),
        max_abs_R_mixed: summary.max_abs_mixed,
        argmax_R_mixed: summary.argmax_mixed.map(|i| PointRef::new(i, &samples[i])),
        failures,
        passed,
    };
    (passed, to_json(&report))
}

// ---- transport ----

#[derive(Debug, Clone, Serialize)]
struct CurveRow {
    name: String,
    mode: Mode,
    steps: usize,
    t_span: [f64; 2],
    v0: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f_drift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_admissibility_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_v: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace_file: Option<String>,
    /// Interior transports only; extended drift is a diagnostic.
    #[serde(skip_serializing_if = "Option::is_none")]
    conserved: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    passed: bool,
}

#[derive(Serialize)]
struct TransportReport {
    #[serde(flatten)]
    header: Header,
    drift_tolerance: f64,
    curves: Vec<CurveRow>,
    passed: bool,
}

pub fn transport(setup: &Setup, force: bool, trace_dir: &Path) -> Result<(bool, String), CliError> {
    let mut seen = BTreeSet::new();
    for (name, ..) in &setup.curves {
        if !seen.insert(name.as_str()) {
            return Err(CliError::Manifest(format!("duplicate curve name {name:?}")));
        }
    }
    if let Some(blocked) = gate(setup, "transport", force) {
        return Ok(blocked);
    }
    let results: Vec<_> = setup.curves.par_iter().map(|(_, curve, v0, mode)| transport::transport(&setup.connection, curve, v0, TransportMode::from(*mode))).collect();
    if !setup.curves.is_empty() {
        std::fs::create_dir_all(trace_dir).map_err(|e| CliError::Io(format!("{}: {e}", trace_dir.display())))?;
    }
    let mut rows = Vec::with_capacity(results.len());
    for ((name, curve, v0, mode), result) in setup.curves.iter().zip(results) {
        let mut row = CurveRow {
            name: name.clone(),
            mode: *mode,
            steps: curve.samples(),
            t_span: curve.t_span(),
            v0: v0.clone(),
            f_drift: None,
            max_admissibility_defect: None,
            final_v: None,
            final_energy: None,
            trace_file: None,
            conserved: None,
            error: None,
            passed: false,
        };
        match result {
            Ok(r) => {
                let file = format!("{name}.csv");
                let path = trace_dir.join(&file);
                let mut buf = Vec::new();
                r.write_csv(&mut buf).expect("writing to memory");
                std::fs::write(&path, buf).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                let conserved = (*mode == Mode::Interior).then_some(r.f_drift <= DRIFT_TOL);
                row.passed = conserved.unwrap_or(true);
                row.f_drift = Some(r.f_drift);
                row.max_admissibility_defect = Some(r.max_admissibility_defect);
                row.final_v = Some(r.final_v().to_vec());
                row.final_energy = Some(r.trace.last().expect("non-empty trace").energy);
                row.trace_file = Some(file);
                row.conserved = conserved;
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        rows.push(row);
    }
    let passed = rows.iter().all(|r| r.passed);
    Ok((passed, to_json(&TransportReport { header: header(setup, "transport"), drift_tolerance: DRIFT_TOL, curves: rows, passed })))
}
