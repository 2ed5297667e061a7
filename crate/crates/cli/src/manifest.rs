//! Manifest loading and conversion into engine objects.

use std::path::Path;

use serde::{Deserialize, Serialize};
use wagner_core::chart::{Chart, FiberPoint};
use wagner_core::connection::{Connection, ConnectionOptions};
use wagner_core::curvature::DEFAULT_FD_STEP;
use wagner_core::finsler::FinslerMetric;
use wagner_core::presets;
use wagner_core::sampling::{SampleBox, Sampler};
use wagner_core::transport::{Curve, TransportMode};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChartSpec {
    Preset(String),
    Inline { gamma: Vec<String> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Preset(String),
    Inline { expr: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default = "one")]
    pub eq22_sigma: f64,
    #[serde(default)]
    pub omega_inverse_transpose: bool,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub allow_m1: bool,
}

fn one() -> f64 {
    1.0
}

fn default_fd_step() -> f64 {
    DEFAULT_FD_STEP
}

impl Default for Options {
    fn default() -> Self {
        Options { eq22_sigma: 1.0, omega_inverse_transpose: false, fd_step: DEFAULT_FD_STEP, seed: 0, allow_m1: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Interior,
    Extended,
}

impl From<Mode> for TransportMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Interior => TransportMode::Interior,
            Mode::Extended => TransportMode::Extended,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub components: Vec<String>,
    pub t_span: [f64; 2],
    pub samples: usize,
    pub v0: Vec<f64>,
    #[serde(default = "interior")]
    pub mode: Mode,
}

fn interior() -> Mode {
    Mode::Interior
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub radius: [f64; 2],
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub m: usize,
    pub chart: ChartSpec,
    pub metric: MetricSpec,
    #[serde(default, rename = "metric_is_L")]
    pub metric_is_l: bool,
    #[serde(default)]
    pub options: Options,
    #[serde(default)]
    pub points: Vec<PointSpec>,
    #[serde(default)]
    pub curves: Vec<CurveSpec>,
    #[serde(default)]
    pub sample_box: Option<BoxSpec>,
}

/// A manifest turned into engine objects.
#[derive(Debug, Clone)]
pub struct Setup {
    pub manifest: Manifest,
    pub chart: Chart,
    pub metric: FinslerMetric,
    pub connection: Connection,
    pub points: Vec<FiberPoint>,
    pub samples: Vec<FiberPoint>,
    pub curves: Vec<(String, Curve, Vec<f64>, Mode)>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Manifest::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Manifest(format!("malformed manifest: {e}")))
    }

    /// Validates shapes and builds the engine objects.
    pub fn setup(self, allow_m1: bool) -> Result<Setup, CliError> {
        let m = self.m;
        if m == 0 || (m == 1 && !(allow_m1 || self.options.allow_m1)) {
            return Err(CliError::Manifest(format!("m = {m} is not supported; m >= 2 is required (m = 1 needs --allow-m1)")));
        }
        let chart = match &self.chart {
            ChartSpec::Preset(name) => presets::chart(name).map_err(core)?,
            ChartSpec::Inline { gamma } => {
                let refs: Vec<&str> = gamma.iter().map(String::as_str).collect();
                Chart::parse(m, &refs).map_err(core)?
            }
        };
        let metric = match &self.metric {
            MetricSpec::Preset(name) => {
                if self.metric_is_l {
                    return Err(CliError::Manifest("metric_is_L applies to inline metrics only".into()));
                }
                presets::metric(name).map_err(core)?
            }
            MetricSpec::Inline { expr } => FinslerMetric::parse(m, expr, "inline", self.metric_is_l).map_err(core)?,
        };
        if chart.m() != m || metric.m() != m {
            return Err(CliError::Manifest(format!("manifest m = {m}, chart m = {}, metric m = {}", chart.m(), metric.m())));
        }
        let o = &self.options;
        if !(o.fd_step.is_finite() && o.fd_step > 0.0) {
            return Err(CliError::Manifest(format!("fd_step must be positive, got {}", o.fd_step)));
        }
        let connection = Connection::new(
            chart.clone(),
            metric.clone(),
            ConnectionOptions { eq22_sigma: o.eq22_sigma, omega_inverse_transpose: o.omega_inverse_transpose },
        )
        .map_err(core)?;

        let n = 2 * m + 1;
        let points = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if p.x.len() != n || p.v.len() != 2 * m {
                    return Err(CliError::Manifest(format!("point {i}: needs {n} base and {} fiber coordinates", 2 * m)));
                }
                FiberPoint::new(p.x.clone(), p.v.clone()).map_err(|e| CliError::Manifest(format!("point {i}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let samples = match &self.sample_box {
            Some(b) => {
                let spec = SampleBox::new(b.x_lo.clone(), b.x_hi.clone(), b.radius, b.count).map_err(|e| CliError::Manifest(format!("sample_box: {e}")))?;
                if spec.fiber_dim != 2 * m {
                    return Err(CliError::Manifest(format!("sample_box bounds need {n} entries")));
                }
                Sampler::new(o.seed).fiber_points(&spec).map_err(core)?
            }
            None => Vec::new(),
        };

        let curves = self
            .curves
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let refs: Vec<&str> = c.components.iter().map(String::as_str).collect();
                let curve = Curve::parse(&refs, c.t_span, c.samples).map_err(|e| CliError::Manifest(format!("curve {i}: {e}")))?;
                if curve.n() != n || c.v0.len() != 2 * m {
                    return Err(CliError::Manifest(format!("curve {i}: needs {n} components and {} entries in v0", 2 * m)));
                }
                let name = c.name.clone().unwrap_or_else(|| format!("curve{i}"));
                if name.is_empty() || !name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-') {
                    return Err(CliError::Manifest(format!("curve {i}: name {name:?} must be non-empty [A-Za-z0-9_-]")));
                }
                Ok((name, curve, c.v0.clone(), c.mode))
            })
            .collect::<Result<Vec<_>, _>>()?;

        Ok(Setup { manifest: self, chart, metric, connection, points, samples, curves })
    }
}

fn core(e: wagner_core::Error) -> CliError {
    CliError::Manifest(e.to_string())
}
