//! Built-in charts and energies addressable by name.

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::finsler::FinslerMetric;

pub const CHART_NAMES: [&str; 1] = ["HEIS5"];
pub const METRIC_NAMES: [&str; 4] = ["F_EUC", "CURV5", "WARP5", "RAND5"];

/// Heisenberg chart, m = 2: Γ = (−x2, 0, −x4, 0).
pub const HEIS5: [&str; 4] = ["-x2", "0", "-x4", "0"];

pub fn chart(name: &str) -> Result<Chart> {
    match name {
        "HEIS5" => Chart::parse(2, &HEIS5),
        _ => Err(Error::InvalidInput(format!("unknown chart preset `{name}`; known: {}", CHART_NAMES.join(", ")))),
    }
}

/// Energy text of a metric preset (all presets have m = 2).
pub fn metric_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "F_EUC" => "v1^2 + v2^2 + v3^2 + v4^2",
        "CURV5" => "exp(2*x2)*v1^2 + v2^2 + v3^2 + v4^2",
        "WARP5" => "exp(2*x1)*v1^2 + v2^2 + v3^2 + v4^2",
        "RAND5" => "(sqrt(v1^2 + v2^2 + v3^2 + v4^2) + 0.1*v1)^2",
        _ => return None,
    })
}

pub fn metric(name: &str) -> Result<FinslerMetric> {
    let src = metric_source(name)
        .ok_or_else(|| Error::InvalidInput(format!("unknown metric preset `{name}`; known: {}", METRIC_NAMES.join(", "))))?;
    FinslerMetric::parse(2, src, name, false)
}
