//! Run specification: parsed from flags, from a JSON file, or both (flags win).

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GraphArg {
    Cycle,
    Regular,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MeasureArg {
    Root,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    /// Substrate: cycle, regular tree ball or random tree ball.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphArg>,
    /// Cycle length.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Degree of the regular tree.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    /// Degree law, `k:weight[,k:weight...]` with rational weights.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atoms: Option<String>,
    /// Second degree law for generating-function comparisons.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub versus: Option<String>,
    /// Ball radius.
    #[arg(long = "R")]
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub radius: Option<u32>,
    /// Boundary buffer excluded from measurement.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buffer: Option<u32>,
    /// Time horizon.
    #[arg(long = "T")]
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Sample times, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    /// Sample times as `start:step:end`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of layers whose occupancy is stored per vertex.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub track_layers: Option<u32>,
    /// Layers whose densities are reported, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<u32>>,
    /// Column patterns, highest layer first, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patterns: Option<Vec<String>>,
    /// Random trees: measure the root or all interior vertices.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureArg>,
    /// Output file; standard output when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Pattern of the motive system.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    /// Print every motive's closed form.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub show_closed_form: Option<bool>,
    /// Comparison to certify: 3, 4 or 5.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem: Option<u8>,
    /// Largest degree for the layer comparison.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dmax: Option<u32>,
    /// Validation: exact-algebra criteria only.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quick: Option<bool>,
}

impl RunSpec {
    /// `self` with every field set in `over` replaced.
    pub fn overridden_by(self, over: RunSpec) -> RunSpec {
        macro_rules! pick {
            ($($f:ident),*) => { RunSpec { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            graph, n, d, atoms, versus, radius, buffer, horizon, times, grid, replicas, seed, track_layers,
            layers, patterns, measure, out, format, pattern, show_closed_form, theorem, dmax, quick
        )
    }

    pub fn from_json(text: &str) -> Result<RunSpec, String> {
        serde_json::from_str(text).map_err(|e| format!("config: {e}"))
    }
}

/// `start:step:end`, inclusive of `end` up to rounding.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("grid {s:?}: expected start:step:end")))
        .collect::<Result<_, _>>()?;
    let [start, step, end] = parts[..] else {
        return Err(format!("grid {s:?}: expected start:step:end"));
    };
    if !(step > 0.0) || !(end >= start) || !start.is_finite() || !end.is_finite() {
        return Err(format!("grid {s:?}: need step > 0 and end >= start"));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    if n > 1_000_000 {
        return Err(format!("grid {s:?}: more than a million points"));
    }
    Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:0.5:2").unwrap(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(parse_grid("0:0.1:10").unwrap().len(), 101);
        assert_eq!(parse_grid("0:0.1:0.3").unwrap(), vec![0.0, 0.1, 0.2, 0.3]);
        assert!(parse_grid("0:0:1").is_err());
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("2:1:1").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = RunSpec::from_json(r#"{"graph":"cycle","n":50,"T":4,"seed":3}"#).unwrap();
        let flags = RunSpec { seed: Some(9), ..Default::default() };
        let merged = file.overridden_by(flags);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.n, Some(50));
        assert_eq!(merged.horizon, Some(4.0));
        assert!(RunSpec::from_json(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let spec = RunSpec { graph: Some(GraphArg::Random), atoms: Some("2:1/2,3:1/2".into()), radius: Some(12), ..Default::default() };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"graph":"random","atoms":"2:1/2,3:1/2","R":12}"#);
        assert_eq!(RunSpec::from_json(&json).unwrap(), spec);
    }
}
