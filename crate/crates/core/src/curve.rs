//! Time series of estimated or exact observables, shared by the simulator and
//! the analytic evaluators so their outputs can be diffed row by row.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::exppoly::ExpPoly;

pub const CSV_HEADER: &str = "time,observable,mean,stderr,n";

/// One value of one observable at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// `None` when it cannot be estimated (a single replica).
    pub stderr: Option<f64>,
    /// Number of independent samples; `None` for exact values.
    pub n: Option<u64>,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { mean: value, stderr: Some(0.0), n: None }
    }

    /// Distance from `target` in standard errors. Infinite when the standard
    /// error is missing or zero and the values differ.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = (self.mean - target).abs();
        match self.stderr {
            Some(se) if se > 0.0 => diff / se,
            _ if diff == 0.0 => 0.0,
            _ => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub observable: String,
    pub values: Vec<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DensityCurve {
    pub times: Vec<f64>,
    pub series: Vec<Series>,
}

impl DensityCurve {
    pub fn series(&self, observable: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.observable == observable)
    }

    /// Value of `observable` at the sample time closest to `t`.
    pub fn at(&self, observable: &str, t: f64) -> Option<Estimate> {
        let idx = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        self.series(observable).map(|s| s.values[idx])
    }

    /// Exact curves evaluated on a time grid.
    pub fn from_exact(times: &[f64], observables: &[(String, &ExpPoly)]) -> Self {
        Self {
            times: times.to_vec(),
            series: observables
                .iter()
                .map(|(name, f)| Series {
                    observable: name.clone(),
                    values: times.iter().map(|&t| Estimate::exact(f.eval(t))).collect(),
                })
                .collect(),
        }
    }

    /// CSV rows ordered by time, then by observable.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            for s in &self.series {
                let e = &s.values[i];
                let stderr = e.stderr.map_or_else(|| "NA".to_string(), |v| v.to_string());
                let n = e.n.map_or_else(|| "exact".to_string(), |v| v.to_string());
                let _ = writeln!(out, "{t},{},{},{stderr},{n}", s.observable, e.mean);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exppoly::{int, ExpPoly};

    #[test]
    fn csv_layout() {
        let curve = DensityCurve {
            times: vec![0.5, 1.0],
            series: vec![Series {
                observable: "layer:1".into(),
                values: vec![
                    Estimate { mean: 0.25, stderr: Some(0.01), n: Some(200) },
                    Estimate { mean: 0.3, stderr: None, n: Some(1) },
                ],
            }],
        };
        assert_eq!(
            curve.to_csv(),
            "time,observable,mean,stderr,n\n0.5,layer:1,0.25,0.01,200\n1,layer:1,0.3,NA,1\n"
        );
    }

    #[test]
    fn exact_rows() {
        let f = &ExpPoly::constant(int(1)) - &ExpPoly::exp(int(1));
        let curve = DensityCurve::from_exact(&[0.0], &[("layer:1".into(), &f)]);
        assert_eq!(curve.to_csv().lines().nth(1), Some("0,layer:1,0,0,exact"));
        assert_eq!(curve.at("layer:1", 0.1).unwrap().z_score(0.0), 0.0);
    }
}
