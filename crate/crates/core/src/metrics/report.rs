use std::fmt::Write as _;

use serde::Serialize;

use super::Measure;

/// Collected metrics for one strain image; absent entries were not requested.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricsReport {
    pub snr: Option<Measure<f64>>,
    pub cnr: Option<Measure<f64>>,
    pub strain_ratio: Option<f64>,
    pub rmse: Option<f64>,
    pub mssim: Option<f64>,
    pub cnr_histogram_mean: Option<f64>,
    pub esf_width: Option<Measure<f64>>,
}

impl MetricsReport {
    fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut push = |k, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        push("snr", self.snr.map(|m| m.to_string()));
        push("cnr", self.cnr.map(|m| m.to_string()));
        push("sr", self.strain_ratio.map(|v| v.to_string()));
        push("rmse", self.rmse.map(|v| v.to_string()));
        push("mssim", self.mssim.map(|v| v.to_string()));
        push("cnr_histogram_mean", self.cnr_histogram_mean.map(|v| v.to_string()));
        push("esf_width", self.esf_width.map(|m| m.to_string()));
        out
    }

    /// `metric,value` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k},{v}");
        }
        s
    }

    /// Aligned human-readable block.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k:<20} {v}");
        }
        s
    }
}
