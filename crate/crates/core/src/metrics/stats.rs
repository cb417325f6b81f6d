use statrs::distribution::{ContinuousCDF, StudentsT};

use super::Measure;
use crate::error::{invalid, Result};

/// Two-sided paired t-test result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedTTest {
    pub t: Measure<f64>,
    pub p_value: f64,
}

/// Paired t-test on `a − b`.
///
/// With zero spread in the differences `t` is degenerate and `p` is 1 when
/// the differences are all zero, 0 otherwise.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(invalid(format!("sample lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(invalid("paired t-test needs at least two pairs"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(invalid("samples must be finite"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        let p_value = if mean == 0.0 { 1.0 } else { 0.0 };
        return Ok(PairedTTest { t: Measure::Degenerate, p_value });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| invalid(e.to_string()))?;
    let p_value = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(PairedTTest { t: Measure::Value(t), p_value })
}
