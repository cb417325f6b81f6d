use super::Measure;
use crate::error::{invalid, Result};
use crate::field::{RfFrame, StrainImage};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct EsfResult<T> {
    /// Strain sampled along the line.
    pub profile: Vec<T>,
    /// Distance between the 10% and 90% crossings, in pixels along the line.
    pub width_10_90: Measure<T>,
}

/// Least-squares non-decreasing fit (pool adjacent violators).
pub fn isotonic_increasing(v: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(v.len());
    for &x in v {
        blocks.push((x, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            let n = na + nb;
            *blocks.last_mut().unwrap() = ((a * na as f64 + b * nb as f64) / n as f64, n);
        }
    }
    blocks.into_iter().flat_map(|(x, n)| std::iter::repeat(x).take(n)).collect()
}

fn crossing(f: &[f64], level: f64) -> Option<f64> {
    let k = f.iter().position(|&v| v >= level)?;
    if k == 0 {
        return Some(0.0);
    }
    let (a, b) = (f[k - 1], f[k]);
    Some(k as f64 - 1.0 + (level - a) / (b - a))
}

/// Edge spread function along the segment from `start` to `end` (1-based `(y, x)`).
///
/// The profile is fitted with a monotone curve oriented by comparing its two
/// ends, normalized to [0, 1], and the 10%–90% rise distance is reported.
pub fn esf<T: Scalar>(strain: &StrainImage<T>, start: (T, T), end: (T, T), num_samples: usize) -> Result<EsfResult<T>> {
    if num_samples < 2 {
        return Err(invalid("ESF needs at least two samples"));
    }
    let (m, n) = strain.dim();
    let inside = |(y, x): (T, T)| {
        y.is_finite() && x.is_finite() && y >= T::one() && x >= T::one() && y <= T::of_usize(m) && x <= T::of_usize(n)
    };
    if !inside(start) || !inside(end) {
        return Err(invalid("ESF line endpoints must lie inside the image"));
    }
    let frame = RfFrame::from_samples_unchecked(strain.values().clone());
    let steps = T::of_usize(num_samples - 1);
    let profile: Vec<T> = (0..num_samples)
        .map(|k| {
            let t = T::of_usize(k) / steps;
            frame.interp_unchecked(start.0 + (end.0 - start.0) * t, start.1 + (end.1 - start.1) * t).value
        })
        .collect();
    let (dy, dx) = ((end.0 - start.0).to_f64_lossy(), (end.1 - start.1).to_f64_lossy());
    let spacing = (dy * dy + dx * dx).sqrt() / (num_samples - 1) as f64;

    let raw: Vec<f64> = profile.iter().map(|v| v.to_f64_lossy()).collect();
    let q = (num_samples / 4).max(1);
    let head = raw[..q].iter().sum::<f64>();
    let tail = raw[num_samples - q..].iter().sum::<f64>();
    let sign = if tail >= head { 1.0 } else { -1.0 };
    let fit = isotonic_increasing(&raw.iter().map(|v| sign * v).collect::<Vec<_>>());
    let (lo, hi) = (fit[0], fit[num_samples - 1]);
    let width_10_90 = if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE) {
        Measure::Degenerate
    } else {
        let norm: Vec<f64> = fit.iter().map(|v| (v - lo) / (hi - lo)).collect();
        match (crossing(&norm, 0.1), crossing(&norm, 0.9)) {
            (Some(a), Some(b)) => Measure::Value(T::of((b - a) * spacing)),
            _ => Measure::Degenerate,
        }
    };
    Ok(EsfResult { profile, width_10_90 })
}
