//! Integer-lag initial displacement by dynamic programming along each A-line.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::{DisplacementField, RfFrame};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedParams<T> {
    /// Largest axial lag searched, in samples.
    pub max_lag: usize,
    /// Cost per sample of lag change between neighboring rows.
    pub smoothness_weight: T,
    /// Odd width of the cross-column median filter; 1 disables it.
    pub median_window: usize,
}

impl<T: Scalar> Default for SeedParams<T> {
    fn default() -> Self {
        Self { max_lag: 10, smoothness_weight: T::of(0.2), median_window: 5 }
    }
}

impl<T: Scalar> SeedParams<T> {
    pub fn validate(&self, rows: usize) -> Result<()> {
        if self.max_lag == 0 || self.max_lag.saturating_mul(2) >= rows {
            return Err(invalid(format!("max_lag must be in [1, {}) for {rows} rows, got {}", rows.div_ceil(2), self.max_lag)));
        }
        if !self.smoothness_weight.is_finite() || self.smoothness_weight < T::zero() {
            return Err(invalid("smoothness weight must be finite and nonnegative"));
        }
        if self.median_window % 2 == 0 {
            return Err(invalid(format!("median window must be odd, got {}", self.median_window)));
        }
        Ok(())
    }
}

/// Lags ordered by preference for tie-breaking: smaller `|k|`, then smaller `k`.
fn preference_order(max_lag: usize) -> Vec<i64> {
    let l = max_lag as i64;
    let mut lags: Vec<i64> = (-l..=l).collect();
    lags.sort_by_key(|&k| (k.abs(), k));
    lags
}

/// Minimal-cost lag path for one column.
///
/// Stage cost `|I1(i) − I2(i + k)|` (zero outside the frame), transition
/// cost `w · |k − k_prev|`.
pub fn dp_column<T: Scalar>(pre: &[T], post: &[T], max_lag: usize, weight: T) -> Vec<i64> {
    let m = pre.len();
    let width = 2 * max_lag + 1;
    let lag_of = |t: usize| t as i64 - max_lag as i64;
    let order: Vec<usize> = preference_order(max_lag).into_iter().map(|k| (k + max_lag as i64) as usize).collect();
    let stage = |i: usize, t: usize| {
        let target = i as i64 + lag_of(t);
        let other = if target >= 0 && (target as usize) < m { post[target as usize] } else { T::zero() };
        (pre[i] - other).abs()
    };
    let mut acc: Vec<T> = (0..width).map(|t| stage(0, t)).collect();
    let mut back = vec![0u16; m * width];
    let mut next = vec![T::zero(); width];
    for i in 1..m {
        for t in 0..width {
            let mut best = T::infinity();
            let mut arg = order[0];
            for &s in &order {
                let c = acc[s] + weight * T::of_usize(t.abs_diff(s));
                if c < best {
                    best = c;
                    arg = s;
                }
            }
            next[t] = best + stage(i, t);
            back[i * width + t] = arg as u16;
        }
        std::mem::swap(&mut acc, &mut next);
    }
    let mut t = order[0];
    let mut best = T::infinity();
    for &s in &order {
        if acc[s] < best {
            best = acc[s];
            t = s;
        }
    }
    let mut path = vec![0i64; m];
    for i in (0..m).rev() {
        path[i] = lag_of(t);
        if i > 0 {
            t = back[i * width + t] as usize;
        }
    }
    path
}

/// Median across columns with symmetric truncation at the lateral edges.
fn median_across_columns(lags: &Array2<i64>, window: usize) -> Array2<i64> {
    let (m, n) = lags.dim();
    let half = window / 2;
    let mut out = Array2::zeros((m, n));
    let mut buf = Vec::with_capacity(window);
    for r in 0..m {
        for c in 0..n {
            let h = half.min(c).min(n - 1 - c);
            buf.clear();
            buf.extend((c - h..=c + h).map(|k| lags[[r, k]]));
            buf.sort_unstable();
            out[[r, c]] = buf[buf.len() / 2];
        }
    }
    out
}

/// Coarse integer axial displacement with zero lateral component.
pub fn dp_seed<T: Scalar>(frame1: &RfFrame<T>, frame2: &RfFrame<T>, params: &SeedParams<T>) -> Result<DisplacementField<T>> {
    if frame1.dim() != frame2.dim() {
        return Err(invalid(format!("frame shapes differ: {:?} vs {:?}", frame1.dim(), frame2.dim())));
    }
    let (m, n) = frame1.dim();
    params.validate(m)?;
    let mut lags = Array2::zeros((m, n));
    for c in 0..n {
        let pre = frame1.samples().column(c).to_vec();
        let post = frame2.samples().column(c).to_vec();
        let path = dp_column(&pre, &post, params.max_lag, params.smoothness_weight);
        lags.column_mut(c).iter_mut().zip(path).for_each(|(dst, k)| *dst = k);
    }
    let lags = median_across_columns(&lags, params.median_window);
    Ok(DisplacementField::from_axial_fn(m, n, |r, c| T::of(lags[[r, c]] as f64)))
}
