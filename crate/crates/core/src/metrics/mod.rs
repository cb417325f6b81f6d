//! Strain-image quality metrics.
//!
//! Window statistics use the unbiased (n − 1) variance. SNR is the ratio of
//! the mean absolute strain to its standard deviation; CNR is
//! `sqrt(2 (μ_b − μ_t)² / (σ_b² + σ_t²))`; SR is `μ_t / μ_b`, so stiff
//! targets give values below one.

mod esf;
mod report;
mod ssim;
mod stats;

pub use self::esf::{esf, isotonic_increasing, EsfResult};
pub use self::report::MetricsReport;
pub use self::ssim::{mssim, SsimConfig};
pub use self::stats::{paired_ttest, PairedTTest};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{FrameMeta, StrainImage};
use crate::scalar::Scalar;

/// Number of target windows in a CNR histogram.
pub const HISTOGRAM_TARGETS: usize = 6;
/// Number of background windows in a CNR histogram.
pub const HISTOGRAM_BACKGROUNDS: usize = 20;

/// A metric that is either a finite value or undefined because a spread vanished.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Measure<T> {
    Value(T),
    Degenerate,
}

impl<T: Copy> Measure<T> {
    pub fn value(self) -> Option<T> {
        match self {
            Self::Value(v) => Some(v),
            Self::Degenerate => None,
        }
    }

    pub fn is_degenerate(self) -> bool {
        matches!(self, Self::Degenerate)
    }
}

impl<T: std::fmt::Display> std::fmt::Display for Measure<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Value(v) => write!(f, "{v}"),
            Self::Degenerate => f.write_str("degenerate"),
        }
    }
}

/// Rectangular region of a strain image; `top_row`/`left_col` are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub top_row: usize,
    pub left_col: usize,
    pub height: usize,
    pub width: usize,
}

impl WindowSpec {
    pub fn new(top_row: usize, left_col: usize, height: usize, width: usize) -> Self {
        Self { top_row, left_col, height, width }
    }

    pub fn validate(&self, dim: (usize, usize)) -> Result<()> {
        if self.height < 2 || self.width < 2 {
            return Err(invalid(format!("window {self:?} must be at least 2x2")));
        }
        if self.top_row + self.height > dim.0 || self.left_col + self.width > dim.1 {
            return Err(invalid(format!("window {self:?} exceeds {}x{} image", dim.0, dim.1)));
        }
        Ok(())
    }

    fn values<T: Scalar>(&self, img: &StrainImage<T>) -> Result<Vec<T>> {
        self.validate(img.dim())?;
        let v = img.values();
        Ok((self.top_row..self.top_row + self.height)
            .flat_map(|r| (self.left_col..self.left_col + self.width).map(move |c| (r, c)))
            .map(|(r, c)| v[[r, c]])
            .collect())
    }
}

/// Window extent in samples covering `extent_m` metres, or 32x8 without usable metadata.
pub fn window_extent(meta: Option<&FrameMeta>, extent_m: f64) -> (usize, usize) {
    match meta {
        Some(m) if m.axial_spacing_m > 0.0 && m.lateral_spacing_m > 0.0 => (
            ((extent_m / m.axial_spacing_m).round() as usize).max(2),
            ((extent_m / m.lateral_spacing_m).round() as usize).max(2),
        ),
        _ => (32, 8),
    }
}

/// Sample mean and unbiased variance.
pub(crate) fn mean_var<T: Scalar>(v: &[T]) -> (T, T) {
    let n = T::of_usize(v.len());
    let mean = v.iter().copied().sum::<T>() / n;
    let ss: T = v.iter().map(|&x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - T::one()))
}

pub fn snr<T: Scalar>(strain: &StrainImage<T>, background: &WindowSpec) -> Result<Measure<T>> {
    let v = background.values(strain)?;
    let (_, var) = mean_var(&v);
    let mean_abs = v.iter().map(|x| x.abs()).sum::<T>() / T::of_usize(v.len());
    if var == T::zero() {
        return Ok(Measure::Degenerate);
    }
    Ok(Measure::Value(mean_abs / var.sqrt()))
}

/// CNR from window moments.
pub fn cnr_from_moments<T: Scalar>(mean_t: T, var_t: T, mean_b: T, var_b: T) -> Measure<T> {
    let denom = var_b + var_t;
    if denom == T::zero() {
        return Measure::Degenerate;
    }
    let diff = mean_b - mean_t;
    Measure::Value((T::of(2.0) * diff * diff / denom).sqrt())
}

pub fn cnr<T: Scalar>(strain: &StrainImage<T>, target: &WindowSpec, background: &WindowSpec) -> Result<Measure<T>> {
    let (mt, vt) = mean_var(&target.values(strain)?);
    let (mb, vb) = mean_var(&background.values(strain)?);
    Ok(cnr_from_moments(mt, vt, mb, vb))
}

pub fn strain_ratio<T: Scalar>(strain: &StrainImage<T>, target: &WindowSpec, background: &WindowSpec) -> Result<T> {
    let (mt, _) = mean_var(&target.values(strain)?);
    let (mb, _) = mean_var(&background.values(strain)?);
    if mb == T::zero() {
        return Err(Error::DivisionByZero("background window mean is zero".into()));
    }
    Ok(mt / mb)
}

pub fn rmse<T: Scalar>(estimated: &StrainImage<T>, truth: &StrainImage<T>) -> Result<T> {
    if estimated.dim() != truth.dim() {
        return Err(invalid(format!("shape mismatch: {:?} vs {:?}", estimated.dim(), truth.dim())));
    }
    let n = estimated.values().len();
    if n == 0 {
        return Err(invalid("empty strain image"));
    }
    let ss: T = estimated.values().iter().zip(truth.values()).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok((ss / T::of_usize(n)).sqrt())
}

/// CNR for every (target, background) pair, targets major.
///
/// The usual layout is [`HISTOGRAM_TARGETS`] x [`HISTOGRAM_BACKGROUNDS`] = 120 values.
pub fn cnr_histogram<T: Scalar>(
    strain: &StrainImage<T>,
    targets: &[WindowSpec],
    backgrounds: &[WindowSpec],
) -> Result<Vec<Measure<T>>> {
    if targets.is_empty() || backgrounds.is_empty() {
        return Err(invalid("histogram needs at least one target and one background window"));
    }
    let t: Vec<(T, T)> = targets.iter().map(|w| w.values(strain).map(|v| mean_var(&v))).collect::<Result<_>>()?;
    let b: Vec<(T, T)> = backgrounds.iter().map(|w| w.values(strain).map(|v| mean_var(&v))).collect::<Result<_>>()?;
    Ok(t.iter()
        .flat_map(|&(mt, vt)| b.iter().map(move |&(mb, vb)| cnr_from_moments(mt, vt, mb, vb)))
        .collect())
}

/// Mean of the non-degenerate histogram entries.
pub fn histogram_mean<T: Scalar>(h: &[Measure<T>]) -> Option<T> {
    let vals: Vec<T> = h.iter().filter_map(|m| m.value()).collect();
    if vals.is_empty() {
        return None;
    }
    Some(vals.iter().copied().sum::<T>() / T::of_usize(vals.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    fn img(v: Array2<f64>) -> StrainImage<f64> {
        StrainImage::new(v, 3)
    }

    #[test]
    fn snr_examples() {
        let s = img(Array2::from_shape_vec((2, 2), vec![1.0, 1.0, 1.0, 3.0]).unwrap());
        let w = WindowSpec::new(0, 0, 2, 2);
        assert_abs_diff_eq!(snr(&s, &w).unwrap().value().unwrap(), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(snr(&s.scaled(7.0), &w).unwrap().value().unwrap(), 1.5, epsilon = 1e-12);
        let flat = img(Array2::from_elem((4, 4), 0.02));
        assert!(snr(&flat, &w).unwrap().is_degenerate());
    }

    #[test]
    fn cnr_examples() {
        assert_abs_diff_eq!(cnr_from_moments(0.01, 1e-6, 0.02, 1e-6).value().unwrap(), 10.0, epsilon = 1e-9);
        let s = img(Array2::from_shape_fn((8, 8), |(r, c)| (r * 3 + c) as f64 * 0.01));
        let a = WindowSpec::new(0, 0, 3, 3);
        let b = WindowSpec::new(4, 4, 3, 3);
        assert_eq!(cnr(&s, &a, &a).unwrap().value(), Some(0.0));
        let ab = cnr(&s, &a, &b).unwrap().value().unwrap();
        let ba = cnr(&s, &b, &a).unwrap().value().unwrap();
        assert_abs_diff_eq!(ab, ba, epsilon = 1e-12);
        let flat = img(Array2::from_elem((8, 8), 1.0));
        assert!(cnr(&flat, &a, &b).unwrap().is_degenerate());
    }

    #[test]
    fn strain_ratio_examples() {
        let mut v = Array2::from_elem((4, 8), 0.02);
        v.slice_mut(ndarray::s![.., 4..]).fill(0.005);
        let s = img(v);
        let t = WindowSpec::new(0, 4, 4, 4);
        let b = WindowSpec::new(0, 0, 4, 4);
        assert_abs_diff_eq!(strain_ratio(&s, &t, &b).unwrap(), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(strain_ratio(&s, &b, &b).unwrap(), 1.0, epsilon = 1e-12);
        let zero = img(Array2::zeros((4, 8)));
        assert!(matches!(strain_ratio(&zero, &t, &b), Err(Error::DivisionByZero(_))));
    }

    #[test]
    fn rmse_examples() {
        let a = img(Array2::zeros((2, 1)));
        let b = img(Array2::from_shape_vec((2, 1), vec![0.003, 0.004]).unwrap());
        assert_abs_diff_eq!(rmse(&a, &b).unwrap(), 1.25e-5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(rmse(&b, &b).unwrap(), 0.0);
        let c = img(Array2::from_elem((3, 3), 0.001));
        assert_abs_diff_eq!(rmse(&c, &img(Array2::zeros((3, 3)))).unwrap(), 0.001, epsilon = 1e-15);
        assert!(rmse(&a, &c).is_err());
    }

    #[test]
    fn window_validation() {
        let s = img(Array2::zeros((10, 10)));
        assert!(snr(&s, &WindowSpec::new(8, 0, 3, 3)).is_err());
        assert!(snr(&s, &WindowSpec::new(0, 0, 1, 3)).is_err());
    }

    #[test]
    fn histogram_counts() {
        let s = img(Array2::from_shape_fn((40, 40), |(r, c)| ((r * 7 + c * 13) % 17) as f64));
        let w = WindowSpec::new(2, 2, 4, 4);
        let h = cnr_histogram(&s, &[w; 6], &[w; 20]).unwrap();
        assert_eq!(h.len(), 120);
        assert!(h.iter().all(|m| m.value() == Some(0.0)));
        assert_eq!(cnr_histogram(&s, &[w; 2], &[w; 3]).unwrap().len(), 6);
        assert!(cnr_histogram(&s, &[], &[w; 20]).is_err());

        let mut two = Array2::from_elem((40, 40), 1.0);
        two.slice_mut(ndarray::s![20.., ..]).fill(2.0);
        let two = img(two);
        let t = WindowSpec::new(0, 0, 4, 4);
        let b = WindowSpec::new(30, 0, 4, 4);
        let h = cnr_histogram(&two, &[t; 6], &[b; 20]).unwrap();
        assert!(h.iter().all(|m| m.is_degenerate()));
        assert_eq!(histogram_mean(&h), None);
    }

    #[test]
    fn window_extent_from_metadata() {
        let meta = FrameMeta { axial_spacing_m: 1.0e-4, lateral_spacing_m: 3.0e-4, ..FrameMeta::default() };
        assert_eq!(window_extent(Some(&meta), 3e-3), (30, 10));
        let bad = FrameMeta { axial_spacing_m: 0.0, ..FrameMeta::default() };
        assert_eq!(window_extent(Some(&bad), 3e-3), (32, 8));
        assert_eq!(window_extent(None, 3e-3), (32, 8));
    }
}
