//! Frames, displacement fields, strain images and the sampling primitives
//! shared by the operator builders and the solver.
//!
//! Index conventions: interpolation coordinates are 1-based (`y` in `[1, m]`,
//! `x` in `[1, n]`) so that an integer coordinate `(i, j)` addresses sample
//! `samples[[i - 1, j - 1]]`. Flattened displacement vectors are axial-major
//! with interleaved components: sample `(r, c)` (0-based) occupies position
//! `p = r * n + c`, its axial component lives at `2p` and its lateral
//! component at `2p + 1`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::{all_finite, Scalar};

/// Smallest admissible frame dimension along either axis.
pub const MIN_FRAME_DIM: usize = 4;

/// Acquisition metadata carried alongside a raster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub sampling_rate_hz: f64,
    pub center_frequency_hz: f64,
    pub axial_spacing_m: f64,
    pub lateral_spacing_m: f64,
}

impl Default for FrameMeta {
    fn default() -> Self {
        // 40 MHz sampling of a 7.27 MHz probe, c = 1540 m/s.
        Self {
            sampling_rate_hz: 40.0e6,
            center_frequency_hz: 7.27e6,
            axial_spacing_m: 1540.0 / (2.0 * 40.0e6),
            lateral_spacing_m: 3.0e-4,
        }
    }
}

/// One RF frame: `m` axial samples by `n` A-lines.
#[derive(Clone, Debug, PartialEq)]
pub struct RfFrame<T> {
    samples: Array2<T>,
    meta: FrameMeta,
}

impl<T: Scalar> RfFrame<T> {
    pub fn new(samples: Array2<T>, meta: FrameMeta) -> Result<Self> {
        let (m, n) = samples.dim();
        if m < MIN_FRAME_DIM || n < MIN_FRAME_DIM {
            return Err(invalid(format!(
                "frame must be at least {MIN_FRAME_DIM}x{MIN_FRAME_DIM}, got {m}x{n}"
            )));
        }
        if !samples.iter().all(|v| v.is_finite()) {
            return Err(invalid("frame contains non-finite samples"));
        }
        Ok(Self { samples, meta })
    }

    /// Builds a frame without the minimum-size check. Used for tiny
    /// hand-written fixtures; every other invariant still holds.
    pub fn from_samples_unchecked(samples: Array2<T>) -> Self {
        Self { samples, meta: FrameMeta::default() }
    }

    pub fn samples(&self) -> &Array2<T> {
        &self.samples
    }

    pub fn meta(&self) -> &FrameMeta {
        &self.meta
    }

    pub fn rows(&self) -> usize {
        self.samples.nrows()
    }

    pub fn cols(&self) -> usize {
        self.samples.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.samples.dim()
    }

    /// Bilinear interpolation at 1-based coordinates `(y, x)`.
    ///
    /// Points outside `[1, m] x [1, n]` evaluate to zero with `in_bounds`
    /// cleared.
    pub fn interp_bilinear(&self, y: T, x: T) -> Result<Sample<T>> {
        if !y.is_finite() || !x.is_finite() {
            return Err(invalid("interpolation coordinate is not finite"));
        }
        Ok(self.interp_unchecked(y, x))
    }

    pub(crate) fn interp_unchecked(&self, y: T, x: T) -> Sample<T> {
        let (m, n) = self.dim();
        let one = T::one();
        if y < one || x < one || y > T::of_usize(m) || x > T::of_usize(n) {
            return Sample { value: T::zero(), in_bounds: false };
        }
        let y0 = y - one;
        let x0 = x - one;
        // Clamp so that the last row/column interpolates with weight 1 on the edge.
        let r = y0.floor().to_usize().unwrap_or(0).min(m.saturating_sub(2));
        let c = x0.floor().to_usize().unwrap_or(0).min(n.saturating_sub(2));
        let fy = y0 - T::of_usize(r);
        let fx = x0 - T::of_usize(c);
        let s = &self.samples;
        let (r1, c1) = ((r + 1).min(m - 1), (c + 1).min(n - 1));
        let top = s[[r, c]] * (one - fx) + s[[r, c1]] * fx;
        let bottom = s[[r1, c]] * (one - fx) + s[[r1, c1]] * fx;
        Sample { value: top * (one - fy) + bottom * fy, in_bounds: true }
    }
}

/// Result of sampling a frame at a fractional location.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample<T> {
    pub value: T,
    pub in_bounds: bool,
}

/// Dense axial/lateral displacement in samples (axial) and lines (lateral).
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField<T> {
    values: Vec<T>,
    rows: usize,
    cols: usize,
}

impl<T: Scalar> DisplacementField<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { values: vec![T::zero(); 2 * rows * cols], rows, cols }
    }

    /// Wraps an interleaved vector of length `2 * rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != 2 * rows * cols {
            return Err(invalid(format!(
                "displacement vector has length {}, expected {}",
                values.len(),
                2 * rows * cols
            )));
        }
        if !all_finite(&values) {
            return Err(invalid("displacement field contains non-finite values"));
        }
        Ok(Self { values, rows, cols })
    }

    /// Builds a field from separate axial and lateral rasters.
    pub fn from_components(axial: &Array2<T>, lateral: &Array2<T>) -> Result<Self> {
        if axial.dim() != lateral.dim() {
            return Err(invalid("axial and lateral rasters differ in shape"));
        }
        let (rows, cols) = axial.dim();
        let mut values = Vec::with_capacity(2 * rows * cols);
        for (a, l) in axial.iter().zip(lateral.iter()) {
            values.push(*a);
            values.push(*l);
        }
        Self::from_vec(rows, cols, values)
    }

    /// Field with axial component `f(row, col)` (0-based) and zero lateral motion.
    pub fn from_axial_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut d = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let p = r * cols + c;
                d.values[2 * p] = f(r, c);
            }
        }
        d
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    /// Axial component at 0-based `(row, col)`.
    #[inline]
    pub fn axial(&self, row: usize, col: usize) -> T {
        self.values[2 * (row * self.cols + col)]
    }

    /// Lateral component at 0-based `(row, col)`.
    #[inline]
    pub fn lateral(&self, row: usize, col: usize) -> T {
        self.values[2 * (row * self.cols + col) + 1]
    }

    pub fn axial_raster(&self) -> Array2<T> {
        Array2::from_shape_fn((self.rows, self.cols), |(r, c)| self.axial(r, c))
    }

    pub fn lateral_raster(&self) -> Array2<T> {
        Array2::from_shape_fn((self.rows, self.cols), |(r, c)| self.lateral(r, c))
    }

    /// Element-wise sum with a flattened increment of the same layout.
    pub fn add_increment(&self, delta: &[T]) -> Result<Self> {
        if delta.len() != self.values.len() {
            return Err(invalid("increment length does not match displacement field"));
        }
        let values = self.values.iter().zip(delta).map(|(&a, &b)| a + b).collect();
        Self::from_vec(self.rows, self.cols, values)
    }
}

/// Axial strain raster together with the differentiation kernel that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct StrainImage<T> {
    values: Array2<T>,
    kernel_length: usize,
}

impl<T: Scalar> StrainImage<T> {
    pub fn new(values: Array2<T>, kernel_length: usize) -> Self {
        Self { values, kernel_length }
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn into_values(self) -> Array2<T> {
        self.values
    }

    pub fn kernel_length(&self) -> usize {
        self.kernel_length
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// Returns a copy with every value multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self { values: self.values.mapv(|v| v * factor), kernel_length: self.kernel_length }
    }
}

/// Central-difference derivatives of a warped frame.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    pub axial: Array2<T>,
    pub lateral: Array2<T>,
    /// `true` where all four stencil points landed inside the frame.
    pub valid: Array2<bool>,
}

/// Axial and lateral derivatives of `frame` evaluated at the warped
/// locations `(i + a_ij, j + l_ij)` with a half-sample central stencil.
pub fn spatial_gradients<T: Scalar>(
    frame: &RfFrame<T>,
    warp: &DisplacementField<T>,
) -> Result<Gradients<T>> {
    if frame.dim() != warp.dim() {
        return Err(invalid(format!(
            "warp is {:?} but frame is {:?}",
            warp.dim(),
            frame.dim()
        )));
    }
    let (m, n) = frame.dim();
    let half = T::of(0.5);
    let mut axial = Array2::zeros((m, n));
    let mut lateral = Array2::zeros((m, n));
    let mut valid = Array2::from_elem((m, n), false);
    for r in 0..m {
        for c in 0..n {
            let y = T::of_usize(r + 1) + warp.axial(r, c);
            let x = T::of_usize(c + 1) + warp.lateral(r, c);
            let down = frame.interp_unchecked(y + half, x);
            let up = frame.interp_unchecked(y - half, x);
            let right = frame.interp_unchecked(y, x + half);
            let left = frame.interp_unchecked(y, x - half);
            axial[[r, c]] = down.value - up.value;
            lateral[[r, c]] = right.value - left.value;
            valid[[r, c]] = down.in_bounds && up.in_bounds && right.in_bounds && left.in_bounds;
        }
    }
    Ok(Gradients { axial, lateral, valid })
}

/// Axial strain by least-squares line fits over `kernel_length` rows.
///
/// Windows are truncated symmetrically near the top and bottom edges; the
/// first and last rows fall back to a two-point forward/backward difference.
pub fn strain_from_displacement<T: Scalar>(
    disp: &DisplacementField<T>,
    kernel_length: usize,
) -> Result<StrainImage<T>> {
    let (m, n) = disp.dim();
    if kernel_length % 2 == 0 || kernel_length < 3 {
        return Err(invalid(format!("kernel length must be odd and >= 3, got {kernel_length}")));
    }
    if kernel_length > m {
        return Err(invalid(format!("kernel length {kernel_length} exceeds {m} rows")));
    }
    if m < 2 {
        return Err(invalid("strain needs at least two rows"));
    }
    let half = kernel_length / 2;
    let mut out = Array2::zeros((m, n));
    for c in 0..n {
        for r in 0..m {
            let h = half.min(r).min(m - 1 - r);
            out[[r, c]] = if h == 0 {
                if r == 0 {
                    disp.axial(1, c) - disp.axial(0, c)
                } else {
                    disp.axial(r, c) - disp.axial(r - 1, c)
                }
            } else {
                // Symmetric window: slope = sum(k * a_{r+k}) / sum(k^2).
                let mut num = T::zero();
                let mut den = T::zero();
                for k in 1..=h {
                    let kf = T::of_usize(k);
                    num += kf * (disp.axial(r + k, c) - disp.axial(r - k, c));
                    den += kf * kf;
                }
                num / (den + den)
            };
        }
    }
    Ok(StrainImage::new(out, kernel_length))
}
