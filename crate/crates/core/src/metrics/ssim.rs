use crate::error::{invalid, Result};
use crate::field::StrainImage;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimConfig {
    /// Odd side length of the Gaussian window.
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self { window: 11, sigma: 1.5, k1: 0.01, k2: 0.03 }
    }
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let mut w: Vec<f64> = (0..size * size)
        .map(|k| {
            let (dy, dx) = ((k / size) as f64 - c, (k % size) as f64 - c);
            (-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Mean structural similarity over the valid (fully covered) window positions.
///
/// The dynamic range is taken from `truth`.
pub fn mssim<T: Scalar>(estimated: &StrainImage<T>, truth: &StrainImage<T>, config: &SsimConfig) -> Result<T> {
    let (m, n) = truth.dim();
    if estimated.dim() != (m, n) {
        return Err(invalid(format!("shape mismatch: {:?} vs {:?}", estimated.dim(), truth.dim())));
    }
    let size = config.window;
    if size == 0 || size % 2 == 0 || m < size || n < size {
        return Err(invalid(format!("image {m}x{n} is smaller than the {size}x{size} SSIM window")));
    }
    let x = estimated.values().mapv(|v| v.to_f64_lossy());
    let y = truth.values().mapv(|v| v.to_f64_lossy());
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    if range <= 0.0 {
        return Err(invalid("reference image has zero dynamic range"));
    }
    let c1 = (config.k1 * range).powi(2);
    let c2 = (config.k2 * range).powi(2);
    let w = gaussian_window(size, config.sigma);
    let mut total = 0.0;
    for r in 0..=m - size {
        for c in 0..=n - size {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (k, &wk) in w.iter().enumerate() {
                let (a, b) = (x[[r + k / size, c + k % size]], y[[r + k / size, c + k % size]]);
                mx += wk * a;
                my += wk * b;
                sxx += wk * a * a;
                syy += wk * b * b;
                sxy += wk * a * b;
            }
            let (vx, vy, cxy) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    Ok(T::of(total / ((m - size + 1) * (n - size + 1)) as f64))
}
