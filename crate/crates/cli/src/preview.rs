use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageFormat, Luma};
use ndarray::Array2;

use crate::error::CliError;

/// Min-max range of `values`, or `None` when it is empty or flat.
pub fn value_range(values: &Array2<f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    (hi > lo).then_some((lo, hi))
}

/// 8-bit grayscale rendering clamped to `range`.
pub fn to_gray(values: &Array2<f64>, range: Option<(f64, f64)>) -> GrayImage {
    let (rows, cols) = values.dim();
    let (lo, hi) = range.or_else(|| value_range(values)).unwrap_or((0.0, 1.0));
    GrayImage::from_fn(cols as u32, rows as u32, |x, y| {
        let t = ((values[[y as usize, x as usize]] - lo) / (hi - lo)).clamp(0.0, 1.0);
        Luma([(t * 255.0).round() as u8])
    })
}

pub fn write_png(path: &Path, img: &GrayImage) -> Result<(), CliError> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    altruist::io::write_atomic(path, buf.get_ref())?;
    Ok(())
}
