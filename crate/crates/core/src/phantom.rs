//! Synthetic speckle phantoms with closed-form deformation.
//!
//! Point scatterers with Gaussian amplitudes are rendered through a separable
//! point-spread function (Gaussian-modulated cosine axially, Gaussian
//! laterally). The post-deformation frame re-renders the same scatterers
//! after moving each one by the analytic axial displacement, which is the
//! running integral of a piecewise-constant strain profile measured from the
//! top row. White Gaussian noise is added at a prescribed peak SNR.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::{DisplacementField, FrameMeta, RfFrame, StrainImage, MIN_FRAME_DIM};
use crate::scalar::Scalar;

/// Rows `start_row..=end_row` (1-based) deform with a uniform strain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub start_row: usize,
    pub end_row: usize,
    pub strain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Geometry {
    Layers { layers: Vec<Layer> },
    /// Circular region (1-based center, radius in samples) with its own strain.
    Inclusion {
        center_row: f64,
        center_col: f64,
        radius: f64,
        inclusion_strain: f64,
        background_strain: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub rows: usize,
    pub cols: usize,
    /// Scatterers per sample.
    pub scatterer_density: f64,
    /// Cycles per axial sample.
    pub psf_center_frequency: f64,
    pub psf_axial_sigma: f64,
    pub psf_lateral_sigma: f64,
    pub geometry: Geometry,
    /// Peak SNR of the additive noise; `None` renders noise-free frames.
    pub noise_psnr_db: Option<f64>,
    pub rng_seed: u64,
}

/// Names accepted by [`PhantomSpec::preset`].
pub const PHANTOM_PRESETS: [&str; 3] = ["layer-high", "layer-low", "inclusion"];

/// Strain below which the stiff layer of a 4 % compressed, three-layer
/// phantom deforms, given the background/target modulus ratio.
fn layer_strains(rows: usize, bounds: (usize, usize), ratio: f64, compression: f64) -> (f64, f64) {
    let (end_top, end_mid) = bounds;
    // a(m) = s_b (end_top - 1) + s_t (end_mid - end_top) + s_b (m - end_mid) = c (m - 1)
    let background_len = (end_top - 1 + rows - end_mid) as f64;
    let target_len = (end_mid - end_top) as f64;
    let sb = compression * (rows - 1) as f64 / (background_len + ratio * target_len);
    (sb, ratio * sb)
}

impl PhantomSpec {
    /// Defaults shared by every preset: density 0.5, 0.25 cycles/sample.
    pub fn base(rows: usize, cols: usize, geometry: Geometry) -> Self {
        Self {
            rows,
            cols,
            scatterer_density: 0.5,
            psf_center_frequency: 0.25,
            psf_axial_sigma: 2.0,
            psf_lateral_sigma: 1.0,
            geometry,
            noise_psnr_db: None,
            rng_seed: 1,
        }
    }

    /// Single uniform layer over the whole frame.
    pub fn uniform(rows: usize, cols: usize, strain: f64) -> Self {
        Self::base(rows, cols, Geometry::Layers { layers: vec![Layer { start_row: 1, end_row: rows, strain }] })
    }

    /// Three-layer phantoms under 4 % compression (stiff middle layer) and a
    /// hard inclusion under 1 % compression.
    ///
    /// * `layer-high`: target twice as stiff as the background (strain ratio 0.5)
    /// * `layer-low`: modulus 22.86 vs 20 (strain ratio 20 / 22.86)
    /// * `inclusion`: modulus 40 vs 4 (strain ratio 0.1), 24 dB PSNR
    pub fn preset(name: &str, rows: usize, cols: usize) -> Result<Self> {
        let bounds = (3 * rows / 8, 5 * rows / 8);
        let layered = |ratio: f64| {
            let (sb, st) = layer_strains(rows, bounds, ratio, 0.04);
            Geometry::Layers {
                layers: vec![
                    Layer { start_row: 1, end_row: bounds.0, strain: sb },
                    Layer { start_row: bounds.0 + 1, end_row: bounds.1, strain: st },
                    Layer { start_row: bounds.1 + 1, end_row: rows, strain: sb },
                ],
            }
        };
        let mut spec = match name {
            "layer-high" => Self::base(rows, cols, layered(20.0 / 40.0)),
            "layer-low" => Self::base(rows, cols, layered(20.0 / 22.86)),
            "inclusion" => {
                let radius = 3.0 * rows.min(cols) as f64 / 8.0;
                Self::base(
                    rows,
                    cols,
                    Geometry::Inclusion {
                        center_row: (rows as f64 + 1.0) / 2.0,
                        center_col: (cols as f64 + 1.0) / 2.0,
                        radius,
                        inclusion_strain: 0.001,
                        background_strain: 0.01,
                    },
                )
            }
            other => {
                return Err(invalid(format!(
                    "unknown phantom preset `{other}` (expected one of {})",
                    PHANTOM_PRESETS.join(", ")
                )))
            }
        };
        spec.noise_psnr_db = Some(if name == "inclusion" { 24.0 } else { 20.0 });
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.rows, self.cols);
        if m < MIN_FRAME_DIM || n < MIN_FRAME_DIM {
            return Err(invalid(format!("phantom must be at least {MIN_FRAME_DIM}x{MIN_FRAME_DIM}")));
        }
        let positive = [
            ("scatterer_density", self.scatterer_density),
            ("psf_center_frequency", self.psf_center_frequency),
            ("psf_axial_sigma", self.psf_axial_sigma),
            ("psf_lateral_sigma", self.psf_lateral_sigma),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(p) = self.noise_psnr_db {
            if !p.is_finite() {
                return Err(invalid("noise PSNR must be finite"));
            }
        }
        let strain_ok = |s: f64| s.is_finite() && s.abs() < 0.1;
        match &self.geometry {
            Geometry::Layers { layers } => {
                if layers.is_empty() {
                    return Err(invalid("at least one layer is required"));
                }
                let mut expected = 1;
                for (k, l) in layers.iter().enumerate() {
                    if l.start_row != expected || l.end_row < l.start_row {
                        return Err(invalid(format!("layer {k} does not continue the partition at row {expected}")));
                    }
                    if !strain_ok(l.strain) {
                        return Err(invalid(format!("layer {k} strain {} outside (-0.1, 0.1)", l.strain)));
                    }
                    expected = l.end_row + 1;
                }
                if expected != m + 1 {
                    return Err(invalid(format!("layers cover rows 1..{} but the frame has {m}", expected - 1)));
                }
            }
            Geometry::Inclusion { center_row, center_col, radius, inclusion_strain, background_strain } => {
                if !(radius.is_finite() && *radius > 0.0 && *radius < m.min(n) as f64 / 2.0) {
                    return Err(invalid(format!("inclusion radius {radius} must be in (0, {})", m.min(n) as f64 / 2.0)));
                }
                if !(center_row.is_finite() && center_col.is_finite()) {
                    return Err(invalid("inclusion center must be finite"));
                }
                if !strain_ok(*inclusion_strain) || !strain_ok(*background_strain) {
                    return Err(invalid("inclusion strains must lie in (-0.1, 0.1)"));
                }
            }
        }
        Ok(())
    }

    /// Axial displacement at a continuous 1-based location.
    pub fn axial_displacement_at(&self, y: f64, x: f64) -> f64 {
        match &self.geometry {
            Geometry::Layers { layers } => {
                let running = |y: f64| {
                    let k = layers.len();
                    let mut acc = 0.0;
                    for (idx, l) in layers.iter().enumerate() {
                        let lo = if idx == 0 { f64::NEG_INFINITY } else { layers[idx - 1].end_row as f64 };
                        let hi = if idx + 1 == k { f64::INFINITY } else { l.end_row as f64 };
                        let start = if idx == 0 { 0.0 } else { lo };
                        let clamped = y.clamp(lo, hi);
                        acc += l.strain * (clamped - start);
                    }
                    acc
                };
                running(y) - running(1.0)
            }
            Geometry::Inclusion { center_row, center_col, radius, inclusion_strain, background_strain } => {
                let mut a = background_strain * (y - 1.0);
                let dx = x - center_col;
                if dx.abs() < *radius {
                    let h = (radius * radius - dx * dx).sqrt();
                    let (lo, hi) = (center_row - h, center_row + h);
                    let overlap = |a: f64, b: f64| (b.min(hi) - a.max(lo)).max(0.0);
                    let inside = if y >= 1.0 { overlap(1.0, y) } else { -overlap(y, 1.0) };
                    a += (inclusion_strain - background_strain) * inside;
                }
                a
            }
        }
    }

    /// Analytic strain at 1-based grid sample `(row, col)`.
    pub fn strain_at(&self, row: usize, col: usize) -> f64 {
        match &self.geometry {
            Geometry::Layers { layers } => layers
                .iter()
                .find(|l| (l.start_row..=l.end_row).contains(&row))
                .map_or(0.0, |l| l.strain),
            Geometry::Inclusion { center_row, center_col, radius, inclusion_strain, background_strain } => {
                let dy = row as f64 - center_row;
                let dx = col as f64 - center_col;
                if dy * dy + dx * dx < radius * radius {
                    *inclusion_strain
                } else {
                    *background_strain
                }
            }
        }
    }

    /// Ground-truth `(axial, lateral)` displacement at 1-based `(row, col)`.
    pub fn analytic_displacement(&self, row: usize, col: usize) -> Result<(f64, f64)> {
        if row == 0 || col == 0 || row > self.rows || col > self.cols {
            return Err(invalid(format!("sample ({row}, {col}) outside {}x{}", self.rows, self.cols)));
        }
        Ok((self.axial_displacement_at(row as f64, col as f64), 0.0))
    }

    /// Largest axial displacement magnitude over the frame.
    pub fn max_abs_displacement(&self) -> f64 {
        let mut peak: f64 = 0.0;
        for &y in &[1.0, self.rows as f64] {
            for c in 1..=self.cols {
                peak = peak.max(self.axial_displacement_at(y, c as f64).abs());
            }
        }
        peak
    }
}

/// Analytic displacement and strain on the sampling grid.
#[derive(Clone, Debug)]
pub struct GroundTruth<T> {
    pub displacement: DisplacementField<T>,
    pub strain: StrainImage<T>,
}

/// Pre/post frames with their ground truth.
#[derive(Clone, Debug)]
pub struct Phantom<T> {
    pub pre: RfFrame<T>,
    pub post: RfFrame<T>,
    pub truth: GroundTruth<T>,
    /// Standard deviation of the noise added to each frame.
    pub noise_sigma: (f64, f64),
}

struct Scatterer {
    y: f64,
    x: f64,
    amplitude: f64,
}

fn render(spec: &PhantomSpec, scatterers: &[Scatterer], shift: impl Fn(&Scatterer) -> f64) -> Array2<f64> {
    let (m, n) = (spec.rows, spec.cols);
    let (sa, sl) = (spec.psf_axial_sigma, spec.psf_lateral_sigma);
    let (reach_a, reach_l) = (4.0 * sa, 4.0 * sl);
    let omega = 2.0 * PI * spec.psf_center_frequency;
    let mut img = Array2::zeros((m, n));
    for s in scatterers {
        let y = s.y + shift(s);
        let r0 = (y - reach_a).ceil().max(1.0) as usize;
        let r1 = ((y + reach_a).floor().min(m as f64)).max(0.0) as usize;
        let c0 = (s.x - reach_l).ceil().max(1.0) as usize;
        let c1 = ((s.x + reach_l).floor().min(n as f64)).max(0.0) as usize;
        if r0 > r1 || c0 > c1 {
            continue;
        }
        for c in c0..=c1 {
            let dx = c as f64 - s.x;
            let lateral = (-dx * dx / (2.0 * sl * sl)).exp();
            for r in r0..=r1 {
                let dy = r as f64 - y;
                let axial = (-dy * dy / (2.0 * sa * sa)).exp() * (omega * dy).cos();
                img[[r - 1, c - 1]] += s.amplitude * axial * lateral;
            }
        }
    }
    img
}

fn peak_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |p, v| p.max(v.abs()))
}

/// Renders the phantom described by `spec`. Output is a pure function of the spec.
pub fn generate<T: Scalar>(spec: &PhantomSpec) -> Result<Phantom<T>> {
    spec.validate()?;
    let (m, n) = (spec.rows, spec.cols);
    let pad_a = 4.0 * spec.psf_axial_sigma + spec.max_abs_displacement() + 1.0;
    let pad_l = 4.0 * spec.psf_lateral_sigma + 1.0;
    let (y_lo, y_hi) = (1.0 - pad_a, m as f64 + pad_a);
    let (x_lo, x_hi) = (1.0 - pad_l, n as f64 + pad_l);
    let count = (spec.scatterer_density * (y_hi - y_lo) * (x_hi - x_lo)).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let scatterers: Vec<Scatterer> = (0..count)
        .map(|_| Scatterer {
            y: rng.gen_range(y_lo..y_hi),
            x: rng.gen_range(x_lo..x_hi),
            amplitude: rng.sample(StandardNormal),
        })
        .collect();

    let mut pre = render(spec, &scatterers, |_| 0.0);
    let mut post = render(spec, &scatterers, |s| spec.axial_displacement_at(s.y, s.x));
    let scale = peak_abs(&pre);
    if scale > 0.0 {
        pre.mapv_inplace(|v| v / scale);
        post.mapv_inplace(|v| v / scale);
    }

    let mut noise_sigma = (0.0, 0.0);
    if let Some(psnr) = spec.noise_psnr_db {
        let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        noise_rng.set_stream(1);
        let factor = 10f64.powf(-psnr / 20.0);
        for (frame, sigma) in [(&mut pre, &mut noise_sigma.0), (&mut post, &mut noise_sigma.1)] {
            *sigma = peak_abs(frame) * factor;
            for v in frame.iter_mut() {
                let z: f64 = noise_rng.sample(StandardNormal);
                *v += *sigma * z;
            }
        }
    }

    let meta = FrameMeta::default();
    let cast = |a: Array2<f64>| a.mapv(T::of);
    let truth_disp = DisplacementField::from_axial_fn(m, n, |r, c| T::of(spec.axial_displacement_at((r + 1) as f64, (c + 1) as f64)));
    let truth_strain = Array2::from_shape_fn((m, n), |(r, c)| T::of(spec.strain_at(r + 1, c + 1)));
    Ok(Phantom {
        pre: RfFrame::new(cast(pre), meta.clone())?,
        post: RfFrame::new(cast(post), meta)?,
        truth: GroundTruth { displacement: truth_disp, strain: StrainImage::new(truth_strain, 3) },
        noise_sigma,
    })
}
