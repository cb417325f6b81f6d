//! Raster files: raw little-endian `f32` samples in row-major order plus a
//! `<file>.hdr` sidecar of `key = value` lines.
//!
//! Required header keys are `rows` and `cols`; the acquisition keys
//! `sampling_rate_hz`, `center_frequency_hz`, `axial_spacing_m` and
//! `lateral_spacing_m` are optional but must appear together.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::field::FrameMeta;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Raster<T> {
    pub values: Array2<T>,
    pub meta: Option<FrameMeta>,
}

pub fn header_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), reason: reason.into() }
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| format_err(path, "not a file path"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = dir.join(tmp_name);
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(path, e)
    })
}

pub fn encode_header(rows: usize, cols: usize, meta: Option<&FrameMeta>) -> String {
    let mut s = format!("rows = {rows}\ncols = {cols}\n");
    if let Some(m) = meta {
        s.push_str(&format!(
            "sampling_rate_hz = {:e}\ncenter_frequency_hz = {:e}\naxial_spacing_m = {:e}\nlateral_spacing_m = {:e}\n",
            m.sampling_rate_hz, m.center_frequency_hz, m.axial_spacing_m, m.lateral_spacing_m
        ));
    }
    s
}

pub fn encode_samples<T: Scalar>(values: &Array2<T>) -> Vec<u8> {
    values.iter().flat_map(|v| (v.to_f64_lossy() as f32).to_le_bytes()).collect()
}

pub fn write_raster<T: Scalar>(path: &Path, values: &Array2<T>, meta: Option<&FrameMeta>) -> Result<()> {
    let (rows, cols) = values.dim();
    write_atomic(path, &encode_samples(values))?;
    write_atomic(&header_path(path), encode_header(rows, cols, meta).as_bytes())
}

fn parse_header(path: &Path, text: &str) -> Result<(usize, usize, Option<FrameMeta>)> {
    let (mut rows, mut cols) = (None, None);
    let mut meta = [None; 4];
    const META_KEYS: [&str; 4] = ["sampling_rate_hz", "center_frequency_hz", "axial_spacing_m", "lateral_spacing_m"];
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (k, v) = line.split_once('=').ok_or_else(|| format_err(path, format!("expected key = value, got {line:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        let bad = |_| format_err(path, format!("bad value for {k}: {v:?}"));
        match k {
            "rows" => rows = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "cols" => cols = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            _ => {
                let i = META_KEYS.iter().position(|m| *m == k).ok_or_else(|| format_err(path, format!("unknown key {k}")))?;
                meta[i] = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?);
            }
        }
    }
    let rows = rows.ok_or_else(|| format_err(path, "missing rows"))?;
    let cols = cols.ok_or_else(|| format_err(path, "missing cols"))?;
    let meta = match meta {
        [Some(a), Some(b), Some(c), Some(d)] => Some(FrameMeta {
            sampling_rate_hz: a,
            center_frequency_hz: b,
            axial_spacing_m: c,
            lateral_spacing_m: d,
        }),
        [None, None, None, None] => None,
        _ => return Err(format_err(path, "acquisition keys must be given together")),
    };
    Ok((rows, cols, meta))
}

pub fn read_raster<T: Scalar>(path: &Path) -> Result<Raster<T>> {
    let hdr = header_path(path);
    let text = fs::read_to_string(&hdr).map_err(|e| io_err(&hdr, e))?;
    let (rows, cols, meta) = parse_header(&hdr, &text)?;
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() != rows * cols * 4 {
        return Err(format_err(path, format!("expected {} bytes for {rows}x{cols}, found {}", rows * cols * 4, bytes.len())));
    }
    let data: Vec<T> = bytes.chunks_exact(4).map(|b| T::of(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)).collect();
    let values = Array2::from_shape_vec((rows, cols), data).map_err(|e| format_err(path, e.to_string()))?;
    Ok(Raster { values, meta })
}
