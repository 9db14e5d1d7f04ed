use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HyperspectralCube, SurveyError};
use crate::spectra::{read_spectrum, write_spectrum, AxisKind, Bin, Spectrum};

pub const QEHC_FORMAT: &str = "QEHC";
pub const QEHC_DTYPE: &str = "f64le";

/// JSON sidecar of a QEHC v1 cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QehcHeader {
    pub format: String,
    pub version: u32,
    pub nx: usize,
    pub ny: usize,
    pub wavelengths: Vec<f64>,
    pub dtype: String,
    /// Binary file name, relative to the sidecar's directory.
    pub data_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_pitch_um: Option<f64>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SurveyError + '_ {
    move |source| SurveyError::Io { path: path.display().to_string(), source }
}

fn data_path(sidecar: &Path, name: &str) -> PathBuf {
    sidecar.parent().map(|d| d.join(name)).unwrap_or_else(|| PathBuf::from(name))
}

/// Reads a cube from its `.qehc.json` sidecar.
pub fn read_qehc(sidecar: &Path) -> Result<HyperspectralCube, SurveyError> {
    let text = std::fs::read_to_string(sidecar).map_err(io_err(sidecar))?;
    let header: QehcHeader =
        serde_json::from_str(&text).map_err(|source| SurveyError::Json { path: sidecar.display().to_string(), source })?;
    if header.format != QEHC_FORMAT || header.version != 1 {
        return Err(SurveyError::InvalidCube(format!("unsupported format {} v{}", header.format, header.version)));
    }
    if header.dtype != QEHC_DTYPE {
        return Err(SurveyError::InvalidCube(format!("unsupported dtype '{}'", header.dtype)));
    }
    let bin_path = data_path(sidecar, &header.data_file);
    let bytes = std::fs::read(&bin_path).map_err(io_err(&bin_path))?;
    if bytes.len() % 8 != 0 {
        return Err(SurveyError::InvalidCube(format!("{} bytes is not a whole number of f64 values", bytes.len())));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    let mut cube = HyperspectralCube::new(header.nx, header.ny, header.wavelengths, data)?;
    cube.pixel_pitch_um = header.pixel_pitch_um;
    Ok(cube)
}

/// Writes the sidecar and a binary file named after it (`x.qehc.json` → `x.f64le`).
pub fn write_qehc(cube: &HyperspectralCube, sidecar: &Path) -> Result<(), SurveyError> {
    let file_name = sidecar.file_name().and_then(|n| n.to_str()).unwrap_or("cube.qehc.json");
    let stem = file_name.strip_suffix(".qehc.json").or_else(|| file_name.strip_suffix(".json")).unwrap_or(file_name);
    let data_file = format!("{stem}.{QEHC_DTYPE}");
    let header = QehcHeader {
        format: QEHC_FORMAT.into(),
        version: 1,
        nx: cube.nx(),
        ny: cube.ny(),
        wavelengths: cube.wavelengths().to_vec(),
        dtype: QEHC_DTYPE.into(),
        data_file: data_file.clone(),
        pixel_pitch_um: cube.pixel_pitch_um,
    };
    let bytes: Vec<u8> = cube.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    let bin_path = data_path(sidecar, &data_file);
    std::fs::write(&bin_path, bytes).map_err(io_err(&bin_path))?;
    let json = serde_json::to_string_pretty(&header).expect("header serializes");
    std::fs::write(sidecar, json + "\n").map_err(io_err(sidecar))
}

fn parse_pixel_name(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix("px_")?.strip_suffix(".csv")?;
    let (y, x) = rest.split_once('_')?;
    Some((y.parse().ok()?, x.parse().ok()?))
}

/// Reads a directory of `px_<y>_<x>.csv` wavelength spectra sharing one axis.
pub fn read_pixel_dir(dir: &Path) -> Result<HyperspectralCube, SurveyError> {
    let mut pixels = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name();
        if let Some((y, x)) = name.to_str().and_then(parse_pixel_name) {
            pixels.insert((y, x), entry.path());
        }
    }
    if pixels.is_empty() {
        return Err(SurveyError::EmptyCube);
    }
    let ny = pixels.keys().map(|k| k.0).max().unwrap_or(0) + 1;
    let nx = pixels.keys().map(|k| k.1).max().unwrap_or(0) + 1;
    if pixels.len() != nx * ny {
        return Err(SurveyError::InvalidCube(format!("{} pixel files for a {ny}×{nx} grid", pixels.len())));
    }
    let mut wavelengths: Option<Vec<f64>> = None;
    let mut data = Vec::new();
    for (key, path) in &pixels {
        let s = read_spectrum(path)?;
        if s.axis_kind() != AxisKind::WavelengthNm {
            return Err(SurveyError::InvalidCube(format!("pixel {key:?} is not on a wavelength axis")));
        }
        let s = s.sorted_ascending();
        let axis = s.axis();
        match &wavelengths {
            None => wavelengths = Some(axis),
            Some(w) if *w != axis => {
                return Err(SurveyError::InvalidCube(format!("pixel {key:?} has a different wavelength axis")))
            }
            Some(_) => {}
        }
        data.extend(s.intensity());
    }
    HyperspectralCube::new(nx, ny, wavelengths.unwrap_or_default(), data)
}

/// Writes one `px_<y>_<x>.csv` per pixel into `dir`.
pub fn write_pixel_dir(cube: &HyperspectralCube, dir: &Path) -> Result<(), SurveyError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    for y in 0..cube.ny() {
        for x in 0..cube.nx() {
            let bins =
                cube.wavelengths().iter().zip(cube.pixel(y, x)).map(|(&w, &c)| Bin::poisson(w, c)).collect();
            let s = Spectrum::new(AxisKind::WavelengthNm, bins)?;
            write_spectrum(&s, &dir.join(format!("px_{y}_{x}.csv")))?;
        }
    }
    Ok(())
}

/// Reads a QEHC sidecar or a pixel-CSV directory.
pub fn read_cube(path: &Path) -> Result<HyperspectralCube, SurveyError> {
    if path.is_dir() {
        read_pixel_dir(path)
    } else {
        read_qehc(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_names() {
        assert_eq!(parse_pixel_name("px_3_12.csv"), Some((3, 12)));
        assert_eq!(parse_pixel_name("px_3.csv"), None);
        assert_eq!(parse_pixel_name("py_1_2.csv"), None);
    }
}
