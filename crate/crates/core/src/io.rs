//! Field files: a JSON header next to a flat little-endian `f32` array, plus
//! PGM and CSV exports of 2D images.
//!
//! The data of a lifted field is stored in node order, so the slowest axis is
//! the orientation and the fastest is `x`. The header lists `dims`,
//! `axisOrder`, `spacing`, and `origin` slowest axis first; the orientation
//! axis reports its chart spacing and a zero origin.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{LiftedGrid, OrientationSampling, SpatialGrid};

pub const DTYPE: &str = "f32le";
const AXIS_NAMES: [&str; 3] = ["x", "y", "z"];
const ORIENTATION_AXIS: &str = "orientation";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FieldHeader {
    pub dims: Vec<usize>,
    pub axis_order: Vec<String>,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
    pub orientation_sampling: OrientationSampling,
    pub dtype: String,
}

impl FieldHeader {
    pub fn for_grid(grid: &LiftedGrid) -> Self {
        let sp = &grid.spatial;
        let mut dims = Vec::new();
        let mut axis_order = Vec::new();
        let mut spacing = Vec::new();
        let mut origin = Vec::new();
        if grid.orientations.ambient_dim() > 0 {
            dims.push(grid.n_orientations());
            axis_order.push(ORIENTATION_AXIS.to_string());
            spacing.push(grid.orientations.chart_spacing());
            origin.push(0.0);
        }
        for a in (0..sp.ndim()).rev() {
            dims.push(sp.dims[a]);
            axis_order.push(AXIS_NAMES[a].to_string());
            spacing.push(sp.spacing[a]);
            origin.push(sp.origin[a]);
        }
        FieldHeader {
            dims,
            axis_order,
            spacing,
            origin,
            orientation_sampling: grid.orientations.clone(),
            dtype: DTYPE.to_string(),
        }
    }

    /// Rebuilds the grid the header describes, checking that it is a layout
    /// this crate writes.
    pub fn grid(&self) -> Result<LiftedGrid> {
        if self.dtype != DTYPE {
            return Err(Error::Format(format!("unsupported dtype `{}`", self.dtype)));
        }
        let n = self.dims.len();
        if self.axis_order.len() != n || self.spacing.len() != n || self.origin.len() != n {
            return Err(Error::Format(
                "dims, axisOrder, spacing, and origin differ in length".into(),
            ));
        }
        let lifted = self.orientation_sampling.ambient_dim() > 0;
        let first = usize::from(lifted);
        if lifted && self.axis_order[0] != ORIENTATION_AXIS {
            return Err(Error::Format(
                "lifted fields must have the orientation axis first".into(),
            ));
        }
        let d = n - first;
        if !(1..=3).contains(&d) {
            return Err(Error::Format(format!("{d} spatial axes")));
        }
        for (k, name) in self.axis_order[first..].iter().enumerate() {
            if name != AXIS_NAMES[d - 1 - k] {
                return Err(Error::Format(format!(
                    "unexpected axis order {:?}",
                    self.axis_order
                )));
            }
        }
        let rev = |v: &[f64]| v[first..].iter().rev().copied().collect::<Vec<_>>();
        let dims: Vec<usize> = self.dims[first..].iter().rev().copied().collect();
        let spatial = SpatialGrid::new(dims, rev(&self.spacing), rev(&self.origin))?;
        let grid = LiftedGrid::new(spatial, self.orientation_sampling.clone())?;
        if lifted && self.dims[0] != grid.n_orientations() {
            return Err(Error::Format(
                "orientation axis length disagrees with the sampling".into(),
            ));
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A grid plus one `f32` per node.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub grid: LiftedGrid,
    pub data: Vec<f32>,
}

/// Path of the header belonging to a data file (`name.f32` ↔ `name.json`).
pub fn header_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("json")
}

/// Path of the data belonging to a header or data path.
pub fn data_path(path: &Path) -> PathBuf {
    path.with_extension("f32")
}

impl FieldFile {
    pub fn new(grid: LiftedGrid, data: Vec<f32>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: data.len(),
            });
        }
        Ok(FieldFile { grid, data })
    }

    pub fn from_f64(grid: LiftedGrid, data: &[f64]) -> Result<Self> {
        Self::new(grid, data.iter().map(|&v| v as f32).collect())
    }

    pub fn header(&self) -> FieldHeader {
        FieldHeader::for_grid(&self.grid)
    }

    /// Writes `path` with extension `.f32` and its `.json` header; returns
    /// the data path.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        let dp = data_path(path);
        let hp = header_path(&dp);
        if let Some(dir) = dp.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let header = serde_json::to_string_pretty(&self.header())
            .map_err(|e| Error::Format(e.to_string()))?;
        fs::write(&hp, header).map_err(|e| Error::io(&hp, e))?;
        let mut bytes = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&dp, bytes).map_err(|e| Error::io(&dp, e))?;
        Ok(dp)
    }

    /// Reads a field given either its header or its data path.
    pub fn read(path: &Path) -> Result<Self> {
        let dp = data_path(path);
        let hp = header_path(&dp);
        let text = fs::read_to_string(&hp).map_err(|e| Error::io(&hp, e))?;
        let header: FieldHeader = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", hp.display())))?;
        let grid = header.grid()?;
        let bytes = fs::read(&dp).map_err(|e| Error::io(&dp, e))?;
        if bytes.len() != header.len() * 4 {
            return Err(Error::Format(format!(
                "{}: expected {} bytes, found {}",
                dp.display(),
                header.len() * 4,
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(grid, data)
    }
}

/// Writes a binary (P5) 8-bit PGM. Finite values are mapped linearly from
/// their range onto 0..=255; non-finite values become 255.
pub fn write_pgm(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: width * height,
            actual: values.len(),
        });
    }
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    // PGM rows run top to bottom; image row 0 is the largest y.
    for row in (0..height).rev() {
        for col in 0..width {
            let v = values[row * width + col];
            let q = if v.is_finite() {
                ((v - lo) / span * 255.0).round()
            } else {
                255.0
            };
            out.push(q.clamp(0.0, 255.0) as u8);
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes a comma-separated grid, one line per `y` row in increasing `y`.
pub fn write_csv_grid(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: width * height,
            actual: values.len(),
        });
    }
    let mut out = String::new();
    for row in values.chunks(width) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Serializes a value as pretty JSON to `path`.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_slowest_first() {
        let grid = LiftedGrid::new(
            SpatialGrid::new(vec![4, 5, 6], vec![1.0, 2.0, 3.0], vec![0.1, 0.2, 0.3]).unwrap(),
            OrientationSampling::sphere(2).unwrap(),
        )
        .unwrap();
        let h = FieldHeader::for_grid(&grid);
        assert_eq!(h.dims, vec![8, 6, 5, 4]);
        assert_eq!(h.axis_order, vec!["orientation", "z", "y", "x"]);
        assert_eq!(h.spacing[1..], [3.0, 2.0, 1.0]);
        assert_eq!(h.grid().unwrap(), grid);
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let grid = LiftedGrid::new(
            SpatialGrid::unit(vec![3, 2]).unwrap(),
            OrientationSampling::circle(4).unwrap(),
        )
        .unwrap();
        let mut data: Vec<f32> = (0..grid.len()).map(|i| (i as f32).sqrt() - 1.5).collect();
        data[3] = f32::INFINITY;
        data[4] = -0.0;
        let f = FieldFile::new(grid, data).unwrap();
        let p = f.write(&dir.path().join("sub/field")).unwrap();
        let g = FieldFile::read(&header_path(&p)).unwrap();
        assert_eq!(f.grid, g.grid);
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&f.data), bits(&g.data));
    }

    #[test]
    fn truncated_data_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let grid = LiftedGrid::new(
            SpatialGrid::unit(vec![3, 3]).unwrap(),
            OrientationSampling::None,
        )
        .unwrap();
        let f = FieldFile::new(grid, vec![1.0; 9]).unwrap();
        let p = f.write(&dir.path().join("a.f32")).unwrap();
        fs::write(&p, [0u8; 8]).unwrap();
        assert!(matches!(FieldFile::read(&p), Err(Error::Format(_))));
    }

    #[test]
    fn pgm_has_expected_size() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        write_pgm(&p, 3, 2, &[0.0, 1.0, 2.0, 3.0, 4.0, f64::INFINITY]).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(bytes.len(), 11 + 6);
        assert_eq!(&bytes[11..], &[191, 255, 255, 0, 64, 128]);
    }
}
