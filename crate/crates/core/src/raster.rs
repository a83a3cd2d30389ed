//! In-memory rasters and the JSON-header + raw-binary container.
//!
//! A container is a pair of files: a UTF-8 JSON header and a sidecar `.bin`
//! holding the little-endian, band-sequential payload. The header's `data`
//! key names the sidecar relative to the header's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Axis, Error, Result};
use crate::scalar::Scalar;

/// Nodata code shared by classification and change maps.
pub const NODATA_CODE: u8 = 255;

/// Affine pixel-to-world transform in GDAL coefficient order:
/// `[origin_x, pixel_width, row_rotation, origin_y, col_rotation, pixel_height]`.
///
/// `x = c[0] + col * c[1] + row * c[2]`, `y = c[3] + col * c[4] + row * c[5]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Geotransform(pub [f64; 6]);

impl Default for Geotransform {
    fn default() -> Self {
        Geotransform::IDENTITY
    }
}

impl Geotransform {
    /// World coordinates equal pixel coordinates.
    pub const IDENTITY: Geotransform = Geotransform([0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);

    pub fn origin(&self) -> (f64, f64) {
        (self.0[0], self.0[3])
    }

    pub fn pixel_width(&self) -> f64 {
        self.0[1]
    }

    pub fn pixel_height(&self) -> f64 {
        self.0[5]
    }

    fn has_rotation(&self) -> bool {
        self.0[2] != 0.0 || self.0[4] != 0.0
    }

    fn determinant(&self) -> f64 {
        self.0[1] * self.0[5] - self.0[2] * self.0[4]
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidRaster(
                "geotransform has non-finite coefficients".into(),
            ));
        }
        if self.pixel_width() <= 0.0 {
            return Err(Error::InvalidRaster(format!(
                "pixel_width must be > 0, got {}",
                self.pixel_width()
            )));
        }
        if self.pixel_height() == 0.0 {
            return Err(Error::InvalidRaster("pixel_height must be non-zero".into()));
        }
        if self.determinant() == 0.0 {
            return Err(Error::InvalidRaster("geotransform is singular".into()));
        }
        Ok(())
    }

    /// World coordinates of the continuous pixel position `(col, row)`.
    pub fn pixel_to_world(&self, col: f64, row: f64) -> (f64, f64) {
        let c = &self.0;
        (
            c[0] + col * c[1] + row * c[2],
            c[3] + col * c[4] + row * c[5],
        )
    }

    /// Continuous pixel position `(col, row)` of a world coordinate.
    pub fn world_to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        let c = &self.0;
        let dx = x - c[0];
        let dy = y - c[3];
        if !self.has_rotation() {
            return (dx / c[1], dy / c[5]);
        }
        let det = self.determinant();
        ((c[5] * dx - c[2] * dy) / det, (c[1] * dy - c[4] * dx) / det)
    }

    /// Transform of the sub-grid whose upper-left pixel is `(row0, col0)`.
    pub fn shifted(&self, row0: usize, col0: usize) -> Geotransform {
        let (x, y) = self.pixel_to_world(col0 as f64, row0 as f64);
        let mut c = self.0;
        c[0] = x;
        c[3] = y;
        Geotransform(c)
    }

    /// Ground area of one pixel in world units squared.
    pub fn pixel_area(&self) -> f64 {
        self.determinant().abs()
    }
}

/// Rectangular sub-grid of a parent raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Window {
    pub fn new(row0: usize, col0: usize, rows: usize, cols: usize) -> Self {
        Window {
            row0,
            col0,
            rows,
            cols,
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Window::new(0, 0, height, width)
    }

    /// Checks containment in a `width` x `height` grid.
    pub fn check(&self, width: usize, height: usize) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidRaster("window must be non-empty".into()));
        }
        if self.row0 + self.rows > height {
            return Err(Error::OutOfBounds {
                axis: Axis::Row,
                index: self.row0 + self.rows - 1,
                size: height,
            });
        }
        if self.col0 + self.cols > width {
            return Err(Error::OutOfBounds {
                axis: Axis::Col,
                index: self.col0 + self.cols - 1,
                size: width,
            });
        }
        Ok(())
    }

    /// Window `inner`, given relative to `self`, expressed in parent coordinates.
    pub fn compose(&self, inner: &Window) -> Window {
        Window::new(
            self.row0 + inner.row0,
            self.col0 + inner.col0,
            inner.rows,
            inner.cols,
        )
    }
}

/// Multiband raster with band-sequential storage.
///
/// A pixel is masked when nodata is set and every band equals it.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T: Scalar> {
    width: usize,
    height: usize,
    bands: usize,
    geotransform: Geotransform,
    nodata: Option<T>,
    data: Vec<T>,
}

impl<T: Scalar> Raster<T> {
    pub fn new(
        width: usize,
        height: usize,
        bands: usize,
        geotransform: Geotransform,
        nodata: Option<T>,
        data: Vec<T>,
    ) -> Result<Self> {
        if width == 0 || height == 0 || bands == 0 {
            return Err(Error::InvalidRaster(format!(
                "dimensions must be positive, got {width}x{height}x{bands}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(bands))
            .ok_or_else(|| Error::InvalidRaster("dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(Error::InvalidRaster(format!(
                "data holds {} values, expected {expected}",
                data.len()
            )));
        }
        geotransform.validate()?;
        if let Some(nd) = nodata {
            if nd.is_nan() {
                return Err(Error::InvalidRaster("nodata must not be NaN".into()));
            }
        }
        Ok(Raster {
            width,
            height,
            bands,
            geotransform,
            nodata,
            data,
        })
    }

    /// Raster with every sample set to `value`.
    pub fn filled(
        width: usize,
        height: usize,
        bands: usize,
        geotransform: Geotransform,
        value: T,
    ) -> Result<Self> {
        let n = width.saturating_mul(height).saturating_mul(bands);
        Raster::new(width, height, bands, geotransform, None, vec![value; n])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn band_count(&self) -> usize {
        self.bands
    }

    pub fn geotransform(&self) -> &Geotransform {
        &self.geotransform
    }

    pub fn nodata(&self) -> Option<T> {
        self.nodata
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Row-major samples of one band.
    pub fn band(&self, band: usize) -> &[T] {
        let n = self.pixel_count();
        &self.data[band * n..(band + 1) * n]
    }

    pub fn get_pixel(&self, row: usize, col: usize, band: usize) -> Result<T> {
        self.check_pixel(row, col)?;
        if band >= self.bands {
            return Err(Error::OutOfBounds {
                axis: Axis::Band,
                index: band,
                size: self.bands,
            });
        }
        Ok(self.data[band * self.pixel_count() + row * self.width + col])
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, band: usize, value: T) -> Result<()> {
        self.get_pixel(row, col, band)?;
        let n = self.pixel_count();
        self.data[band * n + row * self.width + col] = value;
        Ok(())
    }

    fn check_pixel(&self, row: usize, col: usize) -> Result<()> {
        if row >= self.height {
            return Err(Error::OutOfBounds {
                axis: Axis::Row,
                index: row,
                size: self.height,
            });
        }
        if col >= self.width {
            return Err(Error::OutOfBounds {
                axis: Axis::Col,
                index: col,
                size: self.width,
            });
        }
        Ok(())
    }

    /// Copies the band vector of the pixel at linear index `idx` into `out`.
    pub(crate) fn gather(&self, idx: usize, out: &mut [T]) {
        let n = self.pixel_count();
        for (b, slot) in out.iter_mut().enumerate() {
            *slot = self.data[b * n + idx];
        }
    }

    pub fn pixel_vector(&self, row: usize, col: usize) -> Result<Vec<T>> {
        self.check_pixel(row, col)?;
        let mut out = vec![T::zero(); self.bands];
        self.gather(row * self.width + col, &mut out);
        Ok(out)
    }

    pub(crate) fn is_masked_at(&self, idx: usize) -> bool {
        match self.nodata {
            None => false,
            Some(nd) => {
                let n = self.pixel_count();
                (0..self.bands).all(|b| self.data[b * n + idx] == nd)
            }
        }
    }

    pub fn is_masked(&self, row: usize, col: usize) -> Result<bool> {
        self.check_pixel(row, col)?;
        Ok(self.is_masked_at(row * self.width + col))
    }

    pub fn crop(&self, window: &Window) -> Result<Raster<T>> {
        window.check(self.width, self.height)?;
        let mut data = Vec::with_capacity(window.rows * window.cols * self.bands);
        for b in 0..self.bands {
            let band = self.band(b);
            for r in window.row0..window.row0 + window.rows {
                let start = r * self.width + window.col0;
                data.extend_from_slice(&band[start..start + window.cols]);
            }
        }
        Ok(Raster {
            width: window.cols,
            height: window.rows,
            bands: self.bands,
            geotransform: self.geotransform.shifted(window.row0, window.col0),
            nodata: self.nodata,
            data,
        })
    }
}

/// Which code domain a [`ByteMap`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    ClassMap,
    ChangeMap,
}

impl MapKind {
    pub fn name(self) -> &'static str {
        match self {
            MapKind::ClassMap => "classmap",
            MapKind::ChangeMap => "changemap",
        }
    }

    pub fn allows(self, code: u8) -> bool {
        match self {
            MapKind::ClassMap => matches!(code, 0 | 1 | NODATA_CODE),
            MapKind::ChangeMap => matches!(code, 0..=3 | NODATA_CODE),
        }
    }
}

/// Single-band 8-bit categorical grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ByteMap {
    width: usize,
    height: usize,
    geotransform: Geotransform,
    kind: MapKind,
    codes: Vec<u8>,
}

impl ByteMap {
    pub fn new(
        width: usize,
        height: usize,
        geotransform: Geotransform,
        kind: MapKind,
        codes: Vec<u8>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if codes.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "map holds {} codes, expected {}",
                codes.len(),
                width * height
            )));
        }
        geotransform.validate()?;
        if let Some(i) = codes.iter().position(|&c| !kind.allows(c)) {
            return Err(Error::CodeDomain {
                kind: kind.name(),
                code: codes[i],
                row: i / width,
                col: i % width,
            });
        }
        Ok(ByteMap {
            width,
            height,
            geotransform,
            kind,
            codes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn geotransform(&self) -> &Geotransform {
        &self.geotransform
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn get(&self, row: usize, col: usize) -> Result<u8> {
        if row >= self.height {
            return Err(Error::OutOfBounds {
                axis: Axis::Row,
                index: row,
                size: self.height,
            });
        }
        if col >= self.width {
            return Err(Error::OutOfBounds {
                axis: Axis::Col,
                index: col,
                size: self.width,
            });
        }
        Ok(self.codes[row * self.width + col])
    }

    pub fn crop(&self, window: &Window) -> Result<ByteMap> {
        window.check(self.width, self.height)?;
        let mut codes = Vec::with_capacity(window.rows * window.cols);
        for r in window.row0..window.row0 + window.rows {
            let start = r * self.width + window.col0;
            codes.extend_from_slice(&self.codes[start..start + window.cols]);
        }
        Ok(ByteMap {
            width: window.cols,
            height: window.rows,
            geotransform: self.geotransform.shifted(window.row0, window.col0),
            kind: self.kind,
            codes,
        })
    }

    pub(crate) fn same_grid(&self, other: &ByteMap) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.geotransform == other.geotransform
    }
}

const LAYOUT: &str = "band-sequential";
const BYTE_ORDER: &str = "little-endian";
const UINT8: &str = "uint8";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    width: usize,
    height: usize,
    bands: usize,
    dtype: String,
    layout: String,
    byte_order: String,
    geotransform: Geotransform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nodata: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<MapKind>,
    data: String,
}

impl Header {
    fn check_common(&self, path: &Path, dtype: &str) -> Result<()> {
        let bad = |msg: String| Error::InvalidRaster(format!("{}: {msg}", path.display()));
        if self.dtype != dtype {
            return Err(bad(format!("dtype {:?}, expected {dtype:?}", self.dtype)));
        }
        if self.layout != LAYOUT {
            return Err(bad(format!("unsupported layout {:?}", self.layout)));
        }
        if self.byte_order != BYTE_ORDER {
            return Err(bad(format!("unsupported byte order {:?}", self.byte_order)));
        }
        Ok(())
    }
}

fn sidecar_path(header_path: &Path) -> Result<PathBuf> {
    if header_path.extension().is_some_and(|e| e == "bin") {
        return Err(Error::InvalidRaster(format!(
            "{}: header path must not use the .bin extension",
            header_path.display()
        )));
    }
    Ok(header_path.with_extension("bin"))
}

fn sidecar_name(bin: &Path) -> String {
    bin.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn resolve_data(header_path: &Path, data: &str) -> PathBuf {
    let p = Path::new(data);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        header_path
            .parent()
            .unwrap_or_else(|| Path::new(""))
            .join(p)
    }
}

fn read_header(path: &Path) -> Result<Header> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display(), e))
}

fn write_pair(header_path: &Path, header: &Header, bin: &Path, payload: &[u8]) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(header).map_err(|e| Error::json(header_path.display(), e))?;
    text.push('\n');
    fs::write(bin, payload).map_err(|e| Error::io(bin, e))?;
    fs::write(header_path, text).map_err(|e| Error::io(header_path, e))
}

fn read_payload(path: &Path, expected: u64) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    Ok(bytes)
}

/// Writes `raster` as `header_path` plus a `.bin` sidecar next to it.
pub fn write_scene<T: Scalar>(raster: &Raster<T>, header_path: impl AsRef<Path>) -> Result<()> {
    let header_path = header_path.as_ref();
    let bin = sidecar_path(header_path)?;
    let header = Header {
        width: raster.width,
        height: raster.height,
        bands: raster.bands,
        dtype: T::DTYPE.to_string(),
        layout: LAYOUT.to_string(),
        byte_order: BYTE_ORDER.to_string(),
        geotransform: raster.geotransform,
        nodata: raster.nodata.map(Scalar::to_f64_lossless),
        kind: None,
        data: sidecar_name(&bin),
    };
    let mut payload = Vec::with_capacity(raster.data.len() * T::BYTES);
    for &v in &raster.data {
        v.extend_le(&mut payload);
    }
    write_pair(header_path, &header, &bin, &payload)
}

/// Sample type named by a scene header, e.g. `"float32"`.
pub fn scene_dtype(header_path: impl AsRef<Path>) -> Result<String> {
    Ok(read_header(header_path.as_ref())?.dtype)
}

pub fn read_scene<T: Scalar>(header_path: impl AsRef<Path>) -> Result<Raster<T>> {
    let header_path = header_path.as_ref();
    let header = read_header(header_path)?;
    header.check_common(header_path, T::DTYPE)?;
    if header.width == 0 || header.height == 0 || header.bands == 0 {
        return Err(Error::InvalidRaster(format!(
            "{}: dimensions must be positive",
            header_path.display()
        )));
    }
    let count = (header.width as u64) * (header.height as u64) * (header.bands as u64);
    let bin = resolve_data(header_path, &header.data);
    let bytes = read_payload(&bin, count * T::BYTES as u64)?;
    let data = bytes.chunks_exact(T::BYTES).map(T::from_le).collect();
    let nodata = match header.nodata {
        None => None,
        Some(v) => Some(T::from_f64(v).ok_or_else(|| {
            Error::InvalidRaster(format!(
                "{}: nodata {v} not representable",
                header_path.display()
            ))
        })?),
    };
    Raster::new(
        header.width,
        header.height,
        header.bands,
        header.geotransform,
        nodata,
        data,
    )
}

pub fn write_bytemap(map: &ByteMap, header_path: impl AsRef<Path>) -> Result<()> {
    let header_path = header_path.as_ref();
    let bin = sidecar_path(header_path)?;
    let header = Header {
        width: map.width,
        height: map.height,
        bands: 1,
        dtype: UINT8.to_string(),
        layout: LAYOUT.to_string(),
        byte_order: BYTE_ORDER.to_string(),
        geotransform: map.geotransform,
        nodata: Some(f64::from(NODATA_CODE)),
        kind: Some(map.kind),
        data: sidecar_name(&bin),
    };
    write_pair(header_path, &header, &bin, &map.codes)
}

pub fn read_bytemap(header_path: impl AsRef<Path>) -> Result<ByteMap> {
    let header_path = header_path.as_ref();
    let header = read_header(header_path)?;
    header.check_common(header_path, UINT8)?;
    let bad = |msg: &str| Error::InvalidRaster(format!("{}: {msg}", header_path.display()));
    if header.bands != 1 {
        return Err(bad("byte maps have exactly one band"));
    }
    if header.nodata.is_some_and(|v| v != f64::from(NODATA_CODE)) {
        return Err(bad("byte map nodata must be 255"));
    }
    let kind = header.kind.ok_or_else(|| bad("missing \"kind\""))?;
    if header.width == 0 || header.height == 0 {
        return Err(bad("dimensions must be positive"));
    }
    let bin = resolve_data(header_path, &header.data);
    let codes = read_payload(&bin, header.width as u64 * header.height as u64)?;
    ByteMap::new(
        header.width,
        header.height,
        header.geotransform,
        kind,
        codes,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raster_2x2x2() -> Raster<f32> {
        // a..h = 1..8
        let data = (1..=8).map(|v| v as f32).collect();
        Raster::new(2, 2, 2, Geotransform::IDENTITY, None, data).unwrap()
    }

    #[test]
    fn single_element() {
        let r = Raster::new(1, 1, 1, Geotransform::IDENTITY, None, vec![0.5f32]).unwrap();
        assert_eq!(r.get_pixel(0, 0, 0).unwrap(), 0.5);
    }

    #[test]
    fn band_sequential_index() {
        let r = raster_2x2x2();
        // g is the 7th value
        assert_eq!(r.get_pixel(1, 0, 1).unwrap(), 7.0);
        let mut seen = Vec::new();
        for b in 0..2 {
            for row in 0..2 {
                for col in 0..2 {
                    seen.push(r.get_pixel(row, col, b).unwrap());
                }
            }
        }
        assert_eq!(seen, r.data());
    }

    #[test]
    fn out_of_bounds_names_axis() {
        let r = raster_2x2x2();
        match r.get_pixel(0, 0, 5) {
            Err(Error::OutOfBounds {
                axis: Axis::Band,
                index: 5,
                size: 2,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            r.get_pixel(2, 0, 0),
            Err(Error::OutOfBounds {
                axis: Axis::Row,
                ..
            })
        ));
        assert!(matches!(
            r.get_pixel(0, 9, 0),
            Err(Error::OutOfBounds {
                axis: Axis::Col,
                ..
            })
        ));
    }

    #[test]
    fn rejects_bad_geometry() {
        let gt = Geotransform([0.0, -1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(Raster::new(1, 1, 1, gt, None, vec![0.0f32]).is_err());
        let gt = Geotransform([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(Raster::new(1, 1, 1, gt, None, vec![0.0f32]).is_err());
        assert!(Raster::new(2, 1, 1, Geotransform::IDENTITY, None, vec![0.0f32]).is_err());
    }

    #[test]
    fn masking_requires_all_bands() {
        let data = vec![-1.0f32, -1.0, 5.0, -1.0];
        let r = Raster::new(2, 1, 2, Geotransform::IDENTITY, Some(-1.0), data).unwrap();
        assert!(!r.is_masked(0, 0).unwrap());
        assert!(r.is_masked(0, 1).unwrap());
    }

    #[test]
    fn crop_full_is_identity() {
        let r = raster_2x2x2();
        let c = r.crop(&Window::full(2, 2)).unwrap();
        assert_eq!(c, r);
    }

    #[test]
    fn crop_matches_direct_reads() {
        let data = (0..16).map(|v| v as f32 * 0.25).collect();
        let gt = Geotransform([100.0, 30.0, 0.0, 200.0, 0.0, -30.0]);
        let r = Raster::new(4, 4, 1, gt, None, data).unwrap();
        let c = r.crop(&Window::new(1, 1, 2, 2)).unwrap();
        for row in 0..2 {
            for col in 0..2 {
                assert_eq!(
                    c.get_pixel(row, col, 0).unwrap(),
                    r.get_pixel(row + 1, col + 1, 0).unwrap()
                );
            }
        }
        assert_eq!(c.geotransform().origin(), (130.0, 170.0));
    }

    #[test]
    fn crop_out_of_bounds() {
        let r = Raster::filled(4, 4, 1, Geotransform::IDENTITY, 0.0f32).unwrap();
        assert!(matches!(
            r.crop(&Window::new(3, 3, 2, 2)),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn world_pixel_inverse() {
        let gt = Geotransform([10.0, 2.0, 0.5, 20.0, 0.25, -3.0]);
        let (x, y) = gt.pixel_to_world(3.5, 7.25);
        let (c, r) = gt.world_to_pixel(x, y);
        assert!((c - 3.5).abs() < 1e-12 && (r - 7.25).abs() < 1e-12);
        assert_eq!(gt.pixel_area(), (2.0f64 * -3.0 - 0.5 * 0.25).abs());
    }

    #[test]
    fn scene_hand_encoded_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let vals = [1.5f32, -2.0, 0.125, 1e6];
        let bytes: Vec<u8> = vals.iter().flat_map(|v| v.to_le_bytes()).collect();
        assert_eq!(bytes.len(), 16);
        fs::write(dir.path().join("s.bin"), &bytes).unwrap();
        fs::write(
            dir.path().join("s.json"),
            r#"{"width":2,"height":2,"bands":1,"dtype":"float32","layout":"band-sequential",
               "byte_order":"little-endian","geotransform":[0,1,0,0,0,1],"data":"s.bin"}"#,
        )
        .unwrap();
        let r: Raster<f32> = read_scene(dir.path().join("s.json")).unwrap();
        assert_eq!(r.data(), &vals);
        assert_eq!(r.get_pixel(1, 0, 0).unwrap(), 0.125);
        assert_eq!(r.nodata(), None);
    }

    #[test]
    fn scene_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("s.bin"), [0u8; 12]).unwrap();
        fs::write(
            dir.path().join("s.json"),
            r#"{"width":2,"height":2,"bands":1,"dtype":"float32","layout":"band-sequential",
               "byte_order":"little-endian","geotransform":[0,1,0,0,0,1],"data":"s.bin"}"#,
        )
        .unwrap();
        match read_scene::<f32>(dir.path().join("s.json")) {
            Err(Error::SizeMismatch {
                expected: 16,
                actual: 12,
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scene_missing_and_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let err = read_scene::<f32>(dir.path().join("nope.json")).unwrap_err();
        assert!(err.is_io());
        fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
        assert!(matches!(
            read_scene::<f32>(dir.path().join("bad.json")),
            Err(Error::Json { .. })
        ));
    }

    #[test]
    fn scene_nodata_key_and_byte_count() {
        let dir = tempfile::tempdir().unwrap();
        let (w, h) = (3, 2);
        let data = (0..w * h * 11).map(|v| v as f32).collect();
        let r = Raster::new(w, h, 11, Geotransform::IDENTITY, Some(-9999.0f32), data).unwrap();
        let hp = dir.path().join("l8.json");
        write_scene(&r, &hp).unwrap();
        let header: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&hp).unwrap()).unwrap();
        assert_eq!(header["nodata"], serde_json::json!(-9999.0));
        assert_eq!(header["data"], "l8.bin");
        assert_eq!(
            fs::metadata(dir.path().join("l8.bin")).unwrap().len(),
            44 * 6
        );
        assert_eq!(read_scene::<f32>(&hp).unwrap(), r);
    }

    #[test]
    fn scene_dtype_checked() {
        let dir = tempfile::tempdir().unwrap();
        let r = Raster::filled(2, 2, 1, Geotransform::IDENTITY, 1.0f64).unwrap();
        write_scene(&r, dir.path().join("d.json")).unwrap();
        assert!(read_scene::<f32>(dir.path().join("d.json")).is_err());
        assert_eq!(read_scene::<f64>(dir.path().join("d.json")).unwrap(), r);
    }

    #[test]
    fn classmap_bad_code_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("m.bin"), [0u8, 1, 255, 1, 7, 0]).unwrap();
        fs::write(
            dir.path().join("m.json"),
            r#"{"width":3,"height":2,"bands":1,"dtype":"uint8","layout":"band-sequential",
               "byte_order":"little-endian","geotransform":[0,1,0,0,0,1],"kind":"classmap","data":"m.bin"}"#,
        )
        .unwrap();
        match read_bytemap(dir.path().join("m.json")) {
            Err(Error::CodeDomain {
                code: 7,
                row: 1,
                col: 1,
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn changemap_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let gt = Geotransform([500.0, 30.0, 0.0, 900.0, 0.0, -30.0]);
        let m = ByteMap::new(5, 1, gt, MapKind::ChangeMap, vec![0, 1, 2, 3, 255]).unwrap();
        write_bytemap(&m, dir.path().join("c.json")).unwrap();
        assert_eq!(read_bytemap(dir.path().join("c.json")).unwrap(), m);
    }

    #[test]
    fn empty_map_rejected() {
        assert!(ByteMap::new(0, 0, Geotransform::IDENTITY, MapKind::ClassMap, vec![]).is_err());
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("e.bin"), []).unwrap();
        fs::write(
            dir.path().join("e.json"),
            r#"{"width":0,"height":0,"bands":1,"dtype":"uint8","layout":"band-sequential",
               "byte_order":"little-endian","geotransform":[0,1,0,0,0,1],"kind":"classmap","data":"e.bin"}"#,
        )
        .unwrap();
        assert!(read_bytemap(dir.path().join("e.json")).is_err());
    }

    #[test]
    fn window_compose() {
        let outer = Window::new(2, 3, 5, 5);
        let inner = Window::new(1, 1, 2, 3);
        assert_eq!(outer.compose(&inner), Window::new(3, 4, 2, 3));
    }
}
