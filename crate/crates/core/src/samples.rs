//! Labelled GeoJSON samples and training-table extraction.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use geojson::{Feature, FeatureCollection, Geometry, GeometryValue, JsonObject};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::scalar::Scalar;
use crate::synth::SplitMix64;
use crate::LandCover;

/// Name of the integer class property on every feature.
pub const LABEL_PROPERTY: &str = "landcover";

#[derive(Debug, Clone, PartialEq)]
pub enum SampleGeometry {
    /// World coordinates in geotransform units.
    Point { x: f64, y: f64 },
    /// Closed exterior ring; the first vertex is repeated at the end.
    Polygon(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeature {
    pub geometry: SampleGeometry,
    pub label: LandCover,
}

fn feature_err(index: usize, reason: impl Into<String>) -> Error {
    Error::Feature {
        index,
        reason: reason.into(),
    }
}

fn label_of(index: usize, feature: &Feature) -> Result<LandCover> {
    let value = feature
        .property(LABEL_PROPERTY)
        .ok_or_else(|| feature_err(index, format!("missing \"{LABEL_PROPERTY}\" property")))?;
    let code = value.as_i64().ok_or_else(|| {
        feature_err(
            index,
            format!("\"{LABEL_PROPERTY}\" must be an integer, got {value}"),
        )
    })?;
    u8::try_from(code)
        .ok()
        .and_then(LandCover::from_code)
        .ok_or_else(|| {
            feature_err(
                index,
                format!("\"{LABEL_PROPERTY}\" {code} outside {{0, 1}}"),
            )
        })
}

fn xy(index: usize, pos: &[f64]) -> Result<(f64, f64)> {
    match pos {
        [x, y, ..] if x.is_finite() && y.is_finite() => Ok((*x, *y)),
        _ => Err(feature_err(index, "position needs two finite coordinates")),
    }
}

fn geometry_of(index: usize, feature: &Feature) -> Result<SampleGeometry> {
    let geometry = feature
        .geometry
        .as_ref()
        .ok_or_else(|| feature_err(index, "feature has no geometry"))?;
    match &geometry.value {
        GeometryValue::Point { coordinates } => {
            let (x, y) = xy(index, coordinates.as_slice())?;
            Ok(SampleGeometry::Point { x, y })
        }
        GeometryValue::Polygon { coordinates } => {
            let ring = match coordinates.as_slice() {
                [ring] => ring,
                [] => return Err(feature_err(index, "polygon has no rings")),
                _ => return Err(feature_err(index, "polygons with holes are not supported")),
            };
            let ring = ring
                .iter()
                .map(|p| xy(index, p.as_slice()))
                .collect::<Result<Vec<_>>>()?;
            if ring.len() < 4 {
                return Err(feature_err(index, "polygon ring needs at least 3 vertices"));
            }
            if ring.first() != ring.last() {
                return Err(feature_err(index, "polygon ring is not closed"));
            }
            Ok(SampleGeometry::Polygon(ring))
        }
        other => Err(feature_err(
            index,
            format!("unsupported geometry type {}", other.type_name()),
        )),
    }
}

/// Parses a FeatureCollection, keeping document order.
pub fn parse_feature_collection(text: &str) -> Result<Vec<LabeledFeature>> {
    let collection =
        FeatureCollection::from_str(text).map_err(|e| Error::GeoJson(e.to_string()))?;
    collection
        .features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            Ok(LabeledFeature {
                label: label_of(i, f)?,
                geometry: geometry_of(i, f)?,
            })
        })
        .collect()
}

pub fn read_features(path: impl AsRef<Path>) -> Result<Vec<LabeledFeature>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_feature_collection(&text)
}

/// Serializes features back to a GeoJSON FeatureCollection.
pub fn to_feature_collection(features: &[LabeledFeature]) -> String {
    let features = features.iter().map(|f| {
        let value = match &f.geometry {
            SampleGeometry::Point { x, y } => GeometryValue::new_point([*x, *y]),
            SampleGeometry::Polygon(ring) => {
                GeometryValue::new_polygon([ring.iter().map(|&(x, y)| [x, y])])
            }
        };
        let mut properties = JsonObject::new();
        properties.insert(LABEL_PROPERTY.to_string(), Value::from(f.label.code()));
        Feature {
            bbox: None,
            geometry: Some(Geometry::new(value)),
            id: None,
            properties: Some(properties),
            foreign_members: None,
        }
    });
    FeatureCollection::new(features).to_string()
}

/// One training row.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub values: Vec<T>,
    pub label: LandCover,
}

/// Band vectors paired with class labels; every row has `feature_count` values.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTable<T> {
    feature_count: usize,
    rows: Vec<Sample<T>>,
}

impl<T: Scalar> TrainingTable<T> {
    pub fn new(feature_count: usize) -> Self {
        TrainingTable {
            feature_count,
            rows: Vec::new(),
        }
    }

    pub fn from_rows(feature_count: usize, rows: Vec<Sample<T>>) -> Result<Self> {
        let mut table = TrainingTable::new(feature_count);
        for row in rows {
            table.push(row.values, row.label)?;
        }
        Ok(table)
    }

    pub fn push(&mut self, values: Vec<T>, label: LandCover) -> Result<()> {
        if values.len() != self.feature_count {
            return Err(Error::FeatureCount {
                expected: self.feature_count,
                actual: values.len(),
            });
        }
        self.rows.push(Sample { values, label });
        Ok(())
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn rows(&self) -> &[Sample<T>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row count per class, indexed by class code.
    pub fn label_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for row in &self.rows {
            counts[row.label.index()] += 1;
        }
        counts
    }

    /// `{"feature_count": n, "rows": [[values..., label], ...]}`
    pub fn to_json(&self) -> Result<String> {
        let mut rows = Vec::with_capacity(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            let mut out = Vec::with_capacity(self.feature_count + 1);
            for v in &row.values {
                let v = v.to_f64_lossless();
                if !v.is_finite() {
                    return Err(Error::Training(format!("row {i} has a non-finite value")));
                }
                out.push(Value::from(v));
            }
            out.push(Value::from(row.label.code()));
            rows.push(Value::Array(out));
        }
        let doc = serde_json::json!({
            "feature_count": self.feature_count,
            "rows": rows,
        });
        let mut text = serde_json::to_string(&doc).map_err(|e| Error::json("training table", e))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Doc {
            feature_count: usize,
            rows: Vec<Vec<Value>>,
        }
        let doc: Doc = serde_json::from_str(text).map_err(|e| Error::json("training table", e))?;
        let bad = |i: usize, m: &str| Error::Training(format!("table row {i}: {m}"));
        let mut table = TrainingTable::new(doc.feature_count);
        for (i, row) in doc.rows.into_iter().enumerate() {
            let Some((label, values)) = row.split_last() else {
                return Err(bad(i, "empty row"));
            };
            let label = label
                .as_u64()
                .and_then(|c| u8::try_from(c).ok())
                .and_then(LandCover::from_code)
                .ok_or_else(|| bad(i, "label must be 0 or 1"))?;
            let values = values
                .iter()
                .map(|v| {
                    v.as_f64()
                        .and_then(T::from_f64)
                        .ok_or_else(|| bad(i, "non-numeric value"))
                })
                .collect::<Result<Vec<T>>>()?;
            table.push(values, label)?;
        }
        Ok(table)
    }
}

/// Even-odd crossing test. Points on a left or top edge count as inside,
/// points on a right or bottom edge as outside, so adjacent polygons sharing
/// an edge never both claim a pixel centre.
fn contains(ring: &[(f64, f64)], px: f64, py: f64) -> bool {
    let mut inside = false;
    let mut j = ring.len() - 1;
    for i in 0..ring.len() {
        let (xi, yi) = ring[i];
        let (xj, yj) = ring[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Extracts one training row per sampled pixel.
///
/// Points take the pixel that contains them. Polygons take every pixel whose
/// centre lies inside the ring, in row-major order. Masked pixels are skipped.
pub fn sample_raster<T: Scalar>(
    raster: &Raster<T>,
    features: &[LabeledFeature],
) -> Result<TrainingTable<T>> {
    if features.is_empty() {
        return Err(Error::Training("no features to sample".into()));
    }
    let gt = raster.geotransform();
    let (w, h) = (raster.width(), raster.height());
    let mut table = TrainingTable::new(raster.band_count());
    let mut buf = vec![T::zero(); raster.band_count()];
    let mut emit = |idx: usize, label: LandCover, table: &mut TrainingTable<T>| {
        if !raster.is_masked_at(idx) {
            raster.gather(idx, &mut buf);
            table.rows.push(Sample {
                values: buf.clone(),
                label,
            });
        }
    };

    for (index, feature) in features.iter().enumerate() {
        match &feature.geometry {
            SampleGeometry::Point { x, y } => {
                let (col, row) = gt.world_to_pixel(*x, *y);
                let inside = col >= 0.0 && row >= 0.0 && col < w as f64 && row < h as f64;
                if !inside {
                    return Err(feature_err(
                        index,
                        format!("point ({x}, {y}) lies outside the raster extent"),
                    ));
                }
                emit(row as usize * w + col as usize, feature.label, &mut table);
            }
            SampleGeometry::Polygon(ring) => {
                let pix: Vec<(f64, f64)> = ring[..ring.len() - 1]
                    .iter()
                    .map(|&(x, y)| gt.world_to_pixel(x, y))
                    .collect();
                let (mut cmin, mut cmax, mut rmin, mut rmax) = (
                    f64::INFINITY,
                    f64::NEG_INFINITY,
                    f64::INFINITY,
                    f64::NEG_INFINITY,
                );
                for &(c, r) in &pix {
                    cmin = cmin.min(c);
                    cmax = cmax.max(c);
                    rmin = rmin.min(r);
                    rmax = rmax.max(r);
                }
                let span = |lo: f64, hi: f64, n: usize| {
                    let a = (lo - 0.5).floor().max(0.0) as usize;
                    let b = ((hi - 0.5).ceil().max(-1.0) + 1.0).min(n as f64) as usize;
                    a..b.max(a)
                };
                let mut covered = 0usize;
                for r in span(rmin, rmax, h) {
                    for c in span(cmin, cmax, w) {
                        if contains(&pix, c as f64 + 0.5, r as f64 + 0.5) {
                            covered += 1;
                            emit(r * w + c, feature.label, &mut table);
                        }
                    }
                }
                if covered == 0 {
                    return Err(feature_err(index, "polygon covers no pixel centres"));
                }
            }
        }
    }
    Ok(table)
}

/// Stratified, seeded split into (first, second) parts.
///
/// Each label contributes `round(train_fraction * n_label)` rows to the
/// first part, clamped to `1..n_label` so both parts hold every label.
pub fn split_table<T: Scalar>(
    table: &TrainingTable<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<(TrainingTable<T>, TrainingTable<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Training(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let mut first = TrainingTable::new(table.feature_count);
    let mut second = TrainingTable::new(table.feature_count);
    for label in LandCover::ALL {
        let mut idx: Vec<usize> = (0..table.rows.len())
            .filter(|&i| table.rows[i].label == label)
            .collect();
        let n = idx.len();
        if n < 2 {
            return Err(Error::Training(format!(
                "label {} has {n} rows; splitting needs at least 2",
                label.code()
            )));
        }
        rng.shuffle(&mut idx);
        let k = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
        first
            .rows
            .extend(idx[..k].iter().map(|&i| table.rows[i].clone()));
        second
            .rows
            .extend(idx[k..].iter().map(|&i| table.rows[i].clone()));
    }
    Ok((first, second))
}
