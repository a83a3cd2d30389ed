//! Post-classification change detection, area statistics and map rendering.

use std::collections::BTreeMap;
use std::fs;
use std::ops::{Add, AddAssign};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::raster::{ByteMap, MapKind, NODATA_CODE};
use crate::LandCover;

/// Old/new class pair encoded as `2 * old + new`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Transition {
    /// Non-urban in both epochs (green).
    StableNonUrban = 0,
    /// Non-urban became urban (red).
    Growth = 1,
    /// Urban became non-urban (blue).
    Loss = 2,
    /// Urban in both epochs (purple).
    StableUrban = 3,
}

impl Transition {
    pub const ALL: [Transition; 4] = [
        Transition::StableNonUrban,
        Transition::Growth,
        Transition::Loss,
        Transition::StableUrban,
    ];

    pub fn between(old: LandCover, new: LandCover) -> Transition {
        Transition::ALL[usize::from(2 * old.code() + new.code())]
    }

    pub fn from_code(code: u8) -> Option<Transition> {
        Transition::ALL.get(usize::from(code)).copied()
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn old(self) -> LandCover {
        LandCover::from_code(self.code() / 2).expect("0 or 1")
    }

    pub fn new_class(self) -> LandCover {
        LandCover::from_code(self.code() % 2).expect("0 or 1")
    }
}

/// Per-pixel transition map. Nodata in either epoch gives nodata.
pub fn detect_change(old: &ByteMap, new: &ByteMap) -> Result<ByteMap> {
    for (name, m) in [("old", old), ("new", new)] {
        if m.kind() != MapKind::ClassMap {
            return Err(Error::Mismatch(format!("{name} map is not a classmap")));
        }
    }
    if !old.same_grid(new) {
        return Err(Error::Mismatch(format!(
            "maps differ in grid: {}x{} {:?} vs {}x{} {:?}",
            old.width(),
            old.height(),
            old.geotransform().0,
            new.width(),
            new.height(),
            new.geotransform().0
        )));
    }
    let codes = old
        .codes()
        .iter()
        .zip(new.codes())
        .map(|(&o, &n)| {
            if o == NODATA_CODE || n == NODATA_CODE {
                NODATA_CODE
            } else {
                2 * o + n
            }
        })
        .collect();
    ByteMap::new(
        old.width(),
        old.height(),
        *old.geotransform(),
        MapKind::ChangeMap,
        codes,
    )
}

/// Pixel counts per transition code and the area they cover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangeStats {
    pub counts: [u64; 4],
    pub nodata: u64,
    /// Ground area of one pixel, geotransform units squared.
    pub pixel_area: f64,
}

impl ChangeStats {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.nodata
    }

    pub fn count(&self, t: Transition) -> u64 {
        self.counts[usize::from(t.code())]
    }

    pub fn area(&self, t: Transition) -> f64 {
        self.count(t) as f64 * self.pixel_area
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc {
            counts: BTreeMap<String, u64>,
            areas: BTreeMap<String, f64>,
            nodata: u64,
            total: u64,
            pixel_area: f64,
        }
        let doc = Doc {
            counts: Transition::ALL
                .iter()
                .map(|t| (t.code().to_string(), self.count(*t)))
                .collect(),
            areas: Transition::ALL
                .iter()
                .map(|t| (t.code().to_string(), self.area(*t)))
                .collect(),
            nodata: self.nodata,
            total: self.total(),
            pixel_area: self.pixel_area,
        };
        let mut text =
            serde_json::to_string_pretty(&doc).map_err(|e| Error::json("change stats", e))?;
        text.push('\n');
        Ok(text)
    }
}

impl AddAssign for ChangeStats {
    fn add_assign(&mut self, rhs: ChangeStats) {
        for (a, b) in self.counts.iter_mut().zip(rhs.counts) {
            *a += b;
        }
        self.nodata += rhs.nodata;
    }
}

impl Add for ChangeStats {
    type Output = ChangeStats;

    fn add(mut self, rhs: ChangeStats) -> ChangeStats {
        self += rhs;
        self
    }
}

pub fn change_stats(map: &ByteMap) -> ChangeStats {
    let mut counts = [0u64; 4];
    let mut nodata = 0;
    for &c in map.codes() {
        match c {
            0..=3 => counts[usize::from(c)] += 1,
            _ => nodata += 1,
        }
    }
    ChangeStats {
        counts,
        nodata,
        pixel_area: map.geotransform().pixel_area(),
    }
}

/// Code to RGB lookup table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette(pub BTreeMap<u8, [u8; 3]>);

impl Palette {
    pub fn change_default() -> Palette {
        Palette(BTreeMap::from([
            (0, [0, 128, 0]),
            (1, [255, 0, 0]),
            (2, [0, 0, 255]),
            (3, [128, 0, 128]),
            (NODATA_CODE, [0, 0, 0]),
        ]))
    }

    pub fn class_default() -> Palette {
        Palette(BTreeMap::from([
            (0, [0, 128, 0]),
            (1, [200, 200, 200]),
            (NODATA_CODE, [0, 0, 0]),
        ]))
    }

    pub fn default_for(kind: MapKind) -> Palette {
        match kind {
            MapKind::ClassMap => Palette::class_default(),
            MapKind::ChangeMap => Palette::change_default(),
        }
    }

    pub fn get(&self, code: u8) -> Option<[u8; 3]> {
        self.0.get(&code).copied()
    }

    /// Parses `{"0": [r, g, b], ...}`.
    pub fn from_json(text: &str) -> Result<Palette> {
        let raw: BTreeMap<String, [u8; 3]> =
            serde_json::from_str(text).map_err(|e| Error::json("palette", e))?;
        raw.into_iter()
            .map(|(k, rgb)| {
                k.parse::<u8>()
                    .map(|code| (code, rgb))
                    .map_err(|_| Error::Mismatch(format!("palette key {k:?} is not a code 0-255")))
            })
            .collect::<Result<BTreeMap<_, _>>>()
            .map(Palette)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Palette> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Palette::from_json(&text)
    }

    /// Overrides entries of `self` with those of `other`.
    pub fn overlay(mut self, other: &Palette) -> Palette {
        self.0.extend(other.0.iter().map(|(k, v)| (*k, *v)));
        self
    }
}

/// Encodes the map as an 8-bit RGB PNG, one image pixel per map pixel.
pub fn render_map(map: &ByteMap, palette: &Palette) -> Result<Vec<u8>> {
    render_codes(map.width(), map.height(), map.codes(), palette)
}

/// Renders a raw row-major code grid. Unlike [`render_map`] the codes are
/// not domain-checked first, so a corrupt grid fails on the palette lookup.
pub fn render_codes(
    width: usize,
    height: usize,
    codes: &[u8],
    palette: &Palette,
) -> Result<Vec<u8>> {
    if width == 0 || height == 0 || codes.len() != width * height {
        return Err(Error::InvalidRaster(format!(
            "{} codes for a {width}x{height} image",
            codes.len()
        )));
    }
    let mut rgb = Vec::with_capacity(codes.len() * 3);
    for &c in codes {
        rgb.extend_from_slice(&palette.get(c).ok_or(Error::MissingPalette(c))?);
    }
    let mut out = Vec::new();
    let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(&rgb)?;
    writer.finish()?;
    Ok(out)
}
