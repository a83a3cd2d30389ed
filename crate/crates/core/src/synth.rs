//! Deterministic synthetic scenes with planted ground truth.
//!
//! Each pixel's bands are drawn from a class-conditional Gaussian. The
//! generator, the Gaussian transform and the pixel visit order are all fixed
//! so that a seed reproduces a scene bit for bit on any platform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ByteMap, Geotransform, MapKind, Raster};
use crate::scalar::Scalar;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
    spare: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 {
            state: seed,
            spare: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in the open interval (0, 1), from the top 53 bits.
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    /// Standard normal via Box-Muller. Each pair of uniforms yields two
    /// normals; the sine branch is returned on the following call.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.next_open01();
        let u2 = self.next_open01();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Spatial arrangement of truth classes. Disk distances are measured between
/// pixel indices and the disk is inclusive (`d <= radius`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLayout {
    Uniform {
        class: u8,
    },
    Disk {
        center_row: f64,
        center_col: f64,
        radius: f64,
        #[serde(default = "urban")]
        inside: u8,
        #[serde(default)]
        outside: u8,
    },
    /// Explicit row-major class codes.
    Codes(Vec<u8>),
}

fn urban() -> u8 {
    1
}

impl Default for ClassLayout {
    fn default() -> Self {
        ClassLayout::Uniform { class: 0 }
    }
}

/// Per-pixel transition codes (`2 * old + new`) for a scene pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionPlan {
    Uniform {
        code: u8,
    },
    /// `core` inside `inner_radius`, `ring` out to `outer_radius`,
    /// `background` elsewhere.
    Annulus {
        center_row: f64,
        center_col: f64,
        inner_radius: f64,
        outer_radius: f64,
        core: u8,
        ring: u8,
        background: u8,
    },
    Codes(Vec<u8>),
}

fn within(row: usize, col: usize, center_row: f64, center_col: f64, radius: f64) -> bool {
    let dr = row as f64 - center_row;
    let dc = col as f64 - center_col;
    dr * dr + dc * dc <= radius * radius
}

impl ClassLayout {
    pub fn render(&self, width: usize, height: usize) -> Result<Vec<u8>> {
        let codes = match self {
            ClassLayout::Uniform { class } => vec![*class; width * height],
            ClassLayout::Disk {
                center_row,
                center_col,
                radius,
                inside,
                outside,
            } => (0..height)
                .flat_map(|r| (0..width).map(move |c| (r, c)))
                .map(|(r, c)| {
                    if within(r, c, *center_row, *center_col, *radius) {
                        *inside
                    } else {
                        *outside
                    }
                })
                .collect(),
            ClassLayout::Codes(codes) => {
                if codes.len() != width * height {
                    return Err(Error::InvalidSpec(format!(
                        "layout has {} codes for a {width}x{height} grid",
                        codes.len()
                    )));
                }
                codes.clone()
            }
        };
        if let Some(i) = codes.iter().position(|&c| c > 1) {
            return Err(Error::InvalidSpec(format!(
                "class code {} at pixel {i} is not 0 or 1",
                codes[i]
            )));
        }
        Ok(codes)
    }
}

impl TransitionPlan {
    pub fn render(&self, width: usize, height: usize) -> Result<Vec<u8>> {
        let codes = match self {
            TransitionPlan::Uniform { code } => vec![*code; width * height],
            TransitionPlan::Annulus {
                center_row,
                center_col,
                inner_radius,
                outer_radius,
                core,
                ring,
                background,
            } => (0..height)
                .flat_map(|r| (0..width).map(move |c| (r, c)))
                .map(|(r, c)| {
                    if within(r, c, *center_row, *center_col, *inner_radius) {
                        *core
                    } else if within(r, c, *center_row, *center_col, *outer_radius) {
                        *ring
                    } else {
                        *background
                    }
                })
                .collect(),
            TransitionPlan::Codes(codes) => {
                if codes.len() != width * height {
                    return Err(Error::InvalidSpec(format!(
                        "plan has {} codes for a {width}x{height} grid",
                        codes.len()
                    )));
                }
                codes.clone()
            }
        };
        if let Some(i) = codes.iter().position(|&c| c > 3) {
            return Err(Error::InvalidSpec(format!(
                "transition code {} at pixel {i} is outside 0..=3",
                codes[i]
            )));
        }
        Ok(codes)
    }
}

/// Recipe for one synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub band_count: usize,
    /// `class_means[class][band]`, two classes.
    pub class_means: Vec<Vec<f64>>,
    /// Per-band standard deviation shared by both classes.
    pub class_sigma: Vec<f64>,
    #[serde(default)]
    pub layout: ClassLayout,
    pub seed: u64,
    #[serde(default)]
    pub geotransform: Geotransform,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.width == 0 || self.height == 0 || self.band_count == 0 {
            return bad(format!(
                "dimensions must be positive, got {}x{}x{}",
                self.width, self.height, self.band_count
            ));
        }
        if self.class_means.len() != 2 {
            return bad(format!(
                "expected 2 class mean vectors, got {}",
                self.class_means.len()
            ));
        }
        for (class, means) in self.class_means.iter().enumerate() {
            if means.len() != self.band_count {
                return bad(format!(
                    "class {class} has {} means for {} bands",
                    means.len(),
                    self.band_count
                ));
            }
            if means.iter().any(|m| !m.is_finite()) {
                return bad(format!("class {class} has a non-finite mean"));
            }
        }
        if self.class_sigma.len() != self.band_count {
            return bad(format!(
                "{} sigmas for {} bands",
                self.class_sigma.len(),
                self.band_count
            ));
        }
        if self
            .class_sigma
            .iter()
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return bad("sigma must be finite and >= 0".into());
        }
        self.geotransform.validate()
    }

    /// Draws band values for a truth grid. Pixels are visited row-major with
    /// bands innermost.
    fn draw<T: Scalar>(&self, truth: &[u8], seed: u64) -> Result<Raster<T>> {
        let n = self.width * self.height;
        let mut data = vec![T::zero(); n * self.band_count];
        let mut rng = SplitMix64::new(seed);
        for (idx, &class) in truth.iter().enumerate() {
            let means = &self.class_means[usize::from(class)];
            for b in 0..self.band_count {
                let v = means[b] + self.class_sigma[b] * rng.next_gaussian();
                data[b * n + idx] = T::from_f64(v)
                    .ok_or_else(|| Error::InvalidSpec(format!("value {v} not representable")))?;
            }
        }
        Raster::new(
            self.width,
            self.height,
            self.band_count,
            self.geotransform,
            None,
            data,
        )
    }
}

/// Scene and its truth classification map.
pub fn generate_scene<T: Scalar>(spec: &SceneSpec) -> Result<(Raster<T>, ByteMap)> {
    spec.validate()?;
    let truth = spec.layout.render(spec.width, spec.height)?;
    let raster = spec.draw(&truth, spec.seed)?;
    let map = ByteMap::new(
        spec.width,
        spec.height,
        spec.geotransform,
        MapKind::ClassMap,
        truth,
    )?;
    Ok((raster, map))
}

/// Old/new scene pair drawn from a transition plan, plus the plan as a
/// change map. The old scene uses `seed`, the new one `seed + 1`; the
/// spec's own layout is ignored.
pub fn generate_change_pair<T: Scalar>(
    spec: &SceneSpec,
    plan: &TransitionPlan,
) -> Result<(Raster<T>, Raster<T>, ByteMap)> {
    spec.validate()?;
    let codes = plan.render(spec.width, spec.height)?;
    let old_truth: Vec<u8> = codes.iter().map(|c| c / 2).collect();
    let new_truth: Vec<u8> = codes.iter().map(|c| c % 2).collect();
    let old = spec.draw(&old_truth, spec.seed)?;
    let new = spec.draw(&new_truth, spec.seed.wrapping_add(1))?;
    let map = ByteMap::new(
        spec.width,
        spec.height,
        spec.geotransform,
        MapKind::ChangeMap,
        codes,
    )?;
    Ok((old, new, map))
}
