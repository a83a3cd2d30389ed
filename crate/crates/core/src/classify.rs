//! Whole-scene prediction.
//!
//! Output rows are split into blocks that are classified in parallel on the
//! current rayon pool. Each pixel depends only on its own band vector, so the
//! bytes written do not depend on the number of workers.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::cart::DecisionTree;
use crate::error::{Error, Result};
use crate::raster::{ByteMap, MapKind, Raster, NODATA_CODE};
use crate::scalar::Scalar;

const BLOCK_PIXELS: usize = 1 << 14;

/// Classifies every pixel; masked pixels become 255.
///
/// Unmasked pixels holding NaN or infinity are an error.
pub fn classify_raster<T: Scalar>(tree: &DecisionTree, raster: &Raster<T>) -> Result<ByteMap> {
    if raster.band_count() != tree.feature_count() {
        return Err(Error::Mismatch(format!(
            "raster has {} bands but the tree expects {}",
            raster.band_count(),
            tree.feature_count()
        )));
    }
    let width = raster.width();
    let rows_per_block = (BLOCK_PIXELS / width).max(1);
    let mut codes = vec![0u8; raster.pixel_count()];
    let results: Vec<Result<()>> = codes
        .par_chunks_mut(rows_per_block * width)
        .enumerate()
        .map(|(block, out)| {
            let start = block * rows_per_block * width;
            let mut buf = vec![T::zero(); raster.band_count()];
            for (k, slot) in out.iter_mut().enumerate() {
                let idx = start + k;
                if raster.is_masked_at(idx) {
                    *slot = NODATA_CODE;
                    continue;
                }
                raster.gather(idx, &mut buf);
                if let Some(band) = buf.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinitePixel {
                        row: idx / width,
                        col: idx % width,
                        band,
                    });
                }
                *slot = tree.route(&buf).1.code();
            }
            Ok(())
        })
        .collect();
    results.into_iter().collect::<Result<()>>()?;
    ByteMap::new(
        width,
        raster.height(),
        *raster.geotransform(),
        MapKind::ClassMap,
        codes,
    )
}

/// Classifies each epoch with the same tree, preserving input order.
pub fn classify_series<T: Scalar>(
    tree: &DecisionTree,
    scenes: &[(String, Raster<T>)],
) -> Result<Vec<(String, ByteMap)>> {
    let mut seen = HashSet::new();
    let first = scenes.first().map(|(_, r)| r);
    for (epoch, raster) in scenes {
        if !seen.insert(epoch.as_str()) {
            return Err(Error::Mismatch(format!("duplicate epoch label {epoch:?}")));
        }
        if let Some(f) = first {
            if (raster.width(), raster.height(), raster.band_count())
                != (f.width(), f.height(), f.band_count())
            {
                return Err(Error::Mismatch(format!(
                    "epoch {epoch:?} is {}x{}x{}, expected {}x{}x{}",
                    raster.width(),
                    raster.height(),
                    raster.band_count(),
                    f.width(),
                    f.height(),
                    f.band_count()
                )));
            }
        }
    }
    scenes
        .iter()
        .map(|(epoch, raster)| Ok((epoch.clone(), classify_raster(tree, raster)?)))
        .collect()
}
