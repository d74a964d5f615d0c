//! Min-max scaled 8-bit PGM heatmaps of grid fields.

use jacshape_core::domain_geom::Domain;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Values mapped to black and white.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub min: f64,
    pub max: f64,
}

/// Grey levels of the in-mask `values`, top row first; nodes outside the
/// mask and constant fields are black.
pub fn grey_levels(values: &[f64], domain: &Domain) -> (Vec<u8>, Scale) {
    let inside = || (0..domain.len()).filter(|&k| domain.mask[k]).map(|k| values[k]);
    let min = inside().fold(f64::INFINITY, f64::min);
    let max = inside().fold(f64::NEG_INFINITY, f64::max);
    let scale = if min.is_finite() { Scale { min, max } } else { Scale { min: 0.0, max: 0.0 } };
    let g = &domain.grid;
    let mut pixels = Vec::with_capacity(g.len());
    for j in (0..g.ny).rev() {
        for i in 0..g.nx {
            let k = g.index(i, j);
            let level = if domain.mask[k] && scale.max > scale.min {
                (255.0 * (values[k] - scale.min) / (scale.max - scale.min)).round() as u8
            } else {
                0
            };
            pixels.push(level);
        }
    }
    (pixels, scale)
}

/// Writes a binary PGM and returns its scale.
pub fn write(path: &Path, values: &[f64], domain: &Domain) -> std::io::Result<Scale> {
    let (pixels, scale) = grey_levels(values, domain);
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(file, "P5\n{} {}\n255\n", domain.grid.nx, domain.grid.ny)?;
    file.write_all(&pixels)?;
    file.flush()?;
    Ok(scale)
}
