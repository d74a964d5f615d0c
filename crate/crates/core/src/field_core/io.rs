//! Field serialization: CSV text and a lossless JSON-wrapped base64 binary.
//!
//! CSV layout: a header line `nx,ny,x0,y0,h_grid,components`, one line with
//! those values, then `components * ny` lines of `nx` values each (row-major,
//! component blocks in order).

use super::{Fill, ScalarField, VectorField};
use crate::domain_geom::{Domain, Grid};
use crate::error::{Error, Result};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::Arc;

/// Grid-tagged raw samples, independent of any domain.
#[derive(Clone, Debug, PartialEq)]
pub struct RawField {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub h_grid: f64,
    pub comps: Vec<Vec<f64>>,
}

impl RawField {
    pub fn from_scalar(f: &ScalarField) -> Self {
        Self::new(&f.domain.grid, vec![f.values.clone()])
    }

    pub fn from_vector(u: &VectorField) -> Self {
        Self::new(&u.domain.grid, u.comps.clone())
    }

    fn new(g: &Grid, comps: Vec<Vec<f64>>) -> Self {
        Self {
            nx: g.nx,
            ny: g.ny,
            x0: g.x0,
            y0: g.y0,
            h_grid: g.h,
            comps,
        }
    }

    fn check_grid(&self, domain: &Domain) -> Result<()> {
        let g = &domain.grid;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * g.h;
        if self.nx != g.nx
            || self.ny != g.ny
            || !close(self.x0, g.x0)
            || !close(self.y0, g.y0)
            || !close(self.h_grid, g.h)
        {
            return Err(Error::Shape(format!(
                "field grid {}x{} (h = {}) does not match domain grid {}x{} (h = {})",
                self.nx, self.ny, self.h_grid, g.nx, g.ny, g.h
            )));
        }
        Ok(())
    }

    pub fn into_scalar(self, domain: &Arc<Domain>, fill: Fill) -> Result<ScalarField> {
        self.check_grid(domain)?;
        if self.comps.len() != 1 {
            return Err(Error::Shape(format!("expected 1 component, got {}", self.comps.len())));
        }
        let values = self.comps.into_iter().next().unwrap_or_default();
        ScalarField::from_values(domain, values, fill)
    }

    pub fn into_vector(self, domain: &Arc<Domain>) -> Result<VectorField> {
        self.check_grid(domain)?;
        VectorField::from_comps(domain, self.comps)
    }

    /// Like [`RawField::into_vector`] but keeps the values outside the mask.
    pub fn into_vector_unmasked(self, domain: &Arc<Domain>) -> Result<VectorField> {
        self.check_grid(domain)?;
        if self.comps.len() != domain.dim() || self.comps.iter().any(|c| c.len() != domain.len()) {
            return Err(Error::Shape("vector components do not match the grid".into()));
        }
        Ok(VectorField {
            domain: domain.clone(),
            comps: self.comps,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("nx,ny,x0,y0,h_grid,components\n");
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            self.nx,
            self.ny,
            self.x0,
            self.y0,
            self.h_grid,
            self.comps.len()
        );
        for c in &self.comps {
            for row in c.chunks(self.nx) {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                s.push_str(&line.join(","));
                s.push('\n');
            }
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
        if !header.trim_start().starts_with("nx") {
            return Err(Error::Parse("missing CSV header".into()));
        }
        let meta: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Parse("missing CSV metadata".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        if meta.len() < 5 {
            return Err(Error::Parse("CSV metadata needs nx,ny,x0,y0,h_grid".into()));
        }
        let pu = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        let pf = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        let (nx, ny) = (pu(meta[0])?, pu(meta[1])?);
        let (x0, y0, h_grid) = (pf(meta[2])?, pf(meta[3])?, pf(meta[4])?);
        let ncomp = if meta.len() > 5 { pu(meta[5])? } else { 1 };
        let mut comps = vec![Vec::with_capacity(nx * ny); ncomp];
        for comp in comps.iter_mut() {
            for _ in 0..ny {
                let line = lines.next().ok_or_else(|| Error::Parse("truncated CSV".into()))?;
                let row: Vec<f64> = line
                    .split(',')
                    .map(|t| pf(t.trim()))
                    .collect::<Result<_>>()?;
                if row.len() != nx {
                    return Err(Error::Parse(format!("row of {} values, expected {nx}", row.len())));
                }
                comp.extend(row);
            }
        }
        Ok(Self {
            nx,
            ny,
            x0,
            y0,
            h_grid,
            comps,
        })
    }

    pub fn to_json_binary(&self) -> String {
        let mut bytes = Vec::with_capacity(8 * self.nx * self.ny * self.comps.len());
        for c in &self.comps {
            for v in c {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        let doc = BinaryDoc {
            format: "f64le-base64".into(),
            nx: self.nx,
            ny: self.ny,
            x0: self.x0,
            y0: self.y0,
            h_grid: self.h_grid,
            components: self.comps.len(),
            data: STANDARD.encode(bytes),
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    pub fn from_json_binary(text: &str) -> Result<Self> {
        let doc: BinaryDoc =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let bytes = STANDARD
            .decode(doc.data.as_bytes())
            .map_err(|e| Error::Parse(e.to_string()))?;
        let n = doc.nx * doc.ny;
        if bytes.len() != 8 * n * doc.components {
            return Err(Error::Parse("binary payload length mismatch".into()));
        }
        let vals: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let comps = vals.chunks(n.max(1)).map(|c| c.to_vec()).collect();
        Ok(Self {
            nx: doc.nx,
            ny: doc.ny,
            x0: doc.x0,
            y0: doc.y0,
            h_grid: doc.h_grid,
            comps,
        })
    }

    /// Reads either format, chosen by the first non-space character.
    pub fn parse_any(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::from_json_binary(text)
        } else {
            Self::from_csv(text)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct BinaryDoc {
    format: String,
    nx: usize,
    ny: usize,
    x0: f64,
    y0: f64,
    h_grid: f64,
    components: usize,
    data: String,
}
