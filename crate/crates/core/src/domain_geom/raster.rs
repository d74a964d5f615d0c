//! PGM mask files and the Euclidean distance transform used for mask domains.

use crate::error::{Error, Result};
use std::path::Path;

/// A binary raster; row 0 is the top of the image.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub inside: Vec<bool>,
}

impl Raster {
    pub fn new(width: usize, height: usize, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != width * height {
            return Err(Error::Shape(format!(
                "raster {}x{} with {} pixels",
                width,
                height,
                inside.len()
            )));
        }
        Ok(Self {
            width,
            height,
            inside,
        })
    }

    pub fn read_pgm(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        parse_pgm(&bytes)
    }

    /// Writes a P5 file with inside pixels at 255.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.inside.iter().map(|&b| if b { 255u8 } else { 0u8 }));
        std::fs::write(path, out)?;
        Ok(())
    }
}

struct Tokens<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn skip_space(&mut self) {
        while self.pos < self.data.len() {
            let c = self.data[self.pos];
            if c == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next(&mut self) -> Result<&'a str> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Parse("truncated PGM header".into()));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .map_err(|_| Error::Parse("non-ASCII PGM token".into()))
    }

    fn number(&mut self) -> Result<usize> {
        let t = self.next()?;
        t.parse()
            .map_err(|_| Error::Parse(format!("bad PGM number {t:?}")))
    }
}

/// Parses P2 (ASCII) or P5 (binary) graymaps. A pixel is inside when its value,
/// rescaled to 0..=255, exceeds 127.
pub fn parse_pgm(bytes: &[u8]) -> Result<Raster> {
    let mut tok = Tokens {
        data: bytes,
        pos: 0,
    };
    let magic = tok.next()?;
    let width = tok.number()?;
    let height = tok.number()?;
    let maxval = tok.number()?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::Parse("invalid PGM dimensions or maxval".into()));
    }
    let n = width * height;
    let mut values = Vec::with_capacity(n);
    match magic {
        "P2" => {
            for _ in 0..n {
                values.push(tok.number()?);
            }
        }
        "P5" => {
            // exactly one whitespace byte separates the header from the raster
            let start = tok.pos + 1;
            let bpp = if maxval < 256 { 1 } else { 2 };
            let end = start + n * bpp;
            if end > bytes.len() {
                return Err(Error::Parse("truncated PGM raster".into()));
            }
            for k in 0..n {
                let v = if bpp == 1 {
                    bytes[start + k] as usize
                } else {
                    ((bytes[start + 2 * k] as usize) << 8) | bytes[start + 2 * k + 1] as usize
                };
                values.push(v);
            }
        }
        other => return Err(Error::Parse(format!("unsupported PGM magic {other:?}"))),
    }
    let inside = values
        .into_iter()
        .map(|v| v * 255 > 127 * maxval)
        .collect();
    Raster::new(width, height, inside)
}

/// One-dimensional squared distance transform (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let mut first = None;
    for q in 0..n {
        if f[q].is_finite() {
            first = Some(q);
            break;
        }
    }
    let Some(q0) = first else {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    };
    v[0] = q0;
    for q in q0 + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let mut s;
        loop {
            let p = v[k];
            s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64))
                / (2.0 * (q as f64 - p as f64));
            // z[0] is -inf, so k never underflows
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
}

/// Exact Euclidean distance (in node units) from every node to the nearest
/// node where `seed` is true. Row-major layout with `nx` columns.
pub fn distance_to(seed: &[bool], nx: usize, ny: usize) -> Vec<f64> {
    let mut tmp = vec![0.0; nx * ny];
    let mut col = vec![0.0; ny];
    let mut colout = vec![0.0; ny];
    for i in 0..nx {
        for j in 0..ny {
            col[j] = if seed[j * nx + i] { 0.0 } else { f64::INFINITY };
        }
        edt_1d(&col, &mut colout);
        for j in 0..ny {
            tmp[j * nx + i] = colout[j];
        }
    }
    let mut out = vec![0.0; nx * ny];
    let mut row = vec![0.0; nx];
    for j in 0..ny {
        edt_1d(&tmp[j * nx..(j + 1) * nx], &mut row);
        for i in 0..nx {
            out[j * nx + i] = row[i].sqrt();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ascii_and_binary() {
        let p2 = b"P2\n# c\n3 2\n255\n0 200 255\n128 127 0\n";
        let r = parse_pgm(p2).unwrap();
        assert_eq!(r.inside, vec![false, true, true, true, false, false]);
        let mut p5 = b"P5\n3 2\n255\n".to_vec();
        p5.extend([0u8, 200, 255, 128, 127, 0]);
        assert_eq!(parse_pgm(&p5).unwrap(), r);
    }

    #[test]
    fn edt_matches_brute_force() {
        let (nx, ny) = (13, 9);
        let seed: Vec<bool> = (0..nx * ny).map(|k| (k * 7919) % 17 == 3).collect();
        let d = distance_to(&seed, nx, ny);
        for j in 0..ny {
            for i in 0..nx {
                let mut best = f64::INFINITY;
                for q in 0..nx * ny {
                    if seed[q] {
                        let (a, b) = ((q % nx) as f64, (q / nx) as f64);
                        best = best.min(((i as f64 - a).powi(2) + (j as f64 - b).powi(2)).sqrt());
                    }
                }
                assert!((d[j * nx + i] - best).abs() < 1e-12);
            }
        }
    }
}
