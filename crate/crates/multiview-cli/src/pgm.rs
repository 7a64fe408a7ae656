//! Binary PGM (P5) reading and writing, 8- and 16-bit grayscale.
//!
//! Pixel values map linearly to `[0, 1]`: a stored value `k` with maximum
//! `maxval` reads as `k / maxval`, and writing rounds `v * maxval`.
//! Writing uses 16-bit samples (big-endian, per the format), so
//! write-then-read is the identity for data that originated as 16-bit
//! samples.

use std::path::Path;

use anyhow::{bail, Context, Result};

pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    /// Row-major samples in `[0, 1]`.
    pub data: Vec<f64>,
}

pub fn write_pgm16(path: &Path, width: usize, height: usize, data: &[f64]) -> Result<()> {
    if data.len() != width * height {
        bail!(
            "pgm write: {} samples for {}x{} image",
            data.len(),
            width,
            height
        );
    }
    let mut out = Vec::with_capacity(32 + 2 * data.len());
    out.extend_from_slice(format!("P5\n{width} {height}\n65535\n").as_bytes());
    for v in data {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<PgmImage> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cursor = 0usize;

    let mut token = || -> Result<String> {
        // Skip whitespace and '#' comments.
        loop {
            while cursor < bytes.len() && bytes[cursor].is_ascii_whitespace() {
                cursor += 1;
            }
            if cursor < bytes.len() && bytes[cursor] == b'#' {
                while cursor < bytes.len() && bytes[cursor] != b'\n' {
                    cursor += 1;
                }
                continue;
            }
            break;
        }
        let start = cursor;
        while cursor < bytes.len() && !bytes[cursor].is_ascii_whitespace() {
            cursor += 1;
        }
        if start == cursor {
            bail!("malformed PGM header: unexpected end of file");
        }
        Ok(String::from_utf8_lossy(&bytes[start..cursor]).into_owned())
    };

    let magic = token()?;
    if magic != "P5" {
        bail!("unsupported format {magic:?}, expected binary PGM (P5)");
    }
    let width: usize = token()?.parse().context("parsing width")?;
    let height: usize = token()?.parse().context("parsing height")?;
    let maxval: u32 = token()?.parse().context("parsing maxval")?;
    if maxval == 0 || maxval > 65535 {
        bail!("maxval {maxval} outside 1..=65535");
    }
    // Exactly one whitespace byte separates the header from the raster.
    if cursor >= bytes.len() || !bytes[cursor].is_ascii_whitespace() {
        bail!("malformed PGM header: missing raster separator");
    }
    cursor += 1;

    let n = width * height;
    let wide = maxval > 255;
    let expected = n * if wide { 2 } else { 1 };
    let raster = &bytes[cursor..];
    if raster.len() < expected {
        bail!(
            "raster too short: {} bytes for {} expected",
            raster.len(),
            expected
        );
    }
    let scale = 1.0 / maxval as f64;
    let data = if wide {
        raster[..expected]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 * scale)
            .collect()
    } else {
        raster[..expected].iter().map(|b| *b as f64 * scale).collect()
    };
    Ok(PgmImage {
        width,
        height,
        data,
    })
}
