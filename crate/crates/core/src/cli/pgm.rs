//! Binary 8-bit PGM (P5) input and output.

use std::fs;
use std::path::Path;

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::ImageFormat {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Splits the header into its four tokens and returns them with the pixel offset.
fn header(bytes: &[u8], path: &Path) -> Result<([usize; 3], usize)> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(format_err(path, "not a binary PGM (missing P5 magic)"));
    }
    let mut pos = 2;
    let mut vals = [0usize; 3];
    for v in vals.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *v = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| format_err(path, "malformed header"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(format_err(path, "malformed header"));
    }
    Ok((vals, pos + 1))
}

/// Reads an 8-bit grayscale PGM as `rows x cols` reals in `[0, 255]`.
pub fn read_pgm(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path)?;
    let ([w, h, maxval], off) = header(&bytes, path)?;
    if maxval == 0 || maxval > 255 {
        return Err(format_err(path, format!("only 8-bit images are supported (maxval {maxval})")));
    }
    let data = &bytes[off..];
    if data.len() < w * h {
        return Err(format_err(path, "truncated pixel data"));
    }
    Ok(Array2::from_shape_fn((h, w), |(r, c)| data[r * w + c] as f64))
}

/// Loads an image for reconstruction: it must be square with a power-of-two
/// side unless `crop` is set, in which case the largest such centered square
/// is cut out.
pub fn load_image(path: &Path, crop: bool) -> Result<Array2<f64>> {
    let img = read_pgm(path)?;
    let (h, w) = img.dim();
    if h == w && h.is_power_of_two() {
        return Ok(img);
    }
    if !crop {
        return Err(format_err(
            path,
            format!("{w}x{h} is not a square power-of-two size; pass --crop to center-crop"),
        ));
    }
    let side = 1usize << h.min(w).ilog2();
    let (r0, c0) = ((h - side) / 2, (w - side) / 2);
    Ok(img.slice(s![r0..r0 + side, c0..c0 + side]).to_owned())
}

/// Writes a P5 PGM, clamping to `[0, 255]` and rounding.
pub fn save_image(image: ArrayView2<f64>, path: &Path) -> Result<()> {
    let (h, w) = image.dim();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(image.iter().map(|&v| {
        if v.is_nan() {
            0
        } else {
            v.clamp(0.0, 255.0).round() as u8
        }
    }));
    fs::write(path, out)?;
    Ok(())
}
