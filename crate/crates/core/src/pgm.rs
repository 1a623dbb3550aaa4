//! Binary PGM (P5) interchange for heatmaps, plus PNG export for
//! human viewing. PGM round trips within 0.5 intensity per cell (byte
//! quantization); PNG is a convenience surface with no round-trip
//! contract.

use crate::error::{Error, Result};
use crate::raster::HeatMap;
use crate::tensor::Tensor;

/// Encode as binary PGM, maxval 255, one byte per cell rounded to
/// nearest. The day index rides along in a header comment so the file
/// is self-describing.
pub fn export_pgm(hm: &HeatMap) -> Result<Vec<u8>> {
    if hm.grid.shape().len() != 2 {
        return Err(Error::shape(format!(
            "export_pgm expects a rank-2 grid, got {:?}",
            hm.grid.shape()
        )));
    }
    let (h, w) = (hm.grid.shape()[0], hm.grid.shape()[1]);
    let mut out = Vec::with_capacity(32 + h * w);
    out.extend_from_slice(format!("P5\n# day {}\n{} {}\n255\n", hm.day, w, h).as_bytes());
    for &v in hm.grid.data() {
        out.push(v.clamp(0.0, 255.0).round() as u8);
    }
    Ok(out)
}

/// Decode a binary PGM. Accepts arbitrary whitespace and `#` comments in
/// the header; a `# day N` comment restores the day index (0 otherwise).
pub fn import_pgm(bytes: &[u8]) -> Result<HeatMap> {
    let mut pos = 0usize;
    let magic = header_token(bytes, &mut pos, &mut None)?;
    if magic != "P5" {
        return Err(Error::data(format!("not a binary PGM (magic '{magic}')")));
    }
    let mut day: Option<u32> = None;
    let width: usize = parse_token(bytes, &mut pos, &mut day, "width")?;
    let height: usize = parse_token(bytes, &mut pos, &mut day, "height")?;
    let maxval: usize = parse_token(bytes, &mut pos, &mut day, "maxval")?;
    if maxval != 255 {
        return Err(Error::data(format!("unsupported PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from raster data
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::data("malformed PGM header".to_string()));
    }
    pos += 1;
    let expected = width * height;
    if bytes.len() - pos != expected {
        return Err(Error::data(format!(
            "PGM raster has {} bytes, expected {expected}",
            bytes.len() - pos
        )));
    }
    let data: Vec<f64> = bytes[pos..].iter().map(|&b| b as f64).collect();
    Ok(HeatMap {
        day: day.unwrap_or(0),
        grid: Tensor::from_op(vec![height, width], data),
    })
}

/// Encode as an 8-bit grayscale PNG.
pub fn export_png(hm: &HeatMap) -> Result<Vec<u8>> {
    if hm.grid.shape().len() != 2 {
        return Err(Error::shape(format!(
            "export_png expects a rank-2 grid, got {:?}",
            hm.grid.shape()
        )));
    }
    let (h, w) = (hm.grid.shape()[0], hm.grid.shape()[1]);
    let pixels: Vec<u8> = hm
        .grid
        .data()
        .iter()
        .map(|&v| v.clamp(0.0, 255.0).round() as u8)
        .collect();
    let img = image::GrayImage::from_raw(w as u32, h as u32, pixels)
        .ok_or_else(|| Error::shape("grid/pixel length mismatch".to_string()))?;
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| Error::data(format!("png encode failed: {e}")))?;
    Ok(out.into_inner())
}

fn header_token<'a>(bytes: &'a [u8], pos: &mut usize, day: &mut Option<u32>) -> Result<&'a str> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            let start = *pos;
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            if let Ok(comment) = std::str::from_utf8(&bytes[start..*pos]) {
                if let Some(rest) = comment.strip_prefix("# day ") {
                    if let Ok(d) = rest.trim().parse::<u32>() {
                        *day = Some(d);
                    }
                }
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::data("truncated PGM header".to_string()));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .map_err(|_| Error::data("non-ASCII PGM header".to_string()))
}

fn parse_token(
    bytes: &[u8],
    pos: &mut usize,
    day: &mut Option<u32>,
    what: &str,
) -> Result<usize> {
    let tok = header_token(bytes, pos, day)?;
    tok.parse::<usize>()
        .map_err(|_| Error::data(format!("bad PGM {what} '{tok}'")))
}
