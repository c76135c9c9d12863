//! Reading and writing masks, images and score maps.
//!
//! Masks and images are stored as binary PGM (`P5`, maxval 255). 8-bit
//! grayscale PNG is accepted on input. Score maps are flat little-endian
//! `f32` buffers whose dimensions come from elsewhere.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Image, Mask, ScoreMap};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

/// Decoded 8-bit raster, before interpretation as mask or image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray8 {
    pub width: usize,
    pub height: usize,
    pub maxval: u8,
    pub data: Vec<u8>,
}

pub fn read_gray8(path: &Path) -> Result<Gray8> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P5") {
        decode_pgm(&bytes, path)
    } else if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes, path)
    } else {
        Err(malformed(path, "neither a P5 PGM nor a PNG file"))
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Option<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<Gray8> {
    if !bytes.starts_with(b"P5") {
        return Err(malformed(path, "missing P5 magic"));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number().ok_or_else(|| malformed(path, "bad width"))?;
    let height = cur.number().ok_or_else(|| malformed(path, "bad height"))?;
    let maxval = cur.number().ok_or_else(|| malformed(path, "bad maxval"))?;
    if width == 0 || height == 0 {
        return Err(malformed(path, "zero dimension"));
    }
    if maxval == 0 {
        return Err(malformed(path, "maxval must be positive"));
    }
    if maxval > 255 {
        return Err(Error::UnsupportedDepth {
            path: path.to_path_buf(),
            reason: format!("maxval {maxval} needs more than 8 bits"),
        });
    }
    // exactly one whitespace byte separates the header from the raster
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(malformed(path, "missing separator after maxval"));
    }
    let raster = &bytes[cur.pos + 1..];
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| malformed(path, "dimensions overflow"))?;
    if raster.len() < expected {
        return Err(malformed(
            path,
            format!(
                "header declares {width}x{height} but only {} data bytes follow",
                raster.len()
            ),
        ));
    }
    let data = raster[..expected].to_vec();
    if let Some(v) = data.iter().find(|&&v| usize::from(v) > maxval) {
        return Err(malformed(
            path,
            format!("sample {v} exceeds maxval {maxval}"),
        ));
    }
    Ok(Gray8 {
        width,
        height,
        maxval: maxval as u8,
        data,
    })
}

fn decode_png(bytes: Vec<u8>, path: &Path) -> Result<Gray8> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| malformed(path, e.to_string()))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::UnsupportedDepth {
            path: path.to_path_buf(),
            reason: format!("color type {:?}, expected grayscale", info.color_type),
        });
    }
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedDepth {
            path: path.to_path_buf(),
            reason: format!("bit depth {:?}, expected 8", info.bit_depth),
        });
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| malformed(path, "image too large"))?;
    let mut buf = vec![0; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| malformed(path, e.to_string()))?;
    let (width, height) = (frame.width as usize, frame.height as usize);
    let mut data = Vec::with_capacity(width * height);
    for row in buf[..frame.buffer_size()].chunks(frame.line_size) {
        data.extend_from_slice(&row[..width]);
    }
    Ok(Gray8 {
        width,
        height,
        maxval: 255,
        data,
    })
}

/// Loads a mask; every nonzero sample is foreground.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let g = read_gray8(path)?;
    Mask::new(
        g.width,
        g.height,
        g.data.into_iter().map(|v| u8::from(v != 0)).collect(),
    )
}

/// Loads an image, mapping stored value v to v / maxval.
pub fn load_image(path: &Path) -> Result<Image> {
    let g = read_gray8(path)?;
    let max = f64::from(g.maxval);
    Image::new(
        g.width,
        g.height,
        g.data.into_iter().map(|v| f64::from(v) / max).collect(),
    )
}

pub fn encode_pgm(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

/// PGM bytes with foreground written as 255.
pub fn encode_mask(m: &Mask) -> Vec<u8> {
    let data: Vec<u8> = m.data().iter().map(|&v| v * 255).collect();
    encode_pgm(m.width(), m.height(), &data)
}

/// PGM bytes with intensities quantized to round(v * 255).
pub fn encode_image(img: &Image) -> Vec<u8> {
    let data: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    encode_pgm(img.width(), img.height(), &data)
}

pub fn save_mask(m: &Mask, path: &Path) -> Result<()> {
    fs::write(path, encode_mask(m)).map_err(|e| Error::io(path, e))
}

pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    fs::write(path, encode_image(img)).map_err(|e| Error::io(path, e))
}

/// Reads a flat little-endian f32 score buffer of the given dimensions.
pub fn load_scores(path: &Path, width: usize, height: usize) -> Result<ScoreMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_scores(&bytes, width, height).map_err(|reason| malformed(path, reason))?
}

fn decode_scores(bytes: &[u8], width: usize, height: usize) -> Result<Result<ScoreMap>, String> {
    let expected = width * height * 4;
    if bytes.len() != expected {
        return Err(format!(
            "expected {expected} bytes for {width}x{height} f32 scores, found {}",
            bytes.len()
        ));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    Ok(ScoreMap::new(width, height, data))
}

pub fn encode_scores(s: &ScoreMap) -> Vec<u8> {
    s.data()
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect()
}
