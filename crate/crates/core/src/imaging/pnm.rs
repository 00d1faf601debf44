//! Binary PGM (P5) and PPM (P6) with maxval 255.

use std::path::Path;

use super::{Image, ImageError, Result};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Whitespace and `#` comments between header tokens; at least one byte required.
    fn skip_separator(&mut self) -> Result<()> {
        let start = self.pos;
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
        if self.pos == start {
            return Err(ImageError::MalformedHeader {
                offset: self.pos,
                reason: "expected whitespace between header fields",
            });
        }
        Ok(())
    }

    fn number(&mut self, what: &'static str) -> Result<(u32, usize)> {
        let start = self.pos;
        let mut value: u32 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as u32))
                .ok_or(ImageError::MalformedHeader { offset: start, reason: "header number overflows" })?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(ImageError::MalformedHeader { offset: start, reason: what });
        }
        Ok((value, start))
    }
}

/// Decodes a binary PGM (1 channel) or PPM (3 channels) file.
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(ImageError::BadMagic),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    cur.skip_separator()?;
    let (width, wpos) = cur.number("expected width")?;
    cur.skip_separator()?;
    let (height, hpos) = cur.number("expected height")?;
    cur.skip_separator()?;
    let (maxval, mpos) = cur.number("expected maxval")?;
    if width == 0 {
        return Err(ImageError::MalformedHeader { offset: wpos, reason: "width must be positive" });
    }
    if height == 0 {
        return Err(ImageError::MalformedHeader { offset: hpos, reason: "height must be positive" });
    }
    if maxval != 255 {
        return Err(ImageError::UnsupportedDepth { maxval, offset: mpos });
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(ImageError::MalformedHeader {
                offset: cur.pos,
                reason: "expected a single whitespace byte after maxval",
            })
        }
    }
    let expected = (width as usize)
        .checked_mul(height as usize)
        .and_then(|v| v.checked_mul(channels))
        .ok_or(ImageError::MalformedHeader { offset: wpos, reason: "image too large" })?;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(ImageError::Truncated {
            offset: cur.pos,
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(ImageError::TrailingData {
            offset: cur.pos + expected,
            extra: payload.len() - expected,
        });
    }
    Image::new(width as usize, height as usize, channels, payload.to_vec())
}

/// Encodes with the canonical header `P5|P6\n<w> <h>\n255\n`.
pub fn encode_image(image: &Image) -> Vec<u8> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    out
}

fn io_err(path: &Path, e: std::io::Error) -> ImageError {
    ImageError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn read_image(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    decode_image(&bytes)
}

pub fn write_image(path: &Path, image: &Image) -> Result<()> {
    std::fs::write(path, encode_image(image)).map_err(|e| io_err(path, e))
}
