//! Binary PGM (P5) and PPM (P6) reading, PGM writing.
//!
//! Only 8-bit files (maxval 255) are accepted. Header comments (`#` to end of
//! line) are skipped. Writing always emits the canonical header
//! `P5\n<width> <height>\n255\n`, so a load/save round trip is byte-identical
//! for files that already use it.

use std::fs;
use std::path::Path;

use salience_core::{Heatmap, Tensor3};

use crate::error::{Error, PgmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Gray,
    Rgb,
}

struct Raster<'a> {
    kind: Kind,
    width: usize,
    height: usize,
    pixels: &'a [u8],
}

fn parse(bytes: &[u8], accept_rgb: bool) -> std::result::Result<Raster<'_>, PgmError> {
    let magic = bytes.get(..2).ok_or_else(|| PgmError::MalformedHeader("file shorter than magic".into()))?;
    let kind = match magic {
        b"P5" => Kind::Gray,
        b"P6" if accept_rgb => Kind::Rgb,
        other => return Err(PgmError::UnsupportedMagic(String::from_utf8_lossy(other).into_owned())),
    };
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // whitespace and comments before each field
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
        let name = ["width", "height", "maxval"][i];
        if start == pos {
            return Err(PgmError::MalformedHeader(format!("missing {name}")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("digits are ascii");
        *field = text
            .parse()
            .map_err(|_| PgmError::MalformedHeader(format!("{name} {text} does not fit")))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(PgmError::MalformedHeader("no whitespace after maxval".into())),
    }
    let [width, height, maxval] = fields.map(|f| f as usize);
    if width == 0 || height == 0 {
        return Err(PgmError::MalformedHeader(format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(PgmError::UnsupportedMaxval(maxval as u32));
    }
    let per_pixel = if kind == Kind::Rgb { 3 } else { 1 };
    let expected = width * height * per_pixel;
    let pixels = &bytes[pos..];
    if pixels.len() < expected {
        return Err(PgmError::Truncated {
            expected,
            actual: pixels.len(),
        });
    }
    Ok(Raster {
        kind,
        width,
        height,
        pixels: &pixels[..expected],
    })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn pgm_err(path: &Path) -> impl FnOnce(PgmError) -> Error + '_ {
    move |source| Error::Pgm {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses P5 bytes into a heatmap with values in `[0, 255]`.
pub fn decode_grayscale(bytes: &[u8]) -> std::result::Result<Heatmap, PgmError> {
    let r = parse(bytes, false)?;
    let values = r.pixels.iter().map(|&b| f64::from(b)).collect();
    Ok(Heatmap::new(r.width, r.height, values).expect("dimensions checked during parsing"))
}

pub fn load_grayscale(path: impl AsRef<Path>) -> Result<Heatmap> {
    let path = path.as_ref();
    decode_grayscale(&read(path)?).map_err(pgm_err(path))
}

/// Loads a P5 or P6 file as a 1- or 3-channel image.
pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor3> {
    let path = path.as_ref();
    let bytes = read(path)?;
    let r = parse(&bytes, true).map_err(pgm_err(path))?;
    let channels = if r.kind == Kind::Rgb { 3 } else { 1 };
    let values = r.pixels.iter().map(|&b| f64::from(b)).collect();
    Ok(Tensor3::new(r.height, r.width, channels, values)?)
}

/// Encodes a heatmap as P5, rounding half up. Every value must lie in `[0, 255]`.
pub fn encode_grayscale(hm: &Heatmap) -> std::result::Result<Vec<u8>, PgmError> {
    let mut out = format!("P5\n{} {}\n255\n", hm.width(), hm.height()).into_bytes();
    out.reserve(hm.len());
    for (index, &value) in hm.values().iter().enumerate() {
        if !(0.0..=255.0).contains(&value) {
            return Err(PgmError::ValueOutOfRange { index, value });
        }
        out.push((value + 0.5).floor().min(255.0) as u8);
    }
    Ok(out)
}

pub fn save_grayscale(hm: &Heatmap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_grayscale(hm).map_err(pgm_err(path))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes an 8-bit RGB (P6) image; values are rounded half up and clamped.
pub fn save_rgb(image: &Tensor3, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if image.channels() != 3 {
        return Err(Error::Config(format!("P6 needs 3 channels, got {}", image.channels())));
    }
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.values().iter().map(|&v| (v + 0.5).floor().clamp(0.0, 255.0) as u8));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p5(w: usize, h: usize, px: &[u8]) -> Vec<u8> {
        let mut v = format!("P5\n{w} {h}\n255\n").into_bytes();
        v.extend_from_slice(px);
        v
    }

    #[test]
    fn decodes_direct_bytes() {
        let hm = decode_grayscale(&p5(2, 2, &[0, 255, 128, 64])).unwrap();
        assert_eq!(hm.dims(), (2, 2));
        assert_eq!(hm.values(), &[0.0, 255.0, 128.0, 64.0]);
    }

    #[test]
    fn distinct_parse_errors() {
        assert!(matches!(decode_grayscale(b"P6\n1 1\n255\nabc"), Err(PgmError::UnsupportedMagic(_))));
        assert!(matches!(decode_grayscale(b"P5\n1\n"), Err(PgmError::MalformedHeader(_))));
        assert!(matches!(decode_grayscale(b"P5\n1 1\n65535\n\0\0"), Err(PgmError::UnsupportedMaxval(65535))));
        assert!(matches!(
            decode_grayscale(&p5(2, 2, &[1, 2, 3])),
            Err(PgmError::Truncated { expected: 4, actual: 3 })
        ));
        assert_eq!(
            decode_grayscale(b"P6\n1 1\n255\nabc").unwrap_err().to_string(),
            "unsupported magic \"P6\""
        );
    }

    #[test]
    fn comments_are_skipped() {
        let hm = decode_grayscale(b"P5 # made by hand\n# another\n1 2 255\n\x07\x09").unwrap();
        assert_eq!(hm.values(), &[7.0, 9.0]);
    }

    #[test]
    fn encode_rounds_half_up_and_rejects_out_of_range() {
        let one = |v: f64| Heatmap::new(1, 1, vec![v]).unwrap();
        assert_eq!(encode_grayscale(&one(255.0)).unwrap(), p5(1, 1, &[0xFF]));
        assert_eq!(encode_grayscale(&one(254.5)).unwrap(), p5(1, 1, &[0xFF]));
        assert_eq!(encode_grayscale(&one(0.49)).unwrap(), p5(1, 1, &[0]));
        let err = encode_grayscale(&one(300.0)).unwrap_err();
        assert!(err.to_string().starts_with("value out of range"));
    }

    #[test]
    fn canonical_files_round_trip() {
        let bytes = p5(3, 2, &[0, 1, 2, 253, 254, 255]);
        assert_eq!(encode_grayscale(&decode_grayscale(&bytes).unwrap()).unwrap(), bytes);
    }
}
