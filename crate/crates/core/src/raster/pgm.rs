//! Plain (P2) and binary (P5) PGM with maxval up to 255.
//!
//! Values map to `gray / maxval`. Writing always uses maxval 255 and the
//! canonical header `P5\n<w> <h>\n255\n` (or `P2`, one image row per line).

use std::fs;
use std::io;
use std::path::Path;

use super::MaskGrid;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("PGM parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn parse_err(offset: usize, message: impl Into<String>) -> PgmError {
    PgmError::Parse { offset, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    Plain,
    Binary,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
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

    fn token(&mut self, what: &str) -> Result<&str, PgmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() && self.bytes[self.pos] != b'#' {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(parse_err(start, format!("expected {what}, found end of data")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| parse_err(start, format!("{what} is not ASCII")))
    }

    fn number(&mut self, what: &str) -> Result<usize, PgmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        let tok = self.token(what)?;
        tok.parse::<usize>().map_err(|_| parse_err(start, format!("{what} `{tok}` is not a non-negative integer")))
    }
}

/// Decodes a PGM byte buffer.
pub fn decode_pgm(bytes: &[u8]) -> Result<MaskGrid, PgmError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.token("magic number")?;
    let format = match magic {
        "P2" => PgmFormat::Plain,
        "P5" => PgmFormat::Binary,
        other => return Err(parse_err(0, format!("unsupported magic number `{other}` (expected P2 or P5)"))),
    };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(parse_err(maxval_at, format!("image dimensions {width}x{height} are empty")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(parse_err(maxval_at, format!("unsupported maxval {maxval} (expected 1..=255)")));
    }
    let expected = width * height;
    let scale = maxval as f64;
    let values = match format {
        PgmFormat::Binary => {
            // Exactly one whitespace byte separates maxval from the raster.
            if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
                return Err(parse_err(cur.pos, "missing whitespace after maxval"));
            }
            let start = cur.pos + 1;
            let data = &bytes[start.min(bytes.len())..];
            if data.len() < expected {
                return Err(parse_err(
                    bytes.len(),
                    format!("header declares {expected} pixels but only {} provided ({} short)", data.len(), expected - data.len()),
                ));
            }
            let mut values = Vec::with_capacity(expected);
            for (k, &g) in data[..expected].iter().enumerate() {
                if g as usize > maxval {
                    return Err(parse_err(start + k, format!("gray value {g} exceeds maxval {maxval}")));
                }
                values.push(g as f64 / scale);
            }
            values
        }
        PgmFormat::Plain => {
            let mut values = Vec::with_capacity(expected);
            for k in 0..expected {
                cur.skip_space_and_comments();
                if cur.pos >= bytes.len() {
                    return Err(parse_err(
                        cur.pos,
                        format!("header declares {expected} pixels but only {k} provided ({} short)", expected - k),
                    ));
                }
                let at = cur.pos;
                let g = cur.number("gray value")?;
                if g > maxval {
                    return Err(parse_err(at, format!("gray value {g} exceeds maxval {maxval}")));
                }
                values.push(g as f64 / scale);
            }
            values
        }
    };
    MaskGrid::new(width, height, values).map_err(|e| parse_err(0, e.to_string()))
}

/// Encodes a grid with maxval 255, rounding each value to the nearest gray level.
pub fn encode_pgm(grid: &MaskGrid, format: PgmFormat) -> Vec<u8> {
    let gray = |v: f64| (v * 255.0).round().clamp(0.0, 255.0) as u8;
    let (w, h) = (grid.width(), grid.height());
    match format {
        PgmFormat::Binary => {
            let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
            out.extend(grid.values().iter().map(|&v| gray(v)));
            out
        }
        PgmFormat::Plain => {
            let mut s = format!("P2\n{w} {h}\n255\n");
            for row in grid.values().chunks(w) {
                let line: Vec<String> = row.iter().map(|&v| gray(v).to_string()).collect();
                s.push_str(&line.join(" "));
                s.push('\n');
            }
            s.into_bytes()
        }
    }
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<MaskGrid, PgmError> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_pgm(path: impl AsRef<Path>, grid: &MaskGrid, format: PgmFormat) -> Result<(), PgmError> {
    crate::io::write_atomic(path.as_ref(), &encode_pgm(grid, format))?;
    Ok(())
}
