//! Dense matrix files (`csv`, little-endian `MTXB` binary) and PGM images.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MTXB";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    Csv,
    Bin,
}

impl MatrixFormat {
    /// Format implied by a file extension (`.csv`, `.bin`, `.mtxb`).
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(MatrixFormat::Csv),
            "bin" | "mtxb" => Some(MatrixFormat::Bin),
            _ => None,
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::Bin => "bin",
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(MatrixFormat::Csv),
            "bin" | "mtxb" => Ok(MatrixFormat::Bin),
            _ => Err(Error::Config(format!("unknown matrix format `{s}`"))),
        }
    }
}

pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        MatrixFormat::Csv => parse_csv(path, &bytes),
        MatrixFormat::Bin => parse_bin(path, &bytes),
    }
}

pub fn save_matrix(path: &Path, m: &Array2<f64>, format: MatrixFormat) -> Result<()> {
    let bytes = match format {
        MatrixFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            for row in m.rows() {
                // `{:?}` prints the shortest representation that parses back exactly
                w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(|e| Error::parse(path, e.to_string()))?;
            }
            w.into_inner().map_err(|e| Error::parse(path, e.to_string()))?
        }
        MatrixFormat::Bin => {
            let (r, c) = m.dim();
            let mut out = Vec::with_capacity(12 + 8 * r * c);
            out.extend_from_slice(MAGIC);
            out.extend_from_slice(&dim_u32(path, r)?.to_le_bytes());
            out.extend_from_slice(&dim_u32(path, c)?.to_le_bytes());
            for v in m.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out
        }
    };
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

fn dim_u32(path: &Path, d: usize) -> Result<u32> {
    u32::try_from(d).map_err(|_| Error::parse(path, format!("dimension {d} exceeds the u32 header")))
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(bytes);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::parse(path, format!("line {line}: {e}")))?;
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(Error::parse(path, format!("line {line}: expected {c} fields, found {}", rec.len())));
            }
            _ => {}
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, format!("line {line}, field {}: `{field}` is not a number", j + 1)))?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::parse(path, "empty matrix"))?;
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::parse(path, e.to_string()))
}

fn parse_bin(path: &Path, bytes: &[u8]) -> Result<Array2<f64>> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::parse(path, "offset 0: missing MTXB header"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("four bytes")) as usize;
    let (r, c) = (word(4), word(8));
    let expected = r.checked_mul(c).and_then(|n| n.checked_mul(8)).map(|n| n + 12);
    if expected != Some(bytes.len()) {
        return Err(Error::parse(
            path,
            format!("offset {}: payload holds {} bytes, a {r}x{c} matrix needs {}", 12, bytes.len() - 12, r * c * 8),
        ));
    }
    let data = bytes[12..].chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("eight bytes"))).collect();
    Array2::from_shape_vec((r, c), data).map_err(|e| Error::parse(path, e.to_string()))
}

/// Reads a P2 or P5 PGM image with pixels scaled to `[0, 1]`.
pub fn load_pgm(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(path, &bytes)
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
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

    fn token(&mut self) -> Option<&str> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).ok().filter(|t| !t.is_empty())
    }

    fn number(&mut self, path: &Path, what: &str) -> Result<usize> {
        self.token().and_then(|t| t.parse().ok()).ok_or_else(|| Error::parse(path, format!("bad or missing {what}")))
    }
}

fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<Array2<f64>> {
    if bytes.len() < 2 {
        return Err(Error::parse(path, "truncated header"));
    }
    let magic = &bytes[..2];
    if magic != b"P2" && magic != b"P5" {
        return Err(Error::parse(path, format!("unsupported magic `{}`", String::from_utf8_lossy(magic))));
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number(path, "width")?;
    let height = h.number(path, "height")?;
    let maxval = h.number(path, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse(path, format!("maxval {maxval} outside 1..=65535")));
    }
    let count = width * height;
    let scale = maxval as f64;
    let mut data = Vec::with_capacity(count);
    if magic == b"P2" {
        for i in 0..count {
            let v = h.token().and_then(|t| t.parse::<usize>().ok()).ok_or_else(|| {
                Error::parse(path, format!("truncated payload: pixel {i} of {count} missing"))
            })?;
            if v > maxval {
                return Err(Error::parse(path, format!("pixel {i} value {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64 / scale);
        }
    } else {
        // a single whitespace byte separates the header from the raster
        let start = h.pos + 1;
        let width_bytes = if maxval > 255 { 2 } else { 1 };
        let raster = bytes.get(start..).unwrap_or(&[]);
        if raster.len() < count * width_bytes {
            return Err(Error::parse(
                path,
                format!("truncated payload: {} of {} bytes at offset {start}", raster.len(), count * width_bytes),
            ));
        }
        for px in raster[..count * width_bytes].chunks_exact(width_bytes) {
            let v = if width_bytes == 2 { u16::from_be_bytes([px[0], px[1]]) as f64 } else { px[0] as f64 };
            data.push(v / scale);
        }
    }
    Array2::from_shape_vec((height, width), data).map_err(|e| Error::parse(path, e.to_string()))
}

/// Writes an image in `[0, 1]` as an 8-bit binary PGM.
pub fn save_pgm(path: &Path, image: &Array2<f64>) -> Result<()> {
    let (h, w) = image.dim();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(image.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn tmp(name: &str, contents: &[u8]) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(name);
        fs::write(&p, contents).unwrap();
        (dir, p)
    }

    #[test]
    fn csv_grid() {
        let (_d, p) = tmp("a.csv", b"1,2\n3,4");
        assert_eq!(load_matrix(&p, MatrixFormat::Csv).unwrap(), array![[1.0, 2.0], [3.0, 4.0]]);
    }

    #[test]
    fn ragged_csv_names_the_line() {
        let (_d, p) = tmp("a.csv", b"1,2\n3");
        let msg = load_matrix(&p, MatrixFormat::Csv).unwrap_err().to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn bin_rejects_a_short_payload() {
        let mut b = MAGIC.to_vec();
        b.extend(2u32.to_le_bytes());
        b.extend(2u32.to_le_bytes());
        b.extend(1.0f64.to_le_bytes());
        let (_d, p) = tmp("a.bin", &b);
        assert!(load_matrix(&p, MatrixFormat::Bin).unwrap_err().to_string().contains("offset 12"));
    }

    #[test]
    fn pgm_p2_and_p5_agree() {
        let (_d, p2) = tmp("a.pgm", b"P2\n# comment\n2 2\n255\n0 255\n128 64\n");
        let m = load_pgm(&p2).unwrap();
        let expect = array![[0.0, 1.0], [128.0 / 255.0, 64.0 / 255.0]];
        assert_eq!(m, expect);
        let mut raw = b"P5\n2 2\n255\n".to_vec();
        raw.extend([0u8, 255, 128, 64]);
        let (_e, p5) = tmp("b.pgm", &raw);
        assert_eq!(load_pgm(&p5).unwrap(), expect);
    }

    #[test]
    fn pgm_errors() {
        let (_d, p) = tmp("a.pgm", b"P7\n1 1\n255\n0");
        assert!(load_pgm(&p).unwrap_err().to_string().contains("unsupported magic"));
        let (_e, q) = tmp("b.pgm", b"P5\n4 4\n255\n\x00\x01");
        assert!(load_pgm(&q).unwrap_err().to_string().contains("truncated"));
    }

    #[test]
    fn sixteen_bit_p5() {
        let mut raw = b"P5 1 2 65535\n".to_vec();
        raw.extend([0xff, 0xff, 0x80, 0x00]);
        let (_d, p) = tmp("c.pgm", &raw);
        assert_eq!(load_pgm(&p).unwrap(), array![[1.0], [32768.0 / 65535.0]]);
    }

    proptest! {
        #[test]
        fn bin_and_csv_round_trip(r in 1usize..8, c in 1usize..8, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = Array2::from_shape_fn((r, c), |_| rng.gen_range(-1e3..1e3));
            let dir = tempfile::tempdir().unwrap();
            for f in [MatrixFormat::Bin, MatrixFormat::Csv] {
                let p = dir.path().join(format!("m.{}", f.extension()));
                save_matrix(&p, &m, f).unwrap();
                let back = load_matrix(&p, f).unwrap();
                prop_assert!(back.iter().zip(m.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
            }
        }
    }
}
