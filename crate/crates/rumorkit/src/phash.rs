//! DCT-based 64-bit perceptual hashing of grayscale frames, Hamming
//! similarity, and sliding-window deduplication of frame and text-box streams.
//!
//! The hash keeps the low-frequency top-left 8x8 block of a 32x32 orthonormal
//! DCT: bit 63 corresponds to coefficient (0, 0), proceeding row-major, and a
//! bit is set when its coefficient is greater than or equal to the mean of all
//! 64 block coefficients (the DC coefficient participates in both).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Two hashes are similar when their Hamming distance is strictly below 8.
pub const SIMILARITY_THRESHOLD: u32 = 8;

/// Frames are compared against the 10 preceding frames.
pub const FRAME_WINDOW: usize = 10;

/// Text-box crops are compared against the 100 preceding boxes.
pub const TEXTBOX_WINDOW: usize = 100;

const HASH_SIZE: usize = 8;
const DCT_SIZE: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhashError {
    #[error("matrix is empty")]
    EmptyMatrix,
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("dedup window must be positive")]
    ZeroWindow,
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid PGM data: {0}")]
    PgmParse(String),
}

/// Grayscale frame with row-major intensities in [0, 255].
///
/// Intensities are kept as reals so that resampling output can itself be
/// hashed without rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, PhashError> {
        if width == 0 || height == 0 {
            return Err(PhashError::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(PhashError::InvalidImage(format!(
                "expected {width}x{height} = {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(i) = pixels
            .iter()
            .position(|v| !v.is_finite() || *v < 0.0 || *v > 255.0)
        {
            return Err(PhashError::InvalidImage(format!(
                "pixel {i} out of range [0, 255]"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Converts an RGB triplet stream into luma intensities (ITU-R BT.601).
    pub fn from_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Self, PhashError> {
        if rgb.len() != width * height * 3 {
            return Err(PhashError::InvalidImage(format!(
                "expected {} RGB bytes, got {}",
                width * height * 3,
                rgb.len()
            )));
        }
        let pixels = rgb
            .chunks_exact(3)
            .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
            .collect();
        Self::new(width, height, pixels)
    }

    /// Parses an 8-bit binary PGM (P5) file.
    pub fn from_pgm(bytes: &[u8]) -> Result<Self, PhashError> {
        let mut pos = 0;
        let mut read_token = || -> Result<String, PhashError> {
            // skip whitespace and '#' comment lines
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    break;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(PhashError::PgmParse("unexpected end of header".into()));
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };

        let magic = read_token()?;
        if magic != "P5" {
            return Err(PhashError::PgmParse(format!(
                "expected P5 magic, got {magic:?}"
            )));
        }
        let parse_dim = |tok: String| -> Result<usize, PhashError> {
            tok.parse()
                .map_err(|_| PhashError::PgmParse(format!("bad header field {tok:?}")))
        };
        let width = parse_dim(read_token()?)?;
        let height = parse_dim(read_token()?)?;
        let maxval = parse_dim(read_token()?)?;
        if maxval == 0 || maxval > 255 {
            return Err(PhashError::PgmParse(format!(
                "only 8-bit PGM supported, maxval {maxval}"
            )));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let expected = width.checked_mul(height).ok_or_else(|| {
            PhashError::PgmParse("image dimensions overflow".into())
        })?;
        let raster = bytes
            .get(pos..pos + expected)
            .ok_or_else(|| PhashError::PgmParse("truncated raster".into()))?;
        let scale = 255.0 / maxval as f64;
        let pixels = raster.iter().map(|&b| f64::from(b) * scale).collect();
        Self::new(width, height, pixels)
    }

    pub fn from_json(text: &str) -> Result<Self, PhashError> {
        let raw: GrayImage = serde_json::from_str(text)
            .map_err(|e| PhashError::InvalidImage(e.to_string()))?;
        Self::new(raw.width, raw.height, raw.pixels)
    }

    fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

/// A hashed frame (or text-box crop) within a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameHash {
    /// 64-bit perceptual hash, serialized as hex because JSON numbers cannot
    /// carry 64 bits exactly.
    #[serde(with = "hex_u64")]
    pub hash: u64,
    pub index: u64,
    pub timestamp: f64,
}

mod hex_u64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &u64, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format!("{value:016x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<u64, D::Error> {
        let text = String::deserialize(deserializer)?;
        u64::from_str_radix(&text, 16).map_err(serde::de::Error::custom)
    }
}

fn check_matrix(block: &[Vec<f64>]) -> Result<usize, PhashError> {
    let n = block.len();
    if n == 0 || block[0].is_empty() {
        return Err(PhashError::EmptyMatrix);
    }
    for row in block {
        if row.len() != n {
            return Err(PhashError::InvalidMatrix(format!(
                "expected a square {n}x{n} matrix"
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(PhashError::InvalidMatrix("non-finite entry".into()));
        }
    }
    Ok(n)
}

/// Basis matrix of the orthonormal type-II DCT: `B[k][x]`.
fn dct_basis(n: usize) -> Vec<Vec<f64>> {
    let scale0 = (1.0 / n as f64).sqrt();
    let scale = (2.0 / n as f64).sqrt();
    (0..n)
        .map(|k| {
            let a = if k == 0 { scale0 } else { scale };
            (0..n)
                .map(|x| {
                    a * ((std::f64::consts::PI * (2 * x + 1) as f64 * k as f64)
                        / (2.0 * n as f64))
                        .cos()
                })
                .collect()
        })
        .collect()
}

/// Orthonormal 2-D type-II DCT of a square matrix.
pub fn dct2d(block: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, PhashError> {
    let n = check_matrix(block)?;
    let basis = dct_basis(n);
    // rows: tmp[x][v] = sum_y block[x][y] * B[v][y]
    let mut tmp = vec![vec![0.0; n]; n];
    for x in 0..n {
        for v in 0..n {
            tmp[x][v] = (0..n).map(|y| block[x][y] * basis[v][y]).sum();
        }
    }
    // columns: out[u][v] = sum_x tmp[x][v] * B[u][x]
    let mut out = vec![vec![0.0; n]; n];
    for u in 0..n {
        for v in 0..n {
            out[u][v] = (0..n).map(|x| tmp[x][v] * basis[u][x]).sum();
        }
    }
    Ok(out)
}

/// Inverse of [`dct2d`]; recovers the spatial block from its coefficients.
pub fn idct2d(coeffs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, PhashError> {
    let n = check_matrix(coeffs)?;
    let basis = dct_basis(n);
    // rows: tmp[u][y] = sum_v coeffs[u][v] * B[v][y]
    let mut tmp = vec![vec![0.0; n]; n];
    for u in 0..n {
        for y in 0..n {
            tmp[u][y] = (0..n).map(|v| coeffs[u][v] * basis[v][y]).sum();
        }
    }
    // columns: out[x][y] = sum_u tmp[u][y] * B[u][x]
    let mut out = vec![vec![0.0; n]; n];
    for x in 0..n {
        for y in 0..n {
            out[x][y] = (0..n).map(|u| tmp[u][y] * basis[u][x]).sum();
        }
    }
    Ok(out)
}

/// Area-average (box) resampling to `out_w` x `out_h`.
///
/// Exact identity when the size is unchanged; deterministic for any input.
pub fn resize_area(image: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage, PhashError> {
    if out_w == 0 || out_h == 0 {
        return Err(PhashError::InvalidImage("resize target is empty".into()));
    }
    let sx = image.width as f64 / out_w as f64;
    let sy = image.height as f64 / out_h as f64;
    let mut pixels = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let y0 = oy as f64 * sy;
        let y1 = (oy + 1) as f64 * sy;
        for ox in 0..out_w {
            let x0 = ox as f64 * sx;
            let x1 = (ox + 1) as f64 * sx;
            let mut acc = 0.0;
            let mut area = 0.0;
            let py_end = (y1.ceil() as usize).min(image.height);
            let px_end = (x1.ceil() as usize).min(image.width);
            for py in y0.floor() as usize..py_end {
                let hy = (y1.min((py + 1) as f64) - y0.max(py as f64)).max(0.0);
                if hy == 0.0 {
                    continue;
                }
                for px in x0.floor() as usize..px_end {
                    let wx = (x1.min((px + 1) as f64) - x0.max(px as f64)).max(0.0);
                    if wx == 0.0 {
                        continue;
                    }
                    acc += image.get(px, py) * wx * hy;
                    area += wx * hy;
                }
            }
            pixels.push(if area > 0.0 { acc / area } else { 0.0 });
        }
    }
    GrayImage::new(out_w, out_h, pixels)
}

/// 64-bit perceptual hash of a grayscale frame.
///
/// The frame is area-resampled to 32x32, quantized to 64 gray levels
/// (`floor(v / 4)`), transformed by a 32x32 DCT; bits come from comparing the
/// top-left 8x8 coefficients against their own mean.
pub fn phash(image: &GrayImage) -> Result<u64, PhashError> {
    let small = resize_area(image, DCT_SIZE, DCT_SIZE)?;
    let block: Vec<Vec<f64>> = (0..DCT_SIZE)
        .map(|y| {
            (0..DCT_SIZE)
                .map(|x| (small.get(x, y) / 4.0).floor())
                .collect()
        })
        .collect();
    let coeffs = dct2d(&block)?;
    let mut low = [0.0; HASH_SIZE * HASH_SIZE];
    for r in 0..HASH_SIZE {
        for c in 0..HASH_SIZE {
            low[r * HASH_SIZE + c] = coeffs[r][c];
        }
    }
    let mean = low.iter().sum::<f64>() / low.len() as f64;
    let mut hash = 0u64;
    for (k, &coeff) in low.iter().enumerate() {
        if coeff >= mean {
            hash |= 1 << (63 - k);
        }
    }
    Ok(hash)
}

/// Number of differing bits between two hashes.
pub fn hamming(a: u64, b: u64) -> u32 {
    (a ^ b).count_ones()
}

/// True when the Hamming distance is strictly below the similarity threshold.
pub fn is_similar(a: u64, b: u64) -> bool {
    hamming(a, b) < SIMILARITY_THRESHOLD
}

/// Deduplicates a hash stream with an explicit Hamming threshold.
///
/// Element `i` is discarded iff it is similar to every one of the
/// `min(i, window)` immediately preceding elements of the original stream;
/// the first element is always retained and retained elements keep their
/// timestamps.
pub fn dedup_stream_with(
    hashes: &[FrameHash],
    window: usize,
    threshold: u32,
) -> Result<Vec<FrameHash>, PhashError> {
    if window == 0 {
        return Err(PhashError::ZeroWindow);
    }
    let mut retained = Vec::new();
    for (i, frame) in hashes.iter().enumerate() {
        let lookback = i.min(window);
        let redundant = lookback > 0
            && hashes[i - lookback..i]
                .iter()
                .all(|prev| hamming(prev.hash, frame.hash) < threshold);
        if !redundant {
            retained.push(frame.clone());
        }
    }
    Ok(retained)
}

/// Deduplicates with the standard similarity threshold of [`is_similar`].
pub fn dedup_stream(hashes: &[FrameHash], window: usize) -> Result<Vec<FrameHash>, PhashError> {
    dedup_stream_with(hashes, window, SIMILARITY_THRESHOLD)
}
