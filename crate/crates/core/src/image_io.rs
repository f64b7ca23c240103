//! Grayscale image container, PGM/PNG I/O and seeded Gaussian noise.
//!
//! Pixel values are kept as `f64` during processing. Quantization to 8 bits
//! happens only when an image is saved (or explicitly via [`Image::quantized`]).
//!
//! Noise is drawn from a ChaCha20 stream seeded with the 64-bit seed
//! (`rand_chacha::ChaCha20Rng::seed_from_u64`) and shaped with the ziggurat
//! sampler of `rand_distr::StandardNormal`. Both crates guarantee value
//! stability across platforms for a fixed version.

use std::fs;
use std::io::{BufReader, Cursor, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Row-major grayscale image with real-valued intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Image filled with a constant value.
    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(row, col)` at each pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// 8-bit representation: round half away from zero, then clamp to [0, 255].
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    /// The image as it would read back after [`save_image`].
    pub fn quantized(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f64::from(quantize(v))).collect(),
        }
    }
}

#[inline]
fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    // f64::round rounds half away from zero
    v.round().clamp(0.0, 255.0) as u8
}

/// Additive white Gaussian noise parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self { sigma, seed })
    }
}

/// Adds i.i.d. N(0, σ²) noise to every pixel. The result is not clamped.
pub fn add_awgn(img: &Image, spec: NoiseSpec) -> Image {
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let data = img
        .data
        .iter()
        .map(|&v| {
            let g: f64 = StandardNormal.sample(&mut rng);
            v + spec.sigma * g
        })
        .collect();
    Image {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Loads an 8-bit grayscale PGM (P2 or P5) or PNG image.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::Unreadable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes, path)
    } else if bytes.first() == Some(&b'P') {
        decode_pnm(&bytes, path)
    } else {
        Err(Error::Unreadable {
            path: path.to_path_buf(),
            reason: "not a PGM or PNG file".into(),
        })
    }
}

/// Saves as 8-bit grayscale. `.png` writes PNG, anything else binary PGM (P5).
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let bytes = if is_png {
        encode_png(img)?
    } else {
        encode_pgm(img)
    };
    fs::write(path, bytes)?;
    Ok(())
}

/// Binary P5 encoding with maxval 255.
pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.to_bytes());
    out
}

/// ASCII P2 encoding with maxval 255.
pub fn encode_pgm_ascii(img: &Image) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n255\n", img.width, img.height);
    for row in img.to_bytes().chunks(img.width) {
        let line: Vec<String> = row.iter().map(|b| b.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next_uint(&mut self) -> Option<u64> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }
}

pub(crate) fn decode_pnm(bytes: &[u8], path: &Path) -> Result<Image> {
    let unreadable = |reason: &str| Error::Unreadable {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 2 {
        return Err(unreadable("truncated header"));
    }
    let magic = &bytes[..2];
    let ascii = match magic {
        b"P2" => true,
        b"P5" => false,
        b"P3" | b"P6" | b"P1" | b"P4" | b"P7" => {
            return Err(Error::UnsupportedColorFormat {
                path: path.to_path_buf(),
                detail: format!("netpbm type {}", String::from_utf8_lossy(magic)),
            })
        }
        _ => return Err(unreadable("bad magic number")),
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.next_uint().ok_or_else(|| unreadable("truncated header"))? as usize;
    let height = cur.next_uint().ok_or_else(|| unreadable("truncated header"))? as usize;
    let maxval = cur.next_uint().ok_or_else(|| unreadable("truncated header"))?;
    if width == 0 || height == 0 {
        return Err(unreadable("zero image dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            detail: format!("maxval {maxval}"),
        });
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| unreadable("image dimensions overflow"))?;
    let data = if ascii {
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            let v = cur.next_uint().ok_or_else(|| unreadable("truncated pixel data"))?;
            if v > maxval {
                return Err(unreadable("pixel value exceeds maxval"));
            }
            data.push(v as f64);
        }
        data
    } else {
        // exactly one whitespace byte separates maxval from the raster
        let start = cur.pos + 1;
        if start > bytes.len() || bytes.len() - start < count {
            return Err(unreadable("truncated pixel data"));
        }
        bytes[start..start + count]
            .iter()
            .map(|&b| f64::from(b))
            .collect()
    };
    Image::new(width, height, data)
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<Image> {
    let unreadable = |reason: String| Error::Unreadable {
        path: path.to_path_buf(),
        reason,
    };
    let decoder = png::Decoder::new(BufReader::new(Cursor::new(bytes)));
    let mut reader = decoder.read_info().map_err(|e| unreadable(e.to_string()))?;
    let info = reader.info();
    let (color, depth) = (info.color_type, info.bit_depth);
    if color != png::ColorType::Grayscale {
        return Err(Error::UnsupportedColorFormat {
            path: path.to_path_buf(),
            detail: format!("PNG color type {color:?}"),
        });
    }
    if depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            detail: format!("PNG bit depth {depth:?}"),
        });
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| unreadable("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| unreadable(e.to_string()))?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let mut data = Vec::with_capacity(w * h);
    for row in buf[..frame.buffer_size()].chunks(frame.line_size).take(h) {
        data.extend(row[..w].iter().map(|&b| f64::from(b)));
    }
    Image::new(w, h, data)
}

fn encode_png(img: &Image) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Serialization(e.to_string()))?;
        writer
            .write_image_data(&img.to_bytes())
            .map_err(|e| Error::Serialization(e.to_string()))?;
    }
    out.flush()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(name: &str) -> &Path {
        Path::new(name)
    }

    #[test]
    fn decodes_binary_pgm() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend([0u8, 255, 128, 64]);
        let img = decode_pnm(&bytes, p("x.pgm")).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.data(), &[0.0, 255.0, 128.0, 64.0]);
    }

    #[test]
    fn ascii_and_binary_agree() {
        let ascii = b"P2\n# a comment\n2 2\n# another\n255\n0 255\n128 64\n";
        let mut bin = b"P5 2 2 255\n".to_vec();
        bin.extend([0u8, 255, 128, 64]);
        assert_eq!(
            decode_pnm(ascii, p("a")).unwrap(),
            decode_pnm(&bin, p("b")).unwrap()
        );
    }

    #[test]
    fn binary_pixel_equal_to_newline_is_data() {
        // byte 10 right after the header must not be eaten as whitespace
        let mut bytes = b"P5\n1 1\n255\n".to_vec();
        bytes.push(10);
        assert_eq!(decode_pnm(&bytes, p("x")).unwrap().data(), &[10.0]);
    }

    #[test]
    fn truncated_header_is_unreadable() {
        let err = decode_pnm(b"P5\n2 ", p("x")).unwrap_err();
        assert!(matches!(err, Error::Unreadable { .. }), "{err}");
    }

    #[test]
    fn truncated_raster_is_unreadable() {
        let err = decode_pnm(b"P5\n2 2\n255\n\x01\x02", p("x")).unwrap_err();
        assert!(matches!(err, Error::Unreadable { .. }));
    }

    #[test]
    fn sixteen_bit_and_color_are_distinct_errors() {
        let err = decode_pnm(b"P5\n1 1\n65535\n\x00\x00", p("x")).unwrap_err();
        assert!(matches!(err, Error::UnsupportedBitDepth { .. }));
        let err = decode_pnm(b"P6\n1 1\n255\n\x00\x00\x00", p("x")).unwrap_err();
        assert!(matches!(err, Error::UnsupportedColorFormat { .. }));
    }

    #[test]
    fn quantization_rounds_and_clamps() {
        let img = Image::new(4, 1, vec![254.6, -3.0, 2.5, 300.0]).unwrap();
        assert_eq!(img.to_bytes(), vec![255, 0, 3, 255]);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Image::new(0, 3, vec![]).is_err());
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn noise_is_deterministic_and_unclamped() {
        let img = Image::filled(32, 32, 0.0).unwrap();
        let spec = NoiseSpec::new(20.0, 7).unwrap();
        let a = add_awgn(&img, spec);
        let b = add_awgn(&img, spec);
        assert_eq!(a, b);
        assert!(a.data().iter().any(|&v| v < 0.0));
        let c = add_awgn(&img, NoiseSpec::new(20.0, 8).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn noise_statistics() {
        let img = Image::filled(256, 256, 100.0).unwrap();
        let sigma = 15.0;
        let noisy = add_awgn(&img, NoiseSpec::new(sigma, 42).unwrap());
        let n = noisy.data().len() as f64;
        let diffs: Vec<f64> = noisy.data().iter().map(|v| v - 100.0).collect();
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.2, "mean {mean}");
        assert!((var.sqrt() / sigma - 1.0).abs() < 0.02, "std {}", var.sqrt());
    }

    #[test]
    fn sigma_must_be_positive() {
        assert!(NoiseSpec::new(0.0, 1).is_err());
        assert!(NoiseSpec::new(-1.0, 1).is_err());
    }

    #[test]
    fn save_load_round_trip_pgm_and_png() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::from_fn(7, 5, |r, c| ((r * 37 + c * 11) % 256) as f64).unwrap();
        for name in ["a.pgm", "a.png"] {
            let path = dir.path().join(name);
            save_image(&img, &path).unwrap();
            assert_eq!(load_image(&path).unwrap(), img);
        }
        let ascii = dir.path().join("b.pgm");
        fs::write(&ascii, encode_pgm_ascii(&img)).unwrap();
        assert_eq!(load_image(&ascii).unwrap(), img);
    }

    #[test]
    fn missing_file_is_unreadable() {
        let err = load_image("/definitely/not/here.pgm").unwrap_err();
        assert!(matches!(err, Error::Unreadable { .. }));
    }

    #[test]
    fn rgb_png_is_rejected_as_color_format() {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 1, 1);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            enc.write_header().unwrap().write_image_data(&[1, 2, 3]).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        fs::write(&path, out).unwrap();
        assert!(matches!(
            load_image(&path).unwrap_err(),
            Error::UnsupportedColorFormat { .. }
        ));
    }
}
