//! 8-bit RGB frame representation and lossless / JPEG image I/O.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};

/// An 8-bit, 3-channel raster image. Samples are row-major `(R, G, B)`
/// triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    samples: Vec<u8>,
}

/// A single 8-bit channel, same geometry as the [`Frame`] it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelPlane {
    width: u32,
    height: u32,
    samples: Vec<u8>,
}

/// Output encoding for [`save_frame`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaveFormat {
    Png,
    /// Baseline JPEG at the given quality factor (1..=100).
    Jpeg(u8),
}

impl Frame {
    pub fn new(width: u32, height: u32, samples: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("frame dimensions must be non-zero"));
        }
        let expected = width as usize * height as usize * 3;
        if samples.len() != expected {
            return Err(Error::invalid(format!(
                "expected {expected} samples for {width}x{height}x3, got {}",
                samples.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            samples,
        })
    }

    /// Frame filled with a single `(r, g, b)` color.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let n = width as usize * height as usize;
        let mut samples = Vec::with_capacity(n * 3);
        for _ in 0..n {
            samples.extend_from_slice(&rgb);
        }
        Frame::new(width, height, samples).expect("non-zero dims")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [u8] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.samples[i], self.samples[i + 1], self.samples[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.samples[i..i + 3].copy_from_slice(&rgb);
    }
}

impl ChannelPlane {
    pub fn new(width: u32, height: u32, samples: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("plane dimensions must be non-zero"));
        }
        if samples.len() != width as usize * height as usize {
            return Err(Error::invalid("plane sample count does not match dims"));
        }
        Ok(ChannelPlane {
            width,
            height,
            samples,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    #[inline]
    pub fn value(&self, x: u32, y: u32) -> u8 {
        self.samples[y as usize * self.width as usize + x as usize]
    }
}

/// Round half away from zero, then clamp to the 8-bit range. All filters in
/// this crate re-quantize through this single helper.
#[inline]
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Loads a PNG or baseline JPEG into a [`Frame`].
pub fn load_frame(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Jpeg) => {}
        other => {
            return Err(Error::Decode {
                path: path.to_path_buf(),
                reason: format!("unsupported format {other:?}, expected PNG or JPEG"),
            })
        }
    }
    let img = reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let rgb = match img {
        DynamicImage::ImageRgb8(buf) => buf,
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
            return Err(Error::Decode {
                path: path.to_path_buf(),
                reason: "grayscale image, expected 3 channels".into(),
            })
        }
        DynamicImage::ImageRgba8(_) => {
            return Err(Error::Decode {
                path: path.to_path_buf(),
                reason: "alpha channel not supported, expected 3 channels".into(),
            })
        }
        other => other.into_rgb8(),
    };
    let (w, h) = (rgb.width(), rgb.height());
    Frame::new(w, h, rgb.into_raw())
}

/// Saves a frame as PNG (lossless) or baseline JPEG at a quality factor.
pub fn save_frame(frame: &Frame, path: impl AsRef<Path>, format: SaveFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    match format {
        SaveFormat::Png => {
            let enc = image::codecs::png::PngEncoder::new(&mut writer);
            image::ImageEncoder::write_image(
                enc,
                frame.samples(),
                frame.width(),
                frame.height(),
                image::ExtendedColorType::Rgb8,
            )
            .map_err(|e| Error::Runtime(format!("png encode of {}: {e}", path.display())))?;
        }
        SaveFormat::Jpeg(qf) => {
            if !(1..=100).contains(&qf) {
                return Err(Error::invalid(format!("jpeg quality {qf} outside 1..=100")));
            }
            let enc = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut writer, qf);
            image::ImageEncoder::write_image(
                enc,
                frame.samples(),
                frame.width(),
                frame.height(),
                image::ExtendedColorType::Rgb8,
            )
            .map_err(|e| Error::Runtime(format!("jpeg encode of {}: {e}", path.display())))?;
        }
    }
    Ok(())
}

/// JPEG encode/decode round trip in memory, used by the `jpeg` attack step.
pub fn jpeg_cycle(frame: &Frame, qf: u8) -> Result<Frame> {
    if !(1..=100).contains(&qf) {
        return Err(Error::invalid(format!("jpeg quality {qf} outside 1..=100")));
    }
    let mut buf = Vec::new();
    let enc = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut buf, qf);
    image::ImageEncoder::write_image(
        enc,
        frame.samples(),
        frame.width(),
        frame.height(),
        image::ExtendedColorType::Rgb8,
    )
    .map_err(|e| Error::Runtime(format!("jpeg encode: {e}")))?;
    let img = image::load_from_memory_with_format(&buf, ImageFormat::Jpeg)
        .map_err(|e| Error::Runtime(format!("jpeg decode: {e}")))?;
    let rgb = img.into_rgb8();
    let (w, h) = (rgb.width(), rgb.height());
    Frame::new(w, h, rgb.into_raw())
}

/// Splits a frame into its R, G, B planes, in that order.
pub fn split_channels(frame: &Frame) -> (ChannelPlane, ChannelPlane, ChannelPlane) {
    let n = frame.width() as usize * frame.height() as usize;
    let mut r = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for px in frame.samples().chunks_exact(3) {
        r.push(px[0]);
        g.push(px[1]);
        b.push(px[2]);
    }
    let w = frame.width();
    let h = frame.height();
    (
        ChannelPlane::new(w, h, r).expect("same dims"),
        ChannelPlane::new(w, h, g).expect("same dims"),
        ChannelPlane::new(w, h, b).expect("same dims"),
    )
}

/// Inverse of [`split_channels`].
pub fn recompose(r: &ChannelPlane, g: &ChannelPlane, b: &ChannelPlane) -> Result<Frame> {
    if r.width() != g.width()
        || r.width() != b.width()
        || r.height() != g.height()
        || r.height() != b.height()
    {
        return Err(Error::invalid("channel planes have mismatched dimensions"));
    }
    let n = r.samples().len();
    let mut samples = Vec::with_capacity(n * 3);
    for i in 0..n {
        samples.push(r.samples()[i]);
        samples.push(g.samples()[i]);
        samples.push(b.samples()[i]);
    }
    Frame::new(r.width(), r.height(), samples)
}

/// ITU-R BT.601 luma: `Y = round(0.299 R + 0.587 G + 0.114 B)`.
pub fn to_luma(frame: &Frame) -> ChannelPlane {
    let n = frame.width() as usize * frame.height() as usize;
    let mut y = Vec::with_capacity(n);
    for px in frame.samples().chunks_exact(3) {
        let v = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
        y.push(quantize(v));
    }
    ChannelPlane::new(frame.width(), frame.height(), y).expect("same dims")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn noise_frame(w: u32, h: u32, seed: u64) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..w as usize * h as usize * 3)
            .map(|_| rng.random::<u8>())
            .collect();
        Frame::new(w, h, samples).unwrap()
    }

    #[test]
    fn split_matches_pixel_components() {
        let mut f = Frame::filled(4, 4, [0, 0, 0]);
        f.set_pixel(2, 1, [10, 20, 30]);
        let (r, g, b) = split_channels(&f);
        assert_eq!(r.value(2, 1), 10);
        assert_eq!(g.value(2, 1), 20);
        assert_eq!(b.value(2, 1), 30);
    }

    #[test]
    fn gray_frame_splits_into_identical_planes() {
        let f = Frame::filled(5, 3, [77, 77, 77]);
        let (r, g, b) = split_channels(&f);
        assert_eq!(r, g);
        assert_eq!(g, b);
    }

    #[test]
    fn recompose_inverts_split() {
        let f = noise_frame(9, 7, 1);
        let (r, g, b) = split_channels(&f);
        assert_eq!(recompose(&r, &g, &b).unwrap(), f);
    }

    #[test]
    fn luma_fixed_points() {
        assert_eq!(to_luma(&Frame::filled(2, 2, [255, 255, 255])).value(0, 0), 255);
        assert_eq!(to_luma(&Frame::filled(2, 2, [0, 0, 0])).value(0, 0), 0);
        // round(0.299 * 255) = 76
        assert_eq!(to_luma(&Frame::filled(2, 2, [255, 0, 0])).value(0, 0), 76);
    }

    #[test]
    fn png_roundtrip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.png");
        let f = noise_frame(21, 17, 42);
        save_frame(&f, &path, SaveFormat::Png).unwrap();
        assert_eq!(load_frame(&path).unwrap(), f);
    }

    #[test]
    fn black_png_loads_as_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("black.png");
        save_frame(&Frame::filled(4, 4, [0, 0, 0]), &path, SaveFormat::Png).unwrap();
        let f = load_frame(&path).unwrap();
        assert!(f.samples().iter().all(|&s| s == 0));
    }

    #[test]
    fn jpeg_distortion_monotone_in_quality() {
        let f = noise_frame(64, 64, 42);
        let mae = |qf: u8| {
            let back = jpeg_cycle(&f, qf).unwrap();
            f.samples()
                .iter()
                .zip(back.samples())
                .map(|(&a, &b)| (a as f64 - b as f64).abs())
                .sum::<f64>()
                / f.samples().len() as f64
        };
        let maes: Vec<f64> = [80u8, 85, 90, 95, 100].iter().map(|&q| mae(q)).collect();
        assert!(maes[0] > 0.0, "QF 80 must distort a noise frame");
        for w in maes.windows(2) {
            assert!(
                w[1] <= w[0],
                "distortion must not increase with quality: {maes:?}"
            );
        }
    }

    #[test]
    fn rejects_bad_quality_and_bad_dims() {
        let f = Frame::filled(4, 4, [1, 2, 3]);
        assert!(jpeg_cycle(&f, 0).is_err());
        assert!(Frame::new(2, 2, vec![0; 5]).is_err());
        assert!(Frame::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn load_rejects_missing_file() {
        assert!(load_frame("/nonexistent/nope.png").is_err());
    }
}
