//! Synthetic corpus construction and dataset manifests.
//!
//! Real frames are procedural scenes with per-pixel sensor noise across the
//! whole frame. Virtual frames composite a noisy foreground over a clean
//! backdrop that was bilinearly upscaled and Gaussian-blurred, so the
//! background lacks sensor noise; that statistical asymmetry is the signal
//! the detectors learn. Attack frames re-insert a real background (noise and
//! all) as the virtual backdrop, refit with a sub-pixel bilinear resample.
//!
//! Everything is a pure function of `(config, seed)`: manifests and frame
//! bytes reproduce bit-exactly.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{load_frame, quantize, save_frame, Frame, SaveFormat};

/// Class label of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Real,
    Virtual,
    AttackVirtual,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Virtual => "virtual",
            Label::AttackVirtual => "attack_virtual",
        }
    }

    /// Detector target: hypothesis H1 (any virtual backdrop) vs H0.
    pub fn is_virtual(self) -> bool {
        !matches!(self, Label::Real)
    }
}

/// Dataset partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label: Label,
    pub source_tag: String,
    #[serde(default)]
    pub scenarios: Vec<String>,
    pub split: Split,
    pub content_hash: String,
}

/// Per-class frame counts by split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl ClassCounts {
    pub const fn new(train: usize, val: usize, test: usize) -> Self {
        ClassCounts { train, val, test }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

/// Foreground matte shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "shape")]
pub enum MaskShape {
    /// Seed-jittered ellipse roughly where a subject sits in a call.
    Ellipse,
    /// User-supplied matte image; its luma is the alpha channel.
    Matte { path: String },
}

/// Generator configuration. Defaults give the desk-scale corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    pub real: ClassCounts,
    pub r#virtual: ClassCounts,
    pub attack: ClassCounts,
    /// Sensor noise standard deviation applied to captured frames.
    pub sensor_noise_sigma: f64,
    /// Alpha feather width in pixels at the matte boundary.
    pub feather_px: f64,
    /// Gaussian blur applied to the virtual backdrop.
    pub background_blur_sigma: f64,
    /// Virtual backdrops are generated at `1/background_scale` resolution
    /// and bilinearly upscaled to the canvas.
    pub background_scale: f64,
    /// Blur applied to the re-inserted background of attack frames. The
    /// replayed capture is refit, not smoothed, so this defaults to zero.
    pub attack_blur_sigma: f64,
    /// Global illumination proxy; 1.0 leaves frames untouched.
    pub brightness_factor: f64,
    pub mask: MaskShape,
    pub source_tag: String,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            width: 640,
            height: 360,
            seed: 0,
            real: ClassCounts::new(300, 50, 30),
            r#virtual: ClassCounts::new(300, 50, 30),
            attack: ClassCounts::new(0, 0, 0),
            sensor_noise_sigma: 1.5,
            feather_px: 2.0,
            background_blur_sigma: 0.8,
            background_scale: 1.25,
            attack_blur_sigma: 0.0,
            brightness_factor: 1.0,
            mask: MaskShape::Ellipse,
            source_tag: "synthetic_zoomlike".into(),
        }
    }
}

impl CorpusConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

const STREAM_SCENE: u64 = 0x736365;
const STREAM_NOISE: u64 = 0x6e6f69;
const STREAM_BACKDROP: u64 = 0x626b67;
const STREAM_FOREGROUND: u64 = 0x666f72;
const STREAM_MASK: u64 = 0x6d736b;
const STREAM_PHASE: u64 = 0x706873;

fn mix(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the pair.
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Smooth scalar field in [0, 1]: bilinear value noise summed over octaves.
/// Cell sizes are absolute pixels, so content smoothness is a pixel-scale
/// property independent of the frame size it is rendered at.
fn value_noise(w: usize, h: usize, rng: &mut ChaCha8Rng, octaves: &[(usize, f64)]) -> Vec<f64> {
    let mut field = vec![0.0f64; w * h];
    let mut total_amp = 0.0;
    for &(cell, amp) in octaves {
        let cell = cell.max(2);
        let gw = w / cell + 2;
        let gh = h / cell + 2;
        let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random::<f64>()).collect();
        for y in 0..h {
            let fy = y as f64 / cell as f64;
            let y0 = fy as usize;
            let ty = fy - y0 as f64;
            for x in 0..w {
                let fx = x as f64 / cell as f64;
                let x0 = fx as usize;
                let tx = fx - x0 as f64;
                let l00 = lattice[y0 * gw + x0];
                let l01 = lattice[y0 * gw + x0 + 1];
                let l10 = lattice[(y0 + 1) * gw + x0];
                let l11 = lattice[(y0 + 1) * gw + x0 + 1];
                let v = (1.0 - ty) * ((1.0 - tx) * l00 + tx * l01)
                    + ty * ((1.0 - tx) * l10 + tx * l11);
                field[y * w + x] += amp * v;
            }
        }
        total_amp += amp;
    }
    for v in &mut field {
        *v /= total_amp;
    }
    field
}

const SCENE_OCTAVES: [(usize, f64); 4] = [(64, 1.0), (32, 0.4), (16, 0.15), (12, 0.05)];
const DETAIL_OCTAVES: [(usize, f64); 1] = [(20, 1.0)];

/// Clean procedural scene: correlated channels from a shared luminance
/// field, per-channel tint and faint detail, plus an illumination gradient.
fn gen_scene(width: u32, height: u32, seed: u64) -> Frame {
    let (w, h) = (width as usize, height as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, STREAM_SCENE));
    let luminance = value_noise(w, h, &mut rng, &SCENE_OCTAVES);

    let gx: f64 = rng.random_range(-0.15..0.15);
    let gy: f64 = rng.random_range(-0.15..0.15);
    let tint: [f64; 3] = [
        rng.random_range(0.78..1.0),
        rng.random_range(0.78..1.0),
        rng.random_range(0.78..1.0),
    ];
    let detail: Vec<Vec<f64>> = (0..3)
        .map(|_| value_noise(w, h, &mut rng, &DETAIL_OCTAVES))
        .collect();

    let mut samples = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let grad = gx * (x as f64 / w as f64 - 0.5) + gy * (y as f64 / h as f64 - 0.5);
            let l = (luminance[y * w + x] + grad).clamp(0.0, 1.0);
            for c in 0..3 {
                let v = 22.0 + (l * 0.92 + detail[c][y * w + x] * 0.08) * 205.0 * tint[c];
                samples.push(quantize(v));
            }
        }
    }
    Frame::new(width, height, samples).expect("non-zero dims")
}

fn add_sensor_noise(frame: &mut Frame, sigma: f64, seed: u64) {
    if sigma <= 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, STREAM_NOISE));
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for s in frame.samples_mut() {
        *s = quantize(*s as f64 + normal.sample(&mut rng));
    }
}

#[inline]
fn bilinear_sample(frame: &Frame, fx: f64, fy: f64, c: usize) -> f64 {
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    let x0 = fx.floor();
    let y0 = fy.floor();
    let tx = fx - x0;
    let ty = fy - y0;
    let xi = |d: i64| (x0 as i64 + d).clamp(0, w - 1) as usize;
    let yi = |d: i64| (y0 as i64 + d).clamp(0, h - 1) as usize;
    let at = |x: usize, y: usize| frame.samples()[(y * w as usize + x) * 3 + c] as f64;
    (1.0 - ty) * ((1.0 - tx) * at(xi(0), yi(0)) + tx * at(xi(1), yi(0)))
        + ty * ((1.0 - tx) * at(xi(0), yi(1)) + tx * at(xi(1), yi(1)))
}

fn bilinear_resize(frame: &Frame, out_w: u32, out_h: u32) -> Frame {
    let rx = frame.width() as f64 / out_w as f64;
    let ry = frame.height() as f64 / out_h as f64;
    let mut samples = vec![0u8; out_w as usize * out_h as usize * 3];
    for y in 0..out_h as usize {
        let fy = (y as f64 + 0.5) * ry - 0.5;
        for x in 0..out_w as usize {
            let fx = (x as f64 + 0.5) * rx - 0.5;
            for c in 0..3 {
                samples[(y * out_w as usize + x) * 3 + c] =
                    quantize(bilinear_sample(frame, fx, fy, c));
            }
        }
    }
    Frame::new(out_w, out_h, samples).expect("non-zero dims")
}

fn bilinear_shift(frame: &Frame, phase_x: f64, phase_y: f64) -> Frame {
    let mut samples = vec![0u8; frame.samples().len()];
    let w = frame.width() as usize;
    for y in 0..frame.height() as usize {
        for x in 0..w {
            for c in 0..3 {
                samples[(y * w + x) * 3 + c] =
                    quantize(bilinear_sample(frame, x as f64 + phase_x, y as f64 + phase_y, c));
            }
        }
    }
    Frame::new(frame.width(), frame.height(), samples).expect("non-zero dims")
}

fn gaussian_blur(frame: &Frame, sigma: f64) -> Frame {
    if sigma <= 0.0 {
        return frame.clone();
    }
    let radius = (2.5 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for d in -radius..=radius {
        kernel.push((-(d * d) as f64 / (2.0 * sigma * sigma)).exp());
    }
    let ksum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= ksum;
    }
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    // Horizontal pass in f64, then vertical.
    let mut tmp = vec![0.0f64; (w * h * 3) as usize];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3usize {
                let mut acc = 0.0;
                for (i, &k) in kernel.iter().enumerate() {
                    let sx = (x + i as i64 - radius).clamp(0, w - 1);
                    acc += k * frame.samples()[((y * w + sx) * 3) as usize + c] as f64;
                }
                tmp[((y * w + x) * 3) as usize + c] = acc;
            }
        }
    }
    let mut samples = vec![0u8; (w * h * 3) as usize];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3usize {
                let mut acc = 0.0;
                for (i, &k) in kernel.iter().enumerate() {
                    let sy = (y + i as i64 - radius).clamp(0, h - 1);
                    acc += k * tmp[((sy * w + x) * 3) as usize + c];
                }
                samples[((y * w + x) * 3) as usize + c] = quantize(acc);
            }
        }
    }
    Frame::new(frame.width(), frame.height(), samples).expect("non-zero dims")
}

/// Per-pixel foreground alpha in [0, 1].
fn build_alpha(cfg: &CorpusConfig, seed: u64) -> Result<Vec<f64>> {
    let (w, h) = (cfg.width as usize, cfg.height as usize);
    match &cfg.mask {
        MaskShape::Ellipse => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, STREAM_MASK));
            let cx = w as f64 * rng.random_range(0.42..0.58);
            let cy = h as f64 * rng.random_range(0.58..0.68);
            let a = w as f64 * rng.random_range(0.16..0.22);
            let b = h as f64 * rng.random_range(0.33..0.42);
            let feather = cfg.feather_px.max(0.0);
            let mut alpha = Vec::with_capacity(w * h);
            for y in 0..h {
                for x in 0..w {
                    let dx = (x as f64 - cx) / a;
                    let dy = (y as f64 - cy) / b;
                    let r = (dx * dx + dy * dy).sqrt();
                    // Approximate signed distance to the boundary in pixels.
                    let d = (1.0 - r) * a.min(b);
                    let v = if feather == 0.0 {
                        if d >= 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        (0.5 + d / (2.0 * feather)).clamp(0.0, 1.0)
                    };
                    alpha.push(v);
                }
            }
            Ok(alpha)
        }
        MaskShape::Matte { path } => {
            let matte = load_frame(path)?;
            if matte.width() != cfg.width || matte.height() != cfg.height {
                return Err(Error::invalid(format!(
                    "matte {} is {}x{}, expected {}x{}",
                    path,
                    matte.width(),
                    matte.height(),
                    cfg.width,
                    cfg.height
                )));
            }
            let luma = crate::frame::to_luma(&matte);
            Ok(luma.samples().iter().map(|&v| v as f64 / 255.0).collect())
        }
    }
}

fn composite(fg: &Frame, bg: &Frame, alpha: &[f64]) -> Frame {
    let w = fg.width() as usize;
    let mut samples = Vec::with_capacity(fg.samples().len());
    for (i, &a) in alpha.iter().enumerate() {
        let (x, y) = ((i % w) as u32, (i / w) as u32);
        let f = fg.pixel(x, y);
        let b = bg.pixel(x, y);
        for c in 0..3 {
            samples.push(quantize(a * f[c] as f64 + (1.0 - a) * b[c] as f64));
        }
    }
    Frame::new(fg.width(), fg.height(), samples).expect("non-zero dims")
}

fn finish(cfg: &CorpusConfig, frame: Frame) -> Frame {
    if cfg.brightness_factor < 1.0 {
        lighting_proxy(&frame, cfg.brightness_factor).expect("factor validated")
    } else {
        frame
    }
}

/// A captured frame of a real environment: scene plus uniform sensor noise.
pub fn gen_real_frame(cfg: &CorpusConfig, seed: u64) -> Frame {
    let mut frame = gen_scene(cfg.width, cfg.height, seed);
    add_sensor_noise(&mut frame, cfg.sensor_noise_sigma, seed);
    finish(cfg, frame)
}

/// A frame with a software-composited backdrop: noisy foreground over a
/// clean, upscaled, blurred background.
pub fn gen_virtual_frame(cfg: &CorpusConfig, seed: u64) -> Result<Frame> {
    let s = cfg.background_scale.max(1.0);
    let bw = ((cfg.width as f64 / s).round() as u32).max(2);
    let bh = ((cfg.height as f64 / s).round() as u32).max(2);
    let backdrop = gen_scene(bw, bh, mix(seed, STREAM_BACKDROP));
    let bg = gaussian_blur(
        &bilinear_resize(&backdrop, cfg.width, cfg.height),
        cfg.background_blur_sigma,
    );

    let mut fg = gen_scene(cfg.width, cfg.height, mix(seed, STREAM_FOREGROUND));
    add_sensor_noise(&mut fg, cfg.sensor_noise_sigma, mix(seed, STREAM_FOREGROUND));

    let alpha = build_alpha(cfg, seed)?;
    Ok(finish(cfg, composite(&fg, &bg, &alpha)))
}

/// The evasion case: the paired real frame's background (sensor noise
/// included) is replayed as the virtual backdrop, refit with a sub-pixel
/// bilinear resample and the configured attack blur.
pub fn gen_attack_frame(cfg: &CorpusConfig, seed: u64) -> Result<Frame> {
    let real = gen_real_frame(cfg, seed);
    // A small sub-pixel refit keeps the replayed capture statistically on
    // the real side while leaving a resampling footprint for aware training.
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, STREAM_PHASE));
    let phase_x: f64 = rng.random_range(0.04..0.10);
    let phase_y: f64 = rng.random_range(0.04..0.10);
    let bg = gaussian_blur(&bilinear_shift(&real, phase_x, phase_y), cfg.attack_blur_sigma);

    let mut fg = gen_scene(cfg.width, cfg.height, mix(seed, STREAM_FOREGROUND));
    add_sensor_noise(&mut fg, cfg.sensor_noise_sigma, mix(seed, STREAM_FOREGROUND));

    let alpha = build_alpha(cfg, seed)?;
    Ok(finish(cfg, composite(&fg, &bg, &alpha)))
}

/// Global illumination scaling: `v' = round(factor * v)`.
pub fn lighting_proxy(frame: &Frame, factor: f64) -> Result<Frame> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(Error::invalid(format!(
            "lighting factor {factor} outside (0, 1]"
        )));
    }
    let samples = frame
        .samples()
        .iter()
        .map(|&v| quantize(factor * v as f64))
        .collect();
    Frame::new(frame.width(), frame.height(), samples)
}

/// FNV-1a over dimensions and raw samples; the manifest dedup key.
pub fn content_hash(frame: &Frame) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(&frame.width().to_le_bytes());
    eat(&frame.height().to_le_bytes());
    eat(frame.samples());
    h
}

fn class_seed(master: u64, label: Label, index: usize) -> u64 {
    let class_id = match label {
        Label::Real => 1,
        Label::Virtual => 2,
        Label::AttackVirtual => 3,
    };
    mix(master, (class_id as u64) << 32 | index as u64)
}

fn split_assignment(count: ClassCounts, rng: &mut ChaCha8Rng) -> Vec<Split> {
    use rand::seq::SliceRandom;
    let total = count.total();
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(rng);
    let mut splits = vec![Split::Train; total];
    for (rank, &idx) in order.iter().enumerate() {
        splits[idx] = if rank < count.train {
            Split::Train
        } else if rank < count.train + count.val {
            Split::Val
        } else {
            Split::Test
        };
    }
    splits
}

/// Materializes the configured frames under `out_dir/frames/`, writes
/// `out_dir/manifest.jsonl`, and returns the entries. Stratified splits come
/// from a seeded shuffle per class.
pub fn build_manifest(cfg: &CorpusConfig, out_dir: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let out_dir = out_dir.as_ref();
    let frames_dir = out_dir.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;

    let mut jobs: Vec<(Label, usize, Split)> = Vec::new();
    for (label, counts) in [
        (Label::Real, cfg.real),
        (Label::Virtual, cfg.r#virtual),
        (Label::AttackVirtual, cfg.attack),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(class_seed(cfg.seed, label, usize::MAX));
        let splits = split_assignment(counts, &mut rng);
        for (idx, split) in splits.into_iter().enumerate() {
            jobs.push((label, idx, split));
        }
    }

    let entries: Vec<ManifestEntry> = jobs
        .par_iter()
        .map(|&(label, idx, split)| -> Result<ManifestEntry> {
            let seed = class_seed(cfg.seed, label, idx);
            let frame = match label {
                Label::Real => gen_real_frame(cfg, seed),
                Label::Virtual => gen_virtual_frame(cfg, seed)?,
                Label::AttackVirtual => gen_attack_frame(cfg, seed)?,
            };
            let name = format!("{}_{idx:05}.png", label.as_str());
            let path = frames_dir.join(&name);
            save_frame(&frame, &path, SaveFormat::Png)?;
            Ok(ManifestEntry {
                path: path.to_string_lossy().into_owned(),
                label,
                source_tag: cfg.source_tag.clone(),
                scenarios: Vec::new(),
                split,
                content_hash: format!("{:016x}", content_hash(&frame)),
            })
        })
        .collect::<Result<_>>()?;

    write_manifest(out_dir.join("manifest.jsonl"), &entries)?;
    Ok(entries)
}

/// Writes one JSON object per line.
pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for entry in entries {
        let line = serde_json::to_string(entry)
            .map_err(|e| Error::Runtime(format!("manifest serialization: {e}")))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Result of an [`ingest`] pass.
#[derive(Debug)]
pub struct IngestReport {
    /// Newly added entries.
    pub entries: Vec<ManifestEntry>,
    /// Paths skipped because their content hash was already present.
    pub duplicates: Vec<PathBuf>,
}

/// Scans a directory of PNG/JPEG frames and builds manifest entries with the
/// given label and source tag. Frames whose content hash already appears in
/// `existing` (or earlier in the scan) are reported as duplicates and
/// skipped.
pub fn ingest(
    dir: impl AsRef<Path>,
    label: Label,
    source_tag: &str,
    split: Split,
    existing: &[ManifestEntry],
) -> Result<IngestReport> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|r| r.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase),
                Some(ref e) if e == "png" || e == "jpg" || e == "jpeg"
            )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid(format!(
            "no PNG/JPEG frames found in {}",
            dir.display()
        )));
    }
    let mut seen: HashSet<String> = existing.iter().map(|e| e.content_hash.clone()).collect();
    let mut entries = Vec::new();
    let mut duplicates = Vec::new();
    for path in paths {
        let frame = load_frame(&path)?;
        let hash = format!("{:016x}", content_hash(&frame));
        if !seen.insert(hash.clone()) {
            duplicates.push(path);
            continue;
        }
        entries.push(ManifestEntry {
            path: path.to_string_lossy().into_owned(),
            label,
            source_tag: source_tag.to_string(),
            scenarios: Vec::new(),
            split,
            content_hash: hash,
        });
    }
    Ok(IngestReport {
        entries,
        duplicates,
    })
}
