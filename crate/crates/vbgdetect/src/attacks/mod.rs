//! Post-processing / laundering operations used to stress the detector,
//! plus the declarative [`Attack`] / [`AttackChain`] forms the harness and
//! CLI consume.
//!
//! Every operation is a pure function of the frame and its parameters
//! (noise includes an explicit seed), preserves the 8-bit sample range, and
//! keeps frame dimensions except for `resize`.

mod clahe;
mod geom;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{jpeg_cycle, quantize, Frame};

pub use clahe::clahe;
pub use geom::{resize, rotate, zoom};

/// One post-processing operation with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Attack {
    Median { k: u32 },
    AvgBlur { k: u32 },
    Gamma { gamma: f64 },
    Clahe { clip_limit: f64 },
    GaussNoise { sigma: f64, seed: u64 },
    Resize { scale: f64 },
    Zoom { factor: f64 },
    Rotate { degrees: f64 },
    Sharpen,
    Jpeg { qf: u8 },
}

/// A non-empty sequence of attacks applied left to right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttackChain(Vec<Attack>);

impl AttackChain {
    pub fn new(attacks: Vec<Attack>) -> Result<Self> {
        if attacks.is_empty() {
            return Err(Error::invalid("attack chain must not be empty"));
        }
        Ok(AttackChain(attacks))
    }

    pub fn single(attack: Attack) -> Self {
        AttackChain(vec![attack])
    }

    pub fn attacks(&self) -> &[Attack] {
        &self.0
    }
}

fn window_dims(frame: &Frame, k: u32) -> Result<()> {
    if k % 2 == 0 || k == 0 {
        return Err(Error::invalid(format!("window size {k} must be odd")));
    }
    if k > frame.width().min(frame.height()) {
        return Err(Error::invalid(format!(
            "window {k} exceeds frame {}x{}",
            frame.width(),
            frame.height()
        )));
    }
    Ok(())
}

/// Per-channel k x k median with edge-replicate padding.
pub fn median_filter(frame: &Frame, k: u32) -> Result<Frame> {
    window_dims(frame, k)?;
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    let r = (k / 2) as i64;
    let mid = (k * k / 2) as usize;
    let mut out = vec![0u8; frame.samples().len()];
    let mut window = Vec::with_capacity((k * k) as usize);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                window.clear();
                for dy in -r..=r {
                    let sy = (y + dy).clamp(0, h - 1) as usize;
                    for dx in -r..=r {
                        let sx = (x + dx).clamp(0, w - 1) as usize;
                        window.push(frame.samples()[(sy * w as usize + sx) * 3 + c]);
                    }
                }
                let (_, m, _) = window.select_nth_unstable(mid);
                out[(y as usize * w as usize + x as usize) * 3 + c] = *m;
            }
        }
    }
    Frame::new(frame.width(), frame.height(), out)
}

/// Per-channel k x k box mean with edge-replicate padding.
pub fn average_blur(frame: &Frame, k: u32) -> Result<Frame> {
    window_dims(frame, k)?;
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    let r = (k / 2) as i64;
    let area = (k * k) as f64;
    let mut out = vec![0u8; frame.samples().len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for dy in -r..=r {
                let sy = (y + dy).clamp(0, h - 1) as usize;
                for dx in -r..=r {
                    let sx = (x + dx).clamp(0, w - 1) as usize;
                    let px = &frame.samples()[(sy * w as usize + sx) * 3..][..3];
                    for c in 0..3 {
                        acc[c] += px[c] as f64;
                    }
                }
            }
            let base = (y as usize * w as usize + x as usize) * 3;
            for c in 0..3 {
                out[base + c] = quantize(acc[c] / area);
            }
        }
    }
    Frame::new(frame.width(), frame.height(), out)
}

/// Per-channel gamma correction `v' = round(255 (v/255)^gamma)`.
pub fn gamma_correct(frame: &Frame, gamma: f64) -> Result<Frame> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!("gamma {gamma} must be > 0")));
    }
    let mut lut = [0u8; 256];
    for (v, out) in lut.iter_mut().enumerate() {
        *out = quantize(255.0 * (v as f64 / 255.0).powf(gamma));
    }
    let mut samples = frame.samples().to_vec();
    for s in &mut samples {
        *s = lut[*s as usize];
    }
    Frame::new(frame.width(), frame.height(), samples)
}

/// Adds i.i.d. zero-mean Gaussian noise per sample from a seeded generator.
pub fn gaussian_noise(frame: &Frame, sigma: f64, seed: u64) -> Result<Frame> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("noise sigma {sigma} must be >= 0")));
    }
    if sigma == 0.0 {
        return Ok(frame.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let samples = frame
        .samples()
        .iter()
        .map(|&v| quantize(v as f64 + normal.sample(&mut rng)))
        .collect();
    Frame::new(frame.width(), frame.height(), samples)
}

/// Unsharp masking with amount 1.0 over a fixed 3x3 Gaussian (sigma = 1).
pub fn sharpen(frame: &Frame) -> Result<Frame> {
    // exp(0), exp(-1/2), exp(-1) taps, normalized.
    const C: f64 = 1.0;
    const E: f64 = 0.606_530_659_712_633_4;
    const D: f64 = 0.367_879_441_171_442_33;
    let kernel = [D, E, D, E, C, E, D, E, D];
    let ksum: f64 = kernel.iter().sum();

    let (w, h) = (frame.width() as i64, frame.height() as i64);
    let mut out = vec![0u8; frame.samples().len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut blur = 0.0;
                for dy in -1i64..=1 {
                    let sy = (y + dy).clamp(0, h - 1) as usize;
                    for dx in -1i64..=1 {
                        let sx = (x + dx).clamp(0, w - 1) as usize;
                        let k = kernel[((dy + 1) * 3 + dx + 1) as usize];
                        blur += k * frame.samples()[(sy * w as usize + sx) * 3 + c] as f64;
                    }
                }
                blur /= ksum;
                let v = frame.samples()[(y as usize * w as usize + x as usize) * 3 + c] as f64;
                out[(y as usize * w as usize + x as usize) * 3 + c] =
                    quantize(v + (v - blur));
            }
        }
    }
    Frame::new(frame.width(), frame.height(), out)
}

/// Applies one attack.
pub fn apply(frame: &Frame, attack: &Attack) -> Result<Frame> {
    match *attack {
        Attack::Median { k } => median_filter(frame, k),
        Attack::AvgBlur { k } => average_blur(frame, k),
        Attack::Gamma { gamma } => gamma_correct(frame, gamma),
        Attack::Clahe { clip_limit } => clahe(frame, clip_limit),
        Attack::GaussNoise { sigma, seed } => gaussian_noise(frame, sigma, seed),
        Attack::Resize { scale } => resize(frame, scale),
        Attack::Zoom { factor } => zoom(frame, factor),
        Attack::Rotate { degrees } => rotate(frame, degrees),
        Attack::Sharpen => sharpen(frame),
        Attack::Jpeg { qf } => jpeg_cycle(frame, qf),
    }
}

/// Applies a chain left to right. The `jpeg` step is an encode at the given
/// quality factor followed by a decode.
pub fn apply_chain(frame: &Frame, chain: &AttackChain) -> Result<Frame> {
    let mut out = frame.clone();
    for attack in chain.attacks() {
        out = apply(&out, attack)?;
    }
    Ok(out)
}

impl fmt::Display for Attack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Attack::Median { k } => write!(f, "median:{k}"),
            Attack::AvgBlur { k } => write!(f, "avg_blur:{k}"),
            Attack::Gamma { gamma } => write!(f, "gamma:{gamma}"),
            Attack::Clahe { clip_limit } => write!(f, "clahe:{clip_limit}"),
            Attack::GaussNoise { sigma, seed } => write!(f, "gauss_noise:{sigma}:{seed}"),
            Attack::Resize { scale } => write!(f, "resize:{scale}"),
            Attack::Zoom { factor } => write!(f, "zoom:{factor}"),
            Attack::Rotate { degrees } => write!(f, "rotate:{degrees}"),
            Attack::Sharpen => write!(f, "sharpen"),
            Attack::Jpeg { qf } => write!(f, "jpeg:{qf}"),
        }
    }
}

impl fmt::Display for AttackChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "+")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl FromStr for Attack {
    type Err = Error;

    /// Compact form `op[:param[:param]]`, e.g. `median:3`,
    /// `gauss_noise:2:42`, `sharpen`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let op = parts.next().unwrap_or_default();
        let mut args = parts;
        let mut next_arg = |what: &str| {
            args.next()
                .ok_or_else(|| Error::invalid(format!("{op}: missing {what}")))
        };
        let attack = match op {
            "median" => Attack::Median {
                k: parse_num(next_arg("window size")?)?,
            },
            "avg_blur" => Attack::AvgBlur {
                k: parse_num(next_arg("window size")?)?,
            },
            "gamma" => Attack::Gamma {
                gamma: parse_num(next_arg("gamma")?)?,
            },
            "clahe" => Attack::Clahe {
                clip_limit: parse_num(next_arg("clip limit")?)?,
            },
            "gauss_noise" => {
                let sigma = parse_num(next_arg("sigma")?)?;
                let seed = match args.next() {
                    Some(s) => parse_num(s)?,
                    None => 0,
                };
                Attack::GaussNoise { sigma, seed }
            }
            "resize" => Attack::Resize {
                scale: parse_num(next_arg("scale")?)?,
            },
            "zoom" => Attack::Zoom {
                factor: parse_num(next_arg("factor")?)?,
            },
            "rotate" => Attack::Rotate {
                degrees: parse_num(next_arg("degrees")?)?,
            },
            "sharpen" => Attack::Sharpen,
            "jpeg" => Attack::Jpeg {
                qf: parse_num(next_arg("quality factor")?)?,
            },
            other => return Err(Error::invalid(format!("unknown attack op '{other}'"))),
        };
        if let Some(extra) = args.next() {
            return Err(Error::invalid(format!("{op}: unexpected argument '{extra}'")));
        }
        Ok(attack)
    }
}

impl FromStr for AttackChain {
    type Err = Error;

    /// Compact form with `+` separators, e.g. `median:3+jpeg:80`.
    fn from_str(s: &str) -> Result<Self> {
        let attacks = s
            .split('+')
            .map(|p| p.trim().parse())
            .collect::<Result<Vec<_>>>()?;
        AttackChain::new(attacks)
    }
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    s.parse()
        .map_err(|e| Error::invalid(format!("bad number '{s}': {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn noise_frame(w: u32, h: u32, seed: u64) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..w as usize * h as usize * 3).map(|_| rng.random()).collect();
        Frame::new(w, h, samples).unwrap()
    }

    #[test]
    fn median_removes_impulse_and_keeps_constants() {
        let c = Frame::filled(9, 9, [40, 50, 60]);
        assert_eq!(median_filter(&c, 3).unwrap(), c);
        let mut f = Frame::filled(9, 9, [10, 10, 10]);
        f.set_pixel(4, 4, [250, 250, 250]);
        let m = median_filter(&f, 3).unwrap();
        assert_eq!(m.pixel(4, 4), [10, 10, 10]);
    }

    #[test]
    fn median_matches_window_sort_oracle() {
        let f = noise_frame(8, 8, 5);
        let m = median_filter(&f, 3).unwrap();
        for y in 0..8i64 {
            for x in 0..8i64 {
                for c in 0..3 {
                    let mut vals = Vec::new();
                    for dy in -1..=1i64 {
                        for dx in -1..=1i64 {
                            let sx = (x + dx).clamp(0, 7) as u32;
                            let sy = (y + dy).clamp(0, 7) as u32;
                            vals.push(f.pixel(sx, sy)[c]);
                        }
                    }
                    vals.sort_unstable();
                    assert_eq!(m.pixel(x as u32, y as u32)[c], vals[4]);
                }
            }
        }
    }

    #[test]
    fn blur_checkerboard_interior_values() {
        let mut f = Frame::filled(10, 10, [0, 0, 0]);
        for y in 0..10 {
            for x in 0..10 {
                if (x + y) % 2 == 0 {
                    f.set_pixel(x, y, [255, 255, 255]);
                }
            }
        }
        let b = average_blur(&f, 3).unwrap();
        for y in 1..9u32 {
            for x in 1..9u32 {
                let v = b.pixel(x, y)[0];
                // 4/9 or 5/9 of 255, rounded.
                assert!(v == 113 || v == 142, "interior value {v}");
            }
        }
    }

    #[test]
    fn blur_matches_sliding_mean_oracle() {
        let f = noise_frame(8, 8, 6);
        let b = average_blur(&f, 3).unwrap();
        for y in 0..8i64 {
            for x in 0..8i64 {
                for c in 0..3 {
                    let mut sum = 0.0;
                    for dy in -1..=1i64 {
                        for dx in -1..=1i64 {
                            let sx = (x + dx).clamp(0, 7) as u32;
                            let sy = (y + dy).clamp(0, 7) as u32;
                            sum += f.pixel(sx, sy)[c] as f64;
                        }
                    }
                    assert_eq!(b.pixel(x as u32, y as u32)[c], quantize(sum / 9.0));
                }
            }
        }
    }

    #[test]
    fn window_validation() {
        let f = noise_frame(8, 8, 1);
        assert!(median_filter(&f, 2).is_err());
        assert!(median_filter(&f, 9).is_err());
        assert!(average_blur(&f, 4).is_err());
    }

    #[test]
    fn gamma_identity_and_fixed_points() {
        let f = noise_frame(16, 16, 9);
        assert_eq!(gamma_correct(&f, 1.0).unwrap(), f);
        for gamma in [0.6, 0.9, 1.3] {
            let g = gamma_correct(&Frame::filled(4, 4, [255, 0, 128]), gamma).unwrap();
            let px = g.pixel(0, 0);
            assert_eq!(px[0], 255);
            assert_eq!(px[1], 0);
        }
        // round(255 * (128/255)^0.9) = 137
        let g = gamma_correct(&Frame::filled(2, 2, [128, 128, 128]), 0.9).unwrap();
        assert_eq!(g.pixel(0, 0), [137, 137, 137]);
        assert!(gamma_correct(&f, 0.0).is_err());
    }

    #[test]
    fn noise_is_seeded_and_sigma_zero_is_identity() {
        let f = noise_frame(16, 16, 2);
        assert_eq!(gaussian_noise(&f, 0.0, 1).unwrap(), f);
        let a = gaussian_noise(&f, 2.0, 7).unwrap();
        let b = gaussian_noise(&f, 2.0, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gaussian_noise(&f, 2.0, 8).unwrap());
    }

    #[test]
    fn noise_moments_match_sigma() {
        let f = Frame::filled(256, 256, [128, 128, 128]);
        let n = gaussian_noise(&f, 2.0, 42).unwrap();
        let diffs: Vec<f64> = n
            .samples()
            .iter()
            .zip(f.samples())
            .map(|(&a, &b)| a as f64 - b as f64)
            .collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
            / diffs.len() as f64;
        let std = var.sqrt();
        assert!((1.9..=2.1).contains(&std), "sample std {std}");
    }

    #[test]
    fn sharpen_overshoots_at_edges_and_keeps_constants() {
        let c = Frame::filled(12, 12, [99, 99, 99]);
        assert_eq!(sharpen(&c).unwrap(), c);
        // Vertical step edge 60 | 180.
        let mut f = Frame::filled(12, 12, [60, 60, 60]);
        for y in 0..12 {
            for x in 6..12 {
                f.set_pixel(x, y, [180, 180, 180]);
            }
        }
        let s = sharpen(&f).unwrap();
        let max = s.samples().iter().copied().max().unwrap();
        assert!(max > 180, "expected overshoot, max {max}");
        let min = s.samples().iter().copied().min().unwrap();
        assert!(min < 60, "expected undershoot, min {min}");
    }

    #[test]
    fn chain_identity_and_determinism() {
        let f = noise_frame(20, 20, 33);
        let identity: AttackChain = "gamma:1".parse().unwrap();
        assert_eq!(apply_chain(&f, &identity).unwrap(), f);

        let c = Frame::filled(16, 16, [77, 88, 99]);
        let blur_sharpen: AttackChain = "avg_blur:3+sharpen".parse().unwrap();
        assert_eq!(apply_chain(&c, &blur_sharpen).unwrap(), c);

        let chain: AttackChain = "median:3+jpeg:80".parse().unwrap();
        let a = apply_chain(&f, &chain).unwrap();
        let b = apply_chain(&f, &chain).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chain_string_and_json_round_trips() {
        let chain: AttackChain = "median:3+gauss_noise:2:42+jpeg:80".parse().unwrap();
        assert_eq!(chain.to_string(), "median:3+gauss_noise:2:42+jpeg:80");
        let json = serde_json::to_string(&chain).unwrap();
        assert_eq!(
            json,
            r#"[{"op":"median","k":3},{"op":"gauss_noise","sigma":2.0,"seed":42},{"op":"jpeg","qf":80}]"#
        );
        let back: AttackChain = serde_json::from_str(&json).unwrap();
        assert_eq!(back, chain);
        assert!("".parse::<AttackChain>().is_err());
        assert!("warp:1".parse::<AttackChain>().is_err());
        assert!("median".parse::<AttackChain>().is_err());
    }

    #[test]
    fn attacks_preserve_range_and_dims() {
        let f = noise_frame(24, 18, 4);
        let cases: Vec<Attack> = vec![
            "median:3".parse().unwrap(),
            "avg_blur:5".parse().unwrap(),
            "gamma:0.6".parse().unwrap(),
            "clahe:2".parse().unwrap(),
            "gauss_noise:2:9".parse().unwrap(),
            "zoom:1.4".parse().unwrap(),
            "rotate:5".parse().unwrap(),
            "sharpen".parse().unwrap(),
            "jpeg:80".parse().unwrap(),
        ];
        for attack in &cases {
            let g = apply(&f, attack).unwrap();
            assert_eq!((g.width(), g.height()), (24, 18), "{attack}");
        }
    }
}
