//! Contrast-limited adaptive histogram equalization on the luma channel.
//!
//! An 8x8 tile grid is equalized per tile with the histogram clipped at
//! `clip_limit` times the uniform bin mass, the clipped excess redistributed
//! equally over all bins, and per-pixel lookup values blended bilinearly
//! between the four surrounding tile mappings. A tile whose pixels all share
//! one value keeps the identity mapping, so zero-contrast regions (and
//! constant frames) pass through unchanged. Chroma offsets against the
//! original luma are preserved and re-clamped.

use crate::error::{Error, Result};
use crate::frame::{quantize, to_luma, Frame};

const GRID: usize = 8;

/// Per-tile mapping from input luma to equalized luma.
struct TileLut {
    lut: [f64; 256],
}

fn tile_lut(hist: &[u64; 256], area: u64, clip_limit: f64) -> TileLut {
    let mut lut = [0.0f64; 256];
    let occupied = hist.iter().filter(|&&c| c > 0).count();
    if occupied <= 1 || area == 0 {
        for (i, v) in lut.iter_mut().enumerate() {
            *v = i as f64;
        }
        return TileLut { lut };
    }
    // Clip and redistribute the excess uniformly.
    let cap = (clip_limit * area as f64 / 256.0).max(1.0);
    let mut h = [0.0f64; 256];
    let mut excess = 0.0;
    for (i, &c) in hist.iter().enumerate() {
        let c = c as f64;
        if c > cap {
            excess += c - cap;
            h[i] = cap;
        } else {
            h[i] = c;
        }
    }
    let share = excess / 256.0;
    for v in h.iter_mut() {
        *v += share;
    }
    // Mid-bin cumulative mapping: a flat histogram maps every value to
    // itself.
    let total = area as f64;
    let mut cum = 0.0;
    for i in 0..256 {
        lut[i] = (cum + h[i] / 2.0) * 255.0 / total;
        cum += h[i];
    }
    TileLut { lut }
}

/// Applies CLAHE to the frame's luma and re-attaches the chroma offsets.
pub fn clahe(frame: &Frame, clip_limit: f64) -> Result<Frame> {
    if !(clip_limit > 0.0) || !clip_limit.is_finite() {
        return Err(Error::invalid(format!(
            "clip limit {clip_limit} must be > 0"
        )));
    }
    let luma = to_luma(frame);
    let (w, h) = (frame.width() as usize, frame.height() as usize);

    // Tile boundaries and centers. Small frames collapse to fewer tiles.
    let gx = GRID.min(w);
    let gy = GRID.min(h);
    let bx: Vec<usize> = (0..=gx).map(|i| i * w / gx).collect();
    let by: Vec<usize> = (0..=gy).map(|i| i * h / gy).collect();
    let cx: Vec<f64> = (0..gx).map(|i| (bx[i] + bx[i + 1]) as f64 / 2.0 - 0.5).collect();
    let cy: Vec<f64> = (0..gy).map(|i| (by[i] + by[i + 1]) as f64 / 2.0 - 0.5).collect();

    let mut luts = Vec::with_capacity(gx * gy);
    for ty in 0..gy {
        for tx in 0..gx {
            let mut hist = [0u64; 256];
            for y in by[ty]..by[ty + 1] {
                for x in bx[tx]..bx[tx + 1] {
                    hist[luma.value(x as u32, y as u32) as usize] += 1;
                }
            }
            let area = ((bx[tx + 1] - bx[tx]) * (by[ty + 1] - by[ty])) as u64;
            luts.push(tile_lut(&hist, area, clip_limit));
        }
    }

    // Fractional tile coordinate with clamped extrapolation at the borders.
    let locate = |p: f64, centers: &[f64]| -> (usize, usize, f64) {
        if p <= centers[0] {
            return (0, 0, 0.0);
        }
        if p >= centers[centers.len() - 1] {
            let last = centers.len() - 1;
            return (last, last, 0.0);
        }
        let mut i = 0;
        while centers[i + 1] < p {
            i += 1;
        }
        (i, i + 1, (p - centers[i]) / (centers[i + 1] - centers[i]))
    };

    let mut out = frame.clone();
    for y in 0..h {
        let (ty0, ty1, wy) = locate(y as f64, &cy);
        for x in 0..w {
            let (tx0, tx1, wx) = locate(x as f64, &cx);
            let v = luma.value(x as u32, y as u32) as usize;
            let l00 = luts[ty0 * gx + tx0].lut[v];
            let l01 = luts[ty0 * gx + tx1].lut[v];
            let l10 = luts[ty1 * gx + tx0].lut[v];
            let l11 = luts[ty1 * gx + tx1].lut[v];
            let blended = (1.0 - wy) * ((1.0 - wx) * l00 + wx * l01)
                + wy * ((1.0 - wx) * l10 + wx * l11);
            let dy = quantize(blended) as i32 - v as i32;
            if dy != 0 {
                let px = frame.pixel(x as u32, y as u32);
                out.set_pixel(
                    x as u32,
                    y as u32,
                    [
                        (px[0] as i32 + dy).clamp(0, 255) as u8,
                        (px[1] as i32 + dy).clamp(0, 255) as u8,
                        (px[2] as i32 + dy).clamp(0, 255) as u8,
                    ],
                );
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn luma_std(frame: &Frame) -> f64 {
        let l = to_luma(frame);
        let n = l.samples().len() as f64;
        let mean = l.samples().iter().map(|&v| v as f64).sum::<f64>() / n;
        (l.samples()
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    }

    #[test]
    fn constant_frame_is_unchanged() {
        for v in [0u8, 67, 128, 255] {
            let f = Frame::filled(64, 48, [v, v, v]);
            assert_eq!(clahe(&f, 2.0).unwrap(), f);
            assert_eq!(clahe(&f, 4.0).unwrap(), f);
        }
    }

    #[test]
    fn low_contrast_ramp_gains_contrast() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (w, h) = (96u32, 64u32);
        let mut samples = Vec::new();
        for _y in 0..h {
            for x in 0..w {
                let v = 110 + (x * 36 / w) as u8 + rng.random_range(0..2);
                samples.extend_from_slice(&[v, v, v]);
            }
        }
        let f = Frame::new(w, h, samples).unwrap();
        let before = luma_std(&f);
        for clip in [2.0, 4.0] {
            let after = luma_std(&clahe(&f, clip).unwrap());
            assert!(after > before, "std {before} -> {after} at clip {clip}");
        }
    }

    #[test]
    fn output_stays_in_range_on_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<u8> = (0..64 * 64 * 3).map(|_| rng.random()).collect();
        let f = Frame::new(64, 64, samples).unwrap();
        let g = clahe(&f, 4.0).unwrap();
        assert_eq!((g.width(), g.height()), (64, 64));
        // u8 storage already bounds the range; check determinism instead.
        assert_eq!(g, clahe(&f, 4.0).unwrap());
    }

    #[test]
    fn rejects_non_positive_clip() {
        let f = Frame::filled(16, 16, [1, 2, 3]);
        assert!(clahe(&f, 0.0).is_err());
        assert!(clahe(&f, -1.0).is_err());
    }
}
