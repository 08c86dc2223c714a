//! Bicubic geometric operations: resize, zoom-and-crop, rotation.
//!
//! All sampling uses the Catmull-Rom cubic kernel (a = -0.5) with
//! edge-replicate handling for taps outside the source.

use crate::error::{Error, Result};
use crate::frame::{quantize, Frame};

/// Catmull-Rom weight for a tap at distance `t >= 0`.
#[inline]
fn cubic_weight(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        A * (t * t * t - 5.0 * t * t + 8.0 * t - 4.0)
    } else {
        0.0
    }
}

/// Samples one channel of `src` at fractional coordinates with bicubic
/// interpolation, replicating edge pixels.
fn sample_bicubic(src: &Frame, sx: f64, sy: f64, channel: usize) -> f64 {
    let ix = sx.floor();
    let iy = sy.floor();
    let tx = sx - ix;
    let ty = sy - iy;
    let wx = [
        cubic_weight(1.0 + tx),
        cubic_weight(tx),
        cubic_weight(1.0 - tx),
        cubic_weight(2.0 - tx),
    ];
    let wy = [
        cubic_weight(1.0 + ty),
        cubic_weight(ty),
        cubic_weight(1.0 - ty),
        cubic_weight(2.0 - ty),
    ];
    let w = src.width() as i64;
    let h = src.height() as i64;
    let samples = src.samples();
    let mut acc = 0.0;
    for (j, &wyj) in wy.iter().enumerate() {
        let y = (iy as i64 + j as i64 - 1).clamp(0, h - 1) as usize;
        let mut row = 0.0;
        for (i, &wxi) in wx.iter().enumerate() {
            let x = (ix as i64 + i as i64 - 1).clamp(0, w - 1) as usize;
            row += wxi * samples[(y * w as usize + x) * 3 + channel] as f64;
        }
        acc += wyj * row;
    }
    acc
}

fn resample_to(src: &Frame, out_w: u32, out_h: u32) -> Frame {
    let sx_ratio = src.width() as f64 / out_w as f64;
    let sy_ratio = src.height() as f64 / out_h as f64;
    let mut samples = vec![0u8; out_w as usize * out_h as usize * 3];
    for y in 0..out_h {
        let sy = (y as f64 + 0.5) * sy_ratio - 0.5;
        for x in 0..out_w {
            let sx = (x as f64 + 0.5) * sx_ratio - 0.5;
            let base = (y as usize * out_w as usize + x as usize) * 3;
            for c in 0..3 {
                samples[base + c] = quantize(sample_bicubic(src, sx, sy, c));
            }
        }
    }
    Frame::new(out_w, out_h, samples).expect("non-zero dims")
}

/// Bicubic rescale by `scale`; output dimensions are `round(scale * dims)`.
pub fn resize(frame: &Frame, scale: f64) -> Result<Frame> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::invalid(format!("resize scale {scale} must be > 0")));
    }
    let out_w = (scale * frame.width() as f64).round() as i64;
    let out_h = (scale * frame.height() as f64).round() as i64;
    if out_w < 16 || out_h < 16 {
        return Err(Error::invalid(format!(
            "resize output {out_w}x{out_h} below the 16-pixel minimum"
        )));
    }
    if out_w == frame.width() as i64 && out_h == frame.height() as i64 && scale == 1.0 {
        return Ok(frame.clone());
    }
    Ok(resample_to(frame, out_w as u32, out_h as u32))
}

/// Bicubic upscale by `factor`, then center-crop back to the original
/// dimensions.
pub fn zoom(frame: &Frame, factor: f64) -> Result<Frame> {
    if !(factor > 1.0) || !factor.is_finite() {
        return Err(Error::invalid(format!("zoom factor {factor} must be > 1")));
    }
    let zw = (factor * frame.width() as f64).round() as u32;
    let zh = (factor * frame.height() as f64).round() as u32;
    let big = resample_to(frame, zw.max(frame.width()), zh.max(frame.height()));
    let ox = (big.width() - frame.width()) / 2;
    let oy = (big.height() - frame.height()) / 2;
    let mut samples = Vec::with_capacity(frame.samples().len());
    for y in 0..frame.height() {
        for x in 0..frame.width() {
            samples.extend_from_slice(&big.pixel(x + ox, y + oy));
        }
    }
    Frame::new(frame.width(), frame.height(), samples)
}

/// Rotation about the image center with bicubic sampling; samples falling
/// outside the source take edge-replicate values. Dimensions are unchanged.
pub fn rotate(frame: &Frame, degrees: f64) -> Result<Frame> {
    if !degrees.is_finite() || degrees.abs() >= 45.0 {
        return Err(Error::invalid(format!(
            "rotation {degrees} outside (-45, 45) degrees"
        )));
    }
    if degrees == 0.0 {
        return Ok(frame.clone());
    }
    let theta = degrees.to_radians();
    let (cos_t, sin_t) = (theta.cos(), theta.sin());
    let cx = (frame.width() as f64 - 1.0) / 2.0;
    let cy = (frame.height() as f64 - 1.0) / 2.0;
    let mut samples = vec![0u8; frame.samples().len()];
    for y in 0..frame.height() {
        let ry = y as f64 - cy;
        for x in 0..frame.width() {
            let rx = x as f64 - cx;
            // Inverse map: rotate the output position back into the source.
            let sx = cos_t * rx + sin_t * ry + cx;
            let sy = -sin_t * rx + cos_t * ry + cy;
            let base = (y as usize * frame.width() as usize + x as usize) * 3;
            for c in 0..3 {
                samples[base + c] = quantize(sample_bicubic(frame, sx, sy, c));
            }
        }
    }
    Frame::new(frame.width(), frame.height(), samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth_frame(w: u32, h: u32) -> Frame {
        let mut samples = Vec::with_capacity(w as usize * h as usize * 3);
        for y in 0..h {
            for x in 0..w {
                let a = 128.0 + 60.0 * (x as f64 / 17.0).sin() * (y as f64 / 23.0).cos();
                let b = 100.0 + 0.2 * x as f64 + 0.1 * y as f64;
                let c = 140.0 + 50.0 * ((x + y) as f64 / 31.0).sin();
                samples.push(quantize(a));
                samples.push(quantize(b));
                samples.push(quantize(c));
            }
        }
        Frame::new(w, h, samples).unwrap()
    }

    #[test]
    fn resize_scale_one_is_identity() {
        let f = smooth_frame(40, 30);
        assert_eq!(resize(&f, 1.0).unwrap(), f);
    }

    #[test]
    fn resize_dims_follow_rounding() {
        let f = smooth_frame(64, 36);
        let r = resize(&f, 0.5).unwrap();
        assert_eq!((r.width(), r.height()), (32, 18));
        assert!(resize(&f, 0.1).is_err());
        assert!(resize(&f, 0.0).is_err());
    }

    #[test]
    fn resize_preserves_constant_frames() {
        let f = Frame::filled(40, 40, [90, 120, 200]);
        for scale in [0.5, 0.8, 1.3] {
            let r = resize(&f, scale).unwrap();
            assert!(r.samples().chunks_exact(3).all(|p| p == [90, 120, 200]));
        }
    }

    #[test]
    fn zoom_keeps_dims_and_constants() {
        let f = Frame::filled(48, 32, [7, 8, 9]);
        let z = zoom(&f, 1.4).unwrap();
        assert_eq!((z.width(), z.height()), (48, 32));
        assert!(z.samples().chunks_exact(3).all(|p| p == [7, 8, 9]));
        assert!(zoom(&f, 1.0).is_err());
    }

    #[test]
    fn zoom_grows_a_centered_square_quadratically() {
        let mut f = Frame::filled(120, 120, [0, 0, 0]);
        for y in 45..75 {
            for x in 45..75 {
                f.set_pixel(x, y, [255, 255, 255]);
            }
        }
        let z = zoom(&f, 1.4).unwrap();
        let count = |fr: &Frame| {
            fr.samples()
                .chunks_exact(3)
                .filter(|p| p[0] > 127)
                .count() as f64
        };
        let ratio = count(&z) / count(&f);
        assert!((ratio - 1.96).abs() < 1.96 * 0.05, "area ratio {ratio}");
    }

    #[test]
    fn rotate_zero_is_identity_and_constants_survive() {
        let f = smooth_frame(33, 21);
        assert_eq!(rotate(&f, 0.0).unwrap(), f);
        let c = Frame::filled(24, 24, [55, 66, 77]);
        let r = rotate(&c, 10.0).unwrap();
        assert!(r.samples().chunks_exact(3).all(|p| p == [55, 66, 77]));
        assert!(rotate(&f, 45.0).is_err());
    }

    #[test]
    fn rotate_round_trip_is_nearly_identity_in_interior() {
        let f = smooth_frame(80, 60);
        let back = rotate(&rotate(&f, 5.0).unwrap(), -5.0).unwrap();
        let (w, h) = (80usize, 60usize);
        let (mx, my) = (w / 10, h / 10);
        let mut err = 0.0;
        let mut n = 0usize;
        for y in my..h - my {
            for x in mx..w - mx {
                let a = f.pixel(x as u32, y as u32);
                let b = back.pixel(x as u32, y as u32);
                for c in 0..3 {
                    err += (a[c] as f64 - b[c] as f64).abs();
                    n += 1;
                }
            }
        }
        let mae = err / n as f64;
        assert!(mae < 3.0, "interior round-trip error {mae}");
    }
}
