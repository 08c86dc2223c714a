//! Six-band co-occurrence tensor: three spatial per-channel planes at
//! displacement (1, 1) plus three cross-band planes at displacement (0, 0),
//! in the fixed order `[R, G, B, RG, RB, GB]`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{split_channels, ChannelPlane, Frame};

/// Number of planes in the tensor.
pub const PLANE_COUNT: usize = 6;

/// Plane labels in tensor order.
pub const PLANE_NAMES: [&str; PLANE_COUNT] = ["R", "G", "B", "RG", "RB", "GB"];

const MAGIC: &[u8; 4] = b"CMT6";

/// Whether a plane pairs a channel with itself at a spatial offset or two
/// different channels at co-located pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlaneKind {
    Spatial,
    CrossBand,
}

/// One co-occurrence histogram over `bin_count x bin_count` intensity pairs.
/// Entries are raw counts, or frequencies after normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct CoMatPlane {
    pub kind: PlaneKind,
    pub displacement: (u32, u32),
    bin_count: usize,
    bins: Vec<f64>,
}

impl CoMatPlane {
    fn zeroed(kind: PlaneKind, displacement: (u32, u32), bin_count: usize) -> Self {
        CoMatPlane {
            kind,
            displacement,
            bin_count,
            bins: vec![0.0; bin_count * bin_count],
        }
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    /// Row-major `bin_count * bin_count` entries; row = first value of the
    /// pair, column = second.
    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.bins[i * self.bin_count + j]
    }

    pub fn total(&self) -> f64 {
        self.bins.iter().sum()
    }
}

/// The `bin_count x bin_count x 6` tensor fed to the CNN.
#[derive(Debug, Clone, PartialEq)]
pub struct CoMatTensor {
    planes: Vec<CoMatPlane>,
    bin_count: usize,
    normalized: bool,
    src_width: u32,
    src_height: u32,
}

/// Provenance sidecar written next to the binary tensor file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorSidecar {
    pub source: String,
    pub normalized: bool,
}

impl CoMatTensor {
    pub fn planes(&self) -> &[CoMatPlane] {
        &self.planes
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn src_dims(&self) -> (u32, u32) {
        (self.src_width, self.src_height)
    }
}

/// Spatial co-occurrence: `bins[i][j]` counts positions `(x, y)` where
/// `plane(x, y) = i` and `plane(x + dx, y + dy) = j`. Pairs that cross the
/// border are skipped.
pub fn spatial_comat(plane: &ChannelPlane, displacement: (u32, u32)) -> Result<CoMatPlane> {
    comat_pair(plane, plane, displacement, PlaneKind::Spatial)
}

/// Cross-band co-occurrence between two planes of identical geometry:
/// `bins[i][j]` counts positions where `a(x, y) = i` and
/// `b(x + dx, y + dy) = j`.
pub fn crossband_comat(
    a: &ChannelPlane,
    b: &ChannelPlane,
    displacement: (u32, u32),
) -> Result<CoMatPlane> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::invalid(format!(
            "cross-band planes differ in size: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    comat_pair(a, b, displacement, PlaneKind::CrossBand)
}

fn comat_pair(
    a: &ChannelPlane,
    b: &ChannelPlane,
    (dx, dy): (u32, u32),
    kind: PlaneKind,
) -> Result<CoMatPlane> {
    let (w, h) = (a.width(), a.height());
    if dx >= w || dy >= h {
        return Err(Error::invalid(format!(
            "displacement ({dx}, {dy}) exceeds plane dimensions {w}x{h}"
        )));
    }
    let mut out = CoMatPlane::zeroed(kind, (dx, dy), 256);
    let sa = a.samples();
    let sb = b.samples();
    let w = w as usize;
    let (dx, dy) = (dx as usize, dy as usize);
    for y in 0..h as usize - dy {
        let row_a = &sa[y * w..y * w + w - dx];
        let row_b = &sb[(y + dy) * w + dx..(y + dy) * w + w];
        for (&va, &vb) in row_a.iter().zip(row_b) {
            out.bins[va as usize * 256 + vb as usize] += 1.0;
        }
    }
    Ok(out)
}

/// Builds the six-plane tensor from a frame. Spatial planes use
/// displacement (1, 1), cross-band planes (0, 0). With `normalize`, each
/// plane is divided by its own total count.
pub fn build_tensor(frame: &Frame, normalize: bool) -> Result<CoMatTensor> {
    let (r, g, b) = split_channels(frame);
    let mut planes = vec![
        spatial_comat(&r, (1, 1))?,
        spatial_comat(&g, (1, 1))?,
        spatial_comat(&b, (1, 1))?,
        crossband_comat(&r, &g, (0, 0))?,
        crossband_comat(&r, &b, (0, 0))?,
        crossband_comat(&g, &b, (0, 0))?,
    ];
    if normalize {
        for plane in &mut planes {
            let total = plane.total();
            if total > 0.0 {
                for v in &mut plane.bins {
                    *v /= total;
                }
            }
        }
    }
    Ok(CoMatTensor {
        planes,
        bin_count: 256,
        normalized: normalize,
        src_width: frame.width(),
        src_height: frame.height(),
    })
}

/// Aggregates each plane over contiguous intensity blocks of size
/// `bin_count / new_bins`, preserving total mass.
pub fn rebin_tensor(t: &CoMatTensor, new_bins: usize) -> Result<CoMatTensor> {
    if new_bins == 0 || t.bin_count % new_bins != 0 {
        return Err(Error::invalid(format!(
            "new bin count {new_bins} does not divide {}",
            t.bin_count
        )));
    }
    let factor = t.bin_count / new_bins;
    let planes = t
        .planes
        .iter()
        .map(|p| {
            let mut out = CoMatPlane::zeroed(p.kind, p.displacement, new_bins);
            for i in 0..p.bin_count {
                let oi = i / factor;
                for j in 0..p.bin_count {
                    out.bins[oi * new_bins + j / factor] += p.bins[i * p.bin_count + j];
                }
            }
            out
        })
        .collect();
    Ok(CoMatTensor {
        planes,
        bin_count: new_bins,
        normalized: t.normalized,
        src_width: t.src_width,
        src_height: t.src_height,
    })
}

/// Writes the tensor as little-endian f32 in plane-major, row-major order
/// after a 16-byte header (magic, bin count, source width, source height),
/// plus a `<path>.json` provenance sidecar.
pub fn write_tensor(t: &CoMatTensor, path: impl AsRef<Path>, source: &str) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&(t.bin_count as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&t.src_width.to_le_bytes()).map_err(io)?;
    w.write_all(&t.src_height.to_le_bytes()).map_err(io)?;
    for plane in &t.planes {
        for &v in plane.bins() {
            w.write_all(&(v as f32).to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;

    let sidecar = TensorSidecar {
        source: source.to_string(),
        normalized: t.normalized,
    };
    let sidecar_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::Runtime(format!("sidecar serialization: {e}")))?;
    std::fs::write(&sidecar_path, json).map_err(|e| Error::io(&sidecar_path, e))?;
    Ok(())
}

/// Reads a tensor written by [`write_tensor`]. The sidecar, when present,
/// supplies the normalization flag; otherwise it is inferred from plane
/// sums.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<CoMatTensor> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| Error::format(path, "file shorter than 16-byte header"))?;
    if &header[0..4] != MAGIC {
        return Err(Error::format(path, "bad magic, expected CMT6"));
    }
    let bin_count = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let src_width = u32::from_le_bytes(header[8..12].try_into().unwrap());
    let src_height = u32::from_le_bytes(header[12..16].try_into().unwrap());
    if bin_count == 0 || bin_count > 256 || 256 % bin_count != 0 {
        return Err(Error::format(path, format!("bad bin count {bin_count}")));
    }
    let mut raw = Vec::new();
    r.read_to_end(&mut raw).map_err(|e| Error::io(path, e))?;
    let per_plane = bin_count * bin_count;
    if raw.len() != PLANE_COUNT * per_plane * 4 {
        return Err(Error::format(
            path,
            format!(
                "expected {} payload bytes, got {}",
                PLANE_COUNT * per_plane * 4,
                raw.len()
            ),
        ));
    }
    let mut values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    let kinds = [PlaneKind::Spatial; 3]
        .into_iter()
        .chain([PlaneKind::CrossBand; 3]);
    let planes: Vec<CoMatPlane> = kinds
        .map(|kind| {
            let displacement = match kind {
                PlaneKind::Spatial => (1, 1),
                PlaneKind::CrossBand => (0, 0),
            };
            CoMatPlane {
                kind,
                displacement,
                bin_count,
                bins: values.by_ref().take(per_plane).collect(),
            }
        })
        .collect();

    let normalized = match read_sidecar(path) {
        Some(s) => s.normalized,
        None => planes.iter().all(|p| (p.total() - 1.0).abs() < 1e-3),
    };
    Ok(CoMatTensor {
        planes,
        bin_count,
        normalized,
        src_width,
        src_height,
    })
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".json");
    s.into()
}

fn read_sidecar(path: &Path) -> Option<TensorSidecar> {
    let text = std::fs::read_to_string(sidecar_path(path)).ok()?;
    serde_json::from_str(&text).ok()
}
