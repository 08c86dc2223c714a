//! Color-rich SPAM features: truncated first-order residuals in eight
//! directions, second-order Markov statistics per channel, and joint
//! cross-channel residual co-occurrences, combined into a 1372-dimensional
//! vector.
//!
//! Layout: `[intra 686 | cross 686]`. The intra half is the channel mean of
//! the per-channel 686-vector (axis-direction average followed by
//! diagonal-direction average, 343 each). The cross half holds the
//! axis-averaged and diagonal-averaged joint co-occurrences of co-located
//! residuals across R, G, B.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::frame::{split_channels, ChannelPlane, Frame};

/// Residual truncation bound.
pub const TRUNC: i8 = 3;

/// Number of truncated residual states, `2 * TRUNC + 1`.
pub const STATES: usize = 7;

/// Length of one Markov / co-occurrence block, `STATES^3`.
pub const BLOCK: usize = STATES * STATES * STATES;

/// Length of the per-channel SPAM vector (two blocks).
pub const SPAM_DIM: usize = 2 * BLOCK;

/// Length of the full feature vector.
pub const FEATURE_DIM: usize = 2 * SPAM_DIM;

/// A residual scan direction. The step is the pixel offset subtracted from
/// each sample, and also the stride along which Markov triples are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Right,
    Left,
    Down,
    Up,
    DownRight,
    UpLeft,
    DownLeft,
    UpRight,
}

impl Direction {
    pub const ALL: [Direction; 8] = [
        Direction::Right,
        Direction::Left,
        Direction::Down,
        Direction::Up,
        Direction::DownRight,
        Direction::UpLeft,
        Direction::DownLeft,
        Direction::UpRight,
    ];

    pub const AXIS: [Direction; 4] = [
        Direction::Right,
        Direction::Left,
        Direction::Down,
        Direction::Up,
    ];

    pub const DIAGONAL: [Direction; 4] = [
        Direction::DownRight,
        Direction::UpLeft,
        Direction::DownLeft,
        Direction::UpRight,
    ];

    /// `(dx, dy)` with x growing rightwards and y downwards.
    pub fn step(self) -> (i32, i32) {
        match self {
            Direction::Right => (1, 0),
            Direction::Left => (-1, 0),
            Direction::Down => (0, 1),
            Direction::Up => (0, -1),
            Direction::DownRight => (1, 1),
            Direction::UpLeft => (-1, -1),
            Direction::DownLeft => (-1, 1),
            Direction::UpRight => (1, -1),
        }
    }
}

/// Grid of truncated first-order differences along one direction. Pairs
/// that cross the image border are skipped, so the grid shrinks by one
/// row/column per non-zero step component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualMap {
    direction: Direction,
    width: usize,
    height: usize,
    values: Vec<i8>,
}

impl ResidualMap {
    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> i8 {
        self.values[y * self.width + x]
    }
}

/// The 1372-dimensional feature vector, `[intra 686 | cross 686]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector1372(Vec<f64>);

impl FeatureVector1372 {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != FEATURE_DIM {
            return Err(Error::invalid(format!(
                "feature vector has {} values, expected {FEATURE_DIM}",
                values.len()
            )));
        }
        Ok(FeatureVector1372(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn intra(&self) -> &[f64] {
        &self.0[..SPAM_DIM]
    }

    pub fn cross(&self) -> &[f64] {
        &self.0[SPAM_DIM..]
    }
}

#[inline]
fn truncate(v: i32) -> i8 {
    v.clamp(-(TRUNC as i32), TRUNC as i32) as i8
}

/// Flat index of `(u, v, w)` over `{-3..3}^3` in lexicographic order.
#[inline]
pub fn block_index(u: i8, v: i8, w: i8) -> usize {
    let t = TRUNC as i32;
    (((u as i32 + t) * STATES as i32 + (v as i32 + t)) * STATES as i32 + (w as i32 + t)) as usize
}

/// Truncated first-order residual `D(x, y) = p(x, y) - p(x + dx, y + dy)`.
pub fn residual(plane: &ChannelPlane, direction: Direction) -> Result<ResidualMap> {
    let (dx, dy) = direction.step();
    let (w, h) = (plane.width() as i64, plane.height() as i64);
    if (dx != 0 && w < 3) || (dy != 0 && h < 3) {
        return Err(Error::invalid(format!(
            "plane {w}x{h} too small for residuals along {direction:?}"
        )));
    }
    let rw = (w - dx.abs() as i64) as usize;
    let rh = (h - dy.abs() as i64) as usize;
    let ox = if dx < 0 { 1 } else { 0 };
    let oy = if dy < 0 { 1 } else { 0 };
    let mut values = Vec::with_capacity(rw * rh);
    for j in 0..rh {
        for i in 0..rw {
            let x = (i + ox) as i64;
            let y = (j + oy) as i64;
            let a = plane.value(x as u32, y as u32) as i32;
            let b = plane.value((x + dx as i64) as u32, (y + dy as i64) as u32) as i32;
            values.push(truncate(a - b));
        }
    }
    Ok(ResidualMap {
        direction,
        width: rw,
        height: rh,
        values,
    })
}

/// Second-order Markov statistics of a residual map: for every collinear
/// triple `(D_k, D_{k+1}, D_{k+2})` along the map's direction, estimates
/// `P(D_{k+2} = u | D_{k+1} = v, D_k = w)`. Entries with an unseen
/// conditioning pair are zero.
pub fn spam_markov(res: &ResidualMap) -> Result<Vec<f64>> {
    let (dx, dy) = res.direction().step();
    let (dx, dy) = (dx as i64, dy as i64);
    let mut triples = vec![0u64; BLOCK];
    let mut any = false;
    for j in 0..res.height as i64 {
        for i in 0..res.width as i64 {
            let (i2, j2) = (i + 2 * dx, j + 2 * dy);
            if i2 < 0 || j2 < 0 || i2 >= res.width as i64 || j2 >= res.height as i64 {
                continue;
            }
            let w = res.get(i as usize, j as usize);
            let v = res.get((i + dx) as usize, (j + dy) as usize);
            let u = res.get(i2 as usize, j2 as usize);
            triples[block_index(u, v, w)] += 1;
            any = true;
        }
    }
    if !any {
        return Err(Error::invalid(format!(
            "residual map {}x{} has no triples along {:?}",
            res.width, res.height, res.direction
        )));
    }
    // Condition on (v, w): divide by the triple count summed over u.
    let mut pair_totals = vec![0u64; STATES * STATES];
    for u in 0..STATES {
        for vw in 0..STATES * STATES {
            pair_totals[vw] += triples[u * STATES * STATES + vw];
        }
    }
    let mut out = vec![0.0; BLOCK];
    for u in 0..STATES {
        for vw in 0..STATES * STATES {
            let denom = pair_totals[vw];
            if denom > 0 {
                out[u * STATES * STATES + vw] =
                    triples[u * STATES * STATES + vw] as f64 / denom as f64;
            }
        }
    }
    Ok(out)
}

/// Per-channel SPAM vector: the mean Markov block over the four axis
/// directions followed by the mean over the four diagonal directions.
pub fn spam686(plane: &ChannelPlane) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(SPAM_DIM);
    for group in [&Direction::AXIS, &Direction::DIAGONAL] {
        let mut acc = vec![0.0; BLOCK];
        for &dir in group.iter() {
            let m = spam_markov(&residual(plane, dir)?)?;
            for (a, b) in acc.iter_mut().zip(&m) {
                *a += b;
            }
        }
        out.extend(acc.into_iter().map(|v| v / group.len() as f64));
    }
    Ok(out)
}

/// Joint relative frequency of co-located residual values across the three
/// channels: `C(u, v, w) = P(D_R = u, D_G = v, D_B = w)`.
pub fn cross_cooc(r: &ResidualMap, g: &ResidualMap, b: &ResidualMap) -> Result<Vec<f64>> {
    if r.direction != g.direction || r.direction != b.direction {
        return Err(Error::invalid("cross co-occurrence requires one direction"));
    }
    if r.width != g.width || r.width != b.width || r.height != g.height || r.height != b.height {
        return Err(Error::invalid("residual map geometry mismatch"));
    }
    let mut counts = vec![0u64; BLOCK];
    for i in 0..r.values.len() {
        counts[block_index(r.values[i], g.values[i], b.values[i])] += 1;
    }
    let total = r.values.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}

/// Full CRSPAM vector: channel-mean SPAM686 (intra half) plus
/// direction-averaged cross-channel co-occurrences (cross half).
pub fn crspam1372(frame: &Frame) -> Result<FeatureVector1372> {
    let (r, g, b) = split_channels(frame);

    let sr = spam686(&r)?;
    let sg = spam686(&g)?;
    let sb = spam686(&b)?;
    let mut values = Vec::with_capacity(FEATURE_DIM);
    for i in 0..SPAM_DIM {
        values.push((sr[i] + sg[i] + sb[i]) / 3.0);
    }

    for group in [&Direction::AXIS, &Direction::DIAGONAL] {
        let mut acc = vec![0.0; BLOCK];
        for &dir in group.iter() {
            let c = cross_cooc(&residual(&r, dir)?, &residual(&g, dir)?, &residual(&b, dir)?)?;
            for (a, v) in acc.iter_mut().zip(&c) {
                *a += v;
            }
        }
        values.extend(acc.into_iter().map(|v| v / group.len() as f64));
    }
    FeatureVector1372::new(values)
}

/// One labeled feature record, as stored in the feature CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub path: String,
    pub label: String,
    pub features: FeatureVector1372,
}

/// Writes rows as CSV with header `path,label,f0000..f1371`. Values use
/// shortest-roundtrip formatting, so reading back reproduces identical
/// floats.
pub fn write_features_csv(path: impl AsRef<Path>, rows: &[FeatureRow]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let mut header = String::from("path,label");
    for i in 0..FEATURE_DIM {
        header.push_str(&format!(",f{i:04}"));
    }
    writeln!(w, "{header}").map_err(io)?;
    for row in rows {
        if row.path.contains(',') || row.label.contains(',') {
            return Err(Error::invalid(format!(
                "commas not allowed in path/label: {}",
                row.path
            )));
        }
        write!(w, "{},{}", row.path, row.label).map_err(io)?;
        for v in row.features.values() {
            write!(w, ",{v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a CSV written by [`write_features_csv`].
pub fn read_features_csv(path: impl AsRef<Path>) -> Result<Vec<FeatureRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty file"))?
        .map_err(|e| Error::io(path, e))?;
    if !header.starts_with("path,label,f0000") {
        return Err(Error::format(path, "unexpected header"));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let fpath = parts
            .next()
            .ok_or_else(|| Error::format(path, format!("row {n}: missing path")))?;
        let label = parts
            .next()
            .ok_or_else(|| Error::format(path, format!("row {n}: missing label")))?;
        let values: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|e| Error::format(path, format!("row {n}: {e}")))
            })
            .collect::<Result<_>>()?;
        rows.push(FeatureRow {
            path: fpath.to_string(),
            label: label.to_string(),
            features: FeatureVector1372::new(values)?,
        });
    }
    Ok(rows)
}
