//! Adaptive pixel-by-pixel comparison of word images.
//!
//! Word crops are turned into ink rasters (`255 - intensity`). Two rasters are
//! compared by the one-sided excess of each over the other's 3x3 dilation
//! ("extended image"), minimized over a grid of integer shifts and small
//! rotations of the test raster, and normalized by the larger ink mass.
//!
//! Placement: both rasters share their top-left origin; the test raster is
//! rotated about its own center (nearest neighbour) and then shifted by
//! `(dx, dy)`. Everything outside a raster reads as zero ink.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{otsu_threshold, GrayImage};
use crate::segment::BBox;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordRaster {
    width: u32,
    height: u32,
    ink: Vec<u8>,
    ink_sum: u64,
}

impl WordRaster {
    pub fn new(width: u32, height: u32, ink: Vec<u8>) -> Self {
        assert!(width >= 1 && height >= 1, "raster dimensions must be >= 1");
        assert_eq!(ink.len(), width as usize * height as usize, "buffer size mismatch");
        let ink_sum = ink.iter().map(|&v| v as u64).sum();
        WordRaster {
            width,
            height,
            ink,
            ink_sum,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn ink(&self) -> &[u8] {
        &self.ink
    }

    pub fn ink_sum(&self) -> u64 {
        self.ink_sum
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.ink[y as usize * self.width as usize + x as usize]
    }

    /// Ink at signed coordinates, zero outside the raster.
    #[inline]
    pub fn at(&self, x: i64, y: i64) -> u8 {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            0
        } else {
            self.ink[y as usize * self.width as usize + x as usize]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchRange {
    pub x_min: i32,
    pub x_max: i32,
    pub y_min: i32,
    pub y_max: i32,
    /// Degrees.
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_step: f64,
}

impl Default for SearchRange {
    fn default() -> Self {
        SearchRange::symmetric(3, 1.0, 1.0)
    }
}

impl SearchRange {
    pub fn symmetric(shift: i32, alpha: f64, alpha_step: f64) -> Self {
        SearchRange {
            x_min: -shift,
            x_max: shift,
            y_min: -shift,
            y_max: shift,
            alpha_min: -alpha,
            alpha_max: alpha,
            alpha_step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_min > self.x_max || self.y_min > self.y_max {
            return Err(Error::InvalidConfig("shift range min exceeds max".into()));
        }
        if !(self.alpha_step > 0.0) || !(self.alpha_min <= self.alpha_max) {
            return Err(Error::InvalidConfig("rotation range needs min <= max and step > 0".into()));
        }
        if self.alpha_min.abs() > 45.0 || self.alpha_max.abs() > 45.0 {
            return Err(Error::InvalidConfig("rotation range limited to +/-45 degrees".into()));
        }
        Ok(())
    }

    /// Rotation grid `alpha_min + k * alpha_step <= alpha_max`.
    pub fn alphas(&self) -> Vec<f64> {
        let count = ((self.alpha_max - self.alpha_min) / self.alpha_step + 1e-9).floor() as i64;
        (0..=count.max(0))
            .map(|k| {
                let a = self.alpha_min + k as f64 * self.alpha_step;
                // keep grid points like 0.0 exact
                (a * 1e9).round() / 1e9
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PixelMode {
    /// Ink is `255 - intensity`.
    Gray,
    /// Ink is 255 on Otsu foreground of the crop, 0 elsewhere.
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PixParams {
    /// Words are equal when the pixel coefficient is strictly below this.
    pub word_pixel_coeff: f64,
    pub range: SearchRange,
    pub mode: PixelMode,
}

impl Default for PixParams {
    fn default() -> Self {
        PixParams {
            word_pixel_coeff: 0.01,
            range: SearchRange::default(),
            mode: PixelMode::Gray,
        }
    }
}

pub fn crop_word(img: &GrayImage, bbox: &BBox) -> Result<WordRaster> {
    crop_word_with(img, bbox, PixelMode::Gray)
}

pub fn crop_word_with(img: &GrayImage, bbox: &BBox, mode: PixelMode) -> Result<WordRaster> {
    if bbox.w == 0 || bbox.h == 0 || !bbox.fits_in(img.width(), img.height()) {
        return Err(Error::BoxOutOfBounds {
            box_: *bbox,
            width: img.width(),
            height: img.height(),
        });
    }
    let mut gray = Vec::with_capacity(bbox.area() as usize);
    for y in bbox.y..bbox.bottom() {
        for x in bbox.x..bbox.right() {
            gray.push(img.get(x, y));
        }
    }
    let ink = match mode {
        PixelMode::Gray => gray.iter().map(|&v| 255 - v).collect(),
        PixelMode::Binary => {
            let t = otsu_threshold(&GrayImage::from_raw(bbox.w, bbox.h, gray.clone()));
            gray.iter().map(|&v| if (v as u16) < t { 255 } else { 0 }).collect()
        }
    };
    Ok(WordRaster::new(bbox.w, bbox.h, ink))
}

/// Grayscale dilation by the 3x3 neighbourhood, same dimensions.
pub fn extend_image(r: &WordRaster) -> WordRaster {
    let (w, h) = (r.width as i64, r.height as i64);
    let mut out = vec![0u8; r.ink.len()];
    for y in 0..h {
        for x in 0..w {
            let mut m = 0u8;
            for yy in (y - 1).max(0)..=(y + 1).min(h - 1) {
                for xx in (x - 1).max(0)..=(x + 1).min(w - 1) {
                    m = m.max(r.ink[(yy * w + xx) as usize]);
                }
            }
            out[(y * w + x) as usize] = m;
        }
    }
    WordRaster::new(r.width, r.height, out)
}

/// Dense grid with a signed origin: cell `(i, j)` sits at `(ox + i, oy + j)`.
#[derive(Debug, Clone)]
struct Grid {
    ox: i64,
    oy: i64,
    w: i64,
    h: i64,
    data: Vec<u8>,
}

impl Grid {
    #[inline]
    fn at(&self, x: i64, y: i64) -> u8 {
        let (i, j) = (x - self.ox, y - self.oy);
        if i < 0 || j < 0 || i >= self.w || j >= self.h {
            0
        } else {
            self.data[(j * self.w + i) as usize]
        }
    }

    /// 3x3 max filter, grown by one cell on every side so the halo is kept.
    fn dilated(&self) -> Grid {
        let (w, h) = (self.w + 2, self.h + 2);
        let (ox, oy) = (self.ox - 1, self.oy - 1);
        let mut data = vec![0u8; (w * h) as usize];
        for j in 0..h {
            for i in 0..w {
                let (x, y) = (ox + i, oy + j);
                let mut m = 0u8;
                for yy in y - 1..=y + 1 {
                    for xx in x - 1..=x + 1 {
                        m = m.max(self.at(xx, yy));
                    }
                }
                data[(j * w + i) as usize] = m;
            }
        }
        Grid { ox, oy, w, h, data }
    }

    fn nonzero(&self) -> Vec<(i64, i64, u8)> {
        let mut out = Vec::new();
        for j in 0..self.h {
            for i in 0..self.w {
                let v = self.data[(j * self.w + i) as usize];
                if v > 0 {
                    out.push((self.ox + i, self.oy + j, v));
                }
            }
        }
        out
    }
}

fn grid_of(r: &WordRaster) -> Grid {
    Grid {
        ox: 0,
        oy: 0,
        w: r.width as i64,
        h: r.height as i64,
        data: r.ink.clone(),
    }
}

/// Source pixel for the destination `(qx, qy)` when rotating a `w` x `h`
/// raster by `alpha` degrees about its center.
#[inline]
fn rotation_source(qx: i64, qy: i64, w: u32, h: u32, sin: f64, cos: f64) -> (i64, i64) {
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let rx = qx as f64 - cx;
    let ry = qy as f64 - cy;
    let sx = cx + rx * cos - ry * sin;
    let sy = cy + rx * sin + ry * cos;
    ((sx + 0.5).floor() as i64, (sy + 0.5).floor() as i64)
}

/// Nearest-neighbour rotation into a grid large enough for every non-zero sample.
fn rotated(r: &WordRaster, alpha: f64) -> Grid {
    if alpha == 0.0 {
        return grid_of(r);
    }
    let (sin, cos) = alpha.to_radians().sin_cos();
    let cx = (r.width as f64 - 1.0) / 2.0;
    let cy = (r.height as f64 - 1.0) / 2.0;
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for (px, py) in [(-1.0, -1.0), (r.width as f64, -1.0), (-1.0, r.height as f64), (r.width as f64, r.height as f64)] {
        let (rx, ry) = (px - cx, py - cy);
        let fx = cx + rx * cos + ry * sin;
        let fy = cy - rx * sin + ry * cos;
        x0 = x0.min(fx);
        y0 = y0.min(fy);
        x1 = x1.max(fx);
        y1 = y1.max(fy);
    }
    let (ox, oy) = (x0.floor() as i64 - 1, y0.floor() as i64 - 1);
    let (w, h) = (x1.ceil() as i64 + 2 - ox, y1.ceil() as i64 + 2 - oy);
    let mut data = vec![0u8; (w * h) as usize];
    for j in 0..h {
        for i in 0..w {
            let (sx, sy) = rotation_source(ox + i, oy + j, r.width, r.height, sin, cos);
            data[(j * w + i) as usize] = r.at(sx, sy);
        }
    }
    Grid { ox, oy, w, h, data }
}

/// Precomputed operands for one rotation of the test raster.
struct Placed {
    ink: Vec<(i64, i64, u8)>,
    extended: Grid,
}

impl Placed {
    fn new(g: Grid) -> Self {
        Placed {
            ink: g.nonzero(),
            extended: g.dilated(),
        }
    }
}

struct Reference {
    ink: Vec<(i64, i64, u8)>,
    extended: Grid,
}

impl Reference {
    fn new(r: &WordRaster) -> Self {
        let g = grid_of(r);
        Reference {
            ink: g.nonzero(),
            extended: g.dilated(),
        }
    }
}

/// Distance sum for one placement; gives up and returns `None` once the running
/// total reaches `limit`.
fn distance(m: &Reference, t: &Placed, dx: i64, dy: i64, limit: Option<u64>) -> Option<u64> {
    let limit = limit.unwrap_or(u64::MAX);
    let mut sum = 0u64;
    for &(x, y, v) in &t.ink {
        let o = m.extended.at(x + dx, y + dy);
        sum += v.saturating_sub(o) as u64;
    }
    if sum >= limit {
        return None;
    }
    for &(x, y, v) in &m.ink {
        let o = t.extended.at(x - dx, y - dy);
        sum += v.saturating_sub(o) as u64;
        if sum >= limit {
            return None;
        }
    }
    Some(sum)
}

/// Distance with the test raster rotated by `alpha` and shifted by `(dx, dy)`.
pub fn dist_at(m: &WordRaster, t: &WordRaster, dx: i32, dy: i32, alpha: f64) -> u64 {
    let reference = Reference::new(m);
    let placed = Placed::new(rotated(t, alpha));
    distance(&reference, &placed, dx as i64, dy as i64, None).expect("no limit given")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistMin {
    pub dist: u64,
    pub dx: i32,
    pub dy: i32,
    pub alpha: f64,
}

/// Exhaustive minimum over the shift and rotation grid. Among equal
/// distances the smallest `|dx| + |dy|` wins, then the smallest `|alpha|`,
/// then the lexicographically smallest `(dx, dy, alpha)`.
pub fn dist_min(m: &WordRaster, t: &WordRaster, range: &SearchRange) -> DistMin {
    let reference = Reference::new(m);
    let alphas = range.alphas();
    let placements: Vec<Placed> = alphas.iter().map(|&a| Placed::new(rotated(t, a))).collect();

    let mut candidates: Vec<(i32, i32, usize)> = Vec::new();
    for dx in range.x_min..=range.x_max {
        for dy in range.y_min..=range.y_max {
            for k in 0..alphas.len() {
                candidates.push((dx, dy, k));
            }
        }
    }
    candidates.sort_by(|a, b| {
        let ka = (a.0.abs() + a.1.abs(), alphas[a.2].abs());
        let kb = (b.0.abs() + b.1.abs(), alphas[b.2].abs());
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
            .then(alphas[a.2].total_cmp(&alphas[b.2]))
    });

    let mut best: Option<DistMin> = None;
    for (dx, dy, k) in candidates {
        let limit = best.map(|b| b.dist);
        if let Some(d) = distance(&reference, &placements[k], dx as i64, dy as i64, limit) {
            best = Some(DistMin {
                dist: d,
                dx,
                dy,
                alpha: alphas[k],
            });
            if d == 0 {
                break;
            }
        }
    }
    best.expect("search grid is never empty")
}

/// Minimal distance normalized by the larger ink mass; may exceed 1.
pub fn coeff_pix(m: &WordRaster, t: &WordRaster, range: &SearchRange) -> Result<f64> {
    let mass = m.ink_sum.max(t.ink_sum);
    if mass == 0 {
        return Err(Error::BothBlank);
    }
    Ok(dist_min(m, t, range).dist as f64 / mass as f64)
}

pub fn words_equal_pix(m: &WordRaster, t: &WordRaster, p: &PixParams) -> Result<bool> {
    Ok(coeff_pix(m, t, &p.range)? < p.word_pixel_coeff)
}
