//! Raster primitives: loading, contrast stretch, deskew, Otsu binarization,
//! rectangular morphology and projection profiles.
//!
//! Intensities follow the usual scan convention: 0 is black ink, 255 is
//! white paper. Every intensity map rounds half-up.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    /// Builds an image from row-major intensities. Panics if the buffer
    /// length does not match or a dimension is zero.
    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        assert_eq!(data.len(), width as usize * height as usize, "buffer size mismatch");
        GrayImage { width, height, data }
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self::from_raw(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = v;
    }

    pub fn to_image(&self) -> image::GrayImage {
        image::GrayImage::from_raw(self.width, self.height, self.data.clone())
            .expect("dimensions checked at construction")
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_image()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::Io(io),
                other => Error::CorruptImage(other.to_string()),
            })
    }
}

/// Foreground mask; `true` marks ink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: u32, height: u32) -> Self {
        BinaryImage {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), width as usize * height as usize, "buffer size mismatch");
        BinaryImage { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewEstimate {
    /// Degrees, positive when the text is rotated counter-clockwise.
    pub angle: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// One count per row.
    Horizontal,
    /// One count per column.
    Vertical,
}

/// Loads a PNG (8-bit gray or RGB) or binary PGM file as grayscale.
/// Color is reduced with Rec. 601 luma weights.
pub fn load_image(path: &Path) -> Result<GrayImage> {
    if !path.is_file() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let bytes = std::fs::read(path)?;
    decode_image(&bytes)
}

pub fn decode_image(bytes: &[u8]) -> Result<GrayImage> {
    let format = image::guess_format(bytes)
        .map_err(|_| Error::UnsupportedFormat("unrecognized file signature".into()))?;
    if !matches!(format, image::ImageFormat::Png | image::ImageFormat::Pnm) {
        return Err(Error::UnsupportedFormat(format!("{format:?}")));
    }
    let img = image::load_from_memory_with_format(bytes, format).map_err(|e| match e {
        image::ImageError::Unsupported(u) => Error::UnsupportedFormat(u.to_string()),
        other => Error::CorruptImage(other.to_string()),
    })?;
    let (width, height) = (img.width(), img.height());
    if width == 0 || height == 0 {
        return Err(Error::CorruptImage("zero-sized image".into()));
    }
    let data = match img {
        image::DynamicImage::ImageLuma8(g) => g.into_raw(),
        image::DynamicImage::ImageLumaA8(g) => g.pixels().map(|p| p.0[0]).collect(),
        image::DynamicImage::ImageRgb8(rgb) => rgb.pixels().map(|p| luma601(p.0[0], p.0[1], p.0[2])).collect(),
        image::DynamicImage::ImageRgba8(rgba) => rgba.pixels().map(|p| luma601(p.0[0], p.0[1], p.0[2])).collect(),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{:?} pixels (expected 8-bit gray or RGB)",
                other.color()
            )))
        }
    };
    Ok(GrayImage::from_raw(width, height, data))
}

/// 0.299 R + 0.587 G + 0.114 B, rounded half-up, in exact integer arithmetic.
#[inline]
pub fn luma601(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

fn histogram(img: &GrayImage) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in img.data() {
        hist[v as usize] += 1;
    }
    hist
}

/// Intensity found at sorted rank `rank` (0-based).
fn value_at_rank(hist: &[u64; 256], rank: u64) -> u8 {
    let mut seen = 0u64;
    for (v, &c) in hist.iter().enumerate() {
        seen += c;
        if seen > rank {
            return v as u8;
        }
    }
    255
}

/// Linear stretch sending the `low_pct` percentile to 0 and the `high_pct`
/// percentile to 255. Images whose two percentiles coincide come back unchanged.
pub fn auto_contrast(img: &GrayImage, low_pct: f64, high_pct: f64) -> GrayImage {
    debug_assert!((0.0..=1.0).contains(&low_pct) && low_pct < high_pct && high_pct <= 1.0);
    let hist = histogram(img);
    let last = img.data().len() as u64 - 1;
    let lo_rank = (low_pct * last as f64).floor() as u64;
    let hi_rank = ((high_pct * last as f64).ceil() as u64).min(last);
    let lo = value_at_rank(&hist, lo_rank) as u32;
    let hi = value_at_rank(&hist, hi_rank) as u32;
    if hi <= lo {
        return img.clone();
    }
    let span = hi - lo;
    let mut lut = [0u8; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        let v = v as u32;
        *slot = if v <= lo {
            0
        } else if v >= hi {
            255
        } else {
            // round((v - lo) * 255 / span) half-up
            (((v - lo) * 510 + span) / (2 * span)) as u8
        };
    }
    let data = img.data().iter().map(|&v| lut[v as usize]).collect();
    GrayImage::from_raw(img.width(), img.height(), data)
}

/// Otsu threshold `t`: pixels with intensity `< t` are foreground.
/// Returns 0 (nothing is foreground) for single-valued images. When several
/// split points share the maximal between-class variance the middle one is used.
pub fn otsu_threshold(img: &GrayImage) -> u16 {
    let hist = histogram(img);
    let total: u64 = hist.iter().sum();
    let sum_all: f64 = hist.iter().enumerate().map(|(v, &c)| v as f64 * c as f64).sum();
    let mut w0 = 0u64;
    let mut sum0 = 0f64;
    let mut best = -1f64;
    let (mut first, mut last) = (None, None);
    for k in 0..255usize {
        w0 += hist[k];
        sum0 += k as f64 * hist[k] as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let m0 = sum0 / w0 as f64;
        let m1 = (sum_all - sum0) / w1 as f64;
        let between = w0 as f64 * w1 as f64 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            first = Some(k);
            last = Some(k);
        } else if between == best {
            last = Some(k);
        }
    }
    match (first, last) {
        (Some(a), Some(b)) => ((a + b) / 2 + 1) as u16,
        _ => 0,
    }
}

pub fn binarize(img: &GrayImage) -> BinaryImage {
    let t = otsu_threshold(img);
    let data = img.data().iter().map(|&v| (v as u16) < t).collect();
    BinaryImage::from_raw(img.width(), img.height(), data)
}

/// Runs of `true` of length `radius_before + radius_after + 1` around each
/// position: dilation (`any`) or erosion (`all`) of a 1-D signal, where
/// positions outside the signal are background.
fn morph_1d(src: &[bool], before: usize, after: usize, dilate: bool, out: &mut [bool]) {
    let n = src.len();
    let mut prefix = vec![0usize; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + src[i] as usize;
    }
    let window = before + after + 1;
    for i in 0..n {
        let lo = i.saturating_sub(before);
        let hi = (i + after + 1).min(n);
        let ones = prefix[hi] - prefix[lo];
        out[i] = if dilate { ones > 0 } else { ones == window };
    }
}

fn morph(img: &BinaryImage, kernel_w: u32, kernel_h: u32, dilate: bool) -> BinaryImage {
    assert!(kernel_w % 2 == 1 && kernel_h % 2 == 1, "kernel dimensions must be odd");
    let (w, h) = (img.width as usize, img.height as usize);
    let (rx, ry) = ((kernel_w / 2) as usize, (kernel_h / 2) as usize);
    let mut rows = vec![false; w * h];
    for y in 0..h {
        morph_1d(&img.data[y * w..(y + 1) * w], rx, rx, dilate, &mut rows[y * w..(y + 1) * w]);
    }
    let mut out = vec![false; w * h];
    let mut col = vec![false; h];
    let mut res = vec![false; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = rows[y * w + x];
        }
        morph_1d(&col, ry, ry, dilate, &mut res);
        for y in 0..h {
            out[y * w + x] = res[y];
        }
    }
    BinaryImage::from_raw(img.width, img.height, out)
}

/// Dilation by a flat `kernel_w` x `kernel_h` rectangle (odd sides).
pub fn dilate(img: &BinaryImage, kernel_w: u32, kernel_h: u32) -> BinaryImage {
    morph(img, kernel_w, kernel_h, true)
}

/// Erosion by a flat rectangle; the border counts as background, so
/// foreground touching the edge shrinks.
pub fn erode(img: &BinaryImage, kernel_w: u32, kernel_h: u32) -> BinaryImage {
    morph(img, kernel_w, kernel_h, false)
}

pub fn projection(img: &BinaryImage, axis: Axis) -> Vec<u32> {
    let (w, h) = (img.width as usize, img.height as usize);
    match axis {
        Axis::Horizontal => (0..h)
            .map(|y| img.data[y * w..(y + 1) * w].iter().filter(|&&b| b).count() as u32)
            .collect(),
        Axis::Vertical => {
            let mut counts = vec![0u32; w];
            for y in 0..h {
                for (x, c) in counts.iter_mut().enumerate() {
                    *c += img.data[y * w + x] as u32;
                }
            }
            counts
        }
    }
}

/// Rotates about the image center by `angle` degrees (positive turns the
/// content counter-clockwise on screen). Bilinear sampling; samples falling
/// outside the source read as white.
pub fn rotate(img: &GrayImage, angle: f64) -> GrayImage {
    if angle == 0.0 {
        return img.clone();
    }
    let (w, h) = (img.width as usize, img.height as usize);
    let (sin, cos) = angle.to_radians().sin_cos();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let sample = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            255.0
        } else {
            img.data[y as usize * w + x as usize] as f64
        }
    };
    let mut out = vec![255u8; w * h];
    for oy in 0..h {
        let ry = oy as f64 - cy;
        for ox in 0..w {
            let rx = ox as f64 - cx;
            // inverse of the forward map (x c + y s, -x s + y c)
            let sx = cx + rx * cos - ry * sin;
            let sy = cy + rx * sin + ry * cos;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let (x0, y0) = (x0 as i64, y0 as i64);
            let top = sample(x0, y0) * (1.0 - fx) + sample(x0 + 1, y0) * fx;
            let bottom = sample(x0, y0 + 1) * (1.0 - fx) + sample(x0 + 1, y0 + 1) * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            out[oy * w + ox] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
        }
    }
    GrayImage::from_raw(img.width, img.height, out)
}

/// Finds the grid angle in `[-max_angle, max_angle]` whose de-rotation gives
/// the most peaked horizontal projection of the page ink.
///
/// Inked pixels are projected directly onto the de-rotated row axis instead
/// of resampling the whole image per candidate angle.
pub fn estimate_skew(img: &GrayImage, max_angle: f64, step: f64) -> Result<SkewEstimate> {
    assert!(step > 0.0 && step <= max_angle && max_angle <= 15.0, "invalid skew search grid");
    if binarize(img).count() == 0 {
        return Err(Error::BlankImage);
    }
    let (w, h) = (img.width as usize, img.height as usize);
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    // ink-weighted samples keep the sub-pixel position of interpolated edges
    let mut points = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let ink = 255 - img.data[y * w + x];
            if ink > 0 {
                points.push((x as f64 - cx, y as f64 - cy, ink as f64));
            }
        }
    }

    // rows are binned at a quarter pixel and scored through a one-pixel
    // moving window, which keeps the score independent of sub-pixel phase
    const SUB: usize = 4;
    let half_diag = ((w * w + h * h) as f64).sqrt() / 2.0;
    let offset = half_diag.ceil() + 1.0;
    let nbins = (2.0 * offset) as usize * SUB + SUB;
    let steps = (max_angle / step + 1e-9).floor() as i64;
    let mut bins = vec![0f64; nbins];
    let total: f64 = points.iter().map(|p| p.2).sum();
    let mean = total / nbins as f64;

    let mut scored: Vec<(f64, f64)> = Vec::with_capacity((2 * steps + 1) as usize);
    for k in -steps..=steps {
        let angle = k as f64 * step;
        let (sin, cos) = angle.to_radians().sin_cos();
        bins.iter_mut().for_each(|b| *b = 0.0);
        for &(x, y, ink) in &points {
            let pos = (x * sin + y * cos + offset) * SUB as f64;
            bins[(pos + 0.5).floor() as usize] += ink;
        }
        let mut window = 0.0;
        let mut sq = 0.0;
        for i in 0..nbins {
            window += bins[i];
            if i >= SUB {
                window -= bins[i - SUB];
            }
            sq += window * window;
        }
        let variance = sq / nbins as f64 - mean * mean;
        scored.push((angle, variance));
    }

    let mut best = scored[0];
    for &(angle, var) in &scored[1..] {
        let better = var > best.1 || (var == best.1 && angle.abs() < best.0.abs());
        if better {
            best = (angle, var);
        }
    }
    let mut variances: Vec<f64> = scored.iter().map(|s| s.1).collect();
    variances.sort_by(|a, b| a.total_cmp(b));
    let median = variances[variances.len() / 2];
    let confidence = if best.1 > 0.0 {
        (1.0 - median / best.1).clamp(0.0, 1.0)
    } else {
        0.0
    };
    // snap away float noise from k * step
    let angle = (best.0 / step).round() * step;
    Ok(SkewEstimate { angle, confidence })
}
