//! Projection-based segmentation of a deskewed page into text lines and words.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{binarize, projection, Axis, BinaryImage, GrayImage};

/// Axis-aligned rectangle, `(x, y)` is the top-left corner.
/// Serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl From<[u32; 4]> for BBox {
    fn from(a: [u32; 4]) -> Self {
        BBox::new(a[0], a[1], a[2], a[3])
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl BBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        BBox { x, y, w, h }
    }

    /// Box spanning `[x0, x1) x [y0, y1)`; degenerate extents are widened to one pixel.
    pub fn from_corners(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        BBox {
            x: x0,
            y: y0,
            w: x1.saturating_sub(x0).max(1),
            h: y1.saturating_sub(y0).max(1),
        }
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn union(&self, other: &BBox) -> BBox {
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        BBox::from_corners(x0, y0, self.right().max(other.right()), self.bottom().max(other.bottom()))
    }

    pub fn intersection_area(&self, other: &BBox) -> u64 {
        let w = self.right().min(other.right()).saturating_sub(self.x.max(other.x));
        let h = self.bottom().min(other.bottom()).saturating_sub(self.y.max(other.y));
        w as u64 * h as u64
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn x_overlap(&self, other: &BBox) -> u32 {
        self.right().min(other.right()).saturating_sub(self.x.max(other.x))
    }

    pub fn contains(&self, other: &BBox) -> bool {
        other.x >= self.x && other.y >= self.y && other.right() <= self.right() && other.bottom() <= self.bottom()
    }

    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        self.right() <= width && self.bottom() <= height
    }

    /// Intersection with the page `[0, width) x [0, height)`, if non-empty.
    pub fn clamp_to(&self, width: u32, height: u32) -> Option<BBox> {
        let x1 = self.right().min(width);
        let y1 = self.bottom().min(height);
        if self.x >= x1 || self.y >= y1 {
            None
        } else {
            Some(BBox::from_corners(self.x, self.y, x1, y1))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharMetrics {
    pub char_height: u32,
    pub line_gap: u32,
    pub space_width: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutLine {
    pub line_box: BBox,
    pub words: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PageLayout {
    pub lines: Vec<LayoutLine>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    /// Rows/columns with at most this many foreground pixels count as empty.
    pub noise_floor: u32,
    /// Bands closer than this fraction of the line gap are merged.
    pub merge_fraction: f64,
    /// Inter-word gap threshold as a fraction of the character height.
    pub space_fraction: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            noise_floor: 2,
            merge_fraction: 0.3,
            space_fraction: 0.3,
        }
    }
}

/// Maximal runs `[start, end)` where `pred` holds.
fn runs(values: &[u32], pred: impl Fn(u32) -> bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &v) in values.iter().enumerate() {
        match (pred(v), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, values.len()));
    }
    out
}

fn lower_median(mut v: Vec<u32>) -> u32 {
    v.sort_unstable();
    v[(v.len() - 1) / 2]
}

fn bands(mask: &BinaryImage, noise_floor: u32) -> Vec<(usize, usize)> {
    let profile = projection(mask, Axis::Horizontal);
    let mut found = runs(&profile, |c| c > noise_floor);
    if found.is_empty() {
        found = runs(&profile, |c| c > 0);
    }
    found
}

pub fn estimate_char_metrics(mask: &BinaryImage) -> Result<CharMetrics> {
    estimate_char_metrics_with(mask, &SegmentParams::default())
}

/// Median band height and median inter-band gap of the horizontal profile.
pub fn estimate_char_metrics_with(mask: &BinaryImage, params: &SegmentParams) -> Result<CharMetrics> {
    if mask.count() == 0 {
        return Err(Error::BlankImage);
    }
    let found = bands(mask, params.noise_floor);
    let char_height = lower_median(found.iter().map(|&(a, b)| (b - a) as u32).collect()).max(1);
    let gaps: Vec<u32> = found.windows(2).map(|w| (w[1].0 - w[0].1) as u32).collect();
    let line_gap = if gaps.is_empty() { char_height } else { lower_median(gaps).max(1) };
    let space_width = ((params.space_fraction * char_height as f64 + 0.5).floor() as u32).max(2);
    Ok(CharMetrics {
        char_height,
        line_gap,
        space_width,
    })
}

/// Tight box of the foreground inside `[x0, x1) x [y0, y1)`.
fn tighten(mask: &BinaryImage, x0: u32, y0: u32, x1: u32, y1: u32) -> Option<BBox> {
    let (mut minx, mut miny, mut maxx, mut maxy) = (u32::MAX, u32::MAX, 0, 0);
    for y in y0..y1 {
        for x in x0..x1 {
            if mask.get(x, y) {
                minx = minx.min(x);
                miny = miny.min(y);
                maxx = maxx.max(x);
                maxy = maxy.max(y);
            }
        }
    }
    (minx != u32::MAX).then(|| BBox::from_corners(minx, miny, maxx + 1, maxy + 1))
}

pub fn segment_lines(mask: &BinaryImage, metrics: &CharMetrics) -> Vec<BBox> {
    segment_lines_with(mask, metrics, &SegmentParams::default())
}

pub fn segment_lines_with(mask: &BinaryImage, metrics: &CharMetrics, params: &SegmentParams) -> Vec<BBox> {
    if mask.count() == 0 {
        return Vec::new();
    }
    let profile = projection(mask, Axis::Horizontal);
    let raw = runs(&profile, |c| c > params.noise_floor);
    let merge_below = params.merge_fraction * metrics.line_gap as f64;
    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(raw.len());
    for band in raw {
        match merged.last_mut() {
            Some(last) if ((band.0 - last.1) as f64) < merge_below => last.1 = band.1,
            _ => merged.push(band),
        }
    }
    merged
        .into_iter()
        .filter_map(|(a, b)| tighten(mask, 0, a as u32, mask.width(), b as u32))
        .collect()
}

/// Splits a line strip into words: columns are marked occupied when they hold
/// any ink, interior gaps narrower than the closing width are bridged, and
/// each remaining run becomes one word box.
pub fn segment_words(mask: &BinaryImage, line: &BBox, metrics: &CharMetrics) -> Vec<BBox> {
    let x1 = line.right().min(mask.width());
    let y1 = line.bottom().min(mask.height());
    let occupied: Vec<u32> = (line.x..x1)
        .map(|x| (line.y..y1).any(|y| mask.get(x, y)) as u32)
        .collect();
    let closing = metrics.space_width.saturating_sub(1).max(1) as usize;
    let mut spans = runs(&occupied, |c| c > 0);
    // closing with a flat window of `closing` pixels fills interior gaps shorter than it
    let mut bridged: Vec<(usize, usize)> = Vec::with_capacity(spans.len());
    for span in spans.drain(..) {
        match bridged.last_mut() {
            Some(last) if span.0 - last.1 < closing => last.1 = span.1,
            _ => bridged.push(span),
        }
    }
    bridged
        .into_iter()
        .filter_map(|(a, b)| tighten(mask, line.x + a as u32, line.y, line.x + b as u32, y1))
        .collect()
}

pub fn layout_mask(mask: &BinaryImage) -> Result<PageLayout> {
    let metrics = estimate_char_metrics(mask)?;
    let lines = segment_lines(mask, &metrics)
        .into_iter()
        .map(|line_box| LayoutLine {
            words: segment_words(mask, &line_box, &metrics),
            line_box,
        })
        .collect();
    Ok(PageLayout { lines })
}

/// Binarize, measure, then cut into lines and words.
pub fn layout_page(img: &GrayImage) -> Result<PageLayout> {
    layout_mask(&binarize(img))
}
