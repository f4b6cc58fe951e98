//! Document comparison: coordinates lines and words of two pages and reports
//! what was changed, inserted or deleted.

mod annotate;
mod repair;
mod report;

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use annotate::{render_annotation, BLUE, MAGENTA, RED};
pub use repair::repair_split_merge;
pub use report::{parse_report_json, report_to_json};

use crate::error::{Error, Result, Stage};
use crate::ocr::{load_document_text, run_ocr, parse_hocr, DocumentText, OcrEngineConfig, TextPoint};
use crate::pixmatch::{coeff_pix, crop_word_with, PixParams};
use crate::raster::{auto_contrast, estimate_skew, load_image, rotate, GrayImage};
use crate::segment::BBox;
use crate::textmatch::{align_lines, align_monotone, align_words, coeff_ocr, MatchParams, WordAlignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModificationKind {
    WordChanged,
    WordInserted,
    WordDeleted,
    LineInserted,
    LineDeleted,
}

impl ModificationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModificationKind::WordChanged => "word_changed",
            ModificationKind::WordInserted => "word_inserted",
            ModificationKind::WordDeleted => "word_deleted",
            ModificationKind::LineInserted => "line_inserted",
            ModificationKind::LineDeleted => "line_deleted",
        }
    }

    pub fn is_line(&self) -> bool {
        matches!(self, ModificationKind::LineInserted | ModificationKind::LineDeleted)
    }

    /// The kind reported when reference and test are swapped.
    pub fn mirrored(&self) -> ModificationKind {
        match self {
            ModificationKind::WordChanged => ModificationKind::WordChanged,
            ModificationKind::WordInserted => ModificationKind::WordDeleted,
            ModificationKind::WordDeleted => ModificationKind::WordInserted,
            ModificationKind::LineInserted => ModificationKind::LineDeleted,
            ModificationKind::LineDeleted => ModificationKind::LineInserted,
        }
    }
}

/// `line` and `word` index the test document when the modification has a
/// test side, the reference document otherwise. `word` is the first word of
/// the span and is absent for line modifications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Modification {
    pub kind: ModificationKind,
    pub ref_box: Option<BBox>,
    pub test_box: Option<BBox>,
    pub ref_kernel: Option<String>,
    pub test_kernel: Option<String>,
    #[serde(rename = "line")]
    pub line_index: usize,
    #[serde(rename = "word")]
    pub word_index: Option<usize>,
    pub coeff_ocr: Option<f64>,
    pub coeff_pix: Option<f64>,
    /// `(line, word span)` in the reference document.
    #[serde(skip)]
    pub ref_pos: Option<(usize, Range<usize>)>,
    #[serde(skip)]
    pub test_pos: Option<(usize, Range<usize>)>,
}

impl Modification {
    /// The box used when matching against ground truth, and which side it
    /// lives on (`true` for test).
    pub fn primary_box(&self) -> (BBox, bool) {
        match (self.test_box, self.ref_box) {
            (Some(b), _) => (b, true),
            (None, Some(b)) => (b, false),
            (None, None) => unreachable!("modification without a box"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatedPair {
    pub ref_line: usize,
    pub test_line: usize,
    pub ref_words: Range<usize>,
    pub test_words: Range<usize>,
    pub ref_box: BBox,
    pub test_box: BBox,
    pub coeff_ocr: f64,
    /// Present when the pair was rescued by pixel comparison.
    pub coeff_pix: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pages {
    #[serde(rename = "ref")]
    pub reference: (u32, u32),
    pub test: (u32, u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub params: DiffConfig,
    pub pages: Pages,
    pub modifications: Vec<Modification>,
    pub coordinated_count: usize,
    #[serde(skip)]
    pub coordinated: Vec<CoordinatedPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Words coordinate by OCR text only.
    OcrOnly,
    /// Words the OCR could not coordinate get a second chance by pixel comparison.
    #[default]
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskewConfig {
    pub enabled: bool,
    /// Degrees searched on either side of zero.
    pub max_angle: f64,
    pub step: f64,
    /// Estimates smaller than this in magnitude are not corrected.
    pub min_angle: f64,
}

impl Default for DeskewConfig {
    fn default() -> Self {
        DeskewConfig {
            enabled: true,
            max_angle: 5.0,
            step: 0.1,
            min_angle: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContrastConfig {
    pub low_pct: f64,
    pub high_pct: f64,
}

impl Default for ContrastConfig {
    fn default() -> Self {
        ContrastConfig {
            low_pct: 0.01,
            high_pct: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct DiffConfig {
    pub mode: Mode,
    pub matching: MatchParams,
    pub pixel: PixParams,
    pub deskew: DeskewConfig,
    pub contrast: ContrastConfig,
    pub ocr: OcrEngineConfig,
}

fn fraction(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be within [0, 1], got {v}")))
    }
}

impl DiffConfig {
    pub fn validate(&self) -> Result<()> {
        fraction("matching.word_ocr_simil", self.matching.word_ocr_simil)?;
        fraction("matching.line_simil", self.matching.line_simil)?;
        let c = self.pixel.word_pixel_coeff;
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidConfig(format!("pixel.word_pixel_coeff must be non-negative, got {c}")));
        }
        self.pixel.range.validate()?;
        let d = &self.deskew;
        if d.enabled && !(d.step > 0.0 && d.step <= d.max_angle && d.max_angle <= 15.0) {
            return Err(Error::InvalidConfig(format!(
                "deskew needs 0 < step <= max_angle <= 15, got step {} max_angle {}",
                d.step, d.max_angle
            )));
        }
        if !(d.min_angle >= 0.0) {
            return Err(Error::InvalidConfig("deskew.min_angle must be non-negative".into()));
        }
        let ct = &self.contrast;
        fraction("contrast.low_pct", ct.low_pct)?;
        fraction("contrast.high_pct", ct.high_pct)?;
        if ct.low_pct >= ct.high_pct {
            return Err(Error::InvalidConfig("contrast.low_pct must be below contrast.high_pct".into()));
        }
        if !(self.ocr.timeout > 0.0) {
            return Err(Error::InvalidConfig("ocr.timeout must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentInput {
    pub image: PathBuf,
    /// Recognized text to use instead of running the OCR engine.
    pub hocr: Option<PathBuf>,
}

impl DocumentInput {
    pub fn new(image: impl Into<PathBuf>) -> Self {
        DocumentInput {
            image: image.into(),
            hocr: None,
        }
    }

    pub fn with_hocr(image: impl Into<PathBuf>, hocr: impl Into<PathBuf>) -> Self {
        DocumentInput {
            image: image.into(),
            hocr: Some(hocr.into()),
        }
    }
}

/// A page after contrast stretch and deskew, with its text in the same frame.
#[derive(Debug, Clone)]
pub struct PreparedPage {
    pub image: GrayImage,
    pub text: DocumentText,
    /// Correction applied, in degrees (the page was turned by minus this).
    pub skew: f64,
}

/// Where the source box of `rotate(img, angle)` lands, bounded and clamped.
fn rotate_box(b: BBox, angle: f64, width: u32, height: u32) -> BBox {
    let (sin, cos) = angle.to_radians().sin_cos();
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let corners = [
        (b.x as f64, b.y as f64),
        (b.right() as f64 - 1.0, b.y as f64),
        (b.x as f64, b.bottom() as f64 - 1.0),
        (b.right() as f64 - 1.0, b.bottom() as f64 - 1.0),
    ];
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for (x, y) in corners {
        let (a, c) = (x - cx, y - cy);
        let nx = cx + a * cos + c * sin;
        let ny = cy - a * sin + c * cos;
        x0 = x0.min(nx);
        y0 = y0.min(ny);
        x1 = x1.max(nx);
        y1 = y1.max(ny);
    }
    let clampx = |v: f64| v.round().clamp(0.0, width.saturating_sub(1) as f64) as u32;
    let clampy = |v: f64| v.round().clamp(0.0, height.saturating_sub(1) as f64) as u32;
    BBox::from_corners(clampx(x0), clampy(y0), clampx(x1) + 1, clampy(y1) + 1)
}

fn ocr_image(img: &GrayImage, cfg: &OcrEngineConfig) -> Result<DocumentText> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("page.png");
    img.save_png(&path)?;
    parse_hocr(&run_ocr(&path, cfg)?)
}

/// Stretches contrast, deskews, and brings the text into the deskewed frame.
/// Without `text` the OCR engine runs on the prepared image.
pub fn prepare_page(img: &GrayImage, text: Option<DocumentText>, cfg: &DiffConfig) -> Result<PreparedPage> {
    let img = auto_contrast(img, cfg.contrast.low_pct, cfg.contrast.high_pct);
    let mut skew = 0.0;
    if cfg.deskew.enabled {
        match estimate_skew(&img, cfg.deskew.max_angle, cfg.deskew.step) {
            Ok(est) if est.angle.abs() >= cfg.deskew.min_angle && est.angle != 0.0 => skew = est.angle,
            Ok(_) | Err(Error::BlankImage) => {}
            Err(e) => return Err(e.at(Stage::Preprocess)),
        }
    }
    let image = if skew != 0.0 { rotate(&img, -skew) } else { img };
    let (w, h) = (image.width(), image.height());
    let text = match text {
        Some(t) if skew != 0.0 => t.map_boxes(|b| rotate_box(b, -skew, w, h)),
        Some(t) => t,
        None => ocr_image(&image, &cfg.ocr).map_err(|e| e.at(Stage::Ocr))?,
    };
    Ok(PreparedPage { image, text, skew })
}

/// Full pipeline on two files on disk. Errors carry the failing stage.
/// Boxes in the report refer to the input images, before deskew.
pub fn compare_documents(reference: &DocumentInput, test: &DocumentInput, cfg: &DiffConfig) -> Result<ComparisonReport> {
    let ref_img = load_image(&reference.image).map_err(|e| e.at(Stage::LoadReference))?;
    let test_img = load_image(&test.image).map_err(|e| e.at(Stage::LoadTest))?;
    let text = |input: &DocumentInput| -> Result<Option<DocumentText>> {
        match &input.hocr {
            Some(path) => load_document_text(&input.image, &cfg.ocr, Some(path))
                .map(Some)
                .map_err(|e| e.at(Stage::Ocr)),
            None => Ok(None),
        }
    };
    let ref_page = prepare_page(&ref_img, text(reference)?, cfg)?;
    let test_page = prepare_page(&test_img, text(test)?, cfg)?;
    Ok(to_source_frame(compare_prepared(&ref_page, &test_page, cfg), &ref_page, &test_page))
}

/// Same as [`compare_documents`] for images already in memory.
pub fn compare_images(
    ref_img: &GrayImage,
    ref_text: Option<DocumentText>,
    test_img: &GrayImage,
    test_text: Option<DocumentText>,
    cfg: &DiffConfig,
) -> Result<ComparisonReport> {
    let ref_page = prepare_page(ref_img, ref_text, cfg)?;
    let test_page = prepare_page(test_img, test_text, cfg)?;
    Ok(to_source_frame(compare_prepared(&ref_page, &test_page, cfg), &ref_page, &test_page))
}

/// Moves the boxes of a report on prepared pages back onto the input images.
fn to_source_frame(mut report: ComparisonReport, reference: &PreparedPage, test: &PreparedPage) -> ComparisonReport {
    let back = |b: BBox, page: &PreparedPage| {
        if page.skew == 0.0 {
            b
        } else {
            rotate_box(b, page.skew, page.image.width(), page.image.height())
        }
    };
    for m in &mut report.modifications {
        m.ref_box = m.ref_box.map(|b| back(b, reference));
        m.test_box = m.test_box.map(|b| back(b, test));
    }
    for c in &mut report.coordinated {
        c.ref_box = back(c.ref_box, reference);
        c.test_box = back(c.test_box, test);
    }
    report
}

fn span_box(words: &[TextPoint], span: &Range<usize>) -> BBox {
    words[span.clone()]
        .iter()
        .map(|w| w.bbox)
        .reduce(|a, b| a.union(&b))
        .expect("non-empty span")
}

/// Pairs leftover reference and test words that sit in the same gap between
/// coordinated pairs: in order when the counts agree, otherwise by the
/// order-preserving matching with the largest horizontal overlap.
fn pair_positionally(r: &[TextPoint], t: &[TextPoint], al: &WordAlignment) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut gaps: Vec<(Range<usize>, Range<usize>)> = Vec::with_capacity(al.pairs.len() + 1);
    let (mut ri, mut ti) = (0, 0);
    for p in &al.pairs {
        gaps.push((ri..p.ref_span.start, ti..p.test_span.start));
        ri = p.ref_span.end;
        ti = p.test_span.end;
    }
    gaps.push((ri..r.len(), ti..t.len()));
    for (rg, tg) in gaps {
        if rg.is_empty() || tg.is_empty() {
            continue;
        }
        if rg.len() == tg.len() {
            out.extend(rg.zip(tg));
            continue;
        }
        let (rs, ts): (Vec<usize>, Vec<usize>) = (rg.collect(), tg.collect());
        let matched = align_monotone(rs.len(), ts.len(), |i, j| {
            let o = r[rs[i]].bbox.x_overlap(&t[ts[j]].bbox);
            (o > 0).then_some(o as f64)
        });
        out.extend(matched.into_iter().map(|(i, j, _)| (rs[i], ts[j])));
    }
    out
}

fn pixel_coefficient(ref_img: &GrayImage, rb: &BBox, test_img: &GrayImage, tb: &BBox, p: &PixParams) -> Option<f64> {
    let m = crop_word_with(ref_img, rb, p.mode).ok()?;
    let t = crop_word_with(test_img, tb, p.mode).ok()?;
    coeff_pix(&m, &t, &p.range).ok()
}

/// Compares two prepared pages. Infallible: pixel comparisons that cannot be
/// carried out (blank or out-of-page crops) leave the pair as changed.
pub fn compare_prepared(reference: &PreparedPage, test: &PreparedPage, cfg: &DiffConfig) -> ComparisonReport {
    let (rd, td) = (&reference.text, &test.text);
    let lines = align_lines(rd, td, &cfg.matching);
    let mut modifications = Vec::new();
    let mut coordinated = Vec::new();

    let line_mod = |kind: ModificationKind, idx: usize, doc: &DocumentText| {
        let bbox = doc.lines[idx].bbox;
        let deleted = kind == ModificationKind::LineDeleted;
        let kernel = doc.lines[idx].words.iter().map(|w| w.kernel.as_str()).collect::<Vec<_>>().join(" ");
        let pos = Some((idx, 0..doc.lines[idx].words.len()));
        Modification {
            kind,
            ref_box: deleted.then_some(bbox),
            test_box: (!deleted).then_some(bbox),
            ref_kernel: deleted.then(|| kernel.clone()),
            test_kernel: (!deleted).then_some(kernel),
            line_index: idx,
            word_index: None,
            coeff_ocr: None,
            coeff_pix: None,
            ref_pos: if deleted { pos.clone() } else { None },
            test_pos: if deleted { None } else { pos },
        }
    };

    // unpaired lines are reported in reading order between the paired ones
    let mut cursor = (0, 0);
    let emit_unpaired = |upto: (usize, usize), cursor: (usize, usize), mods: &mut Vec<Modification>| {
        for &i in lines.ref_only.iter().filter(|&&i| i >= cursor.0 && i < upto.0) {
            mods.push(line_mod(ModificationKind::LineDeleted, i, rd));
        }
        for &j in lines.test_only.iter().filter(|&&j| j >= cursor.1 && j < upto.1) {
            mods.push(line_mod(ModificationKind::LineInserted, j, td));
        }
    };

    for &(li, lj, _) in &lines.pairs {
        emit_unpaired((li, lj), cursor, &mut modifications);
        cursor = (li + 1, lj + 1);
        let (r, t) = (&rd.lines[li].words, &td.lines[lj].words);
        let al = repair_split_merge(r, t, align_words(r, t, &cfg.matching), &cfg.matching);
        for p in &al.pairs {
            coordinated.push(CoordinatedPair {
                ref_line: li,
                test_line: lj,
                ref_words: p.ref_span.clone(),
                test_words: p.test_span.clone(),
                ref_box: span_box(r, &p.ref_span),
                test_box: span_box(t, &p.test_span),
                coeff_ocr: p.coeff_ocr,
                coeff_pix: p.coeff_pix,
            });
        }

        let positional = pair_positionally(r, t, &al);
        let mut ref_taken = vec![false; r.len()];
        let mut test_taken = vec![false; t.len()];
        let mut line_mods = Vec::new();
        for &(i, j) in &positional {
            ref_taken[i] = true;
            test_taken[j] = true;
            let c_ocr = coeff_ocr(&r[i], &t[j]);
            let c_pix = match cfg.mode {
                Mode::Combined => pixel_coefficient(&reference.image, &r[i].bbox, &test.image, &t[j].bbox, &cfg.pixel),
                Mode::OcrOnly => None,
            };
            if c_pix.is_some_and(|c| c < cfg.pixel.word_pixel_coeff) {
                coordinated.push(CoordinatedPair {
                    ref_line: li,
                    test_line: lj,
                    ref_words: i..i + 1,
                    test_words: j..j + 1,
                    ref_box: r[i].bbox,
                    test_box: t[j].bbox,
                    coeff_ocr: c_ocr,
                    coeff_pix: c_pix,
                });
                continue;
            }
            line_mods.push(Modification {
                kind: ModificationKind::WordChanged,
                ref_box: Some(r[i].bbox),
                test_box: Some(t[j].bbox),
                ref_kernel: Some(r[i].kernel.clone()),
                test_kernel: Some(t[j].kernel.clone()),
                line_index: lj,
                word_index: Some(j),
                coeff_ocr: Some(c_ocr),
                coeff_pix: c_pix,
                ref_pos: Some((li, i..i + 1)),
                test_pos: Some((lj, j..j + 1)),
            });
        }
        for &i in al.ref_only.iter().filter(|&&i| !ref_taken[i]) {
            line_mods.push(Modification {
                kind: ModificationKind::WordDeleted,
                ref_box: Some(r[i].bbox),
                test_box: None,
                ref_kernel: Some(r[i].kernel.clone()),
                test_kernel: None,
                line_index: li,
                word_index: Some(i),
                coeff_ocr: None,
                coeff_pix: None,
                ref_pos: Some((li, i..i + 1)),
                test_pos: None,
            });
        }
        for &j in al.test_only.iter().filter(|&&j| !test_taken[j]) {
            line_mods.push(Modification {
                kind: ModificationKind::WordInserted,
                ref_box: None,
                test_box: Some(t[j].bbox),
                ref_kernel: None,
                test_kernel: Some(t[j].kernel.clone()),
                line_index: lj,
                word_index: Some(j),
                coeff_ocr: None,
                coeff_pix: None,
                ref_pos: None,
                test_pos: Some((lj, j..j + 1)),
            });
        }
        line_mods.sort_by_key(|m| m.primary_box().0.x);
        modifications.extend(line_mods);
    }
    emit_unpaired((rd.lines.len(), td.lines.len()), cursor, &mut modifications);
    coordinated.sort_by_key(|c| (c.ref_line, c.ref_words.start));

    let report = ComparisonReport {
        params: cfg.clone(),
        pages: Pages {
            reference: (reference.image.width(), reference.image.height()),
            test: (test.image.width(), test.image.height()),
        },
        coordinated_count: coordinated.len(),
        modifications,
        coordinated,
    };
    debug_assert!(check_partition(&report, rd, td).is_ok());
    report
}

/// Checks that every word of both documents is covered exactly once by the
/// coordinated pairs and the modifications.
pub fn check_partition(report: &ComparisonReport, ref_doc: &DocumentText, test_doc: &DocumentText) -> std::result::Result<(), String> {
    fn cover(doc: &DocumentText) -> Vec<Vec<u32>> {
        doc.lines.iter().map(|l| vec![0u32; l.words.len()]).collect()
    }
    let (mut rc, mut tc) = (cover(ref_doc), cover(test_doc));
    let mark = |c: &mut Vec<Vec<u32>>, line: usize, span: &Range<usize>| -> std::result::Result<(), String> {
        let row = c.get_mut(line).ok_or_else(|| format!("line {line} out of range"))?;
        for k in span.clone() {
            *row.get_mut(k).ok_or_else(|| format!("word {line}:{k} out of range"))? += 1;
        }
        Ok(())
    };
    for p in &report.coordinated {
        mark(&mut rc, p.ref_line, &p.ref_words)?;
        mark(&mut tc, p.test_line, &p.test_words)?;
    }
    for m in &report.modifications {
        if let Some((l, s)) = &m.ref_pos {
            mark(&mut rc, *l, s)?;
        }
        if let Some((l, s)) = &m.test_pos {
            mark(&mut tc, *l, s)?;
        }
    }
    for (side, c) in [("reference", &rc), ("test", &tc)] {
        for (l, row) in c.iter().enumerate() {
            if let Some(k) = row.iter().position(|&n| n != 1) {
                return Err(format!("{side} word {l}:{k} covered {} times", row[k]));
            }
        }
    }
    Ok(())
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
