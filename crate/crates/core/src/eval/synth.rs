//! Seeded generator of reference/test page pairs with known modifications.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::font::{self, GLYPH_HEIGHT, LETTER_GAP, WORD_GAP};
use super::{GroundTruth, Side, TruthEntry};
use crate::diff::ModificationKind;
use crate::error::{Error, Result};
use crate::ocr::{confusable_class, write_hocr, DocumentText, TextLine, TextPoint};
use crate::raster::GrayImage;
use crate::segment::BBox;
use crate::textmatch::{coeff_ocr_kernels, line_similarity, MatchParams};

const MARGIN: u32 = 40;
/// Blank font rows between two text lines.
const LINE_GAP: u32 = 8;
/// Glyph cells that must differ for a character substitution to count as visible.
const MIN_GLYPH_DIFF: usize = 6;
const RETRIES: usize = 200;

const VOCABULARY: &[&str] = &[
    "SALAIRE", "BRUT", "NET", "PAYER", "COTISATION", "CSG", "CRDS", "RETRAITE", "CHOMAGE", "MALADIE", "TOTAL",
    "HEURES", "TAUX", "BASE", "MONTANT", "PRIME", "CONGES", "PAYES", "EMPLOYEUR", "SALARIE", "PERIODE", "DU",
    "AU", "MATRICULE", "EMPLOI", "COEFFICIENT", "INDEMNITE", "TRANSPORT", "MUTUELLE", "PREVOYANCE", "URSSAF",
    "SIRET", "CUMUL", "IMPOSABLE", "ABSENCE", "ANCIENNETE", "ECHELON", "NIVEAU", "CADRE", "AGIRC", "ARRCO",
    "VIEILLESSE", "PLAFONNEE", "ALLOCATIONS", "FAMILIALES", "ACCIDENT", "TRAVAIL", "FORFAIT", "REPAS",
    "AVANTAGE", "NATURE", "ACOMPTE", "VIREMENT", "BANQUE", "DATE", "PAIEMENT", "CONVENTION", "COLLECTIVE",
    "CODE", "ADRESSE", "RUE", "PARIS", "LYON", "SERVICE", "POSTE", "HORAIRE", "MENSUEL", "ANNUEL", "NUIT",
    "DIMANCHE", "JOUR", "FERIE", "RAPPEL", "RETENUE", "AVANCE", "FRAIS", "PROFESSIONNELS", "TITRE", "CHEQUE",
    "DEJEUNER", "SOCIETE", "GENERALE", "ASSURANCE", "CHARGES", "PATRONALES", "SALARIALES", "SOLDE", "EXERCICE",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    /// One character of a word replaced by a visibly different one.
    SubstituteChars,
    ReplaceWord,
    InsertWord,
    DeleteWord,
    InsertLine,
    DeleteLine,
}

impl EditKind {
    fn is_word(&self) -> bool {
        !matches!(self, EditKind::InsertLine | EditKind::DeleteLine)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditSpec {
    pub kind: EditKind,
    pub count: usize,
}

/// Per-character rates at which the simulated OCR misreads the test page.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct OcrNoise {
    /// Letter case flipped.
    pub case_flip: f64,
    /// `O` read as `0` and back.
    pub o0_swap: f64,
    /// Shape confusions the kernel normalization does not absorb (`5`/`S`, `8`/`B`, ...).
    pub confusion: f64,
}

const CONFUSIONS: &[(char, char)] = &[
    ('5', 'S'),
    ('8', 'B'),
    ('6', 'G'),
    ('2', 'Z'),
    ('E', 'F'),
    ('U', 'V'),
    ('M', 'N'),
    ('R', 'P'),
    ('C', 'G'),
    ('H', 'N'),
    ('7', 'T'),
    ('4', 'A'),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub category: String,
    pub lines: usize,
    /// Inclusive range of words per generated line.
    pub words_per_line: (usize, usize),
    pub edits: Vec<EditSpec>,
    /// Test-page words are displaced by up to this many pixels in x and y.
    pub jitter: u32,
    /// Fraction of pixels replaced by black or white on both pages.
    pub noise: f64,
    pub ocr_noise: OcrNoise,
    /// Pixels per font cell.
    pub scale: u32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            category: "synthetic".to_string(),
            lines: 12,
            words_per_line: (3, 6),
            edits: Vec::new(),
            jitter: 0,
            noise: 0.0,
            ocr_noise: OcrNoise::default(),
            scale: 3,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let (lo, hi) = self.words_per_line;
        if lo < 3 || hi < lo || hi > 12 {
            return bad(format!("words_per_line must satisfy 3 <= min <= max <= 12, got {lo}..{hi}"));
        }
        if self.lines == 0 || self.lines > 200 {
            return bad(format!("lines must be within 1..=200, got {}", self.lines));
        }
        if self.scale == 0 || self.scale > 8 {
            return bad(format!("scale must be within 1..=8, got {}", self.scale));
        }
        if self.jitter > 3 {
            return bad(format!("jitter must be at most 3 pixels, got {}", self.jitter));
        }
        if !(0.0..=0.5).contains(&self.noise) {
            return bad(format!("noise must be within [0, 0.5], got {}", self.noise));
        }
        let o = &self.ocr_noise;
        for (name, v) in [("case_flip", o.case_flip), ("o0_swap", o.o0_swap), ("confusion", o.confusion)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("ocr_noise.{name} must be within [0, 1], got {v}"));
            }
        }
        let touched: usize = self
            .edits
            .iter()
            .filter(|e| e.kind.is_word() || e.kind == EditKind::DeleteLine)
            .map(|e| e.count)
            .sum();
        if touched > self.lines {
            return bad(format!(
                "{touched} word edits and line deletions need distinct lines but only {} exist",
                self.lines
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub ref_img: GrayImage,
    pub test_img: GrayImage,
    pub truth: GroundTruth,
    /// Exact text of the reference page.
    pub ref_text: DocumentText,
    /// Text of the test page as the simulated OCR read it.
    pub test_text: DocumentText,
    pub ref_hocr: String,
    pub test_hocr: String,
}

fn token(rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..10) {
        0..=5 => VOCABULARY.choose(rng).unwrap().to_string(),
        6 | 7 => format!("{},{:02}", rng.random_range(10..10000), rng.random_range(0..100)),
        8 => format!(
            "{:02}/{:02}/{:02}",
            rng.random_range(1..29),
            rng.random_range(1..13),
            rng.random_range(0..100)
        ),
        _ => format!("{}", rng.random_range(100..100000)),
    }
}

fn kernel(s: &str) -> String {
    crate::ocr::normalize_kernel(s)
}

fn coordinated(a: &str, b: &str, p: &MatchParams) -> bool {
    coeff_ocr_kernels(&kernel(a), &kernel(b)) > p.word_ocr_simil
}

fn points(words: &[String]) -> Vec<TextPoint> {
    words.iter().map(|w| TextPoint::new(w, BBox::new(0, 0, 1, 1), 1.0)).collect()
}

/// A token that coordinates with none of `avoid`.
fn fresh_token(rng: &mut ChaCha8Rng, avoid: &[String], p: &MatchParams) -> String {
    for _ in 0..RETRIES {
        let t = token(rng);
        if !avoid.iter().any(|a| coordinated(a, &t, p)) {
            return t;
        }
    }
    panic!("vocabulary exhausted while drawing a distinct word");
}

/// A line whose words are mutually distinct and which does not coordinate
/// with any line in `others`.
fn fresh_line(rng: &mut ChaCha8Rng, spec: &SynthSpec, others: &[Vec<String>], p: &MatchParams) -> Vec<String> {
    let (lo, hi) = spec.words_per_line;
    for _ in 0..RETRIES {
        let n = rng.random_range(lo..=hi);
        let mut words: Vec<String> = Vec::with_capacity(n);
        for _ in 0..n {
            let t = fresh_token(rng, &words, p);
            words.push(t);
        }
        let pts = points(&words);
        if others.iter().all(|o| line_similarity(&points(o), &pts, p) <= p.line_simil) {
            return words;
        }
    }
    panic!("could not draw a line distinct from the rest of the page");
}

fn glyph_diff(a: char, b: char) -> usize {
    let (Some(ga), Some(gb)) = (font::cell(a), font::cell(b)) else {
        return 0;
    };
    (0..7).map(|y| (0..5).filter(|&x| ga[y][x] != gb[y][x]).count()).sum()
}

fn substitutes(c: char) -> Vec<char> {
    let pool: Vec<char> = if c.is_ascii_digit() {
        ('0'..='9').collect()
    } else if c.is_ascii_uppercase() {
        ('A'..='Z').collect()
    } else {
        return Vec::new();
    };
    let class = confusable_class(c.to_ascii_lowercase());
    pool.into_iter()
        .filter(|&d| d != c && confusable_class(d.to_ascii_lowercase()) != class && glyph_diff(c, d) >= MIN_GLYPH_DIFF)
        .collect()
}

/// Applies a word edit to `words`; returns the index of the affected word
/// (in `words` after the edit, or of the removed word for deletions).
fn apply_word_edit(rng: &mut ChaCha8Rng, kind: EditKind, words: &mut Vec<String>, p: &MatchParams) -> usize {
    match kind {
        EditKind::SubstituteChars => {
            for _ in 0..RETRIES {
                let wi = rng.random_range(0..words.len());
                let chars: Vec<char> = words[wi].chars().collect();
                let ci = rng.random_range(0..chars.len());
                let options = substitutes(chars[ci]);
                let Some(&d) = options.choose(rng) else {
                    continue;
                };
                let mut new_chars = chars.clone();
                new_chars[ci] = d;
                let new: String = new_chars.into_iter().collect();
                let others: Vec<String> = words.iter().enumerate().filter(|(i, _)| *i != wi).map(|(_, w)| w.clone()).collect();
                if coordinated(&words[wi], &new, p) || others.iter().any(|o| coordinated(o, &new, p)) {
                    continue;
                }
                words[wi] = new;
                return wi;
            }
            apply_word_edit(rng, EditKind::ReplaceWord, words, p)
        }
        EditKind::ReplaceWord => {
            let wi = rng.random_range(0..words.len());
            let new = fresh_token(rng, words, p);
            words[wi] = new;
            wi
        }
        EditKind::InsertWord => {
            let wi = rng.random_range(0..=words.len());
            let new = fresh_token(rng, words, p);
            words.insert(wi, new);
            wi
        }
        EditKind::DeleteWord => {
            let wi = rng.random_range(0..words.len());
            words.remove(wi);
            wi
        }
        EditKind::InsertLine | EditKind::DeleteLine => unreachable!("line edits are planned separately"),
    }
}

fn perturb(rng: &mut ChaCha8Rng, word: &str, noise: &OcrNoise) -> String {
    word.chars()
        .map(|c| {
            if c.is_ascii_alphabetic() && noise.case_flip > 0.0 && rng.random_bool(noise.case_flip) {
                return if c.is_ascii_uppercase() { c.to_ascii_lowercase() } else { c.to_ascii_uppercase() };
            }
            if (c == 'O' || c == '0') && noise.o0_swap > 0.0 && rng.random_bool(noise.o0_swap) {
                return if c == 'O' { '0' } else { 'O' };
            }
            if noise.confusion > 0.0 {
                let partner = CONFUSIONS
                    .iter()
                    .find_map(|&(a, b)| if a == c { Some(b) } else if b == c { Some(a) } else { None });
                if let Some(d) = partner {
                    if rng.random_bool(noise.confusion) {
                        return d;
                    }
                }
            }
            c
        })
        .collect()
}

struct Placed {
    text: String,
    x: u32,
    y: u32,
    bbox: BBox,
}

/// Ink bounds of a word drawn with its top-left font cell at `(x, y)`.
fn word_bbox(text: &str, x: u32, y: u32, scale: u32) -> BBox {
    let mut top = GLYPH_HEIGHT;
    let mut bottom = 0;
    for c in text.chars() {
        let g = font::glyph(c).expect("generated text uses supported glyphs");
        for row in 0..GLYPH_HEIGHT {
            if g.bits[(row * g.width) as usize..((row + 1) * g.width) as usize].iter().any(|&b| b) {
                top = top.min(row);
                bottom = bottom.max(row + 1);
            }
        }
    }
    let width = font::word_width(text).expect("supported glyphs");
    BBox::new(x, y + top * scale, width * scale, (bottom - top) * scale)
}

fn place_lines(
    lines: &[Vec<String>],
    scale: u32,
    mut jitter: impl FnMut() -> (i32, i32),
) -> Vec<Vec<Placed>> {
    let pitch = (GLYPH_HEIGHT + LINE_GAP) * scale;
    lines
        .iter()
        .enumerate()
        .map(|(row, words)| {
            let mut cursor = MARGIN;
            let top = MARGIN + row as u32 * pitch;
            words
                .iter()
                .map(|w| {
                    let (dx, dy) = jitter();
                    let x = (cursor as i32 + dx) as u32;
                    let y = (top as i32 + dy) as u32;
                    cursor += (font::word_width(w).unwrap() + WORD_GAP) * scale;
                    Placed {
                        text: w.clone(),
                        x,
                        y,
                        bbox: word_bbox(w, x, y, scale),
                    }
                })
                .collect()
        })
        .collect()
}

fn render(lines: &[Vec<Placed>], width: u32, height: u32, scale: u32) -> GrayImage {
    let mut img = GrayImage::filled(width, height, 255);
    for p in lines.iter().flatten() {
        let mut gx = p.x;
        for c in p.text.chars() {
            let g = font::glyph(c).unwrap();
            for row in 0..GLYPH_HEIGHT {
                for col in 0..g.width {
                    if g.bits[(row * g.width + col) as usize] {
                        for yy in 0..scale {
                            for xx in 0..scale {
                                img.set(gx + col * scale + xx, p.y + row * scale + yy, 0);
                            }
                        }
                    }
                }
            }
            gx += (g.width + LETTER_GAP) * scale;
        }
    }
    img
}

fn salt_and_pepper(rng: &mut ChaCha8Rng, img: &mut GrayImage, fraction: f64) {
    if fraction <= 0.0 {
        return;
    }
    for v in img.data_mut() {
        if rng.random_bool(fraction) {
            *v = if rng.random_bool(0.5) { 0 } else { 255 };
        }
    }
}

fn to_text(lines: &[Vec<Placed>], raw: impl Fn(usize, usize, &str) -> String, page: (u32, u32)) -> DocumentText {
    DocumentText {
        lines: lines
            .iter()
            .enumerate()
            .map(|(li, l)| {
                let words: Vec<TextPoint> = l
                    .iter()
                    .enumerate()
                    .map(|(wi, p)| TextPoint::new(&raw(li, wi, &p.text), p.bbox, 1.0))
                    .collect();
                TextLine {
                    bbox: line_box(l),
                    words,
                }
            })
            .collect(),
        page_size: page,
    }
}

fn line_box(l: &[Placed]) -> BBox {
    l.iter().map(|p| p.bbox).reduce(|a, b| a.union(&b)).expect("lines are never empty")
}

/// What happened to a test line relative to the reference.
enum TestLine {
    /// Copied from reference line `i`, possibly with one word edit.
    Kept { source: usize, edit: Option<(EditKind, usize)> },
    Inserted,
}

pub fn generate_pair(spec: &SynthSpec) -> Result<SyntheticPair> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = MatchParams::default();

    let mut ref_lines: Vec<Vec<String>> = Vec::with_capacity(spec.lines);
    for _ in 0..spec.lines {
        let line = fresh_line(&mut rng, spec, &ref_lines, &p);
        ref_lines.push(line);
    }

    let mut word_edits: Vec<EditKind> = Vec::new();
    let (mut inserts, mut deletes) = (0, 0);
    for e in &spec.edits {
        match e.kind {
            EditKind::InsertLine => inserts += e.count,
            EditKind::DeleteLine => deletes += e.count,
            k => word_edits.extend(std::iter::repeat_n(k, e.count)),
        }
    }
    word_edits.shuffle(&mut rng);
    let mut order: Vec<usize> = (0..spec.lines).collect();
    order.shuffle(&mut rng);
    let deleted: BTreeSet<usize> = order[..deletes].iter().copied().collect();
    let mut edit_of: Vec<Option<EditKind>> = vec![None; spec.lines];
    for (&line, &kind) in order[deletes..].iter().zip(&word_edits) {
        edit_of[line] = Some(kind);
    }
    // inserted lines go before reference line `gap` (or at the end)
    let mut gaps: Vec<usize> = (0..inserts).map(|_| rng.random_range(0..=spec.lines)).collect();
    gaps.sort_unstable();

    let mut test_lines: Vec<Vec<String>> = Vec::new();
    let mut test_kind: Vec<TestLine> = Vec::new();
    let mut deleted_words: Vec<(usize, usize)> = Vec::new();
    let mut all_lines = ref_lines.clone();
    let mut next_gap = 0;
    for gap in 0..=spec.lines {
        while next_gap < gaps.len() && gaps[next_gap] == gap {
            let line = fresh_line(&mut rng, spec, &all_lines, &p);
            all_lines.push(line.clone());
            test_lines.push(line);
            test_kind.push(TestLine::Inserted);
            next_gap += 1;
        }
        if gap == spec.lines || deleted.contains(&gap) {
            continue;
        }
        let mut words = ref_lines[gap].clone();
        let edit = edit_of[gap].map(|kind| {
            let wi = apply_word_edit(&mut rng, kind, &mut words, &p);
            if kind == EditKind::DeleteWord {
                deleted_words.push((gap, wi));
            }
            (kind, wi)
        });
        test_lines.push(words);
        test_kind.push(TestLine::Kept { source: gap, edit });
    }

    let scale = spec.scale;
    let ref_placed = place_lines(&ref_lines, scale, || (0, 0));
    let j = spec.jitter as i32;
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let test_placed = place_lines(&test_lines, scale, || {
        if j == 0 {
            (0, 0)
        } else {
            (jitter_rng.random_range(-j..=j), jitter_rng.random_range(-j..=j))
        }
    });

    let extent = |lines: &[Vec<Placed>]| {
        lines.iter().flatten().fold((0, 0), |(w, h), p| (w.max(p.bbox.right()), h.max(p.bbox.bottom())))
    };
    let (rw, rh) = extent(&ref_placed);
    let (tw, th) = extent(&test_placed);
    let width = rw.max(tw) + MARGIN;
    let height = rh.max(th) + MARGIN;

    let mut ref_img = render(&ref_placed, width, height, scale);
    let mut test_img = render(&test_placed, width, height, scale);
    salt_and_pepper(&mut rng, &mut ref_img, spec.noise);
    salt_and_pepper(&mut rng, &mut test_img, spec.noise);

    let mut entries = Vec::new();
    for (ti, kind) in test_kind.iter().enumerate() {
        match kind {
            TestLine::Inserted => entries.push(TruthEntry {
                bbox: line_box(&test_placed[ti]),
                kind: ModificationKind::LineInserted,
                side: Side::Test,
            }),
            TestLine::Kept {
                edit: Some((k, wi)), ..
            } if *k != EditKind::DeleteWord => entries.push(TruthEntry {
                bbox: test_placed[ti][*wi].bbox,
                kind: if *k == EditKind::InsertWord {
                    ModificationKind::WordInserted
                } else {
                    ModificationKind::WordChanged
                },
                side: Side::Test,
            }),
            TestLine::Kept { .. } => {}
        }
    }
    for &(li, wi) in &deleted_words {
        entries.push(TruthEntry {
            bbox: ref_placed[li][wi].bbox,
            kind: ModificationKind::WordDeleted,
            side: Side::Ref,
        });
    }
    for &li in &deleted {
        entries.push(TruthEntry {
            bbox: line_box(&ref_placed[li]),
            kind: ModificationKind::LineDeleted,
            side: Side::Ref,
        });
    }
    debug_assert!(test_kind.iter().all(|k| !matches!(k, TestLine::Kept { source, .. } if deleted.contains(source))));

    let page = (width, height);
    let ref_text = to_text(&ref_placed, |_, _, w| w.to_string(), page);
    let misread: Vec<Vec<String>> = test_placed
        .iter()
        .map(|l| l.iter().map(|w| perturb(&mut rng, &w.text, &spec.ocr_noise)).collect())
        .collect();
    let test_text = to_text(&test_placed, |li, wi, _| misread[li][wi].clone(), page);

    Ok(SyntheticPair {
        ref_hocr: write_hocr(&ref_text, "ref.png"),
        test_hocr: write_hocr(&test_text, "test.png"),
        ref_img,
        test_img,
        truth: GroundTruth {
            page,
            entries,
            category: Some(spec.category.clone()),
        },
        ref_text,
        test_text,
    })
}
