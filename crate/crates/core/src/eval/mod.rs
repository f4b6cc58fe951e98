//! Ground truth, report-vs-truth matching, precision/recall and corpus runs.

pub mod font;
mod synth;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use synth::{generate_pair, EditKind, EditSpec, OcrNoise, SynthSpec, SyntheticPair};

use crate::diff::{compare_documents, compare_images, ComparisonReport, DiffConfig, DocumentInput, ModificationKind};
use crate::error::{Error, Result};
use crate::ocr::parse_hocr;
use crate::raster::load_image;
use crate::segment::{layout_page, BBox, PageLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Ref,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthEntry {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub kind: ModificationKind,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Word,
    /// Entries are character boxes to be grouped into words.
    Char,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub page: (u32, u32),
    pub entries: Vec<TruthEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

impl GroundTruth {
    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.page;
        for e in &self.entries {
            if e.bbox.w == 0 || e.bbox.h == 0 || !e.bbox.fits_in(w, h) {
                return Err(Error::InvalidCorpus(format!(
                    "truth box {:?} lies outside the {w}x{h} page",
                    <[u32; 4]>::from(e.bbox)
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("truth serializes");
        s.push('\n');
        s
    }
}

#[derive(Deserialize)]
struct TruthFile {
    page: (u32, u32),
    entries: Vec<TruthEntry>,
    #[serde(default)]
    category: Option<String>,
    #[serde(default)]
    granularity: Granularity,
}

/// Reads a truth file. Character-level files are grouped into words using
/// the layout returned by `layout` for the side the entries belong to.
pub fn load_truth(path: &Path, layout: impl Fn(Side) -> Result<PageLayout>) -> Result<GroundTruth> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidCorpus(format!("{}: {e}", path.display())))?;
    let file: TruthFile =
        serde_json::from_str(&text).map_err(|e| Error::InvalidCorpus(format!("{}: {e}", path.display())))?;
    let mut truth = GroundTruth {
        page: file.page,
        entries: file.entries,
        category: file.category,
    };
    truth.validate()?;
    if file.granularity == Granularity::Char {
        let mut words = Vec::new();
        for side in [Side::Ref, Side::Test] {
            let chars: Vec<&TruthEntry> = truth.entries.iter().filter(|e| e.side == side).collect();
            if chars.is_empty() {
                continue;
            }
            let boxes: Vec<BBox> = chars.iter().map(|e| e.bbox).collect();
            let layout = layout(side)?;
            for (bbox, members) in group_chars(&boxes, &layout) {
                words.push(TruthEntry {
                    bbox,
                    kind: chars[members[0]].kind,
                    side,
                });
            }
        }
        truth.entries = words;
    }
    Ok(truth)
}

/// Groups character boxes by the word box they overlap most, returning each
/// group's box with the indices of its characters. Words come first in
/// layout order, then characters that overlap no word, in input order.
fn group_chars(char_boxes: &[BBox], layout: &PageLayout) -> Vec<(BBox, Vec<usize>)> {
    let words: Vec<BBox> = layout.lines.iter().flat_map(|l| l.words.iter().copied()).collect();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); words.len()];
    let mut strays = Vec::new();
    for (ci, c) in char_boxes.iter().enumerate() {
        let best = words
            .iter()
            .enumerate()
            .map(|(wi, w)| (wi, w.intersection_area(c)))
            .filter(|&(_, a)| a > 0)
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)));
        match best {
            Some((wi, _)) => groups[wi].push(ci),
            None => strays.push(ci),
        }
    }
    let mut out: Vec<(BBox, Vec<usize>)> = groups
        .into_iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .map(|(wi, g)| (words[wi], g))
        .collect();
    out.extend(strays.into_iter().map(|ci| (char_boxes[ci], vec![ci])));
    out
}

/// One truth box per word touched by at least one character box; characters
/// outside every word keep their own box.
pub fn aggregate_chars_to_words(char_boxes: &[BBox], layout: &PageLayout) -> Vec<BBox> {
    group_chars(char_boxes, layout).into_iter().map(|g| g.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    /// `(truth index, report modification index)`
    #[serde(skip)]
    pub matched: Vec<(usize, usize)>,
}

pub fn precision(tp: usize, fp: usize) -> f64 {
    if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    }
}

pub fn recall(tp: usize, fn_: usize) -> f64 {
    if tp + fn_ == 0 {
        1.0
    } else {
        tp as f64 / (tp + fn_) as f64
    }
}

impl EvalResult {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        EvalResult {
            tp,
            fp,
            fn_,
            precision: precision(tp, fp),
            recall: recall(tp, fn_),
            matched: Vec::new(),
        }
    }
}

/// Greedy one-to-one matching of report modifications to truth entries by
/// decreasing IoU. A modification can match a truth entry on a side where it
/// has a box; kinds are not compared. Ties are broken by the boxes
/// themselves, so the counts do not depend on the order of either list.
pub fn match_report(report: &ComparisonReport, truth: &GroundTruth, iou_threshold: f64) -> EvalResult {
    assert!(iou_threshold > 0.0 && iou_threshold <= 1.0, "IoU threshold must be in (0, 1]");
    let mut candidates: Vec<(f64, BBox, BBox, usize, usize)> = Vec::new();
    for (ti, t) in truth.entries.iter().enumerate() {
        for (mi, m) in report.modifications.iter().enumerate() {
            let own = match t.side {
                Side::Ref => m.ref_box,
                Side::Test => m.test_box,
            };
            if let Some(b) = own {
                let iou = b.iou(&t.bbox);
                if iou >= iou_threshold {
                    candidates.push((iou, t.bbox, b, ti, mi));
                }
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
            .then(a.4.cmp(&b.4))
    });
    let mut truth_used = vec![false; truth.entries.len()];
    let mut report_used = vec![false; report.modifications.len()];
    let mut matched = Vec::new();
    for (_, _, _, ti, mi) in candidates {
        if !truth_used[ti] && !report_used[mi] {
            truth_used[ti] = true;
            report_used[mi] = true;
            matched.push((ti, mi));
        }
    }
    matched.sort_unstable();
    let tp = matched.len();
    EvalResult {
        matched,
        ..EvalResult::from_counts(tp, report.modifications.len() - tp, truth.entries.len() - tp)
    }
}

/// Where the pairs of an experiment come from.
#[derive(Debug, Clone)]
pub enum Corpus {
    /// Generated in memory, one pair per spec.
    Synthetic(Vec<SynthSpec>),
    /// A directory with one sub-directory per pair (see [`read_corpus_dir`]).
    Directory(PathBuf),
}

/// Files of one pair in a corpus directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusPair {
    pub name: String,
    pub reference: DocumentInput,
    pub test: DocumentInput,
    pub truth: PathBuf,
}

const IMAGE_EXTENSIONS: &[&str] = &["png", "pgm", "pnm", "ppm", "pbm"];

fn find_image(dir: &Path, stem: &str) -> Option<PathBuf> {
    IMAGE_EXTENSIONS.iter().map(|e| dir.join(format!("{stem}.{e}"))).find(|p| p.is_file())
}

/// Lists the pairs of a corpus directory: every sub-directory holding
/// `ref.<img>`, `test.<img>` and `truth.json`, optionally with `ref.hocr` and
/// `test.hocr`. Sub-directories lacking an image or the truth file are still
/// listed so the run can flag them.
pub fn read_corpus_dir(dir: &Path) -> Result<Vec<CorpusPair>> {
    if !dir.is_dir() {
        return Err(Error::InvalidCorpus(format!("{} is not a directory", dir.display())));
    }
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    let mut pairs = Vec::new();
    for sub in subdirs {
        let hocr = |stem: &str| Some(sub.join(format!("{stem}.hocr"))).filter(|p| p.is_file());
        let input = |stem: &str| DocumentInput {
            image: find_image(&sub, stem).unwrap_or_else(|| sub.join(format!("{stem}.png"))),
            hocr: hocr(stem),
        };
        pairs.push(CorpusPair {
            name: sub.file_name().unwrap().to_string_lossy().into_owned(),
            reference: input("ref"),
            test: input("test"),
            truth: sub.join("truth.json"),
        });
    }
    if pairs.is_empty() {
        return Err(Error::InvalidCorpus(format!("{} contains no pair directories", dir.display())));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub name: String,
    pub category: String,
    pub outcome: std::result::Result<EvalResult, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryRow {
    pub category: String,
    /// Pairs that were evaluated; errored pairs are excluded.
    pub pairs: usize,
    pub errored: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub pairs: Vec<PairRecord>,
    /// Micro-averaged over every evaluated pair.
    pub aggregate: CategoryRow,
    /// One row per category, sorted by name.
    pub categories: Vec<CategoryRow>,
}

fn summarize<'a>(category: &str, records: impl Iterator<Item = &'a PairRecord>) -> CategoryRow {
    let (mut pairs, mut errored, mut tp, mut fp, mut fn_) = (0, 0, 0, 0, 0);
    for r in records {
        match &r.outcome {
            Ok(e) => {
                pairs += 1;
                tp += e.tp;
                fp += e.fp;
                fn_ += e.fn_;
            }
            Err(_) => errored += 1,
        }
    }
    CategoryRow {
        category: category.to_string(),
        pairs,
        errored,
        tp,
        fp,
        fn_,
        precision: precision(tp, fp),
        recall: recall(tp, fn_),
    }
}

fn evaluate_synthetic(spec: &SynthSpec, cfg: &DiffConfig, iou: f64) -> Result<EvalResult> {
    let pair = generate_pair(spec)?;
    let report = compare_images(&pair.ref_img, Some(pair.ref_text), &pair.test_img, Some(pair.test_text), cfg)?;
    Ok(match_report(&report, &pair.truth, iou))
}

fn evaluate_dir_pair(pair: &CorpusPair, cfg: &DiffConfig, iou: f64) -> (String, Result<EvalResult>) {
    let layout = |side: Side| -> Result<PageLayout> {
        let input = match side {
            Side::Ref => &pair.reference,
            Side::Test => &pair.test,
        };
        match &input.hocr {
            Some(h) => Ok(parse_hocr(&std::fs::read_to_string(h)?)?.to_layout()),
            None => layout_page(&load_image(&input.image)?),
        }
    };
    let truth = match load_truth(&pair.truth, layout) {
        Ok(t) => t,
        Err(e) => return ("unknown".to_string(), Err(e)),
    };
    let category = truth.category.clone().unwrap_or_else(|| "all".to_string());
    let result = compare_documents(&pair.reference, &pair.test, cfg).map(|r| match_report(&r, &truth, iou));
    (category, result)
}

/// Compares and scores every pair of the corpus, `jobs` pairs at a time
/// (all cores when `None`). Failing pairs are recorded, not fatal.
pub fn run_experiment(corpus: &Corpus, cfg: &DiffConfig, iou: f64, jobs: Option<usize>) -> Result<Experiment> {
    cfg.validate()?;
    if !(iou > 0.0 && iou <= 1.0) {
        return Err(Error::InvalidConfig(format!("IoU threshold must be in (0, 1], got {iou}")));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let pairs: Vec<PairRecord> = match corpus {
        Corpus::Synthetic(specs) => {
            if specs.is_empty() {
                return Err(Error::InvalidCorpus("corpus has no pairs".into()));
            }
            pool.install(|| {
                specs
                    .par_iter()
                    .enumerate()
                    .map(|(i, s)| PairRecord {
                        name: format!("pair_{i:04}"),
                        category: s.category.clone(),
                        outcome: evaluate_synthetic(s, cfg, iou).map_err(|e| e.to_string()),
                    })
                    .collect()
            })
        }
        Corpus::Directory(dir) => {
            let listed = read_corpus_dir(dir)?;
            pool.install(|| {
                listed
                    .par_iter()
                    .map(|p| {
                        let (category, outcome) = evaluate_dir_pair(p, cfg, iou);
                        PairRecord {
                            name: p.name.clone(),
                            category,
                            outcome: outcome.map_err(|e| e.to_string()),
                        }
                    })
                    .collect()
            })
        }
    };

    let mut by_category: BTreeMap<&str, Vec<&PairRecord>> = BTreeMap::new();
    for p in &pairs {
        by_category.entry(p.category.as_str()).or_default().push(p);
    }
    let categories = by_category.iter().map(|(c, rs)| summarize(c, rs.iter().copied())).collect();
    let aggregate = summarize("all (micro-average)", pairs.iter());
    Ok(Experiment {
        pairs,
        aggregate,
        categories,
    })
}
