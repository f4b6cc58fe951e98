//! OCR-based word similarity and order-preserving line/word coordination.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::ocr::{confusable_class, DocumentText, TextPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchParams {
    /// Words coordinate when their OCR coefficient is strictly above this.
    pub word_ocr_simil: f64,
    /// Lines coordinate when the share of coordinated words is strictly above this.
    pub line_simil: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            word_ocr_simil: 0.95,
            line_simil: 0.5,
        }
    }
}

/// A coordinated group of words. Plain alignments pair one word with one
/// word; split/merge repair may widen either span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordPair {
    pub ref_span: Range<usize>,
    pub test_span: Range<usize>,
    pub coeff_ocr: f64,
    /// Set when the pair was established by pixel comparison.
    pub coeff_pix: Option<f64>,
}

impl WordPair {
    pub fn one_to_one(ref_idx: usize, test_idx: usize, coeff_ocr: f64) -> Self {
        WordPair {
            ref_span: ref_idx..ref_idx + 1,
            test_span: test_idx..test_idx + 1,
            coeff_ocr,
            coeff_pix: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WordAlignment {
    /// Ordered by position; both spans strictly increase.
    pub pairs: Vec<WordPair>,
    pub ref_only: Vec<usize>,
    pub test_only: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LineAlignment {
    /// `(ref line, test line, line similarity)`, strictly increasing in both indices.
    pub pairs: Vec<(usize, usize, f64)>,
    pub ref_only: Vec<usize>,
    pub test_only: Vec<usize>,
}

fn classes(s: &str) -> Vec<char> {
    s.chars().map(confusable_class).collect()
}

fn levenshtein(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + (ca != cb) as usize;
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Levenshtein distance where characters of one confusable class (dashes,
/// quotes, O/0, I/l/1/|) substitute at no cost.
pub fn edit_distance(a: &str, b: &str) -> usize {
    levenshtein(&classes(a), &classes(b))
}

/// `1 - lev / max(len)`; two empty kernels are identical, one empty kernel
/// shares nothing with a non-empty one.
pub fn coeff_ocr_kernels(a: &str, b: &str) -> f64 {
    let (ca, cb) = (classes(a), classes(b));
    let longest = ca.len().max(cb.len());
    if longest == 0 {
        return 1.0;
    }
    if ca.is_empty() || cb.is_empty() {
        return 0.0;
    }
    1.0 - levenshtein(&ca, &cb) as f64 / longest as f64
}

pub fn coeff_ocr(w1: &TextPoint, w2: &TextPoint) -> f64 {
    coeff_ocr_kernels(&w1.kernel, &w2.kernel)
}

pub fn words_coordinated(w1: &TextPoint, w2: &TextPoint, p: &MatchParams) -> bool {
    coeff_ocr(w1, w2) > p.word_ocr_simil
}

#[derive(Clone, Copy)]
struct Cell {
    count: usize,
    total: f64,
}

impl Cell {
    fn beats(&self, other: &Cell) -> bool {
        self.count > other.count || (self.count == other.count && self.total > other.total)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Step {
    Pair,
    SkipRef,
    SkipTest,
}

/// Order-preserving matching of `0..n` against `0..m` maximizing the number
/// of matched pairs, then the summed score. `score(i, j)` returns `None` for
/// pairs that may not match.
pub(crate) fn align_monotone(n: usize, m: usize, score: impl Fn(usize, usize) -> Option<f64>) -> Vec<(usize, usize, f64)> {
    let mut table = vec![Cell { count: 0, total: 0.0 }; (n + 1) * (m + 1)];
    let mut steps = vec![Step::SkipRef; (n + 1) * (m + 1)];
    let mut scores = vec![None; n * m];
    let at = |i: usize, j: usize| i * (m + 1) + j;
    for j in 1..=m {
        steps[at(0, j)] = Step::SkipTest;
    }
    for i in 1..=n {
        for j in 1..=m {
            let s = score(i - 1, j - 1);
            scores[(i - 1) * m + (j - 1)] = s;
            let mut best = table[at(i - 1, j)];
            let mut step = Step::SkipRef;
            let left = table[at(i, j - 1)];
            if left.beats(&best) {
                best = left;
                step = Step::SkipTest;
            }
            if let Some(s) = s {
                let diag = table[at(i - 1, j - 1)];
                let cand = Cell {
                    count: diag.count + 1,
                    total: diag.total + s,
                };
                if !best.beats(&cand) {
                    best = cand;
                    step = Step::Pair;
                }
            }
            table[at(i, j)] = best;
            steps[at(i, j)] = step;
        }
    }
    let mut out = Vec::with_capacity(table[at(n, m)].count);
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        match steps[at(i, j)] {
            Step::Pair => {
                out.push((i - 1, j - 1, scores[(i - 1) * m + (j - 1)].unwrap()));
                i -= 1;
                j -= 1;
            }
            Step::SkipRef => i -= 1,
            Step::SkipTest => j -= 1,
        }
    }
    out.reverse();
    out
}

fn leftovers(len: usize, used: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut taken = vec![false; len];
    for u in used {
        taken[u] = true;
    }
    (0..len).filter(|&i| !taken[i]).collect()
}

/// Aligns two lines word by word; only coordinated words may pair.
pub fn align_words(ref_line: &[TextPoint], test_line: &[TextPoint], p: &MatchParams) -> WordAlignment {
    let ref_k: Vec<Vec<char>> = ref_line.iter().map(|w| classes(&w.kernel)).collect();
    let test_k: Vec<Vec<char>> = test_line.iter().map(|w| classes(&w.kernel)).collect();
    let matched = align_monotone(ref_line.len(), test_line.len(), |i, j| {
        let (a, b) = (&ref_k[i], &test_k[j]);
        let longest = a.len().max(b.len());
        let c = if longest == 0 {
            1.0
        } else if a.is_empty() || b.is_empty() {
            0.0
        } else {
            // lengths bound the distance from below; skip hopeless pairs early
            let floor = a.len().abs_diff(b.len()) as f64 / longest as f64;
            if 1.0 - floor <= p.word_ocr_simil {
                return None;
            }
            1.0 - levenshtein(a, b) as f64 / longest as f64
        };
        (c > p.word_ocr_simil).then_some(c)
    });
    WordAlignment {
        ref_only: leftovers(ref_line.len(), matched.iter().map(|m| m.0)),
        test_only: leftovers(test_line.len(), matched.iter().map(|m| m.1)),
        pairs: matched.into_iter().map(|(i, j, c)| WordPair::one_to_one(i, j, c)).collect(),
    }
}

/// Share of coordinated words relative to the longer line.
pub fn line_similarity(ref_line: &[TextPoint], test_line: &[TextPoint], p: &MatchParams) -> f64 {
    let longest = ref_line.len().max(test_line.len());
    if longest == 0 {
        return 1.0;
    }
    align_words(ref_line, test_line, p).pairs.len() as f64 / longest as f64
}

pub fn align_lines(ref_doc: &DocumentText, test_doc: &DocumentText, p: &MatchParams) -> LineAlignment {
    let (n, m) = (ref_doc.lines.len(), test_doc.lines.len());
    let pairs = align_monotone(n, m, |i, j| {
        let s = line_similarity(&ref_doc.lines[i].words, &test_doc.lines[j].words, p);
        (s > p.line_simil).then_some(s)
    });
    LineAlignment {
        ref_only: leftovers(n, pairs.iter().map(|x| x.0)),
        test_only: leftovers(m, pairs.iter().map(|x| x.1)),
        pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::BBox;

    fn words(s: &str) -> Vec<TextPoint> {
        s.split_whitespace()
            .enumerate()
            .map(|(i, w)| TextPoint::new(w, BBox::new(i as u32 * 50, 0, 40, 10), 1.0))
            .collect()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(edit_distance("", "abc"), 3);
        assert_eq!(edit_distance("27/07/07", "27/07/05"), 1);
        assert_eq!(edit_distance("total", "tota1"), 0);
        assert_eq!(edit_distance("total", "totar"), 1);
        assert_eq!(edit_distance("a-b", "a\u{2014}b"), 0);
    }

    #[test]
    fn coefficient_examples() {
        assert_eq!(coeff_ocr_kernels("payslip", "payslip"), 1.0);
        assert_eq!(coeff_ocr_kernels("27/07/07", "27/07/05"), 0.875);
        assert_eq!(coeff_ocr_kernels("abc", "xyz"), 0.0);
        assert_eq!(coeff_ocr_kernels("", ""), 1.0);
        assert_eq!(coeff_ocr_kernels("", "a"), 0.0);
    }

    #[test]
    fn coordination_threshold() {
        let a = TextPoint::new("27/07/07", BBox::new(0, 0, 1, 1), 1.0);
        let b = TextPoint::new("27/07/05", BBox::new(0, 0, 1, 1), 1.0);
        let p = |t| MatchParams { word_ocr_simil: t, line_simil: 0.5 };
        assert!(words_coordinated(&a, &a, &p(0.99)));
        assert!(words_coordinated(&a, &b, &p(0.7)));
        assert!(!words_coordinated(&a, &b, &p(0.9)));
    }

    #[test]
    fn identical_lines_fully_paired() {
        let l = words("salaire brut 1250,00 net");
        let a = align_words(&l, &l, &MatchParams::default());
        assert_eq!(a.pairs.len(), 4);
        assert!(a.ref_only.is_empty() && a.test_only.is_empty());
    }

    #[test]
    fn deleted_word_left_over() {
        let r = words("salaire brut mensuel net");
        let t = words("salaire brut net");
        let a = align_words(&r, &t, &MatchParams::default());
        assert_eq!(a.pairs.len(), 3);
        assert_eq!(a.ref_only, vec![2]);
    }

    #[test]
    fn similar_substitution_keeps_pair() {
        let r = words("date 27/07/07 fin");
        let t = words("date 27/07/05 fin");
        let p = MatchParams { word_ocr_simil: 0.7, line_simil: 0.5 };
        let a = align_words(&r, &t, &p);
        assert_eq!(a.pairs.len(), 3);
        assert_eq!(a.pairs[1].coeff_ocr, 0.875);
    }

    #[test]
    fn line_similarity_examples() {
        let p = MatchParams::default();
        assert_eq!(line_similarity(&words("a1 b2 c3 d4"), &words("a1 b2 c3 d4"), &p), 1.0);
        assert_eq!(line_similarity(&words("alpha beta gamma delta"), &words("alpha xxxx gamma yyyy"), &p), 0.5);
        assert_eq!(line_similarity(&words("alpha beta"), &words("gamma delta"), &p), 0.0);
        assert_eq!(line_similarity(&[], &[], &p), 1.0);
    }
}
