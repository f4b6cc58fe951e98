//! Repair of words that segmentation split in one document and kept whole in
//! the other ("pay" + "ment" against "payment").

use std::ops::Range;

use crate::ocr::TextPoint;
use crate::segment::BBox;
use crate::textmatch::{coeff_ocr_kernels, MatchParams, WordAlignment, WordPair};

/// Minimum horizontal overlap between a merged group and its counterpart,
/// relative to the wider of the two boxes.
const MIN_OVERLAP: f64 = 0.5;

struct Oriented {
    /// `(this side span, other side span, coeff, coeff_pix)`
    pairs: Vec<(Range<usize>, Range<usize>, f64, Option<f64>)>,
}

fn orient(al: &WordAlignment, this_is_test: bool) -> Oriented {
    Oriented {
        pairs: al
            .pairs
            .iter()
            .map(|p| {
                if this_is_test {
                    (p.test_span.clone(), p.ref_span.clone(), p.coeff_ocr, p.coeff_pix)
                } else {
                    (p.ref_span.clone(), p.test_span.clone(), p.coeff_ocr, p.coeff_pix)
                }
            })
            .collect(),
    }
}

fn restore(o: Oriented, this_is_test: bool, n_ref: usize, n_test: usize) -> WordAlignment {
    let mut pairs: Vec<WordPair> = o
        .pairs
        .into_iter()
        .map(|(this, other, coeff_ocr, coeff_pix)| {
            let (ref_span, test_span) = if this_is_test { (other, this) } else { (this, other) };
            WordPair {
                ref_span,
                test_span,
                coeff_ocr,
                coeff_pix,
            }
        })
        .collect();
    pairs.sort_by_key(|p| p.ref_span.start);
    let mut ref_used = vec![false; n_ref];
    let mut test_used = vec![false; n_test];
    for p in &pairs {
        p.ref_span.clone().for_each(|i| ref_used[i] = true);
        p.test_span.clone().for_each(|i| test_used[i] = true);
    }
    WordAlignment {
        pairs,
        ref_only: (0..n_ref).filter(|&i| !ref_used[i]).collect(),
        test_only: (0..n_test).filter(|&i| !test_used[i]).collect(),
    }
}

fn owners(pairs: &[(Range<usize>, Range<usize>, f64, Option<f64>)], n: usize, this: bool) -> Vec<Option<usize>> {
    let mut out = vec![None; n];
    for (k, p) in pairs.iter().enumerate() {
        let span = if this { &p.0 } else { &p.1 };
        span.clone().for_each(|i| out[i] = Some(k));
    }
    out
}

fn overlap_ratio(a: &BBox, b: &BBox) -> f64 {
    a.x_overlap(b) as f64 / a.w.max(b.w) as f64
}

fn merge_one_side(this: &[TextPoint], other: &[TextPoint], mut o: Oriented, p: &MatchParams) -> Oriented {
    let mut i = 0;
    while i + 1 < this.len() {
        let own_this = owners(&o.pairs, this.len(), true);
        let own_other = owners(&o.pairs, other.len(), false);
        let (u, v) = (i, i + 1);
        let (pu, pv) = (own_this[u], own_this[v]);
        let is_single = |k: Option<usize>| k.is_none_or(|k| o.pairs[k].0.len() == 1 && o.pairs[k].1.len() == 1);
        if (pu.is_some() && pv.is_some()) || !is_single(pu) || !is_single(pv) {
            i += 1;
            continue;
        }
        let involved: Vec<usize> = pu.iter().chain(pv.iter()).copied().collect();

        // unmatched counterparts must sit between the neighbouring pairs
        let lo = o
            .pairs
            .iter()
            .enumerate()
            .filter(|(k, pr)| !involved.contains(k) && pr.0.end <= u)
            .map(|(_, pr)| pr.1.end)
            .max()
            .unwrap_or(0);
        let hi = o
            .pairs
            .iter()
            .enumerate()
            .filter(|(k, pr)| !involved.contains(k) && pr.0.start > v)
            .map(|(_, pr)| pr.1.start)
            .min()
            .unwrap_or(other.len());
        let mut candidates: Vec<usize> = (lo..hi.max(lo)).filter(|&c| own_other[c].is_none()).collect();
        for &k in &involved {
            candidates.push(o.pairs[k].1.start);
        }
        candidates.sort_unstable();
        candidates.dedup();

        let existing = involved.iter().map(|&k| o.pairs[k].2).fold(0.0f64, f64::max);
        let mut kernel = format!("{}{}", this[u].kernel, this[v].kernel);
        let mut union = this[u].bbox.union(&this[v].bbox);
        let mut best: Option<(usize, f64)> = None;
        for &c in &candidates {
            let coeff = coeff_ocr_kernels(&kernel, &other[c].kernel);
            let ok = coeff > p.word_ocr_simil && coeff >= existing && overlap_ratio(&union, &other[c].bbox) >= MIN_OVERLAP;
            if ok && best.is_none_or(|(_, b)| coeff > b) {
                best = Some((c, coeff));
            }
        }
        let Some((c, mut coeff)) = best else {
            i += 1;
            continue;
        };

        // a word may have been cut into more than two parts
        let mut end = v + 1;
        while end < this.len() && own_this[end].is_none() {
            let longer = format!("{kernel}{}", this[end].kernel);
            let wider = union.union(&this[end].bbox);
            let c2 = coeff_ocr_kernels(&longer, &other[c].kernel);
            if c2 > coeff && overlap_ratio(&wider, &other[c].bbox) >= MIN_OVERLAP {
                kernel = longer;
                union = wider;
                coeff = c2;
                end += 1;
            } else {
                break;
            }
        }

        let mut kept: Vec<_> = o
            .pairs
            .drain(..)
            .enumerate()
            .filter(|(k, _)| !involved.contains(k))
            .map(|(_, pr)| pr)
            .collect();
        kept.push((u..end, c..c + 1, coeff, None));
        kept.sort_by_key(|pr| pr.0.start);
        o.pairs = kept;
        i = end;
    }
    o
}

/// Looks for adjacent words on one side whose concatenation coordinates with
/// a single word on the other side, and replaces the involved entries with
/// one pair over the merged span. Test-side splits are handled first, then
/// reference-side splits; each side is scanned once left to right.
pub fn repair_split_merge(
    ref_line: &[TextPoint],
    test_line: &[TextPoint],
    alignment: WordAlignment,
    p: &MatchParams,
) -> WordAlignment {
    if alignment.ref_only.is_empty() && alignment.test_only.is_empty() {
        return alignment;
    }
    let (n_ref, n_test) = (ref_line.len(), test_line.len());
    let o = merge_one_side(test_line, ref_line, orient(&alignment, true), p);
    let merged = restore(o, true, n_ref, n_test);
    if merged.ref_only.is_empty() && merged.test_only.is_empty() {
        return merged;
    }
    let o = merge_one_side(ref_line, test_line, orient(&merged, false), p);
    restore(o, false, n_ref, n_test)
}
