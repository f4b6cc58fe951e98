use docdiff::diff::{parse_report_json, report_to_json, ComparisonReport, DiffConfig, Modification, ModificationKind, Pages};
use docdiff::eval::{match_report, GroundTruth, Side, TruthEntry};
use docdiff::ocr::{normalize_kernel, DocumentText, TextLine, TextPoint};
use docdiff::pixmatch::{dist_at, dist_min, extend_image, SearchRange, WordRaster};
use docdiff::segment::BBox;
use docdiff::textmatch::{align_lines, align_words, coeff_ocr_kernels, edit_distance, line_similarity, MatchParams};
use proptest::prelude::*;

fn same_class(a: char, b: char) -> bool {
    const GROUPS: &[&str] = &["oO0", "iIl1|", "-\u{2013}\u{2014}\u{2212}", "'\"\u{2019}\u{00AB}"];
    a == b || GROUPS.iter().any(|g| g.contains(a) && g.contains(b))
}

fn naive_distance(a: &[char], b: &[char]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(!same_class(a[i - 1], b[j - 1]));
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn fuzz_string() -> impl Strategy<Value = String> {
    proptest::collection::vec(
        prop::sample::select(vec!['a', 'b', 'o', 'O', '0', 'i', 'I', 'l', '1', '|', '-', '\u{2013}', '\'', '\u{2019}', '7']),
        0..=12,
    )
    .prop_map(|v| v.into_iter().collect())
}

fn raster(max: u32) -> impl Strategy<Value = WordRaster> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        proptest::collection::vec(prop_oneof![3 => Just(0u8), 1 => any::<u8>()], (w * h) as usize)
            .prop_map(move |ink| WordRaster::new(w, h, ink))
    })
}

fn line_of(kernels: &[&str]) -> Vec<TextPoint> {
    kernels
        .iter()
        .enumerate()
        .map(|(i, k)| TextPoint::new(k, BBox::new(i as u32 * 40, 0, 30, 10), 1.0))
        .collect()
}

/// Largest order-preserving matching by enumerating every assignment.
fn exhaustive_pairs(n: usize, m: usize, allowed: &dyn Fn(usize, usize) -> bool) -> usize {
    fn go(i: usize, last: Option<usize>, n: usize, m: usize, allowed: &dyn Fn(usize, usize) -> bool) -> usize {
        if i == n {
            return 0;
        }
        let mut best = go(i + 1, last, n, m, allowed);
        let start = last.map_or(0, |l| l + 1);
        for j in start..m {
            if allowed(i, j) {
                best = best.max(1 + go(i + 1, Some(j), n, m, allowed));
            }
        }
        best
    }
    go(0, None, n, m, allowed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn edit_distance_matches_naive(a in fuzz_string(), b in fuzz_string()) {
        let (ca, cb): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
        prop_assert_eq!(edit_distance(&a, &b), naive_distance(&ca, &cb));
    }

    #[test]
    fn coefficient_bounds_and_symmetry(a in fuzz_string(), b in fuzz_string()) {
        let c = coeff_ocr_kernels(&a, &b);
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert_eq!(c, coeff_ocr_kernels(&b, &a));
        prop_assert_eq!(coeff_ocr_kernels(&a, &a), 1.0);
    }

    #[test]
    fn kernel_idempotent_and_caseless(s in "[A-Za-z0-9 .,/'\u{2013}-]{0,16}") {
        let k = normalize_kernel(&s);
        prop_assert_eq!(normalize_kernel(&k), k.clone());
        prop_assert_eq!(normalize_kernel(&s.to_uppercase()), normalize_kernel(&s.to_lowercase()));
    }

    #[test]
    fn extend_matches_max_filter(r in raster(12)) {
        let e = extend_image(&r);
        let (w, h) = (r.width() as i64, r.height() as i64);
        for y in 0..h {
            for x in 0..w {
                let mut m = 0;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        m = m.max(r.at(x + dx, y + dy));
                    }
                }
                prop_assert_eq!(e.get(x as u32, y as u32), m);
            }
        }
    }

    #[test]
    fn dist_min_bounds(m in raster(10), t in raster(10)) {
        let range = SearchRange::symmetric(2, 1.0, 1.0);
        let best = dist_min(&m, &t, &range);
        prop_assert!(best.dist <= dist_at(&m, &t, 0, 0, 0.0));
        prop_assert_eq!(best.dist, dist_at(&m, &t, best.dx, best.dy, best.alpha));
        prop_assert_eq!(dist_min(&m, &m, &range).dist, 0);
    }

    #[test]
    fn dist_min_symmetric_without_rotation(m in raster(10), t in raster(10)) {
        let range = SearchRange::symmetric(2, 0.0, 1.0);
        prop_assert_eq!(dist_min(&m, &t, &range).dist, dist_min(&t, &m, &range).dist);
    }

    #[test]
    fn word_alignment_is_optimal(
        a in proptest::collection::vec(prop::sample::select(vec!["ab", "abc", "ba", "cd", "abd"]), 0..=5),
        b in proptest::collection::vec(prop::sample::select(vec!["ab", "abc", "ba", "cd", "abd"]), 0..=5),
        simil in prop::sample::select(vec![0.5, 0.6, 0.95]),
    ) {
        let p = MatchParams { word_ocr_simil: simil, line_simil: 0.5 };
        let (r, t) = (line_of(&a), line_of(&b));
        let al = align_words(&r, &t, &p);
        let ok = |i: usize, j: usize| coeff_ocr_kernels(&r[i].kernel, &t[j].kernel) > simil;
        prop_assert_eq!(al.pairs.len(), exhaustive_pairs(r.len(), t.len(), &ok));
        for w in al.pairs.windows(2) {
            prop_assert!(w[0].ref_span.end <= w[1].ref_span.start && w[0].test_span.end <= w[1].test_span.start);
        }
        prop_assert_eq!(al.pairs.len() + al.ref_only.len(), r.len());
        prop_assert_eq!(al.pairs.len() + al.test_only.len(), t.len());
    }

    #[test]
    fn line_alignment_is_optimal(
        a in proptest::collection::vec(proptest::collection::vec(prop::sample::select(vec!["x", "y", "z"]), 1..=3), 0..=5),
        b in proptest::collection::vec(proptest::collection::vec(prop::sample::select(vec!["x", "y", "z"]), 1..=3), 0..=5),
    ) {
        let doc = |lines: &[Vec<&str>]| DocumentText {
            lines: lines
                .iter()
                .enumerate()
                .map(|(i, l)| TextLine { bbox: BBox::new(0, i as u32 * 20, 200, 10), words: line_of(l) })
                .collect(),
            page_size: (200, 200),
        };
        let (rd, td) = (doc(&a), doc(&b));
        let p = MatchParams::default();
        let al = align_lines(&rd, &td, &p);
        let ok = |i: usize, j: usize| line_similarity(&rd.lines[i].words, &td.lines[j].words, &p) > p.line_simil;
        prop_assert_eq!(al.pairs.len(), exhaustive_pairs(a.len(), b.len(), &ok));
    }
}

fn arb_box() -> impl Strategy<Value = BBox> {
    (0u32..500, 0u32..500, 1u32..80, 1u32..40).prop_map(|(x, y, w, h)| BBox::new(x, y, w, h))
}

fn arb_modification() -> impl Strategy<Value = Modification> {
    (
        prop::sample::select(vec![
            ModificationKind::WordChanged,
            ModificationKind::WordInserted,
            ModificationKind::WordDeleted,
            ModificationKind::LineInserted,
            ModificationKind::LineDeleted,
        ]),
        arb_box(),
        arb_box(),
        0usize..30,
        0u32..=1024,
        "[a-z0-9]{1,8}",
    )
        .prop_map(|(kind, rb, tb, line, c, kernel)| {
            let (ref_box, test_box) = match kind {
                ModificationKind::WordChanged => (Some(rb), Some(tb)),
                ModificationKind::WordInserted | ModificationKind::LineInserted => (None, Some(tb)),
                _ => (Some(rb), None),
            };
            let word = !kind.is_line();
            Modification {
                kind,
                ref_kernel: ref_box.and(Some(kernel.clone())).filter(|_| word),
                test_kernel: test_box.and(Some(kernel)).filter(|_| word),
                ref_box,
                test_box,
                line_index: line,
                word_index: word.then_some(line / 2),
                coeff_ocr: (kind == ModificationKind::WordChanged).then_some(c as f64 / 1024.0),
                coeff_pix: (kind == ModificationKind::WordChanged && c % 2 == 0).then_some(c as f64 / 512.0),
                ref_pos: None,
                test_pos: None,
            }
        })
}

fn report_of(modifications: Vec<Modification>) -> ComparisonReport {
    ComparisonReport {
        params: DiffConfig::default(),
        pages: Pages { reference: (600, 600), test: (600, 600) },
        modifications,
        coordinated_count: 3,
        coordinated: Vec::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn report_json_round_trip(mods in proptest::collection::vec(arb_modification(), 0..8)) {
        let report = report_of(mods);
        let json = report_to_json(&report);
        prop_assert_eq!(parse_report_json(&json).unwrap(), report);
    }

    #[test]
    fn matching_ignores_order(
        mods in proptest::collection::vec(arb_modification(), 0..8),
        truth_boxes in proptest::collection::vec((arb_box(), any::<bool>()), 0..8),
        seed in any::<u64>(),
    ) {
        let truth = GroundTruth {
            page: (600, 600),
            entries: truth_boxes
                .iter()
                .map(|&(b, test)| TruthEntry {
                    bbox: b,
                    kind: ModificationKind::WordChanged,
                    side: if test { Side::Test } else { Side::Ref },
                })
                .collect(),
            category: None,
        };
        let base = match_report(&report_of(mods.clone()), &truth, 0.3);
        let mut shuffled = mods;
        let n = shuffled.len();
        if n > 1 {
            for i in 0..n {
                shuffled.swap(i, (seed.rotate_left(i as u32) as usize) % n);
            }
        }
        let mut truth_rev = truth.clone();
        truth_rev.entries.reverse();
        let other = match_report(&report_of(shuffled), &truth_rev, 0.3);
        prop_assert_eq!((base.tp, base.fp, base.fn_), (other.tp, other.fp, other.fn_));
        prop_assert_eq!(base.tp + base.fp, n);
        prop_assert_eq!(base.tp + base.fn_, truth.entries.len());
    }
}
