use docdiff::diff::{check_partition, compare_images, compare_prepared, prepare_page, DiffConfig, Mode, ModificationKind};
use docdiff::eval::{generate_pair, EditKind, EditSpec, OcrNoise, SynthSpec};

fn spec(seed: u64, confusion: f64) -> SynthSpec {
    let edits = [
        (EditKind::SubstituteChars, 2),
        (EditKind::ReplaceWord, 1),
        (EditKind::InsertWord, 1),
        (EditKind::DeleteWord, 1),
        (EditKind::InsertLine, 1),
        (EditKind::DeleteLine, 1),
    ];
    SynthSpec {
        seed,
        edits: edits.iter().map(|&(kind, count)| EditSpec { kind, count }).collect(),
        jitter: 1,
        ocr_noise: OcrNoise {
            case_flip: 0.02,
            o0_swap: 0.02,
            confusion,
        },
        ..SynthSpec::default()
    }
}

fn config(mode: Mode) -> DiffConfig {
    DiffConfig {
        mode,
        ..DiffConfig::default()
    }
}

#[test]
fn every_word_accounted_for_once() {
    for seed in 0..6 {
        let pair = generate_pair(&spec(seed, 0.05)).unwrap();
        for mode in [Mode::OcrOnly, Mode::Combined] {
            let cfg = config(mode);
            let r = prepare_page(&pair.ref_img, Some(pair.ref_text.clone()), &cfg).unwrap();
            let t = prepare_page(&pair.test_img, Some(pair.test_text.clone()), &cfg).unwrap();
            let report = compare_prepared(&r, &t, &cfg);
            check_partition(&report, &r.text, &t.text).unwrap();
            assert_eq!(report.coordinated_count, report.coordinated.len());
        }
    }
}

#[test]
fn combined_never_adds_findings() {
    for seed in 10..16 {
        let pair = generate_pair(&spec(seed, 0.05)).unwrap();
        let run = |mode| {
            compare_images(&pair.ref_img, Some(pair.ref_text.clone()), &pair.test_img, Some(pair.test_text.clone()), &config(mode))
                .unwrap()
        };
        let (ocr, combined) = (run(Mode::OcrOnly), run(Mode::Combined));
        assert!(combined.modifications.len() <= ocr.modifications.len());
        for m in &combined.modifications {
            assert!(
                ocr.modifications.iter().any(|o| o.kind == m.kind && o.ref_box == m.ref_box && o.test_box == m.test_box),
                "seed {seed}: {m:?} only in combined mode"
            );
        }
    }
}

#[test]
fn swapping_sides_mirrors_kinds() {
    for seed in 20..25 {
        let pair = generate_pair(&spec(seed, 0.0)).unwrap();
        let cfg = config(Mode::OcrOnly);
        let forward = compare_images(&pair.ref_img, Some(pair.ref_text.clone()), &pair.test_img, Some(pair.test_text.clone()), &cfg).unwrap();
        let backward = compare_images(&pair.test_img, Some(pair.test_text.clone()), &pair.ref_img, Some(pair.ref_text.clone()), &cfg).unwrap();
        let key = |kind: ModificationKind, a, b| (kind, a, b);
        let mut f: Vec<_> = forward.modifications.iter().map(|m| key(m.kind, m.ref_box, m.test_box)).collect();
        let mut b: Vec<_> = backward
            .modifications
            .iter()
            .map(|m| key(m.kind.mirrored(), m.test_box, m.ref_box))
            .collect();
        f.sort();
        b.sort();
        assert_eq!(f, b, "seed {seed}");
        assert_eq!(forward.coordinated_count, backward.coordinated_count);
    }
}

#[test]
fn identical_pages_have_no_findings() {
    let pair = generate_pair(&SynthSpec { seed: 3, ..SynthSpec::default() }).unwrap();
    let report = compare_images(&pair.ref_img, Some(pair.ref_text.clone()), &pair.ref_img, Some(pair.ref_text.clone()), &DiffConfig::default()).unwrap();
    assert!(report.modifications.is_empty());
    assert_eq!(report.coordinated_count, pair.ref_text.word_count());
}
