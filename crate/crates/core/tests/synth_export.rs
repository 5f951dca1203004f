use std::collections::BTreeMap;

use pitmap_core::analyze::{frames_from_coco, ingest_annotations, DetectionSource};
use pitmap_core::dictionary::Dictionary;
use pitmap_core::synth::{
    compose_batch, export_dataset, procedural_background, read_coco, synthetic_dictionary, Background, CountRange,
    Placement, SceneSpec, ANNOTATIONS_FILE,
};
use pitmap_core::{DislocationType, PerType};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture(per_type: usize) -> (Dictionary, Vec<Background>) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dict = synthetic_dictionary(per_type, &mut rng);
    let bgs = (0..2)
        .map(|i| Background { id: format!("bg{i}"), image: procedural_background(160, 160, &mut rng) })
        .collect();
    (dict, bgs)
}

type Key = (String, DislocationType, Vec<(usize, usize)>);

#[test]
fn exported_scenes_ingest_back_to_their_instances() {
    let (dict, bgs) = fixture(20);
    let spec = SceneSpec { width: 160, height: 128, seed: 5, ..SceneSpec::default() };
    let scenes = compose_batch(&spec, 6, &dict, &bgs).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_dataset(&scenes, dir.path()).unwrap();
    let coco = read_coco(dir.path().join(ANNOTATIONS_FILE)).unwrap();
    let frames = frames_from_coco(&coco.images);
    let report = ingest_annotations(&coco.annotations, &frames, DetectionSource::External);
    assert!(report.rejections.is_empty(), "{:?}", report.rejections);
    assert_eq!(report.duplicates, 0);

    let mut want: Vec<Key> = Vec::new();
    for (s, f) in scenes.iter().zip(&frames) {
        for i in &s.instances {
            want.push((f.tile_id.clone(), i.dtype, i.mask.points().collect()));
        }
    }
    let mut got: Vec<Key> =
        report.detections.iter().map(|d| (d.tile_id.clone(), d.dtype, d.mask.points().collect())).collect();
    want.sort();
    got.sort();
    assert_eq!(got, want);
}

#[test]
fn dictionary_survives_save_and_load() {
    let (dict, _) = fixture(4);
    let dir = tempfile::tempdir().unwrap();
    dict.save(dir.path()).unwrap();
    let back = Dictionary::load(dir.path()).unwrap();
    assert_eq!(back.len(), dict.len());
    for (a, b) in dict.entries.iter().zip(&back.entries) {
        assert_eq!((&a.id, a.dtype, &a.mask, &a.source), (&b.id, b.dtype, &b.mask, &b.source));
        assert_eq!(a.image.quantized(), b.image);
    }
}

/// Pearson statistic against a uniform law on `lo..=hi`.
fn chi_square(samples: &[usize], lo: usize, hi: usize) -> f64 {
    let mut hist: BTreeMap<usize, usize> = (lo..=hi).map(|k| (k, 0)).collect();
    for &s in samples {
        *hist.get_mut(&s).expect("count inside its range") += 1;
    }
    let e = samples.len() as f64 / (hi - lo + 1) as f64;
    hist.values().map(|&o| (o as f64 - e).powi(2) / e).sum()
}

#[test]
fn per_type_counts_are_uniform_over_their_ranges() {
    let (dict, bgs) = fixture(10);
    let ranges = PerType { bpd: CountRange::new(0, 9), ted: CountRange::new(2, 6), tsd: CountRange::new(0, 3) };
    let spec = SceneSpec { width: 96, height: 96, ranges, placement: Placement::Random, allow_overlap: true, seed: 77 };
    let scenes = compose_batch(&spec, 1000, &dict, &bgs).unwrap();
    // 0.1% critical values of chi-square with 9, 4 and 3 degrees of freedom.
    for (t, crit) in [(DislocationType::Bpd, 27.88), (DislocationType::Ted, 18.47), (DislocationType::Tsd, 16.27)] {
        let r = ranges.get(t);
        let counts: Vec<usize> = scenes.iter().map(|s| *s.counts().get(t)).collect();
        let stat = chi_square(&counts, r.lo, r.hi);
        assert!(stat < crit, "{t}: chi-square {stat:.2} over {crit}");
    }
}
