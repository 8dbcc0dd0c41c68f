use std::path::PathBuf;

use affbench_core::augment::{gaussian_noise_deltas, CropSize};
use affbench_core::scale::perturb_dataset;
use affbench_core::{
    augment_sample, load_image, load_label_mask, occupancy, save_image, save_label_mask, scale_image, scale_mask,
    AugmentConfig, ClassTaxonomy, Interval, LabelMask, Manifest, RgbImage, SampleRecord, ScaleSpec,
};
use proptest::prelude::*;

const PALETTE: [[u8; 3]; 8] = [
    [0, 0, 0],
    [200, 30, 30],
    [30, 200, 30],
    [30, 30, 200],
    [200, 200, 30],
    [200, 30, 200],
    [30, 200, 200],
    [120, 120, 120],
];

fn umd() -> ClassTaxonomy {
    ClassTaxonomy::umd()
}

/// Blocky labels and an image painted with the label palette.
fn painted(w: usize, h: usize) -> (RgbImage, LabelMask) {
    let labels: Vec<u8> = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if x < w / 8 || y < h / 8 {
                0
            } else {
                (((x / 12) + 3 * (y / 10)) % 7 + 1) as u8
            }
        })
        .collect();
    let pixels = labels.iter().map(|&l| PALETTE[l as usize]).collect();
    (
        RgbImage::new(w, h, pixels).unwrap(),
        LabelMask::new(w, h, labels, &umd()).unwrap(),
    )
}

fn agreement(image: &RgbImage, mask: &LabelMask) -> f64 {
    let hits = image
        .pixels()
        .iter()
        .zip(mask.labels())
        .filter(|(p, &l)| **p == PALETTE[l as usize])
        .count();
    hits as f64 / mask.labels().len() as f64
}

fn centered_object(w: usize, h: usize, ow: usize, oh: usize) -> LabelMask {
    let (x0, y0) = ((w - ow) / 2, (h - oh) / 2);
    let labels = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            u8::from((x0..x0 + ow).contains(&x) && (y0..y0 + oh).contains(&y))
        })
        .collect();
    LabelMask::new(w, h, labels, &umd()).unwrap()
}

#[test]
fn zoom_keeps_image_and_mask_aligned() {
    let (img, mask) = painted(96, 80);
    for factor in [0.5, 2.0 / 3.0, 1.0, 1.5, 2.0] {
        let spec = ScaleSpec::new(factor, 96, 80).unwrap();
        let (si, sm) = (scale_image(&img, &spec).unwrap(), scale_mask(&mask, &spec, 0).unwrap());
        assert_eq!(si.dims(), (96, 80));
        assert_eq!(sm.dims(), (96, 80));
        let a = agreement(&si, &sm);
        assert!(a > 0.75, "factor {factor}: {a}");
    }
}

#[test]
fn augmented_pairs_stay_aligned() {
    let (img, mask) = painted(96, 80);
    let mut config = AugmentConfig::identity();
    config.flip_probability = 0.5;
    config.scale_interval = Interval(1.0, 1.8);
    config.crop = Some(CropSize { width: 64, height: 48 });
    for k in 0..12 {
        let (ai, am) = augment_sample(&img, &mask, &config, 5, &format!("s/{k}")).unwrap();
        assert_eq!(ai.dims(), (64, 48));
        assert_eq!(am.dims(), (64, 48));
        assert!(agreement(&ai, &am) > 0.75, "draw {k}");
    }
}

#[test]
fn identity_recipe_is_a_no_op() {
    let (img, mask) = painted(40, 30);
    let (ai, am) = augment_sample(&img, &mask, &AugmentConfig::identity(), 9, "x").unwrap();
    assert_eq!(ai, img);
    assert_eq!(am, mask);
}

#[test]
fn certain_flip_mirrors_both() {
    let (img, mask) = painted(40, 30);
    let mut config = AugmentConfig::identity();
    config.flip_probability = 1.0;
    let (ai, am) = augment_sample(&img, &mask, &config, 0, "x").unwrap();
    for y in 0..30 {
        for x in 0..40 {
            assert_eq!(am.get(x, y), mask.get(39 - x, y));
            assert_eq!(ai.get(x, y), img.get(39 - x, y));
        }
    }
}

#[test]
fn noise_has_the_requested_moments() {
    for variance in [10.0, 100.0] {
        let n = 200_000;
        let v: Vec<f64> = gaussian_noise_deltas(variance, 17).unwrap().take(n).collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // Five standard errors of the mean and of the variance.
        assert!(mean.abs() < 5.0 * (variance / n as f64).sqrt(), "mean {mean}");
        assert!(
            (var - variance).abs() < 5.0 * variance * (2.0 / n as f64).sqrt(),
            "var {var}"
        );
    }
}

#[test]
fn noise_leaves_masks_alone() {
    let (img, mask) = painted(48, 40);
    let mut config = AugmentConfig::identity();
    config.gaussian_noise_variance = Some(Interval(50.0, 50.0));
    let (ai, am) = augment_sample(&img, &mask, &config, 1, "n").unwrap();
    assert_eq!(am, mask);
    assert_ne!(ai, img);
}

#[test]
fn occupancy_follows_the_square_of_the_factor() {
    let mask = centered_object(200, 160, 40, 30);
    let base = occupancy(&mask, &umd()).unwrap();
    assert!((base - 1200.0 / 32000.0).abs() < 1e-12);
    for factor in [0.5, 2.0 / 3.0, 1.5, 2.0] {
        let spec = ScaleSpec::new(factor, 200, 160).unwrap();
        let o = occupancy(&scale_mask(&mask, &spec, 0).unwrap(), &umd()).unwrap();
        let expected = base * factor * factor;
        assert!(
            (o - expected).abs() / expected < 0.1,
            "factor {factor}: {o} vs {expected}"
        );
    }
}

#[test]
fn perturbed_dataset_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let t = umd();
    let mut samples = Vec::new();
    for i in 0..3 {
        let (img, mask) = painted(60 + 4 * i, 50);
        let id = format!("s{i}");
        let (a, im, p) = (format!("{id}_gt.png"), format!("{id}.png"), format!("{id}_m.png"));
        save_label_mask(&mask, root.join(&a)).unwrap();
        save_label_mask(&mask, root.join(&p)).unwrap();
        save_image(&img, root.join(&im)).unwrap();
        samples.push(SampleRecord {
            id,
            image: Some(PathBuf::from(im)),
            annotation: PathBuf::from(a),
            predictions: [("m".to_string(), PathBuf::from(p))].into(),
            split: "test".into(),
        });
    }
    let manifest = Manifest::new("toy", root, samples).unwrap();
    let out = root.join("half");
    let scaled = perturb_dataset(&manifest, 0.5, &t, &out).unwrap();
    assert_eq!(scaled.len(), 3);
    scaled.save(out.join("toy_x0.5.jsonl")).unwrap();
    let reloaded = Manifest::load(out.join("toy_x0.5.jsonl")).unwrap();
    for (orig, r) in manifest.samples.iter().zip(&reloaded.samples) {
        assert_eq!(r.id, format!("{}_x0.5", orig.id));
        let src = load_label_mask(manifest.resolve(&orig.annotation), &t).unwrap();
        let gt = load_label_mask(reloaded.resolve(&r.annotation), &t).unwrap();
        let pred = load_label_mask(reloaded.resolve(&r.predictions["m"]), &t).unwrap();
        let img = load_image(reloaded.resolve(r.image.as_ref().unwrap())).unwrap();
        assert_eq!(gt.dims(), src.dims());
        assert_eq!(img.dims(), src.dims());
        assert_eq!(gt, pred);
        let spec = ScaleSpec::new(0.5, src.width(), src.height()).unwrap();
        assert_eq!(gt, scale_mask(&src, &spec, 0).unwrap());
    }
    assert!(perturb_dataset(&manifest, 0.0, &t, &out).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zoom_preserves_canvas_and_label_set(
        w in 4usize..40, h in 4usize..40, factor in 0.25f64..3.0, seed in any::<u64>()
    ) {
        let t = umd();
        let labels: Vec<u8> = (0..w * h).map(|i| ((seed >> (i % 60)) as u8 ^ i as u8) % 8).collect();
        let mask = LabelMask::new(w, h, labels, &t).unwrap();
        let spec = ScaleSpec::new(factor, w, h).unwrap();
        let out = scale_mask(&mask, &spec, 0).unwrap();
        prop_assert_eq!(out.dims(), (w, h));
        prop_assert!(out.labels().iter().all(|&l| l == 0 || mask.contains_label(l)));
    }

    #[test]
    fn augmentation_is_a_pure_function_of_seed_and_key(seed in any::<u64>(), key in "[a-z]{1,6}/[0-9]") {
        let (img, mask) = painted(48, 40);
        let mut config = AugmentConfig::choc_aff();
        config.crop = Some(CropSize { width: 40, height: 32 });
        let a = augment_sample(&img, &mask, &config, seed, &key).unwrap();
        let b = augment_sample(&img, &mask, &config, seed, &key).unwrap();
        prop_assert_eq!(a, b);
    }
}
