use affbench_bench::{annotation, prediction, rng};
use affbench_core::wfb::reduce_fields;
use affbench_core::{distance_transform, tally_pair, weighted_error, BinaryMask, ClassTaxonomy, WfbParams};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

const W: usize = 640;
const H: usize = 480;

fn kernels(c: &mut Criterion) {
    let t = ClassTaxonomy::umd();
    let mut r = rng(11);
    let gt = annotation(&mut r, &t, W, H);
    let pred = prediction(&mut r, &gt, &t, 0.01);
    let class = *gt
        .labels()
        .iter()
        .find(|&&l| l != 0)
        .expect("annotation has foreground");
    let gt_fg = BinaryMask::from_class(&gt, class);
    let pred_fg = BinaryMask::from_class(&pred, class);
    let params = WfbParams::default();

    c.bench_function("tally_pair 640x480", |b| {
        b.iter(|| tally_pair(black_box(&gt), black_box(&pred), &t).unwrap())
    });
    c.bench_function("distance_transform 640x480", |b| {
        b.iter(|| distance_transform(black_box(&gt_fg)).unwrap())
    });
    c.bench_function("weighted_error 640x480", |b| {
        b.iter(|| {
            let f = weighted_error(black_box(&gt_fg), black_box(&pred_fg), &params).unwrap();
            reduce_fields(&gt_fg, &f)
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = kernels
}
criterion_main!(benches);
