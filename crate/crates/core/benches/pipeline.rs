use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stereo_noise::par::tree_sum;
use stereo_noise::sim::{run_pipeline_with, sample_generative, ScanlineLayout, ScanlinePattern, SimRun};
use stereo_noise::stats::pairs_from_samples;
use stereo_noise::{fit, Execution, FitInput, IlluminationModel, PowerLawModel, StereoRig};

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn pipeline(c: &mut Criterion) {
    let rig = StereoRig::new(200.0, 0.05, 640, 0.5).unwrap();
    let layout = ScanlineLayout::new(20.0, 3, 7, 3).unwrap();
    let pattern = ScanlinePattern::speckle(layout.length, 3.0, 0.3, 1).unwrap();
    let illum = IlluminationModel::active(2e5, 0.5).unwrap();
    let run = SimRun::new(rig, illum, 1.5, 2000, 7);

    let mut group = c.benchmark_group("run_pipeline");
    group.sample_size(20);
    group.throughput(Throughput::Elements(run.trials as u64));
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_pipeline_with(exec, black_box(&run), &pattern, &layout.windows).unwrap())
        });
    }
    group.finish();
}

fn reduction(c: &mut Criterion) {
    let n = 1 << 20;
    let xs: Vec<f64> = (0..n).map(|i| 0.5 + (i % 977) as f64 * 1e-3).collect();
    let mut group = c.benchmark_group("tree_sum");
    group.throughput(Throughput::Elements(n as u64));
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                tree_sum(exec, n, |i| {
                    let w = xs[i].powf(-4.8);
                    [w, w * xs[i].ln()]
                })
            })
        });
    }
    group.finish();
}

fn estimator(c: &mut Criterion) {
    let model = PowerLawModel::new(0.0019, 2.4).unwrap();
    let ranges: Vec<f64> = (0..11).map(|i| 0.5 + 0.25 * i as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples = sample_generative(&model, &ranges, 20_000, &mut rng).unwrap();
    let input = FitInput::new(pairs_from_samples(&samples)).unwrap();
    c.bench_function("fit/220k", |b| b.iter(|| fit(black_box(&input)).unwrap()));
}

criterion_group!(benches, pipeline, reduction, estimator);
criterion_main!(benches);
