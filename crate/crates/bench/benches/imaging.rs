use criterion::{criterion_group, criterion_main, Criterion};
use petkin::imaging::{fit_image, FitSettings, SolverKind};
use petkin::kinetics::TimeGrid;
use petkin::phantom::{
    default_angles, dense_input_times, fbp, input_function, make_phantom, radon, reconstruct_frames, simulate_dynamic,
    Filter, GroundTruth, IfShape, NoiseSettings,
};
use std::hint::black_box;

fn tomography(c: &mut Criterion) {
    let side = 64;
    let labels = make_phantom(side).unwrap();
    let image: Vec<f64> = labels.as_slice().iter().map(|&l| f64::from(l)).collect();
    let angles = default_angles(90);
    let sino = radon(&image, side, &angles).unwrap();
    c.bench_function("radon/64px_90_angles", |b| {
        b.iter(|| radon(black_box(&image), side, &angles).unwrap())
    });
    c.bench_function("fbp/64px_90_angles_hann", |b| {
        b.iter(|| fbp(black_box(&sino), Filter::Hann).unwrap())
    });
}

fn image_fit(c: &mut Criterion) {
    let s = IfShape::default();
    let input = input_function(350.0, 12.7, &s, &dense_input_times(60.0, s.t_peak)).unwrap();
    let grid = TimeGrid::standard_fdg();
    let gt = GroundTruth::reference(make_phantom(32).unwrap());
    let clean = simulate_dynamic(&gt, &input, &grid).unwrap();
    let noise = NoiseSettings {
        angles: 48,
        ..Default::default()
    };
    let (noisy, _) = reconstruct_frames(&clean, &noise, 1).unwrap();
    let mut group = c.benchmark_group("fit_image/32px");
    group.sample_size(10);
    for solver in [SolverKind::RegAsTr, SolverKind::ProjectedLm] {
        let settings = FitSettings {
            solver,
            ..Default::default()
        };
        group.bench_function(solver.as_str(), |b| {
            b.iter(|| fit_image(black_box(&noisy), &input, &grid, &settings).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, tomography, image_fit);
criterion_main!(benches);
