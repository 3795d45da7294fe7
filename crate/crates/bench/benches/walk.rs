use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ltlab_core::excursion::{excursion_trace, MultiCenterTracker};
use ltlab_core::walker::{run_observed, run_until, t_theta};
use ltlab_core::{Radii, StopRule, Torus, TorusPoint, TraceHorizon, WalkConfig};

fn fixed_horizon(c: &mut Criterion) {
    let mut g = c.benchmark_group("walk_fixed_1e5");
    for n in [16usize, 64, 256] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            let mut r = 0;
            b.iter(|| {
                r += 1;
                run_until(&WalkConfig::new(n, TorusPoint::ORIGIN, 1).replica(r), &StopRule::FixedTime(1e5)).unwrap()
            })
        });
    }
    g.finish();
}

fn inverse_local_time(c: &mut Criterion) {
    let mut g = c.benchmark_group("walk_tau_t_theta");
    g.sample_size(10);
    for n in [32usize, 64] {
        let stop = StopRule::InverseLocalTime { site: TorusPoint::ORIGIN, level: t_theta(n, 1.0) };
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            let mut r = 0;
            b.iter(|| {
                r += 1;
                black_box(run_until(&WalkConfig::new(n, TorusPoint::ORIGIN, 2).replica(r), &stop).unwrap().elapsed)
            })
        });
    }
    g.finish();
}

fn excursions(c: &mut Criterion) {
    let radii = Radii::from_values(vec![16.0, 8.0, 4.0]).unwrap();
    c.bench_function("excursion_trace_n64_budget50", |b| {
        let mut r = 0;
        b.iter(|| {
            r += 1;
            excursion_trace(&WalkConfig::new(64, TorusPoint::ORIGIN, 3).replica(r), TorusPoint::ORIGIN, &radii, &TraceHorizon::TopLevelBudget(50)).unwrap()
        })
    });
    let t = Torus::new(64).unwrap();
    let centers: Vec<TorusPoint> = t.sites().filter(|&x| t.distance(TorusPoint::ORIGIN, x) >= 16.0).collect();
    let mut g = c.benchmark_group("multi_center_n64");
    g.sample_size(10);
    g.bench_function("all_centers_fixed_1e5", |b| {
        let mut r = 0;
        b.iter(|| {
            r += 1;
            let mut tracker = MultiCenterTracker::new(&t, &radii, centers.iter().copied(), 1000).unwrap();
            run_observed(&WalkConfig::new(64, TorusPoint::ORIGIN, 4).replica(r), &StopRule::FixedTime(1e5), &mut tracker).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, fixed_horizon, inverse_local_time, excursions);
criterion_main!(benches);
