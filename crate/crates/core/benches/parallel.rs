use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hmvp::exec::Execution;
use hmvp::fields;
use hmvp::gaugeball::{ball_average, ball_extrema, BallSpec, ExtremaConfig, MVPCoefficients, QuadratureSpec};
use hmvp::hgroup::Point;
use hmvp::solver::{dpp_apply, initial_values, GridProblem};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn averages(c: &mut Criterion) {
    let u = fields::make_gauge_power(1, 1.5).unwrap();
    let ball = BallSpec::new(Point::h1(0.3, -0.2, 0.1), 0.25).unwrap();
    let mut group = c.benchmark_group("ball_average");
    for (name, mode) in MODES {
        for quad in ["product:32,32,64", "lds:200000:seed=3"] {
            let spec = quad.parse::<QuadratureSpec>().unwrap().with_execution(mode);
            group.bench_with_input(BenchmarkId::new(name, quad), &spec, |b, spec| {
                b.iter(|| ball_average(&u, &ball, spec).unwrap())
            });
        }
    }
    group.finish();
}

fn extrema(c: &mut Criterion) {
    let u = fields::parse_field(1, "x + t + x*y^2").unwrap();
    let ball = BallSpec::centered(1, 0.1).unwrap();
    let mut group = c.benchmark_group("ball_extrema");
    for (name, mode) in MODES {
        let cfg = ExtremaConfig { execution: mode, ..Default::default() };
        group.bench_function(name, |b| b.iter(|| ball_extrema(&u, &ball, &cfg).unwrap()));
    }
    group.finish();
}

fn sweeps(c: &mut Criterion) {
    let g = fields::parse_field(1, "x^2 - y^2 + t").unwrap();
    let coeffs = MVPCoefficients::calibrated(1, 3.0).unwrap();
    let h = 1.0 / 16.0;
    let mut group = c.benchmark_group("dpp_apply");
    group.sample_size(10);
    for (name, mode) in MODES {
        let mut prob = GridProblem::cube(-0.5, 0.5, h, h * h, 0.25, coeffs, g.clone()).unwrap();
        prob.execution = mode;
        let values = initial_values(&prob).unwrap();
        group.bench_function(name, |b| b.iter(|| dpp_apply(&values, &prob).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, averages, extrema, sweeps);
criterion_main!(benches);
