use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use uamark::cvarsgd::{direction, CvarSgdConfig, StepRule};
use uamark::gauss1d::{alpha_grid, AversionKind, GaussianLabParams, VarianceMode};
use uamark::gausshd::{synthetic_instance, HdDriftProblem, SyntheticSpec};
use uamark::hedgelab::{evaluate_on_test_distribution, HedgeSpec, HestonParams, TestDistribution};
use uamark::modeldist::{subsample_oosp, SubsampleScheme};
use uamark::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn subsampling(c: &mut Criterion) {
    let p = GaussianLabParams::new(0.2 / 255.0, 0.04 / 255.0, 140, 0.84).unwrap();
    let grid: Vec<f64> = alpha_grid().into_iter().step_by(20).collect();
    let mut g = c.benchmark_group("subsample_oosp");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                subsample_oosp(
                    &p,
                    AversionKind::Cvar,
                    &grid,
                    500,
                    1000,
                    140,
                    SubsampleScheme::Gaussian(VarianceMode::Fixed),
                    1,
                    exec,
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

fn cvar_sgd_step(c: &mut Criterion) {
    let inst = synthetic_instance(&SyntheticSpec::new(50, 30), 1).unwrap();
    let problem = HdDriftProblem::new(inst.params);
    let params = vec![0.1; 50];
    let mut g = c.benchmark_group("cvarsgd_direction");
    for (name, exec) in MODES {
        let mut cfg = CvarSgdConfig::new(500, 0.1, 1, StepRule::Constant { eta: 1.0 }, 3);
        cfg.exec = exec;
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            let mut t = 0;
            b.iter(|| {
                t += 1;
                direction(&problem, &params, &cfg, t).unwrap()
            })
        });
    }
    g.finish();
}

fn hedge_evaluation(c: &mut Criterion) {
    let spec = HedgeSpec::cliquet_default();
    let policy = spec.arch.init(1);
    let dist = TestDistribution::new(HestonParams::table1());
    let mut g = c.benchmark_group("hedge_evaluation");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate_on_test_distribution(&spec, &policy, &dist, 16, 64, 2, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, subsampling, cvar_sgd_step, hedge_evaluation);
criterion_main!(benches);
