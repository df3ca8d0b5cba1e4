use wildtamer::convex_sgd::{train, ConvexRunSpec, Executor, Precision, StepRule};
use wildtamer::data_io::gen_synthetic_logistic;
use wildtamer::engine::{measure_tau, ParamVector};
use wildtamer::fixedpoint::{Bits, FixedPointSpec};
use wildtamer::model::{estimate_constants, GlmModel};

#[test]
fn twelve_threads_report_finite_positive_delay() {
    let (data, _) = gen_synthetic_logistic(200, 2000, 10, 1).unwrap();
    let k = estimate_constants(&data, GlmModel::Logistic, 1e-3, 1.5)
        .unwrap()
        .with_run(1.0, 0.5, 0.0, 0.0)
        .unwrap();
    let mut spec = ConvexRunSpec::new(k, 200_000, 4);
    spec.step = StepRule::Manual(0.05);
    spec.executor = Executor::Async(12);
    spec.log_writes = true;
    let r = train(&spec, &data, GlmModel::Logistic, 1e-3, None).unwrap();
    let run = r.run;
    assert_eq!(run.threads, 12);
    assert_eq!(run.updates, 200_000);
    assert!(run.mean_staleness.is_finite());
    assert!(run.mean_staleness > 0.0, "no interleaving observed");
    let log = run.log.expect("write log");
    assert_eq!(log.len() as u64, run.writes);
    assert!((measure_tau(&log).unwrap() - run.mean_staleness).abs() < 1e-9);
    assert!(log.records.windows(2).all(|w| w[0].t < w[1].t));
}

#[test]
fn fixed_point_training_stays_in_range() {
    let (data, _) = gen_synthetic_logistic(100, 1000, 10, 2).unwrap();
    let k = estimate_constants(&data, GlmModel::Logistic, 1e-3, 1.5)
        .unwrap()
        .with_run(1.0, 0.5, 0.0, 0.0)
        .unwrap();
    let mut spec = ConvexRunSpec::new(k, 20_000, 1);
    spec.step = StepRule::Manual(0.05);
    spec.precision = Precision::Fixed(Bits::Eight);
    spec.executor = Executor::Async(4);
    let r = train(&spec, &data, GlmModel::Logistic, 1e-3, None).unwrap();
    assert!(r.run.final_x.iter().all(|v| v.is_finite()));
    assert!(r.run.saturation.rate() < 0.01);
}

#[test]
fn concurrent_fixed_point_adds_are_exact() {
    let spec = FixedPointSpec::new(Bits::Sixteen, 1e-3).unwrap();
    let p = ParamVector::fixed_from_slice(&[0.0; 4], spec).unwrap();
    std::thread::scope(|s| {
        for t in 0..8 {
            let p = &p;
            s.spawn(move || {
                for i in 0..10_000 {
                    p.add_code(i % 4, if t % 2 == 0 { 3 } else { -1 });
                }
            });
        }
    });
    for i in 0..4 {
        // 4 threads add +3 and 4 add −1, 2500 times per coordinate each
        assert!((p.read(i) - 2500.0 * 8.0 * 1e-3).abs() < 1e-9);
    }
}
